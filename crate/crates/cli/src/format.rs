use serde::Serialize;
use serde_json::{Number, Value};

pub const SIGNIFICANT_DIGITS: usize = 6;

/// `x` rounded to six significant digits; integers and non-finite values
/// pass through.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x).parse().unwrap_or(x)
}

/// Rounds every float in the tree in place.
pub fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(r) = n.as_f64().map(round_sig).and_then(Number::from_f64) {
                *n = r;
            }
        }
        Value::Array(a) => a.iter_mut().for_each(round_value),
        Value::Object(m) => m.values_mut().for_each(round_value),
        _ => {}
    }
}

pub fn to_value<T: Serialize>(x: &T) -> serde_json::Result<Value> {
    let mut v = serde_json::to_value(x)?;
    round_value(&mut v);
    Ok(v)
}

/// Pretty JSON with six significant digits.
pub fn to_json_pretty<T: Serialize>(x: &T) -> serde_json::Result<String> {
    serde_json::to_string_pretty(&to_value(x)?)
}

/// Single-line JSON with six significant digits.
pub fn to_json_line<T: Serialize>(x: &T) -> serde_json::Result<String> {
    serde_json::to_string(&to_value(x)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rounds_nested_floats_only() {
        let v = serde_json::json!({"a": 0.1234564, "b": [3.14159265, 12], "c": {"d": 1e-9 / 3.0}, "e": "x"});
        let s = serde_json::to_string(&to_value(&v).unwrap()).unwrap();
        assert_eq!(s, r#"{"a":0.123456,"b":[3.14159,12],"c":{"d":3.33333e-10},"e":"x"}"#);
    }

    proptest! {
        #[test]
        fn relative_error_and_idempotence(x in -1e12f64..1e12) {
            let r = round_sig(x);
            prop_assert!((r - x).abs() <= 5e-6 * x.abs() + f64::MIN_POSITIVE);
            prop_assert_eq!(round_sig(r), r);
        }
    }
}
