/// Orthonormal associated Legendre values `P̄_l^m(cos θ)` for `0 ≤ m ≤ l ≤ l_max`,
/// including `1/√(4π)` and the Condon–Shortley phase, so that
/// `Y_l^m(θ, φ) = P̄_l^m(cos θ)·e^{imφ}`. Index with [`legendre_index`].
pub fn normalized_legendre(l_max: usize, cos_theta: f64, sin_theta: f64) -> Vec<f64> {
    let mut out = vec![0.0; (l_max + 1) * (l_max + 2) / 2];
    let x = cos_theta;
    let mut pmm = 1.0 / (4.0 * std::f64::consts::PI).sqrt();
    for m in 0..=l_max {
        if m > 0 {
            pmm *= -((2 * m + 1) as f64 / (2 * m) as f64).sqrt() * sin_theta;
        }
        out[legendre_index(m, m)] = pmm;
        if m == l_max {
            break;
        }
        let mut prev2 = pmm;
        let mut prev1 = ((2 * m + 3) as f64).sqrt() * x * pmm;
        out[legendre_index(m + 1, m)] = prev1;
        for l in (m + 2)..=l_max {
            let (lf, mf) = (l as f64, m as f64);
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = (((lf - 1.0) * (lf - 1.0) - mf * mf) / (4.0 * (lf - 1.0) * (lf - 1.0) - 1.0)).sqrt();
            let cur = a * (x * prev1 - b * prev2);
            out[legendre_index(l, m)] = cur;
            prev2 = prev1;
            prev1 = cur;
        }
    }
    out
}

#[inline]
pub fn legendre_index(l: usize, m: usize) -> usize {
    l * (l + 1) / 2 + m
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn matches_closed_forms() {
        for &t in &[0.1f64, 0.9, 1.7, 2.9] {
            let (x, s) = (t.cos(), t.sin());
            let p = normalized_legendre(3, x, s);
            let close = |a: f64, b: f64| assert!((a - b).abs() < 1e-13, "{a} vs {b}");
            close(p[legendre_index(0, 0)], 0.5 / PI.sqrt());
            close(p[legendre_index(1, 0)], 0.5 * (3.0 / PI).sqrt() * x);
            close(p[legendre_index(1, 1)], -0.5 * (3.0 / (2.0 * PI)).sqrt() * s);
            close(p[legendre_index(2, 2)], 0.25 * (15.0 / (2.0 * PI)).sqrt() * s * s);
            close(p[legendre_index(3, 2)], 0.25 * (105.0 / (2.0 * PI)).sqrt() * s * s * x);
            close(p[legendre_index(3, 3)], -0.125 * (35.0 / PI).sqrt() * s * s * s);
        }
    }
}
