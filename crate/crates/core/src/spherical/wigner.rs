//! Wigner small-d matrices `d^l_{mm'}(β) = ⟨l m| e^{-iβJ_y} |l m'⟩`.

fn ln_factorial(n: i64) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// Closed-form sum for a single element. Accurate for small `l`; used to seed
/// the recurrence and as a reference.
pub fn wigner_d_direct(l: i64, m: i64, mp: i64, beta: f64) -> f64 {
    if m.abs() > l || mp.abs() > l {
        return 0.0;
    }
    let (c, s) = ((beta / 2.0).cos(), (beta / 2.0).sin());
    let pre = 0.5 * (ln_factorial(l + m) + ln_factorial(l - m) + ln_factorial(l + mp) + ln_factorial(l - mp));
    let s_min = 0.max(mp - m);
    let s_max = (l + mp).min(l - m);
    let mut acc = 0.0;
    for k in s_min..=s_max {
        let denom = ln_factorial(l + mp - k) + ln_factorial(k) + ln_factorial(m - mp + k) + ln_factorial(l - m - k);
        let sign = if (m - mp + k) % 2 == 0 { 1.0 } else { -1.0 };
        let cp = (2 * l + mp - m - 2 * k) as i32;
        let sp = (m - mp + 2 * k) as i32;
        acc += sign * (pre - denom).exp() * c.powi(cp) * s.powi(sp);
    }
    acc
}

/// `d^l_{mm'}(β_j)` for every `l ≤ l_max`, every `(m, m')` and every β sample
/// of a sphere grid with the given bandwidth.
#[derive(Debug, Clone)]
pub struct WignerTable {
    l_max: usize,
    betas: Vec<f64>,
    // per β: for each (m, m') pair, values for l = max(|m|,|m'|)..=l_max
    offsets: Vec<usize>,
    per_beta: usize,
    values: Vec<f64>,
}

impl WignerTable {
    pub fn new(l_max: usize, betas: Vec<f64>) -> Self {
        let width = 2 * l_max + 1;
        let mut offsets = Vec::with_capacity(width * width + 1);
        let mut total = 0usize;
        for m in -(l_max as i64)..=(l_max as i64) {
            for mp in -(l_max as i64)..=(l_max as i64) {
                offsets.push(total);
                total += l_max + 1 - m.abs().max(mp.abs()) as usize;
            }
        }
        offsets.push(total);
        let mut values = vec![0.0; total * betas.len()];
        for (bi, &beta) in betas.iter().enumerate() {
            let block = &mut values[bi * total..(bi + 1) * total];
            let mut p = 0;
            for m in -(l_max as i64)..=(l_max as i64) {
                for mp in -(l_max as i64)..=(l_max as i64) {
                    let n = l_max + 1 - m.abs().max(mp.abs()) as usize;
                    fill_column(m, mp, beta, &mut block[offsets[p]..offsets[p] + n]);
                    p += 1;
                }
            }
        }
        Self { l_max, betas, offsets, per_beta: total, values }
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    /// Values `d^l_{mm'}(β_j)` for `l` starting at `max(|m|, |m'|)`.
    pub fn column(&self, j: usize, m: i64, mp: i64) -> &[f64] {
        let width = 2 * self.l_max as i64 + 1;
        let p = ((m + self.l_max as i64) * width + mp + self.l_max as i64) as usize;
        let base = j * self.per_beta;
        &self.values[base + self.offsets[p]..base + self.offsets[p + 1]]
    }

    pub fn get(&self, j: usize, l: usize, m: i64, mp: i64) -> f64 {
        let l0 = m.abs().max(mp.abs()) as usize;
        if l < l0 {
            return 0.0;
        }
        self.column(j, m, mp)[l - l0]
    }
}

/// Three-term recurrence in `l` for fixed `(m, m')`.
fn fill_column(m: i64, mp: i64, beta: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    let l0 = m.abs().max(mp.abs());
    let cb = beta.cos();
    let (mf, mpf) = (m as f64, mp as f64);
    out[0] = wigner_d_direct(l0, m, mp, beta);
    let mut prev = 0.0;
    for i in 1..out.len() {
        let l = (l0 + i as i64 - 1) as f64;
        let cur = out[i - 1];
        let (a, b) = if l == 0.0 {
            (cb, 0.0)
        } else {
            (
                cb - mf * mpf / (l * (l + 1.0)),
                ((l * l - mf * mf) * (l * l - mpf * mpf)).sqrt() / (l * (2.0 * l + 1.0)),
            )
        };
        let lp = l + 1.0;
        let scale = lp * (2.0 * l + 1.0) / ((lp * lp - mf * mf) * (lp * lp - mpf * mpf)).sqrt();
        let next = (a * cur - b * prev) * scale;
        prev = cur;
        out[i] = next;
    }
}
