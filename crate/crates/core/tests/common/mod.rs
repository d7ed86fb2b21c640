#![allow(dead_code)]

/// DKW-style tolerance `3 sqrt(ln(2/delta) / 2n)` at `delta = 0.05`.
pub fn dkw_tolerance(n: usize) -> f64 {
    3.0 * ((2.0f64 / 0.05).ln() / (2.0 * n as f64)).sqrt()
}

/// `sup_x |F_n(x) - x / scale|` against `U(0, scale)`.
pub fn ks_uniform(sample: &[f64], scale: f64) -> f64 {
    let mut v = sample.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = x / scale;
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// `sup_x (F_n(x) - x)`: how far the sample sits above the uniform CDF.
pub fn excess_over_uniform(sample: &[f64]) -> f64 {
    let mut v = sample.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter().enumerate().map(|(i, &x)| (i + 1) as f64 / n - x).fold(0.0, f64::max)
}

/// Two-sample Kolmogorov-Smirnov distance.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Two-sample critical value at level 0.001.
pub fn ks_two_sample_critical(na: usize, nb: usize) -> f64 {
    1.95 * ((na + nb) as f64 / (na * nb) as f64).sqrt()
}
