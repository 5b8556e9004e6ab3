//! Small numeric helpers shared across modules.

/// In-place softmax with max-subtraction for stability. The result is a
/// strictly positive distribution summing to one (up to rounding).
pub(crate) fn softmax_in_place(xs: &mut [f64]) {
    debug_assert!(!xs.is_empty());
    let mut max = f64::NEG_INFINITY;
    for &x in xs.iter() {
        if x > max {
            max = x;
        }
    }
    let mut sum = 0.0;
    for x in xs.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    let inv = 1.0 / sum;
    for x in xs.iter_mut() {
        *x *= inv;
    }
}

/// Sample from Poisson(mu) by Knuth's product-of-uniforms method. Fine for
/// the small means used here (mu around 10) and keeps the consumed RNG
/// stream explicit and stable.
pub(crate) fn poisson(rng: &mut impl rand::Rng, mu: f64) -> u64 {
    debug_assert!(mu > 0.0);
    let limit = (-mu).exp();
    let mut k = 0u64;
    let mut p = 1.0;
    loop {
        p *= rng.random::<f64>();
        if p <= limit {
            return k;
        }
        k += 1;
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Standard normal draw via Box-Muller. Consumes exactly two uniforms per
/// call so the stream position stays predictable.
pub(crate) fn gaussian(rng: &mut impl rand::Rng) -> f64 {
    let u1: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Index of the maximum entry; ties go to the lowest index.
pub(crate) fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for (i, &x) in xs.iter().enumerate() {
        if x > best_v {
            best_v = x;
            best = i;
        }
    }
    best
}
