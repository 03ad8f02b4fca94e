//! Shared log-domain helpers.

use std::sync::OnceLock;

/// `log(exp(a) + exp(b))` without overflow; `-inf` encodes zero.
#[inline]
pub(crate) fn logaddexp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    if a >= b {
        a + (b - a).exp().ln_1p()
    } else {
        b + (a - b).exp().ln_1p()
    }
}

const LN_FACT_TABLE: usize = 1024;

static LN_FACT: OnceLock<Vec<f64>> = OnceLock::new();

/// `log(n!)`, exact to double precision for small `n`, Stirling beyond the
/// cached range (series error < 1e-20 there).
pub(crate) fn ln_factorial(n: usize) -> f64 {
    let table = LN_FACT.get_or_init(|| {
        let mut t = vec![0.0; LN_FACT_TABLE];
        for i in 2..LN_FACT_TABLE {
            t[i] = t[i - 1] + (i as f64).ln();
        }
        t
    });
    if n < LN_FACT_TABLE {
        table[n]
    } else {
        let x = n as f64;
        x * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI * x).ln() + 1.0 / (12.0 * x)
            - 1.0 / (360.0 * x.powi(3))
    }
}

/// `log(binomial(n, k))`.
pub(crate) fn ln_binomial(n: usize, k: usize) -> f64 {
    debug_assert!(k <= n);
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

/// `x * log(x)` with the `0 log 0 = 0` convention.
#[inline]
pub(crate) fn xlogx(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}
