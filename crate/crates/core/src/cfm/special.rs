//! Sine integral and harmonic numbers.

use num_complex::Complex64;
use std::f64::consts::FRAC_PI_2;

const SERIES_LIMIT: f64 = 4.0;
const CF_EPS: f64 = 1e-16;
const CF_TINY: f64 = 1e-300;
const CF_MAX_ITER: usize = 200;

/// Sine integral Si(x) = ∫₀ˣ sin(t)/t dt.
///
/// Power series below |x| = 4, continued fraction for E₁(ix) above.
pub fn sine_integral(x: f64) -> f64 {
    let t = x.abs();
    let value = if t < SERIES_LIMIT {
        series(t)
    } else {
        continued_fraction(t)
    };
    value.copysign(x)
}

fn series(t: f64) -> f64 {
    let t2 = t * t;
    let mut term = t;
    let mut sum = t;
    let mut k = 0.0;
    loop {
        k += 1.0;
        term *= -t2 / ((2.0 * k) * (2.0 * k + 1.0));
        let add = term / (2.0 * k + 1.0);
        sum += add;
        if add.abs() <= 1e-17 * sum.abs() {
            return sum;
        }
    }
}

fn continued_fraction(t: f64) -> f64 {
    let mut b = Complex64::new(1.0, t);
    let mut c = Complex64::new(1.0 / CF_TINY, 0.0);
    let mut d = b.inv();
    let mut h = d;
    for i in 1..CF_MAX_ITER {
        let a = -((i * i) as f64);
        b += 2.0;
        d = (d * a + b).inv();
        c = b + c.inv() * a;
        let delta = c * d;
        h *= delta;
        if (delta - 1.0).norm() < CF_EPS {
            break;
        }
    }
    let h = Complex64::new(t.cos(), -t.sin()) * h;
    FRAC_PI_2 + h.im
}

/// HN(m) = Σ_{k=1..m} 1/k, with HN(0) = 0.
pub fn harmonic_number(m: u32) -> f64 {
    (1..=m).rev().map(|k| 1.0 / k as f64).sum()
}

/// HN(N−1) + (1−N)/N, the span-count factor of the coherent SCI term.
pub fn coherence_bracket(n_spans: u32) -> f64 {
    if n_spans <= 1 {
        return 0.0;
    }
    let n = n_spans as f64;
    harmonic_number(n_spans - 1) + (1.0 - n) / n
}
