//! Transient distributions of finite continuous-time Markov chains by
//! uniformization.

use crate::scalar::Scalar;

/// Relative tail below which Poisson terms are dropped.
pub const POISSON_TAIL: f64 = 1e-13;

/// Truncated Poisson(mean) weights with the dropped mass recorded.
#[derive(Clone, Debug)]
pub struct PoissonWeights<T> {
    pub weights: Vec<T>,
    pub tail: T,
}

impl<T: Scalar> PoissonWeights<T> {
    pub fn new(mean: f64, tail_tol: f64) -> Self {
        assert!(mean >= 0.0 && mean.is_finite(), "Poisson mean must be finite and >= 0");
        if mean == 0.0 {
            return PoissonWeights { weights: vec![T::one()], tail: T::zero() };
        }
        let tol = tail_tol.max(T::epsilon().to_f64_lossy());
        let cap = (mean + 40.0 * mean.sqrt() + 60.0).ceil() as usize;
        // Recurrences out from the mode, then normalize.
        let mode = (mean.floor() as usize).min(cap);
        let mut w = vec![0.0f64; cap + 1];
        w[mode] = 1.0;
        for n in (0..mode).rev() {
            w[n] = w[n + 1] * (n + 1) as f64 / mean;
        }
        for n in mode + 1..=cap {
            w[n] = w[n - 1] * mean / n as f64;
        }
        let total: f64 = w.iter().rev().sum();
        w.iter_mut().for_each(|x| *x /= total);
        // Suffix sums from the far end so the tail is not lost to rounding.
        let mut tail = 0.0f64;
        let mut cut = w.len();
        for n in (0..w.len()).rev() {
            if (n as f64) < mean || tail + w[n] >= tol {
                break;
            }
            tail += w[n];
            cut = n;
        }
        w.truncate(cut.max(1));
        PoissonWeights { weights: w.into_iter().map(T::of).collect(), tail: T::of(tail) }
    }
}

/// Computes `sum_n w_n P^n pi0`, where `step(v, out)` writes `v P` into
/// `out` (with `out` zeroed on entry). Returns the distribution and the
/// Poisson mass that was not propagated.
pub fn uniformize<T, F>(initial: Vec<T>, rate_time: f64, tail_tol: f64, mut step: F) -> (Vec<T>, T)
where
    T: Scalar,
    F: FnMut(&[T], &mut [T]),
{
    let pw = PoissonWeights::<T>::new(rate_time, tail_tol);
    let mut cur = initial;
    let mut next = vec![T::zero(); cur.len()];
    let mut out = vec![T::zero(); cur.len()];
    let last = pw.weights.len() - 1;
    for (n, &w) in pw.weights.iter().enumerate() {
        if w > T::zero() {
            for (o, c) in out.iter_mut().zip(&cur) {
                *o = *o + w * *c;
            }
        }
        if n < last {
            next.iter_mut().for_each(|x| *x = T::zero());
            step(&cur, &mut next);
            std::mem::swap(&mut cur, &mut next);
        }
    }
    (out, pw.tail)
}
