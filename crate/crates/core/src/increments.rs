//! Law of the mid-price displacement over a fixed window.
//!
//! With jumps of +-1 tick at Poisson rate `lambda`, the displacement over
//! `t` is a Poisson mixture of symmetric simple random walks, i.e. a
//! Skellam(lambda t / 2, lambda t / 2) variable.

use serde::Serialize;

use crate::ctmc::{PoissonWeights, POISSON_TAIL};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug, Serialize)]
pub struct PriceIncrementDist<T> {
    rate_time: f64,
    half_width: usize,
    /// `pmf[k + half_width]` is `P(displacement = k)`.
    pmf: Vec<T>,
    tail_mass: T,
}

impl<T: Scalar> PriceIncrementDist<T> {
    pub fn rate_time(&self) -> f64 {
        self.rate_time
    }

    pub fn half_width(&self) -> usize {
        self.half_width
    }

    pub fn tail_mass(&self) -> T {
        self.tail_mass
    }

    pub fn pmf(&self, k: i64) -> T {
        let kk = k.unsigned_abs() as usize;
        if kk > self.half_width {
            T::zero()
        } else {
            self.pmf[(k + self.half_width as i64) as usize]
        }
    }

    /// `(k, P(k))` over the retained support.
    pub fn iter(&self) -> impl Iterator<Item = (i64, T)> + '_ {
        let k0 = self.half_width as i64;
        self.pmf.iter().enumerate().map(move |(i, &p)| (i as i64 - k0, p))
    }
}

/// Displacement law of the mid-price over `t` seconds at jump rate `lambda`.
///
/// The half-width is the smallest `K` for which the omitted mass, two-sided
/// tail plus dropped Poisson terms, stays below `epsilon_tail`.
pub fn price_increment_dist<T: Scalar>(
    lambda: f64,
    t: f64,
    epsilon_tail: f64,
) -> Result<PriceIncrementDist<T>> {
    if !(lambda >= 0.0 && lambda.is_finite()) || !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidParams(format!(
            "price increments need lambda >= 0 and t >= 0, got lambda = {lambda}, t = {t}"
        )));
    }
    if !(epsilon_tail > 0.0 && epsilon_tail < 1.0) {
        return Err(Error::InvalidParams("epsilon_tail must lie in (0, 1)".into()));
    }
    let x = lambda * t;
    let pw = PoissonWeights::<f64>::new(x, POISSON_TAIL.min(epsilon_tail / 4.0));
    let n_max = pw.weights.len() - 1;

    // Nonnegative half of the walk law after n steps; v[k] = P(S_n = k).
    let mut v = vec![0.0f64; n_max + 2];
    let mut nv = vec![0.0f64; n_max + 2];
    v[0] = 1.0;
    let mut acc = vec![0.0f64; n_max + 1];
    for (n, &w) in pw.weights.iter().enumerate() {
        if w > 0.0 {
            for k in (n % 2..=n).step_by(2) {
                acc[k] += w * v[k];
            }
        }
        if n == n_max {
            break;
        }
        nv[0] = v[1];
        for k in 1..=n + 1 {
            nv[k] = 0.5 * (v[k - 1] + v[k + 1]);
        }
        std::mem::swap(&mut v, &mut nv);
    }

    // suffix[k] = sum_{j >= k} acc[j]
    let mut suffix = vec![0.0f64; n_max + 2];
    for k in (0..=n_max).rev() {
        suffix[k] = suffix[k + 1] + acc[k];
    }
    let mut half_width = n_max;
    for k in 0..=n_max {
        if 2.0 * suffix[k + 1] + pw.tail < epsilon_tail {
            half_width = k;
            break;
        }
    }
    let tail_mass = pw.tail + 2.0 * suffix[half_width + 1];
    let mut pmf = vec![T::zero(); 2 * half_width + 1];
    for k in 0..=half_width {
        let p = T::of(acc[k]);
        pmf[half_width + k] = p;
        pmf[half_width - k] = p;
    }
    Ok(PriceIncrementDist { rate_time: x, half_width, pmf, tail_mass: T::of(tail_mass) })
}

/// Expected profit in ticks of one fill on a side with uninformed rate
/// `lambda_side`: `lambda_side / (lambda_side + lambda / 2) - 1/2`.
pub fn edge_per_fill(lambda: f64, lambda_side: f64) -> Result<f64> {
    if lambda < 0.0 || lambda_side < 0.0 {
        return Err(Error::InvalidParams("rates must be nonnegative".into()));
    }
    if lambda == 0.0 && lambda_side == 0.0 {
        return Err(Error::UndefinedEdge);
    }
    Ok(lambda_side / (lambda_side + 0.5 * lambda) - 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Skellam pmf by direct double series over the two Poisson counts.
    fn skellam_series(mu: f64, k: i64) -> f64 {
        let mut s = 0.0;
        let ln_mu = mu.ln();
        let lf = |n: i64| (1..=n).map(|j| (j as f64).ln()).sum::<f64>();
        for m in 0..400i64 {
            let n = m + k;
            if n < 0 {
                continue;
            }
            s += (-2.0 * mu + (n + m) as f64 * ln_mu - lf(n) - lf(m)).exp();
        }
        s
    }

    #[test]
    fn point_mass_at_zero_time() {
        let d = price_increment_dist::<f64>(1.3, 0.0, 1e-12).unwrap();
        assert_eq!(d.half_width(), 0);
        assert_eq!(d.pmf(0), 1.0);
        let d = price_increment_dist::<f64>(0.0, 10.0, 1e-12).unwrap();
        assert_eq!(d.pmf(0), 1.0);
    }

    #[test]
    fn rejects_negative_inputs() {
        assert!(price_increment_dist::<f64>(-1.0, 1.0, 1e-12).is_err());
        assert!(price_increment_dist::<f64>(1.0, -1.0, 1e-12).is_err());
    }

    #[test]
    fn unit_rate_time_center_matches_series() {
        // Frozen from the even-n series sum_n e^-1 / n! C(n, n/2) / 2^n.
        const FROZEN: f64 = 0.465_759_607_593_640_4;
        let d = price_increment_dist::<f64>(1.0, 1.0, 1e-12).unwrap();
        assert!((d.pmf(0) - FROZEN).abs() < 1e-14);
        assert!((skellam_series(0.5, 0) - FROZEN).abs() < 1e-14);
    }

    #[test]
    fn matches_skellam_series() {
        for &x in &[0.05, 1.3, 6.0, 25.0] {
            let d = price_increment_dist::<f64>(x, 1.0, 1e-12).unwrap();
            for k in 0..8 {
                assert!((d.pmf(k) - skellam_series(x / 2.0, k)).abs() < 1e-12, "x={x} k={k}");
            }
        }
    }

    #[test]
    fn edge_values() {
        assert_eq!(edge_per_fill(1.56 / 60.0, 0.78 / 60.0).unwrap(), 0.0);
        assert_eq!(edge_per_fill(0.0, 1.0).unwrap(), 0.5);
        let e = edge_per_fill(1.56 / 60.0, 0.875 / 60.0).unwrap();
        assert!((e - (0.875 / 1.655 - 0.5)).abs() < 1e-15);
        assert!(matches!(edge_per_fill(0.0, 0.0), Err(Error::UndefinedEdge)));
    }

    #[test]
    fn single_precision_works() {
        let d = price_increment_dist::<f32>(2.0, 1.0, 1e-6).unwrap();
        let s: f32 = d.iter().map(|(_, p)| p).sum();
        assert!((s + d.tail_mass() - 1.0).abs() < 1e-5);
    }

    proptest! {
        #[test]
        fn symmetric_centered_normalized(x in 0.0f64..60.0) {
            let d = price_increment_dist::<f64>(x, 1.0, 1e-12).unwrap();
            let mut mean = 0.0;
            let mut total = 0.0;
            for (k, p) in d.iter() {
                prop_assert_eq!(p, d.pmf(-k));
                mean += k as f64 * p;
                total += p;
            }
            prop_assert!(mean.abs() < 1e-14);
            prop_assert!((total + d.tail_mass() - 1.0).abs() < 1e-14);
            prop_assert!(d.tail_mass() < 1e-12);
        }

        #[test]
        fn composes_under_convolution(lam in 0.01f64..3.0, t1 in 0.0f64..4.0, t2 in 0.0f64..4.0) {
            let a = price_increment_dist::<f64>(lam, t1, 1e-12).unwrap();
            let b = price_increment_dist::<f64>(lam, t2, 1e-12).unwrap();
            let c = price_increment_dist::<f64>(lam, t1 + t2, 1e-12).unwrap();
            let w = (a.half_width() + b.half_width()).max(c.half_width()) as i64;
            let mut tv = 0.0;
            for k in -w..=w {
                let conv: f64 = a.iter().map(|(i, p)| p * b.pmf(k - i)).sum();
                tv += (conv - c.pmf(k)).abs();
            }
            prop_assert!(tv < 1e-10, "tv = {}", tv);
        }
    }
}
