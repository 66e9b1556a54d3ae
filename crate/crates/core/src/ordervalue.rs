//! Order values: expected execution price minus the mid at the end of the
//! window, counting zero when the order does not fill.

use crate::error::{Error, Result};
use crate::fillmodel::FillModel;
use crate::params::{ModelParams, Side};
use crate::relprice::{Leg, RelPrice};
use crate::scalar::Scalar;

pub const DEFAULT_SEARCH_LIMIT: i32 = 12;

impl<T: Scalar> FillModel<T> {
    /// Value of an order that enters the book immediately and may rest for
    /// `t2` seconds.
    pub fn order_value_zero_delay(&self, side: Side, rel: RelPrice, t2: f64) -> Result<T> {
        if !(t2 >= 0.0) {
            return Err(Error::InvalidParams(format!("t2 must be >= 0, got {t2}")));
        }
        let k = match rel {
            RelPrice::PosInf => return Ok(T::zero()),
            RelPrice::NegInf => return Ok(-T::half()),
            RelPrice::Int(k) if k < 0 => return Ok(-T::half()),
            RelPrice::Int(k) => k,
        };
        let key = (side, k, t2.to_bits());
        if let Some(v) = self.zero_delay.read().expect("value cache poisoned").get(&key) {
            return Ok(*v);
        }
        let f = self.fill_probability(side, rel, t2)?;
        let v = if f == T::zero() { T::zero() } else { self.edge(side)? * f };
        self.zero_delay.write().expect("value cache poisoned").insert(key, v);
        Ok(v)
    }

    /// Value of an order sent now that reaches the book after `t1` seconds
    /// and may rest for `t2` seconds after that.
    pub fn order_value(&self, side: Side, t1: f64, t2: f64, rel: RelPrice) -> Result<T> {
        if !(t1 >= 0.0) {
            return Err(Error::InvalidParams(format!("t1 must be >= 0, got {t1}")));
        }
        let delta = match rel {
            RelPrice::PosInf => return Ok(T::zero()),
            RelPrice::NegInf => return Ok(-T::half()),
            RelPrice::Int(d) => d,
        };
        if t1 == 0.0 {
            return self.order_value_zero_delay(side, rel, t2);
        }
        let inc = self.increments(t1)?;
        let s = side.drift_sign();
        let mut v = T::zero();
        for (k, p) in inc.iter() {
            let h = self.order_value_zero_delay(side, RelPrice::Int(delta + s * k as i32), t2)?;
            v = v + p * h;
        }
        // Omitted displacements: half lie beyond the order (marketable).
        Ok(v - T::of(0.25) * inc.tail_mass())
    }

    /// One-period value of an action leg given the outstanding order at
    /// `r_out`.
    pub fn h_act(&self, side: Side, r_out: RelPrice, leg: Leg) -> Result<T> {
        let p = self.params();
        match leg {
            Leg::DoNothing => self.order_value_zero_delay(side, r_out, p.delta_t),
            Leg::Quote(delta) => Ok(self.order_value_zero_delay(side, r_out, p.delta_tau)?
                + self.order_value(side, p.delta_tau, p.delta_t - p.delta_tau, delta)?),
        }
    }

    /// Integer quote with the highest value over the window, if positive.
    pub fn best_positive_quote(
        &self,
        side: Side,
        t1: f64,
        t2: f64,
        search_limit: i32,
    ) -> Result<Option<(i32, T)>> {
        if search_limit < 1 {
            return Err(Error::InvalidParams("search_limit must be >= 1".into()));
        }
        let start = if t1 == 0.0 { 0 } else { -2 };
        let mut best: Option<(i32, T)> = None;
        for d in start..=search_limit {
            let v = self.order_value(side, t1, t2, RelPrice::Int(d))?;
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((d, v));
            }
        }
        let found = best.filter(|&(_, v)| v > T::zero());
        let p = self.params();
        if found.is_none() && p.side_rate(side) > 0.5 * p.lambda {
            log::warn!(
                "no positive {side} quote within relative price {search_limit}; raise the search limit"
            );
        }
        Ok(found)
    }

    /// Probability that a quote at `delta` sent now executes within the
    /// window `[t1, t1 + t2)`, counting execution on arrival.
    pub fn quote_fill_probability(&self, side: Side, delta: i32, t1: f64, t2: f64) -> Result<T> {
        let inc = self.increments(t1)?;
        let s = side.drift_sign();
        let mut f = T::zero();
        for (k, p) in inc.iter() {
            let x = delta + s * k as i32;
            let g = if x <= -1 { T::one() } else { self.fill_probability(side, RelPrice::Int(x), t2)? };
            f = f + p * g;
        }
        Ok(f + T::half() * inc.tail_mass())
    }
}

pub fn order_value_zero_delay<T: Scalar>(side: Side, rel: RelPrice, t2: f64, params: &ModelParams) -> Result<T> {
    FillModel::<T>::new(params.clone())?.order_value_zero_delay(side, rel, t2)
}

pub fn order_value<T: Scalar>(side: Side, t1: f64, t2: f64, rel: RelPrice, params: &ModelParams) -> Result<T> {
    FillModel::<T>::new(params.clone())?.order_value(side, t1, t2, rel)
}

pub fn h_act<T: Scalar>(side: Side, r_out: RelPrice, leg: Leg, params: &ModelParams) -> Result<T> {
    FillModel::<T>::new(params.clone())?.h_act(side, r_out, leg)
}

pub fn best_positive_quote<T: Scalar>(
    side: Side,
    t1: f64,
    t2: f64,
    params: &ModelParams,
    search_limit: i32,
) -> Result<Option<(i32, T)>> {
    FillModel::<T>::new(params.clone())?.best_positive_quote(side, t1, t2, search_limit)
}
