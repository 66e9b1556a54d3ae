use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Ask,
    Bid,
}

impl Side {
    /// Sign applied to a mid-price displacement when updating a relative
    /// price on this side: an ask moves down relative to the touch when the
    /// mid moves up.
    pub fn drift_sign(self) -> i32 {
        match self {
            Side::Ask => -1,
            Side::Bid => 1,
        }
    }

    /// Change of inventory when an order on this side fills.
    pub fn inventory_step(self) -> i32 {
        match self {
            Side::Ask => -1,
            Side::Bid => 1,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Side::Ask => write!(f, "ask"),
            Side::Bid => write!(f, "bid"),
        }
    }
}

/// Market and trading parameters. Rates are per second, times in seconds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub lambda: f64,
    pub lambda_plus: f64,
    pub lambda_minus: f64,
    pub delta_tau: f64,
    pub delta_t: f64,
    pub horizon_t: f64,
    pub q_lo: i32,
    pub q_hi: i32,
    pub tick: f64,
    pub n_periods: usize,
    pub epsilon_tail: f64,
}

pub const DEFAULT_EPSILON_TAIL: f64 = 1e-12;
pub const DEFAULT_TICK: f64 = 0.01;

/// Number of decision periods in `[0, T)`.
///
/// `(T - dtau) / dt` is rounded when it lies within 1e-9 of an integer so
/// that values like `T = 600, dtau = 0.02, dt = 1` give the intended count.
pub fn periods_for(horizon_t: f64, delta_tau: f64, delta_t: f64) -> usize {
    let x = (horizon_t - delta_tau) / delta_t;
    if x <= 0.0 {
        return 0;
    }
    let r = x.round();
    if (x - r).abs() < 1e-9 {
        r as usize
    } else {
        x.floor() as usize
    }
}

impl ModelParams {
    /// Builds validated parameters with rates given per second.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        lambda: f64,
        lambda_plus: f64,
        lambda_minus: f64,
        delta_tau: f64,
        delta_t: f64,
        horizon_t: f64,
        q_lo: i32,
        q_hi: i32,
    ) -> Result<Self> {
        let p = ModelParams {
            lambda,
            lambda_plus,
            lambda_minus,
            delta_tau,
            delta_t,
            horizon_t,
            q_lo,
            q_hi,
            tick: DEFAULT_TICK,
            n_periods: periods_for(horizon_t, delta_tau, delta_t),
            epsilon_tail: DEFAULT_EPSILON_TAIL,
        };
        p.validate()?;
        Ok(p)
    }

    /// Same as [`ModelParams::new`] with the three rates given per minute.
    #[allow(clippy::too_many_arguments)]
    pub fn per_minute(
        lambda: f64,
        lambda_plus: f64,
        lambda_minus: f64,
        delta_tau: f64,
        delta_t: f64,
        horizon_t: f64,
        q_lo: i32,
        q_hi: i32,
    ) -> Result<Self> {
        Self::new(
            lambda / 60.0,
            lambda_plus / 60.0,
            lambda_minus / 60.0,
            delta_tau,
            delta_t,
            horizon_t,
            q_lo,
            q_hi,
        )
    }

    /// Replaces the horizon so that exactly `n` periods fit.
    pub fn with_n_periods(mut self, n: usize) -> Self {
        self.horizon_t = n as f64 * self.delta_t + self.delta_tau;
        self.n_periods = n;
        self
    }

    pub fn with_delta_tau(mut self, delta_tau: f64) -> Result<Self> {
        self.delta_tau = delta_tau;
        self.n_periods = periods_for(self.horizon_t, delta_tau, self.delta_t);
        self.validate()?;
        Ok(self)
    }

    pub fn with_side_rates(mut self, lambda_plus: f64, lambda_minus: f64) -> Result<Self> {
        self.lambda_plus = lambda_plus;
        self.lambda_minus = lambda_minus;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParams(m.to_string()));
        let rates = [self.lambda, self.lambda_plus, self.lambda_minus];
        if rates.iter().any(|r| !r.is_finite() || *r < 0.0) {
            return bad("rates must be finite and nonnegative");
        }
        if !(self.delta_tau.is_finite() && self.delta_tau >= 0.0) {
            return bad("delta_tau must be >= 0");
        }
        if !(self.delta_t.is_finite() && self.delta_t > self.delta_tau) {
            return bad("delta_t must exceed delta_tau");
        }
        if !(self.horizon_t.is_finite() && self.horizon_t >= 0.0) {
            return bad("horizon_T must be >= 0");
        }
        if !(self.q_lo < -1 && self.q_hi > 1) {
            return bad("inventory bounds must satisfy q_lo < -1 and q_hi > 1");
        }
        if !(self.tick > 0.0) {
            return bad("tick must be positive");
        }
        if !(self.epsilon_tail > 0.0 && self.epsilon_tail < 1.0) {
            return bad("epsilon_tail must lie in (0, 1)");
        }
        Ok(())
    }

    pub fn side_rate(&self, side: Side) -> f64 {
        match side {
            Side::Ask => self.lambda_plus,
            Side::Bid => self.lambda_minus,
        }
    }
}

/// JSON configuration. Rates carry an explicit unit suffix; exactly one of
/// the two spellings must be present for each rate.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    pub lambda_per_minute: Option<f64>,
    pub lambda_per_second: Option<f64>,
    pub lambda_plus_per_minute: Option<f64>,
    pub lambda_plus_per_second: Option<f64>,
    pub lambda_minus_per_minute: Option<f64>,
    pub lambda_minus_per_second: Option<f64>,
    pub delta_tau: f64,
    pub delta_t: f64,
    #[serde(rename = "horizon_T")]
    pub horizon_t: f64,
    pub q_lo: i32,
    pub q_hi: i32,
    pub tick: Option<f64>,
    pub epsilon_tail: Option<f64>,
    pub r_max: Option<u32>,
    pub grid_min: Option<i32>,
    pub grid_max: Option<i32>,
}

fn pick_rate(name: &str, per_min: Option<f64>, per_sec: Option<f64>) -> Result<f64> {
    match (per_min, per_sec) {
        (Some(m), None) => Ok(m / 60.0),
        (None, Some(s)) => Ok(s),
        (None, None) => Err(Error::InvalidParams(format!(
            "missing {name}_per_minute or {name}_per_second"
        ))),
        (Some(_), Some(_)) => Err(Error::InvalidParams(format!(
            "both {name}_per_minute and {name}_per_second given"
        ))),
    }
}

impl ParamsConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn to_params(&self) -> Result<ModelParams> {
        let mut p = ModelParams {
            lambda: pick_rate("lambda", self.lambda_per_minute, self.lambda_per_second)?,
            lambda_plus: pick_rate(
                "lambda_plus",
                self.lambda_plus_per_minute,
                self.lambda_plus_per_second,
            )?,
            lambda_minus: pick_rate(
                "lambda_minus",
                self.lambda_minus_per_minute,
                self.lambda_minus_per_second,
            )?,
            delta_tau: self.delta_tau,
            delta_t: self.delta_t,
            horizon_t: self.horizon_t,
            q_lo: self.q_lo,
            q_hi: self.q_hi,
            tick: self.tick.unwrap_or(DEFAULT_TICK),
            n_periods: 0,
            epsilon_tail: self.epsilon_tail.unwrap_or(DEFAULT_EPSILON_TAIL),
        };
        p.validate()?;
        p.n_periods = periods_for(p.horizon_t, p.delta_tau, p.delta_t);
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn per_minute_conversion() {
        let p = ModelParams::per_minute(1.56, 0.875, 0.875, 0.02, 1.0, 600.0, -4, 4).unwrap();
        assert!((p.lambda - 0.026).abs() < 1e-15);
        assert_eq!(p.n_periods, 599);
    }

    #[test]
    fn rejects_bad_bounds() {
        assert!(ModelParams::new(1.0, 1.0, 1.0, 0.0, 1.0, 10.0, -1, 4).is_err());
        assert!(ModelParams::new(1.0, 1.0, 1.0, 1.0, 1.0, 10.0, -2, 4).is_err());
        assert!(ModelParams::new(-1.0, 1.0, 1.0, 0.0, 1.0, 10.0, -2, 4).is_err());
    }

    #[test]
    fn config_units() {
        let json = r#"{"lambda_per_minute":1.56,"lambda_plus_per_second":0.01,
            "lambda_minus_per_minute":0.875,"delta_tau":0.0,"delta_t":4.0,
            "horizon_T":40.0,"q_lo":-2,"q_hi":2}"#;
        let cfg: ParamsConfig = serde_json::from_str(json).unwrap();
        let p = cfg.to_params().unwrap();
        assert_eq!(p.lambda_plus, 0.01);
        assert_eq!(p.n_periods, 10);
        assert_eq!(p.tick, DEFAULT_TICK);
        let dup = json.replace("\"lambda_plus_per_second\":0.01", "\"lambda_plus_per_second\":0.01,\"lambda_plus_per_minute\":1");
        let cfg: ParamsConfig = serde_json::from_str(&dup).unwrap();
        assert!(cfg.to_params().is_err());
    }

    proptest! {
        #[test]
        fn n_periods_is_floor(n in 1usize..2000, frac in 0.0f64..0.999, dt in 0.1f64..5.0, tau_frac in 0.0f64..0.9) {
            let dtau = tau_frac * dt;
            let t = (n as f64 + frac) * dt + dtau;
            prop_assert_eq!(periods_for(t, dtau, dt), n);
        }
    }
}
