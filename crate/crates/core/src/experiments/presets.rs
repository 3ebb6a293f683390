use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AssumptionConstants, CoefficientSet, NoiseCoefficient};

/// One-dimensional borrowing/lending model: geometric Brownian motion with
/// a forward-contract payoff and a driver with distinct lending (`r`) and
/// borrowing (`R`) rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketModel {
    pub mu: f64,
    pub sigma: f64,
    pub r: f64,
    #[serde(rename = "R")]
    pub big_r: f64,
    #[serde(rename = "K")]
    pub strike: f64,
    pub x0: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
}

impl Default for MarketModel {
    fn default() -> Self {
        Self {
            mu: 0.05,
            sigma: 0.2,
            r: 0.01,
            big_r: 0.06,
            strike: 115.0,
            x0: 100.0,
            horizon: 0.25,
        }
    }
}

/// Coefficients of a user-supplied noise term
/// `g = z·z_coef + y·y_coef + log(x)·log_x + t·t_coef + constant`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CustomNoise {
    pub z: f64,
    pub y: f64,
    pub log_x: f64,
    pub t: f64,
    pub constant: f64,
}

/// Which backward-noise coefficient to attach.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GChoice {
    None,
    /// `0.1z + 0.5y + log(x)`
    G1,
    /// `0.1z + 0.5y`
    G2,
    /// `log(x) + 0.5y`
    G3,
    Custom,
}

impl GChoice {
    pub fn as_str(self) -> &'static str {
        match self {
            GChoice::None => "none",
            GChoice::G1 => "g1",
            GChoice::G2 => "g2",
            GChoice::G3 => "g3",
            GChoice::Custom => "custom",
        }
    }
}

impl fmt::Display for GChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(GChoice::None),
            "g1" => Ok(GChoice::G1),
            "g2" => Ok(GChoice::G2),
            "g3" => Ok(GChoice::G3),
            "custom" => Ok(GChoice::Custom),
            other => Err(Error::Config(format!("unknown g_choice `{other}`"))),
        }
    }
}

impl MarketModel {
    pub fn theta(&self) -> f64 {
        (self.mu - self.r) / self.sigma
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("mu", self.mu),
            ("r", self.r),
            ("R", self.big_r),
            ("K", self.strike),
        ] {
            if !v.is_finite() {
                return Err(Error::invalid(name, "must be finite"));
            }
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::invalid("sigma", "must be positive"));
        }
        if !(self.x0.is_finite() && self.x0 > 0.0) {
            return Err(Error::invalid("x0", "must be positive"));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::invalid("T", "must be positive"));
        }
        Ok(())
    }

    /// `f(t,x,y,z) = −θz − ry + (y − z/σ)⁻(R − r)`.
    pub fn driver_value(&self, y: f64, z: f64) -> f64 {
        let theta = self.theta();
        let borrow = (y - z / self.sigma).min(0.0).abs();
        -theta * z - self.r * y + borrow * (self.big_r - self.r)
    }

    /// Coefficient set with `b(x) = μx`, `σ(x) = σx`, `Φ(x) = K − x`.
    pub fn coefficients(&self, g: GChoice, custom: CustomNoise) -> CoefficientSet {
        let MarketModel {
            mu, sigma, strike, ..
        } = *self;
        let model = *self;
        let noise = match g {
            GChoice::None => NoiseCoefficient::Zero,
            GChoice::G1 => NoiseCoefficient::General(Arc::new(|_, x, y, z, out| {
                out[0] = 0.1 * z[0] + 0.5 * y[0] + x[0].ln();
            })),
            GChoice::G2 => NoiseCoefficient::General(Arc::new(|_, _, y, z, out| {
                out[0] = 0.1 * z[0] + 0.5 * y[0];
            })),
            GChoice::G3 => NoiseCoefficient::General(Arc::new(|_, x, y, _, out| {
                out[0] = x[0].ln() + 0.5 * y[0];
            })),
            GChoice::Custom => {
                let c = custom;
                if c.z == 0.0 && c.y == 0.0 && c.log_x == 0.0 {
                    NoiseCoefficient::TimeOnly(Arc::new(move |t, out| out[0] = c.t * t + c.constant))
                } else {
                    NoiseCoefficient::General(Arc::new(move |t, x, y, z, out| {
                        let log_x = if c.log_x == 0.0 { 0.0 } else { c.log_x * x[0].ln() };
                        out[0] = c.z * z[0] + c.y * y[0] + log_x + c.t * t + c.constant;
                    }))
                }
            }
        };
        CoefficientSet {
            d: 1,
            k: 1,
            l: 1,
            drift: Arc::new(move |x, out| out[0] = mu * x[0]),
            diffusion: Arc::new(move |x, out| out[0] = sigma * x[0]),
            driver: Arc::new(move |_, _, y, z, out| out[0] = model.driver_value(y[0], z[0])),
            noise,
            terminal: Arc::new(move |_, x, out| out[0] = strike - x[0]),
            constants: AssumptionConstants {
                lipschitz: Some(model.theta().abs().max(model.big_r.abs() / model.sigma)),
                ..AssumptionConstants::default()
            },
        }
    }
}
