//! Problem data for the forward diffusion and the backward equation.
//!
//! Maps write into caller-provided buffers so that the per-path loops never
//! allocate. Matrices are row-major: `sigma` is `d×d`, `z` arguments are
//! `k×d` and the noise coefficient `g` is `k×l`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// `x ↦ out`, used for the drift (`d`) and the diffusion matrix (`d×d`).
pub type StateMap = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
/// `(t, x, y, z) ↦ out`.
pub type Driver = Arc<dyn Fn(f64, &[f64], &[f64], &[f64], &mut [f64]) + Send + Sync>;
/// `(t, x) ↦ out`.
pub type TerminalMap = Arc<dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync>;
/// `t ↦ out` (`k×l`).
pub type TimeMap = Arc<dyn Fn(f64, &mut [f64]) + Send + Sync>;

/// Coefficient of the backward Itô integral.
#[derive(Clone)]
pub enum NoiseCoefficient {
    Zero,
    /// Depends on time only.
    TimeOnly(TimeMap),
    General(Driver),
}

impl fmt::Debug for NoiseCoefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NoiseCoefficient::Zero => f.write_str("Zero"),
            NoiseCoefficient::TimeOnly(_) => f.write_str("TimeOnly(..)"),
            NoiseCoefficient::General(_) => f.write_str("General(..)"),
        }
    }
}

/// Lipschitz and monotonicity constants of the data. Informational only;
/// nothing checks them.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AssumptionConstants {
    pub lipschitz: Option<f64>,
    pub growth: Option<f64>,
    pub alpha: Option<f64>,
    pub monotonicity: Option<f64>,
    pub lambda: Option<f64>,
}

#[derive(Clone)]
pub struct CoefficientSet {
    pub d: usize,
    pub k: usize,
    pub l: usize,
    pub drift: StateMap,
    pub diffusion: StateMap,
    pub driver: Driver,
    pub noise: NoiseCoefficient,
    pub terminal: TerminalMap,
    pub constants: AssumptionConstants,
}

impl fmt::Debug for CoefficientSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientSet")
            .field("d", &self.d)
            .field("k", &self.k)
            .field("l", &self.l)
            .field("noise", &self.noise)
            .field("constants", &self.constants)
            .finish_non_exhaustive()
    }
}

fn check_finite(coefficient: &'static str, out: &[f64], context: impl FnOnce() -> String) -> Result<()> {
    if out.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Evaluation {
            coefficient,
            context: context(),
        })
    }
}

impl CoefficientSet {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("d", self.d), ("k", self.k), ("l", self.l)] {
            if v == 0 {
                return Err(Error::invalid(name, "dimension must be at least 1"));
            }
        }
        Ok(())
    }

    /// Same data with the backward integral removed.
    pub fn without_noise(&self) -> Self {
        Self {
            noise: NoiseCoefficient::Zero,
            ..self.clone()
        }
    }

    pub fn has_noise(&self) -> bool {
        !matches!(self.noise, NoiseCoefficient::Zero)
    }

    pub fn drift(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        (self.drift)(x, out);
        check_finite("b", out, || format!("x={x:?}"))
    }

    pub fn diffusion(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        (self.diffusion)(x, out);
        check_finite("sigma", out, || format!("x={x:?}"))
    }

    pub fn driver(&self, t: f64, x: &[f64], y: &[f64], z: &[f64], out: &mut [f64]) -> Result<()> {
        (self.driver)(t, x, y, z, out);
        check_finite("f", out, || format!("t={t}, x={x:?}, y={y:?}, z={z:?}"))
    }

    /// Evaluates `g`; writes zeros when there is no backward integral.
    pub fn noise(&self, t: f64, x: &[f64], y: &[f64], z: &[f64], out: &mut [f64]) -> Result<()> {
        match &self.noise {
            NoiseCoefficient::Zero => {
                out.fill(0.0);
                return Ok(());
            }
            NoiseCoefficient::TimeOnly(g) => g(t, out),
            NoiseCoefficient::General(g) => g(t, x, y, z, out),
        }
        check_finite("g", out, || format!("t={t}, x={x:?}, y={y:?}, z={z:?}"))
    }

    pub fn terminal(&self, t: f64, x: &[f64], out: &mut [f64]) -> Result<()> {
        (self.terminal)(t, x, out);
        check_finite("Phi", out, || format!("t={t}, x={x:?}"))
    }
}
