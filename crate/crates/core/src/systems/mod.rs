//! Vector fields and observables.
//!
//! Phase-space points are flat `f64` slices laid out per [`Chart`]:
//! `(x, v)` for `T R³`, `(y, u)` for the natural chart of `T R⁴`, `(Y, U)` for
//! the oscillator chart, `(r, v_r)` for the radial system and
//! `(q₁, q₂, q̇₁, q̇₂)` for Calogero-Moser. A system may carry extra trailing
//! components (e.g. an accumulated time), which observables ignore.

mod fields;
mod observables;

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, FieldError, Result};

pub use fields::*;
pub use observables::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Chart {
    /// `(x, v)` on `T R³`.
    Kepler,
    /// `(y, u)` on `T R⁴`.
    Natural,
    /// `(Y, U) = (y, 2R²u)` on `T R⁴`.
    Oscillator,
    /// `(r, v_r)`.
    Radial,
    /// `(q₁, q₂, q̇₁, q̇₂)`.
    Calogero,
}

impl Chart {
    pub fn dim(self) -> usize {
        match self {
            Chart::Kepler => 6,
            Chart::Natural | Chart::Oscillator => 8,
            Chart::Radial => 2,
            Chart::Calogero => 4,
        }
    }
}

impl fmt::Display for Chart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Chart::Kepler => "T R3 (x, v)",
            Chart::Natural => "T R4 (y, u)",
            Chart::Oscillator => "T R4 (Y, U)",
            Chart::Radial => "(r, v_r)",
            Chart::Calogero => "(q1, q2, q1', q2')",
        };
        f.write_str(s)
    }
}

pub type RhsFn = dyn Fn(&[f64], &mut [f64]) -> Result<(), FieldError> + Send + Sync;
pub type EvalFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
pub type GradFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;

/// An autonomous vector field with optional energy and registered constants of
/// motion.
#[derive(Clone)]
pub struct DynamicalSystem {
    name: String,
    chart: Chart,
    dim: usize,
    rhs: Arc<RhsFn>,
    energy: Option<Observable>,
    constants: Vec<Observable>,
}

impl DynamicalSystem {
    pub fn new(
        name: impl Into<String>,
        chart: Chart,
        rhs: impl Fn(&[f64], &mut [f64]) -> Result<(), FieldError> + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            chart,
            dim: chart.dim(),
            rhs: Arc::new(rhs),
            energy: None,
            constants: Vec::new(),
        }
    }

    /// A system whose state extends the chart by `extra` trailing components.
    pub fn augmented(
        name: impl Into<String>,
        chart: Chart,
        extra: usize,
        rhs: impl Fn(&[f64], &mut [f64]) -> Result<(), FieldError> + Send + Sync + 'static,
    ) -> Self {
        let mut sys = Self::new(name, chart, rhs);
        sys.dim += extra;
        sys
    }

    pub fn with_energy(mut self, energy: Observable) -> Self {
        self.energy = Some(energy);
        self
    }

    pub fn with_constants(mut self, constants: impl IntoIterator<Item = Observable>) -> Self {
        self.constants.extend(constants);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn chart(&self) -> Chart {
        self.chart
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn energy(&self) -> Option<&Observable> {
        self.energy.as_ref()
    }

    /// Observables registered as constants of motion of this field.
    pub fn constants(&self) -> &[Observable] {
        &self.constants
    }

    pub fn eval(&self, z: &[f64], out: &mut [f64]) -> Result<(), FieldError> {
        if z.len() != self.dim || out.len() != self.dim {
            return Err(FieldError::Dimension {
                expected: self.dim,
                got: z.len().min(out.len()),
            });
        }
        (self.rhs)(z, out)
    }

    pub fn field(&self, z: &[f64]) -> Result<Vec<f64>, FieldError> {
        let mut out = vec![0.0; self.dim];
        self.eval(z, &mut out)?;
        Ok(out)
    }
}

impl fmt::Debug for DynamicalSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DynamicalSystem")
            .field("name", &self.name)
            .field("chart", &self.chart)
            .field("dim", &self.dim)
            .finish_non_exhaustive()
    }
}

/// A named scalar function with a closed-form gradient.
#[derive(Clone)]
pub struct Observable {
    name: String,
    chart: Chart,
    eval: Arc<EvalFn>,
    grad: Arc<GradFn>,
}

impl Observable {
    pub fn new(
        name: impl Into<String>,
        chart: Chart,
        eval: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        grad: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            chart,
            eval: Arc::new(eval),
            grad: Arc::new(grad),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn chart(&self) -> Chart {
        self.chart
    }

    pub fn eval(&self, z: &[f64]) -> f64 {
        (self.eval)(z)
    }

    /// Gradient with respect to the chart coordinates (length `chart.dim()`).
    pub fn grad(&self, z: &[f64]) -> Vec<f64> {
        (self.grad)(z)
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn constant(chart: Chart, c: f64) -> Self {
        let n = chart.dim();
        Observable::new(format!("{c}"), chart, move |_| c, move |_| vec![0.0; n])
    }

    pub fn scaled(&self, c: f64) -> Self {
        let (e, g) = (self.eval.clone(), self.grad.clone());
        Observable::new(
            format!("{c}*{}", self.name),
            self.chart,
            move |z| c * e(z),
            move |z| g(z).into_iter().map(|d| c * d).collect(),
        )
    }

    pub fn sum(&self, other: &Observable) -> Self {
        debug_assert_eq!(self.chart, other.chart);
        let (ea, ga, eb, gb) = (
            self.eval.clone(),
            self.grad.clone(),
            other.eval.clone(),
            other.grad.clone(),
        );
        Observable::new(
            format!("({} + {})", self.name, other.name),
            self.chart,
            move |z| ea(z) + eb(z),
            move |z| ga(z).iter().zip(gb(z)).map(|(a, b)| a + b).collect(),
        )
    }

    pub fn product(&self, other: &Observable) -> Self {
        debug_assert_eq!(self.chart, other.chart);
        let (ea, ga, eb, gb) = (
            self.eval.clone(),
            self.grad.clone(),
            other.eval.clone(),
            other.grad.clone(),
        );
        Observable::new(
            format!("{}*{}", self.name, other.name),
            self.chart,
            {
                let (ea, eb) = (ea.clone(), eb.clone());
                move |z| ea(z) * eb(z)
            },
            move |z| {
                let (a, b) = (ea(z), eb(z));
                ga(z)
                    .iter()
                    .zip(gb(z))
                    .map(|(da, db)| da * b + a * db)
                    .collect()
            },
        )
    }

    /// `⟨grad f, X⟩` for the field of `sys` at `z`.
    pub fn lie_derivative(&self, sys: &DynamicalSystem, z: &[f64]) -> Result<f64> {
        if sys.chart() != self.chart {
            return Err(Error::ChartMismatch {
                name: self.name.clone(),
                expected: sys.chart().to_string(),
                found: self.chart.to_string(),
            });
        }
        let field = sys.field(z)?;
        Ok(self.grad(z).iter().zip(&field).map(|(a, b)| a * b).sum())
    }
}

impl fmt::Debug for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Observable")
            .field("name", &self.name)
            .field("chart", &self.chart)
            .finish_non_exhaustive()
    }
}

/// Energy-dependent factor `g` in the reparametrization `f = 2 g(𝓔) R²`.
#[derive(Clone, Default)]
pub enum EnergyScaling {
    /// `g ≡ 1`.
    #[default]
    Unit,
    /// `g = 1/𝓔`, admissible only for `𝓔 > 0`.
    InverseEnergy,
    /// `g = 1/|𝓔|`, admissible for `𝓔 ≠ 0`.
    InverseAbsEnergy,
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl EnergyScaling {
    pub fn factor(&self, energy: f64) -> Result<f64, FieldError> {
        let g = match self {
            EnergyScaling::Unit => 1.0,
            EnergyScaling::InverseEnergy => 1.0 / energy,
            EnergyScaling::InverseAbsEnergy => 1.0 / energy.abs(),
            EnergyScaling::Custom(g) => g(energy),
        };
        if g > 0.0 && g.is_finite() {
            Ok(g)
        } else {
            Err(FieldError::Scaling { energy, value: g })
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            EnergyScaling::Unit => "unit",
            EnergyScaling::InverseEnergy => "inverse-energy",
            EnergyScaling::InverseAbsEnergy => "inverse-abs-energy",
            EnergyScaling::Custom(_) => "custom",
        }
    }
}

impl fmt::Debug for EnergyScaling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for EnergyScaling {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "unit" | "1" => Ok(EnergyScaling::Unit),
            "inverse-energy" | "gyorgyi" => Ok(EnergyScaling::InverseEnergy),
            "inverse-abs-energy" => Ok(EnergyScaling::InverseAbsEnergy),
            other => Err(format!(
                "unknown scaling `{other}` (expected unit, inverse-energy, inverse-abs-energy)"
            )),
        }
    }
}
