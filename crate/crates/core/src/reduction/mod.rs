//! Reduction of a dynamical system to an invariant submanifold followed by a
//! quotient, checked numerically.
//!
//! A [`ReductionSetup`] bundles an upstairs field, a constraint `c = c₀`
//! cutting out an invariant submanifold, a projection to the downstairs
//! chart, and the downstairs field. [`check_equivariance`] integrates both
//! sides of
//!
//! ```text
//!   upstairs flow  ──▶  upstairs flow
//!        │ π                 │ π
//!        ▼                   ▼
//! downstairs flow ──▶ downstairs flow
//! ```
//!
//! and reports how far the square fails to commute.

mod calogero;
mod unfold;

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::integrate::{integrate, IntegratorConfig};
use crate::phase_geometry::{ks_tangent, to_oscillator_chart, State4};
use crate::sampling;
use crate::symplectic::{poisson_bracket, SymplecticStructure};
use crate::systems::{
    conformal_kepler_system, free_particle_system, kepler_system, radial_reduced_field, Chart,
    DynamicalSystem, Observable, ObservableSet, RadialVariant,
};

pub use calogero::*;
pub use unfold::*;

/// Points per comparison grid.
pub const GRID_POINTS: usize = 512;

pub type ProjectionFn = dyn Fn(&[f64]) -> Option<Vec<f64>> + Send + Sync;

/// Upstairs system, invariant constraint, projection and downstairs system.
#[derive(Clone)]
pub struct ReductionSetup {
    pub name: String,
    pub upstairs: DynamicalSystem,
    pub constraint: Observable,
    pub target: f64,
    pub projection: Arc<ProjectionFn>,
    pub downstairs: DynamicalSystem,
}

impl std::fmt::Debug for ReductionSetup {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ReductionSetup")
            .field("name", &self.name)
            .field("upstairs", &self.upstairs)
            .field("constraint", &self.constraint)
            .field("target", &self.target)
            .field("downstairs", &self.downstairs)
            .finish_non_exhaustive()
    }
}

impl ReductionSetup {
    pub fn project(&self, z: &[f64]) -> Option<Vec<f64>> {
        (self.projection)(z)
    }

    /// `⟨∇c, Γ⟩` at `z`: zero wherever the field is tangent to the level
    /// sets of the constraint.
    pub fn tangency_defect(&self, z: &[f64]) -> Result<f64> {
        self.constraint.lie_derivative(&self.upstairs, z)
    }
}

/// Free motion in `R³` on `|v|² = 2E` (or at fixed `|L| = ℓ`) reduced to the
/// radial coordinate.
pub fn radial_setup(variant: RadialVariant) -> Result<ReductionSetup> {
    let set = ObservableSet::default();
    let (constraint, target) = match variant {
        RadialVariant::FixedEnergy(e) => (crate::systems::free_energy(), e),
        RadialVariant::FixedAngularMomentum(l) => {
            let ls = [
                set.get("kepler.L1")?,
                set.get("kepler.L2")?,
                set.get("kepler.L3")?,
            ];
            let l2 = ls[0]
                .product(&ls[0])
                .sum(&ls[1].product(&ls[1]))
                .sum(&ls[2].product(&ls[2]))
                .renamed("|L|^2");
            (l2, l * l)
        }
    };
    Ok(ReductionSetup {
        name: "radial".into(),
        upstairs: free_particle_system(),
        constraint,
        target,
        projection: Arc::new(|z| {
            let r = (z[0] * z[0] + z[1] * z[1] + z[2] * z[2]).sqrt();
            (r > 0.0).then(|| vec![r, (z[0] * z[3] + z[1] * z[4] + z[2] * z[5]) / r])
        }),
        downstairs: radial_reduced_field(variant),
    })
}

/// The conformal Kepler field on `Σ₀ = {h = 0}` projected by the KS tangent
/// map onto the Kepler field, both in physical time.
pub fn kepler_conformal_setup(k: f64) -> Result<ReductionSetup> {
    Ok(ReductionSetup {
        name: "kepler-conformal".into(),
        upstairs: conformal_kepler_system(k),
        constraint: ObservableSet::new(k).get("conformal.h")?,
        target: 0.0,
        projection: Arc::new(|z| Some(ks_tangent(&State4::from_slice(z)).to_array().to_vec())),
        downstairs: kepler_system(k),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct EquivarianceReport {
    pub setup: String,
    pub t_span: f64,
    pub grid_points: usize,
    /// Largest `|π(Φᵗ_up s₀) − Φᵗ_down π(s₀)|` per downstairs component.
    pub component_divergence: Vec<f64>,
    pub max_divergence: f64,
    /// Largest drift of the constraint along the upstairs flow.
    pub constraint_drift: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Largest admissible `|c(s₀) − c₀|` at the start of a check.
pub const CONSTRAINT_TOL: f64 = 1e-10;

/// Integrates both paths of the reduction diagram over `[0, t_span]` and
/// compares the downstairs states on a uniform grid.
pub fn check_equivariance(
    setup: &ReductionSetup,
    s0: &[f64],
    t_span: f64,
    tol: f64,
    cfg: &IntegratorConfig,
) -> Result<EquivarianceReport> {
    let residual = (setup.constraint.eval(s0) - setup.target).abs();
    if !(residual <= CONSTRAINT_TOL * setup.target.abs().max(1.0)) {
        return Err(Error::ConstraintViolated {
            name: setup.constraint.name().to_string(),
            residual,
        });
    }
    let down0 = setup
        .project(s0)
        .ok_or_else(|| Error::InvalidState("initial state does not project".into()))?;
    let up = integrate(
        &setup.upstairs,
        s0,
        t_span,
        cfg,
        std::slice::from_ref(&setup.constraint),
    )?;
    let down = integrate(&setup.downstairs, &down0, t_span, cfg, &[])?;
    let n = if t_span == 0.0 { 1 } else { GRID_POINTS };
    let mut comp = vec![0.0f64; down0.len()];
    for i in 0..n {
        let t = if n == 1 {
            0.0
        } else {
            t_span * i as f64 / (n - 1) as f64
        };
        let a = setup.project(&up.state_at(t)?).ok_or_else(|| {
            Error::InvalidState(format!("upstairs state at t = {t} does not project"))
        })?;
        let b = down.state_at(t)?;
        for (c, (x, y)) in comp.iter_mut().zip(a.iter().zip(&b)) {
            *c = c.max((x - y).abs());
        }
    }
    let max_divergence = comp.iter().copied().fold(0.0, f64::max);
    Ok(EquivarianceReport {
        setup: setup.name.clone(),
        t_span,
        grid_points: n,
        component_divergence: comp,
        max_divergence,
        constraint_drift: up.monitor_drift(setup.constraint.name()).unwrap_or(0.0),
        tolerance: tol,
        pass: max_divergence < tol,
    })
}

/// How an upstairs constant descends to the Kepler chart.
#[derive(Debug, Clone, Serialize)]
pub struct ProjectedConstant {
    pub upstairs: String,
    /// Downstairs observable matched by the ratio test (`"0"` for the zero
    /// function).
    pub downstairs: String,
    /// `f = factor · f̃ ∘ π` on `Σ₀`.
    pub factor: f64,
    /// Largest `|f − factor · f̃∘π| / max(1, |f|)` over the samples.
    pub max_residual: f64,
    /// Largest `|{f, h}|` over the samples.
    pub bracket_with_h: f64,
    pub samples: usize,
    #[serde(skip)]
    pub observable: Observable,
}

/// Tolerance of the commutation precondition and the ratio test.
pub const PROJECTION_TOL: f64 = 1e-9;

/// Finds the Kepler observable that `f` descends to on `Σ₀`.
///
/// `f` must commute with the fiber charge; candidates are the Kepler energy,
/// `Lᵢ` and `Aᵢ`, each allowed one global factor fixed by least squares over
/// `samples` random points of `Σ₀`.
pub fn project_constants(
    f: &Observable,
    k: f64,
    samples: usize,
    seed: u64,
) -> Result<ProjectedConstant> {
    let set = ObservableSet::new(k);
    let (structure, h) = match f.chart() {
        Chart::Oscillator => (
            SymplecticStructure::oscillator_canonical(),
            set.get("oscillator.h")?,
        ),
        Chart::Natural => (
            SymplecticStructure::conformal_lagrangian(),
            set.get("conformal.h")?,
        ),
        other => {
            return Err(Error::ChartMismatch {
                name: f.name().to_string(),
                expected: "an upstairs chart".into(),
                found: other.to_string(),
            })
        }
    };
    let mut rng = sampling::rng(seed);
    let points: Vec<State4> = (0..samples)
        .map(|_| sampling::sigma0_state(&mut rng))
        .collect();
    let chart_point = |s: &State4| -> Result<Vec<f64>> {
        Ok(match f.chart() {
            Chart::Oscillator => {
                let (y, u) = to_oscillator_chart(s)?;
                y.iter().chain(u.iter()).copied().collect()
            }
            _ => s.to_array().to_vec(),
        })
    };

    let mut bracket_with_h = 0.0f64;
    let mut values = Vec::with_capacity(samples);
    let mut images = Vec::with_capacity(samples);
    for s in &points {
        let z = chart_point(s)?;
        let scale = f.eval(&z).abs().max(1.0);
        bracket_with_h = bracket_with_h.max(poisson_bracket(&structure, f, &h, &z)?.abs() / scale);
        values.push(f.eval(&z));
        images.push(ks_tangent(s).to_array());
    }
    if bracket_with_h > PROJECTION_TOL {
        return Err(Error::NonCommuting {
            name: f.name().to_string(),
            residual: bracket_with_h,
        });
    }

    let fit = |g: &Observable| {
        let gv: Vec<f64> = images.iter().map(|x| g.eval(x)).collect();
        let num: f64 = values.iter().zip(&gv).map(|(a, b)| a * b).sum();
        let den: f64 = gv.iter().map(|b| b * b).sum();
        let c = if den > 0.0 { num / den } else { 0.0 };
        let res = values
            .iter()
            .zip(&gv)
            .map(|(a, b)| (a - c * b).abs() / a.abs().max(1.0))
            .fold(0.0, f64::max);
        (c, res)
    };

    let zero = Observable::constant(Chart::Kepler, 0.0);
    let zero_res = values.iter().map(|a| a.abs()).fold(0.0, f64::max);
    let mut best = (zero, 0.0, zero_res);
    // A function that vanishes on the samples descends to zero; fitting it
    // would only pick up round-off.
    let candidates = if zero_res < PROJECTION_TOL {
        &[][..]
    } else {
        &[
            "kepler.energy",
            "kepler.L1",
            "kepler.L2",
            "kepler.L3",
            "kepler.A1",
            "kepler.A2",
            "kepler.A3",
        ][..]
    };
    for name in candidates.iter().copied() {
        let g = set.get(name)?;
        let (c, res) = fit(&g);
        if res < best.2 {
            best = (g, c, res);
        }
    }
    let (g, factor, max_residual) = best;
    let downstairs = if factor == 0.0 {
        "0".to_string()
    } else {
        g.name().to_string()
    };
    Ok(ProjectedConstant {
        upstairs: f.name().to_string(),
        observable: g.scaled(factor).renamed(format!("{factor}*{downstairs}")),
        downstairs,
        factor,
        max_residual,
        bracket_with_h,
        samples,
    })
}
