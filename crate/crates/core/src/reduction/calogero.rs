//! Calogero-Moser as the eigenvalue dynamics of free motion on 2×2 symmetric
//! matrices.
//!
//! Along `X(t) = X₀ + tV₀` the commutator `M = [X, Ẋ]` is constant and the
//! ordered eigenvalues `q₁ < q₂` obey `q̈₁ = −2ℓ²/(q₂−q₁)³`,
//! `q̈₂ = 2ℓ²/(q₂−q₁)³` with `ℓ = −½ Tr(Mσ)`, `σ = [[0, 1], [−1, 0]]`.

use nalgebra::{Matrix2, Vector2};
use serde::Serialize;

use super::GRID_POINTS;
use crate::error::{Error, Result};
use crate::integrate::{integrate, IntegratorConfig};
use crate::systems::{calogero_energy, calogero_moser_field, CALOGERO_MIN_GAP};

#[derive(Debug, Clone, Serialize)]
pub struct CalogeroReport {
    pub l: f64,
    pub t_end: f64,
    pub grid_points: usize,
    /// Largest `|q_matrix(t) − q_integrated(t)|` over both eigenvalues.
    pub max_divergence: f64,
    /// Largest entry of `M(t) − M(0)`.
    pub commutator_drift: f64,
    pub energy_drift: f64,
    pub min_gap: f64,
}

/// `ℓ = −½ Tr([X, V] σ)`.
pub fn calogero_coupling(x: &Matrix2<f64>, v: &Matrix2<f64>) -> f64 {
    let sigma = Matrix2::new(0.0, 1.0, -1.0, 0.0);
    let m = x * v - v * x;
    -0.5 * (m * sigma).trace()
}

/// Ascending eigenvalues and the matching unit eigenvectors.
fn eigen(x: &Matrix2<f64>) -> ([f64; 2], [Vector2<f64>; 2]) {
    let e = nalgebra::SymmetricEigen::new(*x);
    let (i, j) = if e.eigenvalues[0] <= e.eigenvalues[1] {
        (0, 1)
    } else {
        (1, 0)
    };
    (
        [e.eigenvalues[i], e.eigenvalues[j]],
        [
            e.eigenvectors.column(i).into(),
            e.eigenvectors.column(j).into(),
        ],
    )
}

/// Smallest eigenvalue gap of `X₀ + tV₀` on `[0, t_end]` and where it occurs.
///
/// The squared gap `(a − c)² + 4b²` is quadratic in `t`, so its minimum is
/// found in closed form.
pub fn min_gap_on(x0: &Matrix2<f64>, v0: &Matrix2<f64>, t_end: f64) -> (f64, f64) {
    let (alpha, beta) = (x0[(0, 0)] - x0[(1, 1)], v0[(0, 0)] - v0[(1, 1)]);
    let (gamma, delta) = (x0[(0, 1)], v0[(0, 1)]);
    let curvature = beta * beta + 4.0 * delta * delta;
    let t = if curvature > 0.0 {
        (-(alpha * beta + 4.0 * gamma * delta) / curvature).clamp(0.0, t_end)
    } else {
        0.0
    };
    let gap = ((alpha + beta * t).powi(2) + 4.0 * (gamma + delta * t).powi(2)).sqrt();
    (t, gap)
}

fn check_symmetric(name: &str, m: &Matrix2<f64>) -> Result<()> {
    if (m[(0, 1)] - m[(1, 0)]).abs() > 1e-14 * m.amax().max(1.0) {
        return Err(Error::InvalidState(format!("{name} is not symmetric")));
    }
    Ok(())
}

/// Compares the eigenvalues of `X₀ + tV₀` with Calogero-Moser integrated from
/// the matching initial data on `[0, t_end]`.
pub fn reduce_calogero(
    x0: &Matrix2<f64>,
    v0: &Matrix2<f64>,
    t_end: f64,
    cfg: &IntegratorConfig,
) -> Result<CalogeroReport> {
    check_symmetric("X0", x0)?;
    check_symmetric("V0", v0)?;
    let l = calogero_coupling(x0, v0);
    let (q, vecs) = eigen(x0);
    let gap0 = q[1] - q[0];
    if gap0 < CALOGERO_MIN_GAP {
        return Err(Error::EigenvalueCollision { t: 0.0, gap: gap0 });
    }
    let qdot = [vecs[0].dot(&(v0 * vecs[0])), vecs[1].dot(&(v0 * vecs[1]))];
    let s0 = [q[0], q[1], qdot[0], qdot[1]];

    // Check the matrix flow first so a collision is reported as such rather
    // than as an integration failure.
    let (t_min, min_gap) = min_gap_on(x0, v0, t_end);
    if min_gap < CALOGERO_MIN_GAP {
        return Err(Error::EigenvalueCollision {
            t: t_min,
            gap: min_gap,
        });
    }
    let n = GRID_POINTS;
    let grid: Vec<f64> = (0..n).map(|i| t_end * i as f64 / (n - 1) as f64).collect();
    let eigenvalues: Vec<[f64; 2]> = grid.iter().map(|&t| eigen(&(x0 + v0 * t)).0).collect();

    let energy = calogero_energy(l);
    let traj = integrate(
        &calogero_moser_field(l),
        &s0,
        t_end,
        cfg,
        std::slice::from_ref(&energy),
    )?;
    let m0 = x0 * v0 - v0 * x0;
    let mut max_divergence = 0.0f64;
    let mut commutator_drift = 0.0f64;
    for (&t, ev) in grid.iter().zip(&eigenvalues) {
        let z = traj.state_at(t)?;
        max_divergence = max_divergence
            .max((z[0] - ev[0]).abs())
            .max((z[1] - ev[1]).abs());
        let x = x0 + v0 * t;
        commutator_drift = commutator_drift.max((x * v0 - v0 * x - m0).amax());
    }
    Ok(CalogeroReport {
        l,
        t_end,
        grid_points: n,
        max_divergence,
        commutator_drift,
        energy_drift: traj.monitor_drift(energy.name()).unwrap_or(0.0),
        min_gap,
    })
}
