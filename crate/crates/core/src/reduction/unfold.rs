//! Kepler orbits as projections of oscillator orbits.
//!
//! A Kepler state is lifted to `Σ₀`, carried to the oscillator chart and
//! evolved by the linear field `g U ∂_Y + 2gE Y ∂_U` in the parameter `τ`,
//! together with the physical time `t(τ) = ∫ 2g|Y|² dτ`. Projecting through
//! the KS tangent map and reading the result against `t` reproduces the
//! Kepler flow, including through collisions, where the upstairs field stays
//! regular.

use std::f64::consts::PI;
use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::integrate::{
    find_return_time, find_return_time_with, format_float, integrate, refine_root,
    IntegratorConfig, Trajectory,
};
use crate::phase_geometry::{
    from_oscillator_chart, ks_lift, ks_tangent, to_oscillator_chart, FiberAngle, State3, State4,
};
use crate::systems::{
    kepler_system, oscillator_invariant, Chart, DynamicalSystem, EnergyScaling, Observable,
    ObservableSet,
};

/// Index of the accumulated physical time in the upstairs state.
pub const TIME_SLOT: usize = 8;

/// `r = |Y|²` below which an orbit counts as passing through the collision.
pub const COLLISION_RADIUS: f64 = 1e-8;

/// `2π a^{3/2} / √k` with `a = −k/(2E)`, for `E < 0`.
pub fn kepler_period(energy: f64, k: f64) -> f64 {
    let a = -k / (2.0 * energy);
    2.0 * PI * (a * a * a / k).sqrt()
}

/// Full period `2π/(g√(−2E))` of the upstairs oscillator, for `E < 0`.
pub fn oscillator_period(energy: f64, g: f64) -> f64 {
    2.0 * PI / (g * (-2.0 * energy).sqrt())
}

#[derive(Debug, Clone)]
pub struct UnfoldOptions {
    pub scaling: EnergyScaling,
    pub gauge: FiberAngle,
    pub integrator: IntegratorConfig,
    pub k: f64,
}

impl Default for UnfoldOptions {
    fn default() -> Self {
        Self {
            scaling: EnergyScaling::Unit,
            gauge: FiberAngle(0.0),
            integrator: IntegratorConfig::default(),
            k: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CollisionReport {
    /// Smallest `r = |Y|²` along the run.
    pub min_radius: f64,
    pub tau_at_min: f64,
    pub t_at_min: f64,
    /// True when the orbit passed through `r < COLLISION_RADIUS` and the
    /// integration carried on past it.
    pub regularized: bool,
}

/// Oscillator-chart state `(Y, U)` projected to `(x, v)`; `None` at `Y = 0`.
pub fn project_oscillator_state(z: &[f64]) -> Option<State3> {
    let y = nalgebra::Vector4::new(z[0], z[1], z[2], z[3]);
    let u = nalgebra::Vector4::new(z[4], z[5], z[6], z[7]);
    from_oscillator_chart(&y, &u).ok().map(|s| ks_tangent(&s))
}

/// The `g`-scaled completed oscillator at energy `E` with `t` appended.
pub fn unfolding_system(energy: f64, g: f64) -> DynamicalSystem {
    DynamicalSystem::augmented(
        format!("unfold(E={energy}, g={g})"),
        Chart::Oscillator,
        1,
        move |z, out| {
            let mut r2 = 0.0;
            for a in 0..4 {
                out[a] = g * z[4 + a];
                out[4 + a] = 2.0 * g * energy * z[a];
                r2 += z[a] * z[a];
            }
            out[TIME_SLOT] = 2.0 * g * r2;
            Ok(())
        },
    )
}

/// Conserved quantities recorded along an unfolding run.
fn monitors(energy: f64, k: f64) -> Result<Vec<Observable>> {
    let set = ObservableSet::new(k);
    let mut out = vec![
        oscillator_invariant(energy).renamed("U^2/2-E*Y^2"),
        set.get("oscillator.energy")?,
        set.get("oscillator.h")?,
    ];
    for name in ["oscillator.J1", "oscillator.J2", "oscillator.J3"] {
        out.push(set.get(name)?);
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct UnfoldResult {
    pub initial: State3,
    pub lifted: State4,
    pub energy: f64,
    pub k: f64,
    pub g: f64,
    pub gauge: FiberAngle,
    pub scaling: String,
    pub integrator: IntegratorConfig,
    /// States `(Y, U, t)` against `τ`.
    pub trajectory: Trajectory,
    pub collision: CollisionReport,
}

/// Lifts `p0` to `Σ₀` at the requested gauge and integrates the oscillator
/// family member at its energy up to `tau_end`.
pub fn unfold_kepler(p0: &State3, tau_end: f64, options: &UnfoldOptions) -> Result<UnfoldResult> {
    let lifted = ks_lift(p0, options.gauge)?;
    let (y, u) = to_oscillator_chart(&lifted)?;
    let energy = (0.5 * u.norm_squared() - options.k) / y.norm_squared();
    let g = options.scaling.factor(energy)?;
    let sys = unfolding_system(energy, g);
    let mut s0: Vec<f64> = y.iter().chain(u.iter()).copied().collect();
    s0.push(0.0);
    let traj = integrate(
        &sys,
        &s0,
        tau_end,
        &options.integrator,
        &monitors(energy, options.k)?,
    )?;
    let labels = ["Y1", "Y2", "Y3", "Y0", "U1", "U2", "U3", "U0", "t"]
        .map(String::from)
        .to_vec();
    let traj = traj.with_labels(labels);
    let collision = detect_collision(&traj)?;
    Ok(UnfoldResult {
        initial: *p0,
        lifted,
        energy,
        k: options.k,
        g,
        gauge: options.gauge,
        scaling: options.scaling.label().to_string(),
        integrator: options.integrator,
        trajectory: traj,
        collision,
    })
}

fn radius2(z: &[f64]) -> f64 {
    z[..4].iter().map(|a| a * a).sum()
}

/// Minimum of `|Y|²`, located by root refinement of `Y·U` on the dense
/// output.
fn detect_collision(traj: &Trajectory) -> Result<CollisionReport> {
    let mut best = (radius2(traj.initial_state()), 0.0);
    for (i, z) in traj.states().iter().enumerate() {
        let r = radius2(z);
        if r < best.0 {
            best = (r, traj.times()[i]);
        }
    }
    let ydotu = |tau: f64| -> Result<f64> {
        let z = traj.state_at(tau)?;
        Ok((0..4).map(|a| z[a] * z[4 + a]).sum())
    };
    let times = traj.times();
    for w in times.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (ga, gb) = (ydotu(a)?, ydotu(b)?);
        if ga < 0.0 && gb >= 0.0 {
            let tau = refine_root(ydotu, a, ga, b, gb)?;
            let r = radius2(&traj.state_at(tau)?);
            if r < best.0 {
                best = (r, tau);
            }
        }
    }
    let (min_radius, tau_at_min) = best;
    let t_at_min = traj.state_at(tau_at_min)?[TIME_SLOT];
    Ok(CollisionReport {
        min_radius,
        tau_at_min,
        t_at_min,
        regularized: min_radius < COLLISION_RADIUS && tau_at_min < traj.t_end(),
    })
}

/// Period measurements on a bound unfolding run.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PeriodMeasurement {
    /// First return of `(Y, U)` to its initial value.
    pub tau_period: f64,
    pub tau_period_expected: f64,
    /// First return of the projected `(x, v)`; equals half the upstairs
    /// period since `(Y, U)` and `−(Y, U)` project to the same point.
    pub tau_projected: f64,
    /// `t` at the first projected return.
    pub t_period: f64,
    /// `∫ 2g|Y|² dτ` over one full upstairs period.
    pub t_full_upstairs: f64,
    pub kepler_period_expected: f64,
}

impl UnfoldResult {
    /// `t(τ)`.
    pub fn physical_time(&self, tau: f64) -> Result<f64> {
        Ok(self.trajectory.state_at(tau)?[TIME_SLOT])
    }

    pub fn t_end(&self) -> f64 {
        self.trajectory.final_state()[TIME_SLOT]
    }

    /// `τ(t)`, inverting the strictly increasing map `t(τ)`.
    pub fn tau_at(&self, t: f64) -> Result<f64> {
        let traj = &self.trajectory;
        let ts: Vec<f64> = traj.states().iter().map(|z| z[TIME_SLOT]).collect();
        let last = *ts.last().unwrap();
        if !(t >= 0.0 && t <= last * (1.0 + 1e-14)) {
            return Err(Error::Config(format!("t = {t} lies outside [0, {last}]")));
        }
        let i = ts.partition_point(|&s| s < t);
        if i == 0 {
            return Ok(0.0);
        }
        if i >= ts.len() {
            return Ok(traj.t_end());
        }
        if ts[i] == t {
            return Ok(traj.times()[i]);
        }
        let (a, b) = (traj.times()[i - 1], traj.times()[i]);
        let f = |tau: f64| Ok(self.physical_time(tau)? - t);
        refine_root(f, a, ts[i - 1] - t, b, ts[i] - t)
    }

    /// Projected Kepler state at parameter `τ`.
    pub fn downstairs_at_tau(&self, tau: f64) -> Result<State3> {
        let z = self.trajectory.state_at(tau)?;
        project_oscillator_state(&z)
            .ok_or_else(|| Error::InvalidState(format!("Y = 0 at tau = {tau}: collision point")))
    }

    /// Projected Kepler state at physical time `t`.
    pub fn downstairs_at(&self, t: f64) -> Result<State3> {
        self.downstairs_at_tau(self.tau_at(t)?)
    }

    /// Periods of a bound orbit. The run must cover one full upstairs period.
    pub fn measure_periods(&self, tol: f64) -> Result<PeriodMeasurement> {
        let traj = &self.trajectory;
        let reference = &traj.initial_state()[..8];
        let tau_period = find_return_time(traj, reference, tol)?;
        let p0 = self.initial.to_array();
        let tau_projected = find_return_time_with(
            traj,
            |z| match project_oscillator_state(z) {
                Some(p) => p.to_array().to_vec(),
                None => vec![f64::INFINITY; 6],
            },
            &p0,
            tol,
        )?;
        Ok(PeriodMeasurement {
            tau_period,
            tau_period_expected: oscillator_period(self.energy, self.g),
            tau_projected,
            t_period: self.physical_time(tau_projected)?,
            t_full_upstairs: self.physical_time(tau_period)?,
            kepler_period_expected: kepler_period(self.energy, self.k),
        })
    }

    /// One row per accepted step: `tau, t, Y, U, x, v`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "tau", "t", "Y1", "Y2", "Y3", "Y0", "U1", "U2", "U3", "U0", "x1", "x2", "x3", "v1",
            "v2", "v3",
        ])?;
        for (tau, z) in self.trajectory.times().iter().zip(self.trajectory.states()) {
            let down = project_oscillator_state(z)
                .map(|p| p.to_array())
                .unwrap_or([f64::NAN; 6]);
            let row = std::iter::once(*tau)
                .chain(std::iter::once(z[TIME_SLOT]))
                .chain(z[..8].iter().copied())
                .chain(down)
                .map(format_float);
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Monitor drifts relative to `max(1, |initial value|)`. The conformal
    /// energy is singular at `Y = 0` and is skipped at steps with
    /// `|Y|² < 1e-3`.
    pub fn monitor_drifts(&self) -> Vec<(String, f64)> {
        let traj = &self.trajectory;
        traj.monitor_names()
            .iter()
            .enumerate()
            .map(|(j, name)| {
                let m0 = traj.monitor_values()[0][j];
                let skip_near_origin = name == "oscillator.energy";
                let drift = traj
                    .monitor_values()
                    .iter()
                    .zip(traj.states())
                    .filter(|(_, z)| !skip_near_origin || radius2(z) >= 1e-3)
                    .map(|(row, _)| (row[j] - m0).abs())
                    .fold(0.0, f64::max);
                (name.clone(), drift / m0.abs().max(1.0))
            })
            .collect()
    }
}

/// Divergence of the unfolded orbit from direct Kepler integration.
#[derive(Debug, Clone, Serialize)]
pub struct KeplerComparison {
    pub t_end: f64,
    pub grid_points: usize,
    /// Largest absolute difference per component `(x1, x2, x3, v1, v2, v3)`.
    pub component_divergence: [f64; 6],
    pub max_divergence: f64,
}

/// Integrates the Kepler field directly over `[0, t_end]` and compares it
/// with the projected unfolding on `grid_points` uniform times.
pub fn compare_with_kepler(
    result: &UnfoldResult,
    t_end: f64,
    grid_points: usize,
    cfg: &IntegratorConfig,
) -> Result<KeplerComparison> {
    let direct = integrate(
        &kepler_system(result.k),
        &result.initial.to_array(),
        t_end,
        cfg,
        &[],
    )?;
    compare_on_grid(t_end, grid_points, |t| {
        Ok((result.downstairs_at(t)?.to_array(), direct.state_at(t)?))
    })
}

/// Downstairs divergence between two unfolding runs (e.g. two gauges).
pub fn compare_unfoldings(
    a: &UnfoldResult,
    b: &UnfoldResult,
    t_end: f64,
    grid_points: usize,
) -> Result<KeplerComparison> {
    compare_on_grid(t_end, grid_points, |t| {
        Ok((
            a.downstairs_at(t)?.to_array(),
            b.downstairs_at(t)?.to_array().to_vec(),
        ))
    })
}

fn compare_on_grid(
    t_end: f64,
    grid_points: usize,
    pair: impl Fn(f64) -> Result<([f64; 6], Vec<f64>)>,
) -> Result<KeplerComparison> {
    let n = grid_points.max(2);
    let mut comp = [0.0f64; 6];
    for i in 0..n {
        let t = t_end * i as f64 / (n - 1) as f64;
        let (a, b) = pair(t)?;
        for c in 0..6 {
            comp[c] = comp[c].max((a[c] - b[c]).abs());
        }
    }
    Ok(KeplerComparison {
        t_end,
        grid_points: n,
        max_divergence: comp.iter().copied().fold(0.0, f64::max),
        component_divergence: comp,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circular_orbit_stays_on_unit_circle() {
        let p0 = State3::new([1.0, 0.0, 0.0], [0.0, 1.0, 0.0]);
        let res = unfold_kepler(&p0, PI, &UnfoldOptions::default()).unwrap();
        assert!((res.energy + 0.5).abs() < 1e-15);
        for z in res.trajectory.states() {
            let p = project_oscillator_state(z).unwrap();
            assert!((p.radius() - 1.0).abs() < 1e-7);
        }
        assert!((res.t_end() - 2.0 * PI).abs() < 1e-8);
    }

    #[test]
    fn time_map_inverts() {
        let p0 = State3::new([1.0, 0.0, 0.0], [0.0, 0.8, 0.0]);
        let res = unfold_kepler(&p0, 3.0, &UnfoldOptions::default()).unwrap();
        for tau in [0.0, 0.3, 1.7, 2.9] {
            let t = res.physical_time(tau).unwrap();
            assert!((res.tau_at(t).unwrap() - tau).abs() < 1e-10);
        }
        assert!(res.tau_at(-1.0).is_err());
    }

    #[test]
    fn periods_follow_the_energy() {
        assert!((kepler_period(-0.5, 1.0) - 2.0 * PI).abs() < 1e-14);
        assert!((kepler_period(-0.125, 1.0) - 16.0 * PI).abs() < 1e-12);
        assert!((oscillator_period(-0.5, 1.0) - 2.0 * PI).abs() < 1e-14);
    }

    #[test]
    fn rejects_origin() {
        let p0 = State3::new([0.0; 3], [1.0, 0.0, 0.0]);
        assert!(unfold_kepler(&p0, 1.0, &UnfoldOptions::default()).is_err());
    }
}
