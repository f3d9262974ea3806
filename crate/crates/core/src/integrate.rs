//! Adaptive Dormand-Prince 5(4) integration with dense output, invariant
//! monitors and return-time detection.
//!
//! A fixed-step classical RK4 ([`rk4_fixed`]) is kept as an independent
//! reference for tests.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::systems::{DynamicalSystem, Observable};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Upper bound on the step size.
    pub max_step: f64,
    /// First trial step; chosen automatically when `None`.
    pub initial_step: Option<f64>,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_step: f64::INFINITY,
            initial_step: None,
            max_steps: 10_000_000,
        }
    }
}

impl IntegratorConfig {
    pub fn with_tolerances(rel_tol: f64, abs_tol: f64) -> Self {
        Self {
            rel_tol,
            abs_tol,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |x: f64| x > 0.0 && !x.is_nan();
        if !positive(self.rel_tol) || !positive(self.abs_tol) {
            return Err(Error::Config(format!(
                "tolerances must be positive (rel_tol = {}, abs_tol = {})",
                self.rel_tol, self.abs_tol
            )));
        }
        if !positive(self.max_step) {
            return Err(Error::Config(format!(
                "max_step must be positive, got {}",
                self.max_step
            )));
        }
        if let Some(h) = self.initial_step {
            if !(positive(h) && h.is_finite()) {
                return Err(Error::Config(format!(
                    "initial_step must be positive, got {h}"
                )));
            }
        }
        if self.max_steps == 0 {
            return Err(Error::Config("max_steps must be positive".into()));
        }
        Ok(())
    }
}

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
/// Difference between the 5th and 4th order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
/// Dense-output weights (Hairer's `contd5`).
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

/// Quartic interpolant over one accepted step.
#[derive(Debug, Clone)]
struct Segment {
    t0: f64,
    h: f64,
    r: [Vec<f64>; 5],
}

impl Segment {
    fn theta(&self, t: f64) -> f64 {
        (t - self.t0) / self.h
    }

    fn eval(&self, t: f64) -> Vec<f64> {
        let th = self.theta(t);
        let th1 = 1.0 - th;
        let [r1, r2, r3, r4, r5] = &self.r;
        (0..r1.len())
            .map(|i| r1[i] + th * (r2[i] + th1 * (r3[i] + th * (r4[i] + th1 * r5[i]))))
            .collect()
    }

    fn eval_derivative(&self, t: f64) -> Vec<f64> {
        let th = self.theta(t);
        let th1 = 1.0 - th;
        let [_, r2, r3, r4, r5] = &self.r;
        (0..r2.len())
            .map(|i| {
                let c = r4[i] + th1 * r5[i];
                let dc = -r5[i];
                let b = r3[i] + th * c;
                let db = c + th * dc;
                let a = r2[i] + th1 * b;
                let da = -b + th1 * db;
                (a + th * da) / self.h
            })
            .collect()
    }
}

/// Accepted steps of one integration run plus the dense interpolant.
#[derive(Debug, Clone)]
pub struct Trajectory {
    times: Vec<f64>,
    states: Vec<Vec<f64>>,
    monitor_names: Vec<String>,
    monitor_values: Vec<Vec<f64>>,
    segments: Vec<Segment>,
    labels: Vec<String>,
}

impl Trajectory {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[Vec<f64>] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.states[0].len()
    }

    pub fn t_start(&self) -> f64 {
        self.times[0]
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().expect("trajectory is never empty")
    }

    pub fn initial_state(&self) -> &[f64] {
        &self.states[0]
    }

    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("trajectory is never empty")
    }

    pub fn monitor_names(&self) -> &[String] {
        &self.monitor_names
    }

    /// Monitor values at every accepted step, one row per step.
    pub fn monitor_values(&self) -> &[Vec<f64>] {
        &self.monitor_values
    }

    /// Column labels used by [`Trajectory::write_csv`].
    pub fn with_labels(mut self, labels: Vec<String>) -> Self {
        assert_eq!(labels.len(), self.dim(), "one label per state component");
        self.labels = labels;
        self
    }

    fn segment_for(&self, t: f64) -> Result<&Segment> {
        let (t0, t1) = (self.t_start(), self.t_end());
        let slack = 1e-12 * t1.abs().max(1.0);
        if !(t >= t0 - slack && t <= t1 + slack) {
            return Err(Error::Config(format!(
                "t = {t} is outside the trajectory range [{t0}, {t1}]"
            )));
        }
        if self.segments.is_empty() {
            return Err(Error::Config(
                "trajectory has no steps to interpolate".into(),
            ));
        }
        let idx = self
            .segments
            .partition_point(|s| s.t0 + s.h < t)
            .min(self.segments.len() - 1);
        Ok(&self.segments[idx])
    }

    /// Dense-output state at `t`.
    pub fn state_at(&self, t: f64) -> Result<Vec<f64>> {
        if self.segments.is_empty() && t == self.t_start() {
            return Ok(self.states[0].clone());
        }
        Ok(self.segment_for(t)?.eval(t))
    }

    /// Time derivative of the dense interpolant at `t`.
    pub fn derivative_at(&self, t: f64) -> Result<Vec<f64>> {
        Ok(self.segment_for(t)?.eval_derivative(t))
    }

    /// Largest `|m(t) − m(t₀)|` over accepted steps.
    pub fn monitor_drift(&self, name: &str) -> Option<f64> {
        let j = self.monitor_names.iter().position(|n| n == name)?;
        let m0 = self.monitor_values[0][j];
        Some(
            self.monitor_values
                .iter()
                .map(|row| (row[j] - m0).abs())
                .fold(0.0, f64::max),
        )
    }

    /// Drift of every monitor, relative to `max(|m(t₀)|, 1)`.
    pub fn monitor_drifts(&self) -> Vec<(String, f64)> {
        self.monitor_names
            .iter()
            .map(|n| {
                let j = self.monitor_names.iter().position(|m| m == n).unwrap();
                let scale = self.monitor_values[0][j].abs().max(1.0);
                (n.clone(), self.monitor_drift(n).unwrap() / scale)
            })
            .collect()
    }

    /// Writes one row per accepted step: time, state, then monitors.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["t".to_string()];
        header.extend(self.labels.iter().cloned());
        header.extend(self.monitor_names.iter().cloned());
        w.write_record(&header)?;
        for i in 0..self.len() {
            let row = std::iter::once(self.times[i])
                .chain(self.states[i].iter().copied())
                .chain(self.monitor_values[i].iter().copied())
                .map(format_float);
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Exponent notation with 17 significant digits.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn error_norm(err: &[f64], y0: &[f64], y1: &[f64], cfg: &IntegratorConfig) -> f64 {
    let sum: f64 = err
        .iter()
        .zip(y0.iter().zip(y1))
        .map(|(e, (a, b))| {
            let sc = cfg.abs_tol + cfg.rel_tol * a.abs().max(b.abs());
            (e / sc).powi(2)
        })
        .sum();
    (sum / err.len() as f64).sqrt()
}

fn rms_scaled(v: &[f64], y: &[f64], cfg: &IntegratorConfig) -> f64 {
    let sum: f64 = v
        .iter()
        .zip(y)
        .map(|(a, b)| (a / (cfg.abs_tol + cfg.rel_tol * b.abs())).powi(2))
        .sum();
    (sum / v.len() as f64).sqrt()
}

fn rhs_error(t: f64, state: &[f64], source: crate::error::FieldError) -> Error {
    Error::Rhs {
        t,
        state: state.to_vec(),
        source,
    }
}

/// Hairer-Wanner starting step.
fn initial_step(sys: &DynamicalSystem, y: &[f64], f0: &[f64], cfg: &IntegratorConfig) -> f64 {
    let d0 = rms_scaled(y, y, cfg);
    let d1 = rms_scaled(f0, y, cfg);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    let y1: Vec<f64> = y.iter().zip(f0).map(|(a, b)| a + h0 * b).collect();
    let d2 = match sys.field(&y1) {
        Ok(f1) => {
            let df: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
            rms_scaled(&df, y, cfg) / h0
        }
        Err(_) => return h0,
    };
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(cfg.max_step)
}

struct StepOutcome {
    y_new: Vec<f64>,
    k: [Vec<f64>; 7],
    err: f64,
}

fn try_step(
    sys: &DynamicalSystem,
    t: f64,
    y: &[f64],
    k1: &[f64],
    h: f64,
    cfg: &IntegratorConfig,
) -> Result<StepOutcome> {
    let n = y.len();
    let mut k: [Vec<f64>; 7] = std::array::from_fn(|_| vec![0.0; n]);
    k[0].copy_from_slice(k1);
    let mut stage = vec![0.0; n];
    for s in 1..7 {
        for i in 0..n {
            let acc: f64 = (0..s).map(|j| A[s][j] * k[j][i]).sum();
            stage[i] = y[i] + h * acc;
        }
        sys.eval(&stage, &mut k[s])
            .map_err(|e| rhs_error(t + C[s] * h, &stage, e))?;
    }
    // Stage 7 is evaluated at the new point (FSAL), so `stage` holds y_new.
    let y_new = stage;
    let err: Vec<f64> = (0..n)
        .map(|i| h * (0..7).map(|j| E[j] * k[j][i]).sum::<f64>())
        .collect();
    let err = error_norm(&err, y, &y_new, cfg);
    Ok(StepOutcome { y_new, k, err })
}

/// Integrates `sys` from `s0` at `t = 0` to `t_end`, recording `monitors` at
/// every accepted step.
pub fn integrate(
    sys: &DynamicalSystem,
    s0: &[f64],
    t_end: f64,
    cfg: &IntegratorConfig,
    monitors: &[Observable],
) -> Result<Trajectory> {
    cfg.validate()?;
    if s0.len() != sys.dim() {
        return Err(Error::InvalidState(format!(
            "initial state has dimension {}, system `{}` expects {}",
            s0.len(),
            sys.name(),
            sys.dim()
        )));
    }
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::Config(format!(
            "t_end must be finite and non-negative, got {t_end}"
        )));
    }
    let eval_monitors = |y: &[f64]| monitors.iter().map(|m| m.eval(y)).collect::<Vec<_>>();
    let mut traj = Trajectory {
        times: vec![0.0],
        states: vec![s0.to_vec()],
        monitor_names: monitors.iter().map(|m| m.name().to_string()).collect(),
        monitor_values: vec![eval_monitors(s0)],
        segments: Vec::new(),
        labels: (0..s0.len()).map(|i| format!("s{i}")).collect(),
    };
    if t_end == 0.0 {
        return Ok(traj);
    }

    let mut t = 0.0;
    let mut y = s0.to_vec();
    let mut f = sys.field(&y).map_err(|e| rhs_error(t, &y, e))?;
    let mut h = cfg
        .initial_step
        .unwrap_or_else(|| initial_step(sys, &y, &f, cfg))
        .min(cfg.max_step);
    let mut steps = 0usize;
    let mut last_rejected = false;

    while t < t_end {
        if steps >= cfg.max_steps {
            return Err(Error::StepLimit {
                max_steps: cfg.max_steps,
                t,
            });
        }
        steps += 1;
        let h_min = 16.0 * f64::EPSILON * t.abs().max(1e-300);
        if h < h_min {
            return Err(Error::StepUnderflow { t, h });
        }
        let last = t + h >= t_end;
        if last {
            h = t_end - t;
        }
        let outcome = match try_step(sys, t, &y, &f, h, cfg) {
            Ok(o) => o,
            Err(e) => {
                // Retry once at half step before surfacing the failure.
                h *= 0.5;
                match try_step(sys, t, &y, &f, h, cfg) {
                    Ok(o) => o,
                    Err(_) => return Err(e),
                }
            }
        };
        if !outcome.err.is_finite() {
            h *= 0.2;
            last_rejected = true;
            continue;
        }
        if outcome.err <= 1.0 {
            let StepOutcome { y_new, k, err } = outcome;
            let t_new = if h == t_end - t { t_end } else { t + h };
            let n = y.len();
            let r1 = y.clone();
            let r2: Vec<f64> = (0..n).map(|i| y_new[i] - y[i]).collect();
            let r3: Vec<f64> = (0..n).map(|i| h * k[0][i] - r2[i]).collect();
            let r4: Vec<f64> = (0..n).map(|i| r2[i] - h * k[6][i] - r3[i]).collect();
            let r5: Vec<f64> = (0..n)
                .map(|i| h * (0..7).map(|j| D[j] * k[j][i]).sum::<f64>())
                .collect();
            traj.segments.push(Segment {
                t0: t,
                h: t_new - t,
                r: [r1, r2, r3, r4, r5],
            });
            t = t_new;
            y = y_new;
            f = k[6].clone();
            traj.times.push(t);
            traj.monitor_values.push(eval_monitors(&y));
            traj.states.push(y.clone());

            let mut fac = 0.9 * err.max(1e-10).powf(-0.2);
            fac = fac.clamp(0.2, 5.0);
            if last_rejected {
                fac = fac.min(1.0);
            }
            h = (h * fac).min(cfg.max_step);
            last_rejected = false;
        } else {
            let fac = (0.9 * outcome.err.powf(-0.2)).max(0.2);
            h *= fac;
            last_rejected = true;
        }
    }
    Ok(traj)
}

/// Classical RK4 with `n_steps` equal steps; returns the state after every
/// step (including the initial one).
pub fn rk4_fixed(
    sys: &DynamicalSystem,
    s0: &[f64],
    t_end: f64,
    n_steps: usize,
) -> Result<Vec<Vec<f64>>> {
    if n_steps == 0 {
        return Err(Error::Config("n_steps must be positive".into()));
    }
    let h = t_end / n_steps as f64;
    let n = s0.len();
    let mut out = Vec::with_capacity(n_steps + 1);
    let mut y = s0.to_vec();
    out.push(y.clone());
    let axpy = |y: &[f64], k: &[f64], c: f64| -> Vec<f64> {
        y.iter().zip(k).map(|(a, b)| a + c * b).collect()
    };
    for step in 0..n_steps {
        let t = step as f64 * h;
        let eval = |z: &[f64], tt: f64| sys.field(z).map_err(|e| rhs_error(tt, z, e));
        let k1 = eval(&y, t)?;
        let k2 = eval(&axpy(&y, &k1, 0.5 * h), t + 0.5 * h)?;
        let k3 = eval(&axpy(&y, &k2, 0.5 * h), t + 0.5 * h)?;
        let k4 = eval(&axpy(&y, &k3, h), t + h)?;
        for i in 0..n {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        out.push(y.clone());
    }
    Ok(out)
}

/// First `t > 0` at which the first `reference.len()` state components come
/// back within `tol` (Euclidean) of `reference`.
pub fn find_return_time(traj: &Trajectory, reference: &[f64], tol: f64) -> Result<f64> {
    let n = reference.len();
    find_return_time_with(traj, |s| s[..n].to_vec(), reference, tol)
}

/// As [`find_return_time`], for the image of the state under `map`.
///
/// The trajectory must first leave the `2 tol` ball around `reference`; the
/// return is the first subsequent local minimum of the distance lying inside
/// the `tol` ball, located by root refinement of its time derivative.
pub fn find_return_time_with(
    traj: &Trajectory,
    map: impl Fn(&[f64]) -> Vec<f64>,
    reference: &[f64],
    tol: f64,
) -> Result<f64> {
    let dist2 = |t: f64| -> Result<f64> {
        let m = map(&traj.state_at(t)?);
        Ok(m.iter().zip(reference).map(|(a, b)| (a - b).powi(2)).sum())
    };
    // d/dt of half the squared distance, via a central difference of the
    // mapped dense output.
    let slope = |t: f64, h: f64| -> Result<f64> {
        let (t0, t1) = (traj.t_start(), traj.t_end());
        let delta = 1e-4 * h;
        let (a, b) = ((t - delta).max(t0), (t + delta).min(t1));
        let m = map(&traj.state_at(t)?);
        let (ma, mb) = (map(&traj.state_at(a)?), map(&traj.state_at(b)?));
        Ok(m.iter()
            .zip(reference)
            .zip(ma.iter().zip(&mb))
            .map(|((x, r), (xa, xb))| (x - r) * (xb - xa) / (b - a))
            .sum())
    };

    const SUB: usize = 8;
    let mut departed = false;
    for seg in &traj.segments {
        let ts: Vec<f64> = (0..=SUB)
            .map(|j| seg.t0 + seg.h * j as f64 / SUB as f64)
            .collect();
        let mut prev: Option<(f64, f64)> = None;
        for &t in &ts {
            if !departed {
                if dist2(t)?.sqrt() > 2.0 * tol {
                    departed = true;
                } else {
                    continue;
                }
            }
            let g = slope(t, seg.h)?;
            if let Some((ta, ga)) = prev {
                if ga < 0.0 && g >= 0.0 {
                    let t_star = refine_root(|s| slope(s, seg.h), ta, ga, t, g)?;
                    if dist2(t_star)?.sqrt() < tol {
                        return Ok(t_star);
                    }
                }
            }
            prev = Some((t, g));
        }
    }
    Err(Error::NoReturn { tol })
}

/// Illinois-modified regula falsi on a sign-changing bracket.
pub(crate) fn refine_root(
    g: impl Fn(f64) -> Result<f64>,
    mut a: f64,
    mut ga: f64,
    mut b: f64,
    mut gb: f64,
) -> Result<f64> {
    let mut side = 0i8;
    for _ in 0..200 {
        if (b - a).abs() <= 1e-14 * b.abs().max(1.0) {
            break;
        }
        let c = (a * gb - b * ga) / (gb - ga);
        let c = if c > a.min(b) && c < a.max(b) {
            c
        } else {
            0.5 * (a + b)
        };
        let gc = g(c)?;
        if gc == 0.0 {
            return Ok(c);
        }
        if (gc < 0.0) == (ga < 0.0) {
            a = c;
            ga = gc;
            if side == -1 {
                gb *= 0.5;
            }
            side = -1;
        } else {
            b = c;
            gb = gc;
            if side == 1 {
                ga *= 0.5;
            }
            side = 1;
        }
    }
    Ok(0.5 * (a + b))
}
