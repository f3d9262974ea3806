//! Seeded random phase-space points for property checks and verification
//! suites.
//!
//! All randomness flows from a single `u64` seed through ChaCha8, so sampled
//! states are identical across platforms.

use std::f64::consts::TAU;

use nalgebra::{SVector, Vector3, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::phase_geometry::{ks_lift, FiberAngle, State3, State4};
use crate::systems::EnergySign;

pub type SampleRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SampleRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal<const N: usize>(rng: &mut SampleRng) -> SVector<f64, N> {
    SVector::from_fn(|_, _| rng.sample(StandardNormal))
}

/// Gaussian vector conditioned on `|v| ≥ min_norm`.
fn normal_away_from_origin<const N: usize>(rng: &mut SampleRng, min_norm: f64) -> SVector<f64, N> {
    loop {
        let v = normal::<N>(rng);
        if v.norm() >= min_norm {
            return v;
        }
    }
}

pub fn fiber_angle(rng: &mut SampleRng) -> FiberAngle {
    FiberAngle(rng.random_range(0.0..TAU))
}

/// Gaussian Kepler state with `r ≥ 0.5`.
pub fn state3(rng: &mut SampleRng) -> State3 {
    let x: Vector3<f64> = normal_away_from_origin(rng, 0.5);
    let v: Vector3<f64> = normal(rng);
    State3 { x, v }
}

/// Gaussian `(y, u)` with `R ≥ 0.5`; generically off `Σ₀`.
pub fn state4(rng: &mut SampleRng) -> State4 {
    let y: Vector4<f64> = normal_away_from_origin(rng, 0.5);
    let u: Vector4<f64> = normal(rng);
    State4 { y, u }
}

/// A point of `Σ₀` on a random fiber over a random Kepler state.
pub fn sigma0_state(rng: &mut SampleRng) -> State4 {
    let p = state3(rng);
    let lambda = fiber_angle(rng);
    ks_lift(&p, lambda).expect("r ≥ 0.5 always lifts")
}

/// Gaussian `(Y, U)` with `|Y| ≥ 0.5`.
pub fn oscillator_state(rng: &mut SampleRng) -> [f64; 8] {
    let y: Vector4<f64> = normal_away_from_origin(rng, 0.5);
    let u: Vector4<f64> = normal(rng);
    let mut z = [0.0; 8];
    z[..4].copy_from_slice(y.as_slice());
    z[4..].copy_from_slice(u.as_slice());
    z
}

/// Oscillator-chart state whose energy `(|U|²/2 − k)/|Y|²` has the given sign
/// and magnitude at least `0.05`.
pub fn oscillator_state_with_energy(rng: &mut SampleRng, sign: EnergySign, k: f64) -> [f64; 8] {
    loop {
        let z = oscillator_state(rng);
        let y2: f64 = z[..4].iter().map(|a| a * a).sum();
        let u2: f64 = z[4..].iter().map(|a| a * a).sum();
        let e = (0.5 * u2 - k) / y2;
        let ok = match sign {
            EnergySign::Negative => e < -0.05,
            EnergySign::Positive => e > 0.05,
        };
        if ok {
            return z;
        }
    }
}
