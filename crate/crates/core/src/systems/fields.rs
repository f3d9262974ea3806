use nalgebra::{Vector3, Vector4};

use super::{Chart, DynamicalSystem, EnergyScaling, ObservableSet};
use crate::error::FieldError;
use crate::phase_geometry::{State3, State4};
use crate::systems::observables::{
    calogero_energy, free_energy, oscillator_invariant, radial_invariant,
};

/// Collision floor on `r` for the Kepler field.
pub const KEPLER_R_MIN: f64 = 1e-12;
/// Floor on `R = |y|` wherever `1/R` appears upstairs.
pub const CONFORMAL_R_MIN: f64 = 1e-9;
/// Minimum particle separation for Calogero-Moser.
pub const CALOGERO_MIN_GAP: f64 = 1e-9;

fn check_floor(quantity: &'static str, value: f64, floor: f64) -> Result<(), FieldError> {
    if value < floor || !value.is_finite() {
        Err(FieldError::NearSingular {
            quantity,
            value,
            floor,
        })
    } else {
        Ok(())
    }
}

fn read4(z: &[f64], at: usize) -> Vector4<f64> {
    Vector4::new(z[at], z[at + 1], z[at + 2], z[at + 3])
}

fn write4(out: &mut [f64], at: usize, w: &Vector4<f64>) {
    out[at..at + 4].copy_from_slice(w.as_slice());
}

/// `ẋ = v`, `v̇ = −k x / r³`.
pub fn kepler_field(
    s: &State3,
    k: f64,
    r_min: f64,
) -> Result<(Vector3<f64>, Vector3<f64>), FieldError> {
    let r = s.radius();
    check_floor("r", r, r_min)?;
    Ok((s.v, -k * s.x / (r * r * r)))
}

pub fn kepler_system(k: f64) -> DynamicalSystem {
    kepler_system_with_floor(k, KEPLER_R_MIN)
}

pub fn kepler_system_with_floor(k: f64, r_min: f64) -> DynamicalSystem {
    let obs = ObservableSet::new(k);
    let constants = [
        "kepler.energy",
        "kepler.L1",
        "kepler.L2",
        "kepler.L3",
        "kepler.A1",
        "kepler.A2",
        "kepler.A3",
    ]
    .map(|n| obs.get(n).expect("registered"));
    DynamicalSystem::new("kepler", Chart::Kepler, move |z, out| {
        let (dx, dv) = kepler_field(&State3::from_slice(z), k, r_min)?;
        out[..3].copy_from_slice(dx.as_slice());
        out[3..6].copy_from_slice(dv.as_slice());
        Ok(())
    })
    .with_energy(constants[0].clone())
    .with_constants(constants)
}

/// Free motion in `R³`, `ẍ = 0`.
pub fn free_particle_system() -> DynamicalSystem {
    let obs = ObservableSet::default();
    let constants =
        ["kepler.L1", "kepler.L2", "kepler.L3"].map(|n| obs.get(n).expect("registered"));
    DynamicalSystem::new("free3d", Chart::Kepler, |z, out| {
        out[..3].copy_from_slice(&z[3..6]);
        out[3..6].fill(0.0);
        Ok(())
    })
    .with_energy(free_energy())
    .with_constants(constants)
    .with_constants([free_energy()])
}

/// Acceleration of the conformal Kepler field in its raw form
/// `(u²/R²) y − k/(2R⁶) y − 2 (u·y/R²) u`.
pub fn conformal_kepler_field(
    s: &State4,
    k: f64,
    r_min: f64,
) -> Result<(Vector4<f64>, Vector4<f64>), FieldError> {
    let r2 = s.y.norm_squared();
    check_floor("R", r2.sqrt(), r_min)?;
    let u2 = s.u.norm_squared();
    let yu = s.y.dot(&s.u);
    let acc = (u2 / r2 - k / (2.0 * r2 * r2 * r2)) * s.y - (2.0 * yu / r2) * s.u;
    Ok((s.u, acc))
}

/// The same acceleration written through the energy,
/// `𝓔 y / (2R⁴) − 2 (u·y/R²) u`.
pub fn conformal_acceleration_energy_form(s: &State4, k: f64) -> Vector4<f64> {
    let r2 = s.y.norm_squared();
    let energy = 2.0 * r2 * s.u.norm_squared() - k / r2;
    energy / (2.0 * r2 * r2) * s.y - (2.0 * s.y.dot(&s.u) / r2) * s.u
}

pub fn conformal_kepler_system(k: f64) -> DynamicalSystem {
    let obs = ObservableSet::new(k);
    let names = [
        "conformal.energy",
        "conformal.h",
        "conformal.J1",
        "conformal.J2",
        "conformal.J3",
        "conformal.Q1",
        "conformal.Q2",
        "conformal.Q3",
    ];
    let constants = names.map(|n| obs.get(n).expect("registered"));
    DynamicalSystem::new("conformal", Chart::Natural, move |z, out| {
        let (dy, du) = conformal_kepler_field(&State4::from_slice(z), k, CONFORMAL_R_MIN)?;
        write4(out, 0, &dy);
        write4(out, 4, &du);
        Ok(())
    })
    .with_energy(constants[0].clone())
    .with_constants(constants)
}

/// The reparametrized field `f Γ`, `f = 2 g(𝓔) R²`, written in the fixed
/// oscillator chart `(Y, U) = (y, 2R²u)`: `dY/dτ = g U`, `dU/dτ = 2 g 𝓔 Y`,
/// with `𝓔 = (|U|²/2 − k)/|Y|²`. For `g ≡ 1` this is the second-order field
/// `U ∂_Y + 2𝓔 Y ∂_U`.
pub fn reparametrized_field(
    big_y: &Vector4<f64>,
    big_u: &Vector4<f64>,
    scaling: &EnergyScaling,
    k: f64,
) -> Result<(Vector4<f64>, Vector4<f64>), FieldError> {
    let r2 = big_y.norm_squared();
    check_floor("R", r2.sqrt(), CONFORMAL_R_MIN)?;
    let energy = (0.5 * big_u.norm_squared() - k) / r2;
    let g = scaling.factor(energy)?;
    Ok((g * big_u, 2.0 * g * energy * big_y))
}

pub fn reparametrized_system(k: f64, scaling: EnergyScaling) -> DynamicalSystem {
    let obs = ObservableSet::new(k);
    let names = [
        "oscillator.energy",
        "oscillator.h",
        "oscillator.J1",
        "oscillator.J2",
        "oscillator.J3",
        "oscillator.Q1",
        "oscillator.Q2",
        "oscillator.Q3",
    ];
    let constants = names.map(|n| obs.get(n).expect("registered"));
    DynamicalSystem::new("reparametrized", Chart::Oscillator, move |z, out| {
        let (dy, du) = reparametrized_field(&read4(z, 0), &read4(z, 4), &scaling, k)?;
        write4(out, 0, &dy);
        write4(out, 4, &du);
        Ok(())
    })
    .with_energy(constants[0].clone())
    .with_constants(constants)
}

/// The linear completion `U ∂_Y + 2E Y ∂_U` at fixed energy `E`, defined at
/// `Y = 0` as well.
pub fn completed_oscillator_field(energy: f64) -> DynamicalSystem {
    completed_oscillator_field_scaled(energy, 1.0)
}

/// Completion of the `g`-scaled family: `g U ∂_Y + 2 g E Y ∂_U`.
pub fn completed_oscillator_field_scaled(energy: f64, g: f64) -> DynamicalSystem {
    let obs = ObservableSet::default();
    let constants = [
        "oscillator.h",
        "oscillator.J1",
        "oscillator.J2",
        "oscillator.J3",
    ]
    .map(|n| obs.get(n).expect("registered"));
    let invariant = oscillator_invariant(energy);
    DynamicalSystem::new(
        format!("oscillator(E={energy})"),
        Chart::Oscillator,
        move |z, out| {
            for a in 0..4 {
                out[a] = g * z[4 + a];
                out[4 + a] = 2.0 * g * energy * z[a];
            }
            Ok(())
        },
    )
    .with_energy(invariant.clone())
    .with_constants(constants)
    .with_constants([invariant])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RadialVariant {
    /// `r̈ = 2E/r − ṙ²/r` on `|v|² = 2E`.
    FixedEnergy(f64),
    /// `r̈ = ℓ²/r³` at fixed angular momentum.
    FixedAngularMomentum(f64),
}

pub fn radial_reduced_field(variant: RadialVariant) -> DynamicalSystem {
    DynamicalSystem::new("radial", Chart::Radial, move |z, out| {
        let (r, vr) = (z[0], z[1]);
        if !(r > 0.0) {
            return Err(FieldError::NearSingular {
                quantity: "r",
                value: r,
                floor: 0.0,
            });
        }
        out[0] = vr;
        out[1] = match variant {
            RadialVariant::FixedEnergy(e) => (2.0 * e - vr * vr) / r,
            RadialVariant::FixedAngularMomentum(l) => l * l / (r * r * r),
        };
        Ok(())
    })
    .with_energy(radial_invariant(variant))
    .with_constants([radial_invariant(variant)])
}

/// `q̈₁ = −2ℓ²/(q₂−q₁)³`, `q̈₂ = +2ℓ²/(q₂−q₁)³`.
pub fn calogero_moser_field(l: f64) -> DynamicalSystem {
    DynamicalSystem::new("calogero", Chart::Calogero, move |z, out| {
        let gap = z[1] - z[0];
        check_floor("|q2 - q1|", gap.abs(), CALOGERO_MIN_GAP)?;
        let a = 2.0 * l * l / (gap * gap * gap);
        out[0] = z[2];
        out[1] = z[3];
        out[2] = -a;
        out[3] = a;
        Ok(())
    })
    .with_energy(calogero_energy(l))
    .with_constants([calogero_energy(l)])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kepler_examples() {
        let s = State3::new([1.0, 0.0, 0.0], [0.0, 1.0, 0.0]);
        let (dx, dv) = kepler_field(&s, 1.0, KEPLER_R_MIN).unwrap();
        assert_eq!(dx, Vector3::new(0.0, 1.0, 0.0));
        assert_eq!(dv, Vector3::new(-1.0, 0.0, 0.0));

        let s = State3::new([0.0, 2.0, 0.0], [0.0; 3]);
        let (dx, dv) = kepler_field(&s, 1.0, KEPLER_R_MIN).unwrap();
        assert_eq!(dx, Vector3::zeros());
        assert_eq!(dv, Vector3::new(0.0, -0.25, 0.0));

        let s = State3::new([1e-13, 0.0, 0.0], [0.0; 3]);
        assert!(matches!(
            kepler_field(&s, 1.0, KEPLER_R_MIN),
            Err(FieldError::NearSingular { .. })
        ));
    }

    #[test]
    fn conformal_examples() {
        let s = State4::new([1.0, 0.0, 0.0, 0.0], [0.0; 4]);
        let (_, acc) = conformal_kepler_field(&s, 1.0, CONFORMAL_R_MIN).unwrap();
        assert_eq!(acc, Vector4::new(-0.5, 0.0, 0.0, 0.0));
        let energy = ObservableSet::default().get("conformal.energy").unwrap();
        assert_eq!(energy.eval(&s.to_array()), -1.0);
        let s = State4::new([1e-10, 0.0, 0.0, 0.0], [0.0; 4]);
        assert!(conformal_kepler_field(&s, 1.0, CONFORMAL_R_MIN).is_err());
    }

    #[test]
    fn reparametrized_energy_shells() {
        // |U|²/2 − 1 = E|Y|² puts (Y, U) on Σ_E.
        let y = Vector4::new(1.0, 0.0, 0.0, 0.0);
        let shell = |e: f64| Vector4::new(0.0, (2.0 * (1.0 + e)).sqrt(), 0.0, 0.0);
        let (_, du) = reparametrized_field(&y, &shell(-0.5), &EnergyScaling::Unit, 1.0).unwrap();
        assert!((du + y).amax() < 1e-15);
        let (_, du) = reparametrized_field(&y, &shell(0.3), &EnergyScaling::Unit, 1.0).unwrap();
        assert!((du - 0.6 * y).amax() < 1e-15);
        let (_, du) = reparametrized_field(&y, &shell(0.0), &EnergyScaling::Unit, 1.0).unwrap();
        assert!(du.amax() < 1e-15);
    }

    #[test]
    fn completed_field_is_defined_at_origin() {
        let sys = completed_oscillator_field(-0.5);
        assert_eq!(sys.field(&[0.0; 8]).unwrap(), vec![0.0; 8]);
    }

    #[test]
    fn radial_examples() {
        let sys = radial_reduced_field(RadialVariant::FixedAngularMomentum(1.0));
        assert_eq!(sys.field(&[1.0, 0.0]).unwrap(), vec![0.0, 1.0]);
        let sys = radial_reduced_field(RadialVariant::FixedAngularMomentum(0.0));
        assert_eq!(sys.field(&[2.0, 0.5]).unwrap(), vec![0.5, 0.0]);
        let sys = radial_reduced_field(RadialVariant::FixedEnergy(0.5));
        assert!(sys.field(&[0.0, 0.5]).is_err());
        assert!(sys.field(&[-1.0, 0.5]).is_err());
    }

    #[test]
    fn calogero_examples() {
        let sys = calogero_moser_field(1.0);
        assert_eq!(
            sys.field(&[0.0, 1.0, 0.0, 0.0]).unwrap(),
            vec![0.0, 0.0, -2.0, 2.0]
        );
        let free = calogero_moser_field(0.0);
        assert_eq!(
            free.field(&[0.0, 1.0, 0.3, -0.2]).unwrap(),
            vec![0.3, -0.2, 0.0, 0.0]
        );
        assert!(sys.field(&[1.0, 1.0 + 1e-10, 0.0, 0.0]).is_err());
    }
}
