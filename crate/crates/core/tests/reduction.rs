//! Reduction to the Kepler problem: projected constants, gauge and scaling
//! independence, and the conformal field on `Σ₀`.

use kepler_unfold::integrate::IntegratorConfig;
use kepler_unfold::phase_geometry::{ks_lift, FiberAngle, State3};
use kepler_unfold::reduction::{
    check_equivariance, compare_unfoldings, kepler_conformal_setup, oscillator_period,
    project_constants, unfold_kepler, UnfoldOptions, GRID_POINTS,
};
use kepler_unfold::systems::{oscillator_l, EnergyScaling, ObservableSet};
use kepler_unfold::Error;

fn tight() -> IntegratorConfig {
    IntegratorConfig::with_tolerances(1e-12, 1e-14)
}

#[test]
fn oscillator_constants_descend_with_their_factors() {
    let set = ObservableSet::default();
    for i in 1..=3 {
        let j =
            project_constants(&set.get(&format!("oscillator.J{i}")).unwrap(), 1.0, 200, 3).unwrap();
        assert_eq!(j.downstairs, format!("kepler.L{i}"));
        assert!((j.factor - 0.5).abs() < 1e-10, "{j:?}");
        let q =
            project_constants(&set.get(&format!("oscillator.Q{i}")).unwrap(), 1.0, 200, 3).unwrap();
        assert_eq!(q.downstairs, format!("kepler.A{i}"));
        assert!((q.factor + 0.5).abs() < 1e-10, "{q:?}");
    }
    let e = project_constants(&set.get("oscillator.energy").unwrap(), 1.0, 200, 3).unwrap();
    assert_eq!(e.downstairs, "kepler.energy");
    assert!((e.factor - 1.0).abs() < 1e-10);
}

#[test]
fn natural_chart_constants_descend_too() {
    let set = ObservableSet::default();
    let j = project_constants(&set.get("conformal.J2").unwrap(), 1.0, 100, 4).unwrap();
    assert_eq!(j.downstairs, "kepler.L2");
    assert!((j.factor - 0.5).abs() < 1e-10);
    let h = project_constants(&set.get("conformal.h").unwrap(), 1.0, 100, 4).unwrap();
    assert_eq!(h.downstairs, "0");
}

#[test]
fn non_commuting_generator_is_rejected() {
    let err = project_constants(&oscillator_l(1, 3), 1.0, 50, 5).unwrap_err();
    assert!(matches!(err, Error::NonCommuting { .. }), "{err}");
}

#[test]
fn downstairs_orbit_does_not_depend_on_the_gauge() {
    let p0 = State3::new([1.0, 0.0, 0.0], [0.0, 1.6f64.sqrt(), 0.0]);
    let tau_end = 0.5 * oscillator_period(-0.2, 1.0);
    let run = |lambda: f64| {
        let options = UnfoldOptions {
            gauge: FiberAngle(lambda),
            integrator: tight(),
            ..UnfoldOptions::default()
        };
        unfold_kepler(&p0, tau_end, &options).unwrap()
    };
    let base = run(0.0);
    for lambda in [0.7, 2.0, 3.9, 6.1] {
        let other = run(lambda);
        let t = base.t_end().min(other.t_end());
        let cmp = compare_unfoldings(&base, &other, t, GRID_POINTS).unwrap();
        assert!(
            cmp.max_divergence < 1e-8,
            "lambda {lambda}: {}",
            cmp.max_divergence
        );
    }
}

#[test]
fn energy_scaling_changes_only_the_parametrization() {
    let p0 = State3::new([1.0, 0.0, 0.0], [0.0, 1.2, 0.0]);
    let energy = 0.5 * 1.44 - 1.0;
    let unit = unfold_kepler(
        &p0,
        0.5 * oscillator_period(energy, 1.0),
        &UnfoldOptions {
            integrator: tight(),
            ..UnfoldOptions::default()
        },
    )
    .unwrap();
    let g = 1.0 / energy.abs();
    let scaled = unfold_kepler(
        &p0,
        0.5 * oscillator_period(energy, g),
        &UnfoldOptions {
            scaling: EnergyScaling::InverseAbsEnergy,
            integrator: tight(),
            ..UnfoldOptions::default()
        },
    )
    .unwrap();
    assert!((scaled.g - g).abs() < 1e-12 * g);
    assert!((unit.t_end() - scaled.t_end()).abs() < 1e-8);
    let t = unit.t_end().min(scaled.t_end());
    let cmp = compare_unfoldings(&unit, &scaled, t, GRID_POINTS).unwrap();
    assert!(cmp.max_divergence < 1e-8, "{}", cmp.max_divergence);
}

#[test]
fn inverse_energy_scaling_rejects_bound_orbits() {
    let p0 = State3::new([1.0, 0.0, 0.0], [0.0, 1.0, 0.0]);
    let options = UnfoldOptions {
        scaling: EnergyScaling::InverseEnergy,
        ..UnfoldOptions::default()
    };
    assert!(unfold_kepler(&p0, 1.0, &options).is_err());
}

#[test]
fn conformal_flow_on_sigma0_projects_to_kepler() {
    let setup = kepler_conformal_setup(1.0).unwrap();
    let p0 = State3::new([1.0, 0.2, -0.1], [0.1, 0.9, 0.3]);
    let s0 = ks_lift(&p0, FiberAngle(0.4)).unwrap().to_array();
    let rep = check_equivariance(&setup, &s0, 4.0, 1e-7, &tight()).unwrap();
    assert!(rep.pass, "{rep:?}");
    assert!(rep.constraint_drift < 1e-9, "{}", rep.constraint_drift);
}

#[test]
fn hyperbolic_orbit_unfolds() {
    let p0 = State3::new([1.0, 0.0, 0.0], [0.0, 1.8, 0.0]);
    let options = UnfoldOptions {
        integrator: tight(),
        ..UnfoldOptions::default()
    };
    let res = unfold_kepler(&p0, 2.0, &options).unwrap();
    assert!(res.energy > 0.0);
    let cmp =
        kepler_unfold::reduction::compare_with_kepler(&res, res.t_end(), GRID_POINTS, &tight())
            .unwrap();
    assert!(cmp.max_divergence < 1e-7, "{}", cmp.max_divergence);
}
