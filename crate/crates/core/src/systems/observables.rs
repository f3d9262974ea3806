use nalgebra::{Matrix4, Vector3, Vector4};

use super::{Chart, Observable, RadialVariant};
use crate::error::{Error, Result};

/// Paper-style index `α ∈ {1, 2, 3, 0}` to storage slot.
pub fn slot(alpha: usize) -> usize {
    match alpha {
        0 => 3,
        1..=3 => alpha - 1,
        _ => panic!("four-index out of range: {alpha}"),
    }
}

/// Index labels in storage order.
pub const FOUR_INDICES: [usize; 4] = [1, 2, 3, 0];

fn v3(z: &[f64], at: usize) -> Vector3<f64> {
    Vector3::new(z[at], z[at + 1], z[at + 2])
}

fn v4(z: &[f64], at: usize) -> Vector4<f64> {
    Vector4::new(z[at], z[at + 1], z[at + 2], z[at + 3])
}

fn concat3(a: Vector3<f64>, b: Vector3<f64>) -> Vec<f64> {
    a.iter().chain(b.iter()).copied().collect()
}

fn concat4(a: Vector4<f64>, b: Vector4<f64>) -> Vec<f64> {
    a.iter().chain(b.iter()).copied().collect()
}

/// Factory for the named constants of motion, at force constant `k`.
///
/// Names are `<chart>.<quantity>`:
///
/// | prefix        | chart       | quantities                                  |
/// |---------------|-------------|---------------------------------------------|
/// | `kepler.`     | `(x, v)`    | `energy`, `L1..L3`, `A1..A3`                |
/// | `conformal.`  | `(y, u)`    | `energy`, `h`, `J1..J3`, `Q1..Q3`           |
/// | `oscillator.` | `(Y, U)`    | `energy`, `h`, `J1..J3`, `Q1..Q3`, `L[a,b]`, `Q[a,b]` |
#[derive(Debug, Clone, Copy)]
pub struct ObservableSet {
    k: f64,
}

impl Default for ObservableSet {
    fn default() -> Self {
        Self { k: 1.0 }
    }
}

impl ObservableSet {
    pub fn new(k: f64) -> Self {
        Self { k }
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn names() -> Vec<String> {
        let mut names: Vec<String> = ["energy", "L1", "L2", "L3", "A1", "A2", "A3"]
            .iter()
            .map(|q| format!("kepler.{q}"))
            .collect();
        for chart in ["conformal", "oscillator"] {
            for q in ["energy", "h", "J1", "J2", "J3", "Q1", "Q2", "Q3"] {
                names.push(format!("{chart}.{q}"));
            }
        }
        for (i, &a) in FOUR_INDICES.iter().enumerate() {
            for &b in &FOUR_INDICES[i + 1..] {
                names.push(format!("oscillator.L[{a},{b}]"));
            }
        }
        for (i, &a) in FOUR_INDICES.iter().enumerate() {
            for &b in &FOUR_INDICES[i..] {
                names.push(format!("oscillator.Q[{a},{b}]"));
            }
        }
        names
    }

    pub fn get(&self, name: &str) -> Result<Observable> {
        let k = self.k;
        let unknown = || Error::UnknownObservable(name.to_string());
        let (chart, quantity) = name.split_once('.').ok_or_else(unknown)?;
        let obs = match (chart, quantity) {
            ("kepler", "energy") => kepler_energy(k),
            ("kepler", q) if q.len() == 2 => {
                let i = component_index(&q[1..]).ok_or_else(unknown)?;
                match &q[..1] {
                    "L" => angular_momentum(i),
                    "A" => runge_lenz(i, k),
                    _ => return Err(unknown()),
                }
            }
            ("oscillator", "energy") => oscillator_energy(k),
            ("oscillator", "h") => fiber_charge_oscillator(),
            ("oscillator", q) if q.starts_with("L[") || q.starts_with("Q[") => {
                let (a, b) = parse_pair(&q[1..]).ok_or_else(unknown)?;
                if q.starts_with('L') {
                    if a == b {
                        return Err(unknown());
                    }
                    oscillator_l(a, b)
                } else {
                    oscillator_q(a, b, k)
                }
            }
            ("oscillator", q) if q.len() == 2 => {
                let i = component_index(&q[1..]).ok_or_else(unknown)?;
                match &q[..1] {
                    "J" => commutant_j(i),
                    "Q" => commutant_q(i, k),
                    _ => return Err(unknown()),
                }
            }
            ("conformal", "energy") => conformal_energy(k),
            ("conformal", "h") => fiber_charge_natural(),
            ("conformal", q @ ("J1" | "J2" | "J3" | "Q1" | "Q2" | "Q3")) => {
                to_natural_chart(&self.get(&format!("oscillator.{q}"))?)
            }
            _ => return Err(unknown()),
        };
        Ok(obs.renamed(name))
    }
}

fn component_index(s: &str) -> Option<usize> {
    match s {
        "1" => Some(1),
        "2" => Some(2),
        "3" => Some(3),
        _ => None,
    }
}

fn parse_pair(s: &str) -> Option<(usize, usize)> {
    let inner = s.strip_prefix('[')?.strip_suffix(']')?;
    let (a, b) = inner.split_once(',')?;
    let a: usize = a.trim().parse().ok()?;
    let b: usize = b.trim().parse().ok()?;
    (a <= 3 && b <= 3).then_some((a, b))
}

fn levi_civita(i: usize, j: usize, k: usize) -> f64 {
    match (i, j, k) {
        (1, 2, 3) | (2, 3, 1) | (3, 1, 2) => 1.0,
        (3, 2, 1) | (1, 3, 2) | (2, 1, 3) => -1.0,
        _ => 0.0,
    }
}

// --- Kepler chart -----------------------------------------------------------

pub(crate) fn kepler_energy(k: f64) -> Observable {
    Observable::new(
        "kepler.energy",
        Chart::Kepler,
        move |z| {
            let (x, v) = (v3(z, 0), v3(z, 3));
            0.5 * v.norm_squared() - k / x.norm()
        },
        move |z| {
            let (x, v) = (v3(z, 0), v3(z, 3));
            let r = x.norm();
            concat3(k * x / (r * r * r), v)
        },
    )
}

/// `½|v|²` on `T R³`.
pub fn free_energy() -> Observable {
    Observable::new(
        "free.energy",
        Chart::Kepler,
        |z| 0.5 * v3(z, 3).norm_squared(),
        |z| concat3(Vector3::zeros(), v3(z, 3)),
    )
}

/// `L = x × v`, component `i ∈ {1, 2, 3}`.
pub(crate) fn angular_momentum(i: usize) -> Observable {
    Observable::new(
        format!("kepler.L{i}"),
        Chart::Kepler,
        move |z| v3(z, 0).cross(&v3(z, 3))[i - 1],
        move |z| {
            let (x, v) = (v3(z, 0), v3(z, 3));
            let mut g = vec![0.0; 6];
            for j in 1..=3 {
                for l in 1..=3 {
                    let e = levi_civita(i, j, l);
                    g[j - 1] += e * v[l - 1];
                    g[3 + l - 1] += e * x[j - 1];
                }
            }
            g
        },
    )
}

/// `A = v × L − k x/r = x|v|² − v(x·v) − k x/r`.
pub(crate) fn runge_lenz(i: usize, k: f64) -> Observable {
    let n = i - 1;
    Observable::new(
        format!("kepler.A{i}"),
        Chart::Kepler,
        move |z| {
            let (x, v) = (v3(z, 0), v3(z, 3));
            (x * v.norm_squared() - v * x.dot(&v) - k * x / x.norm())[n]
        },
        move |z| {
            let (x, v) = (v3(z, 0), v3(z, 3));
            let r = x.norm();
            let (v2, xv) = (v.norm_squared(), x.dot(&v));
            let mut g = vec![0.0; 6];
            for j in 0..3 {
                let d = if n == j { 1.0 } else { 0.0 };
                g[j] = d * v2 - v[n] * v[j] - k * (d / r - x[n] * x[j] / (r * r * r));
                g[3 + j] = 2.0 * x[n] * v[j] - d * xv - v[n] * x[j];
            }
            g
        },
    )
}

// --- Natural chart (y, u) ---------------------------------------------------

/// `𝓔 = 2R²|u|² − k/R²`.
pub(crate) fn conformal_energy(k: f64) -> Observable {
    Observable::new(
        "conformal.energy",
        Chart::Natural,
        move |z| {
            let (y, u) = (v4(z, 0), v4(z, 4));
            let r2 = y.norm_squared();
            2.0 * r2 * u.norm_squared() - k / r2
        },
        move |z| {
            let (y, u) = (v4(z, 0), v4(z, 4));
            let r2 = y.norm_squared();
            concat4(
                (4.0 * u.norm_squared() + 2.0 * k / (r2 * r2)) * y,
                4.0 * r2 * u,
            )
        },
    )
}

/// `h = 4R²(y³u⁰ − y⁰u³ + y¹u² − y²u¹)`.
pub(crate) fn fiber_charge_natural() -> Observable {
    fn parts(z: &[f64]) -> (Vector4<f64>, Vector4<f64>, f64, Vector4<f64>, Vector4<f64>) {
        let (y, u) = (v4(z, 0), v4(z, 4));
        let gen = Vector4::new(-y[1], y[0], -y[3], y[2]);
        // ∂w/∂y for w = gen·u
        let dw_dy = Vector4::new(u[1], -u[0], u[3], -u[2]);
        (y, u, gen.dot(&u), gen, dw_dy)
    }
    Observable::new(
        "conformal.h",
        Chart::Natural,
        |z| {
            let (y, _, w, _, _) = parts(z);
            4.0 * y.norm_squared() * w
        },
        |z| {
            let (y, _, w, gen, dw_dy) = parts(z);
            let r2 = y.norm_squared();
            concat4(8.0 * w * y + 4.0 * r2 * dw_dy, 4.0 * r2 * gen)
        },
    )
}

/// Pulls an oscillator-chart observable back to `(y, u)` through
/// `(Y, U) = (y, 2R²u)`.
pub fn to_natural_chart(f: &Observable) -> Observable {
    assert_eq!(f.chart(), Chart::Oscillator);
    let to_osc = |z: &[f64]| -> Vec<f64> {
        let (y, u) = (v4(z, 0), v4(z, 4));
        concat4(y, 2.0 * y.norm_squared() * u)
    };
    let (fe, fg) = (f.clone(), f.clone());
    Observable::new(
        f.name().replace("oscillator.", "conformal."),
        Chart::Natural,
        move |z| fe.eval(&to_osc(z)),
        move |z| {
            let (y, u) = (v4(z, 0), v4(z, 4));
            let g = fg.grad(&to_osc(z));
            let (gy, gu) = (v4(&g, 0), v4(&g, 4));
            concat4(gy + 4.0 * u.dot(&gu) * y, 2.0 * y.norm_squared() * gu)
        },
    )
}

// --- Oscillator chart (Y, U) ------------------------------------------------

/// `𝓔 = (|U|²/2 − k)/|Y|²`.
pub(crate) fn oscillator_energy(k: f64) -> Observable {
    Observable::new(
        "oscillator.energy",
        Chart::Oscillator,
        move |z| (0.5 * v4(z, 4).norm_squared() - k) / v4(z, 0).norm_squared(),
        move |z| {
            let (y, u) = (v4(z, 0), v4(z, 4));
            let r2 = y.norm_squared();
            let e = (0.5 * u.norm_squared() - k) / r2;
            concat4(-2.0 * e / r2 * y, u / r2)
        },
    )
}

/// `½|U|² − E|Y|²`, conserved by the completed field at energy `E` (equal to
/// `k` on `Σ_E`).
pub fn oscillator_invariant(energy: f64) -> Observable {
    Observable::new(
        format!("oscillator.invariant(E={energy})"),
        Chart::Oscillator,
        move |z| 0.5 * v4(z, 4).norm_squared() - energy * v4(z, 0).norm_squared(),
        move |z| concat4(-2.0 * energy * v4(z, 0), v4(z, 4)),
    )
}

/// `f = Yᵀ W U`.
pub fn bilinear(name: impl Into<String>, w: Matrix4<f64>) -> Observable {
    Observable::new(
        name,
        Chart::Oscillator,
        move |z| v4(z, 0).dot(&(w * v4(z, 4))),
        move |z| concat4(w * v4(z, 4), w.transpose() * v4(z, 0)),
    )
}

/// Adds `c (Y^a U^b − Y^b U^a)` to the bilinear matrix.
fn antisym_term(w: &mut Matrix4<f64>, a: usize, b: usize, c: f64) {
    w[(slot(a), slot(b))] += c;
    w[(slot(b), slot(a))] -= c;
}

/// `h = 2(Y³U⁰ − Y⁰U³ + Y¹U² − Y²U¹) = 4(L₃₀ + L₁₂)`.
pub(crate) fn fiber_charge_oscillator() -> Observable {
    let mut w = Matrix4::zeros();
    antisym_term(&mut w, 3, 0, 2.0);
    antisym_term(&mut w, 1, 2, 2.0);
    bilinear("oscillator.h", w)
}

/// `L_ab = ½(Y_a U_b − U_a Y_b)`.
pub fn oscillator_l(a: usize, b: usize) -> Observable {
    let mut w = Matrix4::zeros();
    antisym_term(&mut w, a, b, 0.5);
    bilinear(format!("oscillator.L[{a},{b}]"), w)
}

/// The `su(2)` commuting with `h`.
pub(crate) fn commutant_j(i: usize) -> Observable {
    let mut w = Matrix4::zeros();
    match i {
        1 => {
            antisym_term(&mut w, 1, 0, 0.5);
            antisym_term(&mut w, 3, 2, 0.5);
        }
        2 => {
            antisym_term(&mut w, 1, 3, 0.5);
            antisym_term(&mut w, 2, 0, 0.5);
        }
        3 => {
            antisym_term(&mut w, 1, 2, 0.5);
            antisym_term(&mut w, 0, 3, 0.5);
        }
        _ => unreachable!(),
    }
    bilinear(format!("oscillator.J{i}"), w)
}

/// `F = ¼ (Uᵀ S U − 2𝓔 Yᵀ S Y)` for symmetric `S`, with `𝓔` the chart energy.
pub fn energy_quadratic(name: impl Into<String>, s: Matrix4<f64>, k: f64) -> Observable {
    let energy = oscillator_energy(k);
    let energy_g = energy.clone();
    Observable::new(
        name,
        Chart::Oscillator,
        move |z| {
            let (y, u) = (v4(z, 0), v4(z, 4));
            0.25 * (u.dot(&(s * u)) - 2.0 * energy.eval(z) * y.dot(&(s * y)))
        },
        move |z| {
            let (y, u) = (v4(z, 0), v4(z, 4));
            let e = energy_g.eval(z);
            let de = energy_g.grad(z);
            let ysy = y.dot(&(s * y));
            let gy = 0.25 * (-4.0 * e * (s * y) - 2.0 * ysy * v4(&de, 0));
            let gu = 0.25 * (2.0 * (s * u) - 2.0 * ysy * v4(&de, 4));
            concat4(gy, gu)
        },
    )
}

fn sym_term(s: &mut Matrix4<f64>, a: usize, b: usize, c: f64) {
    s[(slot(a), slot(b))] += c;
    s[(slot(b), slot(a))] += c;
}

/// `Q_ab = ½(U_a U_b − 2𝓔 Y_a Y_b)`.
pub fn oscillator_q(a: usize, b: usize, k: f64) -> Observable {
    let mut s = Matrix4::zeros();
    sym_term(&mut s, a, b, 1.0);
    energy_quadratic(format!("oscillator.Q[{a},{b}]"), s, k)
}

/// The KS quadratic form of component `i`: `Q_i = ¼(KS_i(U) − 2𝓔 KS_i(Y))`.
pub fn ks_form_matrix(i: usize) -> Matrix4<f64> {
    let mut s = Matrix4::zeros();
    match i {
        1 => {
            sym_term(&mut s, 1, 3, 1.0);
            sym_term(&mut s, 2, 0, 1.0);
        }
        2 => {
            sym_term(&mut s, 2, 3, 1.0);
            sym_term(&mut s, 1, 0, -1.0);
        }
        3 => {
            s = Matrix4::from_diagonal(&Vector4::new(1.0, 1.0, -1.0, -1.0));
        }
        _ => unreachable!(),
    }
    s
}

pub(crate) fn commutant_q(i: usize, k: f64) -> Observable {
    energy_quadratic(format!("oscillator.Q{i}"), ks_form_matrix(i), k)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnergySign {
    Negative,
    Positive,
}

/// `Q_i / √(−2𝓔)` (bound region) or `Q_i / √(2𝓔)` (scattering region).
pub fn rescaled_runge_lenz(i: usize, k: f64, sign: EnergySign) -> Observable {
    let q = commutant_q(i, k);
    let e = oscillator_energy(k);
    let sigma = match sign {
        EnergySign::Negative => -2.0,
        EnergySign::Positive => 2.0,
    };
    let (q2, e2) = (q.clone(), e.clone());
    let label = match sign {
        EnergySign::Negative => "sqrt(-2E)",
        EnergySign::Positive => "sqrt(2E)",
    };
    Observable::new(
        format!("oscillator.Q{i}/{label}"),
        Chart::Oscillator,
        move |z| q.eval(z) / (sigma * e.eval(z)).sqrt(),
        move |z| {
            let s = (sigma * e2.eval(z)).sqrt();
            let qv = q2.eval(z);
            let ds_scale = sigma / (2.0 * s);
            q2.grad(z)
                .iter()
                .zip(e2.grad(z))
                .map(|(dq, de)| dq / s - qv * ds_scale * de / (s * s))
                .collect()
        },
    )
}

// --- demo systems -----------------------------------------------------------

/// Conserved quantity of the radial field: `r²(2E − ṙ²)` (the squared angular
/// momentum) at fixed energy, `½ṙ² + ℓ²/(2r²)` at fixed `ℓ`.
pub fn radial_invariant(variant: RadialVariant) -> Observable {
    match variant {
        RadialVariant::FixedEnergy(e) => Observable::new(
            "radial.l2",
            Chart::Radial,
            move |z| z[0] * z[0] * (2.0 * e - z[1] * z[1]),
            move |z| {
                vec![
                    2.0 * z[0] * (2.0 * e - z[1] * z[1]),
                    -2.0 * z[0] * z[0] * z[1],
                ]
            },
        ),
        RadialVariant::FixedAngularMomentum(l) => Observable::new(
            "radial.energy",
            Chart::Radial,
            move |z| 0.5 * z[1] * z[1] + l * l / (2.0 * z[0] * z[0]),
            move |z| vec![-l * l / (z[0] * z[0] * z[0]), z[1]],
        ),
    }
}

/// `½(q̇₁² + q̇₂²) + ℓ²/(q₂ − q₁)²`.
pub fn calogero_energy(l: f64) -> Observable {
    Observable::new(
        "calogero.energy",
        Chart::Calogero,
        move |z| {
            let d = z[1] - z[0];
            0.5 * (z[2] * z[2] + z[3] * z[3]) + l * l / (d * d)
        },
        move |z| {
            let d = z[1] - z[0];
            let dd = 2.0 * l * l / (d * d * d);
            vec![dd, -dd, z[2], z[3]]
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circular_orbit_has_no_eccentricity() {
        let obs = ObservableSet::default();
        let z = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0];
        let l: Vec<f64> = (1..=3)
            .map(|i| obs.get(&format!("kepler.L{i}")).unwrap().eval(&z))
            .collect();
        let a: Vec<f64> = (1..=3)
            .map(|i| obs.get(&format!("kepler.A{i}")).unwrap().eval(&z))
            .collect();
        assert_eq!(l, vec![0.0, 0.0, 1.0]);
        assert_eq!(a, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn fiber_charge_vanishes_on_example() {
        let obs = ObservableSet::default();
        let z = [1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0];
        assert_eq!(obs.get("conformal.h").unwrap().eval(&z), 0.0);
    }

    #[test]
    fn names_resolve() {
        let obs = ObservableSet::default();
        let names = ObservableSet::names();
        assert_eq!(names.len(), 7 + 16 + 6 + 10);
        for n in &names {
            assert_eq!(obs.get(n).unwrap().name(), n);
        }
        for bad in [
            "kepler.L4",
            "oscillator.L[1,1]",
            "foo",
            "kepler.B1",
            "oscillator.Q[1,7]",
        ] {
            assert!(
                matches!(obs.get(bad), Err(Error::UnknownObservable(_))),
                "{bad}"
            );
        }
    }

    #[test]
    fn h_matches_l_combination() {
        let obs = ObservableSet::default();
        let z = [0.3, -1.1, 0.4, 0.9, -0.2, 0.5, 1.3, -0.7];
        let h = obs.get("oscillator.h").unwrap().eval(&z);
        let l30 = oscillator_l(3, 0).eval(&z);
        let l12 = oscillator_l(1, 2).eval(&z);
        assert!((h - 4.0 * (l30 + l12)).abs() < 1e-15);
    }

    #[test]
    fn transported_h_matches_direct_formula() {
        let mut w = Matrix4::zeros();
        antisym_term(&mut w, 3, 0, 2.0);
        antisym_term(&mut w, 1, 2, 2.0);
        let transported = to_natural_chart(&bilinear("oscillator.h", w));
        let direct = fiber_charge_natural();
        let z = [0.3, -1.1, 0.4, 0.9, -0.2, 0.5, 1.3, -0.7];
        assert!((transported.eval(&z) - direct.eval(&z)).abs() < 1e-14);
        for (a, b) in transported.grad(&z).iter().zip(direct.grad(&z)) {
            assert!((a - b).abs() < 1e-13);
        }
    }
}
