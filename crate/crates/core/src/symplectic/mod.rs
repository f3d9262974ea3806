//! Symplectic structures as matrix-valued fields, the Poisson bracket they
//! induce, and pointwise verification of bracket tables.
//!
//! A 2-form `ω = ½ Ω_ab dzᵃ ∧ dzᵇ` is represented by its antisymmetric
//! coefficient matrix `Ω`, so `dx ∧ dv` has `Ω[x][v] = 1`. The Hamiltonian
//! vector field of `f` solves `i_{X_f} ω = df`, i.e. `Ωᵀ X_f = ∇f`, and
//!
//! ```text
//! {f, g} = ω(X_f, X_g) = ∇fᵀ Ω⁻ᵀ ∇g.
//! ```
//!
//! For `dx ∧ dv` this is `∂ₓf ∂ᵥg − ∂ᵥf ∂ₓg`. Every table in this crate uses
//! this one sign.

mod commutant;
mod suites;

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::sampling::{self, SampleRng};
use crate::systems::{Chart, DynamicalSystem, Observable};

pub use commutant::*;
pub use suites::*;

/// Structures whose coefficient matrix has a larger condition number are
/// treated as degenerate.
pub const CONDITION_LIMIT: f64 = 1e12;

type MatrixFn = dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync;

#[derive(Clone)]
enum Form {
    Constant {
        omega: DMatrix<f64>,
        bivector: DMatrix<f64>,
    },
    Field(Arc<MatrixFn>),
}

/// A symplectic form on one chart.
#[derive(Clone)]
pub struct SymplecticStructure {
    name: String,
    chart: Chart,
    form: Form,
}

impl fmt::Debug for SymplecticStructure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SymplecticStructure")
            .field("name", &self.name)
            .field("chart", &self.chart)
            .finish_non_exhaustive()
    }
}

fn canonical_matrix(n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        m[(i, n + i)] = 1.0;
        m[(n + i, i)] = -1.0;
    }
    m
}

/// `Ω⁻ᵀ`, rejecting matrices with condition number above [`CONDITION_LIMIT`].
fn invert_transpose(name: &str, omega: &DMatrix<f64>, z: &[f64]) -> Result<DMatrix<f64>> {
    let sv = omega.clone().singular_values();
    let (max, min) = (sv.max(), sv.min());
    let condition = if min > 0.0 { max / min } else { f64::INFINITY };
    let degenerate = || Error::Degenerate {
        structure: name.to_string(),
        condition,
        state: z.to_vec(),
    };
    if !(condition <= CONDITION_LIMIT) {
        return Err(degenerate());
    }
    let inv = omega.clone().lu().try_inverse().ok_or_else(degenerate)?;
    Ok(inv.transpose())
}

impl SymplecticStructure {
    /// A constant structure; the bivector is computed once.
    pub fn constant(name: impl Into<String>, chart: Chart, omega: DMatrix<f64>) -> Result<Self> {
        let name = name.into();
        assert_eq!(omega.nrows(), chart.dim());
        let bivector = invert_transpose(&name, &omega, &[])?;
        Ok(Self {
            name,
            chart,
            form: Form::Constant { omega, bivector },
        })
    }

    /// A structure whose matrix depends on the point; inverted on demand.
    pub fn state_dependent(
        name: impl Into<String>,
        chart: Chart,
        matrix: impl Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            chart,
            form: Form::Field(Arc::new(matrix)),
        }
    }

    /// `ω_K = dxⁱ ∧ dvⁱ` on `T R³`.
    pub fn kepler_canonical() -> Self {
        Self::constant("dx^dv", Chart::Kepler, canonical_matrix(3)).expect("canonical form")
    }

    /// `ω_∼ = dY^α ∧ dU^α` on the oscillator chart.
    pub fn oscillator_canonical() -> Self {
        Self::constant("dY^dU", Chart::Oscillator, canonical_matrix(4)).expect("canonical form")
    }

    /// The Cartan 2-form of the conformal Kepler Lagrangian in `(y, u)`:
    /// `ω_𝓛 = −8 y^β u^α dy^β ∧ dy^α − 4R² du^α ∧ dy^α`.
    pub fn conformal_lagrangian() -> Self {
        Self::state_dependent("omega_L", Chart::Natural, |z| {
            let (y, u) = (&z[..4], &z[4..8]);
            let r2: f64 = y.iter().map(|a| a * a).sum();
            let mut m = DMatrix::zeros(8, 8);
            for b in 0..4 {
                for a in 0..4 {
                    m[(b, a)] = -8.0 * (y[b] * u[a] - y[a] * u[b]);
                }
                m[(b, 4 + b)] = 4.0 * r2;
                m[(4 + b, b)] = -4.0 * r2;
            }
            m
        })
    }

    /// `dY ∧ dU` pulled back to `(y, u)` through `Y = y`, `U = 2R²u`.
    pub fn oscillator_canonical_natural() -> Self {
        let omega = canonical_matrix(4);
        Self::state_dependent("dY^dU in (y,u)", Chart::Natural, move |z| {
            let (y, u) = (&z[..4], &z[4..8]);
            let r2: f64 = y.iter().map(|a| a * a).sum();
            let mut jac = DMatrix::zeros(8, 8);
            for a in 0..4 {
                jac[(a, a)] = 1.0;
                jac[(4 + a, 4 + a)] = 2.0 * r2;
                for b in 0..4 {
                    jac[(4 + a, b)] = 4.0 * u[a] * y[b];
                }
            }
            jac.transpose() * &omega * jac
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn chart(&self) -> Chart {
        self.chart
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    pub fn matrix_at(&self, z: &[f64]) -> DMatrix<f64> {
        match &self.form {
            Form::Constant { omega, .. } => omega.clone(),
            Form::Field(f) => f(z),
        }
    }

    /// `max |Ω + Ωᵀ|`.
    pub fn antisymmetry_defect(&self, z: &[f64]) -> f64 {
        let m = self.matrix_at(z);
        (&m + m.transpose()).amax()
    }

    pub fn determinant_at(&self, z: &[f64]) -> f64 {
        self.matrix_at(z).determinant()
    }

    /// The Poisson bivector `Ω⁻ᵀ` at `z`.
    pub fn bivector_at(&self, z: &[f64]) -> Result<DMatrix<f64>> {
        match &self.form {
            Form::Constant { bivector, .. } => Ok(bivector.clone()),
            Form::Field(f) => invert_transpose(&self.name, &f(z), z),
        }
    }

    fn check_chart(&self, f: &Observable) -> Result<()> {
        if f.chart() != self.chart {
            return Err(Error::ChartMismatch {
                name: f.name().to_string(),
                expected: self.chart.to_string(),
                found: f.chart().to_string(),
            });
        }
        Ok(())
    }

    /// `X_f` with `i_{X_f} ω = df`.
    pub fn hamiltonian_vector_field(&self, f: &Observable, z: &[f64]) -> Result<Vec<f64>> {
        self.check_chart(f)?;
        let b = self.bivector_at(z)?;
        let grad = nalgebra::DVector::from_vec(f.grad(z));
        Ok((b * grad).iter().copied().collect())
    }

    /// `max |Ωᵀ Γ − ∇𝓔|`: how far `Γ` is from being the Hamiltonian field of
    /// `energy`.
    pub fn contraction_residual(
        &self,
        sys: &DynamicalSystem,
        energy: &Observable,
        z: &[f64],
    ) -> Result<f64> {
        self.check_chart(energy)?;
        let n = self.dim();
        let gamma = sys.field(z)?;
        let m = self.matrix_at(z);
        let lhs = m.transpose() * nalgebra::DVector::from_column_slice(&gamma[..n]);
        let grad = energy.grad(z);
        Ok(lhs
            .iter()
            .zip(&grad)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }
}

/// `{f, g}` at `z`.
pub fn poisson_bracket(
    structure: &SymplecticStructure,
    f: &Observable,
    g: &Observable,
    z: &[f64],
) -> Result<f64> {
    structure.check_chart(f)?;
    structure.check_chart(g)?;
    let b = structure.bivector_at(z)?;
    let (df, dg) = (f.grad(z), g.grad(z));
    let n = structure.dim();
    let mut acc = 0.0;
    for i in 0..n {
        if df[i] == 0.0 {
            continue;
        }
        let row: f64 = (0..n).map(|j| b[(i, j)] * dg[j]).sum();
        acc += df[i] * row;
    }
    Ok(acc)
}

/// Brackets of every pair of `observables` at each sample state.
#[derive(Debug, Clone)]
pub struct BracketTable {
    pub names: Vec<String>,
    /// `values[i][j][s]` is `{fᵢ, fⱼ}` at sample `s`.
    pub values: Vec<Vec<Vec<f64>>>,
}

impl BracketTable {
    pub fn compute(
        structure: &SymplecticStructure,
        observables: &[Observable],
        states: &[Vec<f64>],
    ) -> Result<Self> {
        let n = observables.len();
        let mut values = vec![vec![Vec::with_capacity(states.len()); n]; n];
        for z in states {
            let b = structure.bivector_at(z)?;
            let grads: Vec<nalgebra::DVector<f64>> = observables
                .iter()
                .map(|f| {
                    structure.check_chart(f)?;
                    Ok(nalgebra::DVector::from_vec(f.grad(z)))
                })
                .collect::<Result<_>>()?;
            let xs: Vec<_> = grads.iter().map(|g| &b * g).collect();
            for i in 0..n {
                for j in 0..n {
                    values[i][j].push(grads[i].dot(&xs[j]));
                }
            }
        }
        Ok(Self {
            names: observables.iter().map(|o| o.name().to_string()).collect(),
            values,
        })
    }

    /// `max |{fᵢ,fⱼ} + {fⱼ,fᵢ}|` over pairs and samples, diagonal included.
    pub fn antisymmetry_defect(&self) -> f64 {
        let n = self.names.len();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                for (a, b) in self.values[i][j].iter().zip(&self.values[j][i]) {
                    worst = worst.max((a + b).abs());
                }
            }
        }
        worst
    }
}

/// Expected value of `{f, g}` as an observable on the same chart.
#[derive(Debug, Clone)]
pub struct ExpectedBracket {
    pub f: String,
    pub g: String,
    pub rhs: Observable,
}

impl ExpectedBracket {
    pub fn new(f: impl Into<String>, g: impl Into<String>, rhs: Observable) -> Self {
        Self {
            f: f.into(),
            g: g.into(),
            rhs,
        }
    }
}

/// Outcome for one bracket pair.
#[derive(Debug, Clone, Serialize)]
pub struct PairReport {
    pub pair: String,
    pub samples: usize,
    pub max_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Outcome for one table of brackets under one structure.
#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub table: String,
    pub structure: String,
    pub seed: u64,
    pub pairs: Vec<PairReport>,
    pub pass: bool,
}

impl VerifyReport {
    pub fn max_residual(&self) -> f64 {
        self.pairs
            .iter()
            .map(|p| p.max_residual)
            .fold(0.0, f64::max)
    }
}

/// Sample count, seed and pass threshold of one verification run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SamplePlan {
    pub samples: usize,
    pub seed: u64,
    pub tolerance: f64,
}

/// Evaluates each expected bracket at `plan.samples` states drawn by `sampler`
/// and records the largest residual `|{f,g} − rhs| / max(1, |rhs|)`.
///
/// A degenerate structure at a sample is recorded as an infinite residual.
pub fn verify_structure_constants(
    table: impl Into<String>,
    structure: &SymplecticStructure,
    observables: &[Observable],
    expected: &[ExpectedBracket],
    sampler: &dyn Fn(&mut SampleRng) -> Vec<f64>,
    plan: SamplePlan,
) -> Result<VerifyReport> {
    let SamplePlan {
        samples,
        seed,
        tolerance,
    } = plan;
    let find = |name: &str| {
        observables
            .iter()
            .find(|o| o.name() == name)
            .ok_or_else(|| Error::UnknownObservable(name.to_string()))
    };
    let resolved: Vec<(&Observable, &Observable, &Observable)> = expected
        .iter()
        .map(|e| Ok((find(&e.f)?, find(&e.g)?, &e.rhs)))
        .collect::<Result<_>>()?;

    let mut rng = sampling::rng(seed);
    let states: Vec<Vec<f64>> = (0..samples).map(|_| sampler(&mut rng)).collect();
    let mut worst = vec![0.0f64; expected.len()];
    for z in &states {
        let bivector = structure.bivector_at(z);
        for (k, (f, g, rhs)) in resolved.iter().enumerate() {
            let residual = match &bivector {
                Ok(b) => {
                    structure.check_chart(f)?;
                    structure.check_chart(g)?;
                    let df = nalgebra::DVector::from_vec(f.grad(z));
                    let dg = nalgebra::DVector::from_vec(g.grad(z));
                    let value = df.dot(&(b * dg));
                    let want = rhs.eval(z);
                    (value - want).abs() / want.abs().max(1.0)
                }
                Err(_) => f64::INFINITY,
            };
            worst[k] = if residual.is_nan() {
                f64::INFINITY
            } else {
                worst[k].max(residual)
            };
        }
    }
    let pairs: Vec<PairReport> = expected
        .iter()
        .zip(worst)
        .map(|(e, r)| PairReport {
            pair: format!("{{{},{}}}", e.f, e.g),
            samples,
            max_residual: r,
            tolerance,
            pass: r < tolerance,
        })
        .collect();
    Ok(VerifyReport {
        table: table.into(),
        structure: structure.name().to_string(),
        seed,
        pass: pairs.iter().all(|p| p.pass),
        pairs,
    })
}
