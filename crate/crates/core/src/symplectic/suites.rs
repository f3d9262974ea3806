//! Named bracket-table suites.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use super::{
    commutant_basis, quadratic_from_matrix, u4_basis, verify_structure_constants, ExpectedBracket,
    PairReport, SamplePlan, SymplecticStructure, VerifyReport,
};
use crate::error::Result;
use crate::sampling::{self, SampleRng};
use crate::systems::{rescaled_runge_lenz, EnergySign, Observable, ObservableSet};

/// Frequency used for the `u(4)` homomorphism table.
pub const U4_KAPPA: f64 = 0.7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    /// `{L, L}`, `{L, A}`, `{A, A}` and their brackets with the energy.
    KeplerAlgebra,
    /// `{F_C, F_D} = F_[C,D]` and the `J`/`Q` table with energy-dependent
    /// right-hand side.
    OscillatorU4,
    /// Integer commutator relations of the commutant basis.
    CommutantSu2xSu2,
    /// `{J, h} = {Q, h} = {𝓔, h} = 0` in both charts.
    ReductionCriterion,
    /// `{J, Q/√(∓2𝓔)}` as `so(4)` below zero energy and `o(3,1)` above.
    RescaledSo4,
}

impl Suite {
    pub const ALL: [Suite; 5] = [
        Suite::KeplerAlgebra,
        Suite::OscillatorU4,
        Suite::CommutantSu2xSu2,
        Suite::ReductionCriterion,
        Suite::RescaledSo4,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::KeplerAlgebra => "kepler-algebra",
            Suite::OscillatorU4 => "oscillator-u4",
            Suite::CommutantSu2xSu2 => "commutant-su2xsu2",
            Suite::ReductionCriterion => "reduction-criterion",
            Suite::RescaledSo4 => "rescaled-so4",
        }
    }

    pub fn tolerance(self) -> f64 {
        match self {
            Suite::KeplerAlgebra | Suite::OscillatorU4 => 1e-9,
            Suite::CommutantSu2xSu2 => 0.0,
            Suite::ReductionCriterion => 1e-10,
            Suite::RescaledSo4 => 1e-8,
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Suite::ALL.iter().map(|s| s.name()).collect();
                format!("unknown suite `{s}` (expected one of {})", names.join(", "))
            })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub samples: usize,
    pub seed: u64,
    pub tables: Vec<VerifyReport>,
    pub pass: bool,
}

impl SuiteReport {
    pub fn max_residual(&self) -> f64 {
        self.tables
            .iter()
            .map(|t| t.max_residual())
            .fold(0.0, f64::max)
    }
}

/// `(k, ε_ijk)` for distinct `i, j ∈ {1, 2, 3}`.
fn epsilon(i: usize, j: usize) -> (usize, f64) {
    let k = 6 - i - j;
    let sign = if (i, j, k) == (1, 2, 3) || (i, j, k) == (2, 3, 1) || (i, j, k) == (3, 1, 2) {
        1.0
    } else {
        -1.0
    };
    (k, sign)
}

/// `{fᵢ, gⱼ} = ε_ijk factor·tₖ`; pairs with `i < j` only when `f` and `g`
/// are the same triple.
fn epsilon_table(
    f: &[Observable; 3],
    g: &[Observable; 3],
    targets: &[Observable; 3],
    factor: Option<&Observable>,
) -> Vec<ExpectedBracket> {
    let same = f[0].name() == g[0].name();
    let chart = f[0].chart();
    let mut out = Vec::new();
    for i in 1..=3 {
        for j in 1..=3 {
            if same && j <= i {
                continue;
            }
            let rhs = if i == j {
                Observable::constant(chart, 0.0)
            } else {
                let (k, sign) = epsilon(i, j);
                let t = targets[k - 1].scaled(sign);
                match factor {
                    Some(c) => t.product(c),
                    None => t,
                }
            };
            out.push(ExpectedBracket::new(f[i - 1].name(), g[j - 1].name(), rhs));
        }
    }
    out
}

fn commuting(fs: &[Observable], g: &Observable) -> Vec<ExpectedBracket> {
    fs.iter()
        .map(|f| ExpectedBracket::new(f.name(), g.name(), Observable::constant(g.chart(), 0.0)))
        .collect()
}

fn triple(set: &ObservableSet, prefix: &str) -> Result<[Observable; 3]> {
    Ok([
        set.get(&format!("{prefix}1"))?,
        set.get(&format!("{prefix}2"))?,
        set.get(&format!("{prefix}3"))?,
    ])
}

type Sampler = dyn Fn(&mut SampleRng) -> Vec<f64>;

fn kepler_sampler(rng: &mut SampleRng) -> Vec<f64> {
    sampling::state3(rng).to_array().to_vec()
}

fn oscillator_sampler(rng: &mut SampleRng) -> Vec<f64> {
    sampling::oscillator_state(rng).to_vec()
}

fn natural_sampler(rng: &mut SampleRng) -> Vec<f64> {
    sampling::state4(rng).to_array().to_vec()
}

/// Runs one suite at force constant `k`.
pub fn run_suite(suite: Suite, samples: usize, seed: u64, k: f64) -> Result<SuiteReport> {
    let set = ObservableSet::new(k);
    let plan = SamplePlan {
        samples,
        seed,
        tolerance: suite.tolerance(),
    };
    let tables = match suite {
        Suite::KeplerAlgebra => vec![kepler_algebra(&set, plan)?],
        Suite::OscillatorU4 => vec![u4_homomorphism(plan)?, jq_table(&set, plan)?],
        Suite::CommutantSu2xSu2 => vec![commutant_relations(seed)],
        Suite::ReductionCriterion => reduction_criterion(&set, plan)?,
        Suite::RescaledSo4 => vec![
            rescaled(&set, plan, EnergySign::Negative)?,
            rescaled(&set, plan, EnergySign::Positive)?,
        ],
    };
    let samples = if suite == Suite::CommutantSu2xSu2 {
        1
    } else {
        samples
    };
    Ok(SuiteReport {
        suite,
        samples,
        seed,
        pass: tables.iter().all(|t| t.pass),
        tables,
    })
}

fn kepler_algebra(set: &ObservableSet, plan: SamplePlan) -> Result<VerifyReport> {
    let l = triple(set, "kepler.L")?;
    let a = triple(set, "kepler.A")?;
    let energy = set.get("kepler.energy")?;
    let minus_2e = energy.scaled(-2.0);
    let mut expected = epsilon_table(&l, &l, &l, None);
    expected.extend(epsilon_table(&l, &a, &a, None));
    expected.extend(epsilon_table(&a, &a, &l, Some(&minus_2e)));
    expected.extend(commuting(&l, &energy));
    expected.extend(commuting(&a, &energy));
    let mut obs: Vec<Observable> = l.to_vec();
    obs.extend(a);
    obs.push(energy);
    verify_structure_constants(
        "kepler-algebra",
        &SymplecticStructure::kepler_canonical(),
        &obs,
        &expected,
        &kepler_sampler,
        plan,
    )
}

fn u4_homomorphism(plan: SamplePlan) -> Result<VerifyReport> {
    let basis = u4_basis();
    let mut obs = Vec::new();
    for (name, c) in &basis {
        obs.push(quadratic_from_matrix(format!("F[{name}]"), c, U4_KAPPA)?);
    }
    let mut expected = Vec::new();
    for (i, (ni, ci)) in basis.iter().enumerate() {
        for (nj, cj) in &basis[i + 1..] {
            let comm = ci * cj - cj * ci;
            let rhs = quadratic_from_matrix(format!("F[[{ni},{nj}]]"), &comm, U4_KAPPA)?;
            expected.push(ExpectedBracket::new(
                format!("F[{ni}]"),
                format!("F[{nj}]"),
                rhs,
            ));
        }
    }
    verify_structure_constants(
        format!("u(4) homomorphism at kappa = {U4_KAPPA}"),
        &SymplecticStructure::oscillator_canonical(),
        &obs,
        &expected,
        &oscillator_sampler,
        plan,
    )
}

fn jq_table(set: &ObservableSet, plan: SamplePlan) -> Result<VerifyReport> {
    let j = triple(set, "oscillator.J")?;
    let q = triple(set, "oscillator.Q")?;
    let energy = set.get("oscillator.energy")?;
    let minus_2e = energy.scaled(-2.0);
    let mut expected = epsilon_table(&j, &j, &j, None);
    expected.extend(epsilon_table(&j, &q, &q, None));
    expected.extend(epsilon_table(&q, &q, &j, Some(&minus_2e)));
    expected.extend(commuting(&j, &energy));
    expected.extend(commuting(&q, &energy));
    let mut obs: Vec<Observable> = j.to_vec();
    obs.extend(q);
    obs.push(energy);
    verify_structure_constants(
        "J/Q table",
        &SymplecticStructure::oscillator_canonical(),
        &obs,
        &expected,
        &oscillator_sampler,
        plan,
    )
}

fn reduction_criterion(set: &ObservableSet, plan: SamplePlan) -> Result<Vec<VerifyReport>> {
    let mut out = Vec::new();
    for (chart, structure, sampler) in [
        (
            "oscillator",
            SymplecticStructure::oscillator_canonical(),
            &oscillator_sampler as &dyn Fn(&mut SampleRng) -> Vec<f64>,
        ),
        (
            "conformal",
            SymplecticStructure::conformal_lagrangian(),
            &natural_sampler as &dyn Fn(&mut SampleRng) -> Vec<f64>,
        ),
    ] {
        let mut obs: Vec<Observable> = triple(set, &format!("{chart}.J"))?.to_vec();
        obs.extend(triple(set, &format!("{chart}.Q"))?);
        obs.push(set.get(&format!("{chart}.energy"))?);
        let h = set.get(&format!("{chart}.h"))?;
        let expected = commuting(&obs, &h);
        obs.push(h);
        out.push(verify_structure_constants(
            format!("commutation with h ({chart} chart)"),
            &structure,
            &obs,
            &expected,
            sampler,
            plan,
        )?);
    }
    Ok(out)
}

fn rescaled(set: &ObservableSet, plan: SamplePlan, sign: EnergySign) -> Result<VerifyReport> {
    let k = set.k();
    let j = triple(set, "oscillator.J")?;
    let kk = [1, 2, 3].map(|i| rescaled_runge_lenz(i, k, sign));
    let kk_sign = match sign {
        EnergySign::Negative => 1.0,
        EnergySign::Positive => -1.0,
    };
    let signed_j = j.clone().map(|o| o.scaled(kk_sign));
    let mut expected = epsilon_table(&j, &j, &j, None);
    expected.extend(epsilon_table(&j, &kk, &kk, None));
    expected.extend(epsilon_table(&kk, &kk, &signed_j, None));
    let mut obs: Vec<Observable> = j.to_vec();
    obs.extend(kk);
    let (title, sampler): (&str, Box<Sampler>) = match sign {
        EnergySign::Negative => (
            "so(4) at E < 0",
            Box::new(move |r: &mut SampleRng| {
                sampling::oscillator_state_with_energy(r, EnergySign::Negative, k).to_vec()
            }),
        ),
        EnergySign::Positive => (
            "o(3,1) at E > 0",
            Box::new(move |r: &mut SampleRng| {
                sampling::oscillator_state_with_energy(r, EnergySign::Positive, k).to_vec()
            }),
        ),
    };
    verify_structure_constants(
        title,
        &SymplecticStructure::oscillator_canonical(),
        &obs,
        &expected,
        &*sampler,
        plan,
    )
}

/// Exact integer checks; residuals are the largest entry of the defect
/// matrix.
fn commutant_relations(seed: u64) -> VerifyReport {
    let c = commutant_basis();
    let mut pairs = Vec::new();
    let mut push = |pair: String, defect: i64| {
        pairs.push(PairReport {
            pair,
            samples: 1,
            max_residual: defect as f64,
            tolerance: 0.0,
            pass: defect == 0,
        });
    };
    // With P = 2X, [Xᵢ,Xⱼ] = ε Xₖ reads [Pᵢ,Pⱼ] = 2ε Pₖ; with P = 4X it reads
    // [Pᵢ,Pⱼ] = 4ε Pₖ.
    let expect =
        |i: usize, j: usize, target: &dyn Fn(usize) -> super::GaussianMatrix, scale: i64| {
            if i == j {
                super::GaussianMatrix::zero()
            } else {
                let (k, s) = epsilon(i, j);
                target(k).scale(scale * s as i64)
            }
        };
    let m = |i: usize| c.m2[i - 1];
    let d = |i: usize| c.d2[i - 1];
    let a = |i: usize| c.a4(i);
    let b = |i: usize| c.b4(i);
    for i in 1..=3 {
        for j in 1..=3 {
            push(
                format!("[M{i},M{j}]"),
                (m(i).commutator(&m(j)) - expect(i, j, &m, 2)).max_abs(),
            );
            push(
                format!("[D{i},D{j}]"),
                (d(i).commutator(&d(j)) - expect(i, j, &m, 2)).max_abs(),
            );
            push(
                format!("[M{i},D{j}]"),
                (m(i).commutator(&d(j)) - expect(i, j, &d, 2)).max_abs(),
            );
            push(
                format!("[A{i},A{j}]"),
                (a(i).commutator(&a(j)) - expect(i, j, &a, 4)).max_abs(),
            );
            push(
                format!("[B{i},B{j}]"),
                (b(i).commutator(&b(j)) - expect(i, j, &b, 4)).max_abs(),
            );
            push(format!("[A{i},B{j}]"), a(i).commutator(&b(j)).max_abs());
        }
        push(format!("[N3,M{i}]"), c.n3.commutator(&m(i)).max_abs());
        push(format!("[N3,D{i}]"), c.n3.commutator(&d(i)).max_abs());
    }
    VerifyReport {
        table: "commutant of N3 (integer arithmetic)".into(),
        structure: "matrix commutator".into(),
        seed,
        pass: pairs.iter().all(|p| p.pass),
        pairs,
    }
}
