//! The `u(4)` quadratic algebra on the oscillator chart and the commutant of
//! the fiber generator `N₃`.
//!
//! With `z = U + iκY`, an antihermitian `C = A + iB` (`A` real antisymmetric,
//! `B` real symmetric) defines the real quadratic function
//!
//! ```text
//! F_C = (1/2κ) Σ B_αβ (U_α U_β + κ² Y_α Y_β) + Σ A_αβ U_α Y_β,
//! ```
//!
//! and `C ↦ F_C` is a Lie algebra homomorphism: `{F_C, F_D} = F_[C,D]` under
//! `dY ∧ dU`.

use std::ops::{Add, Mul, Sub};

use nalgebra::{Matrix4, Vector4};
use num_complex::{Complex, Complex64};

use crate::error::{Error, Result};
use crate::systems::{Chart, Observable};

/// A 4×4 matrix of Gaussian integers, for exact commutator checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GaussianMatrix(pub [[Complex<i64>; 4]; 4]);

impl GaussianMatrix {
    pub fn zero() -> Self {
        Self([[Complex::new(0, 0); 4]; 4])
    }

    pub fn real(rows: [[i64; 4]; 4]) -> Self {
        Self(rows.map(|r| r.map(|a| Complex::new(a, 0))))
    }

    pub fn imaginary(rows: [[i64; 4]; 4]) -> Self {
        Self(rows.map(|r| r.map(|a| Complex::new(0, a))))
    }

    pub fn scale(&self, c: i64) -> Self {
        Self(self.0.map(|r| r.map(|a| a * c)))
    }

    pub fn commutator(&self, other: &Self) -> Self {
        *self * *other - *other * *self
    }

    /// Largest `max(|re|, |im|)` over the entries.
    pub fn max_abs(&self) -> i64 {
        self.0
            .iter()
            .flatten()
            .map(|a| a.re.abs().max(a.im.abs()))
            .max()
            .unwrap_or(0)
    }

    /// The floating-point matrix `self / divisor`.
    pub fn to_complex(&self, divisor: f64) -> Matrix4<Complex64> {
        Matrix4::from_fn(|i, j| {
            let a = self.0[i][j];
            Complex64::new(a.re as f64 / divisor, a.im as f64 / divisor)
        })
    }
}

impl Add for GaussianMatrix {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        let mut out = self;
        for i in 0..4 {
            for j in 0..4 {
                out.0[i][j] = self.0[i][j] + o.0[i][j];
            }
        }
        out
    }
}

impl Sub for GaussianMatrix {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        self + o.scale(-1)
    }
}

impl Mul for GaussianMatrix {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let mut out = Self::zero();
        for i in 0..4 {
            for j in 0..4 {
                out.0[i][j] = (0..4).map(|k| self.0[i][k] * o.0[k][j]).sum();
            }
        }
        out
    }
}

/// Basis of the commutant of `N₃` in `u(4)`, stored with integer entries.
///
/// `m2[i]` and `d2[i]` hold `2Mᵢ` and `2Dᵢ`; `n3` holds `N₃` itself. Rows and
/// columns follow the storage order `(1, 2, 3, 0)`.
#[derive(Debug, Clone, Copy)]
pub struct CommutantBasis {
    pub m2: [GaussianMatrix; 3],
    pub d2: [GaussianMatrix; 3],
    pub n3: GaussianMatrix,
}

pub fn commutant_basis() -> CommutantBasis {
    let m2 = [
        GaussianMatrix::real([[0, 0, 0, -1], [0, 0, 1, 0], [0, -1, 0, 0], [1, 0, 0, 0]]),
        GaussianMatrix::real([[0, 0, -1, 0], [0, 0, 0, -1], [1, 0, 0, 0], [0, 1, 0, 0]]),
        GaussianMatrix::real([[0, -1, 0, 0], [1, 0, 0, 0], [0, 0, 0, 1], [0, 0, -1, 0]]),
    ];
    let d2 = [
        GaussianMatrix::imaginary([[0, 0, 1, 0], [0, 0, 0, 1], [1, 0, 0, 0], [0, 1, 0, 0]]),
        GaussianMatrix::imaginary([[0, 0, 0, -1], [0, 0, 1, 0], [0, 1, 0, 0], [-1, 0, 0, 0]]),
        GaussianMatrix::imaginary([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, -1, 0], [0, 0, 0, -1]]),
    ];
    let n3 = GaussianMatrix::real([[0, -2, 0, 0], [2, 0, 0, 0], [0, 0, 0, -2], [0, 0, 2, 0]]);
    CommutantBasis { m2, d2, n3 }
}

impl CommutantBasis {
    pub fn m(&self, i: usize) -> Matrix4<Complex64> {
        self.m2[i - 1].to_complex(2.0)
    }

    pub fn d(&self, i: usize) -> Matrix4<Complex64> {
        self.d2[i - 1].to_complex(2.0)
    }

    pub fn n3(&self) -> Matrix4<Complex64> {
        self.n3.to_complex(1.0)
    }

    /// `4Aᵢ = 2Mᵢ + 2Dᵢ`, with `Aᵢ = (Mᵢ + Dᵢ)/2`.
    pub fn a4(&self, i: usize) -> GaussianMatrix {
        self.m2[i - 1] + self.d2[i - 1]
    }

    /// `4Bᵢ = 2Mᵢ − 2Dᵢ`, with `Bᵢ = (Mᵢ − Dᵢ)/2`.
    pub fn b4(&self, i: usize) -> GaussianMatrix {
        self.m2[i - 1] - self.d2[i - 1]
    }
}

/// `max |C + Cᴴ|`.
pub fn antihermitian_defect(c: &Matrix4<Complex64>) -> f64 {
    (c + c.adjoint())
        .iter()
        .map(|a| a.norm())
        .fold(0.0, f64::max)
}

/// The quadratic observable `F_C` at frequency `κ`.
pub fn quadratic_from_matrix(
    name: impl Into<String>,
    c: &Matrix4<Complex64>,
    kappa: f64,
) -> Result<Observable> {
    let defect = antihermitian_defect(c);
    if defect > 1e-12 {
        return Err(Error::NotAntiHermitian { defect });
    }
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(Error::Config(format!(
            "frequency must be positive, got {kappa}"
        )));
    }
    let a: Matrix4<f64> = c.map(|z| z.re);
    let b: Matrix4<f64> = c.map(|z| z.im);
    let split = |z: &[f64]| {
        (
            Vector4::new(z[0], z[1], z[2], z[3]),
            Vector4::new(z[4], z[5], z[6], z[7]),
        )
    };
    Ok(Observable::new(
        name,
        Chart::Oscillator,
        move |z| {
            let (y, u) = split(z);
            (u.dot(&(b * u)) + kappa * kappa * y.dot(&(b * y))) / (2.0 * kappa) + u.dot(&(a * y))
        },
        move |z| {
            let (y, u) = split(z);
            let gy = kappa * (b * y) + a.transpose() * u;
            let gu = (b * u) / kappa + a * y;
            gy.iter().chain(gu.iter()).copied().collect()
        },
    ))
}

/// The 16 standard generators of `u(4)`: `E_ab − E_ba`, `i(E_ab + E_ba)` for
/// `a < b` and `iE_aa`.
pub fn u4_basis() -> Vec<(String, Matrix4<Complex64>)> {
    let mut out = Vec::with_capacity(16);
    for a in 0..4 {
        for b in a + 1..4 {
            let mut m = Matrix4::zeros();
            m[(a, b)] = Complex64::new(1.0, 0.0);
            m[(b, a)] = Complex64::new(-1.0, 0.0);
            out.push((format!("A{a}{b}"), m));
        }
    }
    for a in 0..4 {
        for b in a..4 {
            let mut m = Matrix4::zeros();
            m[(a, b)] = Complex64::new(0.0, 1.0);
            m[(b, a)] = Complex64::new(0.0, 1.0);
            out.push((format!("S{a}{b}"), m));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::ObservableSet;

    #[test]
    fn m1_m2_commutator() {
        let c = commutant_basis();
        assert_eq!(c.m2[0].commutator(&c.m2[1]), c.m2[2].scale(2));
    }

    #[test]
    fn rejects_hermitian_input() {
        let c = Matrix4::from_diagonal_element(Complex64::new(1.0, 0.0));
        assert!(matches!(
            quadratic_from_matrix("bad", &c, 1.0),
            Err(Error::NotAntiHermitian { .. })
        ));
    }

    #[test]
    fn identity_gives_oscillator_energy() {
        let kappa = 0.8;
        let c = Matrix4::from_diagonal_element(Complex64::new(0.0, kappa));
        let f = quadratic_from_matrix("E", &c, kappa).unwrap();
        let z = [0.3, -0.2, 1.0, 0.4, 0.9, 0.1, -0.5, 0.2];
        let y2: f64 = z[..4].iter().map(|a| a * a).sum();
        let u2: f64 = z[4..].iter().map(|a| a * a).sum();
        assert!((f.eval(&z) - 0.5 * (u2 + kappa * kappa * y2)).abs() < 1e-14);
    }

    #[test]
    fn n3_gives_fiber_charge() {
        let f = quadratic_from_matrix("N3", &commutant_basis().n3(), 1.0).unwrap();
        let h = ObservableSet::default().get("oscillator.h").unwrap();
        let z = [0.3, -0.2, 1.0, 0.4, 0.9, 0.1, -0.5, 0.2];
        assert!((f.eval(&z) - h.eval(&z)).abs() < 1e-15);
    }

    #[test]
    fn basis_is_antihermitian() {
        let basis = u4_basis();
        assert_eq!(basis.len(), 16);
        for (_, m) in basis {
            assert_eq!(antihermitian_defect(&m), 0.0);
        }
    }
}
