//! The Kustaanheimo-Stiefel map `T R⁴₀ → T R³₀`, its U(1) fibers, a local
//! section used to lift Kepler states, and the oscillator chart `(Y, U)`.
//!
//! Four-vectors are stored in the order `(y¹, y², y³, y⁰)`: index 3 of a
//! [`Vector4`] is the component labelled `0`.

use nalgebra::{Matrix4, Vector3, Vector4};

use crate::error::{Error, Result};

/// A point of `T R³₀`: position and velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct State3 {
    pub x: Vector3<f64>,
    pub v: Vector3<f64>,
}

impl State3 {
    pub fn new(x: [f64; 3], v: [f64; 3]) -> Self {
        Self {
            x: Vector3::from(x),
            v: Vector3::from(v),
        }
    }

    pub fn radius(&self) -> f64 {
        self.x.norm()
    }

    pub fn to_array(&self) -> [f64; 6] {
        [
            self.x[0], self.x[1], self.x[2], self.v[0], self.v[1], self.v[2],
        ]
    }

    /// Reads `(x, v)` from the first six entries of `z`.
    pub fn from_slice(z: &[f64]) -> Self {
        Self {
            x: Vector3::new(z[0], z[1], z[2]),
            v: Vector3::new(z[3], z[4], z[5]),
        }
    }
}

/// A point of `T R⁴`: position `y` and velocity `u`, components `(1, 2, 3, 0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct State4 {
    pub y: Vector4<f64>,
    pub u: Vector4<f64>,
}

impl State4 {
    pub fn new(y: [f64; 4], u: [f64; 4]) -> Self {
        Self {
            y: Vector4::from(y),
            u: Vector4::from(u),
        }
    }

    /// `R = |y|`.
    pub fn radius(&self) -> f64 {
        self.y.norm()
    }

    pub fn to_array(&self) -> [f64; 8] {
        let mut out = [0.0; 8];
        out[..4].copy_from_slice(self.y.as_slice());
        out[4..].copy_from_slice(self.u.as_slice());
        out
    }

    pub fn from_slice(z: &[f64]) -> Self {
        Self {
            y: Vector4::new(z[0], z[1], z[2], z[3]),
            u: Vector4::new(z[4], z[5], z[6], z[7]),
        }
    }

    /// Oscillator-chart position `Y = y`.
    pub fn oscillator_position(&self) -> Vector4<f64> {
        self.y
    }

    /// Oscillator-chart velocity `U = 2R²u`.
    pub fn oscillator_velocity(&self) -> Vector4<f64> {
        2.0 * self.y.norm_squared() * self.u
    }

    /// The bilinear fiber momentum `y³u⁰ − y⁰u³ + y¹u² − y²u¹`; the fiber
    /// charge `h` is `4R²` times this.
    pub fn fiber_momentum(&self) -> f64 {
        fiber_generator(&self.y).dot(&self.u)
    }
}

/// Angle along the U(1) fiber, radians.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct FiberAngle(pub f64);

impl FiberAngle {
    pub fn radians(self) -> f64 {
        self.0
    }

    /// The block rotation `S_λ` acting on `(y¹, y²)` and `(y³, y⁰)`.
    pub fn rotation(self) -> Matrix4<f64> {
        let (s, c) = self.0.sin_cos();
        #[rustfmt::skip]
        let m = Matrix4::new(
            c,  -s,  0.0, 0.0,
            s,   c,  0.0, 0.0,
            0.0, 0.0, c,  -s,
            0.0, 0.0, s,   c,
        );
        m
    }
}

impl From<f64> for FiberAngle {
    fn from(lambda: f64) -> Self {
        FiberAngle(lambda)
    }
}

/// Infinitesimal generator of `S_λ` at `y`: `d/dλ S_λ y` at `λ = 0`.
pub fn fiber_generator(y: &Vector4<f64>) -> Vector4<f64> {
    Vector4::new(-y[1], y[0], -y[3], y[2])
}

/// `x = KS(y)`.
pub fn ks_project(y: &Vector4<f64>) -> Vector3<f64> {
    let (y1, y2, y3, y0) = (y[0], y[1], y[2], y[3]);
    Vector3::new(
        2.0 * (y1 * y3 + y2 * y0),
        2.0 * (y2 * y3 - y1 * y0),
        y1 * y1 + y2 * y2 - y3 * y3 - y0 * y0,
    )
}

/// The KS matrix: rows 0..3 give `v = 2 K(y) u` for the tangent lift, row 3 is
/// the fiber generator. `K Kᵀ = R² I`.
fn ks_matrix(y: &Vector4<f64>) -> Matrix4<f64> {
    let (y1, y2, y3, y0) = (y[0], y[1], y[2], y[3]);
    #[rustfmt::skip]
    let m = Matrix4::new(
        y3,  y0,  y1,  y2,
        -y0, y3,  y2, -y1,
        y1,  y2, -y3, -y0,
        -y2, y1, -y0,  y3,
    );
    m
}

/// Tangent lift of the KS map.
pub fn ks_tangent(s: &State4) -> State3 {
    let m = ks_matrix(&s.y);
    let w = m * s.u;
    State3 {
        x: ks_project(&s.y),
        v: 2.0 * Vector3::new(w[0], w[1], w[2]),
    }
}

/// Tangent lift of the fiber action, `(y, u) ↦ (S_λ y, S_λ u)`.
pub fn fiber_act(s: &State4, lambda: FiberAngle) -> State4 {
    let rot = lambda.rotation();
    State4 {
        y: rot * s.y,
        u: rot * s.u,
    }
}

/// Lifts a Kepler state onto `h = 0`, at fiber angle `λ` from the reference
/// section.
///
/// Two charts cover `R³₀`: the section with `y² = 0` when `x₃ ≥ 0` and the one
/// with `y⁰ = 0` otherwise, so the square-root argument is always at least `r/2`.
/// The velocity is the unique `u` with `ks_tangent` matching and `h = 0`.
pub fn ks_lift(p: &State3, lambda: FiberAngle) -> Result<State4> {
    let r = p.radius();
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::InvalidState(format!(
            "cannot lift a state at the origin (|x| = {r})"
        )));
    }
    let (x1, x2, x3) = (p.x[0], p.x[1], p.x[2]);
    let y = if x3 >= 0.0 {
        let y1 = (0.5 * (r + x3)).sqrt();
        Vector4::new(y1, 0.0, x1 / (2.0 * y1), -x2 / (2.0 * y1))
    } else {
        let y3 = (0.5 * (r - x3)).sqrt();
        Vector4::new(x1 / (2.0 * y3), x2 / (2.0 * y3), y3, 0.0)
    };
    // K is orthogonal up to R², and its last row enforces zero fiber momentum.
    let rhs = Vector4::new(0.5 * p.v[0], 0.5 * p.v[1], 0.5 * p.v[2], 0.0);
    let u = ks_matrix(&y).transpose() * rhs / y.norm_squared();
    Ok(fiber_act(&State4 { y, u }, lambda))
}

/// Removes the fiber component of `u`, landing on `h = 0` with the same `y`.
pub fn project_to_sigma0(s: &State4) -> State4 {
    let g = fiber_generator(&s.y);
    let gg = g.norm_squared();
    if gg == 0.0 {
        return *s;
    }
    State4 {
        y: s.y,
        u: s.u - g * (g.dot(&s.u) / gg),
    }
}

/// `(y, u) ↦ (Y, U) = (y, 2R²u)`.
pub fn to_oscillator_chart(s: &State4) -> Result<(Vector4<f64>, Vector4<f64>)> {
    let r2 = s.y.norm_squared();
    if !(r2 > 0.0) {
        return Err(Error::InvalidState(
            "oscillator chart is undefined at R = 0".into(),
        ));
    }
    Ok((s.y, 2.0 * r2 * s.u))
}

/// Inverse of [`to_oscillator_chart`].
pub fn from_oscillator_chart(big_y: &Vector4<f64>, big_u: &Vector4<f64>) -> Result<State4> {
    let r2 = big_y.norm_squared();
    if !(r2 > 0.0) {
        return Err(Error::InvalidState(
            "cannot leave the oscillator chart at |Y| = 0".into(),
        ));
    }
    Ok(State4 {
        y: *big_y,
        u: big_u / (2.0 * r2),
    })
}

/// Differential of the oscillator chart at `s`, applied to a tangent vector
/// `(dy, du)`: `dY = dy`, `dU = 4(y·dy)u + 2R² du`.
pub fn oscillator_chart_differential(
    s: &State4,
    dy: &Vector4<f64>,
    du: &Vector4<f64>,
) -> (Vector4<f64>, Vector4<f64>) {
    let r2 = s.y.norm_squared();
    (*dy, 4.0 * s.y.dot(dy) * s.u + 2.0 * r2 * du)
}
