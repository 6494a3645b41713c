//! Benchmark problems: initial meshes, data and, where known, exact solutions.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{HodgeError, Result};
use crate::forms::{AnalyticForm, Proxy};
use crate::mesh::Mesh;
use crate::scalar::{Point, Real};

/// Exact `σ`, `u`, `p` of a manufactured problem, plus `δdu` for the strong-form check.
#[derive(Clone, Debug)]
pub struct ExactSolution<T: Real> {
    pub sigma: AnalyticForm<T>,
    pub u: AnalyticForm<T>,
    pub p: AnalyticForm<T>,
    pub delta_du: AnalyticForm<T>,
}

#[derive(Clone, Debug)]
pub struct ProblemSpec<T: Real> {
    pub name: String,
    pub k: usize,
    pub initial_mesh: Mesh<T>,
    pub f: AnalyticForm<T>,
    pub exact: Option<ExactSolution<T>>,
    pub expected_betti: usize,
    pub notes: String,
}

pub const PROBLEM_NAMES: [&str; 4] = ["square-k2", "square-k1", "lshape-k2", "annulus-k1"];

pub fn by_name<T: Real>(name: &str) -> Result<ProblemSpec<T>> {
    let p = match name {
        "square-k2" => make_square_smooth_k2(),
        "square-k1" => make_square_smooth_k1(),
        "lshape-k2" => make_lshape_k2(),
        "annulus-k1" => make_annulus_k1(),
        other => return Err(HodgeError::Input(format!("unknown problem '{other}'"))),
    }?;
    p.check_consistency()?;
    Ok(p)
}

impl<T: Real> ProblemSpec<T> {
    /// `f − dσ − δdu − p` at `x`, using the stored closed forms.
    pub fn strong_residual(&self, x: Point<T>) -> Option<T> {
        let ex = self.exact.as_ref()?;
        let ds = ex.sigma.exterior_in(0, x)?;
        let r = self
            .f
            .eval(x)
            .sub(ds)
            .sub(ex.delta_du.eval(x))
            .sub(ex.p.eval(x));
        Some(r.norm_sq().sqrt())
    }

    /// Strong-form residual at 50 deterministic interior points of the initial mesh.
    pub fn check_consistency(&self) -> Result<()> {
        if self.exact.is_none() {
            return Ok(());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(50);
        let mesh = &self.initial_mesh;
        let scale = (0..mesh.num_triangles())
            .map(|t| {
                let c = mesh.corners(t);
                self.f
                    .eval([
                        (c[0][0] + c[1][0] + c[2][0]) / T::c(3.0),
                        (c[0][1] + c[1][1] + c[2][1]) / T::c(3.0),
                    ])
                    .norm_sq()
                    .sqrt()
            })
            .fold(T::one(), T::max);
        for _ in 0..50 {
            let t = rng.gen_range(0..mesh.num_triangles());
            let (a, b): (f64, f64) = (rng.gen(), rng.gen());
            let (a, b) = if a + b > 1.0 {
                (1.0 - a, 1.0 - b)
            } else {
                (a, b)
            };
            let c = mesh.corners(t);
            let (a, b) = (T::c(a), T::c(b));
            let x = [
                c[0][0] + a * (c[1][0] - c[0][0]) + b * (c[2][0] - c[0][0]),
                c[0][1] + a * (c[1][1] - c[0][1]) + b * (c[2][1] - c[0][1]),
            ];
            let r = self.strong_residual(x).unwrap_or(T::zero());
            if r > T::c(1e-8).max(T::epsilon() * T::c(100.0)) * scale {
                return Err(HodgeError::Input(format!(
                    "{}: strong residual {r} at {x:?}",
                    self.name
                )));
            }
        }
        Ok(())
    }
}

pub fn square_mesh<T: Real>() -> Result<Mesh<T>> {
    let v = |x: f64, y: f64| [T::c(x), T::c(y)];
    Mesh::from_raw(
        vec![v(0.0, 0.0), v(1.0, 0.0), v(1.0, 1.0), v(0.0, 1.0)],
        vec![[0, 1, 2], [0, 2, 3]],
    )
}

/// `(-1,1)²` minus `[0,1]×[-1,0]`, six triangles with diagonals through the reentrant corner.
pub fn lshape_mesh<T: Real>() -> Result<Mesh<T>> {
    let pts = [
        (-1.0, -1.0),
        (0.0, -1.0),
        (0.0, 0.0),
        (1.0, 0.0),
        (1.0, 1.0),
        (0.0, 1.0),
        (-1.0, 1.0),
        (-1.0, 0.0),
    ];
    let v = pts.iter().map(|&(x, y)| [T::c(x), T::c(y)]).collect();
    Mesh::from_raw(
        v,
        vec![
            [0, 1, 2],
            [0, 2, 7],
            [7, 2, 6],
            [2, 5, 6],
            [2, 3, 4],
            [2, 4, 5],
        ],
    )
}

/// `(-2,2)²` minus `[-1,1]²`: eight trapezoids between the outer and inner square, each split
/// along its shorter diagonal.
pub fn annulus_mesh<T: Real>() -> Result<Mesh<T>> {
    let dirs = [
        (1.0, 0.0),
        (1.0, 1.0),
        (0.0, 1.0),
        (-1.0, 1.0),
        (-1.0, 0.0),
        (-1.0, -1.0),
        (0.0, -1.0),
        (1.0, -1.0),
    ];
    let mut v: Vec<Point<T>> = dirs
        .iter()
        .map(|&(x, y)| [T::c(2.0 * x), T::c(2.0 * y)])
        .collect();
    v.extend(dirs.iter().map(|&(x, y)| [T::c(x), T::c(y)]));
    let (o, n) = (|i: usize| i % 8, |i: usize| 8 + i % 8);
    let mut tris = Vec::new();
    for i in 0..8 {
        if i % 2 == 0 {
            tris.push([o(i), o(i + 1), n(i + 1)]);
            tris.push([o(i), n(i + 1), n(i)]);
        } else {
            tris.push([o(i), o(i + 1), n(i)]);
            tris.push([o(i + 1), n(i + 1), n(i)]);
        }
    }
    Mesh::from_raw(v, tris)
}

/// Unit square, `k = 2`: `u = sin(πx) sin(πy)`, `σ = δu`, `f = 2π² u`.
pub fn make_square_smooth_k2<T: Real>() -> Result<ProblemSpec<T>> {
    let pi = T::c(PI);
    let u = move |x: Point<T>| (pi * x[0]).sin() * (pi * x[1]).sin();
    let f = AnalyticForm::scalar(2, move |x| T::c(2.0) * pi * pi * u(x));
    let sigma_v = move |x: Point<T>| {
        [
            pi * (pi * x[0]).sin() * (pi * x[1]).cos(),
            -pi * (pi * x[0]).cos() * (pi * x[1]).sin(),
        ]
    };
    let sigma = AnalyticForm::vector(sigma_v)
        .with_exterior(move |x| Proxy::Scalar(T::c(2.0) * pi * pi * u(x)));
    Ok(ProblemSpec {
        name: "square-k2".into(),
        k: 2,
        initial_mesh: square_mesh()?,
        f,
        exact: Some(ExactSolution {
            sigma,
            u: AnalyticForm::scalar(2, u),
            p: AnalyticForm::zero(2),
            delta_du: AnalyticForm::zero(2),
        }),
        expected_betti: 0,
        notes: "u = sin(pi x) sin(pi y) vanishes on the boundary; sigma = (u_y, -u_x); f = rot sigma = 2 pi^2 u".into(),
    })
}

/// `A(t) = (t(1-t))³` and its first three derivatives.
fn cubic_bump<T: Real>(t: T) -> [T; 4] {
    let g = t * (T::one() - t);
    let g1 = T::one() - T::c(2.0) * t;
    let c = T::c;
    [
        g * g * g,
        c(3.0) * g * g * g1,
        c(6.0) * g * g1 * g1 - c(6.0) * g * g,
        c(6.0) * g1 * g1 * g1 - c(36.0) * g * g1,
    ]
}

/// Unit square, `k = 1`: `u = ∇φ + ∇^⊥ψ` with `φ = cos(πx)cos(πy)` and `ψ = A(x)A(y)`.
pub fn make_square_smooth_k1<T: Real>() -> Result<ProblemSpec<T>> {
    let pi = T::c(PI);
    let two_pi2 = T::c(2.0 * PI * PI);
    let phi = move |x: Point<T>| (pi * x[0]).cos() * (pi * x[1]).cos();
    let grad_phi = move |x: Point<T>| {
        [
            -pi * (pi * x[0]).sin() * (pi * x[1]).cos(),
            -pi * (pi * x[0]).cos() * (pi * x[1]).sin(),
        ]
    };
    // ψ partials: [ψ_x, ψ_y, Δψ, ∂xΔψ, ∂yΔψ]
    let psi = move |x: Point<T>| {
        let (a, b) = (cubic_bump(x[0]), cubic_bump(x[1]));
        [
            a[1] * b[0],
            a[0] * b[1],
            a[2] * b[0] + a[0] * b[2],
            a[3] * b[0] + a[1] * b[2],
            a[2] * b[1] + a[0] * b[3],
        ]
    };
    let u = AnalyticForm::vector(move |x| {
        let (g, p) = (grad_phi(x), psi(x));
        [g[0] - p[1], g[1] + p[0]]
    })
    .with_exterior(move |x| Proxy::Scalar(psi(x)[2]))
    .with_coderivative(move |x| Proxy::Scalar(two_pi2 * phi(x)));
    let sigma = AnalyticForm::scalar(0, move |x| two_pi2 * phi(x)).with_exterior(move |x| {
        let g = grad_phi(x);
        Proxy::Vector([two_pi2 * g[0], two_pi2 * g[1]])
    });
    let delta_du = AnalyticForm::vector(move |x| {
        let p = psi(x);
        [p[4], -p[3]]
    });
    let f = AnalyticForm::vector(move |x| {
        let (g, p) = (grad_phi(x), psi(x));
        [two_pi2 * g[0] + p[4], two_pi2 * g[1] - p[3]]
    })
    .with_coderivative(move |x| Proxy::Scalar(two_pi2 * two_pi2 * phi(x)));
    Ok(ProblemSpec {
        name: "square-k1".into(),
        k: 1,
        initial_mesh: square_mesh()?,
        f,
        exact: Some(ExactSolution { sigma, u, p: AnalyticForm::zero(1), delta_du }),
        expected_betti: 0,
        notes: "phi = cos(pi x)cos(pi y), psi = [x(1-x)y(1-y)]^3; u = grad phi + rot^T psi satisfies u.n = 0 and rot u = 0 on the boundary; sigma = -div u = 2 pi^2 phi; f = grad sigma + (d_y lap psi, -d_x lap psi)".into(),
    })
}

pub fn make_lshape_k2<T: Real>() -> Result<ProblemSpec<T>> {
    Ok(ProblemSpec {
        name: "lshape-k2".into(),
        k: 2,
        initial_mesh: lshape_mesh()?,
        f: AnalyticForm::scalar(2, |_| T::one()),
        exact: None,
        expected_betti: 0,
        notes: "constant data on the L-shaped domain; the reentrant corner limits regularity"
            .into(),
    })
}

pub fn make_annulus_k1<T: Real>() -> Result<ProblemSpec<T>> {
    let f = AnalyticForm::vector(|x: Point<T>| {
        let r2 = x[0] * x[0] + x[1] * x[1];
        [-x[1] / r2, x[0] / r2]
    })
    .with_exterior(|_| Proxy::Scalar(T::zero()))
    .with_coderivative(|_| Proxy::Scalar(T::zero()));
    Ok(ProblemSpec {
        name: "annulus-k1".into(),
        k: 1,
        initial_mesh: annulus_mesh()?,
        f,
        exact: None,
        expected_betti: 1,
        notes: "f = (-y, x)/(x^2 + y^2) is closed and co-closed with circulation 2 pi around the hole, so its harmonic part is nonzero".into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn meshes_have_expected_counts() {
        let l = lshape_mesh::<f64>().unwrap();
        assert_eq!(
            (l.num_vertices(), l.num_edges(), l.num_triangles()),
            (8, 13, 6)
        );
        let a = annulus_mesh::<f64>().unwrap();
        assert_eq!(
            (a.num_vertices(), a.num_edges(), a.num_triangles()),
            (16, 32, 16)
        );
        assert_eq!(a.boundary_edge_count(), 16);
    }

    #[test]
    fn all_problems_construct() {
        for name in PROBLEM_NAMES {
            by_name::<f64>(name).unwrap();
        }
        assert!(by_name::<f64>("nope").is_err());
    }
}
