//! Mixed Hodge Laplacian: assembly, discrete harmonic forms, solves and Hodge decompositions.
//!
//! Unknowns are ordered `[σ (V^{k-1}), u (V^k)]`. The operator
//! `L = [[-M_{k-1}, Bᵀ], [B, K]]` with `B = M_k D_{k-1}` and `K = D_kᵀ M_{k+1} D_k` is singular
//! exactly on `{(0, q) : q harmonic}`. All solves go through one factorization of the
//! quasi-definite shift `S = L + μ G`, `G = diag(M_{k-1}, M_k)`.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{HodgeError, Result};
use crate::forms::{AnalyticForm, CoefficientVector, Element, FormSpace};
use crate::linalg::{norm2, symmetric_eigen, LdlFactor, SymmetricSolver};
use crate::mesh::Mesh;
use crate::scalar::{dot, Real};
use crate::sparse::CsrMatrix;

/// Spaces, mass matrices and derivatives of the discrete de Rham complex on one mesh.
pub struct DiscreteComplex<T: Real> {
    mesh: Arc<Mesh<T>>,
    spaces: [FormSpace<T>; 3],
    mass: [CsrMatrix<T>; 3],
    derivative: [CsrMatrix<T>; 2],
    incidence: [CsrMatrix<i32>; 2],
}

impl<T: Real> DiscreteComplex<T> {
    pub fn new(mesh: Arc<Mesh<T>>) -> Result<Self> {
        let spaces = [
            FormSpace::new(mesh.clone(), 0)?,
            FormSpace::new(mesh.clone(), 1)?,
            FormSpace::new(mesh.clone(), 2)?,
        ];
        let mass = [
            spaces[0].mass_matrix()?,
            spaces[1].mass_matrix()?,
            spaces[2].mass_matrix()?,
        ];
        let incidence = [
            spaces[0].derivative_matrix()?,
            spaces[1].derivative_matrix()?,
        ];
        let derivative = [
            spaces[0].coefficient_derivative()?,
            spaces[1].coefficient_derivative()?,
        ];
        Ok(DiscreteComplex {
            mesh,
            spaces,
            mass,
            derivative,
            incidence,
        })
    }

    pub fn mesh(&self) -> &Arc<Mesh<T>> {
        &self.mesh
    }

    pub fn space(&self, k: usize) -> &FormSpace<T> {
        &self.spaces[k]
    }

    pub fn mass(&self, k: usize) -> &CsrMatrix<T> {
        &self.mass[k]
    }

    /// Coefficient-level exterior derivative `V^k → V^{k+1}`.
    pub fn derivative(&self, k: usize) -> Result<&CsrMatrix<T>> {
        self.derivative.get(k).ok_or(HodgeError::NoHigherSpace(k))
    }

    /// Integer incidence `D_k`.
    pub fn incidence(&self, k: usize) -> Result<&CsrMatrix<i32>> {
        self.incidence.get(k).ok_or(HodgeError::NoHigherSpace(k))
    }

    /// `‖D_k v‖_{M_{k+1}}`, zero for `k = 2`.
    pub fn derivative_norm(&self, k: usize, v: &[T]) -> T {
        match self.derivative.get(k) {
            Some(d) => self.mass[k + 1].norm_sq(&d.matvec(v)).max(T::zero()).sqrt(),
            None => T::zero(),
        }
    }
}

/// Orthonormal basis of the discrete harmonic forms `Z_h ∩ B_h^⊥`.
#[derive(Clone, Debug)]
pub struct HarmonicBasis<T> {
    space: FormSpace<T>,
    columns: Vec<Vec<T>>,
}

impl<T: Real> HarmonicBasis<T> {
    pub fn new(space: FormSpace<T>, columns: Vec<Vec<T>>) -> Result<Self> {
        if let Some(c) = columns.iter().find(|c| c.len() != space.ndof()) {
            return Err(HodgeError::DimensionMismatch {
                expected: space.ndof(),
                found: c.len(),
            });
        }
        Ok(HarmonicBasis { space, columns })
    }

    pub fn empty(space: FormSpace<T>) -> Self {
        HarmonicBasis {
            space,
            columns: Vec::new(),
        }
    }

    pub fn space(&self) -> &FormSpace<T> {
        &self.space
    }

    pub fn columns(&self) -> &[Vec<T>] {
        &self.columns
    }

    pub fn dim(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, i: usize) -> Result<CoefficientVector<T>> {
        self.space.vector(self.columns[i].clone())
    }

    /// `Σ cᵢ qᵢ`.
    pub fn combine(&self, coords: &[T]) -> Vec<T> {
        let mut v = vec![T::zero(); self.space.ndof()];
        for (c, q) in coords.iter().zip(&self.columns) {
            crate::linalg::axpy(*c, q, &mut v);
        }
        v
    }

    /// Exact transfer of every column to a nested finer space.
    pub fn prolong(&self, fine: &FormSpace<T>, child_to_parent: &[usize]) -> Result<Self> {
        let columns = self
            .columns
            .iter()
            .map(|c| {
                Ok(self
                    .space
                    .vector(c.clone())?
                    .prolong(fine, child_to_parent)?
                    .into_values())
            })
            .collect::<Result<Vec<_>>>()?;
        HarmonicBasis::new(fine.clone(), columns)
    }
}

/// Output of a mixed solve.
#[derive(Clone, Debug)]
pub struct MixedSolution<T> {
    pub sigma: CoefficientVector<T>,
    pub u: CoefficientVector<T>,
    /// Coordinates of `p_h` in the harmonic basis.
    pub p: Vec<T>,
    pub harmonic: HarmonicBasis<T>,
    /// Relative residual of the full bordered system.
    pub solve_residual: T,
    /// Relative residuals of the first and second mixed equations.
    pub galerkin_residuals: (T, T),
}

impl<T: Real> MixedSolution<T> {
    pub fn k(&self) -> usize {
        self.u.k()
    }

    pub fn mesh(&self) -> &Arc<Mesh<T>> {
        self.u.space().mesh()
    }

    /// `p_h` as a coefficient vector.
    pub fn p_vector(&self) -> CoefficientVector<T> {
        CoefficientVector::new(self.u.space().clone(), self.harmonic.combine(&self.p))
            .expect("consistent length")
    }
}

/// Right-hand side of the mixed system.
#[derive(Clone, Copy)]
pub enum Load<'a, T: Real> {
    Analytic(&'a AnalyticForm<T>),
    Discrete(&'a CoefficientVector<T>),
}

/// `F_i = ⟨f, φ_i⟩` using the triangle rule for analytic data and the mass matrix otherwise.
pub fn load_vector<T: Real>(
    complex: &DiscreteComplex<T>,
    k: usize,
    f: Load<'_, T>,
) -> Result<Vec<T>> {
    let space = complex.space(k);
    match f {
        Load::Discrete(v) => {
            if v.k() != k || v.values().len() != space.ndof() {
                return Err(HodgeError::DegreeMismatch {
                    expected: k,
                    found: v.k(),
                });
            }
            Ok(complex.mass(k).matvec(v.values()))
        }
        Load::Analytic(g) => {
            if g.k() != k {
                return Err(HodgeError::DegreeMismatch {
                    expected: k,
                    found: g.k(),
                });
            }
            let mesh = complex.mesh();
            let locals: Vec<(Vec<usize>, Vec<T>)> = (0..mesh.num_triangles())
                .into_par_iter()
                .map(|t| {
                    let el = Element::new(mesh, t);
                    let root = mesh.root()[t];
                    let (dofs, signs) = space.local_dofs(t);
                    let mut vals = vec![T::zero(); dofs.len()];
                    for (l, x, w) in el.quadrature() {
                        let fx = g.eval_in(root, x);
                        for (i, v) in vals.iter_mut().enumerate() {
                            *v += w * match k {
                                0 => fx.scalar() * l[i],
                                1 => dot(fx.vector(), el.whitney(i, l)),
                                _ => fx.scalar(),
                            };
                        }
                    }
                    (
                        dofs,
                        vals.into_iter().zip(signs).map(|(v, s)| v * s).collect(),
                    )
                })
                .collect();
            let mut out = vec![T::zero(); space.ndof()];
            for (dofs, vals) in locals {
                for (d, v) in dofs.into_iter().zip(vals) {
                    out[d] += v;
                }
            }
            Ok(out)
        }
    }
}

fn block_diag<T: Real>(a: &CsrMatrix<T>, b: &CsrMatrix<T>) -> CsrMatrix<T> {
    let na = a.nrows();
    let mut trip = a.triplets();
    trip.extend(
        b.triplets()
            .into_iter()
            .map(|(i, j, v)| (i + na, j + na, v)),
    );
    CsrMatrix::from_triplets(na + b.nrows(), na + b.ncols(), trip)
}

/// The mixed operator for one form degree together with the factored shift.
pub struct HodgeOperator<T: Real> {
    complex: Arc<DiscreteComplex<T>>,
    k: usize,
    na: usize,
    nb: usize,
    l: CsrMatrix<T>,
    g: CsrMatrix<T>,
    shifted: SymmetricSolver<T>,
    pub mu: T,
}

impl<T: Real> HodgeOperator<T> {
    pub fn new(complex: Arc<DiscreteComplex<T>>, k: usize) -> Result<Self> {
        if !(1..=2).contains(&k) {
            return Err(HodgeError::Degree(k));
        }
        let ma = complex.mass(k - 1);
        let mb = complex.mass(k);
        let b = mb.matmul(complex.derivative(k - 1)?);
        let (na, nb) = (ma.nrows(), mb.nrows());
        let mut trip: Vec<(usize, usize, T)> = ma
            .triplets()
            .into_iter()
            .map(|(i, j, v)| (i, j, -v))
            .collect();
        for (i, j, v) in b.triplets() {
            trip.push((na + i, j, v));
            trip.push((j, na + i, v));
        }
        if k < 2 {
            let d = complex.derivative(k)?;
            let kk = d.transpose().matmul(&complex.mass(k + 1).matmul(d));
            trip.extend(
                kk.triplets()
                    .into_iter()
                    .map(|(i, j, v)| (na + i, na + j, v)),
            );
        }
        let l = CsrMatrix::from_triplets(na + nb, na + nb, trip);
        let g = block_diag(ma, mb);

        let mesh = complex.mesh();
        let (mut lo, mut hi) = ([T::infinity(); 2], [T::neg_infinity(); 2]);
        for p in mesh.vertices() {
            for c in 0..2 {
                lo[c] = lo[c].min(p[c]);
                hi[c] = hi[c].max(p[c]);
            }
        }
        let diam2 = (hi[0] - lo[0]).powi(2) + (hi[1] - lo[1]).powi(2);
        let mu = T::c(1e-3) / diam2;
        let shifted_matrix = l.add(&g.map(|v| v * mu));
        let signs: Vec<i8> = (0..na + nb).map(|i| if i < na { -1 } else { 1 }).collect();
        let shifted = SymmetricSolver::with_signs(&shifted_matrix, &signs, T::zero())?;
        Ok(HodgeOperator {
            complex,
            k,
            na,
            nb,
            l,
            g,
            shifted,
            mu,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn complex(&self) -> &Arc<DiscreteComplex<T>> {
        &self.complex
    }

    /// The assembled unbordered operator `L`.
    pub fn matrix(&self) -> &CsrMatrix<T> {
        &self.l
    }

    fn g_inner(&self, x: &[T], y: &[T]) -> T {
        self.g.inner(x, y)
    }

    fn g_orthonormalize(&self, cols: &mut Vec<Vec<T>>) {
        for _ in 0..2 {
            let mut out: Vec<Vec<T>> = Vec::with_capacity(cols.len());
            for mut c in cols.drain(..) {
                let n0 = self.g_inner(&c, &c).sqrt();
                for q in &out {
                    let a = self.g_inner(q, &c);
                    crate::linalg::axpy(-a, q, &mut c);
                }
                let n = self.g_inner(&c, &c).sqrt();
                if n > n0 * T::c(1e-10) && n > T::zero() {
                    c.iter_mut().for_each(|v| *v /= n);
                    out.push(c);
                }
            }
            *cols = out;
        }
    }

    /// Discrete harmonic forms by shift-inverted block iteration on the mixed pencil `(L, G)`.
    pub fn harmonic_basis(&self, expected: Option<usize>) -> Result<HarmonicBasis<T>> {
        let n = self.na + self.nb;
        let space = self.complex.space(self.k).clone();
        let mut block = expected.map_or(4, |e| e + 3).min(n);
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0001);
        loop {
            let mut x: Vec<Vec<T>> = (0..block)
                .map(|_| (0..n).map(|_| T::c(rng.gen_range(-1.0..1.0))).collect())
                .collect();
            self.g_orthonormalize(&mut x);
            let mut ritz = None;
            for it in 0..12 {
                let y: Vec<Vec<T>> = x
                    .iter()
                    .map(|c| self.shifted.solve_approx(&self.g.matvec(c), 2))
                    .collect();
                x = y;
                self.g_orthonormalize(&mut x);
                if it < 3 {
                    continue;
                }
                let lx: Vec<Vec<T>> = x.iter().map(|c| self.l.matvec(c)).collect();
                let p = x.len();
                let small: Vec<Vec<T>> = (0..p)
                    .map(|i| (0..p).map(|j| crate::linalg::dot(&x[i], &lx[j])).collect())
                    .collect();
                let sym: Vec<Vec<T>> = (0..p)
                    .map(|i| {
                        (0..p)
                            .map(|j| (small[i][j] + small[j][i]) * T::c(0.5))
                            .collect()
                    })
                    .collect();
                let (theta, vecs) = symmetric_eigen(&sym)?;
                let big = theta.iter().fold(T::zero(), |m, t| m.max(t.abs()));
                let zero: Vec<usize> = (0..p)
                    .filter(|&i| theta[i].abs() < T::c(1e-6) * big)
                    .collect();
                // converged once the zero Ritz vectors have negligible residual
                let lscale = self.l.max_abs();
                let converged = zero.iter().all(|&i| {
                    let r: Vec<T> = (0..n)
                        .map(|r| (0..p).map(|j| lx[j][r] * vecs[j][i]).sum())
                        .collect();
                    norm2(&r) <= T::c(1e-9) * lscale.max(T::one())
                });
                if converged {
                    ritz = Some((zero, vecs));
                    break;
                }
            }
            let Some((zero, vecs)) = ritz else {
                return Err(HodgeError::EigenNonConvergence(format!(
                    "block of {block} vectors did not settle"
                )));
            };
            if zero.len() >= x.len() && block < n {
                block = (block * 2).min(n);
                continue;
            }
            let mut cols: Vec<Vec<T>> = zero
                .iter()
                .map(|&i| {
                    (self.na..n)
                        .map(|r| (0..x.len()).map(|j| x[j][r] * vecs[j][i]).sum())
                        .collect()
                })
                .collect();
            m_orthonormalize(self.complex.mass(self.k), &mut cols)?;
            let basis = HarmonicBasis::new(space, cols)?;
            if let Some(e) = expected {
                if e != basis.dim() {
                    return Err(HodgeError::HarmonicDimension {
                        expected: e,
                        found: basis.dim(),
                    });
                }
            }
            return Ok(basis);
        }
    }

    /// Membership defects `(‖D_k q‖_M, ‖D_{k-1}ᵀ M_k q‖)` of a form.
    pub fn harmonic_defects(&self, q: &[T]) -> Result<(T, T)> {
        let dq = self.complex.derivative_norm(self.k, q);
        let mq = self.complex.mass(self.k).matvec(q);
        let adj = self.complex.derivative(self.k - 1)?.matvec_transpose(&mq);
        Ok((dq, norm2(&adj)))
    }

    /// Solves the bordered mixed system with second-block right-hand side `rhs`.
    pub fn solve_rhs(&self, rhs: &[T], harmonic: &HarmonicBasis<T>) -> Result<MixedSolution<T>> {
        if rhs.len() != self.nb {
            return Err(HodgeError::DimensionMismatch {
                expected: self.nb,
                found: rhs.len(),
            });
        }
        let (na, nb) = (self.na, self.nb);
        let mk = self.complex.mass(self.k);
        let c: Vec<T> = harmonic
            .columns()
            .iter()
            .map(|q| crate::linalg::dot(q, rhs))
            .collect();
        let mq: Vec<Vec<T>> = harmonic.columns().iter().map(|q| mk.matvec(q)).collect();
        let mut b = vec![T::zero(); na + nb];
        b[na..].copy_from_slice(rhs);
        for (ci, mqi) in c.iter().zip(&mq) {
            for r in 0..nb {
                b[na + r] -= *ci * mqi[r];
            }
        }
        let project = |z: &mut Vec<T>| {
            for (q, mqi) in harmonic.columns().iter().zip(&mq) {
                let a = crate::linalg::dot(mqi, &z[na..]);
                for r in 0..nb {
                    z[na + r] -= a * q[r];
                }
            }
        };
        let fnorm = norm2(rhs);
        let mut z = vec![T::zero(); na + nb];
        if fnorm > T::zero() {
            let mut r = b.clone();
            let mut rel = T::infinity();
            for _ in 0..40 {
                let dz = self.shifted.solve_approx(&r, 2);
                crate::linalg::axpy(T::one(), &dz, &mut z);
                project(&mut z);
                let lz = self.l.matvec(&z);
                r = b.iter().zip(&lz).map(|(u, v)| *u - *v).collect();
                let new = norm2(&r) / fnorm;
                let stalled = new > rel * T::c(0.5);
                rel = new;
                if rel <= T::solve_tolerance() * T::c(1e-2) || stalled {
                    break;
                }
            }
        }
        let sigma = self.complex.space(self.k - 1).vector(z[..na].to_vec())?;
        let u = self.complex.space(self.k).vector(z[na..].to_vec())?;
        let mut sol = MixedSolution {
            sigma,
            u,
            p: c,
            harmonic: harmonic.clone(),
            solve_residual: T::zero(),
            galerkin_residuals: (T::zero(), T::zero()),
        };
        let (r1, r2, r3) = self.residuals(&sol, rhs)?;
        let scale = fnorm.max(T::min_positive_value());
        sol.solve_residual = (r1 * r1 + r2 * r2 + r3 * r3).sqrt() / scale;
        sol.galerkin_residuals = (r1 / scale, r2 / scale);
        if fnorm > T::zero() && sol.solve_residual > T::solve_tolerance() {
            return Err(HodgeError::SolveTolerance {
                residual: sol.solve_residual.to_f64_lossy(),
            });
        }
        Ok(sol)
    }

    /// Absolute residual norms of the three mixed equations.
    pub fn residuals(&self, sol: &MixedSolution<T>, rhs: &[T]) -> Result<(T, T, T)> {
        let (na, nb) = (self.na, self.nb);
        let mut z = sol.sigma.values().to_vec();
        z.extend_from_slice(sol.u.values());
        let lz = self.l.matvec(&z);
        let r1 = norm2(&lz[..na]);
        let mp = self
            .complex
            .mass(self.k)
            .matvec(&sol.harmonic.combine(&sol.p));
        let r2: Vec<T> = (0..nb).map(|i| lz[na + i] + mp[i] - rhs[i]).collect();
        let mu = self.complex.mass(self.k).matvec(sol.u.values());
        let r3: Vec<T> = sol
            .harmonic
            .columns()
            .iter()
            .map(|q| crate::linalg::dot(q, &mu))
            .collect();
        Ok((r1, norm2(&r2), norm2(&r3)))
    }

    pub fn solve(&self, f: Load<'_, T>, harmonic: &HarmonicBasis<T>) -> Result<MixedSolution<T>> {
        let rhs = load_vector(&self.complex, self.k, f)?;
        self.solve_rhs(&rhs, harmonic)
    }

    /// `v = b + h + z` with `b ∈ B_h`, `h` harmonic and `z = M⁻¹ D_kᵀ M D_k u ∈ Z_h^⊥`, each part
    /// computed separately so the sum can be checked against `v`.
    pub fn hodge_decompose(
        &self,
        v: &CoefficientVector<T>,
        harmonic: &HarmonicBasis<T>,
    ) -> Result<HodgeParts<T>> {
        let sol = self.solve(Load::Discrete(v), harmonic)?;
        let b = self
            .complex
            .derivative(self.k - 1)?
            .matvec(sol.sigma.values());
        let h = harmonic.combine(&sol.p);
        let z = match self.complex.derivative(self.k) {
            Ok(d) => {
                let m = self.complex.mass(self.k);
                let ku = d.matvec_transpose(
                    &self
                        .complex
                        .mass(self.k + 1)
                        .matvec(&d.matvec(sol.u.values())),
                );
                let fac = LdlFactor::factor(m)?;
                let mut z = fac.solve(&ku);
                let r: Vec<T> = ku.iter().zip(m.matvec(&z)).map(|(a, b)| *a - b).collect();
                crate::linalg::axpy(T::one(), &fac.solve(&r), &mut z);
                z
            }
            Err(_) => vec![T::zero(); v.values().len()],
        };
        let space = self.complex.space(self.k);
        Ok(HodgeParts {
            exact: space.vector(b)?,
            harmonic: space.vector(h)?,
            coexact: space.vector(z)?,
        })
    }
}

#[derive(Clone, Debug)]
pub struct HodgeParts<T> {
    pub exact: CoefficientVector<T>,
    pub harmonic: CoefficientVector<T>,
    pub coexact: CoefficientVector<T>,
}

/// Symmetric (Löwdin) orthonormalization with respect to `m`.
pub fn m_orthonormalize<T: Real>(m: &CsrMatrix<T>, cols: &mut Vec<Vec<T>>) -> Result<()> {
    let p = cols.len();
    if p == 0 {
        return Ok(());
    }
    for _ in 0..2 {
        let mc: Vec<Vec<T>> = cols.iter().map(|c| m.matvec(c)).collect();
        let gram: Vec<Vec<T>> = (0..p)
            .map(|i| {
                (0..p)
                    .map(|j| crate::linalg::dot(&cols[i], &mc[j]))
                    .collect()
            })
            .collect();
        let (vals, vecs) = symmetric_eigen(&gram)?;
        if vals[0] <= T::zero() {
            return Err(HodgeError::EigenNonConvergence(
                "harmonic vectors are linearly dependent".into(),
            ));
        }
        let n = cols[0].len();
        let new: Vec<Vec<T>> = (0..p)
            .map(|c| {
                let mut out = vec![T::zero(); n];
                for i in 0..p {
                    let coef: T = (0..p)
                        .map(|a| vecs[i][a] * vecs[c][a] / vals[a].sqrt())
                        .sum();
                    crate::linalg::axpy(coef, &cols[i], &mut out);
                }
                out
            })
            .collect();
        *cols = new;
    }
    Ok(())
}

/// Directional gaps `(δ(A, B), δ(B, A))` between the spans of two column sets in the inner
/// product of `m`.
pub fn gap<T: Real>(a: &[Vec<T>], b: &[Vec<T>], m: &CsrMatrix<T>) -> Result<(T, T)> {
    match (a.is_empty(), b.is_empty()) {
        (true, true) => return Ok((T::zero(), T::zero())),
        (true, false) | (false, true) => return Ok((T::one(), T::one())),
        _ => {}
    }
    let (mut a, mut b) = (a.to_vec(), b.to_vec());
    m_orthonormalize(m, &mut a)?;
    m_orthonormalize(m, &mut b)?;
    Ok((directional_gap(&a, &b, m)?, directional_gap(&b, &a, m)?))
}

/// `max ‖x − P_B x‖` over unit `x ∈ span A`, both bases orthonormal. Computed from the residual
/// Gram matrix so small gaps keep full relative accuracy.
fn directional_gap<T: Real>(a: &[Vec<T>], b: &[Vec<T>], m: &CsrMatrix<T>) -> Result<T> {
    let mb: Vec<Vec<T>> = b.iter().map(|c| m.matvec(c)).collect();
    let res: Vec<Vec<T>> = a
        .iter()
        .map(|ai| {
            let mut r = ai.clone();
            for (bj, mbj) in b.iter().zip(&mb) {
                crate::linalg::axpy(-crate::linalg::dot(ai, mbj), bj, &mut r);
            }
            r
        })
        .collect();
    let mr: Vec<Vec<T>> = res.iter().map(|r| m.matvec(r)).collect();
    let n = a.len();
    let g: Vec<Vec<T>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| crate::linalg::dot(&res[i], &mr[j]))
                .collect()
        })
        .collect();
    let (vals, _) = symmetric_eigen(&g)?;
    Ok(vals[n - 1].max(T::zero()).sqrt().min(T::one()))
}

/// One-call mixed solve: factor, harmonic basis, solve.
pub fn solve_hodge_laplacian<T: Real>(
    complex: Arc<DiscreteComplex<T>>,
    k: usize,
    f: Load<'_, T>,
    expected_harmonic: Option<usize>,
) -> Result<MixedSolution<T>> {
    let op = HodgeOperator::new(complex, k)?;
    let h = op.harmonic_basis(expected_harmonic)?;
    op.solve(f, &h)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gap_examples() {
        let m = CsrMatrix::identity(2, 1.0);
        let s = 0.5f64.sqrt();
        let (a, b) = gap(&[vec![1.0, 0.0]], &[vec![s, s]], &m).unwrap();
        assert!((a - s).abs() < 1e-12 && (b - s).abs() < 1e-12);
        let (a, b) = gap(&[vec![1.0, 0.0]], &[vec![0.0, 3.0]], &m).unwrap();
        assert!((a - 1.0).abs() < 1e-12 && (b - 1.0).abs() < 1e-12);
        let (a, b) = gap(&[vec![1.0, 0.0]], &[vec![2.0, 0.0]], &m).unwrap();
        assert!(a.abs() < 1e-14 && b.abs() < 1e-14);
        assert_eq!(gap::<f64>(&[], &[], &m).unwrap(), (0.0, 0.0));
        assert_eq!(gap(&[vec![1.0, 0.0]], &[], &m).unwrap(), (1.0, 1.0));
    }
}
