//! Sparse symmetric factorization and small dense kernels.

use crate::error::{HodgeError, Result};
use crate::scalar::Real;
use crate::sparse::CsrMatrix;

/// Sparse `P A Pᵀ = L D Lᵀ` factorization of a symmetric matrix, fill-reducing ordering from AMD.
///
/// The input must store both triangles. No pivoting is done beyond the ordering, so the matrix
/// should be quasi-definite (or definite); pivots that vanish are replaced by a tiny value of the
/// same sign and counted in `perturbed`.
#[derive(Clone, Debug)]
pub struct LdlFactor<T> {
    n: usize,
    perm: Vec<usize>,
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<T>,
    d: Vec<T>,
    pub perturbed: usize,
}

fn amd_order<T: Real>(a: &CsrMatrix<T>) -> Result<Vec<usize>> {
    let n = a.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let (p, _, _) = amd::order::<usize>(n, a.indptr(), a.indices(), &amd::Control::default())
        .map_err(|s| HodgeError::Factorization(format!("ordering failed: {s:?}")))?;
    Ok(p)
}

impl<T: Real> LdlFactor<T> {
    pub fn factor(a: &CsrMatrix<T>) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(HodgeError::DimensionMismatch {
                expected: a.nrows(),
                found: a.ncols(),
            });
        }
        let perm = amd_order(a)?;
        Self::factor_with_order(a, perm)
    }

    pub fn factor_with_order(a: &CsrMatrix<T>, perm: Vec<usize>) -> Result<Self> {
        let n = a.nrows();
        let mut pinv = vec![0usize; n];
        for (k, &p) in perm.iter().enumerate() {
            pinv[p] = k;
        }
        let (ap, ai, ax) = (a.indptr(), a.indices(), a.values());
        const NONE: usize = usize::MAX;

        // elimination tree and column counts
        let mut parent = vec![NONE; n];
        let mut flag = vec![NONE; n];
        let mut lnz = vec![0usize; n];
        for k in 0..n {
            flag[k] = k;
            let kk = perm[k];
            for p in ap[kk]..ap[kk + 1] {
                let mut i = pinv[ai[p]];
                if i < k {
                    while flag[i] != k {
                        if parent[i] == NONE {
                            parent[i] = k;
                        }
                        lnz[i] += 1;
                        flag[i] = k;
                        i = parent[i];
                    }
                }
            }
        }
        let mut lp = vec![0usize; n + 1];
        for k in 0..n {
            lp[k + 1] = lp[k] + lnz[k];
        }

        let nnz = lp[n];
        let mut li = vec![0usize; nnz];
        let mut lx = vec![T::zero(); nnz];
        let mut d = vec![T::zero(); n];
        let mut y = vec![T::zero(); n];
        let mut pattern = vec![0usize; n];
        flag.iter_mut().for_each(|f| *f = NONE);
        lnz.iter_mut().for_each(|c| *c = 0);
        let scale = a.max_abs().max(T::min_positive_value());
        let tiny = scale * T::epsilon() * T::epsilon();
        let mut perturbed = 0;

        for k in 0..n {
            y[k] = T::zero();
            let mut top = n;
            flag[k] = k;
            let kk = perm[k];
            for p in ap[kk]..ap[kk + 1] {
                let mut i = pinv[ai[p]];
                if i <= k {
                    y[i] += ax[p];
                    let mut len = 0;
                    while flag[i] != k {
                        pattern[len] = i;
                        len += 1;
                        flag[i] = k;
                        i = parent[i];
                    }
                    while len > 0 {
                        top -= 1;
                        len -= 1;
                        pattern[top] = pattern[len];
                    }
                }
            }
            d[k] = y[k];
            y[k] = T::zero();
            for &i in &pattern[top..n] {
                let yi = y[i];
                y[i] = T::zero();
                let p2 = lp[i] + lnz[i];
                for p in lp[i]..p2 {
                    let r = li[p];
                    y[r] -= lx[p] * yi;
                }
                let l_ki = yi / d[i];
                d[k] -= l_ki * yi;
                li[p2] = k;
                lx[p2] = l_ki;
                lnz[i] += 1;
            }
            if !d[k].is_finite() {
                return Err(HodgeError::Factorization(format!(
                    "non-finite pivot at step {k}"
                )));
            }
            if d[k].abs() <= tiny {
                d[k] = if d[k] < T::zero() { -tiny } else { tiny };
                perturbed += 1;
            }
        }
        Ok(LdlFactor {
            n,
            perm,
            lp,
            li,
            lx,
            d,
            perturbed,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz_l(&self) -> usize {
        self.lx.len()
    }

    /// Number of negative pivots, which equals the number of negative eigenvalues.
    pub fn negative_pivots(&self) -> usize {
        self.d.iter().filter(|v| **v < T::zero()).count()
    }

    /// Largest ratio between pivot magnitudes, a cheap conditioning indicator.
    pub fn pivot_spread(&self) -> T {
        let (mut lo, mut hi) = (T::infinity(), T::zero());
        for v in &self.d {
            lo = lo.min(v.abs());
            hi = hi.max(v.abs());
        }
        if self.n == 0 {
            T::one()
        } else {
            hi / lo
        }
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.n;
        let mut x: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for j in 0..n {
            let xj = x[j];
            for p in self.lp[j]..self.lp[j + 1] {
                x[self.li[p]] -= self.lx[p] * xj;
            }
        }
        for j in 0..n {
            x[j] /= self.d[j];
        }
        for j in (0..n).rev() {
            let mut s = x[j];
            for p in self.lp[j]..self.lp[j + 1] {
                s -= self.lx[p] * x[self.li[p]];
            }
            x[j] = s;
        }
        let mut out = vec![T::zero(); n];
        for (k, &p) in self.perm.iter().enumerate() {
            out[p] = x[k];
        }
        out
    }
}

/// Symmetric Ruiz equilibration: returns `s` with `diag(s) A diag(s)` having rows of unit max norm.
pub fn ruiz_scaling<T: Real>(a: &CsrMatrix<T>, sweeps: usize) -> Vec<T> {
    let n = a.nrows();
    let mut s = vec![T::one(); n];
    for _ in 0..sweeps {
        let mut rmax = vec![T::zero(); n];
        for (i, rm) in rmax.iter_mut().enumerate() {
            for (j, v) in a.row(i) {
                *rm = rm.max((s[i] * v * s[j]).abs());
            }
        }
        let mut done = true;
        for i in 0..n {
            if rmax[i] > T::zero() {
                if (rmax[i] - T::one()).abs() > T::c(1e-3) {
                    done = false;
                }
                s[i] /= rmax[i].sqrt();
            }
        }
        if done {
            break;
        }
    }
    s
}

pub fn norm2<T: Real>(x: &[T]) -> T {
    x.iter().map(|v| *v * *v).sum::<T>().sqrt()
}

pub fn dot<T: Real>(x: &[T], y: &[T]) -> T {
    x.iter().zip(y).map(|(a, b)| *a * *b).sum()
}

pub fn axpy<T: Real>(alpha: T, x: &[T], y: &mut [T]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * *xi;
    }
}

fn residual<T: Real>(a: &CsrMatrix<T>, x: &[T], b: &[T]) -> Vec<T> {
    let ax = a.matvec(x);
    b.iter().zip(ax).map(|(bi, ai)| *bi - ai).collect()
}

/// Direct solver for symmetric, possibly indefinite, sparse systems.
///
/// The matrix is equilibrated, regularized to a quasi-definite matrix according to `signs`
/// and factored once. Solves run iterative refinement against the unregularized matrix and fall
/// back to preconditioned GMRES when refinement stalls.
pub struct SymmetricSolver<T> {
    a: CsrMatrix<T>,
    scale: Vec<T>,
    factor: LdlFactor<T>,
    pub tolerance: T,
}

impl<T: Real> SymmetricSolver<T> {
    /// `signs[i]` is the expected sign of the pivot for unknown `i`; `delta` is the relative
    /// regularization applied to the equilibrated matrix.
    pub fn with_signs(a: &CsrMatrix<T>, signs: &[i8], delta: T) -> Result<Self> {
        let n = a.nrows();
        if signs.len() != n || a.ncols() != n {
            return Err(HodgeError::DimensionMismatch {
                expected: n,
                found: signs.len(),
            });
        }
        let scale = ruiz_scaling(a, 20);
        let scaled = a.scale(&scale, &scale);
        let reg: Vec<(usize, usize, T)> = signs
            .iter()
            .enumerate()
            .map(|(i, &s)| (i, i, if s < 0 { -delta } else { delta }))
            .collect();
        let regularized = scaled.add(&CsrMatrix::from_triplets(n, n, reg));
        let factor = LdlFactor::factor(&regularized)?;
        Ok(SymmetricSolver {
            a: a.clone(),
            scale,
            factor,
            tolerance: T::solve_tolerance(),
        })
    }

    /// Chooses regularization signs from the diagonal; zero-diagonal unknowns take the sign
    /// opposite to their neighbours.
    pub fn new(a: &CsrMatrix<T>) -> Result<Self> {
        let n = a.nrows();
        let mut signs = vec![0i8; n];
        for (i, s) in signs.iter_mut().enumerate() {
            let d = a.get(i, i);
            if d > T::zero() {
                *s = 1;
            } else if d < T::zero() {
                *s = -1;
            }
        }
        let fixed = signs.clone();
        for i in 0..n {
            if fixed[i] == 0 {
                let pos = a.row(i).any(|(j, _)| fixed[j] > 0);
                signs[i] = if pos { -1 } else { 1 };
            }
        }
        Self::with_signs(a, &signs, T::c(1e-10))
    }

    pub fn matrix(&self) -> &CsrMatrix<T> {
        &self.a
    }

    pub fn factor(&self) -> &LdlFactor<T> {
        &self.factor
    }

    /// One application of the regularized inverse.
    pub fn precondition(&self, r: &[T]) -> Vec<T> {
        let sr: Vec<T> = r.iter().zip(&self.scale).map(|(v, s)| *v * *s).collect();
        let y = self.factor.solve(&sr);
        y.into_iter()
            .zip(&self.scale)
            .map(|(v, s)| v * *s)
            .collect()
    }

    /// Iterative refinement without a tolerance check; for use inside outer iterations.
    pub fn solve_approx(&self, b: &[T], steps: usize) -> Vec<T> {
        let mut x = self.precondition(b);
        for _ in 1..steps {
            let r = residual(&self.a, &x, b);
            axpy(T::one(), &self.precondition(&r), &mut x);
        }
        x
    }

    /// Solves `A x = b`; returns the solution and its relative residual.
    pub fn solve(&self, b: &[T]) -> Result<(Vec<T>, T)> {
        let n = self.a.nrows();
        if b.len() != n {
            return Err(HodgeError::DimensionMismatch {
                expected: n,
                found: b.len(),
            });
        }
        let bn = norm2(b);
        if bn == T::zero() {
            return Ok((vec![T::zero(); n], T::zero()));
        }
        let mut x = vec![T::zero(); n];
        let mut r = b.to_vec();
        let mut rel = T::one();
        let mut prev = T::infinity();
        for _ in 0..30 {
            let dx = self.precondition(&r);
            axpy(T::one(), &dx, &mut x);
            r = residual(&self.a, &x, b);
            rel = norm2(&r) / bn;
            if rel <= self.tolerance * T::c(0.01) || rel > prev * T::c(0.5) {
                break;
            }
            prev = rel;
        }
        if rel <= self.tolerance {
            return Ok((x, rel));
        }
        let x = gmres(
            &self.a,
            b,
            x,
            |v| self.precondition(v),
            self.tolerance * T::c(0.1),
            60,
            20,
        );
        let rel = norm2(&residual(&self.a, &x, b)) / bn;
        if rel <= self.tolerance {
            Ok((x, rel))
        } else {
            Err(HodgeError::SolveTolerance {
                residual: rel.to_f64_lossy(),
            })
        }
    }
}

/// Solves a sparse symmetric system (both triangles stored).
pub fn solve_symmetric_indefinite<T: Real>(a: &CsrMatrix<T>, b: &[T]) -> Result<Vec<T>> {
    if a.asymmetry() > a.max_abs() * T::epsilon() * T::c(100.0) {
        return Err(HodgeError::Input("matrix is not symmetric".into()));
    }
    SymmetricSolver::new(a)?.solve(b).map(|(x, _)| x)
}

/// Right-preconditioned restarted GMRES.
pub fn gmres<T: Real, P: Fn(&[T]) -> Vec<T>>(
    a: &CsrMatrix<T>,
    b: &[T],
    mut x: Vec<T>,
    precond: P,
    tol: T,
    restart: usize,
    cycles: usize,
) -> Vec<T> {
    let bn = norm2(b);
    if bn == T::zero() {
        return vec![T::zero(); b.len()];
    }
    for _ in 0..cycles {
        let r = residual(a, &x, b);
        let beta = norm2(&r);
        if beta <= tol * bn {
            break;
        }
        let mut v: Vec<Vec<T>> = vec![r.iter().map(|t| *t / beta).collect()];
        let mut z: Vec<Vec<T>> = Vec::new();
        let mut h = vec![vec![T::zero(); restart]; restart + 1];
        let (mut cs, mut sn) = (vec![T::zero(); restart], vec![T::zero(); restart]);
        let mut g = vec![T::zero(); restart + 1];
        g[0] = beta;
        let mut m = 0;
        for j in 0..restart {
            let zj = precond(&v[j]);
            let mut w = a.matvec(&zj);
            z.push(zj);
            for i in 0..=j {
                h[i][j] = dot(&w, &v[i]);
                axpy(-h[i][j], &v[i], &mut w);
            }
            h[j + 1][j] = norm2(&w);
            for i in 0..j {
                let t = cs[i] * h[i][j] + sn[i] * h[i + 1][j];
                h[i + 1][j] = -sn[i] * h[i][j] + cs[i] * h[i + 1][j];
                h[i][j] = t;
            }
            let den = (h[j][j] * h[j][j] + h[j + 1][j] * h[j + 1][j]).sqrt();
            if den == T::zero() {
                m = j;
                break;
            }
            cs[j] = h[j][j] / den;
            sn[j] = h[j + 1][j] / den;
            h[j][j] = den;
            g[j + 1] = -sn[j] * g[j];
            g[j] = cs[j] * g[j];
            m = j + 1;
            if g[j + 1].abs() <= tol * bn || h[j + 1][j] == T::zero() {
                break;
            }
            let hn = h[j + 1][j];
            v.push(w.iter().map(|t| *t / hn).collect());
        }
        let mut y = vec![T::zero(); m];
        for i in (0..m).rev() {
            let mut s = g[i];
            for k in i + 1..m {
                s -= h[i][k] * y[k];
            }
            y[i] = s / h[i][i];
        }
        for (i, yi) in y.iter().enumerate() {
            axpy(*yi, &z[i], &mut x);
        }
    }
    x
}

/// Eigen-decomposition of a small symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues ascending and the matching eigenvectors as columns (`vecs[i][j]` row `i`).
pub fn symmetric_eigen<T: Real>(a: &[Vec<T>]) -> Result<(Vec<T>, Vec<Vec<T>>)> {
    let n = a.len();
    let mut m: Vec<Vec<T>> = a.to_vec();
    let mut v = vec![vec![T::zero(); n]; n];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = T::one();
    }
    let total: T = m.iter().flatten().map(|x| *x * *x).sum::<T>().sqrt();
    let mut converged = n < 2;
    for _ in 0..100 {
        let off: T = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i][j] * m[i][j])
            .sum::<T>()
            .sqrt();
        if off <= T::epsilon() * total || off == T::zero() {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q] == T::zero() {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (T::c(2.0) * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    if !converged {
        return Err(HodgeError::EigenNonConvergence(
            "Jacobi sweeps exhausted".into(),
        ));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| {
        m[i][i]
            .partial_cmp(&m[j][j])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let vals = idx.iter().map(|&i| m[i][i]).collect();
    let vecs = (0..n)
        .map(|r| idx.iter().map(|&i| v[r][i]).collect())
        .collect();
    Ok((vals, vecs))
}

/// Dense LU with partial pivoting; small systems and test oracles.
pub fn dense_solve<T: Real>(a: &[Vec<T>], b: &[T]) -> Result<Vec<T>> {
    let n = a.len();
    let mut m: Vec<Vec<T>> = a.to_vec();
    let mut x = b.to_vec();
    for k in 0..n {
        let p = (k..n)
            .max_by(|&i, &j| {
                m[i][k]
                    .abs()
                    .partial_cmp(&m[j][k].abs())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .unwrap();
        if m[p][k] == T::zero() {
            return Err(HodgeError::Factorization("singular dense matrix".into()));
        }
        m.swap(k, p);
        x.swap(k, p);
        for i in k + 1..n {
            let f = m[i][k] / m[k][k];
            for j in k..n {
                let t = m[k][j];
                m[i][j] -= f * t;
            }
            let t = x[k];
            x[i] -= f * t;
        }
    }
    for k in (0..n).rev() {
        let mut s = x[k];
        for j in k + 1..n {
            s -= m[k][j] * x[j];
        }
        x[k] = s / m[k][k];
    }
    Ok(x)
}
