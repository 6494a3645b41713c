//! Lowest-order trimmed spaces of differential forms on a triangle mesh.
//!
//! Proxies: 0- and 2-forms are scalars, 1-forms are vectors. `d⁰ = grad`, `d¹ = rot`,
//! `δ¹ = -div`, `δ² s = (∂₂s, -∂₁s)`, `⋆(v₁, v₂) = (-v₂, v₁)`.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{HodgeError, Result};
use crate::mesh::Mesh;
use crate::quadrature::{edge_rule2, edge_rule3, triangle_rule};
use crate::scalar::{dot, Point, Real};
use crate::sparse::CsrMatrix;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Proxy<T> {
    Scalar(T),
    Vector([T; 2]),
}

impl<T: Real> Proxy<T> {
    pub fn zero(k: usize) -> Self {
        if k == 1 {
            Proxy::Vector([T::zero(); 2])
        } else {
            Proxy::Scalar(T::zero())
        }
    }

    pub fn scalar(self) -> T {
        match self {
            Proxy::Scalar(s) => s,
            Proxy::Vector(_) => panic!("vector proxy used as scalar"),
        }
    }

    pub fn vector(self) -> [T; 2] {
        match self {
            Proxy::Vector(v) => v,
            Proxy::Scalar(_) => panic!("scalar proxy used as vector"),
        }
    }

    pub fn norm_sq(self) -> T {
        match self {
            Proxy::Scalar(s) => s * s,
            Proxy::Vector(v) => dot(v, v),
        }
    }

    pub fn axpy(self, alpha: T, other: Self) -> Self {
        match (self, other) {
            (Proxy::Scalar(a), Proxy::Scalar(b)) => Proxy::Scalar(a + alpha * b),
            (Proxy::Vector(a), Proxy::Vector(b)) => {
                Proxy::Vector([a[0] + alpha * b[0], a[1] + alpha * b[1]])
            }
            _ => panic!("mixed proxy kinds"),
        }
    }

    pub fn sub(self, other: Self) -> Self {
        self.axpy(-T::one(), other)
    }
}

/// Per-triangle geometric data.
#[derive(Clone, Copy, Debug)]
pub struct Element<T> {
    pub p: [Point<T>; 3],
    pub area: T,
    /// Gradients of the barycentric coordinates.
    pub grad: [Point<T>; 3],
}

impl<T: Real> Element<T> {
    pub fn new(mesh: &Mesh<T>, t: usize) -> Self {
        let p = mesh.corners(t);
        let area = mesh.area(t);
        let two = T::c(2.0) * area;
        let grad = std::array::from_fn(|i| {
            let (a, b) = (p[(i + 1) % 3], p[(i + 2) % 3]);
            [(a[1] - b[1]) / two, (b[0] - a[0]) / two]
        });
        Element { p, area, grad }
    }

    pub fn point(&self, l: [T; 3]) -> Point<T> {
        [
            l[0] * self.p[0][0] + l[1] * self.p[1][0] + l[2] * self.p[2][0],
            l[0] * self.p[0][1] + l[1] * self.p[1][1] + l[2] * self.p[2][1],
        ]
    }

    pub fn barycentric(&self, x: Point<T>) -> [T; 3] {
        let l1 = dot(self.grad[1], [x[0] - self.p[0][0], x[1] - self.p[0][1]]);
        let l2 = dot(self.grad[2], [x[0] - self.p[0][0], x[1] - self.p[0][1]]);
        [T::one() - l1 - l2, l1, l2]
    }

    /// Counter-clockwise Whitney function of local edge `i`: `λ_a∇λ_b − λ_b∇λ_a`, `a = i+1`, `b = i+2`.
    pub fn whitney(&self, i: usize, l: [T; 3]) -> Point<T> {
        let (a, b) = ((i + 1) % 3, (i + 2) % 3);
        let (ga, gb) = (self.grad[a], self.grad[b]);
        [l[a] * gb[0] - l[b] * ga[0], l[a] * gb[1] - l[b] * ga[1]]
    }

    /// Rot of the counter-clockwise Whitney function of any local edge: `1/|K|`.
    pub fn whitney_rot(&self) -> T {
        T::one() / self.area
    }

    /// Quadrature points in physical coordinates with weights including the area.
    pub fn quadrature(&self) -> impl Iterator<Item = ([T; 3], Point<T>, T)> + '_ {
        triangle_rule::<T>()
            .into_iter()
            .map(move |(l, w)| (l, self.point(l), w * self.area))
    }
}

#[derive(Clone)]
pub struct FormSpace<T> {
    k: usize,
    mesh: Arc<Mesh<T>>,
}

impl<T> fmt::Debug for FormSpace<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FormSpace")
            .field("k", &self.k)
            .finish_non_exhaustive()
    }
}

/// Entities carrying the degrees of freedom.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DofEntity {
    Vertex,
    Edge,
    Triangle,
}

impl<T: Real> FormSpace<T> {
    pub fn new(mesh: Arc<Mesh<T>>, k: usize) -> Result<Self> {
        if k > 2 {
            return Err(HodgeError::Degree(k));
        }
        Ok(FormSpace { k, mesh })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Polynomial degree of the family; fixed to the lowest order.
    pub fn degree(&self) -> usize {
        1
    }

    pub fn mesh(&self) -> &Arc<Mesh<T>> {
        &self.mesh
    }

    pub fn dof_entity(&self) -> DofEntity {
        match self.k {
            0 => DofEntity::Vertex,
            1 => DofEntity::Edge,
            _ => DofEntity::Triangle,
        }
    }

    pub fn ndof(&self) -> usize {
        match self.k {
            0 => self.mesh.num_vertices(),
            1 => self.mesh.num_edges(),
            _ => self.mesh.num_triangles(),
        }
    }

    /// Global dofs of triangle `t` with their orientation signs.
    pub fn local_dofs(&self, t: usize) -> (Vec<usize>, Vec<T>) {
        match self.k {
            0 => (self.mesh.triangles()[t].to_vec(), vec![T::one(); 3]),
            1 => (
                self.mesh.triangle_edges(t).to_vec(),
                self.mesh
                    .triangle_edge_signs(t)
                    .iter()
                    .map(|&s| T::c(f64::from(s)))
                    .collect(),
            ),
            _ => (vec![t], vec![T::one()]),
        }
    }

    pub fn zeros(&self) -> CoefficientVector<T> {
        CoefficientVector {
            space: self.clone(),
            values: vec![T::zero(); self.ndof()],
        }
    }

    pub fn vector(&self, values: Vec<T>) -> Result<CoefficientVector<T>> {
        CoefficientVector::new(self.clone(), values)
    }

    /// Integer incidence `D_k` from `V^k` dofs to `V^{k+1}` cochains.
    pub fn derivative_matrix(&self) -> Result<CsrMatrix<i32>> {
        let m = &self.mesh;
        match self.k {
            0 => Ok(CsrMatrix::from_triplets(
                m.num_edges(),
                m.num_vertices(),
                m.edges()
                    .iter()
                    .enumerate()
                    .flat_map(|(e, ed)| [(e, ed.vertices[0], -1), (e, ed.vertices[1], 1)])
                    .collect(),
            )),
            1 => Ok(CsrMatrix::from_triplets(
                m.num_triangles(),
                m.num_edges(),
                (0..m.num_triangles())
                    .flat_map(|t| {
                        let (te, ts) = (m.triangle_edges(t), m.triangle_edge_signs(t));
                        (0..3).map(move |i| (t, te[i], i32::from(ts[i])))
                    })
                    .collect(),
            )),
            k => Err(HodgeError::NoHigherSpace(k)),
        }
    }

    /// Exterior derivative acting on coefficient vectors. Equals the incidence for `k = 0`;
    /// for `k = 1` the incidence is divided by the triangle areas since 2-form coefficients are means.
    pub fn coefficient_derivative(&self) -> Result<CsrMatrix<T>> {
        let d = crate::sparse::to_real::<T>(&self.derivative_matrix()?);
        if self.k == 0 {
            return Ok(d);
        }
        let inv: Vec<T> = (0..self.mesh.num_triangles())
            .map(|t| T::one() / self.mesh.area(t))
            .collect();
        let ones = vec![T::one(); d.ncols()];
        Ok(d.scale(&inv, &ones))
    }

    fn local_mass(&self, el: &Element<T>) -> Vec<Vec<T>> {
        let a = el.area;
        match self.k {
            0 => (0..3)
                .map(|i| {
                    (0..3)
                        .map(|j| a / T::c(12.0) * if i == j { T::c(2.0) } else { T::one() })
                        .collect()
                })
                .collect(),
            1 => {
                let m =
                    |x: usize, y: usize| a / T::c(12.0) * if x == y { T::c(2.0) } else { T::one() };
                let g = |x: usize, y: usize| dot(el.grad[x], el.grad[y]);
                (0..3)
                    .map(|i| {
                        let (a1, b1) = ((i + 1) % 3, (i + 2) % 3);
                        (0..3)
                            .map(|j| {
                                let (c1, d1) = ((j + 1) % 3, (j + 2) % 3);
                                m(a1, c1) * g(b1, d1)
                                    - m(a1, d1) * g(b1, c1)
                                    - m(b1, c1) * g(a1, d1)
                                    + m(b1, d1) * g(a1, c1)
                            })
                            .collect()
                    })
                    .collect()
            }
            _ => vec![vec![a]],
        }
    }

    /// Exact mass matrix of the space.
    pub fn mass_matrix(&self) -> Result<CsrMatrix<T>> {
        let n = self.ndof();
        let trip: Vec<(usize, usize, T)> = (0..self.mesh.num_triangles())
            .into_par_iter()
            .map(|t| {
                let el = Element::new(&self.mesh, t);
                if !(el.area > T::zero()) {
                    return Err(HodgeError::Geometry(format!("triangle {t} is degenerate")));
                }
                let (dofs, signs) = self.local_dofs(t);
                let lm = self.local_mass(&el);
                let mut out = Vec::with_capacity(dofs.len() * dofs.len());
                for i in 0..dofs.len() {
                    for j in 0..dofs.len() {
                        out.push((dofs[i], dofs[j], signs[i] * signs[j] * lm[i][j]));
                    }
                }
                Ok(out)
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .flatten()
            .collect();
        Ok(CsrMatrix::from_triplets(n, n, trip))
    }

    /// Canonical interpolation: vertex values, edge tangential integrals, element means.
    pub fn interpolate(&self, g: &AnalyticForm<T>) -> Result<CoefficientVector<T>> {
        if g.k() != self.k {
            return Err(HodgeError::DegreeMismatch {
                expected: self.k,
                found: g.k(),
            });
        }
        let m = &self.mesh;
        let values: Vec<T> = match self.k {
            0 => {
                let vt = m.vertex_triangle();
                m.vertices()
                    .iter()
                    .enumerate()
                    .map(|(v, &p)| g.eval_in(m.root()[vt[v]], p).scalar())
                    .collect()
            }
            1 => (0..m.num_edges())
                .into_par_iter()
                .map(|e| {
                    let ed = &m.edges()[e];
                    let root = m.root()[ed.triangles().next().unwrap()];
                    let [a, b] = ed.vertices;
                    let d = crate::scalar::sub(m.vertices()[b], m.vertices()[a]);
                    edge_rule2::<T>()
                        .iter()
                        .map(|&(s, w)| w * dot(g.eval_in(root, m.edge_point(e, s)).vector(), d))
                        .sum()
                })
                .collect(),
            _ => (0..m.num_triangles())
                .into_par_iter()
                .map(|t| {
                    let el = Element::new(m, t);
                    let root = m.root()[t];
                    el.quadrature()
                        .map(|(_, x, w)| w * g.eval_in(root, x).scalar())
                        .sum::<T>()
                        / el.area
                })
                .collect(),
        };
        self.vector(values)
    }
}

pub type FieldFn<T> = Arc<dyn Fn(usize, Point<T>) -> Proxy<T> + Send + Sync>;

/// Closed-form differential form, optionally with its exterior derivative and coderivative.
///
/// Closures receive the id of the initial-mesh triangle containing the point, so data may be
/// piecewise smooth with respect to the initial mesh.
#[derive(Clone)]
pub struct AnalyticForm<T> {
    k: usize,
    value: FieldFn<T>,
    exterior: Option<FieldFn<T>>,
    coderivative: Option<FieldFn<T>>,
}

impl<T> fmt::Debug for AnalyticForm<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AnalyticForm")
            .field("k", &self.k)
            .field("has_d", &self.exterior.is_some())
            .field("has_delta", &self.coderivative.is_some())
            .finish()
    }
}

impl<T: Real> AnalyticForm<T> {
    pub fn piecewise(
        k: usize,
        f: impl Fn(usize, Point<T>) -> Proxy<T> + Send + Sync + 'static,
    ) -> Self {
        AnalyticForm {
            k,
            value: Arc::new(f),
            exterior: None,
            coderivative: None,
        }
    }

    pub fn scalar(k: usize, f: impl Fn(Point<T>) -> T + Send + Sync + 'static) -> Self {
        Self::piecewise(k, move |_, p| Proxy::Scalar(f(p)))
    }

    pub fn vector(f: impl Fn(Point<T>) -> [T; 2] + Send + Sync + 'static) -> Self {
        Self::piecewise(1, move |_, p| Proxy::Vector(f(p)))
    }

    pub fn zero(k: usize) -> Self {
        Self::piecewise(k, move |_, _| Proxy::zero(k))
            .with_exterior_piecewise(move |_, _| Proxy::zero(k + 1))
            .with_coderivative_piecewise(move |_, _| Proxy::zero(k.saturating_sub(1)))
    }

    pub fn with_exterior_piecewise(
        mut self,
        f: impl Fn(usize, Point<T>) -> Proxy<T> + Send + Sync + 'static,
    ) -> Self {
        self.exterior = Some(Arc::new(f));
        self
    }

    pub fn with_coderivative_piecewise(
        mut self,
        f: impl Fn(usize, Point<T>) -> Proxy<T> + Send + Sync + 'static,
    ) -> Self {
        self.coderivative = Some(Arc::new(f));
        self
    }

    /// Attaches `d` given as a proxy-valued function of position.
    pub fn with_exterior(self, f: impl Fn(Point<T>) -> Proxy<T> + Send + Sync + 'static) -> Self {
        self.with_exterior_piecewise(move |_, p| f(p))
    }

    pub fn with_coderivative(
        self,
        f: impl Fn(Point<T>) -> Proxy<T> + Send + Sync + 'static,
    ) -> Self {
        self.with_coderivative_piecewise(move |_, p| f(p))
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn eval(&self, p: Point<T>) -> Proxy<T> {
        (self.value)(0, p)
    }

    pub fn eval_in(&self, root: usize, p: Point<T>) -> Proxy<T> {
        (self.value)(root, p)
    }

    pub fn exterior_in(&self, root: usize, p: Point<T>) -> Option<Proxy<T>> {
        self.exterior.as_ref().map(|f| f(root, p))
    }

    pub fn coderivative_in(&self, root: usize, p: Point<T>) -> Option<Proxy<T>> {
        self.coderivative.as_ref().map(|f| f(root, p))
    }

    pub fn has_exterior(&self) -> bool {
        self.exterior.is_some()
    }

    pub fn has_coderivative(&self) -> bool {
        self.coderivative.is_some()
    }
}

/// Anything that can be evaluated elementwise as a form of fixed degree.
pub trait FormField<T: Real>: Sync {
    fn degree(&self) -> usize;
    fn eval_on(&self, mesh: &Mesh<T>, t: usize, x: Point<T>) -> Proxy<T>;
}

impl<T: Real> FormField<T> for AnalyticForm<T> {
    fn degree(&self) -> usize {
        self.k
    }

    fn eval_on(&self, mesh: &Mesh<T>, t: usize, x: Point<T>) -> Proxy<T> {
        self.eval_in(mesh.root()[t], x)
    }
}

/// Linear combination `Σ cᵢ Fᵢ` of fields of the same degree.
pub struct Combination<'a, T: Real> {
    k: usize,
    terms: Vec<(T, &'a dyn FormField<T>)>,
}

impl<'a, T: Real> Combination<'a, T> {
    pub fn new(k: usize) -> Self {
        Combination {
            k,
            terms: Vec::new(),
        }
    }

    pub fn term(mut self, c: T, f: &'a dyn FormField<T>) -> Result<Self> {
        if f.degree() != self.k {
            return Err(HodgeError::DegreeMismatch {
                expected: self.k,
                found: f.degree(),
            });
        }
        self.terms.push((c, f));
        Ok(self)
    }
}

impl<T: Real> FormField<T> for Combination<'_, T> {
    fn degree(&self) -> usize {
        self.k
    }

    fn eval_on(&self, mesh: &Mesh<T>, t: usize, x: Point<T>) -> Proxy<T> {
        self.terms.iter().fold(Proxy::zero(self.k), |acc, (c, f)| {
            acc.axpy(*c, f.eval_on(mesh, t, x))
        })
    }
}

/// Piecewise-constant proxy field given per triangle.
pub struct ElementwiseField<T> {
    pub k: usize,
    pub values: Vec<Proxy<T>>,
}

impl<T: Real> FormField<T> for ElementwiseField<T> {
    fn degree(&self) -> usize {
        self.k
    }

    fn eval_on(&self, _: &Mesh<T>, t: usize, _: Point<T>) -> Proxy<T> {
        self.values[t]
    }
}

#[derive(Clone, Debug)]
pub struct CoefficientVector<T> {
    space: FormSpace<T>,
    values: Vec<T>,
}

impl<T: Real> CoefficientVector<T> {
    pub fn new(space: FormSpace<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != space.ndof() {
            return Err(HodgeError::DimensionMismatch {
                expected: space.ndof(),
                found: values.len(),
            });
        }
        Ok(CoefficientVector { space, values })
    }

    pub fn space(&self) -> &FormSpace<T> {
        &self.space
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn k(&self) -> usize {
        self.space.k
    }

    /// Proxy value at barycentric coordinates `l` of triangle `t`.
    pub fn eval_local(&self, el: &Element<T>, t: usize, l: [T; 3]) -> Proxy<T> {
        let m = &self.space.mesh;
        match self.space.k {
            0 => {
                let tri = m.triangles()[t];
                Proxy::Scalar((0..3).map(|i| self.values[tri[i]] * l[i]).sum())
            }
            1 => {
                let (te, ts) = (m.triangle_edges(t), m.triangle_edge_signs(t));
                let mut v = [T::zero(); 2];
                for i in 0..3 {
                    let c = self.values[te[i]] * T::c(f64::from(ts[i]));
                    let w = el.whitney(i, l);
                    v[0] += c * w[0];
                    v[1] += c * w[1];
                }
                Proxy::Vector(v)
            }
            _ => Proxy::Scalar(self.values[t]),
        }
    }

    /// Elementwise exterior derivative: gradient vectors for `k = 0`, rot scalars for `k = 1`.
    pub fn elementwise_derivative(&self) -> Result<Vec<Proxy<T>>> {
        let m = &self.space.mesh;
        match self.space.k {
            0 => Ok((0..m.num_triangles())
                .map(|t| {
                    let el = Element::new(m, t);
                    let tri = m.triangles()[t];
                    let mut g = [T::zero(); 2];
                    for i in 0..3 {
                        g[0] += self.values[tri[i]] * el.grad[i][0];
                        g[1] += self.values[tri[i]] * el.grad[i][1];
                    }
                    Proxy::Vector(g)
                })
                .collect()),
            1 => Ok((0..m.num_triangles())
                .map(|t| {
                    let (te, ts) = (m.triangle_edges(t), m.triangle_edge_signs(t));
                    let circ: T = (0..3)
                        .map(|i| self.values[te[i]] * T::c(f64::from(ts[i])))
                        .sum();
                    Proxy::Scalar(circ / m.area(t))
                })
                .collect()),
            k => Err(HodgeError::NoHigherSpace(k)),
        }
    }

    /// Elementwise coderivative: `-div` for `k = 1`, the rotated gradient for `k = 2`.
    pub fn elementwise_coderivative(&self) -> Result<Vec<Proxy<T>>> {
        let m = &self.space.mesh;
        match self.space.k {
            1 => Ok((0..m.num_triangles())
                .map(|t| {
                    let el = Element::new(m, t);
                    let (te, ts) = (m.triangle_edges(t), m.triangle_edge_signs(t));
                    // div(λ_a∇λ_b − λ_b∇λ_a) = ∇λ_a·∇λ_b − ∇λ_b·∇λ_a
                    let div: T = (0..3)
                        .map(|i| {
                            let (a, b) = ((i + 1) % 3, (i + 2) % 3);
                            let c = self.values[te[i]] * T::c(f64::from(ts[i]));
                            c * (dot(el.grad[a], el.grad[b]) - dot(el.grad[b], el.grad[a]))
                        })
                        .sum();
                    Proxy::Scalar(-div)
                })
                .collect()),
            2 => Ok(vec![Proxy::Vector([T::zero(); 2]); m.num_triangles()]),
            k => Err(HodgeError::UndefinedCoderivative(k)),
        }
    }

    /// `(‖v − g‖, ‖dv − dg‖)` by quadrature; `None` compares against zero.
    pub fn norms(&self, reference: Option<&AnalyticForm<T>>) -> Result<(T, T)> {
        let k = self.space.k;
        if let Some(g) = reference {
            if g.k() != k {
                return Err(HodgeError::DegreeMismatch {
                    expected: k,
                    found: g.k(),
                });
            }
            if k < 2 && !g.has_exterior() {
                return Err(HodgeError::MissingExact);
            }
        }
        let dv = if k < 2 {
            Some(self.elementwise_derivative()?)
        } else {
            None
        };
        let m = &self.space.mesh;
        let (l2, dl2) = (0..m.num_triangles())
            .into_par_iter()
            .map(|t| {
                let el = Element::new(m, t);
                let root = m.root()[t];
                let mut s = (T::zero(), T::zero());
                for (l, x, w) in el.quadrature() {
                    let mut e = self.eval_local(&el, t, l);
                    if let Some(g) = reference {
                        e = e.sub(g.eval_in(root, x));
                    }
                    s.0 += w * e.norm_sq();
                    if let Some(dv) = &dv {
                        let mut de = dv[t];
                        if let Some(g) = reference {
                            de = de.sub(g.exterior_in(root, x).unwrap());
                        }
                        s.1 += w * de.norm_sq();
                    }
                }
                s
            })
            .collect::<Vec<_>>()
            .into_iter()
            .fold((T::zero(), T::zero()), |a, b| (a.0 + b.0, a.1 + b.1));
        Ok((l2.sqrt(), dl2.sqrt()))
    }

    /// Exact transfer to a nested finer mesh; `child_to_parent` maps fine triangles to coarse ones.
    pub fn prolong(
        &self,
        fine: &FormSpace<T>,
        child_to_parent: &[usize],
    ) -> Result<CoefficientVector<T>> {
        if fine.k != self.space.k {
            return Err(HodgeError::DegreeMismatch {
                expected: self.space.k,
                found: fine.k,
            });
        }
        let fm = &fine.mesh;
        if child_to_parent.len() != fm.num_triangles() {
            return Err(HodgeError::NonNested);
        }
        let cm = &self.space.mesh;
        let eval_at = |ft: usize, x: Point<T>| {
            let ct = child_to_parent[ft];
            let el = Element::new(cm, ct);
            self.eval_local(&el, ct, el.barycentric(x))
        };
        let values: Vec<T> = match fine.k {
            0 => {
                let vt = fm.vertex_triangle();
                fm.vertices()
                    .iter()
                    .enumerate()
                    .map(|(v, &x)| eval_at(vt[v], x).scalar())
                    .collect()
            }
            1 => (0..fm.num_edges())
                .into_par_iter()
                .map(|e| {
                    let ed = &fm.edges()[e];
                    let ft = ed.triangles().next().unwrap();
                    let [a, b] = ed.vertices;
                    let d = crate::scalar::sub(fm.vertices()[b], fm.vertices()[a]);
                    edge_rule2::<T>()
                        .iter()
                        .map(|&(s, w)| w * dot(eval_at(ft, fm.edge_point(e, s)).vector(), d))
                        .sum()
                })
                .collect(),
            _ => child_to_parent.iter().map(|&p| self.values[p]).collect(),
        };
        fine.vector(values)
    }
}

impl<T: Real> FormField<T> for CoefficientVector<T> {
    fn degree(&self) -> usize {
        self.space.k
    }

    fn eval_on(&self, mesh: &Mesh<T>, t: usize, x: Point<T>) -> Proxy<T> {
        let el = Element::new(mesh, t);
        self.eval_local(&el, t, el.barycentric(x))
    }
}

/// Edge quadrature points (parameter along low → high) shared by all jump computations.
pub fn edge_points<T: Real>() -> [(T, T); 3] {
    edge_rule3()
}

/// Jump of the normal trace (`k = 1`) or of the value (`k = 2`) across edge `e` at the three
/// edge quadrature points. Boundary edges return the one-sided trace.
pub fn trace_star_jump<T: Real>(
    field: &dyn FormField<T>,
    mesh: &Mesh<T>,
    e: usize,
) -> Result<[T; 3]> {
    mesh.check_edge(e)?;
    let k = field.degree();
    if k == 0 {
        return Err(HodgeError::Degree(0));
    }
    let ed = &mesh.edges()[e];
    let n = mesh.edge_normal(e);
    let trace = |t: usize, x: Point<T>| match field.eval_on(mesh, t, x) {
        Proxy::Vector(v) => dot(v, n),
        Proxy::Scalar(s) => s,
    };
    let pts = edge_points::<T>();
    Ok(std::array::from_fn(|q| {
        let x = mesh.edge_point(e, pts[q].0);
        match (ed.plus, ed.minus) {
            (Some(p), Some(m)) => trace(p, x) - trace(m, x),
            (Some(t), None) | (None, Some(t)) => trace(t, x),
            (None, None) => T::zero(),
        }
    }))
}

/// Standard jump function type; an injectable stand-in lets the diagnostics mutate the convention.
pub type JumpFn<T> = fn(&dyn FormField<T>, &Mesh<T>, usize) -> Result<[T; 3]>;
