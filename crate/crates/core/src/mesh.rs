//! Conforming triangle meshes refined by newest-vertex bisection.
//!
//! A triangle `[a, b, c]` is stored counter-clockwise with `c` its newest vertex, so its
//! refinement edge is `(a, b)`. Local edge `i` is the edge opposite local vertex `i`; the
//! refinement edge is therefore always local edge 2.

use std::collections::{BTreeSet, HashMap};
use std::io::{BufRead, Write};

use serde::Serialize;

use crate::error::{HodgeError, Result};
use crate::scalar::{norm, sub, Point, Real};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Edge {
    /// Endpoints, low id first. The edge is oriented low → high.
    pub vertices: [usize; 2],
    /// Triangle whose counter-clockwise boundary runs low → high (edge normal points out of it).
    pub plus: Option<usize>,
    /// Triangle whose counter-clockwise boundary runs high → low.
    pub minus: Option<usize>,
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.plus.is_none() || self.minus.is_none()
    }

    pub fn triangles(&self) -> impl Iterator<Item = usize> + '_ {
        self.plus.iter().chain(self.minus.iter()).copied()
    }
}

#[derive(Clone, Debug)]
pub struct Mesh<T> {
    vertices: Vec<Point<T>>,
    triangles: Vec<[usize; 3]>,
    generation: Vec<u32>,
    root: Vec<usize>,
    edges: Vec<Edge>,
    tri_edges: Vec<[usize; 3]>,
    tri_edge_sign: Vec<[i8; 3]>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeshMetrics {
    pub min_angle: f64,
    pub max_h: f64,
    pub triangles: usize,
    pub edges: usize,
    pub vertices: usize,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct RefinementRecord {
    pub parent_to_children: Vec<Vec<usize>>,
    pub child_to_parent: Vec<usize>,
    pub refined_set: BTreeSet<usize>,
    pub marked_set: BTreeSet<usize>,
}

impl RefinementRecord {
    /// Record of a refinement that changed nothing.
    pub fn identity(ntri: usize) -> Self {
        RefinementRecord {
            parent_to_children: (0..ntri).map(|t| vec![t]).collect(),
            child_to_parent: (0..ntri).collect(),
            refined_set: BTreeSet::new(),
            marked_set: BTreeSet::new(),
        }
    }

    /// Chains `self` (coarse → mid) with `next` (mid → fine).
    pub fn compose(&self, next: &RefinementRecord) -> RefinementRecord {
        let child_to_parent: Vec<usize> = next
            .child_to_parent
            .iter()
            .map(|&m| self.child_to_parent[m])
            .collect();
        let mut parent_to_children = vec![Vec::new(); self.parent_to_children.len()];
        for (c, &p) in child_to_parent.iter().enumerate() {
            parent_to_children[p].push(c);
        }
        let refined_set = parent_to_children
            .iter()
            .enumerate()
            .filter(|(_, c)| c.len() >= 2)
            .map(|(p, _)| p)
            .collect();
        RefinementRecord {
            parent_to_children,
            child_to_parent,
            refined_set,
            marked_set: self.marked_set.clone(),
        }
    }
}

fn signed_area<T: Real>(p: [Point<T>; 3]) -> T {
    let u = sub(p[1], p[0]);
    let v = sub(p[2], p[0]);
    (u[0] * v[1] - u[1] * v[0]) * T::c(0.5)
}

impl<T: Real> Mesh<T> {
    /// Builds a mesh whose triangles already carry their refinement edge at local position 2.
    pub fn new(
        vertices: Vec<Point<T>>,
        triangles: Vec<[usize; 3]>,
        generation: Vec<u32>,
        root: Vec<usize>,
    ) -> Result<Self> {
        if generation.len() != triangles.len() || root.len() != triangles.len() {
            return Err(HodgeError::Input(
                "genealogy arrays must match triangle count".into(),
            ));
        }
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= vertices.len())
                || tri[0] == tri[1]
                || tri[1] == tri[2]
                || tri[0] == tri[2]
            {
                return Err(HodgeError::Geometry(format!(
                    "triangle {t} has invalid vertices {tri:?}"
                )));
            }
            let a = signed_area([vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]]);
            if !(a > T::zero()) {
                return Err(HodgeError::Geometry(format!(
                    "triangle {t} has non-positive signed area {a}"
                )));
            }
        }
        let mut lookup: HashMap<(usize, usize), usize> =
            HashMap::with_capacity(triangles.len() * 2);
        let mut edges: Vec<Edge> = Vec::with_capacity(triangles.len() * 2);
        let mut tri_edges = Vec::with_capacity(triangles.len());
        let mut tri_edge_sign = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            let mut te = [0usize; 3];
            let mut ts = [0i8; 3];
            for i in 0..3 {
                let (s, e) = (tri[(i + 1) % 3], tri[(i + 2) % 3]);
                let key = (s.min(e), s.max(e));
                let id = *lookup.entry(key).or_insert_with(|| {
                    edges.push(Edge {
                        vertices: [key.0, key.1],
                        plus: None,
                        minus: None,
                    });
                    edges.len() - 1
                });
                let slot = if s < e {
                    &mut edges[id].plus
                } else {
                    &mut edges[id].minus
                };
                if slot.is_some() {
                    return Err(HodgeError::NonConforming(format!(
                        "edge ({}, {}) traversed twice in the same direction (triangle {t})",
                        key.0, key.1
                    )));
                }
                *slot = Some(t);
                te[i] = id;
                ts[i] = if s < e { 1 } else { -1 };
            }
            tri_edges.push(te);
            tri_edge_sign.push(ts);
        }
        let mut mesh = Mesh {
            vertices,
            triangles,
            generation,
            root,
            edges,
            tri_edges,
            tri_edge_sign,
        };
        mesh.check_vertices_used()?;
        mesh.vertices.shrink_to_fit();
        Ok(mesh)
    }

    /// Builds an initial mesh: orients triangles counter-clockwise and takes the longest edge as
    /// refinement edge, ties going to the edge whose opposite vertex has the smallest id.
    pub fn from_raw(vertices: Vec<Point<T>>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        let mut tris = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= vertices.len()) {
                return Err(HodgeError::Geometry(format!(
                    "triangle {t} references a missing vertex"
                )));
            }
            let mut tri = *tri;
            if signed_area([vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]]) < T::zero() {
                tri.swap(0, 1);
            }
            let len2 = |i: usize| {
                let d = sub(vertices[tri[(i + 1) % 3]], vertices[tri[(i + 2) % 3]]);
                d[0] * d[0] + d[1] * d[1]
            };
            let mut best = 0;
            for i in 1..3 {
                let (li, lb) = (len2(i), len2(best));
                if li > lb || (li == lb && tri[i] < tri[best]) {
                    best = i;
                }
            }
            tris.push([tri[(best + 1) % 3], tri[(best + 2) % 3], tri[best]]);
        }
        let n = tris.len();
        Mesh::new(vertices, tris, vec![0; n], (0..n).collect())
    }

    fn check_vertices_used(&self) -> Result<()> {
        let mut used = vec![false; self.vertices.len()];
        self.triangles
            .iter()
            .flatten()
            .for_each(|&v| used[v] = true);
        match used.iter().position(|u| !u) {
            Some(v) => Err(HodgeError::NonConforming(format!(
                "vertex {v} belongs to no triangle"
            ))),
            None => Ok(()),
        }
    }

    pub fn vertices(&self) -> &[Point<T>] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn generation(&self) -> &[u32] {
        &self.generation
    }

    pub fn root(&self) -> &[usize] {
        &self.root
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Edge ids of triangle `t`, local edge `i` opposite local vertex `i`.
    pub fn triangle_edges(&self, t: usize) -> [usize; 3] {
        self.tri_edges[t]
    }

    /// `+1` where the counter-clockwise traversal of the local edge agrees with the global orientation.
    pub fn triangle_edge_signs(&self, t: usize) -> [i8; 3] {
        self.tri_edge_sign[t]
    }

    pub fn corners(&self, t: usize) -> [Point<T>; 3] {
        let tri = self.triangles[t];
        [
            self.vertices[tri[0]],
            self.vertices[tri[1]],
            self.vertices[tri[2]],
        ]
    }

    pub fn area(&self, t: usize) -> T {
        signed_area(self.corners(t))
    }

    /// `h_K = |K|^{1/2}`.
    pub fn h(&self, t: usize) -> T {
        self.area(t).sqrt()
    }

    pub fn edge_length(&self, e: usize) -> T {
        let [a, b] = self.edges[e].vertices;
        norm(sub(self.vertices[b], self.vertices[a]))
    }

    /// Unit tangent (low → high) of edge `e`.
    pub fn edge_tangent(&self, e: usize) -> Point<T> {
        let [a, b] = self.edges[e].vertices;
        let d = sub(self.vertices[b], self.vertices[a]);
        let l = norm(d);
        [d[0] / l, d[1] / l]
    }

    /// Unit normal of edge `e`: the tangent rotated clockwise, pointing out of the `plus` triangle.
    pub fn edge_normal(&self, e: usize) -> Point<T> {
        let t = self.edge_tangent(e);
        [t[1], -t[0]]
    }

    pub fn edge_point(&self, e: usize, s: T) -> Point<T> {
        let [a, b] = self.edges[e].vertices;
        let (pa, pb) = (self.vertices[a], self.vertices[b]);
        [pa[0] + s * (pb[0] - pa[0]), pa[1] + s * (pb[1] - pa[1])]
    }

    pub fn check_triangle(&self, t: usize) -> Result<()> {
        if t < self.triangles.len() {
            Ok(())
        } else {
            Err(HodgeError::InvalidTriangle(t))
        }
    }

    pub fn check_edge(&self, e: usize) -> Result<()> {
        if e < self.edges.len() {
            Ok(())
        } else {
            Err(HodgeError::InvalidEdge(e))
        }
    }

    /// One triangle containing each vertex.
    pub fn vertex_triangle(&self) -> Vec<usize> {
        let mut out = vec![usize::MAX; self.vertices.len()];
        for (t, tri) in self.triangles.iter().enumerate() {
            for &v in tri {
                if out[v] == usize::MAX {
                    out[v] = t;
                }
            }
        }
        out
    }

    /// All triangles around each vertex.
    pub fn vertex_patches(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.vertices.len()];
        for (t, tri) in self.triangles.iter().enumerate() {
            for &v in tri {
                out[v].push(t);
            }
        }
        out
    }

    /// Re-checks conformity, orientation and the edge table.
    pub fn validate(&self) -> Result<()> {
        let rebuilt = Mesh::new(
            self.vertices.clone(),
            self.triangles.clone(),
            self.generation.clone(),
            self.root.clone(),
        )?;
        if rebuilt.edges != self.edges {
            return Err(HodgeError::NonConforming("edge table out of date".into()));
        }
        Ok(())
    }

    pub fn boundary_edge_count(&self) -> usize {
        self.edges.iter().filter(|e| e.is_boundary()).count()
    }

    pub fn min_angle(&self) -> T {
        (0..self.num_triangles())
            .map(|t| self.triangle_min_angle(t))
            .fold(T::infinity(), T::min)
    }

    pub fn triangle_min_angle(&self, t: usize) -> T {
        let p = self.corners(t);
        let mut m = T::infinity();
        for i in 0..3 {
            let u = sub(p[(i + 1) % 3], p[i]);
            let v = sub(p[(i + 2) % 3], p[i]);
            let cross = u[0] * v[1] - u[1] * v[0];
            let dotp = u[0] * v[0] + u[1] * v[1];
            m = m.min(cross.abs().atan2(dotp));
        }
        m
    }

    pub fn metrics(&self) -> MeshMetrics {
        let max_h = (0..self.num_triangles())
            .map(|t| self.h(t))
            .fold(T::zero(), T::max);
        MeshMetrics {
            min_angle: self.min_angle().to_f64_lossy(),
            max_h: max_h.to_f64_lossy(),
            triangles: self.num_triangles(),
            edges: self.num_edges(),
            vertices: self.num_vertices(),
        }
    }

    /// Newest-vertex bisection of the marked triangles with conforming closure.
    pub fn bisect_marked(&self, marked: &BTreeSet<usize>) -> Result<(Mesh<T>, RefinementRecord)> {
        for &t in marked {
            self.check_triangle(t)?;
        }
        let ne = self.edges.len();
        let mut edge_marked = vec![false; ne];
        let mut stack = Vec::new();
        for &t in marked {
            let e = self.tri_edges[t][2];
            if !edge_marked[e] {
                edge_marked[e] = true;
                stack.push(e);
            }
        }
        while let Some(e) = stack.pop() {
            for t in self.edges[e].triangles() {
                let r = self.tri_edges[t][2];
                if !edge_marked[r] {
                    edge_marked[r] = true;
                    stack.push(r);
                }
            }
        }

        let mut vertices = self.vertices.clone();
        let mut mid = vec![usize::MAX; ne];
        let half = T::c(0.5);
        for e in 0..ne {
            if edge_marked[e] {
                let [a, b] = self.edges[e].vertices;
                let (pa, pb) = (self.vertices[a], self.vertices[b]);
                mid[e] = vertices.len();
                vertices.push([(pa[0] + pb[0]) * half, (pa[1] + pb[1]) * half]);
            }
        }

        let mut triangles = Vec::with_capacity(self.triangles.len() + 2 * vertices.len());
        let mut generation = Vec::with_capacity(triangles.capacity());
        let mut root = Vec::with_capacity(triangles.capacity());
        let mut parent_to_children = Vec::with_capacity(self.triangles.len());
        let mut child_to_parent = Vec::with_capacity(triangles.capacity());
        let mut refined_set = BTreeSet::new();
        for (t, &[a, b, c]) in self.triangles.iter().enumerate() {
            let [e0, e1, e2] = self.tri_edges[t];
            let g = self.generation[t];
            let mut kids: Vec<([usize; 3], u32)> = Vec::with_capacity(4);
            if !edge_marked[e2] {
                kids.push(([a, b, c], g));
            } else {
                let m = mid[e2];
                if edge_marked[e1] {
                    let m1 = mid[e1];
                    kids.push(([m, c, m1], g + 2));
                    kids.push(([a, m, m1], g + 2));
                } else {
                    kids.push(([c, a, m], g + 1));
                }
                if edge_marked[e0] {
                    let m0 = mid[e0];
                    kids.push(([m, b, m0], g + 2));
                    kids.push(([c, m, m0], g + 2));
                } else {
                    kids.push(([b, c, m], g + 1));
                }
                refined_set.insert(t);
            }
            let mut ids = Vec::with_capacity(kids.len());
            for (tri, gen) in kids {
                ids.push(triangles.len());
                child_to_parent.push(t);
                triangles.push(tri);
                generation.push(gen);
                root.push(self.root[t]);
            }
            parent_to_children.push(ids);
        }
        let fine = Mesh::new(vertices, triangles, generation, root)?;
        let record = RefinementRecord {
            parent_to_children,
            child_to_parent,
            refined_set,
            marked_set: marked.clone(),
        };
        Ok((fine, record))
    }

    /// Two full bisection sweeps: every triangle gets four grandchildren.
    pub fn uniform_refine(&self) -> Result<(Mesh<T>, RefinementRecord)> {
        let all: BTreeSet<usize> = (0..self.num_triangles()).collect();
        let (m1, r1) = self.bisect_marked(&all)?;
        let all1: BTreeSet<usize> = (0..m1.num_triangles()).collect();
        let (m2, r2) = m1.bisect_marked(&all1)?;
        let mut rec = r1.compose(&r2);
        rec.marked_set = all;
        Ok((m2, rec))
    }

    /// `R_H` plus every coarse triangle sharing a vertex with it.
    pub fn extended_refined_set(&self, record: &RefinementRecord) -> BTreeSet<usize> {
        let mut flagged = vec![false; self.vertices.len()];
        for &t in &record.refined_set {
            for &v in &self.triangles[t] {
                flagged[v] = true;
            }
        }
        let mut out = record.refined_set.clone();
        for (t, tri) in self.triangles.iter().enumerate() {
            if tri.iter().any(|&v| flagged[v]) {
                out.insert(t);
            }
        }
        out
    }

    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l))
            .filter(|(_, l)| l.as_ref().map(|s| !s.trim().is_empty()).unwrap_or(true));
        let mut next = |what: &str| -> Result<(usize, String)> {
            match lines.next() {
                Some((n, Ok(l))) => Ok((n, l)),
                Some((_, Err(e))) => Err(e.into()),
                None => Err(HodgeError::Parse {
                    line: 0,
                    msg: format!("unexpected end of file, expected {what}"),
                }),
            }
        };
        let perr = |line: usize, msg: String| HodgeError::Parse { line, msg };
        let (n, header) = next("header")?;
        if header.split_whitespace().collect::<Vec<_>>() != ["dim", "2"] {
            return Err(perr(n, format!("expected 'dim 2', found '{header}'")));
        }
        let (n, nv) = next("vertex count")?;
        let nv: usize = nv
            .trim()
            .parse()
            .map_err(|_| perr(n, "bad vertex count".into()))?;
        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            let (n, l) = next("vertex")?;
            let f: Vec<T> = l
                .split_whitespace()
                .map(|s| {
                    s.parse::<T>()
                        .map_err(|_| perr(n, format!("bad coordinate '{s}'")))
                })
                .collect::<Result<_>>()?;
            if f.len() != 2 {
                return Err(perr(n, "expected two coordinates".into()));
            }
            vertices.push([f[0], f[1]]);
        }
        let (n, nt) = next("triangle count")?;
        let nt: usize = nt
            .trim()
            .parse()
            .map_err(|_| perr(n, "bad triangle count".into()))?;
        let mut triangles = Vec::with_capacity(nt);
        for _ in 0..nt {
            let (n, l) = next("triangle")?;
            let f: Vec<usize> = l
                .split_whitespace()
                .map(|s| {
                    s.parse::<usize>()
                        .map_err(|_| perr(n, format!("bad index '{s}'")))
                })
                .collect::<Result<_>>()?;
            if f.len() != 4 || f[3] > 2 {
                return Err(perr(
                    n,
                    "expected 'v0 v1 v2 refedge' with refedge in 0..=2".into(),
                ));
            }
            let r = f[3];
            triangles.push([f[(r + 1) % 3], f[(r + 2) % 3], f[r]]);
        }
        if let Some((n, _)) = lines.next() {
            return Err(perr(n, "trailing content".into()));
        }
        let nt = triangles.len();
        Mesh::new(vertices, triangles, vec![0; nt], (0..nt).collect())
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "dim 2")?;
        writeln!(w, "{}", self.vertices.len())?;
        for p in &self.vertices {
            writeln!(w, "{} {}", p[0], p[1])?;
        }
        writeln!(w, "{}", self.triangles.len())?;
        for t in &self.triangles {
            writeln!(w, "{} {} {} 2", t[0], t[1], t[2])?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> Mesh<f64> {
        Mesh::from_raw(
            vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
            vec![[0, 1, 2], [0, 2, 3]],
        )
        .unwrap()
    }

    #[test]
    fn square_refinement_edges_are_the_diagonal() {
        let m = square();
        for t in 0..2 {
            let e = m.triangle_edges(t)[2];
            assert_eq!(m.edges()[e].vertices, [0, 2]);
        }
        assert_eq!(m.num_edges(), 5);
        assert_eq!(m.boundary_edge_count(), 4);
    }

    #[test]
    fn marking_one_forces_neighbour() {
        let m = square();
        let (f, rec) = m.bisect_marked(&BTreeSet::from([0])).unwrap();
        assert_eq!(f.num_triangles(), 4);
        assert_eq!(rec.refined_set, BTreeSet::from([0, 1]));
        f.validate().unwrap();
    }

    #[test]
    fn empty_marking_is_identity() {
        let m = square();
        let (f, rec) = m.bisect_marked(&BTreeSet::new()).unwrap();
        assert_eq!(f.triangles(), m.triangles());
        assert!(rec.refined_set.is_empty());
    }

    #[test]
    fn invalid_triangle_rejected() {
        assert!(matches!(
            square().bisect_marked(&BTreeSet::from([7])),
            Err(HodgeError::InvalidTriangle(7))
        ));
    }

    #[test]
    fn uniform_refine_gives_eight_and_generations() {
        let (f, rec) = square().uniform_refine().unwrap();
        assert_eq!(f.num_triangles(), 8);
        assert!(f.generation().iter().all(|&g| g == 2));
        assert!(rec.parent_to_children.iter().all(|c| c.len() == 4));
    }

    #[test]
    fn reference_triangle_metrics() {
        let m = Mesh::from_raw(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 1, 2]]).unwrap();
        assert!((m.h(0) - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((square().metrics().min_angle - std::f64::consts::FRAC_PI_4).abs() < 1e-15);
    }

    #[test]
    fn file_roundtrip() {
        let (m, _) = square().uniform_refine().unwrap();
        let mut buf = Vec::new();
        m.write(&mut buf).unwrap();
        let r = Mesh::<f64>::read(&buf[..]).unwrap();
        assert_eq!(r.triangles(), m.triangles());
        assert_eq!(r.vertices(), m.vertices());
    }

    #[test]
    fn loader_rejects_clockwise() {
        let txt = "dim 2\n3\n0 0\n1 0\n0 1\n1\n0 2 1 2\n";
        assert!(Mesh::<f64>::read(txt.as_bytes()).is_err());
    }
}
