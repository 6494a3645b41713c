//! Residual error indicators, data oscillation and related ratios.
//!
//! Every indicator is stored squared per triangle. Edge terms integrate the whole boundary of
//! each element, so an interior edge contributes to both neighbours.

use std::collections::BTreeSet;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{HodgeError, Result};
use crate::forms::{
    edge_points, trace_star_jump, AnalyticForm, Combination, Element, ElementwiseField, FormField,
    JumpFn, Proxy,
};
use crate::mesh::{Mesh, RefinementRecord};
use crate::scalar::Real;
use crate::solver::{DiscreteComplex, MixedSolution};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Flavor {
    Dsigma,
    Sigma,
    P,
    Du,
    Osc,
}

#[derive(Clone, Debug)]
pub struct IndicatorField<T> {
    pub flavor: Flavor,
    pub k: usize,
    pub mesh: Arc<Mesh<T>>,
    /// Squared indicator per triangle.
    pub values: Vec<T>,
}

impl<T: Real> IndicatorField<T> {
    pub fn total(&self) -> T {
        self.values.iter().copied().sum()
    }

    /// `η(T_h) = (Σ η²(K))^{1/2}`.
    pub fn estimate(&self) -> T {
        self.total().sqrt()
    }

    pub fn sum_over(&self, set: &BTreeSet<usize>) -> T {
        set.iter().map(|&t| self.values[t]).sum()
    }

    pub fn with_flavor(mut self, flavor: Flavor) -> Self {
        self.flavor = flavor;
        self
    }

    pub fn zeros(flavor: Flavor, k: usize, mesh: Arc<Mesh<T>>) -> Self {
        let n = mesh.num_triangles();
        IndicatorField {
            flavor,
            k,
            mesh,
            values: vec![T::zero(); n],
        }
    }

    /// `triangle,value` lines.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("triangle,value\n");
        for (t, v) in self.values.iter().enumerate() {
            s.push_str(&format!("{t},{v}\n"));
        }
        s
    }
}

/// `(∫_e j², ∫_e (j − mean_e j)²)` for every edge.
pub fn edge_jump_integrals<T: Real>(
    field: &dyn FormField<T>,
    mesh: &Mesh<T>,
    jump: JumpFn<T>,
) -> Result<Vec<(T, T)>> {
    let pts = edge_points::<T>();
    (0..mesh.num_edges())
        .into_par_iter()
        .map(|e| {
            let j = jump(field, mesh, e)?;
            let len = mesh.edge_length(e);
            let mean: T = (0..3).map(|q| pts[q].1 * j[q]).sum();
            let full: T = (0..3).map(|q| pts[q].1 * j[q] * j[q]).sum();
            let osc: T = (0..3)
                .map(|q| pts[q].1 * (j[q] - mean) * (j[q] - mean))
                .sum();
            Ok((len * full, len * osc))
        })
        .collect()
}

/// `(∫_K |g|², ∫_K |g − mean_K g|²)` for every triangle.
pub fn volume_integrals<T: Real, G>(mesh: &Mesh<T>, g: G) -> Vec<(T, T)>
where
    G: Fn(usize, [T; 3], [T; 2], &Element<T>) -> Proxy<T> + Sync,
{
    (0..mesh.num_triangles())
        .into_par_iter()
        .map(|t| {
            let el = Element::new(mesh, t);
            let vals: Vec<(Proxy<T>, T)> = el
                .quadrature()
                .map(|(l, x, w)| (g(t, l, x, &el), w))
                .collect();
            let mut mean = Proxy::zero(if matches!(vals[0].0, Proxy::Vector(_)) {
                1
            } else {
                0
            });
            for (v, w) in &vals {
                mean = mean.axpy(*w / el.area, *v);
            }
            let full = vals.iter().map(|(v, w)| *w * v.norm_sq()).sum();
            let osc = vals.iter().map(|(v, w)| *w * v.sub(mean).norm_sq()).sum();
            (full, osc)
        })
        .collect()
}

fn edge_sum<T: Real>(mesh: &Mesh<T>, t: usize, per_edge: &[(T, T)], osc: bool) -> T {
    mesh.triangle_edges(t)
        .iter()
        .map(|&e| if osc { per_edge[e].1 } else { per_edge[e].0 })
        .sum()
}

fn require_k<T: Real>(sol: &MixedSolution<T>, k: usize) -> Result<()> {
    if sol.k() != k {
        return Err(HodgeError::Input(format!(
            "indicator defined for k = {k} only, solution has k = {}",
            sol.k()
        )));
    }
    Ok(())
}

fn data_coderivative<T: Real>(
    f: &AnalyticForm<T>,
    mesh: &Mesh<T>,
    t: usize,
    x: [T; 2],
) -> Result<T> {
    f.coderivative_in(mesh.root()[t], x)
        .map(|v| v.scalar())
        .ok_or_else(|| HodgeError::Input("data must provide its coderivative".into()))
}

/// Volume and edge parts of `η_dσ` and of its oscillation: `(vol, edge, vol_osc, edge_osc)`
/// per element, using the supplied jump function.
fn dsigma_parts<T: Real>(
    sol: &MixedSolution<T>,
    f: &AnalyticForm<T>,
    jump: JumpFn<T>,
) -> Result<Vec<[T; 4]>> {
    require_k(sol, 1)?;
    let mesh = sol.mesh().clone();
    if !f.has_coderivative() {
        data_coderivative(f, &mesh, 0, [T::zero(); 2])?;
    }
    let grad = ElementwiseField {
        k: 1,
        values: sol.sigma.elementwise_derivative()?,
    };
    // P1 gradients are elementwise constant, so δ(dσ_h) = 0 on every element
    let residual = Combination::new(1)
        .term(T::one(), f)?
        .term(-T::one(), &grad)?;
    let edges = edge_jump_integrals(&residual, &mesh, jump)?;
    let vol = volume_integrals(&mesh, |t, _, x, _| {
        Proxy::Scalar(data_coderivative(f, &mesh, t, x).unwrap_or(T::zero()))
    });
    Ok((0..mesh.num_triangles())
        .map(|t| {
            let h = mesh.h(t);
            [
                h * h * vol[t].0,
                h * edge_sum(&mesh, t, &edges, false),
                h * h * vol[t].1,
                h * edge_sum(&mesh, t, &edges, true),
            ]
        })
        .collect())
}

/// `η²_dσ(K) = h²‖δ(f − dσ_h)‖²_K + h‖[[tr⋆(f − dσ_h)]]‖²_{∂K}` (defined for `k = 1`).
pub fn eta_dsigma<T: Real>(
    sol: &MixedSolution<T>,
    f: &AnalyticForm<T>,
) -> Result<IndicatorField<T>> {
    eta_dsigma_with(sol, f, trace_star_jump)
}

pub fn eta_dsigma_with<T: Real>(
    sol: &MixedSolution<T>,
    f: &AnalyticForm<T>,
    jump: JumpFn<T>,
) -> Result<IndicatorField<T>> {
    let parts = dsigma_parts(sol, f, jump)?;
    Ok(IndicatorField {
        flavor: Flavor::Dsigma,
        k: sol.k(),
        mesh: sol.mesh().clone(),
        values: parts.iter().map(|p| p[0] + p[1]).collect(),
    })
}

/// `η_σ`: equals `η_dσ` for `k = 1`; for `k = 2` it is
/// `h²‖δσ_h‖²_K + h‖[[tr⋆σ_h]]‖²_{∂K} + ‖f − f_T‖²_K`.
pub fn eta_sigma<T: Real>(
    sol: &MixedSolution<T>,
    f: &AnalyticForm<T>,
) -> Result<IndicatorField<T>> {
    match sol.k() {
        1 => Ok(eta_dsigma(sol, f)?.with_flavor(Flavor::Sigma)),
        2 => {
            let mesh = sol.mesh().clone();
            let cod = sol.sigma.elementwise_coderivative()?;
            let edges = edge_jump_integrals(&sol.sigma, &mesh, trace_star_jump)?;
            let data = volume_integrals(&mesh, |t, _, x, _| f.eval_in(mesh.root()[t], x));
            let values = (0..mesh.num_triangles())
                .into_par_iter()
                .map(|t| {
                    let h = mesh.h(t);
                    h * h * mesh.area(t) * cod[t].norm_sq()
                        + h * edge_sum(&mesh, t, &edges, false)
                        + data[t].1
                })
                .collect();
            Ok(IndicatorField {
                flavor: Flavor::Sigma,
                k: 2,
                mesh,
                values,
            })
        }
        k => Err(HodgeError::Degree(k)),
    }
}

/// `η²_p(K) = h²‖δp_h‖²_K + h‖[[tr⋆p_h]]‖²_{∂K} + η²_dσ(K)`; identically zero for `k = 2`.
pub fn eta_p<T: Real>(sol: &MixedSolution<T>, f: &AnalyticForm<T>) -> Result<IndicatorField<T>> {
    if sol.k() == 2 {
        return Ok(IndicatorField::zeros(Flavor::P, 2, sol.mesh().clone()));
    }
    let dsig = eta_dsigma(sol, f)?;
    let mesh = sol.mesh().clone();
    if sol.harmonic.dim() == 0 {
        return Ok(dsig.with_flavor(Flavor::P));
    }
    let p = sol.p_vector();
    let cod = p.elementwise_coderivative()?;
    let edges = edge_jump_integrals(&p, &mesh, trace_star_jump)?;
    let values = (0..mesh.num_triangles())
        .map(|t| {
            let h = mesh.h(t);
            h * h * mesh.area(t) * cod[t].norm_sq()
                + h * edge_sum(&mesh, t, &edges, false)
                + dsig.values[t]
        })
        .collect();
    Ok(IndicatorField {
        flavor: Flavor::P,
        k: 1,
        mesh,
        values,
    })
}

/// `η²_du(K) = h²‖f − dσ_h − δdu_h − p_h‖²_K + h²‖δ(f − dσ_h − p_h)‖²_K
///            + h‖[[tr⋆(f − dσ_h − p_h)]]‖²_{∂K} + h‖[[tr⋆du_h]]‖²_{∂K}` (defined for `k = 1`).
pub fn eta_du<T: Real>(sol: &MixedSolution<T>, f: &AnalyticForm<T>) -> Result<IndicatorField<T>> {
    require_k(sol, 1)?;
    let mesh = sol.mesh().clone();
    if !f.has_coderivative() {
        data_coderivative(f, &mesh, 0, [T::zero(); 2])?;
    }
    let grad = ElementwiseField {
        k: 1,
        values: sol.sigma.elementwise_derivative()?,
    };
    let p = sol.p_vector();
    let p_cod = p.elementwise_coderivative()?;
    let rot = ElementwiseField {
        k: 2,
        values: sol.u.elementwise_derivative()?,
    };
    // du_h is elementwise constant, so δdu_h vanishes inside every element
    let residual = Combination::new(1)
        .term(T::one(), f)?
        .term(-T::one(), &grad)?
        .term(-T::one(), &p)?;
    let vol1 = volume_integrals(&mesh, |t, _, x, _| residual.eval_on(&mesh, t, x));
    let vol2 = volume_integrals(&mesh, |t, _, x, _| {
        Proxy::Scalar(data_coderivative(f, &mesh, t, x).unwrap_or(T::zero()) - p_cod[t].scalar())
    });
    let e1 = edge_jump_integrals(&residual, &mesh, trace_star_jump)?;
    let e2 = edge_jump_integrals(&rot, &mesh, trace_star_jump)?;
    let values = (0..mesh.num_triangles())
        .map(|t| {
            let h = mesh.h(t);
            h * h * (vol1[t].0 + vol2[t].0)
                + h * (edge_sum(&mesh, t, &e1, false) + edge_sum(&mesh, t, &e2, false))
        })
        .collect();
    Ok(IndicatorField {
        flavor: Flavor::Du,
        k: 1,
        mesh,
        values,
    })
}

/// Data oscillation with projections onto constants per element and per edge; zero for `k = 2`.
pub fn oscillation<T: Real>(
    sol: &MixedSolution<T>,
    f: &AnalyticForm<T>,
) -> Result<IndicatorField<T>> {
    if sol.k() == 2 {
        return Ok(IndicatorField::zeros(Flavor::Osc, 2, sol.mesh().clone()));
    }
    let parts = dsigma_parts(sol, f, trace_star_jump)?;
    Ok(IndicatorField {
        flavor: Flavor::Osc,
        k: sol.k(),
        mesh: sol.mesh().clone(),
        values: parts.iter().map(|p| p[2] + p[3]).collect(),
    })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct LocalizedBound {
    pub numerator: f64,
    pub denominator: f64,
    pub ratio: f64,
    pub extended_size: usize,
    pub refined_size: usize,
    /// Nonzero numerator with an empty extended refined set.
    pub violation: bool,
}

/// `‖σ_h − σ_H‖²_{HΛ} / η²_σ(σ_H, R̃_H)` with `σ_H` prolonged to the fine mesh.
pub fn localized_bound_ratio<T: Real>(
    coarse: &MixedSolution<T>,
    fine: &MixedSolution<T>,
    record: &RefinementRecord,
    f: &AnalyticForm<T>,
    fine_complex: &DiscreteComplex<T>,
) -> Result<LocalizedBound> {
    let k = fine.k();
    let pro = coarse
        .sigma
        .prolong(fine.sigma.space(), &record.child_to_parent)?;
    let diff: Vec<T> = fine
        .sigma
        .values()
        .iter()
        .zip(pro.values())
        .map(|(a, b)| *a - *b)
        .collect();
    let l2 = fine_complex.mass(k - 1).norm_sq(&diff);
    let dn = fine_complex.derivative_norm(k - 1, &diff);
    let numerator = (l2 + dn * dn).to_f64_lossy();
    let eta = eta_sigma(coarse, f)?;
    let ext = coarse.mesh().extended_refined_set(record);
    let denominator = eta.sum_over(&ext).to_f64_lossy();
    let ratio = if numerator == 0.0 {
        0.0
    } else {
        numerator / denominator
    };
    Ok(LocalizedBound {
        numerator,
        denominator,
        ratio,
        extended_size: ext.len(),
        refined_size: record.refined_set.len(),
        violation: ext.is_empty() && numerator > 1e-24,
    })
}

#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct Effectivity {
    pub sigma: Option<f64>,
    pub p: Option<f64>,
    pub du: Option<f64>,
    pub degenerate: bool,
}

/// Estimator / error ratios; zero errors give absent ratios.
pub fn effectivity(eta: [f64; 3], err: [f64; 3]) -> Effectivity {
    let tiny = 1e-13;
    let r = |e: f64, x: f64| if x > tiny { Some(e / x) } else { None };
    Effectivity {
        sigma: r(eta[0], err[0]),
        p: r(eta[1], err[1]),
        du: r(eta[2], err[2]),
        degenerate: eta.iter().chain(err.iter()).all(|v| v.abs() <= tiny),
    }
}
