//! Invariant suites shared by the `diagnose` command and the test suites.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::adaptivity::{
    dorfler_mark, run, satisfies_dorfler, Algorithm, MarkingParams, RunOptions, RunReport,
};
use crate::error::Result;
use crate::forms::{edge_points, trace_star_jump, AnalyticForm, Element, FormField, JumpFn};
use crate::mesh::Mesh;
use crate::problems::{by_name, ProblemSpec};
use crate::solver::{DiscreteComplex, HodgeOperator};

#[derive(Clone, Debug, Serialize)]
pub struct SuiteResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl SuiteResult {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        SuiteResult {
            name: name.to_string(),
            passed,
            detail,
        }
    }

    fn from_result(name: &str, r: Result<(bool, String)>) -> Self {
        match r {
            Ok((passed, detail)) => SuiteResult::new(name, passed, detail),
            Err(e) => SuiteResult::new(name, false, format!("error: {e}")),
        }
    }
}

#[derive(Clone, Debug)]
pub struct DiagnoseConfig {
    pub seed: u64,
    pub hodge_samples: usize,
    pub dorfler_cases: usize,
    pub adaptive_steps: usize,
}

impl Default for DiagnoseConfig {
    fn default() -> Self {
        DiagnoseConfig {
            seed: 1,
            hodge_samples: 100,
            dorfler_cases: 1000,
            adaptive_steps: 10,
        }
    }
}

/// `D_1 D_0 = 0` entrywise on every mesh.
pub fn complex_exactness(meshes: &[Arc<Mesh<f64>>]) -> SuiteResult {
    let r = (|| -> Result<(bool, String)> {
        let mut bad = 0;
        for m in meshes {
            let c = DiscreteComplex::new(m.clone())?;
            if !c.incidence(1)?.matmul(c.incidence(0)?).is_zero() {
                bad += 1;
            }
        }
        Ok((
            bad == 0,
            format!("{} meshes, {bad} with nonzero D1*D0", meshes.len()),
        ))
    })();
    SuiteResult::from_result("complex exactness", r)
}

fn single_triangle() -> Result<Mesh<f64>> {
    Mesh::from_raw(vec![[0.1, 0.2], [1.3, 0.4], [0.5, 1.1]], vec![[0, 1, 2]])
}

/// Relative defects of `∫ dω·μ = ∫ ω·δμ + ∫_∂K tr ω · tr⋆μ` on one element for the degree pairs
/// (0, 1) and (1, 2), with the boundary trace taken from `jump`.
pub fn ip_defects(jump: JumpFn<f64>) -> Result<[f64; 2]> {
    let mesh = single_triangle()?;
    let el = Element::new(&mesh, 0);
    let outward = |e: usize| {
        if mesh.edges()[e].plus == Some(0) {
            1.0
        } else {
            -1.0
        }
    };
    let edge_integral = |e: usize, g: &dyn Fn([f64; 2]) -> f64, tr: [f64; 3]| -> f64 {
        let pts = edge_points::<f64>();
        mesh.edge_length(e)
            * (0..3)
                .map(|q| pts[q].1 * g(mesh.edge_point(e, pts[q].0)) * tr[q])
                .sum::<f64>()
    };

    let phi = |x: [f64; 2]| x[0] * x[0] + x[0] * x[1] - x[1] + 0.5;
    let grad_phi = |x: [f64; 2]| [2.0 * x[0] + x[1], x[0] - 1.0];
    let v = AnalyticForm::vector(|x: [f64; 2]| [x[0] + 2.0 * x[1], 3.0 * x[0] - x[1] * x[1]]);
    let delta_v = |x: [f64; 2]| 2.0 * x[1] - 1.0;
    let (mut lhs, mut vol, mut scale) = (0.0, 0.0, 0.0);
    for (_, x, w) in el.quadrature() {
        let vx = v.eval(x).vector();
        let g = grad_phi(x);
        lhs += w * (g[0] * vx[0] + g[1] * vx[1]);
        vol += w * phi(x) * delta_v(x);
        scale += w * (g[0].abs() * vx[0].abs() + g[1].abs() * vx[1].abs());
    }
    let mut bnd = 0.0;
    for e in 0..mesh.num_edges() {
        bnd += outward(e) * edge_integral(e, &phi, jump(&v as &dyn FormField<f64>, &mesh, e)?);
    }
    let d01 = (lhs - vol - bnd).abs() / scale;

    let w_field = |x: [f64; 2]| [x[1] * x[1] - x[0], x[0] * x[1] + 2.0 * x[0]];
    let rot_w = |x: [f64; 2]| 2.0 - x[1];
    let s = AnalyticForm::scalar(2, |x: [f64; 2]| x[0] * x[0] - x[1] + x[0] * x[1]);
    let delta_s = |x: [f64; 2]| [x[0] - 1.0, -(2.0 * x[0] + x[1])];
    let (mut lhs, mut vol, mut scale) = (0.0, 0.0, 0.0);
    for (_, x, w) in el.quadrature() {
        let sx = s.eval(x).scalar();
        let (wf, ds) = (w_field(x), delta_s(x));
        lhs += w * rot_w(x) * sx;
        vol += w * (wf[0] * ds[0] + wf[1] * ds[1]);
        scale += w * (rot_w(x) * sx).abs();
    }
    let mut bnd = 0.0;
    for e in 0..mesh.num_edges() {
        let t = mesh.edge_tangent(e);
        let tangential = |x: [f64; 2]| {
            let wf = w_field(x);
            wf[0] * t[0] + wf[1] * t[1]
        };
        bnd +=
            outward(e) * edge_integral(e, &tangential, jump(&s as &dyn FormField<f64>, &mesh, e)?);
    }
    let d12 = (lhs - vol - bnd).abs() / scale;
    Ok([d01, d12])
}

/// Integration-by-parts identity with the given trace convention.
pub fn ip_identity(jump: JumpFn<f64>) -> SuiteResult {
    let r = ip_defects(jump).map(|d| {
        (
            d[0] <= 1e-12 && d[1] <= 1e-12,
            format!("defects (0,1) {:.2e}, (1,2) {:.2e}", d[0], d[1]),
        )
    });
    SuiteResult::from_result("(IP) identity", r)
}

/// Worst orthogonality and reconstruction defects of the discrete Hodge decomposition over
/// `samples` random vectors.
pub fn hodge_defects(
    mesh: Arc<Mesh<f64>>,
    k: usize,
    expected: usize,
    samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let complex = Arc::new(DiscreteComplex::new(mesh)?);
    let op = HodgeOperator::new(complex.clone(), k)?;
    let h = op.harmonic_basis(Some(expected))?;
    let m = complex.mass(k);
    let space = complex.space(k);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut orth, mut rec) = (0.0f64, 0.0f64);
    for _ in 0..samples {
        let v: Vec<f64> = (0..space.ndof())
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();
        let parts = op.hodge_decompose(&space.vector(v.clone())?, &h)?;
        let nv = m.norm_sq(&v).sqrt();
        let comps = [
            parts.exact.values(),
            parts.harmonic.values(),
            parts.coexact.values(),
        ];
        for i in 0..3 {
            for j in i + 1..3 {
                orth = orth.max(m.inner(comps[i], comps[j]).abs() / (nv * nv));
            }
        }
        let r: Vec<f64> = (0..v.len())
            .map(|i| v[i] - comps[0][i] - comps[1][i] - comps[2][i])
            .collect();
        rec = rec.max(m.norm_sq(&r).max(0.0).sqrt() / nv);
    }
    Ok((orth, rec))
}

/// Hodge decomposition on the initial and once-refined mesh of every benchmark, both degrees.
pub fn hodge_decomposition(samples: usize, seed: u64) -> SuiteResult {
    let r = (|| -> Result<(bool, String)> {
        let (mut orth, mut rec) = (0.0f64, 0.0f64);
        for name in ["square-k1", "lshape-k2", "annulus-k1"] {
            let p: ProblemSpec<f64> = by_name(name)?;
            let m0 = Arc::new(p.initial_mesh.clone());
            let m1 = Arc::new(m0.uniform_refine()?.0);
            for mesh in [m0, m1] {
                for k in [1, 2] {
                    let betti = if k == 1 { first_betti(&p) } else { 0 };
                    let (o, r) = hodge_defects(mesh.clone(), k, betti, samples, seed)?;
                    orth = orth.max(o);
                    rec = rec.max(r);
                }
            }
        }
        Ok((
            orth <= 1e-10 && rec <= 1e-10,
            format!("max orthogonality {orth:.2e}, max reconstruction {rec:.2e}"),
        ))
    })();
    SuiteResult::from_result("Hodge decomposition", r)
}

/// First Betti number of a benchmark domain.
fn first_betti(p: &ProblemSpec<f64>) -> usize {
    if p.k == 1 {
        p.expected_betti
    } else {
        usize::from(p.name.starts_with("annulus"))
    }
}

/// Smallest cardinality of any subset meeting the bulk criterion.
pub fn brute_force_min_cardinality(values: &[f64], theta: f64) -> usize {
    let n = values.len();
    let total: f64 = values.iter().sum();
    let mut best = n;
    for mask in 0u32..(1 << n) {
        let c = mask.count_ones() as usize;
        if c >= best {
            continue;
        }
        let s: f64 = (0..n)
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| values[i])
            .sum();
        if s >= theta * theta * total {
            best = c;
        }
    }
    best
}

/// Random indicator lists against the exhaustive-subset oracle, plus validity and scale invariance.
pub fn dorfler_fuzz(cases: usize, seed: u64) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = 0;
    for _ in 0..cases {
        let n = rng.gen_range(1..=12);
        let values: Vec<f64> = (0..n)
            .map(|_| {
                if rng.gen_bool(0.15) {
                    0.0
                } else {
                    rng.gen_range(0.0..10.0)
                }
            })
            .collect();
        let theta = rng.gen_range(0.01..0.99);
        let m = dorfler_mark(&values, theta);
        let total: f64 = values.iter().sum();
        let ok = if total > 0.0 {
            let c = rng.gen_range(1e-3..1e3);
            let scaled: Vec<f64> = values.iter().map(|v| v * c).collect();
            m.len() == brute_force_min_cardinality(&values, theta)
                && satisfies_dorfler(&m, &values, theta)
                && dorfler_mark(&scaled, theta) == m
        } else {
            m.is_empty()
        };
        if !ok {
            failures += 1;
        }
    }
    SuiteResult::new(
        "Dorfler minimality",
        failures == 0,
        format!("{cases} cases, {failures} failures"),
    )
}

/// Harmonic dimension equals the Betti number on the first and last mesh of every run.
pub fn harmonic_dimensions(reports: &[&RunReport], expected: &[usize]) -> SuiteResult {
    let mut bad = Vec::new();
    for (r, &b) in reports.iter().zip(expected) {
        let (first, last) = (r.steps.first(), r.steps.last());
        if first.map(|s| s.harmonic_dim) != Some(b)
            || last.map(|s| s.harmonic_dim) != Some(b)
            || r.steps.iter().any(|s| s.harmonic_dim != b)
        {
            bad.push(r.problem.clone());
        }
    }
    SuiteResult::new(
        "harmonic dimensions",
        bad.is_empty(),
        format!("{} runs, mismatches: {bad:?}", reports.len()),
    )
}

/// Galerkin residuals below `1e-9` at every step.
pub fn galerkin_residuals(reports: &[&RunReport]) -> SuiteResult {
    let worst = reports
        .iter()
        .flat_map(|r| &r.steps)
        .map(|s| s.galerkin_residuals.0.max(s.galerkin_residuals.1))
        .fold(0.0, f64::max);
    SuiteResult::new(
        "Galerkin residuals",
        worst <= 1e-9,
        format!("max relative residual {worst:.2e}"),
    )
}

/// `D_1 D_0 = 0` recorded at every step.
pub fn run_complex_exactness(reports: &[&RunReport]) -> SuiteResult {
    let n: usize = reports.iter().map(|r| r.steps.len()).sum();
    let bad = reports
        .iter()
        .flat_map(|r| &r.steps)
        .filter(|s| !s.complex_exact)
        .count();
    SuiteResult::new(
        "complex exactness",
        bad == 0,
        format!("{n} meshes, {bad} with nonzero D1*D0"),
    )
}

/// `osc(K) ≤ η_σ(K) + 1e-12` everywhere.
pub fn oscillation_dominance(reports: &[&RunReport]) -> SuiteResult {
    let worst = reports
        .iter()
        .flat_map(|r| &r.steps)
        .map(|s| s.osc_excess)
        .fold(f64::NEG_INFINITY, f64::max);
    SuiteResult::new(
        "oscillation dominance",
        worst <= 1e-12,
        format!("max osc(K) - eta_sigma(K) = {worst:.2e}"),
    )
}

/// The bulk criteria of the marking strategy hold at every step.
pub fn marking_criteria(reports: &[&RunReport]) -> SuiteResult {
    let bad = reports
        .iter()
        .flat_map(|r| &r.steps)
        .filter(|s| !s.marking_ok)
        .count();
    SuiteResult::new(
        "marking criteria",
        bad == 0,
        format!("{bad} steps violate a bulk criterion"),
    )
}

/// `r₁` vanishes: exactly for `k = 2`, to quadrature accuracy for `k = 1` manufactured data.
pub fn orthogonality(reports: &[&RunReport]) -> SuiteResult {
    let (mut k2, mut pyth, mut k1, mut pairs) = (0.0f64, 0.0f64, 0.0f64, 0);
    for r in reports {
        for o in r.steps.iter().filter_map(|s| s.ortho) {
            pairs += 1;
            if r.k == 2 {
                k2 = k2.max(o.r1_relative);
                pyth = pyth.max(o.pythagoras_defect);
            } else {
                k1 = k1.max(o.r1_relative);
            }
        }
    }
    SuiteResult::new(
        "orthogonality",
        pairs > 0 && k2 <= 1e-12 && pyth <= 1e-12 && k1 <= 1e-7,
        format!("{pairs} pairs; k=2 |r1| {k2:.2e}, Pythagoras {pyth:.2e}; k=1 |r1| {k1:.2e} (relative to |d sigma|^2)"),
    )
}

/// Localized bound ratios finite, none above ten times the median.
pub fn localized_bound(report: &RunReport, min_pairs: usize) -> SuiteResult {
    let ratios: Vec<f64> = report
        .steps
        .iter()
        .filter_map(|s| s.localized)
        .map(|l| l.ratio)
        .collect();
    let violations = report
        .steps
        .iter()
        .filter_map(|s| s.localized)
        .filter(|l| l.violation)
        .count();
    let (max, med) = (
        report.localized_max.unwrap_or(f64::NAN),
        report.localized_median.unwrap_or(f64::NAN),
    );
    let ok = ratios.len() >= min_pairs
        && violations == 0
        && ratios.iter().all(|r| r.is_finite())
        && max <= 10.0 * med;
    SuiteResult::new(
        "localized upper bound",
        ok,
        format!("{} pairs, max {max:.3e}, median {med:.3e}", ratios.len()),
    )
}

/// Consecutive gaps with equal harmonic dimension are symmetric and below one.
pub fn gap_symmetry(report: &RunReport) -> SuiteResult {
    let mut n = 0;
    let (mut asym, mut max) = (0.0f64, 0.0f64);
    for w in report.steps.windows(2) {
        if w[0].harmonic_dim != w[1].harmonic_dim {
            continue;
        }
        if let Some((a, b)) = w[1].gap {
            n += 1;
            asym = asym.max((a - b).abs());
            max = max.max(a.max(b));
        }
    }
    SuiteResult::new(
        "gap symmetry",
        n > 0 && asym <= 1e-8 && max < 1.0,
        format!("{n} pairs, max asymmetry {asym:.2e}, max gap {max:.3e}"),
    )
}

/// Refinement cardinality ratio bounded after the burn-in.
pub fn cardinality(reports: &[&RunReport], bound: f64) -> SuiteResult {
    let worst = reports
        .iter()
        .flat_map(|r| r.steps.iter().skip(4))
        .filter_map(|s| s.cardinality_ratio)
        .fold(0.0, f64::max);
    SuiteResult::new(
        "NVB cardinality",
        worst <= bound,
        format!("max ratio after step 3: {worst:.3}"),
    )
}

/// Short benchmark runs used by the diagnose command.
pub fn benchmark_runs(steps: usize) -> Result<Vec<RunReport>> {
    let cases = [
        ("square-k2", Algorithm::Amfem2),
        ("square-k1", Algorithm::Amfem1),
        ("square-k1", Algorithm::Amfem2),
        ("lshape-k2", Algorithm::Amfem2),
        ("annulus-k1", Algorithm::Amfem1),
    ];
    let mut out = Vec::new();
    for (name, alg) in cases {
        let params = MarkingParams {
            max_steps: steps,
            tol: 1e-12,
            ..Default::default()
        };
        out.push(run(by_name::<f64>(name)?, alg, params, RunOptions::default())?.report);
    }
    Ok(out)
}

/// Every suite, in a fixed order.
pub fn run_all(cfg: &DiagnoseConfig) -> Vec<SuiteResult> {
    run_all_with(cfg, trace_star_jump)
}

/// As [`run_all`], with the trace jump used by the (IP) suite replaced.
pub fn run_all_with(cfg: &DiagnoseConfig, jump: JumpFn<f64>) -> Vec<SuiteResult> {
    let mut out = vec![
        ip_identity(jump),
        dorfler_fuzz(cfg.dorfler_cases, cfg.seed),
        hodge_decomposition(cfg.hodge_samples, cfg.seed),
    ];
    match benchmark_runs(cfg.adaptive_steps) {
        Ok(reports) => {
            let refs: Vec<&RunReport> = reports.iter().collect();
            let betti: Vec<usize> = reports
                .iter()
                .map(|r| usize::from(r.problem.starts_with("annulus")))
                .collect();
            out.push(run_complex_exactness(&refs));
            out.push(harmonic_dimensions(&refs, &betti));
            out.push(galerkin_residuals(&refs));
            out.push(oscillation_dominance(&refs));
            out.push(marking_criteria(&refs));
            out.push(orthogonality(&refs));
            let lshape = reports
                .iter()
                .find(|r| r.problem == "lshape-k2")
                .expect("benchmark list");
            out.push(localized_bound(lshape, 5));
            let annulus = reports
                .iter()
                .find(|r| r.problem == "annulus-k1")
                .expect("benchmark list");
            out.push(gap_symmetry(annulus));
            out.push(cardinality(&refs, 20.0));
        }
        Err(e) => out.push(SuiteResult::new(
            "benchmark runs",
            false,
            format!("error: {e}"),
        )),
    }
    out
}
