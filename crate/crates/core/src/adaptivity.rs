//! Dörfler marking, the adaptive loops and their run-time diagnostics.

use std::collections::BTreeSet;
use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;

use crate::error::{HodgeError, Result};
use crate::estimators::{self, Effectivity, IndicatorField, LocalizedBound};
use crate::forms::{AnalyticForm, CoefficientVector, Element};
use crate::mesh::{Mesh, RefinementRecord};
use crate::problems::{ExactSolution, ProblemSpec};
use crate::scalar::Real;
use crate::solver::{gap, DiscreteComplex, HodgeOperator, Load, MixedSolution};

/// Smallest set carrying a `θ²` share of the squared indicator total. Ties go to the lower id.
pub fn dorfler_mark<T: Real>(values: &[T], theta: f64) -> BTreeSet<usize> {
    let total: T = values.iter().copied().sum();
    if !(total > T::zero()) {
        return BTreeSet::new();
    }
    let target = T::c(theta * theta) * total;
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| {
        values[b]
            .partial_cmp(&values[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut out = BTreeSet::new();
    let mut acc = T::zero();
    for t in order {
        if acc >= target {
            break;
        }
        acc += values[t];
        out.insert(t);
    }
    out
}

/// Adds elements in descending order of `values` until `set` carries a `θ²` share.
pub fn extend_marking<T: Real>(set: &mut BTreeSet<usize>, values: &[T], theta: f64) {
    let total: T = values.iter().copied().sum();
    let target = T::c(theta * theta) * total;
    let mut acc: T = set.iter().map(|&t| values[t]).sum();
    if acc >= target {
        return;
    }
    let mut order: Vec<usize> = (0..values.len()).filter(|t| !set.contains(t)).collect();
    order.sort_by(|&a, &b| {
        values[b]
            .partial_cmp(&values[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    for t in order {
        if acc >= target {
            break;
        }
        acc += values[t];
        set.insert(t);
    }
}

/// `Σ_M η² ≥ θ² Σ_T η²`.
pub fn satisfies_dorfler<T: Real>(set: &BTreeSet<usize>, values: &[T], theta: f64) -> bool {
    let total: T = values.iter().copied().sum();
    let part: T = set.iter().map(|&t| values[t]).sum();
    part >= T::c(theta * theta) * total
}

/// Negated least-squares slope of `log value` against `log N`.
pub fn fit_rate(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 3 {
        return Err(HodgeError::Input(
            "rate fit needs at least three points".into(),
        ));
    }
    if points.iter().any(|&(n, v)| !(n > 0.0) || !(v > 0.0)) {
        return Err(HodgeError::Input("rate fit needs positive data".into()));
    }
    let m = points.len() as f64;
    let (xs, ys): (Vec<f64>, Vec<f64>) = points.iter().map(|&(n, v)| (n.ln(), v.ln())).unzip();
    let (mx, my) = (xs.iter().sum::<f64>() / m, ys.iter().sum::<f64>() / m);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(HodgeError::Input("rate fit needs distinct N".into()));
    }
    Ok(-sxy / sxx)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Amfem1,
    Amfem2,
    Uniform,
}

impl std::str::FromStr for Algorithm {
    type Err = HodgeError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "amfem1" => Ok(Algorithm::Amfem1),
            "amfem2" => Ok(Algorithm::Amfem2),
            "uniform" => Ok(Algorithm::Uniform),
            o => Err(HodgeError::Input(format!("unknown algorithm '{o}'"))),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct MarkingParams {
    pub theta: f64,
    pub theta_sigma: f64,
    pub theta_p: f64,
    pub theta_du: f64,
    pub tol: f64,
    /// When set, the tolerance becomes `rel_tol · η₀`.
    pub rel_tol: Option<f64>,
    pub max_steps: usize,
    pub ndof_cap: usize,
}

impl Default for MarkingParams {
    fn default() -> Self {
        MarkingParams {
            theta: 0.3,
            theta_sigma: 0.3,
            theta_p: 0.3,
            theta_du: 0.3,
            tol: 1e-3,
            rel_tol: None,
            max_steps: 20,
            ndof_cap: 200_000,
        }
    }
}

impl MarkingParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("theta", self.theta),
            ("theta_sigma", self.theta_sigma),
            ("theta_p", self.theta_p),
            ("theta_du", self.theta_du),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(HodgeError::Input(format!(
                    "{name} must lie in (0, 1), got {v}"
                )));
            }
        }
        if !(self.tol > 0.0) {
            return Err(HodgeError::Input(format!(
                "tol must be positive, got {}",
                self.tol
            )));
        }
        if let Some(r) = self.rel_tol {
            if !(r > 0.0) {
                return Err(HodgeError::Input(format!(
                    "rel_tol must be positive, got {r}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Tolerance,
    MaxSteps,
    NdofCap,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorSource {
    Exact,
    Reference,
    None,
}

/// Consecutive-step orthogonality data.
#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct OrthoRecord {
    /// `⟨d(σ − σ_{ℓ+1}), d(σ_ℓ − σ_{ℓ+1})⟩`.
    pub r1: f64,
    /// `|r1| / ‖dσ‖²`.
    pub r1_relative: f64,
    /// `|e_{dσ,ℓ+1} + Δ_{dσ,ℓ} − e_{dσ,ℓ}| / ‖dσ‖²` on the finer quadrature.
    pub pythagoras_defect: f64,
    pub delta_sigma: f64,
    pub delta_dsigma: f64,
    pub delta_p: f64,
    pub delta_du: f64,
    /// Smallest constant making the σ inequality hold with `ε = 1/2`.
    pub c_qo_sigma_required: Option<f64>,
    /// Slack of the p inequality with `ε = 1/2` (nonnegative when it holds).
    pub ortho3_slack: Option<f64>,
    /// Smallest constant making the du inequality hold with `ε = 1/2`.
    pub c_qo_du_required: Option<f64>,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct StepRecord {
    pub step: usize,
    pub ntri: usize,
    pub ndof: usize,
    pub eta_sigma: f64,
    pub eta_p: Option<f64>,
    pub eta_du: Option<f64>,
    pub eta_dsigma: Option<f64>,
    /// Quantity compared against the tolerance.
    pub eta: f64,
    pub marked: usize,
    pub err_sigma_l2: Option<f64>,
    pub err_dsigma_l2: Option<f64>,
    pub err_p: Option<f64>,
    pub err_du: Option<f64>,
    /// `(δ(H_ℓ, H_{ℓ+1}), δ(H_{ℓ+1}, H_ℓ))` with the previous step.
    pub gap: Option<(f64, f64)>,
    pub seconds: Option<f64>,
    pub harmonic_dim: usize,
    pub p_norm: f64,
    pub solve_residual: f64,
    pub galerkin_residuals: (f64, f64),
    pub p_defects: (f64, f64),
    pub complex_exact: bool,
    pub osc: f64,
    /// `max_K (osc(K) − η_σ(K))`.
    pub osc_excess: f64,
    pub marking_ok: bool,
    pub cardinality_ratio: Option<f64>,
    pub min_angle: f64,
    pub effectivity: Option<Effectivity>,
    /// Orthogonality data against the previous step.
    pub ortho: Option<OrthoRecord>,
    /// Localized bound for the pair (previous step, this step).
    pub localized: Option<LocalizedBound>,
    /// Fraction of marked triangles within distance 1/4 of the origin.
    pub marked_near_origin: Option<f64>,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Contraction {
    pub contractive: bool,
    pub zeta: Option<f64>,
    pub rho: Option<f64>,
    /// `max_ℓ Q_{ℓ+1}/Q_ℓ` for the reported pair.
    pub max_ratio: Option<f64>,
    pub quasi_errors: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub problem: String,
    pub algorithm: Algorithm,
    pub k: usize,
    pub params: MarkingParams,
    pub tol_used: f64,
    pub steps: Vec<StepRecord>,
    pub stop: StopReason,
    pub converged: bool,
    pub error_source: ErrorSource,
    /// Rate of `η_σ` against `#T_ℓ − #T_0` over the last six steps.
    pub fitted_rate: Option<f64>,
    pub eta_geometric_ratio: Option<f64>,
    pub cardinality_max_after_burn_in: Option<f64>,
    pub localized_max: Option<f64>,
    pub localized_median: Option<f64>,
    pub contraction: Contraction,
    pub min_angle_run: f64,
    pub min_angle_initial_sweeps: f64,
}

pub const CSV_HEADER: &str =
    "step,ntri,ndof,eta_sigma,eta_p,eta_du,eta_dsigma,marked,err_sigma_l2,err_dsigma_l2,err_p,err_du,gap,seconds";

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

impl RunReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(CSV_HEADER);
        s.push('\n');
        for r in &self.steps {
            s.push_str(&format!(
                "{},{},{},{:e},{},{},{},{},{},{},{},{},{},{}\n",
                r.step,
                r.ntri,
                r.ndof,
                r.eta_sigma,
                opt(r.eta_p),
                opt(r.eta_du),
                opt(r.eta_dsigma),
                r.marked,
                opt(r.err_sigma_l2),
                opt(r.err_dsigma_l2),
                opt(r.err_p),
                opt(r.err_du),
                opt(r.gap.map(|g| g.0.max(g.1))),
                r.seconds
                    .map(|x| format!("{x:.3}"))
                    .unwrap_or_else(|| "0".into()),
            ));
        }
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Rate fit of `η_σ` against `#T_ℓ − #T_0` over the last `last` steps.
    pub fn eta_rate(&self, last: usize) -> Option<f64> {
        let n0 = self.steps.first()?.ntri as f64;
        let pts: Vec<(f64, f64)> = self
            .steps
            .iter()
            .skip(1)
            .map(|r| (r.ntri as f64 - n0, r.eta_sigma))
            .collect::<Vec<_>>();
        let start = pts.len().saturating_sub(last);
        fit_rate(&pts[start..]).ok()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct RunOptions {
    /// Compute errors against the exact or a reference solution.
    pub errors: bool,
    /// Orthogonality, localized bound and gap checks between consecutive steps.
    pub diagnostics: bool,
    pub timing: bool,
    /// Uniform refinements of the final mesh carrying the reference solution.
    pub reference_levels: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            errors: true,
            diagnostics: true,
            timing: false,
            reference_levels: 2,
        }
    }
}

/// Indicator fields of one step.
#[derive(Clone, Debug)]
pub struct StepIndicators<T> {
    pub sigma: IndicatorField<T>,
    pub p: IndicatorField<T>,
    pub du: Option<IndicatorField<T>>,
    pub dsigma: Option<IndicatorField<T>>,
    pub osc: IndicatorField<T>,
}

/// Everything produced by a run; `records[i]` refines `meshes[i]` into `meshes[i + 1]`.
pub struct AdaptiveRun<T: Real> {
    pub report: RunReport,
    pub meshes: Vec<Arc<Mesh<T>>>,
    pub records: Vec<RefinementRecord>,
    pub solutions: Vec<MixedSolution<T>>,
    pub indicators: Vec<StepIndicators<T>>,
    pub marked: Vec<BTreeSet<usize>>,
}

/// Outcome of one solve-estimate-mark-refine cycle.
pub enum StepOutcome {
    Continue,
    Stop(StopReason),
}

/// Loop state: advances one step at a time.
pub struct AdaptiveState<T: Real> {
    problem: ProblemSpec<T>,
    algorithm: Algorithm,
    params: MarkingParams,
    options: RunOptions,
    tol: Option<f64>,
    run: AdaptiveRun<T>,
    complexes: Vec<Arc<DiscreteComplex<T>>>,
    pending: Option<(Arc<Mesh<T>>, RefinementRecord)>,
}

fn ndof<T: Real>(mesh: &Mesh<T>, k: usize) -> usize {
    let n = [mesh.num_vertices(), mesh.num_edges(), mesh.num_triangles()];
    n[k - 1] + n[k]
}

fn min_angle_two_sweeps<T: Real>(mesh: &Mesh<T>) -> Result<f64> {
    let all: BTreeSet<usize> = (0..mesh.num_triangles()).collect();
    let (m1, _) = mesh.bisect_marked(&all)?;
    let (m2, _) = m1.uniform_refine()?;
    Ok(mesh
        .min_angle()
        .min(m1.min_angle())
        .min(m2.min_angle())
        .to_f64_lossy())
}

impl<T: Real> AdaptiveState<T> {
    pub fn new(
        problem: ProblemSpec<T>,
        algorithm: Algorithm,
        params: MarkingParams,
        options: RunOptions,
    ) -> Result<Self> {
        params.validate()?;
        let mesh = Arc::new(problem.initial_mesh.clone());
        let report = RunReport {
            problem: problem.name.clone(),
            algorithm,
            k: problem.k,
            params: params.clone(),
            tol_used: params.tol,
            steps: Vec::new(),
            stop: StopReason::MaxSteps,
            converged: false,
            error_source: ErrorSource::None,
            fitted_rate: None,
            eta_geometric_ratio: None,
            cardinality_max_after_burn_in: None,
            localized_max: None,
            localized_median: None,
            contraction: Contraction::default(),
            min_angle_run: f64::INFINITY,
            min_angle_initial_sweeps: min_angle_two_sweeps(&mesh)?,
        };
        let tol = if params.rel_tol.is_some() {
            None
        } else {
            Some(params.tol)
        };
        Ok(AdaptiveState {
            problem,
            algorithm,
            params,
            options,
            tol,
            run: AdaptiveRun {
                report,
                meshes: Vec::new(),
                records: Vec::new(),
                solutions: Vec::new(),
                indicators: Vec::new(),
                marked: Vec::new(),
            },
            complexes: Vec::new(),
            pending: Some((mesh, RefinementRecord::default())),
        })
    }

    pub fn run(&self) -> &AdaptiveRun<T> {
        &self.run
    }

    /// Solve on the current mesh, estimate, and either stop or mark and refine.
    pub fn step(&mut self) -> Result<StepOutcome> {
        let started = Instant::now();
        let Some((mesh, incoming)) = self.pending.take() else {
            return Ok(StepOutcome::Stop(self.run.report.stop));
        };
        let k = self.problem.k;
        let step = self.run.meshes.len();
        let complex = Arc::new(DiscreteComplex::new(mesh.clone())?);
        let complex_exact = complex
            .incidence(1)?
            .matmul(complex.incidence(0)?)
            .is_zero();
        let op = HodgeOperator::new(complex.clone(), k)?;
        let harmonic = op.harmonic_basis(Some(self.problem.expected_betti))?;
        let sol = op.solve(Load::Analytic(&self.problem.f), &harmonic)?;
        let pv = sol.p_vector();
        let p_defects = op.harmonic_defects(pv.values())?;
        let p_norm = complex
            .mass(k)
            .norm_sq(pv.values())
            .max(T::zero())
            .sqrt()
            .to_f64_lossy();

        let f = &self.problem.f;
        let sigma_f = estimators::eta_sigma(&sol, f)?;
        let p_f = estimators::eta_p(&sol, f)?;
        let (du_f, ds_f) = if k == 1 {
            (
                Some(estimators::eta_du(&sol, f)?),
                Some(estimators::eta_dsigma(&sol, f)?),
            )
        } else {
            (None, None)
        };
        let osc_f = estimators::oscillation(&sol, f)?;
        let osc_excess = osc_f
            .values
            .iter()
            .zip(&sigma_f.values)
            .map(|(o, s)| (*o - *s).to_f64_lossy())
            .fold(f64::NEG_INFINITY, f64::max);

        let eta_sigma = sigma_f.estimate().to_f64_lossy();
        let eta_p = p_f.estimate().to_f64_lossy();
        let eta_du = du_f.as_ref().map(|d| d.estimate().to_f64_lossy());
        let eta = match self.algorithm {
            Algorithm::Amfem1 => {
                (eta_sigma.powi(2) + eta_p.powi(2) + eta_du.unwrap_or(0.0).powi(2)).sqrt()
            }
            _ => eta_sigma,
        };
        let tol = *self
            .tol
            .get_or_insert_with(|| self.params.rel_tol.unwrap_or(1.0) * eta);
        self.run.report.tol_used = tol;

        let mut rec = StepRecord {
            step,
            ntri: mesh.num_triangles(),
            ndof: ndof(&mesh, k),
            eta_sigma,
            eta_p: if k == 1 { Some(eta_p) } else { None },
            eta_du,
            eta_dsigma: ds_f.as_ref().map(|d| d.estimate().to_f64_lossy()),
            eta,
            harmonic_dim: harmonic.dim(),
            p_norm,
            solve_residual: sol.solve_residual.to_f64_lossy(),
            galerkin_residuals: (
                sol.galerkin_residuals.0.to_f64_lossy(),
                sol.galerkin_residuals.1.to_f64_lossy(),
            ),
            p_defects: (p_defects.0.to_f64_lossy(), p_defects.1.to_f64_lossy()),
            complex_exact,
            osc: osc_f.estimate().to_f64_lossy(),
            osc_excess,
            marking_ok: true,
            min_angle: mesh.min_angle().to_f64_lossy(),
            ..Default::default()
        };

        if step > 0 {
            let m0 = self.run.meshes[0].num_triangles() as f64;
            let marked_sum: usize = self.run.marked.iter().map(|m| m.len()).sum();
            if marked_sum > 0 {
                rec.cardinality_ratio =
                    Some((mesh.num_triangles() as f64 - m0) / marked_sum as f64);
            }
            let prev = &self.run.solutions[step - 1];
            let pk = prev
                .harmonic
                .prolong(complex.space(k), &incoming.child_to_parent)?;
            let g = gap(pk.columns(), harmonic.columns(), complex.mass(k))?;
            rec.gap = Some((g.0.to_f64_lossy(), g.1.to_f64_lossy()));
            if self.options.diagnostics {
                rec.localized = Some(estimators::localized_bound_ratio(
                    prev, &sol, &incoming, f, &complex,
                )?);
                if k == 2 || self.problem.exact.is_some() {
                    rec.ortho = Some(check_orthogonality(
                        prev,
                        &sol,
                        &incoming,
                        &self.problem,
                        &complex,
                    )?);
                }
            }
        }

        let converged = eta <= tol;
        let stop = if converged {
            Some(StopReason::Tolerance)
        } else if step >= self.params.max_steps {
            Some(StopReason::MaxSteps)
        } else {
            None
        };

        let mut marked = BTreeSet::new();
        let mut next = None;
        if stop.is_none() {
            let (fine, record) = match self.algorithm {
                Algorithm::Uniform => {
                    marked = (0..mesh.num_triangles()).collect();
                    mesh.uniform_refine()?
                }
                Algorithm::Amfem2 => {
                    marked = dorfler_mark(&sigma_f.values, self.params.theta);
                    rec.marking_ok = satisfies_dorfler(&marked, &sigma_f.values, self.params.theta);
                    mesh.bisect_marked(&marked)?
                }
                Algorithm::Amfem1 => {
                    marked = dorfler_mark(&sigma_f.values, self.params.theta_sigma);
                    if k == 1 {
                        extend_marking(&mut marked, &p_f.values, self.params.theta_p);
                        if let Some(du) = &du_f {
                            extend_marking(&mut marked, &du.values, self.params.theta_du);
                        }
                    }
                    rec.marking_ok =
                        satisfies_dorfler(&marked, &sigma_f.values, self.params.theta_sigma)
                            && (k == 2
                                || (satisfies_dorfler(&marked, &p_f.values, self.params.theta_p)
                                    && du_f.as_ref().is_some_and(|d| {
                                        satisfies_dorfler(&marked, &d.values, self.params.theta_du)
                                    })));
                    mesh.bisect_marked(&marked)?
                }
            };
            rec.marked = marked.len();
            if !marked.is_empty() {
                let near = marked
                    .iter()
                    .filter(|&&t| {
                        let c = mesh.corners(t);
                        let x = (c[0][0] + c[1][0] + c[2][0]).to_f64_lossy() / 3.0;
                        let y = (c[0][1] + c[1][1] + c[2][1]).to_f64_lossy() / 3.0;
                        (x * x + y * y).sqrt() <= 0.25
                    })
                    .count();
                rec.marked_near_origin = Some(near as f64 / marked.len() as f64);
            }
            next = Some((Arc::new(fine), record));
        }

        let mut outcome = StepOutcome::Continue;
        if let Some(s) = stop {
            self.run.report.stop = s;
            outcome = StepOutcome::Stop(s);
        } else if let Some((fine, _)) = &next {
            if ndof(fine, k) > self.params.ndof_cap {
                self.run.report.stop = StopReason::NdofCap;
                outcome = StepOutcome::Stop(StopReason::NdofCap);
            }
        }
        self.run.report.converged = converged;
        if self.options.timing {
            rec.seconds = Some(started.elapsed().as_secs_f64());
        }
        self.run.report.min_angle_run = self.run.report.min_angle_run.min(rec.min_angle);
        self.run.report.steps.push(rec);
        if step > 0 {
            self.run.records.push(incoming);
        }
        self.run.meshes.push(mesh);
        self.run.solutions.push(sol);
        self.run.indicators.push(StepIndicators {
            sigma: sigma_f,
            p: p_f,
            du: du_f,
            dsigma: ds_f,
            osc: osc_f,
        });
        self.run.marked.push(marked);
        self.complexes.push(complex);
        if matches!(outcome, StepOutcome::Continue) {
            self.pending = next;
        }
        Ok(outcome)
    }

    /// Runs to completion and computes the run-level summaries.
    pub fn finish(mut self) -> Result<AdaptiveRun<T>> {
        while let StepOutcome::Continue = self.step()? {}
        if self.options.errors {
            self.compute_errors()?;
        }
        self.summarize();
        Ok(self.run)
    }

    fn compute_errors(&mut self) -> Result<()> {
        let k = self.problem.k;
        if let Some(ex) = &self.problem.exact {
            self.run.report.error_source = ErrorSource::Exact;
            for (rec, sol) in self.run.report.steps.iter_mut().zip(&self.run.solutions) {
                let e = exact_errors(sol, ex)?;
                rec.err_sigma_l2 = Some(e[0]);
                rec.err_dsigma_l2 = Some(e[1]);
                rec.err_p = Some(e[2]);
                rec.err_du = Some(e[3]);
            }
        } else {
            self.run.report.error_source = ErrorSource::Reference;
            let last = self.run.meshes.last().expect("at least one step");
            let (mut ref_mesh, mut ref_rec) = (
                (**last).clone(),
                RefinementRecord::identity(last.num_triangles()),
            );
            for _ in 0..self.options.reference_levels.max(1) {
                let (m, r) = ref_mesh.uniform_refine()?;
                ref_rec = ref_rec.compose(&r);
                ref_mesh = m;
            }
            let ref_complex = Arc::new(DiscreteComplex::new(Arc::new(ref_mesh))?);
            let op = HodgeOperator::new(ref_complex.clone(), k)?;
            let h = op.harmonic_basis(Some(self.problem.expected_betti))?;
            let reference = op.solve(Load::Analytic(&self.problem.f), &h)?;
            let mut anc = ref_rec.child_to_parent.clone();
            let n = self.run.meshes.len();
            for l in (0..n).rev() {
                let e = reference_error(&self.run.solutions[l], &reference, &anc, &ref_complex)?;
                let rec = &mut self.run.report.steps[l];
                rec.err_sigma_l2 = Some(e[0]);
                rec.err_dsigma_l2 = Some(e[1]);
                rec.err_p = Some(e[2]);
                rec.err_du = Some(e[3]);
                if l > 0 {
                    let up = &self.run.records[l - 1].child_to_parent;
                    anc = anc.iter().map(|&t| up[t]).collect();
                }
            }
        }
        let steps = &mut self.run.report.steps;
        for rec in steps.iter_mut() {
            let es = rec.err_sigma_l2.unwrap_or(0.0);
            let eds = rec.err_dsigma_l2.unwrap_or(0.0);
            rec.effectivity = Some(estimators::effectivity(
                [
                    rec.eta_sigma,
                    rec.eta_p.unwrap_or(0.0),
                    rec.eta_du.unwrap_or(0.0),
                ],
                [
                    (es * es + eds * eds).sqrt(),
                    rec.err_p.unwrap_or(0.0),
                    rec.err_du.unwrap_or(0.0),
                ],
            ));
        }
        // inequality slacks of the error-reduction lemma need e-terms of both steps
        for l in 1..steps.len() {
            let (a, b) = steps.split_at_mut(l);
            let (prev, cur) = (&a[l - 1], &mut b[0]);
            if let Some(o) = cur.ortho.as_mut() {
                let sq = |v: Option<f64>| v.map(|x| x * x);
                if let (
                    Some(es0),
                    Some(es1),
                    Some(ep0),
                    Some(ep1),
                    Some(ed0),
                    Some(ed1),
                    Some(eds1),
                ) = (
                    sq(prev.err_sigma_l2),
                    sq(cur.err_sigma_l2),
                    sq(prev.err_p),
                    sq(cur.err_p),
                    sq(prev.err_du),
                    sq(cur.err_du),
                    sq(cur.err_dsigma_l2),
                ) {
                    o.c_qo_sigma_required = if o.delta_dsigma > 0.0 {
                        Some(((es1 - 2.0 * es0 + o.delta_sigma) / (4.0 * o.delta_dsigma)).max(0.0))
                    } else {
                        None
                    };
                    o.ortho3_slack = Some(ep0 - 0.5 * o.delta_p + 2.0 * eds1 - ep1);
                    let denom = eds1 + ep1;
                    o.c_qo_du_required = if denom > 0.0 {
                        Some(((ed1 - ed0 + 0.5 * o.delta_du) / (4.0 * denom)).max(0.0))
                    } else {
                        None
                    };
                }
            }
        }
        Ok(())
    }

    fn summarize(&mut self) {
        let r = &mut self.run.report;
        r.fitted_rate = r.eta_rate(6);
        let etas: Vec<f64> = r.steps.iter().map(|s| s.eta).collect();
        if etas.len() >= 2 && etas[0] > 0.0 && *etas.last().unwrap() > 0.0 {
            r.eta_geometric_ratio =
                Some((etas.last().unwrap() / etas[0]).powf(1.0 / (etas.len() - 1) as f64));
        }
        r.cardinality_max_after_burn_in = r
            .steps
            .iter()
            .skip(4)
            .filter_map(|s| s.cardinality_ratio)
            .fold(None, |m, v| Some(m.map_or(v, |m: f64| m.max(v))));
        let mut loc: Vec<f64> = r
            .steps
            .iter()
            .filter_map(|s| s.localized.map(|l| l.ratio))
            .collect();
        if !loc.is_empty() {
            loc.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
            r.localized_max = loc.last().copied();
            r.localized_median = Some(median(&loc));
        }
        r.contraction = contraction_search(&r.steps);
    }
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Grid search over `ζ, ρ ∈ {10^a : a = -3..3}` for a strictly decreasing quasi-error
/// `Q_ℓ = e_σ² + ζ e_dσ² + ρ η_σ²`.
pub fn contraction_search(steps: &[StepRecord]) -> Contraction {
    let data: Option<Vec<(f64, f64, f64)>> = steps
        .iter()
        .map(|s| {
            Some((
                s.err_sigma_l2?.powi(2),
                s.err_dsigma_l2?.powi(2),
                s.eta_sigma.powi(2),
            ))
        })
        .collect();
    let Some(data) = data else {
        return Contraction::default();
    };
    if data.len() < 2 {
        return Contraction::default();
    }
    let grid: Vec<f64> = (-3..=3).map(|a| 10f64.powi(a)).collect();
    let mut best: Option<(f64, f64, f64)> = None;
    for &zeta in &grid {
        for &rho in &grid {
            let q: Vec<f64> = data
                .iter()
                .map(|(a, b, c)| a + zeta * b + rho * c)
                .collect();
            let worst = q.windows(2).map(|w| w[1] / w[0]).fold(0.0, f64::max);
            if worst < 1.0 && best.is_none_or(|b| worst < b.2) {
                best = Some((zeta, rho, worst));
            }
        }
    }
    match best {
        Some((zeta, rho, worst)) => Contraction {
            contractive: true,
            zeta: Some(zeta),
            rho: Some(rho),
            max_ratio: Some(worst),
            quasi_errors: data
                .iter()
                .map(|(a, b, c)| a + zeta * b + rho * c)
                .collect(),
        },
        None => Contraction::default(),
    }
}

/// `[‖σ − σ_h‖, ‖d(σ − σ_h)‖, ‖p − p_h‖, ‖d(u − u_h)‖]` against closed forms.
pub fn exact_errors<T: Real>(sol: &MixedSolution<T>, ex: &ExactSolution<T>) -> Result<[f64; 4]> {
    let (es, eds) = sol.sigma.norms(Some(&ex.sigma))?;
    let (ep, _) = sol.p_vector().norms(Some(&ex.p))?;
    let edu = if sol.k() < 2 {
        sol.u.norms(Some(&ex.u))?.1
    } else {
        T::zero()
    };
    Ok([
        es.to_f64_lossy(),
        eds.to_f64_lossy(),
        ep.to_f64_lossy(),
        edu.to_f64_lossy(),
    ])
}

/// Errors of `sol` against `reference` on a nested finer mesh; `ancestors` maps reference
/// triangles to triangles of `sol`'s mesh.
pub fn reference_error<T: Real>(
    sol: &MixedSolution<T>,
    reference: &MixedSolution<T>,
    ancestors: &[usize],
    ref_complex: &DiscreteComplex<T>,
) -> Result<[f64; 4]> {
    let k = sol.k();
    if ancestors.len() != reference.mesh().num_triangles() || reference.k() != k {
        return Err(HodgeError::NonNested);
    }
    let diff = |a: &CoefficientVector<T>, b: &CoefficientVector<T>| -> Result<Vec<T>> {
        let pb = b.prolong(a.space(), ancestors)?;
        Ok(a.values()
            .iter()
            .zip(pb.values())
            .map(|(x, y)| *x - *y)
            .collect())
    };
    let ds = diff(&reference.sigma, &sol.sigma)?;
    let dp = diff(&reference.p_vector(), &sol.p_vector())?;
    let du = diff(&reference.u, &sol.u)?;
    let es = ref_complex.mass(k - 1).norm_sq(&ds).max(T::zero()).sqrt();
    let eds = ref_complex.derivative_norm(k - 1, &ds);
    let ep = ref_complex.mass(k).norm_sq(&dp).max(T::zero()).sqrt();
    let edu = ref_complex.derivative_norm(k, &du);
    Ok([
        es.to_f64_lossy(),
        eds.to_f64_lossy(),
        ep.to_f64_lossy(),
        edu.to_f64_lossy(),
    ])
}

/// Consecutive-step orthogonality: `r₁` and the Δ-terms, evaluated on the finer mesh.
pub fn check_orthogonality<T: Real>(
    prev: &MixedSolution<T>,
    next: &MixedSolution<T>,
    record: &RefinementRecord,
    problem: &ProblemSpec<T>,
    fine: &DiscreteComplex<T>,
) -> Result<OrthoRecord> {
    let k = next.k();
    let mesh = next.mesh();
    let ps = prev
        .sigma
        .prolong(next.sigma.space(), &record.child_to_parent)?;
    let pu = prev.u.prolong(next.u.space(), &record.child_to_parent)?;
    let pp = prev
        .p_vector()
        .prolong(next.u.space(), &record.child_to_parent)?;
    let sub = |a: &[T], b: &[T]| -> Vec<T> { a.iter().zip(b).map(|(x, y)| *x - *y).collect() };
    let ds = sub(ps.values(), next.sigma.values());
    let dsq = |v: T| v.to_f64_lossy().powi(2);
    let delta_sigma = fine.mass(k - 1).norm_sq(&ds).to_f64_lossy();
    let delta_dsigma = dsq(fine.derivative_norm(k - 1, &ds));
    let delta_p = fine
        .mass(k)
        .norm_sq(&sub(pp.values(), next.p_vector().values()))
        .to_f64_lossy();
    let delta_du = dsq(fine.derivative_norm(k, &sub(pu.values(), next.u.values())));

    // dσ as the data (k = 2) or the exact derivative (k = 1)
    let target: &AnalyticForm<T> = if k == 2 {
        &problem.f
    } else {
        match &problem.exact {
            Some(ex) if ex.sigma.has_exterior() => &ex.sigma,
            _ => return Err(HodgeError::MissingExact),
        }
    };
    let d_next = next.sigma.elementwise_derivative()?;
    let d_prev = ps.elementwise_derivative()?;
    let (mut r1, mut norm, mut e_next, mut e_prev, mut delta) =
        (T::zero(), T::zero(), T::zero(), T::zero(), T::zero());
    for t in 0..mesh.num_triangles() {
        let el = Element::new(mesh, t);
        let root = mesh.root()[t];
        for (_, x, w) in el.quadrature() {
            let exact = if k == 2 {
                target.eval_in(root, x)
            } else {
                target.exterior_in(root, x).expect("checked")
            };
            let a = exact.sub(d_next[t]);
            let b = d_prev[t].sub(d_next[t]);
            let c = exact.sub(d_prev[t]);
            r1 += w * proxy_dot(a, b);
            norm += w * exact.norm_sq();
            e_next += w * a.norm_sq();
            e_prev += w * c.norm_sq();
            delta += w * b.norm_sq();
        }
    }
    let nrm = norm.to_f64_lossy().max(f64::MIN_POSITIVE);
    Ok(OrthoRecord {
        r1: r1.to_f64_lossy(),
        r1_relative: r1.to_f64_lossy().abs() / nrm,
        pythagoras_defect: (e_next + delta - e_prev).to_f64_lossy().abs() / nrm,
        delta_sigma,
        delta_dsigma,
        delta_p,
        delta_du,
        ..Default::default()
    })
}

fn proxy_dot<T: Real>(a: crate::forms::Proxy<T>, b: crate::forms::Proxy<T>) -> T {
    use crate::forms::Proxy::*;
    match (a, b) {
        (Scalar(x), Scalar(y)) => x * y,
        (Vector(x), Vector(y)) => x[0] * y[0] + x[1] * y[1],
        _ => panic!("mixed proxy kinds"),
    }
}

pub fn run<T: Real>(
    problem: ProblemSpec<T>,
    algorithm: Algorithm,
    params: MarkingParams,
    options: RunOptions,
) -> Result<AdaptiveRun<T>> {
    AdaptiveState::new(problem, algorithm, params, options)?.finish()
}

pub fn amfem1_run<T: Real>(
    problem: ProblemSpec<T>,
    params: MarkingParams,
) -> Result<AdaptiveRun<T>> {
    run(problem, Algorithm::Amfem1, params, RunOptions::default())
}

pub fn amfem2_run<T: Real>(
    problem: ProblemSpec<T>,
    params: MarkingParams,
) -> Result<AdaptiveRun<T>> {
    run(problem, Algorithm::Amfem2, params, RunOptions::default())
}
