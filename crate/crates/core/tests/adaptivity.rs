use std::sync::Arc;

use hodgefem::adaptivity::{
    check_orthogonality, dorfler_mark, fit_rate, run, satisfies_dorfler, AdaptiveRun,
    AdaptiveState, Algorithm, MarkingParams, RunOptions, StepOutcome, StopReason,
};
use hodgefem::forms::{AnalyticForm, FormSpace};
use hodgefem::mesh::RefinementRecord;
use hodgefem::problems::by_name;
use hodgefem::solver::DiscreteComplex;

fn quick(name: &str, alg: Algorithm, steps: usize) -> AdaptiveRun<f64> {
    let params = MarkingParams {
        max_steps: steps,
        tol: 1e-12,
        ..Default::default()
    };
    run(by_name(name).unwrap(), alg, params, RunOptions::default()).unwrap()
}

#[test]
fn fit_rate_recovers_slopes_with_noise() {
    let noise = [0.01, -0.01, 0.005, -0.007, 0.0, 0.008, -0.004];
    let pts: Vec<(f64, f64)> = noise
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let n = 10.0 * 2f64.powi(i as i32);
            (n, 3.0 * n.powf(-0.5) * (1.0 + e))
        })
        .collect();
    assert!((fit_rate(&pts).unwrap() - 0.5).abs() < 0.01);
    assert!(fit_rate(&pts[..2]).is_err());
    assert!(fit_rate(&[(1.0, 1.0), (1.0, 2.0), (1.0, 3.0)]).is_err());
    assert!(fit_rate(&[(1.0, 1.0), (2.0, 0.0), (3.0, 3.0)]).is_err());
}

#[test]
fn dorfler_examples() {
    let v = [4.0, 1.0, 3.0, 2.0];
    assert_eq!(
        dorfler_mark(&v, 0.5).into_iter().collect::<Vec<_>>(),
        vec![0]
    );
    assert_eq!(
        dorfler_mark(&v, 0.9).into_iter().collect::<Vec<_>>(),
        vec![0, 2, 3]
    );
    assert!(dorfler_mark(&[0.0, 0.0], 0.5).is_empty());
    // ties break by element id
    assert_eq!(
        dorfler_mark(&[1.0, 1.0, 1.0, 1.0], 0.5)
            .into_iter()
            .collect::<Vec<_>>(),
        vec![0]
    );
}

#[test]
fn large_tolerance_stops_at_the_initial_mesh() {
    let params = MarkingParams {
        tol: 1e6,
        ..Default::default()
    };
    let r = run(
        by_name::<f64>("square-k1").unwrap(),
        Algorithm::Amfem1,
        params,
        RunOptions::default(),
    )
    .unwrap();
    assert_eq!(r.report.steps.len(), 1);
    assert_eq!(r.report.stop, StopReason::Tolerance);
    assert!(r.report.converged);
}

#[test]
fn zero_data_stops_immediately() {
    let mut p = by_name::<f64>("lshape-k2").unwrap();
    p.f = AnalyticForm::zero(2);
    let r = run(
        p,
        Algorithm::Amfem2,
        MarkingParams::default(),
        RunOptions {
            errors: false,
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(r.report.steps.len(), 1);
    assert_eq!(r.report.steps[0].eta, 0.0);
    assert_eq!(r.report.stop, StopReason::Tolerance);
}

#[test]
fn step_and_ndof_caps() {
    let r = quick("square-k2", Algorithm::Amfem2, 3);
    assert_eq!(r.report.stop, StopReason::MaxSteps);
    assert_eq!(r.report.steps.len(), 4);
    assert_eq!(r.records.len(), 3);
    let params = MarkingParams {
        max_steps: 50,
        tol: 1e-12,
        ndof_cap: 500,
        ..Default::default()
    };
    let r = run(
        by_name::<f64>("square-k2").unwrap(),
        Algorithm::Uniform,
        params,
        RunOptions::default(),
    )
    .unwrap();
    assert_eq!(r.report.stop, StopReason::NdofCap);
    assert!(r.report.steps.iter().all(|s| s.ndof <= 500));
}

#[test]
fn invalid_parameters_are_rejected() {
    for params in [
        MarkingParams {
            theta: 1.0,
            ..Default::default()
        },
        MarkingParams {
            theta_p: 0.0,
            ..Default::default()
        },
        MarkingParams {
            tol: -1.0,
            ..Default::default()
        },
        MarkingParams {
            rel_tol: Some(0.0),
            ..Default::default()
        },
    ] {
        assert!(AdaptiveState::new(
            by_name::<f64>("square-k1").unwrap(),
            Algorithm::Amfem1,
            params,
            RunOptions::default()
        )
        .is_err());
    }
}

#[test]
fn identical_solutions_have_zero_increments() {
    let r = quick("square-k1", Algorithm::Amfem1, 1);
    let sol = &r.solutions[0];
    let p = by_name::<f64>("square-k1").unwrap();
    let complex = DiscreteComplex::new(r.meshes[0].clone()).unwrap();
    let id = RefinementRecord::identity(r.meshes[0].num_triangles());
    let o = check_orthogonality(sol, sol, &id, &p, &complex).unwrap();
    for d in [o.delta_sigma, o.delta_dsigma, o.delta_p, o.delta_du] {
        assert!(d.abs() < 1e-28, "{d}");
    }
    assert!(o.r1.abs() < 1e-14);
}

#[test]
fn markings_satisfy_every_bulk_criterion() {
    for (name, alg) in [
        ("square-k1", Algorithm::Amfem1),
        ("annulus-k1", Algorithm::Amfem1),
        ("lshape-k2", Algorithm::Amfem2),
    ] {
        let r = quick(name, alg, 6);
        let theta = 0.3;
        for (i, ind) in r.indicators.iter().enumerate().take(r.marked.len() - 1) {
            let m = &r.marked[i];
            assert!(satisfies_dorfler(m, &ind.sigma.values, theta));
            if alg == Algorithm::Amfem1 {
                assert!(satisfies_dorfler(m, &ind.p.values, theta));
                assert!(satisfies_dorfler(
                    m,
                    &ind.du.as_ref().unwrap().values,
                    theta
                ));
            } else {
                assert_eq!(m, &dorfler_mark(&ind.sigma.values, theta));
            }
            assert!(r.report.steps[i].marking_ok);
            assert!(m.is_subset(&r.records[i].refined_set));
        }
    }
}

#[test]
fn estimators_decrease_geometrically() {
    for alg in [Algorithm::Amfem1, Algorithm::Amfem2] {
        let r = quick("square-k1", alg, 10);
        assert!(r.report.eta_geometric_ratio.unwrap() < 1.0, "{alg:?}");
    }
}

#[test]
fn run_angles_stay_above_the_initial_sweeps() {
    for name in ["lshape-k2", "annulus-k1"] {
        let alg = if name == "lshape-k2" {
            Algorithm::Amfem2
        } else {
            Algorithm::Amfem1
        };
        let r = quick(name, alg, 8).report;
        assert!(r.min_angle_run >= r.min_angle_initial_sweeps - 1e-12);
    }
}

#[test]
fn annulus_p_is_harmonic_and_nontrivial() {
    let r = quick("annulus-k1", Algorithm::Amfem1, 4);
    let p = by_name::<f64>("annulus-k1").unwrap();
    let f_norm = FormSpace::new(
        Arc::new(
            p.initial_mesh
                .uniform_refine()
                .unwrap()
                .0
                .uniform_refine()
                .unwrap()
                .0,
        ),
        1,
    )
    .unwrap()
    .zeros()
    .norms(Some(
        &p.f.clone()
            .with_exterior(|_| hodgefem::forms::Proxy::Scalar(0.0)),
    ))
    .unwrap()
    .0;
    for s in &r.report.steps {
        assert!(
            s.p_defects.0 <= 1e-8 && s.p_defects.1 <= 1e-8,
            "{:?}",
            s.p_defects
        );
        assert!(s.p_norm > 0.1 * f_norm, "{} vs {f_norm}", s.p_norm);
        assert_eq!(s.harmonic_dim, 1);
    }
}

#[test]
fn stepwise_driver_matches_run() {
    let p = by_name::<f64>("square-k2").unwrap();
    let params = MarkingParams {
        max_steps: 3,
        tol: 1e-12,
        ..Default::default()
    };
    let mut state = AdaptiveState::new(
        p.clone(),
        Algorithm::Amfem2,
        params.clone(),
        RunOptions::default(),
    )
    .unwrap();
    let mut n = 0;
    while let StepOutcome::Continue = state.step().unwrap() {
        n += 1;
    }
    assert_eq!(n, 3);
    let a = state.finish().unwrap().report;
    let b = run(p, Algorithm::Amfem2, params, RunOptions::default())
        .unwrap()
        .report;
    assert_eq!(a.to_csv(), b.to_csv());
}

#[test]
fn csv_has_one_row_per_step() {
    let r = quick("square-k1", Algorithm::Amfem2, 3).report;
    let csv = r.to_csv();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap().split(',').count(), 14);
    assert_eq!(lines.count(), r.steps.len());
    let json: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
    assert_eq!(json["steps"].as_array().unwrap().len(), r.steps.len());
    assert_eq!(json["algorithm"], "amfem2");
}
