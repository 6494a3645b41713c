use std::sync::Arc;

use hodgefem::adaptivity::{exact_errors, reference_error};
use hodgefem::forms::AnalyticForm;
use hodgefem::problems::{self, ProblemSpec};
use hodgefem::solver::{gap, DiscreteComplex, HodgeOperator, Load};
use hodgefem::sparse::write_coordinate;
use hodgefem::{HodgeError, Mesh64};

fn refined(m: &Mesh64, times: usize) -> Mesh64 {
    let mut m = m.clone();
    for _ in 0..times {
        m = m.uniform_refine().unwrap().0;
    }
    m
}

fn operator(p: &ProblemSpec<f64>, levels: usize, k: usize) -> HodgeOperator<f64> {
    let mesh = Arc::new(refined(&p.initial_mesh, levels));
    HodgeOperator::new(Arc::new(DiscreteComplex::new(mesh).unwrap()), k).unwrap()
}

#[test]
fn harmonic_dimensions_match_betti_numbers() {
    for (name, k, betti) in [
        ("square-k1", 1, 0),
        ("annulus-k1", 1, 1),
        ("square-k2", 2, 0),
        ("annulus-k1", 2, 0),
        ("lshape-k2", 2, 0),
    ] {
        let p = problems::by_name::<f64>(name).unwrap();
        for lev in [0, 2] {
            let op = operator(&p, lev, k);
            let h = op.harmonic_basis(None).unwrap();
            assert_eq!(h.dim(), betti, "{name} k={k} level {lev}");
            for q in h.columns() {
                let (a, b) = op.harmonic_defects(q).unwrap();
                assert!(a <= 1e-8 && b <= 1e-8, "{a} {b}");
            }
        }
    }
}

#[test]
fn square_k2_sigma_converges_linearly() {
    let p = problems::make_square_smooth_k2::<f64>().unwrap();
    let ex = p.exact.as_ref().unwrap();
    let mut errs = Vec::new();
    for lev in 1..5 {
        let op = operator(&p, lev, 2);
        let h = op.harmonic_basis(Some(0)).unwrap();
        let sol = op.solve(Load::Analytic(&p.f), &h).unwrap();
        assert!(sol.solve_residual < 1e-10, "{}", sol.solve_residual);
        errs.push(sol.sigma.norms(Some(&ex.sigma)).unwrap().0);
    }
    for w in errs.windows(2) {
        let rate = (w[0] / w[1]).log2();
        assert!((rate - 1.0).abs() < 0.15, "{errs:?}");
    }
}

#[test]
fn zero_load_gives_the_zero_solution() {
    for name in ["square-k1", "annulus-k1", "lshape-k2"] {
        let p = problems::by_name::<f64>(name).unwrap();
        let op = operator(&p, 1, p.k);
        let h = op.harmonic_basis(None).unwrap();
        let sol = op
            .solve(Load::Analytic(&AnalyticForm::zero(p.k)), &h)
            .unwrap();
        assert!(sol
            .sigma
            .values()
            .iter()
            .chain(sol.u.values())
            .chain(&sol.p)
            .all(|&v| v == 0.0));
    }
}

#[test]
fn harmonic_load_is_absorbed_by_p() {
    let p = problems::by_name::<f64>("annulus-k1").unwrap();
    let op = operator(&p, 1, 1);
    let h = op.harmonic_basis(Some(1)).unwrap();
    let q = h.column(0).unwrap();
    let sol = op.solve(Load::Discrete(&q), &h).unwrap();
    let m = op.complex().mass(1);
    let scale = m.norm_sq(q.values()).sqrt();
    assert!(m.norm_sq(sol.u.values()).sqrt() <= 1e-9 * scale);
    assert!(op.complex().mass(0).norm_sq(sol.sigma.values()).sqrt() <= 1e-9 * scale);
    let pv = sol.p_vector();
    let diff: Vec<f64> = pv
        .values()
        .iter()
        .zip(q.values())
        .map(|(a, b)| a - b)
        .collect();
    assert!(m.norm_sq(&diff).sqrt() <= 1e-9 * scale);
}

#[test]
fn hodge_decomposition_of_exact_and_harmonic_vectors() {
    let p = problems::by_name::<f64>("annulus-k1").unwrap();
    let op = operator(&p, 1, 1);
    let h = op.harmonic_basis(Some(1)).unwrap();
    let c = op.complex();
    let s0 = c.space(0);
    let alpha: Vec<f64> = (0..s0.ndof())
        .map(|i| ((i * 7 % 11) as f64 - 5.0) / 3.0)
        .collect();
    let da = c.derivative(0).unwrap().matvec(&alpha);
    let v = c.space(1).vector(da.clone()).unwrap();
    let parts = op.hodge_decompose(&v, &h).unwrap();
    let m = c.mass(1);
    let n = m.norm_sq(&da).sqrt();
    assert!(m.norm_sq(parts.harmonic.values()).sqrt() <= 1e-10 * n);
    assert!(m.norm_sq(parts.coexact.values()).sqrt() <= 1e-10 * n);

    let parts = op.hodge_decompose(&h.column(0).unwrap(), &h).unwrap();
    assert!(m.norm_sq(parts.exact.values()).sqrt() <= 1e-10);
    assert!(m.norm_sq(parts.coexact.values()).sqrt() <= 1e-10);
}

#[test]
fn harmonic_basis_is_mass_orthonormal() {
    let p = problems::by_name::<f64>("annulus-k1").unwrap();
    let op = operator(&p, 2, 1);
    let h = op.harmonic_basis(Some(1)).unwrap();
    let q = &h.columns()[0];
    assert!((op.complex().mass(1).norm_sq(q) - 1.0).abs() < 1e-12);
    assert!(matches!(
        op.harmonic_basis(Some(2)),
        Err(HodgeError::HarmonicDimension { .. })
    ));
}

#[test]
fn gap_bounds() {
    let p = problems::by_name::<f64>("annulus-k1").unwrap();
    let op = operator(&p, 1, 1);
    let m = op.complex().mass(1);
    let q = op.harmonic_basis(Some(1)).unwrap().columns().to_vec();
    let (a, b) = gap(&q, &q, m).unwrap();
    assert!(a < 1e-7 && b < 1e-7);
    let scaled: Vec<Vec<f64>> = q
        .iter()
        .map(|c| c.iter().map(|v| -3.0 * v).collect())
        .collect();
    let (a, b) = gap(&q, &scaled, m).unwrap();
    assert!(a < 1e-7 && b < 1e-7);
    assert_eq!(gap::<f64>(&[], &[], m).unwrap(), (0.0, 0.0));
    assert_eq!(gap(&q, &[], m).unwrap(), (1.0, 1.0));

    let coarse = operator(&p, 0, 1);
    let (fine_mesh, rec) = coarse.complex().mesh().uniform_refine().unwrap();
    let fine = HodgeOperator::new(
        Arc::new(DiscreteComplex::new(Arc::new(fine_mesh)).unwrap()),
        1,
    )
    .unwrap();
    let hc = coarse
        .harmonic_basis(Some(1))
        .unwrap()
        .prolong(fine.complex().space(1), &rec.child_to_parent)
        .unwrap();
    let hf = fine.harmonic_basis(Some(1)).unwrap();
    let (a, b) = gap(hc.columns(), hf.columns(), fine.complex().mass(1)).unwrap();
    assert!(a < 0.9 && b < 0.9 && (a - b).abs() < 1e-8, "{a} {b}");
}

#[test]
fn reference_errors() {
    let p = problems::make_square_smooth_k2::<f64>().unwrap();
    let ex = p.exact.as_ref().unwrap();
    let coarse = operator(&p, 1, 2);
    let sol = coarse
        .solve(
            Load::Analytic(&p.f),
            &coarse.harmonic_basis(Some(0)).unwrap(),
        )
        .unwrap();
    let identity: Vec<usize> = (0..coarse.complex().mesh().num_triangles()).collect();
    let same = reference_error(&sol, &sol, &identity, coarse.complex()).unwrap();
    assert!(same.iter().all(|&e| e < 1e-14), "{same:?}");

    let (m1, r1) = coarse.complex().mesh().uniform_refine().unwrap();
    let (m2, r2) = m1.uniform_refine().unwrap();
    let ancestors = r1.compose(&r2).child_to_parent;
    let fine =
        HodgeOperator::new(Arc::new(DiscreteComplex::new(Arc::new(m2)).unwrap()), 2).unwrap();
    let reference = fine
        .solve(Load::Analytic(&p.f), &fine.harmonic_basis(Some(0)).unwrap())
        .unwrap();
    let approx = reference_error(&sol, &reference, &ancestors, fine.complex()).unwrap();
    let exact = exact_errors(&sol, ex).unwrap();
    let (a, e) = (
        (approx[0].powi(2) + approx[1].powi(2)).sqrt(),
        (exact[0].powi(2) + exact[1].powi(2)).sqrt(),
    );
    assert!((a - e).abs() <= 0.1 * e, "{a} vs {e}");
    assert!(reference_error(&sol, &reference, &ancestors[1..], fine.complex()).is_err());
}

#[test]
fn errors_decrease_under_uniform_refinement() {
    let p = problems::make_square_smooth_k1::<f64>().unwrap();
    let ex = p.exact.as_ref().unwrap();
    let mut last = [f64::INFINITY; 4];
    for lev in 1..5 {
        let op = operator(&p, lev, 1);
        let sol = op
            .solve(Load::Analytic(&p.f), &op.harmonic_basis(Some(0)).unwrap())
            .unwrap();
        let e = exact_errors(&sol, ex).unwrap();
        for i in [0, 1, 3] {
            assert!(e[i] < last[i], "level {lev}: {e:?} vs {last:?}");
        }
        last = e;
    }
}

#[test]
fn coordinate_dump() {
    let p = problems::by_name::<f64>("square-k1").unwrap();
    let op = operator(&p, 0, 1);
    let mut out = Vec::new();
    write_coordinate(op.matrix(), &mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('%'));
    let dims: Vec<usize> = lines
        .next()
        .unwrap()
        .split_whitespace()
        .map(|s| s.parse().unwrap())
        .collect();
    assert_eq!(dims[0], op.matrix().nrows());
    assert_eq!(dims[2], lines.count());
}
