use std::collections::BTreeSet;
use std::sync::Arc;

use hodgefem::adaptivity::{dorfler_mark, fit_rate, satisfies_dorfler};
use hodgefem::diagnostics::brute_force_min_cardinality;
use hodgefem::problems::{annulus_mesh, lshape_mesh};
use hodgefem::solver::{gap, DiscreteComplex};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn dorfler_is_valid_minimal_and_scale_invariant(
        values in prop::collection::vec(0.0f64..10.0, 1..=12),
        theta in 0.01f64..0.99,
        scale in 1e-3f64..1e3,
    ) {
        let m = dorfler_mark(&values, theta);
        let total: f64 = values.iter().sum();
        if total > 0.0 {
            prop_assert!(satisfies_dorfler(&m, &values, theta));
            prop_assert_eq!(m.len(), brute_force_min_cardinality(&values, theta));
            let scaled: Vec<f64> = values.iter().map(|v| v * scale).collect();
            prop_assert_eq!(dorfler_mark(&scaled, theta), m);
        } else {
            prop_assert!(m.is_empty());
        }
    }

    #[test]
    fn fit_rate_is_exact_on_power_laws(s in 0.05f64..3.0, c in 0.1f64..10.0, n0 in 1.0f64..100.0) {
        let pts: Vec<(f64, f64)> = (0..6).map(|i| {
            let n = n0 * 1.7f64.powi(i);
            (n, c * n.powf(-s))
        }).collect();
        prop_assert!((fit_rate(&pts).unwrap() - s).abs() < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn random_refinements_stay_conforming_and_exact(seeds in prop::collection::vec(any::<u64>(), 1..5), annulus in any::<bool>()) {
        let mut mesh = if annulus { annulus_mesh::<f64>().unwrap() } else { lshape_mesh::<f64>().unwrap() };
        let area: f64 = (0..mesh.num_triangles()).map(|t| mesh.area(t)).sum();
        let euler = |m: &hodgefem::Mesh64| m.num_vertices() as i64 - m.num_edges() as i64 + m.num_triangles() as i64;
        let chi = euler(&mesh);
        for seed in seeds {
            let marked: BTreeSet<usize> =
                (0..mesh.num_triangles()).filter(|t| (seed.rotate_left(*t as u32 % 64) ^ *t as u64).is_multiple_of(3)).collect();
            let (fine, rec) = mesh.bisect_marked(&marked).unwrap();
            fine.validate().unwrap();
            prop_assert!(marked.is_subset(&rec.refined_set));
            prop_assert_eq!(euler(&fine), chi);
            let fine_area: f64 = (0..fine.num_triangles()).map(|t| fine.area(t)).sum();
            prop_assert!((fine_area - area).abs() < 1e-12);
            // every interior edge has two neighbours, so no hanging nodes
            let boundary_len: f64 = fine.edges().iter().enumerate().filter(|(_, e)| e.is_boundary()).map(|(i, _)| fine.edge_length(i)).sum();
            let initial_len: f64 = mesh.edges().iter().enumerate().filter(|(_, e)| e.is_boundary()).map(|(i, _)| mesh.edge_length(i)).sum();
            prop_assert!((boundary_len - initial_len).abs() < 1e-12);
            let c = DiscreteComplex::new(Arc::new(fine.clone())).unwrap();
            prop_assert!(c.incidence(1).unwrap().matmul(c.incidence(0).unwrap()).is_zero());
            mesh = fine;
        }
    }

    #[test]
    fn gaps_lie_in_the_unit_interval(a in prop::collection::vec(-1.0f64..1.0, 8), b in prop::collection::vec(-1.0f64..1.0, 8)) {
        let m = hodgefem::sparse::CsrMatrix::from_diagonal(&[1.0, 2.0, 0.5, 1.0, 3.0, 1.0, 1.0, 0.25]);
        prop_assume!(a.iter().any(|v| v.abs() > 1e-3) && b.iter().any(|v| v.abs() > 1e-3));
        let (x, y) = gap(std::slice::from_ref(&a), std::slice::from_ref(&b), &m).unwrap();
        prop_assert!((0.0..=1.0).contains(&x) && (0.0..=1.0).contains(&y));
        // equal dimensions give a symmetric gap
        prop_assert!((x - y).abs() < 1e-8);
        let (s, t) = gap(std::slice::from_ref(&a), &[a.iter().map(|v| 2.0 * v).collect()], &m).unwrap();
        prop_assert!(s < 1e-7 && t < 1e-7);
    }
}
