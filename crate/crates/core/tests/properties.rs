use casimir_core::circulation::{oneform_from_vorticity, vorticity_two_form, CirculationOptions};
use casimir_core::fixtures;
use casimir_core::geometry::{classify_vertices, perturb_to_simple};
use casimir_core::measure::pushforward_measure;
use casimir_core::moments::{hausdorff_check, MomentSequence, TOL_FEAS};
use casimir_core::orbit::{analyze_coset, measured_iso, Coset, MatchOptions, Verdict};
use casimir_core::reeb::{build_reeb_checked, check_compatibility};
use proptest::prelude::*;

const N: usize = 20;

/// Sum of a few low modes with random amplitudes and phases.
fn field_strategy() -> impl Strategy<Value = Vec<(i32, i32, f64, f64)>> {
    prop::collection::vec((-2i32..=2, 1i32..=2, 0.2f64..1.0, 0.0f64..6.28), 1..4)
}

fn sample(modes: &[(i32, i32, f64, f64)]) -> Vec<f64> {
    fixtures::sample_torus(N, |x, y| {
        modes.iter().map(|&(kx, ky, a, p)| a * (kx as f64 * x + ky as f64 * y + p).cos()).sum::<f64>() + 0.05 * x.sin()
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn arc_measures_are_feasible_and_partition_area(modes in field_strategy()) {
        let s = fixtures::flat_torus::<f64>(N);
        let field = perturb_to_simple(&classify_vertices(&s, sample(&modes)), &s).unwrap();
        let (g, q) = build_reeb_checked(&s, &field).unwrap();
        prop_assert!(g.validate().is_empty());
        prop_assert!(check_compatibility(&g, &s).pass);
        let m = pushforward_measure(&s, &g, &q, 32, 12);
        prop_assert!((m.total_mass() - s.total_area()).abs() < 1e-10 * s.total_area());
        for e in &m.edges {
            let rep = hausdorff_check(&MomentSequence::from_edge(e), TOL_FEAS);
            prop_assert!(rep.feasible, "arc {} worst {}", e.arc, rep.worst);
            prop_assert!(e.cumulative_area.windows(2).all(|w| w[1] >= w[0] - 1e-14));
        }
    }

    #[test]
    fn relabeling_keeps_the_measured_graph(modes in field_strategy(), seed in 0u64..1000) {
        use rand::{seq::SliceRandom, SeedableRng};
        let s = fixtures::flat_torus::<f64>(N);
        let f = sample(&modes);
        let mut perm: Vec<usize> = (0..s.num_vertices()).collect();
        perm.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let t = s.relabeled(&perm).unwrap();
        let mut g = vec![0.0; f.len()];
        for (v, x) in f.iter().enumerate() {
            g[perm[v]] = *x;
        }
        // perturbation breaks ties by vertex index, so only already simple fields are label-free
        let build = |s: &casimir_core::Surface, f: Vec<f64>| {
            let field = classify_vertices(s, f);
            build_reeb_checked(s, &field).ok().map(|(gr, q)| pushforward_measure(s, &gr, &q, 32, 12))
        };
        let (a, b) = (build(&s, f), build(&t, g));
        prop_assume!(a.is_some() && b.is_some());
        match measured_iso(&a.unwrap(), &b.unwrap(), &MatchOptions::default()) {
            Verdict::Isomorphic(m) => prop_assert!(m.moment_discrepancy < 1e-6),
            Verdict::NotIsomorphic(w) => prop_assert!(false, "{:?}", w),
        }
    }

    #[test]
    fn exact_shift_keeps_circulations(modes in field_strategy(), amp in 0.1f64..2.0) {
        let s = fixtures::flat_torus::<f64>(N);
        let f = sample(&modes);
        let w = oneform_from_vorticity(&s, &vorticity_two_form(&s, &f)).unwrap();
        let phi: Vec<f64> = (0..s.num_vertices()).map(|v| amp * ((v * 7919) % 101) as f64 / 101.0).collect();
        let moved = w.add(&fixtures::exact_form(&s, &phi));
        let opts = CirculationOptions::default();
        let (a, _) = analyze_coset(Coset { surface: &s, form: &w, field: None }, &opts).unwrap();
        let (b, _) = analyze_coset(Coset { surface: &s, form: &moved, field: None }, &opts).unwrap();
        prop_assert_eq!(a.graph().num_arcs(), b.graph().num_arcs());
        let scale = a.residuals.scale;
        for arc in 0..a.graph().num_arcs() {
            prop_assert!((a.c_mid(arc) - b.c_mid(arc)).abs() <= 1e-9 * scale);
        }
    }
}
