//! Acceptance criteria. Each test prints one `PASS` / `FAIL` line and asserts.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use casimir_core::circulation::{
    antiderivative_space, oneform_from_vorticity, pin_circulations, vorticity_two_form, CirculationGraph, CirculationOptions,
    GraphDensity, Pin,
};
use casimir_core::cli::{self, shear_permutation, shear_surface};
use casimir_core::euler_torus::{casimir_trace, TorusFlowState, TraceOptions};
use casimir_core::fixtures;
use casimir_core::geometry::{classify_vertices, perturb_to_simple, VertexClass};
use casimir_core::measure::{log_singularity_diagnostic, pushforward_measure, LogFitOptions};
use casimir_core::moments::{hausdorff_check, reconstruct_density, MomentSequence, ReconstructOptions, TOL_FEAS};
use casimir_core::orbit::{analyze_coset, measured_iso, same_orbit, Coset, MatchOptions, OrbitOptions, Verdict, Witness};
use casimir_core::reeb::{build_reeb_checked, check_compatibility, NodeKind, ReebArc, ReebGraph, ReebNode};
use casimir_core::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

fn report(id: u32, name: &str, pass: bool, detail: String) {
    println!("{} criterion {id} ({name}): {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {id} ({name}) failed: {detail}");
}

fn run_cli(args: &[&str]) -> (i32, Value) {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out.json");
    let mut full = vec!["casimir-kit", "-o", out.to_str().unwrap()];
    full.extend_from_slice(args);
    let code = cli::run(full);
    let doc = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    (code, doc)
}

#[test]
fn criterion_01_sphere_baseline() {
    let start = Instant::now();
    let s = fixtures::octa_sphere::<f64>(50);
    let field = perturb_to_simple(&classify_vertices(&s, fixtures::height(&s)), &s).unwrap();
    let (g, q) = build_reeb_checked(&s, &field).unwrap();
    let m = pushforward_measure(&s, &g, &q, 256, 3);
    let e = &m.edges[0];
    let levels = e.levels();
    let worst_density = e
        .cumulative_area
        .windows(2)
        .zip(levels.windows(2))
        .map(|(a, t)| ((a[1] - a[0]) / (t[1] - t[0]) / (2.0 * PI) - 1.0).abs())
        .fold(0.0, f64::max);
    let mom = &e.moments;
    let (e0, e1, e2) = (mom[0] / (4.0 * PI) - 1.0, mom[1] / (4.0 * PI), mom[2] / (4.0 * PI / 3.0) - 1.0);
    let elapsed = start.elapsed();
    let pass = s.num_triangles() == 20000
        && g.num_nodes() == 2
        && g.num_arcs() == 1
        && worst_density < 0.02
        && e0.abs() < 0.01
        && e1.abs() < 0.01
        && e2.abs() < 0.01
        && elapsed < Duration::from_secs(5);
    report(
        1,
        "sphere baseline",
        pass,
        format!(
            "{} triangles, {} nodes / {} arcs, density dev {:.2e}, m0 {:.2e} m1 {:.2e} m2 {:.2e}, {:?}",
            s.num_triangles(),
            g.num_nodes(),
            g.num_arcs(),
            worst_density,
            e0,
            e1,
            e2,
            elapsed
        ),
    );
}

#[test]
fn criterion_02_figure_one() {
    let start = Instant::now();
    let n = 64;
    let s = fixtures::flat_torus::<f64>(n);
    let field = classify_vertices(&s, fixtures::sample_torus(n, fixtures::two_maxima_torus));
    let count = |p: fn(VertexClass) -> bool| (0..s.num_vertices()).filter(|&v| p(field.class(v))).count();
    let (mins, saddles, maxs) = (
        count(|c| c == VertexClass::Min),
        count(|c| matches!(c, VertexClass::Saddle(_))),
        count(|c| c == VertexClass::Max),
    );
    let (g, _) = build_reeb_checked(&s, &field).unwrap();
    let compat = check_compatibility(&g, &s);
    let elapsed = start.elapsed();
    let pass = (mins, saddles, maxs) == (1, 3, 2)
        && g.num_nodes() == 6
        && g.num_arcs() == 6
        && g.betti1() == 1
        && s.genus() == 1
        && compat.pass
        && g.validate().is_empty()
        && elapsed < Duration::from_secs(5);
    report(
        2,
        "figure 1 torus",
        pass,
        format!(
            "critical {mins}/{saddles}/{maxs}, {} nodes / {} arcs, betti1 {} genus {}, {:?}",
            g.num_nodes(),
            g.num_arcs(),
            g.betti1(),
            s.genus(),
            elapsed
        ),
    );
}

fn node(f: f64, kind: NodeKind) -> ReebNode<f64> {
    ReebNode { vertex: None, f, kind }
}

#[test]
fn criterion_03_figure_two() {
    let g = ReebGraph::new(
        vec![node(0.0, NodeKind::Min), node(1.0, NodeKind::Saddle), node(2.0, NodeKind::Saddle), node(3.0, NodeKind::Max)],
        vec![
            ReebArc { tail: 0, head: 1 },
            ReebArc { tail: 1, head: 2 },
            ReebArc { tail: 1, head: 2 },
            ReebArc { tail: 2, head: 3 },
        ],
    );
    let a = [0.7, -0.2, 0.9, -1.4];
    let d = GraphDensity::from_totals(&g, a.to_vec()).unwrap();
    let dim = antiderivative_space(&g, &d).unwrap().dimension();
    let mut worst = 0.0f64;
    for z in [0.0, 0.35, -2.0, 5.0] {
        let ad = pin_circulations(&g, &d, &[Pin { arc: 1, t: 1.0, value: z }]).unwrap();
        // arcs: min->s1, the two s1->s2 arcs, s2->max
        let want = [(0.0, a[0]), (z, a[1] + z), (a[0] - z, a[0] + a[2] - z), (-a[3], 0.0)];
        for (got, w) in ad.limits().iter().zip(want) {
            worst = worst.max((got.0 - w.0).abs()).max((got.1 - w.1).abs());
        }
    }
    let bad = GraphDensity::from_totals(&g, vec![0.7, -0.2, 0.9, -1.3]).unwrap();
    let no_solution = matches!(antiderivative_space(&g, &bad), Err(Error::NoSolution { .. }));
    let pass = dim == 1 && worst <= 1e-12 && no_solution;
    report(3, "figure 2 labels", pass, format!("dimension {dim}, worst label error {worst:.1e}, non-zero total rejected: {no_solution}"));
}

#[test]
fn criterion_04_figure_three() {
    let fx = fixtures::figure_three_pair::<f64>(12, 0.3);
    let opts = CirculationOptions { perturb_eps: 1e-13, ..Default::default() };
    let build = |s: &casimir_core::Surface| {
        let w = oneform_from_vorticity(s, &vorticity_two_form(s, &fx.field)).unwrap();
        analyze_coset(Coset { surface: s, form: &w, field: Some(&fx.field) }, &opts).unwrap().0
    };
    let (c1, c2) = (build(&fx.first), build(&fx.second));
    let (t1, t2) = (c1.measured.total_moments(), c2.measured.total_moments());
    let total_dev = t1.iter().zip(&t2).map(|(x, y)| (x - y).abs() / x.abs().max(1e-300)).fold(0.0, f64::max);

    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let (code, _) = run_cli(&["fixture", "figure3", "--dir", d]);
    assert_eq!(code, 0);
    let p = |f: &str| format!("{d}/{f}");
    let (mesh, field, aa, ab) = (p("mesh.off"), p("field.txt"), p("areas_a.txt"), p("areas_b.txt"));
    let (code, doc) = run_cli(&[
        "--perturb-eps", "1e-13", "equiv", "--mesh-a", &mesh, "--field-a", &field, "--areas-a", &aa, "--mesh-b", &mesh,
        "--field-b", &field, "--areas-b", &ab,
    ]);
    let witness = doc["result"]["witness"]["type"].as_str().unwrap_or("none").to_string();
    let pass = c1.graph().num_arcs() == 3 && total_dev <= 1e-12 && code == cli::EXIT_DIFFERENT && witness == "edge_moment";
    report(
        4,
        "figure 3 separation",
        pass,
        format!("{} moments, max relative total deviation {total_dev:.1e}, equiv exit {code} witness {witness}", t1.len()),
    );
}

#[test]
fn criterion_05_shear_invariance() {
    let start = Instant::now();
    let n = 32;
    let s = fixtures::flat_torus::<f64>(n);
    let f: Vec<f64> = fixtures::sample_torus(n, fixtures::two_maxima_torus);
    let measured = |s: &casimir_core::Surface, f: Vec<f64>| {
        let field = perturb_to_simple(&classify_vertices(s, f), s).unwrap();
        let (g, q) = build_reeb_checked(s, &field).unwrap();
        pushforward_measure(s, &g, &q, 64, 16)
    };
    let reference = measured(&s, f.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let opts = MatchOptions::default();
    let mut worst = 0.0f64;
    let mut ok = 0;
    for _ in 0..20 {
        let perm = shear_permutation(n, rng.gen_range(0..n), rng.gen_range(0..n), rng.gen_range(0..n));
        let moved = shear_surface(&s, &perm).unwrap();
        let mut g = vec![0.0; f.len()];
        for (v, x) in f.iter().enumerate() {
            g[perm[v]] = *x;
        }
        if let Verdict::Isomorphic(m) = measured_iso(&reference, &measured(&moved, g), &opts) {
            ok += 1;
            worst = worst.max(m.moment_discrepancy);
        }
    }
    let elapsed = start.elapsed();
    let pass = ok == 20 && worst < 1e-6 && elapsed < Duration::from_secs(60);
    report(5, "shear invariance", pass, format!("{ok}/20 isomorphic, max discrepancy {worst:.1e}, {elapsed:?}"));
}

fn casimirs(c: &CirculationGraph<f64>) -> Vec<f64> {
    let mut out = Vec::new();
    for (a, e) in c.measured.edges.iter().enumerate() {
        out.extend_from_slice(&e.moments);
        out.extend([c.circulation.lower_limit(a), c.circulation.upper_limit(a), c.c_mid(a)]);
    }
    out
}

#[test]
fn criterion_06_circulation_sensitivity() {
    let n = 32;
    let s = fixtures::flat_torus::<f64>(n);
    let f: Vec<f64> = fixtures::sample_torus(n, fixtures::two_maxima_torus);
    let w = oneform_from_vorticity(&s, &vorticity_two_form(&s, &f)).unwrap();
    let shifted = w.add(&fixtures::constant_form(&s, 2.0 * PI, 1.0, 0.0));
    let opts = OrbitOptions::default();
    let rep = same_orbit(Coset { surface: &s, form: &w, field: None }, Coset { surface: &s, form: &shifted, field: None }, &opts).unwrap();
    let measured_same = measured_iso(&rep.left.measured, &rep.right.measured, &opts.matching).is_isomorphic();
    let circ_witness = matches!(rep.verdict, Verdict::NotIsomorphic(Witness::Circulation { .. }));

    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    assert_eq!(run_cli(&["fixture", "shift", "--dir", d]).0, 0);
    let p = |x: &str| format!("{d}/{x}");
    let (mesh, areas) = (p("mesh.off"), p("areas.txt"));
    let (code, doc) = run_cli(&[
        "equiv", "--mesh-a", &mesh, "--areas-a", &areas, "--form-a", &p("form_a.txt"), "--mesh-b", &mesh, "--areas-b",
        &areas, "--form-b", &p("form_b.txt"),
    ]);
    let cli_witness = doc["result"]["witness"]["type"].as_str().unwrap_or("none").to_string();

    // coset shift by an exact form
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let phi: Vec<f64> = (0..s.num_vertices()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let moved = w.add(&fixtures::exact_form(&s, &phi));
    let copts = CirculationOptions::default();
    let (c0, _) = analyze_coset(Coset { surface: &s, form: &w, field: None }, &copts).unwrap();
    let (c1, _) = analyze_coset(Coset { surface: &s, form: &moved, field: None }, &copts).unwrap();
    let (k0, k1) = (casimirs(&c0), casimirs(&c1));
    let scale = k0.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let casimir_dev = if k0.len() == k1.len() {
        k0.iter().zip(&k1).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / scale
    } else {
        f64::INFINITY
    };
    let rep2 = same_orbit(Coset { surface: &s, form: &moved, field: None }, Coset { surface: &s, form: &shifted, field: None }, &opts).unwrap();
    let verdict_kept = rep2.verdict.witness().map(|w| w.name()) == rep.verdict.witness().map(|w| w.name());
    let pass = measured_same && circ_witness && code == cli::EXIT_DIFFERENT && cli_witness == "circulation" && casimir_dev <= 1e-10 && verdict_kept;
    report(
        6,
        "circulation sensitivity",
        pass,
        format!(
            "measured same {measured_same}, circulation witness {circ_witness}, equiv exit {code} ({cli_witness}), df shift Casimir dev {casimir_dev:.1e}, verdict kept {verdict_kept}"
        ),
    );
}

/// Random Reeb-type graph: births, splits, merges and deaths swept upward.
fn random_graph(rng: &mut ChaCha8Rng, max_betti: usize) -> ReebGraph<f64> {
    loop {
        let mut nodes = vec![node(0.0, NodeKind::Min)];
        let mut arcs = Vec::new();
        let mut open: Vec<usize> = vec![0];
        let mut f = 0.0;
        let steps = rng.gen_range(1..12);
        for _ in 0..steps {
            f += 1.0;
            match rng.gen_range(0..4) {
                0 => {
                    nodes.push(node(f, NodeKind::Min));
                    open.push(nodes.len() - 1);
                }
                1 => {
                    let i = rng.gen_range(0..open.len());
                    nodes.push(node(f, NodeKind::Saddle));
                    let s = nodes.len() - 1;
                    arcs.push(ReebArc { tail: open.swap_remove(i), head: s });
                    open.push(s);
                    open.push(s);
                }
                2 if open.len() >= 2 => {
                    nodes.push(node(f, NodeKind::Saddle));
                    let s = nodes.len() - 1;
                    for _ in 0..2 {
                        let i = rng.gen_range(0..open.len());
                        arcs.push(ReebArc { tail: open.swap_remove(i), head: s });
                    }
                    open.push(s);
                }
                3 if open.len() >= 2 => {
                    let i = rng.gen_range(0..open.len());
                    nodes.push(node(f, NodeKind::Max));
                    arcs.push(ReebArc { tail: open.swap_remove(i), head: nodes.len() - 1 });
                }
                _ => {}
            }
        }
        // merge until one end remains, then cap it
        while open.len() > 1 {
            f += 1.0;
            nodes.push(node(f, NodeKind::Saddle));
            let s = nodes.len() - 1;
            for _ in 0..2 {
                let i = rng.gen_range(0..open.len());
                arcs.push(ReebArc { tail: open.swap_remove(i), head: s });
            }
            open.push(s);
        }
        f += 1.0;
        nodes.push(node(f, NodeKind::Max));
        arcs.push(ReebArc { tail: open[0], head: nodes.len() - 1 });
        let g = ReebGraph::new(nodes, arcs);
        let topo = g.topology();
        if topo.is_connected() && topo.betti1() <= max_betti && g.validate().is_empty() {
            return g;
        }
    }
}

#[test]
fn criterion_07_antiderivative_suite() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut dim_ok, mut worst_kirch, mut leaf_ok) = (0, 0.0f64, 0);
    let mut by_betti = [0usize; 5];
    for _ in 0..200 {
        let g = random_graph(&mut rng, 4);
        by_betti[g.betti1()] += 1;
        let mut totals: Vec<f64> = (0..g.num_arcs()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mean = totals.iter().sum::<f64>() / totals.len() as f64;
        totals.iter_mut().for_each(|x| *x -= mean);
        let d = GraphDensity::from_totals(&g, totals).unwrap();
        let sp = antiderivative_space(&g, &d).unwrap();
        if sp.dimension() == g.betti1() {
            dim_ok += 1;
        }
        let coeffs: Vec<f64> = (0..sp.dimension()).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let ad = sp.combine(&coeffs);
        worst_kirch = worst_kirch.max(ad.max_kirchhoff_residual(&g));
        let leaves_zero = g.arcs().iter().enumerate().all(|(a, arc)| {
            (g.nodes()[arc.tail].kind != NodeKind::Min || ad.lower_limit(a) == 0.0)
                && (g.nodes()[arc.head].kind != NodeKind::Max || ad.upper_limit(a) == 0.0)
        });
        if leaves_zero {
            leaf_ok += 1;
        }
    }
    let pass = dim_ok == 200 && worst_kirch <= 1e-10 && leaf_ok == 200;
    report(
        7,
        "antiderivative suite",
        pass,
        format!("dimension = betti1 in {dim_ok}/200 (betti1 histogram {by_betti:?}), max Kirchhoff residual {worst_kirch:.1e}, exact leaf limits {leaf_ok}/200"),
    );
}

#[test]
fn criterion_08_moment_toolbox() {
    let ms = MomentSequence::uniform(-1.0, 1.0, 1.0, 32);
    let feas = hausdorff_check(&ms, TOL_FEAS);
    let r = ms.rescaled();
    let combo = (r[3] - 2.0 * r[4] + r[5]) / r[0];
    let rec = reconstruct_density(&ms, &ReconstructOptions::default()).unwrap();
    let interior = rec
        .points
        .iter()
        .zip(&rec.density)
        .filter(|(x, _)| x.abs() <= 0.9)
        .map(|(_, w)| (w - 1.0).abs())
        .fold(0.0, f64::max);
    let pass = feas.feasible && (combo - 1.0 / 60.0).abs() < 1e-14 && (rec.eps - 1e-2).abs() < 1e-15 && interior < 0.05;
    report(
        8,
        "moment toolbox",
        pass,
        format!(
            "feasible {}, m3 - 2 m4 + m5 = {combo:.15} (1/60 = {:.15}), N_eff {}, interior sup error {interior:.3}",
            feas.feasible,
            1.0 / 60.0,
            rec.effective_n
        ),
    );
}

#[test]
fn criterion_09_casimir_conservation() {
    let start = Instant::now();
    let n = 128;
    let flow = TorusFlowState::from_fn(n, |x, y| x.cos() + 0.5 * y.cos() + 0.1 * (x + y).cos()).unwrap();
    let trace = casimir_trace(&flow, &TraceOptions { upsample: 8, ..Default::default() }).unwrap();
    let steady = TorusFlowState::from_fn(n, |x, _| x.cos()).unwrap();
    let st = casimir_trace(&steady, &TraceOptions::default()).unwrap();
    let elapsed = start.elapsed();
    let d = &trace.drift;
    let s = &st.drift;
    let pass = d.edge_moments < 1e-4
        && d.circulation < 1e-4
        && s.edge_moments < 1e-8
        && s.circulation < 1e-8
        && elapsed < Duration::from_secs(600);
    report(
        9,
        "Casimir conservation",
        pass,
        format!(
            "{} arcs, {} steps to t = {}: moment drift {:.1e}, circulation drift {:.1e}; steady moment drift {:.1e}, circulation drift {:.1e}; {:?}",
            trace.samples[0].moments.len(),
            trace.steps,
            trace.samples.last().unwrap().t,
            d.edge_moments,
            d.circulation,
            s.edge_moments,
            s.circulation,
            elapsed
        ),
    );
}

#[test]
fn criterion_10_log_singularity() {
    let n = 256;
    let s = fixtures::flat_torus::<f64>(n);
    let field = perturb_to_simple(&classify_vertices(&s, fixtures::sample_torus(n, fixtures::saddle_torus)), &s).unwrap();
    let (g, q) = build_reeb_checked(&s, &field).unwrap();
    let mut ratios = Vec::new();
    for v in 0..g.num_nodes() {
        if g.nodes()[v].kind == NodeKind::Saddle {
            let rep = log_singularity_diagnostic(&s, &g, &q, v, LogFitOptions::default()).unwrap();
            ratios.extend(rep.branch_ratios);
        }
    }
    let worst = ratios.iter().map(|r| ((r + 0.5) / 0.5).abs()).fold(0.0, f64::max);
    let pass = ratios.len() == 4 && worst <= 0.1;
    report(10, "log singularity", pass, format!("branch:trunk ratios {ratios:.3?}, worst deviation {:.1}%", 100.0 * worst));
}
