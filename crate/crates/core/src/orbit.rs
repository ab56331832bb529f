//! Orbit equivalence: isomorphism of measured Reeb graphs and of circulation graphs.

use serde_json::{json, Value};

use crate::circulation::{build_circulation_graph, curl, CirculationGraph, CirculationOptions, DiscreteOneForm};
use crate::error::{Error, Result};
use crate::geometry::{classify_vertices, perturb_to_simple_with, TriangulatedSurface};
use crate::measure::MeasuredReebGraph;
use crate::reeb::{NodeKind, ReebGraph};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy)]
pub struct MatchOptions {
    /// Number of moments compared per arc.
    pub moments: usize,
    /// Tolerance on rescaled moment differences, relative to the arc mass.
    pub tol_rel: f64,
    /// Node value tolerance relative to the larger value range.
    pub tol_f: f64,
    /// Tolerance on circulation limits relative to the circulation scale.
    pub tol_circ: f64,
    /// Cap on structural matchings enumerated when looking for a witness.
    pub max_matchings: usize,
}

impl Default for MatchOptions {
    fn default() -> Self {
        Self { moments: 16, tol_rel: 1e-6, tol_f: 1e-8, tol_circ: 1e-6, max_matchings: 10_000 }
    }
}

/// Bijections `left -> right` on nodes and arcs.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphMatching {
    pub node_map: Vec<usize>,
    pub arc_map: Vec<usize>,
    pub moment_discrepancy: f64,
    pub circulation_discrepancy: f64,
}

/// First invariant that separates two graphs.
#[derive(Debug, Clone, PartialEq)]
pub enum Witness {
    NodeCount { left: usize, right: usize },
    ArcCount { left: usize, right: usize },
    NodeKinds { kind: NodeKind, left: usize, right: usize },
    /// No incidence-, kind- and value-preserving bijection exists.
    Structure(String),
    /// Best structural matching still differs in moment `index` on this arc pair.
    EdgeMoment { left_arc: usize, right_arc: usize, index: usize, left: f64, right: f64, discrepancy: f64 },
    /// Best moment-preserving matching still differs in circulation limits on this arc pair.
    Circulation { left_arc: usize, right_arc: usize, left: [f64; 2], right: [f64; 2], discrepancy: f64 },
}

impl Witness {
    pub fn name(&self) -> &'static str {
        match self {
            Witness::NodeCount { .. } => "node_count",
            Witness::ArcCount { .. } => "arc_count",
            Witness::NodeKinds { .. } => "node_kinds",
            Witness::Structure(_) => "structure",
            Witness::EdgeMoment { .. } => "edge_moment",
            Witness::Circulation { .. } => "circulation",
        }
    }

    pub fn to_json(&self) -> Value {
        let mut v = match self {
            Witness::NodeCount { left, right } | Witness::ArcCount { left, right } => {
                json!({"left": left, "right": right})
            }
            Witness::NodeKinds { kind, left, right } => json!({"kind": kind.as_str(), "left": left, "right": right}),
            Witness::Structure(msg) => json!({"detail": msg}),
            Witness::EdgeMoment { left_arc, right_arc, index, left, right, discrepancy } => json!({
                "left_arc": left_arc, "right_arc": right_arc, "index": index,
                "left": left, "right": right, "discrepancy": discrepancy,
            }),
            Witness::Circulation { left_arc, right_arc, left, right, discrepancy } => json!({
                "left_arc": left_arc, "right_arc": right_arc,
                "left": left, "right": right, "discrepancy": discrepancy,
            }),
        };
        v["type"] = json!(self.name());
        v
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    Isomorphic(GraphMatching),
    NotIsomorphic(Witness),
}

impl Verdict {
    pub fn is_isomorphic(&self) -> bool {
        matches!(self, Verdict::Isomorphic(_))
    }

    pub fn witness(&self) -> Option<&Witness> {
        match self {
            Verdict::NotIsomorphic(w) => Some(w),
            _ => None,
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            Verdict::Isomorphic(m) => json!({
                "verdict": "same",
                "node_map": m.node_map,
                "arc_map": m.arc_map,
                "moment_discrepancy": m.moment_discrepancy,
                "circulation_discrepancy": m.circulation_discrepancy,
            }),
            Verdict::NotIsomorphic(w) => json!({"verdict": "different", "witness": w.to_json()}),
        }
    }
}

/// Backtracking over arc bijections that preserve incidence, direction, node kinds and values.
struct Search<'a, T> {
    g1: &'a ReebGraph<T>,
    g2: &'a ReebGraph<T>,
    order: Vec<usize>,
    tol_f: f64,
    node_map: Vec<Option<usize>>,
    node_used: Vec<bool>,
    arc_map: Vec<usize>,
    arc_used: Vec<bool>,
    budget: usize,
}

impl<'a, T: Real> Search<'a, T> {
    fn new(g1: &'a ReebGraph<T>, g2: &'a ReebGraph<T>, order: Vec<usize>, tol_f: f64, budget: usize) -> Self {
        Self {
            g1,
            g2,
            order,
            tol_f,
            node_map: vec![None; g1.num_nodes()],
            node_used: vec![false; g2.num_nodes()],
            arc_map: vec![usize::MAX; g1.num_arcs()],
            arc_used: vec![false; g2.num_arcs()],
            budget,
        }
    }

    fn nodes_compatible(&self, u: usize, v: usize) -> bool {
        let (a, b) = (&self.g1.nodes()[u], &self.g2.nodes()[v]);
        a.kind == b.kind && (a.f - b.f).abs().as_f64() <= self.tol_f
    }

    fn bind(&mut self, u: usize, v: usize, undo: &mut Vec<usize>) -> bool {
        match self.node_map[u] {
            Some(w) => w == v,
            None => {
                if self.node_used[v] || !self.nodes_compatible(u, v) {
                    return false;
                }
                self.node_map[u] = Some(v);
                self.node_used[v] = true;
                undo.push(u);
                true
            }
        }
    }

    /// Calls `visit` on every complete matching accepted by `arc_ok`; stops when it returns `true`.
    fn run(
        &mut self,
        k: usize,
        arc_ok: &mut dyn FnMut(usize, usize) -> bool,
        visit: &mut dyn FnMut(&[Option<usize>], &[usize]) -> bool,
    ) -> bool {
        if self.budget == 0 {
            return true;
        }
        if k == self.order.len() {
            self.budget -= 1;
            return visit(&self.node_map, &self.arc_map);
        }
        let a1 = self.order[k];
        let arc = self.g1.arcs()[a1];
        for a2 in 0..self.g2.num_arcs() {
            if self.arc_used[a2] {
                continue;
            }
            let target = self.g2.arcs()[a2];
            let mut undo = Vec::new();
            if self.bind(arc.tail, target.tail, &mut undo) && self.bind(arc.head, target.head, &mut undo) && arc_ok(a1, a2) {
                self.arc_used[a2] = true;
                self.arc_map[a1] = a2;
                let stop = self.run(k + 1, arc_ok, visit);
                self.arc_used[a2] = false;
                self.arc_map[a1] = usize::MAX;
                if stop {
                    for u in undo {
                        self.node_used[self.node_map[u].unwrap()] = false;
                        self.node_map[u] = None;
                    }
                    return true;
                }
            }
            for u in undo {
                self.node_used[self.node_map[u].unwrap()] = false;
                self.node_map[u] = None;
            }
        }
        false
    }
}

fn structural_witness<T: Real>(g1: &ReebGraph<T>, g2: &ReebGraph<T>) -> Option<Witness> {
    if g1.num_nodes() != g2.num_nodes() {
        return Some(Witness::NodeCount { left: g1.num_nodes(), right: g2.num_nodes() });
    }
    if g1.num_arcs() != g2.num_arcs() {
        return Some(Witness::ArcCount { left: g1.num_arcs(), right: g2.num_arcs() });
    }
    for kind in [NodeKind::Min, NodeKind::Saddle, NodeKind::Max] {
        let count = |g: &ReebGraph<T>| g.nodes().iter().filter(|n| n.kind == kind).count();
        let (l, r) = (count(g1), count(g2));
        if l != r {
            return Some(Witness::NodeKinds { kind, left: l, right: r });
        }
    }
    None
}

fn value_tolerance<T: Real>(g1: &ReebGraph<T>, g2: &ReebGraph<T>, tol_f: f64) -> f64 {
    let range = |g: &ReebGraph<T>| {
        let (lo, hi) = g.nodes().iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), n| {
            (lo.min(n.f.as_f64()), hi.max(n.f.as_f64()))
        });
        (hi - lo).max(0.0)
    };
    let r = range(g1).max(range(g2));
    tol_f * if r > 0.0 { r } else { 1.0 }
}

/// Largest moment difference on an arc pair: `(discrepancy, index)`.
fn moment_discrepancy<T: Real>(m1: &MeasuredReebGraph<T>, m2: &MeasuredReebGraph<T>, a1: usize, a2: usize, n: usize) -> (f64, usize) {
    let (e1, e2) = (&m1.edges[a1], &m2.edges[a2]);
    let scale = e1.rescaled[0].max(e2.rescaled[0]).as_f64().max(f64::MIN_POSITIVE);
    (0..n)
        .map(|i| ((e1.rescaled[i] - e2.rescaled[i]).abs().as_f64() / scale, i))
        .fold((0.0, 0), |acc, x| if x.0 > acc.0 { x } else { acc })
}

fn arc_order<T: Real>(m: &MeasuredReebGraph<T>) -> Vec<usize> {
    let mut order: Vec<usize> = (0..m.graph.num_arcs()).collect();
    order.sort_by(|&a, &b| {
        let ka = (m.edges[a].f_lo, m.edges[a].moments[0]);
        let kb = (m.edges[b].f_lo, m.edges[b].moments[0]);
        ka.partial_cmp(&kb).unwrap_or(std::cmp::Ordering::Equal)
    });
    order
}

fn finish(node_map: &[Option<usize>], arc_map: &[usize], md: f64, cd: f64) -> GraphMatching {
    GraphMatching {
        node_map: node_map.iter().map(|x| x.expect("complete node map")).collect(),
        arc_map: arc_map.to_vec(),
        moment_discrepancy: md,
        circulation_discrepancy: cd,
    }
}

/// Searches for a direction-preserving isomorphism matching the first `N` rescaled moments of every arc.
pub fn measured_iso<T: Real>(m1: &MeasuredReebGraph<T>, m2: &MeasuredReebGraph<T>, opts: &MatchOptions) -> Verdict {
    let (g1, g2) = (&m1.graph, &m2.graph);
    if let Some(w) = structural_witness(g1, g2) {
        return Verdict::NotIsomorphic(w);
    }
    let n = opts.moments.min(m1.num_moments()).min(m2.num_moments()).max(1);
    let tol_f = value_tolerance(g1, g2, opts.tol_f);
    let order = arc_order(m1);
    let mut found = None;
    {
        let mut search = Search::new(g1, g2, order.clone(), tol_f, usize::MAX);
        search.run(
            0,
            &mut |a1, a2| moment_discrepancy(m1, m2, a1, a2, n).0 <= opts.tol_rel,
            &mut |nodes, arcs| {
                let md = arcs.iter().enumerate().map(|(a1, &a2)| moment_discrepancy(m1, m2, a1, a2, n).0).fold(0.0, f64::max);
                found = Some(finish(nodes, arcs, md, 0.0));
                true
            },
        );
    }
    if let Some(m) = found {
        return Verdict::Isomorphic(m);
    }
    // witness: the structural matching whose worst arc is best
    let mut best: Option<(f64, usize, usize, usize)> = None;
    let mut search = Search::new(g1, g2, order, tol_f, opts.max_matchings);
    search.run(0, &mut |_, _| true, &mut |_, arcs| {
        let worst = arcs
            .iter()
            .enumerate()
            .map(|(a1, &a2)| {
                let (d, i) = moment_discrepancy(m1, m2, a1, a2, n);
                (d, a1, a2, i)
            })
            .fold((0.0, 0, 0, 0), |acc, x| if x.0 > acc.0 { x } else { acc });
        if best.map_or(true, |b| worst.0 < b.0) {
            best = Some(worst);
        }
        false
    });
    match best {
        None => Verdict::NotIsomorphic(Witness::Structure(
            "no bijection preserves incidence, direction, node kinds and node values".into(),
        )),
        Some((d, a1, a2, i)) => Verdict::NotIsomorphic(Witness::EdgeMoment {
            left_arc: a1,
            right_arc: a2,
            index: i,
            left: m1.edges[a1].rescaled[i].as_f64(),
            right: m2.edges[a2].rescaled[i].as_f64(),
            discrepancy: d,
        }),
    }
}

fn circulation_scale<T: Real>(c1: &CirculationGraph<T>, c2: &CirculationGraph<T>) -> f64 {
    c1.residuals.scale.max(c2.residuals.scale).max(f64::MIN_POSITIVE)
}

fn circulation_discrepancy<T: Real>(c1: &CirculationGraph<T>, c2: &CirculationGraph<T>, a1: usize, a2: usize, scale: f64) -> f64 {
    let (x, y) = (&c1.circulation, &c2.circulation);
    let lo = (x.lower_limit(a1) - y.lower_limit(a2)).abs().as_f64();
    let hi = (x.upper_limit(a1) - y.upper_limit(a2)).abs().as_f64();
    lo.max(hi) / scale
}

/// [`measured_iso`] that additionally requires matching circulation limits on every arc.
pub fn circulation_iso<T: Real>(c1: &CirculationGraph<T>, c2: &CirculationGraph<T>, opts: &MatchOptions) -> Verdict {
    let (m1, m2) = (&c1.measured, &c2.measured);
    let base = measured_iso(m1, m2, opts);
    if !base.is_isomorphic() {
        return base;
    }
    let (g1, g2) = (&m1.graph, &m2.graph);
    let n = opts.moments.min(m1.num_moments()).min(m2.num_moments()).max(1);
    let tol_f = value_tolerance(g1, g2, opts.tol_f);
    let scale = circulation_scale(c1, c2);
    let order = arc_order(m1);
    let mut found = None;
    {
        let mut search = Search::new(g1, g2, order.clone(), tol_f, usize::MAX);
        search.run(
            0,
            &mut |a1, a2| {
                moment_discrepancy(m1, m2, a1, a2, n).0 <= opts.tol_rel
                    && circulation_discrepancy(c1, c2, a1, a2, scale) <= opts.tol_circ
            },
            &mut |nodes, arcs| {
                let md = arcs.iter().enumerate().map(|(a1, &a2)| moment_discrepancy(m1, m2, a1, a2, n).0).fold(0.0, f64::max);
                let cd = arcs.iter().enumerate().map(|(a1, &a2)| circulation_discrepancy(c1, c2, a1, a2, scale)).fold(0.0, f64::max);
                found = Some(finish(nodes, arcs, md, cd));
                true
            },
        );
    }
    if let Some(m) = found {
        return Verdict::Isomorphic(m);
    }
    let mut best: Option<(f64, usize, usize)> = None;
    let mut search = Search::new(g1, g2, order, tol_f, opts.max_matchings);
    search.run(
        0,
        &mut |a1, a2| moment_discrepancy(m1, m2, a1, a2, n).0 <= opts.tol_rel,
        &mut |_, arcs| {
            let worst = arcs
                .iter()
                .enumerate()
                .map(|(a1, &a2)| (circulation_discrepancy(c1, c2, a1, a2, scale), a1, a2))
                .fold((0.0, 0, 0), |acc, x| if x.0 > acc.0 { x } else { acc });
            if best.map_or(true, |b| worst.0 < b.0) {
                best = Some(worst);
            }
            false
        },
    );
    let (d, a1, a2) = best.expect("a moment-preserving matching exists");
    let lim = |c: &CirculationGraph<T>, a: usize| [c.circulation.lower_limit(a).as_f64(), c.circulation.upper_limit(a).as_f64()];
    Verdict::NotIsomorphic(Witness::Circulation { left_arc: a1, right_arc: a2, left: lim(c1, a1), right: lim(c2, a2), discrepancy: d })
}

/// A coset representative on a surface, optionally with its vorticity field given explicitly.
#[derive(Debug, Clone, Copy)]
pub struct Coset<'a, T> {
    pub surface: &'a TriangulatedSurface<T>,
    pub form: &'a DiscreteOneForm<T>,
    /// Vorticity values; `curl(form)` when absent.
    pub field: Option<&'a [T]>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct OrbitOptions {
    pub matching: MatchOptions,
    pub circulation: CirculationOptions,
}

/// Verdict with the Casimir data of both sides.
#[derive(Debug, Clone)]
pub struct OrbitReport<T> {
    pub verdict: Verdict,
    pub left: CirculationGraph<T>,
    pub right: CirculationGraph<T>,
    /// `max |curl(form) - field| / range` for each side (zero when the field is derived).
    pub curl_defect: [f64; 2],
}

impl<T: Real> OrbitReport<T> {
    pub fn to_json(&self) -> Value {
        let mut doc = self.verdict.to_json();
        doc["left"] = self.left.to_json(false);
        doc["right"] = self.right.to_json(false);
        doc["curl_defect"] = json!(self.curl_defect);
        doc
    }
}

/// Circulation graph of one coset: vorticity, perturbation, Reeb graph, measure, circulation.
pub fn analyze_coset<T: Real>(coset: Coset<'_, T>, opts: &CirculationOptions) -> Result<(CirculationGraph<T>, f64)> {
    let c = curl(coset.surface, coset.form);
    let (values, defect) = match coset.field {
        None => (c, 0.0),
        Some(f) => {
            if f.len() != coset.surface.num_vertices() {
                return Err(Error::CountMismatch { what: "field values", expected: coset.surface.num_vertices(), found: f.len() });
            }
            let (lo, hi) = f.iter().fold((T::infinity(), T::neg_infinity()), |(lo, hi), x| (lo.min(*x), hi.max(*x)));
            let range = (hi - lo).as_f64().max(f64::MIN_POSITIVE);
            let d = f.iter().zip(&c).map(|(a, b)| (*a - *b).abs().as_f64()).fold(0.0, f64::max);
            (f.to_vec(), d / range)
        }
    };
    let field = perturb_to_simple_with(&classify_vertices(coset.surface, values), coset.surface, opts.perturb_eps)?;
    Ok((build_circulation_graph(coset.surface, &field, coset.form, *opts)?, defect))
}

/// Decides whether two cosets lie on one coadjoint orbit, up to the configured truncation.
pub fn same_orbit<T: Real>(left: Coset<'_, T>, right: Coset<'_, T>, opts: &OrbitOptions) -> Result<OrbitReport<T>> {
    let (l, dl) = analyze_coset(left, &opts.circulation)?;
    let (r, dr) = analyze_coset(right, &opts.circulation)?;
    let verdict = circulation_iso(&l, &r, &opts.matching);
    Ok(OrbitReport { verdict, left: l, right: r, curl_defect: [dl, dr] })
}
