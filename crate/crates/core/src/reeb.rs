//! Reeb graph of a simple PL Morse field and the projection of the surface onto it.
//!
//! Construction sweeps the critical levels in `(value, index)` order. The open
//! slabs between consecutive critical levels are cut into triangle pieces; pieces
//! of one slab are merged across shared edges, and pieces of adjacent slabs are
//! merged through every level component that does not contain the critical
//! vertex of that level. The resulting classes are the arcs.

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::geometry::{certify_simple, MorseField, SimpleMorseCertificate, TriangulatedSurface, VertexClass};
use crate::scalar::Real;
use crate::unionfind::UnionFind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodeKind {
    Min,
    Saddle,
    Max,
}

impl NodeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::Min => "min",
            NodeKind::Saddle => "saddle",
            NodeKind::Max => "max",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "min" => Some(NodeKind::Min),
            "saddle" => Some(NodeKind::Saddle),
            "max" => Some(NodeKind::Max),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReebNode<T> {
    /// Mesh vertex realizing the node, when the graph comes from a surface.
    pub vertex: Option<usize>,
    pub f: T,
    pub kind: NodeKind,
}

/// Arc oriented by increasing `f`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReebArc {
    pub tail: usize,
    pub head: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReebGraph<T> {
    nodes: Vec<ReebNode<T>>,
    arcs: Vec<ReebArc>,
}

impl<T: Real> ReebGraph<T> {
    /// Assembles a graph from parts; see [`Self::validate`] for the structural checks.
    pub fn new(nodes: Vec<ReebNode<T>>, arcs: Vec<ReebArc>) -> Self {
        Self { nodes, arcs }
    }

    pub fn nodes(&self) -> &[ReebNode<T>] {
        &self.nodes
    }

    pub fn arcs(&self) -> &[ReebArc] {
        &self.arcs
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_arcs(&self) -> usize {
        self.arcs.len()
    }

    /// First Betti number `E - V + 1` of the (connected) graph.
    pub fn betti1(&self) -> usize {
        (self.arcs.len() + 1).saturating_sub(self.nodes.len())
    }

    pub fn in_arcs(&self, v: usize) -> Vec<usize> {
        (0..self.arcs.len()).filter(|&a| self.arcs[a].head == v).collect()
    }

    pub fn out_arcs(&self, v: usize) -> Vec<usize> {
        (0..self.arcs.len()).filter(|&a| self.arcs[a].tail == v).collect()
    }

    pub fn arc_range(&self, a: usize) -> (T, T) {
        let arc = self.arcs[a];
        (self.nodes[arc.tail].f, self.nodes[arc.head].f)
    }

    pub fn topology(&self) -> GraphTopology {
        GraphTopology { num_nodes: self.nodes.len(), arcs: self.arcs.iter().map(|a| (a.tail, a.head)).collect() }
    }

    /// Lists every violated Reeb-graph axiom; empty when the graph is valid.
    pub fn validate(&self) -> Vec<String> {
        let mut issues = Vec::new();
        if !self.topology().is_connected() {
            issues.push("graph is not connected".to_string());
        }
        for (v, node) in self.nodes.iter().enumerate() {
            let (i, o) = (self.in_arcs(v).len(), self.out_arcs(v).len());
            let ok = match node.kind {
                NodeKind::Min => (i, o) == (0, 1),
                NodeKind::Max => (i, o) == (1, 0),
                NodeKind::Saddle => (i, o) == (2, 1) || (i, o) == (1, 2),
            };
            if !ok {
                issues.push(format!("node {v} ({}) has {i} incoming and {o} outgoing arcs", node.kind.as_str()));
            }
        }
        for (a, arc) in self.arcs.iter().enumerate() {
            if !(self.nodes[arc.tail].f < self.nodes[arc.head].f) {
                issues.push(format!("f does not increase along arc {a}"));
            }
        }
        issues
    }

    pub fn to_json(&self) -> Value {
        let nodes: Vec<Value> = self
            .nodes
            .iter()
            .enumerate()
            .map(|(id, n)| {
                let mut v = json!({"id": id, "f": n.f.as_f64(), "kind": n.kind.as_str()});
                if let Some(vx) = n.vertex {
                    v["vertex"] = json!(vx);
                }
                v
            })
            .collect();
        let arcs: Vec<Value> =
            self.arcs.iter().enumerate().map(|(id, a)| json!({"id": id, "tail": a.tail, "head": a.head})).collect();
        json!({"nodes": nodes, "arcs": arcs})
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let bad = |m: &str| Error::InvalidInput(format!("graph document: {m}"));
        let mut nodes = Vec::new();
        for n in v["nodes"].as_array().ok_or_else(|| bad("missing nodes"))? {
            let f = n["f"].as_f64().ok_or_else(|| bad("node without f"))?;
            let kind = n["kind"].as_str().and_then(NodeKind::parse).ok_or_else(|| bad("node kind"))?;
            let vertex = n.get("vertex").and_then(|x| x.as_u64()).map(|x| x as usize);
            nodes.push(ReebNode { vertex, f: T::lit(f), kind });
        }
        let mut arcs = Vec::new();
        for a in v["arcs"].as_array().ok_or_else(|| bad("missing arcs"))? {
            let tail = a["tail"].as_u64().ok_or_else(|| bad("arc tail"))? as usize;
            let head = a["head"].as_u64().ok_or_else(|| bad("arc head"))? as usize;
            if tail >= nodes.len() || head >= nodes.len() {
                return Err(bad("arc endpoint out of range"));
            }
            arcs.push(ReebArc { tail, head });
        }
        Ok(Self { nodes, arcs })
    }
}

/// Bare directed multigraph: node count plus `(tail, head)` arcs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphTopology {
    pub num_nodes: usize,
    pub arcs: Vec<(usize, usize)>,
}

impl GraphTopology {
    pub fn betti1(&self) -> usize {
        let mut uf = UnionFind::new(self.num_nodes);
        let mut comps = self.num_nodes;
        for &(a, b) in &self.arcs {
            if uf.union(a, b) {
                comps -= 1;
            }
        }
        self.arcs.len() + comps - self.num_nodes
    }

    pub fn is_connected(&self) -> bool {
        let mut uf = UnionFind::new(self.num_nodes);
        let mut comps = self.num_nodes;
        for &(a, b) in &self.arcs {
            if uf.union(a, b) {
                comps -= 1;
            }
        }
        comps <= 1
    }

    pub fn degree(&self, v: usize) -> usize {
        self.arcs.iter().map(|&(a, b)| (a == v) as usize + (b == v) as usize).sum()
    }
}

/// Portion of a triangle lying in one open slab between consecutive critical levels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Piece<T> {
    pub tri: usize,
    pub lo: T,
    pub hi: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    Node(usize),
    Arc(usize),
}

/// The projection `M -> Gamma`: graph location of every vertex and the triangle pieces of every arc.
#[derive(Debug, Clone)]
pub struct QuotientMap<T> {
    values: Vec<T>,
    locations: Vec<Location>,
    pieces: Vec<Vec<Piece<T>>>,
    ranges: Vec<(T, T)>,
}

impl<T: Real> QuotientMap<T> {
    pub fn location(&self, v: usize) -> Location {
        self.locations[v]
    }

    pub fn pieces(&self, arc: usize) -> &[Piece<T>] {
        &self.pieces[arc]
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn arc_range(&self, arc: usize) -> (T, T) {
        self.ranges[arc]
    }

    /// The level cycle `pi^{-1}(t)` on `arc`, oriented as the boundary of `{F < t}`.
    pub fn level_cycle(&self, surface: &TriangulatedSurface<T>, arc: usize, t: T) -> Result<LevelCycle<T>> {
        let (lo, hi) = self.ranges[arc];
        if !(t > lo && t < hi) {
            return Err(Error::OutOfRange { t: t.as_f64(), lo: lo.as_f64(), hi: hi.as_f64() });
        }
        let values = &self.values;
        let below = |v: usize| values[v] <= t;
        let start = self.pieces[arc]
            .iter()
            .find(|p| {
                p.lo <= t && t <= p.hi && {
                    let tri = surface.triangles()[p.tri];
                    let nb = tri.iter().filter(|&&v| below(v)).count();
                    nb == 1 || nb == 2
                }
            })
            .map(|p| p.tri)
            .ok_or_else(|| Error::InvalidInput(format!("no triangle of arc {arc} crosses level {t}")))?;
        let mut crossings = Vec::new();
        let mut triangles = Vec::new();
        let mut cur = start;
        loop {
            let tri = surface.triangles()[cur];
            // out-edge: below -> above in CCW order; in-edge: above -> below
            let mut out_edge = None;
            let mut in_edge = None;
            for k in 0..3 {
                let (x, y) = (tri[k], tri[(k + 1) % 3]);
                match (below(x), below(y)) {
                    (true, false) => out_edge = Some((x, y)),
                    (false, true) => in_edge = Some((x, y)),
                    _ => {}
                }
            }
            let (ox, oy) = out_edge.expect("crossing triangle");
            let (ix, iy) = in_edge.expect("crossing triangle");
            crossings.push(Crossing::new(values, ox, oy, t));
            triangles.push(cur);
            let (e, _) = surface.edge_id(ix, iy).expect("edge");
            let ed = surface.edges()[e];
            cur = if ed.tris[0] == cur { ed.tris[1] } else { ed.tris[0] };
            if cur == start {
                break;
            }
            if triangles.len() > surface.num_triangles() {
                return Err(Error::InvalidInput("level cycle did not close".into()));
            }
        }
        Ok(LevelCycle { crossings, triangles })
    }
}

/// Point where a level crosses the mesh edge from `below` to `above`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing<T> {
    pub below: usize,
    pub above: usize,
    /// Fraction of the way from `below` to `above`.
    pub frac: T,
}

impl<T: Real> Crossing<T> {
    fn new(values: &[T], below: usize, above: usize, t: T) -> Self {
        let (a, b) = (values[below], values[above]);
        Self { below, above, frac: (t - a) / (b - a) }
    }
}

/// Closed polygonal level curve; segment `k` runs through `triangles[k]` from
/// `crossings[k]` to `crossings[k + 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelCycle<T> {
    pub crossings: Vec<Crossing<T>>,
    pub triangles: Vec<usize>,
}

impl<T: Real> LevelCycle<T> {
    pub fn len(&self) -> usize {
        self.crossings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.crossings.is_empty()
    }

    pub fn points(&self, surface: &TriangulatedSurface<T>) -> Option<Vec<[T; 3]>> {
        let pos = surface.positions()?;
        Some(
            self.crossings
                .iter()
                .map(|c| {
                    let (p, q) = (pos[c.below], pos[c.above]);
                    [0, 1, 2].map(|d| p[d] + c.frac * (q[d] - p[d]))
                })
                .collect(),
        )
    }
}

/// Betti number versus genus check.
#[derive(Debug, Clone, PartialEq)]
pub struct CompatibilityReport {
    pub betti1: usize,
    pub genus: usize,
    pub pass: bool,
    pub detail: String,
}

pub fn check_compatibility<T: Real>(graph: &ReebGraph<T>, surface: &TriangulatedSurface<T>) -> CompatibilityReport {
    let betti1 = graph.topology().betti1();
    let genus = surface.genus();
    let pass = betti1 == genus;
    let detail = if pass {
        format!("betti1 {betti1} equals genus {genus}")
    } else {
        format!("betti1 {betti1} does not match genus {genus}")
    };
    CompatibilityReport { betti1, genus, pass, detail }
}

/// Certifies the field and builds its Reeb graph.
pub fn build_reeb_checked<T: Real>(
    surface: &TriangulatedSurface<T>,
    field: &MorseField<T>,
) -> Result<(ReebGraph<T>, QuotientMap<T>)> {
    let cert = certify_simple(field, surface).map_err(Error::NotSimple)?;
    build_reeb(surface, field, &cert)
}

pub fn build_reeb<T: Real>(
    surface: &TriangulatedSurface<T>,
    field: &MorseField<T>,
    cert: &SimpleMorseCertificate,
) -> Result<(ReebGraph<T>, QuotientMap<T>)> {
    let rank = field.rank();
    let values = field.values();
    let crit = &cert.critical;
    let crit_rank: Vec<usize> = crit.iter().map(|&v| rank[v]).collect();
    let k = crit.len();
    if k < 2 {
        return Err(Error::InvalidInput("a closed surface needs at least two critical points".into()));
    }
    let nslabs = k - 1;
    // slab range of a rank interval [lo, hi] (lo < hi): slabs s with c_s < hi and c_{s+1} > lo
    let slab_span = |lo: usize, hi: usize| -> (usize, usize) {
        let a = crit_rank.partition_point(|&c| c <= lo) - 1;
        let b = crit_rank.partition_point(|&c| c < hi) - 1;
        (a, b.min(nslabs - 1))
    };

    let tris = surface.triangles();
    let mut tri_rank = Vec::with_capacity(tris.len());
    let mut piece_base = Vec::with_capacity(tris.len() + 1);
    let mut tri_span = Vec::with_capacity(tris.len());
    let mut count = 0usize;
    for t in tris {
        let rs = t.map(|v| rank[v]);
        let lo = *rs.iter().min().unwrap();
        let hi = *rs.iter().max().unwrap();
        let span = slab_span(lo, hi);
        tri_rank.push((lo, hi));
        tri_span.push(span);
        piece_base.push(count);
        count += span.1 - span.0 + 1;
    }
    let piece_id = |t: usize, s: usize| piece_base[t] + s - tri_span[t].0;
    let mut uf = UnionFind::new(count);

    for e in surface.edges() {
        let (lo, hi) = (rank[e.a].min(rank[e.b]), rank[e.a].max(rank[e.b]));
        let (sa, sb) = slab_span(lo, hi);
        for s in sa..=sb {
            uf.union(piece_id(e.tris[0], s), piece_id(e.tris[1], s));
        }
    }

    // Join adjacent slabs through level components that avoid the critical vertex.
    let nv = surface.num_vertices();
    let mut level_id = vec![usize::MAX; surface.num_edges()];
    for j in 1..k - 1 {
        let c = crit_rank[j];
        let v = crit[j];
        let spanning: Vec<usize> =
            (0..tris.len()).filter(|&t| tri_rank[t].0 < c && c < tri_rank[t].1).collect();
        // level points: index 0 is the critical vertex, then crossing edges
        let mut touched = Vec::new();
        let mut next = 1usize;
        let mut seg = Vec::with_capacity(spanning.len());
        let crosses = |e: usize| {
            let ed = surface.edges()[e];
            let (a, b) = (rank[ed.a], rank[ed.b]);
            a.min(b) < c && c < a.max(b)
        };
        for &t in &spanning {
            let mut pts = [usize::MAX; 2];
            let mut np = 0;
            if tris[t].contains(&v) {
                pts[np] = 0;
                np += 1;
            }
            for &e in &surface.triangle_edges(t) {
                if crosses(e) {
                    if level_id[e] == usize::MAX {
                        level_id[e] = next;
                        next += 1;
                        touched.push(e);
                    }
                    pts[np] = level_id[e];
                    np += 1;
                }
            }
            debug_assert_eq!(np, 2);
            seg.push(pts);
        }
        let mut luf = UnionFind::new(next);
        for p in &seg {
            luf.union(p[0], p[1]);
        }
        let critical_root = luf.find(0);
        for (i, &t) in spanning.iter().enumerate() {
            if luf.find(seg[i][0]) != critical_root {
                uf.union(piece_id(t, j - 1), piece_id(t, j));
            }
        }
        for e in touched {
            level_id[e] = usize::MAX;
        }
    }
    let _ = nv;

    // Arcs are the union-find classes; the lowest and highest slab give tail and head.
    let mut root_arc = vec![usize::MAX; count];
    let mut arc_slabs: Vec<(usize, usize, usize)> = Vec::new(); // (min slab, max slab, first triangle)
    let mut piece_arc = vec![0usize; count];
    for t in 0..tris.len() {
        for s in tri_span[t].0..=tri_span[t].1 {
            let p = piece_id(t, s);
            let r = uf.find(p);
            if root_arc[r] == usize::MAX {
                root_arc[r] = arc_slabs.len();
                arc_slabs.push((s, s, t));
            }
            let a = root_arc[r];
            arc_slabs[a].0 = arc_slabs[a].0.min(s);
            arc_slabs[a].1 = arc_slabs[a].1.max(s);
            piece_arc[p] = a;
        }
    }
    // deterministic arc order: (tail, head, first triangle)
    let mut arc_order: Vec<usize> = (0..arc_slabs.len()).collect();
    arc_order.sort_by_key(|&a| (arc_slabs[a].0, arc_slabs[a].1 + 1, arc_slabs[a].2));
    let mut renum = vec![0usize; arc_slabs.len()];
    for (new, &old) in arc_order.iter().enumerate() {
        renum[old] = new;
    }

    let nodes: Vec<ReebNode<T>> = crit
        .iter()
        .map(|&v| ReebNode {
            vertex: Some(v),
            f: values[v],
            kind: match field.class(v) {
                VertexClass::Min => NodeKind::Min,
                VertexClass::Max => NodeKind::Max,
                _ => NodeKind::Saddle,
            },
        })
        .collect();
    let arcs: Vec<ReebArc> =
        arc_order.iter().map(|&a| ReebArc { tail: arc_slabs[a].0, head: arc_slabs[a].1 + 1 }).collect();

    let slab_value = |s: usize| values[crit[s]];
    let mut pieces = vec![Vec::new(); arcs.len()];
    for t in 0..tris.len() {
        for s in tri_span[t].0..=tri_span[t].1 {
            let a = renum[piece_arc[piece_id(t, s)]];
            pieces[a].push(Piece { tri: t, lo: slab_value(s), hi: slab_value(s + 1) });
        }
    }

    let mut node_of = vec![usize::MAX; nv];
    for (i, &v) in crit.iter().enumerate() {
        node_of[v] = i;
    }
    let mut locations = Vec::with_capacity(nv);
    for v in 0..nv {
        if node_of[v] != usize::MAX {
            locations.push(Location::Node(node_of[v]));
            continue;
        }
        let r = rank[v];
        let s = crit_rank.partition_point(|&c| c < r) - 1;
        let t = surface.vertex_triangles(v)[0];
        locations.push(Location::Arc(renum[piece_arc[piece_id(t, s)]]));
    }

    let graph = ReebGraph { nodes, arcs };
    let issues = graph.validate();
    if !issues.is_empty() {
        return Err(Error::InvalidInput(format!("Reeb graph construction failed: {}", issues.join("; "))));
    }
    let ranges = (0..graph.num_arcs()).map(|a| graph.arc_range(a)).collect();
    Ok((graph, QuotientMap { values: values.to_vec(), locations, pieces, ranges }))
}

/// Cancels extremum-saddle pairs joined by a leaf arc of persistence below `tau`,
/// smallest first. The trunk and continuation arcs of a cancelled saddle merge into one
/// arc that also carries the leaf's pieces. Returns the number of cancelled pairs.
///
/// Meant for grid noise: a saddle whose descending wedge misses every link edge shows up
/// as an extremum and two saddles about one cell apart.
pub fn simplify<T: Real>(graph: &ReebGraph<T>, qmap: &QuotientMap<T>, tau: T) -> (ReebGraph<T>, QuotientMap<T>, usize) {
    let mut nodes: Vec<Option<ReebNode<T>>> = graph.nodes.iter().cloned().map(Some).collect();
    let mut arcs: Vec<Option<ReebArc>> = graph.arcs.iter().copied().map(Some).collect();
    let mut pieces = qmap.pieces.clone();
    // owner[a]: arc that absorbed a (itself while alive)
    let mut owner: Vec<usize> = (0..arcs.len()).collect();
    let mut node_owner: Vec<Option<usize>> = vec![None; nodes.len()];
    let mut cancelled = 0;
    loop {
        let mut best: Option<(T, usize)> = None;
        for (a, arc) in arcs.iter().enumerate() {
            let Some(arc) = arc else { continue };
            let (tn, hn) = (nodes[arc.tail].as_ref().unwrap(), nodes[arc.head].as_ref().unwrap());
            let leaf = match (tn.kind, hn.kind) {
                (NodeKind::Min, NodeKind::Saddle) => arcs.iter().flatten().filter(|b| b.head == arc.head).count() == 2,
                (NodeKind::Saddle, NodeKind::Max) => arcs.iter().flatten().filter(|b| b.tail == arc.tail).count() == 2,
                _ => false,
            };
            let p = hn.f - tn.f;
            if leaf && p < tau && best.map_or(true, |(q, _)| p < q) {
                best = Some((p, a));
            }
        }
        let Some((_, leaf)) = best else { break };
        let la = arcs[leaf].unwrap();
        let min_leaf = nodes[la.tail].as_ref().unwrap().kind == NodeKind::Min;
        let (ext, s) = if min_leaf { (la.tail, la.head) } else { (la.head, la.tail) };
        let live = |f: &dyn Fn(&ReebArc) -> bool| arcs.iter().enumerate().filter_map(|(i, b)| b.filter(|b| f(b)).map(|_| i)).collect::<Vec<_>>();
        let trunk = live(&|b: &ReebArc| if min_leaf { b.head == s } else { b.tail == s })
            .into_iter()
            .find(|&b| b != leaf)
            .unwrap();
        let cont = live(&|b: &ReebArc| if min_leaf { b.tail == s } else { b.head == s })[0];
        let (lo_arc, hi_arc) = if min_leaf { (trunk, cont) } else { (cont, trunk) };
        let merged = ReebArc { tail: arcs[lo_arc].unwrap().tail, head: arcs[hi_arc].unwrap().head };
        let mut ps = std::mem::take(&mut pieces[trunk]);
        ps.append(&mut std::mem::take(&mut pieces[cont]));
        ps.append(&mut std::mem::take(&mut pieces[leaf]));
        pieces[trunk] = ps;
        arcs[trunk] = Some(merged);
        arcs[cont] = None;
        arcs[leaf] = None;
        for o in owner.iter_mut() {
            if *o == cont || *o == leaf {
                *o = trunk;
            }
        }
        nodes[ext] = None;
        nodes[s] = None;
        node_owner[ext] = Some(trunk);
        node_owner[s] = Some(trunk);
        for o in node_owner.iter_mut().flatten() {
            if *o == cont || *o == leaf {
                *o = trunk;
            }
        }
        cancelled += 1;
    }
    if cancelled == 0 {
        return (graph.clone(), qmap.clone(), 0);
    }
    let node_id: Vec<Option<usize>> = {
        let mut next = 0;
        nodes.iter().map(|n| n.as_ref().map(|_| { next += 1; next - 1 })).collect()
    };
    let arc_id: Vec<Option<usize>> = {
        let mut next = 0;
        arcs.iter().map(|a| a.as_ref().map(|_| { next += 1; next - 1 })).collect()
    };
    let new_nodes: Vec<ReebNode<T>> = nodes.into_iter().flatten().collect();
    let mut new_arcs = Vec::new();
    let mut new_pieces = Vec::new();
    let mut ranges = Vec::new();
    for (a, arc) in arcs.iter().enumerate() {
        if let Some(arc) = arc {
            let (t, h) = (node_id[arc.tail].unwrap(), node_id[arc.head].unwrap());
            new_arcs.push(ReebArc { tail: t, head: h });
            new_pieces.push(std::mem::take(&mut pieces[a]));
            ranges.push((new_nodes[t].f, new_nodes[h].f));
        }
    }
    let locations = qmap
        .locations
        .iter()
        .map(|l| match *l {
            Location::Node(n) => match node_id[n] {
                Some(m) => Location::Node(m),
                None => Location::Arc(arc_id[owner[node_owner[n].unwrap()]].unwrap()),
            },
            Location::Arc(a) => Location::Arc(arc_id[owner[a]].unwrap()),
        })
        .collect();
    let q = QuotientMap { values: qmap.values.clone(), locations, pieces: new_pieces, ranges };
    (ReebGraph::new(new_nodes, new_arcs), q, cancelled)
}
