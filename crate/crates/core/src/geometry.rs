//! Closed oriented triangulated surfaces and piecewise-linear Morse theory on them.
//!
//! A [`TriangulatedSurface`] carries its own area form: one positive weight per
//! triangle. Positions are optional and only used to derive areas and to place
//! level-set points.
//!
//! Vertex classification follows the lower-link rule: ties between equal values
//! are broken by vertex index, so every field induces a strict total order.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// An undirected mesh edge, stored with `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    /// The triangle traversing `a -> b` and the one traversing `b -> a`.
    pub tris: [usize; 2],
}

#[derive(Debug, Clone)]
pub struct TriangulatedSurface<T> {
    positions: Option<Vec<[T; 3]>>,
    triangles: Vec<[usize; 3]>,
    areas: Vec<T>,
    edges: Vec<Edge>,
    edge_lookup: HashMap<(usize, usize), usize>,
    tri_edges: Vec<[usize; 3]>,
    links: Vec<Vec<usize>>,
    vertex_tris: Vec<Vec<usize>>,
}

fn triangle_area<T: Real>(p: &[T; 3], q: &[T; 3], r: &[T; 3]) -> T {
    let u = [q[0] - p[0], q[1] - p[1], q[2] - p[2]];
    let v = [r[0] - p[0], r[1] - p[1], r[2] - p[2]];
    let c = [
        u[1] * v[2] - u[2] * v[1],
        u[2] * v[0] - u[0] * v[2],
        u[0] * v[1] - u[1] * v[0],
    ];
    (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt() * T::lit(0.5)
}

impl<T: Real> TriangulatedSurface<T> {
    /// Builds a surface whose area form is induced by the vertex positions.
    pub fn from_positions(positions: Vec<[T; 3]>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        let areas = triangles
            .iter()
            .map(|t| triangle_area(&positions[t[0]], &positions[t[1]], &positions[t[2]]))
            .collect::<Vec<_>>();
        Self::build(positions.len(), Some(positions), triangles, areas)
    }

    /// Builds a surface from combinatorics plus an explicit area form.
    pub fn from_areas(
        num_vertices: usize,
        triangles: Vec<[usize; 3]>,
        areas: Vec<T>,
        positions: Option<Vec<[T; 3]>>,
    ) -> Result<Self> {
        if let Some(p) = &positions {
            if p.len() != num_vertices {
                return Err(Error::CountMismatch {
                    what: "vertex positions",
                    expected: num_vertices,
                    found: p.len(),
                });
            }
        }
        Self::build(num_vertices, positions, triangles, areas)
    }

    /// Replaces the area form, keeping combinatorics.
    pub fn with_areas(&self, areas: Vec<T>) -> Result<Self> {
        if areas.len() != self.triangles.len() {
            return Err(Error::CountMismatch {
                what: "triangle areas",
                expected: self.triangles.len(),
                found: areas.len(),
            });
        }
        check_areas(&areas)?;
        let mut s = self.clone();
        s.areas = areas;
        Ok(s)
    }

    fn build(
        num_vertices: usize,
        positions: Option<Vec<[T; 3]>>,
        triangles: Vec<[usize; 3]>,
        areas: Vec<T>,
    ) -> Result<Self> {
        if areas.len() != triangles.len() {
            return Err(Error::CountMismatch {
                what: "triangle areas",
                expected: triangles.len(),
                found: areas.len(),
            });
        }
        if triangles.is_empty() {
            return Err(Error::InvalidInput("surface has no triangles".into()));
        }
        for (i, t) in triangles.iter().enumerate() {
            if t.iter().any(|&v| v >= num_vertices) {
                return Err(Error::InvalidInput(format!("triangle {i} references a missing vertex")));
            }
            if t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
                return Err(Error::InvalidInput(format!("triangle {i} repeats a vertex")));
            }
        }
        check_areas(&areas)?;

        // directed half-edge -> triangle
        let mut half: HashMap<(usize, usize), usize> = HashMap::with_capacity(triangles.len() * 3);
        for (ti, t) in triangles.iter().enumerate() {
            for k in 0..3 {
                let (u, v) = (t[k], t[(k + 1) % 3]);
                if half.insert((u, v), ti).is_some() {
                    let (a, b) = (u.min(v), u.max(v));
                    if half.contains_key(&(v, u)) {
                        return Err(Error::NonManifold(a, b, 3));
                    }
                    return Err(Error::Orientation(a, b));
                }
            }
        }
        let mut edges = Vec::with_capacity(half.len() / 2);
        let mut edge_lookup = HashMap::with_capacity(half.len() / 2);
        let mut tri_edges = vec![[usize::MAX; 3]; triangles.len()];
        for (ti, t) in triangles.iter().enumerate() {
            for k in 0..3 {
                let (u, v) = (t[k], t[(k + 1) % 3]);
                let key = (u.min(v), u.max(v));
                let id = match edge_lookup.get(&key) {
                    Some(&id) => id,
                    None => {
                        let (a, b) = key;
                        let fwd = half.get(&(a, b)).copied();
                        let bwd = half.get(&(b, a)).copied();
                        let (fwd, bwd) = match (fwd, bwd) {
                            (Some(f), Some(g)) => (f, g),
                            _ => return Err(Error::NonManifold(a, b, 1)),
                        };
                        let id = edges.len();
                        edges.push(Edge { a, b, tris: [fwd, bwd] });
                        edge_lookup.insert(key, id);
                        id
                    }
                };
                tri_edges[ti][k] = id;
            }
        }

        let mut vertex_tris = vec![Vec::new(); num_vertices];
        for (ti, t) in triangles.iter().enumerate() {
            for &v in t {
                vertex_tris[v].push(ti);
            }
        }
        let mut links = Vec::with_capacity(num_vertices);
        for v in 0..num_vertices {
            links.push(ordered_link(v, &vertex_tris[v], &triangles)?);
        }

        Ok(Self { positions, triangles, areas, edges, edge_lookup, tri_edges, links, vertex_tris })
    }

    pub fn num_vertices(&self) -> usize {
        self.links.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.num_vertices() as i64 - self.num_edges() as i64 + self.num_triangles() as i64
    }

    /// Genus of the closed orientable surface, `(2 - chi) / 2`.
    pub fn genus(&self) -> usize {
        ((2 - self.euler_characteristic()) / 2).max(0) as usize
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn areas(&self) -> &[T] {
        &self.areas
    }

    pub fn total_area(&self) -> T {
        self.areas.iter().copied().sum()
    }

    pub fn positions(&self) -> Option<&[[T; 3]]> {
        self.positions.as_deref()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Edge ids of triangle `t`, in the order `(v0 v1, v1 v2, v2 v0)`.
    pub fn triangle_edges(&self, t: usize) -> [usize; 3] {
        self.tri_edges[t]
    }

    /// Looks up the edge joining `u` and `v`; the sign is `+1` when `u < v`.
    pub fn edge_id(&self, u: usize, v: usize) -> Option<(usize, i8)> {
        let key = (u.min(v), u.max(v));
        self.edge_lookup.get(&key).map(|&id| (id, if u < v { 1 } else { -1 }))
    }

    /// Neighbours of `v` in counter-clockwise cyclic order.
    pub fn link(&self, v: usize) -> &[usize] {
        &self.links[v]
    }

    pub fn vertex_triangles(&self, v: usize) -> &[usize] {
        &self.vertex_tris[v]
    }

    /// Applies a vertex relabeling: new index of old vertex `v` is `perm[v]`.
    pub fn relabeled(&self, perm: &[usize]) -> Result<Self> {
        let n = self.num_vertices();
        let tris = self.triangles.iter().map(|t| [perm[t[0]], perm[t[1]], perm[t[2]]]).collect();
        let positions = self.positions.as_ref().map(|p| {
            let mut q = vec![[T::zero(); 3]; n];
            for (v, x) in p.iter().enumerate() {
                q[perm[v]] = *x;
            }
            q
        });
        Self::build(n, positions, tris, self.areas.clone())
    }
}

fn check_areas<T: Real>(areas: &[T]) -> Result<()> {
    for (i, a) in areas.iter().enumerate() {
        if !(*a > T::zero()) || !a.is_finite() {
            return Err(Error::InvalidArea { tri: i, area: a.as_f64() });
        }
    }
    Ok(())
}

fn ordered_link(v: usize, tris: &[usize], triangles: &[[usize; 3]]) -> Result<Vec<usize>> {
    if tris.is_empty() {
        return Err(Error::NonManifoldVertex(v));
    }
    let mut next: HashMap<usize, usize> = HashMap::with_capacity(tris.len());
    for &ti in tris {
        let t = triangles[ti];
        let k = t.iter().position(|&x| x == v).unwrap();
        let (a, b) = (t[(k + 1) % 3], t[(k + 2) % 3]);
        if next.insert(a, b).is_some() {
            return Err(Error::NonManifoldVertex(v));
        }
    }
    let start = triangles[tris[0]][(triangles[tris[0]].iter().position(|&x| x == v).unwrap() + 1) % 3];
    let mut ring = Vec::with_capacity(tris.len());
    let mut cur = start;
    loop {
        ring.push(cur);
        cur = match next.get(&cur) {
            Some(&n) => n,
            None => return Err(Error::NonManifoldVertex(v)),
        };
        if cur == start {
            break;
        }
        if ring.len() > tris.len() {
            return Err(Error::NonManifoldVertex(v));
        }
    }
    if ring.len() != tris.len() {
        return Err(Error::NonManifoldVertex(v));
    }
    Ok(ring)
}

// ---------------------------------------------------------------------------
// File formats

/// Parses an ASCII OFF document into positions and triangles.
pub fn parse_off<T: Real, R: BufRead>(reader: R) -> Result<(Vec<[T; 3]>, Vec<[usize; 3]>)> {
    let mut lines = reader.lines().enumerate().filter_map(|(i, l)| match l {
        Ok(l) => {
            let body = l.split('#').next().unwrap_or("").trim().to_string();
            if body.is_empty() {
                None
            } else {
                Some(Ok((i + 1, body)))
            }
        }
        Err(e) => Some(Err(e)),
    });
    let mut next_line = |what: &str| -> Result<(usize, String)> {
        match lines.next() {
            Some(Ok(x)) => Ok(x),
            Some(Err(e)) => Err(e.into()),
            None => Err(Error::Parse { line: 0, msg: format!("unexpected end of file, expected {what}") }),
        }
    };
    let (ln, header) = next_line("OFF header")?;
    let mut rest: Vec<String> = Vec::new();
    if let Some(tail) = header.strip_prefix("OFF") {
        rest.extend(tail.split_whitespace().map(String::from));
    } else {
        return Err(Error::Parse { line: ln, msg: "missing OFF header".into() });
    }
    let (ln, counts) = if rest.is_empty() { next_line("element counts")? } else { (ln, rest.join(" ")) };
    let counts = counts
        .split_whitespace()
        .map(|s| s.parse::<usize>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::Parse { line: ln, msg: e.to_string() })?;
    if counts.len() < 2 {
        return Err(Error::Parse { line: ln, msg: "expected vertex and face counts".into() });
    }
    let (nv, nf) = (counts[0], counts[1]);
    let mut positions = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, l) = next_line("vertex")?;
        let xs = l
            .split_whitespace()
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Parse { line: ln, msg: e.to_string() })?;
        if xs.len() < 3 {
            return Err(Error::Parse { line: ln, msg: "vertex needs three coordinates".into() });
        }
        positions.push([T::lit(xs[0]), T::lit(xs[1]), T::lit(xs[2])]);
    }
    let mut triangles = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (ln, l) = next_line("face")?;
        let xs = l
            .split_whitespace()
            .map(|s| s.parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Parse { line: ln, msg: e.to_string() })?;
        if xs.len() < 4 || xs[0] != 3 {
            return Err(Error::Parse { line: ln, msg: "only triangular faces are supported".into() });
        }
        triangles.push([xs[1], xs[2], xs[3]]);
    }
    Ok((positions, triangles))
}

/// Parses a sidecar file with one real per non-empty line.
pub fn parse_reals<T: Real, R: BufRead>(reader: R) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let x: f64 = body.parse().map_err(|e: std::num::ParseFloatError| Error::Parse {
            line: i + 1,
            msg: e.to_string(),
        })?;
        out.push(T::lit(x));
    }
    Ok(out)
}

pub fn write_off<T: Real, W: std::io::Write>(surface: &TriangulatedSurface<T>, mut w: W) -> Result<()> {
    writeln!(w, "OFF")?;
    writeln!(w, "{} {} 0", surface.num_vertices(), surface.num_triangles())?;
    let zero = [T::zero(); 3];
    for v in 0..surface.num_vertices() {
        let p = surface.positions().map(|p| p[v]).unwrap_or(zero);
        writeln!(w, "{:e} {:e} {:e}", p[0].as_f64(), p[1].as_f64(), p[2].as_f64())?;
    }
    for t in surface.triangles() {
        writeln!(w, "3 {} {} {}", t[0], t[1], t[2])?;
    }
    Ok(())
}

pub fn write_reals<T: Real, W: std::io::Write>(values: &[T], mut w: W) -> Result<()> {
    for x in values {
        writeln!(w, "{:e}", x.as_f64())?;
    }
    Ok(())
}

/// Loads a surface and its scalar field from readers; `areas` overrides position-derived areas.
pub fn load_surface<T: Real, R1: BufRead, R2: BufRead, R3: BufRead>(
    mesh: R1,
    field: R2,
    areas: Option<R3>,
) -> Result<(TriangulatedSurface<T>, MorseField<T>)> {
    let (positions, triangles) = parse_off::<T, _>(mesh)?;
    let values = parse_reals::<T, _>(field)?;
    if values.len() != positions.len() {
        return Err(Error::CountMismatch { what: "field values", expected: positions.len(), found: values.len() });
    }
    let surface = match areas {
        Some(r) => {
            let a = parse_reals::<T, _>(r)?;
            TriangulatedSurface::from_areas(positions.len(), triangles, a, Some(positions))?
        }
        None => TriangulatedSurface::from_positions(positions, triangles)?,
    };
    let field = classify_vertices(&surface, values);
    Ok((surface, field))
}

// ---------------------------------------------------------------------------
// PL Morse classification

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VertexClass {
    Regular,
    Min,
    Max,
    /// Saddle with the given multiplicity (lower-link components minus one).
    Saddle(u32),
}

impl VertexClass {
    pub fn is_critical(self) -> bool {
        self != VertexClass::Regular
    }
}

/// Compares vertices by value, breaking ties by index.
#[inline]
pub fn vertex_order<T: Real>(values: &[T], u: usize, v: usize) -> Ordering {
    values[u].partial_cmp(&values[v]).unwrap_or(Ordering::Equal).then(u.cmp(&v))
}

#[derive(Debug, Clone)]
pub struct MorseField<T> {
    values: Vec<T>,
    classes: Vec<VertexClass>,
    order: Vec<usize>,
    rank: Vec<usize>,
}

impl<T: Real> MorseField<T> {
    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn class(&self, v: usize) -> VertexClass {
        self.classes[v]
    }

    pub fn classes(&self) -> &[VertexClass] {
        &self.classes
    }

    /// Vertices sorted by `(value, index)`.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Position of each vertex in [`Self::order`].
    pub fn rank(&self) -> &[usize] {
        &self.rank
    }

    pub fn critical_vertices(&self) -> Vec<usize> {
        self.order.iter().copied().filter(|&v| self.classes[v].is_critical()).collect()
    }

    pub fn count(&self, pred: impl Fn(VertexClass) -> bool) -> usize {
        self.classes.iter().filter(|c| pred(**c)).count()
    }

    /// `#min + #max - sum of saddle multiplicities`.
    pub fn index_sum(&self) -> i64 {
        self.classes
            .iter()
            .map(|c| match c {
                VertexClass::Min | VertexClass::Max => 1,
                VertexClass::Saddle(m) => -(*m as i64),
                VertexClass::Regular => 0,
            })
            .sum()
    }

    pub fn value_range(&self) -> (T, T) {
        let lo = self.values[self.order[0]];
        let hi = self.values[*self.order.last().unwrap()];
        (lo, hi)
    }
}

/// Classifies every vertex from the number of connected components of its lower link.
pub fn classify_vertices<T: Real>(surface: &TriangulatedSurface<T>, values: Vec<T>) -> MorseField<T> {
    assert_eq!(values.len(), surface.num_vertices(), "one value per vertex");
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&u, &v| vertex_order(&values, u, v));
    let mut rank = vec![0; n];
    for (r, &v) in order.iter().enumerate() {
        rank[v] = r;
    }
    let classes = (0..n)
        .map(|v| {
            let link = surface.link(v);
            let lower: Vec<bool> = link.iter().map(|&u| rank[u] < rank[v]).collect();
            let nl = lower.iter().filter(|&&b| b).count();
            if nl == 0 {
                VertexClass::Min
            } else if nl == link.len() {
                VertexClass::Max
            } else {
                // runs of lower neighbours around the cyclic link
                let runs = (0..lower.len()).filter(|&i| lower[i] && !lower[(i + 1) % lower.len()]).count();
                if runs == 1 {
                    VertexClass::Regular
                } else {
                    VertexClass::Saddle(runs as u32 - 1)
                }
            }
        })
        .collect();
    MorseField { values, classes, order, rank }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Violation {
    DegenerateSaddle { vertex: usize, multiplicity: u32 },
    SharedCriticalValue { a: usize, b: usize, value: f64 },
    NonDistinctValues { a: usize, b: usize, value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationReport {
    pub violations: Vec<Violation>,
}

impl fmt::Display for ViolationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.violations.iter().map(|v| format!("{v:?}")).collect();
        write!(f, "{}", parts.join("; "))
    }
}

/// Proof that a field is simple Morse: critical vertices sorted by value.
#[derive(Debug, Clone, PartialEq)]
pub struct SimpleMorseCertificate {
    pub critical: Vec<usize>,
}

/// Checks that saddles are nondegenerate and that critical values are pairwise distinct.
pub fn certify_simple<T: Real>(
    field: &MorseField<T>,
    surface: &TriangulatedSurface<T>,
) -> std::result::Result<SimpleMorseCertificate, ViolationReport> {
    let mut violations = Vec::new();
    let critical = field.critical_vertices();
    for &v in &critical {
        if let VertexClass::Saddle(m) = field.class(v) {
            if m > 1 {
                violations.push(Violation::DegenerateSaddle { vertex: v, multiplicity: m });
            }
        }
    }
    let values = field.values();
    let mut i = 0;
    while i < critical.len() {
        let mut j = i + 1;
        while j < critical.len() && values[critical[j]] == values[critical[i]] {
            j += 1;
        }
        if j - i > 1 {
            let group = &critical[i..j];
            let comp = level_components(surface, values, values[group[0]], group);
            for a in 0..group.len() {
                for b in a + 1..group.len() {
                    let value = values[group[a]].as_f64();
                    let (va, vb) = (group[a], group[b]);
                    if comp[a] == comp[b] {
                        violations.push(Violation::SharedCriticalValue { a: va, b: vb, value });
                    } else {
                        violations.push(Violation::NonDistinctValues { a: va, b: vb, value });
                    }
                }
            }
        }
        i = j;
    }
    if violations.is_empty() {
        Ok(SimpleMorseCertificate { critical })
    } else {
        Err(ViolationReport { violations })
    }
}

/// Labels the connected component of `{F = level}` containing each of `verts`.
fn level_components<T: Real>(
    surface: &TriangulatedSurface<T>,
    values: &[T],
    level: T,
    verts: &[usize],
) -> Vec<usize> {
    // Level points: vertices at the level (ids 0..n) and edges crossing it (n + edge id).
    let nv = surface.num_vertices();
    let mut uf = crate::unionfind::UnionFind::new(nv + surface.num_edges());
    for (ti, t) in surface.triangles().iter().enumerate() {
        let mut pts = Vec::with_capacity(3);
        for &v in t {
            if values[v] == level {
                pts.push(v);
            }
        }
        for &e in &surface.triangle_edges(ti) {
            let ed = surface.edges()[e];
            let (x, y) = (values[ed.a], values[ed.b]);
            if (x < level && y > level) || (x > level && y < level) {
                pts.push(nv + e);
            }
        }
        for w in pts.windows(2) {
            uf.union(w[0], w[1]);
        }
    }
    verts.iter().map(|&v| uf.find(v)).collect()
}

/// Default perturbation scale relative to the value range.
pub const PERTURB_RELATIVE: f64 = 1e-9;

/// Values closer than this many ulps of the value range count as tied.
pub const TIE_ULPS: f64 = 64.0;

/// Makes all vertex values distinct, breaking ties by vertex index.
///
/// Runs of values that agree up to [`TIE_ULPS`] are spread over at most `eps`
/// (and never past half the gap to the next distinct value), in index order.
/// Near ties are treated like exact ones so that rounding noise in the input
/// does not change the result.
pub fn perturb_to_simple<T: Real>(field: &MorseField<T>, surface: &TriangulatedSurface<T>) -> Result<MorseField<T>> {
    perturb_to_simple_with(field, surface, PERTURB_RELATIVE)
}

/// [`perturb_to_simple`] with the spread `eps_rel * range` chosen by the caller.
pub fn perturb_to_simple_with<T: Real>(
    field: &MorseField<T>,
    surface: &TriangulatedSurface<T>,
    eps_rel: f64,
) -> Result<MorseField<T>> {
    for (v, c) in field.classes().iter().enumerate() {
        if let VertexClass::Saddle(m) = c {
            if *m > 1 {
                return Err(Error::PerturbFailure { vertex: v, multiplicity: *m });
            }
        }
    }
    let values = field.values();
    let order = field.order();
    let (lo, hi) = field.value_range();
    let range = hi - lo;
    let scale = if range > T::zero() { range } else { T::one() };
    let tie = T::lit(TIE_ULPS) * T::epsilon() * scale.max(lo.abs()).max(hi.abs());
    let has_ties = order.windows(2).any(|w| values[w[1]] - values[w[0]] <= tie);
    if !has_ties {
        return Ok(field.clone());
    }
    let eps = T::lit(eps_rel) * scale;
    let mut out = values.to_vec();
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] - values[order[j - 1]] <= tie {
            j += 1;
        }
        if j - i > 1 {
            let base = values[order[i]];
            let mut width = eps;
            if j < order.len() {
                let gap = values[order[j]] - base;
                width = width.min(gap * T::lit(0.5));
            }
            let step = width / T::from_usize_lossy(j - i);
            let mut group = order[i..j].to_vec();
            group.sort_unstable();
            for (k, &v) in group.iter().enumerate() {
                out[v] = base + step * T::from_usize_lossy(k);
            }
        }
        i = j;
    }
    Ok(classify_vertices(surface, out))
}
