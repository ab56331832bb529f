//! Discrete 1-forms, graph densities, antiderivatives on graphs and circulation graphs.
//!
//! An antiderivative is stored as one offset per arc (its limit at the arc's
//! tail) together with the arc's density profile, so the Newton-Leibniz rule
//! holds by construction and only the Kirchhoff rule has to be solved for.

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::geometry::{classify_vertices, perturb_to_simple_with, MorseField, TriangulatedSurface};
use crate::linalg::{least_squares, solve_affine};
use crate::measure::{pushforward_measure, ArcIntegrator, MeasuredReebGraph};
use crate::reeb::{build_reeb_checked, NodeKind, QuotientMap, ReebGraph};
use crate::scalar::Real;
use crate::unionfind::UnionFind;

/// One value per mesh edge, read along the edge's stored direction `a -> b`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteOneForm<T> {
    values: Vec<T>,
}

impl<T: Real> DiscreteOneForm<T> {
    pub fn new(surface: &TriangulatedSurface<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != surface.num_edges() {
            return Err(Error::CountMismatch { what: "edge values", expected: surface.num_edges(), found: values.len() });
        }
        Ok(Self { values })
    }

    pub fn zero(surface: &TriangulatedSurface<T>) -> Self {
        Self { values: vec![T::zero(); surface.num_edges()] }
    }

    /// Builds a form from `(u, v, value)` triples meaning `alpha(u -> v)`; every edge must be present.
    pub fn from_triples(surface: &TriangulatedSurface<T>, triples: &[(usize, usize, T)]) -> Result<Self> {
        let mut values = vec![None; surface.num_edges()];
        for &(u, v, x) in triples {
            let (e, s) = surface
                .edge_id(u, v)
                .ok_or_else(|| Error::InvalidInput(format!("({u}, {v}) is not a mesh edge")))?;
            values[e] = Some(if s > 0 { x } else { -x });
        }
        let values = values
            .into_iter()
            .enumerate()
            .map(|(e, x)| {
                x.ok_or_else(|| {
                    let ed = &surface.edges()[e];
                    Error::InvalidInput(format!("edge ({}, {}) has no value", ed.a, ed.b))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { values })
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// `alpha(u -> v)`, or `None` if `uv` is not an edge.
    pub fn get(&self, surface: &TriangulatedSurface<T>, u: usize, v: usize) -> Option<T> {
        surface.edge_id(u, v).map(|(e, s)| if s > 0 { self.values[e] } else { -self.values[e] })
    }

    pub fn add(&self, other: &Self) -> Self {
        Self { values: self.values.iter().zip(&other.values).map(|(a, b)| *a + *b).collect() }
    }

    pub fn scale(&self, c: T) -> Self {
        Self { values: self.values.iter().map(|a| *a * c).collect() }
    }

    /// `d alpha` on every triangle (sum over its counter-clockwise boundary).
    pub fn differential(&self, surface: &TriangulatedSurface<T>) -> Vec<T> {
        (0..surface.num_triangles()).map(|t| self.oriented_edges(surface, t).iter().copied().sum()).collect()
    }

    /// Values on the edges `v0 v1`, `v1 v2`, `v2 v0` of triangle `t`.
    fn oriented_edges(&self, surface: &TriangulatedSurface<T>, t: usize) -> [T; 3] {
        let tri = surface.triangles()[t];
        let ids = surface.triangle_edges(t);
        [0, 1, 2].map(|k| {
            let x = self.values[ids[k]];
            if surface.edges()[ids[k]].a == tri[k] {
                x
            } else {
                -x
            }
        })
    }

    /// Integral of the Whitney interpolant along the segment `p -> q` in triangle `t`
    /// (barycentric coordinates with respect to the triangle's vertex order).
    pub fn segment_integral(&self, surface: &TriangulatedSurface<T>, t: usize, p: [T; 3], q: [T; 3]) -> T {
        let w = self.oriented_edges(surface, t);
        let mut acc = T::zero();
        for k in 0..3 {
            let (i, j) = (k, (k + 1) % 3);
            acc = acc + w[k] * (p[i] * q[j] - p[j] * q[i]);
        }
        acc
    }
}

/// Vorticity `d alpha / omega`: per-triangle ratios averaged to vertices with area weights.
pub fn curl<T: Real>(surface: &TriangulatedSurface<T>, form: &DiscreteOneForm<T>) -> Vec<T> {
    let d = form.differential(surface);
    let areas = surface.areas();
    (0..surface.num_vertices())
        .map(|v| {
            let tris = surface.vertex_triangles(v);
            let num: T = tris.iter().map(|&t| d[t]).sum();
            let den: T = tris.iter().map(|&t| areas[t]).sum();
            num / den
        })
        .collect()
}

/// Mean of a vertex function under the PL area form.
pub fn pl_mean<T: Real>(surface: &TriangulatedSurface<T>, values: &[T]) -> T {
    let third = T::lit(1.0 / 3.0);
    let total: T = surface
        .triangles()
        .iter()
        .zip(surface.areas())
        .map(|(t, a)| *a * (values[t[0]] + values[t[1]] + values[t[2]]) * third)
        .sum();
    total / surface.total_area()
}

/// Per-triangle integrals `int_t F omega` of a PL vertex function, shifted to total zero.
pub fn vorticity_two_form<T: Real>(surface: &TriangulatedSurface<T>, values: &[T]) -> Vec<T> {
    let third = T::lit(1.0 / 3.0);
    let areas = surface.areas();
    let raw: Vec<T> = surface
        .triangles()
        .iter()
        .zip(areas)
        .map(|(t, a)| *a * (values[t[0]] + values[t[1]] + values[t[2]]) * third)
        .collect();
    let mean = raw.iter().copied().sum::<T>() / surface.total_area();
    raw.iter().zip(areas).map(|(b, a)| *b - mean * *a).collect()
}

/// Minimum-norm 1-form with `d alpha = b` on every triangle; `b` must sum to zero.
///
/// Solves `B B^T y = b` by conjugate gradients on the dual graph and returns `B^T y`.
pub fn oneform_from_vorticity<T: Real>(surface: &TriangulatedSurface<T>, b: &[T]) -> Result<DiscreteOneForm<T>> {
    let nt = surface.num_triangles();
    if b.len() != nt {
        return Err(Error::CountMismatch { what: "triangle values", expected: nt, found: b.len() });
    }
    let scale = b.iter().fold(T::zero(), |m, x| m.max(x.abs()));
    let total: T = b.iter().copied().sum();
    if total.abs() > T::lit(1e-8) * scale * T::from_usize_lossy(nt) {
        return Err(Error::NonZeroMean(total.as_f64()));
    }
    // signed triangle-edge incidence
    let inc: Vec<[(usize, T); 3]> = (0..nt)
        .map(|t| {
            let tri = surface.triangles()[t];
            let ids = surface.triangle_edges(t);
            [0, 1, 2].map(|k| (ids[k], if surface.edges()[ids[k]].a == tri[k] { T::one() } else { -T::one() }))
        })
        .collect();
    let bt = |y: &[T]| {
        let mut w = vec![T::zero(); surface.num_edges()];
        for (t, row) in inc.iter().enumerate() {
            for &(e, s) in row {
                w[e] = w[e] + s * y[t];
            }
        }
        w
    };
    let bmul = |w: &[T]| -> Vec<T> { inc.iter().map(|row| row.iter().map(|&(e, s)| s * w[e]).sum()).collect() };
    let apply = |y: &[T]| bmul(&bt(y));
    let dot = |x: &[T], y: &[T]| -> T { x.iter().zip(y).map(|(a, b)| *a * *b).sum() };
    let rhs: Vec<T> = b.iter().map(|x| *x - total / T::from_usize_lossy(nt)).collect();
    let mut y = vec![T::zero(); nt];
    let mut r = rhs.clone();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let stop = rr * T::epsilon() * T::epsilon() * T::lit(1e2);
    for _ in 0..(4 * nt + 100) {
        if rr <= stop || rr == T::zero() {
            break;
        }
        let ap = apply(&p);
        let alpha = rr / dot(&p, &ap);
        for i in 0..nt {
            y[i] = y[i] + alpha * p[i];
            r[i] = r[i] - alpha * ap[i];
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..nt {
            p[i] = r[i] + beta * p[i];
        }
    }
    DiscreteOneForm::new(surface, bt(&y))
}

/// Signed measure on the arcs of a graph, with cumulative profiles.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphDensity<T> {
    /// `rho(arc)`.
    pub totals: Vec<T>,
    /// `rho([f_lo, t])` at equally spaced levels; an empty profile means linear in `t`.
    pub profiles: Vec<Vec<T>>,
    pub ranges: Vec<(T, T)>,
    /// Total variation of the sampled profiles (or `sum |rho(arc)|`), used to scale tolerances.
    pub scale: T,
}

impl<T: Real> GraphDensity<T> {
    /// Abstract density with arc totals only (profile linear in `t`).
    pub fn from_totals(graph: &ReebGraph<T>, totals: Vec<T>) -> Result<Self> {
        if totals.len() != graph.num_arcs() {
            return Err(Error::CountMismatch { what: "arc densities", expected: graph.num_arcs(), found: totals.len() });
        }
        let ranges = (0..graph.num_arcs()).map(|a| graph.arc_range(a)).collect();
        let scale = totals.iter().fold(T::zero(), |m, x| m + x.abs());
        Ok(Self { profiles: vec![Vec::new(); totals.len()], totals, ranges, scale })
    }

    pub fn total(&self) -> T {
        self.totals.iter().copied().sum()
    }

    /// `rho([f_lo, t])` on `arc`, interpolating the sampled profile.
    pub fn cumulative(&self, arc: usize, t: T) -> T {
        let (lo, hi) = self.ranges[arc];
        let s = ((t - lo) / (hi - lo)).max(T::zero()).min(T::one());
        let prof = &self.profiles[arc];
        if prof.len() < 2 {
            return self.totals[arc] * s;
        }
        let k = prof.len() - 1;
        let x = s * T::from_usize_lossy(k);
        let i = x.floor().to_usize().unwrap_or(0).min(k - 1);
        let frac = x - T::from_usize_lossy(i);
        prof[i] + (prof[i + 1] - prof[i]) * frac
    }

    fn sampled(ranges: Vec<(T, T)>, k: usize, f: impl Fn(usize, T) -> T) -> Self {
        let mut profiles = Vec::new();
        let mut totals = Vec::new();
        let mut scale = T::zero();
        for (a, &(lo, hi)) in ranges.iter().enumerate() {
            let mut p: Vec<T> = (0..=k)
                .map(|i| f(a, lo + (hi - lo) * T::from_usize_lossy(i) / T::from_usize_lossy(k)))
                .collect();
            p[0] = T::zero();
            scale = scale + p.windows(2).fold(T::zero(), |m, w| m + (w[1] - w[0]).abs());
            totals.push(p[k]);
            profiles.push(p);
        }
        Self { totals, profiles, ranges, scale }
    }
}

/// `rho(I) = int_I f dmu` computed by exact PL integration of `F omega`.
pub fn graph_density<T: Real>(
    surface: &TriangulatedSurface<T>,
    graph: &ReebGraph<T>,
    qmap: &QuotientMap<T>,
    k: usize,
) -> GraphDensity<T> {
    let rule = crate::measure::moment_rule::<T>(2);
    let integ: Vec<_> = (0..graph.num_arcs()).map(|a| ArcIntegrator::new(surface, qmap, a)).collect();
    let ranges = (0..graph.num_arcs()).map(|a| graph.arc_range(a)).collect();
    GraphDensity::sampled(ranges, k, |a, t| integ[a].cumulative_first_moment(t, &rule))
}

/// Pushforward of the 2-form `d alpha`, with `d alpha / omega` constant on each triangle.
pub fn vorticity_density<T: Real>(
    surface: &TriangulatedSurface<T>,
    graph: &ReebGraph<T>,
    qmap: &QuotientMap<T>,
    form: &DiscreteOneForm<T>,
    k: usize,
) -> GraphDensity<T> {
    let density: Vec<T> = form.differential(surface).iter().zip(surface.areas()).map(|(d, a)| *d / *a).collect();
    let integ: Vec<_> = (0..graph.num_arcs()).map(|a| ArcIntegrator::new(surface, qmap, a)).collect();
    let ranges = (0..graph.num_arcs()).map(|a| graph.arc_range(a)).collect();
    GraphDensity::sampled(ranges, k, |a, t| integ[a].weighted_cumulative(t, &density))
}

/// Antiderivative of a graph density: `lambda(t) = offsets[arc] + rho([f_lo, t])` on each arc.
#[derive(Debug, Clone, PartialEq)]
pub struct Antiderivative<T> {
    pub offsets: Vec<T>,
    pub totals: Vec<T>,
}

impl<T: Real> Antiderivative<T> {
    pub fn lower_limit(&self, arc: usize) -> T {
        self.offsets[arc]
    }

    pub fn upper_limit(&self, arc: usize) -> T {
        self.offsets[arc] + self.totals[arc]
    }

    pub fn limits(&self) -> Vec<(T, T)> {
        (0..self.offsets.len()).map(|a| (self.lower_limit(a), self.upper_limit(a))).collect()
    }

    pub fn value(&self, density: &GraphDensity<T>, arc: usize, t: T) -> T {
        self.offsets[arc] + density.cumulative(arc, t)
    }

    /// `sum of incoming limits - sum of outgoing limits` at every node.
    pub fn kirchhoff_residuals(&self, graph: &ReebGraph<T>) -> Vec<T> {
        let mut r = vec![T::zero(); graph.num_nodes()];
        for (a, arc) in graph.arcs().iter().enumerate() {
            r[arc.head] = r[arc.head] + self.upper_limit(a);
            r[arc.tail] = r[arc.tail] - self.lower_limit(a);
        }
        r
    }

    pub fn max_kirchhoff_residual(&self, graph: &ReebGraph<T>) -> T {
        self.kirchhoff_residuals(graph).iter().fold(T::zero(), |m, x| m.max(x.abs()))
    }
}

/// Affine space of antiderivatives: `particular + span(basis)`.
#[derive(Debug, Clone)]
pub struct AntiderivativeSpace<T> {
    pub particular: Antiderivative<T>,
    /// Homogeneous solutions (antiderivatives of the zero density).
    pub basis: Vec<Antiderivative<T>>,
}

impl<T: Real> AntiderivativeSpace<T> {
    pub fn dimension(&self) -> usize {
        self.basis.len()
    }

    pub fn combine(&self, coeffs: &[T]) -> Antiderivative<T> {
        let mut out = self.particular.clone();
        for (b, c) in self.basis.iter().zip(coeffs) {
            for (o, x) in out.offsets.iter_mut().zip(&b.offsets) {
                *o = *o + *c * *x;
            }
        }
        out
    }
}

/// Default relative tolerance on `rho(Gamma) = 0`.
pub const TOL_TOTAL: f64 = 1e-9;

fn density_scale<T: Real>(density: &GraphDensity<T>) -> T {
    density.totals.iter().fold(T::zero(), |m, x| m + x.abs()).max(density.scale).max(T::min_positive_value())
}

struct OffsetSolution<T> {
    offsets: Vec<T>,
    basis: Vec<Vec<T>>,
    residual: T,
}

/// Solves Kirchhoff for the arcs without a prescribed offset.
fn solve_offsets<T: Real>(graph: &ReebGraph<T>, totals: &[T], fixed: &[Option<T>]) -> OffsetSolution<T> {
    let free: Vec<usize> = (0..graph.num_arcs()).filter(|&a| fixed[a].is_none()).collect();
    let mut col = vec![usize::MAX; graph.num_arcs()];
    for (c, &a) in free.iter().enumerate() {
        col[a] = c;
    }
    let mut rows = vec![vec![T::zero(); free.len()]; graph.num_nodes()];
    let mut rhs = vec![T::zero(); graph.num_nodes()];
    for (a, arc) in graph.arcs().iter().enumerate() {
        // head: + (x_a + R_a); tail: - x_a
        rhs[arc.head] = rhs[arc.head] - totals[a];
        match fixed[a] {
            Some(x) => {
                rhs[arc.head] = rhs[arc.head] - x;
                rhs[arc.tail] = rhs[arc.tail] + x;
            }
            None => {
                rows[arc.head][col[a]] = rows[arc.head][col[a]] + T::one();
                rows[arc.tail][col[a]] = rows[arc.tail][col[a]] - T::one();
            }
        }
    }
    let sol = solve_affine(rows, rhs, free.len(), T::lit(1e-12));
    let expand = |v: &[T], fill: &dyn Fn(usize) -> T| -> Vec<T> {
        (0..graph.num_arcs()).map(|a| if col[a] == usize::MAX { fill(a) } else { v[col[a]] }).collect()
    };
    let offsets = expand(&sol.particular, &|a| fixed[a].unwrap());
    let basis = sol.null_basis.iter().map(|b| expand(b, &|_| T::zero())).collect();
    OffsetSolution { offsets, basis, residual: sol.residual }
}

/// Offsets forced by 1-valent nodes: `0` after a minimum, `-rho(arc)` before a maximum.
fn leaf_offsets<T: Real>(graph: &ReebGraph<T>, totals: &[T], fixed: &mut [Option<T>]) {
    for (a, arc) in graph.arcs().iter().enumerate() {
        if fixed[a].is_some() {
            continue;
        }
        if graph.nodes()[arc.tail].kind == NodeKind::Min {
            fixed[a] = Some(T::zero());
        } else if graph.nodes()[arc.head].kind == NodeKind::Max {
            fixed[a] = Some(-totals[a]);
        }
    }
}

/// All antiderivatives of `density` on `graph`.
pub fn antiderivative_space<T: Real>(graph: &ReebGraph<T>, density: &GraphDensity<T>) -> Result<AntiderivativeSpace<T>> {
    let totals = &density.totals;
    let scale = density_scale(density);
    let total = density.total();
    if total.abs() > T::lit(TOL_TOTAL) * scale {
        return Err(Error::NoSolution { residual: total.as_f64() });
    }
    let mut fixed = vec![None; graph.num_arcs()];
    leaf_offsets(graph, totals, &mut fixed);
    let sol = solve_offsets(graph, totals, &fixed);
    if sol.residual > T::lit(TOL_TOTAL) * scale {
        return Err(Error::NoSolution { residual: sol.residual.as_f64() });
    }
    let zeros = vec![T::zero(); totals.len()];
    Ok(AntiderivativeSpace {
        particular: Antiderivative { offsets: sol.offsets, totals: totals.clone() },
        basis: sol.basis.into_iter().map(|b| Antiderivative { offsets: b, totals: zeros.clone() }).collect(),
    })
}

/// Prescribed value of the antiderivative at level `t` of `arc` (endpoints allowed).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pin<T> {
    pub arc: usize,
    pub t: T,
    pub value: T,
}

/// The unique antiderivative taking the pinned values.
pub fn pin_circulations<T: Real>(
    graph: &ReebGraph<T>,
    density: &GraphDensity<T>,
    pins: &[Pin<T>],
) -> Result<Antiderivative<T>> {
    let betti = graph.betti1();
    if pins.len() != betti {
        return Err(Error::BadPinPlacement(format!("{} pins for {} independent cycles", pins.len(), betti)));
    }
    let mut fixed = vec![None; graph.num_arcs()];
    for p in pins {
        if p.arc >= graph.num_arcs() {
            return Err(Error::BadPinPlacement(format!("arc {} does not exist", p.arc)));
        }
        let (lo, hi) = graph.arc_range(p.arc);
        if p.t < lo || p.t > hi {
            return Err(Error::BadPinPlacement(format!("level {} is not on arc {}", p.t, p.arc)));
        }
        if fixed[p.arc].is_some() {
            return Err(Error::BadPinPlacement(format!("arc {} pinned twice", p.arc)));
        }
        fixed[p.arc] = Some(p.value - density.cumulative(p.arc, p.t));
    }
    // the arcs left after cutting at the pins must form a spanning tree
    let mut uf = UnionFind::new(graph.num_nodes());
    for (a, arc) in graph.arcs().iter().enumerate() {
        if fixed[a].is_none() && !uf.union(arc.tail, arc.head) {
            return Err(Error::BadPinPlacement(format!("cycle through arc {a} is not cut")));
        }
    }
    let totals = &density.totals;
    leaf_offsets(graph, totals, &mut fixed);
    let sol = solve_offsets(graph, totals, &fixed);
    let ad = Antiderivative { offsets: sol.offsets, totals: totals.clone() };
    let residual = ad.max_kirchhoff_residual(graph);
    let limit_scale = ad.limits().iter().fold(T::zero(), |m, (a, b)| m.max(a.abs()).max(b.abs()));
    if residual > T::lit(TOL_TOTAL) * (density_scale(density) + limit_scale) {
        return Err(Error::Infeasible { residual: residual.as_f64() });
    }
    Ok(ad)
}

/// `int alpha` over the level cycle at `t` on `arc`, oriented as the boundary of `{F < t}`.
pub fn circulation_from_oneform<T: Real>(
    surface: &TriangulatedSurface<T>,
    qmap: &QuotientMap<T>,
    form: &DiscreteOneForm<T>,
    arc: usize,
    t: T,
) -> Result<T> {
    let cycle = qmap.level_cycle(surface, arc, t)?;
    let n = cycle.len();
    let bary = |tri: [usize; 3], c: &crate::reeb::Crossing<T>| {
        [0, 1, 2].map(|k| {
            if tri[k] == c.below {
                T::one() - c.frac
            } else if tri[k] == c.above {
                c.frac
            } else {
                T::zero()
            }
        })
    };
    let mut acc = T::zero();
    for k in 0..n {
        let t = cycle.triangles[k];
        let tri = surface.triangles()[t];
        let p = bary(tri, &cycle.crossings[k]);
        let q = bary(tri, &cycle.crossings[(k + 1) % n]);
        acc = acc + form.segment_integral(surface, t, p, q);
    }
    Ok(acc)
}

/// Options for [`build_circulation_graph`].
#[derive(Debug, Clone, Copy)]
pub struct CirculationOptions {
    pub samples: usize,
    pub moments: usize,
    /// Kirchhoff and Newton-Leibniz tolerance relative to `max |c|`.
    pub tol_kirch: f64,
    /// Tie-spreading scale passed to the perturbation step.
    pub perturb_eps: f64,
    /// Leaf arcs with persistence below this fraction of the field range are cancelled
    /// (see [`crate::reeb::simplify`]); 0 keeps the graph as built.
    pub persistence: f64,
}

impl Default for CirculationOptions {
    fn default() -> Self {
        Self { samples: crate::measure::DEFAULT_SAMPLES, moments: crate::measure::DEFAULT_MOMENTS, tol_kirch: 1e-6, perturb_eps: crate::geometry::PERTURB_RELATIVE, persistence: 0.0 }
    }
}

/// Measured circulations of one arc at the levels `f_lo + s (f_hi - f_lo)`, `s = 1/4, 1/2, 3/4`.
#[derive(Debug, Clone, PartialEq)]
pub struct ArcCirculation<T> {
    pub levels: [T; 3],
    pub values: [T; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    pub kirchhoff: f64,
    pub newton_leibniz: f64,
    pub leaf: f64,
    pub scale: f64,
    pub tolerance: f64,
}

/// Measured Reeb graph with its circulation function.
#[derive(Debug, Clone)]
pub struct CirculationGraph<T> {
    pub measured: MeasuredReebGraph<T>,
    pub density: GraphDensity<T>,
    pub circulation: Antiderivative<T>,
    pub samples: Vec<ArcCirculation<T>>,
    pub pins: Vec<Pin<T>>,
    pub residuals: ResidualReport,
}

impl<T: Real> CirculationGraph<T> {
    pub fn graph(&self) -> &ReebGraph<T> {
        &self.measured.graph
    }

    /// Circulation at the middle level of `arc`.
    pub fn c_mid(&self, arc: usize) -> T {
        let (lo, hi) = self.graph().arc_range(arc);
        self.circulation.value(&self.density, arc, (lo + hi) * T::lit(0.5))
    }

    pub fn to_json(&self, with_profiles: bool) -> Value {
        let mut doc = self.measured.to_json(with_profiles);
        let arcs = doc["arcs"].as_array_mut().expect("arcs");
        for (a, arc) in arcs.iter_mut().enumerate() {
            arc["rho"] = json!(self.density.totals[a].as_f64());
            arc["c_mid"] = json!(self.c_mid(a).as_f64());
            arc["c_lo_limit"] = json!(self.circulation.lower_limit(a).as_f64());
            arc["c_hi_limit"] = json!(self.circulation.upper_limit(a).as_f64());
        }
        doc["pins"] = json!(self
            .pins
            .iter()
            .map(|p| json!({"arc": p.arc, "t": p.t.as_f64(), "value": p.value.as_f64()}))
            .collect::<Vec<_>>());
        let r = &self.residuals;
        doc["residuals"] = json!({
            "kirchhoff": r.kirchhoff,
            "newton_leibniz": r.newton_leibniz,
            "leaf": r.leaf,
            "scale": r.scale,
            "tolerance": r.tolerance,
        });
        doc
    }
}

/// Runs the Reeb and measure stages on `field` and attaches the circulation of `form`.
pub fn build_circulation_graph<T: Real>(
    surface: &TriangulatedSurface<T>,
    field: &MorseField<T>,
    form: &DiscreteOneForm<T>,
    opts: CirculationOptions,
) -> Result<CirculationGraph<T>> {
    let (graph, qmap) = build_reeb_checked(surface, field)?;
    let (graph, qmap) = if opts.persistence > 0.0 {
        let (lo, hi) = field.value_range();
        let (g, q, _) = crate::reeb::simplify(&graph, &qmap, T::lit(opts.persistence) * (hi - lo));
        (g, q)
    } else {
        (graph, qmap)
    };
    let measured = pushforward_measure(surface, &graph, &qmap, opts.samples, opts.moments);
    circulation_on(surface, &qmap, measured, form, opts)
}

/// Attaches the circulation of `form` to an already measured graph.
pub fn circulation_on<T: Real>(
    surface: &TriangulatedSurface<T>,
    qmap: &QuotientMap<T>,
    measured: MeasuredReebGraph<T>,
    form: &DiscreteOneForm<T>,
    opts: CirculationOptions,
) -> Result<CirculationGraph<T>> {
    let graph = &measured.graph;
    let k = opts.samples.max(4) / 4 * 4;
    let density = vorticity_density(surface, graph, qmap, form, k);
    let mut samples = Vec::with_capacity(graph.num_arcs());
    let mut measured_offsets = Vec::new();
    let mut nl = T::zero();
    for a in 0..graph.num_arcs() {
        let (lo, hi) = graph.arc_range(a);
        let idx = [k / 4, k / 2, 3 * k / 4];
        let levels = idx.map(|i| lo + (hi - lo) * T::from_usize_lossy(i) / T::from_usize_lossy(k));
        let mut values = [T::zero(); 3];
        for j in 0..3 {
            values[j] = circulation_from_oneform(surface, qmap, form, a, levels[j])?;
        }
        let offs = [0, 1, 2].map(|j| values[j] - density.profiles[a][idx[j]]);
        nl = nl.max((offs[0] - offs[1]).abs()).max((offs[2] - offs[1]).abs());
        measured_offsets.push(offs[1]);
        samples.push(ArcCirculation { levels, values });
    }
    let raw = Antiderivative { offsets: measured_offsets.clone(), totals: density.totals.clone() };
    let sample_scale = samples.iter().flat_map(|s| s.values).fold(T::zero(), |m, x| m.max(x.abs()));
    let limit_scale = raw.limits().iter().fold(T::zero(), |m, (a, b)| m.max(a.abs()).max(b.abs()));
    let scale = sample_scale.max(limit_scale).max(density_scale(&density) * T::lit(1e-3));
    let tol = T::lit(opts.tol_kirch) * scale;
    let residuals = raw.kirchhoff_residuals(graph);
    let mut leaf = T::zero();
    for (v, node) in graph.nodes().iter().enumerate() {
        if node.kind != NodeKind::Saddle {
            leaf = leaf.max(residuals[v].abs());
        }
    }
    let (worst_node, kirch) =
        residuals.iter().enumerate().fold((0, T::zero()), |acc, (v, r)| if r.abs() > acc.1 { (v, r.abs()) } else { acc });
    if kirch > tol || nl > tol {
        return Err(Error::AntiderivativeViolation { node: worst_node, residual: kirch.max(nl).as_f64() });
    }
    // project the measured offsets onto the exact antiderivative space
    let space = antiderivative_space(graph, &density)?;
    let circulation = if space.basis.is_empty() {
        space.particular.clone()
    } else {
        let rows: Vec<Vec<T>> =
            (0..graph.num_arcs()).map(|a| space.basis.iter().map(|b| b.offsets[a]).collect()).collect();
        let rhs: Vec<T> = (0..graph.num_arcs()).map(|a| measured_offsets[a] - space.particular.offsets[a]).collect();
        let z = least_squares(&rows, &rhs, space.basis.len())
            .ok_or_else(|| Error::InvalidInput("degenerate cycle basis".into()))?;
        space.combine(&z)
    };
    let residuals = ResidualReport {
        kirchhoff: kirch.as_f64(),
        newton_leibniz: nl.as_f64(),
        leaf: leaf.as_f64(),
        scale: scale.as_f64(),
        tolerance: tol.as_f64(),
    };
    Ok(CirculationGraph { measured, density, circulation, samples, pins: Vec::new(), residuals })
}

/// Full pipeline from a coset representative: vorticity, perturbation to a simple field, graphs.
pub fn circulation_graph_of_form<T: Real>(
    surface: &TriangulatedSurface<T>,
    form: &DiscreteOneForm<T>,
    opts: CirculationOptions,
) -> Result<CirculationGraph<T>> {
    let field = perturb_to_simple_with(&classify_vertices(surface, curl(surface, form)), surface, opts.perturb_eps)?;
    build_circulation_graph(surface, &field, form, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::reeb::ReebArc;
    use crate::reeb::ReebNode;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn node(f: f64, kind: NodeKind) -> ReebNode<f64> {
        ReebNode { vertex: None, f, kind }
    }

    /// Min -> saddle splitting into two arcs that rejoin at a second saddle -> max.
    pub(crate) fn figure_two_graph() -> ReebGraph<f64> {
        ReebGraph::new(
            vec![node(0.0, NodeKind::Min), node(1.0, NodeKind::Saddle), node(2.0, NodeKind::Saddle), node(3.0, NodeKind::Max)],
            vec![
                ReebArc { tail: 0, head: 1 },
                ReebArc { tail: 1, head: 2 },
                ReebArc { tail: 1, head: 2 },
                ReebArc { tail: 2, head: 3 },
            ],
        )
    }

    #[test]
    fn whitney_integral_of_exact_form_telescopes() {
        let s = fixtures::octahedron::<f64>();
        let f = vec![0.3, -1.0, 2.0, 0.5, 1.5, -0.7];
        let w = fixtures::exact_form(&s, &f);
        let tri = s.triangles()[0];
        let p = [1.0, 0.0, 0.0];
        let q = [0.0, 0.25, 0.75];
        let expect = 0.25 * f[tri[1]] + 0.75 * f[tri[2]] - f[tri[0]];
        assert!((w.segment_integral(&s, 0, p, q) - expect).abs() < 1e-14);
        assert!(w.differential(&s).iter().all(|d| d.abs() < 1e-14));
        assert!(curl(&s, &w).iter().all(|d| d.abs() < 1e-14));
    }

    #[test]
    fn form_accessors_are_antisymmetric() {
        let s = fixtures::octahedron::<f64>();
        let vals: Vec<f64> = (0..s.num_edges()).map(|e| e as f64 + 1.0).collect();
        let w = DiscreteOneForm::new(&s, vals).unwrap();
        assert_eq!(w.get(&s, 0, 1).unwrap(), -w.get(&s, 1, 0).unwrap());
        assert!(w.get(&s, 4, 5).is_none());
        assert!(DiscreteOneForm::new(&s, vec![0.0; 3]).is_err());
        let triples: Vec<_> = s.edges().iter().map(|e| (e.b, e.a, 2.0)).collect();
        let u = DiscreteOneForm::from_triples(&s, &triples).unwrap();
        assert!(u.values().iter().all(|x| *x == -2.0));
        assert!(DiscreteOneForm::from_triples(&s, &triples[1..]).is_err());
    }

    #[test]
    fn curl_of_sine_form_is_cosine() {
        // alpha = -sin(y) dx has d alpha = cos(y) dx ^ dy
        let n = 64;
        let s = fixtures::flat_torus::<f64>(n);
        let pos = s.positions().unwrap();
        let h = 2.0 * PI / n as f64;
        let vals = s
            .edges()
            .iter()
            .map(|e| {
                let d = fixtures::torus_displacement(pos[e.a], pos[e.b], 2.0 * PI);
                let y0 = pos[e.a][1];
                // exact line integral of -sin(y) dx along the segment
                if d[1].abs() < 1e-12 {
                    -y0.sin() * d[0]
                } else {
                    let y1 = y0 + d[1];
                    d[0] / d[1] * (y1.cos() - y0.cos())
                }
            })
            .collect();
        let w = DiscreteOneForm::new(&s, vals).unwrap();
        let f = curl(&s, &w);
        let err = (0..s.num_vertices()).map(|v| (f[v] - pos[v][1].cos()).abs()).fold(0.0, f64::max);
        assert!(err < h * h, "{err}");
        assert!(pl_mean(&s, &f).abs() < 1e-12);
        assert!(curl(&s, &DiscreteOneForm::zero(&s)).iter().all(|x| *x == 0.0));
    }

    #[test]
    fn oneform_from_vorticity_hits_targets() {
        let s = fixtures::octa_sphere::<f64>(6);
        let z = fixtures::height(&s);
        let b = vorticity_two_form(&s, &z);
        let w = oneform_from_vorticity(&s, &b).unwrap();
        let d = w.differential(&s);
        let err = d.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(err < 1e-12, "{err}");
        assert!(oneform_from_vorticity(&s, &vec![1.0; s.num_triangles()]).is_err());
    }

    #[test]
    fn single_arc_has_unique_antiderivative() {
        let g = ReebGraph::new(vec![node(-1.0, NodeKind::Min), node(1.0, NodeKind::Max)], vec![ReebArc { tail: 0, head: 1 }]);
        let d = GraphDensity::from_totals(&g, vec![0.0]).unwrap();
        let sp = antiderivative_space(&g, &d).unwrap();
        assert_eq!(sp.dimension(), 0);
        assert_eq!(sp.particular.limits(), vec![(0.0, 0.0)]);
        let d1 = GraphDensity::from_totals(&g, vec![1.0]).unwrap();
        assert!(matches!(antiderivative_space(&g, &d1), Err(Error::NoSolution { .. })));
    }

    #[test]
    fn figure_two_labels() {
        let g = figure_two_graph();
        let a = [0.7, -0.2, 0.9, -1.4];
        let d = GraphDensity::from_totals(&g, a.to_vec()).unwrap();
        let sp = antiderivative_space(&g, &d).unwrap();
        assert_eq!(sp.dimension(), 1);
        for z in [0.0, 0.35, -2.0] {
            let pin = Pin { arc: 1, t: 1.0, value: z };
            let ad = pin_circulations(&g, &d, &[pin]).unwrap();
            let l = ad.limits();
            let want = [(0.0, a[0]), (z, a[1] + z), (a[0] - z, a[0] + a[2] - z), (-a[3], 0.0)];
            for (got, w) in l.iter().zip(want) {
                assert!((got.0 - w.0).abs() < 1e-12 && (got.1 - w.1).abs() < 1e-12, "{l:?}");
            }
        }
        assert!(matches!(
            pin_circulations(&g, &d, &[Pin { arc: 0, t: 0.5, value: 0.0 }]),
            Err(Error::BadPinPlacement(_))
        ));
        assert!(matches!(
            pin_circulations(&g, &d, &[Pin { arc: 1, t: 1.0, value: 0.0 }, Pin { arc: 2, t: 1.0, value: 0.0 }]),
            Err(Error::BadPinPlacement(_))
        ));
    }

    #[test]
    fn random_densities_on_figure_two() {
        let g = figure_two_graph();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let mut a: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let s: f64 = a.iter().sum();
            a[3] -= s;
            let d = GraphDensity::from_totals(&g, a).unwrap();
            let sp = antiderivative_space(&g, &d).unwrap();
            let ad = sp.combine(&[rng.gen_range(-3.0..3.0)]);
            assert!(ad.max_kirchhoff_residual(&g) < 1e-12);
            assert_eq!(ad.lower_limit(0), 0.0);
            assert_eq!(ad.upper_limit(3), 0.0);
        }
    }

    #[test]
    fn exact_form_circulates_to_zero() {
        let n = 32;
        let s = fixtures::flat_torus::<f64>(n);
        let field = classify_vertices(&s, fixtures::sample_torus(n, fixtures::saddle_torus));
        let (g, q) = build_reeb_checked(&s, &field).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let f: Vec<f64> = (0..s.num_vertices()).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let df = fixtures::exact_form(&s, &f);
        for a in 0..g.num_arcs() {
            let (lo, hi) = g.arc_range(a);
            let c = circulation_from_oneform(&s, &q, &df, a, 0.5 * (lo + hi)).unwrap();
            assert!(c.abs() < 1e-12, "{c}");
        }
    }

    #[test]
    fn constant_form_circulates_around_genus_cycle() {
        let n = 32;
        let s = fixtures::flat_torus::<f64>(n);
        let field = classify_vertices(&s, fixtures::sample_torus(n, fixtures::saddle_torus));
        let (g, q) = build_reeb_checked(&s, &field).unwrap();
        let dx = fixtures::constant_form(&s, 2.0 * PI, 1.0, 0.0);
        let mut seen = 0;
        for a in 0..g.num_arcs() {
            let arc = g.arcs()[a];
            if g.nodes()[arc.tail].kind == NodeKind::Saddle && g.nodes()[arc.head].kind == NodeKind::Saddle {
                let (lo, hi) = g.arc_range(a);
                let c = circulation_from_oneform(&s, &q, &dx, a, 0.5 * (lo + hi)).unwrap();
                assert!((c.abs() - 2.0 * PI).abs() < 1e-9, "{c}");
                seen += 1;
            }
        }
        assert_eq!(seen, 2);
    }

    #[test]
    fn circulation_graph_verifies_and_is_coset_invariant() {
        let n = 32;
        let s = fixtures::flat_torus::<f64>(n);
        let f = fixtures::sample_torus(n, fixtures::saddle_torus);
        let w = oneform_from_vorticity(&s, &vorticity_two_form(&s, &f)).unwrap();
        let cg = circulation_graph_of_form(&s, &w, CirculationOptions::default()).unwrap();
        assert!(cg.residuals.kirchhoff <= cg.residuals.tolerance);
        assert!(cg.circulation.max_kirchhoff_residual(cg.graph()) < 1e-10 * cg.residuals.scale);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g: Vec<f64> = (0..s.num_vertices()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let w2 = w.add(&fixtures::exact_form(&s, &g));
        let cg2 = circulation_graph_of_form(&s, &w2, CirculationOptions::default()).unwrap();
        for (x, y) in cg.circulation.limits().iter().zip(cg2.circulation.limits()) {
            assert!((x.0 - y.0).abs() < 1e-10 && (x.1 - y.1).abs() < 1e-10, "{x:?} {y:?}");
        }
    }

    #[test]
    fn sphere_circulation_is_the_particular_solution() {
        let s = fixtures::octa_sphere::<f64>(8);
        let z = fixtures::height(&s);
        let w = oneform_from_vorticity(&s, &vorticity_two_form(&s, &z)).unwrap();
        let cg = circulation_graph_of_form(&s, &w, CirculationOptions::default()).unwrap();
        assert_eq!(cg.graph().num_arcs(), 1);
        let sp = antiderivative_space(cg.graph(), &cg.density).unwrap();
        assert_eq!(sp.particular, cg.circulation);
        assert!(cg.residuals.leaf < 1e-10);
    }

    #[test]
    fn pl_density_agrees_with_vorticity_density_on_fine_mesh() {
        let n = 48;
        let s = fixtures::flat_torus::<f64>(n);
        let f = fixtures::sample_torus(n, fixtures::saddle_torus);
        let field = classify_vertices(&s, f.clone());
        let (g, q) = build_reeb_checked(&s, &field).unwrap();
        let w = oneform_from_vorticity(&s, &vorticity_two_form(&s, &f)).unwrap();
        let pl = graph_density(&s, &g, &q, 16);
        let vd = vorticity_density(&s, &g, &q, &w, 16);
        let scale: f64 = pl.totals.iter().map(|x| x.abs()).sum();
        for (a, b) in pl.totals.iter().zip(&vd.totals) {
            assert!((a - b).abs() < 0.02 * scale, "{a} {b}");
        }
        assert!(pl.total().abs() < 1e-10 * scale * 100.0);
    }
}
