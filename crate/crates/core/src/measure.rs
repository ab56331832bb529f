//! Pushforward of the area form onto the Reeb graph, and per-arc moments.
//!
//! For a linear function on a triangle with sorted vertex values `a <= b <= c`
//! the pushforward density is the tent `2A (t - a) / ((c - a)(b - a))` on
//! `[a, b]` and `2A (c - t) / ((c - a)(c - b))` on `[b, c]`. All arc integrals
//! below integrate polynomials against this tent with Gauss-Legendre rules of
//! sufficient order, so they are exact up to rounding.

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::geometry::TriangulatedSurface;
use crate::linalg::least_squares;
use crate::reeb::{NodeKind, QuotientMap, ReebGraph};
use crate::scalar::{gauss_legendre, Real};

pub const DEFAULT_MOMENTS: usize = 16;
pub const DEFAULT_SAMPLES: usize = 256;

/// Pushforward of one triangle's area under a linear function.
#[derive(Debug, Clone, Copy)]
pub struct TriangleProfile<T> {
    a: T,
    b: T,
    c: T,
    area: T,
}

impl<T: Real> TriangleProfile<T> {
    pub fn new(values: [T; 3], area: T) -> Self {
        let mut v = values;
        v.sort_by(|x, y| x.partial_cmp(y).unwrap());
        Self { a: v[0], b: v[1], c: v[2], area }
    }

    pub fn range(&self) -> (T, T) {
        (self.a, self.c)
    }

    /// Area of `{F <= t}` inside the triangle.
    pub fn cum_area(&self, t: T) -> T {
        let (a, b, c, area) = (self.a, self.b, self.c, self.area);
        if t < a {
            T::zero()
        } else if t >= c {
            area
        } else if t < b {
            area * (t - a) * (t - a) / ((c - a) * (b - a))
        } else {
            area - area * (c - t) * (c - t) / ((c - a) * (c - b))
        }
    }

    /// Calls `f(t, w)` for quadrature nodes `t` with weights `w` such that
    /// `sum w p(t) = int_lo^hi p dmu` for polynomials `p` of degree `< 2 n - 1`.
    pub fn quadrature(&self, lo: T, hi: T, rule: &(Vec<T>, Vec<T>), mut f: impl FnMut(T, T)) {
        let (a, b, c, area) = (self.a, self.b, self.c, self.area);
        if c == a {
            if lo <= a && a <= hi {
                f(a, area);
            }
            return;
        }
        let half = T::lit(0.5);
        let mut segment = |s0: T, s1: T, tent: &dyn Fn(T) -> T| {
            let (x0, x1) = (s0.max(lo), s1.min(hi));
            if x1 <= x0 {
                return;
            }
            let (mid, rad) = ((x0 + x1) * half, (x1 - x0) * half);
            for (x, w) in rule.0.iter().zip(&rule.1) {
                let t = mid + rad * *x;
                f(t, *w * rad * tent(t));
            }
        };
        if b > a {
            let k = T::lit(2.0) * area / ((c - a) * (b - a));
            segment(a, b, &|t| k * (t - a));
        }
        if c > b {
            let k = T::lit(2.0) * area / ((c - a) * (c - b));
            segment(b, c, &|t| k * (c - t));
        }
    }
}

/// Quadrature rule exact for `t^k` times a linear tent, `k < n_powers`.
pub fn moment_rule<T: Real>(n_powers: usize) -> (Vec<T>, Vec<T>) {
    gauss_legendre(n_powers / 2 + 2)
}

/// Exact integrals over the part of the surface projecting to one arc.
pub struct ArcIntegrator<'a, T> {
    pieces: Vec<(usize, TriangleProfile<T>, T, T)>,
    _surface: std::marker::PhantomData<&'a T>,
}

impl<'a, T: Real> ArcIntegrator<'a, T> {
    pub fn new(surface: &'a TriangulatedSurface<T>, qmap: &QuotientMap<T>, arc: usize) -> Self {
        let values = qmap.values();
        let pieces = qmap
            .pieces(arc)
            .iter()
            .map(|p| {
                let t = surface.triangles()[p.tri];
                let prof = TriangleProfile::new(t.map(|v| values[v]), surface.areas()[p.tri]);
                (p.tri, prof, p.lo, p.hi)
            })
            .collect();
        Self { pieces, _surface: std::marker::PhantomData }
    }

    /// `mu(arc ∩ {f <= t})`.
    pub fn cumulative_area(&self, t: T) -> T {
        self.pieces.iter().map(|(_, p, lo, hi)| p.cum_area(t.max(*lo).min(*hi)) - p.cum_area(*lo)).sum()
    }

    /// `sum_tri weight[tri] * area(tri ∩ arc ∩ {f <= t}) / area(tri)`.
    pub fn weighted_cumulative(&self, t: T, density: &[T]) -> T {
        self.pieces
            .iter()
            .map(|(tri, p, lo, hi)| density[*tri] * (p.cum_area(t.max(*lo).min(*hi)) - p.cum_area(*lo)))
            .sum()
    }

    /// `int_{arc ∩ {f <= t}} f dmu`.
    pub fn cumulative_first_moment(&self, t: T, rule: &(Vec<T>, Vec<T>)) -> T {
        let mut acc = T::zero();
        for (_, p, lo, hi) in &self.pieces {
            let top = t.min(*hi);
            if top > *lo {
                p.quadrature(*lo, top, rule, |s, w| acc = acc + w * s);
            }
        }
        acc
    }

    /// Raw moments `int f^i dmu` and moments of `(f - lo) / (hi - lo)`, `i < n`.
    pub fn moments(&self, n: usize, lo: T, hi: T) -> (Vec<T>, Vec<T>) {
        let rule = moment_rule::<T>(n);
        let mut raw = vec![T::zero(); n];
        let mut rescaled = vec![T::zero(); n];
        let width = hi - lo;
        for (_, p, plo, phi) in &self.pieces {
            p.quadrature(*plo, *phi, &rule, |t, w| {
                let s = (t - lo) / width;
                let (mut pt, mut ps) = (w, w);
                for i in 0..n {
                    raw[i] = raw[i] + pt;
                    rescaled[i] = rescaled[i] + ps;
                    pt = pt * t;
                    ps = ps * s;
                }
            });
        }
        (raw, rescaled)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeMeasure<T> {
    pub arc: usize,
    pub f_lo: T,
    pub f_hi: T,
    /// `A(t)` at `K + 1` equally spaced levels from `f_lo` to `f_hi`.
    pub cumulative_area: Vec<T>,
    pub moments: Vec<T>,
    /// Moments of the arc parameter mapped affinely to `[0, 1]`.
    pub rescaled: Vec<T>,
}

impl<T: Real> EdgeMeasure<T> {
    pub fn mass(&self) -> T {
        self.moments[0]
    }

    /// Sample levels matching [`Self::cumulative_area`].
    pub fn levels(&self) -> Vec<T> {
        let k = self.cumulative_area.len() - 1;
        (0..=k).map(|i| self.f_lo + (self.f_hi - self.f_lo) * T::from_usize_lossy(i) / T::from_usize_lossy(k)).collect()
    }
}

/// Reeb graph with its pushforward measure.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasuredReebGraph<T> {
    pub graph: ReebGraph<T>,
    pub edges: Vec<EdgeMeasure<T>>,
}

impl<T: Real> MeasuredReebGraph<T> {
    pub fn num_moments(&self) -> usize {
        self.edges.iter().map(|e| e.moments.len()).min().unwrap_or(0)
    }

    /// Total moments `sum_e m_{i,e}`.
    pub fn total_moments(&self) -> Vec<T> {
        let n = self.num_moments();
        (0..n).map(|i| self.edges.iter().map(|e| e.moments[i]).sum()).collect()
    }

    pub fn total_mass(&self) -> T {
        self.edges.iter().map(|e| e.moments[0]).sum()
    }

    pub fn to_json(&self, with_profiles: bool) -> Value {
        let mut doc = self.graph.to_json();
        let arcs = doc["arcs"].as_array_mut().expect("arcs");
        for (a, e) in self.edges.iter().enumerate() {
            let arc = &mut arcs[a];
            arc["f_lo"] = json!(e.f_lo.as_f64());
            arc["f_hi"] = json!(e.f_hi.as_f64());
            arc["m"] = json!(e.moments.iter().map(|x| x.as_f64()).collect::<Vec<_>>());
            arc["m_rescaled"] = json!(e.rescaled.iter().map(|x| x.as_f64()).collect::<Vec<_>>());
            if with_profiles {
                arc["A"] = json!(e.cumulative_area.iter().map(|x| x.as_f64()).collect::<Vec<_>>());
            }
        }
        doc
    }

    pub fn from_json(doc: &Value) -> Result<Self> {
        let graph = ReebGraph::from_json(doc)?;
        let reals = |v: &Value| -> Vec<T> {
            v.as_array().map(|a| a.iter().filter_map(|x| x.as_f64()).map(T::lit).collect()).unwrap_or_default()
        };
        let mut edges = Vec::new();
        for (a, arc) in doc["arcs"].as_array().into_iter().flatten().enumerate() {
            let (f_lo, f_hi) = graph.arc_range(a);
            let moments = reals(&arc["m"]);
            if moments.is_empty() {
                return Err(Error::InvalidInput(format!("arc {a} has no moments")));
            }
            edges.push(EdgeMeasure {
                arc: a,
                f_lo,
                f_hi,
                cumulative_area: reals(&arc["A"]),
                rescaled: reals(&arc["m_rescaled"]),
                moments,
            });
        }
        Ok(Self { graph, edges })
    }
}

/// Raw and rescaled moments `int_{M_e} F^i omega`, `i < n`, by exact PL integration.
pub fn edge_moments<T: Real>(
    surface: &TriangulatedSurface<T>,
    graph: &ReebGraph<T>,
    qmap: &QuotientMap<T>,
    arc: usize,
    n: usize,
) -> (Vec<T>, Vec<T>) {
    assert!(n >= 1);
    let (lo, hi) = graph.arc_range(arc);
    ArcIntegrator::new(surface, qmap, arc).moments(n, lo, hi)
}

/// Builds the measured Reeb graph with `k` profile samples and `n` moments per arc.
pub fn pushforward_measure<T: Real>(
    surface: &TriangulatedSurface<T>,
    graph: &ReebGraph<T>,
    qmap: &QuotientMap<T>,
    k: usize,
    n: usize,
) -> MeasuredReebGraph<T> {
    let edges = (0..graph.num_arcs())
        .map(|a| {
            let (lo, hi) = graph.arc_range(a);
            let integ = ArcIntegrator::new(surface, qmap, a);
            let mut cumulative_area: Vec<T> = (0..=k)
                .map(|i| integ.cumulative_area(lo + (hi - lo) * T::from_usize_lossy(i) / T::from_usize_lossy(k)))
                .collect();
            cumulative_area[0] = T::zero();
            let (moments, rescaled) = integ.moments(n, lo, hi);
            EdgeMeasure { arc: a, f_lo: lo, f_hi: hi, cumulative_area, moments, rescaled }
        })
        .collect();
    MeasuredReebGraph { graph: graph.clone(), edges }
}

/// Role of an arc at a 3-valent node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Trunk,
    Branch,
}

#[derive(Debug, Clone)]
pub struct ArcFit {
    pub arc: usize,
    pub role: Role,
    /// Coefficient of `f ln|f|` (with `f` measured from the node value).
    pub log_coefficient: f64,
    /// Linear coefficient of the smooth part.
    pub linear: f64,
    pub relative_residual: f64,
}

#[derive(Debug, Clone)]
pub struct LogFitReport {
    pub node: usize,
    pub fits: Vec<ArcFit>,
    /// Each branch coefficient divided by the trunk coefficient (ideal `-1/2`).
    pub branch_ratios: Vec<f64>,
    /// Estimate of `psi'(0)` from the trunk (`trunk coefficient / 2`).
    pub psi_slope: f64,
    pub max_residual: f64,
    /// Ratios within `tolerance` (relative) of `-1/2`.
    pub consistent: bool,
}

/// Options for [`log_singularity_diagnostic`].
#[derive(Debug, Clone, Copy)]
pub struct LogFitOptions {
    /// Fit window `[delta_min, delta_max]` in `|f - f(v)|`, as fractions of the shortest incident arc.
    pub window: (f64, f64),
    pub samples: usize,
    pub tolerance: f64,
}

impl Default for LogFitOptions {
    fn default() -> Self {
        Self { window: (0.01, 0.2), samples: 48, tolerance: 0.1 }
    }
}

/// Fits `mu([v, x]) ~ k f ln|f| + b f + c f^2` on each arc at a 3-valent node.
pub fn log_singularity_diagnostic<T: Real>(
    surface: &TriangulatedSurface<T>,
    graph: &ReebGraph<T>,
    qmap: &QuotientMap<T>,
    node: usize,
    opts: LogFitOptions,
) -> Result<LogFitReport> {
    let nd = &graph.nodes()[node];
    if nd.kind != NodeKind::Saddle {
        return Err(Error::InvalidInput(format!("node {node} is not 3-valent")));
    }
    let ins = graph.in_arcs(node);
    let outs = graph.out_arcs(node);
    let (trunk, branches) = if ins.len() == 1 { (ins[0], outs) } else { (outs[0], ins) };
    let incident: Vec<usize> = std::iter::once(trunk).chain(branches.iter().copied()).collect();
    let shortest = incident
        .iter()
        .map(|&a| {
            let (lo, hi) = graph.arc_range(a);
            (hi - lo).as_f64()
        })
        .fold(f64::INFINITY, f64::min);
    let (dmin, dmax) = (opts.window.0 * shortest, opts.window.1 * shortest);
    if opts.samples < 6 || !(dmax > dmin && dmin > 0.0) {
        return Err(Error::InsufficientSamples(format!("{} samples in window [{dmin}, {dmax}]", opts.samples)));
    }
    let mut fits = Vec::new();
    for &a in &incident {
        let integ = ArcIntegrator::new(surface, qmap, a);
        let (lo, hi) = graph.arc_range(a);
        let mass = integ.cumulative_area(hi);
        let upward = graph.arcs()[a].tail == node;
        let mut rows = Vec::new();
        let mut rhs = Vec::new();
        for i in 0..opts.samples {
            let d = dmin * (dmax / dmin).powf(i as f64 / (opts.samples - 1) as f64);
            let (f, mu) = if upward {
                (d, integ.cumulative_area(lo + T::lit(d)).as_f64())
            } else {
                (-d, (mass - integ.cumulative_area(hi - T::lit(d))).as_f64())
            };
            rows.push(vec![f * f.abs().ln(), f, f * f]);
            rhs.push(mu);
        }
        let x = least_squares(&rows, &rhs, 3)
            .ok_or_else(|| Error::InsufficientSamples("singular fit".into()))?;
        let resid = rows
            .iter()
            .zip(&rhs)
            .map(|(r, y)| (r[0] * x[0] + r[1] * x[1] + r[2] * x[2] - y).powi(2))
            .sum::<f64>()
            .sqrt();
        let norm = rhs.iter().map(|y| y * y).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
        fits.push(ArcFit {
            arc: a,
            role: if a == trunk { Role::Trunk } else { Role::Branch },
            log_coefficient: x[0],
            linear: x[1],
            relative_residual: resid / norm,
        });
    }
    let trunk_k = fits[0].log_coefficient;
    let branch_ratios: Vec<f64> = fits[1..].iter().map(|f| f.log_coefficient / trunk_k).collect();
    let consistent = branch_ratios.iter().all(|r| ((r + 0.5) / 0.5).abs() <= opts.tolerance);
    let max_residual = fits.iter().map(|f| f.relative_residual).fold(0.0, f64::max);
    Ok(LogFitReport { node, fits, branch_ratios, psi_slope: trunk_k / 2.0, max_residual, consistent })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::geometry::{classify_vertices, perturb_to_simple};
    use crate::reeb::build_reeb_checked;
    use std::f64::consts::PI;

    #[test]
    fn triangle_profile_matches_area_and_first_moment() {
        let p = TriangleProfile::<f64>::new([0.0, 1.0, 3.0], 2.0);
        assert_eq!(p.cum_area(-1.0), 0.0);
        assert!((p.cum_area(3.0) - 2.0).abs() < 1e-15);
        // continuity at the middle value
        assert!((p.cum_area(1.0 - 1e-12) - p.cum_area(1.0)).abs() < 1e-10);
        let rule = moment_rule::<f64>(4);
        let mut m = [0.0; 4];
        p.quadrature(-10.0, 10.0, &rule, |t, w| {
            for (i, mi) in m.iter_mut().enumerate() {
                *mi += w * t.powi(i as i32);
            }
        });
        assert!((m[0] - 2.0).abs() < 1e-14);
        // mean of a linear function over a triangle is the vertex average
        assert!((m[1] - 2.0 * 4.0 / 3.0).abs() < 1e-13);
    }

    #[test]
    fn constant_field_moments_are_powers() {
        let p = TriangleProfile::<f64>::new([0.7, 0.7, 0.7], 1.5);
        let rule = moment_rule::<f64>(5);
        let mut m = [0.0; 5];
        p.quadrature(0.0, 1.0, &rule, |t, w| {
            for (i, mi) in m.iter_mut().enumerate() {
                *mi += w * t.powi(i as i32);
            }
        });
        for (i, mi) in m.iter().enumerate() {
            assert!((mi - 0.7f64.powi(i as i32) * 1.5).abs() < 1e-15);
        }
    }

    fn sphere(n: usize) -> (TriangulatedSurface<f64>, MeasuredReebGraph<f64>) {
        let s = fixtures::octa_sphere::<f64>(n);
        let f = perturb_to_simple(&classify_vertices(&s, fixtures::height(&s)), &s).unwrap();
        let (g, q) = build_reeb_checked(&s, &f).unwrap();
        let mg = pushforward_measure(&s, &g, &q, 64, 4);
        (s, mg)
    }

    #[test]
    fn sphere_measure_partitions_area() {
        let (s, mg) = sphere(12);
        assert_eq!(mg.edges.len(), 1);
        let e = &mg.edges[0];
        assert!(((mg.total_mass() - s.total_area()) / s.total_area()).abs() < 1e-12);
        assert_eq!(e.cumulative_area[0], 0.0);
        assert!(e.cumulative_area.windows(2).all(|w| w[1] >= w[0]));
        assert!((e.cumulative_area.last().unwrap() - e.moments[0]).abs() < 1e-12);
    }

    #[test]
    fn sphere_moments_converge() {
        let (_, mg) = sphere(24);
        let m = &mg.edges[0].moments;
        assert!((m[0] - 4.0 * PI).abs() / (4.0 * PI) < 0.01);
        assert!(m[1].abs() < 1e-7, "{}", m[1]);
        assert!((m[2] - 4.0 * PI / 3.0).abs() / (4.0 * PI / 3.0) < 0.01);
    }

    #[test]
    fn rescaled_moments_match_binomial_expansion() {
        let (_, mg) = sphere(8);
        let e = &mg.edges[0];
        let (lo, w) = (e.f_lo, e.f_hi - e.f_lo);
        let m = &e.moments;
        let expect2 = (m[2] - 2.0 * lo * m[1] + lo * lo * m[0]) / (w * w);
        assert!((e.rescaled[2] - expect2).abs() < 1e-12);
    }

    #[test]
    fn torus_arcs_carry_positive_mass() {
        let n = 48;
        let s = fixtures::flat_torus::<f64>(n);
        let f = classify_vertices(&s, fixtures::sample_torus(n, fixtures::two_maxima_torus));
        let (g, q) = build_reeb_checked(&s, &f).unwrap();
        let mg = pushforward_measure(&s, &g, &q, 32, 8);
        assert_eq!(mg.edges.len(), 6);
        assert!(mg.edges.iter().all(|e| e.moments[0] > 0.0));
        assert!(((mg.total_mass() - s.total_area()) / s.total_area()).abs() < 1e-12);
    }

    #[test]
    fn differenced_profile_reproduces_moments() {
        let n = 32;
        let s = fixtures::flat_torus::<f64>(n);
        let f = classify_vertices(&s, fixtures::sample_torus(n, fixtures::saddle_torus));
        let (g, q) = build_reeb_checked(&s, &f).unwrap();
        let err = |k: usize| {
            let mg = pushforward_measure(&s, &g, &q, k, 3);
            mg.edges
                .iter()
                .map(|e| {
                    let lv = e.levels();
                    // midpoint rule on the differenced profile
                    let m1: f64 = (0..k)
                        .map(|i| 0.5 * (lv[i] + lv[i + 1]) * (e.cumulative_area[i + 1] - e.cumulative_area[i]))
                        .sum();
                    (m1 - e.moments[1]).abs() / e.moments[0]
                })
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (err(64), err(256));
        assert!(e2 < e1 / 4.0 * 1.5, "{e1} {e2}");
    }

    #[test]
    fn log_diagnostic_rejects_extremum() {
        let n = 32;
        let s = fixtures::flat_torus::<f64>(n);
        let f = classify_vertices(&s, fixtures::sample_torus(n, fixtures::saddle_torus));
        let (g, q) = build_reeb_checked(&s, &f).unwrap();
        let min = g.nodes().iter().position(|x| x.kind == NodeKind::Min).unwrap();
        assert!(log_singularity_diagnostic(&s, &g, &q, min, LogFitOptions::default()).is_err());
    }

    #[test]
    fn json_document_round_trips() {
        let (_, mg) = sphere(4);
        let doc = mg.to_json(true);
        let back = MeasuredReebGraph::<f64>::from_json(&doc).unwrap();
        assert_eq!(back.edges[0].moments, mg.edges[0].moments);
        assert_eq!(back.edges[0].cumulative_area.len(), 65);
    }
}
