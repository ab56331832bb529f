//! Mesh and field generators used by the tests, the acceptance suite and the CLI.

use std::collections::HashMap;
use std::f64::consts::PI;

use crate::circulation::DiscreteOneForm;
use crate::geometry::TriangulatedSurface;
use crate::scalar::Real;

/// Regular octahedron with vertices on the coordinate axes (4 = south pole, 5 = north pole).
pub fn octahedron<T: Real>() -> TriangulatedSurface<T> {
    let p = |x: f64, y: f64, z: f64| [T::lit(x), T::lit(y), T::lit(z)];
    let positions = vec![
        p(1.0, 0.0, 0.0),
        p(0.0, 1.0, 0.0),
        p(-1.0, 0.0, 0.0),
        p(0.0, -1.0, 0.0),
        p(0.0, 0.0, -1.0),
        p(0.0, 0.0, 1.0),
    ];
    TriangulatedSurface::from_positions(positions, octahedron_faces().to_vec()).expect("valid octahedron")
}

fn octahedron_faces() -> [[usize; 3]; 8] {
    [[0, 1, 5], [1, 2, 5], [2, 3, 5], [3, 0, 5], [1, 0, 4], [2, 1, 4], [3, 2, 4], [0, 3, 4]]
}

/// Octahedron with every face split into `n * n` triangles, projected onto the unit sphere.
pub fn octa_sphere<T: Real>(n: usize) -> TriangulatedSurface<T> {
    assert!(n >= 1);
    let corners: [[i64; 3]; 6] = [[1, 0, 0], [0, 1, 0], [-1, 0, 0], [0, -1, 0], [0, 0, -1], [0, 0, 1]];
    let ni = n as i64;
    let mut ids: HashMap<[i64; 3], usize> = HashMap::new();
    let mut positions: Vec<[T; 3]> = Vec::new();
    let mut triangles = Vec::with_capacity(8 * n * n);
    let mut vid = |key: [i64; 3], positions: &mut Vec<[T; 3]>| -> usize {
        *ids.entry(key).or_insert_with(|| {
            let v = [key[0] as f64, key[1] as f64, key[2] as f64];
            let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            positions.push([T::lit(v[0] / r), T::lit(v[1] / r), T::lit(v[2] / r)]);
            positions.len() - 1
        })
    };
    for f in octahedron_faces() {
        let (a, b, c) = (corners[f[0]], corners[f[1]], corners[f[2]]);
        let point = |i: i64, j: i64| -> [i64; 3] {
            let mut k = [0; 3];
            for d in 0..3 {
                k[d] = a[d] * (ni - i - j) + b[d] * i + c[d] * j;
            }
            k
        };
        for j in 0..ni {
            for i in 0..(ni - j) {
                let p00 = vid(point(i, j), &mut positions);
                let p10 = vid(point(i + 1, j), &mut positions);
                let p01 = vid(point(i, j + 1), &mut positions);
                triangles.push([p00, p10, p01]);
                if i + j + 1 < ni {
                    let p11 = vid(point(i + 1, j + 1), &mut positions);
                    triangles.push([p10, p11, p01]);
                }
            }
        }
    }
    TriangulatedSurface::from_positions(positions, triangles).expect("valid sphere")
}

/// The `z` coordinate of every vertex.
pub fn height<T: Real>(surface: &TriangulatedSurface<T>) -> Vec<T> {
    surface.positions().expect("positions").iter().map(|p| p[2]).collect()
}

/// Index of grid vertex `(i, j)` on an `n x n` periodic grid.
#[inline]
pub fn grid_index(n: usize, i: usize, j: usize) -> usize {
    (j % n) * n + (i % n)
}

/// Periodic `n x n` grid over `[0, 2pi)^2`, each cell split along its diagonal; uniform areas.
pub fn flat_torus<T: Real>(n: usize) -> TriangulatedSurface<T> {
    flat_torus_with_period(n, 2.0 * PI)
}

pub fn flat_torus_with_period<T: Real>(n: usize, period: f64) -> TriangulatedSurface<T> {
    assert!(n >= 3);
    let h = period / n as f64;
    let mut positions = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            positions.push([T::lit(i as f64 * h), T::lit(j as f64 * h), T::zero()]);
        }
    }
    let mut triangles = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let a = grid_index(n, i, j);
            let b = grid_index(n, i + 1, j);
            let c = grid_index(n, i + 1, j + 1);
            let d = grid_index(n, i, j + 1);
            triangles.push([a, b, c]);
            triangles.push([a, c, d]);
        }
    }
    let areas = vec![T::lit(0.5 * h * h); triangles.len()];
    TriangulatedSurface::from_areas(n * n, triangles, areas, Some(positions)).expect("valid torus")
}

/// Samples `f(x, y)` at the vertices of [`flat_torus`].
pub fn sample_torus<T: Real>(n: usize, f: impl Fn(f64, f64) -> f64) -> Vec<T> {
    let h = 2.0 * PI / n as f64;
    let mut out = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            out.push(T::lit(f(i as f64 * h, j as f64 * h)));
        }
    }
    out
}

/// Height-like function on the torus with one minimum, three saddles and two maxima.
pub fn two_maxima_torus(x: f64, y: f64) -> f64 {
    y.cos() + 0.2 * (1.0 + y.cos()) * (2.0 * x).cos() + 0.15 * x.cos() + 0.05 * x.sin()
}

/// Morse function with nondegenerate saddles whose middle level cycles wind once in `x`.
pub fn saddle_torus(x: f64, y: f64) -> f64 {
    y.cos() + 0.5 * x.cos()
}

/// Minimum-image displacement between two points of a flat torus of the given period.
pub fn torus_displacement<T: Real>(p: [T; 3], q: [T; 3], period: T) -> [T; 2] {
    let half = period * T::lit(0.5);
    let wrap = |d: T| {
        let mut d = d;
        while d > half {
            d = d - period;
        }
        while d <= -half {
            d = d + period;
        }
        d
    };
    [wrap(q[0] - p[0]), wrap(q[1] - p[1])]
}

/// The closed form `cx dx + cy dy` on a flat torus mesh, integrated exactly along each edge.
pub fn constant_form<T: Real>(surface: &TriangulatedSurface<T>, period: f64, cx: f64, cy: f64) -> DiscreteOneForm<T> {
    let pos = surface.positions().expect("torus positions");
    let values = surface
        .edges()
        .iter()
        .map(|e| {
            let d = torus_displacement(pos[e.a], pos[e.b], T::lit(period));
            T::lit(cx) * d[0] + T::lit(cy) * d[1]
        })
        .collect();
    DiscreteOneForm::new(surface, values).expect("edge count")
}

/// The exact form `df` of a vertex function.
pub fn exact_form<T: Real>(surface: &TriangulatedSurface<T>, f: &[T]) -> DiscreteOneForm<T> {
    let values = surface.edges().iter().map(|e| f[e.b] - f[e.a]).collect();
    DiscreteOneForm::new(surface, values).expect("edge count")
}

/// Two mirror-image bumps (under `x -> -x`) plus a tilt towards `+z`:
/// one minimum, one saddle near the north pole, two maxima.
pub fn two_bump_sphere(p: [f64; 3]) -> f64 {
    let (s, c) = 0.8f64.sin_cos();
    let bump = |sign: f64| {
        let d = (p[0] - sign * s).powi(2) + p[1].powi(2) + (p[2] - c).powi(2);
        (-d / 0.3).exp()
    };
    bump(1.0) + bump(-1.0) + 0.3 * p[2]
}

/// Vertex permutation induced by `x -> -x` on a mesh whose positions are mirror symmetric.
pub fn mirror_x<T: Real>(surface: &TriangulatedSurface<T>) -> Option<Vec<usize>> {
    let pos = surface.positions()?;
    let key = |p: [T; 3]| [p[0].as_f64().to_bits(), p[1].as_f64().to_bits(), p[2].as_f64().to_bits()];
    let index: HashMap<[u64; 3], usize> = pos.iter().enumerate().map(|(v, p)| (key(*p), v)).collect();
    let zero = |x: T| if x == T::zero() { T::zero() } else { x };
    pos.iter().map(|p| index.get(&key([zero(-p[0]), p[1], p[2]])).copied()).collect()
}

/// Two area forms on one sphere mesh carrying the same two-bump field.
#[derive(Debug, Clone)]
pub struct FigureThree<T> {
    pub first: TriangulatedSurface<T>,
    pub second: TriangulatedSurface<T>,
    pub field: Vec<T>,
    /// Triangles of the `x > 0` branch whose area grows in `second`.
    pub moved: Vec<usize>,
}

/// `second` takes area `s * A_t` from the mirror image of each triangle `t` in the
/// middle part of the `x > 0` branch and gives it to `t`. The mirror symmetry of the
/// field keeps every total moment unchanged while the branch moments move.
pub fn figure_three_pair<T: Real>(n: usize, s: f64) -> FigureThree<T> {
    let first = octa_sphere::<T>(n);
    let pos = first.positions().expect("positions").to_vec();
    let field: Vec<T> = pos.iter().map(|p| T::lit(two_bump_sphere([p[0].as_f64(), p[1].as_f64(), p[2].as_f64()]))).collect();
    let mirror = mirror_x(&first).expect("symmetric mesh");
    let classes = crate::geometry::classify_vertices(&first, field.clone());
    let crit = |pred: fn(crate::geometry::VertexClass) -> bool| {
        (0..pos.len()).filter(|&v| pred(classes.class(v))).map(|v| field[v].as_f64()).fold(f64::NAN, f64::max)
    };
    let f_saddle = crit(|c| matches!(c, crate::geometry::VertexClass::Saddle(_)));
    let f_max = crit(|c| c == crate::geometry::VertexClass::Max);
    let (lo, hi) = (f_saddle + 0.25 * (f_max - f_saddle), f_max - 0.25 * (f_max - f_saddle));
    let mut tri_index: HashMap<[usize; 3], usize> = HashMap::new();
    for (t, tri) in first.triangles().iter().enumerate() {
        let mut k = *tri;
        k.sort_unstable();
        tri_index.insert(k, t);
    }
    let mut areas = first.areas().to_vec();
    let mut moved = Vec::new();
    for (t, tri) in first.triangles().iter().enumerate() {
        let inside = tri.iter().all(|&v| {
            let f = field[v].as_f64();
            pos[v][0] > T::zero() && f > lo && f < hi
        });
        if !inside {
            continue;
        }
        let mut k = tri.map(|v| mirror[v]);
        k.sort_unstable();
        let twin = tri_index[&k];
        let delta = T::lit(s) * first.areas()[t];
        areas[t] = areas[t] + delta;
        areas[twin] = areas[twin] - delta;
        moved.push(t);
    }
    let second = first.with_areas(areas).expect("positive areas");
    FigureThree { first, second, field, moved }
}
