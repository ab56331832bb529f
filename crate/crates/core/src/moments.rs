//! Power moments on a compact interval: Hausdorff feasibility, Stieltjes transform,
//! and density reconstruction from the jump of the transform across the support.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::measure::EdgeMeasure;
use crate::scalar::{gauss_legendre, Real};

/// Moments `m_k = int z^k dmu`, `k < N`, of a measure supported in `[lo, hi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSequence<T> {
    pub lo: T,
    pub hi: T,
    pub values: Vec<T>,
    /// Moments on `[0, 1]` integrated directly, when the source provides them; the binomial
    /// expansion of `values` loses digits when the interval is narrow compared with its offset.
    pub unit: Option<Vec<f64>>,
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Moments of `(z - shift) / width` from moments of `z`.
fn affine_moments(m: &[f64], shift: f64, width: f64) -> Vec<f64> {
    (0..m.len())
        .map(|k| {
            let s: f64 = (0..=k).map(|j| binomial(k, j) * m[j] * (-shift).powi((k - j) as i32)).sum();
            s / width.powi(k as i32)
        })
        .collect()
}

impl<T: Real> MomentSequence<T> {
    pub fn new(lo: T, hi: T, values: Vec<T>) -> Result<Self> {
        if !(hi > lo) {
            return Err(Error::InvalidInput(format!("empty interval [{lo}, {hi}]")));
        }
        if values.is_empty() {
            return Err(Error::InvalidInput("no moments".into()));
        }
        Ok(Self { lo, hi, values, unit: None })
    }

    /// Raw moments of an arc measure.
    pub fn from_edge(e: &EdgeMeasure<T>) -> Self {
        let unit = (e.rescaled.len() == e.moments.len()).then(|| e.rescaled.iter().map(|x| x.as_f64()).collect());
        Self { lo: e.f_lo, hi: e.f_hi, values: e.moments.clone(), unit }
    }

    /// Moments of the constant density `c` on `[lo, hi]`.
    pub fn uniform(lo: T, hi: T, c: T, n: usize) -> Self {
        let values = (0..n)
            .map(|k| {
                let p = T::from_usize_lossy(k + 1);
                c * (hi.powf(p) - lo.powf(p)) / p
            })
            .collect();
        Self { lo, hi, values, unit: None }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mass(&self) -> f64 {
        self.values[0].as_f64()
    }

    fn raw(&self) -> Vec<f64> {
        self.values.iter().map(|x| x.as_f64()).collect()
    }

    /// Moments of `(z - lo) / (hi - lo)` on `[0, 1]`.
    pub fn rescaled(&self) -> Vec<f64> {
        if let Some(u) = &self.unit {
            return u.clone();
        }
        let (lo, hi) = (self.lo.as_f64(), self.hi.as_f64());
        affine_moments(&self.raw(), lo, hi - lo)
    }

    /// Moments of `(z - c) / L` on `[-1, 1]`, with `c` the midpoint and `L` the half-width.
    pub fn centered(&self) -> Vec<f64> {
        if let Some(u) = &self.unit {
            return affine_moments(u, 0.5, 0.5);
        }
        let (lo, hi) = (self.lo.as_f64(), self.hi.as_f64());
        affine_moments(&self.raw(), 0.5 * (lo + hi), 0.5 * (hi - lo))
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.lo.as_f64() + self.hi.as_f64())
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.hi.as_f64() - self.lo.as_f64())
    }
}

/// One value `(-1)^n Delta^n m_k` of the rescaled sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Difference {
    pub order: usize,
    pub index: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityReport {
    pub feasible: bool,
    pub violations: Vec<Difference>,
    /// Most negative difference relative to `m_0` (zero if none is negative).
    pub worst: f64,
    /// All differences, grouped by order `n`.
    pub differences: Vec<Vec<f64>>,
}

/// Default relative tolerance of [`hausdorff_check`].
pub const TOL_FEAS: f64 = 1e-10;

/// `(-1)^n Delta^n m_k = int lambda^k (1 - lambda)^n dmu >= 0` on the rescaled sequence, `k + n < N`.
pub fn hausdorff_check<T: Real>(ms: &MomentSequence<T>, tol_feas: f64) -> FeasibilityReport {
    let r = ms.rescaled();
    let n_max = r.len();
    let m0 = r[0].abs().max(f64::MIN_POSITIVE);
    let mut differences = Vec::with_capacity(n_max);
    let mut violations = Vec::new();
    let mut worst = 0.0f64;
    if r[0] < -tol_feas * m0 {
        violations.push(Difference { order: 0, index: 0, value: r[0] });
    }
    for n in 0..n_max {
        let row: Vec<f64> = (0..n_max - n)
            .map(|k| (0..=n).map(|j| binomial(n, j) * if j % 2 == 0 { 1.0 } else { -1.0 } * r[k + j]).sum())
            .collect();
        // rounding in the alternating sum grows like 2^n
        let tol = tol_feas * m0 + 4.0 * 2f64.powi(n as i32) * f64::EPSILON * m0;
        for (k, &v) in row.iter().enumerate() {
            if n > 0 && v < -tol {
                violations.push(Difference { order: n, index: k, value: v });
            }
            worst = worst.min(v / m0);
        }
        differences.push(row);
    }
    FeasibilityReport { feasible: violations.is_empty(), violations, worst: (-worst).max(0.0), differences }
}

/// How [`stieltjes_transform`] evaluates `Phi(lambda) = int dmu(z) / (lambda - z)`.
pub enum StieltjesMode<'a> {
    /// Truncated Laurent series around the interval midpoint; requires
    /// `|lambda - c| > L (1 + margin)`.
    Series { margin: f64 },
    /// Composite Gauss-Legendre quadrature against an attached density on `[lo, hi]`.
    Quadrature { density: &'a dyn Fn(f64) -> f64, panels: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StieltjesValue {
    pub value: Complex64,
    /// Bound on the truncation error (`0` in quadrature mode).
    pub tail_bound: f64,
}

/// Stieltjes transform of the measure at `lambda`.
pub fn stieltjes_transform<T: Real>(ms: &MomentSequence<T>, lambda: Complex64, mode: StieltjesMode<'_>) -> Result<StieltjesValue> {
    let c = ms.center();
    let l = ms.half_width();
    let z = lambda - c;
    match mode {
        StieltjesMode::Series { margin } => {
            let radius = l * (1.0 + margin);
            if z.norm() <= radius {
                return Err(Error::DivergenceRisk { modulus: z.norm(), radius });
            }
            // moments of z - c, summed as nu_k L^k / z^{k+1}
            let nu = ms.centered();
            let mut term = Complex64::new(1.0, 0.0) / z;
            let mut value = Complex64::new(0.0, 0.0);
            for (k, &v) in nu.iter().enumerate() {
                value += term * v * l.powi(k as i32);
                term /= z;
            }
            let n = nu.len() as i32;
            let m0 = ms.mass().abs();
            let tail_bound = m0 * (l / z.norm()).powi(n) / (z.norm() - l);
            Ok(StieltjesValue { value, tail_bound })
        }
        StieltjesMode::Quadrature { density, panels } => {
            let (lo, hi) = (ms.lo.as_f64(), ms.hi.as_f64());
            let (x, w) = gauss_legendre::<f64>(16);
            let h = (hi - lo) / panels.max(1) as f64;
            let mut value = Complex64::new(0.0, 0.0);
            for p in 0..panels.max(1) {
                let mid = lo + (p as f64 + 0.5) * h;
                for (xi, wi) in x.iter().zip(&w) {
                    let s = mid + 0.5 * h * xi;
                    value += 0.5 * h * wi * density(s) / (lambda - s);
                }
            }
            Ok(StieltjesValue { value, tail_bound: 0.0 })
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ReconstructOptions {
    /// Distance from the cut, relative to the half-width `L`.
    pub eps_rel: f64,
    pub grid: usize,
    pub tol_feas: f64,
    /// Legendre coefficients are kept while their rounding error stays below this (relative to `m_0`).
    pub noise: f64,
}

impl Default for ReconstructOptions {
    fn default() -> Self {
        Self { eps_rel: 1e-2, grid: 201, tol_feas: TOL_FEAS, noise: 1e-6 }
    }
}

#[derive(Debug, Clone)]
pub struct Reconstruction {
    /// Midpoints of `grid` equal cells of `(lo, hi)`.
    pub points: Vec<f64>,
    pub density: Vec<f64>,
    /// Number of Legendre terms used.
    pub effective_n: usize,
    pub eps: f64,
    /// `|int w - m_0| / m_0` by the midpoint rule on the grid.
    pub defect: f64,
}

impl Reconstruction {
    pub fn mass(&self) -> f64 {
        let h = if self.points.len() > 1 { self.points[1] - self.points[0] } else { 0.0 };
        self.density.iter().sum::<f64>() * h
    }
}

/// Legendre moments `int P_n(x) dmu` of a measure on `[-1, 1]` given its power moments,
/// with a running bound on their rounding error.
fn legendre_moments(nu: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = nu.len();
    let mut out = Vec::with_capacity(n);
    let mut err = Vec::with_capacity(n);
    // rows hold int x^j P_k dmu for the last two k
    let mut prev: Vec<f64> = nu.to_vec();
    let mut prev_err: Vec<f64> = nu.iter().map(|x| x.abs() * f64::EPSILON).collect();
    out.push(prev[0]);
    err.push(prev_err[0]);
    if n == 1 {
        return (out, err);
    }
    let mut cur: Vec<f64> = nu[1..].to_vec();
    let mut cur_err: Vec<f64> = nu[1..].iter().map(|x| x.abs() * f64::EPSILON).collect();
    out.push(cur[0]);
    err.push(cur_err[0]);
    for k in 1..n - 1 {
        let len = n - k - 1;
        let kf = k as f64;
        let next: Vec<f64> =
            (0..len).map(|j| ((2.0 * kf + 1.0) * cur[j + 1] - kf * prev[j]) / (kf + 1.0)).collect();
        let next_err: Vec<f64> = (0..len)
            .map(|j| {
                ((2.0 * kf + 1.0) * cur_err[j + 1] + kf * prev_err[j]) / (kf + 1.0) + next_abs(cur[j + 1], prev[j], kf)
            })
            .collect();
        out.push(next[0]);
        err.push(next_err[0]);
        prev = cur;
        prev_err = cur_err;
        cur = next;
        cur_err = next_err;
    }
    (out, err)
}

fn next_abs(a: f64, b: f64, k: f64) -> f64 {
    ((2.0 * k + 1.0) * a.abs() + k * b.abs()) / (k + 1.0) * f64::EPSILON
}

/// Legendre functions of the second kind `Q_0..Q_{n-1}` at complex `z` off `[-1, 1]`.
fn legendre_q(z: Complex64, n: usize) -> Vec<Complex64> {
    let mut q = Vec::with_capacity(n);
    let q0 = 0.5 * ((z + 1.0) / (z - 1.0)).ln();
    q.push(q0);
    if n > 1 {
        q.push(z * q0 - 1.0);
    }
    for k in 1..n.saturating_sub(1) {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0) * z * q[k] - kf * q[k - 1]) / (kf + 1.0);
        q.push(next);
    }
    q
}

/// Evaluates the Stieltjes transform of the Legendre-series density matched to the moments,
/// `Phi(lambda) = (1 / L) sum (2n + 1) l_n Q_n((lambda - c) / L)`, and takes its jump across the cut.
pub fn reconstruct_density<T: Real>(ms: &MomentSequence<T>, opts: &ReconstructOptions) -> Result<Reconstruction> {
    let report = hausdorff_check(ms, opts.tol_feas);
    if !report.feasible {
        return Err(Error::InfeasibleMoments { violations: report.violations.len(), worst: report.worst });
    }
    if !(opts.eps_rel > 0.0) || opts.grid == 0 {
        return Err(Error::InvalidInput("eps and grid must be positive".into()));
    }
    let (c, l) = (ms.center(), ms.half_width());
    let m0 = ms.mass();
    let (ell, err) = legendre_moments(&ms.centered());
    let effective_n = err.iter().position(|e| *e > opts.noise * m0.abs()).unwrap_or(ell.len()).max(1);
    let eps = opts.eps_rel * l;
    let h = 2.0 * l / opts.grid as f64;
    let points: Vec<f64> = (0..opts.grid).map(|i| c - l + (i as f64 + 0.5) * h).collect();
    let phi = |lambda: Complex64| -> Complex64 {
        let q = legendre_q((lambda - c) / l, effective_n);
        q.iter().enumerate().map(|(n, qn)| *qn * ((2 * n + 1) as f64 * ell[n])).sum::<Complex64>() / l
    };
    let i2pi = Complex64::new(0.0, 2.0 * std::f64::consts::PI);
    let density: Vec<f64> = points
        .iter()
        .map(|&x| ((phi(Complex64::new(x, -eps)) - phi(Complex64::new(x, eps))) / i2pi).re)
        .collect();
    let mass = density.iter().sum::<f64>() * h;
    let defect = (mass - m0).abs() / m0.abs().max(f64::MIN_POSITIVE);
    if defect > 0.2 {
        return Err(Error::IllConditioned { effective_n, eps, defect });
    }
    Ok(Reconstruction { points, density, effective_n, eps, defect })
}
