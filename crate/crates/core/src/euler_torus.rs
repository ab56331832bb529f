//! Pseudo-spectral solver for the incompressible Euler equation in vorticity form
//! on the flat torus `[0, 2pi)^2`, and the harness that tracks Casimirs along a run.
//!
//! Sign conventions: `psi_hat = F_hat / |k|^2`, `u = (d_y psi, -d_x psi)`, so that
//! `curl u = d_x u_2 - d_y u_1 = F`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::circulation::{CirculationOptions, DiscreteOneForm};
use crate::error::{Error, Result};
use crate::fixtures::flat_torus;
use crate::geometry::TriangulatedSurface;
use crate::orbit::{analyze_coset, measured_iso, Coset, MatchOptions, Verdict};
use crate::scalar::gauss_legendre;

pub const CFL: f64 = 0.4;
pub const CFL_MAX: f64 = 1.0;

/// One Fourier mode `amp * cos(kx x + ky y + phase)` of an initial condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub kx: i64,
    pub ky: i64,
    pub amp: f64,
    #[serde(default)]
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitSpec {
    pub modes: Vec<Mode>,
}

impl InitSpec {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.modes.iter().map(|m| m.amp * (m.kx as f64 * x + m.ky as f64 * y + m.phase).cos()).sum()
    }
}

/// 2D FFTs on an `n x n` grid stored row-major with `x` varying fastest.
pub struct Spectral {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Spectral {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self { n, fwd: planner.plan_fft_forward(n), inv: planner.plan_fft_inverse(n) }
    }

    fn transform(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        plan.process(data);
        let mut col = vec![Complex64::new(0.0, 0.0); n];
        for i in 0..n {
            for j in 0..n {
                col[j] = data[j * n + i];
            }
            plan.process(&mut col);
            for j in 0..n {
                data[j * n + i] = col[j];
            }
        }
    }

    pub fn forward(&self, real: &[f64]) -> Vec<Complex64> {
        let mut d: Vec<Complex64> = real.iter().map(|x| Complex64::new(*x, 0.0)).collect();
        self.transform(&mut d, &self.fwd);
        d
    }

    /// Inverse transform, normalized, real part.
    pub fn inverse(&self, spec: &[Complex64]) -> Vec<f64> {
        let mut d = spec.to_vec();
        self.transform(&mut d, &self.inv);
        let s = 1.0 / (self.n * self.n) as f64;
        d.iter().map(|z| z.re * s).collect()
    }

    /// Signed wavenumber of FFT index `i`.
    pub fn wavenumber(&self, i: usize) -> f64 {
        if i <= self.n / 2 {
            i as f64
        } else {
            i as f64 - self.n as f64
        }
    }

    /// Two-thirds rule: keep modes with `3 |k| < n` in both directions.
    pub fn kept(&self, i: usize) -> bool {
        3.0 * self.wavenumber(i).abs() < self.n as f64
    }
}

/// Vorticity samples on the grid `x_i = 2 pi i / n`, `y_j = 2 pi j / n`, index `j n + i`.
#[derive(Debug, Clone, PartialEq)]
pub struct TorusFlowState {
    pub n: usize,
    pub t: f64,
    pub vorticity: Vec<f64>,
}

impl TorusFlowState {
    /// Samples `f` and projects it onto the dealiased modes with zero mean.
    pub fn from_fn(n: usize, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if n < 8 {
            return Err(Error::InvalidInput(format!("grid size {n} is too small")));
        }
        let h = 2.0 * PI / n as f64;
        let mut v = Vec::with_capacity(n * n);
        for j in 0..n {
            for i in 0..n {
                v.push(f(i as f64 * h, j as f64 * h));
            }
        }
        let mean = v.iter().sum::<f64>() / (n * n) as f64;
        if mean.abs() > 1e-12 * v.iter().fold(1.0f64, |m, x| m.max(x.abs())) {
            return Err(Error::NonZeroMean(mean));
        }
        let sp = Spectral::new(n);
        let mut hat = sp.forward(&v);
        dealias(&sp, &mut hat);
        Ok(Self { n, t: 0.0, vorticity: sp.inverse(&hat) })
    }

    pub fn from_spec(n: usize, spec: &InitSpec) -> Result<Self> {
        Self::from_fn(n, |x, y| spec.eval(x, y))
    }

    pub fn mean(&self) -> f64 {
        self.vorticity.iter().sum::<f64>() / self.vorticity.len() as f64
    }

    pub fn spacing(&self) -> f64 {
        2.0 * PI / self.n as f64
    }
}

fn dealias(sp: &Spectral, hat: &mut [Complex64]) {
    let n = sp.n;
    for j in 0..n {
        for i in 0..n {
            if !(sp.kept(i) && sp.kept(j)) {
                hat[j * n + i] = Complex64::new(0.0, 0.0);
            }
        }
    }
    hat[0] = Complex64::new(0.0, 0.0);
}

/// Velocity spectra `(u1_hat, u2_hat)` of a vorticity spectrum.
fn velocity_hat(sp: &Spectral, hat: &[Complex64]) -> (Vec<Complex64>, Vec<Complex64>) {
    let n = sp.n;
    let mut u1 = vec![Complex64::new(0.0, 0.0); n * n];
    let mut u2 = vec![Complex64::new(0.0, 0.0); n * n];
    for j in 0..n {
        let ky = sp.wavenumber(j);
        for i in 0..n {
            let kx = sp.wavenumber(i);
            let k2 = kx * kx + ky * ky;
            if k2 == 0.0 {
                continue;
            }
            let psi = hat[j * n + i] / k2;
            u1[j * n + i] = Complex64::new(0.0, ky) * psi;
            u2[j * n + i] = Complex64::new(0.0, -kx) * psi;
        }
    }
    (u1, u2)
}

/// Velocity samples `(u1, u2)`; requires zero mean.
pub fn velocity_from_vorticity(state: &TorusFlowState) -> Result<(Vec<f64>, Vec<f64>)> {
    check_mean(state)?;
    let sp = Spectral::new(state.n);
    let hat = sp.forward(&state.vorticity);
    let (u1, u2) = velocity_hat(&sp, &hat);
    Ok((sp.inverse(&u1), sp.inverse(&u2)))
}

fn check_mean(state: &TorusFlowState) -> Result<()> {
    let scale = state.vorticity.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let mean = state.mean();
    if mean.abs() > 1e-10 * scale {
        return Err(Error::NonZeroMean(mean));
    }
    Ok(())
}

/// `-u . grad F`, dealiased.
fn rhs(sp: &Spectral, hat: &[Complex64]) -> Vec<Complex64> {
    let n = sp.n;
    let (u1h, u2h) = velocity_hat(sp, hat);
    let mut fx = vec![Complex64::new(0.0, 0.0); n * n];
    let mut fy = vec![Complex64::new(0.0, 0.0); n * n];
    for j in 0..n {
        let ky = sp.wavenumber(j);
        for i in 0..n {
            let kx = sp.wavenumber(i);
            fx[j * n + i] = Complex64::new(0.0, kx) * hat[j * n + i];
            fy[j * n + i] = Complex64::new(0.0, ky) * hat[j * n + i];
        }
    }
    let (u1, u2, fx, fy) = (sp.inverse(&u1h), sp.inverse(&u2h), sp.inverse(&fx), sp.inverse(&fy));
    let adv: Vec<f64> = (0..n * n).map(|p| -(u1[p] * fx[p] + u2[p] * fy[p])).collect();
    let mut out = sp.forward(&adv);
    dealias(sp, &mut out);
    out
}

fn max_speed(u1: &[f64], u2: &[f64]) -> f64 {
    u1.iter().zip(u2).map(|(a, b)| a.abs() + b.abs()).fold(0.0, f64::max)
}

/// Courant number `dt max(|u1| + |u2|) / h`.
pub fn courant(state: &TorusFlowState, dt: f64) -> Result<f64> {
    let (u1, u2) = velocity_from_vorticity(state)?;
    Ok(dt * max_speed(&u1, &u2) / state.spacing())
}

/// Largest step with Courant number [`CFL`] (capped at `h` for a fluid at rest).
pub fn auto_dt(state: &TorusFlowState) -> Result<f64> {
    let (u1, u2) = velocity_from_vorticity(state)?;
    let s = max_speed(&u1, &u2);
    Ok(if s > 0.0 { CFL * state.spacing() / s } else { state.spacing() })
}

/// Solver reusing its FFT plans across steps.
pub struct EulerSolver {
    sp: Spectral,
}

impl EulerSolver {
    pub fn new(n: usize) -> Self {
        Self { sp: Spectral::new(n) }
    }

    /// One classical Runge-Kutta step of `dF/dt = -u . grad F`.
    pub fn step(&self, state: &TorusFlowState, dt: f64) -> Result<TorusFlowState> {
        if state.n != self.sp.n {
            return Err(Error::InvalidInput("grid size mismatch".into()));
        }
        if !(dt > 0.0) {
            return Err(Error::InvalidInput(format!("time step {dt} must be positive")));
        }
        check_mean(state)?;
        let c = courant(state, dt)?;
        if c > CFL_MAX {
            return Err(Error::CflViolation { dt, courant: c });
        }
        let sp = &self.sp;
        let mut f0 = sp.forward(&state.vorticity);
        dealias(sp, &mut f0);
        let axpy = |a: &[Complex64], s: f64, b: &[Complex64]| -> Vec<Complex64> { a.iter().zip(b).map(|(x, y)| x + y * s).collect() };
        let k1 = rhs(sp, &f0);
        let k2 = rhs(sp, &axpy(&f0, 0.5 * dt, &k1));
        let k3 = rhs(sp, &axpy(&f0, 0.5 * dt, &k2));
        let k4 = rhs(sp, &axpy(&f0, dt, &k3));
        let next: Vec<Complex64> = (0..f0.len())
            .map(|p| f0[p] + (k1[p] + k2[p] * 2.0 + k3[p] * 2.0 + k4[p]) * (dt / 6.0))
            .collect();
        Ok(TorusFlowState { n: state.n, t: state.t + dt, vorticity: sp.inverse(&next) })
    }

    /// Advances to time `t_end` with steps of at most `dt` (or [`auto_dt`] when `None`).
    pub fn advance(&self, state: &TorusFlowState, t_end: f64, dt: Option<f64>) -> Result<TorusFlowState> {
        let mut s = state.clone();
        while s.t < t_end - 1e-12 {
            let h = match dt {
                Some(h) => h,
                None => auto_dt(&s)?,
            };
            let h = h.min(t_end - s.t);
            s = self.step(&s, h)?;
        }
        Ok(s)
    }
}

/// `state` advanced by one step of size `dt`.
pub fn step(state: &TorusFlowState, dt: f64) -> Result<TorusFlowState> {
    EulerSolver::new(state.n).step(state, dt)
}

/// Kinetic energy `1/2 int |u|^2`.
pub fn energy(state: &TorusFlowState) -> Result<f64> {
    let (u1, u2) = velocity_from_vorticity(state)?;
    let h = state.spacing();
    Ok(0.5 * h * h * u1.iter().zip(&u2).map(|(a, b)| a * a + b * b).sum::<f64>())
}

/// Fourier symbol of the vertex averaging in [`crate::circulation::curl`] on the grid mesh:
/// the mean of `exp(i k . x)` over the six triangles around a vertex (spacing `h`).
fn star_symbol(kx: f64, ky: f64, h: f64) -> f64 {
    const STAR: [[(f64, f64); 3]; 6] = [
        [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0)],
        [(-1.0, 0.0), (0.0, 0.0), (0.0, 1.0)],
        [(-1.0, -1.0), (0.0, -1.0), (0.0, 0.0)],
        [(0.0, 0.0), (1.0, 1.0), (0.0, 1.0)],
        [(-1.0, -1.0), (0.0, 0.0), (-1.0, 0.0)],
        [(0.0, -1.0), (1.0, 0.0), (0.0, 0.0)],
    ];
    let (x, w) = gauss_legendre::<f64>(16);
    let mut acc = 0.0;
    for tri in STAR {
        let (p0, p1, p2) = (tri[0], tri[1], tri[2]);
        // collapsed square: u in [0,1], v in [0,1] -> p0 + u (p1 - p0) + u v (p2 - p1)
        for (xa, wa) in x.iter().zip(&w) {
            let u = 0.5 * (xa + 1.0);
            for (xb, wb) in x.iter().zip(&w) {
                let v = 0.5 * (xb + 1.0);
                let px = p0.0 + u * (p1.0 - p0.0) + u * v * (p2.0 - p1.0);
                let py = p0.1 + u * (p1.1 - p0.1) + u * v * (p2.1 - p1.1);
                // Jacobian u * 2A / A with A the triangle area, quadrature weights on [0,1]^2
                acc += 0.25 * wa * wb * u * 2.0 * (kx * px * h + ky * py * h).cos();
            }
        }
    }
    acc / 6.0
}

/// `(e^{i theta} - 1) / (i theta)`, the mean of `e^{i s theta}` over `s in [0, 1]`.
fn segment_mean(theta: f64) -> Complex64 {
    if theta.abs() < 1e-8 {
        Complex64::new(1.0 - theta * theta / 6.0, 0.5 * theta)
    } else {
        (Complex64::new(0.0, theta).exp() - 1.0) / Complex64::new(0.0, theta)
    }
}

/// Grid mesh, vertex field and 1-form of a state, sampled on an `m x m` grid (`m` a multiple of `n`).
///
/// Field values are the spectral interpolant of the vorticity. Edge values are exact line
/// integrals of the velocity of `S^{-1} F`, where `S` is the vertex averaging of the mesh
/// curl, so that `curl(form)` reproduces the field at every vertex.
pub struct Snapshot {
    pub surface: TriangulatedSurface<f64>,
    pub field: Vec<f64>,
    pub form: DiscreteOneForm<f64>,
}

pub fn snapshot(state: &TorusFlowState, m: usize) -> Result<Snapshot> {
    check_mean(state)?;
    let n = state.n;
    if m < n || m % n != 0 {
        return Err(Error::InvalidInput(format!("mesh size {m} must be a multiple of {n}")));
    }
    let sp = Spectral::new(n);
    let mut hat = sp.forward(&state.vorticity);
    dealias(&sp, &mut hat);
    // embed into the finer grid; amplitudes scale with the number of samples
    let big = Spectral::new(m);
    let scale = (m * m) as f64 / (n * n) as f64;
    let mut fh = vec![Complex64::new(0.0, 0.0); m * m];
    let idx = |k: f64| if k >= 0.0 { k as usize } else { (k + m as f64) as usize };
    for j in 0..n {
        for i in 0..n {
            let z = hat[j * n + i];
            if z != Complex64::new(0.0, 0.0) {
                fh[idx(sp.wavenumber(j)) * m + idx(sp.wavenumber(i))] = z * scale;
            }
        }
    }
    let field = big.inverse(&fh);
    let h = 2.0 * PI / m as f64;
    let mut gh = fh.clone();
    for j in 0..m {
        for i in 0..m {
            let z = gh[j * m + i];
            if z != Complex64::new(0.0, 0.0) {
                gh[j * m + i] = z / star_symbol(big.wavenumber(i), big.wavenumber(j), h);
            }
        }
    }
    let (u1, u2) = velocity_hat(&big, &gh);
    // edge integrals along (1,0), (0,1), (1,1) from each grid point
    let dirs = [(1.0, 0.0), (0.0, 1.0), (1.0, 1.0)];
    let along: Vec<Vec<f64>> = dirs
        .iter()
        .map(|&(a, b)| {
            let mut e = vec![Complex64::new(0.0, 0.0); m * m];
            for j in 0..m {
                let ky = big.wavenumber(j);
                for i in 0..m {
                    let kx = big.wavenumber(i);
                    let p = j * m + i;
                    let theta = (kx * a + ky * b) * h;
                    e[p] = (u1[p] * (a * h) + u2[p] * (b * h)) * segment_mean(theta);
                }
            }
            big.inverse(&e)
        })
        .collect();
    let surface = flat_torus::<f64>(m);
    let values = surface
        .edges()
        .iter()
        .map(|e| {
            let (ia, ja) = (e.a % m, e.a / m);
            let (ib, jb) = (e.b % m, e.b / m);
            let di = (ib + m - ia) % m;
            let dj = (jb + m - ja) % m;
            match (di, dj) {
                (1, 0) => along[0][e.a],
                (0, 1) => along[1][e.a],
                (1, 1) => along[2][e.a],
                _ if (di, dj) == (m - 1, 0) => -along[0][e.b],
                _ if (di, dj) == (0, m - 1) => -along[1][e.b],
                _ => -along[2][e.b],
            }
        })
        .collect();
    let form = DiscreteOneForm::new(&surface, values)?;
    Ok(Snapshot { surface, field, form })
}

/// The 1-form of a state on its own grid (see [`snapshot`]).
pub fn velocity_oneform(state: &TorusFlowState) -> Result<(TriangulatedSurface<f64>, DiscreteOneForm<f64>)> {
    let s = snapshot(state, state.n)?;
    Ok((s.surface, s.form))
}

#[derive(Debug, Clone, Copy)]
pub struct TraceOptions {
    pub t_end: f64,
    pub samples: usize,
    /// Fixed step, or [`auto_dt`] at every step.
    pub dt: Option<f64>,
    /// Mesh refinement factor for the analysis snapshots.
    pub upsample: usize,
    /// Moments tracked per arc.
    pub moments: usize,
    pub circulation: CirculationOptions,
}

impl Default for TraceOptions {
    fn default() -> Self {
        Self {
            t_end: 2.0,
            samples: 5,
            dt: None,
            upsample: 4,
            moments: 8,
            circulation: CirculationOptions { moments: 8, persistence: 1e-3, ..Default::default() },
        }
    }
}

/// Casimir values at one time, indexed by the arcs of the initial graph.
#[derive(Debug, Clone)]
pub struct CasimirSample {
    pub t: f64,
    pub moments: Vec<Vec<f64>>,
    pub total_moments: Vec<f64>,
    /// `(lower limit, middle value, upper limit)` of the circulation on each arc.
    pub circulations: Vec<[f64; 3]>,
    pub energy: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DriftSummary {
    /// Largest `|m_{i,e}(t) - m_{i,e}(0)| / (m_{0,e} R_e^i)`, `R_e = max(|f_lo|, |f_hi|)`.
    pub edge_moments: f64,
    pub total_moments: f64,
    /// Largest circulation change relative to the circulation scale.
    pub circulation: f64,
    pub energy: f64,
}

#[derive(Debug, Clone)]
pub struct CasimirTrace {
    pub samples: Vec<CasimirSample>,
    pub drift: DriftSummary,
    pub steps: usize,
}

impl CasimirTrace {
    pub fn to_json(&self) -> Value {
        json!({
            "samples": self.samples.iter().map(|s| json!({
                "t": s.t,
                "m": s.moments,
                "total_m": s.total_moments,
                "c": s.circulations,
                "energy": s.energy,
            })).collect::<Vec<_>>(),
            "drift": {
                "edge_moments": self.drift.edge_moments,
                "total_moments": self.drift.total_moments,
                "circulation": self.drift.circulation,
                "energy": self.drift.energy,
            },
            "steps": self.steps,
        })
    }
}

/// Evolves `initial` and evaluates the full Casimir report at equally spaced times.
pub fn casimir_trace(initial: &TorusFlowState, opts: &TraceOptions) -> Result<CasimirTrace> {
    let solver = EulerSolver::new(initial.n);
    let m = initial.n * opts.upsample.max(1);
    let copts = CirculationOptions { moments: opts.moments.max(1), ..opts.circulation };
    let analyze = |s: &TorusFlowState| {
        let snap = snapshot(s, m)?;
        let coset = Coset { surface: &snap.surface, form: &snap.form, field: Some(&snap.field) };
        analyze_coset(coset, &copts).map(|(c, _)| c)
    };
    let reference = analyze(initial)?;
    let match_opts = MatchOptions { moments: 1, tol_rel: 0.05, tol_f: 1e-2, ..Default::default() };
    let mut state = initial.clone();
    let mut samples = Vec::new();
    let mut steps = 0;
    let count = opts.samples.max(2);
    for k in 0..count {
        let target = initial.t + opts.t_end * k as f64 / (count - 1) as f64;
        while state.t < target - 1e-12 {
            let h = match opts.dt {
                Some(h) => h,
                None => auto_dt(&state)?,
            };
            state = solver.step(&state, h.min(target - state.t))?;
            steps += 1;
        }
        let cg = if k == 0 { reference.clone() } else { analyze(&state)? };
        let arc_map = match measured_iso(&reference.measured, &cg.measured, &match_opts) {
            Verdict::Isomorphic(g) => g.arc_map,
            Verdict::NotIsomorphic(_) => return Err(Error::TopologyChange(state.t)),
        };
        let mut moments = Vec::new();
        let mut circulations = Vec::new();
        for &a in &arc_map {
            moments.push(cg.measured.edges[a].moments.clone());
            circulations.push([cg.circulation.lower_limit(a), cg.c_mid(a), cg.circulation.upper_limit(a)]);
        }
        samples.push(CasimirSample {
            t: state.t,
            moments,
            total_moments: cg.measured.total_moments(),
            circulations,
            energy: energy(&state)?,
        });
    }
    let drift = drift_summary(&samples, &reference);
    Ok(CasimirTrace { samples, drift, steps })
}

fn drift_summary(samples: &[CasimirSample], reference: &crate::circulation::CirculationGraph<f64>) -> DriftSummary {
    let first = &samples[0];
    let mut d = DriftSummary::default();
    let cscale = reference.residuals.scale.max(f64::MIN_POSITIVE);
    let tscale: Vec<f64> = {
        let (lo, hi) = reference.measured.edges.iter().fold((0.0f64, 0.0f64), |(lo, hi), e| (lo.min(e.f_lo), hi.max(e.f_hi)));
        let r = lo.abs().max(hi.abs());
        (0..first.total_moments.len()).map(|i| reference.measured.total_mass() * r.powi(i as i32)).collect()
    };
    for s in &samples[1..] {
        for (a, (m, m0)) in s.moments.iter().zip(&first.moments).enumerate() {
            let e = &reference.measured.edges[a];
            let r = e.f_lo.abs().max(e.f_hi.abs());
            for i in 0..m.len().min(m0.len()) {
                let scale = m0[0] * r.powi(i as i32);
                d.edge_moments = d.edge_moments.max((m[i] - m0[i]).abs() / scale);
            }
        }
        for i in 0..s.total_moments.len() {
            d.total_moments = d.total_moments.max((s.total_moments[i] - first.total_moments[i]).abs() / tscale[i]);
        }
        for (c, c0) in s.circulations.iter().zip(&first.circulations) {
            for k in 0..3 {
                d.circulation = d.circulation.max((c[k] - c0[k]).abs() / cscale);
            }
        }
        d.energy = d.energy.max((s.energy - first.energy).abs() / first.energy.abs().max(f64::MIN_POSITIVE));
    }
    d
}
