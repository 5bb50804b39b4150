//! Time stepping, synchronous pairs and the measure-change coupling.
//!
//! Noise enters in `L²(m)` coordinates: mode `k` of `Q ΔW` is `q_k ΔB_k` for
//! independent standard Brownian increments `ΔB_k`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::spectral::{fast_diffusion_resolvent, DiagonalNoise, DriftModel, QuadratureGrid, SpectralField, StateNorm};
use crate::stats::{mean_se, MeanSe};
use crate::{Error, Result};

/// A drift operator as seen by the integrators.
pub trait Drift: Sync {
    fn eval(&self, x: &SpectralField, grid: &QuadratureGrid) -> Result<SpectralField>;
    fn jacobian(&self, x: &SpectralField, grid: &QuadratureGrid) -> Result<DMatrix<f64>>;
    fn state_norm(&self) -> StateNorm;
    /// Growth exponent `r`.
    fn exponent(&self) -> f64;
    /// Closed-form solution of `z = rhs + dt·b(z)`, when one exists.
    fn resolvent(&self, _rhs: &SpectralField, _dt: f64) -> Option<SpectralField> {
        None
    }
    /// A dedicated iterative solver for `z = rhs + dt·b(z)`, returning the
    /// state and its residual.
    fn special_solve(
        &self,
        _rhs: &SpectralField,
        _dt: f64,
        _grid: &QuadratureGrid,
        _tol: f64,
        _max_iterations: usize,
    ) -> Option<Result<(SpectralField, f64)>> {
        None
    }
}

impl Drift for DriftModel {
    fn eval(&self, x: &SpectralField, grid: &QuadratureGrid) -> Result<SpectralField> {
        DriftModel::eval(self, x, grid)
    }

    fn jacobian(&self, x: &SpectralField, grid: &QuadratureGrid) -> Result<DMatrix<f64>> {
        DriftModel::jacobian(self, x, grid)
    }

    fn state_norm(&self) -> StateNorm {
        DriftModel::state_norm(self)
    }

    fn exponent(&self) -> f64 {
        DriftModel::exponent(self)
    }

    fn resolvent(&self, rhs: &SpectralField, dt: f64) -> Option<SpectralField> {
        match self {
            DriftModel::Linear => {
                let mut z = rhs.clone();
                for (i, c) in z.coeffs.iter_mut().enumerate() {
                    *c /= 1.0 + dt * rhs.eigenvalue(i + 1);
                }
                Some(z)
            }
            _ => None,
        }
    }

    fn special_solve(
        &self,
        rhs: &SpectralField,
        dt: f64,
        grid: &QuadratureGrid,
        tol: f64,
        max_iterations: usize,
    ) -> Option<Result<(SpectralField, f64)>> {
        match *self {
            DriftModel::FastDiffusion { r } => Some(fast_diffusion_resolvent(rhs, r, dt, grid, tol, max_iterations)),
            _ => None,
        }
    }
}

/// `b ≡ 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroDrift;

impl Drift for ZeroDrift {
    fn eval(&self, x: &SpectralField, _grid: &QuadratureGrid) -> Result<SpectralField> {
        Ok(SpectralField::zeros(x.l, x.n_modes()))
    }

    fn jacobian(&self, x: &SpectralField, _grid: &QuadratureGrid) -> Result<DMatrix<f64>> {
        Ok(DMatrix::zeros(x.n_modes(), x.n_modes()))
    }

    fn state_norm(&self) -> StateNorm {
        StateNorm::NegativeSobolev
    }

    fn exponent(&self) -> f64 {
        1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    TamedExplicit,
    /// Backward Euler in the drift, solved by damped Newton.
    Implicit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_modes: usize,
    pub points: usize,
    pub dt: f64,
    pub t_end: f64,
    pub seed: u64,
    pub scheme: Scheme,
    pub couple_tol: f64,
    /// Save the state every this many steps.
    pub save_every: usize,
    /// Largest admissible `|ζ|_E` before coupling.
    pub zeta_cap: f64,
    pub solver_tol: f64,
    pub max_iterations: usize,
}

impl SimConfig {
    pub fn new(n_modes: usize, dt: f64, t_end: f64, seed: u64) -> Self {
        Self {
            n_modes,
            points: crate::spectral::DEALIAS_FACTOR * n_modes,
            dt,
            t_end,
            seed,
            scheme: Scheme::Implicit,
            couple_tol: 1e-6,
            save_every: 1,
            zeta_cap: 1e8,
            solver_tol: 1e-10,
            max_iterations: 60,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_modes == 0 {
            return Err(Error::domain("N must be at least 1"));
        }
        if self.points < crate::spectral::DEALIAS_FACTOR * self.n_modes {
            return Err(Error::Aliasing {
                modes: self.n_modes,
                points: self.points,
                needed: crate::spectral::DEALIAS_FACTOR * self.n_modes,
            });
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::domain(format!("dt = {} must be positive", self.dt)));
        }
        if !(self.t_end >= self.dt) || !self.t_end.is_finite() {
            return Err(Error::domain(format!("T = {} must be at least dt = {}", self.t_end, self.dt)));
        }
        if !(self.couple_tol > 0.0) {
            return Err(Error::domain("couple_tol must be positive"));
        }
        if self.save_every == 0 {
            return Err(Error::domain("save_every must be at least 1"));
        }
        if !(self.solver_tol > 0.0) || self.max_iterations == 0 {
            return Err(Error::domain("solver tolerance and iteration budget must be positive"));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        ((self.t_end / self.dt).round() as usize).max(1)
    }

    pub fn grid(&self, l: f64) -> Result<QuadratureGrid> {
        QuadratureGrid::new(l, self.points)
    }
}

/// Drift, noise and quadrature for one equation.
#[derive(Debug, Clone)]
pub struct Equation<D = DriftModel> {
    pub drift: D,
    pub noise: DiagonalNoise,
    pub grid: QuadratureGrid,
}

impl<D: Drift> Equation<D> {
    pub fn new(drift: D, noise: DiagonalNoise, grid: QuadratureGrid) -> Result<Self> {
        grid.check_modes(noise.len())?;
        Ok(Self { drift, noise, grid })
    }

    pub fn n_modes(&self) -> usize {
        self.noise.len()
    }

    pub fn l(&self) -> f64 {
        self.grid.l()
    }

    pub fn norm(&self, x: &SpectralField) -> f64 {
        x.norm(self.drift.state_norm())
    }

    fn check_state(&self, x: &SpectralField) -> Result<()> {
        if x.n_modes() != self.n_modes() || (x.l - self.l()).abs() > 1e-12 * self.l() {
            return Err(Error::ModelMismatch(format!(
                "state with (N, l) = ({}, {}) for an equation with ({}, {})",
                x.n_modes(),
                x.l,
                self.n_modes(),
                self.l()
            )));
        }
        Ok(())
    }
}

/// RNG for run `run` of an experiment seeded with `seed`.
pub fn stream_rng(seed: u64, run: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run);
    rng
}

/// Standard Brownian increments `ΔB_k ~ N(0, dt)`, `k = 1..=n`.
pub fn brownian_increment<R: Rng + ?Sized>(n: usize, dt: f64, rng: &mut R) -> Vec<f64> {
    let s = dt.sqrt();
    (0..n).map(|_| s * rng.sample::<f64, _>(StandardNormal)).collect()
}

fn push_through(noise: &DiagonalNoise, l: f64, db: &[f64]) -> SpectralField {
    SpectralField {
        l,
        coeffs: noise.q().iter().zip(db).map(|(q, b)| q * b).collect(),
    }
}

/// `Q ΔW` over a step of length `dt`.
pub fn wiener_increment<R: Rng + ?Sized>(noise: &DiagonalNoise, l: f64, dt: f64, rng: &mut R) -> SpectralField {
    push_through(noise, l, &brownian_increment(noise.len(), dt, rng))
}

/// Solve `z = rhs + dt·b(z)` by Newton's method with backtracking on the
/// residual in the state norm.
pub fn solve_implicit<D: Drift + ?Sized>(
    drift: &D,
    grid: &QuadratureGrid,
    rhs: &SpectralField,
    dt: f64,
    tol: f64,
    max_iterations: usize,
) -> Result<SpectralField> {
    if let Some(out) = drift.special_solve(rhs, dt, grid, tol, max_iterations) {
        let (z, res) = out?;
        return if res <= tol {
            Ok(z)
        } else {
            Err(Error::SolverDivergence {
                iterations: max_iterations,
                residual: res,
            })
        };
    }
    let norm = drift.state_norm();
    let n = rhs.n_modes();
    let residual = |z: &SpectralField| -> Result<SpectralField> {
        let mut g = z.sub(rhs);
        g.axpy(-dt, &drift.eval(z, grid)?);
        Ok(g)
    };
    let mut z = rhs.clone();
    let mut g = residual(&z)?;
    let mut res = g.norm(norm);
    for _ in 0..max_iterations {
        if res <= tol {
            return Ok(z);
        }
        let mut j = drift.jacobian(&z, grid)?;
        j *= -dt;
        for i in 0..n {
            j[(i, i)] += 1.0;
        }
        let dir = j
            .lu()
            .solve(&DVector::from_column_slice(&g.coeffs))
            .ok_or(Error::SolverDivergence {
                iterations: 0,
                residual: res,
            })?;
        let dir = SpectralField {
            l: z.l,
            coeffs: dir.iter().copied().collect(),
        };
        let mut step = 1.0;
        loop {
            let mut trial = z.clone();
            trial.axpy(-step, &dir);
            let tg = residual(&trial)?;
            let tres = tg.norm(norm);
            if tres < (1.0 - 1e-4 * step) * res || tres <= tol {
                z = trial;
                g = tg;
                res = tres;
                break;
            }
            step *= 0.5;
            if step < 1e-12 {
                return Err(Error::SolverDivergence {
                    iterations: max_iterations,
                    residual: res,
                });
            }
        }
    }
    if res <= tol {
        Ok(z)
    } else {
        Err(Error::SolverDivergence {
            iterations: max_iterations,
            residual: res,
        })
    }
}

fn drift_step<D: Drift>(
    x: &SpectralField,
    eq: &Equation<D>,
    cfg: &SimConfig,
    dt: f64,
    forcing: &SpectralField,
) -> Result<SpectralField> {
    match cfg.scheme {
        Scheme::TamedExplicit => {
            let b = eq.drift.eval(x, &eq.grid)?;
            let scale = dt / (1.0 + dt * b.norm(eq.drift.state_norm()));
            let mut out = x.add(forcing);
            out.axpy(scale, &b);
            Ok(out)
        }
        Scheme::Implicit => {
            let rhs = x.add(forcing);
            match eq.drift.resolvent(&rhs, dt) {
                Some(z) => Ok(z),
                None => solve_implicit(&eq.drift, &eq.grid, &rhs, dt, cfg.solver_tol, cfg.max_iterations),
            }
        }
    }
}

/// One step of length `cfg.dt` with a given noise increment.
pub fn step<D: Drift>(
    x: &SpectralField,
    eq: &Equation<D>,
    cfg: &SimConfig,
    increment: &SpectralField,
) -> Result<SpectralField> {
    drift_step(x, eq, cfg, cfg.dt, increment)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathTrace {
    pub times: Vec<f64>,
    pub states: Vec<SpectralField>,
}

impl PathTrace {
    fn start(x0: &SpectralField) -> Self {
        Self {
            times: vec![0.0],
            states: vec![x0.clone()],
        }
    }

    pub fn last(&self) -> &SpectralField {
        self.states.last().expect("a trace holds its initial state")
    }
}

fn check_run<D: Drift>(eq: &Equation<D>, cfg: &SimConfig) -> Result<()> {
    cfg.validate()?;
    if cfg.n_modes != eq.n_modes() {
        return Err(Error::ModelMismatch(format!(
            "config has N = {}, noise has {} modes",
            cfg.n_modes,
            eq.n_modes()
        )));
    }
    Ok(())
}

/// A path from `x0` on the stream `(cfg.seed, run)`.
pub fn simulate_path<D: Drift>(x0: &SpectralField, eq: &Equation<D>, cfg: &SimConfig, run: u64) -> Result<PathTrace> {
    check_run(eq, cfg)?;
    eq.check_state(x0)?;
    let mut rng = stream_rng(cfg.seed, run);
    let mut trace = PathTrace::start(x0);
    let mut x = x0.clone();
    for i in 1..=cfg.steps() {
        let dw = wiener_increment(&eq.noise, eq.l(), cfg.dt, &mut rng);
        x = step(&x, eq, cfg, &dw)?;
        if i % cfg.save_every == 0 {
            trace.times.push(i as f64 * cfg.dt);
            trace.states.push(x.clone());
        }
    }
    Ok(trace)
}

/// Two paths from `x0` and `y0` driven by the same increments.
pub fn simulate_pair_synchronous<D: Drift>(
    x0: &SpectralField,
    y0: &SpectralField,
    eq: &Equation<D>,
    cfg: &SimConfig,
    run: u64,
) -> Result<(PathTrace, PathTrace)> {
    check_run(eq, cfg)?;
    eq.check_state(x0)?;
    eq.check_state(y0)?;
    let mut rng = stream_rng(cfg.seed, run);
    let (mut tx, mut ty) = (PathTrace::start(x0), PathTrace::start(y0));
    let (mut x, mut y) = (x0.clone(), y0.clone());
    for i in 1..=cfg.steps() {
        let dw = wiener_increment(&eq.noise, eq.l(), cfg.dt, &mut rng);
        x = step(&x, eq, cfg, &dw)?;
        y = step(&y, eq, cfg, &dw)?;
        if i % cfg.save_every == 0 {
            let t = i as f64 * cfg.dt;
            tx.times.push(t);
            tx.states.push(x.clone());
            ty.times.push(t);
            ty.states.push(y.clone());
        }
    }
    Ok((tx, ty))
}

/// `ε = (θ+1-r)/(2+θ)` and `β = |x-y|_H^ε/(εT)` for a separation `dist = |x-y|_H`.
pub fn coupling_constants(dist: f64, t_end: f64, theta: f64, r: f64) -> Result<(f64, f64)> {
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(Error::domain(format!("T = {t_end} must be positive")));
    }
    if !(dist >= 0.0) || !dist.is_finite() {
        return Err(Error::domain(format!("separation {dist} must be finite and nonnegative")));
    }
    if !(r > 1.0) || !(theta >= 2.0) || !(theta > r - 1.0) {
        return Err(Error::domain(format!(
            "need r > 1 and θ ∈ [2, ∞) ∩ (r-1, ∞), got r = {r}, θ = {theta}"
        )));
    }
    let eps = (theta + 1.0 - r) / (2.0 + theta);
    Ok((eps, dist.powf(eps) / (eps * t_end)))
}

/// Pathwise bound on `∫₀ᵀ |ζ_t|²_E dt`.
pub fn zeta_energy_bound(dist: f64, t_end: f64, theta: f64, r: f64, eta: f64) -> f64 {
    let a = theta + 1.0 - r;
    let e = 2.0 * (theta + 1.0) / theta;
    let ln = e * (2.0 + theta).ln() + 2.0 * a / theta * dist.ln()
        - e * a.ln()
        - (theta + 2.0) / theta * t_end.ln()
        - 2.0 / theta * eta.ln();
    if dist == 0.0 {
        0.0
    } else {
        ln.exp()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingTrace {
    pub eps: f64,
    pub beta: f64,
    /// Coupling time, if the pair met before `T`.
    pub tau: Option<f64>,
    pub t_end: f64,
    /// Record times: `0`, every full step before coupling, and `τ`.
    pub times: Vec<f64>,
    /// `|X_t - Y_t|_H^ε` at `times`.
    pub dist_eps: Vec<f64>,
    pub zeta_energy: f64,
    pub log_weight: f64,
    /// Number of bisected sub-steps taken near coupling.
    pub substeps: usize,
}

impl CouplingTrace {
    pub fn coupled(&self) -> bool {
        self.tau.is_some_and(|t| t <= self.t_end * (1.0 + 1e-12))
    }

    /// Girsanov density `R`.
    pub fn weight(&self) -> f64 {
        self.log_weight.exp()
    }

    /// Largest slope of the ε-distance between consecutive records.
    pub fn max_eps_slope(&self) -> Option<f64> {
        self.times
            .windows(2)
            .zip(self.dist_eps.windows(2))
            .map(|(t, d)| (d[1] - d[0]) / (t[1] - t[0]))
            .reduce(f64::max)
    }
}

/// Sub-steps are bisected until `|X-Y|^ε ≥ SUBSTEP_FACTOR · max(ε, 0.1) · β h`.
const SUBSTEP_FACTOR: f64 = 10.0;
const MAX_BISECTIONS: u32 = 60;

struct CouplingState<'a, D> {
    eq: &'a Equation<D>,
    cfg: &'a SimConfig,
    eps: f64,
    beta: f64,
    x: SpectralField,
    y: SpectralField,
    t: f64,
    zeta_energy: f64,
    log_weight: f64,
    substeps: usize,
}

impl<D: Drift> CouplingState<'_, D> {
    /// Advance over `[t, t+h]` with standard increments `db`; true once coupled.
    fn advance<R: Rng>(&mut self, h: f64, db: &[f64], depth: u32, rng: &mut R) -> Result<bool> {
        let w = self.x.sub(&self.y);
        let dist = self.eq.norm(&w);
        let de = dist.powf(self.eps);
        if de < SUBSTEP_FACTOR * self.eps.max(0.1) * self.beta * h && depth < MAX_BISECTIONS {
            self.substeps += 1;
            let half = 0.5 * h;
            let sd = (0.25 * h).sqrt();
            let first: Vec<f64> = db
                .iter()
                .map(|b| 0.5 * b + sd * rng.sample::<f64, _>(StandardNormal))
                .collect();
            let second: Vec<f64> = db.iter().zip(&first).map(|(b, f)| b - f).collect();
            if self.advance(half, &first, depth + 1, rng)? {
                return Ok(true);
            }
            return self.advance(half, &second, depth + 1, rng);
        }

        let scale = self.beta / de;
        let q = self.eq.noise.q();
        let zeta: Vec<f64> = w.coeffs.iter().zip(q).map(|(a, q)| scale * a / q).collect();
        let z2: f64 = zeta.iter().map(|z| z * z).sum();
        if z2.sqrt() > self.cfg.zeta_cap {
            return Err(Error::ZetaCap {
                norm: z2.sqrt(),
                cap: self.cfg.zeta_cap,
                time: self.t,
            });
        }
        self.log_weight -= zeta.iter().zip(db).map(|(z, b)| z * b).sum::<f64>() + 0.5 * z2 * h;
        self.zeta_energy += z2 * h;

        let dw = push_through(&self.eq.noise, self.eq.l(), db);
        let mut fy = dw.clone();
        fy.axpy(h * scale, &w);
        self.x = drift_step(&self.x, self.eq, self.cfg, h, &dw)?;
        self.y = drift_step(&self.y, self.eq, self.cfg, h, &fy)?;
        self.t += h;
        if self.eq.norm(&self.x.sub(&self.y)) <= self.cfg.couple_tol {
            self.y = self.x.clone();
            return Ok(true);
        }
        Ok(false)
    }
}

/// Run the coupled pair `(X, Y)` from `(x0, y0)` up to the coupling time or `T`.
///
/// `Y` carries the extra drift `β (X-Y)/|X-Y|_H^ε`, evaluated at the left
/// end of each step, and `ζ = β Q⁻¹(X-Y)/|X-Y|_H^ε` feeds the Girsanov weight.
pub fn simulate_pair_coupled<D: Drift>(
    x0: &SpectralField,
    y0: &SpectralField,
    eq: &Equation<D>,
    cfg: &SimConfig,
    theta: f64,
    run: u64,
) -> Result<CouplingTrace> {
    check_run(eq, cfg)?;
    eq.check_state(x0)?;
    eq.check_state(y0)?;
    let dist0 = eq.norm(&x0.sub(y0));
    let (eps, beta) = coupling_constants(dist0, cfg.t_end, theta, eq.drift.exponent())?;
    let mut trace = CouplingTrace {
        eps,
        beta,
        tau: None,
        t_end: cfg.t_end,
        times: vec![0.0],
        dist_eps: vec![dist0.powf(eps)],
        zeta_energy: 0.0,
        log_weight: 0.0,
        substeps: 0,
    };
    if dist0 <= cfg.couple_tol {
        trace.tau = Some(0.0);
        return Ok(trace);
    }
    let mut rng = stream_rng(cfg.seed, run);
    let mut st = CouplingState {
        eq,
        cfg,
        eps,
        beta,
        x: x0.clone(),
        y: y0.clone(),
        t: 0.0,
        zeta_energy: 0.0,
        log_weight: 0.0,
        substeps: 0,
    };
    for i in 1..=cfg.steps() {
        let db = brownian_increment(eq.n_modes(), cfg.dt, &mut rng);
        let coupled = st.advance(cfg.dt, &db, 0, &mut rng)?;
        if coupled {
            trace.tau = Some(st.t);
            trace.times.push(st.t);
            trace.dist_eps.push(eq.norm(&st.x.sub(&st.y)).powf(eps));
            break;
        }
        // pin the clock to the grid to avoid drift from summed sub-steps
        st.t = i as f64 * cfg.dt;
        trace.times.push(st.t);
        trace.dist_eps.push(eq.norm(&st.x.sub(&st.y)).powf(eps));
    }
    trace.zeta_energy = st.zeta_energy;
    trace.log_weight = st.log_weight;
    trace.substeps = st.substeps;
    Ok(trace)
}

/// Run `runs` independent jobs in parallel, one RNG stream each, collected in
/// run order.
pub fn run_ensemble<T, F>(runs: u64, job: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    (0..runs).into_par_iter().map(job).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GirsanovStats {
    pub mean_r: MeanSe,
    pub mean_r2: MeanSe,
    /// Bound on `E R²`, when supplied.
    pub bound_r2: Option<f64>,
    /// `E R = 1` not rejected at 3 SE.
    pub r_consistent: bool,
    /// `E R²` not above the bound by more than 3 SE.
    pub r2_consistent: bool,
}

pub const MIN_GIRSANOV_TRACES: usize = 30;

/// Sample moments of the Girsanov density across traces.
pub fn girsanov_weight_stats(traces: &[CouplingTrace], bound_r2: Option<f64>) -> Result<GirsanovStats> {
    if traces.len() < MIN_GIRSANOV_TRACES {
        return Err(Error::TooFewTraces {
            got: traces.len(),
            need: MIN_GIRSANOV_TRACES,
        });
    }
    let r: Vec<f64> = traces.iter().map(CouplingTrace::weight).collect();
    let r2: Vec<f64> = r.iter().map(|x| x * x).collect();
    let mean_r = mean_se(&r);
    let mean_r2 = mean_se(&r2);
    let r_consistent = mean_r.mean == 1.0 || mean_r.within(1.0, 3.0);
    let r2_consistent = match bound_r2 {
        Some(b) => mean_r2.mean <= b + 3.0 * mean_r2.se,
        None => mean_r2.mean.is_finite(),
    };
    Ok(GirsanovStats {
        mean_r,
        mean_r2,
        bound_r2,
        r_consistent,
        r2_consistent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn porous(n: usize) -> Equation {
        let grid = QuadratureGrid::for_modes(PI, n).unwrap();
        Equation::new(DriftModel::Porous { r: 2.0 }, DiagonalNoise::scalar(1.0, n).unwrap(), grid).unwrap()
    }

    #[test]
    fn increments_replay() {
        let noise = DiagonalNoise::scalar(1.0, 4).unwrap();
        let a = wiener_increment(&noise, PI, 0.01, &mut stream_rng(3, 9));
        let b = wiener_increment(&noise, PI, 0.01, &mut stream_rng(3, 9));
        let c = wiener_increment(&noise, PI, 0.01, &mut stream_rng(3, 10));
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn increment_variance() {
        let noise = DiagonalNoise::scalar(1.0, 1).unwrap();
        let mut rng = stream_rng(1, 0);
        let xs: Vec<f64> = (0..100_000)
            .map(|_| wiener_increment(&noise, PI, 0.01, &mut rng).coeffs[0])
            .collect();
        let v = crate::stats::variance_se(&xs);
        assert!(v.within(0.01, 3.0), "{v:?}");
    }

    #[test]
    fn newton_matches_linear_resolvent() {
        let n = 12;
        let grid = QuadratureGrid::for_modes(2.0, n).unwrap();
        let rhs = SpectralField::new(2.0, (0..n).map(|i| (i as f64 * 0.7).sin()).collect()).unwrap();
        let dt = 0.05;
        let z = solve_implicit(&DriftModel::Linear, &grid, &rhs, dt, 1e-13, 20).unwrap();
        let exact = DriftModel::Linear.resolvent(&rhs, dt).unwrap();
        for (a, b) in z.coeffs.iter().zip(&exact.coeffs) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn newton_solves_porous_step() {
        let eq = porous(8);
        let rhs = SpectralField::new(PI, vec![3.0, -1.0, 0.5, 0.0, 0.2, 0.0, 0.0, 0.1]).unwrap();
        let dt = 0.1;
        let z = solve_implicit(&eq.drift, &eq.grid, &rhs, dt, 1e-12, 60).unwrap();
        let mut back = z.clone();
        back.axpy(-dt, &eq.drift.eval(&z, &eq.grid).unwrap());
        assert!(eq.norm(&back.sub(&rhs)) < 1e-12);
    }

    #[test]
    fn zero_drift_adds_noise() {
        let grid = QuadratureGrid::for_modes(PI, 4).unwrap();
        let eq = Equation::new(ZeroDrift, DiagonalNoise::scalar(1.0, 4).unwrap(), grid).unwrap();
        let x = SpectralField::new(PI, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let dw = SpectralField::new(PI, vec![0.1, -0.2, 0.3, 0.0]).unwrap();
        for scheme in [Scheme::Implicit, Scheme::TamedExplicit] {
            let mut cfg = SimConfig::new(4, 0.01, 1.0, 0);
            cfg.scheme = scheme;
            assert_eq!(step(&x, &eq, &cfg, &dw).unwrap(), x.add(&dw));
        }
    }

    #[test]
    fn deterministic_porous_norm_decreases() {
        let eq = porous(8);
        let zero = SpectralField::zeros(PI, 8);
        let mut x = SpectralField::new(PI, vec![2.0, -1.0, 0.5, 0.3, 0.0, 0.1, 0.0, 0.05]).unwrap();
        for scheme in [Scheme::Implicit, Scheme::TamedExplicit] {
            let mut cfg = SimConfig::new(8, 0.01, 1.0, 0);
            cfg.scheme = scheme;
            let mut prev = eq.norm(&x);
            for _ in 0..100 {
                x = step(&x, &eq, &cfg, &zero).unwrap();
                let now = eq.norm(&x);
                assert!(now < prev);
                prev = now;
            }
        }
    }

    #[test]
    fn equal_starts_stay_equal() {
        let eq = porous(4);
        let cfg = SimConfig::new(4, 0.01, 0.5, 2);
        let x0 = SpectralField::mode(PI, 4, 1, 1.0);
        let (a, b) = simulate_pair_synchronous(&x0, &x0, &eq, &cfg, 0).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, simulate_path(&x0, &eq, &cfg, 0).unwrap());
    }

    #[test]
    fn linear_difference_is_exact() {
        let grid = QuadratureGrid::for_modes(PI, 4).unwrap();
        let eq = Equation::new(DriftModel::Linear, DiagonalNoise::scalar(1.0, 4).unwrap(), grid).unwrap();
        let mut cfg = SimConfig::new(4, 0.01, 1.0, 5);
        cfg.save_every = 10;
        let x0 = SpectralField::mode(PI, 4, 1, 1.0);
        let y0 = SpectralField::zeros(PI, 4);
        let (a, b) = simulate_pair_synchronous(&x0, &y0, &eq, &cfg, 0).unwrap();
        for ((t, xa), xb) in a.times.iter().zip(&a.states).zip(&b.states) {
            let steps = (t / cfg.dt).round() as i32;
            let expected = (1.0 + cfg.dt).powi(-steps);
            assert_relative_eq!(xa.sub(xb).norm_h(), expected, max_relative = 1e-12);
            // and the scheme tracks e^{-λ₁t}
            assert!((expected - (-t).exp()).abs() < 5e-3);
        }
    }

    #[test]
    fn coupling_constant_examples() {
        let (eps, beta) = coupling_constants(1.0, 1.0, 3.0, 2.0).unwrap();
        assert_relative_eq!(eps, 0.4);
        assert_relative_eq!(beta, 2.5);
        assert_eq!(coupling_constants(0.0, 1.0, 3.0, 2.0).unwrap().1, 0.0);
        assert!(coupling_constants(1.0, 0.0, 3.0, 2.0).is_err());
        assert!(coupling_constants(1.0, 1.0, 1.5, 2.0).is_err());
        assert_relative_eq!(zeta_energy_bound(1.0, 1.0, 3.0, 2.0, 1.0), 2.5f64.powf(8.0 / 3.0), max_relative = 1e-14);
    }

    #[test]
    fn coupled_from_equal_points() {
        let eq = porous(4);
        let cfg = SimConfig::new(4, 0.01, 1.0, 0);
        let x0 = SpectralField::mode(PI, 4, 1, 0.5);
        let tr = simulate_pair_coupled(&x0, &x0, &eq, &cfg, 3.0, 0).unwrap();
        assert_eq!(tr.tau, Some(0.0));
        assert_eq!(tr.beta, 0.0);
        assert_eq!(tr.zeta_energy, 0.0);
        assert_eq!(tr.weight(), 1.0);
    }

    #[test]
    fn coupled_pair_meets_before_horizon() {
        let eq = porous(8);
        let cfg = SimConfig::new(8, 1e-3, 1.0, 4);
        let x0 = SpectralField::mode(PI, 8, 1, 0.5);
        let y0 = SpectralField::mode(PI, 8, 1, -0.5);
        let tr = simulate_pair_coupled(&x0, &y0, &eq, &cfg, 3.0, 0).unwrap();
        assert!(tr.coupled(), "{:?}", tr.tau);
        assert!(tr.max_eps_slope().unwrap() <= -tr.eps * tr.beta * 0.95);
        assert!(tr.zeta_energy <= zeta_energy_bound(1.0, 1.0, 3.0, 2.0, 1.0) * 1.05);
        let again = simulate_pair_coupled(&x0, &y0, &eq, &cfg, 3.0, 0).unwrap();
        assert_eq!(tr, again);
    }

    #[test]
    fn girsanov_needs_enough_traces() {
        let tr = CouplingTrace {
            eps: 0.4,
            beta: 0.0,
            tau: Some(0.0),
            t_end: 1.0,
            times: vec![0.0],
            dist_eps: vec![0.0],
            zeta_energy: 0.0,
            log_weight: 0.0,
            substeps: 0,
        };
        assert!(matches!(
            girsanov_weight_stats(&vec![tr.clone(); 10], None),
            Err(Error::TooFewTraces { .. })
        ));
        let s = girsanov_weight_stats(&vec![tr; 30], Some(1.0)).unwrap();
        assert_eq!(s.mean_r.mean, 1.0);
        assert_eq!(s.mean_r2.mean, 1.0);
        assert!(s.r_consistent && s.r2_consistent);
    }

    /// Constant `ζ ≡ c` on one mode: `R = exp(-c B_T - c²T/2)`.
    #[test]
    fn constant_zeta_lognormal_moments() {
        let (c, t) = (0.8, 1.0);
        let mut rng = stream_rng(17, 0);
        let traces: Vec<CouplingTrace> = (0..40_000)
            .map(|_| {
                let b = brownian_increment(1, t, &mut rng)[0];
                CouplingTrace {
                    eps: 0.4,
                    beta: 1.0,
                    tau: Some(t),
                    t_end: t,
                    times: vec![0.0, t],
                    dist_eps: vec![1.0, 0.0],
                    zeta_energy: c * c * t,
                    log_weight: -c * b - 0.5 * c * c * t,
                    substeps: 0,
                }
            })
            .collect();
        let s = girsanov_weight_stats(&traces, Some((c * c * t).exp())).unwrap();
        assert!(s.mean_r.within(1.0, 3.0), "{:?}", s.mean_r);
        assert!(s.mean_r2.within((c * c * t).exp(), 3.0), "{:?}", s.mean_r2);
        assert!(s.r_consistent && s.r2_consistent);
    }
}
