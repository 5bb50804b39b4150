//! Sampled checks of the scalar and functional inequalities behind the rate
//! bounds, and of simulated contraction and coupling envelopes.
//!
//! A check compares a larger side `big` with a smaller side `small` through
//! the margin `(big - small)/max(|big|, |small|, 1e-300)`; a trial is a
//! violation when its margin falls below `-tolerance`.

use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    run_ensemble, simulate_pair_coupled, simulate_pair_synchronous, stream_rng,
    zeta_energy_bound, CouplingTrace, Equation, PathTrace, SimConfig,
};
use crate::rates::{GeneralRateParams, PorousMediumSpec};
use crate::spectral::{
    drift_pairing_diff, signed_power, synthesize, synthesize_gradient, DiagonalNoise, DriftModel, NoiseLaw,
    QuadratureGrid, SpectralField, StateNorm,
};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub n_trials: usize,
    pub n_violations: usize,
    /// Most negative margin seen (`+inf` with no trials).
    pub worst_margin: f64,
    pub tolerance: f64,
}

impl CheckReport {
    pub fn new(name: impl Into<String>, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            n_trials: 0,
            n_violations: 0,
            worst_margin: f64::INFINITY,
            tolerance,
        }
    }

    pub fn record(&mut self, margin: f64) {
        self.n_trials += 1;
        // NaN counts as a violation
        if !(margin >= -self.tolerance) {
            self.n_violations += 1;
        }
        if margin < self.worst_margin || margin.is_nan() {
            self.worst_margin = margin;
        }
    }

    pub fn merge(mut self, other: &CheckReport) -> Self {
        self.n_trials += other.n_trials;
        self.n_violations += other.n_violations;
        if other.worst_margin < self.worst_margin || other.worst_margin.is_nan() {
            self.worst_margin = other.worst_margin;
        }
        self
    }

    pub fn passed(&self) -> bool {
        self.n_violations == 0
    }
}

/// Relative margin of `big ≥ small`.
pub fn margin(big: f64, small: f64) -> f64 {
    (big - small) / big.abs().max(small.abs()).max(1e-300)
}

/// Scalar pair samplers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScalarSampler {
    /// Uniform on `[-a, a]²`.
    Uniform { half_width: f64 },
    /// Random signs, magnitudes log-uniform over `decades` decades around 1.
    LogUniform { decades: f64 },
    /// `t = s(1 + 10^{-u})`, `u` uniform in `[2, 8]`.
    NearEqual,
    /// Cycles through uniform `[-10, 10]²`, log-uniform over 6 decades,
    /// near-equal pairs and exact sign flips `t = -s`.
    Mixed,
}

fn log_uniform<R: Rng>(rng: &mut R, decades: f64) -> f64 {
    10f64.powf(decades * (rng.random::<f64>() - 0.5))
}

fn random_sign<R: Rng>(rng: &mut R) -> f64 {
    if rng.random::<bool>() {
        1.0
    } else {
        -1.0
    }
}

impl ScalarSampler {
    pub fn sample<R: Rng>(&self, rng: &mut R, trial: usize) -> (f64, f64) {
        match *self {
            ScalarSampler::Uniform { half_width: a } => (rng.random_range(-a..=a), rng.random_range(-a..=a)),
            ScalarSampler::LogUniform { decades } => (
                random_sign(rng) * log_uniform(rng, decades),
                random_sign(rng) * log_uniform(rng, decades),
            ),
            ScalarSampler::NearEqual => {
                let s = random_sign(rng) * log_uniform(rng, 6.0);
                (s, s * (1.0 + 10f64.powf(-rng.random_range(2.0..8.0))))
            }
            ScalarSampler::Mixed => match trial % 4 {
                0 => ScalarSampler::Uniform { half_width: 10.0 }.sample(rng, trial),
                1 => ScalarSampler::LogUniform { decades: 6.0 }.sample(rng, trial),
                2 => ScalarSampler::NearEqual.sample(rng, trial),
                _ => {
                    let s = random_sign(rng) * log_uniform(rng, 6.0);
                    (s, -s)
                }
            },
        }
    }
}

/// `|s|^{r-1}s - |t|^{r-1}t`, accurate to a few ulps also when `s ≈ t`.
pub fn signed_power_diff(s: f64, t: f64, r: f64) -> f64 {
    if s == 0.0 || t == 0.0 || s.signum() != t.signum() {
        return signed_power(s, r) - signed_power(t, r);
    }
    // same sign: |t|^r (exp(r ln(1 + (s-t)/t)) - 1), s - t is exact near s = t
    let rel = (s - t) / t;
    s.signum() * t.abs().powf(r) * (r * rel.ln_1p()).exp_m1()
}

/// Margin of `(s^r - t^r)(s - t) ≥ 2^{1-r}|s - t|^{1+r}`.
pub fn power_inequality_margin(s: f64, t: f64, r: f64) -> f64 {
    let lhs = signed_power_diff(s, t, r) * (s - t);
    let rhs = 2f64.powf(1.0 - r) * (s - t).abs().powf(1.0 + r);
    margin(lhs, rhs)
}

/// Margin of `(s^r - t^r)(s - t) ≥ r|s - t|²(|s| ∨ |t|)^{r-1}` for `r ∈ (0, 1)`.
pub fn fastdiff_pointwise_margin(s: f64, t: f64, r: f64) -> f64 {
    if s == t {
        return 0.0;
    }
    let lhs = signed_power_diff(s, t, r) * (s - t);
    let rhs = r * (s - t).powi(2) * s.abs().max(t.abs()).powf(r - 1.0);
    margin(lhs, rhs)
}

/// Chunked parallel sampling with one stream per chunk.
fn sampled_check<F>(name: String, tolerance: f64, n_trials: usize, seed: u64, trial: F) -> CheckReport
where
    F: Fn(&mut rand_chacha::ChaCha8Rng, usize) -> f64 + Sync,
{
    const CHUNK: usize = 10_000;
    let chunks = n_trials.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(seed, c as u64);
            let mut rep = CheckReport::new(name.clone(), tolerance);
            for i in c * CHUNK..((c + 1) * CHUNK).min(n_trials) {
                rep.record(trial(&mut rng, i));
            }
            rep
        })
        .collect::<Vec<_>>()
        .iter()
        .fold(CheckReport::new(name.clone(), tolerance), |acc, r| acc.merge(r))
}

pub const POWER_TOLERANCE: f64 = 1e-12;
pub const FASTDIFF_TOLERANCE: f64 = 1e-10;
pub const HOLDER_TOLERANCE: f64 = 1e-8;
pub const MONOTONICITY_TOLERANCE: f64 = 1e-6;
pub const ENVELOPE_SLACK: f64 = 1.05;

pub fn check_power_inequality(r: f64, n_trials: usize, sampler: ScalarSampler, seed: u64) -> Result<CheckReport> {
    if !(r > 1.0) {
        return Err(Error::domain(format!("power inequality needs r > 1, got {r}")));
    }
    Ok(sampled_check(format!("power_inequality(r={r})"), POWER_TOLERANCE, n_trials, seed, |rng, i| {
        let (s, t) = sampler.sample(rng, i);
        power_inequality_margin(s, t, r)
    }))
}

pub fn check_fastdiff_pointwise(r: f64, n_trials: usize, sampler: ScalarSampler, seed: u64) -> Result<CheckReport> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::domain(format!("fast-diffusion inequality needs r ∈ (0, 1), got {r}")));
    }
    Ok(sampled_check(format!("fastdiff_pointwise(r={r})"), FASTDIFF_TOLERANCE, n_trials, seed, |rng, i| {
        let (s, t) = sampler.sample(rng, i);
        fastdiff_pointwise_margin(s, t, r)
    }))
}

/// Field pair samplers for the functional inequalities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldSampler {
    /// Independent uniform coefficients, each field scaled log-uniformly over 6 decades.
    IidScaled,
    /// Gaussian coefficients decaying like `k^{-a}`, `a ∈ [0, 2]`.
    SpectralDecay,
    /// `u = a e₁`, `v = -a e₁` plus a relative perturbation below `1e-3`.
    FirstModeFlip,
    /// `v = u + small`, relative size `10^{-u}`, `u ∈ [2, 6]`.
    NearEqual,
    /// Cycles through the four above.
    Mixed,
}

fn gaussian<R: Rng>(rng: &mut R) -> f64 {
    rng.sample(rand_distr::StandardNormal)
}

impl FieldSampler {
    pub fn sample<R: Rng>(&self, rng: &mut R, l: f64, n: usize, trial: usize) -> (SpectralField, SpectralField) {
        let field = |coeffs: Vec<f64>| SpectralField { l, coeffs };
        match *self {
            FieldSampler::IidScaled => {
                let one = |rng: &mut R| {
                    let s = log_uniform(rng, 6.0);
                    field((0..n).map(|_| s * rng.random_range(-1.0..1.0)).collect())
                };
                (one(rng), one(rng))
            }
            FieldSampler::SpectralDecay => {
                let a = rng.random_range(0.0..2.0);
                let one = |rng: &mut R| {
                    field((1..=n).map(|k| gaussian(rng) * (k as f64).powf(-a)).collect())
                };
                (one(rng), one(rng))
            }
            FieldSampler::FirstModeFlip => {
                let a = random_sign(rng) * log_uniform(rng, 4.0);
                let eps = 10f64.powf(-rng.random_range(3.0..9.0));
                let pert = |rng: &mut R, sign: f64| {
                    field(
                        (1..=n)
                            .map(|k| if k == 1 { sign * a } else { 0.0 } + a * eps * rng.random_range(-1.0..1.0))
                            .collect(),
                    )
                };
                (pert(rng, 1.0), pert(rng, -1.0))
            }
            FieldSampler::NearEqual => {
                let (u, _) = FieldSampler::SpectralDecay.sample(rng, l, n, trial);
                let size = 10f64.powf(-rng.random_range(2.0..6.0)) * u.norm_l2();
                let v = field(u.coeffs.iter().map(|c| c + size * rng.random_range(-1.0..1.0)).collect());
                (u, v)
            }
            FieldSampler::Mixed => match trial % 4 {
                0 => FieldSampler::IidScaled.sample(rng, l, n, trial),
                1 => FieldSampler::SpectralDecay.sample(rng, l, n, trial),
                2 => FieldSampler::FirstModeFlip.sample(rng, l, n, trial),
                _ => FieldSampler::NearEqual.sample(rng, l, n, trial),
            },
        }
    }
}

fn norm_lp_quad(values: &[f64], p: f64, grid: &QuadratureGrid) -> f64 {
    grid.integrate(&values.iter().map(|v| v.abs().powf(p)).collect::<Vec<_>>())
}

/// Margins of the two Hölder steps for fast diffusion with `h = ‖·‖_{r+1}`:
/// `m(|w|^{1+r}) ≤ m(|w|²M^{r-1})^{(1+r)/2} m(M^{1+r})^{(1-r)/2}` and
/// `m(M^{1+r}) ≤ 2{h(u) ∨ h(v)}^{1+r}`, where `w = u - v`, `M = |u| ∨ |v|`.
pub fn holder_chain_margins(u: &SpectralField, v: &SpectralField, r: f64, grid: &QuadratureGrid) -> Result<(f64, f64)> {
    let (a, b) = (synthesize(u, grid)?, synthesize(v, grid)?);
    let w: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
    let big: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x.abs().max(y.abs())).collect();
    let weighted: Vec<f64> = w
        .iter()
        .zip(&big)
        .map(|(d, m)| if *d == 0.0 { 0.0 } else { d * d * m.powf(r - 1.0) })
        .collect();
    let lhs = norm_lp_quad(&w, 1.0 + r, grid);
    let mass = norm_lp_quad(&big, 1.0 + r, grid);
    let holder = grid.integrate(&weighted).powf(0.5 * (1.0 + r)) * mass.powf(0.5 * (1.0 - r));
    let h = norm_lp_quad(&a, 1.0 + r, grid).max(norm_lp_quad(&b, 1.0 + r, grid));
    Ok((margin(holder, lhs), margin(2.0 * h, mass)))
}

/// The full chain `‖u-v‖_{r+1}^{1+r} ≤ 2^{(1-r)/2} m(|u-v|²(|u|∨|v|)^{r-1})^{(1+r)/2}{h(u)∨h(v)}^{(1-r²)/2}`.
pub fn check_holder_chain(r: f64, n_trials: usize, n: usize, seed: u64) -> Result<CheckReport> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::domain(format!("Hölder chain needs r ∈ (0, 1), got {r}")));
    }
    let grid = QuadratureGrid::for_modes(PI, n)?;
    let mut rep = CheckReport::new(format!("holder_chain(r={r})"), HOLDER_TOLERANCE);
    let mut rng = stream_rng(seed, 0);
    for i in 0..n_trials {
        let (u, v) = FieldSampler::Mixed.sample(&mut rng, PI, n, i);
        let (m1, m2) = holder_chain_margins(&u, &v, r, &grid)?;
        rep.record(m1.min(m2));
        let (a, b) = (synthesize(&u, &grid)?, synthesize(&v, &grid)?);
        let w: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
        let weighted: Vec<f64> = a
            .iter()
            .zip(&b)
            .zip(&w)
            .map(|((x, y), d)| if *d == 0.0 { 0.0 } else { d * d * x.abs().max(y.abs()).powf(r - 1.0) })
            .collect();
        let h = norm_lp_quad(&a, 1.0 + r, &grid)
            .max(norm_lp_quad(&b, 1.0 + r, &grid))
            .powf(1.0 / (1.0 + r));
        let rhs = 2f64.powf(0.5 * (1.0 - r))
            * grid.integrate(&weighted).powf(0.5 * (1.0 + r))
            * h.powf(0.5 * (1.0 - r * r));
        rep.record(margin(rhs, norm_lp_quad(&w, 1.0 + r, &grid)));
    }
    Ok(rep)
}

/// `∫|f|^p dm ≤ (l^p/p) ∫|f'|^p dm` on band-limited fields.
pub fn check_sobolev(p: f64, l: f64, n_trials: usize, n: usize, seed: u64) -> Result<CheckReport> {
    let grid = QuadratureGrid::new(l, 16 * n)?;
    let mut rep = CheckReport::new(format!("sobolev(p={p})"), 1e-10);
    let mut rng = stream_rng(seed, 0);
    for i in 0..n_trials {
        let (u, _) = FieldSampler::Mixed.sample(&mut rng, l, n, i);
        let f = norm_lp_quad(&synthesize(&u, &grid)?, p, &grid);
        let df = norm_lp_quad(&synthesize_gradient(&u, &grid)?, p, &grid);
        rep.record(margin(l.powf(p) / p * df, f));
    }
    Ok(rep)
}

/// Poincaré `Σ λ_k c_k² ≥ λ₁ Σ c_k²`; margins reach 0 on pure first modes.
pub fn check_poincare(l: f64, n_trials: usize, n: usize, seed: u64) -> CheckReport {
    let mut rep = CheckReport::new("poincare", 1e-12);
    let mut rng = stream_rng(seed, 0);
    for i in 0..n_trials {
        let u = if i % 10 == 0 {
            SpectralField::mode(l, n, 1, log_uniform(&mut rng, 4.0))
        } else {
            FieldSampler::Mixed.sample(&mut rng, l, n, i).0
        };
        let lam1 = (PI / l).powi(2);
        rep.record(margin(u.norm_grad_l2().powi(2), lam1 * u.norm_l2().powi(2)));
    }
    rep
}

/// `max{η‖w‖_Q^θ |w|_H^{r+1-θ}, δ|w|_H^{1+r}}`.
pub fn monotonicity_bound(w: &SpectralField, norm: StateNorm, noise: &DiagonalNoise, params: &GeneralRateParams) -> Result<f64> {
    let h = w.norm(norm);
    let q = w.norm_q(noise)?;
    let GeneralRateParams { r, theta, eta, delta } = *params;
    let first = if h == 0.0 { 0.0 } else { eta * q.powf(theta) * h.powf(r + 1.0 - theta) };
    Ok(first.max(delta * h.powf(1.0 + r)))
}

/// Margin of `2⟨b(u)-b(v), u-v⟩ ≤ -max{…}` for one pair.
pub fn monotonicity_margin(
    u: &SpectralField,
    v: &SpectralField,
    model: &DriftModel,
    noise: &DiagonalNoise,
    params: &GeneralRateParams,
    grid: &QuadratureGrid,
) -> Result<f64> {
    let pairing = drift_pairing_diff(u, v, model, grid)?;
    let bound = monotonicity_bound(&u.sub(v), model.state_norm(), noise, params)?;
    Ok(margin(-pairing, bound))
}

/// Sampled check of the quantitative monotonicity condition on the
/// truncated drift.
#[allow(clippy::too_many_arguments)]
pub fn check_monotonicity_22(
    model: &DriftModel,
    params: &GeneralRateParams,
    noise: &DiagonalNoise,
    n_trials: usize,
    grid: &QuadratureGrid,
    sampler: FieldSampler,
    seed: u64,
    name: &str,
) -> Result<CheckReport> {
    model.validate()?;
    params.validate()?;
    if (model.exponent() - params.r).abs() > 1e-12 {
        return Err(Error::ModelMismatch(format!(
            "drift exponent {} against r = {}",
            model.exponent(),
            params.r
        )));
    }
    let n = noise.len();
    grid.check_modes(n)?;
    let margins = run_ensemble(n_trials as u64, |i| {
        let mut rng = stream_rng(seed, i);
        let (u, v) = sampler.sample(&mut rng, grid.l(), n, i as usize);
        monotonicity_margin(&u, &v, model, noise, params, grid)
    })?;
    let mut rep = CheckReport::new(name, MONOTONICITY_TOLERANCE);
    for m in margins {
        rep.record(m);
    }
    Ok(rep)
}

/// `(δt(r-1)/2)^{2/(1-r)}`.
pub fn contraction_envelope(delta: f64, r: f64, t: f64) -> f64 {
    (delta * t * (r - 1.0) / 2.0).powf(2.0 / (1.0 - r))
}

/// `|X_t - Y_t|_H² ≤ 1.05 · envelope(t)` at every saved `t > 0`.
pub fn check_contraction(delta: f64, r: f64, norm: StateNorm, pairs: &[(PathTrace, PathTrace)]) -> CheckReport {
    let mut rep = CheckReport::new("contraction", 0.0);
    for (x, y) in pairs {
        for ((t, a), b) in x.times.iter().zip(&x.states).zip(&y.states) {
            if *t <= 0.0 {
                continue;
            }
            let d2 = a.sub(b).norm(norm).powi(2);
            rep.record(margin(ENVELOPE_SLACK * contraction_envelope(delta, r, *t), d2));
        }
    }
    rep
}

/// Per-trace checks of a coupling ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingChecks {
    /// `∫|ζ|² ≤ 1.05 ·` pathwise bound.
    pub zeta_energy: CheckReport,
    /// `τ ≤ T`.
    pub coupled: CheckReport,
    /// The ε-distance falls with slope at most `-0.95 εβ` before `τ`.
    pub eps_slope: CheckReport,
    pub zeta_bound: f64,
}

pub const SLOPE_SLACK: f64 = 0.95;

pub fn check_coupling_bounds(traces: &[CouplingTrace], params: &GeneralRateParams, dist: f64) -> CouplingChecks {
    let mut zeta = CheckReport::new("coupling.zeta_energy", 0.0);
    let mut coupled = CheckReport::new("coupling.tau", 0.0);
    let mut slope = CheckReport::new("coupling.eps_slope", 0.0);
    let mut zeta_bound = f64::NAN;
    for tr in traces {
        let bound = zeta_energy_bound(dist, tr.t_end, params.theta, params.r, params.eta);
        zeta_bound = bound;
        zeta.record(if bound == 0.0 && tr.zeta_energy == 0.0 {
            0.0
        } else {
            margin(ENVELOPE_SLACK * bound, tr.zeta_energy)
        });
        coupled.record(match tr.tau {
            Some(tau) => margin(tr.t_end, tau),
            None => -1.0,
        });
        if let Some(s) = tr.max_eps_slope() {
            slope.record(margin(-s, SLOPE_SLACK * tr.eps * tr.beta));
        }
    }
    CouplingChecks {
        zeta_energy: zeta,
        coupled,
        eps_slope: slope,
        zeta_bound,
    }
}

/// Which constants the p-Laplace monotonicity check uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    /// Every check with constants that hold for the truncated drifts.
    Default,
    /// Adds the p-Laplace check at the constants reported by the rate module.
    LooseConstants,
}

/// `(η, δ)` for the p-Laplacian from the sharp scalar inequality
/// `(|a|^{p-2}a - |b|^{p-2}b)(a-b) ≥ 2^{2-p}|a-b|^p`.
pub fn p_laplace_sharp_constants(l: f64, sigma: f64, p: f64) -> (f64, f64) {
    let c = 2f64.powf(3.0 - p);
    (c * (PI * sigma / l).powf(p), c * (PI / l).powf(p))
}

pub fn run_suite(suite: Suite, seed: u64) -> Result<Vec<CheckReport>> {
    let mut out = Vec::new();
    for r in [1.5, 2.0, 3.0] {
        out.push(check_power_inequality(r, 100_000, ScalarSampler::Mixed, seed)?);
    }
    for r in [0.4, 0.5, 0.9] {
        out.push(check_fastdiff_pointwise(r, 100_000, ScalarSampler::Mixed, seed)?);
        out.push(check_holder_chain(r, 200, 8, seed)?);
    }
    out.push(check_sobolev(4.0, PI, 200, 8, seed)?);
    out.push(check_poincare(PI, 1000, 16, seed));

    let n = 16;
    let grid = QuadratureGrid::for_modes(PI, n)?;
    let porous = PorousMediumSpec::new(PI, 1.0, 2.0);
    let pm = porous.params(3.0)?;
    out.push(check_monotonicity_22(
        &DriftModel::Porous { r: 2.0 },
        &pm,
        &DiagonalNoise::scalar(1.0, n)?,
        1000,
        &grid,
        FieldSampler::Mixed,
        seed,
        "monotonicity.porous(r=2)",
    )?);
    let pl_noise = DiagonalNoise::from_law(NoiseLaw::Power { scale: 1.0, exponent: -1.0 }, n)?;
    let (eta, delta) = p_laplace_sharp_constants(PI, 1.0, 4.0);
    out.push(check_monotonicity_22(
        &DriftModel::PLaplace { p: 4.0 },
        &GeneralRateParams::new(3.0, 4.0, eta, delta)?,
        &pl_noise,
        1000,
        &grid,
        FieldSampler::Mixed,
        seed,
        "monotonicity.plaplace(p=4,sharp)",
    )?);
    if suite == Suite::LooseConstants {
        let rates = crate::rates::p_laplace_rates(&crate::rates::PLaplaceSpec::new(PI, 1.0, 4.0))?;
        out.push(check_monotonicity_22(
            &DriftModel::PLaplace { p: 4.0 },
            &rates.params,
            &pl_noise,
            1000,
            &grid,
            FieldSampler::Mixed,
            seed,
            "monotonicity.plaplace(p=4,rates)",
        )?);
    }

    // short simulations
    let n = 8;
    let eq = Equation::new(
        DriftModel::Porous { r: 2.0 },
        DiagonalNoise::scalar(1.0, n)?,
        QuadratureGrid::for_modes(PI, n)?,
    )?;
    let mut cfg = SimConfig::new(n, 5e-3, 2.0, seed);
    cfg.save_every = 10;
    let pairs = run_ensemble(20, |i| {
        let sep = if i % 2 == 0 { 1.0 } else { 10.0 };
        let x0 = SpectralField::mode(PI, n, 1, 0.5 * sep);
        let y0 = SpectralField::mode(PI, n, 1, -0.5 * sep);
        simulate_pair_synchronous(&x0, &y0, &eq, &cfg, i)
    })?;
    out.push(check_contraction(pm.delta, 2.0, StateNorm::NegativeSobolev, &pairs));

    let mut ccfg = SimConfig::new(n, 1e-3, 1.0, seed);
    ccfg.save_every = 1;
    let x0 = SpectralField::mode(PI, n, 1, 0.5);
    let y0 = SpectralField::mode(PI, n, 1, -0.5);
    let traces = run_ensemble(30, |i| simulate_pair_coupled(&x0, &y0, &eq, &ccfg, 3.0, i))?;
    let checks = check_coupling_bounds(&traces, &pm, 1.0);
    out.push(checks.zeta_energy);
    out.push(checks.coupled);
    out.push(checks.eps_slope);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn power_inequality_examples() {
        assert!(power_inequality_margin(1.0, 0.0, 2.0) > 0.0);
        assert_relative_eq!(margin(1.0, 0.5), 0.5);
        assert!(power_inequality_margin(1.0, -1.0, 2.0).abs() < 1e-15);
        for r in [1.5, 2.0, 3.0] {
            for s in [1e-3, 0.7, 5.0, 1e4] {
                assert!(power_inequality_margin(s, -s, r).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn fastdiff_examples() {
        // (2 - 1)·3 = 3 against 0.5·9·4^{-1/2} = 2.25
        assert_relative_eq!(fastdiff_pointwise_margin(4.0, 1.0, 0.5), 0.25);
        assert_eq!(fastdiff_pointwise_margin(2.0, 2.0, 0.5), 0.0);
    }

    #[test]
    fn small_scalar_suites_pass() {
        for r in [1.5, 2.0, 3.0] {
            assert!(check_power_inequality(r, 20_000, ScalarSampler::Mixed, 1).unwrap().passed());
        }
        for r in [0.4, 0.5, 0.9] {
            assert!(check_fastdiff_pointwise(r, 20_000, ScalarSampler::Mixed, 1).unwrap().passed());
        }
        assert!(check_power_inequality(1.0, 10, ScalarSampler::Mixed, 1).is_err());
    }

    #[test]
    fn report_counts_nan_as_violation() {
        let mut r = CheckReport::new("x", 0.0);
        r.record(0.1);
        r.record(f64::NAN);
        assert_eq!(r.n_violations, 1);
        assert!(r.worst_margin.is_nan());
    }

    #[test]
    fn equal_fields_give_zero() {
        let grid = QuadratureGrid::for_modes(PI, 4).unwrap();
        let u = SpectralField::mode(PI, 4, 2, 1.0);
        let noise = DiagonalNoise::scalar(1.0, 4).unwrap();
        let p = GeneralRateParams::new(2.0, 3.0, 1.0, 1.0).unwrap();
        let m = monotonicity_margin(&u, &u, &DriftModel::Porous { r: 2.0 }, &noise, &p, &grid).unwrap();
        assert_eq!(m, 0.0);
    }

    #[test]
    fn porous_monotonicity_small_sample() {
        let n = 8;
        let grid = QuadratureGrid::for_modes(PI, n).unwrap();
        let p = PorousMediumSpec::new(PI, 1.0, 2.0).params(3.0).unwrap();
        let rep = check_monotonicity_22(
            &DriftModel::Porous { r: 2.0 },
            &p,
            &DiagonalNoise::scalar(1.0, n).unwrap(),
            200,
            &grid,
            FieldSampler::Mixed,
            3,
            "porous",
        )
        .unwrap();
        assert!(rep.passed(), "{rep:?}");
    }

    /// First-mode sign flips are the near-tight configuration.
    #[test]
    fn first_mode_flip_margins_are_small() {
        let n = 8;
        let grid = QuadratureGrid::for_modes(PI, n).unwrap();
        let p = PorousMediumSpec::new(PI, 1.0, 2.0).params(3.0).unwrap();
        let noise = DiagonalNoise::scalar(1.0, n).unwrap();
        let model = DriftModel::Porous { r: 2.0 };
        let mut rng = stream_rng(4, 0);
        let flip = (0..50)
            .map(|i| {
                let (u, v) = FieldSampler::FirstModeFlip.sample(&mut rng, PI, n, i);
                monotonicity_margin(&u, &v, &model, &noise, &p, &grid).unwrap()
            })
            .fold(f64::INFINITY, f64::min);
        let iid = (0..50)
            .map(|i| {
                let (u, v) = FieldSampler::IidScaled.sample(&mut rng, PI, n, i);
                monotonicity_margin(&u, &v, &model, &noise, &p, &grid).unwrap()
            })
            .fold(f64::INFINITY, f64::min);
        assert!(flip >= 0.0 && flip < 0.2, "{flip}");
        assert!(iid > flip);
    }

    /// The p-Laplace constants `2^{p-1}(π/l)^p` fail at a first-mode flip,
    /// while `2^{3-p}(π/l)^p` hold.
    #[test]
    fn p_laplace_constants() {
        let n = 8;
        let grid = QuadratureGrid::for_modes(PI, n).unwrap();
        let noise = DiagonalNoise::from_law(NoiseLaw::Power { scale: 1.0, exponent: -1.0 }, n).unwrap();
        let model = DriftModel::PLaplace { p: 4.0 };
        let u = SpectralField::mode(PI, n, 1, 0.5);
        let v = SpectralField::mode(PI, n, 1, -0.5);
        let large = GeneralRateParams::new(3.0, 4.0, 8.0, 8.0).unwrap();
        // pairing -2·∫(cos x √2)^4 dm = -0.75 against a bound of 8
        let pairing = drift_pairing_diff(&u, &v, &model, &grid).unwrap();
        assert_relative_eq!(pairing, -0.75, max_relative = 1e-12);
        assert!(monotonicity_margin(&u, &v, &model, &noise, &large, &grid).unwrap() < -0.5);
        let (eta, delta) = p_laplace_sharp_constants(PI, 1.0, 4.0);
        assert_relative_eq!(eta, 0.5);
        let sharp = GeneralRateParams::new(3.0, 4.0, eta, delta).unwrap();
        let rep = check_monotonicity_22(&model, &sharp, &noise, 200, &grid, FieldSampler::Mixed, 5, "pl").unwrap();
        assert!(rep.passed(), "{rep:?}");
    }

    #[test]
    fn holder_chain_small() {
        for r in [0.4, 0.5, 0.9] {
            let rep = check_holder_chain(r, 50, 8, 2).unwrap();
            assert!(rep.passed(), "{rep:?}");
        }
    }

    #[test]
    fn sobolev_and_poincare() {
        assert!(check_sobolev(4.0, PI, 100, 8, 1).unwrap().passed());
        assert!(check_sobolev(3.0, 2.0, 100, 8, 1).unwrap().passed());
        let rep = check_poincare(PI, 100, 8, 1);
        assert!(rep.passed());
        assert!(rep.worst_margin.abs() < 1e-12);
    }

    #[test]
    fn envelope_examples() {
        assert_relative_eq!(contraction_envelope(1.0, 2.0, 1.0), 4.0);
        assert!(contraction_envelope(1.0, 2.0, 1e-8) > 1e15);
    }

    #[test]
    fn coupling_report_flags_late_trace() {
        let p = GeneralRateParams::new(2.0, 3.0, 1.0, 1.0).unwrap();
        let tr = CouplingTrace {
            eps: 0.4,
            beta: 2.5,
            tau: None,
            t_end: 1.0,
            times: vec![0.0, 1.0],
            dist_eps: vec![1.0, 0.5],
            zeta_energy: 1.0,
            log_weight: 0.0,
            substeps: 0,
        };
        let c = check_coupling_bounds(&[tr], &p, 1.0);
        assert_eq!(c.coupled.n_violations, 1);
        assert_eq!(c.eps_slope.n_violations, 1);
        assert_eq!(c.zeta_energy.n_violations, 0);
        assert_relative_eq!(c.zeta_bound, 11.51, max_relative = 1e-3);
    }
}
