//! Monte Carlo estimates of invariant functionals, empirical decay rates and
//! Lyapunov curves.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{run_ensemble, step, stream_rng, wiener_increment, Drift, Equation, SimConfig};
use crate::rates::{fast_diffusion_admissible, FastDiffusionSpec};
use crate::spectral::{eigenvalue, DiagonalNoise, DriftModel, SpectralField};
use crate::stats::{batch_means, mean_se, weighted_line, MeanSe};
use crate::{Error, Result};

/// Functionals `f` whose expectations are tracked along paths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestFunctional {
    /// `⟨x, e_k⟩_H = c_k/λ_k`.
    ModeH { k: usize },
    /// `tanh(⟨x, e_k⟩_H / scale)`.
    TanhModeH { k: usize, scale: f64 },
    /// `|x|_H²`.
    NormHSquared,
}

impl TestFunctional {
    pub fn eval(&self, x: &SpectralField) -> f64 {
        match *self {
            TestFunctional::ModeH { k } => x.coeffs[k - 1] / x.eigenvalue(k),
            TestFunctional::TanhModeH { k, scale } => (x.coeffs[k - 1] / x.eigenvalue(k) / scale).tanh(),
            TestFunctional::NormHSquared => x.norm_h().powi(2),
        }
    }

    fn check(&self, n: usize) -> Result<()> {
        match *self {
            TestFunctional::ModeH { k } | TestFunctional::TanhModeH { k, .. } if k == 0 || k > n => {
                Err(Error::domain(format!("mode {k} outside 1..={n}")))
            }
            TestFunctional::TanhModeH { scale, .. } if !(scale > 0.0) => {
                Err(Error::domain("tanh scale must be positive"))
            }
            _ => Ok(()),
        }
    }
}

fn advance<D: Drift, R: Rng>(
    x: &mut SpectralField,
    eq: &Equation<D>,
    cfg: &SimConfig,
    steps: usize,
    rng: &mut R,
) -> Result<()> {
    for _ in 0..steps {
        let dw = wiener_increment(&eq.noise, eq.l(), cfg.dt, rng);
        *x = step(x, eq, cfg, &dw)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InvariantPlan {
    /// Burn-in time per chain.
    pub burn_in: f64,
    pub n_samples: usize,
    /// Time between kept samples.
    pub thinning: f64,
    /// Independent chains, each on its own stream.
    pub chains: usize,
    /// A known lower bound on the mixing rate; burn-in must cover `5/rate`.
    pub prior_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantSample {
    pub samples: Vec<SpectralField>,
    /// `μ̂(|·|_H²)` with a batch-means standard error.
    pub norm_h_sq: MeanSe,
}

impl InvariantSample {
    /// `μ̂(f)` with a batch-means standard error.
    pub fn estimate(&self, f: &TestFunctional) -> MeanSe {
        let v: Vec<f64> = self.samples.iter().map(|x| f.eval(x)).collect();
        batch_means(&v, 20)
    }
}

/// Long-run samples of the invariant law from `x0`. Chain `i` runs on
/// stream `run_offset + i`.
pub fn sample_invariant<D: Drift>(
    x0: &SpectralField,
    eq: &Equation<D>,
    cfg: &SimConfig,
    plan: &InvariantPlan,
    run_offset: u64,
) -> Result<InvariantSample> {
    cfg.validate()?;
    if plan.chains == 0 || plan.n_samples < plan.chains {
        return Err(Error::domain("need at least one sample per chain"));
    }
    if !(plan.burn_in >= 0.0) || !(plan.thinning >= cfg.dt) {
        return Err(Error::domain("burn-in must be nonnegative and thinning at least dt"));
    }
    if let Some(rate) = plan.prior_rate {
        if plan.burn_in < 5.0 / rate {
            return Err(Error::domain(format!(
                "burn-in {} is shorter than 5/λ = {}",
                plan.burn_in,
                5.0 / rate
            )));
        }
    }
    let burn = (plan.burn_in / cfg.dt).round() as usize;
    let thin = ((plan.thinning / cfg.dt).round() as usize).max(1);
    let per_chain = plan.n_samples.div_ceil(plan.chains);
    let chains = run_ensemble(plan.chains as u64, |i| {
        let mut rng = stream_rng(cfg.seed, run_offset + i);
        let mut x = x0.clone();
        advance(&mut x, eq, cfg, burn, &mut rng)?;
        let mut out = Vec::with_capacity(per_chain);
        for _ in 0..per_chain {
            advance(&mut x, eq, cfg, thin, &mut rng)?;
            out.push(x.clone());
        }
        Ok(out)
    })?;
    let samples: Vec<SpectralField> = chains.into_iter().flatten().take(plan.n_samples).collect();
    let h2: Vec<f64> = samples.iter().map(|x| x.norm_h().powi(2)).collect();
    Ok(InvariantSample {
        norm_h_sq: batch_means(&h2, 20),
        samples,
    })
}

/// Ensemble means of `f(X_t^x)` at the saved times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayCurve {
    pub times: Vec<f64>,
    pub means: Vec<f64>,
    pub ses: Vec<f64>,
    pub mu_hat: MeanSe,
    /// `|mean - μ̂(f)|`.
    pub signal: Vec<f64>,
    /// Standard error of `signal`, combining both estimates.
    pub signal_se: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayEstimate {
    pub curve: DecayCurve,
    pub fitted_rate: f64,
    pub rate_se: f64,
    pub window: (f64, f64),
    pub window_points: usize,
}

pub const MIN_WINDOW_POINTS: usize = 3;
pub const WINDOW_SE_MULTIPLE: f64 = 3.0;

/// `f` along `n_paths` paths from `x0`; path `i` uses stream `run_offset + i`.
pub fn decay_curve<D: Drift>(
    f: &TestFunctional,
    x0: &SpectralField,
    eq: &Equation<D>,
    cfg: &SimConfig,
    n_paths: usize,
    mu_hat: MeanSe,
    run_offset: u64,
) -> Result<DecayCurve> {
    cfg.validate()?;
    f.check(eq.n_modes())?;
    if n_paths < 2 {
        return Err(Error::domain("need at least two paths"));
    }
    let saves = cfg.steps() / cfg.save_every;
    let paths = run_ensemble(n_paths as u64, |i| {
        let mut rng = stream_rng(cfg.seed, run_offset + i);
        let mut x = x0.clone();
        let mut vals = Vec::with_capacity(saves + 1);
        vals.push(f.eval(&x));
        for _ in 0..saves {
            advance(&mut x, eq, cfg, cfg.save_every, &mut rng)?;
            vals.push(f.eval(&x));
        }
        Ok(vals)
    })?;
    let mut curve = DecayCurve {
        times: Vec::with_capacity(saves + 1),
        means: Vec::new(),
        ses: Vec::new(),
        mu_hat,
        signal: Vec::new(),
        signal_se: Vec::new(),
    };
    for j in 0..=saves {
        let col: Vec<f64> = paths.iter().map(|p| p[j]).collect();
        let s = mean_se(&col);
        curve.times.push((j * cfg.save_every) as f64 * cfg.dt);
        curve.means.push(s.mean);
        curve.ses.push(s.se);
        curve.signal.push((s.mean - mu_hat.mean).abs());
        curve.signal_se.push(s.se.hypot(mu_hat.se));
    }
    Ok(curve)
}

/// Weighted log-linear fit on the first contiguous window (after `t = 0`)
/// where the signal exceeds three standard errors.
pub fn fit_decay(curve: DecayCurve) -> Result<DecayEstimate> {
    let start = (0..curve.times.len())
        .find(|&i| curve.times[i] > 0.0 && curve.signal[i] > WINDOW_SE_MULTIPLE * curve.signal_se[i])
        .ok_or_else(|| Error::EmptyWindow("the signal never exceeds 3 SE".into()))?;
    let mut end = start;
    while end + 1 < curve.times.len() && curve.signal[end + 1] > WINDOW_SE_MULTIPLE * curve.signal_se[end + 1] {
        end += 1;
    }
    let n = end - start + 1;
    if n < MIN_WINDOW_POINTS {
        return Err(Error::EmptyWindow(format!(
            "only {n} points above 3 SE starting at t = {}",
            curve.times[start]
        )));
    }
    let idx = start..=end;
    let x: Vec<f64> = curve.times[idx.clone()].to_vec();
    let y: Vec<f64> = curve.signal[idx.clone()].iter().map(|s| s.ln()).collect();
    // delta method: var(ln s) ≈ (se/s)²
    let w: Vec<f64> = idx
        .map(|i| {
            let rel = curve.signal_se[i] / curve.signal[i];
            1.0 / rel.max(1e-12).powi(2)
        })
        .collect();
    let fit = weighted_line(&x, &y, &w).ok_or_else(|| Error::EmptyWindow("degenerate time window".into()))?;
    Ok(DecayEstimate {
        fitted_rate: -fit.slope,
        rate_se: fit.slope_se,
        window: (x[0], x[n - 1]),
        window_points: n,
        curve,
    })
}

pub fn estimate_decay<D: Drift>(
    f: &TestFunctional,
    x0: &SpectralField,
    eq: &Equation<D>,
    cfg: &SimConfig,
    n_paths: usize,
    mu_hat: MeanSe,
    run_offset: u64,
) -> Result<DecayEstimate> {
    fit_decay(decay_curve(f, x0, eq, cfg, n_paths, mu_hat, run_offset)?)
}

/// `V(x) = exp[γ(1 + |x|_H²)^{(1-r)/2}]`.
pub fn lyapunov_value(x: &SpectralField, gamma: f64, r: f64) -> f64 {
    (gamma * (1.0 + x.norm_h().powi(2)).powf(0.5 * (1.0 - r))).exp()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovCurve {
    pub gamma: f64,
    pub r: f64,
    pub v0: f64,
    pub times: Vec<f64>,
    pub means: Vec<f64>,
    pub ses: Vec<f64>,
    /// Fitted drift bound `E V(X_t) ≤ k V(x) e^{-βt} + c` with `k = 1`.
    pub k: f64,
    pub beta: f64,
    pub c: f64,
    /// Largest `(mean - bound)/se` over the sampled times.
    pub worst_excess: f64,
    /// Bound holds within 3 SE at every time.
    pub bound_holds: bool,
}

/// Equation for a fast-diffusion spec with its constructive noise.
pub fn fast_diffusion_equation(spec: &FastDiffusionSpec, n_modes: usize, points: usize) -> Result<Equation> {
    let grid = crate::spectral::QuadratureGrid::new(spec.l, points)?;
    let noise = DiagonalNoise::from_law(spec.noise_law(), n_modes)?;
    Equation::new(DriftModel::FastDiffusion { r: spec.r }, noise, grid)
}

/// `E V(X_t^{x0})` for the fast-diffusion equation with a fitted `(β, c)`.
pub fn lyapunov_curve(
    spec: &FastDiffusionSpec,
    cfg: &SimConfig,
    x0: &SpectralField,
    n_paths: usize,
    run_offset: u64,
) -> Result<LyapunovCurve> {
    let adm = fast_diffusion_admissible(spec);
    if !adm.admissible {
        return Err(Error::domain(format!("inadmissible spec: {}", adm.reasons.join("; "))));
    }
    if !(spec.gamma > 0.0) {
        return Err(Error::domain("γ must be positive"));
    }
    cfg.validate()?;
    let eq = fast_diffusion_equation(spec, cfg.n_modes, cfg.points)?;
    let (gamma, r) = (spec.gamma, spec.r);
    let saves = cfg.steps() / cfg.save_every;
    let paths = run_ensemble(n_paths as u64, |i| {
        let mut rng = stream_rng(cfg.seed, run_offset + i);
        let mut x = x0.clone();
        let mut vals = vec![lyapunov_value(&x, gamma, r)];
        for _ in 0..saves {
            advance(&mut x, &eq, cfg, cfg.save_every, &mut rng)?;
            vals.push(lyapunov_value(&x, gamma, r));
        }
        Ok(vals)
    })?;
    let times: Vec<f64> = (0..=saves).map(|j| (j * cfg.save_every) as f64 * cfg.dt).collect();
    let (mut means, mut ses) = (Vec::new(), Vec::new());
    for j in 0..=saves {
        let col: Vec<f64> = paths.iter().map(|p| p[j]).collect();
        let s = mean_se(&col);
        means.push(s.mean);
        ses.push(s.se);
    }
    let v0 = lyapunov_value(x0, gamma, r);
    let (beta, c) = fit_lyapunov(&times, &means, &ses, v0);
    let worst_excess = times
        .iter()
        .zip(&means)
        .zip(&ses)
        .map(|((t, m), s)| (m - (v0 * (-beta * t).exp() + c)) / s.max(f64::MIN_POSITIVE))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(LyapunovCurve {
        gamma,
        r,
        v0,
        times,
        means,
        ses,
        k: 1.0,
        beta,
        c,
        worst_excess,
        bound_holds: worst_excess <= 3.0,
    })
}

/// Weighted least squares for `m(t) ≈ v0 e^{-βt} + c`.
///
/// For fixed `β` the optimal `c` is a weighted mean, so only `β` is searched:
/// a log grid over `[1e-3, 1e3]`, then golden-section refinement in `ln β`.
pub fn fit_lyapunov(times: &[f64], means: &[f64], ses: &[f64], v0: f64) -> (f64, f64) {
    // the start is deterministic and matches every (β, c = 0); it carries no weight
    let mut w: Vec<f64> = ses
        .iter()
        .zip(means)
        .map(|(&s, &m)| if s > 1e-12 * m.abs() { 1.0 / (s * s) } else { 0.0 })
        .collect();
    if w.iter().all(|&x| x == 0.0) {
        w = vec![1.0; ses.len()];
    }
    let sw: f64 = w.iter().sum();
    let profile = |lb: f64| -> (f64, f64) {
        let beta = lb.exp();
        let resid: Vec<f64> = times.iter().zip(means).map(|(t, m)| m - v0 * (-beta * t).exp()).collect();
        let c = resid.iter().zip(&w).map(|(r, w)| r * w).sum::<f64>() / sw;
        let ss = resid.iter().zip(&w).map(|(r, w)| w * (r - c).powi(2)).sum();
        (ss, c)
    };
    let (lo, hi, n) = (1e-3f64.ln(), 1e3f64.ln(), 400);
    let grid: Vec<f64> = (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect();
    let best = (0..=n)
        .min_by(|&a, &b| profile(grid[a]).0.total_cmp(&profile(grid[b]).0))
        .unwrap_or(0);
    let (mut a, mut b) = (grid[best.saturating_sub(1)], grid[(best + 1).min(n)]);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let (mut f1, mut f2) = (profile(x1).0, profile(x2).0);
    while b - a > 1e-10 {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = profile(x1).0;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = profile(x2).0;
        }
    }
    let lb = 0.5 * (a + b);
    (lb.exp(), profile(lb).1)
}

/// Mean and variance of mode `k` of the heat equation with `Q = σI`,
/// `dc_k = -λ_k c_k dt + σ dB_k`.
pub fn ou_exact(l: f64, sigma: f64, k: usize, t: f64, x0_k: f64) -> Result<(f64, f64)> {
    let lam = eigenvalue(k, l)?;
    if !(sigma > 0.0) || !(t >= 0.0) {
        return Err(Error::domain("need σ > 0 and t ≥ 0"));
    }
    let var = if t.is_infinite() {
        sigma * sigma / (2.0 * lam)
    } else {
        sigma * sigma * -(-2.0 * lam * t).exp_m1() / (2.0 * lam)
    };
    Ok((x0_k * (-lam * t).exp(), var))
}

/// Check that `f` stays flat along paths started from invariant samples:
/// the largest `|mean_t - μ̂(f)|` in units of its standard error.
pub fn stationarity_z<D: Drift>(
    f: &TestFunctional,
    starts: &[SpectralField],
    eq: &Equation<D>,
    cfg: &SimConfig,
    mu_hat: MeanSe,
    run_offset: u64,
) -> Result<f64> {
    cfg.validate()?;
    f.check(eq.n_modes())?;
    let saves = cfg.steps() / cfg.save_every;
    let paths = run_ensemble(starts.len() as u64, |i| {
        let mut rng = stream_rng(cfg.seed, run_offset + i);
        let mut x = starts[i as usize].clone();
        let mut vals = Vec::with_capacity(saves);
        for _ in 0..saves {
            advance(&mut x, eq, cfg, cfg.save_every, &mut rng)?;
            vals.push(f.eval(&x));
        }
        Ok(vals)
    })?;
    let z = (0..saves)
        .map(|j| {
            let col: Vec<f64> = paths.iter().map(|p| p[j]).collect();
            let s = mean_se(&col);
            (s.mean - mu_hat.mean).abs() / s.se.hypot(mu_hat.se)
        })
        .fold(0.0, f64::max);
    Ok(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn ou_examples() {
        assert_eq!(ou_exact(PI, 1.0, 1, 0.0, 0.7).unwrap(), (0.7, 0.0));
        let (m, v) = ou_exact(PI, 1.0, 1, f64::INFINITY, 0.7).unwrap();
        assert_eq!(m, 0.0);
        assert_relative_eq!(v, 0.5);
        let (m, v) = ou_exact(PI, 1.0, 2, 1.0, 2.0).unwrap();
        assert_relative_eq!(m, 2.0 * (-4.0f64).exp(), max_relative = 1e-14);
        assert_relative_eq!(v, (1.0 - (-8.0f64).exp()) / 8.0, max_relative = 1e-14);
        assert!(ou_exact(PI, 1.0, 0, 1.0, 0.0).is_err());
        assert!(ou_exact(0.0, 1.0, 1, 1.0, 0.0).is_err());
    }

    #[test]
    fn lyapunov_at_origin() {
        let z = SpectralField::zeros(PI, 4);
        assert_relative_eq!(lyapunov_value(&z, 1.0, 0.5), std::f64::consts::E);
    }

    #[test]
    fn lyapunov_fit_recovers_exponential() {
        let times: Vec<f64> = (0..50).map(|i| i as f64 * 0.2).collect();
        let means: Vec<f64> = times.iter().map(|t| 10.0 * (-0.8 * t).exp() + 2.5).collect();
        let ses = vec![0.01; 50];
        let (beta, c) = fit_lyapunov(&times, &means, &ses, 10.0);
        assert_relative_eq!(beta, 0.8, max_relative = 1e-6);
        assert_relative_eq!(c, 2.5, max_relative = 1e-6);
    }

    #[test]
    fn decay_fit_on_exact_curve() {
        let times: Vec<f64> = (0..40).map(|i| i as f64 * 0.1).collect();
        let signal: Vec<f64> = times.iter().map(|t| 3.0 * (-1.3 * t).exp()).collect();
        let mut se = vec![0.01; 40];
        // the signal falls below 3 SE from index 30 onwards
        for s in se.iter_mut().skip(30) {
            *s = 1.0;
        }
        let curve = DecayCurve {
            means: signal.clone(),
            ses: se.clone(),
            mu_hat: MeanSe { mean: 0.0, se: 0.0, n: 1 },
            signal,
            signal_se: se,
            times,
        };
        let est = fit_decay(curve).unwrap();
        assert_relative_eq!(est.fitted_rate, 1.3, max_relative = 1e-10);
        assert_eq!(est.window_points, 29);
        assert_relative_eq!(est.window.0, 0.1);
    }

    #[test]
    fn flat_curve_declines_fit() {
        let times: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let curve = DecayCurve {
            means: vec![0.0; 10],
            ses: vec![1.0; 10],
            mu_hat: MeanSe { mean: 0.0, se: 0.1, n: 10 },
            signal: vec![0.5; 10],
            signal_se: vec![1.0; 10],
            times,
        };
        assert!(matches!(fit_decay(curve), Err(Error::EmptyWindow(_))));
    }

    #[test]
    fn functional_bounds_checked() {
        assert!(TestFunctional::ModeH { k: 5 }.check(4).is_err());
        assert!(TestFunctional::TanhModeH { k: 1, scale: 0.0 }.check(4).is_err());
        let x = SpectralField::new(2.0 * PI, vec![0.5, 1.0]).unwrap();
        assert_relative_eq!(TestFunctional::ModeH { k: 2 }.eval(&x), 1.0);
        assert_relative_eq!(TestFunctional::NormHSquared.eval(&x), 0.25 / 0.25 + 1.0);
    }
}
