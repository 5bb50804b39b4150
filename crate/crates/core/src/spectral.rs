//! Fields on `(0, l)` in the Dirichlet eigenbasis of `-Δ`.
//!
//! The basis is `e_k(x) = √2 sin(kπx/l)`, orthonormal in `L²(m)` where `m` is
//! the normalised Lebesgue measure, with eigenvalues `λ_k = π²k²/l²`. A
//! [`SpectralField`] stores the `L²(m)` coefficients `c_k = ⟨x, e_k⟩`; its
//! `H⁻¹` norm is `Σ c_k²/λ_k`.
//!
//! Nonlinear drifts are evaluated pseudo-spectrally on a [`QuadratureGrid`]
//! and projected back onto the first `N` modes.

use std::f64::consts::{PI, SQRT_2};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Grid points needed per resolved mode.
pub const DEALIAS_FACTOR: usize = 4;

/// `λ_k = π²k²/l²`.
pub fn eigenvalue(k: usize, l: f64) -> Result<f64> {
    if k < 1 {
        return Err(Error::domain("eigenvalue index starts at 1"));
    }
    if !(l > 0.0) || !l.is_finite() {
        return Err(Error::domain(format!("l = {l} must be positive")));
    }
    Ok(eig(k, l))
}

#[inline]
fn eig(k: usize, l: f64) -> f64 {
    let a = PI * k as f64 / l;
    a * a
}

/// Uniform trapezoid rule on `[0, l]` against `m`, with cached basis tables.
///
/// The rule integrates `cos(nπx/l)` exactly for `n < 2(M-1)`, so products of
/// two resolved modes are integrated without error.
#[derive(Debug, Clone)]
pub struct QuadratureGrid {
    l: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    max_modes: usize,
    /// `e_k(x_j)` at `(k-1) * M + j`.
    basis: Vec<f64>,
    /// `e_k'(x_j)` at `(k-1) * M + j`.
    basis_deriv: Vec<f64>,
}

impl QuadratureGrid {
    pub fn new(l: f64, points: usize) -> Result<Self> {
        if !(l > 0.0) || !l.is_finite() {
            return Err(Error::domain(format!("l = {l} must be positive")));
        }
        if points < DEALIAS_FACTOR {
            return Err(Error::Aliasing {
                modes: 1,
                points,
                needed: DEALIAS_FACTOR,
            });
        }
        let h = 1.0 / (points - 1) as f64;
        let nodes: Vec<f64> = (0..points).map(|j| l * j as f64 * h).collect();
        let mut weights = vec![h; points];
        weights[0] *= 0.5;
        weights[points - 1] *= 0.5;

        let max_modes = points / DEALIAS_FACTOR;
        let mut basis = Vec::with_capacity(max_modes * points);
        let mut basis_deriv = Vec::with_capacity(max_modes * points);
        for k in 1..=max_modes {
            let w = PI * k as f64 / l;
            for &x in &nodes {
                basis.push(SQRT_2 * (w * x).sin());
                basis_deriv.push(SQRT_2 * w * (w * x).cos());
            }
        }
        Ok(Self {
            l,
            nodes,
            weights,
            max_modes,
            basis,
            basis_deriv,
        })
    }

    /// Grid paired with `n` modes at the minimal dealiasing margin.
    pub fn for_modes(l: f64, n: usize) -> Result<Self> {
        Self::new(l, DEALIAS_FACTOR * n.max(1))
    }

    pub fn l(&self) -> f64 {
        self.l
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Largest mode count this grid resolves.
    pub fn max_modes(&self) -> usize {
        self.max_modes
    }

    pub fn check_modes(&self, n: usize) -> Result<()> {
        if n > self.max_modes {
            return Err(Error::Aliasing {
                modes: n,
                points: self.len(),
                needed: DEALIAS_FACTOR * n,
            });
        }
        Ok(())
    }

    fn check_field(&self, field: &SpectralField) -> Result<()> {
        if (field.l - self.l).abs() > 1e-12 * self.l {
            return Err(Error::ModelMismatch(format!(
                "field on (0, {}) paired with grid on (0, {})",
                field.l, self.l
            )));
        }
        self.check_modes(field.n_modes())
    }

    #[inline]
    fn row(&self, k: usize) -> &[f64] {
        let m = self.len();
        &self.basis[(k - 1) * m..k * m]
    }

    #[inline]
    fn deriv_row(&self, k: usize) -> &[f64] {
        let m = self.len();
        &self.basis_deriv[(k - 1) * m..k * m]
    }

    /// `∫ f dm` for nodal values `f`.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }

    fn sum_rows(&self, coeffs: &[f64], deriv: bool) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        for (i, &c) in coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let row = if deriv {
                self.deriv_row(i + 1)
            } else {
                self.row(i + 1)
            };
            for (o, b) in out.iter_mut().zip(row) {
                *o += c * b;
            }
        }
        out
    }

    /// `∫ g h_k dm` for `k = 1..=n` where `h_k` is `e_k` or `e_k'`.
    fn project(&self, values: &[f64], n: usize, deriv: bool) -> Vec<f64> {
        let wv: Vec<f64> = self.weights.iter().zip(values).map(|(w, v)| w * v).collect();
        (1..=n)
            .map(|k| {
                let row = if deriv { self.deriv_row(k) } else { self.row(k) };
                row.iter().zip(&wv).map(|(b, x)| b * x).sum()
            })
            .collect()
    }

    /// `G_{ij} = ∫ ρ h_i h_j dm` for nodal weights `ρ`.
    fn weighted_gram(&self, rho: &[f64], n: usize, deriv: bool) -> DMatrix<f64> {
        let rows: Vec<&[f64]> = (1..=n)
            .map(|k| if deriv { self.deriv_row(k) } else { self.row(k) })
            .collect();
        let wr: Vec<f64> = self.weights.iter().zip(rho).map(|(w, r)| w * r).collect();
        let mut g = DMatrix::zeros(n, n);
        for i in 0..n {
            let scaled: Vec<f64> = rows[i].iter().zip(&wr).map(|(b, w)| b * w).collect();
            for j in i..n {
                let v: f64 = scaled.iter().zip(rows[j]).map(|(a, b)| a * b).sum();
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        g
    }
}

/// A field `Σ c_k e_k` truncated to `N` modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralField {
    pub l: f64,
    pub coeffs: Vec<f64>,
}

/// Which Hilbert norm plays the role of `|·|_H` for a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StateNorm {
    /// `H⁻¹`: `Σ c_k²/λ_k` (porous medium, fast diffusion, linear).
    NegativeSobolev,
    /// `L²(m)`: `Σ c_k²` (p-Laplace).
    L2,
}

impl SpectralField {
    pub fn new(l: f64, coeffs: Vec<f64>) -> Result<Self> {
        if !(l > 0.0) || !l.is_finite() {
            return Err(Error::domain(format!("l = {l} must be positive")));
        }
        if coeffs.is_empty() {
            return Err(Error::domain("a field needs at least one mode"));
        }
        if let Some(i) = coeffs.iter().position(|c| !c.is_finite()) {
            return Err(Error::domain(format!("coefficient {} is not finite", i + 1)));
        }
        Ok(Self { l, coeffs })
    }

    pub fn zeros(l: f64, n: usize) -> Self {
        Self {
            l,
            coeffs: vec![0.0; n],
        }
    }

    /// `amplitude · e_k`.
    pub fn mode(l: f64, n: usize, k: usize, amplitude: f64) -> Self {
        let mut f = Self::zeros(l, n);
        f.coeffs[k - 1] = amplitude;
        f
    }

    pub fn n_modes(&self) -> usize {
        self.coeffs.len()
    }

    pub fn eigenvalue(&self, k: usize) -> f64 {
        eig(k, self.l)
    }

    pub fn inner_h(&self, other: &Self) -> f64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .enumerate()
            .map(|(i, (a, b))| a * b / eig(i + 1, self.l))
            .sum()
    }

    pub fn norm_h(&self) -> f64 {
        self.inner_h(self).sqrt()
    }

    /// By Parseval, `‖f‖₂² = Σ c_k²`.
    pub fn norm_l2(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    /// `‖f'‖₂² = Σ λ_k c_k²`.
    pub fn norm_grad_l2(&self) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| eig(i + 1, self.l) * c * c)
            .sum::<f64>()
            .sqrt()
    }

    pub fn norm_lq(&self, q: f64, grid: &QuadratureGrid) -> Result<f64> {
        if !(q >= 1.0) {
            return Err(Error::domain(format!("L^q norm needs q ≥ 1, got {q}")));
        }
        let u = synthesize(self, grid)?;
        let v: Vec<f64> = u.iter().map(|x| x.abs().powf(q)).collect();
        Ok(grid.integrate(&v).powf(1.0 / q))
    }

    /// `‖f‖_Q² = Σ c_k²/q_k²` for diagonal `Q`.
    pub fn norm_q(&self, noise: &DiagonalNoise) -> Result<f64> {
        if noise.len() < self.n_modes() {
            return Err(Error::ModelMismatch(format!(
                "noise has {} modes, field {}",
                noise.len(),
                self.n_modes()
            )));
        }
        Ok(self
            .coeffs
            .iter()
            .zip(&noise.q)
            .map(|(c, q)| (c / q).powi(2))
            .sum::<f64>()
            .sqrt())
    }

    pub fn norm(&self, which: StateNorm) -> f64 {
        match which {
            StateNorm::NegativeSobolev => self.norm_h(),
            StateNorm::L2 => self.norm_l2(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            l: self.l,
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            l: self.l,
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            l: self.l,
            coeffs: self.coeffs.iter().map(|c| s * c).collect(),
        }
    }

    /// `self += a · x`
    pub fn axpy(&mut self, a: f64, x: &Self) {
        for (c, v) in self.coeffs.iter_mut().zip(&x.coeffs) {
            *c += a * v;
        }
    }

    fn same_shape(&self, other: &Self) -> Result<()> {
        if self.n_modes() != other.n_modes() || (self.l - other.l).abs() > 1e-12 * self.l {
            return Err(Error::ModelMismatch(format!(
                "fields with (N, l) = ({}, {}) and ({}, {})",
                self.n_modes(),
                self.l,
                other.n_modes(),
                other.l
            )));
        }
        Ok(())
    }
}

/// Law of the diagonal noise coefficients `q_i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum NoiseLaw {
    /// `q_i ≡ σ`.
    Scalar(f64),
    /// `q_i = scale · i^exponent`.
    Power { scale: f64, exponent: f64 },
}

impl NoiseLaw {
    pub fn coefficient(&self, i: usize) -> f64 {
        match *self {
            NoiseLaw::Scalar(s) => s,
            NoiseLaw::Power { scale, exponent } => scale * (i as f64).powf(exponent),
        }
    }

    /// `Σ q_i² < ∞`.
    pub fn square_summable(&self) -> bool {
        match *self {
            NoiseLaw::Scalar(s) => s == 0.0,
            NoiseLaw::Power { exponent, .. } => 2.0 * exponent < -1.0,
        }
    }

    /// `Σ q_i²/λ_i < ∞`, i.e. `Q` is Hilbert-Schmidt into `H⁻¹`.
    pub fn hilbert_schmidt_negative_sobolev(&self) -> bool {
        match *self {
            NoiseLaw::Scalar(_) => true,
            NoiseLaw::Power { exponent, .. } => 2.0 * exponent - 2.0 < -1.0,
        }
    }
}

/// Diagonal noise `Q e_k = q_k e_k` restricted to the first `N` modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagonalNoise {
    q: Vec<f64>,
}

impl DiagonalNoise {
    pub fn new(q: Vec<f64>) -> Result<Self> {
        if q.is_empty() {
            return Err(Error::domain("noise needs at least one mode"));
        }
        if let Some(i) = q.iter().position(|v| *v == 0.0 || !v.is_finite()) {
            return Err(Error::domain(format!(
                "q_{} = {} but Ker Q must be trivial",
                i + 1,
                q[i]
            )));
        }
        Ok(Self { q })
    }

    pub fn scalar(sigma: f64, n: usize) -> Result<Self> {
        Self::new(vec![sigma; n])
    }

    pub fn from_law(law: NoiseLaw, n: usize) -> Result<Self> {
        Self::new((1..=n).map(|i| law.coefficient(i)).collect())
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    /// Truncated `‖Q‖²_{HS(L², H⁻¹)} = Σ q_k²/λ_k`.
    pub fn hs_norm_sq(&self, l: f64) -> f64 {
        self.q
            .iter()
            .enumerate()
            .map(|(i, q)| q * q / eig(i + 1, l))
            .sum()
    }

    /// `max_k q_k²/λ_k`, the squared operator norm `‖Q‖²_{L² → H⁻¹}`.
    pub fn op_norm_sq(&self, l: f64) -> f64 {
        self.q
            .iter()
            .enumerate()
            .map(|(i, q)| q * q / eig(i + 1, l))
            .fold(0.0, f64::max)
    }
}

/// Nodal values `f(x_j)`.
pub fn synthesize(field: &SpectralField, grid: &QuadratureGrid) -> Result<Vec<f64>> {
    grid.check_field(field)?;
    Ok(grid.sum_rows(&field.coeffs, false))
}

/// Nodal values of `f'`, a cosine series.
pub fn synthesize_gradient(field: &SpectralField, grid: &QuadratureGrid) -> Result<Vec<f64>> {
    grid.check_field(field)?;
    Ok(grid.sum_rows(&field.coeffs, true))
}

/// First `n` coefficients `∫ g e_k dm` of nodal data `g`.
pub fn analyze(values: &[f64], grid: &QuadratureGrid, n: usize) -> Result<SpectralField> {
    grid.check_modes(n)?;
    if values.len() != grid.len() {
        return Err(Error::ModelMismatch(format!(
            "{} nodal values on a {}-point grid",
            values.len(),
            grid.len()
        )));
    }
    Ok(SpectralField {
        l: grid.l(),
        coeffs: grid.project(values, n, false),
    })
}

/// `|s|^{r-1} s`, with the value 0 at `s = 0` for every `r > 0`.
#[inline]
pub fn signed_power(s: f64, r: f64) -> f64 {
    if s == 0.0 {
        0.0
    } else {
        s.abs().powf(r - 1.0) * s
    }
}

/// Galerkin projection of `Δ(u^r)`: coefficients `-λ_k ⟨u^r, e_k⟩`.
pub fn drift_porous(field: &SpectralField, r: f64, grid: &QuadratureGrid) -> Result<SpectralField> {
    let u = synthesize(field, grid)?;
    let g: Vec<f64> = u.iter().map(|&x| signed_power(x, r)).collect();
    let mut out = analyze(&g, grid, field.n_modes())?;
    for (i, c) in out.coeffs.iter_mut().enumerate() {
        *c *= -eig(i + 1, field.l);
    }
    Ok(out)
}

/// Galerkin projection of `(|u'|^{p-2} u')'`: coefficients
/// `-∫ |u'|^{p-2} u' e_k' dm`.
pub fn drift_plaplace(field: &SpectralField, p: f64, grid: &QuadratureGrid) -> Result<SpectralField> {
    let du = synthesize_gradient(field, grid)?;
    let g: Vec<f64> = du.iter().map(|&x| signed_power(x, p - 1.0)).collect();
    let coeffs = grid.project(&g, field.n_modes(), true);
    Ok(SpectralField {
        l: field.l,
        coeffs: coeffs.into_iter().map(|c| -c).collect(),
    })
}

/// Solve `z = rhs + dt·Δ(z^r)` for `r ∈ (0, 1)` in the nodal variable `ψ = z^r`.
///
/// `ψ` minimises the convex function
/// `Σ_j w_j |ψ_j|^{1+1/r}/(1+1/r) + Σ_k (½ dt λ_k (Pψ)_k² - rhs_k (Pψ)_k)`,
/// `P` the projection onto the modes, and `z = rhs - dt Λ Pψ`. Unlike `z`, this
/// problem has a Lipschitz Hessian, so Newton converges quadratically also when
/// the solution vanishes somewhere. Returns `z` and its residual in the `H` norm.
pub fn fast_diffusion_resolvent(
    rhs: &SpectralField,
    r: f64,
    dt: f64,
    grid: &QuadratureGrid,
    tol: f64,
    max_iterations: usize,
) -> Result<(SpectralField, f64)> {
    DriftModel::FastDiffusion { r }.validate()?;
    grid.check_field(rhs)?;
    let n = rhs.n_modes();
    let m = grid.len();
    let q = 1.0 / r;
    let lam: Vec<f64> = (1..=n).map(|k| eig(k, rhs.l)).collect();
    let w = grid.weights();

    let primal = |psi: &[f64]| -> SpectralField {
        let p = grid.project(psi, n, false);
        SpectralField {
            l: rhs.l,
            coeffs: (0..n).map(|k| rhs.coeffs[k] - dt * lam[k] * p[k]).collect(),
        }
    };
    let merit = |psi: &[f64]| -> f64 {
        let p = grid.project(psi, n, false);
        let nodal: f64 = psi.iter().zip(w).map(|(x, wj)| wj * x.abs().powf(q + 1.0)).sum::<f64>() / (q + 1.0);
        nodal + (0..n).map(|k| 0.5 * dt * lam[k] * p[k] * p[k] - rhs.coeffs[k] * p[k]).sum::<f64>()
    };
    let residual = |z: &SpectralField| -> Result<f64> {
        let mut g = z.sub(rhs);
        g.axpy(-dt, &drift_porous(z, r, grid)?);
        Ok(g.norm_h())
    };

    // K_ij = dt Σ_k e_k(x_i) λ_k e_k(x_j) w_j
    let mut kmat = DMatrix::zeros(m, m);
    for k in 0..n {
        let row = grid.row(k + 1);
        for i in 0..m {
            let a = dt * lam[k] * row[i];
            for j in 0..m {
                kmat[(i, j)] += a * row[j] * w[j];
            }
        }
    }

    let mut psi: Vec<f64> = synthesize(rhs, grid)?.iter().map(|&x| signed_power(x, r)).collect();
    let mut z = primal(&psi);
    let mut res = residual(&z)?;
    for _ in 0..max_iterations {
        if res <= tol {
            break;
        }
        let sz = grid.sum_rows(&z.coeffs, false);
        let g: Vec<f64> = (0..m).map(|j| signed_power(psi[j], q) - sz[j]).collect();
        let d: Vec<f64> = psi.iter().map(|x| q * x.abs().powf(q - 1.0)).collect();
        let floor = 1e-14 * d.iter().cloned().fold(1.0, f64::max);
        let mut jac = kmat.clone();
        for i in 0..m {
            jac[(i, i)] += d[i].max(floor);
        }
        let Some(dir) = jac.lu().solve(&DVector::from_column_slice(&g)) else {
            break;
        };
        let slope: f64 = (0..m).map(|j| w[j] * g[j] * dir[j]).sum();
        let f0 = merit(&psi);
        let mut step = 1.0;
        let mut moved = false;
        while step >= 1e-12 {
            let trial: Vec<f64> = (0..m).map(|j| psi[j] - step * dir[j]).collect();
            let tz = primal(&trial);
            let tres = residual(&tz)?;
            if merit(&trial) <= f0 - 1e-4 * step * slope || (step == 1.0 && tres < res) {
                psi = trial;
                z = tz;
                res = tres;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if !moved {
            break;
        }
    }
    Ok((z, res))
}

/// Floor on `|u|` when differentiating `u ↦ u^r` for `r < 1`.
const FAST_DIFFUSION_FLOOR: f64 = 1e-8;

/// The drift operators `b` of the supported equations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DriftModel {
    /// `Δu`, the stochastic heat equation.
    Linear,
    /// `Δ(u^r)`, `r > 1`.
    Porous { r: f64 },
    /// `(|u'|^{p-2} u')'`, `p > 2` (`p = 2` is accepted as the linear limit).
    PLaplace { p: f64 },
    /// `Δ(u^r)`, `r ∈ (0, 1)`.
    FastDiffusion { r: f64 },
}

impl DriftModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            DriftModel::Linear => Ok(()),
            DriftModel::Porous { r } if r > 1.0 && r.is_finite() => Ok(()),
            DriftModel::Porous { r } => Err(Error::domain(format!("porous medium needs r > 1, got {r}"))),
            DriftModel::PLaplace { p } if p >= 2.0 && p.is_finite() => Ok(()),
            DriftModel::PLaplace { p } => Err(Error::domain(format!("p-Laplace needs p ≥ 2, got {p}"))),
            DriftModel::FastDiffusion { r } if r > 0.0 && r < 1.0 => Ok(()),
            DriftModel::FastDiffusion { r } => {
                Err(Error::domain(format!("fast diffusion needs r ∈ (0, 1), got {r}")))
            }
        }
    }

    /// Exponent `r` of the growth condition (`p - 1` for the p-Laplacian).
    pub fn exponent(&self) -> f64 {
        match *self {
            DriftModel::Linear => 1.0,
            DriftModel::Porous { r } | DriftModel::FastDiffusion { r } => r,
            DriftModel::PLaplace { p } => p - 1.0,
        }
    }

    pub fn state_norm(&self) -> StateNorm {
        match self {
            DriftModel::PLaplace { .. } => StateNorm::L2,
            _ => StateNorm::NegativeSobolev,
        }
    }

    pub fn eval(&self, field: &SpectralField, grid: &QuadratureGrid) -> Result<SpectralField> {
        match *self {
            DriftModel::Linear => {
                grid.check_field(field)?;
                let mut out = field.clone();
                for (i, c) in out.coeffs.iter_mut().enumerate() {
                    *c *= -eig(i + 1, field.l);
                }
                Ok(out)
            }
            DriftModel::Porous { r } | DriftModel::FastDiffusion { r } => drift_porous(field, r, grid),
            DriftModel::PLaplace { p } => drift_plaplace(field, p, grid),
        }
    }

    /// Derivative of the projected drift with respect to the coefficients.
    pub fn jacobian(&self, field: &SpectralField, grid: &QuadratureGrid) -> Result<DMatrix<f64>> {
        let n = field.n_modes();
        match *self {
            DriftModel::Linear => {
                grid.check_field(field)?;
                Ok(DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
                    n,
                    (1..=n).map(|k| -eig(k, field.l)),
                )))
            }
            DriftModel::Porous { r } | DriftModel::FastDiffusion { r } => {
                let u = synthesize(field, grid)?;
                let rho: Vec<f64> = u
                    .iter()
                    .map(|x| r * x.abs().max(FAST_DIFFUSION_FLOOR).powf(r - 1.0))
                    .collect();
                let mut g = grid.weighted_gram(&rho, n, false);
                for k in 0..n {
                    let lam = eig(k + 1, field.l);
                    for j in 0..n {
                        g[(k, j)] *= -lam;
                    }
                }
                Ok(g)
            }
            DriftModel::PLaplace { p } => {
                let du = synthesize_gradient(field, grid)?;
                let rho: Vec<f64> = du.iter().map(|x| (p - 1.0) * x.abs().powf(p - 2.0)).collect();
                Ok(-grid.weighted_gram(&rho, n, true))
            }
        }
    }
}

/// The weak pairing `2⟨b(u) - b(v), u - v⟩` evaluated by quadrature.
///
/// For the porous and fast-diffusion drifts this is
/// `-2∫(u^r - v^r)(u - v) dm`; for the p-Laplacian
/// `-2∫(|u'|^{p-2}u' - |v'|^{p-2}v')(u' - v') dm`. It agrees with the `H`
/// pairing of the projected drifts because the quadrature is exact on
/// band-limited products.
pub fn drift_pairing_diff(
    u: &SpectralField,
    v: &SpectralField,
    model: &DriftModel,
    grid: &QuadratureGrid,
) -> Result<f64> {
    u.same_shape(v)?;
    let integrand: Vec<f64> = match *model {
        DriftModel::Linear => {
            let (a, b) = (synthesize(u, grid)?, synthesize(v, grid)?);
            a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).collect()
        }
        DriftModel::Porous { r } | DriftModel::FastDiffusion { r } => {
            let (a, b) = (synthesize(u, grid)?, synthesize(v, grid)?);
            a.iter()
                .zip(&b)
                .map(|(&x, &y)| (signed_power(x, r) - signed_power(y, r)) * (x - y))
                .collect()
        }
        DriftModel::PLaplace { p } => {
            let (a, b) = (synthesize_gradient(u, grid)?, synthesize_gradient(v, grid)?);
            a.iter()
                .zip(&b)
                .map(|(&x, &y)| (signed_power(x, p - 1.0) - signed_power(y, p - 1.0)) * (x - y))
                .collect()
        }
    };
    Ok(-2.0 * grid.integrate(&integrand))
}

/// `⟨x, y⟩` in the state space of `model`.
pub fn state_inner(model: &DriftModel, x: &SpectralField, y: &SpectralField) -> f64 {
    match model.state_norm() {
        StateNorm::NegativeSobolev => x.inner_h(y),
        StateNorm::L2 => x.coeffs.iter().zip(&y.coeffs).map(|(a, b)| a * b).sum(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(rng: &mut impl Rng, l: f64, n: usize) -> SpectralField {
        SpectralField::new(l, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn eigenvalue_examples() {
        assert_relative_eq!(eigenvalue(1, PI).unwrap(), 1.0, max_relative = 1e-15);
        assert_relative_eq!(eigenvalue(2, PI).unwrap(), 4.0, max_relative = 1e-15);
        assert_relative_eq!(eigenvalue(1, 2.0 * PI).unwrap(), 0.25, max_relative = 1e-15);
        assert!(eigenvalue(0, PI).is_err());
        assert!(eigenvalue(1, 0.0).is_err());
    }

    #[test]
    fn grid_weights_form_probability() {
        for m in [4, 17, 64, 256] {
            let g = QuadratureGrid::new(2.5, m).unwrap();
            assert_relative_eq!(g.weights().iter().sum::<f64>(), 1.0, max_relative = 1e-14);
            assert_eq!(g.max_modes(), m / DEALIAS_FACTOR);
        }
    }

    #[test]
    fn first_mode_synthesis() {
        let grid = QuadratureGrid::new(3.0, 40).unwrap();
        let f = SpectralField::mode(3.0, 4, 1, 1.0);
        let u = synthesize(&f, &grid).unwrap();
        for (x, v) in grid.nodes().iter().zip(&u) {
            assert!((v - SQRT_2 * (PI * x / 3.0).sin()).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_field_roundtrip() {
        let grid = QuadratureGrid::new(PI, 32).unwrap();
        let z = SpectralField::zeros(PI, 8);
        let u = synthesize(&z, &grid).unwrap();
        assert!(u.iter().all(|v| *v == 0.0));
        assert_eq!(analyze(&u, &grid, 8).unwrap(), z);
    }

    #[test]
    fn aliasing_rejected() {
        let grid = QuadratureGrid::new(PI, 63).unwrap();
        let f = SpectralField::zeros(PI, 16);
        assert!(matches!(synthesize(&f, &grid), Err(Error::Aliasing { .. })));
        assert!(matches!(drift_porous(&f, 2.0, &grid), Err(Error::Aliasing { .. })));
    }

    proptest! {
        #[test]
        fn roundtrip_is_exact(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let grid = QuadratureGrid::new(1.7, 64).unwrap();
            let f = random_field(&mut rng, 1.7, 16);
            let g = analyze(&synthesize(&f, &grid).unwrap(), &grid, 16).unwrap();
            for (a, b) in f.coeffs.iter().zip(&g.coeffs) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn norm_chain(seed in any::<u64>(), r in 1.0f64..4.0, sigma in 0.1f64..5.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let l = 2.3;
            let grid = QuadratureGrid::new(l, 64).unwrap();
            let f = random_field(&mut rng, l, 16);
            let l2 = f.norm_l2();
            let quad = f.norm_lq(2.0, &grid).unwrap();
            prop_assert!((quad - l2).abs() < 1e-12 * l2.max(1.0));
            prop_assert!(f.norm_lq(r + 1.0, &grid).unwrap() >= l2 * (1.0 - 1e-12));
            prop_assert!(l2 >= PI / l * f.norm_h() * (1.0 - 1e-12));
            let noise = DiagonalNoise::scalar(sigma, 16).unwrap();
            prop_assert!((l2 - sigma * f.norm_q(&noise).unwrap()).abs() < 1e-12 * l2.max(1.0));
            // Poincaré: ‖f'‖² ≥ λ₁ ‖f‖².
            prop_assert!(f.norm_grad_l2().powi(2) >= eig(1, l) * l2 * l2 * (1.0 - 1e-12));
        }

        #[test]
        fn norms_are_seminorms(seed in any::<u64>(), s in -5.0f64..5.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let grid = QuadratureGrid::new(1.0, 32).unwrap();
            let f = random_field(&mut rng, 1.0, 8);
            let g = random_field(&mut rng, 1.0, 8);
            let noise = DiagonalNoise::from_law(NoiseLaw::Power { scale: 1.0, exponent: -1.0 }, 8).unwrap();
            let norms = |x: &SpectralField| [
                x.norm_h(), x.norm_l2(), x.norm_lq(3.0, &grid).unwrap(), x.norm_q(&noise).unwrap(),
            ];
            let (nf, ng, nsum, nscaled) = (norms(&f), norms(&g), norms(&f.add(&g)), norms(&f.scaled(s)));
            for i in 0..4 {
                prop_assert!(nsum[i] <= (nf[i] + ng[i]) * (1.0 + 1e-12));
                prop_assert!((nscaled[i] - s.abs() * nf[i]).abs() <= 1e-12 * nf[i].max(1.0));
            }
        }
    }

    #[test]
    fn first_mode_norms() {
        let f = SpectralField::mode(PI, 4, 1, 1.0);
        assert_relative_eq!(f.norm_h(), 1.0, max_relative = 1e-15);
        assert_relative_eq!(f.norm_l2(), 1.0, max_relative = 1e-15);
        let noise = DiagonalNoise::scalar(2.0, 4).unwrap();
        assert_relative_eq!(f.norm_q(&noise).unwrap(), 0.5, max_relative = 1e-15);
        let z = SpectralField::zeros(PI, 4);
        let grid = QuadratureGrid::for_modes(PI, 4).unwrap();
        assert_eq!(z.norm_h(), 0.0);
        assert_eq!(z.norm_lq(3.0, &grid).unwrap(), 0.0);
        assert_eq!(z.norm_q(&noise).unwrap(), 0.0);
    }

    #[test]
    fn signed_power_examples() {
        assert_eq!(signed_power(-2.0, 2.0), -4.0);
        assert_eq!(signed_power(0.0, 0.5), 0.0);
        assert_relative_eq!(signed_power(4.0, 0.5), 2.0);
        assert_relative_eq!(signed_power(-4.0, 0.5), -2.0);
        let mut prev = f64::NEG_INFINITY;
        for i in -100..=100 {
            let v = signed_power(i as f64 / 10.0, 0.7);
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn zero_noise_rejected() {
        assert!(DiagonalNoise::new(vec![1.0, 0.0]).is_err());
        assert!(DiagonalNoise::scalar(0.0, 3).is_err());
    }

    #[test]
    fn linear_limits_of_drifts() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let grid = QuadratureGrid::new(PI, 64).unwrap();
        let f = random_field(&mut rng, PI, 16);
        let heat: Vec<f64> = f.coeffs.iter().enumerate().map(|(i, c)| -eig(i + 1, PI) * c).collect();
        for b in [
            drift_porous(&f, 1.0, &grid).unwrap(),
            drift_plaplace(&f, 2.0, &grid).unwrap(),
            DriftModel::Linear.eval(&f, &grid).unwrap(),
        ] {
            for (a, e) in b.coeffs.iter().zip(&heat) {
                assert!((a - e).abs() < 1e-10 * e.abs().max(1.0));
            }
        }
        let z = SpectralField::zeros(PI, 16);
        assert!(drift_porous(&z, 2.0, &grid).unwrap().coeffs.iter().all(|c| *c == 0.0));
        assert!(drift_plaplace(&z, 4.0, &grid).unwrap().coeffs.iter().all(|c| *c == 0.0));
    }

    /// Fine-grid oracle for the porous pairing `⟨b(f), f⟩_H = -‖f‖_{r+1}^{r+1}`.
    #[test]
    fn porous_pairing_matches_fine_quadrature() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 8;
        let coarse = QuadratureGrid::new(PI, 4 * n).unwrap();
        let fine = QuadratureGrid::new(PI, 16 * n).unwrap();
        for r in [1.5, 2.0, 3.0] {
            let f = random_field(&mut rng, PI, n);
            let pairing = drift_porous(&f, r, &coarse).unwrap().inner_h(&f);
            // exact on the coarse grid
            assert_relative_eq!(pairing, -f.norm_lq(r + 1.0, &coarse).unwrap().powf(r + 1.0), max_relative = 1e-12);
            // against a fine grid: limited by the non-polynomial |u|^{r-1}u
            let exact = -f.norm_lq(r + 1.0, &fine).unwrap().powf(r + 1.0);
            assert_relative_eq!(pairing, exact, max_relative = 2e-2);
            let fine_pairing = drift_porous(&f, r, &fine).unwrap().inner_h(&f);
            assert_relative_eq!(fine_pairing, exact, max_relative = 1e-12);
        }
    }

    #[test]
    fn plaplace_pairing_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 8;
        let fine = QuadratureGrid::new(PI, 16 * n).unwrap();
        let f = random_field(&mut rng, PI, n);
        let b = drift_plaplace(&f, 4.0, &fine).unwrap();
        let pairing: f64 = b.coeffs.iter().zip(&f.coeffs).map(|(a, c)| a * c).sum();
        let du = synthesize_gradient(&f, &fine).unwrap();
        let oracle = -fine.integrate(&du.iter().map(|x| x.powi(4)).collect::<Vec<_>>());
        assert_relative_eq!(pairing, oracle, max_relative = 1e-8);
        // p = 4 is polynomial: a 4N grid is already exact.
        let coarse = QuadratureGrid::new(PI, 4 * n + 1).unwrap();
        let b = drift_plaplace(&f, 4.0, &coarse).unwrap();
        let coarse_pairing: f64 = b.coeffs.iter().zip(&f.coeffs).map(|(a, c)| a * c).sum();
        assert_relative_eq!(coarse_pairing, oracle, max_relative = 1e-10);
    }

    #[test]
    fn pairing_diff_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let grid = QuadratureGrid::new(PI, 64).unwrap();
        let u = random_field(&mut rng, PI, 16);
        for model in [
            DriftModel::Porous { r: 2.0 },
            DriftModel::PLaplace { p: 4.0 },
            DriftModel::FastDiffusion { r: 0.5 },
            DriftModel::Linear,
        ] {
            assert_eq!(drift_pairing_diff(&u, &u, &model, &grid).unwrap(), 0.0);
            let v = random_field(&mut rng, PI, 16);
            let d = drift_pairing_diff(&u, &v, &model, &grid).unwrap();
            assert!(d < 0.0);
            // equals the state-space pairing of the projected drifts
            let db = model.eval(&u, &grid).unwrap().sub(&model.eval(&v, &grid).unwrap());
            let via_drift = 2.0 * state_inner(&model, &db, &u.sub(&v));
            assert_relative_eq!(d, via_drift, max_relative = 1e-10);
        }
        let short = random_field(&mut rng, PI, 8);
        assert!(drift_pairing_diff(&u, &short, &DriftModel::Linear, &grid).is_err());
    }

    #[test]
    fn porous_single_mode_pairing() {
        // u = c e₁, v = 0, r = 2: -2c³ ∫|e₁|³ dm = -2c³ · 2√2 · 4/(3π) on (0, π).
        let fine = QuadratureGrid::new(PI, 4001).unwrap();
        let c = 0.7;
        let u = SpectralField::mode(PI, 4, 1, c);
        let v = SpectralField::zeros(PI, 4);
        let d = drift_pairing_diff(&u, &v, &DriftModel::Porous { r: 2.0 }, &fine).unwrap();
        let exact = -2.0 * c.powi(3) * 2.0 * SQRT_2 * 4.0 / (3.0 * PI);
        assert_relative_eq!(d, exact, max_relative = 1e-6);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let grid = QuadratureGrid::new(1.3, 32).unwrap();
        let f = random_field(&mut rng, 1.3, 8);
        for model in [
            DriftModel::Porous { r: 2.5 },
            DriftModel::PLaplace { p: 3.5 },
            DriftModel::Linear,
        ] {
            let jac = model.jacobian(&f, &grid).unwrap();
            let h = 1e-6;
            for j in 0..8 {
                let mut plus = f.clone();
                plus.coeffs[j] += h;
                let mut minus = f.clone();
                minus.coeffs[j] -= h;
                let fd = model.eval(&plus, &grid).unwrap().sub(&model.eval(&minus, &grid).unwrap());
                for i in 0..8 {
                    let est = fd.coeffs[i] / (2.0 * h);
                    assert!((est - jac[(i, j)]).abs() < 1e-5 * jac[(i, j)].abs().max(1.0), "{model:?} ({i},{j})");
                }
            }
        }
    }
}
