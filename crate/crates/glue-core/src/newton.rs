//! Quantitative implicit function theorem: corrects the preglued map to a solution of the
//! discrete equation, with the unknown neck-length variation `μ` as an extra parameter.
//!
//! The map is `F(ξ, μ) = ∂̄(u_app + ξ)` for the equation whose neck cutoff sits at `L + μ`.
//! Steps are `x ← x − Q F(x)` with `Q` the refined right inverse at `x₀ = (0, 0)`, so every
//! iterate stays in `x₀ + im Q`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::cylinder::{CylinderGrid, Layout, Section};
use crate::error::{GlueError, Result};
use crate::floer_op::{dbar_evaluate, linearize, Equation};
use crate::inverse::{contraction_check_ctx, InverseContext};
use crate::preglue::{preglue, AdiabaticParams, DfdConfig};
use crate::probe::gaussian_probe;

/// Target residual `‖F(ξ, μ)‖_ε`.
pub const TOL_NEWTON: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IFTReport {
    pub initial_residual: f64,
    pub final_residual: f64,
    /// `‖F(x_k)‖_ε`, starting with the value at the first iterate.
    pub residuals: Vec<f64>,
    pub step_norms: Vec<f64>,
    /// Measured bound for the right inverse.
    pub c_used: f64,
    /// Radius on which the quadratic estimate keeps `‖dF − D‖ ≤ 1/(2C)`.
    pub h_used: f64,
    /// Measured quadratic constant.
    pub k_used: f64,
    pub iterations: usize,
    /// `‖F(x_{k+1})‖ / ‖F(x_k)‖²`.
    pub quadratic_ratios: Vec<f64>,
    /// `‖x − x₀‖_ε` at the end.
    pub distance: f64,
    pub bound_holds: bool,
    pub mu: f64,
}

#[derive(Debug, Clone)]
pub struct NewtonOptions {
    pub max_iter: usize,
    pub tol: f64,
    pub probes: usize,
    pub seed: u64,
    /// X-norm radius of the quadratic probes.
    pub probe_radius: f64,
    pub probe_pairs: usize,
    /// Re-linearize at every iterate instead of keeping `Q` from `x₀`.
    pub relinearize: bool,
    /// Starting perturbation of `x₀`.
    pub start: Option<(Section, f64)>,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            max_iter: 12,
            tol: TOL_NEWTON,
            probes: 8,
            seed: 7,
            probe_radius: 1e-3,
            probe_pairs: 4,
            relinearize: false,
            start: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NewtonOutput {
    /// `u_app + ξ` on the grid of the preglued map (not reparametrized).
    pub u: CylinderGrid,
    pub u_app: CylinderGrid,
    pub xi: Section,
    pub mu: f64,
    pub report: IFTReport,
}

/// `F(ξ, μ)`.
pub fn residual_map(u_app: &CylinderGrid, eq: &Equation, xi: &Section, mu: f64) -> Result<Section> {
    dbar_evaluate(&u_app.add_section(xi)?, &eq.shifted(mu))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticProbe {
    pub max_constant: f64,
    pub ratios: Vec<f64>,
}

fn random_direction(layout: &Layout, params: &AdiabaticParams, ctx: &InverseContext, rng: &mut ChaCha8Rng, norm: f64) -> Result<(Section, f64)> {
    let xi = gaussian_probe(layout, params, rng);
    let mu: f64 = rng.sample::<f64, _>(StandardNormal);
    let n = ctx.xi_norm(&xi, mu)?.total;
    let s = norm / n;
    Ok((xi.scale(s), mu * s))
}

/// Empirical `sup ‖dF(x)x' − D x'‖ / (‖x‖ ‖x'‖)` over seeded pairs with `‖x‖ = radius`.
pub fn quadratic_probe(ctx: &InverseContext, pairs: usize, radius: f64, seed: u64) -> Result<QuadraticProbe> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layout = ctx.op.layout();
    let params = ctx.params;
    let base = &ctx.op.base;
    let eq = &ctx.op.eq;
    let mut ratios = Vec::with_capacity(pairs);
    for _ in 0..pairs {
        let (xi, mu) = random_direction(&layout, &params, ctx, &mut rng, radius)?;
        let (xp, mp) = random_direction(&layout, &params, ctx, &mut rng, 1.0)?;
        let dx = linearize(&base.add_section(&xi)?, &eq.shifted(mu))?;
        let diff = dx.apply_para(&xp, mp)?.sub(&ctx.apply_d(&xp, mp)?);
        ratios.push(ctx.eta_norm(&diff)? / radius);
    }
    let max_constant = ratios.iter().cloned().fold(0.0, f64::max);
    Ok(QuadraticProbe { max_constant, ratios })
}

pub fn newton_solve(cfg: &DfdConfig, params: &AdiabaticParams) -> Result<NewtonOutput> {
    newton_solve_with(cfg, params, &NewtonOptions::default())
}

pub fn newton_solve_with(cfg: &DfdConfig, params: &AdiabaticParams, opts: &NewtonOptions) -> Result<NewtonOutput> {
    let u_app = preglue(cfg, params)?;
    let eq = Equation::of_config(cfg, params);
    let layout = u_app.layout;
    let f0 = residual_map(&u_app, &eq, &Section::zeros(layout), 0.0)?;
    let ctx0 = InverseContext::new(linearize(&u_app, &eq)?, &cfg.joints, params)?;
    let r0 = ctx0.eta_norm(&f0)?;
    let (mut xi, mut mu) = match &opts.start {
        Some((s, m)) => (s.clone(), *m),
        None => (Section::zeros(layout), 0.0),
    };
    if r0 <= opts.tol && opts.start.is_none() {
        let report = IFTReport {
            initial_residual: r0,
            final_residual: r0,
            residuals: vec![r0],
            step_norms: vec![],
            c_used: 0.0,
            h_used: 0.0,
            k_used: 0.0,
            iterations: 0,
            quadratic_ratios: vec![],
            distance: 0.0,
            bound_holds: true,
            mu: 0.0,
        };
        return Ok(NewtonOutput { u: u_app.clone(), u_app, xi, mu, report });
    }
    // measured constants; the residual itself joins the probe set
    let cr = contraction_check_ctx(&ctx0, opts.probes.max(1), opts.seed)?;
    if cr.max_ratio >= 1.0 {
        return Err(GlueError::NotContractive { ratio: cr.max_ratio });
    }
    let q0 = ctx0.apply(&f0)?;
    let q_f0 = ctx0.xi_norm(&q0.xi, q0.mu)?.total / r0;
    let c_used = cr.q_norm.max(q_f0) / (1.0 - cr.max_ratio);
    let k_used = quadratic_probe(&ctx0, opts.probe_pairs.max(1), opts.probe_radius, opts.seed ^ 0x9e37)?.max_constant;
    let h_used = if k_used > 0.0 { 1.0 / (2.0 * c_used * k_used) } else { f64::MAX };
    let limit = h_used / (4.0 * c_used);
    if r0 > limit {
        return Err(GlueError::HypothesisFailed { residual: r0, limit });
    }

    let mut residuals = Vec::new();
    let mut step_norms = Vec::new();
    let mut ctx = ctx0;
    let mut f = residual_map(&u_app, &eq, &xi, mu)?;
    let mut r = ctx.eta_norm(&f)?;
    residuals.push(r);
    let mut iterations = 0;
    while r > opts.tol {
        if iterations == opts.max_iter {
            return Err(GlueError::Diverged { iterations, residual: r });
        }
        if opts.relinearize && iterations > 0 {
            let op = linearize(&u_app.add_section(&xi)?, &eq.shifted(mu))?;
            ctx = InverseContext::new(op, &cfg.joints, params)?;
        }
        let step = ctx.true_inverse(&f, 40)?;
        xi.axpy(-1.0, &step.xi);
        mu -= step.mu;
        step_norms.push(ctx.xi_norm(&step.xi, step.mu)?.total);
        iterations += 1;
        f = residual_map(&u_app, &eq, &xi, mu)?;
        r = ctx.eta_norm(&f)?;
        residuals.push(r);
        if !r.is_finite() || r > 1e3 * residuals[0].max(r0) {
            return Err(GlueError::Diverged { iterations, residual: r });
        }
    }
    let quadratic_ratios = residuals.windows(2).map(|w| w[1] / (w[0] * w[0])).collect();
    let distance = ctx.xi_norm(&xi, mu)?.total;
    let report = IFTReport {
        initial_residual: r0,
        final_residual: r,
        residuals,
        step_norms,
        c_used,
        h_used,
        k_used,
        iterations,
        quadratic_ratios,
        distance,
        bound_holds: distance <= 2.0 * c_used * r0,
        mu,
    };
    Ok(NewtonOutput { u: u_app.add_section(&xi)?, u_app, xi, mu, report })
}

/// Smoothed neck stretch: slope `1 + μ/L` on the neck, `1` outside, blended over `width`
/// around `±L`. Sends `±L` to about `±(L + μ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reparam {
    pub mu: f64,
    pub l: f64,
    pub width: f64,
}

/// `∫₀^x smoothstep`.
fn smoothstep_integral(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        x - 0.5
    } else {
        x.powi(4) * (2.5 + x * (x - 3.0))
    }
}

impl Reparam {
    pub fn new(mu: f64, l: f64, width: f64) -> Result<Self> {
        if !(l > 0.0 && width > 0.0 && width < l) || mu.abs() >= 0.5 * l {
            return Err(GlueError::InvalidParams(format!("reparametrization μ = {mu}, L = {l}, width = {width}")));
        }
        Ok(Self { mu, l, width })
    }

    /// `P_μ(τ)`.
    pub fn forward(&self, tau: f64) -> f64 {
        let a = tau.abs();
        // ∫₀^a (1 − smoothstep((σ − L)/w + ½)) dσ
        let x0 = (self.l - 0.5 * self.width) / self.width;
        let ramp = self.width * (smoothstep_integral(a / self.width - x0) - smoothstep_integral(-x0));
        let weighted = a - ramp;
        tau.signum() * (a + self.mu / self.l * weighted)
    }

    /// `P_μ⁻¹` by bisection; the map is strictly increasing.
    pub fn inverse(&self, y: f64) -> f64 {
        let (mut lo, mut hi) = (y - 2.0 * self.mu.abs() - 1.0, y + 2.0 * self.mu.abs() + 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.forward(mid) < y {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-15 * (1.0 + y.abs()) {
                break;
            }
        }
        0.5 * (lo + hi)
    }
}

/// Four-point Lagrange interpolation in τ, stencil clamped to the grid.
pub fn sample_tau(u: &CylinderGrid, tau: f64, i: usize) -> Vec<crate::C64> {
    let axis = u.layout.axis;
    let x = (tau - axis.start) / axis.step;
    let last = axis.len - 1;
    let base = (x.floor() as i64 - 1).clamp(0, last as i64 - 3) as usize;
    let mut out = vec![crate::C64::default(); u.layout.dim];
    for m in 0..4 {
        let xm = (base + m) as f64;
        let mut w = 1.0;
        for k in 0..4 {
            if k != m {
                w *= (x - (base + k) as f64) / (xm - (base + k) as f64);
            }
        }
        for (o, v) in out.iter_mut().zip(u.at(base + m, i)) {
            *o += v * w;
        }
    }
    out
}

/// `τ ↦ u(P(τ))` on the same layout.
pub fn reparametrize(u: &CylinderGrid, rp: &Reparam) -> CylinderGrid {
    let mut out = u.clone();
    let l = u.layout;
    for j in 0..l.n_tau() {
        let tau = rp.forward(l.tau(j));
        for i in 0..l.n_t {
            let v = sample_tau(u, tau, i);
            out.at_mut(j, i).copy_from_slice(&v);
        }
    }
    out
}

/// `τ ↦ u(P⁻¹(τ))`.
pub fn reparametrize_inverse(u: &CylinderGrid, rp: &Reparam) -> CylinderGrid {
    let mut out = u.clone();
    let l = u.layout;
    for j in 0..l.n_tau() {
        let tau = rp.inverse(l.tau(j));
        for i in 0..l.n_t {
            let v = sample_tau(u, tau, i);
            out.at_mut(j, i).copy_from_slice(&v);
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct GlueOutput {
    pub cfg_id: String,
    pub eps: f64,
    /// Solution pulled back to the standard neck length.
    pub grid: CylinderGrid,
    pub newton: NewtonOutput,
}

/// Newton after pregluing, pulled back by `P_μ`.
pub fn glue(cfg: &DfdConfig, params: &AdiabaticParams) -> Result<GlueOutput> {
    glue_with(cfg, params, &NewtonOptions::default())
}

pub fn glue_with(cfg: &DfdConfig, params: &AdiabaticParams, opts: &NewtonOptions) -> Result<GlueOutput> {
    let newton = newton_solve_with(cfg, params, opts)?;
    let grid = if newton.mu == 0.0 {
        newton.u.clone()
    } else {
        let rp = Reparam::new(newton.mu, params.r(), newton.u.layout.axis.step)?;
        reparametrize(&newton.u, &rp)
    };
    Ok(GlueOutput { cfg_id: cfg.id.clone(), eps: params.eps, grid, newton })
}
