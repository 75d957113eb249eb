//! Three-interval decay: `γ(c)`, the discrete decay lemma, windowed energies and rate fits.

use serde::{Deserialize, Serialize};

use crate::cylinder::{d_t, d_tau, mode_decompose, Section, TauAxis};
use crate::error::{GlueError, Result};

/// `γ(c) = 1/(e^c + e^{−c})`.
pub fn gamma_c(c: f64) -> f64 {
    0.5 / c.cosh()
}

/// Both sides of `∫₀¹ e^{cτ} = γ(c) (∫_{−1}⁰ + ∫₁²) e^{cτ}` from closed-form antiderivatives.
pub fn gamma_identity(c: f64) -> (f64, f64) {
    if c == 0.0 {
        return (1.0, gamma_c(0.0) * 2.0);
    }
    let mid = c.exp_m1() / c;
    let left = -(-c).exp_m1() / c;
    let right = c.exp() * c.exp_m1() / c;
    (mid, gamma_c(c) * (left + right))
}

/// Decay base `ξ = (1 + √(1 − 4γ²))/(2γ)`; equals `e^c` at `γ = γ(c)`.
pub fn xi_of_gamma(gamma: f64) -> f64 {
    (1.0 + (1.0 - 4.0 * gamma * gamma).sqrt()) / (2.0 * gamma)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WindowKind {
    GradEnergy,
    HigherModeL2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowEnergySeq {
    pub x: Vec<f64>,
    pub window_bounds: Vec<(f64, f64)>,
    pub kind: WindowKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThreeIntervalReport {
    pub holds_hypothesis: bool,
    /// `x₀ ξ^{−k} + x_N ξ^{−(N−k)}`.
    pub bound: Vec<f64>,
    /// Whether `x_k ≤ bound_k` everywhere (checked whenever the hypothesis holds).
    pub conclusion_holds: bool,
}

const REL_TOL: f64 = 1e-12;

/// Checks `x_k ≤ γ(x_{k−1} + x_{k+1})` for interior `k` and, if it holds, the pointwise
/// conclusion.
pub fn three_interval_bound(x: &[f64], gamma: f64) -> Result<ThreeIntervalReport> {
    if !(gamma > 0.0 && gamma < 0.5) {
        return Err(GlueError::GammaOutOfRange(gamma));
    }
    let n = x.len();
    if n == 0 {
        return Ok(ThreeIntervalReport { holds_hypothesis: true, bound: vec![], conclusion_holds: true });
    }
    let last = n - 1;
    let holds = (1..last).all(|k| x[k] <= gamma * (x[k - 1] + x[k + 1]) * (1.0 + REL_TOL));
    let xi = xi_of_gamma(gamma);
    let bound: Vec<f64> = (0..n).map(|k| x[0] * xi.powi(-(k as i32)) + x[last] * xi.powi(-((last - k) as i32))).collect();
    let conclusion = x.iter().zip(&bound).all(|(a, b)| *a <= b * (1.0 + REL_TOL) + f64::MIN_POSITIVE);
    Ok(ThreeIntervalReport { holds_hypothesis: holds, bound, conclusion_holds: conclusion })
}

/// Fraction of interior indices satisfying the three-interval inequality.
pub fn hypothesis_fraction(x: &[f64], gamma: f64) -> f64 {
    if x.len() < 3 {
        return 1.0;
    }
    let ok = (1..x.len() - 1).filter(|&k| x[k] <= gamma * (x[k - 1] + x[k + 1]) * (1.0 + REL_TOL)).count();
    ok as f64 / (x.len() - 2) as f64
}

/// Per-node circle integrals of the chosen density (flat metric).
pub fn node_density(s: &Section, kind: WindowKind) -> Result<Vec<f64>> {
    let l = s.layout;
    let circle = l.period / l.n_t as f64;
    let sq = |v: &Section, j: usize| v.slice(j).iter().map(|z| z.norm_sqr()).sum::<f64>() * circle;
    match kind {
        WindowKind::GradEnergy => {
            let a = d_tau(s)?;
            let b = d_t(s);
            Ok((0..l.n_tau()).map(|j| sq(&a, j) + sq(&b, j)).collect())
        }
        WindowKind::HigherModeL2 => {
            let (_, higher) = mode_decompose(s);
            let t = higher.to_section();
            Ok((0..l.n_tau()).map(|j| sq(&t, j)).collect())
        }
    }
}

/// Trapezoid integral of node values between the nodes nearest `a` and `b`.
pub fn window_integral(density: &[f64], axis: &TauAxis, a: f64, b: f64) -> f64 {
    let ja = axis.nearest(a);
    let jb = axis.nearest(b);
    if jb <= ja {
        return 0.0;
    }
    let h = axis.step;
    (ja..jb).map(|j| 0.5 * h * (density[j] + density[j + 1])).sum()
}

/// Energies over the given windows.
pub fn window_energies_at(s: &Section, kind: WindowKind, windows: &[(f64, f64)]) -> Result<WindowEnergySeq> {
    let axis = s.layout.axis;
    for &(a, b) in windows {
        if a < axis.start - 1e-9 || b > axis.end() + 1e-9 {
            return Err(GlueError::GridTooShort(format!("window [{a}, {b}] outside grid")));
        }
    }
    let dens = node_density(s, kind)?;
    let x = windows.iter().map(|&(a, b)| window_integral(&dens, &axis, a, b)).collect();
    Ok(WindowEnergySeq { x, window_bounds: windows.to_vec(), kind })
}

/// Unit windows `[k + offset, k + 1 + offset]` covering the grid.
pub fn window_energies(s: &Section, kind: WindowKind, offset: f64) -> Result<WindowEnergySeq> {
    let axis = s.layout.axis;
    let first = (axis.start - offset - 1e-9).ceil() as i64;
    let last = (axis.end() - offset + 1e-9).floor() as i64;
    if last - first < 3 {
        return Err(GlueError::GridTooShort("fewer than three unit windows".into()));
    }
    let windows: Vec<(f64, f64)> = (first..last).map(|k| (k as f64 + offset, k as f64 + 1.0 + offset)).collect();
    window_energies_at(s, kind, &windows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    /// `−slope` of `log x` against distance.
    pub sigma: f64,
    pub r2: f64,
    pub used: usize,
}

/// Least-squares exponential rate of positive entries; entries below `floor · max x` are
/// dropped.
pub fn decay_fit_with(x: &[f64], distance: &[f64], floor: f64) -> Result<DecayFit> {
    if x.len() != distance.len() {
        return Err(GlueError::ShapeMismatch("one distance per window".into()));
    }
    let max = x.iter().cloned().fold(0.0, f64::max);
    if max <= 0.0 {
        return Err(GlueError::AllZero);
    }
    let pts: Vec<(f64, f64)> =
        x.iter().zip(distance).filter(|(v, _)| **v > floor * max && **v > 0.0).map(|(v, d)| (*d, v.ln())).collect();
    if pts.len() < 4 {
        return Err(GlueError::InvalidParams(format!("{} usable windows, need 4", pts.len())));
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Ok(DecayFit { sigma: -slope, r2, used: pts.len() })
}

/// Rate against the window index.
pub fn decay_fit(x: &WindowEnergySeq) -> Result<DecayFit> {
    let d: Vec<f64> = (0..x.x.len()).map(|k| k as f64).collect();
    decay_fit_with(&x.x, &d, 0.0)
}
