//! Explicit adiabatic family in an affine chart of CPⁿ:
//! `u_ε = ε^α e^{−2πl/ε}(A₊z + A₋z⁻¹) + χ(ετ)` with `z = e^{2π(τ+it)}`, where χ solves
//! `χ' = grad f`. The ends are the holomorphic disks `p± + A± w`.
//!
//! Here the equation reads `∂_τu + i∂_tu = ε grad f(u)`, so internally the Morse data carry
//! the potential `−f` and the library's `χ̇ = −grad` convention applies unchanged.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::adiabatic::{adia_distance, grid_distance, AdiaDistanceReport, AdiaTarget};
use crate::cylinder::{energy_local, CylinderGrid, Layout, Section, TauAxis};
use crate::floer_op::principal;
use crate::flow::{solve_gradient_segment, GradientSegment};
use crate::linalg::{herm, vec_norm};
use crate::preglue::{EndSide, HolomorphicEnd};
use crate::target::{fs_distance, MorseData, Potential, TargetModel};
use crate::{GlueError, Result, C64};

/// Extra terms `β(ε)P(z)` with end multiplicities `k`, `m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpnExtra {
    pub k: u32,
    pub m: u32,
    /// Laurent coefficients `(j, c_j)` of `P`.
    pub p_coeffs: Vec<(i32, Vec<C64>)>,
    /// `β(ε) = ε^beta_power`.
    pub beta_power: f64,
}

impl CpnExtra {
    pub fn beta(&self, eps: f64) -> f64 {
        eps.powf(self.beta_power)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpnExampleSpec {
    pub n: usize,
    pub a_plus: Vec<C64>,
    pub a_minus: Vec<C64>,
    pub alpha: f64,
    pub l: f64,
    /// `f(z) = ½ Σ λ_q |z_q|² − ¼ quartic |z|⁴` in the chart.
    pub lambda: Vec<f64>,
    /// Keeps the outward flow from leaving the chart: the chart gradient of a pure quadratic
    /// blows up in finite time under the Fubini–Study metric.
    pub quartic: f64,
    /// `χ(−l)`.
    pub x_start: Vec<C64>,
    pub n_t: usize,
    pub h_tau: f64,
    pub chart_radius: f64,
    pub extra: Option<CpnExtra>,
}

impl Default for CpnExampleSpec {
    fn default() -> Self {
        let c = |re: f64, im: f64| C64::new(re, im);
        Self {
            n: 2,
            a_plus: vec![c(1.0, 0.0), c(0.0, 0.0)],
            a_minus: vec![c(0.0, 0.0), c(1.0, 0.0)],
            alpha: 1.0,
            l: 1.0,
            lambda: vec![2.0, 4.0],
            quartic: 6.0,
            x_start: vec![c(0.04, 0.0), c(0.0, 0.02)],
            n_t: 64,
            h_tau: 1.0 / 16.0,
            chart_radius: 1e6,
            extra: None,
        }
    }
}

impl CpnExampleSpec {
    /// Default spec plus `β(ε)P(z)` with `P = c·z`, `c = (0.5, 0.5)`, `β = ε²`.
    pub fn with_default_extra(k: u32, m: u32) -> Self {
        let half = C64::new(0.5, 0.0);
        Self {
            extra: Some(CpnExtra { k, m, p_coeffs: vec![(1, vec![half, half])], beta_power: 2.0 }),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n;
        if self.a_plus.len() != n || self.a_minus.len() != n || self.lambda.len() != n || self.x_start.len() != n {
            return Err(GlueError::ShapeMismatch(format!("example vectors must have length {n}")));
        }
        if !(self.alpha > 0.0 && self.l > 0.0 && self.h_tau > 0.0) || self.n_t < 4 {
            return Err(GlueError::InvalidParams("alpha, l, h_tau must be positive and n_t ≥ 4".into()));
        }
        // Gram determinant of A₊, A₋ over ℂ.
        let (pp, mm) = (herm(&self.a_plus, &self.a_plus).re, herm(&self.a_minus, &self.a_minus).re);
        let pm = herm(&self.a_plus, &self.a_minus).norm_sqr();
        if pp * mm - pm <= 1e-12 * pp.max(mm).powi(2).max(1e-300) {
            return Err(GlueError::InvalidParams("A₊ and A₋ are complex-linearly dependent".into()));
        }
        if let Some(x) = &self.extra {
            if x.k == 0 || x.m == 0 {
                return Err(GlueError::InvalidParams("k, m must be ≥ 1".into()));
            }
            if x.p_coeffs.iter().any(|(_, c)| c.len() != n) {
                return Err(GlueError::ShapeMismatch("P coefficients".into()));
            }
        }
        Ok(())
    }
}

/// `b(ε) = −ln ε / 2π`.
pub fn b_eps(eps: f64) -> f64 {
    -eps.ln() / (2.0 * PI)
}

/// Solved data of an example: Morse data (potential `−f`) and the flow segment.
#[derive(Debug, Clone)]
pub struct CpnExample {
    pub spec: CpnExampleSpec,
    pub morse: MorseData,
    pub chi: GradientSegment,
}

impl CpnExample {
    pub fn new(spec: &CpnExampleSpec) -> Result<Self> {
        spec.validate()?;
        let model = TargetModel::projective(spec.n, spec.chart_radius);
        let neg: Vec<f64> = spec.lambda.iter().map(|l| -l).collect();
        let morse = MorseData::new(model, Potential { lambda: neg, quartic: spec.quartic })?;
        let chi = solve_gradient_segment(&morse, &spec.x_start, spec.l)?;
        let worst = chi.samples.iter().map(|p| vec_norm(p)).fold(0.0, f64::max);
        if worst > 1.0 {
            return Err(GlueError::InvalidParams(format!("flow segment leaves the unit ball (|χ| = {worst:.3})")));
        }
        Ok(Self { spec: spec.clone(), morse, chi })
    }

    pub fn p_minus(&self) -> &[C64] {
        self.chi.start()
    }

    pub fn p_plus(&self) -> &[C64] {
        self.chi.end()
    }

    /// End shift `R + αb(ε)`.
    pub fn shift(&self, eps: f64) -> f64 {
        self.spec.l / eps + self.spec.alpha * b_eps(eps)
    }

    /// Limit ends in their own coordinates; with multiplicities when an extra family is set.
    pub fn ends(&self) -> (HolomorphicEnd, HolomorphicEnd) {
        let (k, m) = self.spec.extra.as_ref().map_or((1, 1), |x| (x.k, x.m));
        let minus = HolomorphicEnd {
            side: EndSide::Minus,
            point: self.p_minus().to_vec(),
            terms: vec![(m, self.spec.a_minus.clone())],
            shift: 0.0,
        };
        let plus = HolomorphicEnd {
            side: EndSide::Plus,
            point: self.p_plus().to_vec(),
            terms: vec![(k, self.spec.a_plus.clone())],
            shift: 0.0,
        };
        (minus, plus)
    }

    /// Largest chart norm of `grad f` along χ continued `ext` past both ends.
    pub fn sup_grad(&self, ext: f64) -> f64 {
        let mut pts = self.chi.samples.clone();
        let steps = (ext / self.chi.step).ceil() as usize;
        for q in 1..=steps {
            let s = (q as f64 * self.chi.step).min(ext);
            pts.push(self.chi.eval(&self.morse, self.spec.l + s));
            pts.push(self.chi.eval(&self.morse, -self.spec.l - s));
        }
        self.morse.sup_grad(&pts)
    }

    pub fn layout(&self, half: f64) -> Layout {
        Layout::nodes(TauAxis::covering(-half, half, self.spec.h_tau), self.spec.n_t, self.spec.n)
    }

    /// Samples the family on `layout`; `with_beta = false` drops the `β(ε)P(z)` term.
    pub fn build_on(&self, eps: f64, layout: Layout, with_beta: bool) -> Result<CylinderGrid> {
        let s = &self.spec;
        let r = s.l / eps;
        let lne = s.alpha * eps.ln();
        let (k, m) = s.extra.as_ref().map_or((1, 1), |x| (x.k, x.m));
        let beta = match (&s.extra, with_beta) {
            (Some(x), true) => x.beta(eps),
            _ => 0.0,
        };
        let n = s.n;
        let mut values = Vec::with_capacity(layout.size());
        for j in 0..layout.n_tau() {
            let tau = layout.tau(j);
            let chi = self.chi.eval(&self.morse, eps * tau);
            for i in 0..layout.n_t {
                let t = layout.t(i);
                // ε^α e^{−2πkR} z^k and ε^α e^{−2πmR} z^{−m}, exponents combined to avoid overflow.
                let zp = C64::new(lne + 2.0 * PI * k as f64 * (tau - r), 2.0 * PI * k as f64 * t).exp();
                let zm = C64::new(lne - 2.0 * PI * m as f64 * (tau + r), -2.0 * PI * m as f64 * t).exp();
                let mut v: Vec<C64> = (0..n).map(|q| chi[q] + s.a_plus[q] * zp + s.a_minus[q] * zm).collect();
                if beta != 0.0 {
                    for (pow, c) in &s.extra.as_ref().unwrap().p_coeffs {
                        let pj = *pow as f64;
                        let w = C64::new(2.0 * PI * (pj * tau - pj.abs() * r), 2.0 * PI * pj * t).exp() * beta;
                        for q in 0..n {
                            v[q] += c[q] * w;
                        }
                    }
                }
                values.extend(v);
            }
        }
        let g = CylinderGrid { layout, values };
        g.check_chart(&self.morse.model)?;
        Ok(g)
    }

    /// Default layout: `|τ| ≤ R + 2αb + 1`, covering the far-end region.
    pub fn build(&self, eps: f64) -> Result<CylinderGrid> {
        let half = self.spec.l / eps + 2.0 * self.spec.alpha * b_eps(eps) + 1.0;
        self.build_on(eps, self.layout(half), true)
    }
}

pub fn cpn_build(spec: &CpnExampleSpec, eps: f64) -> Result<CylinderGrid> {
    CpnExample::new(spec)?.build(eps)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CpnResidual {
    /// Largest chart norm of `∂_τu + i∂_tu − ε grad f(u)` over the cells.
    pub max_norm: f64,
    /// Largest deviation from `ε(grad f(χ) − grad f(u))`, both cell-averaged.
    pub oracle_gap: f64,
}

/// Residual of the example's equation on the cells with `|τ| ≤ reach`. Beyond, the end terms
/// push `|u|` to where the chart gradient of `f` is no longer meaningful.
pub fn cpn_residual(ex: &CpnExample, u: &CylinderGrid, eps: f64, reach: f64) -> Result<CpnResidual> {
    let l = u.layout;
    let pr: Section = principal(&u.as_section());
    let cl = pr.layout;
    let d = l.dim;
    let mut gu = vec![C64::default(); d];
    let (mut worst, mut gap): (f64, f64) = (0.0, 0.0);
    let mut chi_g = Vec::with_capacity(l.n_tau());
    for j in 0..l.n_tau() {
        chi_g.push(ex.morse.grad_f(&ex.chi.eval(&ex.morse, eps * l.tau(j))));
    }
    for c in 0..cl.n_tau() {
        if cl.tau(c).abs() > reach {
            continue;
        }
        for i in 0..l.n_t {
            let k = cl.idx(c, i);
            let mut f = pr.data[k..k + d].to_vec();
            let mut oracle = vec![C64::default(); d];
            for jj in [c, c + 1] {
                // grad of −f in the internal convention
                ex.morse.grad_into(u.at(jj, i), &mut gu);
                for q in 0..d {
                    f[q] += gu[q] * (0.5 * eps);
                    oracle[q] += (gu[q] - chi_g[jj][q]) * (0.5 * eps);
                }
            }
            worst = worst.max(vec_norm(&f));
            let diff: Vec<C64> = f.iter().zip(&oracle).map(|(a, b)| a - b).collect();
            gap = gap.max(vec_norm(&diff));
        }
    }
    Ok(CpnResidual { max_norm: worst, oracle_gap: gap })
}

/// Measured quantities and proof bounds at one `ε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CpnRow {
    pub eps: f64,
    pub neck_bound: f64,
    pub neck_sup: f64,
    pub transition_bound: f64,
    pub transition_sup: f64,
    pub far_bound: f64,
    pub far_sup: f64,
    pub energy_bound: f64,
    pub energy: f64,
    /// `E / (ε^{2α} + ε)`.
    pub energy_ratio: f64,
    pub residual: CpnResidual,
    pub distance: AdiaDistanceReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpnReport {
    pub rows: Vec<CpnRow>,
    /// Envelope constant fitted once over the sweep (largest energy ratio).
    pub c_tilde: f64,
    pub drift_ratio: f64,
    pub composite_decreasing: bool,
}

fn violated(what: &str, eps: f64, tau: f64, t: f64, value: f64, bound: f64) -> GlueError {
    GlueError::BoundViolated(format!("{what} at ε = {eps:.3e}, node (τ = {tau:.4}, t = {t:.4}): {value:.3e} > {bound:.3e}"))
}

/// Checks the chord inequalities `d_FS(a, b) ≤ |a − b|` and
/// `d_FS(a, b) ≤ (π/2)|a − b| / √(1 + max(|a|², |b|²))`.
fn chord_checked(a: &[C64], b: &[C64], eps: f64, tau: f64, t: f64) -> Result<f64> {
    let d = fs_distance(a, b);
    let diff: Vec<C64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let e = vec_norm(&diff);
    let big = 1.0 + vec_norm(a).max(vec_norm(b)).powi(2);
    let ratio = 0.5 * PI * e / big.sqrt();
    let slack = 1e-12 * (1.0 + d);
    if d > e + slack {
        return Err(violated("FS chord inequality", eps, tau, t, d, e));
    }
    if d > ratio + slack {
        return Err(violated("FS ratio inequality", eps, tau, t, d, ratio));
    }
    Ok(d)
}

/// One sweep point: every proof bound checked at every node.
pub fn cpn_row(ex: &CpnExample, eps: f64, zeta: f64) -> Result<CpnRow> {
    let s = &ex.spec;
    let u = ex.build(eps)?;
    let l = u.layout;
    let r = s.l / eps;
    let b = b_eps(eps);
    let (ap, am) = (vec_norm(&s.a_plus), vec_norm(&s.a_minus));
    let grad_sup = ex.sup_grad(2.0 * s.alpha * eps * b + 2.0 * eps * s.h_tau);
    let shift = ex.shift(eps);
    let (mut end_minus, mut end_plus) = ex.ends();
    end_minus.shift = -shift;
    end_plus.shift = shift;

    let neck_bound = eps.powf(s.alpha) * (ap + am);
    let trans_bound = |other: f64| 2.0 * grad_sup * s.alpha * eps * b + eps.powf(s.alpha) * other;
    let far_bound = |own: f64| 6.0 / (own * eps.powf(-s.alpha) - 2.0);
    let slack = 1e-9 * r;
    let (mut neck_sup, mut trans_sup, mut far_sup): (f64, f64, f64) = (0.0, 0.0, 0.0);
    let (mut trans_b, mut far_b): (f64, f64) = (0.0, 0.0);
    for j in 0..l.n_tau() {
        let tau = l.tau(j);
        let a = tau.abs();
        let plus = tau > 0.0;
        if a <= r + slack {
            let chi = ex.chi.eval(&ex.morse, eps * tau);
            for i in 0..l.n_t {
                let d = chord_checked(u.at(j, i), &chi, eps, tau, l.t(i))?;
                if d > neck_bound {
                    return Err(violated("neck bound (i)", eps, tau, l.t(i), d, neck_bound));
                }
                neck_sup = neck_sup.max(d);
            }
            continue;
        }
        let (end, own, other) = if plus { (&end_plus, ap, am) } else { (&end_minus, am, ap) };
        let far = a >= r + 2.0 * s.alpha * b - slack;
        let bound = if far { far_bound(own) } else { trans_bound(other) };
        if far && !(bound > 0.0) {
            return Err(GlueError::InvalidParams(format!("far-end bound undefined at ε = {eps}")));
        }
        for i in 0..l.n_t {
            let t = l.t(i);
            let v = end.eval(tau, t);
            let d = chord_checked(u.at(j, i), &v, eps, tau, t)?;
            if d > bound {
                let what = if far { "far-end bound (iii)" } else { "transition bound (ii)" };
                return Err(violated(what, eps, tau, t, d, bound));
            }
            if far {
                far_sup = far_sup.max(d);
                far_b = far_b.max(bound);
            } else {
                trans_sup = trans_sup.max(d);
                trans_b = trans_b.max(bound);
            }
        }
    }

    // |du| ≤ √3·a + √2·g with a = |holomorphic part|', g = ε|grad f|, so
    // |du|² ≤ 2C²(ε^{2α}e^{−4πR}e^{4π|τ|} + ε²) with this C.
    let c = (1.5f64.sqrt() * 2.0 * PI * (ap + am)).max(grad_sup);
    let energy_bound =
        2.0 * c * c * (eps.powf(2.0 * s.alpha) * (-(-4.0 * PI * s.l / eps).exp_m1()) / (2.0 * PI) + 2.0 * s.l * eps);
    let energy = energy_local(&u, &ex.morse.model, -r, r)?;
    if energy > energy_bound {
        return Err(GlueError::BoundViolated(format!("neck energy {energy:.3e} > {energy_bound:.3e} at ε = {eps:.3e}")));
    }
    let residual = cpn_residual(ex, &u, eps, r + s.alpha * b)?;
    let (u_minus, u_plus) = ex.ends();
    let target = AdiaTarget { morse: ex.morse.clone(), chi: ex.chi.clone(), u_minus, u_plus, r, tau_shift: shift };
    let distance = adia_distance(&u, &target, zeta)?;
    Ok(CpnRow {
        eps,
        neck_bound,
        neck_sup,
        transition_bound: trans_b,
        transition_sup: trans_sup,
        far_bound: far_b,
        far_sup,
        energy_bound,
        energy,
        energy_ratio: energy / (eps.powf(2.0 * s.alpha) + eps),
        residual,
        distance,
    })
}

/// Full sweep. Bound violations are errors; the energy drift and the monotonicity of the
/// composite distance are reported for the caller to judge.
pub fn cpn_verify_limit(spec: &CpnExampleSpec, sweep: &[f64], zeta: f64) -> Result<CpnReport> {
    if sweep.is_empty() || sweep.windows(2).any(|w| w[1] >= w[0]) || sweep.iter().any(|&e| !(e > 0.0 && e < 1.0)) {
        return Err(GlueError::InvalidParams("sweep must be strictly decreasing in (0, 1)".into()));
    }
    let ex = CpnExample::new(spec)?;
    let rows = sweep.iter().map(|&eps| cpn_row(&ex, eps, zeta)).collect::<Result<Vec<_>>>()?;
    Ok(summarize(rows))
}

pub fn summarize(rows: Vec<CpnRow>) -> CpnReport {
    let ratios = rows.iter().map(|r| r.energy_ratio);
    let c_tilde = ratios.clone().fold(0.0, f64::max);
    let lo = ratios.fold(f64::INFINITY, f64::min);
    let composite_decreasing = rows.windows(2).all(|w| w[1].distance.composite < w[0].distance.composite);
    CpnReport { rows, c_tilde, drift_ratio: c_tilde / lo, composite_decreasing }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtraFamilyReport {
    pub residual_norm: f64,
    /// Same `k, m` with `β ≡ 0`.
    pub base_residual_norm: f64,
    pub grid_distance: f64,
    /// Immersion of the limit ends (minus, plus) at their joints.
    pub immersion_at_joints: (bool, bool),
}

/// Builds the family with the `β(ε)P(z)` term and compares it against `β ≡ 0`.
///
/// The `z^j` terms of `P` carry an extra factor `e^{−2π|j|l/ε}` so that `β(ε)P` lives at the
/// same scale as the end terms; unnormalized, `ε²z` alone leaves every chart on the grid.
pub fn extra_family(spec: &CpnExampleSpec, eps: f64) -> Result<ExtraFamilyReport> {
    let x = spec.extra.as_ref().ok_or_else(|| GlueError::InvalidParams("spec has no extra family".into()))?;
    let ex = CpnExample::new(spec)?;
    let b = b_eps(eps);
    let r = spec.l / eps;
    let half = r + spec.alpha * b + 0.25;
    let layout = ex.layout(half);
    let with = ex.build_on(eps, layout, true)?;
    let without = ex.build_on(eps, layout, false)?;
    let reach = r + spec.alpha * b / x.k.max(x.m) as f64;
    let residual_norm = cpn_residual(&ex, &with, eps, reach)?.max_norm;
    let base_residual_norm = cpn_residual(&ex, &without, eps, reach)?.max_norm;
    let (em, ep) = ex.ends();
    Ok(ExtraFamilyReport {
        residual_norm,
        base_residual_norm,
        grid_distance: grid_distance(&with, &without)?,
        immersion_at_joints: (em.immersed_at_joint()?, ep.immersed_at_joint()?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_spec_is_valid_and_chi_stays_in_ball() {
        let ex = CpnExample::new(&CpnExampleSpec::default()).unwrap();
        assert!(ex.chi.samples.iter().all(|p| vec_norm(p) <= 1.0));
        // χ' = +grad f: f grows along the segment
        let f = |z: &[C64]| -ex.morse.f(z);
        assert!(f(ex.p_plus()) > f(ex.p_minus()));
    }

    #[test]
    fn dependent_amplitudes_rejected() {
        let mut s = CpnExampleSpec::default();
        s.a_minus = s.a_plus.iter().map(|a| a * C64::new(0.0, 2.0)).collect();
        assert!(matches!(s.validate(), Err(GlueError::InvalidParams(_))));
    }

    #[test]
    fn build_matches_closed_form_at_center() {
        let spec = CpnExampleSpec::default();
        let ex = CpnExample::new(&spec).unwrap();
        let eps = 0.25;
        let u = ex.build(eps).unwrap();
        let j = u.layout.axis.nearest(0.0);
        assert_eq!(u.layout.tau(j), 0.0);
        let scale = eps * (-2.0 * PI / eps).exp();
        let chi0 = ex.chi.eval(&ex.morse, 0.0);
        for i in 0..u.layout.n_t {
            let z = C64::new(0.0, 2.0 * PI * u.layout.t(i)).exp();
            for q in 0..2 {
                let want = (spec.a_plus[q] * z + spec.a_minus[q] / z) * scale + chi0[q];
                assert!((u.at(j, i)[q] - want).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn residual_matches_oracle() {
        // Holomorphic terms are exact for the box scheme; χ(ετ) leaves the trapezoid error
        // ε³h²χ'''/12, so the gap shrinks by 8 per halving of ε.
        let ex = CpnExample::new(&CpnExampleSpec::default()).unwrap();
        let gap = |eps: f64| {
            let u = ex.build(eps).unwrap();
            let res = cpn_residual(&ex, &u, eps, 1.0 / eps + b_eps(eps)).unwrap();
            assert!(res.max_norm > 0.0);
            res.oracle_gap
        };
        let (g1, g2) = (gap(1.0 / 16.0), gap(1.0 / 32.0));
        let rate = (g1 / g2).log2();
        assert!((rate - 3.0).abs() < 0.3, "rate {rate}");
        assert!(g1 < 0.1 / 16f64.powi(3), "{g1}");
    }

    #[test]
    fn bounds_hold_at_moderate_eps() {
        let ex = CpnExample::new(&CpnExampleSpec::default()).unwrap();
        let row = cpn_row(&ex, 1.0 / 64.0, 0.25).unwrap();
        assert!(row.neck_sup <= row.neck_bound);
        assert!(row.transition_sup <= row.transition_bound);
        assert!(row.far_sup <= row.far_bound);
        assert!(row.energy <= row.energy_bound);
    }

    #[test]
    fn sweep_must_decrease() {
        let s = CpnExampleSpec::default();
        assert!(cpn_verify_limit(&s, &[0.1, 0.2], 0.25).is_err());
    }

    #[test]
    fn extra_family_is_distinct_with_comparable_residual() {
        let rep = extra_family(&CpnExampleSpec::with_default_extra(2, 1), 1.0 / 64.0).unwrap();
        let ratio = rep.residual_norm / rep.base_residual_norm;
        assert!((0.5..2.0).contains(&ratio), "{rep:?}");
        assert!(rep.grid_distance > 1e-3, "{rep:?}");
        assert_eq!(rep.immersion_at_joints, (true, false));
    }

    #[test]
    fn immersion_of_ends() {
        let base = CpnExample::new(&CpnExampleSpec::with_default_extra(1, 1)).unwrap();
        let (m, p) = base.ends();
        assert!(m.immersed_at_joint().unwrap() && p.immersed_at_joint().unwrap());
        let ex = CpnExample::new(&CpnExampleSpec::with_default_extra(2, 1)).unwrap();
        let (m, p) = ex.ends();
        assert!(m.immersed_at_joint().unwrap());
        assert!(!p.immersed_at_joint().unwrap());
    }
}
