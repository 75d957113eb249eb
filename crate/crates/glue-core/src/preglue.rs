//! Cutoffs, adiabatic parameters, the glued Hamiltonian profile and the approximate solution.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::cylinder::{CylinderGrid, Layout, TauAxis};
use crate::error::{GlueError, Result};
use crate::flow::{flow_differential, immersion_check, solve_gradient_segment, DiskFrame, GradientSegment, JointData};
use crate::linalg::{vec_norm, vec_sub};
use crate::target::{exp_map, log_map, MorseData, Potential, TargetModel};
use crate::C64;

/// Allowed joint mismatch between an end and the flow segment.
pub const TOL_MATCH: f64 = 1e-10;

/// `(ε, l, p, δ)` and the derived lengths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdiabaticParams {
    pub eps: f64,
    pub l: f64,
    pub p: f64,
    pub delta: f64,
}

impl AdiabaticParams {
    pub fn new(eps: f64, l: f64, p: f64, delta: f64) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(GlueError::InvalidParams(format!("eps = {eps}")));
        }
        if !(l > 0.0 && l.is_finite()) {
            return Err(GlueError::InvalidParams(format!("l = {l}")));
        }
        if !(p > 2.0 && p.is_finite()) {
            return Err(GlueError::InvalidParams(format!("p = {p} must exceed 2")));
        }
        let cap = 1.0f64.min(1.0 - 1.0 / p);
        if !(delta > 0.0 && delta < cap) {
            return Err(GlueError::InvalidParams(format!("delta = {delta} outside (0, {cap})")));
        }
        Ok(Self { eps, l, p, delta })
    }

    /// `l = 1`, `p = 4`, `δ = ½`.
    pub fn standard(eps: f64) -> Self {
        Self { eps, l: 1.0, p: 4.0, delta: 0.5 }
    }

    pub fn with_eps(&self, eps: f64) -> Self {
        Self { eps, ..*self }
    }

    /// Neck half-length `R = l/ε`.
    pub fn r(&self) -> f64 {
        self.l / self.eps
    }

    pub fn s(&self) -> f64 {
        (1.0 + self.l / self.eps).ln() / (2.0 * std::f64::consts::PI)
    }

    /// `(p − 1)/δ`.
    pub fn decay_ratio(&self) -> f64 {
        (self.p - 1.0) / self.delta
    }

    pub fn tau_eps(&self) -> f64 {
        self.r() + self.decay_ratio() * self.s()
    }

    /// Splice length `T = (1/3)((p−1)/δ) S`.
    pub fn t_splice(&self) -> f64 {
        self.decay_ratio() * self.s() / 3.0
    }
}

/// Quintic smoothstep clamped to `[0, 1]`.
pub fn smoothstep(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        x * x * x * (x * (6.0 * x - 15.0) + 10.0)
    }
}

pub fn smoothstep_deriv(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        0.0
    } else {
        30.0 * x * x * (x - 1.0) * (x - 1.0)
    }
}

/// 0 on `(−∞, 1]`, 1 on `[2, ∞)`.
pub fn kappa_plus(tau: f64) -> f64 {
    smoothstep(tau - 1.0)
}

/// Neck cutoff with plateau `|τ| ≤ R`, vanishing for `|τ| ≥ R + 1`.
pub fn kappa0_at(tau: f64, big_r: f64) -> f64 {
    1.0 - smoothstep(tau.abs() - big_r)
}

/// `∂κ⁰/∂R`.
pub fn kappa0_dr(tau: f64, big_r: f64) -> f64 {
    smoothstep_deriv(tau.abs() - big_r)
}

pub fn kappa0_eps(tau: f64, params: &AdiabaticParams) -> f64 {
    kappa0_at(tau, params.r())
}

/// End cutoffs `κ_ε^±`: zero up to `±τ(ε)`, one beyond `±(τ(ε) + 1)`.
pub fn kappa_end(tau: f64, params: &AdiabaticParams) -> f64 {
    smoothstep(tau.abs() - params.tau_eps())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Zone {
    EndMinus,
    Neck,
    EndPlus,
}

/// Zone tag and cutoff multiplier of the glued Hamiltonian. On the neck the multiplier
/// multiplies `f` (it already contains ε); on the ends it multiplies the end Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KProfile {
    pub zone: Zone,
    pub multiplier: f64,
}

impl KProfile {
    pub fn value(&self, morse: &MorseData, h_end: Option<&Potential>, x: &[C64]) -> f64 {
        match self.zone {
            Zone::Neck => self.multiplier * morse.f(x),
            _ => h_end.map_or(0.0, |h| self.multiplier * h.value(x)),
        }
    }
}

#[allow(non_snake_case)]
pub fn hamiltonian_K_eps(tau: f64, params: &AdiabaticParams) -> KProfile {
    let big_r = params.r();
    if tau.abs() <= big_r + 1.0 {
        KProfile { zone: Zone::Neck, multiplier: params.eps * kappa0_at(tau, big_r) }
    } else {
        let zone = if tau > 0.0 { Zone::EndPlus } else { Zone::EndMinus };
        KProfile { zone, multiplier: kappa_end(tau, params) }
    }
}

/// Five-zone labels of the approximate solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PregZone {
    EndMinus,
    BridgeMinus,
    Neck,
    BridgePlus,
    EndPlus,
}

impl PregZone {
    pub const ALL: [PregZone; 5] =
        [PregZone::EndMinus, PregZone::BridgeMinus, PregZone::Neck, PregZone::BridgePlus, PregZone::EndPlus];

    pub fn label(&self) -> &'static str {
        match self {
            PregZone::EndMinus => "end_minus",
            PregZone::BridgeMinus => "bridge_minus",
            PregZone::Neck => "neck",
            PregZone::BridgePlus => "bridge_plus",
            PregZone::EndPlus => "end_plus",
        }
    }
}

/// The neck zone is closed: `|τ| = L` belongs to it.
pub fn zone_of(tau: f64, params: &AdiabaticParams) -> PregZone {
    let a = tau.abs();
    let big_l = params.r();
    let slack = 1e-9 * big_l.max(1.0);
    if a <= big_l + slack {
        PregZone::Neck
    } else if a < big_l + 1.0 - slack {
        if tau > 0.0 {
            PregZone::BridgePlus
        } else {
            PregZone::BridgeMinus
        }
    } else if tau > 0.0 {
        PregZone::EndPlus
    } else {
        PregZone::EndMinus
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EndSide {
    Minus,
    Plus,
}

/// Polynomial holomorphic end `p + Σ A_k w^k`, with `w = e^{2π(s − shift + it)}` on the plus
/// side and `w = e^{−2π(s − shift + it)}` on the minus side. The puncture `w = 0` sits towards
/// the neck.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolomorphicEnd {
    pub side: EndSide,
    pub point: Vec<C64>,
    pub terms: Vec<(u32, Vec<C64>)>,
    pub shift: f64,
}

impl HolomorphicEnd {
    pub fn linear(side: EndSide, point: Vec<C64>, amplitude: Vec<C64>) -> Self {
        Self { side, point, terms: vec![(1, amplitude)], shift: 0.0 }
    }

    pub fn constant(side: EndSide, point: Vec<C64>) -> Self {
        Self { side, point, terms: Vec::new(), shift: 0.0 }
    }

    pub fn disk_coordinate(&self, s: f64, t: f64) -> C64 {
        let two_pi = 2.0 * std::f64::consts::PI;
        let sign = match self.side {
            EndSide::Plus => 1.0,
            EndSide::Minus => -1.0,
        };
        C64::new(sign * two_pi * (s - self.shift), sign * two_pi * t).exp()
    }

    pub fn eval(&self, s: f64, t: f64) -> Vec<C64> {
        let w = self.disk_coordinate(s, t);
        let mut out = self.point.clone();
        for (k, a) in &self.terms {
            let wk = w.powu(*k);
            for (o, c) in out.iter_mut().zip(a) {
                *o += c * wk;
            }
        }
        out
    }

    /// Sum of coefficient norms, a bound for `|u − p|/|w|` when `|w| ≤ 1`.
    pub fn amplitude(&self) -> f64 {
        self.terms.iter().map(|(_, a)| vec_norm(a)).sum()
    }

    pub fn frame(&self) -> DiskFrame {
        match self.side {
            EndSide::Plus => DiskFrame::Plus { tau0: self.shift },
            EndSide::Minus => DiskFrame::Minus { tau0: self.shift },
        }
    }

    /// Immersion at the puncture, read off a small sampled patch close to it.
    pub fn immersed_at_joint(&self) -> Result<bool> {
        let s0 = match self.side {
            EndSide::Plus => self.shift - 4.5,
            EndSide::Minus => self.shift + 4.5,
        };
        let h = 1.0 / 64.0;
        let axis = TauAxis::new(s0 - 4.0 * h, h, 9);
        let layout = Layout::nodes(axis, 16, self.point.len());
        let g = CylinderGrid::from_fn(layout, |s, t| self.eval(s, t));
        immersion_check(&g, (4, 0), self.frame())
    }
}

/// How the bridge zones combine the flow line and the ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BridgeArithmetic {
    /// Convex combination in the chart (the tangent chart at the joint).
    Chart,
    /// `exp_{p±}(κ⁰ log χ + (1 − κ⁰) log u)`.
    Exponential,
}

/// A disk-flow-disk configuration with analytic ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DfdConfig {
    pub id: String,
    pub morse: MorseData,
    pub chi: GradientSegment,
    pub u_minus: HolomorphicEnd,
    pub u_plus: HolomorphicEnd,
    pub h_end: Option<Potential>,
    pub joints: JointData,
    pub class_minus: String,
    pub class_plus: String,
    /// How far past `±τ(ε)` the grid extends.
    pub tau_cut: f64,
    pub n_t: usize,
    pub h_tau: f64,
}

impl DfdConfig {
    pub fn dim(&self) -> usize {
        self.morse.dim()
    }

    pub fn model(&self) -> &TargetModel {
        &self.morse.model
    }

    /// `(|u₋(o₋) − χ(−l)|, |u₊(o₊) − χ(l)|)`.
    pub fn matching_residual(&self) -> (f64, f64) {
        (
            vec_norm(&vec_sub(&self.u_minus.point, self.chi.start())),
            vec_norm(&vec_sub(&self.u_plus.point, self.chi.end())),
        )
    }

    pub fn joint_immersion(&self) -> Result<(bool, bool)> {
        Ok((self.u_minus.immersed_at_joint()?, self.u_plus.immersed_at_joint()?))
    }

    /// Layout of the glued grid for these parameters.
    pub fn layout(&self, params: &AdiabaticParams) -> Layout {
        let te = params.tau_eps();
        let axis = TauAxis::covering(-te - self.tau_cut, te + self.tau_cut, self.h_tau);
        Layout::nodes(axis, self.n_t, self.dim())
    }

    pub fn with_resolution(&self, n_t: usize, h_tau: f64) -> Self {
        Self { n_t, h_tau, ..self.clone() }
    }
}

/// Joint data with full evaluation images (constants lie in the kernel of each end).
pub fn joint_data(morse: &MorseData, chi: &GradientSegment) -> Result<JointData> {
    let m = 2 * morse.dim();
    Ok(JointData {
        v_minus: DMatrix::identity(m, m),
        v_plus: DMatrix::identity(m, m),
        p: flow_differential(morse, chi)?,
        p_minus: chi.start().to_vec(),
        p_plus: chi.end().to_vec(),
    })
}

/// Parameters of the flat two-dimensional test configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatToySpec {
    pub lambda: Vec<f64>,
    pub x_start: Vec<C64>,
    pub a_minus: Vec<C64>,
    pub a_plus: Vec<C64>,
    pub l: f64,
    pub tau_cut: f64,
    pub n_t: usize,
    pub h_tau: f64,
}

impl Default for FlatToySpec {
    fn default() -> Self {
        Self {
            lambda: vec![1.0, 2.0],
            x_start: vec![C64::new(0.5, 0.0), C64::new(0.0, 0.5)],
            a_minus: vec![C64::new(0.3, 0.0), C64::new(0.0, 0.4)],
            a_plus: vec![C64::new(0.0, 0.3), C64::new(0.4, 0.0)],
            l: 1.0,
            tau_cut: 0.5,
            n_t: 64,
            h_tau: 1.0 / 16.0,
        }
    }
}

pub fn flat_toy_with(spec: &FlatToySpec) -> Result<DfdConfig> {
    let n = spec.lambda.len();
    if spec.x_start.len() != n || spec.a_minus.len() != n || spec.a_plus.len() != n {
        return Err(GlueError::ShapeMismatch("flat toy vector lengths".into()));
    }
    let morse = MorseData::new(TargetModel::flat(n), Potential::quadratic(spec.lambda.clone()))?;
    let chi = solve_gradient_segment(&morse, &spec.x_start, spec.l)?;
    let joints = joint_data(&morse, &chi)?;
    let u_minus = HolomorphicEnd::linear(EndSide::Minus, chi.start().to_vec(), spec.a_minus.clone());
    let u_plus = HolomorphicEnd::linear(EndSide::Plus, chi.end().to_vec(), spec.a_plus.clone());
    Ok(DfdConfig {
        id: "flat-toy".into(),
        morse,
        chi,
        u_minus,
        u_plus,
        h_end: None,
        joints,
        class_minus: "A-".into(),
        class_plus: "A+".into(),
        tau_cut: spec.tau_cut,
        n_t: spec.n_t,
        h_tau: spec.h_tau,
    })
}

pub fn flat_toy() -> Result<DfdConfig> {
    flat_toy_with(&FlatToySpec::default())
}

/// Constant configuration at the critical point: already an exact solution.
pub fn exact_config(n: usize) -> Result<DfdConfig> {
    let lambda: Vec<f64> = (1..=n).map(|k| k as f64).collect();
    let zero = vec![C64::default(); n];
    let spec = FlatToySpec { lambda, x_start: zero.clone(), a_minus: zero.clone(), a_plus: zero, ..FlatToySpec::default() };
    let mut cfg = flat_toy_with(&spec)?;
    cfg.id = "exact".into();
    cfg.u_minus.terms.clear();
    cfg.u_plus.terms.clear();
    Ok(cfg)
}

pub fn preglue(cfg: &DfdConfig, params: &AdiabaticParams) -> Result<CylinderGrid> {
    preglue_with(cfg, params, BridgeArithmetic::Chart)
}

pub fn preglue_with(cfg: &DfdConfig, params: &AdiabaticParams, bridge: BridgeArithmetic) -> Result<CylinderGrid> {
    let (rm, rp) = cfg.matching_residual();
    if rm.max(rp) > TOL_MATCH {
        return Err(GlueError::MatchingViolated { residual: rm.max(rp) });
    }
    let layout = cfg.layout(params);
    let te = params.tau_eps();
    let big_l = params.r();
    let model = cfg.model();
    let mut values = Vec::with_capacity(layout.size());
    for j in 0..layout.n_tau() {
        let tau = layout.tau(j);
        let zone = zone_of(tau, params);
        let chi = match zone {
            PregZone::EndMinus | PregZone::EndPlus => None,
            _ => Some(cfg.chi.eval(&cfg.morse, params.eps * tau)),
        };
        let (end, s) = if tau > 0.0 { (&cfg.u_plus, tau - te) } else { (&cfg.u_minus, tau + te) };
        for i in 0..layout.n_t {
            let t = layout.t(i);
            let v = match zone {
                PregZone::Neck => chi.clone().unwrap(),
                PregZone::EndMinus | PregZone::EndPlus => end.eval(s, t),
                PregZone::BridgeMinus | PregZone::BridgePlus => {
                    let k = kappa0_at(tau, big_l);
                    let c = chi.as_ref().unwrap();
                    let e = end.eval(s, t);
                    match bridge {
                        BridgeArithmetic::Chart => c.iter().zip(&e).map(|(a, b)| a * k + b * (1.0 - k)).collect(),
                        BridgeArithmetic::Exponential => {
                            let base = &end.point;
                            let la = log_map(model, base, c)?;
                            let lb = log_map(model, base, &e)?;
                            let v: Vec<C64> = la.iter().zip(&lb).map(|(a, b)| a * k + b * (1.0 - k)).collect();
                            exp_map(model, base, &v)?
                        }
                    }
                }
            };
            values.extend_from_slice(&v);
        }
    }
    let g = CylinderGrid { layout, values };
    g.check_chart(model)?;
    Ok(g)
}

/// Measured distances behind the interpolation-locality property.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalityReport {
    /// `max dist(χ(ετ), p±)` over bridge nodes.
    pub chi_max: f64,
    /// `ε sup|grad f|` along the bridge.
    pub chi_bound: f64,
    /// `max dist(u±^ε, p±)` over bridge nodes.
    pub end_max: f64,
    /// `end_max · (1 + l/ε)^{(p−1)/δ}`, the measured constant.
    pub end_constant: f64,
}

pub fn bridge_locality(cfg: &DfdConfig, params: &AdiabaticParams) -> Result<LocalityReport> {
    let layout = cfg.layout(params);
    let te = params.tau_eps();
    let model = cfg.model();
    let mut chi_max: f64 = 0.0;
    let mut end_max: f64 = 0.0;
    let mut grads: Vec<Vec<C64>> = Vec::new();
    for j in 0..layout.n_tau() {
        let tau = layout.tau(j);
        let zone = zone_of(tau, params);
        if !matches!(zone, PregZone::BridgeMinus | PregZone::BridgePlus) {
            continue;
        }
        let chi = cfg.chi.eval(&cfg.morse, params.eps * tau);
        let (end, s) = if tau > 0.0 { (&cfg.u_plus, tau - te) } else { (&cfg.u_minus, tau + te) };
        chi_max = chi_max.max(model.distance(&chi, &end.point));
        grads.push(chi);
        for i in 0..layout.n_t {
            end_max = end_max.max(model.distance(&end.eval(s, layout.t(i)), &end.point));
        }
    }
    let sup = cfg.morse.sup_grad(&grads);
    Ok(LocalityReport {
        chi_max,
        chi_bound: params.eps * sup,
        end_max,
        end_constant: end_max * (1.0 + params.l / params.eps).powf(params.decay_ratio()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn params_derived_quantities() {
        let p = AdiabaticParams::new(0.125, 1.0, 4.0, 0.5).unwrap();
        assert_eq!(p.r(), 8.0);
        let s = 9.0f64.ln() / (2.0 * std::f64::consts::PI);
        assert_abs_diff_eq!(p.s(), s, epsilon = 1e-15);
        assert_abs_diff_eq!(p.tau_eps(), 8.0 + 6.0 * s, epsilon = 1e-13);
        assert_abs_diff_eq!(p.t_splice(), 2.0 * s, epsilon = 1e-14);
        assert!(p.t_splice() < p.decay_ratio() * p.s());
    }

    #[test]
    fn params_reject_bad_input() {
        assert!(AdiabaticParams::new(0.0, 1.0, 4.0, 0.5).is_err());
        assert!(AdiabaticParams::new(0.1, 1.0, 2.0, 0.5).is_err());
        assert!(AdiabaticParams::new(0.1, 1.0, 4.0, 0.8).is_err());
        assert!(AdiabaticParams::new(0.1, -1.0, 4.0, 0.5).is_err());
    }

    #[test]
    fn kappa_values() {
        assert_eq!(kappa_plus(0.5), 0.0);
        assert_eq!(kappa_plus(1.0), 0.0);
        assert_eq!(kappa_plus(3.0), 1.0);
        assert_eq!(kappa_plus(2.0), 1.0);
        assert_abs_diff_eq!(kappa_plus(1.5), 0.5, epsilon = 1e-15);
        let p = AdiabaticParams::standard(0.125);
        assert_eq!(kappa0_eps(4.0, &p), 1.0);
        assert_eq!(kappa0_eps(-10.0, &p), 0.0);
    }

    #[test]
    fn smoothstep_slope_maximum() {
        let max = (0..=100_000).map(|k| smoothstep_deriv(k as f64 / 100_000.0)).fold(0.0, f64::max);
        assert_abs_diff_eq!(max, 1.875, epsilon = 1e-12);
        // derivative agrees with differences
        for &x in &[0.1, 0.3, 0.5, 0.77] {
            let h = 1e-6;
            let fd = (smoothstep(x + h) - smoothstep(x - h)) / (2.0 * h);
            assert_abs_diff_eq!(fd, smoothstep_deriv(x), epsilon = 1e-8);
        }
    }

    #[test]
    fn k_profile_zones() {
        let p = AdiabaticParams::standard(0.125);
        let k = hamiltonian_K_eps(0.0, &p);
        assert_eq!(k.zone, Zone::Neck);
        assert_eq!(k.multiplier, 0.125);
        let k = hamiltonian_K_eps(p.tau_eps() + 2.0, &p);
        assert_eq!(k, KProfile { zone: Zone::EndPlus, multiplier: 1.0 });
        let k = hamiltonian_K_eps(-p.tau_eps() - 2.0, &p);
        assert_eq!(k.zone, Zone::EndMinus);
        let k = hamiltonian_K_eps(p.r() + 0.5, &p);
        assert!(k.multiplier > 0.0 && k.multiplier < p.eps);
        // continuity across the neck/end joint
        let a = hamiltonian_K_eps(p.r() + 1.0, &p).multiplier;
        let b = hamiltonian_K_eps(p.r() + 1.0 + 1e-9, &p).multiplier;
        assert_abs_diff_eq!(a, b, epsilon = 1e-12);
    }

    #[test]
    fn preglue_zone_equalities() {
        let cfg = flat_toy().unwrap();
        let p = AdiabaticParams::standard(0.125);
        let g = preglue(&cfg, &p).unwrap();
        let l = g.layout;
        let j0 = l.axis.nearest(0.0);
        assert_eq!(l.tau(j0), 0.0);
        let chi0 = cfg.chi.eval(&cfg.morse, 0.0);
        for i in 0..l.n_t {
            assert_eq!(g.at(j0, i), &chi0[..]);
        }
        // far end equals the translated end sample for sample
        let te = p.tau_eps();
        for j in 0..l.n_tau() {
            let tau = l.tau(j);
            if tau >= p.r() + 1.0 {
                for i in 0..l.n_t {
                    assert_eq!(g.at(j, i), &cfg.u_plus.eval(tau - te, l.t(i))[..]);
                }
            }
        }
        // κ⁰ = ½ in the middle of the bridge
        let jm = l.axis.nearest(p.r() + 0.5);
        assert_abs_diff_eq!(kappa0_at(l.tau(jm), p.r()), 0.5, epsilon = 1e-15);
        let chi = cfg.chi.eval(&cfg.morse, p.eps * l.tau(jm));
        let e = cfg.u_plus.eval(l.tau(jm) - te, l.t(3));
        for c in 0..2 {
            assert_abs_diff_eq!((g.at(jm, 3)[c] - (chi[c] + e[c]) * 0.5).norm(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn preglue_rejects_mismatch() {
        let mut cfg = flat_toy().unwrap();
        cfg.u_plus.point[0] += C64::new(1e-6, 0.0);
        assert!(matches!(preglue(&cfg, &AdiabaticParams::standard(0.25)), Err(GlueError::MatchingViolated { .. })));
    }

    #[test]
    fn exponential_bridge_matches_chart_on_flat() {
        let cfg = flat_toy().unwrap();
        let p = AdiabaticParams::standard(0.25);
        let a = preglue(&cfg, &p).unwrap();
        let b = preglue_with(&cfg, &p, BridgeArithmetic::Exponential).unwrap();
        let d = a.diff(&b).unwrap();
        assert!(d.max_abs() < 1e-14);
    }

    #[test]
    fn joints_are_immersed() {
        let cfg = flat_toy().unwrap();
        assert_eq!(cfg.joint_immersion().unwrap(), (true, true));
        let mut e = cfg.u_plus.clone();
        e.terms = vec![(2, vec![C64::new(0.3, 0.0), C64::default()])];
        assert!(!e.immersed_at_joint().unwrap());
    }

    #[test]
    fn locality_bounds() {
        let cfg = flat_toy().unwrap();
        for k in 3..7 {
            let p = AdiabaticParams::standard(0.5f64.powi(k));
            let r = bridge_locality(&cfg, &p).unwrap();
            assert!(r.chi_max <= r.chi_bound * 1.0001, "{r:?}");
            assert!(r.end_constant.is_finite());
        }
    }
}
