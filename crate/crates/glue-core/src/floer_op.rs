//! The perturbed Cauchy–Riemann operator `F(u) = ∂_τu + J₀∂_tu + K'(τ) grad(u)` on a grid,
//! its linearization and the ∂̄-error functional.
//!
//! `u` lives on nodes and `F(u)` on cells. Per Fourier mode the principal part is an
//! exponentially fitted box scheme, exact for `e^{λτ}` and for cell-constant sources; the
//! zero-order term is averaged over the two nodes of a cell.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::cylinder::{norm_lp, norm_resolved_eta, signed_k, CylinderGrid, Layout, ModeField, Section, WeightKind, WeightProfile};
use crate::cylinder::{d_t, d_tau};
use crate::error::{GlueError, Result};
use crate::preglue::{kappa0_at, kappa0_dr, kappa_end, zone_of, AdiabaticParams, DfdConfig, PregZone};
use crate::target::{MorseData, Potential};
use crate::C64;

/// Zero-order data of the equation. `neck_r` is the location of the neck cutoff; moving it
/// away from `L = l/ε` is how the length parameter μ enters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Equation {
    pub morse: MorseData,
    pub h_end: Option<Potential>,
    pub params: AdiabaticParams,
    pub neck_r: f64,
}

impl Equation {
    pub fn new(morse: MorseData, h_end: Option<Potential>, params: AdiabaticParams) -> Self {
        let neck_r = params.r();
        Self { morse, h_end, params, neck_r }
    }

    pub fn of_config(cfg: &DfdConfig, params: &AdiabaticParams) -> Self {
        Self::new(cfg.morse.clone(), cfg.h_end.clone(), *params)
    }

    pub fn shifted(&self, mu: f64) -> Self {
        Self { neck_r: self.params.r() + mu, ..self.clone() }
    }

    /// `ε κ⁰_R(τ)`.
    pub fn neck_coef(&self, tau: f64) -> f64 {
        self.params.eps * kappa0_at(tau, self.neck_r)
    }

    /// `κ_ε^±(τ)` when an end Hamiltonian is present.
    pub fn end_coef(&self, tau: f64) -> f64 {
        if self.h_end.is_some() {
            kappa_end(tau, &self.params)
        } else {
            0.0
        }
    }

    /// Zero-order vector field at `x`, added into `out` with the given coefficients.
    fn field_add(&self, cn: f64, ce: f64, x: &[C64], out: &mut [C64]) {
        let n = x.len();
        let mut g = [C64::default(); 8];
        if cn != 0.0 {
            self.morse.grad_into(x, &mut g[..n]);
            for k in 0..n {
                out[k] += g[k] * cn;
            }
        }
        if ce != 0.0 {
            if let Some(h) = &self.h_end {
                let mut st = [C64::default(); 8];
                h.grad_st(x, &mut st[..n]);
                self.morse.model.inverse_metric_apply(x, &st[..n], &mut g[..n]);
                for k in 0..n {
                    out[k] += g[k] * ce;
                }
            }
        }
    }

    fn dfield_add(&self, cn: f64, ce: f64, x: &[C64], v: &[C64], out: &mut [C64]) {
        let n = x.len();
        let mut g = [C64::default(); 8];
        if cn != 0.0 {
            self.morse.dgrad_into(x, v, &mut g[..n]);
            for k in 0..n {
                out[k] += g[k] * cn;
            }
        }
        if ce != 0.0 {
            if let Some(h) = &self.h_end {
                let mut st = [C64::default(); 8];
                let mut hv = [C64::default(); 8];
                h.grad_st(x, &mut st[..n]);
                h.hess_st(x, v, &mut hv[..n]);
                let model = &self.morse.model;
                model.inverse_metric_apply(x, &hv[..n], &mut g[..n]);
                model.inverse_metric_derivative_add(x, v, &st[..n], &mut g[..n]);
                for k in 0..n {
                    out[k] += g[k] * ce;
                }
            }
        }
    }
}

/// Box-scheme coefficients `(c₁, c₂)` with cell value `c₂ a_{j+1} − c₁ a_j` for `a' − λa`.
pub fn box_coefficients(lambda: f64, h: f64) -> (f64, f64) {
    if lambda == 0.0 {
        (1.0 / h, 1.0 / h)
    } else {
        (lambda / (-(-lambda * h).exp_m1()), lambda / (lambda * h).exp_m1())
    }
}

/// Mode eigenvalue `λ_k = 2πk/P` of `−J₀∂_t` on `e^{2πikt/P}`.
pub fn mode_lambda(k: i64, period: f64) -> f64 {
    2.0 * std::f64::consts::PI * k as f64 / period
}

fn check_dim(n: usize) -> Result<()> {
    if n > 8 {
        return Err(GlueError::ShapeMismatch(format!("target dimension {n} above 8")));
    }
    Ok(())
}

/// Principal part `∂_τ + J₀∂_t` from node samples to cells.
pub fn principal(s: &Section) -> Section {
    let nodes = ModeField::from_section(s);
    let cl = s.layout.cells_of();
    let mut out = ModeField::zeros(cl);
    let d = cl.dim;
    let h = s.layout.axis.step;
    for bin in 0..cl.n_t {
        let k = signed_k(bin, cl.n_t);
        let (c1, c2) = box_coefficients(mode_lambda(k, cl.period), h);
        let a = nodes.mode(k);
        let o = out.mode_mut(k);
        for c in 0..cl.n_tau() {
            for q in 0..d {
                o[c * d + q] = a[(c + 1) * d + q] * c2 - a[c * d + q] * c1;
            }
        }
    }
    out.to_section()
}

/// Residual field of the zone-appropriate equation, on cells.
pub fn dbar_evaluate(u: &CylinderGrid, eq: &Equation) -> Result<Section> {
    let l = u.layout;
    check_dim(l.dim)?;
    u.check_chart(&eq.morse.model)?;
    let mut out = principal(&u.as_section());
    let cl = out.layout;
    for c in 0..cl.n_tau() {
        let tau = cl.tau(c);
        let cn = 0.5 * eq.neck_coef(tau);
        let ce = 0.5 * eq.end_coef(tau);
        if cn == 0.0 && ce == 0.0 {
            continue;
        }
        for i in 0..l.n_t {
            let k = cl.idx(c, i);
            let o = &mut out.data[k..k + l.dim];
            eq.field_add(cn, ce, u.at(c, i), o);
            eq.field_add(cn, ce, u.at(c + 1, i), o);
        }
    }
    Ok(out)
}

/// Per-zone breakdown of the residual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoneResidual {
    pub zone: PregZone,
    /// `L^p_β` norm restricted to the zone.
    pub norm: f64,
    pub max_abs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    /// `‖F(u)‖_{L^p_β}`.
    pub total: f64,
    /// Resolved codomain norm of the same residual.
    pub resolved: f64,
    pub zones: Vec<ZoneResidual>,
}

/// `‖F(u_app)‖_{L^p_β}`.
pub fn error_norm(u_app: &CylinderGrid, eq: &Equation) -> Result<f64> {
    let r = dbar_evaluate(u_app, eq)?;
    let beta = WeightProfile::sample(WeightKind::BetaDeltaEps, &eq.params, &r.layout);
    Ok(norm_lp(&r, &beta.samples, eq.params.p))
}

pub fn error_report(u_app: &CylinderGrid, eq: &Equation) -> Result<ErrorReport> {
    let r = dbar_evaluate(u_app, eq)?;
    let cl = r.layout;
    let p = eq.params.p;
    let beta = WeightProfile::sample(WeightKind::BetaDeltaEps, &eq.params, &cl);
    let total = norm_lp(&r, &beta.samples, p);
    let resolved = norm_resolved_eta(&r, &eq.params)?.total;
    let zones = PregZone::ALL
        .iter()
        .map(|&z| {
            let w: Vec<f64> = (0..cl.n_tau())
                .map(|c| if zone_of(cl.tau(c), &eq.params) == z { beta.samples[c] } else { 0.0 })
                .collect();
            let mut max_abs: f64 = 0.0;
            for c in 0..cl.n_tau() {
                if w[c] != 0.0 {
                    for ch in r.slice(c).chunks_exact(cl.dim) {
                        max_abs = max_abs.max(crate::linalg::vec_norm(ch));
                    }
                }
            }
            ZoneResidual { zone: z, norm: norm_lp(&r, &w, p), max_abs }
        })
        .collect();
    Ok(ErrorReport { total, resolved, zones })
}

/// Exact derivative of the discrete operator at `base`, together with the μ column.
#[derive(Debug, Clone)]
pub struct LinearizedOp {
    pub base: CylinderGrid,
    pub eq: Equation,
    /// Halved zero-order coefficients per cell (neck, end).
    coef: Vec<(f64, f64)>,
    mu_col: Section,
}

impl LinearizedOp {
    pub fn layout(&self) -> Layout {
        self.base.layout
    }

    pub fn codomain(&self) -> Layout {
        self.base.layout.cells_of()
    }

    /// `Dξ`.
    pub fn apply(&self, xi: &Section) -> Result<Section> {
        if xi.layout != self.base.layout {
            return Err(GlueError::ShapeMismatch("section layout differs from base".into()));
        }
        let mut out = principal(xi);
        let l = self.base.layout;
        let cl = out.layout;
        for (c, &(cn, ce)) in self.coef.iter().enumerate() {
            if cn == 0.0 && ce == 0.0 {
                continue;
            }
            for i in 0..l.n_t {
                let k = cl.idx(c, i);
                let o = &mut out.data[k..k + l.dim];
                self.eq.dfield_add(cn, ce, self.base.at(c, i), xi.at(c, i), o);
                self.eq.dfield_add(cn, ce, self.base.at(c + 1, i), xi.at(c + 1, i), o);
            }
        }
        Ok(out)
    }

    /// `Dξ + μ s` where `s` is the derivative in the neck length.
    pub fn apply_para(&self, xi: &Section, mu: f64) -> Result<Section> {
        let mut out = self.apply(xi)?;
        out.axpy(mu, &self.mu_col);
        Ok(out)
    }

    pub fn mu_column(&self) -> &Section {
        &self.mu_col
    }

    /// Real matrix of the zero-order term at node `(j, i)` (coefficient at τ_j times the
    /// Jacobian of the gradient).
    pub fn a_field_at(&self, j: usize, i: usize) -> DMatrix<f64> {
        let tau = self.base.layout.tau(j);
        let x = self.base.at(j, i);
        let mut m = self.eq.morse.hess_grad_f(x) * self.eq.neck_coef(tau);
        if let (Some(h), ce) = (&self.eq.h_end, self.eq.end_coef(tau)) {
            if ce != 0.0 {
                let hm = MorseData { potential: h.clone(), ..self.eq.morse.clone() };
                m += hm.hess_grad_f(x) * ce;
            }
        }
        m
    }

    /// Constant complex structure of the chart as a real matrix.
    pub fn j_matrix(&self) -> DMatrix<f64> {
        let n = self.base.layout.dim;
        crate::linalg::realify(&DMatrix::from_diagonal_element(n, n, C64::new(0.0, 1.0)))
    }

    /// Halved per-cell coefficients used by `apply`.
    pub fn cell_coefficients(&self) -> &[(f64, f64)] {
        &self.coef
    }
}

pub fn linearize(u: &CylinderGrid, eq: &Equation) -> Result<LinearizedOp> {
    let l = u.layout;
    check_dim(l.dim)?;
    u.check_chart(&eq.morse.model)?;
    let cl = l.cells_of();
    let coef: Vec<(f64, f64)> =
        (0..cl.n_tau()).map(|c| (0.5 * eq.neck_coef(cl.tau(c)), 0.5 * eq.end_coef(cl.tau(c)))).collect();
    let mut mu_col = Section::zeros(cl);
    for c in 0..cl.n_tau() {
        let tau = cl.tau(c);
        let s = 0.5 * eq.params.eps * kappa0_dr(tau, eq.neck_r);
        if s == 0.0 {
            continue;
        }
        for i in 0..l.n_t {
            let k = cl.idx(c, i);
            let o = &mut mu_col.data[k..k + l.dim];
            eq.field_add(s, 0.0, u.at(c, i), o);
            eq.field_add(s, 0.0, u.at(c + 1, i), o);
        }
    }
    Ok(LinearizedOp { base: u.clone(), eq: eq.clone(), coef, mu_col })
}

/// `E(u) = ½ ∫ (|∂_τu|² + |∂_tu − X_K(u)|²)` with `X_K = J₀ K'(τ) grad`, trapezoid in τ.
pub fn energy(u: &CylinderGrid, eq: &Equation) -> Result<f64> {
    let l = u.layout;
    check_dim(l.dim)?;
    let s = u.as_section();
    let dtau = d_tau(&s)?;
    let mut dt = d_t(&s);
    for j in 0..l.n_tau() {
        let tau = l.tau(j);
        let (cn, ce) = (eq.neck_coef(tau), eq.end_coef(tau));
        if cn == 0.0 && ce == 0.0 {
            continue;
        }
        for i in 0..l.n_t {
            let mut g = [C64::default(); 8];
            eq.field_add(cn, ce, u.at(j, i), &mut g[..l.dim]);
            let o = dt.at_mut(j, i);
            for k in 0..l.dim {
                o[k] -= C64::new(0.0, 1.0) * g[k];
            }
        }
    }
    let model = &eq.morse.model;
    let w = l.tau_weights();
    let circle = l.period / l.n_t as f64;
    let mut e = 0.0;
    for j in 0..l.n_tau() {
        let mut acc = 0.0;
        for i in 0..l.n_t {
            let x = u.at(j, i);
            acc += model.inner(x, dtau.at(j, i), dtau.at(j, i)) + model.inner(x, dt.at(j, i), dt.at(j, i));
        }
        e += w[j] * acc * circle;
    }
    Ok(0.5 * e)
}

/// `½ ‖F(u)‖²_{L²}` in the metric; zero exactly on discrete solutions.
pub fn dbar_energy(u: &CylinderGrid, eq: &Equation) -> Result<f64> {
    let r = dbar_evaluate(u, eq)?;
    let model = &eq.morse.model;
    let cl = r.layout;
    let h = cl.axis.step;
    let circle = cl.period / cl.n_t as f64;
    let mut e = 0.0;
    for c in 0..cl.n_tau() {
        for i in 0..cl.n_t {
            e += h * circle * model.norm(u.at(c, i), r.at(c, i)).powi(2);
        }
    }
    Ok(0.5 * e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cylinder::TauAxis;
    use crate::preglue::{exact_config, flat_toy, preglue};
    use crate::target::TargetModel;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn flat_eq(eps: f64) -> Equation {
        let morse = MorseData::new(TargetModel::flat(2), Potential::quadratic(vec![1.0, 2.0])).unwrap();
        Equation::new(morse, None, AdiabaticParams::standard(eps))
    }

    fn small_layout() -> Layout {
        Layout::nodes(TauAxis::new(-3.0, 1.0 / 16.0, 97), 16, 2)
    }

    fn random_section(l: Layout, seed: u64) -> Section {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Section { layout: l, data: (0..l.size()).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect() }
    }

    #[test]
    fn box_scheme_exact_on_exponentials() {
        for &lam in &[0.0, 2.0 * std::f64::consts::PI, -12.0, 40.0] {
            let h = 1.0 / 16.0;
            let (c1, c2) = box_coefficients(lam, h);
            let a = |t: f64| (lam * t).exp();
            let r = c2 * a(0.3 + h) - c1 * a(0.3);
            assert!(r.abs() < 1e-11 * (1.0 + lam.abs()), "λ = {lam}: {r}");
            // cell-constant source: a' − λa = 1 from a(0) = 0
            let next = if lam == 0.0 { h } else { (lam * h).exp_m1() / lam };
            assert_abs_diff_eq!(c2 * next, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn holomorphic_maps_have_zero_residual() {
        let eq = flat_eq(0.25);
        let l = small_layout();
        let u = CylinderGrid::from_fn(l, |tau, t| {
            let z = C64::new(2.0 * std::f64::consts::PI * (tau - 3.0), 2.0 * std::f64::consts::PI * t).exp();
            vec![z * 0.3 + 0.1, z * z * 0.01]
        });
        // no zero-order term far from the neck cutoff
        let mut eq0 = eq.clone();
        eq0.neck_r = -10.0;
        let r = dbar_evaluate(&u, &eq0).unwrap();
        assert!(r.max_abs() < 1e-9, "{}", r.max_abs());
    }

    #[test]
    fn single_mode_closed_form() {
        let l = small_layout();
        let k = 2i64;
        let xi = Section::from_fn(l, |_, t| vec![C64::new(0.0, 2.0 * std::f64::consts::PI * k as f64 * t).exp() * 0.7, C64::default()]);
        let u = CylinderGrid::from_fn(l, |_, _| vec![C64::default(); 2]);
        let mut eq = flat_eq(0.25);
        eq.neck_r = -10.0;
        let d = linearize(&u, &eq).unwrap();
        let out = d.apply(&xi).unwrap();
        let expect = Section::from_fn(l.cells_of(), |_, t| {
            vec![C64::new(0.0, 2.0 * std::f64::consts::PI * k as f64 * t).exp() * (-2.0 * std::f64::consts::PI * k as f64 * 0.7), C64::default()]
        });
        assert!(out.sub(&expect).max_abs() < 1e-10);
        // constants are in the kernel
        let c = Section::from_fn(l, |_, _| vec![C64::new(0.3, 0.1), C64::new(-1.0, 2.0)]);
        assert!(d.apply(&c).unwrap().max_abs() < 1e-11);
    }

    #[test]
    fn linearity_and_mode_invariance() {
        let l = small_layout();
        let u = CylinderGrid::from_fn(l, |tau, _| vec![C64::new(0.2 * tau, 0.1), C64::new(0.0, 0.3)]);
        let mut eq = flat_eq(0.5);
        eq.neck_r = 1.0;
        let d = linearize(&u, &eq).unwrap();
        let a = random_section(l, 1);
        let b = random_section(l, 2);
        let mut comb = a.scale(0.3);
        comb.axpy(-1.7, &b);
        let mut expect = d.apply(&a).unwrap().scale(0.3);
        expect.axpy(-1.7, &d.apply(&b).unwrap());
        assert!(d.apply(&comb).unwrap().sub(&expect).max_abs() < 1e-12);
        // t-independent base: zero-order part maps higher modes to higher modes
        let (_, higher) = crate::cylinder::mode_decompose(&a);
        let xt = higher.to_section();
        let out = d.apply(&xt).unwrap();
        for c in 0..out.layout.n_tau() {
            assert!(crate::linalg::vec_norm(&out.slice_mean(c)) < 1e-10);
        }
    }

    #[test]
    fn linearization_matches_differences() {
        let cfg = flat_toy().unwrap();
        let p = AdiabaticParams::standard(0.25);
        let u = preglue(&cfg, &p).unwrap();
        let mut eq = Equation::of_config(&cfg, &p);
        // quartic term so the map is genuinely nonlinear
        eq.morse.potential.quartic = 0.5;
        let d = linearize(&u, &eq).unwrap();
        let xi = random_section(u.layout, 5).scale(0.1);
        let dxi = d.apply(&xi).unwrap();
        let f0 = dbar_evaluate(&u, &eq).unwrap();
        let err = |h: f64| {
            let f = dbar_evaluate(&u.add_section(&xi.scale(h)).unwrap(), &eq).unwrap();
            f.sub(&f0).scale(1.0 / h).sub(&dxi).max_abs()
        };
        let (e1, e2) = (err(1e-2), err(5e-3));
        let slope = (e1 / e2).log2();
        assert!(slope > 0.9, "slope {slope} ({e1}, {e2})");
        // μ column against shifting the cutoff
        let h = 1e-5;
        let fm = dbar_evaluate(&u, &eq.shifted(h)).unwrap();
        let fd = fm.sub(&f0).scale(1.0 / h);
        assert!(fd.sub(d.mu_column()).max_abs() < 1e-4 * (1.0 + d.mu_column().max_abs()));
    }

    #[test]
    fn preglued_residual_supported_on_bridges() {
        let cfg = flat_toy().unwrap();
        for k in 3..6 {
            let p = AdiabaticParams::standard(0.5f64.powi(k));
            let u = preglue(&cfg, &p).unwrap();
            let rep = error_report(&u, &Equation::of_config(&cfg, &p)).unwrap();
            for z in &rep.zones {
                match z.zone {
                    // rounding only; the ends reach |w| = 1 at the grid edge
                    PregZone::EndMinus | PregZone::EndPlus => assert!(z.max_abs < 1e-11, "{z:?}"),
                    // trapezoid discretization of the flow line on the neck
                    PregZone::Neck => assert!(z.max_abs < 3e-3 * p.eps.powi(3), "{z:?}"),
                    _ => assert!(z.max_abs > 1e-6 && z.max_abs < 2.0 * p.eps, "{z:?}"),
                }
            }
        }
    }

    #[test]
    fn exact_configuration_has_no_error() {
        let cfg = exact_config(2).unwrap();
        let p = AdiabaticParams::standard(0.25);
        let u = preglue(&cfg, &p).unwrap();
        let eq = Equation::of_config(&cfg, &p);
        assert_eq!(error_norm(&u, &eq).unwrap(), 0.0);
        assert_eq!(energy(&u, &eq).unwrap(), 0.0);
        assert_eq!(dbar_energy(&u, &eq).unwrap(), 0.0);
    }

    #[test]
    fn energies_nonnegative() {
        let cfg = flat_toy().unwrap();
        let p = AdiabaticParams::standard(0.25);
        let u = preglue(&cfg, &p).unwrap();
        let eq = Equation::of_config(&cfg, &p);
        assert!(energy(&u, &eq).unwrap() > 0.0);
        assert!(dbar_energy(&u, &eq).unwrap() > 0.0);
    }
}
