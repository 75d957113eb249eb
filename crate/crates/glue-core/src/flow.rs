//! Gradient segments `χ̇ = −grad f(χ)`, their linearized flow, transversality and index arithmetic.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::cylinder::{d_t, d_tau, CylinderGrid};
use crate::error::{GlueError, Result};
use crate::linalg::{from_real, hstack, rank, to_real, vec_norm};
use crate::ode::rk4_step;
use crate::target::MorseData;
use crate::C64;

/// Default RK4 step for segments.
pub const SEGMENT_STEP: f64 = 1.0 / 1024.0;

pub const TOL_RANK: f64 = 1e-8;

/// Gradient segment on `[−l, l]` sampled on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientSegment {
    pub l: f64,
    pub step: f64,
    pub samples: Vec<Vec<C64>>,
}

fn flow_rhs(morse: &MorseData, sign: f64) -> impl Fn(&[C64], &mut [C64]) + '_ {
    move |y: &[C64], out: &mut [C64]| {
        morse.grad_into(y, out);
        out.iter_mut().for_each(|x| *x *= -sign);
    }
}

impl GradientSegment {
    pub fn start(&self) -> &[C64] {
        &self.samples[0]
    }

    pub fn end(&self) -> &[C64] {
        self.samples.last().unwrap()
    }

    pub fn dim(&self) -> usize {
        self.samples[0].len()
    }

    /// χ(σ) for σ ∈ [−l, l] by cubic Hermite interpolation (derivatives from the flow); outside,
    /// the flow line is continued by RK4 from the nearest endpoint.
    pub fn eval(&self, morse: &MorseData, sigma: f64) -> Vec<C64> {
        let l = self.l;
        if sigma > l || sigma < -l {
            let (from, dir) = if sigma > l { (self.end(), 1.0) } else { (self.start(), -1.0) };
            let span = (sigma.abs() - l).abs();
            let steps = (span / self.step).ceil().max(1.0) as usize;
            let h = span / steps as f64;
            let mut y = from.to_vec();
            let rhs = flow_rhs(morse, dir);
            for _ in 0..steps {
                rk4_step(&mut y, h, &rhs);
            }
            return y;
        }
        let x = (sigma + l) / self.step;
        let m = self.samples.len() - 1;
        let j = (x.floor() as usize).min(m - 1);
        let s = x - j as f64;
        let a = &self.samples[j];
        let b = &self.samples[j + 1];
        let da = morse.grad_f(a);
        let db = morse.grad_f(b);
        let h = self.step;
        let (h00, h10, h01, h11) = (
            2.0 * s * s * s - 3.0 * s * s + 1.0,
            s * s * s - 2.0 * s * s + s,
            -2.0 * s * s * s + 3.0 * s * s,
            s * s * s - s * s,
        );
        (0..a.len()).map(|k| a[k] * h00 - da[k] * (h10 * h) + b[k] * h01 - db[k] * (h11 * h)).collect()
    }

    /// `max |χ̇ + grad f(χ)|` with χ̇ from fourth-order differences of the samples.
    pub fn residual(&self, morse: &MorseData) -> f64 {
        let n = self.samples.len();
        if n < 5 {
            return 0.0;
        }
        let h = self.step;
        let mut worst: f64 = 0.0;
        for j in 2..n - 2 {
            let g = morse.grad_f(&self.samples[j]);
            let r: Vec<C64> = (0..g.len())
                .map(|k| {
                    (self.samples[j - 2][k] - self.samples[j - 1][k] * 8.0 + self.samples[j + 1][k] * 8.0
                        - self.samples[j + 2][k])
                        / (12.0 * h)
                        + g[k]
                })
                .collect();
            worst = worst.max(vec_norm(&r));
        }
        worst
    }
}

/// Integrates `χ̇ = −grad f(χ)` from `χ(−l) = x_start`.
pub fn solve_gradient_segment(morse: &MorseData, x_start: &[C64], l: f64) -> Result<GradientSegment> {
    solve_gradient_segment_with_step(morse, x_start, l, SEGMENT_STEP)
}

pub fn solve_gradient_segment_with_step(morse: &MorseData, x_start: &[C64], l: f64, max_step: f64) -> Result<GradientSegment> {
    if !(l > 0.0) {
        return Err(GlueError::InvalidParams(format!("segment half-length {l}")));
    }
    morse.model.check_point(x_start)?;
    let steps = (2.0 * l / max_step).ceil() as usize;
    let h = 2.0 * l / steps as f64;
    let rhs = flow_rhs(morse, 1.0);
    let mut y = x_start.to_vec();
    let mut samples = Vec::with_capacity(steps + 1);
    samples.push(y.clone());
    for _ in 0..steps {
        rk4_step(&mut y, h, &rhs);
        if y.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(GlueError::StepRejected("non-finite state".into()));
        }
        morse.model.check_point(&y)?;
        samples.push(y.clone());
    }
    Ok(GradientSegment { l, step: h, samples })
}

/// Time-2l flow map from `x` (used as a nonlinear oracle).
pub fn flow_map(morse: &MorseData, x: &[C64], span: f64, steps: usize) -> Vec<C64> {
    let rhs = flow_rhs(morse, 1.0);
    let h = span / steps as f64;
    let mut y = x.to_vec();
    for _ in 0..steps {
        rk4_step(&mut y, h, &rhs);
    }
    y
}

/// Linearized flow `a' + A(τ)a = 0` along χ, integrated jointly with χ; returns the real 2n×2n
/// matrix `a(−l) ↦ a(l)`.
pub fn flow_differential(morse: &MorseData, seg: &GradientSegment) -> Result<DMatrix<f64>> {
    variational(morse, seg, false)
}

/// `b' = Aᵀ(τ) b`, the adjoint flow; satisfies `⟨P a, P† b⟩ = ⟨a, b⟩`.
pub fn flow_differential_adjoint(morse: &MorseData, seg: &GradientSegment) -> Result<DMatrix<f64>> {
    variational(morse, seg, true)
}

fn variational(morse: &MorseData, seg: &GradientSegment, adjoint: bool) -> Result<DMatrix<f64>> {
    let n = seg.dim();
    let m = 2 * n;
    let mut y: Vec<C64> = seg.start().to_vec();
    for c in 0..m {
        let mut e = DVector::zeros(m);
        e[c] = 1.0;
        y.extend(from_real(&e));
    }
    let rhs = |y: &[C64], out: &mut [C64]| {
        let chi = &y[..n];
        morse.grad_into(chi, &mut out[..n]);
        out[..n].iter_mut().for_each(|x| *x = -*x);
        if adjoint {
            let at = morse.hess_grad_f(chi).transpose();
            for c in 0..m {
                let col = to_real(&y[n + c * n..n + (c + 1) * n]);
                let r = from_real(&(&at * col));
                out[n + c * n..n + (c + 1) * n].copy_from_slice(&r);
            }
        } else {
            for c in 0..m {
                let col = &mut out[n + c * n..n + (c + 1) * n];
                morse.dgrad_into(chi, &y[n + c * n..n + (c + 1) * n], col);
                col.iter_mut().for_each(|x| *x = -*x);
            }
        }
    };
    let steps = seg.samples.len() - 1;
    for _ in 0..steps {
        rk4_step(&mut y, seg.step, &rhs);
    }
    let mut p = DMatrix::zeros(m, m);
    for c in 0..m {
        p.set_column(c, &to_real(&y[n + c * n..n + (c + 1) * n]));
    }
    Ok(p)
}

/// Evaluation images at the joints and the linearized flow between them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointData {
    pub v_minus: DMatrix<f64>,
    pub v_plus: DMatrix<f64>,
    pub p: DMatrix<f64>,
    pub p_minus: Vec<C64>,
    pub p_plus: Vec<C64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransversalityReport {
    pub transversal: bool,
    pub coker_dim: usize,
    /// `dim V₋ + dim V₊ − dim(P V₋ + V₊)`, the overlap `dim(P V₋ ∩ V₊)`.
    pub ker_correction: usize,
}

pub fn dfd_transversality(j: &JointData) -> Result<TransversalityReport> {
    let m = j.p.nrows();
    let dm = j.v_minus.ncols();
    let dp = j.v_plus.ncols();
    if rank(&j.v_minus, TOL_RANK) != dm || rank(&j.v_plus, TOL_RANK) != dp {
        return Err(GlueError::DegenerateBasis);
    }
    let pv = &j.p * &j.v_minus;
    let r = rank(&hstack(&[&pv, &j.v_plus]), TOL_RANK);
    Ok(TransversalityReport { transversal: r == m, coker_dim: m - r, ker_correction: dm + dp - r })
}

/// `μ₋ − μ₊ + 2c₁₋ + 2c₁₊`.
pub fn fredholm_index(mu_minus: i64, mu_plus: i64, c1_minus: i64, c1_plus: i64) -> i64 {
    mu_minus - mu_plus + 2 * c1_minus + 2 * c1_plus
}

/// Index of the family version with the flow length as an extra parameter.
pub fn fredholm_index_family(mu_minus: i64, mu_plus: i64, c1_minus: i64, c1_plus: i64) -> i64 {
    fredholm_index(mu_minus, mu_plus, c1_minus, c1_plus) + 1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DimIdentity {
    /// `dim(A×B + Δ)` by rank.
    pub lhs: usize,
    /// `n + dim(A + B)`.
    pub rhs_plus: usize,
    /// `n + dim A − dim B`, the dimension-difference reading. The span of `{a − b}` coincides
    /// with `A + B`, so that reading cannot differ from `rhs_plus`.
    pub rhs_minus_variant: i64,
}

/// Column bases `a`, `b` of subspaces of ℝⁿ.
pub fn dim_identity_check(a: &DMatrix<f64>, b: &DMatrix<f64>, n: usize) -> DimIdentity {
    let da = if a.ncols() == 0 { 0 } else { rank(a, TOL_RANK) };
    let db = if b.ncols() == 0 { 0 } else { rank(b, TOL_RANK) };
    let mut big = DMatrix::zeros(2 * n, a.ncols() + b.ncols() + n);
    big.view_mut((0, 0), (n, a.ncols())).copy_from(a);
    big.view_mut((n, a.ncols()), (n, b.ncols())).copy_from(b);
    for k in 0..n {
        big[(k, a.ncols() + b.ncols() + k)] = 1.0;
        big[(n + k, a.ncols() + b.ncols() + k)] = 1.0;
    }
    let sum = rank(&hstack(&[a, b]), TOL_RANK);
    DimIdentity { lhs: rank(&big, TOL_RANK), rhs_plus: n + sum, rhs_minus_variant: n as i64 + da as i64 - db as i64 }
}

/// Where the disk coordinate sits relative to the cylinder coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DiskFrame {
    /// Differential taken in `(τ, t)`.
    Cylinder,
    /// `z = e^{2π(τ − τ₀ + it)}`; the puncture sits at `τ → −∞`.
    Plus { tau0: f64 },
    /// `z = e^{−2π(τ − τ₀ + it)}`; the puncture sits at `τ → +∞`.
    Minus { tau0: f64 },
}

/// Whether the real 2n×2 differential at node `(j, i)` has rank 2 (smallest singular value
/// above `TOL_RANK · max(1, largest)`).
pub fn immersion_check(u: &CylinderGrid, node: (usize, usize), frame: DiskFrame) -> Result<bool> {
    let (j, i) = node;
    let s = u.as_section();
    let dtau = d_tau(&s)?;
    let dt = d_t(&s);
    let a = dtau.at(j, i).to_vec();
    let b = dt.at(j, i).to_vec();
    let (ux, uy) = match frame {
        DiskFrame::Cylinder => (a, b),
        DiskFrame::Plus { tau0 } | DiskFrame::Minus { tau0 } => {
            let sign = if matches!(frame, DiskFrame::Plus { .. }) { 1.0 } else { -1.0 };
            let tau = u.layout.tau(j);
            let t = u.layout.t(i);
            let two_pi = 2.0 * std::f64::consts::PI;
            let z = C64::new(sign * two_pi * (tau - tau0), sign * two_pi * t).exp();
            let dz_tau = z * (sign * two_pi);
            let dz_t = z * C64::new(0.0, sign * two_pi);
            // [∂_τu ∂_tu] = [u_x u_y] M
            let m = nalgebra::Matrix2::new(dz_tau.re, dz_t.re, dz_tau.im, dz_t.im);
            let minv = match m.try_inverse() {
                Some(x) => x,
                None => return Ok(false),
            };
            let ux: Vec<C64> = (0..a.len()).map(|k| a[k] * minv[(0, 0)] + b[k] * minv[(1, 0)]).collect();
            let uy: Vec<C64> = (0..a.len()).map(|k| a[k] * minv[(0, 1)] + b[k] * minv[(1, 1)]).collect();
            (ux, uy)
        }
    };
    let d = hstack(&[&DMatrix::from_column_slice(2 * ux.len(), 1, to_real(&ux).as_slice()), &DMatrix::from_column_slice(2 * uy.len(), 1, to_real(&uy).as_slice())]);
    let sv = d.svd(false, false).singular_values;
    let smax = sv.max();
    let smin = sv.min();
    Ok(smin > TOL_RANK * smax.max(1.0))
}

/// Finite-dimensional shadow of the dfd configuration operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyIndexSpec {
    pub n: usize,
    pub mu_minus: i64,
    pub mu_plus: i64,
    pub c1_minus: i64,
    pub c1_plus: i64,
    /// Flow grid nodes on `[−l, l]`.
    pub nodes: usize,
    pub l: f64,
    pub parametrized: bool,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToyIndexReport {
    pub kernel: usize,
    pub cokernel: usize,
    pub index: i64,
    pub formula: i64,
    /// Cokernel predicted by `dfd_transversality` on the same data.
    pub coker_transversality: usize,
}

/// Assembles `(k₋, a, k₊[, μ]) ↦ (a' + A a, a(−l) − ev₋k₋, a(l) − ev₊k₊)` with disk kernels of
/// dimensions `n + μ₋ + 2c₁₋` and `n − μ₊ + 2c₁₊` and a box discretization of the flow, then
/// reads kernel and cokernel dimensions off the SVD.
pub fn toy_index_svd(spec: &ToyIndexSpec) -> Result<ToyIndexReport> {
    let n = spec.n;
    let m = 2 * n;
    let dm = n as i64 + spec.mu_minus + 2 * spec.c1_minus;
    let dp = n as i64 - spec.mu_plus + 2 * spec.c1_plus;
    if dm < 0 || dp < 0 || spec.nodes < 3 {
        return Err(GlueError::InvalidParams("toy disk kernel dimensions must be nonnegative".into()));
    }
    let (dm, dp) = (dm as usize, dp as usize);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut gauss = |r: usize, c: usize| DMatrix::from_fn(r, c, |_, _| rng.sample::<f64, _>(StandardNormal));
    let ev_m = gauss(m, dm);
    let ev_p = gauss(m, dp);
    // smooth A(τ) = A0 + τ A1, independent of the grid
    let a0 = gauss(m, m) * 0.3;
    let a1 = gauss(m, m) * 0.3;
    let src = gauss(m, 1);
    let nn = spec.nodes;
    let h = 2.0 * spec.l / (nn - 1) as f64;
    let a_at = |j: usize| {
        let tau = -spec.l + j as f64 * h;
        &a0 + &a1 * tau
    };
    let extra = usize::from(spec.parametrized);
    let cols = dm + m * nn + dp + extra;
    let rows = m * (nn - 1) + 2 * m;
    let mut e = DMatrix::zeros(rows, cols);
    let off_a = dm;
    for c in 0..nn - 1 {
        let aj = a_at(c);
        let aj1 = a_at(c + 1);
        for r in 0..m {
            e[(c * m + r, off_a + c * m + r)] -= 1.0 / h;
            e[(c * m + r, off_a + (c + 1) * m + r)] += 1.0 / h;
            for q in 0..m {
                e[(c * m + r, off_a + c * m + q)] += 0.5 * aj[(r, q)];
                e[(c * m + r, off_a + (c + 1) * m + q)] += 0.5 * aj1[(r, q)];
            }
            if spec.parametrized && c == (nn - 1) / 2 {
                e[(c * m + r, cols - 1)] = src[r];
            }
        }
    }
    let r0 = m * (nn - 1);
    for r in 0..m {
        e[(r0 + r, off_a + r)] = 1.0;
        e[(r0 + m + r, off_a + (nn - 1) * m + r)] = 1.0;
        for q in 0..dm {
            e[(r0 + r, q)] = -ev_m[(r, q)];
        }
        for q in 0..dp {
            e[(r0 + m + r, off_a + m * nn + q)] = -ev_p[(r, q)];
        }
    }
    let rk = rank(&e, TOL_RANK);
    let kernel = cols - rk;
    let cokernel = rows - rk;
    // transversality on the same data: discrete propagator across the grid
    let mut phi = DMatrix::<f64>::identity(m, m);
    for c in 0..nn - 1 {
        let lhs = DMatrix::<f64>::identity(m, m) / h + a_at(c + 1) * 0.5;
        let rhs = DMatrix::<f64>::identity(m, m) / h - a_at(c) * 0.5;
        phi = lhs.lu().solve(&(rhs * phi)).ok_or(GlueError::DegenerateBasis)?;
    }
    let mut vm = ev_m.clone();
    if spec.parametrized {
        // the μ column shifts the far endpoint by the propagated source
        let mut resp = DVector::zeros(m);
        for c in 0..nn - 1 {
            let lhs = DMatrix::<f64>::identity(m, m) / h + a_at(c + 1) * 0.5;
            let rhs = DMatrix::<f64>::identity(m, m) / h - a_at(c) * 0.5;
            let mut b = &rhs * &resp;
            if c == (nn - 1) / 2 {
                b -= src.column(0);
            }
            resp = lhs.lu().solve(&b).ok_or(GlueError::DegenerateBasis)?;
        }
        let pinv = phi.clone().try_inverse().ok_or(GlueError::DegenerateBasis)?;
        vm = hstack(&[&vm, &DMatrix::from_column_slice(m, 1, (pinv * resp).as_slice())]);
    }
    let coker_t = m - rank(&hstack(&[&(&phi * &vm), &ev_p]), TOL_RANK);
    let formula = if spec.parametrized {
        fredholm_index_family(spec.mu_minus, spec.mu_plus, spec.c1_minus, spec.c1_plus)
    } else {
        fredholm_index(spec.mu_minus, spec.mu_plus, spec.c1_minus, spec.c1_plus)
    };
    Ok(ToyIndexReport { kernel, cokernel, index: kernel as i64 - cokernel as i64, formula, coker_transversality: coker_t })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cylinder::{Layout, TauAxis};
    use crate::target::{Potential, TargetModel};

    fn flat_morse(lambda: Vec<f64>) -> MorseData {
        MorseData::new(TargetModel::flat(lambda.len()), Potential::quadratic(lambda)).unwrap()
    }

    #[test]
    fn critical_start_gives_constant_segment() {
        let md = flat_morse(vec![1.0, 2.0]);
        let seg = solve_gradient_segment(&md, &[C64::default(); 2], 1.0).unwrap();
        assert!(seg.samples.iter().all(|p| vec_norm(p) == 0.0));
    }

    #[test]
    fn linear_flow_matches_closed_form() {
        let md = flat_morse(vec![1.0, 2.0]);
        let x0 = [C64::new(0.5, 0.2), C64::new(-0.3, 0.4)];
        let seg = solve_gradient_segment(&md, &x0, 1.0).unwrap();
        for (j, p) in seg.samples.iter().enumerate() {
            let tau = -1.0 + j as f64 * seg.step;
            for k in 0..2 {
                let ex = x0[k] * (-md.potential.lambda[k] * (tau + 1.0)).exp();
                assert!((p[k] - ex).norm() < 1e-10);
            }
        }
        assert!(seg.residual(&md) < 1e-9);
        // interpolation between samples
        let mid = seg.eval(&md, 0.1234);
        let ex = x0[1] * (-2.0 * 1.1234f64).exp();
        assert!((mid[1] - ex).norm() < 1e-11);
    }

    #[test]
    fn reversing_the_flow_recovers_the_start() {
        let md = MorseData::new(TargetModel::projective(2, 10.0), Potential { lambda: vec![1.0, 1.5], quartic: 0.2 }).unwrap();
        let x0 = [C64::new(0.4, 0.1), C64::new(0.2, -0.3)];
        let seg = solve_gradient_segment(&md, &x0, 0.75).unwrap();
        let back = crate::ode::rk4_endpoint(seg.end(), 1.5, seg.samples.len() - 1, &flow_rhs(&md, -1.0));
        assert!(vec_norm(&crate::linalg::vec_sub(&back, &x0)) < 1e-9);
    }

    #[test]
    fn flow_semigroup() {
        let md = MorseData::new(TargetModel::projective(2, 10.0), Potential::quadratic(vec![1.0, 2.0])).unwrap();
        let x0 = [C64::new(0.4, 0.1), C64::new(0.2, -0.3)];
        let whole = flow_map(&md, &x0, 2.0, 2048);
        let half = flow_map(&md, &flow_map(&md, &x0, 1.0, 1024), 1.0, 1024);
        assert!(vec_norm(&crate::linalg::vec_sub(&whole, &half)) < 1e-9);
    }

    #[test]
    fn differential_at_critical_point_is_exponential() {
        let md = flat_morse(vec![1.0, 2.0]);
        let seg = solve_gradient_segment(&md, &[C64::default(); 2], 0.5).unwrap();
        let p = flow_differential(&md, &seg).unwrap();
        let ex = DMatrix::from_diagonal(&DVector::from_vec(vec![(-1.0f64).exp(), (-1.0f64).exp(), (-2.0f64).exp(), (-2.0f64).exp()]));
        assert!((p - ex).norm() < 1e-12);
        let zero = flat_morse(vec![0.0, 0.0]);
        let seg0 = solve_gradient_segment(&zero, &[C64::new(1.0, 0.0), C64::default()], 1.0).unwrap();
        assert!((flow_differential(&zero, &seg0).unwrap() - DMatrix::<f64>::identity(4, 4)).norm() < 1e-14);
    }

    #[test]
    fn adjoint_pairing_is_preserved() {
        let md = MorseData::new(TargetModel::projective(2, 10.0), Potential { lambda: vec![1.0, 2.0], quartic: 0.5 }).unwrap();
        let seg = solve_gradient_segment(&md, &[C64::new(0.5, 0.2), C64::new(-0.1, 0.3)], 1.0).unwrap();
        let p = flow_differential(&md, &seg).unwrap();
        let pd = flow_differential_adjoint(&md, &seg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..10 {
            let a = DVector::from_fn(4, |_, _| rng.random_range(-1.0..1.0));
            let b = DVector::from_fn(4, |_, _| rng.random_range(-1.0..1.0));
            assert!(((&p * &a).dot(&(&pd * &b)) - a.dot(&b)).abs() < 1e-10);
        }
    }

    #[test]
    fn differential_matches_finite_difference_jacobian() {
        let md = MorseData::new(TargetModel::projective(2, 10.0), Potential { lambda: vec![1.0, 2.0], quartic: 0.5 }).unwrap();
        let x0 = [C64::new(0.5, 0.2), C64::new(-0.1, 0.3)];
        let seg = solve_gradient_segment(&md, &x0, 1.0).unwrap();
        let p = flow_differential(&md, &seg).unwrap();
        let fd = |h: f64| {
            let mut m = DMatrix::zeros(4, 4);
            for c in 0..4 {
                let mut e = DVector::zeros(4);
                e[c] = h;
                let xp = from_real(&(to_real(&x0) + &e));
                let xm = from_real(&(to_real(&x0) - &e));
                let col = (to_real(&flow_map(&md, &xp, 2.0, 2048)) - to_real(&flow_map(&md, &xm, 2.0, 2048))) / (2.0 * h);
                m.set_column(c, &col);
            }
            m
        };
        let e1 = (fd(2e-2) - &p).norm();
        let e2 = (fd(1e-2) - &p).norm();
        assert!((e1 / e2).log2() >= 1.9, "slope {}", (e1 / e2).log2());
    }

    fn joints(vm: DMatrix<f64>, vp: DMatrix<f64>, p: DMatrix<f64>) -> JointData {
        JointData { v_minus: vm, v_plus: vp, p, p_minus: vec![], p_plus: vec![] }
    }

    #[test]
    fn transversality_examples() {
        let full = DMatrix::<f64>::identity(2, 2);
        let r = dfd_transversality(&joints(full.clone(), full.clone(), full.clone())).unwrap();
        assert_eq!(r, TransversalityReport { transversal: true, coker_dim: 0, ker_correction: 2 });
        let e1 = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let e2 = DMatrix::from_column_slice(2, 1, &[0.0, 1.0]);
        let r = dfd_transversality(&joints(e1.clone(), e2, full.clone())).unwrap();
        assert!(r.transversal && r.coker_dim == 0);
        let r = dfd_transversality(&joints(e1.clone(), e1.clone(), full.clone())).unwrap();
        assert_eq!(r.coker_dim, 1);
        let degenerate = DMatrix::from_column_slice(2, 2, &[1.0, 0.0, 2.0, 0.0]);
        assert!(matches!(dfd_transversality(&joints(degenerate, e1, full)), Err(GlueError::DegenerateBasis)));
    }

    #[test]
    fn index_arithmetic() {
        assert_eq!(fredholm_index(0, 0, 0, 0), 0);
        assert_eq!(fredholm_index(2, -2, 0, 0), 4);
        assert_eq!(fredholm_index_family(2, -2, 0, 0), 5);
    }

    #[test]
    fn dim_identity_extremes() {
        let n = 3;
        let zero = DMatrix::zeros(n, 0);
        let full = DMatrix::<f64>::identity(n, n);
        assert_eq!(dim_identity_check(&zero, &zero, n).lhs, n);
        assert_eq!(dim_identity_check(&full, &full, n).lhs, 2 * n);
    }

    #[test]
    fn toy_index_matches_formula_and_is_grid_independent() {
        for (mm, mp, c1m, c1p) in [(0, 0, 0, 0), (1, -1, 0, 0), (-2, 1, 1, 0), (0, 2, 0, 1)] {
            for parametrized in [false, true] {
                let mut last = None;
                for nodes in [9, 17] {
                    let spec = ToyIndexSpec { n: 2, mu_minus: mm, mu_plus: mp, c1_minus: c1m, c1_plus: c1p, nodes, l: 1.0, parametrized, seed: 11 };
                    let r = toy_index_svd(&spec).unwrap();
                    assert_eq!(r.index, r.formula);
                    assert_eq!(r.cokernel, r.coker_transversality);
                    if let Some(prev) = last {
                        assert_eq!(prev, r.index);
                    }
                    last = Some(r.index);
                }
            }
        }
    }

    #[test]
    fn immersion_examples() {
        let two_pi = 2.0 * std::f64::consts::PI;
        let axis = TauAxis::new(-0.5, 1.0 / 32.0, 33);
        let layout = Layout::nodes(axis, 32, 2);
        let a = [C64::new(1.0, 0.0), C64::new(0.0, 0.5)];
        let p = [C64::new(0.1, 0.0), C64::default()];
        let hol = CylinderGrid::from_fn(layout, |tau, t| {
            let z = C64::new(two_pi * tau, two_pi * t).exp();
            vec![a[0] * z + p[0], a[1] * z + p[1]]
        });
        assert!(immersion_check(&hol, (16, 3), DiskFrame::Cylinder).unwrap());
        let constant = CylinderGrid::from_fn(layout, |_, _| p.to_vec());
        assert!(!immersion_check(&constant, (16, 3), DiskFrame::Cylinder).unwrap());
        // disk coordinate near the puncture: z vs z²
        let deep = Layout::nodes(TauAxis::new(-4.5, 1.0 / 32.0, 33), 32, 2);
        let square = CylinderGrid::from_fn(deep, |tau, t| {
            let z = C64::new(two_pi * tau, two_pi * t).exp();
            vec![a[0] * z * z + p[0], a[1] * z * z + p[1]]
        });
        assert!(!immersion_check(&square, (0, 0), DiskFrame::Plus { tau0: 0.0 }).unwrap());
        let linear = CylinderGrid::from_fn(deep, |tau, t| {
            let z = C64::new(two_pi * tau, two_pi * t).exp();
            vec![a[0] * z + p[0], a[1] * z + p[1]]
        });
        assert!(immersion_check(&linear, (0, 0), DiskFrame::Plus { tau0: 0.0 }).unwrap());
    }
}
