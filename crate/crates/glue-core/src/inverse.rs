//! Right inverses of the linearized operator built mode by mode.
//!
//! Every mode `a_k` of a node section obeys the cell recursion
//! `c₂ a_{j+1} − c₁ a_j + B⁰_c a_j + B¹_c a_{j+1} = b_c`, where `B⁰, B¹` are the halved
//! zero-order coefficients (complex-linear part, averaged over the circle). Modes with `k > 0`
//! are integrated backwards from a zero value at the right end, modes with `k < 0` forwards
//! from the left end, and the zero mode is an initial value problem fixed by the matching
//! conditions at the joints.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cylinder::{
    norm_lp, norm_resolved, norm_resolved_eta, norm_weighted_w1p, signed_k, Layout, ModeField, ResolvedNorm, Sampling,
    Section, TauAxis, WeightProfile,
};
use crate::error::{GlueError, Result};
use crate::floer_op::{box_coefficients, linearize, mode_lambda, Equation, LinearizedOp};
use crate::flow::{JointData, TOL_RANK};
use crate::linalg::{from_real, rank, realify, to_real};
use crate::preglue::{preglue, smoothstep, AdiabaticParams, DfdConfig};
use crate::probe::gaussian_probe;
use crate::C64;

/// Relative residual at which iterative refinement stops.
pub const TOL_SOLVE: f64 = 1e-11;

/// Gaussian elimination with partial pivoting on a row-major `n×n` system, `n ≤ 8`.
fn solve_small(n: usize, a: &[C64], b: &mut [C64]) {
    let mut m = [C64::default(); 64];
    m[..n * n].copy_from_slice(&a[..n * n]);
    for col in 0..n {
        let mut piv = col;
        for r in col + 1..n {
            if m[r * n + col].norm() > m[piv * n + col].norm() {
                piv = r;
            }
        }
        if piv != col {
            for c in 0..n {
                m.swap(col * n + c, piv * n + c);
            }
            b.swap(col, piv);
        }
        let d = m[col * n + col];
        for r in col + 1..n {
            let f = m[r * n + col] / d;
            if f == C64::default() {
                continue;
            }
            for c in col..n {
                let v = m[col * n + c];
                m[r * n + c] -= f * v;
            }
            let v = b[col];
            b[r] -= f * v;
        }
    }
    for col in (0..n).rev() {
        let mut s = b[col];
        for c in col + 1..n {
            s -= m[col * n + c] * b[c];
        }
        b[col] = s / m[col * n + col];
    }
}

fn matvec_add(n: usize, m: &[C64], x: &[C64], scale: f64, out: &mut [C64]) {
    for r in 0..n {
        let mut s = C64::default();
        for c in 0..n {
            s += m[r * n + c] * x[c];
        }
        out[r] += s * scale;
    }
}

/// Per-cell zero-order matrices of the mode recursions.
#[derive(Debug, Clone, PartialEq)]
pub struct CellCoefficients {
    pub layout: Layout,
    n: usize,
    b0: Vec<C64>,
    b1: Vec<C64>,
    active: Vec<bool>,
}

impl CellCoefficients {
    /// No zero-order term.
    pub fn zero(layout: Layout) -> Self {
        let cells = layout.axis.len - 1;
        let n = layout.dim;
        Self { layout: layout.nodes_of(), n, b0: vec![C64::default(); cells * n * n], b1: vec![C64::default(); cells * n * n], active: vec![false; cells] }
    }

    /// From one complex matrix per cell, shared by both nodes of the cell.
    pub fn from_field(layout: Layout, a_field: &[DMatrix<C64>]) -> Result<Self> {
        let mut out = Self::zero(layout);
        if a_field.len() != out.active.len() {
            return Err(GlueError::ShapeMismatch("one matrix per cell expected".into()));
        }
        let n = out.n;
        for (c, a) in a_field.iter().enumerate() {
            for r in 0..n {
                for q in 0..n {
                    out.b0[c * n * n + r * n + q] = a[(r, q)] * 0.5;
                    out.b1[c * n * n + r * n + q] = a[(r, q)] * 0.5;
                }
            }
            out.active[c] = a.iter().any(|z| *z != C64::default());
        }
        Ok(out)
    }

    /// Circle mean of the complex-linear part of the operator's zero-order term.
    pub fn from_op(op: &LinearizedOp) -> Self {
        let l = op.layout();
        let mut out = Self::zero(l);
        let n = out.n;
        let coef = op.cell_coefficients();
        let mut node_cache: Vec<Option<(Vec<C64>, Vec<C64>)>> = vec![None; l.axis.len];
        for (c, &(cn, ce)) in coef.iter().enumerate() {
            if cn == 0.0 && ce == 0.0 {
                continue;
            }
            out.active[c] = true;
            for (slot, j) in [(0usize, c), (1usize, c + 1)] {
                if node_cache[j].is_none() {
                    node_cache[j] = Some(node_mean_jacobians(op, j));
                }
                let (gf, gh) = node_cache[j].as_ref().unwrap();
                let dst = if slot == 0 { &mut out.b0 } else { &mut out.b1 };
                for q in 0..n * n {
                    dst[c * n * n + q] = gf[q] * cn + gh[q] * ce;
                }
            }
        }
        out
    }

    pub fn cells(&self) -> usize {
        self.active.len()
    }

    fn lhs_forward(&self, c: usize, c2: f64, m: &mut [C64]) {
        let n = self.n;
        for r in 0..n {
            for q in 0..n {
                m[r * n + q] = self.b1[c * n * n + r * n + q] + if r == q { C64::new(c2, 0.0) } else { C64::default() };
            }
        }
    }

    /// One step `a_c ↦ a_{c+1}`.
    fn forward(&self, c: usize, c1: f64, c2: f64, a: &[C64], b: Option<&[C64]>, out: &mut [C64]) {
        let n = self.n;
        for q in 0..n {
            out[q] = a[q] * c1 + b.map_or(C64::default(), |b| b[q]);
        }
        if !self.active[c] {
            out[..n].iter_mut().for_each(|x| *x /= c2);
            return;
        }
        matvec_add(n, &self.b0[c * n * n..], a, -1.0, out);
        let mut m = [C64::default(); 64];
        self.lhs_forward(c, c2, &mut m);
        solve_small(n, &m, out);
    }

    /// One step `a_{c+1} ↦ a_c`.
    fn backward(&self, c: usize, c1: f64, c2: f64, a: &[C64], b: Option<&[C64]>, out: &mut [C64]) {
        let n = self.n;
        for q in 0..n {
            out[q] = a[q] * c2 - b.map_or(C64::default(), |b| b[q]);
        }
        if !self.active[c] {
            out[..n].iter_mut().for_each(|x| *x /= c1);
            return;
        }
        matvec_add(n, &self.b1[c * n * n..], a, 1.0, out);
        let mut m = [C64::default(); 64];
        for r in 0..n {
            for q in 0..n {
                m[r * n + q] = -self.b0[c * n * n + r * n + q] + if r == q { C64::new(c1, 0.0) } else { C64::default() };
            }
        }
        solve_small(n, &m, out);
    }

    /// Higher mode `k ≠ 0` with the one-point condition; `src` and `out` are `cells × n` and
    /// `nodes × n`.
    pub fn solve_higher(&self, k: i64, src: &[C64], out: &mut [C64]) {
        let n = self.n;
        let nodes = self.layout.axis.len;
        let (c1, c2) = box_coefficients(mode_lambda(k, self.layout.period), self.layout.axis.step);
        let mut tmp = [C64::default(); 8];
        if k > 0 {
            out[(nodes - 1) * n..nodes * n].iter_mut().for_each(|x| *x = C64::default());
            for c in (0..nodes - 1).rev() {
                let (lo, hi) = out.split_at_mut((c + 1) * n);
                self.backward(c, c1, c2, &hi[..n], Some(&src[c * n..(c + 1) * n]), &mut tmp);
                lo[c * n..(c + 1) * n].copy_from_slice(&tmp[..n]);
            }
        } else {
            out[..n].iter_mut().for_each(|x| *x = C64::default());
            for c in 0..nodes - 1 {
                let (lo, hi) = out.split_at_mut((c + 1) * n);
                self.forward(c, c1, c2, &lo[c * n..(c + 1) * n], Some(&src[c * n..(c + 1) * n]), &mut tmp);
                hi[..n].copy_from_slice(&tmp[..n]);
            }
        }
    }

    /// Zero-mode initial value problem from node `anchor` with value `a0`, integrated both ways.
    pub fn solve_ivp(&self, src: Option<&[C64]>, anchor: usize, a0: &[C64], out: &mut [C64]) {
        let n = self.n;
        let nodes = self.layout.axis.len;
        let h = self.layout.axis.step;
        let (c1, c2) = (1.0 / h, 1.0 / h);
        let mut tmp = [C64::default(); 8];
        out[anchor * n..(anchor + 1) * n].copy_from_slice(a0);
        for c in anchor..nodes - 1 {
            let (lo, hi) = out.split_at_mut((c + 1) * n);
            self.forward(c, c1, c2, &lo[c * n..(c + 1) * n], src.map(|s| &s[c * n..(c + 1) * n]), &mut tmp);
            hi[..n].copy_from_slice(&tmp[..n]);
        }
        for c in (0..anchor).rev() {
            let (lo, hi) = out.split_at_mut((c + 1) * n);
            self.backward(c, c1, c2, &hi[..n], src.map(|s| &s[c * n..(c + 1) * n]), &mut tmp);
            lo[c * n..(c + 1) * n].copy_from_slice(&tmp[..n]);
        }
    }
}

/// Circle means of the complex-linear parts of `d grad f` and `d grad H` at node `j`
/// (row-major `n×n`).
fn node_mean_jacobians(op: &LinearizedOp, j: usize) -> (Vec<C64>, Vec<C64>) {
    let l = op.layout();
    let n = l.dim;
    let eq = &op.eq;
    let mut gf = vec![C64::default(); n * n];
    let mut gh = vec![C64::default(); n * n];
    let first = op.base.at(j, 0).to_vec();
    let constant = (1..l.n_t).all(|i| op.base.at(j, i) == &first[..]);
    let count = if constant { 1 } else { l.n_t };
    let hmorse = eq.h_end.as_ref().map(|h| crate::target::MorseData { potential: h.clone(), ..eq.morse.clone() });
    let mut e = vec![C64::default(); n];
    let mut a = vec![C64::default(); n];
    let mut b = vec![C64::default(); n];
    for i in 0..count {
        let x = op.base.at(j, i);
        for q in 0..n {
            e.iter_mut().for_each(|z| *z = C64::default());
            e[q] = C64::new(1.0, 0.0);
            eq.morse.dgrad_into(x, &e, &mut a);
            e[q] = C64::new(0.0, 1.0);
            eq.morse.dgrad_into(x, &e, &mut b);
            for r in 0..n {
                // complex-linear part: ½(M e − i M(i e))
                gf[r * n + q] += (a[r] - C64::new(0.0, 1.0) * b[r]) * (0.5 / count as f64);
            }
            if let Some(hm) = &hmorse {
                e[q] = C64::new(1.0, 0.0);
                hm.dgrad_into(x, &e, &mut a);
                e[q] = C64::new(0.0, 1.0);
                hm.dgrad_into(x, &e, &mut b);
                for r in 0..n {
                    gh[r * n + q] += (a[r] - C64::new(0.0, 1.0) * b[r]) * (0.5 / count as f64);
                }
            }
        }
    }
    (gf, gh)
}

/// Data for the standalone neck solves.
#[derive(Debug, Clone, PartialEq)]
pub struct NeckInverseSpec {
    pub axis: TauAxis,
    pub n_t: usize,
    pub dim: usize,
    /// Zero-order term `A(τ_c)` per cell (complex-linear).
    pub a_field: Vec<DMatrix<C64>>,
    /// Real `2n × d` bases of the boundary subspaces at the left and right ends.
    pub v_minus: DMatrix<f64>,
    pub v_plus: DMatrix<f64>,
    /// Modes with `|k| > k_max` are dropped.
    pub k_max: usize,
    pub weight: Option<WeightProfile>,
}

impl NeckInverseSpec {
    pub fn layout(&self) -> Layout {
        Layout::nodes(self.axis, self.n_t, self.dim)
    }

    fn coefficients(&self) -> Result<CellCoefficients> {
        CellCoefficients::from_field(self.layout(), &self.a_field)
    }
}

/// Higher-mode neck solve with one-point conditions (`a_k = 0` at the right end for `k > 0`,
/// at the left end for `k < 0`).
pub fn neck_inverse_higher(b: &ModeField, spec: &NeckInverseSpec) -> Result<ModeField> {
    if b.layout.sampling != Sampling::Cells || b.layout.nodes_of() != spec.layout() {
        return Err(GlueError::ShapeMismatch("source must be cell modes on the neck axis".into()));
    }
    if b.mode(0).iter().any(|z| *z != C64::default()) {
        return Err(GlueError::ModeZeroPresent);
    }
    let coef = spec.coefficients()?;
    let mut out = ModeField::zeros(spec.layout());
    for k in b.orders() {
        if k == 0 || k.unsigned_abs() as usize > spec.k_max {
            continue;
        }
        coef.solve_higher(k, b.mode(k), out.mode_mut(k));
    }
    Ok(out)
}

/// Diagnostics of the two-point zero-mode solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZeroModeReport {
    /// Distance of the endpoint values from the prescribed subspaces.
    pub boundary_residual: f64,
    pub coker_dim: usize,
    /// `‖a₀‖_{W^{1,p}} / ‖b₀‖_{L^p}` (0 when `b₀ = 0`).
    pub c_p: f64,
}

fn projection_residual(v: &DMatrix<f64>, x: &DVector<f64>) -> f64 {
    if v.ncols() == 0 {
        return x.norm();
    }
    let svd = v.clone().svd(true, false);
    let u = svd.u.unwrap();
    let r = rank(v, TOL_RANK);
    let basis = u.columns(0, r);
    (x - basis * (basis.transpose() * x)).norm()
}

/// Linearized flow `a' + A a = b` on the axis with `a(start) ∈ V₋`, `a(end) ∈ V₊`, minimum-norm
/// boundary coefficients. `b0` holds one vector per cell.
pub fn neck_inverse_zero(b0: &[Vec<C64>], spec: &NeckInverseSpec, p: f64) -> Result<(Vec<Vec<C64>>, ZeroModeReport)> {
    let n = spec.dim;
    let m = 2 * n;
    let nodes = spec.axis.len;
    if b0.len() != nodes - 1 {
        return Err(GlueError::ShapeMismatch("one source vector per cell expected".into()));
    }
    let coef = spec.coefficients()?;
    let src: Vec<C64> = b0.iter().flatten().cloned().collect();
    let mut z = vec![C64::default(); nodes * n];
    coef.solve_ivp(Some(&src), 0, &vec![C64::default(); n], &mut z);
    // fundamental matrix start → end
    let mut phi = DMatrix::<C64>::zeros(n, n);
    let mut traj = vec![C64::default(); nodes * n];
    for q in 0..n {
        let mut e = vec![C64::default(); n];
        e[q] = C64::new(1.0, 0.0);
        coef.solve_ivp(None, 0, &e, &mut traj);
        for r in 0..n {
            phi[(r, q)] = traj[(nodes - 1) * n + r];
        }
    }
    let p_real = realify(&phi);
    let pv = &p_real * &spec.v_minus;
    let mut sys = DMatrix::zeros(m, pv.ncols() + spec.v_plus.ncols());
    sys.view_mut((0, 0), (m, pv.ncols())).copy_from(&pv);
    sys.view_mut((0, pv.ncols()), (m, spec.v_plus.ncols())).copy_from(&(-&spec.v_plus));
    let r = rank(&sys, TOL_RANK);
    if r < m {
        return Err(GlueError::TransversalityFailed { coker_dim: m - r });
    }
    let rhs = -to_real(&z[(nodes - 1) * n..]);
    let sol = sys.clone().svd(true, true).solve(&rhs, 1e-12).map_err(|e| GlueError::NoConvergence(e.to_string()))?;
    let alpha = from_real(&(&spec.v_minus * sol.rows(0, spec.v_minus.ncols())));
    let mut a = vec![C64::default(); nodes * n];
    coef.solve_ivp(Some(&src), 0, &alpha, &mut a);
    let out: Vec<Vec<C64>> = a.chunks_exact(n).map(|c| c.to_vec()).collect();
    let res = projection_residual(&spec.v_minus, &to_real(&out[0])) + projection_residual(&spec.v_plus, &to_real(&out[nodes - 1]));
    // W^{1,p} / L^p ratio with one-slice sections
    let lay = Layout::nodes(spec.axis, 1, n);
    let a_sec = Section { layout: lay, data: a.clone() };
    let b_sec = Section { layout: lay.cells_of(), data: src.clone() };
    let bnorm = norm_lp(&b_sec, &vec![1.0; nodes - 1], p);
    let c_p = if bnorm > 0.0 { norm_weighted_w1p(&a_sec, &WeightProfile { kind: crate::cylinder::WeightKind::Unit, params: AdiabaticParams::standard(1.0), smoothing: 0.0, samples: vec![1.0; nodes] }, p)? / bnorm } else { 0.0 };
    Ok((out, ZeroModeReport { boundary_residual: res, coker_dim: 0, c_p }))
}

/// Component norms and matching data of one application of the combined inverse.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct InverseDiagnostics {
    /// Residual of the joint matching equations.
    pub matching_residual: f64,
    /// Neck zero-mode value at the left joint.
    pub alpha_norm: f64,
    pub neck_higher_l2: f64,
    pub end_higher_l2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CombinedInverseOutput {
    pub xi: Section,
    pub mu: f64,
    pub diagnostics: InverseDiagnostics,
}

/// Precomputed pieces of the combined approximate inverse at one base point.
#[derive(Debug, Clone)]
pub struct InverseContext {
    pub op: LinearizedOp,
    pub params: AdiabaticParams,
    pub coef: CellCoefficients,
    /// Splice length `T' = max(T, 1)`.
    pub splice: f64,
    jl: usize,
    jr: usize,
    j_minus: usize,
    j_plus: usize,
    /// Zero-mode fundamental solutions from the left joint, `n` trajectories of `nodes × n`.
    phi: Vec<Vec<C64>>,
    /// Zero-mode response to a unit μ.
    w_mu: Vec<C64>,
    /// Minimum-norm solution operator of the matching system.
    matching_pinv: DMatrix<f64>,
    matching_sys: DMatrix<f64>,
    v_minus: DMatrix<f64>,
    v_plus: DMatrix<f64>,
    /// Node cutoffs of the splice.
    phi0: Vec<f64>,
    rho_plus: Vec<f64>,
    rho_minus: Vec<f64>,
}

impl InverseContext {
    pub fn new(op: LinearizedOp, joints: &JointData, params: &AdiabaticParams) -> Result<Self> {
        let layout = op.layout();
        let n = layout.dim;
        let m = 2 * n;
        let nodes = layout.axis.len;
        let coef = CellCoefficients::from_op(&op);
        let big_l = params.r();
        let axis = layout.axis;
        let jl = axis.nearest(-big_l);
        let jr = axis.nearest(big_l);
        let j_minus = axis.nearest(-big_l - 1.0);
        let j_plus = axis.nearest(big_l + 1.0);
        let splice = params.t_splice().max(1.0);
        if axis.node(0) > -big_l - splice - 1.0 || axis.end() < big_l + splice + 1.0 {
            return Err(GlueError::GridTooShort("grid shorter than the splice regions".into()));
        }
        let mut phi = Vec::with_capacity(n);
        for q in 0..n {
            let mut e = vec![C64::default(); n];
            e[q] = C64::new(1.0, 0.0);
            let mut traj = vec![C64::default(); nodes * n];
            coef.solve_ivp(None, jl, &e, &mut traj);
            phi.push(traj);
        }
        let mu_modes = ModeField::from_section(op.mu_column());
        let mut w_mu = vec![C64::default(); nodes * n];
        coef.solve_ivp(Some(mu_modes.mode(0)), jl, &vec![C64::default(); n], &mut w_mu);
        // unknowns: α (complex n as real 2n), c₋, c₊, μ
        let dm = joints.v_minus.ncols();
        let dp = joints.v_plus.ncols();
        let cols = m + dm + dp + 1;
        let mut sys = DMatrix::zeros(2 * m, cols);
        for (blk, j) in [(0usize, j_plus), (1usize, j_minus)] {
            let row = blk * m;
            for q in 0..n {
                let col_re = from_real(&to_real(&phi[q][j * n..(j + 1) * n]));
                let col_im: Vec<C64> = col_re.iter().map(|z| z * C64::new(0.0, 1.0)).collect();
                sys.view_mut((row, 2 * q), (m, 1)).copy_from(&to_real(&col_re));
                sys.view_mut((row, 2 * q + 1), (m, 1)).copy_from(&to_real(&col_im));
            }
            sys.view_mut((row, cols - 1), (m, 1)).copy_from(&to_real(&w_mu[j * n..(j + 1) * n]));
        }
        sys.view_mut((0, m + dm), (m, dp)).copy_from(&(-&joints.v_plus));
        sys.view_mut((m, m), (m, dm)).copy_from(&(-&joints.v_minus));
        let r = rank(&sys, TOL_RANK);
        if r < 2 * m {
            return Err(GlueError::TransversalityFailed { coker_dim: 2 * m - r });
        }
        let matching_pinv = sys.clone().pseudo_inverse(1e-12).map_err(|e| GlueError::NoConvergence(e.to_string()))?;
        let phi0 = (0..nodes).map(|j| 1.0 - smoothstep(axis.node(j).abs() - (big_l + splice))).collect();
        let rho_plus = (0..nodes).map(|j| smoothstep(axis.node(j) - (big_l - splice))).collect();
        let rho_minus = (0..nodes).map(|j| smoothstep(-axis.node(j) - (big_l - splice))).collect();
        Ok(Self {
            op,
            params: *params,
            coef,
            splice,
            jl,
            jr,
            j_minus,
            j_plus,
            phi,
            w_mu,
            matching_pinv,
            matching_sys: sys,
            v_minus: joints.v_minus.clone(),
            v_plus: joints.v_plus.clone(),
            phi0,
            rho_plus,
            rho_minus,
        })
    }

    pub fn for_config(cfg: &DfdConfig, params: &AdiabaticParams) -> Result<Self> {
        let u = preglue(cfg, params)?;
        let op = linearize(&u, &Equation::of_config(cfg, params))?;
        Self::new(op, &cfg.joints, params)
    }

    /// `Q^{app} η`.
    pub fn apply(&self, eta: &Section) -> Result<CombinedInverseOutput> {
        let cl = self.op.codomain();
        if eta.layout != cl {
            return Err(GlueError::ShapeMismatch("residual layout differs from operator codomain".into()));
        }
        let layout = self.op.layout();
        let n = layout.dim;
        let m = 2 * n;
        let nodes = layout.axis.len;
        let cells = nodes - 1;
        let modes = ModeField::from_section(eta);
        // cell ranges of the three pieces
        let piece = |c: usize| -> usize {
            if c < self.jl {
                0
            } else if c >= self.jr {
                2
            } else {
                1
            }
        };
        let mut out = ModeField::zeros(layout);
        let mut src = vec![C64::default(); cells * n];
        let mut sol = vec![C64::default(); nodes * n];
        let mut neck_l2 = 0.0;
        let mut end_l2 = 0.0;
        let w = layout.tau_weights();
        for bin in 0..layout.n_t {
            let k = signed_k(bin, layout.n_t);
            if k == 0 {
                continue;
            }
            let b = modes.mode(k);
            for pc in 0..3 {
                for c in 0..cells {
                    let on = piece(c) == pc;
                    for q in 0..n {
                        src[c * n + q] = if on { b[c * n + q] } else { C64::default() };
                    }
                }
                self.coef.solve_higher(k, &src, &mut sol);
                let cut = match pc {
                    0 => &self.rho_minus,
                    1 => &self.phi0,
                    _ => &self.rho_plus,
                };
                let o = out.mode_mut(k);
                for j in 0..nodes {
                    for q in 0..n {
                        let v = sol[j * n + q] * cut[j];
                        o[j * n + q] += v;
                        let e = w[j] * v.norm_sqr();
                        if pc == 1 {
                            neck_l2 += e;
                        } else {
                            end_l2 += e;
                        }
                    }
                }
            }
        }
        // zero mode
        let b0 = modes.mode(0);
        let zero = vec![C64::default(); n];
        for c in 0..cells {
            for q in 0..n {
                src[c * n + q] = if piece(c) == 1 { b0[c * n + q] } else { C64::default() };
            }
        }
        let mut z = vec![C64::default(); nodes * n];
        self.coef.solve_ivp(Some(&src), self.jl, &zero, &mut z);
        let mut rhs = DVector::zeros(2 * m);
        rhs.rows_mut(0, m).copy_from(&(-to_real(&z[self.j_plus * n..(self.j_plus + 1) * n])));
        rhs.rows_mut(m, m).copy_from(&(-to_real(&z[self.j_minus * n..(self.j_minus + 1) * n])));
        let x = &self.matching_pinv * &rhs;
        let matching_residual = (&self.matching_sys * &x - &rhs).norm();
        let alpha: Vec<C64> = (0..n).map(|q| C64::new(x[2 * q], x[2 * q + 1])).collect();
        let mu = x[x.len() - 1];
        let mut a0 = z;
        for j in 0..nodes {
            for q in 0..n {
                let mut v = self.w_mu[j * n + q] * mu;
                for (r, al) in alpha.iter().enumerate() {
                    v += self.phi[r][j * n + q] * al;
                }
                a0[j * n + q] += v;
            }
        }
        // end zero modes anchored at the joints
        for (pc, anchor) in [(2usize, self.jr), (0usize, self.jl)] {
            for c in 0..cells {
                for q in 0..n {
                    src[c * n + q] = if piece(c) == pc { b0[c * n + q] } else { C64::default() };
                }
            }
            self.coef.solve_ivp(Some(&src), anchor, &zero, &mut sol);
            for (a, s) in a0.iter_mut().zip(&sol) {
                *a += s;
            }
        }
        out.mode_mut(0).copy_from_slice(&a0);
        let xi = out.to_section();
        let alpha_norm = crate::linalg::vec_norm(&a0[self.jl * n..(self.jl + 1) * n]);
        Ok(CombinedInverseOutput {
            xi,
            mu,
            diagnostics: InverseDiagnostics { matching_residual, alpha_norm, neck_higher_l2: neck_l2.sqrt(), end_higher_l2: end_l2.sqrt() },
        })
    }

    /// `D(ξ) + μ s`.
    pub fn apply_d(&self, xi: &Section, mu: f64) -> Result<Section> {
        self.op.apply_para(xi, mu)
    }

    pub fn eta_norm(&self, eta: &Section) -> Result<f64> {
        Ok(norm_resolved_eta(eta, &self.params)?.total)
    }

    pub fn xi_norm(&self, xi: &Section, mu: f64) -> Result<ResolvedNorm> {
        norm_resolved(xi, mu, &self.params)
    }

    /// Boundary subspaces in use.
    pub fn subspaces(&self) -> (&DMatrix<f64>, &DMatrix<f64>) {
        (&self.v_minus, &self.v_plus)
    }

    pub fn joint_nodes(&self) -> (usize, usize) {
        (self.jl, self.jr)
    }

    /// Iterative refinement `η ← η − D Q^{app} η` towards an exact right inverse.
    pub fn true_inverse(&self, eta: &Section, max_iter: usize) -> Result<TrueInverseOutput> {
        let target = self.eta_norm(eta)?;
        let mut xi = Section::zeros(self.op.layout());
        let mut mu = 0.0;
        let mut residual = eta.clone();
        let mut history = vec![target];
        if target == 0.0 {
            return Ok(TrueInverseOutput { xi, mu, residual_history: history });
        }
        for _ in 0..max_iter {
            let q = self.apply(&residual)?;
            xi.axpy(1.0, &q.xi);
            mu += q.mu;
            residual = eta.sub(&self.apply_d(&xi, mu)?);
            let r = self.eta_norm(&residual)?;
            let prev = *history.last().unwrap();
            history.push(r);
            if r <= TOL_SOLVE * target {
                return Ok(TrueInverseOutput { xi, mu, residual_history: history });
            }
            if r > 0.5 * prev && prev > 1e3 * TOL_SOLVE * target {
                return Err(GlueError::NotContractive { ratio: r / prev });
            }
        }
        Ok(TrueInverseOutput { xi, mu, residual_history: history })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrueInverseOutput {
    pub xi: Section,
    pub mu: f64,
    /// `‖η − D_para(ξ_k, μ_k)‖_ε` per iteration, starting with `‖η‖_ε`.
    pub residual_history: Vec<f64>,
}

pub fn combined_inverse(eta: &Section, cfg: &DfdConfig, params: &AdiabaticParams) -> Result<CombinedInverseOutput> {
    InverseContext::for_config(cfg, params)?.apply(eta)
}

pub fn true_inverse(eta: &Section, cfg: &DfdConfig, params: &AdiabaticParams) -> Result<TrueInverseOutput> {
    InverseContext::for_config(cfg, params)?.true_inverse(eta, 40)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionReport {
    pub max_ratio: f64,
    pub ratios: Vec<f64>,
    /// `max ‖Q^{app}η‖_ε / ‖η‖_ε` over the same probes, a lower bound for the operator norm.
    pub q_norm: f64,
    pub max_matching_residual: f64,
}

/// Probes `‖D Q^{app} η − η‖_ε / ‖η‖_ε` on seeded Gaussian residuals.
pub fn contraction_check_ctx(ctx: &InverseContext, probes: usize, seed: u64) -> Result<ContractionReport> {
    if probes == 0 {
        return Err(GlueError::InvalidParams("at least one probe".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ratios = Vec::with_capacity(probes);
    let mut q_norm: f64 = 0.0;
    let mut mres: f64 = 0.0;
    for _ in 0..probes {
        let eta = gaussian_probe(&ctx.op.codomain(), &ctx.params, &mut rng);
        let en = ctx.eta_norm(&eta)?;
        let q = ctx.apply(&eta)?;
        let r = ctx.apply_d(&q.xi, q.mu)?.sub(&eta);
        ratios.push(ctx.eta_norm(&r)? / en);
        q_norm = q_norm.max(ctx.xi_norm(&q.xi, q.mu)?.total / en);
        mres = mres.max(q.diagnostics.matching_residual);
    }
    let max_ratio = ratios.iter().cloned().fold(0.0, f64::max);
    Ok(ContractionReport { max_ratio, ratios, q_norm, max_matching_residual: mres })
}

pub fn contraction_check(cfg: &DfdConfig, params: &AdiabaticParams, probes: usize, seed: u64) -> Result<ContractionReport> {
    contraction_check_ctx(&InverseContext::for_config(cfg, params)?, probes, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preglue::flat_toy;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn spec(len: usize, h: f64, n_t: usize, a: Option<DMatrix<C64>>) -> NeckInverseSpec {
        let axis = TauAxis::new(-(len as f64 - 1.0) * h / 2.0, h, len);
        let m = a.unwrap_or_else(|| DMatrix::zeros(2, 2));
        NeckInverseSpec {
            axis,
            n_t,
            dim: 2,
            a_field: vec![m; len - 1],
            v_minus: DMatrix::identity(4, 4),
            v_plus: DMatrix::identity(4, 4),
            k_max: n_t,
            weight: None,
        }
    }

    #[test]
    fn small_solver() {
        let a = [C64::new(2.0, 1.0), C64::new(0.5, 0.0), C64::new(0.0, -1.0), C64::new(0.1, 3.0)];
        let x = [C64::new(1.0, -2.0), C64::new(0.3, 0.7)];
        let mut b = [C64::default(); 2];
        for r in 0..2 {
            b[r] = a[r * 2] * x[0] + a[r * 2 + 1] * x[1];
        }
        solve_small(2, &a, &mut b);
        assert!((b[0] - x[0]).norm() < 1e-14 && (b[1] - x[1]).norm() < 1e-14);
    }

    #[test]
    fn higher_mode_closed_form() {
        let s = spec(65, 1.0 / 32.0, 8, None);
        let cl = s.layout().cells_of();
        let c = C64::new(0.4, -0.2);
        let mut b = ModeField::zeros(cl);
        for j in 0..cl.n_tau() {
            b.get_mut(1, j)[0] = c;
        }
        let a = neck_inverse_higher(&b, &s).unwrap();
        let lam = 2.0 * std::f64::consts::PI;
        let l = s.axis.end();
        for j in 0..s.axis.len {
            let tau = s.axis.node(j);
            let exact = -(c / lam) * (1.0 - (-lam * (l - tau)).exp());
            assert_abs_diff_eq!((a.get(1, j)[0] - exact).norm(), 0.0, epsilon = 1e-12);
        }
        assert_eq!(a.get(1, s.axis.len - 1)[0], C64::default());
    }

    #[test]
    fn higher_rejects_zero_mode_and_zero_maps_to_zero() {
        let s = spec(33, 1.0 / 16.0, 8, None);
        let cl = s.layout().cells_of();
        let b = ModeField::zeros(cl);
        let a = neck_inverse_higher(&b, &s).unwrap();
        assert!(a.coeffs.iter().all(|z| *z == C64::default()));
        let mut b = ModeField::zeros(cl);
        b.get_mut(0, 3)[1] = C64::new(1.0, 0.0);
        assert_eq!(neck_inverse_higher(&b, &s).unwrap_err(), GlueError::ModeZeroPresent);
    }

    #[test]
    fn zero_mode_affine_oracle() {
        // A = 0, a(start) ∈ span{e₁}, a(end) ∈ span{e₂} (real coordinates) with n = 1
        let axis = TauAxis::new(0.0, 0.1, 11);
        let mut v1 = DMatrix::zeros(2, 1);
        v1[(0, 0)] = 1.0;
        let mut v2 = DMatrix::zeros(2, 1);
        v2[(1, 0)] = 1.0;
        let s = NeckInverseSpec { axis, n_t: 1, dim: 1, a_field: vec![DMatrix::zeros(1, 1); 10], v_minus: v1, v_plus: v2, k_max: 0, weight: None };
        let b: Vec<Vec<C64>> = (0..10).map(|c| vec![C64::new(1.0 + c as f64 * 0.1, 0.5)]).collect();
        let (a, rep) = neck_inverse_zero(&b, &s, 4.0).unwrap();
        // a(end) = a(start) + Σ h b: Re a(end) = 0 forces Re a(start) = −Σ h Re b, Im a(start) = 0
        let sum: C64 = b.iter().map(|v| v[0] * 0.1).sum();
        assert_abs_diff_eq!(a[0][0].re, -sum.re, epsilon = 1e-12);
        assert_abs_diff_eq!(a[0][0].im, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(a[10][0].re, 0.0, epsilon = 1e-12);
        assert!(rep.boundary_residual < 1e-12);
        // non-transversal: both ends pinned to the same line
        let mut s2 = s.clone();
        s2.v_plus = s.v_minus.clone();
        assert!(matches!(neck_inverse_zero(&b, &s2, 4.0), Err(GlueError::TransversalityFailed { coker_dim: 1 })));
    }

    #[test]
    fn l2_bound_small_potential() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for trial in 0..10 {
            let a = DMatrix::from_fn(2, 2, |_, _| C64::new(rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2)));
            let s = spec(129, 1.0 / 16.0, 16, Some(a));
            let cl = s.layout().cells_of();
            let mut b = ModeField::zeros(cl);
            for k in b.orders().collect::<Vec<_>>() {
                if k == 0 {
                    continue;
                }
                for z in b.mode_mut(k) {
                    *z = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                }
            }
            let a = neck_inverse_higher(&b, &s).unwrap();
            assert!(a.higher_l2() <= b.higher_l2() + 1e-10, "trial {trial}");
        }
    }

    #[test]
    fn combined_inverse_zero_and_contraction() {
        let cfg = flat_toy().unwrap();
        let p = AdiabaticParams::standard(0.125);
        let ctx = InverseContext::for_config(&cfg, &p).unwrap();
        let zero = Section::zeros(ctx.op.codomain());
        let q = ctx.apply(&zero).unwrap();
        assert_eq!(q.mu, 0.0);
        assert_eq!(q.xi.max_abs(), 0.0);
        let rep = contraction_check_ctx(&ctx, 3, 1).unwrap();
        assert!(rep.max_ratio < 0.5, "{rep:?}");
    }

    #[test]
    fn true_inverse_is_right_inverse() {
        let cfg = flat_toy().unwrap();
        let p = AdiabaticParams::standard(0.125);
        let ctx = InverseContext::for_config(&cfg, &p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let eta = gaussian_probe(&ctx.op.codomain(), &p, &mut rng);
        let t = ctx.true_inverse(&eta, 30).unwrap();
        let r = ctx.apply_d(&t.xi, t.mu).unwrap().sub(&eta);
        assert!(ctx.eta_norm(&r).unwrap() <= 1e-10 * ctx.eta_norm(&eta).unwrap());
        for w in t.residual_history.windows(2) {
            assert!(w[1] <= 0.5 * w[0] || w[1] < 1e-9 * t.residual_history[0]);
        }
        // a kernel direction of D: Q∘D is not the identity on it
        let layout = ctx.op.layout();
        let n = layout.dim;
        let mut kern = Section::zeros(layout);
        for j in 0..layout.n_tau() {
            let v = &ctx.phi[0][j * n..(j + 1) * n];
            for i in 0..layout.n_t {
                kern.at_mut(j, i).copy_from_slice(v);
            }
        }
        let dk = ctx.apply_d(&kern, 0.0).unwrap();
        assert!(dk.max_abs() < 1e-10);
        let back = ctx.apply(&dk).unwrap();
        assert!(back.xi.sub(&kern).max_abs() > 0.5);
    }
}
