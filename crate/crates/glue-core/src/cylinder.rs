//! Sampled maps and sections on finite cylinders, circle Fourier modes, weights and norms.

use std::sync::Arc;

use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{GlueError, Result};
use crate::preglue::{kappa0_at, smoothstep, AdiabaticParams};
use crate::target::TargetModel;
use crate::C64;

/// Uniform τ nodes `start + j·step`, `j < len`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauAxis {
    pub start: f64,
    pub step: f64,
    pub len: usize,
}

impl TauAxis {
    pub fn new(start: f64, step: f64, len: usize) -> Self {
        Self { start, step, len }
    }

    /// Nodes at integer multiples of `step` covering `[a, b]`.
    pub fn covering(a: f64, b: f64, step: f64) -> Self {
        let j0 = (a / step - 1e-9).floor() as i64;
        let j1 = (b / step + 1e-9).ceil() as i64;
        Self { start: j0 as f64 * step, step, len: (j1 - j0 + 1) as usize }
    }

    pub fn node(&self, j: usize) -> f64 {
        self.start + j as f64 * self.step
    }

    pub fn cell_mid(&self, c: usize) -> f64 {
        self.start + (c as f64 + 0.5) * self.step
    }

    pub fn end(&self) -> f64 {
        self.node(self.len - 1)
    }

    /// Index of the node nearest to `tau`, clamped to the axis.
    pub fn nearest(&self, tau: f64) -> usize {
        let j = ((tau - self.start) / self.step).round();
        j.clamp(0.0, (self.len - 1) as f64) as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sampling {
    /// Values at the τ nodes.
    Nodes,
    /// Values at cell midpoints (one fewer than nodes).
    Cells,
}

/// Shape shared by grids and sections: `len × n_t × dim` complex samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    pub axis: TauAxis,
    pub sampling: Sampling,
    pub n_t: usize,
    pub dim: usize,
    pub period: f64,
}

impl Layout {
    pub fn nodes(axis: TauAxis, n_t: usize, dim: usize) -> Self {
        Self { axis, sampling: Sampling::Nodes, n_t, dim, period: 1.0 }
    }

    pub fn cells_of(&self) -> Self {
        Self { sampling: Sampling::Cells, ..*self }
    }

    pub fn nodes_of(&self) -> Self {
        Self { sampling: Sampling::Nodes, ..*self }
    }

    pub fn n_tau(&self) -> usize {
        match self.sampling {
            Sampling::Nodes => self.axis.len,
            Sampling::Cells => self.axis.len - 1,
        }
    }

    pub fn tau(&self, j: usize) -> f64 {
        match self.sampling {
            Sampling::Nodes => self.axis.node(j),
            Sampling::Cells => self.axis.cell_mid(j),
        }
    }

    pub fn t(&self, i: usize) -> f64 {
        self.period * i as f64 / self.n_t as f64
    }

    pub fn size(&self) -> usize {
        self.n_tau() * self.n_t * self.dim
    }

    pub fn slice_len(&self) -> usize {
        self.n_t * self.dim
    }

    pub fn idx(&self, j: usize, i: usize) -> usize {
        (j * self.n_t + i) * self.dim
    }

    /// Quadrature weights in τ: trapezoid on nodes, midpoint on cells.
    pub fn tau_weights(&self) -> Vec<f64> {
        let h = self.axis.step;
        match self.sampling {
            Sampling::Cells => vec![h; self.n_tau()],
            Sampling::Nodes => {
                let mut w = vec![h; self.axis.len];
                w[0] = 0.5 * h;
                w[self.axis.len - 1] = 0.5 * h;
                w
            }
        }
    }

    /// Largest symmetric mode order kept without aliasing.
    pub fn k_max(&self) -> usize {
        self.n_t / 2 - 1
    }

    fn check_same(&self, other: &Layout) -> Result<()> {
        if self != other {
            return Err(GlueError::ShapeMismatch(format!("{self:?} vs {other:?}")));
        }
        Ok(())
    }
}

/// A sampled map into a chart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CylinderGrid {
    pub layout: Layout,
    pub values: Vec<C64>,
}

/// A sampled vector field along a map, or a residual field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Section {
    pub layout: Layout,
    pub data: Vec<C64>,
}

macro_rules! sampled_common {
    ($t:ty, $field:ident) => {
        impl $t {
            pub fn at(&self, j: usize, i: usize) -> &[C64] {
                let k = self.layout.idx(j, i);
                &self.$field[k..k + self.layout.dim]
            }

            pub fn at_mut(&mut self, j: usize, i: usize) -> &mut [C64] {
                let k = self.layout.idx(j, i);
                let d = self.layout.dim;
                &mut self.$field[k..k + d]
            }

            pub fn slice(&self, j: usize) -> &[C64] {
                let s = self.layout.slice_len();
                &self.$field[j * s..(j + 1) * s]
            }

            pub fn slice_mut(&mut self, j: usize) -> &mut [C64] {
                let s = self.layout.slice_len();
                &mut self.$field[j * s..(j + 1) * s]
            }

            /// Per-slice mean over the circle.
            pub fn slice_mean(&self, j: usize) -> Vec<C64> {
                let d = self.layout.dim;
                let mut m = vec![C64::default(); d];
                for chunk in self.slice(j).chunks_exact(d) {
                    for c in 0..d {
                        m[c] += chunk[c];
                    }
                }
                let nt = self.layout.n_t as f64;
                m.iter_mut().for_each(|x| *x /= nt);
                m
            }
        }
    };
}

sampled_common!(CylinderGrid, values);
sampled_common!(Section, data);

impl CylinderGrid {
    pub fn from_fn<F: FnMut(f64, f64) -> Vec<C64>>(layout: Layout, mut f: F) -> Self {
        let mut values = Vec::with_capacity(layout.size());
        for j in 0..layout.n_tau() {
            for i in 0..layout.n_t {
                let v = f(layout.tau(j), layout.t(i));
                debug_assert_eq!(v.len(), layout.dim);
                values.extend_from_slice(&v);
            }
        }
        Self { layout, values }
    }

    /// Chart addition `u + ξ`.
    pub fn add_section(&self, xi: &Section) -> Result<Self> {
        self.layout.check_same(&xi.layout)?;
        Ok(Self { layout: self.layout, values: self.values.iter().zip(&xi.data).map(|(a, b)| a + b).collect() })
    }

    pub fn diff(&self, other: &CylinderGrid) -> Result<Section> {
        self.layout.check_same(&other.layout)?;
        Ok(Section { layout: self.layout, data: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect() })
    }

    pub fn check_chart(&self, model: &TargetModel) -> Result<()> {
        for chunk in self.values.chunks_exact(self.layout.dim) {
            model.check_point(chunk)?;
        }
        Ok(())
    }

    /// All samples of slice `j` as separate points.
    pub fn slice_points(&self, j: usize) -> Vec<Vec<C64>> {
        self.slice(j).chunks_exact(self.layout.dim).map(|c| c.to_vec()).collect()
    }

    pub fn as_section(&self) -> Section {
        Section { layout: self.layout, data: self.values.clone() }
    }
}

impl Section {
    pub fn zeros(layout: Layout) -> Self {
        Self { layout, data: vec![C64::default(); layout.size()] }
    }

    pub fn from_fn<F: FnMut(f64, f64) -> Vec<C64>>(layout: Layout, f: F) -> Self {
        let g = CylinderGrid::from_fn(layout, f);
        Self { layout, data: g.values }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { layout: self.layout, data: self.data.iter().map(|x| x * s).collect() }
    }

    pub fn axpy(&mut self, a: f64, other: &Section) {
        debug_assert_eq!(self.layout, other.layout);
        for (x, y) in self.data.iter_mut().zip(&other.data) {
            *x += y * a;
        }
    }

    pub fn sub(&self, other: &Section) -> Section {
        let mut s = self.clone();
        s.axpy(-1.0, other);
        s
    }

    pub fn add(&self, other: &Section) -> Section {
        let mut s = self.clone();
        s.axpy(1.0, other);
        s
    }

    pub fn max_abs(&self) -> f64 {
        self.data.chunks_exact(self.layout.dim).map(crate::linalg::vec_norm).fold(0.0, f64::max)
    }

    /// Multiplies each slice by a τ-dependent factor.
    pub fn scale_by_tau(&mut self, factors: &[f64]) {
        let s = self.layout.slice_len();
        for (j, f) in factors.iter().enumerate() {
            self.data[j * s..(j + 1) * s].iter_mut().for_each(|x| *x *= *f);
        }
    }
}

/// Cached forward/inverse FFTs along the circle.
#[derive(Clone)]
pub struct CircleFft {
    n_t: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl CircleFft {
    pub fn new(n_t: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self { n_t, fwd: planner.plan_fft_forward(n_t), inv: planner.plan_fft_inverse(n_t) }
    }

    /// Samples of one slice (`n_t × dim`, interleaved by component) to Fourier coefficients
    /// `a_k = (1/n_t) Σ_i s_i e^{−2πik i/n_t}` in FFT bin order, same interleaving.
    pub fn analyze(&self, slice: &[C64], dim: usize, out: &mut [C64]) {
        let mut buf = vec![C64::default(); self.n_t];
        let norm = 1.0 / self.n_t as f64;
        for c in 0..dim {
            for i in 0..self.n_t {
                buf[i] = slice[i * dim + c];
            }
            self.fwd.process(&mut buf);
            for i in 0..self.n_t {
                out[i * dim + c] = buf[i] * norm;
            }
        }
    }

    pub fn synthesize(&self, coeffs: &[C64], dim: usize, out: &mut [C64]) {
        let mut buf = vec![C64::default(); self.n_t];
        for c in 0..dim {
            for i in 0..self.n_t {
                buf[i] = coeffs[i * dim + c];
            }
            self.inv.process(&mut buf);
            for i in 0..self.n_t {
                out[i * dim + c] = buf[i];
            }
        }
    }
}

/// Signed mode order of FFT bin `idx`; the Nyquist bin maps to `−n_t/2`.
pub fn signed_k(idx: usize, n_t: usize) -> i64 {
    if idx < n_t / 2 {
        idx as i64
    } else {
        idx as i64 - n_t as i64
    }
}

pub fn bin_of(k: i64, n_t: usize) -> usize {
    k.rem_euclid(n_t as i64) as usize
}

/// Per-slice Fourier coefficients `a_k(τ)`, stored as `coeffs[bin][j][component]`.
/// All `n_t` bins are kept (orders `−n_t/2 ..= n_t/2 − 1`) so reconstruction is exact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeField {
    pub layout: Layout,
    pub coeffs: Vec<C64>,
}

impl ModeField {
    pub fn zeros(layout: Layout) -> Self {
        Self { layout, coeffs: vec![C64::default(); layout.size()] }
    }

    fn off(&self, bin: usize, j: usize) -> usize {
        (bin * self.layout.n_tau() + j) * self.layout.dim
    }

    pub fn get(&self, k: i64, j: usize) -> &[C64] {
        let o = self.off(bin_of(k, self.layout.n_t), j);
        &self.coeffs[o..o + self.layout.dim]
    }

    pub fn get_mut(&mut self, k: i64, j: usize) -> &mut [C64] {
        let o = self.off(bin_of(k, self.layout.n_t), j);
        let d = self.layout.dim;
        &mut self.coeffs[o..o + d]
    }

    /// Mode `k` along the whole τ range, `n_tau × dim`.
    pub fn mode(&self, k: i64) -> &[C64] {
        let o = self.off(bin_of(k, self.layout.n_t), 0);
        &self.coeffs[o..o + self.layout.n_tau() * self.layout.dim]
    }

    pub fn mode_mut(&mut self, k: i64) -> &mut [C64] {
        let o = self.off(bin_of(k, self.layout.n_t), 0);
        let len = self.layout.n_tau() * self.layout.dim;
        &mut self.coeffs[o..o + len]
    }

    pub fn orders(&self) -> impl Iterator<Item = i64> {
        let n_t = self.layout.n_t;
        (0..n_t).map(move |b| signed_k(b, n_t))
    }

    pub fn from_section(s: &Section) -> Self {
        let l = s.layout;
        let fft = CircleFft::new(l.n_t);
        let mut out = Self::zeros(l);
        let mut buf = vec![C64::default(); l.slice_len()];
        for j in 0..l.n_tau() {
            fft.analyze(s.slice(j), l.dim, &mut buf);
            for bin in 0..l.n_t {
                let o = out.off(bin, j);
                out.coeffs[o..o + l.dim].copy_from_slice(&buf[bin * l.dim..(bin + 1) * l.dim]);
            }
        }
        out
    }

    pub fn to_section(&self) -> Section {
        let l = self.layout;
        let fft = CircleFft::new(l.n_t);
        let mut s = Section::zeros(l);
        let mut buf = vec![C64::default(); l.slice_len()];
        for j in 0..l.n_tau() {
            for bin in 0..l.n_t {
                let o = self.off(bin, j);
                buf[bin * l.dim..(bin + 1) * l.dim].copy_from_slice(&self.coeffs[o..o + l.dim]);
            }
            fft.synthesize(&buf, l.dim, s.slice_mut(j));
        }
        s
    }

    /// L² norm over τ (layout quadrature) of a single mode.
    pub fn mode_l2(&self, k: i64) -> f64 {
        let w = self.layout.tau_weights();
        let d = self.layout.dim;
        self.mode(k)
            .chunks_exact(d)
            .zip(&w)
            .map(|(a, w)| w * a.iter().map(|z| z.norm_sqr()).sum::<f64>())
            .sum::<f64>()
            .sqrt()
    }

    /// L² norm of all nonzero modes (equals the L² norm of the higher part by Parseval).
    pub fn higher_l2(&self) -> f64 {
        self.orders().filter(|&k| k != 0).map(|k| self.mode_l2(k).powi(2)).sum::<f64>().sqrt()
    }
}

/// Splits a section into its per-slice average and the mean-free remainder (as modes).
pub fn mode_decompose(s: &Section) -> (Vec<Vec<C64>>, ModeField) {
    let mut higher = ModeField::from_section(s);
    let d = s.layout.dim;
    let zero: Vec<Vec<C64>> = higher.mode(0).chunks_exact(d).map(|c| c.to_vec()).collect();
    higher.mode_mut(0).iter_mut().for_each(|x| *x = C64::default());
    (zero, higher)
}

pub fn recompose(zero: &[Vec<C64>], higher: &ModeField) -> Result<Section> {
    if zero.len() != higher.layout.n_tau() {
        return Err(GlueError::ShapeMismatch("zero mode length".into()));
    }
    let mut m = higher.clone();
    let d = m.layout.dim;
    for (j, z) in zero.iter().enumerate() {
        m.mode_mut(0)[j * d..(j + 1) * d].copy_from_slice(z);
    }
    Ok(m.to_section())
}

/// ∂_t by spectral differentiation.
pub fn d_t(s: &Section) -> Section {
    let mut m = ModeField::from_section(s);
    let w = 2.0 * std::f64::consts::PI / s.layout.period;
    for bin in 0..s.layout.n_t {
        let k = signed_k(bin, s.layout.n_t);
        // the Nyquist bin has no well-defined derivative for real data; drop it
        let f = if 2 * k.unsigned_abs() as usize == s.layout.n_t { C64::default() } else { C64::new(0.0, w * k as f64) };
        m.mode_mut(k).iter_mut().for_each(|x| *x *= f);
    }
    m.to_section()
}

/// ∂_τ by fourth-order finite differences (one-sided fourth order at the ends).
pub fn d_tau(s: &Section) -> Result<Section> {
    let l = s.layout;
    let n = l.n_tau();
    if n < 5 {
        return Err(GlueError::GridTooShort(format!("{n} τ samples, need 5 for ∂_τ")));
    }
    let h = l.axis.step;
    let sl = l.slice_len();
    let mut out = Section::zeros(l);
    let sample = |j: usize, q: usize| s.data[j * sl + q];
    for j in 0..n {
        let (base, coef): (usize, [f64; 5]) = if j < 2 {
            if j == 0 {
                (0, [-25.0, 48.0, -36.0, 16.0, -3.0])
            } else {
                (0, [-3.0, -10.0, 18.0, -6.0, 1.0])
            }
        } else if j + 2 >= n {
            if j == n - 1 {
                (n - 5, [3.0, -16.0, 36.0, -48.0, 25.0])
            } else {
                (n - 5, [-1.0, 6.0, -18.0, 10.0, 3.0])
            }
        } else {
            (j - 2, [1.0, -8.0, 0.0, 8.0, -1.0])
        };
        for q in 0..sl {
            let mut acc = C64::default();
            for (m, c) in coef.iter().enumerate() {
                if *c != 0.0 {
                    acc += sample(base + m, q) * *c;
                }
            }
            out.data[j * sl + q] = acc / (12.0 * h);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WeightKind {
    BetaDeltaEps,
    RhoEps,
    GeometricEps,
    ExponentialEnd,
    Unit,
}

/// Weight samples `w(τ_j)` for a layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightProfile {
    pub kind: WeightKind,
    pub params: AdiabaticParams,
    /// Width over which corners are blended (one grid cell by default; 0 disables).
    pub smoothing: f64,
    pub samples: Vec<f64>,
}

impl WeightProfile {
    pub fn sample(kind: WeightKind, params: &AdiabaticParams, layout: &Layout) -> Self {
        let smoothing = layout.axis.step;
        let samples = (0..layout.n_tau()).map(|j| weight_value(kind, params, smoothing, layout.tau(j))).collect();
        Self { kind, params: *params, smoothing, samples }
    }

    pub fn unit(params: &AdiabaticParams, layout: &Layout) -> Self {
        Self::sample(WeightKind::Unit, params, layout)
    }
}

/// Pointwise weight value.
pub fn weight_value(kind: WeightKind, params: &AdiabaticParams, smoothing: f64, tau: f64) -> f64 {
    let p = params.p;
    let d = params.delta;
    let eps = params.eps;
    let two_pi = 2.0 * std::f64::consts::PI;
    match kind {
        WeightKind::Unit => 1.0,
        WeightKind::GeometricEps => eps.powf(1.0 - p),
        WeightKind::RhoEps => eps.powf(1.0 - p) * (1.0 + tau.abs()).powf(d),
        WeightKind::ExponentialEnd => (two_pi * d * tau.abs()).exp(),
        WeightKind::BetaDeltaEps => {
            let a = tau.abs();
            let te = params.tau_eps();
            let big_l = params.r();
            let power = eps.powf(1.0 - p + d) * (1.0 + a).powf(d);
            let expo = |a: f64| (two_pi * d * (te - a)).exp().max(1.0);
            let raw = |a: f64| {
                if a <= big_l {
                    power
                } else if a <= big_l + 1.0 {
                    let k = kappa0_at(a, big_l);
                    k * eps.powf(1.0 - p + d) * (1.0 + a).powf(d) + (1.0 - k) * expo(a)
                } else {
                    expo(a)
                }
            };
            if smoothing > 0.0 && (a - te).abs() < 0.5 * smoothing {
                let q = smoothstep((a - (te - 0.5 * smoothing)) / smoothing);
                (1.0 - q) * raw(a) + q
            } else {
                raw(a)
            }
        }
    }
}

fn pnorm_vec(v: &[C64], p: f64) -> f64 {
    crate::linalg::vec_norm(v).powf(p)
}

/// `(∫ w |s|^p)^{1/p}` with τ quadrature from the layout and the circle mean in t.
pub fn norm_lp(s: &Section, w: &[f64], p: f64) -> f64 {
    lp_sum(s, w, p).powf(1.0 / p)
}

fn lp_sum(s: &Section, w: &[f64], p: f64) -> f64 {
    let l = s.layout;
    let qw = l.tau_weights();
    let d = l.dim;
    let circle = l.period / l.n_t as f64;
    let mut acc = 0.0;
    for j in 0..l.n_tau() {
        if w[j] == 0.0 {
            continue;
        }
        let inner: f64 = s.slice(j).chunks_exact(d).map(|v| pnorm_vec(v, p)).sum();
        acc += qw[j] * w[j] * inner * circle;
    }
    acc
}

/// `(∫ w (|s|^p + |∂_τ s|^p + |∂_t s|^p))^{1/p}`.
pub fn norm_weighted_w1p(s: &Section, w: &WeightProfile, p: f64) -> Result<f64> {
    if s.layout.sampling != Sampling::Nodes {
        return Err(GlueError::ShapeMismatch("W^{1,p} norm needs node sampling".into()));
    }
    if w.samples.len() != s.layout.n_tau() {
        return Err(GlueError::ShapeMismatch("weight length".into()));
    }
    let dt = d_tau(s)?;
    let dtt = d_t(s);
    Ok((lp_sum(s, &w.samples, p) + lp_sum(&dt, &w.samples, p) + lp_sum(&dtt, &w.samples, p)).powf(1.0 / p))
}

/// Component breakdown of a resolved norm.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ResolvedNorm {
    /// Weighted norm of the higher/extended part.
    pub tilde: f64,
    /// Geometric ε-norm of the neck zero mode.
    pub zero: f64,
    /// `|ξ₀(−L)| + |ξ₀(L)|` (domain norm only).
    pub ends: f64,
    pub mu: f64,
    pub total: f64,
}

/// Node indices nearest to `∓L` on an axis.
pub fn neck_nodes(axis: &TauAxis, params: &AdiabaticParams) -> (usize, usize) {
    (axis.nearest(-params.r()), axis.nearest(params.r()))
}

/// Cutoff used to extend the neck-end zero mode over the transition regions:
/// 1 for `|τ| ≤ τ(ε) − 1`, 0 for `|τ| ≥ τ(ε)`.
pub fn zero_extension_cutoff(tau: f64, params: &AdiabaticParams) -> f64 {
    1.0 - smoothstep(tau.abs() - (params.tau_eps() - 1.0))
}

/// Splits a node-sampled section into the neck zero mode and the extended remainder
/// `ξ̃ = ξ − ξ₀^{ext}`.
pub fn split_domain_section(xi: &Section, params: &AdiabaticParams) -> (Vec<Vec<C64>>, Section) {
    let l = xi.layout;
    let (jl, jr) = neck_nodes(&l.axis, params);
    let left = xi.slice_mean(jl);
    let right = xi.slice_mean(jr);
    let d = l.dim;
    let mut zero = Vec::with_capacity(l.n_tau());
    let mut tilde = xi.clone();
    for j in 0..l.n_tau() {
        let z = if j < jl {
            let c = zero_extension_cutoff(l.tau(j), params);
            left.iter().map(|x| x * c).collect()
        } else if j > jr {
            let c = zero_extension_cutoff(l.tau(j), params);
            right.iter().map(|x| x * c).collect()
        } else {
            xi.slice_mean(j)
        };
        for chunk in tilde.slice_mut(j).chunks_exact_mut(d) {
            for c in 0..d {
                chunk[c] -= z[c];
            }
        }
        zero.push(z);
    }
    (zero, tilde)
}

/// Domain norm `‖ξ‖_ε + |μ|`.
pub fn norm_resolved(xi: &Section, mu: f64, params: &AdiabaticParams) -> Result<ResolvedNorm> {
    let l = xi.layout;
    if l.axis.start > -params.tau_eps() || l.axis.end() < params.tau_eps() {
        return Err(GlueError::GridTooShort(format!(
            "grid [{}, {}] does not span ±τ(ε) = {}",
            l.axis.start,
            l.axis.end(),
            params.tau_eps()
        )));
    }
    let p = params.p;
    let eps = params.eps;
    let (jl, jr) = neck_nodes(&l.axis, params);
    let (zero, tilde) = split_domain_section(xi, params);
    let beta = WeightProfile::sample(WeightKind::BetaDeltaEps, params, &l);
    let tilde_norm = norm_weighted_w1p(&tilde, &beta, p)?;
    // zero mode on the neck, geometric ε-weights
    let h = l.axis.step;
    let mut acc = 0.0;
    for j in jl..=jr {
        let w = if j == jl || j == jr { 0.5 * h } else { h };
        let deriv = zero_mode_derivative(&zero, j, jl, jr, h);
        acc += w * (eps * crate::linalg::vec_norm(&zero[j]).powf(p) + eps.powf(1.0 - p) * deriv.powf(p));
    }
    let zero_norm = acc.powf(1.0 / p);
    let ends = crate::linalg::vec_norm(&zero[jl]) + crate::linalg::vec_norm(&zero[jr]);
    let total = tilde_norm + zero_norm + ends + mu.abs();
    Ok(ResolvedNorm { tilde: tilde_norm, zero: zero_norm, ends, mu: mu.abs(), total })
}

/// `|ξ₀'(τ_j)|` by fourth-order differences restricted to `[jl, jr]`.
fn zero_mode_derivative(zero: &[Vec<C64>], j: usize, jl: usize, jr: usize, h: f64) -> f64 {
    let n = jr - jl + 1;
    let d = zero[j].len();
    if n < 5 {
        let (a, b) = if j < jr { (j, j + 1) } else { (j - 1, j) };
        return crate::linalg::vec_norm(&crate::linalg::vec_sub(&zero[b], &zero[a])) / h;
    }
    let (base, coef): (usize, [f64; 5]) = if j < jl + 2 {
        if j == jl {
            (jl, [-25.0, 48.0, -36.0, 16.0, -3.0])
        } else {
            (jl, [-3.0, -10.0, 18.0, -6.0, 1.0])
        }
    } else if j + 2 > jr {
        if j == jr {
            (jr - 4, [3.0, -16.0, 36.0, -48.0, 25.0])
        } else {
            (jr - 4, [-1.0, 6.0, -18.0, 10.0, 3.0])
        }
    } else {
        (j - 2, [1.0, -8.0, 0.0, 8.0, -1.0])
    };
    let mut v = vec![C64::default(); d];
    for (m, c) in coef.iter().enumerate() {
        for q in 0..d {
            v[q] += zero[base + m][q] * *c;
        }
    }
    crate::linalg::vec_norm(&v) / (12.0 * h)
}

/// Codomain norm `‖η̃‖_{L^p_β} + ‖η₀‖_{L^p_ε}` for a cell-sampled residual. The zero mode is
/// split off on the neck cells only.
pub fn norm_resolved_eta(eta: &Section, params: &AdiabaticParams) -> Result<ResolvedNorm> {
    let l = eta.layout;
    if l.sampling != Sampling::Cells {
        return Err(GlueError::ShapeMismatch("residual norm needs cell sampling".into()));
    }
    let p = params.p;
    let (jl, jr) = neck_nodes(&l.axis, params);
    let d = l.dim;
    let mut tilde = eta.clone();
    let mut acc0 = 0.0;
    let h = l.axis.step;
    for c in jl..jr {
        let m = eta.slice_mean(c);
        acc0 += h * params.eps.powf(1.0 - p) * crate::linalg::vec_norm(&m).powf(p);
        for chunk in tilde.slice_mut(c).chunks_exact_mut(d) {
            for q in 0..d {
                chunk[q] -= m[q];
            }
        }
    }
    let beta = WeightProfile::sample(WeightKind::BetaDeltaEps, params, &l);
    let tilde_norm = norm_lp(&tilde, &beta.samples, p);
    let zero_norm = acc0.powf(1.0 / p);
    Ok(ResolvedNorm { tilde: tilde_norm, zero: zero_norm, ends: 0.0, mu: 0.0, total: tilde_norm + zero_norm })
}

/// `∫_box (|∂_τu|²_g + |∂_t u|²_g)`, trapezoid over the nodes inside `[a, b]`.
pub fn energy_local(u: &CylinderGrid, model: &TargetModel, a: f64, b: f64) -> Result<f64> {
    let l = u.layout;
    if a < l.axis.start - 1e-12 || b > l.axis.end() + 1e-12 || a > b {
        return Err(GlueError::GridTooShort(format!("box [{a}, {b}] outside grid")));
    }
    let s = u.as_section();
    let dtau = d_tau(&s)?;
    let dt = d_t(&s);
    let ja = l.axis.nearest(a);
    let jb = l.axis.nearest(b);
    let density = energy_density(u, model, &dtau, &dt);
    let h = l.axis.step;
    let mut e = 0.0;
    for j in ja..=jb {
        let w = if j == ja || j == jb { 0.5 * h } else { h };
        if ja == jb {
            return Ok(0.0);
        }
        e += w * density[j];
    }
    Ok(e)
}

/// Per-node circle integral of `|∂_τu|² + |∂_tu|²`.
pub fn energy_density(u: &CylinderGrid, model: &TargetModel, dtau: &Section, dt: &Section) -> Vec<f64> {
    let l = u.layout;
    let circle = l.period / l.n_t as f64;
    (0..l.n_tau())
        .map(|j| {
            (0..l.n_t)
                .map(|i| {
                    let x = u.at(j, i);
                    model.inner(x, dtau.at(j, i), dtau.at(j, i)) + model.inner(x, dt.at(j, i), dt.at(j, i))
                })
                .sum::<f64>()
                * circle
        })
        .collect()
}

/// Hausdorff distance with the sum-of-suprema convention.
pub fn hausdorff_distance<D>(a: &[Vec<C64>], b: &[Vec<C64>], dist: D) -> Result<f64>
where
    D: Fn(&[C64], &[C64]) -> f64,
{
    if a.is_empty() || b.is_empty() {
        return Err(GlueError::EmptySet);
    }
    let one_sided = |x: &[Vec<C64>], y: &[Vec<C64>]| {
        x.iter()
            .map(|p| y.iter().map(|q| dist(p, q)).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    Ok(one_sided(a, b) + one_sided(b, a))
}
