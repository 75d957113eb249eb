//! Target geometry in a single holomorphic chart: flat ℂⁿ or the affine chart of CPⁿ
//! with the Fubini–Study metric. In both charts J is multiplication by `i`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{GlueError, Result};
use crate::linalg::{from_real, herm, realify, to_real, vec_norm};
use crate::ode::{rk4_endpoint, rk4_step};
use crate::C64;

/// RK4 steps used for unit-time geodesic and transport integration.
const GEODESIC_STEPS: usize = 600;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    FlatComplex,
    ProjectiveChart,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetModel {
    pub dim_complex: usize,
    pub kind: ModelKind,
    pub chart_radius: f64,
    pub injectivity_floor: f64,
}

impl TargetModel {
    pub fn flat(n: usize) -> Self {
        Self {
            dim_complex: n,
            kind: ModelKind::FlatComplex,
            chart_radius: f64::INFINITY,
            injectivity_floor: f64::INFINITY,
        }
    }

    /// Affine chart `[1 : z]` of CPⁿ, usable for `|z| ≤ chart_radius`.
    pub fn projective(n: usize, chart_radius: f64) -> Self {
        Self {
            dim_complex: n,
            kind: ModelKind::ProjectiveChart,
            chart_radius,
            injectivity_floor: (chart_radius / 4.0).min(0.5),
        }
    }

    pub fn check_point(&self, x: &[C64]) -> Result<()> {
        if x.len() != self.dim_complex {
            return Err(GlueError::ShapeMismatch(format!(
                "point of dimension {} in a model of dimension {}",
                x.len(),
                self.dim_complex
            )));
        }
        let modulus = vec_norm(x);
        if !(modulus <= self.chart_radius) {
            return Err(GlueError::ChartExceeded { modulus, radius: self.chart_radius });
        }
        Ok(())
    }

    /// Hermitian metric matrix `H(z)` with `g(v, w) = Re(v* H w)`.
    pub fn hermitian_metric(&self, x: &[C64]) -> DMatrix<C64> {
        let n = self.dim_complex;
        match self.kind {
            ModelKind::FlatComplex => DMatrix::identity(n, n),
            ModelKind::ProjectiveChart => {
                let r: f64 = x.iter().map(|z| z.norm_sqr()).sum();
                let s = 1.0 + r;
                DMatrix::from_fn(n, n, |j, k| {
                    let id = if j == k { s } else { 0.0 };
                    (C64::new(id, 0.0) - x[j] * x[k].conj()) / (s * s)
                })
            }
        }
    }

    /// `g(v, w)` at `x`.
    pub fn inner(&self, x: &[C64], v: &[C64], w: &[C64]) -> f64 {
        match self.kind {
            ModelKind::FlatComplex => herm(v, w).re,
            ModelKind::ProjectiveChart => {
                let r: f64 = x.iter().map(|z| z.norm_sqr()).sum();
                let s = 1.0 + r;
                let vw = herm(v, w);
                let vx = herm(v, x);
                let xw = herm(x, w);
                ((vw * s - vx * xw) / (s * s)).re
            }
        }
    }

    pub fn norm(&self, x: &[C64], v: &[C64]) -> f64 {
        self.inner(x, v, v).max(0.0).sqrt()
    }

    /// Applies the inverse metric `H(x)⁻¹` to `w`, writing into `out`.
    pub fn inverse_metric_apply(&self, x: &[C64], w: &[C64], out: &mut [C64]) {
        match self.kind {
            ModelKind::FlatComplex => out.copy_from_slice(w),
            ModelKind::ProjectiveChart => {
                let r: f64 = x.iter().map(|z| z.norm_sqr()).sum();
                let s = 1.0 + r;
                let xw = herm(x, w);
                for k in 0..x.len() {
                    out[k] = (w[k] + x[k] * xw) * s;
                }
            }
        }
    }

    /// Derivative of `x ↦ H(x)⁻¹ w` in direction `v` (for fixed `w`), added into `out`.
    pub fn inverse_metric_derivative_add(&self, x: &[C64], v: &[C64], w: &[C64], out: &mut [C64]) {
        if self.kind == ModelKind::FlatComplex {
            return;
        }
        let r: f64 = x.iter().map(|z| z.norm_sqr()).sum();
        let s = 1.0 + r;
        let dr = 2.0 * herm(x, v).re;
        let xw = herm(x, w);
        let vw = herm(v, w);
        for k in 0..x.len() {
            out[k] += (w[k] + x[k] * xw) * dr + (v[k] * xw + x[k] * vw) * s;
        }
    }

    /// Geodesic distance. Flat: Euclidean. Projective: closed form through the Hopf lift.
    pub fn distance(&self, x: &[C64], y: &[C64]) -> f64 {
        match self.kind {
            ModelKind::FlatComplex => vec_norm(&crate::linalg::vec_sub(x, y)),
            ModelKind::ProjectiveChart => fs_distance(x, y),
        }
    }

    fn geodesic_rhs(&self) -> impl Fn(&[C64], &mut [C64]) + '_ {
        // state = (z, ż)
        move |y: &[C64], out: &mut [C64]| {
            let n = y.len() / 2;
            let (z, zd) = y.split_at(n);
            let r: f64 = z.iter().map(|a| a.norm_sqr()).sum();
            let c = herm(z, zd) * (2.0 / (1.0 + r));
            for k in 0..n {
                out[k] = zd[k];
                out[n + k] = c * zd[k];
            }
        }
    }

    fn transport_rhs(&self) -> impl Fn(&[C64], &mut [C64]) + '_ {
        // state = (z, ż, V)
        move |y: &[C64], out: &mut [C64]| {
            let n = y.len() / 3;
            let z = &y[..n];
            let zd = &y[n..2 * n];
            let v = &y[2 * n..];
            let s = 1.0 + z.iter().map(|a| a.norm_sqr()).sum::<f64>();
            let zzd = herm(z, zd);
            let zv = herm(z, v);
            for k in 0..n {
                out[k] = zd[k];
                out[n + k] = zzd * zd[k] * (2.0 / s);
                out[2 * n + k] = (zzd * v[k] + zv * zd[k]) / s;
            }
        }
    }
}

/// Fubini–Study distance between chart points, via `atan2(|Z ∧ W|, |⟨Z, W⟩|)` for the lifts
/// `Z = (1, z)`, `W = (1, w)`. The wedge norm is summed from 2×2 minors to avoid cancellation.
pub fn fs_distance(z: &[C64], w: &[C64]) -> f64 {
    let n = z.len();
    let lift = |p: &[C64], i: usize| if i == 0 { C64::new(1.0, 0.0) } else { p[i - 1] };
    let mut wedge = 0.0;
    for i in 0..=n {
        for j in (i + 1)..=n {
            wedge += (lift(z, i) * lift(w, j) - lift(z, j) * lift(w, i)).norm_sqr();
        }
    }
    let dot = (C64::new(1.0, 0.0) + herm(z, w)).norm();
    wedge.sqrt().atan2(dot)
}

/// Real 2n×2n metric matrix at `x`.
pub fn metric_at(model: &TargetModel, x: &[C64]) -> Result<DMatrix<f64>> {
    model.check_point(x)?;
    Ok(realify(&model.hermitian_metric(x)))
}

pub fn exp_map(model: &TargetModel, x: &[C64], v: &[C64]) -> Result<Vec<C64>> {
    model.check_point(x)?;
    let length = model.norm(x, v);
    if length > model.injectivity_floor {
        return Err(GlueError::StepTooLarge { length, gate: model.injectivity_floor });
    }
    let out = match model.kind {
        ModelKind::FlatComplex => x.iter().zip(v).map(|(a, b)| a + b).collect(),
        ModelKind::ProjectiveChart => geodesic_endpoint(model, x, v, GEODESIC_STEPS),
    };
    model.check_point(&out)?;
    Ok(out)
}

/// Endpoint of the unit-time geodesic with initial velocity `v`, using `steps` RK4 steps.
pub fn geodesic_endpoint(model: &TargetModel, x: &[C64], v: &[C64], steps: usize) -> Vec<C64> {
    let n = x.len();
    if vec_norm(v) == 0.0 {
        return x.to_vec();
    }
    let y0: Vec<C64> = x.iter().chain(v.iter()).cloned().collect();
    let y = rk4_endpoint(&y0, 1.0, steps, &model.geodesic_rhs());
    y[..n].to_vec()
}

pub fn log_map(model: &TargetModel, x: &[C64], y: &[C64]) -> Result<Vec<C64>> {
    model.check_point(x)?;
    model.check_point(y)?;
    let distance = model.distance(x, y);
    if distance >= model.injectivity_floor {
        return Err(GlueError::OutOfInjectivity { distance, gate: model.injectivity_floor });
    }
    match model.kind {
        ModelKind::FlatComplex => Ok(y.iter().zip(x).map(|(a, b)| a - b).collect()),
        ModelKind::ProjectiveChart => shoot(model, x, y),
    }
}

/// Newton shooting for `exp_x(v) = y` with a finite-difference Jacobian.
fn shoot(model: &TargetModel, x: &[C64], y: &[C64]) -> Result<Vec<C64>> {
    let n = x.len();
    if x == y {
        return Ok(vec![C64::default(); n]);
    }
    let target = to_real(y);
    let mut v = to_real(&crate::linalg::vec_sub(y, x));
    let endpoint = |v: &DVector<f64>| to_real(&geodesic_endpoint(model, x, &from_real(v), GEODESIC_STEPS));
    let fd = 1e-6;
    for _ in 0..40 {
        let r = endpoint(&v) - &target;
        if r.norm() < 1e-14 {
            return Ok(from_real(&v));
        }
        let mut jac = DMatrix::zeros(2 * n, 2 * n);
        for c in 0..2 * n {
            let mut vp = v.clone();
            let mut vm = v.clone();
            vp[c] += fd;
            vm[c] -= fd;
            let col = (endpoint(&vp) - endpoint(&vm)) / (2.0 * fd);
            jac.set_column(c, &col);
        }
        let step = jac
            .lu()
            .solve(&r)
            .ok_or_else(|| GlueError::NoConvergence("singular shooting Jacobian".into()))?;
        v -= step;
    }
    let r = (endpoint(&v) - &target).norm();
    if r < 1e-11 {
        Ok(from_real(&v))
    } else {
        Err(GlueError::NoConvergence(format!("log map shooting residual {r:.3e}")))
    }
}

pub fn parallel_transport(model: &TargetModel, x: &[C64], y: &[C64], v: &[C64]) -> Result<Vec<C64>> {
    let w = log_map(model, x, y)?;
    match model.kind {
        ModelKind::FlatComplex => Ok(v.to_vec()),
        ModelKind::ProjectiveChart => Ok(transport_along_geodesic(model, x, &w, v, GEODESIC_STEPS)),
    }
}

/// Transports `v` along the unit-time geodesic from `x` with initial velocity `w`.
pub fn transport_along_geodesic(model: &TargetModel, x: &[C64], w: &[C64], v: &[C64], steps: usize) -> Vec<C64> {
    let n = x.len();
    let mut y: Vec<C64> = x.iter().chain(w).chain(v).cloned().collect();
    let rhs = model.transport_rhs();
    let h = 1.0 / steps as f64;
    for _ in 0..steps {
        rk4_step(&mut y, h, &rhs);
    }
    y[2 * n..].to_vec()
}

/// `f(z) = ½ Σ λ_j |z_j|² + (γ/4)|z|⁴` in chart coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Potential {
    pub lambda: Vec<f64>,
    pub quartic: f64,
}

impl Potential {
    pub fn quadratic(lambda: Vec<f64>) -> Self {
        Self { lambda, quartic: 0.0 }
    }

    pub fn value(&self, z: &[C64]) -> f64 {
        let r: f64 = z.iter().map(|a| a.norm_sqr()).sum();
        0.5 * z.iter().zip(&self.lambda).map(|(a, l)| l * a.norm_sqr()).sum::<f64>() + 0.25 * self.quartic * r * r
    }

    /// Euclidean gradient.
    pub fn grad_st(&self, z: &[C64], out: &mut [C64]) {
        let r: f64 = z.iter().map(|a| a.norm_sqr()).sum();
        for k in 0..z.len() {
            out[k] = z[k] * (self.lambda[k] + self.quartic * r);
        }
    }

    /// Euclidean Hessian applied to `v`.
    pub fn hess_st(&self, z: &[C64], v: &[C64], out: &mut [C64]) {
        let r: f64 = z.iter().map(|a| a.norm_sqr()).sum();
        let zv = 2.0 * herm(z, v).re;
        for k in 0..z.len() {
            out[k] = v[k] * (self.lambda[k] + self.quartic * r) + z[k] * (self.quartic * zv);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub point: Vec<C64>,
    /// Real Morse index μ_f.
    pub index: usize,
}

/// Morse function on a target chart. Gradients are metric gradients; `hess_grad_f` is the chart
/// Jacobian of the gradient field (equal to ∇grad f at critical points).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MorseData {
    pub model: TargetModel,
    pub potential: Potential,
    pub critical_points: Vec<CriticalPoint>,
}

impl MorseData {
    /// Origin is the only listed critical point; its index counts negative `λ_j` twice.
    pub fn new(model: TargetModel, potential: Potential) -> Result<Self> {
        if potential.lambda.len() != model.dim_complex {
            return Err(GlueError::ShapeMismatch("potential dimension".into()));
        }
        let index = 2 * potential.lambda.iter().filter(|&&l| l < 0.0).count();
        let origin = vec![C64::default(); model.dim_complex];
        Ok(Self { model, potential, critical_points: vec![CriticalPoint { point: origin, index }] })
    }

    pub fn dim(&self) -> usize {
        self.model.dim_complex
    }

    pub fn f(&self, z: &[C64]) -> f64 {
        self.potential.value(z)
    }

    pub fn grad_into(&self, z: &[C64], out: &mut [C64]) {
        let mut g = [C64::default(); 8];
        if z.len() <= 8 {
            self.potential.grad_st(z, &mut g[..z.len()]);
            self.model.inverse_metric_apply(z, &g[..z.len()], out);
        } else {
            let mut g = vec![C64::default(); z.len()];
            self.potential.grad_st(z, &mut g);
            self.model.inverse_metric_apply(z, &g, out);
        }
    }

    pub fn grad_f(&self, z: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::default(); z.len()];
        self.grad_into(z, &mut out);
        out
    }

    /// Directional derivative of the gradient field at `z` along `v`.
    pub fn dgrad_into(&self, z: &[C64], v: &[C64], out: &mut [C64]) {
        let n = z.len();
        if n <= 8 {
            let mut g = [C64::default(); 8];
            let mut hv = [C64::default(); 8];
            self.potential.grad_st(z, &mut g[..n]);
            self.potential.hess_st(z, v, &mut hv[..n]);
            self.model.inverse_metric_apply(z, &hv[..n], out);
            self.model.inverse_metric_derivative_add(z, v, &g[..n], out);
            return;
        }
        let mut g = vec![C64::default(); n];
        let mut hv = vec![C64::default(); n];
        self.potential.grad_st(z, &mut g);
        self.potential.hess_st(z, v, &mut hv);
        self.model.inverse_metric_apply(z, &hv, out);
        self.model.inverse_metric_derivative_add(z, v, &g, out);
    }

    /// Real 2n×2n matrix of `v ↦ d(grad f)(z) v`.
    pub fn hess_grad_f(&self, z: &[C64]) -> DMatrix<f64> {
        let n = z.len();
        let mut m = DMatrix::zeros(2 * n, 2 * n);
        let mut e = vec![C64::default(); n];
        let mut out = vec![C64::default(); n];
        for c in 0..2 * n {
            e.iter_mut().for_each(|x| *x = C64::default());
            e[c / 2] = if c % 2 == 0 { C64::new(1.0, 0.0) } else { C64::new(0.0, 1.0) };
            self.dgrad_into(z, &e, &mut out);
            m.set_column(c, &to_real(&out));
        }
        m
    }

    /// Largest `|grad f|` (chart norm) over the given points.
    pub fn sup_grad(&self, pts: &[Vec<C64>]) -> f64 {
        pts.iter().map(|p| vec_norm(&self.grad_f(p))).fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_pt(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<C64> {
        (0..n)
            .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * scale)
            .collect()
    }

    #[test]
    fn flat_metric_is_identity() {
        let m = TargetModel::flat(2);
        let g = metric_at(&m, &[C64::new(3.0, 1.0), C64::new(-2.0, 0.5)]).unwrap();
        assert_eq!(g, DMatrix::identity(4, 4));
    }

    #[test]
    fn fs_metric_normalized_at_origin() {
        let m = TargetModel::projective(1, 10.0);
        assert!((metric_at(&m, &[C64::default()]).unwrap() - DMatrix::<f64>::identity(2, 2)).norm() < 1e-15);
    }

    #[test]
    fn fs_metric_at_one_matches_distance_derivative() {
        let m = TargetModel::projective(1, 10.0);
        let g = metric_at(&m, &[C64::new(1.0, 0.0)]).unwrap();
        for dir in [C64::new(1.0, 0.0), C64::new(0.0, 1.0)] {
            let h = 1e-4;
            let dist = |h: f64| fs_distance(&[C64::new(1.0, 0.0)], &[C64::new(1.0, 0.0) + dir * h]) / h;
            let d = 2.0 * dist(h) - dist(2.0 * h);
            let v = to_real(&[dir]);
            let q = (v.transpose() * &g * &v)[(0, 0)].sqrt();
            assert!((d - q).abs() < 1e-6, "{d} vs {q}");
        }
        assert!((g[(0, 0)] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn fs_distance_from_origin_is_arctan() {
        let z = [C64::new(0.3, 0.4), C64::new(0.0, 0.0)];
        assert!((fs_distance(&[C64::default(); 2], &z) - 0.5f64.atan()).abs() < 1e-15);
    }

    #[test]
    fn flat_exp_log_transport() {
        let m = TargetModel::flat(2);
        let x = [C64::new(1.0, 2.0), C64::new(0.0, -1.0)];
        let v = [C64::new(0.5, 0.0), C64::new(0.1, 0.1)];
        let y = exp_map(&m, &x, &v).unwrap();
        assert_eq!(y, vec![x[0] + v[0], x[1] + v[1]]);
        assert_eq!(log_map(&m, &x, &y).unwrap(), vec![y[0] - x[0], y[1] - x[1]]);
        assert_eq!(parallel_transport(&m, &x, &y, &v).unwrap(), v.to_vec());
    }

    #[test]
    fn exp_of_zero_and_log_of_same_point() {
        let m = TargetModel::projective(2, 4.0);
        let x = [C64::new(0.2, 0.1), C64::new(-0.3, 0.0)];
        assert_eq!(exp_map(&m, &x, &[C64::default(); 2]).unwrap(), x.to_vec());
        assert_eq!(log_map(&m, &x, &x).unwrap(), vec![C64::default(); 2]);
    }

    #[test]
    fn fs_geodesic_length_matches_closed_form_distance() {
        let m = TargetModel::projective(2, 4.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let x = rand_pt(&mut rng, 2, 0.6);
            let mut v = rand_pt(&mut rng, 2, 1.0);
            let s = 0.4 / m.norm(&x, &v);
            v.iter_mut().for_each(|a| *a *= s);
            let y = exp_map(&m, &x, &v).unwrap();
            assert!((fs_distance(&x, &y) - 0.4).abs() < 1e-12);
            let y2 = geodesic_endpoint(&m, &x, &v, 2 * GEODESIC_STEPS);
            let gap = vec_norm(&crate::linalg::vec_sub(&y, &y2));
            assert!(gap < 1e-12, "{gap}");
        }
    }

    #[test]
    fn fs_log_round_trip() {
        let m = TargetModel::projective(2, 4.0);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10 {
            let x = rand_pt(&mut rng, 2, 0.7);
            let y: Vec<C64> = x.iter().zip(rand_pt(&mut rng, 2, 0.15)).map(|(a, b)| a + b).collect();
            let v = log_map(&m, &x, &y).unwrap();
            let back = exp_map(&m, &x, &v).unwrap();
            assert!(vec_norm(&crate::linalg::vec_sub(&back, &y)) < 1e-10);
            assert!((m.norm(&x, &v) - fs_distance(&x, &y)).abs() < 1e-10);
        }
    }

    #[test]
    fn fs_transport_is_isometric_and_invertible() {
        let m = TargetModel::projective(2, 4.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let x = rand_pt(&mut rng, 2, 0.7);
            let y: Vec<C64> = x.iter().zip(rand_pt(&mut rng, 2, 0.2)).map(|(a, b)| a + b).collect();
            let v = rand_pt(&mut rng, 2, 1.0);
            let w = parallel_transport(&m, &x, &y, &v).unwrap();
            assert!((m.norm(&x, &v) - m.norm(&y, &w)).abs() < 1e-10);
            let back = parallel_transport(&m, &y, &x, &w).unwrap();
            assert!(vec_norm(&crate::linalg::vec_sub(&back, &v)) < 1e-9);
        }
    }

    #[test]
    fn step_and_injectivity_gates() {
        let m = TargetModel::projective(1, 4.0);
        assert!(matches!(
            exp_map(&m, &[C64::default()], &[C64::new(0.6, 0.0)]),
            Err(GlueError::StepTooLarge { .. })
        ));
        assert!(matches!(
            log_map(&m, &[C64::default()], &[C64::new(2.0, 0.0)]),
            Err(GlueError::OutOfInjectivity { .. })
        ));
        assert!(matches!(
            metric_at(&m, &[C64::new(5.0, 0.0)]),
            Err(GlueError::ChartExceeded { .. })
        ));
    }

    #[test]
    fn hess_grad_matches_central_differences_at_second_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for model in [TargetModel::flat(2), TargetModel::projective(2, 4.0)] {
            let md = MorseData::new(model, Potential { lambda: vec![1.0, 2.0], quartic: 0.3 }).unwrap();
            let z = rand_pt(&mut rng, 2, 0.5);
            let a = md.hess_grad_f(&z);
            let fd = |h: f64| {
                let mut m = DMatrix::zeros(4, 4);
                for c in 0..4 {
                    let mut dz = [C64::default(); 2];
                    dz[c / 2] = if c % 2 == 0 { C64::new(h, 0.0) } else { C64::new(0.0, h) };
                    let zp: Vec<C64> = z.iter().zip(&dz).map(|(a, b)| a + b).collect();
                    let zm: Vec<C64> = z.iter().zip(&dz).map(|(a, b)| a - b).collect();
                    let col = (to_real(&md.grad_f(&zp)) - to_real(&md.grad_f(&zm))) / (2.0 * h);
                    m.set_column(c, &col);
                }
                m
            };
            let e1 = (fd(1e-2) - &a).norm();
            let e2 = (fd(5e-3) - &a).norm();
            assert!((e1 / e2).log2() >= 1.9, "slope {}", (e1 / e2).log2());
        }
    }

    #[test]
    fn origin_is_a_nondegenerate_critical_point() {
        let md = MorseData::new(TargetModel::projective(2, 4.0), Potential::quadratic(vec![1.0, 3.0])).unwrap();
        let cp = &md.critical_points[0];
        assert!(vec_norm(&md.grad_f(&cp.point)) < 1e-14);
        let eig = md.hess_grad_f(&cp.point).symmetric_eigen().eigenvalues;
        assert!(eig.iter().all(|e| e.abs() > 1e-8));
        assert_eq!(cp.index, 0);
    }

    #[test]
    fn fs_gradient_of_chart_quadratic() {
        // grad_g f = (1+r)(I + zz*) Λz
        let md = MorseData::new(TargetModel::projective(1, 4.0), Potential::quadratic(vec![2.0])).unwrap();
        let z = [C64::new(0.5, 0.5)];
        let g = md.grad_f(&z);
        let expect = z[0] * 2.0 * 1.5 * 1.5;
        assert!((g[0] - expect).norm() < 1e-14);
    }
}
