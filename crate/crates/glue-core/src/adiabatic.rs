//! Adiabatic-limit diagnostics: Karcher means, center-of-mass curves, renormalization, slice
//! width and the composite adiabatic distance to a disk-flow-disk configuration.

use serde::{Deserialize, Serialize};

use crate::cylinder::{d_t, d_tau, energy_local, CylinderGrid, Layout, Sampling, Section, TauAxis};
use crate::error::{GlueError, Result};
use crate::floer_op::principal;
use crate::flow::GradientSegment;
use crate::linalg::vec_norm;
use crate::preglue::{AdiabaticParams, DfdConfig, HolomorphicEnd};
use crate::target::{exp_map, log_map, MorseData, ModelKind, TargetModel};
use crate::C64;

pub const TOL_KARCHER: f64 = 1e-10;
const KARCHER_MAX_ITER: usize = 100;

/// Largest pairwise distance.
pub fn diameter(model: &TargetModel, points: &[Vec<C64>]) -> f64 {
    let mut d: f64 = 0.0;
    for (a, p) in points.iter().enumerate() {
        for q in &points[a + 1..] {
            d = d.max(model.distance(p, q));
        }
    }
    d
}

/// Riemannian center of mass, gated by the model's injectivity floor.
pub fn karcher_mean(model: &TargetModel, points: &[Vec<C64>]) -> Result<Vec<C64>> {
    karcher_mean_with(model, points, model.injectivity_floor)
}

/// Fixed point of `m ← exp_m(mean log_m p)`, started at the chart mean.
pub fn karcher_mean_with(model: &TargetModel, points: &[Vec<C64>], diam_limit: f64) -> Result<Vec<C64>> {
    let first = points.first().ok_or(GlueError::EmptySet)?;
    let n = first.len();
    let mut m = vec![C64::default(); n];
    for p in points {
        for (a, b) in m.iter_mut().zip(p) {
            *a += b;
        }
    }
    m.iter_mut().for_each(|a| *a /= points.len() as f64);
    if model.kind == ModelKind::FlatComplex {
        return Ok(m);
    }
    let diam = diameter(model, points);
    if diam >= diam_limit {
        return Err(GlueError::DiameterTooLarge { diameter: diam, limit: diam_limit });
    }
    for _ in 0..KARCHER_MAX_ITER {
        let mut g = vec![C64::default(); n];
        for p in points {
            let v = log_map(model, &m, p)?;
            for (a, b) in g.iter_mut().zip(&v) {
                *a += b;
            }
        }
        g.iter_mut().for_each(|a| *a /= points.len() as f64);
        if model.norm(&m, &g) < TOL_KARCHER {
            return Ok(m);
        }
        m = exp_map(model, &m, &g)?;
    }
    Err(GlueError::NoConvergence("Karcher iteration".into()))
}

/// `ū(τ̄, t̄) = u(τ̄/ε, t̄/ε)` on the neck nodes, circle period `ε`.
pub fn renormalize(u: &CylinderGrid, params: &AdiabaticParams) -> Result<CylinderGrid> {
    let l = u.layout;
    let big_r = params.r();
    let slack = 1e-9 * big_r.max(1.0);
    if l.axis.start > -big_r + slack || l.axis.end() < big_r - slack {
        return Err(GlueError::GridTooShort("grid does not span the neck".into()));
    }
    let j0 = (0..l.n_tau()).find(|&j| l.tau(j) >= -big_r - slack).unwrap();
    let j1 = (0..l.n_tau()).rev().find(|&j| l.tau(j) <= big_r + slack).unwrap();
    let eps = params.eps;
    let axis = TauAxis::new(eps * l.tau(j0), eps * l.axis.step, j1 - j0 + 1);
    let layout = Layout { axis, sampling: Sampling::Nodes, n_t: l.n_t, dim: l.dim, period: eps * l.period };
    let s = l.slice_len();
    Ok(CylinderGrid { layout, values: u.values[j0 * s..(j1 + 1) * s].to_vec() })
}

/// Inverse of [`renormalize`] on the neck nodes.
pub fn unrenormalize(u_bar: &CylinderGrid, params: &AdiabaticParams) -> CylinderGrid {
    let l = u_bar.layout;
    let eps = params.eps;
    let axis = TauAxis::new(l.axis.start / eps, l.axis.step / eps, l.axis.len);
    let layout = Layout { axis, period: l.period / eps, ..l };
    CylinderGrid { layout, values: u_bar.values.clone() }
}

/// `∂_τ̄ū + i∂_t̄ū + grad f(ū)` with the same box scheme as the neck operator.
pub fn rescaled_residual(u_bar: &CylinderGrid, morse: &MorseData) -> Result<Section> {
    let mut out = principal(&u_bar.as_section());
    let l = u_bar.layout;
    let cl = out.layout;
    let d = l.dim;
    let mut g0 = vec![C64::default(); d];
    let mut g1 = vec![C64::default(); d];
    for c in 0..cl.n_tau() {
        for i in 0..l.n_t {
            morse.grad_into(u_bar.at(c, i), &mut g0);
            morse.grad_into(u_bar.at(c + 1, i), &mut g1);
            for (q, o) in out.at_mut(c, i).iter_mut().enumerate() {
                *o += (g0[q] + g1[q]) * 0.5;
            }
        }
    }
    Ok(out)
}

/// `sup_τ diam u(τ, ·)`.
pub fn width(u_bar: &CylinderGrid, model: &TargetModel) -> f64 {
    (0..u_bar.layout.n_tau()).map(|j| diameter(model, &u_bar.slice_points(j))).fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CenterOfMassCurve {
    pub tau: Vec<f64>,
    pub cm: Vec<Vec<C64>>,
    /// `log_{cm(τ)} u(τ, t)`, mean zero on every slice.
    pub residual_xi: Section,
}

pub fn center_of_mass_curve(u: &CylinderGrid, model: &TargetModel) -> Result<CenterOfMassCurve> {
    let l = u.layout;
    let mut cm = Vec::with_capacity(l.n_tau());
    let mut xi = Section::zeros(l);
    for j in 0..l.n_tau() {
        let m = karcher_mean(model, &u.slice_points(j))?;
        for i in 0..l.n_t {
            let v = log_map(model, &m, u.at(j, i))?;
            xi.at_mut(j, i).copy_from_slice(&v);
        }
        cm.push(m);
    }
    Ok(CenterOfMassCurve { tau: (0..l.n_tau()).map(|j| l.tau(j)).collect(), cm, residual_xi: xi })
}

/// The limit configuration seen from the glued cylinder: the flow segment on the neck
/// `[−R, R]` and the ends translated by `±tau_shift`.
#[derive(Debug, Clone)]
pub struct AdiaTarget {
    pub morse: MorseData,
    pub chi: GradientSegment,
    pub u_minus: HolomorphicEnd,
    pub u_plus: HolomorphicEnd,
    pub r: f64,
    pub tau_shift: f64,
}

impl AdiaTarget {
    pub fn from_config(cfg: &DfdConfig, params: &AdiabaticParams) -> Self {
        Self {
            morse: cfg.morse.clone(),
            chi: cfg.chi.clone(),
            u_minus: cfg.u_minus.clone(),
            u_plus: cfg.u_plus.clone(),
            r: params.r(),
            tau_shift: params.tau_eps(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdiaDistanceReport {
    pub local_energy: f64,
    pub hausdorff_neck: f64,
    /// Minus side, plus side.
    pub transition_diams: (f64, f64),
    pub end_c1_distances: (f64, f64),
    pub zeta: f64,
    pub composite: f64,
}

/// Windowed Hausdorff bound between the neck image and the flow segment.
///
/// Each grid point is compared with segment samples near `ετ`, each segment sample with the
/// slices next to `σ/ε`. Both one-sided minima are taken over subsets, so the result bounds
/// the true distance from above.
fn neck_hausdorff(u: &CylinderGrid, target: &AdiaTarget) -> Result<f64> {
    let l = u.layout;
    let model = &target.morse.model;
    let chi = &target.chi;
    let scale = chi.l / target.r;
    let ns = chi.samples.len();
    let sample_of = |sigma: f64| (((sigma + chi.l) / chi.step).round().max(0.0) as usize).min(ns - 1);
    let slack = 1e-9 * target.r.max(1.0);
    let neck: Vec<usize> = (0..l.n_tau()).filter(|&j| l.tau(j).abs() <= target.r + slack).collect();
    if neck.is_empty() {
        return Err(GlueError::GridTooShort("no neck nodes".into()));
    }
    let window = 8usize;
    let mut a_to_b: f64 = 0.0;
    for &j in &neck {
        let sigma = scale * l.tau(j);
        let k = sample_of(sigma);
        let (k0, k1) = (k.saturating_sub(window), (k + window).min(ns - 1));
        let on_curve = chi.eval(&target.morse, sigma.clamp(-chi.l, chi.l));
        for i in 0..l.n_t {
            let p = u.at(j, i);
            let m = chi.samples[k0..=k1]
                .iter()
                .map(|q| model.distance(p, q))
                .fold(model.distance(p, &on_curve), f64::min);
            a_to_b = a_to_b.max(m);
        }
    }
    let mut b_to_a: f64 = 0.0;
    let (first, last) = (neck[0], *neck.last().unwrap());
    for (k, q) in chi.samples.iter().enumerate() {
        let sigma = -chi.l + k as f64 * chi.step;
        let j = l.axis.nearest(sigma / scale).clamp(first, last);
        let (j0, j1) = (j.saturating_sub(1).max(first), (j + 1).min(last));
        let mut m = f64::INFINITY;
        for jj in j0..=j1 {
            for i in 0..l.n_t {
                m = m.min(model.distance(u.at(jj, i), q));
            }
        }
        b_to_a = b_to_a.max(m);
    }
    Ok(a_to_b + b_to_a)
}

fn end_grid(u: &CylinderGrid, end: &HolomorphicEnd, shift: f64) -> CylinderGrid {
    CylinderGrid::from_fn(u.layout, |tau, t| end.eval(tau - shift, t))
}

/// Discrete C¹ distance on the selected nodes: model distance plus Euclidean chart norms of
/// the first differences.
fn c1_distance(u: &CylinderGrid, v: &CylinderGrid, model: &TargetModel, nodes: &[usize]) -> Result<f64> {
    if nodes.is_empty() {
        return Ok(0.0);
    }
    let d = u.diff(v)?;
    let dtau = d_tau(&d)?;
    let dt = d_t(&d);
    let l = u.layout;
    let (mut c0, mut c1): (f64, f64) = (0.0, 0.0);
    for &j in nodes {
        for i in 0..l.n_t {
            c0 = c0.max(model.distance(u.at(j, i), v.at(j, i)));
            c1 = c1.max(vec_norm(dtau.at(j, i)) + vec_norm(dt.at(j, i)));
        }
    }
    Ok(c0 + c1)
}

/// Composite adiabatic distance for the scale `ζ`. The minus end is compared after shifting
/// right by the end translation and the plus end after shifting left.
pub fn adia_distance(u: &CylinderGrid, target: &AdiaTarget, zeta: f64) -> Result<AdiaDistanceReport> {
    if !(zeta > 0.0 && zeta < 1.0) {
        return Err(GlueError::InvalidParams(format!("ζ = {zeta}")));
    }
    let l = u.layout;
    let model = &target.morse.model;
    let r = target.r;
    if l.axis.start > -r || l.axis.end() < r {
        return Err(GlueError::GridTooShort("grid does not span the neck".into()));
    }
    let local_energy = 0.5 * energy_local(u, model, -r, r)?;
    let hausdorff_neck = neck_hausdorff(u, target)?;
    let edge = target.tau_shift + zeta.ln() / (2.0 * std::f64::consts::PI);
    let taus: Vec<f64> = (0..l.n_tau()).map(|j| l.tau(j)).collect();
    let mut diams = [0.0; 2];
    let mut c1 = [0.0; 2];
    for (side, sign) in [(0usize, -1.0f64), (1usize, 1.0f64)] {
        let trans: Vec<usize> = (0..l.n_tau()).filter(|&j| sign * taus[j] >= r && sign * taus[j] <= edge).collect();
        let pts: Vec<Vec<C64>> = trans.iter().flat_map(|&j| u.slice_points(j)).collect();
        diams[side] = diameter(model, &pts);
        let ends: Vec<usize> = (0..l.n_tau()).filter(|&j| sign * taus[j] >= edge).collect();
        let (end, shift) =
            if side == 0 { (&target.u_minus, -target.tau_shift) } else { (&target.u_plus, target.tau_shift) };
        let v = end_grid(u, end, shift);
        c1[side] = c1_distance(u, &v, model, &ends)?;
    }
    let composite = [local_energy, hausdorff_neck, diams[0], diams[1], c1[0], c1[1]].into_iter().fold(0.0, f64::max);
    Ok(AdiaDistanceReport {
        local_energy,
        hausdorff_neck,
        transition_diams: (diams[0], diams[1]),
        end_c1_distances: (c1[0], c1[1]),
        zeta,
        composite,
    })
}

pub fn adia_distance_cfg(u: &CylinderGrid, cfg: &DfdConfig, params: &AdiabaticParams, zeta: f64) -> Result<AdiaDistanceReport> {
    adia_distance(u, &AdiaTarget::from_config(cfg, params), zeta)
}

/// Pointwise chart distance between two grids on the same layout.
pub fn grid_distance(a: &CylinderGrid, b: &CylinderGrid) -> Result<f64> {
    let d = a.diff(b)?;
    Ok(d.data.chunks_exact(a.layout.dim).map(vec_norm).fold(0.0, f64::max))
}

/// `max |Σ_i log_{cm} u_i| / n_t` over slices, the first-order condition of the curve.
pub fn karcher_defect(curve: &CenterOfMassCurve) -> f64 {
    let l = curve.residual_xi.layout;
    (0..l.n_tau()).map(|j| vec_norm(&curve.residual_xi.slice_mean(j))).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::vec_sub;
    use crate::preglue::{flat_toy, preglue};
    use crate::target::{fs_distance, Potential};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cluster(rng: &mut ChaCha8Rng, centre: &[C64], r: f64, k: usize) -> Vec<Vec<C64>> {
        (0..k)
            .map(|_| centre.iter().map(|c| c + C64::new(rng.random_range(-r..r), rng.random_range(-r..r))).collect())
            .collect()
    }

    #[test]
    fn flat_mean_is_arithmetic_and_translation_equivariant() {
        let m = TargetModel::flat(2);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts = cluster(&mut rng, &[C64::new(1.0, 0.0), C64::new(0.0, 2.0)], 0.5, 9);
        let a = karcher_mean(&m, &pts).unwrap();
        let shift = [C64::new(0.25, -0.5), C64::new(2.0, 0.0)];
        let moved: Vec<Vec<C64>> = pts.iter().map(|p| vec![p[0] + shift[0], p[1] + shift[1]]).collect();
        let b = karcher_mean(&m, &moved).unwrap();
        for q in 0..2 {
            assert!((b[q] - a[q] - shift[q]).norm() < 1e-15);
        }
        let same = vec![vec![C64::new(0.3, 0.1), C64::new(0.0, 0.0)]; 5];
        assert_eq!(karcher_mean(&TargetModel::projective(2, 4.0), &same).unwrap(), same[0]);
    }

    #[test]
    fn projective_mean_matches_grid_search() {
        let m = TargetModel::projective(1, 4.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts = cluster(&mut rng, &[C64::new(0.6, 0.2)], 0.08, 7);
        let k = karcher_mean(&m, &pts).unwrap();
        let cost = |z: C64| pts.iter().map(|p| fs_distance(&[z], p).powi(2)).sum::<f64>();
        // brute force on a fine local grid around the chart mean
        let mut best = (f64::INFINITY, C64::default());
        let c0 = pts.iter().map(|p| p[0]).sum::<C64>() / pts.len() as f64;
        for a in -200..=200 {
            for b in -200..=200 {
                let z = c0 + C64::new(a as f64, b as f64) * 2e-4;
                let v = cost(z);
                if v < best.0 {
                    best = (v, z);
                }
            }
        }
        assert!((best.1 - k[0]).norm() < 4e-4, "{:?} vs {:?}", best.1, k[0]);
        assert!(cost(k[0]) <= best.0 + 1e-12);
        let far = vec![vec![C64::new(0.0, 0.0)], vec![C64::new(3.0, 0.0)]];
        assert!(matches!(karcher_mean(&m, &far), Err(GlueError::DiameterTooLarge { .. })));
    }

    #[test]
    fn renormalize_round_trip_and_segment() {
        let cfg = flat_toy().unwrap();
        let p = AdiabaticParams::standard(0.125);
        let u = preglue(&cfg, &p).unwrap();
        let ub = renormalize(&u, &p).unwrap();
        assert!((ub.layout.period - 0.125).abs() < 1e-16);
        assert!((ub.layout.axis.start + 1.0).abs() < 1e-12 && (ub.layout.axis.end() - 1.0).abs() < 1e-12);
        // the neck is χ(ετ), so ū is χ
        for j in (0..ub.layout.n_tau()).step_by(16) {
            let want = cfg.chi.eval(&cfg.morse, ub.layout.tau(j));
            assert!(vec_norm(&vec_sub(ub.at(j, 3), &want)) < 1e-12);
        }
        let back = unrenormalize(&ub, &p);
        let j0 = u.layout.axis.nearest(back.layout.axis.start);
        for j in 0..back.layout.n_tau() {
            assert_eq!(back.slice(j), u.slice(j0 + j));
        }
        assert_eq!(renormalize(&u, &AdiabaticParams::standard(1.0)).unwrap().layout.axis.step, u.layout.axis.step);
    }

    #[test]
    fn width_examples() {
        let l = Layout::nodes(TauAxis::new(0.0, 0.25, 9), 64, 1);
        let flat = TargetModel::flat(1);
        let u = CylinderGrid::from_fn(l, |tau, _| vec![C64::new(tau, 1.0)]);
        assert_eq!(width(&u, &flat), 0.0);
        let r = 0.3;
        let circ = CylinderGrid::from_fn(l, |_, t| vec![C64::new(0.0, 2.0 * std::f64::consts::PI * t).exp() * r]);
        assert!((width(&circ, &flat) - 2.0 * r).abs() < 1e-12);
    }

    #[test]
    fn center_of_mass_curve_has_mean_zero_residual() {
        let l = Layout::nodes(TauAxis::new(0.0, 0.25, 5), 16, 1);
        let u = CylinderGrid::from_fn(l, |tau, t| vec![C64::new(0.2 * tau, 0.1) + C64::new(0.0, std::f64::consts::TAU * t).exp() * 0.05]);
        let m = TargetModel::projective(1, 4.0);
        let c = center_of_mass_curve(&u, &m).unwrap();
        assert!(karcher_defect(&c) < 1e-9);
        let cf = center_of_mass_curve(&u, &TargetModel::flat(1)).unwrap();
        assert!(karcher_defect(&cf) < 1e-15);
    }

    #[test]
    fn rescaled_residual_of_the_segment() {
        let morse = MorseData::new(TargetModel::flat(2), Potential::quadratic(vec![1.0, 2.0])).unwrap();
        let cfg = flat_toy().unwrap();
        let p = AdiabaticParams::standard(1.0 / 32.0);
        let ub = renormalize(&preglue(&cfg, &p).unwrap(), &p).unwrap();
        let r = rescaled_residual(&ub, &morse).unwrap();
        // trapezoid error of the flow with step ε h
        assert!(r.max_abs() < 1e-5, "{}", r.max_abs());
    }

    #[test]
    fn adia_distance_of_preglued_map() {
        let cfg = flat_toy().unwrap();
        let mut last = f64::INFINITY;
        for k in 3..6 {
            let p = AdiabaticParams::standard(0.5f64.powi(k));
            let u = preglue(&cfg, &p).unwrap();
            let rep = adia_distance_cfg(&u, &cfg, &p, 0.25).unwrap();
            assert_eq!(rep.end_c1_distances, (0.0, 0.0));
            // segment points between slices sit up to ε h |χ'| / 2 away
            assert!(rep.hausdorff_neck < 2.0 * p.eps * cfg.h_tau, "{rep:?}");
            assert!(rep.composite < last);
            last = rep.composite;
            // a bump on the plus end shows up linearly
            let mut bumped = u.clone();
            let j = u.layout.n_tau() - 3;
            for s in [1e-3, 2e-3] {
                bumped.at_mut(j, 0)[0] = u.at(j, 0)[0] + s;
                let b = adia_distance_cfg(&bumped, &cfg, &p, 0.25).unwrap();
                assert!(b.end_c1_distances.1 >= s && b.end_c1_distances.1 < 100.0 * s);
            }
        }
    }
}
