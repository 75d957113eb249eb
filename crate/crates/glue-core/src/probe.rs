//! Seeded random sections for operator-norm probing.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::cylinder::{Layout, Section, WeightKind, WeightProfile};
use crate::preglue::AdiabaticParams;
use crate::C64;

/// Complex Gaussian samples scaled by `β_{δ,ε}^{−1/p}` so every τ contributes comparably to
/// the weighted norm.
pub fn gaussian_probe<R: Rng>(layout: &Layout, params: &AdiabaticParams, rng: &mut R) -> Section {
    let beta = WeightProfile::sample(WeightKind::BetaDeltaEps, params, layout);
    let mut s = Section::zeros(*layout);
    let sl = layout.slice_len();
    for j in 0..layout.n_tau() {
        let f = beta.samples[j].powf(-1.0 / params.p);
        for z in &mut s.data[j * sl..(j + 1) * sl] {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *z = C64::new(re, im) * f;
        }
    }
    s
}

/// Unscaled complex Gaussian section.
pub fn plain_probe<R: Rng>(layout: &Layout, rng: &mut R) -> Section {
    let mut s = Section::zeros(*layout);
    for z in &mut s.data {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        *z = C64::new(re, im);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cylinder::TauAxis;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn probes_are_reproducible() {
        let l = Layout::nodes(TauAxis::new(-12.0, 0.25, 97), 8, 2).cells_of();
        let p = AdiabaticParams::standard(0.125);
        let a = gaussian_probe(&l, &p, &mut ChaCha8Rng::seed_from_u64(3));
        let b = gaussian_probe(&l, &p, &mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(a, b);
        let c = gaussian_probe(&l, &p, &mut ChaCha8Rng::seed_from_u64(4));
        assert_ne!(a, c);
    }
}
