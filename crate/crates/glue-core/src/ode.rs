//! Classical fourth-order Runge–Kutta on complex state vectors.

use crate::C64;

/// One RK4 step of `y' = rhs(y)` for an autonomous field. `rhs` writes into its second argument.
pub fn rk4_step<F>(y: &mut [C64], h: f64, rhs: &F)
where
    F: Fn(&[C64], &mut [C64]),
{
    let m = y.len();
    let mut k1 = vec![C64::default(); m];
    let mut k2 = vec![C64::default(); m];
    let mut k3 = vec![C64::default(); m];
    let mut k4 = vec![C64::default(); m];
    let mut tmp = vec![C64::default(); m];
    rhs(y, &mut k1);
    for i in 0..m {
        tmp[i] = y[i] + k1[i] * (0.5 * h);
    }
    rhs(&tmp, &mut k2);
    for i in 0..m {
        tmp[i] = y[i] + k2[i] * (0.5 * h);
    }
    rhs(&tmp, &mut k3);
    for i in 0..m {
        tmp[i] = y[i] + k3[i] * h;
    }
    rhs(&tmp, &mut k4);
    for i in 0..m {
        y[i] += (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (h / 6.0);
    }
}

/// Integrates over `[0, span]` with `steps` uniform steps, returning every intermediate state
/// (including the initial one).
pub fn rk4_trajectory<F>(y0: &[C64], span: f64, steps: usize, rhs: &F) -> Vec<Vec<C64>>
where
    F: Fn(&[C64], &mut [C64]),
{
    let h = span / steps as f64;
    let mut out = Vec::with_capacity(steps + 1);
    let mut y = y0.to_vec();
    out.push(y.clone());
    for _ in 0..steps {
        rk4_step(&mut y, h, rhs);
        out.push(y.clone());
    }
    out
}

/// Final state only.
pub fn rk4_endpoint<F>(y0: &[C64], span: f64, steps: usize, rhs: &F) -> Vec<C64>
where
    F: Fn(&[C64], &mut [C64]),
{
    let h = span / steps as f64;
    let mut y = y0.to_vec();
    for _ in 0..steps {
        rk4_step(&mut y, h, rhs);
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_is_fourth_order() {
        let rhs = |y: &[C64], out: &mut [C64]| out[0] = y[0] * C64::new(-1.0, 2.0);
        let exact = (C64::new(-1.0, 2.0)).exp();
        let e1 = (rk4_endpoint(&[C64::new(1.0, 0.0)], 1.0, 20, &rhs)[0] - exact).norm();
        let e2 = (rk4_endpoint(&[C64::new(1.0, 0.0)], 1.0, 40, &rhs)[0] - exact).norm();
        let slope = (e1 / e2).log2();
        assert!(slope > 3.8, "slope {slope}");
    }
}
