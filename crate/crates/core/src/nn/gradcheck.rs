//! Central finite-difference oracle used to validate the hand-written
//! reverse passes. It only ever calls forward computations.

use super::tensor::Parameterized;

pub const FD_STEP: f64 = 1e-5;

/// Magnitudes below this are compared absolutely rather than relatively.
pub const REL_FLOOR: f64 = 1e-6;

/// `(f(x + h e_i) - f(x - h e_i)) / 2h` for every coordinate.
pub fn central_difference<F: FnMut(&[f64]) -> f64>(x: &[f64], h: f64, mut f: F) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + h;
            let up = f(&probe);
            probe[i] = orig - h;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Finite-difference gradient of `loss` w.r.t. every parameter of `model`,
/// in `params()` order.
pub fn param_gradients<M, F>(model: &M, h: f64, mut loss: F) -> Vec<Vec<f64>>
where
    M: Parameterized + Clone,
    F: FnMut(&M) -> f64,
{
    let mut probe = model.clone();
    let sizes: Vec<usize> = model.params().iter().map(|p| p.len()).collect();
    let mut out = Vec::with_capacity(sizes.len());
    for (t, &n) in sizes.iter().enumerate() {
        let mut g = Vec::with_capacity(n);
        for i in 0..n {
            let orig = probe.params()[t].values[i];
            probe.params_mut()[t].values[i] = orig + h;
            let up = loss(&probe);
            probe.params_mut()[t].values[i] = orig - h;
            let down = loss(&probe);
            probe.params_mut()[t].values[i] = orig;
            g.push((up - down) / (2.0 * h));
        }
        out.push(g);
    }
    out
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| relative_error(*a, *n))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn differentiates_a_cubic() {
        let g = central_difference(&[2.0, -1.0], FD_STEP, |x| x[0].powi(3) + 4.0 * x[1]);
        assert!(relative_error(12.0, g[0]) < 1e-8);
        assert!(relative_error(4.0, g[1]) < 1e-8);
    }
}
