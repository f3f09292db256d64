//! Gamma-based Dirichlet and Beta draws with runtime dimensions.

use rand::Rng;
use rand_distr::{Distribution, Gamma};

/// Gamma(shape, 1) sampler. Shapes are validated by the callers.
#[derive(Clone, Debug)]
pub(crate) struct UnitGamma {
    dist: Gamma<f64>,
    shape: f64,
}

impl UnitGamma {
    pub(crate) fn new(shape: f64) -> Self {
        UnitGamma {
            dist: Gamma::new(shape, 1.0).expect("gamma shape must be positive and finite"),
            shape,
        }
    }

    #[inline]
    pub(crate) fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.dist.sample(rng)
    }
}

/// Normalizes gamma variates into a probability row. For tiny concentration
/// parameters every variate can underflow to zero; the mass then goes to one
/// component chosen in proportion to `alphas`, the limiting law.
pub(crate) fn normalize_gammas<R: Rng + ?Sized>(out: &mut [f64], alphas: &[f64], rng: &mut R) {
    let total: f64 = out.iter().sum();
    if total > 0.0 && total.is_finite() {
        out.iter_mut().for_each(|x| *x /= total);
        return;
    }
    let alpha_total: f64 = alphas.iter().sum();
    let mut u = rng.random::<f64>() * alpha_total;
    let mut pick = alphas.len() - 1;
    for (i, &a) in alphas.iter().enumerate() {
        if u < a {
            pick = i;
            break;
        }
        u -= a;
    }
    out.iter_mut().for_each(|x| *x = 0.0);
    out[pick] = 1.0;
}

/// Draws a Dirichlet(alphas) vector into `out`.
pub(crate) fn sample_dirichlet<R: Rng + ?Sized>(alphas: &[f64], out: &mut [f64], rng: &mut R) {
    for (x, &a) in out.iter_mut().zip(alphas) {
        *x = UnitGamma::new(a).sample(rng);
    }
    normalize_gammas(out, alphas, rng);
}

/// Beta(a, b) draw through two gamma variates.
pub(crate) fn beta_from_gammas<R: Rng + ?Sized>(a: &UnitGamma, b: &UnitGamma, rng: &mut R) -> f64 {
    let x = a.sample(rng);
    let y = b.sample(rng);
    let total = x + y;
    if total > 0.0 && total.is_finite() {
        x / total
    } else {
        // Both underflowed; fall back on the limiting two-point law.
        let (sa, sb) = (a.shape, b.shape);
        if rng.random::<f64>() * (sa + sb) < sa {
            1.0
        } else {
            0.0
        }
    }
}

pub(crate) fn sample_beta<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    beta_from_gammas(&UnitGamma::new(a), &UnitGamma::new(b), rng)
}
