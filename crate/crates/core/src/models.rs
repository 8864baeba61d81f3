//! Parametric models: scalar and isotropic Gaussians, two-component
//! Gaussian mixtures, and the exact law of a sample mean of mixture noise.
//!
//! Every model is validated at construction and immutable afterwards.
//! Samplers are deterministic given the seed (`ChaCha8Rng::seed_from_u64`).

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Error, Result};

/// Samples drawn from a scalar model.
pub type SampleSet = Vec<f64>;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// A univariate law with a computable log-density.
pub trait Density1D: Sync {
    fn ln_density(&self, x: f64) -> f64;

    fn density(&self, x: f64) -> f64 {
        self.ln_density(x).exp()
    }
}

/// Wraps a plain density function so it can be used where a [`Density1D`]
/// is expected.
pub struct FnDensity<F>(pub F);

impl<F: Fn(f64) -> f64 + Sync> Density1D for FnDensity<F> {
    fn ln_density(&self, x: f64) -> f64 {
        (self.0)(x).ln()
    }

    fn density(&self, x: f64) -> f64 {
        (self.0)(x)
    }
}

/// Something that can produce i.i.d. draws from a random generator.
pub trait Sampler {
    type Item;

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Self::Item;

    /// `count` deterministic draws from a generator seeded with `seed`.
    fn sample(&self, count: usize, seed: u64) -> Result<Vec<Self::Item>> {
        if count == 0 {
            return Err(Error::EmptySampleRequest);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok((0..count).map(|_| self.draw(&mut rng)).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarGaussian {
    mu: f64,
    var: f64,
}

impl ScalarGaussian {
    pub fn new(mu: f64, var: f64) -> Result<Self> {
        if !mu.is_finite() {
            return Err(invalid(format!("gaussian mean must be finite, got {mu}")));
        }
        if !(var > 0.0 && var.is_finite()) {
            return Err(invalid(format!("gaussian variance must be positive, got {var}")));
        }
        Ok(Self { mu, var })
    }

    pub fn standard() -> Self {
        Self { mu: 0.0, var: 1.0 }
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn var(&self) -> f64 {
        self.var
    }

    pub fn std(&self) -> f64 {
        self.var.sqrt()
    }

    /// `[mu - 10 sd, mu + 10 sd]`
    pub fn integration_domain(&self) -> (f64, f64) {
        let w = 10.0 * self.std();
        (self.mu - w, self.mu + w)
    }
}

impl Density1D for ScalarGaussian {
    fn ln_density(&self, x: f64) -> f64 {
        let d = x - self.mu;
        -0.5 * d * d / self.var - 0.5 * self.var.ln() - LN_SQRT_2PI
    }

    fn density(&self, x: f64) -> f64 {
        let d = x - self.mu;
        (-0.5 * d * d / self.var).exp() / (2.0 * PI * self.var).sqrt()
    }
}

impl Sampler for ScalarGaussian {
    type Item = f64;

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        self.mu + self.std() * z
    }
}

/// Gaussian with covariance `var · I`.
#[derive(Debug, Clone, PartialEq)]
pub struct IsoGaussianVec {
    mean: Vec<f64>,
    var: f64,
}

impl IsoGaussianVec {
    pub fn new(mean: Vec<f64>, var: f64) -> Result<Self> {
        if mean.is_empty() {
            return Err(invalid("isotropic gaussian needs dimension ≥ 1"));
        }
        if mean.iter().any(|m| !m.is_finite()) {
            return Err(invalid("isotropic gaussian mean must be finite"));
        }
        if !(var > 0.0 && var.is_finite()) {
            return Err(invalid(format!("isotropic gaussian variance must be positive, got {var}")));
        }
        Ok(Self { mean, var })
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn var(&self) -> f64 {
        self.var
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn ln_density(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::LengthMismatch { left: x.len(), right: self.dim() });
        }
        let sq: f64 = x.iter().zip(&self.mean).map(|(a, b)| (a - b) * (a - b)).sum();
        let m = self.dim() as f64;
        Ok(-0.5 * sq / self.var - 0.5 * m * self.var.ln() - m * LN_SQRT_2PI)
    }

    pub fn density(&self, x: &[f64]) -> Result<f64> {
        self.ln_density(x).map(f64::exp)
    }
}

impl Sampler for IsoGaussianVec {
    type Item = Vec<f64>;

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let sd = self.var.sqrt();
        self.mean
            .iter()
            .map(|m| {
                let z: f64 = StandardNormal.sample(rng);
                m + sd * z
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture1D {
    weights: Vec<f64>,
    means: Vec<f64>,
    vars: Vec<f64>,
}

impl GaussianMixture1D {
    pub fn new(weights: Vec<f64>, means: Vec<f64>, vars: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(invalid("mixture needs at least one component"));
        }
        if weights.len() != means.len() {
            return Err(Error::LengthMismatch { left: weights.len(), right: means.len() });
        }
        if weights.len() != vars.len() {
            return Err(Error::LengthMismatch { left: weights.len(), right: vars.len() });
        }
        if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(invalid("mixture weights must be nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(invalid(format!("mixture weights sum to {total}, not 1")));
        }
        if means.iter().any(|m| !m.is_finite()) {
            return Err(invalid("mixture means must be finite"));
        }
        if vars.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(invalid("mixture variances must be positive"));
        }
        Ok(Self { weights, means, vars })
    }

    pub fn from_gaussian(g: ScalarGaussian) -> Self {
        Self { weights: vec![1.0], means: vec![g.mu], vars: vec![g.var] }
    }

    pub fn components(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn vars(&self) -> &[f64] {
        &self.vars
    }

    pub fn mean(&self) -> f64 {
        self.weights.iter().zip(&self.means).map(|(w, m)| w * m).sum()
    }

    /// Total variance: within-component plus between-component spread.
    pub fn variance(&self) -> f64 {
        let mu = self.mean();
        self.weights
            .iter()
            .zip(self.means.iter().zip(&self.vars))
            .map(|(w, (m, v))| w * (v + (m - mu) * (m - mu)))
            .sum()
    }

    pub fn max_component_var(&self) -> f64 {
        self.vars.iter().copied().fold(f64::MIN, f64::max)
    }

    /// `[min(means) − 10·max(sd), max(means) + 10·max(sd)]`
    pub fn integration_domain(&self) -> (f64, f64) {
        let sd = self.max_component_var().sqrt();
        let lo = self.means.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo - 10.0 * sd, hi + 10.0 * sd)
    }

    /// Draws one value together with the index of the component it came from.
    pub fn draw_with_component<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, f64) {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut k = self.weights.len() - 1;
        for (i, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                k = i;
                break;
            }
        }
        let z: f64 = StandardNormal.sample(rng);
        (k, self.means[k] + self.vars[k].sqrt() * z)
    }

    pub fn sample_with_components(&self, count: usize, seed: u64) -> Result<Vec<(usize, f64)>> {
        if count == 0 {
            return Err(Error::EmptySampleRequest);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok((0..count).map(|_| self.draw_with_component(&mut rng)).collect())
    }

    /// Exact law of `(1/n) Σ vᵢ` for `n` i.i.d. draws from this mixture.
    ///
    /// With two components the result has `n + 1` components indexed by the
    /// number `k` of draws from the first one: weight `C(n,k) w₁ᵏ w₂ⁿ⁻ᵏ`,
    /// mean `(k m₁ + (n−k) m₂)/n`, variance `(k v₁ + (n−k) v₂)/n²`.
    pub fn sample_mean_law(&self, n: usize) -> Result<GaussianMixture1D> {
        if n == 0 {
            return Err(invalid("sample size must be ≥ 1"));
        }
        let nf = n as f64;
        match self.components() {
            1 => Ok(Self {
                weights: vec![1.0],
                means: vec![self.means[0]],
                vars: vec![self.vars[0] / nf],
            }),
            2 => {
                if n == 1 {
                    return Ok(self.clone());
                }
                let (w1, w2) = (self.weights[0], self.weights[1]);
                let (m1, m2) = (self.means[0], self.means[1]);
                let (v1, v2) = (self.vars[0], self.vars[1]);
                let mut weights = Vec::with_capacity(n + 1);
                let mut means = Vec::with_capacity(n + 1);
                let mut vars = Vec::with_capacity(n + 1);
                for k in 0..=n {
                    let kf = k as f64;
                    let rest = nf - kf;
                    weights.push(binomial_pmf(n, k, w1, w2));
                    means.push((kf * m1 + rest * m2) / nf);
                    vars.push((kf * v1 + rest * v2) / (nf * nf));
                }
                // Renormalize away the rounding in the log-space pmf.
                let total: f64 = weights.iter().sum();
                weights.iter_mut().for_each(|w| *w /= total);
                Ok(Self { weights, means, vars })
            }
            _ => Err(Error::TooManyComponents),
        }
    }
}

fn ln_choose(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).map(|i| ((n - i) as f64).ln() - ((i + 1) as f64).ln()).sum()
}

fn binomial_pmf(n: usize, k: usize, p: f64, q: f64) -> f64 {
    let term = |count: usize, prob: f64| if count == 0 { 0.0 } else { count as f64 * prob.ln() };
    (ln_choose(n, k) + term(k, p) + term(n - k, q)).exp()
}

impl Density1D for GaussianMixture1D {
    fn ln_density(&self, x: f64) -> f64 {
        let term = |i: usize| {
            let d = x - self.means[i];
            self.weights[i].ln() - 0.5 * d * d / self.vars[i] - 0.5 * self.vars[i].ln() - LN_SQRT_2PI
        };
        let live = (0..self.components()).filter(|&i| self.weights[i] > 0.0);
        let best = live.clone().map(term).fold(f64::NEG_INFINITY, f64::max);
        if best == f64::NEG_INFINITY {
            return best;
        }
        best + live.map(|i| (term(i) - best).exp()).sum::<f64>().ln()
    }

    fn density(&self, x: f64) -> f64 {
        self.weights
            .iter()
            .zip(self.means.iter().zip(&self.vars))
            .map(|(w, (m, v))| {
                let d = x - m;
                w * (-0.5 * d * d / v).exp() / (2.0 * PI * v).sqrt()
            })
            .sum()
    }
}

impl Sampler for GaussianMixture1D {
    type Item = f64;

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.draw_with_component(rng).1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{integrate, QuadOptions};

    fn mix(w: &[f64], m: &[f64], v: &[f64]) -> GaussianMixture1D {
        GaussianMixture1D::new(w.to_vec(), m.to_vec(), v.to_vec()).unwrap()
    }

    #[test]
    fn standard_normal_mode() {
        let g = ScalarGaussian::standard();
        assert!((g.density(0.0) - 0.398_942_280_401_432_7).abs() < 1e-15);
        assert!((g.ln_density(0.0).exp() - g.density(0.0)).abs() < 1e-15);
    }

    #[test]
    fn single_component_mixture_matches_gaussian() {
        let m = mix(&[1.0], &[0.0], &[1.0]);
        assert!((m.density(0.0) - ScalarGaussian::standard().density(0.0)).abs() < 1e-15);
        assert!((m.ln_density(1.3) - ScalarGaussian::standard().ln_density(1.3)).abs() < 1e-14);
    }

    #[test]
    fn symmetric_mixture_at_origin() {
        let a = 0.7;
        let m = mix(&[0.5, 0.5], &[-a, a], &[1.0, 1.0]);
        let shifted = ScalarGaussian::new(a, 1.0).unwrap();
        assert!((m.density(0.0) - shifted.density(0.0)).abs() < 1e-15);
    }

    #[test]
    fn invalid_models_rejected() {
        assert!(ScalarGaussian::new(0.0, 0.0).is_err());
        assert!(ScalarGaussian::new(0.0, -1.0).is_err());
        assert!(IsoGaussianVec::new(vec![], 1.0).is_err());
        assert!(GaussianMixture1D::new(vec![0.5, 0.4], vec![0.0, 1.0], vec![1.0, 1.0]).is_err());
        assert!(GaussianMixture1D::new(vec![0.5, 0.5], vec![0.0, 1.0], vec![1.0, 0.0]).is_err());
        assert!(GaussianMixture1D::new(vec![1.0], vec![0.0, 1.0], vec![1.0]).is_err());
    }

    #[test]
    fn densities_integrate_to_one() {
        let opts = QuadOptions { abs_tol: 1e-12, ..QuadOptions::default() };
        let g = ScalarGaussian::new(1.5, 0.3).unwrap();
        let (a, b) = g.integration_domain();
        let r = integrate(|x| g.density(x), a, b, &opts).unwrap();
        assert!((r.value - 1.0).abs() < 1e-8);

        let m = mix(&[0.2, 0.8], &[-3.0, 2.0], &[0.25, 2.0]);
        let (a, b) = m.integration_domain();
        let r = integrate(|x| m.density(x), a, b, &opts).unwrap();
        assert!((r.value - 1.0).abs() < 1e-8);
    }

    #[test]
    fn iso_density_is_product_of_scalars() {
        let iso = IsoGaussianVec::new(vec![0.5, -1.0, 2.0], 0.7).unwrap();
        let x = [0.1, 0.2, 0.3];
        let prod: f64 = x
            .iter()
            .zip(iso.mean())
            .map(|(xi, mi)| ScalarGaussian::new(*mi, 0.7).unwrap().density(*xi))
            .product();
        assert!((iso.density(&x).unwrap() - prod).abs() < 1e-15);
        assert!(iso.density(&[0.0]).is_err());
    }

    #[test]
    fn empty_sample_request() {
        assert_eq!(ScalarGaussian::standard().sample(0, 1), Err(Error::EmptySampleRequest));
    }

    #[test]
    fn sampling_is_reproducible() {
        let m = mix(&[0.3, 0.7], &[-1.0, 1.0], &[0.5, 1.5]);
        assert_eq!(m.sample(1000, 42).unwrap(), m.sample(1000, 42).unwrap());
        assert_ne!(m.sample(1000, 42).unwrap(), m.sample(1000, 43).unwrap());
    }

    #[test]
    fn gaussian_sample_moments() {
        let n = 100_000;
        let xs = ScalarGaussian::standard().sample(n, 7).unwrap();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
        assert!(mean.abs() < 4.0 / (n as f64).sqrt());
        assert!((var - 1.0).abs() < 0.05);
    }

    #[test]
    fn gaussian_sample_moments_with_independent_generator() {
        // Same moment check through a different generator family.
        let n = 100_000;
        let g = ScalarGaussian::standard();
        let mut rng = rand::rngs::SmallRng::seed_from_u64(11);
        let xs: Vec<f64> = (0..n).map(|_| g.draw(&mut rng)).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
        assert!(mean.abs() < 4.0 / (n as f64).sqrt());
        assert!((var - 1.0).abs() < 0.05);
    }

    #[test]
    fn component_frequencies_follow_weights() {
        let n = 100_000usize;
        let m = mix(&[0.3, 0.7], &[-1.0, 1.0], &[1.0, 1.0]);
        let draws = m.sample_with_components(n, 3).unwrap();
        let first = draws.iter().filter(|(k, _)| *k == 0).count() as f64;
        let sd = (n as f64 * 0.3 * 0.7).sqrt();
        assert!((first - 0.3 * n as f64).abs() < 4.0 * sd);
    }

    #[test]
    fn sample_mean_law_of_gaussian() {
        let m = mix(&[1.0], &[0.4], &[2.0]);
        let law = m.sample_mean_law(8).unwrap();
        assert_eq!(law.means(), &[0.4]);
        assert!((law.vars()[0] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn sample_mean_law_identity_at_one() {
        let m = mix(&[0.3, 0.7], &[-1.0, 2.0], &[0.5, 1.5]);
        assert_eq!(m.sample_mean_law(1).unwrap(), m);
    }

    #[test]
    fn sample_mean_law_preserves_mean_and_scales_variance() {
        let m = mix(&[0.3, 0.7], &[-1.0, 2.0], &[0.5, 1.5]);
        for n in [2usize, 3, 7, 64] {
            let law = m.sample_mean_law(n).unwrap();
            assert_eq!(law.components(), n + 1);
            assert!((law.mean() - m.mean()).abs() < 1e-12);
            assert!((law.variance() - m.variance() / n as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn sample_mean_law_rejects_three_components() {
        let m = mix(&[0.2, 0.3, 0.5], &[0.0, 1.0, 2.0], &[1.0, 1.0, 1.0]);
        assert_eq!(m.sample_mean_law(3), Err(Error::TooManyComponents));
    }

    #[test]
    fn degenerate_weight_mixture() {
        let m = mix(&[0.0, 1.0], &[5.0, 0.0], &[1.0, 2.0]);
        let law = m.sample_mean_law(4).unwrap();
        assert!(law.weights().iter().all(|w| w.is_finite()));
        assert!((law.weights()[0] - 1.0).abs() < 1e-15);
        assert!((law.mean()).abs() < 1e-15);
    }
}
