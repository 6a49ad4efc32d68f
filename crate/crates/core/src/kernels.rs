//! Radial kernel profiles.
//!
//! The curvature estimator uses two profiles: `rho`, which regularizes the
//! first variation, and `xi`, which regularizes the mass. They are tied by
//! `n * xi(s) = -s * rho'(s)` on `(-1, 1)`; with this relation the ratio of
//! the two convolutions converges to `n / d`, which is where the `d / n`
//! prefactor of the curvature comes from.

/// A pair of profiles `(rho, xi)` supported in `[-1, 1]`.
///
/// Implementors must keep both profiles even and nonnegative, `rho`
/// nonincreasing on `[0, 1]`, and `n * xi(s) + s * rho'(s) = 0`.
pub trait KernelPair {
    fn ambient_dim(&self) -> usize;
    fn rho(&self, s: f64) -> f64;
    fn rho_prime(&self, s: f64) -> f64;
    fn xi(&self, s: f64) -> f64;
}

impl<K: KernelPair + ?Sized> KernelPair for &K {
    fn ambient_dim(&self) -> usize {
        (**self).ambient_dim()
    }
    fn rho(&self, s: f64) -> f64 {
        (**self).rho(s)
    }
    fn rho_prime(&self, s: f64) -> f64 {
        (**self).rho_prime(s)
    }
    fn xi(&self, s: f64) -> f64 {
        (**self).xi(s)
    }
}

/// Below this exponent `exp` underflows to zero and the polynomial factors
/// of the derivatives would overflow, so everything is clamped to 0.
const UNDERFLOW_EXPONENT: f64 = -708.0;

/// `rho(s) = exp(1 / (s^2 - 1))` and its companion
/// `xi(s) = (2 / n) s^2 / (s^2 - 1)^2 exp(1 / (s^2 - 1))`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExpKernel {
    ambient_dim: usize,
}

impl ExpKernel {
    pub fn new(ambient_dim: usize) -> Self {
        assert!(ambient_dim >= 1, "ambient dimension must be positive");
        Self { ambient_dim }
    }

    /// `1 / (s^2 - 1)` or `None` outside the support / after underflow.
    #[inline]
    fn exponent(s: f64) -> Option<f64> {
        let s2 = s * s;
        if !(s2 < 1.0) {
            return None;
        }
        let u = 1.0 / (s2 - 1.0);
        if u < UNDERFLOW_EXPONENT {
            None
        } else {
            Some(u)
        }
    }
}

impl KernelPair for ExpKernel {
    fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    fn rho(&self, s: f64) -> f64 {
        match Self::exponent(s) {
            Some(u) => libm::exp(u),
            None => 0.0,
        }
    }

    fn rho_prime(&self, s: f64) -> f64 {
        // d/ds exp(u(s)) with u' = -2s u^2
        match Self::exponent(s) {
            Some(u) => -2.0 * s * u * u * libm::exp(u),
            None => 0.0,
        }
    }

    fn xi(&self, s: f64) -> f64 {
        match Self::exponent(s) {
            Some(u) => 2.0 / self.ambient_dim as f64 * s * s * u * u * libm::exp(u),
            None => 0.0,
        }
    }
}

/// Max of `|n xi(s) + s rho'(s)|` over the samples; 0 for no samples.
pub fn check_pair_identity<K: KernelPair>(kernels: &K, samples: &[f64]) -> f64 {
    let n = kernels.ambient_dim() as f64;
    samples
        .iter()
        .map(|&s| libm::fabs(n * kernels.xi(s) + s * kernels.rho_prime(s)))
        .fold(0.0, f64::max)
}

/// Volume of the unit ball in `R^d`.
pub fn unit_ball_volume(d: usize) -> f64 {
    match d {
        0 => 1.0,
        1 => 2.0,
        _ => unit_ball_volume(d - 2) * 2.0 * core::f64::consts::PI / d as f64,
    }
}

/// Area of the unit sphere `S^{d-1}` in `R^d`.
pub fn unit_sphere_area(d: usize) -> f64 {
    d as f64 * unit_ball_volume(d)
}
