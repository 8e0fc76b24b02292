//! Beta-distribution arithmetic behind every selection decision.
//!
//! A [`BetaParams`] is a belief over a success probability. The search keeps
//! one per node (its own outcomes) and one per clade (the depth-attenuated
//! aggregate), and the policy turns clade beliefs into samples through
//! [`BetaParams::stabilize`], [`BetaParams::temper`] and [`BetaParams::sample`].

use core::fmt;

use rand_distr::{Distribution, Gamma};

use crate::rng::Rng;

/// Upper bound on `alpha + beta` after tempering.
pub const TEMPER_MASS_CAP: f64 = 1e7;

/// Samples are clamped to `[SAMPLE_EPS, 1 - SAMPLE_EPS]`.
pub const SAMPLE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum BeliefError {
    #[error("invalid Beta parameters ({alpha}, {beta}): both must be finite and > 0")]
    InvalidParams { alpha: f64, beta: f64 },
    #[error("theta = {0} is outside the open interval (0, 1)")]
    ThetaOutOfDomain(f64),
    #[error("temperature factor {0} must be finite and >= 1")]
    InvalidTau(f64),
    #[error("progress {0} must lie in [0, 1)")]
    InvalidProgress(f64),
    #[error("annealing rate {0} must be finite and > 0")]
    InvalidOmega(f64),
}

#[derive(Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BetaParams {
    alpha: f64,
    beta: f64,
}

impl fmt::Debug for BetaParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Beta({}, {})", self.alpha, self.beta)
    }
}

impl BetaParams {
    pub const UNIFORM: BetaParams = BetaParams { alpha: 1.0, beta: 1.0 };

    pub fn new(alpha: f64, beta: f64) -> Result<Self, BeliefError> {
        if alpha.is_finite() && beta.is_finite() && alpha > 0.0 && beta > 0.0 {
            Ok(Self { alpha, beta })
        } else {
            Err(BeliefError::InvalidParams { alpha, beta })
        }
    }

    #[inline]
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    #[inline]
    pub fn beta(&self) -> f64 {
        self.beta
    }

    #[inline]
    pub fn total(&self) -> f64 {
        self.alpha + self.beta
    }

    /// Adds fractional evidence. `weight * outcome` goes to alpha and
    /// `weight * (1 - outcome)` to beta; both are nonnegative for valid input.
    pub(crate) fn absorb(&mut self, outcome: f64, weight: f64) {
        self.alpha += weight * outcome;
        self.beta += weight * (1.0 - outcome);
    }

    pub fn mean(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }

    pub fn variance(&self) -> f64 {
        let s = self.alpha + self.beta;
        self.alpha * self.beta / (s * s * (s + 1.0))
    }

    /// Log-density at `theta`.
    pub fn log_pdf(&self, theta: f64) -> Result<f64, BeliefError> {
        if !(theta > 0.0 && theta < 1.0) {
            return Err(BeliefError::ThetaOutOfDomain(theta));
        }
        Ok((self.alpha - 1.0) * libm::log(theta) + (self.beta - 1.0) * libm::log1p(-theta)
            - ln_beta(self.alpha, self.beta))
    }

    /// One variate as `X / (X + Y)` with `X ~ Gamma(alpha)`, `Y ~ Gamma(beta)`.
    ///
    /// The Gamma draws use Marsaglia–Tsang rejection, boosted by a `U^(1/a)`
    /// factor for shapes below one.
    pub fn sample(&self, rng: &mut Rng) -> f64 {
        // Shapes are validated on construction, so Gamma::new cannot fail.
        let x = Gamma::new(self.alpha, 1.0).expect("valid shape").sample(rng.inner());
        let y = Gamma::new(self.beta, 1.0).expect("valid shape").sample(rng.inner());
        let s = x + y;
        let v = if s > 0.0 && s.is_finite() {
            x / s
        } else {
            // Both draws underflowed (tiny shapes): fall back to the mean.
            self.mean()
        };
        v.clamp(SAMPLE_EPS, 1.0 - SAMPLE_EPS)
    }

    /// Prior stabilization: adds `n_pseudo` pseudo-observations split by `mean`.
    pub fn stabilize(&self, mean: f64, n_pseudo: f64) -> BetaParams {
        debug_assert!((0.0..=1.0).contains(&mean), "stabilization mean {mean}");
        debug_assert!(n_pseudo >= 0.0);
        let m = mean.clamp(0.0, 1.0);
        let n = n_pseudo.max(0.0);
        BetaParams {
            alpha: self.alpha + n * m,
            beta: self.beta + n * (1.0 - m),
        }
    }

    /// Scales both parameters by `tau`. The mean is unchanged.
    ///
    /// The tempered mass `alpha + beta` is capped at
    /// `max(TEMPER_MASS_CAP, alpha + beta)` with the alpha:beta ratio kept.
    pub fn temper(&self, tau: f64) -> Result<BetaParams, BeliefError> {
        if !(tau >= 1.0) {
            return Err(BeliefError::InvalidTau(tau));
        }
        let total = self.total();
        let cap = TEMPER_MASS_CAP.max(total);
        let scale = if total * tau > cap { cap / total } else { tau };
        Ok(BetaParams {
            alpha: self.alpha * scale,
            beta: self.beta * scale,
        })
    }
}

impl Default for BetaParams {
    fn default() -> Self {
        Self::UNIFORM
    }
}

/// `ln B(a, b)`.
pub fn ln_beta(a: f64, b: f64) -> f64 {
    libm::lgamma(a) + libm::lgamma(b) - libm::lgamma(a + b)
}

/// Budget-aware annealing factor `(1 / (1 - progress))^omega`.
pub fn temperature(progress: f64, omega: f64) -> Result<f64, BeliefError> {
    if !(0.0..1.0).contains(&progress) {
        return Err(BeliefError::InvalidProgress(progress));
    }
    if !(omega > 0.0) || !omega.is_finite() {
        return Err(BeliefError::InvalidOmega(omega));
    }
    Ok(libm::pow(1.0 / (1.0 - progress), omega))
}
