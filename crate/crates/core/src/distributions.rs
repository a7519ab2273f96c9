//! Sojourn-time and observation distributions.
//!
//! Every sojourn law is defined on `(0, ∞)`. Densities of [`SojournDistribution::Atom`]
//! are taken with respect to counting measure, so an atom evaluates to its mass (1) at
//! its support point and to 0 everywhere else. Continuous families evaluate to their
//! Lebesgue density. Callers that mix both kinds (the belief update and the
//! importance-sampling mixture) decide which convention applies at a given time via
//! [`SojournDistribution::mixed_density`].

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DistributionError {
    #[error("invalid {family} parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        family: &'static str,
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("value {0} is outside the open unit interval")]
    OutsideUnitInterval(f64),
}

/// Law of the time spent in a transition `(s, a, s')`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SojournDistribution {
    /// Wald law with mean `mean` and shape `shape`; variance `mean³ / shape`.
    InverseGaussian { mean: f64, shape: f64 },
    /// Point mass at `time`.
    Atom { time: f64 },
    /// Gaussian restricted to `(lower, ∞)`.
    TruncatedGaussian {
        mean: f64,
        std_dev: f64,
        #[serde(default)]
        lower: f64,
    },
}

fn positive(family: &'static str, name: &'static str, value: f64) -> Result<(), DistributionError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(DistributionError::InvalidParameter {
            family,
            name,
            value,
            reason: "must be finite and > 0",
        })
    }
}

impl SojournDistribution {
    pub fn inverse_gaussian(mean: f64, shape: f64) -> Result<Self, DistributionError> {
        let d = Self::InverseGaussian { mean, shape };
        d.validate()?;
        Ok(d)
    }

    pub fn atom(time: f64) -> Result<Self, DistributionError> {
        let d = Self::Atom { time };
        d.validate()?;
        Ok(d)
    }

    /// Gaussian truncated to `(0, ∞)`.
    pub fn truncated_gaussian(mean: f64, std_dev: f64) -> Result<Self, DistributionError> {
        let d = Self::TruncatedGaussian {
            mean,
            std_dev,
            lower: 0.0,
        };
        d.validate()?;
        Ok(d)
    }

    /// Checks parameter ranges. Deserialized values must pass this before use.
    pub fn validate(&self) -> Result<(), DistributionError> {
        match *self {
            Self::InverseGaussian { mean, shape } => {
                positive("inverse_gaussian", "mean", mean)?;
                positive("inverse_gaussian", "shape", shape)
            }
            Self::Atom { time } => positive("atom", "time", time),
            Self::TruncatedGaussian {
                mean,
                std_dev,
                lower,
            } => {
                if !mean.is_finite() {
                    return Err(DistributionError::InvalidParameter {
                        family: "truncated_gaussian",
                        name: "mean",
                        value: mean,
                        reason: "must be finite",
                    });
                }
                positive("truncated_gaussian", "std_dev", std_dev)?;
                if !(lower.is_finite() && lower >= 0.0) {
                    return Err(DistributionError::InvalidParameter {
                        family: "truncated_gaussian",
                        name: "lower",
                        value: lower,
                        reason: "must be finite and >= 0",
                    });
                }
                // Tail mass below ~1e-300 cannot be normalized.
                if (lower - mean) / std_dev > 37.0 {
                    return Err(DistributionError::InvalidParameter {
                        family: "truncated_gaussian",
                        name: "lower",
                        value: lower,
                        reason: "truncation leaves no representable mass",
                    });
                }
                Ok(())
            }
        }
    }

    pub fn is_atom(&self) -> bool {
        matches!(self, Self::Atom { .. })
    }

    /// Support point of an atom.
    pub fn atom_time(&self) -> Option<f64> {
        match *self {
            Self::Atom { time } => Some(time),
            _ => None,
        }
    }

    /// Density at `tau`; atoms report their mass at the support point.
    pub fn pdf(&self, tau: f64) -> f64 {
        if !(tau > 0.0) || !tau.is_finite() {
            return 0.0;
        }
        match *self {
            Self::InverseGaussian { mean, shape } => {
                let z = tau - mean;
                let exponent = -shape * z * z / (2.0 * mean * mean * tau);
                (shape / (2.0 * std::f64::consts::PI * tau * tau * tau)).sqrt() * exponent.exp()
            }
            Self::Atom { time } => {
                if tau == time {
                    1.0
                } else {
                    0.0
                }
            }
            Self::TruncatedGaussian {
                mean,
                std_dev,
                lower,
            } => {
                if tau <= lower {
                    return 0.0;
                }
                let z = (tau - mean) / std_dev;
                std_normal_pdf(z) / (std_dev * truncation_mass(mean, std_dev, lower))
            }
        }
    }

    /// Density under the mixed Lebesgue + counting convention. When `tau` is an atom
    /// point of the surrounding model, continuous families contribute nothing and atoms
    /// contribute their mass; elsewhere only continuous families contribute.
    pub fn mixed_density(&self, tau: f64, at_atom_point: bool) -> f64 {
        match self {
            Self::Atom { .. } => self.pdf(tau),
            _ if at_atom_point => 0.0,
            _ => self.pdf(tau),
        }
    }

    pub fn cdf(&self, tau: f64) -> f64 {
        if tau.is_nan() {
            return f64::NAN;
        }
        if tau == f64::INFINITY {
            return 1.0;
        }
        match *self {
            Self::InverseGaussian { mean, shape } => {
                if tau <= 0.0 {
                    return 0.0;
                }
                let r = (shape / tau).sqrt();
                let a = r * (tau / mean - 1.0);
                let b = r * (tau / mean + 1.0);
                // e^{2λ/μ} Φ(−b) rewritten as φ(a)·R(b) with R the Mills ratio.
                let tail = std_normal_pdf(a) * mills_ratio(b);
                (std_normal_cdf(a) + tail).clamp(0.0, 1.0)
            }
            Self::Atom { time } => {
                if tau < time {
                    0.0
                } else {
                    1.0
                }
            }
            Self::TruncatedGaussian {
                mean,
                std_dev,
                lower,
            } => {
                if tau <= lower {
                    return 0.0;
                }
                let upper_tail = std_normal_cdf((mean - tau) / std_dev);
                let mass = truncation_mass(mean, std_dev, lower);
                (1.0 - upper_tail / mass).clamp(0.0, 1.0)
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Self::InverseGaussian { mean, .. } => mean,
            Self::Atom { time } => time,
            Self::TruncatedGaussian {
                mean,
                std_dev,
                lower,
            } => {
                let alpha = (lower - mean) / std_dev;
                mean + std_dev * std_normal_pdf(alpha) / truncation_mass(mean, std_dev, lower)
            }
        }
    }

    /// Draws a sojourn time. Always strictly positive.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::InverseGaussian { mean, shape } => {
                // Michael, Schucany & Haas (1976): transform with one rejection step.
                let nu: f64 = StandardNormal.sample(rng);
                let k = mean * nu * nu / (2.0 * shape);
                let x = mean / (1.0 + k + (k * (2.0 + k)).sqrt());
                let u: f64 = rng.random();
                let draw = if u * (mean + x) <= mean {
                    x
                } else {
                    mean * mean / x
                };
                draw.max(f64::MIN_POSITIVE)
            }
            Self::Atom { time } => time,
            Self::TruncatedGaussian {
                mean,
                std_dev,
                lower,
            } => loop {
                let z: f64 = StandardNormal.sample(rng);
                let draw = mean + std_dev * z;
                if draw > lower {
                    break draw;
                }
            },
        }
    }

    /// `E[exp(-beta * tau)]`, the Laplace transform of the law at `beta`.
    pub fn expected_discount(&self, beta: f64) -> f64 {
        if beta == 0.0 {
            return 1.0;
        }
        match *self {
            Self::InverseGaussian { mean, shape } => {
                // (λ/μ)(1 − √(1 + 2μ²β/λ)) in a cancellation-free form.
                let x = 2.0 * mean * mean * beta / shape;
                (-2.0 * mean * beta / (1.0 + (1.0 + x).sqrt())).exp()
            }
            Self::Atom { time } => (-beta * time).exp(),
            Self::TruncatedGaussian {
                mean,
                std_dev,
                lower,
            } => {
                let shifted = mean - beta * std_dev * std_dev;
                let log_ratio = log_truncation_mass(shifted, std_dev, lower)
                    - log_truncation_mass(mean, std_dev, lower);
                (-beta * mean + 0.5 * beta * beta * std_dev * std_dev + log_ratio).exp()
            }
        }
    }
}

/// `P(X > lower)` for `X ~ N(mean, std_dev²)`.
fn truncation_mass(mean: f64, std_dev: f64, lower: f64) -> f64 {
    std_normal_cdf((mean - lower) / std_dev)
}

fn log_truncation_mass(mean: f64, std_dev: f64, lower: f64) -> f64 {
    let z = (mean - lower) / std_dev;
    if z > -5.0 {
        std_normal_cdf(z).ln()
    } else {
        // Φ(z) = φ(z)·R(−z) for z deep in the lower tail.
        -0.5 * z * z - LN_SQRT_2PI + mills_ratio(-z).ln()
    }
}

pub fn std_normal_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// Mills ratio `Φ(−x) / φ(x)` for `x ≥ 0`.
fn mills_ratio(x: f64) -> f64 {
    if x < 5.0 {
        return 0.5 * libm::erfc(x / SQRT_2) / std_normal_pdf(x);
    }
    // Continued fraction x + 1/(x + 2/(x + 3/(x + ...))), evaluated bottom-up.
    let mut tail = x;
    for k in (1..=60).rev() {
        tail = x + k as f64 / tail;
    }
    1.0 / tail
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEFFS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for `z > 0` (Lanczos, g = 7).
pub fn ln_gamma(z: f64) -> f64 {
    if z < 0.5 {
        // Reflection keeps the series in its accurate range.
        let pi = std::f64::consts::PI;
        return (pi / (pi * z).sin()).ln() - ln_gamma(1.0 - z);
    }
    let z = z - 1.0;
    let mut acc = LANCZOS_COEFFS[0];
    for (i, c) in LANCZOS_COEFFS.iter().enumerate().skip(1) {
        acc += c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    LN_SQRT_2PI + (z + 0.5) * t.ln() - t + acc.ln()
}

/// Beta density on `(0, 1)`, used for discretized observation kernels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaDensity {
    pub phi: f64,
    pub eta: f64,
}

impl BetaDensity {
    pub fn new(phi: f64, eta: f64) -> Result<Self, DistributionError> {
        positive("beta", "phi", phi)?;
        positive("beta", "eta", eta)?;
        Ok(Self { phi, eta })
    }

    pub fn ln_pdf(&self, o: f64) -> Result<f64, DistributionError> {
        if !(o > 0.0 && o < 1.0) {
            return Err(DistributionError::OutsideUnitInterval(o));
        }
        let norm = ln_gamma(self.phi + self.eta) - ln_gamma(self.phi) - ln_gamma(self.eta);
        Ok(norm + (self.phi - 1.0) * o.ln() + (self.eta - 1.0) * (-o).ln_1p())
    }

    pub fn pdf(&self, o: f64) -> Result<f64, DistributionError> {
        self.ln_pdf(o).map(f64::exp)
    }

    /// Mode of the density, when interior (both shapes > 1).
    pub fn mode(&self) -> Option<f64> {
        (self.phi > 1.0 && self.eta > 1.0).then(|| (self.phi - 1.0) / (self.phi + self.eta - 2.0))
    }
}
