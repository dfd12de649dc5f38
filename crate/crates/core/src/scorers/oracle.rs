//! The oracle likelihood-ratio score under known densities.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

use super::ScoreFunction;

/// A fully specified density on `R^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum KnownDensity {
    /// `N(mean, sd² I)`.
    Gaussian { mean: Vec<f64>, sd: f64 },
    /// Independent coordinates, coordinate `j` distributed `Beta(a_j, b_j)`.
    BetaProduct { shapes: Vec<[f64; 2]> },
}

impl KnownDensity {
    pub fn dim(&self) -> usize {
        match self {
            KnownDensity::Gaussian { mean, .. } => mean.len(),
            KnownDensity::BetaProduct { shapes } => shapes.len(),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            KnownDensity::Gaussian { mean, sd } => {
                if mean.is_empty() || !(*sd > 0.0) {
                    return Err(Error::invalid("gaussian density needs a nonempty mean and sd > 0"));
                }
            }
            KnownDensity::BetaProduct { shapes } => {
                if shapes.is_empty() || shapes.iter().any(|[a, b]| !(*a > 0.0 && *b > 0.0)) {
                    return Err(Error::invalid("beta shapes must be positive"));
                }
            }
        }
        Ok(())
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        match self {
            KnownDensity::Gaussian { mean, sd } => {
                let d = mean.len() as f64;
                let q: f64 = x.iter().zip(mean).map(|(v, m)| ((v - m) / sd).powi(2)).sum();
                -0.5 * q - d * sd.ln() - 0.5 * d * (2.0 * std::f64::consts::PI).ln()
            }
            KnownDensity::BetaProduct { shapes } => x
                .iter()
                .zip(shapes)
                .map(|(&v, &[a, b])| {
                    if !(0.0..=1.0).contains(&v) {
                        return f64::NEG_INFINITY;
                    }
                    let term = |shape: f64, u: f64| if shape == 1.0 { 0.0 } else { (shape - 1.0) * u.ln() };
                    term(a, v) + term(b, 1.0 - v) - (ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b))
                })
                .sum(),
        }
    }
}

/// `r(x) = π1 f1(x) / (π0 f0(x) + π1 f1(x))`.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleScore {
    null: KnownDensity,
    alternative: KnownDensity,
    pi1: f64,
}

pub fn oracle_score(null: KnownDensity, alternative: KnownDensity, pi1: f64) -> Result<OracleScore> {
    null.validate()?;
    alternative.validate()?;
    if null.dim() != alternative.dim() {
        return Err(Error::invalid("null and alternative densities differ in dimension"));
    }
    if !(0.0..=1.0).contains(&pi1) {
        return Err(Error::invalid(format!("π1 = {pi1} must lie in [0, 1]")));
    }
    Ok(OracleScore { null, alternative, pi1 })
}

impl OracleScore {
    pub fn ratio(&self, x: &[f64]) -> Result<f64> {
        if self.pi1 == 0.0 {
            return Ok(0.0);
        }
        let l1 = self.pi1.ln() + self.alternative.log_density(x);
        let l0 = if self.pi1 == 1.0 {
            f64::NEG_INFINITY
        } else {
            (1.0 - self.pi1).ln() + self.null.log_density(x)
        };
        match (l0 == f64::NEG_INFINITY, l1 == f64::NEG_INFINITY) {
            (true, true) => Err(Error::Evaluation(format!("mixture density is zero at {x:?}"))),
            (true, false) => Ok(1.0),
            (false, true) => Ok(0.0),
            (false, false) => Ok(1.0 / (1.0 + (l0 - l1).exp())),
        }
    }
}

impl ScoreFunction for OracleScore {
    /// NaN where the mixture density vanishes.
    fn score(&self, x: &[f64]) -> f64 {
        self.ratio(x).unwrap_or(f64::NAN)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gauss(mean: f64) -> KnownDensity {
        KnownDensity::Gaussian { mean: vec![mean], sd: 1.0 }
    }

    #[test]
    fn equal_densities_give_pi1() {
        let r = oracle_score(gauss(0.0), gauss(0.0), 0.1).unwrap();
        assert!((r.ratio(&[0.3]).unwrap() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn zero_pi1_is_zero() {
        let r = oracle_score(gauss(0.0), gauss(3.0), 0.0).unwrap();
        assert_eq!(r.ratio(&[5.0]).unwrap(), 0.0);
    }

    #[test]
    fn midpoint_symmetry() {
        // N(0,1) and N(2,1) agree at x = 1
        let r = oracle_score(gauss(0.0), gauss(2.0), 0.5).unwrap();
        assert!((r.ratio(&[1.0]).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_mixture_density_is_an_error() {
        let b = |a, b| KnownDensity::BetaProduct { shapes: vec![[a, b]] };
        let r = oracle_score(b(2.0, 2.0), b(1.0, 3.0), 0.5).unwrap();
        assert!(r.ratio(&[1.5]).is_err());
        assert!(r.score(&[1.5]).is_nan());
        // Beta(1,1) is uniform
        assert!((b(1.0, 1.0).log_density(&[0.3])).abs() < 1e-12);
    }
}
