//! Closed-form parametric survival distributions.
//!
//! Weibull uses shape `k` and scale `λ`: `h(t) = (k/λ)(t/λ)^(k-1)` and
//! `S(t) = exp(-(t/λ)^k)`. Survival is evaluated through its logarithm so
//! that large times underflow to exactly zero rather than to NaN.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{normal_log_pdf, normal_log_sf};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ParametricSurvival {
    Exponential {
        rate: f64,
    },
    Weibull {
        shape: f64,
        scale: f64,
    },
    /// Log-time is `Normal(mu, sigma²)`; `sigma = 0` is a point mass at `e^mu`.
    LogNormal {
        mu: f64,
        sigma: f64,
    },
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}

impl ParametricSurvival {
    pub fn exponential(rate: f64) -> Result<Self> {
        positive("rate", rate)?;
        Ok(Self::Exponential { rate })
    }

    pub fn weibull(shape: f64, scale: f64) -> Result<Self> {
        positive("shape", shape)?;
        positive("scale", scale)?;
        Ok(Self::Weibull { shape, scale })
    }

    pub fn log_normal(mu: f64, sigma: f64) -> Result<Self> {
        if !mu.is_finite() {
            return Err(Error::Domain(format!("mu must be finite, got {mu}")));
        }
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(Error::Domain(format!(
                "sigma must be nonnegative, got {sigma}"
            )));
        }
        Ok(Self::LogNormal { mu, sigma })
    }

    fn is_point_mass(&self) -> bool {
        matches!(self, Self::LogNormal { sigma, .. } if *sigma == 0.0)
    }

    /// `ln S(t)` for `t >= 0`.
    pub fn log_survival(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::Domain(format!("survival needs t >= 0, got {t}")));
        }
        if t == 0.0 {
            return Ok(0.0);
        }
        Ok(match *self {
            Self::Exponential { rate } => -rate * t,
            Self::Weibull { shape, scale } => -(t / scale).powf(shape),
            Self::LogNormal { mu, sigma: 0.0 } => {
                if t < mu.exp() {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
            Self::LogNormal { mu, sigma } => normal_log_sf((t.ln() - mu) / sigma),
        })
    }

    pub fn survival(&self, t: f64) -> Result<f64> {
        self.log_survival(t).map(f64::exp)
    }

    pub fn cdf(&self, t: f64) -> Result<f64> {
        self.log_survival(t).map(|ls| -ls.exp_m1())
    }

    pub fn log_density(&self, t: f64) -> Result<f64> {
        self.check_open(t, "density")?;
        Ok(match *self {
            Self::Exponential { rate } => rate.ln() - rate * t,
            Self::Weibull { shape, scale } => {
                let z = t / scale;
                (shape / scale).ln() + (shape - 1.0) * z.ln() - z.powf(shape)
            }
            Self::LogNormal { mu, sigma } => {
                normal_log_pdf((t.ln() - mu) / sigma) - (sigma * t).ln()
            }
        })
    }

    pub fn density(&self, t: f64) -> Result<f64> {
        self.log_density(t).map(f64::exp)
    }

    pub fn hazard(&self, t: f64) -> Result<f64> {
        self.check_open(t, "hazard")?;
        Ok(match *self {
            Self::Exponential { rate } => rate,
            Self::Weibull { shape, scale } => (shape / scale) * (t / scale).powf(shape - 1.0),
            Self::LogNormal { mu, sigma } => {
                let nu = (t.ln() - mu) / sigma;
                (normal_log_pdf(nu) - (sigma * t).ln() - normal_log_sf(nu)).exp()
            }
        })
    }

    /// Cumulative hazard `H(t) = -ln S(t)`.
    pub fn cumulative_hazard(&self, t: f64) -> Result<f64> {
        self.log_survival(t).map(|ls| -ls)
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Self::Exponential { rate } => 1.0 / rate,
            Self::Weibull { shape, scale } => scale * libm::tgamma(1.0 + 1.0 / shape),
            Self::LogNormal { mu, sigma } => (mu + 0.5 * sigma * sigma).exp(),
        }
    }

    /// Inverse-CDF draws for exponential and Weibull; exponentiated normal
    /// draws for log-normal.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::Exponential { rate } => -open_unit(rng).ln() / rate,
            Self::Weibull { shape, scale } => scale * (-open_unit(rng).ln()).powf(1.0 / shape),
            Self::LogNormal { mu, sigma } => {
                let z: f64 = StandardNormal.sample(rng);
                (mu + sigma * z).exp()
            }
        }
    }

    fn check_open(&self, t: f64, what: &str) -> Result<()> {
        if !(t > 0.0) {
            return Err(Error::Domain(format!("{what} needs t > 0, got {t}")));
        }
        if self.is_point_mass() {
            return Err(Error::Domain(format!(
                "{what} undefined for a point mass (sigma = 0)"
            )));
        }
        Ok(())
    }
}

/// Uniform draw on (0, 1].
fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    1.0 - rng.random::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};
    use approx::assert_relative_eq;

    fn families() -> Vec<ParametricSurvival> {
        vec![
            ParametricSurvival::exponential(0.7).unwrap(),
            ParametricSurvival::weibull(1.8, 2.5).unwrap(),
            ParametricSurvival::weibull(0.6, 1.2).unwrap(),
            ParametricSurvival::log_normal(0.4, 0.9).unwrap(),
        ]
    }

    #[test]
    fn hazard_examples() {
        let e = ParametricSurvival::exponential(2.0).unwrap();
        for t in [1e-6, 0.3, 17.0] {
            assert_eq!(e.hazard(t).unwrap(), 2.0);
        }
        let w = ParametricSurvival::weibull(1.0, 3.0).unwrap();
        assert_relative_eq!(w.hazard(1.0).unwrap(), 1.0 / 3.0, max_relative = 1e-15);

        // f(1)/S(1) for the standard log-normal, both evaluated from the
        // normal pdf/cdf at log t = 0: φ(0) / 0.5
        let ln = ParametricSurvival::log_normal(0.0, 1.0).unwrap();
        let oracle = (1.0 / (2.0 * std::f64::consts::PI).sqrt()) / 0.5;
        assert_relative_eq!(ln.hazard(1.0).unwrap(), oracle, max_relative = 1e-14);
    }

    #[test]
    fn survival_and_density_examples() {
        for d in families() {
            assert_eq!(d.survival(0.0).unwrap(), 1.0);
        }
        let e1 = ParametricSurvival::exponential(1.0).unwrap();
        assert_relative_eq!(
            e1.survival(1.0).unwrap(),
            (-1.0f64).exp(),
            max_relative = 1e-15
        );
        assert_relative_eq!(e1.density(1e-300).unwrap(), 1.0, max_relative = 1e-15);
        let w = ParametricSurvival::weibull(2.0, 1.0).unwrap();
        assert_relative_eq!(
            w.survival(1.0).unwrap(),
            (-1.0f64).exp(),
            max_relative = 1e-15
        );
        assert_relative_eq!(
            w.density(1.0).unwrap(),
            2.0 * (-1.0f64).exp(),
            max_relative = 1e-15
        );
        let ln = ParametricSurvival::log_normal(0.0, 1.0).unwrap();
        assert_relative_eq!(
            ln.density(1.0).unwrap(),
            0.398_942_280_401_432_7,
            max_relative = 1e-14
        );
    }

    #[test]
    fn domain_errors() {
        let e = ParametricSurvival::exponential(1.0).unwrap();
        assert!(e.hazard(0.0).is_err());
        assert!(e.density(-1.0).is_err());
        assert!(e.survival(-0.1).is_err());
        assert!(ParametricSurvival::exponential(0.0).is_err());
        assert!(ParametricSurvival::weibull(1.0, -2.0).is_err());
        assert!(ParametricSurvival::log_normal(0.0, -1.0).is_err());
        let point = ParametricSurvival::log_normal(0.0, 0.0).unwrap();
        assert!(point.hazard(1.0).is_err());
        assert_eq!(point.survival(0.5).unwrap(), 1.0);
        assert_eq!(point.survival(2.0).unwrap(), 0.0);
    }

    #[test]
    fn survival_monotone_and_vanishing() {
        for d in families() {
            let mut prev = 1.0;
            for i in 1..400 {
                let s = d.survival(i as f64 * 0.1).unwrap();
                assert!(s <= prev);
                prev = s;
            }
            assert!(d.survival(1e6).unwrap() < 1e-12);
        }
        // large-shape Weibull far in the tail: exact zero, not NaN
        let w = ParametricSurvival::weibull(50.0, 1.0).unwrap();
        assert_eq!(w.survival(100.0).unwrap(), 0.0);
    }

    #[test]
    fn survival_matches_integrated_density() {
        for d in families() {
            // trapezoid in u = ln t, where f(e^u) e^u stays bounded even when f diverges at 0
            let (u0, u1) = (1e-12f64.ln(), 3f64.ln());
            let n = 200_000;
            let h = (u1 - u0) / n as f64;
            let g = |u: f64| d.density(u.exp()).unwrap() * u.exp();
            let mut area = d.cdf(u0.exp()).unwrap();
            let mut prev = g(u0);
            for i in 1..=n {
                let f = g(u0 + i as f64 * h);
                area += 0.5 * (prev + f) * h;
                prev = f;
            }
            let s = d.survival(3.0).unwrap();
            assert!(
                (s - (1.0 - area)).abs() < 1e-4,
                "{d:?}: {s} vs {}",
                1.0 - area
            );
        }
    }

    #[test]
    fn sample_means() {
        let mut rng = stream(11, Stream::Data);
        let n = 100_000;
        let e = ParametricSurvival::exponential(1.0).unwrap();
        let m: f64 = (0..n).map(|_| e.sample(&mut rng)).sum::<f64>() / n as f64;
        assert!((m - 1.0).abs() < 0.02, "{m}");
        let w = ParametricSurvival::weibull(1.0, 2.0).unwrap();
        let m: f64 = (0..n).map(|_| w.sample(&mut rng)).sum::<f64>() / n as f64;
        assert!((m - 2.0).abs() < 0.04, "{m}");
        let p = ParametricSurvival::log_normal(0.0, 0.0).unwrap();
        assert!((0..100).all(|_| p.sample(&mut rng) == 1.0));
    }
}
