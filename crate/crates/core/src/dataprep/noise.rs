//! Gaussian diagnosis noise on input windows.

use serde::{Deserialize, Serialize};

use super::series::CellSeries;
use crate::error::{Error, Result};
use crate::numeric::SeededRng;
use crate::seqmodel::Channel;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Noise σ as a fraction of each channel's initial value.
    pub sigma_fraction: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(sigma_fraction: f64, seed: u64) -> Result<Self> {
        let spec = Self {
            sigma_fraction,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_fraction >= 0.0 && self.sigma_fraction.is_finite()) {
            return Err(Error::invalid(format!(
                "sigma_fraction must be >= 0, got {}",
                self.sigma_fraction
            )));
        }
        Ok(())
    }
}

/// Adds `sigma * N(0, 1)` to every element. A zero sigma leaves values
/// untouched and consumes no draws.
pub fn perturb(values: &mut [f64], sigma: f64, rng: &mut SeededRng) {
    if sigma == 0.0 {
        return;
    }
    for v in values {
        *v += sigma * rng.normal();
    }
}

/// Perturbs both channels of a series; σ per channel is `sigma_fraction`
/// times that channel's cycle-0 value.
pub fn add_noise(series: &CellSeries, spec: &NoiseSpec) -> CellSeries {
    let root = SeededRng::new(spec.seed);
    let mut out = series.clone();
    for ch in Channel::BOTH {
        let sigma = spec.sigma_fraction * series.channel(ch)[0];
        let mut rng = root.split(ch.as_str());
        perturb(out.channel_mut(ch), sigma, &mut rng);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat(n: usize) -> CellSeries {
        CellSeries::new("n", vec![1.85; n], vec![50.0; n]).unwrap()
    }

    #[test]
    fn zero_sigma_is_identity() {
        let s = flat(100);
        assert_eq!(add_noise(&s, &NoiseSpec::new(0.0, 3).unwrap()), s);
    }

    #[test]
    fn same_seed_reproduces() {
        let s = flat(50);
        let spec = NoiseSpec::new(0.01, 42).unwrap();
        assert_eq!(add_noise(&s, &spec), add_noise(&s, &spec));
        assert_ne!(
            add_noise(&s, &spec),
            add_noise(&s, &NoiseSpec::new(0.01, 43).unwrap())
        );
    }

    #[test]
    fn empirical_sigma_matches_one_percent() {
        let s = flat(20_000);
        let noisy = add_noise(&s, &NoiseSpec::new(0.01, 9).unwrap());
        for ch in Channel::BOTH {
            let init = s.channel(ch)[0];
            let dev: Vec<f64> = noisy.channel(ch).iter().map(|v| v - init).collect();
            let n = dev.len() as f64;
            let mean = dev.iter().sum::<f64>() / n;
            let sd = (dev.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
            assert!((sd / (0.01 * init) - 1.0).abs() < 0.1, "{ch}: sd {sd}");
            let max_rel = dev.iter().fold(0.0f64, |m, d| m.max(d.abs())) / init;
            assert!(max_rel > 0.025 && max_rel < 0.05, "{ch}: max {max_rel}");
        }
    }

    #[test]
    fn negative_sigma_rejected() {
        assert!(NoiseSpec::new(-0.01, 0).is_err());
        assert!(NoiseSpec::new(f64::NAN, 0).is_err());
    }
}
