//! Synthetic measurement data drawn from the model.

use anyhow::Result;
use qswitch::linres::SpectrumModel;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Evenly spaced grid including both ends.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

pub fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    linspace(lo.ln(), hi.ln(), n).into_iter().map(f64::exp).collect()
}

pub struct Spectrum {
    pub nu: Vec<f64>,
    pub sum: Vec<f64>,
    pub diff: Vec<f64>,
    /// Noise level, if known.
    pub sigma: Option<f64>,
}

/// Sum and difference spectra with additive Gaussian noise of standard
/// deviation `noise` times the global amplitude.
pub fn spectrum(model: &SpectrumModel, nu: Vec<f64>, noise: f64, rng: &mut ChaCha8Rng) -> Result<Spectrum> {
    let sigma = noise * model.global_amplitude.abs();
    let dist = Normal::new(0.0, sigma)?;
    let (mut sum, mut diff) = (Vec::with_capacity(nu.len()), Vec::with_capacity(nu.len()));
    for &v in &nu {
        let (s, d) = model.evaluate(v);
        sum.push(s + dist.sample(rng));
        diff.push(d + dist.sample(rng));
    }
    Ok(Spectrum {
        nu,
        sum,
        diff,
        sigma: Some(sigma).filter(|s| *s > 0.0),
    })
}

pub struct Decay {
    pub t_ns: Vec<f64>,
    pub counts: Vec<f64>,
}

/// Photon-counting histogram of a single-exponential decay: `total` counts
/// in the decay plus a flat `background` per bin.
pub fn decay(tau_ns: f64, total: f64, background: f64, bin_ns: f64, n_bins: usize, rng: &mut ChaCha8Rng) -> Result<Decay> {
    let amp = total * bin_ns / tau_ns;
    let t_ns: Vec<f64> = (0..n_bins).map(|i| i as f64 * bin_ns).collect();
    let mut counts = Vec::with_capacity(n_bins);
    for &t in &t_ns {
        let mean = amp * (-t / tau_ns).exp() + background;
        counts.push(if mean > 0.0 { Poisson::new(mean)?.sample(rng) } else { 0.0 });
    }
    Ok(Decay { t_ns, counts })
}
