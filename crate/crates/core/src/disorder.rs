//! Averaging over a Gaussian spread of atomic detunings.
//!
//! The detuning is assumed to fluctuate fast compared with the photon
//! accumulation window, so singles rates average with weight `I(δ)` and
//! coincidence rates with weight `I(δ)² g²(δ, τ)`.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{ensure_finite, Error, Result};
use crate::lindblad::{g2, g2_ports, G2Result, HilbertConfig, Port};
use crate::params::{InterferometerConfig, SystemParams};
use crate::saturation::{port_intensities_general, DriveField};
use crate::trace::TraceSeries;

pub const DEFAULT_NODES: usize = 151;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetuningDistribution {
    /// Standard deviation in rad/μs.
    pub sigma_delta: f64,
    pub n_nodes: usize,
}

impl DetuningDistribution {
    pub fn new(sigma_delta: f64, n_nodes: usize) -> Result<Self> {
        ensure_finite("sigma_delta", sigma_delta)?;
        if sigma_delta < 0.0 {
            return Err(Error::InvalidParameter {
                name: "sigma_delta",
                reason: format!("must be >= 0, got {sigma_delta}"),
            });
        }
        if n_nodes < 3 || n_nodes.is_multiple_of(2) {
            return Err(Error::InvalidParameter {
                name: "n_nodes",
                reason: format!("must be odd and >= 3, got {n_nodes}"),
            });
        }
        Ok(DetuningDistribution {
            sigma_delta,
            n_nodes,
        })
    }

    pub fn with_default_nodes(sigma_delta: f64) -> Result<Self> {
        Self::new(sigma_delta, DEFAULT_NODES)
    }

    /// Detunings and normalized weights. A zero width collapses to a single
    /// node at zero.
    pub fn nodes(&self) -> Vec<(f64, f64)> {
        if self.sigma_delta == 0.0 {
            return vec![(0.0, 1.0)];
        }
        let scale = std::f64::consts::SQRT_2 * self.sigma_delta;
        gauss_hermite(self.n_nodes)
            .into_iter()
            .map(|(x, w)| (scale * x, w))
            .collect()
    }
}

/// Gauss–Hermite nodes for the weight `e^{−x²}` with weights normalized to
/// sum to one, by Golub–Welsch. Nodes are ascending.
pub fn gauss_hermite(n: usize) -> Vec<(f64, f64)> {
    let jacobi = DMatrix::from_fn(n, n, |i, j| {
        if i + 1 == j || j + 1 == i {
            (i.max(j) as f64 / 2.0).sqrt()
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(jacobi);
    let mut out: Vec<(f64, f64)> = (0..n)
        .map(|i| (eig.eigenvalues[i], eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    // The spectrum is symmetric; enforce it exactly.
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let x = 0.5 * (out[j].0 - out[i].0);
        let w = 0.5 * (out[i].1 + out[j].1);
        out[i] = (-x, w);
        out[j] = (x, w);
    }
    if n % 2 == 1 {
        out[n / 2].0 = 0.0;
    }
    let total: f64 = out.iter().map(|(_, w)| w).sum();
    out.iter_mut().for_each(|(_, w)| *w /= total);
    out
}

/// `⟨f(δ)⟩` over the distribution.
pub fn average_intensity<F>(f: F, dist: &DetuningDistribution) -> Result<f64>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    let terms: Vec<f64> = dist
        .nodes()
        .par_iter()
        .map(|&(d, w)| {
            let v = f(d)?;
            ensure_finite("intensity", v)?;
            Ok(w * v)
        })
        .collect::<Result<_>>()?;
    Ok(terms.iter().sum())
}

#[derive(Debug, Clone, PartialEq)]
pub struct AveragedG2 {
    pub trace: TraceSeries,
    /// `⟨I⟩` over the distribution.
    pub mean_intensity: f64,
    /// `⟨I⟩` was below the dark threshold and the normalization is unreliable.
    pub dark: bool,
}

/// `⟨I² g²(τ)⟩ / ⟨I⟩²` from a function returning `(I(δ), g²(δ, τ))`.
pub fn average_g2_joint<F>(f: F, dist: &DetuningDistribution) -> Result<AveragedG2>
where
    F: Fn(f64) -> Result<(f64, TraceSeries)> + Sync,
{
    let nodes = dist.nodes();
    let evals: Vec<(f64, f64, TraceSeries)> = nodes
        .par_iter()
        .map(|&(d, w)| f(d).map(|(i, t)| (w, i, t)))
        .collect::<Result<_>>()?;
    combine_g2(&evals)
}

fn combine_g2(evals: &[(f64, f64, TraceSeries)]) -> Result<AveragedG2> {
    let first = &evals[0].2;
    if evals.iter().any(|(_, _, t)| t.x != first.x) {
        return Err(Error::Data("g2 traces at different detunings use different delays".into()));
    }
    let mut num = vec![0.0; first.len()];
    let mut mean = 0.0;
    for (w, i, t) in evals {
        mean += w * i;
        for (acc, g) in num.iter_mut().zip(&t.y) {
            *acc += w * i * i * g;
        }
    }
    let y = num.iter().map(|n| n / (mean * mean)).collect();
    let mut trace = first.clone();
    trace.y = y;
    Ok(AveragedG2 {
        trace,
        mean_intensity: mean,
        dark: mean < crate::lindblad::DARK_INTENSITY,
    })
}

/// Same as [`average_g2_joint`] with intensity and `g²` from separate
/// functions.
pub fn average_g2<G, F>(g2_fn: G, i_fn: F, dist: &DetuningDistribution) -> Result<AveragedG2>
where
    G: Fn(f64) -> Result<TraceSeries> + Sync,
    F: Fn(f64) -> Result<f64> + Sync,
{
    average_g2_joint(|d| Ok((i_fn(d)?, g2_fn(d)?)), dist)
}

fn shifted(p: &SystemParams, delta: f64) -> Result<SystemParams> {
    p.with_detunings(p.delta_a + delta, p.delta_c)
}

/// Master-equation `g²(τ)` at a port, averaged over atomic detuning.
pub fn averaged_port_g2(
    p: &SystemParams,
    cfg: &InterferometerConfig,
    drive: DriveField,
    h: HilbertConfig,
    port: Port,
    taus: &[f64],
    dist: &DetuningDistribution,
) -> Result<AveragedG2> {
    average_g2_joint(
        |d| {
            let r = g2(&shifted(p, d)?, cfg, drive, h, port, taus)?;
            Ok((r.intensity, r.trace))
        },
        dist,
    )
}

/// [`averaged_port_g2`] for several ports at once; each node's steady
/// state and propagators are shared between ports.
pub fn averaged_ports_g2(
    p: &SystemParams,
    cfg: &InterferometerConfig,
    drive: DriveField,
    h: HilbertConfig,
    ports: &[Port],
    taus: &[f64],
    dist: &DetuningDistribution,
) -> Result<Vec<AveragedG2>> {
    let nodes = dist.nodes();
    let evals: Vec<Vec<G2Result>> = nodes
        .par_iter()
        .map(|&(d, _)| g2_ports(&shifted(p, d)?, cfg, drive, h, ports, taus))
        .collect::<Result<_>>()?;
    (0..ports.len())
        .map(|j| {
            let per_node: Vec<_> = nodes
                .iter()
                .zip(&evals)
                .map(|(&(_, w), r)| (w, r[j].intensity, r[j].trace.clone()))
                .collect();
            combine_g2(&per_node)
        })
        .collect()
}

/// Adiabatic detector fluxes `(I1, I2)` averaged over atomic detuning.
pub fn averaged_port_intensities(
    p: &SystemParams,
    cfg: &InterferometerConfig,
    drive: &DriveField,
    dist: &DetuningDistribution,
) -> Result<(f64, f64)> {
    let nodes = dist.nodes();
    let vals: Vec<(f64, f64)> = nodes
        .par_iter()
        .map(|&(d, w)| {
            let out = port_intensities_general(&shifted(p, d)?, cfg, drive)?;
            Ok((w * out.i1, w * out.i2))
        })
        .collect::<Result<_>>()?;
    Ok(vals
        .iter()
        .fold((0.0, 0.0), |acc, v| (acc.0 + v.0, acc.1 + v.1)))
}
