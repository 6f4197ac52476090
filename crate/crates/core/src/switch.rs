//! Single-photon controlled atomic phase switch.
//!
//! The atom starts in `(|u⟩ + |c⟩)/√2`. A weak coherent gate pulse `|α⟩`
//! reflects off the cavity and leaves the atom entangled with three output
//! modes (waveguide, cavity loss, atomic emission), whose amplitudes are the
//! linear scattering amplitudes times `α`.

use nalgebra::Matrix2;
use num_complex::Complex64;

use crate::error::{ensure_finite, Error, Result};
use crate::linres::{scattering_amplitudes, ScatteringAmplitudes};
use crate::params::SystemParams;
use crate::trace::TraceSeries;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Coherent amplitudes of the three output modes for each atomic branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchOutput {
    pub alpha: Complex64,
    pub u: [Complex64; 3],
    pub c: [Complex64; 3],
}

impl BranchOutput {
    pub fn new(amps: &ScatteringAmplitudes, alpha: Complex64) -> Self {
        BranchOutput {
            alpha,
            u: amps.branch(false).map(|x| x * alpha),
            c: amps.branch(true).map(|x| x * alpha),
        }
    }
}

/// Overlap `⟨ψ_c|ψ_u⟩` of the two photonic branch states.
pub fn coherent_overlap(b: &BranchOutput) -> Complex64 {
    b.u.iter()
        .zip(&b.c)
        .map(|(a, c)| (-0.5 * a.norm_sqr() - 0.5 * c.norm_sqr() + c.conj() * a).exp())
        .product()
}

/// Atomic density matrix in the `{u, c}` basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtomDensityMatrix(pub Matrix2<Complex64>);

impl AtomDensityMatrix {
    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    /// `ρ_uc`.
    pub fn coherence(&self) -> Complex64 {
        self.0[(0, 1)]
    }

    pub fn is_physical(&self, tol: f64) -> bool {
        let m = &self.0;
        let herm = (m - m.adjoint()).iter().all(|z| z.norm() < tol);
        let (a, d) = (m[(0, 0)].re, m[(1, 1)].re);
        let det = a * d - m[(0, 1)].norm_sqr();
        herm && (self.trace() - 1.0).abs() < tol && a >= -tol && d >= -tol && det >= -tol
    }

    /// `⟨±|ρ|±⟩` with `|±⟩ = (|u⟩ ± |c⟩)/√2`.
    pub fn overlap_plus(&self) -> f64 {
        0.5 + self.coherence().re
    }

    pub fn overlap_minus(&self) -> f64 {
        0.5 - self.coherence().re
    }
}

/// Unconditional and photon-conditioned atomic states after the gate pulse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwitchDensities {
    pub uncond: AtomDensityMatrix,
    pub cond: AtomDensityMatrix,
    pub overlap: Complex64,
    pub amplitudes: ScatteringAmplitudes,
}

pub fn densities_from_amplitudes(amps: &ScatteringAmplitudes, alpha: Complex64) -> Result<SwitchDensities> {
    ensure_finite("alpha", alpha.re)?;
    ensure_finite("alpha", alpha.im)?;
    let d = coherent_overlap(&BranchOutput::new(amps, alpha));
    let half = Complex64::new(0.5, 0.0);
    let uncond = Matrix2::new(half, half * d, half * d.conj(), half);
    let (ru, rc) = (amps.r_u, amps.r_c);
    let total = ru.norm_sqr() + rc.norm_sqr();
    if total <= 1e-300 {
        return Err(Error::Conditioning(
            "no reflected light in either branch".into(),
        ));
    }
    let off = d * rc.conj() * ru / total;
    let cond = Matrix2::new(
        Complex64::new(ru.norm_sqr() / total, 0.0),
        off,
        off.conj(),
        Complex64::new(rc.norm_sqr() / total, 0.0),
    );
    Ok(SwitchDensities {
        uncond: AtomDensityMatrix(uncond),
        cond: AtomDensityMatrix(cond),
        overlap: d,
        amplitudes: *amps,
    })
}

/// Reduced atomic states without conditioning and conditioned on at least
/// one reflected gate photon.
pub fn switch_densities(p: &SystemParams, alpha: Complex64) -> Result<SwitchDensities> {
    densities_from_amplitudes(&scattering_amplitudes(p)?, alpha)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwitchFidelities {
    /// `⟨+|ρ_uncond|+⟩`: the atom is left undisturbed.
    pub p_uncond: f64,
    /// `⟨−|ρ_cond|−⟩`: the atom has been flipped to the orthogonal state.
    pub p_cond: f64,
    pub overlap: Complex64,
}

pub fn fidelities(p: &SystemParams, alpha: Complex64) -> Result<SwitchFidelities> {
    let s = switch_densities(p, alpha)?;
    Ok(SwitchFidelities {
        p_uncond: s.uncond.overlap_plus(),
        p_cond: s.cond.overlap_minus(),
        overlap: s.overlap,
    })
}

/// Balanced-switch fidelity `½(1 + e^{−(1+r²)|α|²})`.
pub fn balanced_fidelity(r: f64, alpha2: f64) -> f64 {
    0.5 * (1.0 + (-(1.0 + r * r) * alpha2).exp())
}

/// Microwave π/2 rotation with phase `θ`.
pub fn ramsey_rotation(theta: f64) -> Matrix2<Complex64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let e = Complex64::from_polar(s, theta);
    Matrix2::new(Complex64::new(s, 0.0), -e, e.conj(), Complex64::new(s, 0.0))
}

/// Probability of finding the atom in `|c⟩` after the analysis rotation.
pub fn p_on(rho: &AtomDensityMatrix, theta: f64) -> f64 {
    let r = ramsey_rotation(theta);
    (r * rho.0 * r.adjoint())[(1, 1)].re
}

/// Ramsey fringe `P_on(θ)`. `alpha = 0` gives the no-gate reference.
pub fn ramsey_fringe(
    p: &SystemParams,
    alpha: Complex64,
    thetas: &[f64],
    conditioned: bool,
) -> Result<TraceSeries> {
    let s = switch_densities(p, alpha)?;
    let rho = if conditioned { s.cond } else { s.uncond };
    let tag = if conditioned { "conditioned" } else { "unconditioned" };
    let y = thetas.iter().map(|&t| p_on(&rho, t)).collect();
    Ok(TraceSeries::new("theta", "rad", "p_on", "", "fringe", tag).with_data(thetas.to_vec(), y))
}

/// Phase of the fringe relative to the no-gate fringe, in `[0, 2π)`.
pub fn fringe_shift(p: &SystemParams, alpha: Complex64, conditioned: bool) -> Result<f64> {
    let s = switch_densities(p, alpha)?;
    let rho = if conditioned { s.cond } else { s.uncond };
    Ok(rho.coherence().arg().rem_euclid(std::f64::consts::TAU))
}

/// Fringe visibility `2|ρ_uc|`.
pub fn fringe_visibility(rho: &AtomDensityMatrix) -> f64 {
    2.0 * rho.coherence().norm()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuccessProbability {
    pub probability: f64,
    /// Gate error `|P^cond − 1|`.
    pub epsilon: f64,
    pub r: f64,
    /// `|r_u| = |r_c|`, the case the scaling law is derived for.
    pub balanced: bool,
}

/// `P = 2 ε η_c r² / (1 + r²)`.
pub fn success_probability_formula(epsilon: f64, eta_c: f64, r: f64) -> f64 {
    2.0 * epsilon * eta_c * r * r / (1.0 + r * r)
}

pub fn switch_success_probability(p: &SystemParams, alpha: Complex64, eta_c: f64) -> Result<SuccessProbability> {
    ensure_finite("eta_c", eta_c)?;
    if !(0.0..=1.0).contains(&eta_c) {
        return Err(Error::InvalidParameter {
            name: "eta_c",
            reason: format!("must lie in [0, 1], got {eta_c}"),
        });
    }
    let s = switch_densities(p, alpha)?;
    let (ru, rc) = (s.amplitudes.r_u.norm(), s.amplitudes.r_c.norm());
    let r = 0.5 * (ru + rc);
    let epsilon = (s.cond.overlap_minus() - 1.0).abs();
    Ok(SuccessProbability {
        probability: success_probability_formula(epsilon, eta_c, r),
        epsilon,
        r,
        balanced: (ru - rc).abs() <= 1e-6 * r.max(1e-300),
    })
}

/// Poisson fluorescence readout of the atomic state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReadoutModel {
    pub lambda_on: f64,
    pub lambda_off: f64,
    /// Events with more than `threshold` photons count as "on".
    pub threshold: u32,
}

impl ReadoutModel {
    pub fn new(lambda_on: f64, lambda_off: f64, threshold: u32) -> Result<Self> {
        ensure_finite("lambda_on", lambda_on)?;
        ensure_finite("lambda_off", lambda_off)?;
        if !(lambda_on > lambda_off && lambda_off >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "lambda",
                reason: format!("need lambda_on > lambda_off >= 0, got {lambda_on}, {lambda_off}"),
            });
        }
        if threshold < 1 {
            return Err(Error::InvalidParameter {
                name: "threshold",
                reason: "must be >= 1".into(),
            });
        }
        Ok(ReadoutModel {
            lambda_on,
            lambda_off,
            threshold,
        })
    }

    /// 6.2 and 0.2 mean detected photons, "on" for more than one photon.
    pub fn measured() -> Self {
        ReadoutModel {
            lambda_on: 6.2,
            lambda_off: 0.2,
            threshold: 1,
        }
    }
}

fn poisson_ln_pmf(n: u64, lambda: f64) -> f64 {
    if lambda == 0.0 {
        return if n == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    let ln_fact: f64 = (2..=n).map(|k| (k as f64).ln()).sum();
    n as f64 * lambda.ln() - lambda - ln_fact
}

fn poisson_cdf(n: u64, lambda: f64) -> f64 {
    (0..=n).map(|k| poisson_ln_pmf(k, lambda).exp()).sum::<f64>().min(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReadoutFidelity {
    pub f_on: f64,
    pub f_off: f64,
    pub f_avg: f64,
}

pub fn readout_fidelity(m: &ReadoutModel) -> ReadoutFidelity {
    let t = m.threshold as u64;
    let f_on = 1.0 - poisson_cdf(t, m.lambda_on);
    let f_off = poisson_cdf(t, m.lambda_off);
    ReadoutFidelity {
        f_on,
        f_off,
        f_avg: 0.5 * (f_on + f_off),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AtomPosterior {
    /// Per-measurement probability that the atom was present.
    pub p_individual: Vec<f64>,
    /// Probability that the atom was still present at measurement `i`,
    /// assuming it is lost once and for all.
    pub p_changepoint: Vec<f64>,
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Posterior atom presence for a sequence of readout counts. Hypothesis `s`
/// (0 ≤ s ≤ N) says the atom was present for the first `s` measurements;
/// all `N + 1` hypotheses are equally likely a priori.
pub fn atom_presence_posterior(counts: &[u64], m: &ReadoutModel) -> AtomPosterior {
    let on: Vec<f64> = counts.iter().map(|&c| poisson_ln_pmf(c, m.lambda_on)).collect();
    let off: Vec<f64> = counts.iter().map(|&c| poisson_ln_pmf(c, m.lambda_off)).collect();
    let p_individual = on
        .iter()
        .zip(&off)
        .map(|(a, b)| 1.0 / (1.0 + (b - a).exp()))
        .collect();
    let n = counts.len();
    // log L(s) = Σ_{i<s} on_i + Σ_{i≥s} off_i
    let mut log_l = Vec::with_capacity(n + 1);
    let mut acc: f64 = off.iter().sum();
    log_l.push(acc);
    for i in 0..n {
        acc += on[i] - off[i];
        if off[i] == f64::NEG_INFINITY {
            acc = on[..=i].iter().sum::<f64>() + off[i + 1..].iter().sum::<f64>();
        }
        log_l.push(acc);
    }
    let z = log_sum_exp(&log_l);
    let post: Vec<f64> = log_l.iter().map(|l| (l - z).exp()).collect();
    // P(s > i) as a tail sum, accumulated from the end.
    let mut p_changepoint = vec![0.0; n];
    let mut tail = 0.0;
    for i in (0..n).rev() {
        tail += post[i + 1];
        p_changepoint[i] = tail.min(1.0);
    }
    AtomPosterior {
        p_individual,
        p_changepoint,
    }
}

/// CSV with columns `index,counts,p_individual,p_changepoint`.
pub fn posterior_csv<W: std::io::Write>(counts: &[u64], post: &AtomPosterior, mut out: W) -> Result<()> {
    writeln!(out, "index,counts,p_individual,p_changepoint")?;
    for (i, c) in counts.iter().enumerate() {
        writeln!(out, "{},{},{},{}", i, c, post.p_individual[i], post.p_changepoint[i])?;
    }
    Ok(())
}

/// Branch amplitudes for which the closed-form balanced switch holds:
/// `r_u = −r_c = −r`, lossless cavity in `u`, all loss through the atom in `c`.
pub fn balanced_amplitudes(r: f64) -> ScatteringAmplitudes {
    let rest = Complex64::new((1.0 - r * r).max(0.0).sqrt(), 0.0);
    ScatteringAmplitudes {
        r_u: Complex64::new(-r, 0.0),
        r_c: Complex64::new(r, 0.0),
        t_u: rest,
        t_c: ZERO,
        l_u: ZERO,
        l_c: rest,
    }
}
