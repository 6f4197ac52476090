//! Weak-drive response of the atom–cavity system and the polarization
//! interferometer around it.
//!
//! In the linear regime the atom stays in its ground state, so every output
//! field is a fixed complex multiple of the input. The cavity reflects with
//! `r_u` when the atom is absent (or in the uncoupled hyperfine state) and
//! with `r_c` when a coupled atom is present.

use num_complex::Complex64;

use crate::error::{ensure_finite, Error, Result};
use crate::params::{derive_rates, units, InterferometerConfig, SystemParams};
use crate::trace::TraceSeries;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Reflection of a lossless one-sided cavity on resonance with the laser,
/// with an atom of cooperativity `eta` detuned by `delta` (figure
/// convention, `δ = −Δ_a`).
pub fn reflection_lossless(eta: f64, delta: f64, gamma: f64) -> Result<Complex64> {
    ensure_finite("eta", eta)?;
    ensure_finite("delta", delta)?;
    ensure_finite("gamma", gamma)?;
    if gamma <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "gamma",
            reason: format!("must be > 0, got {gamma}"),
        });
    }
    let num = Complex64::new((eta - 1.0) * gamma, 2.0 * delta);
    let den = Complex64::new((eta + 1.0) * gamma, -2.0 * delta);
    Ok(num / den)
}

/// Linear scattering amplitudes from the driven waveguide mode into the
/// waveguide (`r`), the cavity loss channel (`t`) and atomic spontaneous
/// emission (`l`), for the uncoupled (`u`) and coupled (`c`) atomic states.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatteringAmplitudes {
    pub r_u: Complex64,
    pub r_c: Complex64,
    pub t_u: Complex64,
    pub t_c: Complex64,
    pub l_u: Complex64,
    pub l_c: Complex64,
}

impl ScatteringAmplitudes {
    pub fn uncoupled_norm(&self) -> f64 {
        self.r_u.norm_sqr() + self.t_u.norm_sqr() + self.l_u.norm_sqr()
    }

    pub fn coupled_norm(&self) -> f64 {
        self.r_c.norm_sqr() + self.t_c.norm_sqr() + self.l_c.norm_sqr()
    }

    /// Amplitudes `(r, t, l)` of one branch.
    pub fn branch(&self, coupled: bool) -> [Complex64; 3] {
        if coupled {
            [self.r_c, self.t_c, self.l_c]
        } else {
            [self.r_u, self.t_u, self.l_u]
        }
    }
}

pub fn scattering_amplitudes(p: &SystemParams) -> Result<ScatteringAmplitudes> {
    let rates = derive_rates(p)?;
    let kt = rates.kappa_tilde;
    let gt = rates.gamma_tilde;
    let one_plus_eta = 1.0 + rates.eta_tilde;
    if one_plus_eta.norm() <= 1e-14 * (1.0 + rates.eta_tilde.norm()) {
        return Err(Error::Singular(format!(
            "1 + eta_tilde vanishes (eta_tilde = {})",
            rates.eta_tilde
        )));
    }
    let r_u = 1.0 - p.kappa_wg / kt;
    let r_c = 1.0 - p.kappa_wg / (kt * one_plus_eta);
    let t_u = -(p.kappa_sc * p.kappa_wg).sqrt() / kt;
    let t_c = t_u / one_plus_eta;
    let l_c = I * p.g * (p.gamma * p.kappa_wg).sqrt() / (gt * kt * one_plus_eta);
    Ok(ScatteringAmplitudes {
        r_u,
        r_c,
        t_u,
        t_c,
        l_u: Complex64::new(0.0, 0.0),
        l_c,
    })
}

/// Cavity reflection for the requested atomic branch.
pub fn cavity_reflection(p: &SystemParams, atom_present: bool) -> Result<Complex64> {
    let amps = scattering_amplitudes(p)?;
    Ok(if atom_present { amps.r_c } else { amps.r_u })
}

/// Field amplitudes at the two detectors for unit input amplitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PortFields {
    pub d1: Complex64,
    pub d2: Complex64,
}

impl PortFields {
    pub fn power1(&self) -> f64 {
        self.d1.norm_sqr()
    }

    pub fn power2(&self) -> f64 {
        self.d2.norm_sqr()
    }

    pub fn total_power(&self) -> f64 {
        self.power1() + self.power2()
    }

    /// Fraction of the detected power in port 1.
    pub fn fraction1(&self) -> f64 {
        self.power1() / self.total_power()
    }
}

/// Builds the two detector fields from the two interferometer arms: the H
/// arm reflects off the cavity, the V arm is a lossless mirror with phase
/// `φ_V`, and the detectors project onto the basis rotated by `θ′`.
pub fn port_fields(
    p: &SystemParams,
    cfg: &InterferometerConfig,
    atom_present: bool,
) -> Result<PortFields> {
    let r = cavity_reflection(p, atom_present)?;
    let out_h = r * cfg.theta.cos();
    let out_v = Complex64::from_polar(1.0, cfg.phi_v) * cfg.theta.sin();
    let (s, c) = cfg.theta_prime.sin_cos();
    Ok(PortFields {
        d1: out_h * c + out_v * s,
        d2: -out_h * s + out_v * c,
    })
}

/// Closed-form detector fields for `tan θ = 2k − 1` and `θ′ = π/4`.
pub fn port_fields_dark_port(
    p: &SystemParams,
    phi_v: f64,
    atom_present: bool,
) -> Result<PortFields> {
    let rates = derive_rates(p)?;
    let k = p.k();
    let eta_t = if atom_present {
        rates.eta_tilde
    } else {
        Complex64::new(0.0, 0.0)
    };
    let one_plus_eta = 1.0 + eta_t;
    if one_plus_eta.norm() <= 1e-14 {
        return Err(Error::Singular("1 + eta_tilde vanishes".into()));
    }
    let norm = 1.0 / (2.0 * (1.0 + 2.0 * k * (k - 1.0)).sqrt());
    let ref_arm = Complex64::from_polar(1.0, phi_v) * (2.0 * k - 1.0);
    let loss = p.kappa_wg / rates.kappa_tilde;
    Ok(PortFields {
        d1: norm * ((ref_arm + 1.0) * one_plus_eta - loss) / one_plus_eta,
        d2: norm * ((ref_arm - 1.0) * one_plus_eta + loss) / one_plus_eta,
    })
}

/// Interferometer figures of merit in the dark-port configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterferometerSummary {
    /// `|d1|² + |d2|²` without the atom.
    pub reflectance_empty: f64,
    /// `|d1|² + |d2|²` with the atom.
    pub reflectance_atom: f64,
    /// Ratio of the two.
    pub power_ratio: f64,
    /// `|d1|² / (|d1|² + |d2|²)` with the atom.
    pub port1_fraction: f64,
    /// Bare cavity reflectance `|r_u|²`.
    pub cavity_reflectance_empty: f64,
}

pub fn interferometer_summary(p: &SystemParams) -> Result<InterferometerSummary> {
    let cfg = InterferometerConfig::dark_port(p.k())?;
    let empty = port_fields(p, &cfg, false)?;
    let atom = port_fields(p, &cfg, true)?;
    Ok(InterferometerSummary {
        reflectance_empty: empty.total_power(),
        reflectance_atom: atom.total_power(),
        power_ratio: atom.total_power() / empty.total_power(),
        port1_fraction: atom.fraction1(),
        cavity_reflectance_empty: scattering_amplitudes(p)?.r_u.norm_sqr(),
    })
}

/// Nearest-branch phase unwrapping: any step larger than π in magnitude is
/// shifted by the multiple of 2π that brings it closest to zero.
pub fn unwrap_phase(phases: &[f64]) -> Vec<f64> {
    use std::f64::consts::{PI, TAU};
    let mut out = Vec::with_capacity(phases.len());
    let mut offset = 0.0;
    let mut prev: Option<f64> = None;
    for &ph in phases {
        if let Some(pv) = prev {
            let step = ph - pv;
            if step.abs() > PI {
                offset -= (step / TAU).round() * TAU;
            }
        }
        out.push(ph + offset);
        prev = Some(ph);
    }
    out
}

/// Atom-induced reflection phase along a detuning sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSpectrum {
    pub trace: TraceSeries,
    /// Sweep indices where `|r_c|` is so small the phase is ill-defined.
    pub ill_defined: Vec<usize>,
    /// Indices `i` where the unwrapped step from `i-1` exceeds π/2; the sweep
    /// is too coarse there to trust the unwrapping.
    pub coarse_steps: Vec<usize>,
}

impl PhaseSpectrum {
    /// Endpoint-to-endpoint change of the unwrapped phase.
    pub fn winding(&self) -> f64 {
        match (self.trace.y.first(), self.trace.y.last()) {
            (Some(a), Some(b)) => b - a,
            _ => 0.0,
        }
    }

    pub fn is_clean(&self) -> bool {
        self.ill_defined.is_empty() && self.coarse_steps.is_empty()
    }
}

const ILL_DEFINED_MAGNITUDE: f64 = 1e-6;

/// Unwrapped `arg(r_c) − arg(r_u)` versus figure detuning `δ` (so
/// `Δ_a = −δ` at each point; `Δ_c` is taken from `p`). The x axis is in
/// `2π × MHz`, the phase in radians.
pub fn phase_spectrum(p: &SystemParams, deltas: &[f64]) -> Result<PhaseSpectrum> {
    if deltas.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Data("detuning sweep must be strictly ascending".into()));
    }
    let mut raw = Vec::with_capacity(deltas.len());
    let mut ill_defined = Vec::new();
    for (i, &delta) in deltas.iter().enumerate() {
        let amps = scattering_amplitudes(&p.with_delta(delta)?)?;
        if amps.r_c.norm() < ILL_DEFINED_MAGNITUDE || amps.r_u.norm() < ILL_DEFINED_MAGNITUDE {
            ill_defined.push(i);
        }
        raw.push((amps.r_c * amps.r_u.conj()).arg());
    }
    let phase = unwrap_phase(&raw);
    let coarse_steps = phase
        .windows(2)
        .enumerate()
        .filter(|(_, w)| (w[1] - w[0]).abs() > std::f64::consts::FRAC_PI_2)
        .map(|(i, _)| i + 1)
        .collect();
    let x = deltas.iter().map(|&d| units::to_mhz(d)).collect();
    let tag = if p.g == 0.0 { "no_atom" } else { "atom" };
    Ok(PhaseSpectrum {
        trace: TraceSeries::new("delta", "MHz", "phase", "rad", "trace", tag).with_data(x, phase),
        ill_defined,
        coarse_steps,
    })
}

/// Atomic decay rate with the cavity detuned by `delta_c` from the atom:
/// `Γ = γ [1 + η / (1 + (2Δ_c/κ)²)]`.
pub fn purcell_decay_rate(p: &SystemParams, delta_c: f64) -> f64 {
    let x = 2.0 * delta_c / p.kappa();
    p.gamma * (1.0 + p.cooperativity() / (1.0 + x * x))
}

/// `Γ/γ` versus atom–cavity detuning (x in `2π × GHz`).
pub fn decay_enhancement(p: &SystemParams, delta_c_sweep: &[f64]) -> Result<TraceSeries> {
    p.validate()?;
    let x = delta_c_sweep.iter().map(|&d| units::to_ghz(d)).collect();
    let y = delta_c_sweep
        .iter()
        .map(|&d| purcell_decay_rate(p, d) / p.gamma)
        .collect();
    Ok(TraceSeries::new("delta_c", "GHz", "decay_enhancement", "", "trace", "purcell").with_data(x, y))
}

/// Empty-cavity interferometer model used to characterize the device.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumModel {
    /// Interferometer free spectral range in GHz.
    pub nu_fsr: f64,
    pub kappa_wg: f64,
    pub kappa_sc: f64,
    pub global_amplitude: f64,
    pub global_phase: f64,
}

impl SpectrumModel {
    pub fn new(
        nu_fsr: f64,
        kappa_wg: f64,
        kappa_sc: f64,
        global_amplitude: f64,
        global_phase: f64,
    ) -> Result<Self> {
        ensure_finite("nu_fsr", nu_fsr)?;
        ensure_finite("kappa_wg", kappa_wg)?;
        ensure_finite("kappa_sc", kappa_sc)?;
        ensure_finite("global_amplitude", global_amplitude)?;
        ensure_finite("global_phase", global_phase)?;
        if nu_fsr <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "nu_fsr",
                reason: format!("must be > 0, got {nu_fsr}"),
            });
        }
        if kappa_wg <= 0.0 || kappa_sc < 0.0 {
            return Err(Error::InvalidParameter {
                name: "kappa",
                reason: format!("need kappa_wg > 0 and kappa_sc >= 0, got {kappa_wg}, {kappa_sc}"),
            });
        }
        Ok(SpectrumModel {
            nu_fsr,
            kappa_wg,
            kappa_sc,
            global_amplitude,
            global_phase,
        })
    }

    /// The device as characterized: `ν_FSR = 33 GHz`, `κ_wg = 2π × 20.3 GHz`,
    /// `κ_sc = 2π × 5.2 GHz`.
    pub fn device() -> Self {
        SpectrumModel {
            nu_fsr: 33.0,
            kappa_wg: units::ghz(20.3),
            kappa_sc: units::ghz(5.2),
            global_amplitude: 1.0,
            global_phase: 0.0,
        }
    }

    pub fn k(&self) -> f64 {
        self.kappa_wg / (self.kappa_wg + self.kappa_sc)
    }

    /// Empty-cavity reflection at probe detuning `nu` (GHz, laser minus
    /// cavity).
    pub fn cavity_reflection(&self, nu: f64) -> Complex64 {
        let kappa = self.kappa_wg + self.kappa_sc;
        let kappa_tilde = Complex64::new(kappa / 2.0, -units::ghz(nu));
        1.0 - self.kappa_wg / kappa_tilde
    }

    /// Reference-arm reflectivity, matched to the empty cavity on resonance.
    pub fn reference_reflectivity(&self) -> f64 {
        (1.0 - 2.0 * self.k()).abs()
    }

    /// `(D + A, D − A)` at probe detuning `nu`.
    pub fn evaluate(&self, nu: f64) -> (f64, f64) {
        let r_v = self.reference_reflectivity();
        let r_c = self.cavity_reflection(nu);
        let phi0 = std::f64::consts::TAU * nu / self.nu_fsr + self.global_phase;
        let sum = 0.5 * (r_v * r_v + r_c.norm_sqr());
        let diff = (r_v * r_c * Complex64::from_polar(1.0, -phi0)).re;
        (self.global_amplitude * sum, self.global_amplitude * diff)
    }
}

/// Sum and difference of the two detector powers versus probe detuning (GHz).
pub fn characterization_spectrum(
    model: &SpectrumModel,
    nu: &[f64],
) -> Result<(TraceSeries, TraceSeries)> {
    let model = SpectrumModel::new(
        model.nu_fsr,
        model.kappa_wg,
        model.kappa_sc,
        model.global_amplitude,
        model.global_phase,
    )?;
    let (sum, diff): (Vec<f64>, Vec<f64>) = nu.iter().map(|&v| model.evaluate(v)).unzip();
    Ok((
        TraceSeries::new("nu", "GHz", "power", "", "trace", "sum").with_data(nu.to_vec(), sum),
        TraceSeries::new("nu", "GHz", "power", "", "trace", "diff").with_data(nu.to_vec(), diff),
    ))
}
