//! Saturated steady state with the cavity adiabatically eliminated.
//!
//! The drive is parameterized either by the photon flux `|b_s|²` incident on
//! the interferometer (photons/μs) or by the dimensionless amplitude
//! `Y = 4 g √κ_wg a_in / (κ γ)`, with `a_in = b_s cos θ` the part of the
//! input that reaches the cavity.

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;

use crate::error::{ensure_finite, Error, Result};
use crate::params::{derive_rates, InterferometerConfig, SystemParams};
use crate::trace::TraceSeries;

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveField {
    /// `|b_s|²` in photons/μs.
    pub photon_flux: f64,
    pub y: f64,
}

impl DriveField {
    pub fn from_flux(p: &SystemParams, cfg: &InterferometerConfig, photon_flux: f64) -> Result<Self> {
        ensure_finite("photon_flux", photon_flux)?;
        if photon_flux < 0.0 {
            return Err(Error::InvalidParameter {
                name: "photon_flux",
                reason: format!("must be >= 0, got {photon_flux}"),
            });
        }
        let y2 = 4.0 * p.cooperativity() / p.gamma * p.k() * photon_flux * cfg.theta.cos().powi(2);
        Ok(DriveField { photon_flux, y: y2.sqrt() })
    }

    pub fn from_y(p: &SystemParams, cfg: &InterferometerConfig, y: f64) -> Result<Self> {
        ensure_finite("y", y)?;
        if y < 0.0 {
            return Err(Error::InvalidParameter {
                name: "y",
                reason: format!("must be >= 0, got {y}"),
            });
        }
        let per_flux = 4.0 * p.cooperativity() / p.gamma * p.k() * cfg.theta.cos().powi(2);
        if per_flux <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "y",
                reason: "drive amplitude undefined without coupling or cavity input".into(),
            });
        }
        Ok(DriveField { photon_flux: y * y / per_flux, y })
    }

    /// Input amplitude `b_s` (real, √(photons/μs)).
    pub fn b_s(&self) -> f64 {
        self.photon_flux.sqrt()
    }

    /// Cavity input amplitude `a_in = b_s cos θ`.
    pub fn a_in(&self, cfg: &InterferometerConfig) -> f64 {
        self.b_s() * cfg.theta.cos()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochSteadyState {
    pub sigma: Complex64,
    pub sigma_z: f64,
    /// `⟨σ†σ⟩ = (1 + ⟨σ_z⟩)/2`, kept separately so weak drives do not lose it
    /// to cancellation.
    pub excited: f64,
}

impl BlochSteadyState {
    pub const GROUND: BlochSteadyState = BlochSteadyState {
        sigma: Complex64::new(0.0, 0.0),
        sigma_z: -1.0,
        excited: 0.0,
    };

    pub fn from_sigma(sigma: Complex64, sigma_z: f64) -> Self {
        BlochSteadyState {
            sigma,
            sigma_z,
            excited: 0.5 * (1.0 + sigma_z),
        }
    }

    pub fn excited_population(&self) -> f64 {
        self.excited
    }
}

/// Resonant closed form, parameterized by `Y`.
pub fn bloch_steady_state_resonant(eta: f64, y: f64) -> BlochSteadyState {
    let a = 1.0 + eta;
    let den = 2.0 * y * y + a * a;
    BlochSteadyState {
        sigma: I * y * a / den,
        sigma_z: -a * a / den,
        excited: y * y / den,
    }
}

/// Time derivatives `(d⟨σ⟩/dt, d⟨σ_z⟩/dt)` of the adiabatic Bloch equations
/// for a real cavity input amplitude `a_in`.
pub fn bloch_derivative(p: &SystemParams, a_in: f64, s: &BlochSteadyState) -> Result<(Complex64, f64)> {
    let rates = derive_rates(p)?;
    let kt = rates.kappa_tilde;
    let drive = p.g * p.kappa_wg.sqrt() * a_in;
    let d_sigma = -(rates.gamma_tilde + p.g * p.g / kt) * s.sigma - I * drive / kt * s.sigma_z;
    let cav_decay = p.g * p.g * p.kappa() / kt.norm_sqr();
    let d_z = -(p.gamma + cav_decay) * (s.sigma_z + 1.0)
        + (2.0 * I * drive * (s.sigma.conj() / kt - s.sigma / kt.conj())).re;
    Ok((d_sigma, d_z))
}

/// Fixed point of [`bloch_derivative`]. The equations are linear in
/// `(Re σ, Im σ, σ_z)`, so the fixed point is a 3×3 solve.
pub fn bloch_steady_state_general(p: &SystemParams, a_in: f64) -> Result<BlochSteadyState> {
    ensure_finite("a_in", a_in)?;
    let rates = derive_rates(p)?;
    let kt = rates.kappa_tilde;
    let a = rates.gamma_tilde + p.g * p.g / kt;
    let b = I * p.g * p.kappa_wg.sqrt() * a_in / kt;
    let inv_k = 1.0 / kt;
    let drive4 = 4.0 * p.g * p.kappa_wg.sqrt() * a_in;
    let relax = p.gamma + p.g * p.g * p.kappa() / kt.norm_sqr();
    // Unknowns (Re σ, Im σ, P_e) with σ_z = 2 P_e − 1.
    #[rustfmt::skip]
    let m = Matrix3::new(
        -a.re, a.im, -2.0 * b.re,
        -a.im, -a.re, -2.0 * b.im,
        -drive4 * inv_k.im, drive4 * inv_k.re, -2.0 * relax,
    );
    let rhs = Vector3::new(-b.re, -b.im, 0.0);
    let x = m
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Singular("Bloch fixed-point system".into()))?;
    let s = BlochSteadyState {
        sigma: Complex64::new(x[0], x[1]),
        sigma_z: 2.0 * x[2] - 1.0,
        excited: x[2],
    };
    let (ds, dz) = bloch_derivative(p, a_in, &s)?;
    let scale = relax.max(a.norm());
    if ds.norm().max(dz.abs()) > 1e-10 * scale {
        return Err(Error::NonConvergence(format!(
            "Bloch fixed point residual {:e}",
            ds.norm().max(dz.abs())
        )));
    }
    Ok(s)
}

/// Steady state for a drive of dimensionless amplitude `y`. Uses the closed
/// form on resonance and the general fixed point otherwise.
pub fn bloch_steady_state(p: &SystemParams, y: f64) -> Result<BlochSteadyState> {
    p.validate()?;
    ensure_finite("y", y)?;
    if p.g == 0.0 || y == 0.0 {
        return Ok(BlochSteadyState::GROUND);
    }
    if p.delta_a == 0.0 && p.delta_c == 0.0 {
        return Ok(bloch_steady_state_resonant(p.cooperativity(), y));
    }
    let a_in = y * p.kappa() * p.gamma / (4.0 * p.g * p.kappa_wg.sqrt());
    bloch_steady_state_general(p, a_in)
}

/// Photon fluxes at the two detectors, plus the atomic steady state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PortIntensities {
    pub i1: f64,
    pub i2: f64,
    pub bloch: BlochSteadyState,
}

/// Detector fluxes for any interferometer setting and detuning. The cavity
/// field follows the atom, `a = (−i g σ − √κ_wg a_in)/κ̃`, so each port sees
/// a coherent part `|c + w⟨a⟩|²` plus incoherent atomic emission.
pub fn port_intensities_general(
    p: &SystemParams,
    cfg: &InterferometerConfig,
    drive: &DriveField,
) -> Result<PortIntensities> {
    p.validate()?;
    let rates = derive_rates(p)?;
    let kt = rates.kappa_tilde;
    let b_s = drive.b_s();
    let a_in = drive.a_in(cfg);
    let bloch = if p.g == 0.0 || a_in == 0.0 {
        BlochSteadyState::GROUND
    } else {
        bloch_steady_state_general(p, a_in)?
    };
    let a_mean = (-I * p.g * bloch.sigma - p.kappa_wg.sqrt() * a_in) / kt;
    let incoherent = p.g * p.g / kt.norm_sqr()
        * (bloch.excited_population() - bloch.sigma.norm_sqr()).max(0.0);
    let (sp, cp) = cfg.theta_prime.sin_cos();
    let v = Complex64::from_polar(b_s * cfg.theta.sin(), cfg.phi_v);
    let sq = p.kappa_wg.sqrt();
    let ports = [
        (a_in * cp + v * sp, sq * cp),
        (-a_in * sp + v * cp, -sq * sp),
    ];
    let flux = |(c, w): (Complex64, f64)| (c + w * a_mean).norm_sqr() + w * w * incoherent;
    Ok(PortIntensities {
        i1: flux(ports[0]),
        i2: flux(ports[1]),
        bloch,
    })
}

/// Resonant dark-port detector fluxes as closed forms in `Y`.
pub fn port_intensities(p: &SystemParams, y: f64) -> Result<(f64, f64)> {
    p.validate()?;
    ensure_finite("y", y)?;
    let eta = p.cooperativity();
    if eta <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "g",
            reason: "closed-form intensities need eta > 0".into(),
        });
    }
    let k = p.k();
    let y2 = y * y;
    let den = 2.0 * y2 + (1.0 + eta).powi(2);
    let pre = p.gamma / (2.0 * eta) * k * y2;
    let i1 = pre * eta * eta / den;
    let one_m_2k = 1.0 - 2.0 * k;
    let i2 = pre
        * ((2.0 * y2 + 1.0) * one_m_2k * one_m_2k
            + 2.0 * (1.0 - k) * one_m_2k * eta
            + (1.0 - k).powi(2) * eta * eta)
        / (k * k * den);
    Ok((i1, i2))
}

/// Photon flux (normalized to `Γ = (1+η)γ`) at which the port-1 output per
/// input photon has dropped to half its weak-drive value.
pub fn saturation_knee(p: &SystemParams, cfg: &InterferometerConfig) -> f64 {
    let eta = p.cooperativity();
    (1.0 + eta) / (8.0 * eta * p.k() * cfg.theta.cos().powi(2))
}

/// Port fluxes per incident photon versus incident flux normalized to
/// `Γ = (1+η)γ`. Returns one trace per port.
pub fn saturation_curve(
    p: &SystemParams,
    cfg: &InterferometerConfig,
    rates_over_gamma: &[f64],
) -> Result<(TraceSeries, TraceSeries)> {
    let big_gamma = (1.0 + p.cooperativity()) * p.gamma;
    let mut t1 = TraceSeries::new("rate", "Gamma", "fraction", "", "port", "A");
    let mut t2 = TraceSeries::new("rate", "Gamma", "fraction", "", "port", "D");
    for &r in rates_over_gamma {
        let flux = r * big_gamma;
        if flux <= 0.0 {
            return Err(Error::Data(format!("incident rate must be > 0, got {r}")));
        }
        let drive = DriveField::from_flux(p, cfg, flux)?;
        let out = port_intensities_general(p, cfg, &drive)?;
        t1.push(r, out.i1 / flux);
        t2.push(r, out.i2 / flux);
    }
    Ok((t1, t2))
}
