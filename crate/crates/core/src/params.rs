//! Canonical system parameters and the complex rates derived from them.
//!
//! Every rate is an angular frequency in rad/μs and every time is in μs.
//! The [`units`] helpers convert from the "2π × MHz" / "2π × GHz" notation
//! used for quoting experimental numbers.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};

pub mod units {
    use std::f64::consts::PI;

    /// `2π × value MHz` as rad/μs.
    pub fn mhz(value: f64) -> f64 {
        2.0 * PI * value
    }

    /// `2π × value GHz` as rad/μs.
    pub fn ghz(value: f64) -> f64 {
        2.0 * PI * 1e3 * value
    }

    /// Inverse of [`mhz`].
    pub fn to_mhz(rate: f64) -> f64 {
        rate / (2.0 * PI)
    }

    /// Inverse of [`ghz`].
    pub fn to_ghz(rate: f64) -> f64 {
        rate / (2.0 * PI * 1e3)
    }

    pub fn ns(value: f64) -> f64 {
        value * 1e-3
    }

    pub fn to_ns(time: f64) -> f64 {
        time * 1e3
    }
}

/// Atom–cavity rates. `g = 0` is allowed and describes an empty cavity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Half the single-photon Rabi frequency.
    pub g: f64,
    /// Cavity decay into the waveguide.
    pub kappa_wg: f64,
    /// Cavity decay into all other channels.
    pub kappa_sc: f64,
    /// Free-space atomic population decay.
    pub gamma: f64,
    /// Atom–laser detuning `ω_a − ω_L`.
    pub delta_a: f64,
    /// Cavity–laser detuning `ω_c − ω_L`.
    pub delta_c: f64,
}

impl SystemParams {
    pub fn new(
        g: f64,
        kappa_wg: f64,
        kappa_sc: f64,
        gamma: f64,
        delta_a: f64,
        delta_c: f64,
    ) -> Result<Self> {
        let p = SystemParams {
            g,
            kappa_wg,
            kappa_sc,
            gamma,
            delta_a,
            delta_c,
        };
        p.validate()?;
        Ok(p)
    }

    /// Rates in `2π × MHz`; detunings likewise.
    pub fn from_2pi_mhz(
        g: f64,
        kappa_wg: f64,
        kappa_sc: f64,
        gamma: f64,
        delta_a: f64,
        delta_c: f64,
    ) -> Result<Self> {
        use units::mhz;
        Self::new(
            mhz(g),
            mhz(kappa_wg),
            mhz(kappa_sc),
            mhz(gamma),
            mhz(delta_a),
            mhz(delta_c),
        )
    }

    /// Resonant parameters from cooperativity `eta`, waveguide fraction `k`,
    /// total cavity decay `kappa` and atomic decay `gamma`.
    pub fn from_cooperativity(eta: f64, k: f64, kappa: f64, gamma: f64) -> Result<Self> {
        ensure_finite("eta", eta)?;
        ensure_finite("k", k)?;
        if eta < 0.0 {
            return Err(Error::InvalidParameter {
                name: "eta",
                reason: format!("must be non-negative, got {eta}"),
            });
        }
        if !(k > 0.0 && k <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "k",
                reason: format!("must lie in (0, 1], got {k}"),
            });
        }
        let g = (eta * kappa * gamma / 4.0).sqrt();
        Self::new(g, k * kappa, (1.0 - k) * kappa, gamma, 0.0, 0.0)
    }

    /// Device parameters of the experiment: `2g = 2π × 1.09 GHz`,
    /// `κ_wg = 2π × 20.3 GHz`, `κ_sc = 2π × 5.2 GHz`, `γ = 2π × 6 MHz`.
    pub fn device_default() -> Self {
        SystemParams {
            g: units::mhz(545.0),
            kappa_wg: units::ghz(20.3),
            kappa_sc: units::ghz(5.2),
            gamma: units::mhz(6.0),
            delta_a: 0.0,
            delta_c: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure_finite("g", self.g)?;
        ensure_finite("kappa_wg", self.kappa_wg)?;
        ensure_finite("kappa_sc", self.kappa_sc)?;
        ensure_finite("gamma", self.gamma)?;
        ensure_finite("delta_a", self.delta_a)?;
        ensure_finite("delta_c", self.delta_c)?;
        let positive = |name: &'static str, v: f64| {
            if v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be > 0, got {v}"),
                })
            }
        };
        positive("kappa_wg", self.kappa_wg)?;
        positive("gamma", self.gamma)?;
        if self.g < 0.0 {
            return Err(Error::InvalidParameter {
                name: "g",
                reason: format!("must be >= 0, got {}", self.g),
            });
        }
        if self.kappa_sc < 0.0 {
            return Err(Error::InvalidParameter {
                name: "kappa_sc",
                reason: format!("must be >= 0, got {}", self.kappa_sc),
            });
        }
        Ok(())
    }

    /// Total cavity decay `κ = κ_wg + κ_sc`.
    pub fn kappa(&self) -> f64 {
        self.kappa_wg + self.kappa_sc
    }

    /// Waveguide coupling fraction `k = κ_wg / κ`.
    pub fn k(&self) -> f64 {
        self.kappa_wg / self.kappa()
    }

    /// On-resonance cooperativity `η = 4g² / (κγ)`.
    pub fn cooperativity(&self) -> f64 {
        4.0 * self.g * self.g / (self.kappa() * self.gamma)
    }

    /// Atom–photon detuning as quoted in figures: `δ = −Δ_a`.
    pub fn delta(&self) -> f64 {
        -self.delta_a
    }

    /// Purcell-enhanced decay rate `Γ = (1 + η)γ` on cavity resonance.
    pub fn purcell_rate(&self) -> f64 {
        (1.0 + self.cooperativity()) * self.gamma
    }

    pub fn with_g(self, g: f64) -> Result<Self> {
        let p = SystemParams { g, ..self };
        p.validate()?;
        Ok(p)
    }

    /// Rescales `g` so that the on-resonance cooperativity equals `eta`.
    pub fn with_cooperativity(self, eta: f64) -> Result<Self> {
        ensure_finite("eta", eta)?;
        if eta < 0.0 {
            return Err(Error::InvalidParameter {
                name: "eta",
                reason: format!("must be non-negative, got {eta}"),
            });
        }
        self.with_g((eta * self.kappa() * self.gamma / 4.0).sqrt())
    }

    pub fn with_detunings(self, delta_a: f64, delta_c: f64) -> Result<Self> {
        let p = SystemParams {
            delta_a,
            delta_c,
            ..self
        };
        p.validate()?;
        Ok(p)
    }

    /// Sets the figure detuning `δ` (i.e. `Δ_a = −δ`).
    pub fn with_delta(self, delta: f64) -> Result<Self> {
        self.with_detunings(-delta, self.delta_c)
    }

    pub fn rates(&self) -> Result<ComplexRates> {
        derive_rates(self)
    }
}

/// `κ̃ = κ/2 + iΔ_c`, `γ̃ = γ/2 + iΔ_a`, `η̃ = g²/(κ̃γ̃)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexRates {
    pub kappa_tilde: Complex64,
    pub gamma_tilde: Complex64,
    pub eta_tilde: Complex64,
}

pub fn derive_rates(p: &SystemParams) -> Result<ComplexRates> {
    p.validate()?;
    let kappa_tilde = Complex64::new(p.kappa() / 2.0, p.delta_c);
    let gamma_tilde = Complex64::new(p.gamma / 2.0, p.delta_a);
    let eta_tilde = p.g * p.g / (kappa_tilde * gamma_tilde);
    Ok(ComplexRates {
        kappa_tilde,
        gamma_tilde,
        eta_tilde,
    })
}

/// Result of converting an excited-state lifetime to a cooperativity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CooperativityEstimate {
    pub eta: f64,
    /// Total decay rate `Γ = 1/τ`.
    pub decay_rate: f64,
    /// Set when `τ ≥ 1/γ`: the atom decays no faster than in free space.
    pub below_free_space: bool,
}

/// `η = (Γ − γ)/γ` with `Γ = 1/τ`.
pub fn cooperativity_from_lifetime(tau: f64, gamma: f64) -> Result<CooperativityEstimate> {
    ensure_finite("tau", tau)?;
    ensure_finite("gamma", gamma)?;
    if tau <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "tau",
            reason: format!("must be > 0, got {tau}"),
        });
    }
    if gamma <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "gamma",
            reason: format!("must be > 0, got {gamma}"),
        });
    }
    let decay_rate = 1.0 / tau;
    let eta = (decay_rate - gamma) / gamma;
    Ok(CooperativityEstimate {
        eta,
        decay_rate,
        below_free_space: eta <= 0.0,
    })
}

/// Polarization interferometer settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterferometerConfig {
    /// Reference-arm phase φ_V.
    pub phi_v: f64,
    /// Input polarization angle from the H axis.
    pub theta: f64,
    /// Detection-basis angle from the H axis.
    pub theta_prime: f64,
}

impl InterferometerConfig {
    pub fn new(phi_v: f64, theta: f64, theta_prime: f64) -> Result<Self> {
        ensure_finite("phi_v", phi_v)?;
        ensure_finite("theta", theta)?;
        ensure_finite("theta_prime", theta_prime)?;
        Ok(InterferometerConfig {
            phi_v,
            theta,
            theta_prime,
        })
    }

    /// Detector 1 dark for the empty cavity on resonance: `tan θ = 2k − 1`,
    /// `φ_V = 0`, `θ′ = π/4`.
    pub fn dark_port(k: f64) -> Result<Self> {
        ensure_finite("k", k)?;
        if !(k > 0.0 && k <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "k",
                reason: format!("must lie in (0, 1], got {k}"),
            });
        }
        Ok(InterferometerConfig {
            phi_v: 0.0,
            theta: (2.0 * k - 1.0).atan(),
            theta_prime: std::f64::consts::FRAC_PI_4,
        })
    }

    pub fn with_phi_v(self, phi_v: f64) -> Self {
        InterferometerConfig { phi_v, ..self }
    }
}

/// Flat key–value parameter file. Missing keys leave the base value alone.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    #[serde(rename = "g_2pi_MHz", skip_serializing_if = "Option::is_none")]
    pub g_2pi_mhz: Option<f64>,
    #[serde(rename = "kappa_wg_2pi_GHz", skip_serializing_if = "Option::is_none")]
    pub kappa_wg_2pi_ghz: Option<f64>,
    #[serde(rename = "kappa_sc_2pi_GHz", skip_serializing_if = "Option::is_none")]
    pub kappa_sc_2pi_ghz: Option<f64>,
    #[serde(rename = "gamma_2pi_MHz", skip_serializing_if = "Option::is_none")]
    pub gamma_2pi_mhz: Option<f64>,
    #[serde(rename = "delta_a_2pi_MHz", skip_serializing_if = "Option::is_none")]
    pub delta_a_2pi_mhz: Option<f64>,
    #[serde(rename = "delta_c_2pi_MHz", skip_serializing_if = "Option::is_none")]
    pub delta_c_2pi_mhz: Option<f64>,
}

impl ParamsConfig {
    pub const KEYS: [&'static str; 6] = [
        "g_2pi_MHz",
        "kappa_wg_2pi_GHz",
        "kappa_sc_2pi_GHz",
        "gamma_2pi_MHz",
        "delta_a_2pi_MHz",
        "delta_c_2pi_MHz",
    ];

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_text(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_params(p: &SystemParams) -> Self {
        ParamsConfig {
            g_2pi_mhz: Some(units::to_mhz(p.g)),
            kappa_wg_2pi_ghz: Some(units::to_ghz(p.kappa_wg)),
            kappa_sc_2pi_ghz: Some(units::to_ghz(p.kappa_sc)),
            gamma_2pi_mhz: Some(units::to_mhz(p.gamma)),
            delta_a_2pi_mhz: Some(units::to_mhz(p.delta_a)),
            delta_c_2pi_mhz: Some(units::to_mhz(p.delta_c)),
        }
    }

    /// Sets one key by name, as used for command-line overrides.
    pub fn set(&mut self, key: &str, value: f64) -> Result<()> {
        let slot = match key {
            "g_2pi_MHz" => &mut self.g_2pi_mhz,
            "kappa_wg_2pi_GHz" => &mut self.kappa_wg_2pi_ghz,
            "kappa_sc_2pi_GHz" => &mut self.kappa_sc_2pi_ghz,
            "gamma_2pi_MHz" => &mut self.gamma_2pi_mhz,
            "delta_a_2pi_MHz" => &mut self.delta_a_2pi_mhz,
            "delta_c_2pi_MHz" => &mut self.delta_c_2pi_mhz,
            other => {
                return Err(Error::Config(format!(
                    "unknown parameter key `{other}` (expected one of {})",
                    Self::KEYS.join(", ")
                )))
            }
        };
        *slot = Some(value);
        Ok(())
    }

    /// Later layers win: `base.merge(file).merge(flags)`.
    pub fn merge(self, over: ParamsConfig) -> ParamsConfig {
        ParamsConfig {
            g_2pi_mhz: over.g_2pi_mhz.or(self.g_2pi_mhz),
            kappa_wg_2pi_ghz: over.kappa_wg_2pi_ghz.or(self.kappa_wg_2pi_ghz),
            kappa_sc_2pi_ghz: over.kappa_sc_2pi_ghz.or(self.kappa_sc_2pi_ghz),
            gamma_2pi_mhz: over.gamma_2pi_mhz.or(self.gamma_2pi_mhz),
            delta_a_2pi_mhz: over.delta_a_2pi_mhz.or(self.delta_a_2pi_mhz),
            delta_c_2pi_mhz: over.delta_c_2pi_mhz.or(self.delta_c_2pi_mhz),
        }
    }

    pub fn apply(&self, base: &SystemParams) -> Result<SystemParams> {
        SystemParams::new(
            self.g_2pi_mhz.map(units::mhz).unwrap_or(base.g),
            self.kappa_wg_2pi_ghz.map(units::ghz).unwrap_or(base.kappa_wg),
            self.kappa_sc_2pi_ghz.map(units::ghz).unwrap_or(base.kappa_sc),
            self.gamma_2pi_mhz.map(units::mhz).unwrap_or(base.gamma),
            self.delta_a_2pi_mhz.map(units::mhz).unwrap_or(base.delta_a),
            self.delta_c_2pi_mhz.map(units::mhz).unwrap_or(base.delta_c),
        )
    }
}
