//! Driven Jaynes–Cummings master equation on atom ⊗ truncated Fock space.
//!
//! Basis ordering is atom index slow (0 = ground, 1 = excited) and photon
//! number fast. Density matrices are vectorized column by column, so
//! `vec(A X B) = (Bᵀ ⊗ A) vec(X)`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{ensure_finite, Error, Result};
use crate::params::{InterferometerConfig, SystemParams};
use crate::saturation::DriveField;
use crate::trace::TraceSeries;

pub type CMatrix = DMatrix<Complex64>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

pub const MAX_N_MAX: usize = 30;

/// Population allowed in the highest Fock level before the cutoff is
/// considered too small.
pub const TRUNCATION_LIMIT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HilbertConfig {
    pub n_max: usize,
}

impl HilbertConfig {
    pub fn new(n_max: usize) -> Result<Self> {
        if n_max < 2 {
            return Err(Error::InvalidParameter {
                name: "n_max",
                reason: format!("must be >= 2, got {n_max}"),
            });
        }
        if n_max > MAX_N_MAX {
            return Err(Error::DimensionTooLarge {
                n_max,
                limit: MAX_N_MAX,
            });
        }
        Ok(HilbertConfig { n_max })
    }

    pub fn fock_dim(&self) -> usize {
        self.n_max + 1
    }

    pub fn dim(&self) -> usize {
        2 * self.fock_dim()
    }

    /// Index of `|atom, n⟩`.
    pub fn index(&self, atom: usize, n: usize) -> usize {
        atom * self.fock_dim() + n
    }

    /// Cavity annihilation operator.
    pub fn a(&self) -> CMatrix {
        let nf = self.fock_dim();
        let af = CMatrix::from_fn(nf, nf, |i, j| {
            if j == i + 1 {
                Complex64::new((j as f64).sqrt(), 0.0)
            } else {
                ZERO
            }
        });
        CMatrix::identity(2, 2).kronecker(&af)
    }

    /// Atomic lowering operator `|g⟩⟨e|`.
    pub fn sigma(&self) -> CMatrix {
        let mut s = CMatrix::zeros(2, 2);
        s[(0, 1)] = ONE;
        s.kronecker(&CMatrix::identity(self.fock_dim(), self.fock_dim()))
    }

    /// `σ_z = |e⟩⟨e| − |g⟩⟨g|`.
    pub fn sigma_z(&self) -> CMatrix {
        let mut s = CMatrix::zeros(2, 2);
        s[(0, 0)] = -ONE;
        s[(1, 1)] = ONE;
        s.kronecker(&CMatrix::identity(self.fock_dim(), self.fock_dim()))
    }

    pub fn identity(&self) -> CMatrix {
        CMatrix::identity(self.dim(), self.dim())
    }
}

/// Generator `L` of `dρ/dt = L vec(ρ)`.
#[derive(Debug, Clone)]
pub struct Liouvillian {
    pub matrix: CMatrix,
    pub dim: usize,
}

impl Liouvillian {
    /// Wraps a superoperator acting on `dim × dim` density matrices.
    pub fn from_matrix(matrix: CMatrix, dim: usize) -> Result<Self> {
        if matrix.nrows() != dim * dim || matrix.ncols() != dim * dim {
            return Err(Error::Data(format!(
                "superoperator is {}x{}, expected {}",
                matrix.nrows(),
                matrix.ncols(),
                dim * dim
            )));
        }
        Ok(Liouvillian { matrix, dim })
    }

    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        let v = &self.matrix * vectorize(rho);
        unvectorize(&v, self.dim)
    }

    /// `e^{L t}` as a dense matrix.
    pub fn propagator(&self, t: f64) -> CMatrix {
        (&self.matrix * Complex64::new(t, 0.0)).exp()
    }
}

pub fn vectorize(rho: &CMatrix) -> DVector<Complex64> {
    DVector::from_column_slice(rho.as_slice())
}

pub fn unvectorize(v: &DVector<Complex64>, dim: usize) -> CMatrix {
    CMatrix::from_column_slice(dim, dim, v.as_slice())
}

fn dissipator(c: &CMatrix) -> CMatrix {
    let n = c.nrows();
    let id = CMatrix::identity(n, n);
    let cdc = c.adjoint() * c;
    c.conjugate().kronecker(c)
        - id.kronecker(&cdc) * Complex64::new(0.5, 0.0)
        - cdc.transpose().kronecker(&id) * Complex64::new(0.5, 0.0)
}

/// System Hamiltonian for cavity input amplitude `a_in` (√(photons/μs)):
/// `H = Δ_a σ_z/2 + Δ_c a†a + g(a†σ + aσ†) + ε a† + ε* a` with
/// `ε = −i √κ_wg a_in`.
pub fn hamiltonian(p: &SystemParams, a_in: Complex64, h: &HilbertConfig) -> CMatrix {
    let a = h.a();
    let ad = a.adjoint();
    let s = h.sigma();
    let sd = s.adjoint();
    let eps = -I * p.kappa_wg.sqrt() * a_in;
    h.sigma_z() * Complex64::new(p.delta_a / 2.0, 0.0)
        + &ad * &a * Complex64::new(p.delta_c, 0.0)
        + (&ad * &s + &a * &sd) * Complex64::new(p.g, 0.0)
        + &ad * eps
        + &a * eps.conj()
}

/// Master-equation generator with collapse operators `√κ a` and `√γ σ`.
pub fn build_liouvillian(p: &SystemParams, a_in: Complex64, h: &HilbertConfig) -> Result<Liouvillian> {
    p.validate()?;
    ensure_finite("drive", a_in.re)?;
    ensure_finite("drive", a_in.im)?;
    let ham = hamiltonian(p, a_in, h);
    let n = h.dim();
    let id = CMatrix::identity(n, n);
    let mut l = (id.kronecker(&ham) - ham.transpose().kronecker(&id)) * (-I);
    l += dissipator(&(h.a() * Complex64::new(p.kappa().sqrt(), 0.0)));
    l += dissipator(&(h.sigma() * Complex64::new(p.gamma.sqrt(), 0.0)));
    Ok(Liouvillian { matrix: l, dim: n })
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    pub rho: CMatrix,
    pub hilbert: HilbertConfig,
}

impl QuantumState {
    /// `|g, 0⟩⟨g, 0|`.
    pub fn ground(h: HilbertConfig) -> Self {
        let mut rho = CMatrix::zeros(h.dim(), h.dim());
        rho[(0, 0)] = ONE;
        QuantumState { rho, hilbert: h }
    }

    pub fn trace(&self) -> Complex64 {
        self.rho.trace()
    }

    pub fn hermiticity_error(&self) -> f64 {
        (&self.rho - self.rho.adjoint()).camax()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let herm = (&self.rho + self.rho.adjoint()) * Complex64::new(0.5, 0.0);
        herm.symmetric_eigenvalues().min()
    }

    /// Checks trace, hermiticity and positivity.
    pub fn is_physical(&self, tol: f64) -> bool {
        (self.trace() - 1.0).norm() < tol
            && self.hermiticity_error() < tol
            && self.min_eigenvalue() > -tol.max(1e-9)
    }

    pub fn expect(&self, op: &CMatrix) -> Complex64 {
        (op * &self.rho).trace()
    }

    pub fn sigma(&self) -> Complex64 {
        self.expect(&self.hilbert.sigma())
    }

    pub fn sigma_z(&self) -> f64 {
        self.expect(&self.hilbert.sigma_z()).re
    }

    pub fn cavity_field(&self) -> Complex64 {
        self.expect(&self.hilbert.a())
    }

    /// Population of photon number `n`, summed over the atom.
    pub fn fock_population(&self, n: usize) -> f64 {
        let h = &self.hilbert;
        (0..2).map(|at| self.rho[(h.index(at, n), h.index(at, n))].re).sum()
    }

    pub fn top_fock_population(&self) -> f64 {
        self.fock_population(self.hilbert.n_max)
    }

    pub fn truncation_ok(&self) -> bool {
        self.top_fock_population() < TRUNCATION_LIMIT
    }
}

/// Relative residual `‖L ρ‖ / ‖L‖` accepted for a steady state.
pub const STEADY_STATE_TOL: f64 = 1e-10;

/// Unique trace-one null vector of `L`. The first row of `L` is replaced by
/// the trace functional, which makes the system regular exactly when the
/// null space is one-dimensional.
pub fn steady_state(l: &Liouvillian, h: HilbertConfig) -> Result<QuantumState> {
    let n = l.dim;
    if n != h.dim() {
        return Err(Error::Data(format!(
            "generator acts on dimension {n}, Hilbert space has {}",
            h.dim()
        )));
    }
    let mut m = l.matrix.clone();
    for c in 0..n * n {
        m[(0, c)] = ZERO;
    }
    for i in 0..n {
        m[(0, i + i * n)] = ONE;
    }
    let mut rhs = DVector::zeros(n * n);
    rhs[0] = ONE;
    let lu = m.lu();
    let solved = if lu.is_invertible() { lu.solve(&rhs) } else { None };
    let Some(v) = solved.filter(|v| v.iter().all(|z| z.re.is_finite() && z.im.is_finite())) else {
        return Err(Error::DegenerateSteadyState(null_space_dimension(&l.matrix)));
    };
    let mut rho = unvectorize(&v, n);
    rho = (&rho + rho.adjoint()) * Complex64::new(0.5, 0.0);
    let tr = rho.trace();
    rho /= tr;
    let residual = (&l.matrix * vectorize(&rho)).norm();
    let scale = l.matrix.norm();
    if residual > STEADY_STATE_TOL * scale {
        let nullity = null_space_dimension(&l.matrix);
        if nullity > 1 {
            return Err(Error::DegenerateSteadyState(nullity));
        }
        return Err(Error::NonConvergence(format!(
            "steady-state residual {:e} relative to generator norm {:e}",
            residual, scale
        )));
    }
    Ok(QuantumState { rho, hilbert: h })
}

fn null_space_dimension(m: &CMatrix) -> usize {
    let sv = m.clone().singular_values();
    let top = sv.max();
    if top == 0.0 {
        return m.nrows();
    }
    sv.iter().filter(|&&s| s < 1e-10 * top).count()
}

/// Evolves `rho` for time `t`.
pub fn evolve(l: &Liouvillian, rho: &CMatrix, t: f64) -> CMatrix {
    unvectorize(&(l.propagator(t) * vectorize(rho)), l.dim)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Port {
    /// Detector 1, bright when the atom is present (antibunched).
    A,
    /// Detector 2, the dark port of the empty interferometer (bunched).
    D,
}

impl Port {
    pub fn label(&self) -> &'static str {
        match self {
            Port::A => "A",
            Port::D => "D",
        }
    }
}

/// Affine detector operator `d = c + w a`, with `c` the c-number part set
/// by the input and reference arms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PortOperator {
    pub drive: Complex64,
    pub weight: f64,
}

impl PortOperator {
    pub fn new(p: &SystemParams, cfg: &InterferometerConfig, b_s: f64, port: Port) -> Self {
        let a_in = b_s * cfg.theta.cos();
        let v = Complex64::from_polar(b_s * cfg.theta.sin(), cfg.phi_v);
        let (sp, cp) = cfg.theta_prime.sin_cos();
        let sq = p.kappa_wg.sqrt();
        match port {
            Port::A => PortOperator {
                drive: a_in * cp + v * sp,
                weight: sq * cp,
            },
            Port::D => PortOperator {
                drive: -a_in * sp + v * cp,
                weight: -sq * sp,
            },
        }
    }

    pub fn matrix(&self, h: &HilbertConfig) -> CMatrix {
        h.identity() * self.drive + h.a() * Complex64::new(self.weight, 0.0)
    }
}

/// Steady-state observables for one drive setting.
#[derive(Debug, Clone)]
pub struct DrivenSteadyState {
    pub state: QuantumState,
    pub liouvillian: Liouvillian,
    pub drive: DriveField,
}

pub fn driven_steady_state(
    p: &SystemParams,
    cfg: &InterferometerConfig,
    drive: DriveField,
    h: HilbertConfig,
) -> Result<DrivenSteadyState> {
    let a_in = Complex64::new(drive.a_in(cfg), 0.0);
    let l = build_liouvillian(p, a_in, &h)?;
    let state = steady_state(&l, h)?;
    Ok(DrivenSteadyState {
        state,
        liouvillian: l,
        drive,
    })
}

impl DrivenSteadyState {
    /// `⟨d†d⟩` at a port, photons/μs.
    pub fn port_intensity(&self, p: &SystemParams, cfg: &InterferometerConfig, port: Port) -> f64 {
        let d = PortOperator::new(p, cfg, self.drive.b_s(), port).matrix(&self.state.hilbert);
        self.state.expect(&(d.adjoint() * d)).re
    }
}

/// Intensities below this are treated as a dark port for normalization.
pub const DARK_INTENSITY: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct G2Result {
    pub trace: TraceSeries,
    /// `⟨d†d⟩` in photons/μs.
    pub intensity: f64,
    /// Unnormalized coincidence rate `⟨d†(0)d†(τ)d(τ)d(0)⟩` at each τ.
    pub coincidences: Vec<f64>,
    pub truncation_ok: bool,
    /// `⟨d†d⟩` fell below [`DARK_INTENSITY`]; the normalized values are
    /// unreliable.
    pub dark: bool,
}

/// Intensity correlation at a port via the quantum regression theorem:
/// `g²(τ) = Tr[d†d e^{Lτ}(d ρ d†)] / ⟨d†d⟩²`. Delays (μs) must be
/// non-negative and ascending; the trace reports τ in ns.
pub fn g2(
    p: &SystemParams,
    cfg: &InterferometerConfig,
    drive: DriveField,
    h: HilbertConfig,
    port: Port,
    taus: &[f64],
) -> Result<G2Result> {
    let ss = driven_steady_state(p, cfg, drive, h)?;
    g2_from_steady_state(&ss, p, cfg, port, taus)
}

pub fn g2_from_steady_state(
    ss: &DrivenSteadyState,
    p: &SystemParams,
    cfg: &InterferometerConfig,
    port: Port,
    taus: &[f64],
) -> Result<G2Result> {
    let mut cache = None;
    g2_cached(ss, p, cfg, port, taus, &mut cache)
}

/// `g²(τ)` at several ports from one steady state, sharing propagators.
pub fn g2_ports(
    p: &SystemParams,
    cfg: &InterferometerConfig,
    drive: DriveField,
    h: HilbertConfig,
    ports: &[Port],
    taus: &[f64],
) -> Result<Vec<G2Result>> {
    let ss = driven_steady_state(p, cfg, drive, h)?;
    let mut cache = None;
    ports
        .iter()
        .map(|&port| g2_cached(&ss, p, cfg, port, taus, &mut cache))
        .collect()
}

fn g2_cached(
    ss: &DrivenSteadyState,
    p: &SystemParams,
    cfg: &InterferometerConfig,
    port: Port,
    taus: &[f64],
    cached: &mut Option<(f64, CMatrix)>,
) -> Result<G2Result> {
    if taus.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(Error::Data("delays must be finite and non-negative".into()));
    }
    if taus.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Data("delays must be ascending".into()));
    }
    let h = ss.state.hilbert;
    let d = PortOperator::new(p, cfg, ss.drive.b_s(), port).matrix(&h);
    let n_op = d.adjoint() * &d;
    let intensity = ss.state.expect(&n_op).re;
    let mut x = vectorize(&(&d * &ss.state.rho * d.adjoint()));
    let mut t_now = 0.0;
    let mut coincidences = Vec::with_capacity(taus.len());
    for &tau in taus {
        let dt = tau - t_now;
        if dt > 0.0 {
            let reuse = matches!(cached, Some((c, _)) if ((*c - dt) / dt).abs() < 1e-12);
            if !reuse {
                *cached = Some((dt, ss.liouvillian.propagator(dt)));
            }
            if let Some((_, prop)) = cached {
                x = &*prop * x;
            }
            t_now = tau;
        }
        let xm = unvectorize(&x, h.dim());
        coincidences.push((&n_op * xm).trace().re);
    }
    let dark = intensity < DARK_INTENSITY;
    let norm = intensity * intensity;
    let values = coincidences.iter().map(|c| c / norm).collect();
    let x_ns = taus.iter().map(|t| t * 1e3).collect();
    Ok(G2Result {
        trace: TraceSeries::new("tau", "ns", "g2", "", "port", port.label()).with_data(x_ns, values),
        intensity,
        coincidences,
        truncation_ok: ss.state.truncation_ok(),
        dark,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::units;
    use crate::saturation::bloch_steady_state_resonant;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_density(dim: usize, rng: &mut ChaCha8Rng) -> CMatrix {
        let m = CMatrix::from_fn(dim, dim, |_, _| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let rho = &m * m.adjoint();
        let tr = rho.trace();
        rho / tr
    }

    fn desk_params() -> SystemParams {
        SystemParams::from_cooperativity(8.0, 0.8, units::mhz(2500.0), units::mhz(6.0)).unwrap()
    }

    #[test]
    fn hilbert_guards() {
        assert!(HilbertConfig::new(1).is_err());
        assert!(matches!(
            HilbertConfig::new(31),
            Err(Error::DimensionTooLarge { n_max: 31, limit: 30 })
        ));
        let h = HilbertConfig::new(3).unwrap();
        assert_eq!(h.dim(), 8);
        assert_eq!(h.index(1, 2), 6);
        // [a, a†] = 1 below the cutoff.
        let a = h.a();
        let comm = &a * a.adjoint() - a.adjoint() * &a;
        assert_relative_eq!(comm[(h.index(0, 1), h.index(0, 1))].re, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn trace_preserving() {
        let p = desk_params().with_detunings(units::mhz(17.0), units::mhz(-40.0)).unwrap();
        let h = HilbertConfig::new(4).unwrap();
        let l = build_liouvillian(&p, Complex64::new(3.0, -1.0), &h).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let rho = random_density(h.dim(), &mut rng);
            assert!(l.apply(&rho).trace().norm() < 1e-12 * l.matrix.norm());
        }
        // The trace functional is a left null vector.
        let ones = vectorize(&h.identity()).adjoint() * &l.matrix;
        assert!(ones.camax() < 1e-9);
    }

    #[test]
    fn undriven_decays_to_ground() {
        let p = desk_params();
        let h = HilbertConfig::new(3).unwrap();
        let l = build_liouvillian(&p, ZERO, &h).unwrap();
        let ss = steady_state(&l, h).unwrap();
        assert!((&ss.rho - QuantumState::ground(h).rho).camax() < 1e-12);
    }

    #[test]
    fn empty_cavity_holds_coherent_state() {
        let p = desk_params().with_g(0.0).unwrap().with_detunings(0.0, units::mhz(300.0)).unwrap();
        let h = HilbertConfig::new(10).unwrap();
        let a_in = Complex64::new(8.0, 0.0);
        let l = build_liouvillian(&p, a_in, &h).unwrap();
        let ss = steady_state(&l, h).unwrap();
        let expected = -p.kappa_wg.sqrt() * a_in / p.rates().unwrap().kappa_tilde;
        assert!((ss.cavity_field() - expected).norm() < 1e-8 * expected.norm());
        assert!(ss.is_physical(1e-10));
    }

    #[test]
    fn degenerate_generator_detected() {
        let h = HilbertConfig::new(2).unwrap();
        let l = Liouvillian::from_matrix(CMatrix::zeros(36, 36), 6).unwrap();
        assert!(matches!(steady_state(&l, h), Err(Error::DegenerateSteadyState(36))));
    }

    #[test]
    fn truncation_converged_for_moderate_drive() {
        let p = desk_params();
        let cfg = InterferometerConfig::dark_port(p.k()).unwrap();
        let drive = DriveField::from_y(&p, &cfg, 1.0).unwrap();
        let h = HilbertConfig::new(10).unwrap();
        let ss = driven_steady_state(&p, &cfg, drive, h).unwrap();
        assert!(ss.state.top_fock_population() < TRUNCATION_LIMIT);
        let bigger = driven_steady_state(&p, &cfg, drive, HilbertConfig::new(12).unwrap()).unwrap();
        assert!((ss.state.sigma_z() - bigger.state.sigma_z()).abs() < 1e-6 * ss.state.sigma_z().abs());
    }

    #[test]
    fn bad_cavity_limit_matches_bloch_solution() {
        let g = 1.0;
        let p = SystemParams::new(g, 100.0 * g, 0.0, 0.1 * g, 0.0, 0.0).unwrap();
        let cfg = InterferometerConfig::dark_port(p.k()).unwrap();
        let h = HilbertConfig::new(10).unwrap();
        for &y in &[0.3, 1.0, 3.0] {
            let drive = DriveField::from_y(&p, &cfg, y).unwrap();
            let ss = driven_steady_state(&p, &cfg, drive, h).unwrap();
            let cf = bloch_steady_state_resonant(p.cooperativity(), y);
            let rel = (ss.state.sigma_z() - cf.sigma_z).abs() / cf.sigma_z.abs();
            assert!(rel < 0.01, "y={y} rel={rel}");
            let rel_s = (ss.state.sigma() - cf.sigma).norm() / cf.sigma.norm();
            assert!(rel_s < 0.01, "y={y} rel={rel_s}");
        }
    }

    #[test]
    fn evolution_stays_physical() {
        let p = desk_params();
        let h = HilbertConfig::new(5).unwrap();
        let l = build_liouvillian(&p, Complex64::new(5.0, 0.0), &h).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rho0 = random_density(h.dim(), &mut rng);
        for i in 1..=10 {
            let t = i as f64 / p.gamma;
            let rho = evolve(&l, &rho0, t);
            let st = QuantumState { rho, hilbert: h };
            assert!(st.is_physical(1e-8), "t = {t}");
        }
    }

    #[test]
    fn coherent_light_without_atom() {
        let p = desk_params().with_g(0.0).unwrap();
        let cfg = InterferometerConfig::dark_port(p.k()).unwrap().with_phi_v(0.3);
        let h = HilbertConfig::new(8).unwrap();
        let drive = DriveField { photon_flux: 4.0, y: 0.0 };
        let taus: Vec<f64> = (0..20).map(|i| i as f64 * 0.01).collect();
        for port in [Port::A, Port::D] {
            let r = g2(&p, &cfg, drive, h, port, &taus).unwrap();
            assert!(!r.dark);
            for v in &r.trace.y {
                assert!((v - 1.0).abs() < 1e-8, "{port:?} {v}");
            }
        }
    }

    #[test]
    fn rejects_unsorted_delays() {
        let p = desk_params();
        let cfg = InterferometerConfig::dark_port(p.k()).unwrap();
        let drive = DriveField::from_y(&p, &cfg, 0.1).unwrap();
        let h = HilbertConfig::new(3).unwrap();
        assert!(g2(&p, &cfg, drive, h, Port::A, &[0.1, 0.0]).is_err());
        assert!(g2(&p, &cfg, drive, h, Port::A, &[-0.1]).is_err());
    }

    #[test]
    fn antibunching_and_bunching_desk_scale() {
        let p = desk_params();
        let cfg = InterferometerConfig::dark_port(p.k()).unwrap();
        let drive = DriveField::from_y(&p, &cfg, 0.1).unwrap();
        let h = HilbertConfig::new(6).unwrap();
        let gamma_eff = (1.0 + p.cooperativity()) * p.gamma;
        let taus = [0.0, 10.0 / gamma_eff, 30.0 / gamma_eff];
        let a = g2(&p, &cfg, drive, h, Port::A, &taus).unwrap();
        let d = g2(&p, &cfg, drive, h, Port::D, &taus).unwrap();
        assert!(a.trace.y[0] < 0.5, "{:?}", a.trace.y);
        assert!(d.trace.y[0] > 2.0, "{:?}", d.trace.y);
        assert!((a.trace.y[2] - 1.0).abs() < 0.01);
        assert!((d.trace.y[2] - 1.0).abs() < 0.01);
        assert!(a.truncation_ok && d.truncation_ok);
    }
}
