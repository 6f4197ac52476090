//! Nonlinear least squares for the parameter-extraction fits: lifetime
//! decay, interference fringes and the empty-interferometer spectrum.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linres::SpectrumModel;
use crate::params::units;

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub params: Vec<f64>,
    pub covariance: DMatrix<f64>,
    /// `√Σ r_i²` of the (weighted) residuals at the solution.
    pub residual_norm: f64,
    pub converged: bool,
    pub n_iterations: usize,
    /// `JᵀJ` was singular; the covariance is not meaningful.
    pub singular: bool,
}

impl FitResult {
    /// 1σ uncertainties from the covariance diagonal.
    pub fn sigmas(&self) -> Vec<f64> {
        (0..self.params.len())
            .map(|i| self.covariance[(i, i)].max(0.0).sqrt())
            .collect()
    }

    pub fn cost(&self) -> f64 {
        self.residual_norm * self.residual_norm
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Relative parameter-step tolerance.
    pub xtol: f64,
    /// Relative cost-reduction tolerance.
    pub ftol: f64,
    /// Relative Jacobian step.
    pub diff_step: f64,
    /// Residuals are already divided by their standard deviations, so the
    /// covariance is `(JᵀJ)⁻¹` rather than `s² (JᵀJ)⁻¹`.
    pub weighted: bool,
}

impl Default for LmOptions {
    fn default() -> Self {
        LmOptions {
            max_iterations: 500,
            xtol: 1e-13,
            ftol: 1e-15,
            diff_step: 1e-6,
            weighted: false,
        }
    }
}

fn jacobian<F>(f: &F, p: &[f64], r0_len: usize, step: f64) -> DMatrix<f64>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let n = p.len();
    let mut j = DMatrix::zeros(r0_len, n);
    let mut q = p.to_vec();
    for k in 0..n {
        let h = step * p[k].abs().max(1e-2);
        q[k] = p[k] + h;
        let plus = f(&q);
        q[k] = p[k] - h;
        let minus = f(&q);
        q[k] = p[k];
        for i in 0..r0_len {
            j[(i, k)] = (plus[i] - minus[i]) / (2.0 * h);
        }
    }
    j
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|x| x * x).sum()
}

/// Levenberg–Marquardt with Marquardt's diagonal scaling and a central
/// difference Jacobian. `residuals` returns model minus data, already
/// weighted if `opts.weighted`.
pub fn levenberg_marquardt<F>(residuals: F, p0: &[f64], opts: &LmOptions) -> Result<FitResult>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let n = p0.len();
    let mut p = p0.to_vec();
    let mut r = residuals(&p);
    let m = r.len();
    if m < n {
        return Err(Error::Data(format!("{m} residuals cannot determine {n} parameters")));
    }
    if r.iter().any(|x| !x.is_finite()) {
        return Err(Error::Data("model is not finite at the starting point".into()));
    }
    let mut cost = sum_sq(&r);
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    let mut j = jacobian(&residuals, &p, m, opts.diff_step);
    while iterations < opts.max_iterations {
        iterations += 1;
        let jt = j.transpose();
        let jtj = &jt * &j;
        let grad = &jt * DVector::from_column_slice(&r);
        if grad.amax() <= 1e-300 {
            converged = true;
            break;
        }
        let mut accepted = false;
        while lambda < 1e16 {
            let mut a = jtj.clone();
            for i in 0..n {
                a[(i, i)] += lambda * jtj[(i, i)].max(1e-300);
            }
            let Some(step) = a.cholesky().map(|c| c.solve(&(-&grad))) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = p.iter().zip(step.iter()).map(|(x, d)| x + d).collect();
            let rt = residuals(&trial);
            let ct = sum_sq(&rt);
            if ct.is_finite() && ct <= cost {
                let small_step = step
                    .iter()
                    .zip(&p)
                    .all(|(d, x)| d.abs() <= opts.xtol * (x.abs() + opts.xtol));
                let small_gain = cost - ct <= opts.ftol * cost;
                p = trial;
                r = rt;
                cost = ct;
                lambda = (lambda / 10.0).max(1e-12);
                accepted = true;
                if small_step || small_gain || cost == 0.0 {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            // No downhill step at any damping: a (numerical) minimum.
            converged = true;
            break;
        }
        if converged {
            break;
        }
        j = jacobian(&residuals, &p, m, opts.diff_step);
    }
    let j = jacobian(&residuals, &p, m, opts.diff_step);
    let jtj = j.transpose() * &j;
    let scale = if opts.weighted || m == n {
        1.0
    } else {
        cost / (m - n) as f64
    };
    let (covariance, singular) = match jtj.clone().try_inverse() {
        Some(inv) if inv.iter().all(|x| x.is_finite()) => (inv * scale, false),
        _ => (DMatrix::from_element(n, n, f64::NAN), true),
    };
    Ok(FitResult {
        params: p,
        covariance,
        residual_norm: cost.sqrt(),
        converged,
        n_iterations: iterations,
        singular,
    })
}

/// Poisson standard deviations `√max(y, 1)`.
pub fn poisson_sigmas(ys: &[f64]) -> Vec<f64> {
    ys.iter().map(|y| y.max(1.0).sqrt()).collect()
}

fn check_lengths(xs: &[f64], ys: &[f64], sigmas: Option<&[f64]>) -> Result<()> {
    if xs.len() != ys.len() {
        return Err(Error::Data(format!("{} x values but {} y values", xs.len(), ys.len())));
    }
    if let Some(s) = sigmas {
        if s.len() != xs.len() {
            return Err(Error::Data("sigma length differs from data".into()));
        }
        if s.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::Data("sigmas must be positive and finite".into()));
        }
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::Data("data must be finite".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExponentialFit {
    /// `[A, τ, B]` for `y = A e^{−t/τ} + B`.
    pub result: FitResult,
    pub tau: f64,
    pub tau_sigma: f64,
}

/// Fits `y = A e^{−t/τ} + B` to the points with `t ≥ window_start`. Time
/// units are those of `ts`. Pass `sigmas` for weighted fitting (see
/// [`poisson_sigmas`]).
pub fn fit_exponential(ts: &[f64], ys: &[f64], window_start: f64, sigmas: Option<&[f64]>) -> Result<ExponentialFit> {
    check_lengths(ts, ys, sigmas)?;
    let idx: Vec<usize> = (0..ts.len()).filter(|&i| ts[i] >= window_start).collect();
    if idx.len() < 4 {
        return Err(Error::Data(format!(
            "need at least 4 points after the window start, got {}",
            idx.len()
        )));
    }
    let t: Vec<f64> = idx.iter().map(|&i| ts[i]).collect();
    let y: Vec<f64> = idx.iter().map(|&i| ys[i]).collect();
    let w: Vec<f64> = match sigmas {
        Some(s) => idx.iter().map(|&i| 1.0 / s[i]).collect(),
        None => vec![1.0; t.len()],
    };

    // Start: background from the tail, τ from a log-linear fit above it.
    let tail = (t.len() / 10).max(1);
    let mut sorted_tail: Vec<f64> = y[y.len() - tail..].to_vec();
    sorted_tail.sort_by(f64::total_cmp);
    let b0 = sorted_tail[0].min(y.iter().cloned().fold(f64::INFINITY, f64::min));
    let pts: Vec<(f64, f64)> = t
        .iter()
        .zip(&y)
        .filter(|(_, &v)| v - b0 > 0.0)
        .map(|(&ti, &v)| (ti, (v - b0).ln()))
        .collect();
    let span = t[t.len() - 1] - t[0];
    let mut tau0 = span / 3.0;
    if pts.len() >= 2 {
        let nn = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / nn;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / nn;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let slope = sxy / sxx;
        if slope < 0.0 && slope.is_finite() {
            tau0 = -1.0 / slope;
        }
    }
    let a0 = ((y[0] - b0) * (t[0] / tau0).exp()).max(f64::MIN_POSITIVE);
    let model = |p: &[f64]| -> Vec<f64> {
        t.iter()
            .zip(&y)
            .zip(&w)
            .map(|((ti, yi), wi)| (p[0] * (-ti / p[1]).exp() + p[2] - yi) * wi)
            .collect()
    };
    let opts = LmOptions {
        weighted: sigmas.is_some(),
        ..LmOptions::default()
    };
    let result = levenberg_marquardt(model, &[a0, tau0, b0], &opts)?;
    Ok(ExponentialFit {
        tau: result.params[1],
        tau_sigma: result.sigmas()[1],
        result,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SinusoidFit {
    /// `[C, V, φ]` for `y = C + V cos(x − φ)`, with `V ≥ 0` and
    /// `φ ∈ (−π, π]`.
    pub result: FitResult,
    pub offset: f64,
    pub amplitude: f64,
    pub phase: f64,
    pub visibility: f64,
    /// False when the fitted amplitude vanishes and the phase means nothing.
    pub phase_defined: bool,
}

fn wrap_pi(x: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let w = x.rem_euclid(TAU);
    if w > PI {
        w - TAU
    } else {
        w
    }
}

/// Fits `y = C + V cos(x − φ)`; `xs` in radians must cover a period.
pub fn fit_sinusoid(xs: &[f64], ys: &[f64], sigmas: Option<&[f64]>) -> Result<SinusoidFit> {
    use std::f64::consts::TAU;
    check_lengths(xs, ys, sigmas)?;
    if xs.len() < 4 {
        return Err(Error::Data("need at least 4 points".into()));
    }
    let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let spacing = (hi - lo) / (xs.len() - 1) as f64;
    if hi - lo + spacing < TAU * (1.0 - 1e-9) {
        return Err(Error::Data(format!(
            "phase sweep spans {:.3} rad, less than one period",
            hi - lo
        )));
    }
    let w: Vec<f64> = match sigmas {
        Some(s) => s.iter().map(|v| 1.0 / v).collect(),
        None => vec![1.0; xs.len()],
    };
    // The model is linear in (C, V cos φ, V sin φ); solve that first.
    let design = DMatrix::from_fn(xs.len(), 3, |i, j| {
        w[i] * match j {
            0 => 1.0,
            1 => xs[i].cos(),
            _ => xs[i].sin(),
        }
    });
    let rhs = DVector::from_iterator(ys.len(), ys.iter().zip(&w).map(|(y, wi)| y * wi));
    let lin = design
        .clone()
        .svd(true, true)
        .solve(&rhs, 1e-14)
        .map_err(|e| Error::Data(e.to_string()))?;
    let v0 = lin[1].hypot(lin[2]);
    let phi0 = lin[2].atan2(lin[1]);
    let model = |p: &[f64]| -> Vec<f64> {
        xs.iter()
            .zip(ys)
            .zip(&w)
            .map(|((x, y), wi)| (p[0] + p[1] * (x - p[2]).cos() - y) * wi)
            .collect()
    };
    let opts = LmOptions {
        weighted: sigmas.is_some(),
        ..LmOptions::default()
    };
    let mut result = levenberg_marquardt(model, &[lin[0], v0.max(1e-300), phi0], &opts)?;
    if result.params[1] < 0.0 {
        result.params[1] = -result.params[1];
        result.params[2] += std::f64::consts::PI;
    }
    result.params[2] = wrap_pi(result.params[2]);
    let (c, v, phi) = (result.params[0], result.params[1], result.params[2]);
    let scale = c.abs().max(ys.iter().map(|y| y.abs()).fold(0.0, f64::max));
    let phase_defined = v > 1e-9 * scale && !result.singular;
    Ok(SinusoidFit {
        offset: c,
        amplitude: v,
        phase: phi,
        visibility: v / c,
        phase_defined,
        result,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumFit {
    /// `[ν_FSR, κ_wg/2π, κ_sc/2π, φ_g, A]` with frequencies in GHz.
    pub result: FitResult,
    pub model: SpectrumModel,
    pub k: f64,
    pub k_sigma: f64,
    pub n_starts: usize,
    /// Another start reached an equally good fit with parameters more than
    /// 1σ away.
    pub ambiguous: bool,
    /// The sum trace shows no resonance dip, so the cavity rates are not
    /// constrained.
    pub flat_sum: bool,
}

/// Period of the strongest sinusoid in `ys(xs)`, by scanning a periodogram
/// between two periods per span and four samples per period.
fn dominant_period(xs: &[f64], ys: &[f64]) -> f64 {
    use std::f64::consts::TAU;
    let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    let mean = ys.iter().sum::<f64>() / ys.len() as f64;
    let f_lo = 2.0 / span;
    let f_hi = xs.len() as f64 / (4.0 * span);
    let n_grid = 4000;
    let mut best = (0.0, span / 2.0);
    for i in 0..=n_grid {
        let f = f_lo * (f_hi / f_lo).powf(i as f64 / n_grid as f64);
        let (mut c, mut s) = (0.0, 0.0);
        for (x, y) in xs.iter().zip(ys) {
            let (sn, cs) = (TAU * f * x).sin_cos();
            c += (y - mean) * cs;
            s += (y - mean) * sn;
        }
        let power = c * c + s * s;
        if power > best.0 {
            best = (power, 1.0 / f);
        }
    }
    best.1
}

pub const SPECTRUM_PARAM_NAMES: [&str; 5] = ["nu_fsr_GHz", "kappa_wg_2pi_GHz", "kappa_sc_2pi_GHz", "phase", "amplitude"];

fn spectrum_model(p: &[f64]) -> SpectrumModel {
    SpectrumModel {
        nu_fsr: p[0],
        kappa_wg: units::ghz(p[1]),
        kappa_sc: units::ghz(p[2]),
        global_phase: p[3],
        global_amplitude: p[4],
    }
}

/// Joint fit of the sum and difference spectra (ν in GHz). Runs at least
/// eight starts and keeps the best.
pub fn fit_spectrum(nus: &[f64], sum_ys: &[f64], diff_ys: &[f64], sigma: Option<f64>) -> Result<SpectrumFit> {
    use std::f64::consts::{FRAC_PI_2, PI, TAU};
    check_lengths(nus, sum_ys, None)?;
    check_lengths(nus, diff_ys, None)?;
    if nus.len() < 10 {
        return Err(Error::Data("need at least 10 spectrum points".into()));
    }
    if let Some(s) = sigma {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::Data("sigma must be positive".into()));
        }
    }
    let w = 1.0 / sigma.unwrap_or(1.0);

    let lo = nus.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = nus.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    let s_max = sum_ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let s_min = sum_ys.iter().cloned().fold(f64::INFINITY, f64::min);
    let flat_sum = s_max - s_min <= 1e-9 * s_max.abs().max(1e-300);

    let fsr0 = dominant_period(nus, diff_ys);

    // Cavity width from the sum dip; far-off baseline sets the amplitude.
    let half = 0.5 * (s_max + s_min);
    let below: Vec<f64> = nus
        .iter()
        .zip(sum_ys)
        .filter(|(_, &s)| s <= half)
        .map(|(&n, _)| n)
        .collect();
    let width = if below.len() >= 2 {
        (below[below.len() - 1] - below[0]).max(span / nus.len() as f64)
    } else {
        span / 4.0
    };
    let kappa0 = if flat_sum { span / 4.0 } else { width };
    // On resonance the sum falls from A(1 + r_V²)/2 to A r_V², with
    // r_V = |1 − 2k|; k and 1 − k are both tried.
    let depth = ((s_max - s_min) / s_max.max(1e-300)).clamp(0.0, 1.0);
    let r_v = ((1.0 - depth) / (1.0 + depth)).sqrt();
    let kk = (0.5 * (1.0 - r_v)).clamp(0.02, 0.49);

    let residuals = |p: &[f64]| -> Vec<f64> {
        let m = spectrum_model(p);
        let mut r = Vec::with_capacity(2 * nus.len());
        for (i, &nu) in nus.iter().enumerate() {
            let (s, d) = m.evaluate(nu);
            r.push((s - sum_ys[i]) * w);
            r.push((d - diff_ys[i]) * w);
        }
        r
    };
    let opts = LmOptions {
        weighted: sigma.is_some(),
        max_iterations: 400,
        ..LmOptions::default()
    };
    let mut fits = Vec::new();
    for &k_start in &[kk, 1.0 - kk] {
        for q in 0..4 {
            let phase = q as f64 * FRAC_PI_2;
            let rv = 1.0 - 2.0 * k_start;
            let amp = 2.0 * s_max / (1.0 + rv * rv);
            let p0 = [fsr0, kappa0 * k_start, kappa0 * (1.0 - k_start), phase, amp];
            if let Ok(f) = levenberg_marquardt(residuals, &p0, &opts) {
                fits.push(f);
            }
        }
    }
    let n_starts = 8;
    let normalize = |mut f: FitResult| {
        // A negative amplitude is the same fit with the phase shifted by π.
        if f.params[4] < 0.0 {
            f.params[4] = -f.params[4];
            f.params[3] += PI;
        }
        f.params[3] = f.params[3].rem_euclid(TAU);
        f
    };
    let mut fits: Vec<FitResult> = fits
        .into_iter()
        .filter(|f| f.params[0] > 0.0 && f.params[1] > 0.0 && f.params[2] >= 0.0)
        .map(normalize)
        .collect();
    if fits.is_empty() {
        return Err(Error::NonConvergence("no spectrum fit start converged".into()));
    }
    fits.sort_by(|a, b| a.cost().total_cmp(&b.cost()));
    let best = fits[0].clone();
    let m = 2 * nus.len();
    let s2 = if sigma.is_some() {
        1.0
    } else {
        best.cost() / (m - 5).max(1) as f64
    };
    let sig = best.sigmas();
    let ambiguous = fits[1..].iter().any(|f| {
        let comparable = f.cost() - best.cost() <= s2.max(1e-24 * best.cost().max(1.0));
        comparable
            && f.params.iter().zip(&best.params).enumerate().any(|(i, (a, b))| {
                let mut d = (a - b).abs();
                if i == 3 {
                    d = d.min(TAU - d);
                }
                d > sig[i].max(1e-9 * b.abs().max(1e-12))
            })
    }) || best.singular;

    let model = spectrum_model(&best.params);
    let (kwg, ksc) = (best.params[1], best.params[2]);
    let kappa = kwg + ksc;
    let k = kwg / kappa;
    let c = &best.covariance;
    // Gradient of k with respect to (κ_wg, κ_sc).
    let g = [ksc / (kappa * kappa), -kwg / (kappa * kappa)];
    let var_k = g[0] * g[0] * c[(1, 1)] + 2.0 * g[0] * g[1] * c[(1, 2)] + g[1] * g[1] * c[(2, 2)];
    Ok(SpectrumFit {
        result: best,
        model,
        k,
        k_sigma: var_k.max(0.0).sqrt(),
        n_starts,
        ambiguous,
        flat_sum,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal, Poisson};
    use std::f64::consts::PI;

    #[test]
    fn lm_solves_linear_problem_exactly() {
        // y = 2x + 1 through 3 points; covariance from s² (JᵀJ)⁻¹ with s = 0.
        let xs = [0.0, 1.0, 2.0];
        let r = |p: &[f64]| xs.iter().map(|x| p[0] * x + p[1] - (2.0 * x + 1.0)).collect();
        let f = levenberg_marquardt(r, &[0.0, 0.0], &LmOptions::default()).unwrap();
        assert!(f.converged);
        assert_relative_eq!(f.params[0], 2.0, max_relative = 1e-10);
        assert_relative_eq!(f.params[1], 1.0, max_relative = 1e-10);
    }

    #[test]
    fn lm_covariance_matches_ols() {
        // Unweighted straight line: cov = s² (XᵀX)⁻¹.
        let xs: Vec<f64> = (0..6).map(|i| i as f64).collect();
        let ys = [0.1, 1.9, 4.2, 5.8, 8.1, 9.9];
        let r = |p: &[f64]| xs.iter().zip(&ys).map(|(x, y)| p[0] * x + p[1] - y).collect();
        let f = levenberg_marquardt(r, &[1.0, 0.0], &LmOptions::default()).unwrap();
        let n = 6.0;
        let sx: f64 = xs.iter().sum();
        let sxx: f64 = xs.iter().map(|x| x * x).sum();
        let det = n * sxx - sx * sx;
        let s2 = f.cost() / 4.0;
        assert_relative_eq!(f.covariance[(0, 0)], s2 * n / det, max_relative = 1e-6);
        assert_relative_eq!(f.covariance[(1, 1)], s2 * sxx / det, max_relative = 1e-6);
    }

    #[test]
    fn exponential_noiseless_recovery() {
        let ts: Vec<f64> = (0..200).map(|i| i as f64 * 0.1).collect();
        let ys: Vec<f64> = ts.iter().map(|t| 5.0 * (-t / 3.0).exp()).collect();
        let f = fit_exponential(&ts, &ys, 1.0, None).unwrap();
        assert!(f.result.converged);
        assert!((f.tau - 3.0).abs() < 3e-8, "{}", f.tau);
        assert!((f.result.params[0] - 5.0).abs() < 1e-6 * 5.0);
        assert!(f.result.params[2].abs() < 1e-6);
    }

    #[test]
    fn exponential_needs_points() {
        let ts = [0.0, 1.0, 2.0, 3.0, 4.0];
        let ys = [5.0, 3.0, 2.0, 1.0, 0.5];
        assert!(fit_exponential(&ts, &ys, 2.0, None).is_err());
        assert!(fit_exponential(&ts, &ys[..4], 0.0, None).is_err());
    }

    fn poisson_decay(rng: &mut ChaCha8Rng, tau: f64) -> (Vec<f64>, Vec<f64>) {
        // ~10⁴ counts in the window over 0.1 ns bins, small flat background.
        let ts: Vec<f64> = (0..250).map(|i| i as f64 * 0.1).collect();
        let amp = 10_000.0 * 0.1 / tau;
        let ys = ts
            .iter()
            .map(|t| {
                let mean = amp * (-t / tau).exp() + 2.0;
                Poisson::new(mean).unwrap().sample(rng)
            })
            .collect();
        (ts, ys)
    }

    #[test]
    fn exponential_poisson_within_three_sigma() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut inside = 0;
        for _ in 0..100 {
            let (ts, ys) = poisson_decay(&mut rng, 3.0);
            let sig = poisson_sigmas(&ys);
            let f = fit_exponential(&ts, &ys, 1.0, Some(&sig)).unwrap();
            assert!(f.result.converged);
            inside += ((f.tau - 3.0).abs() <= 3.0 * f.tau_sigma) as usize;
        }
        assert!(inside >= 95, "{inside}");
    }

    #[test]
    fn exponential_gaussian_coverage() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let ts: Vec<f64> = (0..120).map(|i| i as f64 * 0.2).collect();
        let noise = Normal::new(0.0, 0.05).unwrap();
        let (mut in1, mut in2) = (0, 0);
        let trials = 200;
        for _ in 0..trials {
            let ys: Vec<f64> = ts
                .iter()
                .map(|t| 5.0 * (-t / 3.0).exp() + 0.2 + noise.sample(&mut rng))
                .collect();
            let f = fit_exponential(&ts, &ys, 1.0, Some(&vec![0.05; ts.len()])).unwrap();
            let z = (f.tau - 3.0).abs() / f.tau_sigma;
            in1 += (z <= 1.0) as usize;
            in2 += (z <= 2.0) as usize;
        }
        let c1 = in1 as f64 / trials as f64;
        let c2 = in2 as f64 / trials as f64;
        assert!((0.60..=0.78).contains(&c1), "1σ coverage {c1}");
        assert!(c2 >= 0.90, "2σ coverage {c2}");
    }

    #[test]
    fn lifetime_to_cooperativity_chain() {
        let ts: Vec<f64> = (0..300).map(|i| i as f64 * 0.1).collect();
        let ys: Vec<f64> = ts.iter().map(|t| 800.0 * (-t / 3.0).exp() + 1.0).collect();
        let f = fit_exponential(&ts, &ys, 1.0, None).unwrap();
        let est = crate::params::cooperativity_from_lifetime(units::ns(f.tau), 1.0 / units::ns(26.0)).unwrap();
        assert!((est.eta - 23.0 / 3.0).abs() < 1e-6);
    }

    #[test]
    fn sinusoid_exact_recovery() {
        let xs: Vec<f64> = (0..50).map(|i| i as f64 * 2.0 * PI / 50.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 + 1.5 * (x - 0.7).cos()).collect();
        let f = fit_sinusoid(&xs, &ys, None).unwrap();
        assert!((f.offset - 3.0).abs() < 1e-10);
        assert!((f.amplitude - 1.5).abs() < 1e-10);
        assert!((f.phase - 0.7).abs() < 1e-10);
        assert_relative_eq!(f.visibility, 0.5, max_relative = 1e-10);
    }

    #[test]
    fn sinusoid_guards() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64 * 0.1).collect();
        let ys = vec![1.0; 10];
        assert!(fit_sinusoid(&xs, &ys, None).is_err());
        let xs: Vec<f64> = (0..40).map(|i| i as f64 * 2.0 * PI / 40.0).collect();
        let flat = vec![2.0; 40];
        let f = fit_sinusoid(&xs, &flat, None).unwrap();
        assert!(!f.phase_defined);
    }

    #[test]
    fn sinusoid_phase_difference_from_model_fringes() {
        // Output intensity of a lossless interferometer with reflection r.
        let gamma = units::mhz(6.0);
        let r_atom = crate::linres::reflection_lossless(7.7, 0.0, gamma).unwrap();
        let r_empty = crate::linres::reflection_lossless(0.0, 0.0, gamma).unwrap();
        let xs: Vec<f64> = (0..72).map(|i| i as f64 * 2.0 * PI / 72.0).collect();
        let fringe = |r: num_complex::Complex64| -> Vec<f64> {
            xs.iter()
                .map(|&x| 0.25 * (r + num_complex::Complex64::from_polar(1.0, x)).norm_sqr())
                .collect()
        };
        let a = fit_sinusoid(&xs, &fringe(r_atom), None).unwrap();
        let e = fit_sinusoid(&xs, &fringe(r_empty), None).unwrap();
        let diff = wrap_pi(a.phase - e.phase).abs();
        assert!((diff / PI - 1.0).abs() < 0.02);
        assert!((e.visibility - 1.0).abs() < 1e-10);
    }

    fn spectrum_data(model: &SpectrumModel, nus: &[f64]) -> (Vec<f64>, Vec<f64>) {
        nus.iter().map(|&n| model.evaluate(n)).unzip()
    }

    fn device_model() -> SpectrumModel {
        SpectrumModel {
            global_phase: 0.4,
            global_amplitude: 1.3,
            ..SpectrumModel::device()
        }
    }

    fn grid() -> Vec<f64> {
        (0..=400).map(|i| -100.0 + 0.5 * i as f64).collect()
    }

    #[test]
    fn spectrum_noiseless_recovery() {
        let nus = grid();
        let truth = device_model();
        let (s, d) = spectrum_data(&truth, &nus);
        let f = fit_spectrum(&nus, &s, &d, None).unwrap();
        let want = [33.0, 20.3, 5.2, 0.4, 1.3];
        for (got, w) in f.result.params.iter().zip(&want) {
            assert!((got - w).abs() <= 1e-6 * w, "{:?}", f.result.params);
        }
        assert!(!f.ambiguous);
        assert!(f.n_starts >= 8);
    }

    #[test]
    fn spectrum_noisy_k() {
        let nus = grid();
        let truth = device_model();
        let (s, d) = spectrum_data(&truth, &nus);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let noise = Normal::new(0.0, 0.01 * truth.global_amplitude).unwrap();
        let s: Vec<f64> = s.iter().map(|v| v + noise.sample(&mut rng)).collect();
        let d: Vec<f64> = d.iter().map(|v| v + noise.sample(&mut rng)).collect();
        let f = fit_spectrum(&nus, &s, &d, Some(0.01 * truth.global_amplitude)).unwrap();
        assert!((f.k - 0.8).abs() < 0.02, "k = {} ± {}", f.k, f.k_sigma);
        assert!(f.k_sigma > 0.0 && f.k_sigma < 0.02);
    }

    #[test]
    fn spectrum_without_loss_is_flagged() {
        let nus = grid();
        let truth = SpectrumModel {
            kappa_sc: 0.0,
            ..device_model()
        };
        let (s, d) = spectrum_data(&truth, &nus);
        let f = fit_spectrum(&nus, &s, &d, None).unwrap();
        assert!(f.flat_sum);
    }
}
