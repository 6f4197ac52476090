//! Acceptance criteria, one line each. Exits nonzero if any criterion fails.

use std::f64::consts::{PI, TAU};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use num_complex::Complex64;
use qswitch::disorder::{average_intensity, averaged_ports_g2, DetuningDistribution};
use qswitch::fitkit::{fit_exponential, fit_sinusoid, fit_spectrum};
use qswitch::lindblad::{driven_steady_state, g2, g2_ports, HilbertConfig, Port};
use qswitch::linres::{
    interferometer_summary, phase_spectrum, port_fields_dark_port, reflection_lossless, SpectrumModel,
};
use qswitch::params::cooperativity_from_lifetime;
use qswitch::saturation::{bloch_steady_state_resonant, port_intensities, DriveField};
use qswitch::switch::{
    balanced_amplitudes, balanced_fidelity, densities_from_amplitudes, fidelities, fringe_shift,
    readout_fidelity, ReadoutModel,
};
use qswitch::{units, InterferometerConfig, SystemParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use statrs::distribution::ContinuousCDF;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn within(x: f64, target: f64, tol: f64) -> bool {
    (x - target).abs() <= tol
}

fn gamma() -> f64 {
    units::mhz(6.0)
}

fn crit1() -> Outcome {
    const TOL: f64 = 0.05;
    let est = cooperativity_from_lifetime(units::ns(3.0), gamma()).unwrap();
    let alt = cooperativity_from_lifetime(units::ns(3.0), 1.0 / units::ns(26.0)).unwrap();
    outcome(
        within(est.eta, 7.67, TOL),
        format!(
            "eta(3.0 ns, gamma = 2pi x 6 MHz) = {:.4}, want 7.67 +- {TOL} (with 1/gamma = 26 ns: {:.4})",
            est.eta, alt.eta
        ),
    )
}

fn crit2() -> Outcome {
    const TOL: f64 = 1e-3;
    let r = |eta| reflection_lossless(eta, 0.0, gamma()).unwrap();
    let (r0, r1, r77) = (r(0.0), r(1.0), r(7.7));
    let ok = (r0 - Complex64::new(-1.0, 0.0)).norm() < 1e-12
        && r1.norm() < 1e-12
        && within(r77.re, 0.770, TOL)
        && r77.im.abs() < 1e-12;
    outcome(ok, format!("r(0) = {r0:.6}, r(1) = {r1:.2e}, r(7.7) = {r77:.6}, want -1, 0, 0.770 +- {TOL}"))
}

fn crit3() -> Outcome {
    let p = SystemParams::from_cooperativity(8.0, 0.796, units::ghz(25.5), gamma()).unwrap();
    let s = interferometer_summary(&p).unwrap();
    let ok = within(s.power_ratio, 1.46, 0.03) && within(s.port1_fraction, 0.97, 0.01);
    outcome(
        ok,
        format!(
            "power ratio = {:.4} (want 1.46 +- 0.03), A fraction = {:.4} (want 0.97 +- 0.01); reflectance without atom {:.4}, bare cavity |r_u|^2 {:.4}",
            s.power_ratio, s.port1_fraction, s.reflectance_empty, s.cavity_reflectance_empty
        ),
    )
}

fn crit4() -> Outcome {
    const TOL: f64 = 0.05;
    let p = SystemParams::from_cooperativity(7.7, 0.796, units::ghz(25.5), gamma()).unwrap();
    let deltas: Vec<f64> = (0..=4000).map(|i| (-50.0 + 0.025 * i as f64) * gamma()).collect();
    let s = phase_spectrum(&p, &deltas).unwrap();
    let w = s.winding();
    let lossless_p = SystemParams::from_cooperativity(7.7, 1.0, units::ghz(25.5), gamma()).unwrap();
    let lossless = phase_spectrum(&lossless_p, &deltas).unwrap().winding();
    outcome(
        within(w, TAU, TOL) && s.is_clean(),
        format!(
            "winding over +-50 gamma = {w:.4} rad (lossless cavity {lossless:.4}), want 2pi +- {TOL} (deficit {:.4})",
            TAU - w
        ),
    )
}

fn crit5() -> Outcome {
    const TOL: f64 = 1e-5;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    let mut worst_d_abs: f64 = 0.0;
    for _ in 0..100 {
        let eta = rng.random_range(1.0..=20.0);
        let k = rng.random_range(0.6..=1.0);
        let p = SystemParams::from_cooperativity(eta, k, units::ghz(25.0), gamma()).unwrap();
        let cfg = InterferometerConfig::dark_port(k).unwrap();
        let y = 1e-3;
        let flux = DriveField::from_y(&p, &cfg, y).unwrap().photon_flux;
        let (i1, i2) = port_intensities(&p, y).unwrap();
        let lin = port_fields_dark_port(&p, 0.0, true).unwrap();
        for (got, want) in [(i1 / (i1 + i2), lin.fraction1()), ((i1 + i2) / flux, lin.total_power())] {
            worst = worst.max(((got - want) / want).abs());
        }
        worst_d_abs = worst_d_abs.max((i2 / flux - lin.power2()).abs());
    }
    outcome(
        worst <= TOL,
        format!(
            "A fraction and reflected fraction, max relative deviation over 100 draws = {worst:.2e} (<= {TOL:e}); D port per photon max abs deviation {worst_d_abs:.1e}"
        ),
    )
}

fn crit6() -> Outcome {
    const TOL: f64 = 0.01;
    let g = 1.0;
    let p = SystemParams::new(g, 80.0 * g, 20.0 * g, 0.1 * g, 0.0, 0.0).unwrap();
    let cfg = InterferometerConfig::dark_port(p.k()).unwrap();
    let h = HilbertConfig::new(10).unwrap();
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for y in [0.3, 1.0, 3.0] {
        let drive = DriveField::from_y(&p, &cfg, y).unwrap();
        let me = driven_steady_state(&p, &cfg, drive, h).unwrap().state.sigma_z();
        let cf = bloch_steady_state_resonant(p.cooperativity(), y).sigma_z;
        let rel = ((me - cf) / cf).abs();
        worst = worst.max(rel);
        parts.push(format!("Y={y}: {me:.5} vs {cf:.5}"));
    }
    outcome(worst <= TOL, format!("<sigma_z> {} ; max rel {worst:.2e}, want <= {TOL}", parts.join(", ")))
}

fn acceptance_params() -> SystemParams {
    SystemParams::from_cooperativity(8.0, 0.8, units::ghz(25.0), gamma()).unwrap()
}

fn crit7() -> Outcome {
    let p = acceptance_params();
    let cfg = InterferometerConfig::dark_port(p.k()).unwrap();
    let drive = DriveField::from_y(&p, &cfg, 0.1).unwrap();
    let h = HilbertConfig::new(6).unwrap();
    let taus: Vec<f64> = (0..=120).map(|i| units::ns(0.5 * i as f64)).collect();
    let r = g2_ports(&p, &cfg, drive, h, &[Port::A, Port::D], &taus).unwrap();
    let (a, d) = (&r[0], &r[1]);
    let (a0, d0) = (a.trace.y[0], d.trace.y[0]);
    let (a_inf, d_inf) = (*a.trace.y.last().unwrap(), *d.trace.y.last().unwrap());

    let empty = p.with_g(0.0).unwrap();
    let lit = InterferometerConfig::new(0.3, 0.4, PI / 4.0).unwrap();
    let drive0 = DriveField::from_flux(&empty, &lit, 100.0).unwrap();
    let mut flat: f64 = 0.0;
    for port in [Port::A, Port::D] {
        let r0 = g2(&empty, &lit, drive0, h, port, &taus).unwrap();
        assert!(!r0.dark);
        flat = r0.trace.y.iter().fold(flat, |m, v| m.max((v - 1.0).abs()));
    }
    let ok = a0 < 0.5
        && d0 > 2.0
        && within(a_inf, 1.0, 0.01)
        && within(d_inf, 1.0, 0.01)
        && flat <= 1e-8
        && a.truncation_ok
        && !a.dark
        && !d.dark;
    outcome(
        ok,
        format!(
            "g2_A(0) = {a0:.3e} (< 0.5), g2_D(0) = {d0:.1} (> 2), g2(60 ns) = {a_inf:.5}, {d_inf:.5} (1 +- 0.01), g=0 max|g2-1| = {flat:.1e} (<= 1e-8)"
        ),
    )
}

fn crit8() -> Outcome {
    const MC_TOL: f64 = 1e-3;
    let p = acceptance_params();
    let cfg = InterferometerConfig::dark_port(p.k()).unwrap();
    let drive = DriveField::from_y(&p, &cfg, 0.1).unwrap();
    let h = HilbertConfig::new(6).unwrap();
    let sigma = units::mhz(60.0);
    let dist = DetuningDistribution::with_default_nodes(sigma).unwrap();
    let bare = g2(&p, &cfg, drive, h, Port::A, &[0.0]).unwrap().trace.y[0];
    let avg = averaged_ports_g2(&p, &cfg, drive, h, &[Port::A], &[0.0], &dist).unwrap()[0].trace.y[0];

    let fwhm = p.purcell_rate();
    let lor = |d: f64| 1.0 / (1.0 + (2.0 * d / fwhm).powi(2));
    let quad = average_intensity(|d| Ok(lor(d)), &dist).unwrap();
    let n = 1_000_000;
    let normal = statrs::distribution::Normal::new(0.0, sigma).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mc = (0..n)
        .map(|i| lor(normal.inverse_cdf((i as f64 + rng.random::<f64>()) / n as f64)))
        .sum::<f64>()
        / n as f64;
    let rel = (quad / mc - 1.0).abs();
    outcome(
        avg > bare && rel <= MC_TOL,
        format!("averaged g2_A(0) = {avg:.4e} > bare {bare:.4e}; quadrature {quad:.6} vs Monte Carlo {mc:.6}, rel {rel:.1e} (<= {MC_TOL:e})"),
    )
}

fn crit9() -> Outcome {
    let p = SystemParams::from_cooperativity(8.0, 0.8, units::ghz(25.0), gamma()).unwrap();
    let alpha = Complex64::new(0.6f64.sqrt(), 0.0);
    let f = fidelities(&p, alpha).unwrap();
    let mut worst: f64 = 0.0;
    for r in [0.3, 0.8, 1.0] {
        for n in [0.1, 0.6, 2.0] {
            let s = densities_from_amplitudes(&balanced_amplitudes(r), Complex64::new(f64::sqrt(n), 0.0)).unwrap();
            let cf = balanced_fidelity(r, n);
            worst = worst.max((s.uncond.overlap_plus() - cf).abs());
            worst = worst.max((s.cond.overlap_minus() - cf).abs());
        }
    }
    let ok = within(f.p_cond, 0.79, 0.01) && within(f.p_uncond, 0.80, 0.01) && worst <= 1e-6;
    outcome(
        ok,
        format!(
            "|alpha|^2 = 0.6: P_cond = {:.4} (want 0.79 +- 0.01), P_uncond = {:.4} (want 0.80 +- 0.01); balanced closed form max dev {worst:.1e} (<= 1e-6)",
            f.p_cond, f.p_uncond
        ),
    )
}

fn crit10() -> Outcome {
    const TOL: f64 = 0.01;
    let delta = units::mhz(14.0);
    let at = |k: f64| {
        SystemParams::from_cooperativity(7.7, k, units::ghz(25.5), gamma())
            .unwrap()
            .with_delta(delta)
            .unwrap()
    };
    // The fringe tracks arg(r_u r_c*), the opposite sign of arg(r_c / r_u).
    let r = reflection_lossless(7.7, delta, gamma()).unwrap();
    let r0 = reflection_lossless(0.0, delta, gamma()).unwrap();
    let oracle = (r0 / r).arg().rem_euclid(TAU) / PI;
    let weak = Complex64::new(1e-3, 0.0);
    let shift = fringe_shift(&at(1.0), weak, true).unwrap() / PI;
    let device = fringe_shift(&at(0.796), weak, true).unwrap() / PI;
    let gate = fringe_shift(&at(1.0), Complex64::new(0.6f64.sqrt(), 0.0), true).unwrap() / PI;
    outcome(
        within(shift, oracle, TOL) && within(shift, 0.63, 0.15),
        format!(
            "lossless cavity, single-photon limit: shift = {shift:.4} pi vs phase oracle {oracle:.4} pi (+- {TOL} pi), measured 0.63 +- 0.15 pi; with k = 0.796 {device:.4} pi; at |alpha|^2 = 0.6 {gate:.4} pi"
        ),
    )
}

fn crit11() -> Outcome {
    const TOL: f64 = 1e-3;
    let f = readout_fidelity(&ReadoutModel::measured());
    outcome(
        within(f.f_avg, 0.984, TOL),
        format!("F = {:.5} (on {:.5}, off {:.5}), want 0.984 +- {TOL}", f.f_avg, f.f_on, f.f_off),
    )
}

fn rel_dev(got: &[f64], want: &[f64]) -> f64 {
    got.iter().zip(want).map(|(g, w)| ((g - w) / w).abs()).fold(0.0, f64::max)
}

fn crit12() -> Outcome {
    const TOL: f64 = 1e-6;
    let ts: Vec<f64> = (0..300).map(|i| i as f64 * 0.1).collect();
    let ys: Vec<f64> = ts.iter().map(|t| 5.0 * (-t / 3.0).exp() + 0.2).collect();
    let exp_dev = rel_dev(&fit_exponential(&ts, &ys, 1.0, None).unwrap().result.params, &[5.0, 3.0, 0.2]);

    let xs: Vec<f64> = (0..60).map(|i| i as f64 * TAU / 60.0).collect();
    let ys: Vec<f64> = xs.iter().map(|x| 1.0 + 0.6 * (x - 0.7).cos()).collect();
    let sin_dev = rel_dev(&fit_sinusoid(&xs, &ys, None).unwrap().result.params, &[1.0, 0.6, 0.7]);

    let truth = SpectrumModel {
        global_phase: 0.4,
        global_amplitude: 1.3,
        ..SpectrumModel::device()
    };
    let nus: Vec<f64> = (0..=400).map(|i| -100.0 + 0.5 * i as f64).collect();
    let (s, d): (Vec<f64>, Vec<f64>) = nus.iter().map(|&n| truth.evaluate(n)).unzip();
    let spec = fit_spectrum(&nus, &s, &d, None).unwrap();
    let spec_dev = rel_dev(&spec.result.params, &[33.0, 20.3, 5.2, 0.4, 1.3]);

    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let noise = Normal::new(0.0, 0.01 * truth.global_amplitude).unwrap();
    let sn: Vec<f64> = s.iter().map(|v| v + noise.sample(&mut rng)).collect();
    let dn: Vec<f64> = d.iter().map(|v| v + noise.sample(&mut rng)).collect();
    let noisy = fit_spectrum(&nus, &sn, &dn, Some(0.01 * truth.global_amplitude)).unwrap();

    let ok = exp_dev <= TOL && sin_dev <= TOL && spec_dev <= TOL && within(noisy.k, 0.80, 0.02);
    outcome(
        ok,
        format!(
            "noiseless max rel dev: exponential {exp_dev:.1e}, sinusoid {sin_dev:.1e}, spectrum {spec_dev:.1e} (<= {TOL:e}); 1% noise k = {:.4} +- {:.4} (want 0.80 +- 0.02)",
            noisy.k, noisy.k_sigma
        ),
    )
}

fn run_cli(dir: &Path, verb: &str) {
    let status = Command::new(env!("CARGO_BIN_EXE_qswitch"))
        .args(["--seed", "7", "--out"])
        .arg(dir)
        .arg(verb)
        .stdout(std::process::Stdio::null())
        .status()
        .unwrap();
    assert!(status.success(), "{verb} failed");
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn crit13() -> Outcome {
    if std::env::var_os("QSWITCH_SKIP_DETERMINISM").is_some() {
        return outcome(false, "skipped by QSWITCH_SKIP_DETERMINISM".into());
    }
    let root = Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance-determinism");
    let _ = std::fs::remove_dir_all(&root);
    let verbs = ["fig2b", "fig3", "fig4c", "spectrum-fit", "lifetime-fit", "report"];
    let mut differ = Vec::new();
    let mut n_files = 0;
    for verb in verbs {
        let (a, b) = (root.join(verb).join("a"), root.join(verb).join("b"));
        run_cli(&a, verb);
        run_cli(&b, verb);
        let (fa, fb) = (dir_bytes(&a), dir_bytes(&b));
        n_files += fa.len();
        if fa.is_empty() || fa != fb {
            differ.push(verb);
        }
    }
    outcome(
        differ.is_empty(),
        format!("{} verbs, {n_files} files compared byte for byte; differing: {differ:?}", verbs.len()),
    )
}

fn main() {
    let criteria: [fn() -> Outcome; 13] = [
        crit1, crit2, crit3, crit4, crit5, crit6, crit7, crit8, crit9, crit10, crit11, crit12, crit13,
    ];
    let mut failed = 0;
    for (i, c) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = catch_unwind(AssertUnwindSafe(c)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        failed += !o.pass as usize;
        println!(
            "{} criterion {}: {} [{:.1} s]",
            if o.pass { "PASS" } else { "FAIL" },
            i + 1,
            o.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
