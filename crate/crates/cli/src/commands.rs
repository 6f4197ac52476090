use std::f64::consts::{PI, TAU};
use std::fs;

use anyhow::{bail, Context, Result};
use clap::Args;
use num_complex::Complex64;
use qswitch::disorder::{averaged_ports_g2, averaged_port_intensities, DetuningDistribution, DEFAULT_NODES};
use qswitch::fitkit::{fit_exponential, fit_spectrum, poisson_sigmas, SPECTRUM_PARAM_NAMES};
use qswitch::lindblad::{g2_ports, HilbertConfig, Port};
use qswitch::linres::{
    characterization_spectrum, interferometer_summary, phase_spectrum, port_fields, SpectrumModel,
};
use qswitch::params::cooperativity_from_lifetime;
use qswitch::saturation::{port_intensities_general, saturation_knee, DriveField};
use qswitch::switch::{fidelities, fringe_shift, readout_fidelity, ramsey_fringe, ReadoutModel};
use qswitch::trace::read_csv;
use qswitch::{units, InterferometerConfig, ParamsConfig, SystemParams, TraceSeries};

use crate::output::{Output, Record, Source};
use crate::synth;
use crate::Common;

/// Built-in profile, then the parameter file, then `--set`, then `--eta`.
fn resolve_params(c: &Common, profile: SystemParams) -> Result<SystemParams> {
    let file = match &c.params {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            ParamsConfig::parse(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => ParamsConfig::default(),
    };
    let mut flags = ParamsConfig::default();
    for kv in &c.set {
        let Some((k, v)) = kv.split_once('=') else {
            bail!("--set expects KEY=VALUE, got `{kv}`");
        };
        let v: f64 = v.trim().parse().with_context(|| format!("--set {kv}"))?;
        flags.set(k.trim(), v)?;
    }
    let p = file.merge(flags).apply(&profile)?;
    Ok(match c.eta {
        Some(eta) => p.with_cooperativity(eta)?,
        None => p,
    })
}

fn check_points(n: usize) -> Result<()> {
    if n < 2 {
        bail!("sweeps need at least 2 points, got {n}");
    }
    Ok(())
}

fn gate_alpha(c: &Common) -> Result<Complex64> {
    if !(c.alpha2.is_finite() && c.alpha2 >= 0.0) {
        bail!("--alpha2 must be a finite non-negative number, got {}", c.alpha2);
    }
    Ok(Complex64::new(c.alpha2.sqrt(), 0.0))
}

fn distribution(c: &Common, n_nodes: usize) -> Result<DetuningDistribution> {
    Ok(DetuningDistribution::new(units::mhz(c.sigma_delta), n_nodes)?)
}

fn g_source(c: &Common) -> Source {
    match c.eta {
        Some(_) => Source::Model,
        None => Source::Input,
    }
}

fn add_params(rec: &mut Record, p: &SystemParams, g_source: Source) {
    rec.add("g_2pi", units::to_mhz(p.g), "MHz", g_source);
    rec.add("kappa_wg_2pi", units::to_ghz(p.kappa_wg), "GHz", Source::Input);
    rec.add("kappa_sc_2pi", units::to_ghz(p.kappa_sc), "GHz", Source::Input);
    rec.add("gamma_2pi", units::to_mhz(p.gamma), "MHz", Source::Input);
    rec.add("delta_a_2pi", units::to_mhz(p.delta_a), "MHz", Source::Input);
    rec.add("delta_c_2pi", units::to_mhz(p.delta_c), "MHz", Source::Input);
    rec.add("eta", p.cooperativity(), "", Source::Model);
    rec.add("k", p.k(), "", Source::Model);
}

#[derive(Args, Debug)]
pub struct Fig2bArgs {
    #[arg(long, default_value_t = -300.0, allow_negative_numbers = true, value_name = "MHZ")]
    pub min: f64,
    #[arg(long, default_value_t = 300.0, allow_negative_numbers = true, value_name = "MHZ")]
    pub max: f64,
    #[arg(long, default_value_t = 1201)]
    pub points: usize,
    /// Shift of the atomic resonance from the nominal detuning origin.
    #[arg(long, default_value_t = 5.0, allow_negative_numbers = true, value_name = "MHZ")]
    pub offset: f64,
}

pub fn fig2b(c: &Common, a: &Fig2bArgs) -> Result<Output> {
    check_points(a.points)?;
    if !(a.max > a.min) {
        bail!("--max must exceed --min");
    }
    let p = resolve_params(c, SystemParams::device_default().with_cooperativity(7.7)?)?;
    let deltas_mhz = synth::linspace(a.min, a.max, a.points);
    let model_deltas: Vec<f64> = deltas_mhz.iter().map(|d| units::mhz(d - a.offset)).collect();
    let shift = |mut t: TraceSeries, tag: &str| {
        t.tag = tag.into();
        t.map_x(|x| x + a.offset)
    };

    let atom = phase_spectrum(&p, &model_deltas)?;
    let empty = phase_spectrum(&p.with_g(0.0)?, &model_deltas)?;
    if !atom.is_clean() {
        bail!(
            "phase spectrum is not resolved: {} ill-defined and {} coarse points; use more points",
            atom.ill_defined.len(),
            atom.coarse_steps.len()
        );
    }

    let cfg = InterferometerConfig::dark_port(p.k())?.with_phi_v(PI);
    let mut inset = TraceSeries::new("delta", "MHz", "a1_over_p0", "", "trace", "atom");
    for (&x, &d) in deltas_mhz.iter().zip(&model_deltas) {
        let pd = p.with_delta(d)?;
        let with = port_fields(&pd, &cfg, true)?;
        let without = port_fields(&pd, &cfg, false)?;
        inset.push(x, with.power1() / without.total_power());
    }

    let resonant = p.with_delta(0.0)?;
    let summary = interferometer_summary(&resonant)?;
    let mut rec = Record::new("fig2b");
    add_params(&mut rec, &p, Source::Model);
    rec.add("offset_2pi", a.offset, "MHz", Source::Input);
    rec.add("winding", atom.winding(), "rad", Source::Model);
    rec.add("winding_no_atom", empty.winding(), "rad", Source::Model);
    rec.add("power_ratio_resonant", summary.power_ratio, "", Source::Model);
    rec.add("port_a_fraction_resonant", summary.port1_fraction, "", Source::Model);

    let mut out = Output::new(&c.out, c.format);
    out.traces("fig2b_phase", &[shift(atom.trace, "atom"), shift(empty.trace, "no_atom")])?;
    out.traces("fig2b_inset", &[inset])?;
    out.record("fig2b_summary", &rec)?;
    Ok(out)
}

#[derive(Args, Debug)]
pub struct Fig3Args {
    /// Weak-drive parameter for the correlation functions.
    #[arg(long, default_value_t = 0.1)]
    pub y: f64,
    /// Photon-number cutoff of the master equation.
    #[arg(long = "n-max", default_value_t = 6)]
    pub n_max: usize,
    #[arg(long = "tau-max", default_value_t = 20.0, value_name = "NS")]
    pub tau_max: f64,
    #[arg(long, default_value_t = 101)]
    pub points: usize,
    /// Lowest and highest incident rate in units of Γ.
    #[arg(long = "rate-min", default_value_t = 1e-3)]
    pub rate_min: f64,
    #[arg(long = "rate-max", default_value_t = 1e2)]
    pub rate_max: f64,
    #[arg(long = "rate-points", default_value_t = 61)]
    pub rate_points: usize,
    #[arg(long, default_value_t = DEFAULT_NODES)]
    pub nodes: usize,
}

pub fn fig3(c: &Common, a: &Fig3Args) -> Result<Output> {
    check_points(a.points)?;
    check_points(a.rate_points)?;
    if !(a.rate_min > 0.0 && a.rate_max > a.rate_min) {
        bail!("need 0 < --rate-min < --rate-max");
    }
    if !(a.tau_max > 0.0) {
        bail!("--tau-max must be positive");
    }
    let p = resolve_params(c, SystemParams::device_default())?;
    let cfg = InterferometerConfig::dark_port(p.k())?;
    let dist = distribution(c, a.nodes)?;
    let big_gamma = p.purcell_rate();

    let rates = synth::logspace(a.rate_min, a.rate_max, a.rate_points);
    let mut sat_a = TraceSeries::new("rate", "Gamma", "fraction", "", "port", "A");
    let mut sat_d = TraceSeries::new("rate", "Gamma", "fraction", "", "port", "D");
    for &r in &rates {
        let flux = r * big_gamma;
        let drive = DriveField::from_flux(&p, &cfg, flux)?;
        let (i1, i2) = if c.sigma_delta == 0.0 {
            let o = port_intensities_general(&p, &cfg, &drive)?;
            (o.i1, o.i2)
        } else {
            averaged_port_intensities(&p, &cfg, &drive, &dist)?
        };
        sat_a.push(r, i1 / flux);
        sat_d.push(r, i2 / flux);
    }

    let h = HilbertConfig::new(a.n_max)?;
    let drive = DriveField::from_y(&p, &cfg, a.y)?;
    let taus: Vec<f64> = synth::linspace(0.0, a.tau_max, a.points).into_iter().map(units::ns).collect();
    let mut rec = Record::new("fig3");
    add_params(&mut rec, &p, g_source(c));
    rec.add("sigma_delta_2pi", c.sigma_delta, "MHz", Source::Input);
    rec.add("y", a.y, "", Source::Input);
    rec.add("n_max", a.n_max as f64, "", Source::Input);
    rec.add("saturation_knee", saturation_knee(&p, &cfg), "Gamma", Source::Model);

    let ports = [Port::A, Port::D];
    let bare_all = g2_ports(&p, &cfg, drive, h, &ports, &taus)?;
    if !bare_all[0].truncation_ok {
        bail!("photon-number cutoff {} too small for y = {}; raise --n-max", a.n_max, a.y);
    }
    let avg_all = averaged_ports_g2(&p, &cfg, drive, h, &ports, &taus, &dist)?;
    let mut bare = Vec::new();
    let mut averaged = Vec::new();
    for ((port, b), avg) in ports.into_iter().zip(bare_all).zip(avg_all) {
        let l = port.label();
        rec.add(&format!("g2_0_{l}"), avg.trace.y[0], "", Source::Model);
        rec.add(&format!("g2_0_{l}_no_disorder"), b.trace.y[0], "", Source::Model);
        rec.add(&format!("intensity_{l}"), avg.mean_intensity, "1/us", Source::Model);
        rec.flag(avg.dark || b.dark, &format!("dark_port_{l}"));
        bare.push(b.trace);
        averaged.push(avg.trace);
    }

    let mut out = Output::new(&c.out, c.format);
    out.traces("fig3_saturation", &[sat_a, sat_d])?;
    out.traces("fig3_g2", &averaged)?;
    out.traces("fig3_g2_no_disorder", &bare)?;
    out.record("fig3_summary", &rec)?;
    Ok(out)
}

#[derive(Args, Debug)]
pub struct Fig4cArgs {
    #[arg(long, default_value_t = 181)]
    pub points: usize,
    /// Detunings δ at which fringes are computed.
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 14.0], allow_negative_numbers = true, value_name = "MHZ")]
    pub detunings: Vec<f64>,
}

pub fn fig4c(c: &Common, a: &Fig4cArgs) -> Result<Output> {
    check_points(a.points)?;
    let p = resolve_params(c, SystemParams::device_default())?;
    let alpha = gate_alpha(c)?;
    let thetas = synth::linspace(0.0, TAU, a.points);
    let mut rec = Record::new("fig4c");
    add_params(&mut rec, &p, g_source(c));
    rec.add("alpha2", c.alpha2, "", Source::Input);
    let no_gate = c.alpha2 == 0.0;
    rec.flag(no_gate, "no_gate_photon");
    let mut traces = Vec::new();
    for &d in &a.detunings {
        let pd = p.with_delta(units::mhz(d))?;
        for conditioned in [true, false] {
            // Without gate photons there is nothing to condition on.
            let use_cond = conditioned && !no_gate;
            let mut t = ramsey_fringe(&pd, alpha, &thetas, use_cond)?;
            let label = if conditioned { "conditioned" } else { "unconditioned" };
            t.tag = format!("{label}_{d}MHz");
            let shift = fringe_shift(&pd, alpha, use_cond)?;
            rec.add(&format!("shift_{}", t.tag), shift / PI, "pi", Source::Model);
            traces.push(t);
        }
        let f = fidelities(&pd, alpha)?;
        rec.add(&format!("p_cond_{d}MHz"), f.p_cond, "", Source::Model);
        rec.add(&format!("p_uncond_{d}MHz"), f.p_uncond, "", Source::Model);
    }
    let mut out = Output::new(&c.out, c.format);
    out.traces("fig4c_fringes", &traces)?;
    out.record("fig4c_summary", &rec)?;
    Ok(out)
}

#[derive(Args, Debug)]
pub struct SpectrumFitArgs {
    /// Measured spectrum: CSV with `nu_GHz,power[,sigma],trace` rows tagged `sum` and `diff`.
    #[arg(long, value_name = "PATH")]
    pub data: Option<std::path::PathBuf>,
    /// Noise of the synthetic data relative to the global amplitude.
    #[arg(long, default_value_t = 0.01)]
    pub noise: f64,
    #[arg(long, default_value_t = 401)]
    pub points: usize,
}

struct SpectrumOutcome {
    traces: Vec<TraceSeries>,
    model: Vec<TraceSeries>,
    record: Record,
}

fn load_spectrum(path: &std::path::Path) -> Result<synth::Spectrum> {
    let text = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let traces = read_csv(&text[..])?;
    let find = |tag: &str| {
        traces
            .iter()
            .find(|t| t.tag == tag)
            .with_context(|| format!("{} has no `{tag}` trace", path.display()))
    };
    let (s, d) = (find("sum")?, find("diff")?);
    if s.x != d.x {
        bail!("sum and diff traces use different frequency grids");
    }
    let sigma = s.sigma.as_ref().map(|v| v.iter().sum::<f64>() / v.len() as f64);
    Ok(synth::Spectrum {
        nu: s.x.clone(),
        sum: s.y.clone(),
        diff: d.y.clone(),
        sigma,
    })
}

fn run_spectrum_fit(c: &Common, a: &SpectrumFitArgs, command: &str) -> Result<SpectrumOutcome> {
    check_points(a.points)?;
    let (spec, source) = match &a.data {
        Some(path) => (load_spectrum(path)?, Source::DataFit),
        None => {
            let truth = SpectrumModel {
                global_phase: 0.4,
                ..SpectrumModel::device()
            };
            let mut rng = synth::rng(c.seed);
            let nu = synth::linspace(-100.0, 100.0, a.points);
            (synth::spectrum(&truth, nu, a.noise, &mut rng)?, Source::SyntheticFit)
        }
    };
    let synth::Spectrum { nu, sum, diff, sigma } = spec;
    let fit = fit_spectrum(&nu, &sum, &diff, sigma)?;
    let mut data = vec![
        TraceSeries::new("nu", "GHz", "power", "", "trace", "sum").with_data(nu.clone(), sum),
        TraceSeries::new("nu", "GHz", "power", "", "trace", "diff").with_data(nu.clone(), diff),
    ];
    if let Some(s) = sigma {
        for t in &mut data {
            *t = t.clone().with_sigma(vec![s; nu.len()]);
        }
    }
    let (ms, md) = characterization_spectrum(&fit.model, &nu)?;

    let mut rec = Record::new(command);
    rec.flag(fit.ambiguous, "ambiguous");
    rec.flag(fit.flat_sum, "flat_sum");
    rec.flag(!fit.result.converged, "not_converged");
    if a.data.is_none() {
        rec.add("seed", c.seed as f64, "", Source::Input);
        rec.add("noise", a.noise, "", Source::Input);
    }
    let sig = fit.result.sigmas();
    let units_of = ["GHz", "GHz", "GHz", "rad", ""];
    for (i, name) in SPECTRUM_PARAM_NAMES.iter().enumerate() {
        let name = name.trim_end_matches("_GHz");
        rec.add(name, fit.result.params[i], units_of[i], source).sigma(sig[i]);
    }
    rec.add("k", fit.k, "", source).sigma(fit.k_sigma);
    rec.add("residual_norm", fit.result.residual_norm, "", source);
    Ok(SpectrumOutcome {
        traces: data,
        model: vec![ms, md],
        record: rec,
    })
}

pub fn spectrum_fit(c: &Common, a: &SpectrumFitArgs) -> Result<Output> {
    let o = run_spectrum_fit(c, a, "spectrum-fit")?;
    let mut out = Output::new(&c.out, c.format);
    out.traces("spectrum_data", &o.traces)?;
    out.traces("spectrum_model", &o.model)?;
    out.record("spectrum_fit", &o.record)?;
    Ok(out)
}

#[derive(Args, Debug)]
pub struct LifetimeFitArgs {
    /// Measured histogram: CSV with `t_ns,counts,trace` rows.
    #[arg(long, value_name = "PATH")]
    pub data: Option<std::path::PathBuf>,
    /// Lifetime of the synthetic decay.
    #[arg(long = "tau", default_value_t = 3.0, value_name = "NS")]
    pub tau: f64,
    /// Total counts in the synthetic decay.
    #[arg(long, default_value_t = 1e4)]
    pub counts: f64,
    /// Start of the fit window after the excitation pulse.
    #[arg(long = "window", default_value_t = 1.0, value_name = "NS")]
    pub window: f64,
    /// Free-space lifetime γ⁻¹ used for the cooperativity.
    #[arg(long = "free-space-lifetime", default_value_t = 26.0, value_name = "NS")]
    pub free_space_lifetime: f64,
}

pub fn lifetime_fit(c: &Common, a: &LifetimeFitArgs) -> Result<Output> {
    let (t, y, source) = match &a.data {
        Some(path) => {
            let text = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
            let traces = read_csv(&text[..])?;
            let Some(tr) = traces.into_iter().next() else {
                bail!("{} contains no data", path.display());
            };
            (tr.x, tr.y, Source::DataFit)
        }
        None => {
            if !(a.tau > 0.0 && a.counts > 0.0) {
                bail!("--tau and --counts must be positive");
            }
            let mut rng = synth::rng(c.seed);
            let d = synth::decay(a.tau, a.counts, 2.0, 0.1, 250, &mut rng)?;
            (d.t_ns, d.counts, Source::SyntheticFit)
        }
    };
    let sig = poisson_sigmas(&y);
    let fit = fit_exponential(&t, &y, a.window, Some(&sig))?;
    let est = cooperativity_from_lifetime(units::ns(fit.tau), 1.0 / units::ns(a.free_space_lifetime))?;
    let eta_sigma = fit.tau_sigma / fit.tau * est.decay_rate / (1.0 / units::ns(a.free_space_lifetime));

    let mut rec = Record::new("lifetime-fit");
    rec.flag(!fit.result.converged, "not_converged");
    rec.flag(est.below_free_space, "below_free_space");
    if a.data.is_none() {
        rec.add("seed", c.seed as f64, "", Source::Input);
        rec.add("tau_true", a.tau, "ns", Source::Input);
    }
    rec.add("window_start", a.window, "ns", Source::Input);
    rec.add("free_space_lifetime", a.free_space_lifetime, "ns", Source::Input);
    rec.add("tau", fit.tau, "ns", source).sigma(fit.tau_sigma);
    rec.add("eta", est.eta, "", source).sigma(eta_sigma);

    let p = &fit.result.params;
    let model: Vec<f64> = t.iter().map(|ti| p[0] * (-ti / p[1]).exp() + p[2]).collect();
    let mut out = Output::new(&c.out, c.format);
    out.traces(
        "lifetime_data",
        &[TraceSeries::new("t", "ns", "counts", "", "trace", "data")
            .with_data(t.clone(), y)
            .with_sigma(sig)],
    )?;
    out.traces(
        "lifetime_model",
        &[TraceSeries::new("t", "ns", "counts", "", "trace", "fit").with_data(t, model)],
    )?;
    out.record("lifetime_fit", &rec)?;
    Ok(out)
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// Measured Purcell-enhanced lifetime.
    #[arg(long = "tau", default_value_t = 3.0, value_name = "NS")]
    pub tau: f64,
    #[arg(long = "free-space-lifetime", default_value_t = 26.0, value_name = "NS")]
    pub free_space_lifetime: f64,
    /// Relative noise of the synthetic characterization spectrum.
    #[arg(long, default_value_t = 0.01)]
    pub noise: f64,
}

pub fn report(c: &Common, a: &ReportArgs) -> Result<Output> {
    let base = resolve_params(c, SystemParams::device_default())?;
    let p = match c.eta {
        Some(_) => base,
        None => base.with_cooperativity(8.0)?,
    };
    let alpha = gate_alpha(c)?;
    let mut rec = Record::new("report");

    rec.add("tau", a.tau, "ns", Source::Input);
    rec.add("free_space_lifetime", a.free_space_lifetime, "ns", Source::Input);
    let est = cooperativity_from_lifetime(units::ns(a.tau), 1.0 / units::ns(a.free_space_lifetime))?;
    rec.add("eta_from_lifetime", est.eta, "", Source::Model);
    let est_g = cooperativity_from_lifetime(units::ns(a.tau), p.gamma)?;
    rec.add("eta_from_lifetime_gamma_param", est_g.eta, "", Source::Model);

    let spec = run_spectrum_fit(
        c,
        &SpectrumFitArgs {
            data: None,
            noise: a.noise,
            points: 401,
        },
        "report",
    )?;
    rec.flags.extend(spec.record.flags.iter().map(|f| format!("spectrum_{f}")));
    for e in spec.record.entry.iter().filter(|e| e.name == "k") {
        let mut e = e.clone();
        e.name = "k_spectrum_fit".into();
        rec.entry.push(e);
    }

    add_params(&mut rec, &p, Source::Model);
    let s = interferometer_summary(&p)?;
    rec.add("reflectance_no_atom", s.reflectance_empty, "", Source::Model);
    rec.add("reflectance_atom", s.reflectance_atom, "", Source::Model);
    rec.add("cavity_reflectance_no_atom", s.cavity_reflectance_empty, "", Source::Model);
    rec.add("power_ratio", s.power_ratio, "", Source::Model);
    rec.add("port_a_fraction", s.port1_fraction, "", Source::Model);

    let cfg = InterferometerConfig::dark_port(p.k())?;
    rec.add("saturation_knee", saturation_knee(&p, &cfg), "Gamma", Source::Model);

    rec.add("alpha2", c.alpha2, "", Source::Input);
    let f = fidelities(&p, alpha)?;
    rec.add("p_cond", f.p_cond, "", Source::Model);
    rec.add("p_uncond", f.p_uncond, "", Source::Model);
    for d in [0.0, 14.0] {
        let pd = p.with_delta(units::mhz(d))?;
        let shift = fringe_shift(&pd, alpha, true)?;
        rec.add(&format!("fringe_shift_{d}MHz"), shift / PI, "pi", Source::Model);
    }

    let m = ReadoutModel::measured();
    rec.add("readout_lambda_on", m.lambda_on, "", Source::Input);
    rec.add("readout_lambda_off", m.lambda_off, "", Source::Input);
    rec.add("readout_threshold", m.threshold as f64, "", Source::Input);
    let r = readout_fidelity(&m);
    rec.add("readout_fidelity_on", r.f_on, "", Source::Model);
    rec.add("readout_fidelity_off", r.f_off, "", Source::Model);
    rec.add("readout_fidelity", r.f_avg, "", Source::Model);

    let mut out = Output::new(&c.out, c.format);
    out.record("report", &rec)?;
    Ok(out)
}
