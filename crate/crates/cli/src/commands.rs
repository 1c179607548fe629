use capa_core::capacity::asymptotic_capacity;
use capa_core::montecarlo::{
    ergodic_capacity_mc, mimo_positions, simulate_kl_batch, SpectralSimulator, MIMO_ELEMENT_LENGTH, MIMO_SPACING,
};
use capa_core::stats::{mean_stderr, sorted};
use capa_core::{
    avg_capacity, capacity_quadrature_oracle, eigendecompose, high_snr_asymptote, landau_count, Aperture, Error,
    GainDistribution, Method, SampleBatch, SimulationConfig, SnrConfig, SpectralDecomposition, TruncationPolicy,
};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::args::{
    CapacityArgs, CapacityMode, Command, Common, CompareArgs, EigsArgs, Format, PdfArgs, SeriesArgs,
    SimulateArgs,
};
use crate::error::{CliError, CliResult};
use crate::manifest::RunManifest;
use crate::output::{num, opt, Table};

/// Thresholds reported in the `eigs` preamble.
pub const LANDAU_THRESHOLDS: [f64; 4] = [0.1, 0.25, 0.5, 0.9];

/// A finished command: provenance, payload and the format used when `--format` is absent.
#[derive(Debug, Clone)]
pub struct Output {
    pub manifest: RunManifest,
    pub table: Table,
    pub default_format: Format,
}

pub fn execute(command: &Command) -> CliResult<Output> {
    match command {
        Command::Eigs(a) => eigs(a),
        Command::Pdf(a) => pdf(a),
        Command::Capacity(a) => capacity(a),
        Command::Compare(a) => compare(a),
        Command::Simulate(a) => simulate(a),
    }
}

pub fn common_of(command: &Command) -> &Common {
    match command {
        Command::Eigs(a) => &a.common,
        Command::Pdf(a) => &a.common,
        Command::Capacity(a) => &a.common,
        Command::Compare(a) => &a.common,
        Command::Simulate(a) => &a.common,
    }
}

struct Setup {
    aperture: Aperture,
    order: usize,
    manifest: RunManifest,
}

fn setup(name: &str, c: &Common) -> CliResult<Setup> {
    if c.user_position.len() != 3 || c.user_position.iter().any(|x| !x.is_finite()) {
        return Err(CliError::Usage("--user-position needs three finite coordinates".into()));
    }
    let aperture = Aperture::with_carrier(c.length_wl, c.fc)?;
    let order = c.order.unwrap_or_else(|| aperture.default_order());
    let mut manifest = RunManifest::new(name);
    manifest
        .set("L_wl", c.length_wl)
        .set("fc_hz", c.fc)
        .set("noise_v2m", c.noise)
        .set("seed", c.seed)
        .set("samples", c.samples as u64)
        .set("order", order as u64)
        .set("user_position_wl", c.user_position.clone());
    Ok(Setup { aperture, order, manifest })
}

fn sim_config(s: &mut Setup, c: &Common) -> SimulationConfig {
    let cfg = SimulationConfig::for_aperture(&s.aperture, c.seed, c.samples);
    s.manifest.set("kappa_bins", cfg.kappa_bins as u64).set("z_points", cfg.z_points as u64);
    cfg
}

fn check_powers(powers: &[f64]) -> CliResult<()> {
    if powers.is_empty() {
        return Err(CliError::Usage("power sweep is empty".into()));
    }
    if let Some(p) = powers.iter().find(|p| !(p.is_finite() && **p > 0.0)) {
        return Err(CliError::Usage(format!("transmit powers must be positive, got {p}")));
    }
    Ok(())
}

fn distribution(s: &mut Setup, series: SeriesArgs) -> CliResult<(SpectralDecomposition, GainDistribution)> {
    let decomp = eigendecompose(&s.aperture, s.order)?.without_eigenfunctions();
    let policy = TruncationPolicy::from(series);
    s.manifest.set("tail_tol", policy.tol).set("q_cap", policy.q_cap as u64);
    let dist = GainDistribution::from_decomposition(&decomp, &policy)?;
    Ok((decomp, dist))
}

fn describe_series(t: &mut Table, dist: &GainDistribution) {
    t.meta("retained_terms", dist.spectrum.len() as u64);
    t.meta("sigma_min", num(dist.spectrum.sigma_min()));
    t.meta("psi_terms", dist.psi.terms() as u64);
    t.meta("psi_tail_bound", num(dist.psi.tail_bound));
}

fn eigs(a: &EigsArgs) -> CliResult<Output> {
    let s = setup("eigs", &a.common)?;
    let decomp = eigendecompose(&s.aperture, s.order)?;
    let dof = decomp.dof;

    let mut t = Table::new(&["index", "epsilon", "sigma"]);
    t.meta("dof", num(dof));
    t.meta("length_m", num(s.aperture.length_m()));
    t.meta("trace", num(decomp.trace()));
    for eps in LANDAU_THRESHOLDS {
        let predicted = if dof > 1.0 { Some(landau_count(eps, dof)?) } else { None };
        t.meta(&format!("landau_count_{eps}"), opt(predicted));
        t.meta(&format!("count_above_{eps}"), decomp.count_above(eps) as u64);
    }
    for (i, (e, sg)) in decomp.eps.iter().zip(&decomp.sigma).enumerate() {
        t.push(vec![json!(i + 1), num(*e), num(*sg)]);
    }
    Ok(Output { manifest: s.manifest, table: t, default_format: Format::Csv })
}

fn pdf(a: &PdfArgs) -> CliResult<Output> {
    let c = &a.common;
    let mut s = setup("pdf", c)?;
    if a.points < 2 {
        return Err(CliError::Usage("--points must be at least 2".into()));
    }
    let (_, dist) = distribution(&mut s, a.series)?;
    let (mean, var) = dist.moments();
    let x_max = a.x_max.unwrap_or(mean + 12.0 * var.sqrt());
    if !(x_max.is_finite() && x_max > 0.0) {
        return Err(CliError::Usage(format!("--x-max must be positive, got {x_max}")));
    }
    s.manifest.set("x_max", x_max).set("points", a.points as u64).set("mc", a.mc);

    let h = x_max / (a.points - 1) as f64;
    let xs: Vec<f64> = (0..a.points).map(|i| i as f64 * h).collect();
    let values: Vec<(f64, f64)> = xs
        .par_iter()
        .map(|&x| Ok((dist.pdf(x)?, dist.cdf(x)?)))
        .collect::<Result<_, Error>>()?;

    let ecdf = if a.mc {
        let cfg = sim_config(&mut s, c);
        let batch = SpectralSimulator::new(&s.aperture, &cfg)?.batch();
        let g = sorted(&batch.gains);
        let n = g.len() as f64;
        Some(xs.iter().map(|&x| g.partition_point(|v| *v <= x) as f64 / n).collect::<Vec<_>>())
    } else {
        None
    };

    let mut t = Table::new(if a.mc { &["x", "pdf", "cdf", "ecdf_mc"] } else { &["x", "pdf", "cdf"] });
    describe_series(&mut t, &dist);
    t.meta("mean", num(mean));
    t.meta("variance", num(var));
    let integral = h * (values.iter().map(|v| v.0).sum::<f64>() - 0.5 * (values[0].0 + values[a.points - 1].0));
    t.meta("pdf_trapezoid_integral", num(integral));
    for (i, (x, (p, f))) in xs.iter().zip(&values).enumerate() {
        let mut row = vec![num(*x), num(*p), num(*f)];
        if let Some(e) = &ecdf {
            row.push(num(e[i]));
        }
        t.push(row);
    }
    Ok(Output { manifest: s.manifest, table: t, default_format: Format::Csv })
}

fn mode_name(m: CapacityMode) -> &'static str {
    match m {
        CapacityMode::All => "all",
        CapacityMode::ClosedForm => "closed-form",
        CapacityMode::Mc => "mc",
        CapacityMode::Mimo => "mimo",
        CapacityMode::Asymptote => "asymptote",
    }
}

/// Closed form, or the quadrature oracle when the closed form is outside its regime.
fn closed_form_or_oracle(dist: &GainDistribution, snr: &SnrConfig) -> CliResult<(f64, String)> {
    match avg_capacity(&dist.spectrum, &dist.psi, snr) {
        Ok(r) => Ok((r.ergodic_bits, "ok".into())),
        Err(Error::NumericalRegime(why)) => {
            let v = capacity_quadrature_oracle(&dist.spectrum, &dist.psi, snr)?;
            Ok((v, format!("oracle_fallback: {why}")))
        }
        Err(e) => Err(e.into()),
    }
}

fn capacity(a: &CapacityArgs) -> CliResult<Output> {
    let c = &a.common;
    check_powers(&a.power)?;
    let mut s = setup("capacity", c)?;
    s.manifest.set("mode", mode_name(a.mode)).set("power_w", a.power.clone());
    let want = |m: CapacityMode| a.mode == CapacityMode::All || a.mode == m;

    let needs_series = want(CapacityMode::ClosedForm) || want(CapacityMode::Asymptote);
    let dist = if needs_series { Some(distribution(&mut s, a.series)?.1) } else { None };
    let offset = match (&dist, want(CapacityMode::Asymptote)) {
        (Some(d), true) => Some(high_snr_asymptote(&d.spectrum, &d.psi)?.1),
        _ => None,
    };

    let mimo_ok = mimo_positions(&s.aperture).is_ok();
    if a.mode == CapacityMode::Mimo && !mimo_ok {
        return Err(CliError::Usage("aperture too short for the discrete-array baseline".into()));
    }
    let (capa_batch, mimo_batch) = if want(CapacityMode::Mc) || want(CapacityMode::Mimo) {
        let cfg = sim_config(&mut s, c);
        let sim = SpectralSimulator::new(&s.aperture, &cfg)?;
        if want(CapacityMode::Mimo) && mimo_ok {
            let (capa, mimo) = sim.batch_pair()?;
            (want(CapacityMode::Mc).then_some(capa), Some(mimo))
        } else {
            (Some(sim.batch()), None)
        }
    } else {
        (None, None)
    };

    let rows: Vec<Vec<Value>> = a
        .power
        .par_iter()
        .map(|&p| -> CliResult<Vec<Value>> {
            let snr = SnrConfig::from_power(p, c.noise)?;
            let (cf, status) = match &dist {
                Some(d) if want(CapacityMode::ClosedForm) => {
                    let (v, st) = closed_form_or_oracle(d, &snr)?;
                    (Some(v), st)
                }
                _ => (None, "ok".to_owned()),
            };
            let mc = |b: &Option<SampleBatch>| b.as_ref().map(|b| ergodic_capacity_mc(b, &snr)).transpose();
            let capa = mc(&capa_batch)?;
            let mimo = mc(&mimo_batch)?;
            let asym = offset.map(|o| asymptotic_capacity(snr.gamma_bar, o));
            Ok(vec![
                num(p),
                num(snr.gamma_bar),
                opt(cf),
                opt(capa.map(|v| v.0)),
                opt(capa.map(|v| v.1)),
                opt(mimo.map(|v| v.0)),
                opt(mimo.map(|v| v.1)),
                opt(asym),
                json!(status),
            ])
        })
        .collect::<CliResult<_>>()?;

    let mut t = Table::new(&[
        "P",
        "gamma_bar",
        "capacity_closed_form",
        "capacity_mc",
        "capacity_mc_stderr",
        "capacity_mimo",
        "capacity_mimo_stderr",
        "capacity_asymptote",
        "status",
    ]);
    if let Some(d) = &dist {
        describe_series(&mut t, d);
    }
    if let Some(o) = offset {
        t.meta("high_snr_slope", 1.0);
        t.meta("high_snr_offset_3db", num(o));
    }
    if mimo_batch.is_some() {
        t.meta("mimo_model", mimo_model(&s.aperture)?);
    }
    rows.into_iter().for_each(|r| t.push(r));
    Ok(Output { manifest: s.manifest, table: t, default_format: Format::Csv })
}

fn mimo_model(aperture: &Aperture) -> CliResult<Value> {
    Ok(json!({
        "elements": mimo_positions(aperture)?.len(),
        "spacing_wl": MIMO_SPACING,
        "element_length_wl": MIMO_ELEMENT_LENGTH,
        "combining": "maximum ratio, gain = element_length * sum |g(z_n)|^2",
        "field": "same spectral draw as the aperture",
    }))
}

fn compare(a: &CompareArgs) -> CliResult<Output> {
    let c = &a.common;
    check_powers(&a.power)?;
    let mut s = setup("compare", c)?;
    s.manifest.set("power_w", a.power.clone());
    let cfg = sim_config(&mut s, c);
    let (capa, mimo) = SpectralSimulator::new(&s.aperture, &cfg)?.batch_pair()?;

    let rows: Vec<Vec<Value>> = a
        .power
        .par_iter()
        .map(|&p| -> CliResult<Vec<Value>> {
            let snr = SnrConfig::from_power(p, c.noise)?;
            let (cm, cs) = ergodic_capacity_mc(&capa, &snr)?;
            let (mm, ms) = ergodic_capacity_mc(&mimo, &snr)?;
            let gap = cm - mm;
            let gap_se = cs.hypot(ms);
            let sign = if gap > 0.0 { 1 } else if gap < 0.0 { -1 } else { 0 };
            Ok(vec![
                num(p),
                num(snr.gamma_bar),
                num(cm),
                num(cs),
                num(mm),
                num(ms),
                num(gap),
                num(gap_se),
                json!(sign),
                json!(gap > 3.0 * gap_se),
            ])
        })
        .collect::<CliResult<_>>()?;

    let mut t = Table::new(&[
        "power_w",
        "gamma_bar",
        "capa_bits",
        "capa_stderr",
        "mimo_bits",
        "mimo_stderr",
        "gap_bits",
        "gap_stderr",
        "gap_sign",
        "gap_significant",
    ]);
    t.meta("mimo_model", mimo_model(&s.aperture)?);
    rows.into_iter().for_each(|r| t.push(r));
    Ok(Output { manifest: s.manifest, table: t, default_format: Format::Json })
}

fn simulate(a: &SimulateArgs) -> CliResult<Output> {
    let c = &a.common;
    let mut s = setup("simulate", c)?;
    let method = Method::from(a.method);
    s.manifest.set("method", method.to_string());
    let cfg = sim_config(&mut s, c);
    let batch = match method {
        Method::Spectral => SpectralSimulator::new(&s.aperture, &cfg)?.batch(),
        Method::Mimo => SpectralSimulator::new(&s.aperture, &cfg)?.batch_pair()?.1,
        Method::Kl => simulate_kl_batch(&eigendecompose(&s.aperture, s.order)?, &cfg)?,
    };

    let mut t = Table::new(&["index", "gain"]);
    let (mean, se) = mean_stderr(&batch.gains);
    t.meta("method", method.to_string());
    t.meta("mean", num(mean));
    t.meta("stderr", num(se));
    if method == Method::Mimo {
        t.meta("mimo_model", mimo_model(&s.aperture)?);
    }
    for (i, g) in batch.gains.iter().enumerate() {
        t.push(vec![json!(i), num(*g)]);
    }
    Ok(Output { manifest: s.manifest, table: t, default_format: Format::Csv })
}
