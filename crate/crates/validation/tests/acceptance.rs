//! Acceptance criteria for the workspace.
//!
//! Each criterion prints one `[PASS]` or `[FAIL]` line followed by indented
//! diagnostics. The process exits nonzero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use capa_cli::commands::execute;
use capa_cli::output::render;
use capa_cli::{Cli, Format};
use capa_core::capacity::asymptotic_capacity;
use capa_core::gaindist::moments;
use capa_core::montecarlo::{ergodic_capacity_mc, SpectralSimulator};
use capa_core::special::EULER_GAMMA;
use capa_core::stats::{ks_statistic, sorted};
use capa_core::{
    avg_capacity, capacity_quadrature_oracle, eigendecompose, high_snr_asymptote, landau_count, Aperture,
    GainDistribution, GainSpectrum, PsiSeries, SimulationConfig, SnrConfig, TruncationPolicy,
};
use clap::Parser;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Exp1};
use serde_json::Value;

// Criterion 1
const STEP_L: f64 = 10.0;
const STEP_ORDER: usize = 128;
const STEP_PLATEAU_MIN: f64 = 0.99;
const STEP_TAIL_MAX: f64 = 1e-3;
const STEP_COUNT_RANGE: (usize, usize) = (18, 22);
const STEP_RUNTIME: Duration = Duration::from_secs(1);
// Criterion 2
const TRACE_LENGTHS: [f64; 4] = [0.5, 2.5, 10.0, 40.0];
const TRACE_REL_TOL: f64 = 1e-10;
// Criterion 3
const LANDAU_LENGTHS: [f64; 3] = [10.0, 20.0, 40.0];
const LANDAU_THRESHOLDS: [f64; 4] = [0.1, 0.25, 0.5, 0.9];
// Criterion 4
const HYPO_ABS_TOL: f64 = 1e-9;
const HYPO_X_MAX: f64 = 20.0;
const HYPO_POINTS: usize = 2001;
// Criterion 5
const DIST_L: f64 = 10.0;
const DIST_SAMPLES: usize = 1_000_000;
const DIST_KS_MAX: f64 = 0.01;
const DIST_RUNTIME: Duration = Duration::from_secs(120);
// Criterion 6
const TRIPLE_LENGTHS: [f64; 2] = [2.5, 10.0];
const TRIPLE_SNRS: [f64; 4] = [1.0, 10.0, 100.0, 1000.0];
const TRIPLE_ORACLE_TOL: f64 = 1e-5;
const TRIPLE_SAMPLES: usize = 100_000;
const TRIPLE_SIGMAS: f64 = 3.0;
// Criterion 7
const ASYM_SNR: f64 = 1e6;
const ASYM_TOL: f64 = 0.05;
const ASYM_SINGLE_TOL: f64 = 1e-9;
// Criterion 8
const COMPARE_SIGMAS: f64 = 3.0;
// Criterion 9
const REPRO_WORKERS: [usize; 3] = [1, 2, 8];
const SEED: u64 = 42;

type Check = fn() -> Verdict;

struct Verdict {
    pass: bool,
    summary: String,
    details: Vec<String>,
}

impl Verdict {
    fn new(pass: bool, summary: impl Into<String>) -> Self {
        Self { pass, summary: summary.into(), details: Vec::new() }
    }

    fn detail(mut self, d: impl Into<String>) -> Self {
        self.details.push(d.into());
        self
    }
}

fn c1_eigenvalue_step() -> Verdict {
    let ap = Aperture::new(STEP_L).unwrap();
    let t = Instant::now();
    let d = eigendecompose(&ap, STEP_ORDER).unwrap();
    let elapsed = t.elapsed();
    let (e10, e40) = (d.eps[9], d.eps[39]);
    let count = d.count_above(0.25);
    let pass = e10 > STEP_PLATEAU_MIN
        && e40 < STEP_TAIL_MAX
        && (STEP_COUNT_RANGE.0..=STEP_COUNT_RANGE.1).contains(&count)
        && elapsed < STEP_RUNTIME;
    Verdict::new(
        pass,
        format!(
            "eigenvalue step, L=10: eps_10={e10:.6} eps_40={e40:.3e} #(eps>0.25)={count} runtime={:.3}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn c2_trace_identity() -> Verdict {
    let mut worst = 0.0f64;
    let mut details = Vec::new();
    for l in TRACE_LENGTHS {
        let ap = Aperture::new(l).unwrap();
        let d = eigendecompose(&ap, ap.default_order()).unwrap();
        let rel = (d.trace() - ap.dof()).abs() / ap.dof();
        worst = worst.max(rel);
        details.push(format!("L={l}: order={} trace={} rel_err={rel:.2e}", d.eps.len(), d.trace()));
    }
    let mut v = Verdict::new(worst <= TRACE_REL_TOL, format!("trace identity: worst relative error {worst:.2e}"));
    v.details = details;
    v
}

fn c3_landau_consistency() -> Verdict {
    let mut worst_margin = f64::INFINITY;
    let mut details = Vec::new();
    for l in LANDAU_LENGTHS {
        let ap = Aperture::new(l).unwrap();
        let d = eigendecompose(&ap, ap.default_order()).unwrap();
        let bound = 2.0 + ap.dof().ln();
        for eps in LANDAU_THRESHOLDS {
            let predicted = landau_count(eps, ap.dof()).unwrap();
            let count = d.count_above(eps);
            let dev = (count as f64 - predicted).abs();
            worst_margin = worst_margin.min(bound - dev);
            details.push(format!("L={l} eps={eps}: count={count} landau={predicted:.3} |diff|={dev:.3} bound={bound:.3}"));
        }
    }
    let mut v = Verdict::new(worst_margin >= 0.0, format!("Landau count: smallest margin to bound {worst_margin:.3}"));
    v.details = details;
    v
}

fn c4_moschopoulos() -> Verdict {
    let spec = GainSpectrum::new(vec![2.0, 1.0]).unwrap();
    let dist = GainDistribution::new(spec, &TruncationPolicy::default()).unwrap();
    let mut pdf_err = 0.0f64;
    let mut cdf_err = 0.0f64;
    for i in 0..HYPO_POINTS {
        let x = HYPO_X_MAX * i as f64 / (HYPO_POINTS - 1) as f64;
        let pdf = (-x / 2.0).exp() - (-x).exp();
        let cdf = 1.0 - 2.0 * (-x / 2.0).exp() + (-x).exp();
        pdf_err = pdf_err.max((dist.pdf(x).unwrap() - pdf).abs());
        cdf_err = cdf_err.max((dist.cdf(x).unwrap() - cdf).abs());
    }

    let (sigma, d) = (1.5, 4usize);
    let equal = GainDistribution::new(GainSpectrum::new(vec![sigma; d]).unwrap(), &TruncationPolicy::default()).unwrap();
    let collapsed = equal.psi.psi.iter().skip(1).all(|&p| p == 0.0);
    let mut gamma_err = 0.0f64;
    for i in 1..=200 {
        let x = 0.15 * i as f64;
        let exact = x.powi(d as i32 - 1) * (-x / sigma).exp() / (sigma.powi(d as i32) * 6.0);
        gamma_err = gamma_err.max((equal.pdf(x).unwrap() - exact).abs() / exact);
    }

    let pass = pdf_err <= HYPO_ABS_TOL && cdf_err <= HYPO_ABS_TOL && collapsed && gamma_err < 1e-12;
    Verdict::new(
        pass,
        format!("Moschopoulos series: sigma=[2,1] max|pdf err|={pdf_err:.2e} max|cdf err|={cdf_err:.2e}; equal sigma collapses={collapsed}"),
    )
    .detail(format!("equal sigma: psi terms={} max relative Gamma(4,1.5) density error={gamma_err:.2e}", equal.psi.terms()))
}

/// Draws from the truncated model `Σ σ_ℓ E_ℓ` the closed form describes.
fn truncated_model_draws(spec: &GainSpectrum, n: usize) -> Vec<f64> {
    let mut rng = ChaCha20Rng::seed_from_u64(SEED);
    (0..n)
        .map(|_| {
            spec.sigma()
                .iter()
                .map(|s| {
                    let e: f64 = Exp1.sample(&mut rng);
                    s * e
                })
                .sum()
        })
        .collect()
}

fn c5_distribution_match() -> Verdict {
    let ap = Aperture::new(DIST_L).unwrap();
    let decomp = eigendecompose(&ap, ap.default_order()).unwrap();
    let dist = GainDistribution::from_decomposition(&decomp, &TruncationPolicy::default()).unwrap();
    let cfg = SimulationConfig::for_aperture(&ap, SEED, DIST_SAMPLES);

    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let t = Instant::now();
    let batch = pool.install(|| SpectralSimulator::new(&ap, &cfg).unwrap().batch());
    let g = sorted(&batch.gains);
    let ks = ks_statistic(&g, |x| dist.cdf(x).unwrap());
    let elapsed = t.elapsed();

    let (mc_mean, _) = capa_core::stats::mean_stderr(&batch.gains);
    let (cf_mean, _) = moments(&dist.spectrum);
    let truncated = sorted(&truncated_model_draws(&dist.spectrum, DIST_SAMPLES));
    let ks_truncated = ks_statistic(&truncated, |x| dist.cdf(x).unwrap());
    let dropped: f64 = decomp.sigma.iter().skip(dist.spectrum.len()).sum();

    Verdict::new(
        ks < DIST_KS_MAX && elapsed < DIST_RUNTIME,
        format!(
            "distribution match, L=10: KS(closed form, {DIST_SAMPLES} spectral draws)={ks:.4} runtime={:.1}s single-threaded",
            elapsed.as_secs_f64()
        ),
    )
    .detail(format!(
        "simulated mean {mc_mean:.4} vs closed-form mean {cf_mean:.4}; the {} retained modes omit sigma mass {dropped:.4}",
        dist.spectrum.len()
    ))
    .detail(format!("KS(closed form, draws of the retained-mode sum)={ks_truncated:.4}"))
}

fn c6_capacity_triple() -> Verdict {
    let mut pass = true;
    let mut worst_oracle = 0.0f64;
    let mut worst_z = 0.0f64;
    let mut details = Vec::new();
    for l in TRIPLE_LENGTHS {
        let ap = Aperture::new(l).unwrap();
        let decomp = eigendecompose(&ap, ap.default_order()).unwrap();
        let dist = GainDistribution::from_decomposition(&decomp, &TruncationPolicy::default()).unwrap();
        let cfg = SimulationConfig::for_aperture(&ap, SEED, TRIPLE_SAMPLES);
        let batch = SpectralSimulator::new(&ap, &cfg).unwrap().batch();
        for g in TRIPLE_SNRS {
            let snr = SnrConfig::from_gamma_bar(g).unwrap();
            let cf = avg_capacity(&dist.spectrum, &dist.psi, &snr).unwrap().ergodic_bits;
            let oracle = capacity_quadrature_oracle(&dist.spectrum, &dist.psi, &snr).unwrap();
            let (mc, se) = ergodic_capacity_mc(&batch, &snr).unwrap();
            let d_oracle = (cf - oracle).abs();
            let z = (cf - mc).abs() / se;
            worst_oracle = worst_oracle.max(d_oracle);
            worst_z = worst_z.max(z);
            let ok = d_oracle <= TRIPLE_ORACLE_TOL && z <= TRIPLE_SIGMAS;
            pass &= ok;
            details.push(format!(
                "L={l} gamma={g}: closed={cf:.6} oracle={oracle:.6} (|d|={d_oracle:.1e}) mc={mc:.6}±{se:.1e} ({z:.1} se) {}",
                if ok { "ok" } else { "MISS" }
            ));
        }
    }
    let mut v = Verdict::new(
        pass,
        format!("capacity triple: worst |closed-oracle|={worst_oracle:.2e} bits, worst |closed-mc|={worst_z:.1} standard errors"),
    );
    v.details = details;
    v
}

fn c7_high_snr() -> Verdict {
    let mut worst = 0.0f64;
    let mut details = Vec::new();
    for l in [2.5, 10.0] {
        let ap = Aperture::new(l).unwrap();
        let dist = GainDistribution::from_decomposition(
            &eigendecompose(&ap, ap.default_order()).unwrap(),
            &TruncationPolicy::default(),
        )
        .unwrap();
        let snr = SnrConfig::from_gamma_bar(ASYM_SNR).unwrap();
        let c = avg_capacity(&dist.spectrum, &dist.psi, &snr).unwrap().ergodic_bits;
        let (slope, offset) = high_snr_asymptote(&dist.spectrum, &dist.psi).unwrap();
        let line = asymptotic_capacity(ASYM_SNR, offset);
        worst = worst.max((c - line).abs());
        details.push(format!("L={l}: E[C]={c:.6} line={line:.6} slope={slope} offset={offset:.6}"));
    }
    let single = GainSpectrum::new(vec![1.0]).unwrap();
    let psi = PsiSeries::for_spectrum(&single, &TruncationPolicy::default()).unwrap();
    let offset1 = high_snr_asymptote(&single, &psi).unwrap().1;
    let expected = EULER_GAMMA / std::f64::consts::LN_2;
    let single_err = (offset1 - expected).abs();

    let mut v = Verdict::new(
        worst < ASYM_TOL && single_err <= ASYM_SINGLE_TOL,
        format!("high-SNR asymptote: max |E[C]-line| at 1e6 = {worst:.2e} bits; offset(sigma=[1])={offset1:.10} (err {single_err:.1e})"),
    );
    v.details = details;
    v
}

fn cli(args: &[&str]) -> Cli {
    Cli::try_parse_from(std::iter::once("capa").chain(args.iter().copied())).unwrap()
}

fn c8_capa_beats_mimo() -> Verdict {
    let out = execute(&cli(&["compare", "--L", "10"]).command).unwrap();
    let doc: Value = serde_json::from_slice(&render(&out.manifest, &out.table, Format::Json)).unwrap();
    let mut pass = true;
    let mut details = Vec::new();
    let mut min_ratio = f64::INFINITY;
    for r in doc["rows"].as_array().unwrap() {
        let gap = r["gap_bits"].as_f64().unwrap();
        let se = r["gap_stderr"].as_f64().unwrap();
        pass &= gap > 0.0 && gap > COMPARE_SIGMAS * se;
        min_ratio = min_ratio.min(gap / se);
        details.push(format!(
            "P={} W: capa={:.4} mimo={:.4} gap={gap:.4} ({:.0} se)",
            r["power_w"],
            r["capa_bits"].as_f64().unwrap(),
            r["mimo_bits"].as_f64().unwrap(),
            gap / se
        ));
    }
    let mut v = Verdict::new(
        pass,
        format!("CAPA > MIMO, L=10: {} powers, smallest gap {min_ratio:.0} combined standard errors", details.len()),
    );
    v.details = details;
    v
}

fn run_to_file(args: &[&str], workers: usize, path: &Path) -> String {
    let mut c = cli(args);
    c.threads = Some(workers);
    let path_str = path.to_str().unwrap();
    let common = match &mut c.command {
        capa_cli::Command::Eigs(a) => &mut a.common,
        capa_cli::Command::Pdf(a) => &mut a.common,
        capa_cli::Command::Capacity(a) => &mut a.common,
        capa_cli::Command::Compare(a) => &mut a.common,
        capa_cli::Command::Simulate(a) => &mut a.common,
    };
    common.out = Some(path_str.into());
    capa_cli::run(&c).unwrap();
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.contains("\"timestamp\"") && !l.starts_with("# timestamp"))
        .collect::<Vec<_>>()
        .join("\n")
}

fn c9_reproducibility() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let runs: [&[&str]; 5] = [
        &["eigs", "--L", "10"],
        &["pdf", "--L", "10", "--mc", "--samples", "20000", "--points", "401"],
        &["capacity", "--L", "10", "--samples", "20000"],
        &["compare", "--L", "10", "--samples", "20000"],
        &["simulate", "--L", "10", "--samples", "20000", "--method", "kl"],
    ];
    let mut pass = true;
    let mut details = Vec::new();
    for (k, args) in runs.iter().enumerate() {
        let reference = run_to_file(args, REPRO_WORKERS[0], &dir.path().join(format!("{k}-ref")));
        let repeat = run_to_file(args, REPRO_WORKERS[0], &dir.path().join(format!("{k}-rep")));
        let mut same = reference == repeat;
        for w in &REPRO_WORKERS[1..] {
            same &= reference == run_to_file(args, *w, &dir.path().join(format!("{k}-{w}")));
        }
        pass &= same;
        details.push(format!("{}: {} bytes, identical across repeats and workers {REPRO_WORKERS:?}: {same}", args[0], reference.len()));
    }
    let mut v = Verdict::new(pass, format!("reproducibility: {} commands under workers {REPRO_WORKERS:?}", runs.len()));
    v.details = details;
    v
}

fn main() {
    let criteria: [(&str, Check); 9] = [
        ("C1", c1_eigenvalue_step),
        ("C2", c2_trace_identity),
        ("C3", c3_landau_consistency),
        ("C4", c4_moschopoulos),
        ("C5", c5_distribution_match),
        ("C6", c6_capacity_triple),
        ("C7", c7_high_snr),
        ("C8", c8_capa_beats_mimo),
        ("C9", c9_reproducibility),
    ];
    let mut failed = Vec::new();
    for (id, check) in criteria {
        let v = catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|e| {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                Verdict::new(false, format!("panicked: {msg}"))
            });
        println!("[{}] {id} {}", if v.pass { "PASS" } else { "FAIL" }, v.summary);
        for d in &v.details {
            println!("       {d}");
        }
        if !v.pass {
            failed.push(id);
        }
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failed.len(), criteria.len());
    if !failed.is_empty() {
        println!("failed: {}", failed.join(", "));
        std::process::exit(1);
    }
}
