use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Subcommand};
use cmi_core::engine::delta_diagnostic;
use cmi_core::mc::{
    anticoncentration_probe, invariance_probe, render_table, run_table, AnticoncentrationEstimate, Case,
    InvarianceReport, Noise, ProbeNoise, TableSpec,
};
use cmi_core::{AdaptiveTest, DeltaDiagnostic, TestConfig, TestResult};
use serde::{Deserialize, Serialize};

use crate::config::{resolve, TestFlags, SEED_ENV};
use crate::error::{CliError, CliResult, EXIT_ACCEPT, EXIT_REJECT};
use crate::input::read_sample;

fn input_path(csv: Option<PathBuf>, from_file: Option<PathBuf>) -> CliResult<PathBuf> {
    csv.or(from_file)
        .ok_or_else(|| CliError::Usage("no input CSV given (pass a path or set \"input\" in --config)".into()))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> CliResult<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let path = dir.join(name);
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
    Ok(path)
}

fn env_seed_value(env_seed: Option<&str>) -> CliResult<Option<u64>> {
    env_seed
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("{SEED_ENV} must be an unsigned 64-bit integer, got '{s}'")))
        })
        .transpose()
}

/// Contents of `result.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestOutput {
    pub input: PathBuf,
    pub config: TestConfig,
    pub result: TestResult,
}

fn summary(out: &TestOutput) -> String {
    let r = &out.result;
    let c = &out.config;
    let v = &r.resolved;
    let top = &r.per_triple[r.argmax];
    let mut s = String::new();
    let _ = writeln!(
        s,
        "method {}, alpha {}, beta {}, B {}, seed {}",
        r.method.name(),
        c.alpha,
        c.beta,
        c.bootstrap_draws,
        c.seed
    );
    let _ = writeln!(
        s,
        "n = {}, d = {}, p = {}, {} bandwidths in [{:.4}, {:.4}], |S| = {}",
        v.n,
        v.d,
        v.p,
        v.bandwidths.len(),
        v.h_min,
        v.h_max,
        v.index_set_size
    );
    let _ = writeln!(s, "statistic {:.6} at point {}, moment {}, h = {:.4}", r.statistic, top.i + 1, top.m + 1, top.h);
    let _ = writeln!(s, "critical value {:.6} at level {:.4}", r.critical_value, r.critical_level);
    if let Some(sel) = &r.s_rms {
        let _ = writeln!(s, "RMS kept {} of {} triples", sel.len(), v.index_set_size);
    }
    if let (Some(t), Some(u)) = (r.t_quantile, r.u_draw) {
        let _ = writeln!(s, "randomized cutoff {t:.6} (U = {u:.6})");
    }
    if !r.diagnostics.degenerate_variance.is_empty() {
        let _ = writeln!(s, "warning: {} triples had their variance floored", r.diagnostics.degenerate_variance.len());
    }
    let _ = writeln!(s, "decision: {}", if r.reject { "reject" } else { "do not reject" });
    s
}

pub fn test(csv: Option<PathBuf>, flags: &TestFlags, out: Option<PathBuf>, env_seed: Option<&str>) -> CliResult<i32> {
    let eff = resolve(flags, env_seed)?;
    let input = input_path(csv, eff.input)?;
    let sample = read_sample(&input)?;
    let result = AdaptiveTest::new(eff.config.clone())?.run(&sample)?;
    let output = TestOutput { input, config: eff.config, result };
    let dir = out.or(eff.out).unwrap_or_else(|| PathBuf::from("."));
    let path = write_json(&dir, "result.json", &output)?;
    print!("{}", summary(&output));
    println!("written {}", path.display());
    Ok(if output.result.reject { EXIT_REJECT } else { EXIT_ACCEPT })
}

#[derive(Debug, Args)]
pub struct McArgs {
    /// Sample size.
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 1000)]
    pub reps: usize,
    /// Bootstrap draws [default: 1000 for n <= 250, else 500].
    #[arg(long = "B", value_name = "B")]
    pub bootstrap_draws: Option<usize>,
    /// Master seed [env: CMI_SEED; default 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated case ids.
    #[arg(long, value_delimiter = ',', value_parser = clap::value_parser!(u8).range(1..=4), default_value = "1,2,3,4")]
    pub cases: Vec<u8>,
    /// Directory for table.json and table.txt.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

pub fn mc(args: &McArgs, env_seed: Option<&str>) -> CliResult<i32> {
    if args.reps == 0 {
        return Err(CliError::Usage("--reps must be at least 1".into()));
    }
    let seed = match args.seed {
        Some(s) => s,
        None => env_seed_value(env_seed)?.unwrap_or(0),
    };
    let draws = args.bootstrap_draws.unwrap_or(if args.n <= 250 { 1000 } else { 500 });
    let mut cases = Vec::new();
    for &id in &args.cases {
        let case = Case::from_id(id)?;
        if !cases.contains(&case) {
            cases.push(case);
        }
    }
    let spec = TableSpec {
        n: args.n,
        reps: args.reps,
        bootstrap_draws: draws,
        master_seed: seed,
        cases,
        noises: vec![Noise::NORMAL, Noise::MIXTURE],
    };
    let table = run_table(&spec)?;
    write_json(&args.out, "table.json", &table)?;
    let text = render_table(&table);
    let txt = args.out.join("table.txt");
    std::fs::write(&txt, &text).map_err(|e| CliError::io(&txt, e))?;
    print!("{text}");
    Ok(0)
}

#[derive(Debug, Clone, Serialize)]
struct DiagOutput<'a> {
    input: &'a Path,
    config: &'a TestConfig,
    n: usize,
    index_set_size: usize,
    diagnostic: DeltaDiagnostic,
}

pub fn diag(csv: Option<PathBuf>, flags: &TestFlags, env_seed: Option<&str>) -> CliResult<i32> {
    let eff = resolve(flags, env_seed)?;
    if eff.config.beta <= 0.0 {
        return Err(CliError::Usage(
            "the size diagnostic bounds the randomized test and is undefined for beta = 0; pass --beta > 0".into(),
        ));
    }
    let input = input_path(csv, eff.input)?;
    let sample = read_sample(&input)?;
    let cfg = &eff.config;
    let prepared = AdaptiveTest::new(cfg.clone())?.prepare(&sample)?;
    let d = delta_diagnostic(&prepared.statistic.smoothed, &prepared.cov, sample.p(), cfg.beta, cfg.alpha)?;
    let report =
        DiagOutput { input: &input, config: cfg, n: sample.n(), index_set_size: prepared.index.len(), diagnostic: d };
    println!("{}", serde_json::to_string_pretty(&report)?);
    println!("delta           {:.6e}", d.delta);
    println!("b               {:.6e}", d.b);
    println!("F_hat           {:.6e}", d.f_hat);
    println!("guarantee_ratio {:.6e}", d.guarantee_ratio);
    if d.guarantee_ratio < 1.0 {
        println!("PASS: the finite-sample size guarantee holds at alpha = {}", cfg.alpha);
    } else {
        println!("WARN: guarantee ratio {:.3} >= 1; the size guarantee is not established", d.guarantee_ratio);
    }
    Ok(0)
}

fn parse_probe_noise(s: &str) -> Result<ProbeNoise, String> {
    match s {
        "rademacher" => Ok(ProbeNoise::Rademacher),
        "gaussian" => Ok(ProbeNoise::Gaussian),
        _ => Err(format!("noise must be rademacher or gaussian, got '{s}'")),
    }
}

#[derive(Debug, Subcommand)]
pub enum ProbeKind {
    /// Density of the maximum of M standard normals above its median.
    Anticoncentration {
        #[arg(long = "M", value_name = "M", default_value_t = 100)]
        m: usize,
        #[arg(long, default_value_t = 200_000)]
        reps: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Gap between smoothed maxima under non-Gaussian and Gaussian noise.
    Invariance {
        #[arg(long, default_value_t = 100)]
        n: usize,
        /// Number of linear forms.
        #[arg(long, default_value_t = 20)]
        forms: usize,
        #[arg(long, default_value_t = 0.5)]
        beta: f64,
        #[arg(long, default_value = "rademacher", value_parser = parse_probe_noise)]
        noise: ProbeNoise,
        #[arg(long, default_value_t = 20_000)]
        reps: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Debug, Serialize)]
#[serde(tag = "probe", rename_all = "lowercase")]
enum ProbeOutput {
    Anticoncentration { seed: u64, estimate: AnticoncentrationEstimate, within_envelope: bool },
    Invariance { seed: u64, report: InvarianceReport, holds: bool },
}

pub fn probe(kind: &ProbeKind, env_seed: Option<&str>) -> CliResult<i32> {
    let fallback = env_seed_value(env_seed)?.unwrap_or(0);
    let output = match *kind {
        ProbeKind::Anticoncentration { m, reps, seed } => {
            let seed = seed.unwrap_or(fallback);
            let estimate = anticoncentration_probe(m, reps, seed)?;
            ProbeOutput::Anticoncentration { seed, within_envelope: estimate.within_envelope(), estimate }
        }
        ProbeKind::Invariance { n, forms, beta, noise, reps, seed } => {
            let seed = seed.unwrap_or(fallback);
            let report = invariance_probe(n, forms, beta, noise, reps, seed)?;
            ProbeOutput::Invariance { seed, holds: report.holds(), report }
        }
    };
    println!("{}", serde_json::to_string_pretty(&output)?);
    Ok(0)
}
