//! `semc` command-line harness: run samplers, build reference answers and
//! compare the two.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

mod config;
mod dataset;
mod output;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};

use semc::evidence::{reference_free_energy_enumeration, reference_free_energy_quadrature};
use semc::metrics::wasserstein1;
use semc::problems::bimodal_marginal_histogram;
use semc::samplers::{run_sampler, RemcConfig, SamplerConfig};
use semc::Problem;

use config::{
    apply_preset, apply_sizes, check_sampler, default_threads, output_root, sampler_named, ExhaustiveSize, Preset,
    ProblemConfig, RunConfig, SizeOverrides,
};
use dataset::{build_problem, save_dataset, BuiltProblem};
use output::{
    collect_results, read_json, rung_summaries, sample_histograms, write_diagnostics_csv, write_histograms_csv,
    write_json, write_samples_csv, NamedHistogram, ReferenceDoc, ResultDoc, REFERENCE_JSON, RESULT_JSON,
    SCHEMA_VERSION,
};

#[derive(Parser)]
#[command(name = "semc", version, about = "Tempered MCMC samplers and free-energy benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one (problem, sampler, size) cell for one or more trials.
    Run(RunArgs),
    /// Compute the reference free energy and histograms for a problem.
    Reference(ReferenceArgs),
    /// Tabulate results against a reference: mean |dF'|, mean W1, mean wall time.
    Compare(CompareArgs),
}

#[derive(Args, Default)]
struct ProblemArgs {
    /// TOML run configuration; flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// bimodal, spectral-k3, spectral-k10, exhaustive-desk or exhaustive-full.
    #[arg(long)]
    problem: Option<String>,
    /// Directory holding data.csv and data.json to use instead of generating data.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Seed of the generated dataset.
    #[arg(long)]
    data_seed: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to S (SEMC) or L (REMC), capped at the core count.
    #[arg(long)]
    threads: Option<usize>,
    /// Histogram bin width.
    #[arg(long)]
    bin_width: Option<f64>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: ProblemArgs,
    /// semc, remc, smcs or waste-free-smc.
    #[arg(long)]
    sampler: Option<String>,
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    /// Samples per rung (REMC: burn-in and sample iterations).
    #[arg(long = "T")]
    t: Option<usize>,
    /// Parallel chains (SEMC) or resampled ancestors (waste-free SMC).
    #[arg(long = "S")]
    s: Option<usize>,
    /// REMC rung count.
    #[arg(long = "L")]
    l: Option<usize>,
    /// Kernel steps per particle (SMCS) or chain length (waste-free SMC).
    #[arg(long = "n")]
    n: Option<usize>,
    /// Independent trials with seeds seed, seed + 1, ...
    #[arg(long)]
    trials: Option<usize>,
}

#[derive(Args)]
struct ReferenceArgs {
    #[command(flatten)]
    common: ProblemArgs,
    /// Long REMC run: iterations for burn-in and for sampling.
    #[arg(long = "T", default_value_t = 100_000)]
    t: usize,
    /// Long REMC run: rung count.
    #[arg(long = "L", default_value_t = 50)]
    l: usize,
}

#[derive(Args)]
struct CompareArgs {
    /// reference.json or the directory holding it.
    #[arg(long)]
    reference: PathBuf,
    /// result.json files or directories searched for them.
    #[arg(required = true)]
    results: Vec<PathBuf>,
    /// Directory for comparison.csv and comparison.txt.
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

type Outcome = Result<(), Failure>;

trait Classify<T> {
    fn usage(self) -> Result<T, Failure>;
    fn runtime(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn usage(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Usage(e.into()))
    }
    fn runtime(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Runtime(e.into()))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Reference(a) => cmd_reference(a),
        Command::Compare(a) => cmd_compare(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

/// Config file, then preset, then explicit flags.
fn resolve_config(common: &ProblemArgs, sampler: Option<&str>, default_sampler: &str) -> anyhow::Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => {
            let problem = common.problem.as_deref().ok_or_else(|| anyhow!("either --config or --problem is required"))?;
            RunConfig {
                problem: ProblemConfig::named(problem)?,
                sampler: sampler_named(sampler.unwrap_or(default_sampler))?,
                seed: 0,
                trials: 1,
                output: None,
                histogram: None,
            }
        }
    };
    if common.config.is_some() {
        if let Some(p) = &common.problem {
            cfg.problem = ProblemConfig::named(p)?;
        }
        if let Some(s) = sampler {
            cfg.sampler = sampler_named(s)?;
        }
    }
    match &mut cfg.problem {
        ProblemConfig::Spectral { dataset, data_seed, .. } | ProblemConfig::Exhaustive { dataset, data_seed, .. } => {
            if let Some(d) = &common.dataset {
                *dataset = Some(d.clone());
            }
            if let Some(s) = common.data_seed {
                *data_seed = s;
            }
        }
        ProblemConfig::Bimodal { .. } => {
            if common.dataset.is_some() || common.data_seed.is_some() {
                anyhow::bail!("the bimodal problem has no dataset");
            }
        }
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.output = Some(out.clone());
    }
    if let Some(w) = common.bin_width {
        cfg.histogram = Some(config::HistogramConfig { bin_width: w });
    }
    if !(cfg.bin_width() > 0.0) {
        anyhow::bail!("histogram bin width must be positive");
    }
    Ok(cfg)
}

fn thread_pool(threads: Option<usize>, sampler: &SamplerConfig) -> anyhow::Result<rayon::ThreadPool> {
    let n = match threads {
        Some(0) => anyhow::bail!("--threads must be at least 1"),
        Some(n) => n,
        None => default_threads(sampler),
    };
    Ok(rayon::ThreadPoolBuilder::new().num_threads(n).build()?)
}

fn problem_slug(cfg: &ProblemConfig) -> &'static str {
    match cfg {
        ProblemConfig::Bimodal { .. } => "bimodal",
        ProblemConfig::Spectral { .. } => "spectral",
        ProblemConfig::Exhaustive { size: ExhaustiveSize::Desk, .. } => "exhaustive-desk",
        ProblemConfig::Exhaustive { size: ExhaustiveSize::Full, .. } => "exhaustive-full",
    }
}

fn create_dir(dir: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

fn cmd_run(a: RunArgs) -> Outcome {
    let mut cfg = resolve_config(&a.common, a.sampler.as_deref(), "semc").usage()?;
    if let Some(p) = a.preset {
        apply_preset(&mut cfg, p);
    }
    apply_sizes(&mut cfg, &SizeOverrides { t: a.t, s: a.s, l: a.l, n: a.n });
    if let Some(t) = a.trials {
        cfg.trials = t;
    }
    if cfg.trials == 0 {
        return Err(Failure::Usage(anyhow!("trials must be at least 1")));
    }
    check_sampler(&cfg.sampler).usage()?;
    let problem = build_problem(&cfg.problem).usage()?;
    let pool = thread_pool(a.common.threads, &cfg.sampler).usage()?;

    let leaf = format!("{}-{}-seed{}", problem_slug(&cfg.problem), sampler_slug(&cfg.sampler), cfg.seed);
    let out = output_root(a.common.out.as_deref(), cfg.output.as_deref(), &leaf);
    create_dir(&out).runtime()?;
    save_dataset(&problem, &out).runtime()?;
    let mut resolved = toml::to_string_pretty(&cfg).runtime()?;
    resolved.insert_str(0, "# resolved configuration of this run\n");
    std::fs::write(out.join("config.toml"), resolved).runtime()?;

    for trial in 0..cfg.trials {
        let seed = cfg.seed + trial as u64;
        let dir = if cfg.trials == 1 { out.clone() } else { out.join(format!("trial-{trial:02}")) };
        create_dir(&dir).runtime()?;
        let result = pool.install(|| run_sampler(problem.as_dyn(), &cfg.sampler, seed)).runtime()?;
        let n = problem.as_dyn().data_size();
        let doc = ResultDoc {
            schema_version: SCHEMA_VERSION,
            problem: cfg.problem.clone(),
            problem_label: result.problem.clone(),
            sampler: cfg.sampler.clone(),
            seed,
            data_size: n,
            free_energy: result.free_energy,
            wall_time: result.wall_time,
            ladder: result.ladder.clone(),
            exchange_rates: result.exchange_rates.clone(),
            metropolis_rates: result.metropolis_rates.clone(),
            rungs: rung_summaries(&result, n).runtime()?,
            histograms: sample_histograms(&problem, &result, cfg.bin_width()).runtime()?,
        };
        write_json(&dir.join(RESULT_JSON), &doc).runtime()?;
        write_samples_csv(&dir.join("samples_rung_final.csv"), &problem.coordinate_names(), &result).runtime()?;
        write_histograms_csv(&dir.join("histograms.csv"), &doc.histograms).runtime()?;
        write_diagnostics_csv(&dir.join("diagnostics.csv"), &result).runtime()?;
        println!(
            "{} {} seed {seed}: F' = {:.4}, {} rungs, {:.2} s -> {}",
            doc.problem_label,
            result.sampler.as_str(),
            doc.free_energy,
            doc.ladder.len(),
            doc.wall_time,
            dir.display()
        );
    }
    Ok(())
}

fn sampler_slug(cfg: &SamplerConfig) -> String {
    match cfg {
        SamplerConfig::Semc(c) => format!("semc-T{}-S{}{}", c.t, c.s, if c.exchange { "" } else { "-noexch" }),
        SamplerConfig::Remc(c) => format!("remc-L{}-T{}", c.l, c.samples),
        SamplerConfig::Smcs(c) => format!("smcs-T{}-n{}", c.t, c.n),
        SamplerConfig::WasteFreeSmc(c) => format!("waste-free-smc-S{}-n{}", c.s, c.n),
    }
}

fn cmd_reference(a: ReferenceArgs) -> Outcome {
    let cfg = resolve_config(&a.common, None, "remc").usage()?;
    let problem = build_problem(&cfg.problem).usage()?;
    let out = output_root(a.common.out.as_deref(), cfg.output.as_deref(), &format!("reference-{}", problem_slug(&cfg.problem)));
    let width = cfg.bin_width();

    let doc = match &problem {
        BuiltProblem::Bimodal(p) => ReferenceDoc {
            schema_version: SCHEMA_VERSION,
            problem: cfg.problem.clone(),
            problem_label: p.label().to_string(),
            method: "quadrature".into(),
            free_energy: reference_free_energy_quadrature(p, 512).runtime()?,
            sampler: None,
            seed: None,
            histograms: vec![NamedHistogram { name: "theta1".into(), histogram: bimodal_marginal_histogram(&p.spec, width).runtime()? }],
        },
        BuiltProblem::Exhaustive(p) if p.spec.p <= 20 => ReferenceDoc {
            schema_version: SCHEMA_VERSION,
            problem: cfg.problem.clone(),
            problem_label: p.label().to_string(),
            method: "enumeration".into(),
            free_energy: reference_free_energy_enumeration(p).runtime()?,
            sampler: None,
            seed: None,
            histograms: vec![],
        },
        _ => {
            let remc = SamplerConfig::Remc(RemcConfig { l: a.l, burn_in: a.t, samples: a.t, ..RemcConfig::default() });
            check_sampler(&remc).usage()?;
            let pool = thread_pool(a.common.threads, &remc).usage()?;
            let result = pool.install(|| run_sampler(problem.as_dyn(), &remc, cfg.seed)).runtime()?;
            ReferenceDoc {
                schema_version: SCHEMA_VERSION,
                problem: cfg.problem.clone(),
                problem_label: result.problem.clone(),
                method: "remc".into(),
                free_energy: result.free_energy,
                sampler: Some(remc),
                seed: Some(cfg.seed),
                histograms: sample_histograms(&problem, &result, width).runtime()?,
            }
        }
    };
    create_dir(&out).runtime()?;
    save_dataset(&problem, &out).runtime()?;
    write_json(&out.join(REFERENCE_JSON), &doc).runtime()?;
    write_histograms_csv(&out.join("histograms.csv"), &doc.histograms).runtime()?;
    println!("{} reference ({}): F' = {:.6} -> {}", doc.problem_label, doc.method, doc.free_energy, out.display());
    Ok(())
}

#[derive(Default)]
struct Group {
    trials: usize,
    abs_df: f64,
    w1: f64,
    w1_count: usize,
    wall: f64,
}

fn cmd_compare(a: CompareArgs) -> Outcome {
    let ref_path = if a.reference.is_dir() { a.reference.join(REFERENCE_JSON) } else { a.reference.clone() };
    let reference: ReferenceDoc = read_json(&ref_path).usage()?;
    let files = collect_results(&a.results).usage()?;
    if files.is_empty() {
        return Err(Failure::Usage(anyhow!("no result.json found")));
    }
    let mut groups: BTreeMap<String, Group> = BTreeMap::new();
    for path in &files {
        let doc: ResultDoc = read_json(path).usage()?;
        if doc.problem_label != reference.problem_label {
            return Err(Failure::Usage(anyhow!(
                "{} is a {} result but the reference is for {}",
                path.display(),
                doc.problem_label,
                reference.problem_label
            )));
        }
        let mut w1s = Vec::new();
        for h in &doc.histograms {
            let Some(r) = reference.histograms.iter().find(|r| r.name == h.name) else { continue };
            if !h.histogram.same_binning(&r.histogram) {
                return Err(Failure::Usage(anyhow!(
                    "{}: histogram {} uses bin width {} but the reference uses {}",
                    path.display(),
                    h.name,
                    h.histogram.bin_width,
                    r.histogram.bin_width
                )));
            }
            w1s.push(wasserstein1(&h.histogram, &r.histogram).usage()?);
        }
        let g = groups.entry(sampler_slug(&doc.sampler)).or_default();
        g.trials += 1;
        g.abs_df += (doc.free_energy - reference.free_energy).abs();
        g.wall += doc.wall_time;
        if !w1s.is_empty() {
            g.w1 += w1s.iter().sum::<f64>() / w1s.len() as f64;
            g.w1_count += 1;
        }
    }

    let rows: Vec<[String; 5]> = groups
        .iter()
        .map(|(name, g)| {
            let t = g.trials as f64;
            let w1 = if g.w1_count > 0 { format!("{:.6}", g.w1 / g.w1_count as f64) } else { String::new() };
            [name.clone(), g.trials.to_string(), format!("{:.6}", g.abs_df / t), w1, format!("{:.3}", g.wall / t)]
        })
        .collect();
    let header = ["sampler", "trials", "mean_abs_dF", "mean_W1", "mean_wall_time_s"];
    let mut text = format!("reference {} ({}): F' = {:.6}\n", reference.problem_label, reference.method, reference.free_energy);
    let widths: Vec<usize> =
        (0..5).map(|c| rows.iter().map(|r| r[c].len()).chain([header[c].len()]).max().unwrap_or(0)).collect();
    for row in std::iter::once(header.map(String::from)).chain(rows.iter().cloned()) {
        let line: Vec<String> = row.iter().zip(&widths).map(|(v, w)| format!("{v:>w$}")).collect();
        let _ = writeln!(text, "{}", line.join("  ").trim_end());
    }
    print!("{text}");
    if let Some(dir) = &a.out {
        create_dir(dir).runtime()?;
        let mut w = csv::Writer::from_path(dir.join("comparison.csv")).runtime()?;
        w.write_record(header).runtime()?;
        for r in &rows {
            w.write_record(r).runtime()?;
        }
        w.flush().runtime()?;
        std::fs::write(dir.join("comparison.txt"), &text).runtime()?;
    }
    Ok(())
}
