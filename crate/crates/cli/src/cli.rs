//! Command-line surface. Usage errors exit with 2, runtime failures with 1.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use rcert_certify::{certify_batch, CertifyOptions};
use rcert_core::io::{
    load_dataset, load_model, load_toml, save_dataset, save_model, to_toml, ModelFile, Provenance, RunManifest,
};
use rcert_core::train::{self, clip_payments, evaluate, regret_hat, train_distilled, train_teacher, TrainConfig};
use rcert_core::{AuctionConfig, Dataset, IrMode};
use serde::Serialize;

use crate::harness::{load_dir, run_suite, ExperimentSpec};
use crate::report;
use crate::tables::{cert_table, eval_table, log_table, read_summaries, write_csv, CertRow, SummaryRow};

#[derive(Debug, Parser)]
#[command(name = "rcert", version, about = "Train and certify learned auction mechanisms")]
pub struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample uniform valuation profiles.
    GenData(GenData),
    /// Train a network from scratch.
    Train(TrainArgs),
    /// Train a penalty-based student against a teacher network.
    Distill(DistillArgs),
    /// Revenue, empirical regret and IR violations on a profile set.
    Evaluate(EvaluateArgs),
    /// Certified regret bounds on a profile set.
    Certify(CertifyArgs),
    /// Render summary files as a results table.
    Report(ReportArgs),
    /// Run experiment specs end to end.
    Run(RunArgs),
}

fn parse_ir_mode(s: &str) -> Result<IrMode, String> {
    match s {
        "fractional" => Ok(IrMode::Fractional),
        "penalty-free" => Ok(IrMode::PenaltyFree),
        _ => Err(format!("expected `fractional` or `penalty-free`, got `{s}`")),
    }
}

#[derive(Debug, Args, Serialize)]
pub struct GenData {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub k: usize,
    #[arg(long)]
    pub count: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub k: usize,
    /// Hidden widths, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub trunk: Vec<usize>,
    #[arg(long, value_parser = parse_ir_mode, default_value = "fractional")]
    pub ir_mode: IrMode,
    #[arg(long)]
    pub data: PathBuf,
    /// Training config (TOML); unset keys take their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Train with smooth heads, for use as a distillation teacher.
    #[arg(long)]
    pub teacher: bool,
    /// Clip payments of a penalty-based network before saving.
    #[arg(long)]
    pub clip: bool,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub log: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct DistillArgs {
    #[arg(long)]
    pub teacher: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub trunk: Vec<usize>,
    #[arg(long)]
    pub clip: bool,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub log: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Misreport ascent steps per (profile, agent).
    #[arg(long, default_value_t = 1000)]
    pub steps: usize,
    #[arg(long, default_value_t = 0.02)]
    pub lr: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct CertifyArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Profiles to certify.
    #[arg(long, conflicts_with_all = ["points", "seed"], required_unless_present = "points")]
    pub data: Option<PathBuf>,
    /// Number of uniform profiles to sample instead of `--data`.
    #[arg(long, requires = "seed")]
    pub points: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Certify one agent only.
    #[arg(long)]
    pub agent: Option<usize>,
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
    #[arg(long, default_value_t = 200_000)]
    pub node_limit: usize,
    /// Ascent steps for the empirical regret column.
    #[arg(long, default_value_t = 1000)]
    pub steps: usize,
    #[arg(long, default_value_t = 0.02)]
    pub lr: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ReportArgs {
    #[arg(required = true)]
    pub summaries: Vec<PathBuf>,
    /// Also write the table as CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct RunArgs {
    /// Spec files, or directories of them.
    #[arg(required = true)]
    pub specs: Vec<PathBuf>,
    /// Each experiment writes to `<out-dir>/<name>/`.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Include specs marked optional.
    #[arg(long)]
    pub include_optional: bool,
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

pub fn execute(cli: Cli) -> Result<()> {
    if let Some(t) = cli.threads {
        // Fails only if a pool already exists, which is harmless.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    match cli.command {
        Command::GenData(a) => gen_data(&a),
        Command::Train(a) => train_cmd(&a),
        Command::Distill(a) => distill(&a),
        Command::Evaluate(a) => evaluate_cmd(&a),
        Command::Certify(a) => certify_cmd(&a),
        Command::Report(a) => report_cmd(&a),
        Command::Run(a) => run_cmd(&a),
    }
}

/// Manifest stored next to `out`, and the CSV comment naming it.
fn manifest_for(out: &Path, command: &str, seed: u64, args: &impl Serialize, inputs: &[&[u8]]) -> Result<(RunManifest, PathBuf, String)> {
    let mut m = RunManifest::new(command, seed, to_toml(args)?, inputs);
    m.outputs.push(out.to_path_buf());
    let mut name = out.file_name().context("output path has no file name")?.to_os_string();
    name.push(".manifest.toml");
    let path = out.with_file_name(&name);
    let comment = m.csv_comment(Path::new(&name));
    Ok((m, path, comment))
}

#[derive(Serialize)]
struct WithConfig<'a, A> {
    args: &'a A,
    train: &'a TrainConfig,
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).with_context(|| format!("reading {}", path.display()))
}

fn load_config(path: Option<&Path>) -> Result<(TrainConfig, Vec<u8>)> {
    match path {
        Some(p) => Ok((load_toml(p).with_context(|| format!("loading {}", p.display()))?, read(p)?)),
        None => Ok((TrainConfig::default(), Vec::new())),
    }
}

fn gen_data(a: &GenData) -> Result<()> {
    let data = Dataset::uniform(a.n, a.k, a.count, a.seed);
    save_dataset(&a.out, &data)?;
    let (m, path, _) = manifest_for(&a.out, "gen-data", a.seed, a, &[])?;
    m.save(&path)?;
    Ok(())
}

fn save_trained(out: &Path, log_path: &Path, trained: &train::Trained, clip: bool, manifest: (RunManifest, PathBuf, String), seed: u64) -> Result<()> {
    let (mut m, mpath, comment) = manifest;
    let net = if clip { clip_payments(&trained.net)? } else { trained.net.clone() };
    let provenance = Provenance {
        seed,
        config_hash: m.input_hash.clone(),
    };
    save_model(out, &ModelFile { net, provenance })?;
    let (h, rows) = log_table(&trained.log);
    write_csv(log_path, &comment, &h, &rows)?;
    m.outputs.push(log_path.to_path_buf());
    m.save(&mpath)?;
    Ok(())
}

fn train_cmd(a: &TrainArgs) -> Result<()> {
    let data_bytes = read(&a.data)?;
    let data = load_dataset(&a.data)?;
    let (cfg, cfg_bytes) = load_config(a.config.as_deref())?;
    if (data.n_agents, data.n_items) != (a.n, a.k) {
        bail!("dataset is {}x{}, expected {}x{}", data.n_agents, data.n_items, a.n, a.k);
    }
    if a.clip && (a.teacher || a.ir_mode != IrMode::PenaltyFree) {
        bail!("--clip needs a penalty-free network");
    }
    let auction = AuctionConfig::new(a.n, a.k, a.trunk.clone(), a.ir_mode);
    let trained = if a.teacher {
        train_teacher(&auction, &cfg, &data)?
    } else {
        train::train(&auction, &cfg, &data)?
    };
    let manifest = manifest_for(&a.out, "train", cfg.seed, &WithConfig { args: a, train: &cfg }, &[&data_bytes, &cfg_bytes])?;
    save_trained(&a.out, &a.log, &trained, a.clip, manifest, cfg.seed)
}

fn distill(a: &DistillArgs) -> Result<()> {
    let teacher_bytes = read(&a.teacher)?;
    let teacher = load_model(&a.teacher)?.net;
    let data_bytes = read(&a.data)?;
    let data = load_dataset(&a.data)?;
    let (cfg, cfg_bytes) = load_config(a.config.as_deref())?;
    let c = &teacher.config;
    let auction = AuctionConfig::new(c.n_agents, c.n_items, a.trunk.clone(), IrMode::PenaltyFree);
    let trained = train_distilled(&auction, &cfg, &data, &teacher)?;
    let manifest = manifest_for(&a.out, "distill", cfg.seed, &WithConfig { args: a, train: &cfg }, &[&teacher_bytes, &data_bytes, &cfg_bytes])?;
    save_trained(&a.out, &a.log, &trained, a.clip, manifest, cfg.seed)
}

fn evaluate_cmd(a: &EvaluateArgs) -> Result<()> {
    let (model_bytes, data_bytes) = (read(&a.model)?, read(&a.data)?);
    let net = load_model(&a.model)?.net;
    let data = load_dataset(&a.data)?;
    net.check_bids(data.profiles.first().context("empty dataset")?)?;
    let r = evaluate(&net, &data.profiles, a.steps, a.lr);
    let (m, mpath, comment) = manifest_for(&a.out, "evaluate", data.seed, a, &[&model_bytes, &data_bytes])?;
    let (h, rows) = eval_table(&r, net.config.n_agents);
    write_csv(&a.out, &comment, &h, &rows)?;
    m.save(&mpath)?;
    println!(
        "revenue {:.6} ({:.6})  regret {:.6} (max {:.6})  irv rate {:.4}",
        r.revenue_mean,
        r.revenue_std,
        r.regret_mean(),
        r.regret_max(),
        r.irv_rate()
    );
    Ok(())
}

fn certify_cmd(a: &CertifyArgs) -> Result<()> {
    let model_bytes = read(&a.model)?;
    let net = load_model(&a.model)?.net;
    let (n, k) = (net.config.n_agents, net.config.n_items);
    let (data, data_bytes) = match (&a.data, a.points, a.seed) {
        (Some(p), _, _) => (load_dataset(p)?, read(p)?),
        (None, Some(count), Some(seed)) => (Dataset::uniform(n, k, count, seed), Vec::new()),
        _ => bail!("give --data or --points with --seed"),
    };
    if (data.n_agents, data.n_items) != (n, k) {
        bail!("dataset is {}x{}, model is {n}x{k}", data.n_agents, data.n_items);
    }
    let agents: Vec<usize> = match a.agent {
        Some(i) if i >= n => bail!("agent {i} out of range for {n} agents"),
        Some(i) => vec![i],
        None => (0..n).collect(),
    };
    let mut opts = CertifyOptions::default().with_tolerance(a.tolerance);
    opts.bnb.node_limit = a.node_limit;
    let points: Vec<(usize, _, usize)> = data
        .profiles
        .iter()
        .enumerate()
        .flat_map(|(p, v)| agents.iter().map(move |&i| (p, v.clone(), i)))
        .collect();
    let pairs: Vec<_> = points.iter().map(|(_, v, i)| (v.clone(), *i)).collect();
    let certs = certify_batch(&net, &pairs, &opts);
    let empirical: Vec<f64> = pairs.par_iter().map(|(v, i)| regret_hat(&net, v, *i, a.steps, a.lr)).collect();
    let rows = points
        .iter()
        .zip(certs)
        .zip(empirical)
        .map(|(((p, _, _), c), e)| {
            Ok(CertRow {
                profile: *p,
                cert: c?,
                empirical_regret: e,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let seed = a.seed.unwrap_or(data.seed);
    let (m, mpath, comment) = manifest_for(&a.out, "certify", seed, a, &[&model_bytes, &data_bytes])?;
    let (h, body) = cert_table(&rows, k);
    write_csv(&a.out, &comment, &h, &body)?;
    m.save(&mpath)?;
    let mean = |f: &dyn Fn(&CertRow) -> f64| rows.iter().map(f).sum::<f64>() / rows.len().max(1) as f64;
    println!(
        "certified regret {:.6}  empirical {:.6}  solve time {:.3}s",
        mean(&|r| r.cert.certified_regret),
        mean(&|r| r.empirical_regret),
        mean(&|r| r.cert.solve_time)
    );
    Ok(())
}

fn report_cmd(a: &ReportArgs) -> Result<()> {
    let mut all: Vec<SummaryRow> = Vec::new();
    let mut inputs = Vec::new();
    for p in &a.summaries {
        inputs.push(read(p)?);
        all.extend(read_summaries(p)?);
    }
    let rows = report::rows(&all);
    print!("{}", report::render(&rows));
    if let Some(out) = &a.out {
        let refs: Vec<&[u8]> = inputs.iter().map(Vec::as_slice).collect();
        let (m, mpath, comment) = manifest_for(out, "report", 0, a, &refs)?;
        report::write(out, &comment, &rows)?;
        m.save(&mpath)?;
    }
    Ok(())
}

fn run_cmd(a: &RunArgs) -> Result<()> {
    let mut specs: Vec<ExperimentSpec> = Vec::new();
    for p in &a.specs {
        if p.is_dir() {
            specs.extend(load_dir(p)?.into_iter().map(|(_, s)| s));
        } else {
            specs.push(ExperimentSpec::load(p)?);
        }
    }
    let mut summaries = Vec::new();
    for spec in specs.iter().filter(|s| a.include_optional || !s.optional) {
        let out = run_suite(spec, &a.out_dir.join(&spec.name)).with_context(|| format!("experiment {}", spec.name))?;
        summaries.extend(out.summary);
    }
    print!("{}", report::render(&report::rows(&summaries)));
    Ok(())
}
