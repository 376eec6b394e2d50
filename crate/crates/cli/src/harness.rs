//! Scripted experiments: train, evaluate and certify one configuration and
//! write its per-point files and a results-table summary.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use rcert_certify::{certify_batch, BnbStatus, CertifyOptions};
use rcert_core::io::{content_hash, save_model, to_toml, ModelFile, Provenance, RunManifest};
use rcert_core::train::{
    self, clip_payments, evaluate, mean, regret_hat, std_dev, train_distilled, train_teacher,
    EvalReport, TrainConfig,
};
use rcert_core::{AuctionConfig, AuctionNet, BidProfile, Dataset, IrMode};
use serde::{Deserialize, Serialize};

use crate::tables::{cert_table, eval_table, fmt, log_table, write_csv, write_summaries, CertRow, SummaryRow};

fn default_train_profiles() -> usize {
    5000
}
fn default_eval_points() -> usize {
    1000
}
fn default_certify_points() -> usize {
    100
}

/// One experiment, read from a TOML file.
///
/// The data seed is `seed`; evaluation and certification profiles use
/// `seed + 1` and `seed + 2`, and `train.seed` is overridden by `seed` so
/// one number fixes the whole run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    pub agents: usize,
    pub items: usize,
    pub ir_mode: IrMode,
    pub relu_reg: bool,
    pub trunk: Vec<usize>,
    #[serde(default)]
    pub distill: bool,
    #[serde(default)]
    pub clip_payments: bool,
    #[serde(default = "default_train_profiles")]
    pub train_profiles: usize,
    #[serde(default = "default_eval_points")]
    pub eval_points: usize,
    #[serde(default = "default_certify_points")]
    pub certify_points: usize,
    pub seed: u64,
    /// Long-running scaling runs, skipped unless asked for.
    #[serde(default)]
    pub optional: bool,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub teacher: Option<TeacherSpec>,
    #[serde(default)]
    pub certify: CertifySpec,
    /// Reference values quoted next to the measured results.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub reference: Vec<Reference>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TeacherSpec {
    pub trunk: Vec<usize>,
    #[serde(default)]
    pub train: TrainConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CertifySpec {
    pub tolerance: f64,
    pub node_limit: usize,
    /// Agents to certify; empty means all.
    pub agents: Vec<usize>,
}

impl Default for CertifySpec {
    fn default() -> Self {
        Self {
            tolerance: 1e-4,
            node_limit: 200_000,
            agents: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Reference {
    pub agent: usize,
    pub solve_time: Option<f64>,
    pub revenue: Option<f64>,
    pub empirical_regret: Option<f64>,
    pub certified_regret: Option<f64>,
    pub ratio: Option<f64>,
}

impl ExperimentSpec {
    pub fn load(path: &Path) -> Result<ExperimentSpec> {
        let spec: ExperimentSpec =
            rcert_core::io::load_toml(path).with_context(|| format!("loading {}", path.display()))?;
        spec.validate().with_context(|| format!("invalid experiment {}", path.display()))?;
        Ok(spec)
    }

    pub fn setting(&self) -> String {
        format!("{}x{}", self.agents, self.items)
    }

    pub fn auction(&self) -> AuctionConfig {
        AuctionConfig::new(self.agents, self.items, self.trunk.clone(), self.ir_mode)
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed,
            ..self.train.clone()
        }
    }

    pub fn certify_options(&self) -> CertifyOptions {
        let mut o = CertifyOptions::default().with_tolerance(self.certify.tolerance);
        o.bnb.node_limit = self.certify.node_limit;
        o
    }

    pub fn certified_agents(&self) -> Vec<usize> {
        if self.certify.agents.is_empty() {
            (0..self.agents).collect()
        } else {
            self.certify.agents.clone()
        }
    }

    /// Variants are the 1×2 and 2×2 rows (IR with and without the stability
    /// regularizer, penalty-based IR with it) plus penalty-based scaling
    /// runs on 2×3, 3×2 and 3×3.
    pub fn validate(&self) -> Result<()> {
        let pf = self.ir_mode == IrMode::PenaltyFree;
        match (self.agents, self.items) {
            (1, 2) | (2, 2) => {
                if pf && !self.relu_reg {
                    bail!("penalty-based IR rows use the stability regularizer");
                }
            }
            (2, 3) | (3, 2) | (3, 3) => {
                if !pf || !self.relu_reg {
                    bail!("scaling runs use penalty-based IR with the stability regularizer");
                }
            }
            (n, k) => bail!("unsupported setting {n}x{k}"),
        }
        if self.relu_reg != (self.train.stability_weight > 0.0) {
            bail!(
                "relu_reg = {} but train.stability_weight = {}",
                self.relu_reg,
                self.train.stability_weight
            );
        }
        if !pf && (self.distill || self.clip_payments) {
            bail!("distill and clip_payments apply to penalty-based IR only");
        }
        if self.distill != self.teacher.is_some() {
            bail!("a [teacher] table is required exactly when distill = true");
        }
        if self.train_profiles == 0 || self.eval_points == 0 || self.certify_points == 0 {
            bail!("point counts must be positive");
        }
        if let Some(&a) = self.certify.agents.iter().find(|&&a| a >= self.agents) {
            bail!("certify agent {a} out of range");
        }
        if !(self.certify.tolerance > 0.0) {
            bail!("certify.tolerance must be positive");
        }
        self.auction().validate()?;
        self.train_config().validate()?;
        if let Some(t) = &self.teacher {
            t.train.validate()?;
        }
        Ok(())
    }
}

/// Everything a suite run produced, as written to disk.
#[derive(Debug, Clone)]
pub struct SuiteOutcome {
    pub net: AuctionNet,
    pub eval: EvalReport,
    /// Evaluation of the network before clipping, when clipping is on.
    pub eval_unclipped: Option<EvalReport>,
    pub certs: Vec<CertRow>,
    pub summary: Vec<SummaryRow>,
    pub out_dir: PathBuf,
}

struct Writer {
    dir: PathBuf,
    comment: String,
    manifest: RunManifest,
}

impl Writer {
    fn path(&mut self, name: &str) -> PathBuf {
        self.manifest.outputs.push(PathBuf::from(name));
        self.dir.join(name)
    }

    fn csv(&mut self, name: &str, (header, rows): (Vec<String>, Vec<Vec<String>>)) -> Result<()> {
        let p = self.path(name);
        write_csv(&p, &self.comment, &header, &rows)
    }

    fn model(&mut self, name: &str, net: &AuctionNet, seed: u64) -> Result<()> {
        let p = self.path(name);
        let provenance = Provenance {
            seed,
            config_hash: self.manifest.input_hash.clone(),
        };
        save_model(&p, &ModelFile { net: net.clone(), provenance })?;
        Ok(())
    }

    fn save_manifest(&self) -> Result<()> {
        self.manifest.save(&self.dir.join("manifest.toml"))?;
        Ok(())
    }
}

/// Trains, evaluates and certifies `spec`, writing into `out_dir`:
/// `manifest.toml`, `model.txt`, `train_log.csv`, `eval_points.csv`,
/// `cert_points.csv` and `summary.csv`, plus `model_unclipped.txt` and
/// `eval_unclipped.csv` when clipping and `teacher.txt` and
/// `teacher_log.csv` when distilling. Each file is written as soon as it is
/// complete, so a failure leaves the earlier results in place.
pub fn run_suite(spec: &ExperimentSpec, out_dir: &Path) -> Result<SuiteOutcome> {
    spec.validate()?;
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let spec_text = to_toml(spec)?;
    let manifest = RunManifest::new("run", spec.seed, spec_text, &[]);
    let mut w = Writer {
        dir: out_dir.to_path_buf(),
        comment: manifest.csv_comment(Path::new("manifest.toml")),
        manifest,
    };
    w.save_manifest()?;
    let result = run_inner(spec, &mut w);
    // Record whatever was written, even on failure.
    w.save_manifest()?;
    result
}

fn run_inner(spec: &ExperimentSpec, w: &mut Writer) -> Result<SuiteOutcome> {
    let (n, k) = (spec.agents, spec.items);
    let cfg = spec.train_config();
    let data = Dataset::uniform(n, k, spec.train_profiles, spec.seed);

    let started = Instant::now();
    let trained = if let Some(t) = &spec.teacher {
        let tcfg = TrainConfig {
            seed: spec.seed,
            ..t.train.clone()
        };
        let teacher_auction = AuctionConfig::new(n, k, t.trunk.clone(), IrMode::Fractional);
        let teacher = train_teacher(&teacher_auction, &tcfg, &data).context("training teacher")?;
        w.model("teacher.txt", &teacher.net, spec.seed)?;
        w.csv("teacher_log.csv", log_table(&teacher.log))?;
        train_distilled(&spec.auction(), &cfg, &data, &teacher.net).context("training student")?
    } else {
        train::train(&spec.auction(), &cfg, &data).context("training")?
    };
    eprintln!("{}: trained in {:.1}s", spec.name, started.elapsed().as_secs_f64());
    w.csv("train_log.csv", log_table(&trained.log))?;

    let eval_data = Dataset::uniform(n, k, spec.eval_points, spec.seed + 1);
    let (net, eval_unclipped) = if spec.clip_payments {
        w.model("model_unclipped.txt", &trained.net, spec.seed)?;
        // Revenue and IR violations only; the regret columns stay empty.
        let raw = evaluate(&trained.net, &eval_data.profiles, 0, cfg.misreport_lr);
        w.csv("eval_unclipped.csv", unclipped_table(&raw, n))?;
        (clip_payments(&trained.net)?, Some(raw))
    } else {
        (trained.net, None)
    };
    w.model("model.txt", &net, spec.seed)?;

    let eval = evaluate(&net, &eval_data.profiles, cfg.misreport_steps_eval, cfg.misreport_lr);
    w.csv("eval_points.csv", eval_table(&eval, n))?;

    let cert_data = Dataset::uniform(n, k, spec.certify_points, spec.seed + 2);
    let agents = spec.certified_agents();
    let points: Vec<(usize, BidProfile, usize)> = cert_data
        .profiles
        .iter()
        .enumerate()
        .flat_map(|(p, v)| agents.iter().map(move |&a| (p, v.clone(), a)))
        .collect();
    let pairs: Vec<(BidProfile, usize)> = points.iter().map(|(_, v, a)| (v.clone(), *a)).collect();
    let started = Instant::now();
    let results = certify_batch(&net, &pairs, &spec.certify_options());
    let empirical: Vec<f64> = pairs
        .par_iter()
        .map(|(v, a)| regret_hat(&net, v, *a, cfg.misreport_steps_eval, cfg.misreport_lr))
        .collect();
    eprintln!("{}: certified in {:.1}s", spec.name, started.elapsed().as_secs_f64());

    let mut certs = Vec::with_capacity(points.len());
    let mut first_error = None;
    for (((p, _, a), r), emp) in points.iter().zip(results).zip(empirical) {
        match r {
            Ok(cert) => certs.push(CertRow {
                profile: *p,
                cert,
                empirical_regret: emp,
            }),
            Err(e) if first_error.is_none() => first_error = Some(format!("profile {p}, agent {a}: {e}")),
            Err(_) => {}
        }
    }
    w.csv("cert_points.csv", cert_table(&certs, k))?;
    if let Some(e) = first_error {
        bail!("certification failed at {e}");
    }

    let summary = summarize(spec, &eval, eval_unclipped.as_ref(), &certs);
    let p = w.path("summary.csv");
    write_summaries(&p, &w.comment, &summary)?;
    Ok(SuiteOutcome {
        net,
        eval,
        eval_unclipped,
        certs,
        summary,
        out_dir: w.dir.clone(),
    })
}

fn unclipped_table(report: &EvalReport, n: usize) -> (Vec<String>, Vec<Vec<String>>) {
    let mut header = vec!["profile".to_string(), "revenue".to_string()];
    header.extend((0..n).map(|i| format!("irv_{i}")));
    let rows = report
        .revenues
        .iter()
        .enumerate()
        .map(|(p, &r)| {
            let mut row = vec![p.to_string(), fmt(r)];
            row.extend((0..n).map(|i| fmt(report.irvs[p * n + i])));
            row
        })
        .collect();
    (header, rows)
}

fn agent_column(values: &[f64], n: usize, agent: usize) -> Vec<f64> {
    values.iter().skip(agent).step_by(n).copied().collect()
}

fn irv_stats(irvs: &[f64]) -> (f64, f64, f64) {
    let r = EvalReport {
        revenue_mean: 0.0,
        revenue_std: 0.0,
        regrets: Vec::new(),
        irvs: irvs.to_vec(),
        revenues: Vec::new(),
    };
    (r.irv_rate(), r.irv_mean(), r.irv_mean_violating())
}

/// One row per agent. IR violations are those of the network before
/// clipping, which removes them by construction.
pub fn summarize(
    spec: &ExperimentSpec,
    eval: &EvalReport,
    eval_unclipped: Option<&EvalReport>,
    certs: &[CertRow],
) -> Vec<SummaryRow> {
    let n = spec.agents;
    let irv_source = eval_unclipped.unwrap_or(eval);
    (0..n)
        .map(|agent| {
            let mine: Vec<&CertRow> = certs.iter().filter(|c| c.cert.agent == agent).collect();
            let times: Vec<f64> = mine.iter().map(|c| c.cert.solve_time).collect();
            let certified: Vec<f64> = mine.iter().map(|c| c.cert.certified_regret).collect();
            let emp_at_cert: Vec<f64> = mine.iter().map(|c| c.empirical_regret).collect();
            let empirical = agent_column(&eval.regrets, n, agent);
            let have_certs = !mine.is_empty();
            let cert_mean = mean(&certified);
            let (irv_rate, irv_mean, irv_mean_violating) = irv_stats(&agent_column(&irv_source.irvs, n, agent));
            let first = agent == 0;
            let reference = spec.reference.iter().find(|r| r.agent == agent);
            let unclipped = eval_unclipped.filter(|_| first).map(|r| r.revenue_mean);
            SummaryRow {
                experiment: spec.name.clone(),
                setting: spec.setting(),
                agent,
                ir: spec.ir_mode == IrMode::Fractional,
                relu_reg: spec.relu_reg,
                clipped: spec.clip_payments,
                train_profiles: Some(spec.train_profiles as f64),
                epochs: Some(spec.train.epochs as f64),
                eval_points: Some(spec.eval_points as f64),
                certify_points: Some(spec.certify_points as f64),
                solve_time_mean: mean(&times),
                solve_time_std: std_dev(&times),
                revenue_mean: first.then_some(eval.revenue_mean),
                revenue_std: first.then_some(eval.revenue_std),
                empirical_regret_mean: mean(&empirical),
                empirical_regret_std: std_dev(&empirical),
                certified_regret_mean: cert_mean,
                certified_regret_std: std_dev(&certified),
                emp_cert_ratio: (cert_mean > 0.0).then(|| mean(&emp_at_cert) / cert_mean),
                unstable_relus_mean: have_certs
                    .then(|| mean(&mine.iter().map(|c| c.cert.unstable_relus as f64).collect::<Vec<_>>())),
                incomplete: have_certs
                    .then(|| mine.iter().filter(|c| c.cert.status != BnbStatus::Complete).count() as f64),
                max_residual: have_certs.then(|| {
                    mine.iter()
                        .map(|c| c.cert.consistency_residual)
                        .fold(0.0, f64::max)
                }),
                min_soundness_margin: have_certs.then(|| {
                    mine.iter()
                        .map(|c| c.cert.certified_regret - c.empirical_regret)
                        .fold(f64::INFINITY, f64::min)
                }),
                irv_rate: Some(irv_rate),
                irv_mean: Some(irv_mean),
                irv_mean_violating: Some(irv_mean_violating),
                revenue_unclipped: unclipped,
                revenue_drop: unclipped.map(|u| if u > 0.0 { 1.0 - eval.revenue_mean / u } else { 0.0 }),
                ref_solve_time: reference.and_then(|r| r.solve_time),
                ref_revenue: reference.and_then(|r| r.revenue),
                ref_empirical_regret: reference.and_then(|r| r.empirical_regret),
                ref_certified_regret: reference.and_then(|r| r.certified_regret),
                ref_ratio: reference.and_then(|r| r.ratio),
            }
        })
        .collect()
}

/// Spec hash used as model provenance by the standalone commands.
pub fn spec_hash(text: &str) -> String {
    content_hash([text.as_bytes()])
}

/// All `*.toml` specs in `dir`, sorted by file name.
pub fn load_dir(dir: &Path) -> Result<Vec<(PathBuf, ExperimentSpec)>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| ExperimentSpec::load(&p).map(|s| (p, s)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ExperimentSpec {
        rcert_core::io::from_toml(
            r#"
            name = "tiny"
            agents = 1
            items = 2
            ir_mode = "fractional"
            relu_reg = false
            trunk = [4]
            seed = 3
            "#,
        )
        .unwrap()
    }

    #[test]
    fn defaults_and_validation() {
        let s = tiny();
        assert_eq!((s.train_profiles, s.eval_points, s.certify_points), (5000, 1000, 100));
        s.validate().unwrap();

        let mut bad = s.clone();
        bad.relu_reg = true;
        assert!(bad.validate().is_err(), "relu_reg without a stability weight");
        let mut bad = s.clone();
        bad.clip_payments = true;
        assert!(bad.validate().is_err(), "clipping a fractional net");
        let mut bad = s.clone();
        bad.agents = 4;
        assert!(bad.validate().is_err());
        let mut bad = s;
        bad.agents = 3;
        assert!(bad.validate().is_err(), "scaling runs are penalty-based");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let r: Result<ExperimentSpec, _> = rcert_core::io::from_toml(
            "name='x'\nagents=1\nitems=2\nir_mode='fractional'\nrelu_reg=false\ntrunk=[4]\nseed=1\nbogus=1\n",
        );
        assert!(r.is_err());
    }
}
