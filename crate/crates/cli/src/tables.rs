//! CSV files written and read by the CLI and the harness.
//!
//! Every file starts with a `# manifest=<file> hash=<hex>` comment naming
//! the run manifest it belongs to. Reals use the shortest representation
//! that round-trips; missing values are empty cells.
//!
//! | file | one row per | columns |
//! |------|-------------|---------|
//! | training log | epoch | `epoch, revenue, mean_regret, max_regret, mean_irv, loss, mean_lambda, rho` |
//! | evaluation | profile | `profile, revenue, regret_<i>…, irv_<i>…` |
//! | certificates | (profile, agent) | `profile, agent, v_<j>…, b_<j>…, truthful_utility, certified_max_utility, certified_regret, empirical_regret, incumbent_regret, gap, nodes, seconds, residual, status, unstable_relus` |
//! | summary | (experiment, agent) | see [`SummaryRow`] |

use std::collections::HashMap;
use std::fs::File;
use std::io::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use rcert_certify::{BnbStatus, Certificate};
use rcert_core::train::{EvalReport, LogRow};

/// Column names of the wall-clock columns, which differ between otherwise
/// identical runs.
pub const TIMING_COLUMNS: &[&str] = &["seconds", "solve_time_mean", "solve_time_std"];

/// Shortest representation that parses back to the same value.
pub fn fmt(x: f64) -> String {
    format!("{x:?}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt).unwrap_or_default()
}

/// Writes `comment`, a header and rows.
pub fn write_csv(path: &Path, comment: &str, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    writeln!(f, "{comment}")?;
    let mut w = csv::Writer::from_writer(f);
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

/// A CSV file as header plus rows of strings, comments skipped.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Table> {
        let mut r = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_path(path)
            .with_context(|| format!("reading {}", path.display()))?;
        let header = r.headers()?.iter().map(str::to_string).collect();
        let rows = r
            .records()
            .map(|rec| rec.map(|r| r.iter().map(str::to_string).collect()))
            .collect::<Result<_, _>>()?;
        Ok(Table { header, rows })
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Rows as maps from column name to cell.
    pub fn records(&self) -> Vec<HashMap<&str, &str>> {
        self.rows
            .iter()
            .map(|r| self.header.iter().map(String::as_str).zip(r.iter().map(String::as_str)).collect())
            .collect()
    }

    /// Numeric column; empty cells are skipped.
    pub fn reals(&self, name: &str) -> Result<Vec<f64>> {
        let Some(c) = self.column(name) else {
            bail!("missing column {name}");
        };
        self.rows
            .iter()
            .filter(|r| !r[c].is_empty())
            .map(|r| r[c].parse::<f64>().with_context(|| format!("column {name}: {:?}", r[c])))
            .collect()
    }

    /// Copy with the named columns blanked.
    pub fn masked(&self, names: &[&str]) -> Table {
        let mut t = self.clone();
        for name in names {
            if let Some(c) = t.column(name) {
                for r in &mut t.rows {
                    r[c].clear();
                }
            }
        }
        t
    }
}

pub fn log_table(log: &[LogRow]) -> (Vec<String>, Vec<Vec<String>>) {
    let header = ["epoch", "revenue", "mean_regret", "max_regret", "mean_irv", "loss", "mean_lambda", "rho"]
        .map(String::from)
        .to_vec();
    let rows = log
        .iter()
        .map(|r| {
            vec![
                r.epoch.to_string(),
                fmt(r.revenue),
                fmt(r.mean_regret),
                fmt(r.max_regret),
                fmt(r.mean_irv),
                fmt(r.loss),
                fmt(r.mean_lambda),
                fmt(r.rho),
            ]
        })
        .collect();
    (header, rows)
}

pub fn eval_table(report: &EvalReport, n_agents: usize) -> (Vec<String>, Vec<Vec<String>>) {
    let mut header = vec!["profile".to_string(), "revenue".to_string()];
    header.extend((0..n_agents).map(|i| format!("regret_{i}")));
    header.extend((0..n_agents).map(|i| format!("irv_{i}")));
    let rows = report
        .revenues
        .iter()
        .enumerate()
        .map(|(p, &rev)| {
            let mut row = vec![p.to_string(), fmt(rev)];
            row.extend((0..n_agents).map(|i| fmt(report.regrets[p * n_agents + i])));
            row.extend((0..n_agents).map(|i| fmt(report.irvs[p * n_agents + i])));
            row
        })
        .collect();
    (header, rows)
}

/// A certificate with the profile index it was computed for and the
/// empirical regret found by gradient ascent at the same point.
#[derive(Debug, Clone)]
pub struct CertRow {
    pub profile: usize,
    pub cert: Certificate,
    pub empirical_regret: f64,
}

pub fn cert_table(rows: &[CertRow], n_items: usize) -> (Vec<String>, Vec<Vec<String>>) {
    let mut header = vec!["profile".to_string(), "agent".to_string()];
    header.extend((0..n_items).map(|j| format!("v_{j}")));
    header.extend((0..n_items).map(|j| format!("b_{j}")));
    header.extend(
        [
            "truthful_utility",
            "certified_max_utility",
            "certified_regret",
            "empirical_regret",
            "incumbent_regret",
            "gap",
            "nodes",
            "seconds",
            "residual",
            "status",
            "unstable_relus",
        ]
        .map(String::from),
    );
    let body = rows
        .iter()
        .map(|r| {
            let c = &r.cert;
            let mut row = vec![r.profile.to_string(), c.agent.to_string()];
            row.extend(c.profile.row(c.agent).iter().map(|&v| fmt(v)));
            row.extend(c.incumbent_misreport.iter().map(|&v| fmt(v)));
            row.extend([
                fmt(c.truthful_utility),
                fmt(c.certified_max_utility),
                fmt(c.certified_regret),
                fmt(r.empirical_regret),
                fmt(c.incumbent_regret()),
                fmt(c.gap),
                c.nodes_explored.to_string(),
                fmt(c.solve_time),
                fmt(c.consistency_residual),
                match c.status {
                    BnbStatus::Complete => "complete".to_string(),
                    BnbStatus::Incomplete => "incomplete".to_string(),
                },
                c.unstable_relus.to_string(),
            ]);
            row
        })
        .collect();
    (header, body)
}

/// One results-table line: an experiment's statistics for one agent.
/// Means and standard deviations are over the per-point files; revenue is
/// reported on the first agent's row only.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SummaryRow {
    pub experiment: String,
    /// `<n>x<k>`.
    pub setting: String,
    pub agent: usize,
    pub ir: bool,
    pub relu_reg: bool,
    pub clipped: bool,
    pub train_profiles: Option<f64>,
    pub epochs: Option<f64>,
    pub eval_points: Option<f64>,
    pub certify_points: Option<f64>,
    pub solve_time_mean: f64,
    pub solve_time_std: f64,
    pub revenue_mean: Option<f64>,
    pub revenue_std: Option<f64>,
    pub empirical_regret_mean: f64,
    pub empirical_regret_std: f64,
    pub certified_regret_mean: f64,
    pub certified_regret_std: f64,
    /// Mean empirical regret over mean certified regret, both on the
    /// certified points.
    pub emp_cert_ratio: Option<f64>,
    pub unstable_relus_mean: Option<f64>,
    pub incomplete: Option<f64>,
    pub max_residual: Option<f64>,
    /// Smallest `certified − empirical` regret over the certified points.
    pub min_soundness_margin: Option<f64>,
    pub irv_rate: Option<f64>,
    pub irv_mean: Option<f64>,
    pub irv_mean_violating: Option<f64>,
    pub revenue_unclipped: Option<f64>,
    pub revenue_drop: Option<f64>,
    pub ref_solve_time: Option<f64>,
    pub ref_revenue: Option<f64>,
    pub ref_empirical_regret: Option<f64>,
    pub ref_certified_regret: Option<f64>,
    pub ref_ratio: Option<f64>,
}

const SUMMARY_COLUMNS: &[&str] = &[
    "experiment",
    "setting",
    "agent",
    "ir",
    "relu_reg",
    "clipped",
    "train_profiles",
    "epochs",
    "eval_points",
    "certify_points",
    "solve_time_mean",
    "solve_time_std",
    "revenue_mean",
    "revenue_std",
    "empirical_regret_mean",
    "empirical_regret_std",
    "certified_regret_mean",
    "certified_regret_std",
    "emp_cert_ratio",
    "unstable_relus_mean",
    "incomplete",
    "max_residual",
    "min_soundness_margin",
    "irv_rate",
    "irv_mean",
    "irv_mean_violating",
    "revenue_unclipped",
    "revenue_drop",
    "ref_solve_time",
    "ref_revenue",
    "ref_empirical_regret",
    "ref_certified_regret",
    "ref_ratio",
];

fn yes_no(b: bool) -> String {
    if b { "yes" } else { "no" }.to_string()
}

impl SummaryRow {
    pub fn header() -> Vec<String> {
        SUMMARY_COLUMNS.iter().map(|s| s.to_string()).collect()
    }

    pub fn to_record(&self) -> Vec<String> {
        vec![
            self.experiment.clone(),
            self.setting.clone(),
            self.agent.to_string(),
            yes_no(self.ir),
            yes_no(self.relu_reg),
            yes_no(self.clipped),
            fmt_opt(self.train_profiles),
            fmt_opt(self.epochs),
            fmt_opt(self.eval_points),
            fmt_opt(self.certify_points),
            fmt(self.solve_time_mean),
            fmt(self.solve_time_std),
            fmt_opt(self.revenue_mean),
            fmt_opt(self.revenue_std),
            fmt(self.empirical_regret_mean),
            fmt(self.empirical_regret_std),
            fmt(self.certified_regret_mean),
            fmt(self.certified_regret_std),
            fmt_opt(self.emp_cert_ratio),
            fmt_opt(self.unstable_relus_mean),
            fmt_opt(self.incomplete),
            fmt_opt(self.max_residual),
            fmt_opt(self.min_soundness_margin),
            fmt_opt(self.irv_rate),
            fmt_opt(self.irv_mean),
            fmt_opt(self.irv_mean_violating),
            fmt_opt(self.revenue_unclipped),
            fmt_opt(self.revenue_drop),
            fmt_opt(self.ref_solve_time),
            fmt_opt(self.ref_revenue),
            fmt_opt(self.ref_empirical_regret),
            fmt_opt(self.ref_certified_regret),
            fmt_opt(self.ref_ratio),
        ]
    }

    /// Parses one record. Only the identifying and results-table columns are
    /// required; the rest may be absent.
    pub fn from_record(rec: &HashMap<&str, &str>) -> Result<SummaryRow> {
        let text = |k: &str| -> Result<String> {
            rec.get(k).map(|s| s.to_string()).with_context(|| format!("missing column {k}"))
        };
        let opt = |k: &str| -> Result<Option<f64>> {
            match rec.get(k) {
                None => Ok(None),
                Some(s) if s.is_empty() => Ok(None),
                Some(s) => Ok(Some(s.parse().with_context(|| format!("column {k}: {s:?}"))?)),
            }
        };
        let req = |k: &str| -> Result<f64> { opt(k)?.with_context(|| format!("missing value for {k}")) };
        let flag = |k: &str| -> Result<bool> {
            match rec.get(k).copied() {
                Some("yes") => Ok(true),
                Some("no") | Some("") | None => Ok(false),
                Some(other) => bail!("column {k}: expected yes/no, got {other:?}"),
            }
        };
        Ok(SummaryRow {
            experiment: text("experiment")?,
            setting: text("setting")?,
            agent: text("agent")?.parse().context("column agent")?,
            ir: flag("ir")?,
            relu_reg: flag("relu_reg")?,
            clipped: flag("clipped")?,
            train_profiles: opt("train_profiles")?,
            epochs: opt("epochs")?,
            eval_points: opt("eval_points")?,
            certify_points: opt("certify_points")?,
            solve_time_mean: req("solve_time_mean")?,
            solve_time_std: req("solve_time_std")?,
            revenue_mean: opt("revenue_mean")?,
            revenue_std: opt("revenue_std")?,
            empirical_regret_mean: req("empirical_regret_mean")?,
            empirical_regret_std: req("empirical_regret_std")?,
            certified_regret_mean: req("certified_regret_mean")?,
            certified_regret_std: req("certified_regret_std")?,
            emp_cert_ratio: opt("emp_cert_ratio")?,
            unstable_relus_mean: opt("unstable_relus_mean")?,
            incomplete: opt("incomplete")?,
            max_residual: opt("max_residual")?,
            min_soundness_margin: opt("min_soundness_margin")?,
            irv_rate: opt("irv_rate")?,
            irv_mean: opt("irv_mean")?,
            irv_mean_violating: opt("irv_mean_violating")?,
            revenue_unclipped: opt("revenue_unclipped")?,
            revenue_drop: opt("revenue_drop")?,
            ref_solve_time: opt("ref_solve_time")?,
            ref_revenue: opt("ref_revenue")?,
            ref_empirical_regret: opt("ref_empirical_regret")?,
            ref_certified_regret: opt("ref_certified_regret")?,
            ref_ratio: opt("ref_ratio")?,
        })
    }
}

pub fn read_summaries(path: &Path) -> Result<Vec<SummaryRow>> {
    let t = Table::read(path)?;
    t.records()
        .iter()
        .map(SummaryRow::from_record)
        .collect::<Result<_>>()
        .with_context(|| format!("parsing {}", path.display()))
}

pub fn write_summaries(path: &Path, comment: &str, rows: &[SummaryRow]) -> Result<()> {
    let body: Vec<Vec<String>> = rows.iter().map(SummaryRow::to_record).collect();
    write_csv(path, comment, &SummaryRow::header(), &body)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        let row = SummaryRow {
            experiment: "x".into(),
            setting: "2x2".into(),
            agent: 1,
            ir: true,
            solve_time_mean: 0.1 + 0.2,
            certified_regret_mean: 1e-17,
            revenue_mean: None,
            irv_rate: Some(0.05),
            ..SummaryRow::default()
        };
        write_summaries(&p, "# manifest=m.toml hash=0", std::slice::from_ref(&row)).unwrap();
        assert_eq!(read_summaries(&p).unwrap(), vec![row]);
    }

    #[test]
    fn masking_blanks_timing() {
        let t = Table {
            header: vec!["a".into(), "seconds".into()],
            rows: vec![vec!["1".into(), "0.5".into()]],
        };
        assert_eq!(t.masked(TIMING_COLUMNS).rows, vec![vec!["1".to_string(), String::new()]]);
    }
}
