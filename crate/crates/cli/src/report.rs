//! Results-table rendering of summary rows.

use std::path::Path;

use anyhow::Result;

use crate::tables::{fmt, write_csv, SummaryRow};

/// One rendered line. Numbers are kept so tests can compare them exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    /// `1x2`, or `2x2 (2nd)` for a later agent.
    pub label: String,
    pub ir: bool,
    pub relu_reg: bool,
    pub solve_time: (f64, f64),
    /// First agent only.
    pub revenue: Option<(f64, f64)>,
    pub empirical_regret: (f64, f64),
    pub certified_regret: (f64, f64),
    pub ratio: Option<f64>,
}

pub const COLUMNS: [&str; 8] = [
    "setting",
    "ir",
    "relu_reg",
    "solve_time",
    "revenue",
    "empirical_regret",
    "certified_regret",
    "emp_cert_ratio",
];

fn ordinal(agent: usize) -> String {
    match agent + 1 {
        2 => "2nd".into(),
        3 => "3rd".into(),
        n => format!("{n}th"),
    }
}

pub fn rows(summaries: &[SummaryRow]) -> Vec<ReportRow> {
    summaries
        .iter()
        .map(|s| ReportRow {
            label: if s.agent == 0 {
                s.setting.clone()
            } else {
                format!("{} ({})", s.setting, ordinal(s.agent))
            },
            ir: s.ir,
            relu_reg: s.relu_reg,
            solve_time: (s.solve_time_mean, s.solve_time_std),
            revenue: match (s.agent, s.revenue_mean, s.revenue_std) {
                (0, Some(m), Some(sd)) => Some((m, sd)),
                _ => None,
            },
            empirical_regret: (s.empirical_regret_mean, s.empirical_regret_std),
            certified_regret: (s.certified_regret_mean, s.certified_regret_std),
            ratio: s.emp_cert_ratio,
        })
        .collect()
}

fn yes_no(b: bool) -> String {
    if b { "Yes" } else { "No" }.into()
}

impl ReportRow {
    /// Cells with each number written by `num`.
    fn cells_with(&self, num: impl Fn(f64) -> String) -> Vec<String> {
        let pair = |(m, s): (f64, f64)| format!("{} ({})", num(m), num(s));
        vec![
            self.label.clone(),
            yes_no(self.ir),
            yes_no(self.relu_reg),
            pair(self.solve_time),
            self.revenue.map(pair).unwrap_or_else(|| "---".into()),
            pair(self.empirical_regret),
            pair(self.certified_regret),
            self.ratio.map(&num).unwrap_or_else(|| "---".into()),
        ]
    }

    /// Exact cells, as written to CSV.
    pub fn cells(&self) -> Vec<String> {
        self.cells_with(fmt)
    }
}

/// Parses a `mean (std)` cell back into numbers.
pub fn parse_pair(cell: &str) -> Option<(f64, f64)> {
    let (m, rest) = cell.split_once(" (")?;
    let s = rest.strip_suffix(')')?;
    Some((m.trim().parse().ok()?, s.trim().parse().ok()?))
}

/// Markdown table with numbers rounded to four decimals.
pub fn render(rows: &[ReportRow]) -> String {
    let mut out = format!("| {} |\n", COLUMNS.join(" | "));
    out.push_str(&format!("|{}\n", "---|".repeat(COLUMNS.len())));
    for r in rows {
        out.push_str(&format!("| {} |\n", r.cells_with(|x| format!("{x:.4}")).join(" | ")));
    }
    out
}

pub fn write(path: &Path, comment: &str, rows: &[ReportRow]) -> Result<()> {
    let header: Vec<String> = COLUMNS.iter().map(|s| s.to_string()).collect();
    let body: Vec<Vec<String>> = rows.iter().map(ReportRow::cells).collect();
    write_csv(path, comment, &header, &body)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_round_trip() {
        let r = ReportRow {
            label: "2x2 (2nd)".into(),
            ir: true,
            relu_reg: true,
            solve_time: (7.52, 24.2),
            revenue: None,
            empirical_regret: (0.0, 0.0),
            certified_regret: (0.0, 0.0),
            ratio: None,
        };
        let cell = &r.cells()[3];
        assert_eq!(cell, "7.52 (24.2)");
        assert_eq!(parse_pair(cell), Some((7.52, 24.2)));
        assert_eq!(parse_pair("---"), None);
    }

    #[test]
    fn later_agents_have_no_revenue() {
        let s = SummaryRow {
            setting: "2x2".into(),
            agent: 1,
            revenue_mean: Some(0.9),
            revenue_std: Some(0.1),
            ..SummaryRow::default()
        };
        let r = &rows(&[s])[0];
        assert_eq!(r.label, "2x2 (2nd)");
        assert_eq!(r.cells()[4], "---");
    }
}
