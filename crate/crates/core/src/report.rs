//! Tabular output: long-format TSV rows and phenomenon-by-threshold tables.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

/// Header of the long-format evaluation report.
pub const REPORT_HEADER: &str = "phenomenon\tmin_distance\tn_sentences\tbleu\tribes\tspearman";

const MISSING: &str = "-";

/// Column label for a minimum-distance threshold: `All` for 0.
pub fn threshold_label(t: usize) -> String {
    if t == 0 {
        "All".to_string()
    } else {
        format!(">={t}")
    }
}

pub fn fmt_bleu(v: Option<f64>) -> String {
    v.map_or_else(|| MISSING.to_string(), |v| format!("{v:.2}"))
}

pub fn fmt_ratio(v: Option<f64>) -> String {
    v.map_or_else(|| MISSING.to_string(), |v| format!("{v:.4}"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub phenomenon: String,
    pub min_distance: Option<usize>,
    pub n_sentences: usize,
    pub bleu: Option<f64>,
    pub ribes: Option<f64>,
    pub spearman: Option<f64>,
}

pub fn render_report_tsv(rows: &[ReportRow]) -> String {
    let mut out = String::from(REPORT_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}",
            r.phenomenon,
            r.min_distance.map_or_else(|| MISSING.to_string(), |d| d.to_string()),
            r.n_sentences,
            fmt_bleu(r.bleu),
            fmt_ratio(r.ribes),
            fmt_ratio(r.spearman),
        );
    }
    out
}

/// Rows are phenomena, columns are thresholds, with an optional trailing
/// column (e.g. Spearman).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ThresholdTable {
    rows: Vec<(String, BTreeMap<usize, String>, Option<String>)>,
    trailing: Option<String>,
}

impl ThresholdTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_trailing_column(mut self, name: &str) -> Self {
        self.trailing = Some(name.to_string());
        self
    }

    pub fn push_row(&mut self, label: &str, cells: BTreeMap<usize, String>, trailing: Option<String>) {
        self.rows.push((label.to_string(), cells, trailing));
    }

    pub fn thresholds(&self) -> Vec<usize> {
        let set: BTreeSet<usize> = self.rows.iter().flat_map(|r| r.1.keys().copied()).collect();
        set.into_iter().collect()
    }

    pub fn render_tsv(&self) -> String {
        let thresholds = self.thresholds();
        let mut out = String::from("phenomenon");
        for &t in &thresholds {
            out.push('\t');
            out.push_str(&threshold_label(t));
        }
        if let Some(name) = &self.trailing {
            out.push('\t');
            out.push_str(name);
        }
        out.push('\n');
        for (label, cells, trailing) in &self.rows {
            out.push_str(label);
            for t in &thresholds {
                out.push('\t');
                out.push_str(cells.get(t).map_or(MISSING, String::as_str));
            }
            if self.trailing.is_some() {
                out.push('\t');
                out.push_str(trailing.as_deref().unwrap_or(MISSING));
            }
            out.push('\n');
        }
        out
    }
}
