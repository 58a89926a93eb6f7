use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

/// Which split serves as gallery and which as queries. Positional: in
/// `TrainToTest` the first set handed to the harness is the gallery.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EvalDirection {
    #[serde(rename = "train->test")]
    TrainToTest,
    #[serde(rename = "test->train")]
    TestToTrain,
}

impl EvalDirection {
    pub const BOTH: [EvalDirection; 2] = [EvalDirection::TrainToTest, EvalDirection::TestToTrain];

    pub fn label(self) -> &'static str {
        match self {
            EvalDirection::TrainToTest => "Train -> Test",
            EvalDirection::TestToTrain => "Test -> Train",
        }
    }
}

impl fmt::Display for EvalDirection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", tag = "status", content = "message")]
pub enum RowStatus {
    Ok,
    Error(String),
}

/// Where a row's queries came from: a cross-validation direction, or (for
/// gallery-free text prototypes) a named query subset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Column {
    Direction(EvalDirection),
    Subset(String),
}

impl Column {
    pub fn label(&self) -> String {
        match self {
            Column::Direction(d) => d.label().to_owned(),
            Column::Subset(s) => s.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ReportRow {
    pub config: String,
    pub column: Column,
    pub accuracy: Option<f64>,
    pub n_queries: usize,
    /// Spread over repeated seeds, when the row averages several runs.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed_spread: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seeds: Option<usize>,
    #[serde(flatten)]
    pub status: RowStatus,
}

impl ReportRow {
    pub fn ok(config: impl Into<String>, column: Column, accuracy: f64, n_queries: usize) -> Self {
        Self {
            config: config.into(),
            column,
            accuracy: Some(accuracy),
            n_queries,
            seed_spread: None,
            seeds: None,
            status: RowStatus::Ok,
        }
    }

    pub fn failed(config: impl Into<String>, column: Column, message: impl Into<String>) -> Self {
        let (config, message) = (config.into(), message.into());
        log::warn!("{config} / {}: {message}", column.label());
        Self {
            config,
            column,
            accuracy: None,
            n_queries: 0,
            seed_spread: None,
            seeds: None,
            status: RowStatus::Error(message),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == RowStatus::Ok
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Aggregate {
    pub config: String,
    pub mean: Option<f64>,
    pub spread: Option<f64>,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EvalReport {
    pub title: String,
    pub rows: Vec<ReportRow>,
    pub aggregates: Vec<Aggregate>,
}

/// Fixed-point text rounding half away from zero on the decimal value, so
/// 91.735 renders as 91.74 even though its binary form sits just below.
fn fixed(x: f64, places: usize) -> String {
    let scale = 10f64.powi(places as i32);
    let scaled = ((x * scale) * 1e6).round() / 1e6;
    format!("{:.*}", places, scaled.round() / scale)
}

/// Mean and sample standard deviation (divisor `n - 1`; 0 for a single
/// value). For two values the spread is `|a - b| / sqrt(2)`.
pub fn mean_and_spread(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl EvalReport {
    pub fn new(title: impl Into<String>, rows: Vec<ReportRow>) -> Self {
        let mut r = Self {
            title: title.into(),
            rows,
            aggregates: Vec::new(),
        };
        r.aggregates = r.compute_aggregates();
        r
    }

    /// Distinct config labels in first-seen order.
    pub fn configs(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.config.as_str()) {
                out.push(&r.config);
            }
        }
        out
    }

    fn columns(&self) -> Vec<Column> {
        let mut out: Vec<Column> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.column) {
                out.push(r.column.clone());
            }
        }
        out
    }

    /// Averages over the direction rows of each config. A config with any
    /// failed direction gets no mean.
    pub fn compute_aggregates(&self) -> Vec<Aggregate> {
        self.configs()
            .into_iter()
            .filter_map(|config| {
                let rows: Vec<&ReportRow> = self
                    .rows
                    .iter()
                    .filter(|r| r.config == config && matches!(r.column, Column::Direction(_)))
                    .collect();
                if rows.is_empty() {
                    return None;
                }
                let accs: Option<Vec<f64>> = rows.iter().map(|r| r.accuracy).collect();
                let (mean, spread) = match accs {
                    Some(a) => {
                        let (m, s) = mean_and_spread(&a);
                        (Some(m), Some(s))
                    }
                    None => (None, None),
                };
                Some(Aggregate {
                    config: config.to_owned(),
                    mean,
                    spread,
                    n: rows.len(),
                })
            })
            .collect()
    }

    pub fn row(&self, config: &str, column: &Column) -> Option<&ReportRow> {
        self.rows
            .iter()
            .find(|r| r.config == config && &r.column == column)
    }

    pub fn accuracy(&self, config: &str, direction: EvalDirection) -> Option<f64> {
        self.row(config, &Column::Direction(direction))
            .and_then(|r| r.accuracy)
    }

    pub fn aggregate(&self, config: &str) -> Option<&Aggregate> {
        self.aggregates.iter().find(|a| a.config == config)
    }

    pub fn has_errors(&self) -> bool {
        self.rows.iter().any(|r| !r.is_ok())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Aligned plain-text table: one line per config, one column per
    /// direction or subset, plus `Average` when directions are present.
    pub fn render_table(&self) -> String {
        let columns = self.columns();
        let with_avg = columns.iter().any(|c| matches!(c, Column::Direction(_)));
        let mut header = vec![String::new()];
        header.extend(columns.iter().map(Column::label));
        if with_avg {
            header.push("Average".into());
        }
        let mut lines = vec![header];
        for config in self.configs() {
            let mut line = vec![config.to_owned()];
            for c in &columns {
                line.push(match self.row(config, c) {
                    Some(ReportRow {
                        accuracy: Some(a),
                        seed_spread: Some(s),
                        ..
                    }) => format!("{} ± {}", fixed(*a, 2), fixed(*s, 2)),
                    Some(ReportRow {
                        accuracy: Some(a), ..
                    }) => fixed(*a, 2),
                    Some(_) => "error".into(),
                    None => "-".into(),
                });
            }
            if with_avg {
                line.push(match self.aggregate(config) {
                    Some(Aggregate {
                        mean: Some(m),
                        spread: Some(s),
                        ..
                    }) => format!("{} ± {}", fixed(*m, 2), fixed(*s, 1)),
                    Some(_) => "error".into(),
                    None => "-".into(),
                });
            }
            lines.push(line);
        }
        let ncol = lines[0].len();
        let widths: Vec<usize> = (0..ncol)
            .map(|j| {
                lines
                    .iter()
                    .map(|l| l[j].chars().count())
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let mut out = String::new();
        if !self.title.is_empty() {
            let _ = writeln!(out, "{}", self.title);
        }
        for (i, l) in lines.iter().enumerate() {
            let cells: Vec<String> = l
                .iter()
                .zip(&widths)
                .map(|(c, &w)| format!("{c}{}", " ".repeat(w - c.chars().count())))
                .collect();
            let _ = writeln!(out, "{}", cells.join("   ").trim_end());
            if i == 0 {
                let total = widths.iter().sum::<usize>() + 3 * (ncol - 1);
                let _ = writeln!(out, "{}", "-".repeat(total));
            }
        }
        for r in self.rows.iter().filter(|r| !r.is_ok()) {
            if let RowStatus::Error(msg) = &r.status {
                let _ = writeln!(out, "! {} / {}: {msg}", r.config, r.column.label());
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(dir: EvalDirection) -> Column {
        Column::Direction(dir)
    }

    #[test]
    fn spread_matches_published_presentation() {
        // 82.91 / 87.60 is shown as 85.26 ± 3.3; 90.49 / 92.98 as 91.74 ± 1.8
        let (m, s) = mean_and_spread(&[82.91, 87.60]);
        assert!((m - 85.255).abs() < 1e-9);
        assert_eq!(format!("{s:.1}"), "3.3");
        let (m, s) = mean_and_spread(&[90.49, 92.98]);
        assert_eq!(format!("{} ± {}", fixed(m, 2), fixed(s, 1)), "91.74 ± 1.8");
        assert_eq!(mean_and_spread(&[5.0]), (5.0, 0.0));
    }

    #[test]
    fn aggregates_follow_rows() {
        use EvalDirection::*;
        let rows = vec![
            ReportRow::ok("means", d(TrainToTest), 90.0, 10),
            ReportRow::ok("means", d(TestToTrain), 94.0, 10),
            ReportRow::ok("k=1", d(TrainToTest), 80.0, 10),
            ReportRow::failed("k=1", d(TestToTrain), "k too large"),
        ];
        let r = EvalReport::new("t", rows);
        assert_eq!(r.aggregates, r.compute_aggregates());
        let a = r.aggregate("means").unwrap();
        assert_eq!(a.mean, Some(92.0));
        assert!((a.spread.unwrap() - 4.0 / 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(r.aggregate("k=1").unwrap().mean, None);
        assert!(r.has_errors());
        let text = r.render_table();
        assert!(text.contains("Train -> Test"));
        assert!(text.contains("92.00 ± 2.8"));
        assert!(text.contains("! k=1 / Test -> Train: k too large"));
    }

    #[test]
    fn subset_rows_have_no_average() {
        let rows = vec![
            ReportRow::ok("baseline", Column::Subset("Test".into()), 40.0, 5),
            ReportRow::ok("baseline", Column::Subset("Train".into()), 46.0, 5),
        ];
        let r = EvalReport::new("", rows);
        assert!(r.aggregates.is_empty());
        assert!(!r.render_table().contains("Average"));
    }

    #[test]
    fn json_round_trip() {
        let rows = vec![
            ReportRow::ok("a", d(EvalDirection::TrainToTest), 50.0, 2),
            ReportRow::failed("b", d(EvalDirection::TestToTrain), "boom"),
        ];
        let r = EvalReport::new("x", rows);
        let back: EvalReport = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back, r);
    }
}
