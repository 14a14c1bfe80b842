//! Per-feature chi-square tests with Bonferroni correction, an FDR estimate,
//! and named feature subsets.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::LabeledDataset;
use crate::par;

pub const DEFAULT_BINS: usize = 4;
pub const DEFAULT_ALPHA: f64 = 0.05;

pub const TOP4: [&str; 4] = [
    "communication",
    "PastResponseRate",
    "TweetingInactivity",
    "TweetingLikelihoodOfDay",
];

pub const COMMON_SIGNIFICANT: [&str; 5] = [
    "PastResponseRate",
    "TweetingInactivity",
    "Excitement-Seeking",
    "Cautiousness",
    "DailyMsgCount",
];

/// Upper regularized incomplete gamma `Q(df/2, x/2)`, the chi-square
/// survival function.
pub fn chi_square_sf(x: f64, df: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    statrs::function::gamma::gamma_ur(df / 2.0, x / 2.0).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
}

/// Pearson statistic for a `rows x 2` table. Rows with no observations are
/// dropped before counting degrees of freedom.
pub fn chi_square_table(table: &[[u64; 2]]) -> Option<ChiSquare> {
    let rows: Vec<[u64; 2]> = table.iter().copied().filter(|r| r[0] + r[1] > 0).collect();
    let col = [rows.iter().map(|r| r[0]).sum::<u64>(), rows.iter().map(|r| r[1]).sum::<u64>()];
    let n = (col[0] + col[1]) as f64;
    if rows.len() < 2 || col[0] == 0 || col[1] == 0 {
        return None;
    }
    let mut stat = 0.0;
    for r in &rows {
        let rt = (r[0] + r[1]) as f64;
        for c in 0..2 {
            let e = rt * col[c] as f64 / n;
            let d = r[c] as f64 - e;
            stat += d * d / e;
        }
    }
    let df = rows.len() - 1;
    Some(ChiSquare {
        statistic: stat,
        df,
        p_value: chi_square_sf(stat, df as f64),
    })
}

/// Quantile bin index for every value; masked values get bin `bins`.
/// Thresholds are order statistics, so any strictly increasing transform of
/// the column yields the same assignment.
pub fn quantile_bins(values: &[Option<f64>], bins: usize) -> Vec<usize> {
    let mut sorted: Vec<f64> = values.iter().flatten().copied().collect();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let thresholds: Vec<f64> = if n == 0 {
        Vec::new()
    } else {
        (1..bins).map(|k| sorted[k * n / bins]).collect()
    };
    values
        .iter()
        .map(|v| match v {
            Some(x) if n > 0 => thresholds.iter().filter(|&&t| t <= *x).count(),
            _ => bins,
        })
        .collect()
}

/// Tests one feature column against the labels. `None` marks a degenerate
/// feature (fewer than two occupied bins).
pub fn chi_square_feature(values: &[Option<f64>], labels: &[bool], bins: usize) -> Result<Option<ChiSquare>> {
    if values.len() != labels.len() {
        return Err(Error::Contract("feature column and labels differ in length".into()));
    }
    if bins < 2 {
        return Err(Error::Config("chi-square needs at least 2 bins".into()));
    }
    if !labels.iter().any(|&l| l) || labels.iter().all(|&l| l) {
        return Err(Error::Evaluation("chi-square needs both classes".into()));
    }
    let idx = quantile_bins(values, bins);
    let mut table = vec![[0u64; 2]; bins + 1];
    for (&b, &l) in idx.iter().zip(labels) {
        table[b][l as usize] += 1;
    }
    Ok(chi_square_table(&table))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureTest {
    pub name: String,
    pub chi_square: Option<f64>,
    pub df: Option<usize>,
    pub p_value: Option<f64>,
    pub significant: bool,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceReport {
    pub alpha: f64,
    pub bins: usize,
    /// Number of non-degenerate tests, the Bonferroni `m`.
    pub tested: usize,
    pub threshold: f64,
    pub rejected: usize,
    /// `p_max_rejected * m / k`, capped at 1; 0 when nothing is rejected.
    pub fdr: f64,
    pub no_rejections: bool,
    pub features: Vec<FeatureTest>,
}

impl SignificanceReport {
    pub fn significant_names(&self) -> Vec<String> {
        self.features.iter().filter(|f| f.significant).map(|f| f.name.clone()).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let csv_err = |e: csv::Error| Error::Data(format!("writing report csv: {e}"));
        out.write_record(["feature", "chi2", "df", "p", "significant"]).map_err(csv_err)?;
        for f in &self.features {
            let opt = |v: Option<String>| v.unwrap_or_default();
            out.write_record([
                f.name.clone(),
                opt(f.chi_square.map(|v| v.to_string())),
                opt(f.df.map(|v| v.to_string())),
                opt(f.p_value.map(|v| v.to_string())),
                (f.significant as u8).to_string(),
            ])
            .map_err(csv_err)?;
        }
        out.flush().map_err(|e| Error::io("flushing report csv", e))
    }
}

pub fn significance_report(data: &LabeledDataset, alpha: f64, bins: usize) -> Result<SignificanceReport> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!("alpha {alpha} outside (0, 1)")));
    }
    let results = par::map_range(data.width(), |j| {
        let col: Vec<Option<f64>> = data.rows.iter().map(|r| r[j]).collect();
        chi_square_feature(&col, &data.labels, bins)
    });
    let results = results.into_iter().collect::<Result<Vec<_>>>()?;
    let tested = results.iter().filter(|r| r.is_some()).count();
    let threshold = alpha / tested.max(1) as f64;
    let features: Vec<FeatureTest> = data
        .names
        .iter()
        .zip(&results)
        .map(|(name, r)| FeatureTest {
            name: name.clone(),
            chi_square: r.map(|c| c.statistic),
            df: r.map(|c| c.df),
            p_value: r.map(|c| c.p_value),
            significant: r.is_some_and(|c| c.p_value < threshold),
            degenerate: r.is_none(),
        })
        .collect();
    let rejected_p: Vec<f64> = features.iter().filter(|f| f.significant).filter_map(|f| f.p_value).collect();
    let rejected = rejected_p.len();
    let fdr = if rejected == 0 {
        0.0
    } else {
        let pmax = rejected_p.iter().fold(0.0f64, |a, &b| a.max(b));
        (pmax * tested as f64 / rejected as f64).min(1.0)
    };
    Ok(SignificanceReport {
        alpha,
        bins,
        tested,
        threshold,
        rejected,
        fdr,
        no_rejections: rejected == 0,
        features,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubsetName {
    All,
    Significant,
    Top10Significant,
    Top4,
    CommonSignificant,
}

impl SubsetName {
    pub const ALL: [SubsetName; 5] = [
        SubsetName::All,
        SubsetName::Significant,
        SubsetName::Top10Significant,
        SubsetName::Top4,
        SubsetName::CommonSignificant,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            SubsetName::All => "all",
            SubsetName::Significant => "significant",
            SubsetName::Top10Significant => "top10_significant",
            SubsetName::Top4 => "top4",
            SubsetName::CommonSignificant => "common_significant",
        }
    }

    /// Whether the subset depends on a significance report.
    pub fn needs_report(&self) -> bool {
        matches!(self, SubsetName::Significant | SubsetName::Top10Significant)
    }
}

impl fmt::Display for SubsetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SubsetName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SubsetName::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown feature subset {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSubset {
    pub name: SubsetName,
    pub features: Vec<String>,
}

impl FeatureSubset {
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut body = self.features.join("\n");
        body.push('\n');
        std::fs::write(path, body).map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }

    /// Reads a newline-delimited name list; blank lines are skipped.
    pub fn read_names(path: &Path) -> Result<Vec<String>> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Ok(s.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect())
    }
}

fn fixed_list(list: &[&str], names: &[String]) -> Result<Vec<String>> {
    let missing: Vec<&str> = list.iter().copied().filter(|n| !names.iter().any(|m| m == n)).collect();
    if !missing.is_empty() {
        return Err(Error::Config(format!("feature space lacks {}", missing.join(", "))));
    }
    Ok(list.iter().map(|s| s.to_string()).collect())
}

pub fn build_subset(name: SubsetName, report: Option<&SignificanceReport>, names: &[String]) -> Result<FeatureSubset> {
    let report_for = || report.ok_or_else(|| Error::Config(format!("subset {name} needs a significance report")));
    let features = match name {
        SubsetName::All => names.to_vec(),
        SubsetName::Top4 => fixed_list(&TOP4, names)?,
        SubsetName::CommonSignificant => fixed_list(&COMMON_SIGNIFICANT, names)?,
        SubsetName::Significant => report_for()?.significant_names(),
        SubsetName::Top10Significant => {
            let mut rej: Vec<&FeatureTest> = report_for()?.features.iter().filter(|f| f.significant).collect();
            if rej.len() < 10 {
                return Err(Error::Constraint(format!(
                    "top10_significant needs 10 rejected features, report has {}",
                    rej.len()
                )));
            }
            rej.sort_by(|a, b| a.p_value.unwrap().total_cmp(&b.p_value.unwrap()));
            rej.into_iter().take(10).map(|f| f.name.clone()).collect()
        }
    };
    Ok(FeatureSubset { name, features })
}
