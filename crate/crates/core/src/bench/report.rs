use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::io::float_repr;
use crate::metrics::{write_rows_csv, ChannelMetrics, MetricReport, ReportRow};
use crate::solvers::Method;
use crate::Result;

use super::SweepAxis;

pub(crate) fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn mean_std_records(records: &[ChannelMetrics]) -> (ChannelMetrics, ChannelMetrics) {
    let mut mean = [0.0; 4];
    let mut std = [0.0; 4];
    for k in 0..4 {
        let column: Vec<f64> = records.iter().map(|r| r.values()[k]).collect();
        (mean[k], std[k]) = mean_std(&column);
    }
    let to = |v: [f64; 4]| ChannelMetrics { psnr_ri: v[0], ms_ssim_ri: v[1], pearson: v[2], snr: v[3] };
    (to(mean), to(std))
}

/// Replicate statistics of one (condition, method) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellStats {
    pub method: Method,
    /// Replicates that produced a report.
    pub replicates_ok: usize,
    pub per_channel: Vec<ChannelMetrics>,
    pub per_channel_std: Vec<ChannelMetrics>,
    /// Channel average of `per_channel`.
    pub mean: ChannelMetrics,
    /// Replicate standard deviation of the per-replicate channel average.
    pub mean_std: ChannelMetrics,
    pub errors: Vec<String>,
}

impl CellStats {
    pub(crate) fn aggregate(
        method: Method,
        channels: usize,
        reports: &[std::result::Result<&MetricReport, String>],
    ) -> Self {
        let mut errors = Vec::new();
        let ok: Vec<&MetricReport> = reports
            .iter()
            .enumerate()
            .filter_map(|(r, rep)| match rep {
                Ok(m) => {
                    errors.extend(m.errors.iter().map(|e| format!("replicate {r}: {e}")));
                    Some(*m)
                }
                Err(e) => {
                    errors.push(format!("replicate {r}: {e}"));
                    None
                }
            })
            .collect();
        if ok.is_empty() {
            return Self {
                method,
                replicates_ok: 0,
                per_channel: vec![ChannelMetrics::NAN; channels],
                per_channel_std: vec![ChannelMetrics::NAN; channels],
                mean: ChannelMetrics::NAN,
                mean_std: ChannelMetrics::NAN,
                errors,
            };
        }
        let (per_channel, per_channel_std): (Vec<_>, Vec<_>) = (0..channels)
            .map(|j| mean_std_records(&ok.iter().map(|m| m.per_channel[j]).collect::<Vec<_>>()))
            .unzip();
        let (_, mean_std) = mean_std_records(&ok.iter().map(|m| m.mean).collect::<Vec<_>>());
        Self {
            method,
            replicates_ok: ok.len(),
            mean: ChannelMetrics::mean(&per_channel),
            per_channel,
            per_channel_std,
            mean_std,
            errors,
        }
    }

    pub fn failed(&self) -> bool {
        self.replicates_ok == 0
    }
}

/// All cells of one sweep value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionResult {
    pub value: f64,
    pub bands: usize,
    #[serde(with = "float_repr")]
    pub kappa: f64,
    #[serde(with = "float_repr")]
    pub spectral_snr: f64,
    #[serde(with = "float_repr")]
    pub spectral_snr_std: f64,
    pub cells: Vec<CellStats>,
    pub errors: Vec<String>,
}

impl ConditionResult {
    pub fn cell(&self, method: Method) -> Option<&CellStats> {
        self.cells.iter().find(|c| c.method == method)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub dataset: String,
    pub axis: SweepAxis,
    pub labels: Vec<String>,
    pub replicates: usize,
    pub conditions: Vec<ConditionResult>,
}

impl BenchReport {
    pub fn condition_value(v: f64) -> String {
        crate::io::format_float(v)
    }

    /// Replicate-mean rows, one per (value, method, channel) plus the mean
    /// row of each (value, method).
    pub fn rows(&self) -> Vec<ReportRow> {
        let mut rows = Vec::new();
        for cond in &self.conditions {
            for cell in &cond.cells {
                let report = MetricReport {
                    labels: self.labels.clone(),
                    per_channel: cell.per_channel.clone(),
                    mean: cell.mean,
                    spectral_snr: None,
                    errors: Vec::new(),
                };
                rows.extend(report.rows(
                    &self.dataset,
                    cell.method.name(),
                    self.axis.name(),
                    &Self::condition_value(cond.value),
                ));
            }
        }
        rows
    }

    /// Mean-channel series of one metric for `method`, in sweep order.
    pub fn series(&self, method: Method, metric: usize) -> Vec<f64> {
        self.conditions
            .iter()
            .map(|c| c.cell(method).map_or(f64::NAN, |cell| cell.mean.values()[metric]))
            .collect()
    }
}

pub const METRIC_NAMES: [&str; 4] = ["psnr_ri", "ms_ssim_ri", "pearson", "snr"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub method: Method,
    pub rank: usize,
    #[serde(with = "float_repr")]
    pub value: f64,
    pub best: bool,
    pub second: bool,
    /// Equal value to an adjacent entry.
    pub tied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRanking {
    pub condition_value: String,
    pub metric: String,
    pub entries: Vec<RankEntry>,
    /// Methods without a value (failed cells), by name.
    pub excluded: Vec<Method>,
}

pub type Ranking = Vec<MetricRanking>;

/// Ranks methods per condition and metric by channel-mean value (higher is
/// better). Ties are ordered by method name and flagged; failed or NaN cells
/// are excluded and listed.
pub fn compare_methods(report: &BenchReport) -> Ranking {
    let mut out = Vec::new();
    for cond in &report.conditions {
        for (k, name) in METRIC_NAMES.iter().enumerate() {
            let mut scored: Vec<(Method, f64)> = Vec::new();
            let mut excluded = Vec::new();
            for cell in &cond.cells {
                let v = cell.mean.values()[k];
                if cell.failed() || v.is_nan() {
                    excluded.push(cell.method);
                } else {
                    scored.push((cell.method, v));
                }
            }
            scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.name().cmp(b.0.name())));
            excluded.sort_by_key(|m| m.name());
            let entries = scored
                .iter()
                .enumerate()
                .map(|(i, &(method, value))| {
                    let tied = (i > 0 && scored[i - 1].1 == value) || scored.get(i + 1).is_some_and(|n| n.1 == value);
                    RankEntry { method, rank: i + 1, value, best: i == 0, second: i == 1, tied }
                })
                .collect();
            out.push(MetricRanking {
                condition_value: BenchReport::condition_value(cond.value),
                metric: name.to_string(),
                entries,
                excluded,
            });
        }
    }
    out
}

fn strictly_increasing(v: &[f64]) -> bool {
    v.iter().all(|x| !x.is_nan()) && v.windows(2).all(|w| w[0] < w[1])
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.iter().all(|x| !x.is_nan()) && v.windows(2).all(|w| w[0] > w[1])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub dataset: String,
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub spectral_snr_increasing: bool,
    pub kappa_decreasing: bool,
    /// Per method: channel-mean `psnr_ri` strictly increasing along the sweep.
    pub psnr_ri_increasing: BTreeMap<String, bool>,
    pub failed_cells: Vec<String>,
    pub ranking: Ranking,
}

impl Summary {
    pub fn new(report: &BenchReport) -> Self {
        let snr: Vec<f64> = report.conditions.iter().map(|c| c.spectral_snr).collect();
        let kappa: Vec<f64> = report.conditions.iter().map(|c| c.kappa).collect();
        let methods: Vec<Method> = report.conditions.first().map(|c| c.cells.iter().map(|c| c.method).collect()).unwrap_or_default();
        let psnr_ri_increasing = methods
            .iter()
            .map(|&m| (m.name().to_string(), strictly_increasing(&report.series(m, 0))))
            .collect();
        let failed_cells = report
            .conditions
            .iter()
            .flat_map(|c| {
                c.cells.iter().filter(|cell| cell.failed()).map(move |cell| {
                    format!("{}={} {}: {}", report.axis.name(), BenchReport::condition_value(c.value), cell.method, cell.errors.join("; "))
                })
            })
            .collect();
        Self {
            dataset: report.dataset.clone(),
            axis: report.axis,
            values: report.conditions.iter().map(|c| c.value).collect(),
            spectral_snr_increasing: strictly_increasing(&snr),
            kappa_decreasing: strictly_decreasing(&kappa),
            psnr_ri_increasing,
            failed_cells,
            ranking: compare_methods(report),
        }
    }
}

/// Writes `table_<axis>.csv`, `table_<axis>.json` and `summary.json`.
pub fn write_outputs(report: &BenchReport, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let axis = report.axis.name();
    let csv = std::fs::File::create(dir.join(format!("table_{axis}.csv")))?;
    write_rows_csv(std::io::BufWriter::new(csv), &report.rows())?;
    let json = serde_json::to_string_pretty(report)?;
    std::fs::write(dir.join(format!("table_{axis}.json")), json + "\n")?;
    let summary = serde_json::to_string_pretty(&Summary::new(report))?;
    std::fs::write(dir.join("summary.json"), summary + "\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn metrics(psnr: f64) -> ChannelMetrics {
        ChannelMetrics { psnr_ri: psnr, ms_ssim_ri: 0.5, pearson: 0.5, snr: 1.0 }
    }

    fn cell(method: Method, psnr: f64, ok: bool) -> CellStats {
        let r = MetricReport {
            labels: vec!["a".into()],
            per_channel: vec![metrics(psnr)],
            mean: metrics(psnr),
            spectral_snr: None,
            errors: vec![],
        };
        let reps: Vec<std::result::Result<&MetricReport, String>> =
            if ok { vec![Ok(&r)] } else { vec![Err("injected".into())] };
        CellStats::aggregate(method, 1, &reps)
    }

    fn report(cells: Vec<CellStats>) -> BenchReport {
        BenchReport {
            dataset: "d".into(),
            axis: SweepAxis::Exposure,
            labels: vec!["a".into()],
            replicates: 1,
            conditions: vec![ConditionResult {
                value: 1.0,
                bands: 4,
                kappa: 2.0,
                spectral_snr: 3.0,
                spectral_snr_std: 0.0,
                cells,
                errors: vec![],
            }],
        }
    }

    #[test]
    fn single_method_ranks_first() {
        let r = compare_methods(&report(vec![cell(Method::Rlu, 20.0, true)]));
        assert!(r.iter().all(|m| m.entries.len() == 1 && m.entries[0].best && m.entries[0].rank == 1));
    }

    #[test]
    fn ties_break_by_name() {
        let r = compare_methods(&report(vec![cell(Method::Nnlu, 20.0, true), cell(Method::Fclu, 20.0, true)]));
        let psnr = &r[0];
        assert_eq!(psnr.entries[0].method, Method::Fclu);
        assert_eq!(psnr.entries[1].method, Method::Nnlu);
        assert!(psnr.entries.iter().all(|e| e.tied));
        assert!(psnr.entries[0].best && psnr.entries[1].second);
    }

    #[test]
    fn failed_cells_are_excluded() {
        let rep = report(vec![cell(Method::Lu, 10.0, true), cell(Method::Lumos, 0.0, false)]);
        let r = compare_methods(&rep);
        assert_eq!(r[0].entries.len(), 1);
        assert_eq!(r[0].excluded, vec![Method::Lumos]);
        let s = Summary::new(&rep);
        assert_eq!(s.failed_cells.len(), 1);
        assert!(s.failed_cells[0].contains("injected"));
        let rows = rep.rows();
        assert!(rows.iter().any(|row| row.method == "lumos" && row.metrics.psnr_ri.is_nan()));
    }

    #[test]
    fn replicate_std_is_sample_std() {
        assert_eq!(mean_std(&[1.0, 3.0]), (2.0, 2f64.sqrt()));
        assert_eq!(mean_std(&[5.0]), (5.0, 0.0));
    }
}
