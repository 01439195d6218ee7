//! Evaluation metrics: range-invariant PSNR and MS-SSIM, Pearson correlation
//! and patch-based SNR, computed per channel and averaged.

mod msssim;
mod scale;
mod snr;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::image::{ConcentrationMap, SpectralImage};
use crate::io::{float_repr, format_float};
use crate::{Error, Result};

pub use msssim::{ms_ssim_2d, ms_ssim_ri, scale_count, MS_SSIM_WEIGHTS};
pub use scale::{fit_global_scale, pearson, psnr_ri};
pub use snr::{percentile, snr, spectral_snr, BACKGROUND_FRACTION, PATCH};

/// Column order of report CSV files.
pub const CSV_HEADER: [&str; 9] =
    ["dataset", "method", "condition_key", "condition_value", "channel", "psnr_ri", "ms_ssim_ri", "pearson", "snr"];

/// Metrics of one channel. Values that could not be computed are NaN.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelMetrics {
    #[serde(with = "float_repr")]
    pub psnr_ri: f64,
    #[serde(with = "float_repr")]
    pub ms_ssim_ri: f64,
    #[serde(with = "float_repr")]
    pub pearson: f64,
    #[serde(with = "float_repr")]
    pub snr: f64,
}

impl ChannelMetrics {
    pub const NAN: Self = Self { psnr_ri: f64::NAN, ms_ssim_ri: f64::NAN, pearson: f64::NAN, snr: f64::NAN };

    pub fn values(&self) -> [f64; 4] {
        [self.psnr_ri, self.ms_ssim_ri, self.pearson, self.snr]
    }

    fn from_values(v: [f64; 4]) -> Self {
        Self { psnr_ri: v[0], ms_ssim_ri: v[1], pearson: v[2], snr: v[3] }
    }

    /// Arithmetic mean of each field.
    pub fn mean(records: &[ChannelMetrics]) -> Self {
        let n = records.len() as f64;
        let mut acc = [0.0; 4];
        for r in records {
            for (a, v) in acc.iter_mut().zip(r.values()) {
                *a += v;
            }
        }
        Self::from_values(acc.map(|a| a / n))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub labels: Vec<String>,
    pub per_channel: Vec<ChannelMetrics>,
    pub mean: ChannelMetrics,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "opt_float")]
    pub spectral_snr: Option<f64>,
    /// `"<channel>/<metric>: <error>"` for every value left as NaN.
    #[serde(default)]
    pub errors: Vec<String>,
}

mod opt_float {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(x) => super::float_repr::serialize(x, s),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        #[derive(Deserialize)]
        struct W(#[serde(with = "super::float_repr")] f64);
        Ok(Option::<W>::deserialize(d)?.map(|w| w.0))
    }
}

/// Evaluates `est` against `gt` channel by channel. Individual metric
/// failures become NaN and are listed in `errors`; only a shape mismatch is
/// an error.
pub fn evaluate(gt: &ConcentrationMap, est: &ConcentrationMap, spectral: Option<&SpectralImage>) -> Result<MetricReport> {
    if gt.data().dim() != est.data().dim() {
        return Err(Error::ShapeMismatch(format!(
            "ground truth {:?} vs estimate {:?}",
            gt.data().dim(),
            est.data().dim()
        )));
    }
    let mut errors = Vec::new();
    let per_channel: Vec<ChannelMetrics> = (0..gt.channels())
        .map(|j| {
            let g = gt.channel(j);
            let p = est.channel(j);
            let gs: Vec<f64> = g.iter().copied().collect();
            let ps: Vec<f64> = p.iter().copied().collect();
            let label = &gt.labels()[j];
            let mut take = |name: &str, r: Result<f64>| {
                r.unwrap_or_else(|e| {
                    errors.push(format!("{label}/{name}: {e}"));
                    f64::NAN
                })
            };
            ChannelMetrics {
                psnr_ri: take("psnr_ri", psnr_ri(&gs, &ps)),
                ms_ssim_ri: take("ms_ssim_ri", ms_ssim_ri(g, p)),
                pearson: take("pearson", pearson(&gs, &ps)),
                snr: take("snr", snr(p)),
            }
        })
        .collect();
    let spectral_snr = match spectral.map(spectral_snr) {
        Some(Ok(v)) => Some(v),
        Some(Err(e)) => {
            errors.push(format!("spectral/snr: {e}"));
            Some(f64::NAN)
        }
        None => None,
    };
    Ok(MetricReport {
        labels: gt.labels().to_vec(),
        mean: ChannelMetrics::mean(&per_channel),
        per_channel,
        spectral_snr,
        errors,
    })
}

/// One CSV row in [`CSV_HEADER`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub dataset: String,
    pub method: String,
    pub condition_key: String,
    pub condition_value: String,
    pub channel: String,
    pub metrics: ChannelMetrics,
}

impl MetricReport {
    /// Per-channel rows followed by the `mean` row.
    pub fn rows(&self, dataset: &str, method: &str, condition_key: &str, condition_value: &str) -> Vec<ReportRow> {
        let row = |channel: &str, metrics: ChannelMetrics| ReportRow {
            dataset: dataset.into(),
            method: method.into(),
            condition_key: condition_key.into(),
            condition_value: condition_value.into(),
            channel: channel.into(),
            metrics,
        };
        let mut rows: Vec<ReportRow> = self.labels.iter().zip(&self.per_channel).map(|(l, m)| row(l, *m)).collect();
        rows.push(row("mean", self.mean));
        rows
    }
}

pub fn write_rows_csv(writer: impl Write, rows: &[ReportRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        let mut rec = vec![
            r.dataset.clone(),
            r.method.clone(),
            r.condition_key.clone(),
            r.condition_value.clone(),
            r.channel.clone(),
        ];
        rec.extend(r.metrics.values().map(format_float));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
