//! Reconstruction quality and the `N_f` estimate.

use crate::error::{Result, TncsError};
use crate::feature_map::Image;
use crate::mps::Mps;
use crate::oracle::shannon_conditional;
use crate::sampling::{pixel_variance, qsparsity};
use crate::PixelMap;

/// PSNR in dB with peak 1: `10 log10(N / sum (x_n - y_n)^2)`.
///
/// Identical images give `f64::INFINITY`, the sentinel for an exact
/// reconstruction (serialized as `inf`, see [`format_db`]).
pub fn psnr(x: &Image, y: &Image) -> Result<f64> {
    if !x.same_geometry(y) {
        return Err(TncsError::arg(format!(
            "psnr of a {}x{} and a {}x{} image",
            x.width(),
            x.height(),
            y.width(),
            y.height()
        )));
    }
    let sse: f64 = x
        .pixels()
        .iter()
        .zip(y.pixels())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    if sse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (x.len() as f64 / sse).log10())
}

/// `ceil(c (N + log2 S^q))`, the number of pixels worth sending.
pub fn estimate_nf(n_sites: usize, log2_qsparsity: f64, c: f64) -> Result<usize> {
    let est = c * (n_sites as f64 + log2_qsparsity);
    if !est.is_finite() || est < 0.0 {
        return Err(TncsError::arg(format!(
            "N={n_sites}, log2 S^q={log2_qsparsity}, c={c} give a negative pixel count"
        )));
    }
    // absorb float noise such as 6 * (784 - 770.0000000000001)
    Ok((est - 1e-9).ceil().max(0.0) as usize)
}

/// Least-squares `c` through the origin for observed `(N + log2 S^q, N_f)`
/// pairs, the inverse use of [`estimate_nf`].
pub fn fit_nf_constant(points: &[(f64, f64)]) -> Option<f64> {
    let sxx: f64 = points.iter().map(|(x, _)| x * x).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(points.iter().map(|(x, y)| x * y).sum::<f64>() / sxx)
}

/// `inf` for the exact-reconstruction sentinel, otherwise the number itself.
pub fn format_db(x: f64) -> String {
    if x == f64::INFINITY {
        "inf".to_string()
    } else {
        format!("{x}")
    }
}

pub fn parse_db(s: &str) -> Result<f64> {
    match s.trim() {
        "inf" => Ok(f64::INFINITY),
        t => t
            .parse()
            .map_err(|_| TncsError::format(format!("bad dB value {t:?}"))),
    }
}

/// Mean and population standard deviation; `None` for an empty slice.
pub fn mean_std(xs: &[f64]) -> Option<(f64, f64)> {
    if xs.is_empty() {
        return None;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    Some((mean, var.sqrt()))
}

/// Everything measured about one reconstruction.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub psnr_db: f64,
    pub log2_qsparsity: f64,
    pub sbar_profile: Vec<f64>,
    pub variance: Vec<f64>,
    pub shannon_nats: Option<f64>,
}

impl MetricsRecord {
    /// Gathers the metrics of reconstructing `original` as `reconstructed`.
    ///
    /// The conditional Shannon entropy is filled in only when the unmeasured
    /// part of the model is small enough to enumerate.
    pub fn collect(
        model: &Mps,
        dataset: &[Image],
        original: &Image,
        reconstructed: &Image,
        sent: &PixelMap,
    ) -> Result<Self> {
        let q = qsparsity(model)?;
        let shannon_nats = match shannon_conditional(model, sent) {
            Ok(h) => Some(h),
            Err(TncsError::TooLarge { .. }) => None,
            Err(e) => return Err(e),
        };
        Ok(MetricsRecord {
            psnr_db: psnr(original, reconstructed)?,
            log2_qsparsity: q.log2_value,
            sbar_profile: q.sbar_profile,
            variance: pixel_variance(dataset)?,
            shannon_nats,
        })
    }

    /// `key=value` lines; vectors are comma separated, a missing entropy is `none`.
    pub fn to_text(&self) -> String {
        let join = |v: &[f64]| {
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        format!(
            "psnr_db={}\nlog2_qsparsity={}\nsbar_profile={}\nvariance={}\nshannon_nats={}\n",
            format_db(self.psnr_db),
            self.log2_qsparsity,
            join(&self.sbar_profile),
            join(&self.variance),
            self.shannon_nats
                .map_or_else(|| "none".to_string(), |h| h.to_string()),
        )
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut fields = std::collections::HashMap::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| TncsError::format(format!("bad metrics line {line:?}")))?;
            fields.insert(k, v);
        }
        let get = |k: &str| {
            fields
                .get(k)
                .copied()
                .ok_or_else(|| TncsError::format(format!("metrics field {k} missing")))
        };
        let num = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| TncsError::format(format!("bad number {s:?}")))
        };
        let vec = |s: &str| -> Result<Vec<f64>> {
            s.split(',').filter(|t| !t.is_empty()).map(num).collect()
        };
        let shannon_nats = match get("shannon_nats")? {
            "none" => None,
            s => Some(num(s)?),
        };
        Ok(MetricsRecord {
            psnr_db: parse_db(get("psnr_db")?)?,
            log2_qsparsity: num(get("log2_qsparsity")?)?,
            sbar_profile: vec(get("sbar_profile")?)?,
            variance: vec(get("variance")?)?,
            shannon_nats,
        })
    }
}
