//! Reconstruction benchmark: PSNR against the number of sent pixels.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::codec::{decode_oneshot, decode_postselect, EncodedMessage};
use crate::error::{Result, TncsError};
use crate::feature_map::{pixel_to_state, Image, PixelMap};
use crate::metrics::{format_db, mean_std, psnr};
use crate::mps::Mps;
use crate::sampling::{plan_eosp, plan_random, plan_variance, SamplingPlan, Strategy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Decoder {
    OneShot,
    PostSelect,
}

impl fmt::Display for Decoder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Decoder::OneShot => "oneshot",
            Decoder::PostSelect => "postselect",
        })
    }
}

impl FromStr for Decoder {
    type Err = TncsError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "oneshot" => Ok(Decoder::OneShot),
            "postselect" => Ok(Decoder::PostSelect),
            other => Err(TncsError::arg(format!("unknown decoder {other:?}"))),
        }
    }
}

/// Parses `start:stop:step` (inclusive stop) or a comma-separated list.
pub fn parse_nf_grid(s: &str) -> Result<Vec<usize>> {
    let bad = || TncsError::arg(format!("bad N_f grid {s:?}"));
    let num = |t: &str| t.trim().parse::<usize>().map_err(|_| bad());
    let grid: Vec<usize> = if let Some((a, rest)) = s.split_once(':') {
        let (b, step) = rest.split_once(':').ok_or_else(bad)?;
        let (a, b, step) = (num(a)?, num(b)?, num(step)?);
        if step == 0 || a > b {
            return Err(bad());
        }
        (a..=b).step_by(step).collect()
    } else {
        s.split(',').map(num).collect::<Result<_>>()?
    };
    if grid.is_empty() || grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(bad());
    }
    Ok(grid)
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub strategies: Vec<Strategy>,
    /// Strictly ascending numbers of sent pixels.
    pub nf_grid: Vec<usize>,
    pub decoder: Decoder,
    pub seed: u64,
}

/// One `(strategy, N_f)` cell of the benchmark.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub nf: usize,
    pub strategy: Strategy,
    pub decoder: Decoder,
    pub chi: usize,
    /// Mean over finite PSNRs; `inf` if every reconstruction was exact,
    /// NaN if no image could be encoded.
    pub psnr_mean: f64,
    pub psnr_std: f64,
    /// Images contributing to the mean.
    pub n_images: usize,
    /// Exact reconstructions (infinite PSNR), excluded from the mean.
    pub exact: usize,
    /// Images whose sent pixels have zero probability under the model.
    pub unrecognized: usize,
    /// Per test image, in input order; `None` when unrecognized.
    pub psnrs: Vec<Option<f64>>,
}

pub const CSV_HEADER: &str =
    "nf,strategy,decoder,chi,psnr_mean,psnr_std,n_images,exact,unrecognized";

impl BenchRow {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.nf,
            self.strategy,
            self.decoder,
            self.chi,
            format_db(self.psnr_mean),
            format_db(self.psnr_std),
            self.n_images,
            self.exact,
            self.unrecognized
        )
    }
}

pub fn to_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.csv_line());
        out.push('\n');
    }
    out
}

fn summarize(
    nf: usize,
    strategy: Strategy,
    decoder: Decoder,
    chi: usize,
    psnrs: Vec<Option<f64>>,
) -> BenchRow {
    let finite: Vec<f64> = psnrs
        .iter()
        .flatten()
        .copied()
        .filter(|p| p.is_finite())
        .collect();
    let exact = psnrs.iter().flatten().filter(|p| p.is_infinite()).count();
    let unrecognized = psnrs.iter().filter(|p| p.is_none()).count();
    let (psnr_mean, psnr_std) = match mean_std(&finite) {
        Some(ms) => ms,
        None if exact > 0 => (f64::INFINITY, 0.0),
        None => (f64::NAN, f64::NAN),
    };
    BenchRow {
        nf,
        strategy,
        decoder,
        chi,
        psnr_mean,
        psnr_std,
        n_images: finite.len(),
        exact,
        unrecognized,
        psnrs,
    }
}

/// PSNR of every grid point for one image under one plan, projecting the
/// plan's sites incrementally. `None` once a projection has zero probability.
fn image_curve(
    model: &Mps,
    img: &Image,
    plan: &SamplingPlan,
    grid: &[usize],
    decoder: Decoder,
    seed: u64,
) -> Result<Vec<Option<f64>>> {
    let mut phi = model.clone();
    phi.ensure_canonical()?;
    let mut sent = PixelMap::new();
    let mut out = Vec::with_capacity(grid.len());
    let mut done = 0;
    for (g, &nf) in grid.iter().enumerate() {
        let mut impossible = false;
        for &site in &plan.order[done..nf] {
            let x = img.pixels()[site];
            match phi.project_site_in_place(site, pixel_to_state(x)?) {
                Ok(_) => {
                    sent.insert(site, x);
                }
                Err(TncsError::ZeroProbability { .. }) => {
                    impossible = true;
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        if impossible {
            out.resize(grid.len(), None);
            return Ok(out);
        }
        done = nf;
        let msg = EncodedMessage {
            phi: phi.clone(),
            sent: sent.clone(),
            plan: plan.truncated(nf),
            width: img.width(),
            height: img.height(),
        };
        let rest = match decoder {
            Decoder::PostSelect => decode_postselect(&msg)?,
            Decoder::OneShot => decode_oneshot(&msg, seed ^ ((g as u64) << 40))?,
        };
        out.push(Some(psnr(img, &msg.assemble(&rest)?)?));
    }
    Ok(out)
}

/// Runs every `(strategy, N_f)` cell over `test_set`.
///
/// `train_set` supplies the pixel variances for VO. Random plans are drawn
/// per test image from `seed`, so results are reproducible and independent of
/// the thread count. Rows come ordered by strategy, then by `N_f`.
pub fn run_benchmark(
    model: &Mps,
    train_set: &[Image],
    test_set: &[Image],
    cfg: &BenchConfig,
) -> Result<Vec<BenchRow>> {
    let n = model.len();
    if test_set.is_empty() {
        return Err(TncsError::arg("empty test set"));
    }
    if let Some(k) = test_set.iter().position(|im| im.len() != n) {
        return Err(TncsError::arg(format!(
            "test image {k} has {} pixels, the model {n} sites",
            test_set[k].len()
        )));
    }
    if cfg.nf_grid.is_empty() || cfg.nf_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(TncsError::arg(
            "N_f grid must be nonempty and strictly ascending",
        ));
    }
    let nf_max = *cfg.nf_grid.last().unwrap();
    if nf_max > n {
        return Err(TncsError::arg(format!("N_f = {nf_max} exceeds {n} pixels")));
    }
    let chi = model.max_bond();

    let mut rows = Vec::new();
    for &strategy in &cfg.strategies {
        // one shared plan for the deterministic orderings
        let shared = match strategy {
            Strategy::Entanglement => Some(plan_eosp(model, nf_max)?),
            Strategy::Variance => Some(plan_variance(train_set, nf_max)?),
            Strategy::Random => None,
        };
        let curves: Vec<Vec<Option<f64>>> = test_set
            .par_iter()
            .enumerate()
            .map(|(k, img)| {
                let image_seed = cfg
                    .seed
                    .wrapping_add((k as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
                let plan = match &shared {
                    Some(p) => p.clone(),
                    None => plan_random(n, nf_max, image_seed)?,
                };
                image_curve(model, img, &plan, &cfg.nf_grid, cfg.decoder, image_seed)
            })
            .collect::<Result<_>>()?;
        for (g, &nf) in cfg.nf_grid.iter().enumerate() {
            let psnrs = curves.iter().map(|c| c[g]).collect();
            rows.push(summarize(nf, strategy, cfg.decoder, chi, psnrs));
        }
    }
    Ok(rows)
}

/// Spearman rank correlation (average ranks for ties); `None` if either
/// series is constant or the lengths differ.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let (rx, ry) = (ranks(xs), ranks(ys));
    pearson(&rx, &ry)
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma) * (x - ma)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb) * (y - mb)).sum();
    if va == 0.0 || vb == 0.0 {
        return None;
    }
    Some(cov / (va * vb).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::quantum_average;
    use crate::known_states::{four_qubit_dataset, four_qubit_example};
    use crate::trainer::{train, TrainConfig};

    fn cfg(strategies: Vec<Strategy>, nf_grid: Vec<usize>, decoder: Decoder) -> BenchConfig {
        BenchConfig {
            strategies,
            nf_grid,
            decoder,
            seed: 11,
        }
    }

    #[test]
    fn grid_parsing() {
        assert_eq!(parse_nf_grid("0:80:5").unwrap().len(), 17);
        assert_eq!(parse_nf_grid("0:10:4").unwrap(), vec![0, 4, 8]);
        assert_eq!(parse_nf_grid("2,5,9").unwrap(), vec![2, 5, 9]);
        for bad in ["", "5:1:1", "0:4:0", "3,3", "a:b:c", "1:2"] {
            assert!(parse_nf_grid(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn decoder_names() {
        for d in [Decoder::OneShot, Decoder::PostSelect] {
            assert_eq!(d.to_string().parse::<Decoder>().unwrap(), d);
        }
        assert!("both".parse::<Decoder>().is_err());
    }

    #[test]
    fn four_qubit_eo_reconstructs_exactly() {
        let mps = four_qubit_example();
        let mut support = four_qubit_dataset();
        support.dedup();
        assert_eq!(support.len(), 4);
        let rows = run_benchmark(
            &mps,
            &four_qubit_dataset(),
            &support,
            &cfg(vec![Strategy::Entanglement], vec![2], Decoder::PostSelect),
        )
        .unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].exact, 4);
        assert_eq!(rows[0].n_images, 0);
        assert_eq!(rows[0].psnr_mean, f64::INFINITY);
        assert!(rows[0]
            .csv_line()
            .starts_with("2,EO,postselect,2,inf,0,0,4,0"));
    }

    #[test]
    fn nothing_sent_gives_the_quantum_average() {
        let mps = four_qubit_example();
        let test = four_qubit_dataset();
        let avg = quantum_average(&mps).unwrap();
        let rows = run_benchmark(
            &mps,
            &test,
            &test,
            &cfg(vec![Strategy::Random], vec![0], Decoder::PostSelect),
        )
        .unwrap();
        for (img, p) in test.iter().zip(&rows[0].psnrs) {
            let avg = Image::new(avg.pixels().to_vec(), img.width(), img.height()).unwrap();
            assert_eq!(p.unwrap(), psnr(img, &avg).unwrap());
        }
    }

    #[test]
    fn unrecognized_images_are_counted() {
        let mps = four_qubit_example();
        // (1,1,1,1) has zero amplitude in every completion
        let alien = Image::from_row(vec![1.0; 4]).unwrap();
        let rows = run_benchmark(
            &mps,
            &four_qubit_dataset(),
            &[alien],
            &cfg(vec![Strategy::Variance], vec![0, 4], Decoder::OneShot),
        )
        .unwrap();
        assert_eq!(rows[0].unrecognized, 0);
        assert_eq!(rows[1].unrecognized, 1);
        assert!(rows[1].psnr_mean.is_nan());
    }

    #[test]
    fn identical_seeds_identical_csv() {
        let data: Vec<Image> = (0..12)
            .map(|k| {
                Image::from_row((0..8).map(|i| (((i * 3 + k) % 5) as f64) / 4.0).collect()).unwrap()
            })
            .collect();
        let (mps, _) = train(
            &data[..8],
            &TrainConfig {
                chi_max: 3,
                sweeps: 2,
                ..TrainConfig::default()
            },
        )
        .unwrap();
        let c = cfg(
            vec![Strategy::Entanglement, Strategy::Variance, Strategy::Random],
            vec![0, 2, 4],
            Decoder::OneShot,
        );
        let a = to_csv(&run_benchmark(&mps, &data[..8], &data[8..], &c).unwrap());
        let b = to_csv(&run_benchmark(&mps, &data[..8], &data[8..], &c).unwrap());
        assert_eq!(a, b);
        assert_eq!(a.lines().count(), 10);
        assert_eq!(a.lines().next().unwrap(), CSV_HEADER);
    }

    #[test]
    fn argument_checks() {
        let mps = four_qubit_example();
        let d = four_qubit_dataset();
        let c = |g| cfg(vec![Strategy::Random], g, Decoder::OneShot);
        assert!(run_benchmark(&mps, &d, &[], &c(vec![0])).is_err());
        assert!(run_benchmark(&mps, &d, &d, &c(vec![5])).is_err());
        assert!(run_benchmark(&mps, &d, &d, &c(vec![2, 1])).is_err());
        let wrong = Image::from_row(vec![0.0; 3]).unwrap();
        assert!(run_benchmark(&mps, &d, &[wrong], &c(vec![0])).is_err());
    }

    #[test]
    fn spearman_basics() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 90.0]), Some(1.0));
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), Some(-1.0));
        assert_eq!(spearman(&[1.0, 2.0], &[5.0, 5.0]), None);
        let r = spearman(&[1.0, 2.0, 3.0, 4.0], &[1.0, 1.0, 2.0, 3.0]).unwrap();
        assert!(r > 0.9 && r < 1.0);
    }
}
