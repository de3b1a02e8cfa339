use std::fs;
use std::path::PathBuf;

use clap::Args;
use tncs::bench::{parse_nf_grid, run_benchmark, to_csv, BenchConfig, Decoder};
use tncs::codec::{self, decode_oneshot, decode_postselect, protocol_round_trip};
use tncs::data::{
    filter_class, load_message, load_model, quantized_image, read_idx, save_message, save_model,
    write_pgm, Dataset,
};
use tncs::metrics::format_db;
use tncs::sampling::{plan_eosp, plan_random, plan_variance, SamplingPlan, Strategy};
use tncs::trainer::{train_with_log, TrainConfig};
use tncs::{Image, Mps, Result, TncsError};

#[derive(Args, Debug)]
pub struct DataArgs {
    /// IDX image file.
    #[arg(long)]
    images: PathBuf,
    /// IDX label file.
    #[arg(long)]
    labels: PathBuf,
    /// Keep only this class.
    #[arg(long = "class")]
    class: Option<u8>,
    /// Block-mean downscaling factor; inferred from the model when omitted.
    #[arg(long)]
    downscale: Option<usize>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 16)]
    chi: usize,
    #[arg(long, default_value_t = 0.05)]
    tau: f64,
    #[arg(long, default_value_t = 20)]
    sweeps: usize,
    /// Samples per gradient step, 0 for the full set.
    #[arg(long, default_value_t = 0)]
    batch: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Use at most this many images (after class filtering).
    #[arg(long)]
    limit: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
pub struct EncodeArgs {
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    image_index: usize,
    /// eo, vo or ro.
    #[arg(long, default_value = "eo")]
    strategy: Strategy,
    #[arg(long)]
    nf: usize,
    /// Seed of random ordering.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Training images for variance ordering.
    #[arg(long)]
    train_images: Option<PathBuf>,
    #[arg(long)]
    train_labels: Option<PathBuf>,
    /// Message directory to create.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
pub struct DecodeArgs {
    /// Message directory written by `encode`.
    #[arg(long)]
    msg: PathBuf,
    /// oneshot or postselect.
    #[arg(long, default_value = "postselect")]
    decoder: Decoder,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output PGM.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    test_images: PathBuf,
    #[arg(long)]
    test_labels: PathBuf,
    /// Training images for variance ordering.
    #[arg(long)]
    train_images: Option<PathBuf>,
    #[arg(long)]
    train_labels: Option<PathBuf>,
    #[arg(long = "class")]
    class: Option<u8>,
    #[arg(long)]
    downscale: Option<usize>,
    /// Use at most this many test images.
    #[arg(long)]
    limit: Option<usize>,
    #[arg(long, value_delimiter = ',', default_value = "eo,vo,ro")]
    strategies: Vec<Strategy>,
    /// `start:stop:step` or a comma-separated list.
    #[arg(long, default_value = "0:80:5")]
    nf_grid: String,
    #[arg(long, default_value = "postselect")]
    decoder: Decoder,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    csv: PathBuf,
}

#[derive(Args, Debug)]
pub struct QsparsityArgs {
    #[arg(long)]
    model: PathBuf,
    /// Profile CSV (`n_unmeasured,sbar`).
    #[arg(long)]
    csv: PathBuf,
}

#[derive(Args, Debug)]
pub struct ProtocolArgs {
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    image_index: usize,
    #[arg(long)]
    nf: usize,
    /// Digest salt, hex encoded.
    #[arg(long, default_value = "")]
    salt: String,
    #[arg(long, default_value = "eo")]
    strategy: Strategy,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    train_images: Option<PathBuf>,
    #[arg(long)]
    train_labels: Option<PathBuf>,
}

/// Downscaling factor that maps `pixels` onto `sites`.
fn infer_factor(pixels: usize, sites: usize) -> Result<usize> {
    if pixels.is_multiple_of(sites) {
        let ratio = pixels / sites;
        let f = (ratio as f64).sqrt().round() as usize;
        if f * f == ratio {
            return Ok(f);
        }
    }
    Err(TncsError::Argument(format!(
        "{pixels}-pixel images do not fit a {sites}-site model"
    )))
}

fn load_dataset(
    images: &PathBuf,
    labels: &PathBuf,
    class: Option<u8>,
    factor: Option<usize>,
    sites: Option<usize>,
) -> Result<Dataset> {
    let mut ds = read_idx(images, labels)?;
    if let Some(c) = class {
        ds = filter_class(&ds, c)?;
    }
    let factor = match (factor, sites, ds.images.first()) {
        (Some(f), _, _) => f,
        (None, Some(n), Some(img)) => infer_factor(img.len(), n)?,
        _ => 1,
    };
    if factor > 1 {
        ds = ds.downscaled(factor)?;
    }
    Ok(ds)
}

fn pick(ds: &Dataset, index: usize) -> Result<Image> {
    ds.images.get(index).cloned().ok_or_else(|| {
        TncsError::Argument(format!("image index {index} outside {} images", ds.len()))
    })
}

fn train_set_for_variance(
    images: &Option<PathBuf>,
    labels: &Option<PathBuf>,
    class: Option<u8>,
    factor: Option<usize>,
    sites: usize,
) -> Result<Dataset> {
    match (images, labels) {
        (Some(i), Some(l)) => load_dataset(i, l, class, factor, Some(sites)),
        _ => Err(TncsError::Argument(
            "variance ordering needs --train-images and --train-labels".into(),
        )),
    }
}

fn build_plan(
    strategy: Strategy,
    model: &Mps,
    nf: usize,
    seed: u64,
    train: impl FnOnce() -> Result<Dataset>,
) -> Result<SamplingPlan> {
    match strategy {
        Strategy::Entanglement => plan_eosp(model, nf),
        Strategy::Variance => plan_variance(&train()?.images, nf),
        Strategy::Random => plan_random(model.len(), nf, seed),
    }
}

pub fn train(a: TrainArgs) -> Result<()> {
    let mut ds = load_dataset(
        &a.data.images,
        &a.data.labels,
        a.data.class,
        a.data.downscale,
        None,
    )?;
    if let Some(limit) = a.limit {
        ds = ds.slice(0..limit.min(ds.len()))?;
    }
    let cfg = TrainConfig {
        chi_max: a.chi,
        tau: a.tau,
        sweeps: a.sweeps,
        batch: a.batch,
        seed: a.seed,
        ..TrainConfig::default()
    };
    eprintln!(
        "training on {} images of {} pixels",
        ds.len(),
        ds.images.first().map_or(0, Image::len)
    );
    let (mps, report) = train_with_log(&ds.images, &cfg, |line| eprintln!("{line}"))?;
    save_model(&mps, &a.out)?;
    println!(
        "final_nll={} sweeps={} chi={}",
        report.final_nll,
        report.sweeps_run,
        mps.max_bond()
    );
    Ok(())
}

pub fn encode(a: EncodeArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let n = model.len();
    let ds = load_dataset(
        &a.data.images,
        &a.data.labels,
        a.data.class,
        a.data.downscale,
        Some(n),
    )?;
    let img = pick(&ds, a.image_index)?;
    let plan = build_plan(a.strategy, &model, a.nf, a.seed, || {
        train_set_for_variance(
            &a.train_images,
            &a.train_labels,
            a.data.class,
            a.data.downscale,
            n,
        )
    })?;
    let msg = codec::encode(&model, &img, &plan)?;
    save_message(&msg, &a.out)?;
    println!(
        "sent={} strategy={} out={}",
        msg.sent.len(),
        plan.strategy,
        a.out.display()
    );
    Ok(())
}

pub fn decode(a: DecodeArgs) -> Result<()> {
    let msg = load_message(&a.msg)?;
    let rest = match a.decoder {
        Decoder::OneShot => decode_oneshot(&msg, a.seed)?,
        Decoder::PostSelect => decode_postselect(&msg)?,
    };
    let img = msg.assemble(&rest)?;
    write_pgm(&img, &a.out)?;
    println!(
        "decoded={} sent={} out={}",
        rest.len(),
        msg.sent.len(),
        a.out.display()
    );
    Ok(())
}

pub fn bench(a: BenchArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let n = model.len();
    let mut test = load_dataset(
        &a.test_images,
        &a.test_labels,
        a.class,
        a.downscale,
        Some(n),
    )?;
    if let Some(limit) = a.limit {
        test = test.slice(0..limit.min(test.len()))?;
    }
    let train = if a.strategies.contains(&Strategy::Variance) {
        train_set_for_variance(&a.train_images, &a.train_labels, a.class, a.downscale, n)?.images
    } else {
        Vec::new()
    };
    let cfg = BenchConfig {
        strategies: a.strategies,
        nf_grid: parse_nf_grid(&a.nf_grid)?,
        decoder: a.decoder,
        seed: a.seed,
    };
    let rows = run_benchmark(&model, &train, &test.images, &cfg)?;
    let csv = to_csv(&rows);
    fs::write(&a.csv, &csv)?;
    print!("{csv}");
    Ok(())
}

pub fn qsparsity(a: QsparsityArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let q = tncs::sampling::qsparsity(&model)?;
    fs::write(&a.csv, q.profile_csv())?;
    println!("log2_qsparsity={} sites={}", q.log2_value, model.len());
    Ok(())
}

pub fn protocol_demo(a: ProtocolArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let n = model.len();
    let ds = load_dataset(
        &a.data.images,
        &a.data.labels,
        a.data.class,
        a.data.downscale,
        Some(n),
    )?;
    // the classical channel carries 8-bit pixels
    let img = quantized_image(&pick(&ds, a.image_index)?);
    let salt = hex::decode(&a.salt)
        .map_err(|_| TncsError::Argument(format!("--salt {:?} is not hex", a.salt)))?;
    let plan = build_plan(a.strategy, &model, a.nf, a.seed, || {
        train_set_for_variance(
            &a.train_images,
            &a.train_labels,
            a.data.class,
            a.data.downscale,
            n,
        )
    })?;
    let out = protocol_round_trip(&model, &img, &plan, &salt)?;
    print!("{}", out.cipher.to_text());
    println!("psnr_encrypted={}", format_db(out.psnr_encrypted));
    println!("psnr_plain={}", format_db(out.psnr_plain));
    println!("identical={}", out.reconstructed == out.plain);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factor_inference() {
        assert_eq!(infer_factor(784, 196).unwrap(), 2);
        assert_eq!(infer_factor(784, 784).unwrap(), 1);
        assert_eq!(infer_factor(784, 49).unwrap(), 4);
        assert!(infer_factor(784, 392).is_err());
        assert!(infer_factor(784, 100).is_err());
    }
}
