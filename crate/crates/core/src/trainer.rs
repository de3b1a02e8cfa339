//! Unsupervised training of the MPS Born machine.
//!
//! The loss is the negative log-likelihood
//!
//! ```text
//! f = ln <Psi|Psi> - (1/K) sum_i ln |<Psi|phi_i>|^2
//! ```
//!
//! over the `K` training images. Tensors are updated one at a time at the
//! orthogonality center, `A <- A - tau df/dA`, sweeping left-to-right and then
//! right-to-left. A sweep that raises the loss is undone and retried with half
//! the step, up to eight times.

use nalgebra::{DMatrix, RowDVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Result, TncsError};
use crate::feature_map::{image_to_product, Image};
use crate::mps::{Mps, QubitState, SiteTensor};

const MAX_HALVINGS: usize = 8;
const CHUNK: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub chi_max: usize,
    pub tau: f64,
    pub sweeps: usize,
    /// Samples per gradient estimate; 0 uses the whole set.
    pub batch: usize,
    pub seed: u64,
    /// Stop once an accepted sweep lowers the NLL by less than this.
    pub tol: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            chi_max: 16,
            tau: 0.05,
            sweeps: 20,
            batch: 0,
            seed: 0,
            tol: 1e-6,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.chi_max == 0 {
            return Err(TncsError::arg("chi_max must be at least 1"));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(TncsError::arg("tau must be positive"));
        }
        if self.sweeps == 0 {
            return Err(TncsError::arg("at least one sweep is required"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// NLL before training followed by the value after each accepted sweep.
    pub nll_history: Vec<f64>,
    pub final_nll: f64,
    pub sweeps_run: usize,
    /// Step size in effect after each accepted sweep.
    pub tau_history: Vec<f64>,
}

/// One line of the training log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepLog {
    pub sweep: usize,
    pub nll: f64,
    pub tau: f64,
}

impl std::fmt::Display for SweepLog {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "sweep={} nll={} tau={}", self.sweep, self.nll, self.tau)
    }
}

fn check_dataset(mps: &Mps, dataset: &[Image]) -> Result<()> {
    if dataset.is_empty() {
        return Err(TncsError::arg("dataset is empty"));
    }
    let n = mps.num_active();
    if n != mps.len() {
        return Err(TncsError::arg("model has measured-out sites"));
    }
    if let Some(i) = dataset.iter().position(|img| img.len() != n) {
        return Err(TncsError::arg(format!(
            "image {i} has {} pixels, model has {n} sites",
            dataset[i].len()
        )));
    }
    Ok(())
}

fn encode_all(dataset: &[Image]) -> Result<Vec<Vec<QubitState>>> {
    dataset.iter().map(image_to_product).collect()
}

fn nll_of_states(mps: &Mps, states: &[Vec<QubitState>]) -> Result<f64> {
    let log_norm = mps.log_norm_squared();
    let per_chunk: Vec<Result<f64>> = states
        .par_chunks(CHUNK)
        .enumerate()
        .map(|(c, chunk)| {
            let mut acc = 0.0;
            for (j, phi) in chunk.iter().enumerate() {
                let (_, log_abs) = mps.log_amplitude(phi)?;
                if !log_abs.is_finite() || 2.0 * log_abs < (1e-300f64).ln() {
                    return Err(TncsError::InfiniteNll {
                        index: c * CHUNK + j,
                    });
                }
                acc += 2.0 * log_abs;
            }
            Ok(acc)
        })
        .collect();
    let mut total = 0.0;
    for part in per_chunk {
        total += part?;
    }
    Ok(log_norm - total / states.len() as f64)
}

/// Negative log-likelihood of `dataset` under `mps`.
pub fn nll(mps: &Mps, dataset: &[Image]) -> Result<f64> {
    check_dataset(mps, dataset)?;
    nll_of_states(mps, &encode_all(dataset)?)
}

#[inline]
fn local_matrix(t: &SiteTensor, s: &QubitState) -> DMatrix<f64> {
    &t[0] * s.a() + &t[1] * s.b()
}

/// Left (row) and right (column) boundary vectors of one sample around `n`,
/// each rescaled to unit max-norm.
fn boundary_vectors(mps: &Mps, phi: &[QubitState], n: usize) -> (RowDVector<f64>, RowDVector<f64>) {
    let mut left = RowDVector::from_element(1, 1.0);
    for (k, s) in phi.iter().enumerate().take(n) {
        left = &left * local_matrix(mps.site(k), s);
        rescale(&mut left);
    }
    let mut right = RowDVector::from_element(1, 1.0);
    for k in (n + 1..mps.len()).rev() {
        right = (local_matrix(mps.site(k), &phi[k]) * right.transpose()).transpose();
        rescale(&mut right);
    }
    (left, right)
}

fn rescale(v: &mut RowDVector<f64>) {
    let m = v.amax();
    if m > 0.0 && m.is_finite() {
        *v /= m;
    }
}

/// Data part of the gradient: `sum_i E_i / <Psi|phi_i>` for one chunk.
fn data_term<'a>(
    center: &SiteTensor,
    samples: impl Iterator<Item = (&'a QubitState, &'a RowDVector<f64>, &'a RowDVector<f64>)>,
) -> SiteTensor {
    let (l, r) = center[0].shape();
    let mut acc = [DMatrix::zeros(l, r), DMatrix::zeros(l, r)];
    for (s, left, right) in samples {
        let env = left.transpose() * right;
        let psi = s.a() * center[0].dot(&env) + s.b() * center[1].dot(&env);
        acc[0] += &env * (s.a() / psi);
        acc[1] += &env * (s.b() / psi);
    }
    acc
}

fn assemble_gradient(center: &SiteTensor, data: SiteTensor, count: usize) -> SiteTensor {
    let z = center[0].norm_squared() + center[1].norm_squared();
    let k = count as f64;
    [
        &center[0] * (2.0 / z) - &data[0] * (2.0 / k),
        &center[1] * (2.0 / z) - &data[1] * (2.0 / k),
    ]
}

/// `df/dA[n]` for the images in `batch`. Requires the center at `n`.
pub fn gradient_site(mps: &Mps, batch: &[Image], n: usize) -> Result<SiteTensor> {
    check_dataset(mps, batch)?;
    if mps.center() != Some(n) {
        return Err(TncsError::arg(format!(
            "gradient at site {n} requires the orthogonality center there"
        )));
    }
    let states = encode_all(batch)?;
    let bounds: Vec<(RowDVector<f64>, RowDVector<f64>)> = states
        .iter()
        .map(|phi| boundary_vectors(mps, phi, n))
        .collect();
    let center = mps.site(n);
    let data = data_term(
        center,
        states
            .iter()
            .zip(&bounds)
            .map(|(phi, (l, r))| (&phi[n], l, r)),
    );
    Ok(assemble_gradient(center, data, batch.len()))
}

/// Per-sample boundary vectors for every site, kept in sync with the sweep.
struct EnvCache {
    left: Vec<Vec<RowDVector<f64>>>,
    right: Vec<Vec<RowDVector<f64>>>,
}

impl EnvCache {
    /// Builds caches for a model canonical at site 0.
    fn build(mps: &Mps, states: &[Vec<QubitState>]) -> Self {
        let n = mps.len();
        let unit = RowDVector::from_element(1, 1.0);
        let right: Vec<Vec<RowDVector<f64>>> = states
            .par_iter()
            .map(|phi| {
                let mut out = vec![unit.clone(); n];
                for k in (1..n).rev() {
                    let mut v =
                        (local_matrix(mps.site(k), &phi[k]) * out[k].transpose()).transpose();
                    rescale(&mut v);
                    out[k - 1] = v;
                }
                out
            })
            .collect();
        let left = states.iter().map(|_| vec![unit.clone(); n]).collect();
        EnvCache { left, right }
    }

    fn advance_left(&mut self, mps: &Mps, states: &[Vec<QubitState>], k: usize) {
        let t = mps.site(k);
        self.left
            .par_iter_mut()
            .zip(states.par_iter())
            .for_each(|(envs, phi)| {
                let mut v = &envs[k] * local_matrix(t, &phi[k]);
                rescale(&mut v);
                envs[k + 1] = v;
            });
    }

    fn advance_right(&mut self, mps: &Mps, states: &[Vec<QubitState>], k: usize) {
        let t = mps.site(k);
        self.right
            .par_iter_mut()
            .zip(states.par_iter())
            .for_each(|(envs, phi)| {
                let mut v = (local_matrix(t, &phi[k]) * envs[k].transpose()).transpose();
                rescale(&mut v);
                envs[k - 1] = v;
            });
    }
}

struct Sweeper<'a> {
    states: &'a [Vec<QubitState>],
    batch: usize,
    rng: ChaCha8Rng,
}

impl Sweeper<'_> {
    fn batches(&mut self) -> Vec<Vec<usize>> {
        let k = self.states.len();
        if self.batch == 0 || self.batch >= k {
            return vec![(0..k).collect()];
        }
        let mut order: Vec<usize> = (0..k).collect();
        order.shuffle(&mut self.rng);
        order.chunks(self.batch).map(|c| c.to_vec()).collect()
    }

    fn update_center(&self, mps: &mut Mps, cache: &EnvCache, idx: &[usize], tau: f64) -> bool {
        let n = mps.center().expect("center tracked during sweeps");
        let center = mps.site(n).clone();
        let parts: Vec<SiteTensor> = idx
            .par_chunks(CHUNK)
            .map(|chunk| {
                data_term(
                    &center,
                    chunk
                        .iter()
                        .map(|&i| (&self.states[i][n], &cache.left[i][n], &cache.right[i][n])),
                )
            })
            .collect();
        let (l, r) = center[0].shape();
        let mut data = [DMatrix::zeros(l, r), DMatrix::zeros(l, r)];
        for p in parts {
            data[0] += &p[0];
            data[1] += &p[1];
        }
        let grad = assemble_gradient(&center, data, idx.len());
        let mut next = [&center[0] - &grad[0] * tau, &center[1] - &grad[1] * tau];
        let norm = (next[0].norm_squared() + next[1].norm_squared()).sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return false;
        }
        next[0] /= norm;
        next[1] /= norm;
        mps.set_center_tensor(next);
        true
    }

    /// One left-to-right and right-to-left pass. Returns false on a
    /// non-finite update.
    fn sweep(&mut self, mps: &mut Mps, tau: f64) -> bool {
        let n = mps.len();
        let batches = self.batches();
        let mut cache = EnvCache::build(mps, self.states);
        let mut step = 0usize;
        let mut next_batch = || {
            let b = &batches[step % batches.len()];
            step += 1;
            b.clone()
        };
        for k in 0..n {
            if !self.update_center(mps, &cache, &next_batch(), tau) {
                return false;
            }
            if k + 1 < n {
                mps.shift_center_right();
                cache.advance_left(mps, self.states, k);
            }
        }
        for k in (0..n.saturating_sub(1)).rev() {
            mps.shift_center_left();
            cache.advance_right(mps, self.states, k + 1);
            if !self.update_center(mps, &cache, &next_batch(), tau) {
                return false;
            }
        }
        true
    }
}

/// Seeded random initial model, canonical at site 0.
pub fn initial_model(n_sites: usize, chi: usize, seed: u64) -> Result<Mps> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mps = Mps::random(n_sites, chi, 0.0, 1.0, &mut rng)?;
    mps.canonicalize(0)?;
    Ok(mps)
}

/// Trains a Born machine from a seeded random start.
pub fn train(dataset: &[Image], cfg: &TrainConfig) -> Result<(Mps, TrainReport)> {
    train_with_log(dataset, cfg, |_| {})
}

/// [`train`] with a callback receiving one [`SweepLog`] per accepted sweep
/// (sweep 0 is the initial model).
pub fn train_with_log(
    dataset: &[Image],
    cfg: &TrainConfig,
    log: impl FnMut(SweepLog),
) -> Result<(Mps, TrainReport)> {
    cfg.validate()?;
    let n_sites = dataset
        .first()
        .ok_or_else(|| TncsError::arg("dataset is empty"))?
        .len();
    let mps = initial_model(n_sites, cfg.chi_max, cfg.seed)?;
    train_from(mps, dataset, cfg, log)
}

/// Continues training from a given model.
pub fn train_from(
    mut mps: Mps,
    dataset: &[Image],
    cfg: &TrainConfig,
    mut log: impl FnMut(SweepLog),
) -> Result<(Mps, TrainReport)> {
    cfg.validate()?;
    check_dataset(&mps, dataset)?;
    if mps.max_bond() > cfg.chi_max {
        return Err(TncsError::arg("model bond dimension exceeds chi_max"));
    }
    mps.canonicalize(0)?;
    let states = encode_all(dataset)?;
    let mut sweeper = Sweeper {
        states: &states,
        batch: cfg.batch,
        rng: ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_5eed),
    };

    let mut current = nll_of_states(&mps, &states)?;
    let mut report = TrainReport {
        nll_history: vec![current],
        final_nll: current,
        sweeps_run: 0,
        tau_history: vec![cfg.tau],
    };
    log(SweepLog {
        sweep: 0,
        nll: current,
        tau: cfg.tau,
    });

    let mut tau = cfg.tau;
    for sweep in 1..=cfg.sweeps {
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let mut trial = mps.clone();
            if sweeper.sweep(&mut trial, tau) {
                trial.canonicalize(0)?;
                if let Ok(value) = nll_of_states(&trial, &states) {
                    if value.is_finite() && value <= current {
                        accepted = Some((trial, value));
                        break;
                    }
                }
            }
            tau *= 0.5;
        }
        let Some((model, value)) = accepted else {
            if !current.is_finite() {
                return Err(TncsError::TrainingDiverged { report });
            }
            break;
        };
        let improvement = current - value;
        mps = model;
        current = value;
        report.nll_history.push(value);
        report.tau_history.push(tau);
        report.final_nll = value;
        report.sweeps_run = sweep;
        log(SweepLog {
            sweep,
            nll: value,
            tau,
        });
        if improvement < cfg.tol {
            break;
        }
    }
    Ok((mps, report))
}
