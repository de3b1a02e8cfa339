//! Encoding an image into a measured Born machine and reading it back.
//!
//! The sender's pixels are applied as projections `<s(x_n)|` on the trained
//! state. The receiver then recovers the remaining pixels either by sampling
//! the measured state in the computational basis (one-shot) or by a greedy
//! sweep that fixes each qubit to the dominant eigenstate of its reduced
//! density matrix (post-selection).

mod cipher;

use nalgebra::RowDVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, TncsError};
use crate::feature_map::{image_to_product, pixel_to_state, state_to_pixel, Image, PixelMap};
use crate::mps::Mps;
use crate::sampling::{greedy_step, SamplingPlan};

pub use cipher::{
    f_decrypt, f_decrypt_with, f_encrypt, f_encrypt_with, protocol_round_trip, CipherMessage,
    DigestStream, NullDigest, ProtocolOutcome, Sha256Digest,
};

/// The measured state together with the classically sent pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedMessage {
    pub phi: Mps,
    pub sent: PixelMap,
    pub plan: SamplingPlan,
    pub width: usize,
    pub height: usize,
}

impl EncodedMessage {
    /// The message for a state with nothing measured.
    pub fn unmeasured(mps: &Mps, plan: SamplingPlan, width: usize, height: usize) -> Self {
        EncodedMessage {
            phi: mps.clone(),
            sent: PixelMap::new(),
            plan,
            width,
            height,
        }
    }

    /// Sent pixels and decoded rest pixels as one image.
    pub fn assemble(&self, rest: &PixelMap) -> Result<Image> {
        Image::assemble(self.width, self.height, &[&self.sent, rest])
    }

    /// `site=<idx> x=<val>` lines.
    pub fn sent_to_text(&self) -> String {
        pixel_map_to_text(&self.sent)
    }
}

pub fn pixel_map_to_text(map: &PixelMap) -> String {
    map.iter()
        .map(|(s, x)| format!("site={s} x={x}\n"))
        .collect()
}

pub fn pixel_map_from_text(text: &str) -> Result<PixelMap> {
    let mut map = PixelMap::new();
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
        let mut site = None;
        let mut x = None;
        for field in line.split_whitespace() {
            match field.split_once('=') {
                Some(("site", v)) => site = v.parse::<usize>().ok(),
                Some(("x", v)) => x = v.parse::<f64>().ok(),
                _ => return Err(TncsError::format(format!("bad pixel field {field:?}"))),
            }
        }
        match (site, x) {
            (Some(s), Some(v)) if (0.0..=1.0).contains(&v) => {
                if map.insert(s, v).is_some() {
                    return Err(TncsError::format(format!("site {s} listed twice")));
                }
            }
            _ => return Err(TncsError::format(format!("bad pixel line {line:?}"))),
        }
    }
    Ok(map)
}

/// Projects `mps` onto the feature-map states of the pixels in `plan.order`.
pub fn encode(mps: &Mps, img: &Image, plan: &SamplingPlan) -> Result<EncodedMessage> {
    if img.len() != mps.len() {
        return Err(TncsError::arg(format!(
            "image has {} pixels, model has {} sites",
            img.len(),
            mps.len()
        )));
    }
    if let Some(&bad) = plan.order.iter().find(|&&n| n >= mps.len()) {
        return Err(TncsError::arg(format!("plan site {bad} outside the image")));
    }
    let mut phi = mps.clone();
    phi.ensure_canonical()?;
    let mut sent = PixelMap::new();
    for &site in &plan.order {
        let x = img.pixels()[site];
        match phi.project_site_in_place(site, pixel_to_state(x)?) {
            Ok(_) => {}
            Err(TncsError::ZeroProbability { site }) => {
                return Err(TncsError::EncodeImpossible { site })
            }
            Err(e) => return Err(e),
        }
        sent.insert(site, x);
    }
    Ok(EncodedMessage {
        phi,
        sent,
        plan: plan.clone(),
        width: img.width(),
        height: img.height(),
    })
}

/// Draws computational-basis configurations of a state's active sites, one
/// site at a time from its conditional distribution.
#[derive(Debug, Clone)]
pub struct OneShotSampler {
    state: Mps,
    sites: Vec<usize>,
}

impl OneShotSampler {
    pub fn new(mps: &Mps) -> Result<Self> {
        let sites = mps.active_sites();
        let mut state = mps.clone();
        if let Some(&first) = sites.first() {
            // everything right of the first site becomes a right isometry
            state.canonicalize(first)?;
        }
        Ok(OneShotSampler { state, sites })
    }

    pub fn sites(&self) -> &[usize] {
        &self.sites
    }

    /// One sample as bits in active-site order.
    pub fn sample_bits<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<u8> {
        let mut v = RowDVector::from_element(1, 1.0);
        let mut bits = Vec::with_capacity(self.sites.len());
        for &k in &self.sites {
            let t = self.state.site(k);
            let w0 = &v * &t[0];
            let w1 = &v * &t[1];
            let (p0, p1) = (w0.norm_squared(), w1.norm_squared());
            let u: f64 = rng.random();
            let (bit, w, p) = if u * (p0 + p1) < p0 {
                (0u8, w0, p0)
            } else {
                (1u8, w1, p1)
            };
            v = w / p.sqrt();
            bits.push(bit);
        }
        bits
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> PixelMap {
        self.sites
            .iter()
            .zip(self.sample_bits(rng))
            .map(|(&s, b)| (s, f64::from(b)))
            .collect()
    }
}

/// Binary rest pixels sampled from the measured state.
pub fn decode_oneshot(msg: &EncodedMessage, seed: u64) -> Result<PixelMap> {
    let sampler = OneShotSampler::new(&msg.phi)?;
    Ok(sampler.sample(&mut ChaCha8Rng::seed_from_u64(seed)))
}

/// Site order used by the post-selection decoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DecodeOrder {
    /// Largest current SEE first.
    #[default]
    MaxEntropy,
    LeftToRight,
}

/// Gray rest pixels read from the dominant eigenstates of the measured state.
pub fn decode_postselect(msg: &EncodedMessage) -> Result<PixelMap> {
    decode_postselect_with(msg, DecodeOrder::MaxEntropy)
}

pub fn decode_postselect_with(msg: &EncodedMessage, order: DecodeOrder) -> Result<PixelMap> {
    let mut state = msg.phi.clone();
    state.ensure_canonical()?;
    let mut rest = PixelMap::new();
    while state.num_active() > 0 {
        let step = greedy_step(&mut state, order == DecodeOrder::LeftToRight)?;
        rest.insert(step.site, state_to_pixel(&step.state));
    }
    Ok(rest)
}

/// The post-selection reconstruction with no pixels sent, as a `1 x N` row.
pub fn quantum_average(mps: &Mps) -> Result<Image> {
    let n = mps.len();
    let msg = EncodedMessage::unmeasured(
        mps,
        SamplingPlan {
            strategy: crate::sampling::Strategy::Entanglement,
            order: Vec::new(),
            see_trajectory: Vec::new(),
            basis_states: Vec::new(),
        },
        n,
        1,
    );
    msg.assemble(&decode_postselect(&msg)?)
}

/// `ln P(img)` under a (not necessarily normalized) model.
pub fn log_probability(mps: &Mps, img: &Image) -> Result<f64> {
    if img.len() != mps.num_active() {
        return Err(TncsError::arg("image size does not match the model"));
    }
    let (_, log_abs) = mps.log_amplitude(&image_to_product(img)?)?;
    Ok(2.0 * log_abs - mps.log_norm_squared())
}

/// Index of the model giving `img` the largest probability (lowest on ties).
pub fn classify(img: &Image, models: &[Mps]) -> Result<usize> {
    if models.is_empty() {
        return Err(TncsError::arg("no models to classify with"));
    }
    let mut best: Option<(usize, f64)> = None;
    for (k, m) in models.iter().enumerate() {
        let lp = log_probability(m, img)?;
        if lp.is_finite() && best.is_none_or(|(_, b)| lp > b) {
            best = Some((k, lp));
        }
    }
    best.map(|(k, _)| k).ok_or(TncsError::Unclassifiable)
}
