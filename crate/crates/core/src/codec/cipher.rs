//! Reversible scrambling of the sent pixels keyed by the rest pixels.
//!
//! Each sent pixel is quantized to 8 bits and shifted by one byte of a digest
//! computed from the salt, the quantized rest pixels, and the site index:
//! `y_n = (v_n + h_n) mod 256`. Only a holder of the rest pixels can undo the
//! shift. There is no integrity check: decrypting with the wrong rest pixels
//! silently yields wrong values.

use std::collections::BTreeMap;

use sha2::{Digest, Sha256};

use super::{decode_postselect, encode, EncodedMessage};
use crate::error::{Result, TncsError};
use crate::feature_map::{quantize, Image, PixelMap};
use crate::metrics::psnr;
use crate::mps::Mps;
use crate::sampling::SamplingPlan;

/// Source of the per-site offsets `h_n`.
pub trait DigestStream {
    fn offsets(&self, salt: &[u8], rest: &BTreeMap<usize, u8>, sites: &[usize]) -> Vec<u8>;
}

/// `h_n` = first byte of SHA-256(salt | rest | n).
#[derive(Debug, Clone, Copy, Default)]
pub struct Sha256Digest;

impl DigestStream for Sha256Digest {
    fn offsets(&self, salt: &[u8], rest: &BTreeMap<usize, u8>, sites: &[usize]) -> Vec<u8> {
        let mut keyed = Sha256::new();
        keyed.update((salt.len() as u64).to_le_bytes());
        keyed.update(salt);
        keyed.update((rest.len() as u64).to_le_bytes());
        for (&site, &v) in rest {
            keyed.update((site as u64).to_le_bytes());
            keyed.update([v]);
        }
        sites
            .iter()
            .map(|&n| {
                let mut h = keyed.clone();
                h.update((n as u64).to_le_bytes());
                h.finalize()[0]
            })
            .collect()
    }
}

/// All-zero offsets; encryption becomes plain quantization.
#[derive(Debug, Clone, Copy, Default)]
pub struct NullDigest;

impl DigestStream for NullDigest {
    fn offsets(&self, _: &[u8], _: &BTreeMap<usize, u8>, sites: &[usize]) -> Vec<u8> {
        vec![0; sites.len()]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CipherMessage {
    pub y_sent: BTreeMap<usize, u8>,
    pub plan: Option<SamplingPlan>,
    pub digest_salt: Vec<u8>,
}

impl CipherMessage {
    pub fn with_plan(mut self, plan: SamplingPlan) -> Self {
        self.plan = Some(plan);
        self
    }

    /// `salt=<hex>` then `site=<idx> y=<byte>` lines.
    pub fn to_text(&self) -> String {
        let mut out = format!("salt={}\n", hex::encode(&self.digest_salt));
        for (s, y) in &self.y_sent {
            out.push_str(&format!("site={s} y={y}\n"));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let salt_line = lines
            .next()
            .ok_or_else(|| TncsError::format("empty cipher message"))?;
        let salt = salt_line
            .strip_prefix("salt=")
            .ok_or_else(|| TncsError::format("cipher message must start with salt="))?;
        let digest_salt =
            hex::decode(salt).map_err(|_| TncsError::format(format!("bad hex salt {salt:?}")))?;
        let mut y_sent = BTreeMap::new();
        for line in lines {
            let mut site = None;
            let mut y = None;
            for field in line.split_whitespace() {
                match field.split_once('=') {
                    Some(("site", v)) => site = v.parse::<usize>().ok(),
                    Some(("y", v)) => y = v.parse::<u8>().ok(),
                    _ => return Err(TncsError::format(format!("bad cipher field {field:?}"))),
                }
            }
            match (site, y) {
                (Some(s), Some(v)) => {
                    y_sent.insert(s, v);
                }
                _ => return Err(TncsError::format(format!("bad cipher line {line:?}"))),
            }
        }
        Ok(CipherMessage {
            y_sent,
            plan: None,
            digest_salt,
        })
    }
}

fn quantized(map: &PixelMap) -> BTreeMap<usize, u8> {
    map.iter().map(|(&s, &x)| (s, quantize(x))).collect()
}

pub fn f_encrypt(sent: &PixelMap, rest: &PixelMap, salt: &[u8]) -> Result<CipherMessage> {
    f_encrypt_with(&Sha256Digest, sent, rest, salt)
}

pub fn f_encrypt_with(
    digest: &dyn DigestStream,
    sent: &PixelMap,
    rest: &PixelMap,
    salt: &[u8],
) -> Result<CipherMessage> {
    if rest.is_empty() {
        return Err(TncsError::arg("encryption needs at least one rest pixel"));
    }
    if let Some(s) = sent.keys().find(|s| rest.contains_key(s)) {
        return Err(TncsError::arg(format!("site {s} is both sent and rest")));
    }
    let sites: Vec<usize> = sent.keys().copied().collect();
    let offsets = digest.offsets(salt, &quantized(rest), &sites);
    let y_sent = sent
        .iter()
        .zip(offsets)
        .map(|((&s, &x), h)| (s, quantize(x).wrapping_add(h)))
        .collect();
    Ok(CipherMessage {
        y_sent,
        plan: None,
        digest_salt: salt.to_vec(),
    })
}

pub fn f_decrypt(c: &CipherMessage, rest: &PixelMap) -> Result<PixelMap> {
    f_decrypt_with(&Sha256Digest, c, rest)
}

pub fn f_decrypt_with(
    digest: &dyn DigestStream,
    c: &CipherMessage,
    rest: &PixelMap,
) -> Result<PixelMap> {
    if rest.is_empty() {
        return Err(TncsError::arg("decryption needs at least one rest pixel"));
    }
    let sites: Vec<usize> = c.y_sent.keys().copied().collect();
    let offsets = digest.offsets(&c.digest_salt, &quantized(rest), &sites);
    Ok(c.y_sent
        .iter()
        .zip(offsets)
        .map(|((&s, &y), h)| (s, f64::from(y.wrapping_sub(h)) / 255.0))
        .collect())
}

/// Result of one simulated encrypted exchange.
#[derive(Debug, Clone)]
pub struct ProtocolOutcome {
    pub cipher: CipherMessage,
    /// Receiver's image built from decrypted sent pixels.
    pub reconstructed: Image,
    /// The same exchange without encryption.
    pub plain: Image,
    pub psnr_encrypted: f64,
    pub psnr_plain: f64,
}

/// Simulates the encrypted exchange of one image.
///
/// The sender measures the Born machine with the true sent pixels and keys
/// the cipher on the post-selection reconstruction of the rest, which the
/// receiver can reproduce bit for bit from the measured state. Pixels must
/// already sit on the 8-bit grid, otherwise decryption could not be exact.
pub fn protocol_round_trip(
    mps: &Mps,
    img: &Image,
    plan: &SamplingPlan,
    salt: &[u8],
) -> Result<ProtocolOutcome> {
    if let Some(k) = img
        .pixels()
        .iter()
        .position(|&x| f64::from(quantize(x)) / 255.0 != x)
    {
        return Err(TncsError::arg(format!("pixel {k} is not 8-bit quantized")));
    }
    // sender
    let msg = encode(mps, img, plan)?;
    let key_rest = decode_postselect(&msg)?;
    let cipher = f_encrypt(&msg.sent, &key_rest, salt)?.with_plan(plan.clone());
    let wire = cipher.to_text();

    // receiver: gets the measured state and the classical cipher text
    let received = EncodedMessage {
        sent: PixelMap::new(),
        ..msg.clone()
    };
    let rest = decode_postselect(&received)?;
    let sent = f_decrypt(&CipherMessage::from_text(&wire)?, &rest)?;
    let reconstructed = Image::assemble(img.width(), img.height(), &[&sent, &rest])?;

    let plain = msg.assemble(&rest)?;
    Ok(ProtocolOutcome {
        psnr_encrypted: psnr(img, &reconstructed)?,
        psnr_plain: psnr(img, &plain)?,
        cipher,
        reconstructed,
        plain,
    })
}
