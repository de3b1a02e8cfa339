//! Pixel <-> qubit embedding: `x -> cos(x pi/2)|0> + sin(x pi/2)|1>`.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;

use crate::error::{Result, TncsError};
use crate::mps::QubitState;

/// Pixels of a partial image keyed by site index.
pub type PixelMap = BTreeMap<usize, f64>;

/// Gray-scale image with pixels in `[0, 1]`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pixels: Vec<f64>,
    width: usize,
    height: usize,
}

impl Image {
    pub fn new(pixels: Vec<f64>, width: usize, height: usize) -> Result<Self> {
        if width * height != pixels.len() {
            return Err(TncsError::arg(format!(
                "{}x{} image needs {} pixels, got {}",
                width,
                height,
                width * height,
                pixels.len()
            )));
        }
        if let Some((n, x)) = pixels
            .iter()
            .enumerate()
            .find(|(_, x)| !(0.0..=1.0).contains(*x))
        {
            return Err(TncsError::arg(format!("pixel {n} = {x} outside [0, 1]")));
        }
        Ok(Image {
            pixels,
            width,
            height,
        })
    }

    /// A `1 x N` strip; convenient for small synthetic examples.
    pub fn from_row(pixels: Vec<f64>) -> Result<Self> {
        let n = pixels.len();
        Image::new(pixels, n, 1)
    }

    /// 8-bit gray levels scaled by `1/255`.
    pub fn from_bytes(bytes: &[u8], width: usize, height: usize) -> Result<Self> {
        Image::new(
            bytes.iter().map(|&v| f64::from(v) / 255.0).collect(),
            width,
            height,
        )
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn same_geometry(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Pixels at `sites`, keyed by index.
    pub fn select(&self, sites: impl IntoIterator<Item = usize>) -> PixelMap {
        sites.into_iter().map(|n| (n, self.pixels[n])).collect()
    }

    /// Pixels not in `excluded`.
    pub fn complement(&self, excluded: &PixelMap) -> PixelMap {
        (0..self.len())
            .filter(|n| !excluded.contains_key(n))
            .map(|n| (n, self.pixels[n]))
            .collect()
    }

    /// Reassembles an image from disjoint fragments covering every pixel.
    pub fn assemble(width: usize, height: usize, parts: &[&PixelMap]) -> Result<Self> {
        let n = width * height;
        let mut pixels = vec![f64::NAN; n];
        for part in parts {
            for (&site, &x) in part.iter() {
                if site >= n {
                    return Err(TncsError::arg(format!("site {site} outside image")));
                }
                pixels[site] = x;
            }
        }
        if let Some(missing) = pixels.iter().position(|x| x.is_nan()) {
            return Err(TncsError::arg(format!("pixel {missing} not provided")));
        }
        Image::new(pixels, width, height)
    }

    /// Nearest 8-bit gray level of every pixel.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.pixels.iter().map(|&x| quantize(x)).collect()
    }
}

/// `round(255 x)` for `x` in `[0, 1]`.
pub fn quantize(x: f64) -> u8 {
    (x.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn pixel_to_state(x: f64) -> Result<QubitState> {
    if !(0.0..=1.0).contains(&x) {
        return Err(TncsError::arg(format!("pixel value {x} outside [0, 1]")));
    }
    // exact basis states for binary pixels; cos(pi/2) is not zero in floating point
    if x == 1.0 {
        return Ok(QubitState::ONE);
    }
    let angle = x * FRAC_PI_2;
    QubitState::new(angle.cos(), angle.sin())
}

/// Inverse of [`pixel_to_state`]; signs are folded into the first quadrant.
pub fn state_to_pixel(s: &QubitState) -> f64 {
    (s.b().abs().atan2(s.a().abs()) / FRAC_PI_2).clamp(0.0, 1.0)
}

pub fn image_to_product(img: &Image) -> Result<Vec<QubitState>> {
    img.pixels().iter().map(|&x| pixel_to_state(x)).collect()
}

pub fn pixels_to_states(pixels: &[f64]) -> Result<Vec<QubitState>> {
    pixels.iter().map(|&x| pixel_to_state(x)).collect()
}
