//! Datasets, preprocessing, and everything that touches the file system.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::codec::{pixel_map_from_text, pixel_map_to_text, EncodedMessage};
use crate::error::{Result, TncsError};
use crate::feature_map::{quantize, Image};
use crate::mps::Mps;
use crate::sampling::SamplingPlan;

const IDX_IMAGES: u32 = 0x0000_0803;
const IDX_LABELS: u32 = 0x0000_0801;

/// Labelled images of one geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub images: Vec<Image>,
    pub labels: Vec<u8>,
    pub name: String,
}

impl Dataset {
    pub fn new(images: Vec<Image>, labels: Vec<u8>, name: impl Into<String>) -> Result<Self> {
        if images.len() != labels.len() {
            return Err(TncsError::Consistency(format!(
                "{} images but {} labels",
                images.len(),
                labels.len()
            )));
        }
        if let Some(first) = images.first() {
            if let Some(k) = images.iter().position(|im| !im.same_geometry(first)) {
                return Err(TncsError::Consistency(format!(
                    "image {k} differs in geometry from image 0"
                )));
            }
        }
        if let Some(&l) = labels.iter().find(|&&l| l > 9) {
            return Err(TncsError::arg(format!("label {l} outside 0-9")));
        }
        Ok(Dataset {
            images,
            labels,
            name: name.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// `(width, height)` of the images, if any.
    pub fn geometry(&self) -> Option<(usize, usize)> {
        self.images.first().map(|im| (im.width(), im.height()))
    }

    /// Images `range` as a new dataset.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Result<Dataset> {
        if range.end > self.len() || range.start > range.end {
            return Err(TncsError::arg(format!(
                "range {range:?} outside a dataset of {}",
                self.len()
            )));
        }
        Ok(Dataset {
            images: self.images[range.clone()].to_vec(),
            labels: self.labels[range].to_vec(),
            name: self.name.clone(),
        })
    }

    /// Every image downscaled by `factor`.
    pub fn downscaled(&self, factor: usize) -> Result<Dataset> {
        Ok(Dataset {
            images: self
                .images
                .iter()
                .map(|im| downscale(im, factor))
                .collect::<Result<_>>()?,
            labels: self.labels.clone(),
            name: self.name.clone(),
        })
    }
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_be_bytes(b))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path)?))
}

/// Parses an IDX image file and its label file.
pub fn read_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<Dataset> {
    let images_path = images_path.as_ref();
    let mut r = open(images_path)?;
    let magic = read_u32(&mut r)?;
    if magic != IDX_IMAGES {
        return Err(TncsError::format(format!(
            "{}: magic {magic:#010x}, expected {IDX_IMAGES:#010x}",
            images_path.display()
        )));
    }
    let count = read_u32(&mut r)? as usize;
    let rows = read_u32(&mut r)? as usize;
    let cols = read_u32(&mut r)? as usize;
    let mut buf = vec![0u8; rows * cols];
    let mut images = Vec::with_capacity(count);
    for _ in 0..count {
        r.read_exact(&mut buf)?;
        images.push(Image::from_bytes(&buf, cols, rows)?);
    }

    let labels_path = labels_path.as_ref();
    let mut r = open(labels_path)?;
    let magic = read_u32(&mut r)?;
    if magic != IDX_LABELS {
        return Err(TncsError::format(format!(
            "{}: magic {magic:#010x}, expected {IDX_LABELS:#010x}",
            labels_path.display()
        )));
    }
    let n_labels = read_u32(&mut r)? as usize;
    if n_labels != count {
        return Err(TncsError::Consistency(format!(
            "{count} images but {n_labels} labels"
        )));
    }
    let mut labels = vec![0u8; n_labels];
    r.read_exact(&mut labels)?;

    let name = images_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Dataset::new(images, labels, name)
}

/// Writes `ds` as an IDX image file and label file (pixels quantized to bytes).
pub fn write_idx(
    ds: &Dataset,
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
) -> Result<()> {
    let (w, h) = ds.geometry().unwrap_or((0, 0));
    let mut out = BufWriter::new(File::create(images_path)?);
    for v in [IDX_IMAGES, ds.len() as u32, h as u32, w as u32] {
        out.write_all(&v.to_be_bytes())?;
    }
    for im in &ds.images {
        out.write_all(&im.to_bytes())?;
    }
    out.flush()?;

    let mut out = BufWriter::new(File::create(labels_path)?);
    out.write_all(&IDX_LABELS.to_be_bytes())?;
    out.write_all(&(ds.len() as u32).to_be_bytes())?;
    out.write_all(&ds.labels)?;
    out.flush()?;
    Ok(())
}

/// The images labelled `label`, in their original order.
pub fn filter_class(ds: &Dataset, label: u8) -> Result<Dataset> {
    if label > 9 {
        return Err(TncsError::arg(format!("label {label} outside 0-9")));
    }
    let (images, labels) = ds
        .images
        .iter()
        .zip(&ds.labels)
        .filter(|(_, &l)| l == label)
        .map(|(im, &l)| (im.clone(), l))
        .unzip();
    Ok(Dataset {
        images,
        labels,
        name: ds.name.clone(),
    })
}

/// Non-overlapping `factor x factor` block means.
pub fn downscale(img: &Image, factor: usize) -> Result<Image> {
    let (w, h) = (img.width(), img.height());
    if factor == 0 || w % factor != 0 || h % factor != 0 {
        return Err(TncsError::arg(format!(
            "{w}x{h} image is not divisible by factor {factor}"
        )));
    }
    let (sw, sh) = (w / factor, h / factor);
    let area = (factor * factor) as f64;
    let px = img.pixels();
    let mut out = Vec::with_capacity(sw * sh);
    for by in 0..sh {
        for bx in 0..sw {
            let mut sum = 0.0;
            for y in by * factor..(by + 1) * factor {
                sum += px[y * w + bx * factor..y * w + (bx + 1) * factor]
                    .iter()
                    .sum::<f64>();
            }
            out.push((sum / area).clamp(0.0, 1.0));
        }
    }
    Image::new(out, sw, sh)
}

/// 8-bit binary PGM (`P5`).
pub fn write_pgm(img: &Image, path: impl AsRef<Path>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write!(out, "P5\n{} {}\n255\n", img.width(), img.height())?;
    out.write_all(&img.to_bytes())?;
    out.flush()?;
    Ok(())
}

/// Reads a PGM written by [`write_pgm`] (no comments, maxval 255).
pub fn read_pgm(path: impl AsRef<Path>) -> Result<Image> {
    let bytes = fs::read(path)?;
    let mut fields = Vec::with_capacity(4);
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(TncsError::format("truncated PGM header"));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    pos += 1;
    let num = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| TncsError::format(format!("bad PGM header field {s:?}")))
    };
    if fields[0] != "P5" || num(&fields[3])? != 255 {
        return Err(TncsError::format("only 8-bit P5 PGM is supported"));
    }
    let (w, h) = (num(&fields[1])?, num(&fields[2])?);
    let data = bytes
        .get(pos..pos + w * h)
        .ok_or_else(|| std::io::Error::from(std::io::ErrorKind::UnexpectedEof))?;
    Image::from_bytes(data, w, h)
}

/// Writes the model in the binary MPS format. The file is written whole or
/// not at all: a temporary sibling is renamed into place.
pub fn save_model(mps: &Mps, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let tmp = path.with_extension("partial");
    {
        let mut out = BufWriter::new(File::create(&tmp)?);
        mps.write_binary(&mut out)?;
        out.flush()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Mps> {
    Mps::read_binary(&mut open(path.as_ref())?)
}

/// Stores a message as `phi.mps`, `plan.txt`, `sent.txt` and `meta.txt` in `dir`.
pub fn save_message(msg: &EncodedMessage, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    save_model(&msg.phi, dir.join("phi.mps"))?;
    fs::write(dir.join("plan.txt"), msg.plan.to_text())?;
    fs::write(dir.join("sent.txt"), pixel_map_to_text(&msg.sent))?;
    fs::write(
        dir.join("meta.txt"),
        format!("width={}\nheight={}\n", msg.width, msg.height),
    )?;
    Ok(())
}

pub fn load_message(dir: impl AsRef<Path>) -> Result<EncodedMessage> {
    let dir = dir.as_ref();
    let phi = load_model(dir.join("phi.mps"))?;
    let plan = SamplingPlan::from_text(&fs::read_to_string(dir.join("plan.txt"))?)?;
    let sent = pixel_map_from_text(&fs::read_to_string(dir.join("sent.txt"))?)?;
    let meta = fs::read_to_string(dir.join("meta.txt"))?;
    let mut width = None;
    let mut height = None;
    for line in meta.lines().map(str::trim).filter(|l| !l.is_empty()) {
        match line.split_once('=') {
            Some(("width", v)) => width = v.parse::<usize>().ok(),
            Some(("height", v)) => height = v.parse::<usize>().ok(),
            _ => return Err(TncsError::format(format!("bad meta line {line:?}"))),
        }
    }
    let (width, height) = width
        .zip(height)
        .ok_or_else(|| TncsError::format("meta.txt needs width and height"))?;
    if width * height != phi.len() {
        return Err(TncsError::Consistency(format!(
            "{width}x{height} message for a {}-site state",
            phi.len()
        )));
    }
    if let Some(s) = sent.keys().find(|&&s| phi.is_active(s)) {
        return Err(TncsError::Consistency(format!(
            "site {s} is listed as sent but is unmeasured in the state"
        )));
    }
    Ok(EncodedMessage {
        phi,
        sent,
        plan,
        width,
        height,
    })
}

/// Quantizes then rescales, i.e. what an image looks like after a round trip
/// through an 8-bit file.
pub fn quantized_image(img: &Image) -> Image {
    let px = img
        .pixels()
        .iter()
        .map(|&x| f64::from(quantize(x)) / 255.0)
        .collect();
    Image::new(px, img.width(), img.height()).expect("quantized pixels stay in [0,1]")
}
