//! Python bindings: train Born machines, encode and decode images, and run
//! the encrypted exchange from Python.
//!
//! Images cross the boundary as flat row-major lists of floats in `[0, 1]`
//! together with their width and height.

use std::collections::BTreeMap;

use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use tncs::codec::{self, EncodedMessage};
use tncs::sampling::{self, SamplingPlan, Strategy};
use tncs::trainer::{self, TrainConfig};
use tncs::{Image, TncsError};

fn to_py(e: TncsError) -> PyErr {
    match e {
        TncsError::Argument(_) | TncsError::TooLarge { .. } => PyValueError::new_err(e.to_string()),
        TncsError::Io(_) => PyOSError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn image(pixels: Vec<f64>, width: usize, height: usize) -> PyResult<Image> {
    Image::new(pixels, width, height).map_err(to_py)
}

fn parse<T: std::str::FromStr<Err = TncsError>>(s: &str) -> PyResult<T> {
    s.parse().map_err(to_py)
}

/// A matrix-product-state Born machine.
#[pyclass(name = "Mps", module = "tncs")]
struct PyMps {
    inner: tncs::Mps,
}

#[pymethods]
impl PyMps {
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(PyMps {
            inner: tncs::data::load_model(path).map_err(to_py)?,
        })
    }

    /// The `n`-qubit GHZ state.
    #[staticmethod]
    fn ghz(n: usize) -> PyResult<Self> {
        Ok(PyMps {
            inner: tncs::Mps::ghz(n).map_err(to_py)?,
        })
    }

    /// The four-qubit worked example.
    #[staticmethod]
    fn four_qubit_example() -> Self {
        PyMps {
            inner: tncs::known_states::four_qubit_example(),
        }
    }

    fn save(&self, path: &str) -> PyResult<()> {
        tncs::data::save_model(&self.inner, path).map_err(to_py)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn max_bond(&self) -> usize {
        self.inner.max_bond()
    }

    /// Single-site entanglement entropy (nats).
    fn see(&self, site: usize) -> PyResult<f64> {
        self.inner.see(site).map_err(to_py)
    }

    /// `log2` of the q-sparsity and the mean-entropy profile.
    fn qsparsity(&self) -> PyResult<(f64, Vec<f64>)> {
        let q = sampling::qsparsity(&self.inner).map_err(to_py)?;
        Ok((q.log2_value, q.sbar_profile))
    }

    /// Negative log-likelihood of a set of images.
    fn nll(&self, images: Vec<Vec<f64>>) -> PyResult<f64> {
        let data = images
            .into_iter()
            .map(|p| Image::from_row(p).map_err(to_py))
            .collect::<PyResult<Vec<_>>>()?;
        trainer::nll(&self.inner, &data).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!(
            "Mps(sites={}, max_bond={})",
            self.inner.len(),
            self.inner.max_bond()
        )
    }
}

/// A measured state plus the classical pixels that travel with it.
#[pyclass(name = "Message", module = "tncs")]
struct PyMessage {
    inner: EncodedMessage,
}

#[pymethods]
impl PyMessage {
    #[getter]
    fn sent(&self) -> BTreeMap<usize, f64> {
        self.inner.sent.clone()
    }

    #[getter]
    fn order(&self) -> Vec<usize> {
        self.inner.plan.order.clone()
    }

    /// Reconstructed image pixels; `decoder` is `postselect` or `oneshot`.
    #[pyo3(signature = (decoder = "postselect", seed = 0))]
    fn decode(&self, decoder: &str, seed: u64) -> PyResult<Vec<f64>> {
        let rest = match parse(decoder)? {
            tncs::bench::Decoder::OneShot => codec::decode_oneshot(&self.inner, seed),
            tncs::bench::Decoder::PostSelect => codec::decode_postselect(&self.inner),
        }
        .map_err(to_py)?;
        Ok(self.inner.assemble(&rest).map_err(to_py)?.pixels().to_vec())
    }

    fn save(&self, dir: &str) -> PyResult<()> {
        tncs::data::save_message(&self.inner, dir).map_err(to_py)
    }

    #[staticmethod]
    fn load(dir: &str) -> PyResult<Self> {
        Ok(PyMessage {
            inner: tncs::data::load_message(dir).map_err(to_py)?,
        })
    }
}

/// Trains a Born machine on equally sized images; returns the model and its
/// final NLL.
#[pyfunction]
#[pyo3(signature = (images, chi = 16, tau = 0.05, sweeps = 20, batch = 0, seed = 0))]
fn train(
    images: Vec<Vec<f64>>,
    chi: usize,
    tau: f64,
    sweeps: usize,
    batch: usize,
    seed: u64,
) -> PyResult<(PyMps, f64)> {
    let data = images
        .into_iter()
        .map(|p| Image::from_row(p).map_err(to_py))
        .collect::<PyResult<Vec<_>>>()?;
    let cfg = TrainConfig {
        chi_max: chi,
        tau,
        sweeps,
        batch,
        seed,
        ..TrainConfig::default()
    };
    let (mps, report) = trainer::train(&data, &cfg).map_err(to_py)?;
    Ok((PyMps { inner: mps }, report.final_nll))
}

fn plan(
    model: &tncs::Mps,
    strategy: &str,
    nf: usize,
    seed: u64,
    train: Option<Vec<Vec<f64>>>,
) -> PyResult<SamplingPlan> {
    match parse(strategy)? {
        Strategy::Entanglement => sampling::plan_eosp(model, nf),
        Strategy::Random => sampling::plan_random(model.len(), nf, seed),
        Strategy::Variance => {
            let data = train
                .ok_or_else(|| PyValueError::new_err("variance ordering needs `train` images"))?
                .into_iter()
                .map(|p| Image::from_row(p).map_err(to_py))
                .collect::<PyResult<Vec<_>>>()?;
            sampling::plan_variance(&data, nf)
        }
    }
    .map_err(to_py)
}

/// Measures `nf` pixels of an image chosen by `strategy` (`eo`, `vo`, `ro`).
#[pyfunction]
#[pyo3(signature = (model, pixels, width, height, nf, strategy = "eo", seed = 0, train = None))]
#[allow(clippy::too_many_arguments)]
fn encode(
    model: &PyMps,
    pixels: Vec<f64>,
    width: usize,
    height: usize,
    nf: usize,
    strategy: &str,
    seed: u64,
    train: Option<Vec<Vec<f64>>>,
) -> PyResult<PyMessage> {
    let img = image(pixels, width, height)?;
    let plan = plan(&model.inner, strategy, nf, seed, train)?;
    Ok(PyMessage {
        inner: codec::encode(&model.inner, &img, &plan).map_err(to_py)?,
    })
}

/// Peak signal-to-noise ratio in dB; `inf` for identical images.
#[pyfunction]
fn psnr(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    let a = Image::from_row(a).map_err(to_py)?;
    let b = Image::from_row(b).map_err(to_py)?;
    tncs::metrics::psnr(&a, &b).map_err(to_py)
}

/// One encrypted exchange; pixels must lie on the 8-bit grid. Returns a
/// dict with the cipher text, both reconstructions and their PSNRs.
#[pyfunction]
#[pyo3(signature = (model, pixels, width, height, nf, salt = b"".to_vec(), strategy = "eo", seed = 0))]
#[allow(clippy::too_many_arguments)]
fn protocol<'py>(
    py: Python<'py>,
    model: &PyMps,
    pixels: Vec<f64>,
    width: usize,
    height: usize,
    nf: usize,
    salt: Vec<u8>,
    strategy: &str,
    seed: u64,
) -> PyResult<Bound<'py, pyo3::types::PyDict>> {
    let img = image(pixels, width, height)?;
    let plan = plan(&model.inner, strategy, nf, seed, None)?;
    let out = codec::protocol_round_trip(&model.inner, &img, &plan, &salt).map_err(to_py)?;
    let d = pyo3::types::PyDict::new(py);
    d.set_item("cipher", out.cipher.to_text())?;
    d.set_item("reconstructed", out.reconstructed.pixels().to_vec())?;
    d.set_item("plain", out.plain.pixels().to_vec())?;
    d.set_item("psnr_encrypted", out.psnr_encrypted)?;
    d.set_item("psnr_plain", out.psnr_plain)?;
    Ok(d)
}

#[pymodule]
#[pyo3(name = "tncs")]
fn tncs_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMps>()?;
    m.add_class::<PyMessage>()?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(encode, m)?)?;
    m.add_function(wrap_pyfunction!(psnr, m)?)?;
    m.add_function(wrap_pyfunction!(protocol, m)?)?;
    Ok(())
}
