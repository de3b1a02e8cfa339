//! Exact dense-vector oracles for small systems.
//!
//! Everything here works on the full `2^n` coefficient vector and shares no
//! code path with the MPS contractions except [`to_statevector`] itself.

use std::f64::consts::LN_2;

use nalgebra::DMatrix;

use crate::error::{Result, TncsError};
use crate::feature_map::{pixel_to_state, PixelMap};
use crate::mps::{DensityMatrix1, Mps, QubitState, EIGEN_CLIP};

/// Largest number of active sites the oracle will expand.
pub const MAX_ORACLE_SITES: usize = 20;

/// Dense state over a set of sites. Basis index bits are ordered so that the
/// first site is the most significant bit.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amps: Vec<f64>,
    sites: Vec<usize>,
}

pub fn to_statevector(mps: &Mps) -> Result<StateVector> {
    let sites = mps.active_sites();
    if sites.len() > MAX_ORACLE_SITES {
        return Err(TncsError::TooLarge {
            active: sites.len(),
            limit: MAX_ORACLE_SITES,
        });
    }
    // rows: basis prefix, cols: open right bond
    let mut acc = DMatrix::from_element(1, 1, 1.0);
    for (_, t) in mps.active_tensors() {
        let (rows, r) = (acc.nrows(), t[0].ncols());
        let mut next = DMatrix::zeros(rows * 2, r);
        for p in 0..rows {
            for (s, m) in t.iter().enumerate() {
                let row = acc.row(p) * m;
                next.row_mut(2 * p + s).copy_from(&row);
            }
        }
        acc = next;
    }
    let mut amps: Vec<f64> = acc.column(0).iter().copied().collect();
    let norm = amps.iter().map(|a| a * a).sum::<f64>().sqrt();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(TncsError::Structural("state vector has zero norm".into()));
    }
    amps.iter_mut().for_each(|a| *a /= norm);
    Ok(StateVector { amps, sites })
}

impl StateVector {
    pub fn new(amps: Vec<f64>, sites: Vec<usize>) -> Result<Self> {
        if amps.len() != 1usize << sites.len() {
            return Err(TncsError::arg("amplitude count must be 2^sites"));
        }
        Ok(StateVector { amps, sites })
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amps
    }

    pub fn sites(&self) -> &[usize] {
        &self.sites
    }

    fn bit_of(&self, site: usize) -> Result<usize> {
        let pos = self
            .sites
            .iter()
            .position(|&s| s == site)
            .ok_or_else(|| TncsError::arg(format!("site {site} not in state vector")))?;
        Ok(self.sites.len() - 1 - pos)
    }

    /// Basis probabilities `|c|^2`.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a * a).collect()
    }

    /// `<phi|psi>` for a product state listed in site order.
    pub fn amplitude(&self, phi: &[QubitState]) -> Result<f64> {
        if phi.len() != self.sites.len() {
            return Err(TncsError::arg("product state length mismatch"));
        }
        let n = self.sites.len();
        Ok(self
            .amps
            .iter()
            .enumerate()
            .map(|(idx, c)| {
                let weight: f64 = (0..n)
                    .map(|p| {
                        let bit = (idx >> (n - 1 - p)) & 1;
                        phi[p].amplitudes()[bit]
                    })
                    .product();
                c * weight
            })
            .sum())
    }

    pub fn rdm1(&self, site: usize) -> Result<DensityMatrix1> {
        let bit = self.bit_of(site)?;
        let mask = 1usize << bit;
        let mut m = [[0.0; 2]; 2];
        for (idx, &c) in self.amps.iter().enumerate() {
            if idx & mask == 0 {
                let partner = self.amps[idx | mask];
                m[0][0] += c * c;
                m[0][1] += c * partner;
                m[1][1] += partner * partner;
            }
        }
        m[1][0] = m[0][1];
        DensityMatrix1::from_unnormalized(m)
    }

    /// Entanglement entropy via a general symmetric eigensolver.
    pub fn see(&self, site: usize) -> Result<f64> {
        let rho = self.rdm1(site)?;
        let m = DMatrix::from_fn(2, 2, |i, j| rho.get(i, j));
        let eig = m.symmetric_eigen();
        Ok(eig
            .eigenvalues
            .iter()
            .filter(|&&l| l > EIGEN_CLIP)
            .map(|&l| -l * l.ln())
            .sum::<f64>()
            .clamp(0.0, LN_2))
    }

    /// `<s|_site |psi> / C` and `C`.
    pub fn project(&self, site: usize, s: QubitState) -> Result<(StateVector, f64)> {
        let bit = self.bit_of(site)?;
        let low_mask = (1usize << bit) - 1;
        let half = self.amps.len() / 2;
        let mut amps = Vec::with_capacity(half);
        for k in 0..half {
            let low = k & low_mask;
            let high = (k & !low_mask) << 1;
            let i0 = high | low;
            let i1 = i0 | (1 << bit);
            amps.push(s.a() * self.amps[i0] + s.b() * self.amps[i1]);
        }
        let c = amps.iter().map(|a| a * a).sum::<f64>().sqrt();
        if c.is_nan() || c < 1e-14 {
            return Err(TncsError::ZeroProbability { site });
        }
        amps.iter_mut().for_each(|a| *a /= c);
        let sites = self.sites.iter().copied().filter(|&x| x != site).collect();
        Ok((StateVector { amps, sites }, c))
    }

    /// `-sum P ln P` of the basis distribution (nats).
    pub fn shannon(&self) -> f64 {
        self.amps
            .iter()
            .map(|a| a * a)
            .filter(|&p| p > 0.0)
            .map(|p| -p * p.ln())
            .sum()
    }
}

/// Shannon entropy of the rest pixels' basis distribution after projecting
/// the sent pixels with their feature-map states.
pub fn shannon_conditional(mps: &Mps, sent: &PixelMap) -> Result<f64> {
    let mut sv = if mps.num_active() <= MAX_ORACLE_SITES {
        to_statevector(mps)?
    } else {
        let mut reduced = mps.clone();
        for (&site, &x) in sent {
            reduced.project_site_in_place(site, pixel_to_state(x)?)?;
        }
        return Ok(to_statevector(&reduced)?.shannon());
    };
    for (&site, &x) in sent {
        sv = sv.project(site, pixel_to_state(x)?)?.0;
    }
    Ok(sv.shannon())
}

/// Exact MPS of a dense state by successive QR factorizations.
pub fn mps_from_statevector(amps: &[f64]) -> Result<Mps> {
    let len = amps.len();
    if len < 2 || !len.is_power_of_two() {
        return Err(TncsError::arg("state vector length must be 2^n, n >= 1"));
    }
    let n = len.trailing_zeros() as usize;
    let mut sites = Vec::with_capacity(n);
    // rows: (left bond, this bit), cols: remaining bits
    let mut rest = DMatrix::from_row_slice(1, len, amps);
    let mut left = 1;
    for _ in 0..n - 1 {
        let cols = rest.ncols() / 2;
        let mut m = DMatrix::zeros(left * 2, cols);
        for l in 0..left {
            for s in 0..2 {
                for c in 0..cols {
                    m[(2 * l + s, c)] = rest[(l, s * cols + c)];
                }
            }
        }
        let qr = m.qr();
        let (q, r) = (qr.q(), qr.r());
        let k = q.ncols();
        let t = [
            DMatrix::from_fn(left, k, |l, j| q[(2 * l, j)]),
            DMatrix::from_fn(left, k, |l, j| q[(2 * l + 1, j)]),
        ];
        sites.push(t);
        rest = r;
        left = k;
    }
    sites.push([
        DMatrix::from_fn(left, 1, |l, _| rest[(l, 0)]),
        DMatrix::from_fn(left, 1, |l, _| rest[(l, 1)]),
    ]);
    let chi = sites.iter().map(|t| t[0].ncols()).max().unwrap_or(1).max(1);
    Mps::from_tensors(sites, chi)
}
