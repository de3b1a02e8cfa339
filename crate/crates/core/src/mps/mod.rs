//! Open-boundary matrix product states with physical dimension 2.
//!
//! Each site holds two real matrices `A[s]` (one per physical index `s`) of
//! shape `left x right`. The first and last bonds have dimension 1. Sites that
//! have been measured out are kept in place with empty tensors and an inactive
//! flag, so site indices always refer to positions of the original chain.
//!
//! ```text
//!   1 -- A[0] -- A[1] -- ... -- A[N-1] -- 1
//!         |       |              |
//!         s0      s1             sN-1
//! ```
//!
//! When a center `k` is recorded, every active tensor left of `k` is a left
//! isometry (`sum_s A[s]^T A[s] = I`) and every active tensor right of `k` is
//! a right isometry (`sum_s A[s] A[s]^T = I`).

mod binary;
mod local;

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Result, TncsError};

pub use binary::{FORMAT_VERSION, MAGIC};
pub use local::{DensityMatrix1, QubitState, DEGENERACY_TOL, EIGEN_CLIP};

/// Projection norms below this are treated as impossible outcomes.
pub const ZERO_PROBABILITY: f64 = 1e-14;

/// Trace-normalized boundary matrix; `None` stands for the identity.
type Environment = Option<DMatrix<f64>>;

/// Matrices of one site, indexed by the physical state.
pub type SiteTensor = [DMatrix<f64>; 2];

fn empty_site() -> SiteTensor {
    [DMatrix::zeros(0, 0), DMatrix::zeros(0, 0)]
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mps {
    sites: Vec<SiteTensor>,
    active: Vec<bool>,
    center: Option<usize>,
    chi_max: usize,
}

impl Mps {
    /// Builds an MPS from per-site tensors, all active. Validates shapes.
    pub fn from_tensors(sites: Vec<SiteTensor>, chi_max: usize) -> Result<Self> {
        let n = sites.len();
        let mps = Mps {
            sites,
            active: vec![true; n],
            center: None,
            chi_max,
        };
        mps.validate()?;
        Ok(mps)
    }

    /// Builds an MPS that may contain inactive sites (empty tensors).
    pub(crate) fn from_parts(sites: Vec<SiteTensor>, active: Vec<bool>) -> Result<Self> {
        let chi_max = sites
            .iter()
            .map(|t| t[0].nrows().max(t[0].ncols()))
            .max()
            .unwrap_or(1)
            .max(1);
        let mut mps = Mps {
            sites,
            active,
            center: None,
            chi_max,
        };
        mps.validate()?;
        mps.center = mps.detect_center();
        Ok(mps)
    }

    /// The first active site that can serve as a recorded center: everything
    /// before it is a left isometry, everything after it a right isometry,
    /// and it carries unit norm.
    fn detect_center(&self) -> Option<usize> {
        const TOL: f64 = 1e-12;
        let act = self.active_sites();
        let is_identity = |g: DMatrix<f64>| {
            g.iter().enumerate().all(|(idx, &x)| {
                let (i, j) = (idx % g.nrows(), idx / g.nrows());
                (x - if i == j { 1.0 } else { 0.0 }).abs() < TOL
            })
        };
        let left_iso: Vec<bool> = act
            .iter()
            .map(|&n| {
                let t = &self.sites[n];
                is_identity(t[0].transpose() * &t[0] + t[1].transpose() * &t[1])
            })
            .collect();
        let right_iso: Vec<bool> = act
            .iter()
            .map(|&n| {
                let t = &self.sites[n];
                is_identity(&t[0] * t[0].transpose() + &t[1] * t[1].transpose())
            })
            .collect();
        let pos = (0..act.len())
            .find(|&p| left_iso[..p].iter().all(|&b| b) && right_iso[p + 1..].iter().all(|&b| b))?;
        let t = &self.sites[act[pos]];
        let norm2 = t[0].norm_squared() + t[1].norm_squared();
        ((norm2 - 1.0).abs() < TOL).then_some(act[pos])
    }

    fn validate(&self) -> Result<()> {
        if self.chi_max == 0 {
            return Err(TncsError::arg("chi_max must be at least 1"));
        }
        if self.active.len() != self.sites.len() {
            return Err(TncsError::Structural("active mask length mismatch".into()));
        }
        let mut prev_right = 1usize;
        for (n, t) in self.sites.iter().enumerate() {
            if !self.active[n] {
                if !t[0].is_empty() || !t[1].is_empty() {
                    return Err(TncsError::Structural(format!(
                        "inactive site {n} carries a tensor"
                    )));
                }
                continue;
            }
            if t[0].shape() != t[1].shape() {
                return Err(TncsError::Structural(format!(
                    "site {n}: physical slices have different shapes"
                )));
            }
            let (l, r) = t[0].shape();
            if l != prev_right {
                return Err(TncsError::Structural(format!(
                    "site {n}: left bond {l} does not match previous right bond {prev_right}"
                )));
            }
            if l == 0 || r == 0 {
                return Err(TncsError::Structural(format!("site {n}: empty bond")));
            }
            if l > self.chi_max || r > self.chi_max {
                return Err(TncsError::Structural(format!(
                    "site {n}: bond ({l}, {r}) exceeds chi_max {}",
                    self.chi_max
                )));
            }
            prev_right = r;
        }
        if prev_right != 1 {
            return Err(TncsError::Structural(format!(
                "last right bond is {prev_right}, expected 1"
            )));
        }
        Ok(())
    }

    /// The separable state `prod_n |s_n>`.
    pub fn product_state(states: &[QubitState]) -> Self {
        let sites = states
            .iter()
            .map(|s| {
                [
                    DMatrix::from_element(1, 1, s.a()),
                    DMatrix::from_element(1, 1, s.b()),
                ]
            })
            .collect::<Vec<_>>();
        let n = sites.len();
        Mps {
            sites,
            active: vec![true; n],
            center: None,
            chi_max: 1,
        }
    }

    /// `(|0...0> + |1...1>) / sqrt(2)` on `n >= 2` qubits, bond dimension 2.
    pub fn ghz(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(TncsError::arg("GHZ state needs at least 2 qubits"));
        }
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let mut sites = Vec::with_capacity(n);
        for i in 0..n {
            let (l, r) = if i == 0 {
                (1, 2)
            } else if i == n - 1 {
                (2, 1)
            } else {
                (2, 2)
            };
            let mut t = [DMatrix::zeros(l, r), DMatrix::zeros(l, r)];
            for (s, m) in t.iter_mut().enumerate() {
                let li = if l == 1 { 0 } else { s };
                let ri = if r == 1 { 0 } else { s };
                m[(li, ri)] = if i == 0 { h } else { 1.0 };
            }
            sites.push(t);
        }
        Mps::from_tensors(sites, 2)
    }

    /// Random tensors with entries uniform in `[low, high)`; bond dimensions
    /// are `min(chi, 2^k, 2^(N-k))`. The result is not canonical.
    pub fn random<R: Rng + ?Sized>(
        n: usize,
        chi: usize,
        low: f64,
        high: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if n == 0 {
            return Err(TncsError::arg("MPS needs at least one site"));
        }
        if chi == 0 {
            return Err(TncsError::arg("chi must be at least 1"));
        }
        let bond = |k: usize| -> usize {
            let cap = |e: usize| if e >= 63 { usize::MAX } else { 1usize << e };
            chi.min(cap(k)).min(cap(n - k))
        };
        let sites = (0..n)
            .map(|i| {
                let (l, r) = (bond(i), bond(i + 1));
                [
                    DMatrix::from_fn(l, r, |_, _| rng.random_range(low..high)),
                    DMatrix::from_fn(l, r, |_, _| rng.random_range(low..high)),
                ]
            })
            .collect();
        Mps::from_tensors(sites, chi)
    }

    /// Total number of sites, including measured ones.
    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn num_active(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }

    pub fn is_active(&self, n: usize) -> bool {
        self.active.get(n).copied().unwrap_or(false)
    }

    pub fn active_mask(&self) -> &[bool] {
        &self.active
    }

    pub fn active_sites(&self) -> Vec<usize> {
        (0..self.len()).filter(|&n| self.active[n]).collect()
    }

    pub fn center(&self) -> Option<usize> {
        self.center
    }

    pub fn chi_max(&self) -> usize {
        self.chi_max
    }

    pub fn max_bond(&self) -> usize {
        self.sites
            .iter()
            .map(|t| t[0].nrows().max(t[0].ncols()))
            .max()
            .unwrap_or(0)
    }

    pub fn site(&self, n: usize) -> &SiteTensor {
        &self.sites[n]
    }

    /// Replaces the tensor at an active site. Drops the canonical center.
    pub fn set_site(&mut self, n: usize, tensor: SiteTensor) -> Result<()> {
        self.require_active(n)?;
        let old = std::mem::replace(&mut self.sites[n], tensor);
        if let Err(e) = self.validate() {
            self.sites[n] = old;
            return Err(e);
        }
        self.center = None;
        Ok(())
    }

    /// Multiplies every active tensor by `factor`. Drops the canonical center.
    pub fn scale(&mut self, factor: f64) {
        for (t, _) in self.sites.iter_mut().zip(&self.active).filter(|(_, &a)| a) {
            t[0] *= factor;
            t[1] *= factor;
        }
        self.center = None;
    }

    /// Overwrites the tensor at the current center without breaking the
    /// isometries around it.
    pub(crate) fn set_center_tensor(&mut self, tensor: SiteTensor) {
        let c = self.center.expect("set_center_tensor requires a center");
        debug_assert_eq!(tensor[0].shape(), self.sites[c][0].shape());
        self.sites[c] = tensor;
    }

    /// Moves the center one active site to the right. Returns the new center.
    pub(crate) fn shift_center_right(&mut self) -> Option<usize> {
        let c = self.center?;
        let j = self.next_active(c)?;
        self.left_orthonormalize(c, j);
        self.center = Some(j);
        Some(j)
    }

    /// Moves the center one active site to the left. Returns the new center.
    pub(crate) fn shift_center_left(&mut self) -> Option<usize> {
        let c = self.center?;
        let j = self.prev_active(c)?;
        self.right_orthonormalize(c, j);
        self.center = Some(j);
        Some(j)
    }

    pub(crate) fn require_active(&self, n: usize) -> Result<()> {
        if n >= self.len() {
            return Err(TncsError::arg(format!(
                "site {n} out of range for {} sites",
                self.len()
            )));
        }
        if !self.active[n] {
            return Err(TncsError::arg(format!(
                "site {n} has already been measured"
            )));
        }
        Ok(())
    }

    fn next_active(&self, n: usize) -> Option<usize> {
        (n + 1..self.len()).find(|&i| self.active[i])
    }

    fn prev_active(&self, n: usize) -> Option<usize> {
        (0..n).rev().find(|&i| self.active[i])
    }

    /// Moves the orthogonality center to active site `k` and normalizes.
    pub fn canonicalize(&mut self, k: usize) -> Result<()> {
        self.require_active(k)?;
        match self.center {
            Some(c) if c <= k => {
                let mut i = c;
                while i < k {
                    let j = self.next_active(i).expect("k is active and right of i");
                    self.left_orthonormalize(i, j);
                    i = j;
                }
            }
            Some(c) => {
                let mut i = c;
                while i > k {
                    let j = self.prev_active(i).expect("k is active and left of i");
                    self.right_orthonormalize(i, j);
                    i = j;
                }
            }
            None => {
                let act = self.active_sites();
                let pos = act.iter().position(|&i| i == k).expect("k is active");
                for w in act[..=pos].windows(2) {
                    self.left_orthonormalize(w[0], w[1]);
                }
                for w in act[pos..].windows(2).rev() {
                    self.right_orthonormalize(w[1], w[0]);
                }
            }
        }
        self.center = Some(k);
        self.normalize_center()
    }

    /// Returns a copy canonicalized at `k`.
    pub fn canonicalized(&self, k: usize) -> Result<Self> {
        let mut out = self.clone();
        out.canonicalize(k)?;
        Ok(out)
    }

    /// Canonicalizes at the first active site when no center is recorded.
    pub fn ensure_canonical(&mut self) -> Result<()> {
        if self.center.is_none() {
            if let Some(first) = self.active.iter().position(|&a| a) {
                self.canonicalize(first)?;
            }
        }
        Ok(())
    }

    fn normalize_center(&mut self) -> Result<()> {
        let c = self.center.expect("center set");
        let t = &mut self.sites[c];
        let norm = (t[0].norm_squared() + t[1].norm_squared()).sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(TncsError::Structural(format!(
                "state has norm {norm} and cannot be normalized"
            )));
        }
        t[0] /= norm;
        t[1] /= norm;
        Ok(())
    }

    /// QR on site `i` reshaped as `(s, left) x right`; pushes R into site `j`.
    fn left_orthonormalize(&mut self, i: usize, j: usize) {
        let (l, r) = self.sites[i][0].shape();
        let mut m = DMatrix::zeros(2 * l, r);
        for s in 0..2 {
            m.view_mut((s * l, 0), (l, r)).copy_from(&self.sites[i][s]);
        }
        let qr = m.qr();
        let (mut q, mut rr) = (qr.q(), qr.r());
        fix_signs(&mut q, &mut rr);
        let scale = rr.norm();
        if scale > 0.0 {
            rr /= scale;
        }
        let k = q.ncols();
        self.sites[i] = [
            q.view((0, 0), (l, k)).into_owned(),
            q.view((l, 0), (l, k)).into_owned(),
        ];
        let next = &mut self.sites[j];
        next[0] = &rr * &next[0];
        next[1] = &rr * &next[1];
    }

    /// LQ on site `i` reshaped as `left x (s, right)`; pushes L into site `j`.
    fn right_orthonormalize(&mut self, i: usize, j: usize) {
        let (l, r) = self.sites[i][0].shape();
        let mut mt = DMatrix::zeros(2 * r, l);
        for s in 0..2 {
            mt.view_mut((s * r, 0), (r, l))
                .copy_from(&self.sites[i][s].transpose());
        }
        let qr = mt.qr();
        let (mut q, mut rr) = (qr.q(), qr.r());
        fix_signs(&mut q, &mut rr);
        let scale = rr.norm();
        if scale > 0.0 {
            rr /= scale;
        }
        let k = q.ncols();
        self.sites[i] = [
            q.view((0, 0), (r, k)).transpose(),
            q.view((r, 0), (r, k)).transpose(),
        ];
        let lmat = rr.transpose();
        let prev = &mut self.sites[j];
        prev[0] = &prev[0] * &lmat;
        prev[1] = &prev[1] * &lmat;
    }

    /// `ln <Psi|Psi>`, accumulated with rescaling so long chains do not overflow.
    pub fn log_norm_squared(&self) -> f64 {
        let mut env = DMatrix::from_element(1, 1, 1.0);
        let mut log_acc = 0.0;
        for (t, _) in self.sites.iter().zip(&self.active).filter(|(_, &a)| a) {
            env = t[0].tr_mul(&env) * &t[0] + t[1].tr_mul(&env) * &t[1];
            let tr = env.trace();
            if !(tr > 0.0 && tr.is_finite()) {
                return f64::NEG_INFINITY;
            }
            env /= tr;
            log_acc += tr.ln();
        }
        log_acc + env[(0, 0)].ln()
    }

    pub fn norm_squared(&self) -> f64 {
        self.log_norm_squared().exp()
    }

    fn check_phi(&self, phi: &[QubitState]) -> Result<()> {
        let active = self.num_active();
        if phi.len() != active {
            return Err(TncsError::arg(format!(
                "expected {active} qubit states, got {}",
                phi.len()
            )));
        }
        Ok(())
    }

    /// `<phi|Psi>` for a product state over the active sites.
    pub fn amplitude(&self, phi: &[QubitState]) -> Result<f64> {
        let (sign, log_abs) = self.log_amplitude(phi)?;
        Ok(sign * log_abs.exp())
    }

    /// `(sign, ln|<phi|Psi>|)` via a left-to-right zipper with rescaling.
    /// A vanishing overlap returns `(0, -inf)`.
    pub fn log_amplitude(&self, phi: &[QubitState]) -> Result<(f64, f64)> {
        self.check_phi(phi)?;
        let mut v = DMatrix::from_element(1, 1, 1.0);
        let mut log_acc = 0.0;
        let sites = self
            .sites
            .iter()
            .zip(&self.active)
            .filter(|(_, &a)| a)
            .map(|(t, _)| t);
        for (t, s) in sites.zip(phi) {
            let m = &t[0] * s.a() + &t[1] * s.b();
            v = &v * m;
            let scale = v.amax();
            if scale == 0.0 || !scale.is_finite() {
                return Ok((0.0, f64::NEG_INFINITY));
            }
            v /= scale;
            log_acc += scale.ln();
        }
        let val = v[(0, 0)];
        if val == 0.0 {
            return Ok((0.0, f64::NEG_INFINITY));
        }
        Ok((val.signum(), log_acc + val.abs().ln()))
    }

    /// Left and right environments of every active site, each normalized to
    /// unit trace. `None` stands for an identity environment, which holds on
    /// both sides of a recorded center.
    fn environments(&self) -> (Vec<Environment>, Vec<Environment>) {
        let n = self.len();
        let mut left: Vec<Option<DMatrix<f64>>> = vec![None; n];
        let mut right: Vec<Option<DMatrix<f64>>> = vec![None; n];
        let act = self.active_sites();
        let m = act.len();
        if m == 0 {
            return (left, right);
        }
        let center_pos = self.center.and_then(|c| act.iter().position(|&i| i == c));
        let unit = || Some(DMatrix::from_element(1, 1, 1.0));

        let (start, mut env) = match center_pos {
            Some(c) => (c, None),
            None => (0, unit()),
        };
        left[act[start]] = env.clone();
        for p in start..m - 1 {
            env = Some(transfer_left(&self.sites[act[p]], env.as_ref()));
            left[act[p + 1]] = env.clone();
        }

        let (stop, mut env) = match center_pos {
            Some(c) => (c, None),
            None => (m - 1, unit()),
        };
        right[act[stop]] = env.clone();
        for p in (1..=stop).rev() {
            env = Some(transfer_right(&self.sites[act[p]], env.as_ref()));
            right[act[p - 1]] = env.clone();
        }
        (left, right)
    }

    fn rdm_from_envs(
        t: &SiteTensor,
        left: Option<&DMatrix<f64>>,
        right: Option<&DMatrix<f64>>,
    ) -> Result<DensityMatrix1> {
        let lr: Vec<DMatrix<f64>> = t
            .iter()
            .map(|a| {
                let la = match left {
                    Some(l) => l * a,
                    None => a.clone(),
                };
                match right {
                    Some(r) => la * r,
                    None => la,
                }
            })
            .collect();
        let mut m = [[0.0; 2]; 2];
        for s in 0..2 {
            for u in 0..2 {
                m[s][u] = lr[s].dot(&t[u]);
            }
        }
        DensityMatrix1::from_unnormalized(m)
    }

    /// Single-site reduced density matrix of active site `n`.
    pub fn rdm1(&self, n: usize) -> Result<DensityMatrix1> {
        self.require_active(n)?;
        if self.center == Some(n) {
            return Self::rdm_from_envs(&self.sites[n], None, None);
        }
        let moved = self.canonicalized(n)?;
        Self::rdm_from_envs(&moved.sites[n], None, None)
    }

    /// Reduced density matrices of every active site, in site order.
    pub fn rdm1_all(&self) -> Result<Vec<(usize, DensityMatrix1)>> {
        let (left, right) = self.environments();
        self.active_sites()
            .into_iter()
            .map(|n| {
                Self::rdm_from_envs(&self.sites[n], left[n].as_ref(), right[n].as_ref())
                    .map(|r| (n, r))
            })
            .collect()
    }

    /// Single-site entanglement entropy (nats).
    pub fn see(&self, n: usize) -> Result<f64> {
        Ok(self.rdm1(n)?.entropy())
    }

    /// Entanglement entropy of every active site, in site order.
    pub fn see_all(&self) -> Result<Vec<(usize, f64)>> {
        Ok(self
            .rdm1_all()?
            .into_iter()
            .map(|(n, r)| (n, r.entropy()))
            .collect())
    }

    /// Returns `<s|_n |Psi> / C` together with `C`.
    pub fn project_site(&self, n: usize, s: QubitState) -> Result<(Mps, f64)> {
        let mut out = self.clone();
        let c = out.project_site_in_place(n, s)?;
        Ok((out, c))
    }

    /// In-place version of [`Mps::project_site`]. On error the state is left
    /// canonicalized at `n` but otherwise unchanged.
    pub fn project_site_in_place(&mut self, n: usize, s: QubitState) -> Result<f64> {
        self.canonicalize(n)?;
        let t = &self.sites[n];
        let m = &t[0] * s.a() + &t[1] * s.b();
        if let Some(j) = self.next_active(n) {
            let nb = &self.sites[j];
            let merged = [&m * &nb[0], &m * &nb[1]];
            let c = (merged[0].norm_squared() + merged[1].norm_squared()).sqrt();
            if c.is_nan() || c < ZERO_PROBABILITY {
                return Err(TncsError::ZeroProbability { site: n });
            }
            self.sites[j] = [merged[0].clone() / c, merged[1].clone() / c];
            self.retire(n, Some(j));
            Ok(c)
        } else if let Some(j) = self.prev_active(n) {
            let nb = &self.sites[j];
            let merged = [&nb[0] * &m, &nb[1] * &m];
            let c = (merged[0].norm_squared() + merged[1].norm_squared()).sqrt();
            if c.is_nan() || c < ZERO_PROBABILITY {
                return Err(TncsError::ZeroProbability { site: n });
            }
            self.sites[j] = [merged[0].clone() / c, merged[1].clone() / c];
            self.retire(n, Some(j));
            Ok(c)
        } else {
            let c = m[(0, 0)].abs();
            if c.is_nan() || c < ZERO_PROBABILITY {
                return Err(TncsError::ZeroProbability { site: n });
            }
            self.retire(n, None);
            Ok(c)
        }
    }

    fn retire(&mut self, n: usize, new_center: Option<usize>) {
        self.sites[n] = empty_site();
        self.active[n] = false;
        self.center = new_center;
    }

    /// Active sites with their tensors, in chain order.
    pub(crate) fn active_tensors(&self) -> impl Iterator<Item = (usize, &SiteTensor)> {
        self.sites
            .iter()
            .enumerate()
            .filter(move |(n, _)| self.active[*n])
    }
}

fn transfer_left(t: &SiteTensor, env: Option<&DMatrix<f64>>) -> DMatrix<f64> {
    let next = match env {
        Some(e) => t[0].tr_mul(e) * &t[0] + t[1].tr_mul(e) * &t[1],
        None => t[0].tr_mul(&t[0]) + t[1].tr_mul(&t[1]),
    };
    unit_trace(next)
}

fn transfer_right(t: &SiteTensor, env: Option<&DMatrix<f64>>) -> DMatrix<f64> {
    let next = match env {
        Some(e) => &t[0] * e * t[0].transpose() + &t[1] * e * t[1].transpose(),
        None => &t[0] * t[0].transpose() + &t[1] * t[1].transpose(),
    };
    unit_trace(next)
}

fn unit_trace(m: DMatrix<f64>) -> DMatrix<f64> {
    let tr = m.trace();
    if tr > 0.0 && tr.is_finite() {
        m / tr
    } else {
        m
    }
}

/// Makes the diagonal of `r` nonnegative so QR is unique for full-rank input.
fn fix_signs(q: &mut DMatrix<f64>, r: &mut DMatrix<f64>) {
    for k in 0..r.nrows().min(r.ncols()) {
        if r[(k, k)] < 0.0 {
            r.row_mut(k).neg_mut();
            q.column_mut(k).neg_mut();
        }
    }
}

#[cfg(test)]
mod tests;
