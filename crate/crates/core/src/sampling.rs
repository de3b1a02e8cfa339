//! Choosing which pixels to send.
//!
//! Three orderings are provided: uniformly random (RO), by per-pixel variance
//! over the training set (VO), and entanglement ordering (EO). EO repeatedly
//! measures the qubit with the largest single-site entanglement entropy in the
//! dominant eigenstate of its reduced density matrix. Running EO to the end of
//! the chain gives the mean-entropy profile from which q-sparsity is computed.

use std::f64::consts::LN_2;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, TncsError};
use crate::feature_map::Image;
use crate::mps::{Mps, QubitState};

/// Two SEE values closer than this count as a tie.
const SEE_TIE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    Random,
    Variance,
    Entanglement,
}

impl Strategy {
    pub fn tag(self) -> &'static str {
        match self {
            Strategy::Random => "RO",
            Strategy::Variance => "VO",
            Strategy::Entanglement => "EO",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Strategy {
    type Err = TncsError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "RO" => Ok(Strategy::Random),
            "VO" => Ok(Strategy::Variance),
            "EO" => Ok(Strategy::Entanglement),
            other => Err(TncsError::arg(format!("unknown strategy {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplingPlan {
    pub strategy: Strategy,
    pub order: Vec<usize>,
    /// EO only: mean SEE of the active sites before each measurement.
    pub see_trajectory: Vec<f64>,
    /// EO only: the dominant eigenstate measured at each step.
    pub basis_states: Vec<QubitState>,
}

impl SamplingPlan {
    fn plain(strategy: Strategy, order: Vec<usize>) -> Self {
        SamplingPlan {
            strategy,
            order,
            see_trajectory: Vec::new(),
            basis_states: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// The first `n_f` steps of this plan.
    pub fn truncated(&self, n_f: usize) -> Self {
        let cut = |len: usize| n_f.min(len);
        SamplingPlan {
            strategy: self.strategy,
            order: self.order[..cut(self.order.len())].to_vec(),
            see_trajectory: self.see_trajectory[..cut(self.see_trajectory.len())].to_vec(),
            basis_states: self.basis_states[..cut(self.basis_states.len())].to_vec(),
        }
    }

    /// `strategy=<tag>` followed by one `site=<idx> sbar=<val>` line per step.
    /// Plans without an entropy trajectory omit the `sbar` field.
    pub fn to_text(&self) -> String {
        let mut out = format!("strategy={}\n", self.strategy);
        for (i, site) in self.order.iter().enumerate() {
            match self.see_trajectory.get(i) {
                Some(s) => out.push_str(&format!("site={site} sbar={s}\n")),
                None => out.push_str(&format!("site={site}\n")),
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let header = lines
            .next()
            .ok_or_else(|| TncsError::format("empty plan file"))?;
        let strategy: Strategy = header
            .strip_prefix("strategy=")
            .ok_or_else(|| TncsError::format("plan must start with strategy="))?
            .parse()
            .map_err(|_| TncsError::format(format!("bad strategy line {header:?}")))?;
        let mut plan = SamplingPlan::plain(strategy, Vec::new());
        for line in lines {
            let mut site = None;
            let mut sbar = None;
            for field in line.split_whitespace() {
                let (key, value) = field
                    .split_once('=')
                    .ok_or_else(|| TncsError::format(format!("bad field {field:?}")))?;
                match key {
                    "site" => site = value.parse::<usize>().ok(),
                    "sbar" => sbar = value.parse::<f64>().ok(),
                    _ => return Err(TncsError::format(format!("unknown key {key:?}"))),
                }
            }
            let site = site.ok_or_else(|| TncsError::format(format!("bad plan line {line:?}")))?;
            plan.order.push(site);
            if let Some(s) = sbar {
                plan.see_trajectory.push(s);
            }
        }
        if !plan.see_trajectory.is_empty() && plan.see_trajectory.len() != plan.order.len() {
            return Err(TncsError::format(
                "sbar must be given on every line or none",
            ));
        }
        let mut seen = plan.order.clone();
        seen.sort_unstable();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(TncsError::format("plan repeats a site"));
        }
        Ok(plan)
    }
}

/// A uniformly random ordering of `n_f` distinct sites. Plans for the same
/// seed are prefixes of one another.
pub fn plan_random(n_sites: usize, n_f: usize, seed: u64) -> Result<SamplingPlan> {
    if n_f > n_sites {
        return Err(TncsError::arg(format!(
            "cannot choose {n_f} of {n_sites} sites"
        )));
    }
    let mut order: Vec<usize> = (0..n_sites).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    order.truncate(n_f);
    Ok(SamplingPlan::plain(Strategy::Random, order))
}

/// `V_n = sum_i (x_in - mean_n)^2 / K` over the training images.
pub fn pixel_variance(dataset: &[Image]) -> Result<Vec<f64>> {
    let first = dataset
        .first()
        .ok_or_else(|| TncsError::arg("variance of an empty dataset"))?;
    let n = first.len();
    if dataset.iter().any(|img| img.len() != n) {
        return Err(TncsError::arg("images differ in size"));
    }
    let k = dataset.len() as f64;
    let mut mean = vec![0.0; n];
    for img in dataset {
        for (m, x) in mean.iter_mut().zip(img.pixels()) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= k);
    let mut var = vec![0.0; n];
    for img in dataset {
        for ((v, m), x) in var.iter_mut().zip(&mean).zip(img.pixels()) {
            *v += (x - m) * (x - m);
        }
    }
    var.iter_mut().for_each(|v| *v /= k);
    Ok(var)
}

/// Sites by decreasing variance; ties keep the lower index first.
pub fn plan_variance(dataset: &[Image], n_f: usize) -> Result<SamplingPlan> {
    let var = pixel_variance(dataset)?;
    if n_f > var.len() {
        return Err(TncsError::arg(format!(
            "cannot choose {n_f} of {} sites",
            var.len()
        )));
    }
    let mut order: Vec<usize> = (0..var.len()).collect();
    order.sort_by(|&a, &b| var[b].total_cmp(&var[a]).then(a.cmp(&b)));
    order.truncate(n_f);
    Ok(SamplingPlan::plain(Strategy::Variance, order))
}

/// One greedy measurement: the site that was measured, the mean SEE before
/// measuring, and the eigenstate used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct GreedyStep {
    pub site: usize,
    pub sbar: f64,
    pub state: QubitState,
}

/// Measures the max-SEE active site (lowest index on ties) in the dominant
/// eigenstate of its reduced density matrix. With `left_to_right`, the first
/// active site is measured instead.
pub(crate) fn greedy_step(mps: &mut Mps, left_to_right: bool) -> Result<GreedyStep> {
    let rdms = mps.rdm1_all()?;
    if rdms.is_empty() {
        return Err(TncsError::Internal("no active sites left".into()));
    }
    let entropies: Vec<f64> = rdms.iter().map(|(_, r)| r.entropy()).collect();
    let sbar = entropies.iter().sum::<f64>() / entropies.len() as f64;
    let mut best = 0;
    if !left_to_right {
        for (i, &s) in entropies.iter().enumerate() {
            if s > entropies[best] + SEE_TIE {
                best = i;
            }
        }
    }
    let (site, rho) = rdms[best];
    let state = rho.dominant_eigenstate();
    mps.project_site_in_place(site, state)
        .map_err(|e| match e {
            TncsError::ZeroProbability { site } => TncsError::Internal(format!(
                "dominant eigenstate projection at site {site} has zero probability"
            )),
            other => other,
        })?;
    Ok(GreedyStep { site, sbar, state })
}

/// Entanglement-ordered sampling of `n_f` sites. The input is not modified.
pub fn plan_eosp(mps: &Mps, n_f: usize) -> Result<SamplingPlan> {
    let active = mps.num_active();
    if n_f > active {
        return Err(TncsError::arg(format!(
            "cannot choose {n_f} of {active} active sites"
        )));
    }
    let mut state = mps.clone();
    state.ensure_canonical()?;
    let mut plan = SamplingPlan::plain(Strategy::Entanglement, Vec::with_capacity(n_f));
    for _ in 0..n_f {
        let step = greedy_step(&mut state, false)?;
        plan.order.push(step.site);
        plan.see_trajectory.push(step.sbar);
        plan.basis_states.push(step.state);
    }
    Ok(plan)
}

#[derive(Debug, Clone, PartialEq)]
pub struct QSparsity {
    /// `log2` of the q-sparsity.
    pub log2_value: f64,
    /// Mean SEE with `N, N-1, ..., 1` qubits unmeasured.
    pub sbar_profile: Vec<f64>,
}

impl QSparsity {
    pub fn from_profile(sbar_profile: Vec<f64>) -> Self {
        let log2_value = sbar_profile.iter().map(|s| s / LN_2 - 1.0).sum();
        QSparsity {
            log2_value,
            sbar_profile,
        }
    }

    /// `n_unmeasured,sbar` rows.
    pub fn profile_csv(&self) -> String {
        let n = self.sbar_profile.len();
        let mut out = String::from("n_unmeasured,sbar\n");
        for (i, s) in self.sbar_profile.iter().enumerate() {
            out.push_str(&format!("{},{}\n", n - i, s));
        }
        out
    }
}

/// Runs EO over every active site and sums `sbar/ln 2 - 1` along the way.
pub fn qsparsity(mps: &Mps) -> Result<QSparsity> {
    let plan = plan_eosp(mps, mps.num_active())?;
    Ok(QSparsity::from_profile(plan.see_trajectory))
}
