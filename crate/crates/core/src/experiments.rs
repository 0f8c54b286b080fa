//! Monte Carlo harness: replicated slab crossings with summary statistics,
//! concentration and tail estimates of the normalized statistic
//! `X_d = 2ad s̃ / log d`, subadditivity checks and the search-and-cross probe.
//!
//! Replicate `r` at dimension `d` is driven by `derive_seed(root, d, r)`, and
//! replicates are collected in index order, so results do not depend on the
//! number of worker threads.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eden::{sample_s01_eden, EdenOptions, DEFAULT_CLUSTER_CAP};
use crate::error::{FppError, Result};
use crate::lattice::{Coord, EdgeId, HyperplaneIndex, LatticePoint};
use crate::mix::derive_seed;
use crate::slab::{
    greedy_concatenation, slab_crossing_time, stabilized_point_to_hyperplane_time, PassageSample,
    SlabOptions, DEFAULT_BUDGET_CAP,
};
use crate::stats::{self, KahanSum, Z95};
use crate::weights::{Family, WeightModel};

pub const BOOTSTRAP_RESAMPLES: usize = 1000;
/// Node cap of the search-and-cross path search, per replicate.
pub const SEARCH_NODE_CAP: usize = 1_000_000;

// Stream tags mixed into derived seeds so that different experiments on the
// same root seed do not share randomness where they shouldn't.
const STREAM_BOOTSTRAP: u64 = 0xB007;
const STREAM_SEARCH: u64 = 0x5EA4C4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExperimentConfig {
    pub d_grid: Vec<usize>,
    pub model: WeightModel,
    pub replicates: usize,
    pub root_seed: u64,
    #[serde(default)]
    pub box_radius: Option<u32>,
    #[serde(default = "default_budget")]
    pub budget_cap: usize,
}

fn default_budget() -> usize {
    DEFAULT_BUDGET_CAP
}

impl ExperimentConfig {
    pub fn new(d_grid: Vec<usize>, model: WeightModel, replicates: usize, root_seed: u64) -> Self {
        ExperimentConfig { d_grid, model, replicates, root_seed, box_radius: None, budget_cap: DEFAULT_BUDGET_CAP }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(FppError::domain("replicates must be at least 1"));
        }
        if self.d_grid.is_empty() {
            return Err(FppError::domain("dimension grid is empty"));
        }
        if let Some(&d) = self.d_grid.iter().find(|&&d| d < 2) {
            return Err(FppError::domain(format!("dimension must be at least 2, got {d}")));
        }
        self.model.family.validate()
    }

    /// Density of F at 0, the `a` in the normalization.
    pub fn rate(&self) -> Result<f64> {
        rate_of(&self.model.family)
    }

    pub fn replicate_seed(&self, d: usize, rep: usize) -> u64 {
        derive_seed(self.root_seed, d as u64, rep as u64)
    }

    fn slab_options(&self) -> SlabOptions {
        SlabOptions { budget_cap: self.budget_cap, box_radius: self.box_radius, overrun: 1 }
    }
}

fn rate_of(family: &Family) -> Result<f64> {
    family.density_at_zero().ok_or_else(|| {
        FppError::UnsupportedModel(format!(
            "{} family has no positive density at 0; the normalization 2ad/log d is undefined",
            family.name()
        ))
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sampler {
    Eden,
    Slab,
}

impl Sampler {
    /// Eden for exponential weights, the exact slab search otherwise.
    pub fn auto(family: &Family) -> Self {
        match family {
            Family::Exponential { .. } => Sampler::Eden,
            _ => Sampler::Slab,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Sampler::Eden => "eden",
            Sampler::Slab => "slab",
        }
    }
}

impl std::str::FromStr for Sampler {
    type Err = FppError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "eden" => Ok(Sampler::Eden),
            "slab" => Ok(Sampler::Slab),
            other => Err(FppError::Config(format!("unknown sampler {other:?} (expected eden or slab)"))),
        }
    }
}

/// `2ad / log d`.
pub fn normalizer(d: usize, a: f64) -> f64 {
    2.0 * a * d as f64 / (d as f64).ln()
}

/// All replicates at dimension `d`, in replicate order.
pub fn sample_replicates(config: &ExperimentConfig, d: usize, sampler: Sampler) -> Result<Vec<PassageSample>> {
    config.validate()?;
    if d < 2 {
        return Err(FppError::domain(format!("dimension must be at least 2, got {d}")));
    }
    match (sampler, &config.model.family) {
        (Sampler::Eden, Family::Exponential { a }) => {
            let a = *a;
            let opts = EdenOptions { cluster_cap: config.budget_cap.min(DEFAULT_CLUSTER_CAP), ..Default::default() };
            (0..config.replicates)
                .into_par_iter()
                .map(|r| sample_s01_eden(d, a, config.replicate_seed(d, r), &opts))
                .collect()
        }
        (Sampler::Eden, other) => Err(FppError::SamplerMismatch(format!(
            "the Eden sampler needs exponential weights, got the {} family",
            other.name()
        ))),
        (Sampler::Slab, _) => {
            let opts = config.slab_options();
            let origin = LatticePoint::origin(d);
            (0..config.replicates)
                .into_par_iter()
                .map(|r| {
                    let w = config.model.with_seed(config.replicate_seed(d, r));
                    slab_crossing_time(&w, &origin, HyperplaneIndex(0), &opts)
                })
                .collect()
        }
    }
}

pub fn sample_values(config: &ExperimentConfig, d: usize, sampler: Sampler) -> Result<Vec<f64>> {
    Ok(sample_replicates(config, d, sampler)?.into_iter().map(|s| s.value).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SummaryStats {
    pub d: usize,
    pub n: usize,
    pub mean: f64,
    /// Absent with a single replicate.
    pub variance: Option<f64>,
    pub std_error: Option<f64>,
    /// Normal-approximation 95% interval for the mean.
    pub ci95: Option<(f64, f64)>,
    pub second_moment: f64,
    /// `mean · 2ad / log d`
    pub normalized_mean: f64,
    /// `variance · (2ad / log d)²`
    pub normalized_var: Option<f64>,
}

pub fn summarize(d: usize, a: f64, values: &[f64]) -> SummaryStats {
    let mean = stats::mean(values);
    let variance = stats::variance(values);
    let se = stats::std_error(values);
    let norm = normalizer(d, a);
    SummaryStats {
        d,
        n: values.len(),
        mean,
        variance,
        std_error: se,
        ci95: se.map(|se| (mean - Z95 * se, mean + Z95 * se)),
        second_moment: values.iter().map(|x| x * x).collect::<KahanSum>().value() / values.len() as f64,
        normalized_mean: mean * norm,
        normalized_var: variance.map(|v| v * norm * norm),
    }
}

/// Summary statistics of the slab crossing time for every `d` in the grid.
pub fn run_slab_mc(config: &ExperimentConfig, sampler: Sampler) -> Result<Vec<SummaryStats>> {
    config.validate()?;
    let a = config.rate()?;
    config
        .d_grid
        .iter()
        .map(|&d| Ok(summarize(d, a, &sample_values(config, d, sampler)?)))
        .collect()
}

/// Bootstrap interval of `normalized_var` from raw crossing times.
pub fn normalized_var_bootstrap(d: usize, a: f64, values: &[f64], seed: u64) -> Result<(f64, (f64, f64))> {
    if values.len() < 2 {
        return Err(FppError::domain("variance needs at least two samples"));
    }
    let norm = normalizer(d, a);
    let stat = |xs: &[f64]| stats::variance(xs).unwrap_or(0.0) * norm * norm;
    let point = stat(values);
    let ci = stats::bootstrap_ci(values, stat, BOOTSTRAP_RESAMPLES, 0.95, seed);
    Ok((point, ci))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ConcentrationPoint {
    pub d: usize,
    pub n: usize,
    pub eta: f64,
    pub exceedances: usize,
    /// Estimate of `P(|X_d - 1| > eta)`.
    pub estimate: f64,
    pub wilson95: (f64, f64),
    pub bootstrap95: (f64, f64),
}

pub fn concentration_from(d: usize, a: f64, eta: f64, values: &[f64], seed: u64) -> ConcentrationPoint {
    let norm = normalizer(d, a);
    let hits: Vec<f64> = values
        .iter()
        .map(|&v| if (v * norm - 1.0).abs() > eta { 1.0 } else { 0.0 })
        .collect();
    let k = hits.iter().filter(|&&h| h > 0.0).count();
    let n = values.len();
    ConcentrationPoint {
        d,
        n,
        eta,
        exceedances: k,
        estimate: k as f64 / n as f64,
        wilson95: stats::wilson_interval(k, n, Z95),
        bootstrap95: stats::bootstrap_ci(&hits, stats::mean, BOOTSTRAP_RESAMPLES, 0.95, seed),
    }
}

/// Per-`d` exceedance frequencies of `|X_d - 1| > eta`.
pub fn concentration_curve(config: &ExperimentConfig, sampler: Sampler, eta: f64) -> Result<Vec<ConcentrationPoint>> {
    if !(eta > 0.0) {
        return Err(FppError::domain(format!("eta must be positive, got {eta}")));
    }
    config.validate()?;
    let a = config.rate()?;
    config
        .d_grid
        .iter()
        .map(|&d| {
            let values = sample_values(config, d, sampler)?;
            Ok(concentration_from(d, a, eta, &values, derive_seed(config.root_seed, STREAM_BOOTSTRAP, d as u64)))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct UiTailPoint {
    pub d: usize,
    pub n: usize,
    pub m: f64,
    /// `E[X_d 1{X_d >= M}]`
    pub estimate: f64,
    pub std_error: Option<f64>,
}

pub fn ui_tail_from(d: usize, a: f64, m: f64, values: &[f64]) -> Result<UiTailPoint> {
    if !(m > 0.0) {
        return Err(FppError::domain(format!("M must be positive, got {m}")));
    }
    let norm = normalizer(d, a);
    let terms: Vec<f64> = values
        .iter()
        .map(|&v| {
            let x = v * norm;
            if x >= m {
                x
            } else {
                0.0
            }
        })
        .collect();
    Ok(UiTailPoint { d, n: values.len(), m, estimate: stats::mean(&terms), std_error: stats::std_error(&terms) })
}

/// Empirical truncated mean of the normalized statistic, per `d`.
pub fn ui_tail(config: &ExperimentConfig, sampler: Sampler, m: f64) -> Result<Vec<UiTailPoint>> {
    if !(m > 0.0) {
        return Err(FppError::domain(format!("M must be positive, got {m}")));
    }
    config.validate()?;
    let a = config.rate()?;
    config
        .d_grid
        .iter()
        .map(|&d| ui_tail_from(d, a, m, &sample_values(config, d, sampler)?))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SubadditivityReport {
    pub d: usize,
    pub n: usize,
    pub replicates: usize,
    /// Mean of `T(0, H_n) / n`.
    pub lhs: f64,
    pub lhs_se: Option<f64>,
    /// Mean slab crossing time over all `n · replicates` greedy crossings.
    pub rhs: f64,
    pub rhs_se: Option<f64>,
    /// Realizations with `T(0, H_n)` above the sum of greedy crossings.
    pub pathwise_violations: usize,
    /// Largest radius at which the point-to-hyperplane time stabilized.
    pub max_radius: u32,
}

impl SubadditivityReport {
    /// `lhs <= rhs + 3 · combined SE`.
    pub fn mean_ok(&self) -> bool {
        let se = (self.lhs_se.unwrap_or(0.0).powi(2) + self.rhs_se.unwrap_or(0.0).powi(2)).sqrt();
        self.lhs <= self.rhs + 3.0 * se
    }
}

/// Pathwise comparison of `T(0, H_n)` with `n` greedy slab crossings on
/// shared realizations, at the first dimension of the grid.
pub fn subadditivity_check(config: &ExperimentConfig, n: usize) -> Result<SubadditivityReport> {
    config.validate()?;
    if n == 0 {
        return Err(FppError::domain("n must be at least 1"));
    }
    let d = config.d_grid[0];
    let opts = config.slab_options();
    let rows: Vec<(f64, Vec<f64>, bool, u32)> = (0..config.replicates)
        .into_par_iter()
        .map(|r| {
            let w = config.model.with_seed(config.replicate_seed(d, r));
            let crossings = greedy_concatenation(&w, d, n, &opts)?;
            let greedy_sum: f64 = crossings.iter().map(|s| s.value).sum();
            // The greedy path drifts by at most the sum of the reaches, so a
            // box of that radius contains it.
            let drift: u32 = crossings.iter().map(|s| s.reach).sum();
            let initial = drift.max(config.box_radius.unwrap_or(0)).max(1);
            let (t, radius) = stabilized_point_to_hyperplane_time(&w, d, n as Coord, initial, config.budget_cap)?;
            let violated = t > greedy_sum * (1.0 + 1e-12);
            Ok((t / n as f64, crossings.into_iter().map(|s| s.value).collect(), violated, radius))
        })
        .collect::<Result<_>>()?;
    let lhs_values: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let rhs_values: Vec<f64> = rows.iter().flat_map(|r| r.1.iter().copied()).collect();
    Ok(SubadditivityReport {
        d,
        n,
        replicates: config.replicates,
        lhs: stats::mean(&lhs_values),
        lhs_se: stats::std_error(&lhs_values),
        rhs: stats::mean(&rhs_values),
        rhs_se: stats::std_error(&rhs_values),
        pathwise_violations: rows.iter().filter(|r| r.2).count(),
        max_radius: rows.iter().map(|r| r.3).max().unwrap_or(0),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SearchCrossReport {
    pub d: usize,
    /// Dimension of the search subspace, `⌊d/2⌋`.
    pub p: usize,
    /// Path length, `⌊(3/4) log d⌋`.
    pub n: usize,
    pub x_threshold: f64,
    pub y_threshold: f64,
    pub replicates: usize,
    /// Estimate of `P(F_j)`; a lower bound when some searches were capped.
    pub p_hat_fj: f64,
    pub p_hat_fj_wilson95: (f64, f64),
    /// Empirical `P(τ_{e_j} <= y)`.
    pub p_hat_tau: f64,
    /// `F(y)`.
    pub f_y: f64,
    /// Empirical probability that a fast path exists, ignoring `τ_{e_j}`.
    pub p_hat_path: f64,
    /// `4 log d / d`.
    pub target: f64,
    pub capped: usize,
    pub max_nodes: usize,
}

struct PathSearch {
    found: bool,
    capped: bool,
    nodes: usize,
}

/// Is there a walk of at most `n` steps from `start` that uses `n - 1` or
/// fewer steps along axes `1..=p` and then one `+e_1` step, with total time at
/// most `x`? Layered relaxation with pruning at `x`.
fn fast_path_search(w: &WeightModel, start: &LatticePoint, p: usize, n: usize, x: f64, cap: usize) -> PathSearch {
    let exit_time = |v: &LatticePoint| w.edge_weight(&EdgeId::new(v.clone(), 0));
    let mut layer: HashMap<LatticePoint, f64> = HashMap::from([(start.clone(), 0.0)]);
    let mut nodes = 1usize;
    for depth in 0..n {
        if layer.iter().any(|(v, &c)| c + exit_time(v) <= x) {
            return PathSearch { found: true, capped: false, nodes };
        }
        if depth + 1 == n {
            break;
        }
        let mut next: HashMap<LatticePoint, f64> = HashMap::new();
        for (v, &c) in &layer {
            for axis in 1..=p {
                for delta in [1, -1] {
                    let q = v.shifted(axis, delta);
                    let base = if delta == 1 { v.clone() } else { q.clone() };
                    let cost = c + w.edge_weight(&EdgeId::new(base, axis));
                    if cost <= x {
                        let slot = next.entry(q).or_insert(f64::INFINITY);
                        *slot = slot.min(cost);
                    }
                }
            }
        }
        nodes += next.len();
        if nodes > cap {
            return PathSearch { found: false, capped: true, nodes };
        }
        layer = next;
    }
    PathSearch { found: false, capped: false, nodes }
}

/// Monte Carlo estimate of `P(F_j)`: the edge from 0 to `e_j` (an axis
/// outside the search subspace) has time at most `y`, and from `e_j` a walk
/// of at most `n` steps inside the span of `±e_2, …, ±e_{p+1}` finished by an
/// `e_1` step has time at most `x`. The two parts use disjoint edges.
pub fn search_cross_probe(d: usize, model: &WeightModel, replicates: usize, root_seed: u64) -> Result<SearchCrossReport> {
    if replicates == 0 {
        return Err(FppError::domain("replicates must be at least 1"));
    }
    let p = d / 2;
    let n = (0.75 * (d as f64).ln()).floor() as usize;
    if d < 8 || n < 1 {
        return Err(FppError::domain(format!("search-and-cross needs d >= 8, got {d}")));
    }
    let a = rate_of(&model.family)?;
    let ln_d = (d as f64).ln();
    let x = 9.0 * ln_d / (4.0 * a * d as f64);
    let y = 32.0 * ln_d / (a * d as f64);
    let j_axis = p + 1;
    let origin = LatticePoint::origin(d);
    let step = origin.shifted(j_axis, 1);
    let rows: Vec<(bool, PathSearch)> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let w = model.with_seed(derive_seed(root_seed ^ STREAM_SEARCH, d as u64, r as u64));
            let tau_ok = w.edge_weight(&EdgeId::new(origin.clone(), j_axis)) <= y;
            (tau_ok, fast_path_search(&w, &step, p, n, x, SEARCH_NODE_CAP))
        })
        .collect();
    let both = rows.iter().filter(|(t, s)| *t && s.found).count();
    let tau_hits = rows.iter().filter(|(t, _)| *t).count();
    let path_hits = rows.iter().filter(|(_, s)| s.found).count();
    let r = replicates as f64;
    Ok(SearchCrossReport {
        d,
        p,
        n,
        x_threshold: x,
        y_threshold: y,
        replicates,
        p_hat_fj: both as f64 / r,
        p_hat_fj_wilson95: stats::wilson_interval(both, replicates, Z95),
        p_hat_tau: tau_hits as f64 / r,
        f_y: model.cdf(y),
        p_hat_path: path_hits as f64 / r,
        target: 4.0 * ln_d / d as f64,
        capped: rows.iter().filter(|(_, s)| s.capped).count(),
        max_nodes: rows.iter().map(|(_, s)| s.nodes).max().unwrap_or(0),
    })
}
