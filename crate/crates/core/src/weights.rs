//! Edge-weight distributions, their left-continuous inverse, the coupling
//! from exponential weights, and the seeded edge-weight oracle.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{FppError, Result};
use crate::lattice::EdgeId;
use crate::mix;

/// Piecewise-linear quantile function given by `(y, x)` knots.
///
/// Knots are sorted by `y` from 0 to 1 with nondecreasing `x`. Repeated `y`
/// values encode a flat stretch of F (a jump of the quantile); repeated `x`
/// values encode an atom of F.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct QuantileTable {
    ys: Vec<f64>,
    xs: Vec<f64>,
}

impl QuantileTable {
    pub fn new(points: Vec<[f64; 2]>) -> Result<Self> {
        if points.len() < 2 {
            return Err(FppError::domain("quantile table needs at least two knots"));
        }
        let (ys, xs): (Vec<f64>, Vec<f64>) = points.iter().map(|p| (p[0], p[1])).unzip();
        if ys.iter().chain(&xs).any(|v| !v.is_finite()) {
            return Err(FppError::domain("quantile table knots must be finite"));
        }
        if ys[0] != 0.0 || *ys.last().unwrap() != 1.0 {
            return Err(FppError::domain("quantile table must span y = 0 to y = 1"));
        }
        if xs[0] < 0.0 {
            return Err(FppError::domain("passage times must be nonnegative"));
        }
        for w in points.windows(2) {
            if w[1][0] < w[0][0] || w[1][1] < w[0][1] {
                return Err(FppError::domain(
                    "quantile table knots must be nondecreasing in both y and x",
                ));
            }
        }
        if xs.last() == xs.first() {
            return Err(FppError::domain("quantile table describes a point mass"));
        }
        Ok(QuantileTable { ys, xs })
    }

    pub fn points(&self) -> Vec<[f64; 2]> {
        self.ys.iter().zip(&self.xs).map(|(&y, &x)| [y, x]).collect()
    }

    /// F*(y) = inf{x : F(x) >= y}; within a vertical run of knots the lowest
    /// `x` is returned.
    fn quantile(&self, y: f64) -> f64 {
        let j = self.ys.partition_point(|&v| v < y);
        if j == 0 {
            return self.xs[0];
        }
        if j == self.ys.len() {
            return *self.xs.last().unwrap();
        }
        let (y0, y1, x0, x1) = (self.ys[j - 1], self.ys[j], self.xs[j - 1], self.xs[j]);
        x0 + (x1 - x0) * (y - y0) / (y1 - y0)
    }

    /// Right-continuous F(x) = sup{y : F*(y) <= x}, by binary search on the
    /// knots and linear interpolation.
    fn cdf(&self, x: f64) -> f64 {
        let k = self.xs.partition_point(|&v| v <= x);
        if k == 0 {
            return 0.0;
        }
        if k == self.xs.len() {
            return 1.0;
        }
        let (x0, x1, y0, y1) = (self.xs[k - 1], self.xs[k], self.ys[k - 1], self.ys[k]);
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }

    fn mean(&self) -> f64 {
        // E tau = integral of F* over (0, 1); exact for piecewise-linear F*.
        self.ys
            .windows(2)
            .zip(self.xs.windows(2))
            .map(|(y, x)| (y[1] - y[0]) * 0.5 * (x[0] + x[1]))
            .sum()
    }
}

impl TryFrom<Vec<[f64; 2]>> for QuantileTable {
    type Error = FppError;
    fn try_from(points: Vec<[f64; 2]>) -> Result<Self> {
        QuantileTable::new(points)
    }
}

impl From<QuantileTable> for Vec<[f64; 2]> {
    fn from(t: QuantileTable) -> Self {
        t.points()
    }
}

/// A passage-time distribution F.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family")]
pub enum Family {
    /// Exponential with rate `a`.
    #[serde(rename = "exp")]
    Exponential { a: f64 },
    /// Uniform on `[0, 1/a]`, density `a` at 0.
    #[serde(rename = "uniform")]
    Uniform { a: f64 },
    #[serde(rename = "table")]
    Table { points: QuantileTable },
}

impl Family {
    pub fn validate(&self) -> Result<()> {
        match self {
            Family::Exponential { a } | Family::Uniform { a } => {
                if !(a.is_finite() && *a > 0.0) {
                    return Err(FppError::domain(format!("rate a must be positive, got {a}")));
                }
            }
            Family::Table { .. } => {}
        }
        Ok(())
    }

    pub fn name(&self) -> &'static str {
        match self {
            Family::Exponential { .. } => "exp",
            Family::Uniform { .. } => "uniform",
            Family::Table { .. } => "table",
        }
    }

    pub fn quantile(&self, y: f64) -> Result<f64> {
        if !(0.0..1.0).contains(&y) {
            return Err(FppError::domain(format!("quantile level must lie in [0, 1), got {y}")));
        }
        Ok(self.quantile_unchecked(y))
    }

    #[inline]
    pub(crate) fn quantile_unchecked(&self, y: f64) -> f64 {
        match self {
            Family::Exponential { a } => -(-y).ln_1p() / a,
            Family::Uniform { a } => y / a,
            Family::Table { points } => points.quantile(y),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return match self {
                Family::Table { points } if x == 0.0 => points.cdf(0.0),
                _ => 0.0,
            };
        }
        match self {
            Family::Exponential { a } => -(-a * x).exp_m1(),
            Family::Uniform { a } => (a * x).min(1.0),
            Family::Table { points } => points.cdf(x),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            Family::Exponential { a } => 1.0 / a,
            Family::Uniform { a } => 0.5 / a,
            Family::Table { points } => points.mean(),
        }
    }

    /// The density `a` of F at 0, when F has one. For tables this is the
    /// reciprocal slope of the first quantile segment, which requires
    /// F*(0) = 0.
    pub fn density_at_zero(&self) -> Option<f64> {
        match self {
            Family::Exponential { a } | Family::Uniform { a } => Some(*a),
            Family::Table { points } => {
                if points.xs[0] != 0.0 {
                    return None;
                }
                let j = points.xs.iter().position(|&x| x > 0.0)?;
                let slope = points.ys[j] / points.xs[j];
                (slope > 0.0).then_some(slope)
            }
        }
    }
}

/// Anything that assigns a passage time to every edge of Z^d.
pub trait WeightField {
    fn weight(&self, e: &EdgeId) -> f64;

    /// Seed recorded in samples drawn from this field.
    fn seed(&self) -> u64 {
        0
    }
}

impl<W: WeightField + ?Sized> WeightField for &W {
    fn weight(&self, e: &EdgeId) -> f64 {
        (**self).weight(e)
    }
    fn seed(&self) -> u64 {
        (**self).seed()
    }
}

/// A distribution together with the root seed of its weight realization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightModel {
    #[serde(flatten)]
    pub family: Family,
    #[serde(default)]
    pub seed: u64,
}

impl WeightModel {
    pub fn new(family: Family, seed: u64) -> Result<Self> {
        family.validate()?;
        Ok(WeightModel { family, seed })
    }

    pub fn exponential(a: f64, seed: u64) -> Result<Self> {
        Self::new(Family::Exponential { a }, seed)
    }

    pub fn uniform(a: f64, seed: u64) -> Result<Self> {
        Self::new(Family::Uniform { a }, seed)
    }

    pub fn table(points: Vec<[f64; 2]>, seed: u64) -> Result<Self> {
        Self::new(Family::Table { points: QuantileTable::new(points)? }, seed)
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        WeightModel { family: self.family.clone(), seed }
    }

    pub fn quantile(&self, y: f64) -> Result<f64> {
        self.family.quantile(y)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.family.cdf(x)
    }

    /// The uniform in (0, 1) attached to edge `e` under this model's seed.
    #[inline]
    pub fn edge_uniform(&self, e: &EdgeId) -> f64 {
        mix::open_unit(mix::fold_words(self.seed, e.key_words()))
    }

    /// Passage time of `e`: fold the edge serialization into the seed with
    /// the SplitMix64 mixer, map to (0, 1), apply the quantile function.
    #[inline]
    pub fn edge_weight(&self, e: &EdgeId) -> f64 {
        self.family.quantile_unchecked(self.edge_uniform(e))
    }
}

impl WeightField for WeightModel {
    #[inline]
    fn weight(&self, e: &EdgeId) -> f64 {
        self.edge_weight(e)
    }
    fn seed(&self) -> u64 {
        self.seed
    }
}

/// Same weight on every edge.
#[derive(Clone, Copy, Debug)]
pub struct ConstantField(pub f64);

impl WeightField for ConstantField {
    fn weight(&self, _: &EdgeId) -> f64 {
        self.0
    }
}

/// A base field with some edges replaced by fixed values.
#[derive(Clone, Debug)]
pub struct Overrides<W> {
    pub base: W,
    pub values: HashMap<EdgeId, f64>,
}

impl<W: WeightField> Overrides<W> {
    pub fn new(base: W) -> Self {
        Overrides { base, values: HashMap::new() }
    }

    pub fn set(mut self, e: EdgeId, value: f64) -> Self {
        self.values.insert(e, value);
        self
    }
}

impl<W: WeightField> WeightField for Overrides<W> {
    fn weight(&self, e: &EdgeId) -> f64 {
        self.values.get(e).copied().unwrap_or_else(|| self.base.weight(e))
    }
    fn seed(&self) -> u64 {
        self.base.seed()
    }
}

/// Weights computed by a closure.
pub struct FnField<F>(pub F);

impl<F: Fn(&EdgeId) -> f64> WeightField for FnField<F> {
    fn weight(&self, e: &EdgeId) -> f64 {
        (self.0)(e)
    }
}

/// h(t) = F*(1 - e^{-at}): turns Exponential(a) passage times into
/// F-distributed ones, monotonically, on the same probability space.
#[derive(Clone, Debug, PartialEq)]
pub struct CouplingMap {
    pub target: Family,
    pub rate: f64,
}

impl CouplingMap {
    pub fn new(target: Family, rate: f64) -> Result<Self> {
        target.validate()?;
        if !(rate.is_finite() && rate > 0.0) {
            return Err(FppError::domain(format!("coupling rate must be positive, got {rate}")));
        }
        Ok(CouplingMap { target, rate })
    }

    pub fn couple(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(FppError::domain(format!("coupling argument must be >= 0, got {t}")));
        }
        Ok(self.couple_unchecked(t))
    }

    #[inline]
    pub fn couple_unchecked(&self, t: f64) -> f64 {
        let at = self.rate * t;
        match &self.target {
            // 1 - y = e^{-at} exactly, so F*(y) = at / b without cancellation.
            Family::Exponential { a } => at / a,
            Family::Uniform { a } => -(-at).exp_m1() / a,
            Family::Table { points } => points.quantile(-(-at).exp_m1()),
        }
    }
}

/// Declared constants of the small-x condition |F(x)/x - a| <= C |log x|^{-1}
/// on (0, eps0].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityDeclaration {
    pub a: f64,
    pub c: f64,
    pub eps0: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityReport {
    /// max over the grid of |F(x)/x - a| * |log x|.
    pub max_deviation: f64,
    pub pass: bool,
}

/// Decades covered by the log-spaced grid below `eps0`.
const DENSITY_GRID_DECADES: f64 = 10.0;

pub fn verify_density_condition(
    family: &Family,
    decl: DensityDeclaration,
    grid_size: usize,
) -> Result<DensityReport> {
    if grid_size < 2 {
        return Err(FppError::domain("density grid needs at least two points"));
    }
    if !(decl.eps0 > 0.0 && decl.eps0 < 1.0) {
        return Err(FppError::domain("eps0 must lie in (0, 1) so that log x is nonzero"));
    }
    if !(decl.a > 0.0 && decl.c >= 0.0) {
        return Err(FppError::domain("declared a must be positive and C nonnegative"));
    }
    if let Family::Table { points } = family {
        if points.xs[0] != 0.0 {
            return Err(FppError::UnsupportedModel(
                "table has F*(0) > 0, so F has no density at 0".into(),
            ));
        }
    }
    let lo = decl.eps0.ln() - DENSITY_GRID_DECADES * std::f64::consts::LN_10;
    let hi = decl.eps0.ln();
    let max_deviation = (0..grid_size)
        .map(|k| {
            let lx = lo + (hi - lo) * k as f64 / (grid_size - 1) as f64;
            let x = if k == grid_size - 1 { decl.eps0 } else { lx.exp() };
            (family.cdf(x) / x - decl.a).abs() * x.ln().abs()
        })
        .fold(0.0, f64::max);
    Ok(DensityReport { max_deviation, pass: max_deviation <= decl.c })
}
