//! Instances, clusterings and the MinDisagree objective.
//!
//! An [`Instance`] stores one sign and one weight per unordered vertex pair in
//! a flat triangular array. Complete instances have a sign on every pair;
//! bipartite instances mark within-part pairs as [`Sign::Missing`] with weight
//! zero, which the analysis treats as zero-weight positive edges.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance (relative to `w_scale`) on the weight-band boundaries.
pub const BAND_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    Positive,
    Negative,
    Missing,
}

impl Sign {
    pub fn symbol(self) -> char {
        match self {
            Sign::Positive => '+',
            Sign::Negative => '-',
            Sign::Missing => 'o',
        }
    }

    /// Missing pairs behave as positive pairs of weight zero.
    pub fn acts_positive(self) -> bool {
        !matches!(self, Sign::Negative)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Topology {
    Complete,
    /// Vertices `0..left` form one side, `left..n` the other.
    Bipartite { left: usize },
}

impl Topology {
    /// Whether `{u, v}` is a pair that carries an edge in this topology.
    pub fn has_edge(self, u: usize, v: usize) -> bool {
        match self {
            Topology::Complete => true,
            Topology::Bipartite { left } => (u < left) != (v < left),
        }
    }
}

/// Index of the unordered pair `{u, v}` (u != v) in a triangular array.
#[inline]
pub fn pair_index(u: usize, v: usize) -> usize {
    let (a, b) = if u < v { (u, v) } else { (v, u) };
    debug_assert!(a != b, "self-pairs are not stored");
    b * (b - 1) / 2 + a
}

#[inline]
pub fn pair_count(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    n: usize,
    topology: Topology,
    signs: Vec<Sign>,
    weights: Vec<f64>,
    alpha: f64,
    w_scale: f64,
}

impl Instance {
    /// Builds an instance by asking `pair` for the sign and weight of every
    /// pair `u < v` that carries an edge. Within-part pairs of a bipartite
    /// topology are filled in as missing with weight zero without consulting
    /// `pair`.
    pub fn from_fn<F>(n: usize, topology: Topology, alpha: f64, w_scale: f64, mut pair: F) -> Result<Self>
    where
        F: FnMut(usize, usize) -> (Sign, f64),
    {
        if let Topology::Bipartite { left } = topology {
            if left > n {
                return Err(Error::InvalidInstance(format!(
                    "bipartite left side {left} exceeds n = {n}"
                )));
            }
        }
        let mut signs = vec![Sign::Missing; pair_count(n)];
        let mut weights = vec![0.0; pair_count(n)];
        for v in 1..n {
            for u in 0..v {
                if !topology.has_edge(u, v) {
                    continue;
                }
                let (s, w) = pair(u, v);
                if s == Sign::Missing {
                    return Err(Error::InvalidInstance(format!(
                        "pair ({u}, {v}) must carry an edge in this topology"
                    )));
                }
                let k = pair_index(u, v);
                signs[k] = s;
                weights[k] = w;
            }
        }
        Ok(Self { n, topology, signs, weights, alpha, w_scale })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn w_scale(&self) -> f64 {
        self.w_scale
    }

    pub fn is_bipartite(&self) -> bool {
        matches!(self.topology, Topology::Bipartite { .. })
    }

    #[inline]
    pub fn sign(&self, u: usize, v: usize) -> Sign {
        self.signs[pair_index(u, v)]
    }

    #[inline]
    pub fn weight(&self, u: usize, v: usize) -> f64 {
        self.weights[pair_index(u, v)]
    }

    /// Replaces the declared asymmetry profile, leaving the edges untouched.
    pub fn with_profile(mut self, alpha: f64, w_scale: f64) -> Self {
        self.alpha = alpha;
        self.w_scale = w_scale;
        self
    }

    /// Iterates `(u, v, sign, weight)` over all pairs with `u < v`, ordered by
    /// `u` then `v`.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize, Sign, f64)> + '_ {
        (0..self.n).flat_map(move |u| {
            (u + 1..self.n).map(move |v| {
                let k = pair_index(u, v);
                (u, v, self.signs[k], self.weights[k])
            })
        })
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn positive_weight(&self) -> f64 {
        self.sum_weights(Sign::Positive)
    }

    pub fn negative_weight(&self) -> f64 {
        self.sum_weights(Sign::Negative)
    }

    fn sum_weights(&self, sign: Sign) -> f64 {
        self.signs
            .iter()
            .zip(&self.weights)
            .filter(|(s, _)| **s == sign)
            .map(|(_, w)| w)
            .sum()
    }
}

/// A partition of `0..n`, one label per vertex.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Clustering {
    labels: Vec<usize>,
}

impl Clustering {
    pub fn new(labels: Vec<usize>) -> Self {
        Self { labels }
    }

    pub fn single_cluster(n: usize) -> Self {
        Self { labels: vec![0; n] }
    }

    pub fn singletons(n: usize) -> Self {
        Self { labels: (0..n).collect() }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Relabels clusters in order of first appearance.
    pub fn canonical(&self) -> Self {
        let mut map = std::collections::HashMap::new();
        let labels = self
            .labels
            .iter()
            .map(|l| {
                let next = map.len();
                *map.entry(*l).or_insert(next)
            })
            .collect();
        Self { labels }
    }

    pub fn num_clusters(&self) -> usize {
        self.clusters().len()
    }

    /// Members of each cluster, clusters ordered by their smallest vertex.
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        let canon = self.canonical();
        let k = canon.labels.iter().copied().max().map_or(0, |m| m + 1);
        let mut out = vec![Vec::new(); k];
        for (v, &l) in canon.labels.iter().enumerate() {
            out[l].push(v);
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ViolationKind {
    PositiveAboveBand,
    PositiveBelowBand,
    NegativeBelowBand,
    /// Non-finite or negative weight.
    BadWeight,
    /// A pair whose sign disagrees with the topology.
    Topology,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub u: usize,
    pub v: usize,
    pub weight: f64,
    pub kind: ViolationKind,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    /// Problems with the profile itself (alpha or w_scale out of range).
    pub profile_errors: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty() && self.profile_errors.is_empty()
    }
}

/// Lists every pair that breaks the weight bands `[alpha*w, w]` (positive)
/// and `[alpha*w, inf)` (negative), plus topology inconsistencies.
pub fn validate_instance(inst: &Instance) -> ValidationReport {
    let mut report = ValidationReport::default();
    let (alpha, w) = (inst.alpha, inst.w_scale);
    if !(alpha > 0.0 && alpha <= 1.0) {
        report.profile_errors.push(format!("alpha = {alpha} is outside (0, 1]"));
    }
    if !(w > 0.0 && w.is_finite()) {
        report.profile_errors.push(format!("w_scale = {w} is not positive"));
    }
    let tol = BAND_TOL * w.abs().max(1.0);
    let lower = alpha * w - tol;
    let upper = w + tol;
    for (u, v, sign, weight) in inst.pairs() {
        let expect_edge = inst.topology.has_edge(u, v);
        let kind = if !weight.is_finite() || weight < 0.0 {
            Some(ViolationKind::BadWeight)
        } else if expect_edge == (sign == Sign::Missing) || (sign == Sign::Missing && weight != 0.0) {
            Some(ViolationKind::Topology)
        } else {
            match sign {
                Sign::Positive if weight > upper => Some(ViolationKind::PositiveAboveBand),
                Sign::Positive if weight < lower => Some(ViolationKind::PositiveBelowBand),
                Sign::Negative if weight < lower => Some(ViolationKind::NegativeBelowBand),
                _ => None,
            }
        };
        if let Some(kind) = kind {
            report.violations.push(Violation { u, v, weight, kind });
        }
    }
    report
}

/// Divides all weights by `w_scale`, so the profile becomes `(alpha, 1)`.
pub fn normalize(inst: &Instance) -> Result<Instance> {
    let w = inst.w_scale;
    if !(w > 0.0 && w.is_finite()) {
        return Err(Error::InvalidInstance(format!("w_scale = {w} must be positive")));
    }
    let mut out = inst.clone();
    if w != 1.0 {
        for x in &mut out.weights {
            *x /= w;
        }
    }
    out.w_scale = 1.0;
    Ok(out)
}

/// Weight of positive pairs split across clusters plus negative pairs kept
/// inside a cluster.
pub fn disagreement_cost(inst: &Instance, c: &Clustering) -> Result<f64> {
    if c.len() != inst.n {
        return Err(Error::Dimension { expected: inst.n, actual: c.len() });
    }
    let labels = c.labels();
    let mut cost = 0.0;
    for v in 1..inst.n {
        let base = v * (v - 1) / 2;
        for u in 0..v {
            let k = base + u;
            let same = labels[u] == labels[v];
            match inst.signs[k] {
                Sign::Positive if !same => cost += inst.weights[k],
                Sign::Negative if same => cost += inst.weights[k],
                _ => {}
            }
        }
    }
    Ok(cost)
}
