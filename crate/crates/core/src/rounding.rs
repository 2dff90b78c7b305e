//! Rounding functions `f: [0, 1] -> [0, 1]` and the pivot rounding procedure.
//!
//! Every function here has the same shape: `f(0) = 0`, nondecreasing, and
//! `f(x) = 1` for `x >= tau` where `tau = 1/2 - 1/(2A)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::EdgeLengths;
use crate::model::{Clustering, Instance};
use crate::triple::{cost_given_pivot, lp_given_pivot};

/// Largest `alpha` handled by the exponential function on complete graphs.
pub const SMALL_ALPHA_THRESHOLD: f64 = 0.169;

/// Slack used when matching an `x` to a grid point of a tabulated function.
pub const GRID_SNAP: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Complete,
    Bipartite,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "complete" => Ok(Mode::Complete),
            "bipartite" => Ok(Mode::Bipartite),
            _ => Err(Error::Parameter(format!("unknown mode `{s}`"))),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Complete => "complete",
            Mode::Bipartite => "bipartite",
        })
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(Error::Parameter(format!("alpha must lie in (0, 1], got {alpha}")))
    }
}

/// `3 + 2 ln(1/alpha)` on complete graphs, `5 + 2 ln(1/alpha)` on bipartite.
pub fn approximation_factor(alpha: f64, mode: Mode) -> Result<f64> {
    check_alpha(alpha)?;
    let base = match mode {
        Mode::Complete => 3.0,
        Mode::Bipartite => 5.0,
    };
    Ok(base + 2.0 * (1.0 / alpha).ln())
}

/// `1/2 - 1/(2A)`, written so that `A = 3` gives exactly `1/3`.
pub fn threshold(a: f64) -> f64 {
    (a - 1.0) / (2.0 * a)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    SmallAlpha,
    LargeAlpha,
    Bipartite,
    Tabulated,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RoundingFunction {
    variant: Variant,
    alpha: f64,
    a: f64,
    tau: f64,
    /// Grid points `(x_j, y_j)` below `tau`, starting at `(0, 0)`.
    table: Vec<(f64, f64)>,
}

impl RoundingFunction {
    /// The function the approximation analysis prescribes for `alpha`.
    pub fn for_alpha(alpha: f64, mode: Mode) -> Result<Self> {
        let a = approximation_factor(alpha, mode)?;
        let variant = match mode {
            Mode::Bipartite => Variant::Bipartite,
            Mode::Complete if alpha <= SMALL_ALPHA_THRESHOLD => Variant::SmallAlpha,
            Mode::Complete => Variant::LargeAlpha,
        };
        Ok(Self { variant, alpha, a, tau: threshold(a), table: Vec::new() })
    }

    /// Step function through `points`, equal to 1 from `threshold(a)` on.
    pub fn tabulated(alpha: f64, a: f64, points: Vec<(f64, f64)>) -> Result<Self> {
        check_alpha(alpha)?;
        if !(a >= 1.0 && a.is_finite()) {
            return Err(Error::Parameter(format!("A must be a finite number >= 1, got {a}")));
        }
        let tau = threshold(a);
        if points.first() != Some(&(0.0, 0.0)) {
            return Err(Error::Parameter("table must start at (0, 0)".into()));
        }
        for w in points.windows(2) {
            if w[1].0 <= w[0].0 || w[1].1 < w[0].1 {
                return Err(Error::Parameter("table must be strictly increasing in x and nondecreasing in y".into()));
            }
        }
        if let Some(&(x, y)) = points.last() {
            if x >= tau || y > 1.0 {
                return Err(Error::Parameter(format!("table point ({x}, {y}) lies outside [0, tau) x [0, 1]")));
            }
        }
        Ok(Self { variant: Variant::Tabulated, alpha, a, tau, table: points })
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn table(&self) -> &[(f64, f64)] {
        &self.table
    }

    fn mid_level(&self) -> f64 {
        (1.0 - self.alpha) / 3.0
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x >= self.tau {
            return 1.0;
        }
        match self.variant {
            Variant::SmallAlpha | Variant::Bipartite => 1.0 - (-self.a * x).exp(),
            Variant::LargeAlpha => {
                if x < 1.0 / self.a {
                    0.0
                } else {
                    self.mid_level()
                }
            }
            Variant::Tabulated => {
                let k = self.table.partition_point(|&(xj, _)| xj <= x + GRID_SNAP);
                self.table[k.saturating_sub(1)].1
            }
        }
    }

    /// `lim_{s -> x-} f(s)`; `f(0)` at zero.
    pub fn eval_left(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if x > self.tau {
            return 1.0;
        }
        match self.variant {
            Variant::SmallAlpha | Variant::Bipartite => 1.0 - (-self.a * x).exp(),
            Variant::LargeAlpha => {
                if x <= 1.0 / self.a {
                    0.0
                } else {
                    self.mid_level()
                }
            }
            Variant::Tabulated => {
                let k = self.table.partition_point(|&(xj, _)| xj < x - GRID_SNAP);
                self.table[k.saturating_sub(1)].1
            }
        }
    }

    /// Points where `f` may jump. Tabulated functions are treated as having a
    /// single jump at `tau`; their other steps sit on grid points and are
    /// evaluated there from the right.
    pub fn discontinuities(&self) -> Vec<f64> {
        match self.variant {
            Variant::LargeAlpha if 1.0 / self.a < self.tau => vec![1.0 / self.a, self.tau],
            _ => vec![self.tau],
        }
    }

    /// Breakpoints a certification grid should contain exactly.
    pub fn case_points(&self) -> [f64; 2] {
        [1.0 / self.a, self.tau]
    }
}

/// One pivot step of [`pivot_round`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PivotStep {
    pub step: usize,
    pub pivot: usize,
    #[serde(rename = "R")]
    pub r: f64,
    pub cluster_members: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PivotOutcome {
    pub clustering: Clustering,
    pub trace: Vec<PivotStep>,
}

impl PivotOutcome {
    /// The trace as JSON lines.
    pub fn trace_jsonl(&self) -> String {
        let mut s = String::new();
        for step in &self.trace {
            s.push_str(&serde_json::to_string(step).expect("plain struct"));
            s.push('\n');
        }
        s
    }
}

/// Pivot rounding: pick a uniform active pivot `p`, draw `R ~ U[0, 1)`, and
/// cluster `p` with every active `u` satisfying `f(x_pu) <= R`.
pub fn pivot_round(x: &EdgeLengths, f: &RoundingFunction, seed: u64) -> PivotOutcome {
    let n = x.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut active: Vec<usize> = (0..n).collect();
    let mut labels = vec![0; n];
    let mut trace = Vec::new();
    while !active.is_empty() {
        let pivot = active[rng.random_range(0..active.len())];
        let r: f64 = rng.random();
        let mut members = Vec::new();
        active.retain(|&u| {
            if u == pivot || f.eval(x.get(pivot, u)) <= r {
                members.push(u);
                false
            } else {
                true
            }
        });
        for &u in &members {
            labels[u] = trace.len();
        }
        trace.push(PivotStep { step: trace.len(), pivot, r, cluster_members: members });
    }
    PivotOutcome { clustering: Clustering::new(labels), trace }
}

/// Expected ALG and LP cost charged in one pivot step over `active`,
/// averaged over a uniformly random pivot.
pub fn expected_step_cost(inst: &Instance, x: &EdgeLengths, f: &RoundingFunction, active: &[usize]) -> Result<(f64, f64)> {
    if active.is_empty() {
        return Err(Error::Parameter("active vertex set is empty".into()));
    }
    if x.n() != inst.n() {
        return Err(Error::Dimension { expected: inst.n(), actual: x.n() });
    }
    if let Some(&u) = active.iter().find(|&&u| u >= inst.n()) {
        return Err(Error::Parameter(format!("vertex {u} out of range")));
    }
    let (mut alg, mut lp) = (0.0, 0.0);
    for &p in active {
        let y: Vec<f64> = active.iter().map(|&u| if u == p { 0.0 } else { f.eval(x.get(p, u)) }).collect();
        for i in 0..active.len() {
            for j in i + 1..active.len() {
                let (u, v) = (active[i], active[j]);
                let (sign, w) = (inst.sign(u, v), inst.weight(u, v));
                alg += w * cost_given_pivot(sign, y[i], y[j]);
                lp += w * lp_given_pivot(sign, x.get(u, v), y[i], y[j]);
            }
        }
    }
    let k = active.len() as f64;
    Ok((alg / k, lp / k))
}

/// Seed for trial `i` derived from a base seed (SplitMix64 finalizer).
pub fn trial_seed(base: u64, i: u64) -> u64 {
    let mut z = base.wrapping_add(i.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Topology;
    use proptest::prelude::*;

    #[test]
    fn factors() {
        assert_eq!(approximation_factor(1.0, Mode::Complete).unwrap(), 3.0);
        assert_eq!(approximation_factor(1.0, Mode::Bipartite).unwrap(), 5.0);
        let a = approximation_factor(0.01, Mode::Complete).unwrap();
        assert!((a - (3.0 + 2.0 * 100f64.ln())).abs() < 1e-12);
        assert!(approximation_factor(0.0, Mode::Complete).is_err());
        assert!(approximation_factor(1.5, Mode::Complete).is_err());
    }

    #[test]
    fn variant_selection() {
        let v = |alpha, mode| RoundingFunction::for_alpha(alpha, mode).unwrap().variant();
        assert_eq!(v(0.1, Mode::Complete), Variant::SmallAlpha);
        assert_eq!(v(SMALL_ALPHA_THRESHOLD, Mode::Complete), Variant::SmallAlpha);
        assert_eq!(v(0.17, Mode::Complete), Variant::LargeAlpha);
        assert_eq!(v(1.0, Mode::Bipartite), Variant::Bipartite);
    }

    #[test]
    fn large_alpha_steps() {
        let f = RoundingFunction::for_alpha(0.5, Mode::Complete).unwrap();
        let a = f.a();
        let tau = f.tau();
        assert_eq!(f.eval(0.0), 0.0);
        assert_eq!(f.eval(1.0 / a - 1e-9), 0.0);
        assert_eq!(f.eval(1.0 / a), 0.5 / 3.0);
        assert_eq!(f.eval_left(1.0 / a), 0.0);
        assert_eq!(f.eval(tau - 1e-9), 0.5 / 3.0);
        assert_eq!(f.eval_left(tau), 0.5 / 3.0);
        assert_eq!(f.eval(tau), 1.0);
        assert_eq!(f.discontinuities(), vec![1.0 / a, tau]);
    }

    #[test]
    fn alpha_one_has_no_middle_step() {
        let f = RoundingFunction::for_alpha(1.0, Mode::Complete).unwrap();
        assert_eq!(f.tau(), 1.0 / 3.0);
        assert_eq!(f.eval(0.3333), 0.0);
        assert_eq!(f.eval(1.0 / 3.0), 1.0);
        assert_eq!(f.eval_left(1.0 / 3.0), 0.0);
        assert_eq!(f.discontinuities().len(), 1);
    }

    #[test]
    fn exponential_shape() {
        let f = RoundingFunction::for_alpha(0.1, Mode::Complete).unwrap();
        let a = f.a();
        assert_eq!(f.eval(0.0), 0.0);
        assert!((f.eval(0.1) - (1.0 - (-0.1 * a).exp())).abs() < 1e-15);
        assert!(f.eval_left(f.tau()) < 1.0);
        assert_eq!(f.eval(f.tau()), 1.0);
    }

    #[test]
    fn tabulated_lookup() {
        let f = RoundingFunction::tabulated(1.0, 3.0, vec![(0.0, 0.0), (0.1, 0.2), (0.2, 0.5)]).unwrap();
        assert_eq!(f.eval(0.05), 0.0);
        assert_eq!(f.eval(0.1), 0.2);
        assert_eq!(f.eval(0.1 - 1e-14), 0.2);
        assert_eq!(f.eval(0.19), 0.2);
        assert_eq!(f.eval(0.3), 0.5);
        assert_eq!(f.eval(1.0 / 3.0), 1.0);
        assert_eq!(f.eval_left(1.0 / 3.0), 0.5);
        assert!(RoundingFunction::tabulated(1.0, 3.0, vec![(0.0, 0.1)]).is_err());
        assert!(RoundingFunction::tabulated(1.0, 3.0, vec![(0.0, 0.0), (0.4, 0.5)]).is_err());
        assert!(RoundingFunction::tabulated(1.0, 3.0, vec![(0.0, 0.0), (0.2, 0.5), (0.1, 0.6)]).is_err());
    }

    #[test]
    fn pivot_round_is_reproducible() {
        let x = EdgeLengths::from_fn(12, |u, v| ((u * 5 + v * 3) % 7) as f64 / 7.0);
        let f = RoundingFunction::for_alpha(0.3, Mode::Complete).unwrap();
        let a = pivot_round(&x, &f, 99);
        let b = pivot_round(&x, &f, 99);
        assert_eq!(a, b);
        let line = a.trace_jsonl();
        assert!(line.starts_with("{\"step\":0,\"pivot\":"));
        assert!(line.contains("\"R\":"));
    }

    #[test]
    fn zero_lengths_give_one_cluster() {
        let x = EdgeLengths::zeros(6);
        let f = RoundingFunction::for_alpha(0.5, Mode::Complete).unwrap();
        let out = pivot_round(&x, &f, 1);
        assert_eq!(out.clustering.num_clusters(), 1);
        assert_eq!(out.trace.len(), 1);
    }

    #[test]
    fn unit_lengths_give_singletons() {
        let x = EdgeLengths::constant(6, 1.0);
        let f = RoundingFunction::for_alpha(0.05, Mode::Complete).unwrap();
        let out = pivot_round(&x, &f, 1);
        assert_eq!(out.clustering.num_clusters(), 6);
    }

    #[test]
    fn expected_step_cost_by_hand() {
        // pivot 0: y = (0, f(x01), f(x02)); the other pivots are symmetric
        let inst = Instance::from_fn(3, Topology::Complete, 1.0, 1.0, |_, _| (crate::Sign::Positive, 1.0)).unwrap();
        let x = EdgeLengths::constant(3, 0.5);
        let f = RoundingFunction::for_alpha(1.0, Mode::Complete).unwrap();
        // every y off the pivot is 1, so only the pivot's two edges are cut
        let (alg, lp) = expected_step_cost(&inst, &x, &f, &[0, 1, 2]).unwrap();
        assert!((alg - 2.0).abs() < 1e-12);
        // pivot edges: x * (1 - 0) = 0.5 each; far edge: 0.5 * (1 - 1) = 0
        assert!((lp - 1.0).abs() < 1e-12);
        assert!(expected_step_cost(&inst, &x, &f, &[]).is_err());
    }

    proptest! {
        #[test]
        fn functions_are_monotone_with_fixed_ends(alpha in 0.001f64..=1.0, bip in any::<bool>(), xs in prop::collection::vec(0.0f64..=1.0, 2..20)) {
            let mode = if bip { Mode::Bipartite } else { Mode::Complete };
            let f = RoundingFunction::for_alpha(alpha, mode).unwrap();
            prop_assert_eq!(f.eval(0.0), 0.0);
            prop_assert_eq!(f.eval(1.0), 1.0);
            let mut xs = xs;
            xs.sort_by(f64::total_cmp);
            for w in xs.windows(2) {
                prop_assert!(f.eval(w[0]) <= f.eval(w[1]));
                prop_assert!(f.eval_left(w[1]) <= f.eval(w[1]));
                prop_assert!((0.0..=1.0).contains(&f.eval(w[0])));
            }
        }

        #[test]
        fn pivot_round_partitions(n in 1usize..25, seed in any::<u64>(), alpha in 0.01f64..=1.0) {
            let x = EdgeLengths::from_fn(n, |u, v| (((u + 1) * (v + 3) * 7919) % 101) as f64 / 100.0);
            let f = RoundingFunction::for_alpha(alpha, Mode::Complete).unwrap();
            let out = pivot_round(&x, &f, seed);
            let mut seen = vec![false; n];
            for s in &out.trace {
                prop_assert!(s.cluster_members.contains(&s.pivot));
                prop_assert!((0.0..1.0).contains(&s.r));
                for &u in &s.cluster_members {
                    prop_assert!(!seen[u]);
                    seen[u] = true;
                    prop_assert_eq!(out.clustering.labels()[u], s.step);
                }
            }
            prop_assert!(seen.iter().all(|s| *s));
        }
    }
}
