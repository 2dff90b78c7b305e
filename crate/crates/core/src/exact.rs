//! Exhaustive search over set partitions for small instances.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{disagreement_cost, Clustering, Instance, Sign};

pub const DEFAULT_N_CAP: usize = 13;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExactResult {
    pub opt_cost: f64,
    pub opt_clustering: Clustering,
    pub partitions_enumerated: u64,
}

struct Search {
    n: usize,
    /// `cut[v * n + u]`: cost of separating `u` and `v`; `join` likewise.
    cut: Vec<f64>,
    join: Vec<f64>,
    labels: Vec<usize>,
    best_cost: f64,
    best: Vec<usize>,
    leaves: u64,
}

impl Search {
    fn visit(&mut self, v: usize, blocks: usize, cost: f64) {
        if v == self.n {
            self.leaves += 1;
            if cost < self.best_cost {
                self.best_cost = cost;
                self.best.copy_from_slice(&self.labels);
            }
            return;
        }
        for b in 0..=blocks {
            let mut delta = 0.0;
            for u in 0..v {
                delta += if self.labels[u] == b { self.join[v * self.n + u] } else { self.cut[v * self.n + u] };
            }
            self.labels[v] = b;
            self.visit(v + 1, blocks.max(b + 1), cost + delta);
        }
    }
}

/// Minimum-disagreement clustering by restricted-growth-string enumeration.
/// Ties go to the partition enumerated first.
pub fn exact_opt(inst: &Instance, n_cap: usize) -> Result<ExactResult> {
    let n = inst.n();
    if n > n_cap {
        return Err(Error::TooLarge { n, cap: n_cap });
    }
    let mut cut = vec![0.0; n * n];
    let mut join = vec![0.0; n * n];
    for (u, v, sign, w) in inst.pairs() {
        let (lo, hi) = (u.min(v), u.max(v));
        match sign {
            Sign::Positive => cut[hi * n + lo] = w,
            Sign::Negative => join[hi * n + lo] = w,
            Sign::Missing => {}
        }
    }
    let mut s = Search { n, cut, join, labels: vec![0; n], best_cost: f64::INFINITY, best: vec![0; n], leaves: 0 };
    s.visit(0, 0, 0.0);
    let opt_clustering = Clustering::new(s.best);
    let opt_cost = disagreement_cost(inst, &opt_clustering)?;
    Ok(ExactResult { opt_cost, opt_clustering, partitions_enumerated: s.leaves })
}
