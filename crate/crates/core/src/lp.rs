//! The metric LP relaxation: edge lengths `x_uv` in `[0, 1]` obeying the
//! triangle inequality, minimizing
//! `sum_{+} w_uv x_uv + sum_{-} w_uv (1 - x_uv)`.

use microlp::{ComparisonOp, OptimizationDirection, Problem, Solution, Variable};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{pair_count, pair_index, Instance, Sign};

pub const DEFAULT_TAU_FEAS: f64 = 1e-7;
pub const DEFAULT_TAU_OPT: f64 = 1e-6;
pub const DEFAULT_MAX_ROUNDS: usize = 200;

/// Symmetric `n x n` matrix of edge lengths with a zero diagonal, stored
/// densely so rows can be scanned contiguously.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeLengths {
    n: usize,
    data: Vec<f64>,
}

impl EdgeLengths {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    /// Every off-diagonal entry set to `value`.
    pub fn constant(n: usize, value: f64) -> Self {
        Self::from_fn(n, |_, _| value)
    }

    /// `f(u, v)` is called once per pair with `u < v`.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut x = Self::zeros(n);
        for u in 0..n {
            for v in u + 1..n {
                x.set(u, v, f(u, v));
            }
        }
        x
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.data[u * self.n + v]
    }

    /// Sets both orientations; the diagonal stays zero.
    #[inline]
    pub fn set(&mut self, u: usize, v: usize, value: f64) {
        if u != v {
            self.data[u * self.n + v] = value;
            self.data[v * self.n + u] = value;
        }
    }

    #[inline]
    pub fn row(&self, u: usize) -> &[f64] {
        &self.data[u * self.n..(u + 1) * self.n]
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverStats {
    /// Simplex pivots reported by the LP backend.
    pub lp_iterations: u64,
    /// Completed separation rounds (solve + scan).
    pub rounds: usize,
    /// Triangle rows in the final LP.
    pub triangle_rows: usize,
    /// Largest triangle or bound violation of the returned lengths.
    pub max_violation: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricSolution {
    pub x: EdgeLengths,
    pub objective: f64,
    pub stats: SolverStats,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpMode {
    /// All `3 * C(n, 3)` triangle rows up front.
    Full,
    /// Box constraints only, then separation rounds adding the most violated
    /// triangles.
    LazySeparation,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LpOptions {
    pub tau_feas: f64,
    pub tau_opt: f64,
    pub mode: LpMode,
    pub max_rounds: usize,
}

impl Default for LpOptions {
    fn default() -> Self {
        Self {
            tau_feas: DEFAULT_TAU_FEAS,
            tau_opt: DEFAULT_TAU_OPT,
            mode: LpMode::LazySeparation,
            max_rounds: DEFAULT_MAX_ROUNDS,
        }
    }
}

impl LpOptions {
    pub fn with_mode(mode: LpMode) -> Self {
        Self { mode, ..Self::default() }
    }
}

/// LP cost of `x`; missing pairs contribute nothing.
pub fn lp_objective(inst: &Instance, x: &EdgeLengths) -> Result<f64> {
    if x.n() != inst.n() {
        return Err(Error::Dimension { expected: inst.n(), actual: x.n() });
    }
    let mut total = 0.0;
    for (u, v, sign, w) in inst.pairs() {
        match sign {
            Sign::Positive => total += w * x.get(u, v),
            Sign::Negative => total += w * (1.0 - x.get(u, v)),
            Sign::Missing => {}
        }
    }
    Ok(total)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FeasibilityReport {
    /// Maximum of `x_uw - x_uv - x_vw` over ordered triples of distinct
    /// vertices; `0` when `n < 3`.
    pub max_triangle_violation: f64,
    /// `(u, v, w)` attaining the maximum, `v` being the intermediate vertex.
    pub worst_triple: Option<(usize, usize, usize)>,
    /// Largest distance of an entry outside `[0, 1]`.
    pub max_bound_violation: f64,
    pub passed: bool,
}

impl FeasibilityReport {
    pub fn max_violation(&self) -> f64 {
        self.max_triangle_violation.max(self.max_bound_violation).max(0.0)
    }
}

/// Min of `a[i] + b[i]` over `i in range`; eight accumulators keep the loop
/// vectorizable.
#[inline]
fn min_sum(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [f64::INFINITY; 8];
    let chunks = a.len() / 8;
    for c in 0..chunks {
        for l in 0..8 {
            let s = a[c * 8 + l] + b[c * 8 + l];
            acc[l] = if s < acc[l] { s } else { acc[l] };
        }
    }
    let mut m = acc.iter().copied().fold(f64::INFINITY, f64::min);
    for i in chunks * 8..a.len() {
        m = m.min(a[i] + b[i]);
    }
    m
}

/// For the pair `(u, w)`, the smallest `x_uv + x_vw` over `v` not in `{u, w}`.
fn best_detour(x: &EdgeLengths, u: usize, w: usize) -> f64 {
    let (lo, hi) = if u < w { (u, w) } else { (w, u) };
    let (ru, rw) = (x.row(u), x.row(w));
    min_sum(&ru[..lo], &rw[..lo])
        .min(min_sum(&ru[lo + 1..hi], &rw[lo + 1..hi]))
        .min(min_sum(&ru[hi + 1..], &rw[hi + 1..]))
}

pub fn check_metric_feasibility(x: &EdgeLengths, tau_feas: f64) -> FeasibilityReport {
    let n = x.n();
    let max_bound_violation = x
        .data
        .iter()
        .map(|&v| (-v).max(v - 1.0).max(0.0))
        .fold(0.0, f64::max);
    if n < 3 {
        return FeasibilityReport {
            max_triangle_violation: 0.0,
            worst_triple: None,
            max_bound_violation,
            passed: max_bound_violation <= tau_feas,
        };
    }
    // (violation, u, w) maximized per row, first index wins ties
    let best = (0..n)
        .into_par_iter()
        .map(|u| {
            let mut best = (f64::NEG_INFINITY, u, u);
            for w in u + 1..n {
                let viol = x.get(u, w) - best_detour(x, u, w);
                if viol > best.0 {
                    best = (viol, u, w);
                }
            }
            best
        })
        .reduce(
            || (f64::NEG_INFINITY, usize::MAX, usize::MAX),
            |a, b| if b.0 > a.0 || (b.0 == a.0 && (b.1, b.2) < (a.1, a.2)) { b } else { a },
        );
    let (viol, u, w) = best;
    let target = x.get(u, w) - viol;
    let v = (0..n)
        .filter(|&v| v != u && v != w)
        .min_by(|&a, &b| {
            let da = (x.get(u, a) + x.get(a, w) - target).abs();
            let db = (x.get(u, b) + x.get(b, w) - target).abs();
            da.total_cmp(&db)
        })
        .expect("n >= 3");
    FeasibilityReport {
        max_triangle_violation: viol,
        worst_triple: Some((u, v, w)),
        max_bound_violation,
        passed: viol <= tau_feas && max_bound_violation <= tau_feas,
    }
}

/// Triangle rows `x_uw - x_uv - x_vw <= 0` violated by more than `tol`, as
/// `(violation, u, v, w)` with `u < w`, most violated first, at most `limit`.
fn most_violated(x: &EdgeLengths, tol: f64, limit: usize) -> Vec<(f64, usize, usize, usize)> {
    let n = x.n();
    let mut found: Vec<(f64, usize, usize, usize)> = (0..n)
        .into_par_iter()
        .flat_map_iter(|u| {
            let mut local = Vec::new();
            for w in u + 1..n {
                let xuw = x.get(u, w);
                if xuw - best_detour(x, u, w) <= tol {
                    continue;
                }
                for v in 0..n {
                    if v == u || v == w {
                        continue;
                    }
                    let viol = xuw - x.get(u, v) - x.get(v, w);
                    if viol > tol {
                        local.push((viol, u, v, w));
                    }
                }
            }
            local
        })
        .collect();
    let key = |a: &(f64, usize, usize, usize), b: &(f64, usize, usize, usize)| {
        b.0.total_cmp(&a.0).then((a.1, a.2, a.3).cmp(&(b.1, b.2, b.3)))
    };
    if found.len() > limit {
        found.select_nth_unstable_by(limit, key);
        found.truncate(limit);
    }
    found.sort_by(key);
    found
}

fn triangle_row(vars: &[Variable], u: usize, v: usize, w: usize) -> [(Variable, f64); 3] {
    [
        (vars[pair_index(u, w)], 1.0),
        (vars[pair_index(u, v)], -1.0),
        (vars[pair_index(v, w)], -1.0),
    ]
}

fn solver_error(reason: impl std::fmt::Display, stats: SolverStats) -> Error {
    Error::Solver { reason: reason.to_string(), stats }
}

/// Solves the metric LP. Weights are divided by `w_scale` inside the solver;
/// the reported objective is `lp_objective(inst, x)` on the original weights.
pub fn solve_metric_lp(inst: &Instance, opts: &LpOptions) -> Result<MetricSolution> {
    let n = inst.n();
    if n < 2 {
        return Err(Error::Parameter(format!("metric LP needs n >= 2, got {n}")));
    }
    let scale = inst.w_scale();
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::InvalidInstance(format!("w_scale = {scale} must be positive")));
    }

    let mut problem = Problem::new(OptimizationDirection::Minimize);
    let mut vars: Vec<Variable> = Vec::with_capacity(pair_count(n));
    // pushed in triangular-index order
    for v in 1..n {
        for u in 0..v {
            debug_assert_eq!(vars.len(), pair_index(u, v));
            let c = match inst.sign(u, v) {
                Sign::Positive => inst.weight(u, v) / scale,
                Sign::Negative => -inst.weight(u, v) / scale,
                Sign::Missing => 0.0,
            };
            vars.push(problem.add_var(c, (0.0, 1.0)));
        }
    }
    let mut stats = SolverStats::default();
    if opts.mode == LpMode::Full {
        for a in 0..n {
            for b in a + 1..n {
                for c in b + 1..n {
                    for (u, v, w) in [(a, b, c), (a, c, b), (b, a, c)] {
                        problem.add_constraint(triangle_row(&vars, u, v, w), ComparisonOp::Le, 0.0);
                        stats.triangle_rows += 1;
                    }
                }
            }
        }
    }

    let mut solution: Solution = problem
        .solve()
        .map_err(|e| solver_error(e, stats))?
        .into_solution()
        .map_err(|_| solver_error("interrupted", stats))?;
    let batch = 5 * n;
    loop {
        stats.rounds += 1;
        stats.lp_iterations = solution.stats().lp_iterations;
        let x = extract(&solution, &vars, n);
        let cuts = most_violated(&x, opts.tau_feas, batch);
        if cuts.is_empty() {
            let report = check_metric_feasibility(&x, opts.tau_feas);
            stats.max_violation = report.max_violation();
            let objective = lp_objective(inst, &x)?;
            return Ok(MetricSolution { x, objective, stats });
        }
        if stats.rounds >= opts.max_rounds {
            stats.max_violation = cuts[0].0;
            return Err(solver_error("separation round cap reached", stats));
        }
        for &(_, u, v, w) in &cuts {
            solution = solution
                .add_constraint(triangle_row(&vars, u, v, w), ComparisonOp::Le, 0.0)
                .map_err(|e| solver_error(e, stats))?
                .into_solution()
                .map_err(|_| solver_error("interrupted", stats))?;
            stats.triangle_rows += 1;
        }
    }
}

/// Reads the LP values, clamped to `[0, 1]`.
fn extract(solution: &Solution, vars: &[Variable], n: usize) -> EdgeLengths {
    EdgeLengths::from_fn(n, |u, v| solution.var_value(vars[pair_index(u, v)]).clamp(0.0, 1.0))
}
