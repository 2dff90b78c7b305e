//! Best rounding function for the triple analysis at a given factor `A`, found
//! as a step function on a grid by linear programming, and the smallest
//! feasible `A` by bisection.
//!
//! Unknowns are `y_p = f(x_p)` at grid points `0 < x_p < tau(A)`; `f(0) = 0`
//! and `f = 1` from `tau` on. For fixed `A` every `t_i` is affine in `y`, so
//! the constraints "negative edges pay for themselves" and "the worst weighted
//! sum is nonnegative" are linear. We maximize a slack `s <= 0` under
//! `sum w_i t_i >= s`; the grid admits a function at `A` iff `s* = 0`.
//! Rows are generated lazily from the most violated grid triangles.

use std::collections::HashSet;
use std::io::Write;

use microlp::{ComparisonOp, LinearExpr, OptimizationDirection, Problem, Solution, Variable};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lp::SolverStats;
use crate::model::Sign;
use crate::rounding::{approximation_factor, check_alpha, threshold, Mode, RoundingFunction};
use crate::triple::{certify_grid, certify_grid_with, side_combos, CertOptions, t_from_y, Grid, Side, Signature, METRIC_SLACK};

/// `s*` at or above `-FEAS_TOL` counts as feasible.
pub const FEAS_TOL: f64 = 1e-8;
/// Violations below this are not separated.
pub const SEP_TOL: f64 = 1e-10;
pub const RECERT_TOL: f64 = 1e-6;
/// Headroom over `A_opt` for the refined (off-grid) check.
pub const OFFGRID_HEADROOM: f64 = 0.05;
const CUTS_PER_ROUND: usize = 400;
const MAX_ROUNDS: usize = 5000;
const S_FLOOR: f64 = -10.0;

/// `y` at a grid point: a known constant or an LP column.
#[derive(Clone, Copy, Debug)]
enum YRef {
    Const(f64),
    Var(usize),
}

struct Model {
    alpha: f64,
    a: f64,
    grid: Grid,
    right: Vec<YRef>,
    left: Vec<YRef>,
    /// Grid points carrying a column, in column order.
    var_points: Vec<usize>,
    sigs: Vec<Signature>,
}

/// One cut: the triangle, its one-sided variant and signature, and either a
/// single negative edge (`t_i >= 0`) or a weight vector (`sum w t >= s`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
struct CutKey {
    idx: [usize; 3],
    sides: [Side; 3],
    sig: usize,
    kind: CutKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum CutKind {
    Negative(u8),
    /// Bit `i` set: positive edge `i` takes weight 1, else `alpha`.
    Weighted(u8),
}

impl Model {
    fn new(alpha: f64, a: f64, h: f64) -> Self {
        let tau = threshold(a);
        let grid = Grid::for_factor(h, a);
        let mut right = Vec::with_capacity(grid.len());
        let mut var_points = Vec::new();
        for (p, &x) in grid.xs.iter().enumerate() {
            if p == 0 {
                right.push(YRef::Const(0.0));
            } else if x < tau - METRIC_SLACK {
                right.push(YRef::Var(var_points.len()));
                var_points.push(p);
            } else {
                right.push(YRef::Const(1.0));
            }
        }
        // left limits differ only at tau, where they equal the last column
        let left = (0..grid.len())
            .map(|p| if grid.jump[p] && p > 0 { right[p - 1] } else { right[p] })
            .collect();
        Self { alpha, a, grid, right, left, var_points, sigs: Signature::complete_all() }
    }

    fn yref(&self, p: usize, side: Side) -> YRef {
        match side {
            Side::Left => self.left[p],
            Side::Right => self.right[p],
        }
    }

    fn value(&self, r: YRef, y: &[f64]) -> f64 {
        match r {
            YRef::Const(c) => c,
            YRef::Var(v) => y[v],
        }
    }

    /// `t_i` as `(constant, [(yref_j, coef), (yref_k, coef)])`.
    fn t_affine(&self, x: [f64; 3], refs: [YRef; 3], sign: Sign, i: usize) -> (f64, [(YRef, f64); 2]) {
        let (j, k) = match i {
            0 => (1, 2),
            1 => (0, 2),
            _ => (0, 1),
        };
        match sign {
            Sign::Negative => {
                let c = self.a * (1.0 - x[i]);
                (c - 1.0, [(refs[j], -c), (refs[k], 1.0)])
            }
            _ => {
                let c = self.a * x[i];
                (c, [(refs[j], 1.0 - c), (refs[k], -1.0)])
            }
        }
    }

    /// The cut as `sum coef_v y_v - [s] >= rhs`; the flag says whether `s`
    /// appears.
    fn row(&self, key: &CutKey) -> (Vec<(usize, f64)>, bool, f64) {
        let x = key.idx.map(|p| self.grid.xs[p]);
        let refs = [0, 1, 2].map(|c| self.yref(key.idx[c], key.sides[c]));
        let sig = &self.sigs[key.sig];
        let mut constant = 0.0;
        let mut coefs = vec![0.0; self.var_points.len()];
        let mut add = |i: usize, w: f64| {
            let (c, terms) = self.t_affine(x, refs, sig.0[i], i);
            constant += w * c;
            for (r, coef) in terms {
                match r {
                    YRef::Const(v) => constant += w * coef * v,
                    YRef::Var(v) => coefs[v] += w * coef,
                }
            }
        };
        let weighted = match key.kind {
            CutKind::Negative(i) => {
                add(i as usize, 1.0);
                false
            }
            CutKind::Weighted(bits) => {
                for i in 0..3 {
                    let w = match sig.0[i] {
                        Sign::Missing => 0.0,
                        Sign::Positive if bits >> i & 1 == 1 => 1.0,
                        _ => self.alpha,
                    };
                    if w != 0.0 {
                        add(i, w);
                    }
                }
                true
            }
        };
        let terms = coefs.into_iter().enumerate().filter(|(_, c)| *c != 0.0).collect();
        (terms, weighted, -constant)
    }

    /// Violated cuts at `(y, s)`, most violated first.
    fn separate(&self, y: &[f64], s: f64) -> Vec<(f64, CutKey)> {
        let g = &self.grid;
        let m = g.len();
        let mut found: Vec<(f64, CutKey)> = (0..m)
            .into_par_iter()
            .flat_map_iter(|i| {
                let mut local = Vec::new();
                for j in i..m {
                    for k in g.k_range(i, j) {
                        let idx = [i, j, k];
                        let x = idx.map(|p| g.xs[p]);
                        for sides in side_combos(x, idx.map(|p| g.jump[p])) {
                            let yv = [0, 1, 2].map(|c| self.value(self.yref(idx[c], sides[c]), y));
                            for (si, sig) in self.sigs.iter().enumerate() {
                                let t = t_from_y(x, yv, sig, self.a);
                                let mut sum = 0.0;
                                let mut bits = 0u8;
                                for c in 0..3 {
                                    match sig.0[c] {
                                        Sign::Negative => {
                                            if t[c] < -SEP_TOL {
                                                let kind = CutKind::Negative(c as u8);
                                                local.push((-t[c], CutKey { idx, sides, sig: si, kind }));
                                            }
                                            sum += self.alpha * t[c];
                                        }
                                        Sign::Positive if t[c] < 0.0 => {
                                            bits |= 1 << c;
                                            sum += t[c];
                                        }
                                        Sign::Positive => sum += self.alpha * t[c],
                                        Sign::Missing => {}
                                    }
                                }
                                if sum < s - SEP_TOL {
                                    let kind = CutKind::Weighted(bits);
                                    local.push((s - sum, CutKey { idx, sides, sig: si, kind }));
                                }
                            }
                        }
                    }
                }
                local
            })
            .collect();
        found.sort_by(|a, b| b.0.total_cmp(&a.0));
        found
    }

    fn table(&self, y: &[f64]) -> Vec<(f64, f64)> {
        let mut out = vec![(0.0, 0.0)];
        let mut level: f64 = 0.0;
        for (v, &p) in self.var_points.iter().enumerate() {
            level = level.max(y[v].clamp(0.0, 1.0));
            out.push((self.grid.xs[p], level));
        }
        out
    }
}

fn solver_error(e: impl std::fmt::Display, stats: SolverStats) -> Error {
    Error::Solver { reason: e.to_string(), stats }
}

/// Outcome of one feasibility query.
#[derive(Clone, Debug, PartialEq)]
pub struct FeasibilityOutcome {
    /// `(x_j, y_j)` for grid points below `tau`, when feasible.
    pub table: Option<Vec<(f64, f64)>>,
    /// Optimal slack; `0` when feasible.
    pub slack: f64,
    pub stats: SolverStats,
}

fn check_step(h: f64) -> Result<()> {
    if h > 0.0 && h <= 0.05 {
        Ok(())
    } else {
        Err(Error::Parameter(format!("grid step must lie in (0, 0.05], got {h}")))
    }
}

pub fn feasibility_query(alpha: f64, a: f64, h: f64) -> Result<FeasibilityOutcome> {
    check_alpha(alpha)?;
    check_step(h)?;
    if !(a >= 3.0 && a.is_finite()) {
        return Err(Error::Parameter(format!("A must be at least 3, got {a}")));
    }
    let model = Model::new(alpha, a, h);
    let mut problem = Problem::new(OptimizationDirection::Maximize);
    let cols: Vec<Variable> = model.var_points.iter().map(|_| problem.add_var(0.0, (0.0, 1.0))).collect();
    let s = problem.add_var(1.0, (S_FLOOR, 0.0));
    for w in cols.windows(2) {
        problem.add_constraint([(w[0], 1.0), (w[1], -1.0)], ComparisonOp::Le, 0.0);
    }
    let mut stats = SolverStats::default();
    let mut solution: Solution = problem
        .solve()
        .map_err(|e| solver_error(e, stats))?
        .into_solution()
        .map_err(|_| solver_error("interrupted", stats))?;
    let mut added: HashSet<CutKey> = HashSet::new();
    loop {
        stats.rounds += 1;
        stats.lp_iterations = solution.stats().lp_iterations;
        let y: Vec<f64> = cols.iter().map(|&c| solution.var_value(c)).collect();
        let slack = solution.var_value(s);
        if slack < -FEAS_TOL {
            // cuts only lower the slack further
            return Ok(FeasibilityOutcome { table: None, slack, stats });
        }
        let cuts: Vec<(f64, CutKey)> =
            model.separate(&y, slack).into_iter().filter(|(_, k)| !added.contains(k)).take(CUTS_PER_ROUND).collect();
        if cuts.is_empty() {
            stats.max_violation = 0.0;
            return Ok(FeasibilityOutcome { table: Some(model.table(&y)), slack, stats });
        }
        if stats.rounds >= MAX_ROUNDS {
            stats.max_violation = cuts[0].0;
            return Err(solver_error("separation round cap reached", stats));
        }
        for (_, key) in cuts {
            let (terms, with_s, rhs) = model.row(&key);
            let mut expr = LinearExpr::empty();
            for (v, c) in terms {
                expr.add(cols[v], c);
            }
            if with_s {
                expr.add(s, -1.0);
            }
            solution = solution
                .add_constraint(expr, ComparisonOp::Ge, rhs)
                .map_err(|e| solver_error(e, stats))?
                .into_solution()
                .map_err(|_| solver_error("interrupted", stats))?;
            added.insert(key);
            stats.triangle_rows += 1;
        }
    }
}

/// A nondecreasing `f` with `f(0) = 0` and `f = 1` on `[tau(A), 1]` meeting
/// every triangle constraint on the step-`h` grid, if one exists.
pub fn feasibility_lp(alpha: f64, a: f64, h: f64) -> Result<Option<Vec<(f64, f64)>>> {
    Ok(feasibility_query(alpha, a, h)?.table)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OptFResult {
    pub alpha: f64,
    #[serde(rename = "A_opt")]
    pub a_opt: f64,
    #[serde(rename = "A_thm")]
    pub a_thm: f64,
    pub h: f64,
    pub tol: f64,
    /// Grid certification margin of the tabulated function at `A_opt`.
    #[serde(serialize_with = "crate::triple::finite_or_null")]
    pub margin: f64,
    /// Refined certification margin at `A_opt + OFFGRID_HEADROOM`; the step
    /// function is only constrained on the grid, so between grid points it
    /// needs a little slack.
    #[serde(serialize_with = "crate::triple::finite_or_null")]
    pub margin_offgrid: f64,
    /// Feasibility queries issued by the search.
    pub queries: usize,
    #[serde(skip)]
    pub table: Vec<(f64, f64)>,
}

impl OptFResult {
    pub fn function(&self) -> Result<RoundingFunction> {
        RoundingFunction::tabulated(self.alpha, self.a_opt, self.table.clone())
    }

    /// `x,f` rows on the full grid, `f = 1` from `tau` on.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let f = self.function()?;
        let grid = Grid::for_factor(self.h, self.a_opt);
        let mut s = String::from("x,f\n");
        for &x in &grid.xs {
            s.push_str(&format!("{x},{}\n", f.eval(x)));
        }
        out.write_all(s.as_bytes())?;
        Ok(())
    }
}

/// Smallest `A` in `[3, A_thm]` (to within `tol`) admitting a grid function.
/// The table is re-certified by the triple sweep on the same grid without
/// refinement, and the refined sweep is reported at `A_opt + OFFGRID_HEADROOM`.
pub fn compute_a_opt(alpha: f64, h: f64, tol: f64) -> Result<OptFResult> {
    check_alpha(alpha)?;
    check_step(h)?;
    if !(tol >= 1e-4) {
        return Err(Error::Parameter(format!("tolerance must be at least 1e-4, got {tol}")));
    }
    let a_thm = approximation_factor(alpha, Mode::Complete)?;
    let mut queries = 1;
    let (a_opt, table) = if let Some(t) = feasibility_lp(alpha, 3.0, h)? {
        (3.0, t)
    } else {
        queries += 1;
        let mut best = feasibility_lp(alpha, a_thm, h)?
            .ok_or_else(|| Error::Model(format!("no grid function is feasible at A_thm = {a_thm}")))?;
        let (mut lo, mut hi) = (3.0, a_thm);
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            queries += 1;
            match feasibility_lp(alpha, mid, h)? {
                Some(t) => {
                    hi = mid;
                    best = t;
                }
                None => lo = mid,
            }
        }
        (hi, best)
    };
    let f = RoundingFunction::tabulated(alpha, a_opt, table.clone())?;
    let on_grid = CertOptions { refine: false, ..CertOptions::default() };
    let rep = certify_grid_with(alpha, &f, a_opt, h, Mode::Complete, on_grid)?;
    if rep.min_margin < -RECERT_TOL {
        return Err(Error::Recertification { a: a_opt, margin: rep.min_margin });
    }
    let off = certify_grid(alpha, &f, a_opt + OFFGRID_HEADROOM, h, Mode::Complete)?;
    Ok(OptFResult { alpha, a_opt, a_thm, h, tol, margin: rep.min_margin, margin_offgrid: off.min_margin, queries, table })
}
