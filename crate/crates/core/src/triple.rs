//! Triple analysis of pivot rounding on a single triangle, and a grid
//! certifier that checks `ALG <= rho * LP` on every grid triangle against
//! the worst admissible weights.
//!
//! Lengths are sorted, `x1 <= x2 <= x3`, and `x[i]` is the length of the edge
//! opposite vertex `i`. With vertex `i` as pivot the other two vertices join
//! the pivot's cluster with probabilities `1 - y_j` and `1 - y_k`, where
//! `y = f(x)`.

use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::model::Sign;
use crate::rounding::{check_alpha, Mode, RoundingFunction};

pub const EPS_CERT: f64 = 1e-9;
/// Cells whose coarse margin is below this are refined.
pub const REFINE_BELOW: f64 = 10.0 * EPS_CERT;
/// At most this many cells are refined per sweep, most suspicious first.
pub const REFINE_CAP: usize = 4096;
pub const REFINE_FACTOR: usize = 10;
/// A negative edge with `t < -NEG_T_TOL` makes the margin unbounded below.
pub const NEG_T_TOL: f64 = 1e-12;
/// Slack on the triangle inequality and on grid-point coincidence.
pub const METRIC_SLACK: f64 = 1e-12;

/// `Pr[exactly one of u, v joins the pivot's cluster]` for a positive (or
/// missing) edge, `Pr[both join]` for a negative edge.
pub fn cost_given_pivot(sign: Sign, y_u: f64, y_v: f64) -> f64 {
    match sign {
        Sign::Negative => 1.0 - y_u.max(y_v),
        _ => (y_u - y_v).abs(),
    }
}

/// LP charge of edge `uv` times `Pr[u or v joins the pivot's cluster]`.
pub fn lp_given_pivot(sign: Sign, x_uv: f64, y_u: f64, y_v: f64) -> f64 {
    let removed = 1.0 - y_u.min(y_v);
    match sign {
        Sign::Negative => (1.0 - x_uv) * removed,
        _ => x_uv * removed,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Signature(pub [Sign; 3]);

impl Signature {
    /// The eight `+/-` patterns.
    pub fn complete_all() -> Vec<Self> {
        let s = [Sign::Positive, Sign::Negative];
        let mut out = Vec::with_capacity(8);
        for a in s {
            for b in s {
                for c in s {
                    out.push(Signature([a, b, c]));
                }
            }
        }
        out
    }

    /// Patterns with exactly one missing edge: a bipartite triangle has two
    /// cross edges or none, and the empty one is trivially fine.
    pub fn bipartite_all() -> Vec<Self> {
        let s = [Sign::Positive, Sign::Negative];
        let mut out = Vec::with_capacity(12);
        for miss in 0..3 {
            for a in s {
                for b in s {
                    let mut sig = [Sign::Missing; 3];
                    let mut present = (0..3).filter(|&p| p != miss);
                    sig[present.next().unwrap()] = a;
                    sig[present.next().unwrap()] = b;
                    out.push(Signature(sig));
                }
            }
        }
        out
    }

    pub fn for_mode(mode: Mode) -> Vec<Self> {
        match mode {
            Mode::Complete => Self::complete_all(),
            Mode::Bipartite => Self::bipartite_all(),
        }
    }

    pub fn is_admissible(&self, mode: Mode) -> bool {
        let missing = self.0.iter().filter(|s| **s == Sign::Missing).count();
        match mode {
            Mode::Complete => missing == 0,
            Mode::Bipartite => missing == 1 || missing == 3,
        }
    }

    pub fn label(&self) -> String {
        self.0.iter().map(|s| s.symbol()).collect()
    }
}

impl Serialize for Signature {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.label())
    }
}

#[inline]
fn others(i: usize) -> (usize, usize) {
    match i {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    }
}

/// `t_i` for explicit `y` values; `y` must be nondecreasing.
#[inline]
pub fn t_from_y(x: [f64; 3], y: [f64; 3], sigma: &Signature, a: f64) -> [f64; 3] {
    let mut t = [0.0; 3];
    for i in 0..3 {
        let (j, k) = others(i);
        t[i] = match sigma.0[i] {
            Sign::Negative => a * (1.0 - y[j]) * (1.0 - x[i]) - (1.0 - y[k]),
            _ => a * (1.0 - y[j]) * x[i] - (y[k] - y[j]),
        };
    }
    t
}

/// `min sum w_i t_i` over admissible weights with `w = 1` as the top of the
/// positive band.
#[inline]
pub fn margin_from_t(t: [f64; 3], sigma: &Signature, alpha: f64) -> f64 {
    let mut m = 0.0;
    for i in 0..3 {
        match sigma.0[i] {
            Sign::Missing => {}
            Sign::Positive => m += if t[i] < 0.0 { t[i] } else { alpha * t[i] },
            Sign::Negative => {
                if t[i] < -NEG_T_TOL {
                    return f64::NEG_INFINITY;
                }
                m += alpha * t[i];
            }
        }
    }
    m
}

fn check_sorted_metric(x: [f64; 3]) -> Result<()> {
    let ok = x.iter().all(|v| (0.0..=1.0).contains(v)) && x[0] <= x[1] && x[1] <= x[2];
    if !ok {
        return Err(Error::Parameter(format!("lengths {x:?} are not sorted within [0, 1]")));
    }
    if x[2] > x[0] + x[1] + METRIC_SLACK {
        return Err(Error::Parameter(format!("lengths {x:?} violate the triangle inequality")));
    }
    Ok(())
}

pub fn t_values(x: [f64; 3], sigma: &Signature, f: &RoundingFunction, a: f64) -> Result<[f64; 3]> {
    check_sorted_metric(x)?;
    let y = x.map(|v| f.eval(v));
    Ok(t_from_y(x, y, sigma, a))
}

pub fn worst_case_margin(x: [f64; 3], sigma: &Signature, f: &RoundingFunction, a: f64, alpha: f64) -> Result<f64> {
    let t = t_values(x, sigma, f, a)?;
    Ok(margin_from_t(t, sigma, alpha))
}

/// Which one-sided value of `f` a grid coordinate takes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

/// Sorted grid `{k * step} ∪ {1} ∪ snap` with points closer than
/// `METRIC_SLACK` merged onto the snap value. `jump[p]` marks points within
/// `METRIC_SLACK` of an entry of `jumps`.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    pub xs: Vec<f64>,
    pub jump: Vec<bool>,
}

impl Grid {
    pub fn new(step: f64, snap: &[f64], jumps: &[f64]) -> Self {
        let m = (1.0 / step + 1e-9).floor() as usize;
        let mut pts: Vec<(f64, bool)> = (0..=m).map(|k| (k as f64 * step, false)).collect();
        pts.push((1.0, false));
        pts.extend(snap.iter().filter(|s| (0.0..=1.0).contains(*s)).map(|&s| (s, true)));
        pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)));
        let mut merged: Vec<(f64, bool)> = Vec::with_capacity(pts.len());
        for (x, snapped) in pts {
            match merged.last_mut() {
                Some(last) if (x - last.0).abs() <= METRIC_SLACK => {
                    if snapped && !last.1 {
                        *last = (x, true);
                    }
                }
                _ => merged.push((x, snapped)),
            }
        }
        let xs: Vec<f64> = merged.into_iter().map(|p| p.0).collect();
        let jump = xs.iter().map(|x| jumps.iter().any(|j| (x - j).abs() <= METRIC_SLACK)).collect();
        Self { xs, jump }
    }

    /// The grid a certification or optimal-f query uses for factor `a`.
    pub fn for_factor(step: f64, a: f64) -> Self {
        let tau = crate::rounding::threshold(a);
        Self::new(step, &[1.0 / a, tau], &[tau])
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    /// `k` range with `x_k` in `[x_j, x_i + x_j]`, for `i <= j`.
    pub fn k_range(&self, i: usize, j: usize) -> std::ops::Range<usize> {
        let lim = self.xs[i] + self.xs[j] + METRIC_SLACK;
        j..j + self.xs[j..].partition_point(|&x| x <= lim)
    }

    pub fn triangle_count(&self) -> u64 {
        let m = self.len();
        (0..m).map(|i| (i..m).map(|j| self.k_range(i, j).len() as u64).sum::<u64>()).sum()
    }
}

/// One-sided assignments worth checking for a sorted triple. A coordinate
/// can take its left limit only at a jump; equal coordinates take sides in
/// nondecreasing order; and on a tight triangle the longest side cannot sit
/// right of its jump while both shorter ones sit left of theirs.
pub fn side_combos(x: [f64; 3], jump: [bool; 3]) -> impl Iterator<Item = [Side; 3]> {
    let tight = x[0] + x[1] - x[2] <= METRIC_SLACK;
    (0u8..8).filter_map(move |bits| {
        let s = [0, 1, 2].map(|c| if bits >> c & 1 == 1 { Side::Left } else { Side::Right });
        if (0..3).any(|c| s[c] == Side::Left && !jump[c]) {
            return None;
        }
        if (x[0] == x[1] && s[0] > s[1]) || (x[1] == x[2] && s[1] > s[2]) {
            return None;
        }
        if tight && jump[2] && s[2] == Side::Right && s[0] == Side::Left && s[1] == Side::Left {
            return None;
        }
        Some(s)
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Argmin {
    pub x1: f64,
    pub x2: f64,
    pub x3: f64,
    pub sigma: Signature,
    pub y: [f64; 3],
    pub sides: [Side; 3],
    pub t: [f64; 3],
}

pub(crate) fn finite_or_null<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_none()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CertReport {
    pub alpha: f64,
    pub rho: f64,
    pub step: f64,
    pub mode: Mode,
    /// Grid triangles (with one-sided variants) evaluated, refinement included.
    pub triangles_checked: u64,
    pub signatures_per_triangle: usize,
    /// `null` in JSON when unbounded below.
    #[serde(serialize_with = "finite_or_null")]
    pub min_margin: f64,
    /// Some negative edge had `t < 0`, so the weight can grow without bound.
    pub unbounded: bool,
    pub argmin: Option<Argmin>,
    /// Coarse cells with margin below the refinement threshold.
    pub flagged_cells: usize,
    pub refined_cells: usize,
    pub eps_cert: f64,
    pub passed: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CertOptions {
    pub refine: bool,
    pub refine_cap: usize,
}

impl Default for CertOptions {
    fn default() -> Self {
        Self { refine: true, refine_cap: REFINE_CAP }
    }
}

/// Best (lowest margin) candidate seen so far; ties keep the earlier key.
#[derive(Clone, Debug)]
struct Best {
    margin: f64,
    key: (u64, u64),
    hit: Option<Argmin>,
}

impl Best {
    fn empty() -> Self {
        Self { margin: f64::INFINITY, key: (u64::MAX, u64::MAX), hit: None }
    }

    fn better(a: Self, b: Self) -> Self {
        if b.margin < a.margin || (b.margin == a.margin && b.key < a.key) {
            b
        } else {
            a
        }
    }
}

struct Sweep<'a> {
    f: &'a RoundingFunction,
    rho: f64,
    alpha: f64,
    sigs: Vec<Signature>,
}

impl Sweep<'_> {
    /// Minimum over side variants and signatures at one triangle.
    fn cell(&self, x: [f64; 3], y_right: [f64; 3], y_left: [f64; 3], jump: [bool; 3], key: u64, best: &mut Best) -> (f64, u64) {
        let mut cell_min = f64::INFINITY;
        let mut variants = 0;
        for sides in side_combos(x, jump) {
            variants += 1;
            let y = [0, 1, 2].map(|c| if sides[c] == Side::Left { y_left[c] } else { y_right[c] });
            for (si, sig) in self.sigs.iter().enumerate() {
                let t = t_from_y(x, y, sig, self.rho);
                let m = margin_from_t(t, sig, self.alpha);
                cell_min = cell_min.min(m);
                if m < best.margin {
                    *best = Best {
                        margin: m,
                        key: (key, si as u64),
                        hit: Some(Argmin { x1: x[0], x2: x[1], x3: x[2], sigma: *sig, y, sides, t }),
                    };
                }
            }
        }
        (cell_min, variants)
    }
}

/// Checks `ALG <= rho * LP` on every grid triangle for every admissible
/// signature, using the worst weights in the bands. Cells with margin below
/// [`REFINE_BELOW`] are re-swept on a 10x finer local grid.
pub fn certify_grid(alpha: f64, f: &RoundingFunction, rho: f64, step: f64, mode: Mode) -> Result<CertReport> {
    certify_grid_with(alpha, f, rho, step, mode, CertOptions::default())
}

pub fn certify_grid_with(alpha: f64, f: &RoundingFunction, rho: f64, step: f64, mode: Mode, opts: CertOptions) -> Result<CertReport> {
    check_alpha(alpha)?;
    if !(step > 0.0 && step <= 0.1) {
        return Err(Error::Parameter(format!("step must lie in (0, 0.1], got {step}")));
    }
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::Parameter(format!("rho must be positive, got {rho}")));
    }
    let jumps = f.discontinuities();
    let grid = Grid::new(step, &f.case_points(), &jumps);
    let y_right: Vec<f64> = grid.xs.iter().map(|&x| f.eval(x)).collect();
    let y_left: Vec<f64> = grid.xs.iter().map(|&x| f.eval_left(x)).collect();
    let sweep = Sweep { f, rho, alpha, sigs: Signature::for_mode(mode) };
    let m = grid.len();

    // per row i: best hit, variant count, flagged (margin, i, j, k)
    let rows: Vec<(Best, u64, Vec<(f64, usize, usize, usize)>)> = (0..m)
        .into_par_iter()
        .map(|i| {
            let mut best = Best::empty();
            let mut count = 0;
            let mut flagged = Vec::new();
            for j in i..m {
                for k in grid.k_range(i, j) {
                    let idx = [i, j, k];
                    let x = idx.map(|p| grid.xs[p]);
                    let key = ((i * m + j) * m + k) as u64;
                    let (cm, v) = sweep.cell(x, idx.map(|p| y_right[p]), idx.map(|p| y_left[p]), idx.map(|p| grid.jump[p]), key, &mut best);
                    count += v;
                    if cm < REFINE_BELOW {
                        flagged.push((cm, i, j, k));
                    }
                }
            }
            (best, count, flagged)
        })
        .collect();

    let mut best = Best::empty();
    let mut checked = 0;
    let mut flagged = Vec::new();
    for (b, c, fl) in rows {
        best = Best::better(best, b);
        checked += c;
        flagged.extend(fl);
    }
    let flagged_cells = flagged.len();

    let mut refined_cells = 0;
    if opts.refine && !flagged.is_empty() {
        let near_jump = |p: usize| jumps.iter().any(|j| (grid.xs[p] - j).abs() <= step + METRIC_SLACK);
        // negative first, then cells touching a jump, then by margin
        flagged.sort_by(|a, b| {
            let ka = (a.0 >= 0.0, !(near_jump(a.1) || near_jump(a.2) || near_jump(a.3)));
            let kb = (b.0 >= 0.0, !(near_jump(b.1) || near_jump(b.2) || near_jump(b.3)));
            ka.cmp(&kb).then(a.0.total_cmp(&b.0)).then((a.1, a.2, a.3).cmp(&(b.1, b.2, b.3)))
        });
        flagged.truncate(opts.refine_cap);
        refined_cells = flagged.len();
        let results: Vec<(Best, u64)> = flagged
            .par_iter()
            .enumerate()
            .map(|(c, &(_, i, j, k))| refine_cell(&sweep, &jumps, [grid.xs[i], grid.xs[j], grid.xs[k]], step, c as u64))
            .collect();
        for (b, cnt) in results {
            best = Best::better(best, b);
            checked += cnt;
        }
    }

    let min_margin = best.margin;
    Ok(CertReport {
        alpha,
        rho,
        step,
        mode,
        triangles_checked: checked,
        signatures_per_triangle: sweep.sigs.len(),
        min_margin,
        unbounded: min_margin == f64::NEG_INFINITY,
        argmin: best.hit,
        flagged_cells,
        refined_cells,
        eps_cert: EPS_CERT,
        passed: min_margin >= -EPS_CERT,
    })
}

/// Sweeps the box `center +- step` at spacing `step / REFINE_FACTOR`, plus
/// any jumps inside it.
fn refine_cell(sweep: &Sweep<'_>, jumps: &[f64], center: [f64; 3], step: f64, cell: u64) -> (Best, u64) {
    let fine = step / REFINE_FACTOR as f64;
    let r = REFINE_FACTOR as i64;
    let axis = |c: f64| -> Vec<f64> {
        let mut v: Vec<f64> = (-r..=r).map(|m| c + m as f64 * fine).filter(|x| (0.0..=1.0).contains(x)).collect();
        v.extend(jumps.iter().filter(|j| (*j - c).abs() <= step + METRIC_SLACK));
        v.sort_by(f64::total_cmp);
        v.dedup_by(|a, b| (*a - *b).abs() <= METRIC_SLACK);
        v
    };
    let axes = center.map(axis);
    let is_jump = |x: f64| jumps.iter().any(|j| (x - j).abs() <= METRIC_SLACK);
    let mut best = Best::empty();
    let mut count = 0;
    let mut key = cell << 32;
    for &a in &axes[0] {
        for &b in axes[1].iter().filter(|&&b| b >= a) {
            for &c in axes[2].iter().filter(|&&c| c >= b && c <= a + b + METRIC_SLACK) {
                let x = [a, b, c];
                key += 1;
                let (_, v) = sweep.cell(
                    x,
                    x.map(|v| sweep.f.eval(v)),
                    x.map(|v| sweep.f.eval_left(v)),
                    x.map(is_jump),
                    key,
                    &mut best,
                );
                count += v;
            }
        }
    }
    // refined hits rank after every coarse hit with the same margin
    best.key.0 |= 1 << 63;
    (best, count)
}
