//! Instance generators: the planted noisy-classifier model, integrality-gap
//! instances on random 3-regular graphs, and random test instances.

use std::collections::{HashSet, VecDeque};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::EdgeLengths;
use crate::model::{pair_index, Clustering, Instance, Sign, Topology};

/// Attempts before regular-graph sampling gives up.
pub const SAMPLING_RETRY_CAP: usize = 10_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlantedParams {
    pub sizes: Vec<usize>,
    /// Probability of `+` inside a ground-truth cluster.
    pub p_plus: f64,
    /// Probability of `-` across ground-truth clusters.
    pub q_minus: f64,
    pub seed: u64,
}

/// `(w_plus, w_minus)` maximizing the likelihood of the planted model.
pub fn planted_weights(p_plus: f64, q_minus: f64) -> Result<(f64, f64)> {
    if !(p_plus < 1.0) {
        return Err(Error::Model(format!("p_plus < 1 is required, got {p_plus}")));
    }
    if !(q_minus < 1.0) {
        return Err(Error::Model(format!("q_minus < 1 is required, got {q_minus}")));
    }
    if !(p_plus + q_minus > 1.0) {
        return Err(Error::Model(format!("p_plus + q_minus > 1 is required, got {p_plus} + {q_minus}")));
    }
    Ok(((p_plus / (1.0 - q_minus)).ln(), (q_minus / (1.0 - p_plus)).ln()))
}

/// `(alpha, w_scale)` for an instance whose positive pairs weigh `w_plus`
/// and negative pairs `w_minus`.
fn two_weight_profile(w_plus: f64, w_minus: f64) -> (f64, f64) {
    ((w_minus.min(w_plus) / w_plus).min(1.0), w_plus)
}

/// Samples signs from the planted model and weighs them by log-likelihood.
/// Returns the instance and the ground-truth clustering (vertices are
/// numbered cluster by cluster).
pub fn planted_instance(params: &PlantedParams) -> Result<(Instance, Clustering)> {
    let (w_plus, w_minus) = planted_weights(params.p_plus, params.q_minus)?;
    if params.sizes.is_empty() || params.sizes.contains(&0) {
        return Err(Error::Parameter("cluster sizes must be positive".into()));
    }
    let labels: Vec<usize> = params.sizes.iter().enumerate().flat_map(|(c, &s)| std::iter::repeat_n(c, s)).collect();
    let n = labels.len();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut signs = vec![Sign::Positive; n * n.saturating_sub(1) / 2];
    for u in 0..n {
        for v in u + 1..n {
            let r: f64 = rng.random();
            let positive = if labels[u] == labels[v] { r < params.p_plus } else { r >= params.q_minus };
            if !positive {
                signs[pair_index(u, v)] = Sign::Negative;
            }
        }
    }
    let (alpha, w_scale) = two_weight_profile(w_plus, w_minus);
    let inst = Instance::from_fn(n, Topology::Complete, alpha, w_scale, |u, v| {
        let s = signs[pair_index(u, v)];
        (s, if s == Sign::Positive { w_plus } else { w_minus })
    })?;
    Ok((inst, Clustering::new(labels)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapParams {
    pub n: usize,
    pub alpha: f64,
    pub bipartite: bool,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GapInstance {
    pub instance: Instance,
    /// `x_uv = min(eps * d(u, v), 1)`.
    pub x: EdgeLengths,
    /// Edges of the sampled 3-regular graph, `u < v`.
    pub edges: Vec<(usize, usize)>,
    pub epsilon: f64,
    /// Rejected samples (non-simple or disconnected) before acceptance.
    pub retries: usize,
}

/// Random simple 3-regular graph by the configuration model; bipartite graphs
/// match left stubs against a shuffled list of right stubs.
fn sample_cubic(n: usize, bipartite: bool, rng: &mut ChaCha8Rng) -> Option<Vec<(usize, usize)>> {
    let mut edges = Vec::with_capacity(3 * n / 2);
    let mut seen = HashSet::with_capacity(3 * n / 2);
    if bipartite {
        let half = n / 2;
        let left: Vec<usize> = (0..half).flat_map(|v| [v; 3]).collect();
        let mut right: Vec<usize> = (half..n).flat_map(|v| [v; 3]).collect();
        right.shuffle(rng);
        for (u, v) in left.into_iter().zip(right) {
            if !seen.insert((u, v)) {
                return None;
            }
            edges.push((u, v));
        }
    } else {
        let mut stubs: Vec<usize> = (0..n).flat_map(|v| [v; 3]).collect();
        stubs.shuffle(rng);
        for pair in stubs.chunks(2) {
            let (u, v) = (pair[0].min(pair[1]), pair[0].max(pair[1]));
            if u == v || !seen.insert((u, v)) {
                return None;
            }
            edges.push((u, v));
        }
    }
    edges.sort_unstable();
    Some(edges)
}

fn adjacency(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::with_capacity(3); n];
    for &(u, v) in edges {
        adj[u].push(v);
        adj[v].push(u);
    }
    adj
}

/// Hop distances from `src`; `usize::MAX` for unreachable vertices.
fn bfs(adj: &[Vec<usize>], src: usize) -> Vec<usize> {
    let mut dist = vec![usize::MAX; adj.len()];
    let mut queue = VecDeque::from([src]);
    dist[src] = 0;
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    dist
}

/// Integrality-gap instance: graph edges are `+` with weight 1, the remaining
/// pairs (cross pairs when bipartite) are `-` with weight `alpha`, and the
/// fractional solution is the truncated scaled shortest-path metric.
pub fn gap_instance(params: &GapParams) -> Result<GapInstance> {
    let GapParams { n, alpha, bipartite, seed } = *params;
    if n < 4 || n % 2 != 0 {
        return Err(Error::Parameter(format!("n must be even and at least 4, got {n}")));
    }
    if bipartite && n < 6 {
        return Err(Error::Parameter("a 3-regular bipartite graph needs at least 3 vertices per side".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Parameter(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut retries = 0;
    let (edges, adj) = loop {
        if retries >= SAMPLING_RETRY_CAP {
            return Err(Error::Sampling(format!("no simple connected 3-regular graph on {n} vertices after {retries} attempts")));
        }
        if let Some(edges) = sample_cubic(n, bipartite, &mut rng) {
            let adj = adjacency(n, &edges);
            if bfs(&adj, 0).iter().all(|&d| d != usize::MAX) {
                break (edges, adj);
            }
        }
        retries += 1;
    };
    let epsilon = 2.0 * 3f64.ln() / (n as f64).ln();
    let mut x = EdgeLengths::zeros(n);
    for u in 0..n {
        let dist = bfs(&adj, u);
        for v in u + 1..n {
            x.set(u, v, (epsilon * dist[v] as f64).min(1.0));
        }
    }
    let edge_set: HashSet<(usize, usize)> = edges.iter().copied().collect();
    let topology = if bipartite { Topology::Bipartite { left: n / 2 } } else { Topology::Complete };
    let instance = Instance::from_fn(n, topology, alpha, 1.0, |u, v| {
        if edge_set.contains(&(u.min(v), u.max(v))) {
            (Sign::Positive, 1.0)
        } else {
            (Sign::Negative, alpha)
        }
    })?;
    Ok(GapInstance { instance, x, edges, epsilon, retries })
}

/// Smallest even `n >= max(4, 1 / (alpha^2 ln^2(1/alpha)))`.
pub fn suggested_gap_n(alpha: f64) -> Result<usize> {
    if !(alpha > 0.0 && alpha <= 0.5) {
        return Err(Error::Parameter(format!("alpha must lie in (0, 0.5], got {alpha}")));
    }
    let l = (1.0 / alpha).ln();
    let target = (1.0 / (alpha * alpha * l * l)).ceil().max(4.0) as usize;
    Ok(target + target % 2)
}

fn check_density(density: f64) -> Result<()> {
    if (0.0..=1.0).contains(&density) {
        Ok(())
    } else {
        Err(Error::Parameter(format!("density must lie in [0, 1], got {density}")))
    }
}

/// Each pair is `+` with probability `density`; positive weights are uniform
/// on `[alpha, 1]`, negative weights on `[alpha, 2]`; `w_scale = 1`.
pub fn random_instance(n: usize, alpha: f64, density: f64, seed: u64) -> Result<Instance> {
    if n < 2 {
        return Err(Error::Parameter(format!("n must be at least 2, got {n}")));
    }
    crate::rounding::check_alpha(alpha)?;
    check_density(density)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = vec![(Sign::Positive, 0.0); n * (n - 1) / 2];
    for u in 0..n {
        for v in u + 1..n {
            let positive = rng.random::<f64>() < density;
            let hi = if positive { 1.0 } else { 2.0 };
            let w = alpha + (hi - alpha) * rng.random::<f64>();
            pairs[pair_index(u, v)] = (if positive { Sign::Positive } else { Sign::Negative }, w);
        }
    }
    Instance::from_fn(n, Topology::Complete, alpha, 1.0, |u, v| pairs[pair_index(u, v)])
}

/// Random signs with every positive pair weighing `w_plus` and every
/// negative pair `w_minus`.
pub fn two_weight_instance(n: usize, w_plus: f64, w_minus: f64, density: f64, seed: u64) -> Result<Instance> {
    if !(w_plus > 0.0 && w_minus > 0.0 && w_plus.is_finite() && w_minus.is_finite()) {
        return Err(Error::Parameter(format!("weights must be positive, got {w_plus} and {w_minus}")));
    }
    check_density(density)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut signs = vec![Sign::Positive; n * n.saturating_sub(1) / 2];
    for u in 0..n {
        for v in u + 1..n {
            if rng.random::<f64>() >= density {
                signs[pair_index(u, v)] = Sign::Negative;
            }
        }
    }
    let (alpha, w_scale) = two_weight_profile(w_plus, w_minus);
    Instance::from_fn(n, Topology::Complete, alpha, w_scale, |u, v| {
        let s = signs[pair_index(u, v)];
        (s, if s == Sign::Positive { w_plus } else { w_minus })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::check_metric_feasibility;
    use crate::model::validate_instance;
    use proptest::prelude::*;

    #[test]
    fn planted_weights_closed_form() {
        let (wp, wm) = planted_weights(0.3, 0.9).unwrap();
        assert!((wp - 3f64.ln()).abs() < 1e-12 && (wp - 1.0986).abs() < 1e-4);
        assert!((wm - (9.0f64 / 7.0).ln()).abs() < 1e-12 && (wm - 0.2513).abs() < 1e-4);
        let (wp, wm) = planted_weights(0.9, 0.9).unwrap();
        assert!((wp - 9f64.ln()).abs() < 1e-12 && (wm - wp).abs() < 1e-12);
    }

    #[test]
    fn planted_rejects_weak_classifier() {
        let err = planted_weights(0.4, 0.5).unwrap_err().to_string();
        assert!(err.contains("p_plus + q_minus > 1"), "{err}");
        assert!(planted_weights(1.0, 0.5).is_err());
        assert!(planted_weights(0.5, 1.0).is_err());
    }

    #[test]
    fn planted_instance_is_valid() {
        for (p, q) in [(0.3, 0.9), (0.9, 0.3), (0.9, 0.9)] {
            let params = PlantedParams { sizes: vec![5, 5], p_plus: p, q_minus: q, seed: 7 };
            let (inst, truth) = planted_instance(&params).unwrap();
            assert_eq!(inst.pairs().count(), 45);
            assert!(validate_instance(&inst).is_valid(), "p={p} q={q}");
            assert_eq!(truth.num_clusters(), 2);
            let (inst2, _) = planted_instance(&params).unwrap();
            assert_eq!(inst, inst2);
        }
        let (inst, _) = planted_instance(&PlantedParams { sizes: vec![3], p_plus: 0.3, q_minus: 0.9, seed: 1 }).unwrap();
        assert!((inst.alpha() - (9.0f64 / 7.0).ln() / 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn gap_on_k4() {
        let g = gap_instance(&GapParams { n: 4, alpha: 0.5, bipartite: false, seed: 3 }).unwrap();
        assert_eq!(g.edges.len(), 6);
        assert!((g.epsilon - 2.0 / (4f64.ln() / 3f64.ln())).abs() < 1e-12);
        for u in 0..4 {
            for v in u + 1..4 {
                assert_eq!(g.x.get(u, v), 1.0);
                assert_eq!(g.instance.sign(u, v), Sign::Positive);
            }
        }
    }

    #[test]
    fn gap_graphs_are_cubic_simple_connected() {
        for (n, bipartite) in [(20, false), (50, false), (20, true), (64, true)] {
            let g = gap_instance(&GapParams { n, alpha: 0.1, bipartite, seed: 11 }).unwrap();
            let mut deg = vec![0; n];
            for &(u, v) in &g.edges {
                assert!(u < v);
                deg[u] += 1;
                deg[v] += 1;
                if bipartite {
                    assert!(u < n / 2 && v >= n / 2);
                }
            }
            assert!(deg.iter().all(|&d| d == 3));
            let uniq: HashSet<_> = g.edges.iter().collect();
            assert_eq!(uniq.len(), g.edges.len());
            assert!(bfs(&adjacency(n, &g.edges), 0).iter().all(|&d| d != usize::MAX));
            assert!(check_metric_feasibility(&g.x, 1e-12).passed);
            assert!(validate_instance(&g.instance).is_valid());
            let pos = g.instance.pairs().filter(|p| p.2 == Sign::Positive).count();
            assert_eq!(pos, 3 * n / 2);
        }
    }

    #[test]
    fn gap_rejects_bad_sizes() {
        for (n, bip) in [(5, false), (2, false), (4, true)] {
            assert!(gap_instance(&GapParams { n, alpha: 0.1, bipartite: bip, seed: 0 }).is_err());
        }
        assert!(gap_instance(&GapParams { n: 10, alpha: 1.0, bipartite: false, seed: 0 }).is_err());
    }

    #[test]
    fn suggested_sizes() {
        assert_eq!(suggested_gap_n(0.1).unwrap(), 20);
        assert_eq!(suggested_gap_n(0.5).unwrap(), 10);
        assert!(suggested_gap_n(0.7).is_err());
    }

    #[test]
    fn random_instance_densities() {
        let all_pos = random_instance(6, 0.3, 1.0, 1).unwrap();
        assert!(all_pos.pairs().all(|p| p.2 == Sign::Positive));
        let all_neg = random_instance(6, 0.3, 0.0, 1).unwrap();
        assert!(all_neg.pairs().all(|p| p.2 == Sign::Negative));
        assert!(random_instance(1, 0.3, 0.5, 1).is_err());
    }

    #[test]
    fn two_weight_profile_matches() {
        let inst = two_weight_instance(8, 2.0, 0.5, 0.5, 4).unwrap();
        assert_eq!(inst.w_scale(), 2.0);
        assert_eq!(inst.alpha(), 0.25);
        assert!(validate_instance(&inst).is_valid());
        for (_, _, s, w) in inst.pairs() {
            assert_eq!(w, if s == Sign::Positive { 2.0 } else { 0.5 });
        }
    }

    proptest! {
        #[test]
        fn suggested_n_is_even_and_large_enough(alpha in 0.001f64..=0.5) {
            let n = suggested_gap_n(alpha).unwrap();
            let l = (1.0 / alpha).ln();
            prop_assert!(n % 2 == 0 && n >= 4);
            prop_assert!(n as f64 >= 1.0 / (alpha * alpha * l * l));
            prop_assert!(n == 4 || ((n - 2) as f64) < 1.0 / (alpha * alpha * l * l));
        }

        #[test]
        fn random_instances_validate(n in 2usize..12, alpha in 0.01f64..=1.0, density in 0.0f64..=1.0, seed in any::<u64>()) {
            let inst = random_instance(n, alpha, density, seed).unwrap();
            prop_assert!(validate_instance(&inst).is_valid());
            prop_assert_eq!(&inst, &random_instance(n, alpha, density, seed).unwrap());
        }

        #[test]
        fn planted_weights_positive(p in 0.01f64..0.99, q in 0.01f64..0.99) {
            prop_assume!(p + q > 1.0 + 1e-9);
            let (wp, wm) = planted_weights(p, q).unwrap();
            prop_assert!(wp > 0.0 && wm > 0.0);
        }
    }
}
