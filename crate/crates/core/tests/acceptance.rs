//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits nonzero if any failed.

use std::time::Instant;

use asymcc::lp::lp_objective;
use asymcc::rounding::{threshold, trial_seed};
use asymcc::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    passed: bool,
    summary: String,
}

fn outcome(passed: bool, summary: String) -> Outcome {
    Outcome { passed, summary }
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn ac1_triple_certification() -> Outcome {
    let mut worst = f64::INFINITY;
    let mut ok = true;
    for alpha in [0.001, 0.01, 0.1, 0.169, 0.3, 0.5, 1.0] {
        let f = RoundingFunction::for_alpha(alpha, Mode::Complete).unwrap();
        let rho = 3.0 + 2.0 * (1.0 / alpha).ln();
        let t = Instant::now();
        let rep = certify_grid(alpha, &f, rho, 0.005, Mode::Complete).unwrap();
        println!(
            "    alpha {alpha:<6} rho {rho:.4} min margin {:.3e} triangles {} ({:.1}s)",
            rep.min_margin,
            rep.triangles_checked,
            t.elapsed().as_secs_f64()
        );
        ok &= rep.min_margin >= -1e-9;
        worst = worst.min(rep.min_margin);
    }
    outcome(ok, format!("complete-graph certification, worst min margin {worst:.3e} (need >= -1e-9)"))
}

fn ac2_bipartite_certification() -> Outcome {
    let mut worst = f64::INFINITY;
    let mut ok = true;
    for alpha in [0.01, 0.1, 0.5] {
        let f = RoundingFunction::for_alpha(alpha, Mode::Bipartite).unwrap();
        let rho = 5.0 + 2.0 * (1.0 / alpha).ln();
        let rep = certify_grid(alpha, &f, rho, 0.005, Mode::Bipartite).unwrap();
        println!("    alpha {alpha:<6} rho {rho:.4} min margin {:.3e}", rep.min_margin);
        ok &= rep.min_margin >= -1e-9;
        worst = worst.min(rep.min_margin);
    }
    outcome(ok, format!("bipartite certification, worst min margin {worst:.3e} (need >= -1e-9)"))
}

fn ac3_optimal_factor_values() -> Outcome {
    // alpha, lower, upper: reference values +- 0.2, and [3, 3.05] at alpha = 1
    let targets = [(1.0, 3.0, 3.05), (0.2, 4.12, 4.52), (0.1, 4.43, 4.83), (0.01, 6.58, 6.98)];
    let mut ok = true;
    let mut found = Vec::new();
    for (alpha, lo, hi) in targets {
        let t = Instant::now();
        match compute_a_opt(alpha, 0.005, 1e-3) {
            Ok(r) => {
                let secs = t.elapsed().as_secs_f64();
                let good = r.a_opt >= lo && r.a_opt <= hi && r.a_opt <= r.a_thm + 1e-3 && secs <= 600.0;
                println!(
                    "    alpha {alpha:<5} A_opt {:.4} in [{lo}, {hi}]: {good}; A_thm {:.3}; grid margin {:.2e}; queries {} ({secs:.1}s)",
                    r.a_opt, r.a_thm, r.margin, r.queries
                );
                ok &= good;
                found.push(format!("{:.3}", r.a_opt));
            }
            Err(e) => {
                println!("    alpha {alpha}: {e}");
                ok = false;
                found.push("err".into());
            }
        }
    }
    outcome(ok, format!("A_opt at alpha 1, 0.2, 0.1, 0.01 = {}", found.join(", ")))
}

fn ac4_oracle_sandwich() -> Outcome {
    let t = Instant::now();
    let mut ok = true;
    let mut worst_gap = f64::NEG_INFINITY;
    let mut worst_excess = f64::NEG_INFINITY;
    for i in 0..200u64 {
        let alpha = if i % 2 == 0 { 0.05 } else { 0.5 };
        let inst = random_instance(8, alpha, 0.5, 1000 + i).unwrap();
        let sol = solve_metric_lp(&inst, &LpOptions::default()).unwrap();
        let opt = exact_opt(&inst, 13).unwrap().opt_cost;
        worst_gap = worst_gap.max(sol.objective - opt);
        ok &= sol.objective <= opt + 1e-6;
        let f = RoundingFunction::for_alpha(alpha, Mode::Complete).unwrap();
        let costs: Vec<f64> = (0..50)
            .map(|k| {
                let out = pivot_round(&sol.x, &f, trial_seed(i, k));
                disagreement_cost(&inst, &out.clustering).unwrap()
            })
            .collect();
        let (mean, se) = mean_se(&costs);
        let bound = f.a() * sol.objective + 3.0 * se;
        worst_excess = worst_excess.max(mean - bound);
        ok &= mean <= bound + 1e-12;
    }
    let secs = t.elapsed().as_secs_f64();
    ok &= secs <= 300.0;
    outcome(
        ok,
        format!(
            "200 instances: max(LP - OPT) {worst_gap:.2e}, max(mean ALG - A*LP - 3se) {worst_excess:.3} ({secs:.1}s)"
        ),
    )
}

/// One pivot step simulated directly: realized ALG and LP charge.
fn simulate_step(inst: &Instance, x: &EdgeLengths, f: &RoundingFunction, active: &[usize], rng: &mut ChaCha8Rng) -> (f64, f64) {
    let p = active[rng.random_range(0..active.len())];
    let r: f64 = rng.random();
    let in_s: Vec<bool> = active.iter().map(|&u| u == p || f.eval(x.get(p, u)) <= r).collect();
    let (mut alg, mut lp) = (0.0, 0.0);
    for a in 0..active.len() {
        for b in a + 1..active.len() {
            let (u, v) = (active[a], active[b]);
            if !(in_s[a] || in_s[b]) {
                continue;
            }
            let w = inst.weight(u, v);
            match inst.sign(u, v) {
                Sign::Negative => {
                    lp += w * (1.0 - x.get(u, v));
                    if in_s[a] && in_s[b] {
                        alg += w;
                    }
                }
                _ => {
                    lp += w * x.get(u, v);
                    if in_s[a] != in_s[b] {
                        alg += w;
                    }
                }
            }
        }
    }
    (alg, lp)
}

fn ac5_step_charging() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut ok = true;
    let mut worst_charge = f64::NEG_INFINITY;
    let mut worst_z: f64 = 0.0;
    let sims = 100_000;
    for state in 0..100u64 {
        let alpha = if state % 2 == 0 { rng.random_range(0.005..0.169) } else { rng.random_range(0.17..=1.0) };
        let inst = random_instance(7, alpha, rng.random_range(0.2..0.8), 500 + state).unwrap();
        let x = solve_metric_lp(&inst, &LpOptions::default()).unwrap().x;
        let active: Vec<usize> = loop {
            let s: Vec<usize> = (0..7).filter(|_| rng.random::<bool>()).collect();
            if s.len() >= 2 {
                break s;
            }
        };
        let f = RoundingFunction::for_alpha(alpha, Mode::Complete).unwrap();
        let (e_alg, e_lp) = expected_step_cost(&inst, &x, &f, &active).unwrap();
        worst_charge = worst_charge.max(e_alg - f.a() * e_lp);
        ok &= e_alg <= f.a() * e_lp + 1e-9;

        let mut sim_rng = ChaCha8Rng::seed_from_u64(trial_seed(77, state));
        let (algs, lps): (Vec<f64>, Vec<f64>) = (0..sims).map(|_| simulate_step(&inst, &x, &f, &active, &mut sim_rng)).unzip();
        for (samples, expect) in [(&algs, e_alg), (&lps, e_lp)] {
            let (mean, se) = mean_se(samples);
            let dev = (mean - expect).abs();
            // integral x makes a step nearly deterministic; summation rounding then dominates se
            let floor = 1e-9 * (1.0 + expect.abs());
            ok &= dev <= 4.0 * se + floor;
            if se > floor {
                worst_z = worst_z.max(dev / se);
            }
        }
    }
    outcome(
        ok,
        format!("100 states: max(E_ALG - A*E_LP) {worst_charge:.3e}, worst Monte Carlo deviation {worst_z:.2} se"),
    )
}

fn ac6_gap_construction() -> Outcome {
    let (n, alpha) = (2000usize, 0.01);
    let t = Instant::now();
    let g = gap_instance(&GapParams { n, alpha, bipartite: false, seed: 2000 }).unwrap();
    let feas = check_metric_feasibility(&g.x, 1e-12);
    let lp = lp_objective(&g.instance, &g.x).unwrap();
    let log3n = (n as f64).ln() / 3f64.ln();
    let bound = 3.0 * n as f64 / log3n + alpha * (n as f64).powf(1.5);
    let f = RoundingFunction::for_alpha(alpha, Mode::Complete).unwrap();
    let best = (0..20)
        .map(|k| disagreement_cost(&g.instance, &pivot_round(&g.x, &f, trial_seed(6, k)).clustering).unwrap())
        .fold(f64::INFINITY, f64::min);
    let ratio = best / lp;
    let ok = feas.max_violation() <= 1e-12 && lp <= bound && ratio > 1.0;
    outcome(
        ok,
        format!(
            "n = {n}: violation {:.1e}, LP {lp:.2} <= {bound:.2}, best of 20 roundings {best:.2}, gap ratio {ratio:.3}, graph retries {} ({:.1}s)",
            feas.max_violation(),
            g.retries,
            t.elapsed().as_secs_f64()
        ),
    )
}

fn ac7_rounding_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut ok = true;
    for _ in 0..50 {
        let alpha: f64 = 1.0 - rng.random::<f64>(); // (0, 1]
        let f = RoundingFunction::for_alpha(alpha, Mode::Complete).unwrap();
        ok &= f.eval(0.0) == 0.0;
        let grid: Vec<f64> = (0..10_000).map(|k| k as f64 / 9_999.0).collect();
        ok &= grid.windows(2).all(|w| f.eval(w[0]) <= f.eval(w[1]));
        let tau = threshold(f.a());
        ok &= grid.iter().filter(|&&x| x >= tau + 1e-12).all(|&x| f.eval(x) == 1.0);
        ok &= f.eval(tau + 1e-12) == 1.0;
    }
    let x = EdgeLengths::from_fn(40, |u, v| ((u * 31 + v * 17) % 23) as f64 / 22.0);
    let f = RoundingFunction::for_alpha(0.2, Mode::Complete).unwrap();
    let deterministic = (0..10).all(|s| pivot_round(&x, &f, s) == pivot_round(&x, &f, s));
    ok &= deterministic;
    outcome(ok, format!("50 random alphas checked on a 10^4-point grid; pivot_round repeatable: {deterministic}"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 7] = [
        ("AC1", ac1_triple_certification),
        ("AC2", ac2_bipartite_certification),
        ("AC3", ac3_optimal_factor_values),
        ("AC4", ac4_oracle_sandwich),
        ("AC5", ac5_step_charging),
        ("AC6", ac6_gap_construction),
        ("AC7", ac7_rounding_properties),
    ];
    let mut failed = 0;
    let mut lines = Vec::new();
    for (name, run) in criteria {
        println!("{name} running");
        let o = run();
        let line = format!("{name} {} {}", if o.passed { "PASS" } else { "FAIL" }, o.summary);
        println!("{line}");
        lines.push(line);
        failed += usize::from(!o.passed);
    }
    println!("\nacceptance summary");
    for l in &lines {
        println!("{l}");
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
