use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use asymcc::io::{instance_to_string, read_instance, write_solution};
use asymcc::lp::lp_objective;
use asymcc::rounding::{threshold, trial_seed};
use asymcc::triple::{certify_grid_with, CertOptions};
use asymcc::{
    approximation_factor, check_metric_feasibility, compute_a_opt, disagreement_cost, exact, exact_opt, gap_instance, normalize,
    pivot_round, planted_instance, random_instance, solve_metric_lp, suggested_gap_n, two_weight_instance, validate_instance,
    Clustering, GapParams, LpMode, LpOptions, MetricSolution, Mode, PlantedParams, RoundingFunction, SolverStats,
};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::{BenchArgs, CertifyArgs, Failure, GenCommand, OptfArgs, SolveArgs, SCHEMA_VERSION};

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn report_text<T: Serialize>(command: &str, config: &T, body: serde_json::Value) -> String {
    let mut doc = json!({
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "config": config,
    });
    if let (Some(d), serde_json::Value::Object(b)) = (doc.as_object_mut(), body) {
        d.extend(b);
    }
    let mut s = serde_json::to_string_pretty(&doc).expect("report serializes");
    s.push('\n');
    s
}

fn open(path: &Path) -> Result<BufReader<File>, Failure> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

/// `None` when the denominator is zero.
fn ratio(num: f64, den: f64) -> Option<f64> {
    (den > 0.0).then(|| num / den)
}

pub fn solve(args: &SolveArgs) -> Result<(), Failure> {
    if args.trials == 0 {
        return Err(Failure::Input("--trials must be at least 1".into()));
    }
    let inst = read_instance(open(&args.input)?)?;
    let inst = inst.clone().with_profile(args.alpha.unwrap_or(inst.alpha()), args.w.unwrap_or(inst.w_scale()));
    let check = validate_instance(&inst);
    if !check.is_valid() {
        let mut msg = format!("instance fails validation: {} weight(s) outside the band", check.violations.len());
        for e in &check.profile_errors {
            msg.push_str("; ");
            msg.push_str(e);
        }
        return Err(Failure::Input(msg));
    }
    let w = inst.w_scale();
    let norm = normalize(&inst)?;
    let mode = args.mode.unwrap_or(if inst.is_bipartite() { Mode::Bipartite } else { Mode::Complete });
    let f = RoundingFunction::for_alpha(inst.alpha(), mode)?;
    let opts = LpOptions::with_mode(if args.full_lp { LpMode::Full } else { LpMode::LazySeparation });
    let sol = solve_metric_lp(&norm, &opts)?;

    let trials: Vec<(u64, f64, Clustering)> = (0..args.trials)
        .into_par_iter()
        .map(|k| {
            let seed = trial_seed(args.seed, k);
            let c = pivot_round(&sol.x, &f, seed).clustering;
            let cost = disagreement_cost(&inst, &c).expect("sizes match");
            (seed, cost, c)
        })
        .collect();
    let costs: Vec<f64> = trials.iter().map(|t| t.1).collect();
    let best_i = (0..costs.len()).fold(0, |b, i| if costs[i] < costs[b] { i } else { b });
    let best = costs[best_i];
    let worst = costs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mean = costs.iter().sum::<f64>() / costs.len() as f64;
    let lp = sol.objective * w;

    let exact = if args.exact {
        let r = exact_opt(&inst, exact::DEFAULT_N_CAP)?;
        Some(json!({
            "opt_cost": r.opt_cost,
            "clustering": r.opt_clustering.canonical().labels(),
            "partitions_enumerated": r.partitions_enumerated,
        }))
    } else {
        None
    };

    let body = json!({
        "n": inst.n(),
        "alpha": inst.alpha(),
        "w_scale": w,
        "mode": mode,
        "A_thm": f.a(),
        "lp_objective": lp,
        "lp_stats": sol.stats,
        "alg": {
            "best": best,
            "mean": mean,
            "worst": worst,
            "best_ratio": ratio(best, lp),
            "mean_ratio": ratio(mean, lp),
            "worst_ratio": ratio(worst, lp),
        },
        "best_clustering": trials[best_i].2.canonical().labels(),
        "trial_seeds": trials.iter().map(|t| t.0).collect::<Vec<_>>(),
        "trial_costs": costs,
        "exact": exact,
    });
    emit(args.out.as_deref(), &report_text("solve", args, body))
}

/// `x,f` rows; rows at or past the threshold of `a` are dropped.
fn read_f_table(path: &Path, alpha: f64, a: f64) -> Result<RoundingFunction, Failure> {
    let tau = threshold(a);
    let mut pts = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line == "x,f" {
            continue;
        }
        let bad = || Failure::Input(format!("{}:{}: expected `x,f`", path.display(), i + 1));
        let (x, y) = line.split_once(',').ok_or_else(bad)?;
        let x: f64 = x.trim().parse().map_err(|_| bad())?;
        let y: f64 = y.trim().parse().map_err(|_| bad())?;
        if x < tau {
            pts.push((x, y));
        }
    }
    Ok(RoundingFunction::tabulated(alpha, a, pts)?)
}

pub fn certify(args: &CertifyArgs) -> Result<(), Failure> {
    let rho = match args.rho {
        Some(r) => r,
        None => approximation_factor(args.alpha, args.mode)?,
    };
    let f = match &args.f_table {
        Some(p) => {
            let Some(a) = args.rho else {
                return Err(Failure::Input("--f-table needs --rho (the factor the table was built for)".into()));
            };
            read_f_table(p, args.alpha, a)?
        }
        None => RoundingFunction::for_alpha(args.alpha, args.mode)?,
    };
    let opts = CertOptions { refine: !args.no_refine, ..CertOptions::default() };
    let rep = certify_grid_with(args.alpha, &f, rho, args.step, args.mode, opts)?;
    let body = serde_json::to_value(&rep).expect("report serializes");
    emit(args.out.as_deref(), &report_text("certify", args, body))?;
    if rep.passed {
        Ok(())
    } else {
        eprintln!("certification failed: min margin {:e} below -{:e}", rep.min_margin, rep.eps_cert);
        Err(Failure::Certification)
    }
}

pub fn optf(args: &OptfArgs) -> Result<(), Failure> {
    let r = compute_a_opt(args.alpha, args.step, args.tol)?;
    let body = serde_json::to_value(&r).expect("report serializes");
    emit(args.out.as_deref(), &report_text("optf", args, body))?;
    if let Some(out) = &args.out {
        let csv = out.with_extension("csv");
        r.write_csv(BufWriter::new(File::create(&csv)?))?;
    }
    Ok(())
}

fn sidecar(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".x.csv");
    PathBuf::from(s)
}

pub fn gen(cmd: &GenCommand) -> Result<(), Failure> {
    match cmd {
        GenCommand::Planted(a) => {
            let params = PlantedParams { sizes: a.sizes.clone(), p_plus: a.p, q_minus: a.q, seed: a.seed };
            let (inst, truth) = planted_instance(&params)?;
            let mut text = instance_to_string(&inst);
            let labels: Vec<String> = truth.labels().iter().map(|l| l.to_string()).collect();
            text.push_str(&format!("# truth {}\n", labels.join(" ")));
            emit(a.out.as_deref(), &text)
        }
        GenCommand::Gap(a) => {
            let n = match a.n {
                Some(n) => n,
                None => suggested_gap_n(a.alpha)?,
            };
            let g = gap_instance(&GapParams { n, alpha: a.alpha, bipartite: a.bipartite, seed: a.seed })?;
            let objective = lp_objective(&g.instance, &g.x)?;
            emit(Some(&a.out), &instance_to_string(&g.instance))?;
            let sol = MetricSolution {
                objective,
                stats: SolverStats { max_violation: check_metric_feasibility(&g.x, 0.0).max_violation(), ..Default::default() },
                x: g.x,
            };
            write_solution(&sol, BufWriter::new(File::create(sidecar(&a.out))?))?;
            let body = json!({
                "n": n,
                "epsilon": g.epsilon,
                "graph_retries": g.retries,
                "edges": g.edges.len(),
                "lp_objective": objective,
                "sidecar": sidecar(&a.out),
            });
            emit(None, &report_text("gen gap", a, body))
        }
        GenCommand::Random(a) => {
            let inst = random_instance(a.n, a.alpha, a.density, a.seed)?;
            emit(a.out.as_deref(), &instance_to_string(&inst))
        }
        GenCommand::TwoWeight(a) => {
            let inst = two_weight_instance(a.n, a.w, a.w_minus, a.density, a.seed)?;
            emit(a.out.as_deref(), &instance_to_string(&inst))
        }
    }
}

struct BenchRow {
    alpha: f64,
    n: usize,
    instances: u64,
    trials: u64,
    a_thm: f64,
    mean_lp: f64,
    mean_alg: f64,
    mean_ratio: f64,
    max_ratio: f64,
    /// Instances skipped in the ratio columns because the LP value was zero.
    zero_lp: u64,
}

pub fn bench(args: &BenchArgs) -> Result<(), Failure> {
    if args.instances == 0 || args.trials == 0 {
        return Err(Failure::Input("--instances and --trials must be at least 1".into()));
    }
    let mut csv = String::from("alpha,n,instances,trials,a_thm,mean_lp,mean_alg,mean_ratio,max_ratio,zero_lp\n");
    for (ai, &alpha) in args.alphas.iter().enumerate() {
        let f = RoundingFunction::for_alpha(alpha, Mode::Complete)?;
        for (ni, &n) in args.sizes.iter().enumerate() {
            let cell = ((ai * args.sizes.len() + ni) as u64) << 32;
            let per: Vec<(f64, f64)> = (0..args.instances)
                .into_par_iter()
                .map(|i| -> asymcc::Result<(f64, f64)> {
                    let seed = trial_seed(args.seed, cell + i);
                    let inst = random_instance(n, alpha, args.density, seed)?;
                    let sol = solve_metric_lp(&inst, &LpOptions::default())?;
                    let mut total = 0.0;
                    for k in 0..args.trials {
                        let c = pivot_round(&sol.x, &f, trial_seed(seed, k)).clustering;
                        total += disagreement_cost(&inst, &c)?;
                    }
                    Ok((sol.objective, total / args.trials as f64))
                })
                .collect::<asymcc::Result<_>>()?;
            let m = args.instances as f64;
            let ratios: Vec<f64> = per.iter().filter_map(|&(lp, alg)| ratio(alg, lp)).collect();
            let row = BenchRow {
                alpha,
                n,
                instances: args.instances,
                trials: args.trials,
                a_thm: f.a(),
                mean_lp: per.iter().map(|p| p.0).sum::<f64>() / m,
                mean_alg: per.iter().map(|p| p.1).sum::<f64>() / m,
                mean_ratio: if ratios.is_empty() { f64::NAN } else { ratios.iter().sum::<f64>() / ratios.len() as f64 },
                max_ratio: ratios.iter().cloned().fold(f64::NAN, f64::max),
                zero_lp: (per.len() - ratios.len()) as u64,
            };
            csv.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                row.alpha, row.n, row.instances, row.trials, row.a_thm, row.mean_lp, row.mean_alg, row.mean_ratio, row.max_ratio, row.zero_lp
            ));
        }
    }
    emit(args.out.as_deref(), &csv)
}
