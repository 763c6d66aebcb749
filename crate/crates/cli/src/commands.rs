use std::fs;
use std::path::Path;

use serde_json::{json, Map, Value};

use ldpcl::construction::{
    capacity_sequence, construct_joint, tornado_pair, JointFamily, RegularFamily, TornadoFamily, DEFAULT_TRUNCATION_TOL,
};
use ldpcl::density_evolution::{local_threshold, run_2d_de, DeOptions};
use ldpcl::ensembles::{LdpclEnsemble, LocalEnsemble, LocalFile};
use ldpcl::finite_length::{bound_csv, eps_range, ldpc_union_bound_with, ml_union_bound_with, ATable, MlOptions, MlParams};
use ldpcl::lp::{alternate_optimize, LpDesignParams};
use ldpcl::numfmt::{fmt12, round12};
use ldpcl::reproduce::{reproduce, run_criterion, ReproduceOptions};
use ldpcl::scheduler::{eta_policy, n_ji_ideal, run_schedule, ScheduleResult, SchedulePolicy};
use ldpcl::simulator::{mc_csv, monte_carlo, GraphSource, McConfig, McMode, DEFAULT_DECODE_ITERS};
use ldpcl::threshold::{find_fixed_points, global_threshold, threshold_by_bisection};

use crate::args::*;
use crate::CliError;

/// Files of one run, written together once the computation succeeded.
struct Artifacts(Vec<(String, String)>);

impl Artifacts {
    fn new() -> Self {
        Self(Vec::new())
    }

    fn add(&mut self, name: &str, contents: String) {
        self.0.push((name.to_string(), contents));
    }

    fn add_json(&mut self, name: &str, value: &Value) {
        self.add(name, pretty(value));
    }
}

fn pretty(value: &Value) -> String {
    let mut text = serde_json::to_string_pretty(&round_floats(value.clone())).expect("json serializes");
    text.push('\n');
    text
}

/// Rounds every float to 12 significant digits.
fn round_floats(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => json!(round12(n.as_f64().unwrap_or(f64::NAN))),
        Value::Array(items) => Value::Array(items.into_iter().map(round_floats).collect()),
        Value::Object(map) => Value::Object(map.into_iter().map(|(k, v)| (k, round_floats(v))).collect()),
        other => other,
    }
}

fn config_error(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let out = &cli.global.out;
    let mut artifacts = Artifacts::new();
    let outcome = match &cli.command {
        Command::Threshold(a) => threshold(a, &mut artifacts),
        Command::Construct(a) => construct(a, &mut artifacts),
        Command::LpDesign(a) => lp_design(a, &mut artifacts),
        Command::Schedule(a) => schedule(a, &mut artifacts),
        Command::Mlbound(a) => mlbound(a, out, &mut artifacts),
        Command::Simulate(a) => simulate(a, cli.global.seed, &mut artifacts),
        Command::DeTrace(a) => de_trace(a, &mut artifacts),
        Command::Reproduce(a) => reproduce_cmd(a, &cli.global, &mut artifacts),
    };
    if let Err(e @ (CliError::Config(_) | CliError::Compute(_))) = outcome {
        return Err(e);
    }
    write_all(cli, out, &artifacts)?;
    outcome
}

fn write_all(cli: &Cli, out: &Path, artifacts: &Artifacts) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Compute(format!("writing {}: {e}", out.display()));
    fs::create_dir_all(out).map_err(io)?;
    for (name, contents) in &artifacts.0 {
        fs::write(out.join(name), contents).map_err(io)?;
    }
    let mut config = Map::new();
    config.insert("subcommand".into(), json!(cli.command.name()));
    for part in [
        serde_json::to_value(&cli.global).expect("flags serialize"),
        serde_json::to_value(&cli.command).expect("flags serialize"),
    ] {
        if let Value::Object(map) = part {
            config.extend(map);
        }
    }
    let manifest = json!({
        "tool": "ldpcl",
        "version": env!("CARGO_PKG_VERSION"),
        "subcommand": cli.command.name(),
        "seed": cli.global.seed,
        "rng": "ChaCha8 (rand_chacha), seeded with the run seed, stream = trial index",
        "threads": cli.global.threads.unwrap_or_else(rayon::current_num_threads),
        "config": Value::Object(config),
        "artifacts": artifacts.0.iter().map(|(n, _)| n.as_str()).collect::<Vec<_>>(),
    });
    fs::write(out.join("manifest.json"), pretty(&manifest)).map_err(io)?;
    Ok(())
}

fn parse_degrees<const K: usize>(text: &str, what: &str) -> Result<[u32; K], CliError> {
    let parts: Vec<u32> = text
        .split(':')
        .map(|t| t.trim().parse::<u32>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::Config(format!("{what}: expected {K} integers separated by ':', got '{text}'")))?;
    parts
        .try_into()
        .map_err(|_| CliError::Config(format!("{what}: expected {K} integers separated by ':', got '{text}'")))
}

fn parse_range(text: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<f64> = text
        .split(':')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::Config(format!("expected a:b:step, got '{text}'")))?;
    match parts[..] {
        [a, b, step] => Ok(eps_range(a, b, step)?),
        [a] => Ok(vec![a]),
        _ => Err(CliError::Config(format!("expected a:b:step, got '{text}'"))),
    }
}

fn load_ensemble(source: &SourceArgs, size: Option<&SizeArgs>) -> Result<LdpclEnsemble, CliError> {
    let m = size.and_then(|s| s.m_blocks);
    let n = size.and_then(|s| s.n_sub);
    let mut e = match (&source.ensemble, &source.regular) {
        (Some(path), None) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            LdpclEnsemble::from_json(&text)?
        }
        (None, Some(text)) => {
            let [l_l, r_l, l_j, r_j] = parse_degrees::<4>(text, "--regular")?;
            LdpclEnsemble::regular(m.unwrap_or(1), n.unwrap_or(1), l_l, r_l, l_j, r_j)?
        }
        _ => return Err(config_error("give exactly one of --ensemble and --regular")),
    };
    if let Some(m) = m.filter(|&m| m > 0) {
        e.m_blocks = m;
    }
    if let Some(n) = n.filter(|&n| n > 0) {
        e.n_sub = n;
    }
    if m == Some(0) || n == Some(0) {
        return Err(config_error("--M and --n must be positive"));
    }
    Ok(e)
}

fn threshold(a: &ThresholdArgs, art: &mut Artifacts) -> Result<(), CliError> {
    if !(a.tol > 0.0) {
        return Err(config_error("--tol must be positive"));
    }
    let e = load_ensemble(&a.source, None)?;
    let report = global_threshold(&e);
    let bisection = (a.method != Method::Formula).then(|| threshold_by_bisection(&e, a.tol));
    let eps_global = match a.method {
        Method::Bisect => bisection.unwrap_or(report.eps_star),
        _ => report.eps_star,
    };
    let at = a.eps.unwrap_or(eps_global);
    let points: Vec<Value> = find_fixed_points(&e, at, 1000)
        .iter()
        .filter(|p| !p.is_trivial())
        .map(|p| json!({"x": p.x, "y": p.y, "kind": p.kind, "residual": p.residual}))
        .collect();
    let mut out = json!({
        "eps_local": local_threshold(&e.local),
        "eps_global": eps_global,
        "method": a.method,
        "branch": report.branch,
        "admissible_set_empty": report.admissible_set_empty,
        "design_rate": e.design_rate(),
        "fixed_points_eps": at,
        "fixed_points": points,
    });
    if a.method == Method::Both {
        out["eps_formula"] = json!(report.eps_star);
        out["eps_bisection"] = json!(bisection);
    }
    print!("{}", pretty(&out));
    art.add_json("threshold.json", &out);
    Ok(())
}

fn construct(a: &ConstructArgs, art: &mut Artifacts) -> Result<(), CliError> {
    if !(0.0 < a.eps_local && a.eps_local < a.eps_global && a.eps_global < 1.0) {
        return Err(config_error("need 0 < --eps-local < --eps-global < 1"));
    }
    let mut result = match a.recipe {
        Recipe::Capacity => {
            if a.family != Family::Tornado {
                return Err(config_error("--recipe capacity uses the Tornado family"));
            }
            capacity_sequence(a.eps_local, a.eps_global, &[(a.dl, a.dj)])?.remove(0)
        }
        Recipe::Stuck => {
            let (lambda, rho) = tornado_pair(a.dl, a.eps_local, DEFAULT_TRUNCATION_TOL)?;
            let local = LocalEnsemble::new(lambda, rho)?;
            let family: Box<dyn JointFamily> = match a.family {
                Family::Tornado => Box::new(TornadoFamily::new(a.dj)),
                Family::Regular => Box::new(RegularFamily::default()),
            };
            construct_joint(&local, a.eps_global, family.as_ref())?
        }
    };
    result.ensemble.m_blocks = a.size.m_blocks.unwrap_or(1).max(1);
    result.ensemble.n_sub = a.size.n_sub.unwrap_or(1).max(1);
    let mut report = result.report_json();
    report["eps_L_achieved"] = json!(result.target_eps_l);
    report["delta_L"] = json!(result.delta_l);
    report["delta_J"] = json!(result.delta_j);
    report["true_gap"] = json!(result.true_gap);
    print!("{}", pretty(&report));
    art.add("ensemble.json", result.ensemble.to_json() + "\n");
    art.add_json("report.json", &report);
    Ok(())
}

fn lp_design(a: &LpDesignArgs, art: &mut Artifacts) -> Result<(), CliError> {
    let grid = parse_range(&a.xs_grid)?;
    let mut params = LpDesignParams::new(a.eps_local, a.eps_global, a.lmax, a.rmax);
    params.grid = a.grid;
    let report = alternate_optimize(&params, &grid)?;
    let best = &report.best;
    let local = LocalFile {
        lambda: best.local.lambda.edge_degrees(),
        rho: best.local.rho.edge_degrees(),
        allow_degree_one: false,
    };
    let local = serde_json::to_value(&local).expect("local ensemble serializes");
    let mut csv = String::from("label,x_s,rate_bound,rounds\n");
    for c in &report.candidates {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            c.label,
            fmt12(c.x_s),
            c.rate_bound.map(fmt12).unwrap_or_default(),
            c.rounds
        ));
    }
    let summary = json!({
        "rate_bound": best.rate_bound,
        "design_rate": best.local.design_rate(),
        "achieved_eps_L": best.achieved_eps_l,
        "achieved_x_s": best.achieved_x_s,
        "x_s_target": best.x_s_target,
        "history": best.history,
        "local": local,
    });
    print!("{}", pretty(&summary));
    art.add_json("local.json", &local);
    art.add("candidates.csv", csv);
    art.add_json("summary.json", &summary);
    Ok(())
}

fn parse_policy(text: &str, eta: f64) -> Result<SchedulePolicy, CliError> {
    Ok(match text {
        "eta" => eta_policy(eta)?,
        "eta-latest" => {
            eta_policy(eta)?;
            SchedulePolicy::EtaLatest(eta)
        }
        other => other.parse()?,
    })
}

fn schedule_summary(r: &ScheduleResult, policy: &str) -> Value {
    json!({
        "policy": policy,
        "epsilon": r.epsilon,
        "eps_L": r.eps_l,
        "n_ji": r.n_ji,
        "valid": r.valid,
        "status": r.status,
        "total_local_iters": r.total_local_iters,
        "final_x": r.final_x,
        "final_y": r.final_y,
        "min_eps_loc": r.min_eps_loc,
    })
}

fn schedule(a: &ScheduleArgs, art: &mut Artifacts) -> Result<(), CliError> {
    let e = load_ensemble(&a.source, None)?;
    let opts = DeOptions {
        max_iters: a.max_iters,
        ..DeOptions::default()
    };
    let (result, label) = if a.policy == "ideal" {
        (n_ji_ideal(&e, a.eps)?, "ideal".to_string())
    } else {
        let policy = parse_policy(&a.policy, a.eta)?;
        (run_schedule(&e, a.eps, &policy, opts)?, policy.to_string())
    };
    let summary = schedule_summary(&result, &label);
    print!("{}", pretty(&summary));
    art.add("schedule.csv", result.to_csv());
    art.add_json("summary.json", &summary);
    Ok(())
}

fn mlbound(a: &MlboundArgs, out: &Path, art: &mut Artifacts) -> Result<(), CliError> {
    let grid = parse_range(&a.eps)?;
    let baseline = a.baseline.as_deref().map(|b| parse_degrees::<2>(b, "--baseline")).transpose()?;
    let params = MlParams {
        m_blocks: a.m_blocks,
        n: a.n,
        l_l: a.l_l,
        r_l: a.r_l,
        l_j: a.l_j,
        r_j: a.r_j,
    };
    let total = a.m_blocks * a.n;
    // validate the shapes before anything touches the cache
    for (l, r, n) in [(a.l_l, a.r_l, a.n), (a.l_j, a.r_j, total)]
        .into_iter()
        .chain(baseline.map(|[l, r]| (l, r, total)))
    {
        if r == 0 || !(n * l as usize).is_multiple_of(r as usize) {
            return Err(config_error(format!("check degree {r} does not divide {n} x {l}")));
        }
    }
    let opts = MlOptions {
        max_ops: a.max_ops,
        ..MlOptions::default()
    };
    let cache = out.join("a_cache");
    let table_l = ATable::load_or_compute(&cache, a.l_l, a.r_l, a.n)?;
    let table_j = ATable::load_or_compute(&cache, a.l_j, a.r_j, total)?;
    let curve = ml_union_bound_with(&params, &grid, &opts, Some((&table_l, &table_j)))?;
    let base = match baseline {
        Some([l, r]) => Some(ldpc_union_bound_with(&ATable::load_or_compute(&cache, l, r, total)?, &grid, true)?),
        None => None,
    };
    let csv = bound_csv(&curve, base.as_ref());
    print!("{csv}");
    art.add("bound.csv", csv);
    Ok(())
}

fn simulate(a: &SimulateArgs, seed: u64, art: &mut Artifacts) -> Result<(), CliError> {
    let grid = parse_range(&a.eps)?;
    let source = match (&a.source.regular, a.size.m_blocks, a.size.n_sub) {
        (Some(text), Some(m_blocks), Some(n_sub)) => GraphSource::Regular {
            m_blocks,
            n_sub,
            degrees: parse_degrees::<4>(text, "--regular")?,
        },
        (Some(_), _, _) => return Err(config_error("--regular needs --M and --n")),
        (None, _, _) => GraphSource::Ensemble(load_ensemble(&a.source, Some(&a.size))?),
    };
    let cfg = McConfig {
        source,
        eps_grid: grid,
        trials: a.trials,
        seed,
        policy: parse_policy(&a.policy, a.eta)?,
        mode: match a.mode {
            Mode::Local => McMode::Local,
            Mode::Global => McMode::Global,
            Mode::Both => McMode::Both,
        },
        max_iters: DEFAULT_DECODE_ITERS,
    };
    let csv = mc_csv(&monte_carlo(&cfg)?);
    print!("{csv}");
    art.add("simulate.csv", csv);
    Ok(())
}

fn de_trace(a: &DeTraceArgs, art: &mut Artifacts) -> Result<(), CliError> {
    if !(0.0..=1.0).contains(&a.eps) {
        return Err(config_error("--eps must lie in [0, 1]"));
    }
    let e = load_ensemble(&a.source, None)?;
    let trace = run_2d_de(
        &e,
        a.eps,
        DeOptions {
            max_iters: a.max_iters,
            halt_tol: a.halt_tol,
        },
    );
    let summary = json!({
        "epsilon": a.eps,
        "status": trace.status,
        "iterations": trace.points.len() - 1,
        "x": trace.x_limit(),
        "y": trace.y_limit(),
    });
    print!("{}", pretty(&summary));
    art.add("trace.csv", trace.to_csv(&e));
    art.add_json("summary.json", &summary);
    Ok(())
}

fn reproduce_cmd(a: &ReproduceArgs, g: &GlobalArgs, art: &mut Artifacts) -> Result<(), CliError> {
    let opts = ReproduceOptions {
        quick: g.quick,
        seed: g.seed,
    };
    let reports = match a.criterion {
        Some(id) => vec![run_criterion(id, &opts)],
        None => reproduce(&opts),
    };
    let mut text = String::new();
    for r in &reports {
        println!("{}", r.line());
        text.push_str(&r.line());
        text.push('\n');
    }
    art.add("reproduce.txt", text);
    art.add_json("reproduce.json", &serde_json::to_value(&reports).expect("reports serialize"));
    match reports.iter().filter(|r| !r.passed()).count() {
        0 => Ok(()),
        n => Err(CliError::CriteriaFailed(n)),
    }
}
