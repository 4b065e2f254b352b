use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use migplan_core::fpta::SolverConfig;
use migplan_core::gen::{oracle_star, rng};
use migplan_core::oracle::{bound_report, BoundReport, Check};
use migplan_core::scenario::{self, Overrides, Scenario, ScenarioSpec, TopologyRef};
use migplan_core::sim::{PlannerKind, SimulationResult};
use rand::Rng;
use serde::Serialize;
use serde_json::json;

use crate::manifest::RunManifest;
use crate::{CliError, GlobalArgs};

/// A scenario document with its digests recorded.
struct Loaded {
    spec: ScenarioSpec,
    base: Option<PathBuf>,
    manifest_inputs: Vec<(PathBuf, Vec<u8>)>,
}

fn load(path: &Path) -> Result<Loaded, CliError> {
    let bytes = fs::read(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|_| CliError::Input(format!("{} is not UTF-8", path.display())))?;
    let spec = ScenarioSpec::from_json(&text)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let base = path.parent().map(Path::to_path_buf);
    let mut manifest_inputs = vec![(path.to_path_buf(), bytes)];
    if let TopologyRef::Named(name) = &spec.topology {
        if !name.starts_with("builtin:") {
            let topo = base
                .as_deref()
                .map_or_else(|| PathBuf::from(name), |b| b.join(name));
            if let Ok(b) = fs::read(&topo) {
                manifest_inputs.push((topo, b));
            }
        }
    }
    Ok(Loaded {
        spec,
        base,
        manifest_inputs,
    })
}

fn overrides(g: &GlobalArgs, planner: Option<PlannerKind>) -> Overrides {
    Overrides {
        epsilon: g.epsilon,
        theta: g.theta,
        seed: g.seed,
        planner,
    }
}

fn resolve(loaded: &Loaded, o: &Overrides) -> Result<Scenario, CliError> {
    loaded
        .spec
        .resolve(loaded.base.as_deref(), o)
        .map_err(|e| CliError::Input(e.to_string()))
}

fn manifest(
    command: &str,
    loaded: Option<&Loaded>,
    seed: u64,
    config: serde_json::Value,
) -> RunManifest {
    let mut m = RunManifest::new(command, seed, config);
    if let Some(l) = loaded {
        for (p, b) in &l.manifest_inputs {
            m.add_input(p, b);
        }
    }
    m
}

fn scenario_config(s: &Scenario) -> serde_json::Value {
    json!({
        "planner": s.planner,
        "epsilon": s.config.epsilon,
        "theta": s.config.theta,
        "v_thd_bytes": s.params.v_thd,
        "t_r_s": s.params.t_r,
        "requests": s.requests.len(),
    })
}

/// Writes every file or none: all contents are rendered before this runs.
fn emit(g: &GlobalArgs, files: &[(&str, String)], stdout: &str) -> Result<(), CliError> {
    let Some(dir) = &g.output_dir else {
        print!("{stdout}");
        return Ok(());
    };
    let io = |e: std::io::Error| CliError::Input(format!("cannot write to {}: {e}", dir.display()));
    fs::create_dir_all(dir).map_err(io)?;
    for (name, body) in files {
        fs::write(dir.join(name), body).map_err(io)?;
    }
    Ok(())
}

fn to_json(value: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("output serializes");
    s.push('\n');
    s
}

fn csv_text(
    manifest: &RunManifest,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    let body = String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is UTF-8");
    manifest.csv_header() + &body
}

#[derive(Serialize)]
struct PlanPath {
    links: Vec<String>,
    nodes: String,
    flow_bps: f64,
}

#[derive(Serialize)]
struct PlanEntry {
    id: String,
    started: bool,
    bandwidth_bps: f64,
    paths: Vec<PlanPath>,
}

pub fn plan(g: &GlobalArgs, path: &Path) -> Result<(), CliError> {
    let loaded = load(path)?;
    let s = resolve(&loaded, &overrides(g, None))?;
    let plan = s.plan().map_err(|e| CliError::Input(e.to_string()))?;
    let migrations: Vec<PlanEntry> = s
        .requests
        .iter()
        .enumerate()
        .map(|(k, r)| PlanEntry {
            id: r.id.clone(),
            started: plan.started[k],
            bandwidth_bps: plan.bandwidth[k],
            paths: plan.flows[k]
                .iter()
                .map(|(p, f)| PlanPath {
                    links: p
                        .links()
                        .iter()
                        .map(|l| s.topology.link(*l).name.clone())
                        .collect(),
                    nodes: s.topology.path_display(p),
                    flow_bps: *f,
                })
                .collect(),
        })
        .collect();
    let doc = json!({
        "manifest": manifest("plan", Some(&loaded), s.seed, scenario_config(&s)),
        "w_bps": plan.throughput,
        "f_bps": plan.net_rate,
        "stats": plan.stats,
        "migrations": migrations,
    });
    let text = to_json(&doc);
    emit(g, &[("plan.json", text.clone())], &text)
}

fn summary(m: &RunManifest, s: &Scenario, r: &SimulationResult) -> serde_json::Value {
    let migrations: Vec<_> = r
        .migrations
        .iter()
        .map(|o| {
            json!({
                "id": o.id,
                "arrival_s": o.arrival,
                "start_s": o.start,
                "precopy_end_s": o.precopy_end,
                "done_s": o.done,
                "migration_time_s": o.migration_time,
                "downtime_s": o.downtime,
                "final_bandwidth_bps": o.final_bandwidth,
            })
        })
        .collect();
    json!({
        "manifest": m,
        "planner": r.planner,
        "makespan_s": r.makespan,
        "mean_downtime_s": r.mean_downtime(),
        "max_downtime_s": r.max_downtime(),
        "replans": r.replans,
        "net_rate_integral_bytes": r.net_rate_integral(),
        "total_memory_bytes": s.requests.iter().map(|q| q.memory).sum::<f64>(),
        "migrations": migrations,
    })
}

pub fn simulate(g: &GlobalArgs, path: &Path) -> Result<(), CliError> {
    let loaded = load(path)?;
    let s = resolve(&loaded, &overrides(g, g.planner))?;
    let result = s.simulate().map_err(|e| CliError::Input(e.to_string()))?;
    let m = manifest("simulate", Some(&loaded), s.seed, scenario_config(&s));
    let summary = to_json(&summary(&m, &s, &result));
    let events = csv_text(
        &m,
        &["time_s", "event", "id", "bandwidth_bps"],
        result.events.iter().map(|e| {
            vec![
                e.time.to_string(),
                e.kind.name().to_string(),
                e.id.clone(),
                e.bandwidth.to_string(),
            ]
        }),
    );
    let curve = csv_text(
        &m,
        &["t_start_s", "t_end_s", "net_rate_bps"],
        result.curve.iter().map(|c| {
            vec![
                c.t_start.to_string(),
                c.t_end.to_string(),
                c.net_rate.to_string(),
            ]
        }),
    );
    emit(
        g,
        &[
            ("summary.json", summary.clone()),
            ("events.csv", events),
            ("net_rate.csv", curve),
        ],
        &summary,
    )
}

pub fn compare(
    g: &GlobalArgs,
    path: &Path,
    planners: &[PlannerKind],
    seeds: u64,
) -> Result<(), CliError> {
    if planners.is_empty() {
        return Err(CliError::Usage("--planners needs at least one name".into()));
    }
    let loaded = load(path)?;
    let first = g.seed.or(loaded.spec.seed).unwrap_or(0);
    let seed_list: Vec<u64> = (0..seeds).map(|i| first.wrapping_add(i)).collect();
    let o = overrides(g, None);
    let rows = scenario::compare(
        &loaded.spec,
        loaded.base.as_deref(),
        &o,
        planners,
        &seed_list,
    )
    .map_err(|e| CliError::Input(e.to_string()))?;
    let probe = resolve(
        &loaded,
        &Overrides {
            seed: Some(first),
            ..o
        },
    )?;
    let config = json!({
        "planners": planners,
        "seeds": seeds,
        "epsilon": probe.config.epsilon,
        "theta": probe.config.theta,
        "v_thd_bytes": probe.params.v_thd,
        "t_r_s": probe.params.t_r,
    });
    let m = manifest("compare", Some(&loaded), first, config);
    let text = csv_text(
        &m,
        &[
            "planner",
            "seed",
            "makespan_s",
            "mean_downtime_s",
            "max_downtime_s",
            "plan_compute_s",
        ],
        rows.iter().map(|r| {
            vec![
                r.planner.to_string(),
                r.seed.to_string(),
                r.makespan_s.to_string(),
                r.mean_downtime_s.to_string(),
                r.max_downtime_s.to_string(),
                format!("{:.6}", r.plan_compute_s),
            ]
        }),
    );
    emit(g, &[("compare.csv", text.clone())], &text)
}

fn check(c: Check) -> &'static str {
    match c {
        Check::Pass => "pass",
        Check::Fail => "FAIL",
        Check::NotApplicable => "n/a",
    }
}

pub fn oracle_check(g: &GlobalArgs, instances: usize, eta_max: f64) -> Result<(), CliError> {
    if !(eta_max > 0.0 && eta_max.is_finite()) {
        return Err(CliError::Usage(format!(
            "--eta-max must be positive, got {eta_max}"
        )));
    }
    let defaults = SolverConfig::default();
    let config = SolverConfig::new(
        g.epsilon.unwrap_or(defaults.epsilon),
        g.theta.unwrap_or(defaults.theta),
    )
    .map_err(|e| CliError::Usage(e.to_string()))?;
    let seed = g.seed.unwrap_or(0);
    let mut seeds = rng(seed);
    let started = Instant::now();
    let mut reports: Vec<BoundReport> = Vec::with_capacity(instances);
    for _ in 0..instances {
        let (t, reqs) = oracle_star(eta_max, seeds.gen());
        reports.push(bound_report(&t, &reqs, &config).map_err(|e| CliError::Input(e.to_string()))?);
    }
    let failed = reports.iter().filter(|r| r.failed()).count();
    let header = [
        "instance",
        "u_bps",
        "v_bps",
        "w_bps",
        "f_bps",
        "n_star",
        "eta",
        "sigma",
        "throughput_bound",
        "support_bound",
        "net_rate_bound",
        "consistency",
    ];
    let rows: Vec<Vec<String>> = reports
        .iter()
        .enumerate()
        .map(|(i, r)| {
            vec![
                i.to_string(),
                format!("{:.1}", r.u),
                format!("{:.1}", r.v),
                format!("{:.1}", r.w),
                format!("{:.1}", r.f),
                r.n_star.to_string(),
                format!("{:.4}", r.eta),
                format!("{:.4}", r.sigma),
                check(r.throughput_bound).into(),
                check(r.support_bound).into(),
                check(r.net_rate_bound).into(),
                check(r.consistency).into(),
            ]
        })
        .collect();
    let m = manifest(
        "oracle-check",
        None,
        seed,
        json!({"instances": instances, "eta_max": eta_max, "epsilon": config.epsilon, "theta": config.theta}),
    );
    let mut table = String::new();
    let widths: Vec<usize> = (0..header.len())
        .map(|c| {
            rows.iter()
                .map(|r| r[c].len())
                .chain([header[c].len()])
                .max()
                .unwrap_or(0)
        })
        .collect();
    let line = |cells: Vec<&str>| {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:>w$}"))
            .collect();
        padded.join("  ") + "\n"
    };
    table += &line(header.to_vec());
    for r in &rows {
        table += &line(r.iter().map(String::as_str).collect());
    }
    table += &format!(
        "{} instances, {} failed, {:.2}s\n",
        instances,
        failed,
        started.elapsed().as_secs_f64()
    );
    let csv = csv_text(&m, &header, rows.clone());
    emit(g, &[("oracle_check.csv", csv)], &table)?;
    if g.output_dir.is_some() {
        eprint!(
            "{}",
            table
                .lines()
                .last()
                .map(|l| format!("{l}\n"))
                .unwrap_or_default()
        );
    }
    if failed > 0 {
        return Err(CliError::Check(format!(
            "{failed} of {instances} instances violate a bound"
        )));
    }
    Ok(())
}
