use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};

use nlbranch::criteria::classify;
use nlbranch::montecarlo::{estimate_passage_prob, sweep, sweep_csv, PassageQuery};
use nlbranch::selftest::{run_selftest_with, SelftestOptions};
use nlbranch::simulator::{SimConfig, Simulator};
use nlbranch::RngStream;

use crate::config::{Format, RunConfig};
use crate::grid::parse_grid;
use crate::report::Report;
use crate::{exit, Cli, CliError, Command};

/// Execute one command and write its output; returns the exit code.
pub fn run(cli: &Cli) -> Result<i32, CliError> {
    let start = Instant::now();
    let mut cfg = load_config(cli)?;
    let format = cli
        .format
        .map(Format::from)
        .or(cfg.as_ref().map(|c| c.output.format))
        .unwrap_or_default();
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.as_ref().and_then(|c| c.output.path.clone().map(PathBuf::from)));

    let (name, results, table, code) = match &cli.command {
        Command::Selftest { c_alpha_scale } => {
            let report = run_selftest_with(SelftestOptions {
                c_alpha_scale: *c_alpha_scale,
            });
            let mut table = String::from("check,passed,worst,detail\n");
            let mut w = csv::Writer::from_writer(vec![]);
            for c in &report.checks {
                w.serialize((&c.name, c.passed, c.worst, &c.detail))
                    .expect("in-memory csv");
            }
            table.push_str(&String::from_utf8(w.into_inner().expect("in-memory csv")).unwrap());
            let code = if report.passed { exit::OK } else { exit::SELFTEST };
            ("selftest", to_value(&report), table, code)
        }
        command => {
            let cfg = cfg
                .as_mut()
                .ok_or_else(|| CliError::Config(format!("{} needs --config", command_name(command))))?;
            let (name, results, table) = run_model_command(command, cfg)?;
            (name, results, table, exit::OK)
        }
    };

    let report = Report::new(name, cfg, results, start.elapsed());
    emit(&report, &table, format, out.as_deref())?;
    if code == exit::SELFTEST {
        eprintln!("selftest failed; see report");
    }
    Ok(code)
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Classify => "classify",
        Command::Simulate { .. } => "simulate",
        Command::Passage { .. } => "passage",
        Command::Sweep { .. } => "sweep",
        Command::Selftest { .. } => "selftest",
    }
}

fn load_config(cli: &Cli) -> Result<Option<RunConfig>, CliError> {
    let Some(path) = &cli.config else {
        return Ok(None);
    };
    let shown = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|e| CliError::io(&shown, e))?;
    let mut cfg = RunConfig::from_toml_str(&text)
        .map_err(|e| CliError::Config(format!("{shown}: {}", strip_prefix(&e))))?;
    if let Some(seed) = cli.seed {
        cfg.mc.seed = seed;
    }
    if let Some(threads) = cli.threads {
        cfg.mc.threads = threads;
    }
    if let Some(out) = &cli.out {
        cfg.output.path = Some(out.display().to_string());
    }
    if let Some(f) = cli.format {
        cfg.output.format = f.into();
    }
    match &cli.command {
        Command::Simulate { x0 } => {
            cfg.simulate.x0 = x0.or(cfg.simulate.x0);
        }
        Command::Passage { x0, a, t } => {
            let p = &mut cfg.passage;
            p.x0 = x0.or(p.x0);
            p.a = a.or(p.a);
            p.t = t.or(p.t);
        }
        Command::Sweep { grid } => {
            // Grid paths in a config are relative to the config file; the
            // echo stores the absolute path so it reruns from anywhere.
            let grid = match grid {
                Some(g) => Some(g.clone()),
                None => cfg.sweep.grid.as_ref().map(|g| {
                    path.parent().unwrap_or(Path::new(".")).join(g)
                }),
            };
            if let Some(g) = grid {
                let abs = fs::canonicalize(&g).map_err(|e| CliError::io(g.display().to_string(), e))?;
                cfg.sweep.grid = Some(abs.display().to_string());
            }
        }
        _ => {}
    }
    cfg.check_sections()?;
    let resolved = cfg.resolved()?;
    Ok(Some(resolved))
}

fn strip_prefix(e: &CliError) -> String {
    match e {
        CliError::Config(m) => m.clone(),
        other => other.to_string(),
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("results are plain data")
}

fn label<T: Serialize>(v: &T) -> String {
    match to_value(v) {
        Value::String(s) => s,
        other => other.to_string(),
    }
}

fn run_model_command(
    command: &Command,
    cfg: &RunConfig,
) -> Result<(&'static str, Value, String), CliError> {
    let model = cfg.validated_model()?;
    match command {
        Command::Classify => {
            let report = classify(&model, &cfg.criteria)?;
            let mut table = String::from("quantity,value\n");
            for (k, v) in [
                ("no_extinction", label(&report.no_extinction)),
                ("no_explosion", label(&report.no_explosion)),
                ("infinity_behavior", label(&report.infinity_behavior)),
                ("method", label(&report.method)),
            ] {
                table.push_str(&format!("{k},{v}\n"));
            }
            Ok(("classify", to_value(&report), table))
        }
        Command::Simulate { .. } => {
            let x0 = cfg
                .simulate
                .x0
                .ok_or_else(|| CliError::Config("simulate needs x0 (--x0 or simulate.x0)".into()))?;
            let sim = Simulator::new(&model, cfg.sim.clone())?;
            let mut rng = RngStream::new(cfg.mc.seed, 0);
            let (points, record) = sim.trace(x0, &mut rng)?;
            let raw = points.len();
            let points = thin(points, cfg.simulate.max_points);
            let mut w = csv::Writer::from_writer(vec![]);
            w.write_record(["t", "x"]).expect("in-memory csv");
            for p in &points {
                w.serialize(p).expect("in-memory csv");
            }
            let table = String::from_utf8(w.into_inner().expect("in-memory csv")).unwrap();
            let results = json!({
                "x0": x0,
                "seed": cfg.mc.seed,
                "record": record,
                "raw_points": raw,
                "points": points,
            });
            Ok(("simulate", results, table))
        }
        Command::Passage { .. } => {
            let p = cfg.passage;
            let need = |v: Option<f64>, n: &str| {
                v.ok_or_else(|| CliError::Config(format!("passage needs {n} (--{n} or passage.{n})")))
            };
            let query = PassageQuery {
                x0: need(p.x0, "x0")?,
                a: need(p.a, "a")?,
                t: need(p.t, "t")?,
            };
            let sim = SimConfig {
                horizon_t: cfg.sim.horizon_t.max(query.t),
                ..cfg.sim.clone()
            };
            let est = estimate_passage_prob(&model, &sim, query, &cfg.mc)?;
            let mut w = csv::Writer::from_writer(vec![]);
            w.write_record([
                "x0", "a", "t", "p_hat", "ci_low", "ci_high", "n_paths", "seed", "capped",
                "budget_exhausted",
            ])
            .expect("in-memory csv");
            w.serialize((
                query.x0,
                query.a,
                query.t,
                est.p_hat,
                est.ci95_low,
                est.ci95_high,
                est.n_paths,
                cfg.mc.seed,
                est.capped,
                est.budget_exhausted,
            ))
            .expect("in-memory csv");
            let table = String::from_utf8(w.into_inner().expect("in-memory csv")).unwrap();
            Ok(("passage", to_value(&est), table))
        }
        Command::Sweep { .. } => {
            let path = cfg
                .sweep
                .grid
                .as_ref()
                .ok_or_else(|| CliError::Config("sweep needs a grid (--grid or sweep.grid)".into()))?;
            let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            let spec = model.spec();
            let b0 = spec.a0.as_power_law().map(|(b, _)| b);
            let grid = parse_grid(&text, path, spec.mu.alpha, b0)?;
            let rows = sweep(spec, &grid, &cfg.sim, &cfg.criteria, &cfg.mc);
            Ok(("sweep", to_value(&rows), sweep_csv(&rows)))
        }
        Command::Selftest { .. } => unreachable!("handled without a model"),
    }
}

/// At most `max` points, evenly spaced by index, keeping both ends.
pub fn thin(points: Vec<(f64, f64)>, max: usize) -> Vec<(f64, f64)> {
    let n = points.len();
    if n <= max {
        return points;
    }
    (0..max)
        .map(|j| points[((j as u128 * (n - 1) as u128) / (max - 1) as u128) as usize])
        .collect()
}

/// JSON writes the report. CSV writes the table, plus the report next to
/// it as `<out>.report.json` when writing to a file.
fn emit(report: &Report, table: &str, format: Format, out: Option<&Path>) -> Result<(), CliError> {
    let write = |path: &Path, body: &str| {
        fs::write(path, body).map_err(|e| CliError::io(path.display().to_string(), e))
    };
    let body = match format {
        Format::Json => report.to_json(),
        Format::Csv => table.to_string(),
    };
    match out {
        Some(path) => {
            write(path, &body)?;
            if format == Format::Csv {
                let mut side = path.as_os_str().to_owned();
                side.push(".report.json");
                write(Path::new(&side), &report.to_json())?;
            }
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(body.as_bytes())
                .map_err(|e| CliError::io("stdout", e))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thin_keeps_ends_and_bound() {
        let pts: Vec<_> = (0..25_001).map(|i| (i as f64, 0.0)).collect();
        let t = thin(pts.clone(), 10_000);
        assert_eq!(t.len(), 10_000);
        assert_eq!(t[0], pts[0]);
        assert_eq!(t.last(), pts.last());
        assert!(t.windows(2).all(|w| w[0].0 < w[1].0));
        assert_eq!(thin(pts[..5].to_vec(), 10), pts[..5].to_vec());
    }
}
