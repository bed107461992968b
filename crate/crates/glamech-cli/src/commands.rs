use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::Array3;
use serde_json::{json, Value};

use glamech::dynamics::{integrate_with, LiftedState, Method};
use glamech::geometry::{berwald, curvature};
use glamech::mechanics::{
    canonical_semispray, el_covector, lagrange_connection, mechanical_connection, mechanical_semispray,
    ring_connection,
};
use glamech::presets::{self, PresetSystem};
use glamech::Trajectory;

use crate::checks::run_checks;
use crate::config::{load_config, resolve_model, Model, RunConfig};
use crate::{CheckArgs, Cli, CliError, CoeffsArgs, Command, ExitCode, SimulateArgs, StateArgs, SystemArgs};

/// Run a parsed command line; returns the process exit code. Errors go to standard error.
pub fn run(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Simulate(a) => simulate(&a),
        Command::Check(a) => check(&a),
        Command::Coeffs(a) => coeffs(&a),
        Command::Presets => list_presets(),
    };
    match result {
        Ok(code) => code as i32,
        Err(e) => {
            eprintln!("glamech: {e}");
            e.code as i32
        }
    }
}

fn load(args: &SystemArgs) -> Result<(RunConfig, Model), CliError> {
    let (cfg, raw) = match &args.config {
        Some(path) => load_config(path)?,
        None => (RunConfig::default(), String::new()),
    };
    let model = resolve_model(args.preset.as_deref(), &cfg, &raw)?;
    Ok((cfg, model))
}

fn broadcast(what: &str, v: &[f64], n: usize) -> Result<Vec<f64>, CliError> {
    match v.len() {
        l if l == n => Ok(v.to_vec()),
        1 => Ok(vec![v[0]; n]),
        l => Err(CliError::config(format!("{what} needs {n} values (or one to repeat), got {l}"))),
    }
}

fn initial_state(state: &StateArgs, cfg: &RunConfig, model: &Model) -> Result<LiftedState, CliError> {
    let mut s = model.default_state.clone();
    if let Some(init) = &cfg.initial {
        if !init.x.is_empty() || model.m() == 0 {
            s.x = broadcast("initial.x", &init.x, model.m()).or_else(|e| if model.m() == 0 { Ok(vec![]) } else { Err(e) })?;
        }
        if !init.y.is_empty() {
            s.y = broadcast("initial.y", &init.y, model.r())?;
        }
    }
    if let Some(x) = &state.x0 {
        s.x = broadcast("--x0", x, model.m())?;
    }
    if let Some(y) = &state.y0 {
        s.y = broadcast("--y0", y, model.r())?;
    }
    Ok(s)
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(std::fs::File::create(p)?)),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

/// Shortest decimal that reads back to the same `f64`.
fn num(v: f64) -> String {
    format!("{v:?}")
}

pub fn write_csv(out: &mut dyn Write, m: usize, r: usize, traj: &Trajectory) -> std::io::Result<()> {
    let mut header = vec!["t".to_string()];
    header.extend((1..=m).map(|i| format!("x{i}")));
    header.extend((1..=r).map(|a| format!("y{a}")));
    header.extend(traj.diagnostic_names.iter().cloned());
    writeln!(out, "{}", header.join(","))?;
    for (s, d) in traj.samples.iter().zip(&traj.diagnostics) {
        let row: Vec<String> = std::iter::once(s.t).chain(s.x.iter().copied()).chain(s.y.iter().copied()).chain(d.iter().copied()).map(num).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    out.flush()
}

pub fn simulate(args: &SimulateArgs) -> Result<ExitCode, CliError> {
    let (cfg, model) = load(&args.system)?;
    let t1 = args.t1.or(cfg.t1).unwrap_or(10.0);
    let dt = args.dt.or(cfg.dt).unwrap_or(1e-3);
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(CliError::config(format!("dt must be positive, got {dt}")));
    }
    let method: Method = args.method.as_deref().or(cfg.method.as_deref()).unwrap_or("rk4").parse()?;
    let s0 = initial_state(&args.state, &cfg, &model)?;
    let traj = integrate_with(model.system.dynamics(), &s0, t1, dt, method, &model.conserved)?;
    let path = args.system.out.as_deref().or(cfg.output.as_deref());
    let mut out = open_output(path)?;
    write_csv(&mut out, model.m(), model.r(), &traj)?;
    Ok(ExitCode::Ok)
}

pub fn check(args: &CheckArgs) -> Result<ExitCode, CliError> {
    let (cfg, model) = load(&args.system)?;
    let seed = args.seed.or(cfg.seed).unwrap_or(0);
    let report = run_checks(&model, seed, &cfg.tolerances, args.tol)?;
    let all = report.values().all(|c| c.pass);
    let doc = serde_json::to_string_pretty(&report).expect("report serializes");
    let mut out = open_output(args.system.out.as_deref().or(cfg.output.as_deref()))?;
    writeln!(out, "{doc}")?;
    out.flush()?;
    Ok(if all { ExitCode::Ok } else { ExitCode::CheckFailure })
}

fn matrix_json(m: &nalgebra::DMatrix<f64>) -> Value {
    json!((0..m.nrows()).map(|i| m.row(i).iter().copied().collect::<Vec<f64>>()).collect::<Vec<_>>())
}

fn array3_json(a: &Array3<f64>) -> Value {
    let (n0, n1, n2) = a.dim();
    json!((0..n0)
        .map(|i| (0..n1).map(|j| (0..n2).map(|k| a[[i, j, k]]).collect::<Vec<f64>>()).collect::<Vec<_>>())
        .collect::<Vec<_>>())
}

/// Coefficient arrays at `u`: `E_b`, `combo = −2(G − ¼F)`, `G`, `F`, `Gamma[a][c]`,
/// `Gamma_ring`, `curvature[a][α][β]` and the Berwald blocks.
pub fn coefficients(model: &Model, u: &[f64]) -> Result<Value, CliError> {
    let m = model.m();
    let (e_b, combo, g, conn) = match &model.system {
        PresetSystem::Lagrange(s) => {
            let c = canonical_semispray(s, u)?;
            (Some(el_covector(s, u)?), c.combo, c.g_part, lagrange_connection(s))
        }
        PresetSystem::Mechanical(s) => {
            let combo = mechanical_semispray(s, u);
            (None, combo, s.spray().eval_vector(u), mechanical_connection(s))
        }
    };
    let force = model.system.force();
    let gamma = conn.gamma(u);
    if gamma.iter().any(|v| !v.is_finite()) {
        return Err(glamech::Error::NonFinite { what: "connection".into(), point: u.to_vec(), index: 0 }.into());
    }
    let ring = ring_connection(&conn, force, model.system.gh(), u)?;
    let curv = curvature(model.system.algebroid(), &conn, u)?;
    let bw = berwald(&conn)?.values(u);
    Ok(json!({
        "system": model.name,
        "point": { "x": &u[..m], "y": &u[m..] },
        "E_b": e_b.map(|v| v.iter().copied().collect::<Vec<f64>>()),
        "combo": combo.iter().copied().collect::<Vec<f64>>(),
        "G": g.iter().copied().collect::<Vec<f64>>(),
        "F": force.eval(u).iter().copied().collect::<Vec<f64>>(),
        "Gamma": matrix_json(&gamma),
        "Gamma_ring": matrix_json(&ring),
        "curvature": array3_json(&curv),
        "berwald": {
            "hh": array3_json(&bw.hh),
            "hv": array3_json(&bw.hv),
            "vh": array3_json(&bw.vh),
            "vv": array3_json(&bw.vv),
        },
    }))
}

pub fn coeffs(args: &CoeffsArgs) -> Result<ExitCode, CliError> {
    let (cfg, model) = load(&args.system)?;
    let s = initial_state(&args.state, &cfg, &model)?;
    let doc = coefficients(&model, &s.point())?;
    let mut out = open_output(args.system.out.as_deref().or(cfg.output.as_deref()))?;
    writeln!(out, "{}", serde_json::to_string_pretty(&doc).expect("json serializes"))?;
    out.flush()?;
    Ok(ExitCode::Ok)
}

fn list_presets() -> Result<ExitCode, CliError> {
    let mut out = std::io::stdout().lock();
    for name in presets::NAMES {
        let p = presets::build(name)?;
        let kind = match p.system {
            PresetSystem::Lagrange(_) => "lagrange",
            PresetSystem::Mechanical(_) => "mechanical",
        };
        writeln!(out, "{name:<18} m={} r={} {kind:<10} {}", p.m(), p.r(), p.oracle.description)?;
    }
    Ok(ExitCode::Ok)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shortest_round_trip_numbers() {
        for v in [0.1, 1.0, -2.5e-12, 1e300, std::f64::consts::PI] {
            assert_eq!(num(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(num(0.1), "0.1");
    }

    #[test]
    fn broadcasting() {
        assert_eq!(broadcast("y", &[1.0], 3).unwrap(), vec![1.0; 3]);
        assert_eq!(broadcast("y", &[1.0, 2.0], 2).unwrap(), vec![1.0, 2.0]);
        assert!(broadcast("y", &[1.0, 2.0], 3).is_err());
    }

    #[test]
    fn pendulum_coefficients() {
        let model = Model::from_preset("pendulum").unwrap();
        let doc = coefficients(&model, &[std::f64::consts::FRAC_PI_2, 1.0]).unwrap();
        assert!((doc["E_b"][0].as_f64().unwrap() + 1.0).abs() < 1e-12);
        assert!((doc["combo"][0].as_f64().unwrap() + 1.0).abs() < 1e-12);
        assert!(doc["Gamma"][0][0].as_f64().unwrap().abs() < 1e-8);
    }
}
