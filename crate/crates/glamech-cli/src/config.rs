//! Run configuration: JSON documents that name a preset or define a system inline.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use glamech::dynamics::Conserved;
use glamech::mechanics::{ExternalForce, GhMorphism, LagrangeMechanicalSystem, Lagrangian, MechanicalSystem};
use glamech::presets::{self, PresetSystem};
use glamech::{Field, GeneralizedLieAlgebroid, LiftedState};

use crate::expr::{expr_field, gradient_field, parse, Expr, Vars};
use crate::CliError;

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Name of a shipped preset. Exactly one of `preset` and `system` must be given.
    pub preset: Option<String>,
    pub system: Option<SystemDef>,
    pub initial: Option<InitialState>,
    pub t1: Option<f64>,
    pub dt: Option<f64>,
    pub method: Option<String>,
    /// Output path for CSV (simulate) or JSON (check, coeffs).
    pub output: Option<PathBuf>,
    pub seed: Option<u64>,
    /// Per-check tolerance overrides for `check`.
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialState {
    #[serde(default)]
    pub x: Vec<f64>,
    #[serde(default)]
    pub y: Vec<f64>,
}

/// A number or an expression string.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum Source {
    Num(f64),
    Text(String),
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemDef {
    pub name: Option<String>,
    /// Base dimension.
    pub m: usize,
    /// Fibre dimension, shared by `E` and `F`.
    pub r: usize,
    /// `ρ^i_α` as `m` rows of `r` entries in `x`. Default: identity (needs `m = r`).
    pub anchor: Option<Vec<Vec<Source>>>,
    /// `L^γ_{αβ}` indexed `[γ][α][β]`, in `x`. Default: zero.
    pub structure: Option<Vec<Vec<Vec<Source>>>>,
    /// Base maps `h` and `η`, `m` entries in `x`. Default: identity.
    pub h: Option<Vec<Source>>,
    pub eta: Option<Vec<Source>>,
    /// `g^α_a` as `r` rows of `r` entries in `x`. Default: identity.
    pub g: Option<Vec<Vec<Source>>>,
    pub lagrangian: Option<Source>,
    /// `G^a`, selects the connection-first pipeline when present.
    pub spray: Option<Vec<Source>>,
    pub force: Option<Vec<Source>>,
    #[serde(default)]
    pub conserved: BTreeMap<String, Source>,
    /// Finsler function for the homogeneity check.
    pub finsler: Option<Source>,
    /// Sampling box per bundle coordinate for `check`. Default: `[-1, 1]` each.
    pub bounds: Option<Vec<[f64; 2]>>,
}

/// Everything the commands need about a system.
pub struct Model {
    pub name: String,
    pub system: PresetSystem,
    pub conserved: Vec<Conserved>,
    pub finsler: Option<Lagrangian>,
    pub bounds: Vec<(f64, f64)>,
    pub default_state: LiftedState,
    /// The identity is used for `h` (chart-change checks assume it).
    pub h_identity: bool,
}

impl Model {
    pub fn from_preset(name: &str) -> Result<Model, CliError> {
        let p = presets::build(name).map_err(|e| CliError::config(e.to_string()))?;
        Ok(Model {
            name: p.name.to_string(),
            system: p.system,
            conserved: p.conserved,
            finsler: p.finsler,
            bounds: p.bounds,
            default_state: p.default_state,
            h_identity: true,
        })
    }

    pub fn m(&self) -> usize {
        self.system.m()
    }

    pub fn r(&self) -> usize {
        self.system.r()
    }
}

/// Parse a config document; errors carry line and column.
pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::config_at(e.line(), e.column().max(1), e.to_string()))
}

pub fn load_config(path: &Path) -> Result<(RunConfig, String), CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    Ok((parse_config(&text)?, text))
}

/// Line and column (1-based) of the first occurrence of `needle` in `text`.
fn locate(text: &str, needle: &str) -> Option<(usize, usize)> {
    let at = text.find(needle)?;
    let before = &text[..at];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    Some((line, col))
}

struct Ctx<'a> {
    raw: &'a str,
}

impl Ctx<'_> {
    fn expr(&self, what: &str, src: &Source, vars: &Vars) -> Result<Expr, CliError> {
        match src {
            Source::Num(v) => Ok(Expr::Num(*v)),
            Source::Text(s) => parse(s, vars).map_err(|e| {
                let quoted = serde_json::to_string(s).unwrap_or_default();
                let msg = format!("in {what}: {}", e.message);
                match locate(self.raw, &quoted) {
                    // +1 skips the opening quote
                    Some((line, col)) => CliError::config_at(line, col + 1 + e.offset, msg),
                    None => CliError::config(format!("{msg} (at character {} of {s:?})", e.offset + 1)),
                }
            }),
        }
    }

    fn vector(&self, what: &str, v: &[Source], len: usize, vars: &Vars) -> Result<Vec<Expr>, CliError> {
        if v.len() != len {
            return Err(CliError::config(format!("{what} needs {len} entries, got {}", v.len())));
        }
        v.iter().enumerate().map(|(i, s)| self.expr(&format!("{what}[{i}]"), s, vars)).collect()
    }

    fn matrix(&self, what: &str, v: &[Vec<Source>], rows: usize, cols: usize, vars: &Vars) -> Result<Vec<Expr>, CliError> {
        if v.len() != rows {
            return Err(CliError::config(format!("{what} needs {rows} rows, got {}", v.len())));
        }
        let mut out = Vec::with_capacity(rows * cols);
        for (i, row) in v.iter().enumerate() {
            out.extend(self.vector(&format!("{what}[{i}]"), row, cols, vars)?);
        }
        Ok(out)
    }
}

fn identity_exprs(n: usize) -> Vec<Expr> {
    (0..n * n).map(|k| Expr::Num(if k / n == k % n { 1.0 } else { 0.0 })).collect()
}

/// Build a [`Model`] from an inline definition. `raw` is the config text, used to locate
/// expression errors.
pub fn build_model(def: &SystemDef, raw: &str) -> Result<Model, CliError> {
    let (m, r) = (def.m, def.r);
    let ctx = Ctx { raw };
    let base = Vars::base(m);
    let bundle = Vars { m, r };
    let n = m + r;

    let anchor = match &def.anchor {
        Some(a) => ctx.matrix("anchor", a, m, r, &base)?,
        None if m == r => identity_exprs(m),
        None => return Err(CliError::config("anchor is required when m != r")),
    };
    let structure = match &def.structure {
        Some(s) => {
            if s.len() != r {
                return Err(CliError::config(format!("structure needs {r} blocks, got {}", s.len())));
            }
            let mut out = Vec::new();
            for (g, block) in s.iter().enumerate() {
                out.extend(ctx.matrix(&format!("structure[{g}]"), block, r, r, &base)?);
            }
            out
        }
        None => vec![Expr::Num(0.0); r * r * r],
    };
    let coord_map = |what: &str, v: &Option<Vec<Source>>| -> Result<Field, CliError> {
        Ok(match v {
            Some(v) => expr_field(m, &[m], ctx.vector(what, v, m, &base)?),
            None => Field::identity(m),
        })
    };
    let h = coord_map("h", &def.h)?;
    let eta = coord_map("eta", &def.eta)?;
    let a = GeneralizedLieAlgebroid::new(m, r, expr_field(m, &[m, r], anchor), expr_field(m, &[r, r, r], structure), h, eta)
        .map_err(|e| CliError::config(e.to_string()))?;

    let g = match &def.g {
        Some(g) => expr_field(m, &[r, r], ctx.matrix("g", g, r, r, &base)?),
        None => expr_field(m, &[r, r], identity_exprs(r)),
    };
    let h_field = a.h_map().clone();
    let gh = GhMorphism::from_g(g, h_field).map_err(|e| CliError::config(format!("g: {e}")))?;

    let lagrangian = match &def.lagrangian {
        Some(src) => {
            let e = ctx.expr("lagrangian", src, &bundle)?;
            let value = expr_field(n, &[1], vec![e.clone()]);
            Some(Lagrangian::new(m, r, value).with_gradient(gradient_field(n, &e)))
        }
        None => None,
    };
    let force = match &def.force {
        Some(f) => ExternalForce::new(expr_field(n, &[r], ctx.vector("force", f, r, &bundle)?)),
        None => ExternalForce::zero(m, r),
    };
    let system = match (&def.spray, lagrangian) {
        (Some(s), l) => {
            let spray = expr_field(n, &[r], ctx.vector("spray", s, r, &bundle)?);
            let mut ms = MechanicalSystem::new(a, gh, spray, force).map_err(|e| CliError::config(e.to_string()))?;
            if let Some(l) = l {
                ms = ms.with_lagrangian(l);
            }
            PresetSystem::Mechanical(ms)
        }
        (None, Some(l)) => PresetSystem::Lagrange(
            LagrangeMechanicalSystem::new(a, gh, l, force).map_err(|e| CliError::config(e.to_string()))?,
        ),
        (None, None) => return Err(CliError::config("system needs a lagrangian or a spray")),
    };

    let mut conserved = Vec::new();
    for (name, src) in &def.conserved {
        let e = ctx.expr(&format!("conserved.{name}"), src, &bundle)?;
        conserved.push(Conserved::new(name, move |u| e.eval(u)));
    }
    let finsler = match &def.finsler {
        Some(src) => {
            let e = ctx.expr("finsler", src, &bundle)?;
            Some(Lagrangian::new(m, r, expr_field(n, &[1], vec![e])).non_smooth_at_zero())
        }
        None => None,
    };
    let bounds = match &def.bounds {
        Some(b) if b.len() == n => b.iter().map(|[lo, hi]| (*lo, *hi)).collect(),
        Some(b) => return Err(CliError::config(format!("bounds needs {n} entries, got {}", b.len()))),
        None => vec![(-1.0, 1.0); n],
    };
    Ok(Model {
        name: def.name.clone().unwrap_or_else(|| "config".into()),
        system,
        conserved,
        finsler,
        bounds,
        default_state: LiftedState::new(0.0, vec![0.0; m], vec![1.0; r]),
        h_identity: def.h.is_none(),
    })
}

/// Resolve the system named by the command line or the config.
pub fn resolve_model(preset: Option<&str>, cfg: &RunConfig, raw: &str) -> Result<Model, CliError> {
    let preset = preset.or(cfg.preset.as_deref());
    match (preset, &cfg.system) {
        (Some(name), None) => Model::from_preset(name),
        (None, Some(def)) => build_model(def, raw),
        (Some(_), Some(_)) => Err(CliError::config("give either a preset or an inline system, not both")),
        (None, None) => Err(CliError::config("no system given: use --preset or a config with \"preset\" or \"system\"")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_errors_have_positions() {
        let e = parse_config("{\n  \"preset\": \"pendulum\",\n  \"t1\": ,\n}").unwrap_err();
        assert_eq!(e.code, crate::ExitCode::Config);
        assert!(e.message.contains("line 3"), "{}", e.message);
    }

    #[test]
    fn unknown_fields_rejected() {
        assert!(parse_config(r#"{"preset": "pendulum", "t_end": 3}"#).is_err());
    }

    #[test]
    fn expression_errors_point_into_the_document() {
        let raw = "{\n  \"system\": {\"m\": 1, \"r\": 1,\n    \"lagrangian\": \"0.5*y1^2 + z\"}\n}";
        let cfg = parse_config(raw).unwrap();
        let Err(e) = resolve_model(None, &cfg, raw) else { panic!("expected an error") };
        assert!(e.message.contains("line 3, column 31"), "{}", e.message);
        assert!(e.message.contains("unknown identifier 'z'"));
    }

    #[test]
    fn inline_pendulum_matches_preset() {
        let raw = r#"{"system": {"m": 1, "r": 1, "lagrangian": "0.5*y1^2 - (1 - cos(x1))"}}"#;
        let cfg = parse_config(raw).unwrap();
        let model = resolve_model(None, &cfg, raw).unwrap();
        let preset = Model::from_preset("pendulum").unwrap();
        for u in [[0.3, 1.0], [1.5, -0.2]] {
            let a = model.system.dynamics().acceleration(&u).unwrap();
            let b = preset.system.dynamics().acceleration(&u).unwrap();
            assert!((a - b).amax() < 1e-12);
        }
    }

    #[test]
    fn locate_counts_lines_and_columns() {
        assert_eq!(locate("ab\ncd\"x\"", "\"x\""), Some((2, 3)));
        assert_eq!(locate("abc", "z"), None);
    }

}
