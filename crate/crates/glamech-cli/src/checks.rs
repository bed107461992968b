//! Invariant suite behind `glamech check`.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use glamech::algebroid::{anchor_morphism_defect, jacobi_defect};
use glamech::geometry::{
    adapted_frame_section, apply_endomorphism, bracket_gh, curvature, endomorphism_section, nijenhuis,
    transform_connection, Endomorphism, GhSection, GhVector, RhoEtaConnection,
};
use glamech::mechanics::{
    finsler_validate, lagrange_connection, mechanical_connection, semispray_equation_residual,
    semispray_transform_check,
};
use glamech::presets::PresetSystem;
use glamech::{ChartChange, Field, Result};

use crate::config::Model;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckResult {
    pub max_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

pub type Report = BTreeMap<String, CheckResult>;

/// Points and sections drawn per check.
pub const SAMPLES: usize = 20;

struct Check {
    name: &'static str,
    tolerance: f64,
    run: fn(&Model, &mut ChaCha8Rng) -> Result<f64>,
}

const CHECKS: &[Check] = &[
    Check { name: "gh_inverse", tolerance: 1e-10, run: gh_inverse },
    Check { name: "jacobi", tolerance: 1e-6, run: jacobi },
    Check { name: "anchor_morphism", tolerance: 1e-6, run: anchor_morphism },
    Check { name: "projector_algebra", tolerance: 1e-10, run: projector_algebra },
    Check { name: "nijenhuis", tolerance: 1e-6, run: nijenhuis_identities },
    Check { name: "bracket_relations", tolerance: 1e-6, run: bracket_relations },
    Check { name: "transformation_laws", tolerance: 1e-6, run: transformation_laws },
    Check { name: "semispray_equation", tolerance: 1e-5, run: semispray_equation },
    Check { name: "finsler_homogeneity", tolerance: 1e-9, run: finsler_homogeneity },
];

/// Marker residual for checks that do not apply to the model; such checks are left out.
const NOT_APPLICABLE: f64 = -1.0;

/// Run every applicable check. `overrides` replaces tolerances by name; `global_tol`
/// replaces all of them.
pub fn run_checks(
    model: &Model,
    seed: u64,
    overrides: &BTreeMap<String, f64>,
    global_tol: Option<f64>,
) -> Result<Report> {
    let results: Vec<Result<Option<(String, CheckResult)>>> = CHECKS
        .par_iter()
        .enumerate()
        .map(|(k, c)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(k as u64));
            let value = (c.run)(model, &mut rng)?;
            if value == NOT_APPLICABLE {
                return Ok(None);
            }
            let tolerance = global_tol.or_else(|| overrides.get(c.name).copied()).unwrap_or(c.tolerance);
            let pass = value.is_finite() && value <= tolerance;
            Ok(Some((c.name.to_string(), CheckResult { max_residual: value, tolerance, pass })))
        })
        .collect();
    let mut report = Report::new();
    for r in results {
        if let Some((name, res)) = r? {
            report.insert(name, res);
        }
    }
    Ok(report)
}

pub fn check_names() -> Vec<&'static str> {
    CHECKS.iter().map(|c| c.name).collect()
}

fn point(model: &Model, rng: &mut ChaCha8Rng) -> Vec<f64> {
    model.bounds.iter().map(|(lo, hi)| lo + (hi - lo) * rng.gen::<f64>()).collect()
}

/// Random section with affine coefficients in the bundle coordinates.
fn section(model: &Model, rng: &mut ChaCha8Rng) -> GhSection {
    let (m, r) = (model.m(), model.r());
    let n = m + r;
    let k = 2 * r;
    let c0: Vec<f64> = (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let c1: Vec<f64> = (0..k * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let d1 = c1.clone();
    let f = Field::new(n, &[k], move |u| (0..k).map(|j| c0[j] + (0..n).map(|i| c1[j * n + i] * u[i]).sum::<f64>()).collect())
        .with_partials(move |_| (0..n).flat_map(|q| (0..k).map(move |j| (q, j))).map(|(q, j)| d1[j * n + q]).collect());
    GhSection::new(m, r, r, f)
}

fn vector(model: &Model, rng: &mut ChaCha8Rng) -> GhVector {
    let r = model.r();
    GhVector::from_slice(r, &(0..2 * r).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<_>>())
}

fn connection(model: &Model) -> RhoEtaConnection {
    match &model.system {
        PresetSystem::Lagrange(s) => lagrange_connection(s),
        PresetSystem::Mechanical(s) => mechanical_connection(s),
    }
}

fn gh_inverse(model: &Model, rng: &mut ChaCha8Rng) -> Result<f64> {
    let gh = model.system.gh();
    Ok((0..SAMPLES).map(|_| gh.inverse_residual(&point(model, rng)[..model.m()])).fold(0.0, f64::max))
}

fn jacobi(model: &Model, rng: &mut ChaCha8Rng) -> Result<f64> {
    let a = model.system.algebroid();
    let p = a.p();
    let mut worst: f64 = 0.0;
    for _ in 0..SAMPLES.min(5) {
        let x = point(model, rng);
        for i in 0..p {
            for j in i + 1..p {
                for k in j + 1..p {
                    worst = worst.max(jacobi_defect(a, &x[..a.m()], (i, j, k)));
                }
            }
        }
    }
    Ok(worst)
}

fn anchor_morphism(model: &Model, rng: &mut ChaCha8Rng) -> Result<f64> {
    let a = model.system.algebroid();
    let (m, r) = (model.m(), model.r());
    let mut worst: f64 = 0.0;
    for _ in 0..SAMPLES {
        let u = point(model, rng);
        for al in 0..r {
            for be in al + 1..r {
                let (x, y) = (GhSection::horizontal_basis(m, r, r, al), GhSection::horizontal_basis(m, r, r, be));
                worst = worst.max(anchor_morphism_defect(a, &u, &x, &y)?);
            }
        }
        let (x, y) = (section(model, rng), section(model, rng));
        worst = worst.max(anchor_morphism_defect(a, &u, &x, &y)?);
    }
    Ok(worst)
}

fn projector_algebra(model: &Model, rng: &mut ChaCha8Rng) -> Result<f64> {
    use Endomorphism::*;
    let conn = connection(model);
    let gh = model.system.gh();
    let mut worst: f64 = 0.0;
    for _ in 0..SAMPLES {
        let u = point(model, rng);
        let x = vector(model, rng);
        let ap = |e: Endomorphism, v: &GhVector| apply_endomorphism(e, &conn, Some(gh), &u, v);
        let (vx, hx, px, jx) = (ap(V, &x)?, ap(H, &x)?, ap(P, &x)?, ap(J, &x)?);
        let residuals = [
            (&ap(V, &vx)? - &vx).amax(),
            (&ap(H, &hx)? - &hx).amax(),
            (&ap(P, &px)? - &x).amax(),
            (&(&hx + &vx) - &x).amax(),
            (&px - &(&hx - &vx)).amax(),
            ap(J, &jx)?.amax(),
            (&ap(J, &px)? - &jx).amax(),
        ];
        worst = residuals.iter().fold(worst, |a, b| a.max(*b));
    }
    Ok(worst)
}

fn nijenhuis_identities(model: &Model, rng: &mut ChaCha8Rng) -> Result<f64> {
    use Endomorphism::*;
    let a = model.system.algebroid();
    let conn = connection(model);
    let gh = model.system.gh();
    let mut worst: f64 = 0.0;
    for _ in 0..SAMPLES.min(6) {
        let u = point(model, rng);
        let (x, y) = (section(model, rng), section(model, rng));
        let hx = endomorphism_section(H, &conn, None, &x);
        let hy = endomorphism_section(H, &conn, None, &y);
        let vhh = apply_endomorphism(V, &conn, None, &u, &bracket_gh(a, &hx, &hy, &u)?)?;
        worst = worst
            .max(nijenhuis(a, J, &conn, Some(gh), &x, &y, &u)?.amax())
            .max((&nijenhuis(a, V, &conn, None, &x, &y, &u)? - &vhh).amax())
            .max((&nijenhuis(a, H, &conn, None, &x, &y, &u)? - &vhh).amax())
            .max((&nijenhuis(a, P, &conn, None, &x, &y, &u)? - &(&vhh * 4.0)).amax());
    }
    Ok(worst)
}

/// Vertical part of `[δ_α, δ_β]` against the curvature, and `[δ_α, ∂̇_b] = ∂Γ_α/∂y^b`.
fn bracket_relations(model: &Model, rng: &mut ChaCha8Rng) -> Result<f64> {
    let a = model.system.algebroid();
    let conn = connection(model);
    let (m, r) = (model.m(), model.r());
    let mut worst: f64 = 0.0;
    for _ in 0..SAMPLES.min(5) {
        let u = point(model, rng);
        let curv = curvature(a, &conn, &u)?;
        for al in 0..r {
            let d_al = adapted_frame_section(&conn, al);
            for be in 0..r {
                let br = bracket_gh(a, &d_al, &adapted_frame_section(&conn, be), &u)?;
                let v = &br.v + conn.gamma(&u) * &br.z;
                for c in 0..r {
                    worst = worst.max((v[c] - curv[[c, al, be]]).abs());
                }
                let br = bracket_gh(a, &d_al, &GhSection::vertical_basis(m, r, r, be), &u)?;
                let dg = conn.field().partial_matrix(&u, m + be);
                worst = worst.max(br.z.amax()).max((&br.v - dg.column(al)).amax());
            }
        }
    }
    Ok(worst)
}

/// Invertible chart change with an `x`-dependent fibre matrix and `Λ = M`.
fn chart_change(m: usize, r: usize, rng: &mut ChaCha8Rng) -> ChartChange {
    let mut a = DMatrix::<f64>::identity(m, m);
    for v in a.iter_mut() {
        *v += rng.gen_range(-0.2..0.2);
    }
    let shift: Vec<f64> = (0..m).map(|_| rng.gen_range(-0.5..0.5)).collect();
    let ainv = a.clone().try_inverse().expect("near-identity matrix is invertible");
    let (s1, s2) = (shift.clone(), shift);
    let base = Field::new(m, &[m], move |x| {
        let y = &a * nalgebra::DVector::from_column_slice(x);
        (0..m).map(|i| y[i] + s1[i]).collect()
    });
    let inv = Field::new(m, &[m], move |x| {
        let d: Vec<f64> = (0..m).map(|i| x[i] - s2[i]).collect();
        (&ainv * nalgebra::DVector::from_vec(d)).iter().copied().collect()
    });
    let r0: Vec<f64> = (0..r * r).map(|k| if k / r == k % r { 1.0 } else { 0.0 } + rng.gen_range(-0.2..0.2)).collect();
    let s: Vec<f64> = (0..r * r).map(|_| rng.gen_range(-0.1..0.1)).collect();
    let fibre = Field::new(m, &[r, r], move |x| {
        let w = x.first().map_or(0.0, |v| v.sin());
        (0..r * r).map(|k| r0[k] + s[k] * w).collect()
    });
    ChartChange::new(base, inv, fibre.clone(), fibre).expect("well formed chart change")
}

/// Round trip of the connection law, and the semispray law for Lagrange systems.
fn transformation_laws(model: &Model, rng: &mut ChaCha8Rng) -> Result<f64> {
    if !model.h_identity {
        return Ok(NOT_APPLICABLE);
    }
    let a = model.system.algebroid();
    let conn = connection(model);
    let (m, r) = (model.m(), model.r());
    let cc = chart_change(m, r, rng);
    let a1 = cc.transform_algebroid(a)?;
    let back = transform_connection(&a1, &transform_connection(a, &conn, &cc), &cc.inverse());
    let mut worst: f64 = 0.0;
    for _ in 0..SAMPLES.min(5) {
        let u = point(model, rng);
        worst = worst.max((back.gamma(&u) - conn.gamma(&u)).amax());
        if let PresetSystem::Lagrange(sys) = &model.system {
            worst = worst.max(semispray_transform_check(sys, &cc, &u)?);
        }
    }
    Ok(worst)
}

fn semispray_equation(model: &Model, rng: &mut ChaCha8Rng) -> Result<f64> {
    let PresetSystem::Lagrange(sys) = &model.system else { return Ok(NOT_APPLICABLE) };
    let mut worst: f64 = 0.0;
    for _ in 0..SAMPLES {
        let u = point(model, rng);
        let x = section(model, rng);
        worst = worst.max(semispray_equation_residual(sys, &x, &u)?);
    }
    Ok(worst)
}

fn finsler_homogeneity(model: &Model, rng: &mut ChaCha8Rng) -> Result<f64> {
    let Some(f) = &model.finsler else { return Ok(NOT_APPLICABLE) };
    let samples: Vec<Vec<f64>> = (0..SAMPLES).map(|_| point(model, rng)).collect();
    let rep = finsler_validate(f, &samples);
    // a non-convex or non-positive function fails outright
    if rep.min_hessian_eigenvalue <= 0.0 || rep.min_value <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(rep.homogeneity_residual)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_passes() {
        for name in glamech::presets::NAMES {
            let model = Model::from_preset(name).unwrap();
            let report = run_checks(&model, 7, &BTreeMap::new(), None).unwrap();
            for (check, res) in &report {
                assert!(res.pass, "{name}/{check}: {res:?}");
            }
        }
    }

    #[test]
    fn finsler_report_only_where_defined() {
        let f = run_checks(&Model::from_preset("finsler_euclidean").unwrap(), 0, &BTreeMap::new(), None).unwrap();
        assert!(f.contains_key("finsler_homogeneity"));
        let d = run_checks(&Model::from_preset("damped_pendulum").unwrap(), 0, &BTreeMap::new(), None).unwrap();
        assert!(!d.contains_key("finsler_homogeneity") && !d.contains_key("semispray_equation"));
    }

    #[test]
    fn tolerance_overrides() {
        let model = Model::from_preset("pendulum").unwrap();
        let mut o = BTreeMap::new();
        o.insert("gh_inverse".to_string(), 0.5);
        let r = run_checks(&model, 0, &o, None).unwrap();
        assert_eq!(r["gh_inverse"].tolerance, 0.5);
        let r = run_checks(&model, 0, &o, Some(0.25)).unwrap();
        assert!(r.values().all(|c| c.tolerance == 0.25));
    }
}
