#![allow(dead_code)]

use glamech::algebroid::ChartChange;
use glamech::geometry::{GhSection, GhVector, RhoEtaConnection};
use glamech::mechanics::{lagrange_connection, mechanical_connection};
use glamech::presets::{PresetDescriptor, PresetSystem};
use glamech::Field;
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn unit_point(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen::<f64>()).collect()
}

pub fn preset_point(rng: &mut ChaCha8Rng, p: &PresetDescriptor) -> Vec<f64> {
    let n = p.m() + p.r();
    p.sample(&unit_point(rng, n))
}

fn uniform(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| scale * rng.gen_range(-1.0..1.0)).collect()
}

/// Random quadratic polynomial field with analytic partials.
pub fn poly_field(rng: &mut ChaCha8Rng, n_in: usize, shape: &[usize], scale: f64) -> Field {
    let k: usize = shape.iter().product();
    let c0 = uniform(rng, k, scale);
    let c1 = uniform(rng, k * n_in, scale);
    let c2 = uniform(rng, k * n_in * n_in, scale * 0.5);
    let (d1, d2) = (c1.clone(), c2.clone());
    Field::new(n_in, shape, move |u| {
        (0..k)
            .map(|j| {
                let mut s = c0[j];
                for i in 0..n_in {
                    s += c1[j * n_in + i] * u[i];
                    for l in 0..n_in {
                        s += c2[(j * n_in + i) * n_in + l] * u[i] * u[l];
                    }
                }
                s
            })
            .collect()
    })
    .with_partials(move |u| {
        let mut out = vec![0.0; n_in * k];
        for q in 0..n_in {
            for j in 0..k {
                let mut s = d1[j * n_in + q];
                for l in 0..n_in {
                    s += (d2[(j * n_in + q) * n_in + l] + d2[(j * n_in + l) * n_in + q]) * u[l];
                }
                out[q * k + j] = s;
            }
        }
        out
    })
}

pub fn random_section(rng: &mut ChaCha8Rng, m: usize, p: usize, r: usize) -> GhSection {
    GhSection::new(m, p, r, poly_field(rng, m + r, &[p + r], 1.0))
}

pub fn random_vector(rng: &mut ChaCha8Rng, p: usize, r: usize) -> GhVector {
    GhVector::from_slice(p, &uniform(rng, p + r, 1.0))
}

fn random_matrix(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    uniform(rng, n * n, scale)
}

/// Random chart change with `Λ = M` (the bundle plays both roles) and a nonlinear,
/// explicitly invertible base map.
pub fn random_chart_change(rng: &mut ChaCha8Rng, m: usize, r: usize) -> ChartChange {
    let shift = uniform(rng, m, 0.5);
    let bend = rng.gen_range(-0.4..0.4);
    let stretch = rng.gen_range(0.6..1.4);
    let (s1, s2) = (shift.clone(), shift);
    let (base, inv) = match m {
        0 => (Field::identity(0), Field::identity(0)),
        1 => (
            Field::new(1, &[1], move |x| vec![stretch * x[0] + s1[0]]),
            Field::new(1, &[1], move |x| vec![(x[0] - s2[0]) / stretch]),
        ),
        2 => (
            Field::new(2, &[2], move |x| vec![stretch * x[0] + bend * x[1] * x[1] + s1[0], x[1] + s1[1]]),
            Field::new(2, &[2], move |x| {
                let x2 = x[1] - s2[1];
                vec![(x[0] - s2[0] - bend * x2 * x2) / stretch, x2]
            }),
        ),
        _ => panic!("chart changes only for m <= 2"),
    };
    let mut r0 = random_matrix(rng, r, 0.3);
    for a in 0..r {
        r0[a * r + a] += 1.0;
    }
    let s = random_matrix(rng, r, 0.2);
    let t = random_matrix(rng, r, 0.2);
    let fibre = Field::new(m, &[r, r], move |x| {
        let (a, b) = (x.first().map_or(0.0, |v| v.sin()), x.get(1).copied().unwrap_or(0.0));
        (0..r * r).map(|k| r0[k] + s[k] * a + t[k] * b).collect()
    });
    ChartChange::new(base, inv, fibre.clone(), fibre).expect("well formed chart change")
}

/// Connection induced by the preset's semispray.
pub fn preset_connection(p: &PresetDescriptor) -> RhoEtaConnection {
    match &p.system {
        PresetSystem::Lagrange(s) => lagrange_connection(s),
        PresetSystem::Mechanical(s) => mechanical_connection(s),
    }
}

/// Classical fixed-step RK4 for a plain autonomous ODE; returns `n + 1` states.
pub fn rk4(f: impl Fn(&[f64]) -> Vec<f64>, s0: &[f64], dt: f64, n: usize) -> Vec<Vec<f64>> {
    let mut out = vec![s0.to_vec()];
    let mut s = DVector::from_column_slice(s0);
    let ev = |v: &DVector<f64>| DVector::from_vec(f(v.as_slice()));
    for _ in 0..n {
        let k1 = ev(&s);
        let k2 = ev(&(&s + &k1 * (0.5 * dt)));
        let k3 = ev(&(&s + &k2 * (0.5 * dt)));
        let k4 = ev(&(&s + &k3 * dt));
        s += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
        out.push(s.iter().copied().collect());
    }
    out
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |acc: f64, (x, y)| acc.max((x - y).abs()))
}

/// Central difference derivative of `f` at `x` along coordinate `k`, step `1e-5`.
pub fn central_partial(f: impl Fn(&[f64]) -> Vec<f64>, x: &[f64], k: usize) -> Vec<f64> {
    let h = 1e-5;
    let (mut xp, mut xm) = (x.to_vec(), x.to_vec());
    xp[k] += h;
    xm[k] -= h;
    f(&xp).iter().zip(f(&xm)).map(|(a, b)| (a - b) / (2.0 * h)).collect()
}
