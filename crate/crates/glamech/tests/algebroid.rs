mod common;

use common::*;
use glamech::algebroid::{
    anchor_morphism_defect, jacobi_defect, pullback_bracket, pullback_eval, structure_from_frame, PullbackSection,
};
use glamech::linalg::levi_civita;
use glamech::presets::{self, twisted_theta, NAMES};
use glamech::{Fd, Field, GeneralizedLieAlgebroid};
use nalgebra::{DMatrix, DVector};
use ndarray::Array3;
use proptest::prelude::*;
use rand::Rng;

/// Lie bracket of two vector fields on ℝ^m by central differences.
fn fd_vector_bracket(x: &[f64], v: &dyn Fn(&[f64]) -> Vec<f64>, w: &dyn Fn(&[f64]) -> Vec<f64>) -> DVector<f64> {
    let m = x.len();
    let (vx, wx) = (v(x), w(x));
    let mut out = DVector::zeros(m);
    for i in 0..m {
        let dw = central_partial(|q| w(q), x, i);
        let dv = central_partial(|q| v(q), x, i);
        for j in 0..m {
            out[j] += vx[i] * dw[j] - wx[i] * dv[j];
        }
    }
    out
}

#[test]
fn twisted_frame_structure_matches_fd_frame_brackets() {
    let a = presets::build("twisted_frame").unwrap();
    let a = a.system.algebroid();
    let theta = twisted_theta();
    let mut rng = rng(11);
    for _ in 0..20 {
        let x: Vec<f64> = (0..2).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let th = theta.eval_matrix(&x);
        let inv = th.clone().try_inverse().unwrap();
        let (_, l) = pullback_eval(a, &x).unwrap();
        for al in 0..2 {
            for be in 0..2 {
                let t1 = theta.clone();
                let t2 = theta.clone();
                let va = move |q: &[f64]| t1.eval_matrix(q).column(al).iter().copied().collect::<Vec<_>>();
                let vb = move |q: &[f64]| t2.eval_matrix(q).column(be).iter().copied().collect::<Vec<_>>();
                let c = &inv * fd_vector_bracket(&x, &va, &vb);
                for g in 0..2 {
                    assert!((l[[g, al, be]] - c[g]).abs() < 1e-6, "L^{g}_{al}{be} at {x:?}");
                }
            }
        }
    }
}

#[test]
fn twisted_frame_known_values() {
    // [θ_1, θ_2] = ∂_1((1 + x1)) ∂_2 = θ_2 / (1 + x1)
    let a = presets::build("twisted_frame").unwrap();
    let (rho, l) = pullback_eval(a.system.algebroid(), &[0.3, -0.2]).unwrap();
    assert!((l[[1, 0, 1]] - 1.0 / 1.3).abs() < 1e-10);
    assert!((l[[1, 1, 0]] + 1.0 / 1.3).abs() < 1e-10);
    assert!((rho[(1, 1)] - 1.3).abs() < 1e-12);
}

#[test]
fn rotated_eta_with_identity_frame_is_abelian() {
    let phi: f64 = 0.7;
    let (c, s) = (phi.cos(), phi.sin());
    let eta = Field::new(2, &[2], move |k| vec![c * k[0] - s * k[1], s * k[0] + c * k[1]]);
    let a = structure_from_frame(Field::identity_matrix(2, 2), Field::identity(2), eta, &[vec![0.0, 0.0]]).unwrap();
    let mut rng = rng(12);
    for _ in 0..10 {
        let x = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
        let (rho, l) = pullback_eval(&a, &x).unwrap();
        assert!(l.iter().all(|v| v.abs() < 1e-12));
        assert!((rho - DMatrix::identity(2, 2)).amax() < 1e-9);
    }
}

#[test]
fn constant_sections_on_abelian_algebroid() {
    let a = GeneralizedLieAlgebroid::classical(2);
    let z1 = PullbackSection::constant(2, 2, &[1.0, 2.0]);
    let z2 = PullbackSection::constant(2, 2, &[-0.5, 3.0]);
    let b = pullback_bracket(&a, &z1, &z2, &[0.1, 0.2, 0.3, 0.4]).unwrap();
    assert_eq!(b.amax(), 0.0);
}

#[test]
fn so3_frame_brackets_are_structure_constants() {
    let a = GeneralizedLieAlgebroid::so3();
    for al in 0..3 {
        for be in 0..3 {
            let mut e1 = [0.0; 3];
            let mut e2 = [0.0; 3];
            e1[al] = 1.0;
            e2[be] = 1.0;
            let b = pullback_bracket(&a, &PullbackSection::constant(0, 3, &e1), &PullbackSection::constant(0, 3, &e2), &[0.2, 0.1, -0.3])
                .unwrap();
            for g in 0..3 {
                assert_eq!(b[g], levi_civita(al, be, g));
            }
        }
    }
}

#[test]
fn bracket_with_function_coefficient() {
    // [e_1, x1 e_2] = x1 [e_1, e_2] + ρ(e_1)(x1) e_2 = e_2
    let a = GeneralizedLieAlgebroid::classical(2);
    let z1 = PullbackSection::constant(2, 2, &[1.0, 0.0]);
    let z2 = PullbackSection::new(Field::new(4, &[2], |u| vec![0.0, u[0]]));
    let b = pullback_bracket(&a, &z1, &z2, &[0.7, -0.4, 1.0, 2.0]).unwrap();
    assert!((b[0]).abs() < 1e-12 && (b[1] - 1.0).abs() < 1e-10);
}

#[test]
fn jacobi_defect_zero_for_abelian_and_so3() {
    let a = GeneralizedLieAlgebroid::classical(3);
    assert_eq!(jacobi_defect(&a, &[0.1, 0.2, 0.3], (0, 1, 2)), 0.0);
    let so3 = GeneralizedLieAlgebroid::so3();
    for probe in [(0, 1, 2), (1, 1, 2), (2, 0, 1)] {
        assert!(jacobi_defect(&so3, &[], probe) < 1e-12);
    }
}

fn bracket_const(l: &Array3<f64>, x: &[f64], y: &[f64]) -> Vec<f64> {
    let p = x.len();
    (0..p).map(|d| (0..p).map(|i| (0..p).map(|j| l[[d, i, j]] * x[i] * y[j]).sum::<f64>()).sum()).collect()
}

#[test]
fn random_constants_jacobi_matches_triple_bracket() {
    let mut rng = rng(13);
    let mut l = Array3::zeros((3, 3, 3));
    for g in 0..3 {
        for a in 0..3 {
            for b in (a + 1)..3 {
                let v = rng.gen_range(-1.0..1.0);
                l[[g, a, b]] = v;
                l[[g, b, a]] = -v;
            }
        }
    }
    let alg = GeneralizedLieAlgebroid::lie_algebra(l.clone());
    let e = |i: usize| {
        let mut v = vec![0.0; 3];
        v[i] = 1.0;
        v
    };
    let (a, b, c) = (0, 1, 2);
    let t1 = bracket_const(&l, &bracket_const(&l, &e(a), &e(b)), &e(c));
    let t2 = bracket_const(&l, &bracket_const(&l, &e(b), &e(c)), &e(a));
    let t3 = bracket_const(&l, &bracket_const(&l, &e(c), &e(a)), &e(b));
    let oracle = (0..3).map(|d| (t1[d] + t2[d] + t3[d]).abs()).fold(0.0, f64::max);
    let got = jacobi_defect(&alg, &[], (a, b, c));
    assert!(oracle > 1e-3, "random constants should break Jacobi");
    assert!((got - oracle).abs() < 1e-12, "{got} vs {oracle}");
}

#[test]
fn anchor_morphism_on_constant_classical_sections() {
    let a = GeneralizedLieAlgebroid::classical(2);
    let x = PullbackSection::constant(2, 2, &[1.0, -1.0]).to_gh(2, 2);
    let y = PullbackSection::constant(2, 2, &[0.5, 2.0]).to_gh(2, 2);
    assert!(anchor_morphism_defect(&a, &[0.1, 0.2, 0.3, 0.4], &x, &y).unwrap() < 1e-10);
}

#[test]
fn anchor_morphism_twisted_frame_and_corruption() {
    let p = presets::build("twisted_frame").unwrap();
    let a = p.system.algebroid().clone().with_fd(Fd::central(1e-4));
    let corrupted = {
        let s = a.structure().clone();
        a.with_structure(Field::new(2, &[2, 2, 2], move |k| s.eval(k).iter().map(|v| 1.1 * v).collect())).unwrap()
    };
    let mut rng = rng(14);
    let mut worst_corrupt: f64 = 0.0;
    for _ in 0..10 {
        let u = preset_point(&mut rng, &p);
        let x = random_section(&mut rng, 2, 2, 2);
        let y = random_section(&mut rng, 2, 2, 2);
        assert!(anchor_morphism_defect(&a, &u, &x, &y).unwrap() < 1e-6);
        worst_corrupt = worst_corrupt.max(anchor_morphism_defect(&corrupted, &u, &x, &y).unwrap());
    }
    assert!(worst_corrupt > 1e-3, "{worst_corrupt}");
}

#[test]
fn every_preset_satisfies_the_axioms() {
    let mut rng = rng(15);
    for name in NAMES {
        let p = presets::build(name).unwrap();
        let a = p.system.algebroid();
        let (m, r) = (p.m(), p.r());
        let pp = a.p();
        for _ in 0..50 {
            let u = preset_point(&mut rng, &p);
            let probe = (rng.gen_range(0..pp), rng.gen_range(0..pp), rng.gen_range(0..pp));
            assert!(jacobi_defect(a, &u[..m], probe) < 1e-6, "{name}");
            let x = random_section(&mut rng, m, pp, r);
            let y = random_section(&mut rng, m, pp, r);
            assert!(anchor_morphism_defect(a, &u, &x, &y).unwrap() < 1e-6, "{name}");
        }
    }
}

#[test]
fn frame_sections_reproduce_fd_frame_bracket() {
    let p = presets::build("twisted_frame").unwrap();
    let a = p.system.algebroid();
    let theta = twisted_theta();
    let u = [0.2, 0.5, 0.0, 0.0];
    let e = |i: usize| PullbackSection::constant(2, 2, &[if i == 0 { 1.0 } else { 0.0 }, if i == 1 { 1.0 } else { 0.0 }]);
    let b = pullback_bracket(a, &e(0), &e(1), &u).unwrap();
    // push the bracket back to a vector field and compare with the FD bracket of θ_1, θ_2
    let th = theta.eval_matrix(&u[..2]);
    let (t1, t2) = (theta.clone(), theta.clone());
    let fd = fd_vector_bracket(
        &u[..2],
        &move |q: &[f64]| t1.eval_matrix(q).column(0).iter().copied().collect(),
        &move |q: &[f64]| t2.eval_matrix(q).column(1).iter().copied().collect(),
    );
    assert!((th * b - fd).amax() < 1e-6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn stored_structure_is_antisymmetric(x1 in -0.5f64..0.5, x2 in -1.0f64..1.0) {
        let p = presets::build("twisted_frame").unwrap();
        let (_, l) = pullback_eval(p.system.algebroid(), &[x1, x2]).unwrap();
        for g in 0..2 { for a in 0..2 { for b in 0..2 {
            prop_assert_eq!(l[[g, a, b]], -l[[g, b, a]]);
        }}}
    }

    #[test]
    fn bracket_is_antisymmetric_and_bilinear(seed in any::<u64>(), s in -2.0f64..2.0) {
        let mut rng = rng(seed);
        let p = presets::build("twisted_frame").unwrap();
        let a = p.system.algebroid();
        let u = preset_point(&mut rng, &p);
        let z = |rng: &mut rand_chacha::ChaCha8Rng| PullbackSection::new(poly_field(rng, 4, &[2], 1.0));
        let (z1, z2, z3) = (z(&mut rng), z(&mut rng), z(&mut rng));
        let b12 = pullback_bracket(a, &z1, &z2, &u).unwrap();
        let b21 = pullback_bracket(a, &z2, &z1, &u).unwrap();
        prop_assert!((&b12 + &b21).amax() < 1e-12);
        let (c2, c3) = (z2.coeffs.clone(), z3.coeffs.clone());
        let comb = PullbackSection::new(Field::new(4, &[2], move |q| {
            c2.eval(q).iter().zip(c3.eval(q)).map(|(x, y)| x + s * y).collect()
        }));
        let lhs = pullback_bracket(a, &z1, &comb, &u).unwrap();
        let rhs = b12 + pullback_bracket(a, &z1, &z3, &u).unwrap() * s;
        prop_assert!((lhs - rhs).amax() < 1e-8);
    }
}
