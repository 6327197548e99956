mod common;

use bellcorr::spin::*;
use common::*;
use num_complex::Complex64;
use proptest::prelude::*;
use std::f64::consts::PI;

const TOL: f64 = 1e-9;

fn close_up_to_phase(a: &[Complex64], b: &[Complex64], tol: f64) -> bool {
    (fidelity(a, b) - 1.0).abs() < tol
}

#[test]
fn coherent_state_matches_product_state() {
    for n in 1..=10 {
        for &(theta, phi) in &[(0.3, 0.0), (PI / 2.0, 0.0), (2.2, -1.3), (PI, 0.4)] {
            let dicke = coherent_state(n, &SpinAxis::from_polar(theta, phi)).unwrap();
            let (s, co) = (0.5 * theta).sin_cos();
            let t = Tensor::product(n, c(co, 0.0), Complex64::from_polar(s, phi));
            assert!(close_up_to_phase(&t.to_dicke_amplitudes(), dicke.amplitudes(), TOL));
        }
    }
}

#[test]
fn oat_matches_tensor_product() {
    for n in 1..=10 {
        let s = coherent_state(n, &SpinAxis::X).unwrap();
        for &chi in &[0.0, 0.1, 0.37, 1.3] {
            let d = oat_evolve(&s, &OatParams { twist_angle: chi, n_atoms: n }).unwrap();
            let t = Tensor::from_dicke(&s).apply_diag(|m| Complex64::from_polar(1.0, -chi * m * m));
            let want = t.mean([1.0, 0.0, 0.0]);
            assert!((expect_spin(&d, &SpinAxis::X) - want).abs() < TOL);
            let law = 0.5 * n as f64 * chi.cos().powi(n as i32 - 1);
            assert!((want - law).abs() < TOL, "n={n} chi={chi}");
        }
    }
}

#[test]
fn oat_contrast_law_large_n() {
    for &n in &[50usize, 476, 1000] {
        let s = coherent_state(n, &SpinAxis::X).unwrap();
        for &chi in &[0.003, 0.02, 0.1] {
            let d = oat_evolve(&s, &OatParams { twist_angle: chi, n_atoms: n }).unwrap();
            let law = 0.5 * n as f64 * chi.cos().powi(n as i32 - 1);
            assert!((expect_spin(&d, &SpinAxis::X) - law).abs() < TOL);
            assert!((d.norm_sqr() - 1.0).abs() < 1e-10);
        }
    }
    let s = coherent_state(2, &SpinAxis::X).unwrap();
    let d = oat_evolve(&s, &OatParams { twist_angle: 0.7, n_atoms: 2 }).unwrap();
    assert!((expect_spin(&d, &SpinAxis::X) - 0.7f64.cos()).abs() < 1e-12);
    let s = coherent_state(8, &SpinAxis::X).unwrap();
    let d = oat_evolve(&s, &OatParams { twist_angle: 0.1, n_atoms: 8 }).unwrap();
    assert!((expect_spin(&d, &SpinAxis::X) - 4.0 * 0.1f64.cos().powi(7)).abs() < 1e-12);
}

#[test]
fn rotation_matches_tensor_product() {
    for n in 1..=10 {
        let s = random_state(n, 11 + n as u64);
        for &(alpha, phi) in &[(0.4, 0.0), (PI / 2.0, PI / 2.0), (2.9, 1.1), (-1.7, 4.0), (7.0, 0.3)] {
            let d = rotate(&s, &RotationPulse::new(alpha, phi).unwrap());
            let t = Tensor::from_dicke(&s).apply_each(spin_half_rotation(alpha, phi));
            let got = d.amplitudes();
            let want = t.to_dicke_amplitudes();
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).norm() < TOL, "n={n} alpha={alpha} phi={phi}");
            }
        }
    }
}

#[test]
fn expectations_match_tensor_product() {
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(5);
    for n in 1..=10 {
        let s = random_state(n, 100 + n as u64);
        let t = Tensor::from_dicke(&s);
        for _ in 0..5 {
            let v = random_unit(&mut rng);
            let axis = SpinAxis::new(v[0], v[1], v[2]).unwrap();
            assert!((expect_spin(&s, &axis) - t.mean(v)).abs() < 1e-10);
            assert!((expect_spin_sq(&s, &axis) - t.second(v)).abs() < 1e-10);
        }
        let p = z_distribution(&s);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        assert!(p.iter().all(|&x| x >= 0.0));
    }
}

#[test]
fn husimi_normalisation() {
    let n = 12;
    let s = oat_evolve(&coherent_state(n, &SpinAxis::X).unwrap(), &OatParams { twist_angle: 0.2, n_atoms: n })
        .unwrap();
    let (nt, np) = (200, 200);
    let mut grid = Vec::with_capacity(nt * np);
    for i in 0..nt {
        for j in 0..np {
            let theta = (i as f64 + 0.5) * PI / nt as f64;
            let phi = (j as f64 + 0.5) * 2.0 * PI / np as f64;
            grid.push((theta, phi));
        }
    }
    let q = husimi_q(&s, &grid).unwrap();
    let d_omega = (PI / nt as f64) * (2.0 * PI / np as f64);
    let total: f64 = q.iter().zip(&grid).map(|(v, (t, _))| v * t.sin() * d_omega).sum();
    let norm = (n as f64 + 1.0) / (4.0 * PI) * total;
    assert!((norm - 1.0).abs() < 1e-4, "{norm}");
    assert!(q.iter().all(|&v| (0.0..=1.0).contains(&v)));
}

#[test]
fn unitarity_at_large_n() {
    for &n in &[200usize, 476, 1000] {
        let s = oat_evolve(&coherent_state(n, &SpinAxis::X).unwrap(), &OatParams { twist_angle: 0.01, n_atoms: n })
            .unwrap();
        for &(alpha, phi) in &[(0.19, 0.0), (1.3, 1.0), (3.0, 2.0)] {
            let r = rotate(&s, &RotationPulse::new(alpha, phi).unwrap());
            assert!((r.norm_sqr() - 1.0).abs() < 1e-10, "n={n}");
        }
    }
}

fn state_strategy() -> impl Strategy<Value = DickeState> {
    (1usize..40, any::<u64>()).prop_map(|(n, seed)| random_state(n, seed))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rotation_composes(s in state_strategy(), a in -4.0f64..4.0, b in -4.0f64..4.0, phi in 0.0f64..6.3) {
        let r1 = rotate(&rotate(&s, &RotationPulse::new(b, phi).unwrap()), &RotationPulse::new(a, phi).unwrap());
        let r2 = rotate(&s, &RotationPulse::new(a + b, phi).unwrap());
        for (x, y) in r1.amplitudes().iter().zip(r2.amplitudes()) {
            prop_assert!((x - y).norm() < 1e-9);
        }
    }

    #[test]
    fn rotation_inverse(s in state_strategy(), a in -4.0f64..4.0, phi in 0.0f64..6.3) {
        let back = rotate(&rotate(&s, &RotationPulse::new(a, phi).unwrap()), &RotationPulse::new(-a, phi).unwrap());
        for (x, y) in back.amplitudes().iter().zip(s.amplitudes()) {
            prop_assert!((x - y).norm() < 1e-9);
        }
    }

    #[test]
    fn full_turn_gives_parity_phase(s in state_strategy(), phi in 0.0f64..6.3) {
        let r = rotate(&s, &RotationPulse::new(2.0 * PI, phi).unwrap());
        let sign = if s.n_atoms() % 2 == 0 { 1.0 } else { -1.0 };
        for (x, y) in r.amplitudes().iter().zip(s.amplitudes()) {
            prop_assert!((x - y * sign).norm() < 1e-9);
        }
    }

    #[test]
    fn evolution_preserves_norm(s in state_strategy(), chi in -3.0f64..3.0, a in -7.0f64..7.0) {
        let n = s.n_atoms();
        let e = oat_evolve(&s, &OatParams { twist_angle: chi, n_atoms: n }).unwrap();
        prop_assert!((e.norm_sqr() - 1.0).abs() < 1e-10);
        let r = rotate(&e, &RotationPulse::new(a, 0.3).unwrap());
        prop_assert!((r.norm_sqr() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn moments_within_physical_range(s in state_strategy(), t in 0.0f64..PI, p in 0.0f64..6.3) {
        let axis = SpinAxis::from_polar(t, p);
        let half = s.n_atoms() as f64 / 2.0;
        let m = expect_spin(&s, &axis);
        let m2 = expect_spin_sq(&s, &axis);
        prop_assert!(m.abs() <= half + 1e-9);
        prop_assert!(m2 >= 0.0 && m2 <= half * half + 1e-9);
    }
}
