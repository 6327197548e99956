mod common;

use bellcorr::spin::*;
use bellcorr::witness::*;
use common::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn axis(v: [f64; 3]) -> SpinAxis {
    SpinAxis::new(v[0], v[1], v[2]).unwrap()
}

#[test]
fn correlators_match_pairwise_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for n in 1..=8 {
        for k in 0..4 {
            let s = random_state(n, 1000 * n as u64 + k);
            let (av, nv) = (random_unit(&mut rng), random_unit(&mut rng));
            let (a, nn) = (axis(av), axis(nv));
            let c = correlators_from_state(&s, &a, &nn).unwrap();
            let m = m_axis(&a, &nn).as_array();
            let t = Tensor::from_dicke(&s);
            assert!((c.s0 - t.single_sum(nv)).abs() < 1e-9);
            assert!((c.s00 - t.pair_sum(nv, nv)).abs() < 1e-9);
            assert!((c.s11 - t.pair_sum(m, m)).abs() < 1e-9);
            assert!((c.s01 - t.pair_sum(nv, m)).abs() < 1e-9, "n={n}");
        }
    }
}

#[test]
fn witness_equals_inequality_on_random_draws() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for draw in 0..1000 {
        let n = rng.random_range(2..=60);
        let s = random_state(n, draw);
        let a = axis(random_unit(&mut rng));
        let mut nn = axis(random_unit(&mut rng));
        if expect_spin(&s, &nn) > 0.0 {
            nn = nn.neg();
        }
        let c = correlators_from_state(&s, &a, &nn).unwrap();
        let w = witness_from_state(&s, &a, &nn).unwrap();
        let nf = n as f64;
        assert!((w * nf - bell_lhs(&c) / 2.0).abs() < 1e-8);
        let cos = a.dot(&nn);
        let lhs = c.s00 + 2.0 * c.s01 + c.s11;
        let rhs = 16.0 * cos * cos * expect_spin_sq(&s, &a) - 4.0 * nf * cos * cos;
        assert!((lhs - rhs).abs() < 1e-8);
        assert!(c.s0.abs() <= nf + 1e-9);
        assert!(c.s00.abs() <= nf * (nf - 1.0) + 1e-8);
        assert!(c.s11.abs() <= nf * (nf - 1.0) + 1e-8);
        assert!(c.s01.abs() <= nf * nf + 1e-8);
    }
}

#[test]
fn coherent_states_never_violate() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..10_000 {
        let n = rng.random_range(1..=30);
        let s = coherent_state(n, &axis(random_unit(&mut rng))).unwrap();
        let a = axis(random_unit(&mut rng));
        let nn = axis(random_unit(&mut rng));
        let m = moments_from_state(&s, &a, &nn).unwrap();
        assert!(witness_value(&m) >= -1e-12);
    }
}

fn disk_grid() -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for i in 0..200 {
        let b = i as f64 / 199.0;
        for j in 0..200 {
            let a = -1.0 + 2.0 * j as f64 / 199.0;
            if a * a + b * b <= 1.0 {
                out.push((b, a));
            }
        }
    }
    out
}

#[test]
fn z_bound_matches_direct_maximisation() {
    let mut worst = 0.0f64;
    for (b, a) in disk_grid() {
        let z = z_bound(b, a).unwrap();
        let d = z_direct(b, a);
        worst = worst.max((z - d).abs());
        assert!((z - d).abs() < 1e-8, "B={b} A={a}: {z} vs {d}");
    }
    assert!(worst < 1e-8);
}

#[test]
fn z_bound_monotone() {
    let h = 1e-4;
    for (b, a) in disk_grid() {
        let z = z_bound(b, a).unwrap();
        if (b + h).powi(2) + a * a <= 1.0 {
            assert!(z_bound(b + h, a).unwrap() - z >= -1e-12, "B={b} A={a}");
        }
        let up = a.abs() + h;
        if b * b + up * up <= 1.0 {
            let dz = z_bound(b, up).unwrap() - z_bound(b, a.abs()).unwrap();
            assert!(dz >= h * (1.0 - 1e-6), "B={b} A={a} dz/h={}", dz / h);
        }
    }
}

#[test]
fn analytic_curve_minimum() {
    let grid: Vec<f64> = (0..=18000).map(|i| (i as f64 * 0.01).to_radians()).collect();
    let curve = witness_curve_from_moments(0.980, 0.272, &grid);
    let (t, w) = curve.iter().copied().fold((0.0, f64::INFINITY), |b, p| if p.1 < b.1 { p } else { b });
    assert!((w + 0.058).abs() < 1e-3, "{w}");
    let deg = t.to_degrees();
    assert!((deg - 137.7).abs() < 0.5 || (deg - 42.3).abs() < 0.5, "{deg}");
}

#[test]
fn ensemble_at_mixing_threshold_is_zero() {
    let n = 60;
    let a = SpinAxis::Y;
    let t = 128f64.to_radians();
    let nn = SpinAxis::in_plane(&a, &SpinAxis::X, t);
    let twisted =
        oat_evolve(&coherent_state(n, &SpinAxis::X).unwrap(), &OatParams { twist_angle: 0.04, n_atoms: n }).unwrap();
    // align the squeezed quadrature with y by a scan over x-rotations
    let squeezed = (0..360)
        .map(|i| rotate(&twisted, &RotationPulse::new((i as f64 * 0.5).to_radians(), 0.0).unwrap()))
        .min_by(|p, q| expect_spin_sq(p, &a).total_cmp(&expect_spin_sq(q, &a)))
        .unwrap();
    let up = coherent_state(n, &a).unwrap();
    let w1 = witness_from_state(&squeezed, &a, &nn).unwrap();
    let w2 = witness_from_state(&up, &a, &nn).unwrap();
    assert!(w1 < 0.0 && w2 > 0.0, "{w1} {w2}");
    let q = -w1 / (w2 - w1);
    let e = MixedEnsemble::new(vec![(1.0 - q, squeezed), (q, up)]).unwrap();
    assert!(witness_from_state(&e, &a, &nn).unwrap().abs() < 1e-9);
}

proptest! {
    #[test]
    fn ensemble_is_linear(n1 in 1usize..30, n2 in 1usize..30, w in 0.0f64..1.0, t in 0.0f64..PI, s1 in any::<u64>(), s2 in any::<u64>()) {
        let x = random_state(n1, s1);
        let y = random_state(n2, s2);
        let a = SpinAxis::Z;
        let nn = SpinAxis::from_polar(t, 0.4);
        let e = MixedEnsemble::new(vec![(w, x.clone()), (1.0 - w, y.clone())]).unwrap();
        let got = witness_from_state(&e, &a, &nn).unwrap();
        let want = w * witness_from_state(&x, &a, &nn).unwrap() + (1.0 - w) * witness_from_state(&y, &a, &nn).unwrap();
        prop_assert_eq!(got, want);
    }

    #[test]
    fn z_bound_between_bounds(r in 0.0f64..1.0, phi in 0.0f64..(PI / 2.0)) {
        let (b, a) = (r * phi.cos(), r * phi.sin());
        let z = z_bound(b, a).unwrap();
        let perp = (1.0 - (1.0 - b * b).sqrt()) / 2.0;
        prop_assert!(z >= a - 1e-12 && z <= 1.0 + 1e-12);
        prop_assert!(z >= perp - 1e-12);
    }
}
