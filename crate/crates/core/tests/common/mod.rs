//! Independent reference implementations used only by tests.
#![allow(dead_code)]

use bellcorr::spin::DickeState;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type C = Complex64;

pub fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

/// Full `2^N` state vector; bit `k` set means qubit `k` is down.
#[derive(Clone, Debug)]
pub struct Tensor {
    pub n: usize,
    pub psi: Vec<C>,
}

fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

impl Tensor {
    pub fn from_dicke(state: &DickeState) -> Tensor {
        let n = state.n_atoms();
        let amps = state.amplitudes();
        let psi = (0..1usize << n)
            .map(|idx| {
                let p = idx.count_ones() as usize;
                amps[p] / binom(n, p).sqrt()
            })
            .collect();
        Tensor { n, psi }
    }

    /// Projects back onto the symmetric subspace (exact for symmetric input).
    pub fn to_dicke_amplitudes(&self) -> Vec<C> {
        let mut out = vec![c(0.0, 0.0); self.n + 1];
        for (idx, a) in self.psi.iter().enumerate() {
            out[idx.count_ones() as usize] += a;
        }
        out.iter()
            .enumerate()
            .map(|(p, s)| s / binom(self.n, p).sqrt())
            .collect()
    }

    /// Product of single-qubit states `(up, down)`.
    pub fn product(n: usize, up: C, down: C) -> Tensor {
        let psi = (0..1usize << n)
            .map(|idx| {
                let d = idx.count_ones() as i32;
                up.powi(n as i32 - d) * down.powi(d)
            })
            .collect();
        Tensor { n, psi }
    }

    /// Applies the same 2x2 unitary `[[u00,u01],[u10,u11]]` (rows: up, down)
    /// to every qubit.
    pub fn apply_each(&self, u: [[C; 2]; 2]) -> Tensor {
        let mut psi = self.psi.clone();
        for k in 0..self.n {
            let bit = 1usize << k;
            for idx in 0..psi.len() {
                if idx & bit == 0 {
                    let a = psi[idx];
                    let b = psi[idx | bit];
                    psi[idx] = u[0][0] * a + u[0][1] * b;
                    psi[idx | bit] = u[1][0] * a + u[1][1] * b;
                }
            }
        }
        Tensor { n: self.n, psi }
    }

    fn sz_of(&self, idx: usize) -> f64 {
        0.5 * self.n as f64 - idx.count_ones() as f64
    }

    pub fn apply_diag(&self, f: impl Fn(f64) -> C) -> Tensor {
        let psi = self
            .psi
            .iter()
            .enumerate()
            .map(|(idx, a)| a * f(self.sz_of(idx)))
            .collect();
        Tensor { n: self.n, psi }
    }

    /// `Σ_k v·σ^(k)/2` applied to the state.
    pub fn apply_collective(&self, v: [f64; 3]) -> Vec<C> {
        let mut out = vec![c(0.0, 0.0); self.psi.len()];
        for k in 0..self.n {
            let single = single_op(v);
            let bit = 1usize << k;
            for idx in 0..self.psi.len() {
                if idx & bit == 0 {
                    let a = self.psi[idx];
                    let b = self.psi[idx | bit];
                    out[idx] += single[0][0] * a + single[0][1] * b;
                    out[idx | bit] += single[1][0] * a + single[1][1] * b;
                }
            }
        }
        out
    }

    pub fn mean(&self, v: [f64; 3]) -> f64 {
        let s = self.apply_collective(v);
        self.psi.iter().zip(&s).map(|(a, b)| (a.conj() * b).re).sum()
    }

    pub fn second(&self, v: [f64; 3]) -> f64 {
        self.apply_collective(v).iter().map(|x| x.norm_sqr()).sum()
    }

    /// `Σ_{i≠j} ⟨σ_u^(i) σ_v^(j)⟩`, computed pair by pair.
    pub fn pair_sum(&self, u: [f64; 3], v: [f64; 3]) -> f64 {
        let su = pauli(u);
        let sv = pauli(v);
        let mut total = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                if i == j {
                    continue;
                }
                let after_j = apply_on(&self.psi, j, sv);
                let after_i = apply_on(&after_j, i, su);
                total += self
                    .psi
                    .iter()
                    .zip(&after_i)
                    .map(|(a, b)| (a.conj() * b).re)
                    .sum::<f64>();
            }
        }
        total
    }

    /// `Σ_i ⟨σ_u^(i)⟩`.
    pub fn single_sum(&self, u: [f64; 3]) -> f64 {
        let su = pauli(u);
        (0..self.n)
            .map(|i| {
                let after = apply_on(&self.psi, i, su);
                self.psi
                    .iter()
                    .zip(&after)
                    .map(|(a, b)| (a.conj() * b).re)
                    .sum::<f64>()
            })
            .sum()
    }
}

fn apply_on(psi: &[C], k: usize, m: [[C; 2]; 2]) -> Vec<C> {
    let bit = 1usize << k;
    let mut out = psi.to_vec();
    for idx in 0..psi.len() {
        if idx & bit == 0 {
            let a = psi[idx];
            let b = psi[idx | bit];
            out[idx] = m[0][0] * a + m[0][1] * b;
            out[idx | bit] = m[1][0] * a + m[1][1] * b;
        }
    }
    out
}

/// `v·σ` in the (up, down) basis.
pub fn pauli(v: [f64; 3]) -> [[C; 2]; 2] {
    [
        [c(v[2], 0.0), c(v[0], -v[1])],
        [c(v[0], v[1]), c(-v[2], 0.0)],
    ]
}

fn single_op(v: [f64; 3]) -> [[C; 2]; 2] {
    let p = pauli(v);
    [[p[0][0] * 0.5, p[0][1] * 0.5], [p[1][0] * 0.5, p[1][1] * 0.5]]
}

/// `exp(-i α (cos φ σ_x + sin φ σ_y)/2)`.
pub fn spin_half_rotation(alpha: f64, phi: f64) -> [[C; 2]; 2] {
    let (s, co) = (0.5 * alpha).sin_cos();
    let mi = c(0.0, -s);
    [
        [c(co, 0.0), mi * C::from_polar(1.0, -phi)],
        [mi * C::from_polar(1.0, phi), c(co, 0.0)],
    ]
}

pub fn random_state(n: usize, seed: u64) -> DickeState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let amps = (0..=n)
        .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    DickeState::normalized(n, amps).unwrap()
}

pub fn random_unit(rng: &mut impl Rng) -> [f64; 3] {
    loop {
        let v: [f64; 3] = [
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ];
        let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if r > 0.1 && r <= 1.0 {
            return [v[0] / r, v[1] / r, v[2] / r];
        }
    }
}

/// `|⟨a|b⟩|` for amplitude vectors.
pub fn fidelity(a: &[C], b: &[C]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum::<C>().norm()
}

/// `max_{ϑ∈[0,π]} [B sin ϑ - A cos ϑ - sin²ϑ] / cos²ϑ` by a dense grid and
/// golden-section refinement of every local maximum.
pub fn z_direct(b: f64, a: f64) -> f64 {
    let f = |t: f64| {
        let (s, co) = t.sin_cos();
        (b * s - a * co - s * s) / (co * co)
    };
    let n = 20000;
    let h = std::f64::consts::PI / n as f64;
    let vals: Vec<f64> = (0..=n).map(|i| f(i as f64 * h)).collect();
    let mut best = vals[0].max(vals[n]);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for i in 1..n {
        if vals[i] >= vals[i - 1] && vals[i] >= vals[i + 1] && vals[i].is_finite() {
            let (mut lo, mut hi) = ((i - 1) as f64 * h, (i + 1) as f64 * h);
            for _ in 0..100 {
                let x1 = hi - g * (hi - lo);
                let x2 = lo + g * (hi - lo);
                if f(x1) > f(x2) {
                    hi = x2;
                } else {
                    lo = x1;
                }
            }
            best = best.max(f(0.5 * (lo + hi))).max(vals[i]);
        }
    }
    best
}
