//! Permutation-symmetric states of `N` spin-1/2 particles in the Dicke basis.
//!
//! Amplitude index `p` runs over `S_z` eigenvalues `m = N/2 - p`, so `p = 0`
//! is the state with every spin up and `p` counts the spins pointing down.

mod wigner;

pub use wigner::{small_d, SmallD};

use crate::error::{invalid, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

const NORM_TOL: f64 = 1e-10;
const AXIS_TOL: f64 = 1e-12;

/// A unit vector on the Bloch sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct SpinAxis {
    x: f64,
    y: f64,
    z: f64,
}

impl SpinAxis {
    pub const X: SpinAxis = SpinAxis { x: 1.0, y: 0.0, z: 0.0 };
    pub const Y: SpinAxis = SpinAxis { x: 0.0, y: 1.0, z: 0.0 };
    pub const Z: SpinAxis = SpinAxis { x: 0.0, y: 0.0, z: 1.0 };

    /// Accepts only vectors whose norm is 1 within `1e-12`.
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        let norm = (x * x + y * y + z * z).sqrt();
        if !norm.is_finite() || (norm - 1.0).abs() > AXIS_TOL {
            return Err(invalid(format!("axis ({x}, {y}, {z}) has norm {norm}, expected 1")));
        }
        Ok(SpinAxis { x, y, z })
    }

    /// Normalises an arbitrary nonzero vector.
    pub fn normalized(x: f64, y: f64, z: f64) -> Result<Self> {
        let norm = (x * x + y * y + z * z).sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(invalid("cannot normalise a zero or non-finite vector"));
        }
        Ok(SpinAxis { x: x / norm, y: y / norm, z: z / norm })
    }

    /// Direction with polar angle `theta` from `+z` and azimuth `phi`.
    pub fn from_polar(theta: f64, phi: f64) -> Self {
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        SpinAxis { x: st * cp, y: st * sp, z: ct }
    }

    pub fn x(&self) -> f64 {
        self.x
    }
    pub fn y(&self) -> f64 {
        self.y
    }
    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn dot(&self, other: &SpinAxis) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(&self, other: &SpinAxis) -> SpinAxis {
        SpinAxis {
            x: self.y * other.z - self.z * other.y,
            y: self.z * other.x - self.x * other.z,
            z: self.x * other.y - self.y * other.x,
        }
    }

    pub fn neg(&self) -> SpinAxis {
        SpinAxis { x: -self.x, y: -self.y, z: -self.z }
    }

    /// `a cos θ + b sin θ`; `a` and `b` are assumed orthonormal.
    pub fn in_plane(a: &SpinAxis, b: &SpinAxis, theta: f64) -> SpinAxis {
        let (s, c) = theta.sin_cos();
        SpinAxis {
            x: a.x * c + b.x * s,
            y: a.y * c + b.y * s,
            z: a.z * c + b.z * s,
        }
    }

    pub fn polar(&self) -> (f64, f64) {
        (self.z.clamp(-1.0, 1.0).acos(), self.y.atan2(self.x))
    }
}

impl TryFrom<[f64; 3]> for SpinAxis {
    type Error = crate::Error;
    fn try_from(v: [f64; 3]) -> Result<Self> {
        SpinAxis::new(v[0], v[1], v[2])
    }
}

impl From<SpinAxis> for [f64; 3] {
    fn from(a: SpinAxis) -> Self {
        a.as_array()
    }
}

/// Rabi pulse `R(angle, axis_phase) = exp(-i angle (cos φ S_x + sin φ S_y))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotationPulse {
    pub angle: f64,
    pub axis_phase: f64,
}

impl RotationPulse {
    pub fn new(angle: f64, axis_phase: f64) -> Result<Self> {
        if !angle.is_finite() || !axis_phase.is_finite() {
            return Err(invalid("pulse angle and phase must be finite"));
        }
        Ok(RotationPulse { angle, axis_phase: axis_phase.rem_euclid(2.0 * std::f64::consts::PI) })
    }
}

/// One-axis twisting `H = χ S_z²` applied for a dimensionless time `χt`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OatParams {
    pub twist_angle: f64,
    pub n_atoms: usize,
}

/// Pure symmetric state of `n_atoms` spins.
#[derive(Debug, Clone, PartialEq)]
pub struct DickeState {
    n_atoms: usize,
    amplitudes: Vec<Complex64>,
}

#[derive(Serialize, Deserialize)]
struct DickeStateRepr {
    n_atoms: usize,
    amplitudes: Vec<[f64; 2]>,
}

impl Serialize for DickeState {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        DickeStateRepr {
            n_atoms: self.n_atoms,
            amplitudes: self.amplitudes.iter().map(|c| [c.re, c.im]).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for DickeState {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = DickeStateRepr::deserialize(d)?;
        let amps = repr.amplitudes.iter().map(|v| Complex64::new(v[0], v[1])).collect();
        DickeState::new(repr.n_atoms, amps).map_err(serde::de::Error::custom)
    }
}

impl DickeState {
    /// Validates length `n_atoms + 1` and unit norm within `1e-10`.
    pub fn new(n_atoms: usize, amplitudes: Vec<Complex64>) -> Result<Self> {
        if n_atoms == 0 {
            return Err(invalid("n_atoms must be at least 1"));
        }
        if amplitudes.len() != n_atoms + 1 {
            return Err(invalid(format!(
                "expected {} amplitudes for {} atoms, got {}",
                n_atoms + 1,
                n_atoms,
                amplitudes.len()
            )));
        }
        let norm: f64 = amplitudes.iter().map(|c| c.norm_sqr()).sum();
        if !norm.is_finite() || (norm - 1.0).abs() > NORM_TOL {
            return Err(invalid(format!("state norm {norm} differs from 1")));
        }
        Ok(DickeState { n_atoms, amplitudes })
    }

    /// Rescales the amplitudes to unit norm.
    pub fn normalized(n_atoms: usize, mut amplitudes: Vec<Complex64>) -> Result<Self> {
        let norm: f64 = amplitudes.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(invalid("cannot normalise a zero state"));
        }
        amplitudes.iter_mut().for_each(|c| *c /= norm);
        DickeState::new(n_atoms, amplitudes)
    }

    /// The Dicke state `|N/2, m⟩` with `m = N/2 - p`.
    pub fn basis(n_atoms: usize, p: usize) -> Result<Self> {
        if p > n_atoms {
            return Err(invalid(format!("basis index {p} exceeds {n_atoms}")));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); n_atoms + 1];
        amps[p] = Complex64::new(1.0, 0.0);
        DickeState::new(n_atoms, amps)
    }

    pub fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|c| c.norm_sqr()).sum()
    }

    /// `S_z` eigenvalue of amplitude index `p`.
    pub fn m_of(&self, p: usize) -> f64 {
        0.5 * self.n_atoms as f64 - p as f64
    }

    pub fn overlap(&self, other: &DickeState) -> Complex64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// Copy with the global phase fixed so the largest amplitude is real and
    /// nonnegative.
    pub fn phase_fixed(&self) -> DickeState {
        let big = self
            .amplitudes
            .iter()
            .copied()
            .max_by(|a, b| a.norm_sqr().total_cmp(&b.norm_sqr()))
            .unwrap_or(Complex64::new(1.0, 0.0));
        let phase = if big.norm() > 0.0 { big.conj() / big.norm() } else { Complex64::new(1.0, 0.0) };
        DickeState {
            n_atoms: self.n_atoms,
            amplitudes: self.amplitudes.iter().map(|c| c * phase).collect(),
        }
    }

    /// Applies `exp(-i angle S_z)`.
    pub fn rotate_z(&self, angle: f64) -> DickeState {
        let amplitudes = self
            .amplitudes
            .iter()
            .enumerate()
            .map(|(p, c)| c * Complex64::from_polar(1.0, -angle * self.m_of(p)))
            .collect();
        DickeState { n_atoms: self.n_atoms, amplitudes }
    }

    /// `(v · S) |ψ⟩` for an arbitrary (not necessarily unit) vector `v`.
    pub(crate) fn apply_spin(&self, v: [f64; 3]) -> Vec<Complex64> {
        let n = self.n_atoms;
        let psi = &self.amplitudes;
        // S_+ = S_x + i S_y raises m (lowers p)
        let cp = Complex64::new(0.5 * v[0], -0.5 * v[1]);
        let cm = Complex64::new(0.5 * v[0], 0.5 * v[1]);
        (0..=n)
            .map(|p| {
                let mut out = psi[p] * (v[2] * self.m_of(p));
                if p < n {
                    let a = (((p + 1) * (n - p)) as f64).sqrt();
                    out += cp * psi[p + 1] * a;
                }
                if p > 0 {
                    let b = ((p * (n - p + 1)) as f64).sqrt();
                    out += cm * psi[p - 1] * b;
                }
                out
            })
            .collect()
    }

    /// `⟨v · S⟩`.
    pub(crate) fn mean_spin_vec(&self, v: [f64; 3]) -> f64 {
        let sv = self.apply_spin(v);
        self.amplitudes.iter().zip(&sv).map(|(a, b)| (a.conj() * b).re).sum()
    }

    /// `⟨(v · S)²⟩ = ||(v · S) ψ||²`.
    pub(crate) fn second_moment_vec(&self, v: [f64; 3]) -> f64 {
        self.apply_spin(v).iter().map(|c| c.norm_sqr()).sum()
    }
}

/// Spin coherent state of `n_atoms` spins all pointing along `axis`.
pub fn coherent_state(n_atoms: usize, axis: &SpinAxis) -> Result<DickeState> {
    if n_atoms < 1 {
        return Err(invalid("coherent state needs at least one atom"));
    }
    let (theta, phi) = axis.polar();
    Ok(coherent_amplitudes(n_atoms, theta, phi))
}

pub(crate) fn coherent_amplitudes(n_atoms: usize, theta: f64, phi: f64) -> DickeState {
    let (s, c) = (0.5 * theta).sin_cos();
    let (ls, lc) = (s.abs().ln(), c.abs().ln());
    let mut lnbin = 0.0f64;
    let amplitudes = (0..=n_atoms)
        .map(|p| {
            if p > 0 {
                lnbin += ((n_atoms - p + 1) as f64).ln() - (p as f64).ln();
            }
            let down = p as f64;
            let up = (n_atoms - p) as f64;
            let mag = if (s == 0.0 && p > 0) || (c == 0.0 && p < n_atoms) {
                0.0
            } else {
                let lm = 0.5 * lnbin
                    + if up > 0.0 { up * lc } else { 0.0 }
                    + if down > 0.0 { down * ls } else { 0.0 };
                lm.exp()
            };
            let sign = if (s < 0.0 && p % 2 == 1) ^ (c < 0.0 && (n_atoms - p) % 2 == 1) { -1.0 } else { 1.0 };
            Complex64::from_polar(sign * mag, phi * down)
        })
        .collect();
    DickeState { n_atoms, amplitudes }
}

/// Multiplies each amplitude by `exp(-i χt m²)`.
pub fn oat_evolve(state: &DickeState, params: &OatParams) -> Result<DickeState> {
    if params.n_atoms != state.n_atoms {
        return Err(invalid(format!(
            "twisting parameters are for {} atoms, state has {}",
            params.n_atoms, state.n_atoms
        )));
    }
    if !params.twist_angle.is_finite() {
        return Err(invalid("twist angle must be finite"));
    }
    let amplitudes = state
        .amplitudes
        .iter()
        .enumerate()
        .map(|(p, c)| {
            let m = state.m_of(p);
            c * Complex64::from_polar(1.0, -params.twist_angle * m * m)
        })
        .collect();
    Ok(DickeState { n_atoms: state.n_atoms, amplitudes })
}

/// Applies `exp(-i α S_φ)` using `exp(-iα S_φ) = U exp(-iα S_y) U†` with
/// `U = exp(-i (φ - π/2) S_z)`.
pub fn rotate(state: &DickeState, pulse: &RotationPulse) -> DickeState {
    let d = small_d(state.n_atoms, pulse.angle);
    rotate_with(state, &d, pulse.axis_phase)
}

/// Same as [`rotate`] with a precomputed `d(α)` for this atom number.
pub fn rotate_with(state: &DickeState, d: &SmallD, axis_phase: f64) -> DickeState {
    assert_eq!(d.dim(), state.n_atoms + 1, "d-matrix dimension mismatch");
    let frame = axis_phase - FRAC_PI_2;
    let into_frame = state.rotate_z(-frame);
    let rotated = DickeState { n_atoms: state.n_atoms, amplitudes: d.apply(&into_frame.amplitudes) };
    rotated.rotate_z(frame)
}

/// `⟨S_axis⟩`.
pub fn expect_spin(state: &DickeState, axis: &SpinAxis) -> f64 {
    state.mean_spin_vec(axis.as_array())
}

/// `⟨S_axis²⟩`.
pub fn expect_spin_sq(state: &DickeState, axis: &SpinAxis) -> f64 {
    state.second_moment_vec(axis.as_array())
}

/// Probabilities `|c_p|²` of the projective `S_z` measurement, index `p`
/// corresponding to `m = N/2 - p`.
pub fn z_distribution(state: &DickeState) -> Vec<f64> {
    state.amplitudes.iter().map(|c| c.norm_sqr()).collect()
}

/// Husimi function `|⟨θ,φ|ψ⟩|²` on a list of `(θ, φ)` points.
pub fn husimi_q(state: &DickeState, polar_grid: &[(f64, f64)]) -> Result<Vec<f64>> {
    if polar_grid.is_empty() {
        return Err(invalid("Husimi grid is empty"));
    }
    Ok(polar_grid
        .iter()
        .map(|&(theta, phi)| {
            let probe = coherent_amplitudes(state.n_atoms, theta, phi);
            probe.overlap(state).norm_sqr().min(1.0)
        })
        .collect())
}
