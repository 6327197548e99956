//! The symmetric two-setting Bell inequality, its collective-spin witness,
//! and the bound `Z` for measurements along perpendicular axes.
//!
//! Correlators for a pure state and measurement directions `n` (setting 0)
//! and `m` (setting 1):
//!
//! ```text
//! S0  = Σ_i ⟨σ_n^(i)⟩                = 2⟨S_n⟩
//! S00 = Σ_{i≠j} ⟨σ_n^(i) σ_n^(j)⟩    = 4⟨S_n²⟩ - N
//! S11 = Σ_{i≠j} ⟨σ_m^(i) σ_m^(j)⟩    = 4⟨S_m²⟩ - N
//! S01 = Σ_{i≠j} ⟨σ_n^(i) σ_m^(j)⟩    = ⟨(S_n+S_m)²⟩ - ⟨(S_n-S_m)²⟩ - N n·m
//! ```
//!
//! With `m = 2(a·n)a - n` the inequality
//! `2 S0 + S00/2 + S01 + S11/2 + 2N ≥ 0` depends on `S_m` only through
//! `S_a`, which gives the witness in terms of `⟨S_n⟩` and `⟨S_a²⟩`.

use crate::error::{invalid, Error, Result};
use crate::spin::{DickeState, SpinAxis};
use serde::{Deserialize, Serialize};

const UNIT_TOL: f64 = 1e-12;
const ORTHO_TOL: f64 = 1e-10;
const WEIGHT_TOL: f64 = 1e-12;

/// The four permutation-symmetric correlators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelatorSet {
    pub s0: f64,
    pub s00: f64,
    pub s01: f64,
    pub s11: f64,
    pub n_atoms: usize,
}

/// Scaled collective-spin statistics along a frame `(a, b, c)` and a
/// measurement direction `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSet {
    pub c_n: f64,
    pub c_a: f64,
    pub c_b: f64,
    pub c_c: f64,
    pub zeta_sq_a: f64,
    pub cos_theta: f64,
}

impl MomentSet {
    /// Moments with only the quantities entering the witness.
    pub fn for_witness(c_n: f64, zeta_sq_a: f64, cos_theta: f64) -> Self {
        MomentSet { c_n, c_a: 0.0, c_b: 0.0, c_c: 0.0, zeta_sq_a, cos_theta }
    }
}

/// Probabilistic mixture of symmetric states, possibly with different atom
/// numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedEnsemble {
    components: Vec<(f64, DickeState)>,
}

impl MixedEnsemble {
    pub fn new(components: Vec<(f64, DickeState)>) -> Result<Self> {
        if components.is_empty() {
            return Err(invalid("ensemble has no components"));
        }
        if components.iter().any(|(w, _)| !(w.is_finite() && *w >= 0.0)) {
            return Err(invalid("ensemble weights must be finite and nonnegative"));
        }
        let total: f64 = components.iter().map(|(w, _)| w).sum();
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(invalid(format!("ensemble weights sum to {total}, expected 1")));
        }
        Ok(MixedEnsemble { components })
    }

    pub fn components(&self) -> &[(f64, DickeState)] {
        &self.components
    }
}

fn check_unit(axis: &SpinAxis, name: &str) -> Result<()> {
    let norm = axis.dot(axis).sqrt();
    if (norm - 1.0).abs() > UNIT_TOL {
        return Err(invalid(format!("axis {name} has norm {norm}")));
    }
    Ok(())
}

fn add(u: [f64; 3], v: [f64; 3], s: f64) -> [f64; 3] {
    [u[0] + s * v[0], u[1] + s * v[1], u[2] + s * v[2]]
}

/// Reflection of `n` through `a`: `2(a·n)a - n`.
pub fn m_axis(a: &SpinAxis, n: &SpinAxis) -> SpinAxis {
    let k = 2.0 * a.dot(n);
    let v = add(a.as_array().map(|x| k * x), n.as_array(), -1.0);
    // renormalise only to strip rounding
    SpinAxis::normalized(v[0], v[1], v[2]).unwrap_or(n.neg())
}

pub fn correlators_from_state(state: &DickeState, a: &SpinAxis, n: &SpinAxis) -> Result<CorrelatorSet> {
    check_unit(a, "a")?;
    check_unit(n, "n")?;
    let m = m_axis(a, n);
    let nf = state.n_atoms() as f64;
    let (nv, mv) = (n.as_array(), m.as_array());
    let s0 = 2.0 * state.mean_spin_vec(nv);
    let s00 = 4.0 * state.second_moment_vec(nv) - nf;
    let s11 = 4.0 * state.second_moment_vec(mv) - nf;
    let s01 = state.second_moment_vec(add(nv, mv, 1.0)) - state.second_moment_vec(add(nv, mv, -1.0))
        - nf * n.dot(&m);
    Ok(CorrelatorSet { s0, s00, s01, s11, n_atoms: state.n_atoms() })
}

/// Left-hand side of the inequality; negative values are Bell correlated.
pub fn bell_lhs(c: &CorrelatorSet) -> f64 {
    2.0 * c.s0 + 0.5 * c.s00 + c.s01 + 0.5 * c.s11 + 2.0 * c.n_atoms as f64
}

/// `W = -|C_n| + (a·n)² ζ_a² + 1 - (a·n)²`.
pub fn witness_value(m: &MomentSet) -> f64 {
    let c2 = m.cos_theta * m.cos_theta;
    -m.c_n.abs() + c2 * m.zeta_sq_a + 1.0 - c2
}

/// Completes `a` to a right-handed frame `(a, b, c)` with `n` in the a-b
/// plane.
fn frame(a: &SpinAxis, n: &SpinAxis) -> (SpinAxis, SpinAxis) {
    let cos = a.dot(n);
    let perp = add(n.as_array(), a.as_array(), -cos);
    let b = SpinAxis::normalized(perp[0], perp[1], perp[2]).unwrap_or_else(|_| {
        let trial = if a.x().abs() < 0.9 { SpinAxis::X } else { SpinAxis::Y };
        let t = add(trial.as_array(), a.as_array(), -a.dot(&trial));
        SpinAxis::normalized(t[0], t[1], t[2]).expect("nonparallel trial axis")
    });
    let c = a.cross(&b);
    (b, c)
}

/// Scaled moments of a pure state: `C_d = 2⟨S_d⟩/N`, `ζ_a² = 4⟨S_a²⟩/N`.
pub fn moments_from_state(state: &DickeState, a: &SpinAxis, n: &SpinAxis) -> Result<MomentSet> {
    check_unit(a, "a")?;
    check_unit(n, "n")?;
    let nf = state.n_atoms() as f64;
    let (b, c) = frame(a, n);
    Ok(MomentSet {
        c_n: 2.0 * state.mean_spin_vec(n.as_array()) / nf,
        c_a: 2.0 * state.mean_spin_vec(a.as_array()) / nf,
        c_b: 2.0 * state.mean_spin_vec(b.as_array()) / nf,
        c_c: 2.0 * state.mean_spin_vec(c.as_array()) / nf,
        zeta_sq_a: 4.0 * state.second_moment_vec(a.as_array()) / nf,
        cos_theta: a.dot(n),
    })
}

/// States on which the witness can be evaluated.
pub trait WitnessTarget {
    fn witness(&self, a: &SpinAxis, n: &SpinAxis) -> Result<f64>;
}

impl WitnessTarget for DickeState {
    fn witness(&self, a: &SpinAxis, n: &SpinAxis) -> Result<f64> {
        moments_from_state(self, a, n).map(|m| witness_value(&m))
    }
}

impl WitnessTarget for MixedEnsemble {
    /// Weighted sum of the component witnesses, each with its own `N`.
    fn witness(&self, a: &SpinAxis, n: &SpinAxis) -> Result<f64> {
        self.components
            .iter()
            .try_fold(0.0, |acc, (w, s)| Ok(acc + w * s.witness(a, n)?))
    }
}

/// `⟨W⟩` for a pure state or ensemble.
pub fn witness_from_state<T: WitnessTarget + ?Sized>(target: &T, a: &SpinAxis, n: &SpinAxis) -> Result<f64> {
    target.witness(a, n)
}

/// Witness along `n(θ) = a cos θ + b sin θ` for each `θ` in the grid.
pub fn witness_curve<T: WitnessTarget + ?Sized>(
    target: &T,
    a: &SpinAxis,
    b: &SpinAxis,
    theta_grid: &[f64],
) -> Result<Vec<(f64, f64)>> {
    check_unit(a, "a")?;
    check_unit(b, "b")?;
    if a.dot(b).abs() > ORTHO_TOL {
        return Err(invalid(format!("frame axes are not orthogonal (a·b = {})", a.dot(b))));
    }
    theta_grid
        .iter()
        .map(|&t| Ok((t, target.witness(a, &SpinAxis::in_plane(a, b, t))?)))
        .collect()
}

/// Witness curve for a state specified only by its contrast along `b` and
/// its second moment along `a` (`C_a = 0`).
pub fn witness_curve_from_moments(contrast: f64, zeta_sq_a: f64, theta_grid: &[f64]) -> Vec<(f64, f64)> {
    theta_grid
        .iter()
        .map(|&t| {
            let m = MomentSet::for_witness(contrast * t.sin(), zeta_sq_a, t.cos());
            (t, witness_value(&m))
        })
        .collect()
}

/// `ζ_a² - (1 - √(1 - C_b²))/2`; negative values are Bell correlated.
pub fn perpendicular_witness(zeta_sq_a: f64, c_b: f64) -> Result<f64> {
    if !(c_b.abs() <= 1.0) || !(zeta_sq_a >= 0.0) {
        return Err(invalid("need |c_b| <= 1 and zeta_sq_a >= 0"));
    }
    let one_minus = (1.0 - c_b) * (1.0 + c_b);
    // (1 - √(1-C²))/2 written without cancellation
    Ok(zeta_sq_a - 0.5 * c_b * c_b / (1.0 + one_minus.sqrt()))
}

/// Wineland parameter upper bound `ζ_a² / C_b²`.
pub fn wineland_xi_sq(zeta_sq_a: f64, c_b: f64) -> Result<f64> {
    if c_b == 0.0 || !c_b.is_finite() {
        return Err(Error::SingularInput("contrast must be nonzero".into()));
    }
    Ok(zeta_sq_a / (c_b * c_b))
}

/// Coefficients (highest degree first) of the quartic in `Z` whose roots
/// contain the stationary values of the maximand defining [`z_bound`].
pub fn z_polynomial(c_bc: f64, c_a: f64) -> [f64; 5] {
    let (a, b) = (c_a, c_bc);
    let (a2, b2) = (a * a, b * b);
    let (a4, b4) = (a2 * a2, b2 * b2);
    [
        16.0 * (b - 1.0) * (b + 1.0),
        8.0 * (a2 - 4.0 * b2 + 4.0),
        -a4 - 20.0 * a2 * b2 + 8.0 * a2 + 8.0 * b4 + 8.0 * b2 - 16.0,
        -2.0 * (4.0 * a4 - 19.0 * a2 * b2 + 16.0 * a2 + 4.0 * b4 - 4.0 * b2),
        a4 * a2 + 3.0 * a4 * b2 + 8.0 * a4 + 3.0 * a2 * b4 - 20.0 * a2 * b2 + 16.0 * a2 + b4 * b2 - b4,
    ]
}

/// Real roots of `Σ coeffs[i] x^(deg-i)` via companion-matrix eigenvalues,
/// after dropping vanishing leading coefficients.
pub(crate) fn real_roots(coeffs: &[f64], imag_tol: f64) -> Vec<f64> {
    let scale = coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    if scale == 0.0 {
        return Vec::new();
    }
    let start = coeffs
        .iter()
        .position(|c| c.abs() > 1e-14 * scale)
        .unwrap_or(coeffs.len());
    let c = &coeffs[start..];
    let deg = c.len().saturating_sub(1);
    match deg {
        0 => Vec::new(),
        1 => vec![-c[1] / c[0]],
        _ => {
            let mut m = nalgebra::DMatrix::<f64>::zeros(deg, deg);
            for i in 0..deg {
                m[(0, i)] = -c[i + 1] / c[0];
                if i + 1 < deg {
                    m[(i + 1, i)] = 1.0;
                }
            }
            m.complex_eigenvalues()
                .iter()
                .filter(|z| z.im.abs() <= imag_tol * (1.0 + z.re.abs()))
                .map(|z| z.re)
                .collect()
        }
    }
}

/// Maximand `B u w + |A| w - u²` with `u = tan ϑ`, `w = sec ϑ`, written to
/// avoid cancellation when `B → 1`.
fn z_objective(b: f64, a_abs: f64, u: f64) -> f64 {
    let w = u.hypot(1.0);
    let one_minus_b2 = (1.0 - b) * (1.0 + b);
    // B w - u = (B² - (1-B²)u²)/(B w + u)
    let bw_minus_u = if b * w + u > 0.0 { (b * b - one_minus_b2 * u * u) / (b * w + u) } else { b * w - u };
    a_abs * w + u * bw_minus_u
}

/// `Z(C_bc, C_a) = max_ϑ [C_bc sin ϑ - C_a cos ϑ - sin²ϑ] / cos²ϑ`.
///
/// The stationary points satisfy `2Bu² + |A|u + B = 2u√(1+u²)`, whose
/// square is a quartic in `u`. The largest objective value over the
/// admissible stationary points is a root of [`z_polynomial`]; which root
/// depends on the region of the disk, so the selection is done in `u`.
pub fn z_bound(c_bc: f64, c_a: f64) -> Result<f64> {
    if !(c_bc.is_finite() && c_a.is_finite()) {
        return Err(invalid("z_bound arguments must be finite"));
    }
    let r2 = c_bc * c_bc + c_a * c_a;
    if r2 > 1.0 + 1e-12 {
        return Err(invalid(format!("(c_bc, c_a) = ({c_bc}, {c_a}) lies outside the unit disk")));
    }
    let b = c_bc.abs();
    let a = c_a.abs();
    let one_minus_b2 = (1.0 - b) * (1.0 + b);
    if one_minus_b2 <= 0.0 {
        // B = 1 forces A = 0; the maximand increases towards 1/2
        return Ok(0.5);
    }
    let quartic = [-4.0 * one_minus_b2, 4.0 * b * a, 4.0 * b * b + a * a - 4.0, 2.0 * a * b, b * b];
    let residual = |u: f64| 2.0 * b * u * u + a * u + b - 2.0 * u * u.hypot(1.0);
    let mut best = a;
    for mut u in real_roots(&quartic, 1e-6) {
        if u < 0.0 {
            continue;
        }
        for _ in 0..30 {
            let w = u.hypot(1.0);
            let d = 4.0 * b * u + a - 2.0 * w - 2.0 * u * u / w;
            if d == 0.0 {
                break;
            }
            let step = residual(u) / d;
            let next = (u - step).max(0.0);
            if residual(next).abs() >= residual(u).abs() {
                break;
            }
            u = next;
        }
        let w = u.hypot(1.0);
        if 2.0 * b * u * u + a * u + b < 0.0 || residual(u).abs() > 1e-6 * (1.0 + u * w) {
            continue;
        }
        best = best.max(z_objective(b, a, u));
    }
    Ok(best.min(1.0))
}
