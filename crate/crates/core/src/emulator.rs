//! Shot-by-shot emulation of the squeezing and Rabi runs, the detector
//! model, and the correction and calibration steps applied to the counts.
//!
//! Each shot draws an atom number, prepares the twisted state, applies the
//! atom-number dependent clock phase, the analysis pulses and a projective
//! `S_z` measurement, then maps the ideal populations through the inverse
//! imaging correction and adds counting noise. Every shot owns its own
//! seeded generator, so runs are reproducible shot by shot.

use crate::error::{invalid, Error, Result};
use crate::spin::{coherent_state, oat_evolve, rotate, z_distribution, DickeState, OatParams, RotationPulse, SpinAxis};
use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{weighted::WeightedIndex, Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::rc::Rc;

/// Preparation, detection and post-selection parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseModel {
    pub n_mean: f64,
    pub n_sigma: f64,
    pub det_sigma_1: f64,
    pub det_sigma_2: f64,
    pub nu_1: f64,
    pub nu_2: f64,
    /// Slope of the spin ratio against total atom number, per atom.
    pub clock_slope: f64,
    pub postselect_lo: u32,
    pub postselect_hi: u32,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel {
            n_mean: 474.0,
            n_sigma: 27.0,
            det_sigma_1: 4.5,
            det_sigma_2: 3.9,
            nu_1: 1.46e-4,
            nu_2: 2.57e-4,
            clock_slope: -6.8e-4,
            postselect_lo: 425,
            postselect_hi: 520,
        }
    }
}

impl NoiseModel {
    /// Everything switched off around a fixed atom number.
    pub fn noiseless(n: usize) -> Self {
        NoiseModel {
            n_mean: n as f64,
            n_sigma: 0.0,
            det_sigma_1: 0.0,
            det_sigma_2: 0.0,
            nu_1: 0.0,
            nu_2: 0.0,
            clock_slope: 0.0,
            postselect_lo: 0,
            postselect_hi: u32::MAX,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.n_mean, self.n_sigma, self.det_sigma_1, self.det_sigma_2, self.nu_1, self.nu_2, self.clock_slope];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(invalid("noise model values must be finite"));
        }
        if self.n_sigma < 0.0 || self.det_sigma_1 < 0.0 || self.det_sigma_2 < 0.0 {
            return Err(invalid("noise sigmas must be nonnegative"));
        }
        if self.nu_1 < 0.0 || self.nu_2 < 0.0 {
            return Err(invalid("imaging corrections must be nonnegative"));
        }
        if self.n_mean < 1.0 {
            return Err(invalid("mean atom number must be at least 1"));
        }
        if self.postselect_lo > self.postselect_hi {
            return Err(invalid("post-selection window is empty"));
        }
        Ok(())
    }

    /// Counting-noise variances of `N₁` and `N₂` after the imaging
    /// correction, for detected counts `n1_det`, `n2_det`.
    pub fn propagated_noise_var(&self, n1_det: f64, n2_det: f64) -> (f64, f64) {
        let g1 = 1.0 + 2.0 * self.nu_1 * n1_det;
        let g2 = 1.0 + 2.0 * self.nu_2 * n2_det;
        ((g1 * self.det_sigma_1).powi(2), (g2 * self.det_sigma_2).powi(2))
    }
}

/// Imaging correction `N = N_det + ν N_det²`.
pub fn detector_forward(n_det: f64, nu: f64) -> f64 {
    n_det + nu * n_det * n_det
}

/// Inverse of [`detector_forward`] on `N ≥ 0`.
pub fn detector_inverse(n: f64, nu: f64) -> f64 {
    if nu == 0.0 {
        return n;
    }
    // 2N / (1 + √(1 + 4νN)) avoids cancellation at small ν N
    2.0 * n / (1.0 + (1.0 + 4.0 * nu * n).sqrt())
}

/// One emulated shot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShotRecord {
    pub seed_id: u64,
    pub tau_ms: f64,
    pub n1_det: f64,
    pub n2_det: f64,
}

/// Pulse area `τ₀ + γτ + δτ²` of the Rabi pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseArea {
    pub tau0: f64,
    pub gamma: f64,
    pub delta: f64,
}

impl Default for PulseArea {
    fn default() -> Self {
        PulseArea { tau0: 0.0, gamma: 2.464, delta: -0.016 }
    }
}

impl PulseArea {
    pub fn at(&self, tau: f64) -> f64 {
        self.tau0 + self.gamma * tau + self.delta * tau * tau
    }

    /// Smallest `τ ≥ 0` with pulse area `theta` on the rising branch.
    pub fn tau_for(&self, theta: f64) -> Result<f64> {
        let (a, b, c) = (self.delta, self.gamma, self.tau0 - theta);
        let tau = if a.abs() < 1e-15 {
            -c / b
        } else {
            let disc = b * b - 4.0 * a * c;
            if disc < 0.0 {
                return Err(invalid(format!("pulse area {theta} is never reached")));
            }
            // root continuous with the linear solution as δ → 0
            2.0 * (-c) / (b + disc.sqrt())
        };
        if !(tau.is_finite() && tau >= 0.0) {
            return Err(invalid(format!("pulse area {theta} needs a negative duration")));
        }
        Ok(tau)
    }
}

/// Parameters of the ideal state and the analysis pulses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Preparation {
    pub twist_angle: f64,
    /// Pulse area `κ` of the rotation that puts the squeezed axis on `z`.
    pub tilt: f64,
    /// Axis phase `φ₀` of that rotation.
    pub tilt_phase: f64,
    /// Axis phase `φ₁` of the Rabi pulse.
    pub rabi_phase: f64,
    /// Clock phase per atom of deviation from the mean atom number.
    pub clock_coeff: f64,
    /// Extra phase of the Rabi run relative to the squeezing run.
    pub drift: f64,
}

/// Which of the two measurement runs a shot belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Measurement {
    /// Measure along the squeezed axis `a`.
    Squeezing,
    /// Additional Rabi pulse of duration `tau_ms`.
    Rabi { tau_ms: f64 },
}

pub(crate) fn twisted(n: usize, twist: f64) -> Result<DickeState> {
    oat_evolve(&coherent_state(n, &SpinAxis::X)?, &OatParams { twist_angle: twist, n_atoms: n })
}

/// Second-moment matrix `⟨{S_i, S_j}⟩/2` of a state.
fn second_moments(s: &DickeState) -> Matrix3<f64> {
    let e = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let d: Vec<f64> = e.iter().map(|v| s.second_moment_vec(*v)).collect();
    let mut m = Matrix3::from_diagonal(&Vector3::new(d[0], d[1], d[2]));
    for i in 0..3 {
        for j in i + 1..3 {
            let v = [e[i][0] + e[j][0], e[i][1] + e[j][1], e[i][2] + e[j][2]];
            let off = 0.5 * (s.second_moment_vec(v) - d[i] - d[j]);
            m[(i, j)] = off;
            m[(j, i)] = off;
        }
    }
    m
}

/// Smallest `ζ²` in the `y-z` plane of a state and the angle `ψ` of that
/// quadrature, measured from `y` towards `z`.
pub fn minor_quadrature(s: &DickeState) -> (f64, f64) {
    let m = second_moments(s);
    let (yy, zz, yz) = (m[(1, 1)], m[(2, 2)], m[(1, 2)]);
    let min_eig = 0.5 * (yy + zz) - (0.25 * (yy - zz).powi(2) + yz * yz).sqrt();
    let psi = 0.5 * (2.0 * yz).atan2(yy - zz) + FRAC_PI_2;
    (4.0 * min_eig / s.n_atoms() as f64, psi)
}

/// Reduces an axis angle modulo `π` into `(-π/2, π/2]`.
pub(crate) fn reduce_axis_angle(a: f64) -> f64 {
    let r = a.rem_euclid(PI);
    if r > FRAC_PI_2 {
        r - PI
    } else {
        r
    }
}

/// `ζ²` of the squeezed quadrature of the twisted `x` state and the pulse
/// area `κ` of `R(κ, 0)` that turns it onto `z`.
pub fn squeezed_quadrature(n: usize, twist: f64) -> Result<(f64, f64)> {
    let (zeta, psi) = minor_quadrature(&twisted(n, twist)?);
    // R(κ, 0) turns the y-z plane by +κ
    Ok((zeta, reduce_axis_angle(FRAC_PI_2 - psi)))
}

/// Twisting strength and tilt giving squeezed `ζ² = target` at `n` atoms
/// (weaker of the two twisting strengths that reach it).
pub fn calibrate_preparation(n: usize, target_zeta_sq: f64, noise: &NoiseModel) -> Result<Preparation> {
    if !(target_zeta_sq > 0.0 && target_zeta_sq < 1.0) {
        return Err(invalid("target squeezing must lie in (0, 1)"));
    }
    let f = |t: f64| squeezed_quadrature(n, t).map(|r| r.0 - target_zeta_sq);
    // ζ² decreases from 1 as the twist grows from zero
    let (mut lo, mut hi) = (0.0, 1e-4);
    while f(hi)? > 0.0 {
        lo = hi;
        hi *= 1.5;
        if hi > 1.0 {
            return Err(Error::Numerical(format!("squeezing {target_zeta_sq} unreachable at N={n}")));
        }
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if f(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let twist = 0.5 * (lo + hi);
    let (_, kappa) = squeezed_quadrature(n, twist)?;
    let mut prep = Preparation { twist_angle: twist, tilt: kappa, tilt_phase: 0.0, rabi_phase: -FRAC_PI_2, clock_coeff: 0.0, drift: 0.0 };
    prep.clock_coeff = clock_coefficient(n, &prep, noise.clock_slope)?;
    Ok(prep)
}

/// Phase per atom whose effect on `⟨2S_z/N⟩` of the squeezing run has slope
/// `slope` against the atom number.
pub fn clock_coefficient(n: usize, prep: &Preparation, slope: f64) -> Result<f64> {
    if slope == 0.0 {
        return Ok(0.0);
    }
    let h = 1e-4;
    let ratio = |eps: f64| -> Result<f64> {
        let s = twisted(n, prep.twist_angle)?.rotate_z(eps);
        let s = rotate(&s, &RotationPulse::new(prep.tilt, prep.tilt_phase)?);
        Ok(2.0 * s.mean_spin_vec([0.0, 0.0, 1.0]) / n as f64)
    };
    let d = (ratio(h)? - ratio(-h)?) / (2.0 * h);
    if d.abs() < 1e-12 {
        return Err(Error::SingularInput("clock phase does not move the squeezed quadrature".into()));
    }
    Ok(slope / d)
}

/// Final state before the `S_z` measurement for `n` atoms.
pub fn final_state(n: usize, n_mean: f64, prep: &Preparation, pulse: &PulseArea, m: Measurement) -> Result<DickeState> {
    let clock = prep.clock_coeff * (n as f64 - n_mean);
    let mut s = twisted(n, prep.twist_angle)?.rotate_z(clock);
    if let Measurement::Rabi { .. } = m {
        s = s.rotate_z(prep.drift);
    }
    s = rotate(&s, &RotationPulse::new(prep.tilt, prep.tilt_phase)?);
    if let Measurement::Rabi { tau_ms } = m {
        s = rotate(&s, &RotationPulse::new(pulse.at(tau_ms), prep.rabi_phase)?);
    }
    Ok(s)
}

/// Per-shot seed derived from a run seed and a shot index.
pub fn shot_seed(run_seed: u64, index: u64) -> u64 {
    let mut x = run_seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    // splitmix64 finaliser
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Shot generator with a cache of measurement distributions keyed by atom
/// number and pulse.
pub struct Emulator {
    pub prep: Preparation,
    pub noise: NoiseModel,
    pub pulse: PulseArea,
    cache: RefCell<HashMap<(usize, u64), Rc<WeightedIndex<f64>>>>,
}

impl Emulator {
    pub fn new(prep: Preparation, noise: NoiseModel, pulse: PulseArea) -> Result<Self> {
        noise.validate()?;
        Ok(Emulator { prep, noise, pulse, cache: RefCell::new(HashMap::new()) })
    }

    fn distribution(&self, n: usize, m: Measurement) -> Result<Rc<WeightedIndex<f64>>> {
        let key = match m {
            Measurement::Squeezing => (n, u64::MAX),
            Measurement::Rabi { tau_ms } => (n, tau_ms.to_bits()),
        };
        if let Some(d) = self.cache.borrow().get(&key) {
            return Ok(d.clone());
        }
        let s = final_state(n, self.noise.n_mean, &self.prep, &self.pulse, m)?;
        let w = WeightedIndex::new(z_distribution(&s)).map_err(|e| Error::Numerical(e.to_string()))?;
        let d = Rc::new(w);
        self.cache.borrow_mut().insert(key, d.clone());
        Ok(d)
    }

    /// Draws one shot from its own generator seeded with `seed`.
    pub fn sample_shot(&self, m: Measurement, seed: u64) -> Result<ShotRecord> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nm = &self.noise;
        let n = if nm.n_sigma == 0.0 {
            nm.n_mean.round().max(1.0) as usize
        } else {
            let normal = Normal::new(nm.n_mean, nm.n_sigma).map_err(|e| invalid(e.to_string()))?;
            loop {
                let v = normal.sample(&mut rng).round();
                if v >= 1.0 {
                    break v as usize;
                }
            }
        };
        let p = self.distribution(n, m)?.sample(&mut rng);
        let (n1, n2) = ((n - p) as f64, p as f64);
        let mut detect = |count: f64, nu: f64, sigma: f64| {
            let ideal = detector_inverse(count, nu);
            let noisy = if sigma > 0.0 { ideal + sigma * rng.sample::<f64, _>(rand_distr::StandardNormal) } else { ideal };
            noisy.max(0.0)
        };
        let n1_det = detect(n1, nm.nu_1, nm.det_sigma_1);
        let n2_det = detect(n2, nm.nu_2, nm.det_sigma_2);
        let tau_ms = match m {
            Measurement::Squeezing => 0.0,
            Measurement::Rabi { tau_ms } => tau_ms,
        };
        Ok(ShotRecord { seed_id: seed, tau_ms, n1_det, n2_det })
    }

    /// Draws shots with consecutive indices from `first_index` until `kept`
    /// of them pass post-selection; returns the shots and the next index.
    pub fn run_postselected(
        &self,
        m: Measurement,
        run_seed: u64,
        first_index: u64,
        kept: usize,
    ) -> Result<(Vec<ShotRecord>, u64)> {
        let limit = first_index + 100 * kept.max(1) as u64;
        let mut out = Vec::with_capacity(kept);
        let mut index = first_index;
        while out.len() < kept {
            if index >= limit {
                return Err(Error::EmptyResult(format!(
                    "only {} of {} shots passed post-selection",
                    out.len(),
                    index - first_index
                )));
            }
            let r = self.sample_shot(m, shot_seed(run_seed, index))?;
            index += 1;
            if passes_postselection(&r, &self.noise) {
                out.push(r);
            }
        }
        Ok((out, index))
    }

    /// `count` shots with seeds `shot_seed(run_seed, first_index + i)`.
    pub fn run(&self, m: Measurement, run_seed: u64, first_index: u64, count: usize) -> Result<Vec<ShotRecord>> {
        (0..count as u64)
            .map(|i| self.sample_shot(m, shot_seed(run_seed, first_index + i)))
            .collect()
    }
}

/// Single shot without caching.
pub fn sample_shot(prep: &Preparation, pulse: &PulseArea, noise: &NoiseModel, m: Measurement, seed: u64) -> Result<ShotRecord> {
    Emulator::new(*prep, *noise, *pulse)?.sample_shot(m, seed)
}

/// A shot after imaging correction and post-selection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrectedSample {
    /// `(N₁ - N₂) / (N₁ + N₂)`, i.e. `2S/N`, after trend removal.
    pub ratio: f64,
    pub n_total: f64,
    /// Variance of the counting noise in `N · ratio`.
    pub noise_var: f64,
    /// Covariance of the counting noise in `N · ratio` with that in `N`.
    pub noise_cov: f64,
    /// Variance of the counting noise in `N`.
    pub noise_var_total: f64,
    pub tau_ms: f64,
}

/// Removal of the linear dependence of the ratio on the atom number.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrendCorrection {
    None,
    /// Subtract a known slope.
    Fixed(f64),
    /// Subtract the least-squares slope of the data itself.
    Fitted,
}

/// Imaging correction, post-selection and removal of the clock slope of
/// the noise model.
pub fn apply_corrections(records: &[ShotRecord], noise: &NoiseModel) -> Result<Vec<CorrectedSample>> {
    apply_corrections_with(records, noise, TrendCorrection::Fixed(noise.clock_slope))
}

pub fn apply_corrections_with(
    records: &[ShotRecord],
    noise: &NoiseModel,
    trend: TrendCorrection,
) -> Result<Vec<CorrectedSample>> {
    if records.is_empty() {
        return Err(invalid("no shot records"));
    }
    let (lo, hi) = (noise.postselect_lo as f64, noise.postselect_hi as f64);
    let mut out: Vec<CorrectedSample> = records
        .iter()
        .filter(|r| passes_postselection(r, noise))
        .map(|r| {
            let n1 = detector_forward(r.n1_det, noise.nu_1);
            let n2 = detector_forward(r.n2_det, noise.nu_2);
            let n = n1 + n2;
            let (v1, v2) = noise.propagated_noise_var(r.n1_det, r.n2_det);
            CorrectedSample {
                ratio: (n1 - n2) / n,
                n_total: n,
                noise_var: v1 + v2,
                noise_cov: v1 - v2,
                noise_var_total: v1 + v2,
                tau_ms: r.tau_ms,
            }
        })
        .collect();
    if out.is_empty() {
        return Err(Error::EmptyResult(format!("all {} shots fall outside [{lo}, {hi}]", records.len())));
    }
    remove_trend(&mut out, trend);
    Ok(out)
}

/// Whether the corrected total atom number lies in the window.
pub fn passes_postselection(r: &ShotRecord, noise: &NoiseModel) -> bool {
    let n = detector_forward(r.n1_det, noise.nu_1) + detector_forward(r.n2_det, noise.nu_2);
    n > 0.0 && n >= noise.postselect_lo as f64 && n <= noise.postselect_hi as f64
}

/// Least-squares slope of `ratio` against `n_total`.
pub fn trend_slope(samples: &[CorrectedSample]) -> f64 {
    let n = samples.len() as f64;
    let mn = samples.iter().map(|s| s.n_total).sum::<f64>() / n;
    let mr = samples.iter().map(|s| s.ratio).sum::<f64>() / n;
    let sxx: f64 = samples.iter().map(|s| (s.n_total - mn).powi(2)).sum();
    let sxy: f64 = samples.iter().map(|s| (s.n_total - mn) * (s.ratio - mr)).sum();
    if sxx > 0.0 {
        sxy / sxx
    } else {
        0.0
    }
}

/// Subtracts `slope (N - ⟨N⟩)`, leaving the mean unchanged. The measured
/// `N` is itself noisy, so the subtraction feeds counting noise into the
/// ratio; the noise bookkeeping follows it.
pub fn remove_trend(samples: &mut [CorrectedSample], trend: TrendCorrection) {
    let slope = match trend {
        TrendCorrection::None => return,
        TrendCorrection::Fixed(s) => s,
        TrendCorrection::Fitted => trend_slope(samples),
    };
    let mean_n = samples.iter().map(|s| s.n_total).sum::<f64>() / samples.len() as f64;
    for s in samples.iter_mut() {
        s.ratio -= slope * (s.n_total - mean_n);
        // noise in N·ratio picks up -slope·N times the noise in N
        let k = slope * s.n_total;
        s.noise_var += -2.0 * k * s.noise_cov + k * k * s.noise_var_total;
        s.noise_cov -= k * s.noise_var_total;
    }
}

/// Fitted Rabi oscillation `C sin(τ₀ + γτ + δτ²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RabiFit {
    pub contrast: f64,
    pub tau0: f64,
    pub gamma: f64,
    pub delta: f64,
}

impl RabiFit {
    pub fn model(&self, tau: f64) -> f64 {
        self.contrast * (self.tau0 + self.gamma * tau + self.delta * tau * tau).sin()
    }

    pub fn params(&self) -> [f64; 4] {
        [self.contrast, self.tau0, self.gamma, self.delta]
    }

    fn from_params(p: [f64; 4]) -> Self {
        RabiFit { contrast: p[0], tau0: p[1], gamma: p[2], delta: p[3] }
    }
}

/// Fit result with its uncertainty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RabiFitReport {
    pub fit: RabiFit,
    /// Standard errors of `(contrast, tau0, gamma, delta)`.
    pub std_errors: [f64; 4],
    pub covariance: [[f64; 4]; 4],
    pub residual_rms: f64,
    pub iterations: usize,
}

const FIT_MAX_ITER: usize = 200;
const FIT_STEP_TOL: f64 = 1e-10;

fn jacobian_row(p: &[f64; 4], tau: f64) -> ([f64; 4], f64) {
    let arg = p[1] + p[2] * tau + p[3] * tau * tau;
    let (s, c) = arg.sin_cos();
    let dc = p[0] * c;
    ([s, dc, dc * tau, dc * tau * tau], p[0] * s)
}

fn sum_sq(data: &[(f64, f64)], p: &[f64; 4]) -> f64 {
    data.iter().map(|&(t, y)| (y - jacobian_row(p, t).1).powi(2)).sum()
}

/// Initial amplitude, phase and frequency from linear fits of
/// `A sin γτ + B cos γτ` on a frequency grid.
fn frequency_scan(data: &[(f64, f64)]) -> [f64; 4] {
    let t_min = data.iter().map(|d| d.0).fold(f64::INFINITY, f64::min);
    let t_max = data.iter().map(|d| d.0).fold(f64::NEG_INFINITY, f64::max);
    let span = (t_max - t_min).max(1e-12);
    let distinct = {
        let mut t: Vec<f64> = data.iter().map(|d| d.0).collect();
        t.sort_by(f64::total_cmp);
        t.dedup();
        t.len().max(2)
    };
    // up to the Nyquist-like limit of the sampled durations
    let g_max = std::f64::consts::PI * (distinct - 1) as f64 / span;
    let steps = 2000;
    let mut best = (f64::INFINITY, [0.0; 4]);
    for i in 1..=steps {
        let g = g_max * i as f64 / steps as f64;
        let (mut ss, mut sc, mut cc, mut ys, mut yc) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for &(t, y) in data {
            let (s, c) = (g * t).sin_cos();
            ss += s * s;
            sc += s * c;
            cc += c * c;
            ys += y * s;
            yc += y * c;
        }
        let det = ss * cc - sc * sc;
        if det.abs() < 1e-12 * (ss * cc).max(1e-300) {
            continue;
        }
        let a = (ys * cc - yc * sc) / det;
        let b = (yc * ss - ys * sc) / det;
        let res: f64 = data.iter().map(|&(t, y)| {
            let (s, c) = (g * t).sin_cos();
            (y - a * s - b * c).powi(2)
        }).sum();
        if res < best.0 {
            best = (res, [a.hypot(b), b.atan2(a), g, 0.0]);
        }
    }
    best.1
}

/// Damped Gauss-Newton (Levenberg-Marquardt) fit with analytic Jacobian;
/// converged when the relative parameter step falls below `1e-10`.
pub fn fit_rabi(samples: &[(f64, f64)]) -> Result<RabiFitReport> {
    let mut taus: Vec<f64> = samples.iter().map(|s| s.0).collect();
    taus.sort_by(f64::total_cmp);
    taus.dedup();
    if taus.len() < 4 {
        return Err(invalid(format!("need at least 4 distinct durations, got {}", taus.len())));
    }
    if samples.iter().any(|s| !(s.0.is_finite() && s.1.is_finite())) {
        return Err(invalid("fit data must be finite"));
    }
    let mut p = frequency_scan(samples);
    let mut lambda = 1e-3;
    let mut cost = sum_sq(samples, &p);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < FIT_MAX_ITER {
        iterations += 1;
        let mut jtj = nalgebra::Matrix4::<f64>::zeros();
        let mut jtr = nalgebra::Vector4::<f64>::zeros();
        for &(t, y) in samples {
            let (row, f) = jacobian_row(&p, t);
            let r = y - f;
            for i in 0..4 {
                jtr[i] += row[i] * r;
                for j in 0..4 {
                    jtj[(i, j)] += row[i] * row[j];
                }
            }
        }
        let mut accepted = false;
        for _ in 0..40 {
            let mut a = jtj;
            for i in 0..4 {
                a[(i, i)] += lambda * jtj[(i, i)].max(1e-12);
            }
            let Some(step) = a.cholesky().map(|c| c.solve(&jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let trial = [p[0] + step[0], p[1] + step[1], p[2] + step[2], p[3] + step[3]];
            let trial_cost = sum_sq(samples, &trial);
            if trial_cost <= cost {
                let rel = (0..4)
                    .map(|i| step[i].abs() / (p[i].abs().max(1e-3)))
                    .fold(0.0, f64::max);
                p = trial;
                cost = trial_cost;
                lambda = (lambda * 0.3).max(1e-12);
                accepted = true;
                if rel < FIT_STEP_TOL {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if converged || !accepted {
            // a rejected step at tiny damping means the minimum is reached
            converged = converged || cost.sqrt() < 1e-300 || !accepted;
            break;
        }
    }
    if !converged {
        return Err(Error::FitFailure {
            iterations,
            message: format!("relative step still above {FIT_STEP_TOL} (residual sum {cost:.3e})"),
        });
    }
    if p[0] < 0.0 {
        p[0] = -p[0];
        p[1] += std::f64::consts::PI;
    }
    p[1] = (p[1] + std::f64::consts::PI).rem_euclid(2.0 * std::f64::consts::PI) - std::f64::consts::PI;

    let mut jtj = nalgebra::Matrix4::<f64>::zeros();
    for &(t, _) in samples {
        let (row, _) = jacobian_row(&p, t);
        for i in 0..4 {
            for j in 0..4 {
                jtj[(i, j)] += row[i] * row[j];
            }
        }
    }
    let dof = (samples.len() as f64 - 4.0).max(1.0);
    let sigma2 = cost / dof;
    let cov = jtj
        .try_inverse()
        .ok_or_else(|| Error::SingularInput("fit Jacobian is rank deficient".into()))?
        * sigma2;
    let mut covariance = [[0.0; 4]; 4];
    let mut std_errors = [0.0; 4];
    for i in 0..4 {
        for j in 0..4 {
            covariance[i][j] = cov[(i, j)];
        }
        std_errors[i] = cov[(i, i)].max(0.0).sqrt();
    }
    Ok(RabiFitReport {
        fit: RabiFit::from_params(p),
        std_errors,
        covariance,
        residual_rms: (cost / samples.len() as f64).sqrt(),
        iterations,
    })
}

/// Angle between `a` and the measurement axis after a pulse of duration
/// `tau`: `τ₀ + γτ + δτ² - arcsin(C_a / C_b)`.
pub fn theta_of_tau(fit: &RabiFit, tau: f64, c_a: f64) -> Result<f64> {
    if c_a.abs() > fit.contrast {
        return Err(invalid(format!("|c_a| = {} exceeds the contrast {}", c_a.abs(), fit.contrast)));
    }
    Ok(fit.tau0 + fit.gamma * tau + fit.delta * tau * tau - (c_a / fit.contrast).asin())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn detector_map_roundtrip() {
        for i in 0..=600 {
            let nd = i as f64;
            for nu in [0.0, 1.46e-4, 2.57e-4, 1e-2] {
                let n = detector_forward(nd, nu);
                assert!((detector_inverse(n, nu) - nd).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn noiseless_stretched_state() {
        let prep = Preparation { twist_angle: 0.0, tilt: 0.0, tilt_phase: 0.0, rabi_phase: 0.0, clock_coeff: 0.0, drift: 0.0 };
        // the x state turned onto +z by a -π/2 pulse about y
        let pulse = PulseArea { tau0: -PI / 2.0, gamma: 0.0, delta: 0.0 };
        let prep = Preparation { rabi_phase: FRAC_PI_2, ..prep };
        let e = Emulator::new(prep, NoiseModel::noiseless(50), pulse).unwrap();
        for seed in 0..5 {
            let r = e.sample_shot(Measurement::Rabi { tau_ms: 0.0 }, seed).unwrap();
            assert_eq!((r.n1_det, r.n2_det), (50.0, 0.0));
        }
    }

    #[test]
    fn pulse_area_inverse() {
        let p = PulseArea::default();
        let t = p.tau_for(128f64.to_radians()).unwrap();
        assert!((p.at(t) - 128f64.to_radians()).abs() < 1e-12);
        let lin = PulseArea { tau0: 0.1, gamma: 2.0, delta: 0.0 };
        assert!((lin.tau_for(1.1).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn corrections_without_imaging_or_trend() {
        let noise = NoiseModel { nu_1: 0.0, nu_2: 0.0, clock_slope: 0.0, ..NoiseModel::default() };
        let recs = [
            ShotRecord { seed_id: 0, tau_ms: 0.0, n1_det: 250.0, n2_det: 220.0 },
            ShotRecord { seed_id: 1, tau_ms: 0.0, n1_det: 230.0, n2_det: 240.0 },
            ShotRecord { seed_id: 2, tau_ms: 0.0, n1_det: 10.0, n2_det: 20.0 },
        ];
        let out = apply_corrections(&recs, &noise).unwrap();
        assert_eq!(out.len(), 2);
        assert!((out[0].ratio - 30.0 / 470.0).abs() < 1e-15);
        assert!((out[1].ratio + 10.0 / 470.0).abs() < 1e-15);
        let narrow = NoiseModel { postselect_lo: 1000, postselect_hi: 1001, ..noise };
        assert!(matches!(apply_corrections(&recs, &narrow), Err(Error::EmptyResult(_))));
        assert!(apply_corrections(&[], &noise).is_err());
    }

    #[test]
    fn exact_trend_is_removed() {
        let lambda = -6.8e-4;
        let noise = NoiseModel { nu_1: 0.0, nu_2: 0.0, clock_slope: lambda, postselect_lo: 0, postselect_hi: 10_000, ..NoiseModel::default() };
        let recs: Vec<ShotRecord> = (0..50)
            .map(|i| {
                let n = 430.0 + 2.0 * i as f64;
                let r = 0.01 + lambda * (n - 479.0);
                ShotRecord { seed_id: i, tau_ms: 0.0, n1_det: 0.5 * n * (1.0 + r), n2_det: 0.5 * n * (1.0 - r) }
            })
            .collect();
        let out = apply_corrections(&recs, &noise).unwrap();
        assert!(trend_slope(&out).abs() < 1e-12);
        let mean: f64 = out.iter().map(|s| s.ratio).sum::<f64>() / out.len() as f64;
        assert!((mean - 0.01).abs() < 1e-12);
    }

    #[test]
    fn rabi_fit_recovers_exact_parameters() {
        let truth = RabiFit { contrast: 0.980, tau0: -0.030, gamma: 2.464, delta: -0.016 };
        let data: Vec<(f64, f64)> = (0..40).map(|i| {
            let t = i as f64 * 0.07;
            (t, truth.model(t))
        }).collect();
        let r = fit_rabi(&data).unwrap();
        for (got, want) in r.fit.params().iter().zip(truth.params()) {
            assert!((got - want).abs() < 1e-8, "{:?}", r.fit);
        }
        let pure = RabiFit { contrast: 1.0, tau0: 0.0, gamma: 1.7, delta: 0.0 };
        let data: Vec<(f64, f64)> = (0..25).map(|i| (i as f64 * 0.2, pure.model(i as f64 * 0.2))).collect();
        let r = fit_rabi(&data).unwrap();
        assert!((r.fit.gamma - 1.7).abs() < 1e-10);
        assert!(fit_rabi(&data[..3]).is_err());
    }

    #[test]
    fn theta_examples() {
        let f = RabiFit { contrast: 0.98, tau0: -0.03, gamma: 2.464, delta: -0.016 };
        assert_eq!(theta_of_tau(&f, 0.0, 0.0).unwrap(), -0.03);
        let lin = RabiFit { delta: 0.0, ..f };
        let d = theta_of_tau(&lin, 1.3, 0.0).unwrap() - theta_of_tau(&lin, 0.4, 0.0).unwrap();
        assert!((d - 2.464 * 0.9).abs() < 1e-14);
        assert!(theta_of_tau(&f, 0.5, 0.99).is_err());
    }

    #[test]
    fn calibration_puts_squeezing_on_z() {
        let noise = NoiseModel::noiseless(100);
        let prep = calibrate_preparation(100, 0.4, &noise).unwrap();
        let s = final_state(100, 100.0, &prep, &PulseArea::default(), Measurement::Squeezing).unwrap();
        let zeta = 4.0 * s.second_moment_vec([0.0, 0.0, 1.0]) / 100.0;
        assert!((zeta - 0.4).abs() < 1e-9, "{zeta}");
        assert!(s.mean_spin_vec([0.0, 0.0, 1.0]).abs() < 1e-9);
    }
}
