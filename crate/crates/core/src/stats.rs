//! Estimators, confidence overlaps, producibility limits and the
//! finite-statistics adversary.

use crate::emulator::{minor_quadrature, reduce_axis_angle, twisted, CorrectedSample};
use crate::error::{invalid, Error, Result};
use crate::spin::{coherent_state, rotate, DickeState, RotationPulse, SpinAxis};
use crate::witness::{witness_from_state, witness_value, z_bound, MomentSet};
use gauss_quad::GaussLegendre;
use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, Continuous, ContinuousCDF, Gamma};
use std::num::NonZeroUsize;

/// Mean of a statistic with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub sample_size: usize,
}

impl MomentEstimate {
    pub fn new(mean: f64, std_error: f64, sample_size: usize) -> Result<Self> {
        if !(std_error >= 0.0) || sample_size == 0 || !mean.is_finite() {
            return Err(invalid("estimate needs finite mean, std_error >= 0 and sample_size >= 1"));
        }
        Ok(MomentEstimate { mean, std_error, sample_size })
    }
}

/// `10 log10(x)`.
pub fn db(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(invalid(format!("decibels need a positive finite value, got {x}")));
    }
    Ok(10.0 * x.log10())
}

/// Delete-one jackknife estimate and standard error of `stat`.
pub fn jackknife<T, F>(data: &[T], stat: F) -> Result<MomentEstimate>
where
    T: Clone,
    F: Fn(&[T]) -> f64,
{
    let n = data.len();
    if n < 2 {
        return Err(invalid("jackknife needs at least two samples"));
    }
    let full = stat(data);
    let mut buf: Vec<T> = Vec::with_capacity(n - 1);
    let mut leave: Vec<f64> = Vec::with_capacity(n);
    for i in 0..n {
        buf.clear();
        buf.extend(data[..i].iter().cloned());
        buf.extend(data[i + 1..].iter().cloned());
        leave.push(stat(&buf));
    }
    let mean_leave = leave.iter().sum::<f64>() / n as f64;
    let var = leave.iter().map(|v| (v - mean_leave).powi(2)).sum::<f64>() * (n as f64 - 1.0) / n as f64;
    MomentEstimate::new(full, var.sqrt(), n)
}

/// Sample mean with the usual `s / √n` standard error.
pub fn mean_estimate(values: &[f64]) -> Result<MomentEstimate> {
    let n = values.len();
    if n < 2 {
        return Err(invalid("need at least two samples"));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    MomentEstimate::new(mean, (var / n as f64).sqrt(), n)
}

/// How detection noise is removed from second moments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NoiseSubtraction {
    /// Per-shot variance propagated through the imaging correction.
    #[default]
    Propagated,
    /// `(σ₁² + σ₂²) / ⟨N⟩`, ignoring the imaging gain.
    Nominal,
    None,
}

/// `C_a = ⟨2S_a/N⟩` and `ζ_a² = ⟨4S_a²/N⟩` with propagated noise
/// subtraction; standard errors by jackknife over shots.
pub fn estimate_moments(samples: &[CorrectedSample]) -> Result<(MomentEstimate, MomentEstimate)> {
    estimate_moments_with(samples, NoiseSubtraction::Propagated, 0.0)
}

/// As [`estimate_moments`]; `nominal_var` is `σ₁² + σ₂²`, used only by
/// [`NoiseSubtraction::Nominal`].
pub fn estimate_moments_with(
    samples: &[CorrectedSample],
    mode: NoiseSubtraction,
    nominal_var: f64,
) -> Result<(MomentEstimate, MomentEstimate)> {
    if samples.len() < 2 {
        return Err(invalid(format!("need at least two samples, got {}", samples.len())));
    }
    let c_a = jackknife(samples, |s| s.iter().map(|x| x.ratio).sum::<f64>() / s.len() as f64)?;
    let zeta = jackknife(samples, |s| {
        let n = s.len() as f64;
        let raw = s.iter().map(|x| x.ratio * x.ratio * x.n_total).sum::<f64>() / n;
        match mode {
            NoiseSubtraction::Propagated => raw - s.iter().map(|x| x.noise_var / x.n_total).sum::<f64>() / n,
            NoiseSubtraction::Nominal => raw - nominal_var / (s.iter().map(|x| x.n_total).sum::<f64>() / n),
            NoiseSubtraction::None => raw,
        }
    })?;
    Ok((c_a, zeta))
}

/// Witness and its significance from estimated `C_n` and `ζ_a²`; the angle
/// is treated as exact.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WitnessEstimate {
    pub witness: f64,
    pub std_error: f64,
    pub significance: f64,
}

pub fn witness_estimate(c_n: &MomentEstimate, zeta_sq: &MomentEstimate, cos_theta: f64) -> WitnessEstimate {
    let w = witness_value(&MomentSet::for_witness(c_n.mean, zeta_sq.mean, cos_theta));
    let c2 = cos_theta * cos_theta;
    let se = (c_n.std_error.powi(2) + c2 * c2 * zeta_sq.std_error.powi(2)).sqrt();
    WitnessEstimate { witness: w, std_error: se, significance: if se > 0.0 { -w / se } else { f64::NAN } }
}

/// Beta distribution on `[-1, 1]` matched to a mean and variance.
#[derive(Debug, Clone)]
pub struct ScaledBeta {
    pub alpha: f64,
    pub beta: f64,
    dist: Beta,
}

impl ScaledBeta {
    pub fn from_moments(mean: f64, var: f64) -> Result<Self> {
        if !(mean > -1.0 && mean < 1.0) || !(var > 0.0) {
            return Err(invalid("beta needs mean in (-1, 1) and positive variance"));
        }
        let mx = 0.5 * (mean + 1.0);
        let vx = 0.25 * var;
        let t = mx * (1.0 - mx) / vx - 1.0;
        let (alpha, beta) = (mx * t, (1.0 - mx) * t);
        if !(alpha > 0.0 && beta > 0.0) {
            return Err(invalid(format!("variance {var} too large for a beta on [-1, 1] with mean {mean}")));
        }
        let dist = Beta::new(alpha, beta).map_err(|e| invalid(e.to_string()))?;
        Ok(ScaledBeta { alpha, beta, dist })
    }

    pub fn mean(&self) -> f64 {
        2.0 * self.alpha / (self.alpha + self.beta) - 1.0
    }

    pub fn variance(&self) -> f64 {
        let s = self.alpha + self.beta;
        4.0 * self.alpha * self.beta / (s * s * (s + 1.0))
    }

    pub fn pdf(&self, c: f64) -> f64 {
        let x = 0.5 * (c + 1.0);
        if !(0.0..=1.0).contains(&x) {
            return 0.0;
        }
        0.5 * self.dist.pdf(x)
    }

    /// Interval holding all but a negligible tail, for integration.
    fn support(&self, width: f64) -> (f64, f64) {
        let (m, s) = (self.mean(), self.variance().sqrt());
        ((m - width * s).max(-1.0), (m + width * s).min(1.0))
    }
}

/// Gamma distribution on `[0, ∞)` matched to a mean and variance.
#[derive(Debug, Clone)]
pub struct MatchedGamma {
    pub shape: f64,
    pub scale: f64,
    dist: Gamma,
}

impl MatchedGamma {
    pub fn from_moments(mean: f64, var: f64) -> Result<Self> {
        if !(mean > 0.0) || !(var > 0.0) {
            return Err(invalid("gamma needs positive mean and variance"));
        }
        let shape = mean * mean / var;
        let scale = var / mean;
        let dist = Gamma::new(shape, 1.0 / scale).map_err(|e| invalid(e.to_string()))?;
        Ok(MatchedGamma { shape, scale, dist })
    }

    pub fn mean(&self) -> f64 {
        self.shape * self.scale
    }

    pub fn variance(&self) -> f64 {
        self.shape * self.scale * self.scale
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            self.dist.cdf(x)
        }
    }
}

/// Normalisation of the k-producibility limits in the `(C, ζ²)` plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ProducibilityScale {
    /// Limit on `ζ²` itself: `(4/k) min ⟨J_z²⟩`.
    Variance,
    /// Limit on the Wineland parameter `ζ²/C²`, drawn in the `ζ²` plane.
    #[default]
    Wineland,
}

/// Region of the `(C, ζ²)` plane whose probability is computed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Region {
    /// Whole quadrant.
    All,
    /// `ζ² < Z(|C|, 0)`: Bell correlated.
    Bell,
    /// `ζ² ≥` the k-producibility limit: compatible with k-producible
    /// states.
    KProducible { k: u32, scale: ProducibilityScale },
}

/// Minimal `⟨J_z²⟩` at fixed `⟨J_x⟩ / j` for spin `j = k/2`, from ground
/// states of `J_z² - μ J_x`.
#[derive(Debug, Clone)]
pub struct BlockCurve {
    k: u32,
    // (μ, ⟨J_x⟩/j, ⟨J_z²⟩), increasing in both μ and contrast
    table: Vec<(f64, f64, f64)>,
}

impl BlockCurve {
    pub fn new(k: u32) -> Result<Self> {
        if k == 0 {
            return Err(invalid("k must be at least 1"));
        }
        let mut table = Vec::with_capacity(602);
        table.push(Self::ground(k, 1e-9));
        for i in 0..=600 {
            let mu = 10f64.powf(-4.0 + 10.0 * i as f64 / 600.0);
            table.push(Self::ground(k, mu));
        }
        Ok(BlockCurve { k, table })
    }

    fn ground(k: u32, mu: f64) -> (f64, f64, f64) {
        let dim = k as usize + 1;
        let j = 0.5 * k as f64;
        let mut h = DMatrix::<f64>::zeros(dim, dim);
        for p in 0..dim {
            let m = j - p as f64;
            h[(p, p)] = m * m;
            if p + 1 < dim {
                // ⟨m|J_x|m-1⟩
                let x = 0.5 * (j * (j + 1.0) - m * (m - 1.0)).sqrt();
                h[(p, p + 1)] = -mu * x;
                h[(p + 1, p)] = -mu * x;
            }
        }
        let eig = SymmetricEigen::new(h);
        let idx = eig.eigenvalues.imin();
        let v = eig.eigenvectors.column(idx);
        let (mut jx, mut jz2) = (0.0, 0.0);
        for p in 0..dim {
            let m = j - p as f64;
            jz2 += v[p] * v[p] * m * m;
            if p + 1 < dim {
                jx += 2.0 * v[p] * v[p + 1] * 0.5 * (j * (j + 1.0) - m * (m - 1.0)).sqrt();
            }
        }
        (mu, (jx / j).abs(), jz2)
    }

    /// Minimal `⟨J_z²⟩` compatible with contrast `c`.
    pub fn min_jz2(&self, c: f64) -> f64 {
        let c = c.abs().min(1.0);
        let first = self.table[0];
        if c <= first.1 {
            return first.2;
        }
        let last = *self.table.last().expect("table is nonempty");
        if c >= last.1 {
            // coherent state limit ⟨J_z²⟩ = j/2 at full contrast
            let full = 0.25 * self.k as f64;
            let t = (c - last.1) / (1.0 - last.1);
            return last.2 + t * (full - last.2);
        }
        let i = self.table.partition_point(|row| row.1 < c);
        let (mut lo, mut hi) = (self.table[i - 1].0.ln(), self.table[i].0.ln());
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if Self::ground(self.k, mid.exp()).1 < c {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Self::ground(self.k, (0.5 * (lo + hi)).exp()).2
    }

    /// Linear interpolation in the table; within about `1e-4` of
    /// [`BlockCurve::min_jz2`].
    fn min_jz2_rough(&self, c: f64) -> f64 {
        let c = c.abs().min(1.0);
        let i = self.table.partition_point(|row| row.1 < c);
        if i == 0 || i == self.table.len() {
            return self.min_jz2(c);
        }
        let (a, b) = (self.table[i - 1], self.table[i]);
        let t = if b.1 > a.1 { (c - a.1) / (b.1 - a.1) } else { 0.0 };
        a.2 + t * (b.2 - a.2)
    }

    /// `(4/k) min ⟨J_z²⟩`: the scaled variance reachable with blocks of
    /// exactly `k` spins.
    pub fn scaled_variance(&self, c: f64) -> f64 {
        4.0 / self.k as f64 * self.min_jz2(c)
    }
}

/// k-producibility limit: the best of all block sizes up to `k`.
#[derive(Debug, Clone)]
pub struct ProducibilityCurve {
    blocks: Vec<BlockCurve>,
}

impl ProducibilityCurve {
    pub fn new(k: u32) -> Result<Self> {
        if k == 0 {
            return Err(invalid("k must be at least 1"));
        }
        Ok(ProducibilityCurve { blocks: (1..=k).map(BlockCurve::new).collect::<Result<_>>()? })
    }

    /// Limit on `ζ²` for contrast `c` under the given normalisation.
    pub fn limit(&self, c: f64, scale: ProducibilityScale) -> f64 {
        let rough: Vec<f64> = self.blocks.iter().map(|b| 4.0 / b.k as f64 * b.min_jz2_rough(c)).collect();
        let best = rough.iter().copied().fold(f64::INFINITY, f64::min);
        // refine only block sizes that can still win
        let v = self
            .blocks
            .iter()
            .zip(&rough)
            .filter(|(_, r)| **r <= best + 1e-3)
            .map(|(b, _)| b.scaled_variance(c))
            .fold(f64::INFINITY, f64::min);
        match scale {
            ProducibilityScale::Variance => v,
            ProducibilityScale::Wineland => c * c * v,
        }
    }
}

/// `(C, ζ² limit)` pairs of the k-producibility boundary.
pub fn producibility_bound(k: u32, contrast_grid: &[f64], scale: ProducibilityScale) -> Result<Vec<(f64, f64)>> {
    let curve = ProducibilityCurve::new(k)?;
    Ok(contrast_grid.iter().map(|&c| (c, curve.limit(c, scale))).collect())
}

/// Adaptive Gauss-Legendre quadrature: an interval is accepted when rules
/// of `order` and `2 order` nodes agree within `tol` scaled by its share of
/// the domain.
pub fn integrate_adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, order: usize, tol: f64) -> f64 {
    let lo = GaussLegendre::new(NonZeroUsize::new(order.max(2)).expect("order >= 2"));
    let hi = GaussLegendre::new(NonZeroUsize::new(2 * order.max(2)).expect("order >= 2"));
    // a few initial panels so that a narrow peak cannot hide between nodes
    let panels = 8;
    let mut stack: Vec<(f64, f64, usize)> = (0..panels)
        .map(|i| (a + (b - a) * i as f64 / panels as f64, a + (b - a) * (i + 1) as f64 / panels as f64, 0))
        .collect();
    let mut total = 0.0;
    let width = b - a;
    while let Some((x0, x1, depth)) = stack.pop() {
        let coarse = lo.integrate(x0, x1, f);
        let fine = hi.integrate(x0, x1, f);
        if (fine - coarse).abs() <= tol * (x1 - x0) / width || depth >= 40 {
            total += fine;
        } else {
            let mid = 0.5 * (x0 + x1);
            stack.push((x0, mid, depth + 1));
            stack.push((mid, x1, depth + 1));
        }
    }
    total
}

/// Quadrature settings for [`overlap_probability_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureOptions {
    pub order: usize,
    pub tol: f64,
    /// Half-width of the contrast window in beta standard deviations.
    pub width_sd: f64,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        QuadratureOptions { order: 10, tol: 1e-11, width_sd: 40.0 }
    }
}

/// Probability that `(C_b, ζ²)` lies in `region` when `C_b` follows the
/// moment-matched beta and `ζ²` the moment-matched gamma.
pub fn overlap_probability(c_b: &MomentEstimate, zeta_sq: &MomentEstimate, region: Region) -> Result<f64> {
    overlap_probability_with(c_b, zeta_sq, region, QuadratureOptions::default())
}

pub fn overlap_probability_with(
    c_b: &MomentEstimate,
    zeta_sq: &MomentEstimate,
    region: Region,
    opts: QuadratureOptions,
) -> Result<f64> {
    let beta = ScaledBeta::from_moments(c_b.mean, c_b.std_error.powi(2))?;
    let gamma = MatchedGamma::from_moments(zeta_sq.mean, zeta_sq.std_error.powi(2))?;
    let (lo, hi) = beta.support(opts.width_sd);
    let p = match region {
        Region::All => integrate_adaptive(&|c| beta.pdf(c), lo, hi, opts.order, opts.tol),
        Region::Bell => {
            let inner = |c: f64| z_bound(c.abs().min(1.0), 0.0).map(|z| gamma.cdf(z)).unwrap_or(0.0);
            integrate_adaptive(&|c| beta.pdf(c) * inner(c), lo, hi, opts.order, opts.tol)
        }
        Region::KProducible { k, scale } => {
            let curve = ProducibilityCurve::new(k)?;
            integrate_adaptive(
                &|c| beta.pdf(c) * (1.0 - gamma.cdf(curve.limit(c, scale))),
                lo,
                hi,
                opts.order,
                opts.tol,
            )
        }
    };
    if !p.is_finite() {
        return Err(Error::Numerical("overlap integral did not converge".into()));
    }
    Ok(p.clamp(0.0, 1.0))
}

/// Finite-statistics analysis of the mixture of an optimally squeezed
/// state and the product state along `a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdversaryReport {
    pub w1: f64,
    pub w2: f64,
    pub q_star: f64,
    pub p_star: f64,
    pub m_required: f64,
}

/// Squeezed state maximising the violation at a fixed angle.
#[derive(Debug, Clone)]
pub struct OptimizedSqueezing {
    pub twist_angle: f64,
    /// Rotation about `x` that brings the squeezed quadrature onto `y`.
    pub tilt: f64,
    pub witness: f64,
    pub state: DickeState,
    pub a: SpinAxis,
    pub n: SpinAxis,
}

/// Witness of the twisted `x` state with the best squeezed axis in the
/// `y-z` plane, `n = a cos θ + x sin θ`. Returns `(W, tilt)`.
fn twisted_witness(n_atoms: usize, twist: f64, theta: f64) -> Result<(f64, f64)> {
    let s = twisted(n_atoms, twist)?;
    let (zeta, psi) = minor_quadrature(&s);
    let c_x = 2.0 * s.mean_spin_vec([1.0, 0.0, 0.0]) / n_atoms as f64;
    let m = MomentSet::for_witness(c_x * theta.sin(), zeta, theta.cos());
    // R(-ψ, 0) turns the squeezed quadrature onto y
    Ok((witness_value(&m), reduce_axis_angle(-psi)))
}

/// Golden-section search over the twisting strength followed by the
/// optimal squeezed axis; tolerance about `1e-6` in `W`.
pub fn optimize_squeezed_witness(n_atoms: usize, theta: f64) -> Result<OptimizedSqueezing> {
    if n_atoms < 2 {
        return Err(invalid("need at least two atoms"));
    }
    let w = |t: f64| twisted_witness(n_atoms, t, theta).map(|r| r.0).unwrap_or(f64::INFINITY);
    // coarse log scan to bracket the best twist
    let grid: Vec<f64> = (0..=240).map(|i| 10f64.powf(-5.0 + 5.0 * i as f64 / 240.0)).collect();
    let vals: Vec<f64> = grid.iter().map(|&t| w(t)).collect();
    let ib = vals
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let (mut lo, mut hi) = (grid[ib.saturating_sub(1)], grid[(ib + 1).min(grid.len() - 1)]);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut x1, mut x2) = (hi - g * (hi - lo), lo + g * (hi - lo));
    let (mut f1, mut f2) = (w(x1), w(x2));
    for _ in 0..100 {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = w(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = w(x2);
        }
        if hi - lo < 1e-12 * hi {
            break;
        }
    }
    let twist = if f1 < f2 { x1 } else { x2 };
    let (_, angle) = twisted_witness(n_atoms, twist, theta)?;
    let state = rotate(&twisted(n_atoms, twist)?, &RotationPulse::new(angle, 0.0)?);
    let a = SpinAxis::Y;
    let n = SpinAxis::in_plane(&a, &SpinAxis::X, theta);
    let witness = witness_from_state(&state, &a, &n)?;
    Ok(OptimizedSqueezing { twist_angle: twist, tilt: angle, witness, state, a, n })
}

/// `ln 0.05 / ln(1 - q)`: repetitions after which the adversary is caught
/// with probability 95%.
pub fn m_required(q_star: f64) -> f64 {
    0.05f64.ln() / (-q_star).ln_1p()
}

/// Report from given component witnesses.
pub fn adversary_from_witnesses(w1: f64, w2: f64, m_total: u64) -> Result<AdversaryReport> {
    if !(w1 < 0.0) {
        return Err(Error::NoAdversary { w1 });
    }
    if !(w2 > 0.0) {
        return Err(invalid(format!("product-state witness {w2} must be positive")));
    }
    let q = -w1 / (w2 - w1);
    Ok(AdversaryReport {
        w1,
        w2,
        q_star: q,
        p_star: (m_total as f64 * (-q).ln_1p()).exp(),
        m_required: m_required(q),
    })
}

/// Optimises the squeezed component at angle `theta`, evaluates the
/// product state along the squeezed axis, and derives `q*`, `p*` and the
/// number of repetitions needed.
pub fn adversary_report(n_atoms: usize, theta: f64, m_total: u64) -> Result<AdversaryReport> {
    let opt = optimize_squeezed_witness(n_atoms, theta)?;
    let up = coherent_state(n_atoms, &opt.a)?;
    let w2 = witness_from_state(&up, &opt.a, &opt.n)?;
    adversary_from_witnesses(opt.witness, w2, m_total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn db_examples() {
        assert_eq!(db(1.0).unwrap(), 0.0);
        assert!((db(0.2832).unwrap() + 5.48).abs() < 0.01);
        assert!((db(10.0).unwrap() - 10.0).abs() < 1e-15);
        assert!(db(0.0).is_err());
        assert!(db(-1.0).is_err());
    }

    #[test]
    fn jackknife_of_mean_is_classical() {
        let v = [1.0, 4.0, 2.0, 8.0, 5.0];
        let j = jackknife(&v, |s| s.iter().sum::<f64>() / s.len() as f64).unwrap();
        let m = mean_estimate(&v).unwrap();
        assert!((j.mean - m.mean).abs() < 1e-14);
        assert!((j.std_error - m.std_error).abs() < 1e-14);
        assert!(jackknife(&v[..1], |s| s[0]).is_err());
    }

    #[test]
    fn constant_samples() {
        let v = 0.1;
        let n = 400.0;
        let samples: Vec<CorrectedSample> = (0..10)
            .map(|i| CorrectedSample {
                ratio: if i % 2 == 0 { v } else { -v },
                n_total: n,
                noise_var: 0.0,
                noise_cov: 0.0,
                noise_var_total: 0.0,
                tau_ms: 0.0,
            })
            .collect();
        let (c, z) = estimate_moments(&samples).unwrap();
        assert!(c.mean.abs() < 1e-15);
        assert!((z.mean - v * v * n).abs() < 1e-12);
        assert!(estimate_moments(&samples[..1]).is_err());
    }

    #[test]
    fn matched_distributions_reproduce_moments() {
        let b = ScaledBeta::from_moments(0.980, 0.002f64.powi(2)).unwrap();
        assert!((b.mean() - 0.980).abs() < 1e-10);
        assert!((b.variance() - 4e-6).abs() < 1e-10);
        assert!((b.alpha - 9800.01).abs() < 1e-6 && (b.beta - 98.99).abs() < 1e-6);
        let g = MatchedGamma::from_moments(0.272, 0.037f64.powi(2)).unwrap();
        assert!((g.mean() - 0.272).abs() < 1e-10);
        assert!((g.variance() - 0.037f64.powi(2)).abs() < 1e-10);
        assert!(ScaledBeta::from_moments(0.9, 0.5).is_err());
    }

    #[test]
    fn spin_half_curve_is_flat() {
        let c = ProducibilityCurve::new(1).unwrap();
        assert!(BlockCurve::new(0).is_err());
        for x in [0.0, 0.3, 0.9, 1.0] {
            assert!((c.limit(x, ProducibilityScale::Variance) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn quadrature_of_polynomial_and_peak() {
        let v = integrate_adaptive(&|x: f64| x * x * x, 0.0, 2.0, 5, 1e-12);
        assert!((v - 4.0).abs() < 1e-12);
        let s = 1e-3;
        let g = |x: f64| (-(x * x) / (2.0 * s * s)).exp() / (s * (2.0 * std::f64::consts::PI).sqrt());
        assert!((integrate_adaptive(&g, -40.0 * s, 40.0 * s, 10, 1e-12) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn adversary_from_known_witnesses() {
        let r = adversary_from_witnesses(-0.25, 0.38 * 1000.0, 10).unwrap();
        assert!((r.m_required / 1000.0 - 4.55).abs() < 0.1);
        assert!(matches!(adversary_from_witnesses(0.1, 5.0, 10), Err(Error::NoAdversary { .. })));
    }

    #[test]
    fn optimised_state_matches_its_moments() {
        let theta = 128f64.to_radians();
        let opt = optimize_squeezed_witness(60, theta).unwrap();
        let (w, _) = twisted_witness(60, opt.twist_angle, theta).unwrap();
        assert!((opt.witness - w).abs() < 1e-9, "{} {}", opt.witness, w);
        assert!(w < 0.0);
    }
}
