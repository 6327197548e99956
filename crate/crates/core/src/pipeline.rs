//! End-to-end emulated measurement: squeezing run, Rabi calibration run,
//! corrections, moment estimates and the witness at a chosen angle.

use crate::emulator::{
    apply_corrections_with, calibrate_preparation, final_state, fit_rabi, theta_of_tau, CorrectedSample, Emulator,
    Measurement, NoiseModel, PulseArea, RabiFitReport, ShotRecord, TrendCorrection,
};
use crate::error::{invalid, Error, Result};
use crate::stats::{db, estimate_moments_with, mean_estimate, witness_estimate, MomentEstimate, NoiseSubtraction, WitnessEstimate};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

/// Settings of one emulated experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub noise: NoiseModel,
    /// `ζ²` of the ideal state at the mean atom number.
    pub target_zeta_sq: f64,
    /// Angle between `a` and `n` at which the witness is evaluated.
    pub theta: f64,
    /// Post-selected shots of the squeezing run.
    pub squeezing_shots: usize,
    /// Durations of the Rabi sweep in ms; the duration reaching `theta` is
    /// appended.
    pub rabi_taus: Vec<f64>,
    /// Post-selected shots per duration.
    pub shots_per_tau: usize,
    /// True pulse area of the emulated Rabi drive.
    pub pulse: PulseArea,
    pub drift: f64,
    pub trend: TrendCorrection,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let noise = NoiseModel::default();
        PipelineConfig {
            noise,
            target_zeta_sq: 0.272,
            theta: 128f64.to_radians(),
            squeezing_shots: 190,
            rabi_taus: (0..11).map(|i| 0.26 * i as f64).collect(),
            shots_per_tau: 10,
            pulse: PulseArea::default(),
            drift: 0.0,
            trend: TrendCorrection::Fixed(noise.clock_slope),
        }
    }
}

/// Expected values of the estimators for the emulated ensemble, with
/// detection noise removed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InjectedValues {
    pub zeta_sq: f64,
    pub contrast: f64,
    pub twist_angle: f64,
    pub tilt: f64,
}

/// Result of [`run_pipeline`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineSummary {
    pub seed: u64,
    pub injected: InjectedValues,
    pub squeezing_kept: usize,
    pub rabi_kept: usize,
    pub c_a: MomentEstimate,
    pub zeta_sq: MomentEstimate,
    pub zeta_sq_raw: MomentEstimate,
    pub rabi: RabiFitReport,
    pub tau_star: f64,
    /// Calibrated angle at `tau_star`.
    pub theta: f64,
    pub c_n: MomentEstimate,
    pub wineland_db: f64,
    pub witness: WitnessEstimate,
    pub witness_raw: WitnessEstimate,
}

/// Shots and corrected samples of one run together with its summary.
#[derive(Debug, Clone)]
pub struct PipelineRecords {
    pub squeezing_shots: Vec<ShotRecord>,
    pub rabi_shots: Vec<ShotRecord>,
    pub squeezing: Vec<CorrectedSample>,
    pub rabi: Vec<CorrectedSample>,
    pub summary: PipelineSummary,
}

/// Calibrated emulator for a configuration; reuse it across seeds so the
/// measurement distributions are computed once.
pub struct Experiment {
    pub config: PipelineConfig,
    pub emulator: Emulator,
    pub injected: InjectedValues,
    pub tau_star: f64,
}

fn atom_number_weights(noise: &NoiseModel) -> Vec<(usize, f64)> {
    let lo = noise.postselect_lo.max(1) as usize;
    if noise.n_sigma == 0.0 {
        let n = noise.n_mean.round().max(1.0) as usize;
        return vec![(n, 1.0)];
    }
    let normal = Normal::new(noise.n_mean, noise.n_sigma).expect("validated noise model");
    let from = lo.max((noise.n_mean - 8.0 * noise.n_sigma).floor().max(1.0) as usize);
    let to = (noise.postselect_hi as f64).min((noise.n_mean + 8.0 * noise.n_sigma).ceil()) as usize;
    let mut w: Vec<(usize, f64)> = (from..=to.max(from))
        .map(|n| (n, normal.cdf(n as f64 + 0.5) - normal.cdf(n as f64 - 0.5)))
        .filter(|x| x.1 > 0.0)
        .collect();
    let total: f64 = w.iter().map(|x| x.1).sum();
    for x in &mut w {
        x.1 /= total;
    }
    w
}

impl Experiment {
    pub fn new(config: PipelineConfig) -> Result<Self> {
        config.noise.validate()?;
        if config.squeezing_shots < 2 || config.shots_per_tau < 2 {
            return Err(invalid("need at least two shots per setting"));
        }
        if config.rabi_taus.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(invalid("Rabi durations must be finite and nonnegative"));
        }
        let n_ref = config.noise.n_mean.round().max(2.0) as usize;
        let mut prep = calibrate_preparation(n_ref, config.target_zeta_sq, &config.noise)?;
        prep.drift = config.drift;
        let tau_star = config.pulse.tau_for(config.theta)?;
        let injected = Self::injected(&config, &prep)?;
        let emulator = Emulator::new(prep, config.noise, config.pulse)?;
        Ok(Experiment { config, emulator, injected, tau_star })
    }

    fn injected(config: &PipelineConfig, prep: &crate::emulator::Preparation) -> Result<InjectedValues> {
        let noise = &config.noise;
        let lambda = match config.trend {
            TrendCorrection::Fixed(s) => s,
            TrendCorrection::None => 0.0,
            // the fitted slope converges to the slope of the mean
            TrendCorrection::Fitted => noise.clock_slope,
        };
        let weights = atom_number_weights(noise);
        if weights.is_empty() {
            return Err(Error::EmptyResult("no atom number inside the post-selection window".into()));
        }
        let mean_n: f64 = weights.iter().map(|(n, w)| *n as f64 * w).sum();
        let (mut zeta, mut vx, mut vz) = (0.0, 0.0, 0.0);
        for &(n, w) in &weights {
            let nf = n as f64;
            let s = final_state(n, noise.n_mean, prep, &config.pulse, Measurement::Squeezing)?;
            let shift = lambda * (nf - mean_n);
            let m = 2.0 * s.mean_spin_vec([0.0, 0.0, 1.0]) / nf;
            // E[N (2S_z/N - shift)²]
            zeta += w * (4.0 * s.second_moment_vec([0.0, 0.0, 1.0]) / nf - 2.0 * nf * shift * m + nf * shift * shift);
            // state entering the Rabi pulse; its pulse turns z towards perp
            let idle = PulseArea { tau0: 0.0, gamma: 0.0, delta: 0.0 };
            let r = final_state(n, noise.n_mean, prep, &idle, Measurement::Rabi { tau_ms: 0.0 })?;
            let perp = [-prep.rabi_phase.sin(), prep.rabi_phase.cos(), 0.0];
            vx += w * 2.0 * r.mean_spin_vec(perp) / nf;
            vz += w * 2.0 * r.mean_spin_vec([0.0, 0.0, 1.0]) / nf;
        }
        Ok(InjectedValues { zeta_sq: zeta, contrast: vx.hypot(vz), twist_angle: prep.twist_angle, tilt: prep.tilt })
    }

    /// Runs both measurement runs with shot seeds derived from `seed`.
    pub fn run(&self, seed: u64) -> Result<PipelineSummary> {
        self.run_with_records(seed).map(|r| r.summary)
    }

    /// As [`Experiment::run`], keeping the raw shots and corrected samples.
    pub fn run_with_records(&self, seed: u64) -> Result<PipelineRecords> {
        let cfg = &self.config;
        let noise = &cfg.noise;
        let (sq, mut index) = self.emulator.run_postselected(Measurement::Squeezing, seed, 0, cfg.squeezing_shots)?;
        let squeezing = apply_corrections_with(&sq, noise, cfg.trend)?;

        let mut taus = cfg.rabi_taus.clone();
        taus.push(self.tau_star);
        let mut rabi_records = Vec::with_capacity(taus.len() * cfg.shots_per_tau);
        for &tau in &taus {
            let (shots, next) =
                self.emulator.run_postselected(Measurement::Rabi { tau_ms: tau }, seed, index, cfg.shots_per_tau)?;
            rabi_records.extend(shots);
            index = next;
        }
        // no trend removal: the Rabi signal itself depends on the phase
        let rabi = apply_corrections_with(&rabi_records, noise, TrendCorrection::None)?;
        let summary = self.analyse(seed, &squeezing, &rabi)?;
        Ok(PipelineRecords { squeezing_shots: sq, rabi_shots: rabi_records, squeezing, rabi, summary })
    }

    fn analyse(&self, seed: u64, squeezing: &[CorrectedSample], rabi: &[CorrectedSample]) -> Result<PipelineSummary> {
        let noise = &self.config.noise;
        let nominal = noise.det_sigma_1.powi(2) + noise.det_sigma_2.powi(2);
        let (c_a, zeta_sq) = estimate_moments_with(squeezing, NoiseSubtraction::Propagated, nominal)?;
        let (_, zeta_sq_raw) = estimate_moments_with(squeezing, NoiseSubtraction::None, nominal)?;
        let points: Vec<(f64, f64)> = rabi.iter().map(|s| (s.tau_ms, s.ratio)).collect();
        let fit = fit_rabi(&points)?;
        let at_star: Vec<f64> = rabi.iter().filter(|s| s.tau_ms == self.tau_star).map(|s| s.ratio).collect();
        if at_star.len() < 2 {
            return Err(Error::EmptyResult("fewer than two shots left at the witness angle".into()));
        }
        let c_n = mean_estimate(&at_star)?;
        let c_a_clamped = c_a.mean.clamp(-fit.fit.contrast, fit.fit.contrast);
        let theta = theta_of_tau(&fit.fit, self.tau_star, c_a_clamped)?;
        let cos = theta.cos();
        let wineland = zeta_sq.mean / (fit.fit.contrast * fit.fit.contrast);
        Ok(PipelineSummary {
            seed,
            injected: self.injected,
            squeezing_kept: squeezing.len(),
            rabi_kept: rabi.len(),
            c_a,
            zeta_sq,
            zeta_sq_raw,
            tau_star: self.tau_star,
            theta,
            c_n,
            wineland_db: db(wineland).unwrap_or(f64::NAN),
            witness: witness_estimate(&c_n, &zeta_sq, cos),
            witness_raw: witness_estimate(&c_n, &zeta_sq_raw, cos),
            rabi: fit,
        })
    }
}

/// Calibrates and runs one seeded experiment.
pub fn run_pipeline(config: &PipelineConfig, seed: u64) -> Result<PipelineSummary> {
    Experiment::new(config.clone())?.run(seed)
}
