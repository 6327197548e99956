//! One function per subcommand: typed config in, JSON report out.

use crate::output::{line_plot_svg, out_dir, write_csv, write_json};
use crate::CliError;
use bellcorr::emulator::{
    apply_corrections_with, fit_rabi, minor_quadrature, CorrectedSample, NoiseModel, PulseArea, RabiFitReport,
    ShotRecord, TrendCorrection,
};
use bellcorr::lhv::{brute_force_min, classical_min, BRUTE_FORCE_MAX};
use bellcorr::pipeline::{Experiment, PipelineConfig, PipelineSummary};
use bellcorr::spin::{coherent_state, husimi_q, oat_evolve, rotate, DickeState, OatParams, RotationPulse, SpinAxis};
use bellcorr::stats::{
    adversary_report, overlap_probability, producibility_bound, MomentEstimate, ProducibilityScale, Region,
};
use bellcorr::witness::{witness_curve, witness_curve_from_moments};
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

fn grid(lo: f64, hi: f64, points: usize) -> Result<Vec<f64>, CliError> {
    if points < 2 || !(hi > lo) {
        return Err(CliError::config("grid needs at least 2 points and max > min"));
    }
    Ok((0..points).map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64).collect())
}

/// Ideal state used by the state-based commands.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StateSource {
    /// Contrast and `ζ²` only (witness curve).
    Moments,
    /// Coherent state along `x`.
    Coherent,
    /// Twisted `x` state, squeezed quadrature turned onto `y`.
    Oat,
}

/// The state and its frame `(a, b)`.
fn build_state(source: StateSource, n_atoms: usize, twist: f64) -> Result<DickeState, CliError> {
    let x = coherent_state(n_atoms, &SpinAxis::X)?;
    match source {
        StateSource::Coherent => Ok(x),
        StateSource::Oat => {
            let s = oat_evolve(&x, &OatParams { twist_angle: twist, n_atoms })?;
            let (_, psi) = minor_quadrature(&s);
            Ok(rotate(&s, &RotationPulse::new(-psi, 0.0)?))
        }
        StateSource::Moments => Err(CliError::config("source 'moments' has no state")),
    }
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WitnessCurveConfig {
    pub source: StateSource,
    pub contrast: f64,
    pub zeta_sq: f64,
    pub n_atoms: usize,
    pub twist_angle: f64,
    pub theta_min_deg: f64,
    pub theta_max_deg: f64,
    pub points: usize,
    pub svg: bool,
    pub output_dir: Option<PathBuf>,
}

impl Default for WitnessCurveConfig {
    fn default() -> Self {
        WitnessCurveConfig {
            source: StateSource::Moments,
            contrast: 0.980,
            zeta_sq: 0.272,
            n_atoms: 476,
            twist_angle: 0.003,
            theta_min_deg: 0.0,
            theta_max_deg: 180.0,
            points: 361,
            svg: false,
            output_dir: None,
        }
    }
}

#[derive(Serialize)]
struct CurveRow {
    theta_deg: f64,
    witness: f64,
}

#[derive(Serialize)]
pub struct WitnessCurveReport {
    command: &'static str,
    source: StateSource,
    points: usize,
    min_witness: f64,
    theta_at_min_deg: f64,
    files: Vec<String>,
}

pub fn witness_curve_cmd(cfg: WitnessCurveConfig) -> Result<WitnessCurveReport, CliError> {
    let thetas: Vec<f64> = grid(cfg.theta_min_deg, cfg.theta_max_deg, cfg.points)?.iter().map(|d| d.to_radians()).collect();
    let curve = match cfg.source {
        StateSource::Moments => {
            if !(cfg.contrast.abs() <= 1.0 && cfg.zeta_sq >= 0.0) {
                return Err(CliError::config("need |contrast| <= 1 and zeta_sq >= 0"));
            }
            witness_curve_from_moments(cfg.contrast, cfg.zeta_sq, &thetas)
        }
        src => {
            let s = build_state(src, cfg.n_atoms, cfg.twist_angle)?;
            witness_curve(&s, &SpinAxis::Y, &SpinAxis::X, &thetas)?
        }
    };
    let rows: Vec<CurveRow> = curve.iter().map(|&(t, w)| CurveRow { theta_deg: t.to_degrees(), witness: w }).collect();
    let best = rows.iter().min_by(|a, b| a.witness.total_cmp(&b.witness)).expect("grid is nonempty");
    let mut files = Vec::new();
    if let Some(dir) = out_dir(&cfg.output_dir)? {
        let p = dir.join("witness_curve.csv");
        write_csv(&p, &rows)?;
        files.push(p.display().to_string());
        if cfg.svg {
            let p = dir.join("witness_curve.svg");
            let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.theta_deg, r.witness)).collect();
            std::fs::write(&p, line_plot_svg(&pts, "theta (deg)", "W")).map_err(|e| CliError::io(&p, e))?;
            files.push(p.display().to_string());
        }
    }
    Ok(WitnessCurveReport {
        command: "witness-curve",
        source: cfg.source,
        points: rows.len(),
        min_witness: best.witness,
        theta_at_min_deg: best.theta_deg,
        files,
    })
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmulateConfig {
    pub seed: Option<u64>,
    pub noise: NoiseModel,
    pub target_zeta_sq: f64,
    pub theta_deg: f64,
    pub squeezing_shots: usize,
    pub rabi_taus: Vec<f64>,
    pub shots_per_tau: usize,
    pub pulse: PulseArea,
    pub drift: f64,
    pub trend: Option<TrendCorrection>,
    pub output_dir: Option<PathBuf>,
}

impl Default for EmulateConfig {
    fn default() -> Self {
        let p = PipelineConfig::default();
        EmulateConfig {
            seed: None,
            noise: p.noise,
            target_zeta_sq: p.target_zeta_sq,
            theta_deg: p.theta.to_degrees(),
            squeezing_shots: p.squeezing_shots,
            rabi_taus: p.rabi_taus,
            shots_per_tau: p.shots_per_tau,
            pulse: p.pulse,
            drift: p.drift,
            trend: None,
            output_dir: None,
        }
    }
}

#[derive(Serialize)]
pub struct EmulateReport {
    command: &'static str,
    theta_deg: f64,
    summary: PipelineSummary,
    files: Vec<String>,
}

#[derive(Serialize)]
struct ShotRow {
    seed: u64,
    tau_ms: f64,
    n1_det: f64,
    n2_det: f64,
}

impl From<&ShotRecord> for ShotRow {
    fn from(r: &ShotRecord) -> Self {
        ShotRow { seed: r.seed_id, tau_ms: r.tau_ms, n1_det: r.n1_det, n2_det: r.n2_det }
    }
}

#[derive(Serialize)]
struct CorrectedRow {
    run: &'static str,
    tau_ms: f64,
    ratio: f64,
    n_total: f64,
    noise_var: f64,
}

pub fn emulate_cmd(cfg: EmulateConfig) -> Result<EmulateReport, CliError> {
    let seed = cfg.seed.ok_or_else(|| CliError::config("emulate needs a seed (--seed or \"seed\" in the config)"))?;
    let pipeline = PipelineConfig {
        noise: cfg.noise,
        target_zeta_sq: cfg.target_zeta_sq,
        theta: cfg.theta_deg.to_radians(),
        squeezing_shots: cfg.squeezing_shots,
        rabi_taus: cfg.rabi_taus,
        shots_per_tau: cfg.shots_per_tau,
        pulse: cfg.pulse,
        drift: cfg.drift,
        trend: cfg.trend.unwrap_or(TrendCorrection::Fixed(cfg.noise.clock_slope)),
    };
    let records = Experiment::new(pipeline)?.run_with_records(seed)?;
    let mut files = Vec::new();
    if let Some(dir) = out_dir(&cfg.output_dir)? {
        let shots: Vec<ShotRow> = records.squeezing_shots.iter().chain(&records.rabi_shots).map(ShotRow::from).collect();
        let p = dir.join("shots.csv");
        write_csv(&p, &shots)?;
        files.push(p.display().to_string());
        let row = |run: &'static str| move |s: &CorrectedSample| CorrectedRow {
            run,
            tau_ms: s.tau_ms,
            ratio: s.ratio,
            n_total: s.n_total,
            noise_var: s.noise_var,
        };
        let corrected: Vec<CorrectedRow> =
            records.squeezing.iter().map(row("squeezing")).chain(records.rabi.iter().map(row("rabi"))).collect();
        let p = dir.join("corrected.csv");
        write_csv(&p, &corrected)?;
        files.push(p.display().to_string());
        let p = dir.join("fit.json");
        write_json(&p, &records.summary.rabi)?;
        files.push(p.display().to_string());
    }
    Ok(EmulateReport { command: "emulate", theta_deg: records.summary.theta.to_degrees(), summary: records.summary, files })
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    /// CSV with `tau_ms,ratio` or shot records `seed,tau_ms,n1_det,n2_det`.
    pub input: Option<PathBuf>,
    pub noise: NoiseModel,
    pub output_dir: Option<PathBuf>,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig { input: None, noise: NoiseModel::default(), output_dir: None }
    }
}

#[derive(Serialize)]
pub struct FitReport {
    command: &'static str,
    samples: usize,
    fit: RabiFitReport,
}

#[derive(Deserialize)]
struct RatioRow {
    tau_ms: f64,
    ratio: f64,
}

#[derive(Deserialize)]
struct ShotIn {
    seed: u64,
    tau_ms: f64,
    n1_det: f64,
    n2_det: f64,
}

pub fn fit_cmd(cfg: FitConfig) -> Result<FitReport, CliError> {
    let path = cfg.input.ok_or_else(|| CliError::config("fit-rabi needs an input CSV (--input)"))?;
    let mut rdr = csv::Reader::from_path(&path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    let headers = rdr.headers().map_err(|e| CliError::config(format!("{}: {e}", path.display())))?.clone();
    let bad = |e: csv::Error| CliError::config(format!("{}: {e}", path.display()));
    let points: Vec<(f64, f64)> = if headers.iter().any(|h| h == "n1_det") {
        let shots: Vec<ShotRecord> = rdr
            .deserialize::<ShotIn>()
            .map(|r| r.map(|s| ShotRecord { seed_id: s.seed, tau_ms: s.tau_ms, n1_det: s.n1_det, n2_det: s.n2_det }))
            .collect::<Result<_, _>>()
            .map_err(bad)?;
        // squeezing-run shots sit at τ = 0, where the pulse area is τ₀ as well
        apply_corrections_with(&shots, &cfg.noise, TrendCorrection::None)?.iter().map(|s| (s.tau_ms, s.ratio)).collect()
    } else {
        rdr.deserialize::<RatioRow>().map(|r| r.map(|x| (x.tau_ms, x.ratio))).collect::<Result<_, _>>().map_err(bad)?
    };
    let fit = fit_rabi(&points)?;
    if let Some(dir) = out_dir(&cfg.output_dir)? {
        write_json(&dir.join("fit.json"), &fit)?;
    }
    Ok(FitReport { command: "fit-rabi", samples: points.len(), fit })
}

#[derive(Debug, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct LhvConfig {
    pub n: u64,
    pub output_dir: Option<PathBuf>,
}

#[derive(Serialize)]
pub struct LhvReport {
    command: &'static str,
    n: u64,
    min: i64,
    counts: [u64; 4],
    brute_force_min: Option<i64>,
}

pub fn lhv_cmd(cfg: LhvConfig) -> Result<LhvReport, CliError> {
    let (min, s) = classical_min(cfg.n)?;
    let brute = if cfg.n as usize <= BRUTE_FORCE_MAX { Some(brute_force_min(cfg.n as usize)?.0) } else { None };
    let r = LhvReport { command: "lhv-check", n: cfg.n, min, counts: s.counts, brute_force_min: brute };
    if let Some(dir) = out_dir(&cfg.output_dir)? {
        write_json(&dir.join("lhv.json"), &r)?;
    }
    Ok(r)
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdversaryConfig {
    pub n: usize,
    pub theta_deg: f64,
    pub m: u64,
    pub output_dir: Option<PathBuf>,
}

impl Default for AdversaryConfig {
    fn default() -> Self {
        AdversaryConfig { n: 476, theta_deg: 128.0, m: 200, output_dir: None }
    }
}

#[derive(Serialize)]
pub struct AdversaryOut {
    command: &'static str,
    n: usize,
    theta_deg: f64,
    m: u64,
    w1: f64,
    w2: f64,
    q_star: f64,
    p_star: f64,
    m_required: f64,
}

pub fn adversary_cmd(cfg: AdversaryConfig) -> Result<AdversaryOut, CliError> {
    let r = adversary_report(cfg.n, cfg.theta_deg.to_radians(), cfg.m)?;
    let out = AdversaryOut {
        command: "adversary",
        n: cfg.n,
        theta_deg: cfg.theta_deg,
        m: cfg.m,
        w1: r.w1,
        w2: r.w2,
        q_star: r.q_star,
        p_star: r.p_star,
        m_required: r.m_required,
    };
    if let Some(dir) = out_dir(&cfg.output_dir)? {
        write_json(&dir.join("adversary.json"), &out)?;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, Deserialize, Serialize, PartialEq)]
#[serde(rename_all = "snake_case")]
pub enum RegionName {
    All,
    Bell,
    KProducible,
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OverlapConfig {
    pub region: RegionName,
    pub k: u32,
    pub scale: ProducibilityScale,
    pub c_b: f64,
    pub c_b_se: f64,
    pub zeta_sq: f64,
    pub zeta_sq_se: f64,
    pub output_dir: Option<PathBuf>,
}

impl Default for OverlapConfig {
    fn default() -> Self {
        OverlapConfig {
            region: RegionName::Bell,
            k: 24,
            scale: ProducibilityScale::default(),
            c_b: 0.980,
            c_b_se: 0.002,
            zeta_sq: 0.272,
            zeta_sq_se: 0.037,
            output_dir: None,
        }
    }
}

#[derive(Serialize)]
pub struct OverlapOut {
    command: &'static str,
    region: Region,
    c_b: MomentEstimate,
    zeta_sq: MomentEstimate,
    probability: f64,
}

pub fn overlap_cmd(cfg: OverlapConfig) -> Result<OverlapOut, CliError> {
    let c_b = MomentEstimate::new(cfg.c_b, cfg.c_b_se, 1)?;
    let zeta_sq = MomentEstimate::new(cfg.zeta_sq, cfg.zeta_sq_se, 1)?;
    let region = match cfg.region {
        RegionName::All => Region::All,
        RegionName::Bell => Region::Bell,
        RegionName::KProducible => Region::KProducible { k: cfg.k, scale: cfg.scale },
    };
    let probability = overlap_probability(&c_b, &zeta_sq, region)?;
    let out = OverlapOut { command: "overlap", region, c_b, zeta_sq, probability };
    if let Some(dir) = out_dir(&cfg.output_dir)? {
        write_json(&dir.join("overlap.json"), &out)?;
    }
    Ok(out)
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProducibilityConfig {
    pub k: u32,
    pub scale: ProducibilityScale,
    pub contrast_min: f64,
    pub contrast_max: f64,
    pub points: usize,
    pub svg: bool,
    pub output_dir: Option<PathBuf>,
}

impl Default for ProducibilityConfig {
    fn default() -> Self {
        ProducibilityConfig {
            k: 24,
            scale: ProducibilityScale::default(),
            contrast_min: 0.0,
            contrast_max: 1.0,
            points: 201,
            svg: false,
            output_dir: None,
        }
    }
}

#[derive(Serialize)]
struct BoundRow {
    contrast: f64,
    zeta_sq_limit: f64,
}

#[derive(Serialize)]
pub struct ProducibilityOut {
    command: &'static str,
    k: u32,
    scale: ProducibilityScale,
    points: usize,
    files: Vec<String>,
}

pub fn producibility_cmd(cfg: ProducibilityConfig) -> Result<ProducibilityOut, CliError> {
    if !(0.0..=1.0).contains(&cfg.contrast_min) || !(0.0..=1.0).contains(&cfg.contrast_max) {
        return Err(CliError::config("contrast range must lie in [0, 1]"));
    }
    let g = grid(cfg.contrast_min, cfg.contrast_max, cfg.points)?;
    let rows: Vec<BoundRow> = producibility_bound(cfg.k, &g, cfg.scale)?
        .into_iter()
        .map(|(contrast, zeta_sq_limit)| BoundRow { contrast, zeta_sq_limit })
        .collect();
    let mut files = Vec::new();
    if let Some(dir) = out_dir(&cfg.output_dir)? {
        let p = dir.join(format!("producibility_k{}.csv", cfg.k));
        write_csv(&p, &rows)?;
        files.push(p.display().to_string());
        if cfg.svg {
            let p = dir.join(format!("producibility_k{}.svg", cfg.k));
            let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.contrast, r.zeta_sq_limit)).collect();
            std::fs::write(&p, line_plot_svg(&pts, "contrast", "zeta^2 limit")).map_err(|e| CliError::io(&p, e))?;
            files.push(p.display().to_string());
        }
    }
    Ok(ProducibilityOut { command: "producibility", k: cfg.k, scale: cfg.scale, points: rows.len(), files })
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HusimiConfig {
    pub source: StateSource,
    pub n_atoms: usize,
    pub twist_angle: f64,
    pub theta_points: usize,
    pub phi_points: usize,
    pub output_dir: Option<PathBuf>,
}

impl Default for HusimiConfig {
    fn default() -> Self {
        HusimiConfig { source: StateSource::Oat, n_atoms: 100, twist_angle: 0.02, theta_points: 91, phi_points: 181, output_dir: None }
    }
}

#[derive(Serialize)]
struct HusimiRow {
    theta_deg: f64,
    phi_deg: f64,
    q: f64,
}

#[derive(Serialize)]
pub struct HusimiOut {
    command: &'static str,
    source: StateSource,
    n_atoms: usize,
    points: usize,
    max_q: f64,
    files: Vec<String>,
}

pub fn husimi_cmd(cfg: HusimiConfig) -> Result<HusimiOut, CliError> {
    let state = build_state(cfg.source, cfg.n_atoms, cfg.twist_angle)?;
    let thetas = grid(0.0, 180.0, cfg.theta_points)?;
    let phis = grid(-180.0, 180.0, cfg.phi_points)?;
    let pts: Vec<(f64, f64)> = thetas.iter().flat_map(|&t| phis.iter().map(move |&p| (t, p))).collect();
    let rad: Vec<(f64, f64)> = pts.iter().map(|&(t, p)| (t.to_radians(), p.to_radians())).collect();
    let q = husimi_q(&state, &rad)?;
    let mut files = Vec::new();
    if let Some(dir) = out_dir(&cfg.output_dir)? {
        let rows: Vec<HusimiRow> =
            pts.iter().zip(&q).map(|(&(theta_deg, phi_deg), &q)| HusimiRow { theta_deg, phi_deg, q }).collect();
        let p = dir.join("husimi.csv");
        write_csv(&p, &rows)?;
        files.push(p.display().to_string());
    }
    Ok(HusimiOut {
        command: "husimi",
        source: cfg.source,
        n_atoms: cfg.n_atoms,
        points: q.len(),
        max_q: q.iter().copied().fold(0.0, f64::max),
        files,
    })
}
