//! Command-line experiment driver.
//!
//! Every subcommand resolves to an [`ExperimentConfig`]: defaults, then an
//! optional `--config` JSON file (a plain config or a run manifest), then
//! command-line overrides. Results go to `--out` as CSV (stdout otherwise)
//! and a `<out>.manifest.json` that `--config` accepts to rerun the
//! experiment bit-identically.

use crate::cpm::{count_distinguishable_paths, cpm_rate, n_if_min_index, tilted_if, CpmConfig, CpmFilter, NdRow, ND_CSV_HEADER};
use crate::equalizer::{bler_point, uncoded_ber_point, BlerBudget, BER_CSV_HEADER, BLER_CSV_HEADER};
use crate::error::{Result, ZxmError};
use crate::estimation::{
    chi_loss, chi_scenario, crlb_phase_bounds, fisher_info_1bit, mc_mse, Dither, EstPulse, EstimationScenario, HighSnrConstants,
    PhaseEstimator, SnrRegime,
};
use crate::fec::LdpcCode;
use crate::rate::{se_point, SE_CSV_HEADER};
use crate::rll::{max_entropy_rate, RllFsm};
use crate::rng::{child_seed, stream};
use crate::waveform::{analytic_power, estimate_psd, ChainConfig, PsdOptions, Source};
use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

/// Environment variable consulted when `--workers` is absent.
pub const WORKERS_ENV: &str = "ZXM_WORKERS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub workers: Option<usize>,
    pub experiment: Experiment,
}

fn default_seed() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "subcommand", content = "params", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Experiment {
    SeSweep(SeSweepParams),
    Ber(BerParams),
    Bler(BlerParams),
    Crlb(EstimationParams),
    LsMse(EstimationParams),
    Chi(ChiParams),
    CpmPaths(CpmPathsParams),
    CpmRate(CpmRateParams),
    RllInfo(RllInfoParams),
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::SeSweep(_) => "se-sweep",
            Experiment::Ber(_) => "ber",
            Experiment::Bler(_) => "bler",
            Experiment::Crlb(_) => "crlb",
            Experiment::LsMse(_) => "ls-mse",
            Experiment::Chi(_) => "chi",
            Experiment::CpmPaths(_) => "cpm-paths",
            Experiment::CpmRate(_) => "cpm-rate",
            Experiment::RllInfo(_) => "rll-info",
        }
    }
}

fn db_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).round() as usize;
    (0..=n).map(|i| lo + i as f64 * step).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeSweepParams {
    pub m_tx: usize,
    pub m: usize,
    pub source: Source,
    pub snr_db: Vec<f64>,
    /// Symbols per rate estimate.
    pub n: usize,
    pub psd: PsdOptions,
}

impl Default for SeSweepParams {
    fn default() -> Self {
        SeSweepParams {
            m_tx: 1,
            m: 1,
            source: Source::Iud,
            snr_db: db_grid(-10.0, 30.0, 5.0),
            n: 100_000,
            psd: PsdOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BerParams {
    pub m_tx: usize,
    pub m: Vec<usize>,
    pub d: usize,
    pub esn0_db: Vec<f64>,
    /// Symbols per rail and frame.
    pub symbols: usize,
    pub frames: usize,
}

impl Default for BerParams {
    fn default() -> Self {
        BerParams {
            m_tx: 2,
            m: vec![1, 2],
            d: 1,
            esn0_db: db_grid(0.0, 12.0, 2.0),
            symbols: 2000,
            frames: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlerParams {
    pub m_tx: usize,
    pub m: Vec<usize>,
    pub ebn0_db: Vec<f64>,
    pub budget: BlerBudget,
}

impl Default for BlerParams {
    fn default() -> Self {
        BlerParams {
            m_tx: 2,
            m: vec![1, 2, 3],
            ebn0_db: db_grid(7.0, 10.0, 0.5),
            budget: BlerBudget::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimationParams {
    /// Pilot count.
    pub n: usize,
    pub m: Vec<usize>,
    pub esn0_db: Vec<f64>,
    pub rolloff: f64,
    pub phi: f64,
    pub dither: Dither,
    /// Seed of the pilot sequence.
    pub pilot_seed: u64,
    pub high_snr: HighSnrConstants,
    /// Monte Carlo trials per point (estimator runs only).
    pub trials: usize,
}

impl Default for EstimationParams {
    fn default() -> Self {
        EstimationParams {
            n: 100,
            m: vec![1, 4],
            esn0_db: db_grid(-20.0, 40.0, 5.0),
            rolloff: 0.2,
            phi: 0.3,
            dither: Dither::Uniform,
            pilot_seed: 1,
            high_snr: HighSnrConstants::default(),
            trials: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChiParams {
    pub esn0_db: Vec<f64>,
    /// Phase grid points over `[0, 2π)`.
    pub points: usize,
}

impl Default for ChiParams {
    fn default() -> Self {
        ChiParams {
            esn0_db: vec![-30.0, -15.0, 0.0, 15.0],
            points: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CpmPathsParams {
    pub m_cpm: usize,
    pub m: Vec<usize>,
    /// IF offsets as multiples of `h = 1/M_cpm`; empty means `n_IF,min`.
    pub c: Vec<i64>,
}

impl Default for CpmPathsParams {
    fn default() -> Self {
        CpmPathsParams {
            m_cpm: 8,
            m: (1..=8).collect(),
            c: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CpmRateParams {
    pub m_cpm: usize,
    pub m: Vec<usize>,
    /// IF offset as a multiple of `h = 1/M_cpm`.
    pub c: i64,
    pub filter: CpmFilter,
    pub esn0_db: Vec<f64>,
    /// Symbols per estimate.
    pub n: usize,
}

impl Default for CpmRateParams {
    fn default() -> Self {
        CpmRateParams {
            m_cpm: 4,
            m: (1..=4).collect(),
            c: 0,
            filter: CpmFilter::Rect,
            esn0_db: db_grid(-5.0, 20.0, 5.0),
            n: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RllInfoParams {
    pub d: usize,
}

impl Default for RllInfoParams {
    fn default() -> Self {
        RllInfoParams { d: 1 }
    }
}

/// Record written next to every CSV output.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub config: ExperimentConfig,
    pub version: String,
    pub wall_time_s: f64,
    pub rows: usize,
}

pub fn version_string() -> String {
    format!("v{}-{}", env!("CARGO_PKG_VERSION"), option_env!("ZXM_GIT_REV").unwrap_or("untracked"))
}

#[derive(Parser, Debug)]
#[command(name = "zxm", version, about = "Zero-crossing modulation experiments with 1-bit oversampled receivers")]
struct Cli {
    /// JSON experiment config or run manifest.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// CSV output path; a manifest is written to `<out>.manifest.json`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (falls back to ZXM_WORKERS).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Rate and spectral efficiency over SNR.
    SeSweep {
        #[arg(long)]
        mtx: Option<usize>,
        #[arg(long)]
        m: Option<usize>,
        /// Minimum runlength; 0 selects the i.u.d. source.
        #[arg(long)]
        d: Option<usize>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        snr: Option<Vec<f64>>,
        #[arg(long)]
        n: Option<usize>,
    },
    /// Uncoded MAP detection error rate.
    Ber {
        #[arg(long)]
        mtx: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        m: Option<Vec<usize>>,
        #[arg(long)]
        d: Option<usize>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        esn0: Option<Vec<f64>>,
        #[arg(long)]
        symbols: Option<usize>,
        #[arg(long)]
        frames: Option<usize>,
    },
    /// LDPC-coded block error rate.
    Bler {
        #[arg(long)]
        mtx: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        m: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        ebn0: Option<Vec<f64>>,
        #[arg(long)]
        max_frames: Option<usize>,
        #[arg(long)]
        min_errors: Option<usize>,
    },
    /// Numeric phase CRLB and closed-form bounds.
    Crlb {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        m: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        esn0: Option<Vec<f64>>,
    },
    /// Least-squares phase estimator MSE next to the CRLB.
    LsMse {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        m: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        esn0: Option<Vec<f64>>,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Quantization loss over the phase.
    Chi {
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        esn0: Option<Vec<f64>>,
        #[arg(long)]
        points: Option<usize>,
    },
    /// Distinguishable CPM paths under 1-bit quantization.
    CpmPaths {
        #[arg(long)]
        mcpm: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        m: Option<Vec<usize>>,
        /// IF offsets: `min`, decimals or fractions, multiples of 1/M_cpm.
        #[arg(long, value_delimiter = ',')]
        nif: Option<Vec<String>>,
    },
    /// Achievable rate of CPM with a 1-bit receiver.
    CpmRate {
        #[arg(long)]
        mcpm: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        m: Option<Vec<usize>>,
        #[arg(long)]
        nif: Option<String>,
        #[arg(long, value_enum)]
        filter: Option<FilterArg>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        esn0: Option<Vec<f64>>,
        #[arg(long)]
        n: Option<usize>,
    },
    /// Maximum-entropy (d, ∞) law.
    RllInfo {
        #[arg(long)]
        d: Option<usize>,
    },
}

#[derive(clap::ValueEnum, Clone, Copy, Debug)]
enum FilterArg {
    Delta,
    Rect,
}

fn config_error(msg: impl Into<String>) -> ZxmError {
    ZxmError::InvalidParameter(msg.into())
}

/// `min`, `p/q` or a decimal, converted to a multiple of `1/M_cpm`.
pub fn parse_nif(spec: &str, m_cpm: usize) -> Result<i64> {
    let s = spec.trim();
    if s.eq_ignore_ascii_case("min") {
        return n_if_min_index(m_cpm);
    }
    let value = if let Some((p, q)) = s.split_once('/') {
        let p: f64 = p.trim().parse().map_err(|_| config_error(format!("bad n_IF '{spec}'")))?;
        let q: f64 = q.trim().parse().map_err(|_| config_error(format!("bad n_IF '{spec}'")))?;
        if q == 0.0 {
            return Err(config_error("n_IF denominator is zero"));
        }
        p / q
    } else {
        s.parse::<f64>().map_err(|_| config_error(format!("bad n_IF '{spec}'")))?
    };
    let c = value * m_cpm as f64;
    if (c - c.round()).abs() > 1e-9 {
        return Err(config_error(format!("n_IF = {spec} is not a multiple of 1/{m_cpm}")));
    }
    Ok(c.round() as i64)
}

fn default_experiment(cmd: &Command) -> Experiment {
    match cmd {
        Command::SeSweep { .. } => Experiment::SeSweep(Default::default()),
        Command::Ber { .. } => Experiment::Ber(Default::default()),
        Command::Bler { .. } => Experiment::Bler(Default::default()),
        Command::Crlb { .. } => Experiment::Crlb(Default::default()),
        Command::LsMse { .. } => Experiment::LsMse(Default::default()),
        Command::Chi { .. } => Experiment::Chi(Default::default()),
        Command::CpmPaths { .. } => Experiment::CpmPaths(Default::default()),
        Command::CpmRate { .. } => Experiment::CpmRate(Default::default()),
        Command::RllInfo { .. } => Experiment::RllInfo(Default::default()),
    }
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn apply_overrides(exp: &mut Experiment, cmd: Command) -> Result<()> {
    match (exp, cmd) {
        (Experiment::SeSweep(p), Command::SeSweep { mtx, m, d, snr, n }) => {
            set(&mut p.m_tx, mtx);
            set(&mut p.m, m);
            if let Some(d) = d {
                p.source = if d == 0 { Source::Iud } else { Source::Rll { d } };
            }
            set(&mut p.snr_db, snr);
            set(&mut p.n, n);
        }
        (Experiment::Ber(p), Command::Ber { mtx, m, d, esn0, symbols, frames }) => {
            set(&mut p.m_tx, mtx);
            set(&mut p.m, m);
            set(&mut p.d, d);
            set(&mut p.esn0_db, esn0);
            set(&mut p.symbols, symbols);
            set(&mut p.frames, frames);
        }
        (Experiment::Bler(p), Command::Bler { mtx, m, ebn0, max_frames, min_errors }) => {
            set(&mut p.m_tx, mtx);
            set(&mut p.m, m);
            set(&mut p.ebn0_db, ebn0);
            set(&mut p.budget.max_frames, max_frames);
            set(&mut p.budget.min_errors, min_errors);
        }
        (Experiment::Crlb(p), Command::Crlb { n, m, esn0 }) => {
            set(&mut p.n, n);
            set(&mut p.m, m);
            set(&mut p.esn0_db, esn0);
        }
        (Experiment::LsMse(p), Command::LsMse { n, m, esn0, trials }) => {
            set(&mut p.n, n);
            set(&mut p.m, m);
            set(&mut p.esn0_db, esn0);
            set(&mut p.trials, trials);
        }
        (Experiment::Chi(p), Command::Chi { esn0, points }) => {
            set(&mut p.esn0_db, esn0);
            set(&mut p.points, points);
        }
        (Experiment::CpmPaths(p), Command::CpmPaths { mcpm, m, nif }) => {
            set(&mut p.m_cpm, mcpm);
            set(&mut p.m, m);
            if let Some(specs) = nif {
                p.c = specs.iter().map(|s| parse_nif(s, p.m_cpm)).collect::<Result<_>>()?;
            }
        }
        (Experiment::CpmRate(p), Command::CpmRate { mcpm, m, nif, filter, esn0, n }) => {
            set(&mut p.m_cpm, mcpm);
            set(&mut p.m, m);
            if let Some(spec) = nif {
                p.c = parse_nif(&spec, p.m_cpm)?;
            }
            if let Some(f) = filter {
                p.filter = match f {
                    FilterArg::Delta => CpmFilter::Delta,
                    FilterArg::Rect => CpmFilter::Rect,
                };
            }
            set(&mut p.esn0_db, esn0);
            set(&mut p.n, n);
        }
        (Experiment::RllInfo(p), Command::RllInfo { d }) => set(&mut p.d, d),
        (exp, _) => return Err(config_error(format!("config describes '{}', not the requested subcommand", exp.name()))),
    }
    Ok(())
}

/// Read a config file holding either an [`ExperimentConfig`] or a [`Manifest`].
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    match serde_json::from_str::<ExperimentConfig>(&text) {
        Ok(c) => Ok(c),
        Err(plain) => match serde_json::from_str::<Manifest>(&text) {
            Ok(m) => Ok(m.config),
            Err(_) => Err(ZxmError::Json(plain)),
        },
    }
}

fn resolve(cli: Cli) -> Result<ExperimentConfig> {
    let mut cfg = match (&cli.config, &cli.command) {
        (Some(path), _) => load_config(path)?,
        (None, Some(cmd)) => ExperimentConfig {
            seed: default_seed(),
            out: None,
            workers: None,
            experiment: default_experiment(cmd),
        },
        (None, None) => return Err(config_error("a subcommand or --config is required")),
    };
    if let Some(cmd) = cli.command {
        apply_overrides(&mut cfg.experiment, cmd)?;
    }
    set(&mut cfg.seed, cli.seed);
    if cli.out.is_some() {
        cfg.out = cli.out;
    }
    if cli.workers.is_some() {
        cfg.workers = cli.workers;
    }
    Ok(cfg)
}

fn workers_from_env() -> Result<Option<usize>> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map(Some)
            .map_err(|_| config_error(format!("{WORKERS_ENV} must be a positive integer, got '{v}'"))),
        Err(_) => Ok(None),
    }
}

/// One CSV line with its sort key.
struct Row {
    key: Vec<f64>,
    line: String,
}

fn sorted_csv(header: &str, mut rows: Vec<Row>) -> (String, usize) {
    rows.sort_by(|a, b| {
        a.key
            .iter()
            .zip(&b.key)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut s = String::with_capacity(64 * (rows.len() + 1));
    s.push_str(header);
    s.push('\n');
    for r in &rows {
        s.push_str(&r.line);
        s.push('\n');
    }
    (s, rows.len())
}

fn nonempty<T>(v: &[T], what: &str) -> Result<()> {
    if v.is_empty() {
        return Err(config_error(format!("{what} must not be empty")));
    }
    Ok(())
}

fn db_to_lin(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

fn run_se_sweep(p: &SeSweepParams, seed: u64) -> Result<Vec<Row>> {
    nonempty(&p.snr_db, "snr_db")?;
    let cfg = ChainConfig::new(p.m_tx, p.m);
    cfg.validate()?;
    let power = analytic_power(&cfg, &p.source)?;
    let b90 = estimate_psd(&cfg, &p.source, &p.psd, &mut stream(child_seed(seed, 0xb90), 0))?.b90;
    p.snr_db
        .par_iter()
        .enumerate()
        .map(|(i, &snr)| {
            let pt = se_point(&cfg, &p.source, snr, power, b90, p.n, &mut stream(child_seed(seed, i as u64), 0))?;
            Ok(Row {
                key: vec![snr],
                line: pt.csv_row(),
            })
        })
        .collect()
}

fn grid<A: Copy + Send + Sync, B: Copy + Send + Sync>(a: &[A], b: &[B]) -> Vec<(usize, A, B)> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for &x in a {
        for &y in b {
            out.push((out.len(), x, y));
        }
    }
    out
}

fn run_ber(p: &BerParams, seed: u64) -> Result<Vec<Row>> {
    nonempty(&p.m, "m")?;
    nonempty(&p.esn0_db, "esn0_db")?;
    grid(&p.m, &p.esn0_db)
        .into_par_iter()
        .map(|(i, m, esn0)| {
            let st = uncoded_ber_point(&ChainConfig::new(p.m_tx, m), p.d, esn0, p.symbols, p.frames, child_seed(seed, i as u64))?;
            Ok(Row {
                key: vec![m as f64, esn0],
                line: st.csv_row(),
            })
        })
        .collect()
}

fn run_bler(p: &BlerParams, seed: u64) -> Result<Vec<Row>> {
    nonempty(&p.m, "m")?;
    nonempty(&p.ebn0_db, "ebn0_db")?;
    let fec = LdpcCode::bundled();
    grid(&p.m, &p.ebn0_db)
        .into_par_iter()
        .map(|(i, m, ebn0)| {
            let st = bler_point(&ChainConfig::new(p.m_tx, m), ebn0, &fec, &p.budget, child_seed(seed, i as u64))?;
            Ok(Row {
                key: vec![m as f64, ebn0],
                line: st.csv_row(),
            })
        })
        .collect()
}

pub const ESTIMATION_CSV_HEADER: &str = "esn0_db,M,crlb,bound_low,bound_high,mse_lse,ci_lo,ci_hi";

fn scenario(p: &EstimationParams, m: usize, esn0_db: f64) -> Result<EstimationScenario> {
    let mut sc = EstimationScenario::qpsk(p.n, m, esn0_db, p.pilot_seed);
    sc.pulse = EstPulse::RootRaisedCosine { rolloff: p.rolloff };
    sc.phi = p.phi;
    sc.dither = p.dither;
    sc.validate()?;
    Ok(sc)
}

fn estimation_rows(p: &EstimationParams, trials: Option<usize>, seed: u64) -> Result<Vec<Row>> {
    nonempty(&p.m, "m")?;
    nonempty(&p.esn0_db, "esn0_db")?;
    grid(&p.m, &p.esn0_db)
        .into_par_iter()
        .map(|(i, m, esn0_db)| {
            let sc = scenario(p, m, esn0_db)?;
            let point_seed = child_seed(seed, i as u64);
            let fy = fisher_info_1bit(&sc, p.phi, 0.0, child_seed(point_seed, 0xf1))?.phase();
            if !(fy > 0.0) {
                return Err(ZxmError::Singular(format!("Fisher information vanishes at {esn0_db} dB")));
            }
            let esn0 = db_to_lin(esn0_db);
            let low = crlb_phase_bounds(esn0, p.n, m, SnrRegime::Low, p.high_snr)?;
            let high = crlb_phase_bounds(esn0, p.n, m, SnrRegime::High, p.high_snr)?;
            let (mse, lo, hi) = match trials {
                Some(t) => {
                    let e = mc_mse(PhaseEstimator::LeastSquares, &sc, t, point_seed)?;
                    (e.mse, e.ci_lo, e.ci_hi)
                }
                None => (f64::NAN, f64::NAN, f64::NAN),
            };
            Ok(Row {
                key: vec![m as f64, esn0_db],
                line: format!(
                    "{:.16e},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                    esn0_db,
                    m,
                    1.0 / fy,
                    low,
                    high,
                    mse,
                    lo,
                    hi
                ),
            })
        })
        .collect()
}

pub const CHI_CSV_HEADER: &str = "esn0_db,phi,chi";

fn run_chi(p: &ChiParams) -> Result<Vec<Row>> {
    nonempty(&p.esn0_db, "esn0_db")?;
    if p.points == 0 {
        return Err(config_error("points must be positive"));
    }
    let phis: Vec<f64> = (0..p.points).map(|i| 2.0 * std::f64::consts::PI * i as f64 / p.points as f64).collect();
    grid(&p.esn0_db, &phis)
        .into_par_iter()
        .map(|(_, esn0_db, phi)| {
            let chi = chi_loss(&chi_scenario(esn0_db), phi)?;
            Ok(Row {
                key: vec![esn0_db, phi],
                line: format!("{:.16e},{:.16e},{:.16e}", esn0_db, phi, chi),
            })
        })
        .collect()
}

fn run_cpm_paths(p: &CpmPathsParams) -> Result<Vec<Row>> {
    nonempty(&p.m, "m")?;
    let cs = if p.c.is_empty() { vec![n_if_min_index(p.m_cpm)?] } else { p.c.clone() };
    grid(&p.m, &cs)
        .into_par_iter()
        .map(|(_, m, c)| {
            let cfg = CpmConfig::new(p.m_cpm, m, c);
            let pc = count_distinguishable_paths(&cfg)?;
            let row = NdRow {
                m_cpm: p.m_cpm,
                m,
                c,
                n_if: cfg.n_if(),
                f_if: tilted_if(&cfg),
                log2_nd: pc.log2_nd,
            };
            Ok(Row {
                key: vec![m as f64, c as f64],
                line: row.csv_row(),
            })
        })
        .collect()
}

pub const CPM_RATE_CSV_HEADER: &str = "esn0_db,M_cpm,M,n_IF,filter,rate_bpcu,stderr";

fn run_cpm_rate(p: &CpmRateParams, seed: u64) -> Result<Vec<Row>> {
    nonempty(&p.m, "m")?;
    nonempty(&p.esn0_db, "esn0_db")?;
    let filter = match p.filter {
        CpmFilter::Delta => "delta",
        CpmFilter::Rect => "rect",
    };
    grid(&p.m, &p.esn0_db)
        .into_par_iter()
        .map(|(i, m, esn0_db)| {
            let cfg = CpmConfig::new(p.m_cpm, m, p.c);
            let r = cpm_rate(&cfg, p.filter, 1.0 / db_to_lin(esn0_db), p.n, &mut stream(child_seed(seed, i as u64), 0))?;
            Ok(Row {
                key: vec![m as f64, esn0_db],
                line: format!(
                    "{:.16e},{},{},{:.16e},{},{:.16e},{:.16e}",
                    esn0_db,
                    p.m_cpm,
                    m,
                    cfg.n_if(),
                    filter,
                    r.rate,
                    r.stderr
                ),
            })
        })
        .collect()
}

pub const RLL_CSV_HEADER: &str = "from,to,emit,probability";

/// Summary text of the max-entropy law and its transition rows.
fn rll_info(p: &RllInfoParams) -> Result<(String, Vec<Row>)> {
    let fsm = RllFsm::new(p.d)?;
    let h = max_entropy_rate(&fsm);
    let mut text = format!("d = {}\nH_max = {:.4} ({:.16e} bit/symbol)\nlambda = {:.16e}\ntransition matrix:\n", p.d, h, h, fsm.lambda);
    for row in &fsm.transitions {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.6}")).collect();
        text.push_str(&format!("  [{}]\n", cells.join(", ")));
    }
    let rows = fsm
        .edges
        .iter()
        .map(|e| Row {
            key: vec![e.from as f64, e.to as f64, e.emit as f64],
            line: format!("{},{},{},{:.16e}", e.from, e.to, e.emit, e.prob),
        })
        .collect();
    Ok((text, rows))
}

/// Run a resolved experiment. Returns the CSV text, its row count and any
/// text meant for the terminal.
pub fn execute(cfg: &ExperimentConfig) -> Result<(String, usize, Option<String>)> {
    let seed = cfg.seed;
    let mut summary = None;
    let (header, rows) = match &cfg.experiment {
        Experiment::SeSweep(p) => (SE_CSV_HEADER, run_se_sweep(p, seed)?),
        Experiment::Ber(p) => (BER_CSV_HEADER, run_ber(p, seed)?),
        Experiment::Bler(p) => (BLER_CSV_HEADER, run_bler(p, seed)?),
        Experiment::Crlb(p) => (ESTIMATION_CSV_HEADER, estimation_rows(p, None, seed)?),
        Experiment::LsMse(p) => (ESTIMATION_CSV_HEADER, estimation_rows(p, Some(p.trials), seed)?),
        Experiment::Chi(p) => (CHI_CSV_HEADER, run_chi(p)?),
        Experiment::CpmPaths(p) => (ND_CSV_HEADER, run_cpm_paths(p)?),
        Experiment::CpmRate(p) => (CPM_RATE_CSV_HEADER, run_cpm_rate(p, seed)?),
        Experiment::RllInfo(p) => {
            let (text, rows) = rll_info(p)?;
            summary = Some(text);
            (RLL_CSV_HEADER, rows)
        }
    };
    let (csv, n) = sorted_csv(header, rows);
    Ok((csv, n, summary))
}

/// Execute `cfg` on a pool of `workers` threads (all cores when `None`).
pub fn execute_with_workers(cfg: &ExperimentConfig, workers: Option<usize>) -> Result<(String, usize, Option<String>)> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        if w == 0 {
            return Err(config_error("workers must be positive"));
        }
        builder = builder.num_threads(w);
    }
    let pool = builder.build().map_err(|e| ZxmError::Numeric(format!("thread pool: {e}")))?;
    pool.install(|| execute(cfg))
}

fn exit_code(e: &ZxmError) -> i32 {
    match e {
        ZxmError::Numeric(_) | ZxmError::Singular(_) => EXIT_NUMERIC,
        _ => EXIT_CONFIG,
    }
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

fn run_resolved(cfg: &ExperimentConfig) -> Result<()> {
    let workers = match cfg.workers {
        Some(w) => Some(w),
        None => workers_from_env()?,
    };
    let start = Instant::now();
    let (csv, rows, summary) = execute_with_workers(cfg, workers)?;
    let wall = start.elapsed().as_secs_f64();
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    if let Some(text) = &summary {
        lock.write_all(text.as_bytes())?;
    }
    match &cfg.out {
        Some(path) => {
            std::fs::write(path, csv.as_bytes())?;
            let manifest = Manifest {
                config: cfg.clone(),
                version: version_string(),
                wall_time_s: wall,
                rows,
            };
            std::fs::write(manifest_path(path), serde_json::to_string_pretty(&manifest)?)?;
        }
        None if summary.is_none() => lock.write_all(csv.as_bytes())?,
        None => {}
    }
    Ok(())
}

/// Entry point; returns the process exit code.
pub fn run(argv: Vec<String>) -> i32 {
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let outcome = resolve(cli).and_then(|cfg| run_resolved(&cfg));
    match outcome {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("zxm: {e}");
            exit_code(&e)
        }
    }
}
