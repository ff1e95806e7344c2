//! Monte-Carlo experiment runner and CSV output.
//!
//! An experiment is a TOML file with `scenario`, `channel`, `alg1`, `alg2`,
//! `power` and `sweep` tables plus a few top-level keys; every field has a
//! default, so an empty file describes a valid single-point experiment.
//!
//! Trials run in parallel on a bounded rayon pool. Each trial derives its
//! seed as `base_seed ^ trial`, so the table is independent of scheduling up
//! to the `wall_ms` column.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alg1::{run_algorithm1, Alg1Config};
use crate::alg2::{run_algorithm2, Alg2Config};
use crate::baselines::{energy_efficiency, quantize_phases, Mode, PowerModel};
use crate::channel::{dbm_to_watts, gen_channels, ChannelConfig, ChannelSet};
use crate::error::{Error, Result};
use crate::model::{init_point, sum_rate, ConvergenceTrace, Precoder, ReflectVector, Scenario};

pub const RESULTS_HEADER: &str =
    "sweep_param,sweep_value,trial,seed,algorithm,sum_rate_bpshz,ee_bit_hz_j,iters,wall_ms";
pub const TRACE_HEADER: &str = "iter,objective_bpshz,wall_ms";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n_antennas: usize,
    pub n_elements: usize,
    pub n_groups: usize,
    pub users_per_group: usize,
    pub pt_dbm: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            n_antennas: 4,
            n_elements: 16,
            n_groups: 2,
            users_per_group: 2,
            pt_dbm: 20.0,
        }
    }
}

impl ScenarioConfig {
    pub fn build(&self) -> Result<Scenario> {
        Scenario::uniform_groups(
            self.n_antennas,
            self.n_elements,
            self.n_groups,
            self.users_per_group,
            dbm_to_watts(self.pt_dbm),
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    PtDbm,
    NElements,
    NAntennas,
    UsersPerGroup,
    NGroups,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::PtDbm => "pt_dbm",
            SweepParam::NElements => "n_elements",
            SweepParam::NAntennas => "n_antennas",
            SweepParam::UsersPerGroup => "users_per_group",
            SweepParam::NGroups => "n_groups",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        [
            SweepParam::PtDbm,
            SweepParam::NElements,
            SweepParam::NAntennas,
            SweepParam::UsersPerGroup,
            SweepParam::NGroups,
        ]
        .into_iter()
        .find(|p| p.name() == s)
        .ok_or_else(|| Error::Config(format!("unknown sweep parameter '{s}'")))
    }

    /// Copy of `base` with this parameter set to `value`.
    pub fn apply(self, base: &ScenarioConfig, value: f64) -> Result<ScenarioConfig> {
        let mut sc = base.clone();
        if self == SweepParam::PtDbm {
            if !value.is_finite() {
                return Err(Error::Config(format!("pt_dbm must be finite, got {value}")));
            }
            sc.pt_dbm = value;
            return Ok(sc);
        }
        if value.fract() != 0.0 || !(value >= 1.0) || value > 4096.0 {
            return Err(Error::Config(format!(
                "{} must be a positive integer, got {value}",
                self.name()
            )));
        }
        let v = value as usize;
        match self {
            SweepParam::NElements => sc.n_elements = v,
            SweepParam::NAntennas => sc.n_antennas = v,
            SweepParam::UsersPerGroup => sc.users_per_group = v,
            SweepParam::NGroups => sc.n_groups = v,
            SweepParam::PtDbm => unreachable!(),
        }
        Ok(sc)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub param: SweepParam,
    /// Empty means a single point at the scenario's own value.
    pub values: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            param: SweepParam::PtDbm,
            values: Vec::new(),
        }
    }
}

/// One optimizer/baseline combination, labelled as in the output tables.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "irs_alg1")]
    IrsAlg1,
    #[serde(rename = "irs_alg2")]
    IrsAlg2,
    #[serde(rename = "nirs_alg1")]
    NirsAlg1,
    #[serde(rename = "nirs_alg2")]
    NirsAlg2,
    /// Continuous `irs_alg1` solution with 2-bit phases.
    #[serde(rename = "irs_alg1_2bit")]
    IrsAlg1TwoBit,
    #[serde(rename = "irs_alg2_2bit")]
    IrsAlg2TwoBit,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::IrsAlg1,
        Algorithm::IrsAlg2,
        Algorithm::NirsAlg1,
        Algorithm::NirsAlg2,
        Algorithm::IrsAlg1TwoBit,
        Algorithm::IrsAlg2TwoBit,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Algorithm::IrsAlg1 => "irs_alg1",
            Algorithm::IrsAlg2 => "irs_alg2",
            Algorithm::NirsAlg1 => "nirs_alg1",
            Algorithm::NirsAlg2 => "nirs_alg2",
            Algorithm::IrsAlg1TwoBit => "irs_alg1_2bit",
            Algorithm::IrsAlg2TwoBit => "irs_alg2_2bit",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.label() == s)
            .ok_or_else(|| Error::Config(format!("unknown algorithm '{s}'")))
    }

    fn mode(self) -> Mode {
        match self {
            Algorithm::NirsAlg1 | Algorithm::NirsAlg2 => Mode::NoIrs,
            _ => Mode::Irs,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: ScenarioConfig,
    pub channel: ChannelConfig,
    pub algorithms: Vec<Algorithm>,
    pub alg1: Alg1Config,
    pub alg2: Alg2Config,
    /// `p_t` is overwritten by the scenario's transmit power.
    pub power: PowerModel,
    pub sweep: SweepConfig,
    pub trials: usize,
    pub base_seed: u64,
    /// Worker threads; 0 uses rayon's default.
    pub workers: usize,
    pub output: PathBuf,
    pub write_traces: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: ScenarioConfig::default(),
            channel: ChannelConfig::default(),
            algorithms: vec![Algorithm::IrsAlg1, Algorithm::IrsAlg2],
            alg1: Alg1Config::default(),
            alg2: Alg2Config::default(),
            power: PowerModel::default(),
            sweep: SweepConfig::default(),
            trials: 1,
            base_seed: 0,
            workers: 0,
            output: PathBuf::from("out"),
            write_traces: false,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    /// The scenario at each sweep point, paired with its swept value.
    pub fn sweep_points(&self) -> Result<Vec<(f64, ScenarioConfig)>> {
        if self.sweep.values.is_empty() {
            let v = current_value(&self.scenario, self.sweep.param);
            return Ok(vec![(v, self.scenario.clone())]);
        }
        self.sweep
            .values
            .iter()
            .map(|&v| Ok((v, self.sweep.param.apply(&self.scenario, v)?)))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.algorithms.is_empty() {
            return Err(Error::Config("select at least one algorithm".into()));
        }
        self.power.validate()?;
        for (_, sc) in self.sweep_points()? {
            sc.build()?;
            self.channel.validate(sc.n_elements)?;
        }
        Ok(())
    }
}

fn current_value(sc: &ScenarioConfig, p: SweepParam) -> f64 {
    match p {
        SweepParam::PtDbm => sc.pt_dbm,
        SweepParam::NElements => sc.n_elements as f64,
        SweepParam::NAntennas => sc.n_antennas as f64,
        SweepParam::UsersPerGroup => sc.users_per_group as f64,
        SweepParam::NGroups => sc.n_groups as f64,
    }
}

/// One line of the results table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub sweep_param: String,
    pub sweep_value: f64,
    pub trial: usize,
    pub seed: u64,
    pub algorithm: String,
    pub sum_rate_bpshz: f64,
    pub ee_bit_hz_j: f64,
    pub iters: usize,
    pub wall_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FailureRow {
    pub sweep_value: f64,
    pub trial: usize,
    pub seed: u64,
    pub algorithm: String,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UserRow {
    pub sweep_value: f64,
    pub trial: usize,
    pub seed: u64,
    pub user: usize,
    pub x_m: f64,
    pub y_m: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceEntry {
    pub sweep_index: usize,
    pub trial: usize,
    pub algorithm: Algorithm,
    pub trace: ConvergenceTrace,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExperimentResults {
    pub rows: Vec<ResultRow>,
    pub failures: Vec<FailureRow>,
    pub users: Vec<UserRow>,
    pub traces: Vec<TraceEntry>,
    /// Number of distinct sweep values, used to name trace files.
    pub n_sweep_points: usize,
}

pub fn trial_seed(base_seed: u64, trial: usize) -> u64 {
    base_seed ^ trial as u64
}

struct Solved {
    f: Precoder,
    e: ReflectVector,
    iters: usize,
    wall_ms: f64,
    trace: ConvergenceTrace,
}

fn solve(sc: &Scenario, ch: &ChannelSet, use_alg1: bool, cfg: &ExperimentConfig) -> Result<Solved> {
    let (f0, e0) = init_point(sc);
    let t = Instant::now();
    let (f, e, iters, trace) = if use_alg1 {
        let out = run_algorithm1(sc, ch, (&f0, &e0), &cfg.alg1)?;
        (out.precoder, out.reflect, out.iterations, out.trace)
    } else {
        let out = run_algorithm2(sc, ch, (&f0, &e0), &cfg.alg2)?;
        (out.precoder, out.reflect, out.iterations, out.trace)
    };
    Ok(Solved {
        f,
        e,
        iters,
        wall_ms: t.elapsed().as_secs_f64() * 1e3,
        trace,
    })
}

#[derive(Default)]
struct TrialOutput {
    rows: Vec<ResultRow>,
    failures: Vec<FailureRow>,
    users: Vec<UserRow>,
    traces: Vec<TraceEntry>,
}

fn run_trial(cfg: &ExperimentConfig, sweep_index: usize, value: f64, scfg: &ScenarioConfig, trial: usize) -> TrialOutput {
    let seed = trial_seed(cfg.base_seed, trial);
    let mut out = TrialOutput::default();
    let fail = |alg: &str, err: &Error| FailureRow {
        sweep_value: value,
        trial,
        seed,
        algorithm: alg.to_string(),
        error: err.to_string(),
    };
    let setup = scfg
        .build()
        .and_then(|sc| gen_channels(&cfg.channel, &sc, seed).map(|ch| (sc, ch)));
    let (sc, ch) = match setup {
        Ok(x) => x,
        Err(err) => {
            out.failures.push(fail("channels", &err));
            return out;
        }
    };
    out.users = ch
        .user_positions
        .iter()
        .enumerate()
        .map(|(user, p)| UserRow {
            sweep_value: value,
            trial,
            seed,
            user,
            x_m: p[0],
            y_m: p[1],
        })
        .collect();
    let no_irs = ch.without_irs();
    let pm = PowerModel {
        p_t: sc.p_t,
        ..cfg.power.clone()
    };

    // Continuous IRS solutions are shared with their quantized variants.
    let mut cache: BTreeMap<bool, std::result::Result<Solved, String>> = BTreeMap::new();
    let mut algs = cfg.algorithms.clone();
    algs.sort();
    algs.dedup();
    for alg in algs {
        let label = alg.label();
        let result: Result<(f64, usize, f64)> = (|| match alg {
            Algorithm::IrsAlg1 | Algorithm::IrsAlg2 | Algorithm::IrsAlg1TwoBit | Algorithm::IrsAlg2TwoBit => {
                let use_alg1 = matches!(alg, Algorithm::IrsAlg1 | Algorithm::IrsAlg1TwoBit);
                let s = cache
                    .entry(use_alg1)
                    .or_insert_with(|| solve(&sc, &ch, use_alg1, cfg).map_err(|e| e.to_string()));
                let s = s.as_ref().map_err(|e| Error::Parse(e.clone()))?;
                let rate = match alg {
                    Algorithm::IrsAlg1 | Algorithm::IrsAlg2 => {
                        if cfg.write_traces {
                            out.traces.push(TraceEntry {
                                sweep_index,
                                trial,
                                algorithm: alg,
                                trace: s.trace.clone(),
                            });
                        }
                        sum_rate(&sc, &ch, &s.f, &s.e)
                    }
                    _ => sum_rate(&sc, &ch, &s.f, &quantize_phases(&s.e, 2)?),
                };
                Ok((rate, s.iters, s.wall_ms))
            }
            Algorithm::NirsAlg1 | Algorithm::NirsAlg2 => {
                let s = solve(&sc, &no_irs, alg == Algorithm::NirsAlg1, cfg)?;
                if cfg.write_traces {
                    out.traces.push(TraceEntry {
                        sweep_index,
                        trial,
                        algorithm: alg,
                        trace: s.trace.clone(),
                    });
                }
                Ok((sum_rate(&sc, &no_irs, &s.f, &s.e), s.iters, s.wall_ms))
            }
        })();
        match result.and_then(|(rate, iters, wall_ms)| {
            let ee = energy_efficiency(rate, &pm, alg.mode(), sc.n_antennas, sc.n_elements)?;
            Ok(ResultRow {
                sweep_param: cfg.sweep.param.name().to_string(),
                sweep_value: value,
                trial,
                seed,
                algorithm: label.to_string(),
                sum_rate_bpshz: rate,
                ee_bit_hz_j: ee,
                iters,
                wall_ms,
            })
        }) {
            Ok(row) => out.rows.push(row),
            Err(err) => {
                log::warn!("trial {trial} ({label}, {} = {value}) failed: {err}", cfg.sweep.param.name());
                out.failures.push(fail(label, &err));
            }
        }
    }
    out
}

/// Runs every sweep point × trial × selected algorithm. Algorithm failures
/// are collected in [`ExperimentResults::failures`] instead of aborting.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResults> {
    cfg.validate()?;
    let points = cfg.sweep_points()?;
    let jobs: Vec<(usize, usize)> = (0..points.len())
        .flat_map(|s| (0..cfg.trials).map(move |t| (s, t)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let outputs: Vec<TrialOutput> = pool.install(|| {
        jobs.par_iter()
            .map(|&(s, t)| run_trial(cfg, s, points[s].0, &points[s].1, t))
            .collect()
    });
    let mut res = ExperimentResults {
        n_sweep_points: points.len(),
        ..Default::default()
    };
    for o in outputs {
        res.rows.extend(o.rows);
        res.failures.extend(o.failures);
        res.users.extend(o.users);
        res.traces.extend(o.traces);
    }
    Ok(res)
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    for r in rows {
        w.serialize(r).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn trace_file_name(alg: Algorithm, trial: usize, sweep_index: usize, n_sweep_points: usize) -> String {
    if n_sweep_points > 1 {
        format!("trace_{}_{trial}_s{sweep_index}.csv", alg.label())
    } else {
        format!("trace_{}_{trial}.csv", alg.label())
    }
}

/// Writes the results table to `path` and any traces next to it.
pub fn emit_csv(results: &ExperimentResults, path: &Path) -> Result<()> {
    if results.rows.is_empty() {
        return Err(Error::Config("no result rows to write".into()));
    }
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    write_rows(path, &results.rows)?;
    let dir = path.parent().unwrap_or(Path::new("."));
    for t in &results.traces {
        let p = dir.join(trace_file_name(t.algorithm, t.trial, t.sweep_index, results.n_sweep_points));
        let mut w = csv::Writer::from_path(&p).map_err(csv_err(&p))?;
        w.write_record(TRACE_HEADER.split(',')).map_err(csv_err(&p))?;
        for r in &t.trace.records {
            w.serialize((r.iter, r.objective, r.wall_ms)).map_err(csv_err(&p))?;
        }
        w.flush().map_err(io_err(&p))?;
    }
    Ok(())
}

/// Writes `results.csv`, `users.csv`, `failures.csv` (when nonempty) and
/// traces into `dir`.
pub fn write_outputs(results: &ExperimentResults, dir: &Path) -> Result<()> {
    emit_csv(results, &dir.join("results.csv"))?;
    write_rows(&dir.join("users.csv"), &results.users)?;
    if !results.failures.is_empty() {
        write_rows(&dir.join("failures.csv"), &results.failures)?;
    }
    Ok(())
}

pub fn read_results_csv(path: &Path) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    r.deserialize().collect::<std::result::Result<_, _>>().map_err(csv_err(path))
}

/// Mean metrics per `(sweep_value, algorithm)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryRow {
    pub sweep_value: f64,
    pub algorithm: String,
    pub trials: usize,
    pub mean_sum_rate_bpshz: f64,
    pub mean_ee_bit_hz_j: f64,
    pub mean_iters: f64,
    pub mean_wall_ms: f64,
}

pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let mut groups: Vec<((f64, String), Vec<&ResultRow>)> = Vec::new();
    for r in rows {
        let key = (r.sweep_value, r.algorithm.clone());
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push(r),
            None => groups.push((key, vec![r])),
        }
    }
    let mut out: Vec<SummaryRow> = groups
        .into_iter()
        .map(|((sweep_value, algorithm), v)| {
            let n = v.len() as f64;
            let mean = |f: fn(&ResultRow) -> f64| v.iter().map(|r| f(r)).sum::<f64>() / n;
            SummaryRow {
                sweep_value,
                algorithm,
                trials: v.len(),
                mean_sum_rate_bpshz: mean(|r| r.sum_rate_bpshz),
                mean_ee_bit_hz_j: mean(|r| r.ee_bit_hz_j),
                mean_iters: mean(|r| r.iters as f64),
                mean_wall_ms: mean(|r| r.wall_ms),
            }
        })
        .collect();
    out.sort_by(|a, b| a.sweep_value.total_cmp(&b.sweep_value).then_with(|| a.algorithm.cmp(&b.algorithm)));
    out
}
