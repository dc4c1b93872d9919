//! Strategies, Monte Carlo sweeps, and result files.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::assoc::{random_association, Association};
use crate::channel::{AccessChannel, BackhaulChannel};
use crate::error::{Error, Result};
use crate::geometry::{generate_scenario, Point3, Scenario, ScenarioConfig};
use crate::milp::MilpSettings;
use crate::placement::{optimize_placement, Objective, PlacementSettings, PlacementState, TraceRow};
use crate::power::{subgradient_solve, PowerAllocation};
use crate::rate::{end_to_end, EndToEndValue, RateTable};
use crate::scalar::Scalar;
use crate::seeding::{derive_seed, substream, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Placement, optimal association, dual power allocation.
    Proposed,
    /// Placement and optimal association at uniform power.
    AssocUniformPower,
    /// Placement for a random association at uniform power.
    RandomAssocUniformPower,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [
        Strategy::Proposed,
        Strategy::AssocUniformPower,
        Strategy::RandomAssocUniformPower,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Proposed => "proposed",
            Strategy::AssocUniformPower => "assoc_uniform_power",
            Strategy::RandomAssocUniformPower => "random_assoc_uniform_power",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown strategy {s:?}")))
    }
}

/// Everything a strategy decided, with its end-to-end value.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyOutcome<T> {
    pub value: EndToEndValue<T>,
    pub association: Association,
    pub power: PowerAllocation<T>,
    pub placement: PlacementState<T>,
    pub trace: Vec<TraceRow<T>>,
    pub iterations: usize,
    pub converged: bool,
}

/// Runs one strategy on a scenario; errors name the strategy.
pub fn run_strategy<T: Scalar>(
    s: &Scenario<T>,
    strategy: Strategy,
    settings: &PlacementSettings<T>,
) -> Result<StrategyOutcome<T>> {
    run_inner(s, strategy, settings).map_err(|e| Error::Strategy {
        strategy: strategy.name().to_string(),
        source: Box::new(e),
    })
}

fn run_inner<T: Scalar>(
    s: &Scenario<T>,
    strategy: Strategy,
    settings: &PlacementSettings<T>,
) -> Result<StrategyOutcome<T>> {
    let objective = match strategy {
        Strategy::Proposed if settings.refine_candidates => Objective::Refined,
        Strategy::Proposed | Strategy::AssocUniformPower => Objective::UniformPower,
        Strategy::RandomAssocUniformPower => {
            let mut rng = substream(s.seed, Stream::RandomAssociation);
            Objective::FixedAssociation(random_association(
                s.num_uavs(),
                s.num_users(),
                s.num_rbs(),
                s.num_tbs(),
                &mut rng,
            ))
        }
    };
    let out = optimize_placement(s, &objective, settings)?;
    let placed = s.with_uav_positions(&out.state.positions);
    let access = AccessChannel::from_scenario(&placed)?;
    let backhaul = BackhaulChannel::from_scenario(&placed)?;
    let association = out.evaluation.association.clone();
    let power = match strategy {
        Strategy::Proposed => {
            subgradient_solve(&association, &access, &placed.radio, &placed.peak_power, &settings.dual)?.allocation
        }
        _ => out.evaluation.power.clone(),
    };
    let rates = RateTable::new(&access, &backhaul, &placed.radio, &power.power)?;
    let value = end_to_end(&association, &power, &rates)?;
    Ok(StrategyOutcome {
        value,
        association,
        power,
        placement: out.state,
        trace: out.trace,
        iterations: out.iterations,
        converged: out.converged,
    })
}

/// Search knobs as they appear in configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlacementConfig {
    pub candidates: usize,
    pub r0_m: Option<f64>,
    pub r_min_m: f64,
    pub max_iter: usize,
    pub rel_tol: f64,
    pub joint: bool,
    pub refine_candidates: bool,
    /// Branch-and-bound node limit for each association solve.
    pub node_budget: usize,
}

impl Default for PlacementConfig {
    fn default() -> Self {
        let d = PlacementSettings::<f64>::default();
        PlacementConfig {
            candidates: d.candidates,
            r0_m: d.r0,
            r_min_m: d.r_min,
            max_iter: d.max_iter,
            rel_tol: d.rel_tol,
            joint: d.joint,
            refine_candidates: d.refine_candidates,
            node_budget: d.milp.node_budget,
        }
    }
}

impl PlacementConfig {
    pub fn settings(&self) -> PlacementSettings<f64> {
        PlacementSettings {
            candidates: self.candidates,
            r0: self.r0_m,
            r_min: self.r_min_m,
            max_iter: self.max_iter,
            rel_tol: self.rel_tol,
            joint: self.joint,
            refine_candidates: self.refine_candidates,
            milp: MilpSettings {
                node_budget: self.node_budget,
                ..Default::default()
            },
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVar {
    PeakPowerDbm,
    BackhaulBandwidthHz,
}

impl SweepVar {
    pub fn name(&self) -> &'static str {
        match self {
            SweepVar::PeakPowerDbm => "peak_power_dbm",
            SweepVar::BackhaulBandwidthHz => "backhaul_bandwidth_hz",
        }
    }

    /// The scenario config with this variable set to `v`.
    pub fn apply(&self, base: &ScenarioConfig, v: f64) -> ScenarioConfig {
        let mut c = base.clone();
        match self {
            SweepVar::PeakPowerDbm => c.peak_power_dbm = v,
            SweepVar::BackhaulBandwidthHz => c.radio.backhaul_bandwidth_hz = v,
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub scenario: ScenarioConfig,
    pub placement: PlacementConfig,
    pub sweep_var: SweepVar,
    pub sweep_values: Vec<f64>,
    pub strategies: Vec<Strategy>,
    pub trials: usize,
    pub seed: u64,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.sweep_values.is_empty() || self.sweep_values.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Config("sweep values must be nonempty and strictly increasing".into()));
        }
        if self.strategies.is_empty() {
            return Err(Error::Config("no strategy selected".into()));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("experiment serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn trial_seed(&self, trial: usize) -> u64 {
        derive_seed(self.seed, trial as u64)
    }
}

/// Contents of a TOML configuration file; every field has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarnessConfig {
    pub seed: u64,
    pub trials: usize,
    pub strategies: Vec<Strategy>,
    pub power_sweep_dbm: Vec<f64>,
    pub bandwidth_sweep_hz: Vec<f64>,
    pub convergence_trials: usize,
    pub scenario: ScenarioConfig,
    pub placement: PlacementConfig,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        HarnessConfig {
            seed: 1,
            trials: 50,
            strategies: Strategy::ALL.to_vec(),
            power_sweep_dbm: vec![20.0, 25.0, 30.0, 35.0, 40.0],
            bandwidth_sweep_hz: vec![1e5, 2e5, 5e5, 1e6, 2e6, 5e6],
            convergence_trials: 20,
            scenario: ScenarioConfig::default(),
            placement: PlacementConfig::default(),
        }
    }
}

impl HarnessConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn spec(&self, sweep_var: SweepVar, sweep_values: Vec<f64>) -> ExperimentSpec {
        ExperimentSpec {
            scenario: self.scenario.clone(),
            placement: self.placement.clone(),
            sweep_var,
            sweep_values,
            strategies: self.strategies.clone(),
            trials: self.trials,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub sweep_var: String,
    pub sweep_value: f64,
    pub trial: usize,
    pub seed: u64,
    pub strategy: Strategy,
    pub objective_bps: f64,
    pub iterations: usize,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryPoint {
    pub sweep_value: f64,
    pub strategy: Strategy,
    pub trials: usize,
    pub mean_bps: f64,
    pub stderr_bps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub version: String,
    pub spec_hash: String,
    pub spec: ExperimentSpec,
    pub rows: Vec<RunRow>,
    pub summary: Vec<SummaryPoint>,
    pub wall_ms: f64,
}

impl RunRecord {
    /// Mean curve of one strategy, in sweep order.
    pub fn means(&self, strategy: Strategy) -> Vec<f64> {
        self.summary
            .iter()
            .filter(|p| p.strategy == strategy)
            .map(|p| p.mean_bps)
            .collect()
    }

    /// Objectives of one strategy at one sweep value, in trial order.
    pub fn values(&self, strategy: Strategy, sweep_value: f64) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.strategy == strategy && r.sweep_value == sweep_value)
            .map(|r| r.objective_bps)
            .collect()
    }
}

pub fn mean_stderr(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn summarize(spec: &ExperimentSpec, rows: &[RunRow]) -> Vec<SummaryPoint> {
    let mut out = Vec::new();
    for &v in &spec.sweep_values {
        for &strategy in &spec.strategies {
            let vals: Vec<f64> = rows
                .iter()
                .filter(|r| r.sweep_value == v && r.strategy == strategy)
                .map(|r| r.objective_bps)
                .collect();
            let (mean_bps, stderr_bps) = mean_stderr(&vals);
            out.push(SummaryPoint {
                sweep_value: v,
                strategy,
                trials: vals.len(),
                mean_bps,
                stderr_bps,
            });
        }
    }
    out
}

pub fn version() -> String {
    format!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION"))
}

/// Runs `f` over `items` on `workers` threads, results in input order.
pub fn par_map<I, O, F>(items: Vec<I>, workers: usize, f: F) -> Result<Vec<O>>
where
    I: Send,
    O: Send,
    F: Fn(I) -> Result<O> + Send + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| items.into_par_iter().map(f).collect())
}

/// Every sweep value times trial times strategy, reduced in that order.
/// Users and fading depend only on the trial seed, so all sweep values and
/// strategies see the same draws.
pub fn sweep(spec: &ExperimentSpec, workers: usize) -> Result<RunRecord> {
    spec.validate()?;
    let started = Instant::now();
    let settings = spec.placement.settings();
    let mut jobs = Vec::new();
    for &v in &spec.sweep_values {
        for trial in 0..spec.trials {
            for &strategy in &spec.strategies {
                jobs.push((v, trial, strategy));
            }
        }
    }
    let rows = par_map(jobs, workers, |(v, trial, strategy)| {
        let t0 = Instant::now();
        let seed = spec.trial_seed(trial);
        let scenario = generate_scenario::<f64>(&spec.sweep_var.apply(&spec.scenario, v), seed)?;
        let out = run_strategy(&scenario, strategy, &settings)?;
        Ok(RunRow {
            sweep_var: spec.sweep_var.name().to_string(),
            sweep_value: v,
            trial,
            seed,
            strategy,
            objective_bps: out.value.total,
            iterations: out.iterations,
            wall_ms: t0.elapsed().as_secs_f64() * 1e3,
        })
    })?;
    Ok(RunRecord {
        version: version(),
        spec_hash: spec.hash(),
        spec: spec.clone(),
        summary: summarize(spec, &rows),
        rows,
        wall_ms: started.elapsed().as_secs_f64() * 1e3,
    })
}

pub const CSV_HEADER: &str = "sweep_var,sweep_value,trial,seed,strategy,objective_bps,iterations,wall_ms";

pub fn rows_to_csv(rows: &[RunRow]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{:.3}\n",
            r.sweep_var, r.sweep_value, r.trial, r.seed, r.strategy, r.objective_bps, r.iterations, r.wall_ms
        ));
    }
    s
}

/// Writes `contents` to `path` through a temporary file in the same
/// directory, so a failed run leaves no partial file behind.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Writes `<stem>.csv` and `<stem>.json` into `dir`.
pub fn emit_outputs(record: &RunRecord, dir: &Path, stem: &str) -> Result<(PathBuf, PathBuf)> {
    let csv = dir.join(format!("{stem}.csv"));
    let json = dir.join(format!("{stem}.json"));
    write_atomic(&csv, rows_to_csv(&record.rows).as_bytes())?;
    let body = serde_json::to_string_pretty(record).map_err(|e| Error::Config(e.to_string()))?;
    write_atomic(&json, body.as_bytes())?;
    Ok((csv, json))
}

/// Placement traces of the proposed search over `trials` seeds.
pub fn convergence(
    scenario: &ScenarioConfig,
    placement: &PlacementConfig,
    seed: u64,
    trials: usize,
    workers: usize,
) -> Result<Vec<(u64, bool, Vec<TraceRow<f64>>)>> {
    let settings = placement.settings();
    let objective = if settings.refine_candidates { Objective::Refined } else { Objective::UniformPower };
    par_map((0..trials).collect(), workers, |trial| {
        let seed = derive_seed(seed, trial as u64);
        let s = generate_scenario::<f64>(scenario, seed)?;
        let out = optimize_placement(&s, &objective, &settings)?;
        Ok((seed, out.converged, out.trace))
    })
}

pub fn trace_to_csv(traces: &[(u64, bool, Vec<TraceRow<f64>>)]) -> String {
    let uavs = traces
        .first()
        .and_then(|t| t.2.first())
        .map_or(0, |r| r.positions.len());
    let mut s = String::from("trial,seed,converged,iteration,radius_m,objective_bps");
    for l in 0..uavs {
        s.push_str(&format!(",uav{l}_x,uav{l}_y"));
    }
    s.push('\n');
    for (trial, (seed, converged, rows)) in traces.iter().enumerate() {
        for r in rows {
            s.push_str(&format!("{trial},{seed},{converged},{},{},{}", r.iteration, r.radius, r.objective));
            for p in &r.positions {
                s.push_str(&format!(",{},{}", p.x, p.y));
            }
            s.push('\n');
        }
    }
    s
}

/// Positions, association, and powers of one strategy run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Snapshot {
    pub strategy: Strategy,
    pub seed: u64,
    pub objective_bps: f64,
    pub per_uav_bps: Vec<f64>,
    pub tbs: Vec<Point3<f64>>,
    pub uavs: Vec<Point3<f64>>,
    pub users: Vec<Point3<f64>>,
    /// `(user, uav, rb, power_w)` per served user.
    pub links: Vec<(usize, usize, usize, f64)>,
    /// Balloon of each UAV.
    pub backhaul: Vec<Option<usize>>,
}

pub fn snapshot(scenario: &Scenario<f64>, strategy: Strategy, settings: &PlacementSettings<f64>) -> Result<Snapshot> {
    let out = run_strategy(scenario, strategy, settings)?;
    let links = (0..scenario.num_users())
        .filter_map(|u| {
            out.association
                .serving(u)
                .map(|(l, n)| (u, l, n, out.power.power[[l, u, n]]))
        })
        .collect();
    Ok(Snapshot {
        strategy,
        seed: scenario.seed,
        objective_bps: out.value.total,
        per_uav_bps: out.value.per_uav,
        tbs: scenario.tbs.clone(),
        uavs: out.placement.positions,
        users: scenario.users.clone(),
        links,
        backhaul: (0..scenario.num_uavs()).map(|l| out.association.backhaul_of(l)).collect(),
    })
}

pub fn snapshot_to_csv(s: &Snapshot) -> String {
    let mut out = String::from("entity,index,x,y,z,uav,rb,tb,power_w\n");
    for (i, p) in s.tbs.iter().enumerate() {
        out.push_str(&format!("tb,{i},{},{},{},,,,\n", p.x, p.y, p.z));
    }
    for (i, p) in s.uavs.iter().enumerate() {
        let tb = s.backhaul[i].map(|m| m.to_string()).unwrap_or_default();
        out.push_str(&format!("uav,{i},{},{},{},,,{tb},\n", p.x, p.y, p.z));
    }
    for (i, p) in s.users.iter().enumerate() {
        match s.links.iter().find(|k| k.0 == i) {
            Some(&(_, l, n, w)) => out.push_str(&format!("user,{i},{},{},{},{l},{n},,{w}\n", p.x, p.y, p.z)),
            None => out.push_str(&format!("user,{i},{},{},{},,,,\n", p.x, p.y, p.z)),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn tiny_spec() -> ExperimentSpec {
        ExperimentSpec {
            scenario: ScenarioConfig {
                users: 4,
                uavs: 2,
                area: [300.0, 300.0],
                tbs: vec![[0.0, 150.0, 200.0]],
                ..Default::default()
            },
            placement: PlacementConfig { max_iter: 3, ..Default::default() },
            sweep_var: SweepVar::PeakPowerDbm,
            sweep_values: vec![20.0, 30.0],
            strategies: Strategy::ALL.to_vec(),
            trials: 2,
            seed: 9,
        }
    }

    #[test]
    fn strategy_names_round_trip() {
        for s in Strategy::ALL {
            assert_eq!(s.name().parse::<Strategy>().unwrap(), s);
            let json = serde_json::to_string(&s).unwrap();
            assert_eq!(json, format!("\"{}\"", s.name()));
            assert_eq!(serde_json::from_str::<Strategy>(&json).unwrap(), s);
        }
        assert!("greedy".parse::<Strategy>().is_err());
    }

    #[test]
    fn config_parsing() {
        let c = HarnessConfig::from_toml(
            "seed = 7\nstrategies = [\"proposed\"]\n[scenario]\nusers = 5\n[scenario.radio]\nrician_k = 3.0\n",
        )
        .unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.strategies, vec![Strategy::Proposed]);
        assert_eq!(c.scenario.users, 5);
        assert_eq!(c.scenario.radio.rician_k, 3.0);
        assert_eq!(c.trials, 50);
        assert!(HarnessConfig::from_toml("strategies = [\"greedy\"]").is_err());
        assert!(HarnessConfig::from_toml("unknown = 1").is_err());
        let text = toml::to_string(&HarnessConfig::default()).unwrap();
        assert_eq!(HarnessConfig::from_toml(&text).unwrap(), HarnessConfig::default());
    }

    #[test]
    fn spec_validation_and_hash() {
        let spec = tiny_spec();
        assert!(spec.validate().is_ok());
        let mut other = spec.clone();
        other.trials = 3;
        assert_ne!(spec.hash(), other.hash());
        assert_eq!(spec.hash(), tiny_spec().hash());
        let mut bad = spec.clone();
        bad.sweep_values = vec![30.0, 20.0];
        assert!(bad.validate().is_err());
        bad.sweep_values = vec![20.0];
        bad.trials = 0;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn sweep_rows_and_dominance() {
        let spec = tiny_spec();
        let rec = sweep(&spec, 1).unwrap();
        assert_eq!(rec.rows.len(), 2 * 2 * 3);
        assert_eq!(rows_to_csv(&rec.rows).lines().count(), 13);
        for v in &spec.sweep_values {
            let p = rec.values(Strategy::Proposed, *v);
            let a = rec.values(Strategy::AssocUniformPower, *v);
            for (x, y) in p.iter().zip(&a) {
                assert!(x >= y && *y >= 0.0);
            }
        }
        let (m, _) = mean_stderr(&rec.values(Strategy::Proposed, 20.0));
        assert_eq!(rec.means(Strategy::Proposed)[0], m);
    }

    #[test]
    fn more_trials_keep_shared_seeds() {
        let spec = ExperimentSpec { strategies: vec![Strategy::AssocUniformPower], ..tiny_spec() };
        let more = ExperimentSpec { trials: 3, ..spec.clone() };
        let a = sweep(&spec, 1).unwrap();
        let b = sweep(&more, 1).unwrap();
        for r in &a.rows {
            let m = b
                .rows
                .iter()
                .find(|q| q.trial == r.trial && q.sweep_value == r.sweep_value)
                .unwrap();
            assert_eq!(m.objective_bps, r.objective_bps);
        }
    }

    #[test]
    fn json_round_trip_reproduces_csv() {
        let rec = sweep(&ExperimentSpec { trials: 1, sweep_values: vec![30.0], ..tiny_spec() }, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let (csv, json) = emit_outputs(&rec, dir.path(), "run").unwrap();
        let back: RunRecord = serde_json::from_str(&std::fs::read_to_string(json).unwrap()).unwrap();
        assert_eq!(rows_to_csv(&back.rows), std::fs::read_to_string(csv).unwrap());
        assert_eq!(back.spec_hash, back.spec.hash());
    }

    #[test]
    fn unwritable_path_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("f");
        std::fs::write(&file, b"x").unwrap();
        assert!(write_atomic(&file.join("sub").join("out.csv"), b"y").is_err());
    }
}
