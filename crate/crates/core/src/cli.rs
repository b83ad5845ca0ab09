//! Command-line front end.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::engine::Matcher;
use crate::metrics::{compute_metrics, MetricsReport, NO_REQUESTS};
use crate::network::Seconds;
use crate::sim::{generate_demand, run_scenario, ScenarioConfig, ScenarioResult};

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

pub const TRIP_LOG_FILE: &str = "trip_log.csv";
pub const METRICS_FILE: &str = "metrics.csv";
pub const MANIFEST_FILE: &str = "manifest.toml";
pub const SWEEP_FILE: &str = "sweep.csv";
pub const COMPARE_FILE: &str = "compare.csv";

#[derive(Debug, Parser)]
#[command(name = "ridematch", version, about = "Dynamic ride matching simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one scenario and write the trip log, metrics and manifest.
    Run(RunArgs),
    /// Simulate every combination of a sweep spec.
    Sweep(SweepArgs),
    /// Simulate a scenario under both matchers and report paired deltas.
    Compare(RunArgs),
    /// Check a scenario config, manifest or sweep spec without simulating.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Scenario config or manifest.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the configured matcher.
    #[arg(long)]
    pub matcher: Option<Matcher>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Sweep spec.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    /// Worker threads; defaults to the number of CPUs.
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub matcher: Option<Matcher>,
}

/// Reproducibility record written next to every run's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub artifact_version: String,
    /// SHA-256 of the embedded config rendered as TOML.
    pub config_sha256: String,
    pub seed: u64,
    pub matcher: Matcher,
    pub config: ScenarioConfig,
}

impl Manifest {
    pub fn new(config: &ScenarioConfig) -> Self {
        let config = config.with_absolute_paths();
        Self {
            artifact_version: ARTIFACT_VERSION.to_string(),
            config_sha256: config_hash(&config),
            seed: config.seed,
            matcher: config.matcher,
            config,
        }
    }
}

pub fn config_hash(config: &ScenarioConfig) -> String {
    hex::encode(Sha256::digest(config.to_toml().as_bytes()))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("failed to read {}", path.display()))
}

fn parse_table(path: &Path) -> Result<(String, toml::Table)> {
    let text = read(path)?;
    let table: toml::Table =
        toml::from_str(&text).with_context(|| format!("malformed TOML in {}", path.display()))?;
    Ok((text, table))
}

/// Loads a scenario config, or the config embedded in a manifest after
/// checking its hash.
pub fn load_scenario(path: &Path) -> Result<ScenarioConfig> {
    let (text, table) = parse_table(path)?;
    if table.contains_key("config_sha256") {
        let manifest: Manifest =
            toml::from_str(&text).with_context(|| format!("malformed manifest {}", path.display()))?;
        let actual = config_hash(&manifest.config);
        ensure!(
            actual == manifest.config_sha256,
            "manifest {} is inconsistent: config hash {} does not match recorded {}",
            path.display(),
            actual,
            manifest.config_sha256
        );
        return Ok(manifest.config);
    }
    Ok(ScenarioConfig::load(path)?)
}

fn apply_overrides(mut config: ScenarioConfig, seed: Option<u64>, matcher: Option<Matcher>) -> ScenarioConfig {
    if let Some(seed) = seed {
        config.seed = seed;
    }
    if let Some(matcher) = matcher {
        config.matcher = matcher;
    }
    config
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("failed to write {}", path.display()))?;
    Ok(path)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("failed to create {}", dir.display()))
}

pub fn metrics_of(result: &ScenarioResult) -> MetricsReport {
    compute_metrics(&result.trips, &result.vehicles, &result.updates)
}

pub fn cmd_run(args: &RunArgs) -> Result<MetricsReport> {
    let config = apply_overrides(load_scenario(&args.config)?, args.seed, args.matcher);
    let result = run_scenario(&config)?;
    let report = metrics_of(&result);
    ensure_dir(&args.out_dir)?;
    write(&args.out_dir, TRIP_LOG_FILE, &result.trip_log_csv())?;
    write(&args.out_dir, METRICS_FILE, &report.to_csv())?;
    let manifest = toml::to_string(&Manifest::new(&config)).context("failed to render manifest")?;
    write(&args.out_dir, MANIFEST_FILE, &manifest)?;
    println!("{} seed {}\n{report}", config.matcher, config.seed);
    Ok(report)
}

pub fn cmd_compare(args: &RunArgs) -> Result<(MetricsReport, MetricsReport)> {
    let config = apply_overrides(load_scenario(&args.config)?, args.seed, None);
    let net = config.load_network()?;
    let run = |matcher| {
        let c = ScenarioConfig { matcher, ..config.clone() };
        crate::sim::run_scenario_on(&c, &net)
    };
    let (g, b) = (run(Matcher::Gmomatch)?, run(Matcher::Baseline)?);
    let (mg, mb) = (metrics_of(&g), metrics_of(&b));
    ensure_dir(&args.out_dir)?;
    write(&args.out_dir, "trip_log_gmomatch.csv", &g.trip_log_csv())?;
    write(&args.out_dir, "trip_log_baseline.csv", &b.trip_log_csv())?;
    write(&args.out_dir, COMPARE_FILE, &compare_csv(&mg, &mb))?;
    let manifest = toml::to_string(&Manifest::new(&config)).context("failed to render manifest")?;
    write(&args.out_dir, MANIFEST_FILE, &manifest)?;
    println!("seed {}\n{}", config.seed, compare_csv(&mg, &mb).trim_end());
    Ok((mg, mb))
}

/// Paired indicators: `metric,gmomatch,baseline,delta` with delta the
/// GMOMatch value minus the baseline value.
pub fn compare_csv(g: &MetricsReport, b: &MetricsReport) -> String {
    let rows: [(&str, Option<f64>, Option<f64>); 11] = [
        ("service_rate_pct", g.service_rate, b.service_rate),
        ("served", Some(g.served as f64), Some(b.served as f64)),
        ("expired", Some(g.expired as f64), Some(b.expired as f64)),
        ("avg_vkt_km", Some(g.avg_vkt_km), Some(b.avg_vkt_km)),
        ("avg_detour_min", Some(g.avg_detour_min), Some(b.avg_detour_min)),
        ("avg_wait_min", Some(g.avg_wait_min), Some(b.avg_wait_min)),
        (
            "avg_shared_vehicle_travel_time_min",
            Some(g.avg_shared_vehicle_travel_time_min),
            Some(b.avg_shared_vehicle_travel_time_min),
        ),
        (
            "avg_shared_vehicle_speed_kmh",
            Some(g.avg_shared_vehicle_speed_kmh),
            Some(b.avg_shared_vehicle_speed_kmh),
        ),
        ("avg_assignments", Some(g.avg_assignments), Some(b.avg_assignments)),
        ("avg_cost_calculation_s", Some(g.avg_cost_calculation_s), Some(b.avg_cost_calculation_s)),
        ("avg_solution_s", Some(g.avg_solution_s), Some(b.avg_solution_s)),
    ];
    let cell = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_else(|| NO_REQUESTS.to_string());
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["metric", "gmomatch", "baseline", "delta"]).expect("in-memory write");
    for (name, x, y) in rows {
        let delta = x.zip(y).map(|(x, y)| x - y);
        w.write_record([name.to_string(), cell(x), cell(y), cell(delta)])
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

fn default_max_runs() -> usize {
    10_000
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxes {
    #[serde(default)]
    pub fleet_size: Vec<u32>,
    #[serde(default)]
    pub demand_scale: Vec<f64>,
    #[serde(default)]
    pub capacity: Vec<u32>,
    #[serde(default)]
    pub flexibility_s: Vec<Seconds>,
    #[serde(default)]
    pub update_interval_s: Vec<Seconds>,
    #[serde(default)]
    pub matcher: Vec<Matcher>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub base: ScenarioConfig,
    #[serde(default)]
    pub axes: SweepAxes,
    /// Empty means the base seed only.
    #[serde(default)]
    pub seeds: Vec<u64>,
    /// Upper bound on combinations times seeds.
    #[serde(default = "default_max_runs")]
    pub max_combinations: usize,
}

fn axis<T: Clone>(values: &[T], base: T) -> Vec<T> {
    if values.is_empty() {
        vec![base]
    } else {
        values.to_vec()
    }
}

impl SweepSpec {
    pub fn load(path: &Path) -> Result<Self> {
        let mut spec: Self =
            toml::from_str(&read(path)?).with_context(|| format!("malformed sweep spec {}", path.display()))?;
        spec.base.base_dir = path.parent().unwrap_or(Path::new("")).to_path_buf();
        Ok(spec)
    }

    /// Every scenario of the sweep, seeds varying fastest.
    pub fn expand(&self) -> Result<Vec<ScenarioConfig>> {
        let b = &self.base;
        let a = &self.axes;
        let seeds = axis(&self.seeds, b.seed);
        let (fleets, scales, caps) = (
            axis(&a.fleet_size, b.fleet_size),
            axis(&a.demand_scale, b.demand_scale),
            axis(&a.capacity, b.capacity),
        );
        let (flexes, intervals, matchers) = (
            axis(&a.flexibility_s, b.flexibility_s),
            axis(&a.update_interval_s, b.update_interval_s),
            axis(&a.matcher, b.matcher),
        );
        let total = [fleets.len(), scales.len(), caps.len(), flexes.len(), intervals.len(), matchers.len(), seeds.len()]
            .iter()
            .try_fold(1usize, |acc, &n| acc.checked_mul(n))
            .unwrap_or(usize::MAX);
        if total > self.max_combinations {
            bail!("sweep has {total} runs, above max_combinations = {}", self.max_combinations);
        }
        let mut out = Vec::with_capacity(total);
        for &fleet_size in &fleets {
            for &demand_scale in &scales {
                for &capacity in &caps {
                    for &flexibility_s in &flexes {
                        for &update_interval_s in &intervals {
                            for &matcher in &matchers {
                                for &seed in &seeds {
                                    out.push(ScenarioConfig {
                                        fleet_size,
                                        demand_scale,
                                        capacity,
                                        flexibility_s,
                                        update_interval_s,
                                        matcher,
                                        seed,
                                        ..b.clone()
                                    });
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

const SWEEP_COLUMNS: [&str; 10] = [
    "run",
    "seed",
    "fleet_size",
    "demand_scale",
    "capacity",
    "flexibility_s",
    "update_interval_s",
    "matcher",
    "status",
    "error",
];

pub fn sweep_csv(runs: &[(ScenarioConfig, Result<MetricsReport, String>)]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let header: Vec<&str> = SWEEP_COLUMNS.iter().chain(MetricsReport::CSV_HEADER.iter()).copied().collect();
    w.write_record(&header).expect("in-memory write");
    for (i, (c, outcome)) in runs.iter().enumerate() {
        let mut row = vec![
            i.to_string(),
            c.seed.to_string(),
            c.fleet_size.to_string(),
            c.demand_scale.to_string(),
            c.capacity.to_string(),
            c.flexibility_s.to_string(),
            c.update_interval_s.to_string(),
            c.matcher.to_string(),
        ];
        match outcome {
            Ok(m) => {
                row.extend(["ok".to_string(), String::new()]);
                row.extend(m.csv_values());
            }
            Err(e) => {
                row.extend(["failed".to_string(), e.clone()]);
                row.extend(std::iter::repeat_n(String::new(), MetricsReport::CSV_HEADER.len()));
            }
        }
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<Vec<(ScenarioConfig, Result<MetricsReport, String>)>> {
    let spec = SweepSpec::load(&args.config)?;
    let scenarios = spec.expand()?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = args.jobs {
        ensure!(jobs >= 1, "--jobs must be at least 1");
        pool = pool.num_threads(jobs);
    }
    let pool = pool.build().context("failed to start worker pool")?;
    let runs: Vec<(ScenarioConfig, Result<MetricsReport, String>)> = pool.install(|| {
        scenarios
            .into_par_iter()
            .map(|c| {
                let outcome = run_scenario(&c).map(|r| metrics_of(&r)).map_err(|e| e.to_string());
                (c, outcome)
            })
            .collect()
    });
    ensure_dir(&args.out_dir)?;
    let path = write(&args.out_dir, SWEEP_FILE, &sweep_csv(&runs))?;
    let failed = runs.iter().filter(|(_, o)| o.is_err()).count();
    println!("{} runs ({failed} failed) -> {}", runs.len(), path.display());
    Ok(runs)
}

pub fn cmd_validate(args: &ValidateArgs) -> Result<()> {
    let (_, table) = parse_table(&args.config)?;
    if table.contains_key("base") {
        let spec = SweepSpec::load(&args.config)?;
        let scenarios = spec.expand()?;
        for (i, c) in scenarios.iter().enumerate() {
            validate_scenario(c).with_context(|| format!("sweep run {i}"))?;
        }
        println!("valid sweep: {} runs", scenarios.len());
        return Ok(());
    }
    let config = apply_overrides(load_scenario(&args.config)?, args.seed, args.matcher);
    let requests = validate_scenario(&config)?;
    println!(
        "valid scenario: {requests} requests, {} vehicles of capacity {}, matcher {}",
        config.fleet_size, config.capacity, config.matcher
    );
    Ok(())
}

/// Validates a scenario and returns how many requests its seed generates.
fn validate_scenario(config: &ScenarioConfig) -> Result<usize> {
    let net = config.load_network()?;
    config.validate(&net)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    Ok(generate_demand(config, &net, &mut rng)?.len())
}

pub fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Run(args) => cmd_run(args).map(drop),
        Command::Sweep(args) => cmd_sweep(args).map(drop),
        Command::Compare(args) => cmd_compare(args).map(drop),
        Command::Validate(args) => cmd_validate(args),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::DemandModel;

    fn base() -> ScenarioConfig {
        ScenarioConfig {
            network: "bundled:grid".into(),
            demand: DemandModel::Uniform { requests_per_hour: 60.0 },
            demand_scale: 1.0,
            loading_period_s: 300,
            fleet_size: 2,
            capacity: 4,
            flexibility_s: 300,
            update_interval_s: 30,
            matcher: Matcher::Gmomatch,
            seed: 1,
            base_dir: PathBuf::new(),
        }
    }

    fn spec(axes: SweepAxes, seeds: Vec<u64>) -> SweepSpec {
        SweepSpec { base: base(), axes, seeds, max_combinations: 100 }
    }

    #[test]
    fn cross_product_count() {
        let axes = SweepAxes {
            fleet_size: vec![2, 3],
            matcher: vec![Matcher::Gmomatch, Matcher::Baseline],
            ..Default::default()
        };
        assert_eq!(spec(axes, vec![1, 2, 3]).expand().unwrap().len(), 12);
        assert_eq!(spec(SweepAxes::default(), vec![]).expand().unwrap(), vec![base()]);
    }

    #[test]
    fn cap_bounds_sweep() {
        let axes = SweepAxes { capacity: (1..=11).collect(), ..Default::default() };
        let s = SweepSpec { max_combinations: 10, ..spec(axes, vec![]) };
        assert!(s.expand().is_err());
    }

    #[test]
    fn manifest_hash_tracks_config() {
        let m = Manifest::new(&base());
        assert_eq!(m.config_sha256, config_hash(&base()));
        assert_ne!(m.config_sha256, config_hash(&ScenarioConfig { seed: 2, ..base() }));
        let text = toml::to_string(&m).unwrap();
        let back: Manifest = toml::from_str(&text).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn compare_deltas() {
        let g = MetricsReport { service_rate: Some(80.0), served: 8, ..Default::default() };
        let b = MetricsReport { service_rate: Some(60.0), served: 6, ..Default::default() };
        let text = compare_csv(&g, &b);
        assert!(text.contains("service_rate_pct,80.000000,60.000000,20.000000"));
        assert!(text.contains("served,8.000000,6.000000,2.000000"));
        let none = compare_csv(&MetricsReport::default(), &MetricsReport::default());
        assert!(none.contains("service_rate_pct,NA,NA,NA"));
    }

    #[test]
    fn failed_runs_become_rows() {
        let runs = vec![
            (base(), Ok(MetricsReport::default())),
            (ScenarioConfig { capacity: 0, ..base() }, Err("capacity must be at least 1".to_string())),
        ];
        let text = sweep_csv(&runs);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[2].contains(",failed,capacity must be at least 1,"));
        let width = lines[0].split(',').count();
        assert!(lines.iter().all(|l| l.split(',').count() == width));
    }
}
