//! Scenario execution. Every scenario returns tables; writing them is the
//! caller's job.

use rayon::prelude::*;
use sleepwake_core::learn::{oracle_cost_per_step, run_ce_learning, LearnConfig, LearnTrace};
use sleepwake_core::model::{
    access_probabilities, expected_weighted_peak_age, transmit_fractions, Fleet, Regime,
};
use sleepwake_core::planner::{fixed_rate_baseline, plan_ts_zero, synchronized_optimum, OuterLayer};
use sleepwake_core::sim::{
    energy_audit, run_simulation, sampled_stream, SimConfig, StopCondition, StreamEvent,
};
use sleepwake_core::{plan, Error};

use crate::config::{ExperimentConfig, Scenario};
use crate::error::{CliError, Result};
use crate::table::{join, Cell, Delimiter, Table};

/// Caps the worker count of every run.
pub const MAX_JOBS_ENV: &str = "SLEEPWAKE_MAX_JOBS";

/// Command-line overrides.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOptions {
    pub seeds: Option<u64>,
    pub jobs: Option<usize>,
    /// Also emit the per-event trace of each simulation.
    pub trace: bool,
}

/// A table plus the suffix that distinguishes its file from the main output
/// (`None` for the main output).
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub suffix: Option<String>,
    pub table: Table,
}

impl Artifact {
    fn main(table: Table) -> Self {
        Self { suffix: None, table }
    }
}

/// Worker count: `--jobs`, else the machine's parallelism, both capped by
/// the environment variable.
pub fn worker_count(requested: Option<usize>) -> usize {
    let cap = std::env::var(MAX_JOBS_ENV).ok().and_then(|v| v.parse::<usize>().ok());
    let n = requested.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |p| p.get()));
    cap.map_or(n, |c| n.min(c)).max(1)
}

/// Runs `f` over `items` on a pool of `jobs` workers; results keep the
/// order of `items`.
fn par_map<T: Sync, U: Send>(jobs: usize, items: &[T], f: impl Fn(&T) -> Result<U> + Sync) -> Result<Vec<U>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {jobs} workers: {e}")))?;
    pool.install(|| items.par_iter().map(&f).collect())
}

pub fn execute(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<Vec<Artifact>> {
    cfg.validate()?;
    let mut cfg = cfg.clone();
    if let Some(s) = opts.seeds {
        if s == 0 {
            return Err(CliError::Config("--seeds must be >= 1".into()));
        }
        cfg.run.seeds = s;
    }
    let jobs = worker_count(opts.jobs);
    match cfg.scenario {
        Scenario::Solve => solve(&cfg).map(|t| vec![Artifact::main(t)]),
        Scenario::Simulate => simulate(&cfg, jobs, opts.trace),
        Scenario::Learn => learn(&cfg, jobs),
        Scenario::Oracle => oracle(&cfg, jobs).map(|t| vec![Artifact::main(t)]),
        Scenario::CompareBaselines => compare(&cfg, jobs).map(|t| vec![Artifact::main(t)]),
        s if s.is_sweep() => sweep(&cfg, jobs).map(|t| vec![Artifact::main(t)]),
        _ => unreachable!(),
    }
}

/// Planner output at one fleet; the zero-sensing adequate case reports the
/// nested limit (no finite rates exist).
struct Point {
    regime: Regime,
    beta_star: f64,
    x_star: f64,
    rates: Option<Vec<f64>>,
    objective: f64,
    lower: f64,
    upper: f64,
    gap_constant: f64,
    gap_bound: f64,
    asymptote: f64,
    synchronized: f64,
}

fn solve_point(fleet: &Fleet) -> Result<Point> {
    let sync = synchronized_optimum(&fleet.weights(), &fleet.efficiencies())?.value;
    match plan(fleet) {
        Ok(s) => Ok(Point {
            regime: s.plan.regime,
            beta_star: s.plan.beta_star,
            x_star: s.plan.x_star,
            objective: s.objective(),
            rates: Some(s.plan.rates),
            lower: s.lower_bound,
            upper: s.upper_bound,
            gap_constant: s.gap_constant,
            gap_bound: s.gap_bound,
            asymptote: s.asymptote,
            synchronized: sync,
        }),
        Err(Error::UnboundedRates) => {
            let n = plan_ts_zero(fleet, OuterLayer::Limit)?;
            Ok(Point {
                regime: fleet.regime(),
                beta_star: n.beta,
                x_star: f64::INFINITY,
                rates: None,
                objective: n.objective,
                lower: n.objective,
                upper: n.objective,
                gap_constant: 0.0,
                gap_bound: 0.0,
                asymptote: sync,
                synchronized: sync,
            })
        }
        Err(e) => Err(e.into()),
    }
}

fn solve(cfg: &ExperimentConfig) -> Result<Table> {
    let mut t = Table::new(
        "sleepwake solve",
        vec![
            ("instance", "fleet instance (random fleets draw one per seed)"),
            ("m", "number of sources"),
            ("ts_ratio", "sensing time over mean transmission time"),
            ("regime", "energy-adequate or energy-scarce"),
            ("beta_star", "share level (nan when energy-scarce)"),
            ("x_star", "broadcast rate scale (inf at ts_ratio 0 when adequate)"),
            ("objective", "weighted peak age of the plan, units of E[T]"),
            ("lower_bound", "lower bound on the optimum, units of E[T]"),
            ("upper_bound", "upper bound on the optimum, units of E[T]"),
            ("gap_constant", "regime gap constant"),
            ("gap_bound", "certified optimality gap, units of E[T]"),
            ("asymptote", "zero-sensing limit of the optimum, units of E[T]"),
            ("synchronized", "optimum of the synchronized schedule, units of E[T]"),
            ("rates", "normalized sleep rates, ';'-separated (empty when unbounded)"),
        ],
        Delimiter::Comma,
    );
    for instance in instances(cfg) {
        let fleet = cfg.fleet(instance, None, cfg.ts_ratio)?;
        let p = solve_point(&fleet)?;
        t.push(vec![
            instance.into(),
            fleet.len().into(),
            cfg.ts_ratio.into(),
            p.regime.name().into(),
            p.beta_star.into(),
            p.x_star.into(),
            p.objective.into(),
            p.lower.into(),
            p.upper.into(),
            p.gap_constant.into(),
            p.gap_bound.into(),
            p.asymptote.into(),
            p.synchronized.into(),
            p.rates.as_deref().map_or(Cell::Empty, join),
        ]);
    }
    Ok(t)
}

/// Explicit fleets have a single instance; random fleets one per seed.
fn instances(cfg: &ExperimentConfig) -> Vec<u64> {
    match cfg.fleet {
        crate::config::FleetSpec::Explicit(_) => vec![0],
        crate::config::FleetSpec::Random(_) => (0..cfg.run.seeds).collect(),
    }
}

fn sim_config(cfg: &ExperimentConfig, fleet: &Fleet, seed: u64, replication: u64) -> Result<SimConfig> {
    Ok(SimConfig::new(fleet.clone(), cfg.tx_dist(), seed, StopCondition::Cycles(cfg.run.cycles))?
        .with_stream(replication)
        .with_timer_policy(cfg.run.timer_policy.into()))
}

fn simulated_rates(cfg: &ExperimentConfig, fleet: &Fleet) -> Result<Vec<f64>> {
    match &cfg.run.rates {
        Some(r) => Ok(r.clone()),
        None => Ok(plan(fleet)?.plan.rates),
    }
}

fn simulate(cfg: &ExperimentConfig, jobs: usize, trace: bool) -> Result<Vec<Artifact>> {
    let runs: Vec<(u64, u64)> = (0..cfg.run.seeds)
        .flat_map(|s| (0..cfg.run.replications).map(move |r| (s, r)))
        .collect();
    let random = matches!(cfg.fleet, crate::config::FleetSpec::Random(_));
    let results = par_map(jobs, &runs, |&(seed, rep)| {
        let fleet = cfg.fleet(if random { seed } else { 0 }, None, cfg.ts_ratio)?;
        let rates = simulated_rates(cfg, &fleet)?;
        let sc = sim_config(cfg, &fleet, seed, rep)?;
        let report = run_simulation(&sc, &rates)?;
        let events = if trace { Some(event_table(&sc, &rates, seed, rep)?) } else { None };
        Ok((fleet, rates, report, events))
    })?;

    let mut t = Table::new(
        "sleepwake simulate",
        vec![
            ("seed", "simulation seed"),
            ("replication", "independent stream under the seed"),
            ("source", "source index"),
            ("weight", "source weight"),
            ("efficiency", "power efficiency"),
            ("rate", "normalized sleep rate simulated"),
            ("deliveries", "successful deliveries after warm-up"),
            ("peak_age_s", "mean simulated peak age, seconds"),
            ("analytic_peak_age_s", "closed-form expected peak age, seconds"),
            ("access_prob", "fraction of cycles won"),
            ("analytic_access_prob", "closed-form access probability"),
            ("transmit_fraction", "fraction of time transmitting (collisions included)"),
            ("analytic_transmit_fraction", "closed-form transmit fraction"),
            ("transmit_fraction_stderr", "standard error of transmit_fraction"),
            ("weighted_peak_age_s", "simulated sum of weight times mean peak age, seconds"),
            ("analytic_weighted_peak_age_s", "closed-form weighted peak age, seconds"),
            ("cycles", "cycles after warm-up"),
            ("collisions", "collision cycles after warm-up"),
        ],
        Delimiter::Comma,
    );
    let mut artifacts = Vec::new();
    for ((seed, rep), (fleet, rates, report, events)) in runs.iter().zip(results) {
        let eps = fleet.ts_ratio();
        let mean = fleet.mean_tx_time();
        let peak = expected_weighted_peak_age(&fleet, &rates)?;
        let access = access_probabilities(&rates, eps)?;
        let sigma = transmit_fractions(&rates, eps)?;
        for (l, s) in report.per_source.iter().enumerate() {
            let src = &fleet.sources()[l];
            t.push(vec![
                (*seed).into(),
                (*rep).into(),
                l.into(),
                src.weight.into(),
                src.power_efficiency.into(),
                rates[l].into(),
                s.deliveries.into(),
                s.peak_age_mean.into(),
                (peak.per_source[l] * mean).into(),
                s.empirical_access_prob.into(),
                access[l].into(),
                s.empirical_transmit_fraction.into(),
                sigma[l].into(),
                s.transmit_fraction_stderr.into(),
                report.aggregate.weighted_avg_peak_age.into(),
                peak.total_seconds.into(),
                report.aggregate.cycles.into(),
                report.aggregate.collisions.into(),
            ]);
        }
        if let Some(e) = events {
            artifacts.push(Artifact {
                suffix: Some(format!("events.seed{seed}.rep{rep}")),
                table: e,
            });
        }
    }
    artifacts.insert(0, Artifact::main(t));
    Ok(artifacts)
}

fn event_table(sc: &SimConfig, rates: &[f64], seed: u64, rep: u64) -> Result<Table> {
    let mut t = Table::new(
        format!("sleepwake event trace, seed {seed}, replication {rep}"),
        vec![
            ("time_s", "simulated time of the event, seconds"),
            ("event_kind", "access_start, delivery_end or collision_end"),
            ("source_id", "source index (';'-separated participants for collisions)"),
            ("service_time_s", "transmission or collision length, seconds"),
            ("peak_s", "peak age recorded at a delivery, seconds"),
        ],
        Delimiter::Tab,
    );
    for sample in sampled_stream(sc, rates)? {
        let row: Vec<Cell> = match sample.event {
            StreamEvent::Initial => continue,
            StreamEvent::AccessStart { source } => {
                vec![sample.time.into(), "access_start".into(), source.into(), Cell::Empty, Cell::Empty]
            }
            StreamEvent::DeliveryEnd {
                source,
                service_time,
                peak,
            } => vec![
                sample.time.into(),
                "delivery_end".into(),
                source.into(),
                service_time.into(),
                peak.into(),
            ],
            StreamEvent::CollisionEnd { participants, duration } => vec![
                sample.time.into(),
                "collision_end".into(),
                participants.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(";").into(),
                duration.into(),
                Cell::Empty,
            ],
        };
        t.push(row);
    }
    Ok(t)
}

fn learn_config(cfg: &ExperimentConfig, seed: u64, rep: u64) -> Result<LearnConfig> {
    let l = cfg.learn.as_ref().expect("validated");
    let random = matches!(cfg.fleet, crate::config::FleetSpec::Random(_));
    let fleet = cfg.fleet(if random { seed } else { 0 }, None, 0.0)?;
    let mut c = LearnConfig::new(
        cfg.tx_dist(),
        fleet.weights(),
        fleet.efficiencies(),
        l.sensing_time,
        cfg.run.horizon,
        seed,
    );
    if let Some(t) = l.theta_init {
        c.theta_init = t;
    }
    c.gamma = l.gamma;
    c.stream = rep;
    c.trace_stride = l.trace_stride;
    c.validate()?;
    Ok(c)
}

/// Oracle runs use the last stream of their seed, apart from every learner.
fn oracle_for(cfg: &ExperimentConfig, seed: u64) -> Result<f64> {
    let l = cfg.learn.as_ref().expect("validated");
    if let Some(j) = l.oracle_cost_per_step {
        return Ok(j);
    }
    let mut c = learn_config(cfg, seed, 0)?;
    c.stream = u64::MAX;
    Ok(oracle_cost_per_step(&c, l.oracle_steps)?)
}

fn learn(cfg: &ExperimentConfig, jobs: usize) -> Result<Vec<Artifact>> {
    let runs: Vec<(u64, u64)> = (0..cfg.run.seeds)
        .flat_map(|s| (0..cfg.run.replications).map(move |r| (s, r)))
        .collect();
    let random = matches!(cfg.fleet, crate::config::FleetSpec::Random(_));
    // one oracle constant per distinct fleet
    let fleets: Vec<u64> = if random { (0..cfg.run.seeds).collect() } else { vec![0] };
    let oracle = par_map(jobs, &fleets, |&s| oracle_for(cfg, s))?;
    let traces = par_map(jobs, &runs, |&(seed, rep)| {
        let mut c = learn_config(cfg, seed, rep)?;
        c.oracle_cost_per_step = Some(oracle[if random { seed as usize } else { 0 }]);
        Ok(run_ce_learning(&c)?)
    })?;
    let single = runs.len() == 1;
    Ok(runs
        .iter()
        .zip(traces)
        .map(|(&(seed, rep), tr)| {
            let j = oracle[if random { seed as usize } else { 0 }];
            Artifact {
                suffix: (!single).then(|| format!("seed{seed}.rep{rep}")),
                table: trace_table(&tr, seed, rep, j),
            }
        })
        .collect())
}

fn trace_table(tr: &LearnTrace, seed: u64, rep: u64, j: f64) -> Table {
    let mut t = Table::new(
        format!("sleepwake learning trace, seed {seed}, replication {rep}"),
        vec![
            ("n", "sampled step"),
            ("episode_k", "episode index, 2^k <= n < 2^(k+1)"),
            ("theta_hat_s", "running mean service time, seconds"),
            ("cumulative_cost", "sum of weighted peak ages charged so far, seconds"),
            ("regret", "cumulative_cost - n * oracle cost per step"),
            ("xi_s", "confidence radius, seconds (inf before the first delivery)"),
        ],
        Delimiter::Tab,
    );
    t.notes.push(format!("oracle cost per step {j:.16e}"));
    t.notes.push(format!(
        "final theta_hat {:.16e} s, deliveries {}, collisions {}",
        tr.final_theta, tr.deliveries, tr.collisions
    ));
    for r in &tr.rows {
        t.push(vec![
            r.n.into(),
            u64::from(r.episode).into(),
            r.theta_hat.into(),
            r.cumulative_cost.into(),
            r.regret.into(),
            r.xi.into(),
        ]);
    }
    t
}

fn oracle(cfg: &ExperimentConfig, jobs: usize) -> Result<Table> {
    let l = cfg.learn.as_ref().expect("validated");
    let seeds: Vec<u64> = (0..cfg.run.seeds).collect();
    let costs = par_map(jobs, &seeds, |&seed| {
        let mut c = learn_config(cfg, seed, 0)?;
        c.stream = u64::MAX;
        Ok(oracle_cost_per_step(&c, l.oracle_steps)?)
    })?;
    let mut t = Table::new(
        "sleepwake oracle cost per step",
        vec![
            ("seed", "seed of the oracle run"),
            ("steps", "sampled steps simulated"),
            ("cost_per_step", "mean weighted peak charge per sampled step, seconds"),
        ],
        Delimiter::Comma,
    );
    for (s, c) in seeds.iter().zip(&costs) {
        t.push(vec![(*s).into(), l.oracle_steps.into(), (*c).into()]);
    }
    Ok(t)
}

fn compare(cfg: &ExperimentConfig, jobs: usize) -> Result<Table> {
    let seeds = instances(cfg);
    let rows = par_map(jobs, &seeds, |&s| {
        let fleet = cfg.fleet(s, None, cfg.ts_ratio)?;
        let p = solve_point(&fleet)?;
        let base = fixed_rate_baseline(&fleet)?;
        let fixed = expected_weighted_peak_age(&fleet, &base.rates)?.total;
        Ok(vec![
            s.into(),
            fleet.len().into(),
            cfg.ts_ratio.into(),
            p.regime.name().into(),
            p.objective.into(),
            fixed.into(),
            p.lower.into(),
            p.asymptote.into(),
            base.rates[0].into(),
        ])
    })?;
    let mut t = Table::new(
        "sleepwake compare baselines",
        vec![
            ("instance", "fleet instance"),
            ("m", "number of sources"),
            ("ts_ratio", "sensing time over mean transmission time"),
            ("regime", "energy-adequate or energy-scarce"),
            ("optimal", "weighted peak age of the plan, units of E[T]"),
            ("fixed_rate", "weighted peak age of the best common feasible rate, units of E[T]"),
            ("lower_bound", "lower bound on the optimum, units of E[T]"),
            ("asymptote", "zero-sensing limit of the optimum, units of E[T]"),
            ("fixed_rate_value", "the common normalized rate of the baseline"),
        ],
        Delimiter::Comma,
    );
    rows.into_iter().for_each(|r| t.push(r));
    Ok(t)
}

/// One work item of a sweep: grid position, then seed.
#[derive(Debug, Clone, Copy)]
struct SweepItem {
    grid: usize,
    seed: u64,
    replication: u64,
}

fn sweep(cfg: &ExperimentConfig, jobs: usize) -> Result<Table> {
    let g = &cfg.sweep;
    let (grid_name, grid_doc, values): (&'static str, &'static str, Vec<f64>) = match cfg.scenario {
        Scenario::SweepTsRatio => ("ts_ratio", "sensing time over mean transmission time", g.ts_ratios.clone()),
        Scenario::SweepM => ("m", "number of sources", g.counts.iter().map(|&c| c as f64).collect()),
        Scenario::SweepEfficiency => ("efficiency_scale", "multiplier on every efficiency", g.efficiency_scales.clone()),
        Scenario::SweepLifetime => ("lifetime_years", "battery lifetime target, years", g.lifetimes_years.clone()),
        _ => unreachable!(),
    };
    let reps = if cfg.run.cycles > 0 { cfg.run.replications } else { 1 };
    let items: Vec<SweepItem> = (0..values.len())
        .flat_map(|grid| {
            (0..cfg.run.seeds).flat_map(move |seed| (0..reps).map(move |replication| SweepItem { grid, seed, replication }))
        })
        .collect();
    let lifetime = cfg.scenario == Scenario::SweepLifetime;
    let random = matches!(cfg.fleet, crate::config::FleetSpec::Random(_));

    let rows = par_map(jobs, &items, |it| {
        let v = values[it.grid];
        let instance = if random { it.seed } else { 0 };
        let (fleet, battery) = match cfg.scenario {
            Scenario::SweepTsRatio => (cfg.fleet(instance, None, v)?, None),
            Scenario::SweepM => (cfg.fleet(instance, Some(v as usize), cfg.ts_ratio)?, None),
            Scenario::SweepEfficiency => {
                let f = cfg.fleet(instance, None, cfg.ts_ratio)?;
                let b: Vec<f64> = f.efficiencies().iter().map(|x| x * v).collect();
                (Fleet::from_slices(&f.weights(), &b, f.ts_ratio(), f.mean_tx_time())?, None)
            }
            Scenario::SweepLifetime => {
                let spec = cfg.battery.expect("validated").spec(v);
                let b = sleepwake_core::model::power_efficiency_from_battery(&spec)?;
                let f = cfg.fleet(instance, None, cfg.ts_ratio)?;
                let bs = vec![b; f.len()];
                (Fleet::from_slices(&f.weights(), &bs, f.ts_ratio(), f.mean_tx_time())?, Some(spec))
            }
            _ => unreachable!(),
        };
        let p = solve_point(&fleet)?;
        let mut sim_peak = f64::NAN;
        let (mut power_ratio, mut met) = (f64::NAN, Cell::Empty);
        if cfg.run.cycles > 0 {
            let rates = p.rates.clone().ok_or(Error::UnboundedRates)?;
            let sc = sim_config(cfg, &fleet, it.seed, it.replication)?;
            let report = run_simulation(&sc, &rates)?;
            sim_peak = report.aggregate.weighted_avg_peak_age / fleet.mean_tx_time();
            if let Some(spec) = battery {
                let audit = energy_audit(&report, &fleet, &vec![spec; fleet.len()])?;
                power_ratio = audit
                    .actual_power
                    .iter()
                    .zip(&audit.max_power)
                    .map(|(a, m)| a / m)
                    .fold(f64::NEG_INFINITY, f64::max);
                met = audit.lifetime_met.iter().all(|&x| x).into();
            }
        }
        let grid_cell = if cfg.scenario == Scenario::SweepM { Cell::Int(v as u64) } else { v.into() };
        let mut row: Vec<Cell> = vec![
            grid_cell,
            it.seed.into(),
            it.replication.into(),
            fleet.len().into(),
            fleet.ts_ratio().into(),
            fleet.total_efficiency().into(),
            p.regime.name().into(),
            p.objective.into(),
            p.lower.into(),
            p.upper.into(),
            p.gap_bound.into(),
            p.asymptote.into(),
            sim_peak.into(),
        ];
        if lifetime {
            row.push(fleet.efficiencies()[0].into());
            row.push(power_ratio.into());
            row.push(met);
        }
        Ok(row)
    })?;

    let mut columns = vec![
        (grid_name, grid_doc),
        ("seed", "seed (fleet instance for random fleets, simulation seed)"),
        ("replication", "independent simulation stream under the seed"),
        ("m", "number of sources"),
        ("ts_ratio", "sensing time over mean transmission time"),
        ("total_efficiency", "sum of power efficiencies"),
        ("regime", "energy-adequate or energy-scarce"),
        ("objective", "weighted peak age of the plan, units of E[T]"),
        ("lower_bound", "lower bound on the optimum, units of E[T]"),
        ("upper_bound", "upper bound on the optimum, units of E[T]"),
        ("gap_bound", "certified optimality gap, units of E[T]"),
        ("asymptote", "zero-sensing limit of the optimum, units of E[T]"),
        ("sim_objective", "simulated weighted peak age, units of E[T] (nan without simulation)"),
    ];
    if lifetime {
        columns.push(("efficiency", "power efficiency implied by the battery"));
        columns.push(("worst_power_ratio", "largest simulated power over allowed power (nan without simulation)"));
        columns.push(("lifetime_met", "every source within its power budget (empty without simulation)"));
    }
    // the grid column replaces its fixed counterpart
    let dup = columns.iter().skip(1).position(|c| c.0 == grid_name).map(|i| i + 1);
    if let Some(i) = dup {
        columns.remove(i);
    }
    let mut t = Table::new(format!("sleepwake {}", cfg.scenario.name()), columns, Delimiter::Comma);
    for mut r in rows {
        if let Some(i) = dup {
            r.remove(i);
        }
        t.push(r);
    }
    Ok(t)
}
