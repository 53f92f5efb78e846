//! The six subcommands. Each one computes all of its tables first and only
//! then touches the output directory.

use std::time::{Instant, SystemTime, UNIX_EPOCH};

use wetting_core::dynamics::{simulate, LogOptions};
use wetting_core::metastability::{exit_experiment, metastable_well, ExitOptions, Rescale, RescaleKind};
use wetting_core::model::enumerate_paths;
use wetting_core::numeric::ln_sum;
use wetting_core::rng::stream;
use wetting_core::spectral::{
    activation_energy, bottleneck_ratio, build_generator, decomposition_bound, spectral_gap, EigenMethod, Subset,
};
use wetting_core::statics::{
    d_lambda, double_well_threshold, free_energy, free_energy_elevated, lambda_c, partition_elevated, partition_zero,
    scaling_profile, sup_deviation, GibbsSampler, Regime,
};
use wetting_core::{Ensemble, ModelParams, PhaseLabel};

use crate::config::{Command, ExperimentConfig};
use crate::error::CliResult;
use crate::output::{float, opt_float, OutputDir, RunManifest, Table};

/// Stream tags keeping the random streams of different commands apart.
const RUN_SAMPLE: u64 = 1;
const RUN_SIMULATE: u64 = 2;
const RUN_META: u64 = 3;
/// Points of each reference profile.
const PROFILE_POINTS: usize = 100;
/// Observations per simulated trajectory.
const OBSERVATIONS: f64 = 100.0;
/// Rescaled times at which exit-time survival is reported.
const SURVIVAL_TIMES: [f64; 3] = [0.5, 1.0, 2.0];
/// Relative slack for the bound checks.
const SLACK: f64 = 1e-9;

pub struct Outcome {
    pub tables: Vec<Table>,
    pub events: u64,
}

/// Validates, computes, writes every table and finally the manifest. Files
/// of a run that fails while writing are removed.
pub fn run(cfg: &ExperimentConfig) -> CliResult<RunManifest> {
    cfg.validate()?;
    let clock = Instant::now();
    let outcome = compute(cfg)?;
    let mut dir = OutputDir::create(&cfg.out)?;
    if let Err(e) = outcome.tables.iter().try_for_each(|t| dir.write_table(t)) {
        dir.discard();
        return Err(e);
    }
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        command: cfg.command.to_string(),
        seed: cfg.seed,
        config: cfg.to_text(),
        timestamp_unix: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        wall_clock_seconds: clock.elapsed().as_secs_f64(),
        events: outcome.events,
        files: dir.files().to_vec(),
    };
    if let Err(e) = dir.finish(&manifest) {
        dir.discard();
        return Err(e);
    }
    Ok(manifest)
}

pub fn compute(cfg: &ExperimentConfig) -> CliResult<Outcome> {
    match cfg.command {
        Command::Statics => statics(cfg),
        Command::Phase => phase(cfg),
        Command::Sample => sample(cfg),
        Command::Simulate => simulate_cmd(cfg),
        Command::Gap => gap(cfg),
        Command::Meta => meta(cfg),
    }
}

/// Maps `f` over `0..n` on `threads` workers; the result is in index order
/// whatever the thread count.
fn par_map<T: Send>(n: usize, threads: usize, f: impl Fn(usize) -> T + Sync) -> Vec<T> {
    let threads = threads.clamp(1, n.max(1));
    let mut out: Vec<Option<T>> = (0..n).map(|_| None).collect();
    std::thread::scope(|s| {
        let f = &f;
        let handles: Vec<_> = (0..threads)
            .map(|t| s.spawn(move || (t..n).step_by(threads).map(|i| (i, f(i))).collect::<Vec<_>>()))
            .collect();
        for h in handles {
            for (i, v) in h.join().expect("worker panicked") {
                out[i] = Some(v);
            }
        }
    });
    out.into_iter().map(|v| v.expect("every index mapped")).collect()
}

fn regime_name(r: Regime) -> &'static str {
    match r {
        Regime::FreeFast => "free_fast",
        Regime::FreeDoubleWell => "free_double_well",
        Regime::PinnedDoubleWell => "pinned_double_well",
        Regime::CriticalCurve => "critical",
    }
}

fn phase_name(p: PhaseLabel) -> &'static str {
    match p {
        PhaseLabel::Free => "free",
        PhaseLabel::Pinned => "pinned",
    }
}

fn statics(cfg: &ExperimentConfig) -> CliResult<Outcome> {
    let mut fe = Table::new(
        "free_energy",
        "Free energies per lambda at fixed a",
        &[
            ("lambda", "float", "wall attraction"),
            ("a", "float", "boundary height fraction"),
            ("free_energy", "float", "F(lambda), zero boundary, closed form"),
            ("free_energy_elevated", "float", "F(lambda, a), elevated boundary, closed form"),
            ("free_energy_numeric", "float", "F(lambda, a) by maximising the variational problem"),
            ("d_star", "float", "maximiser of the variational problem on [2a, 1]"),
            ("grid_step", "float", "spacing of the coarse maximisation grid"),
            ("d_lambda", "float", "slope d_lambda of the pinned profile; empty for lambda <= 2"),
            ("regime", "string", "free_fast, free_double_well, pinned_double_well or critical"),
        ],
    );
    for &lambda in &cfg.lambda {
        let p = free_energy_elevated(lambda, cfg.a)?;
        fe.push(vec![
            float(lambda),
            float(cfg.a),
            float(free_energy(lambda)),
            float(p.free_energy),
            float(p.free_energy_numeric),
            float(p.d_star),
            float(p.grid_step),
            opt_float((lambda > 2.0).then(|| d_lambda(lambda)).transpose()?),
            regime_name(p.regime).into(),
        ]);
    }

    let mut part = Table::new(
        "partition",
        "Log partition functions per (N, lambda); enumeration cross-check for small N",
        &[
            ("n", "integer", "system length N"),
            ("a", "float", "boundary height fraction"),
            ("lambda", "float", "wall attraction"),
            ("boundary", "integer", "endpoint height <aN>"),
            ("log_z_zero", "float", "log partition function with zero boundary"),
            ("log_z", "float", "log partition function with elevated boundary"),
            ("log_free", "float", "log partition function of paths without contact"),
            ("log_pinned", "float", "log partition function of paths with a contact"),
            ("pinned_fraction", "float", "Gibbs mass of paths with a contact"),
            ("pinned_by_flag", "bool", "log_pinned from the has-touched recursion"),
            ("rate", "float", "(1/N) log Z - log 2"),
            ("log_z_enumerated", "float", "log Z by summing over all paths; empty when N > enum_cap"),
            ("enumeration_error", "float", "|log_z - log_z_enumerated|; empty when N > enum_cap"),
        ],
    );
    for (n, lambda) in cfg.points() {
        let params = ModelParams::new(n, cfg.a, lambda)?;
        let z = partition_elevated(&params)?;
        let enumerated = if n <= cfg.enum_cap {
            let paths = enumerate_paths(&params, Ensemble::Elevated, cfg.enum_cap)?;
            Some(ln_sum(paths.iter().map(|p| p.contacts() as f64 * lambda.ln())))
        } else {
            None
        };
        part.push(vec![
            n.to_string(),
            float(cfg.a),
            float(lambda),
            params.boundary().to_string(),
            float(partition_zero(lambda, n)?),
            float(z.log_z),
            float(z.log_free),
            float(z.log_pinned),
            float(z.pinned_fraction()),
            z.pinned_by_flag.to_string(),
            float(z.log_z / n as f64 - std::f64::consts::LN_2),
            opt_float(enumerated),
            opt_float(enumerated.map(|e| (e - z.log_z).abs())),
        ]);
    }

    let mut profile = Table::new(
        "profile",
        "Reference scaling profile of the rescaled path, per lambda",
        &[
            ("lambda", "float", "wall attraction"),
            ("a", "float", "boundary height fraction"),
            ("x", "float", "rescaled position in [0, 1]"),
            ("height", "float", "limiting rescaled height"),
        ],
    );
    for &lambda in &cfg.lambda {
        for k in 0..=PROFILE_POINTS {
            let x = k as f64 / PROFILE_POINTS as f64;
            profile.push(vec![float(lambda), float(cfg.a), float(x), float(scaling_profile(cfg.a, lambda, x)?)]);
        }
    }
    Ok(Outcome { tables: vec![fe, part, profile], events: 0 })
}

fn phase(cfg: &ExperimentConfig) -> CliResult<Outcome> {
    let mut t = Table::new(
        "phase_diagram",
        "Double-well threshold and critical curve over the a grid",
        &[
            ("a", "float", "boundary height fraction"),
            ("double_well_threshold", "float", "2 / (1 - 2a)"),
            ("lambda_c", "float", "critical attraction lambda_c(a)"),
        ],
    );
    let rows = par_map(cfg.a_grid.len(), cfg.threads, |i| lambda_c(cfg.a_grid[i]));
    for (&a, lc) in cfg.a_grid.iter().zip(rows) {
        t.push(vec![float(a), float(double_well_threshold(a)), float(lc?)]);
    }
    Ok(Outcome { tables: vec![t], events: 0 })
}

fn sample(cfg: &ExperimentConfig) -> CliResult<Outcome> {
    let mut t = Table::new(
        "samples",
        "Exact Gibbs samples with their distance to the scaling profile",
        &[
            ("n", "integer", "system length N"),
            ("lambda", "float", "wall attraction"),
            ("replica", "integer", "sample index"),
            ("contacts", "integer", "number of zeros, endpoints included"),
            ("phase", "string", "free or pinned"),
            ("left_contact", "integer", "leftmost contact; empty when free"),
            ("right_contact", "integer", "rightmost contact; empty when free"),
            ("min_height", "integer", "lowest height"),
            ("sup_deviation", "float", "max_x |eta_x / N - profile(x / N)|"),
        ],
    );
    for (k, (n, lambda)) in cfg.points().into_iter().enumerate() {
        let params = ModelParams::new(n, cfg.a, lambda)?;
        let sampler = GibbsSampler::new(&params, Ensemble::Elevated)?;
        let profile: Vec<f64> =
            (0..=n).map(|x| scaling_profile(cfg.a, lambda, x as f64 / n as f64)).collect::<Result<_, _>>()?;
        let run = RUN_SAMPLE + 16 * k as u64;
        let rows = par_map(cfg.replicas, cfg.threads, |i| {
            let path = sampler.sample(&mut stream(cfg.seed, run, i as u64));
            let dev = sup_deviation(&path, |x| profile[(x * n as f64).round() as usize]);
            let (l, r) =
                path.contact_window().map_or((String::new(), String::new()), |(l, r)| (l.to_string(), r.to_string()));
            vec![
                n.to_string(),
                float(lambda),
                i.to_string(),
                path.contacts().to_string(),
                phase_name(path.phase()).into(),
                l,
                r,
                path.min_height().to_string(),
                float(dev),
            ]
        });
        rows.into_iter().for_each(|r| t.push(r));
    }
    Ok(Outcome { tables: vec![t], events: 0 })
}

fn simulate_cmd(cfg: &ExperimentConfig) -> CliResult<Outcome> {
    let mut traj = Table::new(
        "trajectory",
        "Heat-bath trajectories started from the Gibbs measure, observed on a regular time grid",
        &[
            ("n", "integer", "system length N"),
            ("lambda", "float", "wall attraction"),
            ("replica", "integer", "trajectory index"),
            ("time", "float", "observation time"),
            ("contacts", "integer", "number of zeros, endpoints included"),
            ("min_height", "integer", "lowest height"),
            ("phase", "string", "free or pinned"),
        ],
    );
    let mut summary = Table::new(
        "trajectory_summary",
        "Final state of each trajectory",
        &[
            ("n", "integer", "system length N"),
            ("lambda", "float", "wall attraction"),
            ("replica", "integer", "trajectory index"),
            ("events", "integer", "corner flips performed"),
            ("final_time", "float", "time reached"),
            ("final_contacts", "integer", "contacts at the final time"),
            ("final_phase", "string", "free or pinned"),
        ],
    );
    let opts = LogOptions { record_events: false, observe_every: Some(cfg.horizon / OBSERVATIONS), snapshots: false };
    let mut events = 0;
    for (k, (n, lambda)) in cfg.points().into_iter().enumerate() {
        let params = ModelParams::new(n, cfg.a, lambda)?;
        let sampler = GibbsSampler::new(&params, Ensemble::Elevated)?;
        let run = RUN_SIMULATE + 16 * k as u64;
        let logs = par_map(cfg.replicas, cfg.threads, |i| {
            let mut rng = stream(cfg.seed, run, i as u64);
            let start = sampler.sample(&mut rng);
            simulate(&start, lambda, cfg.horizon, opts, &mut rng)
        });
        for (i, log) in logs.into_iter().enumerate() {
            let log = log?;
            for o in &log.observations {
                traj.push(vec![
                    n.to_string(),
                    float(lambda),
                    i.to_string(),
                    float(o.time),
                    o.contacts.to_string(),
                    o.min_height.to_string(),
                    phase_name(o.phase).into(),
                ]);
            }
            summary.push(vec![
                n.to_string(),
                float(lambda),
                i.to_string(),
                log.event_count.to_string(),
                float(log.final_time),
                log.final_path.contacts().to_string(),
                phase_name(log.final_path.phase()).into(),
            ]);
            events += log.event_count;
        }
    }
    Ok(Outcome { tables: vec![traj, summary], events })
}

fn gap(cfg: &ExperimentConfig) -> CliResult<Outcome> {
    let mut t = Table::new(
        "gap",
        "Exact spectral gaps with the bottleneck and two-block decomposition bounds",
        &[
            ("n", "integer", "system length N"),
            ("a", "float", "boundary height fraction"),
            ("lambda", "float", "wall attraction"),
            ("regime", "string", "free_fast, free_double_well, pinned_double_well or critical"),
            ("states", "integer", "size of the state space"),
            ("transitions", "integer", "non-zero off-diagonal rates"),
            ("gap", "float", "spectral gap of the generator"),
            ("t_rel", "float", "relaxation time 1 / gap"),
            ("method", "string", "dense or lanczos"),
            ("residual", "float", "eigenpair residual norm"),
            (
                "bottleneck_ratio",
                "float",
                "Var(1_pinned) / E(1_pinned), a lower bound on t_rel; empty if one phase is empty",
            ),
            ("bottleneck_holds", "bool", "gap <= E(1_pinned) / Var(1_pinned)"),
            ("decomposition_bound", "float", "lower bound on the gap from the free/pinned split"),
            ("bar_gap", "float", "gap of the two-state projected chain"),
            ("gap_free", "float", "gap of the chain restricted to free paths"),
            ("gap_pinned", "float", "gap of the chain restricted to pinned paths"),
            ("gamma", "float", "largest rate at which a state leaves its block"),
            ("decomposition_holds", "bool", "gap >= decomposition_bound"),
            ("activation_energy", "float", "exponential growth rate of t_rel; empty outside the double-well region"),
        ],
    );
    let empty = || vec![String::new(); 8];
    for (n, lambda) in cfg.points() {
        let params = ModelParams::new(n, cfg.a, lambda)?;
        let g = build_generator(&params, Subset::All, cfg.state_cap)?;
        let report = spectral_gap(&g.chain)?;
        let pinned = g.indicator(|h| h.contains(&0));
        let split = if pinned.iter().all(|&p| p) || !pinned.contains(&true) {
            empty()
        } else {
            let ratio = bottleneck_ratio(&g.chain, &pinned)?;
            let labels: Vec<usize> = pinned.iter().map(|&p| usize::from(p)).collect();
            let d = decomposition_bound(&g.chain, &labels, 2)?;
            vec![
                float(ratio),
                (report.gap <= (1.0 + SLACK) / ratio).to_string(),
                float(d.bound),
                float(d.bar_gap),
                float(d.block_gaps[0]),
                float(d.block_gaps[1]),
                float(d.gamma),
                (report.gap >= d.bound * (1.0 - SLACK)).to_string(),
            ]
        };
        let mut row = vec![
            n.to_string(),
            float(cfg.a),
            float(lambda),
            regime_name(Regime::classify(cfg.a, lambda)?).into(),
            g.len().to_string(),
            g.chain.transitions().to_string(),
            float(report.gap),
            float(report.t_rel),
            match report.method {
                EigenMethod::Dense => "dense".into(),
                EigenMethod::Lanczos => "lanczos".into(),
            },
            float(report.residual),
        ];
        row.extend(split);
        row.push(opt_float(activation_energy(cfg.a, lambda).ok()));
        t.push(row);
    }
    Ok(Outcome { tables: vec![t], events: 0 })
}

fn meta(cfg: &ExperimentConfig) -> CliResult<Outcome> {
    let mut times = Table::new(
        "exit_times",
        "Exit times from the metastable well; censored replicas are omitted",
        &[
            ("n", "integer", "system length N"),
            ("lambda", "float", "wall attraction"),
            ("replica", "integer", "replica index"),
            ("time", "float", "first time the other well is entered"),
            ("rescaled", "float", "time divided by the rescaling constant"),
        ],
    );
    let mut summary = Table::new(
        "exit_summary",
        "Exit-time law per (N, lambda) against the unit exponential",
        &[
            ("n", "integer", "system length N"),
            ("a", "float", "boundary height fraction"),
            ("lambda", "float", "wall attraction"),
            ("start_well", "string", "metastable well: free or pinned"),
            ("replicas", "integer", "replicas run"),
            ("censored", "integer", "replicas that hit the time cap"),
            ("valid", "bool", "censored fraction at most 1%"),
            ("rescale", "float", "constant dividing the exit times"),
            ("rescale_kind", "string", "exact_relaxation, empirical_mean or given"),
            ("mean", "float", "mean exit time"),
            ("ks_statistic", "float", "Kolmogorov-Smirnov distance of the rescaled times to Exp(1)"),
            ("ks_p_value", "float", "asymptotic p-value of the KS statistic"),
            ("survival_0_5", "float", "fraction of rescaled times above 0.5"),
            ("survival_1", "float", "fraction of rescaled times above 1"),
            ("survival_2", "float", "fraction of rescaled times above 2"),
        ],
    );
    let mut events = 0;
    for (k, (n, lambda)) in cfg.points().into_iter().enumerate() {
        let params = ModelParams::new(n, cfg.a, lambda)?;
        let opts = ExitOptions {
            replicas: cfg.replicas,
            seed: cfg.seed,
            run: RUN_META + 16 * k as u64,
            t_cap: cfg.t_cap,
            threads: cfg.threads,
            rescale: Rescale::ExactWithin(cfg.state_cap),
        };
        let s = exit_experiment(&params, &opts)?;
        debug_assert_eq!(s.start_well, metastable_well(cfg.a, lambda)?);
        for ((&r, &x), y) in s.replica.iter().zip(&s.times).zip(s.rescaled()) {
            times.push(vec![n.to_string(), float(lambda), r.to_string(), float(x), float(y)]);
        }
        let ks = s.ks();
        let surv = s.survival_at(&SURVIVAL_TIMES);
        summary.push(vec![
            n.to_string(),
            float(cfg.a),
            float(lambda),
            phase_name(s.start_well).into(),
            s.total().to_string(),
            s.censored.to_string(),
            s.valid().to_string(),
            float(s.rescale),
            match s.rescale_kind {
                RescaleKind::ExactRelaxation => "exact_relaxation",
                RescaleKind::EmpiricalMean => "empirical_mean",
                RescaleKind::Given => "given",
            }
            .into(),
            float(s.mean()),
            float(ks.statistic),
            float(ks.p_value),
            float(surv[0]),
            float(surv[1]),
            float(surv[2]),
        ]);
        events += s.events;
    }
    Ok(Outcome { tables: vec![times, summary], events })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn par_map_keeps_order() {
        for threads in [1, 3, 8] {
            assert_eq!(par_map(10, threads, |i| i * i), (0..10).map(|i| i * i).collect::<Vec<_>>());
        }
        assert!(par_map(0, 4, |i| i).is_empty());
    }

    #[test]
    fn statics_tables_agree_with_enumeration() {
        let cfg = ExperimentConfig { n: vec![8, 12], lambda: vec![0.5, 3.0, 8.0], ..Default::default() };
        let out = statics(&cfg).unwrap();
        let part = &out.tables[1];
        assert_eq!(part.rows.len(), 6);
        for row in &part.rows {
            assert!(row[12].parse::<f64>().unwrap() < 1e-10);
        }
        assert_eq!(out.tables[2].rows.len(), 3 * (PROFILE_POINTS + 1));
    }

    #[test]
    fn free_energy_table_matches_closed_form() {
        let cfg = ExperimentConfig { lambda: (1..=20).map(f64::from).collect(), ..Default::default() };
        let out = statics(&cfg).unwrap();
        for row in &out.tables[0].rows {
            let closed: f64 = row[3].parse().unwrap();
            let numeric: f64 = row[4].parse().unwrap();
            assert!((closed - numeric).abs() < 1e-8, "{row:?}");
        }
    }

    #[test]
    fn gap_rows_carry_bounds() {
        let cfg = ExperimentConfig { command: Command::Gap, n: vec![10], lambda: vec![2.0, 8.0], ..Default::default() };
        let out = gap(&cfg).unwrap();
        for row in &out.tables[0].rows {
            assert_eq!(row[11], "true");
            assert_eq!(row[17], "true");
        }
    }
}
