//! Exit times from the metastable well and the indicator process.

use serde::{Deserialize, Serialize};

use crate::dynamics::simulate::{run_to_target, Constraint, HeatBath, HitResult};
use crate::error::{Error, Result};
use crate::metastability::wells::{metastable_well, MetastableStart};
use crate::model::{ModelParams, PhaseLabel};
use crate::rng::stream;
use crate::spectral::chain::build_generator;
use crate::spectral::eigen::spectral_gap;
use crate::spectral::state::{Subset, DEFAULT_STATE_CAP};
use crate::stats::{ks_exponential, mean, survival, KsResult};

/// Adaptive caps are this multiple of the running mean exit time.
pub const CAP_FACTOR: f64 = 50.0;
/// Largest censored fraction of a valid experiment.
pub const MAX_CENSORED: f64 = 0.01;
/// Replicas sharing one adaptive cap; fixed so that results do not depend
/// on the thread count.
const BATCH: usize = 32;
/// Cap of the first batch, before any exit time is known.
const FIRST_CAP: f64 = 1e12;

/// Constant dividing the raw exit times.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Rescale {
    Mean,
    Given(f64),
    /// Exact relaxation time when the state space has at most this many
    /// states, the empirical mean otherwise.
    ExactWithin(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RescaleKind {
    ExactRelaxation,
    EmpiricalMean,
    Given,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExitOptions {
    pub replicas: usize,
    pub seed: u64,
    pub run: u64,
    /// Fixed cap per replica; `None` for the adaptive cap.
    pub t_cap: Option<f64>,
    pub threads: usize,
    pub rescale: Rescale,
}

impl Default for ExitOptions {
    fn default() -> Self {
        Self {
            replicas: 500,
            seed: 0,
            run: 0,
            t_cap: None,
            threads: 1,
            rescale: Rescale::ExactWithin(DEFAULT_STATE_CAP),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExitTimeSample {
    pub params: ModelParams,
    pub start_well: PhaseLabel,
    /// Uncensored exit times in replica order.
    pub times: Vec<f64>,
    /// Replica index of each entry of `times`.
    pub replica: Vec<usize>,
    pub censored: usize,
    pub rescale: f64,
    pub rescale_kind: RescaleKind,
    pub seed: u64,
    pub run: u64,
    pub events: u64,
}

impl ExitTimeSample {
    pub fn total(&self) -> usize {
        self.times.len() + self.censored
    }

    pub fn censored_fraction(&self) -> f64 {
        self.censored as f64 / self.total() as f64
    }

    pub fn valid(&self) -> bool {
        self.censored_fraction() <= MAX_CENSORED
    }

    pub fn mean(&self) -> f64 {
        mean(&self.times)
    }

    pub fn rescaled(&self) -> Vec<f64> {
        self.times.iter().map(|t| t / self.rescale).collect()
    }

    pub fn ks(&self) -> KsResult {
        ks_exponential(&self.rescaled())
    }

    /// Empirical survival of the rescaled times at each `t`.
    pub fn survival_at(&self, ts: &[f64]) -> Vec<f64> {
        let r = self.rescaled();
        ts.iter().map(|&t| survival(&r, t)).collect()
    }
}

/// Exit-time target: the process has entered the other well.
fn left(well: PhaseLabel) -> fn(&HeatBath) -> bool {
    match well {
        PhaseLabel::Free => |b| b.contacts() > 0,
        PhaseLabel::Pinned => |b| b.contacts() == 0,
    }
}

/// Exact relaxation time of the full chain.
pub fn exact_relaxation_time(params: &ModelParams, state_cap: usize) -> Result<f64> {
    let g = build_generator(params, Subset::All, state_cap)?;
    Ok(spectral_gap(&g.chain)?.t_rel)
}

struct Replica {
    time: Option<f64>,
    events: u64,
}

fn run_replica(
    params: &ModelParams,
    start: &MetastableStart,
    opts: &ExitOptions,
    i: usize,
    cap: f64,
) -> Result<Replica> {
    let mut rng = stream(opts.seed, opts.run, i as u64);
    let eta0 = start.sample(&mut rng);
    let mut bath = HeatBath::new(&eta0, params.lambda(), Constraint::None)?;
    let target = left(start.well());
    let mut time = None;
    let mut elapsed = 0.0;
    // the cap is extended once before the replica counts as censored
    for _ in 0..2 {
        match run_to_target(&mut bath, &target, &mut rng, cap)? {
            HitResult::Hit(t) => {
                time = Some(elapsed + t);
                break;
            }
            HitResult::Timeout(t) => elapsed += t,
        }
    }
    Ok(Replica { time, events: bath.events() })
}

/// Runs `f(i)` for every `i` in `range` on up to `threads` threads, keeping
/// the output in index order.
pub(crate) fn parallel_map<T: Send>(
    range: std::ops::Range<usize>,
    threads: usize,
    f: impl Fn(usize) -> T + Sync,
) -> Vec<T> {
    let threads = threads.max(1).min(range.len().max(1));
    if threads == 1 {
        return range.map(f).collect();
    }
    let indices: Vec<usize> = range.collect();
    let chunk = indices.len().div_ceil(threads);
    std::thread::scope(|s| {
        let handles: Vec<_> =
            indices.chunks(chunk).map(|c| s.spawn(|| c.iter().map(|&i| f(i)).collect::<Vec<T>>())).collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
    })
}

/// Exit times from the metastable well of `params`, each replica started
/// from `pi` conditioned on that well and run without restriction until it
/// enters the other well.
pub fn exit_experiment(params: &ModelParams, opts: &ExitOptions) -> Result<ExitTimeSample> {
    if opts.replicas == 0 {
        return Err(Error::invalid("at least one replica"));
    }
    if let Some(c) = opts.t_cap {
        if !(c > 0.0) {
            return Err(Error::invalid(format!("t_cap = {c}: must be > 0")));
        }
    }
    let well = metastable_well(params.a(), params.lambda())?;
    let start = MetastableStart::new(params, well)?;
    let mut times = Vec::new();
    let mut replica = Vec::new();
    let mut censored = 0;
    let mut events = 0;
    for batch_start in (0..opts.replicas).step_by(BATCH) {
        let cap = opts.t_cap.unwrap_or(if times.is_empty() { FIRST_CAP } else { CAP_FACTOR * mean(&times) });
        let end = (batch_start + BATCH).min(opts.replicas);
        let results = parallel_map(batch_start..end, opts.threads, |i| run_replica(params, &start, opts, i, cap));
        for (k, r) in results.into_iter().enumerate() {
            let r = r?;
            events += r.events;
            match r.time {
                Some(t) => {
                    times.push(t);
                    replica.push(batch_start + k);
                }
                None => censored += 1,
            }
        }
    }
    if times.is_empty() {
        return Err(Error::Convergence("every replica was censored".into()));
    }
    let (rescale, rescale_kind) = match opts.rescale {
        Rescale::Mean => (mean(&times), RescaleKind::EmpiricalMean),
        Rescale::Given(c) => (c, RescaleKind::Given),
        Rescale::ExactWithin(cap) => match exact_relaxation_time(params, cap) {
            Ok(t) => (t, RescaleKind::ExactRelaxation),
            Err(Error::CapExceeded { .. }) => (mean(&times), RescaleKind::EmpiricalMean),
            Err(e) => return Err(e),
        },
    };
    Ok(ExitTimeSample {
        params: *params,
        start_well: well,
        times,
        replica,
        censored,
        rescale,
        rescale_kind,
        seed: opts.seed,
        run: opts.run,
        events,
    })
}

/// `P(T > s + t | T > s)` against `P(T > t)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemoryProbe {
    pub s: f64,
    pub t: f64,
    pub conditional: f64,
    pub marginal: f64,
    /// Standard error of the difference, from binomial variances.
    pub std_err: f64,
}

pub fn memorylessness(xs: &[f64], grid: &[(f64, f64)]) -> Vec<MemoryProbe> {
    let n = xs.len() as f64;
    grid.iter()
        .map(|&(s, t)| {
            let beyond_s = xs.iter().filter(|&&x| x > s).count() as f64;
            let beyond = xs.iter().filter(|&&x| x > s + t).count() as f64;
            let conditional = if beyond_s > 0.0 { beyond / beyond_s } else { f64::NAN };
            let marginal = survival(xs, t);
            let std_err = (conditional * (1.0 - conditional) / beyond_s + marginal * (1.0 - marginal) / n).sqrt();
            MemoryProbe { s, t, conditional, marginal, std_err }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoStateTrace {
    pub start_well: PhaseLabel,
    /// Observation times in units of `rescale`.
    pub grid: Vec<f64>,
    pub rescale: f64,
    /// `1_{E_1}` at each grid time, one row per replica.
    pub indicators: Vec<Vec<bool>>,
    /// Returns to `E_1` after the first exit, per replica, up to the last
    /// grid time.
    pub returns: Vec<usize>,
    /// First exit time in units of `rescale`, if before the last grid time.
    pub first_exit: Vec<Option<f64>>,
}

impl TwoStateTrace {
    /// Fraction of replicas in `E_1` at grid time `k`.
    pub fn marginal(&self, k: usize) -> f64 {
        self.indicators.iter().filter(|row| row[k]).count() as f64 / self.indicators.len() as f64
    }

    /// Fraction of replicas in `E_1` at both grid times.
    pub fn pair(&self, j: usize, k: usize) -> f64 {
        self.indicators.iter().filter(|row| row[j] && row[k]).count() as f64 / self.indicators.len() as f64
    }

    /// Fraction of replicas that came back to `E_1` at least once.
    pub fn return_frequency(&self) -> f64 {
        self.returns.iter().filter(|&&r| r > 0).count() as f64 / self.returns.len() as f64
    }
}

/// Records `1_{E_1}(X_{t rescale})` on a grid of rescaled times.
pub fn two_state_trace(params: &ModelParams, grid: &[f64], rescale: f64, opts: &ExitOptions) -> Result<TwoStateTrace> {
    if grid.is_empty() || grid.windows(2).any(|w| w[1] <= w[0]) || grid[0] < 0.0 {
        return Err(Error::invalid("observation grid must be non-empty, non-negative and increasing"));
    }
    if !(rescale > 0.0) {
        return Err(Error::invalid("rescaling constant must be > 0"));
    }
    let well = metastable_well(params.a(), params.lambda())?;
    let start = MetastableStart::new(params, well)?;
    let rows = parallel_map(0..opts.replicas, opts.threads, |i| -> Result<(Vec<bool>, usize, Option<f64>)> {
        let mut rng = stream(opts.seed, opts.run, i as u64);
        let mut bath = HeatBath::new(&start.sample(&mut rng), params.lambda(), Constraint::None)?;
        let mut row = Vec::with_capacity(grid.len());
        let (mut returns, mut first_exit) = (0, None);
        // indicator before the pending jump, which is already applied to `bath`
        let mut state = true;
        let mut pending: Option<(f64, bool)> = None;
        for &t in grid {
            let until = t * rescale;
            loop {
                if let Some((tj, next)) = pending {
                    if tj > until {
                        break;
                    }
                    if state && !next && first_exit.is_none() {
                        first_exit = Some(tj / rescale);
                    } else if !state && next {
                        returns += 1;
                    }
                    state = next;
                }
                pending = match bath.step(&mut rng) {
                    Some((tj, _)) => Some((tj, bath.phase() == well)),
                    None => break,
                };
            }
            row.push(state);
        }
        Ok((row, returns, first_exit))
    });
    let mut indicators = Vec::with_capacity(rows.len());
    let mut returns = Vec::with_capacity(rows.len());
    let mut first_exit = Vec::with_capacity(rows.len());
    for r in rows {
        let (row, k, e) = r?;
        indicators.push(row);
        returns.push(k);
        first_exit.push(e);
    }
    Ok(TwoStateTrace { start_well: well, grid: grid.to_vec(), rescale, indicators, returns, first_exit })
}
