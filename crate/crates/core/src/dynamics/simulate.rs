//! Event-driven simulation of the corner-flip chain.

use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::fenwick::Fenwick;
use crate::dynamics::rates::{rate_kind, RateKind};
use crate::error::{Error, Result};
use crate::model::{Path, PhaseLabel};
use crate::rng::open_unit;

/// Subset to which a restricted chain is confined; flips leaving it are
/// cancelled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Constraint {
    None,
    /// No contact ever.
    Free,
    /// At least one contact.
    Pinned,
    /// Leftmost contact at `l` and rightmost at `r`.
    Window {
        l: usize,
        r: usize,
    },
}

impl Constraint {
    pub fn admits(&self, path: &Path) -> bool {
        match *self {
            Constraint::None => true,
            Constraint::Free => path.phase() == PhaseLabel::Free,
            Constraint::Pinned => path.phase() == PhaseLabel::Pinned,
            Constraint::Window { l, r } => path.contact_window() == Some((l, r)),
        }
    }
}

/// Mutable state of one heat-bath run.
#[derive(Clone, Debug)]
pub struct HeatBath {
    heights: Vec<i32>,
    lambda: f64,
    constraint: Constraint,
    contacts: usize,
    tree: Fenwick,
    time: f64,
    events: u64,
}

impl HeatBath {
    pub fn new(eta0: &Path, lambda: f64, constraint: Constraint) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::invalid(format!("lambda = {lambda}: must be > 0")));
        }
        if !constraint.admits(eta0) {
            return Err(Error::invalid(format!("initial path violates the constraint {constraint:?}")));
        }
        let heights = eta0.heights().to_vec();
        let mut bath = Self {
            contacts: eta0.contacts(),
            tree: Fenwick::new(vec![0.0; heights.len()]),
            heights,
            lambda,
            constraint,
            time: 0.0,
            events: 0,
        };
        let values: Vec<f64> = (0..bath.heights.len()).map(|x| bath.site_rate(x)).collect();
        bath.tree = Fenwick::new(values);
        Ok(bath)
    }

    /// Rate at `x` after cancelling flips that leave the constraint set.
    pub fn site_rate(&self, x: usize) -> f64 {
        let kind = rate_kind(&self.heights, x);
        let allowed = match (self.constraint, kind) {
            (Constraint::Free, RateKind::Pin) => false,
            (Constraint::Pinned, RateKind::Unpin) => self.contacts > 1,
            (Constraint::Window { l, r }, RateKind::Pin) => x > l && x < r,
            (Constraint::Window { l, r }, RateKind::Unpin) => x != l && x != r,
            _ => true,
        };
        if allowed {
            kind.value(self.lambda)
        } else {
            0.0
        }
    }

    pub fn total_rate(&self) -> f64 {
        self.tree.total()
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn events(&self) -> u64 {
        self.events
    }

    pub fn heights(&self) -> &[i32] {
        &self.heights
    }

    pub fn path(&self) -> Path {
        Path::from_heights_unchecked(self.heights.clone())
    }

    pub fn contacts(&self) -> usize {
        self.contacts
    }

    pub fn phase(&self) -> PhaseLabel {
        if self.contacts > 0 {
            PhaseLabel::Pinned
        } else {
            PhaseLabel::Free
        }
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Flip site `x` and refresh the rates that depend on it.
    fn apply(&mut self, x: usize) {
        let kind = rate_kind(&self.heights, x);
        self.heights[x] = self.heights[x - 1] + self.heights[x + 1] - self.heights[x];
        self.contacts = (self.contacts as i64 + kind.contact_change() as i64) as usize;
        let n = self.heights.len() - 1;
        if self.constraint == Constraint::Pinned && matches!(kind, RateKind::Pin | RateKind::Unpin) {
            // the last-contact rule couples every contact site
            for y in (2..n).step_by(2) {
                if self.heights[y] == 0 {
                    self.tree.set(y, self.site_rate(y));
                }
            }
        }
        for y in x.saturating_sub(1)..=(x + 1).min(n) {
            self.tree.set(y, self.site_rate(y));
        }
    }

    /// Advance by one event; `None` when the total rate vanishes.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Option<(f64, usize)> {
        let total = self.tree.total();
        if total <= 0.0 {
            return None;
        }
        self.time += -open_unit(rng).ln() / total;
        let x = self.tree.find(rng.random::<f64>() * total);
        self.apply(x);
        self.events += 1;
        Some((self.time, x))
    }

    /// Rates recomputed from scratch, for consistency checks.
    pub fn rates_from_scratch(&self) -> Vec<f64> {
        (0..self.heights.len()).map(|x| self.site_rate(x)).collect()
    }

    pub fn stored_rate(&self, x: usize) -> f64 {
        self.tree.get(x)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: f64,
    pub site: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub time: f64,
    pub contacts: usize,
    pub min_height: i32,
    pub phase: PhaseLabel,
    pub snapshot: Option<Vec<i32>>,
}

impl Observation {
    fn of(bath: &HeatBath, time: f64, snapshot: bool) -> Self {
        Self {
            time,
            contacts: bath.contacts,
            min_height: *bath.heights.iter().min().expect("non-empty"),
            phase: bath.phase(),
            snapshot: snapshot.then(|| bath.heights.clone()),
        }
    }
}

/// What a run records.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogOptions {
    pub record_events: bool,
    /// Observe at multiples of this interval (and at time 0).
    pub observe_every: Option<f64>,
    pub snapshots: bool,
}

impl Default for LogOptions {
    fn default() -> Self {
        Self { record_events: true, observe_every: None, snapshots: false }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    Horizon,
    Predicate,
    Absorbed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryLog {
    pub initial: Path,
    pub lambda: f64,
    pub constraint: Constraint,
    pub events: Vec<Event>,
    pub observations: Vec<Observation>,
    pub final_path: Path,
    pub final_time: f64,
    pub event_count: u64,
    pub stop: StopReason,
}

impl TrajectoryLog {
    /// Replays the recorded events; fails if a flip is inadmissible or times
    /// are not strictly increasing.
    pub fn replay(&self) -> Result<Path> {
        let mut path = self.initial.clone();
        let mut last = 0.0;
        for e in &self.events {
            if e.time <= last {
                return Err(Error::Numerical(format!("event times not increasing at t = {}", e.time)));
            }
            last = e.time;
            path = path.flip(e.site)?;
        }
        Ok(path)
    }

    /// Line-delimited records: `event,<time>,<site>` and
    /// `obs,<time>,<contacts>,<min height>,<phase>`.
    pub fn to_lines(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            let _ = writeln!(out, "event,{:.16e},{}", e.time, e.site);
        }
        for o in &self.observations {
            let _ = writeln!(out, "obs,{:.16e},{},{},{:?}", o.time, o.contacts, o.min_height, o.phase);
        }
        out
    }
}

/// Run until `horizon` or until `stop` holds after an event.
pub fn simulate_until<R: Rng + ?Sized>(
    bath: &mut HeatBath,
    horizon: f64,
    options: LogOptions,
    mut stop: impl FnMut(&HeatBath) -> bool,
    rng: &mut R,
) -> Result<TrajectoryLog> {
    if !(horizon > 0.0) {
        return Err(Error::invalid(format!("horizon = {horizon}: must be > 0")));
    }
    let initial = bath.path();
    let start = bath.time;
    let mut events = Vec::new();
    let mut observations = Vec::new();
    let mut next_obs = options.observe_every.map(|_| start);
    let reason = loop {
        if stop(bath) {
            break StopReason::Predicate;
        }
        let total = bath.total_rate();
        if total <= 0.0 {
            return Err(Error::Numerical("total rate vanished: absorbing state".into()));
        }
        let next_time = bath.time + -open_unit(rng).ln() / total;
        // the state is constant on [bath.time, next_time)
        while let (Some(t), Some(dt)) = (next_obs, options.observe_every) {
            if t >= next_time || t > start + horizon {
                break;
            }
            observations.push(Observation::of(bath, t, options.snapshots));
            next_obs = Some(t + dt);
        }
        if next_time > start + horizon {
            bath.time = start + horizon;
            break StopReason::Horizon;
        }
        let x = bath.tree.find(rng.random::<f64>() * total);
        bath.time = next_time;
        bath.apply(x);
        bath.events += 1;
        if options.record_events {
            events.push(Event { time: next_time - start, site: x });
        }
    };
    let event_count = bath.events;
    Ok(TrajectoryLog {
        initial,
        lambda: bath.lambda,
        constraint: bath.constraint,
        events,
        observations,
        final_path: bath.path(),
        final_time: bath.time - start,
        event_count,
        stop: reason,
    })
}

pub fn simulate<R: Rng + ?Sized>(
    eta0: &Path,
    lambda: f64,
    horizon: f64,
    options: LogOptions,
    rng: &mut R,
) -> Result<TrajectoryLog> {
    let mut bath = HeatBath::new(eta0, lambda, Constraint::None)?;
    simulate_until(&mut bath, horizon, options, |_| false, rng)
}

pub fn simulate_restricted<R: Rng + ?Sized>(
    eta0: &Path,
    lambda: f64,
    subset: Constraint,
    horizon: f64,
    options: LogOptions,
    rng: &mut R,
) -> Result<TrajectoryLog> {
    let mut bath = HeatBath::new(eta0, lambda, subset)?;
    simulate_until(&mut bath, horizon, options, |_| false, rng)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum HitResult {
    Hit(f64),
    Timeout(f64),
}

impl HitResult {
    pub fn time(&self) -> Option<f64> {
        match *self {
            HitResult::Hit(t) => Some(t),
            HitResult::Timeout(_) => None,
        }
    }
}

/// First time the unrestricted chain from `eta0` satisfies `target`.
pub fn hitting_time<R: Rng + ?Sized>(
    eta0: &Path,
    lambda: f64,
    target: impl Fn(&HeatBath) -> bool,
    rng: &mut R,
    t_cap: f64,
) -> Result<HitResult> {
    if !(t_cap > 0.0) {
        return Err(Error::invalid(format!("t_cap = {t_cap}: must be > 0")));
    }
    let mut bath = HeatBath::new(eta0, lambda, Constraint::None)?;
    run_to_target(&mut bath, &target, rng, t_cap)
}

/// Continue `bath` until `target` holds or `t_cap` elapses.
pub fn run_to_target<R: Rng + ?Sized>(
    bath: &mut HeatBath,
    target: &impl Fn(&HeatBath) -> bool,
    rng: &mut R,
    t_cap: f64,
) -> Result<HitResult> {
    let start = bath.time;
    loop {
        if target(bath) {
            return Ok(HitResult::Hit(bath.time - start));
        }
        let total = bath.total_rate();
        if total <= 0.0 {
            return Err(Error::Numerical("total rate vanished: absorbing state".into()));
        }
        let next = bath.time + -open_unit(rng).ln() / total;
        if next - start > t_cap {
            bath.time = start + t_cap;
            return Ok(HitResult::Timeout(t_cap));
        }
        let x = bath.tree.find(rng.random::<f64>() * total);
        bath.time = next;
        bath.apply(x);
        bath.events += 1;
    }
}

/// Probability that the heat bath at a corner over neighbours at `m` puts
/// the site above them.
fn p_up(m: i32, lambda: f64) -> f64 {
    match m {
        0 => 1.0,
        1 => 1.0 / (1.0 + lambda),
        _ => 0.5,
    }
}

/// Two paths driven by the same clocks and uniforms (graphical
/// construction); order is preserved.
#[derive(Clone, Debug)]
pub struct CoupledPair {
    pub lower: Vec<i32>,
    pub upper: Vec<i32>,
    lambda: f64,
    pub time: f64,
}

impl CoupledPair {
    pub fn new(lower: &Path, upper: &Path, lambda: f64) -> Result<Self> {
        if lower.len() != upper.len()
            || lower.heights()[0] != upper.heights()[0]
            || lower.heights().last() != upper.heights().last()
        {
            return Err(Error::invalid("coupled paths need equal length and boundary"));
        }
        Ok(Self { lower: lower.heights().to_vec(), upper: upper.heights().to_vec(), lambda, time: 0.0 })
    }

    fn update(h: &mut [i32], x: usize, u: f64, lambda: f64) {
        let m = h[x - 1];
        if h[x + 1] == m {
            h[x] = if u < p_up(m, lambda) { m + 1 } else { m - 1 };
        }
    }

    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let n = self.lower.len() - 1;
        self.time += -open_unit(rng).ln() / (n - 1) as f64;
        let x = rng.random_range(1..n);
        let u = rng.random::<f64>();
        Self::update(&mut self.lower, x, u, self.lambda);
        Self::update(&mut self.upper, x, u, self.lambda);
    }

    pub fn ordered(&self) -> bool {
        self.lower.iter().zip(&self.upper).all(|(a, b)| a <= b)
    }
}

/// Hitting times of the pinned set for both members of a coupled pair.
pub fn coupled_pinning_times<R: Rng + ?Sized>(
    lower: &Path,
    upper: &Path,
    lambda: f64,
    rng: &mut R,
    t_cap: f64,
) -> Result<(HitResult, HitResult)> {
    let mut pair = CoupledPair::new(lower, upper, lambda)?;
    let touched = |h: &[i32]| h.contains(&0);
    let (mut lo, mut hi) = (None, None);
    while pair.time <= t_cap {
        if lo.is_none() && touched(&pair.lower) {
            lo = Some(pair.time);
        }
        if hi.is_none() && touched(&pair.upper) {
            hi = Some(pair.time);
        }
        if lo.is_some() && hi.is_some() {
            break;
        }
        pair.step(rng);
    }
    let wrap = |t: Option<f64>| t.map_or(HitResult::Timeout(t_cap), HitResult::Hit);
    Ok((wrap(lo), wrap(hi)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{enumerate_paths, Ensemble, ModelParams};
    use crate::rng::stream;
    use std::collections::HashMap;

    #[test]
    fn incremental_rates_match_scratch() {
        let mut rng = stream(1, 0, 0);
        for constraint in [Constraint::None, Constraint::Free, Constraint::Pinned] {
            let p = ModelParams::new(30, 0.2, 3.0).unwrap();
            let start = match constraint {
                Constraint::Pinned => Path::lowest(30, 6, 6).unwrap(),
                _ => Path::flat(30, 6).unwrap(),
            };
            let mut bath = HeatBath::new(&start, p.lambda(), constraint).unwrap();
            for _ in 0..35_000 {
                bath.step(&mut rng).unwrap();
                assert!(constraint.admits(&bath.path()));
                let scratch = bath.rates_from_scratch();
                for (x, r) in scratch.iter().enumerate() {
                    assert_eq!(*r, bath.stored_rate(x));
                }
                assert_eq!(bath.contacts(), bath.path().contacts());
            }
        }
    }

    #[test]
    fn window_constraint_keeps_window() {
        let mut rng = stream(2, 0, 0);
        let start = Path::new(vec![4, 3, 2, 1, 0, 1, 0, 1, 0, 1, 2, 3, 4, 5, 4, 3, 2, 1, 0, 1, 2, 3, 4]).unwrap();
        let (l, r) = start.contact_window().unwrap();
        let log = simulate_restricted(&start, 5.0, Constraint::Window { l, r }, 500.0, LogOptions::default(), &mut rng)
            .unwrap();
        let mut path = start.clone();
        for e in &log.events {
            path = path.flip(e.site).unwrap();
            assert_eq!(path.contact_window(), Some((l, r)));
        }
    }

    #[test]
    fn log_replays_and_has_increasing_times() {
        let mut rng = stream(3, 0, 0);
        let start = Path::flat(20, 4).unwrap();
        let opts = LogOptions { record_events: true, observe_every: Some(1.0), snapshots: true };
        let log = simulate(&start, 3.0, 50.0, opts, &mut rng).unwrap();
        assert_eq!(log.replay().unwrap(), log.final_path);
        assert_eq!(log.stop, StopReason::Horizon);
        assert_eq!(log.observations.len(), 51);
        assert!(log.observations.windows(2).all(|w| w[1].time > w[0].time));
        assert!(log.to_lines().lines().count() >= log.events.len() + 51);
        assert!(log.final_time == 50.0);
    }

    #[test]
    fn stationary_histogram_matches_gibbs() {
        // long run, sampled at unit spacing
        let p = ModelParams::new(10, 0.2, 3.0).unwrap();
        let paths = enumerate_paths(&p, Ensemble::Elevated, 24).unwrap();
        let z: f64 = paths.iter().map(|q| 3f64.powi(q.contacts() as i32)).sum();
        let law: HashMap<Path, f64> = paths.iter().map(|q| (q.clone(), 3f64.powi(q.contacts() as i32) / z)).collect();
        let mut rng = stream(4, 0, 0);
        let mut bath = HeatBath::new(&Path::flat(10, 2).unwrap(), 3.0, Constraint::None).unwrap();
        let opts = LogOptions { record_events: false, observe_every: Some(2.0), snapshots: true };
        let log = simulate_until(&mut bath, 200_000.0, opts, |_| false, &mut rng).unwrap();
        let mut counts: HashMap<Path, usize> = HashMap::new();
        for o in log.observations.iter().skip(50) {
            *counts.entry(Path::new(o.snapshot.clone().unwrap()).unwrap()).or_default() += 1;
        }
        assert!(crate::stats::total_variation(&counts, &law) < 0.02);
    }

    #[test]
    fn hitting_examples() {
        let mut rng = stream(5, 0, 0);
        let pinned = Path::lowest(20, 4, 4).unwrap();
        let hit = hitting_time(&pinned, 3.0, |b| b.contacts() > 0, &mut rng, 10.0).unwrap();
        assert_eq!(hit, HitResult::Hit(0.0));
        let flat = Path::flat(20, 4).unwrap();
        let times: Vec<f64> = (0..200)
            .map(|_| hitting_time(&flat, 3.0, |b| b.contacts() > 0, &mut rng, 1e6).unwrap().time().unwrap())
            .collect();
        assert!(crate::stats::quantile(&times, 0.5).is_finite());
        let capped = hitting_time(&flat, 3.0, |_| false, &mut rng, 5.0).unwrap();
        assert_eq!(capped, HitResult::Timeout(5.0));
    }

    #[test]
    fn coupling_preserves_order() {
        let mut rng = stream(6, 0, 0);
        let lower = Path::lowest(20, 4, 4).unwrap();
        let upper = Path::flat(20, 4).unwrap();
        let mut pair = CoupledPair::new(&lower, &upper, 4.0).unwrap();
        for _ in 0..100_000 {
            pair.step(&mut rng);
            assert!(pair.ordered());
        }
        let top = Path::new((0..=20).map(|x: i32| 4 + x.min(20 - x)).collect()).unwrap();
        for _ in 0..50 {
            let (lo, hi) = coupled_pinning_times(&upper, &top, 4.0, &mut rng, 1e6).unwrap();
            assert!(hi.time().unwrap() >= lo.time().unwrap());
        }
    }
}
