//! Log-domain transfer-matrix sums over non-negative paths.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Ensemble, ModelParams, Path};
use crate::numeric::{ln_add, ln_sub};

/// Below this pinned fraction the subtraction `Z - Zfree` loses too many
/// digits and the pinned sum is recomputed with the has-touched flag.
pub const SUBTRACTION_GUARD: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Restriction {
    /// Every non-negative path.
    All,
    /// Paths that stay at height >= 1.
    Free,
    /// Paths with at least one contact.
    Pinned,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    /// `log W(x, h)`: weight of prefixes `eta_0..eta_x` ending at `h`.
    Forward,
    /// `log W(x, h)`: weight of suffixes `eta_x..eta_N` starting at `h`.
    Backward,
}

/// Boundary heights, length, contact weight and restriction of a path sum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathSpec {
    pub n: usize,
    pub start: i32,
    pub end: i32,
    pub lambda: f64,
    pub restriction: Restriction,
}

impl PathSpec {
    pub fn zero(n: usize, lambda: f64) -> Self {
        Self { n, start: 0, end: 0, lambda, restriction: Restriction::All }
    }

    pub fn from_params(params: &ModelParams, ensemble: Ensemble) -> Self {
        let b = params.endpoint(ensemble);
        let restriction = match ensemble {
            Ensemble::Zero | Ensemble::Elevated => Restriction::All,
            Ensemble::ElevatedFree => Restriction::Free,
            Ensemble::ElevatedPinned => Restriction::Pinned,
        };
        Self { n: params.n(), start: b, end: b, lambda: params.lambda(), restriction }
    }

    /// Highest height reachable by a path from `start` to `end`.
    pub fn h_max(&self) -> usize {
        ((self.start + self.end) as usize + self.n) / 2
    }

    fn floor(&self) -> i32 {
        if self.restriction == Restriction::Free {
            1
        } else {
            0
        }
    }

    fn layers(&self) -> usize {
        if self.restriction == Restriction::Pinned {
            2
        } else {
            1
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 || self.start < 0 || self.end < 0 {
            return Err(Error::invalid("path sum needs N >= 1 and non-negative endpoints"));
        }
        if (self.start + self.end + self.n as i32) % 2 != 0 || (self.start - self.end).unsigned_abs() as usize > self.n
        {
            return Err(Error::invalid(format!("no path of length {} joins {} to {}", self.n, self.start, self.end)));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid(format!("lambda = {}: must be > 0", self.lambda)));
        }
        Ok(())
    }

    #[inline]
    fn site_weight(&self, h: i32, ln_lambda: f64) -> f64 {
        if h == 0 {
            ln_lambda
        } else {
            0.0
        }
    }
}

/// Dense table `log W(x, layer, h)`. The layer is the has-touched flag for
/// [`Restriction::Pinned`] and trivial otherwise. For forward tables the flag
/// counts contacts in `0..=x`; for backward tables, contacts in `0..x`.
#[derive(Clone, Debug)]
pub struct WeightTable {
    spec: PathSpec,
    direction: Direction,
    width: usize,
    layers: usize,
    log_w: Vec<f64>,
}

impl WeightTable {
    pub fn forward(spec: PathSpec) -> Result<Self> {
        spec.validate()?;
        let (width, layers) = (spec.h_max() + 1, spec.layers());
        let stride = width * layers;
        let mut log_w = vec![f64::NEG_INFINITY; (spec.n + 1) * stride];
        init_forward(&spec, &mut log_w[..stride], width);
        for x in 0..spec.n {
            let (head, tail) = log_w.split_at_mut((x + 1) * stride);
            step_forward(&spec, &head[x * stride..], &mut tail[..stride], width);
        }
        Ok(Self { spec, direction: Direction::Forward, width, layers, log_w })
    }

    pub fn backward(spec: PathSpec) -> Result<Self> {
        spec.validate()?;
        let (width, layers) = (spec.h_max() + 1, spec.layers());
        let stride = width * layers;
        let n = spec.n;
        let mut log_w = vec![f64::NEG_INFINITY; (n + 1) * stride];
        init_backward(&spec, &mut log_w[n * stride..], width);
        for x in (0..n).rev() {
            let (head, tail) = log_w.split_at_mut((x + 1) * stride);
            step_backward(&spec, x, &tail[..stride], &mut head[x * stride..], width);
        }
        Ok(Self { spec, direction: Direction::Backward, width, layers, log_w })
    }

    pub fn spec(&self) -> &PathSpec {
        &self.spec
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn h_max(&self) -> usize {
        self.width - 1
    }

    /// Entry for a given flag layer; `-inf` outside the table.
    pub fn log_w_layer(&self, x: usize, layer: usize, h: i32) -> f64 {
        if x > self.spec.n || layer >= self.layers || h < 0 || h as usize >= self.width {
            return f64::NEG_INFINITY;
        }
        self.log_w[(x * self.layers + layer) * self.width + h as usize]
    }

    /// Entry summed over flag layers that can still complete (forward) or
    /// entry with nothing touched yet (backward).
    pub fn log_w(&self, x: usize, h: i32) -> f64 {
        match (self.direction, self.layers) {
            (_, 1) => self.log_w_layer(x, 0, h),
            (Direction::Forward, _) => ln_add(self.log_w_layer(x, 0, h), self.log_w_layer(x, 1, h)),
            (Direction::Backward, _) => self.log_w_layer(x, 0, h),
        }
    }

    /// Log partition function of the ensemble described by this `PathSpec`.
    pub fn log_total(&self) -> f64 {
        match self.direction {
            Direction::Backward => self.log_w_layer(0, 0, self.spec.start),
            Direction::Forward => self.log_w_layer(self.spec.n, self.layers - 1, self.spec.end),
        }
    }

    /// Exact draw from the Gibbs measure of this `PathSpec` by sequential sampling.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Path> {
        if self.direction != Direction::Backward {
            return Err(Error::invalid("sampling needs a backward table"));
        }
        if self.log_total() == f64::NEG_INFINITY {
            return Err(Error::invalid("empty ensemble: nothing to sample"));
        }
        let mut heights = Vec::with_capacity(self.spec.n + 1);
        let (mut h, mut touched) = (self.spec.start, 0usize);
        heights.push(h);
        for x in 0..self.spec.n {
            if self.layers == 2 && h == 0 {
                touched = 1;
            }
            let down = self.log_w_layer(x + 1, touched, h - 1);
            let up = self.log_w_layer(x + 1, touched, h + 1);
            if down == f64::NEG_INFINITY && up == f64::NEG_INFINITY {
                return Err(Error::Numerical(format!("inconsistent weight table at x = {x}")));
            }
            let p_up = 1.0 / (1.0 + (down - up).exp());
            h += if rng.random::<f64>() < p_up { 1 } else { -1 };
            heights.push(h);
        }
        Ok(Path::from_heights_unchecked(heights))
    }
}

fn init_forward(spec: &PathSpec, row: &mut [f64], width: usize) {
    let h = spec.start;
    if h < spec.floor() || h as usize >= width {
        return;
    }
    let layer = usize::from(spec.layers() == 2 && h == 0);
    row[layer * width + h as usize] = spec.site_weight(h, spec.lambda.ln());
}

fn step_forward(spec: &PathSpec, prev: &[f64], next: &mut [f64], width: usize) {
    let ln_lambda = spec.lambda.ln();
    let layers = spec.layers();
    let floor = spec.floor();
    for layer in 0..layers {
        for h in 0..width {
            let v = prev[layer * width + h];
            if v == f64::NEG_INFINITY {
                continue;
            }
            for h2 in [h as i32 - 1, h as i32 + 1] {
                if h2 < floor || h2 as usize >= width {
                    continue;
                }
                let l2 = if layers == 2 && h2 == 0 { 1 } else { layer };
                let slot = &mut next[l2 * width + h2 as usize];
                *slot = ln_add(*slot, v + spec.site_weight(h2, ln_lambda));
            }
        }
    }
}

fn init_backward(spec: &PathSpec, row: &mut [f64], width: usize) {
    let h = spec.end;
    if h < spec.floor() || h as usize >= width {
        return;
    }
    let w = spec.site_weight(h, spec.lambda.ln());
    if spec.layers() == 2 {
        // flag 0 completes only if the endpoint itself is a contact
        if h == 0 {
            row[h as usize] = w;
        }
        row[width + h as usize] = w;
    } else {
        row[h as usize] = w;
    }
}

fn step_backward(spec: &PathSpec, x: usize, next: &[f64], cur: &mut [f64], width: usize) {
    let ln_lambda = spec.lambda.ln();
    let layers = spec.layers();
    let floor = spec.floor();
    let remaining = (spec.n - x) as i32;
    for layer in 0..layers {
        for h in floor.max(0)..width as i32 {
            if (h - spec.end).abs() > remaining {
                continue;
            }
            let l2 = if layers == 2 && h == 0 { 1 } else { layer };
            let mut acc = f64::NEG_INFINITY;
            for h2 in [h - 1, h + 1] {
                if h2 < floor || h2 as usize >= width {
                    continue;
                }
                acc = ln_add(acc, next[l2 * width + h2 as usize]);
            }
            if acc > f64::NEG_INFINITY {
                cur[layer * width + h as usize] = acc + spec.site_weight(h, ln_lambda);
            }
        }
    }
}

/// Log partition function with `O(h_max)` memory.
pub fn log_partition(spec: &PathSpec) -> Result<f64> {
    spec.validate()?;
    let (width, layers) = (spec.h_max() + 1, spec.layers());
    let stride = width * layers;
    let mut prev = vec![f64::NEG_INFINITY; stride];
    let mut next = vec![f64::NEG_INFINITY; stride];
    init_forward(spec, &mut prev, width);
    for _ in 0..spec.n {
        next.fill(f64::NEG_INFINITY);
        step_forward(spec, &prev, &mut next, width);
        std::mem::swap(&mut prev, &mut next);
    }
    Ok(prev[(layers - 1) * width + spec.end as usize])
}

/// `log Z^lambda_N` for zero boundary conditions.
pub fn partition_zero(lambda: f64, n: usize) -> Result<f64> {
    if n < 2 || n % 2 != 0 {
        return Err(Error::invalid(format!("N = {n}: must be even and >= 2")));
    }
    log_partition(&PathSpec::zero(n, lambda))
}

/// The elevated partition function and its split over free and pinned paths.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElevatedPartition {
    pub log_z: f64,
    pub log_free: f64,
    pub log_pinned: f64,
    /// Whether `log_pinned` came from the has-touched recursion because the
    /// subtraction was ill-conditioned.
    pub pinned_by_flag: bool,
}

impl ElevatedPartition {
    pub fn pinned_fraction(&self) -> f64 {
        (self.log_pinned - self.log_z).exp()
    }

    pub fn free_fraction(&self) -> f64 {
        (self.log_free - self.log_z).exp()
    }
}

pub fn partition_elevated(params: &ModelParams) -> Result<ElevatedPartition> {
    let log_z = log_partition(&PathSpec::from_params(params, Ensemble::Elevated))?;
    let log_free = log_partition(&PathSpec::from_params(params, Ensemble::ElevatedFree))?;
    let diff = ln_sub(log_z, log_free).ok_or_else(|| Error::Numerical("free sum exceeds the full sum".into()))?;
    if diff - log_z >= SUBTRACTION_GUARD.ln() {
        return Ok(ElevatedPartition { log_z, log_free, log_pinned: diff, pinned_by_flag: false });
    }
    let log_pinned = log_partition(&PathSpec::from_params(params, Ensemble::ElevatedPinned))?;
    Ok(ElevatedPartition { log_z, log_free, log_pinned, pinned_by_flag: true })
}

/// `log Z^lambda_m` for every even `m <= m_max` from one forward sweep.
#[derive(Clone, Debug)]
pub struct ZeroPartitionTable {
    lambda: f64,
    log_z: Vec<f64>,
}

impl ZeroPartitionTable {
    pub fn new(lambda: f64, m_max: usize) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::invalid(format!("lambda = {lambda}: must be > 0")));
        }
        let ln_lambda = lambda.ln();
        let width = m_max / 2 + 2;
        let mut row = vec![f64::NEG_INFINITY; width];
        let mut next = vec![f64::NEG_INFINITY; width];
        row[0] = ln_lambda;
        let mut log_z = vec![ln_lambda];
        for _ in 0..m_max {
            next.fill(f64::NEG_INFINITY);
            for h in 0..width {
                if row[h] == f64::NEG_INFINITY {
                    continue;
                }
                if h + 1 < width {
                    next[h + 1] = ln_add(next[h + 1], row[h]);
                }
                if h > 0 {
                    let w = if h == 1 { ln_lambda } else { 0.0 };
                    next[h - 1] = ln_add(next[h - 1], row[h] + w);
                }
            }
            std::mem::swap(&mut row, &mut next);
            log_z.push(row[0]);
        }
        Ok(Self { lambda, log_z })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn m_max(&self) -> usize {
        self.log_z.len() - 1
    }

    /// `log Z^lambda_m`, with `Z_0 = lambda` (a single contact).
    pub fn log_z(&self, m: usize) -> f64 {
        self.log_z[m]
    }
}

/// `E[H]` under the ensemble of `spec`, by forward-backward.
pub fn expected_contacts(spec: &PathSpec) -> Result<f64> {
    let fwd = WeightTable::forward(*spec)?;
    let bwd = WeightTable::backward(*spec)?;
    let log_z = bwd.log_total();
    if log_z == f64::NEG_INFINITY {
        return Err(Error::invalid("empty ensemble"));
    }
    let ln_lambda = spec.lambda.ln();
    Ok((0..=spec.n).map(|x| (fwd.log_w(x, 0) + bwd.log_w_layer(x, 0, 0) - ln_lambda - log_z).exp()).sum())
}
