//! Model parameters, height profiles and the corner flip.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default bound on `N` for exhaustive path enumeration.
pub const DEFAULT_ENUMERATION_CAP: usize = 24;

/// Smallest even integer `>= s`.
///
/// Products such as `0.3 * 20` carry representation error, so values within
/// a relative `1e-12` of an integer are snapped to it first.
pub fn bracket(s: f64) -> Result<i64> {
    if !s.is_finite() || s < 0.0 {
        return Err(Error::invalid(format!("bracket of {s}: argument must be finite and >= 0")));
    }
    let nearest = s.round();
    let s = if (s - nearest).abs() <= 1e-12 * nearest.max(1.0) { nearest } else { s };
    let k = s.ceil() as i64;
    Ok(if k % 2 == 0 { k } else { k + 1 })
}

/// `(N, a, lambda)` together with the cached boundary height `<aN>`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    n: usize,
    a: f64,
    lambda: f64,
    boundary: i32,
}

impl ModelParams {
    pub fn new(n: usize, a: f64, lambda: f64) -> Result<Self> {
        if n < 2 || n % 2 != 0 {
            return Err(Error::invalid(format!("N = {n}: must be even and >= 2")));
        }
        if !(a > 0.0 && a < 0.5) {
            return Err(Error::invalid(format!("a = {a}: must lie in (0, 1/2)")));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::invalid(format!("lambda = {lambda}: must be > 0")));
        }
        let boundary = bracket(a * n as f64)?;
        if boundary >= n as i64 {
            return Err(Error::invalid(format!(
                "<aN> = {boundary} must be < N = {n} for the elevated ensemble to be non-empty"
            )));
        }
        Ok(Self { n, a, lambda, boundary: boundary as i32 })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// The boundary height `<aN>`.
    pub fn boundary(&self) -> i32 {
        self.boundary
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Self::new(self.n, self.a, lambda)
    }

    /// Endpoint height of the given ensemble.
    pub fn endpoint(&self, ensemble: Ensemble) -> i32 {
        match ensemble {
            Ensemble::Zero => 0,
            _ => self.boundary,
        }
    }
}

/// The four path sets used throughout: `S_N`, `S^a_N` and its free/pinned split.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Ensemble {
    Zero,
    Elevated,
    ElevatedFree,
    ElevatedPinned,
}

impl Ensemble {
    pub fn admits(&self, phase: PhaseLabel) -> bool {
        match self {
            Ensemble::Zero | Ensemble::Elevated => true,
            Ensemble::ElevatedFree => phase == PhaseLabel::Free,
            Ensemble::ElevatedPinned => phase == PhaseLabel::Pinned,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PhaseLabel {
    /// Never touches the wall.
    Free,
    /// At least one contact.
    Pinned,
}

/// A non-negative nearest-neighbour height profile `eta_0, ..., eta_N`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Path {
    heights: Vec<i32>,
}

impl Path {
    pub fn new(heights: Vec<i32>) -> Result<Self> {
        if heights.len() < 2 {
            return Err(Error::invalid("a path needs at least two heights"));
        }
        if let Some(x) = heights.iter().position(|&h| h < 0) {
            return Err(Error::invalid(format!("negative height at x = {x}")));
        }
        if let Some(x) = heights.windows(2).position(|w| (w[1] - w[0]).abs() != 1) {
            return Err(Error::invalid(format!("increment at x = {x} is not +-1")));
        }
        Ok(Self { heights })
    }

    /// Caller guarantees the invariants.
    pub(crate) fn from_heights_unchecked(heights: Vec<i32>) -> Self {
        debug_assert!(Path::new(heights.clone()).is_ok());
        Self { heights }
    }

    /// The lowest path joining `start` to `end` in `n` steps without going
    /// below zero: descend, follow the wall, climb.
    pub fn lowest(n: usize, start: i32, end: i32) -> Result<Self> {
        check_endpoints(n, start, end)?;
        let heights = (0..=n as i32)
            .map(|x| {
                let down = start - x;
                let up = end - (n as i32 - x);
                let floor = if (start + x) % 2 == 0 { 0 } else { 1 };
                down.max(up).max(floor)
            })
            .collect();
        Path::new(heights)
    }

    /// Flat zig-zag at `<aN>`: the standard free starting configuration.
    pub fn flat(n: usize, height: i32) -> Result<Self> {
        check_endpoints(n, height, height)?;
        Path::new((0..=n).map(|x| height + (x % 2) as i32).collect())
    }

    pub fn heights(&self) -> &[i32] {
        &self.heights
    }

    pub fn into_heights(self) -> Vec<i32> {
        self.heights
    }

    /// System length `N`.
    pub fn len(&self) -> usize {
        self.heights.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn height(&self, x: usize) -> i32 {
        self.heights[x]
    }

    /// Number of contacts `H(eta)`, endpoints included.
    pub fn contacts(&self) -> usize {
        self.heights.iter().filter(|&&h| h == 0).count()
    }

    pub fn min_height(&self) -> i32 {
        *self.heights.iter().min().expect("non-empty")
    }

    pub fn phase(&self) -> PhaseLabel {
        if self.min_height() == 0 {
            PhaseLabel::Pinned
        } else {
            PhaseLabel::Free
        }
    }

    /// Leftmost and rightmost contact, if any.
    pub fn contact_window(&self) -> Option<(usize, usize)> {
        let l = self.heights.iter().position(|&h| h == 0)?;
        let r = self.heights.iter().rposition(|&h| h == 0)?;
        Some((l, r))
    }

    pub fn is_corner(&self, x: usize) -> bool {
        x >= 1 && x < self.len() && self.heights[x - 1] == self.heights[x + 1]
    }

    /// The corner flip `eta -> eta^x`.
    pub fn flip(&self, x: usize) -> Result<Path> {
        if x == 0 || x >= self.len() {
            return Err(Error::InadmissibleFlip { site: x, reason: "site outside 1..N-1" });
        }
        let h = &self.heights;
        let flipped = h[x + 1] + h[x - 1] - h[x];
        if (flipped - h[x]).abs() != 2 {
            return Err(Error::InadmissibleFlip { site: x, reason: "not a corner" });
        }
        if flipped < 0 {
            return Err(Error::InadmissibleFlip { site: x, reason: "flip would go below the wall" });
        }
        let mut heights = h.clone();
        heights[x] = flipped;
        Ok(Path { heights })
    }

    /// Mirror image `x -> N - x`.
    pub fn reflected(&self) -> Path {
        let mut heights = self.heights.clone();
        heights.reverse();
        Path { heights }
    }
}

fn check_endpoints(n: usize, start: i32, end: i32) -> Result<()> {
    if start < 0 || end < 0 || (start - end).unsigned_abs() as usize > n || (start + end + n as i32) % 2 != 0 {
        return Err(Error::invalid(format!("no non-negative path of length {n} joins {start} to {end}")));
    }
    Ok(())
}

/// Every path of the requested ensemble, in lexicographic order of increments
/// (down before up). Exhaustive oracle; `N` is capped by `cap`.
pub fn enumerate_paths(params: &ModelParams, ensemble: Ensemble, cap: usize) -> Result<Vec<Path>> {
    enumerate_with(params.n(), params.endpoint(ensemble), ensemble, cap)
}

/// Zero-boundary paths of length `n`; unlike [`ModelParams`] this accepts
/// `n = 2`, where no elevated ensemble exists.
pub fn enumerate_zero_paths(n: usize, cap: usize) -> Result<Vec<Path>> {
    if n < 2 || n % 2 != 0 {
        return Err(Error::invalid(format!("N = {n}: must be even and >= 2")));
    }
    enumerate_with(n, 0, Ensemble::Zero, cap)
}

fn enumerate_with(n: usize, end: i32, ensemble: Ensemble, cap: usize) -> Result<Vec<Path>> {
    if n > cap {
        return Err(Error::CapExceeded { what: "enumeration length N", size: n, cap });
    }
    let mut out = Vec::new();
    let mut heights = vec![end; n + 1];
    extend(&mut heights, 0, n, end, ensemble, &mut out);
    Ok(out)
}

fn extend(heights: &mut Vec<i32>, x: usize, n: usize, end: i32, ensemble: Ensemble, out: &mut Vec<Path>) {
    if x == n {
        let path = Path { heights: heights.clone() };
        if ensemble.admits(path.phase()) {
            out.push(path);
        }
        return;
    }
    let h = heights[x];
    for next in [h - 1, h + 1] {
        let remaining = (n - x - 1) as i32;
        if next < 0 || (next - end).abs() > remaining {
            continue;
        }
        if ensemble == Ensemble::ElevatedFree && next == 0 {
            continue;
        }
        heights[x + 1] = next;
        extend(heights, x + 1, n, end, ensemble, out);
    }
}
