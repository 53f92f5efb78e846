//! Indexed path state spaces. A path of length `n` is stored as its step
//! sequence: bit `n - 1 - i` of the code is set when step `i` goes up, so
//! numeric order of codes is lexicographic order of increments.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelParams, Path};

/// Default bound on the number of states of an exact generator.
pub const DEFAULT_STATE_CAP: usize = 200_000;

/// Longest path a 64-bit code can hold.
pub const MAX_CODE_LEN: usize = 63;

/// Subset of paths kept in the state space; transitions leaving it are
/// cancelled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Subset {
    All,
    /// Minimum height >= 1.
    Free,
    /// Minimum height 0.
    Pinned,
    /// Leftmost contact `l`, rightmost contact `r`.
    Window {
        l: usize,
        r: usize,
    },
}

impl Subset {
    fn admits(&self, heights: &[i32]) -> bool {
        let contact = |h: &i32| *h == 0;
        match *self {
            Subset::All => true,
            Subset::Free => !heights.iter().any(contact),
            Subset::Pinned => heights.iter().any(contact),
            Subset::Window { l, r } => {
                heights.iter().position(contact) == Some(l) && heights.iter().rposition(contact) == Some(r)
            }
        }
    }
}

/// Length, endpoints, pointwise height bounds and subset of a state space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceSpec {
    pub n: usize,
    pub start: i32,
    pub end: i32,
    /// Lowest admissible height at each site.
    pub lower: Vec<i32>,
    /// Highest admissible height at each site, if bounded.
    pub upper: Option<Vec<i32>>,
    pub subset: Subset,
}

impl SpaceSpec {
    /// Non-negative paths between two heights.
    pub fn walls(n: usize, start: i32, end: i32, subset: Subset) -> Self {
        Self { n, start, end, lower: vec![0; n + 1], upper: None, subset }
    }

    /// The elevated ensemble of `params`, restricted to `subset`.
    pub fn elevated(params: &ModelParams, subset: Subset) -> Self {
        let b = params.boundary();
        Self::walls(params.n(), b, b, subset)
    }

    pub fn zero(n: usize) -> Self {
        Self::walls(n, 0, 0, Subset::All)
    }

    /// Paths from 0 to `m` squeezed between two paths `chi <= xi`; heights
    /// may be negative.
    pub fn envelope(chi: &[i32], xi: &[i32]) -> Result<Self> {
        if chi.len() != xi.len() || chi.len() < 2 {
            return Err(Error::invalid("envelope paths need equal length >= 2"));
        }
        let steps_ok = |p: &[i32]| p.windows(2).all(|w| (w[1] - w[0]).abs() == 1);
        if !steps_ok(chi) || !steps_ok(xi) || chi[0] != 0 || xi[0] != 0 || chi.last() != xi.last() {
            return Err(Error::invalid("envelope paths must be +-1 paths from 0 with a common endpoint"));
        }
        if chi.iter().zip(xi).any(|(a, b)| a > b) {
            return Err(Error::invalid("envelope needs chi <= xi pointwise"));
        }
        let n = chi.len() - 1;
        Ok(Self { n, start: 0, end: xi[n], lower: chi.to_vec(), upper: Some(xi.to_vec()), subset: Subset::All })
    }
}

/// Sorted list of admissible codes.
#[derive(Clone, Debug)]
pub struct StateSpace {
    spec: SpaceSpec,
    codes: Vec<u64>,
}

impl StateSpace {
    pub fn enumerate(spec: SpaceSpec, cap: usize) -> Result<Self> {
        let n = spec.n;
        if n == 0 || n > MAX_CODE_LEN {
            return Err(Error::invalid(format!("state-space length {n} outside 1..={MAX_CODE_LEN}")));
        }
        if spec.lower.len() != n + 1 || spec.upper.as_ref().is_some_and(|u| u.len() != n + 1) {
            return Err(Error::invalid("height bounds must have N + 1 entries"));
        }
        let mut codes = Vec::new();
        let mut heights = vec![spec.start; n + 1];
        if spec.start >= spec.lower[0] && spec.upper.as_ref().is_none_or(|u| spec.start <= u[0]) {
            dfs(&spec, &mut heights, 0, 0, cap, &mut codes)?;
        }
        Ok(Self { spec, codes })
    }

    pub fn spec(&self) -> &SpaceSpec {
        &self.spec
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn codes(&self) -> &[u64] {
        &self.codes
    }

    pub fn index_of(&self, code: u64) -> Option<usize> {
        self.codes.binary_search(&code).ok()
    }

    pub fn decode_into(&self, code: u64, heights: &mut Vec<i32>) {
        decode_into(self.spec.n, self.spec.start, code, heights);
    }

    pub fn heights(&self, i: usize) -> Vec<i32> {
        let mut h = Vec::with_capacity(self.spec.n + 1);
        self.decode_into(self.codes[i], &mut h);
        h
    }

    /// The state as a [`Path`]; fails for envelope spaces with negative heights.
    pub fn path(&self, i: usize) -> Result<Path> {
        Path::new(self.heights(i))
    }

    pub fn index_of_heights(&self, heights: &[i32]) -> Option<usize> {
        if heights.len() != self.spec.n + 1 || heights[0] != self.spec.start {
            return None;
        }
        self.index_of(encode(heights)?)
    }
}

/// Mask toggling the two steps around site `x` (a corner flip).
#[inline]
pub fn flip_mask(n: usize, x: usize) -> u64 {
    (1u64 << (n - x)) | (1u64 << (n - 1 - x))
}

pub fn encode(heights: &[i32]) -> Option<u64> {
    let n = heights.len() - 1;
    let mut code = 0u64;
    for i in 0..n {
        match heights[i + 1] - heights[i] {
            1 => code |= 1 << (n - 1 - i),
            -1 => {}
            _ => return None,
        }
    }
    Some(code)
}

pub fn decode_into(n: usize, start: i32, code: u64, heights: &mut Vec<i32>) {
    heights.clear();
    let mut h = start;
    heights.push(h);
    for i in 0..n {
        h += if code >> (n - 1 - i) & 1 == 1 { 1 } else { -1 };
        heights.push(h);
    }
}

fn dfs(spec: &SpaceSpec, heights: &mut Vec<i32>, x: usize, code: u64, cap: usize, out: &mut Vec<u64>) -> Result<()> {
    let n = spec.n;
    if x == n {
        if spec.subset.admits(heights) {
            if out.len() == cap {
                return Err(Error::CapExceeded { what: "state space", size: cap + 1, cap });
            }
            out.push(code);
        }
        return Ok(());
    }
    let h = heights[x];
    for (bit, next) in [(0u64, h - 1), (1u64, h + 1)] {
        let remaining = (n - x - 1) as i32;
        if next < spec.lower[x + 1] || (next - spec.end).abs() > remaining {
            continue;
        }
        if spec.upper.as_ref().is_some_and(|u| next > u[x + 1]) {
            continue;
        }
        heights[x + 1] = next;
        dfs(spec, heights, x + 1, code | bit << (n - 1 - x), cap, out)?;
    }
    Ok(())
}
