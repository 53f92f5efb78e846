//! Binary indexed tree over non-negative weights with proportional sampling.

#[derive(Clone, Debug)]
pub struct Fenwick {
    tree: Vec<f64>,
    values: Vec<f64>,
    updates: usize,
}

/// Rebuild from `values` after this many updates to shed rounding drift.
const REBUILD_EVERY: usize = 1 << 16;

impl Fenwick {
    pub fn new(values: Vec<f64>) -> Self {
        let mut f = Self { tree: vec![0.0; values.len() + 1], values, updates: 0 };
        f.rebuild();
        f
    }

    fn rebuild(&mut self) {
        let n = self.values.len();
        self.tree.iter_mut().for_each(|t| *t = 0.0);
        for i in 0..n {
            self.tree[i + 1] += self.values[i];
            let parent = (i + 1) + ((i + 1) & (!(i + 1) + 1));
            if parent <= n {
                let v = self.tree[i + 1];
                self.tree[parent] += v;
            }
        }
        self.updates = 0;
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn set(&mut self, i: usize, value: f64) {
        let delta = value - self.values[i];
        if delta == 0.0 {
            return;
        }
        self.values[i] = value;
        self.updates += 1;
        if self.updates >= REBUILD_EVERY {
            self.rebuild();
            return;
        }
        let mut k = i + 1;
        while k < self.tree.len() {
            self.tree[k] += delta;
            k += k & (!k + 1);
        }
    }

    pub fn total(&self) -> f64 {
        let mut k = self.values.len();
        let mut s = 0.0;
        while k > 0 {
            s += self.tree[k];
            k &= k - 1;
        }
        s
    }

    /// Index `i` with `prefix(i) <= u < prefix(i + 1)`, skipping zero weights;
    /// `u` is clamped into `[0, total)`.
    pub fn find(&self, u: f64) -> usize {
        let n = self.values.len();
        let mut pos = 0;
        let mut rem = u.max(0.0);
        let mut step = n.next_power_of_two();
        while step > 0 {
            let next = pos + step;
            if next <= n && self.tree[next] <= rem {
                rem -= self.tree[next];
                pos = next;
            }
            step >>= 1;
        }
        // rounding can land past the last positive weight
        let mut i = pos.min(n - 1);
        while self.values[i] == 0.0 && i > 0 {
            i -= 1;
        }
        while self.values[i] == 0.0 && i + 1 < n {
            i += 1;
        }
        i
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sampling_boundaries() {
        let f = Fenwick::new(vec![0.0, 1.0, 0.0, 2.0, 0.5]);
        assert_eq!(f.total(), 3.5);
        assert_eq!(f.find(0.0), 1);
        assert_eq!(f.find(0.999), 1);
        assert_eq!(f.find(1.0), 3);
        assert_eq!(f.find(2.999), 3);
        assert_eq!(f.find(3.0), 4);
        assert_eq!(f.find(3.5), 4);
        assert_eq!(f.find(100.0), 4);
    }

    proptest! {
        #[test]
        fn matches_linear_scan(values in prop::collection::vec(0u8..4, 1..40),
                               updates in prop::collection::vec((0usize..40, 0u8..4), 0..60),
                               u in 0.0f64..1.0) {
            let mut vals: Vec<f64> = values.iter().map(|&v| v as f64 * 0.5).collect();
            let mut f = Fenwick::new(vals.clone());
            for (i, v) in updates {
                let i = i % vals.len();
                vals[i] = v as f64 * 0.5;
                f.set(i, vals[i]);
            }
            let total: f64 = vals.iter().sum();
            prop_assert!((f.total() - total).abs() < 1e-12);
            if total > 0.0 {
                let target = u * total;
                let mut acc = 0.0;
                let want = vals.iter().position(|&v| { acc += v; acc > target }).unwrap();
                prop_assert_eq!(f.find(target), want);
            }
        }
    }
}
