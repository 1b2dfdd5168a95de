use std::cmp::Ordering;

/// Brute-force nearest-neighbour index over points in a fixed space.
///
/// Ties in distance are broken by a per-point key (class index or target
/// value) and then by the point's original feature vector, so the selected
/// neighbour set does not depend on the order training rows were supplied in.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct NeighborIndex {
    points: Vec<f64>,
    dim: usize,
    tie_keys: Vec<f64>,
    originals: Vec<f64>,
    original_dim: usize,
}

impl NeighborIndex {
    pub(crate) fn new(
        points: Vec<f64>,
        dim: usize,
        tie_keys: Vec<f64>,
        originals: Vec<f64>,
        original_dim: usize,
    ) -> Self {
        debug_assert_eq!(points.len(), tie_keys.len() * dim);
        debug_assert_eq!(originals.len(), tie_keys.len() * original_dim);
        Self {
            points,
            dim,
            tie_keys,
            originals,
            original_dim,
        }
    }

    pub(crate) fn len(&self) -> usize {
        self.tie_keys.len()
    }

    fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    fn original(&self, i: usize) -> &[f64] {
        &self.originals[i * self.original_dim..(i + 1) * self.original_dim]
    }

    fn order(&self, a: (f64, usize), b: (f64, usize)) -> Ordering {
        a.0.total_cmp(&b.0)
            .then_with(|| self.tie_keys[a.1].total_cmp(&self.tie_keys[b.1]))
            .then_with(|| {
                self.original(a.1)
                    .iter()
                    .zip(self.original(b.1))
                    .map(|(x, y)| x.total_cmp(y))
                    .find(|o| o.is_ne())
                    .unwrap_or(Ordering::Equal)
            })
    }

    /// Indices of the `k` nearest points to `query`, nearest first.
    /// `scratch` is reused between calls to avoid reallocating.
    pub(crate) fn nearest(&self, query: &[f64], k: usize, scratch: &mut Vec<(f64, usize)>) -> Vec<usize> {
        debug_assert_eq!(query.len(), self.dim);
        scratch.clear();
        scratch.extend((0..self.len()).map(|i| {
            let d: f64 = self
                .point(i)
                .iter()
                .zip(query)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            (d, i)
        }));
        let k = k.min(scratch.len());
        if k < scratch.len() {
            scratch.select_nth_unstable_by(k - 1, |&a, &b| self.order(a, b));
            scratch.truncate(k);
        }
        scratch.sort_unstable_by(|&a, &b| self.order(a, b));
        scratch.iter().map(|&(_, i)| i).collect()
    }
}
