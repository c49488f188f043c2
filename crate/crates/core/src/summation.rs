//! Compensated accumulation and order-fixed reductions.
//!
//! Parallel loops in this crate produce one partial per work item, collect
//! them in index order, then fold them with [`tree_sum`]. The result depends
//! only on the partition, never on the thread count.

/// Neumaier's variant of Kahan summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub const fn new() -> Self {
        Self { sum: 0.0, carry: 0.0 }
    }

    #[inline]
    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.carry += (self.sum - t) + value;
        } else {
            self.carry += (value - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl Extend<f64> for CompensatedSum {
    fn extend<I: IntoIterator<Item = f64>>(&mut self, iter: I) {
        for v in iter {
            self.add(v);
        }
    }
}

/// Compensated sum of a slice in index order.
pub fn compensated(values: &[f64]) -> f64 {
    let mut acc = CompensatedSum::new();
    acc.extend(values.iter().copied());
    acc.value()
}

/// Pairwise (binary tree) sum with a split point fixed by the length alone.
pub fn tree_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        2 => values[0] + values[1],
        n => {
            let (lo, hi) = values.split_at(n / 2);
            tree_sum(lo) + tree_sum(hi)
        }
    }
}

/// Component-wise [`tree_sum`] over a list of fixed-size partials.
pub fn tree_sum_arrays<const K: usize>(parts: &[[f64; K]]) -> [f64; K] {
    match parts.len() {
        0 => [0.0; K],
        1 => parts[0],
        n => {
            let (lo, hi) = parts.split_at(n / 2);
            let a = tree_sum_arrays(lo);
            let b = tree_sum_arrays(hi);
            std::array::from_fn(|i| a[i] + b[i])
        }
    }
}

/// Component-wise [`tree_sum`] over variable-length partials of equal width.
pub fn tree_sum_vecs(parts: &[Vec<f64>], width: usize) -> Vec<f64> {
    match parts.len() {
        0 => vec![0.0; width],
        1 => parts[0].clone(),
        n => {
            let (lo, hi) = parts.split_at(n / 2);
            let a = tree_sum_vecs(lo, width);
            let b = tree_sum_vecs(hi, width);
            a.iter().zip(&b).map(|(x, y)| x + y).collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensation_recovers_cancelled_units() {
        let values = [1.0, 1e100, 1.0, -1e100];
        assert_eq!(compensated(&values), 2.0);
        assert_eq!(values.iter().sum::<f64>(), 0.0);
    }

    #[test]
    fn tree_sum_matches_exact_integers() {
        let values: Vec<f64> = (1..=1000).map(f64::from).collect();
        assert_eq!(tree_sum(&values), 500_500.0);
        assert_eq!(tree_sum(&[]), 0.0);
    }

    #[test]
    fn array_and_vec_trees_agree() {
        let parts: Vec<[f64; 3]> = (0..17).map(|i| [i as f64, 0.1 * i as f64, -1.0]).collect();
        let vecs: Vec<Vec<f64>> = parts.iter().map(|p| p.to_vec()).collect();
        assert_eq!(tree_sum_arrays(&parts).to_vec(), tree_sum_vecs(&vecs, 3));
    }
}
