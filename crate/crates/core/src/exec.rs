//! Execution policy and deterministic reductions.
//!
//! Every parallel reduction in the crate goes through [`tree_reduce`], whose
//! tree shape depends only on the index range, never on the scheduler. With
//! the `parallel` feature disabled the same tree is walked sequentially.

use std::ops::Range;

/// Leaf width of the pairwise reduction tree.
pub const LEAF_SIZE: usize = 32;

/// How much parallelism to use. Results never depend on the choice.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Parallelism {
    Sequential,
    /// Rayon's global pool.
    #[default]
    Auto,
    /// A dedicated pool with this many threads.
    Threads(usize),
}

impl Parallelism {
    /// `0` = automatic, `1` = sequential, otherwise a pool of that size.
    pub fn from_threads(threads: usize) -> Self {
        match threads {
            0 => Self::Auto,
            1 => Self::Sequential,
            n => Self::Threads(n),
        }
    }

    /// Runs `job`, telling it whether parallel primitives may be used, inside
    /// the selected pool.
    pub fn run<R: Send>(self, job: impl FnOnce(bool) -> R + Send) -> R {
        #[cfg(feature = "parallel")]
        {
            match self {
                Self::Sequential => job(false),
                Self::Auto => job(true),
                Self::Threads(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
                    Ok(pool) => pool.install(|| job(true)),
                    Err(_) => job(true),
                },
            }
        }
        #[cfg(not(feature = "parallel"))]
        {
            let _ = self;
            job(false)
        }
    }
}

#[inline]
fn join<A: Send, B: Send>(
    parallel: bool,
    a: impl FnOnce() -> A + Send,
    b: impl FnOnce() -> B + Send,
) -> (A, B) {
    #[cfg(feature = "parallel")]
    if parallel {
        return rayon::join(a, b);
    }
    let _ = parallel;
    (a(), b())
}

/// Pairwise reduction over `range`: ranges of at most [`LEAF_SIZE`] are
/// handed to `leaf`, and halves are merged with `combine` (left, right).
pub fn tree_reduce<T, L, C>(range: Range<usize>, parallel: bool, leaf: &L, combine: &C) -> T
where
    T: Send,
    L: Fn(Range<usize>) -> T + Sync,
    C: Fn(T, T) -> T + Sync,
{
    let len = range.end - range.start;
    if len <= LEAF_SIZE {
        return leaf(range);
    }
    let mid = range.start + len / 2;
    let (left, right) = join(
        parallel,
        || tree_reduce(range.start..mid, parallel, leaf, combine),
        || tree_reduce(mid..range.end, parallel, leaf, combine),
    );
    combine(left, right)
}

/// `(0..n).map(f)` collected in index order, in parallel when allowed.
pub fn map_indexed<T, F>(n: usize, parallel: bool, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = parallel;
    (0..n).map(f).collect()
}

/// Elementwise sum of two equal-length accumulators.
pub fn add_vectors(mut a: Vec<f64>, b: Vec<f64>) -> Vec<f64> {
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sum(p: Parallelism, values: &[f64]) -> f64 {
        p.run(|par| {
            tree_reduce(
                0..values.len(),
                par,
                &|r: Range<usize>| values[r].iter().sum::<f64>(),
                &|a, b| a + b,
            )
        })
    }

    #[test]
    fn reduction_is_scheduling_independent() {
        let values: Vec<f64> = (0..10_007).map(|i| 1.0 / (1.0 + i as f64).powf(1.3)).collect();
        let reference = sum(Parallelism::Sequential, &values);
        for p in [Parallelism::Auto, Parallelism::Threads(2), Parallelism::Threads(7)] {
            assert_eq!(sum(p, &values).to_bits(), reference.to_bits());
        }
    }

    #[test]
    fn map_preserves_order() {
        let v = Parallelism::Threads(3).run(|par| map_indexed(1000, par, |i| i * i));
        assert!(v.iter().enumerate().all(|(i, &x)| x == i * i));
    }

    #[test]
    fn from_threads() {
        assert_eq!(Parallelism::from_threads(0), Parallelism::Auto);
        assert_eq!(Parallelism::from_threads(1), Parallelism::Sequential);
        assert_eq!(Parallelism::from_threads(4), Parallelism::Threads(4));
    }
}
