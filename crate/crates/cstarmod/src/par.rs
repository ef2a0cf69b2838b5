//! Batch mapping with an optional data-parallel core.
//!
//! With the `parallel` feature (on by default) `batch_map` fans out over a
//! work-stealing thread pool; without it the same call runs sequentially.
//! Both paths return results in input order, so reports built from them are
//! identical either way. `sequential_map` is always sequential, which gives
//! benchmarks a fixed baseline to compare against.

/// Map over a slice in input order, in parallel when the `parallel` feature
/// is enabled.
#[cfg(feature = "parallel")]
pub fn batch_map<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

/// Map over a slice in input order; sequential build of the crate.
#[cfg(not(feature = "parallel"))]
pub fn batch_map<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    items.iter().map(f).collect()
}

/// Always-sequential map, regardless of features; the benchmark baseline.
pub fn sequential_map<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    items.iter().map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        let input: Vec<usize> = (0..1000).collect();
        let doubled = batch_map(&input, |x| x * 2);
        let reference = sequential_map(&input, |x| x * 2);
        assert_eq!(doubled, reference);
        assert_eq!(doubled[999], 1998);
    }
}
