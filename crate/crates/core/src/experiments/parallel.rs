use rayon::prelude::*;

/// Maps `f` over `items` on at most `jobs` threads. Results come back in
/// input order regardless of completion order.
pub fn par_map<T, R, F>(items: &[T], jobs: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let jobs = jobs.max(1).min(items.len().max(1));
    if jobs == 1 {
        return items.iter().map(&f).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
        Ok(pool) => pool.install(|| items.par_iter().map(&f).collect()),
        Err(_) => items.iter().map(&f).collect(),
    }
}

/// Default worker count.
pub fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preserves_order() {
        let items: Vec<u64> = (0..100).collect();
        let out = par_map(&items, 7, |&x| {
            // uneven work so completion order differs from input order
            std::thread::sleep(std::time::Duration::from_micros((100 - x) * 10));
            x * x
        });
        assert_eq!(out, items.iter().map(|x| x * x).collect::<Vec<_>>());
    }

    #[test]
    fn empty_and_serial() {
        let none: Vec<u8> = Vec::new();
        assert!(par_map(&none, 4, |x| *x).is_empty());
        assert_eq!(par_map(&[1, 2], 1, |x| x + 1), vec![2, 3]);
    }
}
