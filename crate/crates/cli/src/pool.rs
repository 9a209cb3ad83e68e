//! Ordered parallel execution of independent trials.

use rayon::prelude::*;

use crate::error::CliResult;

/// Runs `work(0..trials)` on a pool of `threads` workers (0 = one per core)
/// and hands each result to `sink` in trial-index order.
///
/// Trials are processed in batches, so a long sweep flushes steadily. When a
/// trial fails, every earlier trial has already reached `sink` and the error
/// is returned.
pub fn run_ordered<T, W, S>(trials: usize, threads: usize, work: W, mut sink: S) -> CliResult<()>
where
    T: Send,
    W: Fn(usize) -> CliResult<T> + Sync,
    S: FnMut(usize, T) -> CliResult<()>,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()?;
    let batch = pool.current_num_threads().max(1) * 4;
    let mut start = 0;
    while start < trials {
        let end = (start + batch).min(trials);
        let results: Vec<CliResult<T>> =
            pool.install(|| (start..end).into_par_iter().map(&work).collect());
        for (trial, result) in (start..end).zip(results) {
            sink(trial, result?)?;
        }
        start = end;
    }
    Ok(())
}
