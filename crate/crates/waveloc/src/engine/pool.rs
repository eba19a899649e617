//! Footprint-level fan-out with deterministic merge.
//!
//! Items are claimed from a shared counter, so workers never contend on
//! anything but one atomic; results are reassembled by item index, making
//! the output independent of worker count and scheduling. A panicking item
//! is retried once on the coordinator; if it panics again its slot is
//! `None` and the caller decides what that means.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::thread;

use crate::error::Result;

use super::scratch::{ScratchRoot, WorkerScratch};

pub fn worker_pool_map<R, F>(
    n_items: usize,
    workers: usize,
    scratch: &ScratchRoot,
    job: F,
) -> Result<Vec<Option<R>>>
where
    R: Send,
    F: Fn(&WorkerScratch, usize) -> R + Sync,
{
    let n_workers = workers.max(1).min(n_items.max(1));
    let mut scratches = Vec::with_capacity(n_workers);
    for id in 0..n_workers {
        scratches.push(scratch.worker(id)?);
    }

    let next = AtomicUsize::new(0);
    let per_worker: Vec<Vec<(usize, Option<R>)>> = thread::scope(|s| {
        let handles: Vec<_> = scratches
            .iter()
            .map(|ws| {
                s.spawn(|| {
                    let mut out = Vec::new();
                    loop {
                        let i = next.fetch_add(1, Ordering::Relaxed);
                        if i >= n_items {
                            break;
                        }
                        let r = catch_unwind(AssertUnwindSafe(|| job(ws, i))).ok();
                        out.push((i, r));
                    }
                    out
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("pool worker caught its panics"))
            .collect()
    });

    let mut results: Vec<Option<R>> = (0..n_items).map(|_| None).collect();
    let mut panicked = Vec::new();
    for batch in per_worker {
        for (i, r) in batch {
            match r {
                Some(v) => results[i] = Some(v),
                None => panicked.push(i),
            }
        }
    }

    if !panicked.is_empty() {
        // one retry on the coordinator, in its own scratch so any partial
        // files from the failed attempt stay quarantined
        panicked.sort_unstable();
        let retry = scratch.worker(n_workers)?;
        for i in panicked {
            results[i] = catch_unwind(AssertUnwindSafe(|| job(&retry, i))).ok();
        }
    }
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn pool_root() -> (tempfile::TempDir, ScratchRoot) {
        let dir = tempdir().unwrap();
        let root = ScratchRoot::create(Some(dir.path())).unwrap();
        (dir, root)
    }

    #[test]
    fn every_item_processed_exactly_once() {
        let (_dir, root) = pool_root();
        let counts: Vec<AtomicUsize> = (0..100).map(|_| AtomicUsize::new(0)).collect();
        let out = worker_pool_map(100, 4, &root, |_, i| {
            counts[i].fetch_add(1, Ordering::Relaxed);
            i * i
        })
        .unwrap();
        assert!(counts.iter().all(|c| c.load(Ordering::Relaxed) == 1));
        assert!(out.iter().enumerate().all(|(i, r)| *r == Some(i * i)));
    }

    #[test]
    fn idle_workers_when_items_are_scarce() {
        let (_dir, root) = pool_root();
        let out = worker_pool_map(3, 16, &root, |_, i| i + 1).unwrap();
        assert_eq!(out, vec![Some(1), Some(2), Some(3)]);
        let empty = worker_pool_map(0, 4, &root, |_, i| i).unwrap();
        assert!(empty.is_empty());
    }

    #[test]
    fn first_panic_is_retried_on_the_coordinator() {
        let (_dir, root) = pool_root();
        let attempts: Vec<AtomicUsize> = (0..20).map(|_| AtomicUsize::new(0)).collect();
        let workers = 3;
        let out = worker_pool_map(20, workers, &root, |ws, i| {
            let attempt = attempts[i].fetch_add(1, Ordering::Relaxed);
            if i % 7 == 3 && attempt == 0 {
                panic!("transient failure");
            }
            (i, ws.id())
        })
        .unwrap();
        for (i, r) in out.iter().enumerate() {
            let (item, worker_id) = r.expect("all items recover");
            assert_eq!(item, i);
            if i % 7 == 3 {
                assert_eq!(attempts[i].load(Ordering::Relaxed), 2);
                assert_eq!(worker_id, workers, "retry runs in the coordinator scratch");
            } else {
                assert_eq!(attempts[i].load(Ordering::Relaxed), 1);
                assert!(worker_id < workers);
            }
        }
    }

    #[test]
    fn double_failure_leaves_a_hole() {
        let (_dir, root) = pool_root();
        let out = worker_pool_map(8, 2, &root, |_, i| {
            if i == 4 {
                panic!("hard failure");
            }
            i
        })
        .unwrap();
        for (i, r) in out.iter().enumerate() {
            if i == 4 {
                assert!(r.is_none());
            } else {
                assert_eq!(*r, Some(i));
            }
        }
    }

    #[test]
    fn output_is_independent_of_worker_count() {
        let (_dir, root) = pool_root();
        let job = |_: &WorkerScratch, i: usize| (i as u64).wrapping_mul(0x9e3779b97f4a7c15);
        let serial = worker_pool_map(500, 1, &root, job).unwrap();
        let wide = worker_pool_map(500, 5, &root, job).unwrap();
        assert_eq!(serial, wide);
    }
}
