//! Fixed-size worker pool over independent indexed tasks.
//!
//! Tasks never share mutable state; results are returned in task-index order
//! so output is independent of the worker count and of scheduling.

use std::panic::{self, AssertUnwindSafe};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskFailure {
    pub index: usize,
    pub message: String,
}

impl std::fmt::Display for TaskFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "task {} failed: {}", self.index, self.message)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WorkerPool {
    workers: usize,
}

impl WorkerPool {
    pub fn new(workers: usize) -> Result<Self> {
        if workers == 0 {
            return Err(Error::InvalidInput("worker count must be >= 1".into()));
        }
        Ok(WorkerPool { workers })
    }

    pub fn serial() -> Self {
        WorkerPool { workers: 1 }
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    /// Runs `task(i)` for `i in 0..n`. A panicking task is reported as a
    /// [`TaskFailure`] without affecting the others.
    pub fn run<R, F>(&self, n: usize, task: F) -> Vec<std::result::Result<R, TaskFailure>>
    where
        R: Send,
        F: Fn(usize) -> R + Sync,
    {
        let guarded = |i: usize| {
            panic::catch_unwind(AssertUnwindSafe(|| task(i))).map_err(|payload| TaskFailure {
                index: i,
                message: panic_message(payload.as_ref()),
            })
        };
        if self.workers == 1 || n <= 1 {
            return (0..n).map(guarded).collect();
        }
        let next = AtomicUsize::new(0);
        let slots: Mutex<Vec<Option<std::result::Result<R, TaskFailure>>>> =
            Mutex::new((0..n).map(|_| None).collect());
        thread::scope(|s| {
            for _ in 0..self.workers.min(n) {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    if i >= n {
                        break;
                    }
                    let r = guarded(i);
                    slots.lock().expect("result slots")[i] = Some(r);
                });
            }
        });
        slots
            .into_inner()
            .expect("result slots")
            .into_iter()
            .map(|r| r.expect("every task index is claimed once"))
            .collect()
    }

    /// Like [`run`](Self::run) but fails on the first (lowest-index) failure.
    pub fn try_run<R, F>(&self, n: usize, task: F) -> std::result::Result<Vec<R>, TaskFailure>
    where
        R: Send,
        F: Fn(usize) -> R + Sync,
    {
        self.run(n, task).into_iter().collect()
    }
}

fn panic_message(payload: &(dyn std::any::Any + Send)) -> String {
    if let Some(s) = payload.downcast_ref::<&str>() {
        s.to_string()
    } else if let Some(s) = payload.downcast_ref::<String>() {
        s.clone()
    } else {
        "panic".to_string()
    }
}
