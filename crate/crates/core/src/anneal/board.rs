use std::sync::{Condvar, Mutex};

/// Cooperative stop protocol between annealing workers.
pub trait StopSignal: Sync {
    /// Called at each checkpoint `t` (after steps `1..t` completed). Returns
    /// true when the worker should give up.
    fn checkpoint(&self, worker: usize, t: u64) -> bool;
    /// Records a success at step `t`.
    fn post_success(&self, worker: usize, t: u64);
    /// Records that the worker stopped without success.
    fn finish(&self, worker: usize);
}

/// A signal that never stops anybody.
#[derive(Debug, Default, Clone, Copy)]
pub struct NeverStop;

impl StopSignal for NeverStop {
    fn checkpoint(&self, _: usize, _: u64) -> bool {
        false
    }
    fn post_success(&self, _: usize, _: u64) {}
    fn finish(&self, _: usize) {}
}

#[derive(Debug)]
struct BoardState {
    progress: Vec<u64>,
    finished: Vec<bool>,
    success: Vec<Option<u64>>,
}

/// Shared result board with lockstep checkpoints.
///
/// At checkpoint `t` a worker waits until every other worker has reached
/// checkpoint `t` or finished, then stops if any other worker succeeded at a
/// step `< t`. The stop decisions, and therefore the outcome, depend only on
/// the workers' seeded trajectories and not on thread scheduling.
#[derive(Debug)]
pub struct Board {
    state: Mutex<BoardState>,
    cv: Condvar,
}

impl Board {
    pub fn new(workers: usize) -> Self {
        Self {
            state: Mutex::new(BoardState {
                progress: vec![0; workers],
                finished: vec![false; workers],
                success: vec![None; workers],
            }),
            cv: Condvar::new(),
        }
    }

    /// `(worker, step)` of every success, by worker index.
    pub fn successes(&self) -> Vec<(usize, u64)> {
        let st = self.state.lock().expect("board lock");
        st.success
            .iter()
            .enumerate()
            .filter_map(|(w, s)| s.map(|t| (w, t)))
            .collect()
    }
}

impl StopSignal for Board {
    fn checkpoint(&self, worker: usize, t: u64) -> bool {
        let mut st = self.state.lock().expect("board lock");
        st.progress[worker] = t;
        self.cv.notify_all();
        loop {
            let ready = (0..st.progress.len())
                .all(|v| v == worker || st.finished[v] || st.progress[v] >= t);
            if ready {
                break;
            }
            st = self.cv.wait(st).expect("board lock");
        }
        st.success
            .iter()
            .enumerate()
            .any(|(v, s)| v != worker && s.is_some_and(|s| s < t))
    }

    fn post_success(&self, worker: usize, t: u64) {
        let mut st = self.state.lock().expect("board lock");
        st.success[worker] = Some(t);
        st.finished[worker] = true;
        self.cv.notify_all();
    }

    fn finish(&self, worker: usize) {
        let mut st = self.state.lock().expect("board lock");
        st.finished[worker] = true;
        self.cv.notify_all();
    }
}
