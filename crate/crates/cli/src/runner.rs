use rapidgate_core::experiments::{JobRunner, SimJob};
use rapidgate_core::spad::CountSummary;
use rayon::prelude::*;

/// Runs independent jobs on a rayon pool; results keep job order.
pub struct ParallelRunner {
    pool: rayon::ThreadPool,
}

impl ParallelRunner {
    /// `jobs == 0` picks one thread per core.
    pub fn new(jobs: usize) -> Self {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build().expect("thread pool");
        Self { pool }
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl JobRunner for ParallelRunner {
    fn run_jobs(&self, jobs: &[SimJob]) -> rapidgate_core::Result<Vec<CountSummary>> {
        self.pool.install(|| jobs.par_iter().map(SimJob::run).collect())
    }
}
