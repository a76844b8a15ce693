//! Rayon drivers. Work is split at fixed boundaries and reduced in index
//! order, so results do not depend on the worker count.

use rayon::prelude::*;
use spillover_core::markov::count_transitions_in;
use spillover_core::synth::{
    assemble, calibration_replicate, check_calibration, tabulate, CalibrationMethod, CouplingParams, FprTable,
    SyntheticPanel,
};
use spillover_core::{BootstrapPlan, Error as CoreError, SequenceSet, SpilloverReport, TransitionTable};

use crate::error::{Error, Result};

/// Dyads per counting task.
const CHUNK: usize = 4096;

/// Runs `f` on a pool of `workers` threads; `None` uses rayon's default.
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        if n == 0 {
            return Err(Error::Config("workers must be >= 1".to_string()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::Internal(e.to_string()))?;
    Ok(pool.install(f))
}

pub fn par_count_transitions(seqs: &SequenceSet) -> Result<TransitionTable> {
    if seqs.n_windows() < 2 {
        return Err(CoreError::TooFewWindows(seqs.n_windows()).into());
    }
    let n = seqs.len();
    let empty = TransitionTable::empty(seqs.category(), seqs.n_windows() as u64);
    let parts: Vec<TransitionTable> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| count_transitions_in(seqs, c * CHUNK..((c + 1) * CHUNK).min(n)))
        .collect();
    Ok(parts.iter().fold(empty, |acc, t| acc.merge(t)))
}

pub fn par_bootstrap(seqs: &SequenceSet, replicates: usize, seed: u64, level: f64) -> Result<SpilloverReport> {
    BootstrapPlan::check_replicates(replicates)?;
    let plan = BootstrapPlan::new(seqs, seed)?;
    let reps: Vec<_> = (0..replicates as u64)
        .into_par_iter()
        .map(|b| plan.replicate(b))
        .collect();
    Ok(plan.summarize(&reps, level)?)
}

pub fn par_generate_panel(params: &CouplingParams) -> Result<SyntheticPanel> {
    params.validate()?;
    let w = params.n_windows;
    let mut states = vec![spillover_core::JointState::at; params.n_dyads * w];
    states
        .par_chunks_mut(w)
        .enumerate()
        .for_each(|(k, chunk)| params.dyad_states(k, chunk));
    Ok(SyntheticPanel {
        sequences: assemble(params, states)?,
        clamped: params.clamps(),
    })
}

pub fn par_calibration_run(
    params: &CouplingParams,
    replicates: usize,
    method: CalibrationMethod,
    level: f64,
) -> Result<FprTable> {
    check_calibration(params, replicates)?;
    let reports = (0..replicates as u64)
        .into_par_iter()
        .map(|r| calibration_replicate(params, r, method, level))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(tabulate(&reports, method.ci_method(), level))
}
