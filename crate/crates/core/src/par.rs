//! Chain orchestration over a rayon pool, with a sequential fallback.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::Config;
use crate::epidemic::fit_epidemic;
use crate::error::Result;
use crate::likelihood::PointPattern;
use crate::mcmc::{run_gibbs, TraceRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Uses rayon when the `parallel` feature is on; sequential otherwise.
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

/// Maps `f` over `items`, preserving order.
pub fn map<T, U, F>(exec: Execution, items: Vec<T>, f: F) -> Vec<U>
where
    T: Send,
    U: Send,
    F: Fn(T) -> U + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            items.into_par_iter().map(f).collect()
        }
        _ => items.into_iter().map(f).collect(),
    }
}

/// RNG for chain `chain` under a master seed: one ChaCha stream per chain.
pub fn chain_rng(seed: u64, chain: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain as u64);
    rng
}

#[derive(Debug, Clone, PartialEq)]
pub struct AcceptRow {
    pub name: String,
    pub attempts: usize,
    pub accepts: usize,
}

impl AcceptRow {
    fn new(name: impl Into<String>, (attempts, accepts): (usize, usize)) -> Self {
        Self {
            name: name.into(),
            attempts,
            accepts,
        }
    }

    pub fn rate(&self) -> f64 {
        if self.attempts == 0 {
            f64::NAN
        } else {
            self.accepts as f64 / self.attempts as f64
        }
    }
}

#[derive(Debug, Clone)]
pub struct ChainRun {
    pub chain: usize,
    pub records: Vec<TraceRecord>,
    pub accept: Vec<AcceptRow>,
    pub n_blocks: usize,
    pub seconds: f64,
}

/// Runs chain `chain` of a config: the epidemic sampler for epidemic
/// models, the general Gibbs sampler otherwise.
pub fn run_chain(y: &PointPattern, cfg: &Config, seed: u64, chain: usize) -> Result<ChainRun> {
    let rng = chain_rng(seed, chain);
    let start = Instant::now();
    let spec = &cfg.spec;
    let (records, accept, n_blocks) = if spec.is_epidemic() {
        let fit = fit_epidemic(y, spec, &cfg.sampler, cfg.epidemic.as_ref(), rng)?;
        let names = ["psi_growth", "psi_b1", "psi_decay"];
        let accept = fit
            .block_accept
            .iter()
            .zip(names)
            .map(|(&c, n)| AcceptRow::new(n, c))
            .collect();
        (fit.records, accept, 1)
    } else {
        let out = run_gibbs(y, spec, &cfg.sampler, rng)?;
        let s = &out.stats;
        let mut accept = vec![
            AcceptRow::new("block", (s.block_attempts, s.block_accepts)),
            AcceptRow::new("block_post_adapt", (s.post_adapt_attempts, s.post_adapt_accepts)),
            AcceptRow::new("single_block", (s.single_attempts, s.single_accepts)),
        ];
        for (b, &c) in s.per_block.iter().enumerate() {
            accept.push(AcceptRow::new(format!("block_{}", b + 1), c));
        }
        for (k, f) in spec.forms.iter().enumerate() {
            for (j, name) in f.param_names().iter().enumerate() {
                if let Some(&c) = s.psi.get(k).and_then(|v| v.get(j)) {
                    accept.push(AcceptRow::new(format!("psi{}_{}", k + 1, name), c));
                }
            }
        }
        (out.records, accept, out.final_state.n_blocks)
    };
    Ok(ChainRun {
        chain,
        records,
        accept,
        n_blocks,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Runs `n` chains with independent streams of `seed`.
pub fn run_chains(
    y: &PointPattern,
    cfg: &Config,
    seed: u64,
    n: usize,
    exec: Execution,
) -> Result<Vec<ChainRun>> {
    map(exec, (0..n).collect(), |c| run_chain(y, cfg, seed, c))
        .into_iter()
        .collect()
}
