use serde::{Deserialize, Serialize};

use super::{MomentEstimate, MomentMethod};
use crate::error::{domain, Result};
use crate::fbm::{FbmSampler, Hurst, SamplerMethod};
use crate::numeric::mc_reduce;
use crate::rng::{stream, Purpose};
use crate::signature::chen_step;
use crate::word::Word;

/// Monte Carlo settings shared by the moment and SDE engines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub mesh_level: u32,
    pub replicates: u64,
    pub seed: u64,
    pub sampler: SamplerMethod,
}

impl McConfig {
    pub fn new(mesh_level: u32, replicates: u64, seed: u64) -> Self {
        McConfig { mesh_level, replicates, seed, sampler: SamplerMethod::Auto }
    }
}

pub const MIN_REPLICATES: u64 = 100;

/// Sample mean and standard error of `∫_{Δ^k} dB^{m,I}` over sampled `B^m`.
pub fn mc_expected_iterated(hurst: Hurst, word: &Word, cfg: &McConfig) -> Result<MomentEstimate> {
    Ok(mc_expected_iterated_many(hurst, std::slice::from_ref(word), cfg)?.remove(0))
}

/// Several words estimated from the same sampled paths.
pub fn mc_expected_iterated_many(hurst: Hurst, words: &[Word], cfg: &McConfig) -> Result<Vec<MomentEstimate>> {
    if cfg.replicates < MIN_REPLICATES {
        return Err(domain(format!(
            "at least {MIN_REPLICATES} replicates required, got {}",
            cfg.replicates
        )));
    }
    if words.iter().any(|w| w.is_empty()) {
        return Err(domain("empty word"));
    }
    let d = words.iter().map(Word::max_letter).max().unwrap_or(1).max(1);
    let sampler = FbmSampler::new(hurst, cfg.mesh_level, d, cfg.sampler)?;
    let letters: Vec<Vec<usize>> = words
        .iter()
        .map(|w| w.letters().iter().map(|l| l - 1).collect())
        .collect();
    let (stats, _) = mc_reduce(cfg.replicates, words.len(), |r, out| {
        let grid = sampler.sample(&mut stream(cfg.seed, Purpose::MomentReplicate, r));
        let mut prefixes: Vec<Vec<f64>> = letters
            .iter()
            .map(|l| {
                let mut p = vec![0.0; l.len() + 1];
                p[0] = 1.0;
                p
            })
            .collect();
        let mut inc = vec![0.0; d];
        for i in 0..grid.cells() {
            for (o, (b, a)) in inc.iter_mut().zip(grid.row(i + 1).iter().zip(grid.row(i))) {
                *o = b - a;
            }
            for (p, l) in prefixes.iter_mut().zip(&letters) {
                chen_step(p, l, &inc);
            }
        }
        out.extend(prefixes.iter().map(|p| p[p.len() - 1]));
        Ok(true)
    })?;
    Ok(words
        .iter()
        .zip(stats)
        .map(|(w, s)| MomentEstimate {
            value: s.mean,
            std_error: s.std_error(),
            method: MomentMethod::MonteCarlo,
            hurst: hurst.value(),
            word: w.clone(),
            mesh_level: Some(cfg.mesh_level),
            replicates: Some(cfg.replicates),
        })
        .collect())
}
