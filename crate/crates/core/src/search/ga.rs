//! Generational genetic algorithm over feature bit strings.
//!
//! Each generation keeps the top `elite_fraction` individuals unchanged and
//! fills the rest with children: parents are drawn by stochastic uniform
//! sampling on a rank-linear line (rank 1 of N owns a segment of length N,
//! rank N a segment of length 1; one random offset, equally spaced pointers),
//! paired after a shuffle, recombined by uniform crossover with probability
//! `crossover_rate`, and mutated bit by bit with probability `mutation_rate`.
//! The initial population is uniform random bits plus one all-ones string.

use super::{cmp_scores, Evaluator, FeatureSubset, SearchError, TrainingSet};
use crate::parallel;
use crate::rng::rng_from;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::HashMap;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaConfig {
    #[serde(default = "d_population")]
    pub population: usize,
    #[serde(default = "d_generations")]
    pub generations: usize,
    #[serde(default = "d_crossover")]
    pub crossover_rate: f64,
    #[serde(default = "d_mutation")]
    pub mutation_rate: f64,
    #[serde(default = "d_elite")]
    pub elite_fraction: f64,
    #[serde(default)]
    pub seed: u64,
}

fn d_population() -> usize {
    100
}
fn d_generations() -> usize {
    100
}
fn d_crossover() -> f64 {
    0.8
}
fn d_mutation() -> f64 {
    0.01
}
fn d_elite() -> f64 {
    0.10
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population: d_population(),
            generations: d_generations(),
            crossover_rate: d_crossover(),
            mutation_rate: d_mutation(),
            elite_fraction: d_elite(),
            seed: 0,
        }
    }
}

impl GaConfig {
    pub fn elite_count(&self) -> usize {
        (self.elite_fraction * self.population as f64).round() as usize
    }

    pub fn validate(&self) -> Result<(), SearchError> {
        let rate_ok = |r: f64| (0.0..=1.0).contains(&r);
        if !rate_ok(self.crossover_rate) || !rate_ok(self.mutation_rate) || !rate_ok(self.elite_fraction) {
            return Err(SearchError::InvalidConfig("rates must lie in [0, 1]".into()));
        }
        if self.population < 2 {
            return Err(SearchError::InvalidConfig("population must be at least 2".into()));
        }
        let e = self.elite_count();
        if e < 1 || e >= self.population {
            return Err(SearchError::InvalidConfig(format!(
                "elite count {e} must be in [1, population)"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaResult {
    pub subset: FeatureSubset,
    pub score: f64,
    /// Best score in the initial population, then after each generation.
    pub history: Vec<f64>,
    /// Distinct subsets scored.
    pub evaluations: usize,
    pub initial_best: (FeatureSubset, f64),
}

struct Scorer<'a> {
    data: &'a TrainingSet,
    eval: &'a dyn Evaluator,
    cache: HashMap<FeatureSubset, f64>,
}

impl Scorer<'_> {
    fn score_all(&mut self, pop: &[FeatureSubset]) -> Vec<f64> {
        let mut fresh: Vec<FeatureSubset> = Vec::new();
        for ind in pop {
            if !self.cache.contains_key(ind) && !fresh.contains(ind) {
                fresh.push(ind.clone());
            }
        }
        let (data, eval) = (self.data, self.eval);
        let scores = parallel::map(&fresh, |s| eval.score(data, s));
        self.cache.extend(fresh.into_iter().zip(scores));
        pop.iter().map(|s| self.cache[s]).collect()
    }
}

/// Population indices ordered best first; equal scores keep index order.
fn rank_order(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| cmp_scores(scores[a], scores[b]).then(a.cmp(&b)));
    order
}

/// Stochastic uniform sampling of `n` parents on rank-linear segments.
fn stochastic_uniform(order: &[usize], n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let p = order.len();
    let total = (p * (p + 1) / 2) as f64;
    let step = total / n as f64;
    let mut pointer = rng.gen::<f64>() * step;
    let mut picked = Vec::with_capacity(n);
    let mut rank = 0;
    let mut edge = p as f64;
    for _ in 0..n {
        while pointer >= edge && rank + 1 < p {
            rank += 1;
            edge += (p - rank) as f64;
        }
        picked.push(order[rank]);
        pointer += step;
    }
    picked
}

fn uniform_crossover(a: &FeatureSubset, b: &FeatureSubset, rng: &mut ChaCha8Rng) -> (FeatureSubset, FeatureSubset) {
    let mut c1 = a.clone();
    let mut c2 = b.clone();
    for i in 0..a.len() {
        if !rng.gen::<bool>() {
            c1.set(i, b.contains(i));
            c2.set(i, a.contains(i));
        }
    }
    (c1, c2)
}

fn mutate(s: &mut FeatureSubset, rate: f64, rng: &mut ChaCha8Rng) {
    if rate == 0.0 {
        return;
    }
    for i in 0..s.len() {
        if rng.gen::<f64>() < rate {
            s.toggle(i);
        }
    }
}

pub fn ga_select(data: &TrainingSet, eval: &dyn Evaluator, cfg: &GaConfig) -> Result<GaResult, SearchError> {
    cfg.validate()?;
    let d = data.n_features();
    let p = cfg.population;
    let n_elite = cfg.elite_count();
    let mut rng = rng_from(cfg.seed);
    let mut scorer = Scorer {
        data,
        eval,
        cache: HashMap::new(),
    };

    let mut pop: Vec<FeatureSubset> = Vec::with_capacity(p);
    pop.push(FeatureSubset::full(d));
    while pop.len() < p {
        let bits: Vec<bool> = (0..d).map(|_| rng.gen::<bool>()).collect();
        pop.push(FeatureSubset::from_bools(&bits));
    }
    let mut scores = scorer.score_all(&pop);
    let mut order = rank_order(&scores);
    let mut best = (pop[order[0]].clone(), scores[order[0]]);
    let initial_best = best.clone();
    let mut history = vec![best.1];

    for _ in 0..cfg.generations {
        let mut next: Vec<FeatureSubset> = order[..n_elite].iter().map(|&i| pop[i].clone()).collect();
        let n_children = p - n_elite;
        let n_pairs = n_children.div_ceil(2);
        let mut parents = stochastic_uniform(&order, 2 * n_pairs, &mut rng);
        parents.shuffle(&mut rng);
        for pair in parents.chunks(2) {
            let (a, b) = (&pop[pair[0]], &pop[pair[1]]);
            let (mut c1, mut c2) = if rng.gen::<f64>() < cfg.crossover_rate {
                uniform_crossover(a, b, &mut rng)
            } else {
                (a.clone(), b.clone())
            };
            mutate(&mut c1, cfg.mutation_rate, &mut rng);
            mutate(&mut c2, cfg.mutation_rate, &mut rng);
            next.push(c1);
            if next.len() < p {
                next.push(c2);
            }
        }
        pop = next;
        scores = scorer.score_all(&pop);
        order = rank_order(&scores);
        if cmp_scores(scores[order[0]], best.1) == Ordering::Less {
            best = (pop[order[0]].clone(), scores[order[0]]);
        }
        history.push(best.1);
    }

    Ok(GaResult {
        subset: best.0,
        score: best.1,
        history,
        evaluations: scorer.cache.len(),
        initial_best,
    })
}
