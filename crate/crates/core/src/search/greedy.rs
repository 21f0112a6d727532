use super::{cmp_scores, Evaluator, FeatureSubset, TrainingSet};
use crate::parallel;
use crate::WORST_SCORE;
use std::cmp::Ordering;

/// Outcome of a greedy search: the final incumbent, its score, and the
/// accepted incumbents in order (the start point first for backward search).
#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub subset: FeatureSubset,
    pub score: f64,
    pub evaluations: usize,
    pub trace: Vec<(FeatureSubset, f64)>,
}

/// Lowest score among `(feature, score)` pairs; ties go to the first.
fn best_move(moves: &[usize], scores: &[f64]) -> Option<(usize, f64)> {
    moves
        .iter()
        .zip(scores)
        .fold(None, |best: Option<(usize, f64)>, (&j, &s)| match best {
            Some((_, bs)) if cmp_scores(s, bs) != Ordering::Less => best,
            _ => Some((j, s)),
        })
}

/// Sequential forward selection from the empty set. Each round adds the
/// feature whose inclusion scores lowest; the search stops when no addition
/// strictly improves the incumbent.
pub fn forward_select(data: &TrainingSet, eval: &dyn Evaluator) -> SearchResult {
    let d = data.n_features();
    let mut inc = FeatureSubset::empty(d);
    let mut inc_score = WORST_SCORE;
    let mut evaluations = 0;
    let mut trace = Vec::new();
    loop {
        let moves: Vec<usize> = (0..d).filter(|&j| !inc.contains(j)).collect();
        if moves.is_empty() {
            break;
        }
        let scores = parallel::map(&moves, |&j| eval.score(data, &inc.with(j)));
        evaluations += moves.len();
        match best_move(&moves, &scores) {
            Some((j, s)) if cmp_scores(s, inc_score) == Ordering::Less => {
                inc.insert(j);
                inc_score = s;
                trace.push((inc.clone(), s));
            }
            _ => break,
        }
    }
    SearchResult {
        subset: inc,
        score: inc_score,
        evaluations,
        trace,
    }
}

/// Sequential backward elimination from the full set. Each round removes the
/// feature whose exclusion scores lowest; the search stops when no removal
/// strictly improves the incumbent.
pub fn backward_eliminate(data: &TrainingSet, eval: &dyn Evaluator) -> SearchResult {
    let d = data.n_features();
    let mut inc = FeatureSubset::full(d);
    let mut inc_score = eval.score(data, &inc);
    let mut evaluations = 1;
    let mut trace = vec![(inc.clone(), inc_score)];
    loop {
        let moves = inc.indices();
        if moves.is_empty() {
            break;
        }
        let scores = parallel::map(&moves, |&j| eval.score(data, &inc.without(j)));
        evaluations += moves.len();
        match best_move(&moves, &scores) {
            Some((j, s)) if cmp_scores(s, inc_score) == Ordering::Less => {
                inc.remove(j);
                inc_score = s;
                trace.push((inc.clone(), s));
            }
            _ => break,
        }
    }
    SearchResult {
        subset: inc,
        score: inc_score,
        evaluations,
        trace,
    }
}
