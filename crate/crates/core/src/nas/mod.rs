//! Bayesian-optimization search over hidden-layer depth and width.
//!
//! A Gaussian process with a squared-exponential kernel models the objective
//! over normalized configuration coordinates; expected improvement is
//! maximized by enumerating the candidate list.

mod gp;
mod space;

use std::collections::BTreeSet;
use std::time::Instant;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

pub use gp::{GaussianProcess, LENGTH_SCALE, NOISE};
pub use space::{Candidate, SearchSpace, MAX_CANDIDATES};

use crate::error::{Error, Result};
use crate::eval::DEFAULT_EPSILON;
use crate::models::{evaluate, fit, ArchKind, ArchitectureSpec, PreparedSample};
use crate::nn::{LossKind, TrainConfig};

pub const INITIAL_DESIGN: usize = 8;

/// Smallest `n` with `1 - (1 - p)^n >= confidence`: the number of uniform
/// draws needed to hit the top `p` fraction with the given confidence.
///
/// For `p = 0.05` and `confidence = 0.95` this is 59, since
/// `ln(0.05) / ln(0.95) = 58.4`.
pub fn min_trials_for_top_fraction(p: f64, confidence: f64) -> Result<usize> {
    if !(p > 0.0 && p < 1.0 && confidence > 0.0 && confidence < 1.0) {
        return Err(Error::InvalidParameter(
            "p and confidence must lie in (0, 1)".into(),
        ));
    }
    let mut n = ((1.0 - confidence).ln() / (1.0 - p).ln()).floor().max(1.0) as usize;
    while 1.0 - (1.0 - p).powi(n as i32) < confidence {
        n += 1;
    }
    while n > 1 && 1.0 - (1.0 - p).powi(n as i32 - 1) >= confidence {
        n -= 1;
    }
    Ok(n)
}

/// What an objective reports for one configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialOutcome {
    pub objective: f64,
    pub mape: Option<f64>,
    pub r2: Option<f64>,
}

impl TrialOutcome {
    pub fn objective_only(objective: f64) -> Self {
        TrialOutcome {
            objective,
            mape: None,
            r2: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialResult {
    pub config: Candidate,
    pub objective: f64,
    pub mape: Option<f64>,
    pub r2: Option<f64>,
    pub seed: u64,
    pub wall_time_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    pub best: TrialResult,
    /// Trials in evaluation order.
    pub log: Vec<TrialResult>,
}

fn run_trial<F>(objective: &mut F, config: &Candidate, seed: u64) -> Result<TrialResult>
where
    F: FnMut(&Candidate, u64) -> Result<TrialOutcome>,
{
    let start = Instant::now();
    let out = objective(config, seed)?;
    if !out.objective.is_finite() || out.objective < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "objective for {config} is {}, expected finite and non-negative",
            out.objective
        )));
    }
    Ok(TrialResult {
        config: config.clone(),
        objective: out.objective,
        mape: out.mape,
        r2: out.r2,
        seed,
        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

fn finish(log: Vec<TrialResult>) -> SearchOutcome {
    // First minimum in log order, so ties resolve deterministically.
    let best = log
        .iter()
        .fold(None::<&TrialResult>, |b, t| match b {
            Some(b) if b.objective <= t.objective => Some(b),
            _ => Some(t),
        })
        .expect("log is non-empty")
        .clone();
    SearchOutcome { best, log }
}

fn check_budget(budget: usize) -> Result<()> {
    if budget < 2 {
        return Err(Error::InvalidParameter(format!(
            "budget must be at least 2, got {budget}"
        )));
    }
    Ok(())
}

/// GP + expected-improvement search. `objective` receives the configuration
/// and `seed`. When the budget covers the whole space every configuration is
/// evaluated once, in enumeration order.
pub fn bayes_search<F>(
    space: &SearchSpace,
    mut objective: F,
    budget: usize,
    seed: u64,
) -> Result<SearchOutcome>
where
    F: FnMut(&Candidate, u64) -> Result<TrialOutcome>,
{
    space.validate()?;
    check_budget(budget)?;
    let candidates = space.candidates(seed);
    if budget >= space.size() {
        let log = candidates
            .iter()
            .map(|c| run_trial(&mut objective, c, seed))
            .collect::<Result<_>>()?;
        return Ok(finish(log));
    }
    let budget = budget.min(candidates.len());
    let coords: Vec<Vec<f64>> = candidates.iter().map(|c| space.encode(c)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut evaluated = BTreeSet::new();
    let mut log = Vec::with_capacity(budget);

    let mut observed = Vec::with_capacity(budget);
    for i in sample(&mut rng, candidates.len(), INITIAL_DESIGN.min(budget)) {
        evaluated.insert(i);
        observed.push(i);
        log.push(run_trial(&mut objective, &candidates[i], seed)?);
    }

    while log.len() < budget {
        let x: Vec<Vec<f64>> = observed.iter().map(|&i| coords[i].clone()).collect();
        let y: Vec<f64> = log.iter().map(|t| t.objective).collect();
        let best = y.iter().copied().fold(f64::INFINITY, f64::min);
        let gp = GaussianProcess::fit(&x, &y)?;
        let open: Vec<usize> = (0..candidates.len())
            .filter(|i| !evaluated.contains(i))
            .collect();
        let queries: Vec<Vec<f64>> = open.iter().map(|&i| coords[i].clone()).collect();
        let ei = gp.expected_improvement(&queries, best);
        let mut pick = 0;
        for (j, &v) in ei.iter().enumerate() {
            if v > ei[pick] {
                pick = j;
            }
        }
        let i = open[pick];
        evaluated.insert(i);
        observed.push(i);
        log.push(run_trial(&mut objective, &candidates[i], seed)?);
    }
    Ok(finish(log))
}

/// Uniform sampling without replacement at the same budget, as a baseline.
pub fn random_search<F>(
    space: &SearchSpace,
    mut objective: F,
    budget: usize,
    seed: u64,
) -> Result<SearchOutcome>
where
    F: FnMut(&Candidate, u64) -> Result<TrialOutcome>,
{
    space.validate()?;
    check_budget(budget)?;
    let candidates = space.candidates(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let log = sample(&mut rng, candidates.len(), budget.min(candidates.len()))
        .into_iter()
        .map(|i| run_trial(&mut objective, &candidates[i], seed))
        .collect::<Result<_>>()?;
    Ok(finish(log))
}

/// Writes the trial log as CSV. Wall time varies between runs, so it is only
/// filled in when asked for.
pub fn trial_log_csv(log: &[TrialResult], include_wall_time: bool) -> String {
    let opt = |v: Option<f64>| v.map_or_else(String::new, |v| v.to_string());
    let mut out = String::from("trial,layers,neurons,objective,mape,r2,seed,wall_time_ms\n");
    for (i, t) in log.iter().enumerate() {
        let neurons: Vec<String> = t.config.neurons.iter().map(|n| n.to_string()).collect();
        let wall = if include_wall_time {
            format!("{:.3}", t.wall_time_ms)
        } else {
            String::new()
        };
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            i,
            t.config.layers(),
            neurons.join("-"),
            t.objective,
            opt(t.mape),
            opt(t.r2),
            t.seed,
            wall
        ));
    }
    out
}

/// Best trial found at one depth.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DepthRow {
    pub layers: usize,
    pub best: TrialResult,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArchSearchReport {
    pub kind: ArchKind,
    pub rows: Vec<DepthRow>,
    /// All trials, stratum by stratum.
    pub log: Vec<TrialResult>,
}

impl ArchSearchReport {
    /// Global best across depths.
    pub fn best(&self) -> &DepthRow {
        self.rows.iter().fold(&self.rows[0], |b, r| {
            if r.best.objective < b.best.objective {
                r
            } else {
                b
            }
        })
    }

    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(String::new, |v| v.to_string());
        let mut out = String::from("architecture,hidden_layers,neurons,mse,mape,r2\n");
        for r in &self.rows {
            let neurons: Vec<String> = r
                .best
                .config
                .neurons
                .iter()
                .map(|n| n.to_string())
                .collect();
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                self.kind,
                r.layers,
                neurons.join("-"),
                r.best.objective,
                opt(r.best.mape),
                opt(r.best.r2)
            ));
        }
        out
    }
}

/// Training inputs shared by every trial of an architecture search.
pub struct SearchData<'a> {
    pub train: &'a [PreparedSample],
    pub validation: &'a [PreparedSample],
    pub n_types: usize,
    pub train_config: &'a TrainConfig,
    pub loss: &'a LossKind,
}

/// Runs one search per depth of `space`, splitting `budget` evenly (earlier
/// depths take the remainder). Each trial trains a fresh model initialized
/// from `seed` and scores its validation MSE.
pub fn run_architecture_search(
    kind: ArchKind,
    data: &SearchData<'_>,
    space: &SearchSpace,
    budget: usize,
    seed: u64,
) -> Result<ArchSearchReport> {
    space.validate_for(kind)?;
    let depths: Vec<usize> = (space.layers_range.0..=space.layers_range.1).collect();
    if budget < 2 * depths.len() {
        return Err(Error::InvalidParameter(format!(
            "budget {budget} leaves fewer than 2 trials for some of the {} depths",
            depths.len()
        )));
    }
    let mut objective = |c: &Candidate, s: u64| -> Result<TrialOutcome> {
        let spec = ArchitectureSpec::new(kind, c.neurons.clone(), data.n_types);
        let (model, _) = fit(spec, data.train, data.train_config, data.loss, s)?;
        let report = evaluate(&model, data.validation, DEFAULT_EPSILON)?;
        Ok(TrialOutcome {
            objective: report.mse,
            mape: Some(report.mape),
            r2: report.r2,
        })
    };
    let mut rows = Vec::with_capacity(depths.len());
    let mut log = Vec::with_capacity(budget);
    for (i, &layers) in depths.iter().enumerate() {
        let share = budget / depths.len() + usize::from(i < budget % depths.len());
        let outcome = bayes_search(&space.at_depth(layers), &mut objective, share, seed)?;
        rows.push(DepthRow {
            layers,
            best: outcome.best,
        });
        log.extend(outcome.log);
    }
    Ok(ArchSearchReport { kind, rows, log })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{build_dataset, split_train_test};
    use crate::models::{prepare, Model};
    use crate::synth::{generate, SynthParams};

    fn quadratic(c: &Candidate, _: u64) -> Result<TrialOutcome> {
        let l = c.layers() as f64;
        let n = c.neurons[0] as f64;
        Ok(TrialOutcome::objective_only(
            (l - 4.0).powi(2) + 0.1 * (n - 11.0).powi(2),
        ))
    }

    fn flat_space() -> SearchSpace {
        SearchSpace {
            layers_range: (1, 5),
            neurons_range: (1, 15),
            per_layer_neurons: false,
        }
    }

    #[test]
    fn trial_count_formula() {
        assert_eq!(min_trials_for_top_fraction(0.5, 0.5).unwrap(), 1);
        assert_eq!(min_trials_for_top_fraction(0.05, 0.95).unwrap(), 59);
        assert_eq!(min_trials_for_top_fraction(0.05, 0.99).unwrap(), 90);
        assert!(min_trials_for_top_fraction(0.0, 0.5).is_err());
        assert!(min_trials_for_top_fraction(0.5, 1.0).is_err());
    }

    #[test]
    fn exhaustive_when_budget_covers_space() {
        let space = SearchSpace {
            layers_range: (1, 2),
            neurons_range: (1, 3),
            per_layer_neurons: false,
        };
        let out = bayes_search(&space, quadratic, 10, 0).unwrap();
        assert_eq!(out.log.len(), 6);
        assert_eq!(out.best.config.neurons, vec![3, 3]);
    }

    #[test]
    fn log_invariants() {
        let out = bayes_search(&flat_space(), quadratic, 30, 5).unwrap();
        assert_eq!(out.log.len(), 30);
        let distinct: BTreeSet<_> = out.log.iter().map(|t| &t.config).collect();
        assert_eq!(distinct.len(), 30);
        let min = out
            .log
            .iter()
            .map(|t| t.objective)
            .fold(f64::INFINITY, f64::min);
        assert_eq!(out.best.objective, min);
    }

    #[test]
    fn constant_objective_uses_full_budget() {
        let out = bayes_search(
            &flat_space(),
            |_, _| Ok(TrialOutcome::objective_only(1.0)),
            12,
            1,
        )
        .unwrap();
        assert_eq!(out.log.len(), 12);
        assert_eq!(out.best.objective, 1.0);
    }

    #[test]
    fn finds_quadratic_minimum_and_beats_random() {
        let (mut hits, mut bo_sum, mut rs_sum) = (0, 0.0, 0.0);
        for seed in 0..20 {
            let bo = bayes_search(&flat_space(), quadratic, 50, seed).unwrap();
            hits += usize::from(bo.best.config.neurons == vec![11; 4]);
            bo_sum += bo.best.objective;
            rs_sum += random_search(&flat_space(), quadratic, 50, seed)
                .unwrap()
                .best
                .objective;
        }
        assert!(hits >= 19, "{hits}/20");
        assert!(bo_sum <= rs_sum);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(bayes_search(&flat_space(), quadratic, 1, 0).is_err());
        assert!(bayes_search(
            &flat_space(),
            |_, _| Ok(TrialOutcome::objective_only(f64::NAN)),
            5,
            0
        )
        .is_err());
    }

    #[test]
    fn csv_leaves_wall_time_blank_by_default() {
        let out = bayes_search(&flat_space(), quadratic, 3, 0).unwrap();
        let csv = trial_log_csv(&out.log, false);
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.lines().skip(1).all(|l| l.ends_with(',')));
        assert!(!trial_log_csv(&out.log, true)
            .lines()
            .nth(1)
            .unwrap()
            .ends_with(','));
    }

    #[test]
    fn architecture_search_one_row_per_depth() {
        let grid = generate(&SynthParams {
            rows: 5,
            cols: 5,
            t_steps: 30,
            temporal_coeffs: vec![0.6],
            base_rate: 6.0,
            seed: 2,
            ..SynthParams::default()
        })
        .unwrap();
        let (train, test) = split_train_test(&build_dataset(&grid).unwrap(), 0).unwrap();
        let kind = ArchKind::Gtwnn;
        let train = prepare(&grid, &train.samples, kind).unwrap();
        let test = prepare(&grid, &test.samples, kind).unwrap();
        let cfg = TrainConfig {
            epochs: 4,
            adam: crate::nn::AdamConfig {
                alpha: 1e-2,
                ..Default::default()
            },
            ..Default::default()
        };
        let loss = LossKind::PlainMse;
        let data = SearchData {
            train: &train,
            validation: &test,
            n_types: 2,
            train_config: &cfg,
            loss: &loss,
        };
        let space = SearchSpace {
            layers_range: (1, 3),
            neurons_range: (2, 6),
            per_layer_neurons: false,
        };
        let report = run_architecture_search(kind, &data, &space, 6, 9).unwrap();
        assert_eq!(report.rows.len(), 3);
        assert_eq!(report.log.len(), 6);
        assert_eq!(report.to_csv().lines().count(), 4);
        let again = run_architecture_search(kind, &data, &space, 6, 9).unwrap();
        assert_eq!(
            trial_log_csv(&report.log, false),
            trial_log_csv(&again.log, false)
        );
        assert_eq!(report.to_csv(), again.to_csv());

        let untrained = Model::build(ArchitectureSpec::new(kind, vec![2], 2), 9).unwrap();
        let base = evaluate(&untrained, &test, DEFAULT_EPSILON).unwrap().mse;
        assert!(
            report.best().best.objective <= base / 2.0,
            "{} vs {base}",
            report.best().best.objective
        );
        assert!(run_architecture_search(kind, &data, &space, 5, 9).is_err());
    }
}
