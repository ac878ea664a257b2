//! Genetic algorithm: elitism, stochastic uniform selection, arithmetic
//! crossover and adaptive feasible mutation.

mod encoding;
mod operators;

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    evaluate, scenario_price_table, Evaluation, Instance, ScenarioPrices, Solution,
};
use crate::scenarios::ScenarioSet;

pub use encoding::Encoding;
pub use operators::{
    crossover_arithmetic, mutate_adaptive_feasible, rank_scale, select_stochastic_uniform,
    stochastic_uniform,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RecourseMode {
    /// Recourse trades for every scenario are part of the chromosome.
    Full,
    /// All recourse trades are zero.
    NoRecourseTrades,
}

impl RecourseMode {
    pub fn name(self) -> &'static str {
        match self {
            RecourseMode::Full => "full",
            RecourseMode::NoRecourseTrades => "no-recourse-trades",
        }
    }
}

impl std::str::FromStr for RecourseMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(RecourseMode::Full),
            "no-recourse-trades" => Ok(RecourseMode::NoRecourseTrades),
            other => Err(Error::Config {
                key: "recourse_mode".into(),
                message: format!("unknown mode `{other}` (expected full or no-recourse-trades)"),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaConfig {
    pub population: usize,
    pub generations: usize,
    /// Fraction of `population − 1` selected as parents.
    pub selection: f64,
    /// Fraction of the non-elite offspring produced by crossover.
    pub crossover: f64,
    pub elite: usize,
    /// Initial mutation step as a fraction of each gene's range.
    pub initial_step: f64,
    pub step_up: f64,
    pub step_down: f64,
    pub step_floor: f64,
    pub seed: u64,
    pub mode: RecourseMode,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            population: 500,
            generations: 500,
            selection: 0.1,
            crossover: 0.8,
            elite: 1,
            initial_step: 0.05,
            step_up: 1.1,
            step_down: 0.7,
            step_floor: 1e-6,
            seed: 0,
            mode: RecourseMode::Full,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |key: &str, message: &str| {
            Err(Error::Config {
                key: key.into(),
                message: message.into(),
            })
        };
        if self.population < 2 {
            return fail("population", "must be at least 2");
        }
        if self.generations < 1 {
            return fail("generations", "must be at least 1");
        }
        if !(self.selection > 0.0 && self.selection <= 1.0) {
            return fail("selection", "must lie in (0, 1]");
        }
        if !(self.crossover > 0.0 && self.crossover < 1.0) {
            return fail("crossover", "must lie in (0, 1)");
        }
        if self.elite < 1 || self.elite >= self.population {
            return fail("elite", "must be at least 1 and below the population size");
        }
        if !(self.initial_step >= 0.0
            && self.step_floor >= 0.0
            && self.step_up > 0.0
            && self.step_down > 0.0)
        {
            return fail(
                "initial_step",
                "mutation step parameters must be nonnegative",
            );
        }
        Ok(())
    }

    /// `(elite, crossover children, mutants)` per generation.
    pub fn offspring_counts(&self) -> (usize, usize, usize) {
        let rest = self.population - self.elite;
        let cross = ((self.crossover * rest as f64).round() as usize).min(rest);
        (self.elite, cross, rest - cross)
    }

    pub fn parent_count(&self) -> usize {
        ((self.selection * (self.population - 1) as f64).round() as usize).max(2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub generation: usize,
    pub best_fitness: f64,
    pub mean_fitness: f64,
}

#[derive(Debug, Clone)]
pub struct GaResult {
    pub solution: Solution,
    pub chromosome: Vec<f64>,
    pub evaluation: Evaluation,
    pub trace: Vec<TraceRow>,
}

pub fn write_trace_csv(trace: &[TraceRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in trace {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

struct Problem<'a> {
    inst: &'a Instance,
    enc: Encoding,
    prices: Vec<ScenarioPrices>,
    probabilities: &'a [f64],
}

impl Problem<'_> {
    fn fitness(&self, genes: &[f64]) -> Result<f64> {
        Ok(evaluate(
            self.inst,
            &self.enc.decode(genes),
            &self.prices,
            self.probabilities,
        )?
        .fitness)
    }

    fn fitness_all(&self, pop: &[Vec<f64>]) -> Result<Vec<f64>> {
        pop.par_iter().map(|g| self.fitness(g)).collect()
    }
}

/// Minimizes the penalized fitness over the scenario set and returns the
/// best individual ever evaluated.
pub fn run(inst: &Instance, set: &ScenarioSet, cfg: &GaConfig) -> Result<GaResult> {
    cfg.validate()?;
    let problem = Problem {
        inst,
        enc: Encoding::new(inst, cfg.mode, set.len()),
        prices: scenario_price_table(inst, set)?,
        probabilities: &set.probabilities,
    };
    let (lower, upper) = problem.enc.bounds();
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let mut pop: Vec<Vec<f64>> = (0..cfg.population)
        .map(|_| problem.enc.random_individual(inst, &mut rng))
        .collect();
    let mut fit = problem.fitness_all(&pop)?;
    let (n_elite, n_cross, n_mut) = cfg.offspring_counts();
    let n_parents = cfg.parent_count();
    let mut sigma = cfg.initial_step;
    let mut best = min_index(&fit);
    let mut best_fit = fit[best];
    let mut trace = Vec::with_capacity(cfg.generations);

    for generation in 1..=cfg.generations {
        let mut order: Vec<usize> = (0..pop.len()).collect();
        order.sort_by(|&a, &b| fit[a].total_cmp(&fit[b]));
        let parents = select_stochastic_uniform(&fit, n_parents, &mut rng);

        let mut next: Vec<Vec<f64>> = order[..n_elite].iter().map(|&i| pop[i].clone()).collect();
        let mut next_fit: Vec<f64> = order[..n_elite].iter().map(|&i| fit[i]).collect();
        for _ in 0..n_cross {
            let a = parents[rng.random_range(0..parents.len())];
            let b = parents[rng.random_range(0..parents.len())];
            next.push(crossover_arithmetic(&pop[a], &pop[b])?);
        }
        for _ in 0..n_mut {
            let p = parents[rng.random_range(0..parents.len())];
            next.push(mutate_adaptive_feasible(
                &pop[p], sigma, &lower, &upper, &mut rng,
            ));
        }
        next_fit.extend(problem.fitness_all(&next[n_elite..])?);
        pop = next;
        fit = next_fit;

        let gen_best = min_index(&fit);
        sigma *= if fit[gen_best] < best_fit {
            cfg.step_up
        } else {
            cfg.step_down
        };
        best = gen_best;
        best_fit = fit[gen_best];
        sigma = sigma.max(cfg.step_floor);
        trace.push(TraceRow {
            generation,
            best_fitness: fit[gen_best],
            mean_fitness: fit.iter().sum::<f64>() / fit.len() as f64,
        });
    }

    let chromosome = pop[best].clone();
    let solution = problem.enc.decode(&chromosome);
    let evaluation = evaluate(inst, &solution, &problem.prices, problem.probabilities)?;
    Ok(GaResult {
        solution,
        chromosome,
        evaluation,
        trace,
    })
}

fn min_index(fit: &[f64]) -> usize {
    (0..fit.len())
        .min_by(|&a, &b| fit[a].total_cmp(&fit[b]))
        .expect("non-empty population")
}
