//! Genetic-algorithm maximisation of black-box rate objectives.
//!
//! Candidates are real vectors inside per-parameter ranges. Simplex
//! variables (e.g. intensity probabilities) are encoded as independent
//! positive weights and normalised when decoded, so crossover and mutation
//! never leave the feasible set. Fitness evaluation within a generation runs
//! in parallel; results are collected in population order, so a fixed seed
//! reproduces the whole trajectory.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum ParamKind {
    Bounded,
    /// Searched uniformly in log10; `min` and `max` of the [`Param`] are
    /// the exponents.
    LogBounded,
    /// Weight normalised together with the other members of `group`.
    SimplexWeight {
        group: String,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub min: f64,
    pub max: f64,
    pub kind: ParamKind,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SearchSpace {
    params: Vec<Param>,
}

impl SearchSpace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bounded(mut self, name: &str, min: f64, max: f64) -> Self {
        self.params.push(Param {
            name: name.to_string(),
            min,
            max,
            kind: ParamKind::Bounded,
        });
        self
    }

    /// Parameter spanning decades, `0 < min <= max`.
    pub fn log_bounded(mut self, name: &str, min: f64, max: f64) -> Self {
        self.params.push(Param {
            name: name.to_string(),
            min: min.log10(),
            max: max.log10(),
            kind: ParamKind::LogBounded,
        });
        self
    }

    /// Adds one weight per name; decoded values in the group sum to 1.
    pub fn simplex(mut self, group: &str, names: &[&str], min_weight: f64) -> Self {
        for name in names {
            self.params.push(Param {
                name: name.to_string(),
                min: min_weight,
                max: 1.0,
                kind: ParamKind::SimplexWeight {
                    group: group.to_string(),
                },
            });
        }
        self
    }

    pub fn params(&self) -> &[Param] {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.params.is_empty() {
            return Err(Error::invalid("search_space", "no parameters"));
        }
        for p in &self.params {
            if !(p.min <= p.max) || !p.min.is_finite() || !p.max.is_finite() {
                return Err(Error::invalid(
                    &p.name,
                    format!("empty range [{}, {}]", p.min, p.max),
                ));
            }
            if matches!(p.kind, ParamKind::SimplexWeight { .. }) && !(p.min > 0.0) {
                return Err(Error::invalid(
                    &p.name,
                    "simplex weights need a positive minimum",
                ));
            }
        }
        Ok(())
    }

    pub fn midpoint(&self) -> Vec<f64> {
        self.params.iter().map(|p| 0.5 * (p.min + p.max)).collect()
    }

    /// Whether raw genes (log exponents for log-scaled parameters) lie in range.
    pub fn contains(&self, genes: &[f64]) -> bool {
        genes.len() == self.params.len()
            && self
                .params
                .iter()
                .zip(genes)
                .all(|(p, &g)| g >= p.min && g <= p.max)
    }

    /// Maps raw genes to parameter values, normalising simplex groups.
    pub fn decode(&self, genes: &[f64]) -> Point {
        let mut values = genes.to_vec();
        for (i, p) in self.params.iter().enumerate() {
            if p.kind == ParamKind::LogBounded {
                values[i] = 10f64.powf(genes[i]);
            }
            if let ParamKind::SimplexWeight { group } = &p.kind {
                let total: f64 = self
                    .params
                    .iter()
                    .zip(genes)
                    .filter(|(q, _)| matches!(&q.kind, ParamKind::SimplexWeight { group: g } if g == group))
                    .map(|(_, &w)| w)
                    .sum();
                values[i] = genes[i] / total;
            }
        }
        Point {
            names: self.params.iter().map(|p| p.name.clone()).collect(),
            values,
        }
    }
}

/// Decoded parameter values, addressable by name.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    names: Vec<String>,
    values: Vec<f64>,
}

impl Point {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.values[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.names
            .iter()
            .map(String::as_str)
            .zip(self.values.iter().copied())
    }
}

impl std::ops::Index<&str> for Point {
    type Output = f64;

    fn index(&self, name: &str) -> &f64 {
        let i = self
            .names
            .iter()
            .position(|n| n == name)
            .unwrap_or_else(|| panic!("no parameter named `{name}`"));
        &self.values[i]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaSettings {
    pub population_size: usize,
    pub max_generations: usize,
    /// Stop after this many generations without a strict improvement.
    pub stagnation_limit: usize,
    pub tournament_size: usize,
    /// Probability that a child is produced by uniform crossover rather
    /// than copied from the first parent.
    pub crossover_prob: f64,
    /// Per-gene Gaussian mutation probability.
    pub mutation_prob: f64,
    /// Mutation standard deviation as a fraction of each parameter's range.
    pub mutation_sigma_fraction: f64,
    pub elite_count: usize,
    pub seed: u64,
}

impl Default for GaSettings {
    fn default() -> Self {
        Self {
            population_size: 50,
            max_generations: 200,
            stagnation_limit: 30,
            tournament_size: 3,
            crossover_prob: 0.7,
            mutation_prob: 0.1,
            mutation_sigma_fraction: 0.1,
            elite_count: 2,
            seed: 1,
        }
    }
}

impl GaSettings {
    pub fn validate(&self) -> Result<()> {
        if self.population_size < self.elite_count + 2 {
            return Err(Error::invalid(
                "population_size",
                format!(
                    "{} must be at least elite_count + 2 = {}",
                    self.population_size,
                    self.elite_count + 2
                ),
            ));
        }
        if self.tournament_size == 0 {
            return Err(Error::invalid("tournament_size", "must be at least 1"));
        }
        for (name, v) in [
            ("crossover_prob", self.crossover_prob),
            ("mutation_prob", self.mutation_prob),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(name, format!("{v} lies outside [0, 1]")));
            }
        }
        if !(self.mutation_sigma_fraction >= 0.0) {
            return Err(Error::invalid(
                "mutation_sigma_fraction",
                "must be non-negative",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationResult {
    pub best: Point,
    pub best_genes: Vec<f64>,
    pub best_rate: f64,
    /// Best fitness after each generation, starting with the initial one.
    pub history: Vec<f64>,
    pub evaluations: usize,
}

fn sanitize(v: f64) -> f64 {
    if v.is_finite() && v > 0.0 {
        v
    } else {
        0.0
    }
}

/// Maximises `objective` over `space`.
///
/// The objective must be total: infeasible points should return 0 (negative
/// or non-finite values are treated as 0). The space midpoint is part of the
/// initial population, so the result is never worse than the midpoint.
pub fn optimize<F>(
    objective: F,
    space: &SearchSpace,
    settings: &GaSettings,
) -> Result<OptimizationResult>
where
    F: Fn(&Point) -> f64 + Sync,
{
    space.validate()?;
    settings.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let params = space.params();
    let unit = Normal::new(0.0, 1.0).expect("unit normal");

    let mut population: Vec<Vec<f64>> = Vec::with_capacity(settings.population_size);
    population.push(space.midpoint());
    while population.len() < settings.population_size {
        population.push(
            params
                .iter()
                .map(|p| {
                    if p.max > p.min {
                        rng.random_range(p.min..=p.max)
                    } else {
                        p.min
                    }
                })
                .collect(),
        );
    }

    let evaluate = |pop: &[Vec<f64>]| -> Vec<f64> {
        pop.par_iter()
            .map(|genes| sanitize(objective(&space.decode(genes))))
            .collect()
    };

    let mut fitness = evaluate(&population);
    let mut evaluations = population.len();
    let best_of = |fit: &[f64]| -> usize {
        // first index wins ties
        let mut best = 0;
        for (i, &f) in fit.iter().enumerate() {
            if f > fit[best] {
                best = i;
            }
        }
        best
    };
    let mut best_idx = best_of(&fitness);
    let mut best_genes = population[best_idx].clone();
    let mut best_rate = fitness[best_idx];
    let mut history = vec![best_rate];
    let mut stagnant = 0;

    for _ in 0..settings.max_generations {
        if stagnant >= settings.stagnation_limit {
            break;
        }
        let mut order: Vec<usize> = (0..population.len()).collect();
        order.sort_by(|&a, &b| fitness[b].total_cmp(&fitness[a]).then(a.cmp(&b)));

        let mut next: Vec<Vec<f64>> = order
            .iter()
            .take(settings.elite_count)
            .map(|&i| population[i].clone())
            .collect();
        let mut next_fitness: Vec<f64> = order
            .iter()
            .take(settings.elite_count)
            .map(|&i| fitness[i])
            .collect();

        let tournament = |rng: &mut ChaCha8Rng| -> usize {
            let mut winner = rng.random_range(0..population.len());
            for _ in 1..settings.tournament_size {
                let c = rng.random_range(0..population.len());
                if fitness[c] > fitness[winner] {
                    winner = c;
                }
            }
            winner
        };

        let mut children = Vec::with_capacity(settings.population_size - next.len());
        while next.len() + children.len() < settings.population_size {
            let a = tournament(&mut rng);
            let b = tournament(&mut rng);
            let mut child = population[a].clone();
            if rng.random::<f64>() < settings.crossover_prob {
                for (gene, &other) in child.iter_mut().zip(&population[b]) {
                    if rng.random::<bool>() {
                        *gene = other;
                    }
                }
            }
            for (gene, p) in child.iter_mut().zip(params) {
                if rng.random::<f64>() < settings.mutation_prob {
                    let sigma = settings.mutation_sigma_fraction * (p.max - p.min);
                    *gene = (*gene + sigma * unit.sample(&mut rng)).clamp(p.min, p.max);
                }
            }
            children.push(child);
        }
        let child_fitness = evaluate(&children);
        evaluations += children.len();
        next.extend(children);
        next_fitness.extend(child_fitness);
        population = next;
        fitness = next_fitness;

        best_idx = best_of(&fitness);
        if fitness[best_idx] > best_rate {
            best_rate = fitness[best_idx];
            best_genes = population[best_idx].clone();
            stagnant = 0;
        } else {
            stagnant += 1;
        }
        history.push(best_rate);
    }

    Ok(OptimizationResult {
        best: space.decode(&best_genes),
        best_genes,
        best_rate,
        history,
        evaluations,
    })
}
