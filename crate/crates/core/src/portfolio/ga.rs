//! Genetic algorithm over household selections under a demand-band
//! constraint (handled by penalty) and a cardinality cap.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::objective::Objective;
use super::partition::Partition;
use super::selection::{SelectionMode, SelectionVector};
use crate::error::{invalid, Error, Result};
use crate::rng::derive_rng;
use crate::stats::median;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaConfig {
    pub population_size: usize,
    pub max_generations: usize,
    pub stall_generations: usize,
    pub tournament_size: usize,
    pub crossover_probability: f64,
    /// Per-gene mutation probability; `1 / N` when absent.
    pub mutation_probability: Option<f64>,
    /// Penalty per kW of band violation; `10 x` the median initial objective
    /// over the band width when absent.
    pub penalty_coefficient: Option<f64>,
    pub max_selected: usize,
    pub elites: usize,
    /// Standard deviation of Gaussian gene mutation (relaxed mode).
    pub relaxed_mutation_sd: f64,
    /// Blend-crossover extension (relaxed mode).
    pub blend_alpha: f64,
    /// Relaxed weights below this are set to zero.
    pub relaxed_floor: f64,
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population_size: 50,
            max_generations: 100,
            stall_generations: 10,
            tournament_size: 3,
            crossover_probability: 0.9,
            mutation_probability: None,
            penalty_coefficient: None,
            max_selected: 100,
            elites: 1,
            relaxed_mutation_sd: 0.1,
            blend_alpha: 0.5,
            relaxed_floor: 0.01,
            seed: 0,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population_size < 2 {
            return Err(invalid("GA population must hold at least two individuals"));
        }
        if self.tournament_size == 0 || self.max_selected == 0 || self.max_generations == 0 {
            return Err(invalid(
                "tournament size, cardinality cap and generations must be positive",
            ));
        }
        if self.elites >= self.population_size {
            return Err(invalid("elites must be fewer than the population"));
        }
        let probs = [Some(self.crossover_probability), self.mutation_probability];
        if probs.iter().flatten().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(invalid("GA probabilities must lie in [0, 1]"));
        }
        if self
            .penalty_coefficient
            .is_some_and(|c| !(c >= 0.0 && c.is_finite()))
        {
            return Err(invalid("penalty coefficient must be non-negative"));
        }
        if !(self.relaxed_mutation_sd > 0.0)
            || !(self.blend_alpha >= 0.0)
            || !(0.0..1.0).contains(&self.relaxed_floor)
        {
            return Err(invalid("relaxed-mode operator settings out of range"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaResult {
    pub selection: SelectionVector,
    pub objective: f64,
    pub expected_demand: f64,
    pub generations: usize,
    /// Distinct selections evaluated.
    pub evaluations: usize,
    /// Best penalized fitness in the population after each generation.
    pub best_fitness_history: Vec<f64>,
}

/// The band and cardinality constraints of one optimization.
#[derive(Debug, Clone)]
struct Constraint<'a> {
    partition: &'a Partition,
    forecasts: &'a [f64],
    max_selected: usize,
    unit: f64,
}

impl<'a> Constraint<'a> {
    fn new(partition: &'a Partition, forecasts: &'a [f64], max_selected: usize) -> Self {
        let positive: Vec<f64> = forecasts.iter().copied().filter(|&f| f > 0.0).collect();
        let unit = if positive.is_empty() {
            1.0
        } else {
            median(&positive)
        };
        Self {
            partition,
            forecasts,
            max_selected,
            unit,
        }
    }

    /// Band violation in kW plus one typical household per selection over
    /// the cap; zero exactly when feasible.
    fn violation(&self, v: &SelectionVector) -> f64 {
        let demand = v.dot(self.forecasts);
        let mut band = self.partition.violation(demand);
        if band == 0.0 && !self.partition.contains(demand) {
            band = f64::EPSILON * self.partition.upper.abs().max(1.0);
        }
        if v.is_empty() {
            band = band.max(self.partition.lower.max(f64::EPSILON));
        }
        band + v.count().saturating_sub(self.max_selected) as f64 * self.unit
    }
}

/// A random selection strictly inside the partition: households are added in
/// random order toward a target drawn uniformly in the band, skipping any
/// that would overshoot; draws that miss the band are rejected. Every other
/// attempt orders households by size-biased keys `u^(1 / f)` so that bands
/// near the cardinality cap stay reachable.
pub fn random_feasible_selection<R: Rng + ?Sized>(
    partition: &Partition,
    forecasts: &[f64],
    max_selected: usize,
    rng: &mut R,
    max_attempts: usize,
) -> Option<SelectionVector> {
    let n = forecasts.len();
    let mut order: Vec<usize> = (0..n).collect();
    for attempt in 0..max_attempts {
        if attempt % 2 == 0 {
            order.shuffle(rng);
        } else {
            // size-biased order; sharper bias on later attempts reaches the top partitions
            let gamma = f64::from(1u32 << ((attempt / 2) % 4));
            let keys: Vec<f64> = forecasts
                .iter()
                .map(|&f| {
                    let u: f64 = rng.random();
                    if f > 0.0 {
                        u.powf(1.0 / f.powf(gamma))
                    } else {
                        0.0
                    }
                })
                .collect();
            order.sort_by(|&a, &b| keys[b].total_cmp(&keys[a]).then(a.cmp(&b)));
        }
        let target = rng.random_range(partition.lower..partition.upper);
        let mut bits = vec![false; n];
        let (mut sum, mut count) = (0.0, 0);
        for &i in &order {
            if sum > target || count == max_selected {
                break;
            }
            if forecasts[i] > 0.0 && sum + forecasts[i] < partition.upper {
                bits[i] = true;
                sum += forecasts[i];
                count += 1;
            }
        }
        let v = SelectionVector::from_bits(&bits);
        if count > 0 && partition.contains(v.dot(forecasts)) {
            return Some(v);
        }
    }
    None
}

struct Evaluator<'a, O: ?Sized> {
    objective: &'a O,
    cache: HashMap<(SelectionMode, Vec<u64>), f64>,
}

impl<'a, O: Objective + ?Sized> Evaluator<'a, O> {
    fn evaluate_all(&mut self, pop: &[SelectionVector]) -> Vec<f64> {
        let mut fresh: Vec<(Vec<u64>, &SelectionVector)> = Vec::new();
        for v in pop {
            let k = v.key();
            if !self.cache.contains_key(&(v.mode(), k.clone()))
                && !fresh.iter().any(|(f, _)| *f == k)
            {
                fresh.push((k, v));
            }
        }
        let objective = self.objective;
        let values: Vec<f64> = fresh
            .par_iter()
            .map(|(_, v)| {
                let x = objective.evaluate(v);
                if x.is_nan() {
                    f64::INFINITY
                } else {
                    x
                }
            })
            .collect();
        for ((k, v), x) in fresh.into_iter().zip(values) {
            self.cache.insert((v.mode(), k), x);
        }
        pop.iter()
            .map(|v| self.cache[&(v.mode(), v.key())])
            .collect()
    }
}

trait Operators {
    fn crossover(
        &self,
        a: &SelectionVector,
        b: &SelectionVector,
        rng: &mut ChaCha8Rng,
    ) -> SelectionVector;
    fn mutate(&self, v: SelectionVector, rate: f64, rng: &mut ChaCha8Rng) -> SelectionVector;
}

struct Binary;

impl Operators for Binary {
    fn crossover(
        &self,
        a: &SelectionVector,
        b: &SelectionVector,
        rng: &mut ChaCha8Rng,
    ) -> SelectionVector {
        let bits: Vec<bool> = a
            .weights()
            .iter()
            .zip(b.weights())
            .map(|(&x, &y)| {
                if rng.random_bool(0.5) {
                    x > 0.0
                } else {
                    y > 0.0
                }
            })
            .collect();
        SelectionVector::from_bits(&bits)
    }

    fn mutate(&self, v: SelectionVector, rate: f64, rng: &mut ChaCha8Rng) -> SelectionVector {
        let bits: Vec<bool> = v
            .weights()
            .iter()
            .map(|&w| (w > 0.0) ^ rng.random_bool(rate))
            .collect();
        SelectionVector::from_bits(&bits)
    }
}

struct Relaxed {
    alpha: f64,
    noise: Normal<f64>,
    floor: f64,
}

impl Relaxed {
    fn finish(&self, w: Vec<f64>) -> SelectionVector {
        let w = w
            .into_iter()
            .map(|x| {
                let x = x.clamp(0.0, 1.0);
                if x < self.floor {
                    0.0
                } else {
                    x
                }
            })
            .collect();
        SelectionVector::relaxed(w).expect("weights clamped to [0, 1]")
    }
}

impl Operators for Relaxed {
    fn crossover(
        &self,
        a: &SelectionVector,
        b: &SelectionVector,
        rng: &mut ChaCha8Rng,
    ) -> SelectionVector {
        let w = a
            .weights()
            .iter()
            .zip(b.weights())
            .map(|(&x, &y)| {
                let (lo, hi) = (x.min(y), x.max(y));
                let d = self.alpha * (hi - lo);
                if hi - lo > 0.0 {
                    rng.random_range(lo - d..=hi + d)
                } else {
                    lo
                }
            })
            .collect();
        self.finish(w)
    }

    fn mutate(&self, v: SelectionVector, rate: f64, rng: &mut ChaCha8Rng) -> SelectionVector {
        let w = v
            .weights()
            .iter()
            .map(|&x| {
                if rng.random_bool(rate) {
                    x + self.noise.sample(rng)
                } else {
                    x
                }
            })
            .collect();
        self.finish(w)
    }
}

fn check_inputs(
    partition: &Partition,
    forecasts: &[f64],
    seeds: &[SelectionVector],
    cfg: &GaConfig,
) -> Result<()> {
    cfg.validate()?;
    if forecasts.is_empty() {
        return Err(invalid("no households to select from"));
    }
    if forecasts.iter().any(|f| !f.is_finite() || *f < 0.0) {
        return Err(invalid("point forecasts must be finite and non-negative"));
    }
    if !(partition.lower < partition.upper) {
        return Err(invalid(
            "partition lower bound must be below its upper bound",
        ));
    }
    if seeds.iter().any(|s| s.len() != forecasts.len()) {
        return Err(invalid(
            "seed selection length does not match the households",
        ));
    }
    Ok(())
}

fn tournament<'p>(
    pop: &'p [SelectionVector],
    fitness: &[f64],
    size: usize,
    rng: &mut ChaCha8Rng,
) -> &'p SelectionVector {
    let mut best = rng.random_range(0..pop.len());
    for _ in 1..size {
        let c = rng.random_range(0..pop.len());
        if fitness[c].total_cmp(&fitness[best]).is_lt() {
            best = c;
        }
    }
    &pop[best]
}

fn run<O: Objective + ?Sized, X: Operators>(
    objective: &O,
    partition: &Partition,
    forecasts: &[f64],
    cfg: &GaConfig,
    mut population: Vec<SelectionVector>,
    ops: &X,
    rng: &mut ChaCha8Rng,
) -> Result<GaResult> {
    let n = forecasts.len();
    let constraint = Constraint::new(partition, forecasts, cfg.max_selected);
    let rate = cfg.mutation_probability.unwrap_or(1.0 / n as f64);
    let mut eval = Evaluator {
        objective,
        cache: HashMap::new(),
    };

    let mut objectives = eval.evaluate_all(&population);
    let penalty = cfg.penalty_coefficient.unwrap_or_else(|| {
        let finite: Vec<f64> = objectives
            .iter()
            .copied()
            .filter(|x| x.is_finite())
            .map(f64::abs)
            .collect();
        let scale = if finite.is_empty() {
            1.0
        } else {
            median(&finite)
        };
        let scale = if scale > 0.0 { scale } else { 1.0 };
        10.0 * scale / partition.width()
    });

    let mut best: Option<(SelectionVector, f64)> = None;
    let record =
        |pop: &[SelectionVector], obj: &[f64], best: &mut Option<(SelectionVector, f64)>| {
            let mut fitness = Vec::with_capacity(pop.len());
            for (v, &o) in pop.iter().zip(obj) {
                let viol = constraint.violation(v);
                fitness.push(o + penalty * viol);
                if viol == 0.0 && o.is_finite() && best.as_ref().is_none_or(|(_, b)| o < *b) {
                    *best = Some((v.clone(), o));
                }
            }
            fitness
        };
    let mut fitness = record(&population, &objectives, &mut best);

    let mut history = Vec::with_capacity(cfg.max_generations);
    let mut stall = 0;
    let mut generations = 0;
    let mut best_fitness = fitness.iter().copied().fold(f64::INFINITY, f64::min);
    while generations < cfg.max_generations && stall < cfg.stall_generations {
        let mut order: Vec<usize> = (0..population.len()).collect();
        order.sort_by(|&a, &b| fitness[a].total_cmp(&fitness[b]));
        let mut next: Vec<SelectionVector> = order[..cfg.elites]
            .iter()
            .map(|&i| population[i].clone())
            .collect();
        while next.len() < cfg.population_size {
            let a = tournament(&population, &fitness, cfg.tournament_size, rng);
            let b = tournament(&population, &fitness, cfg.tournament_size, rng);
            let child = if rng.random_bool(cfg.crossover_probability) {
                ops.crossover(a, b, rng)
            } else {
                a.clone()
            };
            next.push(ops.mutate(child, rate, rng));
        }
        population = next;
        objectives = eval.evaluate_all(&population);
        fitness = record(&population, &objectives, &mut best);
        generations += 1;
        let gen_best = fitness.iter().copied().fold(f64::INFINITY, f64::min);
        history.push(gen_best);
        if gen_best < best_fitness {
            best_fitness = gen_best;
            stall = 0;
        } else {
            stall += 1;
        }
    }

    let evaluations = eval.cache.len();
    log::debug!(
        "GA on partition {} at lead {}: {generations} generations, {evaluations} evaluations",
        partition.index,
        partition.lead_time
    );
    match best {
        Some((selection, objective)) => Ok(GaResult {
            expected_demand: selection.dot(forecasts),
            selection,
            objective,
            generations,
            evaluations,
            best_fitness_history: history,
        }),
        None => {
            let (i, _) = fitness
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(b.1))
                .expect("non-empty population");
            Err(Error::Infeasible {
                violation: constraint.violation(&population[i]),
                objective: objectives[i],
            })
        }
    }
}

fn initial_binary(
    partition: &Partition,
    forecasts: &[f64],
    cfg: &GaConfig,
    seeds: &[SelectionVector],
    rng: &mut ChaCha8Rng,
) -> Vec<SelectionVector> {
    let n = forecasts.len();
    let total: f64 = forecasts.iter().sum();
    let fill = if total > 0.0 {
        (0.5 * (partition.lower + partition.upper) / total).clamp(1.0 / n as f64, 1.0)
    } else {
        0.5
    };
    let mut pop: Vec<SelectionVector> = seeds
        .iter()
        .take(cfg.population_size)
        .map(|s| {
            SelectionVector::from_bits(&s.weights().iter().map(|&w| w > 0.0).collect::<Vec<_>>())
        })
        .collect();
    while pop.len() < cfg.population_size {
        let v = random_feasible_selection(partition, forecasts, cfg.max_selected, rng, 20)
            .unwrap_or_else(|| {
                let bits: Vec<bool> = (0..n).map(|_| rng.random_bool(fill)).collect();
                SelectionVector::from_bits(&bits)
            });
        pop.push(v);
    }
    pop
}

/// Binary GA for one partition. `objective` is minimized subject to the
/// partition band on `forecasts . v` and the cardinality cap. Returns the best
/// feasible selection evaluated in any generation.
pub fn ga_optimize<O: Objective + ?Sized>(
    objective: &O,
    partition: &Partition,
    forecasts: &[f64],
    cfg: &GaConfig,
) -> Result<GaResult> {
    ga_optimize_seeded(objective, partition, forecasts, cfg, &[])
}

/// As [`ga_optimize`], with `seeds` placed in the initial population.
pub fn ga_optimize_seeded<O: Objective + ?Sized>(
    objective: &O,
    partition: &Partition,
    forecasts: &[f64],
    cfg: &GaConfig,
    seeds: &[SelectionVector],
) -> Result<GaResult> {
    check_inputs(partition, forecasts, seeds, cfg)?;
    let mut rng = derive_rng(
        cfg.seed,
        &[partition.lead_time as u64, partition.index as u64, 0],
    );
    let pop = initial_binary(partition, forecasts, cfg, seeds, &mut rng);
    run(objective, partition, forecasts, cfg, pop, &Binary, &mut rng)
}

/// Relaxed GA: genes are weights in `[0, 1]`, with blend crossover and
/// Gaussian mutation. Seeding with the binary optimum makes the result no
/// worse than it.
pub fn ga_optimize_relaxed<O: Objective + ?Sized>(
    objective: &O,
    partition: &Partition,
    forecasts: &[f64],
    cfg: &GaConfig,
    seeds: &[SelectionVector],
) -> Result<GaResult> {
    check_inputs(partition, forecasts, seeds, cfg)?;
    let mut rng = derive_rng(
        cfg.seed,
        &[partition.lead_time as u64, partition.index as u64, 1],
    );
    let binary = initial_binary(partition, forecasts, cfg, seeds, &mut rng);
    let pop = binary
        .into_iter()
        .map(|v| {
            SelectionVector::relaxed(v.weights().to_vec()).expect("binary weights lie in [0, 1]")
        })
        .collect();
    let ops = Relaxed {
        alpha: cfg.blend_alpha,
        noise: Normal::new(0.0, cfg.relaxed_mutation_sd).map_err(|e| invalid(e.to_string()))?,
        floor: cfg.relaxed_floor,
    };
    run(objective, partition, forecasts, cfg, pop, &ops, &mut rng)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn part(lower: f64, upper: f64) -> Partition {
        Partition {
            index: 0,
            lead_time: 1,
            lower,
            upper,
        }
    }

    /// Separable objective with a unique optimum.
    fn weights_objective(c: Vec<f64>) -> impl Fn(&SelectionVector) -> f64 + Sync {
        move |v: &SelectionVector| v.weights().iter().zip(&c).map(|(w, c)| w * c).sum::<f64>()
    }

    fn brute_force<O: Objective>(o: &O, p: &Partition, f: &[f64], cap: usize) -> Option<f64> {
        let n = f.len();
        (1u32..1 << n)
            .filter_map(|m| {
                let v = SelectionVector::from_bits(
                    &(0..n).map(|i| m >> i & 1 == 1).collect::<Vec<_>>(),
                );
                (v.count() <= cap && p.contains(v.dot(f))).then(|| o.evaluate(&v))
            })
            .min_by(f64::total_cmp)
    }

    #[test]
    fn matches_brute_force_on_small_instance() {
        let f: Vec<f64> = (0..10).map(|i| 1.0 + 0.37 * i as f64).collect();
        let c: Vec<f64> = (0..10).map(|i| ((i * 7) % 10) as f64 - 4.5).collect();
        let o = weights_objective(c);
        let p = part(8.0, 12.0);
        let r = ga_optimize(&o, &p, &f, &GaConfig::default()).unwrap();
        assert!(p.contains(r.expected_demand));
        assert_eq!(r.objective, brute_force(&o, &p, &f, 100).unwrap());
    }

    #[test]
    fn history_is_non_increasing_and_deterministic() {
        let f: Vec<f64> = (0..12).map(|i| 0.5 + (i % 5) as f64).collect();
        let o = |v: &SelectionVector| (v.count() as f64 - 4.0).abs() + 0.01 * v.dot(&[1.0; 12]);
        let p = part(5.0, 9.0);
        let cfg = GaConfig {
            seed: 9,
            ..Default::default()
        };
        let a = ga_optimize(&o, &p, &f, &cfg).unwrap();
        assert!(a.best_fitness_history.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(a, ga_optimize(&o, &p, &f, &cfg).unwrap());
    }

    #[test]
    fn infeasible_band_is_an_error() {
        let f = vec![5.0, 5.0];
        let o = |v: &SelectionVector| v.count() as f64;
        let err = ga_optimize(&o, &part(1.0, 2.0), &f, &GaConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Infeasible { violation, .. } if violation > 0.0));
    }

    #[test]
    fn cardinality_cap_is_respected() {
        let f = vec![1.0; 10];
        let o = |v: &SelectionVector| -(v.count() as f64);
        let cfg = GaConfig {
            max_selected: 3,
            ..Default::default()
        };
        let r = ga_optimize(&o, &part(0.5, 9.5), &f, &cfg).unwrap();
        assert_eq!(r.selection.count(), 3);
    }

    #[test]
    fn relaxed_dominates_binary() {
        let f: Vec<f64> = (0..8).map(|i| 1.0 + i as f64).collect();
        // prefers exactly 6.5 kW of demand, unreachable with whole households
        let o = {
            let f = f.clone();
            move |v: &SelectionVector| (v.dot(&f) - 6.5).abs()
        };
        let p = part(2.0, 20.0);
        let cfg = GaConfig::default();
        let b = ga_optimize(&o, &p, &f, &cfg).unwrap();
        let r = ga_optimize_relaxed(&o, &p, &f, &cfg, std::slice::from_ref(&b.selection)).unwrap();
        assert!(r.objective <= b.objective);
        assert!(r.objective < 0.5, "{}", r.objective);
        assert!(r
            .selection
            .weights()
            .iter()
            .all(|w| (0.0..=1.0).contains(w)));
        assert_eq!(r.selection.mode(), SelectionMode::Relaxed);
    }

    #[test]
    fn random_feasible_lands_in_band() {
        let f: Vec<f64> = (0..50).map(|i| 0.2 + (i % 7) as f64 * 0.3).collect();
        let mut rng = derive_rng(3, &[]);
        let p = part(5.0, 6.0);
        for _ in 0..50 {
            let v = random_feasible_selection(&p, &f, 100, &mut rng, 100).unwrap();
            assert!(p.contains(v.dot(&f)));
        }
        assert!(random_feasible_selection(&part(1000.0, 1001.0), &f, 100, &mut rng, 10).is_none());
        // needs nearly all of the largest households under the cap
        let top: f64 = {
            let mut s = f.clone();
            s.sort_by(|a, b| b.total_cmp(a));
            s[..10].iter().sum()
        };
        let tight = part(top - 1.0, top + 0.5);
        assert!(random_feasible_selection(&tight, &f, 10, &mut rng, 200).is_some());
    }
}
