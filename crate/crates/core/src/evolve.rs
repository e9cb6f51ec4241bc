//! Real-valued genetic algorithm over a box of interval restrictions.
//!
//! Minimisation throughout. Each generation evaluates the population in
//! parallel, keeps the best individual, and fills the rest with children
//! of stochastic-uniform selected parents: most by heuristic crossover, the
//! remainder as mutated copies. Mutation is multiplicative and its scale
//! adapts to recent progress. All randomness comes from one seeded
//! generator driven from the calling thread, so a run is reproducible.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvolveError {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("invalid restrictions at gene {index}: lower {lower} > upper {upper}")]
    InvalidRestrictions {
        index: usize,
        lower: f64,
        upper: f64,
    },
    #[error("empty population")]
    EmptyPopulation,
    #[error("fitness {value} is not finite for genome {genome:?}")]
    FitnessNonFinite { value: f64, genome: Vec<f64> },
    #[error("invalid configuration: {0}")]
    Config(String),
}

/// Closed interval bounds per gene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Restrictions {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// First row of `A·x ≤ b` that a genome breaks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Violation {
    pub row: usize,
    pub gene: usize,
    pub value: f64,
    pub bound: f64,
}

impl Restrictions {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, EvolveError> {
        if lower.len() != upper.len() {
            return Err(EvolveError::DimensionMismatch {
                expected: lower.len(),
                actual: upper.len(),
            });
        }
        for (index, (&l, &u)) in lower.iter().zip(&upper).enumerate() {
            if !(l <= u) {
                return Err(EvolveError::InvalidRestrictions {
                    index,
                    lower: l,
                    upper: u,
                });
            }
        }
        Ok(Self { lower, upper })
    }

    /// Every gene fixed at the given value.
    pub fn point(v: &[f64]) -> Self {
        Self {
            lower: v.to_vec(),
            upper: v.to_vec(),
        }
    }

    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    /// The box as `A·x ≤ b`: for gene `k`, row `2k` is `x_k ≤ upper_k` and
    /// row `2k+1` is `−x_k ≤ −lower_k`.
    pub fn inequality_system(&self) -> (Vec<Vec<f64>>, Vec<f64>) {
        let n = self.len();
        let mut a = Vec::with_capacity(2 * n);
        let mut b = Vec::with_capacity(2 * n);
        for k in 0..n {
            let mut up = vec![0.0; n];
            up[k] = 1.0;
            let mut down = vec![0.0; n];
            down[k] = -1.0;
            a.push(up);
            b.push(self.upper[k]);
            a.push(down);
            b.push(-self.lower[k]);
        }
        (a, b)
    }

    /// Evaluates `A·g ≤ b` row by row.
    pub fn first_violation(&self, g: &[f64]) -> Result<Option<Violation>, EvolveError> {
        if g.len() != self.len() {
            return Err(EvolveError::DimensionMismatch {
                expected: self.len(),
                actual: g.len(),
            });
        }
        for (k, &x) in g.iter().enumerate() {
            if !(x <= self.upper[k]) {
                return Ok(Some(Violation {
                    row: 2 * k,
                    gene: k,
                    value: x,
                    bound: self.upper[k],
                }));
            }
            if !(x >= self.lower[k]) {
                return Ok(Some(Violation {
                    row: 2 * k + 1,
                    gene: k,
                    value: x,
                    bound: self.lower[k],
                }));
            }
        }
        Ok(None)
    }

    pub fn clamp(&self, g: &mut [f64]) {
        for (k, x) in g.iter_mut().enumerate() {
            *x = x.clamp(self.lower[k], self.upper[k]);
        }
    }
}

/// `true` iff `g` satisfies every restriction.
pub fn check_restrictions(g: &[f64], r: &Restrictions) -> Result<bool, EvolveError> {
    Ok(r.first_violation(g)?.is_none())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaConfig {
    pub pop_size: usize,
    pub beta: f64,
    pub mutation_probability: f64,
    /// Half-width of the multiplicative mutation factor around 1.
    pub mutation_scale: f64,
    /// Growth of the mutation scale after a generation that improved the
    /// best fitness; it decays back towards `mutation_scale` otherwise.
    /// `1.0` disables adaptation.
    pub adapt_factor: f64,
    pub max_mutation_scale: f64,
    /// Share of children bred by crossover; the rest are copies of the
    /// fitter selected parent with every gene mutated.
    #[serde(default = "default_crossover_fraction")]
    pub crossover_fraction: f64,
    pub elite: usize,
    pub max_iterations: usize,
    pub stall_generations: usize,
    /// Minimum decrease of the best fitness that counts as progress.
    pub tolerance: f64,
    pub fitness_target: Option<f64>,
    pub time_limit_s: Option<f64>,
    pub seed: u64,
}

fn default_crossover_fraction() -> f64 {
    0.8
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            pop_size: 200,
            beta: 0.6,
            mutation_probability: 0.02,
            mutation_scale: 0.01,
            adapt_factor: 2.0,
            max_mutation_scale: 1.0,
            crossover_fraction: 0.8,
            elite: 1,
            max_iterations: 2000,
            stall_generations: 200,
            tolerance: 0.0,
            fitness_target: None,
            time_limit_s: None,
            seed: 1,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<(), EvolveError> {
        let fail = |m: &str| Err(EvolveError::Config(m.into()));
        if self.pop_size == 0 {
            return fail("pop_size must be positive");
        }
        if !(0.1..=1.2).contains(&self.beta) {
            return fail("beta must lie in [0.1, 1.2]");
        }
        if !(0.0..=1.0).contains(&self.mutation_probability) || !(self.mutation_scale >= 0.0) {
            return fail("mutation probability must be in [0, 1] and scale non-negative");
        }
        if !(self.adapt_factor >= 1.0) || !(self.max_mutation_scale >= 0.0) {
            return fail("adapt_factor must be at least 1 and max_mutation_scale non-negative");
        }
        if !(0.0..=1.0).contains(&self.crossover_fraction) {
            return fail("crossover_fraction must be in [0, 1]");
        }
        if self.elite >= self.pop_size.max(2) {
            return fail("elite count must leave room for children");
        }
        if self.max_iterations == 0 || self.stall_generations == 0 {
            return fail("iteration limits must be positive");
        }
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<Self, EvolveError> {
        let cfg: Self = serde_json::from_str(s).map_err(|e| EvolveError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    pub genes: Vec<Vec<f64>>,
    pub fitness: Vec<f64>,
    pub generation: usize,
}

impl Population {
    pub fn len(&self) -> usize {
        self.genes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.genes.is_empty()
    }

    pub fn best(&self) -> Option<(usize, f64)> {
        self.fitness
            .iter()
            .copied()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(&b.1))
    }
}

fn sample_box<R: Rng + ?Sized>(r: &Restrictions, rng: &mut R) -> Vec<f64> {
    r.lower
        .iter()
        .zip(&r.upper)
        .map(|(&l, &u)| if l == u { l } else { rng.random_range(l..=u) })
        .collect()
}

/// Uniform random individuals inside the restrictions.
pub fn init_population(r: &Restrictions, pop_size: usize, seed: u64) -> Population {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    init_population_with(r, pop_size, &mut rng)
}

fn init_population_with<R: Rng + ?Sized>(
    r: &Restrictions,
    pop_size: usize,
    rng: &mut R,
) -> Population {
    Population {
        genes: (0..pop_size).map(|_| sample_box(r, rng)).collect(),
        fitness: Vec::new(),
        generation: 0,
    }
}

/// Rank weights for minimisation: the best individual gets weight `n`, the
/// worst weight 1; tied individuals share the mean of their ranks.
pub fn rank_weights(fitness: &[f64]) -> Vec<f64> {
    let n = fitness.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| fitness[a].total_cmp(&fitness[b]));
    let mut w = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && fitness[order[j + 1]] == fitness[order[i]] {
            j += 1;
        }
        // positions i..=j share ranks; weight = n - position
        let mean = (i..=j).map(|p| (n - p) as f64).sum::<f64>() / (j - i + 1) as f64;
        for &k in &order[i..=j] {
            w[k] = mean;
        }
        i = j + 1;
    }
    w
}

/// Lays individuals on a line proportional to `weights` and reads it at
/// `picks` equally spaced pointers sharing one random offset.
pub fn stochastic_uniform<R: Rng + ?Sized>(
    weights: &[f64],
    picks: usize,
    rng: &mut R,
) -> Vec<usize> {
    let total: f64 = weights.iter().sum();
    let step = total / picks as f64;
    let mut pointer = rng.random_range(0.0..1.0) * step;
    let mut out = Vec::with_capacity(picks);
    let mut k = 0;
    let mut edge = weights[0];
    for _ in 0..picks {
        while pointer >= edge && k + 1 < weights.len() {
            k += 1;
            edge += weights[k];
        }
        out.push(k);
        pointer += step;
    }
    out
}

/// Picks two parents; the second returned index is the fitter one.
pub fn select_parents_su<R: Rng + ?Sized>(
    fitness: &[f64],
    rng: &mut R,
) -> Result<(usize, usize), EvolveError> {
    if fitness.is_empty() {
        return Err(EvolveError::EmptyPopulation);
    }
    let w = rank_weights(fitness);
    let picks = stochastic_uniform(&w, 2, rng);
    let (a, b) = (picks[0], picks[1]);
    Ok(if fitness[b] <= fitness[a] {
        (a, b)
    } else {
        (b, a)
    })
}

/// `p2 + β·(p1 − p2)`, clamped to `r` when given.
pub fn crossover_heuristic(
    p1: &[f64],
    p2: &[f64],
    beta: f64,
    r: Option<&Restrictions>,
) -> Result<Vec<f64>, EvolveError> {
    if p1.len() != p2.len() {
        return Err(EvolveError::DimensionMismatch {
            expected: p1.len(),
            actual: p2.len(),
        });
    }
    let mut child: Vec<f64> = p1.iter().zip(p2).map(|(a, b)| b + beta * (a - b)).collect();
    if let Some(r) = r {
        if r.len() != child.len() {
            return Err(EvolveError::DimensionMismatch {
                expected: r.len(),
                actual: child.len(),
            });
        }
        r.clamp(&mut child);
    }
    Ok(child)
}

/// Multiplies each gene, with probability `p`, by `1 + δ` for `δ` uniform in
/// `±scale`, then clamps to the restrictions.
pub fn mutate_adaptive<R: Rng + ?Sized>(
    g: &mut [f64],
    r: &Restrictions,
    probability: f64,
    scale: f64,
    rng: &mut R,
) {
    for (k, x) in g.iter_mut().enumerate() {
        if probability > 0.0 && rng.random_bool(probability) {
            let delta = if scale > 0.0 {
                rng.random_range(-scale..=scale)
            } else {
                0.0
            };
            *x = (*x * (1.0 + delta)).clamp(r.lower[k], r.upper[k]);
        }
    }
}

/// Function to minimise.
pub trait Objective: Sync {
    fn fitness(&self, genes: &[f64]) -> f64;

    /// Maps a genome onto the feasible set after crossover and mutation.
    /// Must keep the genome inside the restrictions.
    fn repair(&self, _genes: &mut [f64]) {}
}

impl<F: Fn(&[f64]) -> f64 + Sync> Objective for F {
    fn fitness(&self, genes: &[f64]) -> f64 {
        self(genes)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxIterations,
    TimeLimit,
    FitnessTarget,
    Stall,
    RestrictionViolation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    pub best: f64,
    pub mean: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaResult {
    pub best: Vec<f64>,
    pub best_fitness: f64,
    pub history: Vec<GenerationStats>,
    pub stop: StopReason,
    pub generations: usize,
    pub evaluations: usize,
    pub elapsed_s: f64,
}

impl GaResult {
    /// `generation,best,mean,evaluations` rows with a header.
    pub fn history_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["generation", "best", "mean", "evaluations"])
            .expect("in-memory write");
        for h in &self.history {
            w.serialize((h.generation, h.best, h.mean, h.evaluations))
                .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }
}

fn evaluate<O: Objective + ?Sized>(obj: &O, genes: &[Vec<f64>]) -> Result<Vec<f64>, EvolveError> {
    let fit: Vec<f64> = genes.par_iter().map(|g| obj.fitness(g)).collect();
    if let Some(k) = fit.iter().position(|f| !f.is_finite()) {
        return Err(EvolveError::FitnessNonFinite {
            value: fit[k],
            genome: genes[k].clone(),
        });
    }
    Ok(fit)
}

pub fn run_ga<O: Objective + ?Sized>(
    obj: &O,
    r: &Restrictions,
    cfg: &GaConfig,
) -> Result<GaResult, EvolveError> {
    run_ga_with(obj, r, cfg, |_| {})
}

/// Runs the GA, calling `progress` after every generation.
pub fn run_ga_with<O: Objective + ?Sized>(
    obj: &O,
    r: &Restrictions,
    cfg: &GaConfig,
    mut progress: impl FnMut(&GenerationStats),
) -> Result<GaResult, EvolveError> {
    cfg.validate()?;
    let start = Instant::now();
    let limit = cfg.time_limit_s.map(Duration::from_secs_f64);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut pop = init_population_with(r, cfg.pop_size, &mut rng);
    for g in &mut pop.genes {
        obj.repair(g);
    }
    pop.fitness = evaluate(obj, &pop.genes)?;
    let mut evaluations = pop.len();

    let stats = |pop: &Population, evaluations: usize| {
        let (_, best) = pop.best().expect("non-empty population");
        GenerationStats {
            generation: pop.generation,
            best,
            mean: pop.fitness.iter().sum::<f64>() / pop.len() as f64,
            evaluations,
        }
    };
    let mut history = vec![stats(&pop, evaluations)];
    progress(&history[0]);
    let mut best_seen = history[0].best;
    let mut last_improvement = 0;
    let mut scale = cfg.mutation_scale;

    let stop = loop {
        if cfg.fitness_target.is_some_and(|t| best_seen <= t) {
            break StopReason::FitnessTarget;
        }
        if pop.generation >= cfg.max_iterations {
            break StopReason::MaxIterations;
        }
        if pop.generation - last_improvement >= cfg.stall_generations {
            break StopReason::Stall;
        }
        if limit.is_some_and(|l| start.elapsed() >= l) {
            break StopReason::TimeLimit;
        }

        let mut order: Vec<usize> = (0..pop.len()).collect();
        order.sort_by(|&a, &b| pop.fitness[a].total_cmp(&pop.fitness[b]));
        let elite = cfg.elite.min(pop.len());
        let mut next: Vec<Vec<f64>> = order[..elite]
            .iter()
            .map(|&k| pop.genes[k].clone())
            .collect();
        let mut next_fit: Vec<f64> = order[..elite].iter().map(|&k| pop.fitness[k]).collect();

        let weights = rank_weights(&pop.fitness);
        let n_children = pop.len() - elite;
        let n_cross = (cfg.crossover_fraction * n_children as f64).round() as usize;
        let mut children = Vec::with_capacity(n_children);
        while children.len() < n_children {
            let picks = stochastic_uniform(&weights, 2, &mut rng);
            let (p1, p2) = if pop.fitness[picks[1]] <= pop.fitness[picks[0]] {
                (picks[0], picks[1])
            } else {
                (picks[1], picks[0])
            };
            let mut child = if children.len() < n_cross {
                let mut c = crossover_heuristic(&pop.genes[p1], &pop.genes[p2], cfg.beta, Some(r))?;
                mutate_adaptive(&mut c, r, cfg.mutation_probability, scale, &mut rng);
                c
            } else {
                let mut c = pop.genes[p2].clone();
                mutate_adaptive(&mut c, r, 1.0, scale, &mut rng);
                c
            };
            obj.repair(&mut child);
            children.push(child);
        }
        if let Some(bad) = children
            .iter()
            .position(|c| !matches!(r.first_violation(c), Ok(None)))
        {
            log::warn!("child {bad} left the restrictions; stopping");
            break StopReason::RestrictionViolation;
        }
        let child_fit = evaluate(obj, &children)?;
        evaluations += children.len();
        next.extend(children);
        next_fit.extend(child_fit);
        pop = Population {
            genes: next,
            fitness: next_fit,
            generation: pop.generation + 1,
        };

        let s = stats(&pop, evaluations);
        if s.best < best_seen - cfg.tolerance {
            last_improvement = pop.generation;
            scale = (scale * cfg.adapt_factor).min(cfg.max_mutation_scale.max(cfg.mutation_scale));
        } else {
            scale = (scale / cfg.adapt_factor.sqrt()).max(cfg.mutation_scale);
        }
        best_seen = best_seen.min(s.best);
        progress(&s);
        history.push(s);
    };

    let (k, best_fitness) = pop.best().expect("non-empty population");
    Ok(GaResult {
        best: pop.genes[k].clone(),
        best_fitness,
        history,
        stop,
        generations: pop.generation,
        evaluations,
        elapsed_s: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn worked_box() -> Restrictions {
        Restrictions::new(vec![30.0, 70.0], vec![35.0, 75.0]).unwrap()
    }

    #[test]
    fn inequality_system_matches_the_worked_example() {
        let (a, b) = worked_box().inequality_system();
        assert_eq!(
            a,
            vec![
                vec![1.0, 0.0],
                vec![-1.0, 0.0],
                vec![0.0, 1.0],
                vec![0.0, -1.0]
            ]
        );
        assert_eq!(b, vec![35.0, -30.0, 75.0, -70.0]);
    }

    #[test]
    fn restriction_checks() {
        let r = worked_box();
        assert!(check_restrictions(&[32.0, 72.0], &r).unwrap());
        let v = r.first_violation(&[36.0, 72.0]).unwrap().unwrap();
        assert_eq!((v.row, v.gene), (0, 0));
        assert!(check_restrictions(&[30.0, 70.0], &r).unwrap());
        assert!(check_restrictions(&[30.0], &r).is_err());
    }

    #[test]
    fn init_population_properties() {
        let r = Restrictions::point(&[3.0, -1.0]);
        let p = init_population(&r, 10, 4);
        assert!(p.genes.iter().all(|g| g == &vec![3.0, -1.0]));
        let unit = Restrictions::new(vec![0.0; 5], vec![1.0; 5]).unwrap();
        let p = init_population(&unit, 200, 4);
        for k in 0..5 {
            let m = p.genes.iter().map(|g| g[k]).sum::<f64>() / 200.0;
            assert!((0.4..=0.6).contains(&m));
        }
        assert_eq!(p, init_population(&unit, 200, 4));
    }

    #[test]
    fn rank_weights_average_ties() {
        assert_eq!(rank_weights(&[1.0, 2.0]), vec![2.0, 1.0]);
        assert_eq!(rank_weights(&[5.0, 1.0, 5.0]), vec![1.5, 3.0, 1.5]);
        assert_eq!(rank_weights(&[7.0; 4]), vec![2.5; 4]);
    }

    #[test]
    fn selection_frequencies() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let draws = 100_000;
        let mut count = [0usize; 2];
        for _ in 0..draws {
            let (a, b) = select_parents_su(&[1.0, 2.0], &mut rng).unwrap();
            assert!([1.0, 2.0][b] <= [1.0, 2.0][a]);
            count[a] += 1;
            count[b] += 1;
        }
        let f0 = count[0] as f64 / (2 * draws) as f64;
        assert!((f0 - 2.0 / 3.0).abs() < 0.02, "{f0}");

        // equal fitness: uniform, checked with a chi-square statistic
        let n = 8;
        let mut hits = vec![0usize; n];
        for _ in 0..draws {
            let (a, b) = select_parents_su(&vec![1.0; n], &mut rng).unwrap();
            hits[a] += 1;
            hits[b] += 1;
        }
        let expect = (2 * draws) as f64 / n as f64;
        let chi2: f64 = hits
            .iter()
            .map(|&h| (h as f64 - expect).powi(2) / expect)
            .sum();
        assert!(chi2 < 24.3, "chi2 {chi2}"); // 0.001 critical value, 7 dof
        assert_eq!(select_parents_su(&[4.0], &mut rng).unwrap(), (0, 0));
        assert!(select_parents_su(&[], &mut rng).is_err());
    }

    #[test]
    fn crossover_formula() {
        assert_eq!(
            crossover_heuristic(&[10.0], &[20.0], 0.6, None).unwrap(),
            vec![14.0]
        );
        let (p1, p2) = ([1.0, 2.0, 3.0], [4.0, -5.0, 6.0]);
        assert_eq!(
            crossover_heuristic(&p1, &p2, 1.0, None).unwrap(),
            p1.to_vec()
        );
        assert_eq!(
            crossover_heuristic(&p1, &p2, 0.0, None).unwrap(),
            p2.to_vec()
        );
        assert_eq!(
            crossover_heuristic(&p1, &p1, 0.37, None).unwrap(),
            p1.to_vec()
        );
        let r = Restrictions::new(vec![0.0], vec![12.0]).unwrap();
        assert_eq!(
            crossover_heuristic(&[0.0], &[10.0], 1.2, Some(&r)).unwrap(),
            vec![0.0]
        );
        assert!(crossover_heuristic(&[1.0], &[1.0, 2.0], 0.5, None).is_err());
    }

    #[test]
    fn mutation_respects_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let r = worked_box();
        let mut g = vec![32.0, 72.0];
        mutate_adaptive(&mut g, &r, 0.0, 0.5, &mut rng);
        assert_eq!(g, vec![32.0, 72.0]);
        let tight = Restrictions::new(vec![31.99, 71.99], vec![32.01, 72.01]).unwrap();
        for _ in 0..100 {
            let mut g = vec![32.0, 72.0];
            mutate_adaptive(&mut g, &tight, 1.0, 0.1, &mut rng);
            assert!(g
                .iter()
                .zip(&tight.lower)
                .zip(&tight.upper)
                .all(|((x, l), u)| x == l || x == u));
        }
    }

    #[test]
    fn sphere_and_stall() {
        let r = Restrictions::new(vec![-5.0; 10], vec![5.0; 10]).unwrap();
        let sphere = |g: &[f64]| g.iter().map(|x| x * x).sum::<f64>();
        let cfg = GaConfig {
            max_iterations: 200,
            seed: 3,
            ..GaConfig::default()
        };
        let res = run_ga(&sphere, &r, &cfg).unwrap();
        assert!(res.best_fitness < 1e-2, "best {}", res.best_fitness);
        assert!(res.history.windows(2).all(|w| w[1].best <= w[0].best));

        let flat = |_: &[f64]| 1.0;
        let cfg = GaConfig {
            stall_generations: 25,
            ..GaConfig::default()
        };
        let res = run_ga(&flat, &r, &cfg).unwrap();
        assert_eq!((res.stop, res.generations), (StopReason::Stall, 25));
        assert!(res
            .history_csv()
            .starts_with("generation,best,mean,evaluations\n0,1.0,1.0,200\n"));
    }

    #[test]
    fn non_finite_fitness_is_reported() {
        let r = Restrictions::new(vec![0.0], vec![1.0]).unwrap();
        let bad = |_: &[f64]| f64::NAN;
        assert!(matches!(
            run_ga(&bad, &r, &GaConfig::default()),
            Err(EvolveError::FitnessNonFinite { .. })
        ));
    }

    #[test]
    fn config_json() {
        let c = GaConfig::default();
        assert_eq!(GaConfig::from_json(&c.to_json()).unwrap(), c);
        assert!(
            GaConfig::from_json(&c.to_json().replace("\"beta\": 0.6", "\"beta\": 2.0")).is_err()
        );
    }
}
