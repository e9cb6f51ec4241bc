//! Reverse-week planning with the weekly surrogates as fitness.
//!
//! The last week is searched for the lowest day-40 feed conversion. Every
//! earlier week is then searched for a plan whose predicted last day lands
//! on the starting state chosen for the week after it, so the six weekly
//! plans chain into one 40-day plan. The starting state picked for week 1
//! is the recommended arrival condition of the flock.

use std::io::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{partition_weeks, DatasetError, WeeklyDataset};
use crate::domain::{
    fcr_normalized, DayPlan, DomainError, FlockSample, NormMode, FLOCK_DAYS, PLAN_WIDTH,
    RESPONSE_WIDTH,
};
use crate::evolve::{
    run_ga_with, EvolveError, GaConfig, GenerationStats, Objective, Restrictions, StopReason,
};
use crate::surrogate::{SurrogateError, WeekModel};
use crate::week::{self, Week, PREV_OUTPUT, WEEKS};

#[derive(Debug, Error)]
pub enum PlannerError {
    #[error(transparent)]
    Surrogate(#[from] SurrogateError),
    #[error(transparent)]
    Evolve(#[from] EvolveError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("grid of {cardinality:.3e} points exceeds the budget of {budget} evaluations")]
    BudgetExceeded { cardinality: f64, budget: u64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = PlannerError> = std::result::Result<T, E>;

/// Day-40 feed conversion predicted by the final-week model for `genome`.
pub fn fitness_week6(genome: &[f64], model: &WeekModel) -> Result<f64> {
    let y = model.forward_last_normalized(genome)?;
    let last = model.denormalize_response(&y)?;
    fcr_of(&last)
}

fn fcr_of(y: &[f64; RESPONSE_WIDTH]) -> Result<f64> {
    Ok(fcr_normalized(y[1], y[2], y[0])?)
}

/// Mean absolute gap, in the week's scaled output space, between the last
/// predicted day and `target`.
pub fn fitness_boundary(
    genome: &[f64],
    model: &WeekModel,
    target: &[f64; RESPONSE_WIDTH],
) -> Result<f64> {
    let y = model.forward_last_normalized(genome)?;
    Ok(boundary_gap(&y, target))
}

fn boundary_gap(y: &[f64; RESPONSE_WIDTH], target: &[f64; RESPONSE_WIDTH]) -> f64 {
    y.iter()
        .zip(target)
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
        / RESPONSE_WIDTH as f64
}

/// Starting state of the following week's genome, scaled with `model`'s
/// output bounds.
pub fn boundary_target(model: &WeekModel, next_genome: &[f64]) -> Result<[f64; RESPONSE_WIDTH]> {
    if next_genome.len() < PREV_OUTPUT.end {
        return Err(PlannerError::Shape(format!(
            "genome of length {} has no starting state",
            next_genome.len()
        )));
    }
    Ok(model.normalize_response(&next_genome[PREV_OUTPUT])?)
}

/// Search box of one week: the per-position range of the historical inputs.
pub fn week_restrictions(data: &WeeklyDataset) -> Result<Restrictions> {
    let b = data.input_extrema()?;
    Ok(Restrictions::new(b.mini, b.maxi)?)
}

/// Search boxes of all six weeks from complete flocks.
pub fn restrictions_from_samples(samples: &[FlockSample]) -> Result<Vec<Restrictions>> {
    partition_weeks(samples)?
        .iter()
        .map(week_restrictions)
        .collect()
}

/// Projects each day's (min, avg, max) temperature and humidity onto the
/// ordered set inside the box, moving the average first and then the
/// extremes as little as possible. The box must contain at least one
/// ordered triple, which holds for boxes built from valid plans.
#[derive(Debug, Clone)]
pub struct PlanRepair {
    lower: Vec<f64>,
    upper: Vec<f64>,
    week_len: usize,
}

impl PlanRepair {
    pub fn new(r: &Restrictions) -> Result<Self> {
        let n = r.len();
        if n < PREV_OUTPUT.end || !(n - RESPONSE_WIDTH).is_multiple_of(PLAN_WIDTH) {
            return Err(PlannerError::Shape(format!(
                "{n} genes do not form a week input"
            )));
        }
        Ok(Self {
            lower: r.lower.clone(),
            upper: r.upper.clone(),
            week_len: (n - RESPONSE_WIDTH) / PLAN_WIDTH,
        })
    }

    pub fn apply(&self, g: &mut [f64]) {
        for t in 1..=self.week_len {
            let s = week::plan_slot(t).start;
            for first in [s + 1, s + 4] {
                let (a, b, c) = (first, first + 1, first + 2);
                let (lo, hi) = (&self.lower, &self.upper);
                let b_lo = lo[b].max(lo[a]);
                let b_hi = hi[b].min(hi[c]);
                if b_lo > b_hi {
                    continue;
                }
                g[b] = g[b].clamp(b_lo, b_hi);
                g[a] = g[a].clamp(lo[a], hi[a].min(g[b]));
                g[c] = g[c].clamp(lo[c].max(g[b]), hi[c]);
            }
        }
    }
}

struct FinalWeek<'a> {
    model: &'a WeekModel,
    repair: PlanRepair,
}

impl Objective for FinalWeek<'_> {
    fn fitness(&self, genes: &[f64]) -> f64 {
        fitness_week6(genes, self.model).unwrap_or(f64::NAN)
    }

    fn repair(&self, genes: &mut [f64]) {
        self.repair.apply(genes)
    }
}

struct Stitch<'a> {
    model: &'a WeekModel,
    target: [f64; RESPONSE_WIDTH],
    repair: PlanRepair,
}

impl Objective for Stitch<'_> {
    fn fitness(&self, genes: &[f64]) -> f64 {
        fitness_boundary(genes, self.model, &self.target).unwrap_or(f64::NAN)
    }

    fn repair(&self, genes: &mut [f64]) {
        self.repair.apply(genes)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeekPlan {
    pub week: Week,
    pub genome: Vec<f64>,
    pub expanded_days: Vec<DayPlan>,
}

impl WeekPlan {
    pub fn new(week: Week, genome: Vec<f64>) -> Result<Self> {
        let expanded_days = expand_genome(week, &genome)?;
        Ok(Self {
            week,
            genome,
            expanded_days,
        })
    }
}

/// Day plans encoded in a week genome. The day genes are overwritten with
/// the calendar days of `week`.
pub fn expand_genome(week: Week, genome: &[f64]) -> Result<Vec<DayPlan>> {
    if genome.len() != week.input_len() {
        return Err(PlannerError::Shape(format!(
            "{week} genome needs {} genes, got {}",
            week.input_len(),
            genome.len()
        )));
    }
    (1..=week.len())
        .map(|t| {
            let mut p = DayPlan::from_input(&genome[week::plan_slot(t)])?;
            p.day = week.first_day() + t as u32 - 1;
            p.validate()?;
            Ok(p)
        })
        .collect()
}

/// The 40-day plan and the arrival conditions it assumes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalActionPlan {
    pub weeks: Vec<WeekPlan>,
    /// Arrival state `[mdw g, dfcpb kg/bird, nlbpa birds/m²]`.
    pub i_c: [f64; RESPONSE_WIDTH],
    pub fcr_est: f64,
    pub fcr_res: f64,
}

pub const PLAN_CSV_COLUMNS: [&str; 7] =
    ["day", "t_min", "t_avg", "t_max", "h_min", "h_avg", "h_max"];

impl FinalActionPlan {
    pub fn validate(&self) -> Result<()> {
        if self.weeks.len() != WEEKS {
            return Err(PlannerError::Shape(format!(
                "a plan has {WEEKS} weeks, got {}",
                self.weeks.len()
            )));
        }
        for (k, w) in self.weeks.iter().enumerate() {
            if w.week.index() as usize != k + 1 {
                return Err(PlannerError::Shape(format!(
                    "week {} stored at position {}",
                    w.week,
                    k + 1
                )));
            }
            if expand_genome(w.week, &w.genome)? != w.expanded_days {
                return Err(PlannerError::Shape(format!(
                    "{} day plans disagree with its genome",
                    w.week
                )));
            }
        }
        Ok(())
    }

    /// All 40 day plans in calendar order.
    pub fn day_plans(&self) -> Vec<DayPlan> {
        self.weeks
            .iter()
            .flat_map(|w| w.expanded_days.iter().copied())
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let plan: Self = serde_json::from_str(s)?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(PLAN_CSV_COLUMNS)?;
        for p in self.day_plans() {
            w.serialize(p.to_input().map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }
}

/// Reads the 40-day CSV written by [`FinalActionPlan::write_csv`].
pub fn read_plan_csv(text: &str) -> Result<Vec<DayPlan>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let v: Vec<f64> = rec
            .iter()
            .map(|f| {
                f.trim()
                    .parse::<f64>()
                    .map_err(|e| PlannerError::Shape(format!("plan csv: {e}")))
            })
            .collect::<Result<_>>()?;
        let p = DayPlan::from_input(&v)?;
        p.validate()?;
        out.push(p);
    }
    if out.len() != FLOCK_DAYS {
        return Err(PlannerError::Shape(format!(
            "plan csv has {} days, expected {FLOCK_DAYS}",
            out.len()
        )));
    }
    Ok(out)
}

/// Mismatch between a week's predicted last day and the starting state
/// chosen for the next week, in physical units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryError {
    pub week: Week,
    pub predicted: [f64; RESPONSE_WIDTH],
    pub target: [f64; RESPONSE_WIDTH],
    pub absolute: [f64; RESPONSE_WIDTH],
    /// Absolute error over the target, as a percentage.
    pub relative_pct: [f64; RESPONSE_WIDTH],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeekRun {
    pub week: Week,
    pub best_fitness: f64,
    pub stop: StopReason,
    pub generations: usize,
    pub evaluations: usize,
    pub elapsed_s: f64,
    pub restrictions: Restrictions,
    pub history: Vec<GenerationStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannerReport {
    pub fcr_est: f64,
    pub fcr_res: f64,
    /// Weeks 5 down to 1.
    pub boundary: Vec<BoundaryError>,
    /// Weeks in optimisation order, 6 down to 1.
    pub weeks: Vec<WeekRun>,
    pub runtime_s: f64,
}

impl PlannerReport {
    pub fn worst_relative_pct(&self) -> f64 {
        self.boundary
            .iter()
            .flat_map(|b| b.relative_pct)
            .fold(0.0, f64::max)
    }

    /// `|fcr_res − fcr_est| / fcr_est` as a percentage.
    pub fn gap_pct(&self) -> f64 {
        100.0 * (self.fcr_res - self.fcr_est).abs() / self.fcr_est
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlannerProgress<'a> {
    pub week: Week,
    pub stats: &'a GenerationStats,
}

fn check_models(models: &[WeekModel]) -> Result<()> {
    if models.len() != WEEKS {
        return Err(PlannerError::Shape(format!(
            "need {WEEKS} week models, got {}",
            models.len()
        )));
    }
    for (k, m) in models.iter().enumerate() {
        if m.week.index() as usize != k + 1 {
            return Err(PlannerError::Shape(format!(
                "{} stored at position {}",
                m.week,
                k + 1
            )));
        }
        m.validate()?;
    }
    Ok(())
}

fn check_restrictions(models: &[WeekModel], restrictions: &[Restrictions]) -> Result<()> {
    if restrictions.len() != WEEKS {
        return Err(PlannerError::Shape(format!(
            "need {WEEKS} restriction sets, got {}",
            restrictions.len()
        )));
    }
    for (m, r) in models.iter().zip(restrictions) {
        if r.len() != m.week.input_len() {
            return Err(PlannerError::Shape(format!(
                "{} restrictions have {} genes, expected {}",
                m.week,
                r.len(),
                m.week.input_len()
            )));
        }
        // the search box must sit inside the scaling bounds so every
        // candidate can be scaled without clamping
        for k in 0..r.len() {
            if r.lower[k] < m.bounds.mini[k] - 1e-9 || r.upper[k] > m.bounds.maxi[k] + 1e-9 {
                return Err(PlannerError::Shape(format!(
                    "{} gene {k}: search range [{}, {}] leaves the model bounds [{}, {}]",
                    m.week, r.lower[k], r.upper[k], m.bounds.mini[k], m.bounds.maxi[k]
                )));
            }
        }
    }
    Ok(())
}

/// Runs the reverse-week search and returns the plan with its report.
pub fn optimize_flock(
    models: &[WeekModel],
    restrictions: &[Restrictions],
    cfg: &GaConfig,
    mut progress: impl FnMut(PlannerProgress<'_>),
) -> Result<(FinalActionPlan, PlannerReport)> {
    check_models(models)?;
    check_restrictions(models, restrictions)?;
    let start = Instant::now();
    let mut genomes: Vec<Option<Vec<f64>>> = vec![None; WEEKS];
    let mut runs = Vec::with_capacity(WEEKS);
    let mut fcr_est = f64::NAN;

    for week in Week::all().rev() {
        let k = week.index() as usize - 1;
        let model = &models[k];
        let r = &restrictions[k];
        let repair = PlanRepair::new(r)?;
        let week_cfg = GaConfig {
            seed: cfg.seed.wrapping_add(k as u64),
            ..cfg.clone()
        };
        let mut report = |s: &GenerationStats| progress(PlannerProgress { week, stats: s });
        let res = match week.next() {
            None => run_ga_with(&FinalWeek { model, repair }, r, &week_cfg, &mut report)?,
            Some(next) => {
                let next_genome = genomes[next.index() as usize - 1]
                    .as_ref()
                    .expect("later week solved first");
                let target = boundary_target(model, next_genome)?;
                run_ga_with(
                    &Stitch {
                        model,
                        target,
                        repair,
                    },
                    r,
                    &week_cfg,
                    &mut report,
                )?
            }
        };
        log::info!(
            "{week}: best {:.6} after {} generations ({:?})",
            res.best_fitness,
            res.generations,
            res.stop
        );
        if week.next().is_none() {
            fcr_est = res.best_fitness;
        }
        genomes[k] = Some(res.best.clone());
        runs.push(WeekRun {
            week,
            best_fitness: res.best_fitness,
            stop: res.stop,
            generations: res.generations,
            evaluations: res.evaluations,
            elapsed_s: res.elapsed_s,
            restrictions: r.clone(),
            history: res.history,
        });
    }

    let weeks = Week::all()
        .zip(genomes)
        .map(|(w, g)| WeekPlan::new(w, g.expect("every week solved")))
        .collect::<Result<Vec<_>>>()?;
    let mut i_c = [0.0; RESPONSE_WIDTH];
    i_c.copy_from_slice(&weeks[0].genome[PREV_OUTPUT]);
    let mut plan = FinalActionPlan {
        weeks,
        i_c,
        fcr_est,
        fcr_res: f64::NAN,
    };
    let boundary = boundary_errors(models, &plan)?;
    plan.fcr_res = rollout_progressive(models, &plan)?.fcr;
    let report = PlannerReport {
        fcr_est,
        fcr_res: plan.fcr_res,
        boundary,
        weeks: runs,
        runtime_s: start.elapsed().as_secs_f64(),
    };
    Ok((plan, report))
}

/// Boundary table of a plan, weeks 5 down to 1.
pub fn boundary_errors(models: &[WeekModel], plan: &FinalActionPlan) -> Result<Vec<BoundaryError>> {
    check_models(models)?;
    let mut out = Vec::with_capacity(WEEKS - 1);
    for k in (0..WEEKS - 1).rev() {
        let predicted = models[k]
            .forward_week_with(&plan.weeks[k].genome, NormMode::Clamp)?
            .last();
        let mut target = [0.0; RESPONSE_WIDTH];
        target.copy_from_slice(&plan.weeks[k + 1].genome[PREV_OUTPUT]);
        let mut absolute = [0.0; RESPONSE_WIDTH];
        let mut relative_pct = [0.0; RESPONSE_WIDTH];
        for j in 0..RESPONSE_WIDTH {
            absolute[j] = (predicted[j] - target[j]).abs();
            relative_pct[j] = if target[j] != 0.0 {
                100.0 * absolute[j] / target[j].abs()
            } else {
                0.0
            };
        }
        out.push(BoundaryError {
            week: models[k].week,
            predicted,
            target,
            absolute,
            relative_pct,
        });
    }
    Ok(out)
}

/// Predicted 40-day course of a flock.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    /// `[mdw, dfcpb, nlbpa]` for days 1..=40.
    pub days: Vec<[f64; RESPONSE_WIDTH]>,
    pub fcr: f64,
}

/// Chains the week models forward from `i_c`, feeding each week's last
/// predicted day in as the next week's starting state. Only the plan
/// genes of `genomes` are used.
pub fn rollout_genomes(
    models: &[WeekModel],
    genomes: &[&[f64]],
    i_c: &[f64; RESPONSE_WIDTH],
) -> Result<Trajectory> {
    check_models(models)?;
    if genomes.len() != WEEKS {
        return Err(PlannerError::Shape(format!(
            "need {WEEKS} week genomes, got {}",
            genomes.len()
        )));
    }
    let mut state = *i_c;
    let mut days = Vec::with_capacity(FLOCK_DAYS);
    for (m, g) in models.iter().zip(genomes) {
        let mut v = g.to_vec();
        if v.len() != m.week.input_len() {
            return Err(PlannerError::Shape(format!(
                "{} genome needs {} genes, got {}",
                m.week,
                m.week.input_len(),
                v.len()
            )));
        }
        v[PREV_OUTPUT].copy_from_slice(&state);
        let fc = m.forward_week_with(&v, NormMode::Clamp)?;
        state = fc.last();
        days.extend(fc.days);
    }
    Ok(Trajectory {
        fcr: fcr_of(&state)?,
        days,
    })
}

/// Realised FCR of a final plan: the week models run from week 1 to 6.
pub fn rollout_progressive(models: &[WeekModel], plan: &FinalActionPlan) -> Result<Trajectory> {
    let genomes: Vec<&[f64]> = plan.weeks.iter().map(|w| w.genome.as_slice()).collect();
    rollout_genomes(models, &genomes, &plan.i_c)
}

/// Progressive rollout of 40 explicit day plans.
pub fn rollout_plans(
    models: &[WeekModel],
    plans: &[DayPlan],
    i_c: &[f64; RESPONSE_WIDTH],
) -> Result<Trajectory> {
    if plans.len() != FLOCK_DAYS {
        return Err(PlannerError::Shape(format!(
            "need {FLOCK_DAYS} day plans, got {}",
            plans.len()
        )));
    }
    let genomes: Vec<Vec<f64>> = Week::all()
        .map(|w| {
            let flat: Vec<f64> = plans[w.day_range()]
                .iter()
                .flat_map(|p| p.to_input())
                .collect();
            week::join_input(&flat, i_c)
        })
        .collect();
    let refs: Vec<&[f64]> = genomes.iter().map(Vec::as_slice).collect();
    rollout_genomes(models, &refs, i_c)
}

/// One searched gene of an exhaustive grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridAxis {
    pub gene: usize,
    pub lower: f64,
    pub upper: f64,
    pub step: f64,
}

impl GridAxis {
    pub fn points(&self) -> u64 {
        if self.upper <= self.lower || self.step <= 0.0 {
            return 1;
        }
        ((self.upper - self.lower) / self.step + 1e-9).floor() as u64 + 1
    }

    pub fn value(&self, i: u64) -> f64 {
        (self.lower + i as f64 * self.step).min(self.upper)
    }
}

/// Number of grid points, as a float since realistic plan grids overflow
/// any integer type.
pub fn grid_cardinality(axes: &[GridAxis]) -> f64 {
    axes.iter().map(|a| a.points() as f64).product()
}

/// Box that lets only the grid genes move, each over its axis range.
pub fn restrictions_for_axes(base: &[f64], axes: &[GridAxis]) -> Result<Restrictions> {
    let mut r = Restrictions::point(base);
    for a in axes {
        if a.gene >= base.len() {
            return Err(PlannerError::Shape(format!(
                "axis gene {} outside a genome of {}",
                a.gene,
                base.len()
            )));
        }
        r.lower[a.gene] = a.lower;
        r.upper[a.gene] = a.upper;
    }
    Ok(r)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub genome: Vec<f64>,
    pub fitness: f64,
    pub evaluations: u64,
}

/// Evaluates every grid point (the other genes stay at `base`) and
/// returns the minimiser. Ties go to the first point in grid order.
pub fn exhaustive_oracle<O: Objective + ?Sized>(
    obj: &O,
    base: &[f64],
    axes: &[GridAxis],
    budget: u64,
) -> Result<OracleResult> {
    let cardinality = grid_cardinality(axes);
    if cardinality > budget as f64 {
        return Err(PlannerError::BudgetExceeded {
            cardinality,
            budget,
        });
    }
    restrictions_for_axes(base, axes)?;
    let total = cardinality as u64;
    let point = |mut idx: u64| {
        let mut g = base.to_vec();
        for a in axes {
            let n = a.points();
            g[a.gene] = a.value(idx % n);
            idx /= n;
        }
        g
    };
    let (best_idx, fitness) = (0..total)
        .into_par_iter()
        .map(|i| (i, obj.fitness(&point(i))))
        .reduce(
            || (u64::MAX, f64::INFINITY),
            |a, b| match a.1.total_cmp(&b.1) {
                std::cmp::Ordering::Less => a,
                std::cmp::Ordering::Greater => b,
                std::cmp::Ordering::Equal => (a.0.min(b.0), a.1),
            },
        );
    if !fitness.is_finite() {
        return Err(EvolveError::FitnessNonFinite {
            value: fitness,
            genome: point(best_idx.min(total.saturating_sub(1))),
        }
        .into());
    }
    Ok(OracleResult {
        genome: point(best_idx),
        fitness,
        evaluations: total,
    })
}

/// Centre of a search box, repaired: a neutral genome for grids that only
/// move a few genes.
pub fn box_midpoint(r: &Restrictions) -> Result<Vec<f64>> {
    let mut g: Vec<f64> = r
        .lower
        .iter()
        .zip(&r.upper)
        .map(|(l, u)| 0.5 * (l + u))
        .collect();
    PlanRepair::new(r)?.apply(&mut g);
    Ok(g)
}

/// Grid over climate columns (1 = Tmin … 6 = Hmax) of the first `days`
/// days of a week genome. Temperatures use `t_step`, humidities `h_step`.
pub fn day_axes(
    r: &Restrictions,
    week: Week,
    days: usize,
    columns: &[usize],
    t_step: f64,
    h_step: f64,
) -> Result<Vec<GridAxis>> {
    if days == 0 || days > week.len() || r.len() != week.input_len() {
        return Err(PlannerError::Shape(format!(
            "{week} has {} days and {} genes",
            week.len(),
            week.input_len()
        )));
    }
    if let Some(c) = columns.iter().find(|c| !(1..PLAN_WIDTH).contains(*c)) {
        return Err(PlannerError::Shape(format!(
            "column {c} is not a climate set-point"
        )));
    }
    let mut axes = Vec::new();
    for t in 1..=days {
        let s = week::plan_slot(t).start;
        for &c in columns {
            axes.push(GridAxis {
                gene: s + c,
                lower: r.lower[s + c],
                upper: r.upper[s + c],
                step: if c <= 3 { t_step } else { h_step },
            });
        }
    }
    Ok(axes)
}

/// Grid over every climate gene of a 40-day plan at the given steps.
pub fn full_plan_axes(restrictions: &[Restrictions], t_step: f64, h_step: f64) -> Vec<GridAxis> {
    let mut axes = Vec::new();
    let mut offset = 0;
    for (w, r) in Week::all().zip(restrictions) {
        for t in 1..=w.len() {
            let s = week::plan_slot(t).start;
            for (j, step) in [
                (1, t_step),
                (2, t_step),
                (3, t_step),
                (4, h_step),
                (5, h_step),
                (6, h_step),
            ] {
                axes.push(GridAxis {
                    gene: offset + s + j,
                    lower: r.lower[s + j],
                    upper: r.upper[s + j],
                    step,
                });
            }
        }
        offset += r.len();
    }
    axes
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomBenchmark {
    pub n: usize,
    pub best_fcr: f64,
    pub mean_fcr: f64,
    pub sd_fcr: f64,
    pub worst_fcr: f64,
    pub median_fcr: f64,
    pub fcrs: Vec<f64>,
    /// Week genomes of the best random plan, starting state included.
    pub best_genomes: Vec<Vec<f64>>,
}

/// Samples `n` random feasible plans (arrival state included) inside the
/// weekly search boxes and rolls each out progressively.
pub fn benchmark_random_specialists(
    models: &[WeekModel],
    restrictions: &[Restrictions],
    n: usize,
    seed: u64,
) -> Result<RandomBenchmark> {
    check_models(models)?;
    check_restrictions(models, restrictions)?;
    if n == 0 {
        return Err(PlannerError::Shape(
            "at least one random plan is needed".into(),
        ));
    }
    let repairs = restrictions
        .iter()
        .map(PlanRepair::new)
        .collect::<Result<Vec<_>>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let plans: Vec<Vec<Vec<f64>>> = (0..n)
        .map(|_| {
            restrictions
                .iter()
                .zip(&repairs)
                .map(|(r, rep)| {
                    let mut g: Vec<f64> = r
                        .lower
                        .iter()
                        .zip(&r.upper)
                        .map(|(&l, &u)| if u > l { rng.random_range(l..=u) } else { l })
                        .collect();
                    rep.apply(&mut g);
                    g
                })
                .collect()
        })
        .collect();
    let fcrs = plans
        .par_iter()
        .map(|p| {
            let refs: Vec<&[f64]> = p.iter().map(Vec::as_slice).collect();
            let mut i_c = [0.0; RESPONSE_WIDTH];
            i_c.copy_from_slice(&p[0][PREV_OUTPUT]);
            rollout_genomes(models, &refs, &i_c).map(|t| t.fcr)
        })
        .collect::<Result<Vec<f64>>>()?;
    let best = (0..n)
        .min_by(|&a, &b| fcrs[a].total_cmp(&fcrs[b]))
        .expect("n > 0");
    let mean = fcrs.iter().sum::<f64>() / n as f64;
    let sd = if n > 1 {
        (fcrs.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    let mut sorted = fcrs.clone();
    sorted.sort_by(f64::total_cmp);
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    Ok(RandomBenchmark {
        n,
        best_fcr: fcrs[best],
        mean_fcr: mean,
        sd_fcr: sd,
        worst_fcr: sorted[n - 1],
        median_fcr: median,
        fcrs,
        best_genomes: plans[best].clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_corpus, GeneratorConfig};
    use crate::surrogate::train::Hyperparams;
    use crate::surrogate::{train_week_model, WeekBounds};

    fn zero_models() -> Vec<WeekModel> {
        let samples = generate_corpus(&GeneratorConfig::default(), 4).unwrap();
        partition_weeks(&samples)
            .unwrap()
            .iter()
            .map(|w| {
                WeekModel::zeroed(
                    w.week,
                    &WeekBounds::fit(&[w], 0.05).unwrap(),
                    &Hyperparams::default(),
                )
            })
            .collect()
    }

    fn set_last_output(model: &mut WeekModel, raw: [f64; 3]) {
        // a zero network outputs reLU(bias), so the head bias fixes the output
        let y = model.normalize_response(&raw).unwrap();
        model.network.out_b = y.to_vec();
    }

    #[test]
    fn week6_fitness_is_day40_fcr() {
        let mut models = zero_models();
        let m = &mut models[5];
        let b = m.response_bounds();
        set_last_output(m, [2800.0, 4.3686, b.mini[2]]);
        let g: Vec<f64> = m
            .bounds
            .mini
            .iter()
            .zip(&m.bounds.maxi)
            .map(|(a, b)| 0.5 * (a + b))
            .collect();
        let f = fitness_week6(&g, m).unwrap();
        assert!((f - 1.5602).abs() < 5e-5, "{f}");
        assert!(matches!(
            fitness_week6(&g[..37], m),
            Err(PlannerError::Surrogate(SurrogateError::DimensionMismatch(
                _
            )))
        ));
    }

    #[test]
    fn fcr_floor_and_monotonicity() {
        assert_eq!(fcr_of(&[2500.0, 0.0, 12.0]).unwrap(), 0.0);
        assert!(fcr_of(&[2500.0, 4.4, 12.0]).unwrap() > fcr_of(&[2500.0, 4.2, 12.0]).unwrap());
    }

    #[test]
    fn boundary_gap_examples() {
        assert_eq!(boundary_gap(&[0.3, 0.4, 0.5], &[0.3, 0.4, 0.5]), 0.0);
        assert!((boundary_gap(&[0.33, 0.4, 0.5], &[0.3, 0.4, 0.5]) - 0.01).abs() < 1e-12);
        let (a, b) = ([0.1, 0.7, 0.2], [0.4, 0.5, 0.9]);
        assert_eq!(boundary_gap(&a, &b), boundary_gap(&b, &a));
        let models = zero_models();
        assert!(matches!(
            fitness_boundary(&[0.0; 38], &models[4], &[0.0; 3]),
            Err(PlannerError::Surrogate(SurrogateError::DimensionMismatch(
                _
            )))
        ));
    }

    #[test]
    fn repair_orders_triples_inside_the_box() {
        let samples = generate_corpus(&GeneratorConfig::default(), 6).unwrap();
        let r = restrictions_from_samples(&samples).unwrap();
        let rep = PlanRepair::new(&r[2]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..500 {
            let mut g: Vec<f64> = r[2]
                .lower
                .iter()
                .zip(&r[2].upper)
                .map(|(&l, &u)| if u > l { rng.random_range(l..=u) } else { l })
                .collect();
            rep.apply(&mut g);
            assert_eq!(r[2].first_violation(&g).unwrap(), None);
            expand_genome(Week::new(3).unwrap(), &g).unwrap();
        }
    }

    #[test]
    fn point_restrictions_reproduce_the_point() {
        let samples = generate_corpus(&GeneratorConfig::default(), 6).unwrap();
        let weeks = partition_weeks(&samples).unwrap();
        let hp = Hyperparams {
            epochs: 20,
            ..Hyperparams::default()
        };
        let models: Vec<WeekModel> = weeks
            .iter()
            .map(|w| train_week_model(w, &WeekBounds::fit(&[w], 0.05).unwrap(), &hp).unwrap())
            .collect();
        let r: Vec<Restrictions> = weeks
            .iter()
            .map(|w| Restrictions::point(&w.inputs[0]))
            .collect();
        let cfg = GaConfig {
            pop_size: 10,
            max_iterations: 3,
            ..GaConfig::default()
        };
        let (plan, report) = optimize_flock(&models, &r, &cfg, |_| {}).unwrap();
        for (wp, w) in plan.weeks.iter().zip(&weeks) {
            assert_eq!(wp.genome, w.inputs[0]);
        }
        assert_eq!(
            plan.fcr_est,
            fitness_week6(&weeks[5].inputs[0], &models[5]).unwrap()
        );
        assert_eq!(report.boundary.len(), 5);
        assert_eq!(report.boundary[0].week, Week::new(5).unwrap());
        assert_eq!(plan.day_plans(), samples[0].plans);
        let back = FinalActionPlan::from_json(&plan.to_json().unwrap()).unwrap();
        assert_eq!(back, plan);
        assert_eq!(
            read_plan_csv(&plan.to_csv().unwrap()).unwrap(),
            samples[0].plans
        );
    }

    #[test]
    fn oracle_grids() {
        // convex bowl around 26.2 on a 0.5 grid over [24, 29]
        let obj = |g: &[f64]| (g[0] - 26.2).powi(2);
        let axes = [GridAxis {
            gene: 0,
            lower: 24.0,
            upper: 29.0,
            step: 0.5,
        }];
        assert_eq!(axes[0].points(), 11);
        let res = exhaustive_oracle(&obj, &[0.0], &axes, 1000).unwrap();
        assert_eq!((res.genome[0], res.evaluations), (26.0, 11));

        let single = [GridAxis {
            gene: 1,
            lower: 3.0,
            upper: 3.0,
            step: 0.5,
        }];
        let res = exhaustive_oracle(&obj, &[27.0, 0.0], &single, 10).unwrap();
        assert_eq!(res.genome, vec![27.0, 3.0]);

        let samples = generate_corpus(&GeneratorConfig::default(), 12).unwrap();
        let r = restrictions_from_samples(&samples).unwrap();
        let full = full_plan_axes(&r, 0.5, 1.0);
        assert_eq!(full.len(), 6 * FLOCK_DAYS);
        match exhaustive_oracle(&obj, &vec![0.0; 300], &full, 10_000_000) {
            Err(PlannerError::BudgetExceeded { cardinality, .. }) => {
                assert!(cardinality > 1e100, "{cardinality}")
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn one_random_plan_is_one_rollout() {
        let models = zero_models();
        let samples = generate_corpus(&GeneratorConfig::default(), 4).unwrap();
        let r = restrictions_from_samples(&samples).unwrap();
        let b = benchmark_random_specialists(&models, &r, 1, 5).unwrap();
        let refs: Vec<&[f64]> = b.best_genomes.iter().map(Vec::as_slice).collect();
        let mut i_c = [0.0; 3];
        i_c.copy_from_slice(&b.best_genomes[0][PREV_OUTPUT]);
        let t = rollout_genomes(&models, &refs, &i_c).unwrap();
        assert_eq!(t.days.len(), FLOCK_DAYS);
        assert_eq!((b.best_fcr, b.worst_fcr, b.sd_fcr), (t.fcr, t.fcr, 0.0));
    }
}
