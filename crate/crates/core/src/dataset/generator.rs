//! Synthetic flock generator used as the ground-truth response.
//!
//! Growth follows a logistic curve shifted to start at the arrival weight.
//! Each day's nominal gain is scaled by a thermal-comfort factor
//! `exp(−s_T·(Tavg − comfort_T)²)·exp(−s_H·(Havg − comfort_H)²)`, a per-flock
//! vigour factor and a small daily noise. Feed per bird covers maintenance
//! (proportional to the current weight) plus the *nominal* gain, so climate
//! stress wastes feed instead of saving it. Mortality has a baseline, an
//! early-cull term for the first days and heat deaths once birds are heavy.
//!
//! Every random draw is seeded from `(seed, flock, day)`, so a flock can be
//! advanced one day at a time (see [`FlockState`]) and still match the
//! batch generator exactly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::DatasetError;
use crate::domain::{
    DayOutcome, DayPlan, FlockSample, HouseGeometry, InitialConditions, FLOCK_DAYS,
};
use crate::week::Week;

pub const GENERATOR_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Growth {
    /// Logistic asymptote, grams.
    pub asymptote_g: f64,
    /// Logistic rate, 1/day.
    pub rate: f64,
    pub midpoint_day: f64,
    pub arrival_weight_g: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stress {
    /// Gain penalty per °C² of Tavg deviation from comfort.
    pub temperature: f64,
    /// Gain penalty per %² of Havg deviation from comfort.
    pub humidity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feed {
    /// Daily maintenance feed per gram of body weight, g/g.
    pub maintenance: f64,
    /// Feed per gram of nominal gain, g/g.
    pub per_gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mortality {
    /// Daily death probability.
    pub base_rate: f64,
    /// Extra daily rate during the first `early_cull_days`.
    pub early_cull_rate: f64,
    pub early_cull_days: u32,
    /// Extra daily rate per °C of Tmax above `comfort + heat_margin_c`.
    pub heat_rate: f64,
    pub heat_margin_c: f64,
    /// Heat deaths only occur after this day.
    pub heat_after_day: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Noise {
    pub arrival_weight_sd: f64,
    /// Per-flock multiplicative gain factor sd.
    pub flock_gain_sd: f64,
    /// Per-flock multiplicative feed factor sd.
    pub flock_feed_sd: f64,
    pub daily_gain_sd: f64,
    /// Log-normal sigma of daily death counts.
    pub mortality_sigma: f64,
}

/// Specialist plan model used to create the historical corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecialistStyle {
    pub temperature_bias_sd: f64,
    pub temperature_daily_sd: f64,
    pub humidity_bias_sd: f64,
    pub humidity_daily_sd: f64,
    /// Range of Tavg − Tmin and Tmax − Tavg, °C.
    pub temperature_spread: [f64; 2],
    /// Range of Havg − Hmin and Hmax − Havg, %.
    pub humidity_spread: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub schema_version: u32,
    /// Comfort Tavg per production week, °C.
    pub comfort_t: Vec<f64>,
    /// Comfort Havg per production week, %.
    pub comfort_h: Vec<f64>,
    pub growth: Growth,
    pub stress: Stress,
    pub feed: Feed,
    pub mortality: Mortality,
    pub noise: Noise,
    pub specialist: SpecialistStyle,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            schema_version: GENERATOR_SCHEMA_VERSION,
            comfort_t: vec![31.415, 28.13, 26.615, 25.435, 24.21, 24.175],
            comfort_h: vec![54.82, 65.38, 67.35, 73.815, 77.205, 77.395],
            growth: Growth {
                asymptote_g: 4400.0,
                rate: 0.095,
                midpoint_day: 33.0,
                arrival_weight_g: 42.0,
            },
            stress: Stress {
                temperature: 0.02,
                humidity: 0.0015,
            },
            feed: Feed {
                maintenance: 0.022,
                per_gain: 1.25,
            },
            mortality: Mortality {
                base_rate: 0.0008,
                early_cull_rate: 0.002,
                early_cull_days: 10,
                heat_rate: 0.0003,
                heat_margin_c: 2.0,
                heat_after_day: 25,
            },
            noise: Noise {
                arrival_weight_sd: 0.5,
                flock_gain_sd: 0.02,
                flock_feed_sd: 0.006,
                daily_gain_sd: 0.02,
                mortality_sigma: 0.3,
            },
            specialist: SpecialistStyle {
                temperature_bias_sd: 0.75,
                temperature_daily_sd: 0.6,
                humidity_bias_sd: 2.0,
                humidity_daily_sd: 2.0,
                temperature_spread: [1.0, 2.5],
                humidity_spread: [3.0, 8.0],
            },
            seed: 2024,
        }
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent generator for one `(seed, stream, flock, day)` cell.
fn cell_rng(seed: u64, stream: u64, flock_id: u32, day: u32) -> ChaCha8Rng {
    let key = splitmix(splitmix(splitmix(seed) ^ stream) ^ u64::from(flock_id)) ^ u64::from(day);
    ChaCha8Rng::seed_from_u64(splitmix(key))
}

const STREAM_FLOCK: u64 = 1;
const STREAM_PLAN: u64 = 2;
const STREAM_CORPUS: u64 = 3;

fn normal(sd: f64) -> Normal<f64> {
    Normal::new(0.0, sd).expect("validated sd")
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<(), DatasetError> {
        let bad = |msg: String| Err(DatasetError::ConfigDomain(msg));
        if self.schema_version != GENERATOR_SCHEMA_VERSION {
            return Err(DatasetError::SchemaVersion {
                found: self.schema_version,
                expected: GENERATOR_SCHEMA_VERSION,
            });
        }
        for (name, curve) in [
            ("comfort_t", &self.comfort_t),
            ("comfort_h", &self.comfort_h),
        ] {
            if curve.len() != Week::all().count() || curve.iter().any(|v| !v.is_finite()) {
                return bad(format!("{name} needs one finite value per week"));
            }
        }
        if self.comfort_h.iter().any(|h| !(0.0..=100.0).contains(h)) {
            return bad("comfort humidity outside 0..100 %".into());
        }
        let g = &self.growth;
        if !(g.asymptote_g > 0.0
            && g.rate > 0.0
            && g.arrival_weight_g > 0.0
            && g.midpoint_day.is_finite())
        {
            return bad("growth parameters must be positive".into());
        }
        let n = &self.noise;
        let s = &self.specialist;
        let non_negative = [
            self.stress.temperature,
            self.stress.humidity,
            self.feed.maintenance,
            self.feed.per_gain,
            self.mortality.base_rate,
            self.mortality.early_cull_rate,
            self.mortality.heat_rate,
            n.arrival_weight_sd,
            n.flock_gain_sd,
            n.flock_feed_sd,
            n.daily_gain_sd,
            n.mortality_sigma,
            s.temperature_bias_sd,
            s.temperature_daily_sd,
            s.humidity_bias_sd,
            s.humidity_daily_sd,
        ];
        if non_negative.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return bad("rates and noise scales must be finite and non-negative".into());
        }
        if !(s.temperature_spread[0] >= 0.0 && s.temperature_spread[0] <= s.temperature_spread[1])
            || !(s.humidity_spread[0] >= 0.0 && s.humidity_spread[0] <= s.humidity_spread[1])
        {
            return bad("specialist spreads must be ordered and non-negative".into());
        }
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<Self, DatasetError> {
        let cfg: Self = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    /// Same configuration with every noise source switched off.
    pub fn noiseless(&self) -> Self {
        let mut c = self.clone();
        c.noise = Noise {
            arrival_weight_sd: 0.0,
            flock_gain_sd: 0.0,
            flock_feed_sd: 0.0,
            daily_gain_sd: 0.0,
            mortality_sigma: 0.0,
        };
        c
    }

    /// Birds whose comfort temperature is `delta` °C away from the default.
    pub fn with_comfort_shift(&self, delta: f64) -> Self {
        let mut c = self.clone();
        c.comfort_t.iter_mut().for_each(|t| *t += delta);
        c
    }

    fn week_of(day: u32) -> usize {
        Week::of_day(day.clamp(1, FLOCK_DAYS as u32))
            .expect("clamped day")
            .index() as usize
            - 1
    }

    pub fn comfort_temperature(&self, day: u32) -> f64 {
        self.comfort_t[Self::week_of(day)]
    }

    pub fn comfort_humidity(&self, day: u32) -> f64 {
        self.comfort_h[Self::week_of(day)]
    }

    fn logistic(&self, day: f64) -> f64 {
        let g = &self.growth;
        g.asymptote_g / (1.0 + (-g.rate * (day - g.midpoint_day)).exp())
    }

    /// Stress-free weight trajectory, grams, for day `0..=40`.
    pub fn nominal_weight(&self, day: u32) -> f64 {
        self.growth.arrival_weight_g + self.logistic(f64::from(day)) - self.logistic(0.0)
    }

    pub fn nominal_gain(&self, day: u32) -> f64 {
        self.logistic(f64::from(day)) - self.logistic(f64::from(day) - 1.0)
    }

    /// Multiplicative gain factor in `(0, 1]` for the day's climate.
    pub fn comfort_factor(&self, plan: &DayPlan) -> f64 {
        let dt = plan.t_avg - self.comfort_temperature(plan.day);
        let dh = plan.h_avg - self.comfort_humidity(plan.day);
        (-self.stress.temperature * dt * dt).exp() * (-self.stress.humidity * dh * dh).exp()
    }

    /// Plan sitting exactly on the comfort curves.
    pub fn comfort_plan(&self) -> Vec<DayPlan> {
        (1..=FLOCK_DAYS as u32)
            .map(|day| {
                let t = self.comfort_temperature(day);
                let h = self.comfort_humidity(day);
                DayPlan {
                    day,
                    t_min: t - 1.5,
                    t_avg: t,
                    t_max: t + 1.5,
                    h_min: h - 5.0,
                    h_avg: h,
                    h_max: h + 5.0,
                }
            })
            .collect()
    }

    /// Plan as a human specialist might have applied it: the comfort
    /// curve with a persistent per-flock bias and day-to-day jitter. The bias
    /// is truncated at two standard deviations, as nobody strays further
    /// from the manual for a whole flock.
    pub fn specialist_plan(&self, flock_id: u32) -> Vec<DayPlan> {
        let s = &self.specialist;
        let mut rng = cell_rng(self.seed, STREAM_PLAN, flock_id, 0);
        let t_bias = normal(s.temperature_bias_sd)
            .sample(&mut rng)
            .clamp(-2.0 * s.temperature_bias_sd, 2.0 * s.temperature_bias_sd);
        let h_bias = normal(s.humidity_bias_sd)
            .sample(&mut rng)
            .clamp(-2.0 * s.humidity_bias_sd, 2.0 * s.humidity_bias_sd);
        (1..=FLOCK_DAYS as u32)
            .map(|day| {
                let mut rng = cell_rng(self.seed, STREAM_PLAN, flock_id, day);
                let t = self.comfort_temperature(day)
                    + t_bias
                    + normal(s.temperature_daily_sd).sample(&mut rng);
                let h = (self.comfort_humidity(day)
                    + h_bias
                    + normal(s.humidity_daily_sd).sample(&mut rng))
                .clamp(0.0, 100.0);
                let mut spread = |r: [f64; 2]| {
                    if r[1] > r[0] {
                        rng.random_range(r[0]..=r[1])
                    } else {
                        r[0]
                    }
                };
                let (tl, tu) = (spread(s.temperature_spread), spread(s.temperature_spread));
                let (hl, hu) = (spread(s.humidity_spread), spread(s.humidity_spread));
                DayPlan {
                    day,
                    t_min: t - tl,
                    t_avg: t,
                    t_max: t + tu,
                    h_min: (h - hl).max(0.0),
                    h_avg: h,
                    h_max: (h + hu).min(100.0),
                }
            })
            .collect()
    }

    /// Expected deaths for a day before noise.
    fn expected_deaths(&self, plan: &DayPlan, alive: u32) -> f64 {
        let m = &self.mortality;
        let mut rate = m.base_rate;
        if plan.day <= m.early_cull_days {
            rate += m.early_cull_rate;
        }
        if plan.day > m.heat_after_day {
            let excess = plan.t_max - self.comfort_temperature(plan.day) - m.heat_margin_c;
            if excess > 0.0 {
                rate += m.heat_rate * excess;
            }
        }
        rate * f64::from(alive)
    }
}

/// Running state of one flock, advanced a day at a time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlockState {
    pub flock_id: u32,
    pub house: HouseGeometry,
    pub initial_birds: u32,
    pub initial_conditions: InitialConditions,
    /// Days completed so far, `0..=40`.
    pub day: u32,
    pub mdw: f64,
    pub dfc: f64,
    pub nlb: u32,
    gain_factor: f64,
    feed_factor: f64,
}

impl FlockState {
    pub fn new(
        cfg: &GeneratorConfig,
        house: HouseGeometry,
        initial_birds: u32,
        flock_id: u32,
    ) -> Result<Self, DatasetError> {
        cfg.validate()?;
        house.validate()?;
        if initial_birds == 0 || initial_birds > house.capacity {
            return Err(DatasetError::ConfigDomain(format!(
                "initial flock {initial_birds} must be in 1..={}",
                house.capacity
            )));
        }
        let n = &cfg.noise;
        let mut rng = cell_rng(cfg.seed, STREAM_FLOCK, flock_id, 0);
        let arrival =
            (cfg.growth.arrival_weight_g + normal(n.arrival_weight_sd).sample(&mut rng)).max(1.0);
        let gain_factor = (1.0 + normal(n.flock_gain_sd).sample(&mut rng)).max(0.5);
        let feed_factor = (1.0 + normal(n.flock_feed_sd).sample(&mut rng)).max(0.5);
        Ok(Self {
            flock_id,
            house,
            initial_birds,
            initial_conditions: InitialConditions {
                mdw: arrival,
                dfcpb: 0.0,
                nlbpa: f64::from(initial_birds) / house.area_m2,
            },
            day: 0,
            mdw: arrival,
            dfc: 0.0,
            nlb: initial_birds,
            gain_factor,
            feed_factor,
        })
    }

    pub fn is_complete(&self) -> bool {
        self.day as usize >= FLOCK_DAYS
    }

    /// Applies one day's plan. `extra_deaths` are losses recorded from
    /// outside the model (an operator entry) and are added to the day's
    /// mortality before the living-bird count is updated.
    pub fn step(
        &mut self,
        cfg: &GeneratorConfig,
        plan: &DayPlan,
        extra_deaths: u32,
    ) -> Result<DayOutcome, DatasetError> {
        if self.is_complete() {
            return Err(DatasetError::FlockComplete);
        }
        let day = self.day + 1;
        if plan.day != day {
            return Err(DatasetError::Shape(format!(
                "flock {} expects the plan for day {day}, got day {}",
                self.flock_id, plan.day
            )));
        }
        plan.validate()?;
        let mut rng = cell_rng(cfg.seed, STREAM_FLOCK, self.flock_id, day);

        let nominal = cfg.nominal_gain(day);
        let noise = (1.0 + normal(cfg.noise.daily_gain_sd).sample(&mut rng)).max(0.0);
        let gain = nominal * cfg.comfort_factor(plan) * self.gain_factor * noise;

        let per_bird_g =
            self.feed_factor * (cfg.feed.maintenance * self.mdw + cfg.feed.per_gain * nominal);
        let feed_kg = per_bird_g / 1000.0 * f64::from(self.nlb);

        let expected = cfg.expected_deaths(plan, self.nlb);
        let sigma = cfg.noise.mortality_sigma;
        let deaths = if sigma > 0.0 {
            let z: f64 = normal(1.0).sample(&mut rng);
            (expected * (sigma * z - 0.5 * sigma * sigma).exp()).round()
        } else {
            expected.round()
        };
        let dm = (deaths as u64 + u64::from(extra_deaths)).min(u64::from(self.nlb)) as u32;

        self.day = day;
        self.mdw += gain;
        self.dfc += feed_kg;
        self.nlb -= dm;
        Ok(DayOutcome::from_raw(
            day,
            self.mdw,
            self.dfc,
            dm,
            self.nlb,
            &self.house,
        )?)
    }
}

/// Generates a complete flock under the given 40-day plan.
pub fn generate_flock(
    cfg: &GeneratorConfig,
    plans: &[DayPlan],
    house: HouseGeometry,
    initial_birds: u32,
    flock_id: u32,
) -> Result<FlockSample, DatasetError> {
    if plans.len() != FLOCK_DAYS {
        return Err(DatasetError::Shape(format!(
            "a flock needs {FLOCK_DAYS} day plans, got {}",
            plans.len()
        )));
    }
    let mut state = FlockState::new(cfg, house, initial_birds, flock_id)?;
    let outcomes = plans
        .iter()
        .map(|p| state.step(cfg, p, 0))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(FlockSample {
        flock_id,
        house,
        initial_birds,
        initial_conditions: state.initial_conditions,
        plans: plans.to_vec(),
        outcomes,
    })
}

/// Houses of the reference condominium.
pub fn condominium_houses() -> [HouseGeometry; 3] {
    [
        HouseGeometry::large(),
        HouseGeometry::small(),
        HouseGeometry::large(),
    ]
}

/// Historical corpus: flock `i` is raised in house `i % 3` under a
/// specialist plan, with 70–100 % of the house capacity placed.
pub fn generate_corpus(
    cfg: &GeneratorConfig,
    flocks: u32,
) -> Result<Vec<FlockSample>, DatasetError> {
    generate_corpus_from(cfg, cfg, 0, flocks)
}

/// Corpus whose plans come from `planning` specialists but whose birds
/// respond according to `birds`. Flock ids start at `first_id`.
pub fn generate_corpus_from(
    planning: &GeneratorConfig,
    birds: &GeneratorConfig,
    first_id: u32,
    flocks: u32,
) -> Result<Vec<FlockSample>, DatasetError> {
    let houses = condominium_houses();
    (first_id..first_id + flocks)
        .map(|id| {
            let house = houses[id as usize % houses.len()];
            let birds_placed = initial_birds_for(birds, house, id);
            generate_flock(
                birds,
                &planning.specialist_plan(id),
                house,
                birds_placed,
                id,
            )
        })
        .collect()
}

pub fn initial_birds_for(cfg: &GeneratorConfig, house: HouseGeometry, flock_id: u32) -> u32 {
    let mut rng = cell_rng(cfg.seed, STREAM_CORPUS, flock_id, 0);
    let share: f64 = rng.random_range(0.70..=1.0);
    (f64::from(house.capacity) * share).round() as u32
}

/// FCR of the stress-free comfort plan with every noise source off: the
/// best any plan can achieve in this generator.
pub fn ground_truth_optimum(
    cfg: &GeneratorConfig,
    house: HouseGeometry,
) -> Result<(FlockSample, f64), DatasetError> {
    let quiet = cfg.noiseless();
    let sample = generate_flock(&quiet, &quiet.comfort_plan(), house, house.capacity, 0)?;
    let fcr = sample.final_fcr()?;
    Ok((sample, fcr))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logistic_anchors() {
        let c = GeneratorConfig::default();
        assert_eq!(c.nominal_weight(0), 42.0);
        assert!((c.nominal_weight(7) - 201.8).abs() < 1.0);
        assert!((c.nominal_weight(40) - 2764.0).abs() < 2.0);
        let total: f64 = (1..=40).map(|d| c.nominal_gain(d)).sum();
        assert!((c.nominal_weight(40) - 42.0 - total).abs() < 1e-9);
    }

    #[test]
    fn comfort_plan_without_noise_follows_the_logistic() {
        let c = GeneratorConfig::default().noiseless();
        let s = generate_flock(&c, &c.comfort_plan(), HouseGeometry::large(), 34_800, 1).unwrap();
        s.validate().unwrap();
        for o in &s.outcomes {
            assert!((o.mdw - c.nominal_weight(o.day)).abs() < 1e-9);
        }
        let fcr = s.final_fcr().unwrap();
        assert!((1.45..1.65).contains(&fcr), "fcr {fcr}");
    }

    #[test]
    fn heat_lowers_weight_and_raises_mortality() {
        let c = GeneratorConfig::default().noiseless();
        let comfort = c.comfort_plan();
        let hot: Vec<DayPlan> = comfort
            .iter()
            .map(|p| DayPlan {
                t_min: p.t_min + 6.0,
                t_avg: p.t_avg + 6.0,
                t_max: p.t_max + 6.0,
                ..*p
            })
            .collect();
        let a = generate_flock(&c, &comfort, HouseGeometry::small(), 21_000, 3).unwrap();
        let b = generate_flock(&c, &hot, HouseGeometry::small(), 21_000, 3).unwrap();
        let dead = |s: &FlockSample| s.outcomes.iter().map(|o| o.dm).sum::<u32>();
        assert!(b.outcomes[39].mdw < a.outcomes[39].mdw);
        assert!(dead(&b) > dead(&a));
        assert!(b.final_fcr().unwrap() > a.final_fcr().unwrap());
    }

    #[test]
    fn deterministic_and_incremental() {
        let c = GeneratorConfig::default();
        let plans = c.specialist_plan(5);
        let a = generate_flock(&c, &plans, HouseGeometry::large(), 33_000, 5).unwrap();
        let b = generate_flock(&c, &plans, HouseGeometry::large(), 33_000, 5).unwrap();
        assert_eq!(a, b);
        let mut st = FlockState::new(&c, HouseGeometry::large(), 33_000, 5).unwrap();
        for (p, o) in plans.iter().zip(&a.outcomes) {
            assert_eq!(&st.step(&c, p, 0).unwrap(), o);
        }
        assert!(matches!(
            st.step(&c, &plans[0], 0),
            Err(DatasetError::FlockComplete)
        ));
    }

    #[test]
    fn specialist_plans_are_valid() {
        let c = GeneratorConfig::default();
        for id in 0..20 {
            for p in c.specialist_plan(id) {
                p.validate().unwrap();
            }
        }
    }

    #[test]
    fn config_json_roundtrip_and_validation() {
        let c = GeneratorConfig::default();
        assert_eq!(GeneratorConfig::from_json(&c.to_json()).unwrap(), c);
        let mut bad = c.clone();
        bad.comfort_t.pop();
        assert!(matches!(bad.validate(), Err(DatasetError::ConfigDomain(_))));
        let mut bad = c;
        bad.growth.asymptote_g = -1.0;
        assert!(bad.validate().is_err());
    }
}
