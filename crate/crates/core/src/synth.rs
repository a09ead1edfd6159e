//! Synthetic panels with a known national curve.
//!
//! Every plant follows the same national per-capita excretor rate scaled by
//! a plant multiplier. Multipliers are normalised so that
//! `Σ m_w R_w = Σ R_w`; without noise the population-weighted (method-1)
//! aggregate therefore equals the national rate on every sampling day.
//! Concentrations are back-solved from the excretor formula and then
//! perturbed by lognormal noise.

use std::collections::BTreeMap;

use chrono::{Datelike, Duration, NaiveDate, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::excretion::{DEFAULT_SHEDDING_PER_PERSON, ML_TO_DAY_FACTOR, PER_CAPITA_SCALE};
use crate::ingest::{PanelDataset, PlantId, PlantMeta, SampleRecord, SewerType};
use crate::series::DailySeries;

pub const AUSTRIAN_STATES: [&str; 9] = [
    "Burgenland",
    "Carinthia",
    "Lower Austria",
    "Salzburg",
    "Styria",
    "Tyrol",
    "Upper Austria",
    "Vienna",
    "Vorarlberg",
];

/// Gaussian bump `height · exp(−½((t − peak)/width)²)` in excretors per
/// 100,000 residents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Wave {
    pub peak: NaiveDate,
    pub height: f64,
    pub width_days: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_plants: usize,
    pub states: Vec<String>,
    pub residents_range: (u64, u64),
    pub start: NaiveDate,
    pub end: NaiveDate,
    /// Floor of the national rate, per 100,000 residents.
    pub baseline: f64,
    pub waves: Vec<Wave>,
    /// SD of the log plant multipliers before normalisation.
    pub plant_spread: f64,
    pub noise_sd_log: f64,
    pub sampling_days: [Weekday; 2],
    /// m³ of wastewater per resident and day.
    pub inflow_per_resident: f64,
    pub shedding_per_person: f64,
    /// Fill temperature, COD and nitrogen columns.
    pub chemistry: bool,
    pub seed: u64,
}

fn date(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).expect("valid literal date")
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_plants: 48,
            states: AUSTRIAN_STATES.iter().map(|s| s.to_string()).collect(),
            residents_range: (5_000, 1_000_000),
            start: date(2023, 1, 19),
            end: date(2024, 12, 31),
            baseline: 100.0,
            waves: vec![
                Wave {
                    peak: date(2023, 9, 20),
                    height: 800.0,
                    width_days: 25.0,
                },
                Wave {
                    peak: date(2024, 6, 15),
                    height: 1200.0,
                    width_days: 30.0,
                },
            ],
            plant_spread: 0.3,
            noise_sd_log: 0.15,
            sampling_days: [Weekday::Mon, Weekday::Thu],
            inflow_per_resident: 0.25,
            shedding_per_person: DEFAULT_SHEDDING_PER_PERSON,
            chemistry: true,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CoreError::InvalidInput(m));
        if self.n_plants == 0 {
            return bad("n_plants must be at least 1".into());
        }
        if self.states.is_empty() {
            return bad("at least one state label is required".into());
        }
        let (lo, hi) = self.residents_range;
        if lo == 0 || lo > hi {
            return bad(format!("residents range {lo}..{hi} must be positive and ordered"));
        }
        if self.end < self.start {
            return bad(format!("end {} precedes start {}", self.end, self.start));
        }
        if !(self.baseline > 0.0 && self.baseline.is_finite()) {
            return bad(format!("baseline must be positive, got {}", self.baseline));
        }
        for w in &self.waves {
            if !(w.width_days > 0.0) || !(w.height >= 0.0) {
                return bad(format!("wave {w:?} needs a positive width and non-negative height"));
            }
        }
        if !(self.noise_sd_log >= 0.0) || !(self.plant_spread >= 0.0) {
            return bad("noise_sd_log and plant_spread must be non-negative".into());
        }
        if !(self.inflow_per_resident > 0.0) || !(self.shedding_per_person > 0.0) {
            return bad("inflow_per_resident and shedding_per_person must be positive".into());
        }
        if self.sampling_days[0] == self.sampling_days[1] {
            return bad("sampling days must differ".into());
        }
        Ok(())
    }

    /// National excretors per 100,000 residents on `d`.
    pub fn national_rate(&self, d: NaiveDate) -> f64 {
        self.baseline
            + self
                .waves
                .iter()
                .map(|w| {
                    let z = (d - w.peak).num_days() as f64 / w.width_days;
                    w.height * (-0.5 * z * z).exp()
                })
                .sum::<f64>()
    }

    pub fn truth(&self) -> DailySeries {
        let n = (self.end - self.start).num_days() as usize + 1;
        let values = (0..n)
            .map(|i| self.national_rate(self.start + Duration::days(i as i64)))
            .collect();
        DailySeries::new(self.start, values, "truth").expect("non-empty span")
    }

    pub fn sampling_dates(&self) -> Vec<NaiveDate> {
        self.start
            .iter_days()
            .take_while(|d| *d <= self.end)
            .filter(|d| self.sampling_days.contains(&d.weekday()))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthPanel {
    pub dataset: PanelDataset,
    /// Configured national rate per 100,000 residents, every day.
    pub truth: DailySeries,
    pub multipliers: BTreeMap<PlantId, f64>,
}

pub fn generate_panel(cfg: &SynthConfig) -> Result<SynthPanel> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (lo, hi) = (cfg.residents_range.0 as f64, cfg.residents_range.1 as f64);
    let plants: Vec<PlantMeta> = (0..cfg.n_plants)
        .map(|i| {
            let u: f64 = rng.random();
            let residents = (lo.ln() + u * (hi.ln() - lo.ln())).exp().round().max(1.0) as u64;
            PlantMeta {
                plant_id: PlantId::new(format!("W{:03}", i + 1)),
                in_initial_program: i % 2 == 0,
                state: cfg.states[i % cfg.states.len()].clone(),
                sewer_type: SewerType::ALL[i % SewerType::ALL.len()],
                residents,
            }
        })
        .collect();
    let raw: Vec<f64> = plants
        .iter()
        .map(|_| (cfg.plant_spread * rng.sample::<f64, _>(StandardNormal)).exp())
        .collect();
    let total: f64 = plants.iter().map(|p| p.residents as f64).sum();
    let weighted: f64 = plants.iter().zip(&raw).map(|(p, m)| m * p.residents as f64).sum();
    let multipliers: Vec<f64> = raw.iter().map(|m| m * total / weighted).collect();

    let dates = cfg.sampling_dates();
    let samples: Vec<SampleRecord> = plants
        .par_iter()
        .zip(&multipliers)
        .enumerate()
        .flat_map_iter(|(i, (p, &m))| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(i as u64 + 1);
            dates
                .iter()
                .map(|&d| plant_sample(cfg, p, m, d, &mut rng))
                .collect::<Vec<_>>()
        })
        .collect();

    Ok(SynthPanel {
        multipliers: plants.iter().map(|p| p.plant_id.clone()).zip(multipliers).collect(),
        dataset: PanelDataset::new(plants, samples),
        truth: cfg.truth(),
    })
}

fn plant_sample(cfg: &SynthConfig, p: &PlantMeta, m: f64, d: NaiveDate, rng: &mut ChaCha8Rng) -> SampleRecord {
    let residents = p.residents as f64;
    let excretors = m * cfg.national_rate(d) * residents / PER_CAPITA_SCALE;
    let flow_noise: f64 = 0.1 * rng.sample::<f64, _>(StandardNormal);
    let inflow = residents * cfg.inflow_per_resident * flow_noise.exp();
    let clean = excretors * cfg.shedding_per_person / (inflow * ML_TO_DAY_FACTOR);
    let z: f64 = rng.sample(StandardNormal);
    let concentration = clean * (cfg.noise_sd_log * z).exp();
    let (temperature, cod, nitrogen, ammonium_nitrogen) = if cfg.chemistry {
        let season = (2.0 * std::f64::consts::PI * (d.ordinal() as f64 - 30.0) / 365.25).cos();
        let dilution = 1.0 / flow_noise.exp();
        (
            Some(round2(14.0 - 6.0 * season + rng.random_range(-1.0..1.0))),
            Some(round2(450.0 * dilution * rng.random_range(0.85..1.15))),
            Some(round2(50.0 * dilution * rng.random_range(0.85..1.15))),
            Some(round2(35.0 * dilution * rng.random_range(0.85..1.15))),
        )
    } else {
        (None, None, None, None)
    };
    SampleRecord {
        plant_id: p.plant_id.clone(),
        date: d,
        concentration,
        inflow,
        temperature,
        cod,
        nitrogen,
        ammonium_nitrogen,
        lab_sample_id: format!("{}-{}", p.plant_id, d.format("%Y%m%d")),
    }
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}
