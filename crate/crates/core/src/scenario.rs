//! Reduced sampling designs, sewer type/size subsets, and per-plant
//! influence on the national curve.
//!
//! The sampling grid crosses four plant-selection rules with three sampling
//! frequencies; the full design (all plants, twice a week) is the reference
//! and the other eleven cells are labelled:
//!
//! | frequency \ plants | all | initial | largest per state | largest |
//! |---|---|---|---|---|
//! | twice a week | Reference | S6 | S4 | S2 |
//! | once a week | S10 | S5 | S3 | S1 |
//! | once per two weeks | S11 | S9 | S8 | S7 |
//!
//! Sewer scenarios cross the four sewer types with two catchment sizes
//! (≥ 100,000 residents: S1, S3, S5, S7; smaller: S2, S4, S6, S8).

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use chrono::{Datelike, NaiveDate};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregation::{aggregate, AggregationConfig, Method, NationalCurve};
use crate::dissimilarity::{dissimilarity, DissimilarityConfig, Measure};
use crate::error::{CoreError, Result};
use crate::excretion::{build_excretors_panel, ExcretionConfig, ExcretorsPanel};
use crate::ingest::{PanelDataset, PlantId, PlantMeta, SewerType};
use crate::series::common_span;

pub const LARGE_PLANT_RESIDENTS: u64 = 100_000;

/// Everything needed to turn a dataset into a national curve and compare
/// two curves.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub excretion: ExcretionConfig,
    pub aggregation: AggregationConfig,
    pub dissimilarity: DissimilarityConfig,
}

/// Samples → excretors → daily interpolation → national curve.
pub fn national_curve(ds: &PanelDataset, cfg: &PipelineConfig) -> Result<NationalCurve> {
    let panel = build_excretors_panel(ds, &cfg.excretion)?;
    aggregate(&panel, &cfg.aggregation)
}

/// Compare two curves on the days both cover.
pub fn compare_curves(
    a: &NationalCurve,
    b: &NationalCurve,
    measure: Measure,
    cfg: &DissimilarityConfig,
) -> Result<f64> {
    let (_, x, y) = common_span(&a.series, &b.series)?;
    dissimilarity(measure, &x, &y, cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Volume {
    /// Every plant.
    All,
    /// Plants monitored since the programme started.
    Initial,
    /// The most populous plant of every state.
    LargestPerState,
    /// The single most populous plant.
    Largest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frequency {
    TwicePerWeek,
    OncePerWeek,
    OncePerTwoWeeks,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SamplingScenario {
    pub volume: Volume,
    pub frequency: Frequency,
}

impl SamplingScenario {
    pub const REFERENCE: SamplingScenario = SamplingScenario {
        volume: Volume::All,
        frequency: Frequency::TwicePerWeek,
    };

    /// Reference followed by S1..S11.
    pub fn grid() -> Vec<SamplingScenario> {
        let mut all: Vec<SamplingScenario> = [
            Frequency::TwicePerWeek,
            Frequency::OncePerWeek,
            Frequency::OncePerTwoWeeks,
        ]
        .into_iter()
        .flat_map(|frequency| {
            [Volume::All, Volume::Initial, Volume::LargestPerState, Volume::Largest]
                .into_iter()
                .map(move |volume| SamplingScenario { volume, frequency })
        })
        .collect();
        all.sort_by_key(|s| s.number());
        all
    }

    /// 0 for the reference, 1..=11 otherwise.
    pub fn number(&self) -> u8 {
        use Frequency::*;
        use Volume::*;
        match (self.frequency, self.volume) {
            (TwicePerWeek, All) => 0,
            (OncePerWeek, Largest) => 1,
            (TwicePerWeek, Largest) => 2,
            (OncePerWeek, LargestPerState) => 3,
            (TwicePerWeek, LargestPerState) => 4,
            (OncePerWeek, Initial) => 5,
            (TwicePerWeek, Initial) => 6,
            (OncePerTwoWeeks, Largest) => 7,
            (OncePerTwoWeeks, LargestPerState) => 8,
            (OncePerTwoWeeks, Initial) => 9,
            (OncePerWeek, All) => 10,
            (OncePerTwoWeeks, All) => 11,
        }
    }

    pub fn id(&self) -> String {
        match self.number() {
            0 => "Reference".to_string(),
            n => format!("S{n}"),
        }
    }

    pub fn from_id(id: &str) -> Option<SamplingScenario> {
        Self::grid()
            .into_iter()
            .find(|s| s.id().eq_ignore_ascii_case(id.trim()))
    }
}

impl fmt::Display for SamplingScenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

/// Most populous plant first; ties broken by plant id.
fn by_size_desc(a: &&PlantMeta, b: &&PlantMeta) -> std::cmp::Ordering {
    b.residents.cmp(&a.residents).then_with(|| a.plant_id.cmp(&b.plant_id))
}

fn select_plants(ds: &PanelDataset, volume: Volume) -> Result<BTreeSet<PlantId>> {
    let chosen: BTreeSet<PlantId> = match volume {
        Volume::All => ds.plant_ids().cloned().collect(),
        Volume::Initial => ds
            .plants
            .iter()
            .filter(|p| p.in_initial_program)
            .map(|p| p.plant_id.clone())
            .collect(),
        Volume::Largest => ds
            .plants
            .iter()
            .min_by(by_size_desc)
            .map(|p| p.plant_id.clone())
            .into_iter()
            .collect(),
        Volume::LargestPerState => {
            let mut best: BTreeMap<&str, &PlantMeta> = BTreeMap::new();
            for p in &ds.plants {
                let slot = best.entry(p.state.as_str()).or_insert(p);
                if by_size_desc(&p, slot).is_lt() {
                    *slot = p;
                }
            }
            best.values().map(|p| p.plant_id.clone()).collect()
        }
    };
    if chosen.is_empty() {
        return Err(CoreError::Scenario(format!("no plants satisfy the {volume:?} rule")));
    }
    Ok(chosen)
}

/// Keep every sample taken on the earliest sampled date of each
/// (plant, period) cell; same-date replicates are kept together.
fn thin_samples(ds: &PanelDataset, frequency: Frequency, anchor: NaiveDate) -> PanelDataset {
    let period = |d: NaiveDate| -> i64 {
        match frequency {
            Frequency::TwicePerWeek => unreachable!(),
            Frequency::OncePerWeek => {
                let w = d.iso_week();
                w.year() as i64 * 100 + w.week() as i64
            }
            Frequency::OncePerTwoWeeks => (d - anchor).num_days().div_euclid(14),
        }
    };
    let mut first: HashMap<(&PlantId, i64), NaiveDate> = HashMap::new();
    for s in &ds.samples {
        let e = first.entry((&s.plant_id, period(s.date))).or_insert(s.date);
        if s.date < *e {
            *e = s.date;
        }
    }
    let samples = ds
        .samples
        .iter()
        .filter(|s| first[&(&s.plant_id, period(s.date))] == s.date)
        .cloned()
        .collect();
    PanelDataset {
        plants: ds.plants.clone(),
        samples,
    }
}

pub fn apply_sampling_scenario(ds: &PanelDataset, sc: &SamplingScenario) -> Result<PanelDataset> {
    let anchor = ds
        .date_span()
        .ok_or_else(|| CoreError::Scenario("dataset has no samples".into()))?
        .0;
    let reduced = match sc.volume {
        Volume::All => ds.clone(),
        v => ds.retain_plants(&select_plants(ds, v)?),
    };
    Ok(match sc.frequency {
        Frequency::TwicePerWeek => reduced,
        f => thin_samples(&reduced, f, anchor),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SizeClass {
    /// At least 100,000 residents.
    Large,
    Small,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SewerScenario {
    pub sewer_types: BTreeSet<SewerType>,
    pub size: SizeClass,
    pub scenario_id: String,
}

impl SewerScenario {
    /// The eight type × size cells, S1..S8.
    pub fn grid() -> Vec<SewerScenario> {
        let mut out = Vec::with_capacity(8);
        for (t_idx, t) in SewerType::ALL.into_iter().enumerate() {
            for (s_idx, size) in [SizeClass::Large, SizeClass::Small].into_iter().enumerate() {
                out.push(SewerScenario {
                    sewer_types: [t].into_iter().collect(),
                    size,
                    scenario_id: format!("S{}", 2 * t_idx + s_idx + 1),
                });
            }
        }
        out
    }

    pub fn matches(&self, p: &PlantMeta) -> bool {
        let large = p.residents >= LARGE_PLANT_RESIDENTS;
        self.sewer_types.contains(&p.sewer_type) && (large == (self.size == SizeClass::Large))
    }
}

pub fn apply_sewer_scenario(ds: &PanelDataset, sc: &SewerScenario) -> Result<PanelDataset> {
    let keep: BTreeSet<PlantId> = ds
        .plants
        .iter()
        .filter(|p| sc.matches(p))
        .map(|p| p.plant_id.clone())
        .collect();
    if keep.is_empty() {
        return Err(CoreError::Scenario(format!(
            "sewer scenario {} selects no plants",
            sc.scenario_id
        )));
    }
    Ok(ds.retain_plants(&keep))
}

/// A scenario to rank: either a sampling design or a sewer subset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Scenario {
    Sampling(SamplingScenario),
    Sewer(SewerScenario),
}

impl Scenario {
    pub fn id(&self) -> String {
        match self {
            Scenario::Sampling(s) => s.id(),
            Scenario::Sewer(s) => s.scenario_id.clone(),
        }
    }

    pub fn apply(&self, ds: &PanelDataset) -> Result<PanelDataset> {
        match self {
            Scenario::Sampling(s) => apply_sampling_scenario(ds, s),
            Scenario::Sewer(s) => apply_sewer_scenario(ds, s),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioResult {
    pub scenario_id: String,
    /// One entry per requested measure; failures are kept per measure.
    pub dissimilarity_by_measure: BTreeMap<Measure, Result<f64>>,
    pub curve: Option<NationalCurve>,
}

impl ScenarioResult {
    pub fn value(&self, m: Measure) -> Option<f64> {
        self.dissimilarity_by_measure.get(&m)?.as_ref().ok().copied()
    }
}

/// Build each scenario's curve through the full pipeline and compare it to
/// the reference curve. Sorted ascending by `sort_by`; failures last; ties
/// broken by scenario id.
pub fn rank_scenarios(
    ds: &PanelDataset,
    scenarios: &[Scenario],
    cfg: &PipelineConfig,
    measures: &[Measure],
    sort_by: Measure,
) -> Result<Vec<ScenarioResult>> {
    let reference = national_curve(ds, cfg)?;
    let mut results: Vec<ScenarioResult> = scenarios
        .par_iter()
        .map(|sc| {
            let id = sc.id();
            let curve = sc.apply(ds).and_then(|reduced| national_curve(&reduced, cfg));
            match curve {
                Ok(curve) => ScenarioResult {
                    dissimilarity_by_measure: measures
                        .iter()
                        .map(|&m| (m, compare_curves(&reference, &curve, m, &cfg.dissimilarity)))
                        .collect(),
                    scenario_id: id,
                    curve: Some(curve),
                },
                Err(e) => ScenarioResult {
                    dissimilarity_by_measure: measures.iter().map(|&m| (m, Err(e.clone()))).collect(),
                    scenario_id: id,
                    curve: None,
                },
            }
        })
        .collect();
    results.sort_by(|a, b| match (a.value(sort_by), b.value(sort_by)) {
        (Some(x), Some(y)) => x.total_cmp(&y).then_with(|| a.scenario_id.cmp(&b.scenario_id)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => a.scenario_id.cmp(&b.scenario_id),
    });
    Ok(results)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Influence {
    pub value: f64,
    /// Removing the plant left days without any plant; the comparison
    /// used the common valid span only.
    pub partial_span: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct InfluenceOptions {
    /// Divide each influence by the plant's residents.
    pub normalize: bool,
    /// Permit method-2 curves (recomputing the quantile without the plant).
    pub allow_method2: bool,
}

/// Leave-one-plant-out influence: the dissimilarity between the national
/// curve and the curve rebuilt without each plant.
pub fn wwtp_influence(
    ds: &PanelDataset,
    measure: Measure,
    cfg: &PipelineConfig,
    opts: InfluenceOptions,
) -> Result<BTreeMap<PlantId, Result<Influence>>> {
    if ds.plants.len() < 2 {
        return Err(CoreError::Scenario("influence needs at least two plants".into()));
    }
    if cfg.aggregation.method == Method::Method2 && !opts.allow_method2 {
        return Err(CoreError::Scenario(
            "method-2 influence is an opt-in extension; enable allow_method2".into(),
        ));
    }
    let panel = build_excretors_panel(ds, &cfg.excretion)?;
    let full = aggregate(&panel, &cfg.aggregation)?;
    let full_obs = full.series.n_observed();
    Ok(ds
        .plants
        .par_iter()
        .map(|p| {
            let res = influence_of(&panel, &full, full_obs, p, measure, cfg, opts);
            (p.plant_id.clone(), res)
        })
        .collect())
}

fn influence_of(
    panel: &ExcretorsPanel,
    full: &NationalCurve,
    full_obs: usize,
    plant: &PlantMeta,
    measure: Measure,
    cfg: &PipelineConfig,
    opts: InfluenceOptions,
) -> Result<Influence> {
    let reduced = aggregate(&panel.without(&plant.plant_id), &cfg.aggregation)?;
    let partial_span = reduced.series.n_observed() < full_obs;
    let mut value = if partial_span {
        // Compare only on days observed in both curves, over the longest
        // stretch without holes.
        let (x, y) = longest_joint_run(full, &reduced)?;
        dissimilarity(measure, &x, &y, &cfg.dissimilarity)?
    } else {
        compare_curves(full, &reduced, measure, &cfg.dissimilarity)?
    };
    if opts.normalize {
        value /= plant.residents as f64;
    }
    Ok(Influence { value, partial_span })
}

fn longest_joint_run(a: &NationalCurve, b: &NationalCurve) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut best: (Vec<f64>, Vec<f64>) = (Vec::new(), Vec::new());
    let mut cur: (Vec<f64>, Vec<f64>) = (Vec::new(), Vec::new());
    for (va, vb) in a.series.values.iter().zip(&b.series.values) {
        match (va, vb) {
            (Some(x), Some(y)) => {
                cur.0.push(*x);
                cur.1.push(*y);
            }
            _ => {
                if cur.0.len() > best.0.len() {
                    best = std::mem::take(&mut cur);
                }
                cur = (Vec::new(), Vec::new());
            }
        }
    }
    if cur.0.len() > best.0.len() {
        best = cur;
    }
    if best.0.is_empty() {
        return Err(CoreError::Empty("curves share no observed days".into()));
    }
    Ok(best)
}
