//! Fictitious excretors per plant and their daily interpolation.
//!
//! A sample with concentration `c` (copies/ml) and inflow `I` (m³/day)
//! carries a virus load `V = c · I · 10⁶` copies/day; dividing by the daily
//! shedding of one infected person gives the number of fictitious
//! excretors `E`. Per-plant samples are then linearly interpolated onto a
//! daily grid.

use std::collections::BTreeMap;
use std::io::Write;

use chrono::{Duration, NaiveDate};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::ingest::{PanelDataset, PlantId};
use crate::series::{DailySeries, GappedSeries};

/// Converts ml·m³ to litres on both factors of the load.
pub const ML_TO_DAY_FACTOR: f64 = 1e6;
pub const DEFAULT_SHEDDING_PER_PERSON: f64 = 16e9;
pub const PER_CAPITA_SCALE: f64 = 1e5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExcretionConfig {
    /// RNA copies shed per infected person per day.
    pub shedding_per_person: f64,
}

impl Default for ExcretionConfig {
    fn default() -> Self {
        ExcretionConfig {
            shedding_per_person: DEFAULT_SHEDDING_PER_PERSON,
        }
    }
}

impl ExcretionConfig {
    pub fn new(shedding_per_person: f64) -> Result<Self> {
        if !(shedding_per_person > 0.0 && shedding_per_person.is_finite()) {
            return Err(CoreError::InvalidInput(format!(
                "shedding per person must be positive, got {shedding_per_person}"
            )));
        }
        Ok(ExcretionConfig { shedding_per_person })
    }
}

/// RNA copies per day.
pub fn virus_load(concentration: f64, inflow: f64) -> Result<f64> {
    if !concentration.is_finite() || !inflow.is_finite() {
        return Err(CoreError::InvalidInput(format!(
            "non-finite concentration/inflow ({concentration}, {inflow})"
        )));
    }
    if concentration < 0.0 || inflow <= 0.0 {
        return Err(CoreError::InvalidInput(format!(
            "concentration must be >= 0 and inflow > 0, got ({concentration}, {inflow})"
        )));
    }
    Ok(concentration * inflow * ML_TO_DAY_FACTOR)
}

pub fn fictitious_excretors(concentration: f64, inflow: f64, cfg: &ExcretionConfig) -> Result<f64> {
    Ok(virus_load(concentration, inflow)? / cfg.shedding_per_person)
}

/// Excretors per 100,000 residents.
pub fn per_capita_rate(excretors: f64, residents: u64) -> Result<f64> {
    if residents == 0 {
        return Err(CoreError::InvalidInput("residents must be positive".into()));
    }
    Ok(PER_CAPITA_SCALE * excretors / residents as f64)
}

/// Linear interpolation of dated samples onto a daily grid spanning the
/// first to the last sample. Same-date samples are averaged first.
pub fn interpolate_daily(samples: &[(NaiveDate, f64)]) -> Result<DailySeries> {
    if samples.is_empty() {
        return Err(CoreError::Empty("no samples to interpolate".into()));
    }
    let mut by_date: BTreeMap<NaiveDate, (f64, usize)> = BTreeMap::new();
    for &(d, v) in samples {
        if !v.is_finite() {
            return Err(CoreError::InvalidInput(format!("non-finite sample value on {d}")));
        }
        let e = by_date.entry(d).or_insert((0.0, 0));
        e.0 += v;
        e.1 += 1;
    }
    let points: Vec<(NaiveDate, f64)> = by_date.into_iter().map(|(d, (sum, n))| (d, sum / n as f64)).collect();
    let start = points[0].0;
    let mut values = vec![points[0].1];
    for w in points.windows(2) {
        let (d0, v0) = w[0];
        let (d1, v1) = w[1];
        let gap = (d1 - d0).num_days();
        for step in 1..=gap {
            let frac = step as f64 / gap as f64;
            // Exact at the right knot.
            values.push(if step == gap { v1 } else { v0 + frac * (v1 - v0) });
        }
    }
    DailySeries::new(start, values, "")
}

/// Per-plant excretor series aligned on one common daily grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcretorsPanel {
    pub start: NaiveDate,
    pub len: usize,
    /// Fictitious excretors per plant, missing outside the plant's span.
    pub per_plant: BTreeMap<PlantId, GappedSeries>,
    /// Excretors per 100,000 residents.
    pub per_capita: BTreeMap<PlantId, GappedSeries>,
    pub residents: BTreeMap<PlantId, u64>,
}

impl ExcretorsPanel {
    pub fn date_at(&self, i: usize) -> NaiveDate {
        self.start + Duration::days(i as i64)
    }

    pub fn n_plants(&self) -> usize {
        self.per_plant.len()
    }

    /// `(plant, excretors, residents, rate)` for every plant observed on day `i`.
    pub fn day(&self, i: usize) -> impl Iterator<Item = (&PlantId, f64, u64, f64)> + '_ {
        self.per_plant.iter().filter_map(move |(id, e)| {
            let ev = e.values[i]?;
            let rate = self.per_capita[id].values[i]?;
            Some((id, ev, self.residents[id], rate))
        })
    }

    /// Per-capita rates of all plants observed on day `i`.
    pub fn rates_on(&self, i: usize) -> Vec<f64> {
        self.per_capita.values().filter_map(|s| s.values[i]).collect()
    }

    /// The same panel without one plant.
    pub fn without(&self, plant: &PlantId) -> ExcretorsPanel {
        let mut p = self.clone();
        p.per_plant.remove(plant);
        p.per_capita.remove(plant);
        p.residents.remove(plant);
        p
    }

    /// Tidy export: `plant_id,date,excretors,per_capita`, observed days only.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let io = |e: csv::Error| CoreError::io("<excretors csv>", e);
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["plant_id", "date", "excretors", "per_capita"])
            .map_err(io)?;
        for (id, e) in &self.per_plant {
            let r = &self.per_capita[id];
            for i in 0..self.len {
                if let (Some(ev), Some(rv)) = (e.values[i], r.values[i]) {
                    w.write_record([
                        id.as_str(),
                        &self.date_at(i).to_string(),
                        &ev.to_string(),
                        &rv.to_string(),
                    ])
                    .map_err(io)?;
                }
            }
        }
        w.flush().map_err(|e| CoreError::io("<excretors csv>", e))
    }
}

/// Excretors per sample, interpolated per plant, then aligned on the union
/// of all plants' spans.
pub fn build_excretors_panel(ds: &PanelDataset, cfg: &ExcretionConfig) -> Result<ExcretorsPanel> {
    if ds.plants.is_empty() {
        return Err(CoreError::Empty("dataset has no plants".into()));
    }
    let by_plant = ds.samples_by_plant();
    let per_plant: Vec<(PlantId, u64, DailySeries)> = ds
        .plants
        .par_iter()
        .map(|p| {
            let samples = by_plant
                .get(&p.plant_id)
                .ok_or_else(|| CoreError::InvalidDataset(format!("plant {} has no samples", p.plant_id)))?;
            let points = samples
                .iter()
                .map(|s| Ok((s.date, fictitious_excretors(s.concentration, s.inflow, cfg)?)))
                .collect::<Result<Vec<_>>>()?;
            Ok((p.plant_id.clone(), p.residents, interpolate_daily(&points)?))
        })
        .collect::<Result<Vec<_>>>()?;

    let start = per_plant.iter().map(|(_, _, s)| s.start).min().unwrap();
    let end = per_plant.iter().map(|(_, _, s)| s.end()).max().unwrap();
    let len = (end - start).num_days() as usize + 1;

    let mut panel = ExcretorsPanel {
        start,
        len,
        per_plant: BTreeMap::new(),
        per_capita: BTreeMap::new(),
        residents: BTreeMap::new(),
    };
    for (id, residents, series) in per_plant {
        let offset = (series.start - start).num_days() as usize;
        let mut e = GappedSeries::missing(start, len, id.as_str());
        let mut r = GappedSeries::missing(start, len, id.as_str());
        for (k, &v) in series.values.iter().enumerate() {
            e.values[offset + k] = Some(v);
            r.values[offset + k] = Some(per_capita_rate(v, residents)?);
        }
        panel.per_plant.insert(id.clone(), e);
        panel.per_capita.insert(id.clone(), r);
        panel.residents.insert(id, residents);
    }
    Ok(panel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{PlantMeta, SampleRecord, SewerType};
    use proptest::prelude::*;

    fn d(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    #[test]
    fn excretor_arithmetic() {
        let cfg = ExcretionConfig::default();
        assert_eq!(fictitious_excretors(1000.0, 10000.0, &cfg).unwrap(), 625.0);
        assert_eq!(fictitious_excretors(0.0, 123.0, &cfg).unwrap(), 0.0);
        assert_eq!(fictitious_excretors(1600.0, 10.0, &cfg).unwrap(), 1.0);
        assert_eq!(virus_load(1600.0, 10.0).unwrap(), 1.6e10);
        assert!(fictitious_excretors(f64::NAN, 1.0, &cfg).is_err());
        assert!(fictitious_excretors(1.0, 0.0, &cfg).is_err());
        assert!(ExcretionConfig::new(0.0).is_err());
    }

    #[test]
    fn per_capita_arithmetic() {
        assert_eq!(per_capita_rate(625.0, 125_000).unwrap(), 500.0);
        assert_eq!(per_capita_rate(0.0, 5).unwrap(), 0.0);
        assert_eq!(per_capita_rate(37.25, 100_000).unwrap(), 37.25);
        assert!(per_capita_rate(1.0, 0).is_err());
    }

    #[test]
    fn interpolation_hand_cases() {
        let s = interpolate_daily(&[(d("2023-01-01"), 10.0), (d("2023-01-03"), 30.0)]).unwrap();
        assert_eq!(s.values, vec![10.0, 20.0, 30.0]);
        let s = interpolate_daily(&[(d("2023-01-01"), 7.0)]).unwrap();
        assert_eq!(s.values, vec![7.0]);
        let s = interpolate_daily(&[(d("2023-01-01"), 1.0), (d("2023-01-02"), 2.0), (d("2023-01-04"), 8.0)]).unwrap();
        assert_eq!(s.values, vec![1.0, 2.0, 5.0, 8.0]);
        assert!(interpolate_daily(&[]).is_err());
    }

    #[test]
    fn same_day_replicates_are_averaged() {
        let s = interpolate_daily(&[(d("2023-01-03"), 30.0), (d("2023-01-01"), 8.0), (d("2023-01-01"), 12.0)]).unwrap();
        assert_eq!(s.values, vec![10.0, 20.0, 30.0]);
    }

    fn plant(id: &str, residents: u64) -> PlantMeta {
        PlantMeta {
            plant_id: PlantId::new(id),
            in_initial_program: true,
            state: "Tyrol".into(),
            sewer_type: SewerType::Combined,
            residents,
        }
    }

    fn sample(id: &str, date: &str, c: f64, inflow: f64) -> SampleRecord {
        SampleRecord {
            plant_id: PlantId::new(id),
            date: d(date),
            concentration: c,
            inflow,
            temperature: None,
            cod: None,
            nitrogen: None,
            ammonium_nitrogen: None,
            lab_sample_id: format!("{id}-{date}"),
        }
    }

    #[test]
    fn single_plant_panel_matches_interpolation() {
        let cfg = ExcretionConfig::default();
        let ds = PanelDataset::new(
            vec![plant("A", 125_000)],
            vec![
                sample("A", "2023-01-01", 1000.0, 10000.0),
                sample("A", "2023-01-05", 3000.0, 10000.0),
            ],
        );
        let panel = build_excretors_panel(&ds, &cfg).unwrap();
        let expected = interpolate_daily(&[(d("2023-01-01"), 625.0), (d("2023-01-05"), 1875.0)]).unwrap();
        let got: Vec<f64> = panel.per_plant[&PlantId::new("A")]
            .values
            .iter()
            .map(|v| v.unwrap())
            .collect();
        assert_eq!(got, expected.values);
        assert_eq!(panel.per_capita[&PlantId::new("A")].values[0], Some(500.0));
    }

    #[test]
    fn disjoint_spans_share_a_grid() {
        let cfg = ExcretionConfig::default();
        let ds = PanelDataset::new(
            vec![plant("A", 1000), plant("B", 2000)],
            vec![
                sample("A", "2023-01-01", 1.0, 1.0),
                sample("A", "2023-01-03", 1.0, 1.0),
                sample("B", "2023-01-05", 1.0, 1.0),
                sample("B", "2023-01-06", 1.0, 1.0),
            ],
        );
        let p = build_excretors_panel(&ds, &cfg).unwrap();
        assert_eq!(p.len, 6);
        let a = &p.per_plant[&PlantId::new("A")];
        let b = &p.per_plant[&PlantId::new("B")];
        assert_eq!(a.n_observed(), 3);
        assert_eq!(b.n_observed(), 2);
        assert!(a.values[3..].iter().all(Option::is_none));
        assert!(b.values[..4].iter().all(Option::is_none));
        assert_eq!(p.day(3).count(), 0);
    }

    #[test]
    fn plant_without_samples_is_an_error() {
        let ds = PanelDataset::new(
            vec![plant("A", 1000), plant("B", 1000)],
            vec![sample("A", "2023-01-01", 1.0, 1.0)],
        );
        assert!(build_excretors_panel(&ds, &ExcretionConfig::default()).is_err());
    }

    proptest! {
        #[test]
        fn excretors_linear_in_inputs(c in 0.0f64..1e6, inflow in 1e-3f64..1e6) {
            let cfg = ExcretionConfig::default();
            let base = fictitious_excretors(c, inflow, &cfg).unwrap();
            let dc = fictitious_excretors(2.0 * c, inflow, &cfg).unwrap();
            let di = fictitious_excretors(c, 2.0 * inflow, &cfg).unwrap();
            prop_assert!((dc - 2.0 * base).abs() <= 1e-12 * base.abs().max(1.0));
            prop_assert!((di - 2.0 * base).abs() <= 1e-12 * base.abs().max(1.0));
            let half = ExcretionConfig::new(2.0 * cfg.shedding_per_person).unwrap();
            let h = fictitious_excretors(c, inflow, &half).unwrap();
            prop_assert!((2.0 * h - base).abs() <= 1e-12 * base.abs().max(1.0));
        }

        #[test]
        fn interpolation_hits_knots_without_overshoot(
            pts in proptest::collection::vec((0i64..200, -1e3f64..1e3), 1..20)
        ) {
            let base = d("2023-01-01");
            let samples: Vec<(NaiveDate, f64)> =
                pts.iter().map(|&(o, v)| (base + Duration::days(o), v)).collect();
            let s = interpolate_daily(&samples).unwrap();
            let mut avg: BTreeMap<NaiveDate, Vec<f64>> = BTreeMap::new();
            for (dt, v) in &samples {
                avg.entry(*dt).or_default().push(*v);
            }
            let knots: Vec<f64> = avg.values().map(|v| v.iter().sum::<f64>() / v.len() as f64).collect();
            let lo = knots.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = knots.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            for (dt, v) in avg.iter().map(|(dt, v)| (dt, v.iter().sum::<f64>() / v.len() as f64)) {
                prop_assert_eq!(s.get(*dt).unwrap(), v);
            }
            for v in &s.values {
                prop_assert!(*v >= lo - 1e-9 && *v <= hi + 1e-9);
            }
        }
    }
}
