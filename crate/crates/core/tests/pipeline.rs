use chrono::NaiveDate;
use wwsurv_core::aggregation::{aggregate, AggregationConfig};
use wwsurv_core::excretion::{build_excretors_panel, ExcretionConfig};
use wwsurv_core::ingest::{parse_panel_csv, validate_panel, write_panel_csv, ColumnMapping, CsvOptions};
use wwsurv_core::scenario::{
    national_curve, rank_scenarios, wwtp_influence, InfluenceOptions, PipelineConfig, SamplingScenario, Scenario,
    SewerScenario,
};
use wwsurv_core::spm::{cusum_run, phase1_estimates, CusumConfig};
use wwsurv_core::synth::{generate_panel, SynthConfig};
use wwsurv_core::uncertainty::{bootstrap_percentile_ci, BootstrapConfig};
use wwsurv_core::{Measure, Method};

fn small(seed: u64) -> SynthConfig {
    SynthConfig {
        n_plants: 14,
        end: NaiveDate::from_ymd_opt(2023, 12, 31).unwrap(),
        seed,
        ..SynthConfig::default()
    }
}

#[test]
fn csv_round_trip_preserves_the_curve() {
    let sp = generate_panel(&small(4)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("panel.csv");
    let file = std::fs::File::create(&path).unwrap();
    write_panel_csv(&sp.dataset, file, &ColumnMapping::default(), &CsvOptions::default()).unwrap();
    let back = parse_panel_csv(&path, &ColumnMapping::default(), &CsvOptions::default()).unwrap();
    assert!(validate_panel(&back).is_empty());
    assert_eq!(back.samples.len(), sp.dataset.samples.len());
    let cfg = PipelineConfig::default();
    let a = national_curve(&sp.dataset, &cfg).unwrap().series;
    let b = national_curve(&back, &cfg).unwrap().series;
    assert_eq!(a.start, b.start);
    for (x, y) in a.values.iter().zip(&b.values) {
        let (x, y) = (x.unwrap(), y.unwrap());
        assert!((x - y).abs() <= 1e-12 * x.abs());
    }
}

#[test]
fn method2_median_tracks_the_truth() {
    let cfg = small(8);
    let sp = generate_panel(&cfg).unwrap();
    let panel = build_excretors_panel(&sp.dataset, &ExcretionConfig::default()).unwrap();
    let curve = aggregate(&panel, &AggregationConfig::method2(0.5).unwrap()).unwrap();
    assert_eq!(curve.method, Method::Method2);
    let errs: Vec<f64> = cfg
        .sampling_dates()
        .iter()
        .map(|&d| (curve.series.get(d).unwrap() / cfg.national_rate(d)).ln().abs())
        .collect();
    let mean_err = errs.iter().sum::<f64>() / errs.len() as f64;
    assert!(mean_err < 0.3, "mean log error {mean_err}");
}

#[test]
fn reduced_designs_rank_behind_the_reference() {
    let sp = generate_panel(&small(1)).unwrap();
    let cfg = PipelineConfig::default();
    let sampling: Vec<Scenario> = SamplingScenario::grid().into_iter().map(Scenario::Sampling).collect();
    let ranked = rank_scenarios(&sp.dataset, &sampling, &cfg, &[Measure::L2, Measure::Corr], Measure::L2).unwrap();
    assert_eq!(ranked.len(), 12);
    assert_eq!(ranked[0].scenario_id, "Reference");
    assert!(ranked[1..].iter().all(|r| r.value(Measure::L2).is_none_or(|v| v > 0.0)));

    let sewer: Vec<Scenario> = SewerScenario::grid().into_iter().map(Scenario::Sewer).collect();
    let ranked = rank_scenarios(&sp.dataset, &sewer, &cfg, &[Measure::Corr], Measure::Corr).unwrap();
    assert_eq!(ranked.len(), 8);
    for pair in ranked.windows(2) {
        if let (Some(a), Some(b)) = (pair[0].value(Measure::Corr), pair[1].value(Measure::Corr)) {
            assert!(a <= b);
        }
    }
}

#[test]
fn influence_covers_every_plant() {
    let sp = generate_panel(&small(2)).unwrap();
    let cfg = PipelineConfig::default();
    let raw = wwtp_influence(&sp.dataset, Measure::L2, &cfg, InfluenceOptions::default()).unwrap();
    assert_eq!(raw.len(), 14);
    let norm = wwtp_influence(
        &sp.dataset,
        Measure::L2,
        &cfg,
        InfluenceOptions {
            normalize: true,
            ..Default::default()
        },
    )
    .unwrap();
    for p in &sp.dataset.plants {
        let r = raw[&p.plant_id].as_ref().unwrap().value;
        let n = norm[&p.plant_id].as_ref().unwrap().value;
        assert!(r > 0.0);
        assert!((n - r / p.residents as f64).abs() <= 1e-12 * r);
    }
    let m2 = PipelineConfig {
        aggregation: AggregationConfig::method2(0.5).unwrap(),
        ..cfg
    };
    assert!(wwtp_influence(&sp.dataset, Measure::L2, &m2, InfluenceOptions::default()).is_err());
}

#[test]
fn synthetic_wave_is_flagged_by_cusum_and_banded_by_bootstrap() {
    let sp = generate_panel(&small(6)).unwrap();
    let curve = national_curve(&sp.dataset, &PipelineConfig::default()).unwrap();
    let dense = curve.series.to_dense().unwrap();
    let (mu, sd) = phase1_estimates(&dense.values[..60]).unwrap();
    let run = cusum_run(&dense.values, &CusumConfig::new(mu, sd).unwrap()).unwrap();
    let first = run.first_alarm_index.expect("the wave raises an alarm");
    let peak = NaiveDate::from_ymd_opt(2023, 9, 20).unwrap();
    assert!(dense.date_at(first) < peak);

    let ci = bootstrap_percentile_ci(
        &curve,
        &BootstrapConfig {
            replications: 200,
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(ci.fitted.len(), dense.len());
    assert!((0..dense.len()).all(|i| ci.lower.values[i] <= ci.upper.values[i]));
}
