use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use chrono::{Duration, NaiveDate};
use serde::Serialize;
use serde_json::json;
use wwsurv_core::aggregation::{aggregate, iqr_band, normalize_curve};
use wwsurv_core::count_model::{fit_ingarch_qcml, round_to_counts, IngarchSpec};
use wwsurv_core::excretion::build_excretors_panel;
use wwsurv_core::ingest::{parse_date, parse_panel_csv, validate_panel, write_panel_csv, ColumnMapping, CsvOptions};
use wwsurv_core::scenario::{
    rank_scenarios, wwtp_influence, InfluenceOptions, PipelineConfig, SamplingScenario, Scenario, SewerScenario,
};
use wwsurv_core::spm::{
    calibrate_pcc_alpha, cusum_run, pcc_run, phase1_estimates, residual_shewhart_run, shewhart_run, ChartRun,
    Comparison, CusumConfig, PccConfig, ShewhartConfig,
};
use wwsurv_core::stats::{mean, QuantileRule};
use wwsurv_core::synth::{generate_panel, SynthConfig, Wave};
use wwsurv_core::uncertainty::{bootstrap_series_ci, method2_pointwise_interval, BootstrapConfig};
use wwsurv_core::{
    AggregationConfig, CoreError, DailySeries, DissimilarityConfig, ExcretionConfig, GappedSeries, Measure, Method,
    PanelDataset,
};

use crate::args::*;
use crate::svg::{bar_chart, Line, Marker, Ribbon, TimePlot, BLUE, GREEN, GREY, ORANGE, RED};
use crate::CliError;

/// `println!` that tolerates a closed stdout (`wwsurv ... | head`).
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

struct Outputs {
    dir: PathBuf,
    plot: bool,
    files: BTreeSet<String>,
}

impl Outputs {
    fn new(dir: &Path, plot: bool) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Io(format!("cannot create output directory {}: {e}", dir.display())))?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            plot,
            files: BTreeSet::new(),
        })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
        self.files.insert(name.to_string());
        Ok(())
    }

    fn csv(&mut self, name: &str, f: impl FnOnce(&mut Vec<u8>) -> wwsurv_core::Result<()>) -> Result<(), CliError> {
        let mut buf = Vec::new();
        f(&mut buf)?;
        self.write(name, &buf)
    }

    fn svg(&mut self, name: &str, render: impl FnOnce() -> String) -> Result<(), CliError> {
        if self.plot {
            self.write(name, render().as_bytes())?;
        }
        Ok(())
    }

    fn json(&mut self, name: &str, value: &impl Serialize) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let mut out = Outputs::new(&cli.out_dir, !cli.no_plot)?;
    let (seed, result) = match &cli.command {
        Command::Simulate(a) => (Some(a.seed), simulate(a, &mut out)),
        Command::Validate(a) => (None, validate(a, &mut out)),
        Command::Aggregate(a) => (None, aggregate_cmd(a, &mut out)),
        Command::Scenarios(a) => (None, scenarios(a, &mut out)),
        Command::Influence(a) => (None, influence(a, &mut out)),
        Command::BootstrapCi(a) => (Some(a.seed), bootstrap(a, &mut out)),
        Command::Monitor(a) => (None, monitor(a, &mut out)),
        Command::FitCountModel(a) => (None, count_model(a, &mut out)),
    };
    let mut outputs: Vec<String> = out.files.iter().cloned().collect();
    outputs.push("manifest.json".into());
    let manifest = json!({
        "tool": "wwsurv",
        "version": env!("CARGO_PKG_VERSION"),
        "core_version": wwsurv_core::VERSION,
        "command": cli.command.name(),
        "seed": seed,
        "status": if result.is_ok() { "ok" } else { "error" },
        "config": cli,
        "outputs": outputs,
    });
    out.json("manifest.json", &manifest)?;
    result
}

fn csv_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Core(CoreError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

fn delimiter(c: char) -> Result<u8, CliError> {
    u8::try_from(c)
        .ok()
        .filter(|b| b.is_ascii())
        .ok_or_else(|| CliError::Usage(format!("delimiter `{c}` must be a single ASCII character")))
}

fn load_panel(input: &Path, columns: &[String], delim: char) -> Result<PanelDataset, CliError> {
    let mut schema = ColumnMapping::default();
    for c in columns {
        let (var, col) = c
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--column expects VAR=COL, got `{c}`")))?;
        schema
            .set(var.trim(), col.trim())
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    Ok(parse_panel_csv(
        input,
        &schema,
        &CsvOptions {
            delimiter: delimiter(delim)?,
        },
    )?)
}

fn pipeline(p: &PipelineArgs, max_lag: Option<usize>) -> Result<PipelineConfig, CliError> {
    let aggregation = match p.method {
        Method::Method1 => AggregationConfig::method1(),
        Method::Method2 => AggregationConfig::method2(p.quantile)?,
    };
    Ok(PipelineConfig {
        excretion: ExcretionConfig::new(p.shedding)?,
        aggregation,
        dissimilarity: DissimilarityConfig { max_lag },
    })
}

/// Reads `date,value` (extra columns ignored); missing dates and empty
/// values become gaps.
fn read_curve_csv(path: &Path) -> Result<GappedSeries, CliError> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let headers = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| CliError::Core(CoreError::MissingColumn(name.to_string())))
    };
    let (di, vi) = (col("date")?, col("value")?);
    let mut points: Vec<(NaiveDate, Option<f64>)> = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let field = |i: usize| rec.get(i).unwrap_or("").trim();
        let date = parse_date(field(di)).ok_or_else(|| CoreError::Parse {
            row: row + 1,
            field: "date".into(),
            value: field(di).into(),
        })?;
        let value = match field(vi) {
            "" | "NA" | "NaN" => None,
            v => Some(v.parse::<f64>().map_err(|_| CoreError::Parse {
                row: row + 1,
                field: "value".into(),
                value: v.into(),
            })?),
        };
        points.push((date, value));
    }
    points.sort_by_key(|p| p.0);
    if points.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(CoreError::InvalidDataset(format!("{} repeats a date", path.display())).into());
    }
    let (Some(first), Some(last)) = (points.first(), points.last()) else {
        return Err(CoreError::Empty(format!("curve file {}", path.display())).into());
    };
    let mut series = GappedSeries::missing(first.0, (last.0 - first.0).num_days() as usize + 1, "curve");
    for (d, v) in &points {
        series.values[(*d - first.0).num_days() as usize] = *v;
    }
    Ok(series)
}

struct LoadedCurve {
    series: DailySeries,
    panel: Option<PanelDataset>,
    cfg: PipelineConfig,
}

fn load_curve(src: &CurveSource) -> Result<LoadedCurve, CliError> {
    let cfg = pipeline(&src.pipeline, None)?;
    match (&src.input, &src.curve) {
        (Some(input), None) => {
            let ds = load_panel(input, &src.columns, src.delimiter)?;
            let panel = build_excretors_panel(&ds, &cfg.excretion)?;
            let curve = aggregate(&panel, &cfg.aggregation)?;
            Ok(LoadedCurve {
                series: curve.series.to_dense()?,
                panel: Some(ds),
                cfg,
            })
        }
        (None, Some(path)) => Ok(LoadedCurve {
            series: read_curve_csv(path)?.to_dense()?,
            panel: None,
            cfg,
        }),
        _ => Err(CliError::Usage("give exactly one of --input or --curve".into())),
    }
}

fn dense_points(s: &DailySeries) -> Vec<(f64, Option<f64>)> {
    s.values.iter().enumerate().map(|(i, v)| (i as f64, Some(*v))).collect()
}

fn gapped_points(s: &GappedSeries, start: NaiveDate) -> Vec<(f64, Option<f64>)> {
    let offset = (s.start - start).num_days() as f64;
    s.values
        .iter()
        .enumerate()
        .map(|(i, v)| (offset + i as f64, *v))
        .collect()
}

fn parse_waves(spec: &str) -> Result<Vec<Wave>, CliError> {
    if spec.trim().eq_ignore_ascii_case("none") || spec.trim().is_empty() {
        return Ok(Vec::new());
    }
    spec.split(',')
        .map(|w| {
            let parts: Vec<&str> = w.trim().split(':').collect();
            let bad = || CliError::Usage(format!("wave `{w}` is not peak:height:width_days"));
            let [peak, height, width] = parts[..] else {
                return Err(bad());
            };
            Ok(Wave {
                peak: parse_date(peak).ok_or_else(bad)?,
                height: height.parse().map_err(|_| bad())?,
                width_days: width.parse().map_err(|_| bad())?,
            })
        })
        .collect()
}

fn simulate(a: &SimulateArgs, out: &mut Outputs) -> Result<(), CliError> {
    let cfg = SynthConfig {
        n_plants: a.n_plants,
        start: a.start,
        end: a.end,
        baseline: a.baseline,
        waves: parse_waves(&a.waves)?,
        noise_sd_log: a.noise_sd_log,
        plant_spread: a.plant_spread,
        chemistry: !a.no_chemistry,
        seed: a.seed,
        ..SynthConfig::default()
    };
    let sp = generate_panel(&cfg)?;
    out.csv("panel.csv", |w| {
        write_panel_csv(&sp.dataset, w, &ColumnMapping::default(), &CsvOptions::default())
    })?;
    out.csv("truth.csv", |w| write_series(w, &sp.truth))?;
    out.svg("truth.svg", || {
        let mut p = TimePlot::new("Configured national curve", "excretors per 100,000", sp.truth.start);
        p.lines.push(Line {
            label: "truth".into(),
            color: BLUE,
            points: dense_points(&sp.truth),
            dashed: false,
        });
        p.render()
    })?;
    say!(
        "simulated {} plants, {} samples, {} to {}",
        sp.dataset.plants.len(),
        sp.dataset.samples.len(),
        cfg.start,
        cfg.end
    );
    Ok(())
}

fn write_series(w: &mut Vec<u8>, s: &DailySeries) -> wwsurv_core::Result<()> {
    let io = |e: csv::Error| CoreError::Io {
        path: "<series csv>".into(),
        message: e.to_string(),
    };
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["date", "value"]).map_err(io)?;
    for (d, v) in s.iter_dated() {
        wr.write_record([d.to_string(), v.to_string()]).map_err(io)?;
    }
    wr.flush().map_err(|e| CoreError::Io {
        path: "<series csv>".into(),
        message: e.to_string(),
    })
}

fn validate(a: &InputArgs, out: &mut Outputs) -> Result<(), CliError> {
    let ds = load_panel(&a.input, &a.columns, a.delimiter)?;
    let findings = validate_panel(&ds);
    out.csv("findings.csv", |w| {
        let io = |e: csv::Error| CoreError::Io {
            path: "findings.csv".into(),
            message: e.to_string(),
        };
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["plant_id", "date", "message"]).map_err(io)?;
        for f in &findings {
            wr.write_record([
                f.plant_id.as_ref().map(|p| p.to_string()).unwrap_or_default(),
                f.date.map(|d| d.to_string()).unwrap_or_default(),
                f.message.clone(),
            ])
            .map_err(io)?;
        }
        wr.flush().map_err(|e| CoreError::Io {
            path: "findings.csv".into(),
            message: e.to_string(),
        })
    })?;
    let span = ds
        .date_span()
        .map(|(a, b)| format!("{a} to {b}"))
        .unwrap_or_else(|| "no dates".into());
    say!(
        "{} plants, {} samples, {span}, {} findings",
        ds.plants.len(),
        ds.samples.len(),
        findings.len()
    );
    for f in &findings {
        say!("  {f}");
    }
    if findings.is_empty() {
        Ok(())
    } else {
        Err(CoreError::InvalidDataset(format!("{} invariant violations", findings.len())).into())
    }
}

fn aggregate_cmd(a: &AggregateArgs, out: &mut Outputs) -> Result<(), CliError> {
    let cfg = pipeline(&a.pipeline, None)?;
    let ds = load_panel(&a.input.input, &a.input.columns, a.input.delimiter)?;
    let panel = build_excretors_panel(&ds, &cfg.excretion)?;
    let curve = aggregate(&panel, &cfg.aggregation)?;
    out.csv("excretors.csv", |w| panel.write_csv(w))?;
    out.csv("curve.csv", |w| curve.write_csv(w))?;
    if a.normalize {
        let norm = normalize_curve(&curve)?;
        out.csv("curve_normalized.csv", |w| norm.write_csv(w))?;
    }
    let band = (curve.method == Method::Method2).then(|| iqr_band(&panel, QuantileRule::Linear));
    if let Some((lo, hi)) = &band {
        out.csv("iqr.csv", |w| {
            let io = |e: csv::Error| CoreError::Io {
                path: "iqr.csv".into(),
                message: e.to_string(),
            };
            let mut wr = csv::Writer::from_writer(w);
            wr.write_record(["date", "q25", "q75"]).map_err(io)?;
            for i in 0..lo.len() {
                let f = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
                wr.write_record([lo.date_at(i).to_string(), f(lo.values[i]), f(hi.values[i])])
                    .map_err(io)?;
            }
            wr.flush().map_err(|e| CoreError::Io {
                path: "iqr.csv".into(),
                message: e.to_string(),
            })
        })?;
    }
    out.svg("curve.svg", || {
        let title = match curve.method {
            Method::Method1 => "National curve (population-weighted)".to_string(),
            Method::Method2 => format!("National curve (per-day {} quantile)", a.pipeline.quantile),
        };
        let mut p = TimePlot::new(title, "excretors per 100,000", curve.series.start);
        if let Some((lo, hi)) = &band {
            let pts = (0..lo.len())
                .filter_map(|i| Some((i as f64, lo.values[i]?, hi.values[i]?)))
                .collect();
            p.ribbons.push(Ribbon {
                color: GREY,
                points: pts,
            });
        }
        p.lines.push(Line {
            label: curve.method.to_string(),
            color: BLUE,
            points: gapped_points(&curve.series, curve.series.start),
            dashed: false,
        });
        p.render()
    })?;
    say!(
        "{} days, {} plants, method {}",
        curve.len(),
        panel.n_plants(),
        curve.method
    );
    Ok(())
}

fn measure_cell(v: &wwsurv_core::Result<f64>) -> String {
    v.as_ref().map(|x| x.to_string()).unwrap_or_default()
}

fn scenarios(a: &ScenariosArgs, out: &mut Outputs) -> Result<(), CliError> {
    let cfg = pipeline(&a.pipeline, a.max_lag)?;
    let ds = load_panel(&a.input.input, &a.input.columns, a.input.delimiter)?;
    let list: Vec<Scenario> = match a.grid {
        Grid::Sampling => SamplingScenario::grid().into_iter().map(Scenario::Sampling).collect(),
        Grid::Sewer => SewerScenario::grid().into_iter().map(Scenario::Sewer).collect(),
    };
    let ranked = rank_scenarios(&ds, &list, &cfg, &Measure::ALL, a.measure)?;
    out.csv("scenarios.csv", |w| {
        let io = |e: csv::Error| CoreError::Io {
            path: "scenarios.csv".into(),
            message: e.to_string(),
        };
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["rank", "scenario_id", "l2", "corr", "crosscorr", "error"])
            .map_err(io)?;
        for (i, r) in ranked.iter().enumerate() {
            let cell = |m: Measure| measure_cell(&r.dissimilarity_by_measure[&m]);
            let error = r
                .dissimilarity_by_measure
                .values()
                .find_map(|v| v.as_ref().err())
                .map(|e| e.to_string())
                .unwrap_or_default();
            wr.write_record([
                (i + 1).to_string(),
                r.scenario_id.clone(),
                cell(Measure::L2),
                cell(Measure::Corr),
                cell(Measure::CrossCorr),
                error,
            ])
            .map_err(io)?;
        }
        wr.flush().map_err(|e| CoreError::Io {
            path: "scenarios.csv".into(),
            message: e.to_string(),
        })
    })?;
    out.svg("scenarios.svg", || {
        let bars: Vec<(String, f64)> = ranked
            .iter()
            .map(|r| (r.scenario_id.clone(), r.value(a.measure).unwrap_or(f64::NAN)))
            .collect();
        bar_chart(
            "Scenario dissimilarity to the reference",
            &format!("{} dissimilarity", a.measure),
            &bars,
        )
    })?;
    for r in &ranked {
        match r.value(a.measure) {
            Some(v) => say!("{:>10} {v:.6}", r.scenario_id),
            None => say!("{:>10} n/a", r.scenario_id),
        }
    }
    Ok(())
}

fn influence(a: &InfluenceArgs, out: &mut Outputs) -> Result<(), CliError> {
    let cfg = pipeline(&a.pipeline, a.max_lag)?;
    let ds = load_panel(&a.input.input, &a.input.columns, a.input.delimiter)?;
    let opts = InfluenceOptions {
        normalize: a.normalize,
        allow_method2: a.allow_method2,
    };
    let map = wwtp_influence(&ds, a.measure, &cfg, opts)?;
    let mut rows: Vec<_> = map.iter().collect();
    rows.sort_by(|x, y| match (&x.1, &y.1) {
        (Ok(p), Ok(q)) => q.value.total_cmp(&p.value).then_with(|| x.0.cmp(y.0)),
        (Ok(_), Err(_)) => std::cmp::Ordering::Less,
        (Err(_), Ok(_)) => std::cmp::Ordering::Greater,
        _ => x.0.cmp(y.0),
    });
    out.csv("influence.csv", |w| {
        let io = |e: csv::Error| CoreError::Io {
            path: "influence.csv".into(),
            message: e.to_string(),
        };
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["plant_id", "state", "residents", "influence", "partial_span", "error"])
            .map_err(io)?;
        for (id, res) in &rows {
            let meta = ds.plant(id).expect("influence keys come from the dataset");
            let (v, partial, err) = match res {
                Ok(i) => (i.value.to_string(), i.partial_span.to_string(), String::new()),
                Err(e) => (String::new(), String::new(), e.to_string()),
            };
            wr.write_record([
                id.to_string(),
                meta.state.clone(),
                meta.residents.to_string(),
                v,
                partial,
                err,
            ])
            .map_err(io)?;
        }
        wr.flush().map_err(|e| CoreError::Io {
            path: "influence.csv".into(),
            message: e.to_string(),
        })
    })?;
    out.svg("influence.svg", || {
        let bars: Vec<(String, f64)> = rows
            .iter()
            .map(|(id, r)| (id.to_string(), r.as_ref().map(|i| i.value).unwrap_or(f64::NAN)))
            .collect();
        bar_chart(
            "Leave-one-plant-out influence",
            &format!("{} dissimilarity", a.measure),
            &bars,
        )
    })?;
    say!("{} plants ranked by {} influence", rows.len(), a.measure);
    Ok(())
}

fn bootstrap(a: &BootstrapArgs, out: &mut Outputs) -> Result<(), CliError> {
    let loaded = load_curve(&a.source)?;
    let cfg = BootstrapConfig {
        replications: a.replications,
        alpha: a.alpha,
        seed: a.seed,
        order: a.order,
    };
    let iv = bootstrap_series_ci(&loaded.series, &cfg)?;
    out.csv("interval.csv", |w| iv.write_csv(w))?;
    let pointwise = match (&loaded.panel, loaded.cfg.aggregation.method) {
        (Some(ds), Method::Method2) => {
            let panel = build_excretors_panel(ds, &loaded.cfg.excretion)?;
            Some(method2_pointwise_interval(&panel, a.alpha)?)
        }
        _ => None,
    };
    if let Some(pi) = &pointwise {
        out.csv("pointwise.csv", |w| {
            let io = |e: csv::Error| CoreError::Io {
                path: "pointwise.csv".into(),
                message: e.to_string(),
            };
            let mut wr = csv::Writer::from_writer(w);
            wr.write_record(["date", "lower", "upper"]).map_err(io)?;
            for i in 0..pi.lower.len() {
                let f = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
                wr.write_record([
                    pi.lower.date_at(i).to_string(),
                    f(pi.lower.values[i]),
                    f(pi.upper.values[i]),
                ])
                .map_err(io)?;
            }
            wr.flush().map_err(|e| CoreError::Io {
                path: "pointwise.csv".into(),
                message: e.to_string(),
            })
        })?;
    }
    out.json("bootstrap_model.json", &iv.model)?;
    out.svg("interval.svg", || {
        let start = loaded.series.start;
        let mut p = TimePlot::new(
            format!("{:.0}% residual-bootstrap interval", 100.0 * iv.level),
            "excretors per 100,000",
            start,
        );
        let band = (0..iv.fitted.len())
            .map(|i| (i as f64, iv.lower.values[i], iv.upper.values[i]))
            .collect();
        p.ribbons.push(Ribbon {
            color: ORANGE,
            points: band,
        });
        p.lines.push(Line {
            label: "curve".into(),
            color: BLUE,
            points: dense_points(&loaded.series),
            dashed: false,
        });
        p.lines.push(Line {
            label: "fitted".into(),
            color: ORANGE,
            points: dense_points(&iv.fitted),
            dashed: true,
        });
        if let Some(pi) = &pointwise {
            p.lines.push(Line {
                label: "pointwise lower".into(),
                color: GREY,
                points: gapped_points(&pi.lower, start),
                dashed: true,
            });
            p.lines.push(Line {
                label: "pointwise upper".into(),
                color: GREY,
                points: gapped_points(&pi.upper, start),
                dashed: true,
            });
        }
        p.render()
    })?;
    say!(
        "{} days, ARIMA({},{},{}), {} replications",
        iv.fitted.len(),
        iv.model.p,
        iv.model.d,
        iv.model.q,
        a.replications
    );
    Ok(())
}

fn phase1_range(s: &DailySeries, a: &MonitorArgs) -> Result<std::ops::Range<usize>, CliError> {
    let start = a.phase1_start.unwrap_or(s.start);
    let end = a.phase1_end.unwrap_or(start + Duration::days(27));
    if start < s.start || end > s.end() || end < start {
        return Err(CliError::Usage(format!(
            "phase-I span {start} to {end} must lie within the curve ({} to {})",
            s.start,
            s.end()
        )));
    }
    let i0 = (start - s.start).num_days() as usize;
    let i1 = (end - s.start).num_days() as usize + 1;
    Ok(i0..i1)
}

fn monitor(a: &MonitorArgs, out: &mut Outputs) -> Result<(), CliError> {
    let loaded = load_curve(&a.source)?;
    let s = &loaded.series;
    let p1 = phase1_range(s, a)?;
    let comparison = if a.inclusive {
        Comparison::Inclusive
    } else {
        Comparison::Strict
    };
    let in_control = |x: &[f64]| -> Result<(f64, f64), CliError> {
        let sigma = match a.sigma {
            Some(sd) => sd,
            None => phase1_estimates(x)?.1,
        };
        Ok((a.mu0.unwrap_or_else(|| mean(x)), sigma))
    };
    let mut summary = serde_json::Map::new();
    summary.insert("chart".into(), json!(a.chart));
    summary.insert("phase1_start".into(), json!(s.date_at(p1.start)));
    summary.insert("phase1_end".into(), json!(s.date_at(p1.end - 1)));
    let (run, offset) = match a.chart {
        Chart::Cusum => {
            let (mu0, sigma) = in_control(&s.values[p1.clone()])?;
            let cfg = CusumConfig {
                reset_on_signal: a.reset,
                comparison,
                ..CusumConfig::new(mu0, sigma)?.with_kh(a.k, a.h)?
            };
            summary.insert("parameters".into(), json!(cfg));
            (cusum_run(&s.values, &cfg)?, 0)
        }
        Chart::Shewhart => {
            let (mu, sigma) = in_control(&s.values[p1.clone()])?;
            let cfg = ShewhartConfig {
                comparison,
                ..ShewhartConfig::new(mu, sigma)?.with_l(a.l)?
            };
            summary.insert("parameters".into(), json!(cfg));
            (shewhart_run(&s.values, &cfg)?, 0)
        }
        Chart::Residual => {
            let rc = residual_shewhart_run(&s.values, a.order, p1.clone(), a.l)?;
            summary.insert("model".into(), json!(rc.model));
            (rc.run, 0)
        }
        Chart::Pcc => {
            let alpha = match a.alpha {
                Some(v) => v,
                None => calibrate_pcc_alpha(&CusumConfig::new(0.0, 1.0)?.with_kh(a.k, a.h)?)?,
            };
            let mut cfg = PccConfig::from_historical(&s.values[p1.clone()], alpha)?;
            cfg.comparison = comparison;
            summary.insert("parameters".into(), json!(cfg));
            (pcc_run(&s.values[p1.end..], &cfg)?, p1.end)
        }
    };
    let run = run.with_start(s.date_at(offset));
    summary.insert("n_alarms".into(), json!(run.n_alarms()));
    summary.insert(
        "first_alarm".into(),
        json!(run.first_alarm_index.and_then(|i| run.date_at(i))),
    );
    out.csv("chart.csv", |w| run.write_csv(w))?;
    out.json("chart_summary.json", &summary)?;
    out.svg("chart.svg", || chart_svg(a.chart, &run, s, offset))?;
    match run.first_alarm_index.and_then(|i| run.date_at(i)) {
        Some(d) => say!("{} alarms; first on {d}", run.n_alarms()),
        None => say!("no alarms"),
    }
    Ok(())
}

fn chart_svg(chart: Chart, run: &ChartRun, s: &DailySeries, offset: usize) -> String {
    let title = match chart {
        Chart::Cusum => "Upper CUSUM",
        Chart::Shewhart => "Shewhart X-chart",
        Chart::Residual => "Shewhart chart of ARIMA residuals",
        Chart::Pcc => "Predictive control chart",
    };
    let mut p = TimePlot::new(title, "statistic", s.start);
    let x = |i: usize| (offset + i) as f64;
    p.lines.push(Line {
        label: "statistic".into(),
        color: GREY,
        points: run.records.iter().map(|r| (x(r.index), Some(r.statistic))).collect(),
        dashed: false,
    });
    if run.records.iter().any(|r| r.upper.is_some()) {
        p.lines.push(Line {
            label: "upper limit".into(),
            color: RED,
            points: run.records.iter().map(|r| (x(r.index), r.upper)).collect(),
            dashed: true,
        });
    }
    if run.records.iter().any(|r| r.lower.is_some()) {
        p.lines.push(Line {
            label: "lower limit".into(),
            color: RED,
            points: run.records.iter().map(|r| (x(r.index), r.lower)).collect(),
            dashed: true,
        });
    }
    p.markers = run
        .records
        .iter()
        .map(|r| Marker {
            x: x(r.index),
            y: r.statistic,
            color: if r.signal { RED } else { GREEN },
        })
        .collect();
    p.render()
}

fn count_model(a: &CountModelArgs, out: &mut Outputs) -> Result<(), CliError> {
    let loaded = load_curve(&a.source)?;
    let spec = IngarchSpec::new(a.obs_lags.clone(), a.mean_lags.clone())?;
    let y = round_to_counts(&loaded.series.values)?;
    let fit = fit_ingarch_qcml(&y, &spec)?;
    out.json("fit.json", &fit)?;
    out.csv("fitted.csv", |w| {
        let io = |e: csv::Error| CoreError::Io {
            path: "fitted.csv".into(),
            message: e.to_string(),
        };
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["date", "observed", "fitted"]).map_err(io)?;
        for (i, (obs, lam)) in y.iter().zip(&fit.lambda_path).enumerate() {
            wr.write_record([loaded.series.date_at(i).to_string(), obs.to_string(), lam.to_string()])
                .map_err(io)?;
        }
        wr.flush().map_err(|e| CoreError::Io {
            path: "fitted.csv".into(),
            message: e.to_string(),
        })
    })?;
    out.svg("fitted.svg", || {
        let mut p = TimePlot::new("Observed counts and INGARCH fitted means", "count", loaded.series.start);
        p.lines.push(Line {
            label: "observed".into(),
            color: BLUE,
            points: y.iter().enumerate().map(|(i, v)| (i as f64, Some(*v as f64))).collect(),
            dashed: false,
        });
        p.lines.push(Line {
            label: "fitted".into(),
            color: ORANGE,
            points: fit
                .lambda_path
                .iter()
                .enumerate()
                .map(|(i, v)| (i as f64, Some(*v)))
                .collect(),
            dashed: true,
        });
        p.render()
    })?;
    say!(
        "intercept {:.4}, obs {:?}, mean {:?}, dispersion {:.2}{}",
        fit.params.intercept,
        fit.params.obs_coeffs,
        fit.params.mean_coeffs,
        fit.dispersion,
        if fit.degenerate {
            " (degenerate: constant series)"
        } else if fit.near_poisson {
            " (near Poisson)"
        } else {
            ""
        }
    );
    Ok(())
}
