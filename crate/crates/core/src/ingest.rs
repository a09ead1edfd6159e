//! Raw panel dataset: per-plant metadata and per-sample laboratory records.
//!
//! The on-disk layout is one row per laboratory sample, with the plant's
//! metadata repeated on every row. Thirteen variables are recognised:
//!
//! | variable | default column | required |
//! |---|---|---|
//! | plant key | `plant_id` | yes |
//! | in the program from the start | `in_initial_program` | yes |
//! | federal state | `state` | yes |
//! | sewer system type | `sewer_type` | yes |
//! | sampling date | `date` | yes |
//! | laboratory sample id | `lab_sample_id` | yes |
//! | virus concentration (copies/ml) | `concentration` | yes |
//! | inflow (m³/day) | `inflow` | yes |
//! | inflow temperature (°C) | `temperature` | no |
//! | catchment residents | `residents` | yes |
//! | chemical oxygen demand | `cod` | no |
//! | total nitrogen | `nitrogen` | no |
//! | ammonium nitrogen | `ammonium_nitrogen` | no |
//!
//! Column names are remapped through [`ColumnMapping`]. Dates are ISO-8601;
//! any time-of-day suffix is dropped.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// Opaque plant key.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PlantId(pub String);

impl PlantId {
    pub fn new(s: impl Into<String>) -> Self {
        PlantId(s.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for PlantId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SewerType {
    Unknown,
    Separate,
    Combined,
    SeparateAndCombined,
}

impl SewerType {
    pub const ALL: [SewerType; 4] = [
        SewerType::Unknown,
        SewerType::Separate,
        SewerType::Combined,
        SewerType::SeparateAndCombined,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SewerType::Unknown => "unknown",
            SewerType::Separate => "separate",
            SewerType::Combined => "combined",
            SewerType::SeparateAndCombined => "separate_and_combined",
        }
    }
}

impl fmt::Display for SewerType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SewerType {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace([' ', '-'], "_");
        match norm.as_str() {
            "" | "unknown" | "na" => Ok(SewerType::Unknown),
            "separate" => Ok(SewerType::Separate),
            "combined" => Ok(SewerType::Combined),
            "separate_and_combined" | "separate_&_combined" | "mixed" => Ok(SewerType::SeparateAndCombined),
            _ => Err(format!("unknown sewer type `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantMeta {
    pub plant_id: PlantId,
    pub in_initial_program: bool,
    pub state: String,
    pub sewer_type: SewerType,
    pub residents: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub plant_id: PlantId,
    pub date: NaiveDate,
    /// RNA copies per ml.
    pub concentration: f64,
    /// m³ per day.
    pub inflow: f64,
    pub temperature: Option<f64>,
    pub cod: Option<f64>,
    pub nitrogen: Option<f64>,
    pub ammonium_nitrogen: Option<f64>,
    pub lab_sample_id: String,
}

/// Plants plus their samples. Plants are kept sorted by id and samples by
/// (plant, date, lab id) so equal content compares equal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelDataset {
    pub plants: Vec<PlantMeta>,
    pub samples: Vec<SampleRecord>,
}

impl PanelDataset {
    pub fn new(mut plants: Vec<PlantMeta>, mut samples: Vec<SampleRecord>) -> Self {
        plants.sort_by(|a, b| a.plant_id.cmp(&b.plant_id));
        samples.sort_by(|a, b| (&a.plant_id, a.date, &a.lab_sample_id).cmp(&(&b.plant_id, b.date, &b.lab_sample_id)));
        PanelDataset { plants, samples }
    }

    /// First and last sample date.
    pub fn date_span(&self) -> Option<(NaiveDate, NaiveDate)> {
        let first = self.samples.iter().map(|s| s.date).min()?;
        let last = self.samples.iter().map(|s| s.date).max()?;
        Some((first, last))
    }

    pub fn plant(&self, id: &PlantId) -> Option<&PlantMeta> {
        self.plants
            .binary_search_by(|p| p.plant_id.cmp(id))
            .ok()
            .map(|i| &self.plants[i])
    }

    pub fn plant_ids(&self) -> impl Iterator<Item = &PlantId> {
        self.plants.iter().map(|p| &p.plant_id)
    }

    /// Samples grouped by plant.
    pub fn samples_by_plant(&self) -> BTreeMap<&PlantId, Vec<&SampleRecord>> {
        let mut map: BTreeMap<&PlantId, Vec<&SampleRecord>> = BTreeMap::new();
        for s in &self.samples {
            map.entry(&s.plant_id).or_default().push(s);
        }
        map
    }

    /// Restrict to the given plants, dropping their samples too.
    pub fn retain_plants(&self, keep: &BTreeSet<PlantId>) -> PanelDataset {
        PanelDataset {
            plants: self
                .plants
                .iter()
                .filter(|p| keep.contains(&p.plant_id))
                .cloned()
                .collect(),
            samples: self
                .samples
                .iter()
                .filter(|s| keep.contains(&s.plant_id))
                .cloned()
                .collect(),
        }
    }
}

/// Maps each schema variable to a CSV column name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColumnMapping {
    pub plant_id: String,
    pub in_initial_program: String,
    pub state: String,
    pub sewer_type: String,
    pub date: String,
    pub lab_sample_id: String,
    pub concentration: String,
    pub inflow: String,
    pub temperature: String,
    pub residents: String,
    pub cod: String,
    pub nitrogen: String,
    pub ammonium_nitrogen: String,
}

impl Default for ColumnMapping {
    fn default() -> Self {
        ColumnMapping {
            plant_id: "plant_id".into(),
            in_initial_program: "in_initial_program".into(),
            state: "state".into(),
            sewer_type: "sewer_type".into(),
            date: "date".into(),
            lab_sample_id: "lab_sample_id".into(),
            concentration: "concentration".into(),
            inflow: "inflow".into(),
            temperature: "temperature".into(),
            residents: "residents".into(),
            cod: "cod".into(),
            nitrogen: "nitrogen".into(),
            ammonium_nitrogen: "ammonium_nitrogen".into(),
        }
    }
}

impl ColumnMapping {
    /// Override a single variable's column, addressed by its default name.
    pub fn set(&mut self, variable: &str, column: impl Into<String>) -> Result<()> {
        let slot = match variable {
            "plant_id" => &mut self.plant_id,
            "in_initial_program" => &mut self.in_initial_program,
            "state" => &mut self.state,
            "sewer_type" => &mut self.sewer_type,
            "date" => &mut self.date,
            "lab_sample_id" => &mut self.lab_sample_id,
            "concentration" => &mut self.concentration,
            "inflow" => &mut self.inflow,
            "temperature" => &mut self.temperature,
            "residents" => &mut self.residents,
            "cod" => &mut self.cod,
            "nitrogen" => &mut self.nitrogen,
            "ammonium_nitrogen" => &mut self.ammonium_nitrogen,
            other => return Err(CoreError::InvalidInput(format!("unknown schema variable `{other}`"))),
        };
        *slot = column.into();
        Ok(())
    }

    fn header(&self) -> [&str; 13] {
        [
            &self.plant_id,
            &self.in_initial_program,
            &self.state,
            &self.sewer_type,
            &self.date,
            &self.lab_sample_id,
            &self.concentration,
            &self.inflow,
            &self.temperature,
            &self.residents,
            &self.cod,
            &self.nitrogen,
            &self.ammonium_nitrogen,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvOptions {
    pub delimiter: u8,
}

impl Default for CsvOptions {
    fn default() -> Self {
        CsvOptions { delimiter: b',' }
    }
}

pub fn parse_panel_csv(path: impl AsRef<Path>, schema: &ColumnMapping, opts: &CsvOptions) -> Result<PanelDataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| CoreError::io(path, e))?;
    read_panel_csv(file, schema, opts)
}

struct Columns {
    plant_id: usize,
    in_initial_program: usize,
    state: usize,
    sewer_type: usize,
    date: usize,
    lab_sample_id: usize,
    concentration: usize,
    inflow: usize,
    residents: usize,
    temperature: Option<usize>,
    cod: Option<usize>,
    nitrogen: Option<usize>,
    ammonium_nitrogen: Option<usize>,
}

impl Columns {
    fn locate(headers: &csv::StringRecord, schema: &ColumnMapping) -> Result<Self> {
        let idx: HashMap<&str, usize> = headers.iter().enumerate().map(|(i, h)| (h.trim(), i)).collect();
        let req = |name: &String| {
            idx.get(name.as_str())
                .copied()
                .ok_or_else(|| CoreError::MissingColumn(name.clone()))
        };
        let opt = |name: &String| idx.get(name.as_str()).copied();
        Ok(Columns {
            plant_id: req(&schema.plant_id)?,
            in_initial_program: req(&schema.in_initial_program)?,
            state: req(&schema.state)?,
            sewer_type: req(&schema.sewer_type)?,
            date: req(&schema.date)?,
            lab_sample_id: req(&schema.lab_sample_id)?,
            concentration: req(&schema.concentration)?,
            inflow: req(&schema.inflow)?,
            residents: req(&schema.residents)?,
            temperature: opt(&schema.temperature),
            cod: opt(&schema.cod),
            nitrogen: opt(&schema.nitrogen),
            ammonium_nitrogen: opt(&schema.ammonium_nitrogen),
        })
    }
}

/// Parse a calendar date, discarding any time-of-day part.
pub fn parse_date(s: &str) -> Option<NaiveDate> {
    let s = s.trim();
    let day = s.split(['T', ' ']).next()?;
    NaiveDate::parse_from_str(day, "%Y-%m-%d").ok()
}

fn parse_bool(s: &str) -> Option<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" | "y" | "t" => Some(true),
        "false" | "0" | "no" | "n" | "f" => Some(false),
        _ => None,
    }
}

pub fn read_panel_csv<R: Read>(reader: R, schema: &ColumnMapping, opts: &CsvOptions) -> Result<PanelDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(opts.delimiter)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| CoreError::InvalidDataset(format!("cannot read header row: {e}")))?
        .clone();
    let cols = Columns::locate(&headers, schema)?;

    let mut plants: BTreeMap<PlantId, PlantMeta> = BTreeMap::new();
    let mut samples = Vec::new();
    let mut seen: HashSet<(PlantId, NaiveDate, String)> = HashSet::new();

    for (i, rec) in rdr.records().enumerate() {
        // 1-based data row (header excluded)
        let row = i + 1;
        let rec = rec.map_err(|e| CoreError::InvalidRow {
            row,
            message: e.to_string(),
        })?;
        let field = |c: usize| rec.get(c).unwrap_or("");
        let parse_err = |name: &str, value: &str| CoreError::Parse {
            row,
            field: name.to_string(),
            value: value.to_string(),
        };
        let num = |c: usize, name: &str| -> Result<f64> {
            let v = field(c);
            v.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| parse_err(name, v))
        };
        let opt_num = |c: Option<usize>, name: &str| -> Result<Option<f64>> {
            match c.map(field) {
                None => Ok(None),
                Some(v) if v.is_empty() || v.eq_ignore_ascii_case("na") => Ok(None),
                Some(v) => v
                    .parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .map(Some)
                    .ok_or_else(|| parse_err(name, v)),
            }
        };

        let plant_id = PlantId::new(field(cols.plant_id));
        if plant_id.0.is_empty() {
            return Err(parse_err("plant_id", ""));
        }
        let date = parse_date(field(cols.date)).ok_or_else(|| parse_err("date", field(cols.date)))?;
        let concentration = num(cols.concentration, "concentration")?;
        if concentration < 0.0 {
            return Err(CoreError::InvalidRow {
                row,
                message: format!("negative concentration {concentration}"),
            });
        }
        let inflow = num(cols.inflow, "inflow")?;
        if inflow <= 0.0 {
            return Err(CoreError::InvalidRow {
                row,
                message: format!("non-positive inflow {inflow}"),
            });
        }
        let residents_raw = field(cols.residents);
        let residents = residents_raw
            .parse::<u64>()
            .ok()
            .or_else(|| {
                residents_raw
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.fract() == 0.0 && *v >= 0.0)
                    .map(|v| v as u64)
            })
            .ok_or_else(|| parse_err("residents", residents_raw))?;
        if residents == 0 {
            return Err(CoreError::InvalidRow {
                row,
                message: "residents must be positive".into(),
            });
        }
        let in_initial_program = parse_bool(field(cols.in_initial_program))
            .ok_or_else(|| parse_err("in_initial_program", field(cols.in_initial_program)))?;
        let sewer_type = field(cols.sewer_type)
            .parse::<SewerType>()
            .map_err(|_| parse_err("sewer_type", field(cols.sewer_type)))?;
        let meta = PlantMeta {
            plant_id: plant_id.clone(),
            in_initial_program,
            state: field(cols.state).to_string(),
            sewer_type,
            residents,
        };
        match plants.get(&plant_id) {
            Some(prev) if *prev != meta => {
                return Err(CoreError::InvalidRow {
                    row,
                    message: format!("metadata for plant {plant_id} differs from earlier rows"),
                })
            }
            Some(_) => {}
            None => {
                plants.insert(plant_id.clone(), meta);
            }
        }

        let lab_sample_id = field(cols.lab_sample_id).to_string();
        if !seen.insert((plant_id.clone(), date, lab_sample_id.clone())) {
            return Err(CoreError::InvalidRow {
                row,
                message: format!("duplicate sample ({plant_id}, {date}, {lab_sample_id})"),
            });
        }
        samples.push(SampleRecord {
            plant_id,
            date,
            concentration,
            inflow,
            temperature: opt_num(cols.temperature, "temperature")?,
            cod: opt_num(cols.cod, "cod")?,
            nitrogen: opt_num(cols.nitrogen, "nitrogen")?,
            ammonium_nitrogen: opt_num(cols.ammonium_nitrogen, "ammonium_nitrogen")?,
            lab_sample_id,
        });
    }

    Ok(PanelDataset::new(plants.into_values().collect(), samples))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Write the dataset in the 13-column layout accepted by [`read_panel_csv`].
pub fn write_panel_csv<W: Write>(
    ds: &PanelDataset,
    writer: W,
    schema: &ColumnMapping,
    opts: &CsvOptions,
) -> Result<()> {
    let io = |e: csv::Error| CoreError::io("<panel csv>", e);
    let mut w = csv::WriterBuilder::new().delimiter(opts.delimiter).from_writer(writer);
    w.write_record(schema.header()).map_err(io)?;
    let meta: HashMap<&PlantId, &PlantMeta> = ds.plants.iter().map(|p| (&p.plant_id, p)).collect();
    for s in &ds.samples {
        let p = meta
            .get(&s.plant_id)
            .ok_or_else(|| CoreError::InvalidDataset(format!("sample references unknown plant {}", s.plant_id)))?;
        w.write_record([
            s.plant_id.as_str(),
            if p.in_initial_program { "true" } else { "false" },
            &p.state,
            p.sewer_type.as_str(),
            &s.date.to_string(),
            &s.lab_sample_id,
            &s.concentration.to_string(),
            &s.inflow.to_string(),
            &fmt_opt(s.temperature),
            &p.residents.to_string(),
            &fmt_opt(s.cod),
            &fmt_opt(s.nitrogen),
            &fmt_opt(s.ammonium_nitrogen),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| CoreError::io("<panel csv>", e))?;
    Ok(())
}

pub fn save_panel_csv(ds: &PanelDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let f = std::fs::File::create(path).map_err(|e| CoreError::io(path, e))?;
    write_panel_csv(
        ds,
        std::io::BufWriter::new(f),
        &ColumnMapping::default(),
        &CsvOptions::default(),
    )
}

/// One invariant violation found by [`validate_panel`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Finding {
    pub plant_id: Option<PlantId>,
    pub date: Option<NaiveDate>,
    pub message: String,
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.plant_id, self.date) {
            (Some(p), Some(d)) => write!(f, "[{p} {d}] {}", self.message),
            (Some(p), None) => write!(f, "[{p}] {}", self.message),
            _ => f.write_str(&self.message),
        }
    }
}

/// Check every dataset invariant, returning one finding per violation.
pub fn validate_panel(ds: &PanelDataset) -> Vec<Finding> {
    let mut out = Vec::new();
    let mut ids = HashSet::new();
    for p in &ds.plants {
        if !ids.insert(&p.plant_id) {
            out.push(Finding {
                plant_id: Some(p.plant_id.clone()),
                date: None,
                message: "duplicate plant id".into(),
            });
        }
        if p.residents == 0 {
            out.push(Finding {
                plant_id: Some(p.plant_id.clone()),
                date: None,
                message: "residents must be positive".into(),
            });
        }
    }
    let mut keys = HashSet::new();
    for s in &ds.samples {
        let finding = |message: String| Finding {
            plant_id: Some(s.plant_id.clone()),
            date: Some(s.date),
            message,
        };
        if !ids.contains(&s.plant_id) {
            out.push(finding("sample references an unknown plant".into()));
        }
        if !(s.concentration >= 0.0 && s.concentration.is_finite()) {
            out.push(finding(format!("invalid concentration {}", s.concentration)));
        }
        if !(s.inflow > 0.0 && s.inflow.is_finite()) {
            out.push(finding(format!("non-positive inflow {}", s.inflow)));
        }
        if !keys.insert((&s.plant_id, s.date, &s.lab_sample_id)) {
            out.push(finding(format!("duplicate lab sample id {}", s.lab_sample_id)));
        }
    }
    out
}
