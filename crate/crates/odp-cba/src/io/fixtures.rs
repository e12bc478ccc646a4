//! Fixture pack: projected stocks, annual benefit and cost tables, reference
//! present values and cost itemizations, verified against a SHA-256 manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rust_decimal::prelude::ToPrimitive;
use rust_decimal::Decimal;
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::benefits::Stream;
use crate::model::{split_exact, CountryId, MoneyM, TimeAxis, ValidatedModel, YearSeries};
use crate::projections::{CountryProjection, ProjectionError, ProjectionSet};

pub const MANIFEST: &str = "MANIFEST.sha256";

pub const FILES: [&str; 11] = [
    "annual_benefits.csv",
    "annual_costs.csv",
    "capex_items.csv",
    "country_category_shares.csv",
    "country_pv.csv",
    "ev_et_stock.csv",
    "opex_categories.csv",
    "reference_points.csv",
    "res_capacity.csv",
    "scenario_reference.csv",
    "stream_pv.csv",
];

const SHIPPED: [(&str, &str); 12] = [
    (
        "annual_benefits.csv",
        include_str!("../../fixtures/annual_benefits.csv"),
    ),
    ("annual_costs.csv", include_str!("../../fixtures/annual_costs.csv")),
    ("capex_items.csv", include_str!("../../fixtures/capex_items.csv")),
    (
        "country_category_shares.csv",
        include_str!("../../fixtures/country_category_shares.csv"),
    ),
    ("country_pv.csv", include_str!("../../fixtures/country_pv.csv")),
    ("ev_et_stock.csv", include_str!("../../fixtures/ev_et_stock.csv")),
    (
        "opex_categories.csv",
        include_str!("../../fixtures/opex_categories.csv"),
    ),
    (
        "reference_points.csv",
        include_str!("../../fixtures/reference_points.csv"),
    ),
    ("res_capacity.csv", include_str!("../../fixtures/res_capacity.csv")),
    (
        "scenario_reference.csv",
        include_str!("../../fixtures/scenario_reference.csv"),
    ),
    ("stream_pv.csv", include_str!("../../fixtures/stream_pv.csv")),
    (MANIFEST, include_str!("../../fixtures/MANIFEST.sha256")),
];

/// Column dips below this drop from the previous year are flagged.
pub const DIP_TOLERANCE: f64 = 0.05;
/// Printed row totals further than this from the component sum are flagged.
pub const ROW_TOTAL_TOLERANCE: f64 = 0.5;
/// Relative tolerance of column sums against reference stream PVs.
pub const STREAM_TOLERANCE: f64 = 0.05;
/// Relative tolerance of generated projections against fixture cells.
pub const PROJECTION_TOLERANCE: f64 = 0.015;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FixtureError {
    #[error("missing fixture `{0}`")]
    MissingFixture(String),
    #[error("checksum mismatch for `{file}`: manifest {expected}, file {actual}")]
    ChecksumMismatch {
        file: String,
        expected: String,
        actual: String,
    },
    #[error("{file}, row {row}: {reason}")]
    MalformedRow { file: String, row: u64, reason: String },
    #[error("{file}: {reason}")]
    Io { file: String, reason: String },
    #[error("reference point `{0}` not in fixture pack")]
    MissingReference(String),
    #[error(transparent)]
    Projection(#[from] ProjectionError),
}

fn malformed(file: &str, row: u64, reason: impl Into<String>) -> FixtureError {
    FixtureError::MalformedRow {
        file: file.to_string(),
        row,
        reason: reason.into(),
    }
}

/// Header plus rows of raw fields with their 1-based line numbers.
struct RawTable {
    file: String,
    rows: Vec<(u64, Vec<String>)>,
}

impl RawTable {
    fn parse(file: &str, text: &str, expected_headers: &[&str]) -> Result<Self, FixtureError> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        let headers: Vec<String> = rdr
            .headers()
            .map_err(|e| malformed(file, 1, e.to_string()))?
            .iter()
            .map(|h| h.trim().to_string())
            .collect();
        if headers != expected_headers {
            return Err(malformed(
                file,
                1,
                format!("header {:?}, expected {:?}", headers, expected_headers),
            ));
        }
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                malformed(file, line, e.to_string())
            })?;
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            rows.push((line, rec.iter().map(|f| f.trim().to_string()).collect()));
        }
        Ok(RawTable {
            file: file.to_string(),
            rows,
        })
    }

    fn dec(&self, line: u64, field: &str) -> Result<Decimal, FixtureError> {
        Decimal::from_str(field).map_err(|_| malformed(&self.file, line, format!("`{field}` is not a number")))
    }

    fn num(&self, line: u64, field: &str) -> Result<f64, FixtureError> {
        self.dec(line, field)?
            .to_f64()
            .ok_or_else(|| malformed(&self.file, line, format!("`{field}` out of range")))
    }

    fn flag(&self, line: u64, field: &str) -> Result<bool, FixtureError> {
        match field {
            "true" => Ok(true),
            "false" => Ok(false),
            _ => Err(malformed(&self.file, line, format!("`{field}` is not true/false"))),
        }
    }

    /// Year-indexed table: first column consecutive years, then numbers.
    fn year_rows(&self) -> Result<(TimeAxis, Vec<Vec<Decimal>>), FixtureError> {
        let mut years = Vec::new();
        let mut values = Vec::new();
        for (line, fields) in &self.rows {
            let year: i32 = fields[0]
                .parse()
                .map_err(|_| malformed(&self.file, *line, format!("`{}` is not a year", fields[0])))?;
            if let Some(prev) = years.last() {
                if year != prev + 1 {
                    return Err(malformed(
                        &self.file,
                        *line,
                        format!("year {year} does not follow {prev}"),
                    ));
                }
            }
            years.push(year);
            values.push(
                fields[1..]
                    .iter()
                    .map(|f| self.dec(*line, f))
                    .collect::<Result<Vec<_>, _>>()?,
            );
        }
        let (first, last) = match (years.first(), years.last()) {
            (Some(f), Some(l)) => (*f, *l),
            _ => return Err(malformed(&self.file, 2, "no data rows")),
        };
        let axis = TimeAxis::new(first - 1, first, last).map_err(|e| malformed(&self.file, 2, e.to_string()))?;
        Ok((axis, values))
    }
}

fn money(v: Decimal) -> MoneyM {
    MoneyM(v)
}

fn column(axis: TimeAxis, rows: &[Vec<Decimal>], i: usize) -> YearSeries<MoneyM> {
    YearSeries::from_fn(axis, |y| money(rows[(y - axis.first_year) as usize][i]))
}

fn column_f64(axis: TimeAxis, rows: &[Vec<Decimal>], i: usize) -> YearSeries {
    YearSeries::from_fn(axis, |y| {
        rows[(y - axis.first_year) as usize][i].to_f64().unwrap_or(f64::NAN)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountryPv {
    pub country: CountryId,
    pub benefits_pv: MoneyM,
    pub costs_pv: MoneyM,
    pub npv: MoneyM,
    pub bcr: f64,
    pub mc_mean_npv: MoneyM,
    pub mc_mean_bcr: f64,
    pub prob_npv_pos_floor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CategoryShares {
    pub country: CountryId,
    pub economic: f64,
    pub environmental: f64,
    pub reliability: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CapexGroup {
    Incremental,
    Core,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CapexItem {
    pub group: CapexGroup,
    pub item: String,
    pub pv_meur: Decimal,
    pub ai_related: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OpexItem {
    pub category: String,
    pub annual_avg_pv: Decimal,
    pub ai_related: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioReference {
    pub scenario: String,
    pub npv: MoneyM,
    pub bcr: f64,
}

/// Typed contents of a fixture directory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixturePack {
    pub axis: TimeAxis,
    /// Thousands of vehicles.
    pub ev_stock: BTreeMap<CountryId, YearSeries>,
    pub et_stock: BTreeMap<CountryId, YearSeries>,
    /// GW.
    pub res_capacity: BTreeMap<CountryId, YearSeries>,
    /// Annual benefit columns as printed.
    pub benefits: BTreeMap<Stream, YearSeries<MoneyM>>,
    pub benefit_row_totals: YearSeries<MoneyM>,
    pub capex: YearSeries<MoneyM>,
    pub opex: YearSeries<MoneyM>,
    pub cost_row_totals: YearSeries<MoneyM>,
    pub stream_pv: BTreeMap<Stream, MoneyM>,
    pub country_pv: Vec<CountryPv>,
    pub category_shares: Vec<CategoryShares>,
    pub capex_items: Vec<CapexItem>,
    pub opex_categories: Vec<OpexItem>,
    pub scenario_reference: Vec<ScenarioReference>,
    pub reference: BTreeMap<String, Decimal>,
}

const BENEFIT_HEADERS: [&str; 10] = [
    "year", "ROD", "ROETAS", "CSDR_PLR", "FES", "AEC", "GSMS", "CO2", "RAP", "total",
];

impl FixturePack {
    /// The pack compiled into the binary.
    pub fn shipped() -> Result<Self, FixtureError> {
        let get = |name: &str| -> Result<String, FixtureError> {
            SHIPPED
                .iter()
                .find(|(n, _)| *n == name)
                .map(|(_, t)| t.to_string())
                .ok_or_else(|| FixtureError::MissingFixture(name.to_string()))
        };
        verify_manifest(&get(MANIFEST)?, |name| get(name).map(String::into_bytes))?;
        Self::parse_with(get)
    }

    /// Parses all tables from a name → text source.
    pub fn parse_with(get: impl Fn(&str) -> Result<String, FixtureError>) -> Result<Self, FixtureError> {
        let t = RawTable::parse(
            "ev_et_stock.csv",
            &get("ev_et_stock.csv")?,
            &["year", "ev_AT", "ev_HU", "ev_SI", "et_AT", "et_HU", "et_SI"],
        )?;
        let (axis, rows) = t.year_rows()?;
        let countries: Vec<CountryId> = ["AT", "HU", "SI"].iter().map(|c| CountryId::new(*c)).collect();
        let mut ev_stock = BTreeMap::new();
        let mut et_stock = BTreeMap::new();
        for (i, c) in countries.iter().enumerate() {
            ev_stock.insert(c.clone(), column_f64(axis, &rows, i));
            et_stock.insert(c.clone(), column_f64(axis, &rows, 3 + i));
        }

        let t = RawTable::parse(
            "res_capacity.csv",
            &get("res_capacity.csv")?,
            &["year", "AT", "HU", "SI"],
        )?;
        let (res_axis, rows) = t.year_rows()?;
        if res_axis != axis {
            return Err(malformed("res_capacity.csv", 2, "years differ from ev_et_stock.csv"));
        }
        let res_capacity = countries
            .iter()
            .enumerate()
            .map(|(i, c)| (c.clone(), column_f64(axis, &rows, i)))
            .collect();

        let t = RawTable::parse("annual_benefits.csv", &get("annual_benefits.csv")?, &BENEFIT_HEADERS)?;
        let (b_axis, rows) = t.year_rows()?;
        if b_axis != axis {
            let row = (t.rows.len() + 2) as u64;
            return Err(malformed(
                "annual_benefits.csv",
                row,
                format!(
                    "covers {}–{}, expected {}–{}",
                    b_axis.first_year, b_axis.last_year, axis.first_year, axis.last_year
                ),
            ));
        }
        let mut benefits = BTreeMap::new();
        for (i, code) in BENEFIT_HEADERS[1..9].iter().enumerate() {
            let s = Stream::from_code(code)
                .ok_or_else(|| malformed("annual_benefits.csv", 1, format!("unknown stream {code}")))?;
            benefits.insert(s, column(axis, &rows, i));
        }
        let benefit_row_totals = column(axis, &rows, 8);

        let t = RawTable::parse(
            "annual_costs.csv",
            &get("annual_costs.csv")?,
            &["year", "capex", "opex", "total"],
        )?;
        let (c_axis, rows) = t.year_rows()?;
        if c_axis != axis {
            let row = (t.rows.len() + 2) as u64;
            return Err(malformed("annual_costs.csv", row, "years differ from ev_et_stock.csv"));
        }
        let capex = column(axis, &rows, 0);
        let opex = column(axis, &rows, 1);
        let cost_row_totals = column(axis, &rows, 2);

        let t = RawTable::parse("stream_pv.csv", &get("stream_pv.csv")?, &["stream", "pv_meur"])?;
        let mut stream_pv = BTreeMap::new();
        for (line, f) in &t.rows {
            let s = Stream::from_code(&f[0])
                .ok_or_else(|| malformed("stream_pv.csv", *line, format!("unknown stream {}", f[0])))?;
            stream_pv.insert(s, money(t.dec(*line, &f[1])?));
        }
        if stream_pv.len() != Stream::ALL.len() {
            return Err(malformed(
                "stream_pv.csv",
                (t.rows.len() + 2) as u64,
                "expected one row per stream",
            ));
        }

        let t = RawTable::parse(
            "country_pv.csv",
            &get("country_pv.csv")?,
            &[
                "country",
                "benefits_pv",
                "costs_pv",
                "npv",
                "bcr",
                "mc_mean_npv",
                "mc_mean_bcr",
                "prob_npv_pos_floor",
            ],
        )?;
        let country_pv = t
            .rows
            .iter()
            .map(|(line, f)| {
                Ok(CountryPv {
                    country: CountryId::new(f[0].clone()),
                    benefits_pv: money(t.dec(*line, &f[1])?),
                    costs_pv: money(t.dec(*line, &f[2])?),
                    npv: money(t.dec(*line, &f[3])?),
                    bcr: t.num(*line, &f[4])?,
                    mc_mean_npv: money(t.dec(*line, &f[5])?),
                    mc_mean_bcr: t.num(*line, &f[6])?,
                    prob_npv_pos_floor: t.num(*line, &f[7])?,
                })
            })
            .collect::<Result<Vec<_>, FixtureError>>()?;

        let t = RawTable::parse(
            "country_category_shares.csv",
            &get("country_category_shares.csv")?,
            &["country", "economic", "environmental", "reliability"],
        )?;
        let category_shares = t
            .rows
            .iter()
            .map(|(line, f)| {
                Ok(CategoryShares {
                    country: CountryId::new(f[0].clone()),
                    economic: t.num(*line, &f[1])?,
                    environmental: t.num(*line, &f[2])?,
                    reliability: t.num(*line, &f[3])?,
                })
            })
            .collect::<Result<Vec<_>, FixtureError>>()?;

        let t = RawTable::parse(
            "capex_items.csv",
            &get("capex_items.csv")?,
            &["group", "item", "pv_meur", "ai_related"],
        )?;
        let capex_items = t
            .rows
            .iter()
            .map(|(line, f)| {
                let group = match f[0].as_str() {
                    "incremental" => CapexGroup::Incremental,
                    "core" => CapexGroup::Core,
                    g => return Err(malformed("capex_items.csv", *line, format!("unknown group `{g}`"))),
                };
                Ok(CapexItem {
                    group,
                    item: f[1].clone(),
                    pv_meur: t.dec(*line, &f[2])?,
                    ai_related: t.flag(*line, &f[3])?,
                })
            })
            .collect::<Result<Vec<_>, FixtureError>>()?;

        let t = RawTable::parse(
            "opex_categories.csv",
            &get("opex_categories.csv")?,
            &["category", "annual_avg_pv", "ai_related"],
        )?;
        let opex_categories = t
            .rows
            .iter()
            .map(|(line, f)| {
                Ok(OpexItem {
                    category: f[0].clone(),
                    annual_avg_pv: t.dec(*line, &f[1])?,
                    ai_related: t.flag(*line, &f[2])?,
                })
            })
            .collect::<Result<Vec<_>, FixtureError>>()?;

        let t = RawTable::parse(
            "scenario_reference.csv",
            &get("scenario_reference.csv")?,
            &["scenario", "npv", "bcr"],
        )?;
        let scenario_reference = t
            .rows
            .iter()
            .map(|(line, f)| {
                Ok(ScenarioReference {
                    scenario: f[0].clone(),
                    npv: money(t.dec(*line, &f[1])?),
                    bcr: t.num(*line, &f[2])?,
                })
            })
            .collect::<Result<Vec<_>, FixtureError>>()?;

        let t = RawTable::parse("reference_points.csv", &get("reference_points.csv")?, &["key", "value"])?;
        let reference = t
            .rows
            .iter()
            .map(|(line, f)| Ok((f[0].clone(), t.dec(*line, &f[1])?)))
            .collect::<Result<BTreeMap<_, _>, FixtureError>>()?;

        Ok(FixturePack {
            axis,
            ev_stock,
            et_stock,
            res_capacity,
            benefits,
            benefit_row_totals,
            capex,
            opex,
            cost_row_totals,
            stream_pv,
            country_pv,
            category_shares,
            capex_items,
            opex_categories,
            scenario_reference,
            reference,
        })
    }

    pub fn reference(&self, key: &str) -> Result<Decimal, FixtureError> {
        self.reference
            .get(key)
            .copied()
            .ok_or_else(|| FixtureError::MissingReference(key.to_string()))
    }

    pub fn reference_f64(&self, key: &str) -> Result<f64, FixtureError> {
        Ok(self.reference(key)?.to_f64().unwrap_or(f64::NAN))
    }

    pub fn projections(&self) -> Result<ProjectionSet, FixtureError> {
        let by_country = self
            .ev_stock
            .keys()
            .map(|c| {
                (
                    c.clone(),
                    CountryProjection {
                        ev_stock: self.ev_stock[c].clone(),
                        et_stock: self.et_stock[c].clone(),
                        res_capacity: self.res_capacity[c].clone(),
                    },
                )
            })
            .collect();
        Ok(ProjectionSet::from_series(self.axis, by_country)?)
    }

    pub fn core_items(&self) -> impl Iterator<Item = &CapexItem> {
        self.capex_items.iter().filter(|i| i.group == CapexGroup::Core)
    }

    pub fn country_reference(&self, c: &CountryId) -> Option<&CountryPv> {
        self.country_pv.iter().find(|r| &r.country == c)
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Parses `<hex>  <file>` lines.
fn parse_manifest(text: &str) -> Result<Vec<(String, String)>, FixtureError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let mut parts = l.split_whitespace();
            match (parts.next(), parts.next(), parts.next()) {
                (Some(h), Some(f), None) => Ok((f.trim_start_matches('*').to_string(), h.to_lowercase())),
                _ => Err(malformed(MANIFEST, i as u64 + 1, "expected `<sha256>  <file>`")),
            }
        })
        .collect()
}

fn verify_manifest(manifest: &str, read: impl Fn(&str) -> Result<Vec<u8>, FixtureError>) -> Result<(), FixtureError> {
    let entries = parse_manifest(manifest)?;
    for f in FILES {
        if !entries.iter().any(|(name, _)| name == f) {
            return Err(FixtureError::MissingFixture(format!("{f} (not listed in {MANIFEST})")));
        }
    }
    for (name, expected) in entries {
        let actual = sha256_hex(&read(&name)?);
        if actual != expected {
            return Err(FixtureError::ChecksumMismatch {
                file: name,
                expected,
                actual,
            });
        }
    }
    Ok(())
}

fn read_file(dir: &Path, name: &str) -> Result<Vec<u8>, FixtureError> {
    let path = dir.join(name);
    if !path.exists() {
        return Err(FixtureError::MissingFixture(path.display().to_string()));
    }
    fs::read(&path).map_err(|e| FixtureError::Io {
        file: path.display().to_string(),
        reason: e.to_string(),
    })
}

/// Loads a fixture directory after checking every file against its manifest.
pub fn load_fixtures(dir: &Path) -> Result<FixturePack, FixtureError> {
    let manifest = String::from_utf8_lossy(&read_file(dir, MANIFEST)?).into_owned();
    verify_manifest(&manifest, |name| read_file(dir, name))?;
    FixturePack::parse_with(|name| {
        String::from_utf8(read_file(dir, name)?).map_err(|e| FixtureError::Io {
            file: name.to_string(),
            reason: e.to_string(),
        })
    })
}

/// Rewrites the manifest of `dir` from the current file contents.
pub fn write_manifest(dir: &Path) -> Result<(), FixtureError> {
    let mut out = String::new();
    for f in FILES {
        out.push_str(&format!("{}  {}\n", sha256_hex(&read_file(dir, f)?), f));
    }
    fs::write(dir.join(MANIFEST), out).map_err(|e| FixtureError::Io {
        file: MANIFEST.to_string(),
        reason: e.to_string(),
    })
}

/// Copies the shipped pack into `dir`.
pub fn export_shipped(dir: &Path) -> Result<(), FixtureError> {
    fs::create_dir_all(dir).map_err(|e| FixtureError::Io {
        file: dir.display().to_string(),
        reason: e.to_string(),
    })?;
    for (name, text) in SHIPPED {
        fs::write(dir.join(name), text).map_err(|e| FixtureError::Io {
            file: name.to_string(),
            reason: e.to_string(),
        })?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Anomaly {
    /// A cell that drops below the previous year in an otherwise rising column.
    ColumnDip {
        stream: Stream,
        year: i32,
        value: MoneyM,
        neighbour_mean: MoneyM,
    },
    /// Printed row total disagrees with the sum of its components.
    RowTotal {
        year: i32,
        printed: MoneyM,
        component_sum: MoneyM,
    },
}

pub fn detect_anomalies(pack: &FixturePack) -> Vec<Anomaly> {
    let tol = Decimal::from_str("0.05").unwrap_or_default();
    let mut out = Vec::new();
    for (s, col) in &pack.benefits {
        let v = col.values();
        for i in 1..v.len() {
            if v[i].value() < v[i - 1].value() - tol {
                let next = v.get(i + 1).copied().unwrap_or(v[i - 1]);
                out.push(Anomaly::ColumnDip {
                    stream: *s,
                    year: col.axis().year_at(i),
                    value: v[i],
                    neighbour_mean: MoneyM((v[i - 1].value() + next.value()) / Decimal::TWO),
                });
            }
        }
    }
    let row_tol = Decimal::from_str("0.5").unwrap_or_default();
    for (year, printed) in pack.benefit_row_totals.iter() {
        let sum: MoneyM = pack
            .benefits
            .values()
            .map(|c| c.get(year).copied().unwrap_or(MoneyM::ZERO))
            .sum();
        if (sum - *printed).abs().value() > row_tol {
            out.push(Anomaly::RowTotal {
                year,
                printed: *printed,
                component_sum: sum,
            });
        }
    }
    out
}

/// Benefit columns with flagged dips replaced by their neighbour mean.
pub fn repaired_benefits(pack: &FixturePack, anomalies: &[Anomaly]) -> BTreeMap<Stream, YearSeries<MoneyM>> {
    let mut cols = pack.benefits.clone();
    for a in anomalies {
        if let Anomaly::ColumnDip {
            stream,
            year,
            neighbour_mean,
            ..
        } = a
        {
            if let Some(col) = cols.get_mut(stream) {
                if let Some(i) = col.axis().index_of(*year) {
                    col.values_mut()[i] = *neighbour_mean;
                }
            }
        }
    }
    cols
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Reconciliation {
    /// Annual columns scaled so each sums exactly to its reference PV.
    pub columns: BTreeMap<Stream, YearSeries<MoneyM>>,
    /// Reference PV divided by the repaired column sum.
    pub factors: BTreeMap<Stream, Decimal>,
}

/// Scales each repaired column proportionally onto its reference PV; the
/// final year absorbs the rounding remainder.
pub fn reconcile_benefits(pack: &FixturePack) -> Reconciliation {
    let repaired = repaired_benefits(pack, &detect_anomalies(pack));
    let mut columns = BTreeMap::new();
    let mut factors = BTreeMap::new();
    for (s, col) in repaired {
        let target = pack.stream_pv[&s].value();
        let sum = col.total().value();
        let weights: Vec<Decimal> = col.values().iter().map(|v| v.value()).collect();
        let parts = split_exact(target, &weights);
        factors.insert(s, if sum.is_zero() { Decimal::ONE } else { target / sum });
        columns.insert(
            s,
            YearSeries::from_fn(*col.axis(), |y| MoneyM(parts[(y - col.axis().first_year) as usize])),
        );
    }
    Reconciliation { columns, factors }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StreamFidelity {
    pub stream: Stream,
    pub reference: MoneyM,
    pub raw_sum: MoneyM,
    pub repaired_sum: MoneyM,
    pub raw_deviation: f64,
    pub repaired_deviation: f64,
    /// Judged on the repaired column.
    pub within_tolerance: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectionDrift {
    pub series: String,
    pub country: CountryId,
    pub year: i32,
    pub generated: f64,
    pub fixture: f64,
    pub rel_deviation: f64,
    pub within_tolerance: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SumCheck {
    pub name: String,
    pub computed: MoneyM,
    pub stated: MoneyM,
}

impl SumCheck {
    pub fn gap(&self) -> MoneyM {
        self.computed - self.stated
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixtureCheck {
    pub anomalies: Vec<Anomaly>,
    pub stream_fidelity: Vec<StreamFidelity>,
    pub projection_drift: Vec<ProjectionDrift>,
    pub sums: Vec<SumCheck>,
}

impl FixtureCheck {
    /// Every stream column is within tolerance of its reference PV.
    pub fn streams_ok(&self) -> bool {
        self.stream_fidelity.iter().all(|s| s.within_tolerance)
    }

    pub fn projections_ok(&self) -> bool {
        self.projection_drift.iter().all(|p| p.within_tolerance)
    }
}

fn rel(a: Decimal, b: Decimal) -> f64 {
    if b.is_zero() {
        return f64::INFINITY;
    }
    ((a - b) / b).to_f64().unwrap_or(f64::NAN)
}

fn sum_check(name: &str, computed: Decimal, pack: &FixturePack, key: &str) -> Result<SumCheck, FixtureError> {
    Ok(SumCheck {
        name: name.to_string(),
        computed: MoneyM(computed),
        stated: MoneyM(pack.reference(key)?),
    })
}

/// Anomaly registry, stream fidelity, cost subtotal checks and, when a model
/// is supplied, drift of its generated projections from the fixture stocks.
pub fn check_fixtures(pack: &FixturePack, model: Option<&ValidatedModel>) -> Result<FixtureCheck, FixtureError> {
    let anomalies = detect_anomalies(pack);
    let repaired = repaired_benefits(pack, &anomalies);
    let stream_fidelity = Stream::ALL
        .iter()
        .map(|s| {
            let reference = pack.stream_pv[s];
            let raw_sum = pack.benefits[s].total();
            let repaired_sum = repaired[s].total();
            let repaired_deviation = rel(repaired_sum.value(), reference.value());
            StreamFidelity {
                stream: *s,
                reference,
                raw_sum,
                repaired_sum,
                raw_deviation: rel(raw_sum.value(), reference.value()),
                repaired_deviation,
                within_tolerance: repaired_deviation.abs() <= STREAM_TOLERANCE,
            }
        })
        .collect();

    let mut projection_drift = Vec::new();
    if let Some(m) = model {
        let generated = ProjectionSet::generate(m)?;
        for (c, p) in generated.iter() {
            let series = [
                ("ev", &p.ev_stock, pack.ev_stock.get(c)),
                ("et", &p.et_stock, pack.et_stock.get(c)),
                ("res", &p.res_capacity, pack.res_capacity.get(c)),
            ];
            for (name, g, f) in series {
                let Some(f) = f else { continue };
                for (year, gv) in g.iter() {
                    let Some(fv) = f.get(year) else { continue };
                    let d = if *fv == 0.0 { f64::INFINITY } else { (gv - fv) / fv };
                    projection_drift.push(ProjectionDrift {
                        series: name.to_string(),
                        country: c.clone(),
                        year,
                        generated: *gv,
                        fixture: *fv,
                        rel_deviation: d,
                        within_tolerance: d.abs() <= PROJECTION_TOLERANCE,
                    });
                }
            }
        }
    }

    let incremental: Decimal = pack
        .capex_items
        .iter()
        .filter(|i| i.group == CapexGroup::Incremental)
        .map(|i| i.pv_meur)
        .sum();
    let core: Decimal = pack.core_items().map(|i| i.pv_meur).sum();
    let opex_avg: Decimal = pack.opex_categories.iter().map(|o| o.annual_avg_pv).sum();
    let sums = vec![
        sum_check(
            "capex_column_vs_incremental_items",
            pack.capex.total().value(),
            pack,
            "capex_incremental_subtotal",
        )?,
        sum_check(
            "incremental_items_vs_subtotal",
            incremental,
            pack,
            "capex_incremental_subtotal",
        )?,
        sum_check("core_items_vs_subtotal", core, pack, "capex_core_subtotal")?,
        sum_check("opex_column_vs_total", pack.opex.total().value(), pack, "opex_total")?,
        sum_check("opex_categories_vs_annual_average", opex_avg, pack, "opex_annual_avg")?,
    ];

    Ok(FixtureCheck {
        anomalies,
        stream_fidelity,
        projection_drift,
        sums,
    })
}
