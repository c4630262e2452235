//! CSV ingestion of stranding records.
//!
//! Parsing is total: every data row ends up either as a [`SurveillanceRecord`] or as a
//! [`RejectedRow`] with a machine-readable reason. Only a missing required column or an
//! unreadable file abort the parse.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::record::{
    in_bounding_box, AgeClass, Gender, RegionCode, SpeciesGroup, SurveillanceRecord,
    VitalCondition,
};
use crate::error::{Error, Result};

/// Canonical field names of the 20-column stranding dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Field {
    Region,
    Count,
    Latitude,
    Longitude,
    SampleTime,
    SpeciesGroup,
    SpeciesName,
    Institutions,
    Gender,
    Marks,
    RehabilitationCenter,
    Age,
    City,
    VitalCondition,
    Size,
    H5n1Sampled,
    LocationInfo,
    StartingDay,
    EndingDay,
    CorporalCondition,
}

impl Field {
    pub const ALL: [Field; 20] = [
        Field::Region,
        Field::Count,
        Field::Latitude,
        Field::Longitude,
        Field::SampleTime,
        Field::SpeciesGroup,
        Field::SpeciesName,
        Field::Institutions,
        Field::Gender,
        Field::Marks,
        Field::RehabilitationCenter,
        Field::Age,
        Field::City,
        Field::VitalCondition,
        Field::Size,
        Field::H5n1Sampled,
        Field::LocationInfo,
        Field::StartingDay,
        Field::EndingDay,
        Field::CorporalCondition,
    ];

    /// Fields without which no record can be built.
    pub const REQUIRED: [Field; 5] = [
        Field::Region,
        Field::Latitude,
        Field::Longitude,
        Field::SampleTime,
        Field::SpeciesGroup,
    ];

    pub fn canonical_name(self) -> &'static str {
        match self {
            Field::Region => "region",
            Field::Count => "count",
            Field::Latitude => "latitude",
            Field::Longitude => "longitude",
            Field::SampleTime => "sample_time",
            Field::SpeciesGroup => "species_group",
            Field::SpeciesName => "species_name",
            Field::Institutions => "institutions",
            Field::Gender => "gender",
            Field::Marks => "marks",
            Field::RehabilitationCenter => "rehabilitation_center",
            Field::Age => "age",
            Field::City => "city",
            Field::VitalCondition => "vital_condition",
            Field::Size => "size",
            Field::H5n1Sampled => "h5n1_sampled",
            Field::LocationInfo => "location_info",
            Field::StartingDay => "starting_day",
            Field::EndingDay => "ending_day",
            Field::CorporalCondition => "corporal_condition",
        }
    }

    pub fn from_canonical(name: &str) -> Option<Field> {
        let key = normalize_header(name);
        Field::ALL.into_iter().find(|f| f.canonical_name() == key)
    }

    fn is_passthrough(self) -> bool {
        matches!(
            self,
            Field::Institutions
                | Field::Marks
                | Field::RehabilitationCenter
                | Field::City
                | Field::Size
                | Field::H5n1Sampled
                | Field::LocationInfo
                | Field::StartingDay
                | Field::EndingDay
                | Field::CorporalCondition
        )
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.canonical_name())
    }
}

/// Lowercase, trim and collapse every run of non-alphanumeric characters to `_`.
pub fn normalize_header(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    let mut pending_sep = false;
    for ch in raw.trim().trim_start_matches('\u{feff}').chars() {
        if ch.is_alphanumeric() {
            if pending_sep && !out.is_empty() {
                out.push('_');
            }
            pending_sep = false;
            out.extend(ch.to_lowercase());
        } else {
            pending_sep = true;
        }
    }
    out
}

/// Maps header strings found in a file to canonical fields.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnMap {
    aliases: HashMap<String, Field>,
}

impl Default for ColumnMap {
    /// Canonical names plus the header spellings of the published dataset.
    fn default() -> Self {
        let mut map = ColumnMap {
            aliases: HashMap::new(),
        };
        for field in Field::ALL {
            map.insert(field.canonical_name(), field);
        }
        let table = [
            ("REGION", Field::Region),
            ("RECORD (n)", Field::Count),
            ("RECORD", Field::Count),
            ("N", Field::Count),
            ("LAT", Field::Latitude),
            ("LON", Field::Longitude),
            ("LONG", Field::Longitude),
            ("Sample TIME", Field::SampleTime),
            ("DATE", Field::SampleTime),
            ("FECHA", Field::SampleTime),
            ("SPECIES Type", Field::SpeciesGroup),
            ("TYPE", Field::SpeciesGroup),
            ("TIPO", Field::SpeciesGroup),
            ("SPECIES", Field::SpeciesName),
            ("ESPECIE", Field::SpeciesName),
            ("INSTITUTIONS ENROLLED", Field::Institutions),
            ("MARKS", Field::Marks),
            ("REHABILITATION CENTER", Field::RehabilitationCenter),
            ("CITY", Field::City),
            ("VITAL CONDITION", Field::VitalCondition),
            ("SIZE", Field::Size),
            ("H5N1 SAMPLED", Field::H5n1Sampled),
            ("LOCATION INFORs", Field::LocationInfo),
            ("LOCATION INFO", Field::LocationInfo),
            ("STARTING DAY", Field::StartingDay),
            ("ENDING DAY", Field::EndingDay),
            ("CORPORAL CONDITION", Field::CorporalCondition),
        ];
        for (header, field) in table {
            map.insert(header, field);
        }
        map
    }
}

impl ColumnMap {
    pub fn empty() -> Self {
        ColumnMap {
            aliases: HashMap::new(),
        }
    }

    /// Register (or override) a header spelling.
    pub fn insert(&mut self, header: &str, field: Field) {
        self.aliases.insert(normalize_header(header), field);
    }

    pub fn with(mut self, header: &str, field: Field) -> Self {
        self.insert(header, field);
        self
    }

    pub fn resolve(&self, header: &str) -> Option<Field> {
        self.aliases.get(&normalize_header(header)).copied()
    }
}

/// Machine-readable rejection reasons.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RejectReason {
    MalformedRow,
    InvalidRegion,
    BadCoordinate,
    OutOfBounds,
    BadDate,
    BadCount,
}

impl RejectReason {
    pub fn code(self) -> &'static str {
        match self {
            RejectReason::MalformedRow => "malformed-row",
            RejectReason::InvalidRegion => "invalid-region",
            RejectReason::BadCoordinate => "bad-coordinate",
            RejectReason::OutOfBounds => "out-of-bounds",
            RejectReason::BadDate => "bad-date",
            RejectReason::BadCount => "bad-count",
        }
    }
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectedRow {
    /// 1-based line number in the source file (the header is line 1).
    pub line: u64,
    pub reason: RejectReason,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParseOutcome {
    pub records: Vec<SurveillanceRecord>,
    pub rejected: Vec<RejectedRow>,
    /// Number of data rows seen (excluding the header).
    pub input_rows: usize,
}

impl ParseOutcome {
    pub fn total_animals(&self) -> u64 {
        self.records.iter().map(|r| u64::from(r.count)).sum()
    }

    /// Rejected rows as JSON lines.
    pub fn rejected_jsonl(&self) -> String {
        let mut out = String::new();
        for row in &self.rejected {
            out.push_str(&serde_json::to_string(row).expect("rejected row serializes"));
            out.push('\n');
        }
        out
    }
}

/// Decode file bytes as UTF-8, falling back to Latin-1.
pub fn decode_text(bytes: &[u8]) -> String {
    match std::str::from_utf8(bytes) {
        Ok(s) => s.to_owned(),
        Err(_) => bytes.iter().map(|&b| b as char).collect(),
    }
}

pub fn parse_csv(path: &Path, columns: &ColumnMap) -> Result<ParseOutcome> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_csv_str(&decode_text(&bytes), columns)
}

pub fn parse_csv_str(text: &str, columns: &ColumnMap) -> Result<ParseOutcome> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .has_headers(true)
        .from_reader(text.as_bytes());

    let headers = reader
        .headers()
        .map_err(|e| Error::Schema {
            column: format!("<header unreadable: {e}>"),
        })?
        .clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].trim().is_empty()) {
        return Err(Error::Schema {
            column: Field::REQUIRED[0].canonical_name().to_owned(),
        });
    }

    let mut index: BTreeMap<Field, usize> = BTreeMap::new();
    for (i, h) in headers.iter().enumerate() {
        if let Some(field) = columns.resolve(h) {
            index.entry(field).or_insert(i);
        }
    }
    for field in Field::REQUIRED {
        if !index.contains_key(&field) {
            return Err(Error::Schema {
                column: field.canonical_name().to_owned(),
            });
        }
    }

    let width = headers.len();
    let mut outcome = ParseOutcome::default();
    for (row_no, row) in reader.records().enumerate() {
        outcome.input_rows += 1;
        let fallback_line = row_no as u64 + 2;
        let row = match row {
            Ok(row) => row,
            Err(e) => {
                let line = e
                    .position()
                    .map(|p| p.line())
                    .unwrap_or(fallback_line);
                outcome.rejected.push(RejectedRow {
                    line,
                    reason: RejectReason::MalformedRow,
                    detail: e.to_string(),
                });
                continue;
            }
        };
        let line = row.position().map(|p| p.line()).unwrap_or(fallback_line);
        if row.len() != width {
            outcome.rejected.push(RejectedRow {
                line,
                reason: RejectReason::MalformedRow,
                detail: format!("expected {width} fields, found {}", row.len()),
            });
            continue;
        }
        let get = |field: Field| index.get(&field).map(|&i| row[i].trim()).unwrap_or("");
        match build_record(get) {
            Ok(record) => outcome.records.push(record),
            Err((reason, detail)) => outcome.rejected.push(RejectedRow {
                line,
                reason,
                detail,
            }),
        }
    }
    Ok(outcome)
}

type RowResult<T> = std::result::Result<T, (RejectReason, String)>;

fn build_record<'a>(get: impl Fn(Field) -> &'a str) -> RowResult<SurveillanceRecord> {
    let region = parse_region(get(Field::Region))?;
    let latitude = parse_coordinate(get(Field::Latitude), "latitude")?;
    let longitude = parse_coordinate(get(Field::Longitude), "longitude")?;
    if !in_bounding_box(latitude, longitude) {
        return Err((
            RejectReason::OutOfBounds,
            format!("({latitude}, {longitude}) outside the coastal bounding box"),
        ));
    }
    let sample_time = parse_date(get(Field::SampleTime))
        .ok_or_else(|| (RejectReason::BadDate, format!("unparseable date `{}`", get(Field::SampleTime))))?;
    let count = parse_count(get(Field::Count))?;

    let mut passthrough = BTreeMap::new();
    for field in Field::ALL.into_iter().filter(|f| f.is_passthrough()) {
        let v = get(field);
        if !v.is_empty() {
            passthrough.insert(field.canonical_name().to_owned(), v.to_owned());
        }
    }

    Ok(SurveillanceRecord {
        region,
        latitude,
        longitude,
        sample_time,
        species_group: SpeciesGroup::parse_lenient(get(Field::SpeciesGroup)),
        species_name: get(Field::SpeciesName).to_owned(),
        gender: Gender::parse_lenient(get(Field::Gender)),
        age: AgeClass::parse_lenient(get(Field::Age)),
        vital_condition: VitalCondition::parse_lenient(get(Field::VitalCondition)),
        count,
        passthrough,
    })
}

fn parse_region(raw: &str) -> RowResult<RegionCode> {
    let value: f64 = raw
        .parse()
        .map_err(|_| (RejectReason::InvalidRegion, format!("non-numeric region `{raw}`")))?;
    if value.fract() != 0.0 || !(0.0..=255.0).contains(&value) {
        return Err((RejectReason::InvalidRegion, format!("region `{raw}`")));
    }
    RegionCode::new(value as u8)
        .map_err(|_| (RejectReason::InvalidRegion, format!("region {raw} does not exist")))
}

fn parse_coordinate(raw: &str, what: &str) -> RowResult<f64> {
    let cleaned = if raw.contains(',') && !raw.contains('.') {
        raw.replace(',', ".")
    } else {
        raw.to_owned()
    };
    match cleaned.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err((RejectReason::BadCoordinate, format!("{what} `{raw}`"))),
    }
}

fn parse_count(raw: &str) -> RowResult<u32> {
    if raw.is_empty() {
        return Ok(1);
    }
    let value: f64 = raw
        .parse()
        .map_err(|_| (RejectReason::BadCount, format!("count `{raw}`")))?;
    if value.fract() != 0.0 || value < 1.0 || value > f64::from(u32::MAX) {
        return Err((RejectReason::BadCount, format!("count `{raw}`")));
    }
    Ok(value as u32)
}

const DATE_FORMATS: [&str; 6] = ["%Y-%m-%d", "%d-%m-%Y", "%d/%m/%Y", "%Y/%m/%d", "%d.%m.%Y", "%Y%m%d"];

/// Accepts ISO dates, day-first dates and either followed by a time of day.
pub fn parse_date(raw: &str) -> Option<NaiveDate> {
    let date_part = raw.split(['T', ' ']).next()?.trim();
    DATE_FORMATS
        .iter()
        .find_map(|fmt| NaiveDate::parse_from_str(date_part, fmt).ok())
}
