use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Latitude bounds (degrees) of the monitored coastline.
pub const LATITUDE_RANGE: (f64, f64) = (-56.0, -17.0);
/// Longitude bounds (degrees) of the monitored coastline.
pub const LONGITUDE_RANGE: (f64, f64) = (-76.0, -66.0);

/// Administrative region code. Valid codes are 1..=12 and 14..=16; there is no region 13
/// in the coastal dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct RegionCode(u8);

impl RegionCode {
    /// All valid codes in ascending order.
    pub const ALL: [RegionCode; 15] = [
        RegionCode(1),
        RegionCode(2),
        RegionCode(3),
        RegionCode(4),
        RegionCode(5),
        RegionCode(6),
        RegionCode(7),
        RegionCode(8),
        RegionCode(9),
        RegionCode(10),
        RegionCode(11),
        RegionCode(12),
        RegionCode(14),
        RegionCode(15),
        RegionCode(16),
    ];

    /// Region used as the design-matrix baseline.
    pub const BASELINE: RegionCode = RegionCode(1);

    pub fn new(code: u8) -> Result<Self> {
        if (1..=16).contains(&code) && code != 13 {
            Ok(RegionCode(code))
        } else {
            Err(Error::Coding(format!("invalid region code {code}")))
        }
    }

    pub fn code(self) -> u8 {
        self.0
    }

    /// Position of this region in [`RegionCode::ALL`].
    pub fn ordinal(self) -> usize {
        if self.0 < 13 {
            self.0 as usize - 1
        } else {
            self.0 as usize - 2
        }
    }

    pub fn name(self) -> &'static str {
        match self.0 {
            1 => "Tarapacá",
            2 => "Antofagasta",
            3 => "Atacama",
            4 => "Coquimbo",
            5 => "Valparaíso",
            6 => "O'Higgins",
            7 => "Maule",
            8 => "Biobío",
            9 => "Araucanía",
            10 => "Los Lagos",
            11 => "Aysén",
            12 => "Magallanes",
            14 => "Los Ríos",
            15 => "Arica y Parinacota",
            16 => "Ñuble",
            _ => unreachable!("validated at construction"),
        }
    }
}

impl TryFrom<u8> for RegionCode {
    type Error = Error;

    fn try_from(code: u8) -> Result<Self> {
        RegionCode::new(code)
    }
}

impl From<RegionCode> for u8 {
    fn from(r: RegionCode) -> u8 {
        r.0
    }
}

impl fmt::Display for RegionCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// The six species groups of the stranding dataset. `BI` holds penguins only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SpeciesGroup {
    BI,
    PI,
    CE,
    MU,
    QU,
    UND,
}

impl SpeciesGroup {
    pub const ALL: [SpeciesGroup; 6] = [
        SpeciesGroup::BI,
        SpeciesGroup::PI,
        SpeciesGroup::CE,
        SpeciesGroup::MU,
        SpeciesGroup::QU,
        SpeciesGroup::UND,
    ];

    /// Baseline group of the design matrix.
    pub const BASELINE: SpeciesGroup = SpeciesGroup::BI;

    pub fn code(self) -> &'static str {
        match self {
            SpeciesGroup::BI => "BI",
            SpeciesGroup::PI => "PI",
            SpeciesGroup::CE => "CE",
            SpeciesGroup::MU => "MU",
            SpeciesGroup::QU => "QU",
            SpeciesGroup::UND => "UND",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            SpeciesGroup::BI => "Birds (penguins)",
            SpeciesGroup::PI => "Pinnipeds",
            SpeciesGroup::CE => "Cetaceans",
            SpeciesGroup::MU => "Mustelids",
            SpeciesGroup::QU => "Chelonians",
            SpeciesGroup::UND => "Undefined",
        }
    }

    pub fn ordinal(self) -> usize {
        self as usize
    }

    /// Lenient parse used by ingestion: codes, English or Spanish group names.
    /// Blank or unrecognised input maps to `UND`.
    pub fn parse_lenient(raw: &str) -> SpeciesGroup {
        raw.parse().unwrap_or(SpeciesGroup::UND)
    }
}

impl FromStr for SpeciesGroup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_lowercase();
        let group = match key.as_str() {
            "bi" | "birds" | "bird" | "aves" | "ave" | "penguins" | "pinguinos" | "pingüinos" => {
                SpeciesGroup::BI
            }
            "pi" | "pinnipeds" | "pinniped" | "pinnipedos" | "pinnípedos" => SpeciesGroup::PI,
            "ce" | "cetaceans" | "cetacean" | "cetaceos" | "cetáceos" => SpeciesGroup::CE,
            "mu" | "mustelids" | "mustelid" | "mustelidos" | "mustélidos" => SpeciesGroup::MU,
            "qu" | "chelonians" | "chelonian" | "quelonios" | "turtles" | "tortugas" => {
                SpeciesGroup::QU
            }
            "und" | "undefined" | "indeterminado" => SpeciesGroup::UND,
            _ => return Err(Error::Coding(format!("unknown species group `{s}`"))),
        };
        Ok(group)
    }
}

impl fmt::Display for SpeciesGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Male,
    Female,
    Unknown,
}

impl Gender {
    pub const ALL: [Gender; 3] = [Gender::Male, Gender::Female, Gender::Unknown];

    pub fn parse_lenient(raw: &str) -> Gender {
        match raw.trim().to_lowercase().as_str() {
            "male" | "m" | "macho" => Gender::Male,
            "female" | "f" | "h" | "hembra" => Gender::Female,
            _ => Gender::Unknown,
        }
    }

    pub fn ordinal(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgeClass {
    Adult,
    Juvenile,
    Unknown,
}

impl AgeClass {
    pub const ALL: [AgeClass; 3] = [AgeClass::Adult, AgeClass::Juvenile, AgeClass::Unknown];

    pub fn parse_lenient(raw: &str) -> AgeClass {
        match raw.trim().to_lowercase().as_str() {
            "adult" | "adulto" | "adulta" | "a" => AgeClass::Adult,
            "juvenile" | "juvenil" | "subadulto" | "subadult" | "cria" | "cría" | "pup" | "j" => {
                AgeClass::Juvenile
            }
            _ => AgeClass::Unknown,
        }
    }

    pub fn ordinal(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VitalCondition {
    Dead,
    Alive,
    Unknown,
}

impl VitalCondition {
    pub fn parse_lenient(raw: &str) -> VitalCondition {
        match raw.trim().to_lowercase().as_str() {
            "dead" | "muerto" | "muerta" | "varado muerto" => VitalCondition::Dead,
            "alive" | "vivo" | "viva" | "varado vivo" => VitalCondition::Alive,
            _ => VitalCondition::Unknown,
        }
    }
}

/// One validated row of the stranding dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveillanceRecord {
    pub region: RegionCode,
    pub latitude: f64,
    pub longitude: f64,
    pub sample_time: NaiveDate,
    pub species_group: SpeciesGroup,
    pub species_name: String,
    pub gender: Gender,
    pub age: AgeClass,
    pub vital_condition: VitalCondition,
    /// Animals covered by this sighting event (the RECORD (n) column).
    pub count: u32,
    /// Remaining free-text columns keyed by canonical field name.
    pub passthrough: BTreeMap<String, String>,
}

impl SurveillanceRecord {
    /// Minimal record, mostly for tests and fixtures.
    pub fn new(
        region: RegionCode,
        latitude: f64,
        longitude: f64,
        sample_time: NaiveDate,
        species_group: SpeciesGroup,
        count: u32,
    ) -> Self {
        SurveillanceRecord {
            region,
            latitude,
            longitude,
            sample_time,
            species_group,
            species_name: String::new(),
            gender: Gender::Unknown,
            age: AgeClass::Unknown,
            vital_condition: VitalCondition::Unknown,
            count,
            passthrough: BTreeMap::new(),
        }
    }
}

pub fn in_bounding_box(latitude: f64, longitude: f64) -> bool {
    (LATITUDE_RANGE.0..=LATITUDE_RANGE.1).contains(&latitude)
        && (LONGITUDE_RANGE.0..=LONGITUDE_RANGE.1).contains(&longitude)
}
