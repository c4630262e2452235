//! Ingestion of stranding records and the descriptive tables built from them.

mod design;
mod panel;
mod parse;
mod record;
mod summary;

pub use design::{build_design, DesignColumn, DesignMatrix};
pub use panel::{
    aggregate_weekly, week_month_map, PanelEntry, Visit, WeeklyPanel, PANEL_GROUPS,
    PANEL_REGIONS, PANEL_WEEKS,
};
pub use parse::{
    decode_text, normalize_header, parse_csv, parse_csv_str, parse_date, ColumnMap, Field,
    ParseOutcome, RejectReason, RejectedRow,
};
pub use record::{
    in_bounding_box, AgeClass, Gender, RegionCode, SpeciesGroup, SurveillanceRecord,
    VitalCondition, LATITUDE_RANGE, LONGITUDE_RANGE,
};
pub use summary::{
    cumulative_series, group_summary, DatasetSummary, SummaryBy, quantile_type7, region_summary, species_ranking,
    CumulativeSeries, GroupSummaryRow, RegionSummaryRow, SeriesFilter, SpeciesTotal,
    UNDEFINED_SPECIES,
};
