//! Canonical metering units.
//!
//! Providers quote prices in whatever units suit them; the registry
//! converts everything to one canonical unit per resource family at intake
//! so offers compare directly:
//!
//! - compute time: `cpu-hour`
//! - memory and storage occupancy: `gb-month`
//! - network transfer: `gb-transfer`
//! - database requests: `k-requests`

/// Decimal gigabytes per binary gibibyte.
pub const GB_PER_GIB: f64 = 1.073741824;

/// Billing hours per month used by the hourly-to-monthly conversion.
pub const HOURS_PER_MONTH: f64 = 730.0;

/// Maps an intake unit to its canonical unit and the factor the quoted
/// per-unit price is multiplied by. Unknown units are rejected.
pub fn normalize_unit(unit: &str) -> Option<(&'static str, f64)> {
    match unit {
        "cpu-hour" => Some(("cpu-hour", 1.0)),
        "gb-month" => Some(("gb-month", 1.0)),
        "gib-month" => Some(("gb-month", 1.0 / GB_PER_GIB)),
        "gb-hour" => Some(("gb-month", HOURS_PER_MONTH)),
        "gib-hour" => Some(("gb-month", HOURS_PER_MONTH / GB_PER_GIB)),
        "gb-transfer" => Some(("gb-transfer", 1.0)),
        "gib-transfer" => Some(("gb-transfer", 1.0 / GB_PER_GIB)),
        "k-requests" => Some(("k-requests", 1.0)),
        "requests" => Some(("k-requests", 1000.0)),
        _ => None,
    }
}
