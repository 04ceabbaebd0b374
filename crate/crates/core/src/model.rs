//! Shared domain types: identifiers, time intervals, service and resource
//! properties, and the property validation used across the platform.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

pub const MS_PER_SECOND: u64 = 1_000;
pub const MS_PER_HOUR: u64 = 3_600_000;

/// A simulated instant, in milliseconds since scenario start.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
pub struct TimeMs(pub u64);

impl TimeMs {
    pub fn from_secs(s: f64) -> Self {
        TimeMs((s * MS_PER_SECOND as f64).round() as u64)
    }

    pub fn from_hours(h: f64) -> Self {
        TimeMs((h * MS_PER_HOUR as f64).round() as u64)
    }

    pub fn as_secs(self) -> f64 {
        self.0 as f64 / MS_PER_SECOND as f64
    }

    pub fn saturating_sub(self, other: TimeMs) -> u64 {
        self.0.saturating_sub(other.0)
    }
}

impl fmt::Display for TimeMs {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Renders a simulated instant as a wall-clock string for trace output.
///
/// The epoch is fixed at 2011-03-16 15:21:23; simulation timestamps are
/// offsets from it. Only traces use this rendering, all computation stays
/// on integer milliseconds.
pub fn wall_clock(t: TimeMs) -> String {
    const DAYS_IN_MONTH: [u64; 12] = [31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31];
    fn leap(y: u64) -> bool {
        (y % 4 == 0 && y % 100 != 0) || y % 400 == 0
    }
    // epoch: 2011-03-16 15:21:23
    let mut secs = t.0 / MS_PER_SECOND + 23 + 21 * 60 + 15 * 3600;
    let mut day = 16u64;
    let mut month = 3u64;
    let mut year = 2011u64;
    let mut days = secs / 86_400;
    secs %= 86_400;
    while days > 0 {
        let dim = if month == 2 && leap(year) {
            29
        } else {
            DAYS_IN_MONTH[(month - 1) as usize]
        };
        if day < dim {
            day += 1;
        } else {
            day = 1;
            month += 1;
            if month > 12 {
                month = 1;
                year += 1;
            }
        }
        days -= 1;
    }
    format!(
        "{:04}-{:02}-{:02} {:02}:{:02}:{:02}",
        year,
        month,
        day,
        secs / 3600,
        (secs % 3600) / 60,
        secs % 60
    )
}

/// A half-open span of simulated time `[start, end)`.
///
/// The empty interval has the single canonical form `[0, 0)` so that equality
/// works structurally.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TimeInterval {
    start: TimeMs,
    end: TimeMs,
}

impl TimeInterval {
    pub const EMPTY: TimeInterval = TimeInterval {
        start: TimeMs(0),
        end: TimeMs(0),
    };

    /// Builds a canonical interval; any degenerate span collapses to EMPTY.
    pub fn new(start: TimeMs, end: TimeMs) -> Self {
        if start >= end {
            Self::EMPTY
        } else {
            TimeInterval { start, end }
        }
    }

    pub fn from_hours(start_h: f64, end_h: f64) -> Self {
        Self::new(TimeMs::from_hours(start_h), TimeMs::from_hours(end_h))
    }

    pub fn start(&self) -> TimeMs {
        self.start
    }

    pub fn end(&self) -> TimeMs {
        self.end
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    /// True when the interval is either EMPTY or a forward, non-degenerate span.
    pub fn is_canonical(&self) -> bool {
        *self == Self::EMPTY || self.start < self.end
    }

    pub fn contains(&self, t: TimeMs) -> bool {
        self.start <= t && t < self.end
    }

    pub fn is_subset_of(&self, other: &TimeInterval) -> bool {
        self.is_empty() || (other.start <= self.start && self.end <= other.end)
    }

    /// Set intersection of two canonical intervals.
    pub fn intersect(&self, other: &TimeInterval) -> TimeInterval {
        if self.is_empty() || other.is_empty() {
            return Self::EMPTY;
        }
        TimeInterval::new(self.start.max(other.start), self.end.min(other.end))
    }
}

impl fmt::Display for TimeInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            write!(f, "[empty)")
        } else {
            write!(f, "[{}ms, {}ms)", self.start.0, self.end.0)
        }
    }
}

/// interval_intersect as a free function, mirroring the operation vocabulary.
pub fn interval_intersect(a: &TimeInterval, b: &TimeInterval) -> TimeInterval {
    a.intersect(b)
}

#[derive(
    Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct PrincipalId(pub String);

impl PrincipalId {
    pub fn new(s: impl Into<String>) -> Self {
        PrincipalId(s.into())
    }
}

impl fmt::Display for PrincipalId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ServiceKind {
    Data,
    Software,
    Composite,
}

impl fmt::Display for ServiceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ServiceKind::Data => write!(f, "data"),
            ServiceKind::Software => write!(f, "software"),
            ServiceKind::Composite => write!(f, "composite"),
        }
    }
}

/// Unique symbolic identifier of a service on the platform.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ServiceId {
    pub name: String,
    pub kind: ServiceKind,
}

impl ServiceId {
    pub fn new(name: impl Into<String>, kind: ServiceKind) -> Self {
        ServiceId {
            name: name.into(),
            kind,
        }
    }
}

impl fmt::Display for ServiceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.name, self.kind)
    }
}

/// Response-time interval in milliseconds, `lo <= hi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerfInterval {
    pub lo_ms: u64,
    pub hi_ms: u64,
}

impl PerfInterval {
    pub fn new(lo_ms: u64, hi_ms: u64) -> Self {
        PerfInterval { lo_ms, hi_ms }
    }

    /// Element-wise sum, used when chaining services serially.
    pub fn serial_sum(&self, other: &PerfInterval) -> PerfInterval {
        PerfInterval {
            lo_ms: self.lo_ms + other.lo_ms,
            hi_ms: self.hi_ms + other.hi_ms,
        }
    }
}

/// The quality and stewardship properties every published service carries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceProperties {
    pub identifier: ServiceId,
    pub ownership: PrincipalId,
    pub usufruct: BTreeSet<PrincipalId>,
    pub management: PrincipalId,
    pub availability: TimeInterval,
    pub performance: PerfInterval,
    /// Max concurrent invocations the service commits to support.
    pub scalability: u32,
    /// Per-invocation cost in abstract currency units.
    pub price: f64,
}

/// One violated field constraint found by [`validate_properties`].
#[derive(Debug, Clone, PartialEq)]
pub enum PropertyViolation {
    EmptyName,
    PerformanceInverted { lo_ms: u64, hi_ms: u64 },
    ZeroScalability,
    NegativePrice(f64),
    NonCanonicalAvailability,
}

impl fmt::Display for PropertyViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PropertyViolation::EmptyName => write!(f, "empty identifier name"),
            PropertyViolation::PerformanceInverted { lo_ms, hi_ms } => {
                write!(f, "performance.lo > hi ({lo_ms}ms > {hi_ms}ms)")
            }
            PropertyViolation::ZeroScalability => write!(f, "scalability must be >= 1"),
            PropertyViolation::NegativePrice(p) => write!(f, "negative price ({p})"),
            PropertyViolation::NonCanonicalAvailability => {
                write!(f, "availability interval not canonical")
            }
        }
    }
}

/// Every violated invariant of a property set; empty iff valid.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidityReport {
    pub violations: Vec<PropertyViolation>,
}

impl ValidityReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn validate_properties(p: &ServiceProperties) -> ValidityReport {
    let mut violations = Vec::new();
    if p.identifier.name.is_empty() {
        violations.push(PropertyViolation::EmptyName);
    }
    if p.performance.lo_ms > p.performance.hi_ms {
        violations.push(PropertyViolation::PerformanceInverted {
            lo_ms: p.performance.lo_ms,
            hi_ms: p.performance.hi_ms,
        });
    }
    if p.scalability == 0 {
        violations.push(PropertyViolation::ZeroScalability);
    }
    if p.price < 0.0 {
        violations.push(PropertyViolation::NegativePrice(p.price));
    }
    if !p.availability.is_canonical() {
        violations.push(PropertyViolation::NonCanonicalAvailability);
    }
    ValidityReport { violations }
}

/// Requested or delivered capacity vector. Symbolic dimensions (os, db) act
/// as hard filters during matching; numeric dimensions enter the weighted
/// distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourceTemplate {
    pub cpu_ghz: f64,
    pub cpu_cores: u32,
    pub memory_gb: f64,
    pub disk_gb: f64,
    #[serde(default)]
    pub os: SymbolicReq,
    #[serde(default)]
    pub db: SymbolicReq,
    #[serde(default)]
    pub weights: DimensionWeights,
}

impl ResourceTemplate {
    pub fn new(cpu_ghz: f64, cpu_cores: u32, memory_gb: f64, disk_gb: f64) -> Self {
        ResourceTemplate {
            cpu_ghz,
            cpu_cores,
            memory_gb,
            disk_gb,
            os: SymbolicReq::Any,
            db: SymbolicReq::Any,
            weights: DimensionWeights::default(),
        }
    }

    pub fn with_os(mut self, os: impl Into<String>) -> Self {
        self.os = SymbolicReq::Exact(os.into());
        self
    }

    pub fn with_db(mut self, db: impl Into<String>) -> Self {
        self.db = SymbolicReq::Exact(db.into());
        self
    }

    pub fn with_weights(mut self, weights: DimensionWeights) -> Self {
        self.weights = weights;
        self
    }

    /// CPU work units per second this capacity provides.
    pub fn cpu_capacity(&self) -> f64 {
        self.cpu_ghz * self.cpu_cores as f64
    }

    pub fn dimensions_positive(&self) -> bool {
        self.cpu_ghz > 0.0 && self.cpu_cores >= 1 && self.memory_gb > 0.0 && self.disk_gb > 0.0
    }
}

/// A symbolic requirement: either a wildcard or an exact label.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum SymbolicReq {
    #[default]
    Any,
    Exact(String),
}

impl SymbolicReq {
    pub fn accepts(&self, label: &str) -> bool {
        match self {
            SymbolicReq::Any => true,
            SymbolicReq::Exact(want) => want == label,
        }
    }
}

impl fmt::Display for SymbolicReq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SymbolicReq::Any => write!(f, "*"),
            SymbolicReq::Exact(s) => write!(f, "{s}"),
        }
    }
}

impl Serialize for SymbolicReq {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for SymbolicReq {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Ok(if s == "*" {
            SymbolicReq::Any
        } else {
            SymbolicReq::Exact(s)
        })
    }
}

/// Per-numeric-dimension matching weights; unit-free after normalization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimensionWeights {
    pub cpu_ghz: f64,
    pub cpu_cores: f64,
    pub memory_gb: f64,
    pub disk_gb: f64,
}

impl Default for DimensionWeights {
    fn default() -> Self {
        DimensionWeights {
            cpu_ghz: 1.0,
            cpu_cores: 1.0,
            memory_gb: 1.0,
            disk_gb: 1.0,
        }
    }
}

impl DimensionWeights {
    pub fn as_array(&self) -> [f64; 4] {
        [self.cpu_ghz, self.cpu_cores, self.memory_gb, self.disk_gb]
    }

    pub fn all_non_negative(&self) -> bool {
        self.as_array().iter().all(|w| *w >= 0.0)
    }

    pub fn any_positive(&self) -> bool {
        self.as_array().iter().any(|w| *w > 0.0)
    }
}

/// Properties of a delivered resource instance. The provider keeps ownership;
/// the subscriber only holds usufruct and lifecycle management.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourceInstanceProperties {
    /// Endpoint the instance answers at.
    pub identifier: String,
    pub ownership: PrincipalId,
    pub usufruct: PrincipalId,
    pub management: PrincipalId,
    pub availability: TimeInterval,
    /// All simulated instances can exchange data; required by the platform.
    pub connectivity: bool,
    pub capacity: ResourceTemplate,
    /// Rental cost per hour.
    pub price_per_hour: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn h(x: f64) -> TimeMs {
        TimeMs::from_hours(x)
    }

    #[test]
    fn intersect_overlapping() {
        let a = TimeInterval::from_hours(8.0, 20.0);
        let b = TimeInterval::from_hours(12.0, 24.0);
        assert_eq!(a.intersect(&b), TimeInterval::from_hours(12.0, 20.0));
    }

    #[test]
    fn intersect_disjoint_is_canonical_empty() {
        let a = TimeInterval::from_hours(0.0, 5.0);
        let b = TimeInterval::from_hours(6.0, 9.0);
        assert_eq!(a.intersect(&b), TimeInterval::EMPTY);
    }

    #[test]
    fn intersect_identity() {
        let a = TimeInterval::from_hours(3.0, 7.0);
        assert_eq!(a.intersect(&a), a);
    }

    #[test]
    fn degenerate_construction_collapses_to_empty() {
        assert_eq!(TimeInterval::new(h(5.0), h(5.0)), TimeInterval::EMPTY);
        assert_eq!(TimeInterval::new(h(9.0), h(2.0)), TimeInterval::EMPTY);
    }

    #[test]
    fn wall_clock_epoch_and_rollover() {
        assert_eq!(wall_clock(TimeMs(0)), "2011-03-16 15:21:23");
        assert_eq!(wall_clock(TimeMs(60_000)), "2011-03-16 15:22:23");
        // 9h later rolls past midnight
        assert_eq!(wall_clock(TimeMs::from_hours(9.0)), "2011-03-17 00:21:23");
    }

    fn sample_properties() -> ServiceProperties {
        ServiceProperties {
            identifier: ServiceId::new("orders", ServiceKind::Software),
            ownership: PrincipalId::new("vendor-a"),
            usufruct: BTreeSet::new(),
            management: PrincipalId::new("operator"),
            availability: TimeInterval::from_hours(0.0, 24.0),
            performance: PerfInterval::new(3_000, 5_000),
            scalability: 10,
            price: 0.05,
        }
    }

    #[test]
    fn validate_accepts_table_example() {
        let report = validate_properties(&sample_properties());
        assert!(report.is_valid(), "unexpected: {:?}", report.violations);
    }

    #[test]
    fn validate_rejects_inverted_performance() {
        let mut p = sample_properties();
        p.performance = PerfInterval::new(5_000, 3_000);
        let report = validate_properties(&p);
        assert_eq!(
            report.violations,
            vec![PropertyViolation::PerformanceInverted {
                lo_ms: 5_000,
                hi_ms: 3_000
            }]
        );
    }

    #[test]
    fn validate_rejects_negative_price() {
        let mut p = sample_properties();
        p.price = -1.0;
        let report = validate_properties(&p);
        assert_eq!(report.violations, vec![PropertyViolation::NegativePrice(-1.0)]);
    }

    #[test]
    fn validate_lists_every_violation() {
        let mut p = sample_properties();
        p.identifier.name.clear();
        p.scalability = 0;
        p.price = -2.5;
        let report = validate_properties(&p);
        assert_eq!(report.violations.len(), 3);
    }

    prop_compose! {
        fn arb_interval()(start in 0u64..1_000, len in 0u64..1_000) -> TimeInterval {
            TimeInterval::new(TimeMs(start), TimeMs(start + len))
        }
    }

    proptest! {
        #[test]
        fn intersect_commutative(a in arb_interval(), b in arb_interval()) {
            prop_assert_eq!(a.intersect(&b), b.intersect(&a));
        }

        #[test]
        fn intersect_associative(a in arb_interval(), b in arb_interval(), c in arb_interval()) {
            prop_assert_eq!(a.intersect(&b).intersect(&c), a.intersect(&b.intersect(&c)));
        }

        #[test]
        fn intersect_idempotent(a in arb_interval()) {
            prop_assert_eq!(a.intersect(&a), a);
        }

        #[test]
        fn intersect_result_contained_in_both(a in arb_interval(), b in arb_interval()) {
            let r = a.intersect(&b);
            prop_assert!(r.is_subset_of(&a));
            prop_assert!(r.is_subset_of(&b));
        }

        #[test]
        fn intersect_always_canonical(a in arb_interval(), b in arb_interval()) {
            prop_assert!(a.intersect(&b).is_canonical());
        }
    }
}
