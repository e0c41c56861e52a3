//! Transaction record parsing, validation, and aggregation into daily series.
//!
//! The input format is a CSV with header
//! `date,region,zip,channel,category,income_band,gender,tx_count,amount`
//! (an optional trailing `premises` column is accepted). Lines starting with
//! `#` are treated as comments. A day with no matching records is an observed
//! zero, not a gap; days entirely absent from a file are surfaced separately
//! as coverage warnings.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::{Read, Write};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::series::{Calendar, DailySeries, SeriesError, SeriesUnit};

/// Category string carried by ATM rows, which have no merchant category.
pub const ATM_CATEGORY: &str = "-";

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("failed to read transactions: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("{} invalid row(s):\n{}", .0.len(), format_rows(.0))]
    Rows(Vec<RowError>),
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error("series '{id}' has non-positive median over the window: degenerate series")]
    DegenerateSeries { id: String },
    #[error("normalization window {lo}..{hi} outside series of length {len}")]
    WindowOutOfRange { lo: usize, hi: usize, len: usize },
}

/// A single rejected input row.
#[derive(Debug, Clone)]
pub struct RowError {
    pub line: u64,
    pub reason: String,
}

fn format_rows(rows: &[RowError]) -> String {
    rows.iter()
        .map(|r| format!("  line {}: {}", r.line, r.reason))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Transaction channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Channel {
    #[serde(rename = "ATM")]
    Atm,
    #[serde(rename = "POS")]
    Pos,
}

impl Channel {
    pub fn as_str(self) -> &'static str {
        match self {
            Channel::Atm => "ATM",
            Channel::Pos => "POS",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "ATM" => Some(Channel::Atm),
            "POS" => Some(Channel::Pos),
            _ => None,
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Cardholder yearly-income band.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IncomeBand {
    Low,
    Medium,
    High,
}

impl IncomeBand {
    pub const ALL: [IncomeBand; 3] = [IncomeBand::Low, IncomeBand::Medium, IncomeBand::High];

    pub fn as_str(self) -> &'static str {
        match self {
            IncomeBand::Low => "low",
            IncomeBand::Medium => "medium",
            IncomeBand::High => "high",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "low" => Some(IncomeBand::Low),
            "medium" => Some(IncomeBand::Medium),
            "high" => Some(IncomeBand::High),
            _ => None,
        }
    }
}

impl fmt::Display for IncomeBand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Cardholder gender as recorded in the aggregates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Gender {
    F,
    M,
    #[serde(rename = "unknown")]
    Unknown,
}

impl Gender {
    pub fn as_str(self) -> &'static str {
        match self {
            Gender::F => "F",
            Gender::M => "M",
            Gender::Unknown => "unknown",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "F" => Some(Gender::F),
            "M" => Some(Gender::M),
            "unknown" => Some(Gender::Unknown),
            _ => None,
        }
    }
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One daily aggregate cell: counts and amounts for a full dimension key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransactionAggregate {
    pub date: NaiveDate,
    pub region: String,
    pub zip: String,
    pub channel: Channel,
    pub category: String,
    pub income_band: IncomeBand,
    pub gender: Gender,
    pub tx_count: u64,
    pub amount: f64,
    /// Optional explicit commercial-premises count (extra CSV column).
    pub premises: Option<u32>,
}

/// Dimensions a series can be grouped or filtered by, in canonical label
/// order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupKey {
    Region,
    Zip,
    Channel,
    Category,
    IncomeBand,
    Gender,
}

impl GroupKey {
    pub const ALL: [GroupKey; 6] = [
        GroupKey::Region,
        GroupKey::Zip,
        GroupKey::Channel,
        GroupKey::Category,
        GroupKey::IncomeBand,
        GroupKey::Gender,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            GroupKey::Region => "region",
            GroupKey::Zip => "zip",
            GroupKey::Channel => "channel",
            GroupKey::Category => "category",
            GroupKey::IncomeBand => "income_band",
            GroupKey::Gender => "gender",
        }
    }
}

/// Equality predicates over record dimensions; `None` means no constraint.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GroupFilter {
    pub region: Option<String>,
    pub zip: Option<String>,
    pub channel: Option<Channel>,
    pub category: Option<String>,
    pub income_band: Option<IncomeBand>,
    pub gender: Option<Gender>,
}

impl GroupFilter {
    pub fn matches(&self, r: &TransactionAggregate) -> bool {
        self.region.as_ref().is_none_or(|v| *v == r.region)
            && self.zip.as_ref().is_none_or(|v| *v == r.zip)
            && self.channel.is_none_or(|v| v == r.channel)
            && self.category.as_ref().is_none_or(|v| *v == r.category)
            && self.income_band.is_none_or(|v| v == r.income_band)
            && self.gender.is_none_or(|v| v == r.gender)
    }

    fn constrains(&self, key: GroupKey) -> bool {
        match key {
            GroupKey::Region => self.region.is_some(),
            GroupKey::Zip => self.zip.is_some(),
            GroupKey::Channel => self.channel.is_some(),
            GroupKey::Category => self.category.is_some(),
            GroupKey::IncomeBand => self.income_band.is_some(),
            GroupKey::Gender => self.gender.is_some(),
        }
    }
}

/// Which dimensions to group by, plus an optional row filter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSpec {
    pub keys: BTreeSet<GroupKey>,
    #[serde(default)]
    pub filter: GroupFilter,
}

impl GroupSpec {
    /// Groups by `keys` with no filter.
    pub fn by(keys: impl IntoIterator<Item = GroupKey>) -> Self {
        Self { keys: keys.into_iter().collect(), filter: GroupFilter::default() }
    }

    pub fn with_filter(mut self, filter: GroupFilter) -> Self {
        self.filter = filter;
        self
    }

    /// A grouped dimension may also be filtered only if the filter pins it to
    /// a constant (which is always the case for equality filters), so the
    /// only structural requirement is a non-empty key set.
    pub fn validate(&self) -> Result<(), IngestError> {
        if self.keys.is_empty() {
            return Err(IngestError::Rows(vec![RowError {
                line: 0,
                reason: "group spec has no keys".into(),
            }]));
        }
        Ok(())
    }

    /// Renders the group label for a record, keys in canonical order.
    pub fn label_for(&self, r: &TransactionAggregate) -> String {
        let mut parts = Vec::with_capacity(self.keys.len());
        for key in GroupKey::ALL {
            if !self.keys.contains(&key) {
                continue;
            }
            let value = match key {
                GroupKey::Region => r.region.clone(),
                GroupKey::Zip => r.zip.clone(),
                GroupKey::Channel => r.channel.to_string(),
                GroupKey::Category => r.category.clone(),
                GroupKey::IncomeBand => r.income_band.to_string(),
                GroupKey::Gender => r.gender.to_string(),
            };
            parts.push(format!("{}={}", key.as_str(), value));
        }
        parts.join("|")
    }

    /// Canonical label for the filtered-but-ungrouped dimensions, used to
    /// annotate outputs.
    pub fn filter_label(&self) -> String {
        let mut parts = Vec::new();
        for key in GroupKey::ALL {
            if self.keys.contains(&key) || !self.filter.constrains(key) {
                continue;
            }
            let value = match key {
                GroupKey::Region => self.filter.region.clone().unwrap(),
                GroupKey::Zip => self.filter.zip.clone().unwrap(),
                GroupKey::Channel => self.filter.channel.unwrap().to_string(),
                GroupKey::Category => self.filter.category.clone().unwrap(),
                GroupKey::IncomeBand => self.filter.income_band.unwrap().to_string(),
                GroupKey::Gender => self.filter.gender.unwrap().to_string(),
            };
            parts.push(format!("{}={}", key.as_str(), value));
        }
        parts.join("|")
    }
}

/// Which measure of a cell to aggregate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    Count,
    Amount,
}

impl Measure {
    fn of(self, r: &TransactionAggregate) -> f64 {
        match self {
            Measure::Count => r.tx_count as f64,
            Measure::Amount => r.amount,
        }
    }

    pub fn unit(self) -> SeriesUnit {
        match self {
            Measure::Count => SeriesUnit::Count,
            Measure::Amount => SeriesUnit::Amount,
        }
    }
}

const HEADER: [&str; 9] = [
    "date", "region", "zip", "channel", "category", "income_band", "gender", "tx_count", "amount",
];

/// Parses and validates a transactions CSV. Every invalid row is collected
/// and reported together; a clean file yields the full record list.
pub fn parse_transactions<R: Read>(input: R) -> Result<Vec<TransactionAggregate>, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .flexible(true)
        .from_reader(input);

    {
        let headers = reader.headers()?;
        let got: Vec<&str> = headers.iter().collect();
        let with_premises: Vec<&str> =
            HEADER.iter().copied().chain(std::iter::once("premises")).collect();
        if got != HEADER && got != with_premises {
            return Err(IngestError::Rows(vec![RowError {
                line: 1,
                reason: format!(
                    "unexpected header: got [{}], want [{}]",
                    got.join(","),
                    HEADER.join(",")
                ),
            }]));
        }
    }

    let mut records = Vec::new();
    let mut errors = Vec::new();
    // all-dimension key -> line number of first occurrence
    let mut seen: HashMap<(NaiveDate, String, String, Channel, String, IncomeBand, Gender), u64> =
        HashMap::new();

    for row in reader.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        match parse_row(&row) {
            Ok(rec) => {
                let key = (
                    rec.date,
                    rec.region.clone(),
                    rec.zip.clone(),
                    rec.channel,
                    rec.category.clone(),
                    rec.income_band,
                    rec.gender,
                );
                match seen.get(&key) {
                    Some(first) => errors.push(RowError {
                        line,
                        reason: format!(
                            "duplicate cell (same date/region/zip/channel/category/income_band/gender) as line {first}"
                        ),
                    }),
                    None => {
                        seen.insert(key, line);
                        records.push(rec);
                    }
                }
            }
            Err(reason) => errors.push(RowError { line, reason }),
        }
    }

    if errors.is_empty() {
        Ok(records)
    } else {
        Err(IngestError::Rows(errors))
    }
}

fn parse_row(row: &csv::StringRecord) -> Result<TransactionAggregate, String> {
    if row.len() != 9 && row.len() != 10 {
        return Err(format!("expected 9 or 10 fields, got {}", row.len()));
    }
    let field = |i: usize| row.get(i).unwrap_or("");

    let date: NaiveDate = field(0)
        .parse()
        .map_err(|_| format!("bad date '{}' (want YYYY-MM-DD)", field(0)))?;
    let region = field(1).to_string();
    if region.is_empty() {
        return Err("empty region".into());
    }
    let zip = field(2).to_string();
    if zip.is_empty() {
        return Err("empty zip".into());
    }
    let channel =
        Channel::parse(field(3)).ok_or_else(|| format!("unknown channel '{}'", field(3)))?;
    let category = field(4).to_string();
    if category.is_empty() {
        return Err("empty category".into());
    }
    if channel == Channel::Atm && category != ATM_CATEGORY {
        return Err(format!("ATM row must use category '{ATM_CATEGORY}', got '{category}'"));
    }
    if channel == Channel::Pos && category == ATM_CATEGORY {
        return Err("POS row must carry a merchant category".into());
    }
    let income_band = IncomeBand::parse(field(5))
        .ok_or_else(|| format!("unknown income_band '{}'", field(5)))?;
    let gender = Gender::parse(field(6)).ok_or_else(|| format!("unknown gender '{}'", field(6)))?;
    let tx_count: i64 = field(7)
        .parse()
        .map_err(|_| format!("bad tx_count '{}'", field(7)))?;
    if tx_count < 0 {
        return Err("negative count".into());
    }
    let amount: f64 = field(8)
        .parse()
        .map_err(|_| format!("bad amount '{}'", field(8)))?;
    if !amount.is_finite() {
        return Err(format!("non-finite amount '{}'", field(8)));
    }
    if amount < 0.0 {
        return Err("negative amount".into());
    }
    if tx_count == 0 && amount != 0.0 {
        return Err(format!("zero tx_count with non-zero amount {amount}"));
    }
    let premises = match row.get(9) {
        Some(p) if !p.is_empty() => {
            Some(p.parse::<u32>().map_err(|_| format!("bad premises '{p}'"))?)
        }
        _ => None,
    };

    Ok(TransactionAggregate {
        date,
        region,
        zip,
        channel,
        category,
        income_band,
        gender,
        tx_count,
        amount: amount_normalized(tx_count, amount),
        premises,
    })
}

fn amount_normalized(tx_count: i64, amount: f64) -> f64 {
    // tx_count = 0 implies amount = 0 was already enforced; keep -0.0 out.
    if tx_count == 0 {
        0.0
    } else {
        amount
    }
}

/// Writes records back out in the canonical CSV schema. `header_comment`
/// lines (without the leading `#`) are emitted before the header.
pub fn write_transactions<W: Write>(
    out: W,
    records: &[TransactionAggregate],
    header_comments: &[String],
) -> Result<(), IngestError> {
    let mut out = out;
    for line in header_comments {
        writeln!(out, "# {line}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    for r in records {
        w.write_record(&[
            r.date.to_string(),
            r.region.clone(),
            r.zip.clone(),
            r.channel.to_string(),
            r.category.clone(),
            r.income_band.to_string(),
            r.gender.to_string(),
            r.tx_count.to_string(),
            format_amount(r.amount),
        ])?;
    }
    w.flush().map_err(IngestError::Io)?;
    Ok(())
}

/// Fixed-precision amount rendering so emitted files are byte-stable.
pub fn format_amount(v: f64) -> String {
    format!("{v:.2}")
}

/// Sums `measure` per group and day over the calendar. Days with no matching
/// records are zero; groups are keyed by their canonical labels.
pub fn aggregate_series(
    records: &[TransactionAggregate],
    spec: &GroupSpec,
    measure: Measure,
    calendar: &Calendar,
) -> Result<BTreeMap<String, DailySeries>, IngestError> {
    spec.validate()?;
    let mut buckets: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for r in records {
        if !spec.filter.matches(r) {
            continue;
        }
        let Some(day) = calendar.index_of(r.date) else {
            continue;
        };
        let label = spec.label_for(r);
        let values = buckets.entry(label).or_insert_with(|| vec![0.0; calendar.days]);
        values[day] += measure.of(r);
    }
    buckets
        .into_iter()
        .map(|(label, values)| {
            let series =
                DailySeries::new_measured(label.clone(), calendar.start, values, measure.unit())?;
            Ok((label, series))
        })
        .collect()
}

/// Calendar days with no records at all in the input (useful as a data
/// coverage warning; absent days are otherwise treated as observed zeros).
pub fn coverage_gaps(records: &[TransactionAggregate], calendar: &Calendar) -> Vec<NaiveDate> {
    let mut present = vec![false; calendar.days];
    for r in records {
        if let Some(i) = calendar.index_of(r.date) {
            present[i] = true;
        }
    }
    present
        .iter()
        .enumerate()
        .filter(|(_, p)| !**p)
        .map(|(i, _)| calendar.date_at(i))
        .collect()
}

/// Divides a series by its median over `window` (half-open index range).
/// The median over the window of the result is exactly 1.
pub fn normalize_by_median(
    series: &DailySeries,
    window: std::ops::Range<usize>,
) -> Result<DailySeries, IngestError> {
    if window.start >= window.end || window.end > series.len() {
        return Err(IngestError::WindowOutOfRange {
            lo: window.start,
            hi: window.end,
            len: series.len(),
        });
    }
    let med = median(&series.values[window]);
    if !(med > 0.0) {
        return Err(IngestError::DegenerateSeries { id: series.id.clone() });
    }
    let values = series.values.iter().map(|v| v / med).collect();
    Ok(DailySeries::new(series.id.clone(), series.start_date, values, SeriesUnit::Normalized)?)
}

/// Median with the even-length convention of averaging the two central order
/// statistics.
pub fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Activity thresholds a zip must clear to be included in spatial analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ZipActivityThresholds {
    /// Minimum commercial premises, proxied by distinct POS (zip, category)
    /// pairs unless the file carries an explicit premises column.
    pub min_premises: u32,
    /// Minimum number of days with any activity.
    pub min_active_days: u32,
    /// Minimum total transactions over the records' span.
    pub min_yearly_tx: u64,
}

impl Default for ZipActivityThresholds {
    fn default() -> Self {
        Self { min_premises: 3, min_active_days: 180, min_yearly_tx: 1000 }
    }
}

/// Returns the zips whose activity clears every threshold.
pub fn filter_active_zips(
    records: &[TransactionAggregate],
    thresholds: &ZipActivityThresholds,
) -> BTreeSet<String> {
    #[derive(Default)]
    struct Activity {
        categories: BTreeSet<String>,
        explicit_premises: u32,
        days: BTreeSet<NaiveDate>,
        tx: u64,
    }
    let mut per_zip: BTreeMap<&str, Activity> = BTreeMap::new();
    for r in records {
        let a = per_zip.entry(r.zip.as_str()).or_default();
        if r.channel == Channel::Pos {
            a.categories.insert(r.category.clone());
        }
        if let Some(p) = r.premises {
            a.explicit_premises = a.explicit_premises.max(p);
        }
        if r.tx_count > 0 {
            a.days.insert(r.date);
            a.tx += r.tx_count;
        }
    }
    per_zip
        .into_iter()
        .filter(|(_, a)| {
            let premises = (a.categories.len() as u32).max(a.explicit_premises);
            premises >= thresholds.min_premises
                && a.days.len() as u32 >= thresholds.min_active_days
                && a.tx >= thresholds.min_yearly_tx
        })
        .map(|(zip, _)| zip.to_string())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn day(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    const SAMPLE: &str = "\
date,region,zip,channel,category,income_band,gender,tx_count,amount
2014-09-13,BCS,23000,POS,food,low,F,12,3400.50
";

    #[test]
    fn parses_single_row() {
        let recs = parse_transactions(SAMPLE.as_bytes()).unwrap();
        assert_eq!(recs.len(), 1);
        let r = &recs[0];
        assert_eq!(r.date, day("2014-09-13"));
        assert_eq!(r.region, "BCS");
        assert_eq!(r.zip, "23000");
        assert_eq!(r.channel, Channel::Pos);
        assert_eq!(r.category, "food");
        assert_eq!(r.income_band, IncomeBand::Low);
        assert_eq!(r.gender, Gender::F);
        assert_eq!(r.tx_count, 12);
        assert_eq!(r.amount, 3400.50);
    }

    #[test]
    fn rejects_negative_count_with_line() {
        let input = "\
date,region,zip,channel,category,income_band,gender,tx_count,amount
2014-09-13,BCS,23000,POS,food,low,F,-3,10.0
";
        let err = parse_transactions(input.as_bytes()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 2"), "{msg}");
        assert!(msg.contains("negative count"), "{msg}");
    }

    #[test]
    fn rejects_duplicate_cells_naming_both_lines() {
        let input = "\
date,region,zip,channel,category,income_band,gender,tx_count,amount
2014-09-13,BCS,23000,POS,food,low,F,12,3400.50
2014-09-13,BCS,23000,POS,food,low,F,7,100.00
";
        let err = parse_transactions(input.as_bytes()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 3"), "{msg}");
        assert!(msg.contains("line 2"), "{msg}");
        assert!(msg.contains("duplicate"), "{msg}");
    }

    #[test]
    fn atm_rows_require_sentinel_category() {
        let input = "\
date,region,zip,channel,category,income_band,gender,tx_count,amount
2014-09-13,BCS,23000,ATM,food,low,F,12,3400.50
";
        let err = parse_transactions(input.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("ATM row"), "{err}");
    }

    #[test]
    fn zero_count_requires_zero_amount() {
        let input = "\
date,region,zip,channel,category,income_band,gender,tx_count,amount
2014-09-13,BCS,23000,POS,food,low,F,0,5.0
";
        let err = parse_transactions(input.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("zero tx_count"), "{err}");
    }

    #[test]
    fn unknown_enum_tokens_are_reported() {
        let input = "\
date,region,zip,channel,category,income_band,gender,tx_count,amount
2014-09-13,BCS,23000,CARD,food,low,F,1,5.0
2014-09-13,BCS,23000,POS,food,middle,F,1,5.0
";
        let err = parse_transactions(input.as_bytes()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("unknown channel 'CARD'"), "{msg}");
        assert!(msg.contains("unknown income_band 'middle'"), "{msg}");
    }

    #[test]
    fn comment_lines_are_skipped() {
        let input = format!("# rng: splitmix64-counter-v1 seed=42\n{SAMPLE}");
        let recs = parse_transactions(input.as_bytes()).unwrap();
        assert_eq!(recs.len(), 1);
    }

    fn rec(
        date: &str,
        region: &str,
        zip: &str,
        channel: Channel,
        category: &str,
        band: IncomeBand,
        gender: Gender,
        count: u64,
    ) -> TransactionAggregate {
        TransactionAggregate {
            date: day(date),
            region: region.into(),
            zip: zip.into(),
            channel,
            category: category.into(),
            income_band: band,
            gender,
            tx_count: count,
            amount: count as f64 * 10.0,
            premises: None,
        }
    }

    #[test]
    fn aggregates_single_bucket() {
        let records = vec![rec(
            "2014-09-13",
            "BCS",
            "23000",
            Channel::Pos,
            "food",
            IncomeBand::Low,
            Gender::F,
            12,
        )];
        let cal = Calendar::from_range(day("2014-09-13"), day("2014-09-13")).unwrap();
        let spec = GroupSpec::by([GroupKey::Region]);
        let out = aggregate_series(&records, &spec, Measure::Count, &cal).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out["region=BCS"].values, vec![12.0]);
    }

    #[test]
    fn aggregation_is_additive_within_a_day() {
        let records = vec![
            rec("2014-09-13", "BCS", "23000", Channel::Pos, "food", IncomeBand::Low, Gender::F, 12),
            rec("2014-09-13", "BCS", "23001", Channel::Pos, "auto", IncomeBand::High, Gender::M, 8),
        ];
        let cal = Calendar::from_range(day("2014-09-13"), day("2014-09-13")).unwrap();
        let out =
            aggregate_series(&records, &GroupSpec::by([GroupKey::Region]), Measure::Count, &cal)
                .unwrap();
        assert_eq!(out["region=BCS"].values, vec![20.0]);
    }

    #[test]
    fn gap_days_fill_with_zero() {
        let records = vec![
            rec("2014-09-13", "BCS", "23000", Channel::Pos, "food", IncomeBand::Low, Gender::F, 5),
            rec("2014-09-15", "BCS", "23000", Channel::Pos, "auto", IncomeBand::Low, Gender::F, 3),
        ];
        let cal = Calendar::from_range(day("2014-09-13"), day("2014-09-15")).unwrap();
        let out =
            aggregate_series(&records, &GroupSpec::by([GroupKey::Region]), Measure::Count, &cal)
                .unwrap();
        assert_eq!(out["region=BCS"].values, vec![5.0, 0.0, 3.0]);
        assert_eq!(coverage_gaps(&records, &cal), vec![day("2014-09-14")]);
    }

    #[test]
    fn empty_filter_match_is_an_empty_map() {
        let records = vec![rec(
            "2014-09-13",
            "BCS",
            "23000",
            Channel::Pos,
            "food",
            IncomeBand::Low,
            Gender::F,
            5,
        )];
        let cal = Calendar::from_range(day("2014-09-13"), day("2014-09-13")).unwrap();
        let spec = GroupSpec::by([GroupKey::Region]).with_filter(GroupFilter {
            region: Some("XXX".into()),
            ..Default::default()
        });
        let out = aggregate_series(&records, &spec, Measure::Count, &cal).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn normalize_constant_series() {
        let s =
            DailySeries::new("x", day("2014-09-01"), vec![5.0; 4], SeriesUnit::Count).unwrap();
        let n = normalize_by_median(&s, 0..4).unwrap();
        assert_eq!(n.values, vec![1.0; 4]);
        assert_eq!(n.unit, SeriesUnit::Normalized);
    }

    #[test]
    fn normalize_even_window_uses_central_mean() {
        let s = DailySeries::new("x", day("2014-09-01"), vec![2.0, 4.0, 6.0], SeriesUnit::Count)
            .unwrap();
        let n = normalize_by_median(&s, 0..3).unwrap();
        assert_eq!(n.values, vec![0.5, 1.0, 1.5]);
    }

    #[test]
    fn normalize_rejects_zero_median() {
        let s =
            DailySeries::new("x", day("2014-09-01"), vec![0.0; 3], SeriesUnit::Count).unwrap();
        assert!(matches!(
            normalize_by_median(&s, 0..3),
            Err(IngestError::DegenerateSeries { .. })
        ));
    }

    #[test]
    fn zip_filter_thresholds() {
        // one zip with a single category: excluded at min_premises = 2
        let mut records = vec![rec(
            "2014-09-13",
            "BCS",
            "23000",
            Channel::Pos,
            "food",
            IncomeBand::Low,
            Gender::F,
            500,
        )];
        let th = ZipActivityThresholds { min_premises: 2, min_active_days: 1, min_yearly_tx: 1 };
        assert!(filter_active_zips(&records, &th).is_empty());

        // a busy zip active on many days with several categories passes
        for i in 0..400 {
            let date = day("2014-01-01") + chrono::Duration::days(i % 365);
            records.push(TransactionAggregate {
                date,
                region: "BCS".into(),
                zip: "23001".into(),
                channel: Channel::Pos,
                category: ["food", "auto", "bars_restaurants"][(i % 3) as usize].into(),
                income_band: IncomeBand::Low,
                gender: Gender::F,
                tx_count: 40,
                amount: 400.0,
                premises: None,
            });
        }
        let th = ZipActivityThresholds::default();
        let active = filter_active_zips(&records, &th);
        assert_eq!(active, BTreeSet::from(["23001".to_string()]));
    }

    #[test]
    fn zip_filter_is_monotone_in_thresholds() {
        let records: Vec<_> = (0..300)
            .map(|i| {
                rec(
                    &format!("2014-{:02}-{:02}", 1 + (i / 28) % 12, 1 + i % 28),
                    "BCS",
                    if i % 2 == 0 { "23000" } else { "23001" },
                    Channel::Pos,
                    ["food", "auto"][(i % 2) as usize],
                    IncomeBand::Low,
                    Gender::F,
                    (i % 7) as u64,
                )
            })
            .collect();
        let base = ZipActivityThresholds { min_premises: 1, min_active_days: 10, min_yearly_tx: 10 };
        let loose = filter_active_zips(&records, &base);
        for tighter in [
            ZipActivityThresholds { min_premises: 2, ..base },
            ZipActivityThresholds { min_active_days: 100, ..base },
            ZipActivityThresholds { min_yearly_tx: 100_000, ..base },
        ] {
            let tight = filter_active_zips(&records, &tighter);
            assert!(tight.is_subset(&loose));
        }
    }

    #[test]
    fn group_labels_render_in_canonical_order() {
        let r = rec("2014-09-13", "BCS", "23000", Channel::Pos, "food", IncomeBand::Low, Gender::F, 1);
        let spec = GroupSpec::by([GroupKey::Gender, GroupKey::Region, GroupKey::Category]);
        assert_eq!(spec.label_for(&r), "region=BCS|category=food|gender=F");
    }

    #[test]
    fn round_trip_preserves_records() {
        let records = vec![
            rec("2014-09-13", "BCS", "23000", Channel::Pos, "food", IncomeBand::Low, Gender::F, 12),
            rec("2014-09-14", "DF", "01000", Channel::Atm, "-", IncomeBand::High, Gender::M, 30),
        ];
        let mut buf = Vec::new();
        write_transactions(&mut buf, &records, &["rng: splitmix64-counter-v1 seed=1".into()])
            .unwrap();
        let parsed = parse_transactions(buf.as_slice()).unwrap();
        assert_eq!(parsed, records);
    }
}
