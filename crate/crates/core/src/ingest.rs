//! Ingestion of the patient-level case list, the per-state daily status pivot
//! and press-release event counts into aligned per-state daily series.
//!
//! Every parser reports rows it could not use through [`Reject`] entries
//! rather than dropping them, so `accepted + rejects` always equals the
//! number of data rows read.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use chrono::{Days, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("schema error: missing required column '{0}'")]
    MissingColumn(String),
    #[error("duplicate row for {date} / {key}")]
    DuplicateKey { date: NaiveDate, key: String },
    #[error("negative count {count} on {date}")]
    NegativeCount { date: NaiveDate, count: i64 },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("state '{0}' does not appear in any input")]
    UnknownState(String),
    #[error("malformed series file: {0}")]
    Canonical(String),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A data row that could not be turned into a record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Reject {
    /// 1-based index among data rows (the header is not counted).
    pub row: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Parsed<T> {
    pub value: T,
    pub accepted: usize,
    pub rejects: Vec<Reject>,
    pub warnings: Vec<String>,
}

impl<T> Parsed<T> {
    pub fn rows_read(&self) -> usize {
        self.accepted + self.rejects.len()
    }
}

/// Ordered list of `chrono` formats tried when parsing a date cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DateFormats(pub Vec<String>);

impl Default for DateFormats {
    fn default() -> Self {
        Self(vec!["%Y-%m-%d".into(), "%d/%m/%Y".into(), "%d-%b-%y".into()])
    }
}

impl DateFormats {
    pub fn parse(&self, cell: &str) -> Option<NaiveDate> {
        let cell = cell.trim();
        self.0
            .iter()
            .find_map(|f| NaiveDate::parse_from_str(cell, f).ok())
    }
}

/// Lower-cased column name with BOM, spaces, underscores and any
/// `states_daily/`-style prefix removed.
fn normalize_column(name: &str) -> String {
    let name = name.trim_start_matches('\u{feff}').trim();
    let name = name.rsplit('/').next().unwrap_or(name);
    name.chars()
        .filter(|c| !c.is_whitespace() && *c != '_')
        .flat_map(char::to_lowercase)
        .collect()
}

struct Header {
    columns: Vec<String>,
}

impl Header {
    fn read<R: Read>(reader: &mut csv::Reader<R>) -> Result<Self, IngestError> {
        let columns: Vec<String> = reader.headers()?.iter().map(normalize_column).collect();
        if columns.iter().all(String::is_empty) {
            return Err(IngestError::Schema("input has no header row".into()));
        }
        Ok(Self { columns })
    }

    fn find(&self, name: &str) -> Option<usize> {
        let wanted = normalize_column(name);
        self.columns.iter().position(|c| *c == wanted)
    }

    fn require(&self, name: &str) -> Result<usize, IngestError> {
        self.find(name)
            .ok_or_else(|| IngestError::MissingColumn(name.to_string()))
    }
}

fn lf_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out)
}

fn csv_reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Transmission {
    Local,
    Imported,
    Unknown,
}

impl Transmission {
    pub fn classify(cell: &str) -> Self {
        match cell.trim().to_ascii_lowercase().as_str() {
            "local" => Self::Local,
            "imported" => Self::Imported,
            _ => Self::Unknown,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawCaseRecord {
    pub date_announced: NaiveDate,
    pub detected_state: String,
    pub type_of_transmission: Transmission,
}

/// Parses the patient-level case list. Needs `DateAnnounced`,
/// `DetectedState` and `TypeOfTransmission` columns (matched ignoring case,
/// spaces and underscores).
pub fn parse_raw_cases<R: Read>(input: R, dates: &DateFormats) -> Result<Parsed<Vec<RawCaseRecord>>, IngestError> {
    let mut reader = csv_reader(input);
    let header = Header::read(&mut reader)?;
    let date_col = header.require("DateAnnounced")?;
    let state_col = header.require("DetectedState")?;
    let kind_col = header.require("TypeOfTransmission")?;

    let mut records = Vec::new();
    let mut rejects = Vec::new();
    for (k, row) in reader.records().enumerate() {
        let row_no = k + 1;
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                rejects.push(Reject { row: row_no, reason: e.to_string() });
                continue;
            }
        };
        let cell = |c: usize| row.get(c).unwrap_or("");
        let Some(date) = dates.parse(cell(date_col)) else {
            rejects.push(Reject {
                row: row_no,
                reason: format!("unparseable date '{}'", cell(date_col)),
            });
            continue;
        };
        let state = cell(state_col);
        if state.is_empty() {
            rejects.push(Reject { row: row_no, reason: "empty state".into() });
            continue;
        }
        records.push(RawCaseRecord {
            date_announced: date,
            detected_state: state.to_string(),
            type_of_transmission: Transmission::classify(cell(kind_col)),
        });
    }
    Ok(Parsed {
        accepted: records.len(),
        value: records,
        rejects,
        warnings: Vec::new(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DailyStatus {
    Confirmed,
    Recovered,
    Deceased,
}

impl DailyStatus {
    pub const ALL: [DailyStatus; 3] = [Self::Confirmed, Self::Recovered, Self::Deceased];

    pub fn parse(cell: &str) -> Option<Self> {
        match cell.trim().to_ascii_lowercase().as_str() {
            "confirmed" => Some(Self::Confirmed),
            "recovered" => Some(Self::Recovered),
            "deceased" => Some(Self::Deceased),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StatusCounts {
    pub confirmed: u64,
    pub recovered: u64,
    pub deceased: u64,
}

impl StatusCounts {
    fn set(&mut self, status: DailyStatus, value: u64) {
        match status {
            DailyStatus::Confirmed => self.confirmed = value,
            DailyStatus::Recovered => self.recovered = value,
            DailyStatus::Deceased => self.deceased = value,
        }
    }
}

/// Per state code, per day confirmed/recovered/deceased counts.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct StatesDaily {
    pub series: BTreeMap<String, BTreeMap<NaiveDate, StatusCounts>>,
}

impl StatesDaily {
    pub fn get(&self, code: &str) -> Option<&BTreeMap<NaiveDate, StatusCounts>> {
        self.series.get(&code.to_ascii_lowercase())
    }
}

/// Pivots `(date, status)` rows of the states-daily file into per-state day
/// records for the requested state codes.
pub fn parse_states_daily<R: Read>(
    input: R,
    codes: &[&str],
    dates: &DateFormats,
) -> Result<Parsed<StatesDaily>, IngestError> {
    let mut reader = csv_reader(input);
    let header = Header::read(&mut reader)?;
    let status_col = header.require("Status")?;
    let date_col = header
        .find("Date_YMD")
        .map(Ok)
        .unwrap_or_else(|| header.require("Date"))?;
    let code_cols = codes
        .iter()
        .map(|c| Ok((c.to_ascii_lowercase(), header.require(c)?)))
        .collect::<Result<Vec<_>, IngestError>>()?;

    let mut seen: BTreeMap<NaiveDate, Vec<DailyStatus>> = BTreeMap::new();
    let mut daily = StatesDaily::default();
    for (code, _) in &code_cols {
        daily.series.insert(code.clone(), BTreeMap::new());
    }
    let mut accepted = 0;
    let mut rejects = Vec::new();
    'rows: for (k, row) in reader.records().enumerate() {
        let row_no = k + 1;
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                rejects.push(Reject { row: row_no, reason: e.to_string() });
                continue;
            }
        };
        let cell = |c: usize| row.get(c).unwrap_or("");
        let Some(status) = DailyStatus::parse(cell(status_col)) else {
            rejects.push(Reject {
                row: row_no,
                reason: format!("unknown status '{}'", cell(status_col)),
            });
            continue;
        };
        let Some(date) = dates.parse(cell(date_col)) else {
            rejects.push(Reject {
                row: row_no,
                reason: format!("unparseable date '{}'", cell(date_col)),
            });
            continue;
        };
        let mut values = Vec::with_capacity(code_cols.len());
        for (code, col) in &code_cols {
            let raw = cell(*col);
            let value = if raw.is_empty() {
                0
            } else {
                match raw.parse::<i64>() {
                    Ok(v) if v >= 0 => v as u64,
                    _ => {
                        rejects.push(Reject {
                            row: row_no,
                            reason: format!("invalid {code} count '{raw}'"),
                        });
                        continue 'rows;
                    }
                }
            };
            values.push(value);
        }
        let statuses = seen.entry(date).or_default();
        if statuses.contains(&status) {
            return Err(IngestError::DuplicateKey {
                date,
                key: format!("{status:?}"),
            });
        }
        statuses.push(status);
        for ((code, _), value) in code_cols.iter().zip(values) {
            daily
                .series
                .get_mut(code)
                .expect("inserted above")
                .entry(date)
                .or_default()
                .set(status, value);
        }
        accepted += 1;
    }

    let mut warnings = Vec::new();
    for (date, statuses) in &seen {
        let missing: Vec<String> = DailyStatus::ALL
            .iter()
            .filter(|s| !statuses.contains(s))
            .map(|s| format!("{s:?}"))
            .collect();
        if !missing.is_empty() {
            warnings.push(format!("{date}: no {} row, filled with 0", missing.join("/")));
        }
    }
    Ok(Parsed {
        value: daily,
        accepted,
        rejects,
        warnings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventCount {
    pub date: NaiveDate,
    pub count: i64,
}

/// Parses a `date,count` file of event-linked cases.
pub fn parse_event_counts<R: Read>(input: R, dates: &DateFormats) -> Result<Parsed<Vec<EventCount>>, IngestError> {
    let mut reader = csv_reader(input);
    let header = match Header::read(&mut reader) {
        Err(IngestError::Schema(_)) => {
            return Ok(Parsed {
                value: Vec::new(),
                accepted: 0,
                rejects: Vec::new(),
                warnings: vec!["event file is empty".into()],
            })
        }
        other => other?,
    };
    let date_col = header.require("date")?;
    let count_col = header.require("count")?;
    let mut events: Vec<EventCount> = Vec::new();
    let mut rejects = Vec::new();
    for (k, row) in reader.records().enumerate() {
        let row_no = k + 1;
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                rejects.push(Reject { row: row_no, reason: e.to_string() });
                continue;
            }
        };
        let cell = |c: usize| row.get(c).unwrap_or("");
        let Some(date) = dates.parse(cell(date_col)) else {
            rejects.push(Reject {
                row: row_no,
                reason: format!("unparseable date '{}'", cell(date_col)),
            });
            continue;
        };
        let Ok(count) = cell(count_col).parse::<i64>() else {
            rejects.push(Reject {
                row: row_no,
                reason: format!("unparseable count '{}'", cell(count_col)),
            });
            continue;
        };
        if events.iter().any(|e| e.date == date) {
            return Err(IngestError::DuplicateKey {
                date,
                key: "event count".into(),
            });
        }
        events.push(EventCount { date, count });
    }
    events.sort_by_key(|e| e.date);
    Ok(Parsed {
        accepted: events.len(),
        value: events,
        rejects,
        warnings: Vec::new(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DailyCounts {
    pub confirmed: u64,
    pub recovered: u64,
    pub deceased: u64,
    pub imported: u64,
    pub event_linked: u64,
}

impl DailyCounts {
    /// Cases attributed to the exogenous channel.
    pub fn exogenous(&self) -> u64 {
        self.imported + self.event_linked
    }
}

/// Gap-free daily series for one state, starting at `start`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObservedSeries {
    state: String,
    start: NaiveDate,
    days: Vec<DailyCounts>,
    population_n: u64,
}

pub const SERIES_HEADER: [&str; 6] = [
    "date",
    "daily_confirmed",
    "daily_recovered",
    "daily_deceased",
    "daily_imported",
    "daily_event_linked",
];

impl ObservedSeries {
    pub fn new(
        state: impl Into<String>,
        start: NaiveDate,
        days: Vec<DailyCounts>,
        population_n: u64,
    ) -> Result<Self, IngestError> {
        if population_n == 0 {
            return Err(IngestError::Config("population_n must be positive".into()));
        }
        if days.is_empty() {
            return Err(IngestError::Canonical("series has no days".into()));
        }
        Ok(Self {
            state: state.into(),
            start,
            days,
            population_n,
        })
    }

    pub fn state(&self) -> &str {
        &self.state
    }

    pub fn population_n(&self) -> u64 {
        self.population_n
    }

    pub fn start(&self) -> NaiveDate {
        self.start
    }

    pub fn end(&self) -> NaiveDate {
        self.date_at(self.days.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.days.len()
    }

    pub fn is_empty(&self) -> bool {
        self.days.is_empty()
    }

    pub fn days(&self) -> &[DailyCounts] {
        &self.days
    }

    pub fn date_at(&self, k: usize) -> NaiveDate {
        self.start + Days::new(k as u64)
    }

    pub fn dates(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        (0..self.days.len()).map(|k| self.date_at(k))
    }

    pub fn daily_confirmed(&self) -> Vec<u64> {
        self.days.iter().map(|d| d.confirmed).collect()
    }

    pub fn daily_recovered(&self) -> Vec<u64> {
        self.days.iter().map(|d| d.recovered).collect()
    }

    pub fn daily_deceased(&self) -> Vec<u64> {
        self.days.iter().map(|d| d.deceased).collect()
    }

    pub fn daily_imported(&self) -> Vec<u64> {
        self.days.iter().map(|d| d.imported).collect()
    }

    pub fn daily_event_linked(&self) -> Vec<u64> {
        self.days.iter().map(|d| d.event_linked).collect()
    }

    /// Imported plus event-linked cases per day.
    pub fn daily_exogenous(&self) -> Vec<u64> {
        self.days.iter().map(DailyCounts::exogenous).collect()
    }

    fn index_of(&self, date: NaiveDate) -> Option<usize> {
        let offset = (date - self.start).num_days();
        (offset >= 0 && (offset as usize) < self.days.len()).then_some(offset as usize)
    }

    /// Grows the date range with zero-filled days so that it covers `date`.
    fn extend_to(&mut self, date: NaiveDate) {
        if date < self.start {
            let extra = (self.start - date).num_days() as usize;
            self.days.splice(0..0, std::iter::repeat_n(DailyCounts::default(), extra));
            self.start = date;
        } else if date > self.end() {
            let extra = (date - self.end()).num_days() as usize;
            self.days.extend(std::iter::repeat_n(DailyCounts::default(), extra));
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), IngestError> {
        let mut w = lf_writer(out);
        w.write_record(SERIES_HEADER)?;
        for (date, d) in self.dates().zip(&self.days) {
            w.write_record([
                date.format("%Y-%m-%d").to_string(),
                d.confirmed.to_string(),
                d.recovered.to_string(),
                d.deceased.to_string(),
                d.imported.to_string(),
                d.event_linked.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the canonical series CSV written by [`ObservedSeries::write_csv`].
    pub fn read_csv<R: Read>(input: R, state: &str, population_n: u64) -> Result<Self, IngestError> {
        let mut reader = csv::ReaderBuilder::new().from_reader(input);
        let header: Vec<String> = reader.headers()?.iter().map(normalize_column).collect();
        let expected: Vec<String> = SERIES_HEADER.iter().map(|c| normalize_column(c)).collect();
        if header != expected {
            return Err(IngestError::Canonical(format!("unexpected header {header:?}")));
        }
        let mut start = None;
        let mut days = Vec::new();
        for row in reader.records() {
            let row = row?;
            let date = NaiveDate::parse_from_str(&row[0], "%Y-%m-%d")
                .map_err(|e| IngestError::Canonical(format!("date '{}': {e}", &row[0])))?;
            let first = *start.get_or_insert(date);
            if date != first + Days::new(days.len() as u64) {
                return Err(IngestError::Canonical(format!("{date} breaks the daily sequence")));
            }
            let count = |k: usize| {
                row[k]
                    .parse::<u64>()
                    .map_err(|e| IngestError::Canonical(format!("{}: '{}': {e}", SERIES_HEADER[k], &row[k])))
            };
            days.push(DailyCounts {
                confirmed: count(1)?,
                recovered: count(2)?,
                deceased: count(3)?,
                imported: count(4)?,
                event_linked: count(5)?,
            });
        }
        let start = start.ok_or_else(|| IngestError::Canonical("no data rows".into()))?;
        Self::new(state, start, days, population_n)
    }
}

/// Sets `event_linked` from the event file, widening the series with
/// zero-filled days for events outside its range.
pub fn merge_event_counts(
    mut series: ObservedSeries,
    events: &[EventCount],
) -> Result<Parsed<ObservedSeries>, IngestError> {
    let mut warnings = Vec::new();
    for e in events {
        if e.count < 0 {
            return Err(IngestError::NegativeCount {
                date: e.date,
                count: e.count,
            });
        }
    }
    for e in events {
        series.extend_to(e.date);
        let k = series.index_of(e.date).expect("range extended");
        let day = &mut series.days[k];
        day.event_linked = e.count as u64;
        if day.event_linked > day.confirmed {
            warnings.push(format!(
                "{}: {} event-linked cases exceed {} confirmed",
                e.date, day.event_linked, day.confirmed
            ));
        }
    }
    Ok(Parsed {
        accepted: events.len(),
        value: series,
        rejects: Vec::new(),
        warnings,
    })
}

/// A state as named in the case list and coded in the states-daily file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateRef {
    pub code: String,
    pub name: String,
}

const STATE_NAMES: &[(&str, &str)] = &[
    ("an", "Andaman and Nicobar Islands"),
    ("ap", "Andhra Pradesh"),
    ("ar", "Arunachal Pradesh"),
    ("as", "Assam"),
    ("br", "Bihar"),
    ("ch", "Chandigarh"),
    ("ct", "Chhattisgarh"),
    ("dl", "Delhi"),
    ("ga", "Goa"),
    ("gj", "Gujarat"),
    ("hp", "Himachal Pradesh"),
    ("hr", "Haryana"),
    ("jh", "Jharkhand"),
    ("jk", "Jammu and Kashmir"),
    ("ka", "Karnataka"),
    ("kl", "Kerala"),
    ("la", "Ladakh"),
    ("ld", "Lakshadweep"),
    ("mh", "Maharashtra"),
    ("ml", "Meghalaya"),
    ("mn", "Manipur"),
    ("mp", "Madhya Pradesh"),
    ("mz", "Mizoram"),
    ("nl", "Nagaland"),
    ("or", "Odisha"),
    ("pb", "Punjab"),
    ("py", "Puducherry"),
    ("rj", "Rajasthan"),
    ("sk", "Sikkim"),
    ("tg", "Telangana"),
    ("tn", "Tamil Nadu"),
    ("tr", "Tripura"),
    ("up", "Uttar Pradesh"),
    ("ut", "Uttarakhand"),
    ("wb", "West Bengal"),
];

impl StateRef {
    pub fn new(code: impl Into<String>, name: impl Into<String>) -> Self {
        Self {
            code: code.into().to_ascii_lowercase(),
            name: name.into(),
        }
    }

    /// Looks up the state name for a states-daily code.
    pub fn from_code(code: &str) -> Option<Self> {
        let code = code.to_ascii_lowercase();
        STATE_NAMES
            .iter()
            .find(|(c, _)| *c == code)
            .map(|(c, n)| Self::new(*c, *n))
    }

    fn matches_name(&self, name: &str) -> bool {
        name.trim().eq_ignore_ascii_case(&self.name)
    }
}

/// Assembles the observed series of one state from the three sources.
pub fn build_observed(
    raw: &[RawCaseRecord],
    states: &StatesDaily,
    events: &[EventCount],
    state: &StateRef,
    population_n: u64,
) -> Result<Parsed<ObservedSeries>, IngestError> {
    if population_n == 0 {
        return Err(IngestError::Config(format!("population_n for '{}' must be positive", state.code)));
    }
    let status = states.get(&state.code);
    let mut imported: BTreeMap<NaiveDate, u64> = BTreeMap::new();
    let mut any_raw = false;
    for rec in raw.iter().filter(|r| state.matches_name(&r.detected_state)) {
        any_raw = true;
        if rec.type_of_transmission == Transmission::Imported {
            *imported.entry(rec.date_announced).or_default() += 1;
        }
    }
    if status.is_none() && !any_raw {
        return Err(IngestError::UnknownState(state.code.clone()));
    }

    let status_dates = status.into_iter().flat_map(|m| m.keys().copied());
    let all_dates: Vec<NaiveDate> = status_dates
        .chain(imported.keys().copied())
        .chain(events.iter().map(|e| e.date))
        .collect();
    let (Some(&first), Some(&last)) = (all_dates.iter().min(), all_dates.iter().max()) else {
        return Err(IngestError::UnknownState(state.code.clone()));
    };

    let n_days = (last - first).num_days() as usize + 1;
    let mut days = vec![DailyCounts::default(); n_days];
    let mut present = vec![false; n_days];
    if let Some(status) = status {
        for (date, c) in status {
            let k = (*date - first).num_days() as usize;
            days[k].confirmed = c.confirmed;
            days[k].recovered = c.recovered;
            days[k].deceased = c.deceased;
            present[k] = true;
        }
    }
    for (date, count) in &imported {
        days[(*date - first).num_days() as usize].imported = *count;
    }

    let mut warnings = Vec::new();
    if status.is_some() {
        let mut k = 0;
        while k < n_days {
            if present[k] {
                k += 1;
                continue;
            }
            let run_start = k;
            while k < n_days && !present[k] {
                k += 1;
            }
            let from = first + Days::new(run_start as u64);
            let to = first + Days::new(k as u64 - 1);
            warnings.push(format!("{}: no daily status for {from}..={to}, filled with 0", state.code));
        }
    }

    let series = ObservedSeries::new(state.code.clone(), first, days, population_n)?;
    let mut merged = merge_event_counts(series, events)?;
    warnings.append(&mut merged.warnings);
    merged.warnings = warnings;
    Ok(merged)
}

/// Writes `series` back out in the three source layouts: one case-list row
/// per imported case, a states-daily pivot whose `TT` column repeats the
/// state column, and the event file (days with events only).
pub fn write_sources<A: Write, B: Write, C: Write>(
    series: &ObservedSeries,
    state: &StateRef,
    raw_out: A,
    daily_out: B,
    events_out: C,
) -> Result<(), IngestError> {
    let mut raw = lf_writer(raw_out);
    raw.write_record(["Patient Number", "Date Announced", "Detected State", "Type of transmission"])?;
    let mut patient = 0u64;
    for (date, d) in series.dates().zip(series.days()) {
        for _ in 0..d.imported {
            patient += 1;
            raw.write_record([
                patient.to_string(),
                date.format("%d/%m/%Y").to_string(),
                state.name.clone(),
                "Imported".into(),
            ])?;
        }
    }
    raw.flush()?;

    let mut daily = lf_writer(daily_out);
    let code = state.code.to_ascii_uppercase();
    daily.write_record(["Date", "Date_YMD", "Status", "TT", code.as_str()])?;
    for (date, d) in series.dates().zip(series.days()) {
        for (status, value) in [("Confirmed", d.confirmed), ("Recovered", d.recovered), ("Deceased", d.deceased)] {
            let value = value.to_string();
            daily.write_record([
                date.format("%d-%b-%y").to_string(),
                date.format("%Y-%m-%d").to_string(),
                status.to_string(),
                value.clone(),
                value,
            ])?;
        }
    }
    daily.flush()?;

    let mut events = lf_writer(events_out);
    events.write_record(["date", "count"])?;
    for (date, d) in series.dates().zip(series.days()) {
        if d.event_linked > 0 {
            events.write_record([date.format("%Y-%m-%d").to_string(), d.event_linked.to_string()])?;
        }
    }
    events.flush()?;
    Ok(())
}

/// State code to susceptible population, read from `code = count` lines.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PopulationConfig(pub BTreeMap<String, u64>);

impl PopulationConfig {
    pub fn parse(text: &str) -> Result<Self, IngestError> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| IngestError::Config(e.to_string()))?;
        let mut out = BTreeMap::new();
        for (code, value) in table {
            let n = value
                .as_integer()
                .ok_or_else(|| IngestError::Config(format!("'{code}' is not an integer")))?;
            if n <= 0 {
                return Err(IngestError::Config(format!("population for '{code}' must be positive, got {n}")));
            }
            out.insert(code.to_ascii_lowercase(), n as u64);
        }
        Ok(Self(out))
    }

    pub fn get(&self, code: &str) -> Result<u64, IngestError> {
        self.0
            .get(&code.to_ascii_lowercase())
            .copied()
            .ok_or_else(|| IngestError::Config(format!("no population configured for '{code}'")))
    }
}
