//! Demand series, climatological fractions, and the PF/PFML forecasts.
//!
//! A study month is a fixed 30-day block of 720 hours. The perfect
//! forecast (PF) replays observed demand; the monthly-level forecast
//! (PFML) keeps each bus's observed monthly total but redistributes it
//! over days and hours using system-wide climatological fractions.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::system::{BusId, NetworkCase};

/// Hours in a study month (30 uniform days).
pub const HOURS_PER_MONTH: usize = 720;
/// Days in a study month.
pub const DAYS_PER_MONTH: usize = 30;

/// 1-based month ordinal within a demand history.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct MonthIndex(pub u32);

impl MonthIndex {
    /// Hour range `[start, end)` of this month, 0-based in the history.
    pub fn hour_range(&self) -> (usize, usize) {
        let start = (self.0 as usize - 1) * HOURS_PER_MONTH;
        (start, start + HOURS_PER_MONTH)
    }
}

/// Per-bus hourly demand over a horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandSeries {
    horizon_hours: usize,
    values: BTreeMap<BusId, Vec<f64>>,
}

#[derive(Debug, Error)]
pub enum DemandError {
    #[error("month {0} is outside the demand history ({1} months available)")]
    MonthOutOfRange(u32, usize),
    #[error("demand history has zero total demand")]
    ZeroTotalDemand,
    #[error("history length {0} h is not a multiple of {1} h")]
    BadHistoryLength(usize, usize),
    #[error("bus {bus} series has {got} hours, expected {expected}")]
    RaggedSeries { bus: BusId, got: usize, expected: usize },
    #[error("demand values must be nonnegative (bus {bus}, hour {hour})")]
    NegativeDemand { bus: BusId, hour: usize },
    #[error("demand file line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("system-total demand file needs a case with demand shares")]
    SharesRequired,
    #[error("no months given for the daily climatology")]
    NoMonths,
}

impl DemandSeries {
    /// Build from per-bus hourly vectors; all must share one horizon and
    /// hold nonnegative values.
    pub fn new(values: BTreeMap<BusId, Vec<f64>>) -> Result<Self, DemandError> {
        let horizon_hours = values.values().next().map(Vec::len).unwrap_or(0);
        for (&bus, series) in &values {
            if series.len() != horizon_hours {
                return Err(DemandError::RaggedSeries {
                    bus,
                    got: series.len(),
                    expected: horizon_hours,
                });
            }
            if let Some(hour) = series.iter().position(|&v| v < 0.0) {
                return Err(DemandError::NegativeDemand { bus, hour });
            }
        }
        Ok(Self { horizon_hours, values })
    }

    /// Distribute a system-total hourly series across buses using the
    /// case's demand shares.
    pub fn from_system_total(total: &[f64], case: &NetworkCase) -> Result<Self, DemandError> {
        let mut values = BTreeMap::new();
        for (&bus, &share) in &case.demand_share {
            values.insert(bus, total.iter().map(|&v| v * share).collect());
        }
        Self::new(values)
    }

    pub fn horizon_hours(&self) -> usize {
        self.horizon_hours
    }

    pub fn months(&self) -> usize {
        self.horizon_hours / HOURS_PER_MONTH
    }

    pub fn buses(&self) -> impl Iterator<Item = BusId> + '_ {
        self.values.keys().copied()
    }

    /// Demand at (bus, hour); zero for buses without a series.
    pub fn get(&self, bus: BusId, hour: usize) -> f64 {
        self.values.get(&bus).map(|s| s[hour]).unwrap_or(0.0)
    }

    /// Total system demand at one hour.
    pub fn system_at(&self, hour: usize) -> f64 {
        self.values.values().map(|s| s[hour]).sum()
    }

    pub fn max_system_hourly(&self) -> f64 {
        (0..self.horizon_hours).map(|t| self.system_at(t)).fold(0.0, f64::max)
    }

    /// Sum of a bus's demand over `[start, end)`, MWh.
    pub fn bus_total(&self, bus: BusId, start: usize, end: usize) -> f64 {
        self.values.get(&bus).map(|s| s[start..end].iter().sum()).unwrap_or(0.0)
    }

    pub fn system_total(&self, start: usize, end: usize) -> f64 {
        self.buses().map(|b| self.bus_total(b, start, end)).sum()
    }

    /// Copy of the hours `[start, end)` as a new series.
    pub fn slice(&self, start: usize, end: usize) -> DemandSeries {
        let values = self
            .values
            .iter()
            .map(|(&bus, series)| (bus, series[start..end].to_vec()))
            .collect();
        DemandSeries {
            horizon_hours: end - start,
            values,
        }
    }

    fn check_month(&self, month: MonthIndex) -> Result<(usize, usize), DemandError> {
        let (start, end) = month.hour_range();
        if month.0 == 0 || end > self.horizon_hours {
            return Err(DemandError::MonthOutOfRange(month.0, self.months()));
        }
        Ok((start, end))
    }
}

/// System-wide climatological shape: 24 hour-of-day fractions and 30
/// day-of-month fractions, each summing to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ClimatologyProfile {
    pub hourly_fractions: [f64; 24],
    pub daily_fractions: [f64; 30],
}

impl ClimatologyProfile {
    /// Compute both fraction vectors from a history, averaging the daily
    /// shape over `months` and the hourly shape over the whole slice.
    pub fn from_history(history: &DemandSeries, months: &[MonthIndex]) -> Result<Self, DemandError> {
        Ok(Self {
            hourly_fractions: hourly_fractions(history)?,
            daily_fractions: daily_fractions(history, months)?,
        })
    }

    /// Flat profile: every hour and day carries an equal share.
    pub fn uniform() -> Self {
        Self {
            hourly_fractions: [1.0 / 24.0; 24],
            daily_fractions: [1.0 / 30.0; 30],
        }
    }
}

/// The perfect forecast: the observed slice itself.
pub fn perfect_forecast(observed: &DemandSeries, month: MonthIndex) -> Result<DemandSeries, DemandError> {
    let (start, end) = observed.check_month(month)?;
    Ok(observed.slice(start, end))
}

/// Climatological hour-of-day fractions: the share of total system
/// demand falling at each hour of the day, normalized to sum to 1.
pub fn hourly_fractions(history: &DemandSeries) -> Result<[f64; 24], DemandError> {
    if history.horizon_hours == 0 || history.horizon_hours % 24 != 0 {
        return Err(DemandError::BadHistoryLength(history.horizon_hours, 24));
    }
    let mut sums = [0.0f64; 24];
    for t in 0..history.horizon_hours {
        sums[t % 24] += history.system_at(t);
    }
    let total: f64 = sums.iter().sum();
    if total <= 0.0 {
        return Err(DemandError::ZeroTotalDemand);
    }
    Ok(sums.map(|s| s / total))
}

/// Climatological day-of-month fractions: each month's per-day share of
/// its own total, averaged over `months`.
pub fn daily_fractions(history: &DemandSeries, months: &[MonthIndex]) -> Result<[f64; 30], DemandError> {
    if months.is_empty() {
        return Err(DemandError::NoMonths);
    }
    let mut average = [0.0f64; 30];
    for &month in months {
        let (start, _) = history.check_month(month)?;
        let month_total = history.system_total(start, start + HOURS_PER_MONTH);
        if month_total <= 0.0 {
            return Err(DemandError::ZeroTotalDemand);
        }
        for day in 0..DAYS_PER_MONTH {
            let day_start = start + day * 24;
            let day_total = history.system_total(day_start, day_start + 24);
            average[day] += day_total / month_total;
        }
    }
    let n = months.len() as f64;
    Ok(average.map(|s| s / n))
}

/// The PFML forecast: preserve each bus's observed monthly total, but
/// spread it over the month by the climatological day and hour shapes.
pub fn pfml_forecast(
    observed: &DemandSeries,
    climatology: &ClimatologyProfile,
    month: MonthIndex,
) -> Result<DemandSeries, DemandError> {
    let (start, end) = observed.check_month(month)?;
    let mut values = BTreeMap::new();
    for bus in observed.buses() {
        let monthly_total = observed.bus_total(bus, start, end);
        let series: Vec<f64> = (0..HOURS_PER_MONTH)
            .map(|t| {
                climatology.daily_fractions[t / 24] * climatology.hourly_fractions[t % 24] * monthly_total
            })
            .collect();
        values.insert(bus, series);
    }
    DemandSeries::new(values)
}

/// Contents of a demand file: either per-bus series or a system total
/// awaiting share-based disaggregation.
#[derive(Debug, Clone, PartialEq)]
pub enum DemandFile {
    PerBus(DemandSeries),
    SystemTotal(Vec<f64>),
}

impl DemandFile {
    /// Resolve to a per-bus series, using the case's shares when the
    /// file carries only a system total.
    pub fn resolve(self, case: Option<&NetworkCase>) -> Result<DemandSeries, DemandError> {
        match self {
            DemandFile::PerBus(series) => Ok(series),
            DemandFile::SystemTotal(total) => {
                let case = case.ok_or(DemandError::SharesRequired)?;
                DemandSeries::from_system_total(&total, case)
            }
        }
    }
}

/// Parse a demand file. Header `hour,bus,demand_mw` starts a per-bus
/// table; `hour,demand_mw` a system-total table. Hours are 0-based and
/// must cover `[0, H)` for every bus.
pub fn parse_demand_file(text: &str) -> Result<DemandFile, DemandError> {
    let err = |line: usize, message: String| DemandError::Parse { line, message };
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (header_line, header) = lines
        .next()
        .ok_or_else(|| err(0, "empty demand file".into()))?;

    match header {
        "hour,bus,demand_mw" => {
            let mut per_bus: BTreeMap<BusId, Vec<(usize, f64)>> = BTreeMap::new();
            for (line_no, line) in lines {
                let parts: Vec<&str> = line.split(',').map(str::trim).collect();
                if parts.len() != 3 {
                    return Err(err(line_no, "expected hour,bus,demand_mw".into()));
                }
                let hour: usize = parts[0].parse().map_err(|_| err(line_no, format!("bad hour `{}`", parts[0])))?;
                let bus: u32 = parts[1].parse().map_err(|_| err(line_no, format!("bad bus `{}`", parts[1])))?;
                let mw: f64 = parts[2].parse().map_err(|_| err(line_no, format!("bad demand `{}`", parts[2])))?;
                per_bus.entry(BusId(bus)).or_default().push((hour, mw));
            }
            let mut values = BTreeMap::new();
            for (bus, mut rows) in per_bus {
                rows.sort_by_key(|&(h, _)| h);
                for (i, &(h, _)) in rows.iter().enumerate() {
                    if h != i {
                        return Err(err(
                            header_line,
                            format!("bus {bus}: hours are not contiguous from 0 (missing hour {i})"),
                        ));
                    }
                }
                values.insert(bus, rows.into_iter().map(|(_, mw)| mw).collect());
            }
            Ok(DemandFile::PerBus(DemandSeries::new(values)?))
        }
        "hour,demand_mw" => {
            let mut rows: Vec<(usize, f64)> = Vec::new();
            for (line_no, line) in lines {
                let parts: Vec<&str> = line.split(',').map(str::trim).collect();
                if parts.len() != 2 {
                    return Err(err(line_no, "expected hour,demand_mw".into()));
                }
                let hour: usize = parts[0].parse().map_err(|_| err(line_no, format!("bad hour `{}`", parts[0])))?;
                let mw: f64 = parts[1].parse().map_err(|_| err(line_no, format!("bad demand `{}`", parts[1])))?;
                rows.push((hour, mw));
            }
            rows.sort_by_key(|&(h, _)| h);
            for (i, &(h, _)) in rows.iter().enumerate() {
                if h != i {
                    return Err(err(header_line, format!("hours are not contiguous from 0 (missing hour {i})")));
                }
            }
            Ok(DemandFile::SystemTotal(rows.into_iter().map(|(_, mw)| mw).collect()))
        }
        other => Err(err(header_line, format!("unrecognized header `{other}`"))),
    }
}

/// Serialize a per-bus series in the `hour,bus,demand_mw` format.
pub fn emit_demand_file(series: &DemandSeries) -> String {
    let mut out = String::from("hour,bus,demand_mw\n");
    for t in 0..series.horizon_hours() {
        for bus in series.buses() {
            out.push_str(&format!("{t},{bus},{}\n", series.get(bus, t)));
        }
    }
    out
}

/// Serialize a system-total series in the `hour,demand_mw` format.
pub fn emit_system_demand_file(total: &[f64]) -> String {
    let mut out = String::from("hour,demand_mw\n");
    for (t, mw) in total.iter().enumerate() {
        out.push_str(&format!("{t},{mw}\n"));
    }
    out
}
