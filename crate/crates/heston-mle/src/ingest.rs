//! Market-data loading: joint (price, variance) CSV files, OHLC bars with
//! a Garman-Klass variance proxy, and annualization rescaling.
//!
//! Schemas are declared, never sniffed. Joint files carry columns
//! `t,price,var`; OHLC files carry `t,open,high,low,close`. Column names
//! and the delimiter are configurable.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{JointSeries, SamplingGrid};

/// One observation of price and annualized squared volatility.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketRecord {
    pub index: usize,
    pub price: f64,
    pub squared_vol: f64,
}

impl MarketRecord {
    pub fn new(index: usize, price: f64, squared_vol: f64) -> Result<Self> {
        if !(price.is_finite() && price > 0.0) {
            return Err(Error::NonPositivePrice {
                index,
                value: price,
            });
        }
        if !(squared_vol.is_finite() && squared_vol >= 0.0) {
            return Err(Error::NonPositiveVariance {
                index,
                value: squared_vol,
            });
        }
        Ok(Self {
            index,
            price,
            squared_vol,
        })
    }
}

/// One intraday bar: high, low, last, and the previous bar's last price
/// standing in for an open (the input column is still named `open`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OhlcBar {
    pub high: f64,
    pub low: f64,
    pub last: f64,
    pub prev_last: f64,
    /// Bar duration.
    pub duration: f64,
}

impl OhlcBar {
    pub fn new(index: usize, high: f64, low: f64, last: f64, prev_last: f64, duration: f64) -> Result<Self> {
        for (name, v) in [
            ("high", high),
            ("low", low),
            ("last", last),
            ("prev_last", prev_last),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidBar {
                    index,
                    msg: format!("{name} must be positive, got {v}"),
                });
            }
        }
        if low > high {
            return Err(Error::InvalidBar {
                index,
                msg: format!("low {low} exceeds high {high}"),
            });
        }
        if last < low || last > high {
            return Err(Error::InvalidBar {
                index,
                msg: format!("last {last} outside [{low}, {high}]"),
            });
        }
        if !(duration.is_finite() && duration > 0.0) {
            return Err(Error::InvalidBar {
                index,
                msg: format!("duration must be positive, got {duration}"),
            });
        }
        Ok(Self {
            high,
            low,
            last,
            prev_last,
            duration,
        })
    }
}

/// Declared layout of a joint (price, variance) CSV file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointSchema {
    pub delimiter: u8,
    pub time: String,
    pub price: String,
    pub var: String,
}

impl Default for JointSchema {
    fn default() -> Self {
        Self {
            delimiter: b',',
            time: "t".to_string(),
            price: "price".to_string(),
            var: "var".to_string(),
        }
    }
}

/// Declared layout of an OHLC CSV file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OhlcSchema {
    pub delimiter: u8,
    pub time: String,
    pub open: String,
    pub high: String,
    pub low: String,
    pub close: String,
}

impl Default for OhlcSchema {
    fn default() -> Self {
        Self {
            delimiter: b',',
            time: "t".to_string(),
            open: "open".to_string(),
            high: "high".to_string(),
            low: "low".to_string(),
            close: "close".to_string(),
        }
    }
}

fn column_index(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| Error::MissingColumn(name.to_string()))
}

fn parse_field(record: &csv::StringRecord, idx: usize, line: usize, name: &str) -> Result<f64> {
    let raw = record.get(idx).ok_or_else(|| Error::CsvParse {
        line,
        msg: format!("missing field {name}"),
    })?;
    raw.trim().parse::<f64>().map_err(|e| Error::CsvParse {
        line,
        msg: format!("field {name}: {e}"),
    })
}

/// Load a joint (price, variance) file under a declared schema. Records are
/// returned in file order with 0-based indices; error messages carry the
/// 1-based file line.
pub fn load_joint_csv(path: &std::path::Path, schema: &JointSchema) -> Result<Vec<MarketRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(csv_to_error)?;
    let headers = reader.headers().map_err(csv_to_error)?.clone();
    let pi = column_index(&headers, &schema.price)?;
    let vi = column_index(&headers, &schema.var)?;
    // the time column must exist but its values are not interpreted; the
    // sub-sampling interval comes from the caller
    column_index(&headers, &schema.time)?;

    let mut records = Vec::new();
    for (row, rec) in reader.records().enumerate() {
        let line = row + 2; // header is line 1
        let rec = rec.map_err(|e| Error::CsvParse {
            line,
            msg: e.to_string(),
        })?;
        let price = parse_field(&rec, pi, line, &schema.price)?;
        let var = parse_field(&rec, vi, line, &schema.var)?;
        let record = MarketRecord::new(row, price, var).map_err(|e| Error::CsvParse {
            line,
            msg: e.to_string(),
        })?;
        records.push(record);
    }
    Ok(records)
}

/// Load OHLC bars under a declared schema; `duration` is attached by the
/// caller since the time column is not interpreted.
pub fn load_ohlc_csv(
    path: &std::path::Path,
    schema: &OhlcSchema,
    duration: f64,
) -> Result<Vec<OhlcBar>> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(csv_to_error)?;
    let headers = reader.headers().map_err(csv_to_error)?.clone();
    let oi = column_index(&headers, &schema.open)?;
    let hi = column_index(&headers, &schema.high)?;
    let li = column_index(&headers, &schema.low)?;
    let ci = column_index(&headers, &schema.close)?;
    column_index(&headers, &schema.time)?;

    let mut bars = Vec::new();
    for (row, rec) in reader.records().enumerate() {
        let line = row + 2;
        let rec = rec.map_err(|e| Error::CsvParse {
            line,
            msg: e.to_string(),
        })?;
        let open = parse_field(&rec, oi, line, &schema.open)?;
        let high = parse_field(&rec, hi, line, &schema.high)?;
        let low = parse_field(&rec, li, line, &schema.low)?;
        let close = parse_field(&rec, ci, line, &schema.close)?;
        let bar = OhlcBar::new(row, high, low, close, open, duration).map_err(|e| {
            Error::CsvParse {
                line,
                msg: e.to_string(),
            }
        })?;
        bars.push(bar);
    }
    Ok(bars)
}

fn csv_to_error(e: csv::Error) -> Error {
    match e.kind() {
        csv::ErrorKind::Io(_) => match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            _ => unreachable!(),
        },
        _ => Error::CsvParse {
            line: e
                .position()
                .map(|p| p.line() as usize)
                .unwrap_or(0),
            msg: e.to_string(),
        },
    }
}

/// Which Garman-Klass expression to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GkMode {
    /// `0.5 (ln H/L)^2 - 0.386 (ln Q/O)^2`, the standard log-price form.
    LogPrice,
    /// `0.5 (H - L)^2 - 0.386 Q^2`, the raw-difference expression; kept for
    /// reproduction attempts despite being dimensionally inconsistent with
    /// a variance of returns.
    RawDifference,
}

/// Per-bar variances plus the number of bars clamped at zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GkVariance {
    pub variances: Vec<f64>,
    pub clamped: usize,
}

/// Garman-Klass per-bar variance proxy. Negative raw values are clamped at
/// zero and counted.
pub fn garman_klass_variance(bars: &[OhlcBar], mode: GkMode) -> GkVariance {
    let mut clamped = 0usize;
    let variances = bars
        .iter()
        .map(|bar| {
            let raw = match mode {
                GkMode::LogPrice => {
                    let range = (bar.high / bar.low).ln();
                    let drift = (bar.last / bar.prev_last).ln();
                    0.5 * range * range - 0.386 * drift * drift
                }
                GkMode::RawDifference => {
                    let range = bar.high - bar.low;
                    0.5 * range * range - 0.386 * bar.last * bar.last
                }
            };
            if raw < 0.0 {
                clamped += 1;
                0.0
            } else {
                raw
            }
        })
        .collect();
    GkVariance { variances, clamped }
}

/// Replace each squared volatility `Y` by the rescaled value `A * Y`.
pub fn annualize(records: &[MarketRecord], a: f64) -> Result<Vec<MarketRecord>> {
    scale_variances(records, a, false)
}

/// Inverse of [`annualize`]; the round trip is exact to 1 ulp.
pub fn deannualize(records: &[MarketRecord], a: f64) -> Result<Vec<MarketRecord>> {
    scale_variances(records, a, true)
}

fn scale_variances(records: &[MarketRecord], a: f64, invert: bool) -> Result<Vec<MarketRecord>> {
    if !(a.is_finite() && a > 0.0) {
        return Err(Error::Domain(format!(
            "annualization factor must be positive, got {a}"
        )));
    }
    Ok(records
        .iter()
        .map(|r| MarketRecord {
            squared_vol: if invert {
                r.squared_vol / a
            } else {
                r.squared_vol * a
            },
            ..*r
        })
        .collect())
}

/// Assemble records into a `JointSeries` on the grid `(T, N = count - 1)`.
/// Zero-variance rows are rejected with their index; estimation divides by
/// every variance observation.
pub fn build_joint_series(records: &[MarketRecord], t: f64) -> Result<JointSeries> {
    if records.len() < 3 {
        return Err(Error::SeriesTooShort {
            need: 3,
            got: records.len(),
        });
    }
    let grid = SamplingGrid::new(t, records.len() - 1)?;
    let prices = records.iter().map(|r| r.price).collect();
    let variances: Vec<f64> = records.iter().map(|r| r.squared_vol).collect();
    for (i, &v) in variances.iter().enumerate() {
        if v <= 0.0 {
            return Err(Error::NonPositiveVariance { index: i, value: v });
        }
    }
    JointSeries::new(grid, prices, variances)
}

/// Bars to records: price is the bar's last, variance the Garman-Klass
/// proxy. Zero-variance bars are excluded later by `build_joint_series`.
pub fn records_from_bars(bars: &[OhlcBar], mode: GkMode) -> Result<(Vec<MarketRecord>, usize)> {
    let gk = garman_klass_variance(bars, mode);
    let records = bars
        .iter()
        .zip(&gk.variances)
        .enumerate()
        .map(|(i, (bar, &v))| MarketRecord::new(i, bar.last, v))
        .collect::<Result<Vec<_>>>()?;
    Ok((records, gk.clamped))
}
