//! Daily sentiment panels: construction, buzz-weighted aggregation of
//! intraday scores and the missing-value fill rule.

use std::collections::BTreeMap;

use chrono::{Datelike, Duration, NaiveDate, Weekday};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    News,
    Social,
}

impl Source {
    pub fn as_str(&self) -> &'static str {
        match self {
            Source::News => "news",
            Source::Social => "social",
        }
    }
}

impl std::fmt::Display for Source {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Source {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "news" => Ok(Source::News),
            "social" => Ok(Source::Social),
            other => Err(Error::Parse(format!("unknown sentiment source '{other}'"))),
        }
    }
}

/// `T × K` daily sentiment. Missing entries are `NaN`.
#[derive(Debug, Clone, PartialEq)]
pub struct SentimentPanel {
    pub values: DMatrix<f64>,
    pub dates: Vec<NaiveDate>,
    pub assets: Vec<String>,
    pub source: Source,
    /// Simulated data may leave `[−1, 1]`.
    pub synthetic: bool,
}

impl SentimentPanel {
    pub fn new(
        values: DMatrix<f64>,
        dates: Vec<NaiveDate>,
        assets: Vec<String>,
        source: Source,
        synthetic: bool,
    ) -> Result<Self> {
        if values.nrows() != dates.len() || values.ncols() != assets.len() {
            return Err(Error::Dimension(format!(
                "panel is {}x{} but has {} dates and {} assets",
                values.nrows(),
                values.ncols(),
                dates.len(),
                assets.len()
            )));
        }
        if let Some(w) = dates.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput(format!(
                "dates not strictly increasing at {}",
                w[1]
            )));
        }
        for j in 0..values.ncols() {
            for t in 0..values.nrows() {
                let v = values[(t, j)];
                if v.is_infinite() {
                    return Err(Error::NonFinite(format!("{} on {}", assets[j], dates[t])));
                }
                if !synthetic && !v.is_nan() && !(-1.0..=1.0).contains(&v) {
                    return Err(Error::InvalidInput(format!(
                        "sentiment {v} for {} on {} is outside [-1, 1]",
                        assets[j], dates[t]
                    )));
                }
            }
        }
        Ok(Self {
            values,
            dates,
            assets,
            source,
            synthetic,
        })
    }

    pub fn n_obs(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_series(&self) -> usize {
        self.values.ncols()
    }

    pub fn missing_fraction(&self) -> Vec<f64> {
        let t = self.n_obs().max(1) as f64;
        (0..self.n_series())
            .map(|j| self.values.column(j).iter().filter(|v| v.is_nan()).count() as f64 / t)
            .collect()
    }

    pub fn is_complete(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Cross-sectional mean `S̄_t` as a one-column panel.
    pub fn cross_section_mean(&self) -> SentimentPanel {
        let k = self.n_series().max(1) as f64;
        let v = DMatrix::from_fn(self.n_obs(), 1, |t, _| self.values.row(t).sum() / k);
        SentimentPanel {
            values: v,
            dates: self.dates.clone(),
            assets: vec!["mean".into()],
            source: self.source,
            synthetic: self.synthetic,
        }
    }

    /// Rows at the given positions.
    pub fn select_rows(&self, rows: &[usize]) -> SentimentPanel {
        SentimentPanel {
            values: DMatrix::from_fn(rows.len(), self.n_series(), |i, j| self.values[(rows[i], j)]),
            dates: rows.iter().map(|&r| self.dates[r]).collect(),
            assets: self.assets.clone(),
            source: self.source,
            synthetic: self.synthetic,
        }
    }
}

/// Weekday calendar of `n` dates starting at the first weekday ≥ `start`.
pub fn business_days(start: NaiveDate, n: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(n);
    let mut d = start;
    while out.len() < n {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d += Duration::days(1);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntradayRecord {
    pub date: NaiveDate,
    /// Minutes after midnight, `0..1440`.
    pub minute: u32,
    pub ticker: String,
    pub score: f64,
    pub buzz: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct IntradaySentiment {
    pub records: Vec<IntradayRecord>,
}

impl IntradaySentiment {
    pub fn validate(&self) -> Result<()> {
        for r in &self.records {
            if !(r.buzz >= 0.0) || !r.buzz.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "buzz {} for {} on {} must be finite and >= 0",
                    r.buzz, r.ticker, r.date
                )));
            }
            if r.minute >= 24 * 60 {
                return Err(Error::InvalidInput(format!("minute {} out of range", r.minute)));
            }
            if !(-1.0..=1.0).contains(&r.score) {
                return Err(Error::InvalidInput(format!(
                    "score {} for {} on {} is outside [-1, 1]",
                    r.score, r.ticker, r.date
                )));
            }
        }
        Ok(())
    }
}

/// Default cut-off: the 4 pm close.
pub const DEFAULT_CUTOFF_HOUR: u32 = 16;

/// Buzz-weighted daily sentiment. Minutes at or after `cutoff_hour` belong
/// to the next day's window. Each window is assigned to the first trading
/// day on or after it when `trading_days` is non-empty, otherwise to its
/// own calendar date. A window whose buzz sums to zero is missing.
pub fn aggregate_daily(
    intraday: &IntradaySentiment,
    cutoff_hour: u32,
    trading_days: &[NaiveDate],
    source: Source,
) -> Result<SentimentPanel> {
    intraday.validate()?;
    if cutoff_hour > 24 {
        return Err(Error::InvalidInput(format!("cut-off hour {cutoff_hour} out of range")));
    }
    let cutoff = cutoff_hour * 60;
    let mut tickers: Vec<String> = intraday.records.iter().map(|r| r.ticker.clone()).collect();
    tickers.sort();
    tickers.dedup();
    let col: BTreeMap<&str, usize> = tickers.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();

    let assign = |r: &IntradayRecord| -> Option<NaiveDate> {
        let day = if r.minute >= cutoff { r.date + Duration::days(1) } else { r.date };
        if trading_days.is_empty() {
            Some(day)
        } else {
            let i = trading_days.partition_point(|d| *d < day);
            trading_days.get(i).copied()
        }
    };

    let days: Vec<NaiveDate> = if trading_days.is_empty() {
        let mut d: Vec<NaiveDate> = intraday.records.iter().filter_map(assign).collect();
        d.sort();
        d.dedup();
        d
    } else {
        trading_days.to_vec()
    };
    let row: BTreeMap<NaiveDate, usize> = days.iter().enumerate().map(|(i, d)| (*d, i)).collect();

    let mut num = DMatrix::<f64>::zeros(days.len(), tickers.len());
    let mut den = DMatrix::<f64>::zeros(days.len(), tickers.len());
    for r in &intraday.records {
        if let Some(d) = assign(r) {
            let (i, j) = (row[&d], col[r.ticker.as_str()]);
            num[(i, j)] += r.buzz * r.score;
            den[(i, j)] += r.buzz;
        }
    }
    let values = DMatrix::from_fn(days.len(), tickers.len(), |i, j| {
        if den[(i, j)] > 0.0 {
            // guards against rounding just past ±1
            (num[(i, j)] / den[(i, j)]).clamp(-1.0, 1.0)
        } else {
            f64::NAN
        }
    });
    SentimentPanel::new(values, days, tickers, source, false)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FillReport {
    pub filled: Vec<(String, usize)>,
}

impl FillReport {
    pub fn total(&self) -> usize {
        self.filled.iter().map(|f| f.1).sum()
    }
}

pub const DEFAULT_FILL_WINDOW: usize = 5;
pub const DEFAULT_MISSING_CAP: f64 = 0.10;

/// Replaces each missing entry by the mean of up to `window` preceding
/// observed values of its column; leading gaps take the first observation.
pub fn fill_missing(
    panel: &SentimentPanel,
    window: usize,
    cap: f64,
) -> Result<(SentimentPanel, FillReport)> {
    if window == 0 {
        return Err(Error::InvalidInput("fill window must be positive".into()));
    }
    let mut out = panel.clone();
    let mut filled = vec![];
    for (j, frac) in panel.missing_fraction().into_iter().enumerate() {
        if frac > cap || (panel.n_obs() > 0 && frac >= 1.0) {
            return Err(Error::InvalidInput(format!(
                "column {} is {:.1}% missing (cap {:.1}%)",
                panel.assets[j],
                100.0 * frac,
                100.0 * cap
            )));
        }
        let col = panel.values.column(j);
        let mut seen: Vec<f64> = Vec::new();
        let first = col.iter().copied().find(|v| !v.is_nan());
        let mut n = 0;
        for t in 0..panel.n_obs() {
            let v = col[t];
            if v.is_nan() {
                let fill = if seen.is_empty() {
                    first.expect("column has an observation")
                } else {
                    let tail = &seen[seen.len().saturating_sub(window)..];
                    tail.iter().sum::<f64>() / tail.len() as f64
                };
                out.values[(t, j)] = fill;
                n += 1;
            } else {
                seen.push(v);
            }
        }
        filled.push((panel.assets[j].clone(), n));
    }
    Ok((out, FillReport { filled }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    fn rec(date: &str, minute: u32, score: f64, buzz: f64) -> IntradayRecord {
        IntradayRecord {
            date: d(date),
            minute,
            ticker: "AXP".into(),
            score,
            buzz,
        }
    }

    #[test]
    fn aggregation_examples() {
        let one = IntradaySentiment { records: vec![rec("2020-01-02", 600, 0.4, 3.0)] };
        let p = aggregate_daily(&one, 16, &[], Source::News).unwrap();
        assert!((p.values[(0, 0)] - 0.4).abs() < 1e-15);

        let two = IntradaySentiment {
            records: vec![rec("2020-01-02", 600, 1.0, 1.0), rec("2020-01-02", 610, -1.0, 3.0)],
        };
        let p = aggregate_daily(&two, 16, &[], Source::News).unwrap();
        assert!((p.values[(0, 0)] + 0.5).abs() < 1e-15);

        let zero = IntradaySentiment { records: vec![rec("2020-01-02", 600, 0.9, 0.0)] };
        let p = aggregate_daily(&zero, 16, &[], Source::News).unwrap();
        assert!(p.values[(0, 0)].is_nan());
    }

    #[test]
    fn after_close_minutes_roll_to_next_trading_day() {
        // Friday 17:00 belongs to Monday's window
        let r = IntradaySentiment { records: vec![rec("2020-01-03", 17 * 60, 0.2, 1.0)] };
        let days = [d("2020-01-03"), d("2020-01-06")];
        let p = aggregate_daily(&r, 16, &days, Source::Social).unwrap();
        assert!(p.values[(0, 0)].is_nan());
        assert!((p.values[(1, 0)] - 0.2).abs() < 1e-15);
    }

    fn col_panel(v: &[f64]) -> SentimentPanel {
        SentimentPanel::new(
            DMatrix::from_column_slice(v.len(), 1, v),
            business_days(d("2020-01-01"), v.len()),
            vec!["X".into()],
            Source::News,
            false,
        )
        .unwrap()
    }

    #[test]
    fn fill_rules() {
        let (p, rep) = fill_missing(&col_panel(&[0.1, 0.2, f64::NAN]), 5, 0.5).unwrap();
        assert!((p.values[(2, 0)] - 0.15).abs() < 1e-15);
        assert_eq!(rep.total(), 1);

        let clean = col_panel(&[0.1, 0.2, 0.3]);
        assert_eq!(fill_missing(&clean, 5, 0.1).unwrap().0, clean);

        let (p, _) = fill_missing(&col_panel(&[f64::NAN, 0.3, 0.1]), 5, 0.5).unwrap();
        assert_eq!(p.values[(0, 0)], 0.3);

        let v = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, f64::NAN];
        let (p, _) = fill_missing(&col_panel(&v), 5, 0.5).unwrap();
        assert!((p.values[(6, 0)] - 0.4).abs() < 1e-12);
    }

    #[test]
    fn fill_cap_names_the_column() {
        let err = fill_missing(&col_panel(&[f64::NAN, f64::NAN, 0.3]), 5, 0.1).unwrap_err();
        assert!(err.to_string().contains('X'));
    }

    #[test]
    fn panel_validation() {
        let bad = SentimentPanel::new(
            DMatrix::from_element(1, 1, 1.5),
            vec![d("2020-01-01")],
            vec!["X".into()],
            Source::News,
            false,
        );
        assert!(bad.is_err());
        let ok = SentimentPanel::new(
            DMatrix::from_element(1, 1, 1.5),
            vec![d("2020-01-01")],
            vec!["X".into()],
            Source::News,
            true,
        );
        assert!(ok.is_ok());
        let dup = SentimentPanel::new(
            DMatrix::zeros(2, 1),
            vec![d("2020-01-01"), d("2020-01-01")],
            vec!["X".into()],
            Source::News,
            false,
        );
        assert!(dup.is_err());
    }
}
