//! Date alignment across inputs.

use chrono::NaiveDate;
use mlss_core::io::{inner_join, JoinReport};

use crate::{CliError, CliResult};

/// Inner join of the named calendars. Dates dropped before the first or
/// after the last common date are reported; a date missing from some input
/// inside the common range is a hard error.
pub fn align(inputs: &[(&str, &[NaiveDate])]) -> CliResult<(Vec<NaiveDate>, Vec<Vec<usize>>, JoinReport)> {
    let cals: Vec<&[NaiveDate]> = inputs.iter().map(|i| i.1).collect();
    let (dates, rows, report) = inner_join(&cals).map_err(|e| CliError::Validation(e.to_string()))?;
    let (Some(&lo), Some(&hi)) = (dates.first(), dates.last()) else {
        return Err(CliError::Validation("inputs share no dates".into()));
    };
    let mut bad = Vec::new();
    for ((name, _), dropped) in inputs.iter().zip(&report.dropped) {
        let inside: Vec<String> = dropped
            .iter()
            .filter(|d| **d > lo && **d < hi)
            .map(|d| d.to_string())
            .collect();
        if !inside.is_empty() {
            let shown = inside.iter().take(10).cloned().collect::<Vec<_>>().join(", ");
            let more = if inside.len() > 10 { format!(" (+{} more)", inside.len() - 10) } else { String::new() };
            bad.push(format!("{name} has {} date(s) absent from other inputs: {shown}{more}", inside.len()));
        }
    }
    if !bad.is_empty() {
        return Err(CliError::Validation(format!("date misalignment: {}", bad.join("; "))));
    }
    Ok((dates, rows, report))
}

/// One line per input that lost rows at the edges.
pub fn describe(names: &[&str], report: &JoinReport) -> Vec<String> {
    names
        .iter()
        .zip(&report.dropped)
        .filter(|(_, d)| !d.is_empty())
        .map(|(n, d)| format!("{n}: {} edge row(s) dropped by date alignment", d.len()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use mlss_core::models::business_days;

    #[test]
    fn edges_pass_interior_gaps_fail() {
        let a = business_days(NaiveDate::from_ymd_opt(2020, 1, 6).unwrap(), 10);
        let b = a[1..].to_vec();
        let (d, rows, rep) = align(&[("a", &a), ("b", &b)]).unwrap();
        assert_eq!(d.len(), 9);
        assert_eq!(rows[0][0], 1);
        assert_eq!(describe(&["a", "b"], &rep).len(), 1);
        let mut c = a.clone();
        c.remove(4);
        let err = align(&[("a", &a), ("c", &c)]).unwrap_err().to_string();
        assert!(err.contains(&a[4].to_string()), "{err}");
    }
}
