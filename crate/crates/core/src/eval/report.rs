//! Comma-separated report tables and plot-data files.
//!
//! Every table derives from an [`EvalReport`] (integer counts underneath),
//! carries no timestamps, and orders rows by the report's own sorted
//! breakdowns, so regenerating from the same ledger is byte-identical.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::corpus::Field;

use super::{EvalReport, McnemarMethod, OrderTally, SignificanceEntry};

fn push_tally(out: &mut String, tally: &OrderTally) {
    write!(
        out,
        "{},{:.6},{:.6},{:.6}",
        tally.n(),
        tally.asc_accuracy(),
        tally.desc_accuracy(),
        tally.overall_accuracy()
    )
    .expect("write to string");
}

/// One row per populated dataset cell.
pub fn cell_table_csv(report: &EvalReport) -> String {
    let mut out =
        String::from("field,start_year,year_gap,n,asc_accuracy,desc_accuracy,overall_accuracy\n");
    for row in &report.per_cell {
        write!(out, "{},{},{},", row.field.as_str(), row.start_year, row.year_gap)
            .expect("write to string");
        push_tally(&mut out, &row.tally);
        out.push('\n');
    }
    out
}

/// Per-field marginals.
pub fn field_table_csv(report: &EvalReport) -> String {
    let mut out = String::from("field,n,asc_accuracy,desc_accuracy,overall_accuracy\n");
    for row in &report.per_field {
        write!(out, "{},", row.field.as_str()).expect("write to string");
        push_tally(&mut out, &row.tally);
        out.push('\n');
    }
    out
}

/// Per-gap marginals.
pub fn gap_table_csv(report: &EvalReport) -> String {
    let mut out = String::from("year_gap,n,asc_accuracy,desc_accuracy,overall_accuracy\n");
    for row in &report.per_gap {
        write!(out, "{},", row.year_gap).expect("write to string");
        push_tally(&mut out, &row.tally);
        out.push('\n');
    }
    out
}

fn curve_csv<K: Ord + Copy>(
    report: &EvalReport,
    columns: &[K],
    column_name: impl Fn(K) -> String,
    key: impl Fn(Field, i32) -> K,
) -> String {
    let mut merged: BTreeMap<(i32, K), OrderTally> = BTreeMap::new();
    for row in &report.per_cell {
        merged
            .entry((row.year_gap, key(row.field, row.start_year)))
            .or_default()
            .merge(&row.tally);
    }
    let mut out = String::from("year_gap");
    for &column in columns {
        out.push(',');
        out.push_str(&column_name(column));
    }
    out.push('\n');
    for row in &report.per_gap {
        write!(out, "{}", row.year_gap).expect("write to string");
        for &column in columns {
            out.push(',');
            if let Some(tally) = merged.get(&(row.year_gap, column)) {
                write!(out, "{:.6}", tally.overall_accuracy()).expect("write to string");
            }
        }
        out.push('\n');
    }
    out
}

/// Accuracy versus year gap, one column per field; combinations without
/// trials stay empty.
pub fn gap_field_curve_csv(report: &EvalReport) -> String {
    let fields: Vec<Field> = report.per_field.iter().map(|row| row.field).collect();
    curve_csv(report, &fields, |f| f.as_str().to_string(), |field, _| field)
}

/// Accuracy versus year gap, one column per start year.
pub fn gap_start_year_curve_csv(report: &EvalReport) -> String {
    let years: Vec<i32> = {
        let mut years: Vec<i32> = report.per_cell.iter().map(|row| row.start_year).collect();
        years.sort_unstable();
        years.dedup();
        years
    };
    curve_csv(report, &years, |y| y.to_string(), |_, start_year| start_year)
}

fn method_name(method: McnemarMethod) -> &'static str {
    match method {
        McnemarMethod::ExactBinomial => "exact_binomial",
        McnemarMethod::ChiSquareCorrected => "chi_square_corrected",
    }
}

/// One row per McNemar comparison; the three cell columns are empty for
/// whole-run comparisons.
pub fn significance_table_csv(entries: &[SignificanceEntry]) -> String {
    let mut out =
        String::from("strategy_a,strategy_b,field,start_year,year_gap,b,c,statistic,p_value,method\n");
    for entry in entries {
        let (field, start_year, year_gap) = match entry.cell {
            Some((field, start_year, year_gap)) => {
                (field.as_str().to_string(), start_year.to_string(), year_gap.to_string())
            }
            None => (String::new(), String::new(), String::new()),
        };
        writeln!(
            out,
            "{},{},{},{},{},{},{},{:.6},{:.6},{}",
            entry.strategy_a.as_str(),
            entry.strategy_b.as_str(),
            field,
            start_year,
            year_gap,
            entry.result.b,
            entry.result.c,
            entry.result.statistic,
            entry.result.p_value,
            method_name(entry.result.method)
        )
        .expect("write to string");
    }
    out
}
