//! Reference data shipped with the binary.

use kspace_core::ledger::TableExport;
use kspace_core::Bits;

pub const UNIFORM_N3: &str = include_str!("../fixtures/uniform_n3.tsv");
pub const ALTERNATING_N3: &str = include_str!("../fixtures/alternating_n3.tsv");
pub const ECHO_TIMES: &str = include_str!("../fixtures/echo_times.tsv");
pub const PEAK_COUNTS: &str = include_str!("../fixtures/peak_counts.tsv");

fn records(text: &str) -> impl Iterator<Item = Vec<&str>> {
    text.lines().map(str::trim_end).filter(|l| !l.is_empty() && !l.starts_with('#')).map(|l| l.split('\t').collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureTable {
    pub headers: Vec<String>,
    pub rows: Vec<(Bits, Vec<i64>)>,
}

pub fn parse_table(text: &str) -> FixtureTable {
    let mut it = records(text);
    let headers = it.next().expect("fixture header")[1..].iter().map(|s| s.to_string()).collect();
    let rows = it
        .map(|r| {
            let alpha: Bits = r[0].parse().expect("fixture subspace");
            (alpha, r[1..].iter().map(|v| v.parse().expect("fixture winding")).collect())
        })
        .collect();
    FixtureTable { headers, rows }
}

/// Differences between an exported ledger table and a fixture, empty when equal.
pub fn compare_table(got: &TableExport, want: &FixtureTable) -> Vec<String> {
    let mut out = Vec::new();
    if got.headers != want.headers {
        out.push(format!("columns {:?} != {:?}", got.headers, want.headers));
    }
    if got.rows.len() != want.rows.len() {
        out.push(format!("{} rows, expected {}", got.rows.len(), want.rows.len()));
    }
    for (g, (alpha, w)) in got.rows.iter().zip(&want.rows) {
        if &g.subspace != alpha || &g.windings != w {
            out.push(format!("row {}: {:?} != {alpha} {:?}", g.subspace, g.windings, w));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct EchoRow {
    pub n: usize,
    pub subspace: Bits,
    pub time: f64,
}

pub fn echo_times() -> Vec<EchoRow> {
    records(ECHO_TIMES)
        .map(|r| EchoRow {
            n: r[0].parse().expect("echo index"),
            subspace: r[1].parse().expect("echo subspace"),
            time: r[2].parse().expect("echo time"),
        })
        .collect()
}

pub fn peak_counts() -> Vec<usize> {
    records(PEAK_COUNTS).map(|r| r[1].parse().expect("peak count")).collect()
}
