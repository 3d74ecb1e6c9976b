//! Reader and writer for period 1x1 tables in the Human Mortality Database layout.
//!
//! A file starts with free-form description lines, then a blank line, then an
//! optional column header (`Year Age Female Male Total`) and whitespace-separated
//! records. The open age group is written `110+`, missing values as `.`.

use std::collections::BTreeMap;
use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::lexis::{Grid, MAX_AGE};
use crate::numeric::fmt_f64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sex {
    Female,
    Male,
    Total,
}

impl Sex {
    fn column(self) -> usize {
        match self {
            Sex::Female => 2,
            Sex::Male => 3,
            Sex::Total => 4,
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "female" | "f" => Some(Sex::Female),
            "male" | "m" => Some(Sex::Male),
            "total" | "t" => Some(Sex::Total),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HmdRecord {
    pub year: i32,
    pub age: i32,
    /// `None` when the file holds the missing marker `.`.
    pub value: Option<f64>,
}

/// One column of a parsed table, in file order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct HmdTable {
    pub records: Vec<HmdRecord>,
}

impl HmdTable {
    /// Keyed lookup `(year, age) -> value`.
    pub fn to_map(&self) -> BTreeMap<(i32, i32), Option<f64>> {
        self.records.iter().map(|r| ((r.year, r.age), r.value)).collect()
    }
}

fn parse_age(tok: &str) -> Option<i32> {
    let tok = tok.strip_suffix('+').unwrap_or(tok);
    let age: i32 = tok.parse().ok()?;
    (0..=MAX_AGE).contains(&age).then_some(age)
}

fn parse_value(tok: &str) -> Option<Option<f64>> {
    if tok == "." {
        return Some(None);
    }
    tok.parse::<f64>().ok().filter(|v| v.is_finite()).map(Some)
}

fn looks_like_record(line: &str) -> bool {
    line.split_whitespace().next().is_some_and(|tok| tok.parse::<i32>().is_ok())
}

/// Parses one sex column from an HMD period 1x1 table.
pub fn parse_hmd_table(text: &str, sex: Sex) -> Result<HmdTable> {
    let mut records = Vec::new();
    let mut in_body = false;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if !in_body {
            if line.is_empty() || !looks_like_record(line) {
                continue;
            }
            in_body = true;
        }
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 5 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected 5 fields (Year Age Female Male Total), found {}", fields.len()),
            });
        }
        let year: i32 = fields[0]
            .parse()
            .map_err(|_| Error::Parse { line: line_no, message: format!("unparsable year '{}'", fields[0]) })?;
        let age = parse_age(fields[1])
            .ok_or_else(|| Error::Parse { line: line_no, message: format!("unparsable age '{}'", fields[1]) })?;
        let tok = fields[sex.column()];
        let value = parse_value(tok)
            .ok_or_else(|| Error::Parse { line: line_no, message: format!("unparsable value '{tok}'") })?;
        records.push(HmdRecord { year, age, value });
    }
    check_contiguous(&records)?;
    Ok(HmdTable { records })
}

/// Years must be consecutive and every year must list the same consecutive ages.
fn check_contiguous(records: &[HmdRecord]) -> Result<()> {
    let mut by_year: BTreeMap<i32, Vec<i32>> = BTreeMap::new();
    for r in records {
        by_year.entry(r.year).or_default().push(r.age);
    }
    let mut prev_year: Option<i32> = None;
    let mut reference: Option<&Vec<i32>> = None;
    for (year, ages) in &by_year {
        if let Some(p) = prev_year {
            if *year != p + 1 {
                return Err(Error::Structure(format!("years jump from {p} to {year}")));
            }
        }
        prev_year = Some(*year);
        for w in ages.windows(2) {
            if w[1] != w[0] + 1 {
                return Err(Error::Structure(format!("year {year}: ages jump from {} to {}", w[0], w[1])));
            }
        }
        match reference {
            None => reference = Some(ages),
            Some(r) if r != ages => {
                return Err(Error::Structure(format!("year {year} covers a different age range than earlier years")))
            }
            _ => {}
        }
    }
    Ok(())
}

/// Writes a grid in HMD layout, repeating the value in all three sex columns.
pub fn write_hmd_table<W: Write>(mut out: W, title: &str, grid: &Grid) -> io::Result<()> {
    writeln!(out, "{title}")?;
    writeln!(out)?;
    writeln!(out, "  Year      Age        Female          Male         Total")?;
    for (t, x, v) in grid.iter() {
        let age = if x == MAX_AGE { "110+".to_string() } else { x.to_string() };
        let v = fmt_f64(v);
        writeln!(out, "  {t}  {age:>6}  {v:>14}  {v:>14}  {v:>14}")?;
    }
    Ok(())
}
