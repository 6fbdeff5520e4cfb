//! Cohort metadata and score tables as comma-separated text.

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const COHORT_COLUMNS: [&str; 6] = ["subject_id", "scan_id", "age", "group", "cdr", "path"];
pub const SCORE_COLUMNS: [&str; 6] = ["scan_id", "region_name", "score_kind", "value", "n_voxels", "quantile"];
pub const CDR_LEVELS: [f64; 4] = [0.0, 0.5, 1.0, 2.0];

/// Formats a real with 6 significant digits, like C's `%.6g`.
pub fn format_sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{:.5e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("exponent digits");
    if !(-5..6).contains(&exp) {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{mantissa}e{sign}{:02}", exp.abs());
    }
    let decimals = (5 - exp).max(0) as usize;
    trim_zeros(&format!("{:.*}", decimals, x)).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Group {
    CN,
    AD,
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Group::CN => "CN",
            Group::AD => "AD",
        })
    }
}

impl FromStr for Group {
    type Err = ();
    fn from_str(s: &str) -> std::result::Result<Self, ()> {
        match s.trim() {
            "CN" | "cn" => Ok(Group::CN),
            "AD" | "ad" => Ok(Group::AD),
            _ => Err(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CohortRow {
    pub subject_id: String,
    pub scan_id: String,
    pub age: f64,
    pub group: Group,
    pub cdr: f64,
    pub path: String,
}

impl CohortRow {
    /// Analysis stratum: `CN`, or `CDR<x>` for disease subjects.
    pub fn stratum(&self) -> String {
        match self.group {
            Group::CN => "CN".to_string(),
            Group::AD => format!("CDR{}", format_sig6(self.cdr)),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CohortTable {
    pub rows: Vec<CohortRow>,
}

impl CohortTable {
    /// Checks the table-level invariants; `line` numbers count the header as 1.
    pub fn validate(&self, path: &Path) -> Result<()> {
        let mut seen = HashSet::new();
        for (i, r) in self.rows.iter().enumerate() {
            let line = i as u64 + 2;
            let fail = |detail: String| Error::Validation { path: path.to_path_buf(), line, detail };
            if !(r.age > 0.0 && r.age.is_finite()) {
                return Err(fail(format!("age {} must be positive", r.age)));
            }
            if !CDR_LEVELS.contains(&r.cdr) {
                return Err(fail(format!("cdr {} not in {{0, 0.5, 1, 2}}", r.cdr)));
            }
            if r.group == Group::CN && r.cdr != 0.0 {
                return Err(fail(format!("CN scan {} has cdr {}, CN requires cdr 0", r.scan_id, r.cdr)));
            }
            if !seen.insert((r.subject_id.as_str(), r.scan_id.as_str())) {
                return Err(fail(format!("duplicate (subject_id, scan_id) = ({}, {})", r.subject_id, r.scan_id)));
            }
        }
        Ok(())
    }

    pub fn find(&self, scan_id: &str) -> Option<&CohortRow> {
        self.rows.iter().find(|r| r.scan_id == scan_id)
    }
}

fn column_indices<const N: usize>(
    headers: &csv::StringRecord,
    names: [&str; N],
    path: &Path,
) -> Result<[usize; N]> {
    let mut idx = [0usize; N];
    for (k, name) in names.iter().enumerate() {
        idx[k] = headers
            .iter()
            .position(|h| h.trim() == *name)
            .ok_or_else(|| Error::MissingColumn { path: path.to_path_buf(), column: name.to_string() })?;
    }
    Ok(idx)
}

fn parse_field<T: FromStr>(rec: &csv::StringRecord, i: usize, field: &'static str, path: &Path) -> Result<T> {
    let raw = rec.get(i).unwrap_or("");
    raw.trim().parse().map_err(|_| Error::Parse {
        path: path.to_path_buf(),
        line: rec.position().map_or(0, |p| p.line()),
        field,
        value: raw.to_string(),
    })
}

pub fn read_cohort_csv(path: impl AsRef<Path>) -> Result<CohortTable> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let headers = reader.headers()?.clone();
    let [sid, scan, age, group, cdr, p] = column_indices(&headers, COHORT_COLUMNS, path)?;
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        rows.push(CohortRow {
            subject_id: rec.get(sid).unwrap_or("").to_string(),
            scan_id: rec.get(scan).unwrap_or("").to_string(),
            age: parse_field(&rec, age, "age", path)?,
            group: parse_field(&rec, group, "group", path)?,
            cdr: parse_field(&rec, cdr, "cdr", path)?,
            path: rec.get(p).unwrap_or("").to_string(),
        });
    }
    let table = CohortTable { rows };
    table.validate(path)?;
    Ok(table)
}

pub fn write_cohort_csv(table: &CohortTable, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path)?;
    w.write_record(COHORT_COLUMNS)?;
    for r in &table.rows {
        w.write_record([
            r.subject_id.clone(),
            r.scan_id.clone(),
            format_sig6(r.age),
            r.group.to_string(),
            format_sig6(r.cdr),
            r.path.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ScoreKind {
    AS,
    ADS,
}

impl fmt::Display for ScoreKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScoreKind::AS => "AS",
            ScoreKind::ADS => "ADS",
        })
    }
}

impl FromStr for ScoreKind {
    type Err = ();
    fn from_str(s: &str) -> std::result::Result<Self, ()> {
        match s.trim() {
            "AS" => Ok(ScoreKind::AS),
            "ADS" => Ok(ScoreKind::ADS),
            _ => Err(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionScoreRow {
    pub scan_id: String,
    pub region_name: String,
    pub score_kind: ScoreKind,
    pub value: f64,
    pub n_voxels: usize,
    pub quantile: f64,
}

pub fn write_scores_csv(rows: &[RegionScoreRow], path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path)?;
    w.write_record(SCORE_COLUMNS)?;
    for r in rows {
        w.write_record([
            r.scan_id.clone(),
            r.region_name.clone(),
            r.score_kind.to_string(),
            format_sig6(r.value),
            r.n_voxels.to_string(),
            format_sig6(r.quantile),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_scores_csv(path: impl AsRef<Path>) -> Result<Vec<RegionScoreRow>> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let headers = reader.headers()?.clone();
    let [scan, region, kind, value, n, q] = column_indices(&headers, SCORE_COLUMNS, path)?;
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let row = RegionScoreRow {
            scan_id: rec.get(scan).unwrap_or("").to_string(),
            region_name: rec.get(region).unwrap_or("").to_string(),
            score_kind: parse_field(&rec, kind, "score_kind", path)?,
            value: parse_field(&rec, value, "value", path)?,
            n_voxels: parse_field(&rec, n, "n_voxels", path)?,
            quantile: parse_field(&rec, q, "quantile", path)?,
        };
        let line = rec.position().map_or(0, |p| p.line());
        if row.n_voxels == 0 {
            return Err(Error::Validation { path: path.to_path_buf(), line, detail: "n_voxels must be positive".into() });
        }
        if !(0.0..=0.9 + 1e-12).contains(&row.quantile) {
            return Err(Error::Validation {
                path: path.to_path_buf(),
                line,
                detail: format!("quantile {} outside [0, 0.9]", row.quantile),
            });
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Writes a plain table of pre-formatted cells with LF line endings.
pub fn write_table(path: impl AsRef<Path>, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Appends raw text, used for small logs.
pub fn write_text(path: impl AsRef<Path>, text: &str) -> Result<()> {
    let mut f = File::create(path)?;
    f.write_all(text.as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    const VALID: &str = "subject_id,scan_id,age,group,cdr,path\n\
                         s1,s1_a,61.5,CN,0,a.nii\n\
                         s2,s2_a,74,AD,0.5,b.nii\n";

    #[test]
    fn sig6_formatting() {
        assert_eq!(format_sig6(0.0), "0");
        assert_eq!(format_sig6(1.0), "1");
        assert_eq!(format_sig6(0.5), "0.5");
        assert_eq!(format_sig6(123.456789), "123.457");
        assert_eq!(format_sig6(-0.000123456789), "-0.000123457");
        assert_eq!(format_sig6(1234567.0), "1.23457e+06");
        assert_eq!(format_sig6(1.5e-7), "1.5e-07");
        assert_eq!(format_sig6(999999.5), "1e+06");
        assert_eq!(format_sig6(0.1 + 0.2), "0.3");
    }

    #[test]
    fn reads_valid_cohort() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        fs::write(&path, VALID).unwrap();
        let t = read_cohort_csv(&path).unwrap();
        assert_eq!(t.rows.len(), 2);
        assert_eq!(t.rows[1].group, Group::AD);
        assert_eq!(t.rows[1].cdr, 0.5);
        assert_eq!(t.rows[1].stratum(), "CDR0.5");

        let out = dir.path().join("c2.csv");
        write_cohort_csv(&t, &out).unwrap();
        assert_eq!(read_cohort_csv(&out).unwrap(), t);
    }

    #[test]
    fn cohort_validation_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");

        fs::write(&path, "subject_id,scan_id,age,group,path\ns1,a,60,CN,x\n").unwrap();
        assert!(matches!(read_cohort_csv(&path), Err(Error::MissingColumn { column, .. }) if column == "cdr"));

        fs::write(&path, "subject_id,scan_id,age,group,cdr,path\ns1,a,sixty,CN,0,x\n").unwrap();
        assert!(matches!(read_cohort_csv(&path), Err(Error::Parse { field: "age", line: 2, .. })));

        fs::write(&path, "subject_id,scan_id,age,group,cdr,path\ns1,a,60,CN,?,x\n").unwrap();
        assert!(matches!(read_cohort_csv(&path), Err(Error::Parse { field: "cdr", .. })));

        fs::write(&path, "subject_id,scan_id,age,group,cdr,path\ns1,a,60,CN,0.5,x\n").unwrap();
        assert!(matches!(read_cohort_csv(&path), Err(Error::Validation { line: 2, .. })));

        fs::write(&path, "subject_id,scan_id,age,group,cdr,path\ns1,a,60,CN,0,x\ns1,a,61,CN,0,y\n").unwrap();
        assert!(matches!(read_cohort_csv(&path), Err(Error::Validation { line: 3, .. })));

        fs::write(&path, "subject_id,scan_id,age,group,cdr,path\ns1,a,-3,AD,1,x\n").unwrap();
        assert!(matches!(read_cohort_csv(&path), Err(Error::Validation { .. })));
    }

    #[test]
    fn scores_roundtrip_and_stable_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let rows = vec![
            RegionScoreRow {
                scan_id: "s1".into(),
                region_name: "ventricles".into(),
                score_kind: ScoreKind::AS,
                value: 12.3456789,
                n_voxels: 412,
                quantile: 0.3,
            },
            RegionScoreRow {
                scan_id: "s1".into(),
                region_name: "ventricles".into(),
                score_kind: ScoreKind::ADS,
                value: 0.25,
                n_voxels: 412,
                quantile: 0.3,
            },
        ];
        let a = dir.path().join("a.csv");
        let b = dir.path().join("b.csv");
        write_scores_csv(&rows, &a).unwrap();
        write_scores_csv(&rows, &b).unwrap();
        let text = fs::read_to_string(&a).unwrap();
        assert_eq!(
            text,
            "scan_id,region_name,score_kind,value,n_voxels,quantile\n\
             s1,ventricles,AS,12.3457,412,0.3\n\
             s1,ventricles,ADS,0.25,412,0.3\n"
        );
        assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
        let back = read_scores_csv(&a).unwrap();
        assert_eq!(back[1], rows[1]);
        assert_eq!(back[0].value, 12.3457);
    }
}
