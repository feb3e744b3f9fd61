//! File formats: measures, cube sets, field samples, and the key=value
//! report blocks emitted by the certificate printers.
//!
//! All floats are written with 17 significant digits so read/write round
//! trips are exact at binary64 precision.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::dyadic::CubeSet;
use crate::error::{Error, Result};
use crate::measure::AtomicMeasure;

/// 17 significant digits; parses back to the identical binary64.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_f64(tok: &str, line: usize) -> Result<f64> {
    let v: f64 = tok
        .parse()
        .map_err(|_| Error::Parse { line, msg: format!("bad number {tok:?}") })?;
    if !v.is_finite() {
        return Err(Error::Parse { line, msg: format!("non-finite number {tok:?}") });
    }
    Ok(v)
}

fn parse_i64(tok: &str, line: usize) -> Result<i64> {
    tok.parse()
        .map_err(|_| Error::Parse { line, msg: format!("bad integer {tok:?}") })
}

/// Strips `#` comments; returns None for blank lines.
fn data_line(raw: &str) -> Option<&str> {
    let stripped = match raw.find('#') {
        Some(pos) => &raw[..pos],
        None => raw,
    };
    let trimmed = stripped.trim();
    if trimmed.is_empty() {
        None
    } else {
        Some(trimmed)
    }
}

fn header_field<'a>(tok: Option<&'a str>, key: &str, line: usize) -> Result<&'a str> {
    let tok = tok.ok_or_else(|| Error::Parse { line, msg: format!("missing {key}=<...>") })?;
    tok.strip_prefix(key)
        .and_then(|rest| rest.strip_prefix('='))
        .ok_or_else(|| Error::Parse { line, msg: format!("expected {key}=<...>, got {tok:?}") })
}

pub fn write_measure<W: Write>(mu: &AtomicMeasure, mut w: W) -> Result<()> {
    writeln!(w, "MEAS n={} rmin={}", mu.dim(), fmt_f64(mu.r_min()))?;
    for (pos, mass) in mu.atoms() {
        for c in pos {
            write!(w, "{} ", fmt_f64(*c))?;
        }
        writeln!(w, "{}", fmt_f64(mass))?;
    }
    Ok(())
}

pub fn read_measure<R: BufRead>(r: R) -> Result<AtomicMeasure> {
    let mut n: Option<usize> = None;
    let mut r_min = 0.0f64;
    let mut atoms: Vec<(Vec<f64>, f64)> = Vec::new();
    for (i, raw) in r.lines().enumerate() {
        let line_no = i + 1;
        let raw = raw?;
        let Some(line) = data_line(&raw) else { continue };
        let mut toks = line.split_whitespace();
        if n.is_none() {
            let tag = toks.next();
            if tag != Some("MEAS") {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("expected MEAS header, got {tag:?}"),
                });
            }
            let n_val: usize = header_field(toks.next(), "n", line_no)?
                .parse()
                .map_err(|_| Error::Parse { line: line_no, msg: "bad n".into() })?;
            r_min = parse_f64(header_field(toks.next(), "rmin", line_no)?, line_no)?;
            if n_val == 0 {
                return Err(Error::Parse { line: line_no, msg: "n must be >= 1".into() });
            }
            n = Some(n_val);
            continue;
        }
        let n = n.unwrap();
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != n + 1 {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected {} fields (n coords + mass), got {}", n + 1, toks.len()),
            });
        }
        let pos: Vec<f64> = toks[..n]
            .iter()
            .map(|t| parse_f64(t, line_no))
            .collect::<Result<_>>()?;
        let mass = parse_f64(toks[n], line_no)?;
        if mass <= 0.0 {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("atom mass must be > 0, got {mass}"),
            });
        }
        atoms.push((pos, mass));
    }
    let n = n.ok_or(Error::Parse { line: 0, msg: "missing MEAS header".into() })?;
    AtomicMeasure::new(n, atoms, r_min)
}

pub fn save_measure(mu: &AtomicMeasure, path: impl AsRef<Path>) -> Result<()> {
    write_measure(mu, BufWriter::new(File::create(path)?))
}

pub fn load_measure(path: impl AsRef<Path>) -> Result<AtomicMeasure> {
    read_measure(BufReader::new(File::open(path)?))
}

pub fn write_cubeset<W: Write>(set: &CubeSet, mut w: W) -> Result<()> {
    writeln!(w, "CUBES n={} level={}", set.dim(), set.level())?;
    for idx in set.members() {
        let line: Vec<String> = idx.iter().map(|i| i.to_string()).collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    Ok(())
}

pub fn read_cubeset<R: BufRead>(r: R) -> Result<CubeSet> {
    let mut set: Option<CubeSet> = None;
    for (i, raw) in r.lines().enumerate() {
        let line_no = i + 1;
        let raw = raw?;
        let Some(line) = data_line(&raw) else { continue };
        let mut toks = line.split_whitespace();
        match set.as_mut() {
            None => {
                let tag = toks.next();
                if tag != Some("CUBES") {
                    return Err(Error::Parse {
                        line: line_no,
                        msg: format!("expected CUBES header, got {tag:?}"),
                    });
                }
                let n: usize = header_field(toks.next(), "n", line_no)?
                    .parse()
                    .map_err(|_| Error::Parse { line: line_no, msg: "bad n".into() })?;
                let level: u32 = header_field(toks.next(), "level", line_no)?
                    .parse()
                    .map_err(|_| Error::Parse { line: line_no, msg: "bad level".into() })?;
                set = Some(CubeSet::new(n, level)?);
            }
            Some(set) => {
                let idx: Vec<i64> = line
                    .split_whitespace()
                    .map(|t| parse_i64(t, line_no))
                    .collect::<Result<_>>()?;
                if idx.len() != set.dim() {
                    return Err(Error::Parse {
                        line: line_no,
                        msg: format!("expected {} indices, got {}", set.dim(), idx.len()),
                    });
                }
                set.insert(idx)?;
            }
        }
    }
    set.ok_or(Error::Parse { line: 0, msg: "missing CUBES header".into() })
}

pub fn save_cubeset(set: &CubeSet, path: impl AsRef<Path>) -> Result<()> {
    write_cubeset(set, BufWriter::new(File::create(path)?))
}

pub fn load_cubeset(path: impl AsRef<Path>) -> Result<CubeSet> {
    read_cubeset(BufReader::new(File::open(path)?))
}

/// Field samples: header `x1,...,xn,f1,...,fn`, one comma-separated row
/// of 2n decimals per evaluation point.
pub fn write_field_samples<W: Write>(points: &[Vec<f64>], values: &[Vec<f64>], mut w: W) -> Result<()> {
    if points.len() != values.len() {
        return Err(Error::DimensionMismatch { expected: points.len(), got: values.len() });
    }
    let n = points.first().map_or(0, Vec::len);
    let header: Vec<String> = (1..=n)
        .map(|j| format!("x{j}"))
        .chain((1..=n).map(|j| format!("f{j}")))
        .collect();
    writeln!(w, "{}", header.join(","))?;
    for (p, v) in points.iter().zip(values) {
        let row: Vec<String> = p.iter().chain(v.iter()).map(|x| fmt_f64(*x)).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn read_field_samples<R: BufRead>(r: R) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let mut lines = r.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or(Error::Parse { line: 0, msg: "missing field header".into() })?;
    let header = header?;
    let cols = header.split(',').count();
    if cols == 0 || cols % 2 != 0 {
        return Err(Error::Parse { line: 1, msg: format!("expected 2n columns, got {cols}") });
    }
    let n = cols / 2;
    let mut points = Vec::new();
    let mut values = Vec::new();
    for (i, raw) in lines {
        let line_no = i + 1;
        let raw = raw?;
        let Some(line) = data_line(&raw) else { continue };
        let toks: Vec<&str> = line.split(',').collect();
        if toks.len() != cols {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected {cols} columns, got {}", toks.len()),
            });
        }
        let row: Vec<f64> = toks
            .iter()
            .map(|t| parse_f64(t.trim(), line_no))
            .collect::<Result<_>>()?;
        points.push(row[..n].to_vec());
        values.push(row[n..].to_vec());
    }
    Ok((points, values))
}

/// Ordered key=value block used by every certificate and CLI report.
#[derive(Debug, Clone, Default)]
pub struct ReportBlock {
    entries: Vec<(String, String)>,
}

impl ReportBlock {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl Into<String>) -> &mut Self {
        self.entries.push((key.into(), value.into()));
        self
    }

    pub fn push_f64(&mut self, key: impl Into<String>, value: f64) -> &mut Self {
        self.push(key, fmt_f64(value))
    }

    pub fn push_point(&mut self, key: impl Into<String>, point: &[f64]) -> &mut Self {
        let joined: Vec<String> = point.iter().map(|c| fmt_f64(*c)).collect();
        self.push(key, joined.join(","))
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }
}

impl std::fmt::Display for ReportBlock {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (k, v) in &self.entries {
            writeln!(f, "{k}={v}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::gen_four_corner_cantor;
    use proptest::prelude::*;

    #[test]
    fn measure_roundtrip_identity() {
        let mu = AtomicMeasure::new(
            2,
            vec![
                (vec![0.1, -0.25], 0.5),
                (vec![1.0 / 3.0, 2f64.sqrt()], 1e-9),
                (vec![0.7, 0.7], 3.25),
            ],
            1.0 / 128.0,
        )
        .unwrap();
        let mut buf = Vec::new();
        write_measure(&mu, &mut buf).unwrap();
        let back = read_measure(buf.as_slice()).unwrap();
        assert_eq!(mu, back);
    }

    #[test]
    fn measure_header_arity_mismatch_rejected() {
        let text = "MEAS n=3 rmin=1e-2\n0.5 0.5 1.0\n";
        let err = read_measure(text.as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn measure_zero_mass_rejected() {
        let text = "MEAS n=2 rmin=1e-2\n0.5 0.5 0.0\n";
        let err = read_measure(text.as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn measure_non_finite_rejected() {
        let text = "MEAS n=2 rmin=1e-2\n0.5 inf 1.0\n";
        assert!(read_measure(text.as_bytes()).is_err());
    }

    #[test]
    fn comments_and_blanks_are_skipped() {
        let text = "# a measure\nMEAS n=1 rmin=1e-3\n\n0.5 1.0 # the atom\n";
        let mu = read_measure(text.as_bytes()).unwrap();
        assert_eq!(mu.len(), 1);
        assert_eq!(mu.mass(0), 1.0);
    }

    #[test]
    fn cubeset_roundtrip() {
        let set = gen_four_corner_cantor(0.25, 3).unwrap();
        let mut buf = Vec::new();
        write_cubeset(&set, &mut buf).unwrap();
        let back = read_cubeset(buf.as_slice()).unwrap();
        assert_eq!(set, back);
    }

    #[test]
    fn field_samples_roundtrip() {
        let points = vec![vec![0.0, 1.0], vec![0.5, -0.5]];
        let values = vec![vec![1.0 / 3.0, 0.0], vec![-2e-8, 7.5]];
        let mut buf = Vec::new();
        write_field_samples(&points, &values, &mut buf).unwrap();
        let (p, v) = read_field_samples(buf.as_slice()).unwrap();
        assert_eq!(p, points);
        assert_eq!(v, values);
    }

    #[test]
    fn report_block_is_ordered() {
        let mut b = ReportBlock::new();
        b.push("kind", "cond1").push_f64("sup", 0.5).push("pass", "true");
        assert_eq!(b.to_string(), format!("kind=cond1\nsup={}\npass=true\n", fmt_f64(0.5)));
    }

    proptest! {
        #[test]
        fn fmt_f64_roundtrips(x in proptest::num::f64::NORMAL | proptest::num::f64::ZERO) {
            let s = fmt_f64(x);
            let back: f64 = s.parse().unwrap();
            prop_assert_eq!(x.to_bits(), back.to_bits());
        }
    }
}
