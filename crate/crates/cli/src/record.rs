//! Sweep records and their CSV form.

use std::io::{Read, Write};
use std::path::Path;

use homog_core::{Method, UpscaleResult};

use crate::error::{CliError, Result};

pub const HEADER: &str =
    "method,R,L,T,q,ko,h,nt,a11,a12,a21,a22,err_fro,dofs,matvecs,walltime_ms,seed";

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub method: Method,
    pub r: f64,
    pub l: f64,
    pub t: f64,
    pub q: u32,
    pub k_o: f64,
    pub h: f64,
    pub nt: usize,
    pub a: [[f64; 2]; 2],
    pub err_fro: f64,
    pub dofs: usize,
    pub matvecs: usize,
    pub walltime_ms: f64,
    pub seed: u64,
}

impl SweepRecord {
    pub fn from_result(res: &UpscaleResult, err_fro: f64, seed: u64) -> Self {
        Self {
            method: res.method,
            r: res.r,
            l: res.l,
            t: res.t,
            q: res.q,
            k_o: res.k_o,
            h: res.h,
            nt: res.n_steps,
            a: res.a0,
            err_fro,
            dofs: res.dofs,
            matvecs: res.matvecs,
            walltime_ms: res.walltime_ms,
            seed,
        }
    }

    /// Placeholder for a point that failed; all numeric outputs are NaN.
    pub fn failed(method: Method, r: f64, q: u32, k_o: f64, h: f64, seed: u64) -> Self {
        Self {
            method,
            r,
            l: f64::NAN,
            t: f64::NAN,
            q,
            k_o,
            h,
            nt: 0,
            a: [[f64::NAN; 2]; 2],
            err_fro: f64::NAN,
            dofs: 0,
            matvecs: 0,
            walltime_ms: f64::NAN,
            seed,
        }
    }

    /// Equality that treats NaN as equal to NaN and ignores wall time.
    pub fn same_numbers(&self, other: &Self) -> bool {
        let eq = |a: f64, b: f64| a == b || (a.is_nan() && b.is_nan());
        self.method == other.method
            && self.q == other.q
            && self.nt == other.nt
            && self.dofs == other.dofs
            && self.matvecs == other.matvecs
            && self.seed == other.seed
            && [self.r, self.l, self.t, self.k_o, self.h, self.err_fro]
                .iter()
                .zip([other.r, other.l, other.t, other.k_o, other.h, other.err_fro])
                .all(|(a, b)| eq(*a, b))
            && self.a.iter().flatten().zip(other.a.iter().flatten()).all(|(a, b)| eq(*a, *b))
    }

    fn to_row(&self) -> String {
        let f = fmt_float;
        [
            self.method.to_string(),
            f(self.r),
            f(self.l),
            f(self.t),
            self.q.to_string(),
            f(self.k_o),
            f(self.h),
            self.nt.to_string(),
            f(self.a[0][0]),
            f(self.a[0][1]),
            f(self.a[1][0]),
            f(self.a[1][1]),
            f(self.err_fro),
            self.dofs.to_string(),
            self.matvecs.to_string(),
            f(self.walltime_ms),
            self.seed.to_string(),
        ]
        .join(",")
    }

    fn from_row(row: &csv::StringRecord) -> Result<Self> {
        if row.len() != 17 {
            return Err(CliError::Csv(format!("expected 17 fields, got {}", row.len())));
        }
        fn num<T: std::str::FromStr>(s: &str, name: &str) -> Result<T> {
            s.trim().parse().map_err(|_| CliError::Csv(format!("bad {name} '{s}'")))
        }
        let g = |i: usize, name: &str| num::<f64>(&row[i], name);
        Ok(Self {
            method: num(&row[0], "method")?,
            r: g(1, "R")?,
            l: g(2, "L")?,
            t: g(3, "T")?,
            q: num(&row[4], "q")?,
            k_o: g(5, "ko")?,
            h: g(6, "h")?,
            nt: num(&row[7], "nt")?,
            a: [[g(8, "a11")?, g(9, "a12")?], [g(10, "a21")?, g(11, "a22")?]],
            err_fro: g(12, "err_fro")?,
            dofs: num(&row[13], "dofs")?,
            matvecs: num(&row[14], "matvecs")?,
            walltime_ms: g(15, "walltime_ms")?,
            seed: num(&row[16], "seed")?,
        })
    }
}

/// 17 significant digits, enough to round-trip every `f64`.
pub fn fmt_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

/// Writes `# ` comment lines, the header and one row per record.
pub fn write_csv<W: Write>(mut w: W, records: &[SweepRecord], comments: &[String]) -> Result<()> {
    for c in comments {
        for line in c.lines() {
            writeln!(w, "# {line}")?;
        }
    }
    writeln!(w, "{HEADER}")?;
    for r in records {
        writeln!(w, "{}", r.to_row())?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv_file(path: &Path, records: &[SweepRecord], comments: &[String]) -> Result<()> {
    let file = std::fs::File::create(path)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?;
    write_csv(std::io::BufWriter::new(file), records, comments)
}

pub fn read_csv<R: Read>(r: R) -> Result<Vec<SweepRecord>> {
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(r);
    let header: Vec<&str> = reader.headers()?.iter().collect();
    if header.join(",") != HEADER {
        return Err(CliError::Csv(format!("unexpected header '{}'", header.join(","))));
    }
    reader.records().map(|row| SweepRecord::from_row(&row?)).collect()
}

pub fn read_csv_file(path: &Path) -> Result<Vec<SweepRecord>> {
    let file = std::fs::File::open(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    read_csv(file)
}
