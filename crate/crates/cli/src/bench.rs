//! Cost to reach a target accuracy: for each tolerance, the smallest swept
//! `R` at which a method's error drops below it.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use homog_core::Method;

use crate::error::{CliError, Result};
use crate::record::{fmt_float, SweepRecord};
use crate::sweep::{run_sweep, SweepOutput};
use crate::config::SweepConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub method: Method,
    pub q: u32,
    pub tol: f64,
    /// `None` when no swept `R` reaches the tolerance.
    pub r: Option<f64>,
    pub err_fro: f64,
    pub dofs: usize,
    pub matvecs: usize,
    pub walltime_ms: f64,
}

impl BenchRow {
    pub fn reachable(&self) -> bool {
        self.r.is_some()
    }
}

pub fn cost_table(records: &[SweepRecord], tols: &[f64]) -> Vec<BenchRow> {
    let mut groups: BTreeMap<(Method, u32), Vec<&SweepRecord>> = BTreeMap::new();
    for r in records {
        groups.entry((r.method, r.q)).or_default().push(r);
    }
    let mut out = Vec::new();
    for ((method, q), mut recs) in groups {
        recs.sort_by(|a, b| a.r.total_cmp(&b.r));
        for &tol in tols {
            let hit = recs.iter().find(|r| r.err_fro.is_finite() && r.err_fro <= tol);
            out.push(match hit {
                Some(r) => BenchRow {
                    method,
                    q,
                    tol,
                    r: Some(r.r),
                    err_fro: r.err_fro,
                    dofs: r.dofs,
                    matvecs: r.matvecs,
                    walltime_ms: r.walltime_ms,
                },
                None => BenchRow {
                    method,
                    q,
                    tol,
                    r: None,
                    err_fro: f64::NAN,
                    dofs: 0,
                    matvecs: 0,
                    walltime_ms: f64::NAN,
                },
            });
        }
    }
    out
}

pub fn run_bench(cfg: &SweepConfig, tols: &[f64]) -> Result<(SweepOutput, Vec<BenchRow>)> {
    if tols.is_empty() {
        return Err(CliError::Config("bench needs at least one tolerance".into()));
    }
    if let Some(t) = tols.iter().find(|t| !(**t > 0.0)) {
        return Err(CliError::Config(format!("tolerances must be positive, got {t}")));
    }
    let sweep = run_sweep(cfg)?;
    let rows = cost_table(&sweep.records, tols);
    Ok((sweep, rows))
}

pub const BENCH_HEADER: &str = "method,q,tol,R,err_fro,dofs,matvecs,walltime_ms,status";

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut s = format!("{BENCH_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            r.method,
            r.q,
            fmt_float(r.tol),
            r.r.map_or_else(|| "NaN".to_string(), fmt_float),
            fmt_float(r.err_fro),
            r.dofs,
            r.matvecs,
            fmt_float(r.walltime_ms),
            if r.reachable() { "reached" } else { "unreachable" }
        );
    }
    s
}

pub fn bench_text(rows: &[BenchRow]) -> String {
    let mut s = format!(
        "{:<22} {:>3} {:>10} {:>6} {:>10} {:>10} {:>12}\n",
        "method", "q", "tol", "R", "dofs", "matvecs", "walltime_ms"
    );
    for r in rows {
        match r.r {
            Some(rr) => {
                let _ = writeln!(
                    s,
                    "{:<22} {:>3} {:>10.1e} {:>6} {:>10} {:>10} {:>12.1}",
                    r.method.as_str(), r.q, r.tol, rr, r.dofs, r.matvecs, r.walltime_ms
                );
            }
            None => {
                let _ = writeln!(s, "{:<22} {:>3} {:>10.1e} {:>6}", r.method.as_str(), r.q, r.tol, "unreachable");
            }
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(r: f64, err: f64, matvecs: usize) -> SweepRecord {
        let mut rec = SweepRecord::failed(Method::Parabolic, r, 3, 0.5, 0.1, 0);
        rec.err_fro = err;
        rec.matvecs = matvecs;
        rec.dofs = (r * 10.0) as usize;
        rec
    }

    #[test]
    fn smallest_r_meeting_tolerance() {
        let recs = vec![rec(4.0, 1e-2, 10), rec(6.0, 1e-4, 30), rec(8.0, 1e-5, 60)];
        let rows = cost_table(&recs, &[1e-3, 1e-7]);
        assert_eq!(rows[0].r, Some(6.0));
        assert_eq!(rows[0].matvecs, 30);
        assert!(!rows[1].reachable());
        assert!(bench_csv(&rows).contains("unreachable"));
        assert!(bench_text(&rows).contains("unreachable"));
    }
}
