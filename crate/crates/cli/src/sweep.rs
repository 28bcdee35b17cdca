//! Convergence sweeps over the sampling-box size.

use homog_core::tensor::{self, Tensor};
use homog_core::upscale::{
    elliptic_tensors_regularized, elliptic_tensors_standard, parabolic_tensors, periodic_reference_tensor,
};
use homog_core::{CgOptions, CoefficientField, HomogError, Method, UpscaleResult};

use crate::config::{ReferencePolicy, SweepConfig};
use crate::error::{CliError, Result};
use crate::record::{write_csv_file, SweepRecord};

#[derive(Debug, Clone)]
pub struct SweepOutput {
    /// Sorted by method, then `q`, then `R`.
    pub records: Vec<SweepRecord>,
    /// Largest ratio of successive discrete energies, aligned with
    /// `records`; `None` for the elliptic methods and failed points.
    pub max_energy_ratio: Vec<Option<f64>>,
    /// Run description, per-point failures and admissibility warnings.
    pub notes: Vec<String>,
    /// The periodic reference, when that policy is used.
    pub reference: Option<Tensor>,
}

struct Job {
    method: Method,
    r: f64,
}

/// One method at one box size, for every configured `q` (a single result
/// for the periodic reference).
pub fn compute_point(cfg: &SweepConfig, field: &CoefficientField, method: Method, r: f64) -> PointResult {
    let cg = CgOptions::default();
    let (dim, n, k_o, qs) = (cfg.dim, cfg.n_per_cell, cfg.k_o, &cfg.qs);
    match method {
        Method::Parabolic => parabolic_tensors(field, dim, r, k_o, qs, n, &cfg.time),
        Method::EllipticStandard => elliptic_tensors_standard(field, dim, r, k_o, qs, n, &cg),
        Method::EllipticRegularized => elliptic_tensors_regularized(field, dim, r, k_o, qs, cfg.t_reg, n, &cg),
        Method::PeriodicReference => Ok(vec![periodic_reference_tensor(field, dim, n, &cg)?]),
    }
}

fn jobs(cfg: &SweepConfig) -> Vec<Job> {
    let mut out = Vec::new();
    for &method in &cfg.methods {
        if method == Method::PeriodicReference {
            out.push(Job { method, r: 1.0 });
        } else {
            out.extend(cfg.r_values.iter().map(|&r| Job { method, r }));
        }
    }
    out
}

type PointResult = std::result::Result<Vec<UpscaleResult>, HomogError>;

#[cfg(feature = "parallel")]
fn run_all<F>(cfg: &SweepConfig, field: &CoefficientField, jobs: &[Job], compute: &F) -> Vec<PointResult>
where
    F: Fn(&SweepConfig, &CoefficientField, Method, f64) -> PointResult + Sync,
{
    use rayon::prelude::*;
    jobs.par_iter().map(|j| compute(cfg, field, j.method, j.r)).collect()
}

#[cfg(not(feature = "parallel"))]
fn run_all<F>(cfg: &SweepConfig, field: &CoefficientField, jobs: &[Job], compute: &F) -> Vec<PointResult>
where
    F: Fn(&SweepConfig, &CoefficientField, Method, f64) -> PointResult + Sync,
{
    jobs.iter().map(|j| compute(cfg, field, j.method, j.r)).collect()
}

/// Runs every (method, R) point, computes errors against the configured
/// reference and writes the CSV when an output path is set. A failing point
/// becomes a NaN row plus a note; the sweep carries on.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepOutput> {
    run_sweep_with(cfg, compute_point)
}

/// [`run_sweep`] with a caller-supplied point solver.
pub fn run_sweep_with<F>(cfg: &SweepConfig, compute: F) -> Result<SweepOutput>
where
    F: Fn(&SweepConfig, &CoefficientField, Method, f64) -> PointResult + Sync,
{
    cfg.validate()?;
    if cfg.methods.contains(&Method::PeriodicReference) && !cfg.coef.is_periodic() {
        return Err(CliError::Config(format!("periodic_reference needs a periodic coefficient, got {}", cfg.coef)));
    }
    let field = cfg.coef.build(cfg.seed, cfg.r_max())?;
    let cg = CgOptions::default();
    let reference = match cfg.reference {
        ReferencePolicy::Periodic => Some(periodic_reference_tensor(&field, cfg.dim, cfg.n_per_cell, &cg)?.a0),
        ReferencePolicy::LargestR => None,
    };

    let mut notes = vec![format!(
        "coef={} reference={} dim={} n={} ko={} seed={} alpha={} beta={}",
        cfg.coef,
        cfg.reference,
        cfg.dim,
        cfg.n_per_cell,
        cfg.k_o,
        cfg.seed,
        field.alpha,
        field.beta
    )];
    if let Some(a) = reference {
        notes.push(format!("reference a0 = {a:?}"));
    }

    let jobs = jobs(cfg);
    let results = run_all(cfg, &field, &jobs, &compute);
    let h = 1.0 / cfg.n_per_cell as f64;
    let mut rows: Vec<(SweepRecord, Option<f64>)> = Vec::new();
    for (job, res) in jobs.iter().zip(results) {
        match res {
            Ok(list) => {
                // the admissibility warnings depend on R only
                if let Some(first) = list.first() {
                    notes.extend(first.warnings.iter().map(|w| format!("warning {} R={}: {w}", first.method, first.r)));
                }
                for r in list {
                    rows.push((SweepRecord::from_result(&r, f64::NAN, cfg.seed), r.max_energy_ratio));
                }
            }
            Err(e) => {
                let qs: Vec<u32> = if job.method == Method::PeriodicReference { vec![0] } else { cfg.qs.clone() };
                for q in qs {
                    notes.push(format!("error {} R={} q={q}: {e}", job.method, job.r));
                    rows.push((SweepRecord::failed(job.method, job.r, q, cfg.k_o, h, cfg.seed), None));
                }
            }
        }
    }

    let refs: Vec<Option<Tensor>> = rows
        .iter()
        .map(|(rec, _)| match reference {
            Some(a) => Some(a),
            None => largest_r_reference(rows.iter().map(|(r, _)| r), rec.method, rec.q),
        })
        .collect();
    for ((rec, _), a_ref) in rows.iter_mut().zip(refs) {
        if let Some(a_ref) = a_ref {
            if rec.a.iter().flatten().all(|v| v.is_finite()) {
                rec.err_fro = tensor::frobenius(&tensor::sub(&rec.a, &a_ref), cfg.dim);
            }
        }
    }
    rows.sort_by(|(a, _), (b, _)| {
        (a.method, a.q).cmp(&(b.method, b.q)).then(a.r.total_cmp(&b.r))
    });
    let (records, max_energy_ratio): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
    let out = SweepOutput { records, max_energy_ratio, notes, reference };
    if let Some(path) = &cfg.out {
        write_csv_file(path, &out.records, &out.notes)?;
    }
    Ok(out)
}

fn largest_r_reference<'a>(
    records: impl Iterator<Item = &'a SweepRecord>,
    method: Method,
    q: u32,
) -> Option<Tensor> {
    records
        .filter(|r| r.method == method && r.q == q && r.a.iter().flatten().all(|v| v.is_finite()))
        .max_by(|a, b| a.r.total_cmp(&b.r))
        .map(|r| r.a)
}
