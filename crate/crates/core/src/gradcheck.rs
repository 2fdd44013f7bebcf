//! Finite-difference verification of analytic gradients.
//!
//! For every trainable parameter (up to `max_coords` seeded coordinates per
//! tensor) the analytic gradient from one backward pass is compared with the
//! central difference `(f(θ+ε) − f(θ−ε)) / 2ε`. The error measure is
//!
//! ```text
//! |analytic − numeric| / max(|analytic|, |numeric|, floor)
//! ```
//!
//! where `floor` keeps coordinates whose true gradient is ~0 from turning
//! round-off into huge relative errors.
//!
//! A coordinate whose perturbation moves some rectifier input across zero is
//! not differentiable along that segment; it is skipped and counted.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::autodiff::{Graph, Var};
use crate::error::{Error, Result};
use crate::params::{ParamId, ParamStore};
use crate::rng::{streams, RngStream};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradCheckConfig {
    pub eps: f64,
    pub tol: f64,
    pub floor: f64,
    pub max_coords: usize,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            eps: 1e-4,
            tol: 1e-4,
            floor: 1e-6,
            max_coords: 64,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoordFailure {
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_err: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamReport {
    pub name: String,
    pub checked: usize,
    pub skipped_kinks: usize,
    pub max_rel_err: f64,
    pub max_abs_grad: f64,
    pub failures: Vec<CoordFailure>,
}

impl ParamReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub tol: f64,
    pub params: Vec<ParamReport>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.params.iter().all(ParamReport::passed)
    }

    pub fn max_rel_err(&self) -> f64 {
        self.params.iter().fold(0.0, |m, p| m.max(p.max_rel_err))
    }

    pub fn checked(&self) -> usize {
        self.params.iter().map(|p| p.checked).sum()
    }

    pub fn skipped(&self) -> usize {
        self.params.iter().map(|p| p.skipped_kinks).sum()
    }
}

pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

fn forward<F>(store: &ParamStore, build: &F) -> Result<(f64, u64)>
where
    F: Fn(&mut Graph<'_>) -> Result<Var>,
{
    let mut g = Graph::new(store);
    let loss = build(&mut g)?;
    Ok((g.value(loss).item(), g.kink_signature()))
}

/// Checks `build`'s analytic gradients for every trainable entry of `params`.
///
/// `build` must be deterministic; two forward passes on the unperturbed
/// parameters are compared bit-for-bit and a mismatch is a
/// [`Error::Precondition`] failure.
pub fn grad_check<F>(params: &ParamStore, build: F, cfg: &GradCheckConfig) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph<'_>) -> Result<Var>,
{
    let (base, base_sig) = forward(params, &build)?;
    let (again, _) = forward(params, &build)?;
    if base.to_bits() != again.to_bits() {
        return Err(Error::Precondition(format!(
            "loss is not deterministic ({base} vs {again}); disable dropout and fix the rng"
        )));
    }

    let grads = {
        let mut g = Graph::new(params);
        let loss = build(&mut g)?;
        g.backward(loss)?;
        g.into_grads()
    };

    let mut rng = RngStream::with_stream(cfg.seed, streams::GRADCHECK);
    let mut reports = Vec::new();
    for id in params.ids() {
        let entry = params.entry(id);
        if !entry.trainable() {
            continue;
        }
        let analytic = grads.get(params, id);
        let coords = sample_coords(entry.value.len(), cfg.max_coords, &mut rng);
        reports.push(check_param(params, id, &analytic, &coords, base_sig, &build, cfg)?);
    }
    Ok(GradCheckReport {
        tol: cfg.tol,
        params: reports,
    })
}

fn check_param<F>(
    params: &ParamStore,
    id: ParamId,
    analytic: &crate::tensor::Tensor,
    coords: &[usize],
    base_sig: u64,
    build: &F,
    cfg: &GradCheckConfig,
) -> Result<ParamReport>
where
    F: Fn(&mut Graph<'_>) -> Result<Var>,
{
    let mut work = params.clone();
    let mut report = ParamReport {
        name: params.entry(id).name().into(),
        checked: 0,
        skipped_kinks: 0,
        max_rel_err: 0.0,
        max_abs_grad: 0.0,
        failures: Vec::new(),
    };
    for &k in coords {
        let orig = params.value(id).data()[k];
        work.value_mut(id).data_mut()[k] = orig + cfg.eps;
        let (plus, sig_p) = forward(&work, build)?;
        work.value_mut(id).data_mut()[k] = orig - cfg.eps;
        let (minus, sig_m) = forward(&work, build)?;
        work.value_mut(id).data_mut()[k] = orig;
        if sig_p != base_sig || sig_m != base_sig {
            report.skipped_kinks += 1;
            continue;
        }
        let numeric = (plus - minus) / (2.0 * cfg.eps);
        let a = analytic.data()[k];
        let rel = relative_error(a, numeric, cfg.floor);
        report.checked += 1;
        report.max_rel_err = report.max_rel_err.max(rel);
        report.max_abs_grad = report.max_abs_grad.max(a.abs());
        if !(rel < cfg.tol) {
            report.failures.push(CoordFailure {
                index: k,
                analytic: a,
                numeric,
                rel_err: rel,
            });
        }
    }
    Ok(report)
}

/// All indices if `n <= max`, else `max` distinct indices drawn without
/// replacement, in ascending order.
fn sample_coords(n: usize, max: usize, rng: &mut RngStream) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    if n <= max {
        return idx;
    }
    for i in 0..max {
        let j = i + rng.below(n - i);
        idx.swap(i, j);
    }
    idx.truncate(max);
    idx.sort_unstable();
    idx
}
