//! Monte Carlo estimators: crude, static antithetic with a fixed matrix, and
//! the dynamic antithetic estimator that anneals the matrix while it
//! estimates.
//!
//! Every estimator accumulates the discounted per-draw quantity `g_k`
//! (`f(ξ_k)` for crude, `(f(ξ_k) + f(Aξ_k))/2` otherwise) and reports
//! `S_n = Σg/n` with `σ_n² = Σg²/n − S_n²`. Sums are formed in fixed blocks
//! of [`BLOCK`] draws and the block totals are added in order, so a sharded
//! run and a sequential run over the same stream agree bit for bit whatever
//! the worker count.

use std::time::Instant;

use rayon::prelude::*;

use crate::anneal::{AnnealSchedule, AnnealState, Diagnostics};
use crate::error::{Error, Result};
use crate::lie::{algebra_dim, Rotation};
use crate::payoff::PayoffModel;
use crate::sampling::GaussianStream;

/// Draws per accumulation block.
pub const BLOCK: usize = 4096;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.96;

#[derive(Debug, Clone, PartialEq)]
pub enum Mode {
    Crude,
    Static,
    Dynamic,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Crude => "crude",
            Mode::Static => "static",
            Mode::Dynamic => "dynamic",
        }
    }
}

/// Running sums behind `S_n` and `σ_n²`.
#[derive(Debug, Clone)]
pub struct EstimatorState {
    mode: Mode,
    n: u64,
    sum_g: f64,
    sum_g2: f64,
    block_n: usize,
    block_g: f64,
    block_g2: f64,
}

impl EstimatorState {
    pub fn new(mode: Mode) -> Self {
        Self {
            mode,
            n: 0,
            sum_g: 0.0,
            sum_g2: 0.0,
            block_n: 0,
            block_g: 0.0,
            block_g2: 0.0,
        }
    }

    pub fn push(&mut self, g: f64) {
        self.block_g += g;
        self.block_g2 += g * g;
        self.block_n += 1;
        self.n += 1;
        if self.block_n == BLOCK {
            self.fold();
        }
    }

    fn fold(&mut self) {
        self.sum_g += self.block_g;
        self.sum_g2 += self.block_g2;
        self.block_n = 0;
        self.block_g = 0.0;
        self.block_g2 = 0.0;
    }

    /// Adds an externally accumulated block of `count` draws.
    fn absorb_block(&mut self, count: usize, g: f64, g2: f64) {
        debug_assert_eq!(self.block_n, 0);
        self.sum_g += g;
        self.sum_g2 += g2;
        self.n += count as u64;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    fn totals(&self) -> (f64, f64) {
        (self.sum_g + self.block_g, self.sum_g2 + self.block_g2)
    }

    /// `S_n`.
    pub fn mean(&self) -> f64 {
        let (s, _) = self.totals();
        s / self.n as f64
    }

    /// `σ_n² = Σg²/n − S_n²`, clamped at zero.
    pub fn variance(&self) -> f64 {
        let (s, s2) = self.totals();
        let n = self.n as f64;
        let m = s / n;
        (s2 / n - m * m).max(0.0)
    }

    pub fn report(&self, label: &str, elapsed: f64) -> EstimateReport {
        let price = self.mean();
        let variance = self.variance();
        let std_error = (variance / self.n as f64).sqrt();
        EstimateReport {
            label: label.to_string(),
            mode: self.mode.as_str().to_string(),
            price,
            variance,
            std_error,
            n: self.n,
            elapsed,
            ci95: (price - Z95 * std_error, price + Z95 * std_error),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateReport {
    pub label: String,
    pub mode: String,
    pub price: f64,
    pub variance: f64,
    pub std_error: f64,
    pub n: u64,
    /// Wall-clock seconds.
    pub elapsed: f64,
    pub ci95: (f64, f64),
}

impl EstimateReport {
    pub const CSV_HEADER: &'static str =
        "label,mode,price,variance,std_error,n,elapsed_s,ci_lo,ci_hi";

    /// One CSV row; `with_timing = false` leaves `elapsed_s` empty so the
    /// row depends only on configuration and seed.
    pub fn csv_row(&self, with_timing: bool) -> String {
        let elapsed = if with_timing {
            format!("{:.3}", self.elapsed)
        } else {
            String::new()
        };
        format!(
            "{},{},{:.17e},{:.17e},{:.17e},{},{},{:.17e},{:.17e}",
            self.label,
            self.mode,
            self.price,
            self.variance,
            self.std_error,
            self.n,
            elapsed,
            self.ci95.0,
            self.ci95.1
        )
    }

    pub fn contains(&self, value: f64) -> bool {
        self.ci95.0 <= value && value <= self.ci95.1
    }
}

fn check_count(n: u64) -> Result<()> {
    if n < 2 {
        Err(Error::config("n", "at least two samples are required"))
    } else {
        Ok(())
    }
}

fn check_rotation<P: PayoffModel + ?Sized>(payoff: &P, a: &Rotation) -> Result<()> {
    if a.dim() != payoff.dim() {
        Err(Error::domain(format!(
            "antithetic matrix has dimension {}, payoff needs {}",
            a.dim(),
            payoff.dim()
        )))
    } else {
        Ok(())
    }
}

fn non_finite(index: u64, what: &str) -> Error {
    Error::numeric(format!("non-finite payoff value at draw {index} ({what})"))
}

/// Block partial sums of `g` over draws `[start, start + count)`, reading
/// normals from a private copy of `base` positioned at draw `start`.
fn block_sums<F>(
    base: &GaussianStream,
    dim: usize,
    start: u64,
    count: usize,
    g: &F,
) -> Result<(f64, f64)>
where
    F: Fn(&[f64], &mut [f64]) -> Option<f64> + Sync,
{
    let mut stream = base.clone();
    stream.seek(base.counter() + start * dim as u64);
    let mut x = vec![0.0; dim];
    let mut scratch = vec![0.0; dim];
    let (mut s, mut s2) = (0.0, 0.0);
    for k in 0..count {
        stream.fill(&mut x);
        let v = g(&x, &mut scratch).ok_or_else(|| non_finite(start + k as u64, "sample"))?;
        s += v;
        s2 += v * v;
    }
    Ok((s, s2))
}

fn blocked<F>(
    mode: Mode,
    dim: usize,
    n: u64,
    stream: &mut GaussianStream,
    threads: usize,
    g: F,
) -> Result<EstimatorState>
where
    F: Fn(&[f64], &mut [f64]) -> Option<f64> + Sync,
{
    let blocks: Vec<(u64, usize)> = (0..n)
        .step_by(BLOCK)
        .map(|start| (start, BLOCK.min((n - start) as usize)))
        .collect();
    let base = stream.clone();
    let sums: Vec<Result<(f64, f64)>> = if threads <= 1 {
        blocks
            .iter()
            .map(|&(start, count)| block_sums(&base, dim, start, count, &g))
            .collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::config("threads", e.to_string()))?;
        pool.install(|| {
            blocks
                .par_iter()
                .map(|&(start, count)| block_sums(&base, dim, start, count, &g))
                .collect()
        })
    };
    let mut state = EstimatorState::new(mode);
    for (&(_, count), s) in blocks.iter().zip(sums) {
        let (bg, bg2) = s?;
        state.absorb_block(count, bg, bg2);
    }
    stream.seek(base.counter() + n * dim as u64);
    Ok(state)
}

/// Plain sample mean of `discount · f(ξ_i)`.
pub fn crude_mc<P: PayoffModel + ?Sized>(
    payoff: &P,
    n: u64,
    stream: &mut GaussianStream,
) -> Result<EstimateReport> {
    crude_mc_threads(payoff, n, stream, 1)
}

pub fn crude_mc_threads<P: PayoffModel + ?Sized>(
    payoff: &P,
    n: u64,
    stream: &mut GaussianStream,
    threads: usize,
) -> Result<EstimateReport> {
    check_count(n)?;
    let t0 = Instant::now();
    let disc = payoff.discount();
    let state = blocked(Mode::Crude, payoff.dim(), n, stream, threads, |x, _| {
        let v = disc * payoff.value(x);
        v.is_finite().then_some(v)
    })?;
    Ok(state.report(payoff.label(), t0.elapsed().as_secs_f64()))
}

/// `discount · (f(ξ_i) + f(Aξ_i))/2` with a fixed matrix `A`.
pub fn static_antithetic<P: PayoffModel + ?Sized>(
    payoff: &P,
    a: &Rotation,
    n: u64,
    stream: &mut GaussianStream,
) -> Result<EstimateReport> {
    static_antithetic_threads(payoff, a, n, stream, 1)
}

pub fn static_antithetic_threads<P: PayoffModel + ?Sized>(
    payoff: &P,
    a: &Rotation,
    n: u64,
    stream: &mut GaussianStream,
    threads: usize,
) -> Result<EstimateReport> {
    check_count(n)?;
    check_rotation(payoff, a)?;
    let t0 = Instant::now();
    let disc = payoff.discount();
    let state = blocked(
        Mode::Static,
        payoff.dim(),
        n,
        stream,
        threads,
        |x, moved| {
            a.apply_into(x, moved);
            let v = antithetic_sample(disc, payoff.value(x), payoff.value(moved));
            v.is_finite().then_some(v)
        },
    )?;
    Ok(state.report(payoff.label(), t0.elapsed().as_secs_f64()))
}

#[inline]
fn antithetic_sample(discount: f64, f_xi: f64, f_axi: f64) -> f64 {
    discount * (0.5 * (f_xi + f_axi))
}

#[derive(Debug, Clone)]
pub struct DynamicOutcome {
    pub report: EstimateReport,
    pub a_final: Rotation,
    pub diagnostics: Diagnostics,
}

/// Estimates while annealing: draw `k` contributes
/// `discount · (f(ξ_k) + f(A_{k−1}ξ_k))/2`, then the annealer takes one step
/// with the same `ξ_k` (and the same payoff evaluations) and a fresh `ζ_k`.
pub fn dynamic_antithetic<P: PayoffModel + ?Sized>(
    payoff: &P,
    schedule: &AnnealSchedule,
    a0: Rotation,
    n: u64,
    xi: &mut GaussianStream,
    zeta: &mut GaussianStream,
) -> Result<DynamicOutcome> {
    check_count(n)?;
    check_rotation(payoff, &a0)?;
    let t0 = Instant::now();
    let disc = payoff.discount();
    let dim = payoff.dim();
    let mut state = AnnealState::with_window(a0, crate::anneal::DEFAULT_WINDOW, 0);
    let mut est = EstimatorState::new(Mode::Dynamic);
    let mut x = vec![0.0; dim];
    let mut z = vec![0.0; algebra_dim(dim)];
    for k in 0..n {
        xi.fill(&mut x);
        if schedule.noise {
            zeta.fill(&mut z);
        }
        let ev = state.step(schedule, payoff, &x, &z)?;
        let g = antithetic_sample(disc, ev.f_xi, ev.f_axi);
        if !g.is_finite() {
            return Err(non_finite(k, "dynamic sample"));
        }
        est.push(g);
    }
    Ok(DynamicOutcome {
        report: est.report(payoff.label(), t0.elapsed().as_secs_f64()),
        a_final: state.rotation().clone(),
        diagnostics: state.diagnostics,
    })
}

/// Sample moments of the discounted pair `(f(ξ), f(Aξ))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Probe {
    pub cov: f64,
    /// Pooled variance `(Var̂ f(ξ) + Var̂ f(Aξ))/2`; both estimate `Var[f]`.
    pub var: f64,
    pub corr: f64,
    pub var_xi: f64,
    pub var_axi: f64,
    pub n: u64,
}

impl Probe {
    /// `(var + cov)/2`: the variance of the antithetic pair average.
    pub fn antithetic_variance(&self) -> f64 {
        0.5 * (self.var + self.cov)
    }
}

/// Covariance diagnostics for a candidate antithetic matrix. Moments are
/// normalised by `n`, matching the estimators.
pub fn covariance_probe<P: PayoffModel + ?Sized>(
    payoff: &P,
    a: &Rotation,
    n: u64,
    stream: &mut GaussianStream,
) -> Result<Probe> {
    check_count(n)?;
    check_rotation(payoff, a)?;
    let dim = payoff.dim();
    let disc = payoff.discount();
    let mut x = vec![0.0; dim];
    let mut moved = vec![0.0; dim];
    let mut pairs = Vec::with_capacity(n as usize);
    for k in 0..n {
        stream.fill(&mut x);
        a.apply_into(&x, &mut moved);
        let p = (disc * payoff.value(&x), disc * payoff.value(&moved));
        if !p.0.is_finite() || !p.1.is_finite() {
            return Err(non_finite(k, "probe"));
        }
        pairs.push(p);
    }
    let nf = n as f64;
    let (sa, sb) = pairs
        .iter()
        .fold((0.0, 0.0), |(x, y), &(a, b)| (x + a, y + b));
    let (ma, mb) = (sa / nf, sb / nf);
    let (mut vaa, mut vbb, mut vab) = (0.0, 0.0, 0.0);
    for &(a, b) in &pairs {
        let (da, db) = (a - ma, b - mb);
        vaa += da * da;
        vbb += db * db;
        vab += da * db;
    }
    let (var_xi, var_axi, cov) = (vaa / nf, vbb / nf, vab / nf);
    Ok(Probe {
        cov,
        var: 0.5 * (var_xi + var_axi),
        corr: cov / (var_xi * var_axi).sqrt(),
        var_xi,
        var_axi,
        n,
    })
}
