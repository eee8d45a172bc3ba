//! Simulated annealing on `SO(N)` in exponential coordinates centred at a
//! base point `A₀`.
//!
//! Each step draws `ξ_n` (shared with the estimator) and `ζ_n ∈ R^{N(N−1)/2}`
//! and performs
//!
//! ```text
//! Z_n = grad_space(f(ξ_n) ∇f(A_{n−1}ξ_n), A_{n−1}ξ_n, Y_{n−1})
//! Y_n = Y_{n−1} − r_n (Z_n + ∇P(Y_{n−1})) + √(r_n h_n) Σ_k ζ_n,k E_k
//! A_n = exp(Y_n) A₀
//! ```
//!
//! where `P(Y) = ‖Y‖²` outside the closed ball of radius `π√⌊N/2⌋` (whose
//! image under `exp` is all of `SO(N)`) and zero inside. Because `A_n` is
//! rebuilt from `Y_n` and `A₀`, it always stays in the component of `A₀`.

use std::collections::VecDeque;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::lie::{self, algebra_dim, Rotation, SkewMatrix};
use crate::payoff::PayoffModel;
use crate::sampling::GaussianStream;

/// Steps between orthogonality checks of `A_n`.
pub const REORTHO_EVERY: u64 = 100;

/// Defect `max|AᵀA − I|` above which the periodic check re-projects `A_n`.
const REORTHO_TRIGGER: f64 = 1e-12;

/// Default length of the trailing window for the covariance diagnostic.
pub const DEFAULT_WINDOW: usize = 1000;

/// Step-size / temperature family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScheduleVariant {
    /// `r_n = n^−γ`, `h_n = d / ((1 − γ) ln(n + 1))`.
    Power,
    /// `r_n = b / n`, `h_n = d / ln(ln(n + 3))`.
    LogLog { b: f64 },
    /// `r_n = h_n = 0`: the matrix never moves.
    Frozen,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnealSchedule {
    pub gamma: f64,
    /// Heat constant `d`.
    pub heat: f64,
    pub variant: ScheduleVariant,
    /// Off gives the plain Robbins–Monro recursion.
    pub noise: bool,
}

impl AnnealSchedule {
    pub fn power(gamma: f64, heat: f64) -> Result<Self> {
        let s = Self {
            gamma,
            heat,
            variant: ScheduleVariant::Power,
            noise: true,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn log_log(b: f64, heat: f64) -> Result<Self> {
        let s = Self {
            gamma: 0.5,
            heat,
            variant: ScheduleVariant::LogLog { b },
            noise: true,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn frozen() -> Self {
        Self {
            gamma: 0.5,
            heat: 1.0,
            variant: ScheduleVariant::Frozen,
            noise: false,
        }
    }

    pub fn without_noise(mut self) -> Self {
        self.noise = false;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::config("gamma", "must lie in (0, 1)"));
        }
        if !(self.heat > 0.0 && self.heat.is_finite()) {
            return Err(Error::config("heat", "must be positive"));
        }
        if let ScheduleVariant::LogLog { b } = self.variant {
            if !(b > 0.0 && b.is_finite()) {
                return Err(Error::config("b", "must be positive"));
            }
        }
        Ok(())
    }

    /// `r_n`, `n ≥ 1`.
    pub fn step_size(&self, n: u64) -> f64 {
        let n = n as f64;
        match self.variant {
            ScheduleVariant::Power => n.powf(-self.gamma),
            ScheduleVariant::LogLog { b } => b / n,
            ScheduleVariant::Frozen => 0.0,
        }
    }

    /// `h_n`, `n ≥ 1`; shifted logarithms keep it finite from the first step.
    pub fn temperature(&self, n: u64) -> f64 {
        let n = n as f64;
        match self.variant {
            ScheduleVariant::Power => self.heat / ((1.0 - self.gamma) * (n + 1.0).ln()),
            ScheduleVariant::LogLog { .. } => self.heat / (n + 3.0).ln().ln(),
            ScheduleVariant::Frozen => 0.0,
        }
    }

    pub fn describe(&self) -> String {
        match self.variant {
            ScheduleVariant::Power => format!(
                "power(gamma={},heat={},noise={})",
                self.gamma, self.heat, self.noise
            ),
            ScheduleVariant::LogLog { b } => {
                format!("loglog(b={},heat={},noise={})", b, self.heat, self.noise)
            }
            ScheduleVariant::Frozen => "frozen".to_string(),
        }
    }
}

/// `π √⌊N/2⌋`.
pub fn penalty_radius(n: usize) -> f64 {
    PI * ((n / 2) as f64).sqrt()
}

/// Gradient of `P(Y) = ‖Y‖² · 1{‖Y‖ > radius}`: `2Y` outside the closed
/// ball, zero inside and on the boundary.
pub fn penalty_gradient(y: &SkewMatrix, radius: f64) -> SkewMatrix {
    if y.norm() > radius {
        y.scale(2.0)
    } else {
        SkewMatrix::zeros(y.dim())
    }
}

/// One row of the annealing trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub n: u64,
    pub y_norm: f64,
    pub step_norm: f64,
    pub window_cov: f64,
}

/// Trailing-window sample covariance of `(f(ξ), f(Aξ))`.
#[derive(Debug, Clone)]
pub struct CovarianceWindow {
    capacity: usize,
    pairs: VecDeque<(f64, f64)>,
}

impl CovarianceWindow {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 2, "window needs room for two samples");
        Self {
            capacity,
            pairs: VecDeque::with_capacity(capacity),
        }
    }

    pub fn push(&mut self, a: f64, b: f64) {
        if self.pairs.len() == self.capacity {
            self.pairs.pop_front();
        }
        self.pairs.push_back((a, b));
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Unbiased sample covariance; zero with fewer than two samples.
    pub fn covariance(&self) -> f64 {
        let n = self.pairs.len();
        if n < 2 {
            return 0.0;
        }
        let (sa, sb) = self
            .pairs
            .iter()
            .fold((0.0, 0.0), |(x, y), &(a, b)| (x + a, y + b));
        let (ma, mb) = (sa / n as f64, sb / n as f64);
        let s: f64 = self.pairs.iter().map(|&(a, b)| (a - ma) * (b - mb)).sum();
        s / (n - 1) as f64
    }
}

#[derive(Debug, Clone)]
pub struct Diagnostics {
    pub rejections: u64,
    pub penalty_activations: u64,
    pub reorthogonalizations: u64,
    pub window: CovarianceWindow,
    pub trace: Vec<TraceRecord>,
    /// Record a trace row every this many steps (0 disables the trace).
    pub trace_every: u64,
}

impl Diagnostics {
    fn new(window: usize, trace_every: u64) -> Self {
        Self {
            rejections: 0,
            penalty_activations: 0,
            reorthogonalizations: 0,
            window: CovarianceWindow::new(window),
            trace: Vec::new(),
            trace_every,
        }
    }
}

/// Payoff evaluations made during a step; the dynamic estimator reuses them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    /// `f(ξ_n)`
    pub f_xi: f64,
    /// `f(A_{n−1} ξ_n)`
    pub f_axi: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone)]
pub struct AnnealState {
    n: u64,
    y: SkewMatrix,
    a: Rotation,
    a0: Rotation,
    radius: f64,
    pub diagnostics: Diagnostics,
    moved: Vec<f64>,
    grad: Vec<f64>,
}

impl AnnealState {
    pub fn new(a0: Rotation) -> Self {
        Self::with_window(a0, DEFAULT_WINDOW, 1)
    }

    pub fn with_window(a0: Rotation, window: usize, trace_every: u64) -> Self {
        let n = a0.dim();
        Self {
            n: 0,
            y: SkewMatrix::zeros(n),
            a: a0.clone(),
            a0,
            radius: penalty_radius(n),
            diagnostics: Diagnostics::new(window, trace_every),
            moved: vec![0.0; n],
            grad: vec![0.0; n],
        }
    }

    /// Starts at `Y₀ = y`, i.e. `A = exp(y) A₀`.
    pub fn starting_at(a0: Rotation, y: SkewMatrix) -> Result<Self> {
        if y.dim() != a0.dim() {
            return Err(Error::domain(
                "starting point and base rotation differ in dimension",
            ));
        }
        let mut s = Self::new(a0);
        s.a = lie::exp(&y)?.compose(&s.a0);
        s.y = y;
        Ok(s)
    }

    pub fn step_count(&self) -> u64 {
        self.n
    }

    pub fn y(&self) -> &SkewMatrix {
        &self.y
    }

    /// Current antithetic `A_n`.
    pub fn rotation(&self) -> &Rotation {
        &self.a
    }

    pub fn base(&self) -> &Rotation {
        &self.a0
    }

    pub fn penalty_radius(&self) -> f64 {
        self.radius
    }

    pub fn dim(&self) -> usize {
        self.a0.dim()
    }

    /// One annealing step with `ξ = xi` and noise coordinates `zeta`
    /// (ignored when the schedule has noise off).
    ///
    /// A non-finite payoff gradient or update leaves the state untouched and
    /// counts a rejection; the returned evaluation is still usable when its
    /// values are finite.
    pub fn step<P: PayoffModel + ?Sized>(
        &mut self,
        schedule: &AnnealSchedule,
        payoff: &P,
        xi: &[f64],
        zeta: &[f64],
    ) -> Result<Evaluation> {
        let dim = self.dim();
        if payoff.dim() != dim || xi.len() != dim {
            return Err(Error::domain(format!(
                "payoff dimension {} and draw length {} must equal rotation dimension {dim}",
                payoff.dim(),
                xi.len()
            )));
        }
        let noisy = schedule.noise && !matches!(schedule.variant, ScheduleVariant::Frozen);
        if noisy && zeta.len() != algebra_dim(dim) {
            return Err(Error::domain(format!(
                "annealing noise needs {} coordinates, got {}",
                algebra_dim(dim),
                zeta.len()
            )));
        }

        self.a.apply_into(xi, &mut self.moved);
        let f_xi = payoff.value(xi);
        let f_axi = payoff.value_and_gradient(&self.moved, &mut self.grad);

        let reject = |state: &mut Self| {
            state.diagnostics.rejections += 1;
            Ok(Evaluation {
                f_xi,
                f_axi,
                accepted: false,
            })
        };
        if !f_xi.is_finite() || !f_axi.is_finite() || self.grad.iter().any(|g| !g.is_finite()) {
            return reject(self);
        }

        let n = self.n + 1;
        let r = schedule.step_size(n);
        let mut step_norm = 0.0;
        if r != 0.0 {
            let u: Vec<f64> = self.grad.iter().map(|g| f_xi * g).collect();
            let z = lie::grad_space(&u, &self.moved, &self.y)?;
            let pen = penalty_gradient(&self.y, self.radius);
            let penalised = pen.norm() > 0.0;

            let mut delta = &z + &pen;
            delta = delta.scale(-r);
            if noisy {
                let amp = (r * schedule.temperature(n)).sqrt();
                let noise = SkewMatrix::from_coords(dim, zeta)?;
                delta.axpy(amp, &noise);
            }
            let y_new = &self.y + &delta;
            if !y_new.is_finite() {
                return reject(self);
            }
            let a_new = lie::exp(&y_new)?.compose(&self.a0);
            if penalised {
                self.diagnostics.penalty_activations += 1;
            }
            step_norm = delta.norm();
            self.y = y_new;
            self.a = a_new;
            if n.is_multiple_of(REORTHO_EVERY) && self.a.orthogonality_defect() > REORTHO_TRIGGER {
                self.a = lie::reorthogonalize(&self.a)?;
                self.diagnostics.reorthogonalizations += 1;
            }
        }
        self.n = n;

        self.diagnostics.window.push(f_xi, f_axi);
        let every = self.diagnostics.trace_every;
        if every > 0 && n.is_multiple_of(every) {
            let record = TraceRecord {
                n,
                y_norm: self.y.norm(),
                step_norm,
                window_cov: self.diagnostics.window.covariance(),
            };
            self.diagnostics.trace.push(record);
        }
        Ok(Evaluation {
            f_xi,
            f_axi,
            accepted: true,
        })
    }
}

#[derive(Debug, Clone)]
pub struct AnnealOutcome {
    pub a_star: Rotation,
    pub y_star: SkewMatrix,
    pub diagnostics: Diagnostics,
    pub iterations: u64,
}

impl AnnealOutcome {
    /// Covariance of `(f(ξ), f(A_k ξ))` over the trailing window.
    pub fn window_covariance(&self) -> f64 {
        self.diagnostics.window.covariance()
    }
}

/// Runs `iters` annealing steps from `A₀`; `xi` feeds the payoff draws and
/// `zeta` the annealing noise.
pub fn run<P: PayoffModel + ?Sized>(
    payoff: &P,
    schedule: &AnnealSchedule,
    a0: Rotation,
    iters: u64,
    xi: &mut GaussianStream,
    zeta: &mut GaussianStream,
) -> Result<AnnealOutcome> {
    if iters == 0 {
        return Err(Error::config("iters", "must be at least 1"));
    }
    let mut state = AnnealState::new(a0);
    run_from(&mut state, payoff, schedule, iters, xi, zeta)?;
    Ok(AnnealOutcome {
        a_star: state.a.clone(),
        y_star: state.y.clone(),
        iterations: state.n,
        diagnostics: state.diagnostics,
    })
}

/// Continues an existing state for `iters` further draws.
pub fn run_from<P: PayoffModel + ?Sized>(
    state: &mut AnnealState,
    payoff: &P,
    schedule: &AnnealSchedule,
    iters: u64,
    xi: &mut GaussianStream,
    zeta: &mut GaussianStream,
) -> Result<()> {
    schedule_check(schedule)?;
    let dim = state.dim();
    let mut x = vec![0.0; dim];
    let mut z = vec![0.0; algebra_dim(dim)];
    for _ in 0..iters {
        xi.fill(&mut x);
        if schedule.noise {
            zeta.fill(&mut z);
        }
        state.step(schedule, payoff, &x, &z)?;
    }
    Ok(())
}

fn schedule_check(schedule: &AnnealSchedule) -> Result<()> {
    if matches!(schedule.variant, ScheduleVariant::Frozen) {
        Ok(())
    } else {
        schedule.validate()
    }
}

/// Heat constant `d = 4 · Var[f(ξ)]` estimated from `pilot_n` crude draws
/// of the undiscounted payoff.
pub fn heat_from_pilot<P: PayoffModel + ?Sized>(
    payoff: &P,
    pilot_n: usize,
    stream: &mut GaussianStream,
) -> Result<f64> {
    if pilot_n < 100 {
        return Err(Error::config(
            "pilot",
            "pilot sample needs at least 100 draws",
        ));
    }
    let mut x = vec![0.0; payoff.dim()];
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for k in 1..=pilot_n {
        stream.fill(&mut x);
        let v = payoff.value(&x);
        if !v.is_finite() {
            return Err(Error::numeric("non-finite payoff during pilot run"));
        }
        let d = v - mean;
        mean += d / k as f64;
        m2 += d * (v - mean);
    }
    let var = m2 / (pilot_n - 1) as f64;
    if var <= 0.0 {
        return Err(Error::config(
            "heat",
            "pilot variance is zero; a constant payoff needs no annealing",
        ));
    }
    Ok(4.0 * var)
}
