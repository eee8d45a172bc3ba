//! Payoffs `f: Rᴺ → R` driven by standard normal inputs, with almost
//! everywhere gradients.
//!
//! Values are undiscounted; the discount factor travels as metadata and is
//! applied per sample by the estimators. On the measure-zero kink of a
//! floored payoff the gradient is the zero vector.

use crate::error::{Error, Result};

/// Payoff with an a.e. gradient.
pub trait PayoffModel: Send + Sync {
    /// Number of normal inputs.
    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> f64;

    /// Writes `∇f(x)` into `grad` and returns `f(x)`.
    fn value_and_gradient(&self, x: &[f64], grad: &mut [f64]) -> f64;

    /// Discount factor applied to every sample, in `(0, 1]`.
    fn discount(&self) -> f64 {
        1.0
    }

    fn label(&self) -> &str;
}

/// Fixing times `i/12`, `i = 1..=n`.
pub fn monthly_times(n: usize) -> Vec<f64> {
    (1..=n).map(|i| i as f64 / 12.0).collect()
}

fn validate_times(field: &str, times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::config(field, "at least one fixing time is required"));
    }
    let mut prev = 0.0;
    for (i, &t) in times.iter().enumerate() {
        if !t.is_finite() || t <= prev {
            return Err(Error::config(
                field,
                format!("fixing times must be positive and strictly increasing (index {i}: {t})"),
            ));
        }
        prev = t;
    }
    Ok(())
}

fn require(field: &str, ok: bool, message: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::config(field, message))
    }
}

/// Per-period log-drift and diffusion coefficient `σ√Δt` for a GBM.
fn increments(times: &[f64], mu: f64, vol: f64) -> (Vec<f64>, Vec<f64>) {
    let mut prev = 0.0;
    times
        .iter()
        .map(|&t| {
            let dt = t - prev;
            prev = t;
            ((mu - 0.5 * vol * vol) * dt, vol * dt.sqrt())
        })
        .unzip()
}

/// Black–Scholes inputs for an arithmetic-average Asian call.
#[derive(Debug, Clone, PartialEq)]
pub struct AsianSpec {
    pub spot: f64,
    pub strike: f64,
    pub rate: f64,
    pub vol: f64,
    pub times: Vec<f64>,
}

impl AsianSpec {
    /// `S₀ = K = 100`, `r = 2.83%`, `ν = 10.36%`, twelve monthly fixings.
    pub fn benchmark() -> Self {
        Self {
            spot: 100.0,
            strike: 100.0,
            rate: 0.0283,
            vol: 0.1036,
            times: monthly_times(12),
        }
    }

    pub fn validate(&self) -> Result<()> {
        require(
            "spot",
            self.spot > 0.0 && self.spot.is_finite(),
            "must be positive",
        )?;
        require(
            "strike",
            self.strike >= 0.0 && self.strike.is_finite(),
            "must be non-negative",
        )?;
        require("rate", self.rate.is_finite(), "must be finite")?;
        require(
            "vol",
            self.vol >= 0.0 && self.vol.is_finite(),
            "must be non-negative",
        )?;
        validate_times("times", &self.times)
    }

    pub fn maturity(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }
}

/// Prices `S_{t_i}` generated from normal increments `x`,
/// `S_{t_i} = S_{t_{i−1}} exp((r − ν²/2)Δt_i + ν√Δt_i x_i)`.
pub fn gbm_path(spec: &AsianSpec, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != spec.times.len() {
        return Err(Error::domain(format!(
            "path needs {} normals, got {}",
            spec.times.len(),
            x.len()
        )));
    }
    let (drift, diff) = increments(&spec.times, spec.rate, spec.vol);
    let mut s = spec.spot;
    Ok(x.iter()
        .zip(drift.iter().zip(&diff))
        .map(|(xi, (a, b))| {
            s *= (a + b * xi).exp();
            s
        })
        .collect())
}

/// `max(0, mean(S_{t_i}) − K)`.
#[derive(Debug, Clone)]
pub struct AsianCall {
    spec: AsianSpec,
    drift: Vec<f64>,
    diffusion: Vec<f64>,
    discount: f64,
    label: String,
}

pub fn asian_payoff(spec: AsianSpec) -> Result<AsianCall> {
    spec.validate()?;
    let (drift, diffusion) = increments(&spec.times, spec.rate, spec.vol);
    let discount = (-spec.rate * spec.maturity()).exp();
    Ok(AsianCall {
        label: format!("asian-call-{}", spec.times.len()),
        spec,
        drift,
        diffusion,
        discount,
    })
}

impl AsianCall {
    pub fn spec(&self) -> &AsianSpec {
        &self.spec
    }

    fn path_into(&self, x: &[f64], path: &mut [f64]) {
        let mut s = self.spec.spot;
        for (k, p) in path.iter_mut().enumerate() {
            s *= (self.drift[k] + self.diffusion[k] * x[k]).exp();
            *p = s;
        }
    }
}

impl PayoffModel for AsianCall {
    fn dim(&self) -> usize {
        self.spec.times.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        let n = self.dim();
        let mut s = self.spec.spot;
        let mut sum = 0.0;
        for ((mu, sig), xk) in self.drift.iter().zip(&self.diffusion).zip(x) {
            s *= (mu + sig * xk).exp();
            sum += s;
        }
        (sum / n as f64 - self.spec.strike).max(0.0)
    }

    fn value_and_gradient(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let n = self.dim();
        let mut path = vec![0.0; n];
        self.path_into(x, &mut path);
        let avg = path.iter().sum::<f64>() / n as f64;
        let payoff = avg - self.spec.strike;
        if payoff <= 0.0 {
            grad.iter_mut().for_each(|g| *g = 0.0);
            return 0.0;
        }
        // ∂avg/∂x_j = ν√Δt_j · (1/N) Σ_{i≥j} S_i
        let mut tail = 0.0;
        for j in (0..n).rev() {
            tail += path[j];
            grad[j] = self.diffusion[j] * tail / n as f64;
        }
        payoff
    }

    fn discount(&self) -> f64 {
        self.discount
    }

    fn label(&self) -> &str {
        &self.label
    }
}

/// Two independent Black–Scholes assets observed on common dates; asset 2
/// pays a continuous dividend.
#[derive(Debug, Clone, PartialEq)]
pub struct CovSwapSpec {
    pub vol1: f64,
    pub vol2: f64,
    pub rate: f64,
    pub dividend: f64,
    pub times: Vec<f64>,
    /// Contract multiplier.
    pub scale: f64,
}

impl CovSwapSpec {
    /// `ν₁ = 17.36%`, `ν₂ = 10.12%`, `d = 2.03%`, `r = 2.83%`, twelve
    /// monthly fixings.
    ///
    /// The multiplier is 100 contracts on the period-summed realised
    /// covariance; with the averaged payoff implemented here that is
    /// `100 · N`.
    pub fn benchmark() -> Self {
        let times = monthly_times(12);
        Self {
            vol1: 0.1736,
            vol2: 0.1012,
            rate: 0.0283,
            dividend: 0.0203,
            scale: 100.0 * times.len() as f64,
            times,
        }
    }

    pub fn validate(&self) -> Result<()> {
        require(
            "vol1",
            self.vol1 >= 0.0 && self.vol1.is_finite(),
            "must be non-negative",
        )?;
        require(
            "vol2",
            self.vol2 >= 0.0 && self.vol2.is_finite(),
            "must be non-negative",
        )?;
        require("rate", self.rate.is_finite(), "must be finite")?;
        require("dividend", self.dividend.is_finite(), "must be finite")?;
        require(
            "scale",
            self.scale > 0.0 && self.scale.is_finite(),
            "must be positive",
        )?;
        validate_times("times", &self.times)
    }

    pub fn maturity(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }
}

/// `scale · max(0, (1/N) Σ_j (R¹_j − 1)(R²_j − 1))` with per-period gross
/// returns `R¹_j`, `R²_j`. Input `x` has length `2N`: even positions
/// (zero-based) drive asset 1, odd positions asset 2.
#[derive(Debug, Clone)]
pub struct CovarianceSwap {
    spec: CovSwapSpec,
    drift1: Vec<f64>,
    diff1: Vec<f64>,
    drift2: Vec<f64>,
    diff2: Vec<f64>,
    discount: f64,
    label: String,
}

pub fn covswap_payoff(spec: CovSwapSpec) -> Result<CovarianceSwap> {
    spec.validate()?;
    let (drift1, diff1) = increments(&spec.times, spec.rate, spec.vol1);
    let (drift2, diff2) = increments(&spec.times, spec.rate - spec.dividend, spec.vol2);
    let discount = (-spec.rate * spec.maturity()).exp();
    Ok(CovarianceSwap {
        label: format!("covariance-swap-{}", spec.times.len()),
        spec,
        drift1,
        diff1,
        drift2,
        diff2,
        discount,
    })
}

impl CovarianceSwap {
    pub fn spec(&self) -> &CovSwapSpec {
        &self.spec
    }

    /// Builds from an input dimension, rejecting odd values.
    pub fn check_dim(dim: usize) -> Result<usize> {
        if dim == 0 || !dim.is_multiple_of(2) {
            Err(Error::domain(format!(
                "covariance swap needs an even, positive input dimension, got {dim}"
            )))
        } else {
            Ok(dim / 2)
        }
    }

    fn periods(&self) -> usize {
        self.spec.times.len()
    }
}

impl PayoffModel for CovarianceSwap {
    fn dim(&self) -> usize {
        2 * self.periods()
    }

    fn value(&self, x: &[f64]) -> f64 {
        let n = self.periods();
        let mut sum = 0.0;
        for j in 0..n {
            let r1 = (self.drift1[j] + self.diff1[j] * x[2 * j]).exp() - 1.0;
            let r2 = (self.drift2[j] + self.diff2[j] * x[2 * j + 1]).exp() - 1.0;
            sum += r1 * r2;
        }
        self.spec.scale * (sum / n as f64).max(0.0)
    }

    fn value_and_gradient(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let n = self.periods();
        let c = self.spec.scale / n as f64;
        let mut sum = 0.0;
        for j in 0..n {
            let g1 = (self.drift1[j] + self.diff1[j] * x[2 * j]).exp();
            let g2 = (self.drift2[j] + self.diff2[j] * x[2 * j + 1]).exp();
            sum += (g1 - 1.0) * (g2 - 1.0);
            grad[2 * j] = c * g1 * self.diff1[j] * (g2 - 1.0);
            grad[2 * j + 1] = c * (g1 - 1.0) * g2 * self.diff2[j];
        }
        if sum <= 0.0 {
            grad.iter_mut().for_each(|g| *g = 0.0);
            return 0.0;
        }
        self.spec.scale * (sum / n as f64)
    }

    fn discount(&self) -> f64 {
        self.discount
    }

    fn label(&self) -> &str {
        &self.label
    }
}

/// `f(x) = wᵀx`.
#[derive(Debug, Clone)]
pub struct LinearPayoff {
    weights: Vec<f64>,
}

impl LinearPayoff {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::domain("linear payoff needs at least one weight"));
        }
        Ok(Self { weights })
    }

    /// `f(x) = x₁` in dimension `n`.
    pub fn first_coordinate(n: usize) -> Self {
        let mut weights = vec![0.0; n];
        weights[0] = 1.0;
        Self { weights }
    }
}

impl PayoffModel for LinearPayoff {
    fn dim(&self) -> usize {
        self.weights.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.weights.iter().zip(x).map(|(w, x)| w * x).sum()
    }

    fn value_and_gradient(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        grad.copy_from_slice(&self.weights);
        self.value(x)
    }

    fn label(&self) -> &str {
        "linear"
    }
}

/// `f(x) = exp(wᵀx)`, mean `exp(‖w‖²/2)`.
///
/// `E[f(ξ) f(Aξ)] = exp(‖w + Aᵀw‖²/2)` is minimised exactly where
/// `Aᵀw = −w`; in two dimensions that is the half turn alone.
#[derive(Debug, Clone)]
pub struct ExpLinearPayoff {
    weights: Vec<f64>,
}

impl ExpLinearPayoff {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::domain("exp-linear payoff needs at least one weight"));
        }
        Ok(Self { weights })
    }

    pub fn mean(&self) -> f64 {
        (0.5 * self.weights.iter().map(|w| w * w).sum::<f64>()).exp()
    }
}

impl PayoffModel for ExpLinearPayoff {
    fn dim(&self) -> usize {
        self.weights.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(x)
            .map(|(w, x)| w * x)
            .sum::<f64>()
            .exp()
    }

    fn value_and_gradient(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let v = self.value(x);
        for (g, w) in grad.iter_mut().zip(&self.weights) {
            *g = w * v;
        }
        v
    }

    fn label(&self) -> &str {
        "exp-linear"
    }
}

/// `f ≡ c`.
#[derive(Debug, Clone)]
pub struct ConstantPayoff {
    dim: usize,
    value: f64,
    discount: f64,
}

impl ConstantPayoff {
    pub fn new(dim: usize, value: f64) -> Self {
        Self {
            dim,
            value,
            discount: 1.0,
        }
    }

    pub fn with_discount(mut self, discount: f64) -> Self {
        self.discount = discount;
        self
    }
}

impl PayoffModel for ConstantPayoff {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, _x: &[f64]) -> f64 {
        self.value
    }

    fn value_and_gradient(&self, _x: &[f64], grad: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        self.value
    }

    fn discount(&self) -> f64 {
        self.discount
    }

    fn label(&self) -> &str {
        "constant"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_vol_path_is_deterministic() {
        let spec = AsianSpec {
            vol: 0.0,
            ..AsianSpec::benchmark()
        };
        let x: Vec<f64> = (0..12).map(|i| i as f64 - 5.0).collect();
        let path = gbm_path(&spec, &x).unwrap();
        for (s, t) in path.iter().zip(&spec.times) {
            assert!((s - 100.0 * (0.0283 * t).exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn terminal_price_at_zero_shock() {
        let spec = AsianSpec::benchmark();
        let path = gbm_path(&spec, &[0.0; 12]).unwrap();
        let expected = 100.0 * (0.0283 - 0.1036f64.powi(2) / 2.0).exp();
        assert!((path[11] - expected).abs() < 1e-10);
        assert!(gbm_path(&spec, &[0.0; 11]).is_err());
    }

    #[test]
    fn zero_strike_always_in_the_money() {
        let p = asian_payoff(AsianSpec {
            strike: 0.0,
            ..AsianSpec::benchmark()
        })
        .unwrap();
        let x = [
            -3.0, 2.0, 0.1, -0.5, 1.0, 0.0, 0.3, -2.0, 0.7, 0.0, 1.5, -1.0,
        ];
        let mut g = [0.0; 12];
        let v = p.value_and_gradient(&x, &mut g);
        assert!(v > 0.0);
        assert!(g.iter().all(|&gi| gi > 0.0));
    }

    #[test]
    fn deep_out_of_the_money() {
        let p = asian_payoff(AsianSpec::benchmark()).unwrap();
        let mut g = [1.0; 12];
        let v = p.value_and_gradient(&[-10.0; 12], &mut g);
        assert_eq!(v, 0.0);
        assert!(g.iter().all(|&gi| gi == 0.0));
        assert!((p.discount() - (-0.0283f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn asian_rejects_bad_times() {
        let bad = AsianSpec {
            times: vec![0.1, 0.3, 0.2],
            ..AsianSpec::benchmark()
        };
        assert!(matches!(asian_payoff(bad), Err(Error::Config { .. })));
    }

    #[test]
    fn covswap_without_vol() {
        let spec = CovSwapSpec {
            vol1: 0.0,
            vol2: 0.0,
            scale: 100.0,
            ..CovSwapSpec::benchmark()
        };
        let p = covswap_payoff(spec).unwrap();
        let dt: f64 = 1.0 / 12.0;
        let per = ((0.0283 * dt).exp() - 1.0) * (((0.0283 - 0.0203) * dt).exp() - 1.0);
        let expected = 100.0 * per;
        let x: Vec<f64> = (0..24).map(|i| (i as f64).sin()).collect();
        assert!((p.value(&x) - expected).abs() < 1e-15);
    }

    #[test]
    fn covswap_dim_checks() {
        assert!(CovarianceSwap::check_dim(7).is_err());
        assert_eq!(CovarianceSwap::check_dim(24).unwrap(), 12);
        let p = covswap_payoff(CovSwapSpec::benchmark()).unwrap();
        assert_eq!(p.dim(), 24);
    }

    #[test]
    fn constant_payoff_has_zero_gradient() {
        let p = ConstantPayoff::new(3, 2.5);
        let mut g = [9.0; 3];
        assert_eq!(p.value_and_gradient(&[1.0, 2.0, 3.0], &mut g), 2.5);
        assert_eq!(g, [0.0; 3]);
    }

    #[test]
    fn doubled_vol_with_halved_shocks() {
        let spec = AsianSpec::benchmark();
        let v = spec.vol;
        // keep r − ν²/2 fixed so only the diffusion term is compared
        let doubled = AsianSpec {
            vol: 2.0 * v,
            rate: spec.rate + 1.5 * v * v,
            ..spec.clone()
        };
        let x: Vec<f64> = (0..12).map(|i| (i as f64 * 0.7).cos()).collect();
        let half: Vec<f64> = x.iter().map(|a| a / 2.0).collect();
        let a = gbm_path(&spec, &x).unwrap();
        let b = gbm_path(&doubled, &half).unwrap();
        for (p, q) in a.iter().zip(&b) {
            assert!((p - q).abs() < 1e-10 * p);
        }
    }
}
