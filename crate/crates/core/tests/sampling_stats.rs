use antimc::sampling::GaussianStream;
use proptest::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

#[test]
fn moments_of_a_million_draws() {
    let mut s = GaussianStream::new(2024, 0);
    let n = 1_000_000;
    let v = s.next_vector(n);
    let mean = v.iter().sum::<f64>() / n as f64;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
    assert!(mean.abs() <= 0.004, "mean {mean}");
    assert!((var - 1.0).abs() <= 0.01, "var {var}");
    assert_eq!(s.counter(), n as u64);
}

#[test]
fn kolmogorov_smirnov_against_normal_cdf() {
    let n = 100_000;
    let mut v = GaussianStream::new(99, 3).next_vector(n);
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let nd = Normal::new(0.0, 1.0).unwrap();
    let nf = n as f64;
    let d = v
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let c = nd.cdf(x);
            (c - i as f64 / nf).max((i + 1) as f64 / nf - c)
        })
        .fold(0.0, f64::max);
    // asymptotic 1% critical value
    let critical = 1.6276 / nf.sqrt();
    assert!(d < critical, "D = {d}, critical {critical}");
}

#[test]
fn split_streams_are_uncorrelated() {
    let [mut a, mut b] = GaussianStream::new(5, 0).split_n::<2>();
    let n = 100_000;
    let x = a.next_vector(n);
    let y = b.next_vector(n);
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (u, v) in x.iter().zip(&y) {
        sxy += (u - mx) * (v - my);
        sxx += (u - mx).powi(2);
        syy += (v - my).powi(2);
    }
    let corr = sxy / (sxx * syy).sqrt();
    assert!(corr.abs() <= 0.01, "corr {corr}");
}

#[test]
fn lag_one_correlation_is_small() {
    let v = GaussianStream::new(6, 1).next_vector(200_001);
    let n = (v.len() - 1) as f64;
    let c = v.windows(2).map(|w| w[0] * w[1]).sum::<f64>() / n;
    assert!(c.abs() < 0.01, "lag-1 {c}");
}

#[test]
fn clone_replays_the_same_draws() {
    let mut s = GaussianStream::new(7, 2);
    s.next_vector(13);
    let mut t = s.clone();
    assert_eq!(s.next_vector(50), t.next_vector(50));
}

proptest! {
    #[test]
    fn seek_is_pure_in_counter(seed in any::<u64>(), id in any::<u64>(), k in 0u64..500) {
        let mut seq = GaussianStream::new(seed, id);
        let prefix = seq.next_vector(k as usize);
        let tail = seq.next_vector(7);
        let mut jumped = GaussianStream::new(seed, id);
        jumped.seek(k);
        prop_assert_eq!(jumped.next_vector(7), tail);
        prop_assert_eq!(prefix.len() as u64, k);
    }

    #[test]
    fn draws_are_finite(seed in any::<u64>(), id in any::<u64>()) {
        let v = GaussianStream::new(seed, id).next_vector(256);
        prop_assert!(v.iter().all(|x| x.is_finite() && x.abs() < 10.0));
    }
}
