//! Independent reimplementations used as oracles for the indicator code.

use std::ops::Range;

use edgan::indicators::{bollinger, ema, log_momentum, macd, rsi, stoch_rsi, IndicatorConfig};

use super::rng;

pub fn random_walk(len: usize, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    let mut p = 50.0 + 100.0 * r.uniform();
    (0..len)
        .map(|_| {
            p *= 1.0 + 0.03 * r.normal();
            p
        })
        .collect()
}

// Closed-form EMA: (1-a)^t p0 + sum_{j=1..t} a (1-a)^(t-j) p_j.
pub fn ema_oracle(p: &[f64], period: usize) -> Vec<f64> {
    let a = 2.0 / (period as f64 + 1.0);
    (0..p.len())
        .map(|t| {
            let mut v = (1.0 - a).powi(t as i32) * p[0];
            for j in 1..=t {
                v += a * (1.0 - a).powi((t - j) as i32) * p[j];
            }
            v
        })
        .collect()
}

// Wilder averages unrolled: seed mean of the first n moves, then
// avg_t = (1-1/n)^(t-n) seed + sum_{j=n+1..t} (1/n)(1-1/n)^(t-j) x_j.
pub fn rsi_oracle(p: &[f64], n: usize) -> Vec<f64> {
    let d: Vec<f64> = (1..p.len()).map(|t| p[t] - p[t - 1]).collect();
    let gains: Vec<f64> = d.iter().map(|&x| if x > 0.0 { x } else { 0.0 }).collect();
    let losses: Vec<f64> = d.iter().map(|&x| if x < 0.0 { -x } else { 0.0 }).collect();
    let k = 1.0 - 1.0 / n as f64;
    let avg = |xs: &[f64], t: usize| {
        let seed: f64 = xs[..n].iter().sum::<f64>() / n as f64;
        let mut v = k.powi((t - n) as i32) * seed;
        for j in n + 1..=t {
            v += k.powi((t - j) as i32) * xs[j - 1] / n as f64;
        }
        v
    };
    (n..p.len())
        .map(|t| {
            let (g, l) = (avg(&gains, t), avg(&losses, t));
            if l == 0.0 {
                if g == 0.0 {
                    50.0
                } else {
                    100.0
                }
            } else {
                100.0 * g / (g + l)
            }
        })
        .collect()
}

pub fn stoch_oracle(rsi: &[f64], n: usize) -> Vec<f64> {
    (n - 1..rsi.len())
        .map(|t| {
            let w = &rsi[t + 1 - n..=t];
            let mut lo = w[0];
            let mut hi = w[0];
            for &v in w {
                if v < lo {
                    lo = v;
                }
                if v > hi {
                    hi = v;
                }
            }
            if hi == lo {
                0.5
            } else {
                (rsi[t] - lo) / (hi - lo)
            }
        })
        .collect()
}

// Population variance via pairwise differences: sum_ij (x_i - x_j)^2 / (2 n^2).
pub fn bollinger_oracle(p: &[f64], n: usize, width: f64) -> Vec<(f64, f64, f64)> {
    (n - 1..p.len())
        .map(|t| {
            let w = &p[t + 1 - n..=t];
            let mean = w.iter().sum::<f64>() / n as f64;
            let mut ss = 0.0;
            for a in w {
                for b in w {
                    ss += (a - b) * (a - b);
                }
            }
            let sd = (ss / (2.0 * (n * n) as f64)).sqrt();
            (mean, mean + width * sd, mean - width * sd)
        })
        .collect()
}

/// Compares every indicator against its oracle on one random series per
/// seed, with random periods. Returns one message per mismatch.
pub fn indicator_mismatches(seeds: Range<u64>, tol: f64) -> Vec<String> {
    let mut errors = Vec::new();
    let mut check = |name: &str, seed: u64, got: &[f64], want: &[f64]| {
        if got.len() != want.len() {
            errors.push(format!("{} seed {}: length {} vs {}", name, seed, got.len(), want.len()));
            return;
        }
        if let Some((i, (g, w))) = got.iter().zip(want).enumerate().find(|(_, (g, w))| (*g - *w).abs() >= tol) {
            errors.push(format!("{} seed {} index {}: {} vs {}", name, seed, i, g, w));
        }
    };
    for seed in seeds {
        let mut r = rng(10_000 + seed);
        let len = 40 + (r.uniform() * 80.0) as usize;
        let p = random_walk(len, seed);
        let period = 2 + (r.uniform() * 18.0) as usize;
        let stoch_period = 2 + (r.uniform() * 10.0) as usize;

        check("ema", seed, &ema(&p, period).unwrap(), &ema_oracle(&p, period));

        let rs = rsi(&p, period).unwrap();
        let want_rsi = rsi_oracle(&p, period);
        check("rsi", seed, &rs.values, &want_rsi);
        if rs.values.len() >= stoch_period {
            let st = stoch_rsi(&rs, stoch_period).unwrap();
            check("stoch_rsi", seed, &st.values, &stoch_oracle(&want_rsi, stoch_period));
        }

        let cfg = IndicatorConfig {
            macd_fast: 2 + (r.uniform() * 8.0) as usize,
            macd_slow: 12 + (r.uniform() * 20.0) as usize,
            macd_signal: 2 + (r.uniform() * 9.0) as usize,
            ..IndicatorConfig::default()
        };
        if p.len() >= cfg.macd_slow {
            let (line, signal) = macd(&p, &cfg).unwrap();
            let fast = ema_oracle(&p, cfg.macd_fast);
            let slow = ema_oracle(&p, cfg.macd_slow);
            let want: Vec<f64> = fast.iter().zip(&slow).map(|(f, s)| f - s).collect();
            check("macd", seed, &line, &want);
            check("macd signal", seed, &signal, &ema_oracle(&want, cfg.macd_signal));
        }

        let width = 3.0 * r.uniform();
        let bands = bollinger(&p, period, width).unwrap();
        let want = bollinger_oracle(&p, period, width);
        let col = |k: usize| want.iter().map(|w| [w.0, w.1, w.2][k]).collect::<Vec<_>>();
        check("bollinger middle", seed, &bands.middle.values, &col(0));
        check("bollinger upper", seed, &bands.upper.values, &col(1));
        check("bollinger lower", seed, &bands.lower.values, &col(2));

        let lag = 1 + (r.uniform() * 5.0) as usize;
        let m = log_momentum(&p, lag).unwrap();
        let want: Vec<f64> = (lag..p.len()).map(|t| p[t].ln() - p[t - lag].ln()).collect();
        check("log_momentum", seed, &m.values, &want);
    }
    errors
}

/// Monotone series give RSI 100 and 0; constant series give zero MACD and
/// momentum and collapsed bands. Returns the failed anchors.
pub fn indicator_anchor_failures() -> Vec<&'static str> {
    let mut failed = Vec::new();
    let up: Vec<f64> = (0..60).map(|i| 20.0 + 0.5 * i as f64).collect();
    let down: Vec<f64> = up.iter().rev().copied().collect();
    if !rsi(&up, 14).unwrap().values.iter().all(|&v| v == 100.0) {
        failed.push("rising series RSI 100");
    }
    if !rsi(&down, 14).unwrap().values.iter().all(|&v| v == 0.0) {
        failed.push("falling series RSI 0");
    }
    let flat = vec![42.0; 60];
    let (line, signal) = macd(&flat, &IndicatorConfig::default()).unwrap();
    if !line.iter().chain(&signal).all(|&v| v == 0.0) {
        failed.push("constant series MACD 0");
    }
    if !log_momentum(&flat, 3).unwrap().values.iter().all(|&v| v == 0.0) {
        failed.push("constant series momentum 0");
    }
    let b = bollinger(&flat, 20, 2.0).unwrap();
    if !b.middle.values.iter().chain(&b.upper.values).chain(&b.lower.values).all(|&v| v == 42.0) {
        failed.push("constant series bands collapse");
    }
    failed
}
