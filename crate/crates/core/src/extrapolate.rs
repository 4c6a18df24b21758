//! Sequence limits: step-size extrapolation of difference quotients, limits
//! along truncation ladders, and tails of integrals over shrinking cut-offs.

use serde::Serialize;

/// A limit estimate with an error bar.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Extrapolation {
    pub value: f64,
    pub error: f64,
    /// Observed convergence order in the step size (1 when it could not be estimated).
    pub order: f64,
}

const ORDER_RANGE: (f64, f64) = (0.2, 2.0);

/// Limit of `q(eps)` as `eps -> 0` from samples at decreasing steps with a
/// common refinement ratio. The leading error term `c eps^p` is removed with
/// the order `p` observed on the last three samples (first order when it
/// cannot be observed). The error is the gap between the last two
/// extrapolants.
pub fn step_limit(eps: &[f64], q: &[f64]) -> Extrapolation {
    assert_eq!(eps.len(), q.len());
    let n = q.len();
    assert!(n >= 2, "need at least two samples");
    let ratio = eps[n - 2] / eps[n - 1];
    let uniform = eps
        .windows(2)
        .all(|w| ((w[0] / w[1]) / ratio - 1.0).abs() < 1e-9);
    let mut order = 1.0;
    if n >= 3 && uniform {
        let d1 = q[n - 1] - q[n - 2];
        let d0 = q[n - 2] - q[n - 3];
        let scale = q[n - 1].abs().max(q[n - 2].abs()).max(f64::MIN_POSITIVE);
        if d0 != 0.0 && d1.abs() > 1e-13 * scale {
            let rho = d1 / d0;
            if rho > 0.0 && rho < 1.0 {
                order = (-rho.ln() / ratio.ln()).clamp(ORDER_RANGE.0, ORDER_RANGE.1);
            }
        }
    }
    let extrapolant = |i: usize| -> f64 {
        let r = eps[i] / eps[i + 1];
        q[i + 1] + (q[i + 1] - q[i]) / (r.powf(order) - 1.0)
    };
    let value = extrapolant(n - 2);
    let error = if n >= 3 {
        (value - extrapolant(n - 3)).abs()
    } else {
        (value - q[n - 1]).abs()
    };
    Extrapolation {
        value,
        error,
        order,
    }
}

/// Limit of a sequence indexed by a geometric truncation ladder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LadderLimit {
    pub value: f64,
    pub error: f64,
    /// Observed contraction of successive increments (0 when converged).
    pub ratio: f64,
    /// The last increment is negligible relative to the value.
    pub converged: bool,
    /// The last increment is a decrease that is not negligible.
    pub still_decreasing: bool,
}

/// Aitken limit of the last three terms. For sequences known to be
/// nonincreasing with a nonnegative limit the value is clamped to
/// `[0, last]`.
pub fn ladder_limit(seq: &[f64], monotone: bool, tau: f64) -> LadderLimit {
    let n = seq.len();
    assert!(n >= 1);
    let last = seq[n - 1];
    if n == 1 {
        return LadderLimit {
            value: last,
            error: f64::INFINITY,
            ratio: f64::NAN,
            converged: false,
            still_decreasing: false,
        };
    }
    let d1 = last - seq[n - 2];
    let negligible = d1.abs() <= tau * last.abs() || d1.abs() <= 1e-15;
    let still_decreasing = d1 < 0.0 && !negligible;
    if negligible {
        return LadderLimit {
            value: last,
            error: d1.abs(),
            ratio: 0.0,
            converged: true,
            still_decreasing,
        };
    }
    let aitken = |k: usize| -> Option<(f64, f64)> {
        // uses seq[k-2], seq[k-1], seq[k]
        let a = seq[k] - seq[k - 1];
        let b = seq[k - 1] - seq[k - 2];
        if b == 0.0 {
            return None;
        }
        let q = a / b;
        (q > 0.0 && q < 1.0).then(|| (seq[k] + a * q / (1.0 - q), q))
    };
    let clamp = |v: f64| if monotone { v.clamp(0.0, last.max(0.0)) } else { v };
    match (n >= 3).then(|| aitken(n - 1)).flatten() {
        Some((v, q)) => {
            let value = clamp(v);
            let error = match (n >= 4).then(|| aitken(n - 2)).flatten() {
                Some((prev, _)) => (value - clamp(prev)).abs().max(1e-3 * d1.abs()),
                None => (d1 * q / (1.0 - q)).abs(),
            };
            LadderLimit {
                value,
                error,
                ratio: q,
                converged: false,
                still_decreasing,
            }
        }
        None => LadderLimit {
            value: clamp(last),
            error: d1.abs(),
            ratio: f64::NAN,
            converged: false,
            still_decreasing,
        },
    }
}

/// Nodewise [`ladder_limit`] of a sequence of fields.
pub fn ladder_limit_field(levels: &[&[f64]], monotone: bool, tau: f64) -> Vec<f64> {
    let n = levels.len();
    let take = n.min(3);
    let len = levels[0].len();
    (0..len)
        .map(|i| {
            let seq: Vec<f64> = levels[n - take..].iter().map(|l| l[i]).collect();
            ladder_limit(&seq, monotone, tau).value
        })
        .collect()
}

/// Limit of partial integrals `S(rho_j)` over regions that exhaust the
/// domain as the cut-off `rho_j` halves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CutLimit {
    pub value: f64,
    pub error: f64,
    pub diverged: bool,
}

/// Increments contracting slower than this are not Cauchy.
const DIVERGENCE_RATIO: f64 = 0.98;

pub fn cut_limit(partial: &[f64], blowup: f64) -> CutLimit {
    let n = partial.len();
    assert!(n >= 1);
    let last = partial[n - 1];
    if !last.is_finite() || last.abs() > blowup {
        return CutLimit {
            value: f64::INFINITY,
            error: f64::INFINITY,
            diverged: true,
        };
    }
    if n < 3 {
        let err = if n == 2 { (last - partial[0]).abs() } else { f64::INFINITY };
        return CutLimit {
            value: last,
            error: err,
            diverged: false,
        };
    }
    let d: Vec<f64> = partial.windows(2).map(|w| w[1] - w[0]).collect();
    let m = d.len();
    let scale = last.abs().max(1e-300);
    if d[m - 1].abs() <= 1e-14 * scale {
        return CutLimit {
            value: last,
            error: d[m - 1].abs(),
            diverged: false,
        };
    }
    let ratio = |k: usize| if d[k - 1] == 0.0 { f64::INFINITY } else { d[k] / d[k - 1] };
    let q = ratio(m - 1);
    let q_prev = if m >= 3 { ratio(m - 2) } else { q };
    let same_sign = d[m - 1].signum() == d[m - 2].signum();
    if same_sign && q >= DIVERGENCE_RATIO && q_prev >= DIVERGENCE_RATIO {
        return CutLimit {
            value: if d[m - 1] > 0.0 { f64::INFINITY } else { f64::NEG_INFINITY },
            error: f64::INFINITY,
            diverged: true,
        };
    }
    let shanks = wynn_epsilon(partial);
    if q > 0.0 && q < 1.0 {
        let tail = d[m - 1] * q / (1.0 - q);
        let value = last + tail;
        let error = if m >= 3 && q_prev > 0.0 && q_prev < 1.0 {
            let prev = partial[n - 2] + d[m - 2] * q_prev / (1.0 - q_prev);
            (value - prev).abs().max(1e-2 * tail.abs())
        } else {
            tail.abs()
        };
        match shanks {
            Some((v, e)) if e < error => CutLimit {
                value: v,
                error: e,
                diverged: false,
            },
            _ => CutLimit {
                value,
                error,
                diverged: false,
            },
        }
    } else if let Some((value, error)) = shanks.filter(|(_, e)| *e < d[m - 1].abs()) {
        CutLimit {
            value,
            error,
            diverged: false,
        }
    } else {
        CutLimit {
            value: last,
            error: d[m - 1].abs(),
            diverged: false,
        }
    }
}

const WYNN_TERMS: usize = 9;

/// Shanks transform of the last terms of the sequence by Wynn's epsilon
/// algorithm, which is exact for sums of geometric components. Of the even
/// columns with two entries, returns the last entry of the one whose last two
/// entries agree best, with that gap as the error. Needs at least five terms.
pub fn wynn_epsilon(seq: &[f64]) -> Option<(f64, f64)> {
    // deep columns amplify rounding
    let seq = &seq[seq.len().saturating_sub(WYNN_TERMS)..];
    let n = seq.len();
    if n < 5 {
        return None;
    }
    let mut prev = vec![0.0; n + 1];
    let mut cur = seq.to_vec();
    let mut even = vec![cur.clone()];
    for k in 1..n - 1 {
        let next: Vec<f64> = (0..cur.len() - 1)
            .map(|j| {
                let d = cur[j + 1] - cur[j];
                let base = if k == 1 { 0.0 } else { prev[j + 1] };
                base + 1.0 / d
            })
            .collect();
        prev = cur;
        cur = next;
        if k % 2 == 0 {
            even.push(cur.clone());
        }
    }
    let (value, error) = even[1..]
        .iter()
        .filter(|c| c.len() >= 2)
        .map(|c| (c[c.len() - 1], (c[c.len() - 1] - c[c.len() - 2]).abs()))
        .filter(|(v, e)| v.is_finite() && e.is_finite())
        .min_by(|a, b| a.1.total_cmp(&b.1))?;
    (value.is_finite() && error.is_finite()).then_some((value, error))
}
