//! Digamma and trigamma on the positive axis.

const RECURRENCE_FLOOR: f64 = 10.0;

/// `ψ(x)` for `x > 0`: upward recurrence `ψ(x) = ψ(x+1) − 1/x` until the
/// argument reaches 10, then the asymptotic series.
pub fn digamma(x: f64) -> f64 {
    if !(x > 0.0) || !x.is_finite() {
        return f64::NAN;
    }
    let mut x = x;
    let mut acc = 0.0;
    while x < RECURRENCE_FLOOR {
        acc -= 1.0 / x;
        x += 1.0;
    }
    acc + x.ln() - 0.5 / x - digamma_tail(x)
}

/// `ln x − ψ(x) − 1/(2x)` for `x ≥ 10`, by the asymptotic series.
fn digamma_tail(x: f64) -> f64 {
    let r = 1.0 / (x * x);
    r * (1.0 / 12.0
        - r * (1.0 / 120.0
            - r * (1.0 / 252.0
                - r * (1.0 / 240.0 - r * (1.0 / 132.0 - r * (691.0 / 32760.0 - r / 12.0))))))
}

/// `ln x − ψ(x)` for `x > 0`, without the cancellation of subtracting the
/// two at large `x`.
pub fn log_minus_digamma(x: f64) -> f64 {
    if x >= RECURRENCE_FLOOR {
        0.5 / x + digamma_tail(x)
    } else {
        x.ln() - digamma(x)
    }
}

/// `ψ′(x)` for `x > 0`, by the same recurrence and series.
pub fn trigamma(x: f64) -> f64 {
    if !(x > 0.0) || !x.is_finite() {
        return f64::NAN;
    }
    let mut x = x;
    let mut acc = 0.0;
    while x < RECURRENCE_FLOOR {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let r = 1.0 / (x * x);
    let tail = r
        * (1.0 / 6.0
            - r * (1.0 / 30.0
                - r * (1.0 / 42.0
                    - r * (1.0 / 30.0 - r * (5.0 / 66.0 - r * (691.0 / 2730.0 - r * 7.0 / 6.0))))));
    acc + 1.0 / x + 0.5 * r + tail / x
}
