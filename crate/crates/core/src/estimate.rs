use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

/// `log n!` through the log-gamma function.
pub fn ln_factorial(n: usize) -> f64 {
    if n < 2 {
        0.0
    } else {
        ln_gamma(n as f64 + 1.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    /// `log per(M)` for the matrix at hand.
    Raw,
    /// `log(per(nA)/n!)` for a doubly stochastic `A`.
    RatioToFactorial,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "exact-ryser")]
    ExactRyser,
    #[serde(rename = "exact-brute")]
    ExactBrute,
    #[serde(rename = "exact-block")]
    ExactBlock,
    #[serde(rename = "det-order1")]
    DetOrder1,
    #[serde(rename = "det-order2")]
    DetOrder2,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::ExactRyser => "exact-ryser",
            Method::ExactBrute => "exact-brute",
            Method::ExactBlock => "exact-block",
            Method::DetOrder1 => "det-order1",
            Method::DetOrder2 => "det-order2",
        }
    }
}

/// A natural-log permanent value with its provenance and the additive terms
/// that produced it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogPermanentEstimate {
    pub log_value: f64,
    pub basis: Basis,
    pub method: Method,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub terms: Vec<(String, f64)>,
}

impl LogPermanentEstimate {
    pub fn new(log_value: f64, basis: Basis, method: Method) -> Self {
        Self {
            log_value,
            basis,
            method,
            terms: Vec::new(),
        }
    }

    pub fn with_term(mut self, label: &str, value: f64) -> Self {
        self.terms.push((label.to_owned(), value));
        self
    }

    pub fn term(&self, label: &str) -> Option<f64> {
        self.terms.iter().find(|(l, _)| l == label).map(|(_, v)| *v)
    }

    /// Converts to `log per(nA)`; raw estimates pass through.
    pub fn to_raw(&self, n: usize) -> Self {
        match self.basis {
            Basis::Raw => self.clone(),
            Basis::RatioToFactorial => Self {
                log_value: self.log_value + ln_factorial(n),
                basis: Basis::Raw,
                method: self.method,
                terms: self.terms.clone(),
            }
            .with_term("log_factorial", ln_factorial(n)),
        }
    }

    /// Converts `log per(nA)` to `log(per(nA)/n!)`.
    pub fn to_ratio(&self, n: usize) -> Self {
        match self.basis {
            Basis::RatioToFactorial => self.clone(),
            Basis::Raw => Self {
                log_value: self.log_value - ln_factorial(n),
                basis: Basis::RatioToFactorial,
                method: self.method,
                terms: self.terms.iter().filter(|(l, _)| l != "log_factorial").cloned().collect(),
            },
        }
    }

    /// Adds `delta` to the value and records it as a term.
    pub fn shifted(&self, delta: f64, label: &str) -> Self {
        Self {
            log_value: self.log_value + delta,
            ..self.clone()
        }
        .with_term(label, delta)
    }

    pub fn to_json(&self, n: usize) -> serde_json::Value {
        serde_json::json!({
            "method": self.method.as_str(),
            "basis": self.basis,
            "log_value": self.log_value,
            "n": n,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_factorial_matches_products_where_exact() {
        let mut f = 1.0_f64;
        for n in 1..=20 {
            f *= n as f64;
            assert!((ln_factorial(n) - f.ln()).abs() < 1e-13, "n = {n}");
        }
        assert_eq!(ln_factorial(0), 0.0);
    }

    #[test]
    fn basis_round_trip_differs_by_log_factorial() {
        let e = LogPermanentEstimate::new(0.25, Basis::RatioToFactorial, Method::DetOrder1);
        let raw = e.to_raw(400);
        assert!((raw.log_value - e.log_value - ln_factorial(400)).abs() < 1e-12);
        assert_eq!(raw.to_ratio(400).log_value, raw.log_value - ln_factorial(400));
    }

    #[test]
    fn json_shape() {
        let e = LogPermanentEstimate::new(1.5, Basis::Raw, Method::ExactRyser);
        let v = e.to_json(3);
        assert_eq!(v["method"], "exact-ryser");
        assert_eq!(v["basis"], "raw");
        assert_eq!(v["n"], 3);
    }
}
