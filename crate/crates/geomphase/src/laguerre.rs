//! Generalized Laguerre polynomials and the Lamb-Dicke nonlinearity f(n).
//!
//! The nonlinearity of a trapped ion driven far from the Lamb-Dicke regime
//! is `f(n) = L_n^1(eta^2) / [(n+1) L_n^0(eta^2)]`. Series over Fock levels
//! need the running product `f(1)...f(n)`, which over- or underflows double
//! precision long before the series themselves stop being summable, so
//! products are carried as a sign plus a log-magnitude.

use crate::error::{Error, Result};

/// Generalized Laguerre polynomial `L_n^k(x)` by the three-term recurrence
/// `(m+1) L_{m+1}^k = (2m+k+1-x) L_m^k - (m+k) L_{m-1}^k`.
pub fn laguerre(n: usize, k: usize, x: f64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let kf = k as f64;
    let mut prev = 1.0;
    let mut cur = 1.0 + kf - x;
    for m in 1..n {
        let mf = m as f64;
        let next = ((2.0 * mf + kf + 1.0 - x) * cur - (mf + kf) * prev) / (mf + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// Which deformation is in effect.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelKind {
    /// `f(n) = 1`: the ordinary oscillator.
    Identity,
    /// Lamb-Dicke nonlinearity with parameter `eta >= 0`.
    LambDicke { eta: f64 },
    /// Values supplied directly, indexed by `n`.
    Tabulated { values: Vec<f64> },
}

/// A deformation function `f(n)` together with its pole-detection threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct NonlinearModel {
    kind: ModelKind,
    singular_threshold: f64,
}

pub const DEFAULT_SINGULAR_THRESHOLD: f64 = 1e-12;

impl NonlinearModel {
    pub fn identity() -> Self {
        Self {
            kind: ModelKind::Identity,
            singular_threshold: DEFAULT_SINGULAR_THRESHOLD,
        }
    }

    /// Lamb-Dicke model. Panics if `eta` is negative or non-finite.
    pub fn lamb_dicke(eta: f64) -> Self {
        assert!(eta.is_finite() && eta >= 0.0, "eta must be finite and >= 0");
        Self {
            kind: ModelKind::LambDicke { eta },
            singular_threshold: DEFAULT_SINGULAR_THRESHOLD,
        }
    }

    pub fn tabulated(values: Vec<f64>) -> Self {
        Self {
            kind: ModelKind::Tabulated { values },
            singular_threshold: DEFAULT_SINGULAR_THRESHOLD,
        }
    }

    pub fn with_singular_threshold(mut self, threshold: f64) -> Self {
        assert!(threshold > 0.0, "threshold must be positive");
        self.singular_threshold = threshold;
        self
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn singular_threshold(&self) -> f64 {
        self.singular_threshold
    }

    pub fn is_identity(&self) -> bool {
        match &self.kind {
            ModelKind::Identity => true,
            ModelKind::LambDicke { eta } => *eta == 0.0,
            ModelKind::Tabulated { .. } => false,
        }
    }

    /// Evaluate `f(n)`.
    ///
    /// For the Lamb-Dicke model a denominator magnitude below the singular
    /// threshold is a hard error: `1/f(n)!` diverges at such a pole and any
    /// silently returned value would corrupt every series downstream.
    pub fn eval(&self, n: usize) -> Result<f64> {
        match &self.kind {
            ModelKind::Identity => Ok(1.0),
            ModelKind::LambDicke { eta } => {
                let x = eta * eta;
                let den = (n as f64 + 1.0) * laguerre(n, 0, x);
                if den.abs() < self.singular_threshold {
                    return Err(Error::SingularNonlinearity {
                        n,
                        denominator: den.abs(),
                    });
                }
                Ok(laguerre(n, 1, x) / den)
            }
            ModelKind::Tabulated { values } => {
                values.get(n).copied().ok_or(Error::IndexOutOfRange {
                    n,
                    len: values.len(),
                })
            }
        }
    }

    /// The running product `f(1)...f(n)` in sign/log-magnitude form.
    /// `n = 0` is the empty product.
    pub fn log_factorial(&self, n: usize) -> Result<LogProduct> {
        let mut acc = LogProduct::empty();
        for k in 1..=n {
            acc.accumulate(self.eval(k)?);
        }
        Ok(acc)
    }
}

/// Sign and natural-log magnitude of a running product of reals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogProduct {
    sign: i8,
    log_magnitude: f64,
}

impl LogProduct {
    /// The empty product: +1 with log-magnitude 0.
    pub fn empty() -> Self {
        Self {
            sign: 1,
            log_magnitude: 0.0,
        }
    }

    /// Multiply one more factor into the product.
    pub fn accumulate(&mut self, factor: f64) {
        if factor == 0.0 || self.sign == 0 {
            self.sign = 0;
            self.log_magnitude = f64::NEG_INFINITY;
            return;
        }
        if factor < 0.0 {
            self.sign = -self.sign;
        }
        self.log_magnitude += factor.abs().ln();
    }

    pub fn sign(&self) -> i8 {
        self.sign
    }

    pub fn log_magnitude(&self) -> f64 {
        self.log_magnitude
    }

    /// The product as an ordinary float (may over/underflow; callers that
    /// care stay in the log domain).
    pub fn value(&self) -> f64 {
        self.sign as f64 * self.log_magnitude.exp()
    }

    pub fn is_zero(&self) -> bool {
        self.sign == 0
    }
}
