//! Truncated Fock-space coefficient vectors for the three state families.
//!
//! Coefficients are assembled in the log domain because the running products
//! `f(1)...f(n)` enter squared and can cross 300 orders of magnitude before
//! a series settles. Truncation is adaptive: a series is cut at the first
//! index where a run of consecutive terms stops contributing to the squared
//! norm, with a hard cap as backstop.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::laguerre::{LogProduct, NonlinearModel};

/// Which family of states is being built.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// First-kind coherent state: weights carry `1/f(n)!`.
    Coherent1,
    /// Second-kind coherent state: weights carry `f(n)!`.
    Coherent2,
    /// Squeezed vacuum: even levels only, weights carry `f(2n)!`.
    Squeezed,
}

/// Full physical description of one state: family, parameters, oscillator
/// frequency (`hbar = 1`, so `E_n = omega (n + 1/2)`) and the nonlinearity.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpec {
    family: Family,
    beta: Complex64,
    r: f64,
    phi: f64,
    omega: f64,
    model: NonlinearModel,
}

impl StateSpec {
    /// First-kind coherent state. Panics unless `omega > 0`.
    pub fn coherent1(beta: Complex64, omega: f64, model: NonlinearModel) -> Self {
        assert!(omega > 0.0, "omega must be strictly positive");
        Self {
            family: Family::Coherent1,
            beta,
            r: 0.0,
            phi: 0.0,
            omega,
            model,
        }
    }

    /// Second-kind coherent state. Panics unless `omega > 0`.
    pub fn coherent2(beta: Complex64, omega: f64, model: NonlinearModel) -> Self {
        Self {
            family: Family::Coherent2,
            ..Self::coherent1(beta, omega, model)
        }
    }

    /// Squeezed vacuum with `zeta = r e^{i phi}`. Panics unless `omega > 0`
    /// and `r >= 0`.
    pub fn squeezed(r: f64, phi: f64, omega: f64, model: NonlinearModel) -> Self {
        assert!(omega > 0.0, "omega must be strictly positive");
        assert!(r >= 0.0, "squeeze parameter r must be >= 0");
        Self {
            family: Family::Squeezed,
            beta: Complex64::new(0.0, 0.0),
            r,
            phi: phi.rem_euclid(std::f64::consts::TAU),
            omega,
            model,
        }
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn beta(&self) -> Complex64 {
        self.beta
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn model(&self) -> &NonlinearModel {
        &self.model
    }

    /// `E_n = omega (n + 1/2)`.
    pub fn energy(&self, n: usize) -> f64 {
        self.omega * (n as f64 + 0.5)
    }

    /// The truncated coefficient vector of this state.
    pub fn coefficients(&self, trunc: &TruncationConfig) -> Result<FockVector> {
        match self.family {
            Family::Coherent1 => coherent_vector(self, CoherentKind::First, trunc),
            Family::Coherent2 => coherent_vector(self, CoherentKind::Second, trunc),
            Family::Squeezed => squeezed_vector(self, self.r.tanh(), trunc),
        }
    }
}

/// Adaptive truncation policy.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncationConfig {
    /// Hard cap on the Fock index.
    pub n_max_cap: usize,
    /// A term is negligible when `|term| / |partial norm^2 sum| < tail_tol`.
    pub tail_tol: f64,
    /// How many negligible terms in a row end the series.
    pub consecutive: usize,
}

impl Default for TruncationConfig {
    fn default() -> Self {
        Self {
            n_max_cap: 512,
            tail_tol: 1e-16,
            consecutive: 3,
        }
    }
}

/// Truncated complex coefficient vector with its norm.
///
/// Coherent families keep their physical (non-unit) normalisation; the
/// squeezed family is returned unit-normalised with `c_0` real positive,
/// which pins down the otherwise free overall constant.
#[derive(Debug, Clone, PartialEq)]
pub struct FockVector {
    coeffs: Vec<Complex64>,
    norm: f64,
}

impl FockVector {
    pub fn new(coeffs: Vec<Complex64>) -> Self {
        let norm = l2_norm(&coeffs);
        Self { coeffs, norm }
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    /// Highest retained Fock index.
    pub fn truncation_index(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    /// `<self|other>` over the common range.
    pub fn inner(&self, other: &FockVector) -> Complex64 {
        self.coeffs
            .iter()
            .zip(other.coeffs.iter())
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// Free evolution: `c_n -> c_n e^{-i omega (n + 1/2) t}`. Norm is
    /// unchanged.
    pub fn evolved(&self, omega: f64, t: f64) -> FockVector {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(n, c)| c * Complex64::from_polar(1.0, -omega * (n as f64 + 0.5) * t))
            .collect();
        FockVector {
            coeffs,
            norm: self.norm,
        }
    }

    /// Coefficients scaled to unit norm.
    pub fn normalized_coeffs(&self) -> Vec<Complex64> {
        self.coeffs.iter().map(|c| c / self.norm).collect()
    }
}

fn l2_norm(coeffs: &[Complex64]) -> f64 {
    // scaled to dodge overflow when individual coefficients are extreme
    let max = coeffs.iter().map(|c| c.norm()).fold(0.0f64, f64::max);
    if max == 0.0 || !max.is_finite() {
        return max;
    }
    let sum: f64 = coeffs
        .iter()
        .map(|c| {
            let s = c.norm() / max;
            s * s
        })
        .sum();
    max * sum.sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum CoherentKind {
    First,
    Second,
}

/// One retained series term in log form.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LogTerm {
    pub sign: i8,
    pub log_mag: f64,
}

/// Streaming relative-tail test over squared-magnitude terms, carried with a
/// floating log offset so that partial sums spanning hundreds of orders of
/// magnitude stay representable.
struct TailTest {
    tol: f64,
    needed: usize,
    run: usize,
    scale: f64,
    scaled_sum: f64,
}

impl TailTest {
    fn new(trunc: &TruncationConfig) -> Self {
        Self {
            tol: trunc.tail_tol,
            needed: trunc.consecutive,
            run: 0,
            scale: f64::NEG_INFINITY,
            scaled_sum: 0.0,
        }
    }

    /// Feed `log |c_n|^2`; returns true once the tail criterion is met.
    fn push(&mut self, log_mag2: f64) -> bool {
        if log_mag2 == f64::NEG_INFINITY {
            self.run += 1;
            return self.scaled_sum > 0.0 && self.run >= self.needed;
        }
        if log_mag2 > self.scale {
            self.scaled_sum *= (self.scale - log_mag2).exp();
            self.scale = log_mag2;
        }
        let term = (log_mag2 - self.scale).exp();
        self.scaled_sum += term;
        if term / self.scaled_sum < self.tol {
            self.run += 1;
        } else {
            self.run = 0;
        }
        self.run >= self.needed
    }
}

/// Log-magnitudes of the first-/second-kind coherent coefficients
/// `|c_n| = e^{-|beta|^2/2} |beta|^n / (f(n)!^{+-1} sqrt(n!))`, truncated.
pub(crate) fn coherent_logs(
    kind: CoherentKind,
    model: &NonlinearModel,
    beta_abs: f64,
    trunc: &TruncationConfig,
) -> Result<Vec<LogTerm>> {
    if beta_abs == 0.0 {
        return Ok(vec![LogTerm {
            sign: 1,
            log_mag: 0.0,
        }]);
    }
    let prefactor = -0.5 * beta_abs * beta_abs;
    let log_beta = beta_abs.ln();
    let mut fprod = LogProduct::empty();
    let mut half_log_fact = 0.0; // 0.5 ln(n!)
    let mut tail = TailTest::new(trunc);
    let mut terms = Vec::new();
    for n in 0..=trunc.n_max_cap {
        if n > 0 {
            let f = model.eval(n)?;
            if f == 0.0 && kind == CoherentKind::First {
                return Err(Error::ZeroNonlinearity { n });
            }
            fprod.accumulate(f);
            half_log_fact += 0.5 * (n as f64).ln();
        }
        let f_part = match kind {
            CoherentKind::First => -fprod.log_magnitude(),
            CoherentKind::Second => fprod.log_magnitude(),
        };
        let (sign, log_mag) = if fprod.is_zero() {
            // only reachable for the second kind; the factor kills the term
            (0, f64::NEG_INFINITY)
        } else {
            (fprod.sign(), prefactor + n as f64 * log_beta + f_part - half_log_fact)
        };
        terms.push(LogTerm { sign, log_mag });
        if tail.push(2.0 * log_mag) {
            return Ok(terms);
        }
    }
    Err(Error::TruncationCapReached {
        cap: trunc.n_max_cap,
    })
}

/// Log-magnitudes of the even-level squeezed amplitudes
/// `|u_p| = (tanh r / 2)^p |f(2p)!| sqrt((2p)!) / p!`, truncated over the
/// pair index `p` (Fock level `2p`). The cap applies to the Fock index.
pub(crate) fn squeezed_pair_logs(
    model: &NonlinearModel,
    tanh_r: f64,
    trunc: &TruncationConfig,
) -> Result<Vec<LogTerm>> {
    if tanh_r == 0.0 {
        return Ok(vec![LogTerm {
            sign: 1,
            log_mag: 0.0,
        }]);
    }
    let log_half_tanh = (tanh_r / 2.0).ln();
    let mut fprod = LogProduct::empty();
    let mut log_fact_2p = 0.0; // ln((2p)!)
    let mut log_fact_p = 0.0; // ln(p!)
    let mut tail = TailTest::new(trunc);
    let mut terms = Vec::new();
    let pair_cap = trunc.n_max_cap / 2;
    for p in 0..=pair_cap {
        if p > 0 {
            fprod.accumulate(model.eval(2 * p - 1)?);
            fprod.accumulate(model.eval(2 * p)?);
            log_fact_2p += ((2 * p - 1) as f64).ln() + ((2 * p) as f64).ln();
            log_fact_p += (p as f64).ln();
        }
        let (sign, log_mag) = if fprod.is_zero() {
            (0, f64::NEG_INFINITY)
        } else {
            (
                fprod.sign(),
                p as f64 * log_half_tanh + fprod.log_magnitude() + 0.5 * log_fact_2p - log_fact_p,
            )
        };
        terms.push(LogTerm { sign, log_mag });
        if tail.push(2.0 * log_mag) {
            return Ok(terms);
        }
    }
    Err(Error::DivergentSeries {
        cap: trunc.n_max_cap,
    })
}

fn coherent_vector(
    spec: &StateSpec,
    kind: CoherentKind,
    trunc: &TruncationConfig,
) -> Result<FockVector> {
    let beta_abs = spec.beta.norm();
    let beta_arg = if beta_abs == 0.0 { 0.0 } else { spec.beta.arg() };
    let logs = coherent_logs(kind, &spec.model, beta_abs, trunc)?;
    let coeffs = logs
        .iter()
        .enumerate()
        .map(|(n, lt)| {
            if lt.sign == 0 {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::from_polar(lt.sign as f64 * lt.log_mag.exp(), n as f64 * beta_arg)
            }
        })
        .collect();
    Ok(FockVector::new(coeffs))
}

fn squeezed_vector(spec: &StateSpec, tanh_r: f64, trunc: &TruncationConfig) -> Result<FockVector> {
    let logs = squeezed_pair_logs(&spec.model, tanh_r, trunc)?;
    // normalise relative to the largest term; u_0 = 1 keeps c_0 real positive
    let log_max = logs
        .iter()
        .map(|lt| lt.log_mag)
        .fold(f64::NEG_INFINITY, f64::max);
    let rel: Vec<Complex64> = logs
        .iter()
        .enumerate()
        .map(|(p, lt)| {
            if lt.sign == 0 {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::from_polar(
                    lt.sign as f64 * (lt.log_mag - log_max).exp(),
                    p as f64 * spec.phi,
                )
            }
        })
        .collect();
    let norm = l2_norm(&rel);
    let mut coeffs = vec![Complex64::new(0.0, 0.0); 2 * (logs.len() - 1) + 1];
    for (p, c) in rel.iter().enumerate() {
        coeffs[2 * p] = c / norm;
    }
    Ok(FockVector {
        norm: l2_norm(&coeffs),
        coeffs,
    })
}
