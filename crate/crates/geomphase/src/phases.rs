//! Total, dynamical and geometric phases for the three state families.
//!
//! The total phase is the argument of the overlap between the initial and
//! evolved state. The single-argument form is only defined modulo pi, so
//! trajectories are unwrapped by continuity along a time grid, with local
//! bisection wherever one step would be ambiguous, and a halved-step pass
//! that must reproduce the endpoint before a value is reported.

use num_complex::Complex64;
use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};
use crate::states::{CoherentKind, Family, LogTerm, StateSpec, TruncationConfig};
use crate::states::{coherent_logs, squeezed_pair_logs};

/// Below this overlap magnitude the total phase is treated as undefined.
pub const OVERLAP_FLOOR: f64 = 1e-10;
/// Base number of unwrapping samples per requested horizon.
pub const UNWRAP_BASE_SAMPLES: usize = 2048;
/// The halved-step pass must reproduce the unwrapped endpoint this closely.
pub const UNWRAP_TOL: f64 = 1e-8;
/// One unwrapping step must move the wrapped phase by less than this.
const MAX_STEP: f64 = PI / 2.0;
const MAX_BISECT_DEPTH: u32 = 48;

/// The phase split of one evolved state at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseDecomposition {
    /// Continuously unwrapped total phase.
    pub chi: f64,
    /// Dynamical phase `-omega * mean_level * t`.
    pub delta: f64,
    /// `chi - delta`.
    pub gamma_unwrapped: f64,
    /// `gamma_unwrapped` reduced into `[0, 2 pi)`.
    pub gamma_mod: f64,
}

impl PhaseDecomposition {
    pub fn zero() -> Self {
        Self {
            chi: 0.0,
            delta: 0.0,
            gamma_unwrapped: 0.0,
            gamma_mod: 0.0,
        }
    }
}

/// Normalised series weights of one family together with the matching
/// energy ladder and the mean occupied level.
#[derive(Debug, Clone)]
pub struct WeightTable {
    weights: Vec<f64>,
    energies: Vec<f64>,
    levels: Vec<usize>,
    mean_level: f64,
    omega: f64,
}

impl WeightTable {
    /// Weights of `spec` under the given truncation.
    pub fn new(spec: &StateSpec, trunc: &TruncationConfig) -> Result<Self> {
        match spec.family() {
            Family::Coherent1 => Self::coherent(spec, CoherentKind::First, trunc),
            Family::Coherent2 => Self::coherent(spec, CoherentKind::Second, trunc),
            Family::Squeezed => Self::squeezed(spec, spec.r().tanh(), trunc),
        }
    }

    /// Squeezed weights in the infinite-squeezing limit `tanh r -> 1`.
    pub(crate) fn squeezed_limit(spec: &StateSpec, trunc: &TruncationConfig) -> Result<Self> {
        assert_eq!(spec.family(), Family::Squeezed, "limit is squeezed-only");
        Self::squeezed(spec, 1.0, trunc)
    }

    fn coherent(spec: &StateSpec, kind: CoherentKind, trunc: &TruncationConfig) -> Result<Self> {
        let beta2 = spec.beta().norm_sqr();
        let logs = coherent_logs(kind, spec.model(), spec.beta().norm(), trunc)?;
        let weights = normalized_weights(&logs);
        let levels: Vec<usize> = (0..weights.len()).collect();
        // bracket term of the connection: the mean level is
        // 1/2 + |beta|^2 * sum w_n f(n+1)^{-+2} / sum w_n
        let mut occ = 0.0;
        for (n, &w) in weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let f = spec.model().eval(n + 1)?;
            occ += match kind {
                CoherentKind::First => w / (f * f),
                CoherentKind::Second => w * (f * f),
            };
        }
        let mean_level = 0.5 + beta2 * occ;
        Ok(Self {
            energies: levels.iter().map(|&n| spec.energy(n)).collect(),
            levels,
            weights,
            mean_level,
            omega: spec.omega(),
        })
    }

    fn squeezed(spec: &StateSpec, tanh_r: f64, trunc: &TruncationConfig) -> Result<Self> {
        let logs = squeezed_pair_logs(spec.model(), tanh_r, trunc)?;
        let weights = normalized_weights(&logs);
        let levels: Vec<usize> = (0..weights.len()).map(|p| 2 * p).collect();
        // 1/2 + tanh^2 r * sum w_p f(2p+1)^2 f(2p+2)^2 (2p+1) / sum w_p
        let mut occ = 0.0;
        for (p, &w) in weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let f1 = spec.model().eval(2 * p + 1)?;
            let f2 = spec.model().eval(2 * p + 2)?;
            occ += w * f1 * f1 * f2 * f2 * (2 * p + 1) as f64;
        }
        let mean_level = 0.5 + tanh_r * tanh_r * occ;
        Ok(Self {
            energies: levels.iter().map(|&n| spec.energy(n)).collect(),
            levels,
            weights,
            mean_level,
            omega: spec.omega(),
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    /// Fock level carried by each weight entry.
    pub fn levels(&self) -> &[usize] {
        &self.levels
    }

    /// `1/2` plus the mean occupied level, from the family bracket.
    pub fn mean_level(&self) -> f64 {
        self.mean_level
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    /// Highest Fock level retained by the truncation.
    pub fn truncation_index(&self) -> usize {
        *self.levels.last().unwrap_or(&0)
    }

    /// Phase decomposition at a single time.
    pub fn phase_at(&self, t: f64) -> Result<PhaseDecomposition> {
        decomposition_at(self, t)
    }

    /// Phases along an ascending time grid, unwrapped once along the path.
    pub fn phase_path(&self, ts: &[f64]) -> Result<Vec<PathSample>> {
        let chis = continuous_arg_path(&|tau| self.wrapped_chi(tau), ts)?;
        Ok(ts
            .iter()
            .zip(chis)
            .map(|(&t, chi)| PathSample {
                t,
                phases: chi.map(|c| decomposition_from_chi(self, t, c)),
            })
            .collect())
    }

    /// Normalised overlap `sum_n w_n e^{-i E_n t}`.
    pub fn overlap(&self, t: f64) -> Complex64 {
        self.weights
            .iter()
            .zip(&self.energies)
            .map(|(&w, &e)| Complex64::from_polar(w, -e * t))
            .sum()
    }

    fn wrapped_chi(&self, t: f64) -> Result<f64> {
        let s = self.overlap(t);
        if s.norm() < OVERLAP_FLOOR {
            return Err(Error::UndefinedPhase {
                t,
                overlap: s.norm(),
            });
        }
        Ok(s.arg())
    }
}

fn normalized_weights(logs: &[LogTerm]) -> Vec<f64> {
    let log_max = logs
        .iter()
        .map(|lt| lt.log_mag)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut w: Vec<f64> = logs
        .iter()
        .map(|lt| {
            if lt.sign == 0 {
                0.0
            } else {
                (2.0 * (lt.log_mag - log_max)).exp()
            }
        })
        .collect();
    let total: f64 = w.iter().sum();
    for x in &mut w {
        *x /= total;
    }
    w
}

/// Wrap a phase difference into `(-pi, pi]`.
fn principal(d: f64) -> f64 {
    let x = d.rem_euclid(TAU);
    if x > PI {
        x - TAU
    } else {
        x
    }
}

/// Advance the continuous argument from `(t0, wrapped0)` to `t1`,
/// bisecting whenever a single step is branch-ambiguous.
fn advance_arg<F>(f: &F, t0: f64, wrapped0: f64, acc: f64, t1: f64, depth: u32) -> Result<(f64, f64)>
where
    F: Fn(f64) -> Result<f64>,
{
    let wrapped1 = f(t1)?;
    let d = principal(wrapped1 - wrapped0);
    if d.abs() <= MAX_STEP {
        return Ok((acc + d, wrapped1));
    }
    if depth >= MAX_BISECT_DEPTH {
        return Err(Error::UnstableUnwrap { last_change: d });
    }
    let tm = 0.5 * (t0 + t1);
    let (acc_m, wrapped_m) = advance_arg(f, t0, wrapped0, acc, tm, depth + 1)?;
    advance_arg(f, tm, wrapped_m, acc_m, t1, depth + 1)
}

/// Continuous argument at `t_end`, starting from arg = wrapped value at 0,
/// sampled on a uniform grid of `samples` steps.
fn arg_endpoint<F>(f: &F, t_end: f64, samples: usize) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let w0 = f(0.0)?;
    let mut acc = w0;
    let mut prev_t = 0.0;
    let mut prev_w = w0;
    for j in 1..=samples {
        let tj = t_end * j as f64 / samples as f64;
        let (a, w) = advance_arg(f, prev_t, prev_w, acc, tj, 0)?;
        acc = a;
        prev_w = w;
        prev_t = tj;
    }
    Ok(acc)
}

/// Continuously unwrapped argument of `f` at `t`, verified against a
/// halved-step pass.
pub(crate) fn continuous_arg<F>(f: &F, t: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    if t == 0.0 {
        return f(0.0);
    }
    let coarse = arg_endpoint(f, t, UNWRAP_BASE_SAMPLES)?;
    let fine = arg_endpoint(f, t, 2 * UNWRAP_BASE_SAMPLES)?;
    if (fine - coarse).abs() > UNWRAP_TOL {
        return Err(Error::UnstableUnwrap {
            last_change: (fine - coarse).abs(),
        });
    }
    Ok(fine)
}

/// Wrapped total phase `arg <psi(0)|psi(t)> / norms` at a single time.
pub fn total_phase(spec: &StateSpec, trunc: &TruncationConfig, t: f64) -> Result<f64> {
    WeightTable::new(spec, trunc)?.wrapped_chi(t)
}

/// `1/2` plus the mean occupied level of the family.
pub fn mean_level(spec: &StateSpec, trunc: &TruncationConfig) -> Result<f64> {
    Ok(WeightTable::new(spec, trunc)?.mean_level())
}

fn decomposition_at(wt: &WeightTable, t: f64) -> Result<PhaseDecomposition> {
    if t == 0.0 {
        return Ok(PhaseDecomposition::zero());
    }
    let chi = continuous_arg(&|tau| wt.wrapped_chi(tau), t)?;
    Ok(decomposition_from_chi(wt, t, chi))
}

fn decomposition_from_chi(wt: &WeightTable, t: f64, chi: f64) -> PhaseDecomposition {
    let delta = -wt.omega() * wt.mean_level() * t;
    let gamma_unwrapped = chi - delta;
    PhaseDecomposition {
        chi,
        delta,
        gamma_unwrapped,
        gamma_mod: gamma_unwrapped.rem_euclid(TAU),
    }
}

/// Total, dynamical and geometric phase of `spec` at time `t`.
pub fn geometric_phase(
    spec: &StateSpec,
    trunc: &TruncationConfig,
    t: f64,
) -> Result<PhaseDecomposition> {
    let wt = WeightTable::new(spec, trunc)?;
    decomposition_at(&wt, t)
}

/// One output sample of a trajectory.
#[derive(Debug, Clone)]
pub struct PathSample {
    pub t: f64,
    pub phases: Result<PhaseDecomposition>,
}

/// Phases along an ascending time grid, unwrapped once along the path.
///
/// Samples where the overlap is numerically orthogonal come back as
/// per-sample errors; unwrapping bridges across them from the last defined
/// anchor. The final defined sample is verified with midpoint refinement.
pub fn geometric_phase_path(
    spec: &StateSpec,
    trunc: &TruncationConfig,
    ts: &[f64],
) -> Result<Vec<PathSample>> {
    WeightTable::new(spec, trunc)?.phase_path(ts)
}

/// Continuous argument of `f` at each grid point of an ascending path.
pub(crate) fn continuous_arg_path<F>(f: &F, ts: &[f64]) -> Result<Vec<Result<f64>>>
where
    F: Fn(f64) -> Result<f64>,
{
    let pass = |refine: bool| -> Result<Vec<Result<f64>>> {
        let mut out = Vec::with_capacity(ts.len());
        let w0 = f(0.0)?;
        let mut anchor_t = 0.0;
        let mut anchor_w = w0;
        let mut acc = w0;
        for &t in ts {
            debug_assert!(t >= anchor_t || out.is_empty(), "grid must ascend");
            let step = |target: f64, at: f64, aw: f64, a: f64| -> Result<(f64, f64)> {
                if refine {
                    let tm = 0.5 * (at + target);
                    if tm > at && tm < target {
                        let (am, wm) = advance_arg(f, at, aw, a, tm, 0)?;
                        return advance_arg(f, tm, wm, am, target, 0);
                    }
                }
                advance_arg(f, at, aw, a, target, 0)
            };
            match step(t, anchor_t, anchor_w, acc) {
                Ok((a, w)) => {
                    acc = a;
                    anchor_w = w;
                    anchor_t = t;
                    out.push(Ok(a));
                }
                Err(e @ Error::UndefinedPhase { .. }) => out.push(Err(e)),
                Err(e) => return Err(e),
            }
        }
        Ok(out)
    };
    let coarse = pass(false)?;
    let fine = pass(true)?;
    if let (Some(Ok(c)), Some(Ok(g))) = (
        coarse.iter().rev().find(|r| r.is_ok()),
        fine.iter().rev().find(|r| r.is_ok()),
    ) {
        if (c - g).abs() > UNWRAP_TOL {
            return Err(Error::UnstableUnwrap {
                last_change: (c - g).abs(),
            });
        }
    }
    Ok(fine)
}

/// Geometric phase over one full oscillator period `t = 2 pi / omega`,
/// reduced into `[0, 2 pi)`. Evaluates the closed cyclic expression
/// `2 pi (mean_level - 1/2) mod 2 pi`.
pub fn cyclic_phase(spec: &StateSpec, trunc: &TruncationConfig) -> Result<f64> {
    let wt = WeightTable::new(spec, trunc)?;
    Ok((TAU * (wt.mean_level() - 0.5)).rem_euclid(TAU))
}

/// Geometric phase of the squeezed family in the limit `r -> infinity`,
/// obtained by substituting `tanh r = 1` into the weights.
///
/// Returns `DivergentSeries` when the limit series has no finite sum; for
/// the ordinary oscillator (`f = 1`) that is the correct answer, not a
/// failure.
pub fn squeezed_limit_phase(spec: &StateSpec, trunc: &TruncationConfig, t: f64) -> Result<f64> {
    let wt = WeightTable::squeezed_limit(spec, trunc)?;
    Ok(decomposition_at(&wt, t)?.gamma_unwrapped)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::laguerre::NonlinearModel;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn trunc() -> TruncationConfig {
        TruncationConfig::default()
    }

    #[test]
    fn poisson_weights_for_identity_model() {
        let spec = StateSpec::coherent1(c(1.0, 0.0), 1.0, NonlinearModel::identity());
        let wt = WeightTable::new(&spec, &trunc()).unwrap();
        let mut fact = 1.0;
        for (n, &w) in wt.weights().iter().enumerate() {
            if n > 0 {
                fact *= n as f64;
            }
            assert!((w - (-1.0f64).exp() / fact).abs() < 1e-14, "n={n}");
        }
        let total: f64 = wt.weights().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn vacuum_weight_table() {
        let spec = StateSpec::coherent1(c(0.0, 0.0), 2.0, NonlinearModel::lamb_dicke(0.6));
        let wt = WeightTable::new(&spec, &trunc()).unwrap();
        assert_eq!(wt.weights(), &[1.0]);
        assert!((wt.mean_level() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn mean_level_reduces_for_identity_model() {
        for beta2 in [0.5, 1.0, 3.0] {
            let spec = StateSpec::coherent1(c(beta2.sqrt(), 0.0), 1.0, NonlinearModel::identity());
            let m = mean_level(&spec, &trunc()).unwrap();
            assert!((m - (0.5 + beta2)).abs() < 1e-12, "beta2={beta2}");
            let spec = StateSpec::coherent2(c(beta2.sqrt(), 0.0), 1.0, NonlinearModel::identity());
            let m = mean_level(&spec, &trunc()).unwrap();
            assert!((m - (0.5 + beta2)).abs() < 1e-12, "beta2={beta2}");
        }
        for r in [0.4, 1.0, 1.6] {
            let spec = StateSpec::squeezed(r, 0.7, 1.0, NonlinearModel::identity());
            let m = mean_level(&spec, &trunc()).unwrap();
            let sh = r.sinh();
            assert!((m - (0.5 + sh * sh)).abs() / m < 1e-12, "r={r}");
        }
    }

    #[test]
    fn bracket_equals_mean_occupation_for_random_specs() {
        // The connection bracket must agree with the occupation expectation
        // sum_n level_n w_n computed from the normalised weights.
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for i in 0..100 {
            let eta = rng.gen_range(0.0..0.9);
            let model = NonlinearModel::lamb_dicke(eta);
            let spec = match i % 3 {
                0 => StateSpec::coherent1(
                    c(rng.gen_range(0.0..2.0), 0.0),
                    1.0,
                    model,
                ),
                1 => StateSpec::coherent2(
                    c(rng.gen_range(0.0..2.0), 0.0),
                    1.0,
                    model,
                ),
                _ => StateSpec::squeezed(rng.gen_range(0.0..2.0), 0.3, 1.0, model),
            };
            let wt = match WeightTable::new(&spec, &trunc()) {
                Ok(wt) => wt,
                // small-eta squeezed norm series may legitimately diverge
                Err(Error::DivergentSeries { .. }) => continue,
                Err(e) => panic!("sample {i}: {e}"),
            };
            let occ: f64 = wt
                .weights()
                .iter()
                .zip(wt.levels())
                .map(|(&w, &l)| w * l as f64)
                .sum();
            let expect = 0.5 + occ;
            let got = wt.mean_level();
            assert!(
                (got - expect).abs() / expect.abs() < 1e-12,
                "sample {i}: bracket {got} vs occupation {expect}"
            );
        }
    }

    #[test]
    fn total_phase_zero_at_t0() {
        let spec = StateSpec::coherent1(c(1.0, 0.0), 1.0, NonlinearModel::lamb_dicke(0.33));
        assert_eq!(total_phase(&spec, &trunc(), 0.0).unwrap(), 0.0);
    }

    #[test]
    fn vacuum_total_phase_is_half_omega_t() {
        let omega = 0.9;
        let spec = StateSpec::coherent1(c(0.0, 0.0), omega, NonlinearModel::identity());
        for t in [0.3, 1.7, 5.1] {
            let chi = total_phase(&spec, &trunc(), t).unwrap();
            assert!((chi - principal(-omega * t / 2.0)).abs() < 1e-14, "t={t}");
        }
    }

    #[test]
    fn geometric_phase_zero_at_t0() {
        let spec = StateSpec::squeezed(1.0, 0.0, 1.0, NonlinearModel::lamb_dicke(0.8));
        let p = geometric_phase(&spec, &trunc(), 0.0).unwrap();
        assert_eq!(p.gamma_unwrapped, 0.0);
        assert_eq!(p.gamma_mod, 0.0);
    }

    #[test]
    fn identity_coherent_matches_closed_form_on_grid() {
        // For f = 1 the unwrapped geometric phase is |beta|^2 (omega t - sin omega t).
        let omega = std::f64::consts::PI / 4.0;
        for beta2 in [0.5, 1.0] {
            let spec =
                StateSpec::coherent1(c(beta2.sqrt(), 0.0), omega, NonlinearModel::identity());
            for k in 1..=16 {
                let t = 1.25 * k as f64;
                let p = geometric_phase(&spec, &trunc(), t).unwrap();
                let expect = beta2 * (omega * t - (omega * t).sin());
                assert!(
                    (p.gamma_unwrapped - expect).abs() < 1e-12,
                    "beta2={beta2} t={t}: {} vs {expect}",
                    p.gamma_unwrapped
                );
            }
        }
    }

    #[test]
    fn identity_squeezed_matches_closed_form_on_grid() {
        // For f = 1: gamma(t) = omega t sinh^2 r - arg(1 - tanh^2 r e^{-2 i omega t})/2,
        // the second factor never winding around zero.
        let omega = std::f64::consts::PI / 4.0;
        let r: f64 = 1.0;
        let spec = StateSpec::squeezed(r, 0.0, omega, NonlinearModel::identity());
        let th2 = r.tanh() * r.tanh();
        for k in 1..=16 {
            let t = 1.2 * k as f64;
            let p = geometric_phase(&spec, &trunc(), t).unwrap();
            let branch = Complex64::new(1.0 - th2 * (2.0 * omega * t).cos(), th2 * (2.0 * omega * t).sin());
            let expect = omega * t * r.sinh().powi(2) - 0.5 * branch.arg();
            assert!(
                (p.gamma_unwrapped - expect).abs() < 1e-12,
                "t={t}: {} vs {expect}",
                p.gamma_unwrapped
            );
        }
    }

    #[test]
    fn dynamical_phase_identity() {
        let spec = StateSpec::coherent2(c(1.2, 0.0), 0.8, NonlinearModel::lamb_dicke(0.6));
        let wt = WeightTable::new(&spec, &trunc()).unwrap();
        for t in [0.5, 2.0, 9.0] {
            let p = geometric_phase(&spec, &trunc(), t).unwrap();
            assert!((p.delta + wt.omega() * wt.mean_level() * t).abs() < 1e-12);
            assert!((p.gamma_unwrapped - (p.chi - p.delta)).abs() == 0.0);
        }
    }

    #[test]
    fn gamma_mod_contract() {
        let spec = StateSpec::coherent1(c(1.0, 0.0), 1.0, NonlinearModel::lamb_dicke(0.33));
        for t in [0.7, 3.3, 11.0, 17.5] {
            let p = geometric_phase(&spec, &trunc(), t).unwrap();
            assert!(p.gamma_mod >= 0.0 && p.gamma_mod < TAU);
            let k = (p.gamma_unwrapped - p.gamma_mod) / TAU;
            assert!((k - k.round()).abs() < 1e-10, "t={t}");
        }
    }

    #[test]
    fn cyclic_matches_geometric_phase_at_full_period() {
        let omega = std::f64::consts::PI / 4.0;
        let cases: Vec<StateSpec> = vec![
            StateSpec::coherent1(c(1.0, 0.0), omega, NonlinearModel::lamb_dicke(0.6)),
            StateSpec::coherent2(c(1.0, 0.0), omega, NonlinearModel::lamb_dicke(0.8)),
            StateSpec::squeezed(1.0, 0.0, omega, NonlinearModel::lamb_dicke(0.8)),
            StateSpec::squeezed(1.0, 0.0, omega, NonlinearModel::identity()),
        ];
        for spec in cases {
            let cyc = cyclic_phase(&spec, &trunc()).unwrap();
            let p = geometric_phase(&spec, &trunc(), TAU / omega).unwrap();
            let d = (cyc - p.gamma_mod).abs();
            let d = d.min((d - TAU).abs());
            assert!(d < 1e-10, "cyclic {cyc} vs mod {}", p.gamma_mod);
        }
    }

    #[test]
    fn cyclic_identity_values() {
        // 2 pi |beta|^2 mod 2 pi and 2 pi sinh^2 r mod 2 pi
        let spec = StateSpec::coherent1(c(1.0, 0.0), 1.0, NonlinearModel::identity());
        assert!(cyclic_phase(&spec, &trunc()).unwrap().abs() < 1e-10);
        let r: f64 = 1.0;
        let spec = StateSpec::squeezed(r, 0.0, 1.0, NonlinearModel::identity());
        let expect = (TAU * r.sinh().powi(2)).rem_euclid(TAU);
        assert!((cyclic_phase(&spec, &trunc()).unwrap() - expect).abs() < 1e-9);
        let spec = StateSpec::squeezed(0.0, 0.0, 1.0, NonlinearModel::identity());
        assert_eq!(cyclic_phase(&spec, &trunc()).unwrap(), 0.0);
    }

    #[test]
    fn beta_phase_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let omega = 1.1;
        for _ in 0..25 {
            let b = rng.gen_range(0.2..1.5);
            let theta = rng.gen_range(0.0..TAU);
            let eta = rng.gen_range(0.0..0.8);
            let t = rng.gen_range(0.1..6.0);
            let model = NonlinearModel::lamb_dicke(eta);
            let p0 = geometric_phase(
                &StateSpec::coherent1(c(b, 0.0), omega, model.clone()),
                &trunc(),
                t,
            )
            .unwrap();
            let p1 = geometric_phase(
                &StateSpec::coherent1(Complex64::from_polar(b, theta), omega, model),
                &trunc(),
                t,
            )
            .unwrap();
            assert!((p0.gamma_unwrapped - p1.gamma_unwrapped).abs() < 1e-12);
            assert!((p0.chi - p1.chi).abs() < 1e-12);
        }
    }

    #[test]
    fn squeezed_limit_diverges_for_identity() {
        let spec = StateSpec::squeezed(1.0, 0.0, 1.0, NonlinearModel::identity());
        match squeezed_limit_phase(&spec, &trunc(), 0.5) {
            Err(Error::DivergentSeries { .. }) => {}
            other => panic!("expected DivergentSeries, got {other:?}"),
        }
    }

    #[test]
    fn squeezed_limit_matches_large_r() {
        let omega = std::f64::consts::PI / 4.0;
        let t = 0.5;
        let spec = StateSpec::squeezed(12.0, 0.0, omega, NonlinearModel::lamb_dicke(0.8));
        let at_12 = geometric_phase(&spec, &trunc(), t).unwrap().gamma_unwrapped;
        let lim = squeezed_limit_phase(&spec, &trunc(), t).unwrap();
        assert!(
            (at_12 - lim).abs() < 1e-3,
            "gamma(r=12) {at_12} vs limit {lim}"
        );
    }

    #[test]
    fn path_matches_single_point_evaluation() {
        let omega = std::f64::consts::PI / 4.0;
        let spec = StateSpec::coherent1(c(1.0, 0.0), omega, NonlinearModel::lamb_dicke(0.8));
        let ts: Vec<f64> = (0..=64).map(|k| 20.0 * k as f64 / 64.0).collect();
        let path = geometric_phase_path(&spec, &trunc(), &ts).unwrap();
        for sample in path.iter().step_by(16) {
            let single = geometric_phase(&spec, &trunc(), sample.t).unwrap();
            let here = sample.phases.as_ref().unwrap();
            assert!(
                (here.gamma_unwrapped - single.gamma_unwrapped).abs() < 1e-9,
                "t={}",
                sample.t
            );
        }
    }

    #[test]
    fn truncation_doubling_leaves_phases_alone() {
        let omega = std::f64::consts::PI / 4.0;
        let base = trunc();
        let doubled = TruncationConfig {
            n_max_cap: 1024,
            ..base.clone()
        };
        for eta in [0.0, 0.33, 0.6, 0.8] {
            let spec = StateSpec::coherent1(c(1.0, 0.0), omega, NonlinearModel::lamb_dicke(eta));
            let a = geometric_phase(&spec, &base, 7.3).unwrap();
            let b = geometric_phase(&spec, &doubled, 7.3).unwrap();
            assert!(
                (a.gamma_unwrapped - b.gamma_unwrapped).abs() < 1e-10,
                "eta={eta}"
            );
        }
    }
}
