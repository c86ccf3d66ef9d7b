//! Independent cross-check path on a truncated Fock space.
//!
//! Everything here works with dense matrices: ladder operators deformed by
//! `f(N)`, matrix exponentials of the displacement/squeeze generators, and
//! quadrature evaluation of the phases. None of it shares code with the
//! closed-form series path, which is the point.
//!
//! Truncation-edge discipline: operator identities hold on the truncated
//! space only away from the top levels, so every residual is measured on a
//! sub-block well below the edge and the margin is reported alongside.

use nalgebra::DMatrix;
use num_complex::Complex64;
use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::laguerre::NonlinearModel;
use crate::phases::{self, PhaseDecomposition, OVERLAP_FLOOR};
use crate::states::{FockVector, StateSpec, TruncationConfig};

type CMat = DMatrix<Complex64>;

/// Residual threshold for the inverse-consistency check of the matrix
/// exponential, relative to the product of the two factor norms.
pub const EXP_RESIDUAL_TOL: f64 = 1e-9;
const MAX_SQUARINGS: u32 = 60;

/// Dense complex operator on the truncated Fock space.
#[derive(Debug, Clone, PartialEq)]
pub struct FockOperator {
    mat: CMat,
}

impl FockOperator {
    pub fn from_matrix(mat: CMat) -> Self {
        assert_eq!(mat.nrows(), mat.ncols(), "operators are square");
        Self { mat }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            mat: CMat::zeros(dim, dim),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            mat: CMat::identity(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.mat
    }

    pub fn adjoint(&self) -> FockOperator {
        Self {
            mat: self.mat.adjoint(),
        }
    }

    pub fn scale(&self, z: Complex64) -> FockOperator {
        Self {
            mat: self.mat.map(|v| v * z),
        }
    }

    /// Apply to a ket given as a coefficient slice.
    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(v.len(), self.dim());
        let n = self.dim();
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        for j in 0..n {
            let vj = v[j];
            if vj == Complex64::new(0.0, 0.0) {
                continue;
            }
            for i in 0..n {
                out[i] += self.mat[(i, j)] * vj;
            }
        }
        out
    }

    /// Largest entry magnitude over the whole matrix.
    pub fn max_abs(&self) -> f64 {
        self.mat.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest entry magnitude over the leading `block x block` sub-block.
    pub fn block_max_abs(&self, block: usize) -> f64 {
        let mut m = 0.0f64;
        for j in 0..block.min(self.dim()) {
            for i in 0..block.min(self.dim()) {
                m = m.max(self.mat[(i, j)].norm());
            }
        }
        m
    }
}

impl std::ops::Mul for &FockOperator {
    type Output = FockOperator;
    fn mul(self, rhs: &FockOperator) -> FockOperator {
        FockOperator {
            mat: &self.mat * &rhs.mat,
        }
    }
}

impl std::ops::Add for &FockOperator {
    type Output = FockOperator;
    fn add(self, rhs: &FockOperator) -> FockOperator {
        FockOperator {
            mat: &self.mat + &rhs.mat,
        }
    }
}

impl std::ops::Sub for &FockOperator {
    type Output = FockOperator;
    fn sub(self, rhs: &FockOperator) -> FockOperator {
        FockOperator {
            mat: &self.mat - &rhs.mat,
        }
    }
}

/// `[x, y] = xy - yx`.
pub fn commutator(x: &FockOperator, y: &FockOperator) -> FockOperator {
    &(x * y) - &(y * x)
}

/// The ladder operators of one nonlinearity on a truncated space.
///
/// `deformed_lower = a f(N)` and `dual_lower = a / f(N)`; the raising
/// partners are exact adjoints by construction.
#[derive(Debug, Clone)]
pub struct LadderOps {
    pub lower: FockOperator,
    pub raise: FockOperator,
    pub number: FockOperator,
    pub deformed_lower: FockOperator,
    pub deformed_raise: FockOperator,
    pub dual_lower: FockOperator,
    pub dual_raise: FockOperator,
    f: Vec<f64>,
}

impl LadderOps {
    pub fn f_values(&self) -> &[f64] {
        &self.f
    }
}

/// Build `a`, `a^dag`, `N` and the deformed/dual pairs at dimension `dim`.
pub fn build_ladder(model: &NonlinearModel, dim: usize) -> Result<LadderOps> {
    assert!(dim >= 2, "need at least two levels");
    let mut f = Vec::with_capacity(dim);
    for n in 0..dim {
        let v = model.eval(n)?;
        if v == 0.0 {
            return Err(Error::ZeroNonlinearity { n });
        }
        f.push(v);
    }
    let mut lower = CMat::zeros(dim, dim);
    let mut deformed_lower = CMat::zeros(dim, dim);
    let mut dual_lower = CMat::zeros(dim, dim);
    for n in 1..dim {
        let root = (n as f64).sqrt();
        lower[(n - 1, n)] = Complex64::new(root, 0.0);
        deformed_lower[(n - 1, n)] = Complex64::new(root * f[n], 0.0);
        dual_lower[(n - 1, n)] = Complex64::new(root / f[n], 0.0);
    }
    let mut number = CMat::zeros(dim, dim);
    for n in 0..dim {
        number[(n, n)] = Complex64::new(n as f64, 0.0);
    }
    let lower = FockOperator::from_matrix(lower);
    let deformed_lower = FockOperator::from_matrix(deformed_lower);
    let dual_lower = FockOperator::from_matrix(dual_lower);
    Ok(LadderOps {
        raise: lower.adjoint(),
        deformed_raise: deformed_lower.adjoint(),
        dual_raise: dual_lower.adjoint(),
        lower,
        deformed_lower,
        dual_lower,
        number: FockOperator::from_matrix(number),
        f,
    })
}

/// Largest deviation of `[deformed, dual^dag]` and `[dual, deformed^dag]`
/// from the identity, measured on columns `n <= dim - 2`.
pub fn unit_commutator_residual(ops: &LadderOps) -> f64 {
    let dim = ops.lower.dim();
    let id = FockOperator::identity(dim);
    let c1 = &commutator(&ops.deformed_lower, &ops.dual_raise) - &id;
    let c2 = &commutator(&ops.dual_lower, &ops.deformed_raise) - &id;
    let mut m = 0.0f64;
    for c in [&c1, &c2] {
        for j in 0..dim - 1 {
            for i in 0..dim {
                m = m.max(c.mat[(i, j)].norm());
            }
        }
    }
    m
}

/// Largest deviation of `[A, A^dag]` from `(N+1) f^2(N+1) - N f^2(N)` on
/// columns `n <= dim - 2`.
pub fn nonlinear_algebra_residual(ops: &LadderOps, model: &NonlinearModel) -> Result<f64> {
    let dim = ops.lower.dim();
    let comm = commutator(&ops.deformed_lower, &ops.deformed_raise);
    let mut m = 0.0f64;
    for j in 0..dim - 1 {
        let fj = ops.f[j];
        let fj1 = if j + 1 < dim {
            ops.f[j + 1]
        } else {
            model.eval(j + 1)?
        };
        let expect = (j as f64 + 1.0) * fj1 * fj1 - j as f64 * fj * fj;
        for i in 0..dim {
            let want = if i == j {
                Complex64::new(expect, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            };
            m = m.max((comm.mat[(i, j)] - want).norm());
        }
    }
    Ok(m)
}

// --- matrix exponential -------------------------------------------------

/// Exact power-of-two diagonal balancing: returns the balanced matrix and
/// the diagonal scale. Scaling by powers of two is lossless, and the
/// deformed generators are diagonal-similar to well-conditioned ones, so
/// this removes almost all of their dynamic range.
fn balance(m: &CMat) -> (CMat, Vec<f64>) {
    let n = m.nrows();
    let mut a = m.clone();
    let mut d = vec![1.0f64; n];
    for _sweep in 0..100 {
        let mut changed = false;
        for i in 0..n {
            let mut r = 0.0;
            let mut c = 0.0;
            for j in 0..n {
                if j != i {
                    r += a[(i, j)].norm();
                    c += a[(j, i)].norm();
                }
            }
            if r == 0.0 || c == 0.0 {
                continue;
            }
            let mut fscale = 1.0f64;
            let mut cc = c;
            let mut rr = r;
            while cc < rr / 2.0 {
                cc *= 2.0;
                rr /= 2.0;
                fscale *= 2.0;
            }
            while cc >= rr * 2.0 {
                cc /= 2.0;
                rr *= 2.0;
                fscale /= 2.0;
            }
            if fscale != 1.0 && (cc + rr) < 0.95 * (c + r) {
                let inv = 1.0 / fscale;
                for j in 0..n {
                    a[(j, i)] *= Complex64::new(fscale, 0.0);
                    a[(i, j)] *= Complex64::new(inv, 0.0);
                }
                d[i] *= fscale;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    (a, d)
}

fn one_norm(m: &CMat) -> f64 {
    let mut best = 0.0f64;
    for j in 0..m.ncols() {
        let s: f64 = (0..m.nrows()).map(|i| m[(i, j)].norm()).sum();
        best = best.max(s);
    }
    best
}

// Pade-13 coefficients (Higham, scaling-and-squaring).
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const PADE13_THETA: f64 = 5.371920351148152;

fn pade13(m: &CMat) -> Result<CMat> {
    let n = m.nrows();
    let l1 = one_norm(m);
    if !l1.is_finite() {
        return Err(Error::NonConvergent { residual: l1 });
    }
    let mut s: u32 = 0;
    if l1 > PADE13_THETA {
        s = (l1 / PADE13_THETA).log2().ceil() as u32;
        if s > MAX_SQUARINGS {
            return Err(Error::NonConvergent { residual: l1 });
        }
    }
    let scale = 2.0f64.powi(-(s as i32));
    let a = m.map(|z| z * scale);
    let id = CMat::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let v1 = &a6 * PADE13[13] + &a4 * PADE13[11] + &a2 * PADE13[9];
    let u = &a
        * (&(&a6 * &v1)
            + &(&a6 * PADE13[7] + &a4 * PADE13[5] + &a2 * PADE13[3] + &id * PADE13[1]));
    let v = &a6 * (&a6 * PADE13[12] + &a4 * PADE13[10] + &a2 * PADE13[8])
        + &a6 * PADE13[6]
        + &a4 * PADE13[4]
        + &a2 * PADE13[2]
        + &id * PADE13[0];
    let denom = &v - &u;
    let numer = &v + &u;
    let mut r = denom
        .lu()
        .solve(&numer)
        .ok_or(Error::NonConvergent { residual: f64::INFINITY })?;
    for _ in 0..s {
        r = &r * &r;
    }
    Ok(r)
}

fn expm_balanced(m: &CMat) -> Result<CMat> {
    let (balanced, d) = balance(m);
    let e = pade13(&balanced)?;
    let n = m.nrows();
    let mut out = e;
    for i in 0..n {
        for j in 0..n {
            out[(i, j)] *= d[i] / d[j];
        }
    }
    Ok(out)
}

/// `e^M` and `e^{-M}`, checked against each other: the inverse-consistency
/// residual `|e^M e^{-M} - I|_1`, taken relative to `|e^M|_1 |e^{-M}|_1`,
/// must stay below [`EXP_RESIDUAL_TOL`].
pub fn op_exponential_pair(m: &FockOperator) -> Result<(FockOperator, FockOperator)> {
    let e = expm_balanced(&m.mat)?;
    let eneg = expm_balanced(&m.mat.map(|z| -z))?;
    let prod = &e * &eneg;
    let id = CMat::identity(m.dim(), m.dim());
    let raw = one_norm(&(&prod - &id));
    let denom = (one_norm(&e) * one_norm(&eneg)).max(1.0);
    let residual = raw / denom;
    if !(residual < EXP_RESIDUAL_TOL) {
        return Err(Error::NonConvergent { residual });
    }
    Ok((FockOperator::from_matrix(e), FockOperator::from_matrix(eneg)))
}

/// `e^M` by balanced Pade-13 scaling-and-squaring.
pub fn op_exponential(m: &FockOperator) -> Result<FockOperator> {
    Ok(op_exponential_pair(m)?.0)
}

/// Which displacement construction: the first kind uses the dual raising
/// operator, the second the deformed one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DisplacedKind {
    /// `exp(beta B^dag - beta* A)`
    FirstKind,
    /// `exp(beta A^dag - beta* B)`
    SecondKind,
}

/// `exp(generator) |0>` on the truncated space, unnormalised.
pub fn displaced_state(
    kind: DisplacedKind,
    beta: Complex64,
    model: &NonlinearModel,
    dim: usize,
) -> Result<FockVector> {
    let ops = build_ladder(model, dim)?;
    let (raise, lower) = match kind {
        DisplacedKind::FirstKind => (&ops.dual_raise, &ops.deformed_lower),
        DisplacedKind::SecondKind => (&ops.deformed_raise, &ops.dual_lower),
    };
    let gen = &raise.scale(beta) - &lower.scale(beta.conj());
    let e = op_exponential(&gen)?;
    Ok(FockVector::new(e.mat.column(0).iter().copied().collect()))
}

/// Which squeeze construction, mirroring the two displacement kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SqueezedKind {
    /// `exp[(zeta B^dag^2 - zeta* A^2)/2]`
    FirstKind,
    /// `exp[(zeta A^dag^2 - zeta* B^2)/2]`
    SecondKind,
}

fn squeeze_generator(
    kind: SqueezedKind,
    r: f64,
    phi: f64,
    ops: &LadderOps,
) -> FockOperator {
    let zeta = Complex64::from_polar(r, phi);
    let (raise, lower) = match kind {
        SqueezedKind::FirstKind => (&ops.dual_raise, &ops.deformed_lower),
        SqueezedKind::SecondKind => (&ops.deformed_raise, &ops.dual_lower),
    };
    let r2 = raise * raise;
    let l2 = lower * lower;
    &r2.scale(zeta * 0.5) - &l2.scale(zeta.conj() * 0.5)
}

/// `exp(squeeze generator) |0>`, unit-normalised with the leading
/// coefficient real positive.
pub fn squeezed_state_oracle(
    kind: SqueezedKind,
    r: f64,
    phi: f64,
    model: &NonlinearModel,
    dim: usize,
) -> Result<FockVector> {
    let ops = build_ladder(model, dim)?;
    let gen = squeeze_generator(kind, r, phi, &ops);
    let e = op_exponential(&gen)?;
    let mut v: Vec<Complex64> = e.mat.column(0).iter().copied().collect();
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let lead = v[0] / norm;
    let gauge = if lead.norm() > 0.0 {
        lead.conj() / lead.norm()
    } else {
        Complex64::new(1.0, 0.0)
    };
    for z in &mut v {
        *z = *z * gauge / norm;
    }
    Ok(FockVector::new(v))
}

/// Result of one squeeze-conjugation identity check.
#[derive(Debug, Clone, Copy)]
pub struct BchCheck {
    /// Largest entry deviation on the edge-safe block.
    pub residual: f64,
    /// The identity was measured on levels `0..block`.
    pub block: usize,
    /// Levels of headroom between the block and the truncation edge.
    pub margin: usize,
}

/// Residual of the squeeze conjugation identity on the edge-safe block:
/// first kind: `S1 A S1^{-1} = cosh(r) A - e^{i phi} sinh(r) B^dag`;
/// second kind: `S B S^{-1} = cosh(r) B - e^{i phi} sinh(r) A^dag`.
///
/// Squeezing mixes level `n` into a band that widens multiplicatively, so
/// the identity is only edge-clean well below the truncation; a quarter of
/// the space is kept.
pub fn bch_transform_check(
    kind: SqueezedKind,
    r: f64,
    phi: f64,
    model: &NonlinearModel,
    dim: usize,
) -> Result<BchCheck> {
    let ops = build_ladder(model, dim)?;
    let gen = squeeze_generator(kind, r, phi, &ops);
    let (s, s_inv) = op_exponential_pair(&gen)?;
    let phase = Complex64::from_polar(r.sinh(), phi);
    let (mid, rhs) = match kind {
        SqueezedKind::FirstKind => (
            &ops.deformed_lower,
            &ops.deformed_lower.scale(Complex64::new(r.cosh(), 0.0))
                - &ops.dual_raise.scale(phase),
        ),
        SqueezedKind::SecondKind => (
            &ops.dual_lower,
            &ops.dual_lower.scale(Complex64::new(r.cosh(), 0.0))
                - &ops.deformed_raise.scale(phase),
        ),
    };
    let lhs = &(&s * mid) * &s_inv;
    let diff = &lhs - &rhs;
    let block = dim / 4;
    Ok(BchCheck {
        residual: diff.block_max_abs(block),
        block,
        margin: dim - block,
    })
}

// --- quadrature phases ----------------------------------------------------

/// Oracle phase decomposition plus the connection-integral route.
#[derive(Debug, Clone, Copy)]
pub struct OraclePhases {
    /// Phases from the overlap-argument and quadrature dynamical phase.
    pub phases: PhaseDecomposition,
    /// Geometric phase from integrating the reference-section connection.
    pub gamma_connection: f64,
    /// Simpson samples actually used.
    pub grid_points: usize,
}

/// Grid size heuristic: enough Simpson samples to resolve the fastest
/// retained energy with wide margin.
pub fn suggested_grid_points(v: &FockVector, omega: f64, t: f64) -> usize {
    let e_max = omega * (v.truncation_index() as f64 + 0.5);
    let raw = (128.0 * e_max * t / TAU).ceil() as usize;
    let clamped = raw.clamp(4096, 262144);
    clamped | 1
}

fn simpson(values: &[f64], h: f64) -> f64 {
    debug_assert!(values.len() >= 3 && values.len() % 2 == 1);
    let n = values.len();
    let mut s = values[0] + values[n - 1];
    for (k, v) in values.iter().enumerate().take(n - 1).skip(1) {
        s += if k % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    s * h / 3.0
}

struct GridEval {
    /// overlap S(tau_j)
    s: Vec<Complex64>,
    /// d/dtau overlap
    s_dot: Vec<Complex64>,
    /// sum_n E_n w_n at tau_j (constant in exact arithmetic)
    energy_mean: Vec<f64>,
}

fn eval_grid(w: &[f64], energies: &[f64], t: f64, npts: usize) -> GridEval {
    let mut s = Vec::with_capacity(npts);
    let mut s_dot = Vec::with_capacity(npts);
    let mut energy_mean = Vec::with_capacity(npts);
    for j in 0..npts {
        let tau = t * j as f64 / (npts - 1) as f64;
        let mut sv = Complex64::new(0.0, 0.0);
        let mut sd = Complex64::new(0.0, 0.0);
        let mut em = 0.0;
        for (&wn, &en) in w.iter().zip(energies) {
            if wn == 0.0 {
                continue;
            }
            let z = Complex64::from_polar(wn, -en * tau);
            sv += z;
            sd += Complex64::new(0.0, -en) * z;
            em += en * wn;
        }
        s.push(sv);
        s_dot.push(sd);
        energy_mean.push(em);
    }
    GridEval {
        s,
        s_dot,
        energy_mean,
    }
}

/// Phases of `spec` at `t` from truncated state vectors: the total phase as
/// the unwrapped overlap argument, the dynamical phase by composite-Simpson
/// quadrature of `-i <psi|d/dtau|psi>` with the exact derivative
/// `c_n' = -i E_n c_n`, and the geometric phase both as their difference
/// and as the integral of the reference-section connection. The two routes
/// must agree to 1e-8 and the quadrature must be stable under step halving.
pub fn oracle_phases(
    spec: &StateSpec,
    trunc: &TruncationConfig,
    t: f64,
    grid_points: usize,
) -> Result<OraclePhases> {
    let v = spec.coefficients(trunc)?;
    oracle_phases_from_vector(&v, spec.omega(), t, grid_points)
}

/// Same as [`oracle_phases`] but starting from an explicit state vector.
pub fn oracle_phases_from_vector(
    v: &FockVector,
    omega: f64,
    t: f64,
    grid_points: usize,
) -> Result<OraclePhases> {
    if t == 0.0 {
        return Ok(OraclePhases {
            phases: PhaseDecomposition::zero(),
            gamma_connection: 0.0,
            grid_points: 0,
        });
    }
    let hat = v.normalized_coeffs();
    let w: Vec<f64> = hat.iter().map(|z| z.norm_sqr()).collect();
    let energies: Vec<f64> = (0..w.len()).map(|n| omega * (n as f64 + 0.5)).collect();

    let npts = grid_points.max(5) | 1;
    let fine_npts = 2 * (npts - 1) + 1;
    let fine = eval_grid(&w, &energies, t, fine_npts);
    for (j, sv) in fine.s.iter().enumerate() {
        if sv.norm() < OVERLAP_FLOOR {
            return Err(Error::UndefinedPhase {
                t: t * j as f64 / (fine_npts - 1) as f64,
                overlap: sv.norm(),
            });
        }
    }

    let connection = |g: &GridEval| -> Vec<f64> {
        g.s
            .iter()
            .zip(&g.s_dot)
            .zip(&g.energy_mean)
            .map(|((s, sd), em)| (sd / s).im + em)
            .collect()
    };
    let h_fine = t / (fine_npts - 1) as f64;
    let gamma_conn_fine = simpson(&connection(&fine), h_fine);

    // base grid = every second sample of the fine grid
    let base = GridEval {
        s: fine.s.iter().copied().step_by(2).collect(),
        s_dot: fine.s_dot.iter().copied().step_by(2).collect(),
        energy_mean: fine.energy_mean.iter().copied().step_by(2).collect(),
    };
    let h = t / (npts - 1) as f64;
    let gamma_conn = simpson(&connection(&base), h);
    let change = (gamma_conn_fine - gamma_conn).abs();
    if change > 1e-8 {
        return Err(Error::QuadratureUnstable {
            detail: "connection integral moved under step halving".into(),
            change,
        });
    }

    let delta_integrand: Vec<f64> = base.energy_mean.iter().map(|em| -em).collect();
    let delta = simpson(&delta_integrand, h);

    let overlap_arg = |tau: f64| -> Result<f64> {
        let mut sv = Complex64::new(0.0, 0.0);
        for (&wn, &en) in w.iter().zip(&energies) {
            if wn != 0.0 {
                sv += Complex64::from_polar(wn, -en * tau);
            }
        }
        if sv.norm() < OVERLAP_FLOOR {
            return Err(Error::UndefinedPhase {
                t: tau,
                overlap: sv.norm(),
            });
        }
        Ok(sv.arg())
    };
    let chi = phases::continuous_arg(&overlap_arg, t)?;

    let gamma_unwrapped = chi - delta;
    let agreement = (gamma_unwrapped - gamma_conn_fine).abs();
    if agreement > 1e-8 {
        return Err(Error::QuadratureUnstable {
            detail: "chi - delta and connection-integral routes disagree".into(),
            change: agreement,
        });
    }
    Ok(OraclePhases {
        phases: PhaseDecomposition {
            chi,
            delta,
            gamma_unwrapped,
            gamma_mod: gamma_unwrapped.rem_euclid(TAU),
        },
        gamma_connection: gamma_conn_fine,
        grid_points: npts,
    })
}
