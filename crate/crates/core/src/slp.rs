//! Solutions of `-(1/2)(d/dx)(1/m)(d/dx)u + v·u = λu` in quasi-derivative form.
//!
//! The state is `(u, p)` with `p = (1/2m)u'`, so the system reads
//! `u' = 2m·p`, `p' = (v - λ)·u`. Constant segments use the exact
//! propagator, sampled segments fixed-step RK4.

use std::ops::{Add, Mul};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::mesh::{Mesh, StateTrajectory};
use crate::profile::{CoefficientProfile, Segment, SegmentKind};

/// Maximum `|Im λ|` accepted by the propagators.
pub const MAX_IMAG_LAMBDA: f64 = 1.0e6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// RK4 step bound as a fraction of the profile length.
    pub rk4_fraction: f64,
    /// Absolute RK4 step bound, overriding `rk4_fraction` when set.
    pub rk4_h_max: Option<f64>,
    /// Node count of stored trajectories.
    pub mesh_nodes: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { rk4_fraction: 1.0 / 2000.0, rk4_h_max: None, mesh_nodes: 2048 }
    }
}

impl SolverOptions {
    pub fn h_max(&self, profile: &CoefficientProfile) -> f64 {
        self.rk4_h_max.unwrap_or(self.rk4_fraction * profile.length())
    }
}

/// `(u, p)` with `p = (1/2m)u'`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuasiState {
    pub u: Complex64,
    pub p: Complex64,
}

impl QuasiState {
    pub fn new(u: Complex64, p: Complex64) -> Self {
        Self { u, p }
    }

    pub fn real(u: f64, p: f64) -> Self {
        Self { u: Complex64::new(u, 0.0), p: Complex64::new(p, 0.0) }
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.p.is_finite()
    }
}

/// Wronskian `a.u·b.p − b.u·a.p`.
pub fn wronskian(a: &QuasiState, b: &QuasiState) -> Complex64 {
    a.u * b.p - b.u * a.p
}

/// Propagator of the quasi-derivative system between two positions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferMatrix {
    pub t: [[Complex64; 2]; 2],
    pub from: f64,
    pub to: f64,
    pub lambda: Complex64,
}

impl TransferMatrix {
    pub fn identity(at: f64, lambda: Complex64) -> Self {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        Self { t: [[one, zero], [zero, one]], from: at, to: at, lambda }
    }

    pub fn det(&self) -> Complex64 {
        self.t[0][0] * self.t[1][1] - self.t[0][1] * self.t[1][0]
    }

    pub fn apply(&self, s: &QuasiState) -> QuasiState {
        QuasiState { u: self.t[0][0] * s.u + self.t[0][1] * s.p, p: self.t[1][0] * s.u + self.t[1][1] * s.p }
    }

    /// `next ∘ self`, i.e. propagation over `self` followed by `next`.
    pub fn then(&self, next: &TransferMatrix) -> TransferMatrix {
        let a = &next.t;
        let b = &self.t;
        let mut t = [[Complex64::new(0.0, 0.0); 2]; 2];
        for (i, row) in t.iter_mut().enumerate() {
            for (j, entry) in row.iter_mut().enumerate() {
                *entry = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        TransferMatrix { t, from: self.from, to: next.to, lambda: self.lambda }
    }

    /// Inverse via the adjugate; valid because the determinant is one.
    pub fn inverse(&self) -> TransferMatrix {
        let t = &self.t;
        TransferMatrix {
            t: [[t[1][1], -t[0][1]], [-t[1][0], t[0][0]]],
            from: self.to,
            to: self.from,
            lambda: self.lambda,
        }
    }

    /// Solution started from `(1, 0)`.
    pub fn first_column(&self) -> QuasiState {
        QuasiState::new(self.t[0][0], self.t[1][0])
    }

    /// Solution started from `(0, 1)`.
    pub fn second_column(&self) -> QuasiState {
        QuasiState::new(self.t[0][1], self.t[1][1])
    }

    fn is_finite(&self) -> bool {
        self.t.iter().flatten().all(|z| z.is_finite())
    }
}

fn sinc(z: Complex64) -> Complex64 {
    if z.norm() < 1e-3 {
        let z2 = z * z;
        1.0 - z2 / 6.0 + z2 * z2 / 120.0
    } else {
        z.sin() / z
    }
}

/// Exact propagator over width `s` of a constant segment.
///
/// Written through `cos(ks)` and `sinc(ks)`, both even in `k`, so the
/// branch of `k = √(2m(λ−v))` does not matter and `k → 0` is regular.
pub fn constant_transfer(mass: f64, potential: f64, lambda: Complex64, s: f64) -> [[Complex64; 2]; 2] {
    let shift = lambda - potential;
    let ks = (2.0 * mass * shift).sqrt() * s;
    let c = ks.cos();
    let sn = sinc(ks);
    [[c, sn * (2.0 * mass * s)], [-shift * s * sn, c]]
}

pub(crate) fn rk4<T, const N: usize>(y: [T; N], x: f64, h: f64, f: impl Fn(f64, &[T; N]) -> [T; N]) -> [T; N]
where
    T: Copy + Add<Output = T> + Mul<f64, Output = T>,
{
    let axpy = |y: &[T; N], k: &[T; N], c: f64| -> [T; N] { std::array::from_fn(|i| y[i] + k[i] * c) };
    let k1 = f(x, &y);
    let k2 = f(x + 0.5 * h, &axpy(&y, &k1, 0.5 * h));
    let k3 = f(x + 0.5 * h, &axpy(&y, &k2, 0.5 * h));
    let k4 = f(x + h, &axpy(&y, &k3, h));
    std::array::from_fn(|i| y[i] + (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (h / 6.0))
}

/// Number of RK4 steps over `len` of a sampled segment.
///
/// Besides `h_max`, the step is capped so that `h` times the local
/// oscillation/decay rate stays below 0.2.
pub(crate) fn rk4_steps(seg: &Segment, len: f64, lambda: Complex64, h_max: f64) -> usize {
    let (_, m_max) = seg.mass_range();
    let (v_min, v_max) = seg.potential_range();
    let d = (lambda - v_min).norm().max((lambda - v_max).norm());
    let evanescent = (v_max - lambda.re).max(0.0);
    let rate = (2.0 * m_max * d).sqrt().max(2.0 * m_max).max(evanescent);
    let h = h_max.min(0.2 / rate);
    ((len / h).ceil() as usize).max(1)
}

/// Splits `[s0, s1]` at the sample knots of `seg` and assigns RK4 step counts.
pub(crate) fn rk4_pieces(seg: &Segment, s0: f64, s1: f64, lambda: Complex64, h_max: f64) -> Vec<(f64, f64, usize)> {
    let mut cuts = vec![s0];
    cuts.extend(seg.knots().into_iter().filter(|&k| k > s0 && k < s1));
    cuts.push(s1);
    cuts.windows(2).filter(|w| w[1] > w[0]).map(|w| (w[0], w[1], rk4_steps(seg, w[1] - w[0], lambda, h_max))).collect()
}

fn segment_transfer(seg: &Segment, s0: f64, s1: f64, lambda: Complex64, h_max: f64) -> [[Complex64; 2]; 2] {
    match &seg.kind {
        SegmentKind::Constant { mass, potential } => constant_transfer(*mass, *potential, lambda, s1 - s0),
        SegmentKind::Sampled { .. } => {
            let one = Complex64::new(1.0, 0.0);
            let zero = Complex64::new(0.0, 0.0);
            // columns (u1, p1, u2, p2)
            let mut y = [one, zero, zero, one];
            let rhs = |s: f64, y: &[Complex64; 4]| {
                let two_m = 2.0 * seg.mass_at(s);
                let q = seg.potential_at(s) - lambda;
                [y[1] * two_m, y[0] * q, y[3] * two_m, y[2] * q]
            };
            for (a, b, steps) in rk4_pieces(seg, s0, s1, lambda, h_max) {
                let h = (b - a) / steps as f64;
                for i in 0..steps {
                    y = rk4(y, a + i as f64 * h, h, rhs);
                }
            }
            [[y[0], y[2]], [y[1], y[3]]]
        }
    }
}

/// Transfer matrix over `[x0, x1] ⊆ [x_a, x_b]`, `x0 ≤ x1`.
pub fn transfer_between(
    profile: &CoefficientProfile,
    lambda: Complex64,
    x0: f64,
    x1: f64,
    opts: &SolverOptions,
) -> Result<TransferMatrix> {
    if !lambda.is_finite() || lambda.im.abs() >= MAX_IMAG_LAMBDA {
        return Err(Error::Precondition(format!("|Im λ| must be below {MAX_IMAG_LAMBDA:e}, got λ = {lambda}")));
    }
    let h_max = opts.h_max(profile);
    let mut acc = TransferMatrix::identity(x0, lambda);
    for (a, b, seg) in profile.placed() {
        let lo = a.max(x0);
        let hi = b.min(x1);
        if hi <= lo {
            continue;
        }
        let t = segment_transfer(seg, lo - a, hi - a, lambda, h_max);
        acc = acc.then(&TransferMatrix { t, from: lo, to: hi, lambda });
        if !acc.is_finite() {
            return Err(Error::NonFiniteState { x: hi, lambda: lambda.to_string() });
        }
    }
    acc.to = x1;
    Ok(acc)
}

/// Propagates `state` from `x_a` to `x_b`; returns the final state and the
/// accumulated transfer matrix.
pub fn propagate(
    profile: &CoefficientProfile,
    lambda: Complex64,
    state: QuasiState,
) -> Result<(QuasiState, TransferMatrix)> {
    propagate_with(profile, lambda, state, &SolverOptions::default())
}

pub fn propagate_with(
    profile: &CoefficientProfile,
    lambda: Complex64,
    state: QuasiState,
    opts: &SolverOptions,
) -> Result<(QuasiState, TransferMatrix)> {
    let t = transfer_between(profile, lambda, profile.x_a(), profile.x_b(), opts)?;
    let end = t.apply(&state);
    if !end.is_finite() {
        return Err(Error::NonFiniteState { x: profile.x_b(), lambda: lambda.to_string() });
    }
    Ok((end, t))
}

/// Transfer matrices from `x_a` to every node of `mesh`.
pub(crate) fn transfers_on_mesh(
    profile: &CoefficientProfile,
    lambda: Complex64,
    mesh: &Mesh,
    opts: &SolverOptions,
) -> Result<Vec<TransferMatrix>> {
    let mut out = Vec::with_capacity(mesh.nodes);
    let mut acc = TransferMatrix::identity(mesh.start, lambda);
    out.push(acc);
    for i in 1..mesh.nodes {
        let step = transfer_between(profile, lambda, mesh.node(i - 1), mesh.node(i), opts)?;
        acc = acc.then(&step);
        out.push(acc);
    }
    Ok(out)
}

/// Trajectory of the solution starting from `state` at `x_a`.
pub fn trajectory(
    profile: &CoefficientProfile,
    lambda: Complex64,
    state: QuasiState,
    opts: &SolverOptions,
) -> Result<StateTrajectory> {
    let mesh = Mesh::new(profile.x_a(), profile.x_b(), opts.mesh_nodes);
    let states = transfers_on_mesh(profile, lambda, &mesh, opts)?.iter().map(|t| t.apply(&state)).collect();
    Ok(StateTrajectory { mesh, states })
}

/// The fundamental solutions `φ_λ` (`(1, 0)` at `x_a`) and `ψ_λ` (`(0, 1)` at `x_a`).
#[derive(Debug, Clone)]
pub struct FundamentalPair {
    pub lambda: Complex64,
    pub phi: StateTrajectory,
    pub psi: StateTrajectory,
}

impl FundamentalPair {
    pub fn mesh(&self) -> Mesh {
        self.phi.mesh
    }

    pub fn phi_end(&self) -> QuasiState {
        self.phi.last()
    }

    pub fn psi_end(&self) -> QuasiState {
        self.psi.last()
    }

    /// `φ·p_ψ − ψ·p_φ` at node `i`; identically one.
    pub fn wronskian_at(&self, i: usize) -> Complex64 {
        wronskian(&self.phi.states[i], &self.psi.states[i])
    }
}

pub fn fundamental_pair(profile: &CoefficientProfile, lambda: Complex64) -> Result<FundamentalPair> {
    fundamental_pair_with(profile, lambda, &SolverOptions::default())
}

pub fn fundamental_pair_with(
    profile: &CoefficientProfile,
    lambda: Complex64,
    opts: &SolverOptions,
) -> Result<FundamentalPair> {
    let mesh = Mesh::new(profile.x_a(), profile.x_b(), opts.mesh_nodes);
    fundamental_pair_on(profile, lambda, mesh, opts)
}

/// Fundamental pair sampled on a caller-supplied mesh spanning the profile.
pub fn fundamental_pair_on(
    profile: &CoefficientProfile,
    lambda: Complex64,
    mesh: Mesh,
    opts: &SolverOptions,
) -> Result<FundamentalPair> {
    let transfers = transfers_on_mesh(profile, lambda, &mesh, opts)?;
    let phi = transfers.iter().map(TransferMatrix::first_column).collect();
    let psi = transfers.iter().map(TransferMatrix::second_column).collect();
    Ok(FundamentalPair {
        lambda,
        phi: StateTrajectory { mesh, states: phi },
        psi: StateTrajectory { mesh, states: psi },
    })
}

/// Real-λ helpers used by the eigenvalue machinery.
pub(crate) mod real {
    use super::*;

    /// `sin(x)/x` for `z = x² ≥ 0`, `sinh(x)/x` for `z = -x² < 0`.
    fn sinc_sq(z: f64, s: f64) -> (f64, f64) {
        if z >= 0.0 {
            let x = z.sqrt() * s;
            let sn = if x < 1e-3 { 1.0 - x * x / 6.0 + x.powi(4) / 120.0 } else { x.sin() / x };
            (x.cos(), sn)
        } else {
            let x = (-z).sqrt() * s;
            let sn = if x < 1e-3 { 1.0 + x * x / 6.0 + x.powi(4) / 120.0 } else { x.sinh() / x };
            (x.cosh(), sn)
        }
    }

    pub fn constant_step(mass: f64, potential: f64, lambda: f64, s: f64, y: [f64; 2]) -> [f64; 2] {
        let shift = lambda - potential;
        let (c, sn) = sinc_sq(2.0 * mass * shift, s);
        [c * y[0] + 2.0 * mass * s * sn * y[1], -shift * s * sn * y[0] + c * y[1]]
    }

    /// `∫_0^w u(s)² ds` for the exact solution on a constant segment started at `y`.
    pub fn constant_norm_sq(mass: f64, potential: f64, lambda: f64, w: f64, y: [f64; 2]) -> f64 {
        let z = 2.0 * mass * (lambda - potential);
        let zw2 = z * w * w;
        // u = y0·C + 2m·y1·Sk with C = cos(ks), Sk = sin(ks)/k.
        let (icc, ics, iss) = if zw2.abs() < 1e-3 {
            let w2 = w * w;
            (
                w - z * w * w2 / 3.0 + z * z * w * w2 * w2 / 15.0 - 2.0 * z.powi(3) * w.powi(7) / 315.0,
                w2 / 2.0 - z * w2 * w2 / 6.0 + z * z * w2.powi(3) / 45.0 - z.powi(3) * w2.powi(4) / 630.0,
                w * w2 / 3.0 - z * w * w2 * w2 / 15.0 + 2.0 * z * z * w.powi(7) / 315.0
                    - z.powi(3) * w.powi(9) / 2835.0,
            )
        } else if z > 0.0 {
            let k = z.sqrt();
            let s2 = (2.0 * k * w).sin() / (4.0 * k);
            ((w / 2.0 + s2), (k * w).sin().powi(2) / (2.0 * z), (w / 2.0 - s2) / z)
        } else {
            let kappa = (-z).sqrt();
            let s2 = (2.0 * kappa * w).sinh() / (4.0 * kappa);
            ((w / 2.0 + s2), (kappa * w).sinh().powi(2) / (-2.0 * z), (s2 - w / 2.0) / (-z))
        };
        let a = y[0];
        let b = 2.0 * mass * y[1];
        a * a * icc + 2.0 * a * b * ics + b * b * iss
    }

    /// RK4 over `[s0, s1]` of a sampled segment, carrying `∫u²` alongside.
    pub fn sampled_step(seg: &Segment, s0: f64, s1: f64, lambda: f64, h_max: f64, y: [f64; 2]) -> ([f64; 2], f64) {
        let mut z = [y[0], y[1], 0.0];
        let rhs =
            |s: f64, z: &[f64; 3]| [2.0 * seg.mass_at(s) * z[1], (seg.potential_at(s) - lambda) * z[0], z[0] * z[0]];
        for (a, b, steps) in rk4_pieces(seg, s0, s1, Complex64::new(lambda, 0.0), h_max) {
            let h = (b - a) / steps as f64;
            for i in 0..steps {
                z = rk4(z, a + i as f64 * h, h, rhs);
            }
        }
        ([z[0], z[1]], z[2])
    }

    /// Propagates a real state across the whole profile, returning it with `∫u²`.
    pub fn propagate_with_norm(
        profile: &CoefficientProfile,
        lambda: f64,
        mut y: [f64; 2],
        h_max: f64,
    ) -> ([f64; 2], f64) {
        let mut norm_sq = 0.0;
        for (a, b, seg) in profile.placed() {
            match &seg.kind {
                SegmentKind::Constant { mass, potential } => {
                    norm_sq += constant_norm_sq(*mass, *potential, lambda, b - a, y);
                    y = constant_step(*mass, *potential, lambda, b - a, y);
                }
                SegmentKind::Sampled { .. } => {
                    let (next, n) = sampled_step(seg, 0.0, b - a, lambda, h_max, y);
                    norm_sq += n;
                    y = next;
                }
            }
        }
        (y, norm_sq)
    }
}
