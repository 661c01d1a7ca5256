//! Eigenpairs of the internal operator under Dirichlet/Robin end conditions.
//!
//! Eigenvalues are located with the Prüfer angle `θ = atan2(u, p)` of the
//! solution satisfying the left condition. `θ(x_r)` is increasing in `λ`
//! and the k-th eigenvalue solves `θ(x_r) = β + (k−1)π`, which gives
//! certified indexing without scanning for sign changes.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::StateTrajectory;
use crate::profile::{CoefficientProfile, Segment, SegmentKind};
use crate::roots::brent;
use crate::slp::{self, real, QuasiState, SolverOptions};
use crate::weyl::{self, LeadSpec, TauSample};

/// Robin at `x_l` means `p(x_l) = κ·u(x_l)`; at `x_r` it means `p(x_r) = −κ·u(x_r)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EndpointCondition {
    Dirichlet,
    Robin { kappa: f64 },
}

impl EndpointCondition {
    pub const NEUMANN: EndpointCondition = EndpointCondition::Robin { kappa: 0.0 };

    pub fn robin(kappa: f64) -> Self {
        EndpointCondition::Robin { kappa }
    }

    fn validate(&self) -> Result<()> {
        match self {
            EndpointCondition::Robin { kappa } if !kappa.is_finite() => {
                Err(Error::Precondition(format!("Robin parameter must be finite, got {kappa}")))
            }
            _ => Ok(()),
        }
    }

    fn kappa(&self) -> f64 {
        match self {
            EndpointCondition::Dirichlet => 0.0,
            EndpointCondition::Robin { kappa } => *kappa,
        }
    }

    /// State at `x_l` satisfying the condition there.
    fn left_state(&self) -> [f64; 2] {
        match self {
            EndpointCondition::Dirichlet => [0.0, 1.0],
            EndpointCondition::Robin { kappa } => [1.0, *kappa],
        }
    }

    /// Prüfer angle in `(0, π]` of states satisfying the condition at `x_r`.
    fn right_angle(&self) -> f64 {
        match self {
            EndpointCondition::Dirichlet => PI,
            EndpointCondition::Robin { kappa } => 1f64.atan2(-kappa),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    /// 1-based.
    pub index: usize,
    pub lambda: f64,
    /// Normalized eigenfunction on the trajectory mesh, when requested.
    pub psi: Option<StateTrajectory>,
    /// `Γ₀ψ = (ψ(x_l), ψ(x_r))`
    pub trace0: [f64; 2],
    /// `Γ₁ψ = (p(x_l), −p(x_r))`
    pub trace1: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenOptions {
    pub solver: SolverOptions,
    /// Store mesh trajectories of the eigenfunctions.
    pub with_mesh: bool,
    /// Absolute/relative tolerance on eigenvalues.
    pub lambda_tol: f64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self { solver: SolverOptions::default(), with_mesh: true, lambda_tol: 1e-13 }
    }
}

/// Shooting residual whose zeros are the eigenvalues.
pub fn eigencondition(
    profile: &CoefficientProfile,
    bc_left: EndpointCondition,
    bc_right: EndpointCondition,
    lambda: f64,
) -> Result<f64> {
    let y = bc_left.left_state();
    let (end, _) = slp::propagate(profile, Complex64::new(lambda, 0.0), QuasiState::real(y[0], y[1]))?;
    Ok(match bc_right {
        EndpointCondition::Dirichlet => end.u.re,
        EndpointCondition::Robin { kappa } => end.p.re + kappa * end.u.re,
    })
}

fn normalize(y: [f64; 2]) -> [f64; 2] {
    let r = y[0].hypot(y[1]);
    if r > 0.0 && r.is_finite() {
        [y[0] / r, y[1] / r]
    } else {
        y
    }
}

/// Angle of `(u, p)` reduced to `[0, π)`.
fn reduced_angle(y: [f64; 2]) -> f64 {
    let t = y[0].atan2(y[1]);
    if t < 0.0 {
        t + PI
    } else if t >= PI {
        t - PI
    } else {
        t
    }
}

/// Tracks the lifted angle through stepwise propagation: `θ = jπ + θ̃`,
/// where `j` counts zeros of `u`. `θ` always increases through multiples
/// of π, so each zero of `u` adds exactly one to `j`.
struct Lifted {
    j: f64,
    y: [f64; 2],
}

impl Lifted {
    fn enter(theta: f64, y: [f64; 2]) -> Self {
        let y = normalize(y);
        Self { j: ((theta - reduced_angle(y)) / PI).round(), y }
    }

    fn step(&mut self, next: [f64; 2]) {
        let next = normalize(next);
        let (a, b) = (self.y[0], next[0]);
        if (a != 0.0 && b == 0.0) || a * b < 0.0 {
            self.j += 1.0;
        }
        self.y = next;
    }

    fn theta(&self) -> f64 {
        self.j * PI + reduced_angle(self.y)
    }
}

const OSCILLATORY_EPS: f64 = 1e-8;

fn prufer_segment(seg: &Segment, w: f64, lambda: f64, h_max: f64, theta: f64, y: [f64; 2]) -> (f64, [f64; 2]) {
    match &seg.kind {
        SegmentKind::Constant { mass, potential } if lambda - potential > OSCILLATORY_EPS => {
            // (u, q) with q = (2m/k)p rotates uniformly at rate k.
            let k = (2.0 * mass * (lambda - potential)).sqrt();
            let r = 2.0 * mass / k;
            let n = (theta / PI).round();
            let phi = n * PI + ((theta - n * PI).tan() / r).atan();
            let phi = phi + k * w;
            let n = (phi / PI).round();
            let theta = n * PI + (r * (phi - n * PI).tan()).atan();
            (theta, normalize(real::constant_step(*mass, *potential, lambda, w, y)))
        }
        SegmentKind::Constant { mass, potential } => {
            let rate = (2.0 * mass).max((lambda - potential).abs());
            let steps = (w * rate / (PI / 4.0)).ceil().max(1.0) as usize;
            let h = w / steps as f64;
            let mut lift = Lifted::enter(theta, y);
            for _ in 0..steps {
                let next = real::constant_step(*mass, *potential, lambda, h, lift.y);
                lift.step(next);
            }
            (lift.theta(), lift.y)
        }
        SegmentKind::Sampled { .. } => {
            let mut lift = Lifted::enter(theta, y);
            let rhs = |s: f64, z: &[f64; 2]| [2.0 * seg.mass_at(s) * z[1], (seg.potential_at(s) - lambda) * z[0]];
            for (a, b, steps) in slp::rk4_pieces(seg, 0.0, w, Complex64::new(lambda, 0.0), h_max) {
                let h = (b - a) / steps as f64;
                for i in 0..steps {
                    let next = slp::rk4(lift.y, a + i as f64 * h, h, rhs);
                    lift.step(next);
                }
            }
            (lift.theta(), lift.y)
        }
    }
}

/// Lifted Prüfer angle at `x_r` of the solution started from `start` at `x_l`.
fn prufer_end(profile: &CoefficientProfile, lambda: f64, start: [f64; 2], h_max: f64) -> f64 {
    let mut y = normalize(start);
    let mut theta = y[0].atan2(y[1]);
    for (a, b, seg) in profile.placed() {
        (theta, y) = prufer_segment(seg, b - a, lambda, h_max, theta, y);
    }
    theta
}

struct Problem<'a> {
    profile: &'a CoefficientProfile,
    start: [f64; 2],
    beta: f64,
    h_max: f64,
}

impl Problem<'_> {
    fn theta(&self, lambda: f64) -> f64 {
        prufer_end(self.profile, lambda, self.start, self.h_max)
    }

    /// Number of eigenvalues strictly below `lambda`.
    fn count_below(&self, lambda: f64) -> usize {
        ((self.theta(lambda) - self.beta) / PI).ceil().max(0.0) as usize
    }
}

/// Number of eigenvalues strictly below `lambda`.
pub fn count_below(
    profile: &CoefficientProfile,
    bc_left: EndpointCondition,
    bc_right: EndpointCondition,
    lambda: f64,
) -> usize {
    let problem = Problem {
        profile,
        start: bc_left.left_state(),
        beta: bc_right.right_angle(),
        h_max: SolverOptions::default().h_max(profile),
    };
    problem.count_below(lambda)
}

/// First `k_max` eigenpairs, with mesh eigenfunctions.
pub fn eigen_scan(
    profile: &CoefficientProfile,
    bc_left: EndpointCondition,
    bc_right: EndpointCondition,
    k_max: usize,
) -> Result<Vec<EigenPair>> {
    eigen_scan_with(profile, bc_left, bc_right, k_max, &EigenOptions::default())
}

pub fn eigen_scan_with(
    profile: &CoefficientProfile,
    bc_left: EndpointCondition,
    bc_right: EndpointCondition,
    k_max: usize,
    opts: &EigenOptions,
) -> Result<Vec<EigenPair>> {
    if k_max == 0 {
        return Err(Error::Precondition("k_max must be at least 1".into()));
    }
    bc_left.validate()?;
    bc_right.validate()?;
    let problem = Problem {
        profile,
        start: bc_left.left_state(),
        beta: bc_right.right_angle(),
        h_max: opts.solver.h_max(profile),
    };

    let (v_min, v_max) = profile.potential_range();
    let (m_min, m_max) = profile.mass_range();
    let kappa_max = bc_left.kappa().abs().max(bc_right.kappa().abs());
    let robin_depth = 2.0 * (kappa_max * kappa_max / (2.0 * m_min)).max(2.0 * m_max * kappa_max * kappa_max);
    let mut lo = v_min - robin_depth - 1.0;
    let mut guard = 0;
    while problem.count_below(lo) > 0 {
        lo -= 2.0 * (lo.abs() + 1.0);
        guard += 1;
        if guard > 60 {
            return Err(Error::BracketFailure { index: 1, lo, hi: v_min });
        }
    }
    let len = profile.length();
    let mut hi = v_max + (((k_max + 1) as f64) * PI / len).powi(2) / (2.0 * m_min) + 1.0;
    guard = 0;
    while problem.count_below(hi) < k_max {
        hi += 2.0 * (hi - lo);
        guard += 1;
        if guard > 60 {
            return Err(Error::BracketFailure { index: k_max, lo, hi });
        }
    }

    let mut pairs = Vec::with_capacity(k_max);
    let mut left = lo;
    for k in 1..=k_max {
        let target = problem.beta + (k - 1) as f64 * PI;
        let g = |l: f64| problem.theta(l) - target;
        let xtol = opts.lambda_tol * left.abs().max(1.0);
        let lambda = brent(g, left, hi, xtol, 200).ok_or(Error::BracketFailure { index: k, lo: left, hi })?;
        let delta = 1e-9 * lambda.abs().max(1.0);
        if problem.count_below(lambda - delta) != k - 1 || problem.count_below(lambda + delta) != k {
            return Err(Error::BracketFailure { index: k, lo: lambda - delta, hi: lambda + delta });
        }
        pairs.push(eigenpair(profile, bc_left, k, lambda, opts)?);
        left = lambda;
    }
    Ok(pairs)
}

fn eigenpair(
    profile: &CoefficientProfile,
    bc_left: EndpointCondition,
    index: usize,
    lambda: f64,
    opts: &EigenOptions,
) -> Result<EigenPair> {
    let y0 = bc_left.left_state();
    let (end, norm_sq) = real::propagate_with_norm(profile, lambda, y0, opts.solver.h_max(profile));
    if !(norm_sq.is_finite() && norm_sq > 0.0 && end[0].is_finite() && end[1].is_finite()) {
        return Err(Error::NonFiniteState { x: profile.x_b(), lambda: lambda.to_string() });
    }
    // Positive scale keeps ψ(x_l) > 0, or p(x_l) > 0 in the Dirichlet case.
    let c = 1.0 / norm_sq.sqrt();
    let psi = if opts.with_mesh {
        let mut traj =
            slp::trajectory(profile, Complex64::new(lambda, 0.0), QuasiState::real(y0[0], y0[1]), &opts.solver)?;
        for s in &mut traj.states {
            s.u *= c;
            s.p *= c;
        }
        Some(traj)
    } else {
        None
    };
    Ok(EigenPair { index, lambda, psi, trace0: [c * y0[0], c * end[0]], trace1: [c * y0[1], -c * end[1]] })
}

/// Eigenpairs of the internal operator with Robin parameters `κ = −Re 𝔪(λ)` frozen at `λ`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrozenRobinFamily {
    pub lambda: f64,
    pub tau: TauSample,
    pub kappa: [f64; 2],
    pub conditions: [EndpointCondition; 2],
    pub pairs: Vec<EigenPair>,
}

pub fn frozen_family(
    profile: &CoefficientProfile,
    left: &LeadSpec,
    right: &LeadSpec,
    lambda: f64,
    k_max: usize,
    opts: &EigenOptions,
) -> Result<FrozenRobinFamily> {
    let tau = weyl::tau_sample_with(left, right, lambda, &opts.solver)?;
    frozen_family_from_tau(profile, &tau, k_max, opts)
}

pub fn frozen_family_from_tau(
    profile: &CoefficientProfile,
    tau: &TauSample,
    k_max: usize,
    opts: &EigenOptions,
) -> Result<FrozenRobinFamily> {
    let kappa = tau.frozen_kappa();
    let conditions = [EndpointCondition::robin(kappa[0]), EndpointCondition::robin(kappa[1])];
    let pairs = eigen_scan_with(profile, conditions[0], conditions[1], k_max, opts)?;
    Ok(FrozenRobinFamily { lambda: tau.lambda, tau: *tau, kappa, conditions, pairs })
}

/// Interior sign changes of a sampled eigenfunction.
pub fn oscillation_count(psi: &StateTrajectory) -> usize {
    let n = psi.states.len();
    let u: Vec<f64> = psi.states[1..n - 1].iter().map(|s| s.u.re).filter(|u| *u != 0.0).collect();
    u.windows(2).filter(|w| w[0] * w[1] < 0.0).count()
}
