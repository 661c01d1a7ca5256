//! Internal Weyl matrix `M(λ)`, γ-field, and lead Titchmarsh–Weyl coefficients.
//!
//! Boundary maps on the internal interval `[x_l, x_r]`:
//! `Γ₀f = (f(x_l), f(x_r))`, `Γ₁f = (p(x_l), −p(x_r))`.

use nalgebra::Matrix2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::StateTrajectory;
use crate::profile::CoefficientProfile;
use crate::slp::{self, FundamentalPair, QuasiState, SolverOptions};

/// Relative tolerance for Dirichlet-pole detection, scaled by `max(1, |φ(x_r)|)`.
pub const POLE_EPS: f64 = 1e-9;
/// Energies this close to a lead tail potential are thresholds.
pub const THRESHOLD_EPS: f64 = 1e-9;
/// Interface amplitude below which the lead coefficient is undefined.
pub const INTERFACE_EPS: f64 = 1e-12;

/// `Γ₀` of a trajectory on `[x_l, x_r]`.
pub fn gamma0(traj: &StateTrajectory) -> [Complex64; 2] {
    [traj.first().u, traj.last().u]
}

/// `Γ₁` of a trajectory on `[x_l, x_r]`.
pub fn gamma1(traj: &StateTrajectory) -> [Complex64; 2] {
    [traj.first().p, -traj.last().p]
}

/// `M(λ)` together with the end traces it was built from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeylSample {
    pub lambda: Complex64,
    pub m: Matrix2<Complex64>,
    /// `(φ(x_r), p_φ(x_r))`
    pub phi_r: QuasiState,
    /// `(ψ(x_r), p_ψ(x_r))`
    pub psi_r: QuasiState,
}

impl WeylSample {
    fn from_traces(lambda: Complex64, phi_r: QuasiState, psi_r: QuasiState) -> Result<Self> {
        let scale = phi_r.u.norm().max(1.0);
        if psi_r.u.norm() <= POLE_EPS * scale {
            return Err(Error::DirichletPole { lambda: lambda.re });
        }
        let inv = 1.0 / psi_r.u;
        let one = Complex64::new(1.0, 0.0);
        let m = Matrix2::new(-phi_r.u * inv, one * inv, one * inv, -psi_r.p * inv);
        Ok(Self { lambda, m, phi_r, psi_r })
    }

    /// Real part of `M`; equals `M` for real `λ`.
    pub fn real(&self) -> Matrix2<f64> {
        self.m.map(|z| z.re)
    }
}

pub fn internal_weyl(profile: &CoefficientProfile, lambda: Complex64) -> Result<WeylSample> {
    internal_weyl_with(profile, lambda, &SolverOptions::default())
}

pub fn internal_weyl_with(profile: &CoefficientProfile, lambda: Complex64, opts: &SolverOptions) -> Result<WeylSample> {
    let t = slp::transfer_between(profile, lambda, profile.x_a(), profile.x_b(), opts)?;
    WeylSample::from_traces(lambda, t.first_column(), t.second_column())
}

/// `M(λ)` from an already computed fundamental pair.
pub fn weyl_from_pair(pair: &FundamentalPair) -> Result<WeylSample> {
    WeylSample::from_traces(pair.lambda, pair.phi_end(), pair.psi_end())
}

/// `γ(λ)ξ`: the solution with `Γ₀f = ξ`, sampled with its quasi-derivative.
pub fn gamma_field_apply(
    profile: &CoefficientProfile,
    lambda: Complex64,
    xi: [Complex64; 2],
) -> Result<StateTrajectory> {
    let pair = slp::fundamental_pair(profile, lambda)?;
    gamma_field_from_pair(&pair, xi)
}

pub fn gamma_field_from_pair(pair: &FundamentalPair, xi: [Complex64; 2]) -> Result<StateTrajectory> {
    let w = weyl_from_pair(pair)?;
    let (phi_r, psi_r) = (w.phi_r.u, w.psi_r.u);
    let a = xi[0];
    let b = (xi[1] - phi_r * xi[0]) / psi_r;
    let states = pair
        .phi
        .states
        .iter()
        .zip(&pair.psi.states)
        .map(|(f, g)| QuasiState::new(a * f.u + b * g.u, a * f.p + b * g.p))
        .collect();
    Ok(StateTrajectory { mesh: pair.mesh(), states })
}

/// `(Θ − M(λ))⁻¹` for `Θ = diag(κ_l, κ_r)`; a `None` entry is a Dirichlet end,
/// whose row and column vanish.
pub fn theta_minus_m_inverse(w: &WeylSample, kappa: [Option<f64>; 2]) -> Result<Matrix2<Complex64>> {
    let zero = Complex64::new(0.0, 0.0);
    let singular = || Error::Precondition(format!("Θ − M(λ) is singular at λ = {}", w.lambda));
    match kappa {
        [Some(kl), Some(kr)] => {
            let psi = w.psi_r.u;
            let det = (kl - w.m[(0, 0)]) * (kr - w.m[(1, 1)]) - w.m[(0, 1)] * w.m[(1, 0)];
            if det.norm() == 0.0 {
                return Err(singular());
            }
            let c = 1.0 / (psi * det);
            let one = Complex64::new(1.0, 0.0);
            Ok(Matrix2::new(c * (kr * psi + w.psi_r.p), c * one, c * one, c * (kl * psi + w.phi_r.u)))
        }
        [Some(k), None] | [None, Some(k)] => {
            let i = if kappa[0].is_some() { 0 } else { 1 };
            let d = k - w.m[(i, i)];
            if d.norm() == 0.0 {
                return Err(singular());
            }
            let mut out = Matrix2::from_element(zero);
            out[(i, i)] = 1.0 / d;
            Ok(out)
        }
        [None, None] => Ok(Matrix2::from_element(zero)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn index(self) -> usize {
        match self {
            Side::Left => 0,
            Side::Right => 1,
        }
    }
}

/// A semi-infinite lead: an optional transition region next to the
/// interface followed by a constant tail.
#[derive(Debug, Clone, PartialEq)]
pub struct LeadSpec {
    pub side: Side,
    pub tail_mass: f64,
    pub tail_potential: f64,
    pub transition: Option<CoefficientProfile>,
}

impl LeadSpec {
    pub fn constant(side: Side, tail_mass: f64, tail_potential: f64) -> Self {
        Self { side, tail_mass, tail_potential, transition: None }
    }

    pub fn with_transition(mut self, transition: CoefficientProfile) -> Self {
        self.transition = Some(transition);
        self
    }

    /// Closed-form coefficient of the constant tail, `i·k/(2m)` with `k = √(2m(λ−v))`.
    fn tail_coefficient(&self, lambda: Complex64) -> Complex64 {
        self.tail_wavenumber(lambda) * Complex64::i() / (2.0 * self.tail_mass)
    }

    fn tail_wavenumber(&self, lambda: Complex64) -> Complex64 {
        // principal branch: Im k ≥ 0, and k ≥ 0 on the open channel
        (2.0 * self.tail_mass * (lambda - self.tail_potential)).sqrt()
    }
}

/// `𝔪(λ + i0)` for real `λ`.
pub fn lead_weyl(lead: &LeadSpec, lambda: f64) -> Result<Complex64> {
    lead_weyl_with(lead, lambda, &SolverOptions::default())
}

pub fn lead_weyl_with(lead: &LeadSpec, lambda: f64, opts: &SolverOptions) -> Result<Complex64> {
    if (lambda - lead.tail_potential).abs() < THRESHOLD_EPS {
        return Err(Error::ThresholdEnergy { lambda, threshold: lead.tail_potential });
    }
    lead_weyl_complex_with(lead, Complex64::new(lambda, 0.0), opts)
}

/// `𝔪(λ)` for `λ` in the closed upper half plane.
pub fn lead_weyl_complex(lead: &LeadSpec, lambda: Complex64) -> Result<Complex64> {
    lead_weyl_complex_with(lead, lambda, &SolverOptions::default())
}

pub fn lead_weyl_complex_with(lead: &LeadSpec, lambda: Complex64, opts: &SolverOptions) -> Result<Complex64> {
    let tail = lead.tail_coefficient(lambda);
    let Some(tr) = lead.transition.as_ref().filter(|t| !t.is_empty()) else {
        return Ok(tail);
    };
    // Outgoing/decaying tail state at the outer end of the transition.
    let t = slp::transfer_between(tr, lambda, tr.x_a(), tr.x_b(), opts)?;
    let at_interface = match lead.side {
        Side::Left => t.apply(&QuasiState::new(Complex64::new(1.0, 0.0), -tail)),
        Side::Right => t.inverse().apply(&QuasiState::new(Complex64::new(1.0, 0.0), tail)),
    };
    if at_interface.u.norm() < INTERFACE_EPS * at_interface.p.norm().max(1.0) {
        return Err(Error::DegenerateInterface { lambda: lambda.re });
    }
    Ok(match lead.side {
        Side::Left => -at_interface.p / at_interface.u,
        Side::Right => at_interface.p / at_interface.u,
    })
}

/// `τ(λ) = diag(𝔪_l, 𝔪_r)` at a real energy, split for the scattering formulas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TauSample {
    pub lambda: f64,
    pub m_l: Complex64,
    pub m_r: Complex64,
    pub re_tau: [f64; 2],
    pub im_tau: [f64; 2],
    /// Open channel flags, `[left, right]`.
    pub open: [bool; 2],
    /// `(Im τ)^{1/2}` entrywise.
    pub sqrt_im_tau: [f64; 2],
}

impl TauSample {
    pub fn from_coefficients(lambda: f64, m_l: Complex64, m_r: Complex64) -> Self {
        let im_tau = [m_l.im.max(0.0), m_r.im.max(0.0)];
        Self {
            lambda,
            m_l,
            m_r,
            re_tau: [m_l.re, m_r.re],
            im_tau,
            open: [im_tau[0] > THRESHOLD_EPS, im_tau[1] > THRESHOLD_EPS],
            sqrt_im_tau: [im_tau[0].sqrt(), im_tau[1].sqrt()],
        }
    }

    pub fn tau(&self) -> Matrix2<Complex64> {
        Matrix2::new(self.m_l, Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0), self.m_r)
    }

    /// Indices (0 = left, 1 = right) of open channels.
    pub fn open_indices(&self) -> Vec<usize> {
        (0..2).filter(|&i| self.open[i]).collect()
    }

    pub fn open_sides(&self) -> Vec<Side> {
        self.open_indices().into_iter().map(|i| if i == 0 { Side::Left } else { Side::Right }).collect()
    }

    pub fn dim(&self) -> usize {
        self.open.iter().filter(|o| **o).count()
    }

    /// Robin parameters `κ = −Re 𝔪` of the frozen operator.
    pub fn frozen_kappa(&self) -> [f64; 2] {
        [-self.re_tau[0], -self.re_tau[1]]
    }
}

pub fn tau_sample(left: &LeadSpec, right: &LeadSpec, lambda: f64) -> Result<TauSample> {
    tau_sample_with(left, right, lambda, &SolverOptions::default())
}

pub fn tau_sample_with(left: &LeadSpec, right: &LeadSpec, lambda: f64, opts: &SolverOptions) -> Result<TauSample> {
    let m_l = lead_weyl_with(left, lambda, opts)?;
    let m_r = lead_weyl_with(right, lambda, opts)?;
    Ok(TauSample::from_coefficients(lambda, m_l, m_r))
}
