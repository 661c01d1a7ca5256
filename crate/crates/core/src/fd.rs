//! Finite-difference reference computations.
//!
//! A half-cell finite-volume discretization `K u = λ W u` on `n + 1` uniform
//! nodes, `W = diag(h/2, h, …, h, h/2)`, symmetrized as `W^{-1/2} K W^{-1/2}`.
//! Accurate to `O(h²)` when coefficient jumps sit on nodes.

use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::mesh::{Mesh, MeshFunction};
use crate::profile::CoefficientProfile;
use crate::slp::{self, SolverOptions};
use crate::spectra::EndpointCondition;
use crate::weyl;

/// Smallest admissible number of intervals.
pub const MIN_INTERVALS: usize = 16;

/// Symmetric tridiagonal matrix acting on the unknown nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalOperator {
    /// Number of intervals of the underlying grid.
    pub n: usize,
    pub h: f64,
    pub x_l: f64,
    pub diag: Vec<f64>,
    pub offdiag: Vec<f64>,
    /// Node index of `diag[0]` (1 when the left end is Dirichlet).
    pub first_node: usize,
    /// Quadrature weights of the unknown nodes.
    pub weights: Vec<f64>,
    pub bc: [EndpointCondition; 2],
}

impl TridiagonalOperator {
    pub fn new(
        profile: &CoefficientProfile,
        bc_left: EndpointCondition,
        bc_right: EndpointCondition,
        n: usize,
    ) -> Result<Self> {
        if n < MIN_INTERVALS {
            return Err(Error::Precondition(format!("need at least {MIN_INTERVALS} intervals, got {n}")));
        }
        let h = profile.length() / n as f64;
        let x = |i: usize| if i == n { profile.x_b() } else { profile.x_a() + i as f64 * h };
        // K and W on all n + 1 nodes
        let mut kd = vec![0.0; n + 1];
        let mut ko = vec![0.0; n];
        for i in 0..n {
            let c = 1.0 / (2.0 * h * profile.mass_at(x(i) + 0.5 * h));
            kd[i] += c;
            kd[i + 1] += c;
            ko[i] = -c;
        }
        let mut w = vec![h; n + 1];
        w[0] = 0.5 * h;
        w[n] = 0.5 * h;
        for i in 0..=n {
            kd[i] += w[i] * profile.potential_mean_at(x(i));
        }
        if let EndpointCondition::Robin { kappa } = bc_left {
            kd[0] += kappa;
        }
        if let EndpointCondition::Robin { kappa } = bc_right {
            kd[n] += kappa;
        }
        let lo = usize::from(bc_left == EndpointCondition::Dirichlet);
        let hi = if bc_right == EndpointCondition::Dirichlet { n - 1 } else { n };
        let diag = (lo..=hi).map(|i| kd[i] / w[i]).collect();
        let offdiag = (lo..hi).map(|i| ko[i] / (w[i] * w[i + 1]).sqrt()).collect();
        Ok(Self {
            n,
            h,
            x_l: profile.x_a(),
            diag,
            offdiag,
            first_node: lo,
            weights: w[lo..=hi].to_vec(),
            bc: [bc_left, bc_right],
        })
    }

    pub fn size(&self) -> usize {
        self.diag.len()
    }

    /// Number of eigenvalues strictly below `x` (LDLᵀ inertia).
    pub fn count_below(&self, x: f64) -> usize {
        let mut count = 0;
        let mut d = 1.0;
        for i in 0..self.size() {
            let b2 = if i == 0 { 0.0 } else { self.offdiag[i - 1].powi(2) };
            d = self.diag[i] - x - if i == 0 { 0.0 } else { b2 / d };
            if d == 0.0 {
                d = -f64::EPSILON * (self.diag[i].abs() + x.abs()).max(f64::MIN_POSITIVE);
            }
            if d < 0.0 {
                count += 1;
            }
        }
        count
    }

    fn gershgorin(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..self.size() {
            let r = if i > 0 { self.offdiag[i - 1].abs() } else { 0.0 } + self.offdiag.get(i).map_or(0.0, |b| b.abs());
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    /// The `k`-th eigenvalue (1-based) by Sturm bisection.
    pub fn eigenvalue(&self, k: usize) -> f64 {
        let (mut lo, mut hi) = self.gershgorin();
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) >= k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Solves `(A − s)y = b` by the Thomas algorithm.
    pub fn solve_shifted(&self, shift: f64, b: &[f64]) -> Vec<f64> {
        let n = self.size();
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        let mut denom = self.diag[0] - shift;
        c[0] = self.offdiag.first().copied().unwrap_or(0.0) / denom;
        d[0] = b[0] / denom;
        for i in 1..n {
            let a = self.offdiag[i - 1];
            denom = self.diag[i] - shift - a * c[i - 1];
            c[i] = if i + 1 < n { self.offdiag[i] / denom } else { 0.0 };
            d[i] = (b[i] - a * d[i - 1]) / denom;
        }
        let mut y = d;
        for i in (0..n - 1).rev() {
            y[i] -= c[i] * y[i + 1];
        }
        y
    }

    /// Unit eigenvector (symmetrized coordinates) for eigenvalue `lambda`, by inverse iteration.
    pub fn eigenvector(&self, lambda: f64) -> Vec<f64> {
        let n = self.size();
        let shift = lambda + 1e-10 * lambda.abs().max(1.0);
        let mut y: Vec<f64> = (0..n).map(|i| 1.0 + 0.01 * (i as f64 * 0.7).sin()).collect();
        for _ in 0..3 {
            y = self.solve_shifted(shift, &y);
            let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            y.iter_mut().for_each(|v| *v /= norm);
        }
        // same sign convention as the shooting eigenfunctions: first unknown positive
        if y[0] < 0.0 {
            y.iter_mut().for_each(|v| *v = -*v);
        }
        y
    }

    /// `(u(x_l), u(x_r))` of the function with symmetrized coordinates `y`.
    pub fn boundary_traces(&self, y: &[f64]) -> [f64; 2] {
        let n = self.size();
        let left = if self.first_node == 0 { y[0] / self.weights[0].sqrt() } else { 0.0 };
        let right =
            if self.bc[1] == EndpointCondition::Dirichlet { 0.0 } else { y[n - 1] / self.weights[n - 1].sqrt() };
        [left, right]
    }

    /// Solves `(K − λW)u = W f` for nodal `f` on all `n + 1` nodes; returns `u` on all nodes.
    pub fn solve_resolvent(&self, lambda: f64, f: &[f64]) -> Vec<f64> {
        let m = self.size();
        // symmetrized: (A − λ) y = W^{1/2} f, u = W^{-1/2} y
        let b: Vec<f64> = (0..m).map(|i| self.weights[i].sqrt() * f[self.first_node + i]).collect();
        let y = self.solve_shifted(lambda, &b);
        let mut u = vec![0.0; self.n + 1];
        for i in 0..m {
            u[self.first_node + i] = y[i] / self.weights[i].sqrt();
        }
        u
    }
}

/// First `k_max` eigenvalues of the discretized operator.
pub fn fd_spectrum(
    profile: &CoefficientProfile,
    bc_left: EndpointCondition,
    bc_right: EndpointCondition,
    n: usize,
    k_max: usize,
) -> Result<Vec<f64>> {
    let op = TridiagonalOperator::new(profile, bc_left, bc_right, n)?;
    if k_max > op.size() {
        return Err(Error::Precondition(format!("k_max = {k_max} exceeds the {} unknowns", op.size())));
    }
    Ok((1..=k_max).map(|k| op.eigenvalue(k)).collect())
}

/// `(A₀ − λ)⁻¹f` through the Dirichlet Green's function built from `φ_λ`, `ψ_λ`.
pub fn resolvent_a0_apply(profile: &CoefficientProfile, lambda: f64, f: &MeshFunction) -> Result<MeshFunction> {
    let mesh = f.mesh;
    if (mesh.start - profile.x_a()).abs() > 1e-12 || (mesh.stop - profile.x_b()).abs() > 1e-12 {
        return Err(Error::MeshMismatch);
    }
    let pair = slp::fundamental_pair_on(profile, Complex64::new(lambda, 0.0), mesh, &SolverOptions::default())?;
    let w = weyl::weyl_from_pair(&pair)?;
    let ratio = w.phi_r.u / w.psi_r.u;
    let phi = pair.phi.u();
    let psi = pair.psi.u();
    let psi_f =
        MeshFunction::new(mesh, psi.values.iter().zip(&f.values).map(|(a, b)| a * b).collect()).cumulative_integral();
    let phi_f =
        MeshFunction::new(mesh, phi.values.iter().zip(&f.values).map(|(a, b)| a * b).collect()).cumulative_integral();
    let total_psi = *psi_f.last().unwrap();
    let total_phi = *phi_f.last().unwrap();
    let values = (0..mesh.nodes)
        .map(|i| phi.values[i] * psi_f[i] + psi.values[i] * (total_phi - phi_f[i]) - ratio * psi.values[i] * total_psi)
        .collect();
    Ok(MeshFunction::new(mesh, values))
}

fn theta_param(bc: EndpointCondition) -> Option<f64> {
    match bc {
        EndpointCondition::Dirichlet => None,
        EndpointCondition::Robin { kappa } => Some(kappa),
    }
}

/// Relative discrete L² residual between the finite-difference resolvent of
/// `A_Θ` and the right-hand side of the Krein formula, for `f = (x − x_l)(x_r − x)`.
pub fn krein_check(
    profile: &CoefficientProfile,
    lambda: f64,
    bc_left: EndpointCondition,
    bc_right: EndpointCondition,
    n: usize,
) -> Result<f64> {
    let op = TridiagonalOperator::new(profile, bc_left, bc_right, n)?;
    let (xl, xr) = (profile.x_a(), profile.x_b());
    let mesh = Mesh::new(xl, xr, n + 1);
    let f = MeshFunction::from_real_fn(mesh, |x| (x - xl) * (xr - x));
    let nodal: Vec<f64> = f.values.iter().map(|z| z.re).collect();
    let lhs = op.solve_resolvent(lambda, &nodal);

    let lam = Complex64::new(lambda, 0.0);
    let pair = slp::fundamental_pair_on(profile, lam, mesh, &SolverOptions::default())?;
    let w = weyl::weyl_from_pair(&pair)?;
    let inv = weyl::theta_minus_m_inverse(&w, [theta_param(bc_left), theta_param(bc_right)])?;
    let g0 = resolvent_a0_apply(profile, lambda, &f)?;
    // γ(λ)*f for real λ, one γ-field column per boundary point
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let col0 = weyl::gamma_field_from_pair(&pair, [one, zero])?.u();
    let col1 = weyl::gamma_field_from_pair(&pair, [zero, one])?.u();
    let adj = Vector2::new(crate::mesh::l2_inner(&f, &col0)?, crate::mesh::l2_inner(&f, &col1)?);
    let coeff: Vector2<Complex64> = inv * adj;
    let rhs: Vec<f64> =
        (0..mesh.nodes).map(|i| (g0.values[i] + col0.values[i] * coeff[0] + col1.values[i] * coeff[1]).re).collect();

    let weights: Vec<f64> = (0..=n).map(|i| if i == 0 || i == n { 0.5 } else { 1.0 }).collect();
    let diff: f64 = (0..=n).map(|i| weights[i] * (lhs[i] - rhs[i]).powi(2)).sum();
    let norm: f64 = (0..=n).map(|i| weights[i] * lhs[i].powi(2)).sum();
    Ok((diff / norm).sqrt())
}

/// Truncated eigenfunction series of `(Θ − M(λ))⁻¹` from finite-difference
/// eigenpairs, together with the value from the Weyl matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesOracle {
    pub series: Matrix2<f64>,
    pub exact: Matrix2<f64>,
}

impl SeriesOracle {
    pub fn deviation(&self) -> f64 {
        (self.series - self.exact).amax()
    }
}

pub fn series_oracle(
    profile: &CoefficientProfile,
    lambda: f64,
    bc_left: EndpointCondition,
    bc_right: EndpointCondition,
    n: usize,
    terms: usize,
) -> Result<SeriesOracle> {
    let kappa = match (bc_left, bc_right) {
        (EndpointCondition::Robin { kappa: kl }, EndpointCondition::Robin { kappa: kr }) if kl >= 0.0 && kr >= 0.0 => {
            [kl, kr]
        }
        _ => {
            return Err(Error::Precondition(
                "series oracle needs Robin conditions with κ ≥ 0 at both ends; the Dirichlet-trace series diverges"
                    .into(),
            ))
        }
    };
    let op = TridiagonalOperator::new(profile, bc_left, bc_right, n)?;
    if terms > op.size() {
        return Err(Error::Precondition(format!("{terms} terms exceed the {} unknowns", op.size())));
    }
    let mut series = Matrix2::<f64>::zeros();
    for k in 1..=terms {
        let lk = op.eigenvalue(k);
        let t = op.boundary_traces(&op.eigenvector(lk));
        let t = Vector2::new(t[0], t[1]);
        series += t * t.transpose() / (lk - lambda);
    }
    let w = weyl::internal_weyl(profile, Complex64::new(lambda, 0.0))?;
    let exact = weyl::theta_minus_m_inverse(&w, [Some(kappa[0]), Some(kappa[1])])?.map(|z| z.re);
    Ok(SeriesOracle { series, exact })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;
    use EndpointCondition::Dirichlet;

    const N: EndpointCondition = EndpointCondition::NEUMANN;

    fn f0() -> CoefficientProfile {
        CoefficientProfile::constant(0.0, PI, 0.5, 0.0).unwrap()
    }

    #[test]
    fn free_spectra() {
        let d = fd_spectrum(&f0(), Dirichlet, Dirichlet, 2000, 3).unwrap();
        let n = fd_spectrum(&f0(), N, N, 2000, 3).unwrap();
        for k in 0..3 {
            assert!((d[k] - ((k + 1) * (k + 1)) as f64).abs() < 5e-5);
            assert!((n[k] - (k * k) as f64).abs() < 5e-5);
        }
    }

    #[test]
    fn richardson_factor_four() {
        let e = |n| fd_spectrum(&f0(), Dirichlet, N, n, 3).unwrap()[2] - 6.25;
        let ratio = e(200) / e(400);
        assert!((ratio - 4.0).abs() < 0.4, "{ratio}");
    }

    #[test]
    fn small_grids_are_rejected() {
        assert!(matches!(fd_spectrum(&f0(), N, N, 8, 1), Err(Error::Precondition(_))));
    }

    #[test]
    fn resolvent_zero_and_boundary() {
        let mesh = Mesh::new(0.0, PI, 2048);
        let zero = MeshFunction::from_real_fn(mesh, |_| 0.0);
        let g = resolvent_a0_apply(&f0(), -1.0, &zero).unwrap();
        assert!(g.values.iter().all(|v| v.norm() == 0.0));
        let f = MeshFunction::from_real_fn(mesh, |x| x.cos() + 0.3);
        let g = resolvent_a0_apply(&f0(), -1.0, &f).unwrap();
        assert!(g.first().norm() < 1e-8 && g.last().norm() < 1e-8);
    }

    #[test]
    fn resolvent_inverts_the_operator() {
        // -(1/2)(1/m)g'' + (v - λ)g with m = 1/2: -g'' + g = f
        let mesh = Mesh::new(0.0, PI, 2048);
        let f = MeshFunction::from_real_fn(mesh, |x| x * (PI - x) + x.sin());
        let g = resolvent_a0_apply(&f0(), -1.0, &f).unwrap();
        let h = mesh.spacing();
        let (mut num, mut den) = (0.0, 0.0);
        for i in 1..mesh.nodes - 1 {
            let lap = (g.values[i + 1] - 2.0 * g.values[i] + g.values[i - 1]).re / (h * h);
            num += (-lap + g.values[i].re - f.values[i].re).powi(2);
            den += f.values[i].re.powi(2);
        }
        assert!((num / den).sqrt() <= 1e-4);
    }

    #[test]
    fn krein_dirichlet_has_no_correction() {
        let r = krein_check(&f0(), -1.0, Dirichlet, Dirichlet, 4000).unwrap();
        assert!(r <= 5e-6, "{r}");
    }

    #[test]
    fn series_oracle_rejects_dirichlet() {
        assert!(matches!(series_oracle(&f0(), -1.0, Dirichlet, Dirichlet, 400, 10), Err(Error::Precondition(_))));
    }
}
