//! Scattering matrix `S(λ)` and R-matrix `R(λ)` on the open channels.
//!
//! Direct formulas with `D = (Im τ)^{1/2}`:
//! `S = I − 2i·D(M + τ)⁻¹D`, `R = −D(M + Re τ)⁻¹D`,
//! and the eigenfunction series of `R` over the frozen Robin family.

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::profile::CoefficientProfile;
use crate::spectra::{self, EigenOptions, EigenPair, EndpointCondition};
use crate::weyl::{TauSample, WeylSample};

/// Relative determinant threshold for singular couplings and frozen resonances.
pub const DET_EPS: f64 = 1e-10;
/// Smallest admissible singular value of `I + S`.
pub const CAYLEY_EPS: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct SMatrix {
    pub lambda: f64,
    /// Open channel indices (0 = left, 1 = right) labelling rows and columns.
    pub channels: Vec<usize>,
    pub entries: DMatrix<Complex64>,
}

impl SMatrix {
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    /// `max |(S·S* − I)_ij|`
    pub fn unitarity_defect(&self) -> f64 {
        let n = self.dim();
        let p = &self.entries * self.entries.adjoint() - DMatrix::<Complex64>::identity(n, n);
        p.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `max |(S − Sᵀ)_ij|`
    pub fn symmetry_defect(&self) -> f64 {
        let d = &self.entries - self.entries.transpose();
        d.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Transmission `|S₁₂|²` for two open channels; `|S₁₁|²` (identically one) for one.
    pub fn transmission(&self) -> f64 {
        match self.dim() {
            2 => self.entries[(0, 1)].norm_sqr(),
            1 => self.entries[(0, 0)].norm_sqr(),
            _ => f64::NAN,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RMatrix {
    pub lambda: f64,
    pub channels: Vec<usize>,
    pub entries: DMatrix<f64>,
}

impl RMatrix {
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn symmetry_defect(&self) -> f64 {
        (&self.entries - self.entries.transpose()).amax()
    }
}

pub fn max_abs_diff_c(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn restrict<T: nalgebra::Scalar + Copy>(m: &Matrix2<T>, idx: &[usize]) -> DMatrix<T> {
    DMatrix::from_fn(idx.len(), idx.len(), |i, j| m[(idx[i], idx[j])])
}

/// `|det A|` against the scale of `A`'s entries.
fn nearly_singular(det: f64, max_entry: f64) -> bool {
    !(det.is_finite()) || det <= DET_EPS * max_entry.max(1e-300).powi(2)
}

pub fn s_direct(m: &WeylSample, tau: &TauSample) -> Result<SMatrix> {
    let idx = tau.open_indices();
    if idx.is_empty() {
        return Err(Error::ChannelVoid { lambda: tau.lambda });
    }
    let a = m.m + tau.tau();
    let max_entry = a.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if nearly_singular(a.determinant().norm(), max_entry) {
        return Err(Error::SingularCoupling { lambda: tau.lambda });
    }
    let inv = a.try_inverse().ok_or(Error::SingularCoupling { lambda: tau.lambda })?;
    let d = tau.sqrt_im_tau;
    let entries = DMatrix::from_fn(idx.len(), idx.len(), |i, j| {
        let (a, b) = (idx[i], idx[j]);
        let delta = if i == j { 1.0 } else { 0.0 };
        delta - 2.0 * Complex64::i() * d[a] * inv[(a, b)] * d[b]
    });
    Ok(SMatrix { lambda: tau.lambda, channels: idx, entries })
}

pub fn r_direct(m: &WeylSample, tau: &TauSample) -> Result<RMatrix> {
    let idx = tau.open_indices();
    if idx.is_empty() {
        return Err(Error::ChannelVoid { lambda: tau.lambda });
    }
    let b = m.real() + Matrix2::from_diagonal(&nalgebra::Vector2::new(tau.re_tau[0], tau.re_tau[1]));
    if nearly_singular(b.determinant().abs(), b.amax()) {
        return Err(Error::FrozenResonance { lambda: tau.lambda });
    }
    let inv = b.try_inverse().ok_or(Error::FrozenResonance { lambda: tau.lambda })?;
    let d = tau.sqrt_im_tau;
    let full = Matrix2::from_fn(|i, j| -d[i] * inv[(i, j)] * d[j]);
    Ok(RMatrix { lambda: tau.lambda, channels: idx.clone(), entries: restrict(&full, &idx) })
}

/// `R = i(I − S)(I + S)⁻¹`.
pub fn cayley_r_from_s(s: &SMatrix) -> Result<RMatrix> {
    let n = s.dim();
    let id = DMatrix::<Complex64>::identity(n, n);
    let plus = &id + &s.entries;
    let sv = plus.clone().singular_values();
    if sv.iter().any(|x| *x < CAYLEY_EPS) {
        return Err(Error::CayleyPole);
    }
    let inv = plus.try_inverse().ok_or(Error::CayleyPole)?;
    let r = (&id - &s.entries) * inv * Complex64::i();
    Ok(RMatrix { lambda: s.lambda, channels: s.channels.clone(), entries: r.map(|z| z.re) })
}

/// `S = (iI − R)(iI + R)⁻¹`; always defined for symmetric real `R`.
pub fn cayley_s_from_r(r: &RMatrix) -> SMatrix {
    let n = r.dim();
    let ri = r.entries.map(|x| Complex64::new(x, 0.0));
    let ii = DMatrix::<Complex64>::identity(n, n) * Complex64::i();
    let inv = (&ii + &ri).try_inverse().expect("iI + R is invertible for symmetric R");
    SMatrix { lambda: r.lambda, channels: r.channels.clone(), entries: (&ii - &ri) * inv }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesOptions {
    pub n_terms: usize,
    pub tol: f64,
    /// Add the estimated remainder to the returned matrix.
    pub tail_correction: bool,
}

impl Default for SeriesOptions {
    fn default() -> Self {
        Self { n_terms: 200, tol: 1e-3, tail_correction: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesReport {
    pub n_terms: usize,
    /// Truncated sum over the first `n_terms` eigenpairs.
    pub partial: DMatrix<f64>,
    /// Estimated remainder of the sum.
    pub tail: DMatrix<f64>,
    /// `max |tail_ij|`, infinite when no estimate is available.
    pub tail_estimate: f64,
    pub converged: bool,
}

impl SeriesReport {
    pub fn corrected(&self) -> DMatrix<f64> {
        &self.partial + &self.tail
    }
}

/// `Σ_{k>N} 1/(λ_k − λ)` for `√λ_k ≈ a·k + b`, by the integral `(1/a)∫_{y0}^∞ dy/(y² − λ)`.
fn tail_sum(a: f64, b: f64, n: usize, lambda: f64) -> Option<f64> {
    let y0 = a * (n as f64 + 0.5) + b;
    if a.is_nan() || a <= 0.0 || y0 * y0 <= lambda.max(0.0) * 1.0001 {
        return None;
    }
    let integral = if lambda.abs() < 1e-12 * y0 * y0 {
        1.0 / y0
    } else if lambda > 0.0 {
        let s = lambda.sqrt();
        ((y0 + s) / (y0 - s)).ln() / (2.0 * s)
    } else {
        let s = (-lambda).sqrt();
        (std::f64::consts::FRAC_PI_2 - (y0 / s).atan()) / s
    };
    Some(integral / a)
}

const ENVELOPE_TERMS: usize = 6;

/// R-matrix series over frozen eigenpairs `pairs[..opts.n_terms]`.
pub fn r_series(
    lambda: f64,
    pairs: &[EigenPair],
    tau: &TauSample,
    opts: &SeriesOptions,
) -> Result<(RMatrix, SeriesReport)> {
    let idx = tau.open_indices();
    if idx.is_empty() {
        return Err(Error::ChannelVoid { lambda });
    }
    let n = opts.n_terms.min(pairs.len());
    let pairs = &pairs[..n];
    let d = tau.sqrt_im_tau;
    let dim = idx.len();
    let mut partial = DMatrix::<f64>::zeros(dim, dim);
    for p in pairs {
        let gap = p.lambda - lambda;
        if gap.abs() <= 1e-10 * lambda.abs().max(1.0) {
            return Err(Error::FrozenResonance { lambda });
        }
        for i in 0..dim {
            for j in 0..dim {
                let (a, b) = (idx[i], idx[j]);
                partial[(i, j)] += d[a] * p.trace0[a] * p.trace0[b] * d[b] / gap;
            }
        }
    }

    let mut tail = DMatrix::<f64>::zeros(dim, dim);
    let mut tail_estimate = f64::INFINITY;
    if n >= 8 {
        let (l1, l2) = (pairs[n - 2].lambda, pairs[n - 1].lambda);
        if l1 > 0.0 && l2 > l1 {
            let a = l2.sqrt() - l1.sqrt();
            let b = l2.sqrt() - a * n as f64;
            if let Some(s) = tail_sum(a, b, n, lambda) {
                let last = &pairs[n - ENVELOPE_TERMS..];
                for i in 0..dim {
                    for j in 0..dim {
                        let (ia, jb) = (idx[i], idx[j]);
                        let c: f64 =
                            last.iter().map(|p| p.trace0[ia] * p.trace0[jb]).sum::<f64>() / ENVELOPE_TERMS as f64;
                        tail[(i, j)] = d[ia] * c * d[jb] * s;
                    }
                }
                tail_estimate = tail.amax();
            }
        }
    }
    let report = SeriesReport {
        n_terms: n,
        partial: partial.clone(),
        tail: tail.clone(),
        tail_estimate,
        converged: tail_estimate < opts.tol,
    };
    let entries = if opts.tail_correction { partial + tail } else { partial };
    Ok((RMatrix { lambda, channels: idx, entries }, report))
}

/// S-matrix from the R-matrix series through the exact Cayley map.
pub fn s_series(
    lambda: f64,
    pairs: &[EigenPair],
    tau: &TauSample,
    opts: &SeriesOptions,
) -> Result<(SMatrix, SeriesReport)> {
    let (r, report) = r_series(lambda, pairs, tau, opts)?;
    Ok((cayley_s_from_r(&r), report))
}

/// Trace norms of `Σ_{k≤N} (μ_k − λ)⁻¹ Γ₁φ_k (Γ₁φ_k)ᵀ` over Dirichlet eigenpairs,
/// one per entry of `n_list`. This series has no limit; the norms grow linearly.
pub fn divergence_diagnostic(profile: &CoefficientProfile, lambda: f64, n_list: &[usize]) -> Result<Vec<(usize, f64)>> {
    let n_max = n_list.iter().copied().max().unwrap_or(0);
    if n_max == 0 {
        return Ok(n_list.iter().map(|&n| (n, 0.0)).collect());
    }
    let opts = EigenOptions { with_mesh: false, ..EigenOptions::default() };
    let pairs =
        spectra::eigen_scan_with(profile, EndpointCondition::Dirichlet, EndpointCondition::Dirichlet, n_max, &opts)?;
    if lambda >= pairs[0].lambda {
        return Err(Error::Precondition(format!(
            "divergence diagnostic needs lambda below the Dirichlet ground state {}",
            pairs[0].lambda
        )));
    }
    let mut acc = Matrix2::<f64>::zeros();
    let mut sums = Vec::with_capacity(n_max);
    for p in &pairs {
        let g = nalgebra::Vector2::new(p.trace1[0], p.trace1[1]);
        acc += g * g.transpose() / (p.lambda - lambda);
        sums.push(acc.symmetric_eigenvalues().iter().map(|e| e.abs()).sum::<f64>());
    }
    Ok(n_list.iter().map(|&n| (n, if n == 0 { 0.0 } else { sums[n - 1] })).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weyl::{internal_weyl, tau_sample, LeadSpec, Side};
    use std::f64::consts::PI;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn f0_point(lambda: f64) -> (WeylSample, TauSample) {
        let p = CoefficientProfile::constant(0.0, PI, 0.5, 0.0).unwrap();
        let m = internal_weyl(&p, c(lambda)).unwrap();
        let t =
            tau_sample(&LeadSpec::constant(Side::Left, 0.5, 0.0), &LeadSpec::constant(Side::Right, 0.5, 0.0), lambda)
                .unwrap();
        (m, t)
    }

    #[test]
    fn free_system_closed_forms() {
        let (m, t) = f0_point(0.25);
        let s = s_direct(&m, &t).unwrap();
        let expect = DMatrix::from_row_slice(2, 2, &[c(0.0), -Complex64::i(), -Complex64::i(), c(0.0)]);
        assert!(max_abs_diff_c(&s.entries, &expect) < 1e-10);
        let r = r_direct(&m, &t).unwrap();
        let expect = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, -1.0, 0.0]);
        assert!((&r.entries - &expect).amax() < 1e-10);
        let rc = cayley_r_from_s(&s).unwrap();
        assert!((&rc.entries - &expect).amax() < 1e-10);
        let sc = cayley_s_from_r(&r);
        assert!(max_abs_diff_c(&sc.entries, &s.entries) < 1e-10);
    }

    #[test]
    fn cayley_edge_cases() {
        let id = DMatrix::<Complex64>::identity(2, 2);
        let s = SMatrix { lambda: 0.0, channels: vec![0, 1], entries: id.clone() };
        assert!(cayley_r_from_s(&s).unwrap().entries.amax() < 1e-15);
        let s = SMatrix { lambda: 0.0, channels: vec![0, 1], entries: -id.clone() };
        assert_eq!(cayley_r_from_s(&s), Err(Error::CayleyPole));
        let r = RMatrix { lambda: 0.0, channels: vec![0, 1], entries: DMatrix::zeros(2, 2) };
        assert!(max_abs_diff_c(&cayley_s_from_r(&r).entries, &id) < 1e-15);
    }

    #[test]
    fn no_channel_is_reported() {
        let p = CoefficientProfile::constant(0.0, PI, 0.5, 0.0).unwrap();
        let m = internal_weyl(&p, c(0.5)).unwrap();
        let t = tau_sample(&LeadSpec::constant(Side::Left, 0.5, 1.0), &LeadSpec::constant(Side::Right, 0.5, 2.0), 0.5)
            .unwrap();
        assert!(matches!(s_direct(&m, &t), Err(Error::ChannelVoid { .. })));
        assert!(matches!(r_direct(&m, &t), Err(Error::ChannelVoid { .. })));
    }

    #[test]
    fn tail_sum_matches_brute_force() {
        // λ_k = k², λ = 1/4 and λ = -1
        for lambda in [0.25, -1.0, 0.0] {
            let n = 50;
            let brute: f64 = (n + 1..2_000_000).map(|k| 1.0 / ((k * k) as f64 - lambda)).sum::<f64>() + 1.0 / 2e6;
            let est = tail_sum(1.0, 0.0, n, lambda).unwrap();
            // midpoint-rule error is O(N⁻³)
            assert!((est - brute).abs() < 1e-4 * brute, "{est} vs {brute}");
        }
    }

    #[test]
    fn divergence_grows_linearly() {
        let p = CoefficientProfile::constant(0.0, PI, 0.5, 0.0).unwrap();
        let d = divergence_diagnostic(&p, -1.0, &[1, 100, 200]).unwrap();
        // first term: μ₁ = 1, Γ₁φ₁ = √(2/π)(1, 1)
        assert!((d[0].1 - (4.0 / PI) / 2.0).abs() < 1e-8);
        let ratio = d[2].1 / d[1].1;
        assert!((1.8..=2.2).contains(&ratio));
        assert!((d[1].1 / (400.0 / PI) - 1.0).abs() < 0.15);
    }
}
