//! Energy sweeps: classify each grid point and evaluate S, R and the series.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::profile::CoefficientProfile;
use crate::scattering::{self, RMatrix, SMatrix, SeriesOptions, SeriesReport};
use crate::slp::SolverOptions;
use crate::spectra::{self, EigenOptions};
use crate::weyl::{self, LeadSpec, TauSample, THRESHOLD_EPS};
use num_complex::Complex64;

/// Internal region plus the two leads.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringSystem {
    pub internal: CoefficientProfile,
    pub left: LeadSpec,
    pub right: LeadSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Exclusion {
    Threshold,
    NoChannel,
    DirichletPole,
    FrozenResonance,
}

impl Exclusion {
    pub fn label(self) -> &'static str {
        match self {
            Exclusion::Threshold => "threshold",
            Exclusion::NoChannel => "no_channel",
            Exclusion::DirichletPole => "dirichlet_pole",
            Exclusion::FrozenResonance => "frozen_resonance",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Exclusion::Threshold, Exclusion::NoChannel, Exclusion::DirichletPole, Exclusion::FrozenResonance]
            .into_iter()
            .find(|e| e.label() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptions {
    pub solver: SolverOptions,
    /// Compare against the eigenfunction series when set.
    pub series: Option<SeriesOptions>,
    /// Frozen eigenvalues kept per point for reporting.
    pub report_eigen: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self { solver: SolverOptions::default(), series: None, report_eigen: 10 }
    }
}

/// Frozen eigenpair summary `(λ_k, ψ_k(x_l), ψ_k(x_r))`.
pub type EigenSummary = (f64, f64, f64);

#[derive(Debug, Clone, PartialEq)]
pub struct ScatterPoint {
    pub lambda: f64,
    /// Number of open channels, when the leads could be evaluated.
    pub channels: usize,
    pub exclusion: Option<Exclusion>,
    /// Numerical failure that is not a physical exclusion.
    pub failure: Option<Error>,
    pub s: Option<SMatrix>,
    pub r: Option<RMatrix>,
    pub tau: Option<TauSample>,
    pub series: Option<SeriesReport>,
    /// `max |R_series − R_direct|`.
    pub series_error: Option<f64>,
    pub frozen: Vec<EigenSummary>,
}

impl ScatterPoint {
    fn empty(lambda: f64) -> Self {
        Self {
            lambda,
            channels: 0,
            exclusion: None,
            failure: None,
            s: None,
            r: None,
            tau: None,
            series: None,
            series_error: None,
            frozen: Vec::new(),
        }
    }

    fn excluded(mut self, e: Exclusion) -> Self {
        self.exclusion = Some(e);
        self.s = None;
        self.r = None;
        self.series = None;
        self.series_error = None;
        self.frozen.clear();
        self
    }

    fn failed(mut self, e: Error) -> Self {
        self.failure = Some(e);
        self.s = None;
        self.r = None;
        self
    }

    pub fn is_valid(&self) -> bool {
        self.exclusion.is_none() && self.failure.is_none()
    }

    pub fn transmission(&self) -> Option<f64> {
        self.s.as_ref().map(SMatrix::transmission)
    }
}

fn classify(e: &Error) -> Option<Exclusion> {
    match e {
        Error::ThresholdEnergy { .. } => Some(Exclusion::Threshold),
        Error::ChannelVoid { .. } => Some(Exclusion::NoChannel),
        Error::DirichletPole { .. } => Some(Exclusion::DirichletPole),
        Error::FrozenResonance { .. } => Some(Exclusion::FrozenResonance),
        _ => None,
    }
}

pub fn evaluate_point(system: &ScatteringSystem, lambda: f64, opts: &SweepOptions) -> ScatterPoint {
    let point = ScatterPoint::empty(lambda);
    match evaluate(system, lambda, opts, point.clone()) {
        Ok(p) => p,
        Err((p, e)) => match classify(&e) {
            Some(x) => p.excluded(x),
            None => p.failed(e),
        },
    }
}

type Partial = std::result::Result<ScatterPoint, (ScatterPoint, Error)>;

#[allow(clippy::result_large_err)]
fn evaluate(system: &ScatteringSystem, lambda: f64, opts: &SweepOptions, mut p: ScatterPoint) -> Partial {
    macro_rules! tri {
        ($e:expr) => {
            match $e {
                Ok(v) => v,
                Err(e) => return Err((p, e)),
            }
        };
    }
    for lead in [&system.left, &system.right] {
        if (lambda - lead.tail_potential).abs() < THRESHOLD_EPS {
            return Err((p, Error::ThresholdEnergy { lambda, threshold: lead.tail_potential }));
        }
    }
    let tau = tri!(weyl::tau_sample_with(&system.left, &system.right, lambda, &opts.solver));
    p.channels = tau.dim();
    p.tau = Some(tau);
    if tau.dim() == 0 {
        return Err((p, Error::ChannelVoid { lambda }));
    }
    let m = tri!(weyl::internal_weyl_with(&system.internal, Complex64::new(lambda, 0.0), &opts.solver));
    let s = tri!(scattering::s_direct(&m, &tau));
    let r = tri!(scattering::r_direct(&m, &tau));
    if let Some(series) = &opts.series {
        let eig = EigenOptions { solver: opts.solver, with_mesh: false, ..EigenOptions::default() };
        let fam = tri!(spectra::frozen_family_from_tau(&system.internal, &tau, series.n_terms.max(1), &eig));
        let (rs, report) = tri!(scattering::r_series(lambda, &fam.pairs, &tau, series));
        p.series_error = Some((&rs.entries - &r.entries).amax());
        p.series = Some(report);
        p.frozen = fam.pairs.iter().take(opts.report_eigen).map(|e| (e.lambda, e.trace0[0], e.trace0[1])).collect();
    }
    p.s = Some(s);
    p.r = Some(r);
    Ok(p)
}

/// Evaluates every grid point; the result is in grid order whatever the thread count.
pub fn sweep(system: &ScatteringSystem, grid: &[f64], opts: &SweepOptions) -> Result<Vec<ScatterPoint>> {
    if grid.iter().any(|x| !x.is_finite()) {
        return Err(Error::Precondition("energy grid must be finite".into()));
    }
    if grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Precondition("energy grid must be sorted".into()));
    }
    Ok(grid.par_iter().map(|&l| evaluate_point(system, l, opts)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weyl::Side;
    use std::f64::consts::PI;

    fn f0() -> ScatteringSystem {
        ScatteringSystem {
            internal: CoefficientProfile::constant(0.0, PI, 0.5, 0.0).unwrap(),
            left: LeadSpec::constant(Side::Left, 0.5, 0.0),
            right: LeadSpec::constant(Side::Right, 0.5, 0.0),
        }
    }

    #[test]
    fn free_line_is_transparent() {
        let pts = sweep(&f0(), &[0.25, 0.5, 2.25], &SweepOptions::default()).unwrap();
        for p in pts {
            assert!((p.transmission().unwrap() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn exclusions() {
        let mut sys = f0();
        sys.left = LeadSpec::constant(Side::Left, 0.5, 0.5);
        sys.right = LeadSpec::constant(Side::Right, 0.5, 0.6);
        let pts = sweep(&sys, &[0.1, 0.5, 0.55, 1.0, 2.0], &SweepOptions::default()).unwrap();
        let ex: Vec<_> = pts.iter().map(|p| p.exclusion).collect();
        assert_eq!(
            ex,
            vec![Some(Exclusion::NoChannel), Some(Exclusion::Threshold), None, Some(Exclusion::DirichletPole), None]
        );
        assert_eq!(pts[2].channels, 1);
        assert!(pts[2].s.is_some() && pts[0].s.is_none());
    }

    #[test]
    fn unsorted_grid_is_rejected() {
        assert!(sweep(&f0(), &[1.0, 0.5], &SweepOptions::default()).is_err());
    }
}
