//! JSON system description for the command line tool.

use serde::Deserialize;

use crate::profile::{CoefficientProfile, Segment};
use crate::scattering::SeriesOptions;
use crate::slp::SolverOptions;
use crate::sweep::{ScatteringSystem, SweepOptions};
use crate::weyl::{LeadSpec, Side};

/// Validation failure; the message starts with the offending key.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

fn bad<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub interval: IntervalConfig,
    pub internal: ProfileConfig,
    pub left_lead: LeadConfig,
    pub right_lead: LeadConfig,
    pub grid: GridConfig,
    #[serde(default)]
    pub options: OptionsConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntervalConfig {
    pub x_l: f64,
    pub x_r: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileConfig {
    pub segments: Vec<SegmentConfig>,
}

/// One segment: constant `mass`/`potential` or uniformly spaced samples.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentConfig {
    pub width: f64,
    pub mass: Option<f64>,
    pub mass_samples: Option<Vec<f64>>,
    pub potential: Option<f64>,
    pub potential_samples: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeadConfig {
    pub mass: f64,
    pub potential: f64,
    pub transition: Option<ProfileConfig>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum GridConfig {
    Range { start: f64, stop: f64, count: usize },
    Values { values: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptionsConfig {
    pub n_series_terms: usize,
    pub series_tol: f64,
    pub mesh_nodes: usize,
    pub compare_series: bool,
    pub diagnostics: bool,
}

impl Default for OptionsConfig {
    fn default() -> Self {
        Self { n_series_terms: 200, series_tol: 1e-3, mesh_nodes: 2048, compare_series: false, diagnostics: false }
    }
}

impl SegmentConfig {
    fn build(&self, key: &str) -> Result<Segment, ConfigError> {
        let samples = |c: Option<f64>, s: &Option<Vec<f64>>, name: &str| -> Result<Vec<f64>, ConfigError> {
            match (c, s) {
                (Some(v), None) => Ok(vec![v, v]),
                (None, Some(v)) => Ok(v.clone()),
                (Some(_), Some(_)) => bad(format!("{key}: give either {name} or {name}_samples, not both")),
                (None, None) => bad(format!("{key}.{name}: missing")),
            }
        };
        let mass = samples(self.mass, &self.mass_samples, "mass")?;
        let potential = samples(self.potential, &self.potential_samples, "potential")?;
        let seg = match (self.mass, self.potential) {
            (Some(m), Some(v)) => Segment::constant(self.width, m, v),
            _ => Segment::sampled(self.width, mass, potential),
        };
        // reuse the profile checks for a message that names this segment
        CoefficientProfile::from_segments(0.0, vec![seg.clone()])
            .map_err(|e| ConfigError(format!("{key}: {}", strip_prefix(&e.to_string()))))?;
        Ok(seg)
    }
}

fn strip_prefix(msg: &str) -> &str {
    let msg = msg.strip_prefix("invalid profile: ").unwrap_or(msg);
    msg.strip_prefix("segment 0: ").unwrap_or(msg)
}

impl ProfileConfig {
    fn segments(&self, key: &str) -> Result<Vec<Segment>, ConfigError> {
        if self.segments.is_empty() {
            return bad(format!("{key}.segments: at least one segment is required"));
        }
        self.segments.iter().enumerate().map(|(i, s)| s.build(&format!("{key}.segments[{i}]"))).collect()
    }
}

impl LeadConfig {
    fn build(&self, side: Side, interface: f64, key: &str) -> Result<LeadSpec, ConfigError> {
        if !(self.mass.is_finite() && self.mass > 0.0) {
            return bad(format!("{key}.mass: must be positive and finite"));
        }
        if !(self.potential.is_finite() && self.potential.abs() < crate::profile::MAX_POTENTIAL) {
            return bad(format!("{key}.potential: must be finite and below 1e6 in magnitude"));
        }
        let mut lead = LeadSpec::constant(side, self.mass, self.potential);
        if let Some(tr) = &self.transition {
            let key = format!("{key}.transition");
            let segs = tr.segments(&key)?;
            let profile = match side {
                Side::Left => CoefficientProfile::ending_at(interface, segs),
                Side::Right => CoefficientProfile::from_segments(interface, segs),
            }
            .map_err(|e| ConfigError(format!("{key}: {e}")))?;
            lead = lead.with_transition(profile);
        }
        Ok(lead)
    }
}

impl GridConfig {
    pub fn values(&self) -> Result<Vec<f64>, ConfigError> {
        let v = match self {
            GridConfig::Range { start, stop, count } => {
                if *count == 0 {
                    return bad("grid.count: must be at least 1");
                }
                if !(start.is_finite() && stop.is_finite()) || stop < start {
                    return bad("grid: need finite start <= stop");
                }
                if *count == 1 {
                    vec![*start]
                } else {
                    let step = (stop - start) / (*count - 1) as f64;
                    (0..*count).map(|i| if i + 1 == *count { *stop } else { start + i as f64 * step }).collect()
                }
            }
            GridConfig::Values { values } => values.clone(),
        };
        if v.is_empty() {
            return bad("grid.values: must not be empty");
        }
        if v.iter().any(|x| !x.is_finite()) {
            return bad("grid.values: energies must be finite");
        }
        if v.windows(2).any(|w| w[1] < w[0]) {
            return bad("grid.values: energies must be sorted ascending");
        }
        Ok(v)
    }
}

/// Validated configuration ready for a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct Validated {
    pub system: ScatteringSystem,
    pub grid: Vec<f64>,
    pub options: OptionsConfig,
}

impl Validated {
    pub fn sweep_options(&self, compare_series: bool) -> SweepOptions {
        let solver = SolverOptions { mesh_nodes: self.options.mesh_nodes, ..SolverOptions::default() };
        let series = compare_series.then_some(SeriesOptions {
            n_terms: self.options.n_series_terms,
            tol: self.options.series_tol,
            tail_correction: true,
        });
        SweepOptions { solver, series, ..SweepOptions::default() }
    }
}

impl SystemConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError(format!("config: {e}")))
    }

    pub fn validate(&self) -> Result<Validated, ConfigError> {
        let IntervalConfig { x_l, x_r } = self.interval;
        if !(x_l.is_finite() && x_r.is_finite()) {
            return bad("interval: x_l and x_r must be finite");
        }
        if x_l >= x_r {
            return bad("interval: x_l must be < x_r");
        }
        let segs = self.internal.segments("internal")?;
        let internal = CoefficientProfile::new(x_l, x_r, segs).map_err(|e| {
            ConfigError(format!("internal.segments: {}", e.to_string().trim_start_matches("invalid profile: ")))
        })?;
        let left = self.left_lead.build(Side::Left, x_l, "left_lead")?;
        let right = self.right_lead.build(Side::Right, x_r, "right_lead")?;
        let grid = self.grid.values()?;
        let o = &self.options;
        if o.n_series_terms == 0 {
            return bad("options.n_series_terms: must be at least 1");
        }
        if !(o.series_tol.is_finite() && o.series_tol > 0.0) {
            return bad("options.series_tol: must be positive");
        }
        if o.mesh_nodes < 3 {
            return bad("options.mesh_nodes: must be at least 3");
        }
        Ok(Validated { system: ScatteringSystem { internal, left, right }, grid, options: *o })
    }
}
