//! Piecewise description of the effective mass `m(x)` and potential `v(x)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Potentials beyond this magnitude are rejected.
pub const MAX_POTENTIAL: f64 = 1.0e6;

const WIDTH_RTOL: f64 = 1.0e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SegmentKind {
    Constant {
        mass: f64,
        potential: f64,
    },
    /// Uniformly spaced samples across the segment, linearly interpolated.
    /// The two grids may have different lengths.
    Sampled {
        mass: Vec<f64>,
        potential: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub width: f64,
    pub kind: SegmentKind,
}

impl Segment {
    pub fn constant(width: f64, mass: f64, potential: f64) -> Self {
        Self { width, kind: SegmentKind::Constant { mass, potential } }
    }

    pub fn sampled(width: f64, mass: Vec<f64>, potential: Vec<f64>) -> Self {
        Self { width, kind: SegmentKind::Sampled { mass, potential } }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.kind, SegmentKind::Constant { .. })
    }

    /// Mass at local coordinate `s ∈ [0, width]`.
    pub fn mass_at(&self, s: f64) -> f64 {
        match &self.kind {
            SegmentKind::Constant { mass, .. } => *mass,
            SegmentKind::Sampled { mass, .. } => interpolate(mass, s / self.width),
        }
    }

    /// Potential at local coordinate `s ∈ [0, width]`.
    pub fn potential_at(&self, s: f64) -> f64 {
        match &self.kind {
            SegmentKind::Constant { potential, .. } => *potential,
            SegmentKind::Sampled { potential, .. } => interpolate(potential, s / self.width),
        }
    }

    pub fn mass_range(&self) -> (f64, f64) {
        match &self.kind {
            SegmentKind::Constant { mass, .. } => (*mass, *mass),
            SegmentKind::Sampled { mass, .. } => min_max(mass),
        }
    }

    pub fn potential_range(&self) -> (f64, f64) {
        match &self.kind {
            SegmentKind::Constant { potential, .. } => (*potential, *potential),
            SegmentKind::Sampled { potential, .. } => min_max(potential),
        }
    }

    /// Local positions of all sample nodes, sorted, including both ends.
    /// Coefficients are smooth between consecutive knots.
    pub fn knots(&self) -> Vec<f64> {
        let mut k = vec![0.0, self.width];
        if let SegmentKind::Sampled { mass, potential } = &self.kind {
            for grid in [mass, potential] {
                let n = grid.len() - 1;
                k.extend((1..n).map(|i| self.width * i as f64 / n as f64));
            }
        }
        k.sort_by(f64::total_cmp);
        k.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * self.width);
        k
    }

    fn validate(&self, index: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidProfile(format!("segment {index}: {msg}")));
        if !(self.width.is_finite() && self.width > 0.0) {
            return bad(format!("width must be positive, got {}", self.width));
        }
        let (masses, potentials): (&[f64], &[f64]) = match &self.kind {
            SegmentKind::Constant { mass, potential } => (std::slice::from_ref(mass), std::slice::from_ref(potential)),
            SegmentKind::Sampled { mass, potential } => {
                if mass.len() < 2 || potential.len() < 2 {
                    return bad("sampled grids need at least 2 samples".into());
                }
                (mass, potential)
            }
        };
        if let Some(m) = masses.iter().find(|m| !(m.is_finite() && **m > 0.0)) {
            return bad(format!("mass must be positive and finite, got {m}"));
        }
        if let Some(v) = potentials.iter().find(|v| !(v.is_finite() && v.abs() < MAX_POTENTIAL)) {
            return bad(format!("potential must be finite with |v| < {MAX_POTENTIAL:e}, got {v}"));
        }
        Ok(())
    }
}

fn interpolate(samples: &[f64], t: f64) -> f64 {
    let last = samples.len() - 1;
    let pos = t.clamp(0.0, 1.0) * last as f64;
    let i = (pos.floor() as usize).min(last - 1);
    let frac = pos - i as f64;
    samples[i] + (samples[i + 1] - samples[i]) * frac
}

fn min_max(values: &[f64]) -> (f64, f64) {
    values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

/// Coefficients of `-(1/2)(d/dx)(1/m)(d/dx) + v` on `[x_a, x_b]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientProfile {
    x_a: f64,
    x_b: f64,
    segments: Vec<Segment>,
    starts: Vec<f64>,
}

impl CoefficientProfile {
    pub fn new(x_a: f64, x_b: f64, segments: Vec<Segment>) -> Result<Self> {
        if !(x_a.is_finite() && x_b.is_finite()) || x_a >= x_b {
            return Err(Error::InvalidProfile(format!("need x_a < x_b, got [{x_a}, {x_b}]")));
        }
        if segments.is_empty() {
            return Err(Error::InvalidProfile("no segments".into()));
        }
        for (i, seg) in segments.iter().enumerate() {
            seg.validate(i)?;
        }
        let total: f64 = segments.iter().map(|s| s.width).sum();
        let length = x_b - x_a;
        if (total - length).abs() > WIDTH_RTOL * length.max(1.0) {
            return Err(Error::InvalidProfile(format!("segment widths sum to {total}, interval length is {length}")));
        }
        let starts = segments
            .iter()
            .scan(x_a, |x, seg| {
                let start = *x;
                *x += seg.width;
                Some(start)
            })
            .collect();
        Ok(Self { x_a, x_b, segments, starts })
    }

    /// Single constant segment on `[x_a, x_b]`.
    pub fn constant(x_a: f64, x_b: f64, mass: f64, potential: f64) -> Result<Self> {
        Self::new(x_a, x_b, vec![Segment::constant(x_b - x_a, mass, potential)])
    }

    /// Degenerate profile of zero width at `x`; propagation across it is the identity.
    pub fn empty_at(x: f64) -> Self {
        Self { x_a: x, x_b: x, segments: Vec::new(), starts: Vec::new() }
    }

    /// Builds a profile from segments laid out to the right of `x_a`.
    pub fn from_segments(x_a: f64, segments: Vec<Segment>) -> Result<Self> {
        let width: f64 = segments.iter().map(|s| s.width).sum();
        Self::new(x_a, x_a + width, segments)
    }

    /// Builds a profile from segments laid out so that they end at `x_b`.
    pub fn ending_at(x_b: f64, segments: Vec<Segment>) -> Result<Self> {
        let width: f64 = segments.iter().map(|s| s.width).sum();
        Self::new(x_b - width, x_b, segments)
    }

    pub fn x_a(&self) -> f64 {
        self.x_a
    }

    pub fn x_b(&self) -> f64 {
        self.x_b
    }

    pub fn length(&self) -> f64 {
        self.x_b - self.x_a
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// Iterates `(start, end, segment)` in absolute coordinates.
    pub fn placed(&self) -> impl Iterator<Item = (f64, f64, &Segment)> + '_ {
        self.segments.iter().zip(&self.starts).enumerate().map(move |(i, (seg, &start))| {
            let end = if i + 1 == self.segments.len() { self.x_b } else { self.starts[i + 1] };
            (start, end, seg)
        })
    }

    pub fn is_piecewise_constant(&self) -> bool {
        self.segments.iter().all(Segment::is_constant)
    }

    fn locate(&self, x: f64) -> usize {
        match self.starts.partition_point(|&s| s <= x) {
            0 => 0,
            i => i - 1,
        }
    }

    pub fn mass_at(&self, x: f64) -> f64 {
        let i = self.locate(x);
        self.segments[i].mass_at(x - self.starts[i])
    }

    pub fn potential_at(&self, x: f64) -> f64 {
        let i = self.locate(x);
        self.segments[i].potential_at(x - self.starts[i])
    }

    /// Mean of the one-sided potential limits; differs from `potential_at`
    /// only at segment boundaries.
    pub fn potential_mean_at(&self, x: f64) -> f64 {
        let i = self.locate(x);
        let right = self.segments[i].potential_at(x - self.starts[i]);
        if i > 0 && (x - self.starts[i]).abs() <= 1e-12 * self.length().max(1.0) {
            let prev = &self.segments[i - 1];
            0.5 * (right + prev.potential_at(prev.width))
        } else if i + 1 < self.segments.len() && (self.starts[i + 1] - x).abs() <= 1e-12 * self.length().max(1.0) {
            0.5 * (right + self.segments[i + 1].potential_at(0.0))
        } else {
            right
        }
    }

    pub fn mass_range(&self) -> (f64, f64) {
        self.segments
            .iter()
            .map(Segment::mass_range)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (a, b)| (lo.min(a), hi.max(b)))
    }

    pub fn potential_range(&self) -> (f64, f64) {
        self.segments
            .iter()
            .map(Segment::potential_range)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (a, b)| (lo.min(a), hi.max(b)))
    }

    /// Positions of interior segment boundaries.
    pub fn breakpoints(&self) -> &[f64] {
        if self.starts.is_empty() {
            &[]
        } else {
            &self.starts[1..]
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn rejects_bad_interval_and_widths() {
        assert!(CoefficientProfile::constant(1.0, 1.0, 0.5, 0.0).is_err());
        assert!(CoefficientProfile::new(0.0, 2.0, vec![Segment::constant(1.0, 0.5, 0.0)]).is_err());
        assert!(CoefficientProfile::new(0.0, 1.0, vec![Segment::constant(1.0, -0.5, 0.0)]).is_err());
        assert!(CoefficientProfile::new(0.0, 1.0, vec![Segment::constant(1.0, 0.5, 2e6)]).is_err());
        assert!(CoefficientProfile::new(0.0, 1.0, vec![Segment::sampled(1.0, vec![1.0], vec![0.0, 1.0])]).is_err());
    }

    #[test]
    fn lookup_and_interpolation() {
        let p = CoefficientProfile::new(
            0.0,
            PI,
            vec![Segment::constant(1.0, 0.5, 1.0), Segment::sampled(PI - 1.0, vec![1.0, 2.0], vec![0.0, 4.0, 0.0])],
        )
        .unwrap();
        assert_eq!(p.mass_at(0.5), 0.5);
        assert!((p.mass_at(1.0 + (PI - 1.0) / 2.0) - 1.5).abs() < 1e-12);
        assert!((p.potential_at(1.0 + (PI - 1.0) / 2.0) - 4.0).abs() < 1e-12);
        assert!((p.potential_mean_at(1.0) - 0.5).abs() < 1e-12);
        assert_eq!(p.breakpoints(), &[1.0]);
        assert_eq!(p.potential_range(), (0.0, 4.0));
        let placed: Vec<_> = p.placed().map(|(a, b, _)| (a, b)).collect();
        assert_eq!(placed, vec![(0.0, 1.0), (1.0, PI)]);
    }
}
