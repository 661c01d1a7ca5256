//! Uniform meshes, sampled functions and Simpson quadrature on them.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::slp::QuasiState;

/// Uniform mesh with `nodes` points on `[start, stop]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mesh {
    pub start: f64,
    pub stop: f64,
    pub nodes: usize,
}

impl Mesh {
    pub fn new(start: f64, stop: f64, nodes: usize) -> Self {
        assert!(nodes >= 2, "a mesh needs at least two nodes");
        Self { start, stop, nodes }
    }

    pub fn spacing(&self) -> f64 {
        (self.stop - self.start) / (self.nodes - 1) as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        if i + 1 == self.nodes {
            self.stop
        } else {
            self.start + i as f64 * self.spacing()
        }
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.nodes).map(|i| self.node(i))
    }

    /// Composite Simpson weights; an odd number of intervals closes with the 3/8 rule.
    pub fn simpson_weights(&self) -> Vec<f64> {
        let n = self.nodes;
        let h = self.spacing();
        let intervals = n - 1;
        let mut w = vec![0.0; n];
        if intervals == 1 {
            w[0] = 0.5 * h;
            w[1] = 0.5 * h;
            return w;
        }
        let simpson_end = if intervals.is_multiple_of(2) { intervals } else { intervals - 3 };
        for pair in (0..simpson_end).step_by(2) {
            w[pair] += h / 3.0;
            w[pair + 1] += 4.0 * h / 3.0;
            w[pair + 2] += h / 3.0;
        }
        if simpson_end < intervals {
            let s = simpson_end;
            let c = 3.0 * h / 8.0;
            w[s] += c;
            w[s + 1] += 3.0 * c;
            w[s + 2] += 3.0 * c;
            w[s + 3] += c;
        }
        w
    }
}

/// Complex values sampled on a mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshFunction {
    pub mesh: Mesh,
    pub values: Vec<Complex64>,
}

impl MeshFunction {
    pub fn new(mesh: Mesh, values: Vec<Complex64>) -> Self {
        assert_eq!(mesh.nodes, values.len());
        Self { mesh, values }
    }

    pub fn from_fn(mesh: Mesh, f: impl Fn(f64) -> Complex64) -> Self {
        let values = mesh.points().map(f).collect();
        Self { mesh, values }
    }

    pub fn from_real_fn(mesh: Mesh, f: impl Fn(f64) -> f64) -> Self {
        Self::from_fn(mesh, |x| Complex64::new(f(x), 0.0))
    }

    pub fn first(&self) -> Complex64 {
        self.values[0]
    }

    pub fn last(&self) -> Complex64 {
        *self.values.last().unwrap()
    }

    pub fn norm(&self) -> f64 {
        l2_inner(self, self).map(|z| z.re.max(0.0).sqrt()).unwrap_or(f64::NAN)
    }

    pub fn scale(&mut self, factor: Complex64) {
        self.values.iter_mut().for_each(|v| *v *= factor);
    }

    /// Cumulative integral `x ↦ ∫_{start}^{x} f` at every node (cubic interpolation per interval).
    pub fn cumulative_integral(&self) -> Vec<Complex64> {
        let f = &self.values;
        let n = f.len();
        let h = self.mesh.spacing();
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        if n < 4 {
            for i in 0..n - 1 {
                out[i + 1] = out[i] + 0.5 * h * (f[i] + f[i + 1]);
            }
            return out;
        }
        for i in 0..n - 1 {
            let piece = if i == 0 {
                9.0 * f[0] + 19.0 * f[1] - 5.0 * f[2] + f[3]
            } else if i + 2 == n {
                f[i - 2] - 5.0 * f[i - 1] + 19.0 * f[i] + 9.0 * f[i + 1]
            } else {
                -f[i - 1] + 13.0 * f[i] + 13.0 * f[i + 1] - f[i + 2]
            };
            out[i + 1] = out[i] + piece * (h / 24.0);
        }
        out
    }
}

/// `∫ a(x)·conj(b(x)) dx` by composite Simpson quadrature.
pub fn l2_inner(a: &MeshFunction, b: &MeshFunction) -> Result<Complex64> {
    if a.mesh != b.mesh || a.values.len() != b.values.len() {
        return Err(Error::MeshMismatch);
    }
    let w = a.mesh.simpson_weights();
    Ok(a.values.iter().zip(&b.values).zip(&w).map(|((x, y), w)| x * y.conj() * *w).sum())
}

/// Mesh-sampled solution `(u, p)` of the quasi-derivative system.
#[derive(Debug, Clone, PartialEq)]
pub struct StateTrajectory {
    pub mesh: Mesh,
    pub states: Vec<QuasiState>,
}

impl StateTrajectory {
    pub fn u(&self) -> MeshFunction {
        MeshFunction::new(self.mesh, self.states.iter().map(|s| s.u).collect())
    }

    pub fn p(&self) -> MeshFunction {
        MeshFunction::new(self.mesh, self.states.iter().map(|s| s.p).collect())
    }

    pub fn first(&self) -> QuasiState {
        self.states[0]
    }

    pub fn last(&self) -> QuasiState {
        *self.states.last().unwrap()
    }
}
