//! Uniformly sampled functions of frequency on `[0, xi_max]` and the
//! four-point interpolation stencils used to read them off-grid.

use num_complex::Complex64;

use crate::error::{KacError, Result};
use crate::initial_data::InitialDatum;

/// Complex samples of a function of `xi` on the uniform grid
/// `xi_k = k * xi_max / (n - 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFn {
    xi_max: f64,
    values: Vec<Complex64>,
    hermitian_even: bool,
    real_even: bool,
}

impl GridFn {
    /// Wraps samples. `hermitian_even` declares that the function on the
    /// whole line is the conjugate-even extension of these values.
    pub fn new(xi_max: f64, values: Vec<Complex64>, hermitian_even: bool) -> Result<Self> {
        if !(xi_max.is_finite() && xi_max > 0.0) {
            return Err(KacError::param("xi_max", format!("must be positive, got {xi_max}")));
        }
        if values.len() < 2 {
            return Err(KacError::param("n_points", "need at least two grid points"));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(KacError::param("values", "non-finite sample"));
        }
        let mut values = values;
        if hermitian_even {
            values[0].im = 0.0;
        }
        let real_even = hermitian_even && values.iter().all(|v| v.im == 0.0);
        Ok(Self {
            xi_max,
            values,
            hermitian_even,
            real_even,
        })
    }

    pub fn from_fn<F: Fn(f64) -> Complex64>(
        xi_max: f64,
        n_points: usize,
        hermitian_even: bool,
        f: F,
    ) -> Result<Self> {
        if n_points < 2 {
            return Err(KacError::param("n_points", "need at least two grid points"));
        }
        let h = xi_max / (n_points - 1) as f64;
        let values = (0..n_points).map(|k| f(k as f64 * h)).collect();
        Self::new(xi_max, values, hermitian_even)
    }

    /// Samples the characteristic function of a datum.
    pub fn from_datum(datum: &InitialDatum, xi_max: f64, n_points: usize) -> Result<Self> {
        Self::from_fn(xi_max, n_points, true, |xi| datum.eval_cf(xi))
    }

    pub fn xi_max(&self) -> f64 {
        self.xi_max
    }

    pub fn n_points(&self) -> usize {
        self.values.len()
    }

    pub fn step(&self) -> f64 {
        self.xi_max / (self.values.len() - 1) as f64
    }

    pub fn xi(&self, k: usize) -> f64 {
        k as f64 * self.step()
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn hermitian_even(&self) -> bool {
        self.hermitian_even
    }

    /// Hermitian-even with vanishing imaginary part: an even real function.
    pub fn real_even(&self) -> bool {
        self.real_even
    }

    pub fn same_grid(&self, other: &GridFn) -> bool {
        self.xi_max == other.xi_max && self.values.len() == other.values.len()
    }

    pub(crate) fn check_same_grid(&self, other: &GridFn) -> Result<()> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(KacError::GridMismatch(format!(
                "({}, {}) vs ({}, {})",
                self.xi_max,
                self.values.len(),
                other.xi_max,
                other.values.len()
            )))
        }
    }

    /// Same grid with every value replaced by `f(value)`.
    pub fn map<F: Fn(Complex64) -> Complex64>(&self, f: F) -> GridFn {
        let values: Vec<Complex64> = self.values.iter().map(|&v| f(v)).collect();
        Self::new(self.xi_max, values, self.hermitian_even).expect("grid already validated")
    }

    pub fn real_part(&self) -> GridFn {
        self.map(|v| Complex64::new(v.re, 0.0))
    }

    pub fn scale(&self, c: f64) -> GridFn {
        self.map(|v| v * c)
    }

    /// Pointwise difference `self - other`.
    pub fn sub(&self, other: &GridFn) -> Result<GridFn> {
        self.check_same_grid(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        Self::new(
            self.xi_max,
            values,
            self.hermitian_even && other.hermitian_even,
        )
    }

    pub fn sup_distance(&self, other: &GridFn) -> Result<f64> {
        self.check_same_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    pub fn max_abs_imag(&self) -> f64 {
        self.values.iter().map(|v| v.im.abs()).fold(0.0, f64::max)
    }

    /// Value at an arbitrary `x` with `|x| <= xi_max` by four-point
    /// interpolation; negative `x` needs hermitian-even data.
    pub fn at(&self, x: f64) -> Option<Complex64> {
        if !(x.abs() <= self.xi_max) {
            return None;
        }
        if x < 0.0 {
            return self.hermitian_even.then(|| self.at(-x).map(|v| v.conj())).flatten();
        }
        let pos = x / self.step();
        let v = if self.real_even {
            let s = EvenStencil::new(pos, self.values.len());
            Complex64::new(s.apply(|i| self.values[i].re), 0.0)
        } else {
            let s = LineStencil::new(pos, self.values.len());
            s.apply(|i| self.signed(i))
        };
        Some(v)
    }

    /// Value at a possibly negative integer index, using conjugate symmetry.
    fn signed(&self, i: isize) -> Complex64 {
        if i >= 0 {
            self.values[i as usize]
        } else {
            self.values[(-i) as usize].conj()
        }
    }

    /// `-phi''(0)` from the symmetric second difference at the grid step.
    pub fn second_moment_at_zero(&self) -> f64 {
        let h = self.step();
        let f0 = self.values[0].re;
        let f1 = self.values[1].re;
        -2.0 * (f1 - f0) / (h * h)
    }

    /// `phi''''(0)` from the symmetric fourth difference at the grid step.
    pub fn fourth_moment_at_zero(&self) -> f64 {
        let h = self.step();
        let [f0, f1, f2] = [0, 1, 2].map(|k| self.values[k].re);
        (2.0 * f2 - 8.0 * f1 + 6.0 * f0) / h.powi(4)
    }
}

/// Cubic Lagrange stencil in the variable `u = x^2` over four non-negative
/// nodes. Exact for even polynomials of degree six.
#[derive(Debug, Clone, Copy)]
pub(crate) struct EvenStencil {
    pub base: usize,
    pub w: [f64; 4],
}

impl EvenStencil {
    /// `pos` is the argument in units of the grid step.
    pub fn new(pos: f64, n: usize) -> Self {
        let base = (pos.floor() as isize - 1).clamp(0, n as isize - 4) as usize;
        let u = pos * pos;
        let nodes = [0, 1, 2, 3].map(|r| ((base + r) as f64).powi(2));
        Self {
            base,
            w: lagrange_weights(nodes, u),
        }
    }

    pub fn apply<F: Fn(usize) -> f64>(&self, f: F) -> f64 {
        (0..4).map(|r| self.w[r] * f(self.base + r)).sum()
    }
}

/// Cubic Lagrange stencil in `x`; indices may run below zero.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LineStencil {
    pub base: isize,
    pub w: [f64; 4],
}

impl LineStencil {
    pub fn new(pos: f64, n: usize) -> Self {
        let base = (pos.floor() as isize - 1).min(n as isize - 4);
        let nodes = [0, 1, 2, 3].map(|r| (base + r) as f64);
        Self {
            base,
            w: lagrange_weights(nodes, pos),
        }
    }

    pub fn apply<F: Fn(isize) -> Complex64>(&self, f: F) -> Complex64 {
        (0..4).map(|r| f(self.base + r as isize) * self.w[r]).sum()
    }
}

fn lagrange_weights(nodes: [f64; 4], x: f64) -> [f64; 4] {
    let mut w = [1.0; 4];
    for i in 0..4 {
        for j in 0..4 {
            if i != j {
                w[i] *= (x - nodes[j]) / (nodes[i] - nodes[j]);
            }
        }
    }
    w
}
