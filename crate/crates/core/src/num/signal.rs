//! Uniformly sampled scalar and vector time series.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Uniform sampling grid `t_k = t0 + k·h`, `k = 0..count`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid<S> {
    t0: S,
    step: S,
    count: usize,
}

impl<S: Scalar> TimeGrid<S> {
    pub fn new(t0: S, step: S, count: usize) -> Result<Self> {
        if !(step > S::zero()) || !step.is_finite() {
            return Err(Error::InvalidGrid(format!("step must be > 0, got {step}")));
        }
        if !t0.is_finite() {
            return Err(Error::InvalidGrid(format!("t0 must be finite, got {t0}")));
        }
        if count == 0 {
            return Err(Error::InvalidGrid("sample count must be positive".into()));
        }
        Ok(Self { t0, step, count })
    }

    /// Grid covering `[t0, t_end]`; the sample count is rounded to the nearest
    /// whole number of steps.
    pub fn spanning(t0: S, t_end: S, step: S) -> Result<Self> {
        if !(t_end >= t0) {
            return Err(Error::InvalidGrid(format!(
                "end time {t_end} precedes start time {t0}"
            )));
        }
        if !(step > S::zero()) {
            return Err(Error::InvalidGrid(format!("step must be > 0, got {step}")));
        }
        let steps = ((t_end - t0) / step).round();
        let steps = steps
            .to_usize()
            .ok_or_else(|| Error::InvalidGrid(format!("cannot fit {steps} steps")))?;
        Self::new(t0, step, steps + 1)
    }

    pub fn t0(&self) -> S {
        self.t0
    }

    pub fn step(&self) -> S {
        self.step
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    /// Time of sample `k`, computed as `t0 + k·h` without accumulation.
    pub fn time(&self, k: usize) -> S {
        self.t0 + S::of_usize(k) * self.step
    }

    pub fn t_end(&self) -> S {
        self.time(self.count - 1)
    }

    pub fn times(&self) -> impl Iterator<Item = S> + '_ {
        (0..self.count).map(|k| self.time(k))
    }

    /// First sample index of the final `fraction` of the horizon, i.e. the
    /// smallest `k` with `k ≥ (1 - fraction)·(count - 1)`.
    pub fn tail_start(&self, fraction: f64) -> usize {
        let last = (self.count - 1) as f64;
        let k = ((1.0 - fraction) * last - 1e-9).ceil().max(0.0) as usize;
        k.min(self.count - 1)
    }

    pub(crate) fn require_same(&self, other: &Self) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }
}

/// How a signal is evaluated between its samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Interpolation {
    #[default]
    Linear,
    /// Four-point Lagrange interpolation through the neighbouring samples.
    Cubic,
    /// Sample value held over the whole step.
    Hold,
}

impl Interpolation {
    fn combine(self, other: Self) -> Self {
        use Interpolation::*;
        match (self, other) {
            (Hold, _) | (_, Hold) => Hold,
            (Cubic, _) | (_, Cubic) => Cubic,
            _ => Linear,
        }
    }
}

/// Cubic Lagrange interpolation through `v[first..first + 4]` evaluated at
/// offset `x` measured from sample `first`.
fn lagrange4<S: Scalar>(v: &[S], first: usize, x: S) -> S {
    let mut acc = S::zero();
    for i in 0..4 {
        let xi = S::of_usize(i);
        let mut w = S::one();
        for j in (0..4).filter(|&j| j != i) {
            let xj = S::of_usize(j);
            w = w * (x - xj) / (xi - xj);
        }
        acc = acc + w * v[first + i];
    }
    acc
}

#[derive(Debug, Clone, PartialEq)]
pub struct Signal<S> {
    grid: TimeGrid<S>,
    values: Vec<S>,
    interpolation: Interpolation,
}

impl<S: Scalar> Signal<S> {
    pub fn new(grid: TimeGrid<S>, values: Vec<S>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Dimension {
                what: "signal samples",
                expected: grid.len(),
                found: values.len(),
            });
        }
        Ok(Self {
            grid,
            values,
            interpolation: Interpolation::Linear,
        })
    }

    pub fn from_fn(grid: TimeGrid<S>, mut f: impl FnMut(S) -> S) -> Self {
        let values = grid.times().map(&mut f).collect();
        Self {
            grid,
            values,
            interpolation: Interpolation::Linear,
        }
    }

    pub fn constant(grid: TimeGrid<S>, value: S) -> Self {
        Self::from_fn(grid, |_| value)
    }

    pub fn zeros(grid: TimeGrid<S>) -> Self {
        Self::constant(grid, S::zero())
    }

    pub fn with_interpolation(mut self, interpolation: Interpolation) -> Self {
        self.interpolation = interpolation;
        self
    }

    pub fn interpolation(&self) -> Interpolation {
        self.interpolation
    }

    pub fn grid(&self) -> &TimeGrid<S> {
        &self.grid
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, k: usize) -> S {
        self.values[k]
    }

    pub fn last(&self) -> S {
        self.values[self.values.len() - 1]
    }

    /// Value inside step `k → k+1` at fraction `frac ∈ [0, 1]`.
    pub fn value_in_step(&self, k: usize, frac: S) -> S {
        let v0 = self.values[k];
        let n = self.values.len();
        match self.interpolation {
            Interpolation::Hold => v0,
            Interpolation::Cubic if n >= 4 && k + 1 < n => {
                // Stencil k-1..k+2, shifted inwards at the ends.
                let first = k.saturating_sub(1).min(n - 4);
                lagrange4(&self.values, first, S::of_usize(k - first) + frac)
            }
            Interpolation::Linear | Interpolation::Cubic => match self.values.get(k + 1) {
                Some(&v1) => v0 + (v1 - v0) * frac,
                None => v0,
            },
        }
    }

    pub fn map(&self, f: impl Fn(S) -> S) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
            interpolation: self.interpolation,
        }
    }

    /// Pointwise combination; both signals must share one grid.
    pub fn zip_with(&self, other: &Self, f: impl Fn(S, S) -> S) -> Result<Self> {
        self.grid.require_same(&other.grid)?;
        Ok(Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
            interpolation: self.interpolation.combine(other.interpolation),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, s: S) -> Self {
        self.map(|v| v * s)
    }

    pub fn max_abs(&self) -> S {
        self.values.iter().fold(S::zero(), |m, v| m.max(v.abs()))
    }

    pub fn rms(&self) -> S {
        let n = S::of_usize(self.values.len());
        (self.values.iter().map(|&v| v * v).sum::<S>() / n).sqrt()
    }

    /// Trapezoidal integral over the whole grid.
    pub fn integral(&self) -> S {
        let h = self.grid.step();
        let half = S::of(0.5);
        self.values
            .windows(2)
            .map(|w| (w[0] + w[1]) * half * h)
            .sum()
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Vector-valued time series; sample `k` is a vector of length `dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<S> {
    grid: TimeGrid<S>,
    dim: usize,
    values: Vec<S>,
}

impl<S: Scalar> Trajectory<S> {
    /// Builds from row-major samples (`grid.len() * dim` values).
    pub fn new(grid: TimeGrid<S>, dim: usize, values: Vec<S>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Dimension {
                what: "trajectory dimension",
                expected: 1,
                found: 0,
            });
        }
        if values.len() != grid.len() * dim {
            return Err(Error::Dimension {
                what: "trajectory samples",
                expected: grid.len() * dim,
                found: values.len(),
            });
        }
        Ok(Self { grid, dim, values })
    }

    pub fn from_fn(grid: TimeGrid<S>, dim: usize, mut f: impl FnMut(usize, &mut [S])) -> Self {
        let mut values = vec![S::zero(); grid.len() * dim];
        for (k, chunk) in values.chunks_mut(dim).enumerate() {
            f(k, chunk);
        }
        Self { grid, dim, values }
    }

    /// Stacks scalar signals as the components of a trajectory.
    pub fn from_components(components: &[Signal<S>]) -> Result<Self> {
        let first = components.first().ok_or(Error::Dimension {
            what: "trajectory components",
            expected: 1,
            found: 0,
        })?;
        for c in components {
            first.grid.require_same(&c.grid)?;
        }
        let dim = components.len();
        Ok(Self::from_fn(first.grid, dim, |k, out| {
            for (o, c) in out.iter_mut().zip(components) {
                *o = c.values[k];
            }
        }))
    }

    pub fn grid(&self) -> &TimeGrid<S> {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn sample(&self, k: usize) -> &[S] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    pub fn samples(&self) -> impl Iterator<Item = &[S]> {
        self.values.chunks(self.dim)
    }

    pub fn component(&self, i: usize) -> Signal<S> {
        Signal {
            grid: self.grid,
            values: self.samples().map(|s| s[i]).collect(),
            interpolation: Interpolation::Linear,
        }
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.grid.require_same(&other.grid)?;
        if self.dim != other.dim {
            return Err(Error::Dimension {
                what: "trajectory difference",
                expected: self.dim,
                found: other.dim,
            });
        }
        Ok(Self {
            grid: self.grid,
            dim: self.dim,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| a - b)
                .collect(),
        })
    }

    pub fn max_abs(&self) -> S {
        self.values.iter().fold(S::zero(), |m, v| m.max(v.abs()))
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}
