//! Linear regression `z = φθ + δ` from the GPEBO parametrization, dynamic
//! regressor extension and mixing (DREM), and the scalar gradient estimator.
//!
//! DREM stacks the regression with `n − 1` filtered copies of itself,
//! `z̄ = Φ̄θ + δ̄`, then multiplies by `adj Φ̄` so every parameter obeys its
//! own scalar regression `m̄ᵢ = φ̄θᵢ + δ̄₁ᵢ` with the common regressor
//! `φ̄ = det Φ̄`.

use crate::error::{Error, Result};
use crate::num::{dot, integrate_driven, Interpolation, Matrix, Signal, TimeGrid, Trajectory};
use crate::observers::GpeboState;
use crate::plant::PlantRun;
use crate::scalar::Scalar;

/// Stability target for the explicit gradient integrator: each substep
/// satisfies `γ·φ̄²·h_sub ≤ GRADIENT_STEP_BOUND`.
pub const GRADIENT_STEP_BOUND: f64 = 0.1;

/// Upper bound on gradient substeps per grid step.
pub const MAX_SUBSTEPS: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearRegression<S> {
    pub z: Signal<S>,
    /// Row regressor `φ[k]` (1×n) stored as an n-dimensional trajectory.
    pub phi_row: Trajectory<S>,
    pub delta_bound: Option<S>,
}

impl<S: Scalar> LinearRegression<S> {
    pub fn new(z: Signal<S>, phi_row: Trajectory<S>) -> Result<Self> {
        if z.grid() != phi_row.grid() {
            return Err(Error::GridMismatch);
        }
        Ok(Self {
            z,
            phi_row,
            delta_bound: None,
        })
    }

    pub fn grid(&self) -> &TimeGrid<S> {
        self.z.grid()
    }

    pub fn order(&self) -> usize {
        self.phi_row.dim()
    }

    /// `z[k] − φ[k]·θ` for a candidate parameter.
    pub fn residual(&self, theta: &[S]) -> Result<Signal<S>> {
        if theta.len() != self.order() {
            return Err(Error::Dimension {
                what: "regression parameter",
                expected: self.order(),
                found: theta.len(),
            });
        }
        let fitted = Signal::new(
            *self.grid(),
            self.phi_row.samples().map(|p| dot(p, theta)).collect(),
        )?;
        self.z.sub(&fitted)
    }
}

/// `z = y − Cᵀξ`, `φ = CᵀΦ`.
pub fn build_regression<S: Scalar>(
    run: &PlantRun<S>,
    gpebo: &GpeboState<S>,
    c: &[S],
) -> Result<LinearRegression<S>> {
    if run.grid() != gpebo.grid() {
        return Err(Error::GridMismatch);
    }
    let n = gpebo.order();
    if c.len() != n {
        return Err(Error::Dimension {
            what: "output vector C",
            expected: n,
            found: c.len(),
        });
    }
    let copy_output = Signal::new(
        *run.grid(),
        gpebo.xi.samples().map(|xi| dot(c, xi)).collect(),
    )?;
    let z = run.y.sub(&copy_output)?;
    let phi_row = Trajectory::from_fn(*run.grid(), n, |k, out| {
        let phi = &gpebo.phi_fund[k];
        for (j, o) in out.iter_mut().enumerate() {
            *o = (0..n).fold(S::zero(), |acc, i| acc + c[i] * *phi.get(i, j));
        }
    });
    LinearRegression::new(z, phi_row)
}

/// Unity-DC first-order lag `a/(p + a)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterSpec<S> {
    pole: S,
}

impl<S: Scalar> FilterSpec<S> {
    pub fn lag(pole: S) -> Result<Self> {
        if !(pole > S::zero()) || !pole.is_finite() {
            return Err(Error::InvalidParameter {
                name: "filter pole",
                value: pole.as_f64(),
                reason: "must be finite and > 0",
            });
        }
        Ok(Self { pole })
    }

    pub fn pole(&self) -> S {
        self.pole
    }
}

/// Output of a lag filter together with its exact time derivative.
#[derive(Debug, Clone, PartialEq)]
pub struct Filtered<S> {
    pub value: Signal<S>,
    /// `a·(s − w)` from the filter state, not by differencing.
    pub derivative: Signal<S>,
}

/// Solves `ẇ = a(s − w)`, `w(0) = w0`, on the grid of `s`.
pub fn apply_filter<S: Scalar>(f: &FilterSpec<S>, s: &Signal<S>, w0: S) -> Result<Filtered<S>> {
    let a = f.pole;
    let tr = integrate_driven(
        |_, w, u, dw| dw[0] = a * (u[0] - w[0]),
        s.grid(),
        &[w0],
        &[s],
    )?;
    let interpolation = match s.interpolation() {
        Interpolation::Hold => Interpolation::Linear,
        other => other,
    };
    let value = tr.component(0).with_interpolation(interpolation);
    let derivative = s.zip_with(&value, |si, wi| a * (si - wi))?;
    Ok(Filtered { value, derivative })
}

/// Convenience: filtered values only, zero initial state.
pub fn lag<S: Scalar>(f: &FilterSpec<S>, s: &Signal<S>) -> Result<Signal<S>> {
    Ok(apply_filter(f, s, S::zero())?.value)
}

/// `[s, H₁s, …, H_{n−1}s]` with zero initial filter states.
pub fn extend_signal<S: Scalar>(
    s: &Signal<S>,
    filters: &[FilterSpec<S>],
) -> Result<Vec<Signal<S>>> {
    let mut out = Vec::with_capacity(filters.len() + 1);
    out.push(s.clone());
    for f in filters {
        out.push(lag(f, s)?);
    }
    Ok(out)
}

/// Stacked regression `z̄ = Φ̄θ + δ̄`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedRegression<S> {
    pub z_bar: Vec<Signal<S>>,
    /// `Φ̄[k]`: row 0 is `φ[k]`, row `i` is `φ` filtered by `Hᵢ`.
    pub phi_bar: Vec<Matrix<S>>,
    pub filters: Vec<FilterSpec<S>>,
    /// Interpolation applied to every stacked signal before filtering, so
    /// the extended regression inherits the linearity of the original.
    pub interpolation: Interpolation,
}

impl<S: Scalar> ExtendedRegression<S> {
    pub fn grid(&self) -> &TimeGrid<S> {
        self.z_bar[0].grid()
    }

    pub fn order(&self) -> usize {
        self.z_bar.len()
    }
}

pub fn drem_extend<S: Scalar>(
    reg: &LinearRegression<S>,
    filters: &[FilterSpec<S>],
) -> Result<ExtendedRegression<S>> {
    let n = reg.order();
    if filters.len() + 1 != n {
        return Err(Error::Dimension {
            what: "DREM filter count",
            expected: n - 1,
            found: filters.len(),
        });
    }
    let interpolation = reg.z.interpolation();
    let z_bar = extend_signal(&reg.z, filters)?;
    // phi_cols[j][i]: column j of φ passed through extension i.
    let phi_cols = (0..n)
        .map(|j| {
            let col = reg.phi_row.component(j).with_interpolation(interpolation);
            extend_signal(&col, filters)
        })
        .collect::<Result<Vec<_>>>()?;
    let phi_bar = (0..reg.grid().len())
        .map(|k| Matrix::from_fn(n, n, |i, j| phi_cols[j][i].get(k)))
        .collect();
    Ok(ExtendedRegression {
        z_bar,
        phi_bar,
        filters: filters.to_vec(),
        interpolation,
    })
}

/// Per-channel check of `|δ̄₁ᵢ| < 1` against a known disturbance.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Assumption2Report {
    pub max_abs: Vec<f64>,
    pub ok: Vec<bool>,
}

impl Assumption2Report {
    pub fn from_mixed_disturbance<S: Scalar>(delta1: &[Signal<S>]) -> Self {
        let max_abs: Vec<f64> = delta1.iter().map(|d| d.max_abs().as_f64()).collect();
        let ok = max_abs.iter().map(|&m| m < 1.0).collect();
        Self { max_abs, ok }
    }

    pub fn all_ok(&self) -> bool {
        self.ok.iter().all(|&b| b)
    }
}

/// Scalar regressions `m̄ᵢ = φ̄θᵢ + δ̄₁ᵢ`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedRegression<S> {
    pub m_bar: Vec<Signal<S>>,
    pub phi_bar: Signal<S>,
    /// `adj(Φ̄)δ̄`, simulation-side only.
    pub delta1: Option<Vec<Signal<S>>>,
    pub assumption2: Option<Assumption2Report>,
}

impl<S: Scalar> MixedRegression<S> {
    pub fn channels(&self) -> usize {
        self.m_bar.len()
    }

    pub fn grid(&self) -> &TimeGrid<S> {
        self.phi_bar.grid()
    }

    /// Attaches the mixed disturbance and evaluates the `|δ̄₁ᵢ| < 1` check.
    pub fn with_disturbance(mut self, delta1: Vec<Signal<S>>) -> Result<Self> {
        if delta1.len() != self.channels() {
            return Err(Error::Dimension {
                what: "mixed disturbance channels",
                expected: self.channels(),
                found: delta1.len(),
            });
        }
        self.assumption2 = Some(Assumption2Report::from_mixed_disturbance(&delta1));
        self.delta1 = Some(delta1);
        Ok(self)
    }

    /// `∫φ̄² dt`, a proxy for excitation.
    pub fn excitation(&self) -> S {
        self.phi_bar.map(|p| p * p).integral()
    }
}

/// Applies `adj(Φ̄[k])` to stacked samples `v̄[k]`.
pub fn mix_signals<S: Scalar>(
    phi_bar: &[Matrix<S>],
    v_bar: &[Signal<S>],
) -> Result<Vec<Signal<S>>> {
    let n = v_bar.len();
    let grid = *v_bar
        .first()
        .ok_or(Error::Dimension {
            what: "stacked signals",
            expected: 1,
            found: 0,
        })?
        .grid();
    if phi_bar.len() != grid.len() {
        return Err(Error::Dimension {
            what: "extended regressor samples",
            expected: grid.len(),
            found: phi_bar.len(),
        });
    }
    let mut out = vec![Vec::with_capacity(grid.len()); n];
    let mut stacked = vec![S::zero(); n];
    for (k, m) in phi_bar.iter().enumerate() {
        if m.rows() != n {
            return Err(Error::Dimension {
                what: "extended regressor",
                expected: n,
                found: m.rows(),
            });
        }
        for (s, v) in stacked.iter_mut().zip(v_bar) {
            *s = v.get(k);
        }
        let mixed = m.adjugate()?.mul_vec(&stacked)?;
        for (o, x) in out.iter_mut().zip(mixed) {
            o.push(x);
        }
    }
    let interpolation = v_bar[0].interpolation();
    out.into_iter()
        .map(|values| Ok(Signal::new(grid, values)?.with_interpolation(interpolation)))
        .collect()
}

/// `m̄ = adj(Φ̄)z̄`, `φ̄ = det(Φ̄)`, pointwise. Singular samples give `φ̄ = 0`.
pub fn drem_mix<S: Scalar>(ext: &ExtendedRegression<S>) -> Result<MixedRegression<S>> {
    for z in &ext.z_bar {
        ext.grid().require_same(z.grid())?;
    }
    let m_bar = mix_signals(&ext.phi_bar, &ext.z_bar)?;
    let dets = ext
        .phi_bar
        .iter()
        .map(Matrix::det)
        .collect::<Result<Vec<_>>>()?;
    let phi_bar = Signal::new(*ext.grid(), dets)?.with_interpolation(ext.z_bar[0].interpolation());
    Ok(MixedRegression {
        m_bar,
        phi_bar,
        delta1: None,
        assumption2: None,
    })
}

/// `adj(Φ̄)δ̄` for a known disturbance realization `δ`, extended with the
/// same filters as the regression.
pub fn mixed_disturbance<S: Scalar>(
    ext: &ExtendedRegression<S>,
    delta: &Signal<S>,
) -> Result<Vec<Signal<S>>> {
    let delta = delta.clone().with_interpolation(ext.interpolation);
    let delta_bar = extend_signal(&delta, &ext.filters)?;
    mix_signals(&ext.phi_bar, &delta_bar)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientEstimate<S> {
    pub theta: Signal<S>,
    /// Largest substep count used for any grid step.
    pub max_substeps: usize,
    /// Grid steps where the substep count hit [`MAX_SUBSTEPS`].
    pub capped_steps: usize,
}

/// Integrates `θ̂̇ = −γφ(φθ̂ − m)` on the grid of `m`.
///
/// Each grid step is split into `⌈γ·max|φ|²·h / 0.1⌉` RK4 substeps (at
/// least one, at most [`MAX_SUBSTEPS`]), with `φ` and `m` interpolated
/// inside the step.
pub fn gradient_estimate<S: Scalar>(
    m: &Signal<S>,
    phi: &Signal<S>,
    gamma: S,
    theta0: S,
) -> Result<GradientEstimate<S>> {
    if !(gamma > S::zero()) || !gamma.is_finite() {
        return Err(Error::InvalidParameter {
            name: "gamma",
            value: gamma.as_f64(),
            reason: "must be finite and > 0",
        });
    }
    m.grid().require_same(phi.grid())?;
    let grid = *m.grid();
    let h = grid.step();
    let bound = S::of(GRADIENT_STEP_BOUND);
    let half = S::of(0.5);
    let two = S::of(2.0);
    let six = S::of(6.0);

    let mut theta = theta0;
    let mut values = Vec::with_capacity(grid.len());
    values.push(theta);
    let mut max_substeps = 1;
    let mut capped_steps = 0;

    for k in 0..grid.len() - 1 {
        let peak = phi.get(k).abs().max(phi.get(k + 1).abs());
        let wanted = (gamma * peak * peak * h / bound).ceil();
        let substeps = match wanted.to_usize() {
            Some(n) if n <= MAX_SUBSTEPS => n.max(1),
            _ => {
                capped_steps += 1;
                MAX_SUBSTEPS
            }
        };
        max_substeps = max_substeps.max(substeps);
        let ns = S::of_usize(substeps);
        let hs = h / ns;
        let field = |frac: S, th: S| {
            let p = phi.value_in_step(k, frac);
            -gamma * p * (p * th - m.value_in_step(k, frac))
        };
        for j in 0..substeps {
            let f0 = S::of_usize(j) / ns;
            let fm = (S::of_usize(j) + half) / ns;
            let f1 = S::of_usize(j + 1) / ns;
            let k1 = field(f0, theta);
            let k2 = field(fm, theta + hs * half * k1);
            let k3 = field(fm, theta + hs * half * k2);
            let k4 = field(f1, theta + hs * k3);
            theta = theta + hs / six * (k1 + two * k2 + two * k3 + k4);
        }
        if !theta.is_finite() {
            return Err(Error::NonFinite {
                t: grid.time(k + 1).as_f64(),
                sample: Some(k + 1),
            });
        }
        values.push(theta);
    }
    Ok(GradientEstimate {
        theta: Signal::new(grid, values)?,
        max_substeps,
        capped_steps,
    })
}
