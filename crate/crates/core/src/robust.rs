//! Noise-robust estimation of a mixed scalar channel `m̄ = φ̄θ + δ̄₁`.
//!
//! The channel is smoothed by `k/(p + k)`, exponentiated (`g = eᵐ`), and the
//! multiplicative noise factor `e^{δ₁}` is truncated at second order. This
//! yields a regression `ζ = ψ₁θ + ψ₂θ² + ψ₃θ³` that is linear in
//! `Θ = (θ, θ², θ³)` and exact up to a defect of order `δ₁³`. `Θ` is then
//! estimated by DREM with two extra filters and scalar gradient flows.

use std::thread;

use crate::error::{Error, Result};
use crate::num::{Signal, Trajectory};
use crate::regression::{
    apply_filter, drem_extend, drem_mix, gradient_estimate, FilterSpec, LinearRegression,
    MixedRegression,
};
use crate::scalar::Scalar;

/// Largest `|m|` accepted by [`exp_transform`].
pub const EXP_GUARD: f64 = 300.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SmoothedChannel<S> {
    pub m: Signal<S>,
    pub m_dot: Signal<S>,
    pub phi_f: Signal<S>,
    pub phi_f_dot: Signal<S>,
    pub delta1_f: Option<Signal<S>>,
    pub delta1_f_dot: Option<Signal<S>>,
    pub pole: S,
}

/// Filters channel `i` of a mixed regression with `k/(p + k)` from rest.
pub fn smooth_channel<S: Scalar>(
    mixed: &MixedRegression<S>,
    i: usize,
    k: S,
) -> Result<SmoothedChannel<S>> {
    let filter = FilterSpec::lag(k)?;
    let m_bar = mixed.m_bar.get(i).ok_or(Error::Dimension {
        what: "mixed channel index",
        expected: mixed.channels(),
        found: i,
    })?;
    let m = apply_filter(&filter, m_bar, S::zero())?;
    let phi = apply_filter(&filter, &mixed.phi_bar, S::zero())?;
    let delta = mixed
        .delta1
        .as_ref()
        .map(|d| apply_filter(&filter, &d[i], S::zero()))
        .transpose()?;
    let (delta1_f, delta1_f_dot) = match delta {
        Some(d) => (Some(d.value), Some(d.derivative)),
        None => (None, None),
    };
    Ok(SmoothedChannel {
        m: m.value,
        m_dot: m.derivative,
        phi_f: phi.value,
        phi_f_dot: phi.derivative,
        delta1_f,
        delta1_f_dot,
        pole: k,
    })
}

/// `g = eᵐ`, `ġ = ṁ·g`.
pub fn exp_transform<S: Scalar>(ch: &SmoothedChannel<S>) -> Result<(Signal<S>, Signal<S>)> {
    let max_abs = ch.m.max_abs();
    if !(max_abs <= S::of(EXP_GUARD)) {
        return Err(Error::ExpOverflow {
            max_abs: max_abs.as_f64(),
            limit: EXP_GUARD,
        });
    }
    let g = ch.m.map(S::exp);
    let g_dot = ch.m_dot.zip_with(&g, |md, gi| md * gi)?;
    Ok((g, g_dot))
}

/// `g = (1 + δ₁ + δ₁²/2)·e^{φθ}` and its derivative, for a known `δ₁`.
///
/// With this `g` the cubic regression holds exactly, whatever `δ₁` is.
pub fn surrogate_transform<S: Scalar>(
    ch: &SmoothedChannel<S>,
    theta: S,
    delta1: &Signal<S>,
    delta1_dot: &Signal<S>,
) -> Result<(Signal<S>, Signal<S>)> {
    let grid = *ch.m.grid();
    grid.require_same(delta1.grid())?;
    grid.require_same(delta1_dot.grid())?;
    let half = S::of(0.5);
    let mut g = Vec::with_capacity(grid.len());
    let mut g_dot = Vec::with_capacity(grid.len());
    for k in 0..grid.len() {
        let (d, dd) = (delta1.get(k), delta1_dot.get(k));
        let e = (ch.phi_f.get(k) * theta).exp();
        let factor = S::one() + d + half * d * d;
        g.push(factor * e);
        g_dot.push(dd * (S::one() + d) * e + factor * ch.phi_f_dot.get(k) * theta * e);
    }
    let interpolation = ch.m.interpolation();
    Ok((
        Signal::new(grid, g)?.with_interpolation(interpolation),
        Signal::new(grid, g_dot)?.with_interpolation(interpolation),
    ))
}

/// Which expression to use for `ψ₁`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Psi1Form {
    /// `φġ + φmġ + ½m²φ̇g − φgṁ`.
    #[default]
    Derived,
    /// The six-term variant `φġ + φmġ + gφ̇ − φgṁ + ½m²φ̇g − φg`, kept for
    /// comparison only; it does not satisfy the noise-free identity.
    Printed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CubicRegression<S> {
    pub zeta: Signal<S>,
    pub psi: [Signal<S>; 3],
    pub g: Signal<S>,
    pub g_dot: Signal<S>,
}

impl<S: Scalar> CubicRegression<S> {
    /// `ζ − (ψ₁θ + ψ₂θ² + ψ₃θ³)`.
    pub fn residual(&self, theta: S) -> Signal<S> {
        let big = [theta, theta * theta, theta * theta * theta];
        let values = (0..self.zeta.len())
            .map(|k| {
                self.zeta.get(k)
                    - self
                        .psi
                        .iter()
                        .zip(big)
                        .fold(S::zero(), |acc, (p, b)| acc + p.get(k) * b)
            })
            .collect();
        Signal::new(*self.zeta.grid(), values)
            .expect("residual has the regression grid")
            .with_interpolation(self.zeta.interpolation())
    }

    pub fn regressor(&self) -> Result<Trajectory<S>> {
        Trajectory::from_components(&self.psi)
    }
}

pub fn build_cubic_regression<S: Scalar>(
    ch: &SmoothedChannel<S>,
    g: &Signal<S>,
    g_dot: &Signal<S>,
) -> Result<CubicRegression<S>> {
    build_cubic_regression_with(ch, g, g_dot, Psi1Form::Derived)
}

pub fn build_cubic_regression_with<S: Scalar>(
    ch: &SmoothedChannel<S>,
    g: &Signal<S>,
    g_dot: &Signal<S>,
    form: Psi1Form,
) -> Result<CubicRegression<S>> {
    let grid = *ch.m.grid();
    for s in [&ch.m_dot, &ch.phi_f, &ch.phi_f_dot, g, g_dot] {
        grid.require_same(s.grid())?;
    }
    let half = S::of(0.5);
    let n = grid.len();
    let mut zeta = Vec::with_capacity(n);
    let mut psi: [Vec<S>; 3] = std::array::from_fn(|_| Vec::with_capacity(n));
    for k in 0..n {
        let (m, md) = (ch.m.get(k), ch.m_dot.get(k));
        let (p, pd) = (ch.phi_f.get(k), ch.phi_f_dot.get(k));
        let (gi, gd) = (g.get(k), g_dot.get(k));
        zeta.push(gd + m * gd + half * m * m * gd - gi * md - gi * m * md);
        let mut psi1 = p * gd + p * m * gd + half * m * m * pd * gi - p * gi * md;
        if form == Psi1Form::Printed {
            psi1 = psi1 + gi * pd - p * gi;
        }
        psi[0].push(psi1);
        psi[1].push(-half * p * p * gd - m * p * pd * gi);
        psi[2].push(half * p * p * pd * gi);
    }
    let interpolation = ch.m.interpolation();
    let wrap = |v: Vec<S>| Signal::new(grid, v).map(|s| s.with_interpolation(interpolation));
    let [p1, p2, p3] = psi;
    Ok(CubicRegression {
        zeta: wrap(zeta)?,
        psi: [wrap(p1)?, wrap(p2)?, wrap(p3)?],
        g: g.clone(),
        g_dot: g_dot.clone(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThetaEstimate<S> {
    /// Estimates of `θ`, `θ²`, `θ³`.
    pub big_theta: [Signal<S>; 3],
    /// Released estimate, equal to `big_theta[0]`.
    pub theta: Signal<S>,
    /// `|Θ̂₂ − Θ̂₁²|`.
    pub consistency: Signal<S>,
    /// `max |det|` of the mixed 3×3 cubic regressor.
    pub mixed_regressor_max: S,
    pub max_substeps: usize,
    pub capped_steps: usize,
}

/// DREM on the cubic regression with exactly two filters, then one scalar
/// gradient flow per component of `Θ` from `Θ̂(0) = 0`.
pub fn estimate_theta_cubic<S: Scalar>(
    cr: &CubicRegression<S>,
    filters: &[FilterSpec<S>],
    gamma: S,
) -> Result<ThetaEstimate<S>> {
    if filters.len() != 2 {
        return Err(Error::Dimension {
            what: "cubic DREM filter count",
            expected: 2,
            found: filters.len(),
        });
    }
    let reg = LinearRegression::new(cr.zeta.clone(), cr.regressor()?)?;
    let mixed = drem_mix(&drem_extend(&reg, filters)?)?;
    let phi = &mixed.phi_bar;
    let runs = thread::scope(|scope| {
        let handles: Vec<_> = mixed
            .m_bar
            .iter()
            .map(|m| scope.spawn(move || gradient_estimate(m, phi, gamma, S::zero())))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("gradient worker panicked"))
            .collect::<Result<Vec<_>>>()
    })?;
    let max_substeps = runs.iter().map(|r| r.max_substeps).max().unwrap_or(1);
    let capped_steps = runs.iter().map(|r| r.capped_steps).sum();
    let [t1, t2, t3]: [Signal<S>; 3] = runs
        .into_iter()
        .map(|r| r.theta)
        .collect::<Vec<_>>()
        .try_into()
        .expect("three mixed channels");
    let consistency = t2.zip_with(&t1, |b, a| (b - a * a).abs())?;
    Ok(ThetaEstimate {
        theta: t1.clone(),
        big_theta: [t1, t2, t3],
        consistency,
        mixed_regressor_max: phi.max_abs(),
        max_substeps,
        capped_steps,
    })
}
