//! Fixed-step classical Runge–Kutta integration.

use crate::error::{Error, Result};
use crate::num::signal::{Signal, TimeGrid, Trajectory};
use crate::scalar::Scalar;

struct Scratch<S> {
    k1: Vec<S>,
    k2: Vec<S>,
    k3: Vec<S>,
    k4: Vec<S>,
    tmp: Vec<S>,
}

impl<S: Scalar> Scratch<S> {
    fn new(n: usize) -> Self {
        Self {
            k1: vec![S::zero(); n],
            k2: vec![S::zero(); n],
            k3: vec![S::zero(); n],
            k4: vec![S::zero(); n],
            tmp: vec![S::zero(); n],
        }
    }
}

fn check_finite<S: Scalar>(d: &[S], t: S) -> Result<()> {
    if d.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite {
            t: t.as_f64(),
            sample: None,
        })
    }
}

/// One RK4 step in place. `f(stage, t, x, dx)` where `stage` is 0 (start),
/// 1 or 2 (midpoint), 3 (end).
fn rk4_in_place<S, F>(f: &mut F, t: S, x: &mut [S], h: S, s: &mut Scratch<S>) -> Result<()>
where
    S: Scalar,
    F: FnMut(usize, S, &[S], &mut [S]),
{
    let half = S::of(0.5);
    let th = t + h * half;

    f(0, t, x, &mut s.k1);
    check_finite(&s.k1, t)?;
    for ((o, &xi), &k) in s.tmp.iter_mut().zip(x.iter()).zip(&s.k1) {
        *o = xi + h * half * k;
    }
    f(1, th, &s.tmp, &mut s.k2);
    check_finite(&s.k2, th)?;
    for ((o, &xi), &k) in s.tmp.iter_mut().zip(x.iter()).zip(&s.k2) {
        *o = xi + h * half * k;
    }
    f(2, th, &s.tmp, &mut s.k3);
    check_finite(&s.k3, th)?;
    for ((o, &xi), &k) in s.tmp.iter_mut().zip(x.iter()).zip(&s.k3) {
        *o = xi + h * k;
    }
    f(3, t + h, &s.tmp, &mut s.k4);
    check_finite(&s.k4, t + h)?;

    let two = S::of(2.0);
    let sixth = h / S::of(6.0);
    for (i, xi) in x.iter_mut().enumerate() {
        *xi = *xi + sixth * (s.k1[i] + two * s.k2[i] + two * s.k3[i] + s.k4[i]);
    }
    Ok(())
}

/// Classical 4th-order Runge–Kutta update of `state` over `[t, t + h]` for
/// the field `f(t, x, dx)`.
pub fn rk4_step<S, F>(mut f: F, t: S, state: &[S], h: S) -> Result<Vec<S>>
where
    S: Scalar,
    F: FnMut(S, &[S], &mut [S]),
{
    if !(h > S::zero()) {
        return Err(Error::InvalidParameter {
            name: "step",
            value: h.as_f64(),
            reason: "must be > 0",
        });
    }
    let mut x = state.to_vec();
    let mut scratch = Scratch::new(x.len());
    rk4_in_place(&mut |_, t, x, dx| f(t, x, dx), t, &mut x, h, &mut scratch)?;
    Ok(x)
}

/// Integrates `f(t, x, dx)` over `grid` from `x0`.
pub fn integrate<S, F>(mut f: F, grid: &TimeGrid<S>, x0: &[S]) -> Result<Trajectory<S>>
where
    S: Scalar,
    F: FnMut(S, &[S], &mut [S]),
{
    integrate_driven(|t, x, _, dx| f(t, x, dx), grid, x0, &[])
}

/// Integrates a field driven by sampled inputs: `f(t, x, u, dx)` receives
/// the current value of each signal in `inputs`, interpolated inside each
/// step according to the signal's [`Interpolation`](crate::num::Interpolation).
pub fn integrate_driven<S, F>(
    mut f: F,
    grid: &TimeGrid<S>,
    x0: &[S],
    inputs: &[&Signal<S>],
) -> Result<Trajectory<S>>
where
    S: Scalar,
    F: FnMut(S, &[S], &[S], &mut [S]),
{
    if x0.is_empty() {
        return Err(Error::Dimension {
            what: "initial state",
            expected: 1,
            found: 0,
        });
    }
    for input in inputs {
        grid.require_same(input.grid())?;
    }
    let n = x0.len();
    let h = grid.step();
    let mut out = Vec::with_capacity(grid.len() * n);
    out.extend_from_slice(x0);
    let mut x = x0.to_vec();
    let mut scratch = Scratch::new(n);
    // Input values at fractions 0, 1/2, 1 of the current step.
    let mut stage_inputs = [
        vec![S::zero(); inputs.len()],
        vec![S::zero(); inputs.len()],
        vec![S::zero(); inputs.len()],
    ];
    let fracs = [S::zero(), S::of(0.5), S::one()];

    for k in 0..grid.len() - 1 {
        for (slot, &frac) in stage_inputs.iter_mut().zip(&fracs) {
            for (v, s) in slot.iter_mut().zip(inputs) {
                *v = s.value_in_step(k, frac);
            }
        }
        let t = grid.time(k);
        rk4_in_place(
            &mut |stage, ts, xs, dx| {
                let u = match stage {
                    0 => &stage_inputs[0],
                    3 => &stage_inputs[2],
                    _ => &stage_inputs[1],
                };
                f(ts, xs, u, dx)
            },
            t,
            &mut x,
            h,
            &mut scratch,
        )
        .map_err(|e| match e {
            Error::NonFinite { t, .. } => Error::NonFinite { t, sample: Some(k) },
            other => other,
        })?;
        out.extend_from_slice(&x);
    }
    Trajectory::new(*grid, n, out)
}
