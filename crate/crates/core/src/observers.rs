//! Full-order Luenberger observer and the parameter-estimation-based
//! reparametrization `x = ξ + Φθ` with `θ = x(0) − ξ(0)`.

use crate::error::{Error, Result};
use crate::num::{dot, integrate, integrate_driven, Matrix, Signal, TimeGrid, Trajectory};
use crate::plant::LtiPlant;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct LuenbergerConfig<S> {
    pub gain: Vec<S>,
    pub xhat0: Vec<S>,
}

/// Spectrum summary of the error dynamics `A − LCᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoopReport {
    /// Real parts of the eigenvalues of `A − LCᵀ`, ascending.
    pub real_parts: Vec<f64>,
    pub hurwitz: bool,
}

impl ClosedLoopReport {
    pub fn slowest_rate(&self) -> f64 {
        self.real_parts
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// `A − LCᵀ`
pub fn error_dynamics<S: Scalar>(plant: &LtiPlant<S>, gain: &[S]) -> Result<Matrix<S>> {
    let n = plant.order();
    if gain.len() != n {
        return Err(Error::Dimension {
            what: "Luenberger gain L",
            expected: n,
            found: gain.len(),
        });
    }
    let c = plant.c();
    Ok(Matrix::from_fn(n, n, |r, col| {
        *plant.a().get(r, col) - gain[r] * c[col]
    }))
}

/// Eigenvalue real parts of `A − LCᵀ`. A non-Hurwitz loop is reported,
/// not rejected.
pub fn closed_loop_report<S: Scalar>(plant: &LtiPlant<S>, gain: &[S]) -> Result<ClosedLoopReport> {
    let f = error_dynamics(plant, gain)?;
    let n = f.rows();
    let data: Vec<f64> = f.as_slice().iter().map(|v| v.as_f64()).collect();
    let eig = nalgebra::DMatrix::from_row_slice(n, n, &data).complex_eigenvalues();
    let mut real_parts: Vec<f64> = eig.iter().map(|z| z.re).collect();
    real_parts.sort_by(f64::total_cmp);
    let hurwitz = real_parts.iter().all(|&re| re < 0.0);
    Ok(ClosedLoopReport {
        real_parts,
        hurwitz,
    })
}

/// Integrates `x̂̇ = Ax̂ + Bu + L(y − Cᵀx̂)` driven by the measured output.
pub fn luenberger_observe<S: Scalar>(
    plant: &LtiPlant<S>,
    cfg: &LuenbergerConfig<S>,
    y: &Signal<S>,
    u: &Signal<S>,
) -> Result<Trajectory<S>> {
    plant.require_observable()?;
    let n = plant.order();
    for (what, v) in [
        ("Luenberger gain L", &cfg.gain),
        ("initial estimate", &cfg.xhat0),
    ] {
        if v.len() != n {
            return Err(Error::Dimension {
                what,
                expected: n,
                found: v.len(),
            });
        }
    }
    if y.grid() != u.grid() {
        return Err(Error::GridMismatch);
    }
    integrate_driven(
        |_, xh, inputs, dx| {
            let (u, y) = (inputs[0], inputs[1]);
            let innovation = y - plant.output(xh);
            plant.field(xh, u, dx);
            for (d, &l) in dx.iter_mut().zip(&cfg.gain) {
                *d = *d + l * innovation;
            }
        },
        u.grid(),
        &cfg.xhat0,
        &[u, y],
    )
}

/// Copy system `ξ` and fundamental matrix `Φ` (with `Φ(0) = I`) on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GpeboState<S> {
    pub xi: Trajectory<S>,
    /// `Φ(t_k)` for every sample.
    pub phi_fund: Vec<Matrix<S>>,
    /// `x(0) − ξ(0)`, known only in simulation and never read by estimators.
    pub theta_true_hint: Option<Vec<S>>,
}

impl<S: Scalar> GpeboState<S> {
    pub fn grid(&self) -> &TimeGrid<S> {
        self.xi.grid()
    }

    pub fn order(&self) -> usize {
        self.xi.dim()
    }

    pub fn with_theta_hint(mut self, theta: Vec<S>) -> Self {
        self.theta_true_hint = Some(theta);
        self
    }
}

/// Integrates `ξ̇ = Aξ + Bu` and `Φ̇ = AΦ` column by column from the identity.
pub fn gpebo_propagate<S: Scalar>(
    plant: &LtiPlant<S>,
    u: &Signal<S>,
    xi0: &[S],
) -> Result<GpeboState<S>> {
    let n = plant.order();
    if xi0.len() != n {
        return Err(Error::Dimension {
            what: "copy-system initial state xi0",
            expected: n,
            found: xi0.len(),
        });
    }
    let grid = *u.grid();
    let xi = integrate_driven(|_, x, u, dx| plant.field(x, u[0], dx), &grid, xi0, &[u])?;
    let columns = (0..n)
        .map(|j| {
            let e_j: Vec<S> = (0..n)
                .map(|i| if i == j { S::one() } else { S::zero() })
                .collect();
            integrate(|_, x, dx| plant.field(x, S::zero(), dx), &grid, &e_j)
        })
        .collect::<Result<Vec<_>>>()?;
    let phi_fund = (0..grid.len())
        .map(|k| Matrix::from_fn(n, n, |r, c| columns[c].sample(k)[r]))
        .collect();
    Ok(GpeboState {
        xi,
        phi_fund,
        theta_true_hint: None,
    })
}

/// `x̂[k] = ξ[k] + Φ[k]·θ̂[k]`
pub fn gpebo_reconstruct<S: Scalar>(
    gpebo: &GpeboState<S>,
    theta_hat: &Trajectory<S>,
) -> Result<Trajectory<S>> {
    if theta_hat.grid() != gpebo.grid() {
        return Err(Error::GridMismatch);
    }
    let n = gpebo.order();
    if theta_hat.dim() != n {
        return Err(Error::Dimension {
            what: "parameter estimate",
            expected: n,
            found: theta_hat.dim(),
        });
    }
    Ok(Trajectory::from_fn(*gpebo.grid(), n, |k, out| {
        let phi = &gpebo.phi_fund[k];
        let xi = gpebo.xi.sample(k);
        let th = theta_hat.sample(k);
        for (r, o) in out.iter_mut().enumerate() {
            *o = xi[r] + dot(phi.row(r), th);
        }
    }))
}

/// Initial-condition estimate implied by an arbitrary state estimate:
/// `θ̂[k] = Φ[k]⁻¹(x̂[k] − ξ[k])`, with `Φ⁻¹ = adj Φ / det Φ`.
pub fn implied_theta<S: Scalar>(
    gpebo: &GpeboState<S>,
    xhat: &Trajectory<S>,
) -> Result<Trajectory<S>> {
    let diff = xhat.sub(&gpebo.xi)?;
    let n = gpebo.order();
    let mut out = Vec::with_capacity(diff.len() * n);
    for (k, d) in diff.samples().enumerate() {
        let phi = &gpebo.phi_fund[k];
        let det = phi.det()?;
        let v = phi.adjugate()?.mul_vec(d)?;
        out.extend(v.into_iter().map(|x| x / det));
    }
    Trajectory::new(*gpebo.grid(), n, out)
}

#[cfg(test)]
#[allow(clippy::needless_range_loop)]
mod tests {
    use super::*;
    use crate::plant::{simulate_plant, SignalSpec};
    use num_complex::Complex64;
    use std::f64::consts::PI;

    fn oscillator_plant() -> LtiPlant<f64> {
        LtiPlant::new(
            Matrix::from_rows(&[vec![0.0, 1.0], vec![-9.0, 0.0]]).unwrap(),
            vec![0.0, 1.0],
            vec![5.0, 0.0],
        )
        .unwrap()
    }

    fn sine(amplitude: f64) -> SignalSpec {
        SignalSpec::Sinusoid {
            amplitude,
            omega: 1.0,
            phase: 0.0,
        }
    }

    fn exact_phi(t: f64) -> [[f64; 2]; 2] {
        let (s, c) = (3.0 * t).sin_cos();
        [[c, s / 3.0], [-3.0 * s, c]]
    }

    #[test]
    fn oscillator_gain_is_hurwitz() {
        let r = closed_loop_report(&oscillator_plant(), &[2.0, 3.2]).unwrap();
        assert!(r.hurwitz);
        // (s + 5)², a double pole at −5.
        for re in &r.real_parts {
            assert!((re + 5.0).abs() < 1e-6, "{re}");
        }
        let unstable = closed_loop_report(&oscillator_plant(), &[-1.0, 0.0]).unwrap();
        assert!(!unstable.hurwitz);
    }

    #[test]
    fn luenberger_equilibrium() {
        let plant = oscillator_plant();
        let grid = TimeGrid::spanning(0.0, 60.0, 1e-3).unwrap();
        let run = simulate_plant(
            &plant,
            &[1.0, 2.0],
            &SignalSpec::UnitStep,
            &SignalSpec::Zero,
            &grid,
        )
        .unwrap();
        let cfg = LuenbergerConfig {
            gain: vec![2.0, 3.2],
            xhat0: vec![1.0, 2.0],
        };
        let xh = luenberger_observe(&plant, &cfg, &run.y, &run.u).unwrap();
        let err = run.x.sub(&xh).unwrap().max_abs();
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn luenberger_converges_without_noise() {
        let plant = oscillator_plant();
        let grid = TimeGrid::spanning(0.0, 10.0, 1e-3).unwrap();
        let run = simulate_plant(
            &plant,
            &[1.0, 2.0],
            &SignalSpec::UnitStep,
            &SignalSpec::Zero,
            &grid,
        )
        .unwrap();
        let cfg = LuenbergerConfig {
            gain: vec![2.0, 3.2],
            xhat0: vec![0.0, 0.0],
        };
        let xh = luenberger_observe(&plant, &cfg, &run.y, &run.u).unwrap();
        let e = run.x.sub(&xh).unwrap();
        let norm = |k: usize| e.sample(k).iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(norm(0) > 2.0);
        // Double pole at −5: error ~ (a + bt)e^{−5t}.
        assert!(norm(5000) < 1e-7, "{}", norm(5000));
        assert!(norm(grid.len() - 1) < 1e-9);
    }

    /// Steady error `e = (jωI − F)⁻¹(−L)·a` for `ė = Fe − Lδ`, `δ = a sin ωt`.
    fn steady_amplitudes(f: &Matrix<f64>, l: &[f64], amplitude: f64, omega: f64) -> [f64; 2] {
        let jw = Complex64::new(0.0, omega);
        let m = [
            [jw - f.get(0, 0), Complex64::from(-f.get(0, 1))],
            [Complex64::from(-f.get(1, 0)), jw - f.get(1, 1)],
        ];
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        let rhs = [Complex64::from(-l[0]), Complex64::from(-l[1])];
        let e0 = (m[1][1] * rhs[0] - m[0][1] * rhs[1]) / det;
        let e1 = (m[0][0] * rhs[1] - m[1][0] * rhs[0]) / det;
        [e0.norm() * amplitude, e1.norm() * amplitude]
    }

    #[test]
    fn luenberger_noise_floor_matches_frequency_response() {
        let plant = oscillator_plant();
        let grid = TimeGrid::spanning(0.0, 60.0, 1e-3).unwrap();
        let run = simulate_plant(
            &plant,
            &[1.0, 2.0],
            &SignalSpec::UnitStep,
            &sine(0.3),
            &grid,
        )
        .unwrap();
        let gain = vec![2.0, 3.2];
        let cfg = LuenbergerConfig {
            gain: gain.clone(),
            xhat0: vec![0.0, 0.0],
        };
        let xh = luenberger_observe(&plant, &cfg, &run.y, &run.u).unwrap();
        let e = run.x.sub(&xh).unwrap();
        let expected = steady_amplitudes(&error_dynamics(&plant, &gain).unwrap(), &gain, 0.3, 1.0);
        // Peak over the last 4π seconds (two full periods).
        let start = grid.len() - 1 - (4.0 * PI / 1e-3) as usize;
        for i in 0..2 {
            let peak = (start..grid.len())
                .map(|k| e.sample(k)[i].abs())
                .fold(0.0, f64::max);
            assert!(peak > 0.0);
            assert!(
                (peak - expected[i]).abs() < 1e-4 * expected[i].max(1.0),
                "{peak} vs {}",
                expected[i]
            );
        }
    }

    #[test]
    fn luenberger_rejects_mismatches() {
        let plant = oscillator_plant();
        let grid = TimeGrid::spanning(0.0, 1.0, 1e-3).unwrap();
        let y = Signal::zeros(grid);
        let u = Signal::zeros(TimeGrid::spanning(0.0, 2.0, 1e-3).unwrap());
        let cfg = LuenbergerConfig {
            gain: vec![2.0, 3.2],
            xhat0: vec![0.0, 0.0],
        };
        assert!(matches!(
            luenberger_observe(&plant, &cfg, &y, &u),
            Err(Error::GridMismatch)
        ));
        let short = LuenbergerConfig {
            gain: vec![2.0],
            xhat0: vec![0.0, 0.0],
        };
        assert!(luenberger_observe(&plant, &short, &y, &y).is_err());
        let blind = LtiPlant::new(plant.a().clone(), vec![0.0, 1.0], vec![0.0, 0.0]).unwrap();
        assert!(matches!(
            luenberger_observe(&blind, &cfg, &y, &y),
            Err(Error::Unobservable { .. })
        ));
    }

    #[test]
    fn fundamental_matrix_closed_form() {
        let plant = oscillator_plant();
        let grid = TimeGrid::spanning(0.0, 60.0, 1e-3).unwrap();
        let u = Signal::constant(grid, 1.0);
        let g = gpebo_propagate(&plant, &u, &[0.0, 0.0]).unwrap();
        assert_eq!(g.phi_fund[0], Matrix::identity(2));
        let mut worst = 0.0f64;
        let mut worst_det = 0.0f64;
        for (k, t) in grid.times().enumerate() {
            let ex = exact_phi(t);
            let phi = &g.phi_fund[k];
            for r in 0..2 {
                for c in 0..2 {
                    worst = worst.max((phi.get(r, c) - ex[r][c]).abs());
                }
            }
            worst_det = worst_det.max((phi.det().unwrap() - 1.0).abs());
        }
        assert!(worst < 1e-6, "{worst}");
        assert!(worst_det < 1e-6, "{worst_det}");
    }

    #[test]
    fn fundamental_matrix_at_pi_over_six() {
        let plant = oscillator_plant();
        // π/6 is not a multiple of 1e-3; pick a step that divides it.
        let h = PI / 6.0 / 600.0;
        let grid = TimeGrid::new(0.0, h, 601).unwrap();
        let g = gpebo_propagate(&plant, &Signal::zeros(grid), &[0.0, 0.0]).unwrap();
        let phi = &g.phi_fund[600];
        let expected = [[0.0, 1.0 / 3.0], [-3.0, 0.0]];
        for r in 0..2 {
            for c in 0..2 {
                assert!((phi.get(r, c) - expected[r][c]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn liouville_for_non_zero_trace() {
        let plant = LtiPlant::new(
            Matrix::from_rows(&[vec![-0.5, 2.0], vec![-1.0, -0.3]]).unwrap(),
            vec![1.0, 0.0],
            vec![1.0, 0.0],
        )
        .unwrap();
        let grid = TimeGrid::spanning(0.0, 5.0, 1e-3).unwrap();
        let g = gpebo_propagate(&plant, &Signal::zeros(grid), &[0.0, 0.0]).unwrap();
        for (k, t) in grid.times().enumerate().step_by(250) {
            let expected = (-0.8f64 * t).exp();
            assert!((g.phi_fund[k].det().unwrap() - expected).abs() < 1e-6);
        }
    }

    #[test]
    fn columnwise_matches_full_matrix_equation() {
        let plant = oscillator_plant();
        let grid = TimeGrid::spanning(0.0, 10.0, 1e-3).unwrap();
        let g = gpebo_propagate(&plant, &Signal::zeros(grid), &[0.0, 0.0]).unwrap();
        // Φ̇ = AΦ as one 4-dimensional system, row-major.
        let a = plant.a().clone();
        let full = integrate(
            |_, p: &[f64], dp: &mut [f64]| {
                let phi = Matrix::from_row_major(2, 2, p.to_vec()).unwrap();
                dp.copy_from_slice(a.mul_mat(&phi).unwrap().as_slice());
            },
            &grid,
            &[1.0, 0.0, 0.0, 1.0],
        )
        .unwrap();
        for k in 0..grid.len() {
            let diff = full
                .sample(k)
                .iter()
                .zip(g.phi_fund[k].as_slice())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(diff < 1e-12, "sample {k}: {diff}");
        }
    }

    #[test]
    fn reconstruction_with_true_theta() {
        let plant = oscillator_plant();
        let grid = TimeGrid::spanning(0.0, 60.0, 1e-3).unwrap();
        for amp in [0.0, 0.3] {
            let run = simulate_plant(
                &plant,
                &[1.0, 2.0],
                &SignalSpec::UnitStep,
                &sine(amp),
                &grid,
            )
            .unwrap();
            let g = gpebo_propagate(&plant, &run.u, &[0.0, 0.0]).unwrap();
            let theta = Trajectory::from_fn(grid, 2, |_, o| o.copy_from_slice(&[1.0, 2.0]));
            let xh = gpebo_reconstruct(&g, &theta).unwrap();
            let err = run.x.sub(&xh).unwrap().max_abs();
            assert!(err < 1e-6, "{err}");
        }
    }

    #[test]
    fn reconstruction_linear_in_theta() {
        let plant = oscillator_plant();
        let grid = TimeGrid::spanning(0.0, 20.0, 1e-3).unwrap();
        let u = Signal::constant(grid, 1.0);
        let g = gpebo_propagate(&plant, &u, &[0.0, 0.0]).unwrap();
        let zero = Trajectory::from_fn(grid, 2, |_, o| o.fill(0.0));
        assert_eq!(gpebo_reconstruct(&g, &zero).unwrap(), g.xi);

        let offset = [0.1, -0.2];
        let base = Trajectory::from_fn(grid, 2, |_, o| o.copy_from_slice(&[1.0, 2.0]));
        let shifted = Trajectory::from_fn(grid, 2, |_, o| {
            o.copy_from_slice(&[1.0 + offset[0], 2.0 + offset[1]])
        });
        let d = gpebo_reconstruct(&g, &base)
            .unwrap()
            .sub(&gpebo_reconstruct(&g, &shifted).unwrap())
            .unwrap();
        for k in 0..grid.len() {
            let expected = g.phi_fund[k].mul_vec(&offset).unwrap();
            for i in 0..2 {
                assert!((d.sample(k)[i] + expected[i]).abs() < 1e-12);
            }
        }
        // ‖Φ‖ is bounded for the oscillator, so the offset error stays bounded.
        assert!(d.max_abs() <= 3.0 * 0.2 + 0.1 + 1e-9);
    }

    #[test]
    fn reconstruct_rejects_grid_mismatch() {
        let plant = oscillator_plant();
        let grid = TimeGrid::spanning(0.0, 1.0, 1e-3).unwrap();
        let g = gpebo_propagate(&plant, &Signal::zeros(grid), &[0.0, 0.0]).unwrap();
        let other = TimeGrid::spanning(0.0, 1.0, 2e-3).unwrap();
        let theta = Trajectory::from_fn(other, 2, |_, o| o.fill(0.0));
        assert!(matches!(
            gpebo_reconstruct(&g, &theta),
            Err(Error::GridMismatch)
        ));
    }

    #[test]
    fn implied_theta_inverts_reconstruction() {
        let plant = oscillator_plant();
        let grid = TimeGrid::spanning(0.0, 5.0, 1e-3).unwrap();
        let g = gpebo_propagate(&plant, &Signal::constant(grid, 1.0), &[0.0, 0.0]).unwrap();
        let theta = Trajectory::from_fn(grid, 2, |k, o| {
            let t = grid.time(k);
            o.copy_from_slice(&[t.cos(), 2.0 - t])
        });
        let xh = gpebo_reconstruct(&g, &theta).unwrap();
        let back = implied_theta(&g, &xh).unwrap();
        assert!(back.sub(&theta).unwrap().max_abs() < 1e-12);
    }
}
