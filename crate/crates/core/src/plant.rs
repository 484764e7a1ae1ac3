//! The single-output LTI plant `ẋ = Ax + Bu`, `y = Cᵀx + δ` and its
//! simulation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::{dot, integrate_driven, Interpolation, Matrix, Signal, TimeGrid, Trajectory};
use crate::scalar::Scalar;

/// Relative pivot tolerance used by [`observability_rank`].
pub const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct LtiPlant<S> {
    a: Matrix<S>,
    b: Vec<S>,
    c: Vec<S>,
    observability_rank: usize,
}

impl<S: Scalar> LtiPlant<S> {
    /// Checks dimensions and records the observability rank of `{A, C}`.
    pub fn new(a: Matrix<S>, b: Vec<S>, c: Vec<S>) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::NotSquare {
                rows: a.rows(),
                cols: a.cols(),
            });
        }
        let n = a.rows();
        for (what, v) in [("input vector B", &b), ("output vector C", &c)] {
            if v.len() != n {
                return Err(Error::Dimension {
                    what,
                    expected: n,
                    found: v.len(),
                });
            }
        }
        let observability_rank = rank(&observability_matrix(&a, &c));
        Ok(Self {
            a,
            b,
            c,
            observability_rank,
        })
    }

    pub fn order(&self) -> usize {
        self.a.rows()
    }

    pub fn a(&self) -> &Matrix<S> {
        &self.a
    }

    pub fn b(&self) -> &[S] {
        &self.b
    }

    pub fn c(&self) -> &[S] {
        &self.c
    }

    pub fn observability_rank(&self) -> usize {
        self.observability_rank
    }

    pub fn is_observable(&self) -> bool {
        self.observability_rank == self.order()
    }

    /// Errors unless `{A, C}` is observable; estimators call this first.
    pub fn require_observable(&self) -> Result<()> {
        if self.is_observable() {
            Ok(())
        } else {
            Err(Error::Unobservable {
                rank: self.observability_rank,
                n: self.order(),
            })
        }
    }

    /// `Cᵀx`
    pub fn output(&self, x: &[S]) -> S {
        dot(&self.c, x)
    }

    /// `Ax + Bu` written into `dx`.
    pub(crate) fn field(&self, x: &[S], u: S, dx: &mut [S]) {
        let n = self.order();
        for (r, d) in dx.iter_mut().enumerate().take(n) {
            *d = dot(self.a.row(r), x) + self.b[r] * u;
        }
    }
}

/// Rank of `[C, AᵀC, …, (Aᵀ)ⁿ⁻¹C]`.
pub fn observability_rank<S: Scalar>(plant: &LtiPlant<S>) -> usize {
    plant.observability_rank
}

/// Columns `C, AᵀC, …, (Aᵀ)ⁿ⁻¹C` as an n×n matrix.
fn observability_matrix<S: Scalar>(a: &Matrix<S>, c: &[S]) -> Matrix<S> {
    let n = a.rows();
    let at = a.transpose();
    let mut columns = Vec::with_capacity(n);
    let mut v = c.to_vec();
    for _ in 0..n {
        let next = at.mul_vec(&v).expect("square");
        columns.push(std::mem::replace(&mut v, next));
    }
    Matrix::from_fn(n, n, |r, col| columns[col][r])
}

/// Numerical rank by Gaussian elimination with partial pivoting; pivots
/// below `RANK_TOLERANCE · max|M|` count as zero.
fn rank<S: Scalar>(m: &Matrix<S>) -> usize {
    let scale = m.max_abs();
    if scale == S::zero() {
        return 0;
    }
    let tol = S::of(RANK_TOLERANCE) * scale;
    let (rows, cols) = (m.rows(), m.cols());
    let mut w: Vec<Vec<S>> = (0..rows).map(|r| m.row(r).to_vec()).collect();
    let mut rank = 0;
    for col in 0..cols {
        if rank == rows {
            break;
        }
        let pivot = (rank..rows)
            .max_by(|&i, &j| w[i][col].abs().partial_cmp(&w[j][col].abs()).unwrap())
            .unwrap();
        if w[pivot][col].abs() <= tol {
            continue;
        }
        w.swap(rank, pivot);
        let (top, rest) = w.split_at_mut(rank + 1);
        let pivot_row = &top[rank];
        for row in rest.iter_mut().take(rows - rank - 1) {
            let f = row[col] / pivot_row[col];
            for (v, &p) in row[col..cols].iter_mut().zip(&pivot_row[col..cols]) {
                *v = *v - f * p;
            }
        }
        rank += 1;
    }
    rank
}

/// Scalar signal recipe evaluated on a [`TimeGrid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SignalSpec {
    /// 1 for `t ≥ 0`, 0 before.
    UnitStep,
    /// `amplitude · sin(omega · t + phase)`
    Sinusoid {
        amplitude: f64,
        omega: f64,
        #[serde(default)]
        phase: f64,
    },
    Constant {
        value: f64,
    },
    Zero,
    /// Zero-mean Gaussian samples, held over each integration step.
    GaussianWhite {
        std: f64,
        seed: u64,
    },
    Samples {
        values: Vec<f64>,
    },
}

impl SignalSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SignalSpec::Sinusoid {
                amplitude,
                omega,
                phase,
            } => {
                if !(amplitude >= 0.0) || !amplitude.is_finite() {
                    return Err(Error::InvalidParameter {
                        name: "amplitude",
                        value: amplitude,
                        reason: "must be finite and >= 0",
                    });
                }
                if !omega.is_finite() || !phase.is_finite() {
                    return Err(Error::InvalidParameter {
                        name: "omega/phase",
                        value: if omega.is_finite() { phase } else { omega },
                        reason: "must be finite",
                    });
                }
            }
            SignalSpec::Constant { value } if !value.is_finite() => {
                return Err(Error::InvalidParameter {
                    name: "value",
                    value,
                    reason: "must be finite",
                });
            }
            SignalSpec::GaussianWhite { std, .. } if !(std >= 0.0) || !std.is_finite() => {
                return Err(Error::InvalidParameter {
                    name: "std",
                    value: std,
                    reason: "must be finite and >= 0",
                });
            }
            SignalSpec::Samples { ref values } => {
                if let Some(&v) = values.iter().find(|v| !v.is_finite()) {
                    return Err(Error::InvalidParameter {
                        name: "values",
                        value: v,
                        reason: "samples must be finite",
                    });
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Same waveform with its magnitude multiplied by `factor ≥ 0`.
    pub fn scaled(&self, factor: f64) -> Self {
        match self {
            SignalSpec::Sinusoid {
                amplitude,
                omega,
                phase,
            } => SignalSpec::Sinusoid {
                amplitude: amplitude * factor,
                omega: *omega,
                phase: *phase,
            },
            SignalSpec::Constant { value } => SignalSpec::Constant {
                value: value * factor,
            },
            SignalSpec::GaussianWhite { std, seed } => SignalSpec::GaussianWhite {
                std: std * factor,
                seed: *seed,
            },
            SignalSpec::Samples { values } => SignalSpec::Samples {
                values: values.iter().map(|v| v * factor).collect(),
            },
            SignalSpec::UnitStep if factor != 1.0 => SignalSpec::Constant { value: factor },
            other => other.clone(),
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            SignalSpec::GaussianWhite { seed, .. } => Some(*seed),
            _ => None,
        }
    }
}

/// Evaluates `spec` at every grid sample.
pub fn eval_signal<S: Scalar>(spec: &SignalSpec, grid: &TimeGrid<S>) -> Result<Signal<S>> {
    spec.validate()?;
    let signal = match *spec {
        SignalSpec::UnitStep => {
            Signal::from_fn(*grid, |t| if t >= S::zero() { S::one() } else { S::zero() })
        }
        SignalSpec::Sinusoid {
            amplitude,
            omega,
            phase,
        } => Signal::from_fn(*grid, |t| {
            S::of(amplitude * (omega * t.as_f64() + phase).sin())
        }),
        SignalSpec::Constant { value } => Signal::constant(*grid, S::of(value)),
        SignalSpec::Zero => Signal::zeros(*grid),
        SignalSpec::GaussianWhite { std, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let normal = Normal::new(0.0, std).map_err(|_| Error::InvalidParameter {
                name: "std",
                value: std,
                reason: "must be finite and >= 0",
            })?;
            let values = (0..grid.len())
                .map(|_| S::of(normal.sample(&mut rng)))
                .collect();
            Signal::new(*grid, values)?.with_interpolation(Interpolation::Hold)
        }
        SignalSpec::Samples { ref values } => {
            Signal::new(*grid, values.iter().map(|&v| S::of(v)).collect())?
        }
    };
    Ok(signal)
}

/// One simulated experiment: the true state and what the sensor reports.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantRun<S> {
    pub x: Trajectory<S>,
    /// `y[k] = Cᵀx[k] + delta[k]`
    pub y: Signal<S>,
    pub u: Signal<S>,
    pub delta: Signal<S>,
    /// Copied from the plant; simulation does not require observability.
    pub observable: bool,
}

impl<S: Scalar> PlantRun<S> {
    pub fn grid(&self) -> &TimeGrid<S> {
        self.x.grid()
    }
}

pub fn simulate_plant<S: Scalar>(
    plant: &LtiPlant<S>,
    x0: &[S],
    u: &SignalSpec,
    delta: &SignalSpec,
    grid: &TimeGrid<S>,
) -> Result<PlantRun<S>> {
    let u = eval_signal(u, grid)?;
    let delta = eval_signal(delta, grid)?;
    simulate_plant_with(plant, x0, u, delta)
}

/// Like [`simulate_plant`] with pre-sampled input and disturbance.
pub fn simulate_plant_with<S: Scalar>(
    plant: &LtiPlant<S>,
    x0: &[S],
    u: Signal<S>,
    delta: Signal<S>,
) -> Result<PlantRun<S>> {
    if x0.len() != plant.order() {
        return Err(Error::Dimension {
            what: "initial state x0",
            expected: plant.order(),
            found: x0.len(),
        });
    }
    u.grid().require_same(delta.grid())?;
    let grid = *u.grid();
    let x = integrate_driven(|_, x, u, dx| plant.field(x, u[0], dx), &grid, x0, &[&u])?;
    let clean = Signal::new(grid, x.samples().map(|s| plant.output(s)).collect())?
        .with_interpolation(Interpolation::Cubic);
    let y = clean.add(&delta)?;
    Ok(PlantRun {
        x,
        y,
        u,
        delta,
        observable: plant.is_observable(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    pub(crate) fn oscillator_plant() -> LtiPlant<f64> {
        LtiPlant::new(
            Matrix::from_rows(&[vec![0.0, 1.0], vec![-9.0, 0.0]]).unwrap(),
            vec![0.0, 1.0],
            vec![5.0, 0.0],
        )
        .unwrap()
    }

    fn grid(t_end: f64) -> TimeGrid<f64> {
        TimeGrid::spanning(0.0, t_end, 1e-3).unwrap()
    }

    #[test]
    fn unit_step_is_one_from_zero() {
        let s = eval_signal(&SignalSpec::UnitStep, &grid(1.0)).unwrap();
        assert!(s.values().iter().all(|&v| v == 1.0));
        let early = TimeGrid::new(-0.5, 0.25, 5).unwrap();
        let s = eval_signal(&SignalSpec::UnitStep, &early).unwrap();
        assert_eq!(s.values(), &[0.0, 0.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn sinusoid_peak() {
        let g = TimeGrid::new(FRAC_PI_2, 1.0, 1).unwrap();
        let spec = SignalSpec::Sinusoid {
            amplitude: 0.3,
            omega: 1.0,
            phase: 0.0,
        };
        assert!((eval_signal(&spec, &g).unwrap().get(0) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn white_noise_is_seeded() {
        let spec = SignalSpec::GaussianWhite { std: 0.1, seed: 42 };
        let a = eval_signal(&spec, &grid(1.0)).unwrap();
        let b = eval_signal(&spec, &grid(1.0)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.interpolation(), Interpolation::Hold);
        let other = eval_signal(
            &SignalSpec::GaussianWhite { std: 0.1, seed: 43 },
            &grid(1.0),
        );
        assert_ne!(a, other.unwrap());
        let sd = a.rms();
        assert!((sd - 0.1).abs() < 0.01, "sample std {sd}");
    }

    #[test]
    fn invalid_specs_rejected() {
        let g = grid(1.0);
        let bad = SignalSpec::Sinusoid {
            amplitude: -1.0,
            omega: 1.0,
            phase: 0.0,
        };
        assert!(eval_signal::<f64>(&bad, &g).is_err());
        let short = SignalSpec::Samples {
            values: vec![0.0; 3],
        };
        assert!(eval_signal::<f64>(&short, &g).is_err());
    }

    #[test]
    fn oscillator_plant_closed_form() {
        let plant = oscillator_plant();
        let g = grid(10.0);
        let run = simulate_plant(
            &plant,
            &[1.0, 2.0],
            &SignalSpec::UnitStep,
            &SignalSpec::Zero,
            &g,
        )
        .unwrap();
        assert_eq!(run.y.get(0), 5.0);
        for (k, t) in g.times().enumerate() {
            let exact = 1.0 / 9.0 + 8.0 / 9.0 * (3.0 * t).cos() + 2.0 / 3.0 * (3.0 * t).sin();
            assert!((run.x.sample(k)[0] - exact).abs() < 1e-9, "t = {t}");
        }
    }

    #[test]
    fn static_plant_holds_state() {
        let plant = LtiPlant::new(Matrix::zeros(2, 2), vec![0.0, 0.0], vec![1.0, -2.0]).unwrap();
        let run = simulate_plant(
            &plant,
            &[0.5, 0.25],
            &SignalSpec::UnitStep,
            &SignalSpec::Zero,
            &grid(2.0),
        )
        .unwrap();
        assert!(run.x.samples().all(|x| x == [0.5, 0.25]));
        assert!(run.y.values().iter().all(|&y| y == 0.0));
        assert!(!run.observable);
    }

    #[test]
    fn output_minus_clean_output_is_disturbance() {
        let plant = oscillator_plant();
        let spec = SignalSpec::Sinusoid {
            amplitude: 0.3,
            omega: 1.0,
            phase: 0.0,
        };
        let run = simulate_plant(
            &plant,
            &[1.0, 2.0],
            &SignalSpec::UnitStep,
            &spec,
            &grid(20.0),
        )
        .unwrap();
        for (k, t) in run.grid().times().enumerate() {
            let residual = run.y.get(k) - plant.output(run.x.sample(k));
            assert!((residual - 0.3 * t.sin()).abs() <= 1e-15);
        }
    }

    #[test]
    fn observability_ranks() {
        assert_eq!(observability_rank(&oscillator_plant()), 2);
        let a = Matrix::from_rows(&[vec![0.0, 1.0], vec![-9.0, 0.0]]).unwrap();
        let blind = LtiPlant::new(a.clone(), vec![0.0, 1.0], vec![0.0, 0.0]).unwrap();
        assert_eq!(blind.observability_rank(), 0);
        assert!(blind.require_observable().is_err());
        let scalar = LtiPlant::new(
            Matrix::from_rows(&[vec![-1.0]]).unwrap(),
            vec![1.0],
            vec![2.0],
        )
        .unwrap();
        assert_eq!(scalar.observability_rank(), 1);
        // Diagonal A with C hitting one mode only.
        let diag = Matrix::from_rows(&[vec![-1.0, 0.0], vec![0.0, -2.0]]).unwrap();
        let partial = LtiPlant::new(diag, vec![1.0, 1.0], vec![1.0, 0.0]).unwrap();
        assert_eq!(partial.observability_rank(), 1);
    }

    #[test]
    fn dimension_checks() {
        let a = Matrix::from_rows(&[vec![0.0, 1.0], vec![-9.0, 0.0]]).unwrap();
        assert!(LtiPlant::new(a.clone(), vec![0.0], vec![1.0, 0.0]).is_err());
        assert!(LtiPlant::new(a, vec![0.0, 1.0], vec![1.0]).is_err());
        let plant = oscillator_plant();
        assert!(simulate_plant(
            &plant,
            &[1.0],
            &SignalSpec::UnitStep,
            &SignalSpec::Zero,
            &grid(1.0)
        )
        .is_err());
    }

    #[test]
    fn scaled_spec() {
        let s = SignalSpec::Sinusoid {
            amplitude: 0.3,
            omega: 1.0,
            phase: 0.0,
        };
        assert_eq!(
            s.scaled(0.5),
            SignalSpec::Sinusoid {
                amplitude: 0.15,
                omega: 1.0,
                phase: 0.0
            }
        );
        assert_eq!(SignalSpec::Zero.scaled(3.0), SignalSpec::Zero);
    }
}
