use std::thread;

use serde::Serialize;

use super::scenario::Scenario;
use crate::error::{Error, Result};
use crate::num::{Signal, TimeGrid, Trajectory};
use crate::observers::{
    closed_loop_report, gpebo_propagate, gpebo_reconstruct, implied_theta, luenberger_observe,
    GpeboState, LuenbergerConfig,
};
use crate::plant::{simulate_plant, LtiPlant, PlantRun};
use crate::regression::{
    build_regression, drem_extend, drem_mix, gradient_estimate, mixed_disturbance,
    Assumption2Report, ExtendedRegression, GradientEstimate, LinearRegression, MixedRegression,
};
use crate::robust::{
    build_cubic_regression, estimate_theta_cubic, exp_transform, smooth_channel, CubicRegression,
    ThetaEstimate,
};

/// Fraction of the horizon treated as steady state.
pub const TAIL_FRACTION: f64 = 0.2;

pub const SCHEME_NAMES: [&str; 3] = ["Luenberger", "GPEBO + DREM gradient", "GPEBO + cubic DREM"];

/// Shared front half of the pipeline: plant, GPEBO and the mixed regression.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub plant: LtiPlant<f64>,
    pub run: PlantRun<f64>,
    pub gpebo: GpeboState<f64>,
    pub regression: LinearRegression<f64>,
    pub extended: ExtendedRegression<f64>,
    /// Mixed regression with the simulation-side disturbance attached.
    pub mixed: MixedRegression<f64>,
}

pub fn prepare(s: &Scenario) -> Result<Prepared> {
    s.validate()?;
    let grid = s.time_grid()?;
    let plant = s.build_plant().map_err(|e| e.in_stage("plant"))?;
    let run = simulate_plant(&plant, &s.plant.x0, &s.input, &s.disturbance, &grid)
        .map_err(|e| e.in_stage("plant"))?;
    let gpebo = gpebo_propagate(&plant, &run.u, &s.gpebo.xi0)
        .map_err(|e| e.in_stage("gpebo"))?
        .with_theta_hint(s.theta_true());
    let (regression, extended, mixed) = (|| {
        let reg = build_regression(&run, &gpebo, plant.c())?;
        let ext = drem_extend(&reg, &s.drem_filters()?)?;
        let d1 = mixed_disturbance(&ext, &run.delta)?;
        let mixed = drem_mix(&ext)?.with_disturbance(d1)?;
        Ok((reg, ext, mixed))
    })()
    .map_err(|e: Error| e.in_stage("drem"))?;
    Ok(Prepared {
        plant,
        run,
        gpebo,
        regression,
        extended,
        mixed,
    })
}

/// Smoothed, exponentiated cubic regression for every mixed channel.
pub fn cubic_regressions(s: &Scenario, p: &Prepared) -> Result<Vec<CubicRegression<f64>>> {
    (0..p.mixed.channels())
        .map(|i| {
            let ch = smooth_channel(&p.mixed, i, s.cubic.smoothing_pole)?;
            let (g, g_dot) = exp_transform(&ch)?;
            build_cubic_regression(&ch, &g, &g_dot)
        })
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.in_stage("cubic"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeResult {
    pub name: &'static str,
    pub theta_hat: Trajectory<f64>,
    pub xhat: Trajectory<f64>,
    /// `x − x̂`.
    pub error: Trajectory<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchemeMetrics {
    pub name: &'static str,
    /// `|eᵢ(T)|`.
    pub terminal_state_error: Vec<f64>,
    /// `max |eᵢ|` over the steady-state window.
    pub eps_max: Vec<f64>,
    /// Mean `|eᵢ|` over the steady-state window.
    pub eps_mean: Vec<f64>,
    /// `|θ̂ᵢ(T) − θᵢ|`.
    pub terminal_theta_error: Vec<f64>,
    /// Mean `|θ̂ᵢ − θᵢ|` over the steady-state window.
    pub tail_theta_error: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    pub schemes: Vec<SchemeMetrics>,
    pub tail_start_time: f64,
    pub luenberger_hurwitz: bool,
    pub luenberger_real_parts: Vec<f64>,
    /// `∫φ̄² dt` of the mixed baseline regressor.
    pub excitation: f64,
    pub assumption2: Assumption2Report,
    pub baseline_max_substeps: usize,
    pub cubic_max_substeps: usize,
    pub cubic_capped_steps: usize,
    /// Per channel `max |det|` of the mixed cubic regressor.
    pub cubic_mixed_regressor_max: Vec<f64>,
    /// Per channel `|Θ̂₂ − Θ̂₁²|` at the final sample.
    pub cubic_consistency_terminal: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub config_hash: String,
    pub t0: f64,
    pub step: f64,
    pub samples: usize,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub grid: TimeGrid<f64>,
    pub x: Trajectory<f64>,
    pub theta_true: Vec<f64>,
    pub schemes: Vec<SchemeResult>,
    pub metrics: Metrics,
    pub provenance: Provenance,
}

impl ExperimentResult {
    pub fn order(&self) -> usize {
        self.x.dim()
    }

    pub(crate) fn require_nonempty(&self) -> Result<()> {
        if self.schemes.is_empty() || self.grid.len() < 2 {
            return Err(Error::EmptyResult("experiment result has no scheme data"));
        }
        Ok(())
    }
}

fn run_parallel<T: Send>(jobs: Vec<Box<dyn FnOnce() -> Result<T> + Send + '_>>) -> Result<Vec<T>> {
    thread::scope(|scope| {
        let handles: Vec<_> = jobs.into_iter().map(|job| scope.spawn(job)).collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("estimator worker panicked"))
            .collect()
    })
}

/// Runs the three schemes on one scenario and assembles metrics.
pub fn run_scenario(s: &Scenario) -> Result<ExperimentResult> {
    let p = prepare(s)?;
    let grid = *p.run.grid();
    let n = p.plant.order();

    let luenberger_cfg = LuenbergerConfig {
        gain: s.luenberger.gain.clone(),
        xhat0: s.luenberger.xhat0.clone(),
    };
    let (xhat1, theta1, closed_loop) = (|| {
        let xhat = luenberger_observe(&p.plant, &luenberger_cfg, &p.run.y, &p.run.u)?;
        let theta = implied_theta(&p.gpebo, &xhat)?;
        Ok((
            xhat,
            theta,
            closed_loop_report(&p.plant, &s.luenberger.gain)?,
        ))
    })()
    .map_err(|e: Error| e.in_stage("luenberger"))?;

    let phi = &p.mixed.phi_bar;
    let baseline: Vec<GradientEstimate<f64>> = run_parallel(
        p.mixed
            .m_bar
            .iter()
            .zip(&s.baseline.theta0)
            .map(|(m, &th0)| {
                Box::new(move || gradient_estimate(m, phi, s.baseline.gamma, th0))
                    as Box<dyn FnOnce() -> _ + Send>
            })
            .collect(),
    )
    .map_err(|e| e.in_stage("baseline"))?;
    let theta2 =
        Trajectory::from_components(&baseline.iter().map(|b| b.theta.clone()).collect::<Vec<_>>())?;
    let xhat2 = gpebo_reconstruct(&p.gpebo, &theta2).map_err(|e| e.in_stage("baseline"))?;

    let regressions = cubic_regressions(s, &p)?;
    let filters = s.cubic_filters()?;
    let cubic: Vec<ThetaEstimate<f64>> = run_parallel(
        regressions
            .iter()
            .zip(&s.cubic.gamma)
            .map(|(cr, &gamma)| {
                let filters = &filters;
                Box::new(move || estimate_theta_cubic(cr, filters, gamma))
                    as Box<dyn FnOnce() -> _ + Send>
            })
            .collect(),
    )
    .map_err(|e| e.in_stage("cubic"))?;
    let theta3 =
        Trajectory::from_components(&cubic.iter().map(|c| c.theta.clone()).collect::<Vec<_>>())?;
    let xhat3 = gpebo_reconstruct(&p.gpebo, &theta3).map_err(|e| e.in_stage("cubic"))?;

    let schemes = [(theta1, xhat1), (theta2, xhat2), (theta3, xhat3)]
        .into_iter()
        .zip(SCHEME_NAMES)
        .map(|((theta_hat, xhat), name)| {
            let error = p.run.x.sub(&xhat)?;
            Ok(SchemeResult {
                name,
                theta_hat,
                xhat,
                error,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let theta_true = s.theta_true();
    let tail = grid.tail_start(TAIL_FRACTION);
    let scheme_metrics = schemes
        .iter()
        .map(|r| scheme_metrics(r, &theta_true, tail))
        .collect();
    let metrics = Metrics {
        schemes: scheme_metrics,
        tail_start_time: grid.time(tail),
        luenberger_hurwitz: closed_loop.hurwitz,
        luenberger_real_parts: closed_loop.real_parts,
        excitation: p.mixed.excitation(),
        assumption2: p
            .mixed
            .assumption2
            .clone()
            .expect("prepare attaches the mixed disturbance"),
        baseline_max_substeps: baseline.iter().map(|b| b.max_substeps).max().unwrap_or(1),
        cubic_max_substeps: cubic.iter().map(|c| c.max_substeps).max().unwrap_or(1),
        cubic_capped_steps: cubic.iter().map(|c| c.capped_steps).sum(),
        cubic_mixed_regressor_max: cubic.iter().map(|c| c.mixed_regressor_max).collect(),
        cubic_consistency_terminal: cubic.iter().map(|c| c.consistency.last()).collect(),
    };
    debug_assert_eq!(metrics.schemes.len(), 3);
    debug_assert_eq!(theta_true.len(), n);
    Ok(ExperimentResult {
        grid,
        x: p.run.x,
        theta_true,
        schemes,
        metrics,
        provenance: Provenance {
            config_hash: s.config_hash(),
            t0: grid.t0(),
            step: grid.step(),
            samples: grid.len(),
            seed: s.seed(),
        },
    })
}

fn tail_mean_abs(s: &Signal<f64>, tail: usize) -> f64 {
    let v = &s.values()[tail..];
    v.iter().map(|x| x.abs()).sum::<f64>() / v.len() as f64
}

fn tail_max_abs(s: &Signal<f64>, tail: usize) -> f64 {
    s.values()[tail..].iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub(crate) fn scheme_metrics(r: &SchemeResult, theta_true: &[f64], tail: usize) -> SchemeMetrics {
    let n = r.error.dim();
    let errors: Vec<Signal<f64>> = (0..n).map(|i| r.error.component(i)).collect();
    let theta_errors: Vec<Signal<f64>> = (0..n)
        .map(|i| r.theta_hat.component(i).map(|v| v - theta_true[i]))
        .collect();
    SchemeMetrics {
        name: r.name,
        terminal_state_error: errors.iter().map(|e| e.last().abs()).collect(),
        eps_max: errors.iter().map(|e| tail_max_abs(e, tail)).collect(),
        eps_mean: errors.iter().map(|e| tail_mean_abs(e, tail)).collect(),
        terminal_theta_error: theta_errors.iter().map(|e| e.last().abs()).collect(),
        tail_theta_error: theta_errors
            .iter()
            .map(|e| tail_mean_abs(e, tail))
            .collect(),
    }
}
