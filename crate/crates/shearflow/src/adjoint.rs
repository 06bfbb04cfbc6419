//! Adjoint solves, reduced gradients, the smoothed-problem optimizer and the
//! outer continuation loop that drives the smoothing width to zero.

use std::sync::Arc;

use log::{debug, info};

use crate::disc::{Discretization, VelOperator};
use crate::error::{Error, Result};
use crate::fem::{FeField, FieldRole, QuadTensorField};
use crate::state::{FlowState, SolverConfig, StateSolver};
use crate::tensor::FluidParams;

/// Tracking-type control problem data.
#[derive(Debug, Clone)]
pub struct ControlProblem {
    pub params: FluidParams,
    /// Control cost weight.
    pub alpha: f64,
    /// Desired velocity field (plain L² data in the velocity space).
    pub z_d: FeField,
    /// Anchor control for the proximal objective variant.
    pub u_bar: FeField,
}

impl ControlProblem {
    pub fn new(params: FluidParams, alpha: f64, z_d: FeField, u_bar: FeField) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(Error::InvalidParameter {
                name: "alpha",
                value: alpha,
                constraint: "> 0",
            });
        }
        z_d.expect_velocity_space()?;
        u_bar.expect_velocity_space()?;
        if z_d.coeffs().len() != u_bar.coeffs().len() {
            return Err(Error::LengthMismatch {
                expected: z_d.coeffs().len(),
                got: u_bar.coeffs().len(),
            });
        }
        Ok(ControlProblem { params, alpha, z_d, u_bar })
    }
}

/// Which reduced gradient the optimizer follows: the plain tracking
/// functional, or the anchored variant with the extra ½‖u − ū‖² term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GradientMode {
    Original,
    Proximal,
}

#[derive(Debug, Clone)]
pub struct AdjointSolution {
    /// Adjoint velocity (role: adjoint).
    pub p: FeField,
    pub pressure: FeField,
}

/// Solves the adjoint equation of the smoothed problem at a state solve.
///
/// The Jacobian of the smoothed threshold map is self-adjoint pointwise, so
/// the adjoint matrix is the (symmetric) Newton matrix at the state.
pub fn solve_adjoint_regularized(
    disc: &Discretization,
    state: &FlowState,
    problem: &ControlProblem,
    delta: f64,
) -> Result<AdjointSolution> {
    let eps_y = disc.eval_sym_gradient(&state.velocity)?;
    solve_adjoint_with_strain(disc, &eps_y, state, problem, delta)
}

/// Same as [`solve_adjoint_regularized`] but reusing an evaluated strain.
pub fn solve_adjoint_with_strain(
    disc: &Discretization,
    eps_y: &QuadTensorField,
    state: &FlowState,
    problem: &ControlProblem,
    delta: f64,
) -> Result<AdjointSolution> {
    let params = &problem.params;
    let matrix = disc.assemble_saddle(
        params.mu,
        &VelOperator::RegJacobian { eps_y, nu: params.nu, g: params.g, delta },
    )?;
    let factor = matrix.factorize()?;
    let mut diff = state.velocity.coeffs().to_vec();
    for (d, z) in diff.iter_mut().zip(problem.z_d.coeffs()) {
        *d -= z;
    }
    let diff = FeField::new(disc.dofmap.clone(), FieldRole::Control, diff)?;
    let rhs = disc.load_from_field(&diff)?;
    let x = factor.solve(&rhs);
    let n_vel = disc.dofmap.n_velocity;
    let p = FeField::with_zeroed_boundary(
        disc.dofmap.clone(),
        FieldRole::Adjoint,
        x[..n_vel].to_vec(),
    )?;
    let mut pressure = FeField::new(disc.dofmap.clone(), FieldRole::Pressure, x[n_vel..].to_vec())?;
    disc.remove_pressure_mean(&mut pressure);
    Ok(AdjointSolution { p, pressure })
}

/// L² Riesz representative of the reduced-gradient functional:
/// `p + α u` (original) or `p + (α + 1) u − ū` (proximal).
pub fn reduced_gradient(
    u: &FeField,
    p: &FeField,
    problem: &ControlProblem,
    mode: GradientMode,
) -> Result<FeField> {
    u.expect_velocity_space()?;
    p.expect_velocity_space()?;
    let mut coeffs = p.coeffs().to_vec();
    match mode {
        GradientMode::Original => {
            for (c, uc) in coeffs.iter_mut().zip(u.coeffs()) {
                *c += problem.alpha * uc;
            }
        }
        GradientMode::Proximal => {
            for ((c, uc), ub) in coeffs.iter_mut().zip(u.coeffs()).zip(problem.u_bar.coeffs()) {
                *c += (problem.alpha + 1.0) * uc - ub;
            }
        }
    }
    FeField::new(u.dofmap().clone(), FieldRole::Control, coeffs)
}

/// Value of the reduced objective at (u, y(u)).
pub fn objective_value(
    disc: &Discretization,
    problem: &ControlProblem,
    state: &FlowState,
    u: &FeField,
    mode: GradientMode,
) -> f64 {
    let mut diff = state.velocity.coeffs().to_vec();
    for (c, z) in diff.iter_mut().zip(problem.z_d.coeffs()) {
        *c -= z;
    }
    let mut j = 0.5 * disc.mass().inner(&diff, &diff)
        + 0.5 * problem.alpha * disc.l2_inner(u, u);
    if mode == GradientMode::Proximal {
        let mut du = u.clone();
        du.axpy(-1.0, &problem.u_bar);
        j += 0.5 * disc.mass().inner(du.coeffs(), du.coeffs());
    }
    j
}

/// Optimizer controls.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct OptimizeConfig {
    /// Gradient-norm stopping tolerance; `None` uses 1e-8 (1 + ‖z_d‖).
    pub tol_grad: Option<f64>,
    pub max_iters: usize,
    pub armijo_c1: f64,
    pub step_min: f64,
    pub step_max: f64,
    pub inner: SolverConfig,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        OptimizeConfig {
            tol_grad: None,
            max_iters: 400,
            armijo_c1: 1e-4,
            step_min: 1e-14,
            step_max: 1e4,
            inner: SolverConfig::default(),
        }
    }
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct OptIter {
    pub iter: usize,
    pub j: f64,
    pub grad_norm: f64,
    pub step: f64,
}

#[derive(Debug, Clone)]
pub struct OptimizeResult {
    pub u: FeField,
    pub state: FlowState,
    pub adjoint: AdjointSolution,
    pub j_value: f64,
    pub grad_norm: f64,
    pub state_residual: f64,
    pub history: Vec<OptIter>,
    pub converged: bool,
}

/// Gradient descent with Barzilai-Borwein steps and an Armijo safeguard on
/// the reduced objective of the smoothed problem at width `delta`.
pub fn optimize_regularized(
    disc: &Discretization,
    problem: &ControlProblem,
    delta: f64,
    u0: &FeField,
    cfg: &OptimizeConfig,
    mode: GradientMode,
) -> Result<OptimizeResult> {
    let solver = StateSolver::new(disc, problem.params, cfg.inner)?;
    let tol_grad = cfg
        .tol_grad
        .unwrap_or_else(|| 1e-8 * (1.0 + disc.l2_norm(&problem.z_d)));

    let mut u = u0.clone();
    let (mut state, mut report) = solver.solve_regularized(&u, delta, None)?;
    let mut j = objective_value(disc, problem, &state, &u, mode);
    let mut adjoint = solve_adjoint_regularized(disc, &state, problem, delta)?;
    let mut grad = reduced_gradient(&u, &adjoint.p, problem, mode)?;
    let mut grad_norm = disc.l2_norm(&grad);

    let mut history = Vec::new();
    let mut converged = false;
    let mut step = 0.0;
    let mut prev_u: Option<FeField> = None;
    let mut prev_grad: Option<FeField> = None;

    for iter in 0..=cfg.max_iters {
        history.push(OptIter { iter, j, grad_norm, step });
        if grad_norm <= tol_grad {
            converged = true;
            break;
        }
        if iter == cfg.max_iters {
            break;
        }

        // Barzilai-Borwein step from the last pair, else a conservative start
        let mut s = match (&prev_u, &prev_grad) {
            (Some(pu), Some(pg)) => {
                let mut du = u.clone();
                du.axpy(-1.0, pu);
                let mut dg = grad.clone();
                dg.axpy(-1.0, pg);
                let num = disc.l2_inner(&du, &du);
                let den = disc.l2_inner(&du, &dg);
                if den > 0.0 && num > 0.0 {
                    (num / den).clamp(cfg.step_min, cfg.step_max)
                } else {
                    step.max(1.0)
                }
            }
            _ => 1.0 / (1.0 + grad_norm),
        };

        // Armijo backtracking on the reduced objective
        let g2 = grad_norm * grad_norm;
        let mut accepted = None;
        while s >= cfg.step_min {
            let mut u_trial = u.clone();
            u_trial.axpy(-s, &grad);
            match solver.solve_regularized(&u_trial, delta, Some(&state)) {
                Ok((state_trial, rep_trial)) => {
                    let j_trial = objective_value(disc, problem, &state_trial, &u_trial, mode);
                    if j_trial <= j - cfg.armijo_c1 * s * g2 {
                        accepted = Some((u_trial, state_trial, rep_trial, j_trial));
                        break;
                    }
                }
                Err(Error::Convergence { .. }) => {
                    // state solve diverged at this trial control: shrink
                }
                Err(e) => return Err(e),
            }
            s *= 0.5;
        }
        let Some((u_new, state_new, report_new, j_new)) = accepted else {
            debug!(target: "optimize", "stalled at iter {iter} (step < {})", cfg.step_min);
            break;
        };

        prev_u = Some(u.clone());
        prev_grad = Some(grad.clone());
        u = u_new;
        state = state_new;
        report = report_new;
        j = j_new;
        step = s;
        adjoint = solve_adjoint_regularized(disc, &state, problem, delta)?;
        grad = reduced_gradient(&u, &adjoint.p, problem, mode)?;
        grad_norm = disc.l2_norm(&grad);
        debug!(target: "optimize", "iter={} j={j:.6e} grad={grad_norm:.3e} step={s:.3e}", iter + 1);
    }

    let state_residual = report.residuals.last().copied().unwrap_or(f64::NAN);
    Ok(OptimizeResult {
        u,
        state,
        adjoint,
        j_value: j,
        grad_norm,
        state_residual,
        history,
        converged,
    })
}

/// Strictly decreasing sequence of smoothing widths.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct PathSchedule {
    pub deltas: Vec<f64>,
}

impl PathSchedule {
    pub fn new(deltas: Vec<f64>, g: f64) -> Result<Self> {
        if deltas.is_empty() {
            return Err(Error::Format("schedule needs at least one delta".into()));
        }
        for pair in deltas.windows(2) {
            if !(pair[1] < pair[0]) {
                return Err(Error::Format(format!(
                    "deltas must be strictly decreasing, got {} then {}",
                    pair[0], pair[1]
                )));
            }
        }
        for &d in &deltas {
            if !(d > 0.0 && d < g) {
                return Err(Error::InvalidParameter {
                    name: "delta",
                    value: d,
                    constraint: "0 < delta < g",
                });
            }
        }
        Ok(PathSchedule { deltas })
    }
}

/// One continuation stage in machine-readable form.
#[derive(Debug, Clone, serde::Serialize)]
pub struct StageRecord {
    pub delta: f64,
    pub iters: usize,
    pub j_value: f64,
    pub grad_norm: f64,
    pub grad_norm_original: f64,
    pub grad_norm_proximal: f64,
    pub state_residual: f64,
    pub multiplier_norm: f64,
    pub control_distance: f64,
    pub converged: bool,
}

#[derive(Debug)]
pub struct PathResult {
    pub stages: Vec<StageRecord>,
    /// Control iterates per stage.
    pub controls: Vec<FeField>,
    pub final_result: OptimizeResult,
    pub final_delta: f64,
}

/// Warm-started continuation over a decreasing smoothing schedule.
///
/// Each stage is optimized from the previous stage's control/state; in
/// proximal mode the anchor ū is refreshed to the previous stage's control
/// (first stage: the problem's ū).
pub fn delta_path(
    disc: &Discretization,
    problem: &ControlProblem,
    schedule: &PathSchedule,
    cfg: &OptimizeConfig,
    mode: GradientMode,
) -> Result<PathResult> {
    let dofmap: &Arc<_> = &disc.dofmap;
    let mut u = FeField::zeros(dofmap.clone(), FieldRole::Control);
    let mut anchor = problem.u_bar.clone();
    let mut stages = Vec::new();
    let mut controls = Vec::new();
    let mut last: Option<OptimizeResult> = None;

    for (k, &delta) in schedule.deltas.iter().enumerate() {
        let stage_problem = ControlProblem {
            params: problem.params,
            alpha: problem.alpha,
            z_d: problem.z_d.clone(),
            u_bar: anchor.clone(),
        };
        let result = optimize_regularized(disc, &stage_problem, delta, &u, cfg, mode)?;

        let eps_y = disc.eval_sym_gradient(&result.state.velocity)?;
        let eps_p = disc.eval_sym_gradient(&result.adjoint.p)?;
        let lambda = crate::stationarity::compute_multiplier(
            &eps_y,
            &eps_p,
            problem.params.g,
            delta,
        )?;
        let g_orig = reduced_gradient(&result.u, &result.adjoint.p, &stage_problem, GradientMode::Original)?;
        let g_prox = reduced_gradient(&result.u, &result.adjoint.p, &stage_problem, GradientMode::Proximal)?;
        let mut du = result.u.clone();
        du.axpy(-1.0, &u);
        let record = StageRecord {
            delta,
            iters: result.history.len().saturating_sub(1),
            j_value: result.j_value,
            grad_norm: result.grad_norm,
            grad_norm_original: disc.l2_norm(&g_orig),
            grad_norm_proximal: disc.l2_norm(&g_prox),
            state_residual: result.state_residual,
            multiplier_norm: lambda.l2_norm(),
            control_distance: disc.l2_norm(&du),
            converged: result.converged,
        };
        info!(
            target: "path",
            "stage {k}: delta={delta:.3e} iters={} j={:.6e} grad={:.3e} multiplier={:.3e}",
            record.iters, record.j_value, record.grad_norm, record.multiplier_norm
        );
        stages.push(record);
        controls.push(result.u.clone());
        anchor = result.u.clone();
        u = result.u.clone();
        let failed = !result.converged;
        last = Some(result);
        if failed {
            break;
        }
    }

    let final_result = last.expect("schedule validated non-empty");
    let final_delta = schedule.deltas[stages.len() - 1];
    Ok(PathResult { stages, controls, final_result, final_delta })
}
