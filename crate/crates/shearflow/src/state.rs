//! Solution of the flow equation for a given control: the nonsmooth system
//! and its smoothed counterpart.
//!
//! The nonsmooth solve uses damped Picard on the monotone splitting (a
//! Stokes solve with the lagged threshold stress as source) and switches to
//! a semismooth Newton step when Picard progress stalls, with the derivative
//! of the threshold map taken strictly above the threshold. The smoothed
//! solve runs Newton with residual backtracking and falls back to Picard
//! steps when a Newton step fails to reduce the residual.

use log::debug;

use crate::disc::{Discretization, VelOperator};
use crate::error::{Error, Result};
use crate::fem::{FeField, FieldRole};
use crate::linsolve::Factorized;
use crate::tensor::{self, FluidParams};

/// Iteration controls for the state solvers.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct SolverConfig {
    /// Absolute residual norm at which a solve counts as converged.
    pub tol_residual: f64,
    pub max_iters: usize,
    /// Backtracking factor for Newton line search, in (0, 1).
    pub linesearch: f64,
    /// Relaxation for Picard updates, in (0, 1].
    pub picard_relax: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol_residual: 1e-10,
            max_iters: 400,
            linesearch: 0.5,
            picard_relax: 1.0,
        }
    }
}

/// Velocity-pressure pair solving (or iterating toward) the mixed system.
#[derive(Debug, Clone)]
pub struct FlowState {
    pub velocity: FeField,
    pub pressure: FeField,
}

/// Residual history of one solve.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub residuals: Vec<f64>,
    pub converged: bool,
}

/// State-equation solver with a cached Stokes factorization.
pub struct StateSolver<'a> {
    pub disc: &'a Discretization,
    pub params: FluidParams,
    pub cfg: SolverConfig,
    stokes: Factorized,
}

const STEP_MIN: f64 = 1e-8;

impl<'a> StateSolver<'a> {
    pub fn new(disc: &'a Discretization, params: FluidParams, cfg: SolverConfig) -> Result<Self> {
        let stokes = disc.assemble_saddle(params.mu, &VelOperator::Stokes)?.factorize()?;
        Ok(StateSolver { disc, params, cfg, stokes })
    }

    fn split_solution(&self, x: Vec<f64>) -> Result<FlowState> {
        let n_vel = self.disc.dofmap.n_velocity;
        let velocity = FeField::with_zeroed_boundary(
            self.disc.dofmap.clone(),
            FieldRole::Velocity,
            x[..n_vel].to_vec(),
        )?;
        let mut pressure =
            FeField::new(self.disc.dofmap.clone(), FieldRole::Pressure, x[n_vel..].to_vec())?;
        self.disc.remove_pressure_mean(&mut pressure);
        Ok(FlowState { velocity, pressure })
    }

    /// Direct Stokes solve for a full-system right-hand side.
    pub fn solve_stokes(&self, rhs: &[f64]) -> Result<FlowState> {
        self.split_solution(self.stokes.solve(rhs))
    }

    /// Stokes solve with load (u, v).
    pub fn solve_stokes_control(&self, u: &FeField) -> Result<FlowState> {
        let rhs = self.disc.load_from_field(u)?;
        self.solve_stokes(&rhs)
    }

    /// Solves the nonsmooth state equation; realizes the solution operator
    /// for the given control.
    pub fn solve_nonsmooth(
        &self,
        u: &FeField,
        init: Option<&FlowState>,
    ) -> Result<(FlowState, SolveReport)> {
        self.solve_threshold_system(u, None, init)
    }

    /// Solves the smoothed state equation with width `delta`.
    pub fn solve_regularized(
        &self,
        u: &FeField,
        delta: f64,
        init: Option<&FlowState>,
    ) -> Result<(FlowState, SolveReport)> {
        if !(delta > 0.0 && delta < self.params.g) {
            return Err(Error::InvalidParameter {
                name: "delta",
                value: delta,
                constraint: "0 < delta < g",
            });
        }
        self.solve_threshold_system(u, Some(delta), init)
    }

    fn residual_norm(&self, state: &FlowState, u: &FeField, delta: Option<f64>) -> Result<f64> {
        let r = self
            .disc
            .residual(&state.velocity, &state.pressure, u, &self.params, delta)?;
        Ok(self.disc.residual_norm(&r))
    }

    fn threshold_stress_load(&self, state: &FlowState, delta: Option<f64>) -> Result<Vec<f64>> {
        let eps_y = self.disc.eval_sym_gradient(&state.velocity)?;
        let g = self.params.g;
        let t = match delta {
            None => eps_y.map(|e| tensor::soft_threshold(e, g).expect("validated g")),
            Some(d) => {
                eps_y.map(|e| tensor::soft_threshold_reg(e, g, d).expect("validated delta"))
            }
        };
        Ok(self.disc.load_from_tensor(&t, self.params.nu))
    }

    fn apply_step(state: &FlowState, dir: &[f64], t: f64, disc: &Discretization) -> FlowState {
        let n_vel = disc.dofmap.n_velocity;
        let mut vel = state.velocity.coeffs().to_vec();
        for (i, v) in vel.iter_mut().enumerate() {
            *v += t * dir[i];
        }
        let mut pre = state.pressure.coeffs().to_vec();
        for (i, p) in pre.iter_mut().enumerate() {
            *p += t * dir[n_vel + i];
        }
        FlowState {
            velocity: FeField::with_zeroed_boundary(disc.dofmap.clone(), FieldRole::Velocity, vel)
                .expect("velocity layout"),
            pressure: FeField::new(disc.dofmap.clone(), FieldRole::Pressure, pre)
                .expect("pressure layout"),
        }
    }

    /// Backtracks along `dir` until the residual does not increase; returns
    /// the accepted state and residual, or None when no step length works.
    fn backtrack(
        &self,
        state: &FlowState,
        dir: &[f64],
        rn: f64,
        u: &FeField,
        delta: Option<f64>,
        t0: f64,
    ) -> Result<Option<(FlowState, f64, f64)>> {
        let mut t = t0;
        while t >= STEP_MIN {
            let trial = Self::apply_step(state, dir, t, self.disc);
            let rn_trial = self.residual_norm(&trial, u, delta)?;
            if rn_trial <= rn * (1.0 - 1e-4 * t) || rn_trial < self.cfg.tol_residual {
                return Ok(Some((trial, rn_trial, t)));
            }
            t *= self.cfg.linesearch;
        }
        Ok(None)
    }

    fn solve_threshold_system(
        &self,
        u: &FeField,
        delta: Option<f64>,
        init: Option<&FlowState>,
    ) -> Result<(FlowState, SolveReport)> {
        u.expect_velocity_space()?;
        let rhs0 = self.disc.load_from_field(u)?;
        let mut state = match init {
            Some(s) => s.clone(),
            None => self.solve_stokes(&rhs0)?,
        };
        let mut rn = self.residual_norm(&state, u, delta)?;
        let mut history = vec![rn];
        // The smoothed system is C1: lead with Newton. The nonsmooth system
        // leads with Picard and brings in semismooth Newton when slow.
        let mut use_newton = delta.is_some();
        let mut slow_picard = 0usize;

        for iter in 0..self.cfg.max_iters {
            if rn <= self.cfg.tol_residual {
                let mut state = state;
                self.disc.remove_pressure_mean(&mut state.pressure);
                return Ok((
                    state,
                    SolveReport { iterations: iter, residuals: history, converged: true },
                ));
            }
            let mut stepped = false;

            if use_newton {
                let eps_y = self.disc.eval_sym_gradient(&state.velocity)?;
                let op = match delta {
                    Some(d) => VelOperator::RegJacobian {
                        eps_y: &eps_y,
                        nu: self.params.nu,
                        g: self.params.g,
                        delta: d,
                    },
                    None => VelOperator::GenJacobian {
                        eps_y: &eps_y,
                        nu: self.params.nu,
                        g: self.params.g,
                    },
                };
                let jac = self.disc.assemble_saddle(self.params.mu, &op)?.factorize()?;
                let mut r = self
                    .disc
                    .residual(&state.velocity, &state.pressure, u, &self.params, delta)?;
                for v in r.iter_mut() {
                    *v = -*v;
                }
                let dir = jac.solve(&r);
                if let Some((next, rn_next, t)) =
                    self.backtrack(&state, &dir, rn, u, delta, 1.0)?
                {
                    debug!(target: "state", "iter={} newton step={} residual={:.3e}", iter, t, rn_next);
                    state = next;
                    rn = rn_next;
                    stepped = true;
                } else {
                    debug!(target: "state", "iter={} newton step rejected", iter);
                    // smoothed path retries Newton after the fallback Picard
                    // step; the nonsmooth path returns to plain Picard
                    use_newton = delta.is_some();
                }
            }

            if !stepped {
                // Picard: Stokes solve with lagged threshold stress.
                let thr = self.threshold_stress_load(&state, delta)?;
                let rhs: Vec<f64> = rhs0.iter().zip(&thr).map(|(a, b)| a - b).collect();
                let hat = self.stokes.solve(&rhs);
                let n_sys = self.disc.dofmap.n_system();
                let n_vel = self.disc.dofmap.n_velocity;
                let mut dir = vec![0.0; n_sys];
                for i in 0..n_vel {
                    dir[i] = hat[i] - state.velocity.coeffs()[i];
                }
                for i in 0..self.disc.dofmap.n_pressure {
                    dir[n_vel + i] = hat[n_vel + i] - state.pressure.coeffs()[i];
                }
                match self.backtrack(&state, &dir, rn, u, delta, self.cfg.picard_relax)? {
                    Some((next, rn_next, t)) => {
                        debug!(target: "state", "iter={} picard step={} residual={:.3e}", iter, t, rn_next);
                        if rn_next > 0.7 * rn {
                            slow_picard += 1;
                        } else {
                            slow_picard = 0;
                        }
                        if slow_picard >= 2 {
                            use_newton = true;
                            slow_picard = 0;
                        }
                        state = next;
                        rn = rn_next;
                    }
                    None => {
                        if !use_newton && delta.is_none() {
                            // give semismooth Newton one chance before failing
                            use_newton = true;
                            history.push(rn);
                            continue;
                        }
                        return Err(Error::Convergence {
                            iterations: iter,
                            last_residual: rn,
                            history,
                        });
                    }
                }
            }
            history.push(rn);
        }

        if rn <= self.cfg.tol_residual {
            let iterations = self.cfg.max_iters;
            let mut state = state;
            self.disc.remove_pressure_mean(&mut state.pressure);
            return Ok((state, SolveReport { iterations, residuals: history, converged: true }));
        }
        Err(Error::Convergence {
            iterations: self.cfg.max_iters,
            last_residual: rn,
            history,
        })
    }
}
