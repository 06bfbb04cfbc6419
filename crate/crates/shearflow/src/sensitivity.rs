//! The linearized flow equation characterizing the directional derivative of
//! the solution operator, and its verification against difference quotients.
//!
//! The directional derivative of the threshold map is linear in the
//! direction off the threshold sphere but only positively homogeneous on it,
//! so the equation is genuinely nonlinear there. Quadrature points with
//! | |εy| − g | ≤ band_tol use the on-sphere formula and are lagged in a
//! damped Picard iteration; all other points sit in the system matrix.

use log::debug;

use crate::disc::{Discretization, VelOperator};
use crate::error::{Error, Result};
use crate::fem::{FeField, FieldRole, QuadTensorField};
use crate::state::{FlowState, SolveReport, SolverConfig, StateSolver};
use crate::tensor::{self, FluidParams, SymTensor};

/// Default width of the on-sphere band, relative to g.
pub const BAND_TOL_REL: f64 = 1e-6;

/// Default Picard damping for the lagged band term.
pub const LINEARIZED_RELAX: f64 = 0.7;

#[derive(Debug, Clone)]
pub struct LinearizedSolution {
    /// The directional derivative field (role: direction).
    pub z: FeField,
    pub pressure: FeField,
    pub report: SolveReport,
    /// Weighted fraction of quadrature points inside the band.
    pub band_fraction: f64,
}

/// Solves the linearized equation at a state `y` for load `h`.
pub fn solve_linearized(
    disc: &Discretization,
    y: &FeField,
    h: &FeField,
    params: &FluidParams,
    cfg: &SolverConfig,
    band_tol: f64,
) -> Result<LinearizedSolution> {
    y.expect_velocity_space()?;
    h.expect_velocity_space()?;
    if !(band_tol > 0.0) {
        return Err(Error::InvalidParameter {
            name: "band_tol",
            value: band_tol,
            constraint: "> 0",
        });
    }
    let eps_y = disc.eval_sym_gradient(y)?;
    let band: Vec<usize> = eps_y
        .values
        .iter()
        .enumerate()
        .filter(|(_, e)| (e.norm() - params.g).abs() <= band_tol)
        .map(|(i, _)| i)
        .collect();
    let band_fraction = band.iter().map(|&i| eps_y.weights[i]).sum::<f64>() / disc.area();

    let matrix = disc.assemble_saddle(
        params.mu,
        &VelOperator::LinearizedSmooth {
            eps_y: &eps_y,
            nu: params.nu,
            g: params.g,
            band_tol,
        },
    )?;
    let factor = matrix.factorize()?;
    let rhs0 = disc.load_from_field(h)?;
    let rhs_scale = 1.0 + disc.residual_norm(&rhs0);
    let tol = cfg.tol_residual * rhs_scale;

    let n_vel = disc.dofmap.n_velocity;
    let mut z = FeField::zeros(disc.dofmap.clone(), FieldRole::Direction);
    let mut pressure = FeField::zeros(disc.dofmap.clone(), FieldRole::Pressure);
    let mut history = Vec::new();

    let residual_of = |z: &FeField, pressure: &FeField| -> Result<f64> {
        let r = disc.momentum_residual(
            Some((z.coeffs(), params.mu)),
            pressure.coeffs(),
            &mut |idx, ez| {
                tensor::soft_threshold_dir_with_tol(&eps_y.values[idx], ez, params.g, band_tol)
                    .expect("validated g")
                    .scale(params.nu)
            },
            Some(z.coeffs()),
            h.coeffs(),
        )?;
        Ok(disc.residual_norm(&r))
    };

    let mut rn = residual_of(&z, &pressure)?;
    history.push(rn);
    for iter in 0..cfg.max_iters {
        if rn <= tol {
            disc.remove_pressure_mean(&mut pressure);
            return Ok(LinearizedSolution {
                z,
                pressure,
                report: SolveReport { iterations: iter, residuals: history, converged: true },
                band_fraction,
            });
        }
        // lagged band term: max(0, E:εz) E/g² on band points only
        let mut rhs = rhs0.clone();
        if !band.is_empty() {
            let eps_z = disc.eval_sym_gradient(&z)?;
            let mut t = eps_y.map(|_| SymTensor::zero(2));
            for &i in &band {
                let e = &eps_y.values[i];
                let c = e.dot(&eps_z.values[i]);
                if c > 0.0 {
                    t.values[i] = e.scale(c / (params.g * params.g));
                }
            }
            let band_load = disc.load_from_tensor(&t, params.nu);
            for (r, b) in rhs.iter_mut().zip(&band_load) {
                *r -= b;
            }
        }
        let hat = factor.solve(&rhs);

        // relax toward the new iterate, backtracking on the residual
        let relax0 = if band.is_empty() { 1.0 } else { cfg.picard_relax.min(LINEARIZED_RELAX) };
        let mut accepted = false;
        let mut omega = relax0;
        while omega >= 1e-8 {
            let mut z_new = z.clone();
            let mut p_new = pressure.clone();
            for (i, c) in z_new.coeffs_mut().iter_mut().enumerate() {
                *c += omega * (hat[i] - z.coeffs()[i]);
            }
            for (i, c) in p_new.coeffs_mut().iter_mut().enumerate() {
                *c += omega * (hat[n_vel + i] - pressure.coeffs()[i]);
            }
            let rn_new = residual_of(&z_new, &p_new)?;
            if rn_new <= rn * (1.0 + 1e-12) || rn_new <= tol {
                debug!(target: "linearized", "iter={iter} omega={omega} residual={rn_new:.3e}");
                z = z_new;
                pressure = p_new;
                rn = rn_new;
                accepted = true;
                break;
            }
            omega *= 0.5;
        }
        if !accepted {
            return Err(Error::Convergence {
                iterations: iter,
                last_residual: rn,
                history,
            });
        }
        history.push(rn);
    }
    if rn <= tol {
        disc.remove_pressure_mean(&mut pressure);
        return Ok(LinearizedSolution {
            z,
            pressure,
            report: SolveReport {
                iterations: cfg.max_iters,
                residuals: history,
                converged: true,
            },
            band_fraction,
        });
    }
    Err(Error::Convergence {
        iterations: cfg.max_iters,
        last_residual: rn,
        history,
    })
}

/// Difference-quotient verification of the directional derivative.
#[derive(Debug, Clone, serde::Serialize)]
pub struct DerivativeCheck {
    pub ts: Vec<f64>,
    /// r(t) = ‖(S(u + t h) − S(u))/t − z‖_{H¹}.
    pub rs: Vec<f64>,
    /// Least-squares slope of log r against log t.
    pub order: f64,
    pub z_h1_norm: f64,
    pub band_fraction: f64,
}

/// Runs the difference-quotient check at control `u` in direction `h` for a
/// decreasing sequence of step sizes.
pub fn derivative_check(
    disc: &Discretization,
    u: &FeField,
    h: &FeField,
    params: &FluidParams,
    cfg: &SolverConfig,
    band_tol: f64,
    t_seq: &[f64],
) -> Result<DerivativeCheck> {
    let solver = StateSolver::new(disc, *params, *cfg)?;
    let (base, _) = solver.solve_nonsmooth(u, None)?;
    let lin = solve_linearized(disc, &base.velocity, h, params, cfg, band_tol)?;
    let z_h1_norm = disc.h1_norm(&lin.z);

    let mut ts = Vec::new();
    let mut rs = Vec::new();
    let mut warm: Option<FlowState> = Some(base.clone());
    for &t in t_seq {
        let mut u_t = u.clone();
        u_t.axpy(t, h);
        let (state_t, _) = solver.solve_nonsmooth(&u_t, warm.as_ref())?;
        let mut quotient = state_t.velocity.sub(&base.velocity);
        quotient.scale(1.0 / t);
        let diff = quotient.sub(&lin.z);
        ts.push(t);
        rs.push(disc.h1_norm(&diff));
        warm = Some(state_t);
    }

    let order = fit_log_slope(&ts, &rs);
    Ok(DerivativeCheck { ts, rs, order, z_h1_norm, band_fraction: lin.band_fraction })
}

/// Least-squares slope of log(r) vs log(t), ignoring values at rounding level.
pub fn fit_log_slope(ts: &[f64], rs: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = ts
        .iter()
        .zip(rs)
        .filter(|(_, &r)| r > 1e-14)
        .map(|(&t, &r)| (t.ln(), r.ln()))
        .collect();
    if pts.len() < 2 {
        return f64::INFINITY;
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

/// Assembles the action of the linearized operator on a direction field,
/// ⟨T(z), φ⟩ rows (no pressure or load terms), for monotonicity probes.
pub fn linearized_operator_apply(
    disc: &Discretization,
    eps_y: &QuadTensorField,
    z: &FeField,
    params: &FluidParams,
    band_tol: f64,
) -> Result<Vec<f64>> {
    let zero_pressure = vec![0.0; disc.dofmap.n_pressure];
    let zero_load = vec![0.0; disc.dofmap.n_velocity];
    disc.momentum_residual(
        Some((z.coeffs(), params.mu)),
        &zero_pressure,
        &mut |idx, ez| {
            tensor::soft_threshold_dir_with_tol(&eps_y.values[idx], ez, params.g, band_tol)
                .expect("validated g")
                .scale(params.nu)
        },
        None,
        &zero_load,
    )
}
