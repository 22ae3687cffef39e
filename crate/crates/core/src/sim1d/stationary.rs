use num_complex::Complex64 as C64;

use super::{injection_k, Injection, Lead, Method1D, Problem1D, SimError};
use crate::dtbc1d::{discrete_k, stationary_alpha, stationary_dtbc_rows};
use crate::field::ComplexField;
use crate::injection::CrossingCoupling;
use crate::linalg::{lu_solve, SparseComplexMatrix};
use crate::stencils::StencilOrder;

/// Linear system (H − E)u = b with boundary rows already in place.
#[derive(Debug, Clone)]
pub struct StationarySystem1D {
    pub matrix: SparseComplexMatrix,
    pub rhs: Vec<C64>,
    /// Total energy E.
    pub energy: f64,
    /// Wave number of the incoming wave.
    pub k: f64,
    pub method: Method1D,
}

/// Stationary state and its lead amplitudes.
#[derive(Debug, Clone)]
pub struct ScatteringSolution1D {
    /// Values on every grid point. With absorbing layers the incoming wave
    /// is absent from the injection lead.
    pub field: ComplexField,
    pub energy: f64,
    pub k: f64,
    /// Complex amplitude of the reflected wave at the device boundary.
    pub reflected: C64,
    /// Complex amplitude of the transmitted wave at the far device boundary.
    pub transmitted: C64,
    pub reflection: f64,
    pub transmission: f64,
}

/// Group-velocity factor used in current ratios.
fn velocity(order: StencilOrder, k: f64, dx: f64) -> f64 {
    match order {
        StencilOrder::Second => (k * dx).sin() / dx,
        _ => k,
    }
}

/// Wave number of a free wave in a lead, or `None` if evanescent.
fn lead_k(problem: &Problem1D, e_kin: f64) -> Option<f64> {
    if e_kin <= 0.0 {
        return None;
    }
    injection_k(&problem.units, problem.order, e_kin, problem.grid.dx()).ok()
}

/// Builds the stationary system at time `t` (only the potential depends on it).
pub fn assemble_stationary_1d(
    problem: &Problem1D,
    injection: &Injection,
    t: f64,
) -> Result<StationarySystem1D, SimError> {
    let dx = problem.grid.dx();
    let units = &problem.units;
    let v_in = problem.lead_potential(injection.lead, t);
    let energy = injection.energy + v_in;
    let k = injection_k(units, problem.order, injection.energy, dx)?;
    let n = problem.grid.len();
    let shift: Vec<C64> = vec![C64::new(-energy, 0.0); n];
    let base = problem.hamiltonian(t).add_scaled(C64::new(1.0, 0.0), &SparseComplexMatrix::diagonal(&shift))?;

    let (matrix, rhs) = match problem.method {
        Method1D::Closed(_) => {
            return Err(SimError::Invalid("scattering states need open boundaries".into()));
        }
        Method1D::Dtbc => {
            let e_l = energy - problem.lead_potential(Lead::Left, t);
            let e_r = energy - problem.lead_potential(Lead::Right, t);
            // rows must match the discrete dispersion exactly
            discrete_k(units, injection.energy, dx)?;
            let alpha_l = stationary_alpha(units, e_l, dx);
            let alpha_r = stationary_alpha(units, e_r, dx);
            let a = C64::new(injection.amplitude, 0.0);
            let j = n - 1;
            let mut rhs = vec![C64::default(); n];
            let rows = match injection.lead {
                Lead::Left => {
                    let r = stationary_dtbc_rows(alpha_l, alpha_r, a);
                    rhs[0] = r.left_rhs;
                    r
                }
                Lead::Right => {
                    let r = stationary_dtbc_rows(alpha_l, alpha_r, C64::default());
                    rhs[j] = a * (alpha_r * alpha_r - 1.0);
                    r
                }
            };
            let m = base.with_rows_replaced(&[
                (0, vec![(0, rows.left[0]), (1, rows.left[1])]),
                (j, vec![(j - 1, rows.right[0]), (j, rows.right[1])]),
            ])?;
            (m, rhs)
        }
        Method1D::Pml(_) => {
            let coupling = CrossingCoupling::new(&base, &problem.lead_mask(injection.lead));
            let rhs = coupling.source(&problem.incoming_profile(injection, k));
            (base, rhs)
        }
    };
    Ok(StationarySystem1D { matrix, rhs, energy, k, method: problem.method })
}

/// Stationary scattering state for the potential frozen at time `t`.
pub fn solve_scattering_1d(problem: &Problem1D, injection: &Injection, t: f64) -> Result<ScatteringSolution1D, SimError> {
    let sys = assemble_stationary_1d(problem, injection, t)?;
    let u = lu_solve(&sys.matrix, &sys.rhs)?;
    let grid = &problem.grid;
    let dx = grid.dx();
    let (lo, hi) = (grid.device_lo(), grid.device_hi());
    let a = injection.amplitude;
    let phase = |k: f64| C64::from_polar(1.0, k * dx);

    // Reflected and transmitted amplitudes at the device edges.
    let (reflected, transmitted) = match (problem.method, injection.lead) {
        (Method1D::Dtbc, Lead::Left) => (u[lo] - a, u[hi]),
        (Method1D::Dtbc, Lead::Right) => (u[hi] - a, u[lo]),
        (_, Lead::Left) => (u[lo - 1] / phase(sys.k), u[hi]),
        (_, Lead::Right) => (u[hi + 1] / phase(sys.k), u[lo]),
    };
    let out_lead = match injection.lead {
        Lead::Left => Lead::Right,
        Lead::Right => Lead::Left,
    };
    let e_out = sys.energy - problem.lead_potential(out_lead, t);
    let transmission = match lead_k(problem, e_out) {
        Some(k_out) => {
            velocity(problem.order, k_out, dx) / velocity(problem.order, sys.k, dx) * transmitted.norm_sqr() / (a * a)
        }
        None => 0.0,
    };
    Ok(ScatteringSolution1D {
        field: ComplexField::new(u),
        energy: sys.energy,
        k: sys.k,
        reflected,
        transmitted,
        reflection: reflected.norm_sqr() / (a * a),
        transmission,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pml::PmlSettings;
    use crate::potential::Potential;
    use crate::units::UnitSystem;

    fn free(method: Method1D, order: StencilOrder) -> Problem1D {
        Problem1D::new(UnitSystem::default(), 120.0, 0.5, Potential::Zero, order, method).unwrap()
    }

    #[test]
    fn dtbc_free_solution_is_discrete_plane_wave() {
        let p = free(Method1D::Dtbc, StencilOrder::Second);
        let s = solve_scattering_1d(&p, &Injection::left(30.0), 0.0).unwrap();
        let alpha = stationary_alpha(&p.units, 30.0, 0.5);
        for (j, v) in s.field.values.iter().enumerate() {
            assert!((v - alpha.powi(j as i32)).norm() < 1e-12, "j={j}");
        }
        assert!(s.reflection < 1e-24);
        assert!((s.transmission - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pml_source_has_two_h_entries() {
        for order in StencilOrder::ALL {
            let p = free(Method1D::Pml(PmlSettings::default()), order);
            let sys = assemble_stationary_1d(&p, &Injection::left(20.0), 0.0).unwrap();
            let nz = sys.rhs.iter().filter(|v| v.norm() > 0.0).count();
            assert_eq!(nz, 2 * order.half_width());
        }
    }

    #[test]
    fn right_injection_mirrors_left() {
        let ramp = Potential::ramp(40.0, 80.0, -25.0);
        let p = Problem1D::new(UnitSystem::default(), 120.0, 0.5, Potential::Zero, StencilOrder::Second, Method1D::Dtbc)
            .unwrap();
        let inj = Injection { lead: Lead::Right, ..Injection::left(12.0) };
        let s = solve_scattering_1d(&p, &inj, 0.0).unwrap();
        let n = s.field.len();
        let l = solve_scattering_1d(&p, &Injection::left(12.0), 0.0).unwrap();
        for j in 0..n {
            assert!((s.field.values[j] - l.field.values[n - 1 - j]).norm() < 1e-10);
        }
        // flux conservation through a ramp
        let pr = Problem1D::new(UnitSystem::default(), 120.0, 0.5, ramp, StencilOrder::Second, Method1D::Dtbc).unwrap();
        let s = solve_scattering_1d(&pr, &Injection::left(40.0), 0.0).unwrap();
        assert!((s.reflection + s.transmission - 1.0).abs() < 1e-10);
    }

    #[test]
    fn closed_box_is_rejected() {
        let p = free(Method1D::Closed(crate::stencils::Closure::Dirichlet), StencilOrder::Second);
        assert!(matches!(solve_scattering_1d(&p, &Injection::left(5.0), 0.0), Err(SimError::Invalid(_))));
    }
}
