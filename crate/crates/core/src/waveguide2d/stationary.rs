use num_complex::Complex64 as C64;
use rayon::prelude::*;

use super::{Method2D, Problem2D, WaveguideError};
use crate::dtbc1d::stationary_alpha;
use crate::field::ComplexField;
use crate::injection::CrossingCoupling;
use crate::linalg::{lu_solve, shift_invert_eigs, EigenPairs, SparseComplexMatrix};
use crate::sim1d::{injection_k, Injection, Lead};
use crate::stencils::StencilOrder;

/// One dense boundary equation: (row index, entries, right-hand side).
pub type BoundaryRow = (usize, Vec<(usize, C64)>, C64);

/// Linear system (H − E)u = b with boundary rows in place and interior
/// rows scaled by 1/E.
#[derive(Debug, Clone)]
pub struct StationarySystem2D {
    pub matrix: SparseComplexMatrix,
    pub rhs: Vec<C64>,
    /// Total energy E.
    pub energy: f64,
    pub k: f64,
    /// Amplitude carried by the right-hand side; the solution divided by
    /// it has unit incident amplitude.
    pub amplitude: f64,
}

#[derive(Debug, Clone)]
pub struct ScatteringSolution2D {
    /// Reduced-mesh values for unit incident amplitude.
    pub field: ComplexField,
    pub energy: f64,
    pub k: f64,
    pub lead: Lead,
}

fn other(lead: Lead) -> Lead {
    match lead {
        Lead::Left => Lead::Right,
        Lead::Right => Lead::Left,
    }
}

/// Mode-resolved boundary equations at both contacts.
///
/// For each lead and mode m: c_b − α⁽ᵐ⁾ c_{b±1} = amplitude·(1 − (α⁽⁰⁾)²)
/// on the injection lead's m = 0 row and zero otherwise, with c the dx-weighted
/// mode coefficient of a column. Evanescent modes are included.
pub fn dtbc_rows_2d(problem: &Problem2D, energy: f64, amplitude: f64, injection: Lead) -> Vec<BoundaryRow> {
    let dx = problem.dx();
    let mut rows = Vec::new();
    for lead in [Lead::Left, Lead::Right] {
        let basis = problem.basis(lead);
        let b = problem.boundary_column(lead);
        let inner = if lead == Lead::Left { b + 1 } else { b - 1 };
        let outer_idx = problem.column(lead, b);
        let inner_idx = problem.column(lead, inner);
        for m in 0..basis.len() {
            let alpha = stationary_alpha(&problem.units, energy - basis.energies[m], dx);
            let mut entries = Vec::with_capacity(2 * outer_idx.len());
            for (i, &c) in basis.modes[m].iter().enumerate() {
                entries.push((outer_idx[i], C64::new(dx * c, 0.0)));
                entries.push((inner_idx[i], -alpha * dx * c));
            }
            let rhs = if lead == injection && m == 0 { amplitude * (1.0 - alpha * alpha) } else { C64::default() };
            rows.push((outer_idx[m], entries, rhs));
        }
    }
    rows
}

/// Source for an incoming mode-0 wave through absorbing-layer leads.
///
/// `matrix` is the operator the unknowns enter before any row scaling.
pub fn pml_injection_2d(
    problem: &Problem2D,
    matrix: &SparseComplexMatrix,
    lead: Lead,
    k: f64,
    amplitude: f64,
) -> Vec<C64> {
    if amplitude == 0.0 {
        return vec![C64::default(); problem.len()];
    }
    CrossingCoupling::new(matrix, &problem.lead_mask(lead)).source(&problem.incoming_profile(lead, k, amplitude))
}

fn check_injection(problem: &Problem2D, lead: Lead) -> Result<(), WaveguideError> {
    if let Method2D::Pml(_) = problem.method {
        let zoning = problem.grid.axis1().pml().expect("absorbing layout has zoning");
        let h = problem.order.half_width() as f64 * problem.dx();
        let x_b = problem.grid.x1(problem.boundary_column(lead));
        let clear = match lead {
            Lead::Left => x_b - h >= zoning.x_star_l,
            Lead::Right => x_b + h <= zoning.x_star_r,
        };
        if !clear {
            return Err(WaveguideError::Invalid("injection interface lies inside an active absorbing layer".into()));
        }
    }
    Ok(())
}

fn assemble(
    problem: &Problem2D,
    injection: &Injection,
    v: &[f64],
    b: f64,
) -> Result<StationarySystem2D, WaveguideError> {
    let dx = problem.dx();
    let e0 = problem.basis(injection.lead).energies[0];
    let energy = injection.energy + e0;
    let k = injection_k(&problem.units, problem.order, injection.energy, dx)?;
    let n = problem.len();
    let h = problem.hamiltonian_with(v, b);
    let base = h.affine(C64::new(-energy, 0.0), C64::new(1.0, 0.0));
    let scale = if energy.abs() > 0.0 { C64::new(1.0 / energy, 0.0) } else { C64::new(1.0, 0.0) };

    match problem.method {
        Method2D::Closed => Err(WaveguideError::Invalid("scattering states need open boundaries".into())),
        Method2D::Dtbc => {
            let amplitude = injection.amplitude / dx;
            let rows = dtbc_rows_2d(problem, energy, amplitude, injection.lead);
            let mut rhs = vec![C64::default(); n];
            let mut boundary = vec![false; n];
            for (r, _, value) in &rows {
                rhs[*r] = *value;
                boundary[*r] = true;
            }
            let replaced: Vec<(usize, Vec<(usize, C64)>)> = rows.into_iter().map(|(r, e, _)| (r, e)).collect();
            let mut matrix = base.with_rows_replaced(&replaced)?;
            matrix.scale_rows(|i| (!boundary[i]).then_some(scale));
            Ok(StationarySystem2D { matrix, rhs, energy, k, amplitude })
        }
        Method2D::Pml(_) => {
            check_injection(problem, injection.lead)?;
            let mut rhs = pml_injection_2d(problem, &base, injection.lead, k, injection.amplitude);
            rhs.iter_mut().for_each(|x| *x *= scale);
            let mut matrix = base;
            matrix.scale_rows(|_| Some(scale));
            Ok(StationarySystem2D { matrix, rhs, energy, k, amplitude: injection.amplitude })
        }
    }
}

/// Builds the stationary system with V and B0 frozen at time `t`.
pub fn assemble_stationary_2d(
    problem: &Problem2D,
    injection: &Injection,
    t: f64,
) -> Result<StationarySystem2D, WaveguideError> {
    assemble(problem, injection, &problem.potential_at(t), problem.field_strength(t))
}

fn solve_with(
    problem: &Problem2D,
    injection: &Injection,
    v: &[f64],
    b: f64,
) -> Result<ScatteringSolution2D, WaveguideError> {
    let sys = assemble(problem, injection, v, b)?;
    let mut u = lu_solve(&sys.matrix, &sys.rhs)?;
    let norm = injection.amplitude / sys.amplitude;
    u.iter_mut().for_each(|x| *x *= norm);
    Ok(ScatteringSolution2D { field: ComplexField::new(u), energy: sys.energy, k: sys.k, lead: injection.lead })
}

/// Stationary scattering state with V and B0 frozen at time `t`.
///
/// The returned field carries the incoming wave with the injection's own
/// amplitude, whatever scaling the system used internally.
pub fn solve_scattering_2d(
    problem: &Problem2D,
    injection: &Injection,
    t: f64,
) -> Result<ScatteringSolution2D, WaveguideError> {
    solve_with(problem, injection, &problem.potential_at(t), problem.field_strength(t))
}

fn velocity(order: StencilOrder, k: f64, dx: f64) -> f64 {
    match order {
        StencilOrder::Second => (k * dx).sin() / dx,
        _ => k,
    }
}

/// Transmitted mode-0 amplitude at the far contact and the transmission
/// probability for an incident wave of amplitude `amplitude`.
pub fn transmission(
    problem: &Problem2D,
    values: &[C64],
    injection: &Injection,
) -> Result<(C64, f64), WaveguideError> {
    let energy = injection.energy + problem.basis(injection.lead).energies[0];
    for lead in [Lead::Left, Lead::Right] {
        let modes = problem.basis(lead).propagating(energy);
        if modes > 1 {
            return Err(WaveguideError::MultiMode { lead, modes });
        }
    }
    let out = other(injection.lead);
    let basis = problem.basis(out);
    if basis.propagating(energy) == 0 {
        return Ok((C64::default(), 0.0));
    }
    let column: Vec<C64> = problem.column(out, problem.boundary_column(out)).iter().map(|&r| values[r]).collect();
    let c = basis.coefficient(0, &column);
    let dx = problem.dx();
    let k_in = injection_k(&problem.units, problem.order, injection.energy, dx)?;
    let k_out = injection_k(&problem.units, problem.order, energy - basis.energies[0], dx)?;
    let ratio = velocity(problem.order, k_out, dx) / velocity(problem.order, k_in, dx);
    Ok((c, ratio * c.norm_sqr() / (injection.amplitude * injection.amplitude)))
}

/// Transmission at fixed kinetic energy for each enclosed flux, given in
/// flux quanta. Points are solved in parallel.
pub fn flux_sweep(problem: &Problem2D, e_kin: f64, fluxes: &[f64]) -> Result<Vec<(f64, f64)>, WaveguideError> {
    let field = problem
        .magnetic
        .as_ref()
        .ok_or_else(|| WaveguideError::Invalid("flux sweep needs a magnetic field".into()))?;
    let v = problem.potential_at(0.0);
    let injection = Injection::left(e_kin);
    let phi0 = problem.units.flux_quantum();
    fluxes
        .par_iter()
        .map(|&q| {
            let b = field.tesla_for_flux(q * phi0);
            let s = solve_with(problem, &injection, &v, b)?;
            Ok((q, transmission(problem, &s.field.values, &injection)?.1))
        })
        .collect()
}

/// The `count` eigenpairs of the hard-walled Hamiltonian closest to `shift`.
pub fn bound_states(problem: &Problem2D, shift: f64, count: usize) -> Result<EigenPairs, WaveguideError> {
    if problem.method != Method2D::Closed {
        return Err(WaveguideError::Invalid("bound states are computed on a hard-walled device".into()));
    }
    Ok(shift_invert_eigs(&problem.hamiltonian(0.0), shift, count)?)
}
