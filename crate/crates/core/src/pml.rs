//! Complex coordinate stretching for perfectly matched layers.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{Grid1D, PmlZoning};
use crate::linalg::TripletBuilder;
use crate::stencils::{d1, d2, Closure, OperatorMatrix, StencilError, StencilOrder};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PmlError {
    #[error("grid has no absorbing-layer zoning")]
    MissingZoning,
    #[error(transparent)]
    Stencil(#[from] StencilError),
}

/// Absorption settings shared by every layer of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PmlSettings {
    /// Strength in nm^-p.
    pub sigma0: f64,
    pub power: i32,
    pub layer_width: f64,
    pub end: Closure,
}

impl Default for PmlSettings {
    fn default() -> Self {
        Self { sigma0: 0.02, power: 3, layer_width: 40.0, end: Closure::Neumann }
    }
}

/// σ(x) and the stretch factor c(x) = 1/(1 + e^{iπ/4}σ(x)).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PmlProfile {
    pub sigma0: f64,
    pub power: i32,
    pub x_star_l: f64,
    pub x_star_r: f64,
    pub end: Closure,
}

fn rotation() -> C64 {
    C64::from_polar(1.0, std::f64::consts::FRAC_PI_4)
}

impl PmlProfile {
    pub fn new(settings: &PmlSettings, zoning: &PmlZoning) -> Self {
        Self {
            sigma0: settings.sigma0,
            power: settings.power,
            x_star_l: zoning.x_star_l,
            x_star_r: zoning.x_star_r,
            end: settings.end,
        }
    }

    pub fn sigma(&self, x: f64) -> f64 {
        if x < self.x_star_l {
            self.sigma0 * (self.x_star_l - x).powi(self.power)
        } else if x > self.x_star_r {
            self.sigma0 * (x - self.x_star_r).powi(self.power)
        } else {
            0.0
        }
    }

    pub fn sigma_derivative(&self, x: f64) -> f64 {
        let p = self.power as f64;
        if x < self.x_star_l {
            -p * self.sigma0 * (self.x_star_l - x).powi(self.power - 1)
        } else if x > self.x_star_r {
            p * self.sigma0 * (x - self.x_star_r).powi(self.power - 1)
        } else {
            0.0
        }
    }

    pub fn stretch_factor(&self, x: f64) -> C64 {
        1.0 / (1.0 + rotation() * self.sigma(x))
    }

    /// c'(x) = −e^{iπ/4} σ'(x) c(x)².
    pub fn stretch_derivative(&self, x: f64) -> C64 {
        let c = self.stretch_factor(x);
        -rotation() * self.sigma_derivative(x) * c * c
    }
}

/// diag(c·c')·D¹ + diag(c²)·D² on a zoned grid.
pub fn build_stretched_d2(profile: &PmlProfile, order: StencilOrder, grid: &Grid1D) -> Result<OperatorMatrix, PmlError> {
    if grid.pml().is_none() {
        return Err(PmlError::MissingZoning);
    }
    let n = grid.len();
    let first = d1(order, grid.dx(), n, profile.end)?;
    let second = d2(order, grid.dx(), n, profile.end)?;
    let mut b = TripletBuilder::with_capacity(n, second.matrix.nnz() * 2);
    for i in 0..n {
        let x = grid.x(i);
        let c = profile.stretch_factor(x);
        let a = c * profile.stretch_derivative(x);
        let c2 = c * c;
        let (cols, vals) = second.matrix.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            b.push(i, j, c2 * v);
        }
        let (cols, vals) = first.matrix.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            b.push(i, j, a * v);
        }
    }
    Ok(OperatorMatrix { matrix: b.finalize().expect("stencil indices in range"), order, closure: profile.end })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid_1d, BoundaryLayout};

    fn setup(sigma0: f64) -> (Grid1D, PmlProfile) {
        let g = build_grid_1d(120.0, 0.5, BoundaryLayout::pml(40.0, 0.5)).unwrap();
        let s = PmlSettings { sigma0, ..PmlSettings::default() };
        let p = PmlProfile::new(&s, g.pml().unwrap());
        (g, p)
    }

    #[test]
    fn stretch_values() {
        let (_, p) = setup(0.02);
        assert_eq!(p.stretch_factor(60.0), C64::new(1.0, 0.0));
        let expect = 1.0 / (1.0 + rotation() * 0.02 * 40f64.powi(3));
        assert!((p.stretch_factor(161.0) - expect).norm() < 1e-15);
        assert!(p.stretch_factor(1e6).norm() < 1e-15);
    }

    #[test]
    fn derivative_matches_difference_quotient() {
        let (_, p) = setup(0.02);
        for x in [-30.0, -5.0, 130.0, 150.0] {
            let h = 1e-5;
            let fd = (p.stretch_factor(x + h) - p.stretch_factor(x - h)) / (2.0 * h);
            assert!((fd - p.stretch_derivative(x)).norm() < 1e-8 * (1.0 + fd.norm()));
        }
    }

    #[test]
    fn zero_strength_is_plain_operator() {
        let (g, p) = setup(0.0);
        for order in StencilOrder::ALL {
            let s = build_stretched_d2(&p, order, &g).unwrap();
            let plain = d2(order, g.dx(), g.len(), Closure::Neumann).unwrap();
            assert_eq!(s.matrix.row_ptr(), plain.matrix.row_ptr());
            for (a, b) in s.matrix.values().iter().zip(plain.matrix.values()) {
                assert_eq!(a.re.to_bits(), b.re.to_bits());
                assert_eq!(a.im, 0.0);
            }
        }
    }

    #[test]
    fn device_rows_unchanged() {
        let (g, p) = setup(0.02);
        let s = build_stretched_d2(&p, StencilOrder::Sixth, &g).unwrap();
        let plain = d2(StencilOrder::Sixth, g.dx(), g.len(), Closure::Neumann).unwrap();
        for i in g.device_lo() - 2..=g.device_hi() + 2 {
            let (c1, v1) = s.matrix.row(i);
            let (c2, v2) = plain.matrix.row(i);
            assert_eq!(c1, c2);
            assert_eq!(v1, v2);
        }
    }

    #[test]
    fn missing_zoning() {
        let g = build_grid_1d(10.0, 0.5, BoundaryLayout::Dtbc).unwrap();
        let (_, p) = setup(0.02);
        assert_eq!(build_stretched_d2(&p, StencilOrder::Second, &g).unwrap_err(), PmlError::MissingZoning);
    }
}
