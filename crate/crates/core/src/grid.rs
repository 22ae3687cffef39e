//! Equidistant meshes with device and absorbing-layer zoning, plus the
//! reduced two-dimensional mesh that drops points under a high potential.

use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("grid spacing must be positive, got {0}")]
    NonPositiveSpacing(f64),
    #[error("{name} = {value} nm is not a multiple of dx = {dx} nm (remainder {remainder:.6e} nm)")]
    NotCommensurate { name: &'static str, value: f64, dx: f64, remainder: f64 },
    #[error("layer onset offset {offset} nm is closer than 2·dx = {min} nm to the device")]
    OnsetTooClose { offset: f64, min: f64 },
    #[error("absorbing layer width must be positive, got {0}")]
    NonPositiveLayer(f64),
    #[error("retained transverse points in lead column {column} are not contiguous")]
    DisconnectedLead { column: usize },
    #[error("retained transverse points differ between lead columns {a} and {b}")]
    LeadMismatch { a: usize, b: usize },
    #[error("device width {0} nm leaves no interior transverse point")]
    TooNarrow(f64),
    #[error("no transverse point survives in lead column {column}")]
    EmptyLead { column: usize },
}

/// How the device is closed along x (or x1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BoundaryLayout {
    /// Grid spans exactly the device.
    Dtbc,
    /// Device padded by `onset_offset` of plain grid and a layer of width
    /// `layer_width` on each side.
    Pml { layer_width: f64, onset_offset: f64 },
}

impl BoundaryLayout {
    /// Absorbing layer with the default onset two cells outside the device.
    pub fn pml(layer_width: f64, dx: f64) -> Self {
        Self::Pml { layer_width, onset_offset: 2.0 * dx }
    }
}

/// Onsets and width of the absorbing layers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PmlZoning {
    pub x_star_l: f64,
    pub x_star_r: f64,
    pub layer_width: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid1D {
    x0: f64,
    dx: f64,
    n_points: usize,
    device: (usize, usize),
    pml: Option<PmlZoning>,
}

fn steps(name: &'static str, value: f64, dx: f64) -> Result<usize, GridError> {
    let r = value / dx;
    let n = r.round();
    if (r - n).abs() > 1e-9 * r.abs().max(1.0) || n < 0.0 {
        return Err(GridError::NotCommensurate { name, value, dx, remainder: value - r.floor() * dx });
    }
    Ok(n as usize)
}

/// Grid on the device [0, L], optionally padded with absorbing layers.
pub fn build_grid_1d(device_length: f64, dx: f64, layout: BoundaryLayout) -> Result<Grid1D, GridError> {
    if !(dx > 0.0) {
        return Err(GridError::NonPositiveSpacing(dx));
    }
    let cells = steps("device length", device_length, dx)?;
    match layout {
        BoundaryLayout::Dtbc => Ok(Grid1D { x0: 0.0, dx, n_points: cells + 1, device: (0, cells), pml: None }),
        BoundaryLayout::Pml { layer_width, onset_offset } => {
            if !(layer_width > 0.0) {
                return Err(GridError::NonPositiveLayer(layer_width));
            }
            if onset_offset < 2.0 * dx * (1.0 - 1e-12) {
                return Err(GridError::OnsetTooClose { offset: onset_offset, min: 2.0 * dx });
            }
            let pad = steps("layer onset offset", onset_offset, dx)?;
            let layer = steps("layer width", layer_width, dx)?;
            let lo = pad + layer;
            let zoning = PmlZoning {
                x_star_l: -(pad as f64) * dx,
                x_star_r: (cells + pad) as f64 * dx,
                layer_width: layer as f64 * dx,
            };
            Ok(Grid1D {
                x0: -((lo as f64) * dx),
                dx,
                n_points: cells + 2 * lo + 1,
                device: (lo, lo + cells),
                pml: Some(zoning),
            })
        }
    }
}

impl Grid1D {
    /// Plain grid without zoning, e.g. a closed box.
    pub fn uniform(x0: f64, dx: f64, n_points: usize) -> Result<Self, GridError> {
        if !(dx > 0.0) {
            return Err(GridError::NonPositiveSpacing(dx));
        }
        Ok(Self { x0, dx, n_points, device: (0, n_points - 1), pml: None })
    }

    /// The same grid translated by `offset`.
    pub fn shifted(mut self, offset: f64) -> Self {
        self.x0 += offset;
        if let Some(z) = self.pml.as_mut() {
            z.x_star_l += offset;
            z.x_star_r += offset;
        }
        self
    }

    #[inline]
    pub fn dx(&self) -> f64 {
        self.dx
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n_points
    }

    pub fn is_empty(&self) -> bool {
        self.n_points == 0
    }

    #[inline]
    pub fn x(&self, j: usize) -> f64 {
        self.x0 + j as f64 * self.dx
    }

    pub fn coordinates(&self) -> Vec<f64> {
        (0..self.n_points).map(|j| self.x(j)).collect()
    }

    pub fn span(&self) -> (f64, f64) {
        (self.x0, self.x(self.n_points - 1))
    }

    /// Index range of the device [0, L].
    pub fn device(&self) -> RangeInclusive<usize> {
        self.device.0..=self.device.1
    }

    pub fn device_lo(&self) -> usize {
        self.device.0
    }

    pub fn device_hi(&self) -> usize {
        self.device.1
    }

    pub fn device_length(&self) -> f64 {
        (self.device.1 - self.device.0) as f64 * self.dx
    }

    pub fn pml(&self) -> Option<&PmlZoning> {
        self.pml.as_ref()
    }
}

/// Retained transverse index range of one lead.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LeadRange {
    /// Column (x1 index) where the lead meets the device.
    pub column: usize,
    pub j2_lo: usize,
    pub j2_hi: usize,
}

impl LeadRange {
    pub fn len(&self) -> usize {
        self.j2_hi - self.j2_lo + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

const NOT_RETAINED: usize = usize::MAX;

/// Rectangular mesh [x1 zoning] × [0, L2] with equal spacing and an index
/// map onto the retained points, ordered j = j1·n2 + j2.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid2D {
    axis1: Grid1D,
    n2: usize,
    width: f64,
    full_to_reduced: Vec<usize>,
    reduced_to_full: Vec<usize>,
    leads: [LeadRange; 2],
}

pub fn build_grid_2d(length: f64, width: f64, dx: f64, layout: BoundaryLayout) -> Result<Grid2D, GridError> {
    let axis1 = build_grid_1d(length, dx, layout)?;
    let n2 = steps("device width", width, dx)? + 1;
    if n2 < 3 {
        return Err(GridError::TooNarrow(width));
    }
    let leads = [
        LeadRange { column: axis1.device_lo(), j2_lo: 1, j2_hi: n2 - 2 },
        LeadRange { column: axis1.device_hi(), j2_lo: 1, j2_hi: n2 - 2 },
    ];
    let mut grid = Grid2D { axis1, n2, width, full_to_reduced: Vec::new(), reduced_to_full: Vec::new(), leads };
    // the walls x2 = 0 and x2 = L2 carry Dirichlet zeros
    grid.set_retained(|_, j2| j2 > 0 && j2 < n2 - 1);
    Ok(grid)
}

/// Drops points where `potential(x1, x2) > threshold`.
///
/// Lead columns (the exterior plus the first and last device columns) must
/// keep one contiguous, identical transverse range each.
pub fn reduce_mesh(grid: &Grid2D, potential: impl Fn(f64, f64) -> f64, threshold: f64) -> Result<Grid2D, GridError> {
    let n1 = grid.n1();
    let n2 = grid.n2;
    let mut keep = vec![false; n1 * n2];
    for j1 in 0..n1 {
        let x1 = grid.x1(j1);
        for j2 in 0..n2 {
            keep[j1 * n2 + j2] = grid.reduced(j1 * n2 + j2).is_some() && potential(x1, grid.x2(j2)) <= threshold;
        }
    }
    let column_range = |j1: usize| -> Result<(usize, usize), GridError> {
        let col = &keep[j1 * n2..(j1 + 1) * n2];
        let lo = col.iter().position(|&k| k).ok_or(GridError::EmptyLead { column: j1 })?;
        let hi = col.iter().rposition(|&k| k).expect("lo exists");
        if col[lo..=hi].iter().any(|&k| !k) {
            return Err(GridError::DisconnectedLead { column: j1 });
        }
        Ok((lo, hi))
    };
    let (lo, hi) = (grid.axis1.device_lo(), grid.axis1.device_hi());
    let mut leads = grid.leads;
    for (side, columns) in [(0usize, (0..=lo + 1).collect::<Vec<_>>()), (1, (hi - 1..n1).collect())] {
        let anchor = leads[side].column;
        let (a, b) = column_range(anchor)?;
        for &c in &columns {
            if column_range(c)? != (a, b) {
                return Err(GridError::LeadMismatch { a: anchor, b: c });
            }
        }
        leads[side].j2_lo = a;
        leads[side].j2_hi = b;
    }
    let mut out = Grid2D { leads, ..grid.clone() };
    out.set_retained(|j1, j2| keep[j1 * n2 + j2]);
    Ok(out)
}

impl Grid2D {
    fn set_retained(&mut self, keep: impl Fn(usize, usize) -> bool) {
        let n = self.full_len();
        self.full_to_reduced = vec![NOT_RETAINED; n];
        self.reduced_to_full.clear();
        for j in 0..n {
            if keep(j / self.n2, j % self.n2) {
                self.full_to_reduced[j] = self.reduced_to_full.len();
                self.reduced_to_full.push(j);
            }
        }
    }

    pub fn axis1(&self) -> &Grid1D {
        &self.axis1
    }

    #[inline]
    pub fn dx(&self) -> f64 {
        self.axis1.dx()
    }

    pub fn n1(&self) -> usize {
        self.axis1.len()
    }

    pub fn n2(&self) -> usize {
        self.n2
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn full_len(&self) -> usize {
        self.n1() * self.n2
    }

    /// Number of retained unknowns.
    pub fn len(&self) -> usize {
        self.reduced_to_full.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reduced_to_full.is_empty()
    }

    #[inline]
    pub fn x1(&self, j1: usize) -> f64 {
        self.axis1.x(j1)
    }

    #[inline]
    pub fn x2(&self, j2: usize) -> f64 {
        j2 as f64 * self.dx()
    }

    #[inline]
    pub fn full_index(&self, j1: usize, j2: usize) -> usize {
        j1 * self.n2 + j2
    }

    /// (j1, j2) of a full index.
    #[inline]
    pub fn split(&self, full: usize) -> (usize, usize) {
        (full / self.n2, full % self.n2)
    }

    #[inline]
    pub fn reduced(&self, full: usize) -> Option<usize> {
        match self.full_to_reduced[full] {
            NOT_RETAINED => None,
            r => Some(r),
        }
    }

    pub fn retained(&self) -> &[usize] {
        &self.reduced_to_full
    }

    pub fn lead(&self, side: usize) -> LeadRange {
        self.leads[side]
    }

    /// Reduced indices of the lead's transverse range at column `j1`.
    pub fn column_indices(&self, j1: usize, lead: LeadRange) -> Vec<usize> {
        (lead.j2_lo..=lead.j2_hi)
            .map(|j2| self.reduced(self.full_index(j1, j2)).expect("lead range is retained"))
            .collect()
    }

    /// Scatters a reduced vector onto the full mesh with zeros elsewhere.
    pub fn expand<T: Copy + Default>(&self, reduced: &[T]) -> Vec<T> {
        let mut out = vec![T::default(); self.full_len()];
        for (r, &f) in self.reduced_to_full.iter().enumerate() {
            out[f] = reduced[r];
        }
        out
    }
}
