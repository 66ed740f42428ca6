//! Cell-centered radial grid and cell fields.
//!
//! The interval `[0, R]` is split into `N` equal cells. Cell `i` spans the
//! faces `i·h` and `(i+1)·h` and carries the radial volume
//! `(s_{i+1/2}^n − s_{i−1/2}^n)/n`, i.e. the true volume of the spherical
//! shell divided by the sphere measure σₙ. Face `i` carries the weight
//! `s_i^{n−1}`, which vanishes at the origin, so the coordinate singularity of
//! the radial operator never shows up in an assembled coefficient.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest admissible number of cells.
pub const MIN_CELLS: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    dim: u32,
    radius: f64,
    h: f64,
    centers: Vec<f64>,
    faces: Vec<f64>,
    volumes: Vec<f64>,
    weights: Vec<f64>,
}

impl RadialGrid {
    pub fn new(cells: usize, radius: f64, dim: u32) -> Result<Self> {
        if cells < MIN_CELLS {
            return Err(Error::config("N", format!("N ≥ {MIN_CELLS} (got {cells})")));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::config("R", format!("R > 0 (got {radius})")));
        }
        if dim < 1 {
            return Err(Error::config("n", "n ≥ 1"));
        }
        let h = radius / cells as f64;
        let nf = dim as f64;
        let faces: Vec<f64> = (0..=cells)
            .map(|i| if i == cells { radius } else { i as f64 * h })
            .collect();
        let centers = (0..cells).map(|i| (i as f64 + 0.5) * h).collect();
        let weights = faces
            .iter()
            .enumerate()
            .map(|(i, &f)| if i == 0 { 0.0 } else { f.powi(dim as i32 - 1) })
            .collect();
        let volumes = faces
            .windows(2)
            .map(|w| (w[1].powi(dim as i32) - w[0].powi(dim as i32)) / nf)
            .collect();
        Ok(Self {
            dim,
            radius,
            h,
            centers,
            faces,
            volumes,
            weights,
        })
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn dim(&self) -> u32 {
        self.dim
    }

    /// The dimension as a float, for exponents.
    pub fn n(&self) -> f64 {
        f64::from(self.dim)
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Cell width.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    /// Face radii, `N + 1` entries starting at the origin.
    pub fn faces(&self) -> &[f64] {
        &self.faces
    }

    /// Radial cell volumes `∫ s^{n−1} ds` over each cell.
    pub fn volumes(&self) -> &[f64] {
        &self.volumes
    }

    /// Face weights `s^{n−1}`; zero at the origin face.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Total radial mass `Σ volᵢ uᵢ` of a field.
    pub fn radial_mass(&self, field: &Field) -> f64 {
        self.volumes
            .iter()
            .zip(field.values())
            .map(|(v, u)| v * u)
            .sum()
    }
}

/// Cell-averaged scalar field on a [`RadialGrid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field(Vec<f64>);

impl Field {
    pub fn new(values: Vec<f64>) -> Self {
        Field(values)
    }

    pub fn constant(len: usize, value: f64) -> Self {
        Field(vec![value; len])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    /// Validates length against a grid.
    pub fn check_len(&self, grid: &RadialGrid) -> Result<()> {
        if self.len() != grid.len() {
            return Err(Error::Domain(format!(
                "field has {} entries, grid has {} cells",
                self.len(),
                grid.len()
            )));
        }
        Ok(())
    }
}
