//! Background medium, investigation-domain grid, contrast samples and the
//! transmitter/receiver layout.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Vacuum permittivity (F/m).
pub const EPSILON_0: f64 = 8.854_187_812_8e-12;
/// Vacuum permeability (H/m).
pub const MU_0: f64 = 1.256_637_062_12e-6;

/// A point in the imaging plane, metres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }

    /// Rotates about the origin by `angle` radians.
    pub fn rotated(&self, angle: f64) -> Point {
        let (s, c) = angle.sin_cos();
        Point::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }
}

/// Homogeneous lossless background.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BackgroundMedium {
    pub permittivity: f64,
    pub permeability: f64,
    pub frequency: f64,
}

impl BackgroundMedium {
    pub fn new(permittivity: f64, permeability: f64, frequency: f64) -> Result<Self> {
        let finite_pos = |v: f64| v.is_finite() && v > 0.0;
        if !finite_pos(permittivity) || !finite_pos(permeability) || !finite_pos(frequency) {
            return Err(Error::invalid(format!(
                "medium parameters must be positive and finite \
                 (eps={permittivity}, mu={permeability}, f={frequency})"
            )));
        }
        Ok(BackgroundMedium {
            permittivity,
            permeability,
            frequency,
        })
    }

    /// Free space at `frequency` Hz.
    pub fn vacuum(frequency: f64) -> Result<Self> {
        Self::new(EPSILON_0, MU_0, frequency)
    }

    pub fn angular_frequency(&self) -> f64 {
        2.0 * PI * self.frequency
    }

    pub fn wavenumber(&self) -> f64 {
        self.angular_frequency() * (self.permittivity * self.permeability).sqrt()
    }

    pub fn wavelength(&self) -> f64 {
        2.0 * PI / self.wavenumber()
    }
}

/// One square cell of the grid. The pulse basis function of the cell is its
/// indicator with unit amplitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub center: Point,
    pub area: f64,
}

impl Cell {
    pub fn side(&self) -> f64 {
        self.area.sqrt()
    }

    /// Radius of the disc with the same area as the cell.
    pub fn equivalent_radius(&self) -> f64 {
        (self.area / PI).sqrt()
    }
}

/// Square investigation domain `[-L/2, L/2]^2` split into `n_side^2` cells.
///
/// Cells are numbered row-major: index `row * n_side + col`, with row 0 at
/// the top (largest `y`) and column 0 at the left (smallest `x`), so the
/// index order matches image raster order.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    side_length: f64,
    n_side: usize,
    cells: Vec<Cell>,
}

impl Grid {
    pub fn new(side_length: f64, n_side: usize) -> Result<Self> {
        if !(side_length.is_finite() && side_length > 0.0) {
            return Err(Error::invalid(format!(
                "grid side length must be positive, got {side_length}"
            )));
        }
        if n_side == 0 {
            return Err(Error::invalid("grid needs at least one cell per side"));
        }
        let h = side_length / n_side as f64;
        let area = h * h;
        let half = 0.5 * side_length;
        let cells = (0..n_side)
            .flat_map(|row| {
                (0..n_side).map(move |col| Cell {
                    center: Point::new(
                        -half + (col as f64 + 0.5) * h,
                        half - (row as f64 + 0.5) * h,
                    ),
                    area,
                })
            })
            .collect();
        Ok(Grid {
            side_length,
            n_side,
            cells,
        })
    }

    pub fn side_length(&self) -> f64 {
        self.side_length
    }

    pub fn n_side(&self) -> usize {
        self.n_side
    }

    /// Total number of cells `N`.
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cell_side(&self) -> f64 {
        self.side_length / self.n_side as f64
    }

    pub fn cell_area(&self) -> f64 {
        let h = self.cell_side();
        h * h
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn cell(&self, index: usize) -> &Cell {
        &self.cells[index]
    }

    pub fn row_col(&self, index: usize) -> (usize, usize) {
        (index / self.n_side, index % self.n_side)
    }

    /// True when `p` lies in the closed domain square.
    pub fn contains(&self, p: &Point) -> bool {
        let half = 0.5 * self.side_length;
        p.x.abs() <= half && p.y.abs() <= half
    }

    /// Radius of the circle circumscribing the domain.
    pub fn circumradius(&self) -> f64 {
        self.side_length * std::f64::consts::FRAC_1_SQRT_2
    }
}

/// Builds the square-cell grid of an `side_length x side_length` domain.
pub fn build_grid(side_length: f64, n_side: usize) -> Result<Grid> {
    Grid::new(side_length, n_side)
}

/// Real relative-contrast samples, one per grid cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ContrastVector {
    values: Vec<f64>,
}

impl ContrastVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("contrast entry {i} is not finite")));
        }
        Ok(ContrastVector { values })
    }

    pub fn zeros(n: usize) -> Self {
        ContrastVector { values: vec![0.0; n] }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Indices of the non-zero samples, ascending.
    pub fn support(&self) -> Vec<usize> {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn scaled(&self, factor: f64) -> ContrastVector {
        ContrastVector {
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// Number of non-zero samples `k`.
pub fn sparsity(v: &ContrastVector) -> usize {
    v.values.iter().filter(|x| **x != 0.0).count()
}

/// Transmitter and receiver positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorLayout {
    pub transmitters: Vec<Point>,
    pub receivers: Vec<Point>,
    pub circle_radius: f64,
}

impl SensorLayout {
    /// Explicit positions; every sensor must sit outside the domain square.
    pub fn custom(
        transmitters: Vec<Point>,
        receivers: Vec<Point>,
        grid: &Grid,
    ) -> Result<SensorLayout> {
        if transmitters.is_empty() || receivers.is_empty() {
            return Err(Error::invalid("need at least one transmitter and one receiver"));
        }
        if let Some(p) = transmitters
            .iter()
            .chain(receivers.iter())
            .find(|p| grid.contains(p))
        {
            return Err(Error::invalid(format!(
                "sensor at ({}, {}) lies inside the investigation domain",
                p.x, p.y
            )));
        }
        let circle_radius = transmitters
            .iter()
            .chain(receivers.iter())
            .map(Point::norm)
            .fold(0.0, f64::max);
        Ok(SensorLayout {
            transmitters,
            receivers,
            circle_radius,
        })
    }

    pub fn n_transmitters(&self) -> usize {
        self.transmitters.len()
    }

    pub fn n_receivers(&self) -> usize {
        self.receivers.len()
    }

    /// Number of stacked measurements `N^T * N^R`.
    pub fn n_measurements(&self) -> usize {
        self.transmitters.len() * self.receivers.len()
    }
}

/// Places `n_t` transmitters and `n_r` receivers at equal angular spacing on
/// a circle of `radius` metres centred on the domain. Sensor `i` sits at
/// angle `2 pi i / n`.
pub fn place_sensors(n_t: usize, n_r: usize, radius: f64, grid: &Grid) -> Result<SensorLayout> {
    if n_t == 0 || n_r == 0 {
        return Err(Error::invalid("need at least one transmitter and one receiver"));
    }
    if !(radius.is_finite() && radius > grid.circumradius()) {
        return Err(Error::invalid(format!(
            "sensor radius {radius} m does not clear the domain (circumradius {:.4} m)",
            grid.circumradius()
        )));
    }
    let ring = |n: usize| -> Vec<Point> {
        (0..n)
            .map(|i| {
                let a = 2.0 * PI * i as f64 / n as f64;
                Point::new(radius * a.cos(), radius * a.sin())
            })
            .collect()
    };
    Ok(SensorLayout {
        transmitters: ring(n_t),
        receivers: ring(n_r),
        circle_radius: radius,
    })
}
