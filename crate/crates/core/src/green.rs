//! Integrals of the 2D free-space Green function `G(r, r') = H0^(2)(k0|r-r'|)/(4j)`
//! over square cells, the receiver and domain Green matrices, and the
//! line-source incident field.
//!
//! Each square cell is replaced by the disc of equal area (radius `a`).
//! Over that disc the integral of `H0^(2)(k0|r - r'|)` has closed forms:
//!
//! ```text
//! rho >= a : (2 pi a / k0) J1(k0 a) H0(k0 rho)
//! rho <  a : (2 pi a / k0) J0(k0 rho) H1(k0 a) - 4j / k0^2
//! ```
//!
//! where `rho` is the distance from the observation point to the cell centre.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{BackgroundMedium, Cell, Grid, Point, SensorLayout};
use crate::special::{bessel01, hankel2_0};

const J: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Point-to-point Green function `H0^(2)(k0 r)/(4j)`.
pub fn green_function(obs: &Point, src: &Point, k0: f64) -> Result<Complex64> {
    let r = obs.distance(src);
    Ok(hankel2_0(k0 * r)? / (4.0 * J))
}

/// `∫_cell G(obs, r') ds'` with the equal-area-disc closed forms.
pub fn cell_green_integral(obs: &Point, cell: &Cell, k0: f64) -> Result<Complex64> {
    if !(k0.is_finite() && k0 > 0.0) {
        return Err(Error::invalid(format!("wavenumber must be positive, got {k0}")));
    }
    let a = cell.equivalent_radius();
    let rho = obs.distance(&cell.center);
    let ka = bessel01(k0 * a)?;
    let h0_integral = if rho >= a {
        2.0 * std::f64::consts::PI * a / k0 * ka.j1 * hankel2_0(k0 * rho)?
    } else {
        let j0_rho = crate::special::j0(k0 * rho);
        2.0 * std::f64::consts::PI * a / k0 * j0_rho * ka.hankel2_1() - 4.0 * J / (k0 * k0)
    };
    Ok(h0_integral / (4.0 * J))
}

/// `Gbar`: receivers x cells, entries `k0^2 ∫_{S_n} G(r_m^R, r') ds'`.
#[derive(Debug, Clone, PartialEq)]
pub struct GreenReceiverMatrix {
    pub matrix: DMatrix<Complex64>,
}

impl GreenReceiverMatrix {
    pub fn nrows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.matrix.ncols()
    }
}

/// Green factors for a cell size, reused by every entry that shares it.
#[derive(Debug, Clone, Copy)]
struct DiscFactors {
    k0: f64,
    radius: f64,
    /// `k0^2 * (2 pi a / k0) J1(k0 a) / (4j)`, multiplies `H0(k0 rho)`.
    outside: Complex64,
    /// `k0^2 ∫_cell G(center, r') ds'`.
    self_term: Complex64,
}

impl DiscFactors {
    fn new(k0: f64, area: f64) -> Result<Self> {
        if !(k0.is_finite() && k0 > 0.0) {
            return Err(Error::invalid(format!("wavenumber must be positive, got {k0}")));
        }
        let radius = (area / std::f64::consts::PI).sqrt();
        let b = bessel01(k0 * radius)?;
        let pi = std::f64::consts::PI;
        let outside = k0 * 2.0 * pi * radius * b.j1 / (4.0 * J);
        let self_term = (k0 * 2.0 * pi * radius * b.hankel2_1() - 4.0 * J) / (4.0 * J);
        Ok(DiscFactors {
            k0,
            radius,
            outside,
            self_term,
        })
    }

    fn entry(&self, obs: &Point, center: &Point) -> Result<Complex64> {
        let rho = obs.distance(center);
        if rho == 0.0 {
            Ok(self.self_term)
        } else if rho >= self.radius {
            Ok(self.outside * hankel2_0(self.k0 * rho)?)
        } else {
            Err(Error::invalid(format!(
                "observation point ({}, {}) lies inside a cell but off its centre",
                obs.x, obs.y
            )))
        }
    }
}

/// Assembles `Gbar` for every receiver against every cell.
pub fn assemble_receiver_green(
    grid: &Grid,
    sensors: &SensorLayout,
    medium: &BackgroundMedium,
) -> Result<GreenReceiverMatrix> {
    let cols: Vec<usize> = (0..grid.len()).collect();
    receiver_green_columns(grid, &sensors.receivers, medium, &cols)
}

/// `Gbar` restricted to the listed cell columns.
pub(crate) fn receiver_green_columns(
    grid: &Grid,
    receivers: &[Point],
    medium: &BackgroundMedium,
    cols: &[usize],
) -> Result<GreenReceiverMatrix> {
    if let Some(p) = receivers.iter().find(|p| grid.contains(p)) {
        return Err(Error::invalid(format!(
            "receiver at ({}, {}) lies inside the investigation domain",
            p.x, p.y
        )));
    }
    let factors = DiscFactors::new(medium.wavenumber(), grid.cell_area())?;
    let columns: Vec<Vec<Complex64>> = cols
        .par_iter()
        .map(|&n| {
            let c = grid.cell(n).center;
            receivers
                .iter()
                .map(|r| factors.entry(r, &c))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let nr = receivers.len();
    let matrix = DMatrix::from_fn(nr, cols.len(), |m, j| columns[j][m]);
    Ok(GreenReceiverMatrix { matrix })
}

/// Cell-to-cell interaction operator `Gd`, entries
/// `k0^2 ∫_{S_n} G(r_m, r') ds'`, evaluated on demand.
///
/// All cells are congruent, so entries depend only on the lattice offset
/// `(|drow|, |dcol|)`; one value per offset is tabulated up front and the
/// matrix is exactly symmetric.
#[derive(Debug, Clone)]
pub struct GreenDomainMatrix {
    grid: Grid,
    factors: DiscFactors,
    /// Indexed by `drow * n_side + dcol`.
    offsets: Vec<Complex64>,
}

impl GreenDomainMatrix {
    pub fn new(grid: &Grid, medium: &BackgroundMedium) -> Result<Self> {
        let factors = DiscFactors::new(medium.wavenumber(), grid.cell_area())?;
        let n = grid.n_side();
        let h = grid.cell_side();
        let offsets = (0..n * n)
            .into_par_iter()
            .map(|i| {
                let (dr, dc) = ((i / n) as f64, (i % n) as f64);
                if i == 0 {
                    Ok(factors.self_term)
                } else {
                    factors.entry(&Point::new(h * dc, h * dr), &Point::new(0.0, 0.0))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(GreenDomainMatrix {
            grid: grid.clone(),
            factors,
            offsets,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Diagonal (self-cell) entry, shared by all cells.
    pub fn self_term(&self) -> Complex64 {
        self.factors.self_term
    }

    pub fn entry(&self, m: usize, n: usize) -> Complex64 {
        let (rm, cm) = self.grid.row_col(m);
        let (rn, cn) = self.grid.row_col(n);
        self.offsets[rm.abs_diff(rn) * self.grid.n_side() + cm.abs_diff(cn)]
    }

    /// Dense block `Gd[rows, cols]`.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> DMatrix<Complex64> {
        let columns: Vec<Vec<Complex64>> = cols
            .par_iter()
            .map(|&n| rows.iter().map(|&m| self.entry(m, n)).collect())
            .collect();
        DMatrix::from_fn(rows.len(), cols.len(), |i, j| columns[j][i])
    }

    /// The full `N x N` matrix. Quadratic memory; meant for small grids.
    pub fn dense(&self) -> DMatrix<Complex64> {
        let all: Vec<usize> = (0..self.len()).collect();
        self.submatrix(&all, &all)
    }
}

/// Field samples at cell centres or receivers (unit-strength source).
pub type FieldVector = nalgebra::DVector<Complex64>;

/// Incident field of a unit line source at `tx`, sampled at the cell centres:
/// `H0^(2)(k0 |r_n - tx|) / (4j)`.
pub fn incident_field(tx: &Point, grid: &Grid, medium: &BackgroundMedium) -> Result<FieldVector> {
    incident_field_at(tx, grid, medium, &(0..grid.len()).collect::<Vec<_>>())
}

/// Incident field restricted to the listed cells.
pub(crate) fn incident_field_at(
    tx: &Point,
    grid: &Grid,
    medium: &BackgroundMedium,
    cells: &[usize],
) -> Result<FieldVector> {
    let k0 = medium.wavenumber();
    let values = cells
        .iter()
        .map(|&n| {
            let c = grid.cell(n).center;
            if c.distance(tx) == 0.0 {
                return Err(Error::Domain(format!(
                    "transmitter at ({}, {}) coincides with cell centre {n}",
                    tx.x, tx.y
                )));
            }
            green_function(&c, tx, k0)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FieldVector::from_vec(values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_grid, place_sensors};

    fn medium() -> BackgroundMedium {
        BackgroundMedium::vacuum(100e6).unwrap()
    }

    #[test]
    fn single_entry_is_scaled_cell_integral() {
        let g = build_grid(0.1, 1).unwrap();
        let s = SensorLayout::custom(vec![Point::new(3.0, 0.0)], vec![Point::new(0.0, 2.5)], &g)
            .unwrap();
        let m = medium();
        let gr = assemble_receiver_green(&g, &s, &m).unwrap();
        assert_eq!((gr.nrows(), gr.ncols()), (1, 1));
        let k0 = m.wavenumber();
        let expected = k0 * k0 * cell_green_integral(&s.receivers[0], g.cell(0), k0).unwrap();
        assert!((gr.matrix[(0, 0)] - expected).norm() < 1e-15 * expected.norm());
    }

    #[test]
    fn small_cell_limit_is_centroid_rule() {
        let k0 = medium().wavenumber();
        let cell = Cell {
            center: Point::new(0.0, 0.0),
            area: 1e-8,
        };
        let obs = Point::new(1.3, -0.4);
        let v = cell_green_integral(&obs, &cell, k0).unwrap();
        let centroid = cell.area * green_function(&obs, &cell.center, k0).unwrap();
        // Leading correction is -(k0 a)^2 / 8.
        let ka = k0 * cell.equivalent_radius();
        assert!((v / centroid - 1.0).norm() < ka * ka / 4.0);
    }

    #[test]
    fn domain_matrix_symmetric_and_finite() {
        let g = build_grid(1.0, 6).unwrap();
        let gd = GreenDomainMatrix::new(&g, &medium()).unwrap();
        let d = gd.dense();
        for i in 0..g.len() {
            assert!(d[(i, i)].re.is_finite() && d[(i, i)].im.is_finite());
            for j in 0..g.len() {
                assert_eq!(d[(i, j)], d[(j, i)]);
            }
        }
    }

    #[test]
    fn incident_field_radial_symmetry_and_decay() {
        let g = build_grid(2.0, 28).unwrap();
        let m = medium();
        let tx = Point::new(0.0, 0.0 + 4.0);
        let e = incident_field(&tx, &g, &m).unwrap();
        // Cells mirrored in x are equidistant from a transmitter on the y axis.
        let n = g.n_side();
        for row in 0..n {
            for col in 0..n / 2 {
                let a = e[row * n + col];
                let b = e[row * n + (n - 1 - col)];
                assert!((a - b).norm() <= 1e-13 * a.norm());
            }
        }
        // Per-cell recomputation.
        for (i, c) in g.cells().iter().enumerate() {
            let direct = hankel2_0(m.wavenumber() * c.center.distance(&tx)).unwrap() / (4.0 * J);
            assert_eq!(e[i], direct);
        }
    }

    #[test]
    fn incident_field_at_cell_centre_is_domain_error() {
        let g = build_grid(2.0, 2).unwrap();
        let tx = g.cell(0).center;
        assert!(matches!(incident_field(&tx, &g, &medium()), Err(Error::Domain(_))));
    }

    #[test]
    fn receiver_inside_domain_rejected() {
        let g = build_grid(2.0, 4).unwrap();
        let mut s = place_sensors(4, 4, 4.0, &g).unwrap();
        s.receivers[0] = Point::new(0.1, 0.1);
        assert!(assemble_receiver_green(&g, &s, &medium()).is_err());
    }
}
