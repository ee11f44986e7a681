//! Homogeneous scatterer descriptions, their rasterisation onto a grid and
//! the key/value scene configuration file.
//!
//! A cell belongs to a scatterer when its centre lies strictly inside the
//! shape, so the sparsity of a rasterised scene is an exact integer count.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{place_sensors, BackgroundMedium, ContrastVector, Grid, Point, SensorLayout};

/// A disc (cross-section of a cylinder).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Disc {
    pub center: Point,
    pub radius: f64,
}

impl Disc {
    fn contains(&self, p: &Point) -> bool {
        self.center.distance(p) < self.radius
    }
}

/// Geometry of a homogeneous scatterer. Lengths in metres, angles in radians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Shape {
    /// Small discs around each point.
    PointTargets { points: Vec<Point>, radius: f64 },
    /// Union of discs.
    Cylinders { discs: Vec<Disc> },
    /// Annulus `inner_radius <= |r - center| < outer_radius`.
    Ring {
        center: Point,
        inner_radius: f64,
        outer_radius: f64,
    },
    /// Annulus plus two discs placed symmetrically about the ring's vertical
    /// axis at `(+-disc_offset.x, disc_offset.y)` from the ring centre, then
    /// rotated about the ring centre by `rotation`.
    Austria {
        ring_center: Point,
        ring_inner_radius: f64,
        ring_outer_radius: f64,
        disc_radius: f64,
        disc_offset: Point,
        rotation: f64,
    },
    /// Vertical bar `[0, width] x [0, height]` joined with horizontal bar
    /// `[0, length] x [0, width]`, in a frame anchored at `corner` and rotated
    /// by `rotation`.
    LShape {
        corner: Point,
        length: f64,
        height: f64,
        width: f64,
        rotation: f64,
    },
}

impl Shape {
    pub fn kind(&self) -> SceneKind {
        match self {
            Shape::PointTargets { .. } => SceneKind::PointTargets,
            Shape::Cylinders { .. } => SceneKind::Cylinders,
            Shape::Ring { .. } => SceneKind::Ring,
            Shape::Austria { .. } => SceneKind::Austria,
            Shape::LShape { .. } => SceneKind::LShape,
        }
    }

    fn validate(&self) -> Result<()> {
        let nonneg = |name: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must be finite and >= 0, got {v}")))
            }
        };
        let finite_point = |p: &Point| {
            if p.x.is_finite() && p.y.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid("shape coordinates must be finite"))
            }
        };
        match self {
            Shape::PointTargets { points, radius } => {
                nonneg("point radius", *radius)?;
                points.iter().try_for_each(finite_point)
            }
            Shape::Cylinders { discs } => discs.iter().try_for_each(|d| {
                finite_point(&d.center)?;
                nonneg("disc radius", d.radius)
            }),
            Shape::Ring {
                center,
                inner_radius,
                outer_radius,
            } => {
                finite_point(center)?;
                nonneg("inner radius", *inner_radius)?;
                nonneg("outer radius", *outer_radius)?;
                if inner_radius > outer_radius {
                    return Err(Error::invalid("ring inner radius exceeds outer radius"));
                }
                Ok(())
            }
            Shape::Austria {
                ring_center,
                ring_inner_radius,
                ring_outer_radius,
                disc_radius,
                disc_offset,
                rotation,
            } => {
                finite_point(ring_center)?;
                finite_point(disc_offset)?;
                nonneg("ring inner radius", *ring_inner_radius)?;
                nonneg("ring outer radius", *ring_outer_radius)?;
                nonneg("disc radius", *disc_radius)?;
                if ring_inner_radius > ring_outer_radius {
                    return Err(Error::invalid("ring inner radius exceeds outer radius"));
                }
                if !rotation.is_finite() {
                    return Err(Error::invalid("rotation must be finite"));
                }
                Ok(())
            }
            Shape::LShape {
                corner,
                length,
                height,
                width,
                rotation,
            } => {
                finite_point(corner)?;
                nonneg("length", *length)?;
                nonneg("height", *height)?;
                nonneg("width", *width)?;
                if !rotation.is_finite() {
                    return Err(Error::invalid("rotation must be finite"));
                }
                Ok(())
            }
        }
    }

    /// Point-in-shape test.
    pub fn contains(&self, p: &Point) -> bool {
        match self {
            Shape::PointTargets { points, radius } => {
                points.iter().any(|c| c.distance(p) < *radius)
            }
            Shape::Cylinders { discs } => discs.iter().any(|d| d.contains(p)),
            Shape::Ring {
                center,
                inner_radius,
                outer_radius,
            } => {
                let r = center.distance(p);
                r >= *inner_radius && r < *outer_radius
            }
            Shape::Austria {
                ring_center,
                ring_inner_radius,
                ring_outer_radius,
                disc_radius,
                disc_offset,
                rotation,
            } => {
                let r = ring_center.distance(p);
                if r >= *ring_inner_radius && r < *ring_outer_radius {
                    return true;
                }
                austria_discs(ring_center, *disc_radius, disc_offset, *rotation)
                    .iter()
                    .any(|d| d.contains(p))
            }
            Shape::LShape {
                corner,
                length,
                height,
                width,
                rotation,
            } => {
                let local = Point::new(p.x - corner.x, p.y - corner.y).rotated(-rotation);
                let in_rect = |w: f64, h: f64| {
                    local.x >= 0.0 && local.x < w && local.y >= 0.0 && local.y < h
                };
                in_rect(*width, *height) || in_rect(*length, *width)
            }
        }
    }
}

fn austria_discs(center: &Point, radius: f64, offset: &Point, rotation: f64) -> [Disc; 2] {
    let place = |dx: f64| {
        let r = Point::new(dx, offset.y).rotated(rotation);
        Disc {
            center: Point::new(center.x + r.x, center.y + r.y),
            radius,
        }
    };
    [place(-offset.x), place(offset.x)]
}

/// Scene category, used for dataset bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SceneKind {
    PointTargets,
    Cylinders,
    Ring,
    Austria,
    LShape,
}

impl SceneKind {
    pub fn code(self) -> u8 {
        match self {
            SceneKind::PointTargets => 0,
            SceneKind::Cylinders => 1,
            SceneKind::Ring => 2,
            SceneKind::Austria => 3,
            SceneKind::LShape => 4,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            0 => SceneKind::PointTargets,
            1 => SceneKind::Cylinders,
            2 => SceneKind::Ring,
            3 => SceneKind::Austria,
            4 => SceneKind::LShape,
            _ => return None,
        })
    }
}

/// A homogeneous scatterer: one shape filled with one contrast value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneDescriptor {
    pub contrast: f64,
    #[serde(flatten)]
    pub shape: Shape,
}

impl SceneDescriptor {
    pub fn new(shape: Shape, contrast: f64) -> Self {
        SceneDescriptor { contrast, shape }
    }

    pub fn kind(&self) -> SceneKind {
        self.shape.kind()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.contrast.is_finite() && self.contrast != 0.0) {
            return Err(Error::invalid(format!(
                "contrast level must be finite and non-zero, got {}",
                self.contrast
            )));
        }
        self.shape.validate()
    }
}

/// Rasterises a scene: cell `n` takes the contrast level iff its centre is
/// inside the shape.
pub fn rasterize_scene(desc: &SceneDescriptor, grid: &Grid) -> Result<ContrastVector> {
    desc.validate()?;
    let values: Vec<f64> = grid
        .cells()
        .iter()
        .map(|c| {
            if desc.shape.contains(&c.center) {
                desc.contrast
            } else {
                0.0
            }
        })
        .collect();
    if values.iter().all(|v| *v == 0.0) {
        return Err(Error::EmptyScene(format!(
            "{:?} covers no cell centre of the {}x{} grid",
            desc.kind(),
            grid.n_side(),
            grid.n_side()
        )));
    }
    ContrastVector::new(values)
}

/// Grid section of a scene file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub side_length: f64,
    pub n_side: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            side_length: 2.0,
            n_side: 28,
        }
    }
}

/// Sensor section of a scene file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorConfig {
    pub n_transmitters: usize,
    pub n_receivers: usize,
    pub radius: f64,
}

impl Default for SensorConfig {
    fn default() -> Self {
        SensorConfig {
            n_transmitters: 32,
            n_receivers: 32,
            radius: 4.0,
        }
    }
}

/// Everything needed to synthesise one measurement set.
///
/// Stored as TOML:
///
/// ```toml
/// seed = 7
/// frequency_hz = 100000000.0
/// snr_db = 25.0          # omit for noiseless data
///
/// [grid]
/// side_length = 2.0
/// n_side = 28
///
/// [sensors]
/// n_transmitters = 32
/// n_receivers = 32
/// radius = 4.0
///
/// [scene]
/// kind = "cylinders"
/// contrast = 0.2
/// discs = [{ center = { x = -0.15, y = 0.0 }, radius = 0.12 }]
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    pub seed: u64,
    pub frequency_hz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snr_db: Option<f64>,
    pub grid: GridConfig,
    pub sensors: SensorConfig,
    pub scene: SceneDescriptor,
}

impl SceneConfig {
    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.grid.side_length, self.grid.n_side)
    }

    pub fn medium(&self) -> Result<BackgroundMedium> {
        BackgroundMedium::vacuum(self.frequency_hz)
    }

    pub fn sensors(&self, grid: &Grid) -> Result<SensorLayout> {
        place_sensors(
            self.sensors.n_transmitters,
            self.sensors.n_receivers,
            self.sensors.radius,
            grid,
        )
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::format("scene config", e))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::format("scene config", e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml()?).map_err(|e| Error::io(path, e))
    }
}
