//! Labelled scattering scenarios for training and testing the sparsity
//! estimator.
//!
//! Scenario `i` draws everything (shape, contrast, grid, noise) from its own
//! generator seeded with `seed ^ i`, so generation can run in parallel and
//! any single scenario can be regenerated in isolation.
//!
//! On disk a dataset is a directory:
//!
//! ```text
//! manifest.json          spec, seed, split, one summary entry per record
//! records/000000.bin     one binary record per scenario
//! ```
//!
//! Record layout (little-endian): magic `EMSREC01`, `u32` version, `u64`
//! index, `u8` kind code, `u64` N, `u64` k, `f64` contrast, `f64` k/N,
//! `u64` feature count, then the raw (unscaled) features as `f64`.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::{place_sensors, sparsity, BackgroundMedium, Grid, Point};
use crate::measurements::{seeded_rng, synthesize_measurements};
use crate::net::featurize;
use crate::scene::{rasterize_scene, Disc, SceneDescriptor, SceneKind, SensorConfig, Shape};

const RECORD_MAGIC: &[u8; 8] = b"EMSREC01";
const RECORD_VERSION: u32 = 1;
const MANIFEST_FORMAT: &str = "emsparse-dataset-v1";
const MAX_DRAWS: usize = 100;
const SPLIT_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;

/// Closed interval `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub min: f64,
    pub max: f64,
}

impl Interval {
    pub const fn new(min: f64, max: f64) -> Self {
        Interval { min, max }
    }

    fn validate(&self, name: &str) -> Result<()> {
        if !(self.min.is_finite() && self.max.is_finite() && self.min >= 0.0 && self.min <= self.max) {
            return Err(Error::invalid(format!(
                "{name}: need 0 <= min <= max, got [{}, {}]",
                self.min, self.max
            )));
        }
        Ok(())
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        if self.min == self.max {
            self.min
        } else {
            rng.random_range(self.min..=self.max)
        }
    }
}

/// Shape families drawn by the random generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RandomShape {
    Ring,
    SingleCylinder,
    DoubleCylinder,
}

/// Parameter ranges for random shapes, in metres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapeRanges {
    pub cylinder_radius: Interval,
    /// Edge-to-edge gap between the two discs of a double cylinder.
    pub cylinder_gap: Interval,
    pub ring_outer_radius: Interval,
    /// Inner radius as a fraction of the outer radius.
    pub ring_inner_fraction: Interval,
}

impl Default for ShapeRanges {
    fn default() -> Self {
        ShapeRanges {
            cylinder_radius: Interval::new(0.06, 0.2),
            cylinder_gap: Interval::new(0.02, 0.3),
            ring_outer_radius: Interval::new(0.12, 0.3),
            ring_inner_fraction: Interval::new(0.5, 0.8),
        }
    }
}

/// Austria parameters shared by every sweep member.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AustriaBase {
    pub ring_center: Point,
    pub ring_inner_radius: f64,
    pub ring_outer_radius: f64,
    pub disc_radius: f64,
    pub disc_offset: Point,
}

impl AustriaBase {
    fn shape(&self, ring_scale: f64, rotation: f64) -> Shape {
        Shape::Austria {
            ring_center: self.ring_center,
            ring_inner_radius: self.ring_inner_radius * ring_scale,
            ring_outer_radius: self.ring_outer_radius * ring_scale,
            disc_radius: self.disc_radius,
            disc_offset: self.disc_offset,
            rotation,
        }
    }
}

/// How scenario geometry is produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum ScenarioSource {
    /// Uniformly placed random shapes; each scenario picks its shape family,
    /// contrast and grid uniformly from the lists.
    Random {
        shapes: Vec<RandomShape>,
        contrasts: Vec<f64>,
        n_sides: Vec<usize>,
        #[serde(default)]
        ranges: ShapeRanges,
    },
    /// Austria profiles: `rotations` cases with the base ring and the discs
    /// rotated in equal steps over a full turn, then `ring_variants` ring
    /// scalings spread over `ring_scale`, each at `variant_rotations` equally
    /// spaced rotations. Grid sizes cycle through `n_sides` by scenario index.
    AustriaSweep {
        base: AustriaBase,
        contrast: f64,
        n_sides: Vec<usize>,
        rotations: usize,
        ring_variants: usize,
        variant_rotations: usize,
        ring_scale: Interval,
    },
}

/// Everything that determines a dataset apart from its size and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub side_length: f64,
    pub frequency_hz: f64,
    /// `None` for noiseless data.
    pub snr_db: Option<f64>,
    pub sensors: SensorConfig,
    pub train_fraction: f64,
    pub source: ScenarioSource,
}

impl DatasetSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::format("dataset spec", e))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::format("dataset spec", e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    /// Scenario count fixed by the source, if any.
    pub fn natural_count(&self) -> Option<usize> {
        match &self.source {
            ScenarioSource::Random { .. } => None,
            ScenarioSource::AustriaSweep {
                rotations,
                ring_variants,
                variant_rotations,
                ..
            } => Some(rotations + ring_variants * variant_rotations),
        }
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("spec serialises");
        hex(&Sha256::digest(json.as_bytes()))
    }

    fn validate(&self) -> Result<()> {
        if !(self.side_length.is_finite() && self.side_length > 0.0) {
            return Err(Error::invalid("side_length must be positive"));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction <= 1.0) {
            return Err(Error::invalid("train_fraction must lie in (0, 1]"));
        }
        BackgroundMedium::vacuum(self.frequency_hz)?;
        let half = self.side_length / 2.0;
        match &self.source {
            ScenarioSource::Random {
                shapes,
                contrasts,
                n_sides,
                ranges,
            } => {
                if shapes.is_empty() || contrasts.is_empty() || n_sides.is_empty() {
                    return Err(Error::invalid("shapes, contrasts and n_sides must be non-empty"));
                }
                if let Some(c) = contrasts.iter().find(|c| !(c.is_finite() && **c != 0.0)) {
                    return Err(Error::invalid(format!("contrast {c} is not a usable level")));
                }
                ranges.cylinder_radius.validate("cylinder_radius")?;
                ranges.cylinder_gap.validate("cylinder_gap")?;
                ranges.ring_outer_radius.validate("ring_outer_radius")?;
                ranges.ring_inner_fraction.validate("ring_inner_fraction")?;
                if ranges.ring_inner_fraction.max >= 1.0 {
                    return Err(Error::invalid("ring_inner_fraction must stay below 1"));
                }
                for s in shapes {
                    let extent = match s {
                        RandomShape::Ring => ranges.ring_outer_radius.max,
                        RandomShape::SingleCylinder => ranges.cylinder_radius.max,
                        RandomShape::DoubleCylinder => {
                            2.0 * ranges.cylinder_radius.max + ranges.cylinder_gap.max / 2.0
                        }
                    };
                    if extent >= half {
                        return Err(Error::invalid(format!(
                            "{s:?} with the largest parameters (extent {extent} m) does not fit a \
                             {} m domain",
                            self.side_length
                        )));
                    }
                }
            }
            ScenarioSource::AustriaSweep {
                contrast,
                n_sides,
                rotations,
                ring_scale,
                ..
            } => {
                if n_sides.is_empty() || *rotations == 0 {
                    return Err(Error::invalid("Austria sweep needs grid sizes and rotations"));
                }
                if !(contrast.is_finite() && *contrast != 0.0) {
                    return Err(Error::invalid("Austria sweep contrast must be non-zero"));
                }
                ring_scale.validate("ring_scale")?;
            }
        }
        Ok(())
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// One labelled example.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingScenario {
    pub index: usize,
    pub kind: SceneKind,
    /// Number of grid cells.
    pub n: usize,
    /// True sparsity.
    pub k: usize,
    pub label_contrast: f64,
    pub label_k_norm: f64,
    /// `[Re(e); Im(e)]` of the noisy measurements, unscaled.
    pub features: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub spec: DatasetSpec,
    pub seed: u64,
    pub scenarios: Vec<TrainingScenario>,
    /// Split tag per scenario, parallel to `scenarios`.
    pub splits: Vec<Split>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }

    pub fn part(&self, split: Split) -> Vec<&TrainingScenario> {
        self.scenarios
            .iter()
            .zip(&self.splits)
            .filter(|(_, s)| **s == split)
            .map(|(x, _)| x)
            .collect()
    }

    /// Keeps the scenarios matching `keep`, preserving order and split tags.
    pub fn filter(&self, keep: impl Fn(&TrainingScenario) -> bool) -> Dataset {
        let (scenarios, splits) = self
            .scenarios
            .iter()
            .zip(&self.splits)
            .filter(|(x, _)| keep(x))
            .map(|(x, s)| (x.clone(), *s))
            .unzip();
        Dataset {
            spec: self.spec.clone(),
            seed: self.seed,
            scenarios,
            splits,
        }
    }

    /// Every scenario tagged as `split`, e.g. to use a whole set for testing.
    pub fn retagged(&self, split: Split) -> Dataset {
        let mut d = self.clone();
        d.splits.iter_mut().for_each(|s| *s = split);
        d
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let records_dir = dir.join("records");
        std::fs::create_dir_all(&records_dir).map_err(|e| Error::io(&records_dir, e))?;
        let mut entries = Vec::with_capacity(self.len());
        for (s, split) in self.scenarios.iter().zip(&self.splits) {
            let name = format!("records/{:06}.bin", s.index);
            let path = dir.join(&name);
            std::fs::write(&path, encode_record(s)).map_err(|e| Error::io(&path, e))?;
            entries.push(ManifestEntry {
                file: name,
                index: s.index,
                kind: s.kind,
                n: s.n,
                k: s.k,
                contrast: s.label_contrast,
                split: *split,
            });
        }
        let manifest = Manifest {
            format: MANIFEST_FORMAT.into(),
            spec_hash: self.spec.hash(),
            spec: self.spec.clone(),
            seed: self.seed,
            count: self.len(),
            n_train: self.splits.iter().filter(|s| **s == Split::Train).count(),
            n_test: self.splits.iter().filter(|s| **s == Split::Test).count(),
            records: entries,
        };
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::format("manifest", e))?;
        let path = dir.join("manifest.json");
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    pub fn load(dir: &Path) -> Result<Dataset> {
        let path = dir.join("manifest.json");
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::format("manifest", e))?;
        if manifest.format != MANIFEST_FORMAT {
            return Err(Error::format("manifest", format!("unknown format {}", manifest.format)));
        }
        let mut scenarios = Vec::with_capacity(manifest.records.len());
        let mut splits = Vec::with_capacity(manifest.records.len());
        for e in &manifest.records {
            let p = dir.join(&e.file);
            let bytes = std::fs::read(&p).map_err(|err| Error::io(&p, err))?;
            let s = decode_record(&bytes).map_err(|err| match err {
                Error::Format { what, reason } => Error::Format {
                    what,
                    reason: format!("{}: {reason}", p.display()),
                },
                other => other,
            })?;
            if s.index != e.index || s.k != e.k || s.n != e.n {
                return Err(Error::format("dataset", format!("{} disagrees with manifest", e.file)));
            }
            scenarios.push(s);
            splits.push(e.split);
        }
        Ok(Dataset {
            spec: manifest.spec,
            seed: manifest.seed,
            scenarios,
            splits,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    format: String,
    spec_hash: String,
    spec: DatasetSpec,
    seed: u64,
    count: usize,
    n_train: usize,
    n_test: usize,
    records: Vec<ManifestEntry>,
}

#[derive(Serialize, Deserialize)]
struct ManifestEntry {
    file: String,
    index: usize,
    kind: SceneKind,
    n: usize,
    k: usize,
    contrast: f64,
    split: Split,
}

/// SHA-256 of the manifest of a saved dataset.
pub fn manifest_hash(dir: &Path) -> Result<String> {
    let path = dir.join("manifest.json");
    let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
    Ok(hex(&Sha256::digest(&bytes)))
}

fn encode_record(s: &TrainingScenario) -> Vec<u8> {
    let mut b = Vec::with_capacity(61 + 8 * s.features.len());
    b.extend_from_slice(RECORD_MAGIC);
    b.extend_from_slice(&RECORD_VERSION.to_le_bytes());
    b.extend_from_slice(&(s.index as u64).to_le_bytes());
    b.push(s.kind.code());
    b.extend_from_slice(&(s.n as u64).to_le_bytes());
    b.extend_from_slice(&(s.k as u64).to_le_bytes());
    b.extend_from_slice(&s.label_contrast.to_le_bytes());
    b.extend_from_slice(&s.label_k_norm.to_le_bytes());
    b.extend_from_slice(&(s.features.len() as u64).to_le_bytes());
    for f in &s.features {
        b.extend_from_slice(&f.to_le_bytes());
    }
    b
}

fn decode_record(b: &[u8]) -> Result<TrainingScenario> {
    let bad = |r: &str| Error::format("dataset record", r);
    if b.len() < 61 || &b[0..8] != RECORD_MAGIC {
        return Err(bad("bad magic or truncated header"));
    }
    let u64_at = |o: usize| u64::from_le_bytes(b[o..o + 8].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(b[o..o + 8].try_into().unwrap());
    if u32::from_le_bytes(b[8..12].try_into().unwrap()) != RECORD_VERSION {
        return Err(bad("unsupported version"));
    }
    let kind = SceneKind::from_code(b[20]).ok_or_else(|| bad("unknown scene kind"))?;
    let len = u64_at(53) as usize;
    if b.len() != 61 + 8 * len {
        return Err(bad("feature payload length mismatch"));
    }
    Ok(TrainingScenario {
        index: u64_at(12) as usize,
        kind,
        n: u64_at(21) as usize,
        k: u64_at(29) as usize,
        label_contrast: f64_at(37),
        label_k_norm: f64_at(45),
        features: (0..len).map(|i| f64_at(61 + 8 * i)).collect(),
    })
}

/// Geometry, contrast and grid of one scenario before simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioPlan {
    pub descriptor: SceneDescriptor,
    pub n_side: usize,
    pub noise_seed: u64,
}

fn pick<T: Copy>(items: &[T], rng: &mut ChaCha8Rng) -> T {
    items[rng.random_range(0..items.len())]
}

fn random_center(rng: &mut ChaCha8Rng, half: f64, extent: f64) -> Point {
    let lim = half - extent;
    Point::new(rng.random_range(-lim..=lim), rng.random_range(-lim..=lim))
}

fn random_shape(kind: RandomShape, r: &ShapeRanges, half: f64, rng: &mut ChaCha8Rng) -> Shape {
    match kind {
        RandomShape::SingleCylinder => {
            let radius = r.cylinder_radius.sample(rng);
            Shape::Cylinders {
                discs: vec![Disc {
                    center: random_center(rng, half, radius),
                    radius,
                }],
            }
        }
        RandomShape::DoubleCylinder => {
            let (r1, r2) = (r.cylinder_radius.sample(rng), r.cylinder_radius.sample(rng));
            let gap = r.cylinder_gap.sample(rng);
            let angle = rng.random_range(0.0..std::f64::consts::TAU);
            let d = r1 + r2 + gap;
            let dir = Point::new(angle.cos(), angle.sin());
            // Place the midpoint so that both discs stay inside the domain.
            let ext_x = (d / 2.0 * dir.x.abs() + r1.max(r2)).min(half);
            let ext_y = (d / 2.0 * dir.y.abs() + r1.max(r2)).min(half);
            let mid = Point::new(
                rng.random_range(-(half - ext_x)..=(half - ext_x)),
                rng.random_range(-(half - ext_y)..=(half - ext_y)),
            );
            Shape::Cylinders {
                discs: vec![
                    Disc {
                        center: Point::new(mid.x - d / 2.0 * dir.x, mid.y - d / 2.0 * dir.y),
                        radius: r1,
                    },
                    Disc {
                        center: Point::new(mid.x + d / 2.0 * dir.x, mid.y + d / 2.0 * dir.y),
                        radius: r2,
                    },
                ],
            }
        }
        RandomShape::Ring => {
            let outer = r.ring_outer_radius.sample(rng);
            let inner = outer * r.ring_inner_fraction.sample(rng);
            Shape::Ring {
                center: random_center(rng, half, outer),
                inner_radius: inner,
                outer_radius: outer,
            }
        }
    }
}

/// Draws the geometry of scenario `index`; shapes that cover no cell centre
/// are redrawn from the same stream.
pub fn plan_scenario(spec: &DatasetSpec, seed: u64, index: usize) -> Result<ScenarioPlan> {
    let mut rng = seeded_rng(seed ^ index as u64);
    let half = spec.side_length / 2.0;
    match &spec.source {
        ScenarioSource::Random {
            shapes,
            contrasts,
            n_sides,
            ranges,
        } => {
            let kind = pick(shapes, &mut rng);
            let contrast = pick(contrasts, &mut rng);
            let n_side = pick(n_sides, &mut rng);
            let grid = Grid::new(spec.side_length, n_side)?;
            let mut last = None;
            for _ in 0..MAX_DRAWS {
                let desc = SceneDescriptor::new(random_shape(kind, ranges, half, &mut rng), contrast);
                match rasterize_scene(&desc, &grid) {
                    Ok(_) => {
                        return Ok(ScenarioPlan {
                            descriptor: desc,
                            n_side,
                            noise_seed: rng.next_u64(),
                        })
                    }
                    Err(Error::EmptyScene(_)) => last = Some(desc),
                    Err(e) => return Err(e),
                }
            }
            Err(Error::EmptyScene(format!(
                "scenario {index}: {MAX_DRAWS} draws of {kind:?} covered no cell centre on the \
                 {n_side}x{n_side} grid; last descriptor {last:?}"
            )))
        }
        ScenarioSource::AustriaSweep {
            base,
            contrast,
            n_sides,
            rotations,
            ring_variants,
            variant_rotations,
            ring_scale,
        } => {
            let total = rotations + ring_variants * variant_rotations;
            if index >= total {
                return Err(Error::invalid(format!(
                    "Austria sweep has {total} scenarios, index {index} requested"
                )));
            }
            let tau = std::f64::consts::TAU;
            let (scale, rotation) = if index < *rotations {
                (1.0, tau * index as f64 / *rotations as f64)
            } else {
                let j = index - rotations;
                let (variant, turn) = (j / variant_rotations, j % variant_rotations);
                let t = if *ring_variants > 1 {
                    variant as f64 / (*ring_variants - 1) as f64
                } else {
                    0.5
                };
                (
                    ring_scale.min + t * (ring_scale.max - ring_scale.min),
                    tau * turn as f64 / *variant_rotations as f64,
                )
            };
            let desc = SceneDescriptor::new(base.shape(scale, rotation), *contrast);
            Ok(ScenarioPlan {
                descriptor: desc,
                n_side: n_sides[index % n_sides.len()],
                noise_seed: rng.next_u64(),
            })
        }
    }
}

/// Simulates one planned scenario.
pub fn simulate_scenario(spec: &DatasetSpec, plan: &ScenarioPlan, index: usize) -> Result<TrainingScenario> {
    let grid = Grid::new(spec.side_length, plan.n_side)?;
    let medium = BackgroundMedium::vacuum(spec.frequency_hz)?;
    let sensors = place_sensors(
        spec.sensors.n_transmitters,
        spec.sensors.n_receivers,
        spec.sensors.radius,
        &grid,
    )?;
    let contrast = rasterize_scene(&plan.descriptor, &grid)?;
    let k = sparsity(&contrast);
    let meas = synthesize_measurements(&plan.descriptor, &grid, &sensors, &medium, spec.snr_db, plan.noise_seed)?;
    Ok(TrainingScenario {
        index,
        kind: plan.descriptor.kind(),
        n: grid.len(),
        k,
        label_contrast: plan.descriptor.contrast,
        label_k_norm: k as f64 / grid.len() as f64,
        features: featurize(&meas.values, 1.0),
    })
}

/// Train/test tags for `count` scenarios: a seeded shuffle, the first
/// `round(train_fraction * count)` become training data.
pub fn split_tags(count: usize, train_fraction: f64, seed: u64) -> Vec<Split> {
    let mut order: Vec<usize> = (0..count).collect();
    order.shuffle(&mut seeded_rng(seed ^ SPLIT_STREAM));
    let n_train = ((train_fraction * count as f64).round() as usize).min(count);
    let mut tags = vec![Split::Test; count];
    for &i in &order[..n_train] {
        tags[i] = Split::Train;
    }
    tags
}

/// Generates `count` scenarios in parallel, assembled in index order.
pub fn build_dataset(spec: &DatasetSpec, count: usize, seed: u64) -> Result<Dataset> {
    if count == 0 {
        return Err(Error::invalid("dataset count must be >= 1"));
    }
    spec.validate()?;
    if let Some(n) = spec.natural_count() {
        if count > n {
            return Err(Error::invalid(format!("this source defines only {n} scenarios")));
        }
    }
    let scenarios = (0..count)
        .into_par_iter()
        .map(|i| {
            let plan = plan_scenario(spec, seed, i)?;
            simulate_scenario(spec, &plan, i).map_err(|e| match e {
                Error::EmptyScene(m) | Error::InvalidArgument(m) | Error::Domain(m) => Error::InvalidArgument(
                    format!("scenario {i} ({:?}): {m}", plan.descriptor),
                ),
                other => other,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        spec: spec.clone(),
        seed,
        splits: split_tags(count, spec.train_fraction, seed),
        scenarios,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec() -> DatasetSpec {
        DatasetSpec {
            side_length: 2.0,
            frequency_hz: 100e6,
            snr_db: Some(25.0),
            sensors: SensorConfig {
                n_transmitters: 4,
                n_receivers: 4,
                radius: 4.0,
            },
            train_fraction: 0.7,
            source: ScenarioSource::Random {
                shapes: vec![RandomShape::SingleCylinder],
                contrasts: vec![0.2, 0.4],
                n_sides: vec![12],
                ranges: ShapeRanges::default(),
            },
        }
    }

    #[test]
    fn split_of_ten_is_seven_three() {
        let d = build_dataset(&small_spec(), 10, 3).unwrap();
        assert_eq!(d.part(Split::Train).len(), 7);
        assert_eq!(d.part(Split::Test).len(), 3);
    }

    #[test]
    fn labels_match_rasterised_sparsity() {
        let spec = small_spec();
        let d = build_dataset(&spec, 6, 11).unwrap();
        for s in &d.scenarios {
            let plan = plan_scenario(&spec, 11, s.index).unwrap();
            let grid = Grid::new(spec.side_length, plan.n_side).unwrap();
            let k = sparsity(&rasterize_scene(&plan.descriptor, &grid).unwrap());
            assert_eq!((s.label_k_norm * s.n as f64).round() as usize, k);
            assert_eq!(s.features.len(), 32);
            assert!((0.0..=1.0).contains(&s.label_k_norm));
        }
    }

    #[test]
    fn oversized_shapes_rejected() {
        let mut spec = small_spec();
        if let ScenarioSource::Random { ranges, .. } = &mut spec.source {
            ranges.cylinder_radius = Interval::new(0.5, 1.5);
        }
        let err = build_dataset(&spec, 2, 1).unwrap_err();
        assert!(err.to_string().contains("SingleCylinder"), "{err}");
    }

    #[test]
    fn austria_sweep_size() {
        let spec = DatasetSpec {
            source: ScenarioSource::AustriaSweep {
                base: AustriaBase {
                    ring_center: Point::new(0.0, -0.1),
                    ring_inner_radius: 0.15,
                    ring_outer_radius: 0.3,
                    disc_radius: 0.1,
                    disc_offset: Point::new(0.15, 0.3),
                },
                contrast: 0.2,
                n_sides: vec![56, 112],
                rotations: 360,
                ring_variants: 10,
                variant_rotations: 4,
                ring_scale: Interval::new(0.8, 1.2),
            },
            ..small_spec()
        };
        assert_eq!(spec.natural_count(), Some(400));
        let p = plan_scenario(&spec, 0, 361).unwrap();
        assert_eq!(p.n_side, 112);
        assert!(plan_scenario(&spec, 0, 400).is_err());
        assert!(build_dataset(&spec, 401, 0).is_err());
    }

    #[test]
    fn save_load_round_trip() {
        let d = build_dataset(&small_spec(), 5, 9).unwrap();
        let dir = tempfile::tempdir().unwrap();
        d.save(dir.path()).unwrap();
        assert_eq!(Dataset::load(dir.path()).unwrap(), d);
    }

    #[test]
    fn filter_keeps_tags() {
        let d = build_dataset(&small_spec(), 10, 5).unwrap();
        let f = d.filter(|s| s.label_contrast == 0.4);
        assert!(f.scenarios.iter().all(|s| s.label_contrast == 0.4));
        for (s, tag) in f.scenarios.iter().zip(&f.splits) {
            assert_eq!(*tag, d.splits[s.index]);
        }
    }
}
