//! Deterministic box-corridor fixtures.

use std::path::Path;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use omni_traj::geometry::{Corridor, Polyhedron};

use crate::config::{EndpointSection, RunConfig};

pub const CORRIDOR_FILE: &str = "corridor.json";
pub const CONFIG_FILE: &str = "config.toml";

/// Each box extends this far into its neighbours, so a level body fits in
/// every overlap, m.
const BOX_OVERLAP: f64 = 0.75;
const HALF_WIDTH: f64 = 1.5;
const FLIGHT_HEIGHT: f64 = 1.5;
/// Largest lateral offset of a zigzag box, m.
const ZIGZAG_AMPLITUDE: f64 = 0.8;

/// Slot passage: width along y, which is narrower than the 1.0 m footprint
/// but wider than the 0.35 m thickness.
pub const SLOT_GAP: f64 = 0.6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum FixtureKind {
    Straight,
    Slot,
    Zigzag,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureParams {
    /// Number of boxes for `straight` and `zigzag`.
    pub boxes: usize,
    /// Total length along x for `straight` and `zigzag`, m.
    pub length: f64,
    pub pieces_per_polyhedron: usize,
}

impl Default for FixtureParams {
    fn default() -> Self {
        Self {
            boxes: 2,
            length: 4.0,
            pieces_per_polyhedron: 2,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum FixtureError {
    #[error("invalid fixture parameters: {0}")]
    InvalidParams(String),
    #[error("cannot write {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Debug, Clone)]
pub struct Fixture {
    pub corridor: Corridor,
    pub config: RunConfig,
}

fn aabb(lo: [f64; 3], hi: [f64; 3]) -> Polyhedron {
    Polyhedron::aabb(Vector3::from(lo), Vector3::from(hi)).expect("fixture boxes are nondegenerate")
}

fn level(position: [f64; 3]) -> EndpointSection {
    EndpointSection {
        position,
        attitude: [1.0, 0.0, 0.0, 0.0],
    }
}

pub fn make_fixture(kind: FixtureKind, params: &FixtureParams, seed: u64) -> Result<Fixture, FixtureError> {
    let FixtureParams {
        boxes,
        length,
        pieces_per_polyhedron,
    } = *params;
    if pieces_per_polyhedron == 0 {
        return Err(FixtureError::InvalidParams("pieces_per_polyhedron must be positive".into()));
    }
    let mut config = RunConfig {
        corridor: Some(CORRIDOR_FILE.into()),
        pieces_per_polyhedron,
        seed,
        ..Default::default()
    };
    let polyhedra = match kind {
        FixtureKind::Straight | FixtureKind::Zigzag => {
            if boxes == 0 {
                return Err(FixtureError::InvalidParams("boxes must be positive".into()));
            }
            if !(length.is_finite() && length / boxes as f64 >= 1.5) {
                return Err(FixtureError::InvalidParams(format!(
                    "length {length} m is too short for {boxes} boxes"
                )));
            }
            let step = length / boxes as f64;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let offsets: Vec<f64> = (0..boxes)
                .map(|i| match kind {
                    FixtureKind::Zigzag => {
                        let side = if i % 2 == 0 { 1.0 } else { -1.0 };
                        side * rng.gen_range(0.3..=1.0) * ZIGZAG_AMPLITUDE
                    }
                    _ => 0.0,
                })
                .collect();
            let polys = offsets
                .iter()
                .enumerate()
                .map(|(i, y)| {
                    let x0 = i as f64 * step - if i > 0 { BOX_OVERLAP } else { 0.0 };
                    let x1 = (i + 1) as f64 * step + if i + 1 < boxes { BOX_OVERLAP } else { 0.0 };
                    aabb(
                        [x0, y - HALF_WIDTH, FLIGHT_HEIGHT - 1.0],
                        [x1, y + HALF_WIDTH, FLIGHT_HEIGHT + 1.0],
                    )
                })
                .collect();
            config.start = level([0.75, offsets[0], FLIGHT_HEIGHT]);
            config.end = level([length - 0.75, offsets[boxes - 1], FLIGHT_HEIGHT]);
            polys
        }
        FixtureKind::Slot => {
            let g = SLOT_GAP / 2.0;
            config.start = level([-2.8, 0.0, FLIGHT_HEIGHT]);
            config.end = level([2.8, 0.0, FLIGHT_HEIGHT]);
            vec![
                aabb([-3.5, -1.5, 0.2], [-0.5, 1.5, 2.8]),
                aabb([-1.8, -g, 0.4], [1.8, g, 2.6]),
                aabb([0.5, -1.5, 0.2], [3.5, 1.5, 2.8]),
            ]
        }
    };
    Ok(Fixture {
        corridor: Corridor::with_pieces_per_polyhedron(polyhedra, pieces_per_polyhedron),
        config,
    })
}

impl Fixture {
    /// Writes `corridor.json` and `config.toml` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), FixtureError> {
        let io = |path: &Path| {
            let path = path.display().to_string();
            move |source| FixtureError::Io { path, source }
        };
        std::fs::create_dir_all(dir).map_err(io(dir))?;
        let corridor = dir.join(CORRIDOR_FILE);
        std::fs::write(&corridor, self.corridor.to_json_string() + "\n").map_err(io(&corridor))?;
        let config = dir.join(CONFIG_FILE);
        std::fs::write(&config, self.config.to_toml()).map_err(io(&config))?;
        Ok(())
    }
}
