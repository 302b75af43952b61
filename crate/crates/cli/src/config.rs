//! Run configuration, read from TOML. Relative paths resolve against the
//! directory holding the config file.

use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, UnitQuaternion, Vector3, Quaternion};
use serde::{Deserialize, Serialize};

use omni_traj::flatness::VehicleParams;
use omni_traj::geometry::VehicleShape;
use omni_traj::penalty::PenaltyConfig;
use omni_traj::problem::Endpoint;
use omni_traj::solver::SolverConfig;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot parse {path}: {source}")]
    Parse { path: PathBuf, source: toml::de::Error },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Corridor JSON file; `--corridor` overrides it.
    pub corridor: Option<PathBuf>,
    pub s: usize,
    pub kappa: usize,
    pub pieces_per_polyhedron: usize,
    pub seed: u64,
    pub limits: Limits,
    pub weights: Weights,
    pub solver: SolverSection,
    pub shape: ShapeSection,
    pub vehicle: VehicleSection,
    pub start: EndpointSection,
    pub end: EndpointSection,
    pub output: OutputSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            corridor: None,
            s: 4,
            kappa: 16,
            pieces_per_polyhedron: 2,
            seed: 0,
            limits: Limits::default(),
            weights: Weights::default(),
            solver: SolverSection::default(),
            shape: ShapeSection::default(),
            vehicle: VehicleSection::default(),
            start: EndpointSection::default(),
            end: EndpointSection::default(),
            output: OutputSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Limits {
    /// m/s
    pub v_max: f64,
    /// m/s²
    pub a_max: f64,
    /// rad/s
    pub omega_max: f64,
}

impl Default for Limits {
    fn default() -> Self {
        let p = PenaltyConfig::default();
        Self {
            v_max: p.v_max,
            a_max: p.a_max,
            omega_max: p.omega_max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Weights {
    pub w_v: f64,
    pub w_a: f64,
    pub w_omega: f64,
    pub w_c: f64,
    pub k_rho: f64,
}

impl Default for Weights {
    fn default() -> Self {
        let p = PenaltyConfig::default();
        Self {
            w_v: p.w_v,
            w_a: p.w_a,
            w_omega: p.w_omega,
            w_c: p.w_c,
            k_rho: p.k_rho,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub memory: usize,
    pub grad_tol: f64,
    pub max_iters: usize,
    pub c1: f64,
    pub backtrack_factor: f64,
    pub max_line_search_steps: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        let s = SolverConfig::default();
        Self {
            memory: s.memory,
            grad_tol: s.grad_tol,
            max_iters: s.max_iters,
            c1: s.c1,
            backtrack_factor: s.backtrack_factor,
            max_line_search_steps: s.max_line_search_steps,
        }
    }
}

/// Exactly one of `cuboid`, `vertices` or `file` (JSON `{"vertices": [[x, y, z], …]}`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShapeSection {
    /// Edge lengths `[lx, ly, lz]` in metres.
    pub cuboid: Option<[f64; 3]>,
    pub vertices: Option<Vec<[f64; 3]>>,
    pub file: Option<PathBuf>,
}

impl Default for ShapeSection {
    fn default() -> Self {
        Self {
            cuboid: Some([1.0, 1.0, 0.35]),
            vertices: None,
            file: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VehicleSection {
    /// kg
    pub mass: f64,
    /// kg·m², row-major.
    pub inertia: [[f64; 3]; 3],
    /// m/s²
    pub gravity: [f64; 3],
}

impl Default for VehicleSection {
    fn default() -> Self {
        let v = VehicleParams::default();
        let j = v.inertia;
        Self {
            mass: v.mass,
            inertia: [
                [j[(0, 0)], j[(0, 1)], j[(0, 2)]],
                [j[(1, 0)], j[(1, 1)], j[(1, 2)]],
                [j[(2, 0)], j[(2, 1)], j[(2, 2)]],
            ],
            gravity: [v.gravity.x, v.gravity.y, v.gravity.z],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EndpointSection {
    /// m
    pub position: [f64; 3],
    /// Unit quaternion `[w, x, y, z]`; normalized on load.
    pub attitude: [f64; 4],
}

impl Default for EndpointSection {
    fn default() -> Self {
        Self {
            position: [0.0; 3],
            attitude: [1.0, 0.0, 0.0, 0.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    /// Profile table spacing, s.
    pub profile_dt: f64,
    /// Violation report samples `oversample · κ` points per piece.
    pub oversample: usize,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            profile_dt: 0.02,
            oversample: 4,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg: RunConfig = toml::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.corridor = cfg.corridor.map(|p| base.join(p));
        cfg.shape.file = cfg.shape.file.map(|p| base.join(p));
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.s < 2 {
            return bad(format!("s must be at least 2, got {}", self.s));
        }
        if self.kappa == 0 {
            return bad("kappa must be positive".into());
        }
        if self.pieces_per_polyhedron == 0 {
            return bad("pieces_per_polyhedron must be positive".into());
        }
        if !(self.output.profile_dt > 0.0) {
            return bad("output.profile_dt must be positive".into());
        }
        if self.output.oversample == 0 {
            return bad("output.oversample must be positive".into());
        }
        self.penalty().validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.solver_config()
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.vehicle_params()?;
        let sources = [self.shape.cuboid.is_some(), self.shape.vertices.is_some(), self.shape.file.is_some()];
        if sources.iter().filter(|&&b| b).count() != 1 {
            return bad("shape needs exactly one of cuboid, vertices or file".into());
        }
        for e in [&self.start, &self.end] {
            endpoint(e)?;
        }
        Ok(())
    }

    pub fn penalty(&self) -> PenaltyConfig {
        PenaltyConfig {
            v_max: self.limits.v_max,
            a_max: self.limits.a_max,
            omega_max: self.limits.omega_max,
            kappa: self.kappa,
            w_v: self.weights.w_v,
            w_a: self.weights.w_a,
            w_omega: self.weights.w_omega,
            w_c: self.weights.w_c,
            k_rho: self.weights.k_rho,
        }
    }

    pub fn solver_config(&self) -> SolverConfig {
        let s = &self.solver;
        SolverConfig {
            memory: s.memory,
            grad_tol: s.grad_tol,
            max_iters: s.max_iters,
            c1: s.c1,
            backtrack_factor: s.backtrack_factor,
            max_line_search_steps: s.max_line_search_steps,
        }
    }

    pub fn vehicle_params(&self) -> Result<VehicleParams, ConfigError> {
        let v = &self.vehicle;
        let j = Matrix3::from_fn(|r, c| v.inertia[r][c]);
        VehicleParams::new(v.mass, j, Vector3::from(v.gravity)).map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn vehicle_shape(&self) -> Result<VehicleShape, ConfigError> {
        let invalid = |e: omni_traj::geometry::GeometryError| ConfigError::Invalid(e.to_string());
        if let Some([lx, ly, lz]) = self.shape.cuboid {
            return VehicleShape::cuboid(lx, ly, lz).map_err(invalid);
        }
        let vertices = match (&self.shape.vertices, &self.shape.file) {
            (Some(v), _) => v.clone(),
            (None, Some(path)) => {
                #[derive(Deserialize)]
                struct ShapeFile {
                    vertices: Vec<[f64; 3]>,
                }
                let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
                    path: path.clone(),
                    source,
                })?;
                let f: ShapeFile = serde_json::from_str(&text)
                    .map_err(|e| ConfigError::Invalid(format!("shape file {}: {e}", path.display())))?;
                f.vertices
            }
            (None, None) => return Err(ConfigError::Invalid("no shape given".into())),
        };
        VehicleShape::new(vertices.into_iter().map(Vector3::from).collect()).map_err(invalid)
    }

    pub fn endpoints(&self) -> Result<(Endpoint, Endpoint), ConfigError> {
        Ok((endpoint(&self.start)?, endpoint(&self.end)?))
    }
}

fn endpoint(e: &EndpointSection) -> Result<Endpoint, ConfigError> {
    let [w, x, y, z] = e.attitude;
    let q = Quaternion::new(w, x, y, z);
    if !(q.norm() > 1e-9) || !e.position.iter().all(|v| v.is_finite()) {
        return Err(ConfigError::Invalid("endpoint attitude must be a nonzero quaternion".into()));
    }
    Ok(Endpoint {
        position: Vector3::from(e.position),
        rotation: UnitQuaternion::from_quaternion(q).to_rotation_matrix().into_inner(),
    })
}
