use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::polyhedron::{max_clearance, Polyhedron};
use super::GeometryError;

/// Strict-interior margin required of adjacent corridor overlaps.
pub const OVERLAP_CLEARANCE: f64 = 1e-6;

/// Ordered sequence of overlapping polyhedra plus the piece-to-polyhedron map.
#[derive(Debug, Clone)]
pub struct Corridor {
    polyhedra: Vec<Polyhedron>,
    assignment: Vec<usize>,
}

/// Overlap check for polyhedra `index` and `index + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlapCheck {
    pub index: usize,
    /// Largest clearance from every face of both members; `NaN` if the
    /// linear program failed.
    pub clearance: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorridorReport {
    pub overlaps: Vec<OverlapCheck>,
    pub assignment_error: Option<String>,
    pub pass: bool,
}

impl CorridorReport {
    pub fn failing_pairs(&self) -> Vec<(usize, usize)> {
        self.overlaps
            .iter()
            .filter(|o| !o.ok)
            .map(|o| (o.index, o.index + 1))
            .collect()
    }
}

impl Corridor {
    pub fn new(polyhedra: Vec<Polyhedron>, assignment: Vec<usize>) -> Self {
        Self { polyhedra, assignment }
    }

    /// Assigns `pieces_per_polyhedron` consecutive pieces to each member.
    pub fn with_pieces_per_polyhedron(polyhedra: Vec<Polyhedron>, pieces_per_polyhedron: usize) -> Self {
        let assignment = default_assignment(polyhedra.len(), pieces_per_polyhedron);
        Self { polyhedra, assignment }
    }

    pub fn polyhedra(&self) -> &[Polyhedron] {
        &self.polyhedra
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn num_pieces(&self) -> usize {
        self.assignment.len()
    }

    /// Polyhedron assigned to piece `i`.
    pub fn piece_polyhedron(&self, i: usize) -> &Polyhedron {
        &self.polyhedra[self.assignment[i]]
    }

    pub fn translated(&self, delta: &Vector3<f64>) -> Corridor {
        Corridor {
            polyhedra: self.polyhedra.iter().map(|p| p.translated(delta)).collect(),
            assignment: self.assignment.clone(),
        }
    }

    pub fn validate(&self) -> CorridorReport {
        let overlaps: Vec<OverlapCheck> = self
            .polyhedra
            .windows(2)
            .enumerate()
            .map(|(index, pair)| {
                let faces: Vec<_> = pair[0]
                    .halfspaces()
                    .iter()
                    .chain(pair[1].halfspaces())
                    .copied()
                    .collect();
                let clearance = max_clearance(&faces).map_or(f64::NAN, |(_, c)| c);
                OverlapCheck {
                    index,
                    clearance,
                    ok: clearance >= OVERLAP_CLEARANCE,
                }
            })
            .collect();
        let assignment_error = check_assignment(&self.assignment, self.polyhedra.len()).err();
        let pass = !self.polyhedra.is_empty()
            && assignment_error.is_none()
            && overlaps.iter().all(|o| o.ok);
        CorridorReport {
            overlaps,
            assignment_error,
            pass,
        }
    }

    /// Parses the JSON corridor format. An empty or missing `assignment`
    /// is filled with `pieces_per_polyhedron` pieces per member.
    pub fn from_json_str(text: &str, pieces_per_polyhedron: usize) -> Result<Self, CorridorFileError> {
        let file: CorridorFile = serde_json::from_str(text)?;
        let mut polyhedra = Vec::with_capacity(file.polyhedra.len());
        for (index, p) in file.polyhedra.iter().enumerate() {
            let raw: Vec<_> = p
                .halfspaces
                .iter()
                .map(|h| (Vector3::new(h[0], h[1], h[2]), h[3]))
                .collect();
            polyhedra.push(
                Polyhedron::new(&raw).map_err(|source| CorridorFileError::Polyhedron { index, source })?,
            );
        }
        let assignment = if file.assignment.is_empty() {
            default_assignment(polyhedra.len(), pieces_per_polyhedron)
        } else {
            file.assignment
        };
        Ok(Self { polyhedra, assignment })
    }

    pub fn to_json_string(&self) -> String {
        let file = CorridorFile {
            polyhedra: self
                .polyhedra
                .iter()
                .map(|p| PolyhedronFile {
                    halfspaces: p
                        .halfspaces()
                        .iter()
                        .map(|h| [h.normal.x, h.normal.y, h.normal.z, h.offset])
                        .collect(),
                })
                .collect(),
            assignment: self.assignment.clone(),
        };
        serde_json::to_string_pretty(&file).expect("corridor serializes")
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CorridorFileError {
    #[error("malformed corridor file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("polyhedron {index}: {source}")]
    Polyhedron { index: usize, source: GeometryError },
}

#[derive(Debug, Serialize, Deserialize)]
struct CorridorFile {
    polyhedra: Vec<PolyhedronFile>,
    #[serde(default)]
    assignment: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct PolyhedronFile {
    halfspaces: Vec<[f64; 4]>,
}

fn default_assignment(num_polyhedra: usize, pieces_per_polyhedron: usize) -> Vec<usize> {
    (0..num_polyhedra)
        .flat_map(|k| std::iter::repeat_n(k, pieces_per_polyhedron))
        .collect()
}

fn check_assignment(assignment: &[usize], num_polyhedra: usize) -> Result<(), String> {
    if num_polyhedra == 0 {
        return Err("corridor has no polyhedra".into());
    }
    let (Some(&first), Some(&last)) = (assignment.first(), assignment.last()) else {
        return Err("assignment is empty".into());
    };
    if first != 0 {
        return Err(format!("assignment starts at {first}, expected 0"));
    }
    if last != num_polyhedra - 1 {
        return Err(format!(
            "assignment ends at {last}, expected {}",
            num_polyhedra - 1
        ));
    }
    for (i, w) in assignment.windows(2).enumerate() {
        if w[1] < w[0] {
            return Err(format!("assignment decreases at piece {}", i + 1));
        }
        if w[1] > w[0] + 1 {
            return Err(format!("assignment skips polyhedron {} at piece {}", w[0] + 1, i + 1));
        }
    }
    Ok(())
}
