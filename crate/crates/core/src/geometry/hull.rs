//! Incremental 3D convex hull over a small point set.

use std::collections::HashSet;

use nalgebra::Vector3;

/// Oriented triangular facet; the outward normal follows the right-hand rule
/// over `(a, b, c)`.
#[derive(Debug, Clone, Copy)]
pub struct Facet {
    pub idx: [usize; 3],
    pub normal: Vector3<f64>,
    /// `normal^T x = offset` on the facet plane, with `normal` of unit length.
    pub offset: f64,
}

/// Returns `None` when the points do not span three dimensions.
pub fn convex_hull(points: &[Vector3<f64>]) -> Option<Vec<Facet>> {
    if points.len() < 4 {
        return None;
    }
    let scale = points.iter().map(|p| p.amax()).fold(0.0_f64, f64::max).max(1e-300);
    let eps = 1e-11 * scale;

    let i0 = (0..points.len())
        .min_by(|&a, &b| points[a].x.total_cmp(&points[b].x))
        .unwrap();
    let i1 = farthest(points, |p| (p - points[i0]).norm())?;
    let dir = (points[i1] - points[i0]).normalize();
    let i2 = farthest(points, |p| {
        let v = p - points[i0];
        (v - dir * v.dot(&dir)).norm()
    })?;
    let plane_n = (points[i1] - points[i0]).cross(&(points[i2] - points[i0]));
    if plane_n.norm() <= eps * scale {
        return None;
    }
    let plane_n = plane_n.normalize();
    let i3 = farthest(points, |p| (p - points[i0]).dot(&plane_n).abs())?;
    if (points[i3] - points[i0]).dot(&plane_n).abs() <= eps {
        return None;
    }

    let seed = [i0, i1, i2, i3];
    let centroid = seed.iter().map(|&i| points[i]).sum::<Vector3<f64>>() / 4.0;
    let mut faces: Vec<Facet> = Vec::new();
    for tri in [[i0, i1, i2], [i0, i1, i3], [i0, i2, i3], [i1, i2, i3]] {
        let mut f = make_facet(points, tri);
        if f.normal.dot(&centroid) - f.offset > 0.0 {
            f = make_facet(points, [tri[0], tri[2], tri[1]]);
        }
        faces.push(f);
    }

    for (pi, p) in points.iter().enumerate() {
        if seed.contains(&pi) {
            continue;
        }
        let visible: Vec<bool> = faces
            .iter()
            .map(|f| f.normal.dot(p) - f.offset > eps)
            .collect();
        if !visible.iter().any(|&v| v) {
            continue;
        }
        let mut edges: HashSet<(usize, usize)> = HashSet::new();
        for (f, _) in faces.iter().zip(&visible).filter(|(_, &v)| v) {
            let [a, b, c] = f.idx;
            edges.insert((a, b));
            edges.insert((b, c));
            edges.insert((c, a));
        }
        let mut horizon: Vec<(usize, usize)> = edges
            .iter()
            .copied()
            .filter(|&(a, b)| !edges.contains(&(b, a)))
            .collect();
        // HashSet iteration order is unspecified; keep facet order stable.
        horizon.sort_unstable();
        let mut kept: Vec<Facet> = faces
            .iter()
            .zip(&visible)
            .filter(|(_, &v)| !v)
            .map(|(f, _)| *f)
            .collect();
        for (a, b) in horizon {
            kept.push(make_facet(points, [a, b, pi]));
        }
        faces = kept;
    }
    Some(faces)
}

fn farthest(points: &[Vector3<f64>], dist: impl Fn(&Vector3<f64>) -> f64) -> Option<usize> {
    (0..points.len()).max_by(|&a, &b| dist(&points[a]).total_cmp(&dist(&points[b])))
}

fn make_facet(points: &[Vector3<f64>], idx: [usize; 3]) -> Facet {
    let [a, b, c] = idx;
    let n = (points[b] - points[a]).cross(&(points[c] - points[a]));
    let norm = n.norm();
    let normal = if norm > 0.0 { n / norm } else { n };
    Facet {
        idx,
        normal,
        offset: normal.dot(&points[a]),
    }
}
