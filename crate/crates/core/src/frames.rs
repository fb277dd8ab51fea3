//! PCA frames for frame averaging.
//!
//! A point cloud's centered covariance is diagonalized and its signed
//! eigenbases define a small set of rigid frames. Evaluating any function on
//! the cloud expressed in each frame and averaging the results yields an
//! output that is invariant to rotations and translations of the input
//! (and, in [`FrameMode::E3`], to reflections as well).

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative eigenvalue gap below which two eigenvalues count as equal.
pub const DEGENERACY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FrameMode {
    /// Four proper rotations; invariant to rotations and translations.
    SE3,
    /// Eight signed eigenbases; also invariant to reflections.
    E3,
    /// Identity only, no centering. Not invariant; used for ablations.
    None,
}

impl FrameMode {
    pub fn frame_count(self) -> usize {
        match self {
            FrameMode::SE3 => 4,
            FrameMode::E3 => 8,
            FrameMode::None => 1,
        }
    }
}

impl std::str::FromStr for FrameMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "SE3" | "SE(3)" => Ok(FrameMode::SE3),
            "E3" | "E(3)" => Ok(FrameMode::E3),
            "NONE" => Ok(FrameMode::None),
            other => Err(Error::Config(format!("unknown frame mode `{other}`"))),
        }
    }
}

impl std::fmt::Display for FrameMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FrameMode::SE3 => "SE3",
            FrameMode::E3 => "E3",
            FrameMode::None => "NONE",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcaDecomposition {
    pub centroid: Vector3<f64>,
    /// Unnormalized scatter matrix of the centered points.
    pub covariance: Matrix3<f64>,
    /// Descending, clamped at zero.
    pub eigenvalues: [f64; 3],
    /// Column `k` is the eigenvector of `eigenvalues[k]`.
    pub eigenvectors: Matrix3<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameSet {
    pub centroid: Vector3<f64>,
    /// Columns are the frame axes. Coordinates are mapped as `(x - t) R`.
    pub rotations: Vec<Matrix3<f64>>,
    pub mode: FrameMode,
}

fn check_finite(points: &[[f64; 3]]) -> Result<()> {
    if points.is_empty() {
        return Err(Error::InvalidInput("frame of an empty point cloud".into()));
    }
    if points.iter().flatten().any(|c| !c.is_finite()) {
        return Err(Error::InvalidInput("non-finite coordinate".into()));
    }
    Ok(())
}

pub fn pca(points: &[[f64; 3]]) -> Result<PcaDecomposition> {
    check_finite(points)?;
    let n = points.len() as f64;
    let centroid = points
        .iter()
        .fold(Vector3::zeros(), |acc, p| acc + Vector3::from(*p))
        / n;
    let mut covariance = Matrix3::zeros();
    for p in points {
        let c = Vector3::from(*p) - centroid;
        covariance += c * c.transpose();
    }
    let eig = SymmetricEigen::new(covariance);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let eigenvalues = order.map(|k| eig.eigenvalues[k].max(0.0));
    let eigenvectors = Matrix3::from_columns(&order.map(|k| eig.eigenvectors.column(k).normalize()));
    Ok(PcaDecomposition {
        centroid,
        covariance,
        eigenvalues,
        eigenvectors,
    })
}

/// Flips `v` so its largest-magnitude component is positive; the first index
/// wins ties.
fn canonical_sign(v: Vector3<f64>) -> Vector3<f64> {
    let mut arg = 0;
    for k in 1..3 {
        if v[k].abs() > v[arg].abs() {
            arg = k;
        }
    }
    if v[arg] < 0.0 {
        -v
    } else {
        v
    }
}

/// Orthonormal basis from the PCA: eigenvectors whose eigenvalue is
/// separated from its neighbours come first in descending order, then the
/// basis is completed by Gram–Schmidt against e1, e2, e3.
fn canonical_basis(pca: &PcaDecomposition) -> [Vector3<f64>; 3] {
    let lam = pca.eigenvalues;
    let tol = DEGENERACY_TOL * lam[0];
    let distinct = |k: usize| {
        lam[0] > 0.0
            && (k == 0 || (lam[k - 1] - lam[k]).abs() > tol)
            && (k == 2 || (lam[k] - lam[k + 1]).abs() > tol)
    };
    let mut basis: Vec<Vector3<f64>> = (0..3)
        .filter(|&k| distinct(k))
        .map(|k| pca.eigenvectors.column(k).into_owned())
        .collect();
    for axis in [Vector3::x(), Vector3::y(), Vector3::z()] {
        if basis.len() == 3 {
            break;
        }
        let mut v = axis;
        for b in &basis {
            v -= b * b.dot(&v);
        }
        let norm = v.norm();
        if norm > 1e-6 {
            basis.push(v / norm);
        }
    }
    [basis[0], basis[1], basis[2]].map(canonical_sign)
}

const SIGNS: [f64; 2] = [1.0, -1.0];

/// Frames for a point cloud (rows of `points`, in Å).
///
/// SE3 frames are `[a u1, b u2, ab (u1 x u2)]` for `(a, b)` in
/// `(+,+), (+,-), (-,+), (-,-)`; the third column keeps every frame a proper
/// rotation. E3 frames are `[a u1, b u2, c u3]` over all eight signs in
/// lexicographic order with `+` first.
pub fn compute_frames(points: &[[f64; 3]], mode: FrameMode) -> Result<FrameSet> {
    check_finite(points)?;
    if mode == FrameMode::None {
        return Ok(FrameSet {
            centroid: Vector3::zeros(),
            rotations: vec![Matrix3::identity()],
            mode,
        });
    }
    let pca = pca(points)?;
    let [u1, u2, u3] = canonical_basis(&pca);
    let mut rotations = Vec::with_capacity(mode.frame_count());
    match mode {
        FrameMode::SE3 => {
            let u3 = u1.cross(&u2);
            for a in SIGNS {
                for b in SIGNS {
                    rotations.push(Matrix3::from_columns(&[u1 * a, u2 * b, u3 * (a * b)]));
                }
            }
        }
        FrameMode::E3 => {
            for a in SIGNS {
                for b in SIGNS {
                    for c in SIGNS {
                        rotations.push(Matrix3::from_columns(&[u1 * a, u2 * b, u3 * c]));
                    }
                }
            }
        }
        FrameMode::None => unreachable!(),
    }
    Ok(FrameSet {
        centroid: pca.centroid,
        rotations,
        mode,
    })
}

/// Maps each row `x` to `(x - t) R`.
pub fn apply_frame(points: &[[f64; 3]], rotation: &Matrix3<f64>, centroid: &Vector3<f64>) -> Vec<[f64; 3]> {
    let rt = rotation.transpose();
    points
        .iter()
        .map(|p| (rt * (Vector3::from(*p) - centroid)).into())
        .collect()
}

/// Element-wise mean of per-frame outputs, reduced in the given order.
pub fn average_frame_outputs<F: Float>(outputs: &[Vec<F>]) -> Result<Vec<F>> {
    let first = outputs
        .first()
        .ok_or_else(|| Error::InvalidInput("no frame outputs to average".into()))?;
    let mut acc = first.clone();
    for out in &outputs[1..] {
        if out.len() != acc.len() {
            return Err(Error::LengthMismatch(acc.len(), out.len()));
        }
        for (a, &v) in acc.iter_mut().zip(out) {
            *a = *a + v;
        }
    }
    let count = F::from(outputs.len()).expect("frame count fits in a float");
    Ok(acc.into_iter().map(|a| a / count).collect())
}
