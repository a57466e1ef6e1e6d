use rayon::prelude::*;

use super::image::{check_aspect, EquirectImage, Image};
use super::{pixel_to_lonlat, Direction};
use crate::error::{Error, Result};

use std::f64::consts::{PI, TAU};

/// The six 90-degree faces of a cubemap. The declaration order fixes the face
/// index used by location one-hot vectors and the edge tie-break priority.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CubeFace {
    Front,
    Right,
    Back,
    Left,
    Top,
    Bottom,
}

/// Orthonormal frame of a face: `center` is the face normal, `right` the
/// direction of increasing `u` (image columns) and `down` the direction of
/// increasing `v` (image rows).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaceFrame {
    pub center: [f64; 3],
    pub right: [f64; 3],
    pub down: [f64; 3],
}

impl CubeFace {
    pub const ALL: [CubeFace; 6] =
        [CubeFace::Front, CubeFace::Right, CubeFace::Back, CubeFace::Left, CubeFace::Top, CubeFace::Bottom];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<CubeFace> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            CubeFace::Front => "front",
            CubeFace::Right => "right",
            CubeFace::Back => "back",
            CubeFace::Left => "left",
            CubeFace::Top => "top",
            CubeFace::Bottom => "bottom",
        }
    }

    /// Face frames. Side faces keep `+Z` up; the top face has the front face
    /// below its bottom edge and the bottom face has it above its top edge, so
    /// every shared edge is continuous.
    pub fn frame(self) -> FaceFrame {
        let f = |center, right, down| FaceFrame { center, right, down };
        match self {
            CubeFace::Front => f([1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, -1.0]),
            CubeFace::Right => f([0.0, 1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 0.0, -1.0]),
            CubeFace::Back => f([-1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -1.0]),
            CubeFace::Left => f([0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, -1.0]),
            CubeFace::Top => f([0.0, 0.0, 1.0], [0.0, 1.0, 0.0], [1.0, 0.0, 0.0]),
            CubeFace::Bottom => f([0.0, 0.0, -1.0], [0.0, 1.0, 0.0], [-1.0, 0.0, 0.0]),
        }
    }

    /// Axis index and sign of the face normal.
    fn axis(self) -> (usize, f64) {
        match self {
            CubeFace::Front => (0, 1.0),
            CubeFace::Back => (0, -1.0),
            CubeFace::Right => (1, 1.0),
            CubeFace::Left => (1, -1.0),
            CubeFace::Top => (2, 1.0),
            CubeFace::Bottom => (2, -1.0),
        }
    }
}

#[inline]
fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

const BELOW_ONE: f64 = 1.0 - f64::EPSILON / 2.0;

/// Face hit by a direction plus gnomonic face coordinates in `[0, 1)`.
pub fn direction_to_face(dir: Direction) -> (CubeFace, f64, f64) {
    vector_to_face(dir.to_vector())
}

pub(crate) fn vector_to_face(v: [f64; 3]) -> (CubeFace, f64, f64) {
    let mut best = CubeFace::Front;
    let mut best_key = f64::NEG_INFINITY;
    for face in CubeFace::ALL {
        let (axis, sign) = face.axis();
        let key = sign * v[axis];
        if key > best_key {
            best = face;
            best_key = key;
        }
    }
    let frame = best.frame();
    let a = dot(v, frame.right) / best_key;
    let b = dot(v, frame.down) / best_key;
    let u = ((a + 1.0) * 0.5).clamp(0.0, BELOW_ONE);
    let w = ((b + 1.0) * 0.5).clamp(0.0, BELOW_ONE);
    (best, u, w)
}

/// Un-normalised ray through the center of face pixel `(px, py)`.
#[inline]
pub(crate) fn face_pixel_ray(face: CubeFace, px: usize, py: usize, n: usize) -> [f64; 3] {
    let frame = face.frame();
    let a = 2.0 * ((px as f64 + 0.5) / n as f64) - 1.0;
    let b = 2.0 * ((py as f64 + 0.5) / n as f64) - 1.0;
    [
        frame.center[0] + a * frame.right[0] + b * frame.down[0],
        frame.center[1] + a * frame.right[1] + b * frame.down[1],
        frame.center[2] + a * frame.right[2] + b * frame.down[2],
    ]
}

/// Direction through the center of a face pixel.
pub fn face_pixel_to_direction(face: CubeFace, px: usize, py: usize, n: usize) -> Result<Direction> {
    if px >= n || py >= n {
        return Err(Error::domain("face_pixel_to_direction", format!("pixel ({px}, {py}) outside face of size {n}")));
    }
    Ok(Direction::from_vector(face_pixel_ray(face, px, py, n)))
}

/// Six square faces of identical size, indexed by [`CubeFace::index`].
#[derive(Debug, Clone, PartialEq)]
pub struct CubemapSet {
    face_size: usize,
    faces: Vec<Image>,
}

impl CubemapSet {
    pub fn new(faces: Vec<Image>) -> Result<Self> {
        if faces.len() != 6 {
            return Err(Error::shape("cubemap", format!("expected 6 faces, got {}", faces.len())));
        }
        let n = faces[0].width();
        if faces.iter().any(|f| f.width() != n || f.height() != n) {
            return Err(Error::shape("cubemap", "faces must be square with identical size"));
        }
        Ok(Self { face_size: n, faces })
    }

    pub fn face_size(&self) -> usize {
        self.face_size
    }

    pub fn face(&self, face: CubeFace) -> &Image {
        &self.faces[face.index()]
    }

    pub fn faces(&self) -> &[Image] {
        &self.faces
    }

    pub fn into_faces(self) -> Vec<Image> {
        self.faces
    }
}

/// Resample a panorama into six gnomonic faces of `n x n` pixels.
pub fn project_to_cubemaps(eq: &EquirectImage, n: usize) -> Result<CubemapSet> {
    if n == 0 {
        return Err(Error::domain("project_to_cubemaps", "face size must be positive"));
    }
    let (w, h) = (eq.width() as f64, eq.height() as f64);
    let faces = CubeFace::ALL
        .iter()
        .map(|&face| {
            let mut data = vec![0.0; n * n * 3];
            data.par_chunks_mut(n * 3).enumerate().for_each(|(py, row)| {
                for px in 0..n {
                    let dir = Direction::from_vector(face_pixel_ray(face, px, py, n));
                    let x = (dir.lon / TAU + 0.5) * w;
                    let y = (0.5 - dir.lat / PI) * h;
                    row[px * 3..px * 3 + 3].copy_from_slice(&eq.sample_wrap_x(x, y));
                }
            });
            Image::new(n, n, data)
        })
        .collect::<Result<Vec<_>>>()?;
    CubemapSet::new(faces)
}

/// Rebuild a `width x height` panorama from a cubemap.
pub fn backproject_to_equirect(cm: &CubemapSet, width: usize, height: usize) -> Result<EquirectImage> {
    check_aspect(width, height)?;
    let n = cm.face_size() as f64;
    let mut data = vec![0.0; width * height * 3];
    data.par_chunks_mut(width * 3).enumerate().try_for_each(|(y, row)| -> Result<()> {
        for x in 0..width {
            let dir = pixel_to_lonlat(x as f64 + 0.5, y as f64 + 0.5, width, height)?;
            let (face, u, v) = direction_to_face(dir);
            row[x * 3..x * 3 + 3].copy_from_slice(&cm.face(face).sample_clamped(u * n, v * n));
        }
        Ok(())
    })?;
    EquirectImage::new(Image::new(width, height, data)?)
}
