//! Brute-force, single-threaded panorama/cubemap resampling written straight
//! from the conventions, with face frames spelled out per face.

use std::f64::consts::{PI, TAU};

use panoqa_core::geom::{EquirectImage, Image};

/// Face order: front, right, back, left, top, bottom.
pub const FACES: usize = 6;

/// Unnormalized ray for face coordinates `a` (columns) and `b` (rows) in [-1, 1].
pub fn face_ray(face: usize, a: f64, b: f64) -> [f64; 3] {
    match face {
        0 => [1.0, a, -b],
        1 => [-a, 1.0, -b],
        2 => [-1.0, -a, -b],
        3 => [a, -1.0, -b],
        4 => [b, a, 1.0],
        5 => [-b, a, -1.0],
        _ => unreachable!("six faces"),
    }
}

/// Face whose signed axis component is largest; the first face wins ties.
pub fn face_of(v: [f64; 3]) -> usize {
    let keys = [v[0], v[1], -v[0], -v[1], v[2], -v[2]];
    let mut best = 0;
    for f in 1..FACES {
        if keys[f] > keys[best] {
            best = f;
        }
    }
    best
}

/// Inverse of [`face_ray`]: face coordinates in [-1, 1] of a ray hitting `face`.
pub fn face_coords(face: usize, v: [f64; 3]) -> (f64, f64) {
    match face {
        0 => (v[1] / v[0], -v[2] / v[0]),
        1 => (-v[0] / v[1], -v[2] / v[1]),
        2 => (v[1] / v[0], v[2] / v[0]),
        3 => (v[0] / -v[1], v[2] / v[1]),
        4 => (v[1] / v[2], v[0] / v[2]),
        5 => (v[1] / -v[2], v[0] / v[2]),
        _ => unreachable!("six faces"),
    }
}

fn lon_lat(v: [f64; 3]) -> (f64, f64) {
    let mut lon = (v[1].atan2(v[0]) + PI).rem_euclid(TAU) - PI;
    if lon >= PI {
        lon = -PI;
    }
    (lon, v[2].atan2((v[0] * v[0] + v[1] * v[1]).sqrt()))
}

fn lerp(p: f64, q: f64, t: f64) -> f64 {
    p + (q - p) * t
}

/// Bilinear sample at continuous `(x, y)`; pixel centers at index + 0.5.
fn bilinear(img: &Image, x: f64, y: f64, wrap_x: bool) -> [f64; 3] {
    let (w, h) = (img.width() as i64, img.height() as i64);
    let (fx, fy) = ((x - 0.5).floor(), (y - 0.5).floor());
    let (tx, ty) = (x - 0.5 - fx, y - 0.5 - fy);
    let col = |i: i64| if wrap_x { i.rem_euclid(w) } else { i.clamp(0, w - 1) } as usize;
    let row = |i: i64| i.clamp(0, h - 1) as usize;
    let (x0, x1, y0, y1) = (col(fx as i64), col(fx as i64 + 1), row(fy as i64), row(fy as i64 + 1));
    let mut out = [0.0; 3];
    for (c, o) in out.iter_mut().enumerate() {
        let top = lerp(img.pixel(x0, y0)[c], img.pixel(x1, y0)[c], tx);
        let bottom = lerp(img.pixel(x0, y1)[c], img.pixel(x1, y1)[c], tx);
        *o = lerp(top, bottom, ty).clamp(0.0, 1.0);
    }
    out
}

/// Six `n x n` faces sampled from `eq`, pixel by pixel.
pub fn project(eq: &EquirectImage, n: usize) -> Vec<Image> {
    let (w, h) = (eq.width() as f64, eq.height() as f64);
    (0..FACES)
        .map(|face| {
            let mut img = Image::filled(n, n, [0.0; 3]).unwrap();
            for py in 0..n {
                for px in 0..n {
                    let a = 2.0 * ((px as f64 + 0.5) / n as f64) - 1.0;
                    let b = 2.0 * ((py as f64 + 0.5) / n as f64) - 1.0;
                    let (lon, lat) = lon_lat(face_ray(face, a, b));
                    let x = (lon / TAU + 0.5) * w;
                    let y = (0.5 - lat / PI) * h;
                    img.set_pixel(px, py, bilinear(eq, x, y, true));
                }
            }
            img
        })
        .collect()
}

/// `width x width/2` panorama sampled back from six faces, pixel by pixel.
pub fn backproject(faces: &[Image], width: usize) -> Image {
    let height = width / 2;
    let n = faces[0].width() as f64;
    let mut img = Image::filled(width, height, [0.0; 3]).unwrap();
    for y in 0..height {
        for x in 0..width {
            let lon = ((x as f64 + 0.5) / width as f64 - 0.5) * TAU;
            let lat = (0.5 - (y as f64 + 0.5) / height as f64) * PI;
            let v = [lat.cos() * lon.cos(), lat.cos() * lon.sin(), lat.sin()];
            let face = face_of(v);
            let (a, b) = face_coords(face, v);
            img.set_pixel(x, y, bilinear(&faces[face], (a + 1.0) * 0.5 * n, (b + 1.0) * 0.5 * n, false));
        }
    }
    img
}

/// Smooth panorama: low-order functions of the unit vector, so it is
/// continuous across the seam and at the poles.
pub fn smooth_panorama(width: usize) -> EquirectImage {
    let height = width / 2;
    let img = Image::from_fn(width, height, |x, y| {
        let lon = ((x as f64 + 0.5) / width as f64 - 0.5) * TAU;
        let lat = (0.5 - (y as f64 + 0.5) / height as f64) * PI;
        let (vx, vy, vz) = (lat.cos() * lon.cos(), lat.cos() * lon.sin(), lat.sin());
        [
            0.5 + 0.3 * (2.0 * vx + vz).sin() * (1.5 * vy).cos(),
            0.5 + 0.25 * (3.0 * vy - vz).cos() + 0.1 * vx,
            0.5 + 0.2 * (2.5 * vz).sin() + 0.15 * (vx * vy * 4.0).cos(),
        ]
    })
    .unwrap();
    EquirectImage::new(img).unwrap()
}

/// A deterministic textured panorama with sharp features (for bit-exact comparisons).
pub fn textured_panorama(width: usize, seed: u64) -> EquirectImage {
    let mut s = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1;
    let img = Image::from_fn(width, width / 2, |_, _| {
        let mut next = || {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            (s >> 11) as f64 / (1u64 << 53) as f64
        };
        [next(), next(), next()]
    })
    .unwrap();
    EquirectImage::new(img).unwrap()
}
