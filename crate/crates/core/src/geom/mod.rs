//! Geometry between equirectangular panoramas, sphere directions and the six
//! faces of a cubemap.
//!
//! Conventions:
//!
//! - Longitude `lon` in `[-pi, pi)`, latitude `lat` in `[-pi/2, pi/2]`; the unit
//!   vector is `(cos lat cos lon, cos lat sin lon, sin lat)`. `+X` is straight
//!   ahead, `+Y` is to the viewer's right, `+Z` is up.
//! - Continuous pixel coordinate `p` belongs to pixel `floor(p)`; pixel centers
//!   sit at `index + 0.5`.

mod cubemap;
mod image;
mod variants;

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use crate::error::{Error, Result};

pub use self::cubemap::{
    backproject_to_equirect, direction_to_face, face_pixel_to_direction, project_to_cubemaps, CubeFace,
    CubemapSet, FaceFrame,
};
pub(crate) use self::image::check_aspect;
pub use self::image::{psnr_rows, EquirectImage, Image};
pub use self::variants::{crop_and_resize, direct_split, split_tiles, tile_bounds, CropMode};

/// A point on the unit sphere.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Direction {
    pub lon: f64,
    pub lat: f64,
}

impl Direction {
    /// Builds a direction, wrapping longitude into `[-pi, pi)`.
    pub fn new(lon: f64, lat: f64) -> Result<Self> {
        if !lon.is_finite() || !lat.is_finite() || lat.abs() > FRAC_PI_2 + 1e-12 {
            return Err(Error::domain("direction", format!("lon {lon}, lat {lat}")));
        }
        Ok(Self { lon: wrap_lon(lon), lat: lat.clamp(-FRAC_PI_2, FRAC_PI_2) })
    }

    /// Direction of a (not necessarily normalised) nonzero vector.
    pub fn from_vector(v: [f64; 3]) -> Self {
        let lon = wrap_lon(v[1].atan2(v[0]));
        let lat = v[2].atan2((v[0] * v[0] + v[1] * v[1]).sqrt());
        Self { lon, lat }
    }

    pub fn to_vector(self) -> [f64; 3] {
        let (sl, cl) = self.lat.sin_cos();
        let (so, co) = self.lon.sin_cos();
        [cl * co, cl * so, sl]
    }

    /// Great-circle distance in radians.
    pub fn angle_to(self, other: Direction) -> f64 {
        let a = self.to_vector();
        let b = other.to_vector();
        let cross = [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]];
        let sin = (cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2]).sqrt();
        let cos = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
        sin.atan2(cos)
    }
}

/// Wraps an angle into `[-pi, pi)`.
pub fn wrap_lon(lon: f64) -> f64 {
    let w = (lon + PI).rem_euclid(TAU) - PI;
    if w >= PI {
        -PI
    } else {
        w
    }
}

/// Wraps an angle difference into `(-pi, pi]`.
pub fn wrap_delta(d: f64) -> f64 {
    let w = wrap_lon(d);
    if w == -PI {
        PI
    } else {
        w
    }
}

/// Continuous equirectangular coordinates of a direction.
pub fn lonlat_to_pixel(dir: Direction, width: usize, height: usize) -> Result<(f64, f64)> {
    image::check_aspect(width, height)?;
    let x = (dir.lon / TAU + 0.5) * width as f64;
    let y = (0.5 - dir.lat / PI) * height as f64;
    Ok((x, y))
}

/// Inverse of [`lonlat_to_pixel`].
pub fn pixel_to_lonlat(x: f64, y: f64, width: usize, height: usize) -> Result<Direction> {
    image::check_aspect(width, height)?;
    let (w, h) = (width as f64, height as f64);
    if !(0.0..w).contains(&x) || !(0.0..=h).contains(&y) {
        return Err(Error::domain("pixel_to_lonlat", format!("({x}, {y}) outside {width}x{height}")));
    }
    let lon = (x / w - 0.5) * TAU;
    let lat = (0.5 - y / h) * PI;
    Ok(Direction { lon: wrap_lon(lon), lat })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_4;

    #[test]
    fn lonlat_to_pixel_examples() {
        let d = |lon, lat| Direction::new(lon, lat).unwrap();
        assert_eq!(lonlat_to_pixel(d(0.0, 0.0), 1024, 512).unwrap(), (512.0, 256.0));
        assert_eq!(lonlat_to_pixel(d(-PI, 0.0), 1024, 512).unwrap(), (0.0, 256.0));
        let (x, y) = lonlat_to_pixel(d(FRAC_PI_2, FRAC_PI_4), 64, 32).unwrap();
        assert!((x - 48.0).abs() < 1e-12 && (y - 8.0).abs() < 1e-12);
        assert!(matches!(lonlat_to_pixel(d(0.0, 0.0), 100, 100), Err(Error::Aspect { .. })));
    }

    #[test]
    fn pixel_to_lonlat_examples() {
        let c = pixel_to_lonlat(512.0, 256.0, 1024, 512).unwrap();
        assert_eq!((c.lon, c.lat), (0.0, 0.0));
        let d = pixel_to_lonlat(48.0, 8.0, 64, 32).unwrap();
        assert!((d.lon - FRAC_PI_2).abs() < 1e-12 && (d.lat - FRAC_PI_4).abs() < 1e-12);
        assert!(pixel_to_lonlat(1024.0, 0.0, 1024, 512).is_err());
        assert!(pixel_to_lonlat(-0.1, 0.0, 1024, 512).is_err());
        assert!(pixel_to_lonlat(0.0, 512.5, 1024, 512).is_err());
    }

    #[test]
    fn longitude_wraps() {
        assert_eq!(Direction::new(PI, 0.0).unwrap().lon, -PI);
        assert!((Direction::new(3.0 * PI / 2.0, 0.0).unwrap().lon + FRAC_PI_2).abs() < 1e-12);
        assert!((wrap_delta(-3.0 - 3.0) - (TAU - 6.0)).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn pixel_round_trip(lon in -PI..PI, lat in -1.5f64..1.5) {
            let dir = Direction::new(lon, lat).unwrap();
            let (x, y) = lonlat_to_pixel(dir, 1024, 512).unwrap();
            let back = pixel_to_lonlat(x, y, 1024, 512).unwrap();
            prop_assert!((wrap_delta(back.lon - dir.lon)).abs() < 1e-9);
            prop_assert!((back.lat - dir.lat).abs() < 1e-9);
        }

        #[test]
        fn unit_vector_round_trip(lon in -PI..PI, lat in -1.5f64..1.5) {
            let dir = Direction::new(lon, lat).unwrap();
            let v = dir.to_vector();
            let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            prop_assert!((n - 1.0).abs() < 1e-9);
            let back = Direction::from_vector(v);
            prop_assert!(wrap_delta(back.lon - dir.lon).abs() < 1e-9 && (back.lat - dir.lat).abs() < 1e-9);
        }
    }
}
