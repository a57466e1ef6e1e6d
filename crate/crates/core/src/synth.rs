//! Procedurally generated, fully annotated panoramic indoor scenes.
//!
//! Objects are angular disks on the sphere: a pixel belongs to an object iff
//! the great-circle distance from the pixel direction to the object center is
//! below the object's angular radius. Rendering happens in direction space, so
//! objects near the poles smear across the equirectangular image exactly as
//! real content would.

use std::f64::consts::{FRAC_PI_3, FRAC_PI_4, PI};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{check_aspect, pixel_to_lonlat, wrap_delta, Direction, EquirectImage, Image};

macro_rules! named_enum {
    ($(#[$m:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$m])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum $name {
            $(#[serde(rename = $text)] $variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn name(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }

            pub fn from_name(s: &str) -> Option<Self> {
                match s {
                    $($text => Some($name::$variant),)+
                    _ => None,
                }
            }
        }

        impl std::fmt::Display for $name {
            fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                f.write_str(self.name())
            }
        }
    };
}

named_enum!(Category {
    Window => "window",
    Door => "door",
    Chair => "chair",
    Table => "table",
    Tv => "tv",
    Picture => "picture",
    Vase => "vase",
    Whiteboard => "whiteboard",
    Clock => "clock",
    Sofa => "sofa",
});

named_enum!(Color {
    Red => "red",
    Green => "green",
    Blue => "blue",
    Yellow => "yellow",
    White => "white",
    Black => "black",
    Brown => "brown",
    Gray => "gray",
});

named_enum!(Material {
    Wood => "wood",
    Glass => "glass",
    Metal => "metal",
    Plastic => "plastic",
    Fabric => "fabric",
});

named_enum!(SceneType {
    Bedroom => "bedroom",
    Kitchen => "kitchen",
    Office => "office",
    Bathroom => "bathroom",
    ConferenceRoom => "conference room",
});

/// Dark marking drawn inside an object disk; one per category.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mark {
    Cross,
    VerticalBar,
    HorizontalBar,
    Ring,
    CenterSquare,
    Frame,
    CenterDot,
    Plain,
    RingAndDot,
    LowerHalf,
}

impl Category {
    pub fn plural(self) -> &'static str {
        match self {
            Category::Window => "windows",
            Category::Door => "doors",
            Category::Chair => "chairs",
            Category::Table => "tables",
            Category::Tv => "tvs",
            Category::Picture => "pictures",
            Category::Vase => "vases",
            Category::Whiteboard => "whiteboards",
            Category::Clock => "clocks",
            Category::Sofa => "sofas",
        }
    }

    pub fn from_plural(s: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|c| c.plural() == s)
    }

    /// Angular radius range in radians.
    pub fn size_range(self) -> (f64, f64) {
        match self {
            Category::Window => (0.25, 0.45),
            Category::Door => (0.25, 0.40),
            Category::Chair => (0.12, 0.22),
            Category::Table => (0.18, 0.30),
            Category::Tv => (0.15, 0.28),
            Category::Picture => (0.12, 0.25),
            Category::Vase => (0.08, 0.14),
            Category::Whiteboard => (0.30, 0.50),
            Category::Clock => (0.08, 0.14),
            Category::Sofa => (0.22, 0.40),
        }
    }

    pub fn mark(self) -> Mark {
        match self {
            Category::Window => Mark::Cross,
            Category::Door => Mark::VerticalBar,
            Category::Chair => Mark::HorizontalBar,
            Category::Table => Mark::Ring,
            Category::Tv => Mark::CenterSquare,
            Category::Picture => Mark::Frame,
            Category::Vase => Mark::CenterDot,
            Category::Whiteboard => Mark::Plain,
            Category::Clock => Mark::RingAndDot,
            Category::Sofa => Mark::LowerHalf,
        }
    }
}

impl Color {
    /// Fixed palette, linear RGB.
    pub fn rgb(self) -> [f64; 3] {
        match self {
            Color::Red => [0.85, 0.12, 0.10],
            Color::Green => [0.15, 0.65, 0.20],
            Color::Blue => [0.15, 0.30, 0.85],
            Color::Yellow => [0.95, 0.85, 0.15],
            Color::White => [0.96, 0.96, 0.96],
            Color::Black => [0.06, 0.06, 0.06],
            Color::Brown => [0.50, 0.30, 0.12],
            Color::Gray => [0.55, 0.55, 0.55],
        }
    }
}

impl Material {
    /// Adjective used in spatial question qualifiers.
    pub fn adjective(self) -> &'static str {
        match self {
            Material::Wood => "wooden",
            Material::Glass => "glass",
            Material::Metal => "metal",
            Material::Plastic => "plastic",
            Material::Fabric => "fabric",
        }
    }

    pub fn from_adjective(s: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|m| m.adjective() == s)
    }
}

impl SceneType {
    pub fn background(self) -> [f64; 3] {
        match self {
            SceneType::Bedroom => [0.80, 0.70, 0.85],
            SceneType::Kitchen => [0.85, 0.90, 0.70],
            SceneType::Office => [0.70, 0.80, 0.92],
            SceneType::Bathroom => [0.68, 0.92, 0.88],
            SceneType::ConferenceRoom => [0.92, 0.80, 0.64],
        }
    }

    /// Categories that may appear in this scene type.
    pub fn allowed(self) -> &'static [Category] {
        use Category::*;
        match self {
            SceneType::Bedroom => &[Window, Door, Chair, Table, Tv, Picture, Vase, Clock, Sofa],
            SceneType::Kitchen => &[Window, Door, Chair, Table, Tv, Picture, Vase, Clock],
            SceneType::Office => &[Window, Door, Chair, Table, Tv, Picture, Vase, Whiteboard, Clock, Sofa],
            SceneType::Bathroom => &[Window, Door, Picture, Vase, Clock],
            SceneType::ConferenceRoom => &[Window, Door, Chair, Table, Tv, Picture, Whiteboard, Clock],
        }
    }

    pub fn allows(self, c: Category) -> bool {
        self.allowed().contains(&c)
    }
}

mod lonlat_serde {
    use super::Direction;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(d: &Direction, s: S) -> Result<S::Ok, S::Error> {
        [d.lon, d.lat].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Direction, D::Error> {
        let [lon, lat] = <[f64; 2]>::deserialize(de)?;
        Direction::new(lon, lat).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub id: u32,
    pub category: Category,
    pub color: Color,
    pub material: Material,
    #[serde(rename = "lonlat", with = "lonlat_serde")]
    pub center: Direction,
    /// Angular radius in radians.
    #[serde(rename = "size")]
    pub angular_size: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub scene_type: SceneType,
    pub objects: Vec<ObjectSpec>,
    pub seed: u64,
}

impl SceneSpec {
    pub fn object(&self, id: u32) -> Option<&ObjectSpec> {
        self.objects.iter().find(|o| o.id == id)
    }

    pub fn count(&self, category: Category) -> usize {
        self.objects.iter().filter(|o| o.category == category).count()
    }

    /// Checks size bounds, compatibility and pairwise separation.
    pub fn validate(&self) -> Result<()> {
        for o in &self.objects {
            if !(MIN_SIZE..=MAX_SIZE).contains(&o.angular_size) {
                return Err(Error::Config(format!("object {} has angular size {}", o.id, o.angular_size)));
            }
            if !self.scene_type.allows(o.category) {
                return Err(Error::Config(format!("{} not allowed in a {}", o.category, self.scene_type)));
            }
        }
        for (i, a) in self.objects.iter().enumerate() {
            for b in &self.objects[i + 1..] {
                if a.id == b.id {
                    return Err(Error::Config(format!("duplicate object id {}", a.id)));
                }
                if a.center.angle_to(b.center) < a.angular_size + b.angular_size {
                    return Err(Error::Config(format!("objects {} and {} overlap", a.id, b.id)));
                }
            }
        }
        Ok(())
    }
}

pub const MIN_SIZE: f64 = 0.08;
pub const MAX_SIZE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    pub min_objects: usize,
    pub max_objects: usize,
    /// Relative weights in [`SceneType::ALL`] order.
    pub scene_weights: [f64; 5],
    /// Probability that a new object reuses a category already in the scene.
    pub repeat_probability: f64,
    /// Placement attempts per object before giving up.
    pub max_attempts: usize,
    /// Extra angular gap (radians) kept between neighbouring disks.
    pub min_gap: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            min_objects: 3,
            max_objects: 8,
            scene_weights: [1.0; 5],
            repeat_probability: 0.35,
            max_attempts: 500,
            min_gap: 0.05,
        }
    }
}

fn pick_weighted<R: Rng>(rng: &mut R, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut x = rng.gen_range(0.0..total);
    for (i, w) in weights.iter().enumerate() {
        if x < *w {
            return i;
        }
        x -= w;
    }
    weights.len() - 1
}

/// Deterministic scene layout for `seed`.
pub fn sample_scene(seed: u64, config: &GenConfig) -> Result<SceneSpec> {
    if config.min_objects > config.max_objects || config.scene_weights.iter().all(|w| *w <= 0.0) {
        return Err(Error::Config(format!("invalid generation config {config:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scene_type = SceneType::ALL[pick_weighted(&mut rng, &config.scene_weights)];
    let n = rng.gen_range(config.min_objects..=config.max_objects);
    let mut objects: Vec<ObjectSpec> = Vec::with_capacity(n);
    for id in 0..n as u32 {
        let category = if !objects.is_empty() && rng.gen_bool(config.repeat_probability) {
            objects.choose(&mut rng).map(|o| o.category).unwrap()
        } else {
            *scene_type.allowed().choose(&mut rng).unwrap()
        };
        let color = *Color::ALL.choose(&mut rng).unwrap();
        let material = *Material::ALL.choose(&mut rng).unwrap();
        let (lo, hi) = category.size_range();
        let placed = (0..config.max_attempts).find_map(|_| {
            let size = rng.gen_range(lo..=hi);
            let lon = rng.gen_range(-PI..PI);
            let lat = rng.gen_range(-1.0f64..1.0).asin();
            let center = Direction { lon, lat };
            let clear = objects.iter().all(|o| o.center.angle_to(center) >= o.angular_size + size + config.min_gap);
            clear.then_some((center, size))
        });
        let Some((center, angular_size)) = placed else {
            return Err(Error::Generation {
                seed,
                reason: format!("could not place object {id} ({category}) after {} attempts", config.max_attempts),
            });
        };
        objects.push(ObjectSpec { id, category, color, material, center, angular_size });
    }
    Ok(SceneSpec { scene_type, objects, seed })
}

/// A rendered panorama with its annotation and a per-pixel object-id map
/// (`-1` for background).
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedScene {
    pub image: EquirectImage,
    pub spec: SceneSpec,
    pub labels: Vec<i32>,
}

/// Integer lattice hash mapped to [0, 1).
fn hash_noise(seed: u64, x: i64, y: i64) -> f64 {
    let mut h = seed ^ (x as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (y as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    h ^= h >> 33;
    h = h.wrapping_mul(0xFF51_AFD7_ED55_8CCD);
    h ^= h >> 33;
    (h >> 11) as f64 / (1u64 << 53) as f64
}

/// Background: scene base color, brighter toward the ceiling, plus
/// low-amplitude value noise on a 0.1 rad lattice.
fn background(spec: &SceneSpec, dir: Direction) -> [f64; 3] {
    let base = spec.scene_type.background();
    let shade = 0.9 + 0.1 * dir.lat.sin();
    let cell = 0.1;
    let (gx, gy) = ((dir.lon / cell).floor() as i64, (dir.lat / cell).floor() as i64);
    let n = hash_noise(spec.seed, gx, gy) - 0.5;
    base.map(|c| (c * shade + 0.04 * n).clamp(0.0, 1.0))
}

/// Object-local gnomonic coordinates scaled so the disk rim sits at radius 1.
fn local_coords(o: &ObjectSpec, p: [f64; 3], c: [f64; 3]) -> (f64, f64) {
    let (sl, cl) = o.center.lat.sin_cos();
    let (so, co) = o.center.lon.sin_cos();
    let east = [-so, co, 0.0];
    let north = [-sl * co, -sl * so, cl];
    let depth = p[0] * c[0] + p[1] * c[1] + p[2] * c[2];
    let t = o.angular_size.tan();
    let s = (p[0] * east[0] + p[1] * east[1]) / depth / t;
    let u = (p[0] * north[0] + p[1] * north[1] + p[2] * north[2]) / depth / t;
    (s, u)
}

fn material_factor(m: Material, s: f64, u: f64) -> f64 {
    match m {
        Material::Wood => {
            if ((u + 1.0) * 2.5).floor() as i64 % 2 == 0 {
                1.0
            } else {
                0.7
            }
        }
        Material::Glass => 1.0 + 0.25 * (-(s + 0.35).powi(2) * 6.0 - (u - 0.35).powi(2) * 6.0).exp(),
        Material::Metal => 0.75 + 0.35 * (1.0 - (s * s + u * u).sqrt()),
        Material::Plastic => 1.0,
        Material::Fabric => {
            let checker = ((s + 1.0) * 3.0).floor() as i64 + ((u + 1.0) * 3.0).floor() as i64;
            if checker % 2 == 0 {
                1.0
            } else {
                0.82
            }
        }
    }
}

fn in_mark(mark: Mark, s: f64, u: f64) -> bool {
    let r = (s * s + u * u).sqrt();
    match mark {
        Mark::Cross => s.abs() < 0.12 || u.abs() < 0.12,
        Mark::VerticalBar => s.abs() < 0.18,
        Mark::HorizontalBar => u.abs() < 0.18,
        Mark::Ring => (0.45..0.65).contains(&r),
        Mark::CenterSquare => s.abs() < 0.45 && u.abs() < 0.45,
        Mark::Frame => r > 0.75,
        Mark::CenterDot => r < 0.35,
        Mark::Plain => false,
        Mark::RingAndDot => r < 0.2 || (0.55..0.72).contains(&r),
        Mark::LowerHalf => u < -0.15,
    }
}

fn object_color(o: &ObjectSpec, p: [f64; 3], c: [f64; 3]) -> [f64; 3] {
    let (s, u) = local_coords(o, p, c);
    let f = material_factor(o.material, s, u);
    let base = o.color.rgb();
    if in_mark(o.category.mark(), s, u) {
        // Marks darken bright colors and lighten black so they stay visible.
        let lum = base.iter().sum::<f64>() / 3.0;
        let t = if lum < 0.2 { 0.45 } else { 0.0 };
        return base.map(|v| (v * 0.3 + t).clamp(0.0, 1.0));
    }
    base.map(|v| (v * f).clamp(0.0, 1.0))
}

/// Renders `spec` into a `width x height` panorama.
pub fn render_scene(spec: &SceneSpec, width: usize, height: usize) -> Result<RenderedScene> {
    check_aspect(width, height)?;
    let mut order: Vec<&ObjectSpec> = spec.objects.iter().collect();
    order.sort_by_key(|o| o.id);
    let centers: Vec<[f64; 3]> = order.iter().map(|o| o.center.to_vector()).collect();
    let cos_sizes: Vec<f64> = order.iter().map(|o| o.angular_size.cos()).collect();
    let mut data = vec![0.0; width * height * 3];
    let mut labels = vec![-1i32; width * height];
    data.par_chunks_mut(width * 3).zip(labels.par_chunks_mut(width)).enumerate().try_for_each(
        |(y, (row, lab))| -> Result<()> {
            for x in 0..width {
                let dir = pixel_to_lonlat(x as f64 + 0.5, y as f64 + 0.5, width, height)?;
                let p = dir.to_vector();
                let mut rgb = background(spec, dir);
                for (k, o) in order.iter().enumerate() {
                    let c = centers[k];
                    let cos = p[0] * c[0] + p[1] * c[1] + p[2] * c[2];
                    if cos > cos_sizes[k] && dir.angle_to(o.center) < o.angular_size {
                        rgb = object_color(o, p, c);
                        lab[x] = o.id as i32;
                    }
                }
                row[x * 3..x * 3 + 3].copy_from_slice(&rgb);
            }
            Ok(())
        },
    )?;
    let image = EquirectImage::new(Image::new(width, height, data)?)?;
    Ok(RenderedScene { image, spec: spec.clone(), labels })
}

/// Viewer-relative direction sectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ViewerDirection {
    Front,
    Right,
    Behind,
    Left,
    Above,
    Below,
}

impl ViewerDirection {
    pub const ALL: [ViewerDirection; 6] = [
        ViewerDirection::Front,
        ViewerDirection::Right,
        ViewerDirection::Behind,
        ViewerDirection::Left,
        ViewerDirection::Above,
        ViewerDirection::Below,
    ];

    pub fn phrase(self) -> &'static str {
        match self {
            ViewerDirection::Front => "in front of you",
            ViewerDirection::Right => "at my right side",
            ViewerDirection::Behind => "behind you",
            ViewerDirection::Left => "at my left side",
            ViewerDirection::Above => "above you",
            ViewerDirection::Below => "below you",
        }
    }

    pub fn from_phrase(s: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|d| d.phrase() == s)
    }
}

const ABOVE_LAT: f64 = FRAC_PI_3;
const SIDE_LON: f64 = FRAC_PI_4;
const BACK_LON: f64 = 3.0 * FRAC_PI_4;

/// Sector of the sphere as seen by a viewer facing longitude 0.
pub fn viewer_direction_label(d: Direction) -> ViewerDirection {
    if d.lat > ABOVE_LAT {
        ViewerDirection::Above
    } else if d.lat < -ABOVE_LAT {
        ViewerDirection::Below
    } else if d.lon.abs() <= SIDE_LON {
        ViewerDirection::Front
    } else if d.lon > SIDE_LON && d.lon <= BACK_LON {
        ViewerDirection::Right
    } else if d.lon.abs() > BACK_LON {
        ViewerDirection::Behind
    } else {
        ViewerDirection::Left
    }
}

/// Angular distance (in lon/lat parameter space) from `d` to the nearest
/// sector boundary that decides its label.
pub fn viewer_label_margin(d: Direction) -> f64 {
    let lat_margin = (d.lat.abs() - ABOVE_LAT).abs();
    if d.lat.abs() > ABOVE_LAT {
        return lat_margin;
    }
    let lon_margin = [SIDE_LON, -SIDE_LON, BACK_LON, -BACK_LON]
        .iter()
        .map(|b| wrap_delta(d.lon - b).abs())
        .fold(f64::INFINITY, f64::min);
    lat_margin.min(lon_margin)
}

/// Where object `a` lies relative to object `b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Relation {
    RightSide,
    LeftSide,
    Above,
    Below,
}

impl Relation {
    pub const ALL: [Relation; 4] = [Relation::RightSide, Relation::LeftSide, Relation::Above, Relation::Below];

    /// Answer string for "which side" questions.
    pub fn answer(self) -> &'static str {
        match self {
            Relation::RightSide => "right side",
            Relation::LeftSide => "left side",
            Relation::Above => "above",
            Relation::Below => "below",
        }
    }

    /// Qualifier words preceding "the <obj>" in a question.
    pub fn qualifier(self) -> &'static str {
        match self {
            Relation::RightSide => "at the right of",
            Relation::LeftSide => "at the left of",
            Relation::Above => "above",
            Relation::Below => "below",
        }
    }

    pub fn mirror(self) -> Relation {
        match self {
            Relation::RightSide => Relation::LeftSide,
            Relation::LeftSide => Relation::RightSide,
            Relation::Above => Relation::Below,
            Relation::Below => Relation::Above,
        }
    }
}

fn deltas(a: &ObjectSpec, b: &ObjectSpec) -> (f64, f64) {
    (wrap_delta(a.center.lon - b.center.lon), a.center.lat - b.center.lat)
}

pub fn relative_position(a: &ObjectSpec, b: &ObjectSpec) -> Result<Relation> {
    if a.id == b.id {
        return Err(Error::Ambiguity(format!("object {} compared with itself", a.id)));
    }
    let (dlon, dlat) = deltas(a, b);
    if dlat.abs() == dlon.abs() {
        return Err(Error::Ambiguity(format!("objects {} and {} tie (dlon {dlon}, dlat {dlat})", a.id, b.id)));
    }
    Ok(if dlat.abs() > dlon.abs() {
        if dlat > 0.0 {
            Relation::Above
        } else {
            Relation::Below
        }
    } else if dlon > 0.0 {
        Relation::RightSide
    } else {
        Relation::LeftSide
    })
}

/// Distance of the pair from a decision boundary of [`relative_position`]:
/// the horizontal/vertical tie and, for horizontal relations, the seam
/// opposite `b` where left and right swap.
pub fn relation_margin(a: &ObjectSpec, b: &ObjectSpec) -> f64 {
    let (dlon, dlat) = deltas(a, b);
    let tie = (dlat.abs() - dlon.abs()).abs();
    if dlat.abs() > dlon.abs() {
        tie
    } else {
        tie.min(PI - dlon.abs())
    }
}

/// Five degrees: pairs or directions closer than this to a boundary are
/// never used in questions.
pub const AMBIGUITY_MARGIN: f64 = 5.0 * PI / 180.0;

#[cfg(test)]
mod tests {
    use std::f64::consts::FRAC_PI_2;

    use super::*;

    fn obj(id: u32, lon: f64, lat: f64) -> ObjectSpec {
        ObjectSpec {
            id,
            category: Category::Chair,
            color: Color::Red,
            material: Material::Wood,
            center: Direction::new(lon, lat).unwrap(),
            angular_size: 0.1,
        }
    }

    #[test]
    fn same_seed_same_scene() {
        let cfg = GenConfig::default();
        assert_eq!(sample_scene(42, &cfg).unwrap(), sample_scene(42, &cfg).unwrap());
        assert_ne!(sample_scene(42, &cfg).unwrap(), sample_scene(43, &cfg).unwrap());
    }

    #[test]
    fn scene_invariants_hold_over_many_seeds() {
        let cfg = GenConfig::default();
        for seed in 0..1000 {
            let s = sample_scene(seed, &cfg).unwrap();
            assert!((3..=8).contains(&s.objects.len()));
            s.validate().unwrap();
            if s.scene_type == SceneType::Bathroom {
                assert!(s.objects.iter().all(|o| o.category != Category::Sofa));
            }
        }
    }

    #[test]
    fn crowded_config_reports_seed() {
        let cfg = GenConfig { min_objects: 60, max_objects: 60, max_attempts: 20, ..GenConfig::default() };
        match sample_scene(9, &cfg) {
            Err(Error::Generation { seed, .. }) => assert_eq!(seed, 9),
            other => panic!("expected a generation error, got {other:?}"),
        }
    }

    #[test]
    fn viewer_labels() {
        let d = |lon, lat| viewer_direction_label(Direction::new(lon, lat).unwrap());
        assert_eq!(d(0.0, 0.0), ViewerDirection::Front);
        assert_eq!(d(FRAC_PI_2, 0.0), ViewerDirection::Right);
        assert_eq!(d(0.1, 1.2), ViewerDirection::Above);
        assert_eq!(d(-FRAC_PI_2, -0.3), ViewerDirection::Left);
        assert_eq!(d(3.0, 0.5), ViewerDirection::Behind);
        assert_eq!(d(-0.2, -1.1), ViewerDirection::Below);
        assert_eq!(d(FRAC_PI_4, 0.0), ViewerDirection::Front);
        assert_eq!(d(BACK_LON, 0.0), ViewerDirection::Right);
        assert_eq!(d(-BACK_LON, 0.0), ViewerDirection::Left);
    }

    #[test]
    fn relative_position_examples() {
        let b = obj(0, 0.0, 0.0);
        let a = obj(1, 0.5, 0.0);
        assert_eq!(relative_position(&a, &b).unwrap(), Relation::RightSide);
        assert_eq!(relative_position(&b, &a).unwrap(), Relation::LeftSide);
        // Through the seam: dlon = wrap(-3 - 3) = 2*pi - 6 = +0.283.
        let b = obj(0, 3.0, 0.0);
        let a = obj(1, -3.0, 0.0);
        assert_eq!(relative_position(&a, &b).unwrap(), Relation::RightSide);
        let up = obj(2, 3.0, 0.6);
        assert_eq!(relative_position(&up, &b).unwrap(), Relation::Above);
        assert!(matches!(relative_position(&b, &b), Err(Error::Ambiguity(_))));
        let diag = obj(3, 0.25, 0.25);
        assert!(matches!(relative_position(&diag, &obj(4, 0.0, 0.0)), Err(Error::Ambiguity(_))));
    }

    #[test]
    fn empty_scene_is_background_only() {
        let spec = SceneSpec { scene_type: SceneType::Office, objects: vec![], seed: 3 };
        let r = render_scene(&spec, 64, 32).unwrap();
        assert!(r.labels.iter().all(|&l| l == -1));
        let base = SceneType::Office.background();
        for p in r.image.data().chunks(3) {
            for c in 0..3 {
                assert!((p[c] - base[c]).abs() <= base[c] * 0.2 + 0.021);
            }
        }
    }

    #[test]
    fn equator_object_renders_as_disk_at_center() {
        let mut o = obj(0, 0.0, 0.0);
        o.angular_size = 0.3;
        let spec = SceneSpec { scene_type: SceneType::Office, objects: vec![o], seed: 1 };
        let (w, h) = (256, 128);
        let r = render_scene(&spec, w, h).unwrap();
        assert_eq!(r.labels[(h / 2) * w + w / 2], 0);
        // Radius in pixels along the row and the column through the center agree.
        let horiz = (0..w).filter(|&x| r.labels[(h / 2) * w + x] == 0).count();
        let vert = (0..h).filter(|&y| r.labels[y * w + w / 2] == 0).count();
        assert!((horiz as i64 - vert as i64).abs() <= 1, "{horiz} vs {vert}");
    }

    #[test]
    fn scene_json_schema() {
        let s = sample_scene(5, &GenConfig::default()).unwrap();
        let v: serde_json::Value = serde_json::to_value(&s).unwrap();
        let o = &v["objects"][0];
        for key in ["id", "category", "color", "material", "lonlat", "size"] {
            assert!(o.get(key).is_some(), "missing {key}");
        }
        let back: SceneSpec = serde_json::from_value(v).unwrap();
        assert_eq!(back, s);
    }
}
