//! File formats: 8-bit RGB PNG images, pretty JSON documents and JSONL
//! corpora. Every write goes to a temporary file in the destination
//! directory and is renamed into place, so a failed run never leaves a
//! partial file behind.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use image::codecs::png::PngEncoder;
use image::{ExtendedColorType, ImageEncoder};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geom::{CubeFace, CubemapSet, EquirectImage, Image};

/// Writes `bytes` to `path` atomically.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Fails unless `out` is absent or an empty directory.
pub fn check_output_dir(out: &Path) -> Result<()> {
    if out.exists() {
        let mut entries = std::fs::read_dir(out).map_err(|e| Error::io(out, e))?;
        if entries.next().is_some() {
            return Err(Error::Config(format!("output directory {} exists and is not empty", out.display())));
        }
    }
    Ok(())
}

/// Runs `fill` on a fresh staging directory next to `out` and renames it to
/// `out` on success; on failure the staging directory is removed. `out` must
/// not exist or be an empty directory.
pub fn staged_dir<T>(out: &Path, fill: impl FnOnce(&Path) -> Result<T>) -> Result<T> {
    check_output_dir(out)?;
    let parent = match out.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    create_dir(parent)?;
    let stage = tempfile::Builder::new().prefix(".staging-").tempdir_in(parent).map_err(|e| Error::io(parent, e))?;
    let value = fill(stage.path())?;
    if out.exists() {
        std::fs::remove_dir(out).map_err(|e| Error::io(out, e))?;
    }
    let stage = stage.keep();
    std::fs::rename(&stage, out).map_err(|e| Error::io(out, e))?;
    Ok(value)
}

/// Writes the six faces as `front.png`, `right.png`, ... into `dir`.
pub fn save_cubemap(cubemap: &CubemapSet, dir: &Path) -> Result<()> {
    create_dir(dir)?;
    for face in CubeFace::ALL {
        save_png(cubemap.face(face), &dir.join(format!("{}.png", face.name())))?;
    }
    Ok(())
}

pub fn load_cubemap(dir: &Path) -> Result<CubemapSet> {
    let faces = CubeFace::ALL.iter().map(|f| load_png(&dir.join(format!("{}.png", f.name())))).collect::<Result<_>>()?;
    CubemapSet::new(faces)
}

/// Quantizes `[0, 1]` to 8 bits, rounding halves up.
pub fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8
}

pub fn encode_png(img: &Image) -> Result<Vec<u8>> {
    let bytes: Vec<u8> = img.data().iter().map(|&v| quantize(v)).collect();
    let mut out = Vec::new();
    PngEncoder::new(&mut out).write_image(
        &bytes,
        img.width() as u32,
        img.height() as u32,
        ExtendedColorType::Rgb8,
    )?;
    Ok(out)
}

pub fn save_png(img: &Image, path: &Path) -> Result<()> {
    write_atomic(path, &encode_png(img)?)
}

/// Reads any PNG as RGB with values `byte / 255`.
pub fn load_png(path: &Path) -> Result<Image> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let rgb = image::load_from_memory_with_format(&bytes, image::ImageFormat::Png)?.to_rgb8();
    let data = rgb.as_raw().iter().map(|&b| b as f64 / 255.0).collect();
    Image::new(rgb.width() as usize, rgb.height() as usize, data)
}

pub fn load_equirect(path: &Path) -> Result<EquirectImage> {
    EquirectImage::new(load_png(path)?)
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, to_json(value)?.as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse(format!("{}:{}: {e}", path.display(), i + 1)))?);
    }
    Ok(out)
}
