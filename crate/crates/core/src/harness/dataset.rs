use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{EquirectImage, Image};
use crate::io;
use crate::qgen::{balance_answers, generate_questions, scene_id, QAPair, Quota};
use crate::synth::{render_scene, sample_scene, GenConfig, SceneSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    pub n_scenes: usize,
    pub seed: u64,
    /// Panorama width; height is half of it.
    pub render_width: usize,
    pub generation: GenConfig,
    pub quota: Quota,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self { n_scenes: 300, seed: 0, render_width: 256, generation: GenConfig::default(), quota: Quota::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneRecord {
    pub spec: SceneSpec,
    pub image: EquirectImage,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Validation, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }
}

/// Scenes and question sets split by scene, 50/10/40.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplits {
    pub config: DatasetConfig,
    pub scenes: BTreeMap<String, SceneRecord>,
    pub scene_ids: BTreeMap<Split, Vec<String>>,
    pub pairs: BTreeMap<Split, Vec<QAPair>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Manifest {
    config: DatasetConfig,
    splits: BTreeMap<Split, Vec<String>>,
}

/// Scene seed for the `index`-th scene of a corpus built with `seed`.
pub fn scene_seed(seed: u64, index: usize) -> u64 {
    seed * 100_000 + index as u64
}

/// Snaps an image onto the 8-bit grid so a PNG round trip is lossless.
fn quantized(img: &EquirectImage) -> Result<EquirectImage> {
    let data = img.data().iter().map(|&v| io::quantize(v) as f64 / 255.0).collect();
    EquirectImage::new(Image::new(img.width(), img.height(), data)?)
}

/// Image path of a scene relative to the dataset root.
pub fn image_path(id: &str) -> String {
    format!("scenes/{id}.png")
}

/// Split sizes for `n` scenes: rounded 50% / 10%, the rest to test.
pub fn split_sizes(n: usize) -> [usize; 3] {
    let train = (n as f64 * 0.5).round() as usize;
    let val = (n as f64 * 0.1).round() as usize;
    [train, val, n - train - val]
}

pub fn build_dataset(config: &DatasetConfig) -> Result<DatasetSplits> {
    if config.n_scenes < 10 {
        return Err(Error::Config(format!("need at least 10 scenes, got {}", config.n_scenes)));
    }
    if config.n_scenes >= 100_000 {
        return Err(Error::Config("at most 99999 scenes per corpus".into()));
    }
    let width = config.render_width;
    let built: Vec<(String, SceneRecord, Vec<QAPair>)> = (0..config.n_scenes)
        .into_par_iter()
        .map(|i| {
            let seed = scene_seed(config.seed, i);
            let spec = sample_scene(seed, &config.generation)?;
            let rendered = render_scene(&spec, width, width / 2)?;
            let id = scene_id(seed);
            let (pairs, _warnings) = generate_questions(&spec, &image_path(&id), config.seed, &config.quota);
            let image = quantized(&rendered.image)?;
            Ok((id, SceneRecord { spec, image }, pairs))
        })
        .collect::<Result<_>>()?;

    let mut ids: Vec<String> = built.iter().map(|(id, _, _)| id.clone()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    ids.shuffle(&mut rng);
    let sizes = split_sizes(ids.len());
    let mut scene_ids = BTreeMap::new();
    let mut offset = 0;
    for (split, size) in Split::ALL.into_iter().zip(sizes) {
        let mut chunk = ids[offset..offset + size].to_vec();
        chunk.sort();
        scene_ids.insert(split, chunk);
        offset += size;
    }
    let mut scenes = BTreeMap::new();
    let mut by_scene = BTreeMap::new();
    for (id, record, pairs) in built {
        scenes.insert(id.clone(), record);
        by_scene.insert(id, pairs);
    }
    let mut pairs = BTreeMap::new();
    for (k, split) in Split::ALL.into_iter().enumerate() {
        let raw: Vec<QAPair> = scene_ids[&split].iter().flat_map(|id| by_scene[id].iter().cloned()).collect();
        pairs.insert(split, balance_answers(&raw, config.seed.wrapping_add(k as u64)));
    }
    Ok(DatasetSplits { config: config.clone(), scenes, scene_ids, pairs })
}

impl DatasetSplits {
    pub fn split(&self, s: Split) -> &[QAPair] {
        self.pairs.get(&s).map_or(&[], Vec::as_slice)
    }

    pub fn scene(&self, id: &str) -> Result<&SceneRecord> {
        self.scenes.get(id).ok_or_else(|| Error::Config(format!("unknown scene `{id}`")))
    }

    /// Writes `dataset.json`, per-split JSONL files and per-scene PNG + JSON.
    pub fn save(&self, dir: &Path) -> Result<()> {
        io::create_dir(&dir.join("scenes"))?;
        self.scenes.par_iter().try_for_each(|(id, rec)| -> Result<()> {
            io::save_png(&rec.image, &dir.join(image_path(id)))?;
            io::write_json(&dir.join(format!("scenes/{id}.json")), &rec.spec)
        })?;
        for split in Split::ALL {
            io::write_jsonl(&dir.join(format!("{}.jsonl", split.name())), self.split(split))?;
        }
        io::write_json(&dir.join("dataset.json"), &Manifest { config: self.config.clone(), splits: self.scene_ids.clone() })
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let manifest: Manifest = io::read_json(&dir.join("dataset.json"))?;
        let ids: Vec<&String> = manifest.splits.values().flatten().collect();
        let scenes = ids
            .par_iter()
            .map(|id| {
                let spec: SceneSpec = io::read_json(&dir.join(format!("scenes/{id}.json")))?;
                let image = io::load_equirect(&dir.join(image_path(id)))?;
                Ok(((*id).clone(), SceneRecord { spec, image }))
            })
            .collect::<Result<BTreeMap<_, _>>>()?;
        let mut pairs = BTreeMap::new();
        for split in Split::ALL {
            pairs.insert(split, io::read_jsonl(&dir.join(format!("{}.jsonl", split.name())))?);
        }
        Ok(Self { config: manifest.config, scenes, scene_ids: manifest.splits, pairs })
    }
}
