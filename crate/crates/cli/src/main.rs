//! `panoqa`: command-line entry point for the panoramic VQA pipeline.
//!
//! Every failure prints exactly one JSON line `{"error", "message", "context"}`
//! to stderr and exits nonzero. Files are written atomically and output
//! directories are staged, so a failed command leaves nothing behind.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use panoqa_core::geom::{backproject_to_equirect, project_to_cubemaps};
use panoqa_core::harness::{
    build_dataset, emit_attention_figures, evaluate_model, prepare_inputs, run_ablation, scene_seed, standard_variants,
    train_with_progress, DatasetSplits, RunConfig, Split, VariantSpec,
};
use panoqa_core::model::{Checkpoint, InputVariant};
use panoqa_core::qgen::{generate_questions, scene_id, QAPair};
use panoqa_core::synth::{render_scene, sample_scene, SceneSpec};
use panoqa_core::{harness, io, Error, Result};
use serde_json::json;

#[derive(Debug, Parser)]
#[command(name = "panoqa", version, about = "Panoramic visual question answering at desk scale")]
struct Cli {
    /// Seed for every random choice; overrides the config file.
    #[arg(long, global = true, env = "PANOQA_SEED")]
    seed: Option<u64>,
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Split an equirectangular PNG into six cubemap faces.
    Project {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        face_size: usize,
    },
    /// Reassemble six cubemap faces into an equirectangular PNG.
    Backproject {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        width: usize,
    },
    /// Render annotated synthetic scenes (`<id>.png` + `<id>.json`).
    Synth {
        #[arg(long)]
        count: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 256)]
        width: usize,
    },
    /// Generate questions for every scene JSON in a directory.
    Qgen {
        #[arg(long)]
        scenes: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Synthesize scenes, generate questions and split them by scene.
    BuildDataset {
        #[arg(long)]
        out: PathBuf,
        /// Number of scenes (default from config: 300).
        #[arg(long)]
        scenes: Option<usize>,
        #[arg(long)]
        width: Option<usize>,
    },
    /// Train one model and keep the best-on-validation checkpoint.
    Train {
        #[arg(long)]
        data: PathBuf,
        /// Output directory: `checkpoint.json` and `history.json`.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Top-1 accuracy of a checkpoint on one split.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "test")]
        split: String,
        /// Metrics JSON.
        #[arg(long)]
        out: PathBuf,
        /// Optional per-question predictions (JSONL).
        #[arg(long)]
        predictions: Option<PathBuf>,
    },
    /// Train every variant for every seed and tabulate medians.
    Ablate {
        #[arg(long)]
        data: PathBuf,
        /// Output directory: `ablation.csv` and `ablation.json`.
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated variants; append `:no-location` to drop the location feature.
        #[arg(long, value_delimiter = ',')]
        variants: Vec<String>,
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Answer a question about a panorama.
    Ask {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        question: String,
        /// Optional JSON file with the attention trace.
        #[arg(long)]
        sidecar: Option<PathBuf>,
    },
    /// Face images with attention overlays plus `attention.json`.
    Attention {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        question: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 128)]
        face_size: usize,
    },
}

impl Command {
    fn output_dir(&self) -> Option<&Path> {
        match self {
            Command::Project { out, .. }
            | Command::Synth { out, .. }
            | Command::BuildDataset { out, .. }
            | Command::Train { out, .. }
            | Command::Ablate { out, .. }
            | Command::Attention { out, .. } => Some(out),
            _ => None,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Command::Project { .. } => "project",
            Command::Backproject { .. } => "backproject",
            Command::Synth { .. } => "synth",
            Command::Qgen { .. } => "qgen",
            Command::BuildDataset { .. } => "build-dataset",
            Command::Train { .. } => "train",
            Command::Eval { .. } => "eval",
            Command::Ablate { .. } => "ablate",
            Command::Ask { .. } => "ask",
            Command::Attention { .. } => "attention",
        }
    }
}

#[derive(Debug, Args)]
struct ModelArgs {
    #[arg(long)]
    variant: Option<String>,
    /// Drop the location feature from the aggregated attention feature.
    #[arg(long)]
    no_location: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            let message = e.render().to_string();
            let first = message.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            report("usage", first, "arguments");
            return ExitCode::from(2);
        }
    };
    let context = cli.command.name();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            report(e.code(), &e.to_string(), context);
            ExitCode::FAILURE
        }
    }
}

fn report(code: &str, message: &str, context: &str) {
    eprintln!("{}", json!({ "error": code, "message": message, "context": context }));
}

fn run(cli: Cli) -> Result<()> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(Error::Config("--jobs must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.data.seed = seed;
        config.train.seed = seed;
    }
    let seed = config.data.seed;
    if let Some(out) = cli.command.output_dir() {
        io::check_output_dir(out)?;
    }
    match cli.command {
        Command::Project { input, out, face_size } => {
            let eq = io::load_equirect(&input)?;
            let cubemap = project_to_cubemaps(&eq, face_size)?;
            io::staged_dir(&out, |dir| io::save_cubemap(&cubemap, dir))
        }
        Command::Backproject { input, out, width } => {
            let cubemap = io::load_cubemap(&input)?;
            if width % 2 != 0 {
                return Err(Error::Aspect { width, height: width / 2 });
            }
            let eq = backproject_to_equirect(&cubemap, width, width / 2)?;
            io::save_png(&eq, &out)
        }
        Command::Synth { count, out, width } => synth(count, seed, width, &config, &out),
        Command::Qgen { scenes, out } => qgen(&scenes, seed, &config, &out),
        Command::BuildDataset { out, scenes, width } => {
            let mut dc = config.data.clone();
            if let Some(n) = scenes {
                dc.n_scenes = n;
            }
            if let Some(w) = width {
                dc.render_width = w;
            }
            let data = build_dataset(&dc)?;
            io::staged_dir(&out, |dir| data.save(dir))?;
            let counts: serde_json::Map<_, _> =
                Split::ALL.iter().map(|&s| (s.name().to_string(), json!(data.split(s).len()))).collect();
            println!("{}", json!({ "scenes": data.scenes.len(), "questions": counts }));
            Ok(())
        }
        Command::Train { data, out, model, epochs } => {
            apply_model_args(&mut config, &model)?;
            if let Some(e) = epochs {
                config.train.epochs = e;
            }
            let mc = config.model_config()?;
            config.train.validate()?;
            let data = DatasetSplits::load(&data)?;
            let outcome = train_with_progress(&mc, &data, &config.train, |log| {
                println!("{}", serde_json::to_string(log).expect("epoch log serializes"));
            })?;
            io::staged_dir(&out, |dir| {
                outcome.checkpoint.save(&dir.join("checkpoint.json"))?;
                io::write_json(
                    &dir.join("history.json"),
                    &json!({ "best_epoch": outcome.best_epoch, "epochs": outcome.history }),
                )
            })?;
            println!("{}", json!({ "best_epoch": outcome.best_epoch }));
            Ok(())
        }
        Command::Eval { checkpoint, data, split, out, predictions } => {
            let split = parse_split(&split)?;
            let checkpoint = Checkpoint::load(&checkpoint)?;
            let data = DatasetSplits::load(&data)?;
            let model = checkpoint.model()?;
            let inputs = prepare_inputs(&data, model.config())?;
            let (metrics, preds) = evaluate_model(&model, &checkpoint.vocab, data.split(split), &inputs)?;
            let metrics_json = io::to_json(&metrics)?;
            let mut pred_lines = String::new();
            for p in &preds {
                pred_lines.push_str(&serde_json::to_string(p)?);
                pred_lines.push('\n');
            }
            io::write_atomic(&out, metrics_json.as_bytes())?;
            if let Some(path) = predictions {
                if let Err(e) = io::write_atomic(&path, pred_lines.as_bytes()) {
                    let _ = std::fs::remove_file(&out);
                    return Err(e);
                }
            }
            println!("{}", serde_json::to_string(&metrics)?);
            Ok(())
        }
        Command::Ablate { data, out, variants, seeds, epochs } => {
            let specs =
                if variants.is_empty() { standard_variants() } else { variants.iter().map(|v| parse_variant_spec(v)).collect::<Result<_>>()? };
            let seeds = if seeds.is_empty() { config.seeds.clone() } else { seeds };
            if let Some(e) = epochs {
                config.train.epochs = e;
            }
            config.train.validate()?;
            let data = DatasetSplits::load(&data)?;
            let report = run_ablation(&specs, &data, config.dims, &config.train, &seeds)?;
            io::staged_dir(&out, |dir| report.save(dir))?;
            print!("{}", report.to_csv());
            Ok(())
        }
        Command::Ask { checkpoint, image, question, sidecar } => {
            let checkpoint = Checkpoint::load(&checkpoint)?;
            let image = io::load_equirect(&image)?;
            let (answer, trace) = harness::ask(&checkpoint, &image, &question)?;
            if let Some(path) = sidecar {
                io::write_json(
                    &path,
                    &json!({
                        "question": question,
                        "answer": answer,
                        "variant": checkpoint.config.input_variant,
                        "trace": trace,
                    }),
                )?;
            }
            println!("{answer}");
            Ok(())
        }
        Command::Attention { checkpoint, image, question, out, face_size } => {
            let checkpoint = Checkpoint::load(&checkpoint)?;
            let image = io::load_equirect(&image)?;
            let sidecar = io::staged_dir(&out, |dir| emit_attention_figures(&checkpoint, &image, &question, dir, face_size))?;
            println!("{}", sidecar.answer);
            Ok(())
        }
    }
}

fn synth(count: usize, seed: u64, width: usize, config: &RunConfig, out: &Path) -> Result<()> {
    if count == 0 {
        return Err(Error::Config("--count must be positive".into()));
    }
    let scenes = (0..count)
        .map(|i| {
            let spec = sample_scene(scene_seed(seed, i), &config.data.generation)?;
            let rendered = render_scene(&spec, width, width / 2)?;
            Ok((spec, rendered.image))
        })
        .collect::<Result<Vec<_>>>()?;
    io::staged_dir(out, |dir| {
        for (spec, image) in &scenes {
            let id = scene_id(spec.seed);
            io::save_png(image, &dir.join(format!("{id}.png")))?;
            io::write_json(&dir.join(format!("{id}.json")), spec)?;
        }
        Ok(())
    })
}

fn qgen(scenes: &Path, seed: u64, config: &RunConfig, out: &Path) -> Result<()> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(scenes)
        .map_err(|e| Error::Io { path: scenes.display().to_string(), source: e })?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Empty("scene directory has no scene JSON files"));
    }
    let mut pairs: Vec<QAPair> = Vec::new();
    for path in &paths {
        let spec: SceneSpec = io::read_json(path)?;
        spec.validate()?;
        let image = format!("{}.png", scene_id(spec.seed));
        let (qa, warnings) = generate_questions(&spec, &image, seed, &config.data.quota);
        for w in warnings {
            eprintln!("warning: {w}");
        }
        pairs.extend(qa);
    }
    io::write_jsonl(out, &pairs)
}

fn parse_split(s: &str) -> Result<Split> {
    Split::ALL
        .into_iter()
        .find(|x| x.name() == s)
        .ok_or_else(|| Error::Config(format!("unknown split `{s}` (train, validation, test)")))
}

fn parse_variant(s: &str) -> Result<InputVariant> {
    InputVariant::from_name(s).ok_or_else(|| {
        let names: Vec<&str> = InputVariant::ALL.iter().map(|v| v.name()).collect();
        Error::Config(format!("unknown variant `{s}` (one of {})", names.join(", ")))
    })
}

fn parse_variant_spec(s: &str) -> Result<VariantSpec> {
    match s.split_once(':') {
        None => Ok(VariantSpec::new(parse_variant(s)?)),
        Some((v, "no-location")) => Ok(VariantSpec::without_location(parse_variant(v)?)),
        Some((_, m)) => Err(Error::Config(format!("unknown variant modifier `{m}`"))),
    }
}

fn apply_model_args(config: &mut RunConfig, args: &ModelArgs) -> Result<()> {
    if let Some(v) = &args.variant {
        config.variant = parse_variant(v)?;
    }
    if args.no_location {
        config.use_location_feature = Some(false);
    }
    Ok(())
}
