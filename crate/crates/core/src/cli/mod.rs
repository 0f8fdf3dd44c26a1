//! Command-line entry point: gen-data, find-corr, train, translate, evaluate.
//!
//! Every command accepts `--config <file>` with flat `key = value` lines and one
//! `--<key>` flag per key; flags override the file. Exit status is 0 on success,
//! 1 on user error and 2 on internal error.

pub mod config;

use std::ffi::OsString;
use std::path::Path;

use clap::{Arg, ArgAction, ArgMatches, Command};
use rayon::prelude::*;

use crate::correspond::{match_triplet, CorrSource, MatchParams};
use crate::datagen::{generate_dataset, triplets_per_scene, DatagenConfig, Dataset, ShadingMode, ShapeRegistry};
use crate::error::{Error, Result};
use crate::evaluation::{evaluate, EvaluateOptions};
use crate::inference::{list_views, load_translator, load_views, save_sequence, translate_with_generator, DEFAULT_PATTERN};
use crate::losses::LossWeights;
use crate::training::{train, TrainConfig};
use config::{parse_flat, KeySpec, Resolved, AUTO};

pub const THREADS_ENV: &str = "MVC_THREADS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_USER: i32 = 1;
pub const EXIT_INTERNAL: i32 = 2;

struct CommandSpec {
    name: &'static str,
    about: &'static str,
    keys: fn() -> Vec<KeySpec>,
    run: fn(&Resolved) -> Result<()>,
}

const COMMANDS: [CommandSpec; 5] = [
    CommandSpec {
        name: "gen-data",
        about: "Render a paired glossy/diffuse multi-view dataset with ground-truth correspondences",
        keys: gen_data_keys,
        run: gen_data,
    },
    CommandSpec {
        name: "find-corr",
        about: "Add feature-matched correspondence triplets to a dataset",
        keys: find_corr_keys,
        run: find_corr,
    },
    CommandSpec {
        name: "train",
        about: "Train the translation networks, resuming from the newest checkpoint in --out",
        keys: train_keys,
        run: train_cmd,
    },
    CommandSpec {
        name: "translate",
        about: "Translate a glossy view sequence with the sliding-window protocol",
        keys: translate_keys,
        run: translate_cmd,
    },
    CommandSpec {
        name: "evaluate",
        about: "Write a JSON report of image error and inter-view consistency",
        keys: evaluate_keys,
        run: evaluate_cmd,
    },
];

fn pair(p: (impl ToString, impl ToString)) -> String {
    format!("{},{}", p.0.to_string(), p.1.to_string())
}

fn gen_data_keys() -> Vec<KeySpec> {
    let d = DatagenConfig::default();
    vec![
        KeySpec::required("out", "output dataset directory"),
        KeySpec::with_default("seed", d.seed, "master seed"),
        KeySpec::with_default("scenes", d.n_scenes, "number of scenes"),
        KeySpec::with_default("views", d.n_views, "views per scene along the camera arc"),
        KeySpec::with_default("resolution", d.resolution, "square view side in pixels"),
        KeySpec::with_default("patch_size", AUTO, "correspondence patch side (auto: half the resolution)"),
        KeySpec::with_default("gt_per_triplet", d.gt_per_triplet, "ground-truth correspondences per triplet"),
        KeySpec::with_default("shapes", "all", "comma-separated shape kinds, or `all`"),
        KeySpec::with_default("object_scale", d.object_scale, "object size multiplier"),
        KeySpec::with_default("roughness", pair(d.roughness), "roughness range low,high"),
        KeySpec::with_default("specular_strength", pair(d.specular_strength), "specular strength range"),
        KeySpec::with_default("color_jitter", d.color_jitter, "base color jitter"),
        KeySpec::with_default("light_count", pair(d.light_count), "light count range"),
        KeySpec::with_default("light_total", pair(d.light_total), "total irradiance range"),
        KeySpec::with_default("ambient", pair(d.ambient), "ambient sky weight range"),
    ]
}

fn find_corr_keys() -> Vec<KeySpec> {
    let d = MatchParams::default();
    vec![
        KeySpec::required("dataset", "dataset directory"),
        KeySpec::with_default("ratio", d.ratio, "descriptor ratio test threshold"),
        KeySpec::with_default("desc_max", d.desc_max, "largest accepted descriptor distance"),
        KeySpec::with_default("disp_max_frac", d.disp_max_frac, "largest displacement as a fraction of the width"),
    ]
}

fn train_keys() -> Vec<KeySpec> {
    let d = TrainConfig::default();
    vec![
        KeySpec::required("dataset", "dataset directory"),
        KeySpec::required("out", "run directory for checkpoints and metrics"),
        KeySpec::with_default("iterations", d.max_iterations, "total training iterations"),
        KeySpec::with_default("checkpoint_every", d.checkpoint_every, "checkpoint period (0: final only)"),
        KeySpec::with_default("seed", d.seed, "training seed"),
        KeySpec::with_default("lambda_adv", d.weights.lambda_adv, "adversarial weight"),
        KeySpec::with_default("lambda_cyc", d.weights.lambda_cyc, "cycle weight"),
        KeySpec::with_default("lambda_corr", d.weights.lambda_corr, "correspondence weight"),
        KeySpec::with_default("learning_rate", d.learning_rate, "Adam learning rate"),
        KeySpec::with_default("beta1", d.adam_betas.0, "Adam beta1"),
        KeySpec::with_default("beta2", d.adam_betas.1, "Adam beta2"),
        KeySpec::with_default("batch_size", d.batch_size, "samples per iteration"),
        KeySpec::with_default("patch_size", AUTO, "correspondence patch side (auto: dataset value)"),
        KeySpec::with_default("corr_source", d.corr_source.as_str(), "correspondences to train with: gt or feat"),
        KeySpec::with_default("generator_channels", d.generator_channels, "generator base channels"),
        KeySpec::with_default("discriminator_channels", d.discriminator_channels, "discriminator base channels"),
        KeySpec::with_default("discriminator_layers", d.discriminator_layers, "stride-2 layers per discriminator"),
        KeySpec::with_default("extractor", &d.extractor, "feature extractor of the correspondence loss"),
    ]
}

fn translate_keys() -> Vec<KeySpec> {
    vec![
        KeySpec::required("checkpoint", "training checkpoint"),
        KeySpec::required("input_dir", "directory of input views"),
        KeySpec::required("output_dir", "directory for translated views"),
        KeySpec::with_default("pattern", DEFAULT_PATTERN, "glob selecting the input views"),
    ]
}

fn evaluate_keys() -> Vec<KeySpec> {
    let d = EvaluateOptions::default();
    vec![
        KeySpec::required("checkpoint", "training checkpoint"),
        KeySpec::required("dataset", "dataset directory"),
        KeySpec::required("out", "report file"),
        KeySpec::with_default("corr_source", AUTO, "gt, feat or auto"),
        KeySpec::with_default("extractor", &d.extractor, "feature extractor of the consistency score"),
        KeySpec::with_default("patch_size", AUTO, "patch side (auto: dataset value)"),
    ]
}

fn build_cli() -> Command {
    let mut cmd = Command::new("glossfree")
        .about("Multi-view specular-to-diffuse translation")
        .version(env!("CARGO_PKG_VERSION"))
        .subcommand_required(true)
        .arg_required_else_help(true);
    for spec in &COMMANDS {
        let mut sub = Command::new(spec.name).about(spec.about).arg(
            Arg::new("config")
                .long("config")
                .value_name("FILE")
                .help("flat key = value configuration file"),
        );
        for k in (spec.keys)() {
            let help = match &k.default {
                Some(d) => format!("{} [default: {d}]", k.help),
                None => format!("{} [required]", k.help),
            };
            sub = sub.arg(
                Arg::new(k.name)
                    .long(k.flag())
                    .value_name(k.name.to_uppercase())
                    .action(ArgAction::Set)
                    .help(help),
            );
        }
        cmd = cmd.subcommand(sub);
    }
    cmd
}

fn resolve(spec: &CommandSpec, m: &ArgMatches) -> Result<Resolved> {
    let file_entries = match m.get_one::<String>("config") {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Argument(format!("--config: cannot read {path}: {e}")))?;
            parse_flat(&text, path)?
        }
        None => Vec::new(),
    };
    let keys = (spec.keys)();
    let flags: Vec<(&'static str, String)> = keys
        .iter()
        .filter_map(|k| m.get_one::<String>(k.name).map(|v| (k.name, v.clone())))
        .collect();
    Resolved::new(spec.name, keys, &file_entries, &flags)
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Config(format!("{THREADS_ENV} must be a positive integer, got `{raw}`")))?;
    // a second call in the same process keeps the first pool
    if rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
        log::debug!("global thread pool already configured");
    }
    Ok(())
}

/// Parses `args` (including the program name), runs the command and returns the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match build_cli().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USER } else { EXIT_OK };
        }
    };
    let Some((name, sub)) = matches.subcommand() else {
        return EXIT_USER;
    };
    let spec = COMMANDS.iter().find(|c| c.name == name).expect("clap validated the subcommand");
    let result = configure_threads()
        .and_then(|_| resolve(spec, sub))
        .and_then(|r| (spec.run)(&r));
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_user_error() {
                EXIT_USER
            } else {
                EXIT_INTERNAL
            }
        }
    }
}

fn require_dir(r: &Resolved, key: &str) -> Result<std::path::PathBuf> {
    let p = r.path(key);
    if !p.is_dir() {
        return Err(Error::Argument(format!("--{}: directory {} does not exist", key.replace('_', "-"), p.display())));
    }
    Ok(p)
}

fn require_file(r: &Resolved, key: &str) -> Result<std::path::PathBuf> {
    let p = r.path(key);
    if !p.is_file() {
        return Err(Error::Argument(format!("--{}: file {} does not exist", key.replace('_', "-"), p.display())));
    }
    Ok(p)
}

fn open_dataset(r: &Resolved) -> Result<Dataset> {
    let root = require_dir(r, "dataset")?;
    if !root.join(crate::datagen::MANIFEST_FILE).is_file() {
        return Err(Error::Argument(format!("--dataset: {} has no manifest", root.display())));
    }
    Dataset::open(&root)
}

fn gen_data(r: &Resolved) -> Result<()> {
    let shapes = match r.raw("shapes") {
        "all" => ShapeRegistry::default().names().into_iter().map(String::from).collect(),
        list => list.split(',').map(|s| s.trim().to_string()).collect(),
    };
    let cfg = DatagenConfig {
        seed: r.get("seed")?,
        n_scenes: r.get("scenes")?,
        n_views: r.get("views")?,
        resolution: r.get("resolution")?,
        patch_size: r.get_auto("patch_size")?,
        gt_per_triplet: r.get("gt_per_triplet")?,
        shapes,
        object_scale: r.get("object_scale")?,
        roughness: r.get_pair("roughness")?,
        specular_strength: r.get_pair("specular_strength")?,
        color_jitter: r.get("color_jitter")?,
        light_count: r.get_pair("light_count")?,
        light_total: r.get_pair("light_total")?,
        ambient: r.get_pair("ambient")?,
        ..DatagenConfig::default()
    };
    cfg.validate()?;
    let out = r.path("out");
    r.write_echo(&out)?;
    let manifest = generate_dataset(&cfg, &out)?;
    println!(
        "wrote {} scenes and {} triplets to {}",
        manifest.scenes.len(),
        manifest.triplets.len(),
        out.display()
    );
    Ok(())
}

fn find_corr(r: &Resolved) -> Result<()> {
    let mut ds = open_dataset(r)?;
    let params = MatchParams {
        ratio: r.get("ratio")?,
        desc_max: r.get("desc_max")?,
        disp_max_frac: r.get("disp_max_frac")?,
        patch_size: Some(ds.patch_size()),
    };
    r.write_echo(&ds.root)?;
    let scenes: Vec<(u64, usize)> = ds.manifest.scenes.iter().map(|s| (s.scene_id, s.views)).collect();
    let found = scenes
        .par_iter()
        .map(|&(id, n)| {
            let views = ds.load_views(id, ShadingMode::Glossy)?;
            Ok((0..triplets_per_scene(n))
                .map(|t| (id, t, match_triplet([&views[t], &views[t + 1], &views[t + 2]], &params)))
                .collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;
    let (mut total, mut accepted) = (0, 0);
    for (id, t, corrs) in found.into_iter().flatten() {
        total += 1;
        accepted += usize::from(corrs.len() >= ds.manifest.min_corr);
        ds.replace_records(id, t, CorrSource::Feat, &corrs)?;
    }
    ds.save_manifest()?;
    println!(
        "matched {total} triplets; {accepted} have at least {} feature correspondences",
        ds.manifest.min_corr
    );
    Ok(())
}

fn train_cmd(r: &Resolved) -> Result<()> {
    let ds = open_dataset(r)?;
    let cfg = TrainConfig {
        weights: LossWeights::new(r.get("lambda_adv")?, r.get("lambda_cyc")?, r.get("lambda_corr")?)?,
        learning_rate: r.get("learning_rate")?,
        adam_betas: (r.get("beta1")?, r.get("beta2")?),
        batch_size: r.get("batch_size")?,
        max_iterations: r.get("iterations")?,
        checkpoint_every: r.get("checkpoint_every")?,
        patch_size: r.get_auto("patch_size")?,
        seed: r.get("seed")?,
        corr_source: CorrSource::parse(r.raw("corr_source"))?,
        generator_channels: r.get("generator_channels")?,
        discriminator_channels: r.get("discriminator_channels")?,
        discriminator_layers: r.get("discriminator_layers")?,
        extractor: r.raw("extractor").to_string(),
        ..TrainConfig::default()
    };
    cfg.validate()?;
    let out = r.path("out");
    r.write_echo(&out)?;
    let state = train(&ds, &cfg, &out)?;
    match state.history.back() {
        Some(last) => println!("trained to iteration {}; last total loss {:.4}", state.iteration, last.total),
        None => println!("trained to iteration {}", state.iteration),
    }
    Ok(())
}

fn translate_cmd(r: &Resolved) -> Result<()> {
    let ckpt = require_file(r, "checkpoint")?;
    let input = require_dir(r, "input_dir")?;
    let files = list_views(&input, r.raw("pattern"))?;
    if files.is_empty() {
        return Err(Error::Argument(format!(
            "--input-dir: no files in {} match `{}`",
            input.display(),
            r.raw("pattern")
        )));
    }
    let g = load_translator(&ckpt)?;
    let out_views = translate_with_generator(&g, &load_views(&files)?)?;
    let out = r.path("output_dir");
    r.write_echo(&out)?;
    let written = save_sequence(&out_views, &out)?;
    println!("translated {} views into {}", written.len(), out.display());
    Ok(())
}

fn evaluate_cmd(r: &Resolved) -> Result<()> {
    let ckpt = require_file(r, "checkpoint")?;
    let ds = open_dataset(r)?;
    let corr_source = match r.raw("corr_source") {
        AUTO => None,
        s => Some(CorrSource::parse(s)?),
    };
    let opts = EvaluateOptions {
        corr_source,
        extractor: r.raw("extractor").to_string(),
        patch_size: r.get_auto("patch_size")?,
    };
    let report = evaluate(&ds, &ckpt, &opts)?;
    let out = r.path("out");
    let dir = out.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    r.write_echo(dir)?;
    report.write(&out)?;
    let show = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{v:.3}"));
    println!(
        "glossy mse {} / model mse {} / consistency {} (diffuse {}) -> {}",
        show(report.aggregate.glossy_mse),
        show(report.aggregate.model_mse),
        show(report.aggregate.consistency_model),
        show(report.aggregate.consistency_diffuse),
        out.display()
    );
    Ok(())
}
