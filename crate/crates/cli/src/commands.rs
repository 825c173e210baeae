//! Command implementations. Every command resolves its configuration,
//! dispatches on the configured precision and writes its artifacts
//! atomically into the output directory, recording each in the manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use audiolrp::audio::{pad_random, resample_to_8k, spectrogram_input, read_wav, write_wav, PaddedSignal, TARGET_RATE};
use audiolrp::blob::{sha256_hex, write_atomic};
use audiolrp::dataset::{synth_generate, FoldRole, InputRepresentation, Task, METADATA_FILE};
use audiolrp::eval::{accuracy, perturbation_sweep, scale_frequency_axis, FoldSummary, SweepConfig};
use audiolrp::lrp::explain;
use audiolrp::nn::checkpoint::{decode_checkpoint, encode_checkpoint};
use audiolrp::nn::{predict, train, Mode, Model};
use audiolrp::{seed, Error, Real, Result};
use serde::Serialize;

use crate::config::{ModelKind, Precision, RunConfig};
use crate::data;
use crate::manifest::{self, Entry};
use crate::render;
use crate::{Command, Common, ModelArgs};

macro_rules! dispatch {
    ($cfg:expr, $f:ident($($arg:expr),*)) => {
        match $cfg.precision {
            Precision::F32 => $f::<f32>($($arg),*),
            Precision::F64 => $f::<f64>($($arg),*),
        }
    };
}
pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Train { common, fold } => {
            let cfg = resolve(&common)?;
            dispatch!(cfg, cmd_train(&cfg, fold))
        }
        Command::Evaluate { common, fold } => {
            let cfg = resolve(&common)?;
            dispatch!(cfg, cmd_evaluate(&cfg, fold))
        }
        Command::Explain {
            common,
            model,
            record,
            input,
            target,
        } => {
            let cfg = resolve(&common)?;
            let source = match (record, input) {
                (_, Some(path)) => ExplainInput::File(path),
                (r, None) => ExplainInput::Record(r.unwrap_or(0)),
            };
            dispatch!(cfg, cmd_explain(&cfg, &model, &source, target))
        }
        Command::Perturb { common, model } => {
            let cfg = resolve(&common)?;
            dispatch!(cfg, cmd_perturb(&cfg, &model))
        }
        Command::Freqscale { common, model, factors } => {
            let mut cfg = resolve(&common)?;
            if let Some(f) = factors {
                cfg.freqscale.factors = f;
                cfg.validate()?;
            }
            dispatch!(cfg, cmd_freqscale(&cfg, &model))
        }
        Command::Synth { common } => cmd_synth(&resolve(&common)?),
    }
}

/// Loads the configuration and applies command-line overrides.
pub fn resolve(common: &Common) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(&common.config)?;
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(out) = &common.out {
        cfg.out = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn rotations(cfg: &RunConfig, fold: Option<usize>) -> Vec<usize> {
    fold.map_or_else(|| cfg.data.rotations.clone(), |k| vec![k])
}

pub fn checkpoint_name(rotation: usize) -> String {
    format!("model_fold{rotation}.ckpt")
}

fn out_dir(cfg: &RunConfig) -> Result<&Path> {
    std::fs::create_dir_all(&cfg.out).map_err(|e| Error::Data(format!("{}: {e}", cfg.out.display())))?;
    Ok(&cfg.out)
}

fn entry(cfg: &RunConfig, artifact: &str, command: &str, model_hash: &str) -> Entry {
    Entry {
        artifact: artifact.to_string(),
        command: command.to_string(),
        config_hash: cfg.hash(),
        model_hash: model_hash.to_string(),
        seed: cfg.seed,
    }
}

fn write(dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    write_atomic(&dir.join(name), bytes)
}

fn cmd_train<F: Real>(cfg: &RunConfig, fold: Option<usize>) -> Result<()> {
    let out = out_dir(cfg)?;
    for rotation in rotations(cfg, fold) {
        let splits = data::load_splits(cfg, rotation, &[FoldRole::Train, FoldRole::Validation], out)?;
        let repr = data::at_precision::<F>(&data::fit_representation(cfg, &splits.train)?)?;
        let train_set = data::training_set(&splits, &repr);
        let validation = data::eval_set(cfg, &splits, FoldRole::Validation, &repr);
        let tc = cfg.train_config(rotation)?;
        let mut model = Model::<F>::init(cfg.model_spec()?, &mut seed::rng(cfg.seed, &format!("init/{rotation}")));

        let mut log = String::from("iteration,loss,val_accuracy\n");
        let mut last_val = None;
        train(&mut model, &train_set, &tc, |step, m| {
            let done = step.iteration + 1;
            let due = done == tc.iterations || (cfg.train.eval_every > 0 && done % cfg.train.eval_every == 0);
            let val = if due && !validation.items().is_empty() {
                let a = accuracy(m, &validation)?;
                last_val = Some(a);
                a.to_string()
            } else {
                String::new()
            };
            log.push_str(&format!("{done},{},{val}\n", step.loss));
            Ok(())
        })?;

        let aux = data::representation_aux::<F>(&repr);
        let aux_refs: Vec<(&str, &_)> = aux.iter().map(|(n, t)| (*n, t)).collect();
        let bytes = encode_checkpoint(&model, &aux_refs);
        let model_hash = sha256_hex(&bytes);
        let ckpt = checkpoint_name(rotation);
        let log_name = format!("train_log_fold{rotation}.csv");
        write(out, &ckpt, &bytes)?;
        write(out, &log_name, log.as_bytes())?;
        manifest::record(
            out,
            &[entry(cfg, &ckpt, "train", &model_hash), entry(cfg, &log_name, "train", &model_hash)],
        )?;
        match last_val {
            Some(a) => println!("fold {rotation}: validation accuracy {a:.4}"),
            None => println!("fold {rotation}: trained (no validation split)"),
        }
    }
    Ok(())
}

struct Loaded<F> {
    model: Model<F>,
    repr: InputRepresentation,
    hash: String,
}

fn load_model<F: Real>(cfg: &RunConfig, args: &ModelArgs, rotation: usize) -> Result<Loaded<F>> {
    let path = args
        .checkpoint
        .clone()
        .unwrap_or_else(|| cfg.out.join(checkpoint_name(rotation)));
    let bytes = audiolrp::blob::read_file(&path)?;
    let ckpt = decode_checkpoint::<F>(&bytes, Some(&cfg.model_spec()?))?;
    let repr = data::representation_from_checkpoint(&ckpt)?;
    Ok(Loaded {
        model: ckpt.model,
        repr,
        hash: sha256_hex(&bytes),
    })
}

fn first_rotation(cfg: &RunConfig, args: &ModelArgs) -> usize {
    args.fold.unwrap_or_else(|| cfg.data.rotations.first().copied().unwrap_or(0))
}

fn cmd_evaluate<F: Real>(cfg: &RunConfig, fold: Option<usize>) -> Result<()> {
    let out = out_dir(cfg)?;
    let mut csv = String::from("task,fold,accuracy,n\n");
    let mut accs = Vec::new();
    let mut total = 0;
    let mut hashes = Vec::new();
    for rotation in rotations(cfg, fold) {
        let args = ModelArgs {
            fold: Some(rotation),
            checkpoint: None,
        };
        let loaded = load_model::<F>(cfg, &args, rotation)?;
        let splits = data::load_splits(cfg, rotation, &[FoldRole::Test], out)?;
        let test = data::eval_set(cfg, &splits, FoldRole::Test, &loaded.repr);
        let a = accuracy(&loaded.model, &test)?;
        let n = test.items().len();
        csv.push_str(&format!("{},{rotation},{a},{n}\n", cfg.task));
        println!("fold {rotation}: test accuracy {a:.4} (n={n})");
        accs.push(a);
        total += n;
        hashes.push(loaded.hash);
    }
    let summary = FoldSummary::from_folds(accs)?;
    csv.push_str(&format!("{},mean,{},{total}\n", cfg.task, summary.mean));
    csv.push_str(&format!("{},std,{},{total}\n", cfg.task, summary.std));
    println!("mean {:.4} std {:.4}", summary.mean, summary.std);
    write(out, "evaluate.csv", csv.as_bytes())?;
    let model_hash = if hashes.len() == 1 { hashes.remove(0) } else { sha256_hex(hashes.join(",").as_bytes()) };
    manifest::record(out, &[entry(cfg, "evaluate.csv", "evaluate", &model_hash)])
}

pub enum ExplainInput {
    Record(usize),
    File(PathBuf),
}

fn cmd_explain<F: Real>(cfg: &RunConfig, args: &ModelArgs, source: &ExplainInput, target: Option<usize>) -> Result<()> {
    let out = out_dir(cfg)?;
    let rotation = first_rotation(cfg, args);
    let loaded = load_model::<F>(cfg, args, rotation)?;
    let (padded, name): (PaddedSignal, String) = match source {
        ExplainInput::Record(i) => {
            let splits = data::load_splits(cfg, rotation, &[FoldRole::Test], out)?;
            let test = data::eval_set(cfg, &splits, FoldRole::Test, &loaded.repr);
            if *i >= test.items().len() {
                return Err(Error::Data(format!("record {i} out of range ({} test records)", test.items().len())));
            }
            (test.fixed_padded(*i, data::placement_seed(cfg, FoldRole::Test))?, format!("record{i}"))
        }
        ExplainInput::File(path) => {
            let w = read_wav(path)?;
            let w = if w.sample_rate() == TARGET_RATE { w } else { resample_to_8k(&w)? };
            let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("input").to_string();
            (pad_random(&w, &mut seed::rng(cfg.seed, "place/input"))?, stem)
        }
    };
    let x = loaded.repr.encode::<F>(&padded)?;
    x.ensure_finite("explained input")?;
    let (logits, trace) = loaded.model.forward_traced(&x, Mode::Eval)?;
    let predicted = logits.argmax();
    let target = target.unwrap_or(predicted);
    if target >= cfg.classes() {
        return Err(Error::Config(format!("target class {target} out of range")));
    }
    let map = explain(&loaded.model, &trace, target, &cfg.lrp)?;
    map.relevance.ensure_finite("relevance map")?;
    let relevance = map.relevance.to_f64_vec();

    let image = match &loaded.repr {
        InputRepresentation::Waveform => render::waveform_heatmap(padded.samples(), &relevance)?,
        InputRepresentation::Spectrogram { .. } => {
            let base = spectrogram_input(&padded);
            render::spectrogram_heatmap(&relevance, base.bins(), base.frames(), Some(base.data()))?
        }
    };
    let stem = format!("explain_{name}");
    let files = [
        (format!("{stem}.rel"), map.encode(&loaded.model.spec().descriptor())),
        (format!("{stem}.txt"), map.sidecar(&loaded.hash).into_bytes()),
        (format!("{stem}.ppm"), image.to_ppm()),
    ];
    for (n, b) in &files {
        write(out, n, b)?;
    }
    let entries: Vec<Entry> = files.iter().map(|(n, _)| entry(cfg, n, "explain", &loaded.hash)).collect();
    manifest::record(out, &entries)?;
    println!(
        "{name}: predicted {predicted}, explained {target}, logit {:.6}, relevance total {:.6}",
        logits.to_f64_vec()[target],
        map.total()
    );
    Ok(())
}

/// Fractions over which the summary line averages accuracy.
const SMALL_FRACTIONS: [f64; 3] = [0.01, 0.05, 0.1];

fn cmd_perturb<F: Real>(cfg: &RunConfig, args: &ModelArgs) -> Result<()> {
    let out = out_dir(cfg)?;
    let rotation = first_rotation(cfg, args);
    let loaded = load_model::<F>(cfg, args, rotation)?;
    let splits = data::load_splits(cfg, rotation, &[FoldRole::Test], out)?;
    let test = data::eval_set(cfg, &splits, FoldRole::Test, &loaded.repr);
    let limit = (cfg.perturb.max_examples > 0).then_some(cfg.perturb.max_examples);
    let examples = test.materialize::<F>(limit)?;
    let sweep = SweepConfig {
        strategies: cfg.perturb.strategies.clone(),
        fractions: cfg.perturb.fractions.clone(),
        relevance_order: cfg.perturb.relevance_order,
        lrp: cfg.lrp,
        seed: seed::derive(cfg.seed, "perturb"),
    };
    let (curve, audit) = perturbation_sweep(&cfg.task.to_string(), &loaded.model, &examples, &sweep)?;

    let csv_name = format!("perturbation_fold{rotation}.csv");
    let audit_name = format!("perturbation_audit_fold{rotation}.jsonl");
    let mut files = vec![(csv_name, curve.to_csv().into_bytes())];
    let mut lines: String = audit.iter().map(|a| a.to_json_line() + "\n").collect();
    if lines.is_empty() {
        lines.push('\n');
    }
    files.push((audit_name, lines.into_bytes()));
    if cfg.perturb.plot {
        files.push((format!("perturbation_fold{rotation}.ppm"), render::curve_plot(&curve).to_ppm()));
    }
    for (n, b) in &files {
        write(out, n, b)?;
    }
    let entries: Vec<Entry> = files.iter().map(|(n, _)| entry(cfg, n, "perturb", &loaded.hash)).collect();
    manifest::record(out, &entries)?;

    println!("clean accuracy {:.4} (n={}), chance {:.4}", curve.clean_accuracy, examples.len(), curve.chance);
    for kind in &cfg.perturb.strategies {
        if let Some(m) = curve.mean_accuracy(*kind, &SMALL_FRACTIONS) {
            println!("{kind}: mean accuracy over 1/5/10% = {m:.4}");
        }
    }
    Ok(())
}

/// Whether `factor` manipulates examples of `class`: factors above 1 raise
/// the low-pitched class 0, factors below 1 lower the high-pitched class 1.
pub fn factor_applies(factor: f64, class: usize) -> bool {
    (factor > 1.0 && class == 0) || (factor < 1.0 && class == 1) || factor == 1.0
}

fn cmd_freqscale<F: Real>(cfg: &RunConfig, args: &ModelArgs) -> Result<()> {
    if cfg.task != Task::Gender {
        return Err(Error::Config("freqscale needs the gender task".into()));
    }
    if cfg.model != ModelKind::Alexnet {
        return Err(Error::Config("freqscale needs a spectrogram model".into()));
    }
    let out = out_dir(cfg)?;
    let rotation = first_rotation(cfg, args);
    let loaded = load_model::<F>(cfg, args, rotation)?;
    let splits = data::load_splits(cfg, rotation, &[FoldRole::Test], out)?;
    let test = data::eval_set(cfg, &splits, FoldRole::Test, &loaded.repr);
    let place = data::placement_seed(cfg, FoldRole::Test);
    let factors = &cfg.freqscale.factors;

    // correct[f][class] and count[class]
    let mut correct = vec![[0usize; 2]; factors.len()];
    let mut count = [0usize; 2];
    let mut combined = (0usize, 0usize);
    for (i, (_, label)) in test.items().iter().enumerate() {
        let s = spectrogram_input(&test.fixed_padded(i, place)?);
        count[*label] += 1;
        let mut used = false;
        for (fi, &factor) in factors.iter().enumerate() {
            if !factor_applies(factor, *label) {
                continue;
            }
            let x = loaded.repr.encode_spectrogram::<F>(&scale_frequency_axis(&s, factor)?)?;
            let ok = predict(&loaded.model, &x)? == *label;
            correct[fi][*label] += ok as usize;
            if !used && factor != 1.0 {
                combined.0 += ok as usize;
                combined.1 += 1;
                used = true;
            }
        }
    }

    let mut csv = String::from("task,factor,class,accuracy,n\n");
    for (fi, &factor) in factors.iter().enumerate() {
        let classes: Vec<usize> = (0..2).filter(|&c| factor_applies(factor, c) && count[c] > 0).collect();
        for &c in &classes {
            csv.push_str(&format!(
                "{},{factor},{c},{},{}\n",
                cfg.task,
                correct[fi][c] as f64 / count[c] as f64,
                count[c]
            ));
        }
        if classes.len() == 2 {
            let n = count[0] + count[1];
            csv.push_str(&format!(
                "{},{factor},all,{},{n}\n",
                cfg.task,
                (correct[fi][0] + correct[fi][1]) as f64 / n as f64
            ));
        }
    }
    if combined.1 > 0 {
        let a = combined.0 as f64 / combined.1 as f64;
        csv.push_str(&format!("{},combined,all,{a},{}\n", cfg.task, combined.1));
        println!("combined manipulated accuracy {a:.4} (n={})", combined.1);
    }
    let name = format!("freqscale_fold{rotation}.csv");
    write(out, &name, csv.as_bytes())?;
    manifest::record(out, &[entry(cfg, &name, "freqscale", &loaded.hash)])?;
    print!("{csv}");
    Ok(())
}

#[derive(Serialize)]
struct SpeakerMeta {
    gender: String,
}

/// Writes `data.train_per_class` synthetic takes per class as
/// `<out>/<speaker>/<digit>_<speaker>_<take>.wav` plus speaker metadata.
fn cmd_synth(cfg: &RunConfig) -> Result<()> {
    let out = out_dir(cfg)?;
    let synth = cfg.synth_config(0, cfg.data.train_per_class);
    let records = synth_generate(&synth, &mut seed::rng(cfg.seed, "synth/tree"))?;
    let mut meta = BTreeMap::new();
    for r in &records {
        let dir = out.join(format!("{:02}", r.speaker));
        std::fs::create_dir_all(&dir).map_err(|e| Error::Data(format!("{}: {e}", dir.display())))?;
        write_wav(&dir.join(format!("{}_{:02}_{}.wav", r.digit, r.speaker, r.take)), &r.load()?)?;
        let gender = match r.gender {
            audiolrp::dataset::Gender::Female => "female",
            audiolrp::dataset::Gender::Male => "male",
        };
        meta.insert(format!("{:02}", r.speaker), SpeakerMeta { gender: gender.into() });
    }
    let text = serde_json::to_string_pretty(&meta).map_err(|e| Error::Data(e.to_string()))?;
    write(out, METADATA_FILE, text.as_bytes())?;
    manifest::record(out, &[entry(cfg, METADATA_FILE, "synth", "-")])?;
    println!("wrote {} recordings of {} speakers to {}", records.len(), meta.len(), out.display());
    Ok(())
}
