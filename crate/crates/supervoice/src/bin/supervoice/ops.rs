//! The thin subcommands: corpus synthesis, preprocessing, spectrogram
//! export, liveness reports, enrollment, and verification.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use supervoice::audio::{read_wav, write_wav, AudioBuffer, SampleFormat};
use supervoice::liveness::{LivenessConfig, Verdict};
use supervoice::neural::ModelConfig;
use supervoice::pipeline::{liveness_report, EnrollmentStore, Pipeline, PipelineError};
use supervoice::preprocess::{downsample, remove_silence, ResampleSpec, SilenceParams};
use supervoice::spectrum::{stft, StftConfig};
use supervoice::synth::{gen_corpus_with, CorpusConfig, Manifest};

use crate::settings::Settings;
use crate::{EnrollArgs, LivenessArgs, PreprocessArgs, SpectrogramArgs, SynthArgs, VerifyArgs};

pub fn synth(args: &SynthArgs, settings: &Settings) -> Result<u8, String> {
    let seed = settings.resolve("seed", args.seed)?.unwrap_or(0);
    let mut cfg = CorpusConfig::new(args.speakers, args.utt, seed, &args.out);
    cfg.duration_secs = args.duration;
    cfg.sample_rate = args.rate;
    let manifest = gen_corpus_with(&cfg).map_err(|e| e.to_string())?;
    println!(
        "corpus\t{}\tfiles\t{}\tmanifest\t{}",
        args.out.display(),
        manifest.entries.len(),
        args.out.join("manifest.tsv").display()
    );
    Ok(0)
}

pub fn preprocess(args: &PreprocessArgs) -> Result<u8, String> {
    let inputs = gather_inputs(&args.files, args.manifest.as_deref())?;
    fs::create_dir_all(&args.out_dir)
        .map_err(|e| format!("creating {}: {e}", args.out_dir.display()))?;
    let lines: Vec<String> = inputs
        .par_iter()
        .map(|path| -> Result<String, String> {
            let audio = read_audio(path)?;
            let trimmed = remove_silence(&audio, &SilenceParams::for_rate(audio.sample_rate))
                .map_err(|e| format!("{}: {e}", path.display()))?;
            let out = match args.target_rate {
                Some(rate) => {
                    let spec = ResampleSpec::new(trimmed.sample_rate, rate)
                        .map_err(|e| format!("{}: {e}", path.display()))?;
                    downsample(&trimmed, &spec).map_err(|e| format!("{}: {e}", path.display()))?
                }
                None => trimmed,
            };
            let name = path
                .file_name()
                .ok_or_else(|| format!("{}: input has no file name", path.display()))?;
            let out_path = args.out_dir.join(name);
            write_wav(&out, &out_path, SampleFormat::Float32)
                .map_err(|e| format!("{}: {e}", out_path.display()))?;
            Ok(format!(
                "{}\t{}\tsamples\t{}\tkept\t{}",
                path.display(),
                out_path.display(),
                audio.len(),
                out.len()
            ))
        })
        .collect::<Result<_, _>>()?;
    for line in lines {
        println!("{line}");
    }
    Ok(0)
}

pub fn spectrogram(args: &SpectrogramArgs) -> Result<u8, String> {
    let audio = read_audio(&args.input)?;
    let cfg = if args.fine_time {
        StftConfig::fine_time(audio.sample_rate)
    } else {
        StftConfig::default()
    };
    let spec = stft(&audio, &cfg).map_err(|e| format!("{}: {e}", args.input.display()))?;
    let spec = match (args.band_low, args.band_high) {
        (Some(low), Some(high)) => spec
            .crop_band(low, high)
            .map_err(|e| format!("{}: {e}", args.input.display()))?,
        (None, None) => spec,
        _ => return Err("--band-low and --band-high must be given together".into()),
    };
    let mut out_file = std::io::BufWriter::new(
        fs::File::create(&args.out).map_err(|e| format!("{}: {e}", args.out.display()))?,
    );
    spec.write_binary(&mut out_file)
        .map_err(|e| format!("{}: {e}", args.out.display()))?;
    println!(
        "spectrogram\t{}\trows\t{}\tcols\t{}\tresolution_hz\t{}",
        args.out.display(),
        spec.rows(),
        spec.cols(),
        spec.freq_resolution()
    );
    Ok(0)
}

pub fn liveness(args: &LivenessArgs) -> Result<u8, String> {
    let inputs = gather_inputs(&args.files, args.manifest.as_deref())?;
    let single = inputs.len() == 1;
    let stft_cfg = StftConfig::default();
    let live_cfg = LivenessConfig::default();
    let reports: Vec<(f64, f64, Verdict)> = inputs
        .par_iter()
        .map(|path| {
            let audio = read_audio(path)?;
            let report = liveness_report(&audio, &stft_cfg, &live_cfg)
                .map_err(|e| format!("{}: {e}", path.display()))?;
            Ok((report.r1, report.r2, report.verdict))
        })
        .collect::<Result<_, String>>()?;
    let mut any_spoof = false;
    for (path, (r1, r2, verdict)) in inputs.iter().zip(&reports) {
        if *verdict == Verdict::Spoof {
            any_spoof = true;
        }
        if single {
            println!("{r1:.6}\t{r2:.6}\t{verdict}");
        } else {
            println!("{}\t{r1:.6}\t{r2:.6}\t{verdict}", path.display());
        }
    }
    Ok(if any_spoof { 2 } else { 0 })
}

pub fn enroll(args: &EnrollArgs, settings: &Settings) -> Result<u8, String> {
    let windows = settings.resolve("windows", args.windows)?.unwrap_or(0);
    let mut pipeline = load_pipeline(&args.model, windows)?;
    let mut store = if args.store.exists() {
        EnrollmentStore::load(&args.store)
            .map_err(|e| format!("{}: {e}", args.store.display()))?
    } else {
        EnrollmentStore::new(
            pipeline.embed_dim(),
            pipeline.checkpoint_hash().to_string(),
        )
    };
    let utterances: Vec<AudioBuffer> = args
        .files
        .iter()
        .map(|p| read_audio(p))
        .collect::<Result<_, _>>()?;
    match pipeline.enroll(&mut store, &args.speaker, &utterances) {
        Ok(n) => {
            store
                .save(&args.store)
                .map_err(|e| format!("{}: {e}", args.store.display()))?;
            println!(
                "enrolled\t{}\tutterances\t{}\tstore\t{}",
                args.speaker,
                n,
                args.store.display()
            );
            Ok(0)
        }
        Err(e @ PipelineError::LivenessRejected { .. }) => {
            eprintln!("error: {e}");
            Ok(2)
        }
        Err(e) => Err(e.to_string()),
    }
}

pub fn verify(args: &VerifyArgs, settings: &Settings) -> Result<u8, String> {
    let gamma = settings.resolve("gamma", args.gamma)?.ok_or(
        "no acceptance threshold: pass --gamma, set SUPERVOICE_GAMMA, or add gamma= to the config",
    )?;
    let windows = settings.resolve("windows", args.windows)?.unwrap_or(0);
    let mut pipeline = load_pipeline(&args.model, windows)?;
    let store =
        EnrollmentStore::load(&args.store).map_err(|e| format!("{}: {e}", args.store.display()))?;
    let single = args.files.len() == 1;
    let mut code = 0u8;
    for path in &args.files {
        let audio = read_audio(path)?;
        let prefix = if single {
            String::new()
        } else {
            format!("{}\t", path.display())
        };
        match pipeline.verify(&store, &args.speaker, &audio, gamma) {
            Ok(decision) => {
                let word = if decision.accepted {
                    "accept"
                } else {
                    code = 2;
                    "reject"
                };
                println!("{prefix}{:.6}\t{word}", decision.similarity);
            }
            Err(PipelineError::SpoofDetected { r1, r2 }) => {
                code = 2;
                println!("{prefix}SpoofDetected\tr1\t{r1:.6}\tr2\t{r2:.6}");
            }
            Err(e) => return Err(format!("{}: {e}", path.display())),
        }
    }
    Ok(code)
}

/// Explicit paths first, then every file in the manifest, in its order.
pub fn gather_inputs(
    files: &[PathBuf],
    manifest: Option<&Path>,
) -> Result<Vec<PathBuf>, String> {
    let mut inputs = files.to_vec();
    if let Some(path) = manifest {
        let manifest = Manifest::load(path).map_err(|e| format!("{}: {e}", path.display()))?;
        inputs.extend(manifest.entries.iter().map(|e| manifest.abs_path(e)));
    }
    if inputs.is_empty() {
        return Err("no input files: pass paths or --manifest".into());
    }
    Ok(inputs)
}

pub fn load_pipeline(model: &Path, max_windows: usize) -> Result<Pipeline, String> {
    let mut pipeline = Pipeline::from_checkpoint(model, &ModelConfig::default())
        .map_err(|e| format!("{}: {e}", model.display()))?;
    pipeline.max_windows = max_windows;
    Ok(pipeline)
}

pub fn read_audio(path: &Path) -> Result<AudioBuffer, String> {
    read_wav(path).map_err(|e| format!("{}: {e}", path.display()))
}
