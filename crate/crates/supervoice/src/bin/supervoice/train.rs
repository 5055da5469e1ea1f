//! The train subcommand: turns a corpus manifest into aligned two-stream
//! windows and fits the speaker classifier, saving the embedding model.

use std::collections::BTreeMap;

use rayon::prelude::*;

use supervoice::audio::read_wav;
use supervoice::neural::{
    file_sha256, save_checkpoint, ModelConfig, RmsProp, SpeakerClassifier, Tensor,
};
use supervoice::pipeline::{extract_windows, AlignConfig};
use supervoice::rng::SplitMix64;
use supervoice::spectrum::StftConfig;
use supervoice::synth::{Manifest, UtteranceKind};

use crate::settings::Settings;
use crate::TrainArgs;

pub fn train(args: &TrainArgs, settings: &Settings) -> Result<u8, String> {
    let epochs = settings.resolve("epochs", args.epochs)?.unwrap_or(10);
    let batch = settings.resolve("batch", args.batch)?.unwrap_or(128);
    let lr = settings.resolve("lr", args.lr)?.unwrap_or(0.001);
    let seed = settings.resolve("seed", args.seed)?.unwrap_or(0);
    let cap = settings.resolve("windows", args.windows)?.unwrap_or(8);
    if epochs == 0 {
        return Err("epochs must be at least 1".into());
    }
    if batch == 0 {
        return Err("batch must be at least 1".into());
    }

    let manifest = Manifest::load(&args.manifest)
        .map_err(|e| format!("{}: {e}", args.manifest.display()))?;
    let cfg = ModelConfig::default();
    let set = load_windows(&manifest, cap, &cfg)?;
    println!("windows\t{}\tspeakers\t{}", set.len(), set.speakers.len());

    let mut clf = SpeakerClassifier::<f32>::new(&cfg, set.speakers.len(), seed)
        .map_err(|e| e.to_string())?;
    let mut opt = RmsProp::new(lr, 0.95, 1e-7);
    let mut order: Vec<usize> = (0..set.len()).collect();
    for epoch in 0..epochs {
        let mut rng = SplitMix64::stream(seed, &[6, epoch as u64]);
        shuffle(&mut order, &mut rng);
        let mut loss_sum = 0f64;
        let mut steps = 0usize;
        for chunk in order.chunks(batch) {
            let (low, high, labels) = set.batch(chunk);
            let loss = clf
                .train_step(&low, &high, &labels, &mut opt)
                .map_err(|e| e.to_string())?;
            loss_sum += loss as f64;
            steps += 1;
        }
        println!("epoch\t{epoch}\tloss\t{:.6}", loss_sum / steps as f64);
    }

    let all: Vec<usize> = (0..set.len()).collect();
    let mut correct = 0usize;
    for chunk in all.chunks(batch) {
        let (low, high, labels) = set.batch(chunk);
        let predicted = clf.predict(&low, &high).map_err(|e| e.to_string())?;
        correct += predicted.iter().zip(&labels).filter(|(p, l)| p == l).count();
    }
    println!("train_accuracy\t{:.6}", correct as f64 / set.len() as f64);

    save_checkpoint(&mut clf.model, &args.out).map_err(|e| e.to_string())?;
    let hash = file_sha256(&args.out).map_err(|e| e.to_string())?;
    println!("checkpoint\t{}\tsha256\t{hash}", args.out.display());
    Ok(0)
}

struct TrainSet {
    low: Vec<Vec<f32>>,
    high: Vec<Vec<f32>>,
    labels: Vec<usize>,
    speakers: Vec<String>,
    low_len: usize,
    rows: usize,
    cols: usize,
}

impl TrainSet {
    fn len(&self) -> usize {
        self.low.len()
    }

    fn batch(&self, indices: &[usize]) -> (Tensor<f32>, Tensor<f32>, Vec<usize>) {
        let b = indices.len();
        let mut low = Tensor::zeros(&[b, self.low_len]);
        let mut high = Tensor::zeros(&[b, 1, self.rows, self.cols]);
        let mut labels = Vec::with_capacity(b);
        for (i, &idx) in indices.iter().enumerate() {
            low.data_mut()[i * self.low_len..(i + 1) * self.low_len]
                .copy_from_slice(&self.low[idx]);
            let patch = self.rows * self.cols;
            high.data_mut()[i * patch..(i + 1) * patch].copy_from_slice(&self.high[idx]);
            labels.push(self.labels[idx]);
        }
        (low, high, labels)
    }
}

/// Loads every genuine utterance in the manifest and windows it. Labels are
/// assigned by sorted speaker name so they do not depend on manifest order.
fn load_windows(manifest: &Manifest, cap: usize, cfg: &ModelConfig) -> Result<TrainSet, String> {
    let genuine: Vec<_> = manifest
        .entries
        .iter()
        .filter(|e| e.kind == UtteranceKind::Genuine)
        .collect();
    if genuine.is_empty() {
        return Err("manifest has no genuine utterances".into());
    }
    let mut label_of = BTreeMap::new();
    for e in &genuine {
        let next = label_of.len();
        label_of.entry(e.speaker.clone()).or_insert(next);
    }
    if label_of.len() < 2 {
        return Err(format!(
            "training needs at least 2 speakers, manifest has {}",
            label_of.len()
        ));
    }
    // BTreeMap iteration is sorted, so re-number in that order.
    let speakers: Vec<String> = label_of.keys().cloned().collect();
    let label_of: BTreeMap<&str, usize> = speakers
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i))
        .collect();

    let stft_cfg = StftConfig::default();
    let align = AlignConfig::default();
    let per_utt: Vec<(usize, supervoice::pipeline::UtteranceWindows)> = genuine
        .par_iter()
        .map(|e| -> Result<_, String> {
            let path = manifest.abs_path(e);
            let audio = read_wav(&path).map_err(|err| format!("{}: {err}", path.display()))?;
            let windows = extract_windows(&audio, &stft_cfg, &align, (8_000.0, 48_000.0), 16_000, cap)
                .map_err(|err| format!("{}: {err}", path.display()))?;
            if windows.rows != cfg.hf_rows || windows.cols != cfg.hf_cols {
                return Err(format!(
                    "{}: windows are {}x{} but the model wants {}x{}; \
                     was the corpus recorded at 192 kHz?",
                    path.display(),
                    windows.rows,
                    windows.cols,
                    cfg.hf_rows,
                    cfg.hf_cols
                ));
            }
            Ok((label_of[e.speaker.as_str()], windows))
        })
        .collect::<Result<_, _>>()?;

    let mut set = TrainSet {
        low: Vec::new(),
        high: Vec::new(),
        labels: Vec::new(),
        speakers,
        low_len: cfg.low_window,
        rows: cfg.hf_rows,
        cols: cfg.hf_cols,
    };
    for (label, windows) in per_utt {
        for (low, high) in windows.low.into_iter().zip(windows.high) {
            set.low.push(low);
            set.high.push(high);
            set.labels.push(label);
        }
    }
    Ok(set)
}

fn shuffle(xs: &mut [usize], rng: &mut SplitMix64) {
    for i in (1..xs.len()).rev() {
        let j = rng.next_below(i as u64 + 1) as usize;
        xs.swap(i, j);
    }
}
