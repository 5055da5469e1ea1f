//! The eval subcommand: scores a whole corpus. Verification quality comes
//! from an enroll-some, verify-the-rest protocol over genuine utterances;
//! the replay gate is scored over every file in the manifest.

use std::collections::BTreeMap;

use rayon::prelude::*;

use supervoice::liveness::{LivenessConfig, LivenessReport, Verdict};
use supervoice::metrics::{TrialLabel, TrialSet};
use supervoice::pipeline::{cosine_similarity, liveness_report, UtteranceOutcome};
use supervoice::spectrum::StftConfig;
use supervoice::synth::{Manifest, UtteranceKind};

use crate::ops;
use crate::settings::Settings;
use crate::EvalArgs;

pub fn eval(args: &EvalArgs, settings: &Settings) -> Result<u8, String> {
    let enroll_n = settings.resolve("enroll_n", args.enroll_n)?.unwrap_or(3);
    let gamma: Option<f64> = settings.resolve("gamma", args.gamma)?;
    let windows = settings.resolve("windows", args.windows)?.unwrap_or(0);
    if enroll_n == 0 {
        return Err("enroll_n must be at least 1".into());
    }
    let manifest = Manifest::load(&args.manifest)
        .map_err(|e| format!("{}: {e}", args.manifest.display()))?;
    let mut pipeline = ops::load_pipeline(&args.model, windows)?;

    // Gate quality over every file, genuine and replayed alike. This half
    // never touches the model, so it parallelizes freely.
    let stft_cfg = StftConfig::default();
    let live_cfg = LivenessConfig::default();
    let gate: Vec<(bool, f64, bool)> = manifest
        .entries
        .par_iter()
        .map(|entry| -> Result<_, String> {
            let path = manifest.abs_path(entry);
            let audio = ops::read_audio(&path)?;
            let report = liveness_report(&audio, &stft_cfg, &live_cfg)
                .map_err(|e| format!("{}: {e}", path.display()))?;
            Ok((
                entry.kind == UtteranceKind::Genuine,
                liveness_score(&report),
                report.verdict == Verdict::Live,
            ))
        })
        .collect::<Result<_, _>>()?;
    let truth: Vec<bool> = gate.iter().map(|g| g.0).collect();
    let predicted: Vec<bool> = gate.iter().map(|g| g.2).collect();
    let live_cer =
        supervoice::metrics::cer(&predicted, &truth).map_err(|e| e.to_string())?;
    let genuine_scores: Vec<f64> =
        gate.iter().filter(|g| g.0).map(|g| g.1).collect();
    let replay_scores: Vec<f64> =
        gate.iter().filter(|g| !g.0).map(|g| g.1).collect();
    let live_eer = TrialSet::from_classes(&genuine_scores, &replay_scores)
        .and_then(|t| t.eer())
        .map_err(|e| format!("liveness trials: {e}"))?;

    // Verification protocol: the first enroll_n genuine utterances of each
    // speaker enroll them, every remaining genuine utterance is claimed
    // against every speaker.
    let mut by_speaker: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, entry) in manifest.entries.iter().enumerate() {
        if entry.kind == UtteranceKind::Genuine {
            by_speaker.entry(&entry.speaker).or_default().push(i);
        }
    }
    if by_speaker.len() < 2 {
        return Err(format!(
            "verification needs at least 2 speakers, manifest has {}",
            by_speaker.len()
        ));
    }
    for (speaker, utts) in &by_speaker {
        if utts.len() <= enroll_n {
            return Err(format!(
                "speaker {speaker} has {} genuine utterances; \
                 need more than enroll_n={enroll_n} to have anything to verify",
                utts.len()
            ));
        }
    }

    // Embed each genuine utterance exactly once; the model carries
    // scratch state, so this half runs sequentially.
    let mut embeds: BTreeMap<&str, Vec<Vec<f32>>> = BTreeMap::new();
    for (speaker, utts) in &by_speaker {
        for &i in utts {
            let path = manifest.abs_path(&manifest.entries[i]);
            let audio = ops::read_audio(&path)?;
            let outcome = pipeline
                .process(&audio)
                .map_err(|e| format!("{}: {e}", path.display()))?;
            match outcome {
                UtteranceOutcome::Live { embedding, .. } => {
                    embeds.entry(speaker).or_default().push(embedding)
                }
                UtteranceOutcome::Spoof { report } => {
                    return Err(format!(
                        "{}: genuine utterance failed the replay gate \
                         (r1 {:.4}, r2 {:.4}); the corpus and gate disagree",
                        path.display(),
                        report.r1,
                        report.r2
                    ));
                }
            }
        }
    }

    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for (claimed, claimed_embs) in &embeds {
        let enrolled = &claimed_embs[..enroll_n];
        for (actual, actual_embs) in &embeds {
            for query in &actual_embs[enroll_n..] {
                let mut total = 0f64;
                for emb in enrolled {
                    total += cosine_similarity(emb, query).map_err(|e| e.to_string())?;
                }
                scores.push(total / enrolled.len() as f64);
                labels.push(if claimed == actual {
                    TrialLabel::Genuine
                } else {
                    TrialLabel::Impostor
                });
            }
        }
    }
    let n_target = labels.iter().filter(|l| **l == TrialLabel::Genuine).count();
    let n_impostor = labels.len() - n_target;
    let trials = TrialSet::new(scores, labels).map_err(|e| e.to_string())?;
    let sv = trials.eer().map_err(|e| e.to_string())?;
    let threshold = gamma.unwrap_or(sv.threshold);
    let (far, frr) = trials.far_frr(threshold).map_err(|e| e.to_string())?;

    println!("trials\ttarget\t{n_target}\timpostor\t{n_impostor}");
    println!("sv_eer\t{:.6}\tthreshold\t{:.6}", sv.eer, sv.threshold);
    println!("sv_far\t{far:.6}\tsv_frr\t{frr:.6}\tat\t{threshold:.6}");
    println!("liveness_cer\t{live_cer:.6}");
    println!("liveness_eer\t{:.6}", live_eer.eer);
    for p in trials.det_points().map_err(|e| e.to_string())? {
        println!("DET\t{:.6}\t{:.6}\t{:.6}", p.threshold, p.far, p.frr);
    }
    Ok(0)
}

/// Scalar score for ranking gate decisions: the weaker of the two ratios.
/// Sentinel non-finite ratios sort below every real score, matching the
/// gate, which treats them as spoof evidence.
fn liveness_score(report: &LivenessReport) -> f64 {
    let s = report.r1.min(report.r2);
    if s.is_finite() {
        s
    } else {
        -1e300
    }
}
