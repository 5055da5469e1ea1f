//! Verification metrics: FAR/FRR sweeps, equal error rate, classification
//! error rate, and DET-curve points.
//!
//! Scores are "higher means more genuine" similarities; a trial is accepted
//! when its score is at or above the threshold. The EER comes from the
//! convex hull of the tie-grouped ROC polygon: the hull is swept for the
//! point where the false-accept rate equals the miss rate, interpolating
//! linearly along the crossing segment. That estimator is exact on
//! separable data, exactly one half when both classes share one score
//! distribution, and never exceeds one half.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("need at least one genuine and one impostor trial")]
    EmptyClass,
    #[error("empty input")]
    EmptyInput,
    #[error("length mismatch: {a} vs {b}")]
    LengthMismatch { a: usize, b: usize },
    #[error("score at index {0} is not finite")]
    NonFiniteScore(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrialLabel {
    Genuine,
    Impostor,
}

/// A population of scored verification trials.
#[derive(Debug, Clone)]
pub struct TrialSet {
    scores: Vec<f64>,
    labels: Vec<TrialLabel>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EerResult {
    pub eer: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetPoint {
    pub threshold: f64,
    pub far: f64,
    pub frr: f64,
}

impl TrialSet {
    /// Scores must be finite so that threshold sweeps are well ordered;
    /// callers with sentinel scores map them to large finite values first.
    pub fn new(scores: Vec<f64>, labels: Vec<TrialLabel>) -> Result<Self, MetricsError> {
        if scores.len() != labels.len() {
            return Err(MetricsError::LengthMismatch { a: scores.len(), b: labels.len() });
        }
        if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
            return Err(MetricsError::NonFiniteScore(i));
        }
        Ok(TrialSet { scores, labels })
    }

    pub fn from_classes(genuine: &[f64], impostor: &[f64]) -> Result<Self, MetricsError> {
        let mut scores = Vec::with_capacity(genuine.len() + impostor.len());
        let mut labels = Vec::with_capacity(scores.capacity());
        scores.extend_from_slice(genuine);
        labels.extend(std::iter::repeat(TrialLabel::Genuine).take(genuine.len()));
        scores.extend_from_slice(impostor);
        labels.extend(std::iter::repeat(TrialLabel::Impostor).take(impostor.len()));
        TrialSet::new(scores, labels)
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    fn class_counts(&self) -> (usize, usize) {
        let genuine = self.labels.iter().filter(|&&l| l == TrialLabel::Genuine).count();
        (genuine, self.labels.len() - genuine)
    }

    /// (FAR, FRR) at one threshold, accepting scores at or above it.
    pub fn far_frr(&self, threshold: f64) -> Result<(f64, f64), MetricsError> {
        let (n_gen, n_imp) = self.class_counts();
        if n_gen == 0 || n_imp == 0 {
            return Err(MetricsError::EmptyClass);
        }
        let mut false_accepts = 0usize;
        let mut false_rejects = 0usize;
        for (&s, &l) in self.scores.iter().zip(&self.labels) {
            match l {
                TrialLabel::Impostor if s >= threshold => false_accepts += 1,
                TrialLabel::Genuine if s < threshold => false_rejects += 1,
                _ => {}
            }
        }
        Ok((false_accepts as f64 / n_imp as f64, false_rejects as f64 / n_gen as f64))
    }

    /// One point per distinct score value, descending in threshold.
    pub fn det_points(&self) -> Result<Vec<DetPoint>, MetricsError> {
        let (n_gen, n_imp) = self.class_counts();
        if n_gen == 0 || n_imp == 0 {
            return Err(MetricsError::EmptyClass);
        }
        let groups = self.grouped_descending();
        let mut out = Vec::with_capacity(groups.len());
        let (mut cum_gen, mut cum_imp) = (0usize, 0usize);
        for g in &groups {
            cum_gen += g.genuine;
            cum_imp += g.impostor;
            out.push(DetPoint {
                threshold: g.score,
                far: cum_imp as f64 / n_imp as f64,
                frr: (n_gen - cum_gen) as f64 / n_gen as f64,
            });
        }
        Ok(out)
    }

    /// Equal error rate and the threshold it occurs at.
    pub fn eer(&self) -> Result<EerResult, MetricsError> {
        let (n_gen, n_imp) = self.class_counts();
        if n_gen == 0 || n_imp == 0 {
            return Err(MetricsError::EmptyClass);
        }

        // ROC vertices (FAR, TPR, threshold), tie-grouped, plus the
        // accept-nothing origin whose threshold sits just above the top
        // score.
        let groups = self.grouped_descending();
        let mut verts: Vec<(f64, f64, f64)> =
            vec![(0.0, 0.0, groups[0].score.next_up())];
        let (mut cum_gen, mut cum_imp) = (0usize, 0usize);
        for g in &groups {
            cum_gen += g.genuine;
            cum_imp += g.impostor;
            verts.push((
                cum_imp as f64 / n_imp as f64,
                cum_gen as f64 / n_gen as f64,
                g.score,
            ));
        }

        // Upper convex hull over (FAR, TPR): pop any vertex not strictly
        // above the chord of its neighbours.
        let mut hull: Vec<(f64, f64, f64)> = Vec::with_capacity(verts.len());
        for v in verts {
            while hull.len() >= 2 {
                let a = hull[hull.len() - 2];
                let b = hull[hull.len() - 1];
                let cross = (b.0 - a.0) * (v.1 - a.1) - (b.1 - a.1) * (v.0 - a.0);
                if cross >= 0.0 {
                    hull.pop();
                } else {
                    break;
                }
            }
            hull.push(v);
        }

        // Walk for the sign change of FAR - FNR and interpolate within the
        // crossing segment. The walk starts at -1 and ends at +1, so a
        // crossing always exists.
        let diff = |p: (f64, f64, f64)| p.0 - (1.0 - p.1);
        for w in hull.windows(2) {
            let (a, b) = (w[0], w[1]);
            if diff(b) >= 0.0 {
                let da = diff(a);
                let db = diff(b);
                let lambda = if db - da == 0.0 { 0.0 } else { -da / (db - da) };
                return Ok(EerResult {
                    eer: a.0 + lambda * (b.0 - a.0),
                    threshold: a.2 + lambda * (b.2 - a.2),
                });
            }
        }
        unreachable!("ROC hull always ends at (1, 1) where FAR - FNR = 1");
    }

    fn grouped_descending(&self) -> Vec<ScoreGroup> {
        let mut order: Vec<usize> = (0..self.scores.len()).collect();
        order.sort_by(|&a, &b| self.scores[b].total_cmp(&self.scores[a]));
        let mut groups: Vec<ScoreGroup> = Vec::new();
        for i in order {
            let s = self.scores[i];
            if groups.last().map_or(true, |g| g.score != s) {
                groups.push(ScoreGroup { score: s, genuine: 0, impostor: 0 });
            }
            let g = groups.last_mut().unwrap();
            match self.labels[i] {
                TrialLabel::Genuine => g.genuine += 1,
                TrialLabel::Impostor => g.impostor += 1,
            }
        }
        groups
    }
}

struct ScoreGroup {
    score: f64,
    genuine: usize,
    impostor: usize,
}

/// Fraction of positions where the predicted label disagrees with truth.
pub fn cer<T: PartialEq>(predicted: &[T], truth: &[T]) -> Result<f64, MetricsError> {
    if predicted.len() != truth.len() {
        return Err(MetricsError::LengthMismatch { a: predicted.len(), b: truth.len() });
    }
    if predicted.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let wrong = predicted.iter().zip(truth).filter(|(p, t)| p != t).count();
    Ok(wrong as f64 / predicted.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn set(genuine: &[f64], impostor: &[f64]) -> TrialSet {
        TrialSet::from_classes(genuine, impostor).unwrap()
    }

    #[test]
    fn far_frr_on_separable_scores() {
        let t = set(&[0.9, 0.8], &[0.1, 0.2]);
        assert_eq!(t.far_frr(0.5).unwrap(), (0.0, 0.0));
        assert_eq!(t.far_frr(2.0).unwrap(), (0.0, 1.0));
        assert_eq!(t.far_frr(-2.0).unwrap(), (1.0, 0.0));
    }

    #[test]
    fn accept_rule_includes_the_threshold_itself() {
        let t = set(&[0.5], &[0.5]);
        let (far, frr) = t.far_frr(0.5).unwrap();
        assert_eq!((far, frr), (1.0, 0.0));
    }

    #[test]
    fn eer_of_separable_scores_is_zero() {
        let t = set(&[0.9, 0.8, 0.7], &[0.3, 0.2, 0.1]);
        let r = t.eer().unwrap();
        assert_eq!(r.eer, 0.0);
        // Any threshold in (0.3, 0.7] separates; the reported one must too.
        let (far, frr) = t.far_frr(r.threshold).unwrap();
        assert_eq!((far, frr), (0.0, 0.0));
    }

    #[test]
    fn eer_of_identical_score_lists_is_exactly_half() {
        let scores = [0.1, 0.4, 0.4, 0.7, 0.9];
        let t = set(&scores, &scores);
        assert_eq!(t.eer().unwrap().eer, 0.5);
    }

    #[test]
    fn eer_hand_case_is_a_quarter() {
        let t = set(&[0.9, 0.4], &[0.6, 0.1]);
        let r = t.eer().unwrap();
        assert!((r.eer - 0.25).abs() < 1e-15, "eer = {}", r.eer);
        // The crossing segment joins the operating points at 0.9 and 0.4,
        // so the interpolated threshold lands midway.
        assert!((r.threshold - 0.65).abs() < 1e-12, "threshold = {}", r.threshold);
    }

    #[test]
    fn eer_is_half_on_large_same_distribution_samples() {
        let mut rng = crate::rng::SplitMix64::new(99);
        let genuine: Vec<f64> = (0..10_000).map(|_| rng.next_f64()).collect();
        let impostor: Vec<f64> = (0..10_000).map(|_| rng.next_f64()).collect();
        let r = set(&genuine, &impostor).eer().unwrap();
        assert!((r.eer - 0.5).abs() <= 0.02, "eer = {}", r.eer);
    }

    #[test]
    fn eer_needs_both_classes() {
        let t = TrialSet::from_classes(&[0.5], &[]).unwrap();
        assert!(matches!(t.eer(), Err(MetricsError::EmptyClass)));
        assert!(matches!(t.far_frr(0.1), Err(MetricsError::EmptyClass)));
    }

    #[test]
    fn non_finite_scores_are_rejected_up_front() {
        assert!(matches!(
            TrialSet::from_classes(&[f64::NEG_INFINITY], &[0.1]),
            Err(MetricsError::NonFiniteScore(0))
        ));
    }

    #[test]
    fn det_points_follow_the_sweep() {
        let t = set(&[0.9, 0.4], &[0.6, 0.1]);
        let points = t.det_points().unwrap();
        let thresholds: Vec<f64> = points.iter().map(|p| p.threshold).collect();
        assert_eq!(thresholds, vec![0.9, 0.6, 0.4, 0.1]);
        for p in &points {
            let (far, frr) = t.far_frr(p.threshold).unwrap();
            assert_eq!((p.far, p.frr), (far, frr));
        }
    }

    #[test]
    fn cer_counts_mismatches() {
        assert_eq!(cer(&[1, 2, 3], &[1, 2, 3]).unwrap(), 0.0);
        assert_eq!(cer(&[1, 2], &[3, 4]).unwrap(), 1.0);
        assert_eq!(cer(&["a", "b", "c", "d"], &["a", "b", "c", "x"]).unwrap(), 0.25);
        assert!(matches!(cer::<i32>(&[], &[]), Err(MetricsError::EmptyInput)));
        assert!(matches!(cer(&[1], &[1, 2]), Err(MetricsError::LengthMismatch { .. })));
    }

    proptest! {
        #[test]
        fn far_never_increases_and_frr_never_decreases_with_threshold(
            genuine in proptest::collection::vec(-1.0f64..1.0, 1..40),
            impostor in proptest::collection::vec(-1.0f64..1.0, 1..40),
            t1 in -1.5f64..1.5,
            t2 in -1.5f64..1.5,
        ) {
            let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
            let set = TrialSet::from_classes(&genuine, &impostor).unwrap();
            let (far_lo, frr_lo) = set.far_frr(lo).unwrap();
            let (far_hi, frr_hi) = set.far_frr(hi).unwrap();
            prop_assert!(far_hi <= far_lo);
            prop_assert!(frr_hi >= frr_lo);
        }

        #[test]
        fn eer_rate_survives_strictly_increasing_transforms(
            genuine in proptest::collection::vec(-1.0f64..1.0, 1..30),
            impostor in proptest::collection::vec(-1.0f64..1.0, 1..30),
            scale in 0.1f64..5.0,
            shift in -2.0f64..2.0,
        ) {
            let base = TrialSet::from_classes(&genuine, &impostor).unwrap().eer().unwrap();
            let map = |v: &f64| scale * v + shift;
            let g2: Vec<f64> = genuine.iter().map(map).collect();
            let i2: Vec<f64> = impostor.iter().map(map).collect();
            let moved = TrialSet::from_classes(&g2, &i2).unwrap().eer().unwrap();
            prop_assert!((base.eer - moved.eer).abs() < 1e-9);

            let cube = |v: &f64| v * v * v;
            let g3: Vec<f64> = genuine.iter().map(cube).collect();
            let i3: Vec<f64> = impostor.iter().map(cube).collect();
            let cubed = TrialSet::from_classes(&g3, &i3).unwrap().eer().unwrap();
            prop_assert!((base.eer - cubed.eer).abs() < 1e-9);
        }

        #[test]
        fn eer_stays_within_its_bounds(
            genuine in proptest::collection::vec(-1.0f64..1.0, 1..50),
            impostor in proptest::collection::vec(-1.0f64..1.0, 1..50),
        ) {
            let r = TrialSet::from_classes(&genuine, &impostor).unwrap().eer().unwrap();
            prop_assert!(r.eer >= 0.0);
            prop_assert!(r.eer <= 0.5 + 1e-12);
        }
    }
}
