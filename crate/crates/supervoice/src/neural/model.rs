//! The two-stream speaker embedding network and its training head.
//!
//! The low stream reads raw 16 kHz waveform windows through a learnable
//! band-pass front end; the high stream reads the 8-48 kHz region of the
//! wideband spectrogram through a stack of dilated convolutions. Their
//! features are concatenated and projected to a single embedding vector.

use super::layers::{
    argmax_rows, softmax_cross_entropy, AdaptiveAvgPool2d, Conv1d, Conv2d, LayerNorm, LeakyRelu,
    Linear, MaxPool1d, SincConv,
};
use super::optim::RmsProp;
use super::tensor::{Param, Scalar, Tensor};
use super::NeuralError;
use crate::rng::SplitMix64;

/// Slope shared by every leaky rectifier in the network.
pub const LEAKY_SLOPE: f64 = 0.2;

/// Architecture hyperparameters. The defaults are the production sizes;
/// tests shrink them to keep gradient checks and overfitting runs fast.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    /// Samples per low-stream window (16 kHz waveform).
    pub low_window: usize,
    /// Low-stream sample rate in Hz; sets the band-edge Nyquist limit.
    pub low_rate: f64,
    /// Number of learnable band-pass filters.
    pub sinc_filters: usize,
    /// Taps per band-pass filter (odd).
    pub sinc_len: usize,
    /// Channels in the two plain low-stream convolutions.
    pub conv_channels: usize,
    /// Kernel length of those convolutions.
    pub conv_len: usize,
    /// Max-pool factor after each low-stream stage.
    pub pool: usize,
    /// High-stream input rows (spectrogram bins).
    pub hf_rows: usize,
    /// High-stream input columns (spectrogram frames).
    pub hf_cols: usize,
    /// Channels in the first four high-stream convolutions.
    pub hf_ch_early: usize,
    /// Channels in the last four high-stream convolutions.
    pub hf_ch_late: usize,
    /// High-stream output dimension after the projection.
    pub hf_proj_dim: usize,
    /// Final embedding dimension.
    pub embed_dim: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            low_window: 3200,
            low_rate: 16_000.0,
            sinc_filters: 80,
            sinc_len: 251,
            conv_channels: 60,
            conv_len: 5,
            pool: 3,
            hf_rows: 426,
            hf_cols: 75,
            hf_ch_early: 64,
            hf_ch_late: 48,
            hf_proj_dim: 512,
            embed_dim: 2048,
        }
    }
}

impl ModelConfig {
    /// Low-stream length after each stage, ending with the flattened size.
    pub fn low_stage_lens(&self) -> Result<Vec<usize>, NeuralError> {
        let mut lens = Vec::new();
        let mut len = self
            .low_window
            .checked_sub(self.sinc_len - 1)
            .filter(|&l| l > 0)
            .ok_or_else(|| {
                NeuralError::InvalidConfig(format!(
                    "window of {} samples is too short for {}-tap filters",
                    self.low_window, self.sinc_len
                ))
            })?;
        lens.push(len);
        for stage in 0..3 {
            len /= self.pool;
            if len == 0 {
                return Err(NeuralError::InvalidConfig(format!(
                    "low stream collapses to zero length at pool stage {stage}"
                )));
            }
            lens.push(len);
            if stage < 2 {
                len = len.checked_sub(self.conv_len - 1).filter(|&l| l > 0).ok_or_else(
                    || {
                        NeuralError::InvalidConfig(format!(
                            "low stream too short for the stage-{} convolution",
                            stage + 1
                        ))
                    },
                )?;
                lens.push(len);
            }
        }
        Ok(lens)
    }

    /// Flattened low-stream feature count (channels x final length).
    pub fn low_features(&self) -> Result<usize, NeuralError> {
        let lens = self.low_stage_lens()?;
        Ok(self.conv_channels * lens.last().unwrap())
    }

    /// High-stream grid after the convolution stack.
    pub fn hf_final_grid(&self) -> (usize, usize) {
        let r = self.hf_rows.div_ceil(3).div_ceil(3).div_ceil(2);
        let c = self.hf_cols.div_ceil(2).div_ceil(2).div_ceil(2);
        (r, c)
    }

    pub fn fused_features(&self) -> Result<usize, NeuralError> {
        Ok(self.low_features()? + self.hf_proj_dim)
    }

    pub fn validate(&self) -> Result<(), NeuralError> {
        if self.sinc_len % 2 == 0 {
            return Err(NeuralError::InvalidConfig(
                "band-pass filter length must be odd".into(),
            ));
        }
        if self.low_rate <= 0.0 {
            return Err(NeuralError::InvalidConfig("low_rate must be positive".into()));
        }
        for (name, v) in [
            ("sinc_filters", self.sinc_filters),
            ("conv_channels", self.conv_channels),
            ("conv_len", self.conv_len),
            ("pool", self.pool),
            ("hf_rows", self.hf_rows),
            ("hf_cols", self.hf_cols),
            ("hf_ch_early", self.hf_ch_early),
            ("hf_ch_late", self.hf_ch_late),
            ("hf_proj_dim", self.hf_proj_dim),
            ("embed_dim", self.embed_dim),
        ] {
            if v == 0 {
                return Err(NeuralError::InvalidConfig(format!("{name} must be nonzero")));
            }
        }
        self.low_features()?;
        let (r, c) = self.hf_final_grid();
        if r < 4 || c < 4 {
            return Err(NeuralError::InvalidConfig(format!(
                "high-stream grid shrinks to {r}x{c}, below the 4x4 pooling target"
            )));
        }
        Ok(())
    }
}

/// Raw-waveform stream: band-pass bank plus two convolution stages, each
/// followed by layer norm, a leaky rectifier, and max pooling.
#[derive(Debug, Clone)]
pub struct LowStream<F> {
    sinc: SincConv<F>,
    norm0: LayerNorm<F>,
    act0: LeakyRelu<F>,
    pool0: MaxPool1d<F>,
    conv1: Conv1d<F>,
    norm1: LayerNorm<F>,
    act1: LeakyRelu<F>,
    pool1: MaxPool1d<F>,
    conv2: Conv1d<F>,
    norm2: LayerNorm<F>,
    act2: LeakyRelu<F>,
    pool2: MaxPool1d<F>,
    window: usize,
    out_channels: usize,
    out_len: usize,
}

impl<F: Scalar> LowStream<F> {
    fn new(cfg: &ModelConfig, rng: &mut SplitMix64) -> Result<Self, NeuralError> {
        let lens = cfg.low_stage_lens()?;
        Ok(LowStream {
            sinc: SincConv::new(cfg.sinc_filters, cfg.sinc_len, cfg.low_rate),
            norm0: LayerNorm::new(cfg.sinc_filters),
            act0: LeakyRelu::new(LEAKY_SLOPE),
            pool0: MaxPool1d::new(cfg.pool),
            conv1: Conv1d::new(cfg.sinc_filters, cfg.conv_channels, cfg.conv_len, rng),
            norm1: LayerNorm::new(cfg.conv_channels),
            act1: LeakyRelu::new(LEAKY_SLOPE),
            pool1: MaxPool1d::new(cfg.pool),
            conv2: Conv1d::new(cfg.conv_channels, cfg.conv_channels, cfg.conv_len, rng),
            norm2: LayerNorm::new(cfg.conv_channels),
            act2: LeakyRelu::new(LEAKY_SLOPE),
            pool2: MaxPool1d::new(cfg.pool),
            window: cfg.low_window,
            out_channels: cfg.conv_channels,
            out_len: *lens.last().unwrap(),
        })
    }

    pub fn out_features(&self) -> usize {
        self.out_channels * self.out_len
    }

    pub fn sinc(&self) -> &SincConv<F> {
        &self.sinc
    }

    /// `[batch, window]` waveform rows to `[batch, features]`.
    pub fn forward(&mut self, x: &Tensor<F>) -> Tensor<F> {
        assert_eq!(x.shape()[1], self.window, "window length mismatch");
        let batch = x.shape()[0];
        let h = self.sinc.forward(x);
        let h = self.norm0.forward(&h);
        let h = self.act0.forward(&h);
        let h = self.pool0.forward(&h);
        let h = self.conv1.forward(&h);
        let h = self.norm1.forward(&h);
        let h = self.act1.forward(&h);
        let h = self.pool1.forward(&h);
        let h = self.conv2.forward(&h);
        let h = self.norm2.forward(&h);
        let h = self.act2.forward(&h);
        let h = self.pool2.forward(&h);
        h.reshaped(&[batch, self.out_features()])
    }

    pub fn backward(&mut self, dy: &Tensor<F>) -> Tensor<F> {
        let batch = dy.shape()[0];
        let d = dy
            .clone()
            .reshaped(&[batch, self.out_channels, self.out_len]);
        let d = self.pool2.backward(&d);
        let d = self.act2.backward(&d);
        let d = self.norm2.backward(&d);
        let d = self.conv2.backward(&d);
        let d = self.pool1.backward(&d);
        let d = self.act1.backward(&d);
        let d = self.norm1.backward(&d);
        let d = self.conv1.backward(&d);
        let d = self.pool0.backward(&d);
        let d = self.act0.backward(&d);
        let d = self.norm0.backward(&d);
        self.sinc.backward(&d)
    }

    fn params_mut(&mut self) -> Vec<(String, &mut Param<F>)> {
        let mut out = Vec::new();
        for (name, p) in self.sinc.params_mut() {
            out.push((format!("low.sinc.{name}"), p));
        }
        for (name, p) in self.norm0.params_mut() {
            out.push((format!("low.norm0.{name}"), p));
        }
        for (name, p) in self.conv1.params_mut() {
            out.push((format!("low.conv1.{name}"), p));
        }
        for (name, p) in self.norm1.params_mut() {
            out.push((format!("low.norm1.{name}"), p));
        }
        for (name, p) in self.conv2.params_mut() {
            out.push((format!("low.conv2.{name}"), p));
        }
        for (name, p) in self.norm2.params_mut() {
            out.push((format!("low.norm2.{name}"), p));
        }
        out
    }
}

/// Wideband spectrogram stream: frequency-only, time-only, then joint
/// convolutions with growing dilation, pooled to a fixed grid and projected.
#[derive(Debug, Clone)]
pub struct HighStream<F> {
    convs: Vec<Conv2d<F>>,
    acts: Vec<LeakyRelu<F>>,
    norms: Vec<LayerNorm<F>>,
    pool: AdaptiveAvgPool2d<F>,
    proj: Linear<F>,
    rows: usize,
    cols: usize,
    late_ch: usize,
}

/// Kernel, dilation, and stride schedule for the eight high-stream layers.
/// The first two walk frequency, the next two walk time, the last four mix
/// both with dilation doubling each layer.
const HF_SCHEDULE: [((usize, usize), (usize, usize), (usize, usize)); 8] = [
    ((9, 1), (1, 1), (3, 1)),
    ((9, 1), (2, 1), (3, 1)),
    ((1, 9), (1, 1), (1, 2)),
    ((1, 9), (1, 2), (1, 2)),
    ((5, 5), (2, 2), (2, 2)),
    ((5, 5), (4, 4), (1, 1)),
    ((5, 5), (8, 8), (1, 1)),
    ((5, 5), (16, 16), (1, 1)),
];

impl<F: Scalar> HighStream<F> {
    fn new(cfg: &ModelConfig, rng: &mut SplitMix64) -> Self {
        let mut convs = Vec::with_capacity(8);
        let mut acts = Vec::with_capacity(8);
        let mut norms = Vec::with_capacity(8);
        for (i, &(kernel, dil, stride)) in HF_SCHEDULE.iter().enumerate() {
            let in_ch = match i {
                0 => 1,
                1..=4 => cfg.hf_ch_early,
                _ => cfg.hf_ch_late,
            };
            let out_ch = if i < 4 { cfg.hf_ch_early } else { cfg.hf_ch_late };
            convs.push(Conv2d::new(in_ch, out_ch, kernel, dil, stride, rng));
            acts.push(LeakyRelu::new(LEAKY_SLOPE));
            norms.push(LayerNorm::new(out_ch));
        }
        let proj = Linear::new(cfg.hf_ch_late * 16, cfg.hf_proj_dim, rng);
        HighStream {
            convs,
            acts,
            norms,
            pool: AdaptiveAvgPool2d::new(4, 4),
            proj,
            rows: cfg.hf_rows,
            cols: cfg.hf_cols,
            late_ch: cfg.hf_ch_late,
        }
    }

    pub fn out_features(&self) -> usize {
        self.proj.out_dim()
    }

    /// `[batch, 1, rows, cols]` spectrogram crops to `[batch, proj_dim]`.
    pub fn forward(&mut self, x: &Tensor<F>) -> Tensor<F> {
        assert_eq!(x.shape()[2], self.rows, "spectrogram row mismatch");
        assert_eq!(x.shape()[3], self.cols, "spectrogram column mismatch");
        let batch = x.shape()[0];
        let mut h = x.clone();
        for i in 0..self.convs.len() {
            h = self.convs[i].forward(&h);
            h = self.acts[i].forward(&h);
            h = self.norms[i].forward(&h);
        }
        let h = self.pool.forward(&h);
        let h = h.reshaped(&[batch, self.late_ch * 16]);
        self.proj.forward(&h)
    }

    pub fn backward(&mut self, dy: &Tensor<F>) -> Tensor<F> {
        let batch = dy.shape()[0];
        let d = self.proj.backward(dy);
        let d = d.reshaped(&[batch, self.late_ch, 4, 4]);
        let mut d = self.pool.backward(&d);
        for i in (0..self.convs.len()).rev() {
            d = self.norms[i].backward(&d);
            d = self.acts[i].backward(&d);
            d = self.convs[i].backward(&d);
        }
        d
    }

    fn params_mut(&mut self) -> Vec<(String, &mut Param<F>)> {
        let mut out = Vec::new();
        for (i, (conv, norm)) in self.convs.iter_mut().zip(&mut self.norms).enumerate() {
            for (name, p) in conv.params_mut() {
                out.push((format!("high.conv{}.{name}", i + 1), p));
            }
            for (name, p) in norm.params_mut() {
                out.push((format!("high.norm{}.{name}", i + 1), p));
            }
        }
        for (name, p) in self.proj.params_mut() {
            out.push((format!("high.proj.{name}"), p));
        }
        out
    }
}

/// Both streams plus the fusion projection to the embedding space.
#[derive(Debug, Clone)]
pub struct TwoStreamModel<F> {
    pub config: ModelConfig,
    low: LowStream<F>,
    high: HighStream<F>,
    fusion: Linear<F>,
}

impl<F: Scalar> TwoStreamModel<F> {
    pub fn new(cfg: &ModelConfig, seed: u64) -> Result<Self, NeuralError> {
        cfg.validate()?;
        let mut rng = SplitMix64::stream(seed, &[3]);
        let low = LowStream::new(cfg, &mut rng)?;
        let high = HighStream::new(cfg, &mut rng);
        let fusion = Linear::new(low.out_features() + high.out_features(), cfg.embed_dim, &mut rng);
        Ok(TwoStreamModel {
            config: cfg.clone(),
            low,
            high,
            fusion,
        })
    }

    pub fn low(&self) -> &LowStream<F> {
        &self.low
    }

    pub fn low_mut(&mut self) -> &mut LowStream<F> {
        &mut self.low
    }

    pub fn high_mut(&mut self) -> &mut HighStream<F> {
        &mut self.high
    }

    pub fn embed_dim(&self) -> usize {
        self.fusion.out_dim()
    }

    fn check_inputs(&self, low: &Tensor<F>, high: &Tensor<F>) -> Result<usize, NeuralError> {
        let want_low = [low.shape().first().copied().unwrap_or(0), self.config.low_window];
        if low.shape() != want_low || low.shape()[0] == 0 {
            return Err(NeuralError::ShapeMismatch {
                expected: format!("[batch, {}]", self.config.low_window),
                got: format!("{:?}", low.shape()),
            });
        }
        let batch = low.shape()[0];
        let want_high = [batch, 1, self.config.hf_rows, self.config.hf_cols];
        if high.shape() != want_high {
            return Err(NeuralError::ShapeMismatch {
                expected: format!("{want_high:?}"),
                got: format!("{:?}", high.shape()),
            });
        }
        Ok(batch)
    }

    /// Embeds a batch of aligned window pairs: `[batch, low_window]`
    /// waveforms and `[batch, 1, rows, cols]` spectrogram crops.
    pub fn embed(&mut self, low: &Tensor<F>, high: &Tensor<F>) -> Result<Tensor<F>, NeuralError> {
        let batch = self.check_inputs(low, high)?;
        let lf = self.low.forward(low);
        let hf = self.high.forward(high);
        let (nl, nh) = (self.low.out_features(), self.high.out_features());
        let mut fused = Tensor::zeros(&[batch, nl + nh]);
        for b in 0..batch {
            fused.data_mut()[b * (nl + nh)..b * (nl + nh) + nl]
                .copy_from_slice(&lf.data()[b * nl..(b + 1) * nl]);
            fused.data_mut()[b * (nl + nh) + nl..(b + 1) * (nl + nh)]
                .copy_from_slice(&hf.data()[b * nh..(b + 1) * nh]);
        }
        Ok(self.fusion.forward(&fused))
    }

    /// Propagates an embedding gradient back through both streams.
    pub fn backward(&mut self, dembed: &Tensor<F>) {
        let batch = dembed.shape()[0];
        let dfused = self.fusion.backward(dembed);
        let (nl, nh) = (self.low.out_features(), self.high.out_features());
        let mut dlow = Tensor::zeros(&[batch, nl]);
        let mut dhigh = Tensor::zeros(&[batch, nh]);
        for b in 0..batch {
            dlow.data_mut()[b * nl..(b + 1) * nl]
                .copy_from_slice(&dfused.data()[b * (nl + nh)..b * (nl + nh) + nl]);
            dhigh.data_mut()[b * nh..(b + 1) * nh]
                .copy_from_slice(&dfused.data()[b * (nl + nh) + nl..(b + 1) * (nl + nh)]);
        }
        let _ = self.low.backward(&dlow);
        let _ = self.high.backward(&dhigh);
    }

    /// Every learnable parameter with a stable hierarchical name. Traversal
    /// order is fixed; the optimizer and checkpoint format both rely on it.
    pub fn params_mut(&mut self) -> Vec<(String, &mut Param<F>)> {
        let mut out = self.low.params_mut();
        out.extend(self.high.params_mut());
        for (name, p) in self.fusion.params_mut() {
            out.push((format!("fusion.{name}"), p));
        }
        out
    }

    pub fn zero_grads(&mut self) {
        for (_, p) in self.params_mut() {
            p.zero_grad();
        }
    }
}

/// Embedding model plus a softmax classification head used only in training.
#[derive(Debug, Clone)]
pub struct SpeakerClassifier<F> {
    pub model: TwoStreamModel<F>,
    pub head: Linear<F>,
}

impl<F: Scalar> SpeakerClassifier<F> {
    pub fn new(cfg: &ModelConfig, classes: usize, seed: u64) -> Result<Self, NeuralError> {
        if classes < 2 {
            return Err(NeuralError::InvalidConfig(
                "need at least two classes to train".into(),
            ));
        }
        let model = TwoStreamModel::new(cfg, seed)?;
        let mut rng = SplitMix64::stream(seed, &[4]);
        let head = Linear::new(cfg.embed_dim, classes, &mut rng);
        Ok(SpeakerClassifier { model, head })
    }

    pub fn classes(&self) -> usize {
        self.head.out_dim()
    }

    pub fn logits(&mut self, low: &Tensor<F>, high: &Tensor<F>) -> Result<Tensor<F>, NeuralError> {
        let embed = self.model.embed(low, high)?;
        Ok(self.head.forward(&embed))
    }

    pub fn predict(&mut self, low: &Tensor<F>, high: &Tensor<F>) -> Result<Vec<usize>, NeuralError> {
        Ok(argmax_rows(&self.logits(low, high)?))
    }

    /// One optimization step over a batch. Returns the batch loss. If the
    /// loss comes out non-finite the step is abandoned before any parameter
    /// changes.
    pub fn train_step(
        &mut self,
        low: &Tensor<F>,
        high: &Tensor<F>,
        labels: &[usize],
        opt: &mut RmsProp<F>,
    ) -> Result<F, NeuralError> {
        let batch = low.shape().first().copied().unwrap_or(0);
        if labels.len() != batch {
            return Err(NeuralError::ShapeMismatch {
                expected: format!("{batch} labels"),
                got: format!("{}", labels.len()),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= self.classes()) {
            return Err(NeuralError::InvalidConfig(format!(
                "label {bad} out of range for {} classes",
                self.classes()
            )));
        }

        self.model.zero_grads();
        for (_, p) in self.head.params_mut() {
            p.zero_grad();
        }

        let logits = self.logits(low, high)?;
        if !logits.all_finite() {
            return Err(NeuralError::NonFiniteLoss);
        }
        let (loss, dlogits) = softmax_cross_entropy(&logits, labels);
        if !loss.is_finite() {
            return Err(NeuralError::NonFiniteLoss);
        }
        let dembed = self.head.backward(&dlogits);
        self.model.backward(&dembed);

        let mut params = self.model.params_mut();
        for (name, p) in self.head.params_mut() {
            params.push((format!("head.{name}"), p));
        }
        opt.step(&mut params);
        Ok(loss)
    }
}

/// Small enough to run in milliseconds, deep enough to exercise every layer
/// type. Shared by the unit tests of this module and the checkpoint code.
#[cfg(test)]
pub(crate) fn tiny_test_config() -> ModelConfig {
    ModelConfig {
        low_window: 800,
        low_rate: 16_000.0,
        sinc_filters: 8,
        sinc_len: 101,
        conv_channels: 10,
        conv_len: 5,
        pool: 3,
        hf_rows: 55,
        hf_cols: 26,
        hf_ch_early: 8,
        hf_ch_late: 6,
        hf_proj_dim: 24,
        embed_dim: 32,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> ModelConfig {
        tiny_test_config()
    }

    #[test]
    fn default_config_reproduces_the_published_dimensions() {
        let cfg = ModelConfig::default();
        cfg.validate().unwrap();
        assert_eq!(
            cfg.low_stage_lens().unwrap(),
            vec![2950, 983, 979, 326, 322, 107]
        );
        assert_eq!(cfg.low_features().unwrap(), 6420);
        assert_eq!(cfg.hf_final_grid(), (24, 10));
        assert_eq!(cfg.fused_features().unwrap(), 6932);
    }

    #[test]
    fn high_stream_grid_trace_matches_the_schedule() {
        // Walk the schedule by hand for the production input.
        let mut rng = SplitMix64::new(0);
        let (mut r, mut c) = (426usize, 75usize);
        let expect = [(142, 75), (48, 75), (48, 38), (48, 19), (24, 10), (24, 10), (24, 10), (24, 10)];
        for (i, &(kernel, dil, stride)) in HF_SCHEDULE.iter().enumerate() {
            let conv: Conv2d<f32> = Conv2d::new(1, 1, kernel, dil, stride, &mut rng);
            let (nr, nc) = conv.out_dims(r, c);
            assert_eq!((nr, nc), expect[i], "layer {}", i + 1);
            r = nr;
            c = nc;
        }
    }

    #[test]
    fn embed_produces_the_configured_dimension() {
        let cfg = tiny_config();
        let mut model: TwoStreamModel<f32> = TwoStreamModel::new(&cfg, 7).unwrap();
        let mut rng = SplitMix64::new(1);
        let low: Tensor<f32> = Tensor::uniform(&[3, 800], 0.5, &mut rng);
        let high: Tensor<f32> = Tensor::uniform(&[3, 1, 55, 26], 0.5, &mut rng);
        let e = model.embed(&low, &high).unwrap();
        assert_eq!(e.shape(), &[3, 32]);
        assert!(e.all_finite());
    }

    #[test]
    fn embed_rejects_mismatched_shapes() {
        let cfg = tiny_config();
        let mut model: TwoStreamModel<f32> = TwoStreamModel::new(&cfg, 7).unwrap();
        let low: Tensor<f32> = Tensor::zeros(&[2, 801]);
        let high: Tensor<f32> = Tensor::zeros(&[2, 1, 55, 26]);
        assert!(matches!(
            model.embed(&low, &high),
            Err(NeuralError::ShapeMismatch { .. })
        ));
        let low: Tensor<f32> = Tensor::zeros(&[2, 800]);
        let high: Tensor<f32> = Tensor::zeros(&[3, 1, 55, 26]);
        assert!(matches!(
            model.embed(&low, &high),
            Err(NeuralError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn same_seed_same_weights_different_seed_different_weights() {
        let cfg = tiny_config();
        let mut a: TwoStreamModel<f32> = TwoStreamModel::new(&cfg, 5).unwrap();
        let mut b: TwoStreamModel<f32> = TwoStreamModel::new(&cfg, 5).unwrap();
        let mut c: TwoStreamModel<f32> = TwoStreamModel::new(&cfg, 6).unwrap();
        let pa = a.params_mut();
        let pb = b.params_mut();
        let pc = c.params_mut();
        assert_eq!(pa.len(), pb.len());
        assert_eq!(pa.len(), 48, "traversal covers the full parameter set");
        let mut any_diff = false;
        for (((na, a), (nb, b)), (_, c)) in pa.iter().zip(&pb).zip(&pc) {
            assert_eq!(na, nb);
            assert_eq!(a.value.data(), b.value.data(), "{na}");
            if a.value.data() != c.value.data() {
                any_diff = true;
            }
        }
        assert!(any_diff);
    }

    #[test]
    fn overfits_a_two_class_toy_problem() {
        let cfg = tiny_config();
        let mut clf: SpeakerClassifier<f32> = SpeakerClassifier::new(&cfg, 2, 11).unwrap();
        let mut opt = RmsProp::default_training();
        let mut rng = SplitMix64::new(2);
        let low: Tensor<f32> = Tensor::uniform(&[4, 800], 0.5, &mut rng);
        let high: Tensor<f32> = Tensor::uniform(&[4, 1, 55, 26], 0.5, &mut rng);
        let labels = [0usize, 1, 0, 1];

        let first = clf.train_step(&low, &high, &labels, &mut opt).unwrap();
        let mut last = first;
        let mut correct = false;
        for _ in 0..120 {
            last = clf.train_step(&low, &high, &labels, &mut opt).unwrap();
            if clf.predict(&low, &high).unwrap() == labels {
                correct = true;
                break;
            }
        }
        assert!(correct, "never reached 100% on 4 samples (loss {first} -> {last})");
        assert!(last < first, "loss did not improve: {first} -> {last}");
    }

    #[test]
    fn non_finite_loss_aborts_without_touching_parameters() {
        let cfg = tiny_config();
        let mut clf: SpeakerClassifier<f32> = SpeakerClassifier::new(&cfg, 2, 3).unwrap();
        for v in clf.head.weight.value.data_mut() {
            *v = f32::INFINITY;
        }
        let before: Vec<f32> = clf.model.params_mut()[0].1.value.data().to_vec();
        let mut opt = RmsProp::default_training();
        let mut rng = SplitMix64::new(4);
        let low: Tensor<f32> = Tensor::uniform(&[1, 800], 0.5, &mut rng);
        let high: Tensor<f32> = Tensor::uniform(&[1, 1, 55, 26], 0.5, &mut rng);
        let err = clf.train_step(&low, &high, &[0], &mut opt);
        assert!(matches!(err, Err(NeuralError::NonFiniteLoss)));
        assert_eq!(clf.model.params_mut()[0].1.value.data(), &before[..]);
    }

    #[test]
    fn train_step_rejects_bad_labels_and_counts() {
        let cfg = tiny_config();
        let mut clf: SpeakerClassifier<f32> = SpeakerClassifier::new(&cfg, 2, 3).unwrap();
        let mut opt = RmsProp::default_training();
        let low: Tensor<f32> = Tensor::zeros(&[2, 800]);
        let high: Tensor<f32> = Tensor::zeros(&[2, 1, 55, 26]);
        assert!(clf.train_step(&low, &high, &[0], &mut opt).is_err());
        assert!(clf.train_step(&low, &high, &[0, 5], &mut opt).is_err());
    }

    #[test]
    fn config_validation_catches_impossible_geometry() {
        let mut cfg = tiny_config();
        cfg.low_window = 90;
        assert!(matches!(cfg.validate(), Err(NeuralError::InvalidConfig(_))));
        let mut cfg = tiny_config();
        cfg.sinc_len = 100;
        assert!(cfg.validate().is_err());
        let mut cfg = tiny_config();
        cfg.hf_rows = 20;
        assert!(cfg.validate().is_err());
    }
}
