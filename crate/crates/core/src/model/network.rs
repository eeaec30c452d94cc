use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gesture::NUM_CLASSES;
use crate::nn::{
    reduced_channels, BatchNorm, CausalConv1d, Conv2d, Dense, Dropout, LeakyRelu, Layer, MaxPool2d, Mode,
    Padding, Pointwise, Tensor,
};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    CnnTcn,
    Cnn,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::CnnTcn => "cnn-tcn",
            ModelKind::Cnn => "cnn",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cnn-tcn" => Ok(ModelKind::CnnTcn),
            "cnn" => Ok(ModelKind::Cnn),
            other => Err(Error::Config(format!("unknown model kind {other:?} (expected cnn-tcn or cnn)"))),
        }
    }
}

/// Architecture of the frame model, the temporal blocks and the dense head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CnnTcnConfig {
    pub frames: usize,
    pub height: usize,
    pub width: usize,
    /// Output channels of each frame convolution.
    pub conv_widths: Vec<usize>,
    pub conv_kernel: (usize, usize),
    /// Number of leading conv blocks followed by 2x2 max pooling.
    pub pooled_blocks: usize,
    pub tcn_kernel: usize,
    /// One dilation per temporal block.
    pub dilations: Vec<usize>,
    /// Temporal block width; `None` uses the reduced frame channel count.
    pub tcn_width: Option<usize>,
    pub dropout: f64,
    /// Hidden sizes of the dense head; a final layer maps to the class logits.
    pub head_hidden: Vec<usize>,
}

impl Default for CnnTcnConfig {
    fn default() -> Self {
        Self {
            frames: 16,
            height: 32,
            width: 32,
            conv_widths: vec![16, 32, 64],
            conv_kernel: (3, 5),
            pooled_blocks: 2,
            tcn_kernel: 3,
            dilations: vec![1, 2, 4],
            tcn_width: None,
            dropout: 0.1,
            head_hidden: vec![16, 16],
        }
    }
}

impl CnnTcnConfig {
    /// The small configuration used for end-to-end gradient checks.
    pub fn tiny() -> Self {
        Self {
            frames: 4,
            height: 8,
            width: 8,
            conv_widths: vec![2, 3, 4],
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.frames == 0 || self.height == 0 || self.width == 0 {
            return bad(format!(
                "input shape must be positive, got {}x{}x{}",
                self.frames, self.height, self.width
            ));
        }
        if self.conv_widths.is_empty() || self.conv_widths.contains(&0) {
            return bad(format!("conv widths must be non-empty and positive, got {:?}", self.conv_widths));
        }
        if self.conv_kernel.0 == 0 || self.conv_kernel.1 == 0 {
            return bad(format!("conv kernel must be positive, got {:?}", self.conv_kernel));
        }
        if self.pooled_blocks > self.conv_widths.len() || self.pooled_blocks >= 32 {
            return bad(format!(
                "pooled_blocks {} exceeds conv block count {}",
                self.pooled_blocks,
                self.conv_widths.len()
            ));
        }
        let div = 1usize << self.pooled_blocks;
        if self.height % div != 0 || self.width % div != 0 {
            return bad(format!(
                "input {}x{} is not divisible by {div} as required by {} pooling stages",
                self.height, self.width, self.pooled_blocks
            ));
        }
        if self.tcn_kernel == 0 {
            return bad("tcn_kernel must be >= 1".into());
        }
        if self.dilations.is_empty() || self.dilations[0] == 0 || self.dilations.windows(2).any(|w| w[1] <= w[0]) {
            return bad(format!(
                "dilations must be non-empty, positive and strictly increasing, got {:?}",
                self.dilations
            ));
        }
        if self.tcn_width == Some(0) {
            return bad("tcn_width must be >= 1".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout must lie in [0, 1), got {}", self.dropout));
        }
        if self.head_hidden.contains(&0) {
            return bad(format!("head sizes must be positive, got {:?}", self.head_hidden));
        }
        Ok(())
    }

    /// Channels after the 1/12 reduction of the last conv block.
    pub fn reduced_channels(&self) -> usize {
        reduced_channels(*self.conv_widths.last().unwrap_or(&1))
    }

    /// Spatial size of the last conv block's output.
    pub fn frame_map_hw(&self) -> (usize, usize) {
        let div = 1usize << self.pooled_blocks;
        (self.height / div, self.width / div)
    }

    /// Length of the per-frame feature vector.
    pub fn feature_len(&self) -> usize {
        let (h, w) = self.frame_map_hw();
        self.reduced_channels() * h * w
    }

    pub fn tcn_width(&self) -> usize {
        self.tcn_width.unwrap_or_else(|| self.reduced_channels())
    }

    /// Total number of stored values (parameters and batch-norm buffers) for
    /// `kind`, or `None` on arithmetic overflow. Allocation-free, so it can
    /// vet untrusted configurations.
    pub fn state_len(&self, kind: ModelKind) -> Option<usize> {
        let add = |a: usize, b: usize| a.checked_add(b);
        let mul = |a: usize, b: usize| a.checked_mul(b);
        let (kh, kw) = self.conv_kernel;
        let mut total = 0usize;
        let mut c_in = 1usize;
        for &c_out in &self.conv_widths {
            total = add(total, mul(mul(mul(c_out, c_in)?, kh)?, kw)?)?;
            total = add(total, mul(4, c_out)?)?;
            c_in = c_out;
        }
        let reduced = reduced_channels(c_in);
        total = add(total, mul(add(c_in, 1)?, reduced)?)?;
        let div = 1usize.checked_shl(self.pooled_blocks as u32)?;
        let feature = mul(mul(reduced, self.height / div)?, self.width / div)?;
        let head_in = match kind {
            ModelKind::CnnTcn => {
                let width = self.tcn_width.unwrap_or(reduced);
                let mut c = feature;
                for _ in &self.dilations {
                    total = add(total, add(mul(mul(width, c)?, self.tcn_kernel)?, width)?)?;
                    if c != width {
                        total = add(total, mul(add(c, 1)?, width)?)?;
                    }
                    c = width;
                }
                width
            }
            ModelKind::Cnn => feature,
        };
        let mut d = head_in;
        for &h in self.head_hidden.iter().chain(std::iter::once(&NUM_CLASSES)) {
            total = add(total, mul(add(d, 1)?, h)?)?;
            d = h;
        }
        Some(total)
    }

    /// Number of past frames the final temporal block can see.
    pub fn receptive_field(&self) -> usize {
        1 + self.dilations.iter().map(|d| (self.tcn_kernel - 1) * d).sum::<usize>()
    }
}

fn sub_seed(master: u64, index: u64) -> u64 {
    seed::derive(master, "init", index)
}

#[derive(Debug, Clone)]
struct ConvBlock {
    conv: Conv2d,
    bn: BatchNorm,
    act: LeakyRelu,
    pool: Option<MaxPool2d>,
}

impl ConvBlock {
    fn forward(&mut self, x: &Tensor, mode: Mode) -> Result<Tensor> {
        let y = self.conv.forward(x, mode)?;
        let y = self.bn.forward(&y, mode)?;
        let y = self.act.forward(&y, mode)?;
        match &mut self.pool {
            Some(p) => p.forward(&y, mode),
            None => Ok(y),
        }
    }

    fn backward(&mut self, dy: &Tensor) -> Result<Tensor> {
        let dy = match &mut self.pool {
            Some(p) => p.backward(dy)?,
            None => dy.clone(),
        };
        let d = self.act.backward(&dy)?;
        let d = self.bn.backward(&d)?;
        self.conv.backward(&d)
    }
}

/// Shared per-frame feature extractor: `[B][1][H][W] -> [B][F]`.
#[derive(Debug, Clone)]
pub struct FrameModel {
    blocks: Vec<ConvBlock>,
    reduce: Pointwise,
    map_shape: Vec<usize>,
}

impl FrameModel {
    fn new(cfg: &CnnTcnConfig, seed: u64) -> Self {
        let mut c_in = 1;
        let blocks = cfg
            .conv_widths
            .iter()
            .enumerate()
            .map(|(i, &c_out)| {
                let block = ConvBlock {
                    conv: Conv2d::new(c_in, c_out, cfg.conv_kernel, 1, Padding::Same, sub_seed(seed, i as u64))
                        .without_bias(),
                    bn: BatchNorm::new(c_out),
                    act: LeakyRelu::default(),
                    pool: (i < cfg.pooled_blocks).then(MaxPool2d::new),
                };
                c_in = c_out;
                block
            })
            .collect();
        Self {
            blocks,
            reduce: Pointwise::channel_reduce(c_in, sub_seed(seed, 100)),
            map_shape: Vec::new(),
        }
    }

    pub fn forward(&mut self, x: &Tensor, mode: Mode) -> Result<Tensor> {
        let mut y = x.clone();
        for b in &mut self.blocks {
            y = b.forward(&y, mode)?;
        }
        self.map_shape = y.shape().to_vec();
        let (n, c) = (y.dim(0), y.dim(1));
        let l = y.dim(2) * y.dim(3);
        let r = self.reduce.forward(&y.reshape(&[n, c, l])?, mode)?;
        let f = r.dim(1) * l;
        r.reshape(&[n, f])
    }

    pub fn backward(&mut self, dy: &Tensor) -> Result<Tensor> {
        let [n, c, h, w] = <[usize; 4]>::try_from(self.map_shape.as_slice())
            .map_err(|_| Error::Data("frame model backward before forward".into()))?;
        let d = dy.clone().reshape(&[n, self.reduce.out_channels(), h * w])?;
        let mut d = self.reduce.backward(&d)?.reshape(&[n, c, h, w])?;
        for b in self.blocks.iter_mut().rev() {
            d = b.backward(&d)?;
        }
        Ok(d)
    }

    fn visit<'a>(&'a self, out: &mut Vec<(String, &'a Tensor)>) {
        for (i, b) in self.blocks.iter().enumerate() {
            push_state(out, &format!("frame.{i}.conv"), &b.conv);
            push_state(out, &format!("frame.{i}.bn"), &b.bn);
        }
        push_state(out, "frame.reduce", &self.reduce);
    }

    fn visit_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Tensor>, params_only: bool) {
        for b in &mut self.blocks {
            collect(out, &mut b.conv, params_only);
            collect(out, &mut b.bn, params_only);
        }
        collect(out, &mut self.reduce, params_only);
    }
}

fn push_state<'a, L: Layer>(out: &mut Vec<(String, &'a Tensor)>, prefix: &str, layer: &'a L) {
    out.extend(layer.state().into_iter().map(|(name, t)| (format!("{prefix}.{name}"), t)));
}

fn collect<'a, L: Layer>(out: &mut Vec<&'a mut Tensor>, layer: &'a mut L, params_only: bool) {
    if params_only {
        out.extend(layer.params_mut());
    } else {
        out.extend(layer.state_mut());
    }
}

/// Causal conv, LeakyReLU, dropout, then a residual add (projected when
/// channel counts differ). Operates on `[N][C][T]`.
#[derive(Debug, Clone)]
struct TemporalBlock {
    conv: CausalConv1d,
    act: LeakyRelu,
    drop: Dropout,
    proj: Option<Pointwise>,
}

impl TemporalBlock {
    fn forward(&mut self, x: &Tensor, mode: Mode) -> Result<Tensor> {
        let h = self.conv.forward(x, mode)?;
        let h = self.act.forward(&h, mode)?;
        let mut h = self.drop.forward(&h, mode)?;
        let skip = match &mut self.proj {
            Some(p) => p.forward(x, mode)?,
            None => x.clone(),
        };
        h.data_mut().iter_mut().zip(skip.data()).for_each(|(a, b)| *a += b);
        Ok(h)
    }

    fn backward(&mut self, dy: &Tensor) -> Result<Tensor> {
        let d = self.drop.backward(dy)?;
        let d = self.act.backward(&d)?;
        let mut dx = self.conv.backward(&d)?;
        let skip = match &mut self.proj {
            Some(p) => p.backward(dy)?,
            None => dy.clone(),
        };
        dx.data_mut().iter_mut().zip(skip.data()).for_each(|(a, b)| *a += b);
        Ok(dx)
    }
}

#[derive(Debug, Clone)]
struct Head {
    layers: Vec<Dense>,
    acts: Vec<LeakyRelu>,
}

impl Head {
    fn new(d_in: usize, hidden: &[usize], seed: u64) -> Self {
        let mut dims = vec![d_in];
        dims.extend_from_slice(hidden);
        dims.push(NUM_CLASSES);
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| Dense::new(w[0], w[1], sub_seed(seed, 300 + i as u64)))
            .collect();
        Self {
            layers,
            acts: vec![LeakyRelu::default(); hidden.len()],
        }
    }

    fn forward(&mut self, x: &Tensor, mode: Mode) -> Result<Tensor> {
        let mut y = x.clone();
        for i in 0..self.layers.len() {
            y = self.layers[i].forward(&y, mode)?;
            if i < self.acts.len() {
                y = self.acts[i].forward(&y, mode)?;
            }
        }
        Ok(y)
    }

    fn backward(&mut self, dy: &Tensor) -> Result<Tensor> {
        let mut d = dy.clone();
        for i in (0..self.layers.len()).rev() {
            if i < self.acts.len() {
                d = self.acts[i].backward(&d)?;
            }
            d = self.layers[i].backward(&d)?;
        }
        Ok(d)
    }
}

/// Frame-sequence classifier: `[N][T][H][W] -> [N][7]` logits.
///
/// Both kinds share the frame model. `CnnTcn` feeds the per-frame features
/// through causal temporal blocks and reads out the last step; `Cnn` averages
/// the frame features over time instead.
#[derive(Debug, Clone)]
pub struct Model {
    kind: ModelKind,
    config: CnnTcnConfig,
    seed: u64,
    frame: FrameModel,
    tcn: Vec<TemporalBlock>,
    head: Head,
    batch: usize,
}

impl Model {
    pub fn new(kind: ModelKind, config: CnnTcnConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let frame = FrameModel::new(&config, seed);
        let f = config.feature_len();
        let (tcn, head_in) = match kind {
            ModelKind::CnnTcn => {
                let width = config.tcn_width();
                let mut c_in = f;
                let mut blocks = Vec::with_capacity(config.dilations.len());
                for (i, &d) in config.dilations.iter().enumerate() {
                    let i = i as u64;
                    blocks.push(TemporalBlock {
                        conv: CausalConv1d::new(c_in, width, config.tcn_kernel, d, sub_seed(seed, 200 + 2 * i))?,
                        act: LeakyRelu::default(),
                        drop: Dropout::new(config.dropout, seed::derive(seed, "dropout", i))?,
                        proj: (c_in != width).then(|| Pointwise::new(c_in, width, sub_seed(seed, 201 + 2 * i))),
                    });
                    c_in = width;
                }
                (blocks, width)
            }
            ModelKind::Cnn => (Vec::new(), f),
        };
        let head = Head::new(head_in, &config.head_hidden, seed);
        Ok(Self {
            kind,
            config,
            seed,
            frame,
            tcn,
            head,
            batch: 0,
        })
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn config(&self) -> &CnnTcnConfig {
        &self.config
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Expected per-sample input shape `[T, H, W]`.
    pub fn input_shape(&self) -> [usize; 3] {
        [self.config.frames, self.config.height, self.config.width]
    }

    pub fn param_count(&self) -> usize {
        let mut m = self.clone();
        m.params_mut().iter().map(|t| t.len()).sum()
    }

    /// All persistent tensors with hierarchical names, in checkpoint order.
    pub fn named_state(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        self.frame.visit(&mut out);
        for (i, b) in self.tcn.iter().enumerate() {
            push_state(&mut out, &format!("tcn.{i}.conv"), &b.conv);
            if let Some(p) = &b.proj {
                push_state(&mut out, &format!("tcn.{i}.proj"), p);
            }
        }
        for (i, l) in self.head.layers.iter().enumerate() {
            push_state(&mut out, &format!("head.{i}"), l);
        }
        out
    }

    fn tensors_mut(&mut self, params_only: bool) -> Vec<&mut Tensor> {
        let mut out = Vec::new();
        self.frame.visit_mut(&mut out, params_only);
        for b in &mut self.tcn {
            collect(&mut out, &mut b.conv, params_only);
            if let Some(p) = &mut b.proj {
                collect(&mut out, p, params_only);
            }
        }
        for l in &mut self.head.layers {
            collect(&mut out, l, params_only);
        }
        out
    }

    fn check_input(&self, x: &Tensor) -> Result<usize> {
        let [t, h, w] = self.input_shape();
        let n = if x.shape().len() == 4 { x.dim(0) } else { 0 };
        x.expect_shape("model input", &[n, t, h, w])?;
        if n == 0 {
            return Err(Error::Shape {
                op: "model input (batch >= 1)",
                expected: vec![1, t, h, w],
                got: x.shape().to_vec(),
            });
        }
        Ok(n)
    }

    /// Per-frame features arranged as `[N][F][T]`.
    fn frame_features(&mut self, x: &Tensor, mode: Mode) -> Result<Tensor> {
        let n = self.check_input(x)?;
        let [t, h, w] = self.input_shape();
        let feats = self.frame.forward(&x.clone().reshape(&[n * t, 1, h, w])?, mode)?;
        let f = feats.dim(1);
        let mut out = Tensor::zeros(&[n, f, t]);
        let (src, dst) = (feats.data(), out.data_mut());
        for s in 0..n {
            for ti in 0..t {
                for fi in 0..f {
                    dst[(s * f + fi) * t + ti] = src[(s * t + ti) * f + fi];
                }
            }
        }
        Ok(out)
    }

    fn frame_features_backward(&mut self, d: &Tensor) -> Result<Tensor> {
        let (n, f, t) = (d.dim(0), d.dim(1), d.dim(2));
        let mut dfeat = Tensor::zeros(&[n * t, f]);
        let (src, dst) = (d.data(), dfeat.data_mut());
        for s in 0..n {
            for ti in 0..t {
                for fi in 0..f {
                    dst[(s * t + ti) * f + fi] = src[(s * f + fi) * t + ti];
                }
            }
        }
        let dx = self.frame.backward(&dfeat)?;
        let [_, h, w] = self.input_shape();
        dx.reshape(&[n, t, h, w])
    }

    /// Outputs of every temporal block, each `[N][C][T]`. Empty for the CNN baseline.
    pub fn temporal_outputs(&mut self, x: &Tensor, mode: Mode) -> Result<Vec<Tensor>> {
        let mut y = self.frame_features(x, mode)?;
        let mut outs = Vec::with_capacity(self.tcn.len());
        for b in &mut self.tcn {
            y = b.forward(&y, mode)?;
            outs.push(y.clone());
        }
        Ok(outs)
    }

    /// Per-frame feature vectors `[N][T][F]` from the shared frame model.
    pub fn frame_embeddings(&mut self, x: &Tensor, mode: Mode) -> Result<Tensor> {
        let n = self.check_input(x)?;
        let [t, h, w] = self.input_shape();
        let feats = self.frame.forward(&x.clone().reshape(&[n * t, 1, h, w])?, mode)?;
        let f = feats.dim(1);
        feats.reshape(&[n, t, f])
    }

    /// Sets every convolution weight (frame, reduction, temporal and
    /// projection) to zero.
    pub fn zero_conv_weights(&mut self) {
        for b in &mut self.frame.blocks {
            b.conv.weight.data_mut().fill(0.0);
        }
        self.frame.reduce.weight.data_mut().fill(0.0);
        for b in &mut self.tcn {
            b.conv.weight.data_mut().fill(0.0);
            if let Some(p) = &mut b.proj {
                p.weight.data_mut().fill(0.0);
            }
        }
    }

    /// Zeroes the last dense layer so every input maps to uniform logits.
    pub fn zero_output_layer(&mut self) {
        if let Some(l) = self.head.layers.last_mut() {
            l.weight.data_mut().fill(0.0);
            l.bias.data_mut().fill(0.0);
        }
    }

    /// Addresses of the frame-model parameter buffers.
    pub fn frame_param_ptrs(&mut self) -> Vec<*const f64> {
        let mut out = Vec::new();
        self.frame.visit_mut(&mut out, true);
        out.into_iter().map(|t| t.data().as_ptr()).collect()
    }
}

impl Layer for Model {
    fn forward(&mut self, x: &Tensor, mode: Mode) -> Result<Tensor> {
        let mut y = self.frame_features(x, mode)?;
        let (n, t) = (y.dim(0), y.dim(2));
        self.batch = n;
        let pooled = match self.kind {
            ModelKind::CnnTcn => {
                for b in &mut self.tcn {
                    y = b.forward(&y, mode)?;
                }
                let c = y.dim(1);
                let last: Vec<f64> = y.data().chunks(t).map(|row| row[t - 1]).collect();
                Tensor::from_vec(&[n, c], last)?
            }
            ModelKind::Cnn => {
                let f = y.dim(1);
                let mean: Vec<f64> = y.data().chunks(t).map(|row| row.iter().sum::<f64>() / t as f64).collect();
                Tensor::from_vec(&[n, f], mean)?
            }
        };
        self.head.forward(&pooled, mode)
    }

    fn backward(&mut self, dy: &Tensor) -> Result<Tensor> {
        let d = self.head.backward(dy)?;
        let (n, c) = (d.dim(0), d.dim(1));
        let t = self.config.frames;
        if n != self.batch {
            return Err(Error::Shape {
                op: "model backward",
                expected: vec![self.batch, c],
                got: d.shape().to_vec(),
            });
        }
        let mut dseq = Tensor::zeros(&[n, c, t]);
        match self.kind {
            ModelKind::CnnTcn => {
                for (row, &g) in dseq.data_mut().chunks_mut(t).zip(d.data()) {
                    row[t - 1] = g;
                }
                for b in self.tcn.iter_mut().rev() {
                    dseq = b.backward(&dseq)?;
                }
            }
            ModelKind::Cnn => {
                for (row, &g) in dseq.data_mut().chunks_mut(t).zip(d.data()) {
                    row.fill(g / t as f64);
                }
            }
        }
        self.frame_features_backward(&dseq)
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.tensors_mut(true)
    }

    fn state_mut(&mut self) -> Vec<&mut Tensor> {
        self.tensors_mut(false)
    }
}
