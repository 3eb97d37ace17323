use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{NetError, Tensor};

/// One entry of a sequential architecture description.
#[derive(Clone, Debug, PartialEq)]
pub enum LayerSpec {
    /// Valid-padding 2D convolution over channels-last `[H, W, C]` input.
    Conv2d {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
    },
    Relu,
    Tanh,
    Flatten,
    Linear {
        in_features: usize,
        out_features: usize,
    },
    /// Softmax over the last axis.
    Softmax,
    /// Appends the next side input (`width` features per sample) to a flat input.
    Concat { width: usize },
}

impl LayerSpec {
    pub fn conv(in_channels: usize, out_channels: usize, kernel: usize, stride: usize) -> Self {
        LayerSpec::Conv2d {
            in_channels,
            out_channels,
            kernel,
            stride,
        }
    }

    pub fn linear(in_features: usize, out_features: usize) -> Self {
        LayerSpec::Linear {
            in_features,
            out_features,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            LayerSpec::Conv2d { .. } => "conv2d",
            LayerSpec::Relu => "relu",
            LayerSpec::Tanh => "tanh",
            LayerSpec::Flatten => "flatten",
            LayerSpec::Linear { .. } => "linear",
            LayerSpec::Softmax => "softmax",
            LayerSpec::Concat { .. } => "concat",
        }
    }
}

#[derive(Clone, Debug)]
struct ConvGeometry {
    in_h: usize,
    in_w: usize,
    in_c: usize,
    out_h: usize,
    out_w: usize,
    out_c: usize,
    kernel: usize,
    stride: usize,
}

impl ConvGeometry {
    fn patch_len(&self) -> usize {
        self.kernel * self.kernel * self.in_c
    }

    fn positions(&self) -> usize {
        self.out_h * self.out_w
    }

    /// Unfolds `[B, H, W, C]` into `[B * OH * OW, K * K * C]` patches.
    fn im2col(&self, input: &[f64], batch: usize) -> Vec<f64> {
        let patch = self.patch_len();
        let in_sample = self.in_h * self.in_w * self.in_c;
        let row_w = self.kernel * self.in_c;
        let mut cols = vec![0.0; batch * self.positions() * patch];
        let mut dst = 0;
        for b in 0..batch {
            let sample = &input[b * in_sample..(b + 1) * in_sample];
            for oy in 0..self.out_h {
                for ox in 0..self.out_w {
                    for ky in 0..self.kernel {
                        let y = oy * self.stride + ky;
                        let start = (y * self.in_w + ox * self.stride) * self.in_c;
                        cols[dst..dst + row_w].copy_from_slice(&sample[start..start + row_w]);
                        dst += row_w;
                    }
                }
            }
        }
        cols
    }

    /// Scatter-adds patch gradients back onto the input layout.
    fn col2im(&self, cols: &[f64], batch: usize) -> Vec<f64> {
        let in_sample = self.in_h * self.in_w * self.in_c;
        let row_w = self.kernel * self.in_c;
        let mut out = vec![0.0; batch * in_sample];
        let mut src = 0;
        for b in 0..batch {
            let sample = &mut out[b * in_sample..(b + 1) * in_sample];
            for oy in 0..self.out_h {
                for ox in 0..self.out_w {
                    for ky in 0..self.kernel {
                        let y = oy * self.stride + ky;
                        let start = (y * self.in_w + ox * self.stride) * self.in_c;
                        for (d, s) in sample[start..start + row_w]
                            .iter_mut()
                            .zip(&cols[src..src + row_w])
                        {
                            *d += s;
                        }
                        src += row_w;
                    }
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug)]
enum Layer {
    Conv2d {
        geom: ConvGeometry,
        weight: Tensor,
        bias: Tensor,
    },
    Relu,
    Tanh,
    Flatten,
    Linear {
        weight: Tensor,
        bias: Tensor,
    },
    Softmax,
    Concat {
        width: usize,
    },
}

/// Values recorded by [`Network::forward`] for the backward pass.
#[derive(Clone, Debug)]
enum Record {
    /// Im2col patches of the conv input.
    Patches(Vec<f64>),
    /// Layer input (linear).
    Input(Tensor),
    /// Layer output (relu, tanh, softmax).
    Output(Tensor),
    /// Input shape (flatten).
    Shape(Vec<usize>),
    /// Width of the main stream before concatenation.
    Split(usize),
}

/// Activation record of one forward pass.
#[derive(Clone, Debug)]
pub struct Tape {
    batch: usize,
    records: Vec<Record>,
}

impl Tape {
    /// Per-ReLU activity masks (`true` where the unit passed its input).
    pub fn relu_masks(&self) -> Vec<Vec<bool>> {
        self.records
            .iter()
            .filter_map(|r| match r {
                Record::Output(t) => Some(t.data().iter().map(|&v| v > 0.0).collect()),
                _ => None,
            })
            .collect()
    }
}

/// Gradients aligned with [`Network::params`].
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients(pub Vec<Tensor>);

impl Gradients {
    pub fn zeros_like(net: &Network) -> Self {
        Gradients(
            net.params()
                .into_iter()
                .map(|p| Tensor::zeros(p.shape().to_vec()))
                .collect(),
        )
    }

    pub fn sum_squares(&self) -> f64 {
        self.0.iter().map(Tensor::sum_squares).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(Tensor::is_finite)
    }

    pub fn scale(&mut self, factor: f64) {
        self.0.iter_mut().for_each(|t| t.scale(factor));
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            a.add_assign(b);
        }
    }
}

/// Rescales a set of gradients so that their joint L2 norm is at most
/// `max_norm`. Returns the norm before clipping.
pub fn clip_global_norm(grads: &mut [&mut Gradients], max_norm: f64) -> f64 {
    let norm = grads.iter().map(|g| g.sum_squares()).sum::<f64>().sqrt();
    if norm > max_norm {
        let factor = max_norm / (norm + 1e-6);
        grads.iter_mut().for_each(|g| g.scale(factor));
    }
    norm
}

/// Result of a backward pass.
#[derive(Clone, Debug)]
pub struct Backward {
    pub params: Gradients,
    pub input: Tensor,
    /// Gradients for the side inputs consumed by concat layers, in order.
    pub side: Vec<Tensor>,
}

/// Sequential differentiable network over batched inputs.
///
/// Inputs are `[B, ..input_shape]`; every layer operates on the whole batch.
#[derive(Clone, Debug)]
pub struct Network {
    specs: Vec<LayerSpec>,
    layers: Vec<Layer>,
    input_shape: Vec<usize>,
    output_shape: Vec<usize>,
}

fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_trans: bool,
    b: &[f64],
    b_trans: bool,
    c: &mut [f64],
    accumulate: bool,
) {
    debug_assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    if m == 0 || n == 0 {
        return;
    }
    let (rsa, csa) = if a_trans { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_trans { (1, k as isize) } else { (n as isize, 1) };
    let beta = if accumulate { 1.0 } else { 0.0 };
    // SAFETY: the slices cover the strided extents checked above.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

fn uniform_tensor(rng: &mut ChaCha8Rng, shape: Vec<usize>, bound: f64) -> Tensor {
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| rng.gen_range(-bound..bound)).collect();
    Tensor::new(shape, data).expect("shape product matches")
}

impl Network {
    /// Instantiates `specs` for per-sample input shape `input_shape`, with
    /// weights and biases drawn from `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
    pub fn build(specs: &[LayerSpec], input_shape: &[usize], seed: u64) -> Result<Self, NetError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut shape = input_shape.to_vec();
        let mut layers = Vec::with_capacity(specs.len());
        for (i, spec) in specs.iter().enumerate() {
            let mismatch = |expected: String| NetError::ShapeMismatch {
                layer: i,
                kind: spec.name(),
                previous: i.checked_sub(1).map(|p| specs[p].name()).unwrap_or("input"),
                expected,
                found: shape.clone(),
            };
            let layer = match *spec {
                LayerSpec::Conv2d {
                    in_channels,
                    out_channels,
                    kernel,
                    stride,
                } => {
                    if shape.len() != 3 || shape[2] != in_channels {
                        return Err(mismatch(format!("[H, W, {in_channels}]")));
                    }
                    if kernel == 0 || stride == 0 || shape[0] < kernel || shape[1] < kernel {
                        return Err(mismatch(format!("spatial size >= kernel {kernel}")));
                    }
                    let geom = ConvGeometry {
                        in_h: shape[0],
                        in_w: shape[1],
                        in_c: in_channels,
                        out_h: (shape[0] - kernel) / stride + 1,
                        out_w: (shape[1] - kernel) / stride + 1,
                        out_c: out_channels,
                        kernel,
                        stride,
                    };
                    let fan_in = geom.patch_len();
                    let bound = 1.0 / (fan_in as f64).sqrt();
                    let weight = uniform_tensor(
                        &mut rng,
                        vec![kernel, kernel, in_channels, out_channels],
                        bound,
                    );
                    let bias = uniform_tensor(&mut rng, vec![out_channels], bound);
                    shape = vec![geom.out_h, geom.out_w, out_channels];
                    Layer::Conv2d { geom, weight, bias }
                }
                LayerSpec::Linear {
                    in_features,
                    out_features,
                } => {
                    if shape != [in_features] {
                        return Err(mismatch(format!("[{in_features}]")));
                    }
                    let bound = 1.0 / (in_features as f64).sqrt();
                    let weight = uniform_tensor(&mut rng, vec![in_features, out_features], bound);
                    let bias = uniform_tensor(&mut rng, vec![out_features], bound);
                    shape = vec![out_features];
                    Layer::Linear { weight, bias }
                }
                LayerSpec::Relu => Layer::Relu,
                LayerSpec::Tanh => Layer::Tanh,
                LayerSpec::Softmax => Layer::Softmax,
                LayerSpec::Flatten => {
                    shape = vec![shape.iter().product()];
                    Layer::Flatten
                }
                LayerSpec::Concat { width } => {
                    if shape.len() != 1 {
                        return Err(mismatch("flat features".to_string()));
                    }
                    shape = vec![shape[0] + width];
                    Layer::Concat { width }
                }
            };
            layers.push(layer);
        }
        Ok(Self {
            specs: specs.to_vec(),
            layers,
            input_shape: input_shape.to_vec(),
            output_shape: shape,
        })
    }

    pub fn specs(&self) -> &[LayerSpec] {
        &self.specs
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn output_shape(&self) -> &[usize] {
        &self.output_shape
    }

    pub fn output_len(&self) -> usize {
        self.output_shape.iter().product()
    }

    /// Parameter tensors in layer order (weight, then bias).
    pub fn params(&self) -> Vec<&Tensor> {
        let mut out = Vec::new();
        for layer in &self.layers {
            if let Layer::Conv2d { weight, bias, .. } | Layer::Linear { weight, bias } = layer {
                out.push(weight);
                out.push(bias);
            }
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::new();
        for layer in &mut self.layers {
            if let Layer::Conv2d { weight, bias, .. } | Layer::Linear { weight, bias } = layer {
                out.push(weight);
                out.push(bias);
            }
        }
        out
    }

    /// `(layer index, tensor name)` for each entry of [`Network::params`].
    pub fn param_names(&self) -> Vec<(usize, &'static str)> {
        let mut out = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            if matches!(layer, Layer::Conv2d { .. } | Layer::Linear { .. }) {
                out.push((i, "weight"));
                out.push((i, "bias"));
            }
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    pub fn params_finite(&self) -> bool {
        self.params().iter().all(|p| p.is_finite())
    }

    /// Overwrites all parameters with those of `other` (same architecture).
    pub fn copy_params_from(&mut self, other: &Network) {
        for (dst, src) in self.params_mut().into_iter().zip(other.params()) {
            dst.data_mut().copy_from_slice(src.data());
        }
    }

    /// Multiplies the weights of the last linear layer by `factor`.
    pub fn scale_output_layer(&mut self, factor: f64) {
        if let Some(Layer::Linear { weight, .. }) = self
            .layers
            .iter_mut()
            .rev()
            .find(|l| matches!(l, Layer::Linear { .. }))
        {
            weight.scale(factor);
        }
    }

    fn check_input(&self, input: &Tensor) -> Result<usize, NetError> {
        let shape = input.shape();
        if shape.len() != self.input_shape.len() + 1 || shape[1..] != self.input_shape[..] {
            return Err(NetError::InputShape {
                expected: self.input_shape.clone(),
                found: shape.to_vec(),
            });
        }
        if !input.is_finite() {
            return Err(NetError::NonFinite("input"));
        }
        Ok(shape[0])
    }

    /// Runs the network without recording activations.
    pub fn predict(&self, input: &Tensor) -> Result<Tensor, NetError> {
        self.run(input, &[], false).map(|(out, _)| out)
    }

    pub fn predict_with(&self, input: &Tensor, side: &[&Tensor]) -> Result<Tensor, NetError> {
        self.run(input, side, false).map(|(out, _)| out)
    }

    pub fn forward(&self, input: &Tensor) -> Result<(Tensor, Tape), NetError> {
        self.run(input, &[], true)
    }

    /// Forward pass where each concat layer consumes the next `side` tensor.
    pub fn forward_with(&self, input: &Tensor, side: &[&Tensor]) -> Result<(Tensor, Tape), NetError> {
        self.run(input, side, true)
    }

    fn run(&self, input: &Tensor, side: &[&Tensor], record: bool) -> Result<(Tensor, Tape), NetError> {
        let batch = self.check_input(input)?;
        let mut x = input.clone();
        let mut records = Vec::with_capacity(if record { self.layers.len() } else { 0 });
        let mut side_iter = side.iter();
        for layer in &self.layers {
            x = match layer {
                Layer::Conv2d { geom, weight, bias } => {
                    let cols = geom.im2col(x.data(), batch);
                    let m = batch * geom.positions();
                    let mut out = Vec::with_capacity(m * geom.out_c);
                    for _ in 0..m {
                        out.extend_from_slice(bias.data());
                    }
                    gemm(m, geom.patch_len(), geom.out_c, &cols, false, weight.data(), false, &mut out, true);
                    if record {
                        records.push(Record::Patches(cols));
                    }
                    Tensor::new(vec![batch, geom.out_h, geom.out_w, geom.out_c], out)?
                }
                Layer::Linear { weight, bias } => {
                    let (fin, fout) = (weight.shape()[0], weight.shape()[1]);
                    let mut out = Vec::with_capacity(batch * fout);
                    for _ in 0..batch {
                        out.extend_from_slice(bias.data());
                    }
                    gemm(batch, fin, fout, x.data(), false, weight.data(), false, &mut out, true);
                    let y = Tensor::new(vec![batch, fout], out)?;
                    if record {
                        records.push(Record::Input(x));
                    }
                    y
                }
                Layer::Relu => {
                    let mut y = x;
                    y.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
                    if record {
                        records.push(Record::Output(y.clone()));
                    }
                    y
                }
                Layer::Tanh => {
                    let mut y = x;
                    y.data_mut().iter_mut().for_each(|v| *v = v.tanh());
                    if record {
                        records.push(Record::Output(y.clone()));
                    }
                    y
                }
                Layer::Softmax => {
                    let mut y = x;
                    let w = *y.shape().last().unwrap_or(&1);
                    for row in y.data_mut().chunks_mut(w) {
                        softmax_in_place(row);
                    }
                    if record {
                        records.push(Record::Output(y.clone()));
                    }
                    y
                }
                Layer::Flatten => {
                    let shape = x.shape().to_vec();
                    let w = x.row_len();
                    if record {
                        records.push(Record::Shape(shape));
                    }
                    x.reshape(vec![batch, w])?
                }
                Layer::Concat { width } => {
                    let extra = side_iter.next().ok_or(NetError::MissingSideInput)?;
                    if extra.shape() != [batch, *width] {
                        return Err(NetError::InputShape {
                            expected: vec![*width],
                            found: extra.shape().to_vec(),
                        });
                    }
                    if record {
                        records.push(Record::Split(x.row_len()));
                    }
                    Tensor::concat_columns(&x, extra)
                }
            };
        }
        Ok((x, Tape { batch, records }))
    }

    /// Back-propagates `output_grad` through the activations in `tape`.
    pub fn backward(&self, tape: &Tape, output_grad: &Tensor) -> Result<Backward, NetError> {
        let batch = tape.batch;
        if tape.records.len() != self.layers.len() {
            return Err(NetError::TapeMismatch);
        }
        if output_grad.shape().len() != self.output_shape.len() + 1
            || output_grad.shape()[0] != batch
            || output_grad.shape()[1..] != self.output_shape[..]
        {
            return Err(NetError::InputShape {
                expected: self.output_shape.clone(),
                found: output_grad.shape().to_vec(),
            });
        }
        let mut g = output_grad.clone();
        let mut param_grads: Vec<Tensor> = Vec::new();
        let mut side_grads = Vec::new();
        for (layer, record) in self.layers.iter().zip(&tape.records).rev() {
            g = match (layer, record) {
                (Layer::Conv2d { geom, weight, .. }, Record::Patches(cols)) => {
                    let m = batch * geom.positions();
                    let patch = geom.patch_len();
                    let mut dw = vec![0.0; patch * geom.out_c];
                    gemm(patch, m, geom.out_c, cols, true, g.data(), false, &mut dw, false);
                    let mut db = vec![0.0; geom.out_c];
                    for row in g.data().chunks(geom.out_c) {
                        for (d, v) in db.iter_mut().zip(row) {
                            *d += v;
                        }
                    }
                    let mut dcols = vec![0.0; m * patch];
                    gemm(m, geom.out_c, patch, g.data(), false, weight.data(), true, &mut dcols, false);
                    param_grads.push(Tensor::new(vec![geom.out_c], db)?);
                    param_grads.push(Tensor::new(weight.shape().to_vec(), dw)?);
                    Tensor::new(
                        vec![batch, geom.in_h, geom.in_w, geom.in_c],
                        geom.col2im(&dcols, batch),
                    )?
                }
                (Layer::Linear { weight, .. }, Record::Input(x)) => {
                    let (fin, fout) = (weight.shape()[0], weight.shape()[1]);
                    let mut dw = vec![0.0; fin * fout];
                    gemm(fin, batch, fout, x.data(), true, g.data(), false, &mut dw, false);
                    let mut db = vec![0.0; fout];
                    for row in g.data().chunks(fout) {
                        for (d, v) in db.iter_mut().zip(row) {
                            *d += v;
                        }
                    }
                    let mut dx = vec![0.0; batch * fin];
                    gemm(batch, fout, fin, g.data(), false, weight.data(), true, &mut dx, false);
                    param_grads.push(Tensor::new(vec![fout], db)?);
                    param_grads.push(Tensor::new(vec![fin, fout], dw)?);
                    Tensor::new(vec![batch, fin], dx)?
                }
                (Layer::Relu, Record::Output(y)) => {
                    let mut dx = g;
                    for (d, &v) in dx.data_mut().iter_mut().zip(y.data()) {
                        if v <= 0.0 {
                            *d = 0.0;
                        }
                    }
                    dx
                }
                (Layer::Tanh, Record::Output(y)) => {
                    let mut dx = g;
                    for (d, &v) in dx.data_mut().iter_mut().zip(y.data()) {
                        *d *= 1.0 - v * v;
                    }
                    dx
                }
                (Layer::Softmax, Record::Output(y)) => {
                    let mut dx = g;
                    let w = *y.shape().last().unwrap_or(&1);
                    for (drow, yrow) in dx.data_mut().chunks_mut(w).zip(y.data().chunks(w)) {
                        let dot: f64 = drow.iter().zip(yrow).map(|(a, b)| a * b).sum();
                        for (d, &p) in drow.iter_mut().zip(yrow) {
                            *d = p * (*d - dot);
                        }
                    }
                    dx
                }
                (Layer::Flatten, Record::Shape(shape)) => g.reshape(shape.clone())?,
                (Layer::Concat { .. }, Record::Split(left)) => {
                    let (main, extra) = g.split_columns(*left);
                    side_grads.push(extra);
                    main
                }
                _ => return Err(NetError::TapeMismatch),
            };
        }
        param_grads.reverse();
        side_grads.reverse();
        Ok(Backward {
            params: Gradients(param_grads),
            input: g,
            side: side_grads,
        })
    }
}

/// Numerically stable in-place softmax of one row.
pub fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// Numerically stable log-softmax of one row.
pub fn log_softmax(row: &[f64]) -> Vec<f64> {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    row.iter().map(|v| v - lse).collect()
}
