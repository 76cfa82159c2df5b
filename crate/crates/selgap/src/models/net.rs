//! Flat-weight feedforward networks: forward pass, loss, and backprop.
//!
//! Weights live in one contiguous vector, laid out layer by layer as a
//! row-major (out x in) matrix followed by the bias vector. ReLU between
//! layers, linear output.

use crate::synthdata::softmax;

/// What the output layer is trained against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum LossKind {
    /// Softmax cross-entropy against integer class targets.
    CrossEntropy,
    /// Mean squared error of a single linear output against real targets.
    SquaredError,
}

/// Layer dimensions and weight-vector offsets.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Layout {
    /// [input, hidden.., output]
    pub dims: Vec<usize>,
}

impl Layout {
    pub fn new(input: usize, hidden: &[usize], output: usize) -> Self {
        let mut dims = Vec::with_capacity(hidden.len() + 2);
        dims.push(input);
        dims.extend_from_slice(hidden);
        dims.push(output);
        Layout { dims }
    }

    pub fn n_layers(&self) -> usize {
        self.dims.len() - 1
    }

    pub fn weight_count(&self) -> usize {
        (0..self.n_layers()).map(|l| self.dims[l] * self.dims[l + 1] + self.dims[l + 1]).sum()
    }

    /// (weight offset, bias offset) of layer `l`.
    fn offsets(&self, l: usize) -> (usize, usize) {
        let mut off = 0;
        for k in 0..l {
            off += self.dims[k] * self.dims[k + 1] + self.dims[k + 1];
        }
        (off, off + self.dims[l] * self.dims[l + 1])
    }
}

/// Reusable per-layer activation buffers, so the hot loop does not allocate.
pub(crate) struct Workspace {
    /// Post-activation per layer, `a[0]` is the input copy.
    a: Vec<Vec<f64>>,
    /// Pre-activation per layer (1-indexed alongside `a`).
    z: Vec<Vec<f64>>,
    /// Backpropagated gradient w.r.t. each pre-activation.
    delta: Vec<Vec<f64>>,
}

impl Workspace {
    pub fn new(layout: &Layout) -> Self {
        let a = layout.dims.iter().map(|&d| vec![0.0; d]).collect();
        let z = layout.dims[1..].iter().map(|&d| vec![0.0; d]).collect();
        let delta = layout.dims[1..].iter().map(|&d| vec![0.0; d]).collect();
        Workspace { a, z, delta }
    }
}

/// Run the network, leaving activations in the workspace. Returns nothing;
/// the output is `ws.z.last()`.
fn forward_into(layout: &Layout, weights: &[f64], x: &[f64], ws: &mut Workspace) {
    ws.a[0].copy_from_slice(x);
    for l in 0..layout.n_layers() {
        let (wo, bo) = layout.offsets(l);
        let (n_in, n_out) = (layout.dims[l], layout.dims[l + 1]);
        let last = l == layout.n_layers() - 1;
        for o in 0..n_out {
            let row = &weights[wo + o * n_in..wo + (o + 1) * n_in];
            let mut s = weights[bo + o];
            for (w, a) in row.iter().zip(&ws.a[l]) {
                s += w * a;
            }
            ws.z[l][o] = s;
            if !last {
                ws.a[l + 1][o] = s.max(0.0);
            }
        }
    }
}

/// Output (logits or raw regression value) for one input.
pub(crate) fn forward(layout: &Layout, weights: &[f64], x: &[f64]) -> Vec<f64> {
    let mut ws = Workspace::new(layout);
    forward_into(layout, weights, x, &mut ws);
    ws.z.last().unwrap().clone()
}

/// Activations of the last hidden layer (the logits when there is none).
pub(crate) fn last_hidden(layout: &Layout, weights: &[f64], x: &[f64]) -> Vec<f64> {
    let mut ws = Workspace::new(layout);
    forward_into(layout, weights, x, &mut ws);
    if layout.n_layers() >= 2 {
        ws.a.last().unwrap().clone()
    } else {
        ws.z.last().unwrap().clone()
    }
}

/// Per-sample loss. Cross-entropy targets are class indices; squared-error
/// targets are reals (the first output unit is the regression head).
fn sample_loss(kind: LossKind, output: &[f64], target: f64) -> f64 {
    match kind {
        LossKind::CrossEntropy => {
            let max = output.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + output.iter().map(|&z| (z - max).exp()).sum::<f64>().ln();
            lse - output[target as usize]
        }
        LossKind::SquaredError => {
            let d = output[0] - target;
            d * d
        }
    }
}

/// Mean loss over a set of samples.
pub(crate) fn mean_loss(
    layout: &Layout,
    weights: &[f64],
    xs: &[Vec<f64>],
    targets: &[f64],
    kind: LossKind,
    indices: Option<&[usize]>,
) -> f64 {
    let mut ws = Workspace::new(layout);
    let mut total = 0.0;
    let count = indices.map_or(xs.len(), <[usize]>::len);
    for idx in 0..count {
        let i = indices.map_or(idx, |ix| ix[idx]);
        forward_into(layout, weights, &xs[i], &mut ws);
        total += sample_loss(kind, ws.z.last().unwrap(), targets[i]);
    }
    total / count as f64
}

/// Mean loss and its gradient over the index batch. The gradient buffer is
/// overwritten, not accumulated into.
pub(crate) fn batch_loss_grad(
    layout: &Layout,
    weights: &[f64],
    xs: &[Vec<f64>],
    targets: &[f64],
    batch: &[usize],
    kind: LossKind,
    grad: &mut [f64],
    ws: &mut Workspace,
) -> f64 {
    grad.fill(0.0);
    let mut total = 0.0;
    let scale = 1.0 / batch.len() as f64;
    for &i in batch {
        forward_into(layout, weights, &xs[i], ws);
        let out = ws.z.last().unwrap();
        total += sample_loss(kind, out, targets[i]);

        // Gradient at the output pre-activation.
        let l_last = layout.n_layers() - 1;
        match kind {
            LossKind::CrossEntropy => {
                let probs = softmax(out);
                let y = targets[i] as usize;
                for (o, p) in probs.iter().enumerate() {
                    let onehot = if o == y { 1.0 } else { 0.0 };
                    ws.delta[l_last][o] = (p - onehot) * scale;
                }
            }
            LossKind::SquaredError => {
                ws.delta[l_last][0] = 2.0 * (out[0] - targets[i]) * scale;
            }
        }

        // Backwards through the layers.
        for l in (0..layout.n_layers()).rev() {
            let (wo, bo) = layout.offsets(l);
            let (n_in, n_out) = (layout.dims[l], layout.dims[l + 1]);
            for o in 0..n_out {
                let d = ws.delta[l][o];
                let grow = &mut grad[wo + o * n_in..wo + (o + 1) * n_in];
                for (g, a) in grow.iter_mut().zip(&ws.a[l]) {
                    *g += d * a;
                }
                grad[bo + o] += d;
            }
            if l > 0 {
                for i_in in 0..n_in {
                    let mut s = 0.0;
                    for o in 0..n_out {
                        s += weights[wo + o * n_in + i_in] * ws.delta[l][o];
                    }
                    // ReLU derivative from the stored pre-activation.
                    ws.delta[l - 1][i_in] = if ws.z[l - 1][i_in] > 0.0 { s } else { 0.0 };
                }
            }
        }
    }
    total * scale
}
