//! A feed-forward stack of conv (ReLU), pool and fully-connected layers over
//! one flat parameter vector.
//!
//! Parameters are laid out layer by layer, weights first (row-major, conv
//! filters as `[maps_out, maps_in, t, t]`) followed by biases. Gradients and
//! checkpoints use the same layout.

use super::arch::{ArchSpec, LayerDesc, Shape};
use super::train::TrainConfig;
use crate::dropout::{apply_mask, dropout_test_scale, dropout_train};
use crate::error::{Error, Result};
use crate::ops::conv::{backward_cols, forward_cols, im2col, ConvGeometry};
use crate::ops::dense::{accumulate, affine};
use crate::ops::{gaussian_init, softmax_cross_entropy};
use crate::pooling::{gather_selected, pool_backward, pool_test, pool_train, PoolSpec, Selection, TestPooling};
use crate::rng::RandomStream;
use crate::tensor::{Scalar, Tensor};

#[derive(Clone, Copy, Debug)]
enum Layer {
    Conv {
        geom: ConvGeometry,
        offset: usize,
        retain: Option<f64>,
    },
    Pool {
        spec: PoolSpec,
    },
    Full {
        n_in: usize,
        n_out: usize,
        offset: usize,
        retain: Option<f64>,
        relu: bool,
    },
}

impl Layer {
    fn param_len(&self) -> usize {
        match self {
            Layer::Conv { geom, .. } => geom.maps_out * geom.patch() + geom.maps_out,
            Layer::Pool { .. } => 0,
            Layer::Full { n_in, n_out, .. } => n_out * n_in + n_out,
        }
    }
}

/// How a forward pass treats randomness.
#[derive(Clone, Copy, Debug)]
pub enum Mode<'a> {
    /// Fresh dropout masks and train-time pooling drawn from the stream.
    Train(RandomStream),
    /// No sampling: dropout sites scale by their retain probability and
    /// pooling uses the given test-time rule.
    Test(TestPooling),
    /// Re-applies the masks and pooling selections of an earlier train pass.
    Replay(&'a Noise),
}

/// Frozen randomness of one train-mode pass.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Noise {
    masks: Vec<Option<Vec<bool>>>,
    selections: Vec<Option<Selection>>,
}

#[derive(Clone, Debug)]
enum Cache<T> {
    Conv {
        cols: Vec<T>,
        out: Vec<T>,
        mask: Option<Vec<bool>>,
    },
    Pool {
        selection: Option<Selection>,
    },
    Full {
        input: Vec<T>,
        out: Vec<T>,
        mask: Option<Vec<bool>>,
    },
}

/// Logits plus whatever backward needs.
#[derive(Clone, Debug)]
pub struct Trace<T> {
    pub logits: Tensor<T>,
    caches: Vec<Cache<T>>,
}

impl<T: Scalar> Trace<T> {
    /// Masks and selections recorded by this pass, for [`Mode::Replay`].
    pub fn noise(&self) -> Noise {
        let mut noise = Noise::default();
        for cache in &self.caches {
            match cache {
                Cache::Conv { mask, .. } | Cache::Full { mask, .. } => {
                    noise.masks.push(mask.clone());
                    noise.selections.push(None);
                }
                Cache::Pool { selection } => {
                    noise.masks.push(None);
                    noise.selections.push(selection.clone());
                }
            }
        }
        noise
    }

    pub fn predicted(&self) -> usize {
        argmax(self.logits.data())
    }
}

/// Index of the largest value; the first one wins ties.
pub(crate) fn argmax<T: Scalar>(v: &[T]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

#[derive(Clone, Debug)]
pub struct Network<T> {
    arch: ArchSpec,
    layers: Vec<Layer>,
    params: Vec<T>,
}

pub fn build_network<T: Scalar>(arch: &ArchSpec, cfg: &TrainConfig, stream: RandomStream) -> Result<Network<T>> {
    Network::build(arch, cfg, stream)
}

impl<T: Scalar> Network<T> {
    /// Weights `N(0, init_std²)` from `stream.fork(layer_index)`, biases 0.
    pub fn build(arch: &ArchSpec, cfg: &TrainConfig, stream: RandomStream) -> Result<Self> {
        cfg.validate_model()?;
        let mut net = Self::zeroed(arch, cfg)?;
        for (l, layer) in net.layers.clone().into_iter().enumerate() {
            let (offset, n_weights) = match layer {
                Layer::Conv { geom, offset, .. } => (offset, geom.maps_out * geom.patch()),
                Layer::Full { n_in, n_out, offset, .. } => (offset, n_out * n_in),
                Layer::Pool { .. } => continue,
            };
            let w: Tensor<T> = gaussian_init(stream.fork(l as u64), &[n_weights], cfg.init_std)?;
            net.params[offset..offset + n_weights].copy_from_slice(w.data());
        }
        Ok(net)
    }

    /// Same layout as [`Network::build`] with every parameter 0.
    pub fn zeroed(arch: &ArchSpec, cfg: &TrainConfig) -> Result<Self> {
        let d = &cfg.dropout;
        let shapes = arch.shapes();
        let mut layers = Vec::with_capacity(arch.layers.len());
        let mut offset = 0;
        let mut seen_full = false;
        for (l, desc) in arch.layers.iter().enumerate() {
            let layer = match (*desc, shapes[l]) {
                (LayerDesc::Conv { maps, side }, Shape::Maps { maps: maps_in, h, w }) => Layer::Conv {
                    geom: ConvGeometry {
                        maps_in,
                        h,
                        w,
                        maps_out: maps,
                        side,
                    },
                    offset,
                    retain: if l > 0 || d.conv_on_image { d.conv_input } else { None },
                },
                (LayerDesc::Pool { window, stride }, _) => Layer::Pool {
                    spec: PoolSpec::new(
                        window,
                        stride,
                        cfg.train_pooling,
                        cfg.test_pooling,
                        d.pool_input.unwrap_or(1.0),
                    )?,
                },
                (LayerDesc::Full { units }, input) => {
                    let retain = if seen_full { d.fc_input } else { d.fc_first_input };
                    seen_full = true;
                    Layer::Full {
                        n_in: input.len(),
                        n_out: units,
                        offset,
                        retain,
                        relu: l + 1 < arch.layers.len(),
                    }
                }
                (LayerDesc::Conv { .. }, Shape::Flat(_)) => unreachable!("validated by the parser"),
            };
            offset += layer.param_len();
            layers.push(layer);
        }
        Ok(Self {
            arch: arch.clone(),
            layers,
            params: vec![T::zero(); offset],
        })
    }

    pub fn arch(&self) -> &ArchSpec {
        &self.arch
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    pub fn set_params(&mut self, params: &[T]) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::shape("set_params", self.params.len(), params.len()));
        }
        self.params.copy_from_slice(params);
        Ok(())
    }

    /// Weight entries only (biases excluded), in layout order.
    pub fn weights(&self) -> Vec<T> {
        let mut out = Vec::new();
        for layer in &self.layers {
            match *layer {
                Layer::Conv { geom, offset, .. } => {
                    out.extend_from_slice(&self.params[offset..offset + geom.maps_out * geom.patch()])
                }
                Layer::Full { n_in, n_out, offset, .. } => {
                    out.extend_from_slice(&self.params[offset..offset + n_out * n_in])
                }
                Layer::Pool { .. } => {}
            }
        }
        out
    }

    /// Pooling specs in layer order.
    pub fn pool_specs(&self) -> Vec<PoolSpec> {
        self.layers
            .iter()
            .filter_map(|l| match l {
                Layer::Pool { spec } => Some(*spec),
                _ => None,
            })
            .collect()
    }

    pub fn forward(&self, input: &Tensor<T>, mode: Mode<'_>) -> Result<Trace<T>> {
        let want = self.arch.input_shape().dims();
        if input.shape() != want.as_slice() {
            return Err(Error::shape("network input", want, input.shape()));
        }
        if let Mode::Replay(noise) = mode {
            if noise.masks.len() != self.layers.len() {
                return Err(Error::invalid("replay noise was recorded on a different network"));
            }
        }
        let shapes = self.arch.shapes();
        let mut x = input.data().to_vec();
        let mut caches = Vec::with_capacity(self.layers.len());
        for (l, layer) in self.layers.iter().enumerate() {
            match *layer {
                Layer::Conv { geom, offset, retain } => {
                    let (x_in, mask) = self.drop_input(x, &shapes[l], retain, l, mode)?;
                    let cols = im2col(&x_in, &geom);
                    let nw = geom.maps_out * geom.patch();
                    let filters = &self.params[offset..offset + nw];
                    let biases = &self.params[offset + nw..offset + nw + geom.maps_out];
                    let mut out = forward_cols(&cols, filters, biases, &geom);
                    relu_in_place(&mut out);
                    x = out.clone();
                    caches.push(Cache::Conv { cols, out, mask });
                }
                Layer::Pool { spec } => {
                    let t = Tensor::new(&shapes[l].dims(), x)?;
                    let (out, selection) = match mode {
                        Mode::Train(stream) => {
                            let trace = pool_train(&t, &spec, stream.fork(l as u64))?;
                            (trace.output, Some(trace.selection))
                        }
                        Mode::Test(rule) => (pool_test(&t, &spec, rule)?, None),
                        Mode::Replay(noise) => {
                            let sel = noise.selections[l]
                                .as_ref()
                                .ok_or_else(|| Error::invalid(format!("replay noise has no selection for layer {l}")))?;
                            (gather_selected(&t, sel)?, Some(sel.clone()))
                        }
                    };
                    x = out.into_data();
                    caches.push(Cache::Pool { selection });
                }
                Layer::Full {
                    n_in,
                    n_out,
                    offset,
                    retain,
                    relu,
                } => {
                    let (input, mask) = self.drop_input(x, &shapes[l], retain, l, mode)?;
                    let weights = &self.params[offset..offset + n_out * n_in];
                    let biases = &self.params[offset + n_out * n_in..offset + n_out * n_in + n_out];
                    let mut out = affine(weights, biases, &input);
                    if relu {
                        relu_in_place(&mut out);
                    }
                    x = out.clone();
                    caches.push(Cache::Full { input, out, mask });
                }
            }
        }
        Ok(Trace {
            logits: Tensor::new(&[x.len()], x)?,
            caches,
        })
    }

    fn drop_input(
        &self,
        x: Vec<T>,
        shape: &Shape,
        retain: Option<f64>,
        layer: usize,
        mode: Mode<'_>,
    ) -> Result<(Vec<T>, Option<Vec<bool>>)> {
        let Some(p) = retain.filter(|&p| p < 1.0) else {
            return Ok((x, None));
        };
        let t = Tensor::new(&shape.dims(), x)?;
        match mode {
            Mode::Train(stream) => {
                let (y, mask) = dropout_train(&t, p, stream.fork(layer as u64))?;
                Ok((y.into_data(), Some(mask)))
            }
            Mode::Test(_) => Ok((dropout_test_scale(&t, p).into_data(), None)),
            Mode::Replay(noise) => {
                let mask = noise.masks[layer]
                    .as_ref()
                    .ok_or_else(|| Error::invalid(format!("replay noise has no dropout mask for layer {layer}")))?;
                Ok((apply_mask(&t, mask)?.into_data(), Some(mask.clone())))
            }
        }
    }

    /// Accumulates `d loss / d params` into `grads` given `d loss / d logits`.
    /// The trace must come from a train or replay pass.
    pub fn backward(&self, trace: &Trace<T>, grad_logits: &[T], grads: &mut [T]) -> Result<()> {
        if grads.len() != self.params.len() {
            return Err(Error::shape("gradient buffer", self.params.len(), grads.len()));
        }
        if grad_logits.len() != trace.logits.len() {
            return Err(Error::shape("logit gradient", trace.logits.len(), grad_logits.len()));
        }
        let shapes = self.arch.shapes();
        let mut g = grad_logits.to_vec();
        for (l, (layer, cache)) in self.layers.iter().zip(&trace.caches).enumerate().rev() {
            let need_input = l > 0;
            match (*layer, cache) {
                (Layer::Conv { geom, offset, .. }, Cache::Conv { cols, out, mask }) => {
                    relu_grad_in_place(&mut g, out);
                    let nw = geom.maps_out * geom.patch();
                    let (gw, rest) = grads[offset..offset + nw + geom.maps_out].split_at_mut(nw);
                    let filters = &self.params[offset..offset + nw];
                    if let Some(gi) = backward_cols(&g, cols, filters, &geom, gw, rest, need_input) {
                        g = gi;
                        mask_in_place(&mut g, mask.as_deref());
                    }
                }
                (Layer::Pool { .. }, Cache::Pool { selection }) => {
                    let sel = selection
                        .as_ref()
                        .ok_or_else(|| Error::invalid("backward needs a train or replay trace, got a test-mode trace"))?;
                    let grad_out = Tensor::new(&shapes[l + 1].dims(), g)?;
                    g = pool_backward(&grad_out, sel)?.into_data();
                }
                (
                    Layer::Full {
                        n_in,
                        n_out,
                        offset,
                        relu,
                        ..
                    },
                    Cache::Full { input, out, mask },
                ) => {
                    if relu {
                        relu_grad_in_place(&mut g, out);
                    }
                    let nw = n_out * n_in;
                    let (gw, gb) = grads[offset..offset + nw + n_out].split_at_mut(nw);
                    for (b, &d) in gb.iter_mut().zip(&g) {
                        *b = *b + d;
                    }
                    let weights = &self.params[offset..offset + nw];
                    if need_input {
                        let mut gi = vec![T::zero(); n_in];
                        accumulate(&g, input, weights, gw, Some(&mut gi));
                        mask_in_place(&mut gi, mask.as_deref());
                        g = gi;
                    } else {
                        accumulate(&g, input, weights, gw, None);
                    }
                }
                _ => unreachable!("cache kinds follow layer kinds"),
            }
        }
        Ok(())
    }

    /// Cross-entropy loss of one labeled example; adds its gradient into
    /// `grads`. Returns `(loss, predicted class)`.
    pub fn loss_and_grad(&self, image: &Tensor<T>, label: usize, mode: Mode<'_>, grads: &mut [T]) -> Result<(T, usize)> {
        if let Mode::Test(_) = mode {
            return Err(Error::invalid("gradients need a train or replay pass, not test pooling"));
        }
        let trace = self.forward(image, mode)?;
        let (loss, grad) = softmax_cross_entropy(&trace.logits, label)?;
        self.backward(&trace, grad.data(), grads)?;
        Ok((loss, trace.predicted()))
    }

    pub fn predict(&self, image: &Tensor<T>, rule: TestPooling) -> Result<usize> {
        Ok(self.forward(image, Mode::Test(rule))?.predicted())
    }

    /// Parameter-for-parameter conversion to another precision.
    pub fn cast<U: Scalar>(&self) -> Network<U> {
        Network {
            arch: self.arch.clone(),
            layers: self.layers.clone(),
            params: self.params.iter().map(|v| U::lit(v.as_f64())).collect(),
        }
    }
}

fn relu_in_place<T: Scalar>(v: &mut [T]) {
    for x in v {
        if !(*x > T::zero()) {
            *x = T::zero();
        }
    }
}

fn relu_grad_in_place<T: Scalar>(g: &mut [T], out: &[T]) {
    for (d, &o) in g.iter_mut().zip(out) {
        if !(o > T::zero()) {
            *d = T::zero();
        }
    }
}

fn mask_in_place<T: Scalar>(g: &mut [T], mask: Option<&[bool]>) {
    if let Some(mask) = mask {
        for (d, &keep) in g.iter_mut().zip(mask) {
            if !keep {
                *d = T::zero();
            }
        }
    }
}
