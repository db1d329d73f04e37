//! Pooling over `[maps, h, w]` tensors.

use rand::Rng;

use super::region::{region_distribution_maxdrop, region_distribution_stochastic, sample_pooled_activation};
use super::{PoolSpec, TestPooling, TrainPooling};
use crate::error::{Error, Result};
use crate::rng::RandomStream;
use crate::tensor::{Scalar, Tensor};

#[derive(Clone, Copy, Debug)]
struct Geometry {
    maps: usize,
    h: usize,
    w: usize,
    window: usize,
    stride: usize,
    oh: usize,
    ow: usize,
}

impl Geometry {
    fn new<T: Scalar>(input: &Tensor<T>, spec: &PoolSpec) -> Result<Self> {
        input.expect_rank("pool", 3)?;
        let (maps, h, w) = (input.shape()[0], input.shape()[1], input.shape()[2]);
        let (Some(oh), Some(ow)) = (spec.out_side(h), spec.out_side(w)) else {
            return Err(Error::invalid(format!(
                "pool window {} larger than feature map {h}x{w}",
                spec.window
            )));
        };
        Ok(Self {
            maps,
            h,
            w,
            window: spec.window,
            stride: spec.stride,
            oh,
            ow,
        })
    }

    fn out_shape(&self) -> [usize; 3] {
        [self.maps, self.oh, self.ow]
    }

    /// Calls `f(output_index, region)` for every window; `region` holds flat
    /// input indices in row-major window order.
    fn for_each_region(&self, mut f: impl FnMut(usize, &[usize])) {
        let mut region = Vec::with_capacity(self.window * self.window);
        let mut out = 0;
        for m in 0..self.maps {
            for oy in 0..self.oh {
                for ox in 0..self.ow {
                    region.clear();
                    for ky in 0..self.window {
                        let row = (m * self.h + oy * self.stride + ky) * self.w + ox * self.stride;
                        region.extend(row..row + self.window);
                    }
                    f(out, &region);
                    out += 1;
                }
            }
        }
    }
}

/// Input unit chosen by each output element at training time; backward
/// routes gradient through these. `None` marks an all-dropped window.
#[derive(Clone, Debug, PartialEq)]
pub struct Selection {
    pub input_shape: [usize; 3],
    pub output_shape: [usize; 3],
    pub indices: Vec<Option<usize>>,
}

/// Everything a training-time pooling pass produces.
#[derive(Clone, Debug)]
pub struct PoolTrace<T> {
    pub output: Tensor<T>,
    pub selection: Selection,
    /// Layer-wide retain mask (mask path of max-pooling dropout only).
    pub mask: Option<Vec<bool>>,
}

fn finish<T: Scalar>(g: &Geometry, out: Vec<T>, indices: Vec<Option<usize>>) -> Result<(Tensor<T>, Selection)> {
    let output = Tensor::new(&g.out_shape(), out)?;
    Ok((
        output,
        Selection {
            input_shape: [g.maps, g.h, g.w],
            output_shape: g.out_shape(),
            indices,
        },
    ))
}

fn max_over<T: Scalar>(data: &[T], region: &[usize], keep: impl Fn(usize) -> bool) -> Option<(usize, T)> {
    let mut best: Option<(usize, T)> = None;
    for &i in region {
        if keep(i) && best.is_none_or(|(_, b)| data[i] > b) {
            best = Some((i, data[i]));
        }
    }
    best
}

fn masked_max<T: Scalar>(input: &Tensor<T>, g: &Geometry, keep: impl Fn(usize) -> bool) -> Result<(Tensor<T>, Selection)> {
    let n = g.maps * g.oh * g.ow;
    let mut out = vec![T::zero(); n];
    let mut indices = vec![None; n];
    let data = input.data();
    g.for_each_region(|j, region| {
        if let Some((i, v)) = max_over(data, region, &keep) {
            out[j] = v;
            indices[j] = Some(i);
        }
    });
    finish(g, out, indices)
}

/// Deterministic max pooling; ties go to the first unit in window order.
pub fn max_pool<T: Scalar>(input: &Tensor<T>, spec: &PoolSpec) -> Result<(Tensor<T>, Selection)> {
    let g = Geometry::new(input, spec)?;
    masked_max(input, &g, |_| true)
}

/// Max over units retained by a layer-wide `mask`.
pub fn max_pool_masked<T: Scalar>(input: &Tensor<T>, spec: &PoolSpec, mask: &[bool]) -> Result<(Tensor<T>, Selection)> {
    let g = Geometry::new(input, spec)?;
    if mask.len() != input.len() {
        return Err(Error::shape("max_pool_masked mask", input.len(), mask.len()));
    }
    masked_max(input, &g, |i| mask[i])
}

/// Max-pooling dropout, mask path: samples one Bernoulli(`retain_p`) mask
/// over the whole input (overlapping windows share dropped units) and pools
/// the retained units. All-dropped windows output 0.
pub fn max_pool_dropout_forward<T: Scalar>(
    input: &Tensor<T>,
    spec: &PoolSpec,
    stream: RandomStream,
) -> Result<(Tensor<T>, Selection, Vec<bool>)> {
    let mut rng = stream.rng();
    let mask: Vec<bool> = (0..input.len()).map(|_| rng.random_bool(spec.retain_p)).collect();
    let (out, sel) = max_pool_masked(input, spec, &mask)?;
    Ok((out, sel, mask))
}

fn sample_regions<T: Scalar>(
    input: &Tensor<T>,
    spec: &PoolSpec,
    stream: RandomStream,
    stochastic: bool,
) -> Result<(Tensor<T>, Selection)> {
    let g = Geometry::new(input, spec)?;
    let n = g.maps * g.oh * g.ow;
    let mut out = vec![T::zero(); n];
    let mut indices = vec![None; n];
    let mut rng = stream.rng();
    let retain = T::lit(spec.retain_p);
    let data = input.data();
    let mut acts = Vec::with_capacity(spec.region_size());
    let mut failure = None;
    g.for_each_region(|j, region| {
        if failure.is_some() {
            return;
        }
        acts.clear();
        acts.extend(region.iter().map(|&i| data[i]));
        let dist = if stochastic {
            region_distribution_stochastic(&acts)
        } else {
            region_distribution_maxdrop(&acts, retain)
        };
        match dist {
            Ok(dist) => {
                let s = sample_pooled_activation(&dist, &mut rng);
                out[j] = s.value;
                indices[j] = s.source.map(|k| region[k]);
            }
            Err(e) => failure = Some(e),
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    finish(&g, out, indices)
}

/// Max-pooling dropout, multinomial path: each window independently draws
/// its pooled unit from the max-dropout selection distribution.
pub fn max_pool_dropout_sampled<T: Scalar>(
    input: &Tensor<T>,
    spec: &PoolSpec,
    stream: RandomStream,
) -> Result<(Tensor<T>, Selection)> {
    sample_regions(input, spec, stream, false)
}

pub fn stochastic_pool_forward<T: Scalar>(
    input: &Tensor<T>,
    spec: &PoolSpec,
    stream: RandomStream,
) -> Result<(Tensor<T>, Selection)> {
    sample_regions(input, spec, stream, true)
}

fn reduce_regions<T: Scalar>(
    input: &Tensor<T>,
    spec: &PoolSpec,
    mut reduce: impl FnMut(&mut [T]) -> T,
) -> Result<Tensor<T>> {
    let g = Geometry::new(input, spec)?;
    let data = input.data();
    if let Some(index) = data.iter().position(|&v| !(v >= T::zero())) {
        return Err(Error::NegativeActivation {
            index,
            value: data[index].as_f64(),
        });
    }
    let mut out = vec![T::zero(); g.maps * g.oh * g.ow];
    let mut buf = Vec::with_capacity(spec.region_size());
    g.for_each_region(|j, region| {
        buf.clear();
        buf.extend(region.iter().map(|&i| data[i]));
        out[j] = reduce(&mut buf);
    });
    Tensor::new(&g.out_shape(), out)
}

/// Probabilistic weighted value of one region, `sum_i p q^(n-i) a_(i)` over
/// the ascending-sorted activations. Reorders `acts`.
pub fn prob_weighted_value<T: Scalar>(acts: &mut [T], retain_p: T) -> T {
    acts.sort_unstable_by(|a, b| b.partial_cmp(a).expect("finite activations"));
    let q = T::one() - retain_p;
    let mut weight = retain_p;
    let mut acc = T::zero();
    for &a in acts.iter() {
        acc = acc + weight * a;
        weight = weight * q;
    }
    acc
}

/// Test-time probabilistic weighted pooling: each window outputs its
/// [`prob_weighted_value`], the exact expectation of the max-pooling dropout
/// output.
pub fn prob_weighted_pool<T: Scalar>(input: &Tensor<T>, spec: &PoolSpec) -> Result<Tensor<T>> {
    let p = T::lit(spec.retain_p);
    reduce_regions(input, spec, |acts| prob_weighted_value(acts, p))
}

/// Test-time scaled max pooling: `retain_p * max`.
pub fn scaled_max_pool<T: Scalar>(input: &Tensor<T>, spec: &PoolSpec) -> Result<Tensor<T>> {
    let (out, _) = max_pool(input, spec)?;
    Ok(out.scale(T::lit(spec.retain_p)))
}

/// Test-time stochastic pooling: `sum_i a_i^2 / sum_i a_i` (0 for an all-zero window).
pub fn stochastic_pool_test<T: Scalar>(input: &Tensor<T>, spec: &PoolSpec) -> Result<Tensor<T>> {
    reduce_regions(input, spec, |acts| {
        let total: T = acts.iter().copied().sum();
        if total > T::zero() {
            acts.iter().map(|&a| a * (a / total)).sum()
        } else {
            T::zero()
        }
    })
}

/// Routes each output gradient to its selected input unit, accumulating over
/// overlapping windows.
pub fn pool_backward<T: Scalar>(grad_out: &Tensor<T>, selection: &Selection) -> Result<Tensor<T>> {
    if grad_out.shape() != selection.output_shape || selection.indices.len() != grad_out.len() {
        return Err(Error::shape("pool_backward", selection.output_shape, grad_out.shape()));
    }
    let mut grad = Tensor::zeros(&selection.input_shape);
    let g = grad.data_mut();
    for (&d, idx) in grad_out.data().iter().zip(&selection.indices) {
        if let Some(i) = *idx {
            g[i] = g[i] + d;
        }
    }
    Ok(grad)
}

/// Replays a recorded selection on (possibly perturbed) input.
pub fn gather_selected<T: Scalar>(input: &Tensor<T>, selection: &Selection) -> Result<Tensor<T>> {
    if input.shape() != selection.input_shape {
        return Err(Error::shape("gather_selected", selection.input_shape, input.shape()));
    }
    let data = input.data();
    let out = selection
        .indices
        .iter()
        .map(|idx| idx.map_or(T::zero(), |i| data[i]))
        .collect();
    Tensor::new(&selection.output_shape, out)
}

/// Training-time pooling as configured by `spec.train`.
pub fn pool_train<T: Scalar>(input: &Tensor<T>, spec: &PoolSpec, stream: RandomStream) -> Result<PoolTrace<T>> {
    let (output, selection, mask) = match spec.train {
        TrainPooling::Max => {
            let (o, s) = max_pool(input, spec)?;
            (o, s, None)
        }
        TrainPooling::MaxDropout => {
            let (o, s, m) = max_pool_dropout_forward(input, spec, stream)?;
            (o, s, Some(m))
        }
        TrainPooling::MaxDropoutMultinomial => {
            let (o, s) = max_pool_dropout_sampled(input, spec, stream)?;
            (o, s, None)
        }
        TrainPooling::Stochastic => {
            let (o, s) = stochastic_pool_forward(input, spec, stream)?;
            (o, s, None)
        }
    };
    Ok(PoolTrace {
        output,
        selection,
        mask,
    })
}

/// Sampling-free evaluation pooling.
pub fn pool_test<T: Scalar>(input: &Tensor<T>, spec: &PoolSpec, mode: TestPooling) -> Result<Tensor<T>> {
    match mode {
        TestPooling::Max => max_pool(input, spec).map(|(o, _)| o),
        TestPooling::ScaledMax => scaled_max_pool(input, spec),
        TestPooling::ProbWeighted => prob_weighted_pool(input, spec),
        TestPooling::StochasticWeighted => stochastic_pool_test(input, spec),
    }
}
