//! C ABI over `pooldrop`.
//!
//! Every fallible function returns a [`PdStatus`]; on failure a message for
//! the calling thread is available from [`pd_last_error`]. Networks are
//! opaque handles created by `pd_network_new` / `pd_network_load` and
//! released with [`pd_network_free`]. Values cross the boundary as `double`.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::slice;

use pooldrop::counting::{base_b, log_count_ratio, log_model_count, CountFlavor, CountQuery};
use pooldrop::dropout::DropoutPlacement;
use pooldrop::network::{build_network, ArchSpec, Checkpoint, Mode, Network, TrainConfig};
use pooldrop::pooling::{prob_weighted_value, region_distribution_maxdrop, region_distribution_stochastic};
use pooldrop::pooling::{TestPooling, TrainPooling};
use pooldrop::{Error, RandomStream, Tensor};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ShapeMismatch = 3,
    NegativeActivation = 4,
    Arch = 5,
    Format = 6,
    Io = 7,
    Diverged = 8,
    BufferTooSmall = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PdTrainPooling {
    Max = 0,
    MaxDropout = 1,
    MaxDropoutMultinomial = 2,
    Stochastic = 3,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PdTestPooling {
    Max = 0,
    ScaledMax = 1,
    ProbWeighted = 2,
    StochasticWeighted = 3,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PdCountFlavor {
    MaxPoolDropout = 0,
    Stochastic = 1,
    ConvDropout = 2,
}

/// Network construction options. Retain probabilities set to NaN (or any
/// value <= 0) disable that dropout site.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct PdNetworkOptions {
    pub train_pooling: PdTrainPooling,
    pub conv_retain: f64,
    /// Non-zero to also drop image pixels feeding the first convolution.
    pub conv_on_image: u8,
    pub pool_retain: f64,
    pub fc_first_retain: f64,
    pub fc_retain: f64,
    pub init_std: f64,
    pub seed: u64,
}

/// Opaque network handle.
pub struct PdNetwork {
    net: Network<f64>,
    cfg: TrainConfig,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

struct Failure(PdStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::ShapeMismatch { .. } => PdStatus::ShapeMismatch,
            Error::InvalidArgument(_) => PdStatus::InvalidArgument,
            Error::NegativeActivation { .. } => PdStatus::NegativeActivation,
            Error::Arch(_) => PdStatus::Arch,
            Error::Format { .. } => PdStatus::Format,
            Error::Diverged { .. } => PdStatus::Diverged,
            Error::Io(_) => PdStatus::Io,
        };
        Failure(code, e.to_string())
    }
}

type FfiResult<T> = std::result::Result<T, Failure>;

fn null(what: &str) -> Failure {
    Failure(PdStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> FfiResult<()>) -> PdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            PdStatus::Ok
        }
        Ok(Err(Failure(code, msg))) => {
            set_last_error(&msg);
            code
        }
        Err(_) => {
            set_last_error("internal panic");
            PdStatus::Panic
        }
    }
}

unsafe fn input<'a>(ptr: *const f64, len: usize, what: &str) -> FfiResult<&'a [f64]> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(ptr, len))
}

unsafe fn output<'a>(ptr: *mut f64, len: usize, need: usize, what: &str) -> FfiResult<&'a mut [f64]> {
    if len < need {
        return Err(Failure(
            PdStatus::BufferTooSmall,
            format!("{what} holds {len} values, {need} needed"),
        ));
    }
    if need > 0 && ptr.is_null() {
        return Err(null(what));
    }
    Ok(if need == 0 { &mut [] } else { slice::from_raw_parts_mut(ptr, need) })
}

unsafe fn out_ref<'a, T>(ptr: *mut T, what: &str) -> FfiResult<&'a mut T> {
    ptr.as_mut().ok_or_else(|| null(what))
}

unsafe fn text<'a>(ptr: *const c_char, what: &str) -> FfiResult<&'a str> {
    if ptr.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| Failure(PdStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

fn site(p: f64) -> Option<f64> {
    (p > 0.0).then_some(p)
}

impl From<PdTrainPooling> for TrainPooling {
    fn from(p: PdTrainPooling) -> Self {
        match p {
            PdTrainPooling::Max => TrainPooling::Max,
            PdTrainPooling::MaxDropout => TrainPooling::MaxDropout,
            PdTrainPooling::MaxDropoutMultinomial => TrainPooling::MaxDropoutMultinomial,
            PdTrainPooling::Stochastic => TrainPooling::Stochastic,
        }
    }
}

impl From<PdTestPooling> for TestPooling {
    fn from(p: PdTestPooling) -> Self {
        match p {
            PdTestPooling::Max => TestPooling::Max,
            PdTestPooling::ScaledMax => TestPooling::ScaledMax,
            PdTestPooling::ProbWeighted => TestPooling::ProbWeighted,
            PdTestPooling::StochasticWeighted => TestPooling::StochasticWeighted,
        }
    }
}

impl From<PdCountFlavor> for CountFlavor {
    fn from(f: PdCountFlavor) -> Self {
        match f {
            PdCountFlavor::MaxPoolDropout => CountFlavor::MaxPoolDropout,
            PdCountFlavor::Stochastic => CountFlavor::Stochastic,
            PdCountFlavor::ConvDropout => CountFlavor::ConvDropout,
        }
    }
}

impl PdNetworkOptions {
    fn config(&self) -> TrainConfig {
        TrainConfig {
            train_pooling: self.train_pooling.into(),
            dropout: DropoutPlacement {
                conv_input: site(self.conv_retain),
                conv_on_image: self.conv_on_image != 0,
                pool_input: site(self.pool_retain),
                fc_first_input: site(self.fc_first_retain),
                fc_input: site(self.fc_retain),
            },
            init_std: self.init_std,
            seed: self.seed,
            ..TrainConfig::default()
        }
    }
}

/// Message of the last failed call on this thread, or "" after a success.
/// The pointer stays valid until the next call into this library from the
/// same thread.
#[no_mangle]
pub extern "C" fn pd_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Plain max pooling in training, no dropout, seed 1.
#[no_mangle]
pub extern "C" fn pd_network_options_default() -> PdNetworkOptions {
    let d = TrainConfig::default();
    PdNetworkOptions {
        train_pooling: PdTrainPooling::Max,
        conv_retain: f64::NAN,
        conv_on_image: 0,
        pool_retain: f64::NAN,
        fc_first_retain: f64::NAN,
        fc_retain: f64::NAN,
        init_std: d.init_std,
        seed: d.seed,
    }
}

/// Builds a randomly initialised network from an architecture string such
/// as "1x28x28-6C5-2P2-12C5-2P2-100N-10N".
#[no_mangle]
pub unsafe extern "C" fn pd_network_new(
    arch: *const c_char,
    options: *const PdNetworkOptions,
    out: *mut *mut PdNetwork,
) -> PdStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let arch = ArchSpec::parse(text(arch, "arch")?).map_err(Error::from)?;
        let opts = options.as_ref().ok_or_else(|| null("options"))?;
        let cfg = opts.config();
        cfg.dropout.validate()?;
        let net = build_network(&arch, &cfg, cfg.init_stream())?;
        *out = Box::into_raw(Box::new(PdNetwork { net, cfg }));
        Ok(())
    })
}

/// Loads a checkpoint written by the `pooldrop train --checkpoint` command.
/// `options` supplies the dropout placement used for test-time scaling; its
/// seed is ignored.
#[no_mangle]
pub unsafe extern "C" fn pd_network_load(
    path: *const c_char,
    options: *const PdNetworkOptions,
    out: *mut *mut PdNetwork,
) -> PdStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let ck = Checkpoint::load(text(path, "path")?)?;
        let opts = options.as_ref().ok_or_else(|| null("options"))?;
        let mut cfg = opts.config();
        cfg.seed = ck.seed;
        cfg.dropout.validate()?;
        let net = ck.network(&cfg)?;
        *out = Box::into_raw(Box::new(PdNetwork { net, cfg }));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn pd_network_save(net: *const PdNetwork, path: *const c_char, epoch: u64) -> PdStatus {
    guard(|| {
        let h = net.as_ref().ok_or_else(|| null("net"))?;
        Checkpoint::of(&h.net, h.cfg.seed, epoch).save(text(path, "path")?)?;
        Ok(())
    })
}

/// Releases a handle. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn pd_network_free(net: *mut PdNetwork) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// Number of input values (channels x height x width); 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn pd_network_input_len(net: *const PdNetwork) -> usize {
    net.as_ref().map_or(0, |h| h.net.arch().input_shape().len())
}

/// Number of output classes; 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn pd_network_class_count(net: *const PdNetwork) -> usize {
    net.as_ref().map_or(0, |h| h.net.arch().classes())
}

/// Number of trainable parameters; 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn pd_network_param_count(net: *const PdNetwork) -> usize {
    net.as_ref().map_or(0, |h| h.net.param_count())
}

/// Copies all parameters (per layer: weights, then biases) into `buf`.
#[no_mangle]
pub unsafe extern "C" fn pd_network_get_params(net: *const PdNetwork, buf: *mut f64, len: usize) -> PdStatus {
    guard(|| {
        let h = net.as_ref().ok_or_else(|| null("net"))?;
        output(buf, len, h.net.param_count(), "buf")?.copy_from_slice(h.net.params());
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn pd_network_set_params(net: *mut PdNetwork, buf: *const f64, len: usize) -> PdStatus {
    guard(|| {
        let h = net.as_mut().ok_or_else(|| null("net"))?;
        h.net.set_params(input(buf, len, "buf")?)?;
        Ok(())
    })
}

unsafe fn image(h: &PdNetwork, data: *const f64, len: usize) -> FfiResult<Tensor<f64>> {
    let dims = h.net.arch().input_shape().dims();
    Ok(Tensor::new(&dims, input(data, len, "input")?.to_vec())?)
}

/// Test-time forward pass; writes one logit per class.
#[no_mangle]
pub unsafe extern "C" fn pd_network_forward(
    net: *const PdNetwork,
    input: *const f64,
    input_len: usize,
    rule: PdTestPooling,
    logits: *mut f64,
    logits_len: usize,
) -> PdStatus {
    guard(|| {
        let h = net.as_ref().ok_or_else(|| null("net"))?;
        let x = image(h, input, input_len)?;
        let trace = h.net.forward(&x, Mode::Test(rule.into()))?;
        output(logits, logits_len, trace.logits.len(), "logits")?.copy_from_slice(trace.logits.data());
        Ok(())
    })
}

/// Train-mode forward pass with dropout and pooling noise drawn from
/// (`seed`, `counter`).
#[no_mangle]
pub unsafe extern "C" fn pd_network_forward_train(
    net: *const PdNetwork,
    input: *const f64,
    input_len: usize,
    seed: u64,
    counter: u64,
    logits: *mut f64,
    logits_len: usize,
) -> PdStatus {
    guard(|| {
        let h = net.as_ref().ok_or_else(|| null("net"))?;
        let x = image(h, input, input_len)?;
        let trace = h.net.forward(&x, Mode::Train(RandomStream::new(seed, counter)))?;
        output(logits, logits_len, trace.logits.len(), "logits")?.copy_from_slice(trace.logits.data());
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn pd_network_predict(
    net: *const PdNetwork,
    input: *const f64,
    input_len: usize,
    rule: PdTestPooling,
    class_out: *mut usize,
) -> PdStatus {
    guard(|| {
        let h = net.as_ref().ok_or_else(|| null("net"))?;
        let class_out = out_ref(class_out, "class_out")?;
        *class_out = h.net.predict(&image(h, input, input_len)?, rule.into())?;
        Ok(())
    })
}

/// Probabilistic weighted pooling of one region: the expected max over
/// dropout masks with retain probability `retain_p`.
#[no_mangle]
pub unsafe extern "C" fn pd_prob_weighted_value(
    acts: *const f64,
    len: usize,
    retain_p: f64,
    out: *mut f64,
) -> PdStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let acts = input(acts, len, "acts")?;
        // validates the region and the probability
        region_distribution_maxdrop(acts, retain_p)?;
        *out = prob_weighted_value(&mut acts.to_vec(), retain_p);
        Ok(())
    })
}

/// Selection probabilities of one region under max-pooling dropout.
/// `probs` receives `len + 1` values: the all-dropped mass first, then the
/// mass of each unit in region order.
#[no_mangle]
pub unsafe extern "C" fn pd_region_probs_maxdrop(
    acts: *const f64,
    len: usize,
    retain_p: f64,
    probs: *mut f64,
    probs_len: usize,
) -> PdStatus {
    guard(|| {
        let d = region_distribution_maxdrop(input(acts, len, "acts")?, retain_p)?;
        let out = output(probs, probs_len, len + 1, "probs")?;
        out[0] = d.probs[0];
        for (k, &src) in d.source.iter().enumerate() {
            out[src + 1] = d.probs[k + 1];
        }
        Ok(())
    })
}

/// Stochastic pooling probabilities `a_i / sum(a)` in region order
/// (`len` values) and the test-time value `sum(a^2) / sum(a)`.
#[no_mangle]
pub unsafe extern "C" fn pd_region_stochastic(
    acts: *const f64,
    len: usize,
    probs: *mut f64,
    probs_len: usize,
    expectation: *mut f64,
) -> PdStatus {
    guard(|| {
        let d = region_distribution_stochastic(input(acts, len, "acts")?)?;
        let out = output(probs, probs_len, len, "probs")?;
        for (k, &src) in d.source.iter().enumerate() {
            out[src] = d.probs[k + 1];
        }
        if let Some(e) = expectation.as_mut() {
            *e = d.expectation();
        }
        Ok(())
    })
}

/// Per-unit base `b(t)` of the model count.
#[no_mangle]
pub unsafe extern "C" fn pd_base_b(t: u64, flavor: PdCountFlavor, out: *mut f64) -> PdStatus {
    guard(|| {
        *out_ref(out, "out")? = base_b(t, flavor.into())?;
        Ok(())
    })
}

/// Natural log of the number of distinct sub-models.
#[no_mangle]
pub unsafe extern "C" fn pd_log_model_count(
    r: u64,
    s: u64,
    t: u64,
    flavor: PdCountFlavor,
    out: *mut f64,
) -> PdStatus {
    guard(|| {
        *out_ref(out, "out")? = log_model_count(&CountQuery::new(r, s, t, flavor.into()))?;
        Ok(())
    })
}

/// Natural log of (max-pooling dropout count) / (stochastic pooling count).
#[no_mangle]
pub unsafe extern "C" fn pd_log_count_ratio(r: u64, s: u64, t: u64, out: *mut f64) -> PdStatus {
    guard(|| {
        *out_ref(out, "out")? = log_count_ratio(
            &CountQuery::new(r, s, t, CountFlavor::MaxPoolDropout),
            &CountQuery::new(r, s, t, CountFlavor::Stochastic),
        )?;
        Ok(())
    })
}
