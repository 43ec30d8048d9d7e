//! C ABI over the `trajsample` library.
//!
//! Trajectories cross the boundary as flat `double` arrays laid out
//! `[x0, y0, x1, y1, ...]`, one trajectory after another. A mixture is an
//! opaque [`TsMixture`] handle created by [`ts_mixture_new`] and released by
//! [`ts_mixture_free`]. Every other function returns a [`TsStatus`]; on
//! failure [`ts_last_error_message`] describes the error for the calling
//! thread. Panics never unwind into the caller; they surface as
//! [`TsStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use trajsample::harness::{run_sampler, SamplerKind, SamplerSettings};
use trajsample::{
    build_mixture, min_ade_k, optimize, risk, CandidateSet, LossKind, LossSpec, ModelPrediction, OptimizerConfig,
    ProposalMixture, Trajectory, WeightedProposal,
};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TsStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// A size, code or count was out of range.
    InvalidArgument = 2,
    /// The numeric data were rejected (negative weights, non-finite
    /// coordinates, all-zero model weights and the like).
    InvalidData = 3,
    /// An internal panic was caught.
    Panic = 4,
}

pub const TS_LOSS_MIN_ADE: u32 = 0;
pub const TS_LOSS_MIN_FDE: u32 = 1;

pub const TS_SAMPLER_UNIFORM: u32 = 0;
pub const TS_SAMPLER_CATEGORICAL: u32 = 1;
pub const TS_SAMPLER_TOPK: u32 = 2;
pub const TS_SAMPLER_KMEANS: u32 = 3;
pub const TS_SAMPLER_NMS: u32 = 4;
pub const TS_SAMPLER_NMS_KMEANS: u32 = 5;
pub const TS_SAMPLER_OURS: u32 = 6;

/// Pooled, normalized proposals of an ensemble.
pub struct TsMixture {
    inner: ProposalMixture,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(TsStatus, String);

impl Failure {
    fn null(name: &str) -> Self {
        Failure(TsStatus::NullPointer, format!("`{name}` is null"))
    }

    fn argument(message: impl Into<String>) -> Self {
        Failure(TsStatus::InvalidArgument, message.into())
    }
}

impl From<trajsample::Error> for Failure {
    fn from(err: trajsample::Error) -> Self {
        use trajsample::Error as E;
        let status = match err {
            E::ZeroK
            | E::KExceedsSetSize { .. }
            | E::KExceedsProposals { .. }
            | E::KExceedsPositiveSupport { .. }
            | E::EmptyCandidateSet
            | E::ShapeMismatch { .. }
            | E::InvalidConfig { .. } => TsStatus::InvalidArgument,
            _ => TsStatus::InvalidData,
        };
        Failure(status, err.to_string())
    }
}

fn set_last_error(message: &str) {
    let text = CString::new(message.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(text));
}

/// Runs `body`, records any failure, and turns it into a status.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> TsStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
            TsStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_last_error(&message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(&format!("panic: {message}"));
            TsStatus::Panic
        }
    }
}

/// Borrows `len` elements; a null pointer is only accepted when `len` is 0.
unsafe fn view<'a, T>(data: *const T, len: usize, name: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if data.is_null() {
        return Err(Failure::null(name));
    }
    Ok(slice::from_raw_parts(data, len))
}

unsafe fn view_mut<'a, T>(data: *mut T, len: usize, name: &str) -> Result<&'a mut [T], Failure> {
    if data.is_null() {
        return Err(Failure::null(name));
    }
    Ok(slice::from_raw_parts_mut(data, len))
}

unsafe fn mixture_ref<'a>(mixture: *const TsMixture) -> Result<&'a ProposalMixture, Failure> {
    mixture.as_ref().map(|m| &m.inner).ok_or_else(|| Failure::null("mixture"))
}

fn loss_spec(loss: u32, k: usize) -> Result<LossSpec, Failure> {
    let kind = match loss {
        TS_LOSS_MIN_ADE => LossKind::MinAde,
        TS_LOSS_MIN_FDE => LossKind::MinFde,
        other => return Err(Failure::argument(format!("unknown loss code {other}"))),
    };
    Ok(LossSpec { kind, k })
}

fn sampler_kind(code: u32) -> Result<SamplerKind, Failure> {
    Ok(match code {
        TS_SAMPLER_UNIFORM => SamplerKind::Uniform,
        TS_SAMPLER_CATEGORICAL => SamplerKind::Categorical,
        TS_SAMPLER_TOPK => SamplerKind::Topk,
        TS_SAMPLER_KMEANS => SamplerKind::Kmeans,
        TS_SAMPLER_NMS => SamplerKind::Nms,
        TS_SAMPLER_NMS_KMEANS => SamplerKind::NmsKmeans,
        TS_SAMPLER_OURS => SamplerKind::Ours,
        other => return Err(Failure::argument(format!("unknown sampler code {other}"))),
    })
}

fn flat_len(count: usize, horizon: usize) -> Result<usize, Failure> {
    count
        .checked_mul(horizon)
        .and_then(|n| n.checked_mul(2))
        .ok_or_else(|| Failure::argument("array size overflows"))
}

fn write_set(set: &CandidateSet, out: &mut [f64]) {
    out.copy_from_slice(&set.to_flat());
}

/// Message of the last failed call on this thread, or null after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn ts_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Builds a mixture from `num_models` models. Model `m` owns the next
/// `model_sizes[m]` entries of `weights` and trajectories of `coords`
/// (`horizon` points each). Weights are normalized per model.
///
/// # Safety
/// Every pointer must be valid for the lengths implied by the sizes, and
/// `out` must be writable. The handle written to `*out` must be released with
/// [`ts_mixture_free`].
#[no_mangle]
pub unsafe extern "C" fn ts_mixture_new(
    model_sizes: *const usize,
    num_models: usize,
    weights: *const f64,
    coords: *const f64,
    horizon: usize,
    out: *mut *mut TsMixture,
) -> TsStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::null("out"));
        }
        *out = ptr::null_mut();
        if num_models == 0 {
            return Err(Failure::argument("num_models must be at least 1"));
        }
        if horizon == 0 {
            return Err(Failure::argument("horizon must be at least 1"));
        }
        let sizes = view(model_sizes, num_models, "model_sizes")?;
        let total = sizes
            .iter()
            .try_fold(0usize, |acc, &n| acc.checked_add(n))
            .ok_or_else(|| Failure::argument("model sizes overflow"))?;
        let weights = view(weights, total, "weights")?;
        let coords = view(coords, flat_len(total, horizon)?, "coords")?;
        let stride = horizon * 2;
        let mut next = 0;
        let mut models = Vec::with_capacity(num_models);
        for (m, &n) in sizes.iter().enumerate() {
            let proposals = (next..next + n)
                .map(|i| {
                    let trajectory = Trajectory::from_flat(&coords[i * stride..(i + 1) * stride])?;
                    WeightedProposal::new(weights[i], trajectory)
                })
                .collect::<trajsample::Result<Vec<_>>>()?;
            next += n;
            models.push(ModelPrediction::new(format!("model-{m}"), proposals)?);
        }
        let handle = Box::new(TsMixture {
            inner: build_mixture(models)?,
        });
        *out = Box::into_raw(handle);
        Ok(())
    })
}

/// Releases a handle from [`ts_mixture_new`]. Null is ignored.
///
/// # Safety
/// `mixture` must be null or a live handle; it must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ts_mixture_free(mixture: *mut TsMixture) {
    if !mixture.is_null() {
        drop(Box::from_raw(mixture));
    }
}

/// Number of pooled proposals and their horizon.
///
/// # Safety
/// `mixture` must be a live handle; `len` and `horizon` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ts_mixture_shape(mixture: *const TsMixture, len: *mut usize, horizon: *mut usize) -> TsStatus {
    guard(|| {
        let mix = mixture_ref(mixture)?;
        let len = len.as_mut().ok_or_else(|| Failure::null("len"))?;
        let horizon = horizon.as_mut().ok_or_else(|| Failure::null("horizon"))?;
        *len = mix.len();
        *horizon = mix.horizon();
        Ok(())
    })
}

/// Effective weight of every pooled proposal (model weight over model count).
///
/// # Safety
/// `mixture` must be a live handle and `out` writable for `len` values.
#[no_mangle]
pub unsafe extern "C" fn ts_mixture_weights(mixture: *const TsMixture, out: *mut f64, len: usize) -> TsStatus {
    guard(|| {
        let mix = mixture_ref(mixture)?;
        if len != mix.len() {
            return Err(Failure::argument(format!("expected {} weights, got room for {len}", mix.len())));
        }
        view_mut(out, len, "out")?.copy_from_slice(mix.effective_weights());
        Ok(())
    })
}

/// Expected minADE_k (or minFDE_k) of `count` candidates under the mixture.
///
/// # Safety
/// `candidates` must hold `count * horizon * 2` values and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn ts_risk(
    mixture: *const TsMixture,
    candidates: *const f64,
    count: usize,
    loss: u32,
    k: usize,
    out: *mut f64,
) -> TsStatus {
    guard(|| {
        let mix = mixture_ref(mixture)?;
        let out = out.as_mut().ok_or_else(|| Failure::null("out"))?;
        let target = loss_spec(loss, k)?;
        let coords = view(candidates, flat_len(count, mix.horizon())?, "candidates")?;
        let set = CandidateSet::from_flat(coords, count, mix.horizon())?;
        *out = risk(mix, &set, target)?;
        Ok(())
    })
}

/// Optimizes `count` candidates with the default settings and `seed`, writes
/// them ranked into `out_candidates` and their risk into `out_risk`.
///
/// # Safety
/// `out_candidates` must be writable for `count * horizon * 2` values;
/// `out_risk` may be null.
#[no_mangle]
pub unsafe extern "C" fn ts_optimize(
    mixture: *const TsMixture,
    count: usize,
    loss: u32,
    k: usize,
    seed: u64,
    out_candidates: *mut f64,
    out_risk: *mut f64,
) -> TsStatus {
    guard(|| {
        let mix = mixture_ref(mixture)?;
        let target = loss_spec(loss, k)?;
        let out = view_mut(out_candidates, flat_len(count, mix.horizon())?, "out_candidates")?;
        let config = OptimizerConfig {
            seed,
            ..OptimizerConfig::default()
        };
        let (set, trace) = optimize(mix, count, target, &config)?;
        write_set(&set, out);
        if let Some(r) = out_risk.as_mut() {
            *r = trace.final_risk;
        }
        Ok(())
    })
}

/// Runs one sampler (a `TS_SAMPLER_*` code) with default settings. The
/// optimizing sampler minimizes minADE over all `count` candidates.
///
/// # Safety
/// `out_candidates` must be writable for `count * horizon * 2` values.
#[no_mangle]
pub unsafe extern "C" fn ts_sample(
    mixture: *const TsMixture,
    sampler: u32,
    count: usize,
    seed: u64,
    out_candidates: *mut f64,
) -> TsStatus {
    guard(|| {
        let mix = mixture_ref(mixture)?;
        let kind = sampler_kind(sampler)?;
        if count == 0 {
            return Err(Failure::argument("count must be at least 1"));
        }
        let out = view_mut(out_candidates, flat_len(count, mix.horizon())?, "out_candidates")?;
        let set = run_sampler(kind, &SamplerSettings::default(), mix, count, seed)?;
        write_set(&set, out);
        Ok(())
    })
}

/// Smallest ADE between `reference` and the first `k` of `count` candidates.
///
/// # Safety
/// `reference` must hold `horizon * 2` values, `candidates`
/// `count * horizon * 2`, and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ts_min_ade_k(
    reference: *const f64,
    candidates: *const f64,
    count: usize,
    horizon: usize,
    k: usize,
    out: *mut f64,
) -> TsStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| Failure::null("out"))?;
        if horizon == 0 {
            return Err(Failure::argument("horizon must be at least 1"));
        }
        let reference = Trajectory::from_flat(view(reference, horizon * 2, "reference")?)?;
        let coords = view(candidates, flat_len(count, horizon)?, "candidates")?;
        let set = CandidateSet::from_flat(coords, count, horizon)?;
        *out = min_ade_k(&reference, &set, k)?;
        Ok(())
    })
}
