//! C ABI over `hsi_hqs`.
//!
//! Cubes and weight stores are opaque heap handles owned by the caller and
//! released with the matching `_free` function. Every fallible call returns an
//! [`HsiStatus`]; on failure a message is kept per thread and can be fetched
//! with [`hsi_last_error_message`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use hsi_hqs::cli::{make_denoiser, DenoiserKind};
use hsi_hqs::degradation::synthesize_case;
use hsi_hqs::estimator::{estimate, EstimatorConfig, EstimatorWeights};
use hsi_hqs::io::{read_cube, write_cube};
use hsi_hqs::metrics::{ergas, psnr, ssim};
use hsi_hqs::solver::{run, HyperParams, InitPolicy};
use hsi_hqs::weights::WeightStore;
use hsi_hqs::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HsiStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ShapeMismatch = 3,
    Degenerate = 4,
    MalformedFile = 5,
    Io = 6,
    NonFinite = 7,
    Divergence = 8,
    Config = 9,
    MissingWeight = 10,
    Assertion = 11,
    Panic = 12,
}

/// Denoiser used for the Z-update.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HsiDenoiser {
    Gaussian = 0,
    ProxQuadratic = 1,
    Ulnsa = 2,
    Identity = 3,
}

/// Opaque hyperspectral cube.
pub struct HsiCube(hsi_hqs::HsiCube);

/// Opaque weight store.
pub struct HsiWeights(WeightStore);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> HsiStatus {
    match e {
        Error::ShapeMismatch { .. } => HsiStatus::ShapeMismatch,
        Error::InvalidArgument { .. } => HsiStatus::InvalidArgument,
        Error::Degenerate(_) => HsiStatus::Degenerate,
        Error::Config(_) => HsiStatus::Config,
        Error::MalformedFile(_) => HsiStatus::MalformedFile,
        Error::NonFinite { .. } => HsiStatus::NonFinite,
        Error::Divergence { .. } => HsiStatus::Divergence,
        Error::MissingWeight(_) => HsiStatus::MissingWeight,
        Error::Assertion(_) => HsiStatus::Assertion,
        Error::Io(_) => HsiStatus::Io,
    }
}

enum Failure {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

type FfiResult<T> = Result<T, Failure>;

fn guard(body: impl FnOnce() -> FfiResult<()>) -> HsiStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            set_error(String::new());
            HsiStatus::Ok
        }
        Ok(Err(Failure::Null(name))) => {
            set_error(format!("null pointer argument `{name}`"));
            HsiStatus::NullPointer
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            HsiStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, name: &'static str) -> FfiResult<&'a T> {
    p.as_ref().ok_or(Failure::Null(name))
}

unsafe fn out_ptr<'a, T>(p: *mut T, name: &'static str) -> FfiResult<&'a mut T> {
    p.as_mut().ok_or(Failure::Null(name))
}

unsafe fn path_arg(p: *const c_char, name: &'static str) -> FfiResult<String> {
    if p.is_null() {
        return Err(Failure::Null(name));
    }
    CStr::from_ptr(p).to_str().map(str::to_owned).map_err(|_| {
        Failure::Lib(Error::InvalidArgument {
            name,
            reason: "path is not valid UTF-8".into(),
        })
    })
}

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

/// Copies the last error message of this thread into `buf` as a
/// NUL-terminated string, truncating if needed. Returns the full message
/// length excluding the terminator, so a caller can size a retry.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn hsi_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Creates a cube from `height * width * bands` band-sequential values, or
/// a zero cube when `data` is null.
///
/// # Safety
/// `data` must be null or point to `height * width * bands` floats; `out`
/// must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hsi_cube_new(
    height: usize,
    width: usize,
    bands: usize,
    data: *const f32,
    out: *mut *mut HsiCube,
) -> HsiStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let cube = if data.is_null() {
            hsi_hqs::HsiCube::zeros(height, width, bands)?
        } else {
            let n = height
                .checked_mul(width)
                .and_then(|v| v.checked_mul(bands))
                .ok_or(Error::InvalidArgument {
                    name: "dims",
                    reason: "element count overflows".into(),
                })?;
            hsi_hqs::HsiCube::from_vec(height, width, bands, std::slice::from_raw_parts(data, n).to_vec())?
        };
        *out = boxed(HsiCube(cube));
        Ok(())
    })
}

/// Reads a cube file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hsi_cube_read(path: *const c_char, out: *mut *mut HsiCube) -> HsiStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let cube = read_cube(path_arg(path, "path")?)?;
        *out = boxed(HsiCube(cube));
        Ok(())
    })
}

/// Writes a cube file.
///
/// # Safety
/// `cube` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn hsi_cube_write(cube: *const HsiCube, path: *const c_char) -> HsiStatus {
    guard(|| {
        write_cube(&deref(cube, "cube")?.0, path_arg(path, "path")?)?;
        Ok(())
    })
}

/// Releases a cube. Null is ignored.
///
/// # Safety
/// `cube` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hsi_cube_free(cube: *mut HsiCube) {
    if !cube.is_null() {
        drop(Box::from_raw(cube));
    }
}

/// Reports the cube dimensions.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn hsi_cube_dims(
    cube: *const HsiCube,
    height: *mut usize,
    width: *mut usize,
    bands: *mut usize,
) -> HsiStatus {
    guard(|| {
        let (h, w, p) = deref(cube, "cube")?.0.dims();
        *out_ptr(height, "height")? = h;
        *out_ptr(width, "width")? = w;
        *out_ptr(bands, "bands")? = p;
        Ok(())
    })
}

/// Copies the band-sequential values into `buf`, which must hold exactly
/// `height * width * bands` floats.
///
/// # Safety
/// `cube` must be a live handle and `buf` must point to `len` writable floats.
#[no_mangle]
pub unsafe extern "C" fn hsi_cube_copy_data(cube: *const HsiCube, buf: *mut f32, len: usize) -> HsiStatus {
    guard(|| {
        let data = deref(cube, "cube")?.0.data();
        if buf.is_null() {
            return Err(Failure::Null("buf"));
        }
        if len != data.len() {
            return Err(Error::InvalidArgument {
                name: "len",
                reason: format!("buffer holds {len} values, cube has {}", data.len()),
            }
            .into());
        }
        ptr::copy_nonoverlapping(data.as_ptr(), buf, len);
        Ok(())
    })
}

unsafe fn metric(
    reference: *const HsiCube,
    test: *const HsiCube,
    out: *mut f64,
    f: impl FnOnce(&hsi_hqs::HsiCube, &hsi_hqs::HsiCube) -> hsi_hqs::Result<f64>,
) -> HsiStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = f(&deref(reference, "reference")?.0, &deref(test, "test")?.0)?;
        Ok(())
    })
}

/// Mean per-band PSNR in dB; infinite for identical cubes.
///
/// # Safety
/// Handles must be live and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn hsi_psnr(
    reference: *const HsiCube,
    test: *const HsiCube,
    peak: f64,
    out: *mut f64,
) -> HsiStatus {
    metric(reference, test, out, |r, t| psnr(r, t, peak))
}

/// Mean per-band SSIM.
///
/// # Safety
/// Handles must be live and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn hsi_ssim(
    reference: *const HsiCube,
    test: *const HsiCube,
    peak: f64,
    out: *mut f64,
) -> HsiStatus {
    metric(reference, test, out, |r, t| ssim(r, t, peak))
}

/// ERGAS with the given resolution ratio.
///
/// # Safety
/// Handles must be live and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn hsi_ergas(
    reference: *const HsiCube,
    test: *const HsiCube,
    scale_ratio: f64,
    out: *mut f64,
) -> HsiStatus {
    metric(reference, test, out, |r, t| ergas(r, t, scale_ratio))
}

/// Applies one of the four predefined noise cases (1..=4).
///
/// # Safety
/// `clean` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn hsi_synthesize_case(
    clean: *const HsiCube,
    case_id: u8,
    seed: u64,
    out: *mut *mut HsiCube,
) -> HsiStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let (noisy, _) = synthesize_case(&deref(clean, "clean")?.0, case_id, seed)?;
        *out = boxed(HsiCube(noisy));
        Ok(())
    })
}

/// Reads a weight file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn hsi_weights_read(path: *const c_char, out: *mut *mut HsiWeights) -> HsiStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let store = WeightStore::read(path_arg(path, "path")?)?;
        *out = boxed(HsiWeights(store));
        Ok(())
    })
}

/// Releases a weight store. Null is ignored.
///
/// # Safety
/// `weights` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hsi_weights_free(weights: *mut HsiWeights) {
    if !weights.is_null() {
        drop(Box::from_raw(weights));
    }
}

unsafe fn param_list(p: *const f64, k: usize, name: &'static str) -> FfiResult<Vec<f64>> {
    Ok(std::slice::from_raw_parts(deref(p, name)?, k).to_vec())
}

/// Runs `iters` solver iterations on `observation`.
///
/// Parameters come from the four arrays of length `iters` when all are
/// non-null, or from the estimator when all are null. `weights` may be null;
/// missing estimator or network tensors are then generated from `seed`.
/// `denoiser` is an [`HsiDenoiser`] code. `final_energy` may be null.
///
/// # Safety
/// Handles must be live, each non-null array must hold `iters` values and
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hsi_denoise(
    observation: *const HsiCube,
    iters: usize,
    alpha: *const f64,
    beta: *const f64,
    gamma: *const f64,
    lambda: *const f64,
    denoiser: i32,
    weights: *const HsiWeights,
    seed: u64,
    out: *mut *mut HsiCube,
    final_energy: *mut f64,
) -> HsiStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let y = &deref(observation, "observation")?.0;
        if iters == 0 {
            return Err(Error::InvalidArgument {
                name: "iters",
                reason: "iteration count must be at least 1".into(),
            }
            .into());
        }
        let empty = WeightStore::new();
        let store = if weights.is_null() { &empty } else { &(*weights).0 };
        let lists = [alpha, beta, gamma, lambda];
        let params = if lists.iter().all(|p| p.is_null()) {
            let w = if store.contains("estimator.meta") {
                EstimatorWeights::load(store)?
            } else {
                EstimatorWeights::load(&EstimatorConfig::new(y.bands(), iters).init_weights(seed)?)?
            };
            estimate(y, iters, &w)?
        } else {
            HyperParams::new(
                param_list(alpha, iters, "alpha")?,
                param_list(beta, iters, "beta")?,
                param_list(gamma, iters, "gamma")?,
                param_list(lambda, iters, "lambda")?,
            )?
        };
        let kind = match denoiser {
            x if x == HsiDenoiser::Gaussian as i32 => DenoiserKind::Gaussian,
            x if x == HsiDenoiser::ProxQuadratic as i32 => DenoiserKind::ProxQuadratic,
            x if x == HsiDenoiser::Ulnsa as i32 => DenoiserKind::Ulnsa,
            x if x == HsiDenoiser::Identity as i32 => DenoiserKind::Identity,
            other => {
                return Err(Error::InvalidArgument {
                    name: "denoiser",
                    reason: format!("unknown denoiser code {other}"),
                }
                .into())
            }
        };
        let d = make_denoiser(kind, store, y, seed)?;
        let result = run(y, &params, d.as_ref(), InitPolicy::FromObservation)?;
        if let Some(e) = final_energy.as_mut() {
            *e = result.trace.last().map(|r| r.energy[3]).unwrap_or(f64::NAN);
        }
        *out = boxed(HsiCube(result.x_hat));
        Ok(())
    })
}
