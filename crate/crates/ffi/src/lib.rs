//! C ABI over the morphage toolkit.
//!
//! Every function returns a [`MorphageStatus`]; results are written through
//! out-pointers. On failure a message is kept per thread and can be read
//! with [`morphage_last_error_message`]. Images and detector models are
//! opaque handles released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use morphage::iso::{self, DetectionScoreSet, OperatingMode};
use morphage::mad::{self, MadModel};
use morphage::morph::{self, LandmarkSet, Point};
use morphage::vuln::{self, ScoreEntry, VulnerabilityScoreTable};
use morphage::{Error, RasterImage};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MorphageStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    Integrity = 4,
    Contract = 5,
    Geometry = 6,
    Config = 7,
    Sizing = 8,
    Rank = 9,
    Training = 10,
    Protocol = 11,
    Image = 12,
    Io = 13,
    Panic = 14,
}

/// Opaque raster image (row-major, interleaved 8-bit channels).
pub struct MorphageImage(RasterImage);

/// Opaque trained morphing attack detector.
pub struct MorphageMadModel(MadModel);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(MorphageStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Parse { .. } => MorphageStatus::Parse,
            Error::Integrity(_) => MorphageStatus::Integrity,
            Error::Contract(_) => MorphageStatus::Contract,
            Error::Geometry(_) => MorphageStatus::Geometry,
            Error::Config(_) => MorphageStatus::Config,
            Error::Sizing(_) => MorphageStatus::Sizing,
            Error::Rank(_) => MorphageStatus::Rank,
            Error::Training(_) => MorphageStatus::Training,
            Error::Protocol(_) => MorphageStatus::Protocol,
            Error::Image { .. } => MorphageStatus::Image,
            Error::Io { .. } => MorphageStatus::Io,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(MorphageStatus::NullPointer, format!("`{what}` is null"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(MorphageStatus::InvalidArgument, msg.into())
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> MorphageStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            MorphageStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            MorphageStatus::Panic
        }
    }
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(null("path"));
    }
    let s = CStr::from_ptr(p).to_str().map_err(|_| invalid("path is not valid UTF-8"))?;
    Ok(PathBuf::from(s))
}

unsafe fn out<T>(p: *mut T, v: T) -> Result<(), Failure> {
    if p.is_null() {
        return Err(null("out"));
    }
    p.write(v);
    Ok(())
}

unsafe fn image_ref<'a>(p: *const MorphageImage) -> Result<&'a RasterImage, Failure> {
    p.as_ref().map(|i| &i.0).ok_or_else(|| null("image"))
}

unsafe fn landmarks(xy: *const f64, n_points: usize) -> Result<LandmarkSet, Failure> {
    let v = slice(xy, 2 * n_points, "landmarks")?;
    Ok(LandmarkSet::new(v.chunks(2).map(|c| Point::new(c[0], c[1])).collect()))
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn morphage_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Copies `len` samples (`width * height * channels`) into a new image.
///
/// # Safety
/// `samples` must point to `len` readable bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn morphage_image_new(
    width: usize,
    height: usize,
    channels: usize,
    samples: *const u8,
    len: usize,
    out_image: *mut *mut MorphageImage,
) -> MorphageStatus {
    guard(|| {
        let data = slice(samples, len, "samples")?.to_vec();
        let img = RasterImage::new(width, height, channels, data)?;
        out(out_image, Box::into_raw(Box::new(MorphageImage(img))))
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn morphage_image_load(path: *const c_char, out_image: *mut *mut MorphageImage) -> MorphageStatus {
    guard(|| {
        let img = RasterImage::load(&path_arg(path)?)?;
        out(out_image, Box::into_raw(Box::new(MorphageImage(img))))
    })
}

/// # Safety
/// `image` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn morphage_image_save(image: *const MorphageImage, path: *const c_char) -> MorphageStatus {
    guard(|| Ok(image_ref(image)?.save(&path_arg(path)?)?))
}

/// # Safety
/// `image` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn morphage_image_free(image: *mut MorphageImage) {
    if !image.is_null() {
        drop(Box::from_raw(image));
    }
}

/// Writes width, height and channel count; any out-pointer may be null.
///
/// # Safety
/// `image` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn morphage_image_shape(
    image: *const MorphageImage,
    width: *mut usize,
    height: *mut usize,
    channels: *mut usize,
) -> MorphageStatus {
    guard(|| {
        let img = image_ref(image)?;
        for (p, v) in [(width, img.width()), (height, img.height()), (channels, img.channels())] {
            if !p.is_null() {
                p.write(v);
            }
        }
        Ok(())
    })
}

/// Borrowed view of the samples, valid while the handle lives.
///
/// # Safety
/// `image` must be a live handle; `data` and `len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn morphage_image_data(
    image: *const MorphageImage,
    data: *mut *const u8,
    len: *mut usize,
) -> MorphageStatus {
    guard(|| {
        let s = image_ref(image)?.samples();
        out(data, s.as_ptr())?;
        out(len, s.len())
    })
}

/// Morphs two equally shaped images. Landmarks are `n_points` interleaved
/// `x, y` pairs; `alpha` is the weight of image b.
///
/// # Safety
/// Handles must be live; each landmark array must hold `2 * n_points` values.
#[no_mangle]
pub unsafe extern "C" fn morphage_morph_pair(
    image_a: *const MorphageImage,
    landmarks_a: *const f64,
    image_b: *const MorphageImage,
    landmarks_b: *const f64,
    n_points: usize,
    alpha: f64,
    out_image: *mut *mut MorphageImage,
) -> MorphageStatus {
    guard(|| {
        let (a, b) = (image_ref(image_a)?, image_ref(image_b)?);
        let (la, lb) = (landmarks(landmarks_a, n_points)?, landmarks(landmarks_b, n_points)?);
        let img = morph::morph_pair(a, &la, b, &lb, alpha)?;
        out(out_image, Box::into_raw(Box::new(MorphageImage(img))))
    })
}

unsafe fn dense_table(scores: *const f64, n_morphs: usize, n_attempts: usize, k: usize) -> Result<VulnerabilityScoreTable, Failure> {
    let len = n_morphs
        .checked_mul(n_attempts)
        .and_then(|v| v.checked_mul(k))
        .ok_or_else(|| invalid("table dimensions overflow"))?;
    let v = slice(scores, len, "scores")?;
    let mut entries = Vec::with_capacity(len);
    for m in 0..n_morphs {
        for p in 0..n_attempts {
            for s in 0..k {
                entries.push(ScoreEntry {
                    morph_id: m.to_string(),
                    attempt: p as u32 + 1,
                    subject: s as u32 + 1,
                    score: v[(m * n_attempts + p) * k + s],
                });
            }
        }
    }
    Ok(VulnerabilityScoreTable::new(entries, k)?)
}

/// FMMPMR in percent over a dense `[morph][attempt][subject]` score array.
///
/// # Safety
/// `scores` must hold `n_morphs * n_attempts * k` values; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn morphage_fmmpmr(
    scores: *const f64,
    n_morphs: usize,
    n_attempts: usize,
    k: usize,
    tau: f64,
    out_percent: *mut f64,
) -> MorphageStatus {
    guard(|| out(out_percent, vuln::compute_fmmpmr(&dense_table(scores, n_morphs, n_attempts, k)?, tau)?))
}

/// MMPMR in percent over the same layout as [`morphage_fmmpmr`].
///
/// # Safety
/// As for [`morphage_fmmpmr`].
#[no_mangle]
pub unsafe extern "C" fn morphage_mmpmr(
    scores: *const f64,
    n_morphs: usize,
    n_attempts: usize,
    k: usize,
    tau: f64,
    out_percent: *mut f64,
) -> MorphageStatus {
    guard(|| out(out_percent, vuln::compute_mmpmr(&dense_table(scores, n_morphs, n_attempts, k)?, tau)?))
}

/// Verification threshold at `far_target` (a fraction) from impostor scores.
///
/// # Safety
/// `scores` must hold `n` values; `out_tau` writable.
#[no_mangle]
pub unsafe extern "C" fn morphage_calibrate_threshold(
    scores: *const f64,
    n: usize,
    far_target: f64,
    out_tau: *mut f64,
) -> MorphageStatus {
    guard(|| out(out_tau, vuln::calibrate_threshold(slice(scores, n, "scores")?, far_target)?.tau))
}

unsafe fn score_set(bona: *const f64, n_bona: usize, attack: *const f64, n_attack: usize) -> Result<DetectionScoreSet, Failure> {
    let b = slice(bona, n_bona, "bona_fide")?.to_vec();
    let a = slice(attack, n_attack, "attack")?.to_vec();
    Ok(DetectionScoreSet::new(b, a)?)
}

/// APCER and BPCER in percent at `threshold`; scores at or above it are
/// classified as attacks.
///
/// # Safety
/// Arrays must hold the stated counts; out-pointers writable.
#[no_mangle]
pub unsafe extern "C" fn morphage_error_rates(
    bona_fide: *const f64,
    n_bona_fide: usize,
    attack: *const f64,
    n_attack: usize,
    threshold: f64,
    out_apcer: *mut f64,
    out_bpcer: *mut f64,
) -> MorphageStatus {
    guard(|| {
        let r = iso::error_rates(&score_set(bona_fide, n_bona_fide, attack, n_attack)?, threshold);
        out(out_apcer, r.apcer)?;
        out(out_bpcer, r.bpcer)
    })
}

/// D-EER in percent.
///
/// # Safety
/// Arrays must hold the stated counts; `out_eer` writable.
#[no_mangle]
pub unsafe extern "C" fn morphage_equal_error_rate(
    bona_fide: *const f64,
    n_bona_fide: usize,
    attack: *const f64,
    n_attack: usize,
    out_eer: *mut f64,
) -> MorphageStatus {
    guard(|| out(out_eer, iso::equal_error_rate(&score_set(bona_fide, n_bona_fide, attack, n_attack)?)))
}

/// BPCER in percent at an APCER target in percent. A NaN `dev_threshold`
/// selects the threshold on these scores; otherwise it is used as given.
///
/// # Safety
/// Arrays must hold the stated counts; `out_bpcer` writable.
#[no_mangle]
pub unsafe extern "C" fn morphage_bpcer_at_apcer(
    bona_fide: *const f64,
    n_bona_fide: usize,
    attack: *const f64,
    n_attack: usize,
    apcer_target: f64,
    dev_threshold: f64,
    out_bpcer: *mut f64,
) -> MorphageStatus {
    guard(|| {
        let set = score_set(bona_fide, n_bona_fide, attack, n_attack)?;
        let v = if dev_threshold.is_nan() {
            iso::bpcer_at_apcer(&set, apcer_target, OperatingMode::Direct, None)?
        } else {
            iso::bpcer_at_apcer(&set, apcer_target, OperatingMode::DevCalibrated, Some(dev_threshold))?
        };
        out(out_bpcer, v)
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `out_model` writable.
#[no_mangle]
pub unsafe extern "C" fn morphage_mad_model_load(
    path: *const c_char,
    out_model: *mut *mut MorphageMadModel,
) -> MorphageStatus {
    guard(|| {
        let m = MadModel::load(&path_arg(path)?)?;
        out(out_model, Box::into_raw(Box::new(MorphageMadModel(m))))
    })
}

/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn morphage_mad_model_free(model: *mut MorphageMadModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Attack score of one image; higher means more likely a morph.
///
/// # Safety
/// Handles must be live; `out_score` writable.
#[no_mangle]
pub unsafe extern "C" fn morphage_mad_model_score_image(
    model: *const MorphageMadModel,
    image: *const MorphageImage,
    out_score: *mut f64,
) -> MorphageStatus {
    guard(|| {
        let m = &model.as_ref().ok_or_else(|| null("model"))?.0;
        let feature = m.extractor.extract(image_ref(image)?)?;
        out(out_score, mad::mad_score(m, &feature)?)
    })
}

/// Development threshold stored for `apcer_target` (percent).
///
/// # Safety
/// `model` must be live; `out_threshold` writable.
#[no_mangle]
pub unsafe extern "C" fn morphage_mad_model_threshold(
    model: *const MorphageMadModel,
    apcer_target: f64,
    out_threshold: *mut f64,
) -> MorphageStatus {
    guard(|| {
        let m = &model.as_ref().ok_or_else(|| null("model"))?.0;
        let t = m
            .threshold_for(apcer_target)
            .ok_or_else(|| invalid(format!("model has no threshold for APCER {apcer_target}%")))?;
        out(out_threshold, t)
    })
}
