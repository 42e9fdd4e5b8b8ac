use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use morphage::iso::Label;
use morphage::mad::{self, ExtractorConfig, ExtractorId, TrainOptions};
use morphage::RasterImage;
use morphage_ffi::*;

fn last_error() -> String {
    let p = morphage_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn cstr(p: &Path) -> CString {
    CString::new(p.to_str().unwrap()).unwrap()
}

unsafe fn new_image(w: usize, h: usize, f: impl Fn(usize, usize) -> u8) -> *mut MorphageImage {
    let px: Vec<u8> = (0..w * h).map(|i| f(i % w, i / w)).collect();
    let mut img = ptr::null_mut();
    assert_eq!(morphage_image_new(w, h, 1, px.as_ptr(), px.len(), &mut img), MorphageStatus::Ok);
    img
}

#[test]
fn image_roundtrip_through_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = cstr(&dir.path().join("a.png"));
    unsafe {
        let img = new_image(5, 4, |x, y| (x * 40 + y) as u8);
        assert_eq!(morphage_image_save(img, path.as_ptr()), MorphageStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(morphage_image_load(path.as_ptr(), &mut back), MorphageStatus::Ok);
        let (mut w, mut h, mut c) = (0, 0, 0);
        assert_eq!(morphage_image_shape(back, &mut w, &mut h, &mut c), MorphageStatus::Ok);
        assert_eq!((w, h, c), (5, 4, 1));
        let (mut d1, mut n1, mut d2, mut n2) = (ptr::null(), 0, ptr::null(), 0);
        morphage_image_data(img, &mut d1, &mut n1);
        morphage_image_data(back, &mut d2, &mut n2);
        assert_eq!(std::slice::from_raw_parts(d1, n1), std::slice::from_raw_parts(d2, n2));
        morphage_image_free(img);
        morphage_image_free(back);
        morphage_image_free(ptr::null_mut());
    }
}

#[test]
fn errors_map_to_status_codes() {
    unsafe {
        let mut img = ptr::null_mut();
        let px = [0u8; 4];
        assert_eq!(morphage_image_new(3, 3, 1, px.as_ptr(), 4, &mut img), MorphageStatus::Contract);
        assert!(img.is_null());
        assert!(!last_error().is_empty());
        assert_eq!(morphage_image_new(2, 2, 1, ptr::null(), 4, &mut img), MorphageStatus::NullPointer);
        let missing = CString::new("/nonexistent/x.png").unwrap();
        let status = morphage_image_load(missing.as_ptr(), &mut img);
        assert!(matches!(status, MorphageStatus::Io | MorphageStatus::Image), "{status:?}");

        let s = [0.5];
        let mut tau = 0.0;
        assert_eq!(morphage_calibrate_threshold(s.as_ptr(), 1, 0.0, &mut tau), MorphageStatus::Contract);
        assert_eq!(morphage_calibrate_threshold(s.as_ptr(), 1, 1.0, &mut tau), MorphageStatus::Ok);
        assert_eq!(tau, 0.5);
        assert!(morphage_last_error_message().is_null());
    }
}

#[test]
fn morph_endpoints_return_inputs() {
    let lm: [f64; 6] = [3.0, 3.0, 12.0, 4.0, 7.0, 12.0];
    let lm2: [f64; 6] = [4.0, 3.0, 11.0, 5.0, 8.0, 11.0];
    unsafe {
        let a = new_image(16, 16, |x, y| (x * 16 + y) as u8);
        let b = new_image(16, 16, |x, y| (255 - x * 8 - y) as u8);
        for (alpha, want) in [(0.0, a), (1.0, b)] {
            let mut m = ptr::null_mut();
            assert_eq!(morphage_morph_pair(a, lm.as_ptr(), b, lm2.as_ptr(), 3, alpha, &mut m), MorphageStatus::Ok);
            let (mut d1, mut n1, mut d2, mut n2) = (ptr::null(), 0, ptr::null(), 0);
            morphage_image_data(m, &mut d1, &mut n1);
            morphage_image_data(want, &mut d2, &mut n2);
            assert_eq!(std::slice::from_raw_parts(d1, n1), std::slice::from_raw_parts(d2, n2));
            morphage_image_free(m);
        }
        let mut m = ptr::null_mut();
        assert_eq!(morphage_morph_pair(a, lm.as_ptr(), b, lm2.as_ptr(), 3, 1.5, &mut m), MorphageStatus::Contract);
        morphage_image_free(a);
        morphage_image_free(b);
    }
}

#[test]
fn vulnerability_rates_over_dense_layout() {
    // [morph][attempt][subject]: morph 0 fully mated on attempt 1 only,
    // morph 1 reaches each subject on a different attempt
    let scores = [0.9, 0.8, 0.1, 0.2, 0.9, 0.1, 0.1, 0.9];
    let (mut f, mut m) = (0.0, 0.0);
    unsafe {
        assert_eq!(morphage_fmmpmr(scores.as_ptr(), 2, 2, 2, 0.5, &mut f), MorphageStatus::Ok);
        assert_eq!(morphage_mmpmr(scores.as_ptr(), 2, 2, 2, 0.5, &mut m), MorphageStatus::Ok);
        assert_eq!(morphage_fmmpmr(scores.as_ptr(), 0, 2, 2, 0.5, &mut f), MorphageStatus::Contract);
    }
    assert_eq!(m, 100.0);
    assert_eq!(f, 25.0);
}

#[test]
fn iso_rates_match_hand_values() {
    let bona = [0.75, 0.25, 0.15, 0.1];
    let attack = [0.8, 0.7, 0.3, 0.2];
    let (mut eer, mut b_direct, mut b_dev) = (0.0, 0.0, 0.0);
    unsafe {
        morphage_equal_error_rate(bona.as_ptr(), 4, attack.as_ptr(), 4, &mut eer);
        morphage_bpcer_at_apcer(bona.as_ptr(), 4, attack.as_ptr(), 4, 25.0, f64::NAN, &mut b_direct);
        morphage_bpcer_at_apcer(bona.as_ptr(), 4, attack.as_ptr(), 4, 25.0, 0.8, &mut b_dev);
    }
    assert_eq!((eer, b_direct, b_dev), (25.0, 25.0, 0.0));
}

#[test]
fn detector_model_scores_like_the_library() {
    let dir = tempfile::tempdir().unwrap();
    let ext = ExtractorConfig::default_for(ExtractorId::Lbp).unwrap();
    let images: Vec<(RasterImage, Label)> = (0..12)
        .map(|i| {
            let attack = i % 2 == 0;
            let img = RasterImage::from_fn_gray(64, 64, |x, y| {
                if attack {
                    ((x + y + i) % 7 * 30) as u8
                } else {
                    ((x * y + i) % 251) as u8
                }
            })
            .unwrap();
            (img, if attack { Label::Attack } else { Label::BonaFide })
        })
        .collect();
    let feats: Vec<_> = images.iter().map(|(img, _)| ext.extract(img).unwrap()).collect();
    let labels: Vec<Label> = images.iter().map(|s| s.1).collect();
    let model = mad::train_svm(&ext, &feats, &labels, TrainOptions::default()).unwrap();
    let scored: Vec<(Label, f64)> = feats.iter().zip(&labels).map(|(f, l)| (*l, mad::mad_score(&model, f).unwrap())).collect();
    let model = mad::select_operating_thresholds(&model, &scored, &[10.0]).unwrap();
    let path = dir.path().join("model.txt");
    model.save(&path).unwrap();

    unsafe {
        let mut handle = ptr::null_mut();
        assert_eq!(morphage_mad_model_load(cstr(&path).as_ptr(), &mut handle), MorphageStatus::Ok);
        let (img, _) = &images[3];
        let c = new_image(64, 64, |x, y| img.get(x, y, 0));
        let mut s = 0.0;
        assert_eq!(morphage_mad_model_score_image(handle, c, &mut s), MorphageStatus::Ok);
        assert_eq!(s, scored[3].1);
        let mut t = 0.0;
        assert_eq!(morphage_mad_model_threshold(handle, 10.0, &mut t), MorphageStatus::Ok);
        assert_eq!(Some(t), model.threshold_for(10.0));
        assert_eq!(morphage_mad_model_threshold(handle, 5.0, &mut t), MorphageStatus::InvalidArgument);
        morphage_image_free(c);
        morphage_mad_model_free(handle);
    }
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/morphage.h")).unwrap();
    for name in [
        "morphage_last_error_message",
        "morphage_image_new",
        "morphage_image_load",
        "morphage_image_save",
        "morphage_image_free",
        "morphage_image_shape",
        "morphage_image_data",
        "morphage_morph_pair",
        "morphage_fmmpmr",
        "morphage_mmpmr",
        "morphage_calibrate_threshold",
        "morphage_error_rates",
        "morphage_equal_error_rate",
        "morphage_bpcer_at_apcer",
        "morphage_mad_model_load",
        "morphage_mad_model_free",
        "morphage_mad_model_score_image",
        "morphage_mad_model_threshold",
    ] {
        assert!(header.contains(&format!("{name}(")), "{name} missing from header");
    }
}

fn static_lib() -> Option<PathBuf> {
    let deps = std::env::current_exe().ok()?.parent()?.to_path_buf();
    [deps.join("libmorphage_ffi.a"), deps.parent()?.join("libmorphage_ffi.a")]
        .into_iter()
        .find(|p| p.exists())
}

#[test]
fn c_program_links_against_header_and_static_lib() {
    let Some(lib) = static_lib() else {
        eprintln!("static library not found; skipping");
        return;
    };
    if Command::new("cc").arg("--version").output().is_err() {
        eprintln!("no C compiler; skipping");
        return;
    }
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let out = Command::new("cc")
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(root.join("include"))
        .arg(root.join("tests/c/smoke.c"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = Command::new(&exe).output().unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert_eq!(String::from_utf8_lossy(&run.stdout).trim(), "ok");
}
