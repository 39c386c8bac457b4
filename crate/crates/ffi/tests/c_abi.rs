use std::ffi::{c_char, CString};
use std::ptr;

use hsi_hqs::io::read_cube;
use hsi_hqs::phantom::block_phantom;
use hsi_hqs::solver::{run, GaussianSmoothingDenoiser, HyperParams, InitPolicy};
use hsi_hqs_ffi::*;

fn last_error() -> String {
    unsafe {
        let len = hsi_last_error_message(ptr::null_mut(), 0);
        let mut buf = vec![0 as c_char; len + 1];
        assert_eq!(hsi_last_error_message(buf.as_mut_ptr(), buf.len()), len);
        let bytes: Vec<u8> = buf[..len].iter().map(|&c| c as u8).collect();
        String::from_utf8(bytes).unwrap()
    }
}

fn cube_from(h: usize, w: usize, p: usize, f: impl Fn(usize) -> f32) -> *mut HsiCube {
    let data: Vec<f32> = (0..h * w * p).map(f).collect();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { hsi_cube_new(h, w, p, data.as_ptr(), &mut out) }, HsiStatus::Ok);
    out
}

fn contents(cube: *const HsiCube) -> ((usize, usize, usize), Vec<f32>) {
    let (mut h, mut w, mut p) = (0, 0, 0);
    unsafe {
        assert_eq!(hsi_cube_dims(cube, &mut h, &mut w, &mut p), HsiStatus::Ok);
        let mut buf = vec![0.0f32; h * w * p];
        assert_eq!(hsi_cube_copy_data(cube, buf.as_mut_ptr(), buf.len()), HsiStatus::Ok);
        ((h, w, p), buf)
    }
}

fn phantom(h: usize, w: usize, p: usize) -> *mut HsiCube {
    cube_from(h, w, p, |i| {
        let (c, r) = (i % w, (i / w) % h);
        0.2 + 0.6 * (((r / 4) + (c / 4)) % 2) as f32
    })
}

#[test]
fn cube_lifecycle_and_file_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("c.hsic").to_str().unwrap()).unwrap();
    let cube = cube_from(3, 4, 2, |i| i as f32 * 0.5);
    unsafe {
        assert_eq!(hsi_cube_write(cube, path.as_ptr()), HsiStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(hsi_cube_read(path.as_ptr(), &mut back), HsiStatus::Ok);
        assert_eq!(contents(back), contents(cube));
        let rust_side = read_cube(dir.path().join("c.hsic")).unwrap();
        assert_eq!(rust_side.get(2, 3, 1), 23.0 * 0.5);
        hsi_cube_free(back);
        hsi_cube_free(cube);
        hsi_cube_free(ptr::null_mut());

        let mut zeros = ptr::null_mut();
        assert_eq!(hsi_cube_new(2, 2, 1, ptr::null(), &mut zeros), HsiStatus::Ok);
        assert_eq!(contents(zeros).1, vec![0.0; 4]);
        hsi_cube_free(zeros);
    }
}

#[test]
fn errors_map_to_status_codes_with_messages() {
    unsafe {
        let mut out = ptr::null_mut();
        assert_eq!(hsi_cube_new(0, 2, 1, ptr::null(), &mut out), HsiStatus::InvalidArgument);
        assert!(out.is_null());
        assert!(!last_error().is_empty());

        let missing = CString::new("/nonexistent/dir/x.hsic").unwrap();
        assert_eq!(hsi_cube_read(missing.as_ptr(), &mut out), HsiStatus::Io);
        assert_eq!(hsi_cube_read(ptr::null(), &mut out), HsiStatus::NullPointer);
        assert!(last_error().contains("path"));

        let dir = tempfile::tempdir().unwrap();
        let junk = dir.path().join("junk.hsic");
        std::fs::write(&junk, b"HSIC").unwrap();
        let junk = CString::new(junk.to_str().unwrap()).unwrap();
        assert_eq!(hsi_cube_read(junk.as_ptr(), &mut out), HsiStatus::MalformedFile);
        assert!(last_error().contains("truncated"));

        let cube = cube_from(2, 2, 1, |_| 0.5);
        let mut small = [0.0f32; 3];
        assert_eq!(
            hsi_cube_copy_data(cube, small.as_mut_ptr(), 3),
            HsiStatus::InvalidArgument
        );
        let mut v = 0.0;
        assert_eq!(hsi_psnr(cube, cube, 1.0, &mut v), HsiStatus::Ok);
        assert!(last_error().is_empty());
        assert!(v.is_infinite());

        let mut truncated = [0 as c_char; 4];
        hsi_cube_copy_data(cube, small.as_mut_ptr(), 3);
        let full = hsi_last_error_message(truncated.as_mut_ptr(), truncated.len());
        assert!(full > 3);
        assert_eq!(truncated[3], 0);
        hsi_cube_free(cube);
    }
}

#[test]
fn metrics_match_library() {
    let a = phantom(16, 16, 3);
    let b = cube_from(16, 16, 3, |i| {
        0.2 + 0.6 * (((i % 16) / 4 + ((i / 16) % 16) / 4) % 2) as f32 + 0.05
    });
    let (ra, rb) = (
        hsi_hqs::HsiCube::from_vec(16, 16, 3, contents(a).1).unwrap(),
        hsi_hqs::HsiCube::from_vec(16, 16, 3, contents(b).1).unwrap(),
    );
    let report = hsi_hqs::MetricReport::compute(&ra, &rb, 1.0, 2.0).unwrap();
    let (mut p, mut s, mut e) = (0.0, 0.0, 0.0);
    unsafe {
        assert_eq!(hsi_psnr(a, b, 1.0, &mut p), HsiStatus::Ok);
        assert_eq!(hsi_ssim(a, b, 1.0, &mut s), HsiStatus::Ok);
        assert_eq!(hsi_ergas(a, b, 2.0, &mut e), HsiStatus::Ok);
        assert_eq!((p, s, e), (report.psnr, report.ssim, report.ergas));

        let other = cube_from(16, 16, 2, |_| 0.5);
        assert_eq!(hsi_psnr(a, other, 1.0, &mut p), HsiStatus::ShapeMismatch);
        assert_eq!(hsi_ssim(a, b, 1.0, ptr::null_mut()), HsiStatus::NullPointer);
        for c in [a, b, other] {
            hsi_cube_free(c);
        }
    }
}

#[test]
fn synthesis_and_manual_denoise() {
    let block = block_phantom(32, 32, 4).unwrap();
    let clean = cube_from(32, 32, 4, |i| block.data()[i]);
    unsafe {
        let mut noisy = ptr::null_mut();
        assert_eq!(hsi_synthesize_case(clean, 3, 7, &mut noisy), HsiStatus::Ok);
        let mut again = ptr::null_mut();
        assert_eq!(hsi_synthesize_case(clean, 3, 7, &mut again), HsiStatus::Ok);
        assert_eq!(contents(noisy), contents(again));
        assert_eq!(hsi_synthesize_case(clean, 9, 7, &mut again), HsiStatus::InvalidArgument);

        let k = 5;
        let (alpha, beta, gamma, lambda) = (vec![5.0; k], vec![25.0; k], vec![0.5; k], vec![0.2; k]);
        let mut den = ptr::null_mut();
        let mut energy = f64::NAN;
        let st = hsi_denoise(
            noisy,
            k,
            alpha.as_ptr(),
            beta.as_ptr(),
            gamma.as_ptr(),
            lambda.as_ptr(),
            HsiDenoiser::Gaussian as i32,
            ptr::null(),
            0,
            &mut den,
            &mut energy,
        );
        assert_eq!(st, HsiStatus::Ok, "{}", last_error());
        let (dims, noisy_data) = contents(noisy);
        let y = hsi_hqs::HsiCube::from_vec(dims.0, dims.1, dims.2, noisy_data).unwrap();
        let params = HyperParams::new(alpha.clone(), beta.clone(), gamma.clone(), lambda.clone()).unwrap();
        let direct = run(
            &y,
            &params,
            &GaussianSmoothingDenoiser::default(),
            InitPolicy::FromObservation,
        )
        .unwrap();
        assert_eq!(contents(den).1, direct.x_hat.data());
        assert_eq!(energy, direct.trace.last().unwrap().energy[3]);
        let (mut before, mut after) = (0.0, 0.0);
        hsi_psnr(clean, noisy, 1.0, &mut before);
        hsi_psnr(clean, den, 1.0, &mut after);
        assert!(after > before + 3.0, "{before} -> {after}");

        let partial = hsi_denoise(
            noisy,
            k,
            alpha.as_ptr(),
            ptr::null(),
            gamma.as_ptr(),
            lambda.as_ptr(),
            HsiDenoiser::Gaussian as i32,
            ptr::null(),
            0,
            &mut den,
            ptr::null_mut(),
        );
        assert_eq!(partial, HsiStatus::NullPointer);
        assert!(last_error().contains("beta"));
        let bad_kind = hsi_denoise(
            noisy,
            k,
            alpha.as_ptr(),
            beta.as_ptr(),
            gamma.as_ptr(),
            lambda.as_ptr(),
            42,
            ptr::null(),
            0,
            &mut den,
            ptr::null_mut(),
        );
        assert_eq!(bad_kind, HsiStatus::InvalidArgument);
        let no_iters = hsi_denoise(
            noisy,
            0,
            ptr::null(),
            ptr::null(),
            ptr::null(),
            ptr::null(),
            0,
            ptr::null(),
            0,
            &mut den,
            ptr::null_mut(),
        );
        assert_eq!(no_iters, HsiStatus::InvalidArgument);
        for c in [clean, noisy, again, den] {
            hsi_cube_free(c);
        }
    }
}

#[test]
fn estimated_denoise_with_weight_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("w.uwt");
    let cfg = hsi_hqs::estimator::EstimatorConfig::new(2, 3);
    cfg.init_weights(4).unwrap().write(&path).unwrap();
    let cpath = CString::new(path.to_str().unwrap()).unwrap();
    let y = phantom(16, 16, 2);
    unsafe {
        let mut w = ptr::null_mut();
        assert_eq!(hsi_weights_read(cpath.as_ptr(), &mut w), HsiStatus::Ok);
        let run = |weights: *const HsiWeights, seed: u64| {
            let mut out = ptr::null_mut();
            let st = hsi_denoise(
                y,
                3,
                ptr::null(),
                ptr::null(),
                ptr::null(),
                ptr::null(),
                HsiDenoiser::ProxQuadratic as i32,
                weights,
                seed,
                &mut out,
                ptr::null_mut(),
            );
            assert_eq!(st, HsiStatus::Ok, "{}", last_error());
            let c = contents(out);
            hsi_cube_free(out);
            c
        };
        assert_eq!(run(w, 0), run(ptr::null(), 4));
        hsi_weights_free(w);
        hsi_weights_free(ptr::null_mut());

        std::fs::write(&path, b"UWT1\x05").unwrap();
        let mut bad = ptr::null_mut();
        assert_eq!(hsi_weights_read(cpath.as_ptr(), &mut bad), HsiStatus::MalformedFile);
        hsi_cube_free(y);
    }
}

#[test]
fn header_is_generated_and_declares_entry_points() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/hsi_hqs.h")).unwrap();
    for name in [
        "hsi_last_error_message",
        "hsi_cube_new",
        "hsi_cube_read",
        "hsi_cube_write",
        "hsi_cube_free",
        "hsi_cube_dims",
        "hsi_cube_copy_data",
        "hsi_psnr",
        "hsi_ssim",
        "hsi_ergas",
        "hsi_synthesize_case",
        "hsi_weights_read",
        "hsi_weights_free",
        "hsi_denoise",
        "HSI_STATUS_OK",
        "HSI_DENOISER_ULNSA",
        "typedef struct HsiCube HsiCube",
    ] {
        assert!(header.contains(name), "{name}");
    }
}
