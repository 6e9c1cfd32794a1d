use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use seqrank_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(srk_last_error()) }
        .to_string_lossy()
        .into_owned()
}

#[test]
fn effective_rank_and_errors() {
    let mut r = SrkRank {
        value: 0.0,
        retained: 0,
    };
    let s = [1.0, 1.0, 4.0, 2.0];
    assert_eq!(
        unsafe { srk_effective_rank(s.as_ptr(), 4, &mut r) },
        SrkStatus::Ok
    );
    assert!((r.value - 3.363_586).abs() < 1e-6);
    assert_eq!(last_error(), "");

    let zeros = [0.0; 3];
    assert_eq!(
        unsafe { srk_effective_rank(zeros.as_ptr(), 3, &mut r) },
        SrkStatus::Degenerate
    );
    assert!(last_error().contains("zero"));
    assert_eq!(
        unsafe { srk_effective_rank(ptr::null(), 3, &mut r) },
        SrkStatus::NullArgument
    );
    assert_eq!(
        unsafe { srk_effective_rank(s.as_ptr(), 4, ptr::null_mut()) },
        SrkStatus::NullArgument
    );
}

#[test]
fn matrix_rank() {
    let m = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
    let mut r = SrkRank {
        value: 0.0,
        retained: 0,
    };
    assert_eq!(unsafe { srk_rankme(m.as_ptr(), 3, 3, &mut r) }, SrkStatus::Ok);
    assert!((r.value - 3.0).abs() < 1e-12);
    let bad = [f64::NAN];
    assert_eq!(
        unsafe { srk_rankme(bad.as_ptr(), 1, 1, &mut r) },
        SrkStatus::InvalidArgument
    );
}

#[test]
fn set_lifecycle_and_sampling() {
    let lengths = [2usize, 1, 3];
    let frames: Vec<f64> = (0..12).map(|v| v as f64 + 1.0).collect();
    let mut set = ptr::null_mut();
    unsafe {
        assert_eq!(
            srk_sequence_set_new(2, lengths.as_ptr(), 3, frames.as_ptr(), &mut set),
            SrkStatus::Ok
        );
        assert_eq!((srk_sequence_set_len(set), srk_sequence_set_dim(set)), (3, 2));

        let mut sub = ptr::null_mut();
        assert_eq!(srk_sequence_set_sample(set, 2, 42, &mut sub), SrkStatus::Ok);
        assert_eq!(srk_sequence_set_len(sub), 2);
        srk_sequence_set_free(sub);
        assert_eq!(
            srk_sequence_set_sample(set, 4, 42, &mut sub),
            SrkStatus::InvalidArgument
        );

        let mut r = SrkRank {
            value: 0.0,
            retained: 0,
        };
        assert_eq!(srk_rankme_t(set, SrkPooling::Mean as u32, &mut r), SrkStatus::Ok);
        assert!(r.value >= 1.0 && r.value <= 2.0);
        assert_eq!(srk_rankme_t(set, 7, &mut r), SrkStatus::InvalidArgument);

        let dir = tempfile::tempdir().unwrap();
        let path = CString::new(dir.path().join("s.rkmt").to_str().unwrap()).unwrap();
        assert_eq!(
            srk_write_container(set, path.as_ptr(), 3),
            SrkStatus::InvalidArgument
        );
        assert_eq!(srk_write_container(set, path.as_ptr(), 1), SrkStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(srk_read_container(path.as_ptr(), &mut back), SrkStatus::Ok);
        let (mut a, mut b) = (r, r);
        srk_rankme_t(set, SrkPooling::Sum as u32, &mut a);
        srk_rankme_t(back, SrkPooling::Sum as u32, &mut b);
        assert_eq!(a, b);
        srk_sequence_set_free(back);
        srk_sequence_set_free(set);
        srk_sequence_set_free(ptr::null_mut());
        assert_eq!(srk_sequence_set_len(ptr::null()), 0);
    }
}

#[test]
fn ragged_input_rejected() {
    let lengths = [1usize, 0];
    let frames = [1.0, 2.0];
    let mut set = ptr::null_mut();
    assert_eq!(
        unsafe { srk_sequence_set_new(2, lengths.as_ptr(), 2, frames.as_ptr(), &mut set) },
        SrkStatus::InvalidArgument
    );
    assert!(set.is_null());
}

#[test]
fn corrupt_container_is_format_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.rkmt");
    std::fs::write(&p, b"NOPE0000000000000000000000").unwrap();
    let c = CString::new(p.to_str().unwrap()).unwrap();
    let mut set = ptr::null_mut();
    assert_eq!(
        unsafe { srk_read_container(c.as_ptr(), &mut set) },
        SrkStatus::Format
    );
    assert!(last_error().contains("offset 0"));
}

#[test]
fn kendall() {
    let x = [1.0, 2.0, 3.0, 4.0];
    let y = [1.0, 3.0, 2.0, 4.0];
    let mut k = std::mem::MaybeUninit::<SrkKendall>::uninit();
    assert_eq!(
        unsafe { srk_kendall_tau(x.as_ptr(), y.as_ptr(), 4, k.as_mut_ptr()) },
        SrkStatus::Ok
    );
    let k = unsafe { k.assume_init() };
    assert_eq!((k.concordant, k.discordant, k.n), (5, 1, 4));
    assert!((k.tau - 4.0 / 6.0).abs() < 1e-15);

    let flat = [2.0; 4];
    let mut k = std::mem::MaybeUninit::<SrkKendall>::uninit();
    assert_eq!(
        unsafe { srk_kendall_tau(x.as_ptr(), flat.as_ptr(), 4, k.as_mut_ptr()) },
        SrkStatus::Ok
    );
    let k = unsafe { k.assume_init() };
    assert_eq!((k.has_tau, k.p_method), (0, SrkPMethod::Undefined));
    assert!(k.tau.is_nan());
}

/// Compiles `smoke.c` against the generated header and the static library.
#[test]
fn c_program_links_and_runs() {
    let Ok(cc) = which_cc() else {
        eprintln!("no C compiler found; skipping");
        return;
    };
    let crate_dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    // cargo builds every crate type of the library next to the test binary
    let deps_dir = std::env::current_exe().unwrap().parent().unwrap().to_path_buf();
    let lib = deps_dir.join("libseqrank_ffi.a");
    if !lib.exists() {
        eprintln!("{} not built; skipping", lib.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let status = Command::new(&cc)
        .arg(crate_dir.join("tests/smoke.c"))
        .arg("-I")
        .arg(crate_dir.join("include"))
        .arg("-Wall")
        .arg("-Werror")
        .arg("-o")
        .arg(&exe)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .status()
        .unwrap();
    assert!(status.success(), "C compile failed");
    let out = Command::new(&exe)
        .arg(dir.path().join("c.rkmt"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8_lossy(&out.stdout), "ok\n");
}

fn which_cc() -> Result<String, ()> {
    for cc in ["cc", "gcc", "clang"] {
        if Command::new(cc)
            .arg("--version")
            .output()
            .is_ok_and(|o| o.status.success())
        {
            return Ok(cc.to_string());
        }
    }
    Err(())
}
