use std::ffi::{c_char, CString};
use std::path::Path;
use std::ptr;

use ggfa::io::ModelFile;
use ggfa::sample::sample;
use ggfa::{canonicalize, fit::log_likelihood, Model, ModelParams, Schema};
use ggfa_ffi::*;
use nalgebra::{DMatrix, DVector};

fn cpath(p: &Path) -> CString {
    CString::new(p.to_str().unwrap()).unwrap()
}

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 512];
    let n = unsafe { ggfa_last_error_message(buf.as_mut_ptr(), buf.len()) };
    assert!(n > 0);
    let bytes: Vec<u8> = buf.iter().take_while(|&&c| c != 0).map(|&c| c as u8).collect();
    String::from_utf8(bytes).unwrap()
}

fn params() -> ModelParams {
    let w = DMatrix::from_row_slice(2, 2, &[0.8, 0.6, 0.0, 1.0]);
    let g = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.6, -0.8]);
    ModelParams::new(
        DVector::from_vec(vec![0.5, -1.0]),
        DVector::from_vec(vec![0.7, 1.3]),
        DVector::from_vec(vec![-0.2, 0.4]),
        1.1,
        w,
        g,
    )
    .unwrap()
}

struct Fixture {
    _dir: tempfile::TempDir,
    model: std::path::PathBuf,
    data: std::path::PathBuf,
    schema: std::path::PathBuf,
}

fn fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let p = params();
    let schema = Schema::generated(2, 2).unwrap();
    let model = dir.path().join("m.json");
    ModelFile::new(&schema, &p, false, None).unwrap().save(&model).unwrap();
    let data = dir.path().join("d.csv");
    let schema_path = dir.path().join("s.csv");
    ggfa::io::save_csv(&sample(&p, 400, 9).unwrap(), &data).unwrap();
    ggfa::io::write_schema_file(&schema, &schema_path).unwrap();
    Fixture {
        _dir: dir,
        model,
        data,
        schema: schema_path,
    }
}

fn load_model(path: &Path) -> *mut GgfaModel {
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { ggfa_model_load(cpath(path).as_ptr(), &mut m) }, GgfaStatus::Ok);
    assert!(!m.is_null());
    m
}

#[test]
fn save_reproduces_file_bytes() {
    let fx = fixture();
    let m = load_model(&fx.model);
    let out = fx.model.with_file_name("again.json");
    assert_eq!(unsafe { ggfa_model_save(m, cpath(&out).as_ptr()) }, GgfaStatus::Ok);
    assert_eq!(std::fs::read(&fx.model).unwrap(), std::fs::read(&out).unwrap());
    let (mut p_x, mut q, mut p_z) = (0usize, 0usize, 0usize);
    assert_eq!(unsafe { ggfa_model_dims(m, &mut p_x, &mut q, &mut p_z) }, GgfaStatus::Ok);
    assert_eq!((p_x, q, p_z), (2, 2, 2));
    unsafe { ggfa_model_free(m) };
}

#[test]
fn row_functions_match_library() {
    let fx = fixture();
    let m = load_model(&fx.model);
    let lib = Model::new(params()).unwrap();
    let x = [0.3, -0.4];
    let y = [1u8, 0];
    let state = ggfa::BitState::from_u8(&y).unwrap();
    let xv = DVector::from_column_slice(&x);

    let mut lj = 0.0;
    assert_eq!(unsafe { ggfa_model_log_joint(m, x.as_ptr(), y.as_ptr(), &mut lj) }, GgfaStatus::Ok);
    assert_eq!(lj, lib.log_joint_observed(&xv, &state).unwrap());

    let mut mean = [0.0; 2];
    let mut cov = [0.0; 4];
    let status = unsafe { ggfa_model_posterior(m, x.as_ptr(), y.as_ptr(), mean.as_mut_ptr(), cov.as_mut_ptr()) };
    assert_eq!(status, GgfaStatus::Ok);
    let post = lib.posterior(&xv, &state).unwrap();
    assert_eq!(mean.as_slice(), post.m.as_slice());
    assert_eq!(cov[1], post.cov[(0, 1)]);
    assert_eq!(cov[3], post.cov[(1, 1)]);

    let mut table = [0.0; 4];
    assert_eq!(unsafe { ggfa_model_mixing_table(m, table.as_mut_ptr(), 4) }, GgfaStatus::Ok);
    let total: f64 = table.iter().map(|v| v.exp()).sum();
    assert!((total - 1.0).abs() < 1e-12);
    assert_eq!(
        unsafe { ggfa_model_mixing_table(m, table.as_mut_ptr(), 3) },
        GgfaStatus::InvalidArgument
    );
    unsafe { ggfa_model_free(m) };
}

#[test]
fn canonicalize_matches_library() {
    let fx = fixture();
    let m = load_model(&fx.model);
    let mut c = ptr::null_mut();
    let mut ratios = [0.0; 2];
    assert_eq!(unsafe { ggfa_model_canonicalize(m, &mut c, ratios.as_mut_ptr()) }, GgfaStatus::Ok);
    let expect = canonicalize(&params()).unwrap();
    assert_eq!(ratios.as_slice(), expect.p.as_slice());
    let out = fx.model.with_file_name("canon.json");
    assert_eq!(unsafe { ggfa_model_save(c, cpath(&out).as_ptr()) }, GgfaStatus::Ok);
    let file = ModelFile::load(&out).unwrap();
    assert!(file.canonical);
    assert_eq!(file.params().unwrap(), expect.params);
    unsafe {
        ggfa_model_free(c);
        ggfa_model_free(m);
    }
}

#[test]
fn dataset_likelihood_and_fit() {
    let fx = fixture();
    let m = load_model(&fx.model);
    let mut d = ptr::null_mut();
    let status = unsafe { ggfa_dataset_load_csv(cpath(&fx.data).as_ptr(), cpath(&fx.schema).as_ptr(), &mut d) };
    assert_eq!(status, GgfaStatus::Ok);
    let mut rows = 0usize;
    assert_eq!(unsafe { ggfa_dataset_rows(d, &mut rows) }, GgfaStatus::Ok);
    assert_eq!(rows, 400);

    let data = ggfa::io::load_csv(&fx.data, &fx.schema).unwrap();
    let mut ll = 0.0;
    assert_eq!(unsafe { ggfa_log_likelihood(m, d, &mut ll) }, GgfaStatus::Ok);
    assert_eq!(ll, log_likelihood(&data, &params()).unwrap());

    let mut fitted = ptr::null_mut();
    let mut fit_ll = 0.0;
    assert_eq!(unsafe { ggfa_fit(d, 2, 4, 7, &mut fitted, &mut fit_ll) }, GgfaStatus::Ok);
    assert!(fit_ll >= ll - 1e-6, "fit {fit_ll} below truth {ll}");
    let mut again = 0.0;
    assert_eq!(unsafe { ggfa_log_likelihood(fitted, d, &mut again) }, GgfaStatus::Ok);
    assert!((again - fit_ll).abs() <= 1e-9 * fit_ll.abs());

    assert_eq!(unsafe { ggfa_fit(d, 0, 4, 7, &mut fitted, ptr::null_mut()) }, GgfaStatus::InvalidArgument);
    unsafe {
        ggfa_model_free(fitted);
        ggfa_dataset_free(d);
        ggfa_model_free(m);
    }
}

#[test]
fn errors_are_reported() {
    let fx = fixture();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { ggfa_model_load(ptr::null(), &mut m) }, GgfaStatus::NullPointer);
    assert!(last_error().contains("null"));

    let missing = fx.model.with_file_name("nope.json");
    assert_eq!(unsafe { ggfa_model_load(cpath(&missing).as_ptr(), &mut m) }, GgfaStatus::Io);

    let m = load_model(&fx.model);
    let x = [0.0, 0.0];
    let y = [2u8, 0];
    let mut out = 0.0;
    assert_eq!(
        unsafe { ggfa_model_log_joint(m, x.as_ptr(), y.as_ptr(), &mut out) },
        GgfaStatus::InvalidArgument
    );
    assert!(last_error().contains('2'));

    let bad = fx.data.with_file_name("bad.csv");
    std::fs::write(&bad, "x1,x2,y1,y2\n1,2,0,5\n").unwrap();
    let mut d = ptr::null_mut();
    let status = unsafe { ggfa_dataset_load_csv(cpath(&bad).as_ptr(), cpath(&fx.schema).as_ptr(), &mut d) };
    assert_eq!(status, GgfaStatus::Data);
    assert!(last_error().contains("row 1"));

    let mut tiny = [0 as c_char; 4];
    let full = unsafe { ggfa_last_error_message(tiny.as_mut_ptr(), tiny.len()) };
    assert!(full > 3);
    assert_eq!(tiny[3], 0);
    unsafe {
        ggfa_model_free(m);
        ggfa_model_free(ptr::null_mut());
        ggfa_dataset_free(ptr::null_mut());
    }
}
