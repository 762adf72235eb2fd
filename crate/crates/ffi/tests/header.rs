//! Compiles and runs a C program against the generated header and the
//! static library.

use std::path::PathBuf;
use std::process::Command;

const PROGRAM: &str = r#"
#include "ggfa.h"
#include <stdio.h>
#include <string.h>

int main(int argc, char **argv) {
    GgfaModel *m = NULL;
    if (ggfa_model_load(argv[1], &m) != GGFA_STATUS_OK) return 10;
    size_t p_x, q, p_z;
    ggfa_model_dims(m, &p_x, &q, &p_z);
    if (p_x != 1 || q != 1 || p_z != 1) return 11;
    double x = 0.25, lj = 0.0, mean = 0.0;
    uint8_t y = 1;
    if (ggfa_model_log_joint(m, &x, &y, &lj) != GGFA_STATUS_OK) return 12;
    if (ggfa_model_posterior(m, &x, &y, &mean, NULL) != GGFA_STATUS_OK) return 13;
    y = 3;
    if (ggfa_model_log_joint(m, &x, &y, &lj) != GGFA_STATUS_INVALID_ARGUMENT) return 14;
    char msg[256];
    if (ggfa_last_error_message(msg, sizeof msg) == 0) return 15;
    ggfa_model_free(m);
    printf("%.17g %.17g\n", lj, mean);
    return 0;
}
"#;

fn target_dir() -> PathBuf {
    // .../target/<profile>/deps/<test binary>
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn c_program_links_and_runs() {
    let lib = target_dir().join("libggfa_ffi.a");
    assert!(lib.exists(), "static library not found at {}", lib.display());
    let include = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    let exe = dir.path().join("main");
    std::fs::write(&src, PROGRAM).unwrap();
    let status = Command::new("cc")
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(&include)
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .arg("-o")
        .arg(&exe)
        .status()
        .expect("C compiler available");
    assert!(status.success());

    let params = ggfa::ModelParams::new(
        nalgebra::DVector::from_vec(vec![0.1]),
        nalgebra::DVector::from_vec(vec![0.9]),
        nalgebra::DVector::from_vec(vec![-0.3]),
        0.8,
        nalgebra::DMatrix::from_element(1, 1, 1.0),
        nalgebra::DMatrix::from_element(1, 1, -1.0),
    )
    .unwrap();
    let schema = ggfa::Schema::generated(1, 1).unwrap();
    let model_path = dir.path().join("m.json");
    ggfa::io::ModelFile::new(&schema, &params, false, None).unwrap().save(&model_path).unwrap();

    let out = Command::new(&exe).arg(&model_path).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    let text = String::from_utf8(out.stdout).unwrap();
    let nums: Vec<f64> = text.split_whitespace().map(|s| s.parse().unwrap()).collect();
    let model = ggfa::Model::new(params).unwrap();
    let x = nalgebra::DVector::from_vec(vec![0.25]);
    let y = ggfa::BitState::from_u8(&[1]).unwrap();
    assert_eq!(nums[0], model.log_joint_observed(&x, &y).unwrap());
    assert_eq!(nums[1], model.posterior(&x, &y).unwrap().m[0]);
}
