use std::path::PathBuf;
use std::process::Command;

fn header() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include").join("plab.h")
}

#[test]
fn header_declares_every_entry_point() {
    let text = std::fs::read_to_string(header()).expect("build script writes include/plab.h");
    for name in [
        "plab_last_error",
        "plab_string_free",
        "plab_params_default",
        "plab_params_from_toml",
        "plab_params_set",
        "plab_params_validate",
        "plab_params_free",
        "plab_experiment_count",
        "plab_experiment_name",
        "plab_run",
        "plab_report_passed",
        "plab_report_row_count",
        "plab_report_json",
        "plab_report_write_csv",
        "plab_report_free",
        "plab_family_new",
        "plab_family_len",
        "plab_wavelet_extend",
        "plab_family_free",
    ] {
        assert!(text.contains(&format!("{name}(")), "{name} missing from header");
    }
    assert!(text.contains("typedef struct PlabReport PlabReport;"));
}

#[test]
fn header_compiles_as_c() {
    let Ok(out) = Command::new("cc").args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c"]).arg(header()).output() else {
        eprintln!("no C compiler found; skipping");
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
