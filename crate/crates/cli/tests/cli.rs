use std::path::Path;
use std::process::{Command, Output};

use morphoscope_cli::manifest::Manifest;

fn morphoscope(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_morphoscope"))
        .args(args)
        .arg("--dir")
        .arg(dir)
        .env_remove("MORPHOSCOPE_JOBS")
        .output()
        .unwrap()
}

fn small_config(dir: &Path) -> String {
    let path = dir.join("cfg.json");
    std::fs::write(
        &path,
        r#"{"phantom": {"dims": [16, 16, 16], "seed": 1},
            "cohort": {"n_cn": 6, "n_ad_per_stage": 5},
            "template": {"bandwidth": 15.0, "outer_iters": 1},
            "scoring": {"quantiles": [0.0, 0.5]}}"#,
    )
    .unwrap();
    path.to_string_lossy().into_owned()
}

fn header(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

#[test]
fn help_lists_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = morphoscope(&["--help"], dir.path());
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("Exit codes"));
    for sub in ["phantom-gen", "template-build", "register", "aging-field", "score", "stats-fit", "stats-compare", "efc"] {
        assert!(text.contains(sub), "{sub}");
    }
}

#[test]
fn exit_codes_by_failure_class() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(morphoscope(&["no-such-stage"], dir.path()).status.code(), Some(1));
    assert_eq!(morphoscope(&["score"], dir.path()).status.code(), Some(2));

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"stats": {"no_such_field": 1}}"#).unwrap();
    assert_eq!(morphoscope(&["stats-fit", "--config", bad.to_str().unwrap()], dir.path()).status.code(), Some(3));

    std::fs::write(&bad, r#"{"scoring": {"quantiles": [0.0, 1.5]}}"#).unwrap();
    assert_eq!(morphoscope(&["stats-fit", "--config", bad.to_str().unwrap()], dir.path()).status.code(), Some(3));

    let junk = dir.path().join("junk.nii");
    std::fs::write(&junk, b"not a volume").unwrap();
    assert_eq!(morphoscope(&["efc", "--image", junk.to_str().unwrap()], dir.path()).status.code(), Some(2));
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = morphoscope(&["phantom-gen", "--config", &cfg, "--seed", "9", "--n-cn", "5"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let m = Manifest::read(&dir.path().join("manifests/phantom-gen.json")).unwrap();
    assert_eq!(m.parameters["phantom"]["seed"], 9);
    assert_eq!(m.parameters["phantom"]["dims"][0], 16);
    assert_eq!(m.parameters["subjects"], 5 + 4 * 5);
    assert_eq!(m.config_sha256.len(), 64);
}

#[test]
fn stages_chain_through_the_work_directory() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = small_config(d);
    let run = |args: &[&str]| {
        let mut full = args.to_vec();
        full.extend(["--config", &cfg, "--jobs", "2"]);
        let out = morphoscope(&full, d);
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        out
    };
    run(&["phantom-gen"]);
    run(&["template-build", "--age", "60"]);
    run(&["template-build", "--age", "90"]);
    run(&["aging-field"]);
    run(&["score"]);
    run(&["stats-fit"]);
    run(&["stats-compare"]);

    assert_eq!(header(&d.join("cohort.csv")), "subject_id,scan_id,age,group,cdr,path");
    assert_eq!(header(&d.join("scores.csv")), "scan_id,region_name,score_kind,value,n_voxels,quantile");
    assert_eq!(header(&d.join("fit.csv")), "region,q,slope,intercept,r2,p");
    assert_eq!(header(&d.join("quantile_selection.csv")), "region,q,r2,slope,n");
    assert_eq!(header(&d.join("compare.csv")), "region,score_kind,pair,t,p_raw,p_bonf,stars,d,band");
    assert_eq!(header(&d.join("T60_build_log.csv")), "iteration,mean_u,efc");

    // 26 subjects, 4 regions, 2 quantiles, AS and ADS
    let scores = std::fs::read_to_string(d.join("scores.csv")).unwrap();
    assert_eq!(scores.lines().count(), 1 + 26 * 4 * 2 * 2);

    let aging = Manifest::read(&d.join("manifests/aging-field.json")).unwrap();
    assert_eq!(aging.parameters["gap_years"], 30.0);
    assert_eq!(aging.inputs.len(), 3);

    let efc = run(&["efc", "--image", d.join("T60_img.nii").to_str().unwrap()]);
    let value: f64 = String::from_utf8_lossy(&efc.stdout).trim().parse().unwrap();
    assert!(value > 0.0 && value < 1.0);

    let out = d.join("pair");
    run(&[
        "register",
        "--fixed",
        d.join("T60_img.nii").to_str().unwrap(),
        "--moving",
        d.join("T90_img.nii").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(d.join("pair_x.nii").exists() && d.join("manifests/register-pair.json").exists());
}
