use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use sage_core::map::{self, BinaryMask, GridDims, SalMap};

fn sage(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sage"))
        .args(args)
        .current_dir(cwd)
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

#[test]
fn sage_gen_fuses_kept_instances_only() {
    let dir = tempfile::tempdir().unwrap();
    let d = GridDims::new(4, 6).unwrap();
    let gaze = SalMap::from_fn(d, |r, c| (r * 6 + c) as f32 / 46.0).unwrap();
    map::save_smap(&gaze, dir.path().join("gaze.smap")).unwrap();
    map::save_mask(
        &BinaryMask::from_fn(d, |r, c| r == 0 && c < 2),
        dir.path().join("p.bmsk"),
    )
    .unwrap();
    map::save_mask(
        &BinaryMask::from_fn(d, |r, _| r == 3),
        dir.path().join("b.bmsk"),
    )
    .unwrap();
    fs::write(
        dir.path().join("inst.json"),
        r#"[{"class_name": "person", "score": 0.8, "mask_path": "p.bmsk"},
            {"class_name": "building", "score": 0.9, "mask_path": "b.bmsk"}]"#,
    )
    .unwrap();

    let out = sage(
        &[
            "sage-gen",
            "--gaze",
            "gaze.smap",
            "--instances",
            "inst.json",
            "--out",
            "sage.smap",
            "--mask-out",
            "m.bmsk",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let sage_map = map::load_smap(dir.path().join("sage.smap")).unwrap();
    let norm = map::normalize_max(&gaze);
    assert_eq!(sage_map.get(0, 0), 1.0);
    assert_eq!(sage_map.get(0, 1), 1.0);
    assert_eq!(sage_map.get(3, 2), norm.get(3, 2));
    assert_eq!(
        map::load_mask(dir.path().join("m.bmsk"))
            .unwrap()
            .count_ones(),
        2
    );

    let out = sage(
        &[
            "sage-gen",
            "--gaze",
            "gaze.smap",
            "--instances",
            "inst.json",
            "--out",
            "x.smap",
            "--keep",
            "person,background",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 1);
}

#[test]
fn exit_codes_follow_error_class() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        code(&sage(
            &["viz", "--map", "missing.smap", "--out", "x.png"],
            dir.path()
        )),
        2
    );
    fs::write(dir.path().join("bad.smap"), b"SMAPxxxx").unwrap();
    assert_eq!(
        code(&sage(
            &["viz", "--map", "bad.smap", "--out", "x.png"],
            dir.path()
        )),
        1
    );
    assert_eq!(code(&sage(&["eval", "--report", "r.csv"], dir.path())), 1);
    assert_eq!(
        code(&sage(
            &["synth-gen", "--spec", "no_such_scene", "--out", "o"],
            dir.path()
        )),
        2
    );
    assert_eq!(code(&sage(&["--help"], dir.path())), 0);

    map::save_smap(
        &SalMap::zeros(GridDims::new(2, 2).unwrap()),
        dir.path().join("z.smap"),
    )
    .unwrap();
    assert_eq!(
        code(&sage(
            &["viz", "--map", "z.smap", "--out", "z.png"],
            dir.path()
        )),
        0
    );
}

#[test]
fn pipeline_run_and_eval_over_generated_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert_eq!(
        code(&sage(
            &[
                "synth-gen",
                "--spec",
                "crossing",
                "--seed",
                "3",
                "--out",
                "c"
            ],
            p
        )),
        0
    );

    let out = sage(
        &[
            "pipeline-run",
            "--clip",
            "c/manifest.json#crossing-002",
            "--out",
            "o.smap",
            "--png",
            "o.png",
        ],
        p,
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let m = map::load_smap(p.join("o.smap")).unwrap();
    assert_eq!(m.max(), 1.0);
    assert!(fs::read(p.join("o.png")).unwrap().starts_with(b"\x89PNG"));
    assert_eq!(
        code(&sage(
            &[
                "pipeline-run",
                "--clip",
                "c/manifest.json#nope",
                "--out",
                "o.smap"
            ],
            p
        )),
        1
    );

    fs::write(
        p.join("cfg.toml"),
        "[eval]\nmanifest = \"c/manifest.json\"\nreport = \"from-config.csv\"\nregimes = [\"sage\"]\npipelines = [\"raw\"]\n",
    )
    .unwrap();
    assert_eq!(code(&sage(&["--config", "cfg.toml", "eval"], p)), 0);
    let csv = fs::read_to_string(p.join("from-config.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(csv.lines().nth(1).unwrap().starts_with("sage,raw,10,"));

    assert_eq!(
        code(&sage(
            &[
                "--config",
                "cfg.toml",
                "eval",
                "--report",
                "cli.csv",
                "--pipelines",
                "sage_net"
            ],
            p
        )),
        0
    );
    let csv = fs::read_to_string(p.join("cli.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().starts_with("sage,sage_net,10,"));

    let out = sage(
        &[
            "eval",
            "--manifest",
            "c/manifest.json",
            "--report",
            "none.csv",
            "--scenario",
            "tunnel",
        ],
        p,
    );
    assert_eq!(code(&out), 0);
    assert_eq!(
        fs::read_to_string(p.join("none.csv"))
            .unwrap()
            .lines()
            .count(),
        1
    );
}
