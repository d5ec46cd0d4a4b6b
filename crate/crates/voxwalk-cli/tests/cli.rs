//! End-to-end tests driving the compiled `voxwalk` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use voxwalk::grid::{read_vxgr_file, write_vxgr_file};
use voxwalk::structio::{parse_xyz, write_xyz};
use voxwalk::voxelizer::{voxelize, RadiusTable};
use voxwalk::{Atom, Element, GridSpec, Structure, StructureKind, VoxelGrid};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_voxwalk"))
}

fn run_ok(args: &[&str]) -> Output {
    let out = bin().args(args).output().expect("spawn voxwalk");
    assert!(
        out.status.success(),
        "voxwalk {args:?} failed:\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn write_ligand_xyz(path: &Path, atoms: &[Atom]) {
    let s = Structure::new(atoms.to_vec(), StructureKind::Ligand).unwrap();
    write_xyz(&s, fs::File::create(path).unwrap()).unwrap();
}

fn three_atom_ligand() -> Vec<Atom> {
    vec![
        Atom::new(Element::C, [0.0, 0.0, 0.0]),
        Atom::new(Element::N, [1.4, 0.0, 0.0]),
        Atom::new(Element::O, [0.0, 1.3, 0.0]),
    ]
}

#[test]
fn voxelize_writes_expected_headers_and_config() {
    let dir = tempfile::tempdir().unwrap();
    let lig = dir.path().join("lig.xyz");
    let poc = dir.path().join("poc.xyz");
    write_ligand_xyz(&lig, &three_atom_ligand());
    let ps = Structure::new(
        vec![
            Atom::new(Element::C, [3.0, 0.0, 0.0]),
            Atom::new(Element::O, [0.0, 3.0, 0.0]),
        ],
        StructureKind::Pocket,
    )
    .unwrap();
    write_xyz(&ps, fs::File::create(&poc).unwrap()).unwrap();

    let out = dir.path().join("run");
    run_ok(&[
        "voxelize",
        "--ligand",
        lig.to_str().unwrap(),
        "--pocket",
        poc.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--grid-length",
        "16",
        "--resolution",
        "0.5",
    ]);
    let lgrid = read_vxgr_file(&out.join("ligand.vxgr")).unwrap();
    assert_eq!(lgrid.spec.channels, 7);
    assert_eq!(lgrid.spec.length, 16);
    assert_eq!(lgrid.spec.resolution, 0.5);
    let pgrid = read_vxgr_file(&out.join("pocket.vxgr")).unwrap();
    assert_eq!(pgrid.spec.channels, 4);
    let resolved = fs::read_to_string(out.join("config.resolved")).unwrap();
    assert!(resolved.contains("grid_length = 16"));
    assert!(resolved.contains("resolution = 0.5"));
}

#[test]
fn voxelize_accepts_sdf_ligands() {
    let dir = tempfile::tempdir().unwrap();
    let sdf = dir.path().join("lig.sdf");
    fs::write(
        &sdf,
        "mol\n\n\n  3  2  0  0  0  0  0  0  0  0999 V2000\n    0.0000    0.0000    0.0000 C   0  0\n    1.4000    0.0000    0.0000 N   0  0\n    0.0000    1.3000    0.0000 O   0  0\nM  END\n$$$$\n",
    )
    .unwrap();
    let out = dir.path().join("run");
    run_ok(&[
        "voxelize",
        "--ligand",
        sdf.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--grid-length",
        "16",
    ]);
    assert!(out.join("ligand.vxgr").exists());
    assert!(!out.join("pocket.vxgr").exists());
}

#[test]
fn voxelize_augment_seed_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let lig = dir.path().join("lig.xyz");
    write_ligand_xyz(&lig, &three_atom_ligand());
    let run_with = |out: &Path, seed: &str| {
        run_ok(&[
            "voxelize",
            "--ligand",
            lig.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--grid-length",
            "16",
            "--augment-seed",
            seed,
        ]);
        fs::read(out.join("ligand.vxgr")).unwrap()
    };
    let a = run_with(&dir.path().join("a"), "11");
    let b = run_with(&dir.path().join("b"), "11");
    let c = run_with(&dir.path().join("c"), "12");
    assert_eq!(a, b);
    assert_ne!(a, c);
}

fn random_grid(spec: GridSpec, rng: &mut impl Rng) -> VoxelGrid {
    VoxelGrid {
        spec,
        data: (0..spec.total_voxels()).map(|_| rng.gen::<f32>()).collect(),
    }
}

fn write_train_fixtures(dir: &Path) -> PathBuf {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let ls = GridSpec::centered(8, 0.25, 2).unwrap();
    let ps = GridSpec::centered(8, 0.25, 2).unwrap();
    let mut manifest = String::new();
    for i in 0..4 {
        let l = random_grid(ls, &mut rng);
        let p = random_grid(ps, &mut rng);
        write_vxgr_file(&l, &dir.join(format!("l{i}.vxgr"))).unwrap();
        write_vxgr_file(&p, &dir.join(format!("p{i}.vxgr"))).unwrap();
        manifest.push_str(&format!("l{i}.vxgr p{i}.vxgr\n"));
    }
    let path = dir.join("manifest.txt");
    fs::write(&path, manifest).unwrap();
    path
}

const SMALL_NET: [&str; 4] = ["--set", "embed_channels=3", "--set", "mid_channels=4"];

#[test]
fn train_writes_loss_csv_and_loadable_weights() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_train_fixtures(dir.path());
    let out = dir.path().join("run");
    let mut args = vec![
        "train",
        "--manifest",
        manifest.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--set",
        "train_steps=40",
        "--set",
        "batch_size=2",
    ];
    args.extend_from_slice(&SMALL_NET);
    run_ok(&args);

    let csv = fs::read_to_string(out.join("loss.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows[0], "epoch,step,loss");
    assert_eq!(rows.len(), 41);
    let loss = |row: &str| row.split(',').nth(2).unwrap().parse::<f64>().unwrap();
    assert!(loss(rows[40]) < loss(rows[1]), "loss did not decrease");

    let (length, sigma) = voxwalk::denoiser::peek_meta_file(&out.join("weights.vxwt")).unwrap();
    assert_eq!(length, 8);
    assert!((sigma - 0.9).abs() < 1e-6);
}

#[test]
fn train_reports_missing_manifest_entries() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("manifest.txt");
    fs::write(&manifest, "absent.vxgr also_absent.vxgr\n").unwrap();
    let out = bin()
        .args([
            "train",
            "--manifest",
            manifest.to_str().unwrap(),
            "--out",
            dir.path().join("run").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("error[input]:"), "stderr: {err}");
    assert!(err.contains("absent.vxgr"), "stderr: {err}");
}

#[test]
fn train_resume_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_train_fixtures(dir.path());
    let base = dir.path().join("base");
    let mut args = vec![
        "train",
        "--manifest",
        manifest.to_str().unwrap(),
        "--out",
        base.to_str().unwrap(),
        "--set",
        "train_steps=10",
        "--set",
        "batch_size=2",
    ];
    args.extend_from_slice(&SMALL_NET);
    run_ok(&args);

    let weights = base.join("weights.vxwt");
    let resume = |out: &Path| {
        let mut args = vec![
            "train",
            "--manifest",
            manifest.to_str().unwrap(),
            "--resume",
            weights.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--set",
            "train_steps=5",
            "--set",
            "batch_size=2",
        ];
        args.extend_from_slice(&SMALL_NET);
        run_ok(&args);
        fs::read(out.join("weights.vxwt")).unwrap()
    };
    let a = resume(&dir.path().join("r1"));
    let b = resume(&dir.path().join("r2"));
    assert_eq!(a, b, "resumed runs must be byte-identical");
    assert_ne!(a, fs::read(base.join("weights.vxwt")).unwrap());
}

/// Voxelize a known ligand and write a single-component oracle manifest.
fn write_oracle_fixture(dir: &Path, atoms: &[Atom]) -> (PathBuf, Structure) {
    let s = Structure::new(atoms.to_vec(), StructureKind::Ligand).unwrap();
    let spec = GridSpec::centered(16, 0.25, 7).unwrap();
    let (grid, oob) = voxelize(&s, &spec, &RadiusTable::default()).unwrap();
    assert_eq!(oob, 0);
    write_vxgr_file(&grid, &dir.join("comp.vxgr")).unwrap();
    let manifest = dir.join("oracle.txt");
    fs::write(&manifest, "p0 comp.vxgr\n").unwrap();
    (manifest, s)
}

fn sample_args<'a>(manifest: &'a str, out: &'a str) -> Vec<&'a str> {
    vec![
        "sample",
        "--oracle",
        manifest,
        "--pocket-key",
        "p0",
        "--out",
        out,
        "--threads",
        "1",
        "--seed",
        "5",
        "--set",
        "chains=2",
        "--set",
        "warmup=5",
        "--set",
        "jump_every=5",
        "--set",
        "sample_steps=10",
    ]
}

#[test]
fn sample_oracle_jumps_recover_the_component() {
    let dir = tempfile::tempdir().unwrap();
    let (manifest, truth) = write_oracle_fixture(dir.path(), &three_atom_ligand());
    let out = dir.path().join("run");
    run_ok(&sample_args(
        manifest.to_str().unwrap(),
        out.to_str().unwrap(),
    ));

    let manifest_text = fs::read_to_string(out.join("manifest.jsonl")).unwrap();
    let lines: Vec<serde_json::Value> = manifest_text
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    // 2 chains x jumps at steps 10 (warmup 5, every 5: steps 10 only)
    assert_eq!(lines.len(), 2, "{manifest_text}");
    for line in &lines {
        assert_eq!(line["atoms"], 3);
        assert_eq!(line["valid"], true);
        let xyz = out.join(line["xyz"].as_str().unwrap());
        let got = parse_xyz(fs::File::open(xyz).unwrap(), StructureKind::Ligand).unwrap();
        assert_eq!(got.len(), truth.len());
        for t in &truth.atoms {
            let best = got
                .atoms
                .iter()
                .filter(|a| a.element == t.element)
                .map(|a| {
                    (a.position[0] - t.position[0]).hypot(a.position[1] - t.position[1])
                        + (a.position[2] - t.position[2]).abs()
                })
                .fold(f64::INFINITY, f64::min);
            assert!(best < 0.05, "atom recovered {best} Å away");
        }
    }
}

#[test]
fn sample_reruns_are_identical_modulo_wall_time() {
    let dir = tempfile::tempdir().unwrap();
    let (manifest, _) = write_oracle_fixture(dir.path(), &three_atom_ligand());
    let strip_wall = |path: &Path| -> Vec<serde_json::Value> {
        fs::read_to_string(path)
            .unwrap()
            .lines()
            .map(|l| {
                let mut v: serde_json::Value = serde_json::from_str(l).unwrap();
                v.as_object_mut().unwrap().remove("wall_ms");
                v
            })
            .collect()
    };
    let out1 = dir.path().join("r1");
    let out2 = dir.path().join("r2");
    run_ok(&sample_args(
        manifest.to_str().unwrap(),
        out1.to_str().unwrap(),
    ));
    run_ok(&sample_args(
        manifest.to_str().unwrap(),
        out2.to_str().unwrap(),
    ));
    assert_eq!(
        strip_wall(&out1.join("manifest.jsonl")),
        strip_wall(&out2.join("manifest.jsonl"))
    );
    for entry in strip_wall(&out1.join("manifest.jsonl")) {
        let name = entry["grid"].as_str().unwrap();
        assert_eq!(
            fs::read(out1.join(name)).unwrap(),
            fs::read(out2.join(name)).unwrap(),
            "grid {name} differs between reruns"
        );
    }
}

#[test]
fn sample_zero_steps_emits_initialization_jump() {
    let dir = tempfile::tempdir().unwrap();
    let (manifest, _) = write_oracle_fixture(dir.path(), &three_atom_ligand());
    let out = dir.path().join("run");
    run_ok(&[
        "sample",
        "--oracle",
        manifest.to_str().unwrap(),
        "--pocket-key",
        "p0",
        "--out",
        out.to_str().unwrap(),
        "--set",
        "chains=1",
        "--set",
        "warmup=0",
        "--set",
        "sample_steps=0",
        "--set",
        "jump_every=0",
    ]);
    let text = fs::read_to_string(out.join("manifest.jsonl")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 1);
    let v: serde_json::Value = serde_json::from_str(lines[0]).unwrap();
    assert_eq!(v["step"], 0);
}

#[test]
fn sample_without_backend_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["sample", "--out", dir.path().join("x").to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error[usage]:"));
}

#[test]
fn evaluate_identical_sets_have_zero_jsd() {
    let dir = tempfile::tempdir().unwrap();
    let gen = dir.path().join("gen");
    let reference = dir.path().join("ref");
    fs::create_dir_all(&gen).unwrap();
    fs::create_dir_all(&reference).unwrap();
    for d in [&gen, &reference] {
        write_ligand_xyz(&d.join("a.xyz"), &three_atom_ligand());
        write_ligand_xyz(
            &d.join("b.xyz"),
            &[
                Atom::new(Element::C, [0.0, 0.0, 0.0]),
                Atom::new(Element::C, [1.5, 0.0, 0.0]),
            ],
        );
    }
    // pocket carbon 2.6 Å above the shared origin carbon: inside the 2.9 Å
    // C-C clash cutoff for that atom only
    let poc = dir.path().join("poc.xyz");
    let ps = Structure::new(
        vec![Atom::new(Element::C, [0.0, 0.0, 2.6])],
        StructureKind::Pocket,
    )
    .unwrap();
    write_xyz(&ps, fs::File::create(&poc).unwrap()).unwrap();

    let out = dir.path().join("report");
    run_ok(&[
        "evaluate",
        "--generated",
        gen.to_str().unwrap(),
        "--reference",
        reference.to_str().unwrap(),
        "--pocket",
        poc.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    let jsd = report["jsd_bits"].as_object().unwrap();
    let cc = jsd["C-C"].as_f64().unwrap();
    assert!(cc.abs() < 1e-12, "C-C JSD {cc}");
    let cn = jsd["C-N"].as_f64().unwrap();
    assert!(cn.abs() < 1e-12);
    assert!(jsd["O-O"].is_null(), "no O-O bonds anywhere");
    for row in report["clashes"].as_array().unwrap() {
        assert_eq!(row["clashes"], 1, "{row}");
    }
    assert_eq!(report["summary"]["molecules"], 2);
    let csv = fs::read_to_string(out.join("report.csv")).unwrap();
    assert!(csv.starts_with("section,key,value\n"));
    assert!(csv.contains("summary,molecules,2"));
}

#[test]
fn evaluate_empty_generated_dir_fails() {
    let dir = tempfile::tempdir().unwrap();
    let gen = dir.path().join("gen");
    fs::create_dir_all(&gen).unwrap();
    let out = bin()
        .args([
            "evaluate",
            "--generated",
            gen.to_str().unwrap(),
            "--reference",
            gen.to_str().unwrap(),
            "--out",
            dir.path().join("r").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn roundtrip_reports_matches_and_threshold_misses() {
    let dir = tempfile::tempdir().unwrap();
    let lig = dir.path().join("lig.xyz");
    write_ligand_xyz(&lig, &three_atom_ligand());
    let out = run_ok(&[
        "roundtrip",
        "--input",
        lig.to_str().unwrap(),
        "--grid-length",
        "16",
    ]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("matched=3"), "{text}");
    assert!(text.contains("spurious=0"), "{text}");
    assert!(text.contains("missed=0"), "{text}");

    let out = run_ok(&[
        "roundtrip",
        "--input",
        lig.to_str().unwrap(),
        "--grid-length",
        "16",
        "--set",
        "peak_threshold=1.5",
    ]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("matched=0"), "{text}");
    assert!(text.contains("missed=3"), "{text}");
}

#[test]
fn config_resolved_reproduces_a_run() {
    let dir = tempfile::tempdir().unwrap();
    let (manifest, _) = write_oracle_fixture(dir.path(), &three_atom_ligand());
    let out1 = dir.path().join("r1");
    run_ok(&sample_args(
        manifest.to_str().unwrap(),
        out1.to_str().unwrap(),
    ));
    // rerun purely from the echoed config, no flags
    let out2 = dir.path().join("r2");
    run_ok(&[
        "sample",
        "--config",
        out1.join("config.resolved").to_str().unwrap(),
        "--oracle",
        manifest.to_str().unwrap(),
        "--pocket-key",
        "p0",
        "--out",
        out2.to_str().unwrap(),
    ]);
    let grids = |dir: &Path| -> Vec<String> {
        let mut v: Vec<String> = fs::read_dir(dir)
            .unwrap()
            .filter_map(|e| e.ok())
            .map(|e| e.file_name().to_string_lossy().into_owned())
            .filter(|n| n.ends_with(".vxgr"))
            .collect();
        v.sort();
        v
    };
    let names = grids(&out1);
    assert_eq!(names, grids(&out2));
    for n in names {
        assert_eq!(fs::read(out1.join(&n)).unwrap(), fs::read(out2.join(&n)).unwrap());
    }
}

#[test]
fn trained_weights_drive_the_sample_backend() {
    // end-to-end: train briefly on tiny grids, then sample with the weights
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_train_fixtures(dir.path());
    let train_out = dir.path().join("train");
    let mut args = vec![
        "train",
        "--manifest",
        manifest.to_str().unwrap(),
        "--out",
        train_out.to_str().unwrap(),
        "--set",
        "train_steps=5",
        "--set",
        "batch_size=2",
    ];
    args.extend_from_slice(&SMALL_NET);
    run_ok(&args);

    let sample_out = dir.path().join("sample");
    let weights = train_out.join("weights.vxwt");
    let pocket = dir.path().join("p0.vxgr");
    let mut sargs = vec![
        "sample",
        "--weights",
        weights.to_str().unwrap(),
        "--pocket",
        pocket.to_str().unwrap(),
        "--out",
        sample_out.to_str().unwrap(),
        "--set",
        "ligand_channels=2",
        "--set",
        "chains=1",
        "--set",
        "warmup=2",
        "--set",
        "jump_every=2",
        "--set",
        "sample_steps=4",
    ];
    sargs.extend_from_slice(&SMALL_NET);
    run_ok(&sargs);
    // warmup 2, jump every 2, 4 total steps: one jump at step 4
    let text = fs::read_to_string(sample_out.join("manifest.jsonl")).unwrap();
    assert_eq!(text.lines().count(), 1, "{text}");
    let line: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert_eq!(line["step"], 4);
}
