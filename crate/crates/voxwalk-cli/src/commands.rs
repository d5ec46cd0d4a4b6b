//! Implementations of the pipeline subcommands.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use voxwalk::denoiser::{
    load_params_file, save_params_file, train, DenoiserModel, DenoiserParams, WeightSet,
};
use voxwalk::grid::{read_vxgr_file, write_vxgr_file};
use voxwalk::metrics::{bond_length_histogram, clash_count, jsd, summary_stats, CLASH_TOLERANCE};
use voxwalk::peaks::{detect_atoms, roundtrip_report};
use voxwalk::sampler::run_cwjs;
use voxwalk::structio::{
    augment, center_pair, parse_pdb, parse_sdf, parse_xyz, write_xyz,
};
use voxwalk::voxelizer::{voxelize, RadiusTable};
use voxwalk::{
    Element, MixtureOracle, Pocket, Result, ScoreModel, Structure, StructureKind, VoxelGrid,
    VoxwalkError,
};

use crate::config::RunConfig;

/// Parse a molecular structure file by extension: .sdf/.mol, .pdb, .xyz.
pub fn parse_structure(path: &Path, kind: StructureKind) -> Result<Structure> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
        .to_ascii_lowercase();
    let file = File::open(path)
        .map_err(|e| VoxwalkError::Invalid(format!("cannot open {}: {e}", path.display())))?;
    let reader = BufReader::new(file);
    let with_ctx = |e: VoxwalkError| {
        VoxwalkError::Invalid(format!("{}: {e}", path.display()))
    };
    match ext.as_str() {
        "sdf" | "mol" => {
            if kind != StructureKind::Ligand {
                return Err(VoxwalkError::Invalid(format!(
                    "{}: SDF input is only supported for ligands",
                    path.display()
                )));
            }
            parse_sdf(reader).map_err(with_ctx)
        }
        "pdb" => {
            if kind != StructureKind::Pocket {
                return Err(VoxwalkError::Invalid(format!(
                    "{}: PDB input is only supported for pockets",
                    path.display()
                )));
            }
            parse_pdb(reader).map(|(s, _)| s).map_err(with_ctx)
        }
        "xyz" => parse_xyz(reader, kind).map_err(with_ctx),
        other => Err(VoxwalkError::Invalid(format!(
            "{}: unsupported structure format '.{other}'",
            path.display()
        ))),
    }
}

fn ensure_out_dir(out: &Path, cfg: &RunConfig) -> Result<()> {
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("config.resolved"), cfg.resolved())?;
    Ok(())
}

pub fn cmd_voxelize(
    cfg: &RunConfig,
    ligand: &Path,
    pocket: Option<&Path>,
    augment_seed: Option<u64>,
    out: &Path,
) -> Result<()> {
    ensure_out_dir(out, cfg)?;
    let lig = parse_structure(ligand, StructureKind::Ligand)?;
    let poc = pocket
        .map(|p| parse_structure(p, StructureKind::Pocket))
        .transpose()?;
    let empty_pocket = Structure {
        atoms: Vec::new(),
        kind: StructureKind::Pocket,
    };
    let mut pair = center_pair(&lig, poc.as_ref().unwrap_or(&empty_pocket))?;
    if let Some(seed) = augment_seed {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        pair = augment(&pair, &mut rng);
    }
    let radii = RadiusTable::default();
    let (lgrid, l_oob) = voxelize(&pair.ligand, &cfg.ligand_spec()?, &radii)?;
    write_vxgr_file(&lgrid, &out.join("ligand.vxgr"))?;
    println!(
        "ligand: {} atoms, {} outside grid -> {}",
        pair.ligand.len(),
        l_oob,
        out.join("ligand.vxgr").display()
    );
    if !pair.pocket.is_empty() {
        let (pgrid, p_oob) = voxelize(&pair.pocket, &cfg.pocket_spec()?, &radii)?;
        write_vxgr_file(&pgrid, &out.join("pocket.vxgr"))?;
        println!(
            "pocket: {} atoms, {} outside grid -> {}",
            pair.pocket.len(),
            p_oob,
            out.join("pocket.vxgr").display()
        );
    }
    Ok(())
}

/// Manifest lines: `<ligand.vxgr> <pocket.vxgr>`, paths relative to the
/// manifest file.
fn read_train_manifest(manifest: &Path) -> Result<Vec<(VoxelGrid, VoxelGrid)>> {
    let base = manifest.parent().unwrap_or(Path::new("."));
    let text = std::fs::read_to_string(manifest)
        .map_err(|e| VoxwalkError::Invalid(format!("cannot read {}: {e}", manifest.display())))?;
    let mut pairs = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let (lp, pp) = match (parts.next(), parts.next()) {
            (Some(a), Some(b)) => (a, b),
            _ => {
                return Err(VoxwalkError::Parse {
                    line: lineno + 1,
                    msg: "manifest line needs ligand and pocket paths".into(),
                })
            }
        };
        let load = |rel: &str| -> Result<VoxelGrid> {
            let path = base.join(rel);
            read_vxgr_file(&path)
                .map_err(|e| VoxwalkError::Invalid(format!("{}: {e}", path.display())))
        };
        pairs.push((load(lp)?, load(pp)?));
    }
    if pairs.is_empty() {
        return Err(VoxwalkError::Invalid(format!(
            "manifest {} lists no grid pairs",
            manifest.display()
        )));
    }
    Ok(pairs)
}

pub fn cmd_train(
    cfg: &RunConfig,
    manifest: &Path,
    resume: Option<&Path>,
    out: &Path,
) -> Result<()> {
    ensure_out_dir(out, cfg)?;
    let dataset = read_train_manifest(manifest)?;
    // the grids decide the geometry; the preset decides capacity and sigma
    let mut dcfg = cfg.denoiser_config();
    dcfg.grid_length = dataset[0].0.spec.length;
    dcfg.ligand_channels = dataset[0].0.spec.channels;
    dcfg.pocket_channels = dataset[0].1.spec.channels;
    let mut params = match resume {
        Some(path) => load_params_file(path, dcfg)?,
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            DenoiserParams::init(dcfg, &mut rng)?
        }
    };
    let log = train(&mut params, &dataset, &cfg.train_config())?;
    save_params_file(&params, &out.join("weights.vxwt"))?;
    let mut csv = BufWriter::new(File::create(out.join("loss.csv"))?);
    writeln!(csv, "epoch,step,loss")?;
    for r in &log {
        writeln!(csv, "{},{},{}", r.epoch, r.step, r.loss)?;
    }
    csv.flush()?;
    if let (Some(first), Some(last)) = (log.first(), log.last()) {
        println!(
            "trained {} steps: loss {} -> {}",
            log.len(),
            first.loss,
            last.loss
        );
    }
    Ok(())
}

/// Oracle manifest lines: `<pocket key> <ligand.vxgr>`.
fn read_oracle_manifest(manifest: &Path, sigma: f64) -> Result<MixtureOracle> {
    let base = manifest.parent().unwrap_or(Path::new("."));
    let text = std::fs::read_to_string(manifest)
        .map_err(|e| VoxwalkError::Invalid(format!("cannot read {}: {e}", manifest.display())))?;
    let mut comps = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, rel) = line.split_once(char::is_whitespace).ok_or_else(|| {
            VoxwalkError::Parse {
                line: lineno + 1,
                msg: "oracle manifest line needs a key and a grid path".into(),
            }
        })?;
        let path = base.join(rel.trim());
        let grid = read_vxgr_file(&path)
            .map_err(|e| VoxwalkError::Invalid(format!("{}: {e}", path.display())))?;
        comps.push((key.to_string(), grid));
    }
    MixtureOracle::new(sigma, comps)
}

pub enum SampleBackend {
    Weights { weights: PathBuf, pocket: PathBuf },
    Oracle { manifest: PathBuf, key: String },
}

pub fn cmd_sample(cfg: &RunConfig, backend: &SampleBackend, out: &Path) -> Result<()> {
    ensure_out_dir(out, cfg)?;
    let started = Instant::now();
    let sampler_cfg = cfg.sampler_config();
    let (model, pocket, ligand_spec): (Box<dyn ScoreModel>, Pocket, _) = match backend {
        SampleBackend::Weights { weights, pocket } => {
            let pgrid = read_vxgr_file(pocket)
                .map_err(|e| VoxwalkError::Invalid(format!("{}: {e}", pocket.display())))?;
            let mut dcfg = cfg.denoiser_config();
            dcfg.grid_length = pgrid.spec.length;
            dcfg.pocket_channels = pgrid.spec.channels;
            let params = load_params_file(weights, dcfg)?;
            let spec = voxwalk::GridSpec::centered(
                dcfg.grid_length,
                cfg.resolution,
                dcfg.ligand_channels,
            )?;
            (
                Box::new(DenoiserModel::new(&params, WeightSet::Ema)),
                Pocket::Grid(pgrid),
                spec,
            )
        }
        SampleBackend::Oracle { manifest, key } => {
            let oracle = read_oracle_manifest(manifest, cfg.sigma)?;
            let spec = *oracle.spec();
            (Box::new(oracle), Pocket::Key(key.clone()), spec)
        }
    };
    let output = run_cwjs(model.as_ref(), &pocket, &ligand_spec, &sampler_cfg)?;
    let peak_cfg = cfg.peak_config();
    let max_atoms = 2 * ligand_spec.length;
    let mut manifest_file = BufWriter::new(File::create(out.join("manifest.jsonl"))?);
    for s in &output.samples {
        let stem = format!("{:03}_{:06}", s.chain, s.step);
        let grid_name = format!("{stem}.vxgr");
        write_vxgr_file(&s.grid, &out.join(&grid_name))?;
        let atoms = detect_atoms(&s.grid, &peak_cfg)?;
        let valid = !atoms.is_empty() && atoms.len() <= max_atoms;
        let xyz_name = if atoms.is_empty() {
            None
        } else {
            let name = format!("{stem}.xyz");
            let structure = Structure::new(atoms.clone(), StructureKind::Ligand)?;
            write_xyz(&structure, BufWriter::new(File::create(out.join(&name))?))?;
            Some(name)
        };
        let line = json!({
            "chain": s.chain,
            "step": s.step,
            "grid": grid_name,
            "xyz": xyz_name,
            "atoms": atoms.len(),
            "valid": valid,
            "wall_ms": started.elapsed().as_secs_f64() * 1e3,
        });
        writeln!(manifest_file, "{line}")?;
    }
    for a in &output.aborts {
        let line = json!({
            "chain": a.chain,
            "step": a.step,
            "error": a.message,
            "wall_ms": started.elapsed().as_secs_f64() * 1e3,
        });
        writeln!(manifest_file, "{line}")?;
    }
    manifest_file.flush()?;
    println!(
        "{} samples ({} chains aborted) -> {}",
        output.samples.len(),
        output.aborts.len(),
        out.display()
    );
    Ok(())
}

fn load_structure_dir(dir: &Path, kind: StructureKind) -> Result<Vec<(String, Structure)>> {
    let mut names: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| VoxwalkError::Invalid(format!("cannot read {}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            matches!(
                p.extension().and_then(|e| e.to_str()),
                Some("xyz") | Some("sdf") | Some("mol")
            )
        })
        .collect();
    names.sort();
    let mut out = Vec::new();
    for p in names {
        let s = parse_structure(&p, kind)?;
        out.push((p.file_name().unwrap().to_string_lossy().into_owned(), s));
    }
    if out.is_empty() {
        return Err(VoxwalkError::Invalid(format!(
            "no structures found in {}",
            dir.display()
        )));
    }
    Ok(out)
}

/// Bond pairs reported in the JSD table; all metrics are geometric (heuristic
/// bond perception, planarity-based aromaticity proxy).
const JSD_PAIRS: [(Element, Element); 7] = [
    (Element::C, Element::C),
    (Element::C, Element::N),
    (Element::C, Element::O),
    (Element::C, Element::S),
    (Element::N, Element::N),
    (Element::N, Element::O),
    (Element::O, Element::O),
];

pub fn cmd_evaluate(
    cfg: &RunConfig,
    generated: &Path,
    reference: &Path,
    pocket: Option<&Path>,
    out: &Path,
) -> Result<()> {
    ensure_out_dir(out, cfg)?;
    let gen = load_structure_dir(generated, StructureKind::Ligand)?;
    let reference = load_structure_dir(reference, StructureKind::Ligand)?;
    let gen_structs: Vec<Structure> = gen.iter().map(|(_, s)| s.clone()).collect();
    let ref_structs: Vec<Structure> = reference.iter().map(|(_, s)| s.clone()).collect();

    let mut jsd_table = serde_json::Map::new();
    for &(a, b) in &JSD_PAIRS {
        let label = format!("{}-{}", a.symbol(), b.symbol());
        let hg = bond_length_histogram(&gen_structs, (a, b));
        let hr = bond_length_histogram(&ref_structs, (a, b));
        let value = if hg.total() > 0 && hr.total() > 0 {
            json!(jsd(&hg, &hr)?)
        } else {
            json!(null)
        };
        jsd_table.insert(label, value);
    }

    let clashes: Option<Vec<serde_json::Value>> = match pocket {
        Some(ppath) => {
            let poc = parse_structure(ppath, StructureKind::Pocket)?;
            Some(
                gen.iter()
                    .map(|(name, s)| {
                        json!({ "file": name, "clashes": clash_count(s, &poc, CLASH_TOLERANCE) })
                    })
                    .collect(),
            )
        }
        None => None,
    };

    let stats = summary_stats(&gen_structs)?;
    let ring_sizes: serde_json::Map<String, serde_json::Value> = stats
        .ring_size_counts
        .iter()
        .map(|(k, v)| (k.to_string(), json!(v)))
        .collect();
    let report = json!({
        "note": "geometric metrics: heuristic bond perception, planarity aromaticity proxy",
        "jsd_bits": jsd_table,
        "clashes": clashes,
        "summary": {
            "molecules": stats.molecules,
            "atoms_mean": stats.atoms_mean,
            "atoms_median": stats.atoms_median,
            "rings_per_molecule": stats.rings_per_molecule,
            "ring_size_counts": ring_sizes,
            "aromatic_atom_fraction_proxy": stats.aromatic_atom_fraction,
        },
    });
    std::fs::write(
        out.join("report.json"),
        serde_json::to_string_pretty(&report).expect("report serialization") + "\n",
    )?;

    let mut csv = BufWriter::new(File::create(out.join("report.csv"))?);
    writeln!(csv, "section,key,value")?;
    for (label, value) in report["jsd_bits"].as_object().unwrap() {
        let v = value.as_f64().map(|v| v.to_string()).unwrap_or_default();
        writeln!(csv, "jsd_bits,{label},{v}")?;
    }
    if let Some(rows) = &clashes {
        for row in rows {
            writeln!(
                csv,
                "clashes,{},{}",
                row["file"].as_str().unwrap(),
                row["clashes"]
            )?;
        }
    }
    writeln!(csv, "summary,molecules,{}", stats.molecules)?;
    writeln!(csv, "summary,atoms_mean,{}", stats.atoms_mean)?;
    writeln!(csv, "summary,atoms_median,{}", stats.atoms_median)?;
    writeln!(csv, "summary,rings_per_molecule,{}", stats.rings_per_molecule)?;
    writeln!(
        csv,
        "summary,aromatic_atom_fraction_proxy,{}",
        stats.aromatic_atom_fraction
    )?;
    csv.flush()?;
    println!("report -> {}", out.join("report.json").display());
    Ok(())
}

pub fn cmd_roundtrip(cfg: &RunConfig, input: &Path, out: Option<&Path>) -> Result<()> {
    if let Some(dir) = out {
        ensure_out_dir(dir, cfg)?;
    }
    let lig = parse_structure(input, StructureKind::Ligand)?;
    let center = lig.centroid()?;
    let centered = lig.translated([-center[0], -center[1], -center[2]]);
    let spec = cfg.ligand_spec()?;
    let (grid, oob) = voxelize(&centered, &spec, &RadiusTable::default())?;
    let report = roundtrip_report(&centered, &grid, &cfg.peak_config())?;
    println!(
        "matched={} rmsd={:.4} max_dist={:.4} spurious={} missed={} outside_grid={}",
        report.matched, report.rmsd, report.max_dist, report.spurious, report.missed, oob
    );
    Ok(())
}
