//! Command-line front end: one subcommand per pipeline stage, from sequence
//! validation and mesh building through metric evaluation and dataset
//! preparation.

use cadseq::cmdseq::{
    dequantize_sequence, detokenize, parse_sequence, parse_token_line, quantize_sequence,
    serialize_sequence, tokenize, validate_sequence, write_token_line,
};
use cadseq::data_pipeline::{
    augment_prefixes, augment_train_records, build_caption_request, camera_poses,
    caption_with_client, decimate_points, default_view_ids, derive_seed, perturb_points,
    read_manifest, split_dataset, write_manifest, CaptioningClient, DatasetRecord, ManifestEntry,
    PipelineConfig, Split, StubCaptionClient,
};
use cadseq::mesh_metrics::topo_report;
use cadseq::recon_metrics::{
    chamfer_distance_with, f_score_with, normal_consistency_with, read_ply, read_xyz,
    sample_surface, write_ply, write_xyz, ChamferVariant, NcVariant, NnMode, PointCloud,
};
use cadseq::solid_kernel::{execute_sequence, read_obj, weld_vertices, write_obj, TriMesh};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_IO: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_KERNEL: u8 = 3;

#[derive(Parser)]
#[command(
    name = "cadseq",
    version,
    about = "Sketch-and-extrude CAD sequences: build meshes, evaluate quality, prepare datasets"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum, Default)]
enum CloudFormat {
    #[default]
    Ply,
    Xyz,
}

#[derive(Clone, Copy, ValueEnum, Default)]
enum ChamferFlag {
    /// mean bidirectional L2 distance
    #[default]
    L2,
    /// mean bidirectional squared L2 distance
    SqL2,
}

#[derive(Clone, Copy, ValueEnum, Default)]
enum NcFlag {
    /// absolute cosine (unoriented)
    #[default]
    Abs,
    /// signed cosine
    Signed,
}

#[derive(Clone, Copy, ValueEnum, Default, PartialEq)]
enum WeldFlag {
    #[default]
    On,
    Off,
}

#[derive(Args, Clone)]
struct EvalOptions {
    /// surface samples per mesh
    #[arg(long, default_value_t = 8192)]
    points: usize,
    /// F-score distance threshold in the normalized frame
    #[arg(long, default_value_t = 0.05)]
    tau: f64,
    /// arc discretization: segments per full turn
    #[arg(long, default_value_t = 64)]
    n_arc: usize,
    /// sampling seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// chamfer distance variant
    #[arg(long, value_enum, default_value_t)]
    chamfer: ChamferFlag,
    /// normal consistency variant
    #[arg(long, value_enum, default_value_t)]
    nc: NcFlag,
    /// merge vertices within 1e-9 before computing metrics
    #[arg(long, value_enum, default_value_t)]
    weld: WeldFlag,
    /// worker threads for batch evaluation
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// force exhaustive (non-indexed) metric paths
    #[arg(long)]
    oracle: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Check a sequence file against the language invariants
    Validate {
        /// sequence JSON file
        seq: PathBuf,
    },
    /// Execute a sequence into a watertight OBJ mesh
    Build {
        seq: PathBuf,
        out: PathBuf,
        /// arc discretization: segments per full turn
        #[arg(long, default_value_t = 64)]
        n_arc: usize,
    },
    /// Evaluate generated against ground-truth models as a metrics CSV row
    Eval {
        /// ground-truth model (sequence JSON or OBJ)
        #[arg(long, required_unless_present = "manifest", conflicts_with = "manifest")]
        gt: Option<PathBuf>,
        /// generated model (sequence JSON or OBJ)
        #[arg(long, requires = "gt")]
        r#gen: Option<PathBuf>,
        /// batch mode: JSON-lines with {"id", "gt", "gen"} per line
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[command(flatten)]
        options: EvalOptions,
    },
    /// Quantize a sequence and print its token ids (one line)
    Tokenize {
        seq: PathBuf,
        /// output token file (stdout when omitted)
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Decode token lines back into sequence JSON (one JSON per line)
    Detokenize {
        tokens: PathBuf,
        /// output file (stdout when omitted)
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Write every prefix of a sequence as its own design
    Augment {
        seq: PathBuf,
        /// directory for the prefix sequence files
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Assign train/test splits to a manifest of pre-augmentation roots
    Split {
        /// manifest of root records (JSON-lines)
        #[arg(long)]
        manifest: PathBuf,
        /// training fraction
        #[arg(long, default_value_t = 0.9)]
        ratio: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// expand training records into their prefixes after splitting
        #[arg(long)]
        augment_train: bool,
        /// output manifest (stdout when omitted)
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Sample a point cloud with normals from a model
    Sample {
        /// sequence JSON or OBJ file
        input: PathBuf,
        #[arg(long, default_value_t = 8192)]
        points: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 64)]
        n_arc: usize,
        #[arg(long, value_enum, default_value_t)]
        format: CloudFormat,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Add Gaussian noise to a point cloud
    Perturb {
        /// input cloud (.ply or .xyz)
        input: PathBuf,
        /// noise standard deviation
        #[arg(long)]
        sigma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Randomly remove a fraction of a point cloud
    Decimate {
        /// input cloud (.ply or .xyz)
        input: PathBuf,
        /// fraction of points to remove, in [0, 1)
        #[arg(long)]
        fraction: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Print the eight fixed camera poses as JSON
    Poses,
    /// Prepare caption requests (and optional offline stub captions)
    CaptionPrep {
        /// manifest of records to caption (JSON-lines)
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// key=value config for the captioning client
        #[arg(long)]
        config: Option<PathBuf>,
        /// produce deterministic captions with the built-in stub client
        #[arg(long)]
        stub_captions: bool,
        /// output file (stdout when omitted)
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn io(e: impl std::fmt::Display) -> CliError {
        CliError {
            code: EXIT_IO,
            message: e.to_string(),
        }
    }

    fn validation(e: impl std::fmt::Display) -> CliError {
        CliError {
            code: EXIT_VALIDATION,
            message: e.to_string(),
        }
    }

    fn kernel(e: impl std::fmt::Display) -> CliError {
        CliError {
            code: EXIT_KERNEL,
            message: e.to_string(),
        }
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.message);
            ExitCode::from(e.code)
        }
    }
}

fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))
}

fn write_output(path: Option<&Path>, contents: &str) -> Result<(), CliError> {
    match path {
        Some(p) => {
            std::fs::write(p, contents).map_err(|e| CliError::io(format!("{}: {e}", p.display())))
        }
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

fn load_sequence(path: &Path) -> Result<cadseq::cmdseq::CadSequence, CliError> {
    let text = read_file(path)?;
    parse_sequence(&text).map_err(CliError::validation)
}

/// Sequences are executed into meshes; OBJ files are used directly.
fn load_mesh(path: &Path, n_arc: usize, weld: bool) -> Result<TriMesh, CliError> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
        .to_ascii_lowercase();
    let mesh = match ext.as_str() {
        "obj" => read_obj(&read_file(path)?).map_err(CliError::validation)?,
        _ => {
            let seq = load_sequence(path)?;
            execute_sequence(&seq, n_arc).map_err(CliError::kernel)?
        }
    };
    Ok(if weld { weld_vertices(&mesh, 1e-9) } else { mesh })
}

fn load_cloud(path: &Path) -> Result<PointCloud, CliError> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
        .to_ascii_lowercase();
    match ext.as_str() {
        "ply" => {
            let bytes = std::fs::read(path)
                .map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
            read_ply(&bytes).map_err(CliError::validation)
        }
        _ => read_xyz(&read_file(path)?).map_err(CliError::validation),
    }
}

fn write_cloud(path: &Path, cloud: &PointCloud, format: CloudFormat) -> Result<(), CliError> {
    match format {
        CloudFormat::Ply => std::fs::write(path, write_ply(cloud)),
        CloudFormat::Xyz => std::fs::write(path, write_xyz(cloud)),
    }
    .map_err(|e| CliError::io(format!("{}: {e}", path.display())))
}

fn cloud_format_of(path: &Path) -> CloudFormat {
    match path.extension().and_then(|e| e.to_str()) {
        Some("ply") => CloudFormat::Ply,
        _ => CloudFormat::Xyz,
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Validate { seq } => cmd_validate(&seq),
        Command::Build { seq, out, n_arc } => cmd_build(&seq, &out, n_arc),
        Command::Eval {
            gt,
            r#gen,
            manifest,
            options,
        } => cmd_eval(gt.as_deref(), r#gen.as_deref(), manifest.as_deref(), &options),
        Command::Tokenize { seq, out } => cmd_tokenize(&seq, out.as_deref()),
        Command::Detokenize { tokens, out } => cmd_detokenize(&tokens, out.as_deref()),
        Command::Augment { seq, out_dir } => cmd_augment(&seq, &out_dir),
        Command::Split {
            manifest,
            ratio,
            seed,
            augment_train,
            out,
        } => cmd_split(&manifest, ratio, seed, augment_train, out.as_deref()),
        Command::Sample {
            input,
            points,
            seed,
            n_arc,
            format,
            out,
        } => {
            let mesh = load_mesh(&input, n_arc, true)?;
            let cloud = sample_surface(&mesh, points, seed).map_err(CliError::kernel)?;
            write_cloud(&out, &cloud, format)
        }
        Command::Perturb {
            input,
            sigma,
            seed,
            out,
        } => {
            let cloud = load_cloud(&input)?;
            let cloud = perturb_points(&cloud, sigma, seed).map_err(CliError::validation)?;
            write_cloud(&out, &cloud, cloud_format_of(&out))
        }
        Command::Decimate {
            input,
            fraction,
            seed,
            out,
        } => {
            let cloud = load_cloud(&input)?;
            let cloud = decimate_points(&cloud, fraction, seed).map_err(CliError::validation)?;
            write_cloud(&out, &cloud, cloud_format_of(&out))
        }
        Command::Poses => {
            let poses: Vec<_> = camera_poses()
                .iter()
                .map(|p| json!({ "position": p.position, "look_at": p.look_at, "up": p.up }))
                .collect();
            println!("{}", serde_json::to_string_pretty(&poses).unwrap());
            Ok(())
        }
        Command::CaptionPrep {
            manifest,
            seed,
            config,
            stub_captions,
            out,
        } => cmd_caption_prep(&manifest, seed, config.as_deref(), stub_captions, out.as_deref()),
    }
}

fn cmd_validate(seq_path: &Path) -> Result<(), CliError> {
    let seq = load_sequence(seq_path)?;
    let violations = validate_sequence(&seq);
    if violations.is_empty() {
        println!("ok");
        return Ok(());
    }
    for v in &violations {
        eprintln!("{v}");
    }
    Err(CliError {
        code: EXIT_VALIDATION,
        message: format!("{} violation(s)", violations.len()),
    })
}

fn cmd_build(seq_path: &Path, out: &Path, n_arc: usize) -> Result<(), CliError> {
    let seq = load_sequence(seq_path)?;
    let violations = validate_sequence(&seq);
    if !violations.is_empty() {
        for v in &violations {
            eprintln!("{v}");
        }
        return Err(CliError {
            code: EXIT_VALIDATION,
            message: format!("{} violation(s)", violations.len()),
        });
    }
    let mesh = execute_sequence(&seq, n_arc).map_err(CliError::kernel)?;
    std::fs::write(out, write_obj(&mesh))
        .map_err(|e| CliError::io(format!("{}: {e}", out.display())))
}

const CSV_HEADER: &str =
    "id,chamfer_x100,fscore_x100,normalc_x100,sege,dangel,sir_pct,fluxee_x100";

struct MetricsRow {
    id: String,
    values: [f64; 7],
}

impl MetricsRow {
    fn to_csv(&self) -> String {
        let vals: Vec<String> = self.values.iter().map(|v| format!("{v}")).collect();
        format!("{},{}", self.id, vals.join(","))
    }
}

fn eval_pair(
    id: &str,
    gt_path: &Path,
    gen_path: &Path,
    options: &EvalOptions,
    seed: u64,
) -> Result<MetricsRow, CliError> {
    let weld = options.weld == WeldFlag::On;
    let gt = load_mesh(gt_path, options.n_arc, weld)?;
    let gen = load_mesh(gen_path, options.n_arc, weld)?;

    let topo = topo_report(&gt, &gen).map_err(CliError::kernel)?;

    let mode = if options.oracle {
        NnMode::Brute
    } else {
        NnMode::Indexed
    };
    let (chamfer, fscore, normalc) = if gen.is_empty() {
        (f64::NAN, 0.0, 0.0)
    } else {
        let gt_cloud = sample_surface(&gt, options.points, seed).map_err(CliError::kernel)?;
        let gen_cloud = sample_surface(&gen, options.points, seed).map_err(CliError::kernel)?;
        let (gt_cloud, gen_cloud) = cadseq::recon_metrics::normalize_pair(&gt_cloud, &gen_cloud)
            .map_err(CliError::kernel)?;
        let variant = match options.chamfer {
            ChamferFlag::L2 => ChamferVariant::L2,
            ChamferFlag::SqL2 => ChamferVariant::SqL2,
        };
        let nc_variant = match options.nc {
            NcFlag::Abs => NcVariant::Abs,
            NcFlag::Signed => NcVariant::Signed,
        };
        let chamfer = chamfer_distance_with(&gt_cloud, &gen_cloud, variant, mode)
            .map_err(CliError::kernel)?;
        let fscore =
            f_score_with(&gt_cloud, &gen_cloud, options.tau, mode).map_err(CliError::kernel)?;
        let normalc = normal_consistency_with(&gt_cloud, &gen_cloud, nc_variant, mode)
            .map_err(CliError::kernel)?;
        (chamfer, fscore, normalc)
    };

    Ok(MetricsRow {
        id: id.to_string(),
        values: [
            chamfer * 100.0,
            fscore * 100.0,
            normalc * 100.0,
            topo.seg_error,
            topo.dangel,
            topo.sir * 100.0,
            topo.fluxee * 100.0,
        ],
    })
}

#[derive(serde::Deserialize)]
struct EvalJobEntry {
    id: String,
    gt: String,
    r#gen: String,
}

fn cmd_eval(
    gt: Option<&Path>,
    gen: Option<&Path>,
    manifest: Option<&Path>,
    options: &EvalOptions,
) -> Result<(), CliError> {
    println!("{CSV_HEADER}");
    if let Some(manifest) = manifest {
        let text = read_file(manifest)?;
        let jobs: Vec<EvalJobEntry> = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str(l).map_err(CliError::validation))
            .collect::<Result<_, _>>()?;
        let base = manifest.parent().unwrap_or(Path::new("."));
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(options.jobs.max(1))
            .build()
            .map_err(CliError::io)?;
        let results: Vec<Result<MetricsRow, CliError>> = pool.install(|| {
            use rayon::prelude::*;
            jobs.par_iter()
                .map(|job| {
                    eval_pair(
                        &job.id,
                        &base.join(&job.gt),
                        &base.join(&job.r#gen),
                        options,
                        derive_seed(options.seed, &job.id),
                    )
                })
                .collect()
        });
        let mut ok_rows = Vec::new();
        let mut failures = 0usize;
        for (job, result) in jobs.iter().zip(results) {
            match result {
                Ok(row) => {
                    println!("{}", row.to_csv());
                    ok_rows.push(row);
                }
                Err(e) => {
                    failures += 1;
                    println!("{},,,,,,,,{}", job.id, e.message.replace([',', '\n'], " "));
                }
            }
        }
        if !ok_rows.is_empty() {
            let n = ok_rows.len() as f64;
            let mut mean = [0.0f64; 7];
            for row in &ok_rows {
                for k in 0..7 {
                    mean[k] += row.values[k] / n;
                }
            }
            println!(
                "{}",
                MetricsRow {
                    id: "mean".into(),
                    values: mean
                }
                .to_csv()
            );
        }
        if !jobs.is_empty() && failures == jobs.len() {
            return Err(CliError::kernel("every evaluation row failed"));
        }
        return Ok(());
    }
    let gt = gt.expect("clap enforces gt without manifest");
    let gen = gen.ok_or_else(|| CliError::validation("--gen is required with --gt"))?;
    let row = eval_pair("pair", gt, gen, options, options.seed)?;
    println!("{}", row.to_csv());
    Ok(())
}

fn cmd_tokenize(seq_path: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let seq = load_sequence(seq_path)?;
    let vseq = quantize_sequence(&seq).map_err(CliError::validation)?;
    let line = write_token_line(&tokenize(&vseq));
    write_output(out, &format!("{line}\n"))
}

fn cmd_detokenize(tokens_path: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let text = read_file(tokens_path)?;
    let mut output = String::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let stream = parse_token_line(line).map_err(CliError::validation)?;
        let vseq = detokenize(&stream).map_err(CliError::validation)?;
        let seq = dequantize_sequence(&vseq).map_err(CliError::validation)?;
        output.push_str(&serialize_sequence(&seq));
        output.push('\n');
    }
    write_output(out, &output)
}

fn cmd_augment(seq_path: &Path, out_dir: &Path) -> Result<(), CliError> {
    let seq = load_sequence(seq_path)?;
    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::io(format!("{}: {e}", out_dir.display())))?;
    let stem = seq_path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("design");
    let prefixes = augment_prefixes(&seq);
    let count = prefixes.len();
    for (i, prefix) in prefixes.iter().enumerate() {
        let path = out_dir.join(format!("{stem}.p{}.json", i + 1));
        std::fs::write(&path, serialize_sequence(prefix))
            .map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
    }
    println!("{count}");
    Ok(())
}

fn cmd_split(
    manifest_path: &Path,
    ratio: f64,
    seed: u64,
    augment_train: bool,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let text = read_file(manifest_path)?;
    let entries = read_manifest(&text).map_err(CliError::validation)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));

    let mut records = Vec::with_capacity(entries.len());
    let mut paths = std::collections::BTreeMap::new();
    for e in &entries {
        let seq = load_sequence(&base.join(&e.path))?;
        paths.insert(e.id.clone(), e.path.clone());
        records.push(DatasetRecord {
            id: e.id.clone(),
            root_id: e.root_id.clone(),
            sequence: seq,
            split: Split::Unassigned,
        });
    }
    let records = split_dataset(records, ratio, seed).map_err(CliError::validation)?;
    let records = if augment_train {
        augment_train_records(&records)
    } else {
        records
    };

    let mut out_entries = Vec::with_capacity(records.len());
    for r in &records {
        let path = match paths.get(&r.id) {
            Some(path) => path.clone(),
            None => {
                // augmented prefix: write its sequence next to the root's file
                let root_path = Path::new(&paths[&r.root_id]);
                let stem = root_path
                    .file_stem()
                    .and_then(|s| s.to_str())
                    .unwrap_or("design");
                let suffix = r.id.rsplit("#p").next().unwrap_or("1");
                let rel = root_path.with_file_name(format!("{stem}.p{suffix}.json"));
                std::fs::write(base.join(&rel), serialize_sequence(&r.sequence))
                    .map_err(|e| CliError::io(format!("{}: {e}", rel.display())))?;
                rel.to_string_lossy().into_owned()
            }
        };
        out_entries.push(ManifestEntry {
            id: r.id.clone(),
            root_id: r.root_id.clone(),
            split: r.split,
            path,
        });
    }
    write_output(out, &write_manifest(&out_entries))
}

fn cmd_caption_prep(
    manifest_path: &Path,
    seed: u64,
    config: Option<&Path>,
    stub_captions: bool,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let text = read_file(manifest_path)?;
    let entries = read_manifest(&text).map_err(CliError::validation)?;
    let cfg = match config {
        Some(path) => PipelineConfig::from_str(&read_file(path)?).map_err(CliError::validation)?,
        None => PipelineConfig::default(),
    };
    let views = default_view_ids();
    let stub = StubCaptionClient;
    let client: Option<&dyn CaptioningClient> = if stub_captions { Some(&stub) } else { None };

    let mut output = String::new();
    for e in &entries {
        let req = build_caption_request(&views, derive_seed(seed, &e.id))
            .map_err(CliError::validation)?;
        let mut record = json!({
            "id": e.id,
            "prompt": req.prompt,
            "image_refs": req.image_refs,
            "required_prefix": req.required_prefix,
        });
        if let Some(client) = client {
            let caption =
                caption_with_client(&req, client, cfg.retries).map_err(CliError::kernel)?;
            record["caption"] = json!(caption);
        }
        output.push_str(&serde_json::to_string(&record).unwrap());
        output.push('\n');
    }
    write_output(out, &output)
}
