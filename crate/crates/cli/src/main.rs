//! `pftrack`: template generation, synthetic sequences, tracking and
//! evaluation from the command line.
//!
//! Exit codes: 0 on success, 1 when tracking is lost without a reset
//! policy, 2 on I/O or argument errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use pftrack::bench::{
    default_camera, default_start_pose, evaluate, format_trajectory_csv, generate_synthetic_sequence, load_sequence,
    parse_pose_file, parse_trajectory_csv, run_sequence, MetricReport, PoseUnits, ResetPolicy, SceneStyle, Sequence,
    TrajectorySpec, Variant, ADD_THRESHOLDS,
};
use pftrack::config::TrackerConfig;
use pftrack::tracker::Tracker;
use pftrack::viewpoint::{generate_model, TemplateParams, ViewpointModel};
use pftrack::{Pose, TriangleMesh};

#[derive(Parser)]
#[command(name = "pftrack", version, about = "Monocular 6DoF object pose tracking")]
struct Cli {
    /// TOML file overriding tracker defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Print reports as JSON.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render viewpoint templates of a mesh.
    GenTemplates {
        mesh: PathBuf,
        out: PathBuf,
        /// Icosphere subdivision level.
        #[arg(long, default_value_t = 3)]
        views: u32,
        /// Camera distance in meters; defaults to 2.5 bounding diameters.
        #[arg(long)]
        radius: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Render a synthetic orbit sequence.
    Synth {
        mesh: PathBuf,
        out: PathBuf,
        /// regular, noise, light or occlusion.
        #[arg(long, default_value = "regular")]
        variant: String,
        #[arg(long, default_value_t = 200)]
        frames: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Object distance in meters; defaults to 8 bounding radii.
        #[arg(long)]
        distance: Option<f64>,
    },
    /// Track a sequence and write the trajectory CSV.
    Track {
        seq: PathBuf,
        mesh: PathBuf,
        templates: PathBuf,
        /// `gt` or a pose file whose first pose starts the track.
        #[arg(long, default_value = "gt")]
        init: String,
        #[arg(long)]
        out: PathBuf,
        /// reset (restore ground truth after failures) or no_reset.
        #[arg(long, default_value = "no_reset")]
        policy: String,
    },
    /// Score a trajectory against the sequence ground truth.
    Eval {
        seq: PathBuf,
        trajectory: PathBuf,
        #[arg(long, default_value = "reset")]
        policy: String,
    },
    /// Track and score sequences, generating templates on the fly.
    Bench {
        #[arg(required = true)]
        seqs: Vec<PathBuf>,
        #[arg(long, default_value = "reset")]
        policy: String,
        #[arg(long, default_value_t = 3)]
        views: u32,
        /// Template camera distance; defaults to the distance in the first
        /// ground-truth pose.
        #[arg(long)]
        radius: Option<f64>,
    },
}

/// Tracking lost without a reset policy to recover from it.
#[derive(Debug)]
struct Lost(usize);

impl std::fmt::Display for Lost {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "tracking lost on {} frame(s)", self.0)
    }
}

impl std::error::Error for Lost {}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<Lost>() => {
            eprintln!("pftrack: {e}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("pftrack: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let config = match &cli.config {
        Some(p) => TrackerConfig::load(p).with_context(|| format!("config {}", p.display()))?,
        None => TrackerConfig::default(),
    };
    match cli.command {
        Command::GenTemplates { mesh, out, views, radius, seed } => {
            let mesh = load_mesh(&mesh)?;
            let params = TemplateParams {
                subdivision_level: views,
                radius,
                n_cnt: config.n_cnt,
                n_in: config.n_in,
                seed,
                ..Default::default()
            };
            let model = generate_model(&mesh, &params).context("generating templates")?;
            model.save(&out).with_context(|| format!("writing {}", out.display()))?;
            println!("wrote {} views to {}", model.views.len(), out.display());
        }
        Command::Synth { mesh, out, variant, frames, seed, distance } => {
            let variant = Variant::parse(&variant).with_context(|| format!("unknown variant {variant:?}"))?;
            if frames == 0 {
                bail!("--frames must be positive");
            }
            let mesh = load_mesh(&mesh)?;
            let distance = distance.unwrap_or(8.0 * mesh.bounding_radius());
            let style = SceneStyle::default();
            let k = default_camera(style.width, style.height);
            let poses = TrajectorySpec::orbit(frames, default_start_pose(distance)).poses();
            let seq = generate_synthetic_sequence(&mesh, &k, &poses, variant, &style, seed, &out)
                .with_context(|| format!("rendering into {}", out.display()))?;
            println!("wrote {} frames to {}", seq.len(), out.display());
        }
        Command::Track { seq, mesh, templates, init, out, policy } => {
            let policy = parse_policy(&policy)?;
            let seq = open_sequence(&seq)?;
            let mesh = load_mesh(&mesh)?;
            let model = ViewpointModel::load(&templates).with_context(|| format!("templates {}", templates.display()))?;
            let init = initial_pose(&seq, &init)?;
            let tracker = Tracker::new(mesh, model, seq.intrinsics, config)?;
            let run = run_sequence(&tracker, &seq, &init, policy, |_| {})?;
            std::fs::write(&out, format_trajectory_csv(&run.trajectory))
                .with_context(|| format!("writing {}", out.display()))?;
            println!("tracked {} frames, {} resets, {} lost", run.trajectory.len(), run.resets, run.lost_frames.len());
            if policy == ResetPolicy::NoReset && !run.lost_frames.is_empty() {
                return Err(Lost(run.lost_frames.len()).into());
            }
        }
        Command::Eval { seq, trajectory, policy } => {
            let policy = parse_policy(&policy)?;
            let seq = open_sequence(&seq)?;
            let src = std::fs::read_to_string(&trajectory).with_context(|| format!("reading {}", trajectory.display()))?;
            let rows = parse_trajectory_csv(&src)?;
            let mesh = sequence_mesh(&seq)?;
            let report = evaluate(seq.ground_truth()?, &rows, policy, mesh.vertices(), mesh.diameter())?;
            print_report(&report, cli.json)?;
        }
        Command::Bench { seqs, policy, views, radius } => {
            let policy = parse_policy(&policy)?;
            let mut table = Vec::new();
            let mut lost = 0;
            for path in &seqs {
                let seq = open_sequence(path)?;
                let mesh = sequence_mesh(&seq)?;
                let gt = seq.ground_truth()?;
                let params = TemplateParams {
                    subdivision_level: views,
                    radius: Some(radius.unwrap_or(gt[0].translation.norm())),
                    n_cnt: config.n_cnt,
                    n_in: config.n_in,
                    ..Default::default()
                };
                let model = generate_model(&mesh, &params).context("generating templates")?;
                let tracker = Tracker::new(mesh.clone(), model, seq.intrinsics, config.clone())?;
                let quiet = cli.json;
                let run = run_sequence(&tracker, &seq, &gt[0], policy, |row| {
                    if !quiet {
                        println!("{} frame {}: {:.2} ms", path.display(), row.frame, row.runtime_ms);
                    }
                })?;
                lost += if policy == ResetPolicy::NoReset { run.lost_frames.len() } else { 0 };
                let report = evaluate(gt, &run.trajectory, policy, mesh.vertices(), mesh.diameter())?;
                table.push((path.display().to_string(), report));
            }
            if cli.json {
                let reports: Vec<_> = table.iter().map(|(p, r)| serde_json::json!({ "sequence": p, "report": r })).collect();
                println!("{}", serde_json::to_string_pretty(&reports)?);
            } else {
                print_table(&table);
            }
            if lost > 0 {
                return Err(Lost(lost).into());
            }
        }
    }
    Ok(())
}

fn load_mesh(path: &Path) -> Result<TriangleMesh> {
    TriangleMesh::load_obj(path).with_context(|| format!("mesh {}", path.display()))
}

fn open_sequence(path: &Path) -> Result<Sequence> {
    load_sequence(path).with_context(|| format!("sequence {}", path.display()))
}

fn sequence_mesh(seq: &Sequence) -> Result<TriangleMesh> {
    seq.load_mesh().with_context(|| format!("mesh of sequence {}", seq.root.display()))
}

fn parse_policy(s: &str) -> Result<ResetPolicy> {
    ResetPolicy::parse(s).with_context(|| format!("unknown policy {s:?} (reset or no_reset)"))
}

fn initial_pose(seq: &Sequence, init: &str) -> Result<Pose> {
    if init == "gt" {
        return Ok(seq.ground_truth().context("--init gt needs ground truth")?[0]);
    }
    let src = std::fs::read_to_string(init).with_context(|| format!("reading {init}"))?;
    let poses = parse_pose_file(&src, PoseUnits::Meters).with_context(|| format!("pose file {init}"))?;
    poses.first().copied().with_context(|| format!("pose file {init} is empty"))
}

fn print_report(report: &MetricReport, json: bool) -> Result<()> {
    if json {
        println!("{}", serde_json::to_string_pretty(report)?);
        return Ok(());
    }
    println!("frames: {}", report.per_frame.len());
    println!("success_rate: {:.1}", report.success_rate);
    println!("auc: {:.2}", report.auc);
    for k in ADD_THRESHOLDS {
        println!("add_{k}: {:.1}", report.add_fractions.get(&format!("{k}")).copied().unwrap_or(0.0));
    }
    println!("resets: {}", report.resets);
    println!("mean_runtime_ms: {:.2}", report.mean_runtime_ms);
    Ok(())
}

fn print_table(rows: &[(String, MetricReport)]) {
    println!();
    println!("{:<32} {:>7} {:>9} {:>7} {:>8} {:>7} {:>9}", "sequence", "frames", "success%", "auc", "add0.1%", "resets", "mean ms");
    for (name, r) in rows {
        println!(
            "{:<32} {:>7} {:>9.1} {:>7.2} {:>8.1} {:>7} {:>9.2}",
            name,
            r.per_frame.len(),
            r.success_rate,
            r.auc,
            r.add_fractions.get("0.1").copied().unwrap_or(0.0),
            r.resets,
            r.mean_runtime_ms
        );
    }
}
