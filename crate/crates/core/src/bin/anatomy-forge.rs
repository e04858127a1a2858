use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};

use anatomy_forge::dataset::{stats_dir, validate_dir, Generator};
use anatomy_forge::nifti::{read_nifti, write_nifti, Datatype};
use anatomy_forge::phantom;
use anatomy_forge::relation::{load_graph, DEFAULT_GRAPH};
use anatomy_forge::shape_bank::BankOptions;
use anatomy_forge::{
    build_bank, fit_anchors, AnchorModel, AugmentParams, RelationGraph, RenderParams, ShapeBank,
    Subject, SynthesisConfig, Weights,
};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_VALIDATION: u8 = 3;

#[derive(Parser)]
#[command(name = "anatomy-forge", version, about = "Anatomy-informed synthetic 3D segmentation data generator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract per-class connected components from label volumes into a shape bank.
    BuildBank {
        #[command(flatten)]
        sources: SourceArgs,
        /// Output bank file; a `<out>.classes.txt` sidecar is written next to it.
        #[arg(long)]
        out: PathBuf,
        /// Smallest component kept, in voxels.
        #[arg(long, default_value_t = 8)]
        min_component: usize,
    },
    /// Fit per-class Gaussian centroid anchors to label volumes.
    FitAnchors {
        #[command(flatten)]
        sources: SourceArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate image/label pairs with JSON manifests.
    Synthesize(SynthesizeArgs),
    /// Check every scene in a directory against the relation graph.
    Validate {
        #[arg(long)]
        scenes: PathBuf,
        /// Relation-graph file; the built-in 32-class graph when omitted.
        #[arg(long)]
        graph: Option<PathBuf>,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Compare generated centroid statistics with the anchor model.
    Stats {
        #[arg(long)]
        scenes: PathBuf,
        #[arg(long)]
        anchors: PathBuf,
        /// Write the machine-readable report here as well as printing the table.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Write procedural 32-class torso phantom label volumes.
    Phantoms {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 5)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "96,96,96", value_parser = parse_dims)]
        dims: [usize; 3],
    },
}

#[derive(Args)]
struct SourceArgs {
    /// Label volumes (.nii / .nii.gz) or directories containing them.
    #[arg(long, num_args = 1.., required = true)]
    sources: Vec<PathBuf>,
    /// Raw labels to keep: a comma-separated list, or a file with one label per line.
    #[arg(long)]
    classes: String,
}

#[derive(Args)]
struct SynthesizeArgs {
    #[arg(long)]
    bank: PathBuf,
    #[arg(long)]
    anchors: PathBuf,
    /// Relation-graph file; the built-in 32-class graph when omitted.
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 1)]
    count: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Scene size as X,Y,Z (each >= 32).
    #[arg(long, default_value = "128,128,128", value_parser = parse_dims)]
    dims: [usize; 3],
    /// Candidates scored per instance.
    #[arg(long, default_value_t = 40)]
    n_candidates: usize,
    /// Candidate perturbation sd, normalized units.
    #[arg(long, default_value_t = 0.12)]
    perturb_sigma: f64,
    /// Instances per class.
    #[arg(long, default_value_t = 1)]
    instances: usize,
    /// Extra candidate batches after an all-rejected batch.
    #[arg(long, default_value_t = 5)]
    retry_budget: usize,
    /// Anchor-distance weight (graph value when omitted; built-in graph: 1.0).
    #[arg(long)]
    lambda_anc: Option<f64>,
    /// Overlap weight (built-in graph: 1.0).
    #[arg(long)]
    lambda_ovl: Option<f64>,
    /// Containment weight (built-in graph: 1.0).
    #[arg(long)]
    lambda_in: Option<f64>,
    /// Adjacency weight (built-in graph: 0.8).
    #[arg(long)]
    lambda_adj: Option<f64>,
    /// Override every containment threshold [graph default 0.30].
    #[arg(long)]
    tau_in: Option<f64>,
    /// Override every adjacency contact threshold [graph default 20].
    #[arg(long)]
    nu_contact: Option<u32>,
    /// Override every exclusion IoU threshold [graph default 0.35].
    #[arg(long)]
    tau_hard: Option<f64>,
    /// Per-axis flip probability.
    #[arg(long, default_value_t = 0.5)]
    flip_prob: f64,
    /// Disable the random axis-aligned rotation.
    #[arg(long)]
    no_rotation: bool,
    /// Rescale range as LO,HI.
    #[arg(long, default_value = "0.85,1.25", value_parser = parse_pair)]
    scale_range: [f64; 2],
    #[arg(long, default_value_t = 1)]
    shell_thickness: usize,
    /// Shell intensity range as LO,HI.
    #[arg(long, default_value = "0.3,1.0", value_parser = parse_pair)]
    intensity_range: [f64; 2],
    #[arg(long, default_value_t = 0.0)]
    background: f32,
    #[arg(long, default_value_t = 0.02)]
    noise_sigma: f32,
    /// Paint every shell with the midpoint of the intensity range.
    #[arg(long)]
    fixed_intensity: bool,
    /// Worker threads [default: available cores].
    #[arg(long, env = "ANATOMY_FORGE_JOBS")]
    jobs: Option<usize>,
}

fn parse_dims(s: &str) -> Result<[usize; 3], String> {
    let v: Vec<usize> = s
        .split(',')
        .map(|t| t.trim().parse::<usize>().map_err(|e| format!("{t:?}: {e}")))
        .collect::<Result<_, _>>()?;
    match v[..] {
        [d] => Ok([d; 3]),
        [x, y, z] => Ok([x, y, z]),
        _ => Err("expected X,Y,Z".into()),
    }
}

fn parse_pair(s: &str) -> Result<[f64; 2], String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}")))
        .collect::<Result<_, _>>()?;
    match v[..] {
        [a, b] => Ok([a, b]),
        _ => Err("expected LO,HI".into()),
    }
}

enum Failure {
    Usage(anyhow::Error),
    Data(anyhow::Error),
    Validation(String),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Data(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Data(e.into())
    }
}

impl From<anatomy_forge::Error> for Failure {
    fn from(e: anatomy_forge::Error) -> Self {
        Failure::Data(e.into())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_DATA)
        }
        Err(Failure::Validation(msg)) => {
            eprintln!("validation failed: {msg}");
            ExitCode::from(EXIT_VALIDATION)
        }
    }
}

fn run(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::BuildBank { sources, out, min_component } => {
            let (subjects, classes) = load_sources(&sources)?;
            let bank = build_bank(&subjects, &classes, BankOptions { min_component })?;
            bank.save(&out)?;
            let sidecar = sidecar_path(&out);
            std::fs::write(&sidecar, bank.class_map_text())?;
            println!("{:>5} {:>5} {:>8}", "class", "raw", "entries");
            for (&raw, &id) in bank.class_map() {
                println!("{id:>5} {raw:>5} {:>8}", bank.entries_of(id)?.count());
            }
            println!("wrote {} ({} entries, {} classes)", out.display(), bank.entries().len(), bank.num_classes());
            Ok(())
        }
        Command::FitAnchors { sources, out } => {
            let (subjects, classes) = load_sources(&sources)?;
            let class_map = classes.iter().enumerate().map(|(i, &raw)| (raw, i as u8 + 1)).collect();
            let model = fit_anchors(&subjects, &class_map)?;
            std::fs::write(&out, model.to_text())?;
            println!("wrote {} ({} classes from {} subjects)", out.display(), model.len(), subjects.len());
            Ok(())
        }
        Command::Synthesize(args) => synthesize(args),
        Command::Validate { scenes, graph, json } => {
            let n = dataset_classes(&scenes)?;
            let graph = load_graph_arg(graph.as_deref(), n)?;
            let v = validate_dir(&scenes, &graph)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&v).context("serializing report")?);
            } else {
                print_validation(&v);
            }
            if v.is_clean() {
                Ok(())
            } else {
                Err(Failure::Validation(format!(
                    "{} exclusion violations, {} label mismatches",
                    v.report.hard_violations(),
                    v.label_mismatches.len()
                )))
            }
        }
        Command::Stats { scenes, anchors, json } => {
            let anchors = load_anchors(&anchors)?;
            let report = stats_dir(&scenes, &anchors)?;
            print!("{}", report.table());
            if let Some(path) = json {
                std::fs::write(&path, serde_json::to_string_pretty(&report).context("serializing report")?)?;
            }
            Ok(())
        }
        Command::Phantoms { out_dir, count, seed, dims } => {
            std::fs::create_dir_all(&out_dir)?;
            for i in 0..count as u64 {
                let s = phantom::subject(dims, seed, i);
                write_nifti(&s.labels, &out_dir.join(format!("{}.nii.gz", s.id)), Datatype::Uint8)?;
            }
            let classes: Vec<String> = phantom::raw_labels().iter().map(u8::to_string).collect();
            std::fs::write(out_dir.join("classes.txt"), classes.join("\n") + "\n")?;
            println!("wrote {count} phantoms to {}", out_dir.display());
            Ok(())
        }
    }
}

fn synthesize(a: SynthesizeArgs) -> Result<(), Failure> {
    let config = SynthesisConfig {
        dims: a.dims,
        n_candidates: a.n_candidates,
        perturb_sigma: a.perturb_sigma,
        instances: anatomy_forge::placement::InstanceSchedule { default: a.instances, ..Default::default() },
        seed: a.seed,
        augment: AugmentParams {
            flip_prob: a.flip_prob,
            rotation_enabled: !a.no_rotation,
            scale_range: a.scale_range,
        },
        weights: None,
        tau_in: a.tau_in,
        nu_contact: a.nu_contact,
        tau_hard: a.tau_hard,
        retry_budget: a.retry_budget,
    };
    let render = RenderParams {
        shell_thickness: a.shell_thickness,
        intensity_range: a.intensity_range.map(|v| v as f32),
        background: a.background,
        noise_sigma: a.noise_sigma,
        per_instance_intensity: !a.fixed_intensity,
    };
    config.validate().map_err(|e| Failure::Usage(e.into()))?;
    render.validate().map_err(|e| Failure::Usage(e.into()))?;
    if a.jobs == Some(0) {
        return Err(Failure::Usage(anyhow!("--jobs must be >= 1")));
    }

    let bank = ShapeBank::load(&a.bank).with_context(|| format!("loading bank {}", a.bank.display()))?;
    let anchors = load_anchors(&a.anchors)?;
    let graph = load_graph_arg(a.graph.as_deref(), bank.num_classes())?;
    let overrides = [a.lambda_anc, a.lambda_ovl, a.lambda_in, a.lambda_adj];
    let config = if overrides.iter().any(Option::is_some) {
        let w = graph.weights;
        SynthesisConfig {
            weights: Some(Weights {
                anchor: a.lambda_anc.unwrap_or(w.anchor),
                overlap: a.lambda_ovl.unwrap_or(w.overlap),
                containment: a.lambda_in.unwrap_or(w.containment),
                adjacency: a.lambda_adj.unwrap_or(w.adjacency),
            }),
            ..config
        }
    } else {
        config
    };

    let generator = Generator::new(bank, anchors, graph, config, render)?;
    let jobs = a.jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let summary = generator.write_dataset(&a.out_dir, a.count, jobs)?;
    println!(
        "wrote {} pairs to {} in {:.2}s ({:.2} volumes/s, {} placements, {} skipped instances)",
        summary.scenes,
        a.out_dir.display(),
        summary.elapsed.as_secs_f64(),
        summary.volumes_per_second(),
        summary.placements,
        summary.skips
    );
    Ok(())
}

fn sidecar_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".classes.txt");
    PathBuf::from(s)
}

fn load_anchors(path: &Path) -> anyhow::Result<AnchorModel> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    AnchorModel::from_text(&text).with_context(|| format!("parsing {}", path.display()))
}

fn load_graph_arg(path: Option<&Path>, num_classes: usize) -> anyhow::Result<RelationGraph> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            load_graph(&text, num_classes).with_context(|| format!("parsing {}", p.display()))
        }
        None => load_graph(DEFAULT_GRAPH, num_classes).context("built-in graph"),
    }
}

/// Class count recorded in `dataset.json`, or the largest placed class id.
fn dataset_classes(dir: &Path) -> anyhow::Result<usize> {
    let manifests = anatomy_forge::manifest::list_manifests(dir)?;
    if manifests.is_empty() {
        anyhow::bail!("no scene manifests in {}", dir.display());
    }
    let index = dir.join("dataset.json");
    if index.exists() {
        let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&index)?)?;
        if let Some(n) = v.get("num_classes").and_then(|n| n.as_u64()) {
            return Ok(n as usize);
        }
    }
    let mut n = 0;
    for p in manifests {
        let m = anatomy_forge::manifest::SceneManifest::load(&p)?;
        n = m.placements.iter().map(|r| r.class_id as usize).fold(n, usize::max);
    }
    Ok(n)
}

fn parse_classes(arg: &str) -> anyhow::Result<Vec<u8>> {
    let path = Path::new(arg);
    let text = if path.is_file() {
        std::fs::read_to_string(path)?
    } else {
        arg.replace(',', "\n")
    };
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let Some(tok) = line.split('#').next().and_then(|l| l.split_whitespace().next()) else {
            continue;
        };
        let v: u8 = tok
            .parse()
            .with_context(|| format!("class list line {}: {tok:?} is not a label in 1..=255", i + 1))?;
        if v == 0 {
            anyhow::bail!("class list line {}: label 0 is background", i + 1);
        }
        out.push(v);
    }
    if out.is_empty() {
        anyhow::bail!("empty class list");
    }
    Ok(out)
}

fn is_nifti(p: &Path) -> bool {
    p.file_name()
        .and_then(|n| n.to_str())
        .is_some_and(|n| n.ends_with(".nii") || n.ends_with(".nii.gz"))
}

fn load_sources(args: &SourceArgs) -> Result<(Vec<Subject>, Vec<u8>), Failure> {
    let classes = parse_classes(&args.classes).map_err(Failure::Usage)?;
    let mut files = Vec::new();
    for s in &args.sources {
        if s.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(s)
                .with_context(|| format!("listing {}", s.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| is_nifti(p))
                .collect();
            found.sort();
            files.extend(found);
        } else {
            files.push(s.clone());
        }
    }
    if files.is_empty() {
        return Err(Failure::Data(anyhow!("no NIfTI label volumes found in the sources")));
    }
    let subjects = files
        .iter()
        .map(|f| {
            let labels = read_nifti(f)
                .with_context(|| format!("reading {}", f.display()))?
                .into_labels()
                .ok_or_else(|| anyhow!("{} holds an intensity volume, not labels", f.display()))?;
            let id = f.file_name().unwrap().to_string_lossy().into_owned();
            Ok(Subject { id, labels })
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    Ok((subjects, classes))
}

fn print_validation(v: &anatomy_forge::dataset::DirValidation) {
    let r = &v.report;
    println!("scenes:               {}", v.scenes);
    println!("exclusion checks:     {}", r.exclusion_checks);
    println!("exclusion violations: {}", r.hard_violations());
    for x in &r.exclusion_violations {
        println!("  step {} class {} vs {}: IoU {:.4} > {:.2}", x.step, x.class_id, x.other, x.iou, x.tau_hard);
    }
    let rate = |s: &anatomy_forge::placement::RelationStats| match s.rate() {
        Some(r) => format!("{:.1}% ({}/{}, {} unevaluated)", 100.0 * r, s.satisfied, s.evaluated, s.unevaluated),
        None => format!("n/a ({} unevaluated)", s.unevaluated),
    };
    println!("containment:          {}", rate(&r.containment));
    println!("adjacency:            {}", rate(&r.adjacency));
    if !r.anchor_residuals.is_empty() {
        let mut res = r.anchor_residuals.clone();
        res.sort_by(f64::total_cmp);
        let mean = res.iter().sum::<f64>() / res.len() as f64;
        println!(
            "anchor residual:      mean {:.4}, median {:.4}, max {:.4}",
            mean,
            res[res.len() / 2],
            res[res.len() - 1]
        );
    }
    println!("label mismatches:     {}", v.label_mismatches.len());
    for n in &v.label_mismatches {
        println!("  {n}");
    }
    if !v.missing_labels.is_empty() {
        println!("missing label files:  {}", v.missing_labels.len());
    }
}
