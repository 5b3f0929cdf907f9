//! Command-line front end: single runs, batches, scene renders and image
//! inspection. Exit codes are 0 on success, 1 on usage or config errors
//! and 2 on runtime failures.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use pollisim::geometry::{from_axes, Pose6D};
use pollisim::global::plan_waypoint;
use pollisim::micro::{count_pollen, focus_score};
use pollisim::pipeline::{run_batch, run_scene, write_dumps, BatchReport, ScenarioConfig};
use pollisim::raster::{BoundingBox, Image};
use pollisim::rig;
use pollisim::scene::{generate_scene, render_color, render_depth, render_microscope_sharp, MicroscopeState};
use pollisim::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "pollisim", version, about = "Seeded simulator for a three-scope strawberry pollination pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run every stage on one seeded scene.
    Run(Common),
    /// Run a seeded ensemble of scenes and report conditional stage rates.
    Batch {
        #[command(flatten)]
        common: Common,
        /// Number of scenes; defaults to `n_scenes` from the config.
        #[arg(long)]
        scenes: Option<usize>,
    },
    /// Write the camera views of a seeded scene as image files.
    Render(Common),
    /// Count pollen pixels and score focus on a PPM image.
    Inspect {
        #[arg(long, value_name = "PATH")]
        image: PathBuf,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Debug, Args)]
struct Common {
    /// Scenario config (JSON); defaults apply to missing keys.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Scene seed; defaults to `base_seed` from the config.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Output directory for reports and images.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Also write intermediate camera images.
    #[arg(long)]
    dump_images: bool,
    /// Print JSON instead of text.
    #[arg(long)]
    json: bool,
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) => Failure::Config(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(Failure::Config(msg)) => {
            eprintln!("pollisim: {msg}");
            EXIT_CONFIG
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("pollisim: {msg}");
            EXIT_RUNTIME
        }
    }
}

fn load_config(common: &Common) -> Result<ScenarioConfig, Failure> {
    let mut config = match &common.config {
        Some(path) => ScenarioConfig::load(path)?,
        None => ScenarioConfig::default(),
    };
    if let Some(out) = &common.out {
        config.output_dir = Some(out.clone());
    }
    config.dump_images |= common.dump_images;
    config.validate()?;
    Ok(config)
}

fn execute(command: Command) -> Result<(), Failure> {
    match command {
        Command::Run(common) => {
            let config = load_config(&common)?;
            let seed = common.seed.unwrap_or(config.base_seed);
            let run = run_scene(&config, seed)?;
            let batch = BatchReport::from_reports(run.reports);
            if let Some(dir) = &config.output_dir {
                batch.write_to(dir)?;
                if config.dump_images {
                    write_dumps(&dir.join("images"), &run.dumps)?;
                }
            }
            if common.json {
                print!("{}", batch.to_json_lines()?);
            } else {
                for r in &batch.reports {
                    let status = match r.first_failure() {
                        None => "success".to_owned(),
                        Some((stage, reason)) => format!("failed at {}: {reason:?}", stage.label()),
                    };
                    println!("seed {} flower {}: {status}", r.scene_seed, r.flower_id);
                }
                print!("{}", batch.table);
            }
            Ok(())
        }
        Command::Batch { common, scenes } => {
            let config = load_config(&common)?;
            let seed = common.seed.unwrap_or(config.base_seed);
            let batch = run_batch(&config, scenes.unwrap_or(config.n_scenes), seed)?;
            if common.json {
                print!("{}", batch.to_json_lines()?);
            } else {
                print!("{}", batch.table);
            }
            Ok(())
        }
        Command::Render(common) => {
            let config = load_config(&common)?;
            let seed = common.seed.unwrap_or(config.base_seed);
            let dir = config.output_dir.clone().unwrap_or_else(|| PathBuf::from("."));
            let written = render_views(&config, seed, &dir)?;
            if common.json {
                println!("{}", serde_json::to_string(&written).map_err(Error::from)?);
            } else {
                for path in written {
                    println!("{path}");
                }
            }
            Ok(())
        }
        Command::Inspect { image, json } => {
            let img = Image::load_ppm(&image)?;
            let count = count_pollen(&img);
            let score = focus_score(&img, &BoundingBox::full(img.width(), img.height()))?;
            if json {
                println!("{}", serde_json::json!({ "pollen_count": count, "focus_score": score }));
            } else {
                println!("pollen count: {count}");
                println!("focus score: {score:.3}");
            }
            Ok(())
        }
    }
}

/// Wide view (color and depth), each flower's approach waypoint view and an
/// in-focus microscope view from just beneath each flower.
fn render_views(config: &ScenarioConfig, seed: u64, dir: &Path) -> Result<Vec<String>, Failure> {
    fs::create_dir_all(dir)?;
    let scene = generate_scene(&config.scene, seed)?;
    let cams = &config.cameras;
    let mut written = Vec::new();
    let mut save = |name: &str, img: &Image| -> Result<(), Failure> {
        let path = dir.join(name);
        img.save_ppm(&path)?;
        written.push(path.display().to_string());
        Ok(())
    };
    save("global.ppm", &render_color(&scene, &cams.global, &cams.global_pose))?;
    let tool = &config.tool;
    for f in &scene.flowers {
        let endo = plan_waypoint(cams.global_pose.translation(), &f.center, config.waypoint_fraction)?;
        save(&format!("endoscope_f{}.ppm", f.id), &render_color(&scene, &cams.endoscope, &endo))?;
        let (e1, e2, n) = f.local_axes();
        let under = Pose6D::new(from_axes(&e1, &e2, &n), f.center - tool.clearance * n, rig::BASE, rig::TOOL)?;
        let mic = tool.microscope_pose(&under, tool.slide_inspect)?;
        let view = render_microscope_sharp(&scene, &cams.microscope, &mic, &config.optics);
        let zoom = view.subject_distance.map_or(0.5, |d| config.optics.zoom_for(d));
        let state = MicroscopeState::new(tool.slide_inspect, zoom);
        save(&format!("microscope_f{}.ppm", f.id), &view.focused(&state, &config.optics))?;
    }
    let depth = render_depth(&scene, &cams.global, &cams.global_pose, 0.0);
    let depth_path = dir.join("global_depth.pgm");
    depth.save_pgm16(&depth_path)?;
    written.push(depth_path.display().to_string());
    let scene_path = dir.join("scene.json");
    fs::write(&scene_path, scene.to_json()?)?;
    written.push(scene_path.display().to_string());
    Ok(written)
}
