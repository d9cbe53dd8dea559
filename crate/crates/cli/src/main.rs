use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use telegrasp_cli::commands::{self, EXIT_ERROR};
use telegrasp_cli::config::SessionConfig;

#[derive(Parser)]
#[command(name = "telegrasp", version, about = "Spectral pose estimation, grasp planning and assisted teleoperation")]
struct Cli {
    /// Session configuration (TOML, or JSON by extension). Keys can be
    /// overridden with TELEGRASP_<SECTION>__<KEY> environment variables.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Scene seed; overrides the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ranked 6-DoF poses of a model in a scene cloud.
    EstimatePose { scene: PathBuf, model: PathBuf },
    /// Parallel-jaw grasps on an object cloud, checked against a scene cloud.
    PlanGrasps {
        object: PathBuf,
        scene: PathBuf,
        /// Gripper geometry JSON.
        #[arg(long)]
        gripper: Option<PathBuf>,
    },
    /// Re-ranks a grasp set along a hand path toward its best grasp.
    RerankDemo {
        grasps: PathBuf,
        #[arg(long, default_value_t = 10)]
        steps: usize,
    },
    /// Writes a clutter scene, its stitched cloud and the model clouds.
    GenScene {
        #[arg(long)]
        objects: Option<usize>,
    },
    /// Runs a scripted clearance episode headless.
    Simulate {
        /// Scene description JSON instead of a seeded clutter.
        #[arg(long)]
        scene: Option<PathBuf>,
        #[arg(long, default_value = "scripted")]
        policy: String,
        #[arg(long)]
        objects: Option<usize>,
    },
    /// Serves the live session over WebSocket.
    #[cfg(feature = "serve")]
    Serve {
        #[arg(long)]
        bind: Option<String>,
    },
}

fn run(cli: Cli) -> Result<i32> {
    let mut cfg = SessionConfig::load(cli.config.as_deref(), std::env::vars())?;
    if let Some(seed) = cli.seed {
        cfg.scene.seed = seed;
        cfg.scene.file = None;
    }
    let out = cli.out.clone();
    let mut stdout = std::io::stdout().lock();
    match cli.command {
        Command::EstimatePose { scene, model } => commands::estimate_pose(&cfg, &scene, &model, out.as_deref(), &mut stdout),
        Command::PlanGrasps { object, scene, gripper } => {
            commands::plan_grasps(&cfg, &object, &scene, gripper.as_deref(), out.as_deref(), &mut stdout)
        }
        Command::RerankDemo { grasps, steps } => commands::rerank_demo(&cfg, &grasps, steps, &mut stdout),
        Command::GenScene { objects } => {
            if objects.is_some() {
                cfg.scene.objects = objects;
            }
            commands::gen_scene(&cfg, &out.unwrap_or_else(commands::default_out_dir))
        }
        Command::Simulate { scene, policy, objects } => {
            if scene.is_some() {
                cfg.scene.file = scene;
            }
            if objects.is_some() {
                cfg.scene.objects = objects;
            }
            commands::simulate(&cfg, &policy, &out.unwrap_or_else(commands::default_out_dir))
        }
        #[cfg(feature = "serve")]
        Command::Serve { bind } => {
            if let Some(b) = bind {
                cfg.service.bind = b;
            }
            cfg.validate()?;
            tokio::runtime::Runtime::new()?.block_on(telegrasp_cli::service::serve(cfg))?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR as u8)
        }
    }
}
