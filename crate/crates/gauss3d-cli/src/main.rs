//! Command-line driver for the 3D Gaussian rasterizer.
//!
//! Subcommands: `render` (tile pipeline), `oracle-render` (brute-force
//! reference), `compare` (float-image directories), `stats` (culling
//! effectiveness), `synth` (deterministic synthetic scenes).
//!
//! Exit codes: 0 success, 1 comparison failure, 2 usage, 3 IO/parse.

use clap::{Args, Parser, Subcommand};
use gauss3d::filter;
use gauss3d::io::{self, CameraEntry, FloatImage};
use gauss3d::raster::{RenderConfig, RenderStats};
use gauss3d::{oracle, raster, synth, Camera, Gaussian, Vec3};
use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

#[derive(Parser)]
#[command(name = "gauss3d", version, about = "CPU tile-based 3D Gaussian rasterizer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render every selected camera with the tile pipeline.
    Render(RenderCmd),
    /// Render with the brute-force per-pixel reference.
    OracleRender(RenderCmd),
    /// Compare two directories of float images.
    Compare(CompareCmd),
    /// Print culling statistics per camera.
    Stats(SceneArgs),
    /// Generate a synthetic scene (PLY + ring cameras).
    Synth(SynthCmd),
}

#[derive(Args)]
struct SceneArgs {
    /// Scene point cloud (binary PLY, 3DGS layout).
    #[arg(long)]
    scene: PathBuf,
    /// Camera description file (JSON).
    #[arg(long)]
    cameras: PathBuf,
    /// Cameras defining the training sampling frequencies.
    #[arg(long)]
    train_cameras: Option<PathBuf>,
    /// Use all training cameras for the frequency bound, not only those that
    /// see the Gaussian.
    #[arg(long)]
    train_all_cameras: bool,
    /// Render only the camera with this id.
    #[arg(long)]
    camera_id: Option<u64>,
    /// Flat key=value config file; explicit flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Smoothing kernel size.
    #[arg(long)]
    k: Option<f64>,
    /// Squared Mahalanobis cutoff.
    #[arg(long)]
    tau_rho: Option<f64>,
    #[arg(long)]
    tile_size: Option<usize>,
    #[arg(long)]
    alpha_cutoff: Option<f64>,
    #[arg(long)]
    alpha_clamp: Option<f64>,
    #[arg(long)]
    transmittance_epsilon: Option<f64>,
    #[arg(long)]
    epsilon_angle: Option<f64>,
    /// Background color as `r,g,b` in [0, 1].
    #[arg(long)]
    background: Option<String>,
    /// Close tile frusta with the near plane (5-plane tile culling).
    #[arg(long)]
    tile_near_plane: bool,
    /// Divide focal lengths by this factor (enlarges the field of view).
    #[arg(long)]
    fov_scale: Option<f64>,
    /// Multiply resolution and principal point by this factor.
    #[arg(long)]
    res_scale: Option<f64>,
    /// Worker thread count; output never depends on it.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct RenderCmd {
    #[command(flatten)]
    scene: SceneArgs,
    /// Output directory for PNG and float images.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CompareCmd {
    dir_a: PathBuf,
    dir_b: PathBuf,
    /// Maximum allowed per-channel absolute difference.
    #[arg(long, default_value_t = 1e-6)]
    tolerance: f64,
}

#[derive(Args)]
struct SynthCmd {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of Gaussians.
    #[arg(long)]
    n: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 3)]
    num_cameras: usize,
    #[arg(long, default_value_t = 64)]
    width: u32,
    #[arg(long, default_value_t = 64)]
    height: u32,
    /// Focal length in pixels; defaults to the image width.
    #[arg(long)]
    focal: Option<f64>,
    #[arg(long, default_value_t = 2.0)]
    radius: f64,
    #[arg(long, default_value_t = 0.01)]
    near: f64,
}

enum CliError {
    Compare(String),
    Io(String),
}

impl CliError {
    fn report(&self) -> ExitCode {
        match self {
            CliError::Compare(msg) => {
                eprintln!("comparison failed: {msg}");
                ExitCode::from(1)
            }
            CliError::Io(msg) => {
                eprintln!("error: {msg}");
                ExitCode::from(3)
            }
        }
    }
}

fn io_err(e: impl std::fmt::Display) -> CliError {
    CliError::Io(e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        // clap exits 2 on usage errors and 0 for --help/--version.
        Err(e) => e.exit(),
    };
    let result = match cli.command {
        Command::Render(cmd) => cmd_render(cmd, false),
        Command::OracleRender(cmd) => cmd_render(cmd, true),
        Command::Compare(cmd) => cmd_compare(cmd),
        Command::Stats(args) => cmd_stats(args),
        Command::Synth(cmd) => cmd_synth(cmd),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => e.report(),
    }
}

/// Flat `key = value` file; `#` starts a comment.
fn load_config_file(path: &Path) -> Result<HashMap<String, String>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| io_err(format!("config file {}: {e}", path.display())))?;
    let mut map = HashMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(io_err(format!(
                "config file {} line {}: expected key = value",
                path.display(),
                lineno + 1
            )));
        };
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

fn parse_background(text: &str) -> Result<Vec3, CliError> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 3 {
        return Err(io_err(format!("background '{text}': expected r,g,b")));
    }
    let mut rgb = [0.0f64; 3];
    for (dst, part) in rgb.iter_mut().zip(parts.iter()) {
        *dst = part
            .trim()
            .parse()
            .map_err(|e| io_err(format!("background component '{part}': {e}")))?;
    }
    Ok(Vec3::new(rgb[0], rgb[1], rgb[2]))
}

struct ResolvedScene {
    gaussians: Vec<Gaussian>,
    cameras: Vec<CameraEntry>,
    config: RenderConfig,
}

fn resolve(args: &SceneArgs) -> Result<ResolvedScene, CliError> {
    let file_map = match &args.config {
        Some(path) => load_config_file(path)?,
        None => HashMap::new(),
    };
    fn pick<T: std::str::FromStr>(
        flag: Option<T>,
        file: &HashMap<String, String>,
        key: &str,
        default: T,
    ) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        if let Some(v) = flag {
            return Ok(v);
        }
        match file.get(key) {
            Some(raw) => raw
                .parse()
                .map_err(|e| io_err(format!("config key '{key}' = '{raw}': {e}"))),
            None => Ok(default),
        }
    }

    let defaults = RenderConfig::default();
    let background = match (&args.background, file_map.get("background")) {
        (Some(text), _) => parse_background(text)?,
        (None, Some(text)) => parse_background(text)?,
        (None, None) => defaults.background,
    };
    let config = RenderConfig {
        k: pick(args.k, &file_map, "k", defaults.k)?,
        tau_rho: pick(args.tau_rho, &file_map, "tau_rho", defaults.tau_rho)?,
        epsilon_angle: pick(args.epsilon_angle, &file_map, "epsilon_angle", defaults.epsilon_angle)?,
        tile_size: pick(args.tile_size, &file_map, "tile_size", defaults.tile_size)?,
        alpha_cutoff: pick(args.alpha_cutoff, &file_map, "alpha_cutoff", defaults.alpha_cutoff)?,
        alpha_clamp: pick(args.alpha_clamp, &file_map, "alpha_clamp", defaults.alpha_clamp)?,
        transmittance_epsilon: pick(
            args.transmittance_epsilon,
            &file_map,
            "transmittance_epsilon",
            defaults.transmittance_epsilon,
        )?,
        background,
        resort_window: None,
        tile_near_plane: args.tile_near_plane
            || file_map.get("tile_near_plane").map(|v| v == "true") == Some(true),
    };
    config.validate().map_err(io_err)?;

    let threads = pick(args.threads, &file_map, "threads", 0usize)?;
    if threads > 0 {
        // Best effort: later calls error if a pool already exists, which is
        // fine for repeated invocations in-process (tests).
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }

    let scene_file = io::load_ply(&args.scene)
        .map_err(|e| io_err(format!("scene {}: {e}", args.scene.display())))?;
    let mut gaussians = scene_file.gaussians;

    let camera_set = io::load_cameras(&args.cameras)
        .map_err(|e| io_err(format!("cameras {}: {e}", args.cameras.display())))?;
    let mut cameras = camera_set.entries;
    if let Some(id) = args.camera_id {
        cameras.retain(|e| e.id == id);
        if cameras.is_empty() {
            return Err(io_err(format!("camera id {id} not found in {}", args.cameras.display())));
        }
    }

    if let Some(train_path) = &args.train_cameras {
        let train_set = io::load_cameras(train_path)
            .map_err(|e| io_err(format!("train cameras {}: {e}", train_path.display())))?;
        let train: Vec<Camera> = train_set
            .entries
            .iter()
            .filter(|e| !e.is_test)
            .map(|e| e.camera.clone())
            .collect();
        filter::assign_training_frequencies(&mut gaussians, &train, !args.train_all_cameras);
    }

    let fov_scale = pick(args.fov_scale, &file_map, "fov_scale", 1.0f64)?;
    let res_scale = pick(args.res_scale, &file_map, "res_scale", 1.0f64)?;
    if fov_scale != 1.0 || res_scale != 1.0 {
        for entry in &mut cameras {
            let c = &entry.camera;
            entry.camera = Camera::new(
                (c.width as f64 * res_scale).round() as u32,
                (c.height as f64 * res_scale).round() as u32,
                c.fx / fov_scale,
                c.fy / fov_scale,
                c.cx * res_scale,
                c.cy * res_scale,
                c.near,
                c.world_to_view,
            )
            .map_err(|e| io_err(format!("camera {} after scaling: {e}", entry.id)))?;
        }
    }

    Ok(ResolvedScene { gaussians, cameras, config })
}

fn frame_name(entry: &CameraEntry) -> String {
    match &entry.name {
        Some(name) => name.clone(),
        None => format!("cam_{:04}", entry.id),
    }
}

fn cmd_render(cmd: RenderCmd, use_oracle: bool) -> Result<(), CliError> {
    let resolved = resolve(&cmd.scene)?;
    std::fs::create_dir_all(&cmd.out)
        .map_err(|e| io_err(format!("output dir {}: {e}", cmd.out.display())))?;
    let mut written: Vec<PathBuf> = Vec::new();
    let result = (|| -> Result<(), CliError> {
        for entry in &resolved.cameras {
            let start = Instant::now();
            let (fb, stats) = if use_oracle {
                let fb = oracle::render_reference(&resolved.gaussians, &entry.camera, &resolved.config)
                    .map_err(io_err)?;
                (fb, RenderStats::default())
            } else {
                raster::render_with_stats(&resolved.gaussians, &entry.camera, &resolved.config)
                    .map_err(io_err)?
            };
            let elapsed = start.elapsed();
            let name = frame_name(entry);
            let png = cmd.out.join(format!("{name}.png"));
            let aaaf = cmd.out.join(format!("{name}.aaaf"));
            io::write_png(&fb, &png).map_err(io_err)?;
            written.push(png);
            io::write_float_image(&FloatImage::from(&fb), &aaaf).map_err(io_err)?;
            written.push(aaaf);
            if use_oracle {
                println!(
                    "camera {name}: {:.1} ms ({} gaussians, reference)",
                    elapsed.as_secs_f64() * 1e3,
                    resolved.gaussians.len(),
                );
            } else {
                println!(
                    "camera {name}: {:.1} ms ({} prepared of {} gaussians, {} pairs after culling of {} rect pairs)",
                    elapsed.as_secs_f64() * 1e3,
                    stats.preprocess.prepared,
                    stats.preprocess.input,
                    stats.bins.kept_pairs,
                    stats.bins.rect_pairs,
                );
            }
        }
        Ok(())
    })();
    if result.is_err() {
        for path in written {
            let _ = std::fs::remove_file(path);
        }
    }
    result
}

fn cmd_compare(cmd: CompareCmd) -> Result<(), CliError> {
    let list = |dir: &Path| -> Result<Vec<String>, CliError> {
        let mut names = Vec::new();
        let entries =
            std::fs::read_dir(dir).map_err(|e| io_err(format!("{}: {e}", dir.display())))?;
        for entry in entries {
            let entry = entry.map_err(io_err)?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if name.ends_with(".aaaf") {
                names.push(name);
            }
        }
        names.sort();
        Ok(names)
    };
    let names_a = list(&cmd.dir_a)?;
    let names_b = list(&cmd.dir_b)?;
    if names_a != names_b {
        return Err(io_err(format!(
            "file sets differ: {} has {:?}, {} has {:?}",
            cmd.dir_a.display(),
            names_a,
            cmd.dir_b.display(),
            names_b
        )));
    }
    if names_a.is_empty() {
        return Err(io_err(format!("no float images in {}", cmd.dir_a.display())));
    }
    let mut worst: f64 = 0.0;
    for name in &names_a {
        let a = io::load_float_image(&cmd.dir_a.join(name)).map_err(io_err)?;
        let b = io::load_float_image(&cmd.dir_b.join(name)).map_err(io_err)?;
        let diff = a
            .max_difference(&b)
            .ok_or_else(|| io_err(format!("{name}: image dimensions differ")))?;
        let psnr = io::psnr(&a, &b).map_err(io_err)?;
        if psnr.is_infinite() {
            println!("{name}: max diff {diff:.3e}, psnr inf");
        } else {
            println!("{name}: max diff {diff:.3e}, psnr {psnr:.2} dB");
        }
        worst = worst.max(diff);
    }
    if worst > cmd.tolerance {
        return Err(CliError::Compare(format!(
            "max per-channel difference {worst:.3e} exceeds tolerance {:.3e}",
            cmd.tolerance
        )));
    }
    println!("all {} image pairs within {:.3e}", names_a.len(), cmd.tolerance);
    Ok(())
}

fn cmd_stats(args: SceneArgs) -> Result<(), CliError> {
    let resolved = resolve(&args)?;
    for entry in &resolved.cameras {
        let (prepared, pre) =
            raster::preprocess_with_stats(&resolved.gaussians, &entry.camera, &resolved.config);
        let (_, bins) = raster::bin_to_tiles(&prepared, &entry.camera, &resolved.config);
        let reduction = if bins.rect_pairs > 0 {
            100.0 * (1.0 - bins.kept_pairs as f64 / bins.rect_pairs as f64)
        } else {
            0.0
        };
        println!(
            "camera {}: {} of {} gaussians after view-frustum cull, {} prepared, \
             rect pairs {}, pairs after tile cull {}, reduction {reduction:.1}%",
            frame_name(entry),
            pre.after_frustum_cull,
            pre.input,
            pre.prepared,
            bins.rect_pairs,
            bins.kept_pairs,
        );
    }
    Ok(())
}

fn cmd_synth(cmd: SynthCmd) -> Result<(), CliError> {
    std::fs::create_dir_all(&cmd.out)
        .map_err(|e| io_err(format!("output dir {}: {e}", cmd.out.display())))?;
    let gaussians = synth::generate_gaussians(cmd.seed, cmd.n);
    let focal = cmd.focal.unwrap_or(cmd.width as f64);
    let cameras = synth::ring_cameras(cmd.num_cameras, cmd.width, cmd.height, focal, cmd.radius, cmd.near);
    let entries: Vec<CameraEntry> = cameras
        .into_iter()
        .enumerate()
        .map(|(i, camera)| CameraEntry { id: i as u64, name: None, camera, is_test: false })
        .collect();
    let ply = cmd.out.join("scene.ply");
    let cams = cmd.out.join("cameras.json");
    io::write_ply(&ply, &gaussians).map_err(io_err)?;
    io::write_cameras(&cams, &entries).map_err(io_err)?;
    println!(
        "wrote {} gaussians to {} and {} cameras to {}",
        gaussians.len(),
        ply.display(),
        entries.len(),
        cams.display()
    );
    Ok(())
}
