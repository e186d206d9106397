//! Pipeline driver: generate corpora, edit scenes, render passes, sample
//! cameras, assemble datasets, split, validate, and score images.
//!
//! Exit codes: 0 success, 2 validation failure, 3 IO failure, 4 invalid
//! arguments, 5 domain error (rejected edit, exhausted placement, protocol
//! failure, and similar).

use clap::{Args, Parser, Subcommand};
use scenelab::assemble::{
    build_multiview_dataset, build_removal_dataset, build_scene_removal_dataset, read_manifest,
    split_by_room, stats, validate_manifest, write_manifest, AssembleConfig, AssembleError,
};
use scenelab::cameras::{sample_cameras, CameraProtocolConfig, CameraRecord};
use scenelab::imageio::{self, PfmImage};
use scenelab::intervention::{intervene, Intervention, PropagationPolicy};
use scenelab::math::Vec3;
use scenelab::metrics::{metric_report, PixelEncoding};
use scenelab::procgen::{generate_corpus, GenConfig, ProcgenError};
use scenelab::render::{
    render_full, render_layers, CameraConfig, RenderError, RenderSettings,
};
use scenelab::scene::{load_world, save_world, EntityId, SceneIoError, WorldState};
use serde::Deserialize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_VALIDATION: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_ARGS: u8 = 4;
const EXIT_DOMAIN: u8 = 5;

#[derive(Debug)]
struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn new(code: u8, message: impl Into<String>) -> Self {
        CliError { code, message: message.into() }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

fn io_fail(msg: impl Into<String>) -> CliError {
    CliError::new(EXIT_IO, msg)
}

fn args_fail(msg: impl Into<String>) -> CliError {
    CliError::new(EXIT_ARGS, msg)
}

fn domain_fail(msg: impl Into<String>) -> CliError {
    CliError::new(EXIT_DOMAIN, msg)
}

impl From<SceneIoError> for CliError {
    fn from(e: SceneIoError) -> Self {
        match e {
            SceneIoError::Parse { .. } | SceneIoError::Serialize(_) => args_fail(e.to_string()),
            _ => io_fail(e.to_string()),
        }
    }
}

impl From<ProcgenError> for CliError {
    fn from(e: ProcgenError) -> Self {
        match e {
            ProcgenError::Io { .. } => io_fail(e.to_string()),
            ProcgenError::InvalidConfig(_) => args_fail(e.to_string()),
            ProcgenError::PlacementExhausted { .. } => domain_fail(e.to_string()),
            ProcgenError::Scene(inner) => inner.into(),
        }
    }
}

impl From<RenderError> for CliError {
    fn from(e: RenderError) -> Self {
        domain_fail(e.to_string())
    }
}

impl From<AssembleError> for CliError {
    fn from(e: AssembleError) -> Self {
        match e {
            AssembleError::Io { .. } => io_fail(e.to_string()),
            AssembleError::ManifestParse { .. } => args_fail(e.to_string()),
            AssembleError::Scene(inner) => inner.into(),
            AssembleError::InvalidScene { .. } | AssembleError::DegenerateSplit(_) => {
                domain_fail(e.to_string())
            }
        }
    }
}

impl From<imageio::ImageIoError> for CliError {
    fn from(e: imageio::ImageIoError) -> Self {
        match e {
            imageio::ImageIoError::Malformed { .. } => args_fail(e.to_string()),
            _ => io_fail(e.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(name = "scenelab", version, about = "Editable toy worlds: interventions, layered rendering, counterfactual datasets")]
struct Cli {
    /// Worker threads (output bytes do not depend on this).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// JSON pipeline config; explicit flags override config values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a corpus of procedural room scenes.
    Gen(GenArgs),
    /// Apply one intervention to a scene file.
    Edit(EditArgs),
    /// Render passes of a scene from one camera.
    Render(RenderArgs),
    /// Sample the tiered camera protocol for a scene.
    Cameras(CamerasArgs),
    /// Build a counterfactual dataset.
    Assemble(AssembleArgs),
    /// Reassign train/test splits at room granularity.
    Split(SplitArgs),
    /// Print corpus statistics for a manifest.
    Stats(StatsArgs),
    /// Validate a manifest against its files.
    Validate(ValidateArgs),
    /// PSNR/SSIM/MSE between two images (PFM or PPM).
    Metrics(MetricsArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    rooms: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EditArgs {
    #[arg(long)]
    scene: PathBuf,
    /// remove | insert | relocate | light | remove-all
    #[arg(long)]
    op: String,
    #[arg(long)]
    target: Option<String>,
    #[arg(long, default_value = "cascade")]
    policy: String,
    #[arg(long)]
    out: PathBuf,
    /// Edit-record JSON path (defaults to <out>.record.json).
    #[arg(long)]
    record: Option<PathBuf>,
    /// Entity JSON file for insert.
    #[arg(long)]
    entity: Option<PathBuf>,
    /// Supporter id for insert/relocate.
    #[arg(long)]
    supporter: Option<String>,
    /// New center "x,y,z" for relocate.
    #[arg(long)]
    center: Option<String>,
    /// New yaw in radians for relocate.
    #[arg(long, default_value_t = 0.0)]
    yaw: f64,
    #[arg(long)]
    light_index: Option<usize>,
    /// New intensity "r,g,b" for light edits.
    #[arg(long)]
    intensity: Option<String>,
}

#[derive(Args)]
struct RenderArgs {
    #[arg(long)]
    scene: PathBuf,
    /// Camera file: a CameraConfig object or a cameras sidecar array.
    #[arg(long)]
    camera: Option<PathBuf>,
    /// Camera id to select from a sidecar array.
    #[arg(long)]
    camera_id: Option<String>,
    /// Inline camera position "x,y,z" (alternative to --camera).
    #[arg(long)]
    cam_pos: Option<String>,
    /// Inline camera look-at "x,y,z".
    #[arg(long)]
    cam_look: Option<String>,
    #[arg(long, default_value_t = 60.0)]
    vfov_deg: f64,
    #[arg(long)]
    width: Option<u32>,
    #[arg(long)]
    height: Option<u32>,
    /// Comma list: rgb,depth,seg,normal,layers,lights
    #[arg(long, default_value = "rgb,depth,seg,normal")]
    passes: String,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    mirror_bounces: Option<u32>,
    #[arg(long)]
    gamma: Option<f64>,
}

#[derive(Args)]
struct CamerasArgs {
    #[arg(long)]
    scene: PathBuf,
    /// Target entity id (defaults to the largest dynamic object).
    #[arg(long)]
    target: Option<String>,
    #[arg(long, default_value_t = 3)]
    n_similar: u32,
    #[arg(long, default_value_t = 4)]
    n_diff: u32,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    width: Option<u32>,
    #[arg(long)]
    height: Option<u32>,
}

#[derive(Args)]
struct AssembleArgs {
    /// removal | multiview | scene-removal
    mode: String,
    /// Directory of scene JSON files.
    #[arg(long)]
    scenes: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    min_mask: Option<f64>,
    #[arg(long)]
    cameras_per_scene: Option<u32>,
    #[arg(long)]
    n_similar: Option<u32>,
    #[arg(long)]
    n_diff: Option<u32>,
    #[arg(long)]
    policy: Option<String>,
    #[arg(long)]
    width: Option<u32>,
    #[arg(long)]
    height: Option<u32>,
}

#[derive(Args)]
struct SplitArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Target test share of samples (falls back to the config file).
    #[arg(long)]
    test_fraction: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Also write the JSON report here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    manifest: PathBuf,
}

#[derive(Args)]
struct MetricsArgs {
    image_a: PathBuf,
    image_b: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    max_val: f64,
}

/// Optional JSON pipeline config; flags override these values.
#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct PipelineConfig {
    seed: Option<u64>,
    gen: Option<GenConfig>,
    cameras: Option<CameraProtocolConfig>,
    render: Option<RenderSettings>,
    min_mask: Option<f64>,
    test_fraction: Option<f64>,
}

fn load_config(path: Option<&Path>) -> CliResult<PipelineConfig> {
    let Some(path) = path else { return Ok(PipelineConfig::default()) };
    let text = std::fs::read_to_string(path)
        .map_err(|e| io_fail(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| args_fail(format!("invalid config {}: {e}", path.display())))
}

fn parse_vec3(s: &str, flag: &str) -> CliResult<Vec3> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(args_fail(format!("--{flag} expects \"x,y,z\", got {s:?}")));
    }
    let mut v = [0.0; 3];
    for (slot, p) in v.iter_mut().zip(&parts) {
        *slot = p
            .trim()
            .parse()
            .map_err(|e| args_fail(format!("--{flag}: bad number {p:?}: {e}")))?;
    }
    Ok(Vec3::new(v[0], v[1], v[2]))
}

fn parse_policy(s: &str) -> CliResult<PropagationPolicy> {
    match s {
        "cascade" => Ok(PropagationPolicy::Cascade),
        "reseat" => Ok(PropagationPolicy::Reseat),
        other => Err(args_fail(format!("unknown policy {other:?} (cascade|reseat)"))),
    }
}

fn largest_dynamic(world: &WorldState) -> Option<EntityId> {
    world
        .dynamic_entities()
        .map(|e| {
            let b = e.geometry.aabb();
            let d = b.max - b.min;
            (e.id.clone(), d.x * d.y * d.z)
        })
        .max_by(|(ia, va), (ib, vb)| va.partial_cmp(vb).unwrap().then_with(|| ib.cmp(ia)))
        .map(|(id, _)| id)
}

fn scene_files(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir)
        .map_err(|e| io_fail(format!("cannot read scene dir {}: {e}", dir.display())))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(args_fail(format!("no scene JSON files in {}", dir.display())));
    }
    Ok(files)
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // Help/version requests are successes; real parse errors exit 4.
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_ARGS),
            };
        }
    };
    if let Some(jobs) = cli.jobs {
        if rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
            .is_err()
        {
            eprintln!("warning: thread pool already initialized, ignoring --jobs");
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

fn run(cli: Cli) -> CliResult {
    let config = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Gen(args) => cmd_gen(args, &config),
        Command::Edit(args) => cmd_edit(args),
        Command::Render(args) => cmd_render(args, &config),
        Command::Cameras(args) => cmd_cameras(args, &config),
        Command::Assemble(args) => cmd_assemble(args, &config),
        Command::Split(args) => cmd_split(args, &config),
        Command::Stats(args) => cmd_stats(args),
        Command::Validate(args) => cmd_validate(args),
        Command::Metrics(args) => cmd_metrics(args),
    }
}

fn cmd_gen(args: GenArgs, config: &PipelineConfig) -> CliResult {
    let mut gen = config.gen.clone().unwrap_or_default();
    if let Some(seed) = args.seed.or(config.seed) {
        gen.seed = seed;
    }
    let paths = generate_corpus(&gen, args.rooms, &args.out)?;
    println!("wrote {} scene files to {}", paths.len(), args.out.display());
    Ok(())
}

fn cmd_edit(args: EditArgs) -> CliResult {
    let world = load_world(&args.scene)?;
    let need_target = || -> CliResult<EntityId> {
        args.target
            .clone()
            .map(EntityId::new)
            .ok_or_else(|| args_fail("--target is required for this op"))
    };
    let intervention = match args.op.as_str() {
        "remove" => Intervention::Remove { target: need_target()? },
        "remove-all" => Intervention::RemoveAllDynamic,
        "insert" => {
            let entity_path =
                args.entity.as_ref().ok_or_else(|| args_fail("--entity is required"))?;
            let text = std::fs::read_to_string(entity_path)
                .map_err(|e| io_fail(format!("cannot read {}: {e}", entity_path.display())))?;
            let entity = serde_json::from_str(&text)
                .map_err(|e| args_fail(format!("invalid entity JSON: {e}")))?;
            let supporter = args
                .supporter
                .clone()
                .map(EntityId::new)
                .ok_or_else(|| args_fail("--supporter is required"))?;
            Intervention::Insert { entity, supporter }
        }
        "relocate" => {
            let center = parse_vec3(
                args.center.as_deref().ok_or_else(|| args_fail("--center is required"))?,
                "center",
            )?;
            let supporter = args
                .supporter
                .clone()
                .map(EntityId::new)
                .ok_or_else(|| args_fail("--supporter is required"))?;
            Intervention::Relocate {
                target: need_target()?,
                new_center: center,
                new_yaw: args.yaw,
                new_supporter: supporter,
            }
        }
        "light" => {
            let light_index =
                args.light_index.ok_or_else(|| args_fail("--light-index is required"))?;
            let intensity = parse_vec3(
                args.intensity.as_deref().ok_or_else(|| args_fail("--intensity is required"))?,
                "intensity",
            )?;
            Intervention::LightChange { light_index, new_intensity: intensity }
        }
        other => return Err(args_fail(format!("unknown op {other:?}"))),
    };
    let policy = parse_policy(&args.policy)?;
    let (after, record) =
        intervene(&world, &intervention, policy).map_err(|e| domain_fail(e.to_string()))?;
    save_world(&after, &args.out)?;
    let record_path = args
        .record
        .unwrap_or_else(|| args.out.with_extension("record.json"));
    std::fs::write(
        &record_path,
        serde_json::to_string_pretty(&record).expect("record serializes"),
    )
    .map_err(|e| io_fail(format!("cannot write {}: {e}", record_path.display())))?;
    println!("wrote {} (t={}) and {}", args.out.display(), after.t, record_path.display());
    Ok(())
}

fn load_camera(args: &RenderArgs, world: &WorldState) -> CliResult<CameraConfig> {
    let mut cam = if let Some(path) = &args.camera {
        let text = std::fs::read_to_string(path)
            .map_err(|e| io_fail(format!("cannot read {}: {e}", path.display())))?;
        if let Ok(records) = serde_json::from_str::<Vec<CameraRecord>>(&text) {
            let chosen = match &args.camera_id {
                Some(id) => records.iter().find(|r| &r.id == id).ok_or_else(|| {
                    args_fail(format!("camera id {id:?} not present in {}", path.display()))
                })?,
                None => records
                    .first()
                    .ok_or_else(|| args_fail(format!("{} holds no cameras", path.display())))?,
            };
            chosen.to_config()
        } else {
            serde_json::from_str::<CameraConfig>(&text)
                .map_err(|e| args_fail(format!("invalid camera JSON: {e}")))?
        }
    } else {
        let pos = parse_vec3(
            args.cam_pos
                .as_deref()
                .ok_or_else(|| args_fail("provide --camera FILE or --cam-pos/--cam-look"))?,
            "cam-pos",
        )?;
        let look = parse_vec3(
            args.cam_look.as_deref().ok_or_else(|| args_fail("--cam-look is required"))?,
            "cam-look",
        )?;
        let center = world.room.volume().center();
        let up = Vec3::new(0.0, 0.0, 1.0);
        let _ = center;
        CameraConfig {
            id: "cli".into(),
            position: pos,
            look_at: look,
            up,
            vfov: args.vfov_deg.to_radians(),
            width: 256,
            height: 192,
        }
    };
    if let Some(w) = args.width {
        cam.width = w;
    }
    if let Some(h) = args.height {
        cam.height = h;
    }
    Ok(cam)
}

fn cmd_render(args: RenderArgs, config: &PipelineConfig) -> CliResult {
    let world = load_world(&args.scene)?;
    let cam = load_camera(&args, &world)?;
    let mut settings = config.render.clone().unwrap_or_default();
    if let Some(seed) = args.seed.or(config.seed) {
        settings.seed = seed;
    }
    if let Some(mb) = args.mirror_bounces {
        settings.mirror_bounces = mb;
    }
    if let Some(g) = args.gamma {
        settings.gamma = g;
    }
    let passes: Vec<&str> = args.passes.split(',').map(|s| s.trim()).collect();
    for p in &passes {
        if !["rgb", "depth", "seg", "normal", "layers", "lights"].contains(p) {
            return Err(args_fail(format!("unknown pass {p:?}")));
        }
    }
    let want_layers = passes.iter().any(|p| *p == "layers" || *p == "lights");

    std::fs::create_dir_all(&args.out)
        .map_err(|e| io_fail(format!("cannot create {}: {e}", args.out.display())))?;
    let pass_set = if want_layers {
        render_layers(&world, &cam, &settings)?
    } else {
        render_full(&world, &cam, &settings)?
    };

    let out = &args.out;
    for p in &passes {
        match *p {
            "rgb" => {
                imageio::write_pfm_rgb(&out.join("rgb.pfm"), &pass_set.rgb)?;
                imageio::write_ppm(&out.join("rgb.ppm"), &pass_set.rgb, settings.gamma)?;
            }
            "depth" => imageio::write_pfm_gray(&out.join("depth.pfm"), &pass_set.depth)?,
            "seg" => imageio::write_instance_map(
                &out.join("instance.pfm"),
                &out.join("instance_index.json"),
                &pass_set.instance,
                &pass_set.entity_index,
            )?,
            "normal" => imageio::write_pfm_rgb(
                &out.join("normal.pfm"),
                &pass_set.normal.map(|n| *n),
            )?,
            "lights" => {
                for (i, img) in pass_set.per_light.iter().enumerate() {
                    imageio::write_pfm_rgb(&out.join(format!("light_{i:02}.pfm")), img)?;
                }
                if let Some(ambient) = &pass_set.ambient_image {
                    imageio::write_pfm_rgb(&out.join("ambient.pfm"), ambient)?;
                }
            }
            "layers" => {
                let dir = out.join("layers");
                for bundle in &pass_set.layers {
                    let bdir = dir.join(bundle.object.as_str());
                    std::fs::create_dir_all(&bdir)
                        .map_err(|e| io_fail(format!("cannot create {}: {e}", bdir.display())))?;
                    imageio::write_pfm_rgb(
                        &bdir.join("modal.pfm"),
                        &bundle.modal_cutout.map(|p| p.rgb),
                    )?;
                    imageio::write_pfm_gray(
                        &bdir.join("modal_alpha.pfm"),
                        &bundle.modal_cutout.map(|p| p.alpha),
                    )?;
                    imageio::write_pfm_rgb(
                        &bdir.join("amodal.pfm"),
                        &bundle.amodal.map(|p| p.rgb),
                    )?;
                    imageio::write_pfm_gray(
                        &bdir.join("amodal_alpha.pfm"),
                        &bundle.amodal.map(|p| p.alpha),
                    )?;
                    imageio::write_pfm_rgb(&bdir.join("shadow.pfm"), &bundle.shadow)?;
                    imageio::write_pfm_gray(&bdir.join("depth.pfm"), &bundle.layer_depth)?;
                }
                if let Some(structure) = &pass_set.structure_layer {
                    let sdir = dir.join("structure");
                    std::fs::create_dir_all(&sdir)
                        .map_err(|e| io_fail(format!("cannot create {}: {e}", sdir.display())))?;
                    imageio::write_pfm_rgb(
                        &sdir.join("structure.pfm"),
                        &structure.rgba.map(|p| p.rgb),
                    )?;
                    imageio::write_pfm_gray(
                        &sdir.join("structure_alpha.pfm"),
                        &structure.rgba.map(|p| p.alpha),
                    )?;
                    imageio::write_pfm_gray(&sdir.join("structure_depth.pfm"), &structure.depth)?;
                }
            }
            _ => unreachable!(),
        }
    }
    println!("wrote passes [{}] to {}", passes.join(","), args.out.display());
    Ok(())
}

fn cmd_cameras(args: CamerasArgs, config: &PipelineConfig) -> CliResult {
    let world = load_world(&args.scene)?;
    let target = match &args.target {
        Some(t) => EntityId::new(t.clone()),
        None => largest_dynamic(&world)
            .ok_or_else(|| domain_fail("scene has no dynamic entities to target"))?,
    };
    let mut cam_cfg = config.cameras.clone().unwrap_or_default();
    if let Some(w) = args.width {
        cam_cfg.width = w;
    }
    if let Some(h) = args.height {
        cam_cfg.height = h;
    }
    let seed = args.seed.or(config.seed).unwrap_or(0);
    let sampled = sample_cameras(&world, &target, args.n_similar, args.n_diff, seed, &cam_cfg)
        .map_err(|e| domain_fail(e.to_string()))?;
    let records: Vec<CameraRecord> = sampled.iter().map(CameraRecord::from).collect();
    let json = serde_json::to_string_pretty(&records).expect("camera records serialize");
    std::fs::write(&args.out, json)
        .map_err(|e| io_fail(format!("cannot write {}: {e}", args.out.display())))?;
    println!("wrote {} cameras to {}", records.len(), args.out.display());
    Ok(())
}

fn cmd_assemble(args: AssembleArgs, config: &PipelineConfig) -> CliResult {
    let mut cfg = AssembleConfig::default();
    if let Some(c) = &config.cameras {
        cfg.camera = c.clone();
    }
    if let Some(r) = &config.render {
        cfg.render = r.clone();
    }
    if let Some(m) = config.min_mask {
        cfg.min_mask = m;
    }
    if let Some(m) = args.min_mask {
        cfg.min_mask = m;
    }
    if let Some(c) = args.cameras_per_scene {
        cfg.cameras_per_scene = c;
    }
    if let Some(n) = args.n_similar {
        cfg.n_similar = n;
    }
    if let Some(n) = args.n_diff {
        cfg.n_diff = n;
    }
    if let Some(p) = &args.policy {
        cfg.policy = parse_policy(p)?;
    }
    if let Some(w) = args.width {
        cfg.camera.width = w;
    }
    if let Some(h) = args.height {
        cfg.camera.height = h;
    }
    let seed = args.seed.or(config.seed).unwrap_or(0);
    let scenes = scene_files(&args.scenes)?;
    let manifest = match args.mode.as_str() {
        "removal" => build_removal_dataset(&scenes, &cfg, seed, &args.out)?,
        "multiview" => build_multiview_dataset(&scenes, &cfg, seed, &args.out)?,
        "scene-removal" => build_scene_removal_dataset(&scenes, &cfg, seed, &args.out)?,
        other => return Err(args_fail(format!("unknown assemble mode {other:?}"))),
    };
    println!(
        "assembled {} records over {} scenes into {}",
        manifest.records.len(),
        scenes.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_split(args: SplitArgs, config: &PipelineConfig) -> CliResult {
    let test_fraction = args
        .test_fraction
        .or(config.test_fraction)
        .ok_or_else(|| args_fail("--test-fraction is required (flag or config)"))?;
    if test_fraction <= 0.0 || test_fraction >= 1.0 {
        return Err(args_fail("--test-fraction must lie strictly between 0 and 1"));
    }
    let manifest = read_manifest(&args.manifest)?;
    let seed = args.seed.or(config.seed).unwrap_or(0);
    let split = split_by_room(&manifest, test_fraction, seed)?;
    write_manifest(&split, &args.out)?;
    let test = split.records.iter().filter(|r| matches!(r.split, scenelab::assemble::Split::Test)).count();
    println!(
        "split {} records into {} train / {test} test at {}",
        split.records.len(),
        split.records.len() - test,
        args.out.display()
    );
    Ok(())
}

fn cmd_stats(args: StatsArgs) -> CliResult {
    let manifest = read_manifest(&args.manifest)?;
    let report = stats(&manifest);
    let json = serde_json::to_string(&report).expect("stats serialize");
    println!("{json}");
    if let Some(out) = args.out {
        std::fs::write(&out, &json)
            .map_err(|e| io_fail(format!("cannot write {}: {e}", out.display())))?;
    }
    Ok(())
}

fn cmd_validate(args: ValidateArgs) -> CliResult {
    let manifest = read_manifest(&args.manifest)?;
    let dir = args.manifest.parent().unwrap_or(Path::new("."));
    let violations = validate_manifest(&manifest, dir);
    if violations.is_empty() {
        println!("ok: {} records", manifest.records.len());
        Ok(())
    } else {
        for v in &violations {
            eprintln!("{}", serde_json::to_string(v).expect("violation serializes"));
        }
        Err(CliError::new(
            EXIT_VALIDATION,
            format!("{} violation(s) found", violations.len()),
        ))
    }
}

fn read_metric_image(path: &Path) -> CliResult<(scenelab::image::Image<Vec3>, PixelEncoding)> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("pfm") => {
            let img = match imageio::read_pfm(path)? {
                PfmImage::Rgb(img) => img,
                PfmImage::Gray(img) => img.map(|v| Vec3::splat(*v)),
            };
            Ok((img, PixelEncoding::Linear))
        }
        Some("ppm") => Ok((imageio::read_ppm(path)?, PixelEncoding::Encoded)),
        other => Err(args_fail(format!("unsupported image extension {other:?} (pfm|ppm)"))),
    }
}

fn cmd_metrics(args: MetricsArgs) -> CliResult {
    let (a, enc_a) = read_metric_image(&args.image_a)?;
    let (b, enc_b) = read_metric_image(&args.image_b)?;
    if enc_a != enc_b {
        return Err(args_fail("metric inputs must share a format (both pfm or both ppm)"));
    }
    let report =
        metric_report(&a, &b, args.max_val, enc_a).map_err(|e| domain_fail(e.to_string()))?;
    println!("{}", serde_json::to_string(&report).expect("report serializes"));
    Ok(())
}
