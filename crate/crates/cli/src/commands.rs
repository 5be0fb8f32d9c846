use crate::config::RunConfig;
use crate::{
    AnnotateArgs, Cli, Command, ConvertArgs, Encoding, MetricsArgs, Mode, ServeArgs, SimulateArgs,
};
use anyhow::{bail, Context, Result};
use serde_json::json;
use sha2::{Digest, Sha256};
use simready_annotate::chat::{ChatClient, HttpChatClient, MockClient, RetryPolicy};
use simready_annotate::session::{Iteration, ValidationOutcome};
use simready_annotate::{AnnotationSession, ObjectDescription, ValidationMode};
use simready_core::assets::{load_asset, save_asset, AssetEncoding};
use simready_core::metrics::{
    chamfer_distance, f_score, material_report, occupancy_iou, sim_cd, voxelize, MetricsReport,
};
use simready_core::mpm::{run_simulation_with_report, Timestep};
use simready_core::{ScenarioSpec, Trajectory};
use simready_service::render::{default_camera, encode_png, render_frame, View, DEFAULT_SIZE};
use simready_service::{Service, ServiceConfig};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Metrics(a) => metrics(a),
        Command::Annotate(a) => annotate(a),
        Command::Serve(a) => serve(a),
        Command::Convert(a) => convert(a),
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn resolve_simulate(a: &SimulateArgs) -> Result<RunConfig> {
    let mut cfg = match &a.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(p) = &a.asset {
        cfg.asset = Some(p.clone());
    }
    if let Some(name) = &a.scenario {
        cfg.scenario = Some(ScenarioSpec::by_name(name).with_context(|| {
            format!("unknown scenario `{name}` (drop, throw, tilt, drag, wind)")
        })?);
    }
    if let Some(p) = &a.out {
        cfg.output = Some(p.clone());
    }
    if let Some(p) = &a.frames_dir {
        cfg.frames_dir = Some(p.clone());
    }
    let sim = &mut cfg.sim;
    if let Some(r) = a.resolution {
        sim.resolution = r;
    }
    if let Some(d) = a.duration {
        sim.duration = d;
    }
    if let Some(f) = a.fps {
        sim.fps = f;
    }
    if let Some(dt) = a.dt {
        sim.timestep = Timestep::Fixed { dt };
    }
    if let Some(w) = a.workers {
        sim.workers = w;
    }
    if a.deterministic {
        sim.deterministic = true;
    }
    cfg.scenario.get_or_insert_with(ScenarioSpec::default_drop);
    Ok(cfg)
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let cfg = resolve_simulate(&a)?;
    if a.print_config {
        print!("{}", cfg.to_toml());
        return Ok(());
    }
    let asset_path = cfg
        .asset
        .clone()
        .context("no asset given (use --asset or `asset` in the config file)")?;
    cfg.check_paths()?;
    cfg.sim
        .validate()
        .map_err(anyhow::Error::msg)
        .context("invalid simulation settings")?;
    let scenario = cfg.scenario.unwrap();
    scenario
        .validate()
        .map_err(anyhow::Error::msg)
        .context("invalid scenario")?;
    let asset = load_asset(&asset_path)
        .with_context(|| format!("cannot load asset {}", asset_path.display()))?;
    let out = cfg.output.clone().unwrap_or_else(|| {
        let stem = asset_path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("asset");
        PathBuf::from(format!("{stem}.{}.trj", scenario.name()))
    });

    let (trajectory, report) = run_simulation_with_report(&asset, &scenario, &cfg.sim)?;
    let bytes = trajectory.to_bytes();
    std::fs::write(&out, &bytes).with_context(|| format!("cannot write {}", out.display()))?;
    println!(
        "wrote {}: {} frames, {} particles, scenario {}",
        out.display(),
        trajectory.len(),
        trajectory.particle_count(),
        scenario.name()
    );
    println!(
        "steps {}, clamps {}, dt {:.3e}..{:.3e} s, wall {:.2} s",
        report.steps, report.clamps, report.min_dt, report.max_dt, report.wall_time_s
    );
    println!("sha256 {}", sha256_hex(&bytes));

    if let Some(dir) = &cfg.frames_dir {
        std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        let camera = default_camera(&trajectory, &cfg.sim, View::Front, DEFAULT_SIZE);
        for k in 0..trajectory.len() {
            let img = render_frame(&trajectory, k, asset.colors(), &camera)?;
            let path = dir.join(format!("frame_{k:04}.png"));
            std::fs::write(&path, encode_png(&img))
                .with_context(|| format!("cannot write {}", path.display()))?;
        }
        println!(
            "rendered {} frames into {}",
            trajectory.len(),
            dir.display()
        );
    }
    Ok(())
}

fn extension(p: &Path) -> &str {
    p.extension().and_then(|e| e.to_str()).unwrap_or("")
}

fn metrics(a: MetricsArgs) -> Result<()> {
    let mut opts = match &a.config {
        Some(p) => RunConfig::load(p)?.metrics,
        None => Default::default(),
    };
    if let Some(t) = a.tau {
        opts.tau = t;
    }
    if let Some(r) = a.iou_resolution {
        opts.iou_resolution = r;
    }
    for p in [&a.pred, &a.truth] {
        if !p.is_file() {
            bail!("input {} does not exist", p.display());
        }
    }
    let (kind, report) = match (extension(&a.pred), extension(&a.truth)) {
        ("trj", "trj") => {
            let load = |p: &PathBuf| Trajectory::load(p).with_context(|| format!("cannot load {}", p.display()));
            let (pred, truth) = (load(&a.pred)?, load(&a.truth)?);
            let report = MetricsReport {
                sim_cd: Some(sim_cd(&pred, &truth).context("trajectories are not comparable")?),
                ..Default::default()
            };
            ("trajectory", report)
        }
        ("sra", "sra") => {
            let load = |p: &PathBuf| load_asset(p).with_context(|| format!("cannot load {}", p.display()));
            let (pred, truth) = (load(&a.pred)?, load(&a.truth)?);
            let mut report = MetricsReport {
                cd: Some(chamfer_distance(pred.points(), truth.points())?),
                iou: Some(occupancy_iou(
                    &voxelize(pred.points(), opts.iou_resolution),
                    &voxelize(truth.points(), opts.iou_resolution),
                )?),
                f_score: Some(f_score(pred.points(), truth.points(), opts.tau)?),
                ..Default::default()
            };
            if pred.len() == truth.len() {
                report.merge(&material_report(
                    pred.materials(),
                    truth.materials(),
                    Some((pred.colors(), truth.colors())),
                )?);
            } else {
                eprintln!(
                    "note: {} vs {} points; material and color errors need point correspondence and are skipped",
                    pred.len(),
                    truth.len()
                );
            }
            ("asset", report)
        }
        (x, y) => bail!(
            "cannot compare {} with {} (expected two .trj trajectories or two .sra assets, got `{x}` and `{y}`)",
            a.pred.display(),
            a.truth.display()
        ),
    };
    if a.json {
        println!("{}", serde_json::to_string_pretty(&report.to_json())?);
    } else {
        print!("{}", report.to_text());
    }
    if let Some(out) = &a.out {
        let record = json!({
            "pred": a.pred,
            "truth": a.truth,
            "kind": kind,
            "options": {"tau": opts.tau, "iou_resolution": opts.iou_resolution},
            "metrics": report.to_json(),
        });
        std::fs::write(out, serde_json::to_string_pretty(&record)? + "\n")
            .with_context(|| format!("cannot write {}", out.display()))?;
    }
    Ok(())
}

/// File-name-safe id from a path stem.
fn id_from_path(p: &Path) -> String {
    let stem = p.file_stem().and_then(|s| s.to_str()).unwrap_or("session");
    let id: String = stem
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '-'
            }
        })
        .take(64)
        .collect();
    if id.is_empty() {
        "session".into()
    } else {
        id
    }
}

fn chat_client(mock: bool, fixtures: Option<PathBuf>) -> Result<Arc<dyn ChatClient>> {
    Ok(if mock {
        Arc::new(MockClient::new(fixtures))
    } else {
        Arc::new(HttpChatClient::from_env(RetryPolicy::default())?)
    })
}

fn annotate(a: AnnotateArgs) -> Result<()> {
    let text = std::fs::read_to_string(&a.description)
        .with_context(|| format!("cannot read description {}", a.description.display()))?;
    let mut desc: ObjectDescription = serde_json::from_str(&text)
        .with_context(|| format!("invalid description {}", a.description.display()))?;
    let base = a.description.parent().unwrap_or(Path::new(""));
    for img in desc.images.iter_mut() {
        let is_url = img.contains("://") || img.starts_with("data:");
        if !is_url && Path::new(img).is_relative() {
            *img = base.join(&*img).display().to_string();
        }
    }
    if let Some(asset) = desc
        .asset_path
        .as_mut()
        .filter(|p| Path::new(p.as_str()).is_relative())
    {
        *asset = base.join(&*asset).display().to_string();
    }
    let id = a.id.clone().unwrap_or_else(|| id_from_path(&a.description));
    let mode = match a.mode {
        Mode::Strict => ValidationMode::Strict,
        Mode::Lenient => ValidationMode::Lenient,
    };
    let client = chat_client(a.mock, a.fixtures.clone())?;
    let mut session = AnnotationSession::new(&id, desc, mode)?;
    let result = session.run_initial_round(client.as_ref());

    let out = match &a.out {
        Some(p) => p.clone(),
        None => a.data_dir.join("sessions").join(format!("{id}.json")),
    };
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    std::fs::write(&out, serde_json::to_string_pretty(&session)? + "\n")
        .with_context(|| format!("cannot write {}", out.display()))?;
    print!("{}", summary(&session));
    println!("session record: {}", out.display());
    result.context("annotation round failed")?;
    Ok(())
}

fn summary(s: &AnnotationSession) -> String {
    let mut out = format!(
        "session {}: {:?} ({} iteration(s), rectification count {})\n",
        s.id,
        s.state,
        s.iterations.len(),
        s.rectification_count()
    );
    for round in &s.fine_rounds {
        for (part, fine) in &round.adopted {
            out += &format!("fine material: {part} = {fine}\n");
        }
        for e in &round.errors {
            out += &format!("fine material ({}): {e}\n", round.coarse_material);
        }
    }
    let Some(it) = s.latest() else {
        return out;
    };
    out += &iteration_summary(it);
    out
}

fn iteration_summary(it: &Iteration) -> String {
    let mut out = String::new();
    if let Some(e) = &it.parse_error {
        out += &format!("response could not be parsed: {e}\nthe session is re-queryable\n");
    }
    if let Some(p) = &it.proposal {
        for w in &p.warnings {
            out += &format!("warning: {w}\n");
        }
    }
    match &it.validation {
        Some(ValidationOutcome::Accepted(v)) => {
            out += "validation: accepted\n";
            for (part, m) in &v.materials {
                out += &format!(
                    "  {part}: {} E={:e} Pa nu={}",
                    m.behavior, m.youngs_modulus, m.poisson_ratio
                );
                if let Some(s) = m.yield_stress {
                    out += &format!(" sigma_y={s:e} Pa");
                }
                if let Some(phi) = m.friction_angle {
                    out += &format!(" phi={phi} rad");
                }
                out += &format!(" rho={} kg/m^3\n", m.density);
            }
            for adj in &v.adjustments {
                out += &format!(
                    "  clamped {}.{}: {} -> {}\n",
                    adj.part, adj.parameter, adj.original, adj.adjusted
                );
            }
            for n in &v.notes {
                out += &format!("  note: {n}\n");
            }
        }
        Some(ValidationOutcome::Rejected { violations }) => {
            out += "validation: rejected\n";
            for v in violations {
                out += &format!("  {v}\n");
            }
            out += "the session is re-queryable\n";
        }
        None => {}
    }
    out
}

fn serve(a: ServeArgs) -> Result<()> {
    let mut cfg = ServiceConfig::new(&a.data_dir);
    cfg.static_dir = a.static_dir.clone();
    cfg.max_concurrent_jobs = a.max_jobs;
    if let Some(p) = &a.config {
        cfg.default_sim = RunConfig::load(p)?.sim;
        cfg.default_sim.validate().map_err(anyhow::Error::msg)?;
    }
    let client = chat_client(a.mock, a.fixtures.clone())?;
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()?;
    rt.block_on(async move {
        let service = Service::open(cfg, client)
            .with_context(|| format!("cannot open data directory {}", a.data_dir.display()))?;
        let listener = tokio::net::TcpListener::bind((a.host.as_str(), a.port))
            .await
            .with_context(|| format!("cannot bind {}:{}", a.host, a.port))?;
        println!("listening on http://{}", listener.local_addr()?);
        std::io::stdout().flush()?;
        axum::serve(listener, service.router())
            .with_graceful_shutdown(shutdown_signal())
            .await?;
        eprintln!("shutting down: finalizing jobs");
        service.shutdown().await;
        Ok(())
    })
}

async fn shutdown_signal() {
    #[cfg(unix)]
    {
        use tokio::signal::unix::{signal, SignalKind};
        let mut term = signal(SignalKind::terminate()).expect("SIGTERM handler");
        tokio::select! {
            _ = tokio::signal::ctrl_c() => {}
            _ = term.recv() => {}
        }
    }
    #[cfg(not(unix))]
    let _ = tokio::signal::ctrl_c().await;
}

fn convert(a: ConvertArgs) -> Result<()> {
    let asset =
        load_asset(&a.input).with_context(|| format!("cannot load asset {}", a.input.display()))?;
    let encoding = match a.to {
        Encoding::Text => AssetEncoding::Text,
        Encoding::Binary => AssetEncoding::Binary,
    };
    save_asset(&asset, &a.output, encoding)
        .with_context(|| format!("cannot write {}", a.output.display()))?;
    println!(
        "wrote {} ({} points, {:?})",
        a.output.display(),
        asset.len(),
        a.to
    );
    Ok(())
}
