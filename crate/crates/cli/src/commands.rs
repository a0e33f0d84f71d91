use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Subcommand};
use holoscope::evalkit::{self, AvgDegree, BlockDetector, SweepReport};
use holoscope::graph::RatingScale;
use holoscope::suspiciousness::SinkSpikes;
use holoscope::synth::{self, BackgroundConfig, GroundTruth, InjectionConfig, TrapConfig};
use holoscope::Graph;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::CliError;
use crate::settings::{DetectArgs, DEFAULT_SEED};

fn read_graph(path: &Path, scale: RatingScale) -> Result<Graph, CliError> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    Ok(Graph::read_csv(BufReader::new(file), scale)?)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, CliError> {
    let path = dir.join(name);
    let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
    Ok(BufWriter::new(file))
}

fn prepare_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn write_json(dir: &Path, name: &str, value: &impl Serialize) -> Result<(), CliError> {
    let mut w = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w).map_err(|e| CliError::io(&dir.join(name), e))?;
    w.flush().map_err(|e| CliError::io(&dir.join(name), e))
}

fn graph_summary(g: &Graph) -> Value {
    json!({
        "users": g.n_users(),
        "objects": g.n_objects(),
        "events": g.n_events(),
        "timestamps": g.has_timestamps(),
        "ratings": g.has_ratings(),
    })
}

#[derive(Args, Debug)]
pub struct DetectCmd {
    /// Edge list: user,object[,timestamp[,rating]].
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "out")]
    pub output_dir: PathBuf,
    /// Also write per-object histograms and bursts to spikes.json.
    #[arg(long)]
    pub dump_spikes: bool,
    #[command(flatten)]
    pub detect: DetectArgs,
}

#[derive(Serialize)]
struct SpikeDump<'a> {
    object: &'a str,
    #[serde(flatten)]
    spikes: &'a SinkSpikes<f64>,
}

pub fn detect(cmd: &DetectCmd) -> Result<(), CliError> {
    let settings = cmd.detect.resolve()?;
    let start = Instant::now();
    let g = read_graph(&cmd.input, settings.scale)?;
    let load = start.elapsed().as_secs_f64();
    let detector = settings.detector(&g)?;

    let t = Instant::now();
    let prepared = detector.prepare(&g)?;
    let prepare = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let seeds = detector.seeds(&prepared)?;
    let seeding = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let result = detector.detect_with_seeds(&prepared, &seeds)?;
    let shaving = t.elapsed().as_secs_f64();

    prepare_dir(&cmd.output_dir)?;
    let mut w = csv::Writer::from_writer(create(&cmd.output_dir, "users.csv")?);
    w.write_record(["user", "score"])?;
    for &(u, s) in &result.user_scores {
        w.write_record([g.user_name(u).to_string(), s.to_string()])?;
    }
    w.flush().map_err(|e| CliError::io(&cmd.output_dir, e))?;

    let mut w = csv::Writer::from_writer(create(&cmd.output_dir, "objects.csv")?);
    w.write_record(["object", "score", "rank"])?;
    for (rank, &(v, s)) in result.sink_scores.iter().enumerate() {
        w.write_record([g.object_name(v).to_string(), s.to_string(), (rank + 1).to_string()])?;
    }
    w.flush().map_err(|e| CliError::io(&cmd.output_dir, e))?;

    if cmd.dump_spikes {
        match &prepared.spikes {
            Some(spikes) => {
                let dump: Vec<SpikeDump> = spikes
                    .iter()
                    .enumerate()
                    .filter_map(|(j, s)| {
                        s.as_ref().map(|spikes| SpikeDump {
                            object: g.object_name(holoscope::ObjectId(j as u32)),
                            spikes,
                        })
                    })
                    .collect();
                write_json(&cmd.output_dir, "spikes.json", &dump)?;
            }
            None => log::warn!("time signal is off, no spikes to dump"),
        }
    }

    let report = json!({
        "command": "detect",
        "input": cmd.input.display().to_string(),
        "seed": settings.seed,
        "hs_star": result.hs,
        "users_detected": result.users.len(),
        "sinks_scored": result.sink_scores.len(),
        "signals": result.signals.to_string(),
        "n_seeds": seeds.len(),
        "best_seed": result.seed_index,
        "best_seed_size": result.seed_size,
        "graph": graph_summary(&g),
        "timings": {
            "load": load,
            "prepare": prepare,
            "seeds": seeding,
            "shaving": shaving,
            "total": start.elapsed().as_secs_f64(),
        },
        "config": settings,
    });
    write_json(&cmd.output_dir, "run.json", &report)?;
    println!(
        "detected {} users, HS = {:.6}, signals {}",
        result.users.len(),
        result.hs,
        result.signals
    );
    Ok(())
}

#[derive(Args, Debug, Clone)]
pub struct InjectArgs {
    /// Number of target objects.
    #[arg(long, default_value_t = 200)]
    pub targets: usize,
    #[arg(long, default_value_t = 200)]
    pub ratings_per_object: usize,
    /// Targets are drawn among objects with at most this many events.
    #[arg(long, default_value_t = 100)]
    pub max_indegree: usize,
    /// Camouflage events as a fraction of fraud events.
    #[arg(long, default_value_t = 0.2)]
    pub camouflage: f64,
    /// Multiplier on resampled inter-arrival gaps.
    #[arg(long, default_value_t = 0.1)]
    pub compression: f64,
}

impl InjectArgs {
    fn config(&self, n_fraudsters: usize, seed: u64) -> InjectionConfig {
        InjectionConfig {
            n_objects: self.targets,
            ratings_per_object: self.ratings_per_object,
            n_fraudsters,
            max_target_indegree: self.max_indegree,
            camouflage_ratio: self.camouflage,
            compression: self.compression,
            seed,
            ..InjectionConfig::default()
        }
    }
}

#[derive(Args, Debug)]
pub struct InjectCmd {
    /// Base edge list.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "out")]
    pub output_dir: PathBuf,
    #[arg(long, default_value_t = 2000)]
    pub n_fraudsters: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Rating scale as min:max:step.
    #[arg(long, default_value = "0.5:5:0.5")]
    pub scale: String,
    #[command(flatten)]
    pub injection: InjectArgs,
}

pub fn inject(cmd: &InjectCmd) -> Result<(), CliError> {
    let scale = RatingScale::parse(&cmd.scale)?;
    let base = read_graph(&cmd.input, scale)?;
    let cfg = cmd.injection.config(cmd.n_fraudsters, cmd.seed);
    let (g, truth) = synth::inject(&base, &cfg)?;
    prepare_dir(&cmd.output_dir)?;
    let mut w = create(&cmd.output_dir, "dataset.csv")?;
    g.write_csv(&mut w)?;
    w.flush().map_err(|e| CliError::io(&cmd.output_dir, e))?;
    let mut w = create(&cmd.output_dir, "labels.csv")?;
    truth.write(&mut w)?;
    w.flush().map_err(|e| CliError::io(&cmd.output_dir, e))?;
    let report = json!({
        "command": "inject",
        "input": cmd.input.display().to_string(),
        "seed": cmd.seed,
        "base_events": base.n_events(),
        "events": g.n_events(),
        "injected_events": g.n_events() - base.n_events(),
        "density": cfg.density(),
        "config": cfg,
    });
    write_json(&cmd.output_dir, "inject.json", &report)?;
    println!(
        "injected {} fraudsters on {} targets, {} new events",
        truth.users.len(),
        truth.objects.len(),
        g.n_events() - base.n_events()
    );
    Ok(())
}

#[derive(Args, Debug, Clone)]
pub struct BackgroundArgs {
    #[arg(long, default_value_t = 10_000)]
    pub users: usize,
    #[arg(long, default_value_t = 5_000)]
    pub objects: usize,
    #[arg(long, default_value_t = 100_000)]
    pub events: usize,
}

impl BackgroundArgs {
    fn config(&self, seed: u64) -> BackgroundConfig {
        BackgroundConfig {
            n_users: self.users,
            n_objects: self.objects,
            n_events: self.events,
            seed,
            ..BackgroundConfig::default()
        }
    }
}

#[derive(Args, Debug)]
pub struct SweepCmd {
    /// Base edge list; a synthetic background is generated when absent.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    pub output_dir: PathBuf,
    /// Injected block densities in (0, 1].
    #[arg(long, value_delimiter = ',', default_value = "1,0.5,0.2,0.1,0.05")]
    pub densities: Vec<f64>,
    /// Skip the average-degree baseline.
    #[arg(long)]
    pub no_baseline: bool,
    #[command(flatten)]
    pub background: BackgroundArgs,
    #[command(flatten)]
    pub injection: InjectArgs,
    #[command(flatten)]
    pub detect: DetectArgs,
}

pub fn sweep(cmd: &SweepCmd) -> Result<(), CliError> {
    let settings = cmd.detect.resolve()?;
    if cmd.densities.is_empty() {
        return Err(CliError::Usage("empty density grid".into()));
    }
    let base = match &cmd.input {
        Some(path) => read_graph(path, settings.scale)?,
        None => synth::gen_background(&cmd.background.config(synth::stream_seed(settings.seed, 0)))?,
    };
    let detector = settings.detector(&base)?;
    // n_fraudsters is filled in per density
    let template = cmd.injection.config(cmd.injection.ratings_per_object, 0);
    let sweep_seed = synth::stream_seed(settings.seed, 1);

    let mut detectors: Vec<&dyn BlockDetector> = vec![&detector];
    if !cmd.no_baseline {
        detectors.push(&AvgDegree);
    }
    let mut reports: Vec<SweepReport> = Vec::new();
    for d in detectors {
        let t = Instant::now();
        let r = evalkit::density_sweep(&base, &cmd.densities, &template, d, sweep_seed)?;
        log::info!("{} sweep took {:.1}s", d.name(), t.elapsed().as_secs_f64());
        reports.push(r);
    }

    prepare_dir(&cmd.output_dir)?;
    let mut w = csv::Writer::from_writer(create(&cmd.output_dir, "curves.csv")?);
    w.write_record([
        "detector",
        "density",
        "n_fraudsters",
        "precision",
        "recall",
        "f1",
        "object_auc",
        "seconds",
        "error",
    ])?;
    let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    for r in &reports {
        for p in &r.points {
            w.write_record([
                r.detector.clone(),
                p.density.to_string(),
                p.n_fraudsters.to_string(),
                opt(p.user.map(|u| u.precision)),
                opt(p.user.map(|u| u.recall)),
                opt(p.user.map(|u| u.f1)),
                opt(p.object_auc),
                format!("{:.3}", p.seconds),
                p.error.clone().unwrap_or_default(),
            ])?;
        }
    }
    w.flush().map_err(|e| CliError::io(&cmd.output_dir, e))?;

    let summary: Vec<Value> = reports
        .iter()
        .map(|r| {
            json!({
                "detector": r.detector,
                "user_auc": r.user_curve.area,
                "object_auc": r.object_curve.area,
                "user_lowest_density": r.user_lowest_density,
                "object_lowest_density": r.object_lowest_density,
            })
        })
        .collect();
    let report = json!({
        "command": "sweep",
        "seed": settings.seed,
        "densities": cmd.densities,
        "base": graph_summary(&base),
        "injection": template,
        "detectors": summary,
        "config": settings,
    });
    write_json(&cmd.output_dir, "summary.json", &report)?;
    for r in &reports {
        println!(
            "{}: user auc {:.4}, object auc {:.4}",
            r.detector, r.user_curve.area, r.object_curve.area
        );
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct BenchCmd {
    /// Event counts, increasing.
    #[arg(long, value_delimiter = ',', default_value = "10000,100000,500000,1000000")]
    pub sizes: Vec<usize>,
    #[arg(long, default_value = "out")]
    pub output_dir: PathBuf,
    #[command(flatten)]
    pub detect: DetectArgs,
}

pub fn bench(cmd: &BenchCmd) -> Result<(), CliError> {
    let settings = cmd.detect.resolve()?;
    // generated graphs carry timestamps and ratings
    let detector = settings.detector_for(true, true)?;
    let report = evalkit::benchmark(&cmd.sizes, &detector, settings.seed)?;
    prepare_dir(&cmd.output_dir)?;
    let mut w = csv::Writer::from_writer(create(&cmd.output_dir, "bench.csv")?);
    for row in &report.rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| CliError::io(&cmd.output_dir, e))?;
    let within_cap = report.rows.iter().all(|r| r.max_seed_size <= r.seed_cap);
    let out = json!({
        "command": "bench",
        "seed": settings.seed,
        "slope": report.slope,
        "seeds_within_cap": within_cap,
        "rows": report.rows,
        "config": settings,
    });
    write_json(&cmd.output_dir, "bench.json", &out)?;
    for r in &report.rows {
        println!(
            "|E| = {:>8}  {:>8.3}s  max seed {} (cap {})",
            r.edges, r.seconds, r.max_seed_size, r.seed_cap
        );
    }
    if let Some(s) = report.slope {
        println!("log-log slope {s:.3}");
    }
    Ok(())
}

#[derive(Subcommand, Debug)]
pub enum GenerateKind {
    /// Rating-site background with timestamps and half-star ratings.
    Background {
        #[command(flatten)]
        size: BackgroundArgs,
    },
    /// Staircase community plus a camouflaged dense rectangle.
    Trap {
        #[arg(long, default_value_t = 5000)]
        users: usize,
        #[arg(long, default_value_t = 5000)]
        objects: usize,
        #[arg(long, default_value_t = 200)]
        block_users: usize,
        #[arg(long, default_value_t = 200)]
        block_objects: usize,
    },
    /// Uniform background with a planted dense block in the first rows and
    /// columns.
    Planted {
        #[arg(long, default_value_t = 1000)]
        users: usize,
        #[arg(long, default_value_t = 800)]
        objects: usize,
        #[arg(long, default_value_t = 60)]
        block_users: usize,
        #[arg(long, default_value_t = 40)]
        block_objects: usize,
        #[arg(long, default_value_t = 0.5)]
        block_density: f64,
        #[arg(long, default_value_t = 0.01)]
        background_density: f64,
    },
}

#[derive(Args, Debug)]
pub struct GenerateCmd {
    #[command(subcommand)]
    pub kind: GenerateKind,
    #[arg(long, default_value = "out", global = true)]
    pub output_dir: PathBuf,
    #[arg(long, default_value_t = DEFAULT_SEED, global = true)]
    pub seed: u64,
}

pub fn generate(cmd: &GenerateCmd) -> Result<(), CliError> {
    let (g, truth, config): (Graph, Option<GroundTruth>, Value) = match &cmd.kind {
        GenerateKind::Background { size } => {
            let cfg = size.config(cmd.seed);
            (synth::gen_background(&cfg)?, None, serde_json::to_value(&cfg)?)
        }
        GenerateKind::Trap {
            users,
            objects,
            block_users,
            block_objects,
        } => {
            let cfg = TrapConfig {
                n_users: *users,
                n_objects: *objects,
                block_users: *block_users,
                block_objects: *block_objects,
                seed: cmd.seed,
                ..TrapConfig::default()
            };
            let t = synth::hyperbolic_trap(&cfg)?;
            let truth = GroundTruth {
                users: t.block_users.iter().map(|&u| t.graph.user_name(u).to_string()).collect(),
                objects: t.block_objects.iter().map(|&v| t.graph.object_name(v).to_string()).collect(),
            };
            (t.graph, Some(truth), serde_json::to_value(&cfg)?)
        }
        GenerateKind::Planted {
            users,
            objects,
            block_users,
            block_objects,
            block_density,
            background_density,
        } => {
            let g: Graph = synth::planted_block(
                *users,
                *objects,
                *block_users,
                *block_objects,
                *block_density,
                *background_density,
                cmd.seed,
            )?;
            let truth = GroundTruth {
                users: (0..*block_users).map(|i| g.user_name(holoscope::UserId(i as u32)).to_string()).collect(),
                objects: (0..*block_objects)
                    .map(|j| g.object_name(holoscope::ObjectId(j as u32)).to_string())
                    .collect(),
            };
            let cfg = json!({
                "n_users": users,
                "n_objects": objects,
                "block_users": block_users,
                "block_objects": block_objects,
                "block_density": block_density,
                "background_density": background_density,
            });
            (g, Some(truth), cfg)
        }
    };
    prepare_dir(&cmd.output_dir)?;
    let mut w = create(&cmd.output_dir, "dataset.csv")?;
    g.write_csv(&mut w)?;
    w.flush().map_err(|e| CliError::io(&cmd.output_dir, e))?;
    if let Some(truth) = &truth {
        let mut w = create(&cmd.output_dir, "labels.csv")?;
        truth.write(&mut w)?;
        w.flush().map_err(|e| CliError::io(&cmd.output_dir, e))?;
    }
    let report = json!({
        "command": "generate",
        "seed": cmd.seed,
        "graph": graph_summary(&g),
        "config": config,
    });
    write_json(&cmd.output_dir, "generate.json", &report)?;
    println!("wrote {} events", g.n_events());
    Ok(())
}
