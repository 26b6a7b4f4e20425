use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use tomocal_core::dcc::{fanbeam_moment_consistency, parallel_moment_consistency, AngleView, WeightedView};
use tomocal_core::fanbeam::{
    calibrate_fanbeam, calibrate_fanbeam_ungrouped, project_rig_fanbeam, ClassifyOptions,
    FanBeamCalibOptions, ReferenceView,
};
use tomocal_core::harness::{
    add_detection_noise, run_experiment, sample_scenario, stream_rng, ExperimentConfig, Scenario,
    DEFAULT_SEED,
};
use tomocal_core::parallel::{calibrate_parallel, project_markers_parallel, Branch, ParallelCalibOptions, ViewPair};
use tomocal_core::{validate_rig, FanBeamPattern, FanBeamRig, FanBeamView, Geometry, ParallelView, Rig};

use crate::error::{exit, CliError, CliResult};
use crate::io::{config_hash, fmt_f64, read_json, to_pretty_json, write_output, ProjectionTable, RunManifest};

pub struct SimulateArgs {
    pub rig: PathBuf,
    pub views: Option<PathBuf>,
    pub random: Option<usize>,
    pub seed: Option<u64>,
    pub noise: f64,
    pub pixel_size: f64,
    pub out: Option<PathBuf>,
    pub truth: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
}

fn load_rig(path: &Path) -> CliResult<Rig> {
    let rig: Rig = read_json(path, "rig")?;
    let violations = validate_rig(&rig);
    if let Some(v) = violations.first() {
        return Err(CliError::input(format!("invalid rig {}: {v}", path.display())));
    }
    Ok(rig)
}

fn read_views(path: &Path, rig: &Rig) -> CliResult<Scenario> {
    Ok(match rig {
        Rig::Parallel(r) => Scenario::Parallel {
            rig: r.clone(),
            views: read_json::<Vec<ParallelView>>(path, "views")?,
        },
        Rig::Fanbeam(r) => Scenario::Fanbeam {
            rig: *r,
            views: read_json::<Vec<FanBeamView>>(path, "views")?,
        },
    })
}

fn now() -> chrono::DateTime<chrono::Utc> {
    chrono::Utc::now()
}

pub fn simulate(args: SimulateArgs) -> CliResult<u8> {
    let started = now();
    let rig = load_rig(&args.rig)?;
    if !(args.noise.is_finite() && args.noise >= 0.0 && args.pixel_size > 0.0) {
        return Err(CliError::input("noise must be >= 0 and pixel size > 0"));
    }
    let seed = args.seed.unwrap_or(DEFAULT_SEED);
    let scenario = match (&args.views, args.random) {
        (Some(path), None) => read_views(path, &rig)?,
        (None, Some(n)) => {
            let mut cfg = match &rig {
                Rig::Parallel(r) => ExperimentConfig::parallel(r.clone(), n),
                Rig::Fanbeam(r) => ExperimentConfig::fanbeam(*r, n),
            };
            cfg.seed = seed;
            cfg.validate()?;
            sample_scenario(&cfg, &mut stream_rng(seed, 0))
        }
        _ => return Err(CliError::input("give exactly one of --views or --random")),
    };

    let mut projections = Vec::new();
    match &scenario {
        Scenario::Parallel { rig, views } => {
            for (i, &v) in views.iter().enumerate() {
                projections.extend(project_markers_parallel(rig, i, v));
            }
        }
        Scenario::Fanbeam { rig, views } => {
            for (i, &v) in views.iter().enumerate() {
                let p = project_rig_fanbeam(rig, i, v).map_err(|e| CliError::input(format!("view {i}: {e}")))?;
                projections.extend(p);
            }
        }
    }
    if args.noise > 0.0 {
        let mut rng = stream_rng(seed, 1);
        for p in &mut projections {
            p.positions = add_detection_noise(&p.positions, args.noise, args.pixel_size, &mut rng);
        }
    }

    let table = ProjectionTable::from_projections(&projections);
    write_output(args.out.as_deref(), &table.to_csv())?;
    if let Some(path) = &args.truth {
        write_output(Some(path), &to_pretty_json(&scenario))?;
    }
    if let Some(path) = &args.manifest {
        let config = json!({
            "rig": rig,
            "views": args.views,
            "random": args.random,
            "noise": args.noise,
            "pixel_size": args.pixel_size,
            "seed": seed,
        });
        let mut m = RunManifest::new("simulate", config_hash(&config), Some(seed), started);
        m.outputs = [&args.out, &args.truth].into_iter().flatten().cloned().collect();
        write_output(Some(path), &to_pretty_json(&m))?;
    }
    Ok(exit::OK)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceChoice {
    BestExcited,
    Average,
    Index(usize),
}

impl std::str::FromStr for ReferenceChoice {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "best-excited" => Ok(ReferenceChoice::BestExcited),
            "average" => Ok(ReferenceChoice::Average),
            _ => s
                .parse()
                .map(ReferenceChoice::Index)
                .map_err(|_| format!("expected best-excited, average or a view index, got {s:?}")),
        }
    }
}

pub struct CalibrateArgs {
    pub projections: PathBuf,
    pub branch: Branch,
    pub view_pair: ViewPair,
    pub rig: Option<PathBuf>,
    pub d: Option<f64>,
    pub pattern: Option<FanBeamPattern>,
    pub reference_view: ReferenceChoice,
    pub classify: bool,
    pub cross_ratio_tol: f64,
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
struct ParallelDiagnostics {
    /// `cos² + sin² - 1` of every raw angle estimate.
    unit_residuals: Vec<f64>,
    max_abs_unit_residual: f64,
}

fn fanbeam_geometry(args: &CalibrateArgs) -> CliResult<(f64, FanBeamPattern)> {
    let from_rig = match &args.rig {
        Some(path) => match load_rig(path)? {
            Rig::Fanbeam(r) => Some(r),
            Rig::Parallel(_) => return Err(CliError::input("fan-beam projections need a fan-beam rig")),
        },
        None => None,
    };
    let d = args.d.or(from_rig.map(|r| r.d));
    let pattern = args.pattern.or(from_rig.map(|r: FanBeamRig| r.pattern()));
    match (d, pattern) {
        (Some(d), Some(p)) if d.is_finite() && d > 0.0 => Ok((d, p)),
        (Some(d), Some(_)) => Err(CliError::input(format!("D = {d} must be positive"))),
        _ => Err(CliError::input(
            "fan-beam calibration needs D and the pattern (L, k1, k2, k3) from --rig or explicit flags",
        )),
    }
}

pub fn calibrate(args: CalibrateArgs) -> CliResult<u8> {
    let table = ProjectionTable::read(&args.projections)?;
    let report = match table.geometry()? {
        Geometry::Parallel => {
            let obs = table.parallel_observations()?;
            let res = calibrate_parallel(
                &obs,
                ParallelCalibOptions {
                    branch: args.branch,
                    view_pair: args.view_pair,
                },
            )?;
            let diagnostics = ParallelDiagnostics {
                max_abs_unit_residual: res.unit_residuals.iter().fold(0.0, |m, r| m.max(r.abs())),
                unit_residuals: res.unit_residuals.clone(),
            };
            json!({ "geometry": Geometry::Parallel, "result": res, "diagnostics": diagnostics })
        }
        Geometry::Fanbeam => {
            let (d, pattern) = fanbeam_geometry(&args)?;
            let options = FanBeamCalibOptions {
                reference_view: match args.reference_view {
                    ReferenceChoice::BestExcited => ReferenceView::BestExcited,
                    ReferenceChoice::Average => ReferenceView::Average,
                    ReferenceChoice::Index(i) => ReferenceView::Index(i),
                },
                classify: ClassifyOptions {
                    rel_tol: args.cross_ratio_tol,
                    ..Default::default()
                },
            };
            let res = if args.classify {
                let pooled: Vec<Vec<f64>> = table.pooled()?.into_iter().map(|(p, _)| p).collect();
                calibrate_fanbeam_ungrouped(&pooled, &pattern, d, &options)?
            } else {
                calibrate_fanbeam(&table.fanbeam_observations()?, &pattern, d, &options)?
            };
            json!({ "geometry": Geometry::Fanbeam, "D": d, "pattern": pattern, "result": res })
        }
    };
    write_output(args.out.as_deref(), &to_pretty_json(&report))?;
    Ok(exit::OK)
}

pub struct ExperimentArgs {
    pub config: PathBuf,
    pub out_dir: PathBuf,
    pub seed: Option<u64>,
    pub realizations: Option<usize>,
}

pub fn experiment(args: ExperimentArgs) -> CliResult<u8> {
    let started = now();
    let mut config: ExperimentConfig = read_json(&args.config, "experiment config")?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(n) = args.realizations {
        config.n_realizations = n;
    }
    config.validate()?;
    let result = run_experiment(&config)?;

    let names: Vec<&str> = match config.geometry() {
        Geometry::Parallel => vec!["ErrS", "ErrA_I", "ErrA_II"],
        Geometry::Fanbeam => vec!["ErrLambda", "ErrY", "ErrP", "ErrC"],
    };
    let mut summary = format!("noise_level,sigma,{},successes,failures\n", names.join(","));
    let mut long = String::from("noise_level,sigma,metric,value\n");
    for level in &result.levels {
        let values: Vec<String> = match &level.errors {
            Some(e) => e.metrics().iter().map(|(_, v)| fmt_f64(*v)).collect(),
            None => vec!["NaN".to_string(); names.len()],
        };
        summary.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt_f64(level.noise_level),
            fmt_f64(level.sigma),
            values.join(","),
            level.successes,
            level.failures
        ));
        for (name, v) in names.iter().zip(&values) {
            long.push_str(&format!("{},{},{name},{v}\n", fmt_f64(level.noise_level), fmt_f64(level.sigma)));
        }
    }
    let mut jsonl = String::new();
    for r in &result.realizations {
        jsonl.push_str(&serde_json::to_string(r).expect("log serializes"));
        jsonl.push('\n');
    }

    fs::create_dir_all(&args.out_dir).map_err(|e| CliError::io(format!("creating {}", args.out_dir.display()), e))?;
    let outputs: Vec<PathBuf> = ["summary.csv", "long.csv", "realizations.jsonl", "scenario.json"]
        .iter()
        .map(|f| args.out_dir.join(f))
        .collect();
    write_output(Some(&outputs[0]), &summary)?;
    write_output(Some(&outputs[1]), &long)?;
    write_output(Some(&outputs[2]), &jsonl)?;
    write_output(Some(&outputs[3]), &to_pretty_json(&result.scenario))?;
    let mut manifest = RunManifest::new("experiment", config_hash(&config), Some(config.seed), started);
    manifest.outputs = outputs;
    write_output(Some(&args.out_dir.join("manifest.json")), &to_pretty_json(&manifest))?;

    print!("{summary}");
    if let Some(level) = result.levels.iter().find(|l| l.successes == 0) {
        return Err(CliError::AllFailed {
            level: level.noise_level,
        });
    }
    Ok(exit::OK)
}

pub struct DccArgs {
    pub projections: PathBuf,
    pub truth: PathBuf,
    pub k_max: usize,
    pub raw: bool,
    pub out: Option<PathBuf>,
}

#[derive(Deserialize)]
struct TruthFile(Scenario);

pub fn dcc_check(args: DccArgs) -> CliResult<u8> {
    let table = ProjectionTable::read(&args.projections)?;
    let TruthFile(truth) = read_json(&args.truth, "truth")?;
    let pooled = table.pooled()?;
    let mismatch = |n: usize| {
        CliError::input(format!(
            "truth has {n} views but the projections have {}",
            pooled.len()
        ))
    };
    let report = match (&truth, table.geometry()?) {
        (Scenario::Parallel { views, .. }, Geometry::Parallel) => {
            if views.len() != pooled.len() {
                return Err(mismatch(views.len()));
            }
            let dcc_views: Vec<AngleView> = views
                .iter()
                .zip(pooled)
                .map(|(v, (pos, _))| AngleView {
                    alpha: v.alpha,
                    positions: pos.iter().map(|x| if args.raw { *x } else { x - v.shift }).collect(),
                })
                .collect();
            parallel_moment_consistency(&dcc_views, args.k_max).map_err(|e| CliError::input(e.to_string()))?
        }
        (Scenario::Fanbeam { views, .. }, Geometry::Fanbeam) => {
            if !table.has_weights() {
                return Err(CliError::input(
                    "fan-beam consistency needs the weight column written by `simulate`",
                ));
            }
            if views.len() != pooled.len() {
                return Err(mismatch(views.len()));
            }
            let dcc_views: Vec<WeightedView> = views
                .iter()
                .zip(pooled)
                .map(|(v, (pos, w))| WeightedView {
                    lambda: v.lambda,
                    positions: pos.iter().map(|x| if args.raw { *x } else { x - v.jitter }).collect(),
                    weights: w,
                })
                .collect();
            fanbeam_moment_consistency(&dcc_views, args.k_max).map_err(|e| CliError::input(e.to_string()))?
        }
        _ => return Err(CliError::input("truth and projections describe different geometries")),
    };
    write_output(args.out.as_deref(), &to_pretty_json(&report))?;
    Ok(if report.pass { exit::OK } else { exit::INCONSISTENT })
}

pub fn validate_rig_file(path: &Path) -> CliResult<u8> {
    let rig: Rig = read_json(path, "rig")?;
    let violations = validate_rig(&rig);
    let valid = violations.is_empty();
    write_output(None, &to_pretty_json(&json!({ "valid": valid, "violations": violations })))?;
    Ok(if valid { exit::OK } else { exit::INVALID_INPUT })
}
