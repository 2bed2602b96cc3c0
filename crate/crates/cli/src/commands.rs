use std::collections::BTreeMap;
use std::path::Path;

use eflab_core::approx::{compile, CompileOptions};
use eflab_core::dimension::{estimate_dimension, CoverKind};
use eflab_core::harness::{clamp_level, run_sweep_with_jobs, SweepConfig};
use eflab_core::net::{architect, FinalActivation, SizingRule};
use eflab_core::rng::{derive_seed, seeded};
use eflab_core::synth::{dataset_from_csv, dataset_to_csv, make_dataset, DatasetSidecar, HolderTarget, LambdaSpec};
use eflab_core::train::{fit, trace_csv, Dataset, TrainConfig};
use eflab_core::{ExpFamily, FamilyKind};
use serde_json::json;

use crate::config::{ApproxCmdConfig, DimCmdConfig, GenConfig, SweepCmdConfig, TrainCmdConfig};
use crate::manifest::{hash_file, Manifest, OutputDir};
use crate::CliError;

/// Tags a library error with the flag it came from.
fn flag<T>(name: &str, r: eflab_core::Result<T>) -> Result<T, CliError> {
    r.map_err(|e| CliError::from(e).context(&format!("--{name}")))
}

fn pretty(v: &impl serde::Serialize) -> Result<String, CliError> {
    serde_json::to_string_pretty(v).map(|s| s + "\n").map_err(|e| CliError::Runtime(e.to_string()))
}

fn family_kind(name: &str) -> Result<FamilyKind, CliError> {
    Ok(flag("family", ExpFamily::from_name(name))?.kind)
}

pub fn gen(cfg: &GenConfig) -> Result<Manifest, CliError> {
    let family = flag("family", ExpFamily::from_name(&cfg.family))?;
    let lambda = flag("lambda", LambdaSpec::from_name(&cfg.lambda, cfg.d, cfg.cantor_levels))?;
    let target = flag("target", HolderTarget::parse(&cfg.target, lambda.dim(), cfg.beta, cfg.holder_c))?;
    let data = make_dataset(&lambda, &target, &family, cfg.n, &mut seeded(cfg.seed)).map_err(CliError::from)?;
    let sidecar = DatasetSidecar { n: cfg.n, d: lambda.dim(), family: family.kind, lambda, target, seed: cfg.seed };

    let mut out = OutputDir::create(&cfg.output_dir)?;
    out.write("data.csv", dataset_to_csv(&data))?;
    out.write("data.json", pretty(&sidecar)?)?;
    println!("wrote {} samples of dimension {} to {}", data.len(), data.dim, out.path("data.csv").display());
    out.finish("gen", cfg, BTreeMap::new(), json!({ "n": data.len(), "d": data.dim }))
}

type TrainingInputs = (Dataset, Option<DatasetSidecar>, BTreeMap<String, String>);

fn load_training_data(cfg: &TrainCmdConfig) -> Result<TrainingInputs, CliError> {
    if !cfg.data.is_file() {
        return Err(CliError::Config(format!("--data: {} does not exist", cfg.data.display())));
    }
    let mut inputs = BTreeMap::new();
    inputs.insert(cfg.data.display().to_string(), hash_file(&cfg.data)?);
    let sidecar_path = cfg.sidecar.clone().unwrap_or_else(|| cfg.data.with_extension("json"));
    let sidecar = if sidecar_path.is_file() {
        inputs.insert(sidecar_path.display().to_string(), hash_file(&sidecar_path)?);
        let text = std::fs::read_to_string(&sidecar_path).map_err(CliError::from_io)?;
        let s: DatasetSidecar = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("--sidecar {}: {e}", sidecar_path.display())))?;
        Some(s)
    } else if cfg.sidecar.is_some() {
        return Err(CliError::Config(format!("--sidecar: {} does not exist", sidecar_path.display())));
    } else {
        None
    };
    let kind = match (&cfg.family, &sidecar) {
        (Some(name), _) => family_kind(name)?,
        (None, Some(s)) => s.family,
        (None, None) => {
            return Err(CliError::Config(format!(
                "--family is required: no sidecar found at {}",
                sidecar_path.display()
            )))
        }
    };
    let text = std::fs::read_to_string(&cfg.data).map_err(CliError::from_io)?;
    let data = flag("data", dataset_from_csv(&text, kind))?;
    Ok((data, sidecar, inputs))
}

pub fn train(cfg: &TrainCmdConfig) -> Result<Manifest, CliError> {
    let (data, sidecar, inputs) = load_training_data(cfg)?;
    let (d, n) = (data.dim, data.len());
    let (depth, weight_budget) = if cfg.auto_size {
        let rule = SizingRule::new(cfg.beta, cfg.d_effective.unwrap_or(d as f64), n, d)
            .with_constants(cfg.c_depth, cfg.c_width);
        flag("auto-size", rule.size_for())?
    } else {
        (cfg.depth, cfg.weights)
    };
    let clamp = match (cfg.clamp, &sidecar) {
        (Some(r), _) => Some(r),
        (None, Some(s)) => Some(clamp_level(flag("beta", s.target.holder_norm(cfg.beta))?)),
        (None, None) => None,
    };
    let act = clamp.map_or(FinalActivation::Identity, |r| FinalActivation::Clamp { r });
    let net = flag("weights", architect(depth, weight_budget, d, &mut seeded(derive_seed(cfg.seed, &[1]))))?;
    let net = flag("clamp", net.with_final_activation(act))?;
    let tc = TrainConfig {
        epochs: cfg.epochs,
        batch_size: cfg.batch_size,
        learning_rate: cfg.learning_rate,
        optimizer: flag("optimizer", cfg.optimizer.parse())?,
        seed: derive_seed(cfg.seed, &[2]),
    };
    flag("batch-size", tc.validate(n))?;
    let res = fit(&net, &data, &tc)?;

    let mut out = OutputDir::create(&cfg.output_dir)?;
    out.write("model.json", res.net.to_json())?;
    out.write("trace.csv", trace_csv(&res.trace))?;
    println!(
        "trained depth {} / {} weights on {n} samples: risk {:.6} -> {:.6} (epoch {})",
        res.net.depth(),
        res.net.weight_count(),
        res.initial_risk,
        res.best_risk,
        res.best_epoch
    );
    let derived = json!({
        "n": n,
        "d": d,
        "depth": depth,
        "weight_budget": weight_budget,
        "weights": res.net.weight_count(),
        "hidden_widths": res.net.hidden_widths(),
        "clamp": clamp,
        "initial_risk": res.initial_risk,
        "best_risk": res.best_risk,
        "best_epoch": res.best_epoch,
    });
    out.finish("train", cfg, inputs, derived)
}

pub fn approx(cfg: &ApproxCmdConfig) -> Result<Manifest, CliError> {
    let target = flag("target", HolderTarget::parse(&cfg.target, cfg.d, cfg.beta, cfg.holder_c))?;
    let opts = CompileOptions { p: cfg.p, eta0: cfg.eta0, mc_points: cfg.mc_points, seed: cfg.seed };
    let (net, cert) = flag("eta", compile(&target, cfg.beta, cfg.d, cfg.eta, &opts))?;

    let mut out = OutputDir::create(&cfg.output_dir)?;
    out.write("cert.json", pretty(&cert)?)?;
    let saved = cert.weights <= cfg.save_net_limit;
    if saved {
        out.write("model.json", net.to_relu_net()?.to_json())?;
    }
    let within = cert.measured_error <= cert.bound;
    println!(
        "depth {} weights {}: L{} error {:.3e} (se {:.1e}), bound {:.3e}{}",
        cert.depth,
        cert.weights,
        cfg.p,
        cert.measured_error,
        cert.standard_error,
        cert.bound,
        if within { "" } else { "  [EXCEEDS BOUND]" }
    );
    let derived = json!({
        "depth": cert.depth,
        "weights": cert.weights,
        "measured_error": cert.measured_error,
        "bound": cert.bound,
        "within_bound": within,
        "model_saved": saved,
    });
    out.finish("approx", cfg, BTreeMap::new(), derived)
}

pub fn dim(cfg: &DimCmdConfig) -> Result<Manifest, CliError> {
    let mut inputs = BTreeMap::new();
    let (xs, d) = match &cfg.data {
        Some(path) => {
            if !path.is_file() {
                return Err(CliError::Config(format!("--data: {} does not exist", path.display())));
            }
            inputs.insert(path.display().to_string(), hash_file(path)?);
            let text = std::fs::read_to_string(path).map_err(CliError::from_io)?;
            // responses are ignored; Gaussian accepts any real column
            let data = flag("data", dataset_from_csv(&text, FamilyKind::Gaussian))?;
            (data.xs, data.dim)
        }
        None => {
            let lambda = flag("lambda", LambdaSpec::from_name(&cfg.lambda, cfg.d, cfg.cantor_levels))?;
            let xs = flag("n", eflab_core::synth::sample_lambda(&lambda, cfg.n, &mut seeded(cfg.seed)))?;
            (xs, lambda.dim())
        }
    };
    let kind = match cfg.kind.to_ascii_lowercase().as_str() {
        "support" => CoverKind::SupportCover,
        "mass" => CoverKind::MassCover { alpha: cfg.alpha.unwrap_or(2.0 * cfg.beta) },
        other => return Err(CliError::Config(format!("--kind: unknown cover '{other}' (expected support or mass)"))),
    };
    let window = cfg.window.map(|[lo, hi]| (lo, hi));
    let (profile, est) = flag("window", estimate_dimension(&xs, d, kind, window, cfg.scales))?;

    let mut out = OutputDir::create(&cfg.output_dir)?;
    out.write("profile.csv", profile.to_csv())?;
    out.write("estimate.json", pretty(&json!({ "n": xs.len() / d, "d": d, "kind": kind, "estimate": est }))?)?;
    println!("dimension estimate {:.4} over scales {}..={}", est.slope, est.scale_range.0, est.scale_range.1);
    out.finish("dim", cfg, inputs, json!({ "slope": est.slope, "scale_range": est.scale_range }))
}

pub fn sweep(cfg: &SweepCmdConfig, jobs: Option<usize>) -> Result<Manifest, CliError> {
    let lambda = flag("lambda", LambdaSpec::from_name(&cfg.lambda, cfg.d, cfg.cantor_levels))?;
    let sc = SweepConfig {
        n_grid: cfg.n_grid.clone(),
        seeds_per_n: cfg.seeds_per_n,
        beta: cfg.beta,
        lambda,
        family: family_kind(&cfg.family)?,
        target: flag("target", HolderTarget::parse(&cfg.target, lambda.dim(), cfg.beta, cfg.holder_c))?,
        d_effective: cfg.d_effective.unwrap_or(lambda.dim() as f64),
        mc_test_points: cfg.mc_points,
        master_seed: cfg.seed,
        c_depth: cfg.c_depth,
        c_width: cfg.c_width,
        train: TrainConfig {
            epochs: cfg.epochs,
            batch_size: cfg.batch_size,
            learning_rate: cfg.learning_rate,
            optimizer: flag("optimizer", cfg.optimizer.parse())?,
            seed: 0,
        },
        dim_scales: cfg.dim_scales,
    };
    sc.validate()?;
    let jobs = jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let report = run_sweep_with_jobs(&sc, jobs)?;

    let mut out = OutputDir::create(&cfg.output_dir)?;
    out.write("cells.csv", report.cells_csv())?;
    out.write("summary.json", report.summary_json()? + "\n")?;
    out.write("slope.dat", report.gnuplot())?;
    for &(n, m) in &report.medians {
        println!("n = {n:>6}  median L2^2 = {m:.4e}");
    }
    match report.slope() {
        Some(s) => println!(
            "slope {s:.3}; ambient exponent {:.3}, effective exponent {:.3}",
            report.ambient_exponent, report.effective_exponent
        ),
        None => println!("no slope: fewer than two sample sizes produced an error"),
    }
    if report.failed_cells > 0 {
        eprintln!("warning: {} of {} cells failed (see cells.csv)", report.failed_cells, report.cells.len());
    }
    let derived = json!({
        "slope": report.slope(),
        "ambient_exponent": report.ambient_exponent,
        "effective_exponent": report.effective_exponent,
        "failed_cells": report.failed_cells,
    });
    out.finish("sweep", cfg, BTreeMap::new(), derived)
}

fn from_manifest<T: serde::de::DeserializeOwned>(m: &Manifest) -> Result<T, CliError> {
    serde_json::from_value(m.config.clone())
        .map_err(|e| CliError::Config(format!("manifest config of '{}': {e}", m.command)))
}

/// Reruns the command recorded in `manifest` into `output_dir` and compares
/// every output hash. Inputs must still match their recorded hashes.
pub fn replay(manifest: &Manifest, output_dir: &Path) -> Result<(), CliError> {
    for (path, want) in &manifest.inputs {
        let got = hash_file(Path::new(path))?;
        if &got != want {
            return Err(CliError::Runtime(format!("input {path} changed since the recorded run")));
        }
    }
    let fresh = match manifest.command.as_str() {
        "gen" => gen(&GenConfig { output_dir: output_dir.into(), ..from_manifest(manifest)? })?,
        "train" => train(&TrainCmdConfig { output_dir: output_dir.into(), ..from_manifest(manifest)? })?,
        "approx" => approx(&ApproxCmdConfig { output_dir: output_dir.into(), ..from_manifest(manifest)? })?,
        "dim" => dim(&DimCmdConfig { output_dir: output_dir.into(), ..from_manifest(manifest)? })?,
        "sweep" => sweep(&SweepCmdConfig { output_dir: output_dir.into(), ..from_manifest(manifest)? }, None)?,
        other => return Err(CliError::Config(format!("manifest records unknown command '{other}'"))),
    };
    let mut mismatches = 0;
    let names: std::collections::BTreeSet<&String> = manifest.outputs.keys().chain(fresh.outputs.keys()).collect();
    for name in names {
        let (a, b) = (manifest.outputs.get(name), fresh.outputs.get(name));
        let ok = a.is_some() && a == b;
        mismatches += usize::from(!ok);
        println!("{} {name}", if ok { "identical" } else { "DIFFERS  " });
    }
    if mismatches > 0 {
        return Err(CliError::Runtime(format!("{mismatches} output(s) differ from the manifest")));
    }
    Ok(())
}
