//! `gmmpp`: simulate from, fit and predict with GMMPP models.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use gmmpp::analysis::{ess, predict, summarize, time_per_100_ess, uniform_grid, Stat, Target};
use gmmpp::config::Config;
use gmmpp::epidemic::predict_stabilization;
use gmmpp::io::{self, RunManifest};
use gmmpp::mcmc::TraceRecord;
use gmmpp::par::{chain_rng, run_chains, Execution};
use gmmpp::simulate::{integrated_intensity, simulate_events, simulate_skeleton};

const GRID_POINTS: usize = 200;
const PREDICT_STREAM: usize = 1 << 20;

#[derive(Parser)]
#[command(name = "gmmpp", version, about = "Generalized Markov modulated Poisson processes")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// Master seed.
    #[arg(long, env = "GMMPP_SEED", default_value_t = 1)]
    seed: u64,
    /// Output directory.
    #[arg(long, env = "GMMPP_OUT", default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate events (and the IF path, unless the config fixes one).
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Fit a model to data.
    Fit {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        chains: Option<usize>,
        #[arg(long)]
        iters: Option<usize>,
        #[arg(long)]
        burnin: Option<usize>,
        #[arg(long)]
        thin: Option<usize>,
        /// Run chains one after another.
        #[arg(long)]
        sequential: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Predict from a fit directory: integrated IF and counts over
    /// `--horizon`, or the epidemic stabilization time for `--threshold`.
    Predict {
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long)]
        threshold: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
}

fn write(path: &Path, s: &str) -> Result<()> {
    fs::write(path, s).with_context(|| format!("writing {}", path.display()))
}

fn cmd_simulate(config: &Path, c: &Common) -> Result<()> {
    let cfg = Config::from_path(config)?;
    let mut rng = chain_rng(c.seed, 0);
    let params = cfg.spec.initial_params();
    let skel = match &cfg.truth {
        Some(t) => t.clone(),
        None => simulate_skeleton(&cfg.spec, &params, 10_000, &mut rng)?,
    };
    let ev = simulate_events(&cfg.spec, &params, &skel, &mut rng)?;
    fs::create_dir_all(&c.out)?;
    io::write_events(&c.out.join("events.txt"), &ev)?;
    write(&c.out.join("truth.csv"), &io::skeleton_csv(&skel))?;
    write(
        &c.out.join("integrated_if.txt"),
        &format!("{}\n", integrated_intensity(&cfg.spec, &params, &skel)),
    )?;
    println!("{} events written to {}", ev.len(), c.out.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_fit(
    config: &Path,
    data: &Path,
    chains: Option<usize>,
    iters: Option<usize>,
    burnin: Option<usize>,
    thin: Option<usize>,
    sequential: bool,
    c: &Common,
) -> Result<()> {
    let cfg_bytes = fs::read(config).with_context(|| format!("reading {}", config.display()))?;
    let data_bytes = fs::read(data).with_context(|| format!("reading {}", data.display()))?;
    let mut cfg = Config::from_toml_str(std::str::from_utf8(&cfg_bytes)?)?;
    if let Some(n) = iters {
        cfg.sampler.n_iter = n;
    }
    if let Some(n) = burnin {
        cfg.sampler.burn_in = n;
        cfg.sampler.adapt_until = cfg.sampler.adapt_until.min(n);
    }
    if let Some(n) = thin {
        cfg.sampler.thin = n;
    }
    cfg.sampler.validate()?;
    let chains = chains.unwrap_or(cfg.chains);
    if chains == 0 {
        bail!("--chains must be at least 1");
    }
    let y = io::ingest(data, cfg.data_kind, cfg.spec.horizon, c.seed)?;
    fs::create_dir_all(&c.out)?;
    let manifest = RunManifest {
        version: env!("CARGO_PKG_VERSION").into(),
        config: config.to_path_buf(),
        data: data.to_path_buf(),
        data_kind: cfg.data_kind,
        seed: c.seed,
        chains,
        chain_streams: (0..chains as u64).collect(),
        out: c.out.clone(),
        n_iter: cfg.sampler.n_iter,
        burn_in: cfg.sampler.burn_in,
        thin: cfg.sampler.thin,
        input_hash: io::input_hash(&cfg_bytes, &data_bytes),
    };
    write(&c.out.join("manifest.json"), &manifest.to_json()?)?;

    let exec = if sequential {
        Execution::Sequential
    } else {
        Execution::default()
    };
    let start = Instant::now();
    let runs = run_chains(&y, &cfg, c.seed, chains, exec)?;
    let wall = start.elapsed().as_secs_f64();

    let mut timing = String::from("chain,seconds,ess_log_post,seconds_per_100_ess\n");
    for r in &runs {
        write(
            &c.out.join(format!("trace_c{}.csv", r.chain + 1)),
            &io::trace_csv(&cfg.spec, &r.records),
        )?;
        let lp: Vec<f64> = r.records.iter().map(|x| x.log_post).collect();
        let e = ess(&lp).unwrap_or(f64::NAN);
        timing.push_str(&format!(
            "{},{},{},{}\n",
            r.chain + 1,
            r.seconds,
            e,
            time_per_100_ess(r.seconds, e)
        ));
    }
    timing.push_str(&format!("all,{wall},,\n"));
    write(&c.out.join("timing.csv"), &timing)?;

    let pooled: Vec<TraceRecord> = runs.iter().flat_map(|r| r.records.iter().cloned()).collect();
    let truth = truth_lookup(&cfg);
    let summary = summarize(
        &cfg.spec,
        &pooled,
        &uniform_grid(cfg.spec.horizon, GRID_POINTS),
        &|n| truth.iter().find(|(k, _)| k == n).map(|x| x.1),
    )?;
    write(&c.out.join("summary.csv"), &io::summary_csv(&summary))?;
    write(&c.out.join("if_grid.csv"), &io::if_grid_csv(&summary))?;
    write(&c.out.join("acceptance.csv"), &io::acceptance_csv(&runs))?;
    println!(
        "{} chains, {} retained draws, {:.2} s; outputs in {}",
        chains,
        pooled.len(),
        wall,
        c.out.display()
    );
    Ok(())
}

/// True values by summary name, for configs that carry a truth path.
fn truth_lookup(cfg: &Config) -> Vec<(String, f64)> {
    if cfg.truth.is_none() {
        return Vec::new();
    }
    let spec = &cfg.spec;
    let mut out = Vec::new();
    for (k, f) in spec.forms.iter().enumerate() {
        for (name, v) in f.param_names().iter().zip(f.initial_params()) {
            out.push((format!("psi{}_{}", k + 1, name), v));
        }
    }
    for k in 0..spec.k() {
        out.push((format!("theta{}", k + 1), spec.q.theta_rates[k]));
        for (t, p) in spec.state_map.trans_targets(k).iter().zip(&spec.q.theta_trans[k]) {
            out.push((format!("p{}_{}", k + 1, t + 1), *p));
        }
    }
    if let Some(t) = &cfg.truth {
        out.push(("n_jumps".into(), t.path.jumps.len() as f64));
        if let Some(j) = t.path.jumps.first() {
            out.push(("t1".into(), j.time));
        }
    }
    out
}

fn cmd_predict(horizon: Option<f64>, threshold: Option<f64>, c: &Common) -> Result<()> {
    let mpath = c.out.join("manifest.json");
    let manifest = RunManifest::from_json(
        &fs::read_to_string(&mpath).with_context(|| format!("reading {}", mpath.display()))?,
    )?;
    let cfg = Config::from_path(&manifest.config)?;
    let mut records = Vec::new();
    for i in 1..=manifest.chains {
        let p = c.out.join(format!("trace_c{i}.csv"));
        let text = fs::read_to_string(&p).with_context(|| format!("missing trace {}", p.display()))?;
        records.extend(io::parse_trace_csv(&cfg.spec, &text)?);
    }
    let (head, rows): (&str, Vec<Vec<f64>>) = match (horizon, threshold) {
        (Some(h), None) => {
            if h.is_nan() || h <= 0.0 {
                bail!("--horizon must be positive, got {h}");
            }
            let mut rng = chain_rng(manifest.seed, PREDICT_STREAM);
            let iif = predict(&cfg.spec, &records, h, &Target::IntegratedIf, &mut rng)?;
            let n = predict(&cfg.spec, &records, h, &Target::EventCount, &mut rng)?;
            (
                "integrated_if,event_count",
                iif.iter().zip(&n).map(|(a, b)| vec![a[0], b[0]]).collect(),
            )
        }
        (None, Some(t)) => {
            if !cfg.spec.is_epidemic() {
                bail!("--threshold applies to epidemic models only");
            }
            let d = predict_stabilization(&records, t, cfg.spec.horizon);
            ("stabilization_time,integrated_if", d.into_iter().map(|(a, b)| vec![a, b]).collect())
        }
        _ => bail!("give exactly one of --horizon and --threshold"),
    };
    let mut draws = format!("{head}\n");
    for r in &rows {
        let s: Vec<String> = r.iter().map(f64::to_string).collect();
        draws.push_str(&s.join(","));
        draws.push('\n');
    }
    write(&c.out.join("predict_draws.csv"), &draws)?;
    let mut summary = String::from("quantity,mean,sd,ci_lo,ci_hi,non_finite\n");
    for (j, name) in head.split(',').enumerate() {
        let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
        let bad = col.iter().filter(|v| !v.is_finite()).count();
        let s = Stat::of(&col);
        summary.push_str(&format!(
            "{name},{},{},{},{},{}\n",
            s.mean,
            s.sd,
            s.lo,
            s.hi,
            bad as f64 / col.len().max(1) as f64
        ));
    }
    write(&c.out.join("predict_summary.csv"), &summary)?;
    print!("{summary}");
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::Simulate { config, common } => cmd_simulate(&config, &common),
        Cmd::Fit {
            config,
            data,
            chains,
            iters,
            burnin,
            thin,
            sequential,
            common,
        } => cmd_fit(&config, &data, chains, iters, burnin, thin, sequential, &common),
        Cmd::Predict {
            horizon,
            threshold,
            common,
        } => cmd_predict(horizon, threshold, &common),
    }
}

