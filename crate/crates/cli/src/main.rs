use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use xclusters_core::config::RunConfig;
use xclusters_core::dataset::{gen_synthetic, write_relation_csv};
use xclusters_core::methods::{run, run_monotonicity, MethodRegistry};
use xclusters_core::output::{
    config_from_manifest, resolve_output_dir, write_artifacts, TreeDocument,
};
use xclusters_core::Error;

const OUTPUT_ENV: &str = "XCLUSTERS_OUTPUT_DIR";

#[derive(Parser)]
#[command(
    name = "xclusters",
    version,
    about = "Explainable clustering of time-series demographics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one method end to end and write its artifacts.
    Run(RunArgs),
    /// Average D and N over the k and alpha grid and count direction breaks.
    Monotonicity(RunArgs),
    /// Write the synthetic dataset of a configuration as a relation CSV.
    GenData(GenArgs),
    /// Render a tree.json artifact as DOT.
    ExportDot(DotArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML configuration file.
    #[arg(long, conflicts_with = "from_manifest")]
    config: Option<PathBuf>,
    /// Reuse the configuration recorded in a manifest.json.
    #[arg(long)]
    from_manifest: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Relation CSV; its schema must be given in the config file.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    n_groups: Option<usize>,
    #[arg(long)]
    per_group: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    alignment: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    noise_sd: Option<f64>,
    #[arg(long)]
    data_seed: Option<u64>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    #[arg(long, help = method_help())]
    method: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    lambda: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    epsilon_b: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    delta_alpha: Option<f64>,
    #[arg(long)]
    k_min: Option<usize>,
    #[arg(long)]
    k_max: Option<usize>,
    #[arg(long)]
    clusterer: Option<String>,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, env = OUTPUT_ENV)]
    output_dir: Option<PathBuf>,
    /// Print the effective configuration as TOML and exit.
    #[arg(long)]
    print_config: bool,
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    /// Date of the first day.
    #[arg(long, default_value = "2020-01-01")]
    epoch: NaiveDate,
    /// Relation CSV to write.
    #[arg(long)]
    out: PathBuf,
    /// Also write `id,label,group` ground truth here.
    #[arg(long)]
    groups: Option<PathBuf>,
}

#[derive(Args)]
struct DotArgs {
    tree_json: PathBuf,
    /// Defaults to standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn method_help() -> String {
    let names = MethodRegistry::default().names().join(", ");
    format!("Method to run: {names}")
}

fn base_config(a: &ConfigArgs) -> Result<RunConfig, Error> {
    let mut c = match (&a.config, &a.from_manifest) {
        (Some(p), _) => RunConfig::load(p)?,
        (None, Some(p)) => config_from_manifest(p)?,
        (None, None) => RunConfig::default(),
    };
    set(&mut c.seed, a.seed);
    if a.data.is_some() {
        c.data.path = a.data.clone();
    }
    let s = &mut c.data.synthetic;
    set(&mut s.n_groups, a.n_groups);
    set(&mut s.per_group, a.per_group);
    set(&mut s.feature_alignment, a.alignment);
    set(&mut s.noise_sd, a.noise_sd);
    set(&mut s.seed, a.data_seed);
    Ok(c)
}

fn run_config(a: &RunArgs) -> Result<RunConfig, Error> {
    let mut c = base_config(&a.cfg)?;
    set(&mut c.method, a.method.clone());
    set(&mut c.search.lambda, a.lambda);
    set(&mut c.search.epsilon_b, a.epsilon_b);
    set(&mut c.search.delta_alpha, a.delta_alpha);
    set(&mut c.search.k_min, a.k_min);
    set(&mut c.search.k_max, a.k_max);
    set(&mut c.clusterer.name, a.clusterer.clone());
    set(&mut c.workers, a.workers);
    if let Some(dir) = &a.output_dir {
        c.output_dir = dir.clone();
    }
    Ok(c)
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn cmd_run(a: &RunArgs) -> Result<(), Error> {
    let config = run_config(a)?;
    if a.print_config {
        print!("{}", config.to_toml_string()?);
        return Ok(());
    }
    let dir = resolve_output_dir(&config, None);
    let outcome = run(&config)?;
    let files = write_artifacts(&outcome, &dir)?;
    let m = &outcome.metrics;
    log::info!("wrote {} files to {}", files.len(), dir.display());
    println!(
        "{} k={} alpha={:.4} D={:.6} N={} objective={:.6} -> {}",
        outcome.outcome.method,
        m.k,
        m.alpha,
        m.d,
        m.n_raw,
        m.objective,
        dir.display()
    );
    Ok(())
}

fn cmd_monotonicity(a: &RunArgs) -> Result<(), Error> {
    let config = run_config(a)?;
    let dir = resolve_output_dir(&config, None);
    let report = run_monotonicity(&config)?;
    report.write_dir(&dir)?;
    for s in report.series() {
        println!("{}: {} violation(s)", s.name, s.violations);
    }
    Ok(())
}

fn cmd_gen_data(a: &GenArgs) -> Result<(), Error> {
    let config = base_config(&a.cfg)?;
    let data = gen_synthetic(&config.data.synthetic)?;
    create_parent(&a.out)?;
    write_relation_csv(&data.dataset, a.epoch, fs::File::create(&a.out)?)?;
    if let Some(path) = &a.groups {
        create_parent(path)?;
        let mut f = std::io::BufWriter::new(fs::File::create(path)?);
        writeln!(f, "id,label,group")?;
        for (d, g) in data.dataset.demographics.iter().zip(&data.groups) {
            writeln!(f, "{},\"{}\",{}", d.id, d.label, g)?;
        }
        f.flush()?;
    }
    println!(
        "{} demographics x {} days -> {}",
        data.dataset.len(),
        data.dataset.series_len(),
        a.out.display()
    );
    Ok(())
}

fn cmd_export_dot(a: &DotArgs) -> Result<(), Error> {
    let dot = TreeDocument::read(&a.tree_json)?.to_dot();
    match &a.out {
        Some(path) => {
            create_parent(path)?;
            fs::write(path, dot)?;
        }
        None => print!("{dot}"),
    }
    Ok(())
}

fn create_parent(path: &Path) -> Result<(), Error> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    Ok(())
}

fn report(e: &Error) -> ExitCode {
    let (status, code, errors) = match e {
        Error::Config(errs) => ("config error", 2, errs.clone()),
        other => ("error", 1, vec![other.to_string()]),
    };
    eprintln!("{}", json!({ "status": status, "errors": errors }));
    ExitCode::from(code)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Monotonicity(a) => cmd_monotonicity(a),
        Command::GenData(a) => cmd_gen_data(a),
        Command::ExportDot(a) => cmd_export_dot(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(&e),
    }
}
