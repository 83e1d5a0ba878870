use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand, ValueEnum};

use hkelab::space::{build_gasket_with, build_lattice2d, build_path, build_vicsek_with, write_graph, FractalOptions};
use hkelab_cli::config::ExperimentConfig;
use hkelab_cli::manifest::{self, RunManifest};
use hkelab_cli::run;

#[derive(Parser)]
#[command(name = "hkelab", version, about = "Heat kernel and functional-inequality experiments on fractal graphs")]
struct Cli {
    /// Output directory (overrides the config's).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for the randomized test suites (overrides the config's).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the steps of a config and write reports and a manifest.
    Run { config: PathBuf },
    /// Per-constant drift between runs (manifest files or output directories), in order.
    Compare {
        #[arg(num_args = 2.., required = true)]
        manifests: Vec<PathBuf>,
    },
    /// Graph utilities.
    Graph {
        #[command(subcommand)]
        command: GraphCommand,
    },
}

#[derive(Subcommand)]
enum GraphCommand {
    /// Write a built-in graph in the text format; `level` is the size for path and lattice2d.
    Export {
        family: ExportFamily,
        level: u32,
        /// Unit conductances on the fractals.
        #[arg(long)]
        no_renormalize: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ExportFamily {
    Path,
    Lattice2d,
    Gasket,
    Vicsek,
}

enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

fn run_cmd(cli: &Cli, config: &PathBuf) -> Result<bool, Failure> {
    let mut cfg = ExperimentConfig::load(config, cli.seed).map_err(Failure::Usage)?;
    if let Some(o) = &cli.out {
        cfg.output.dir = o.clone();
    }
    let m = run::run(&cfg, &cfg.output.dir).map_err(Failure::Runtime)?;
    for s in &m.steps {
        let err = s.error.as_deref().map(|e| format!("  ({e})")).unwrap_or_default();
        println!("{:<12} {:?}{err}", s.name, s.status);
    }
    println!("manifest: {}", cfg.output.dir.join(manifest::MANIFEST_FILE).display());
    Ok(m.all_passed())
}

fn compare_cmd(cli: &Cli, paths: &[PathBuf]) -> Result<(), Failure> {
    let mut ms = Vec::new();
    for p in paths {
        let m = RunManifest::load(p).map_err(Failure::Usage)?;
        ms.push((p.display().to_string(), m));
    }
    let report = manifest::compare(&ms).map_err(Failure::Usage)?;
    println!("{:<10} {:<16} {:>12} {:>12} {:>9}  flags", "step", "constant", "first", "last", "band");
    let fmt = |v: Option<f64>| v.map(|x| format!("{x:.4e}")).unwrap_or_else(|| "-".into());
    for r in &report.rows {
        println!(
            "{:<10} {:<16} {:>12} {:>12} {:>9}  {}",
            r.step,
            r.constant,
            fmt(r.values[0]),
            fmt(*r.values.last().unwrap()),
            r.band.map(|b| format!("{b:.3}")).unwrap_or_else(|| "-".into()),
            r.flags.join("; ")
        );
    }
    if let Some(dir) = &cli.out {
        std::fs::create_dir_all(dir).map_err(|e| Failure::Runtime(e.into()))?;
        let body = serde_json::to_vec_pretty(&report).map_err(|e| Failure::Runtime(e.into()))?;
        std::fs::write(dir.join("drift.json"), body).map_err(|e| Failure::Runtime(e.into()))?;
    }
    Ok(())
}

fn export_cmd(cli: &Cli, family: ExportFamily, level: u32, no_renormalize: bool) -> Result<()> {
    let opts = FractalOptions {
        renormalized: !no_renormalize,
        ..FractalOptions::default()
    };
    let (g, name) = match family {
        ExportFamily::Path => (build_path::<f64>(level as usize, 1.0)?, "path"),
        ExportFamily::Lattice2d => (build_lattice2d::<f64>(level as usize)?, "lattice2d"),
        ExportFamily::Gasket => (build_gasket_with::<f64>(level, opts)?, "gasket"),
        ExportFamily::Vicsek => (build_vicsek_with::<f64>(level, opts)?, "vicsek"),
    };
    match &cli.out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            let path = dir.join(format!("{name}_{level}.graph"));
            let f = std::fs::File::create(&path)?;
            let mut w = std::io::BufWriter::new(f);
            write_graph(&g, &mut w)?;
            w.flush()?;
            println!("{}", path.display());
        }
        None => {
            let stdout = std::io::stdout();
            let mut w = std::io::BufWriter::new(stdout.lock());
            write_graph(&g, &mut w)?;
            w.flush()?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match &cli.command {
        Command::Run { config } => run_cmd(&cli, config).map(|ok| if ok { 0 } else { 1 }),
        Command::Compare { manifests } => compare_cmd(&cli, manifests).map(|_| 0),
        Command::Graph {
            command: GraphCommand::Export {
                family,
                level,
                no_renormalize,
            },
        } => export_cmd(&cli, *family, *level, *no_renormalize).map(|_| 0).map_err(Failure::Usage),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
