use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use nahmpole::io::config::{check_tol, parse_config, Command};
use nahmpole::io::run::DEFAULT_OUT;
use nahmpole::io::{run, Report};
use nahmpole::{Error, Result};

/// Solvers and checks for the extended Bogomolny equations.
#[derive(Parser, Debug)]
#[command(name = "nahmpole", version)]
struct Cli {
    /// model | ode | spectrum | solve-surface | solve-cylinder | solve-plane | verify | distance | study
    subcommand: String,
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `out` in the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated node counts, e.g. 64,64,128.
    #[arg(long, value_delimiter = ',')]
    resolution: Option<Vec<usize>>,
    #[arg(long)]
    tol: Option<f64>,
}

fn execute(cli: &Cli, out: &mut PathBuf) -> Result<Report> {
    let command = Command::parse(&cli.subcommand)
        .ok_or_else(|| Error::Config { line: 0, message: format!("unknown subcommand `{}`", cli.subcommand) })?;
    let mut cfg = parse_config(&cli.config)?;
    cfg.command = command;
    if let Some(o) = &cli.out {
        cfg.out = Some(o.clone());
    }
    if let Some(r) = &cli.resolution {
        cfg.resolution = r.clone();
    }
    if let Some(t) = cli.tol {
        cfg.tol = check_tol(t, 0)?;
    }
    *out = cfg.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    run(&cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut out = cli.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    let (report, code) = match execute(&cli, &mut out) {
        Ok(r) => (r, 0),
        Err(e) => {
            eprintln!("nahmpole: {e}");
            let mut r = Report::new();
            r.set("error", e.to_string().replace('\n', " "));
            r.ok = false;
            (r, e.exit_code())
        }
    };
    let text = report.render();
    print!("{text}");
    if std::fs::create_dir_all(&out).and_then(|_| std::fs::write(out.join("report.txt"), &text)).is_err() {
        eprintln!("nahmpole: cannot write {}", out.join("report.txt").display());
    }
    ExitCode::from(code as u8)
}
