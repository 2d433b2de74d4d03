use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use saber_xbar::cost::{estimate, Operation};
use saber_xbar::experiments::{
    default_sweep, run_noise, run_roundtrip, run_sweep, run_verify, BackendKind, ExperimentConfig, OutputFormat,
    SweepReport, SweepRow, VerifyOptions,
};
use saber_xbar::xbar::StuckAt;

#[derive(Parser)]
#[command(name = "saber-xbar", version, about = "SABER on simulated memristor crossbars")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Clone)]
struct Common {
    /// Key-value config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Directory for the report file.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_parser = ["csv", "json"])]
    format: Option<String>,
    /// Extra `key=value` config overrides, applied after the file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Oracle suites: decompositions, crossbar and SAC against schoolbook.
    Verify {
        /// Plant a stuck cell, `slot:tile:row:col:level`.
        #[arg(long)]
        fault: Vec<String>,
    },
    /// Decryption failure curve over the variance and retry grids.
    Noise,
    /// Cost model over every algorithm and architecture.
    Sweep {
        /// Restrict to one operation (default: all).
        #[arg(long)]
        operation: Option<String>,
    },
    /// Cost of the configured design point.
    Cost,
    /// Keygen/encrypt/decrypt roundtrips.
    Roundtrip {
        /// Backend name (sb, k2, k4, tc4, tc4k2, xbar); default all.
        #[arg(long)]
        backend: Vec<String>,
    },
}

fn load_config(c: &Common) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = match &c.config {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            ExperimentConfig::parse(&text)?
        }
        None => ExperimentConfig::default(),
    };
    for kv in &c.overrides {
        let Some((k, v)) = kv.split_once('=') else {
            bail!(saber_xbar::Error::Config(format!("override '{kv}' is not key=value")));
        };
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(t) = c.trials {
        cfg.trials = t;
    }
    if let Some(o) = &c.out {
        cfg.out_dir = Some(o.clone());
    }
    if let Some(f) = &c.format {
        cfg.format = f.parse()?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn parse_fault(s: &str) -> anyhow::Result<StuckAt> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 5 {
        bail!(saber_xbar::Error::Config(format!("fault '{s}' is not slot:tile:row:col:level")));
    }
    let num = |i: usize| -> anyhow::Result<usize> {
        parts[i]
            .parse()
            .map_err(|_| saber_xbar::Error::Config(format!("fault '{s}': bad field '{}'", parts[i])).into())
    };
    Ok(StuckAt {
        slot: num(0)?,
        tile: num(1)?,
        row: num(2)?,
        col: num(3)?,
        level: u8::try_from(num(4)?).map_err(|_| saber_xbar::Error::Config(format!("fault '{s}': level too large")))?,
    })
}

fn ext(f: OutputFormat) -> &'static str {
    match f {
        OutputFormat::Csv => "csv",
        OutputFormat::Json => "json",
    }
}

/// Writes `body` to `<out>/<stem>.<ext>` when an output directory is set.
fn emit(cfg: &ExperimentConfig, stem: &str, body: &str) -> anyhow::Result<Option<PathBuf>> {
    let Some(dir) = &cfg.out_dir else {
        return Ok(None);
    };
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(format!("{stem}.{}", ext(cfg.format)));
    fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
    Ok(Some(path))
}

fn report_path(p: Option<PathBuf>) {
    if let Some(p) = p {
        eprintln!("wrote {}", p.display());
    }
}

fn csv_string(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> anyhow::Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

fn verify(cfg: &ExperimentConfig, faults: &[String]) -> anyhow::Result<ExitCode> {
    let opts = VerifyOptions {
        faults: faults.iter().map(|f| parse_fault(f)).collect::<anyhow::Result<_>>()?,
    };
    let report = run_verify(cfg, &opts)?;
    print!("{report}");
    let body = match cfg.format {
        OutputFormat::Json => serde_json::to_string_pretty(&report)?,
        OutputFormat::Csv => csv_string(
            &["suite", "cases", "passed", "detail"],
            report.suites.iter().map(|s| {
                vec![s.name.clone(), s.cases.to_string(), s.passed.to_string(), s.detail.clone().unwrap_or_default()]
            }),
        )?,
    };
    report_path(emit(cfg, "verify", &body)?);
    Ok(if report.passed() { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn noise(cfg: &ExperimentConfig) -> anyhow::Result<ExitCode> {
    let curve = run_noise(cfg, &cfg.variance_grid, &cfg.retries_grid)?;
    println!("readout {}, tia {}, {} trials per point", curve.readout, curve.tia_variance, cfg.trials);
    println!("{:>9} {:>7} {:>9} {:>10} {:>21}", "variance", "retries", "failures", "p_fail", "95% interval");
    for p in &curve.points {
        println!(
            "{:>9} {:>7} {:>9} {:>10.5} {:>10.5}..{:<10.5}",
            p.cell_variance, p.max_retries, p.failures, p.failure_probability, p.ci_low, p.ci_high
        );
    }
    let body = match cfg.format {
        OutputFormat::Json => serde_json::to_string_pretty(&curve)?,
        OutputFormat::Csv => curve.to_csv(cfg),
    };
    report_path(emit(cfg, "noise", &body)?);
    Ok(ExitCode::SUCCESS)
}

fn print_sweep(report: &SweepReport) {
    println!("{:<28} {:>12} {:>12} {:>10} {:>10}", "design point", "latency ns", "energy pJ", "CE", "EE");
    for row in &report.rows {
        match &row.report {
            Ok(r) => println!(
                "{:<28} {:>12.1} {:>12.1} {:>10.4} {:>10.4}",
                r.label,
                r.latency_ns,
                r.energy_total_pj(),
                r.ce(),
                r.ee()
            ),
            Err(e) => println!("{:<28} {e}", row.config.label()),
        }
    }
}

fn sweep(cfg: &ExperimentConfig, operation: Option<&str>) -> anyhow::Result<ExitCode> {
    let ops = match operation {
        Some(o) => vec![o.parse::<Operation>()?],
        None => Operation::ALL.to_vec(),
    };
    let configs: Vec<_> = ops.iter().flat_map(|&op| default_sweep(op, cfg.root_policy)).collect();
    let report = run_sweep(&configs, &cfg.catalog)?;
    print_sweep(&report);
    let body = match cfg.format {
        OutputFormat::Json => report.to_json(),
        OutputFormat::Csv => report.to_csv(),
    };
    report_path(emit(cfg, "sweep", &body)?);
    Ok(ExitCode::SUCCESS)
}

fn cost(cfg: &ExperimentConfig) -> anyhow::Result<ExitCode> {
    let arch = cfg.arch_config();
    let r = estimate(&arch, &cfg.catalog)?;
    println!("{}", r.label);
    println!("  latency   {:.1} ns", r.latency_ns);
    println!("  energy    {:.2} pJ (ADC share {:.1}%)", r.energy_total_pj(), 100.0 * r.adc_energy_share());
    println!("  area      {:.4} mm^2 over {} arrays", r.area_mm2(), r.arrays);
    println!("  CE        {:.4} Gbps/mm^2", r.ce());
    println!("  EE        {:.4} Gbit/J", r.ee());
    println!("  samples   {}", r.samples_converted);
    println!("  writes    {} cells ({} operand bits)", r.cells_written, r.operand_cell_bits);
    let body = match cfg.format {
        OutputFormat::Json => serde_json::to_string_pretty(&r)?,
        OutputFormat::Csv => SweepReport {
            schema: saber_xbar::experiments::CSV_SCHEMA.into(),
            catalog: cfg.catalog.clone(),
            rows: vec![SweepRow {
                config: arch,
                report: Ok(r),
            }],
        }
        .to_csv(),
    };
    report_path(emit(cfg, "cost", &body)?);
    Ok(ExitCode::SUCCESS)
}

fn roundtrip(cfg: &ExperimentConfig, backends: &[String]) -> anyhow::Result<ExitCode> {
    let kinds = if backends.is_empty() {
        BackendKind::all()
    } else {
        backends.iter().map(|b| b.parse()).collect::<Result<_, _>>()?
    };
    let mut reports = Vec::new();
    for k in kinds {
        let r = run_roundtrip(k, cfg.trials, cfg.seed)?;
        println!(
            "{:<6} {} trials, {} failures, PolyMults keygen/enc/dec {}/{}/{}",
            r.backend, r.trials, r.failures, r.census[0], r.census[1], r.census[2]
        );
        reports.push(r);
    }
    let body = match cfg.format {
        OutputFormat::Json => serde_json::to_string_pretty(&reports)?,
        OutputFormat::Csv => csv_string(
            &["backend", "trials", "failures", "keygen_mults", "enc_mults", "dec_mults"],
            reports.iter().map(|r| {
                vec![
                    r.backend.clone(),
                    r.trials.to_string(),
                    r.failures.to_string(),
                    r.census[0].to_string(),
                    r.census[1].to_string(),
                    r.census[2].to_string(),
                ]
            }),
        )?,
    };
    report_path(emit(cfg, "roundtrip", &body)?);
    Ok(if reports.iter().all(|r| r.failures == 0) { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn run(cli: &Cli) -> anyhow::Result<ExitCode> {
    let cfg = load_config(&cli.common)?;
    match &cli.command {
        Command::Verify { fault } => verify(&cfg, fault),
        Command::Noise => noise(&cfg),
        Command::Sweep { operation } => sweep(&cfg, operation.as_deref()),
        Command::Cost => cost(&cfg),
        Command::Roundtrip { backend } => roundtrip(&cfg, backend),
    }
}

fn main() -> ExitCode {
    match run(&Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
