use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};

use bessel_harmonic::error::{Error, Result};
use bessel_harmonic::function_spaces::{
    bmo_norm, build_ati, default_scales, besov_seminorm, lipschitz_norm, log_oscillation_sup, oscillation_norm,
    tl_diff_seminorm, tl_pointwise_diff_seminorm, LadderSpec,
};
use bessel_harmonic::kernels::{KernelKind, KernelSpec};
use bessel_harmonic::measure_space::{GridFunction, Interp, MeasureSpace};
use bessel_harmonic::operators::{
    apply_conj_poisson, apply_frac, apply_on_points, apply_riesz, apply_semigroup, frac_integral_igamma,
};
use bessel_harmonic::quadrature::QuadConfig;
use bessel_harmonic::verify::{
    catalog, emit_report, read_reports_json, run_case, ReportFormat, Suite, Verdict, VerifyConfig,
};

#[derive(Parser)]
#[command(name = "bessel-harmonic", version, about = "Kernels, operators and function-space estimates for the Bessel operator on the half line")]
struct Cli {
    /// λ > 0 of the measure x^{2λ} dx. For `verify`, replaces the λ panel.
    #[arg(long, global = true)]
    lambda: Option<f64>,
    /// TOML file of verification settings.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelArg {
    Heat,
    Poisson,
    ConjPoisson,
    Riesz,
    Fractional,
}

#[derive(Clone, Copy, ValueEnum)]
enum OpArg {
    Heat,
    Poisson,
    ConjPoisson,
    Riesz,
    Fractional,
    Igamma,
}

#[derive(Clone, Copy, ValueEnum)]
enum NormArg {
    Lipschitz,
    Oscillation,
    Bmo,
    LogOscillation,
    Besov,
    Tl,
    TlPointwise,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
    Markdown,
}

impl From<FormatArg> for ReportFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Json => ReportFormat::Json,
            FormatArg::Csv => ReportFormat::Csv,
            FormatArg::Markdown => ReportFormat::MarkdownTable,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Kernel values on the product of two point lists, as CSV.
    Kernel {
        #[arg(long, value_enum)]
        kind: KernelArg,
        /// Time for heat and Poisson kernels.
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        #[arg(long, value_delimiter = ',', required = true)]
        x: Vec<f64>,
        #[arg(long, value_delimiter = ',', required = true)]
        y: Vec<f64>,
    },
    /// Applies an operator to a function read from CSV (x,value).
    Apply {
        #[arg(long, value_enum)]
        op: OpArg,
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        /// Order of the fractional integral, or γ of I^γ.
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        #[arg(long, value_delimiter = ',', required = true)]
        x: Vec<f64>,
    },
    /// A seminorm of a function read from CSV, as JSON.
    Norm {
        #[arg(long, value_enum)]
        kind: NormArg,
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        beta: f64,
        /// Exponent of the mean oscillation.
        #[arg(long, default_value_t = 1.0)]
        q: f64,
        /// Lebesgue exponent of the Triebel–Lizorkin seminorms.
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        /// Scales of the approximation to the identity for `besov`.
        #[arg(long, default_value_t = -4, allow_negative_numbers = true)]
        k_min: i32,
        #[arg(long, default_value_t = 8, allow_negative_numbers = true)]
        k_max: i32,
    },
    /// Kernels S_k, D_k and the mass of S_k, as CSV.
    Ati {
        #[arg(long, allow_negative_numbers = true)]
        k: i32,
        #[arg(long, value_delimiter = ',', required = true)]
        x: Vec<f64>,
        #[arg(long, value_delimiter = ',', required = true)]
        y: Vec<f64>,
    },
    /// Runs estimate suites; exits nonzero if any case fails.
    Verify {
        /// kernels, spaces, commutators, endpoint, fractional or all.
        #[arg(long, default_value = "all")]
        suite: String,
        /// Only cases whose id contains this text.
        #[arg(long)]
        filter: Option<String>,
        /// List the selected case ids without running them.
        #[arg(long)]
        list: bool,
    },
    /// Re-emits a JSON report file in another format.
    Report {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "markdown")]
        format: FormatArg,
    },
}

fn space(cli: &Cli) -> Result<MeasureSpace> {
    MeasureSpace::new(cli.lambda.unwrap_or(1.0))
}

fn verify_config(cli: &Cli) -> Result<VerifyConfig> {
    let mut cfg = match &cli.config {
        Some(p) => VerifyConfig::from_toml_str(&fs::read_to_string(p)?)?,
        None => VerifyConfig::default(),
    };
    if let Some(l) = cli.lambda {
        cfg.lambdas = vec![l];
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn read_function(path: &Path) -> Result<GridFunction> {
    GridFunction::read_csv(fs::File::open(path)?, Interp::Linear)
}

/// `out/name` when an output directory is set, else stdout.
fn sink(cli: &Cli, name: &str) -> Result<Box<dyn Write>> {
    match &cli.out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            Ok(Box::new(io::BufWriter::new(fs::File::create(dir.join(name))?)))
        }
        None => Ok(Box::new(io::stdout().lock())),
    }
}

/// Evaluation points spaced `2^{-k_max}` across the sampled range.
fn besov_grid(f: &GridFunction, k_max: i32) -> Result<Vec<f64>> {
    const MAX_POINTS: f64 = 200_000.0;
    let (lo, hi) = f.support();
    let h = 2f64.powi(-k_max);
    let n = ((hi - lo) / h).floor();
    if n + 1.0 > MAX_POINTS {
        return Err(Error::InvalidArgument(format!(
            "--k-max {k_max} needs {n} evaluation points on [{lo}, {hi}]; lower it"
        )));
    }
    let n = n as usize;
    let mut grid: Vec<f64> = (0..=n).map(|i| lo + i as f64 * h).collect();
    if hi - grid[n] > 0.5 * h {
        grid.push(hi);
    }
    Ok(grid)
}

fn kernel_kind(kind: KernelArg, t: f64, alpha: f64) -> KernelKind {
    match kind {
        KernelArg::Heat => KernelKind::Heat { t },
        KernelArg::Poisson => KernelKind::Poisson { t },
        KernelArg::ConjPoisson => KernelKind::ConjPoisson { t },
        KernelArg::Riesz => KernelKind::Riesz,
        KernelArg::Fractional => KernelKind::Fractional { alpha },
    }
}

fn run(cli: &Cli) -> Result<bool> {
    if let Some(j) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    }
    match &cli.command {
        Command::Kernel { kind, t, alpha, x, y } => {
            let spec = KernelSpec::new(kernel_kind(*kind, *t, *alpha), space(cli)?, QuadConfig::default())?;
            let mut w = csv::Writer::from_writer(sink(cli, "kernel.csv")?);
            w.write_record(["x", "y", "value", "error"])?;
            for &xi in x {
                for &yi in y {
                    let q = spec.eval(xi, yi)?;
                    w.write_record([xi.to_string(), yi.to_string(), q.value.to_string(), q.error.to_string()])?;
                }
            }
            w.flush()?;
        }
        Command::Apply { op, input, t, alpha, x } => {
            let sp = space(cli)?;
            let f = read_function(input)?;
            let cfg = QuadConfig::default();
            let vals = apply_on_points(x, |xi| match op {
                OpArg::Heat => apply_semigroup(&KernelSpec::new(KernelKind::Heat { t: *t }, sp, cfg.clone())?, &f, xi),
                OpArg::Poisson => {
                    apply_semigroup(&KernelSpec::new(KernelKind::Poisson { t: *t }, sp, cfg.clone())?, &f, xi)
                }
                OpArg::ConjPoisson => apply_conj_poisson(&sp, *t, &f, xi, &cfg),
                OpArg::Riesz => apply_riesz(&sp, &f, xi, &cfg),
                OpArg::Fractional => apply_frac(&sp, *alpha, &f, xi, &cfg),
                OpArg::Igamma => frac_integral_igamma(&sp, &f, *alpha, xi, &cfg),
            });
            let mut w = csv::Writer::from_writer(sink(cli, "apply.csv")?);
            w.write_record(["x", "value"])?;
            for (&xi, v) in x.iter().zip(vals) {
                w.write_record([xi.to_string(), v?.value.to_string()])?;
            }
            w.flush()?;
        }
        Command::Norm { kind, input, beta, q, p, k_min, k_max } => {
            let sp = space(cli)?;
            let f = read_function(input)?;
            let spec = LadderSpec::default();
            let report = match kind {
                NormArg::Lipschitz => lipschitz_norm(&f, *beta)?,
                NormArg::Oscillation => oscillation_norm(&sp, &f, *beta, *q, &spec)?,
                NormArg::Bmo => bmo_norm(&sp, &f, &spec)?,
                NormArg::LogOscillation => log_oscillation_sup(&sp, &f, &spec)?,
                NormArg::Besov => besov_seminorm(&build_ati(&sp, *k_min..=*k_max, &besov_grid(&f, *k_max)?)?, &f, *beta)?,
                NormArg::Tl => tl_diff_seminorm(&sp, &f, *beta, *p, default_scales(&f))?,
                NormArg::TlPointwise => tl_pointwise_diff_seminorm(&sp, &f, *beta, *p, default_scales(&f))?,
            };
            let mut w = sink(cli, "norm.json")?;
            serde_json::to_writer_pretty(&mut w, &report)?;
            writeln!(w)?;
        }
        Command::Ati { k, x, y } => {
            let sp = space(cli)?;
            // a grid fine enough for any k up to k + 1
            let h = 2f64.powi(-(k + 1));
            let ati = build_ati(&sp, *k..=*k + 1, &[h, 2.0 * h])?;
            let mut w = csv::Writer::from_writer(sink(cli, "ati.csv")?);
            w.write_record(["k", "x", "y", "s_k", "d_k", "mass"])?;
            for &xi in x {
                let mass = ati.unit_integral(*k, xi)?;
                for &yi in y {
                    w.write_record([
                        k.to_string(),
                        xi.to_string(),
                        yi.to_string(),
                        ati.s_kernel(*k, xi, yi)?.to_string(),
                        ati.d_kernel(*k, xi, yi)?.to_string(),
                        mass.to_string(),
                    ])?;
                }
            }
            w.flush()?;
        }
        Command::Verify { suite, filter, list } => {
            let cfg = verify_config(cli)?;
            let suites = Suite::parse_selection(suite)?;
            let cases: Vec<_> = catalog(&cfg, &suites)
                .into_iter()
                .filter(|c| filter.as_ref().map_or(true, |f| c.id.contains(f.as_str())))
                .collect();
            if *list {
                for c in &cases {
                    println!("{}\t{}\t{} samples", c.id, c.criterion, c.sample_count());
                }
                return Ok(true);
            }
            let mut reports = Vec::new();
            for c in &cases {
                let t0 = Instant::now();
                let r = run_case(c);
                eprintln!(
                    "{:<4} {:<60} fitted {:<12.4e} stability {:<8.3} {:>7.1}s {}",
                    r.verdict,
                    r.id,
                    r.fitted_constant,
                    r.stability,
                    t0.elapsed().as_secs_f64(),
                    r.note
                );
                reports.push(r);
            }
            let failed = reports.iter().filter(|r| r.verdict == Verdict::Fail).count();
            eprintln!("{} cases, {} failed", reports.len(), failed);
            match &cli.out {
                Some(_) => {
                    emit_report(&reports, ReportFormat::Json, sink(cli, "reports.json")?)?;
                    emit_report(&reports, ReportFormat::Csv, sink(cli, "reports.csv")?)?;
                    emit_report(&reports, ReportFormat::MarkdownTable, sink(cli, "reports.md")?)?;
                }
                None => emit_report(&reports, ReportFormat::Json, io::stdout().lock())?,
            }
            return Ok(failed == 0);
        }
        Command::Report { input, format } => {
            let reports = read_reports_json(&fs::read_to_string(input)?)?;
            let name = match format {
                FormatArg::Json => "reports.json",
                FormatArg::Csv => "reports.csv",
                FormatArg::Markdown => "reports.md",
            };
            emit_report(&reports, (*format).into(), sink(cli, name)?)?;
            return Ok(reports.iter().all(|r| r.verdict == Verdict::Pass));
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
