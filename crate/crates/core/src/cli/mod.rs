//! `market-eos` command-line front end.
//!
//! Exit codes: 0 success (an inconsistency finding is a success), 2 config
//! or usage error, 3 domain or solver error, 4 I/O error.

pub mod config;

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::eos::{amplification_factor, check_linear_consistency, derive_unitary_eos};
use crate::equilibrium::{clearing_price_analytic, solve_numeric, EquilibriumPoint};
use crate::error::{Error, Result};
use crate::reference_eos::Eos;
use crate::surface::{
    audit_surface, export, isocurve_collapse_check, isocurves, isoprice_collapse_check,
    sample_surface, write_export, CollapseReport, ExportFormat, Exportable, GridSpec,
};
use crate::zeroth_law::{rank_markets, verify_equivalence_laws, LawReport, RankedMarket};

pub use config::ConfigDocument;

/// Environment variable holding the default output directory.
pub const OUT_DIR_ENV: &str = "MARKET_EOS_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "market-eos", version, about = "Equations of state for markets")]
pub struct Cli {
    /// JSON config file with markets, EoS blocks and grid defaults.
    #[arg(long, short, global = true, default_value = "market-eos.json")]
    pub config: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Clearing price and quantity, analytic with a bisection cross-check.
    Solve(ReportArgs),
    /// Consistency analysis of a linear-demand market (JSON).
    Consistency {
        market: String,
        /// Write the JSON report here instead of standard output.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Equation-of-state constant K and amplification 1/K of a unitary market.
    Eos(ReportArgs),
    /// Sample an EoS surface on a grid.
    Surface {
        eos: String,
        #[command(flatten)]
        grid: GridOverrides,
        #[command(flatten)]
        out: FileOutput,
    },
    /// Iso-curves of an EoS at fixed T values.
    Isocurves {
        eos: String,
        /// Comma-separated T values.
        #[arg(long = "t", value_delimiter = ',', num_args = 1.., required = true)]
        t_values: Vec<f64>,
        #[command(flatten)]
        curve: CurveOverrides,
        #[command(flatten)]
        out: FileOutput,
    },
    /// Isoprice collapse check for a unitary market, or iso-curve
    /// coincidence check for an EoS block.
    Collapse {
        name: String,
        /// Comma-separated prices (or T values for an EoS block).
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
        prices: Vec<f64>,
        #[command(flatten)]
        curve: CurveOverrides,
        #[command(flatten)]
        out: FileOutput,
    },
    /// Price ranking and equivalence-law report over all markets.
    Zeroth {
        /// Print JSON instead of the text table.
        #[arg(long)]
        json: bool,
        /// Write the JSON report here.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    pub market: String,
    /// Print JSON instead of the text summary.
    #[arg(long)]
    pub json: bool,
    /// Write the JSON report here.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GridOverrides {
    #[arg(long)]
    pub x_min: Option<f64>,
    #[arg(long)]
    pub x_max: Option<f64>,
    #[arg(long)]
    pub nx: Option<usize>,
    #[arg(long)]
    pub t_min: Option<f64>,
    #[arg(long)]
    pub t_max: Option<f64>,
    #[arg(long)]
    pub nt: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CurveOverrides {
    #[arg(long)]
    pub x_min: Option<f64>,
    #[arg(long)]
    pub x_max: Option<f64>,
    /// Points per curve.
    #[arg(long)]
    pub n_points: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for ExportFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => ExportFormat::Csv,
            FormatArg::Json => ExportFormat::Json,
        }
    }
}

#[derive(Debug, Args)]
pub struct FileOutput {
    #[arg(long, value_enum, default_value = "csv")]
    pub format: FormatArg,
    /// Output directory; overrides the environment variable and the config.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

/// Parses `args` and runs the command; returns the process exit code.
///
/// `env_out_dir` is the value of [`OUT_DIR_ENV`], passed in so callers
/// control the environment.
pub fn run<I, T>(args: I, env_out_dir: Option<PathBuf>, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = out.write_all(text.as_bytes());
                    0
                }
                _ => {
                    let _ = err.write_all(text.as_bytes());
                    2
                }
            };
        }
    };
    let mut ctx = Context {
        env_out_dir,
        out,
    };
    match ctx.execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

struct Context<'a> {
    env_out_dir: Option<PathBuf>,
    out: &'a mut dyn Write,
}

#[derive(Serialize)]
struct SolveReport<'a> {
    market: &'a str,
    family: &'static str,
    analytic: EquilibriumPoint,
    numeric: EquilibriumPoint,
    delta: f64,
}

#[derive(Serialize)]
struct ZerothReport {
    quantum: f64,
    ranking: Vec<RankedMarket>,
    laws: LawReport,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |e| Error::io(path, e)
}

fn write_json_file<T: Serialize + ?Sized>(value: &T, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::io(path, e.into()))?;
    w.write_all(b"\n").map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

fn stdout_err(e: std::io::Error) -> Error {
    Error::io("<stdout>", e)
}

fn pass(b: bool) -> &'static str {
    if b {
        "pass"
    } else {
        "FAIL"
    }
}

impl Context<'_> {
    fn print(&mut self, line: impl AsRef<str>) -> Result<()> {
        writeln!(self.out, "{}", line.as_ref()).map_err(stdout_err)
    }

    fn print_json<T: Serialize + ?Sized>(&mut self, value: &T) -> Result<()> {
        let text = serde_json::to_string_pretty(value).map_err(|e| stdout_err(e.into()))?;
        self.print(text)
    }

    /// Directory for data files: flag, then environment, then config.
    fn out_dir(&self, flag: &Option<PathBuf>, doc: &ConfigDocument) -> Option<PathBuf> {
        flag.clone()
            .or_else(|| self.env_out_dir.clone())
            .or_else(|| doc.output.dir.clone())
    }

    fn execute(&mut self, cli: &Cli) -> Result<()> {
        let doc = ConfigDocument::load(&cli.config)?;
        match &cli.command {
            Command::Solve(args) => self.solve(&doc, args),
            Command::Consistency { market, output } => self.consistency(&doc, market, output),
            Command::Eos(args) => self.eos(&doc, args),
            Command::Surface { eos, grid, out } => self.surface(&doc, eos, grid, out),
            Command::Isocurves {
                eos,
                t_values,
                curve,
                out,
            } => self.isocurves(&doc, eos, t_values, curve, out),
            Command::Collapse {
                name,
                prices,
                curve,
                out,
            } => self.collapse(&doc, name, prices, curve, out),
            Command::Zeroth { json, output } => self.zeroth(&doc, *json, output),
        }
    }

    fn solve(&mut self, doc: &ConfigDocument, args: &ReportArgs) -> Result<()> {
        let market = doc.market(&args.market)?;
        let analytic = clearing_price_analytic(&market)?;
        let numeric = solve_numeric(&market)?;
        let delta = (analytic.clearing_price.value() - numeric.clearing_price.value()).abs();
        let report = SolveReport {
            market: &args.market,
            family: market.family(),
            analytic,
            numeric,
            delta,
        };
        if let Some(path) = &args.output {
            write_json_file(&report, path)?;
        }
        if args.json {
            return self.print_json(&report);
        }
        self.print(format!(
            "market {} ({}, N={})",
            args.market,
            market.family(),
            market.households()
        ))?;
        self.print(format!(
            "Pr*={} Q*={}",
            analytic.clearing_price, analytic.clearing_quantity
        ))?;
        self.print(format!("residual={}", analytic.residual))?;
        self.print(format!(
            "method=analytic numeric_check={} delta={}",
            numeric.clearing_price, delta
        ))
    }

    fn consistency(&mut self, doc: &ConfigDocument, name: &str, output: &Option<PathBuf>) -> Result<()> {
        let market = doc.market(name)?;
        let report = check_linear_consistency(&market)?;
        match output {
            Some(path) => {
                write_json_file(&report, path)?;
                self.print(format!("consistent={} wrote {}", report.consistent, path.display()))
            }
            None => self.print_json(&report),
        }
    }

    fn eos(&mut self, doc: &ConfigDocument, args: &ReportArgs) -> Result<()> {
        let market = doc.market(&args.market)?;
        let eos = derive_unitary_eos(&market)?;
                if let Some(path) = &args.output {
            write_json_file(&eos, path)?;
        }
        if args.json {
            return self.print_json(&eos);
        }
        let amp = amplification_factor(&eos);
        self.print(format!(
            "K={} amplification={} N={} ({} <-> {})",
            eos.k(),
            amp.factor,
            eos.households(),
            amp.market_quantity,
            amp.paramagnet_analogue
        ))
    }

    fn grid(&self, doc: &ConfigDocument, o: &GridOverrides) -> Result<GridSpec> {
        let base = doc.grid;
        let pick = |flag: Option<f64>, field: fn(&GridSpec) -> f64, what: &str| {
            flag.or(base.as_ref().map(field)).ok_or_else(|| {
                Error::Config(format!("no {what} in the config grid block or on the command line"))
            })
        };
        let x_min = pick(o.x_min, |g| g.x_range().0, "x_min")?;
        let x_max = pick(o.x_max, |g| g.x_range().1, "x_max")?;
        let t_min = pick(o.t_min, |g| g.t_range().0, "t_min")?;
        let t_max = pick(o.t_max, |g| g.t_range().1, "t_max")?;
        let nx = o.nx.or(base.map(|g| g.nx())).ok_or_else(|| Error::Config("no nx given".into()))?;
        let nt = o.nt.or(base.map(|g| g.nt())).ok_or_else(|| Error::Config("no nt given".into()))?;
        GridSpec::new((x_min, x_max), nx, (t_min, t_max), nt).map_err(|e| Error::Config(e.to_string()))
    }

    fn curve_range(&self, doc: &ConfigDocument, o: &CurveOverrides) -> Result<((f64, f64), usize)> {
        let base = doc.grid;
        let x_min = o.x_min.or(base.map(|g| g.x_range().0));
        let x_max = o.x_max.or(base.map(|g| g.x_range().1));
        let n = o.n_points.or(base.map(|g| g.nx()));
        match (x_min, x_max, n) {
            (Some(a), Some(b), Some(n)) => Ok(((a, b), n)),
            _ => Err(Error::Config(
                "x range and point count must come from the config grid block or the command line".into(),
            )),
        }
    }

    fn write_data<T: Exportable>(
        &mut self,
        item: &T,
        dir: Option<PathBuf>,
        stem: &str,
        format: ExportFormat,
    ) -> Result<Option<PathBuf>> {
        match dir {
            Some(dir) => {
                let path = dir.join(format!("{stem}.{}", format.extension()));
                export(item, format, &path)?;
                Ok(Some(path))
            }
            None => Ok(None),
        }
    }

    fn surface(&mut self, doc: &ConfigDocument, name: &str, o: &GridOverrides, out: &FileOutput) -> Result<()> {
        let eos = doc.eos(name)?;
        let grid = self.grid(doc, o)?;
        let surface = sample_surface(&eos, &grid)?;
        let audit = audit_surface(&eos, &surface)?;
        let format = out.format.into();
        let summary = format!(
            "points={} max_relative_residual={} audit={}",
            audit.points,
            audit.max_relative_residual,
            pass(audit.pass)
        );
        match self.write_data(&surface, self.out_dir(&out.out_dir, doc), &format!("surface_{name}"), format)? {
            Some(path) => {
                self.print(summary)?;
                self.print(format!("wrote {}", path.display()))
            }
            // no destination: the data itself goes to stdout
            None => write_export(&surface, format, &mut *self.out).map_err(stdout_err),
        }
    }

    fn isocurves(
        &mut self,
        doc: &ConfigDocument,
        name: &str,
        t_values: &[f64],
        o: &CurveOverrides,
        out: &FileOutput,
    ) -> Result<()> {
        if t_values.is_empty() {
            return Err(Error::Config("at least one t value is required".into()));
        }
        let eos = doc.eos(name)?;
        let (range, n) = self.curve_range(doc, o)?;
        let family = isocurves(&eos, t_values, range, n)?;
        let report = isocurve_collapse_check(&eos, t_values, range, n)?;
        let dir = self.out_dir(&out.out_dir, doc);
        let written = self.write_data(&family, dir, &format!("isocurves_{name}"), out.format.into())?;
        self.print(format!(
            "curves={} {}",
            family.curves.len(),
            verdict(&report)
        ))?;
        if let Some(path) = written {
            self.print(format!("wrote {}", path.display()))?;
        }
        Ok(())
    }

    fn collapse(
        &mut self,
        doc: &ConfigDocument,
        name: &str,
        prices: &[f64],
        o: &CurveOverrides,
        out: &FileOutput,
    ) -> Result<()> {
        if prices.is_empty() {
            return Err(Error::Config("at least one price is required".into()));
        }
        let report = if doc.market_entry(name).is_ok() {
            isoprice_collapse_check(&doc.market(name)?, prices)?
        } else {
            let eos: Eos = doc.eos(name)?;
            let (range, n) = self.curve_range(doc, o)?;
            isocurve_collapse_check(&eos, prices, range, n)?
        };
        let dir = self.out_dir(&out.out_dir, doc);
        let written = self.write_data(&report, dir, &format!("collapse_{name}"), out.format.into())?;
        self.print(verdict(&report))?;
        if let Some(path) = written {
            self.print(format!("wrote {}", path.display()))?;
        }
        Ok(())
    }

    fn zeroth(&mut self, doc: &ConfigDocument, json: bool, output: &Option<PathBuf>) -> Result<()> {
        let registry = doc.registry()?;
        let report = ZerothReport {
            quantum: registry.quantum(),
            ranking: rank_markets(&registry)?,
            laws: verify_equivalence_laws(&registry)?,
        };
        if let Some(path) = output {
            write_json_file(&report, path)?;
        }
        if json {
            return self.print_json(&report);
        }
        self.print(format!("{:<6}{:<24}{}", "rank", "market", "price"))?;
        for (i, r) in report.ranking.iter().enumerate() {
            self.print(format!("{:<6}{:<24}{}", i + 1, r.name, r.price.price))?;
        }
        self.print("classes:")?;
        for c in &report.laws.classes {
            let flag = if c.mixed_goods { " (mixed goods)" } else { "" };
            self.print(format!("  price={}: {}{flag}", c.price.price, c.members.join(", ")))?;
        }
        let laws = &report.laws;
        self.print(format!(
            "laws: reflexive={} symmetric={} transitive={} ranking={}",
            pass(laws.reflexive),
            pass(laws.symmetric),
            pass(laws.transitive),
            pass(laws.ranking_consistent)
        ))?;
        if let Some(c) = &laws.counterexample {
            self.print(format!("counterexample ({}): {}", c.law, c.markets.join(", ")))?;
        }
        Ok(())
    }
}

fn verdict(report: &CollapseReport) -> String {
    match report.households {
        Some(n) => format!(
            "collapse={} slope=1/{n} max_deviation={}",
            report.collapse, report.max_deviation
        ),
        None => format!("collapse={} max_deviation={}", report.collapse, report.max_deviation),
    }
}
