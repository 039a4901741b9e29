use std::ffi::OsString;
use std::path::PathBuf;

use clap::error::ErrorKind as ClapKind;
use clap::{Args, Parser, Subcommand};
use vline_core::eval::{NoiseModel, NoiseSpec};
use vline_core::recon::{PadSpec, Pipeline};

use crate::config::{Command, GeometrySpec, RunConfig, Source, Transform};
use crate::report::{error_table, read_reports};
use crate::{execute, init_threads, CliError, Outcome};

/// V-line and star transform experiments on vector fields.
#[derive(Debug, Parser)]
#[command(name = "vline", version)]
pub struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Write a phantom field with component and arrow plots.
    Phantom {
        /// 1, 2, 3, or a bump: potential, solenoidal, helmholtz.
        #[arg(long)]
        id: String,
        #[command(flatten)]
        common: Common,
    },
    /// Compute forward data of a field.
    Forward {
        #[command(flatten)]
        source: SourceArgs,
        /// Any of lvt, tvt, lvt1, tvt1, star (comma separated).
        #[arg(long = "transform", short, value_delimiter = ',', required = true)]
        transforms: Vec<String>,
        /// Pad factor of the computational grid.
        #[arg(long)]
        pad: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Forward data, optional noise, inversion and error report.
    Pipeline {
        /// Pipeline 1-5.
        #[arg(long)]
        id: u8,
        #[command(flatten)]
        source: SourceArgs,
        /// Noise level as a fraction of the data norm.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Uniform instead of Gaussian noise.
        #[arg(long)]
        uniform: bool,
        /// Pad factor; defaults to 2 for pipelines 3-5 and 1 otherwise.
        #[arg(long)]
        pad: Option<f64>,
        /// Support radius for the moment pipelines, in half extents.
        #[arg(long)]
        support: Option<f64>,
        /// Hann-windowed ramp filter (pipeline 5).
        #[arg(long)]
        hann: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Tabulate saved reports (files or run directories).
    Report { paths: Vec<PathBuf> },
    /// Re-run a saved run.toml.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Write to this directory instead of the saved one.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
struct SourceArgs {
    /// 1, 2, 3, potential, solenoidal or helmholtz.
    #[arg(long)]
    phantom: Option<String>,
    /// Square PNG read as (red, green).
    #[arg(long)]
    image: Option<PathBuf>,
    /// Field file.
    #[arg(long)]
    input: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct Common {
    /// Pixels per side; image and field inputs bring their own.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    half_extent: f64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// V-line ray directions in degrees.
    #[arg(long, default_value_t = 45.0, allow_negative_numbers = true)]
    u: f64,
    #[arg(long, default_value_t = 135.0, allow_negative_numbers = true)]
    v: f64,
    /// Star branch directions in degrees.
    #[arg(long, value_delimiter = ',', default_value = "0,120,240", allow_negative_numbers = true)]
    star: Vec<f64>,
    /// Star branch weights.
    #[arg(long, value_delimiter = ',', default_value = "1,1,1", allow_negative_numbers = true)]
    weights: Vec<f64>,
}

const DEFAULT_N: usize = 160;

impl SourceArgs {
    fn resolve(self) -> Result<Source, CliError> {
        match (self.phantom, self.image, self.input) {
            (Some(p), _, _) => Source::parse_phantom(&p),
            (_, Some(path), _) => Ok(Source::Image { path }),
            (_, _, Some(path)) => Ok(Source::Field { path }),
            _ => Err(CliError::config("no input given (use --phantom, --image or --input)")),
        }
    }
}

/// Image and field inputs fix `n`; a conflicting `--n` is reported when
/// the config is loaded.
fn base(command: Command, source: Source, common: Common) -> Result<RunConfig, CliError> {
    let n = match (common.n, &source) {
        (Some(n), _) => n,
        (None, Source::Image { path }) => vline_core::phantom::field_from_rgb_image(path)?.grid().n(),
        (None, Source::Field { path }) => vline_core::io::read_vector_field(path)?.grid().n(),
        (None, _) => DEFAULT_N,
    };
    let mut cfg = RunConfig::new(command, source, n, common.out);
    cfg.half_extent = common.half_extent;
    cfg.geometry =
        GeometrySpec { u_deg: common.u, v_deg: common.v, star_deg: common.star, star_weights: common.weights };
    Ok(cfg)
}

impl Cmd {
    fn into_config(self) -> Result<Option<RunConfig>, CliError> {
        Ok(Some(match self {
            Cmd::Phantom { id, common } => base(Command::Phantom, Source::parse_phantom(&id)?, common)?,
            Cmd::Forward { source, transforms, pad, common } => {
                let mut cfg = base(Command::Forward, source.resolve()?, common)?;
                cfg.transforms = transforms.iter().map(|t| Transform::parse(t.trim())).collect::<Result<_, _>>()?;
                cfg.pad = pad.map(|pad_factor| PadSpec { pad_factor, ..PadSpec::NONE });
                cfg
            }
            Cmd::Pipeline { id, source, noise, seed, uniform, pad, support, hann, common } => {
                let p = Pipeline::try_from(id).map_err(CliError::config)?;
                let mut cfg = base(Command::Pipeline, source.resolve()?, common)?;
                cfg.pipeline = Some(p.id());
                let model = if uniform { NoiseModel::Uniform } else { NoiseModel::Gaussian };
                cfg.noise = NoiseSpec { level: noise, seed, model };
                if pad.is_some() || support.is_some() {
                    let d = PadSpec::default_for(p);
                    cfg.pad = Some(PadSpec {
                        pad_factor: pad.unwrap_or(d.pad_factor),
                        support_radius: support.unwrap_or(d.support_radius),
                    });
                }
                cfg.hann = hann;
                cfg
            }
            Cmd::Run { config, out } => {
                let mut cfg = RunConfig::read(&config)?;
                if let Some(out) = out {
                    cfg.out = out;
                }
                cfg
            }
            Cmd::Report { .. } => return Ok(None),
        }))
    }
}

fn summarize(outcome: &Outcome) {
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(r) = &outcome.report {
        let errs: Vec<String> = r.components.iter().map(|c| format!("{}={:.3}%", c.name, 100.0 * c.rel_l2)).collect();
        println!(
            "pipeline {} n={} noise={} seed={} {:.2}s {}",
            r.pipeline,
            r.n,
            r.noise.level,
            r.noise.seed,
            r.seconds,
            errs.join(" ")
        );
    }
    for f in &outcome.files {
        println!("wrote {}", f.display());
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    init_threads()?;
    if let Cmd::Report { paths } = &cli.cmd {
        print!("{}", error_table(&read_reports(paths)?));
        return Ok(());
    }
    if let Some(cfg) = cli.cmd.into_config()? {
        summarize(&execute(&cfg)?);
    }
    Ok(())
}

/// Parses `args` (program name first), runs, and returns the exit code.
/// Failures print one `error[...]` line to stderr.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ClapKind::DisplayHelp | ClapKind::DisplayVersion) => {
            print!("{e}");
            return 0;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("bad arguments");
            eprintln!("{}", CliError::config(first.trim_start_matches("error: ")));
            return crate::EXIT_CONFIG;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}
