//! Command-line flags, the optional config file, and their merge into a
//! validated [`RunConfig`].
//!
//! The config file is INI-style `key = value` text. Keys outside any
//! section apply to every command; a `[bounds]`, `[scan]`, ... section
//! applies to that command only. Flags given on the command line win.
//! Keys are the long flag names without dashes; a `direction` key may hold
//! several directions separated by `;`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use sbl_core::catalog::ShapeKind;
use sbl_core::quadrature::{MAX_POINTS, MIN_POINTS};

use crate::error::{CliError, CliResult};

/// Smallest mesh resolution per axis accepted by the triangulator.
pub const MIN_MESH: usize = 8;
pub const DEFAULT_SCAN: usize = 1000;
pub const DEFAULT_MESH: (usize, usize) = (128, 64);

#[derive(Debug, Parser)]
#[command(
    name = "sbl",
    version,
    about = "Extrinsic upper bounds for the first eigenvalue of the Laplacian on compact submanifolds"
)]
pub struct Cli {
    /// INI-style defaults; command-line flags override them.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Reilly, PR1 and PR2 bounds plus the quadratic form, as a JSON report.
    Bounds(Flags),
    /// Q, PR1 and PR2 over a sample of unit directions.
    Scan(Flags),
    /// Reilly vs optimized bounds vs mesh eigenvalue for three reference tori.
    PaperTable(Flags),
    /// First nonzero eigenvalue of the cotangent Laplacian on a triangulation.
    #[command(name = "mesh-lambda1")]
    MeshLambda1(Flags),
    /// The quadratic form Q, its spectrum and inertia.
    Qform(Flags),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// sphere, torus, clifford or ellipsoid.
    #[arg(long)]
    pub shape: Option<String>,
    /// Shape parameters, e.g. `R=1.4142135623730951` or `m=2,r=1`.
    #[arg(long, value_name = "K=V[,K=V...]")]
    pub param: Option<String>,
    /// Quadrature points per axis, `N` or `NxN`.
    #[arg(long, value_name = "NxN")]
    pub grid: Option<String>,
    /// Ambient direction `x,y,z`; repeatable.
    #[arg(long = "direction", value_name = "X,Y,Z", allow_hyphen_values = true)]
    pub directions: Vec<String>,
    /// Number of sampled unit directions for `scan`.
    #[arg(long, value_name = "N")]
    pub sphere_scan: Option<usize>,
    /// Triangulation resolution `NUxNV` for the mesh eigenvalue.
    #[arg(long, value_name = "NUxNV")]
    pub mesh: Option<String>,
    /// Read the mesh from an OFF file instead of triangulating the shape.
    #[arg(long, value_name = "PATH")]
    pub off: Option<PathBuf>,
    /// Write the triangulation used to an OFF file.
    #[arg(long, value_name = "PATH")]
    pub save_off: Option<PathBuf>,
    /// Output file (written atomically); stdout when absent.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Bounds,
    Scan,
    PaperTable,
    MeshLambda1,
    Qform,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Bounds => "bounds",
            CommandKind::Scan => "scan",
            CommandKind::PaperTable => "paper-table",
            CommandKind::MeshLambda1 => "mesh-lambda1",
            CommandKind::Qform => "qform",
        }
    }

    fn default_format(self) -> Format {
        match self {
            CommandKind::Scan | CommandKind::PaperTable => Format::Csv,
            _ => Format::Json,
        }
    }
}

/// A fully resolved invocation.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: CommandKind,
    pub shape: ShapeKind,
    /// Points per axis; `None` means the per-dimension default.
    pub grid: Option<Vec<usize>>,
    pub directions: Vec<DVector<f64>>,
    pub sphere_scan: usize,
    pub mesh: Option<(usize, usize)>,
    pub off: Option<PathBuf>,
    pub save_off: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub format: Format,
}

impl Cli {
    pub fn into_run_config(self) -> CliResult<RunConfig> {
        let (kind, flags) = match self.command {
            Command::Bounds(f) => (CommandKind::Bounds, f),
            Command::Scan(f) => (CommandKind::Scan, f),
            Command::PaperTable(f) => (CommandKind::PaperTable, f),
            Command::MeshLambda1(f) => (CommandKind::MeshLambda1, f),
            Command::Qform(f) => (CommandKind::Qform, f),
        };
        let file = match &self.config {
            Some(path) => load_config(path, kind)?,
            None => Flags::default(),
        };
        resolve(kind, merge(flags, file))
    }
}

fn merge(flags: Flags, file: Flags) -> Flags {
    Flags {
        shape: flags.shape.or(file.shape),
        param: flags.param.or(file.param),
        grid: flags.grid.or(file.grid),
        directions: if flags.directions.is_empty() {
            file.directions
        } else {
            flags.directions
        },
        sphere_scan: flags.sphere_scan.or(file.sphere_scan),
        mesh: flags.mesh.or(file.mesh),
        off: flags.off.or(file.off),
        save_off: flags.save_off.or(file.save_off),
        out: flags.out.or(file.out),
        format: flags.format.or(file.format),
    }
}

/// Reads the general section, then the command's own section on top.
pub fn load_config(path: &Path, kind: CommandKind) -> CliResult<Flags> {
    let ini = ini::Ini::load_from_file(path).map_err(|e| match e {
        ini::Error::Io(e) => CliError::from(e),
        ini::Error::Parse(e) => CliError::usage(format!("{}: {e}", path.display())),
    })?;
    let mut flags = Flags::default();
    for name in ini.sections().flatten() {
        {
            if !KNOWN_SECTIONS.contains(&name) {
                return Err(CliError::usage(format!(
                    "{}: unknown section [{name}]",
                    path.display()
                )));
            }
        }
    }
    let general = ini.general_section();
    apply_section(&mut flags, general.iter(), path)?;
    if let Some(own) = ini.section(Some(kind.name())) {
        apply_section(&mut flags, own.iter(), path)?;
    }
    Ok(flags)
}

const KNOWN_SECTIONS: [&str; 5] = ["bounds", "scan", "paper-table", "mesh-lambda1", "qform"];

fn apply_section<'a>(
    flags: &mut Flags,
    entries: impl Iterator<Item = (&'a str, &'a str)>,
    path: &Path,
) -> CliResult<()> {
    for (key, value) in entries {
        let value = value.trim();
        match key.trim() {
            "shape" => flags.shape = Some(value.to_string()),
            "param" => flags.param = Some(value.to_string()),
            "grid" => flags.grid = Some(value.to_string()),
            "direction" => {
                flags.directions = value
                    .split(';')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(String::from)
                    .collect()
            }
            "sphere-scan" | "sphere_scan" => {
                flags.sphere_scan = Some(value.parse().map_err(|_| {
                    CliError::usage(format!("{}: sphere-scan must be a count", path.display()))
                })?)
            }
            "mesh" => flags.mesh = Some(value.to_string()),
            "off" => flags.off = Some(PathBuf::from(value)),
            "save-off" | "save_off" => flags.save_off = Some(PathBuf::from(value)),
            "out" => flags.out = Some(PathBuf::from(value)),
            "format" => {
                flags.format = Some(Format::from_str(value, true).map_err(|_| {
                    CliError::usage(format!("{}: unknown format {value:?}", path.display()))
                })?)
            }
            other => {
                return Err(CliError::usage(format!(
                    "{}: unknown key {other:?}",
                    path.display()
                )))
            }
        }
    }
    Ok(())
}

fn resolve(kind: CommandKind, flags: Flags) -> CliResult<RunConfig> {
    let params = match &flags.param {
        Some(p) => parse_params(p)?,
        None => BTreeMap::new(),
    };
    let shape_name = flags.shape.as_deref().unwrap_or("torus");
    let shape = ShapeKind::from_name(shape_name, &params)?;
    let grid = flags.grid.as_deref().map(parse_grid).transpose()?;
    let directions = flags
        .directions
        .iter()
        .map(|d| parse_vector(d))
        .collect::<CliResult<Vec<_>>>()?;
    let sphere_scan = flags.sphere_scan.unwrap_or(DEFAULT_SCAN);
    if sphere_scan == 0 {
        return Err(CliError::usage("sphere-scan must be positive"));
    }
    let mesh = flags.mesh.as_deref().map(parse_mesh).transpose()?;
    Ok(RunConfig {
        command: kind,
        shape,
        grid,
        directions,
        sphere_scan,
        mesh,
        off: flags.off,
        save_off: flags.save_off,
        out: flags.out,
        format: flags.format.unwrap_or(kind.default_format()),
    })
}

/// `k=v[,k=v...]` into a map; values must be numbers.
pub fn parse_params(text: &str) -> CliResult<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| CliError::usage(format!("parameter {item:?} is not k=v")))?;
        let value: f64 = v
            .trim()
            .parse()
            .map_err(|_| CliError::usage(format!("parameter {k} has non-numeric value {v:?}")))?;
        if out.insert(k.trim().to_string(), value).is_some() {
            return Err(CliError::usage(format!("parameter {k} given twice")));
        }
    }
    Ok(out)
}

fn parse_counts(text: &str, what: &str) -> CliResult<Vec<usize>> {
    text.split(['x', 'X'])
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| CliError::usage(format!("{what} {text:?} is not of the form NxN")))
        })
        .collect()
}

/// `N`, `NxN` or `NxNxN`, each within the supported quadrature range.
pub fn parse_grid(text: &str) -> CliResult<Vec<usize>> {
    let counts = parse_counts(text, "grid")?;
    if let Some(&bad) = counts.iter().find(|&&c| !(MIN_POINTS..=MAX_POINTS).contains(&c)) {
        return Err(CliError::usage(format!(
            "grid resolution {bad} outside {MIN_POINTS}..={MAX_POINTS}"
        )));
    }
    Ok(counts)
}

pub fn parse_mesh(text: &str) -> CliResult<(usize, usize)> {
    match parse_counts(text, "mesh")?[..] {
        [nu, nv] if (MIN_MESH..=MAX_POINTS).contains(&nu) && (MIN_MESH..=MAX_POINTS).contains(&nv) => {
            Ok((nu, nv))
        }
        [_, _] => Err(CliError::usage(format!(
            "mesh resolution {text:?} outside {MIN_MESH}..={MAX_POINTS} per axis"
        ))),
        _ => Err(CliError::usage(format!("mesh {text:?} is not of the form NUxNV"))),
    }
}

pub fn parse_vector(text: &str) -> CliResult<DVector<f64>> {
    let coords = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| CliError::usage(format!("direction {text:?} is not a list of numbers")))?;
    if coords.iter().any(|c| !c.is_finite()) {
        return Err(CliError::usage(format!("direction {text:?} is not finite")));
    }
    Ok(DVector::from_vec(coords))
}
