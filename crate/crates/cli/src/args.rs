use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use msl_transfer::Variant;

#[derive(Debug, Parser)]
#[command(name = "msltm", version, about = "Layered-media propagators, band structures and bound states")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse a structure file and check every medium it uses.
    Validate(Common),
    /// Bloch bands of the layer stack taken as one period.
    Bands(BandsArgs),
    /// Guided or bound states of the layer stack between its half-spaces.
    Escape(EscapeArgs),
    /// Compare the T, H, S and E folds over a sweep of layer-thickness scales.
    Stability(StabilityArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    #[arg(long)]
    pub structure: PathBuf,
    /// Accept media that are not formally hermitian.
    #[arg(long)]
    pub allow_lossy: bool,
}

#[derive(Debug, Args)]
pub struct Output {
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Worker threads for grid evaluation; 1 runs sequentially.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Omit the `# msltm <version>` header line.
    #[arg(long)]
    pub no_meta: bool,
}

#[derive(Debug, Args)]
pub struct BandsArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub output: Output,
    #[arg(long, value_enum, default_value_t = VariantArg::H)]
    pub variant: VariantArg,
    /// Bloch wavenumbers, `start:stop:count`.
    #[arg(long)]
    pub grid: GridSpec,
    /// Scanned parameter range (energy, or phase speed for SH media), `lo:hi`.
    #[arg(long)]
    pub range: RangeSpec,
    /// Scan points across `--range`.
    #[arg(long, default_value_t = 2000)]
    pub samples: usize,
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
}

#[derive(Debug, Args)]
pub struct EscapeArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub output: Output,
    #[arg(long, value_enum, default_value_t = VariantArg::H)]
    pub variant: VariantArg,
    /// Scanned parameter range, `lo:hi`; sampled with `--samples` points.
    #[arg(long, conflicts_with = "grid", required_unless_present = "grid")]
    pub range: Option<RangeSpec>,
    /// Explicit scan grid, `start:stop:count`.
    #[arg(long)]
    pub grid: Option<GridSpec>,
    #[arg(long, default_value_t = 2000)]
    pub samples: usize,
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
}

#[derive(Debug, Args)]
pub struct StabilityArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub output: Output,
    /// Thickness scale factors applied to every layer, `start:stop:count`.
    #[arg(long)]
    pub grid: GridSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    T,
    H,
    E,
    S,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::T => Variant::T,
            VariantArg::H => Variant::H,
            VariantArg::E => Variant::E,
            VariantArg::S => Variant::S,
        }
    }
}

/// `start:stop:count`, evenly spaced and inclusive of both ends.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl GridSpec {
    pub fn points(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.start];
        }
        let step = (self.stop - self.start) / (self.count - 1) as f64;
        (0..self.count)
            .map(|i| if i + 1 == self.count { self.stop } else { self.start + step * i as f64 })
            .collect()
    }
}

fn number(s: &str, what: &str) -> Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("{what} \"{s}\" is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{what} must be finite"))
    }
}

impl FromStr for GridSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let [start, stop, count] = parts[..] else {
            return Err(format!("expected start:stop:count, got \"{s}\""));
        };
        let start = number(start, "start")?;
        let stop = number(stop, "stop")?;
        let count: usize = count.trim().parse().map_err(|_| format!("count \"{count}\" is not a whole number"))?;
        match count {
            0 => Err("grid count must be at least 1".into()),
            1 if start != stop => Err("a one-point grid needs start == stop".into()),
            _ if count > 1 && stop <= start => Err("grid stop must exceed start".into()),
            _ => Ok(Self { start, stop, count }),
        }
    }
}

/// `lo:hi` with `lo < hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeSpec {
    pub lo: f64,
    pub hi: f64,
}

impl FromStr for RangeSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let Some((lo, hi)) = s.split_once(':') else {
            return Err(format!("expected lo:hi, got \"{s}\""));
        };
        let (lo, hi) = (number(lo, "lo")?, number(hi, "hi")?);
        if lo < hi {
            Ok(Self { lo, hi })
        } else {
            Err("range needs lo < hi".into())
        }
    }
}

impl RangeSpec {
    pub fn grid(&self, samples: usize) -> Vec<f64> {
        GridSpec { start: self.lo, stop: self.hi, count: samples }.points()
    }
}
