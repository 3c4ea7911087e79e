use std::collections::BTreeSet;
use std::fs::File;
use std::io::{self, BufWriter, Write};

use msl_transfer::solvers::escape::escape_scan;
use msl_transfer::solvers::{band_structure, ScanOptions, ShMaterial, SecularScan};
use msl_transfer::structure::{MaterialSpec, Parameters, ProblemKind};
use msl_transfer::{
    load_structure_spec, validate_coefficients, variant_comparison_report, Execution, LayeredStructure, MslError,
    StructureSource, StructureSpec, SweepSpec, Variant,
};
use serde::Serialize;
use thiserror::Error;

use crate::args::{BandsArgs, Common, EscapeArgs, Format, Output, StabilityArgs};

/// A failed run, tagged with its exit code.
#[derive(Debug, Error)]
pub enum Failure {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Numeric(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Input(_) => 2,
            Failure::Validation(_) => 3,
            Failure::Numeric(_) => 4,
        }
    }
}

impl From<MslError> for Failure {
    fn from(e: MslError) -> Self {
        let message = e.to_string();
        match e {
            MslError::Structure { .. }
            | MslError::InvalidInput(_)
            | MslError::Dimension(_)
            | MslError::UnsupportedVariant(_) => Failure::Input(message),
            MslError::SingularB { .. } => Failure::Validation(message),
            _ => Failure::Numeric(message),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Input(format!("output: {e}"))
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Input(format!("output: {e}"))
    }
}

type Run = Result<(), Failure>;

/// Load the file and check every referenced medium at the file's parameters.
fn load_checked(common: &Common) -> Result<StructureSpec, Failure> {
    let spec = load_structure_spec(StructureSource::Path(&common.structure))?;
    spec.check()?;
    let mut failures = Vec::new();
    let names: BTreeSet<&str> = spec.used_materials().collect();
    for name in names {
        let material = spec.material_by_name(name).expect("checked above");
        let medium = match material.instantiate(&spec.parameters) {
            Ok(m) => m,
            Err(e @ MslError::SingularB { .. }) => {
                failures.push(format!("material \"{name}\": {e}"));
                continue;
            }
            Err(e) => return Err(Failure::Input(format!("material \"{name}\": {e}"))),
        };
        let report = validate_coefficients(&medium, !common.allow_lossy);
        for v in &report.violations {
            failures.push(format!("material \"{name}\": {:?} (relative residual {:.3e})", v.kind, v.relative));
        }
    }
    if failures.is_empty() {
        Ok(spec)
    } else {
        for f in &failures {
            eprintln!("{f}");
        }
        let hint = if common.allow_lossy { "" } else { "; pass --allow-lossy to accept non-hermitian media" };
        Err(Failure::Validation(format!("{} validation failure(s){hint}", failures.len())))
    }
}

pub fn validate(common: &Common) -> Run {
    let spec = load_checked(common)?;
    eprintln!(
        "{}: valid, {} layer(s), {} material(s)",
        common.structure.display(),
        spec.layers.len(),
        spec.materials.len()
    );
    Ok(())
}

type Builder = Box<dyn Fn(f64) -> msl_transfer::Result<LayeredStructure> + Sync + Send>;

/// Map the scanned parameter to a structure: energy for quantum media, phase
/// speed along the layers (at the file's `omega`) for SH-piezo media.
fn builder(spec: &StructureSpec) -> Result<(&'static str, Builder), Failure> {
    let kind = spec
        .problem_kind()
        .ok_or_else(|| Failure::Input("all materials must belong to one family".into()))?;
    match kind {
        ProblemKind::Quantum => {
            let spec = spec.clone();
            Ok((
                "energy",
                Box::new(move |e| spec.instantiate(&Parameters { energy: Some(e), ..spec.parameters.clone() })),
            ))
        }
        ProblemKind::ShPiezo => {
            let omega = spec
                .parameters
                .omega
                .ok_or_else(|| Failure::Input("sh_piezo structures need parameters.omega".into()))?;
            let spec = spec.clone();
            Ok((
                "v_s",
                Box::new(move |v| {
                    spec.instantiate(&Parameters {
                        omega: Some(omega),
                        kappa_x: Some(omega / v),
                        ..spec.parameters.clone()
                    })
                }),
            ))
        }
        ProblemKind::Msl => Err(Failure::Input(
            "fixed-coefficient (msl) media have no parameter to scan; use quantum or sh_piezo materials".into(),
        )),
    }
}

fn execution(output: &Output) -> Result<Execution, Failure> {
    match output.threads {
        None => Ok(Execution::Parallel),
        Some(0) => Err(Failure::Usage("--threads must be at least 1".into())),
        Some(1) => Ok(Execution::Sequential),
        Some(n) => {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| Failure::Usage(format!("thread pool: {e}")))?;
            Ok(Execution::Parallel)
        }
    }
}

fn scan_options(tol: f64, samples: usize, output: &Output) -> Result<ScanOptions, Failure> {
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Failure::Usage(format!("--tol must be positive, got {tol}")));
    }
    if samples < 2 {
        return Err(Failure::Usage("--samples must be at least 2".into()));
    }
    Ok(ScanOptions { tol, exec: execution(output)?, ..Default::default() })
}

fn sink(output: &Output) -> Result<Box<dyn Write>, Failure> {
    Ok(match &output.out {
        Some(path) => Box::new(BufWriter::new(File::create(path).map_err(|e| {
            Failure::Input(format!("cannot create {}: {e}", path.display()))
        })?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn emit<T: Serialize>(output: &Output, value: &T, csv: impl FnOnce(&mut dyn Write) -> Result<(), csv::Error>) -> Run {
    let mut out = sink(output)?;
    let version = env!("CARGO_PKG_VERSION");
    match output.format {
        Format::Csv => {
            if !output.no_meta {
                writeln!(out, "# msltm {version}")?;
            }
            csv(&mut out)?;
        }
        Format::Json => {
            let json = if output.no_meta {
                serde_json::to_string_pretty(value)
            } else {
                serde_json::to_string_pretty(&serde_json::json!({ "msltm": version, "result": value }))
            }
            .map_err(|e| Failure::Numeric(format!("serializing output: {e}")))?;
            writeln!(out, "{json}")?;
        }
    }
    out.flush()?;
    Ok(())
}

fn report_masked(scan: &SecularScan) {
    if scan.masked.is_empty() {
        return;
    }
    let mut counts = std::collections::BTreeMap::new();
    for m in &scan.masked {
        *counts.entry(m.status.as_str()).or_insert(0usize) += 1;
    }
    let parts: Vec<String> = counts.iter().map(|(s, n)| format!("{s}: {n}")).collect();
    eprintln!("note: {} grid point(s) masked ({})", scan.masked.len(), parts.join(", "));
}

pub fn bands(args: &BandsArgs) -> Run {
    let opts = scan_options(args.tol, args.samples, &args.output)?;
    let spec = load_checked(&args.common)?;
    let (parameter, build) = builder(&spec)?;
    let q_grid = args.grid.points();
    let grid = args.range.grid(args.samples);
    let mut bands = band_structure(build, &q_grid, &grid, Variant::from(args.variant), &opts)?;
    bands.parameter = parameter.into();
    emit(&args.output, &bands, |out| bands.write_csv(out))
}

fn sh_material(spec: &StructureSpec, name: &str) -> Option<ShMaterial> {
    match spec.material_by_name(name)? {
        &MaterialSpec::ShPiezo { rho, c44, e15, eps11 } => Some(ShMaterial { rho, c44, e15, eps11 }),
        _ => None,
    }
}

pub fn escape(args: &EscapeArgs) -> Run {
    let opts = scan_options(args.tol, args.samples, &args.output)?;
    let spec = load_checked(&args.common)?;
    let (parameter, build) = builder(&spec)?;
    let variant = Variant::from(args.variant);
    if !matches!(variant, Variant::H | Variant::E) {
        return Err(Failure::Input(format!("escape supports --variant h or e, not {variant}")));
    }
    let grid = match (&args.grid, &args.range) {
        (Some(g), _) => g.points(),
        (None, Some(r)) => r.grid(args.samples),
        (None, None) => unreachable!("clap requires --range or --grid"),
    };
    if parameter == "v_s" {
        let outer = [spec.left.get_ref(), spec.right.get_ref()]
            .iter()
            .filter_map(|n| sh_material(&spec, n))
            .map(|m| m.bulk_speed())
            .fold(f64::INFINITY, f64::min);
        if grid[grid.len() - 1] >= outer {
            eprintln!("warning: range reaches the outer bulk SH speed {outer:.6}; points above it are masked");
        }
    }
    let scan = escape_scan(parameter, build, variant, &grid, &opts)?;
    report_masked(&scan);
    let tag = variant.to_string();
    emit(&args.output, &scan, |out| scan.write_roots_csv(out, &tag))
}

pub fn stability(args: &StabilityArgs) -> Run {
    let exec = execution(&args.output)?;
    let spec = load_checked(&args.common)?;
    let s = spec.instantiate(&spec.parameters)?;
    let sweep = SweepSpec { scales: args.grid.points() };
    if sweep.scales.iter().any(|&x| x < 0.0) {
        return Err(Failure::Usage("thickness scales must be non-negative".into()));
    }
    let report = variant_comparison_report(&s, &sweep, exec)?;
    emit(&args.output, &report, |out| report.write_csv(out))
}
