//! Boundary-value problems solved through secular functions of the stable
//! propagators: bound states, Bloch bands and guided SH waves.

pub mod escape;
pub mod periodic;
pub mod scan;
pub mod sh;
pub mod wells;

pub use escape::{escape_scan, escape_secular, OutgoingBasis, Side};
pub use periodic::{band_structure, kronig_penney_residuals, periodic_dispersion, BandPoint, BandStructure, KronigPenney};
pub use scan::{linspace, scan_and_refine, MaskedPoint, Root, ScanMode, ScanOptions, SecularScan};
pub use sh::{sh_wave_speeds, ShMaterial, ShSpeeds, ShStack};
pub use wells::{finite_well_oracle, Parity, WellLevel};
