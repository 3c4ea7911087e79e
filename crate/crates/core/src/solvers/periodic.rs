//! Bloch dispersion of a periodic stack, the scalar Kronig-Penney forms and
//! band tracking.

use num_complex::Complex64;
use serde::Serialize;

use crate::compose::{structure_propagator, structure_s_matrix, EndBases};
use crate::error::{MslError, Result};
use crate::exec::{map_grid, Execution};
use crate::linalg::{self, c, CMat, I, ONE};
use crate::medium::make_quantum_medium;
use crate::propagators::Variant;
use crate::qep::solve_qep;
use crate::propagators::{q_matrix, Referencing};
use crate::solvers::scan::{check_grid, scan_and_refine, ScanOptions};
use crate::structure::{Layer, LayeredStructure};

/// Bloch secular residual of one period at wavenumber `q`, in the chosen
/// form. The finite layers of `period` form one cell; its half-space media
/// only supply the end bases of the S form (overridden by `end_bases`).
///
/// With `e = exp(iqd)` the forms are
/// - H: `det [[H11, e·H12 − I], [H21 − e·I, e·H22]] · e^{−iNqd}`
/// - E: `det (E11 + e·E12 − E21/e − E22)`
/// - T: `det (T − e·I) · e^{−iNqd}`
/// - S: `det [[M1, −N1], [M2, −N2]]` with `M_j = Q_R,j1 S21 − e(Q_L,j1 + Q_L,j2 S11)`
///   and `N_j = e·Q_L,j2 S12 − Q_R,j1 S22 − Q_R,j2`.
pub fn periodic_dispersion(
    period: &LayeredStructure,
    variant: Variant,
    q: f64,
    end_bases: Option<&EndBases>,
) -> Result<Complex64> {
    let n = period.n();
    let d = period.total_thickness();
    let e = (I * q * d).exp();
    let unwind = (-I * q * d * n as f64).exp();
    let eye = linalg::identity(n);
    match variant {
        Variant::H => {
            let (h, _) = structure_propagator(period, Variant::H)?;
            let m = linalg::assemble(&h.b11(), &(h.b12() * e - &eye), &(h.b21() - &eye * e), &(h.b22() * e));
            Ok(linalg::det(&m) * unwind)
        }
        Variant::E => {
            let (m, _) = structure_propagator(period, Variant::E)?;
            Ok(linalg::det(&(m.b11() + m.b12() * e - m.b21() / e - m.b22())))
        }
        Variant::T => {
            let (t, _) = structure_propagator(period, Variant::T)?;
            let shifted = &t.data - linalg::identity(2 * n) * e;
            Ok(linalg::det(&shifted) * unwind)
        }
        Variant::S => {
            let owned;
            let ends = match end_bases {
                Some(b) => b,
                None => {
                    owned = own_end_bases(period)?;
                    &owned
                }
            };
            let (s, _) = structure_s_matrix(period, Some(ends))?;
            let (s11, s12, s21, s22) = (s.b11(), s.b12(), s.b21(), s.b22());
            let ql = |r, c| linalg::block(&ends.left, r, c);
            let qr = |r, c| linalg::block(&ends.right, r, c);
            let m_row = |j| qr(j, 0) * &s21 - (ql(j, 0) + ql(j, 1) * &s11) * e;
            let n_row = |j| ql(j, 1) * &s12 * e - qr(j, 0) * &s22 - qr(j, 1);
            let m = linalg::assemble(&m_row(0), &(-n_row(0)), &m_row(1), &(-n_row(1)));
            Ok(linalg::det(&m))
        }
        other => Err(MslError::UnsupportedVariant(format!("periodic dispersion in {other} form"))),
    }
}

fn own_end_bases(period: &LayeredStructure) -> Result<EndBases> {
    let reduced = |m| -> Result<CMat> { Ok(q_matrix(&solve_qep(m)?, 0.0, &Referencing::Reduced)?.data) };
    Ok(EndBases {
        left: reduced(&period.left)?,
        right: reduced(&period.right)?,
    })
}

/// One Kronig-Penney cell: a well of width `well_width` (potential zero)
/// followed by a barrier of height `potential` and width `barrier_width`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KronigPenney {
    pub well_mass: f64,
    pub barrier_mass: f64,
    pub potential: f64,
    pub well_width: f64,
    pub barrier_width: f64,
    pub hbar2_over_2: f64,
}

impl KronigPenney {
    /// Equal masses, `hbar2_over_2 = 1`.
    pub fn symmetric(potential: f64, well_width: f64, barrier_width: f64) -> Self {
        Self {
            well_mass: 1.0,
            barrier_mass: 1.0,
            potential,
            well_width,
            barrier_width,
            hbar2_over_2: 1.0,
        }
    }

    pub fn period_length(&self) -> f64 {
        self.well_width + self.barrier_width
    }

    /// Cell at `energy`: well then barrier, well on the left, barrier on the right.
    pub fn period(&self, energy: f64) -> Result<LayeredStructure> {
        let well = make_quantum_medium(self.well_mass, 0.0, energy, self.hbar2_over_2)?;
        let barrier = make_quantum_medium(self.barrier_mass, self.potential, energy, self.hbar2_over_2)?;
        LayeredStructure::new(
            well.clone(),
            vec![
                Layer::new(well, self.well_width)?.labeled("well"),
                Layer::new(barrier.clone(), self.barrier_width)?.labeled("barrier"),
            ],
            barrier,
        )
    }

    fn beta_well(&self) -> f64 {
        self.hbar2_over_2 / self.well_mass
    }

    fn beta_barrier(&self) -> f64 {
        self.hbar2_over_2 / self.barrier_mass
    }

    /// Wavenumbers in the well and in the barrier (imaginary below the barrier top).
    pub fn wavenumbers(&self, energy: f64) -> (Complex64, Complex64) {
        let k_well = c(energy / self.beta_well(), 0.0).sqrt();
        let k_barrier = c((energy - self.potential) / self.beta_barrier(), 0.0).sqrt();
        (k_well, k_barrier)
    }

    /// Standing-wave end bases: `+` is `sin k(z − z_ref)`, `−` is `cos k(z − z_ref)`,
    /// so `Q = [[0, 1], [βk, 0]]`.
    pub fn standing_wave_bases(&self, energy: f64) -> EndBases {
        let (k_well, k_barrier) = self.wavenumbers(energy);
        let q = |beta: f64, k: Complex64| CMat::from_row_slice(2, 2, &[c(0.0, 0.0), ONE, k * beta, c(0.0, 0.0)]);
        EndBases {
            left: q(self.beta_well(), k_well),
            right: q(self.beta_barrier(), k_barrier),
        }
    }

    /// Ratio `k_B m_A / (k_A m_B)` entering the S form.
    pub fn rho(&self, energy: f64) -> Complex64 {
        let (k_well, k_barrier) = self.wavenumbers(energy);
        k_barrier * self.well_mass / (k_well * self.barrier_mass)
    }

    /// Scalar Bloch residual of the cell in the chosen form:
    /// - H: `2cos(qd)·H12 − (1 − H11·H22 + H12²)`
    /// - E: `2cos(qd)·E12 − (E22 − E11)`
    /// - S: `2cos(qd)·S12 − [ρ(S21·S12 − S11·S22) + 1]`, standing-wave end bases
    /// - T: `(T11 + T22)/2 − cos(qd)`
    pub fn residual(&self, energy: f64, q: f64, variant: Variant) -> Result<Complex64> {
        let cell = self.period(energy)?;
        let two_cos = c(2.0 * (q * self.period_length()).cos(), 0.0);
        match variant {
            Variant::H => {
                let (h, _) = structure_propagator(&cell, Variant::H)?;
                let (h11, h12, h22) = (h.data[(0, 0)], h.data[(0, 1)], h.data[(1, 1)]);
                Ok(two_cos * h12 - (ONE - h11 * h22 + h12 * h12))
            }
            Variant::E => {
                let (m, _) = structure_propagator(&cell, Variant::E)?;
                Ok(two_cos * m.data[(0, 1)] - (m.data[(1, 1)] - m.data[(0, 0)]))
            }
            Variant::S => {
                let (s, _) = structure_s_matrix(&cell, Some(&self.standing_wave_bases(energy)))?;
                let (s11, s12, s21, s22) = (s.data[(0, 0)], s.data[(0, 1)], s.data[(1, 0)], s.data[(1, 1)]);
                Ok(two_cos * s12 - (self.rho(energy) * (s21 * s12 - s11 * s22) + ONE))
            }
            Variant::T => {
                let (t, _) = structure_propagator(&cell, Variant::T)?;
                Ok((t.data[(0, 0)] + t.data[(1, 1)]) * 0.5 - two_cos * 0.5)
            }
            other => Err(MslError::UnsupportedVariant(format!("Kronig-Penney residual in {other} form"))),
        }
    }
}

/// Convenience wrapper over [`KronigPenney::residual`].
pub fn kronig_penney_residuals(cell: &KronigPenney, energy: f64, q: f64, variant: Variant) -> Result<Complex64> {
    cell.residual(energy, q, variant)
}

/// One row of a band diagram. Masked grid points appear with their status
/// and no branch.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandPoint {
    pub q: f64,
    pub energy: f64,
    pub residual: f64,
    pub branch: Option<usize>,
    pub status: String,
    /// Set when the branch moved by more than [`JUMP_CELLS`] grid cells
    /// since the previous `q`.
    pub jump: bool,
}

/// Branch discontinuity threshold, in energy grid cells.
pub const JUMP_CELLS: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandStructure {
    pub parameter: String,
    pub variant: Variant,
    pub points: Vec<BandPoint>,
    pub branch_count: usize,
}

impl BandStructure {
    /// Roots (no masked rows) belonging to `branch`, in `q` order.
    pub fn branch(&self, branch: usize) -> Vec<(f64, f64)> {
        self.points
            .iter()
            .filter(|p| p.branch == Some(branch))
            .map(|p| (p.q, p.energy))
            .collect()
    }

    pub fn roots_at(&self, q: f64) -> Vec<f64> {
        self.points
            .iter()
            .filter(|p| p.q == q && p.branch.is_some())
            .map(|p| p.energy)
            .collect()
    }

    /// CSV with columns `q,energy,residual,branch,status,jump`, q-major.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> std::result::Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["q", self.parameter.as_str(), "residual", "branch", "status", "jump"])?;
        for p in &self.points {
            w.write_record([
                format!("{:.15e}", p.q),
                format!("{:.15e}", p.energy),
                if p.residual.is_nan() {
                    String::new()
                } else {
                    format!("{:.6e}", p.residual)
                },
                p.branch.map(|b| b.to_string()).unwrap_or_default(),
                p.status.clone(),
                p.jump.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// For each `q`, roots of the Bloch residual over `energy_grid`, connected
/// into branches by nearest-neighbour matching between successive `q`.
/// `period_at` builds the cell at a given energy.
pub fn band_structure<B>(
    period_at: B,
    q_grid: &[f64],
    energy_grid: &[f64],
    variant: Variant,
    opts: &ScanOptions,
) -> Result<BandStructure>
where
    B: Fn(f64) -> Result<LayeredStructure> + Sync + Send,
{
    if q_grid.is_empty() {
        return Err(MslError::InvalidInput("q grid is empty".into()));
    }
    check_grid(energy_grid)?;
    // Parallelism is spent across q; each inner scan runs sequentially.
    let inner = ScanOptions {
        exec: Execution::Sequential,
        ..*opts
    };
    let scans = map_grid(q_grid, opts.exec, |&q| {
        scan_and_refine("energy", |e| periodic_dispersion(&period_at(e)?, variant, q, None), energy_grid, &inner)
    });
    let spacing = (energy_grid[energy_grid.len() - 1] - energy_grid[0]) / (energy_grid.len() - 1) as f64;

    let mut points = Vec::new();
    let mut previous: Vec<(f64, usize)> = Vec::new();
    let mut branch_count = 0;
    for (&q, scan) in q_grid.iter().zip(scans) {
        let scan = scan?;
        // Pair roots with the previous q by globally nearest distance.
        let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
        for (i, root) in scan.roots.iter().enumerate() {
            for (j, (e_prev, _)) in previous.iter().enumerate() {
                pairs.push(((root.value - e_prev).abs(), i, j));
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut assigned: Vec<Option<(usize, bool)>> = vec![None; scan.roots.len()];
        let mut used = vec![false; previous.len()];
        for (dist, i, j) in pairs {
            if assigned[i].is_none() && !used[j] {
                used[j] = true;
                assigned[i] = Some((previous[j].1, dist > JUMP_CELLS * spacing));
            }
        }
        let mut current = Vec::new();
        let mut rows: Vec<BandPoint> = Vec::new();
        for (root, slot) in scan.roots.iter().zip(assigned) {
            let (branch, jump) = slot.unwrap_or_else(|| {
                branch_count += 1;
                (branch_count - 1, false)
            });
            current.push((root.value, branch));
            rows.push(BandPoint {
                q,
                energy: root.value,
                residual: root.residual,
                branch: Some(branch),
                status: "ok".into(),
                jump,
            });
        }
        rows.extend(scan.masked.iter().map(|m| BandPoint {
            q,
            energy: m.param,
            residual: f64::NAN,
            branch: None,
            status: m.status.clone(),
            jump: false,
        }));
        rows.extend(scan.rejected_poles.iter().map(|&e| BandPoint {
            q,
            energy: e,
            residual: f64::NAN,
            branch: None,
            status: "rejected_pole".into(),
            jump: false,
        }));
        rows.sort_by(|a, b| a.energy.total_cmp(&b.energy));
        points.extend(rows);
        if !current.is_empty() {
            previous = current;
        }
    }
    Ok(BandStructure {
        parameter: "energy".into(),
        variant,
        points,
        branch_count,
    })
}
