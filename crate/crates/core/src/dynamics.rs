//! Quench dynamics and the mean chiral displacement.
//!
//! Propagation is spectral: with `H = V·diag(ε)·Vᵀ`, a state evolves as
//! `ψ(t) = V·exp(-i·2π·ε·t)·Vᵀ·ψ(0)`, with ε in kHz and t in µs (so the phase
//! carries a factor 1e-3).

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{absolute_position, chiral_operator, ChainSpec, SiteOperator};
use crate::par::{map_indexed, Execution};
use crate::spectra::{eigensystem, EigenSystem};

pub const DEFAULT_DT_US: f64 = 0.05;
pub const DEFAULT_T_AVG_US: f64 = 15.0;
/// Initial site used by every preset (`|n_4⟩`).
pub const DEFAULT_INITIAL_SITE: usize = 4;

/// Phase `2π·ε·t` with ε in kHz and t in µs.
fn phase(energy_khz: f64, t_us: f64) -> f64 {
    TAU * energy_khz * 1e-3 * t_us
}

/// Uniform time grid `0, dt, 2dt, …, t_max`.
///
/// The requested step is shrunk, if needed, so the grid ends exactly on `t_max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub t_max: f64,
    pub steps: usize,
}

impl TimeGrid {
    pub fn new(t_max: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::validation(
                "dt_us",
                format!("must be positive, got {dt}"),
            ));
        }
        if !(t_max.is_finite() && t_max >= dt) {
            return Err(Error::validation(
                "t_max_us",
                format!("must be at least dt_us ({dt}), got {t_max}"),
            ));
        }
        let steps = (t_max / dt - 1e-9).ceil() as usize;
        Ok(TimeGrid { t_max, steps })
    }

    pub fn dt(&self) -> f64 {
        self.t_max / self.steps as f64
    }

    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn time(&self, k: usize) -> f64 {
        if k == self.steps {
            self.t_max
        } else {
            k as f64 * self.dt()
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.time(k)).collect()
    }
}

/// `U(t)·ψ0` for an arbitrary initial amplitude vector.
pub fn propagate(eig: &EigenSystem, psi0: &[Complex64], t_us: f64) -> Vec<Complex64> {
    let n = eig.dim();
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for (beta, &e) in eig.eigenvalues().iter().enumerate() {
        let v = eig.eigenvector(beta);
        let overlap: Complex64 = v.iter().zip(psi0).map(|(a, p)| p * a).sum();
        let amp = overlap * Complex64::from_polar(1.0, -phase(e, t_us));
        for (o, a) in out.iter_mut().zip(v) {
            *o += amp * a;
        }
    }
    out
}

/// Site populations at time `t` for a state starting on 0-based `site`.
fn populations_from_site(eig: &EigenSystem, site: usize, t_us: f64) -> Vec<f64> {
    let n = eig.dim();
    let mut amp = vec![Complex64::new(0.0, 0.0); n];
    for (beta, &e) in eig.eigenvalues().iter().enumerate() {
        let v = eig.eigenvector(beta);
        let c = v[site] * Complex64::from_polar(1.0, -phase(e, t_us));
        for (a, vi) in amp.iter_mut().zip(v) {
            *a += c * vi;
        }
    }
    amp.iter().map(|a| a.norm_sqr()).collect()
}

fn check_site(site: usize, n_sites: usize, field: &str) -> Result<()> {
    if site < 1 || site > n_sites {
        return Err(Error::validation(
            field,
            format!("must lie in 1..={n_sites}, got {site}"),
        ));
    }
    Ok(())
}

/// Populations `P_i(t)` after a quench from a single site.
#[derive(Debug, Clone, PartialEq)]
pub struct QuenchTrajectory {
    pub initial_site: usize,
    pub times: Vec<f64>,
    pub populations: Vec<Vec<f64>>,
}

impl QuenchTrajectory {
    pub fn n_sites(&self) -> usize {
        self.populations.first().map_or(0, Vec::len)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("t_us");
        for i in 1..=self.n_sites() {
            s.push_str(&format!(",p{i}"));
        }
        s.push('\n');
        for (t, row) in self.times.iter().zip(&self.populations) {
            s.push_str(&t.to_string());
            for p in row {
                s.push_str(&format!(",{p}"));
            }
            s.push('\n');
        }
        s
    }
}

pub fn evolve(
    spec: &ChainSpec,
    initial_site: usize,
    t_max: f64,
    dt: f64,
) -> Result<QuenchTrajectory> {
    evolve_eig(
        &eigensystem(spec),
        initial_site,
        &TimeGrid::new(t_max, dt)?,
        Execution::default(),
    )
}

/// Quench evolution from a precomputed eigensystem; time points are evaluated independently.
pub fn evolve_eig(
    eig: &EigenSystem,
    initial_site: usize,
    grid: &TimeGrid,
    exec: Execution,
) -> Result<QuenchTrajectory> {
    check_site(initial_site, eig.dim(), "initial_site")?;
    let times = grid.times();
    let populations = map_indexed(times.len(), exec, |k| {
        if k == 0 {
            let mut p = vec![0.0; eig.dim()];
            p[initial_site - 1] = 1.0;
            p
        } else {
            populations_from_site(eig, initial_site - 1, times[k])
        }
    });
    Ok(QuenchTrajectory {
        initial_site,
        times,
        populations,
    })
}

/// Choice of cell-position origin in the chiral displacement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Convention {
    /// Positions measured from the cell holding the initial site, so `C(0) = 0`.
    #[default]
    Relative,
    /// Absolute cell labels `m = 1..N`, origin 0.
    Absolute,
}

/// `2·Γ·(m̂ - m₀)` with `m₀` fixed by the convention and the initial site.
pub fn mean_chiral_operator(
    n_cells: usize,
    initial_site: usize,
    convention: Convention,
) -> SiteOperator {
    let origin = origin_cell(initial_site, convention);
    chiral_operator(n_cells)
        .product(&absolute_position(n_cells, origin as f64))
        .scaled(2.0)
}

fn origin_cell(initial_site: usize, convention: Convention) -> usize {
    match convention {
        Convention::Relative => ChainSpec::cell_of_site(initial_site),
        Convention::Absolute => 0,
    }
}

/// `C(t)` and its running time average.
#[derive(Debug, Clone, PartialEq)]
pub struct ChiralSeries {
    pub times: Vec<f64>,
    pub c_of_t: Vec<f64>,
    pub c_bar: Vec<f64>,
    pub origin_cell: usize,
    pub convention: Convention,
}

impl ChiralSeries {
    pub fn final_average(&self) -> f64 {
        *self.c_bar.last().expect("series is never empty")
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("t_us,c,c_bar\n");
        for ((t, c), cb) in self.times.iter().zip(&self.c_of_t).zip(&self.c_bar) {
            s.push_str(&format!("{t},{c},{cb}\n"));
        }
        s
    }
}

/// Running mean `(1/t)·∫₀ᵗ y` by the trapezoidal rule; the first entry is `y[0]`.
pub fn cumulative_average(times: &[f64], values: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut integral = 0.0;
    for k in 0..values.len() {
        if k == 0 {
            out.push(values[0]);
            continue;
        }
        integral += 0.5 * (values[k] + values[k - 1]) * (times[k] - times[k - 1]);
        out.push(integral / (times[k] - times[0]));
    }
    out
}

pub fn chiral_displacement(traj: &QuenchTrajectory, convention: Convention) -> ChiralSeries {
    let op = mean_chiral_operator(traj.n_sites() / 2, traj.initial_site, convention);
    let c_of_t: Vec<f64> = traj.populations.iter().map(|p| op.expectation(p)).collect();
    let c_bar = cumulative_average(&traj.times, &c_of_t);
    ChiralSeries {
        times: traj.times.clone(),
        c_of_t,
        c_bar,
        origin_cell: origin_cell(traj.initial_site, convention),
        convention,
    }
}

/// Infinite-time average of `observable` after a quench from `initial_site`.
///
/// Computes `Σ_g ⟨ψ0|P_g·O·P_g|ψ0⟩` over degenerate eigenvalue groups `g`, so
/// coherences inside a degenerate group survive the average.
pub fn diagonal_ensemble_average(
    eig: &EigenSystem,
    initial_site: usize,
    observable: &SiteOperator,
) -> Result<f64> {
    check_site(initial_site, eig.dim(), "initial_site")?;
    if observable.dim() != eig.dim() {
        return Err(Error::validation(
            "observable",
            format!(
                "dimension {} does not match the chain ({})",
                observable.dim(),
                eig.dim()
            ),
        ));
    }
    let n = eig.dim();
    let site = initial_site - 1;
    let mut total = 0.0;
    for group in eig.degenerate_groups() {
        let mut projected = vec![0.0; n];
        for beta in group {
            let v = eig.eigenvector(beta);
            let c = v[site];
            for (p, vi) in projected.iter_mut().zip(v) {
                *p += c * vi;
            }
        }
        total += observable
            .diagonal()
            .iter()
            .zip(&projected)
            .map(|(o, p)| o * p * p)
            .sum::<f64>();
    }
    Ok(total)
}

/// `C̄(t_avg)` under the relative convention on the default time step.
pub fn winding_estimate(spec: &ChainSpec, initial_site: usize, t_avg: f64) -> Result<f64> {
    if t_avg <= spec.tau_weak_us() || t_avg <= spec.tau_strong_us() {
        log::warn!(
            "averaging time {t_avg} µs does not exceed the characteristic times (τ_w = {} µs, τ_s = {} µs)",
            spec.tau_weak_us(),
            spec.tau_strong_us()
        );
    }
    time_averaged_winding(&eigensystem(spec), initial_site, t_avg)
}

fn time_averaged_winding(eig: &EigenSystem, initial_site: usize, t_avg: f64) -> Result<f64> {
    let grid = TimeGrid::new(t_avg, DEFAULT_DT_US.min(t_avg))?;
    let traj = evolve_eig(eig, initial_site, &grid, Execution::Sequential)?;
    Ok(chiral_displacement(&traj, Convention::Relative).final_average())
}

/// One point of a winding sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WindingPoint {
    pub j1_khz: f64,
    pub j2_khz: f64,
    pub c_bar: f64,
    pub diagonal_ensemble: f64,
    pub ideal: u8,
}

/// Evaluates the finite-time and infinite-time winding indicators for each `(J1, J2)` pair.
pub fn winding_sweep(
    n_cells: usize,
    rates: &[(f64, f64)],
    initial_site: usize,
    t_avg: f64,
    exec: Execution,
) -> Result<Vec<WindingPoint>> {
    let op = mean_chiral_operator(n_cells, initial_site, Convention::Relative);
    let points: Vec<WindingPoint> = map_indexed(rates.len(), exec, |i| {
        let (j1, j2) = rates[i];
        let spec = ChainSpec::new(n_cells, j1, j2)?;
        let eig = eigensystem(&spec);
        Ok(WindingPoint {
            j1_khz: j1,
            j2_khz: j2,
            c_bar: time_averaged_winding(&eig, initial_site, t_avg)?,
            diagonal_ensemble: diagonal_ensemble_average(&eig, initial_site, &op)?,
            ideal: ideal_winding(j1, j2)?,
        })
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let short = rates
        .iter()
        .filter(|&&(j1, j2)| t_avg <= 1e3 / j1.min(j2).max(f64::MIN_POSITIVE))
        .count();
    if short > 0 {
        log::warn!("averaging time {t_avg} µs does not exceed the slower tunnelling time at {short} of {} sweep points", rates.len());
    }
    Ok(points)
}

/// Winding number of the infinite chain: 1 if `j1 < j2`, else 0 (including `j1 == j2`).
pub fn ideal_winding(j1: f64, j2: f64) -> Result<u8> {
    if j1 < 0.0 || j2 < 0.0 || !j1.is_finite() || !j2.is_finite() {
        return Err(Error::validation(
            "j_khz",
            "rates must be finite and non-negative",
        ));
    }
    if j1 == 0.0 && j2 == 0.0 {
        return Err(Error::validation(
            "j_khz",
            "winding is undefined when both rates vanish",
        ));
    }
    Ok(u8::from(j1 < j2))
}
