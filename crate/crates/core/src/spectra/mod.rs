//! Exact diagonalization, excitation spectra and infinite-lattice bands.

mod jacobi;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{build_hamiltonian, ChainSpec, HamiltonianMatrix};
use crate::par::{map_indexed, Execution};

/// Eigenvalues closer than this (kHz) are treated as one degenerate group.
pub const DEGENERACY_TOL_KHZ: f64 = 1e-6;

/// Components below this magnitude are skipped when fixing eigenvector signs.
const SIGN_THRESHOLD: f64 = 1e-8;

/// Ascending eigenvalues (kHz) with orthonormal eigenvectors.
///
/// Eigenvector `β` is stored contiguously; its first component with magnitude
/// above `1e-8` is positive.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSystem {
    eigenvalues: Vec<f64>,
    vectors: Vec<f64>,
}

impl EigenSystem {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvector(&self, beta: usize) -> &[f64] {
        let n = self.dim();
        &self.vectors[beta * n..(beta + 1) * n]
    }

    /// `⟨n_i|β⟩` for 0-based site `i`.
    pub fn component(&self, site: usize, beta: usize) -> f64 {
        self.vectors[beta * self.dim() + site]
    }

    /// Index ranges of eigenvalues that are degenerate within [`DEGENERACY_TOL_KHZ`],
    /// chaining through consecutive near-equal values.
    pub fn degenerate_groups(&self) -> Vec<std::ops::Range<usize>> {
        degenerate_groups(&self.eigenvalues)
    }

    /// `V · diag(ε) · Vᵀ`, row-major.
    pub fn reconstruct(&self) -> Vec<f64> {
        let n = self.dim();
        let mut out = vec![0.0; n * n];
        for (beta, &e) in self.eigenvalues.iter().enumerate() {
            let v = self.eigenvector(beta);
            for i in 0..n {
                let vi = e * v[i];
                for j in 0..n {
                    out[i * n + j] += vi * v[j];
                }
            }
        }
        out
    }
}

fn degenerate_groups(values: &[f64]) -> Vec<std::ops::Range<usize>> {
    let mut groups = Vec::new();
    let mut start = 0;
    for k in 1..=values.len() {
        if k == values.len() || values[k] - values[k - 1] >= DEGENERACY_TOL_KHZ {
            groups.push(start..k);
            start = k;
        }
    }
    groups
}

/// Diagonalizes `h` by cyclic Jacobi rotations.
pub fn eigendecompose(h: &HamiltonianMatrix) -> Result<EigenSystem> {
    if h.as_row_major().iter().any(|x| !x.is_finite()) {
        return Err(Error::validation(
            "hamiltonian",
            "contains non-finite entries",
        ));
    }
    let n = h.dim();
    let (diag, rot) = jacobi::diagonalize(n, h.as_row_major().to_vec());

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| diag[a].total_cmp(&diag[b]).then(a.cmp(&b)));

    let eigenvalues: Vec<f64> = order.iter().map(|&k| diag[k]).collect();
    let mut vectors = Vec::with_capacity(n * n);
    for &k in &order {
        vectors.extend((0..n).map(|i| rot[i * n + k]));
    }

    for group in degenerate_groups(&eigenvalues) {
        if group.len() > 1 {
            gram_schmidt(n, &mut vectors, group);
        }
    }
    for beta in 0..n {
        let v = &mut vectors[beta * n..(beta + 1) * n];
        if let Some(first) = v.iter().find(|x| x.abs() > SIGN_THRESHOLD) {
            if *first < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
        }
    }
    Ok(EigenSystem {
        eigenvalues,
        vectors,
    })
}

/// Modified Gram-Schmidt over the vectors in `group`, in index order.
fn gram_schmidt(n: usize, vectors: &mut [f64], group: std::ops::Range<usize>) {
    for b in group.clone() {
        for a in group.start..b {
            let dot: f64 = (0..n)
                .map(|i| vectors[a * n + i] * vectors[b * n + i])
                .sum();
            for i in 0..n {
                vectors[b * n + i] -= dot * vectors[a * n + i];
            }
        }
        let norm = vectors[b * n..(b + 1) * n]
            .iter()
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt();
        vectors[b * n..(b + 1) * n]
            .iter_mut()
            .for_each(|x| *x /= norm);
    }
}

/// Convenience: build and diagonalize the chain Hamiltonian.
pub fn eigensystem(spec: &ChainSpec) -> EigenSystem {
    eigendecompose(&build_hamiltonian(spec)).expect("validated specs have finite entries")
}

/// Spacing `ε_{N+1} - ε_N` of the two middle eigenvalues, kHz.
pub fn innermost_gap(spec: &ChainSpec) -> f64 {
    let eig = eigensystem(spec);
    let n = spec.n_cells();
    eig.eigenvalues()[n] - eig.eigenvalues()[n - 1]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StickLine {
    pub energy_khz: f64,
    pub weight: f64,
}

/// Unbroadened excitation spectrum seen from one bare site.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StickSpectrum {
    pub probe_site: usize,
    pub lines: Vec<StickLine>,
}

impl StickSpectrum {
    pub fn total_weight(&self) -> f64 {
        self.lines.iter().map(|l| l.weight).sum()
    }
}

/// Weights `|⟨β|n_probe⟩|²` for every eigenstate. `probe_site` is 1-based.
pub fn stick_spectrum(eig: &EigenSystem, probe_site: usize) -> Result<StickSpectrum> {
    if probe_site < 1 || probe_site > eig.dim() {
        return Err(Error::validation(
            "probe_site",
            format!("must lie in 1..={}, got {probe_site}", eig.dim()),
        ));
    }
    let lines = eig
        .eigenvalues()
        .iter()
        .enumerate()
        .map(|(beta, &e)| {
            let c = eig.component(probe_site - 1, beta);
            StickLine {
                energy_khz: e,
                weight: c * c,
            }
        })
        .collect();
    Ok(StickSpectrum { probe_site, lines })
}

/// Unit-peak-height Lorentzian with full width at half maximum `fwhm`.
pub fn lorentzian(x: f64, fwhm: f64) -> f64 {
    let u = 2.0 * x / fwhm;
    1.0 / (1.0 + u * u)
}

/// Uniform detuning grid `start + k·step`, `k = 0..len`, in kHz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetuningGrid {
    pub start: f64,
    pub step: f64,
    pub len: usize,
}

impl DetuningGrid {
    pub fn new(start: f64, step: f64, len: usize) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::validation(
                "grid_step_khz",
                format!("must be positive, got {step}"),
            ));
        }
        if len < 2 || !start.is_finite() {
            return Err(Error::validation(
                "grid",
                "needs a finite start and at least two points",
            ));
        }
        Ok(DetuningGrid { start, step, len })
    }

    /// `step`-spaced grid covering `[ε_min - 3·fwhm, ε_max + 3·fwhm]` on multiples of `step`.
    pub fn covering(sticks: &StickSpectrum, fwhm: f64, step: f64) -> Result<Self> {
        let (lo, hi) = sticks
            .lines
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), l| {
                (lo.min(l.energy_khz), hi.max(l.energy_khz))
            });
        let start = ((lo - 3.0 * fwhm) / step).floor() * step;
        let stop = ((hi + 3.0 * fwhm) / step).ceil() * step;
        let len = ((stop - start) / step).round() as usize + 1;
        Self::new(start, step, len)
    }

    pub fn point(&self, k: usize) -> f64 {
        self.start + k as f64 * self.step
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.len).map(|k| self.point(k)).collect()
    }

    pub fn span(&self) -> f64 {
        self.step * (self.len - 1) as f64
    }
}

/// A broadened spectrum on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumTrace {
    pub detunings: Vec<f64>,
    pub intensity: Vec<f64>,
    pub fwhm: f64,
}

impl SpectrumTrace {
    pub fn step(&self) -> f64 {
        self.detunings[1] - self.detunings[0]
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("detuning_khz,intensity\n");
        for (d, i) in self.detunings.iter().zip(&self.intensity) {
            s.push_str(&format!("{d},{i}\n"));
        }
        s
    }
}

/// Sum of unit-height Lorentzians of width `fwhm` weighted by the stick weights.
pub fn broaden(sticks: &StickSpectrum, fwhm: f64, grid: &DetuningGrid) -> Result<SpectrumTrace> {
    broaden_with(sticks, fwhm, grid, Execution::default())
}

pub fn broaden_with(
    sticks: &StickSpectrum,
    fwhm: f64,
    grid: &DetuningGrid,
    exec: Execution,
) -> Result<SpectrumTrace> {
    if !(fwhm > 0.0 && fwhm.is_finite()) {
        return Err(Error::validation(
            "fwhm_khz",
            format!("must be positive, got {fwhm}"),
        ));
    }
    let detunings = grid.points();
    let intensity = map_indexed(grid.len, exec, |k| {
        let d = detunings[k];
        sticks
            .lines
            .iter()
            .map(|l| l.weight * lorentzian(d - l.energy_khz, fwhm))
            .sum()
    });
    Ok(SpectrumTrace {
        detunings,
        intensity,
        fwhm,
    })
}

/// Upper and lower bands of the infinite chain over `k ∈ [0, π]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandStructure {
    pub k_grid: Vec<f64>,
    pub e_plus: Vec<f64>,
    pub e_minus: Vec<f64>,
}

impl BandStructure {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("k,e_plus_khz,e_minus_khz\n");
        for ((k, p), m) in self.k_grid.iter().zip(&self.e_plus).zip(&self.e_minus) {
            s.push_str(&format!("{k},{p},{m}\n"));
        }
        s
    }
}

/// `e_±(k) = ±√(J1² + J2² + 2·J1·J2·cos k)`.
///
/// Evaluated as `√((J1-J2)² + 4·J1·J2·cos²(k/2))`, which stays accurate near
/// the gap-closing point.
pub fn band_energy(j1: f64, j2: f64, k: f64) -> f64 {
    let d = j1 - j2;
    let c = (0.5 * k).cos();
    (d * d + 4.0 * j1 * j2 * c * c).max(0.0).sqrt()
}

pub fn band_structure(j1: f64, j2: f64, n_k: usize) -> Result<BandStructure> {
    if n_k < 2 {
        return Err(Error::validation(
            "n_k",
            format!("must be at least 2, got {n_k}"),
        ));
    }
    let k_grid: Vec<f64> = (0..n_k)
        .map(|i| std::f64::consts::PI * i as f64 / (n_k - 1) as f64)
        .collect();
    let e_plus: Vec<f64> = k_grid.iter().map(|&k| band_energy(j1, j2, k)).collect();
    let e_minus = e_plus.iter().map(|e| -e).collect();
    Ok(BandStructure {
        k_grid,
        e_plus,
        e_minus,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::ChainSpec;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    /// Open uniform chain: ε_k = -2J cos(kπ/(L+1)), ψ_k(n) ∝ sin(nkπ/(L+1)).
    fn uniform_eigenvalues(j: f64, sites: usize) -> Vec<f64> {
        let mut e: Vec<f64> = (1..=sites)
            .map(|k| -2.0 * j * (k as f64 * PI / (sites + 1) as f64).cos())
            .collect();
        e.sort_by(f64::total_cmp);
        e
    }

    fn check_invariants(h: &HamiltonianMatrix, eig: &EigenSystem) {
        let n = h.dim();
        for a in 0..n {
            for b in 0..n {
                let dot: f64 = eig
                    .eigenvector(a)
                    .iter()
                    .zip(eig.eigenvector(b))
                    .map(|(x, y)| x * y)
                    .sum();
                let want = if a == b { 1.0 } else { 0.0 };
                assert!(
                    (dot - want).abs() < 1e-10,
                    "orthonormality ({a},{b}) = {dot}"
                );
            }
        }
        let scale = h.max_abs().max(f64::MIN_POSITIVE);
        for (r, x) in eig.reconstruct().iter().zip(h.as_row_major()) {
            assert!((r - x).abs() < 1e-8 * scale);
        }
        assert!(eig.eigenvalues().windows(2).all(|w| w[0] <= w[1]));
        for beta in 0..n {
            let first = eig
                .eigenvector(beta)
                .iter()
                .find(|x| x.abs() > 1e-8)
                .unwrap();
            assert!(*first > 0.0);
        }
    }

    #[test]
    fn uniform_chain_matches_analytic_spectrum() {
        let spec = ChainSpec::new(3, 400.0, 400.0).unwrap();
        let eig = eigensystem(&spec);
        let want = uniform_eigenvalues(400.0, 6);
        for (got, want) in eig.eigenvalues().iter().zip(&want) {
            assert_abs_diff_eq!(*got, *want, epsilon = 1e-9);
        }
        let rounded: Vec<f64> = eig
            .eigenvalues()
            .iter()
            .map(|e| (e * 100.0).round() / 100.0)
            .collect();
        assert_eq!(
            rounded,
            vec![-720.78, -498.79, -178.02, 178.02, 498.79, 720.78]
        );
        check_invariants(&build_hamiltonian(&spec), &eig);
    }

    #[test]
    fn dimer_spectrum() {
        let eig = eigensystem(&ChainSpec::new(1, 160.0, 0.0).unwrap());
        assert_abs_diff_eq!(eig.eigenvalues()[0], -160.0, epsilon = 1e-12);
        assert_abs_diff_eq!(eig.eigenvalues()[1], 160.0, epsilon = 1e-12);
    }

    #[test]
    fn non_finite_entries_are_rejected() {
        let h = HamiltonianMatrix::from_row_major(2, vec![f64::NAN, 0.0, 0.0, 1.0]).unwrap();
        assert!(eigendecompose(&h).is_err());
    }

    #[test]
    fn zero_matrix_keeps_site_basis() {
        let eig = eigensystem(&ChainSpec::new(3, 0.0, 0.0).unwrap());
        assert!(eig.eigenvalues().iter().all(|&e| e == 0.0));
        assert_eq!(eig.degenerate_groups(), vec![0..6]);
        for beta in 0..6 {
            assert_eq!(eig.component(beta, beta), 1.0);
        }
    }

    #[test]
    fn degenerate_block_is_orthonormalized() {
        // Two decoupled identical dimers: every level is doubly degenerate.
        let spec =
            ChainSpec::with_details(2, 1.0, 1.0, Some(vec![300.0, 0.0, 300.0]), vec![0.0; 4])
                .unwrap();
        let h = build_hamiltonian(&spec);
        let eig = eigendecompose(&h).unwrap();
        assert_eq!(eig.degenerate_groups().len(), 2);
        check_invariants(&h, &eig);
    }

    #[test]
    fn innermost_gap_values() {
        // Smallest root of the characteristic polynomial in x = λ²; see the acceptance suite for the independent root-finder.
        let gap = innermost_gap(&ChainSpec::new(3, 160.0, 800.0).unwrap());
        assert_abs_diff_eq!(gap, 12.290234555790342, epsilon = 1e-9);
        assert_eq!(innermost_gap(&ChainSpec::new(3, 0.0, 800.0).unwrap()), 0.0);
        let uniform = innermost_gap(&ChainSpec::new(3, 400.0, 400.0).unwrap());
        assert_abs_diff_eq!(
            uniform,
            2.0 * 800.0 * (3.0 * PI / 7.0).cos(),
            epsilon = 1e-9
        );
    }

    #[test]
    fn stick_weights() {
        let eig = eigensystem(&ChainSpec::new(1, 160.0, 0.0).unwrap());
        let s = stick_spectrum(&eig, 1).unwrap();
        assert_abs_diff_eq!(s.lines[0].energy_khz, -160.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.lines[0].weight, 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(s.lines[1].weight, 0.5, epsilon = 1e-14);

        let zero = eigensystem(&ChainSpec::new(3, 0.0, 0.0).unwrap());
        let s = stick_spectrum(&zero, 2).unwrap();
        let nonzero: Vec<_> = s.lines.iter().filter(|l| l.weight != 0.0).collect();
        assert_eq!(nonzero.len(), 1);
        assert_eq!(nonzero[0].weight, 1.0);
        assert_eq!(nonzero[0].energy_khz, 0.0);

        assert!(stick_spectrum(&zero, 0).is_err());
        assert!(stick_spectrum(&zero, 7).is_err());
    }

    #[test]
    fn uniform_chain_site_two_weights_match_sine_modes() {
        let eig = eigensystem(&ChainSpec::new(3, 400.0, 400.0).unwrap());
        let s = stick_spectrum(&eig, 2).unwrap();
        // Mode k has energy -2J cos(kπ/7) and amplitude √(2/7)·sin(n·kπ/7) on site n.
        for k in 1..=6usize {
            let energy = -800.0 * (k as f64 * PI / 7.0).cos();
            let amp = (2.0f64 / 7.0).sqrt() * (2.0 * k as f64 * PI / 7.0).sin();
            let line = s
                .lines
                .iter()
                .find(|l| (l.energy_khz - energy).abs() < 1e-6)
                .unwrap();
            assert_abs_diff_eq!(line.weight, amp * amp, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(s.total_weight(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn lorentzian_half_width() {
        let sticks = StickSpectrum {
            probe_site: 1,
            lines: vec![StickLine {
                energy_khz: 0.0,
                weight: 1.0,
            }],
        };
        let grid = DetuningGrid::new(-60.0, 30.0, 5).unwrap();
        let t = broaden(&sticks, 60.0, &grid).unwrap();
        assert_eq!(t.intensity[2], 1.0);
        assert_eq!(t.intensity[3], 0.5);
        assert_eq!(t.intensity[1], 0.5);
        assert!(broaden(&sticks, 0.0, &grid).is_err());
        assert!(broaden(&sticks, -1.0, &grid).is_err());
    }

    #[test]
    fn narrow_dimer_peaks_are_equal() {
        let eig = eigensystem(&ChainSpec::new(1, 160.0, 0.0).unwrap());
        let sticks = stick_spectrum(&eig, 1).unwrap();
        let grid = DetuningGrid::new(-200.0, 0.5, 801).unwrap();
        let t = broaden(&sticks, 1e-3, &grid).unwrap();
        let lo = t.intensity[80];
        let hi = t.intensity[720];
        assert_eq!(t.detunings[80], -160.0);
        assert_abs_diff_eq!(lo, 0.5, epsilon = 1e-11);
        assert_abs_diff_eq!(hi, lo, epsilon = 1e-15);
        assert!(t.intensity[400] < 1e-9);
    }

    #[test]
    fn uniform_chain_trace_resolves_six_peaks() {
        let eig = eigensystem(&ChainSpec::new(3, 400.0, 400.0).unwrap());
        let sticks = stick_spectrum(&eig, 2).unwrap();
        let grid = DetuningGrid::covering(&sticks, 65.0, 1.0).unwrap();
        let t = broaden(&sticks, 65.0, &grid).unwrap();
        let maxima: Vec<f64> = (1..t.intensity.len() - 1)
            .filter(|&i| {
                t.intensity[i] > t.intensity[i - 1] && t.intensity[i] >= t.intensity[i + 1]
            })
            .map(|i| t.detunings[i])
            .collect();
        assert_eq!(maxima.len(), 6);
        for (m, e) in maxima.iter().zip(eig.eigenvalues()) {
            assert!((m - e).abs() <= 1.0, "peak {m} vs eigenvalue {e}");
        }
    }

    #[test]
    fn covering_grid_is_padded() {
        let eig = eigensystem(&ChainSpec::new(3, 400.0, 400.0).unwrap());
        let sticks = stick_spectrum(&eig, 2).unwrap();
        let g = DetuningGrid::covering(&sticks, 65.0, 1.0).unwrap();
        assert_eq!(g.start, -916.0);
        assert_eq!(g.point(g.len - 1), 916.0);
    }

    #[test]
    fn band_edges() {
        let b = band_structure(160.0, 800.0, 181).unwrap();
        assert_eq!(b.e_plus[0], 960.0);
        assert_eq!(b.e_plus[180], 640.0);
        for (p, m) in b.e_plus.iter().zip(&b.e_minus) {
            assert_eq!(*p, -*m);
            assert!((640.0..=960.0).contains(p));
        }
        let crit = band_structure(400.0, 400.0, 3).unwrap();
        assert!(crit.e_plus[2] < 1e-9);
        assert!(band_structure(1.0, 1.0, 1).is_err());
    }

    #[test]
    fn band_energy_matches_direct_formula() {
        for &(j1, j2) in &[(160.0, 800.0), (400.0, 400.0), (800.0, 160.0)] {
            for i in 0..50 {
                let k = PI * i as f64 / 49.0;
                let direct = (j1 * j1 + j2 * j2 + 2.0 * j1 * j2 * k.cos())
                    .max(0.0)
                    .sqrt();
                assert!((band_energy(j1, j2, k) - direct).abs() < 1e-6);
            }
        }
    }

    fn arb_clean_spec() -> impl Strategy<Value = ChainSpec> {
        (1usize..9).prop_flat_map(|n| {
            proptest::collection::vec(0.0f64..1000.0, 2 * n - 1).prop_map(move |b| {
                ChainSpec::with_details(n, 1.0, 1.0, Some(b), vec![0.0; 2 * n]).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn eigensystem_invariants(spec in arb_clean_spec()) {
            let h = build_hamiltonian(&spec);
            let eig = eigendecompose(&h).unwrap();
            check_invariants(&h, &eig);
            let e = eig.eigenvalues();
            let n = e.len();
            for k in 0..n {
                prop_assert!((e[k] + e[n - 1 - k]).abs() < 1e-9);
            }
            let bound = spec.bonds().iter().fold(0.0f64, |m, b| m.max(b.abs())) * 2.0;
            prop_assert!(e.iter().all(|x| x.abs() <= bound + 1e-9));
        }

        #[test]
        fn rediagonalizing_reconstruction_is_stable(spec in arb_clean_spec()) {
            let eig = eigensystem(&spec);
            let h2 = HamiltonianMatrix::from_row_major(eig.dim(), symmetrized(eig.dim(), eig.reconstruct())).unwrap();
            let eig2 = eigendecompose(&h2).unwrap();
            for (a, b) in eig.eigenvalues().iter().zip(eig2.eigenvalues()) {
                prop_assert!((a - b).abs() < 1e-8);
            }
        }

        #[test]
        fn stick_weights_are_complete(spec in arb_clean_spec(), probe in 0usize..16) {
            let eig = eigensystem(&spec);
            let probe = probe % spec.n_sites() + 1;
            let s = stick_spectrum(&eig, probe).unwrap();
            prop_assert!((s.total_weight() - 1.0).abs() < 1e-10);
            prop_assert!(s.lines.iter().all(|l| (0.0..=1.0 + 1e-12).contains(&l.weight)));
        }
    }

    fn symmetrized(n: usize, mut a: Vec<f64>) -> Vec<f64> {
        for i in 0..n {
            for j in 0..i {
                let m = 0.5 * (a[i * n + j] + a[j * n + i]);
                a[i * n + j] = m;
                a[j * n + i] = m;
            }
        }
        a
    }
}
