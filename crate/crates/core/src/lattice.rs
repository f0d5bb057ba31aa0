//! Chain model and the operators built on its single-particle site basis.
//!
//! Sites are numbered `1..=2N` in every public interface; site `2m-1` is the
//! A site and site `2m` the B site of unit cell `m`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Full description of a finite SSH chain.
///
/// Rates and on-site energies are frequencies in kHz. Without overrides, bond
/// `n` (joining sites `n` and `n+1`) carries `j_intra` for odd `n` and
/// `j_inter` for even `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ChainSpecRepr", into = "ChainSpecRepr")]
pub struct ChainSpec {
    n_cells: usize,
    j_intra: f64,
    j_inter: f64,
    bond_overrides: Option<Vec<f64>>,
    onsite: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChainSpecRepr {
    n_cells: usize,
    j_intra_khz: f64,
    j_inter_khz: f64,
    #[serde(default)]
    bond_overrides_khz: Option<Vec<f64>>,
    #[serde(default)]
    onsite_khz: Option<Vec<f64>>,
}

impl TryFrom<ChainSpecRepr> for ChainSpec {
    type Error = Error;

    fn try_from(r: ChainSpecRepr) -> Result<Self> {
        let onsite = r.onsite_khz.unwrap_or_else(|| vec![0.0; 2 * r.n_cells]);
        ChainSpec::with_details(
            r.n_cells,
            r.j_intra_khz,
            r.j_inter_khz,
            r.bond_overrides_khz,
            onsite,
        )
    }
}

impl From<ChainSpec> for ChainSpecRepr {
    fn from(s: ChainSpec) -> Self {
        ChainSpecRepr {
            n_cells: s.n_cells,
            j_intra_khz: s.j_intra,
            j_inter_khz: s.j_inter,
            bond_overrides_khz: s.bond_overrides,
            onsite_khz: Some(s.onsite),
        }
    }
}

impl ChainSpec {
    /// Clean chain with alternating rates and zero on-site energies.
    pub fn new(n_cells: usize, j_intra: f64, j_inter: f64) -> Result<Self> {
        Self::with_details(n_cells, j_intra, j_inter, None, vec![0.0; 2 * n_cells])
    }

    pub fn with_details(
        n_cells: usize,
        j_intra: f64,
        j_inter: f64,
        bond_overrides: Option<Vec<f64>>,
        onsite: Vec<f64>,
    ) -> Result<Self> {
        let spec = Self::unchecked(n_cells, j_intra, j_inter, bond_overrides, onsite);
        let problems = spec.problems();
        match problems.into_iter().next() {
            None => Ok(spec),
            Some((field, reason)) => Err(Error::validation(field, reason)),
        }
    }

    pub(crate) fn unchecked(
        n_cells: usize,
        j_intra: f64,
        j_inter: f64,
        bond_overrides: Option<Vec<f64>>,
        onsite: Vec<f64>,
    ) -> Self {
        ChainSpec {
            n_cells,
            j_intra,
            j_inter,
            bond_overrides,
            onsite,
        }
    }

    /// Every invariant violation as `(field, reason)`, using the JSON key names.
    pub(crate) fn problems(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        if self.n_cells == 0 {
            out.push(("n_cells", "must be at least 1".to_string()));
        }
        for (field, j) in [("j_intra_khz", self.j_intra), ("j_inter_khz", self.j_inter)] {
            if !j.is_finite() || j < 0.0 {
                out.push((field, format!("must be finite and non-negative, got {j}")));
            }
        }
        if let Some(bonds) = &self.bond_overrides {
            let want = (2 * self.n_cells).saturating_sub(1);
            if bonds.len() != want {
                out.push((
                    "bond_overrides_khz",
                    format!("expected {want} entries, got {}", bonds.len()),
                ));
            }
            if bonds.iter().any(|b| !b.is_finite()) {
                out.push(("bond_overrides_khz", "entries must be finite".to_string()));
            }
        }
        if self.onsite.len() != 2 * self.n_cells {
            out.push((
                "onsite_khz",
                format!(
                    "expected {} entries, got {}",
                    2 * self.n_cells,
                    self.onsite.len()
                ),
            ));
        }
        if self.onsite.iter().any(|u| !u.is_finite()) {
            out.push(("onsite_khz", "entries must be finite".to_string()));
        }
        out
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn n_sites(&self) -> usize {
        2 * self.n_cells
    }

    pub fn j_intra(&self) -> f64 {
        self.j_intra
    }

    pub fn j_inter(&self) -> f64 {
        self.j_inter
    }

    pub fn bond_overrides(&self) -> Option<&[f64]> {
        self.bond_overrides.as_deref()
    }

    pub fn onsite(&self) -> &[f64] {
        &self.onsite
    }

    /// Rate of bond `n` (1-based, joining sites `n` and `n+1`).
    pub fn bond(&self, n: usize) -> f64 {
        match &self.bond_overrides {
            Some(b) => b[n - 1],
            None if n % 2 == 1 => self.j_intra,
            None => self.j_inter,
        }
    }

    /// All `2N-1` bond rates in order.
    pub fn bonds(&self) -> Vec<f64> {
        (1..self.n_sites()).map(|n| self.bond(n)).collect()
    }

    /// The same chain with all bond rates replaced.
    pub fn with_bonds(&self, bonds: Vec<f64>) -> Result<Self> {
        Self::with_details(
            self.n_cells,
            self.j_intra,
            self.j_inter,
            Some(bonds),
            self.onsite.clone(),
        )
    }

    pub fn with_onsite(&self, onsite: Vec<f64>) -> Result<Self> {
        Self::with_details(
            self.n_cells,
            self.j_intra,
            self.j_inter,
            self.bond_overrides.clone(),
            onsite,
        )
    }

    pub fn j_weak(&self) -> f64 {
        self.j_intra.min(self.j_inter)
    }

    pub fn j_strong(&self) -> f64 {
        self.j_intra.max(self.j_inter)
    }

    /// τ_w = 1/J_weak in µs (infinite when the weak rate vanishes).
    pub fn tau_weak_us(&self) -> f64 {
        1e3 / self.j_weak()
    }

    /// τ_s = 1/J_strong in µs.
    pub fn tau_strong_us(&self) -> f64 {
        1e3 / self.j_strong()
    }

    /// Unit cell (1-based) containing 1-based `site`.
    pub fn cell_of_site(site: usize) -> usize {
        site.div_ceil(2)
    }
}

/// Dense real symmetric tridiagonal Hamiltonian, row-major, in kHz.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianMatrix {
    dim: usize,
    entries: Vec<f64>,
}

impl HamiltonianMatrix {
    /// Wraps an arbitrary row-major matrix, checking only that it is square and symmetric.
    pub fn from_row_major(dim: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::validation(
                "entries",
                format!(
                    "expected {} values for a {dim}x{dim} matrix, got {}",
                    dim * dim,
                    entries.len()
                ),
            ));
        }
        for i in 0..dim {
            for j in 0..i {
                if entries[i * dim + j] != entries[j * dim + i] {
                    return Err(Error::validation(
                        "entries",
                        format!("not symmetric at ({}, {})", i + 1, j + 1),
                    ));
                }
            }
        }
        Ok(HamiltonianMatrix { dim, entries })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Entry at 0-based `(row, col)`.
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[row * self.dim + col]
    }

    pub fn as_row_major(&self) -> &[f64] {
        &self.entries
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// `O H O` for a diagonal operator `O`.
    pub fn conjugate_by(&self, op: &SiteOperator) -> Vec<f64> {
        let d = op.diagonal();
        let n = self.dim;
        (0..n * n)
            .map(|k| d[k / n] * self.entries[k] * d[k % n])
            .collect()
    }
}

/// Builds the chain Hamiltonian: diagonal `U_n`, off-diagonal `-J_{n,n+1}`.
pub fn build_hamiltonian(spec: &ChainSpec) -> HamiltonianMatrix {
    let dim = spec.n_sites();
    let mut entries = vec![0.0; dim * dim];
    for (i, &u) in spec.onsite().iter().enumerate() {
        entries[i * dim + i] = u;
    }
    for n in 1..dim {
        let t = -spec.bond(n);
        let i = n - 1;
        entries[i * dim + i + 1] = t;
        entries[(i + 1) * dim + i] = t;
    }
    HamiltonianMatrix { dim, entries }
}

/// An operator diagonal in the site basis.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteOperator {
    diagonal: Vec<f64>,
}

impl SiteOperator {
    pub fn from_diagonal(diagonal: Vec<f64>) -> Self {
        SiteOperator { diagonal }
    }

    pub fn dim(&self) -> usize {
        self.diagonal.len()
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    /// Entrywise product of two diagonal operators.
    pub fn product(&self, other: &SiteOperator) -> SiteOperator {
        assert_eq!(self.dim(), other.dim(), "operator dimensions differ");
        SiteOperator {
            diagonal: self
                .diagonal
                .iter()
                .zip(&other.diagonal)
                .map(|(a, b)| a * b)
                .collect(),
        }
    }

    pub fn scaled(&self, factor: f64) -> SiteOperator {
        SiteOperator {
            diagonal: self.diagonal.iter().map(|d| d * factor).collect(),
        }
    }

    /// `Σ_i O_ii · p_i` for a population vector.
    pub fn expectation(&self, populations: &[f64]) -> f64 {
        self.diagonal
            .iter()
            .zip(populations)
            .map(|(o, p)| o * p)
            .sum()
    }
}

/// Chiral operator: +1 on A (odd) sites, -1 on B (even) sites.
pub fn chiral_operator(n_cells: usize) -> SiteOperator {
    SiteOperator::from_diagonal(
        (0..2 * n_cells)
            .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 })
            .collect(),
    )
}

/// Cell-position operator measured from `origin_cell`: value `m - origin_cell` on both sites of cell `m`.
pub fn cell_position_operator(n_cells: usize, origin_cell: usize) -> Result<SiteOperator> {
    if origin_cell < 1 || origin_cell > n_cells {
        return Err(Error::validation(
            "origin_cell",
            format!("must lie in 1..={n_cells}, got {origin_cell}"),
        ));
    }
    Ok(absolute_position(n_cells, origin_cell as f64))
}

pub(crate) fn absolute_position(n_cells: usize, origin: f64) -> SiteOperator {
    SiteOperator::from_diagonal(
        (0..2 * n_cells)
            .map(|i| (i / 2 + 1) as f64 - origin)
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn dimer_hamiltonian() {
        let h = build_hamiltonian(&ChainSpec::new(1, 160.0, 800.0).unwrap());
        assert_eq!(h.as_row_major(), &[0.0, -160.0, -160.0, 0.0]);
    }

    #[test]
    fn uncoupled_chain_is_zero() {
        let h = build_hamiltonian(&ChainSpec::new(3, 0.0, 0.0).unwrap());
        assert!(h.as_row_major().iter().all(|&x| x == 0.0));
        assert_eq!(h.dim(), 6);
    }

    #[test]
    fn alternating_band() {
        let h = build_hamiltonian(&ChainSpec::new(3, 160.0, 800.0).unwrap());
        let band: Vec<f64> = (0..5).map(|i| h.get(i, i + 1)).collect();
        assert_eq!(band, vec![-160.0, -800.0, -160.0, -800.0, -160.0]);
        for i in 0..6usize {
            for j in 0..6 {
                if i.abs_diff(j) > 1 {
                    assert_eq!(h.get(i, j), 0.0);
                }
            }
        }
    }

    #[test]
    fn overrides_and_onsite_are_used() {
        let spec = ChainSpec::with_details(
            2,
            1.0,
            2.0,
            Some(vec![5.0, -6.0, 7.0]),
            vec![1.0, 2.0, 3.0, 4.0],
        )
        .unwrap();
        let h = build_hamiltonian(&spec);
        assert_eq!(h.get(1, 2), 6.0);
        assert_eq!(h.get(2, 1), 6.0);
        assert_eq!(h.get(3, 3), 4.0);
    }

    #[test]
    fn length_mismatches_name_the_field() {
        let err =
            ChainSpec::with_details(3, 1.0, 1.0, Some(vec![1.0; 4]), vec![0.0; 6]).unwrap_err();
        assert!(err.to_string().starts_with("bond_overrides_khz"), "{err}");
        let err = ChainSpec::with_details(3, 1.0, 1.0, None, vec![0.0; 5]).unwrap_err();
        assert!(
            err.to_string()
                .starts_with("onsite_khz: expected 6 entries"),
            "{err}"
        );
        assert!(ChainSpec::new(0, 1.0, 1.0).is_err());
        assert!(ChainSpec::new(2, -1.0, 1.0).is_err());
        assert!(ChainSpec::with_details(1, 1.0, 1.0, Some(vec![f64::NAN]), vec![0.0; 2]).is_err());
    }

    #[test]
    fn negative_override_is_accepted() {
        assert!(ChainSpec::with_details(1, 1.0, 1.0, Some(vec![-3.0]), vec![0.0; 2]).is_ok());
    }

    #[test]
    fn chiral_and_position_operators() {
        assert_eq!(chiral_operator(1).diagonal(), &[1.0, -1.0]);
        assert_eq!(
            chiral_operator(3).diagonal(),
            &[1.0, -1.0, 1.0, -1.0, 1.0, -1.0]
        );
        assert_eq!(
            cell_position_operator(3, 2).unwrap().diagonal(),
            &[-1.0, -1.0, 0.0, 0.0, 1.0, 1.0]
        );
        assert_eq!(
            cell_position_operator(3, 1).unwrap().diagonal(),
            &[0.0, 0.0, 1.0, 1.0, 2.0, 2.0]
        );
        let gm = chiral_operator(3).product(&cell_position_operator(3, 1).unwrap());
        assert_eq!(gm.diagonal(), &[0.0, 0.0, 1.0, -1.0, 2.0, -2.0]);
        assert!(cell_position_operator(3, 0).is_err());
        assert!(cell_position_operator(3, 4).is_err());
    }

    #[test]
    fn characteristic_times() {
        let spec = ChainSpec::new(3, 160.0, 800.0).unwrap();
        assert_eq!(spec.tau_weak_us(), 6.25);
        assert_eq!(spec.tau_strong_us(), 1.25);
        assert_eq!(ChainSpec::cell_of_site(4), 2);
        assert_eq!(ChainSpec::cell_of_site(5), 3);
    }

    #[test]
    fn json_round_trip_and_strictness() {
        let spec: ChainSpec = serde_json::from_str(
            r#"{"n_cells":2,"j_intra_khz":160,"j_inter_khz":800,"bond_overrides_khz":null}"#,
        )
        .unwrap();
        assert_eq!(spec.onsite(), &[0.0; 4]);
        let back: ChainSpec = serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
        assert_eq!(back, spec);
        assert!(serde_json::from_str::<ChainSpec>(
            r#"{"n_cells":2,"j_intra_khz":1,"j_inter_khz":1,"extra":1}"#
        )
        .is_err());
        let err = serde_json::from_str::<ChainSpec>(
            r#"{"n_cells":3,"j_intra_khz":1,"j_inter_khz":1,"onsite_khz":[0,0,0,0,0]}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("onsite_khz"), "{err}");
    }

    fn arb_spec() -> impl Strategy<Value = ChainSpec> {
        (1usize..9).prop_flat_map(|n| {
            proptest::collection::vec(-1000.0f64..1000.0, 2 * n - 1).prop_map(move |b| {
                ChainSpec::with_details(n, 1.0, 1.0, Some(b), vec![0.0; 2 * n]).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn chiral_anticommutes_with_bipartite_hopping(spec in arb_spec()) {
            let h = build_hamiltonian(&spec);
            let g = chiral_operator(spec.n_cells());
            let ghg = h.conjugate_by(&g);
            for (a, b) in ghg.iter().zip(h.as_row_major()) {
                prop_assert_eq!(*a, -*b);
            }
        }

        #[test]
        fn hamiltonian_is_exactly_symmetric_and_deterministic(spec in arb_spec()) {
            let h = build_hamiltonian(&spec);
            prop_assert_eq!(&h, &build_hamiltonian(&spec));
            let n = h.dim();
            for i in 0..n {
                for j in 0..n {
                    prop_assert_eq!(h.get(i, j).to_bits(), h.get(j, i).to_bits());
                }
            }
        }
    }
}
