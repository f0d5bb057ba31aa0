//! Seeded ensembles of perturbed chains.
//!
//! Each draw is a pure function of `(seed, sample_index, slot)`: the generator
//! is a ChaCha8 stream keyed by `seed`, selected by `sample_index`, and
//! positioned at a fixed word offset per parameter slot. Bonds occupy slots
//! `0..2N-1`, on-site energies the slots after them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dynamics::{winding_estimate, DEFAULT_INITIAL_SITE, DEFAULT_T_AVG_US};
use crate::error::{Error, Result};
use crate::lattice::ChainSpec;
use crate::par::{map_indexed, pairwise_sum, Execution};
use crate::spectra::{broaden, eigensystem, stick_spectrum, DetuningGrid};

/// 32-bit words reserved per slot; a single draw never needs more than a handful.
const WORDS_PER_SLOT: u128 = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Distribution {
    /// Uniform on `[-σ, σ]`.
    #[default]
    UniformBounded,
    /// Normal with standard deviation `σ`.
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisorderModel {
    #[serde(rename = "sigma_j_khz")]
    pub sigma_j: f64,
    #[serde(rename = "sigma_u_khz")]
    pub sigma_u: f64,
    #[serde(default)]
    pub distribution: Distribution,
    pub seed: u64,
}

impl DisorderModel {
    pub fn new(sigma_j: f64, sigma_u: f64, distribution: Distribution, seed: u64) -> Result<Self> {
        let model = DisorderModel {
            sigma_j,
            sigma_u,
            distribution,
            seed,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        for (field, s) in [("sigma_j_khz", self.sigma_j), ("sigma_u_khz", self.sigma_u)] {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(Error::validation(
                    field,
                    format!("must be finite and non-negative, got {s}"),
                ));
            }
        }
        Ok(())
    }

    /// Unit-scale draw for `(sample_index, slot)`.
    fn unit_draw(&self, sample_index: u64, slot: usize) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(sample_index);
        rng.set_word_pos(slot as u128 * WORDS_PER_SLOT);
        match self.distribution {
            Distribution::UniformBounded => rng.random_range(-1.0..=1.0),
            Distribution::Gaussian => rng.sample(StandardNormal),
        }
    }
}

/// One member of the ensemble. Zero scales leave the corresponding base fields untouched.
pub fn sample_spec(base: &ChainSpec, model: &DisorderModel, sample_index: u64) -> ChainSpec {
    let n_bonds = base.n_sites() - 1;
    let mut spec = base.clone();
    if model.sigma_j > 0.0 {
        let bonds = base
            .bonds()
            .iter()
            .enumerate()
            .map(|(slot, b)| b + model.sigma_j * model.unit_draw(sample_index, slot))
            .collect();
        spec = spec
            .with_bonds(bonds)
            .expect("perturbed bonds keep the chain length");
    }
    if model.sigma_u > 0.0 {
        let onsite = base
            .onsite()
            .iter()
            .enumerate()
            .map(|(i, u)| u + model.sigma_u * model.unit_draw(sample_index, n_bonds + i))
            .collect();
        spec = spec
            .with_onsite(onsite)
            .expect("perturbed on-site list keeps its length");
    }
    spec
}

/// Quantity aggregated over an ensemble.
#[derive(Debug, Clone, PartialEq)]
pub enum Observable {
    /// The `2N` sorted eigenvalues, kHz.
    Eigenvalues,
    WindingEstimate {
        initial_site: usize,
        t_avg_us: f64,
    },
    /// Broadened spectrum on a fixed grid.
    Spectrum {
        probe_site: usize,
        fwhm_khz: f64,
        grid: DetuningGrid,
    },
}

impl Observable {
    pub fn winding_default() -> Self {
        Observable::WindingEstimate {
            initial_site: DEFAULT_INITIAL_SITE,
            t_avg_us: DEFAULT_T_AVG_US,
        }
    }

    pub fn evaluate(&self, spec: &ChainSpec) -> Result<Vec<f64>> {
        match self {
            Observable::Eigenvalues => Ok(eigensystem(spec).eigenvalues().to_vec()),
            Observable::WindingEstimate {
                initial_site,
                t_avg_us,
            } => Ok(vec![winding_estimate(spec, *initial_site, *t_avg_us)?]),
            Observable::Spectrum {
                probe_site,
                fwhm_khz,
                grid,
            } => {
                let sticks = stick_spectrum(&eigensystem(spec), *probe_site)?;
                Ok(broaden(&sticks, *fwhm_khz, grid)?.intensity)
            }
        }
    }
}

/// Element-wise mean and sample standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub n: usize,
}

impl EnsembleStats {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("mean,std,n\n");
        for (m, sd) in self.mean.iter().zip(&self.std) {
            s.push_str(&format!("{m},{sd},{}\n", self.n));
        }
        s
    }
}

/// Applies `f` to samples `0..n_samples`, returning results in sample order.
pub fn ensemble_map<T, F>(
    base: &ChainSpec,
    model: &DisorderModel,
    n_samples: usize,
    exec: Execution,
    f: F,
) -> Vec<T>
where
    T: Send,
    F: Fn(&ChainSpec) -> T + Sync + Send,
{
    map_indexed(n_samples, exec, |i| f(&sample_spec(base, model, i as u64)))
}

pub fn ensemble_statistics(
    base: &ChainSpec,
    model: &DisorderModel,
    n_samples: usize,
    observable: &Observable,
) -> Result<EnsembleStats> {
    ensemble_statistics_with(base, model, n_samples, observable, Execution::default())
}

pub fn ensemble_statistics_with(
    base: &ChainSpec,
    model: &DisorderModel,
    n_samples: usize,
    observable: &Observable,
    exec: Execution,
) -> Result<EnsembleStats> {
    if n_samples < 2 {
        return Err(Error::validation(
            "n_samples",
            format!("must be at least 2, got {n_samples}"),
        ));
    }
    model.validate()?;
    let samples: Vec<Vec<f64>> =
        ensemble_map(base, model, n_samples, exec, |s| observable.evaluate(s))
            .into_iter()
            .collect::<Result<_>>()?;
    Ok(summarize(&samples))
}

fn summarize(samples: &[Vec<f64>]) -> EnsembleStats {
    let n = samples.len();
    let width = samples[0].len();
    let mut mean = Vec::with_capacity(width);
    let mut std = Vec::with_capacity(width);
    let mut column = vec![0.0; n];
    for j in 0..width {
        // Shifted by the first sample so identical samples give exactly zero spread.
        let shift = samples[0][j];
        for (c, s) in column.iter_mut().zip(samples) {
            *c = s[j] - shift;
        }
        let m = pairwise_sum(&column) / n as f64;
        let dev: Vec<f64> = column.iter().map(|x| (x - m) * (x - m)).collect();
        mean.push(shift + m);
        std.push((pairwise_sum(&dev) / (n - 1) as f64).sqrt());
    }
    EnsembleStats { mean, std, n }
}

/// Largest violation of `ε_k = -ε_{2N+1-k}` in a sorted spectrum, kHz.
pub fn spectral_asymmetry(sorted_eigenvalues: &[f64]) -> f64 {
    let n = sorted_eigenvalues.len();
    (0..n / 2)
        .map(|k| (sorted_eigenvalues[k] + sorted_eigenvalues[n - 1 - k]).abs())
        .fold(0.0, f64::max)
}
