//! Shared-width multi-Lorentzian least squares.
//!
//! The model is `Σ_p h_p · L(Δ - c_p; Γ)` with unit-peak-height Lorentzians
//! `L`, so a fitted height is directly the relative line strength. The solver
//! works on `(c_p, ln h_p, ln Γ)` to keep heights and width positive without
//! constraints.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectra::{lorentzian, SpectrumTrace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LorentzianFit {
    #[serde(rename = "centers_khz")]
    pub centers: Vec<f64>,
    pub heights: Vec<f64>,
    #[serde(rename = "shared_fwhm_khz")]
    pub shared_fwhm: f64,
    pub residual_rms: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Set by [`seed_guesses`] when the trace had fewer maxima than requested peaks.
    #[serde(skip)]
    pub underdetermined: bool,
    /// Objective after the seed and after every accepted step.
    #[serde(skip)]
    pub objective_history: Vec<f64>,
}

impl LorentzianFit {
    pub fn n_peaks(&self) -> usize {
        self.centers.len()
    }

    /// Model intensity at detuning `d`.
    pub fn evaluate(&self, d: f64) -> f64 {
        self.centers
            .iter()
            .zip(&self.heights)
            .map(|(c, h)| h * lorentzian(d - c, self.shared_fwhm))
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub max_iter: usize,
    /// Relative objective improvement below which an accepted step ends the fit.
    pub tol: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_iter: 200,
            tol: 1e-10,
        }
    }
}

const STEP_TOL: f64 = 1e-8;
const MAX_DAMPING: f64 = 1e12;

fn local_maxima(y: &[f64]) -> Vec<usize> {
    (1..y.len().saturating_sub(1))
        .filter(|&i| y[i] > 0.0 && y[i] > y[i - 1] && y[i] >= y[i + 1])
        .collect()
}

/// Topographic prominence of the local maximum at `i`.
fn prominence(y: &[f64], i: usize) -> f64 {
    let h = y[i];
    let mut left_min = h;
    for &v in y[..i].iter().rev() {
        if v > h {
            break;
        }
        left_min = left_min.min(v);
    }
    let mut right_min = h;
    for &v in &y[i + 1..] {
        if v > h {
            break;
        }
        right_min = right_min.min(v);
    }
    h - left_min.max(right_min)
}

/// Full width at half height around index `i`, from linearly interpolated crossings.
fn half_height_width(x: &[f64], y: &[f64], i: usize) -> Option<f64> {
    let half = 0.5 * y[i];
    let cross = |a: usize, b: usize| x[a] + (half - y[a]) * (x[b] - x[a]) / (y[b] - y[a]);
    let left = (1..=i)
        .rev()
        .find(|&k| y[k - 1] <= half)
        .map(|k| cross(k - 1, k));
    let right = (i..y.len() - 1)
        .find(|&k| y[k + 1] <= half)
        .map(|k| cross(k, k + 1));
    match (left, right) {
        (Some(l), Some(r)) => Some(r - l),
        (Some(l), None) => Some(2.0 * (x[i] - l)),
        (None, Some(r)) => Some(2.0 * (r - x[i])),
        (None, None) => None,
    }
}

/// Initial guesses at the `n_peaks` most prominent maxima of `trace`.
pub fn seed_guesses(trace: &SpectrumTrace, n_peaks: usize) -> Result<LorentzianFit> {
    let x = &trace.detunings;
    let y = &trace.intensity;
    if n_peaks == 0 {
        return Err(Error::validation("n_peaks", "must be at least 1"));
    }
    if x.len() < 5 * n_peaks {
        return Err(Error::validation(
            "n_peaks",
            format!(
                "{n_peaks} peaks need at least {} grid points, trace has {}",
                5 * n_peaks,
                x.len()
            ),
        ));
    }
    let step = x[1] - x[0];
    let span = x[x.len() - 1] - x[0];
    let y_max = y.iter().cloned().fold(0.0, f64::max);
    let floor = if y_max > 0.0 { 1e-3 * y_max } else { 1.0 };

    let mut peaks: Vec<(usize, f64)> = local_maxima(y)
        .into_iter()
        .map(|i| (i, prominence(y, i)))
        .collect();
    peaks.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    peaks.truncate(n_peaks);

    let widest = peaks
        .iter()
        .filter_map(|&(i, _)| half_height_width(x, y, i))
        .fold(None, |m: Option<f64>, w| Some(m.map_or(w, |m| m.max(w))));
    let shared_fwhm = widest
        .unwrap_or(span / (2.0 * n_peaks as f64))
        .clamp(step, span);

    let mut seeds: Vec<(f64, f64)> = peaks
        .iter()
        .map(|&(i, _)| (x[i], y[i].max(floor)))
        .collect();
    let missing = n_peaks - seeds.len();
    for k in 0..missing {
        let c = x[0] + span * (k as f64 + 0.5) / missing as f64;
        let idx = (((c - x[0]) / step).round() as usize).min(y.len() - 1);
        seeds.push((c, y[idx].max(floor)));
    }
    seeds.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut fit = LorentzianFit {
        centers: seeds.iter().map(|s| s.0).collect(),
        heights: seeds.iter().map(|s| s.1).collect(),
        shared_fwhm,
        residual_rms: 0.0,
        converged: false,
        iterations: 0,
        underdetermined: missing > 0,
        objective_history: Vec::new(),
    };
    fit.residual_rms =
        (objective(trace, &fit.centers, &fit.heights, fit.shared_fwhm) / x.len() as f64).sqrt();
    Ok(fit)
}

fn objective(trace: &SpectrumTrace, centers: &[f64], heights: &[f64], fwhm: f64) -> f64 {
    trace
        .detunings
        .iter()
        .zip(&trace.intensity)
        .map(|(&d, &y)| {
            let m: f64 = centers
                .iter()
                .zip(heights)
                .map(|(c, h)| h * lorentzian(d - c, fwhm))
                .sum();
            (m - y) * (m - y)
        })
        .sum()
}

/// Packed parameters `[c_1..c_n, ln h_1..ln h_n, ln Γ]`.
struct Params {
    n: usize,
    theta: Vec<f64>,
}

impl Params {
    fn from_fit(fit: &LorentzianFit) -> Self {
        let n = fit.n_peaks();
        let mut theta = fit.centers.clone();
        theta.extend(fit.heights.iter().map(|h| h.max(f64::MIN_POSITIVE).ln()));
        theta.push(fit.shared_fwhm.ln());
        Params { n, theta }
    }

    fn centers(&self) -> &[f64] {
        &self.theta[..self.n]
    }

    fn heights(&self) -> Vec<f64> {
        self.theta[self.n..2 * self.n]
            .iter()
            .map(|l| l.exp())
            .collect()
    }

    fn fwhm(&self) -> f64 {
        self.theta[2 * self.n].exp()
    }

    fn objective(&self, trace: &SpectrumTrace) -> f64 {
        objective(trace, self.centers(), &self.heights(), self.fwhm())
    }

    /// Returns `(JᵀJ, Jᵀr)` for residuals `r = model - data`.
    fn normal_equations(&self, trace: &SpectrumTrace) -> (Vec<f64>, Vec<f64>) {
        let n = self.n;
        let m = 2 * n + 1;
        let heights = self.heights();
        let fwhm = self.fwhm();
        let mut jtj = vec![0.0; m * m];
        let mut jtr = vec![0.0; m];
        let mut row = vec![0.0; m];
        for (&d, &y) in trace.detunings.iter().zip(&trace.intensity) {
            let mut model = 0.0;
            row[2 * n] = 0.0;
            for p in 0..n {
                let u = 2.0 * (d - self.theta[p]) / fwhm;
                let l = 1.0 / (1.0 + u * u);
                let hl2 = heights[p] * l * l;
                model += heights[p] * l;
                row[p] = 4.0 * u * hl2 / fwhm;
                row[n + p] = heights[p] * l;
                row[2 * n] += 2.0 * u * u * hl2;
            }
            let r = model - y;
            for a in 0..m {
                jtr[a] += row[a] * r;
                for b in a..m {
                    jtj[a * m + b] += row[a] * row[b];
                }
            }
        }
        for a in 0..m {
            for b in 0..a {
                jtj[a * m + b] = jtj[b * m + a];
            }
        }
        (jtj, jtr)
    }
}

/// Solves `A x = b` for symmetric positive definite `A` by Cholesky; `None` if not positive definite.
fn cholesky_solve(m: usize, a: &[f64], b: &[f64]) -> Option<Vec<f64>> {
    let mut l = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..=i {
            let s = a[i * m + j] - (0..j).map(|k| l[i * m + k] * l[j * m + k]).sum::<f64>();
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return None;
                }
                l[i * m + i] = s.sqrt();
            } else {
                l[i * m + j] = s / l[j * m + j];
            }
        }
    }
    let mut z = vec![0.0; m];
    for i in 0..m {
        z[i] = (b[i] - (0..i).map(|k| l[i * m + k] * z[k]).sum::<f64>()) / l[i * m + i];
    }
    let mut x = vec![0.0; m];
    for i in (0..m).rev() {
        x[i] = (z[i] - (i + 1..m).map(|k| l[k * m + i] * x[k]).sum::<f64>()) / l[i * m + i];
    }
    Some(x)
}

/// Levenberg-Marquardt refinement of `seed` against `trace`.
pub fn fit_lorentzians(
    trace: &SpectrumTrace,
    seed: &LorentzianFit,
    opts: FitOptions,
) -> Result<LorentzianFit> {
    if seed.n_peaks() == 0 || seed.heights.len() != seed.n_peaks() {
        return Err(Error::validation(
            "seed",
            "needs matching, non-empty centers and heights",
        ));
    }
    if seed.shared_fwhm.is_nan()
        || seed.shared_fwhm <= 0.0
        || seed
            .centers
            .iter()
            .chain(&seed.heights)
            .any(|v| !v.is_finite())
    {
        return Err(Error::validation(
            "seed",
            "width must be positive and all values finite",
        ));
    }
    let mut params = Params::from_fit(seed);
    let m = params.theta.len();
    let mut cost = params.objective(trace);
    let mut history = vec![cost];
    let mut damping = 1e-3;
    let mut converged = cost == 0.0;
    let mut iterations = 0;

    let (mut jtj, mut jtr) = params.normal_equations(trace);
    while !converged && iterations < opts.max_iter {
        iterations += 1;
        let diag_max = (0..m).map(|a| jtj[a * m + a]).fold(0.0, f64::max);
        let mut lhs = jtj.clone();
        for a in 0..m {
            lhs[a * m + a] += damping * jtj[a * m + a].max(1e-12 * diag_max).max(f64::MIN_POSITIVE);
        }
        let rhs: Vec<f64> = jtr.iter().map(|g| -g).collect();
        let Some(step) = cholesky_solve(m, &lhs, &rhs) else {
            damping *= 10.0;
            if damping > MAX_DAMPING {
                break;
            }
            continue;
        };
        let step_norm = step.iter().map(|s| s * s).sum::<f64>().sqrt();
        let trial = Params {
            n: params.n,
            theta: params.theta.iter().zip(&step).map(|(t, s)| t + s).collect(),
        };
        let trial_cost = trial.objective(trace);
        if trial_cost.is_finite() && trial_cost < cost {
            let improvement = (cost - trial_cost) / cost;
            params = trial;
            cost = trial_cost;
            history.push(cost);
            damping = (damping / 10.0).max(1e-15);
            converged = improvement < opts.tol || step_norm < STEP_TOL || cost == 0.0;
            if !converged {
                (jtj, jtr) = params.normal_equations(trace);
            }
        } else if step_norm < STEP_TOL {
            converged = true;
        } else {
            damping *= 10.0;
            if damping > MAX_DAMPING {
                break;
            }
        }
    }

    let mut peaks: Vec<(f64, f64)> = params
        .centers()
        .iter()
        .cloned()
        .zip(params.heights())
        .collect();
    peaks.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(LorentzianFit {
        centers: peaks.iter().map(|p| p.0).collect(),
        heights: peaks.iter().map(|p| p.1).collect(),
        shared_fwhm: params.fwhm(),
        residual_rms: (cost / trace.detunings.len() as f64).sqrt(),
        converged,
        iterations,
        underdetermined: seed.underdetermined,
        objective_history: history,
    })
}

/// Fitted centers in units of `j1`, ascending.
pub fn eigenenergies_from_fit(fit: &LorentzianFit, j1: f64) -> Result<Vec<f64>> {
    if !(j1 > 0.0 && j1.is_finite()) {
        return Err(Error::validation(
            "j1_khz",
            format!("must be positive, got {j1}"),
        ));
    }
    let mut e: Vec<f64> = fit.centers.iter().map(|c| c / j1).collect();
    e.sort_by(f64::total_cmp);
    Ok(e)
}

/// Adds uniform noise in `[-a, a]·max(intensity)` from a seeded generator, clamping at zero.
pub fn add_uniform_noise(trace: &SpectrumTrace, amplitude: f64, seed: u64) -> SpectrumTrace {
    let scale = amplitude * trace.intensity.iter().cloned().fold(0.0, f64::max);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let intensity = trace
        .intensity
        .iter()
        .map(|&y| (y + scale * rng.random_range(-1.0..=1.0)).max(0.0))
        .collect();
    SpectrumTrace {
        detunings: trace.detunings.clone(),
        intensity,
        fwhm: trace.fwhm,
    }
}
