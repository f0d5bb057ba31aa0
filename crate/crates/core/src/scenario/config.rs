//! Scenario config parsing.
//!
//! Parsing walks the JSON tree once and records every problem it finds, so a
//! broken config reports all of its violations together.

use std::collections::BTreeSet;

use serde_json::{Map, Value};

use crate::disorder::{DisorderModel, Distribution};
use crate::dynamics::{Convention, DEFAULT_DT_US, DEFAULT_INITIAL_SITE, DEFAULT_T_AVG_US};
use crate::lattice::ChainSpec;

/// Dense diagonalization keeps chains to a few hundred sites.
pub const MAX_CELLS: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub spec: ChainSpec,
    pub output_prefix: String,
    pub scenario: Scenario,
}

impl ScenarioConfig {
    pub fn kind(&self) -> &'static str {
        self.scenario.kind()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Scenario {
    Spectrum(SpectrumParams),
    Eigensweep {
        ratios: Vec<f64>,
    },
    Quench(QuenchParams),
    Chiral {
        quench: QuenchParams,
        convention: Convention,
        sweep: Option<ChiralSweep>,
    },
    Bands {
        n_k: usize,
    },
    FitRoundtrip(FitParams),
    Disorder(DisorderParams),
}

impl Scenario {
    pub fn kind(&self) -> &'static str {
        match self {
            Scenario::Spectrum(_) => "spectrum",
            Scenario::Eigensweep { .. } => "eigensweep",
            Scenario::Quench(_) => "quench",
            Scenario::Chiral { .. } => "chiral",
            Scenario::Bands { .. } => "bands",
            Scenario::FitRoundtrip(_) => "fit-roundtrip",
            Scenario::Disorder(_) => "disorder",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumParams {
    pub probe_site: usize,
    pub fwhm_khz: f64,
    pub grid_step_khz: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuenchParams {
    pub initial_site: usize,
    pub t_max_us: f64,
    pub dt_us: f64,
}

/// Rate pairs evaluated by a chiral sweep, in output order.
#[derive(Debug, Clone, PartialEq)]
pub struct ChiralSweep {
    /// `(group label, J1, J2)`.
    pub points: Vec<(String, f64, f64)>,
}

/// The five measured parameter sets, `(J1, J2)` in kHz.
pub const MEASURED_RATE_SETS: [(f64, f64); 5] = [
    (160.0, 800.0),
    (400.0, 800.0),
    (400.0, 400.0),
    (800.0, 400.0),
    (800.0, 160.0),
];

#[derive(Debug, Clone, PartialEq)]
pub struct FitParams {
    pub spectrum: SpectrumParams,
    pub n_peaks: usize,
    pub noise_amplitude: f64,
    pub noise_seed: u64,
    pub max_iter: usize,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DisorderObservable {
    Eigenvalues,
    WindingEstimate { initial_site: usize, t_avg_us: f64 },
    Spectrum(SpectrumParams),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DisorderParams {
    pub model: DisorderModel,
    pub n_samples: usize,
    pub observable: DisorderObservable,
}

/// Reads typed fields out of one JSON object, accumulating diagnostics.
struct Fields<'a> {
    obj: &'a Map<String, Value>,
    path: String,
    used: BTreeSet<&'static str>,
}

impl<'a> Fields<'a> {
    fn new(obj: &'a Map<String, Value>, path: &str) -> Self {
        Fields {
            obj,
            path: path.to_string(),
            used: BTreeSet::new(),
        }
    }

    fn name(&self, key: &str) -> String {
        if self.path.is_empty() {
            key.to_string()
        } else {
            format!("{}.{key}", self.path)
        }
    }

    fn get(&mut self, key: &'static str) -> Option<&'a Value> {
        self.used.insert(key);
        self.obj.get(key).filter(|v| !v.is_null())
    }

    fn f64(
        &mut self,
        key: &'static str,
        default: Option<f64>,
        diags: &mut Vec<String>,
    ) -> Option<f64> {
        match self.get(key) {
            None if default.is_some() => default,
            None => {
                diags.push(format!("{}: required field is missing", self.name(key)));
                None
            }
            Some(v) => match v.as_f64() {
                Some(x) => Some(x),
                None => {
                    diags.push(format!("{}: expected a number, got {v}", self.name(key)));
                    None
                }
            },
        }
    }

    fn positive(
        &mut self,
        key: &'static str,
        default: Option<f64>,
        diags: &mut Vec<String>,
    ) -> Option<f64> {
        let x = self.f64(key, default, diags)?;
        if x > 0.0 && x.is_finite() {
            Some(x)
        } else {
            diags.push(format!("{}: must be positive, got {x}", self.name(key)));
            None
        }
    }

    fn u64(
        &mut self,
        key: &'static str,
        default: Option<u64>,
        diags: &mut Vec<String>,
    ) -> Option<u64> {
        match self.get(key) {
            None if default.is_some() => default,
            None => {
                diags.push(format!("{}: required field is missing", self.name(key)));
                None
            }
            Some(v) => match v.as_u64() {
                Some(x) => Some(x),
                None => {
                    diags.push(format!(
                        "{}: expected a non-negative integer, got {v}",
                        self.name(key)
                    ));
                    None
                }
            },
        }
    }

    fn usize_in(
        &mut self,
        key: &'static str,
        default: Option<usize>,
        range: std::ops::RangeInclusive<usize>,
        diags: &mut Vec<String>,
    ) -> Option<usize> {
        let x = self.u64(key, default.map(|d| d as u64), diags)? as usize;
        if range.contains(&x) {
            Some(x)
        } else {
            diags.push(format!(
                "{}: must lie in {}..={}, got {x}",
                self.name(key),
                range.start(),
                range.end()
            ));
            None
        }
    }

    fn string(
        &mut self,
        key: &'static str,
        default: Option<&str>,
        diags: &mut Vec<String>,
    ) -> Option<String> {
        match self.get(key) {
            None => match default {
                Some(d) => Some(d.to_string()),
                None => {
                    diags.push(format!("{}: required field is missing", self.name(key)));
                    None
                }
            },
            Some(Value::String(s)) => Some(s.clone()),
            Some(v) => {
                diags.push(format!("{}: expected a string, got {v}", self.name(key)));
                None
            }
        }
    }

    fn object(
        &mut self,
        key: &'static str,
        diags: &mut Vec<String>,
    ) -> Option<&'a Map<String, Value>> {
        match self.get(key)? {
            Value::Object(m) => Some(m),
            v => {
                diags.push(format!("{}: expected an object, got {v}", self.name(key)));
                None
            }
        }
    }

    fn finish(self, diags: &mut Vec<String>) {
        for key in self.obj.keys() {
            if !self.used.contains(key.as_str()) {
                diags.push(format!("{}: unknown key", self.name(key)));
            }
        }
    }
}

fn parse_spec(obj: &Map<String, Value>, diags: &mut Vec<String>) -> Option<ChainSpec> {
    let mut f = Fields::new(obj, "spec");
    let n_cells = f.usize_in("n_cells", None, 1..=MAX_CELLS, diags);
    let j_intra = f.f64("j_intra_khz", None, diags);
    let j_inter = f.f64("j_inter_khz", None, diags);
    let bonds = number_list(&mut f, "bond_overrides_khz", diags);
    let onsite = number_list(&mut f, "onsite_khz", diags);
    f.finish(diags);

    let (n_cells, j_intra, j_inter) = (n_cells?, j_intra?, j_inter?);
    let (Ok(bonds), Ok(onsite)) = (bonds, onsite) else {
        return None;
    };
    let onsite = onsite.unwrap_or_else(|| vec![0.0; 2 * n_cells]);
    let candidate = ChainSpec::unchecked(n_cells, j_intra, j_inter, bonds, onsite);
    let problems = candidate.problems();
    if problems.is_empty() {
        Some(candidate)
    } else {
        diags.extend(
            problems
                .into_iter()
                .map(|(field, reason)| format!("spec.{field}: {reason}")),
        );
        None
    }
}

/// Optional list of numbers; `Err(())` after recording a diagnostic.
fn number_list(
    f: &mut Fields,
    key: &'static str,
    diags: &mut Vec<String>,
) -> Result<Option<Vec<f64>>, ()> {
    match f.get(key) {
        None => Ok(None),
        Some(Value::Array(items)) => {
            let nums: Option<Vec<f64>> = items.iter().map(Value::as_f64).collect();
            nums.map(Some).ok_or_else(|| {
                diags.push(format!("{}: entries must be numbers", f.name(key)));
            })
        }
        Some(v) => {
            diags.push(format!(
                "{}: expected an array of numbers, got {v}",
                f.name(key)
            ));
            Err(())
        }
    }
}

fn parse_ratio_grid(
    f: &mut Fields,
    key: &'static str,
    diags: &mut Vec<String>,
) -> Option<Vec<f64>> {
    let name = f.name(key);
    match f.get(key) {
        None => {
            diags.push(format!("{name}: required field is missing"));
            None
        }
        Some(Value::Array(items)) => {
            let ratios: Option<Vec<f64>> = items.iter().map(Value::as_f64).collect();
            match ratios {
                Some(r) if !r.is_empty() && r.iter().all(|x| *x > 0.0 && x.is_finite()) => Some(r),
                _ => {
                    diags.push(format!(
                        "{name}: must be a non-empty list of strictly positive numbers"
                    ));
                    None
                }
            }
        }
        Some(Value::Object(obj)) => {
            let mut g = Fields::new(obj, &name);
            let start = g.positive("start", None, diags);
            let stop = g.positive("stop", None, diags);
            let n = g.usize_in("n", None, 2..=100_000, diags);
            let spacing = g.string("spacing", Some("log"), diags);
            g.finish(diags);
            let (start, stop, n, spacing) = (start?, stop?, n?, spacing?);
            if stop <= start {
                diags.push(format!(
                    "{name}.stop: must exceed start ({start}), got {stop}"
                ));
                return None;
            }
            let frac = |k: usize| k as f64 / (n - 1) as f64;
            match spacing.as_str() {
                "log" => Some(
                    (0..n)
                        .map(|k| start * (stop / start).powf(frac(k)))
                        .collect(),
                ),
                "linear" => Some((0..n).map(|k| start + (stop - start) * frac(k)).collect()),
                other => {
                    diags.push(format!(
                        "{name}.spacing: expected \"log\" or \"linear\", got \"{other}\""
                    ));
                    None
                }
            }
        }
        Some(v) => {
            diags.push(format!(
                "{name}: expected a list or a {{start, stop, n, spacing}} object, got {v}"
            ));
            None
        }
    }
}

fn parse_spectrum_params(
    f: &mut Fields,
    n_sites: Option<usize>,
    diags: &mut Vec<String>,
) -> Option<SpectrumParams> {
    let probe_site = f.usize_in("probe_site", None, 1..=n_sites.unwrap_or(usize::MAX), diags);
    let fwhm_khz = f.positive("fwhm_khz", None, diags);
    let grid_step_khz = f.positive("grid_step_khz", Some(1.0), diags);
    Some(SpectrumParams {
        probe_site: probe_site?,
        fwhm_khz: fwhm_khz?,
        grid_step_khz: grid_step_khz?,
    })
}

fn parse_quench(
    f: &mut Fields,
    n_sites: Option<usize>,
    diags: &mut Vec<String>,
) -> Option<QuenchParams> {
    let initial_site = f.usize_in(
        "initial_site",
        Some(DEFAULT_INITIAL_SITE),
        1..=n_sites.unwrap_or(usize::MAX),
        diags,
    );
    let t_max_us = f.positive("t_max_us", Some(DEFAULT_T_AVG_US), diags);
    let dt_us = f.positive("dt_us", Some(DEFAULT_DT_US), diags);
    if let (Some(t), Some(dt)) = (t_max_us, dt_us) {
        if dt > t {
            diags.push(format!(
                "{}: must not exceed t_max_us ({t}), got {dt}",
                f.name("dt_us")
            ));
            return None;
        }
    }
    Some(QuenchParams {
        initial_site: initial_site?,
        t_max_us: t_max_us?,
        dt_us: dt_us?,
    })
}

fn parse_convention(f: &mut Fields, diags: &mut Vec<String>) -> Option<Convention> {
    let s = f.string("convention", Some("relative"), diags)?;
    match s.as_str() {
        "relative" => Some(Convention::Relative),
        "absolute" => Some(Convention::Absolute),
        other => {
            diags.push(format!(
                "{}: expected \"relative\" or \"absolute\", got \"{other}\"",
                f.name("convention")
            ));
            None
        }
    }
}

fn parse_sweep(obj: &Map<String, Value>, diags: &mut Vec<String>) -> Option<ChiralSweep> {
    let mut f = Fields::new(obj, "sweep");
    let measured_sets = match f.get("measured_sets") {
        None => false,
        Some(Value::Bool(b)) => *b,
        Some(v) => {
            diags.push(format!("sweep.measured_sets: expected a boolean, got {v}"));
            false
        }
    };
    let j1_values = number_list(&mut f, "j1_khz", diags)
        .ok()
        .flatten()
        .unwrap_or_default();
    let ratios = if f.obj.contains_key("ratio_grid") || !j1_values.is_empty() {
        parse_ratio_grid(&mut f, "ratio_grid", diags)
    } else {
        Some(Vec::new())
    };
    f.finish(diags);
    if j1_values.iter().any(|j| !(*j > 0.0 && j.is_finite())) {
        diags.push("sweep.j1_khz: entries must be positive".to_string());
        return None;
    }
    let mut points = Vec::new();
    if measured_sets {
        points.extend(
            MEASURED_RATE_SETS
                .iter()
                .map(|&(j1, j2)| ("measured".to_string(), j1, j2)),
        );
    }
    let ratios = ratios?;
    for &j1 in &j1_values {
        points.extend(
            ratios
                .iter()
                .map(|r| (format!("theory_j1_{j1}"), j1, j1 / r)),
        );
    }
    if points.is_empty() {
        diags.push(
            "sweep: selects no rate pairs (set measured_sets or j1_khz with ratio_grid)"
                .to_string(),
        );
        return None;
    }
    Some(ChiralSweep { points })
}

fn parse_disorder(
    f: &mut Fields,
    n_sites: Option<usize>,
    diags: &mut Vec<String>,
) -> Option<DisorderParams> {
    let model = f.object("disorder", diags).and_then(|obj| {
        let mut g = Fields::new(obj, "disorder");
        let sigma_j = g.f64("sigma_j_khz", Some(0.0), diags);
        let sigma_u = g.f64("sigma_u_khz", Some(0.0), diags);
        let distribution = g.string("distribution", Some("uniform-bounded"), diags);
        let seed = g.u64("seed", None, diags);
        g.finish(diags);
        let distribution = match distribution?.as_str() {
            "uniform-bounded" => Distribution::UniformBounded,
            "gaussian" => Distribution::Gaussian,
            other => {
                diags.push(format!(
                    "disorder.distribution: expected \"uniform-bounded\" or \"gaussian\", got \"{other}\""
                ));
                return None;
            }
        };
        match DisorderModel::new(sigma_j?, sigma_u?, distribution, seed?) {
            Ok(m) => Some(m),
            Err(e) => {
                diags.push(format!("disorder.{e}"));
                None
            }
        }
    });
    if !f.obj.contains_key("disorder") {
        diags.push("disorder: required field is missing".to_string());
    }
    let n_samples = f.usize_in("n_samples", None, 2..=10_000_000, diags);
    let observable = match f.string("observable", None, diags)?.as_str() {
        "eigenvalues" => Some(DisorderObservable::Eigenvalues),
        "winding_estimate" => {
            let site = f.usize_in(
                "initial_site",
                Some(DEFAULT_INITIAL_SITE),
                1..=n_sites.unwrap_or(usize::MAX),
                diags,
            );
            let t_avg = f.positive("t_avg_us", Some(DEFAULT_T_AVG_US), diags);
            Some(DisorderObservable::WindingEstimate {
                initial_site: site?,
                t_avg_us: t_avg?,
            })
        }
        "spectrum" => parse_spectrum_params(f, n_sites, diags).map(DisorderObservable::Spectrum),
        other => {
            diags.push(format!(
                "observable: expected \"eigenvalues\", \"winding_estimate\" or \"spectrum\", got \"{other}\""
            ));
            None
        }
    };
    Some(DisorderParams {
        model: model?,
        n_samples: n_samples?,
        observable: observable?,
    })
}

/// Parses and validates a scenario, returning every diagnostic on failure.
pub fn parse_config(value: &Value) -> Result<ScenarioConfig, Vec<String>> {
    let mut diags = Vec::new();
    let Value::Object(obj) = value else {
        return Err(vec!["config: expected a JSON object".to_string()]);
    };
    let mut f = Fields::new(obj, "");
    let kind = f.string("kind", None, &mut diags);
    let output_prefix = f.string("output_prefix", None, &mut diags);
    if let Some(p) = &output_prefix {
        if p.is_empty() || p.ends_with('/') {
            diags.push("output_prefix: must name a file prefix".to_string());
        }
    }
    let spec = match f.object("spec", &mut diags) {
        Some(s) => parse_spec(s, &mut diags),
        None => {
            if !obj.contains_key("spec") {
                diags.push("spec: required field is missing".to_string());
            }
            None
        }
    };
    // Site indices can still be range-checked when only other spec fields are bad.
    let n_sites = spec.as_ref().map(ChainSpec::n_sites).or_else(|| {
        obj.get("spec")?
            .get("n_cells")?
            .as_u64()
            .filter(|&n| n >= 1 && n <= MAX_CELLS as u64)
            .map(|n| 2 * n as usize)
    });

    let scenario = match kind.as_deref() {
        Some("spectrum") => {
            parse_spectrum_params(&mut f, n_sites, &mut diags).map(Scenario::Spectrum)
        }
        Some("eigensweep") => {
            if let Some(s) = &spec {
                if s.bond_overrides().is_some() {
                    diags.push("spec.bond_overrides_khz: not supported by eigensweep".to_string());
                }
                if s.j_intra() <= 0.0 {
                    diags.push("spec.j_intra_khz: eigensweep needs a positive J1".to_string());
                }
            }
            parse_ratio_grid(&mut f, "ratio_grid", &mut diags)
                .map(|ratios| Scenario::Eigensweep { ratios })
        }
        Some("quench") => parse_quench(&mut f, n_sites, &mut diags).map(Scenario::Quench),
        Some("chiral") => {
            let quench = parse_quench(&mut f, n_sites, &mut diags);
            let convention = parse_convention(&mut f, &mut diags);
            let sweep = match f.object("sweep", &mut diags) {
                Some(obj) => parse_sweep(obj, &mut diags).map(Some),
                None => Some(None),
            };
            if let (Some(Some(_)), Some(Convention::Absolute)) = (&sweep, convention) {
                diags.push("convention: sweeps always use the relative convention".to_string());
            }
            match (quench, convention, sweep) {
                (Some(quench), Some(convention), Some(sweep)) => Some(Scenario::Chiral {
                    quench,
                    convention,
                    sweep,
                }),
                _ => None,
            }
        }
        Some("bands") => f
            .usize_in("n_k", Some(181), 2..=10_000_000, &mut diags)
            .map(|n_k| Scenario::Bands { n_k }),
        Some("fit-roundtrip") => {
            let spectrum = parse_spectrum_params(&mut f, n_sites, &mut diags);
            let n_peaks = f.usize_in("n_peaks", n_sites, 1..=1000, &mut diags);
            let noise_amplitude = f.f64("noise_amplitude", Some(0.0), &mut diags);
            if noise_amplitude.is_some_and(|a| !(a >= 0.0 && a.is_finite())) {
                diags.push("noise_amplitude: must be finite and non-negative".to_string());
            }
            let noise_seed = f.u64("noise_seed", Some(0), &mut diags);
            let max_iter = f.usize_in("max_iter", Some(200), 1..=1_000_000, &mut diags);
            let tol = f.positive("tol", Some(1e-10), &mut diags);
            match (
                spectrum,
                n_peaks,
                noise_amplitude,
                noise_seed,
                max_iter,
                tol,
            ) {
                (
                    Some(spectrum),
                    Some(n_peaks),
                    Some(noise_amplitude),
                    Some(noise_seed),
                    Some(max_iter),
                    Some(tol),
                ) => Some(Scenario::FitRoundtrip(FitParams {
                    spectrum,
                    n_peaks,
                    noise_amplitude,
                    noise_seed,
                    max_iter,
                    tol,
                })),
                _ => None,
            }
        }
        Some("disorder") => parse_disorder(&mut f, n_sites, &mut diags).map(Scenario::Disorder),
        Some(other) => {
            diags.push(format!(
                "kind: unknown scenario \"{other}\" (expected spectrum, eigensweep, quench, chiral, bands, fit-roundtrip or disorder)"
            ));
            None
        }
        None => None,
    };
    f.finish(&mut diags);

    match (spec, output_prefix, scenario) {
        (Some(spec), Some(output_prefix), Some(scenario)) if diags.is_empty() => {
            Ok(ScenarioConfig {
                spec,
                output_prefix,
                scenario,
            })
        }
        _ => {
            if diags.is_empty() {
                diags.push("config: invalid".to_string());
            }
            Err(diags)
        }
    }
}
