use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::config::{DisorderObservable, Scenario, ScenarioConfig, SpectrumParams};
use crate::disorder::{ensemble_statistics, Observable};
use crate::dynamics::{
    chiral_displacement, diagonal_ensemble_average, evolve_eig, ideal_winding,
    mean_chiral_operator, winding_sweep, TimeGrid,
};
use crate::error::{Error, Result};
use crate::fitting::{
    add_uniform_noise, eigenenergies_from_fit, fit_lorentzians, seed_guesses, FitOptions,
};
use crate::lattice::ChainSpec;
use crate::par::{map_indexed, Execution};
use crate::spectra::{
    band_energy, band_structure, broaden, eigensystem, stick_spectrum, DetuningGrid, SpectrumTrace,
    StickSpectrum,
};

pub const TOOL: &str = "ssh-sim";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Environment variable that redirects every output file into one directory.
pub const OUT_DIR_ENV: &str = "SSH_SIM_OUT_DIR";

/// Machine-readable summary of one run.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub scenario: String,
    pub config_hash: String,
    pub outputs: Vec<PathBuf>,
    pub wall_time_ms: u128,
}

/// Short SHA-256 of the canonical (key-sorted, compact) form of a config value.
pub fn config_hash(value: &Value) -> String {
    let canonical = serde_json::to_string(value).expect("JSON values always serialize");
    Sha256::digest(canonical.as_bytes())
        .iter()
        .take(8)
        .fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}

struct Writer<'a> {
    prefix: PathBuf,
    hash: &'a str,
    written: Vec<PathBuf>,
}

impl Writer<'_> {
    fn path(&self, suffix: &str) -> PathBuf {
        let mut name = self.prefix.file_name().unwrap_or_default().to_os_string();
        name.push(suffix);
        self.prefix.with_file_name(name)
    }

    fn write(&mut self, suffix: &str, body: &str) -> Result<()> {
        let path = self.path(suffix);
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        self.written.push(path);
        Ok(())
    }

    fn csv(&mut self, suffix: &str, table: &str) -> Result<()> {
        let body = format!("# {TOOL} {VERSION} config_hash={}\n{table}", self.hash);
        self.write(suffix, &body)
    }

    fn json(&mut self, suffix: &str, mut value: Value) -> Result<()> {
        value
            .as_object_mut()
            .expect("outputs are JSON objects")
            .insert(
                "provenance".into(),
                json!({"tool": TOOL, "version": VERSION, "config_hash": self.hash}),
            );
        let mut body = serde_json::to_string_pretty(&value).expect("JSON values always serialize");
        body.push('\n');
        self.write(suffix, &body)
    }
}

/// Resolves the output prefix, honouring a directory override.
pub fn output_prefix(config: &ScenarioConfig, out_dir: Option<&Path>) -> PathBuf {
    let prefix = PathBuf::from(&config.output_prefix);
    match out_dir {
        Some(dir) => dir.join(prefix.file_name().unwrap_or_default()),
        None => prefix,
    }
}

/// Runs a parsed scenario. `raw` is the config as read, used for the provenance hash.
pub fn run_scenario(
    config: &ScenarioConfig,
    raw: &Value,
    out_dir: Option<&Path>,
) -> Result<RunSummary> {
    let start = Instant::now();
    let hash = config_hash(raw);
    let mut w = Writer {
        prefix: output_prefix(config, out_dir),
        hash: &hash,
        written: Vec::new(),
    };
    let spec = &config.spec;
    match &config.scenario {
        Scenario::Spectrum(p) => {
            let (sticks, trace) = synthesize(spec, p)?;
            w.csv("_trace.csv", &trace.to_csv())?;
            w.json(
                "_sticks.json",
                serde_json::to_value(&sticks).expect("sticks serialize"),
            )?;
        }
        Scenario::Eigensweep { ratios } => {
            w.csv("_eigensweep.csv", &eigensweep_table(spec, ratios))?
        }
        Scenario::Quench(q) => {
            let traj = evolve_eig(
                &eigensystem(spec),
                q.initial_site,
                &TimeGrid::new(q.t_max_us, q.dt_us)?,
                Execution::default(),
            )?;
            w.csv("_populations.csv", &traj.to_csv())?;
        }
        Scenario::Chiral {
            quench,
            convention,
            sweep: None,
        } => {
            let eig = eigensystem(spec);
            let grid = TimeGrid::new(quench.t_max_us, quench.dt_us)?;
            let traj = evolve_eig(&eig, quench.initial_site, &grid, Execution::default())?;
            let series = chiral_displacement(&traj, *convention);
            let op = mean_chiral_operator(spec.n_cells(), quench.initial_site, *convention);
            w.csv("_chiral.csv", &series.to_csv())?;
            w.json(
                "_summary.json",
                json!({
                    "spec": spec,
                    "initial_site": quench.initial_site,
                    "convention": convention,
                    "t_avg_us": quench.t_max_us,
                    "winding_estimate": series.final_average(),
                    "diagonal_ensemble": diagonal_ensemble_average(&eig, quench.initial_site, &op)?,
                    "ideal_winding": ideal_winding(spec.j_intra(), spec.j_inter()).ok(),
                }),
            )?;
        }
        Scenario::Chiral {
            quench,
            sweep: Some(sweep),
            ..
        } => {
            let rates: Vec<(f64, f64)> = sweep.points.iter().map(|p| (p.1, p.2)).collect();
            let results = winding_sweep(
                spec.n_cells(),
                &rates,
                quench.initial_site,
                quench.t_max_us,
                Execution::default(),
            )?;
            let mut table =
                String::from("group,j1_khz,j2_khz,ratio,c_bar,diagonal_ensemble,ideal_winding\n");
            for ((group, j1, j2), r) in sweep.points.iter().zip(&results) {
                let _ = writeln!(
                    table,
                    "{group},{j1},{j2},{},{},{},{}",
                    j1 / j2,
                    r.c_bar,
                    r.diagonal_ensemble,
                    r.ideal
                );
            }
            w.csv("_sweep.csv", &table)?;
        }
        Scenario::Bands { n_k } => {
            w.csv(
                "_bands.csv",
                &band_structure(spec.j_intra(), spec.j_inter(), *n_k)?.to_csv(),
            )?;
        }
        Scenario::FitRoundtrip(p) => {
            let (sticks, clean) = synthesize(spec, &p.spectrum)?;
            let trace = if p.noise_amplitude > 0.0 {
                add_uniform_noise(&clean, p.noise_amplitude, p.noise_seed)
            } else {
                clean
            };
            let seed = seed_guesses(&trace, p.n_peaks)?;
            let fit = fit_lorentzians(
                &trace,
                &seed,
                FitOptions {
                    max_iter: p.max_iter,
                    tol: p.tol,
                },
            )?;
            let mut summary = serde_json::to_value(&fit).expect("fit serializes");
            let obj = summary.as_object_mut().expect("fit is an object");
            if spec.j_intra() > 0.0 {
                obj.insert(
                    "eigenenergies_over_j1".into(),
                    json!(eigenenergies_from_fit(&fit, spec.j_intra())?),
                );
            }
            obj.insert(
                "sticks".into(),
                serde_json::to_value(&sticks).expect("sticks serialize"),
            );
            w.csv("_trace.csv", &trace.to_csv())?;
            w.json("_fit.json", summary)?;
        }
        Scenario::Disorder(d) => {
            let observable = match &d.observable {
                DisorderObservable::Eigenvalues => Observable::Eigenvalues,
                DisorderObservable::WindingEstimate {
                    initial_site,
                    t_avg_us,
                } => Observable::WindingEstimate {
                    initial_site: *initial_site,
                    t_avg_us: *t_avg_us,
                },
                DisorderObservable::Spectrum(p) => {
                    let sticks = stick_spectrum(&eigensystem(spec), p.probe_site)?;
                    Observable::Spectrum {
                        probe_site: p.probe_site,
                        fwhm_khz: p.fwhm_khz,
                        grid: DetuningGrid::covering(&sticks, p.fwhm_khz, p.grid_step_khz)?,
                    }
                }
            };
            let stats = ensemble_statistics(spec, &d.model, d.n_samples, &observable)?;
            w.csv("_ensemble.csv", &stats.to_csv())?;
        }
    }
    Ok(RunSummary {
        scenario: config.kind().to_string(),
        config_hash: hash.clone(),
        outputs: w.written,
        wall_time_ms: start.elapsed().as_millis(),
    })
}

fn synthesize(spec: &ChainSpec, p: &SpectrumParams) -> Result<(StickSpectrum, SpectrumTrace)> {
    let sticks = stick_spectrum(&eigensystem(spec), p.probe_site)?;
    let grid = DetuningGrid::covering(&sticks, p.fwhm_khz, p.grid_step_khz)?;
    let trace = broaden(&sticks, p.fwhm_khz, &grid)?;
    Ok((sticks, trace))
}

/// Eigenvalues in units of J1 across `J1/J2` ratios at fixed `J1`, plus the infinite-chain band edges.
fn eigensweep_table(spec: &ChainSpec, ratios: &[f64]) -> String {
    let j1 = spec.j_intra();
    let n_sites = spec.n_sites();
    let rows = map_indexed(ratios.len(), Execution::default(), |i| {
        let j2 = j1 / ratios[i];
        let s = ChainSpec::with_details(spec.n_cells(), j1, j2, None, spec.onsite().to_vec())
            .expect("rates derived from a valid spec");
        let eig = eigensystem(&s);
        let mut row = format!("{},{j1},{j2}", ratios[i]);
        for e in eig.eigenvalues() {
            let _ = write!(row, ",{}", e / j1);
        }
        let inner = band_energy(j1, j2, std::f64::consts::PI) / j1;
        let outer = band_energy(j1, j2, 0.0) / j1;
        let gap = eig.eigenvalues()[spec.n_cells()] - eig.eigenvalues()[spec.n_cells() - 1];
        let _ = writeln!(row, ",{inner},{outer},{gap}");
        row
    });
    let mut table = String::from("ratio,j1_khz,j2_khz");
    for i in 1..=n_sites {
        let _ = write!(table, ",e{i}_over_j1");
    }
    table.push_str(",band_inner_over_j1,band_outer_over_j1,innermost_gap_khz\n");
    table.extend(rows);
    table
}
