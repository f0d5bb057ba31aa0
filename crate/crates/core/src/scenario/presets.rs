/// Bundled scenario configs, `(name, JSON text)`.
pub const PRESETS: &[(&str, &str)] = &[
    (
        "uniform_spectrum",
        include_str!("../../presets/uniform_spectrum.json"),
    ),
    (
        "uniform_fit",
        include_str!("../../presets/uniform_fit.json"),
    ),
    (
        "uniform_fit_noisy",
        include_str!("../../presets/uniform_fit_noisy.json"),
    ),
    (
        "ratio_eigensweep",
        include_str!("../../presets/ratio_eigensweep.json"),
    ),
    (
        "topological_bands",
        include_str!("../../presets/topological_bands.json"),
    ),
    (
        "trivial_quench",
        include_str!("../../presets/trivial_quench.json"),
    ),
    (
        "trivial_chiral",
        include_str!("../../presets/trivial_chiral.json"),
    ),
    (
        "topological_chiral",
        include_str!("../../presets/topological_chiral.json"),
    ),
    (
        "winding_sweep",
        include_str!("../../presets/winding_sweep.json"),
    ),
    (
        "disorder_eigenvalues",
        include_str!("../../presets/disorder_eigenvalues.json"),
    ),
    (
        "disorder_winding",
        include_str!("../../presets/disorder_winding.json"),
    ),
];

/// Looks up a preset by name, accepting an optional `.json` suffix.
pub fn preset(name: &str) -> Option<&'static str> {
    let name = name.strip_suffix(".json").unwrap_or(name);
    PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| *text)
}
