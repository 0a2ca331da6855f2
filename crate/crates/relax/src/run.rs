//! Mode dispatch and result records.

use std::f64::consts::SQRT_2;
use std::path::PathBuf;
use std::time::Instant;

use moire_core::atomistic::{
    compare_at, inter_for_eta, relative_displacement, relax_atomistic, AtomisticSystem,
    ComparisonOptions, ComparisonRow,
};
use moire_core::{
    lattice_counts, params_from_eta, relaxed_disregistry, DimensionlessGroups, DisplacementField,
    Grid, GsfeFunctional, LineSearch, ModelParams, RelaxationResult,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Mode, RunConfig};
use crate::error::CliError;
use crate::output::{emit_csv, emit_svg, write_atomic, Cell, Plot, Series};

/// Dimensionless summary of a parameter set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupsRecord {
    pub a_m_nm: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub eta: f64,
    pub eta_abstract: f64,
    pub layer1_atoms: usize,
    pub layer2_atoms: usize,
}

impl GroupsRecord {
    pub fn from_params(params: &ModelParams) -> Result<Self, CliError> {
        let DimensionlessGroups {
            epsilon,
            delta_ratio,
            eta,
        } = params.dimensionless();
        let (m, n) =
            lattice_counts(params).map_err(|e| CliError::numerical("lattice counts", e))?;
        Ok(Self {
            a_m_nm: params.moire_period(),
            epsilon,
            delta: delta_ratio,
            eta,
            eta_abstract: params.dimensionless().eta_abstract(),
            layer1_atoms: m,
            layer2_atoms: n,
        })
    }
}

/// Outcome of one relaxation within a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryRecord {
    pub label: String,
    pub energy: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub mode: Mode,
    /// The resolved configuration, flags applied.
    pub config: RunConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub groups: Option<GroupsRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    pub converged: bool,
    pub entries: Vec<EntryRecord>,
    pub files: Vec<PathBuf>,
    pub wall_time_s: f64,
}

impl ResultRecord {
    /// Process exit code for a completed run.
    pub fn exit_code(&self, allow_nonconverged: bool) -> i32 {
        if self.converged || allow_nonconverged {
            0
        } else {
            3
        }
    }
}

/// Name of the record written next to the other outputs.
pub const RESULT_FILE: &str = "result.json";

struct Outputs {
    dir: PathBuf,
    files: Vec<PathBuf>,
    svg: bool,
}

impl Outputs {
    fn csv(&mut self, name: &str, header: &[&str], rows: Vec<Vec<Cell>>) -> Result<(), CliError> {
        let header: Vec<String> = header.iter().map(|h| h.to_string()).collect();
        self.csv_owned(name, &header, rows)
    }

    fn csv_owned(
        &mut self,
        name: &str,
        header: &[String],
        rows: Vec<Vec<Cell>>,
    ) -> Result<(), CliError> {
        self.files
            .push(emit_csv(header, &rows, &self.dir.join(name))?);
        Ok(())
    }

    fn svg(&mut self, name: &str, plot: Plot) -> Result<(), CliError> {
        if self.svg {
            self.files.push(emit_svg(&plot, &self.dir.join(name))?);
        }
        Ok(())
    }
}

struct ModeResult {
    groups: Option<GroupsRecord>,
    entries: Vec<EntryRecord>,
}

/// Runs the configured mode, writes its outputs and `result.json` into the
/// output directory, and returns the record.
pub fn run(config: &RunConfig) -> Result<ResultRecord, CliError> {
    config.validate()?;
    let mode = config.mode()?;
    let start = Instant::now();
    let mut out = Outputs {
        dir: config.output_dir.clone(),
        files: Vec::new(),
        svg: config.emit_svg,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Config {
            path: "jobs".into(),
            message: e.to_string(),
        })?;
    let result = pool.install(|| match mode {
        Mode::GsfeRelax => gsfe_relax(config, &mut out),
        Mode::EtaSweep => eta_sweep(config, &mut out),
        Mode::AtomisticRelax => atomistic_relax(config, &mut out),
        Mode::DeriveParams => derive_params(config, &mut out),
        Mode::ConvergenceStudy => convergence_study(config, &mut out),
    })?;

    let single = (result.entries.len() == 1).then(|| &result.entries[0]);
    let result_path = out.dir.join(RESULT_FILE);
    out.files.push(result_path.clone());
    let record = ResultRecord {
        mode,
        config: config.clone(),
        groups: result.groups,
        energy: single.map(|e| e.energy),
        iterations: single.map(|e| e.iterations),
        converged: result.entries.iter().all(|e| e.converged),
        entries: result.entries,
        files: out.files,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    let json = serde_json::to_string_pretty(&record).expect("record serializes");
    write_atomic(&result_path, json.as_bytes())?;
    Ok(record)
}

fn initial_field(config: &RunConfig, grid: Grid, a: f64) -> DisplacementField {
    match config.seed {
        Some(seed) if config.perturbation_over_a > 0.0 => {
            DisplacementField::perturbed(grid, config.perturbation_over_a * a, seed)
        }
        _ => DisplacementField::zeros(grid),
    }
}

fn relax_gsfe(
    config: &RunConfig,
    params: &ModelParams,
    label: &str,
) -> Result<RelaxationResult, CliError> {
    let context = |e| CliError::numerical(label, e);
    let grid = Grid::moire(config.grid_n, params).map_err(context)?;
    let functional = GsfeFunctional::dimensional(params, grid).map_err(context)?;
    let opts = config.optimizer.options(
        functional.stiffness(),
        moire_core::gsfe::DEFAULT_RELATIVE_TOLERANCE,
        LineSearch::ArmijoBacktracking,
    );
    let mut result = functional
        .relax(&initial_field(config, grid, params.a()), &opts)
        .map_err(context)?;
    if params.v0() == 0.0 {
        // Every constant field is a minimizer; report the one with zero mean.
        let mean = result.field.values.iter().sum::<f64>() / grid.n_points() as f64;
        result.field.values.iter_mut().for_each(|u| *u -= mean);
    }
    Ok(result)
}

/// Linear interpolation of a periodic grid field at position `x`.
fn interpolate(field: &DisplacementField, x: f64) -> f64 {
    let t = (x - field.grid.origin()) / field.grid.dx();
    let k = t.floor();
    let frac = t - k;
    let k = k as isize;
    field.value(k) * (1.0 - frac) + field.value(k + 1) * frac
}

/// Atom positions of one moire cell before and after relaxation, with
/// `u_1 = u / sqrt(2)` and `u_2 = -u / sqrt(2)`.
fn gsfe_atom_rows(
    field: &DisplacementField,
    params: &ModelParams,
) -> Result<Vec<Vec<Cell>>, CliError> {
    let (m, n) = lattice_counts(params).map_err(|e| CliError::numerical("lattice counts", e))?;
    let a = params.a();
    let spacing2 = (1.0 - params.theta()) * a;
    let mut rows = Vec::with_capacity(m + n);
    for (layer, count, spacing, sign) in [(1usize, m, a, 1.0), (2, n, spacing2, -1.0)] {
        for i in 0..count {
            let x = i as f64 * spacing;
            let u = sign * interpolate(field, x) / SQRT_2;
            rows.push(vec![
                Cell::from(layer),
                Cell::from(i),
                Cell::from(x / a),
                Cell::from((x + u) / a),
            ]);
        }
    }
    Ok(rows)
}

const ATOM_HEADER: [&str; 4] = ["layer", "index", "x_unrelaxed_over_a", "x_relaxed_over_a"];

fn gsfe_relax(config: &RunConfig, out: &mut Outputs) -> Result<ModeResult, CliError> {
    let params = config.model_params()?;
    let result = relax_gsfe(config, &params, "gsfe-relax")?;
    let profile = relaxed_disregistry(&result.field, &params);
    let (a, a_m) = (params.a(), params.moire_period());
    let rows: Vec<Vec<Cell>> = (0..profile.x.len())
        .map(|i| {
            vec![
                Cell::from(profile.x[i] / a_m),
                Cell::from(result.field.value(i as isize) / a),
                Cell::from(profile.unreduced[i] / a),
                Cell::from(profile.reduced[i] / profile.period),
            ]
        })
        .collect();
    out.csv(
        "gsfe_relax.csv",
        &[
            "x_over_aM",
            "u_minus_over_a",
            "delta_unreduced_over_a",
            "delta_mod_over_period",
        ],
        rows,
    )?;
    out.csv(
        "gsfe_atoms.csv",
        &ATOM_HEADER,
        gsfe_atom_rows(&result.field, &params)?,
    )?;

    let eta = params.dimensionless().eta;
    let label = format!("eta = {eta:.3}");
    let xs: Vec<f64> = profile.x.iter().map(|x| x / a_m).collect();
    out.svg(
        "gsfe_u_minus.svg",
        Plot {
            title: "Relaxed displacement".into(),
            x_label: "x / a_M".into(),
            y_label: "u_- / a".into(),
            series: vec![Series::new(
                label.clone(),
                (0..xs.len())
                    .map(|i| (xs[i], result.field.value(i as isize) / a))
                    .collect(),
            )],
        },
    )?;
    out.svg(
        "gsfe_disregistry.svg",
        Plot {
            title: "Relaxed disregistry".into(),
            x_label: "x / a_M".into(),
            y_label: "delta mod period / period".into(),
            series: vec![Series::new(
                label,
                (0..xs.len())
                    .map(|i| (xs[i], profile.reduced[i] / profile.period))
                    .collect(),
            )],
        },
    )?;
    Ok(ModeResult {
        groups: Some(GroupsRecord::from_params(&params)?),
        entries: vec![EntryRecord {
            label: "gsfe".into(),
            energy: result.energy,
            iterations: result.iterations,
            converged: result.converged,
        }],
    })
}

fn eta_sweep(config: &RunConfig, out: &mut Outputs) -> Result<ModeResult, CliError> {
    let theta = config.theta_or_default()?;
    let a = config.a_nm()?;
    let etas = config.etas();
    let runs: Vec<(ModelParams, RelaxationResult)> = etas
        .par_iter()
        .map(|eta| {
            let label = format!("eta-sweep at eta = {eta}");
            let params =
                params_from_eta(*eta, theta, a).map_err(|e| CliError::numerical(&label, e))?;
            let result = relax_gsfe(config, &params, &label)?;
            Ok((params, result))
        })
        .collect::<Result<_, CliError>>()?;

    let a_m = runs[0].0.moire_period();
    let profiles: Vec<_> = runs
        .iter()
        .map(|(p, r)| relaxed_disregistry(&r.field, p))
        .collect();
    let xs: Vec<f64> = profiles[0].x.iter().map(|x| x / a_m).collect();
    let mut u_header = vec!["x_over_aM".to_string()];
    let mut d_header = vec!["x_over_aM".to_string()];
    for eta in &etas {
        u_header.push(format!("u_minus_over_a_eta_{eta}"));
        d_header.push(format!("delta_mod_over_period_eta_{eta}"));
    }
    let u_rows = (0..xs.len())
        .map(|i| {
            let mut row = vec![Cell::from(xs[i])];
            row.extend(
                runs.iter()
                    .map(|(_, r)| Cell::from(r.field.value(i as isize) / a)),
            );
            row
        })
        .collect();
    let d_rows = (0..xs.len())
        .map(|i| {
            let mut row = vec![Cell::from(xs[i])];
            row.extend(profiles.iter().map(|p| Cell::from(p.reduced[i] / p.period)));
            row
        })
        .collect();
    out.csv_owned("eta_sweep_u_minus.csv", &u_header, u_rows)?;
    out.csv_owned("eta_sweep_disregistry.csv", &d_header, d_rows)?;

    let u_series = etas
        .iter()
        .zip(&runs)
        .map(|(eta, (_, r))| {
            Series::new(
                format!("eta = {eta}"),
                (0..xs.len())
                    .map(|i| (xs[i], r.field.value(i as isize) / a))
                    .collect(),
            )
        })
        .collect();
    let d_series = etas
        .iter()
        .zip(&profiles)
        .map(|(eta, p)| {
            Series::new(
                format!("eta = {eta}"),
                (0..xs.len())
                    .map(|i| (xs[i], p.reduced[i] / p.period))
                    .collect(),
            )
        })
        .collect();
    out.svg(
        "eta_sweep_u_minus.svg",
        Plot {
            title: "Relaxed displacement".into(),
            x_label: "x / a_M".into(),
            y_label: "u_- / a".into(),
            series: u_series,
        },
    )?;
    out.svg(
        "eta_sweep_disregistry.svg",
        Plot {
            title: "Relaxed disregistry".into(),
            x_label: "x / a_M".into(),
            y_label: "delta mod period / period".into(),
            series: d_series,
        },
    )?;

    let entries = etas
        .iter()
        .zip(&runs)
        .map(|(eta, (_, r))| EntryRecord {
            label: format!("eta = {eta}"),
            energy: r.energy,
            iterations: r.iterations,
            converged: r.converged,
        })
        .collect();
    Ok(ModeResult {
        groups: None,
        entries,
    })
}

fn atomistic_relax(config: &RunConfig, out: &mut Outputs) -> Result<ModeResult, CliError> {
    let theta = config.theta_or_default()?;
    let eta = config.eta_or_default(1.0)?;
    let intra = config.intra_potential()?;
    let context = |e| CliError::numerical("atomistic-relax", e);
    let (inter, derived) =
        inter_for_eta(&intra, &config.inter_potential()?, theta, eta, 256).map_err(context)?;
    let mut system = AtomisticSystem::new(theta, intra, inter).map_err(context)?;
    if let Some(seed) = config.seed {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..system.dimension())
            .map(|_| config.perturbation_over_a * rng.gen_range(-1.0..1.0))
            .collect();
        system.set_state(&x).map_err(context)?;
    }
    let opts = config
        .optimizer
        .options(derived.kappa_tilde, 1e-12, LineSearch::StrongWolfe);
    let relaxed = relax_atomistic(&system, &opts).map_err(context)?;

    let (m, n) = system.counts();
    let mut rows = Vec::with_capacity(m + n);
    for (layer, displacements, spacing) in [
        (1usize, &relaxed.system.layer1, 1.0),
        (2, &relaxed.system.layer2, 1.0 - theta),
    ] {
        for (i, u) in displacements.iter().enumerate() {
            let x = i as f64 * spacing;
            rows.push(vec![
                Cell::from(layer),
                Cell::from(i),
                Cell::from(x),
                Cell::from(x + u),
            ]);
        }
    }
    out.csv("atomistic_atoms.csv", &ATOM_HEADER, rows)?;
    let u_minus = relative_displacement(&relaxed.system);
    out.csv(
        "atomistic_u_minus.csv",
        &["x_over_aM", "u_minus_over_a"],
        u_minus
            .iter()
            .enumerate()
            .map(|(i, u)| vec![Cell::from(i as f64 / m as f64), Cell::from(*u)])
            .collect(),
    )?;
    out.svg(
        "atomistic_u_minus.svg",
        Plot {
            title: "Relaxed relative displacement".into(),
            x_label: "x / a_M".into(),
            y_label: "u_- / a".into(),
            series: vec![Series::new(
                format!("eta = {eta}"),
                u_minus
                    .iter()
                    .enumerate()
                    .map(|(i, u)| (i as f64 / m as f64, *u))
                    .collect(),
            )],
        },
    )?;

    let epsilon = theta / (1.0 - theta);
    let delta = derived.v0_tilde / derived.kappa_tilde;
    Ok(ModeResult {
        groups: Some(GroupsRecord {
            a_m_nm: config.a_nm()? * (1.0 / theta - 1.0),
            epsilon,
            delta,
            eta,
            eta_abstract: if eta > 0.0 {
                1.0 / (eta * eta)
            } else {
                f64::INFINITY
            },
            layer1_atoms: m,
            layer2_atoms: n,
        }),
        entries: vec![EntryRecord {
            label: "atomistic".into(),
            energy: relaxed.energy,
            iterations: relaxed.iterations,
            converged: relaxed.converged,
        }],
    })
}

fn derive_params(config: &RunConfig, out: &mut Outputs) -> Result<ModeResult, CliError> {
    let params = config.model_params()?;
    let g = GroupsRecord::from_params(&params)?;
    out.csv(
        "derive_params.csv",
        &[
            "a_m_nm",
            "epsilon",
            "delta",
            "eta",
            "eta_abstract",
            "layer1_atoms",
            "layer2_atoms",
        ],
        vec![vec![
            Cell::from(g.a_m_nm),
            Cell::from(g.epsilon),
            Cell::from(g.delta),
            Cell::from(g.eta),
            Cell::from(g.eta_abstract),
            Cell::from(g.layer1_atoms),
            Cell::from(g.layer2_atoms),
        ]],
    )?;
    Ok(ModeResult {
        groups: Some(g),
        entries: Vec::new(),
    })
}

fn convergence_study(config: &RunConfig, out: &mut Outputs) -> Result<ModeResult, CliError> {
    let eta = config.eta_or_default(1.0)?;
    let intra = config.intra_potential()?;
    let inter = config.inter_potential()?;
    let thetas = config.thetas();
    let mut opts = ComparisonOptions {
        min_grid_points: config.grid_n,
        ..ComparisonOptions::default()
    };
    if let Some(max) = config.optimizer.max_iterations {
        opts.max_iterations = max;
    }
    let rows: Vec<ComparisonRow> = thetas
        .par_iter()
        .map(|theta| {
            compare_at(*theta, eta, &intra, &inter, &opts).map_err(|e| {
                CliError::numerical(format!("convergence-study at theta = {theta}"), e)
            })
        })
        .collect::<Result<_, _>>()?;

    out.csv(
        "convergence_study.csv",
        &["theta", "epsilon", "eta", "l2_error", "energy_gap", "atoms"],
        rows.iter()
            .map(|r| {
                vec![
                    Cell::from(r.theta),
                    Cell::from(r.epsilon),
                    Cell::from(r.eta),
                    Cell::from(r.l2_error),
                    Cell::from(r.energy_gap),
                    Cell::from(r.atoms),
                ]
            })
            .collect(),
    )?;
    let mut profile_rows = Vec::new();
    for r in &rows {
        for i in 0..r.atoms {
            profile_rows.push(vec![
                Cell::from(r.theta),
                Cell::from(i as f64 / r.atoms as f64),
                Cell::from(r.atomistic_profile[i]),
                Cell::from(r.continuum_profile[i]),
            ]);
        }
    }
    out.csv(
        "convergence_profiles.csv",
        &[
            "theta",
            "x_over_aM",
            "atomistic_u_minus_over_a",
            "continuum_u_minus_over_a",
        ],
        profile_rows,
    )?;

    let profile = |r: &ComparisonRow, values: &[f64]| -> Vec<(f64, f64)> {
        values
            .iter()
            .enumerate()
            .map(|(i, u)| (i as f64 / r.atoms as f64, *u))
            .collect()
    };
    let mut series: Vec<Series> = rows
        .iter()
        .map(|r| {
            Series::new(
                format!("atomistic, eps = {:.4}", r.epsilon),
                profile(r, &r.atomistic_profile),
            )
        })
        .collect();
    if let Some(last) = rows.last() {
        series.push(Series::new(
            "continuum",
            profile(last, &last.continuum_profile),
        ));
    }
    out.svg(
        "convergence_profiles.svg",
        Plot {
            title: format!("Atomistic and continuum relaxation, eta = {eta}"),
            x_label: "x / a_M".into(),
            y_label: "u_- / a".into(),
            series,
        },
    )?;
    out.svg(
        "convergence_errors.svg",
        Plot {
            title: "Distance between atomistic and continuum minimizers".into(),
            x_label: "epsilon".into(),
            y_label: "error".into(),
            series: vec![
                Series::new(
                    "l2 error",
                    rows.iter().map(|r| (r.epsilon, r.l2_error)).collect(),
                ),
                Series::new(
                    "energy gap",
                    rows.iter().map(|r| (r.epsilon, r.energy_gap)).collect(),
                ),
            ],
        },
    )?;

    let entries = rows
        .iter()
        .map(|r| EntryRecord {
            label: format!("theta = {}", r.theta),
            energy: r.atomistic_energy,
            iterations: r.atomistic_iterations,
            converged: r.converged,
        })
        .collect();
    Ok(ModeResult {
        groups: None,
        entries,
    })
}
