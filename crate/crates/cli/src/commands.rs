use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use gkp_core::bloch::{candidate_pool_size, core_states, greedy_tour, order_greedy, random_unit_vectors, sample_sphere};
use gkp_core::fock::{eigen_residual, ground_state};
use gkp_core::gaussian::{gaussian_bound, gaussian_expectation, minimize_over_gaussians, GaussianSearch};
use gkp_core::homodyne::{estimate_witness, TERM_LABELS};
use gkp_core::operators::{build_operator_set, stabilizer_power, Stabilizer};
use gkp_core::sweep::{
    diagonal_minima, extrapolate_slope, logical_subspace_identity_check, normalize_matrix, regression_per_cutoff,
    resume_sweep, DiagonalReport, SweepRecord, WindowFit,
};
use gkp_core::wigner::{wigner, WignerHeader};
use gkp_core::{Atlas, BlochVector, FockVector, GaussianPureParams, GkpError, HermitianMatrix};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::{
    parse_bloch, parse_grid, AnalyzeArgs, BoundArgs, GroundstateArgs, MeasureArgs, MeasuredState, RunConfig, SweepArgs,
};
use crate::error::{CliError, CliResult};
use crate::output::{num, Metadata, OutputDir};

pub const SCHEMA_VERSION: u32 = 1;
pub const SWEEP_FILE: &str = "sweep.json";

/// Relative tolerance above which a Wigner grid is reported as not
/// containing the state.
const WIGNER_DEFICIT_NOTICE: f64 = 1e-4;

macro_rules! say {
    ($config:expr, $($arg:tt)*) => {
        if !$config.quiet {
            println!($($arg)*);
        }
    };
}

macro_rules! notice {
    ($config:expr, $($arg:tt)*) => {
        if !$config.quiet {
            eprintln!($($arg)*);
        }
    };
}

fn open_output<T: Serialize>(command: &str, config: &RunConfig, options: &T) -> CliResult<OutputDir> {
    OutputDir::create(&config.output_dir, Metadata::new(command, config, options)?)
}

#[derive(Serialize)]
struct NoOptions {}

fn bloch_json(u: &BlochVector) -> [f64; 3] {
    u.as_array()
}

#[derive(Serialize)]
struct AtlasSummary {
    count: usize,
    core_count: usize,
    candidate_pool: usize,
    delta: f64,
    seed: u64,
    /// Sampling indices in tour order.
    tour: Vec<usize>,
}

pub fn cmd_atlas(config: &RunConfig) -> CliResult<Vec<PathBuf>> {
    let out = open_output("atlas", config, &NoOptions {})?;
    let atlas = sample_sphere(config.delta, config.seed)?;
    let tour = greedy_tour(&atlas)?;
    let mut position = vec![0; atlas.len()];
    for (pos, &i) in tour.iter().enumerate() {
        position[i] = pos;
    }
    let rows = atlas.points.iter().enumerate().map(|(i, u)| {
        vec![
            i.to_string(),
            atlas.labels[i].clone().unwrap_or_default(),
            num(u.ux),
            num(u.uy),
            num(u.uz),
            position[i].to_string(),
        ]
    });
    let csv = out.write_csv("atlas.csv", &["index", "label", "ux", "uy", "uz", "order_position"], rows)?;
    let summary = AtlasSummary {
        count: atlas.len(),
        core_count: atlas.labels.iter().filter(|l| l.is_some()).count(),
        candidate_pool: candidate_pool_size(config.delta),
        delta: config.delta,
        seed: config.seed,
        tour,
    };
    let json = out.write_json("atlas.json", &summary)?;
    say!(config, "atlas: {} points ({} core) at delta = {}", summary.count, summary.core_count, config.delta);
    Ok(vec![csv, json])
}

#[derive(Serialize)]
struct GroundstateSummary {
    label: Option<String>,
    u: [f64; 3],
    cutoff: usize,
    energy: f64,
    eigen_residual: f64,
    /// `⟨O_1⟩, ⟨O_x⟩, ⟨O_y⟩, ⟨O_z⟩`
    components: [f64; 4],
    probe_bloch: [f64; 3],
    mean_photon_number: f64,
    gaussian_bound: f64,
    below_gaussian_bound: bool,
}

#[derive(Serialize)]
struct WignerSummary {
    #[serde(flatten)]
    header: WignerHeader,
    mass_deficit: f64,
    cutoff: usize,
    u: [f64; 3],
}

pub fn cmd_groundstate(config: &RunConfig, args: &GroundstateArgs) -> CliResult<Vec<PathBuf>> {
    let (label, u) = parse_bloch(&args.u)?;
    let grid = if args.wigner { Some(parse_grid(&args.grid)?) } else { None };
    let out = open_output("groundstate", config, args)?;
    let n = args.cutoff;
    let set = build_operator_set(n)?;
    let op = set.target(&u)?;
    let (energy, state) = ground_state(&op)?;
    let components = set.component_expectations(&state)?;
    let summary = GroundstateSummary {
        label,
        u: bloch_json(&u),
        cutoff: n,
        energy,
        eigen_residual: eigen_residual(&op, energy, &state)?,
        components,
        probe_bloch: [components[1], components[2], components[3]],
        mean_photon_number: state.amplitudes().iter().enumerate().map(|(k, c)| k as f64 * c.norm_sqr()).sum(),
        gaussian_bound: gaussian_bound(&u),
        below_gaussian_bound: energy < gaussian_bound(&u),
    };
    let mut files = Vec::new();
    let rows = state.amplitudes().iter().enumerate().map(|(k, c)| vec![k.to_string(), num(c.re), num(c.im)]);
    files.push(out.write_csv(&format!("groundstate_N{n}.csv"), &["n", "re", "im"], rows)?);
    files.push(out.write_json(&format!("groundstate_N{n}.json"), &summary)?);
    say!(config, "ground energy at N = {n}: {energy} (Gaussian bound {})", summary.gaussian_bound);

    if let Some(axis) = grid {
        let w = wigner(&state, &axis, &axis)?;
        let deficit = w.mass_deficit();
        if deficit.abs() > WIGNER_DEFICIT_NOTICE {
            notice!(config, "notice: Wigner grid captures {:.6} of the state; widen --grid", 1.0 - deficit);
        }
        let rows = w.xs.iter().zip(&w.values).flat_map(|(x, row)| {
            w.ps.iter().zip(row).map(move |(p, v)| vec![num(*x), num(*p), num(*v)])
        });
        files.push(out.write_csv(&format!("wigner_N{n}.csv"), &["x", "p", "W"], rows)?);
        let ws = WignerSummary { header: w.header(), mass_deficit: deficit, cutoff: n, u: bloch_json(&u) };
        files.push(out.write_json(&format!("wigner_N{n}.json"), &ws)?);
    }
    Ok(files)
}

#[derive(Serialize, Deserialize)]
pub struct SweepFile {
    pub schema_version: u32,
    pub record: SweepRecord,
}

#[derive(Serialize)]
struct SweepFileRef<'a> {
    schema_version: u32,
    record: &'a SweepRecord,
}

/// Reads a sweep file, rejecting anything but the current schema version.
pub fn load_sweep(path: &Path) -> CliResult<SweepRecord> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let schema = |message: String| CliError::Schema { path: path.to_path_buf(), message };
    let doc: Value = serde_json::from_str(&text).map_err(|e| schema(format!("not a valid sweep file: {e}")))?;
    match doc.get("schema_version").and_then(Value::as_u64) {
        Some(v) if v == SCHEMA_VERSION as u64 => {}
        Some(v) => return Err(schema(format!("unsupported schema version {v}; this build reads {SCHEMA_VERSION}"))),
        None => return Err(schema("missing schema_version".into())),
    }
    let file: SweepFile = serde_json::from_value(doc).map_err(|e| schema(format!("malformed sweep record: {e}")))?;
    Ok(file.record)
}

pub fn sweep_atlas(config: &RunConfig, core_only: bool) -> CliResult<Atlas> {
    if core_only {
        return Ok(Atlas::core());
    }
    Ok(order_greedy(&sample_sphere(config.delta, config.seed)?)?)
}

pub fn cmd_sweep(config: &RunConfig, args: &SweepArgs) -> CliResult<Vec<PathBuf>> {
    let atlas = sweep_atlas(config, args.core_only)?;
    let out = open_output("sweep", config, args)?;
    let path = out.path(SWEEP_FILE);
    let fresh = SweepRecord::empty(atlas, config.cutoffs.clone())?;
    let record = if args.resume && path.exists() {
        let existing = load_sweep(&path)?;
        if existing.atlas != fresh.atlas || existing.cutoffs != fresh.cutoffs {
            return Err(CliError::Invalid(format!(
                "{} was produced with a different atlas or cutoff list; remove it or drop --resume",
                path.display()
            )));
        }
        notice!(config, "resuming: {} of {} cutoffs already present", existing.expectation.len(), existing.cutoffs.len());
        existing
    } else {
        fresh
    };
    let total = record.cutoffs.len();
    let m = record.atlas.len();
    let write = |r: &SweepRecord| -> CliResult<PathBuf> {
        out.write_json_compact(SWEEP_FILE, &SweepFileRef { schema_version: SCHEMA_VERSION, record: r })
    };
    let mut io_failure = None;
    let result = resume_sweep(record, config.workers, |r| {
        let done = r.expectation.len();
        let last = r.expectation.keys().next_back().copied().unwrap_or(0);
        notice!(config, "N = {last} done ({done}/{total}, M = {m})");
        write(r).map(|_| ()).map_err(|e| {
            let msg = e.to_string();
            io_failure = Some(e);
            GkpError::NumericalFailure(msg)
        })
    });
    if let Some(e) = io_failure {
        return Err(e);
    }
    let record = result?;
    let written = write(&record)?;
    say!(config, "sweep: {m} Bloch vectors, {total} cutoffs -> {}", written.display());
    Ok(vec![written])
}

#[derive(Serialize)]
struct CutoffDiagnostics {
    cutoff: usize,
    diagonal: DiagonalReport,
    identity_deviation: f64,
    mean_probe_norm: f64,
    min_probe_norm: f64,
}

#[derive(Serialize)]
#[serde(tag = "status", rename_all = "lowercase")]
enum ExtrapolationOutcome {
    Fitted {
        m_infinity: f64,
        amplitude: f64,
        rate: f64,
        window_mean: f64,
        window_std: f64,
        window_min: usize,
        n_max: usize,
        windows: Vec<WindowFit>,
        failed_windows: Vec<(usize, String)>,
    },
    Skipped {
        reason: String,
    },
    Failed {
        reason: String,
    },
}

#[derive(Serialize)]
struct AnalysisSummary {
    source: PathBuf,
    atlas_size: usize,
    cutoffs: Vec<usize>,
    complete: bool,
    per_cutoff: Vec<CutoffDiagnostics>,
}

fn matrix_rows(m: &[Vec<f64>]) -> impl Iterator<Item = Vec<String>> + '_ {
    m.iter().enumerate().map(|(i, row)| std::iter::once(i.to_string()).chain(row.iter().map(|v| num(*v))).collect())
}

fn write_heatmaps(out: &OutputDir, stem: &str, m: &[Vec<f64>], files: &mut Vec<PathBuf>) -> CliResult<()> {
    let cols: Vec<String> = std::iter::once("row".to_string()).chain((0..m.len()).map(|j| j.to_string())).collect();
    let header: Vec<&str> = cols.iter().map(String::as_str).collect();
    files.push(out.write_csv(&format!("{stem}.csv"), &header, matrix_rows(m))?);
    match normalize_matrix(m) {
        Ok(n) => files.push(out.write_csv(&format!("{stem}_normalized.csv"), &header, matrix_rows(&n))?),
        Err(GkpError::DegenerateInput(msg)) => notice!(out.metadata().config, "notice: {stem} not normalized: {msg}"),
        Err(e) => return Err(e.into()),
    }
    Ok(())
}

pub fn cmd_analyze(config: &RunConfig, args: &AnalyzeArgs) -> CliResult<Vec<PathBuf>> {
    let source = args.input.clone().unwrap_or_else(|| config.output_dir.join(SWEEP_FILE));
    let record = load_sweep(&source)?;
    if record.expectation.is_empty() {
        return Err(CliError::Invalid(format!("{} holds no computed cutoff", source.display())));
    }
    let out = open_output("analyze", config, args)?;
    let mut files = Vec::new();

    let regression = regression_per_cutoff(&record, config.ksg_k)?;
    let rows = regression.iter().map(|(n, r)| {
        vec![n.to_string(), num(r.slope), num(r.intercept), num(r.correlation_error), num(r.mutual_information)]
    });
    files.push(out.write_csv(
        "regression.csv",
        &["N", "slope", "intercept", "correlation_error", "mutual_information"],
        rows,
    )?);

    let slopes: BTreeMap<usize, f64> = regression.iter().map(|(n, r)| (*n, r.slope)).collect();
    let n_max = *slopes.keys().next_back().expect("non-empty");
    let mut numerical_failure = None;
    let outcome = match extrapolate_slope(&slopes, args.window_min, n_max) {
        Ok(r) => ExtrapolationOutcome::Fitted {
            m_infinity: r.m_infinity,
            amplitude: r.amplitude,
            rate: r.rate,
            window_mean: r.window_mean,
            window_std: r.window_std,
            window_min: args.window_min,
            n_max,
            windows: r.windows,
            failed_windows: r.skipped,
        },
        Err(GkpError::DegenerateInput(reason)) => {
            notice!(config, "notice: slope extrapolation skipped: {reason}");
            ExtrapolationOutcome::Skipped { reason }
        }
        Err(e) => {
            let reason = e.to_string();
            notice!(config, "error: slope extrapolation failed: {reason}");
            numerical_failure = Some(CliError::Numerical(reason.clone()));
            ExtrapolationOutcome::Failed { reason }
        }
    };
    files.push(out.write_json("extrapolation.json", &outcome)?);

    write_heatmaps(&out, "heatmap_infidelity", &record.infidelity, &mut files)?;
    let mut per_cutoff = Vec::new();
    for (&n, e) in &record.expectation {
        write_heatmaps(&out, &format!("heatmap_expectation_N{n}"), e, &mut files)?;
        let norms: Vec<f64> =
            record.probe_bloch(n)?.iter().map(|b| (b[0] * b[0] + b[1] * b[1] + b[2] * b[2]).sqrt()).collect();
        per_cutoff.push(CutoffDiagnostics {
            cutoff: n,
            diagonal: diagonal_minima(e),
            identity_deviation: logical_subspace_identity_check(&record, n)?,
            mean_probe_norm: norms.iter().sum::<f64>() / norms.len() as f64,
            min_probe_norm: norms.iter().copied().fold(f64::INFINITY, f64::min),
        });
    }
    let rows = per_cutoff.iter().map(|d| {
        vec![
            d.cutoff.to_string(),
            d.diagonal.row_violations.len().to_string(),
            d.diagonal.column_violations.len().to_string(),
            num(d.identity_deviation),
            num(d.mean_probe_norm),
            num(d.min_probe_norm),
        ]
    });
    files.push(out.write_csv(
        "diagnostics.csv",
        &["N", "row_violations", "column_violations", "identity_deviation", "mean_probe_norm", "min_probe_norm"],
        rows,
    )?);
    let summary = AnalysisSummary {
        source,
        atlas_size: record.atlas.len(),
        cutoffs: record.expectation.keys().copied().collect(),
        complete: record.is_complete(),
        per_cutoff,
    };
    files.push(out.write_json("analysis.json", &summary)?);

    for (n, r) in &regression {
        say!(config, 
            "N = {n:>4}  slope {:.5}  intercept {:.5}  1-r {:.3e}  MI {:.3} nats",
            r.slope, r.intercept, r.correlation_error, r.mutual_information
        );
    }
    if let ExtrapolationOutcome::Fitted { m_infinity, window_mean, window_std, .. } = &outcome {
        say!(config, "m_inf = {m_infinity:.4} (window mean {window_mean:.4} ± {window_std:.4})");
    }
    match numerical_failure {
        Some(e) => Err(e),
        None => Ok(files),
    }
}

#[derive(Serialize)]
struct BoundRow {
    label: Option<String>,
    u: [f64; 3],
    analytic_bound: f64,
    numeric_min: f64,
    gap: f64,
    min_visited_gap: f64,
    argmin: GaussianPureParams,
}

#[derive(Serialize)]
struct BoundSummary {
    count: usize,
    budget: usize,
    r_max: f64,
    max_abs_gap: f64,
    min_visited_gap: f64,
    rows: Vec<BoundRow>,
}

pub fn cmd_bound(config: &RunConfig, args: &BoundArgs) -> CliResult<Vec<PathBuf>> {
    let mut targets: Vec<(Option<String>, BlochVector)> =
        args.u.iter().map(|s| parse_bloch(s)).collect::<CliResult<_>>()?;
    if args.core {
        targets.extend(core_states().into_iter().map(|(l, u)| (Some(l), u)));
    }
    targets.extend(random_unit_vectors(args.random, config.seed).into_iter().map(|u| (None, u)));
    if targets.is_empty() {
        return Err(CliError::Invalid("no Bloch vectors given; use --u, --core or --random".into()));
    }
    let out = open_output("bound", config, args)?;
    let search = GaussianSearch { r_max: config.r_max, ..GaussianSearch::default() };
    let mut rows = Vec::with_capacity(targets.len());
    for (label, u) in targets {
        let m = minimize_over_gaussians(&u, args.budget, config.seed, search)?;
        rows.push(BoundRow {
            label,
            u: bloch_json(&u),
            analytic_bound: m.bound,
            numeric_min: m.min_value,
            gap: m.min_value - m.bound,
            min_visited_gap: m.min_visited_gap,
            argmin: m.argmin,
        });
    }
    let csv_rows = rows.iter().map(|r| {
        vec![
            r.label.clone().unwrap_or_default(),
            num(r.u[0]),
            num(r.u[1]),
            num(r.u[2]),
            num(r.analytic_bound),
            num(r.numeric_min),
            num(r.gap),
            num(r.min_visited_gap),
            num(r.argmin.x0),
            num(r.argmin.p0),
            num(r.argmin.r),
            num(r.argmin.theta),
        ]
    });
    let csv = out.write_csv(
        "bound.csv",
        &[
            "label", "ux", "uy", "uz", "analytic_bound", "numeric_min", "gap", "min_visited_gap", "x0", "p0", "r",
            "theta",
        ],
        csv_rows,
    )?;
    let summary = BoundSummary {
        count: rows.len(),
        budget: args.budget,
        r_max: config.r_max,
        max_abs_gap: rows.iter().map(|r| r.gap.abs()).fold(0.0, f64::max),
        min_visited_gap: rows.iter().map(|r| r.min_visited_gap).fold(f64::INFINITY, f64::min),
        rows,
    };
    let json = out.write_json("bound.json", &summary)?;
    say!(config, 
        "bound: {} vectors, max |numeric - analytic| = {:.3e}, lowest visited gap = {:.3e}",
        summary.count, summary.max_abs_gap, summary.min_visited_gap
    );
    Ok(vec![csv, json])
}

#[derive(Serialize)]
struct TermReport {
    term: &'static str,
    moment: f64,
    std_error: f64,
    exact: f64,
}

#[derive(Serialize)]
struct MeasureSummary {
    label: Option<String>,
    u: [f64; 3],
    state: MeasuredState,
    cutoff: usize,
    counts_per_quadrature: usize,
    value: f64,
    std_error: f64,
    exact_value: f64,
    /// Present for the vacuum, whose expectation has a closed form.
    closed_form_value: Option<f64>,
    deviation_in_std_errors: f64,
    gaussian_bound: f64,
    margin_below_bound_in_std_errors: f64,
    certifies_non_gaussianity: bool,
    per_term: Vec<TermReport>,
}

/// Matrix expectations of the six cosines, in [`TERM_LABELS`] order.
fn exact_moments(state: &FockVector, cutoff: usize) -> CliResult<[f64; 6]> {
    let cos = |which, power| -> CliResult<f64> {
        Ok(HermitianMatrix::hermitize(stabilizer_power(which, power, cutoff)?).expectation(state)?)
    };
    Ok([
        cos(Stabilizer::Z, 2)?,
        cos(Stabilizer::Y, 2)?,
        cos(Stabilizer::X, 2)?,
        cos(Stabilizer::Z, 1)?,
        cos(Stabilizer::Y, 1)?,
        cos(Stabilizer::X, 1)?,
    ])
}

pub fn cmd_measure(config: &RunConfig, args: &MeasureArgs) -> CliResult<Vec<PathBuf>> {
    let (label, u) = parse_bloch(&args.u)?;
    if args.counts < 2 {
        return Err(CliError::Invalid("--counts must be at least 2".into()));
    }
    let out = open_output("measure", config, args)?;
    let n = args.cutoff;
    let set = build_operator_set(n)?;
    let op = set.target(&u)?;
    let (state, closed_form_value) = match args.state {
        MeasuredState::Groundstate => (ground_state(&op)?.1, None),
        MeasuredState::Vacuum => {
            (FockVector::vacuum(n)?, Some(gaussian_expectation(&GaussianPureParams::VACUUM, &u)))
        }
    };
    let exact_value = op.expectation(&state)?;
    let est = estimate_witness(&state, &u, args.counts, config.seed)?;
    let exact = exact_moments(&state, n)?;
    let bound = gaussian_bound(&u);
    let summary = MeasureSummary {
        label,
        u: bloch_json(&u),
        state: args.state,
        cutoff: n,
        counts_per_quadrature: args.counts,
        value: est.value,
        std_error: est.std_error,
        exact_value,
        closed_form_value,
        deviation_in_std_errors: (est.value - exact_value) / est.std_error,
        gaussian_bound: bound,
        margin_below_bound_in_std_errors: (bound - est.value) / est.std_error,
        certifies_non_gaussianity: bound - est.value > 4.0 * est.std_error,
        per_term: TERM_LABELS
            .iter()
            .zip(est.per_term.iter().zip(exact))
            .map(|(term, (m, exact))| TermReport { term, moment: m.moment, std_error: m.std_error, exact })
            .collect(),
    };
    let json = out.write_json("measure.json", &summary)?;
    say!(config, 
        "estimate {:.5} ± {:.5} (exact {:.5}, Gaussian bound {:.5})",
        summary.value, summary.std_error, exact_value, bound
    );
    Ok(vec![json])
}
