//! Command-line arguments and the run configuration echoed into outputs.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gkp_core::bloch::core_states;
use gkp_core::BlochVector;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "gkp", version, about = "GKP target operators: ground states, sweeps, Gaussian bounds and homodyne estimates")]
pub struct Cli {
    #[command(flatten)]
    pub config: ConfigArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct ConfigArgs {
    /// Minimum angular separation of sampled Bloch vectors (radians).
    #[arg(long, global = true, default_value_t = 0.35)]
    pub delta: f64,
    /// Cutoffs as "start:stop:step" (inclusive) or a comma list.
    #[arg(long, global = true, default_value = "5:120:5")]
    pub cutoffs: String,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Largest squeezing magnitude visited by the Gaussian optimizer.
    #[arg(long = "rmax", global = true, default_value_t = gkp_core::gaussian::DEFAULT_R_MAX)]
    pub r_max: f64,
    /// Neighbour count of the KSG mutual-information estimator.
    #[arg(long = "ksg-k", global = true, default_value_t = gkp_core::sweep::DEFAULT_KSG_K)]
    pub ksg_k: usize,
    /// Output directory.
    #[arg(long, global = true, default_value = "gkp-out")]
    pub out: PathBuf,
    /// Suppress progress and summary output.
    #[arg(long, short, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample and order the Bloch-sphere atlas.
    Atlas,
    /// Ground state of the truncated target operator for one Bloch vector.
    Groundstate(GroundstateArgs),
    /// Expectation and infidelity matrices over the atlas for every cutoff.
    Sweep(SweepArgs),
    /// Regression, mutual information, extrapolation and heatmaps of a sweep.
    Analyze(AnalyzeArgs),
    /// Numerical minimum over pure Gaussian states against 5/3 − ‖u‖∞.
    Bound(BoundArgs),
    /// Simulated three-quadrature homodyne estimate of the target expectation.
    Measure(MeasureArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GroundstateArgs {
    /// Bloch vector: an alias (0, 1, +, -, +i, -i, H, a core label) or "ux,uy,uz".
    #[arg(short, long, allow_hyphen_values = true)]
    pub u: String,
    #[arg(long, default_value_t = 50)]
    pub cutoff: usize,
    /// Also write the Wigner function on --grid.
    #[arg(long)]
    pub wigner: bool,
    /// Wigner grid "min:max:count", shared by x and p.
    #[arg(long, default_value = "-6:6:121", allow_hyphen_values = true)]
    pub grid: String,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SweepArgs {
    /// Use the 26 core states instead of a sampled atlas.
    #[arg(long)]
    pub core_only: bool,
    /// Continue from an existing sweep.json in the output directory.
    #[arg(long)]
    #[serde(skip)]
    pub resume: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct AnalyzeArgs {
    /// Sweep file; defaults to sweep.json in the output directory.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Smallest window start for the slope extrapolation.
    #[arg(long, default_value_t = 21)]
    pub window_min: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BoundArgs {
    /// Bloch vectors (repeatable), same syntax as groundstate --u.
    #[arg(short, long = "u", allow_hyphen_values = true)]
    pub u: Vec<String>,
    /// Include the 26 core states.
    #[arg(long)]
    pub core: bool,
    /// Number of seeded random unit vectors to add.
    #[arg(long, default_value_t = 0)]
    pub random: usize,
    /// Objective evaluations per optimizer start.
    #[arg(long, default_value_t = 4000)]
    pub budget: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MeasuredState {
    /// Ground state of the target operator at --cutoff.
    Groundstate,
    Vacuum,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MeasureArgs {
    #[arg(short, long, allow_hyphen_values = true)]
    pub u: String,
    #[arg(long, default_value_t = 150)]
    pub cutoff: usize,
    /// Samples per quadrature.
    #[arg(long, default_value_t = 100_000)]
    pub counts: usize,
    #[arg(long, value_enum, default_value_t = MeasuredState::Groundstate)]
    pub state: MeasuredState,
}

/// Resolved configuration, echoed into every output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub delta: f64,
    pub cutoffs: Vec<usize>,
    pub seed: u64,
    pub workers: usize,
    pub r_max: f64,
    pub ksg_k: usize,
    pub output_dir: PathBuf,
    #[serde(skip)]
    pub quiet: bool,
}

impl RunConfig {
    pub fn resolve(args: &ConfigArgs) -> CliResult<Self> {
        let workers = match args.workers {
            Some(0) => return Err(CliError::Invalid("--workers must be at least 1".into())),
            Some(w) => w,
            None => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
        };
        if !(args.delta > 0.0) {
            return Err(CliError::Invalid(format!("--delta must be positive, got {}", args.delta)));
        }
        if !(args.r_max > 0.0) {
            return Err(CliError::Invalid(format!("--rmax must be positive, got {}", args.r_max)));
        }
        if args.ksg_k == 0 {
            return Err(CliError::Invalid("--ksg-k must be at least 1".into()));
        }
        Ok(Self {
            delta: args.delta,
            cutoffs: parse_cutoffs(&args.cutoffs)?,
            seed: args.seed,
            workers,
            r_max: args.r_max,
            ksg_k: args.ksg_k,
            output_dir: args.out.clone(),
            quiet: args.quiet,
        })
    }
}

/// `"5:150:5"` (inclusive), `"50,100,150"` or a single value.
pub fn parse_cutoffs(s: &str) -> CliResult<Vec<usize>> {
    let bad = || CliError::Invalid(format!("cannot parse cutoffs {s:?}"));
    let mut out: Vec<usize> = if s.contains(':') {
        let parts: Vec<usize> = s.split(':').map(|p| p.trim().parse().map_err(|_| bad())).collect::<CliResult<_>>()?;
        let [start, stop, step] = parts[..] else { return Err(bad()) };
        if step == 0 || start > stop {
            return Err(bad());
        }
        (start..=stop).step_by(step).collect()
    } else {
        s.split(',').map(|p| p.trim().parse().map_err(|_| bad())).collect::<CliResult<_>>()?
    };
    out.sort_unstable();
    out.dedup();
    if out.is_empty() || out[0] < 2 {
        return Err(CliError::Invalid(format!("cutoffs must be at least 2, got {s:?}")));
    }
    Ok(out)
}

/// `"min:max:count"` as an evenly spaced axis.
pub fn parse_grid(s: &str) -> CliResult<Vec<f64>> {
    let bad = || CliError::Invalid(format!("cannot parse grid {s:?}; expected \"min:max:count\""));
    let parts: Vec<&str> = s.split(':').collect();
    let [lo, hi, count] = parts[..] else { return Err(bad()) };
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    let count: usize = count.trim().parse().map_err(|_| bad())?;
    if !(hi > lo) || count < 2 {
        return Err(bad());
    }
    Ok(gkp_core::homodyne::linspace(lo, hi, count))
}

/// Resolves a Bloch-vector argument to `(label, u)`.
///
/// Components within 1e-6 of unit norm are renormalized; anything further
/// off is rejected.
pub fn parse_bloch(s: &str) -> CliResult<(Option<String>, BlochVector)> {
    let key = s.trim();
    let alias = match key {
        "0" => Some("0"),
        "1" => Some("1"),
        "+" => Some("+"),
        "-" => Some("-"),
        "+i" => Some("+i"),
        "-i" => Some("-i"),
        "H" => Some("H+x+y"),
        _ => None,
    };
    let wanted = alias.unwrap_or(key);
    if let Some((label, u)) = core_states().into_iter().find(|(l, _)| l == wanted) {
        return Ok((Some(if alias.is_some() { key.to_string() } else { label }), u));
    }
    let parts: Vec<f64> = key
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::Invalid(format!("unknown Bloch vector {s:?}")))?;
    let [x, y, z] = parts[..] else {
        return Err(CliError::Invalid(format!("Bloch vector {s:?} needs three components")));
    };
    let norm = (x * x + y * y + z * z).sqrt();
    if !((norm - 1.0).abs() <= 1e-6) {
        return Err(CliError::Invalid(format!("Bloch vector {s:?} has norm {norm}, expected 1")));
    }
    Ok((None, BlochVector::normalized(x, y, z)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cutoff_syntax() {
        assert_eq!(parse_cutoffs("5:20:5").unwrap(), vec![5, 10, 15, 20]);
        assert_eq!(parse_cutoffs("5:22:5").unwrap(), vec![5, 10, 15, 20]);
        assert_eq!(parse_cutoffs("100, 50,50").unwrap(), vec![50, 100]);
        assert_eq!(parse_cutoffs("30").unwrap(), vec![30]);
        for bad in ["", "5:1:1", "5:10:0", "a,b", "1", "5:10"] {
            assert!(parse_cutoffs(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn grid_syntax() {
        assert_eq!(parse_grid("-1:1:3").unwrap(), vec![-1.0, 0.0, 1.0]);
        assert!(parse_grid("1:-1:3").is_err());
        assert!(parse_grid("0:1").is_err());
    }

    #[test]
    fn bloch_aliases() {
        let (_, h) = parse_bloch("H").unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((h.ux - s).abs() < 1e-15 && (h.uy - s).abs() < 1e-15 && h.uz == 0.0);
        let (label, zero) = parse_bloch("0").unwrap();
        assert_eq!(label.as_deref(), Some("0"));
        assert_eq!(zero.as_array(), [0.0, 0.0, 1.0]);
        assert_eq!(parse_bloch("-").unwrap().1.as_array(), [-1.0, 0.0, 0.0]);
        assert!(parse_bloch("T+++").is_ok());
        assert!(parse_bloch("0.6,0,0.8").is_ok());
        assert!(parse_bloch("1,1,0").is_err());
        assert!(parse_bloch("0,0,0").is_err());
        assert!(parse_bloch("Q").is_err());
    }
}
