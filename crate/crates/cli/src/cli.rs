//! Command-line grammar. Long flags only.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Clone, Parser)]
#[command(name = "affapprox", version, about = "Affine approximation experiments for Lipschitz maps")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Global {
    /// Report file; standard output when omitted.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// Additive slack for every asserted inequality.
    #[arg(long, global = true, default_value_t = affapprox_core::DEFAULT_TOLERANCE, value_parser = positive)]
    pub tolerance: f64,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (overridden by AFFAPPROX_THREADS).
    #[arg(long, global = true)]
    pub parallelism: Option<usize>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Dyadic energies of a sampled curve and the uniform-convexity gain check.
    Energy {
        #[arg(long)]
        input: PathBuf,
        /// Power type; defaults to the target space's.
        #[arg(long)]
        p: Option<f64>,
        /// Four-point constant; defaults to the target space's.
        #[arg(long = "K")]
        k: Option<f64>,
    },
    /// Walsh coefficients of a cube map, their growth bound, and the
    /// first-order affine map.
    Walsh {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        eps: f64,
        /// Reject inputs outside the resolution condition 2^m ≥ 2/ε ≥ 10n².
        #[arg(long)]
        strict: bool,
    },
    /// Two-scale line energy H at a base point, optionally with the
    /// self-similarity residual.
    Hfunc {
        #[arg(long)]
        input: PathBuf,
        /// Cube side; defaults to the input's.
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long)]
        m: u32,
        #[arg(long)]
        k: u32,
        /// Base point, comma separated; defaults to the cube origin.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x: Option<Vec<f64>>,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        /// `α,β,γ` for the residual of H_{α,β+γ} against its β-step splitting.
        #[arg(long, value_delimiter = ',', num_args = 1)]
        recursion: Option<Vec<u32>>,
    },
    /// Sup-norm affine fit of scattered samples.
    Fit {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        max_iter: usize,
    },
    /// Empirical approximability radius of a cube map.
    RSearch {
        #[arg(long)]
        input: PathBuf,
        /// Source norm exponent (a number or `inf`).
        #[arg(long, default_value = "2", value_parser = exponent)]
        source_q: f64,
        #[arg(long)]
        eps: f64,
        /// Radii `R 2^{-j}` for `j = 0..=levels`.
        #[arg(long, default_value_t = 6)]
        levels: u32,
        /// Try every grid point as a center.
        #[arg(long)]
        exhaustive: bool,
        /// Also write every evaluated candidate as CSV.
        #[arg(long)]
        sweep_csv: Option<PathBuf>,
    },
    /// Certificates for the sawtooth counterexamples.
    Counterexample {
        /// 41: curve on a window; 42: localized curve on an interval;
        /// 43: coordinate product on a ball.
        #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(["41", "42", "43"]))]
        lemma: String,
        #[arg(long)]
        m: u32,
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = 1)]
        n: usize,
        /// Check every cell of the standard sweep instead of one case.
        #[arg(long)]
        sweep: bool,
        #[arg(long)]
        a: Option<f64>,
        #[arg(long)]
        b: Option<f64>,
        /// Center: a number for 42, comma separated coordinates for 43.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        y: Option<Vec<f64>>,
        #[arg(long)]
        r: Option<f64>,
        /// Centers per half-range in the localized sweep.
        #[arg(long, default_value_t = 8)]
        steps: u32,
    },
    /// Closed-form radius bounds as CSV; every flag takes a comma separated list.
    Bounds {
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<usize>,
        #[arg(long, value_delimiter = ',', required = true)]
        p: Vec<f64>,
        #[arg(long = "K", value_delimiter = ',', default_value = "1")]
        k: Vec<f64>,
        #[arg(long, value_delimiter = ',', required = true)]
        eps: Vec<f64>,
        #[arg(long, value_delimiter = ',', required = true)]
        variant: Vec<Variant>,
    },
    /// A δ-net of the unit ball of ℓ_q^n.
    Net {
        #[arg(long, default_value = "2", value_parser = exponent)]
        q: f64,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        delta: f64,
        /// Random ball points used for the covering check.
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
    },
    /// Smallest net-scale constant C, with a closure recheck.
    Calibrate {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        p: f64,
        #[arg(long = "K", default_value_t = 1.0)]
        k: f64,
        #[arg(long)]
        eps: f64,
        /// Distortion of the net into the target.
        #[arg(long = "D")]
        d: f64,
        /// Lipschitz extension constant.
        #[arg(long, default_value_t = 2.0)]
        extension: f64,
    },
    /// Writes an input file: a counterexample or a seeded random map.
    Generate {
        #[arg(value_enum)]
        kind: Generated,
        /// Grid level.
        #[arg(long)]
        level: u32,
        #[arg(long, default_value_t = 3)]
        m: u32,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        /// Domain dimension for cubes.
        #[arg(long, default_value_t = 2)]
        n: usize,
        /// Target exponent for random maps.
        #[arg(long, default_value = "2", value_parser = exponent)]
        q: f64,
        /// Target dimension for random maps.
        #[arg(long, default_value_t = 2)]
        dim: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Variant {
    /// General lower bound.
    Theorem,
    /// Sharper one-dimensional lower bound.
    Sharp1d,
    /// Upper bound from the sawtooth curve.
    #[value(alias = "lemma41")]
    Interval,
    /// Upper bound from the coordinate product.
    #[value(alias = "lemma43")]
    Ball,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Theorem => "theorem",
            Variant::Sharp1d => "sharp1d",
            Variant::Interval => "interval",
            Variant::Ball => "ball",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Generated {
    /// The depth-m sawtooth curve on [0, 1].
    Sawtooth,
    /// The localized curve on [−2, 2].
    Localized,
    /// The coordinate product on [−1, 1]^n.
    Product,
    /// A random 1-Lipschitz curve on [0, 1].
    RandomPath,
    /// A random 1-Lipschitz map on [0, 1]^n.
    RandomCube,
}

fn exponent(text: &str) -> Result<f64, String> {
    match text {
        "inf" => Ok(f64::INFINITY),
        _ => text.parse::<f64>().map_err(|e| e.to_string()),
    }
}

fn positive(text: &str) -> Result<f64, String> {
    let v = text.parse::<f64>().map_err(|e| e.to_string())?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("must be positive, got {text}"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn grammar_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn parses_examples() {
        let cli = Cli::try_parse_from(["affapprox", "bounds", "--n", "1", "--p", "2", "--K", "1", "--eps", "0.25", "--variant", "theorem"]).unwrap();
        assert!(matches!(cli.command, Command::Bounds { .. }));
        let cli = Cli::try_parse_from(["affapprox", "counterexample", "--lemma", "41", "--m", "3", "--p", "2", "--sweep"]).unwrap();
        assert!(matches!(cli.command, Command::Counterexample { sweep: true, .. }));
        assert!(Cli::try_parse_from(["affapprox", "counterexample", "--lemma", "44", "--m", "3", "--p", "2"]).is_err());
        let cli = Cli::try_parse_from(["affapprox", "--tolerance", "1e-6", "net", "--n", "2", "--delta", "0.5", "--q", "inf"]).unwrap();
        assert_eq!(cli.global.tolerance, 1e-6);
        assert!(matches!(cli.command, Command::Net { q, .. } if q.is_infinite()));
        assert!(Cli::try_parse_from(["affapprox", "--tolerance", "0", "net", "--n", "2", "--delta", "0.5"]).is_err());
        let cli = Cli::try_parse_from(["affapprox", "bounds", "--n", "1,2", "--p", "2", "--eps", "0.25", "--variant", "lemma41,ball"]).unwrap();
        match cli.command {
            Command::Bounds { n, variant, k, .. } => {
                assert_eq!(n, vec![1, 2]);
                assert_eq!(variant, vec![Variant::Interval, Variant::Ball]);
                assert_eq!(k, vec![1.0]);
            }
            _ => unreachable!(),
        }
    }
}
