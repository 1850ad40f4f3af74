use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;

/// Declares a settings struct whose fields are all optional, usable both as
/// clap flags and as a TOML config section, with `or` filling gaps from a
/// lower-priority source.
macro_rules! settings {
    ($(#[$m:meta])* $name:ident { $( $(#[$fm:meta])* $field:ident : $ty:ty ),* $(,)? }) => {
        $(#[$m])*
        #[derive(Debug, Clone, Default, PartialEq, clap::Args, Deserialize)]
        #[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
        pub struct $name {
            $( $(#[$fm])* pub $field: Option<$ty>, )*
        }

        impl $name {
            pub fn or(self, lower: Self) -> Self {
                Self { $( $field: self.$field.or(lower.$field), )* }
            }
        }
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    And,
    Or,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FiltrationMethod {
    Corr,
    Glasso,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StructureKind {
    IidNormal,
    PlantedBlocks,
    ChainPrecision,
}

settings! {
    NormalizeArgs {
        /// Data CSV, rows = subjects, columns = nodes.
        #[arg(long)]
        input: PathBuf,
        /// Remove constant columns instead of failing.
        #[arg(long, num_args = 0..=1, default_missing_value = "true")]
        drop_constant: bool,
    }
}

settings! {
    CorrArgs {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, num_args = 0..=1, default_missing_value = "true")]
        drop_constant: bool,
    }
}

settings! {
    CrossCorrArgs {
        /// First paired data set.
        #[arg(long)]
        input: PathBuf,
        /// Second paired data set, same shape as `--input`.
        #[arg(long)]
        input_y: PathBuf,
        #[arg(long, num_args = 0..=1, default_missing_value = "true")]
        drop_constant: bool,
    }
}

settings! {
    SparseCorrArgs {
        #[arg(long)]
        input: PathBuf,
        /// Threshold the cross-correlation with this paired data set instead.
        #[arg(long)]
        input_y: PathBuf,
        #[arg(long, conflicts_with = "lambda_grid")]
        lambda: f64,
        /// Number of uniform grid points from 0 to the largest off-diagonal magnitude.
        #[arg(long)]
        lambda_grid: usize,
        #[arg(long, num_args = 0..=1, default_missing_value = "true")]
        drop_constant: bool,
    }
}

settings! {
    GlassoArgs {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, conflicts_with = "lambda_grid")]
        lambda: f64,
        /// Number of positive grid points up to the largest off-diagonal covariance.
        #[arg(long)]
        lambda_grid: usize,
        #[arg(long, num_args = 0..=1, default_missing_value = "true")]
        penalize_diagonal: bool,
        #[arg(long)]
        tol: f64,
        #[arg(long)]
        max_sweeps: usize,
        /// Solve the blocks of the thresholded covariance separately.
        #[arg(long, num_args = 0..=1, default_missing_value = "true")]
        screening: bool,
    }
}

settings! {
    PartialArgs {
        #[arg(long)]
        input: PathBuf,
        /// Node-wise LASSO penalty.
        #[arg(long, conflicts_with = "lse")]
        lambda: f64,
        /// Least-squares residual route.
        #[arg(long, num_args = 0..=1, default_missing_value = "true")]
        lse: bool,
        #[arg(long, value_enum)]
        rule: Rule,
        #[arg(long, num_args = 0..=1, default_missing_value = "true")]
        positive_only: bool,
        /// Allow the least-squares route when n ≤ p via the pseudo-inverse.
        #[arg(long, num_args = 0..=1, default_missing_value = "true")]
        force_pinv: bool,
        #[arg(long, num_args = 0..=1, default_missing_value = "true")]
        drop_constant: bool,
    }
}

settings! {
    FiltrationArgs {
        #[arg(long)]
        input: PathBuf,
        /// Number of grid points.
        #[arg(long)]
        grid: usize,
        #[arg(long, value_enum)]
        method: FiltrationMethod,
        /// Write each graph's adjacency, rows and columns grouped by component.
        #[arg(long, num_args = 0..=1, default_missing_value = "true")]
        dump_adjacency: bool,
        #[arg(long, num_args = 0..=1, default_missing_value = "true")]
        penalize_diagonal: bool,
        #[arg(long)]
        tol: f64,
        #[arg(long, num_args = 0..=1, default_missing_value = "true")]
        drop_constant: bool,
    }
}

settings! {
    BenchArgs {
        /// Subject counts, comma separated.
        #[arg(long, value_delimiter = ',')]
        n_list: Vec<usize>,
        /// Node counts, comma separated.
        #[arg(long, value_delimiter = ',')]
        p_list: Vec<usize>,
        /// Number of λ values per timed path.
        #[arg(long)]
        grid: usize,
        #[arg(long)]
        grid_max: f64,
        /// Minimum wall-clock time spent timing each method per cell.
        #[arg(long)]
        budget_ms: u64,
    }
}

settings! {
    RankArgs {
        #[arg(long)]
        input: PathBuf,
        /// Singular-value cutoff; defaults to p·ε·σ_max.
        #[arg(long)]
        tol: f64,
        #[arg(long, num_args = 0..=1, default_missing_value = "true")]
        drop_constant: bool,
    }
}

settings! {
    SynthArgs {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        p: usize,
        #[arg(long, value_enum)]
        structure: StructureKind,
        #[arg(long)]
        blocks: usize,
        #[arg(long)]
        within: f64,
        #[arg(long)]
        between: f64,
        #[arg(long)]
        coupling: f64,
    }
}

#[derive(Debug, Clone, PartialEq, Subcommand)]
pub enum Command {
    /// Center and scale columns to unit norm.
    Normalize(NormalizeArgs),
    /// Sample correlation matrix.
    Corr(CorrArgs),
    /// Sample cross-correlation between two paired data sets.
    CrossCorr(CrossCorrArgs),
    /// Soft-thresholded (cross-)correlation at one λ or over a grid.
    SparseCorr(SparseCorrArgs),
    /// Graphical LASSO precision estimate.
    Glasso(GlassoArgs),
    /// Partial correlations by least squares or node-wise LASSO.
    Partial(PartialArgs),
    /// β₀ curve and component partitions over a λ grid.
    Filtration(FiltrationArgs),
    /// Time closed-form thresholding against a generic LASSO solver.
    Bench(BenchArgs),
    /// Numerical rank of the sample correlation.
    Rank(RankArgs),
    /// Write a synthetic data set.
    Synth(SynthArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Normalize(_) => "normalize",
            Command::Corr(_) => "corr",
            Command::CrossCorr(_) => "cross-corr",
            Command::SparseCorr(_) => "sparse-corr",
            Command::Glasso(_) => "glasso",
            Command::Partial(_) => "partial",
            Command::Filtration(_) => "filtration",
            Command::Bench(_) => "bench",
            Command::Rank(_) => "rank",
            Command::Synth(_) => "synth",
        }
    }

    /// The command with every option unset.
    pub fn empty(name: &str) -> Option<Command> {
        Some(match name {
            "normalize" => Command::Normalize(Default::default()),
            "corr" => Command::Corr(Default::default()),
            "cross-corr" => Command::CrossCorr(Default::default()),
            "sparse-corr" => Command::SparseCorr(Default::default()),
            "glasso" => Command::Glasso(Default::default()),
            "partial" => Command::Partial(Default::default()),
            "filtration" => Command::Filtration(Default::default()),
            "bench" => Command::Bench(Default::default()),
            "rank" => Command::Rank(Default::default()),
            "synth" => Command::Synth(Default::default()),
            _ => return None,
        })
    }
}

#[derive(Debug, Parser)]
#[command(name = "sparsenet", version, about = "Sparse correlation networks and their graph filtrations")]
pub struct Cli {
    /// TOML file with defaults for any flag; flags on the command line win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory for output files (created if missing).
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// Worker threads; also read from SPARSENET_THREADS.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Seed for synthetic data.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Option<Command>,
}

/// Config file layout: global keys at the top level, one table per command.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct ConfigFile {
    pub command: Option<String>,
    pub output: Option<PathBuf>,
    pub threads: Option<usize>,
    pub seed: Option<u64>,
    pub normalize: NormalizeArgs,
    pub corr: CorrArgs,
    pub cross_corr: CrossCorrArgs,
    pub sparse_corr: SparseCorrArgs,
    pub glasso: GlassoArgs,
    pub partial: PartialArgs,
    pub filtration: FiltrationArgs,
    pub bench: BenchArgs,
    pub rank: RankArgs,
    pub synth: SynthArgs,
}

/// λ and grid are one choice: if the command line names either, the config
/// file's values for both are ignored.
fn exclusive<T>(flag_a: &Option<T>, flag_b: &Option<impl Sized>, cfg_a: &mut Option<T>, cfg_b: &mut Option<impl Sized>) {
    if flag_a.is_some() || flag_b.is_some() {
        *cfg_a = None;
        *cfg_b = None;
    }
}

impl ConfigFile {
    /// Merges this file's section for `command` under the flags already set.
    pub fn apply(mut self, command: Command) -> Command {
        match command {
            Command::Normalize(a) => Command::Normalize(a.or(self.normalize)),
            Command::Corr(a) => Command::Corr(a.or(self.corr)),
            Command::CrossCorr(a) => Command::CrossCorr(a.or(self.cross_corr)),
            Command::SparseCorr(a) => {
                let c = &mut self.sparse_corr;
                exclusive(&a.lambda, &a.lambda_grid, &mut c.lambda, &mut c.lambda_grid);
                Command::SparseCorr(a.or(self.sparse_corr))
            }
            Command::Glasso(a) => {
                let c = &mut self.glasso;
                exclusive(&a.lambda, &a.lambda_grid, &mut c.lambda, &mut c.lambda_grid);
                Command::Glasso(a.or(self.glasso))
            }
            Command::Partial(a) => {
                let c = &mut self.partial;
                exclusive(&a.lambda, &a.lse, &mut c.lambda, &mut c.lse);
                Command::Partial(a.or(self.partial))
            }
            Command::Filtration(a) => Command::Filtration(a.or(self.filtration)),
            Command::Bench(a) => Command::Bench(a.or(self.bench)),
            Command::Rank(a) => Command::Rank(a.or(self.rank)),
            Command::Synth(a) => Command::Synth(a.or(self.synth)),
        }
    }
}
