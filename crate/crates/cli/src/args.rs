use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use fdrl_core::aggregate::FilterKind;
use fdrl_core::grid::{BorderPolicy, NeighborhoodShape, NeighborhoodSpec};
use fdrl_core::lip::DistModel;
use fdrl_core::pipeline::NullMethod;
use fdrl_core::sim::Scenario;
use fdrl_core::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "fdrl", version, about = "Spatial FDR control on 2D/3D p-value lattices")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "subcommand", rename_all = "kebab-case")]
pub enum Command {
    /// Generate a synthetic statistic lattice and its truth mask.
    Simulate(SimulateArgs),
    /// Convert statistics to one-sided p-values.
    Pvalues(PvaluesArgs),
    /// Replace each p-value by the median or mean over its neighborhood.
    Aggregate(AggregateArgs),
    /// Conventional FDR threshold on raw p-values.
    Fdr(FdrArgs),
    /// Local FDR threshold on aggregated p-values.
    Fdrl(FdrlArgs),
    /// Smallest attainable control level of each procedure.
    AlphaInf(AlphaInfArgs),
    /// Compare a rejection mask with the truth.
    Score(ScoreArgs),
    /// Replicated simulations over a grid of control levels.
    Sweep(SweepArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct OutArgs {
    /// Directory receiving every output file and the run manifest.
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioName {
    Example1,
    Example1Desk,
    Example2,
    Example3,
    Exponential,
}

#[derive(Debug, Args, Serialize)]
pub struct ScenarioArgs {
    #[arg(long, value_enum, default_value = "example1-desk")]
    pub scenario: ScenarioName,
    /// Signal shift of the exponential scenario (`logN` accepted).
    #[arg(long = "C", default_value = "log8", value_parser = parse_real)]
    pub c: f64,
    /// Rescale the lattice and its signal regions, as `ROWSxCOLS`.
    #[arg(long, value_parser = parse_dims)]
    pub dims: Option<[usize; 2]>,
}

impl ScenarioArgs {
    pub fn scenario(&self) -> Scenario {
        let base = match self.scenario {
            ScenarioName::Example1 => Scenario::example1(),
            ScenarioName::Example1Desk => Scenario::example1_desk(),
            ScenarioName::Example2 => Scenario::example2(),
            ScenarioName::Example3 => Scenario::example3(),
            ScenarioName::Exponential => Scenario::exponential(self.c),
        };
        match self.dims {
            Some(d) => base.scaled_to(d),
            None => base,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelName {
    Exp,
    Normal,
    T,
}

#[derive(Debug, Args, Serialize)]
pub struct PvaluesArgs {
    /// Statistic lattice (binary or CSV).
    #[arg(long)]
    pub input: PathBuf,
    /// Null law of the statistics.
    #[arg(long, value_enum, default_value = "normal")]
    pub model: ModelName,
    /// Degrees of freedom of the t null.
    #[arg(long, default_value_t = 10.0)]
    pub d0: f64,
    /// Output file name inside the output directory.
    #[arg(long, default_value = "p.bin")]
    pub output: PathBuf,
    #[command(flatten)]
    pub out: OutArgs,
}

impl PvaluesArgs {
    pub fn null_model(&self) -> DistModel {
        match self.model {
            ModelName::Exp => DistModel::ExponentialShift { c: 1.0 },
            ModelName::Normal => DistModel::Normal { c: 1.0, sigma: 1.0 },
            ModelName::T => DistModel::StudentT {
                c: 1.0,
                d0: self.d0,
                d1: self.d0,
            },
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct NeighborhoodArgs {
    /// cross5, cross7, knn:K or radius:R; defaults to the cross of the
    /// lattice dimensionality.
    #[arg(long)]
    pub neighborhood: Option<String>,
    #[arg(long, value_enum, default_value = "truncate")]
    pub border: BorderArg,
    #[arg(long, value_enum, default_value = "median")]
    pub filter: FilterArg,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BorderArg {
    Truncate,
    Mirror,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterArg {
    Median,
    Mean,
}

impl NeighborhoodArgs {
    pub fn filter(&self) -> FilterKind {
        match self.filter {
            FilterArg::Median => FilterKind::Median,
            FilterArg::Mean => FilterKind::Mean,
        }
    }

    pub fn spec(&self, ndim: usize) -> Result<NeighborhoodSpec> {
        let border = match self.border {
            BorderArg::Truncate => BorderPolicy::Truncate,
            BorderArg::Mirror => BorderPolicy::Mirror,
        };
        let shape = match self.neighborhood.as_deref() {
            None => NeighborhoodSpec::cross_for(ndim).shape,
            Some(text) => parse_shape(text)?,
        };
        Ok(NeighborhoodSpec::new(shape, border))
    }
}

pub fn parse_shape(text: &str) -> Result<NeighborhoodShape> {
    let bad = || Error::InvalidSpec(format!("cannot parse neighborhood '{text}'"));
    Ok(match text {
        "cross5" => NeighborhoodShape::Cross2d5,
        "cross7" => NeighborhoodShape::Cross3d7,
        _ => match text.split_once(':') {
            Some(("knn", k)) => NeighborhoodShape::Knn(k.parse().map_err(|_| bad())?),
            Some(("radius", r)) => NeighborhoodShape::Radius(r.parse().map_err(|_| bad())?),
            _ => return Err(bad()),
        },
    })
}

#[derive(Debug, Args, Serialize)]
pub struct AggregateArgs {
    /// p-value lattice.
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub neighborhood: NeighborhoodArgs,
    #[arg(long, default_value = "pstar.bin")]
    pub output: PathBuf,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct LevelArgs {
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.1)]
    pub lambda: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct FdrArgs {
    /// p-value lattice.
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub levels: LevelArgs,
    /// Prefix of the curve, summary and mask files.
    #[arg(long, default_value = "fdr")]
    pub prefix: String,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct FdrlArgs {
    /// Aggregated p-value lattice.
    #[arg(long)]
    pub input: PathBuf,
    /// Raw p-values, required by method 2.
    #[arg(long)]
    pub raw: Option<PathBuf>,
    #[command(flatten)]
    pub levels: LevelArgs,
    #[command(flatten)]
    pub neighborhood: NeighborhoodArgs,
    /// Null estimator: 1, 1n, 2, beta or uniform.
    #[arg(long, default_value = "1", value_parser = parse_method)]
    pub method: NullMethod,
    /// Split point of the null-count step in method 2 (defaults to lambda).
    #[arg(long)]
    pub n0_lambda: Option<f64>,
    /// Seed of the method 2 resampling stream.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Method 2 resampling repetitions.
    #[arg(long, default_value_t = 1)]
    pub repetitions: usize,
    #[arg(long, default_value = "fdrl")]
    pub prefix: String,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct AlphaInfArgs {
    #[arg(long, value_enum, default_value = "exp")]
    pub model: ModelName,
    /// Comma-separated signal shifts; `logN` and `log(N)` accepted.
    #[arg(long = "C", value_delimiter = ',', required = true, value_parser = parse_real)]
    pub c: Vec<f64>,
    #[arg(long, default_value_t = 0.1)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0.84)]
    pub pi0: f64,
    /// Neighborhood size of the local procedure (odd).
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    /// Alternative standard deviation of the normal model.
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 10.0)]
    pub d0: f64,
    #[arg(long, default_value_t = 10.0)]
    pub d1: f64,
    /// Use the threshold grid even where a closed form exists.
    #[arg(long)]
    pub numeric: bool,
    #[arg(long, default_value_t = 1e-8)]
    pub t_min: f64,
    #[arg(long, default_value_t = 10_000)]
    pub points: usize,
    /// Print the text table instead of JSON.
    #[arg(long)]
    pub table: bool,
    #[command(flatten)]
    pub out: OutArgs,
}

impl AlphaInfArgs {
    pub fn model(&self, c: f64) -> DistModel {
        match self.model {
            ModelName::Exp => DistModel::ExponentialShift { c },
            ModelName::Normal => DistModel::Normal { c, sigma: self.sigma },
            ModelName::T => DistModel::StudentT {
                c,
                d0: self.d0,
                d1: self.d1,
            },
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct ScoreArgs {
    #[arg(long)]
    pub mask: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct SweepArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Replicate `r` uses seed `seed + r`.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 20)]
    pub reps: usize,
    #[arg(long = "alpha", value_delimiter = ',', default_value = "0.01,0.05,0.1")]
    pub alphas: Vec<f64>,
    #[arg(long = "lambda", value_delimiter = ',', default_value = "0.1")]
    pub lambdas: Vec<f64>,
    /// Null estimators of the local procedure, comma-separated.
    #[arg(long = "method", value_delimiter = ',', default_value = "1", value_parser = parse_method)]
    pub methods: Vec<NullMethod>,
    #[command(flatten)]
    pub neighborhood: NeighborhoodArgs,
    #[arg(long)]
    pub n0_lambda: Option<f64>,
    #[arg(long, default_value_t = 1)]
    pub repetitions: usize,
    /// Also write every rejection mask under `masks/`.
    #[arg(long)]
    pub save_masks: bool,
    #[command(flatten)]
    pub out: OutArgs,
}

fn parse_method(s: &str) -> std::result::Result<NullMethod, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// A real number, or `logN` / `log(N)` for its natural logarithm.
pub fn parse_real(s: &str) -> std::result::Result<f64, String> {
    let s = s.trim();
    let value = match s.strip_prefix("log") {
        Some(rest) => {
            let inner = rest.trim_start_matches('(').trim_end_matches(')');
            inner.parse::<f64>().map_err(|e| format!("'{s}': {e}"))?.ln()
        }
        None => s.parse::<f64>().map_err(|e| format!("'{s}': {e}"))?,
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(format!("'{s}' is not a finite number"))
    }
}

fn parse_dims(s: &str) -> std::result::Result<[usize; 2], String> {
    let (r, c) = s.split_once(['x', ',']).ok_or_else(|| format!("expected ROWSxCOLS, got '{s}'"))?;
    let parse = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("'{s}': {e}"));
    Ok([parse(r)?, parse(c)?])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn real_parsing() {
        assert_eq!(parse_real("log8").unwrap(), 8f64.ln());
        assert_eq!(parse_real("log(12)").unwrap(), 12f64.ln());
        assert_eq!(parse_real("0.5").unwrap(), 0.5);
        assert!(parse_real("log0").is_err());
        assert!(parse_real("x").is_err());
    }

    #[test]
    fn shape_parsing() {
        assert_eq!(parse_shape("cross5").unwrap(), NeighborhoodShape::Cross2d5);
        assert_eq!(parse_shape("knn:9").unwrap(), NeighborhoodShape::Knn(9));
        assert_eq!(parse_shape("radius:1.5").unwrap(), NeighborhoodShape::Radius(1.5));
        assert!(parse_shape("knn:").is_err());
        assert!(parse_shape("box").is_err());
    }

    #[test]
    fn dims_parsing() {
        assert_eq!(parse_dims("64x32").unwrap(), [64, 32]);
        assert!(parse_dims("64").is_err());
    }
}
