use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use nbpeel::devolution::{find_threshold, run_de, DeParams};
use nbpeel::ensemble::uniform_label_profile;
use nbpeel::harness::{estimate_vs_empirical, run_campaign};
use nbpeel::optimizer::optimize;
use nbpeel::{
    assign_labels, design_rate, sample_code, DegreeDistribution, Error, Field,
    OptimizationProblem, SimConfig,
};

#[derive(Parser)]
#[command(name = "nbpeel", version, about = "Non-binary LDPC codes over the BEC")]
struct Cli {
    /// Master seed; overrides the config value.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file (stdout when absent).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// JSON file with the command's parameters; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

fn parse_json(s: &str) -> Result<Value, String> {
    serde_json::from_str(s).map_err(|e| format!("invalid JSON: {e}"))
}

#[derive(Args, Serialize, Default)]
struct CodeArgs {
    /// Variable distribution, e.g. '{"2":0.5,"4":0.5}'.
    #[arg(long, value_parser = parse_json)]
    #[serde(skip_serializing_if = "Option::is_none")]
    lambda: Option<Value>,
    /// Check distribution.
    #[arg(long, value_parser = parse_json)]
    #[serde(skip_serializing_if = "Option::is_none")]
    rho: Option<Value>,
    /// Extension degree of GF(2^p).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    p: Option<u32>,
}

#[derive(Subcommand)]
enum Command {
    /// Primitive polynomial, label row-weight profile and generator.
    FieldInfo {
        #[arg(long)]
        p: Option<u32>,
    },
    /// Estimated vs sampled binary-image degree distributions.
    EstimateDeg {
        #[command(flatten)]
        code: CodeArgs,
        #[arg(long)]
        n_bits: Option<usize>,
        /// Comma-separated graph seeds.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
    },
    /// Samples a labeled graph and writes it in text form.
    Construct {
        #[command(flatten)]
        code: CodeArgs,
        /// Number of variable nodes.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Channel threshold of the recursion.
    Threshold {
        #[command(flatten)]
        code: CodeArgs,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Recursion trajectory as CSV.
    DeRun {
        #[command(flatten)]
        code: CodeArgs,
        #[arg(long)]
        eps0: Option<f64>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        max_iter: Option<usize>,
    },
    /// Monte-Carlo decoding campaign.
    Simulate {
        #[command(flatten)]
        code: CodeArgs,
        #[arg(long)]
        n_bits: Option<usize>,
        /// Comma-separated channel erasure probabilities.
        #[arg(long, value_delimiter = ',')]
        eps0: Option<Vec<f64>>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        max_iter: Option<usize>,
        /// hybrid, no_inverse, binary or ml.
        #[arg(long)]
        decoder: Option<String>,
        #[arg(long)]
        fixed_graph: bool,
    },
    /// Degree-distribution optimization; writes the search history.
    Design {
        #[arg(long)]
        budget: Option<usize>,
        /// Also write the optimized distributions as JSON here.
        #[arg(long)]
        result: Option<PathBuf>,
    },
}

struct Failure {
    code: u8,
    msg: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Config(_)
            | Error::Parse { .. }
            | Error::Json(_)
            | Error::InvalidDistribution(_)
            | Error::UnsupportedDegree(_)
            | Error::LengthMismatch { .. } => 2,
            Error::Infeasible(_) => 3,
            Error::Construction { .. } => 4,
            _ => 1,
        };
        Failure {
            code,
            msg: e.to_string(),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure { code: 1, msg: e.to_string() }
    }
}

fn config_error(msg: impl Into<String>) -> Failure {
    Failure { code: 2, msg: msg.into() }
}

/// Config file as an object, with `overrides` laid on top.
fn merged<T: DeserializeOwned>(cli: &Cli, overrides: Map<String, Value>) -> Result<T, Failure> {
    let map = merged_map(cli, overrides)?;
    parse(&map)
}

/// Code fields and command fields of one merged object.
fn merged_code<T: DeserializeOwned>(
    cli: &Cli,
    overrides: Map<String, Value>,
) -> Result<(CodeInput, T), Failure> {
    let map = merged_map(cli, overrides)?;
    Ok((parse(&map)?, parse(&map)?))
}

fn parse<T: DeserializeOwned>(map: &Map<String, Value>) -> Result<T, Failure> {
    serde_json::from_value(Value::Object(map.clone())).map_err(|e| config_error(e.to_string()))
}

fn merged_map(cli: &Cli, overrides: Map<String, Value>) -> Result<Map<String, Value>, Failure> {
    let mut base = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| config_error(format!("{}: {e}", path.display())))?;
            match parse_json(&text).map_err(config_error)? {
                Value::Object(m) => m,
                _ => return Err(config_error("config must be a JSON object")),
            }
        }
        None => Map::new(),
    };
    base.extend(overrides);
    if let Some(seed) = cli.seed {
        base.insert("seed".into(), seed.into());
    }
    Ok(base)
}

fn fields(value: impl Serialize) -> Map<String, Value> {
    match serde_json::to_value(value) {
        Ok(Value::Object(m)) => m,
        _ => Map::new(),
    }
}

fn set(map: &mut Map<String, Value>, key: &str, value: Option<impl Serialize>) {
    if let Some(v) = value {
        map.insert(key.into(), serde_json::to_value(v).unwrap_or(Value::Null));
    }
}

fn output(path: Option<&PathBuf>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

#[derive(Deserialize)]
struct FieldInput {
    p: u32,
}

// Read separately from the command's own fields: `#[serde(flatten)]`
// would lose the integer keys of the distributions.
#[derive(Deserialize)]
struct CodeInput {
    lambda: DegreeDistribution,
    rho: DegreeDistribution,
    p: u32,
}

#[derive(Deserialize)]
struct EstimateInput {
    n_bits: usize,
    #[serde(default)]
    seeds: Vec<u64>,
    #[serde(default)]
    seed: u64,
}

#[derive(Deserialize)]
struct ConstructInput {
    n: usize,
    #[serde(default)]
    seed: u64,
}

#[derive(Deserialize)]
struct ThresholdInput {
    #[serde(default = "default_threshold_tol")]
    tol: f64,
}

fn default_threshold_tol() -> f64 {
    1e-4
}

#[derive(Deserialize)]
struct DeInput {
    eps0: f64,
    #[serde(default = "default_de_tol")]
    tol: f64,
    #[serde(default = "default_de_iter")]
    max_iter: usize,
    #[serde(default)]
    gamma0: Option<f64>,
}

fn default_de_tol() -> f64 {
    1e-10
}

fn default_de_iter() -> usize {
    200
}

fn run(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::FieldInfo { p } => {
            let mut o = Map::new();
            set(&mut o, "p", *p);
            let input: FieldInput = merged(cli, o)?;
            let field = Field::new(input.p)?;
            let profile = uniform_label_profile(input.p);
            let info = serde_json::json!({
                "p": field.p(),
                "q": field.q(),
                "primitive_poly": format!("{:#x}", field.primitive_poly()),
                "generator_rows": field.generator().rows(),
                "row_weight_profile": profile.a(),
                "d_m": profile.d_m(),
            });
            let mut w = output(cli.out.as_ref())?;
            serde_json::to_writer_pretty(&mut w, &info).map_err(Error::from)?;
            writeln!(w)?;
            w.flush()?;
        }
        Command::EstimateDeg { code, n_bits, seeds } => {
            let mut o = fields(code);
            set(&mut o, "n_bits", *n_bits);
            set(&mut o, "seeds", seeds.as_ref());
            let (c, input): (CodeInput, EstimateInput) = merged_code(cli, o)?;
            let seeds = if input.seeds.is_empty() { vec![input.seed] } else { input.seeds };
            let rep = estimate_vs_empirical(&c.lambda, &c.rho, c.p, input.n_bits, &seeds)?;
            let mut w = output(cli.out.as_ref())?;
            writeln!(w, "side,degree,estimated,empirical")?;
            for (side, cmp) in [("variable", &rep.variable), ("check", &rep.check)] {
                for (d, est, emp) in &cmp.rows {
                    writeln!(w, "{side},{d},{est},{emp}")?;
                }
            }
            w.flush()?;
            log::info!(
                "mean L-inf gap: variable {:e}, check {:e}",
                rep.variable.mean_gap(),
                rep.check.mean_gap()
            );
        }
        Command::Construct { code, n } => {
            let mut o = fields(code);
            set(&mut o, "n", *n);
            let (c, input): (CodeInput, ConstructInput) = merged_code(cli, o)?;
            let field = Field::new(c.p)?;
            let graph = sample_code(&c.lambda, &c.rho, input.n, input.seed)?;
            let graph = assign_labels(&graph, &field, input.seed);
            let mut w = output(cli.out.as_ref())?;
            graph.write_text(&mut w)?;
            w.flush()?;
        }
        Command::Threshold { code, tol } => {
            let mut o = fields(code);
            set(&mut o, "tol", *tol);
            let (c, input): (CodeInput, ThresholdInput) = merged_code(cli, o)?;
            let threshold = find_threshold(&c.lambda, &c.rho, c.p, input.tol)?;
            let info = serde_json::json!({
                "threshold": threshold,
                "rate": design_rate(&c.lambda, &c.rho)?,
            });
            let mut w = output(cli.out.as_ref())?;
            serde_json::to_writer_pretty(&mut w, &info).map_err(Error::from)?;
            writeln!(w)?;
            w.flush()?;
        }
        Command::DeRun { code, eps0, tol, max_iter } => {
            let mut o = fields(code);
            set(&mut o, "eps0", *eps0);
            set(&mut o, "tol", *tol);
            set(&mut o, "max_iter", *max_iter);
            let (c, input): (CodeInput, DeInput) = merged_code(cli, o)?;
            if !(input.tol > 0.0) {
                return Err(config_error("tol must be positive"));
            }
            let params = DeParams::from_code(&c.lambda, &c.rho, c.p, input.eps0)?;
            let traj = run_de(&params, input.gamma0, input.tol, input.max_iter);
            traj.write_csv(output(cli.out.as_ref())?)?;
        }
        Command::Simulate {
            code,
            n_bits,
            eps0,
            trials,
            max_iter,
            decoder,
            fixed_graph,
        } => {
            let mut o = fields(code);
            set(&mut o, "n_bits", *n_bits);
            set(&mut o, "eps0", eps0.as_ref());
            set(&mut o, "trials", *trials);
            set(&mut o, "max_iter", *max_iter);
            set(&mut o, "decoder", decoder.as_ref());
            if *fixed_graph {
                o.insert("fixed_graph".into(), true.into());
            }
            let config: SimConfig = merged(cli, o)?;
            let report = run_campaign(&config)?;
            let path = cli.out.as_ref().or(config.output.as_ref());
            report.write_csv(output(path)?)?;
        }
        Command::Design { budget, result } => {
            let mut o = Map::new();
            set(&mut o, "budget", *budget);
            let prob: OptimizationProblem = merged(cli, o)?;
            let res = optimize(&prob)?;
            res.write_history_csv(output(cli.out.as_ref())?)?;
            if let Some(path) = result {
                let mut w = BufWriter::new(File::create(path)?);
                serde_json::to_writer_pretty(&mut w, &res).map_err(Error::from)?;
                writeln!(w)?;
                w.flush()?;
            }
            log::info!(
                "g* = {:.6} (L = {:.4}), threshold {:.4}",
                res.g_star,
                res.l_star,
                res.threshold
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
