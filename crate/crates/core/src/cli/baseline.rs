//! `sepkit baseline ...`: formula and bound calculators.
//!
//! Each calculator takes its parameters either from flags (one JSON result)
//! or from a `--batch` CSV whose header names the parameters (one output
//! CSV row per input row).

use std::path::{Path, PathBuf};

use clap::{Args, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::io::{json_with_provenance, parse_dim_list, parse_real_list, read_to_string, write_output, Provenance};
use super::CliError;
use crate::baselines::{
    self, BallParams, BoundValue, CubeParams, MaxSize, NoisyParams, SmacParams,
};

#[derive(Debug, Subcommand)]
pub enum BaselineCmd {
    /// log10 p_y on the unit sphere, one column per dimension
    SphereCurve(SphereCurveArgs),
    /// Uniform-ball bounds and maximal set sizes
    Ball(BallArgs),
    /// Product-distribution-in-cube bounds
    Cube(CubeArgs),
    /// SmAC exponential set-size bound
    Smac(SmacArgs),
    /// Perturbed-cluster bound
    Noisy(NoisyArgs),
    /// Log-concave set-size bound
    Logconcave(LogconcaveArgs),
    /// Set-size bound for densities bounded relative to the uniform ball
    BoundedDensity(BoundedDensityArgs),
    /// Dimension at which the sphere formula reproduces an observed mean p_y
    EffectiveDim(EffectiveDimArgs),
}

#[derive(Debug, Args)]
pub struct SphereCurveArgs {
    /// Dimensions: list and/or inclusive ranges, e.g. 8..25
    #[arg(long, default_value = "8..25")]
    pub n: String,
    /// Thresholds: list and/or start:stop:step ranges
    #[arg(long, default_value = "0.8:0.99:0.01")]
    pub alphas: String,
    /// Use the exact quadrature instead of the large-n approximation
    #[arg(long)]
    pub exact: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BatchArgs {
    /// CSV of parameter rows (header = parameter names)
    #[arg(long)]
    pub batch: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

macro_rules! param_args {
    ($name:ident { $($(#[$m:meta])* $field:ident : $ty:ty),* $(,)? }) => {
        #[derive(Debug, Args, Serialize)]
        pub struct $name {
            $(
                $(#[$m])*
                #[serde(skip_serializing_if = "Option::is_none")]
                pub $field: Option<$ty>,
            )*
            #[command(flatten)]
            #[serde(skip)]
            pub io: BatchArgs,
        }
    };
}

param_args!(BallArgs {
    #[arg(long)] n: u32,
    #[arg(long = "M", visible_alias = "m")] m: u64,
    #[arg(long)] r: f64,
    /// Failure probability for the maximal set sizes
    #[arg(long)] theta: f64,
});

param_args!(CubeArgs {
    #[arg(long)] n: u32,
    #[arg(long = "M", visible_alias = "m")] m: u64,
    #[arg(long)] delta: f64,
    #[arg(long)] sigma0: f64,
    /// Sum of coordinate variances
    #[arg(long = "r0-sq")] r0_sq: f64,
});

param_args!(SmacArgs {
    #[arg(long = "A")] a: f64,
    #[arg(long = "B")] b: f64,
    #[arg(long = "C")] c: f64,
    #[arg(long)] delta: f64,
    #[arg(long = "n-b")] n_b: u32,
    /// Dimension at which to evaluate the set-size bound
    #[arg(long)] n: u32,
});

param_args!(NoisyArgs {
    #[arg(long)] n: u32,
    #[arg(long = "M", visible_alias = "m")] m: u64,
    #[arg(long)] epsilon: f64,
    #[arg(long)] delta: f64,
});

param_args!(LogconcaveArgs {
    #[arg(long)] n: u32,
    /// Tail class in [1, 2]
    #[arg(long = "alpha-class")] alpha_class: f64,
    #[arg(long = "a")] a: f64,
    #[arg(long = "b")] b: f64,
    #[arg(long)] delta: f64,
});

param_args!(BoundedDensityArgs {
    #[arg(long)] n: u32,
    #[arg(long)] alpha: f64,
    #[arg(long)] r: f64,
    #[arg(long = "C")] c: f64,
    #[arg(long)] theta: f64,
});

param_args!(EffectiveDimArgs {
    #[arg(long = "mean-p-y")] mean_p_y: f64,
    #[arg(long)] alpha: f64,
});

/// A calculator result and whether any bound in it is vacuous.
struct Evaluated {
    value: Value,
    vacuous: bool,
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("plain data serializes")
}

fn parse_params<T: DeserializeOwned>(params: &Map<String, Value>) -> Result<T, CliError> {
    serde_json::from_value(Value::Object(params.clone()))
        .map_err(|e| CliError::Validation(format!("parameters: {e}")))
}

fn bound_vacuous(b: &BoundValue) -> bool {
    b.vacuous
}

fn size_vacuous(s: &MaxSize) -> bool {
    !s.guaranteed
}

#[derive(Deserialize)]
struct BallInput {
    n: u32,
    m: u64,
    r: f64,
    theta: Option<f64>,
}

fn eval_ball(p: &Map<String, Value>) -> Result<Evaluated, CliError> {
    let inp: BallInput = parse_params(p)?;
    let bounds = baselines::ball_theorem_bounds(&BallParams { n: inp.n, m: inp.m, r: inp.r })?;
    let mut vacuous = [bounds.single, bounds.all_pairs, bounds.angle].iter().any(bound_vacuous);
    let mut out = Map::new();
    out.insert("bounds".into(), to_value(&bounds));
    if let Some(theta) = inp.theta {
        let cor = baselines::corollary_max_m(inp.n, inp.r, theta)?;
        vacuous |= size_vacuous(&cor.single_bound) || size_vacuous(&cor.pairwise_bound);
        out.insert("max_m".into(), to_value(&cor));
    }
    Ok(Evaluated { value: Value::Object(out), vacuous })
}

fn eval_cube(p: &Map<String, Value>) -> Result<Evaluated, CliError> {
    let inp: CubeParams = parse_params(p)?;
    let b = baselines::cube_theorem_bounds(&inp)?;
    Ok(Evaluated {
        vacuous: b.single.vacuous || b.all_pairs.vacuous,
        value: to_value(&b),
    })
}

#[derive(Deserialize)]
struct SmacInput {
    a: f64,
    b: f64,
    c: f64,
    delta: f64,
    #[serde(default)]
    n_b: u32,
    n: Option<u32>,
}

fn eval_smac(p: &Map<String, Value>) -> Result<Evaluated, CliError> {
    let inp: SmacInput = parse_params(p)?;
    let params = SmacParams { a: inp.a, b: inp.b, c: inp.c, delta: inp.delta, n_b: inp.n_b };
    let s = baselines::smac_max_m(&params)?;
    let mut out = Map::new();
    out.insert("a".into(), to_value(&s.a));
    out.insert("b".into(), to_value(&s.b));
    let mut vacuous = false;
    if let Some(n) = inp.n {
        let m = s.max_m(n);
        vacuous = size_vacuous(&m);
        out.insert("max_m".into(), to_value(&m));
    }
    Ok(Evaluated { value: Value::Object(out), vacuous })
}

fn eval_noisy(p: &Map<String, Value>) -> Result<Evaluated, CliError> {
    let inp: NoisyParams = parse_params(p)?;
    let b = baselines::noisy_bound(&inp)?;
    Ok(Evaluated { vacuous: b.vacuous, value: to_value(&b) })
}

#[derive(Deserialize)]
struct LogconcaveInput {
    n: u32,
    alpha_class: f64,
    a: f64,
    b: f64,
    delta: f64,
}

fn eval_logconcave(p: &Map<String, Value>) -> Result<Evaluated, CliError> {
    let i: LogconcaveInput = parse_params(p)?;
    let m = baselines::logconcave_max_m(i.n, i.alpha_class, i.a, i.b, i.delta)?;
    Ok(Evaluated { vacuous: size_vacuous(&m), value: to_value(&m) })
}

#[derive(Deserialize)]
struct BoundedDensityInput {
    n: u32,
    alpha: f64,
    r: f64,
    c: f64,
    theta: f64,
}

fn eval_bounded_density(p: &Map<String, Value>) -> Result<Evaluated, CliError> {
    let i: BoundedDensityInput = parse_params(p)?;
    let m = baselines::bounded_density_max_m(i.n, i.alpha, i.r, i.c, i.theta)?;
    Ok(Evaluated { vacuous: size_vacuous(&m), value: to_value(&m) })
}

#[derive(Deserialize)]
struct EffectiveDimInput {
    mean_p_y: f64,
    alpha: f64,
}

fn eval_effective_dim(p: &Map<String, Value>) -> Result<Evaluated, CliError> {
    let i: EffectiveDimInput = parse_params(p)?;
    let d = baselines::effective_dimension(i.mean_p_y, i.alpha)?;
    Ok(Evaluated { vacuous: false, value: to_value(&d) })
}

/// Header-named numeric columns of a batch file, one map per row.
fn read_batch(path: &Path) -> Result<Vec<Map<String, Value>>, CliError> {
    let text = read_to_string(path)?;
    let body: String = text
        .lines()
        .filter(|l| !l.trim_start().starts_with('#'))
        .map(|l| format!("{l}\n"))
        .collect();
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(body.as_bytes());
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?
        .iter()
        .map(|h| h.to_lowercase().replace('-', "_"))
        .collect();
    let mut rows = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        let mut map = Map::new();
        for (name, cell) in header.iter().zip(rec.iter()) {
            if cell.is_empty() {
                continue;
            }
            let v = if let Ok(u) = cell.parse::<u64>() {
                Value::from(u)
            } else if let Ok(f) = cell.parse::<f64>() {
                Value::from(f)
            } else {
                return Err(CliError::Validation(format!(
                    "{}: row {}, column '{name}': '{cell}' is not a number",
                    path.display(),
                    r + 1
                )));
            };
            map.insert(name.clone(), v);
        }
        rows.push(map);
    }
    Ok(rows)
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    match v {
        Value::Object(map) => {
            for (k, v) in map {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, v, out);
            }
        }
        Value::Null => out.push((prefix.to_string(), String::new())),
        Value::String(s) => out.push((prefix.to_string(), s.clone())),
        other => out.push((prefix.to_string(), other.to_string())),
    }
}

fn run_calculator(
    args: &impl Serialize,
    io: &BatchArgs,
    eval: fn(&Map<String, Value>) -> Result<Evaluated, CliError>,
    prov: &Provenance,
) -> Result<(), CliError> {
    let Some(batch) = &io.batch else {
        let Value::Object(params) = to_value(args) else { unreachable!() };
        let e = eval(&params)?;
        write_output(io.out.as_deref(), &json_with_provenance(&e.value, prov)?)?;
        return if e.vacuous {
            Err(CliError::Vacuous("at least one bound is vacuous".into()))
        } else {
            Ok(())
        };
    };
    let rows = read_batch(batch)?;
    let mut lines: Vec<Vec<(String, String)>> = Vec::new();
    let mut any_vacuous = false;
    for (i, params) in rows.iter().enumerate() {
        let e = eval(params).map_err(|e| match e {
            CliError::Validation(msg) => CliError::Validation(format!("batch row {}: {msg}", i + 1)),
            other => other,
        })?;
        any_vacuous |= e.vacuous;
        let mut cols = Vec::new();
        flatten("", &Value::Object(params.clone()), &mut cols);
        flatten("", &e.value, &mut cols);
        cols.push(("vacuous".into(), e.vacuous.to_string()));
        lines.push(cols);
    }
    let mut s = prov.csv_header();
    if let Some(first) = lines.first() {
        s += &first.iter().map(|(k, _)| k.as_str()).collect::<Vec<_>>().join(",");
        s.push('\n');
        for cols in &lines {
            s += &cols.iter().map(|(_, v)| v.as_str()).collect::<Vec<_>>().join(",");
            s.push('\n');
        }
    }
    write_output(io.out.as_deref(), &s)?;
    if any_vacuous {
        Err(CliError::Vacuous("at least one batch row has a vacuous bound".into()))
    } else {
        Ok(())
    }
}

fn sphere_curve(a: &SphereCurveArgs, prov: &Provenance) -> Result<(), CliError> {
    let ns = parse_dim_list(&a.n)?;
    let alphas = parse_real_list(&a.alphas)?;
    let rows = baselines::sphere_curve(&ns, &alphas, a.exact)?;
    let mut s = prov.csv_header();
    s += "alpha";
    for n in &ns {
        s += &format!(",n={n}");
    }
    s.push('\n');
    for row in rows {
        s += &format!("{}", row.alpha);
        for v in row.log10_p_y {
            s += &format!(",{v:.6}");
        }
        s.push('\n');
    }
    write_output(a.out.as_deref(), &s)
}

pub fn run(cmd: &BaselineCmd, prov: &Provenance) -> Result<(), CliError> {
    match cmd {
        BaselineCmd::SphereCurve(a) => sphere_curve(a, prov),
        BaselineCmd::Ball(a) => run_calculator(a, &a.io, eval_ball, prov),
        BaselineCmd::Cube(a) => run_calculator(a, &a.io, eval_cube, prov),
        BaselineCmd::Smac(a) => run_calculator(a, &a.io, eval_smac, prov),
        BaselineCmd::Noisy(a) => run_calculator(a, &a.io, eval_noisy, prov),
        BaselineCmd::Logconcave(a) => run_calculator(a, &a.io, eval_logconcave, prov),
        BaselineCmd::BoundedDensity(a) => run_calculator(a, &a.io, eval_bounded_density, prov),
        BaselineCmd::EffectiveDim(a) => run_calculator(a, &a.io, eval_effective_dim, prov),
    }
}
