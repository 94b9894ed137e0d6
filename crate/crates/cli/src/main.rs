//! `treegeom`: rank analysis, membership, generation, chart diagnostics,
//! tangent dimensions and properness for tree-based tensor formats.
//!
//! Reports are JSON on stdout (or `--out`), tables with `--human`.
//! Exit codes: 0 affirmative, 1 negative verdict, 2 input error, 3 generation failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use serde_json::{json, Value};
use treegeom::format::{generate_tree_tensor, MAX_GENERATION_ATTEMPTS};
use treegeom::{
    check_chain, ft_chart, ft_chart_inverse, ft_chart_point, is_member, is_proper, minimal_subspace,
    tangent_dimension, tree_rank, DenseTensor, DimensionTree, Error, TreeRank,
};

/// Operator-space commands hold dense `N × N` matrices.
const MAX_OPERATOR_DIM: usize = 1_000_000;

/// Round trips below this error count as passing.
const ROUND_TRIP_TOL: f64 = 1e-8;

#[derive(Parser)]
#[command(name = "treegeom", version, about = "Geometry of tree-based tensor formats")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tree-based rank profile, singular-value tails and nesting-chain residuals.
    Analyze(Common),
    /// Membership of a tensor in the set with a prescribed tree-based rank.
    Membership(Common),
    /// Write a random tensor with a prescribed tree-based rank.
    Generate(Common),
    /// Round-trip diagnostics of the tree chart at a tensor.
    ChartCheck(ChartArgs),
    /// Tangent dimension: library, Jacobian oracle and closed-form count.
    Tangent(Common),
    /// Whether the fixed-rank set differs from every single-level Tucker set.
    Proper(Common),
}

#[derive(Args, Clone)]
struct Common {
    /// Tensor file (JSON or binary layout).
    #[arg(long)]
    tensor: Option<PathBuf>,
    /// Tree file, or one of `tucker`, `linear`, `binary`.
    #[arg(long)]
    tree: Option<String>,
    /// Rank file `{"ranks": [{"block": [...], "r": k}, ...]}`.
    #[arg(long)]
    ranks: Option<PathBuf>,
    /// Mode dimensions, comma separated (generate, proper without --tensor).
    #[arg(long, value_delimiter = ',')]
    shape: Option<Vec<usize>>,
    #[arg(long, default_value_t = treegeom::DEFAULT_TOL)]
    tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    /// Output path (the tensor for `generate`, the report otherwise).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Plain-text table instead of JSON.
    #[arg(long)]
    human: bool,
}

#[derive(Args)]
struct ChartArgs {
    #[command(flatten)]
    common: Common,
    /// Perturbation magnitudes `‖coords‖`, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.0, 0.01, 0.1])]
    scales: Vec<f64>,
}

/// A finished command: report plus exit code.
struct Outcome {
    report: Value,
    code: u8,
}

fn fail(code: u8, e: impl std::fmt::Display) -> (u8, String) {
    (code, e.to_string())
}

fn input_error(e: Error) -> (u8, String) {
    fail(2, e)
}

type CmdResult = Result<Outcome, (u8, String)>;

impl Common {
    fn check(&self) -> Result<(), (u8, String)> {
        if !(self.tol > 0.0) {
            return Err(fail(2, "--tol must be positive"));
        }
        if self.trials == 0 {
            return Err(fail(2, "--trials must be at least 1"));
        }
        Ok(())
    }

    fn tensor(&self) -> Result<DenseTensor, (u8, String)> {
        let path = self.tensor.as_ref().ok_or_else(|| fail(2, "--tensor is required"))?;
        DenseTensor::read(path).map_err(|e| fail(2, format!("{}: {e}", path.display())))
    }

    fn tree(&self, d: usize) -> Result<DimensionTree, (u8, String)> {
        let arg = self.tree.as_deref().ok_or_else(|| fail(2, "--tree is required"))?;
        let tree = match arg {
            "tucker" => DimensionTree::tucker(d),
            "linear" => DimensionTree::linear(d),
            "binary" => DimensionTree::balanced_binary(d),
            path => std::fs::read_to_string(path)
                .map_err(Error::from)
                .and_then(|t| DimensionTree::from_json(&t)),
        }
        .map_err(|e| fail(2, format!("tree {arg}: {e}")))?;
        if tree.d() != d {
            return Err(fail(2, format!("tree has {} modes but the tensor has order {d}", tree.d())));
        }
        Ok(tree)
    }

    fn ranks(&self) -> Result<Option<TreeRank>, (u8, String)> {
        self.ranks
            .as_ref()
            .map(|p| TreeRank::read(p).map_err(|e| fail(2, format!("{}: {e}", p.display()))))
            .transpose()
    }

    fn required_ranks(&self) -> Result<TreeRank, (u8, String)> {
        self.ranks()?.ok_or_else(|| fail(2, "--ranks is required"))
    }

    fn shape(&self) -> Result<Vec<usize>, (u8, String)> {
        match (&self.shape, &self.tensor) {
            (Some(s), _) if s.is_empty() || s.contains(&0) => Err(fail(2, "--shape entries must be positive")),
            (Some(s), _) => Ok(s.clone()),
            (None, Some(_)) => Ok(self.tensor()?.shape().to_vec()),
            (None, None) => Err(fail(2, "--shape or --tensor is required")),
        }
    }

    fn header(&self, command: &str) -> serde_json::Map<String, Value> {
        let mut m = serde_json::Map::new();
        m.insert("tool".into(), json!("treegeom"));
        m.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
        m.insert("command".into(), json!(command));
        m.insert("seed".into(), json!(self.seed));
        m.insert("tol".into(), json!(self.tol));
        m
    }
}

fn report(mut head: serde_json::Map<String, Value>, body: impl Serialize) -> Value {
    if let Value::Object(b) = serde_json::to_value(body).expect("report serialization") {
        head.extend(b);
    }
    Value::Object(head)
}

fn guard_operator_size(shape: &[usize]) -> Result<(), (u8, String)> {
    let n = shape.iter().try_fold(1usize, |a, b| a.checked_mul(*b));
    match n {
        Some(n) if n <= MAX_OPERATOR_DIM => Ok(()),
        _ => Err(fail(
            2,
            format!("N = Π n_j exceeds {MAX_OPERATOR_DIM}; operator-space commands build dense N×N matrices"),
        )),
    }
}

fn rank_entries(r: &TreeRank) -> Vec<Value> {
    r.ranks.iter().map(|(a, k)| json!({"block": a, "r": k})).collect()
}

fn analyze(c: &Common) -> CmdResult {
    let v = c.tensor()?;
    let tree = c.tree(v.order())?;
    let mut nodes = Vec::new();
    for a in tree.nodes() {
        let b = minimal_subspace(&v, &a, c.tol).map_err(input_error)?;
        let s = &b.singular_values;
        let s1 = s.first().copied().unwrap_or(0.0);
        let r = b.rank();
        // smallest kept and largest dropped singular value, relative to the largest
        let kept = s1.max(f64::MIN_POSITIVE);
        nodes.push(json!({
            "block": a,
            "r": r,
            "last_kept": s.get(r.wrapping_sub(1)).map(|x| x / kept),
            "first_dropped": s.get(r).map(|x| x / kept),
        }));
    }
    let chain = check_chain(&v, &tree, c.tol).map_err(input_error)?;
    let norm = v.frobenius_norm();
    let body = json!({
        "shape": v.shape(),
        "tree": serde_json::from_str::<Value>(&tree.to_json()).expect("tree JSON"),
        "nodes": nodes,
        "chain_residuals": chain.iter().map(|x| x / norm).collect::<Vec<_>>(),
    });
    Ok(Outcome {
        report: report(c.header("analyze"), body),
        code: 0,
    })
}

fn membership(c: &Common) -> CmdResult {
    let v = c.tensor()?;
    let tree = c.tree(v.order())?;
    let r = c.required_ranks()?;
    let rep = is_member(&v, &tree, &r, c.tol).map_err(input_error)?;
    let code = if rep.member { 0 } else { 1 };
    let failing = rep.failing_levels();
    let mut out = report(c.header("membership"), &rep);
    out["failing_levels"] = json!(failing);
    Ok(Outcome { report: out, code })
}

fn generate(c: &Common) -> CmdResult {
    let shape = c.shape.clone().ok_or_else(|| fail(2, "--shape is required"))?;
    if shape.is_empty() || shape.contains(&0) {
        return Err(fail(2, "--shape entries must be positive"));
    }
    let tree = c.tree(shape.len())?;
    let r = c.required_ranks()?;
    r.check_covers(&tree).map_err(input_error)?;
    let g = generate_tree_tensor(&tree, &r, &shape, c.seed, MAX_GENERATION_ATTEMPTS).map_err(|e| match e {
        Error::Inadmissible(_) | Error::GenerationFailure(_) => fail(3, e),
        other => input_error(other),
    })?;
    // re-verified before anything is written
    if !is_member(&g.tensor, &tree, &r, c.tol).map_err(input_error)?.member {
        return Err(fail(3, "generated tensor does not verify at the requested tolerance"));
    }
    let body = json!({
        "shape": shape,
        "ranks": rank_entries(&r),
        "attempts": g.attempts,
        "norm": g.tensor.frobenius_norm(),
    });
    let mut out = report(c.header("generate"), body);
    match &c.out {
        Some(path) => {
            g.tensor.write(path).map_err(|e| fail(2, format!("{}: {e}", path.display())))?;
            out["written"] = json!(path.display().to_string());
        }
        None => out["tensor"] = serde_json::from_str(&g.tensor.to_json()).expect("tensor JSON"),
    }
    Ok(Outcome { report: out, code: 0 })
}

#[derive(Serialize)]
struct ScaleSummary {
    scale: f64,
    trials: usize,
    in_domain: usize,
    outside_domain: usize,
    max_coordinate_error: f64,
    max_reconstruction_error: f64,
    pass: bool,
}

fn chart_check(a: &ChartArgs) -> CmdResult {
    let c = &a.common;
    let v = c.tensor()?;
    guard_operator_size(v.shape())?;
    let tree = c.tree(v.order())?;
    let r = match c.ranks()? {
        Some(r) => r,
        None => tree_rank(&v, &tree, c.tol).map_err(input_error)?,
    };
    let chart = match ft_chart(&v, &tree, &r, c.tol) {
        Ok(ch) => ch,
        Err(e @ Error::NotOnManifold(_)) => return Err(fail(1, e)),
        Err(e) => return Err(input_error(e)),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    let mut summaries = Vec::new();
    for &scale in &a.scales {
        if !(scale >= 0.0) {
            return Err(fail(2, "--scales must be nonnegative"));
        }
        let mut s = ScaleSummary {
            scale,
            trials: c.trials,
            in_domain: 0,
            outside_domain: 0,
            max_coordinate_error: 0.0,
            max_reconstruction_error: 0.0,
            pass: true,
        };
        for _ in 0..c.trials {
            let g: Vec<f64> = (0..chart.e_dim()).map(|_| rng.sample(StandardNormal)).collect();
            let gn = g.iter().map(|x| x * x).sum::<f64>().sqrt();
            let coords: Vec<f64> = g.iter().map(|x| if gn > 0.0 { scale * x / gn } else { 0.0 }).collect();
            let noise = DenseTensor::from_fn(chart.core.shape().to_vec(), |_| rng.sample(StandardNormal))
                .expect("core shape");
            let u = chart
                .core
                .add(&noise.scale(scale * chart.core.frobenius_norm() / noise.frobenius_norm()))
                .expect("same shape");
            let w = match ft_chart_point(&chart, &coords, &u) {
                Ok(w) => w,
                Err(Error::InvalidCore(_)) => {
                    s.outside_domain += 1;
                    continue;
                }
                Err(e) => return Err(input_error(e)),
            };
            let (c2, u2) = match ft_chart_inverse(&chart, &w, ROUND_TRIP_TOL) {
                Ok(x) => x,
                Err(
                    Error::OutsideChartDomain { .. }
                    | Error::OutsideChartImage { .. }
                    | Error::NotOnManifold(_),
                ) => {
                    s.outside_domain += 1;
                    continue;
                }
                Err(e) => return Err(input_error(e)),
            };
            s.in_domain += 1;
            let dc = c2.iter().zip(&coords).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
            s.max_coordinate_error = s.max_coordinate_error.max(if scale > 0.0 { dc / scale } else { dc });
            let back = ft_chart_point(&chart, &c2, &u2).map_err(input_error)?;
            let dw = back.sub(&w).expect("same shape").frobenius_norm() / w.frobenius_norm();
            s.max_reconstruction_error = s.max_reconstruction_error.max(dw);
        }
        s.pass = s.max_coordinate_error <= ROUND_TRIP_TOL && s.max_reconstruction_error <= ROUND_TRIP_TOL;
        summaries.push(s);
    }
    let pass = summaries.iter().all(|s| s.pass);
    let body = json!({
        "ranks": rank_entries(&r),
        "e_dim": chart.e_dim(),
        "core_dim": chart.core.len(),
        "threshold": ROUND_TRIP_TOL,
        "scales": summaries,
        "pass": pass,
    });
    Ok(Outcome {
        report: report(c.header("chart-check"), body),
        code: if pass { 0 } else { 1 },
    })
}

fn tangent(c: &Common) -> CmdResult {
    let v = c.tensor()?;
    guard_operator_size(v.shape())?;
    let tree = c.tree(v.order())?;
    let r = match c.ranks()? {
        Some(r) => r,
        None => tree_rank(&v, &tree, c.tol).map_err(input_error)?,
    };
    match tangent_dimension(&v, &tree, &r, c.tol) {
        Ok(rep) => {
            let code = if rep.agree { 0 } else { 1 };
            Ok(Outcome {
                report: report(c.header("tangent"), &rep),
                code,
            })
        }
        // the requested ranks are not those of the tensor: nothing to agree on
        Err(e @ Error::NotOnManifold(_)) => Ok(Outcome {
            report: report(c.header("tangent"), json!({"agree": false, "reason": e.to_string()})),
            code: 1,
        }),
        Err(e) => Err(input_error(e)),
    }
}

fn proper(c: &Common) -> CmdResult {
    let shape = c.shape()?;
    let tree = c.tree(shape.len())?;
    let r = c.required_ranks()?;
    let verdict = is_proper(&tree, &r, &shape, c.trials, c.seed).map_err(input_error)?;
    let code = if verdict.proper { 0 } else { 1 };
    let mut out = report(c.header("proper"), &verdict);
    out["trials"] = json!(c.trials);
    Ok(Outcome { report: out, code })
}

fn human(v: &Value) -> String {
    fn walk(prefix: &str, v: &Value, out: &mut String) {
        match v {
            Value::Object(m) => {
                for (k, x) in m {
                    let p = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                    walk(&p, x, out);
                }
            }
            Value::Array(items) if items.iter().any(|x| x.is_object() || x.is_array()) => {
                for (i, x) in items.iter().enumerate() {
                    walk(&format!("{prefix}[{i}]"), x, out);
                }
            }
            other => out.push_str(&format!("{prefix:<40} {other}\n")),
        }
    }
    let mut out = String::new();
    walk("", v, &mut out);
    out
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (common, result) = match &cli.command {
        Command::Analyze(c) => (c, c.check().and_then(|_| analyze(c))),
        Command::Membership(c) => (c, c.check().and_then(|_| membership(c))),
        Command::Generate(c) => (c, c.check().and_then(|_| generate(c))),
        Command::ChartCheck(a) => (&a.common, a.common.check().and_then(|_| chart_check(a))),
        Command::Tangent(c) => (c, c.check().and_then(|_| tangent(c))),
        Command::Proper(c) => (c, c.check().and_then(|_| proper(c))),
    };
    match result {
        Ok(outcome) => {
            let text = if common.human {
                human(&outcome.report)
            } else {
                format!("{}\n", serde_json::to_string_pretty(&outcome.report).expect("report JSON"))
            };
            let to_file = common.out.as_ref().filter(|_| !matches!(cli.command, Command::Generate(_)));
            match to_file {
                Some(path) => {
                    if let Err(e) = std::fs::write(path, text) {
                        eprintln!("error: {}: {e}", path.display());
                        return ExitCode::from(2);
                    }
                }
                None => print!("{text}"),
            }
            ExitCode::from(outcome.code)
        }
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
