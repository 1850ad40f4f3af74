use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde_json::{json, Value};
use sparsenet::bench::{bench_sparse_cross, BenchOptions};
use sparsenet::data::{ConstantColumns, DataMatrix};
use sparsenet::filtration::{
    block_permutation, build_filtration, connected_components, glasso_filtration_from_covariance,
    threshold_adjacency, zero_pattern_adjacency, AdjacencyMatrix, FiltrationResult, ZERO_PATTERN_EPS,
};
use sparsenet::glasso::{glasso_path, GlassoOptions};
use sparsenet::io::{fmt_f64, read_data_csv, write_matrix};
use sparsenet::partial::{partial_from_residuals_with, sparse_partial_network, EdgeRule, NetworkOptions};
use sparsenet::synth::{synth_data, Structure};
use sparsenet::threshold::{lambda_grid_from_data, sparse_correlation, sparse_cross_correlation, LambdaGrid};
use sparsenet::{rank_diagnostic, sample_cross_correlation};

use crate::args::*;
use crate::CliError;

type Result<T> = std::result::Result<T, CliError>;

pub struct Context {
    pub output: PathBuf,
    pub seed: u64,
    pub threads: Option<usize>,
}

impl Context {
    fn create(&self, name: &str) -> Result<BufWriter<fs::File>> {
        let path = self.output.join(name);
        let file = fs::File::create(&path).map_err(|e| CliError::io(&path, e))?;
        Ok(BufWriter::new(file))
    }

    fn write_json(&self, name: &str, value: &Value) -> Result<()> {
        let mut w = self.create(name)?;
        let text = serde_json::to_string_pretty(value).expect("JSON values always serialize");
        writeln!(w, "{text}").map_err(|e| CliError::io(&self.output.join(name), e))?;
        w.flush().map_err(|e| CliError::io(&self.output.join(name), e))
    }

    fn write_csv(&self, name: &str, f: impl FnOnce(&mut BufWriter<fs::File>) -> std::io::Result<()>) -> Result<()> {
        let mut w = self.create(name)?;
        f(&mut w).and_then(|_| w.flush()).map_err(|e| CliError::io(&self.output.join(name), e))
    }
}

fn required<T>(value: Option<T>, flag: &str) -> Result<T> {
    value.ok_or_else(|| CliError::Usage(format!("--{flag} is required")))
}

fn policy(drop_constant: Option<bool>) -> ConstantColumns {
    if drop_constant.unwrap_or(false) {
        ConstantColumns::Drop
    } else {
        ConstantColumns::Fail
    }
}

fn load(path: Option<PathBuf>, flag: &str) -> Result<DataMatrix> {
    let path = required(path, flag)?;
    Ok(read_data_csv(&path)?)
}

fn load_normalized(path: Option<PathBuf>, drop_constant: Option<bool>) -> Result<DataMatrix> {
    Ok(load(path, "input")?.normalize_with(policy(drop_constant))?)
}

fn column_names(data: &DataMatrix) -> Vec<String> {
    match data.names() {
        Some(names) => names.to_vec(),
        None => data.column_map().iter().map(|j| format!("v{j}")).collect(),
    }
}

fn header(ctx: &Context, command: &str) -> serde_json::Map<String, Value> {
    let mut m = serde_json::Map::new();
    m.insert("command".into(), json!(command));
    m.insert("seed".into(), json!(ctx.seed));
    m
}

/// `lambda,i,j,value` rows.
fn write_lambda_edges(w: &mut impl Write, rows: &[(f64, usize, usize, f64)]) -> std::io::Result<()> {
    writeln!(w, "lambda,i,j,value")?;
    for &(l, i, j, v) in rows {
        writeln!(w, "{},{i},{j},{}", fmt_f64(l), fmt_f64(v))?;
    }
    Ok(())
}

pub fn normalize(ctx: &Context, a: NormalizeArgs) -> Result<()> {
    let raw = load(a.input, "input")?;
    let data = raw.normalize_with(policy(a.drop_constant))?;
    let names = column_names(&data);
    ctx.write_csv("normalized.csv", |w| {
        write_matrix(&mut *w, data.values(), Some(&names)).map_err(std::io::Error::other)
    })?;
    let mut j = header(ctx, "normalize");
    j.insert("n".into(), json!(data.n()));
    j.insert("p".into(), json!(data.p()));
    j.insert("column_map".into(), json!(data.column_map()));
    j.insert("dropped".into(), json!(raw.p() - data.p()));
    ctx.write_json("normalize.json", &Value::Object(j))
}

pub fn corr(ctx: &Context, a: CorrArgs) -> Result<()> {
    let data = load_normalized(a.input, a.drop_constant)?;
    let c = data.sample_correlation()?;
    let names = column_names(&data);
    ctx.write_csv("corr.csv", |w| {
        write_matrix(&mut *w, c.as_matrix(), Some(&names)).map_err(std::io::Error::other)
    })?;
    let rank = rank_diagnostic(&c, None);
    let mut j = header(ctx, "corr");
    j.insert("n".into(), json!(data.n()));
    j.insert("p".into(), json!(data.p()));
    j.insert("column_map".into(), json!(data.column_map()));
    j.insert("rank".into(), json!(rank.rank));
    j.insert("rank_deficient".into(), json!(rank.deficient));
    ctx.write_json("corr.json", &Value::Object(j))
}

fn paired(input: Option<PathBuf>, input_y: Option<PathBuf>, drop_constant: Option<bool>) -> Result<(DataMatrix, DataMatrix)> {
    if drop_constant.unwrap_or(false) {
        return Err(CliError::Usage(
            "--drop-constant is not supported for paired data; columns must stay aligned".into(),
        ));
    }
    let x = load(input, "input")?.normalize()?;
    let y = load(input_y, "input-y")?.normalize()?;
    Ok((x, y))
}

pub fn cross_corr(ctx: &Context, a: CrossCorrArgs) -> Result<()> {
    let (x, y) = paired(a.input, a.input_y, a.drop_constant)?;
    let b = sample_cross_correlation(&x, &y)?;
    ctx.write_csv("cross_corr.csv", |w| {
        write_matrix(&mut *w, b.as_matrix(), None).map_err(std::io::Error::other)
    })?;
    let mut j = header(ctx, "cross-corr");
    j.insert("n".into(), json!(x.n()));
    j.insert("p".into(), json!(x.p()));
    ctx.write_json("cross_corr.json", &Value::Object(j))
}

/// Either the single λ or a data-driven grid of `count` points.
fn lambdas(lambda: Option<f64>, count: Option<usize>, m: &sparsenet::SymmetricMatrix) -> Result<Vec<f64>> {
    match (lambda, count) {
        (Some(l), None) => Ok(vec![l]),
        (None, Some(c)) => Ok(lambda_grid_from_data(m, c)?.values().to_vec()),
        (Some(_), Some(_)) => Err(CliError::Usage("--lambda and --lambda-grid are mutually exclusive".into())),
        (None, None) => Err(CliError::Usage("one of --lambda or --lambda-grid is required".into())),
    }
}

pub fn sparse_corr(ctx: &Context, a: SparseCorrArgs) -> Result<()> {
    let (m, map, kind) = match a.input_y {
        Some(_) => {
            let (x, y) = paired(a.input, a.input_y, a.drop_constant)?;
            let map = x.column_map().to_vec();
            (sample_cross_correlation(&x, &y)?, map, "cross-correlation")
        }
        None => {
            let data = load_normalized(a.input, a.drop_constant)?;
            (data.sample_correlation()?, data.column_map().to_vec(), "correlation")
        }
    };
    let grid = lambdas(a.lambda, a.lambda_grid, &m)?;
    let mut rows = Vec::new();
    let mut fits = Vec::new();
    for &l in &grid {
        let est = if kind == "correlation" {
            sparse_correlation(&m, l)?
        } else {
            sparse_cross_correlation(&m, l)?
        };
        rows.extend(est.nonzeros().into_iter().map(|(i, j, v)| (l, map[i], map[j], v)));
        fits.push(json!({ "lambda": l, "nnz": est.nnz(), "p": est.dim() }));
    }
    ctx.write_csv("sparse_edges.csv", |w| write_lambda_edges(w, &rows))?;
    let mut j = header(ctx, "sparse-corr");
    j.insert("kind".into(), json!(kind));
    j.insert("column_map".into(), json!(map));
    j.insert("fits".into(), json!(fits));
    ctx.write_json("sparse_corr.json", &Value::Object(j))
}

fn glasso_options(tol: Option<f64>, max_sweeps: Option<usize>, penalize_diagonal: Option<bool>, screening: Option<bool>) -> GlassoOptions {
    let d = GlassoOptions::default();
    GlassoOptions {
        tol: tol.unwrap_or(d.tol),
        max_sweeps: max_sweeps.unwrap_or(d.max_sweeps),
        penalize_diagonal: penalize_diagonal.unwrap_or(d.penalize_diagonal),
        screening: screening.unwrap_or(d.screening),
        ..d
    }
}

/// Positive grid for GLASSO: `count` points above zero up to the largest
/// off-diagonal magnitude.
fn positive_grid(m: &sparsenet::SymmetricMatrix, count: usize) -> Result<LambdaGrid> {
    let full = lambda_grid_from_data(m, count + 1)?;
    if full.len() < 2 {
        return Err(CliError::Usage("all off-diagonal entries are zero; no positive λ grid".into()));
    }
    Ok(LambdaGrid::explicit(full.values()[1..].to_vec())?)
}

pub fn glasso(ctx: &Context, a: GlassoArgs) -> Result<()> {
    let data = load(a.input, "input")?;
    let s = data.sample_covariance();
    let grid = match (a.lambda, a.lambda_grid) {
        (None, Some(c)) => positive_grid(&s, c)?.values().to_vec(),
        (l, c) => lambdas(l, c, &s)?,
    };
    let opts = glasso_options(a.tol, a.max_sweeps, a.penalize_diagonal, a.screening);
    let path = glasso_path(&s, &grid, &opts)?;
    let mut rows = Vec::new();
    let mut fits = Vec::new();
    let mut failed = Vec::new();
    for (&l, fit) in grid.iter().zip(path) {
        let sol = match fit {
            Ok(sol) => sol,
            Err(e) if e.is_convergence() => {
                fits.push(json!({ "lambda": l, "converged": false, "error": e.to_string() }));
                failed.push(l);
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        if !sol.converged {
            failed.push(l);
        }
        let theta = sol.precision.as_matrix();
        let p = theta.nrows();
        for i in 0..p {
            for j in i..p {
                if theta[(i, j)] != 0.0 {
                    rows.push((l, i, j, theta[(i, j)]));
                }
            }
        }
        let kappa = connected_components(&zero_pattern_adjacency(&sol.precision, ZERO_PATTERN_EPS)).kappa();
        fits.push(json!({
            "lambda": l,
            "objective": sol.objective,
            "iterations": sol.iterations,
            "kkt_residual": sol.kkt_residual,
            "kappa": kappa,
            "converged": sol.converged,
        }));
    }
    ctx.write_csv("precision_edges.csv", |w| write_lambda_edges(w, &rows))?;
    let mut j = header(ctx, "glasso");
    j.insert("n".into(), json!(data.n()));
    j.insert("p".into(), json!(data.p()));
    j.insert("tol".into(), json!(opts.tol));
    j.insert("penalize_diagonal".into(), json!(opts.penalize_diagonal));
    j.insert("fits".into(), json!(fits));
    ctx.write_json("glasso.json", &Value::Object(j))?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::NotConverged(format!("GLASSO did not converge at λ = {failed:?}")))
    }
}

pub fn partial(ctx: &Context, a: PartialArgs) -> Result<()> {
    let data = load_normalized(a.input, a.drop_constant)?;
    let map = data.column_map().to_vec();
    let rule = match a.rule.unwrap_or(Rule::And) {
        Rule::And => EdgeRule::And,
        Rule::Or => EdgeRule::Or,
    };
    let positive_only = a.positive_only.unwrap_or(false);
    let (rho, method, failed) = match (a.lambda, a.lse.unwrap_or(false)) {
        (Some(l), false) => {
            let opts = NetworkOptions {
                rule,
                positive_only,
                ..Default::default()
            };
            let net = sparse_partial_network(&data, l, &opts)?;
            (net.rho, "lasso", net.failed_nodes)
        }
        (None, true) => (partial_from_residuals_with(&data, a.force_pinv.unwrap_or(false))?, "lse", Vec::new()),
        (Some(_), true) => return Err(CliError::Usage("--lambda and --lse are mutually exclusive".into())),
        (None, false) => return Err(CliError::Usage("one of --lambda or --lse is required".into())),
    };
    let edges: Vec<(usize, usize, f64)> = rho
        .edges(0.0)
        .into_iter()
        .filter(|&(_, _, v)| !positive_only || v > 0.0)
        .map(|(i, j, v)| (map[i], map[j], v))
        .collect();
    ctx.write_csv("partial_edges.csv", |w| {
        sparsenet::io::write_edge_list(&mut *w, edges.iter().copied(), 0.0).map_err(std::io::Error::other)
    })?;
    let failed: Vec<usize> = failed.into_iter().map(|i| map[i]).collect();
    let mut j = header(ctx, "partial");
    j.insert("method".into(), json!(method));
    j.insert("lambda".into(), json!(a.lambda));
    j.insert("rule".into(), json!(if method == "lasso" { Some(format!("{rule:?}").to_lowercase()) } else { None }));
    j.insert("edges".into(), json!(edges.len()));
    j.insert("failed_nodes".into(), json!(failed));
    j.insert("column_map".into(), json!(map));
    ctx.write_json("partial.json", &Value::Object(j))?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::NotConverged(format!("node-wise LASSO failed at nodes {failed:?}")))
    }
}

fn write_curve(ctx: &Context, f: &FiltrationResult) -> Result<()> {
    ctx.write_csv("beta0.csv", |w| {
        writeln!(w, "lambda,beta0,edges")?;
        for ((l, b), e) in f.grid.values().iter().zip(&f.beta0).zip(&f.edge_counts) {
            writeln!(w, "{},{b},{e}", fmt_f64(*l))?;
        }
        Ok(())
    })
}

fn partitions_json(f: &FiltrationResult) -> Vec<Value> {
    f.grid
        .values()
        .iter()
        .zip(&f.partitions)
        .zip(&f.edge_counts)
        .map(|((l, part), e)| json!({ "lambda": l, "beta0": part.kappa(), "edges": e, "labels": part.labels() }))
        .collect()
}

fn dump_adjacency(ctx: &Context, t: usize, a: &AdjacencyMatrix) -> Result<Value> {
    let perm = block_permutation(a);
    let dense = perm.apply(a).to_dense();
    ctx.write_csv(&format!("adjacency_{t:04}.csv"), |w| {
        for i in 0..dense.nrows() {
            let row: Vec<String> = (0..dense.ncols()).map(|j| dense[(i, j)].to_string()).collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    })?;
    Ok(json!({ "index": t, "order": perm.perm, "blocks": perm.block_ranges() }))
}

pub fn filtration(ctx: &Context, a: FiltrationArgs) -> Result<()> {
    let count = required(a.grid, "grid")?;
    let method = a.method.unwrap_or(FiltrationMethod::Corr);
    let dump = a.dump_adjacency.unwrap_or(false);
    let mut j = header(ctx, "filtration");
    let mut dumps = Vec::new();
    let mut failed = Vec::new();
    match method {
        FiltrationMethod::Corr => {
            let data = load_normalized(a.input, a.drop_constant)?;
            let c = data.sample_correlation()?;
            let grid = lambda_grid_from_data(&c, count)?;
            let f = build_filtration(&c, &grid);
            write_curve(ctx, &f)?;
            if dump {
                for (t, &l) in grid.values().iter().enumerate() {
                    dumps.push(dump_adjacency(ctx, t, &threshold_adjacency(&c, l))?);
                }
            }
            j.insert("method".into(), json!("corr"));
            j.insert("column_map".into(), json!(data.column_map()));
            j.insert("grid".into(), json!(partitions_json(&f)));
        }
        FiltrationMethod::Glasso => {
            if a.drop_constant.unwrap_or(false) {
                return Err(CliError::Usage("--drop-constant applies to the correlation method only".into()));
            }
            let data = load(a.input, "input")?;
            let s = data.sample_covariance();
            let grid = positive_grid(&s, count)?;
            let opts = glasso_options(a.tol, None, a.penalize_diagonal, None);
            let gf = glasso_filtration_from_covariance(&s, &grid, &opts)?;
            let f = &gf.zero_pattern;
            write_curve(ctx, f)?;
            if dump {
                if let Some(graphs) = &f.adjacency {
                    for (t, g) in graphs.iter().enumerate() {
                        dumps.push(dump_adjacency(ctx, t, g)?);
                    }
                }
            }
            failed = gf.skipped.iter().map(|&t| grid.values()[t]).collect();
            j.insert("method".into(), json!("glasso"));
            j.insert("grid".into(), json!(partitions_json(f)));
            j.insert("matches_threshold".into(), json!(gf.partitions_match));
            j.insert("skipped_lambdas".into(), json!(failed));
        }
    }
    if dump {
        j.insert("adjacency".into(), json!(dumps));
    }
    ctx.write_json("partitions.json", &Value::Object(j))?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::NotConverged(format!("GLASSO skipped λ = {failed:?}")))
    }
}

pub fn bench(ctx: &Context, a: BenchArgs) -> Result<()> {
    let ns = a.n_list.unwrap_or_else(|| vec![10]);
    let ps = a.p_list.unwrap_or_else(|| vec![10, 50, 100]);
    let grid = LambdaGrid::uniform(a.grid.unwrap_or(10), a.grid_max.unwrap_or(0.9))?;
    let opts = BenchOptions {
        budget: Duration::from_millis(a.budget_ms.unwrap_or(200)),
        threads: ctx.threads.unwrap_or(1),
    };
    let report = bench_sparse_cross(&ns, &ps, &grid, ctx.seed, &opts)?;
    ctx.write_csv("bench_timing.csv", |w| w.write_all(report.to_csv().as_bytes()))?;
    let cells: Vec<Value> = report
        .cells
        .iter()
        .map(|c| json!({ "n": c.n, "p": c.p, "agreement": c.agreement }))
        .collect();
    let mut j = header(ctx, "bench");
    j.insert("methods".into(), json!([report.methods.0, report.methods.1]));
    j.insert("grid".into(), json!(report.grid));
    j.insert("cells".into(), json!(cells));
    ctx.write_json("bench.json", &Value::Object(j))?;
    for c in &report.cells {
        log::info!("n = {}, p = {}: {:.1}× faster", c.n, c.p, c.ratio);
    }
    Ok(())
}

pub fn rank(ctx: &Context, a: RankArgs) -> Result<()> {
    let data = load_normalized(a.input, a.drop_constant)?;
    let d = rank_diagnostic(&data.sample_correlation()?, a.tol);
    let mut j = header(ctx, "rank");
    j.insert("n".into(), json!(data.n()));
    j.insert("p".into(), json!(data.p()));
    j.insert("rank".into(), json!(d.rank));
    j.insert("deficient".into(), json!(d.deficient));
    j.insert("tol".into(), json!(d.tol));
    ctx.write_json("rank.json", &Value::Object(j))
}

pub fn synth(ctx: &Context, a: SynthArgs) -> Result<()> {
    let n = required(a.n, "n")?;
    let p = required(a.p, "p")?;
    let structure = match a.structure.unwrap_or(StructureKind::IidNormal) {
        StructureKind::IidNormal => Structure::IidNormal,
        StructureKind::PlantedBlocks => Structure::PlantedBlocks {
            blocks: required(a.blocks, "blocks")?,
            within: required(a.within, "within")?,
            between: a.between.unwrap_or(0.0),
        },
        StructureKind::ChainPrecision => Structure::ChainPrecision {
            coupling: required(a.coupling, "coupling")?,
        },
    };
    let data = synth_data(n, p, structure, ctx.seed)?;
    let names: Vec<String> = (0..p).map(|j| format!("v{j}")).collect();
    ctx.write_csv("data.csv", |w| {
        write_matrix(&mut *w, data.values(), Some(&names)).map_err(std::io::Error::other)
    })?;
    let mut j = header(ctx, "synth");
    j.insert("n".into(), json!(n));
    j.insert("p".into(), json!(p));
    j.insert("structure".into(), serde_json::to_value(structure).expect("structure serializes"));
    ctx.write_json("synth.json", &Value::Object(j))
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}
