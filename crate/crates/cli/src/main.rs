//! `dunkl`: batch front end for contexts, intertwiners, kernels and checks.

use std::any::Any;
use std::fmt::Write as _;
use std::io::{self, Write as _};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context as _};
use clap::{Args, Parser, Subcommand};
use dunkl_core::config::{cache_dir, cache_path, ContextCache, ContextConfig};
use dunkl_core::kernel::{KernelEvaluator, DELTA_DEGREES};
use dunkl_core::poly::{format_polynomial, parse_polynomial};
use dunkl_core::quad::gauss_rule;
use dunkl_core::verify::{self, Suite, VerifyOptions};
use dunkl_core::{CRational, Complex64, DunklContext, Error, Scalar};
use rayon::prelude::*;

/// Cache location when the environment variable is unset.
const DEFAULT_CACHE_DIR: &str = ".dunkl-cache";

#[derive(Parser)]
#[command(
    name = "dunkl",
    version,
    about = "Dunkl intertwining operator and kernel computations",
    after_help = "Exact contexts cache λ_n under $DUNKL_CACHE_DIR (default ./.dunkl-cache)."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ContextArgs {
    /// JSON context configuration.
    #[arg(long)]
    config: PathBuf,
    /// Truncation degree; defaults to the configured or dimension default.
    #[arg(long)]
    degree: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve H_n up to the truncation degree, report M* status and δ̂, and cache λ_n.
    Build(ContextArgs),
    /// Print V_k p for a polynomial literal such as "x1^2 - 2 x1 x2".
    Intertwine {
        #[command(flatten)]
        ctx: ContextArgs,
        poly: String,
    },
    /// CSV of λ_n(g): n,g,re,im.
    LambdaTable(ContextArgs),
    /// CSV of L_k(x,y) over a grid: x.., y.., re, im, tail_bound.
    KernelGrid {
        #[command(flatten)]
        ctx: ContextArgs,
        /// Axes as "name:lo:hi:step" joined by commas; names are x1..xd, y1..yd
        /// (x, y when d = 1). Axes not listed stay at 0.
        #[arg(long)]
        grid: String,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        /// Emit points whose tail bound is not below the tolerance instead of failing.
        #[arg(long)]
        allow_uncertified: bool,
    },
    /// E_k(x,y) with a certified truncation bound.
    EkEval {
        #[command(flatten)]
        ctx: ContextArgs,
        /// Comma-separated coordinates; complex entries like "1+2i" are allowed.
        #[arg(long, allow_hyphen_values = true)]
        x: String,
        #[arg(long, allow_hyphen_values = true)]
        y: String,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Run a verification suite and print the JSON report.
    Verify {
        #[command(flatten)]
        ctx: ContextArgs,
        /// exact, series, quadrature, signs, positivity or all.
        #[arg(long, default_value = "all")]
        suite: Suite,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Radius of the ball random test points are drawn from.
        #[arg(long, default_value_t = 1.0)]
        radius: f64,
    },
    /// CSV of the tensor Gauss rule for the unit Gaussian: x.., weight.
    ExportQuadrature {
        /// Dimension; taken from --config when omitted.
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Points per axis.
        #[arg(long)]
        q: usize,
    },
}

/// Marker for exit status 1.
#[derive(Debug)]
struct VerificationFailed;

impl std::fmt::Display for VerificationFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("verification failed")
    }
}

impl std::error::Error for VerificationFailed {}

macro_rules! by_mode {
    ($cfg:expr, $f:ident($($arg:expr),*)) => {
        if $cfg.needs_float() {
            $f::<Complex64>($($arg),*)
        } else {
            $f::<CRational>($($arg),*)
        }
    };
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut out = io::stdout().lock();
    match run(cli.command, &mut out) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<VerificationFailed>() => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command, out: &mut impl io::Write) -> anyhow::Result<()> {
    let text = match command {
        Command::Build(a) => {
            let cfg = load_config(&a.config)?;
            by_mode!(cfg, cmd_build(&cfg, a.degree))?
        }
        Command::Intertwine { ctx: a, poly } => {
            let cfg = load_config(&a.config)?;
            by_mode!(cfg, cmd_intertwine(&cfg, &poly))?
        }
        Command::LambdaTable(a) => {
            let cfg = load_config(&a.config)?;
            by_mode!(cfg, cmd_lambda_table(&cfg, a.degree))?
        }
        Command::KernelGrid { ctx: a, grid, tol, allow_uncertified } => {
            let cfg = load_config(&a.config)?;
            by_mode!(cfg, cmd_kernel_grid(&cfg, a.degree, &grid, tol, allow_uncertified))?
        }
        Command::EkEval { ctx: a, x, y, tol } => {
            let cfg = load_config(&a.config)?;
            by_mode!(cfg, cmd_ek_eval(&cfg, a.degree, &x, &y, tol))?
        }
        Command::Verify { ctx: a, suite, seed, radius } => {
            let cfg = load_config(&a.config)?;
            let opts = VerifyOptions { seed, radius };
            let (text, pass) = by_mode!(cfg, cmd_verify(&cfg, a.degree, suite, &opts))?;
            out.write_all(text.as_bytes())?;
            return if pass { Ok(()) } else { Err(VerificationFailed.into()) };
        }
        Command::ExportQuadrature { dim, config, q } => {
            let d = match (dim, config) {
                (Some(d), _) => d,
                (None, Some(path)) => load_config(&path)?.root_system::<Complex64>()?.dim(),
                (None, None) => bail!("export-quadrature needs --dim or --config"),
            };
            cmd_export_quadrature(d, q)?
        }
    };
    out.write_all(text.as_bytes())?;
    Ok(())
}

fn load_config(path: &Path) -> anyhow::Result<ContextConfig> {
    ContextConfig::load(path).with_context(|| format!("reading {}", path.display()))
}

fn degree_of(cfg: &ContextConfig, degree: Option<usize>) -> anyhow::Result<usize> {
    Ok(match degree {
        Some(n) => n,
        None => cfg.truncation()?,
    })
}

fn resolved_cache_path(cfg: &ContextConfig) -> PathBuf {
    let dir = cache_dir().unwrap_or_else(|| PathBuf::from(DEFAULT_CACHE_DIR));
    cache_path(&dir, cfg)
}

/// Context with cached λ_n reinstalled when available (exact mode only).
fn load_context<C: Scalar>(cfg: &ContextConfig) -> anyhow::Result<DunklContext<C>> {
    let mut ctx = cfg.context::<C>()?;
    let path = resolved_cache_path(cfg);
    if let Some(exact) = (&mut ctx as &mut dyn Any).downcast_mut::<DunklContext<CRational>>() {
        if path.exists() {
            let cache = ContextCache::load(&path)?;
            if cache.key == cfg.cache_key() {
                cache
                    .restore(exact)
                    .with_context(|| format!("restoring {}", path.display()))?;
            }
        }
    }
    Ok(ctx)
}

fn prepared_context<C: Scalar>(cfg: &ContextConfig, n: usize) -> anyhow::Result<DunklContext<C>> {
    let mut ctx = load_context::<C>(cfg)?;
    ctx.prepare(n)?;
    Ok(ctx)
}

fn cmd_build<C: Scalar>(cfg: &ContextConfig, degree: Option<usize>) -> anyhow::Result<String> {
    let n = degree_of(cfg, degree)?;
    let mut ctx = load_context::<C>(cfg)?;
    let mut s = String::new();
    writeln!(s, "group order |G| = {}", ctx.group().order())?;
    writeln!(s, "gamma = {}", ctx.gamma())?;
    writeln!(s, "mode = {}", if C::EXACT { "exact" } else { "floating" })?;
    for m in 1..=n {
        if m > ctx.prepared_degree() {
            match ctx.prepare(m) {
                Ok(()) => {}
                Err(Error::NotInMStar { degree }) => {
                    io::stdout().write_all(s.as_bytes())?;
                    bail!("k is not in M*: W_n is not invertible at n = {degree}");
                }
                Err(e) => return Err(e.into()),
            }
        }
        let how = if ctx.h(m)?.lambda().is_some() { "group algebra" } else { "matrix on P_n" };
        writeln!(s, "n = {m}: W_n invertible ({how})")?;
    }
    let est = ctx.estimate_delta(DELTA_DEGREES.max(n + 1))?.clone();
    writeln!(s, "n,n*max|lambda_n|")?;
    for (m, v) in &est.table {
        writeln!(s, "{m},{v:.16e}")?;
    }
    if !est.excluded.is_empty() {
        writeln!(s, "degrees without lambda_n: {:?}", est.excluded)?;
    }
    writeln!(s, "delta_hat = {:.16e}", est.delta_hat)?;
    if let Some(exact) = (&ctx as &dyn Any).downcast_ref::<DunklContext<CRational>>() {
        let path = resolved_cache_path(cfg);
        ContextCache::from_context(&cfg.cache_key(), exact)?.save(&path)?;
        writeln!(s, "cache = {}", path.display())?;
    } else {
        writeln!(s, "cache = none (floating mode)")?;
    }
    Ok(s)
}

fn cmd_intertwine<C: Scalar>(cfg: &ContextConfig, literal: &str) -> anyhow::Result<String> {
    let mut ctx = load_context::<C>(cfg)?;
    let p = parse_polynomial::<C>(literal, ctx.dim())?;
    ctx.prepare(p.degree().unwrap_or(0) as usize)?;
    Ok(format!("{}\n", format_polynomial(&ctx.intertwine(&p)?)))
}

fn cmd_lambda_table<C: Scalar>(cfg: &ContextConfig, degree: Option<usize>) -> anyhow::Result<String> {
    let top = degree_of(cfg, degree)?;
    let ctx = prepared_context::<C>(cfg, top)?;
    let mut s = String::from("n,g,re,im\n");
    for (n, g, c) in ctx.lambda_table().into_iter().filter(|t| t.0 <= top) {
        let z = c.to_c64();
        writeln!(s, "{n},{g},{:.16e},{:.16e}", z.re, z.im)?;
    }
    Ok(s)
}

struct Axis {
    slot: usize,
    values: Vec<f64>,
}

fn parse_grid(spec: &str, d: usize) -> anyhow::Result<Vec<Axis>> {
    let mut axes: Vec<Axis> = Vec::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let fields: Vec<&str> = part.split(':').collect();
        let [name, lo, hi, step] = fields[..] else {
            bail!("grid axis \"{part}\" is not name:lo:hi:step");
        };
        let slot = axis_slot(name, d).ok_or_else(|| anyhow!("unknown grid axis \"{name}\""))?;
        if axes.iter().any(|a| a.slot == slot) {
            bail!("grid axis \"{name}\" given twice");
        }
        let num = |t: &str| t.trim().parse::<f64>().with_context(|| format!("bad number \"{t}\" in \"{part}\""));
        let (lo, hi, step) = (num(lo)?, num(hi)?, num(step)?);
        if step.is_nan() || step <= 0.0 || hi < lo {
            bail!("grid axis \"{part}\" needs lo <= hi and step > 0");
        }
        let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
        axes.push(Axis { slot, values: (0..count).map(|i| lo + i as f64 * step).collect() });
    }
    axes.sort_by_key(|a| a.slot);
    Ok(axes)
}

/// Position of a named axis in the concatenated `(x, y)` point.
fn axis_slot(name: &str, d: usize) -> Option<usize> {
    let (block, rest) = match name.as_bytes().first()? {
        b'x' => (0, &name[1..]),
        b'y' => (d, &name[1..]),
        _ => return None,
    };
    if rest.is_empty() {
        return (d == 1).then_some(block);
    }
    let i: usize = rest.parse().ok()?;
    (1..=d).contains(&i).then(|| block + i - 1)
}

fn grid_points(axes: &[Axis], d: usize) -> Vec<Vec<f64>> {
    let mut points = vec![vec![0.0; 2 * d]];
    for axis in axes {
        points = points
            .into_iter()
            .flat_map(|p| {
                axis.values.iter().map(move |&v| {
                    let mut q = p.clone();
                    q[axis.slot] = v;
                    q
                })
            })
            .collect();
    }
    points
}

fn cmd_kernel_grid<C: Scalar>(
    cfg: &ContextConfig,
    degree: Option<usize>,
    grid: &str,
    tol: f64,
    allow_uncertified: bool,
) -> anyhow::Result<String> {
    let n = degree_of(cfg, degree)?;
    let ev = KernelEvaluator::hermite_only(load_context::<C>(cfg)?, n)?;
    let d = ev.dim();
    let points = grid_points(&parse_grid(grid, d)?, d);
    let rows: Vec<(Complex64, f64)> = points
        .par_iter()
        .map(|p| {
            let (x, y) = p.split_at(d);
            Ok((ev.lk_truncated(x, y)?, ev.tail(x, y).value))
        })
        .collect::<dunkl_core::Result<_>>()?;
    if !allow_uncertified {
        let bad = rows.iter().filter(|r| r.1.is_nan() || r.1 >= tol).count();
        if bad > 0 {
            let worst = points.iter().zip(&rows).max_by(|a, b| a.1 .1.total_cmp(&b.1 .1)).unwrap();
            let norm_y = worst.0[d..].iter().map(|v| v * v).sum::<f64>().sqrt();
            bail!(
                "{bad} of {} grid points have tail bound >= {tol:e} at degree {n}; \
                 certified |x| radius at |y| = {norm_y:.6} is {:.6}. \
                 Raise --degree, shrink the grid, or pass --allow-uncertified",
                points.len(),
                ev.certified_radius(norm_y, tol)
            );
        }
    }
    let mut s = String::new();
    let names: Vec<String> = (1..=d).map(|i| format!("x{i}")).chain((1..=d).map(|i| format!("y{i}"))).collect();
    writeln!(s, "{},re,im,tail_bound", names.join(","))?;
    for (p, (v, tail)) in points.iter().zip(&rows) {
        for c in p {
            write!(s, "{c:.16e},")?;
        }
        writeln!(s, "{:.16e},{:.16e},{tail:.16e}", v.re, v.im)?;
    }
    Ok(s)
}

fn parse_point(text: &str, d: usize) -> anyhow::Result<Vec<Complex64>> {
    let v = text
        .split(',')
        .map(|t| Complex64::parse_scalar(t.trim()))
        .collect::<dunkl_core::Result<Vec<_>>>()?;
    if v.len() != d {
        bail!("point \"{text}\" has {} coordinates, expected {d}", v.len());
    }
    Ok(v)
}

fn cmd_ek_eval<C: Scalar>(
    cfg: &ContextConfig,
    degree: Option<usize>,
    x: &str,
    y: &str,
    tol: f64,
) -> anyhow::Result<String> {
    let n = degree_of(cfg, degree)?;
    let mut ctx = prepared_context::<C>(cfg, n)?;
    let (x, y) = (parse_point(x, ctx.dim())?, parse_point(y, ctx.dim())?);
    ctx.estimate_delta(DELTA_DEGREES.max(n + 1))?;
    let kv = ctx.dunkl_kernel(&x, &y, tol)?;
    Ok(format!(
        "re,im,tail_bound,degree\n{:.16e},{:.16e},{:.16e},{}\n",
        kv.value.re, kv.value.im, kv.tail_bound, kv.degree
    ))
}

fn cmd_verify<C: Scalar>(
    cfg: &ContextConfig,
    degree: Option<usize>,
    suite: Suite,
    opts: &VerifyOptions,
) -> anyhow::Result<(String, bool)> {
    let ev = KernelEvaluator::new(load_context::<C>(cfg)?, degree_of(cfg, degree)?)?;
    let report = verify::run(&ev, suite, opts)?;
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    Ok((text, report.pass))
}

fn cmd_export_quadrature(d: usize, q: usize) -> anyhow::Result<String> {
    let rule = gauss_rule(d, q)?;
    let mut s = String::new();
    let names: Vec<String> = (1..=d).map(|i| format!("x{i}")).collect();
    writeln!(s, "{},weight", names.join(","))?;
    for (node, w) in rule.iter() {
        for c in node {
            write!(s, "{c:.16e},")?;
        }
        writeln!(s, "{w:.16e}")?;
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_names() {
        assert_eq!(axis_slot("x", 1), Some(0));
        assert_eq!(axis_slot("y", 1), Some(1));
        assert_eq!(axis_slot("x", 2), None);
        assert_eq!(axis_slot("x2", 2), Some(1));
        assert_eq!(axis_slot("y1", 2), Some(2));
        assert_eq!(axis_slot("y3", 2), None);
        assert_eq!(axis_slot("x0", 2), None);
    }

    #[test]
    fn grid_expansion_order() {
        let axes = parse_grid("y1:0:1:0.5, x1:-1:-1:1", 2).unwrap();
        let pts = grid_points(&axes, 2);
        assert_eq!(pts, vec![vec![-1.0, 0.0, 0.0, 0.0], vec![-1.0, 0.0, 0.5, 0.0], vec![-1.0, 0.0, 1.0, 0.0]]);
    }

    #[test]
    fn grid_endpoint_survives_rounding() {
        let axes = parse_grid("x:0:1:0.1", 1).unwrap();
        assert_eq!(axes[0].values.len(), 11);
    }
}
