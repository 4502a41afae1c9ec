//! `sbr`: reproducible experiment runs for scenario-based regularized SAA.
//!
//! Every command accepts `--config FILE` with `key=value` lines naming the
//! same keys as its long flags; flags given on the command line win.
//! Exit codes: 0 success, 2 configuration error, 3 runtime error.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde_json::json;

use sbr_core::eval::data::{load_returns_csv, read_sample_csv, Returns};
use sbr_core::eval::frontier::{
    newsvendor_frontier, portfolio_frontier, replication_study, replication_test_set, replication_train_set,
    write_frontier_csv, write_relpoints_csv, Family, Frontier, NewsvendorMethod, PortfolioMethod, ReplicationConfig,
};
use sbr_core::eval::svg::render_frontier_svg;
use sbr_core::motivex::{self, MotivEx, MotivExParams, TailConfig};
use sbr_core::newsvendor::NewsvendorParams;
use sbr_core::portfolio::{PortfolioParams, SbrMode, SbrOptions};
use sbr_core::scenarios::{adverse_from_threshold, compress};
use sbr_core::solve::export::{export_newsvendor_misocp, export_portfolio_misocp};
use sbr_core::solve::model::write_model;
use sbr_core::{epsilon_grid, par, rng, Aggregation, Error};

#[derive(Parser, Debug)]
#[command(name = "sbr", version, about = "Scenario-based regularized SAA experiments", args_override_self = true)]
struct Cli {
    /// Worker threads for parallel loops (0 = all cores).
    #[arg(long, global = true, env = "SBR_THREADS", default_value_t = 0)]
    threads: usize,
    /// File of `key=value` lines using the command's long flag names.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Synthetic newsvendor: one frontier (reps = 1) or a replication study.
    NewsvendorExp(NewsvendorArgs),
    /// Mean-CVaR portfolio frontiers with crisis-day scenarios.
    PortfolioExp(PortfolioArgs),
    /// One-dimensional example comparing 1- and 2-Wasserstein tail risk.
    Motivex(MotivexArgs),
    /// Writes the mixed-integer conic model of one instance as JSON.
    ExportModel(ExportArgs),
}

#[derive(Args, Debug)]
struct NewsvendorArgs {
    /// Number of scenarios selected by k-medoids.
    #[arg(long)]
    m: usize,
    /// Training sample size.
    #[arg(long, default_value_t = 50)]
    n: usize,
    /// Replications; 1 writes a single frontier, more runs the study.
    #[arg(long, default_value_t = 1)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Out-of-sample test size.
    #[arg(long, default_value_t = 10_000)]
    test_size: usize,
    /// CVaR level of the tail premium.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Comma-separated radii (default: the built-in 35-point grid).
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<f64>>,
    /// CSV with header c,v,g,b,a (default: the five-product instance).
    #[arg(long)]
    params: Option<PathBuf>,
    /// Training sample CSV, used instead of generated demand when reps = 1.
    #[arg(long)]
    train: Option<PathBuf>,
    #[arg(long, default_value = "out/newsvendor")]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Variant {
    Quadratic,
    Linear,
    Both,
}

impl Variant {
    fn aggregations(self) -> Vec<Aggregation> {
        match self {
            Variant::Quadratic => vec![Aggregation::Quadratic],
            Variant::Linear => vec![Aggregation::Linear],
            Variant::Both => vec![Aggregation::Quadratic, Aggregation::Linear],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Mode {
    Alternating,
    Exact,
}

impl From<Mode> for SbrMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Alternating => SbrMode::Alternating,
            Mode::Exact => SbrMode::ExactEnum,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Method {
    Saa,
    Wdro1,
    Wdro2,
    Sbr,
}

#[derive(Args, Debug)]
struct PortfolioArgs {
    /// Training returns CSV (date column, one column per asset).
    #[arg(long)]
    train: PathBuf,
    /// Test returns CSV.
    #[arg(long)]
    test: PathBuf,
    /// Returns CSV from which crisis days are taken.
    #[arg(long)]
    adverse: PathBuf,
    /// Single-column index CSV aligned with `adverse`.
    #[arg(long)]
    index: PathBuf,
    /// Comma-separated index thresholds defining crisis days.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, default_value = "-0.02,-0.035,-0.05")]
    thresholds: Vec<f64>,
    #[arg(long, default_value_t = 10.0)]
    rho: f64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, value_enum, default_value_t = Variant::Both)]
    variant: Variant,
    #[arg(long, value_enum, default_value_t = Mode::Alternating)]
    mode: Mode,
    /// Comma-separated methods to run.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "saa,wdro1,wdro2,sbr")]
    methods: Vec<Method>,
    /// Comma-separated radii (default: the built-in 35-point grid).
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<f64>>,
    /// Random starting patterns of the alternating solver.
    #[arg(long, default_value_t = 4)]
    random_starts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "out/portfolio")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct MotivexArgs {
    #[arg(long, default_value_t = 0.5)]
    beta: f64,
    #[arg(long, default_value_t = 0.5)]
    sigma: f64,
    /// Floor of the loss.
    #[arg(long = "R", default_value_t = 0.5)]
    r: f64,
    #[arg(long, default_value_t = 20)]
    reps: usize,
    #[arg(long, default_value_t = 30)]
    n_train: usize,
    #[arg(long, default_value_t = 20_000)]
    n_test: usize,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Comma-separated radii (default: 0.02 to 0.4 in steps of 0.02).
    #[arg(long, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "out/motivex")]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ModelFamily {
    Newsvendor,
    Portfolio,
}

#[derive(Args, Debug)]
struct ExportArgs {
    #[arg(long, value_enum)]
    family: ModelFamily,
    /// Training sample (newsvendor) or returns (portfolio) CSV.
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    eps: f64,
    /// Newsvendor: number of k-medoids scenarios.
    #[arg(long)]
    m: Option<usize>,
    /// Newsvendor: k-medoids seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Newsvendor: CSV with header c,v,g,b,a.
    #[arg(long)]
    params: Option<PathBuf>,
    /// Newsvendor: comma-separated big-M per product.
    #[arg(long = "big-m", value_delimiter = ',')]
    big_m: Option<Vec<f64>>,
    /// Newsvendor: comma-separated gate gaps per product.
    #[arg(long, value_delimiter = ',')]
    deltas: Option<Vec<f64>>,
    /// Portfolio: returns CSV with crisis days.
    #[arg(long)]
    adverse: Option<PathBuf>,
    /// Portfolio: index CSV aligned with `adverse`.
    #[arg(long)]
    index: Option<PathBuf>,
    /// Portfolio: index threshold defining crisis days.
    #[arg(long, allow_negative_numbers = true)]
    threshold: Option<f64>,
    #[arg(long, value_enum, default_value_t = Variant::Quadratic)]
    variant: Variant,
    #[arg(long, default_value_t = 10.0)]
    rho: f64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Output JSON path.
    #[arg(long, default_value = "out/model.json")]
    out: PathBuf,
}

/// Failure with its exit code.
enum Failure {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

type Outcome<T> = std::result::Result<T, Failure>;

fn config(msg: impl Into<String>) -> Failure {
    Failure::Config(anyhow!(msg.into()))
}

/// Parameter errors are configuration errors; the rest happen at run time.
fn classify(e: Error) -> Failure {
    match e {
        Error::InvalidParams(_)
        | Error::BadAlpha(_)
        | Error::TooManyMedoids { .. }
        | Error::BadM
        | Error::BadBigM { .. }
        | Error::UnsupportedVariant(_) => Failure::Config(e.into()),
        _ => Failure::Runtime(e.into()),
    }
}

trait OrFail<T> {
    fn or_fail(self) -> Outcome<T>;
    fn runtime(self, what: &str) -> Outcome<T>;
}

impl<T> OrFail<T> for sbr_core::Result<T> {
    fn or_fail(self) -> Outcome<T> {
        self.map_err(classify)
    }
    fn runtime(self, what: &str) -> Outcome<T> {
        self.map_err(|e| Failure::Runtime(anyhow::Error::from(e).context(what.to_owned())))
    }
}

impl<T> OrFail<T> for anyhow::Result<T> {
    fn or_fail(self) -> Outcome<T> {
        self.map_err(Failure::Runtime)
    }
    fn runtime(self, what: &str) -> Outcome<T> {
        self.map_err(|e| Failure::Runtime(e.context(what.to_owned())))
    }
}

fn require_file(path: &Path, key: &str) -> Outcome<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(config(format!("--{key}: no such file {}", path.display())))
    }
}

fn check_grid(grid: &[f64]) -> Outcome<()> {
    if grid.is_empty() || grid.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
        return Err(config("radii must be finite and nonnegative"));
    }
    Ok(())
}

fn check_alpha(alpha: f64) -> Outcome<()> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(config(format!("--alpha must lie in (0, 1], got {alpha}")));
    }
    Ok(())
}

fn create_dir(dir: &Path) -> Outcome<()> {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("creating {}", dir.display()))
        .or_fail()
}

fn write_json(path: &Path, v: &serde_json::Value) -> Outcome<()> {
    let text = serde_json::to_string_pretty(v).expect("json values serialize");
    std::fs::write(path, text + "\n")
        .with_context(|| format!("writing {}", path.display()))
        .or_fail()
}

fn report_failures(f: &Frontier) {
    for fail in &f.failures {
        eprintln!("warning: {} at eps {}: {}", fail.method, fail.eps, fail.error);
    }
}

fn newsvendor_exp(a: &NewsvendorArgs) -> Outcome<()> {
    if a.m == 0 {
        return Err(config("--m must be at least 1"));
    }
    if a.m > a.n {
        return Err(config(format!("--m {} exceeds --n {}", a.m, a.n)));
    }
    if a.reps == 0 || a.test_size == 0 {
        return Err(config("--reps and --test-size must be positive"));
    }
    check_alpha(a.alpha)?;
    if let Some(p) = &a.params {
        require_file(p, "params")?;
    }
    if let Some(p) = &a.train {
        require_file(p, "train")?;
        if a.reps > 1 {
            return Err(config("--train applies to a single run (--reps 1)"));
        }
    }
    let grid = a.grid.clone().unwrap_or_else(epsilon_grid);
    check_grid(&grid)?;
    let params = match &a.params {
        Some(p) => NewsvendorParams::read_csv(p).map_err(|e| config(format!("--params: {e}")))?,
        None => NewsvendorParams::reference(),
    };
    let cfg = ReplicationConfig {
        n_reps: a.reps,
        n: a.n,
        m: a.m,
        grid: grid.clone(),
        test_size: a.test_size,
        alpha: a.alpha,
        seed: a.seed,
    };
    create_dir(&a.out)?;

    if a.reps > 1 {
        let res = replication_study(Family::Newsvendor, &cfg).or_fail()?;
        write_relpoints_csv(&res.points, &a.out.join("relpoints.csv")).runtime("writing relpoints.csv")?;
        let s = res.stats;
        write_json(
            &a.out.join("summary.json"),
            &json!({
                "reps": a.reps, "n": a.n, "m": a.m, "seed": a.seed,
                "mean_better": s.mean_better, "south_west": s.south_west, "slope": s.slope,
                "mean_d_mean": s.mean_d_mean, "mean_d_tail": s.mean_d_tail,
            }),
        )?;
        println!("{} replications, n = {}, m = {}", a.reps, a.n, a.m);
        println!("  lower mean than SAA: {:.1}%", 100.0 * s.mean_better);
        println!("  strictly south-west: {:.1}%", 100.0 * s.south_west);
        match s.slope {
            Some(v) => println!("  slope of d_mean on d_tail: {v:.4}"),
            None => println!("  slope of d_mean on d_tail: undefined"),
        }
        println!("wrote {}", a.out.display());
        return Ok(());
    }

    let train = match &a.train {
        Some(p) => read_sample_csv(p).map_err(|e| config(format!("--train: {e}")))?,
        None => replication_train_set(&cfg, 0).or_fail()?,
    };
    if train.dim() != params.dim() {
        return Err(config(format!("training sample has {} columns, instance has {} products", train.dim(), params.dim())));
    }
    if a.m > train.len() {
        return Err(config(format!("--m {} exceeds the {} training points", a.m, train.len())));
    }
    let test = replication_test_set(&cfg).or_fail()?;
    let spec = compress(&train, a.m, rng::derive_seed(a.seed, "kmedoids", 0), Aggregation::Quadratic).or_fail()?;
    let solve_seed = rng::derive_seed(a.seed, "solve", 0);
    let mut all = Frontier::default();
    for method in [NewsvendorMethod::Saa, NewsvendorMethod::Sbr, NewsvendorMethod::Wdro1] {
        let f = newsvendor_frontier(&params, &train, &spec, &test, &grid, a.alpha, method, solve_seed).or_fail()?;
        report_failures(&f);
        all.extend(f);
    }
    write_frontier_csv(&all.points, &a.out.join("frontier.csv")).runtime("writing frontier.csv")?;
    render_frontier_svg(&all.points, &a.out.join("frontier.svg")).runtime("writing frontier.svg")?;
    let sw = sw_count(&all, &NewsvendorMethod::Sbr.tag(a.m));
    write_json(
        &a.out.join("summary.json"),
        &json!({
            "n": train.len(), "m": a.m, "seed": a.seed, "points": all.points.len(),
            "failures": all.failures.len(), "sbr_south_west": sw,
        }),
    )?;
    println!("newsvendor frontier: n = {}, m = {}, {} points", train.len(), a.m, all.points.len());
    println!("  SBR points strictly south-west of SAA: {sw}");
    println!("wrote {}", a.out.display());
    Ok(())
}

fn sw_count(f: &Frontier, method: &str) -> usize {
    let Some(saa) = f.saa() else { return 0 };
    f.points
        .iter()
        .filter(|p| p.method == method && sbr_core::eval::frontier::strictly_south_west(p, saa))
        .count()
}

fn load_returns(path: &Path, key: &str) -> Outcome<Returns> {
    require_file(path, key)?;
    load_returns_csv(path).map_err(|e| config(format!("--{key}: {e}")))
}

fn threshold_tag(t: f64) -> String {
    format!("{t}").replace('-', "m").replace('.', "p")
}

fn portfolio_exp(a: &PortfolioArgs) -> Outcome<()> {
    check_alpha(a.alpha)?;
    if !(a.rho >= 0.0 && a.rho.is_finite()) {
        return Err(config("--rho must be finite and nonnegative"));
    }
    if a.thresholds.is_empty() {
        return Err(config("--thresholds needs at least one value"));
    }
    let grid = a.grid.clone().unwrap_or_else(epsilon_grid);
    check_grid(&grid)?;
    let train = load_returns(&a.train, "train")?;
    let test = load_returns(&a.test, "test")?;
    let adverse = load_returns(&a.adverse, "adverse")?;
    let index = load_returns(&a.index, "index")?;
    let index = index.column().map_err(|e| config(format!("--index: {e}")))?;
    let train = train.to_measure().or_fail()?;
    let test = test.to_measure().or_fail()?;
    if test.dim() != train.dim() || adverse.tickers.len() != train.dim() {
        return Err(config("train, test and adverse returns must have the same assets"));
    }
    let methods: BTreeSet<_> = a.methods.iter().map(|m| format!("{m:?}")).collect();
    let opts = SbrOptions {
        random_starts: a.random_starts,
        ..SbrOptions::default()
    };
    create_dir(&a.out)?;
    let mut summary = Vec::new();
    for &thr in &a.thresholds {
        let spec = adverse_from_threshold(&index, &adverse.matrix, thr, Aggregation::Quadratic).or_fail()?;
        println!("threshold {thr}: m = {} crisis days", spec.len());
        let params = PortfolioParams::with_default_bound(a.rho, a.alpha, &train, Some(&spec)).or_fail()?;
        let mut run: Vec<PortfolioMethod> = Vec::new();
        if methods.contains("Saa") {
            run.push(PortfolioMethod::Saa);
        }
        if methods.contains("Wdro1") {
            run.push(PortfolioMethod::Wdro1);
        }
        if methods.contains("Wdro2") {
            run.push(PortfolioMethod::Wdro2);
        }
        if methods.contains("Sbr") {
            for aggregation in a.variant.aggregations() {
                run.push(PortfolioMethod::Sbr {
                    aggregation,
                    mode: a.mode.into(),
                });
            }
        }
        let mut all = Frontier::default();
        for method in run {
            let f = portfolio_frontier(&params, &train, Some(&spec), &test, &grid, a.alpha, method, a.seed, &opts).or_fail()?;
            report_failures(&f);
            all.extend(f);
        }
        let tag = threshold_tag(thr);
        write_frontier_csv(&all.points, &a.out.join(format!("frontier_{tag}.csv"))).runtime("writing frontier")?;
        render_frontier_svg(&all.points, &a.out.join(format!("frontier_{tag}.svg"))).runtime("writing frontier svg")?;
        let mut sw = serde_json::Map::new();
        for agg in a.variant.aggregations() {
            let name = format!("sbr-{}", agg.tag());
            let c = sw_count(&all, &name);
            if methods.contains("Sbr") {
                println!("  {name}: {c} points strictly south-west of SAA");
            }
            sw.insert(name, json!(c));
        }
        summary.push(json!({
            "threshold": thr, "m": spec.len(), "points": all.points.len(),
            "failures": all.failures.len(), "south_west": sw,
        }));
    }
    write_json(
        &a.out.join("summary.json"),
        &json!({ "rho": a.rho, "alpha": a.alpha, "seed": a.seed, "thresholds": summary }),
    )?;
    println!("wrote {}", a.out.display());
    Ok(())
}

fn motivex_cmd(a: &MotivexArgs) -> Outcome<()> {
    let params = MotivExParams::new(a.beta, a.sigma, a.r).or_fail()?;
    check_alpha(a.alpha)?;
    if a.reps == 0 || a.n_train == 0 || a.n_test == 0 {
        return Err(config("--reps, --n-train and --n-test must be positive"));
    }
    let mut cfg = TailConfig::new(a.reps, a.seed);
    cfg.n_train = a.n_train;
    cfg.n_test = a.n_test;
    cfg.alpha = a.alpha;
    if let Some(e) = &a.eps {
        check_grid(e)?;
        cfg.eps_list = e.clone();
    }
    let ex = MotivEx::new(params).or_fail()?;
    println!("{}", motivex::describe_constants(&ex.consts));
    let report = motivex::tail_comparison(&ex, &cfg).or_fail()?;
    create_dir(&a.out)?;
    motivex::write_report_csv(&report.rows, &a.out.join("report.csv")).runtime("writing report.csv")?;
    motivex::write_tubes_csv(&report.tubes, &a.out.join("tubes.csv")).runtime("writing tubes.csv")?;
    let (mean_svg, premium_svg) = motivex::tube_svgs(&report.tubes).or_fail()?;
    for (name, text) in [("mean.svg", mean_svg), ("premium.svg", premium_svg)] {
        std::fs::write(a.out.join(name), text)
            .with_context(|| format!("writing {name}"))
            .or_fail()?;
    }
    let c = ex.consts;
    write_json(
        &a.out.join("summary.json"),
        &json!({
            "beta": a.beta, "sigma": a.sigma, "R": a.r, "reps": a.reps, "seed": a.seed,
            "constants": { "A": c.big_a, "B": c.big_b, "a": c.a, "b": c.b, "c": c.c },
            "rows": report.rows.len(),
        }),
    )?;
    println!("{} solves over {} radii; wrote {}", report.rows.len(), cfg.eps_list.len(), a.out.display());
    Ok(())
}

fn export_model(a: &ExportArgs) -> Outcome<()> {
    require_file(&a.train, "train")?;
    if !(a.eps >= 0.0 && a.eps.is_finite()) {
        return Err(config("--eps must be finite and nonnegative"));
    }
    let model = match a.family {
        ModelFamily::Newsvendor => {
            let m = a.m.ok_or_else(|| config("--m is required for the newsvendor model"))?;
            if a.variant != Variant::Quadratic {
                return Err(config("the newsvendor model uses quadratic aggregation only"));
            }
            if let Some(p) = &a.params {
                require_file(p, "params")?;
            }
            let params = match &a.params {
                Some(p) => NewsvendorParams::read_csv(p).map_err(|e| config(format!("--params: {e}")))?,
                None => NewsvendorParams::reference(),
            };
            let train = read_sample_csv(&a.train).map_err(|e| config(format!("--train: {e}")))?;
            if m == 0 || m > train.len() {
                return Err(config(format!("--m must lie in 1..={}", train.len())));
            }
            let spec = compress(&train, m, a.seed, Aggregation::Quadratic).or_fail()?;
            export_newsvendor_misocp(&params, &train, &spec, a.eps, a.deltas.as_deref(), a.big_m.as_deref()).or_fail()?
        }
        ModelFamily::Portfolio => {
            let (Some(adv), Some(idx), Some(thr)) = (&a.adverse, &a.index, a.threshold) else {
                return Err(config("the portfolio model needs --adverse, --index and --threshold"));
            };
            let agg = match a.variant {
                Variant::Quadratic => Aggregation::Quadratic,
                Variant::Linear => Aggregation::Linear,
                Variant::Both => return Err(config("--variant must be quadratic or linear")),
            };
            check_alpha(a.alpha)?;
            let train = load_returns(&a.train, "train")?.to_measure().or_fail()?;
            let adverse = load_returns(adv, "adverse")?;
            let index = load_returns(idx, "index")?.column().map_err(|e| config(format!("--index: {e}")))?;
            let spec = adverse_from_threshold(&index, &adverse.matrix, thr, agg).or_fail()?;
            let params = PortfolioParams::with_default_bound(a.rho, a.alpha, &train, Some(&spec)).or_fail()?;
            export_portfolio_misocp(&params, &train, &spec, a.eps).or_fail()?
        }
    };
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    write_model(&model, &a.out).runtime("writing model")?;
    println!(
        "{} binaries, {} variables, {} linear rows, {} cones; wrote {}",
        model.binary_count(),
        model.variables.len(),
        model.linear.len(),
        model.soc.len(),
        a.out.display()
    );
    Ok(())
}

/// Long flag names accepted by `command`.
fn known_keys(command: &str) -> Option<BTreeSet<String>> {
    let root = Cli::command();
    let sub = root.find_subcommand(command)?;
    Some(
        sub.get_arguments()
            .chain(root.get_arguments())
            .filter_map(|a| a.get_long().map(str::to_owned))
            .collect(),
    )
}

/// Reads `key=value` lines into flag arguments. Blank lines and lines
/// starting with `#` are skipped.
fn config_args(path: &Path, command: &str) -> Outcome<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| config(format!("--config {}: {e}", path.display())))?;
    let keys = known_keys(command).unwrap_or_default();
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| config(format!("{}:{}: expected key=value", path.display(), i + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        if k == "config" || !keys.contains(k) {
            return Err(config(format!("{}:{}: unknown key '{k}' for {command}", path.display(), i + 1)));
        }
        out.push(format!("--{k}={v}"));
    }
    Ok(out)
}

const COMMANDS: [&str; 4] = ["newsvendor-exp", "portfolio-exp", "motivex", "export-model"];

/// Inserts config-file settings right after the subcommand so that flags
/// given later on the command line override them.
fn expand_config(args: Vec<String>) -> Outcome<Vec<String>> {
    let Some(pos) = args.iter().position(|a| COMMANDS.contains(&a.as_str())) else {
        return Ok(args);
    };
    let mut path = None;
    for (i, a) in args.iter().enumerate() {
        if a == "--config" {
            path = args.get(i + 1).cloned();
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_owned());
        }
    }
    let Some(path) = path else { return Ok(args) };
    let extra = config_args(Path::new(&path), &args[pos])?;
    let mut out = args[..=pos].to_vec();
    out.extend(extra);
    out.extend_from_slice(&args[pos + 1..]);
    Ok(out)
}

fn run(cli: &Cli) -> Outcome<()> {
    match &cli.command {
        Command::NewsvendorExp(a) => newsvendor_exp(a),
        Command::PortfolioExp(a) => portfolio_exp(a),
        Command::Motivex(a) => motivex_cmd(a),
        Command::ExportModel(a) => export_model(a),
    }
}

fn main() -> ExitCode {
    let outcome = expand_config(std::env::args().collect()).and_then(|args| {
        let cli = Cli::try_parse_from(args).unwrap_or_else(|e| e.exit());
        par::with_threads(cli.threads, || run(&cli))
    });
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}
