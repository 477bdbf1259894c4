mod report;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use vinegc::copula::CopulaFamily;
use vinegc::gctest::{self, GCConfig, OrderChoice, Variant};
use vinegc::linear::{self, LagChoice};
use vinegc::mvine;
use vinegc::simstudy::{self, Dgp, Method, StudyConfig};
use vinegc::tsprep::{self, ColumnRef, CsvOptions};

use report::{Format, Out};

#[derive(Parser)]
#[command(name = "vinegc", version, about = "M-vine copula Granger-causality tests")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Test Granger causality in the mean between two columns, both directions.
    Test(TestArgs),
    /// Fit M-vines of orders 1..4 and a bivariate VAR, report AIC.
    Fit(FitArgs),
    /// Monte Carlo size/power study on the built-in assessment models.
    Simulate(SimArgs),
    /// Load, optionally difference, and unit-root check CSV columns.
    Prep(PrepArgs),
}

#[derive(Args, Clone)]
struct InputArgs {
    /// CSV file.
    #[arg(long)]
    input: PathBuf,
    /// The file has no header row; columns are then named col0, col1, ...
    #[arg(long)]
    no_header: bool,
    /// Column holding period labels (name or 0-based position); "none" to number rows.
    #[arg(long, default_value = "0")]
    index_col: String,
    /// Take first differences before anything else.
    #[arg(long)]
    diff: bool,
}

impl InputArgs {
    fn options(&self, columns: Vec<ColumnRef>) -> CsvOptions {
        let index_column = if self.index_col == "none" { None } else { Some(ColumnRef::from(self.index_col.as_str())) };
        CsvOptions { has_header: !self.no_header, index_column, columns }
    }

    fn flags(&self) -> String {
        let mut s = format!("--input {}", self.input.display());
        if self.no_header {
            s.push_str(" --no-header");
        }
        if self.index_col != "0" {
            s.push_str(&format!(" --index-col {}", self.index_col));
        }
        if self.diff {
            s.push_str(" --diff");
        }
        s
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Preset {
    Desk,
    Paper,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum VariantArg {
    Full,
    Split,
}

#[derive(Args)]
struct TestArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Candidate cause column (Y).
    #[arg(long)]
    cause: String,
    /// Candidate effect column (X).
    #[arg(long)]
    effect: String,
    /// Markov order 1..4 or "auto" (AIC).
    #[arg(long, default_value = "auto")]
    k: String,
    /// Conditional draws per time point.
    #[arg(long = "N")]
    n: Option<usize>,
    /// Bootstrap replicates.
    #[arg(long = "B")]
    b: Option<usize>,
    /// First scored time point (1-based); default ceil(T/2).
    #[arg(long = "T0")]
    t0: Option<usize>,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long)]
    workers: Option<usize>,
    /// Run only this vine variant instead of both.
    #[arg(long, value_enum)]
    variant: Option<VariantArg>,
    /// Lag order of the linear test, or "auto" (VAR AIC over 1..10).
    #[arg(long, default_value = "auto")]
    linear_lag: String,
    /// Only test cause -> effect.
    #[arg(long)]
    one_direction: bool,
    #[arg(long, value_enum, default_value = "desk")]
    preset: Preset,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    cause: String,
    #[arg(long)]
    effect: String,
    /// Largest Markov order tried.
    #[arg(long, default_value_t = 4)]
    k_max: usize,
    /// Write the selected model (JSON) here.
    #[arg(long)]
    model_out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimArgs {
    /// Comma-separated model names, e.g. S1,P1,P3k4.
    #[arg(long, default_value = "S1,P1")]
    models: String,
    /// Comma-separated sample sizes.
    #[arg(long = "T", default_value = "100")]
    t: String,
    /// Comma-separated methods: mvine, split, linear.
    #[arg(long, default_value = "mvine,linear")]
    methods: String,
    /// Replicates per cell; default from the preset (size/power models differ).
    #[arg(long = "S")]
    s: Option<usize>,
    #[arg(long = "N")]
    n: Option<usize>,
    #[arg(long = "B")]
    b: Option<usize>,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, value_enum, default_value = "desk")]
    preset: Preset,
    /// Output prefix: writes PREFIX.txt and PREFIX.csv.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Directory for raw p-values, one file per cell.
    #[arg(long)]
    dump_p: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

#[derive(Args)]
struct PrepArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Comma-separated columns (default: all except the index).
    #[arg(long)]
    columns: Option<String>,
    /// PP bandwidth; default floor(4 (n/100)^(1/4)).
    #[arg(long)]
    bandwidth: Option<usize>,
    /// Write the processed series as CSV.
    #[arg(long)]
    series_out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Error class that maps to the usage exit status.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Test(a) => cmd_test(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Prep(a) => cmd_prep(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let is_usage = e.downcast_ref::<UsageError>().is_some()
                || matches!(
                    e.downcast_ref::<vinegc::Error>(),
                    Some(vinegc::Error::Input(_) | vinegc::Error::Config(_))
                );
            ExitCode::from(if is_usage { 2 } else { 1 })
        }
    }
}

/// Loads `names` (in order) from the input, differencing if asked.
fn load_columns(input: &InputArgs, names: &[&str]) -> Result<Vec<Vec<f64>>> {
    let cols = names.iter().map(|n| ColumnRef::from(*n)).collect();
    let table = tsprep::load_csv(&input.input, &input.options(cols))?;
    let mut out = table.columns;
    if input.diff {
        out = out.iter().map(|c| tsprep::first_difference(c)).collect::<vinegc::Result<_>>()?;
    }
    Ok(out)
}

fn parse_order(s: &str) -> Result<OrderChoice> {
    if s == "auto" {
        return Ok(OrderChoice::Auto { k_max: 4 });
    }
    match s.parse::<usize>() {
        Ok(k) if (1..=4).contains(&k) => Ok(OrderChoice::Fixed(k)),
        _ => Err(usage(format!("--k must be 1..4 or auto, got {s:?}"))),
    }
}

fn parse_lag(s: &str) -> Result<LagChoice> {
    if s == "auto" {
        return Ok(LagChoice::Auto);
    }
    match s.parse::<usize>() {
        Ok(p) if p >= 1 => Ok(LagChoice::Fixed(p)),
        _ => Err(usage(format!("--linear-lag must be a positive integer or auto, got {s:?}"))),
    }
}

fn preset_sizes(p: Preset) -> (usize, usize) {
    match p {
        Preset::Desk => (100, 100),
        Preset::Paper => (200, 200),
    }
}

fn paper_warning() {
    eprintln!("warning: paper-scale settings (S=500, B=200, N=200) take many hours on a desktop");
}

fn pp_lines(out: &mut Out, names: &[&str], cols: &[Vec<f64>], bandwidth: Option<usize>) -> Result<()> {
    for (name, col) in names.iter().zip(cols) {
        let r = tsprep::pp_test(col, bandwidth)?;
        let p = report::pp_p_text(r.p_value);
        if r.p_value > 0.05 {
            eprintln!(
                "warning: Phillips-Perron test does not reject a unit root for {name} (p = {p}); consider --diff"
            );
        }
        out.pp(name, &r);
    }
    Ok(())
}

fn cmd_test(a: TestArgs) -> Result<()> {
    let order = parse_order(&a.k)?;
    let lag = parse_lag(&a.linear_lag)?;
    if a.preset == Preset::Paper {
        paper_warning();
    }
    let (pn, pb) = preset_sizes(a.preset);
    let cols = load_columns(&a.input, &[&a.effect, &a.cause])?;
    let (x, y) = (&cols[0], &cols[1]);
    let base = GCConfig {
        k: order,
        t0: a.t0,
        n: a.n.unwrap_or(pn),
        b: a.b.unwrap_or(pb),
        alpha: a.alpha,
        candidates: CopulaFamily::ALL.to_vec(),
        seed: a.seed,
        variant: Variant::FullSample,
        workers: a.workers,
    };
    base.validate()?;
    // one order for every test, chosen on the (effect, cause) vine
    let (k, k_note) = match order {
        OrderChoice::Fixed(k) => (k, "fixed".to_string()),
        OrderChoice::Auto { k_max } => {
            let cap = k_max.min(x.len() / 20).max(1);
            let (k, _) = mvine::select_order(&[x, y], cap, &base.candidates)?;
            (k, format!("AIC over 1..{cap}"))
        }
    };
    let cfg = GCConfig { k: OrderChoice::Fixed(k), ..base };
    let variants: Vec<Variant> = match a.variant {
        None => vec![Variant::FullSample, Variant::SplitSample],
        Some(VariantArg::Full) => vec![Variant::FullSample],
        Some(VariantArg::Split) => vec![Variant::SplitSample],
    };
    let mut command = format!(
        "vinegc test {} --effect {} --cause {} --k {} --N {} --B {}{} --alpha {} --seed {} --linear-lag {}",
        a.input.flags(),
        a.effect,
        a.cause,
        a.k,
        cfg.n,
        cfg.b,
        a.t0.map(|t| format!(" --T0 {t}")).unwrap_or_default(),
        cfg.alpha,
        cfg.seed,
        a.linear_lag
    );
    if let Some(v) = a.variant {
        command.push_str(if v == VariantArg::Full { " --variant full" } else { " --variant split" });
    }
    if a.one_direction {
        command.push_str(" --one-direction");
    }
    let mut out = Out::new(a.format, "test");
    out.command(&command);
    out.setting("T", &x.len().to_string());
    out.setting("k", &format!("{k} ({k_note})"));
    out.setting("T0", &cfg.t0_for(x.len()).to_string());
    pp_lines(&mut out, &[&a.effect, &a.cause], &cols, None)?;
    let mut directions = vec![(a.cause.as_str(), a.effect.as_str(), x, y)];
    if !a.one_direction {
        directions.push((a.effect.as_str(), a.cause.as_str(), y, x));
    }
    for (from, to, target, source) in directions {
        let mut row = Vec::new();
        for &variant in &variants {
            let r = gctest::mvine_test(target, source, &GCConfig { variant, ..cfg.clone() })
                .with_context(|| format!("M-vine test {from} -> {to}"))?;
            if r.incomplete() {
                eprintln!(
                    "warning: {from} -> {to} {}: {} bootstrap replicates dropped",
                    variant.name(),
                    r.missing_replicates.len()
                );
            }
            row.push(report::TestCell::vine(variant, &r));
        }
        let lr = linear::granger_linear(target, source, lag).with_context(|| format!("linear test {from} -> {to}"))?;
        row.push(report::TestCell::linear(&lr));
        out.test_row(from, to, &row);
    }
    out.finish(a.out.as_deref())
}

fn cmd_fit(a: FitArgs) -> Result<()> {
    if a.k_max == 0 {
        return Err(usage("--k-max must be at least 1"));
    }
    let cols = load_columns(&a.input, &[&a.effect, &a.cause])?;
    let (x, y) = (&cols[0], &cols[1]);
    let candidates = CopulaFamily::ALL.to_vec();
    let (k, models) = mvine::select_order(&[x, y], a.k_max, &candidates)?;
    let mut out = Out::new(a.format, "fit");
    out.command(&format!(
        "vinegc fit {} --effect {} --cause {} --k-max {}",
        a.input.flags(),
        a.effect,
        a.cause,
        a.k_max
    ));
    out.setting("T", &x.len().to_string());
    for m in &models {
        out.fit_row("mvine", m.k(), m.loglik().unwrap_or(f64::NAN), m.n_params(), m.aic().unwrap_or(f64::NAN));
    }
    out.setting("selected_k", &k.to_string());
    let p_max = a.k_max.max(1);
    for p in 1..=p_max {
        let aic = linear::var_aic(x, y, p, p_max)?;
        out.fit_row("var", p, f64::NAN, 2 * (2 * p + 1), aic);
    }
    out.note(
        "vine AIC is -2 loglik + 2 params of the copula density; VAR AIC is ln det Sigma + 2 params / T_eff on a common sample. \
         The two are on different scales and are not comparable likelihoods.",
    );
    let selected = &models[k - 1];
    for (c, cop) in selected.structure().classes().iter().zip(selected.copulas()) {
        out.class_row(&c.label(), &cop.to_string());
    }
    if let Some(path) = &a.model_out {
        std::fs::write(path, selected.to_json()?).with_context(|| format!("writing {}", path.display()))?;
    }
    out.finish(a.out.as_deref())
}

fn split_list(s: &str) -> Vec<&str> {
    s.split(',').map(str::trim).filter(|t| !t.is_empty()).collect()
}

fn cmd_simulate(a: SimArgs) -> Result<()> {
    let models: Vec<Dgp> = split_list(&a.models).into_iter().map(str::parse).collect::<vinegc::Result<_>>()?;
    let methods: Vec<Method> = split_list(&a.methods).into_iter().map(str::parse).collect::<vinegc::Result<_>>()?;
    let t_values: Vec<usize> = split_list(&a.t)
        .into_iter()
        .map(|t| t.parse::<usize>().map_err(|_| usage(format!("bad sample size {t:?}"))))
        .collect::<Result<_>>()?;
    if models.is_empty() || methods.is_empty() || t_values.is_empty() {
        return Err(usage("--models, --methods and --T need at least one entry"));
    }
    if a.preset == Preset::Paper {
        paper_warning();
    }
    let (pn, pb) = preset_sizes(a.preset);
    let replicates_for = |m: Dgp| match (a.s, a.preset, m.is_size_model()) {
        (Some(s), _, _) => s,
        (None, Preset::Paper, _) => 500,
        (None, Preset::Desk, true) => 200,
        (None, Preset::Desk, false) => 100,
    };
    let gc = GCConfig { n: a.n.unwrap_or(pn), b: a.b.unwrap_or(pb), alpha: a.alpha, ..GCConfig::default() };
    let mut cells = Vec::new();
    for &model in &models {
        let cfg = StudyConfig {
            models: vec![model],
            t_values: t_values.clone(),
            methods: methods.clone(),
            replicates: replicates_for(model),
            gc: gc.clone(),
            seed: a.seed,
            workers: a.workers,
            ..StudyConfig::default()
        };
        cells.extend(simstudy::run_study(&cfg)?.cells);
    }
    let report = simstudy::MonteCarloReport { alpha: a.alpha, seed: a.seed, cells };
    let command = format!(
        "vinegc simulate --models {} --T {} --methods {} {}--N {} --B {} --alpha {} --seed {} --preset {}",
        a.models,
        a.t,
        a.methods,
        a.s.map(|s| format!("--S {s} ")).unwrap_or_default(),
        gc.n,
        gc.b,
        a.alpha,
        a.seed,
        if a.preset == Preset::Paper { "paper" } else { "desk" }
    );
    if let Some(dir) = &a.dump_p {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for c in &report.cells {
            let path = dir.join(format!("{}_T{}_{}.txt", c.model.name(), c.t_len, c.method.name()));
            std::fs::write(&path, report.p_value_dump(c)).with_context(|| format!("writing {}", path.display()))?;
        }
    }
    let text = format!("# command: {command}\n{}", report.to_table());
    match &a.out {
        Some(prefix) => {
            write_file(&prefix.with_extension("txt"), &text)?;
            write_file(&prefix.with_extension("csv"), &report.to_delimited())?;
        }
        None => match a.format {
            Format::Text => print!("{text}"),
            Format::Machine => print!("{}", report.to_delimited()),
        },
    }
    Ok(())
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    std::fs::write(path, content).with_context(|| format!("writing {}", path.display()))
}

fn cmd_prep(a: PrepArgs) -> Result<()> {
    let cols: Vec<ColumnRef> =
        a.columns.as_deref().map(split_list).unwrap_or_default().into_iter().map(ColumnRef::from).collect();
    let table = tsprep::load_csv(&a.input.input, &a.input.options(cols))?;
    let mut series = table.columns.clone();
    let mut index = table.index.clone();
    if a.input.diff {
        series = series.iter().map(|c| tsprep::first_difference(c)).collect::<vinegc::Result<_>>()?;
        index.remove(0);
    }
    let mut out = Out::new(a.format, "prep");
    out.command(&format!(
        "vinegc prep {}{}{}",
        a.input.flags(),
        a.columns.as_ref().map(|c| format!(" --columns {c}")).unwrap_or_default(),
        a.bandwidth.map(|b| format!(" --bandwidth {b}")).unwrap_or_default()
    ));
    out.setting("rows", &index.len().to_string());
    out.setting("dropped_rows", &table.dropped.to_string());
    let names: Vec<&str> = table.names.iter().map(String::as_str).collect();
    pp_lines(&mut out, &names, &series, a.bandwidth)?;
    if let Some(path) = &a.series_out {
        let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
        let mut header = vec!["index".to_string()];
        header.extend(table.names.iter().cloned());
        w.write_record(&header)?;
        for (i, label) in index.iter().enumerate() {
            let mut rec = vec![label.clone()];
            rec.extend(series.iter().map(|c| c[i].to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
    }
    out.finish(a.out.as_deref())
}
