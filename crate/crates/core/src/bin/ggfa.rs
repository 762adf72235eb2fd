use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;

use ggfa::biplot::{build_biplot, ArrowScale, BiplotSpec};
use ggfa::canon::{canonicalize, verify_identifiability_conditions};
use ggfa::fit::{bic_scan, fit, FitConfig};
use ggfa::io::{
    format_f64, load_csv_with_schema, read_schema_file, save_csv, write_schema_file, FitMetadata, LoadOptions,
    ModelFile,
};
use ggfa::sample::sample_with_schema;
use ggfa::synth::{
    gen_mixed_dataset, run_reproducibility_experiment, run_sampling_distribution, stream_rng, FullDims, ReproConfig,
    SamplingDistSpec, SynthSpec,
};
use ggfa::{factor_scores, Dataset, Error, Model};

const EXIT_USAGE: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_NUMERICAL: u8 = 4;

#[derive(Parser)]
#[command(name = "ggfa", version, about = "Identifiable factor analysis for mixed continuous and binary data")]
struct Cli {
    /// Worker threads for restarts and replicates (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model by multi-start maximum likelihood.
    Fit(FitArgs),
    /// Fit a range of latent dimensions and pick the one with the lowest BIC.
    BicScan(BicScanArgs),
    /// Write factor scores (posterior means) for every row.
    Score(ScoreArgs),
    /// Draw a dataset from a saved model.
    Simulate(SimulateArgs),
    /// Generate a synthetic mixed dataset from a random correlation matrix.
    Synth(SynthArgs),
    /// Compare correlation reproducibility against the quantification baseline.
    CompareQuant(CompareArgs),
    /// Sampling distribution of estimates at several sample sizes.
    SamplingDist(SamplingArgs),
    /// Emit a biplot as SVG and CSV.
    Biplot(BiplotArgs),
}

#[derive(Args)]
struct DataArgs {
    /// Data CSV with a header row.
    #[arg(long)]
    data: PathBuf,
    /// Schema CSV (`name,kind`).
    #[arg(long)]
    schema: PathBuf,
    /// Continuous columns to replace by their natural logarithm.
    #[arg(long, value_delimiter = ',')]
    log_columns: Vec<String>,
}

#[derive(Args)]
struct OptimArgs {
    #[arg(long, default_value_t = 100, value_parser = positive)]
    restarts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 2000)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-6)]
    grad_tol: f64,
}

impl OptimArgs {
    fn config(&self) -> FitConfig {
        FitConfig {
            n_restarts: self.restarts,
            seed: self.seed,
            max_iters: self.max_iters,
            grad_tol: self.grad_tol,
            ..FitConfig::default()
        }
    }
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_parser = positive)]
    latent_dims: usize,
    #[command(flatten)]
    optim: OptimArgs,
    /// Rotate the estimate into canonical form before saving.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    canonical: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BicScanArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 1, value_parser = positive)]
    min_dims: usize,
    /// Defaults to the number of columns.
    #[arg(long)]
    max_dims: Option<usize>,
    #[command(flatten)]
    optim: OptimArgs,
    /// Table destination (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ModelDataArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Defaults to the schema stored in the model file.
    #[arg(long)]
    schema: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    log_columns: Vec<String>,
}

#[derive(Args)]
struct ScoreArgs {
    #[command(flatten)]
    input: ModelDataArgs,
    /// Scores CSV; the posterior covariance goes to `<stem>_cov.csv`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    schema_out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthFlags {
    #[arg(long, default_value_t = 5)]
    p_cont: usize,
    #[arg(long, default_value_t = 5)]
    p_bin: usize,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 1.0)]
    gamma_shape: f64,
    #[arg(long, default_value_t = 1.0)]
    gamma_rate: f64,
    #[arg(long, default_value_t = 0.5)]
    min_xy_corr: f64,
    #[arg(long, default_value_t = 0.5)]
    min_yy_corr: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl SynthFlags {
    fn spec(&self, n_datasets: usize) -> SynthSpec {
        SynthSpec {
            p_cont: self.p_cont,
            p_bin: self.p_bin,
            n: self.n,
            n_datasets,
            gamma_shape: self.gamma_shape,
            gamma_rate: self.gamma_rate,
            seed: self.seed,
            min_xy_corr: self.min_xy_corr,
            min_yy_corr: self.min_yy_corr,
        }
    }
}

#[derive(Args)]
struct SynthArgs {
    #[command(flatten)]
    spec: SynthFlags,
    /// Dataset index; index k matches dataset k of compare-quant with the same seed.
    #[arg(long, default_value_t = 0)]
    index: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    schema_out: Option<PathBuf>,
    /// Generating correlation matrix.
    #[arg(long)]
    corr_out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FullDimsArg {
    Full,
    FullMinusOne,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    spec: SynthFlags,
    #[arg(long, default_value_t = 500)]
    n_datasets: usize,
    #[arg(long, value_delimiter = ',', default_values_t = [1usize, 2, 3])]
    latent_dims: Vec<usize>,
    /// Latent dimension of the full quantified fit that is reduced.
    #[arg(long, value_enum, default_value_t = FullDimsArg::Full)]
    full_dims: FullDimsArg,
    #[arg(long, default_value_t = 100, value_parser = positive)]
    restarts: usize,
    #[arg(long, default_value_t = 2000)]
    max_iters: usize,
    /// Per dataset, model and latent dimension R^2 table.
    #[arg(long)]
    out: PathBuf,
    /// Per variable-pair empirical and reproduced correlations.
    #[arg(long)]
    pairs_out: Option<PathBuf>,
}

#[derive(Args)]
struct SamplingArgs {
    /// Truth model.
    #[arg(long)]
    model: PathBuf,
    #[arg(long, value_delimiter = ',', default_values_t = [1000usize, 3000, 9000])]
    sizes: Vec<usize>,
    #[arg(long, default_value_t = 1000)]
    replicates: usize,
    #[command(flatten)]
    optim: OptimArgs,
    /// Summary per size and parameter.
    #[arg(long)]
    out: PathBuf,
    /// Every replicate's estimate.
    #[arg(long)]
    estimates_out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScaleArg {
    Auto,
    Real,
}

#[derive(Args)]
struct BiplotArgs {
    #[command(flatten)]
    input: ModelDataArgs,
    /// One-based latent axes, e.g. `1,2`.
    #[arg(long, value_delimiter = ',', default_values_t = [1usize, 2], num_args = 1)]
    axes: Vec<usize>,
    #[arg(long)]
    color_by: Option<String>,
    #[arg(long, value_enum, default_value_t = ScaleArg::Auto)]
    arrow_scale: ScaleArg,
    #[arg(long)]
    svg: Option<PathBuf>,
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn positive(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(v) => Ok(v),
        Err(e) => Err(e.to_string()),
    }
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::LatentDimOutOfRange { .. } | Error::InvalidInput(_) => EXIT_USAGE,
            Error::Numerical(_) | Error::AllRestartsFailed { .. } | Error::DegenerateCorrelation { .. } => {
                EXIT_NUMERICAL
            }
            _ => EXIT_DATA,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Error::from(e).into()
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Error::from(e).into()
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: message.into(),
    }
}

type CmdResult = std::result::Result<(), Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    }
    let result = match cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::BicScan(a) => cmd_bic_scan(a),
        Command::Score(a) => cmd_score(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Synth(a) => cmd_synth(a),
        Command::CompareQuant(a) => cmd_compare_quant(a),
        Command::SamplingDist(a) => cmd_sampling_dist(a),
        Command::Biplot(a) => cmd_biplot(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn load_data(args: &DataArgs) -> Result<Dataset, Failure> {
    let schema = read_schema_file(&args.schema)?;
    let opts = LoadOptions {
        log_columns: args.log_columns.clone(),
    };
    Ok(load_csv_with_schema(&args.data, &schema, &opts)?)
}

/// Loads a model and data whose columns match the model's schema.
fn load_model_and_data(args: &ModelDataArgs) -> Result<(ModelFile, Dataset), Failure> {
    let file = ModelFile::load(&args.model)?;
    let model_schema = file.schema()?;
    let schema = match &args.schema {
        Some(path) => read_schema_file(path)?,
        None => model_schema.clone(),
    };
    if schema.internal_order() != model_schema.internal_order() {
        return Err(Error::Schema("data schema does not match the model's columns".into()).into());
    }
    let opts = LoadOptions {
        log_columns: args.log_columns.clone(),
    };
    let data = load_csv_with_schema(&args.data, &schema, &opts)?;
    Ok((file, data))
}

fn fmt_vec(v: &DVector<f64>) -> String {
    v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(" ")
}

fn cmd_fit(a: FitArgs) -> CmdResult {
    let data = load_data(&a.data)?;
    let cfg = a.optim.config();
    let res = fit(&data, a.latent_dims, &cfg)?;
    for w in &res.warnings {
        eprintln!("warning: {w}");
    }
    let canon = canonicalize(&res.params)?;
    let params = if a.canonical {
        let report = verify_identifiability_conditions(&canon.params);
        if !canon.unique || !report.all_ok() {
            eprintln!("warning: canonical form is not unique: {}", canon.notes.join("; "));
        }
        canon.params.clone()
    } else {
        res.params.clone()
    };
    let meta = FitMetadata {
        log_lik: res.log_lik,
        bic: res.bic,
        n_params: res.n_params,
        seed: cfg.seed,
        restarts: cfg.n_restarts,
    };
    ModelFile::new(&data.schema, &params, a.canonical, Some(meta))?.save(&a.out)?;

    println!("log_lik\t{}", format_f64(res.log_lik));
    println!("bic\t{}", format_f64(res.bic));
    println!("n_params\t{}", res.n_params);
    println!("converged\t{}", res.converged);
    println!("c\t{}", format_f64(params.c));
    println!("communality\t{}", fmt_vec(&canon.h));
    println!("contribution\t{}", fmt_vec(&canon.p));
    println!("cumulative\t{}", fmt_vec(&canon.c));
    Ok(())
}

fn cmd_bic_scan(a: BicScanArgs) -> CmdResult {
    let data = load_data(&a.data)?;
    let p = data.p_x() + data.q();
    let max = a.max_dims.unwrap_or(p);
    let min = a.min_dims;
    if max < min || max > p {
        return Err(usage(format!("need {min} <= max-dims <= {p}")));
    }
    let dims: Vec<usize> = (min..=max).collect();
    let scan = bic_scan(&data, &dims, &a.optim.config());

    let sink: Box<dyn Write> = match &a.out {
        Some(path) => Box::new(File::create(path)?),
        None => Box::new(std::io::stdout()),
    };
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["p_z", "log_lik", "bic", "n_params", "status"])?;
    for e in &scan.entries {
        match &e.fit {
            Ok(r) => w.write_record([
                e.p_z.to_string(),
                format_f64(r.log_lik),
                format_f64(r.bic),
                r.n_params.to_string(),
                "ok".into(),
            ])?,
            Err(msg) => w.write_record([e.p_z.to_string(), String::new(), String::new(), String::new(), msg.clone()])?,
        }
    }
    w.flush()?;
    drop(w);
    match scan.best_p_z {
        Some(d) => {
            eprintln!("selected p_z = {d}");
            Ok(())
        }
        None => Err(Failure {
            code: EXIT_NUMERICAL,
            message: "every latent dimension failed to fit".into(),
        }),
    }
}

fn companion_path(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let ext = out.extension().map(|e| e.to_string_lossy().into_owned()).unwrap_or_else(|| "csv".into());
    out.with_file_name(format!("{stem}{suffix}.{ext}"))
}

fn cmd_score(a: ScoreArgs) -> CmdResult {
    let (file, data) = load_model_and_data(&a.input)?;
    let model = Model::new(file.params()?)?;
    let scores = factor_scores(&model, &data)?;
    let p_z = model.params().p_z();
    let names: Vec<String> = (1..=p_z).map(|s| format!("z{s}")).collect();

    let mut w = csv::Writer::from_path(&a.out)?;
    let mut header = vec!["row".to_string()];
    header.extend(names.iter().cloned());
    header.push("partial".into());
    w.write_record(&header)?;
    for (i, s) in scores.iter().enumerate() {
        let mut rec = vec![(i + 1).to_string()];
        rec.extend(s.m.iter().map(|v| format_f64(*v)));
        rec.push(if s.partial { "1" } else { "0" }.into());
        w.write_record(&rec)?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(companion_path(&a.out, "_cov"))?;
    w.write_record(&names)?;
    let cov = model.posterior_cov();
    for r in 0..p_z {
        w.write_record((0..p_z).map(|c| format_f64(cov[(r, c)])))?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_simulate(a: SimulateArgs) -> CmdResult {
    let file = ModelFile::load(&a.model)?;
    let schema = file.schema()?;
    let data = sample_with_schema(&file.params()?, schema.clone(), a.n, a.seed)?;
    save_csv(&data, &a.out)?;
    if let Some(path) = &a.schema_out {
        write_schema_file(&schema, path)?;
    }
    Ok(())
}

fn cmd_synth(a: SynthArgs) -> CmdResult {
    let spec = a.spec.spec(1);
    spec.validate()?;
    let synth = gen_mixed_dataset(&spec, &mut stream_rng(spec.seed, a.index))?;
    save_csv(&synth.dataset, &a.out)?;
    if let Some(path) = &a.schema_out {
        write_schema_file(&synth.dataset.schema, path)?;
    }
    if let Some(path) = &a.corr_out {
        let p = synth.corr.nrows();
        let names: Vec<String> = synth.dataset.schema.internal_names().iter().map(|s| s.to_string()).collect();
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&names)?;
        for r in 0..p {
            w.write_record((0..p).map(|c| format_f64(synth.corr[(r, c)])))?;
        }
        w.flush()?;
    }
    eprintln!("accepted after {} attempt(s)", synth.attempts);
    Ok(())
}

fn cmd_compare_quant(a: CompareArgs) -> CmdResult {
    let spec = a.spec.spec(a.n_datasets);
    let config = ReproConfig {
        fit: FitConfig {
            n_restarts: a.restarts,
            max_iters: a.max_iters,
            ..FitConfig::default()
        },
        full_dims: match a.full_dims {
            FullDimsArg::Full => FullDims::Full,
            FullDimsArg::FullMinusOne => FullDims::FullMinusOne,
        },
    };
    let report = run_reproducibility_experiment(&spec, &a.latent_dims, &config)?;

    let mut w = csv::Writer::from_path(&a.out)?;
    w.write_record(["dataset", "model", "p_z", "r_squared", "error"])?;
    for r in &report.rows {
        w.write_record([
            r.dataset.to_string(),
            r.model.to_string(),
            r.p_z.to_string(),
            r.r_squared.map(format_f64).unwrap_or_default(),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    if let Some(path) = &a.pairs_out {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["dataset", "model", "p_z", "i", "j", "pair_type", "variance_bucket", "empirical", "reproduced"])?;
        for p in &report.pairs {
            w.write_record([
                p.dataset.to_string(),
                p.model.to_string(),
                p.p_z.to_string(),
                (p.i + 1).to_string(),
                (p.j + 1).to_string(),
                p.pair_type.to_string(),
                p.variance_bucket.to_string(),
                format_f64(p.empirical),
                format_f64(p.reproduced),
            ])?;
        }
        w.flush()?;
    }
    for (k, msg) in &report.failed_datasets {
        eprintln!("dataset {k} skipped: {msg}");
    }
    for &d in &a.latent_dims {
        let cell = |m: &str| report.mean_r_squared(m, d).map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into());
        println!(
            "p_z={d}\tproposed={}\tquant={}\tquant_reduced={}",
            cell("proposed"),
            cell("quant"),
            cell("quant_reduced")
        );
    }
    Ok(())
}

fn cmd_sampling_dist(a: SamplingArgs) -> CmdResult {
    let file = ModelFile::load(&a.model)?;
    let spec = SamplingDistSpec {
        sizes: a.sizes.clone(),
        replicates: a.replicates,
        seed: a.optim.seed,
        ..SamplingDistSpec::new(file.params()?)
    };
    let report = run_sampling_distribution(&spec, &a.optim.config())?;
    let mae = report.median_abs_error();
    let mse = report.mean_and_se();

    let mut w = csv::Writer::from_path(&a.out)?;
    w.write_record(["n", "parameter", "truth", "mean", "se", "median_abs_error", "replicates_ok"])?;
    for (s, &n) in report.sizes.iter().enumerate() {
        let ok = report.estimates[s].iter().filter(|e| e.is_some()).count();
        for (k, name) in report.names.iter().enumerate() {
            let (mean, se) = mse[s][k];
            w.write_record([
                n.to_string(),
                name.clone(),
                format_f64(report.truth[k]),
                format_f64(mean),
                format_f64(se),
                format_f64(mae[s][k]),
                ok.to_string(),
            ])?;
        }
    }
    w.flush()?;
    if let Some(path) = &a.estimates_out {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["n".to_string(), "replicate".to_string()];
        header.extend(report.names.iter().cloned());
        w.write_record(&header)?;
        for (s, &n) in report.sizes.iter().enumerate() {
            for (r, est) in report.estimates[s].iter().enumerate() {
                if let Some(v) = est {
                    let mut rec = vec![n.to_string(), (r + 1).to_string()];
                    rec.extend(v.iter().map(|x| format_f64(*x)));
                    w.write_record(&rec)?;
                }
            }
        }
        w.flush()?;
    }
    for (s, r, msg) in &report.failures {
        eprintln!("n={} replicate {} failed: {msg}", report.sizes[*s], r + 1);
    }
    Ok(())
}

fn cmd_biplot(a: BiplotArgs) -> CmdResult {
    if a.axes.len() != 2 || a.axes.contains(&0) {
        return Err(usage("--axes takes two one-based indices, e.g. 1,2"));
    }
    if a.svg.is_none() && a.csv.is_none() {
        return Err(usage("give --svg and/or --csv"));
    }
    let (file, data) = load_model_and_data(&a.input)?;
    if !file.canonical {
        eprintln!("note: model is not canonical; canonicalizing before plotting");
    }
    let params = file.params()?;
    let mut canon = canonicalize(&params)?;
    if file.canonical {
        // keep the stored loadings bit for bit
        canon.params = params;
    }
    let spec = BiplotSpec {
        axes: (a.axes[0] - 1, a.axes[1] - 1),
        color_by: a.color_by.clone(),
        arrow_scale: match a.arrow_scale {
            ScaleArg::Auto => ArrowScale::Auto,
            ScaleArg::Real => ArrowScale::Real,
        },
    };
    let plot = build_biplot(&canon, &data, &spec)?;
    if let Some(path) = &a.csv {
        plot.write_csv(File::create(path)?)?;
    }
    if let Some(path) = &a.svg {
        std::fs::write(path, plot.to_svg())?;
    }
    Ok(())
}
