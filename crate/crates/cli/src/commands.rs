use crate::{EvalArgs, PredictArgs, StatsArgs, TrainArgs};
use bonsai_core::data::write_label_frequency_histogram;
use bonsai_core::metrics::evaluate;
use bonsai_core::predict::{read_predictions, write_predictions};
use bonsai_core::{
    load_model, predict_batch, save_model, train_ensemble, Dataset, DatasetStats, Index,
    LabelIndex, PropensityModel, ReprSpace, TrainConfig,
};
use log::info;
use std::fmt;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::Path;
use std::time::Instant;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Internal(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Internal(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Internal(m) => f.write_str(m),
        }
    }
}

impl From<bonsai_core::Error> for CliError {
    fn from(e: bonsai_core::Error) -> Self {
        match e {
            bonsai_core::Error::InvalidArgument(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn io_err(path: &Path, e: io::Error) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}

fn load_data(path: &Path) -> Result<Dataset> {
    let start = Instant::now();
    let ds = Dataset::load(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    info!(
        "loaded {} ({} x {}, {} labels) in {:.2?}",
        path.display(),
        ds.n_instances(),
        ds.n_features(),
        ds.n_labels(),
        start.elapsed()
    );
    Ok(ds)
}

pub fn init_threads(threads: Option<usize>) -> Result<()> {
    let Some(n) = threads else {
        return Ok(());
    };
    if n == 0 {
        return Err(CliError::Usage("--threads must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Internal(format!("thread pool: {e}")))
}

pub fn train(args: &TrainArgs) -> Result<()> {
    let repr: ReprSpace = args.repr.parse()?;
    let ds = load_data(&args.data)?;
    let config = TrainConfig {
        n_trees: args.trees,
        k: args.branch,
        d_max: args
            .max_depth
            .unwrap_or_else(|| TrainConfig::default_depth(ds.n_labels())),
        repr_space: repr,
        c: args.c,
        eps: args.eps,
        max_newton_iters: args.max_newton_iters,
        delta: args.delta,
        base_seed: args.seed,
        kmeans_max_iters: args.kmeans_iters,
        kmeans_tol: args.kmeans_tol,
        kmeans_restarts: args.kmeans_restarts,
        normalize_instances: !args.no_normalize,
    };
    config.validate()?;
    info!(
        "training T={} K={} d_max={} repr={}",
        config.n_trees, config.k, config.d_max, config.repr_space
    );
    let start = Instant::now();
    let ens = train_ensemble(&ds, &config)?;
    info!(
        "training took {:.2?}; {} nonzero weights",
        start.elapsed(),
        ens.weight_nnz()
    );
    let start = Instant::now();
    save_model(&ens, &args.model)?;
    info!("wrote {} in {:.2?}", args.model.display(), start.elapsed());
    Ok(())
}

pub fn predict(args: &PredictArgs) -> Result<()> {
    if args.beam == 0 || args.top == 0 {
        return Err(CliError::Usage(
            "--beam and --top must be at least 1".into(),
        ));
    }
    let ens = load_model(&args.model)?;
    let ds = load_data(&args.data)?;
    let start = Instant::now();
    let preds = predict_batch(&ens, &ds.features, args.beam, args.top)?;
    let elapsed = start.elapsed();
    info!(
        "predicted {} instances in {:.2?}, mean latency {:.3} ms",
        preds.len(),
        elapsed,
        1e3 * elapsed.as_secs_f64() / preds.len().max(1) as f64,
    );
    let file = File::create(&args.out).map_err(|e| io_err(&args.out, e))?;
    let mut out = BufWriter::new(file);
    write_predictions(&preds, &mut out)?;
    out.flush().map_err(|e| io_err(&args.out, e))?;
    Ok(())
}

pub fn eval(args: &EvalArgs) -> Result<()> {
    if args.k.is_empty() || args.k.contains(&0) {
        return Err(CliError::Usage("--k needs positive cutoffs".into()));
    }
    let prop = match (&args.train, args.uniform_propensity) {
        (_, true) => None,
        (Some(path), false) => {
            let train = load_data(path)?;
            Some(PropensityModel::fit(
                &LabelIndex::build(&train),
                train.n_instances(),
                args.a,
                args.b,
            ))
        }
        (None, false) => {
            return Err(CliError::Usage(
                "eval needs --train for propensities, or --uniform-propensity".into(),
            ))
        }
    };
    let file = File::open(&args.pred).map_err(|e| io_err(&args.pred, e))?;
    let preds = read_predictions(BufReader::new(file))?;
    let truth = load_data(&args.data)?;
    let prop = prop.unwrap_or_else(|| PropensityModel::uniform(truth.n_labels()));
    let truths: Vec<&[Index]> = (0..truth.n_instances())
        .map(|i| truth.label_set(i))
        .collect();
    let report = evaluate(&preds, &truths, &prop, &args.k)?;
    print!("{report}");
    if let Some(path) = &args.out {
        std::fs::write(path, report.to_string()).map_err(|e| io_err(path, e))?;
    }
    Ok(())
}

pub fn stats(args: &StatsArgs) -> Result<()> {
    let ds = load_data(&args.data)?;
    let s = DatasetStats::compute(&ds);
    println!("N\t{}", s.n_instances);
    println!("D\t{}", s.n_features);
    println!("L\t{}", s.n_labels);
    println!("APpL\t{:.2}", s.avg_points_per_label);
    println!("ALpP\t{:.2}", s.avg_labels_per_point);
    match &args.out {
        Some(path) => {
            let file = File::create(path).map_err(|e| io_err(path, e))?;
            let mut out = BufWriter::new(file);
            write_label_frequency_histogram(&ds, &mut out)?;
            out.flush().map_err(|e| io_err(path, e))?;
        }
        None => write_label_frequency_histogram(&ds, io::stdout().lock())?,
    }
    Ok(())
}
