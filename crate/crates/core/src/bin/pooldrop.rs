use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pooldrop::counting::{base_b, log_count_ratio, log_model_count, CountFlavor, CountQuery};
use pooldrop::data::channel_means;
use pooldrop::experiment::{
    load_datasets, parse_test_modes, run_with, sweep_with, write_metrics_csv, write_sweep_csv,
    DatasetKind, ExperimentConfig, MetricsRecord,
};
use pooldrop::network::Checkpoint;
use pooldrop::selfcheck;
use pooldrop::{Error, Result};

#[derive(Parser)]
#[command(name = "pooldrop", version, about = "Max-pooling dropout experiments on MNIST and CIFAR")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train once and evaluate every requested test pooling mode per epoch.
    Train {
        #[command(flatten)]
        exp: ExpArgs,
        /// Save the final parameters to this checkpoint file.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// One run per pool retain probability; prints final test errors.
    Sweep {
        #[command(flatten)]
        exp: ExpArgs,
        /// Comma-separated retain probabilities.
        #[arg(long, default_value = "0.3,0.5,0.7")]
        retain_ps: String,
        /// Add a stochastic pooling run for comparison.
        #[arg(long)]
        stochastic: bool,
    },
    /// Model-count calculator for pooling regions and conv dropout.
    Count(CountArgs),
    /// Run the oracle and finite-difference self-checks.
    Gradcheck {
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Print dataset statistics.
    InspectData {
        #[command(flatten)]
        exp: ExpArgs,
    },
}

#[derive(Args)]
struct ExpArgs {
    /// key = value experiment file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    arch: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Train on the first N training examples.
    #[arg(long)]
    subset: Option<usize>,
    /// Comma-separated test pooling modes.
    #[arg(long)]
    test_modes: Option<String>,
    /// CSV output path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// Extra key=value overrides, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

impl ExpArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(a) = &self.arch {
            cfg.arch = a.clone();
        }
        if let Some(s) = self.seed {
            cfg.train.seed = s;
        }
        if let Some(e) = self.epochs {
            cfg.train.epochs = e;
        }
        if let Some(n) = self.subset {
            cfg.subset = Some(n);
        }
        if let Some(m) = &self.test_modes {
            cfg.test_modes = parse_test_modes(m)?;
        }
        if let Some(o) = &self.out {
            cfg.out = Some(o.clone());
        }
        if let Some(d) = &self.data_dir {
            cfg.data_dir = d.clone();
        }
        for s in &self.sets {
            cfg.apply_assignment(s)?;
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct CountArgs {
    /// Feature maps.
    #[arg(long, default_value_t = 96)]
    r: u64,
    /// Units per map (map side for conv dropout).
    #[arg(long, default_value_t = 1024)]
    s: u64,
    /// Units per pooling region (filter side for conv dropout).
    #[arg(long, default_value_t = 4)]
    t: u64,
    /// Pooling window side; sets t = window^2.
    #[arg(long)]
    window: Option<u64>,
    #[arg(long)]
    stride: Option<u64>,
    /// Largest t in the b(t) table.
    #[arg(long, default_value_t = 64)]
    max_t: u64,
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(File::create(p)?),
        None => Box::new(io::stdout()),
    })
}

fn progress(r: &MetricsRecord) {
    let tests: Vec<String> = r
        .test_errors
        .iter()
        .filter_map(|(m, e)| e.map(|e| format!("{}={:.4}", m.name(), e)))
        .collect();
    eprintln!(
        "epoch {:>3}  lr {:<6}  loss {:.4}  train_error {:.4}  {}",
        r.epoch,
        r.learning_rate,
        r.train_loss,
        r.train_error,
        tests.join("  ")
    );
}

fn train(exp: &ExpArgs, checkpoint: &Option<PathBuf>) -> Result<()> {
    let cfg = exp.resolve()?;
    cfg.validate()?;
    let (train, test) = load_datasets(&cfg)?;
    eprintln!("{} training / {} test examples, arch {}", train.len(), test.len(), cfg.arch);
    let (rows, net) = run_with(&cfg, &train, &test, progress)?;
    write_metrics_csv(output(&cfg.out)?, &cfg.test_modes, &rows)?;
    if let Some(path) = checkpoint {
        Checkpoint::of(&net, cfg.train.seed, cfg.train.epochs as u64).save(path)?;
        eprintln!("checkpoint written to {}", path.display());
    }
    Ok(())
}

fn sweep(exp: &ExpArgs, retain_ps: &str, stochastic: bool) -> Result<()> {
    let cfg = exp.resolve()?;
    let ps = retain_ps
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidArgument(format!("retain-ps: cannot parse '{s}'")))
        })
        .collect::<Result<Vec<f64>>>()?;
    if let Some(bad) = ps.iter().find(|&&p| !(p > 0.0 && p <= 1.0)) {
        return Err(Error::InvalidArgument(format!("retain probability {bad} outside (0, 1]")));
    }
    let (train, test) = load_datasets(&cfg)?;
    let rows = sweep_with(&cfg, &ps, stochastic, &train, &test, |r| {
        eprintln!(
            "pool_retain {:<5} {:<12} {:<20} final_test_error {:.4}",
            r.pool_retain.map_or("-".into(), |p| p.to_string()),
            r.train_pooling.name(),
            r.test_pooling.name(),
            r.final_test_error
        )
    })?;
    write_sweep_csv(output(&cfg.out)?, &rows)
}

fn count(a: &CountArgs) -> Result<()> {
    let t = match (a.window, a.stride) {
        (Some(w), Some(s)) if s != w => {
            return Err(Error::InvalidArgument(format!(
                "stride {s} differs from window {w}: the count assumes non-overlapping regions"
            )))
        }
        (Some(w), _) => w * w,
        (None, Some(_)) => return Err(Error::InvalidArgument("--stride needs --window".into())),
        (None, None) => a.t,
    };
    println!("t,b_maxdrop,b_stochastic");
    for k in 1..=a.max_t {
        println!(
            "{k},{:.12},{:.12}",
            base_b(k, CountFlavor::MaxPoolDropout)?,
            base_b(k, CountFlavor::Stochastic)?
        );
    }
    let md = CountQuery::new(a.r, a.s, t, CountFlavor::MaxPoolDropout);
    let st = CountQuery::new(a.r, a.s, t, CountFlavor::Stochastic);
    let ln10 = std::f64::consts::LN_10;
    println!();
    println!("r = {}, s = {}, t = {}, regions = {}", a.r, a.s, t, md.regions()?);
    let lm = log_model_count(&md)?;
    let ls = log_model_count(&st)?;
    let ratio = log_count_ratio(&md, &st)?;
    println!("ln count max-pooling dropout  {lm:.6}  (log10 {:.6})", lm / ln10);
    println!("ln count stochastic pooling   {ls:.6}  (log10 {:.6})", ls / ln10);
    println!("ln ratio                      {ratio:.6}  (log10 {:.6})", ratio / ln10);
    Ok(())
}

fn gradcheck(seed: u64) -> Result<bool> {
    let checks = selfcheck::run_all(seed)?;
    for c in &checks {
        println!(
            "{}  {:<50} error {:.3e}  tolerance {:.0e}",
            if c.passed() { "PASS" } else { "FAIL" },
            c.name,
            c.error,
            c.tolerance
        );
    }
    Ok(checks.iter().all(|c| c.passed()))
}

fn inspect(exp: &ExpArgs) -> Result<()> {
    let cfg = exp.resolve()?;
    let (train, test) = load_datasets(&cfg)?;
    println!("dataset {} from {}", cfg.dataset.name(), cfg.data_dir.display());
    for (name, set) in [("train", &train), ("test", &test)] {
        let (lo, hi) = set.pixel_range();
        let means: Vec<String> = channel_means(set).iter().map(|m| format!("{m:.4}")).collect();
        println!(
            "{name}: {} examples of {:?}, {} classes, pixel range [{lo:.4}, {hi:.4}], channel means [{}]",
            set.len(),
            set.dims,
            set.class_count,
            means.join(", ")
        );
        println!("  class counts {:?}", set.class_histogram());
    }
    if cfg.dataset != DatasetKind::Mnist {
        println!("(CIFAR values are centred with the training split's channel means)");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Train { exp, checkpoint } => train(exp, checkpoint),
        Command::Sweep {
            exp,
            retain_ps,
            stochastic,
        } => sweep(exp, retain_ps, *stochastic),
        Command::Count(a) => count(a),
        Command::Gradcheck { seed } => match gradcheck(*seed) {
            Ok(true) => Ok(()),
            Ok(false) => return ExitCode::from(1),
            Err(e) => Err(e),
        },
        Command::InspectData { exp } => inspect(exp),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
