use std::io::{Read, Write};
use std::time::Instant;

use super::config::{DatasetKind, ExperimentConfig};
use crate::data::{load_cifar_splits, load_mnist, LabeledImageSet};
use crate::error::{Error, Result};
use crate::network::{evaluate, Network, Trainer};
use crate::pooling::{TestPooling, TrainPooling};

/// One CSV row.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRecord {
    pub epoch: usize,
    pub learning_rate: f64,
    pub train_loss: f64,
    pub train_error: f64,
    /// Test error per requested mode, `None` on epochs that were not evaluated.
    pub test_errors: Vec<(TestPooling, Option<f64>)>,
    pub wall_seconds: f64,
}

impl MetricsRecord {
    pub fn test_error(&self, mode: TestPooling) -> Option<f64> {
        self.test_errors.iter().find(|(m, _)| *m == mode).and_then(|(_, e)| *e)
    }
}

pub fn csv_header(modes: &[TestPooling]) -> Vec<String> {
    let mut h = vec!["epoch".to_string(), "learning_rate".into(), "train_loss".into(), "train_error".into()];
    h.extend(modes.iter().map(|m| format!("test_error_{}", m.name())));
    h.push("wall_seconds".into());
    h
}

fn csv_err(e: csv::Error) -> Error {
    Error::invalid(format!("csv: {e}"))
}

pub fn write_metrics_csv<W: Write>(out: W, modes: &[TestPooling], rows: &[MetricsRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(csv_header(modes)).map_err(csv_err)?;
    for r in rows {
        let mut rec = vec![
            r.epoch.to_string(),
            r.learning_rate.to_string(),
            r.train_loss.to_string(),
            r.train_error.to_string(),
        ];
        for &m in modes {
            rec.push(r.test_error(m).map_or_else(String::new, |e| e.to_string()));
        }
        rec.push(r.wall_seconds.to_string());
        w.write_record(rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_metrics_csv<R: Read>(input: R) -> Result<Vec<MetricsRecord>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(csv_err)?.clone();
    let n = header.len();
    if n < 5 || header.get(0) != Some("epoch") || header.get(n - 1) != Some("wall_seconds") {
        return Err(Error::invalid("csv: not a metrics file (unexpected header)"));
    }
    let modes = (4..n - 1)
        .map(|i| {
            header[i]
                .strip_prefix("test_error_")
                .ok_or_else(|| Error::invalid(format!("csv: unexpected column '{}'", &header[i])))?
                .parse::<TestPooling>()
        })
        .collect::<Result<Vec<_>>>()?;
    let num = |s: &str| -> Result<f64> { s.parse().map_err(|_| Error::invalid(format!("csv: bad number '{s}'"))) };
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        rows.push(MetricsRecord {
            epoch: rec[0].parse().map_err(|_| Error::invalid(format!("csv: bad epoch '{}'", &rec[0])))?,
            learning_rate: num(&rec[1])?,
            train_loss: num(&rec[2])?,
            train_error: num(&rec[3])?,
            test_errors: modes
                .iter()
                .enumerate()
                .map(|(k, &m)| {
                    let cell = &rec[4 + k];
                    Ok((m, if cell.is_empty() { None } else { Some(num(cell)?) }))
                })
                .collect::<Result<_>>()?,
            wall_seconds: num(&rec[n - 1])?,
        });
    }
    Ok(rows)
}

/// Loads the configured train/test splits and applies the subset sizes.
pub fn load_datasets(cfg: &ExperimentConfig) -> Result<(LabeledImageSet, LabeledImageSet)> {
    let dir = &cfg.data_dir;
    let (train, test) = match cfg.dataset {
        DatasetKind::Mnist => (
            load_mnist(dir.join("train-images-idx3-ubyte"), dir.join("train-labels-idx1-ubyte"))?,
            load_mnist(dir.join("t10k-images-idx3-ubyte"), dir.join("t10k-labels-idx1-ubyte"))?,
        ),
        DatasetKind::Cifar10 => {
            let train: Vec<_> = (1..=5).map(|k| dir.join(format!("data_batch_{k}.bin"))).collect();
            load_cifar_splits(&train, &[dir.join("test_batch.bin")], 10)?
        }
        DatasetKind::Cifar100 => load_cifar_splits(&[dir.join("train.bin")], &[dir.join("test.bin")], 100)?,
    };
    let train = match cfg.subset {
        Some(n) => train.subset(n)?,
        None => train,
    };
    let test = match cfg.test_subset {
        Some(n) => test.subset(n)?,
        None => test,
    };
    Ok((train, test))
}

/// Trains once and evaluates the same parameters under every requested
/// test mode. `on_epoch` sees each record as soon as it is complete.
pub fn run_with(
    cfg: &ExperimentConfig,
    train: &LabeledImageSet,
    test: &LabeledImageSet,
    mut on_epoch: impl FnMut(&MetricsRecord),
) -> Result<(Vec<MetricsRecord>, Network<f32>)> {
    cfg.validate()?;
    let arch = cfg.arch_spec()?;
    let start = Instant::now();
    let mut trainer: Trainer<f32> = Trainer::from_arch(&arch, cfg.train.clone())?;
    let epochs = cfg.train.epochs;
    let mut rows = Vec::with_capacity(epochs);
    for epoch in 0..epochs {
        let m = trainer.train_epoch(train, epoch)?;
        let due = (epoch + 1) % cfg.eval_every == 0 || epoch + 1 == epochs;
        let test_errors = cfg
            .test_modes
            .iter()
            .map(|&mode| Ok((mode, if due { Some(evaluate(&trainer.net, test, mode)?) } else { None })))
            .collect::<Result<Vec<_>>>()?;
        let row = MetricsRecord {
            epoch: epoch + 1,
            learning_rate: m.learning_rate,
            train_loss: m.loss,
            train_error: m.train_error,
            test_errors,
            wall_seconds: if cfg.timing { start.elapsed().as_secs_f64() } else { 0.0 },
        };
        on_epoch(&row);
        rows.push(row);
    }
    Ok((rows, trainer.net))
}

pub fn run(cfg: &ExperimentConfig, train: &LabeledImageSet, test: &LabeledImageSet) -> Result<Vec<MetricsRecord>> {
    run_with(cfg, train, test, |_| {}).map(|(rows, _)| rows)
}

/// Final test error of one sweep run.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    /// `None` for the stochastic-pooling comparison run.
    pub pool_retain: Option<f64>,
    pub train_pooling: TrainPooling,
    pub test_pooling: TestPooling,
    pub final_test_error: f64,
}

pub const SWEEP_MODES: [TestPooling; 3] = [TestPooling::Max, TestPooling::ScaledMax, TestPooling::ProbWeighted];

/// One max-pooling dropout run per retain probability (evaluated with max,
/// scaled max and probabilistic weighted pooling), plus an optional
/// stochastic-pooling run.
pub fn sweep_with(
    base: &ExperimentConfig,
    retain_ps: &[f64],
    include_stochastic: bool,
    train: &LabeledImageSet,
    test: &LabeledImageSet,
    mut on_row: impl FnMut(&SweepRow),
) -> Result<Vec<SweepRow>> {
    let mut configs = Vec::new();
    for &p in retain_ps {
        let mut cfg = base.clone();
        if !cfg.train.train_pooling.is_dropout() {
            cfg.train.train_pooling = TrainPooling::MaxDropout;
        }
        cfg.train.dropout.pool_input = Some(p);
        cfg.test_modes = SWEEP_MODES.to_vec();
        configs.push(cfg);
    }
    if include_stochastic {
        let mut cfg = base.clone();
        cfg.train.train_pooling = TrainPooling::Stochastic;
        cfg.train.dropout.pool_input = None;
        cfg.test_modes = vec![TestPooling::StochasticWeighted];
        configs.push(cfg);
    }
    for cfg in &mut configs {
        cfg.eval_every = cfg.train.epochs;
        cfg.timing = false;
        // every run is checked before the first one starts training
        cfg.validate()?;
    }
    let mut out = Vec::new();
    for cfg in &configs {
        let rows = run(cfg, train, test)?;
        let last = rows.last().expect("epochs > 0");
        for &(mode, err) in &last.test_errors {
            let row = SweepRow {
                pool_retain: cfg.train.dropout.pool_input,
                train_pooling: cfg.train.train_pooling,
                test_pooling: mode,
                final_test_error: err.expect("last epoch is evaluated"),
            };
            on_row(&row);
            out.push(row);
        }
    }
    Ok(out)
}

pub fn write_sweep_csv<W: Write>(out: W, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["pool_retain", "train_pooling", "test_pooling", "final_test_error"])
        .map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.pool_retain.map_or_else(String::new, |p| p.to_string()),
            r.train_pooling.name().to_string(),
            r.test_pooling.name().to_string(),
            r.final_test_error.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(epoch: usize, errs: &[Option<f64>]) -> MetricsRecord {
        MetricsRecord {
            epoch,
            learning_rate: 0.1,
            train_loss: 0.123456789012345,
            train_error: 1.0 / 3.0,
            test_errors: SWEEP_MODES.iter().copied().zip(errs.iter().copied()).collect(),
            wall_seconds: 1.5,
        }
    }

    #[test]
    fn csv_round_trip() {
        let rows = vec![
            record(1, &[None, None, None]),
            record(2, &[Some(0.1), Some(0.0973), Some(2.0 / 7.0)]),
        ];
        let mut buf = Vec::new();
        write_metrics_csv(&mut buf, &SWEEP_MODES, &rows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(
            "epoch,learning_rate,train_loss,train_error,test_error_max,test_error_scaled_max,test_error_prob_weighted,wall_seconds\n"
        ));
        assert_eq!(read_metrics_csv(buf.as_slice()).unwrap(), rows);
        assert!(read_metrics_csv("a,b\n1,2\n".as_bytes()).is_err());
    }
}
