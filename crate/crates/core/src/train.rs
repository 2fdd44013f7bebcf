//! Mini-batch training and evaluation.
//!
//! A batch is a set of whole sentences; all aspects of a sentence share one
//! graph, so they always travel together. The batch loss is the mean of the
//! sentence losses.

use alloc::string::String;
use alloc::vec::Vec;

use crate::autodiff::Graph;
use crate::data::EncodedInstance;
use crate::error::{Error, Result};
use crate::metrics::{AspectPrediction, EvalReport};
use crate::model::Sdgcn;
use crate::optim::Adam;
use crate::rng::{streams, RngStream};
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
    /// Also run a full dropout-free pass over the training set every epoch.
    pub eval_train: bool,
    /// Stop as soon as training accuracy reaches this value (needs `eval_train`).
    pub stop_at_train_accuracy: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 32,
            lr: 0.001,
            seed: 1,
            eval_train: false,
            stop_at_train_accuracy: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean sentence loss over the epoch's batches (dropout on).
    pub train_loss: f64,
    pub train_accuracy: Option<f64>,
    pub test_accuracy: Option<f64>,
    pub test_macro_f1: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub logs: Vec<EpochLog>,
    /// Epoch (1-based) with the best test accuracy, if a test set was given.
    pub best_epoch: Option<usize>,
    pub best_params: Vec<(String, Tensor)>,
    pub best_test: Option<EvalReport>,
    pub final_test: Option<EvalReport>,
}

/// Splits sentence indices `0..n` into shuffled batches of at most
/// `batch_size` sentences.
pub fn make_batches(n: usize, batch_size: usize, rng: &mut RngStream) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut order);
    order.chunks(batch_size.max(1)).map(|c| c.to_vec()).collect()
}

/// One optimizer step on `batch`. Returns the mean sentence loss.
pub fn train_step(
    model: &mut Sdgcn,
    batch: &[&EncodedInstance],
    adam: &Adam,
    dropout_rng: &mut RngStream,
) -> Result<f64> {
    model.params.zero_grad();
    let scale = 1.0 / batch.len() as f64;
    let mut total = 0.0;
    for inst in batch {
        let grads = {
            let mut g = Graph::new(&model.params);
            let loss = model.loss_graph(&mut g, inst, Some(dropout_rng))?;
            let value = g.value(loss).item();
            if !value.is_finite() {
                // the caller knows the epoch and step
                return Err(Error::NonFiniteLoss { epoch: 0, step: 0 });
            }
            total += value;
            g.backward(loss)?;
            g.into_grads()
        };
        grads.accumulate(&mut model.params, scale)?;
    }
    adam.step(&mut model.params)?;
    Ok(total * scale)
}

/// Dropout-free evaluation. Sentences are independent, so the result does
/// not depend on how they are grouped.
pub fn evaluate(model: &Sdgcn, instances: &[EncodedInstance]) -> Result<EvalReport> {
    let mut preds = Vec::new();
    for inst in instances {
        let p = model.predict(inst)?;
        for (k, (&gold, &predicted)) in inst.labels.iter().zip(&p.labels).enumerate() {
            preds.push(AspectPrediction {
                sentence_id: inst.id.clone(),
                aspect_index: k,
                gold,
                predicted,
            });
        }
    }
    Ok(EvalReport::from_predictions(preds))
}

/// Trains `model` in place. After every epoch `on_epoch` receives the log
/// line. The returned outcome carries the parameters of the epoch with the
/// best test accuracy (or of the last epoch without a test set).
pub fn train(
    model: &mut Sdgcn,
    train_set: &[EncodedInstance],
    test_set: &[EncodedInstance],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<TrainOutcome> {
    if train_set.is_empty() {
        return Err(Error::Data("empty training set".into()));
    }
    if cfg.batch_size == 0 {
        return Err(Error::Config("batch size must be positive".into()));
    }
    let adam = Adam::with_lr(cfg.lr);
    let mut shuffle = RngStream::with_stream(cfg.seed, streams::SHUFFLE);
    let mut dropout = RngStream::with_stream(cfg.seed, streams::DROPOUT);
    let mut logs = Vec::new();
    let mut best: Option<(usize, f64, EvalReport, Vec<(String, Tensor)>)> = None;
    let mut final_test = None;

    for epoch in 1..=cfg.epochs {
        let batches = make_batches(train_set.len(), cfg.batch_size, &mut shuffle);
        let mut loss_sum = 0.0;
        for (step, batch) in batches.iter().enumerate() {
            let refs: Vec<&EncodedInstance> = batch.iter().map(|&i| &train_set[i]).collect();
            let loss = match train_step(model, &refs, &adam, &mut dropout) {
                Ok(l) => l,
                Err(Error::NonFiniteLoss { .. }) => return Err(Error::NonFiniteLoss { epoch, step }),
                Err(e) => return Err(e),
            };
            loss_sum += loss;
        }
        let train_accuracy = if cfg.eval_train {
            Some(evaluate(model, train_set)?.accuracy)
        } else {
            None
        };
        let test = if test_set.is_empty() {
            None
        } else {
            Some(evaluate(model, test_set)?)
        };
        let log = EpochLog {
            epoch,
            train_loss: loss_sum / batches.len() as f64,
            train_accuracy,
            test_accuracy: test.as_ref().map(|r| r.accuracy),
            test_macro_f1: test.as_ref().map(|r| r.macro_f1),
        };
        on_epoch(&log);
        logs.push(log);
        if let Some(report) = test {
            let better = best.as_ref().map_or(true, |(_, acc, _, _)| report.accuracy > *acc);
            if better {
                best = Some((epoch, report.accuracy, report.clone(), model.params.snapshot()));
            }
            final_test = Some(report);
        }
        if let (Some(target), Some(acc)) = (cfg.stop_at_train_accuracy, train_accuracy) {
            if acc >= target {
                break;
            }
        }
    }

    Ok(match best {
        Some((epoch, _, report, params)) => TrainOutcome {
            logs,
            best_epoch: Some(epoch),
            best_params: params,
            best_test: Some(report),
            final_test,
        },
        None => TrainOutcome {
            logs,
            best_epoch: None,
            best_params: model.params.snapshot(),
            best_test: None,
            final_test,
        },
    })
}
