//! Ablation grids: the GCN/attention switches and the GCN depth sweep.
//!
//! Cells are independent (own model, own random streams), so they run on
//! separate threads and the table does not depend on scheduling.

use std::fmt::Write as _;

use sdgcn_core::model::MAX_GCN_LAYERS;
use sdgcn_core::train::TrainConfig;
use sdgcn_core::{ModelConfig, Sdgcn};

use crate::error::Result;
use crate::run::{run_training, Prepared};

#[derive(Clone, Debug, PartialEq)]
pub struct GridCell {
    pub name: String,
    pub model: ModelConfig,
}

/// `Att`, `Att+GCN`, `BiAtt`, `BiAtt+GCN` on top of `base`.
pub fn attention_gcn_grid(base: &ModelConfig) -> Vec<GridCell> {
    [(false, false), (false, true), (true, false), (true, true)]
        .into_iter()
        .map(|(c2a, gcn)| {
            let model = ModelConfig { c2a, gcn, ..base.clone() };
            GridCell {
                name: model.variant_name().to_string(),
                model,
            }
        })
        .collect()
}

/// GCN depths `1..=8`.
pub fn layer_sweep(base: &ModelConfig) -> Vec<GridCell> {
    (1..=MAX_GCN_LAYERS)
        .map(|l| GridCell {
            name: format!("L={l}"),
            model: ModelConfig {
                gcn: true,
                gcn_layers: l,
                ..base.clone()
            },
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct AblationRow {
    pub name: String,
    pub params: usize,
    /// Best test accuracy over epochs and the macro-F1 of that epoch.
    pub accuracy: f64,
    pub macro_f1: f64,
    pub best_epoch: usize,
    pub final_accuracy: f64,
    pub final_macro_f1: f64,
    pub epoch_losses: Vec<f64>,
    pub runtime_s: f64,
}

fn run_cell(cell: &GridCell, train_cfg: &TrainConfig, data: &Prepared) -> Result<AblationRow> {
    let s = run_training(&cell.model, train_cfg, data, |_| {})?;
    let best = s.outcome.best_test.as_ref();
    let fin = s.outcome.final_test.as_ref();
    Ok(AblationRow {
        name: cell.name.clone(),
        params: s.model.num_model_params(),
        accuracy: best.map_or(0.0, |r| r.accuracy),
        macro_f1: best.map_or(0.0, |r| r.macro_f1),
        best_epoch: s.outcome.best_epoch.unwrap_or(0),
        final_accuracy: fin.map_or(0.0, |r| r.accuracy),
        final_macro_f1: fin.map_or(0.0, |r| r.macro_f1),
        epoch_losses: s.outcome.logs.iter().map(|l| l.train_loss).collect(),
        runtime_s: s.runtime_s,
    })
}

/// Runs every cell, using up to `threads` worker threads. Rows come back in
/// grid order.
pub fn run_grid(grid: &[GridCell], train_cfg: &TrainConfig, data: &Prepared, threads: usize) -> Result<Vec<AblationRow>> {
    let threads = threads.max(1).min(grid.len().max(1));
    let mut slots: Vec<Option<Result<AblationRow>>> = (0..grid.len()).map(|_| None).collect();
    std::thread::scope(|scope| {
        for (w, chunk) in slots.chunks_mut(grid.len().div_ceil(threads).max(1)).enumerate() {
            let start = w * grid.len().div_ceil(threads).max(1);
            scope.spawn(move || {
                for (j, slot) in chunk.iter_mut().enumerate() {
                    *slot = Some(run_cell(&grid[start + j], train_cfg, data));
                }
            });
        }
    });
    slots.into_iter().map(|s| s.expect("every cell ran")).collect()
}

/// Parameter count of each cell without training.
pub fn parameter_counts(grid: &[GridCell], data: &Prepared) -> Result<Vec<(String, usize)>> {
    grid.iter()
        .map(|c| Ok((c.name.clone(), Sdgcn::new(c.model.clone(), &data.vocab, 0)?.num_model_params())))
        .collect()
}

pub fn format_table(title: &str, rows: &[AblationRow]) -> String {
    let mut s = format!("# {title}\n");
    let _ = writeln!(
        s,
        "{:<12} {:>10} {:>9} {:>9} {:>5} {:>9} {:>9}",
        "model", "params", "acc", "macro_f1", "epoch", "final_acc", "final_f1"
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{:<12} {:>10} {:>9.4} {:>9.4} {:>5} {:>9.4} {:>9.4}",
            r.name, r.params, r.accuracy, r.macro_f1, r.best_epoch, r.final_accuracy, r.final_macro_f1
        );
    }
    s
}
