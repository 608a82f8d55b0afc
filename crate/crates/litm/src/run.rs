//! Training with streamed outputs: metrics log, periodic checkpoints and
//! optional GHIS dumps.

use std::path::{Path, PathBuf};

use litm_core::data::Dataset;
use litm_core::mining::IdentityGroup;
use litm_core::model::{ModelConfig, ModelParams};
use litm_core::train::{train, MetricsRow, TrainObserver};

use crate::atomic::write_atomic;
use crate::checkpoint;
use crate::config::RunConfig;
use crate::error::LitmError;
use crate::metrics::MetricsWriter;
use crate::report::ghis_table;

pub struct Outputs<'a> {
    pub checkpoint: &'a Path,
    pub metrics: &'a Path,
    /// Hard identity sets of every GHIS epoch, as text tables.
    pub ghis_dump: Option<&'a Path>,
}

/// Path of the checkpoint written after `epochs` epochs: `<out>.epoch<E>`.
pub fn periodic_path(out: &Path, epochs: usize) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(format!(".epoch{epochs}"));
    PathBuf::from(s)
}

struct Recorder<'a> {
    model: &'a ModelConfig,
    labels: &'a [u32],
    checkpoint: &'a Path,
    metrics: MetricsWriter,
    ghis: Option<String>,
    /// The error behind an aborted run; the trainer only sees a message.
    failure: Option<LitmError>,
}

impl Recorder<'_> {
    fn keep(&mut self, r: Result<(), LitmError>) -> Result<(), String> {
        r.map_err(|e| {
            let msg = e.to_string();
            self.failure = Some(e);
            msg
        })
    }
}

impl TrainObserver for Recorder<'_> {
    fn on_iteration(&mut self, row: &MetricsRow) -> Result<(), String> {
        let r = self.metrics.write(row);
        self.keep(r)
    }

    fn on_checkpoint(&mut self, epochs_done: usize, params: &ModelParams) -> Result<(), String> {
        let r = checkpoint::save(&periodic_path(self.checkpoint, epochs_done), self.model, params);
        self.keep(r)
    }

    fn on_ghis(&mut self, epoch: usize, groups: &[IdentityGroup]) -> Result<(), String> {
        if let Some(text) = &mut self.ghis {
            text.push_str(&ghis_table(epoch, groups, self.labels));
            text.push('\n');
        }
        Ok(())
    }
}

/// Train on `dataset` and write the final checkpoint and metrics log. Returns
/// the number of logged iterations.
pub fn train_to_files(run: &RunConfig, dataset: &Dataset, out: &Outputs) -> Result<usize, LitmError> {
    run.validate()?;
    let mut rec = Recorder {
        model: &run.model,
        labels: dataset.identities(),
        checkpoint: out.checkpoint,
        metrics: MetricsWriter::create(out.metrics)?,
        ghis: out.ghis_dump.map(|_| String::new()),
        failure: None,
    };
    let outcome = match train(dataset, &run.model, &run.train, &mut rec) {
        Ok(o) => o,
        Err(e) => return Err(rec.failure.take().unwrap_or(LitmError::Train(e))),
    };
    rec.metrics.finish()?;
    checkpoint::save(out.checkpoint, &run.model, &outcome.params)?;
    if let (Some(path), Some(text)) = (out.ghis_dump, rec.ghis) {
        write_atomic(path, text.as_bytes())?;
    }
    Ok(outcome.metrics.len())
}
