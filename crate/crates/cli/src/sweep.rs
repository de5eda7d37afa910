//! Grid sweeps over a bounded worker pool with resumable runs.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::thread;

use crate::config::RunConfig;
use crate::error::Result;
use crate::run::{execute_run, is_done, run_dir, run_id, write_rows, RecordRow, RunRecord, RunStatus};

pub const SWEEP_FILE: &str = "sweep.csv";

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub rows: Vec<RecordRow>,
    /// Runs skipped because their directory already held a finished record.
    pub resumed: usize,
    pub failed: usize,
    pub not_converged: usize,
    pub table: PathBuf,
}

/// Executes every configuration (each at most once per output root), with
/// up to `jobs` runs in flight. A failing run becomes a `failed` row; the
/// sweep goes on. The table is rewritten, sorted, after every finished run.
pub fn run_sweep(configs: &[RunConfig], out_root: &Path, jobs: usize) -> Result<SweepSummary> {
    fs::create_dir_all(out_root)?;
    let table = out_root.join(SWEEP_FILE);
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<(RecordRow, bool)>();
    let jobs = jobs.clamp(1, configs.len().max(1));

    let mut rows = Vec::with_capacity(configs.len());
    let mut resumed = 0;
    let mut write_result = Ok(());
    thread::scope(|scope| {
        for _ in 0..jobs {
            let tx = tx.clone();
            let next = &next;
            scope.spawn(move || loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                let Some(config) = configs.get(k) else { break };
                let dir = run_dir(out_root, &run_id(config));
                let (row, reused) = match load_finished(&dir) {
                    Some(record) => (RecordRow::completed(&record), true),
                    None => match execute_run(config, &dir) {
                        Ok(record) => (RecordRow::completed(&record), false),
                        Err(e) => (RecordRow::failed(config, &e.to_string()), false),
                    },
                };
                if tx.send((row, reused)).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        // single collector: the only writer of the table
        for (row, reused) in rx {
            resumed += usize::from(reused);
            rows.push(row);
            rows.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
            if write_result.is_ok() {
                write_result = write_table(&table, &rows);
            }
        }
    });
    write_result?;

    let failed = rows.iter().filter(|r| r.status == RunStatus::Failed).count();
    let not_converged = rows.iter().filter(|r| r.converged == Some(false)).count();
    Ok(SweepSummary {
        rows,
        resumed,
        failed,
        not_converged,
        table,
    })
}

fn load_finished(dir: &Path) -> Option<RunRecord> {
    if !is_done(dir) {
        return None;
    }
    RunRecord::load(dir).ok()
}

/// Write-then-rename so readers never see a half-written table.
fn write_table(path: &Path, rows: &[RecordRow]) -> Result<()> {
    let tmp = path.with_extension("csv.tmp");
    write_rows(&tmp, rows)?;
    fs::rename(&tmp, path)?;
    Ok(())
}
