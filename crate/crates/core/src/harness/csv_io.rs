use std::fs::File;
use std::path::{Path, PathBuf};

use super::{HarnessError, IterationRecord, Method, RunLog};

pub fn csv_header(dims: usize) -> Vec<String> {
    let mut cols = vec!["iter".to_string()];
    cols.extend((1..=dims).map(|i| format!("mu_{i}")));
    cols.extend((1..=dims).map(|i| format!("var_{i}")));
    cols.extend(
        [
            "alpha",
            "batch_return",
            "eval_return",
            "success_ratio",
            "kl_to_target",
            "kl_step",
            "solver_status",
        ]
        .map(String::from),
    );
    cols
}

pub fn run_file_name(method: Method, seed: u64) -> String {
    format!("{method}_seed{seed}.csv")
}

/// 17 significant digits: enough to read back the same `f64`.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_run_csv(log: &RunLog, path: &Path) -> Result<(), HarnessError> {
    let file = File::create(path).map_err(|e| HarnessError::io(path, e))?;
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(file);
    let csv_err = |e: csv::Error| HarnessError::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    w.write_record(csv_header(log.dims)).map_err(csv_err)?;
    for r in &log.records {
        let mut row = vec![r.iter.to_string()];
        row.extend(r.mean.iter().chain(&r.variances).map(|&x| num(x)));
        row.extend([r.alpha, r.batch_return, r.eval_return, r.success_ratio, r.kl_to_target, r.kl_step].map(num));
        row.push(r.solver_status.to_string());
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

/// Writes one `<method>_seed<seed>.csv` per run into `dir`.
pub fn emit_csv(logs: &[RunLog], dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    logs.iter()
        .map(|log| {
            let path = dir.join(run_file_name(log.method, log.seed));
            write_run_csv(log, &path)?;
            Ok(path)
        })
        .collect()
}

/// Reads a run back; method and seed come from the file name.
pub fn read_run_csv(path: &Path) -> Result<RunLog, HarnessError> {
    let bad = |message: String| HarnessError::Csv {
        path: path.to_path_buf(),
        message,
    };
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| bad("file name is not UTF-8".into()))?;
    let (method, seed) = stem
        .rsplit_once("_seed")
        .ok_or_else(|| bad("expected a `<method>_seed<n>.csv` file name".into()))?;
    let method: Method = method.parse().map_err(bad)?;
    let seed: u64 = seed.parse().map_err(|_| bad(format!("bad seed in file name `{stem}`")))?;

    let file = File::open(path).map_err(|e| HarnessError::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let header = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
    if header.len() < 8 || (header.len() - 8) % 2 != 0 {
        return Err(bad(format!("unexpected column count {}", header.len())));
    }
    let dims = (header.len() - 8) / 2;
    if header.iter().ne(csv_header(dims).iter().map(String::as_str)) {
        return Err(bad("header does not match the run schema".into()));
    }
    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| bad(e.to_string()))?;
        let f = |j: usize| -> Result<f64, HarnessError> {
            row[j]
                .parse()
                .map_err(|_| bad(format!("bad number `{}` in column {}", &row[j], &header[j])))
        };
        let iter = row[0].parse().map_err(|_| bad(format!("bad iteration `{}`", &row[0])))?;
        let mean = (1..=dims).map(f).collect::<Result<_, _>>()?;
        let variances = (dims + 1..=2 * dims).map(f).collect::<Result<_, _>>()?;
        let o = 2 * dims + 1;
        records.push(IterationRecord {
            iter,
            mean,
            variances,
            alpha: f(o)?,
            batch_return: f(o + 1)?,
            eval_return: f(o + 2)?,
            success_ratio: f(o + 3)?,
            kl_to_target: f(o + 4)?,
            kl_step: f(o + 5)?,
            solver_status: row[o + 6].parse().map_err(bad)?,
        });
    }
    Ok(RunLog {
        method,
        seed,
        dims,
        records,
    })
}
