use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use dwd::ingest::{binarize_labels, read_libsvm_path, LabelMap};
use dwd::metrics::classification_error;
use dwd::model::{compute_class_weights, compute_penalty_parameter, median_interclass_distance, DEFAULT_DISTANCE_CAP};
use dwd::solver::{LogRow, SolveResult};
use dwd::{ProblemData, SolveStatus, SolverOptions, SparseColMatrix, Variant};

use crate::error::{CliError, CliResult};
use crate::model_file::ModelFile;
use crate::{BenchArgs, PredictArgs, SolveArgs, TrainArgs, VariantArg};

pub const LOG_HEADER: [&str; 10] = [
    "k", "sigma", "etaP", "etaD", "etaC", "etaGap", "primObj", "dualObj", "psqmrIters", "double",
];

pub const BENCH_HEADER: [&str; 9] = ["Data", "n", "d", "C", "Iter", "Time", "psqmr", "double", "TrainErr"];

/// A training file with labels mapped to `±1`.
pub struct Dataset {
    pub x: SparseColMatrix,
    pub y: Vec<f64>,
    pub labels: LabelMap,
    /// Seconds spent reading and parsing.
    pub read_secs: f64,
}

pub fn load_dataset(path: &Path, features: Option<usize>) -> CliResult<Dataset> {
    let start = Instant::now();
    let (x, raw) = read_libsvm_path(path, features).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let (labels, y) = binarize_labels(&raw).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    Ok(Dataset {
        x,
        y,
        labels,
        read_secs: start.elapsed().as_secs_f64(),
    })
}

pub struct TrainOutcome {
    pub result: SolveResult,
    pub c: f64,
    /// Training error in percent.
    pub train_error: f64,
    pub solve_secs: f64,
}

/// The penalty heuristic for `q` on this data.
pub fn heuristic_penalty(ds: &Dataset, q: f64, seed: u64) -> CliResult<f64> {
    let dist = median_interclass_distance(&ds.x, &ds.y, DEFAULT_DISTANCE_CAP, seed)?;
    Ok(compute_penalty_parameter(ds.x.ncols(), ds.x.nrows(), dist, q)?)
}

fn options(s: &SolveArgs, variant: Variant) -> CliResult<SolverOptions> {
    let opts = SolverOptions {
        max_iter: s.max_iter,
        tol: s.tol,
        variant,
        strategy: s.force_strategy.to_strategy(),
        mu: s.mu,
        seed: s.seed,
        ..SolverOptions::default()
    };
    opts.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    if !(s.mu > 0.0 && s.mu.is_finite()) {
        return Err(CliError::Usage(format!("--mu must be positive, got {}", s.mu)));
    }
    Ok(opts)
}

/// Trains on `ds`. `c = None` uses the heuristic, whose cost is not
/// included in `solve_secs`.
pub fn train(ds: &Dataset, q: f64, c: Option<f64>, variant: Variant, s: &SolveArgs) -> CliResult<TrainOutcome> {
    if !(q > 0.0 && q.is_finite()) {
        return Err(CliError::Usage(format!("--q must be positive, got {q}")));
    }
    if let Some(c) = c {
        if !(c > 0.0 && c.is_finite()) {
            return Err(CliError::Usage(format!("--C must be positive, got {c}")));
        }
    }
    let opts = options(s, variant)?;
    let c = match c {
        Some(c) => c,
        None => heuristic_penalty(ds, q, s.seed)?,
    };
    let start = Instant::now();
    let mut p = ProblemData::new(ds.x.clone(), ds.y.clone(), q, c)?;
    if s.weighted {
        p = p.with_class_weights(compute_class_weights(&ds.y, q)?)?;
    }
    let result = dwd::solve(&p, &opts)?;
    let solve_secs = start.elapsed().as_secs_f64();
    let train_error = classification_error(&result.model.w, result.model.beta, &ds.x, &ds.y);
    Ok(TrainOutcome {
        result,
        c,
        train_error,
        solve_secs,
    })
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

pub fn write_log<W: Write>(out: W, log: &[LogRow]) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(LOG_HEADER)?;
    for row in log {
        w.write_record([
            row.k.to_string(),
            row.sigma.to_string(),
            row.eta_p.to_string(),
            row.eta_d.to_string(),
            row.eta_c.to_string(),
            row.eta_gap.to_string(),
            row.primal_objective.to_string(),
            row.dual_objective.to_string(),
            row.psqmr_iterations.to_string(),
            (row.double as u8).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn cmd_train(a: &TrainArgs) -> CliResult<()> {
    let ds = load_dataset(&a.data, a.features)?;
    let out = train(&ds, a.q, a.c, a.variant.into(), &a.solve)?;
    let r = &out.result;
    let t = &r.model.termination;

    if let Some(path) = &a.log_out {
        write_log(create(path)?, &r.log)?;
    }
    if let Some(path) = &a.model_out {
        let file = ModelFile {
            model: r.model.clone(),
            labels: ds.labels,
        };
        let mut w = create(path)?;
        file.write(&mut w)?;
        w.flush()?;
    }

    println!(
        "status={} iterations={} time={:.2}s psqmr|double={}|{} train_error={:.2}% C={:.2e} n={} d={} strategy={}",
        r.status,
        t.iterations,
        ds.read_secs + out.solve_secs,
        t.psqmr_iterations,
        t.double_count,
        out.train_error,
        out.c,
        ds.x.ncols(),
        ds.x.nrows(),
        r.strategy.as_str(),
    );
    if r.status == SolveStatus::NumericalFailure {
        return Err(CliError::Numerical(
            r.failure.clone().unwrap_or_else(|| "solver failed".into()),
        ));
    }
    Ok(())
}

pub fn cmd_predict(a: &PredictArgs) -> CliResult<()> {
    let file = File::open(&a.model).map_err(|e| CliError::Data(format!("{}: {e}", a.model.display())))?;
    let mf = ModelFile::read(BufReader::new(file))?;
    let d = mf.model.d();
    let (x, raw) = read_libsvm_path(&a.data, None).map_err(|e| CliError::Data(format!("{}: {e}", a.data.display())))?;
    let x = if x.nrows() > d {
        if !a.clip_features {
            return Err(CliError::Data(format!(
                "{} has feature index {} but the model has d = {d}; pass --clip-features to ignore the extra features",
                a.data.display(),
                x.nrows()
            )));
        }
        x.truncate_rows(d)
    } else {
        x.with_nrows(d)?
    };

    let signs = mf.model.predict_signs(&x)?;
    let mut out: Box<dyn Write> = match &a.out {
        Some(path) => Box::new(create(path)?),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    for s in &signs {
        writeln!(out, "{}", mf.labels.to_raw(*s))?;
    }
    out.flush()?;

    let truth: Option<Vec<f64>> = raw.iter().map(|&v| mf.labels.to_signed(v)).collect();
    match truth {
        Some(y) => {
            let err = classification_error(&mf.model.w, mf.model.beta, &x, &y);
            eprintln!("test_error={err:.2}% n={}", y.len());
        }
        None => eprintln!("labels in {} do not match the model's classes; no error reported", a.data.display()),
    }
    Ok(())
}

/// `name/variant/q=…`, the row key of a bench table.
pub fn bench_key(path: &Path, variant: VariantArg, q: f64) -> String {
    let name = path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    let name = name.strip_suffix(".gz").unwrap_or(&name);
    let v = match variant {
        VariantArg::Sgs => "sgs",
        VariantArg::Direct => "direct",
    };
    format!("{name}/{v}/q={q}")
}

pub fn cmd_bench(a: &BenchArgs) -> CliResult<()> {
    let sink: Box<dyn Write> = match &a.out {
        Some(path) => Box::new(create(path)?),
        None => Box::new(io::stdout().lock()),
    };
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(BENCH_HEADER)?;
    let mut worst: Option<CliError> = None;

    for path in &a.data {
        let ds = load_dataset(path, None);
        for variant in [VariantArg::Sgs, VariantArg::Direct] {
            for q in [1.0, 2.0] {
                let key = bench_key(path, variant, q);
                let row: Vec<String> = match &ds {
                    Err(e) => {
                        let row = failure_row(key, None, e);
                        note_failure(&mut worst, CliError::Data(e.to_string()));
                        row
                    }
                    Ok(ds) => match train(ds, q, None, variant.into(), &a.solve) {
                        Ok(out) => {
                            let t = &out.result.model.termination;
                            if out.result.status == SolveStatus::NumericalFailure {
                                note_failure(&mut worst, CliError::Numerical(out.result.failure.clone().unwrap_or_default()));
                            }
                            vec![
                                key,
                                ds.x.ncols().to_string(),
                                ds.x.nrows().to_string(),
                                format!("{:.2e}", out.c),
                                t.iterations.to_string(),
                                format!("{:.2}", ds.read_secs + out.solve_secs),
                                t.psqmr_iterations.to_string(),
                                t.double_count.to_string(),
                                if out.result.status == SolveStatus::NumericalFailure {
                                    format!("error: {}", out.result.failure.clone().unwrap_or_default())
                                } else {
                                    format!("{:.2}", out.train_error)
                                },
                            ]
                        }
                        Err(e @ CliError::Usage(_)) => return Err(e),
                        Err(e) => {
                            let row = failure_row(key, Some(&ds.x), &e);
                            note_failure(&mut worst, e);
                            row
                        }
                    },
                };
                w.write_record(&row)?;
                w.flush()?;
            }
        }
    }
    w.flush()?;
    match worst {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn failure_row(key: String, x: Option<&SparseColMatrix>, e: &CliError) -> Vec<String> {
    let mut row = vec![String::new(); BENCH_HEADER.len()];
    row[0] = key;
    if let Some(x) = x {
        row[1] = x.ncols().to_string();
        row[2] = x.nrows().to_string();
    }
    row[8] = format!("error: {e}");
    row
}

/// Keeps the failure with the highest exit code.
fn note_failure(worst: &mut Option<CliError>, e: CliError) {
    if worst.as_ref().is_none_or(|w| e.exit_code() > w.exit_code()) {
        *worst = Some(e);
    }
}
