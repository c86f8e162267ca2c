//! Implementations behind the CLI subcommands.

use std::collections::VecDeque;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use nalgebra::{DMatrix, DVector};

use ape_core::ape::{run_ape_observed, ApeConfig, ApeEvent, ErrorMeasure, LooMode, Partition};
use ape_core::design::{lhd, sparse_grid, Design, Provenance};
use ape_core::gp::{fit as fit_gp, FitConfig, TrendBasis};
use ape_core::metrics::{scale_metrics, BenchRecord, TestSet};
use ape_core::seed::{child_seed, stream};
use ape_core::testfns::{by_name, Tabulated, TargetFunction, REGISTRY};

use crate::{ApeArgs, DesignCommand, ErrorMeasureArg, FitArgs, FitMethod, LooModeArg, ReportArgs};

impl From<LooModeArg> for LooMode {
    fn from(arg: LooModeArg) -> Self {
        match arg {
            LooModeArg::ClosedForm => LooMode::ClosedForm,
            LooModeArg::FullRefit => LooMode::FullRefit,
        }
    }
}

impl From<ErrorMeasureArg> for ErrorMeasure {
    fn from(arg: ErrorMeasureArg) -> Self {
        match arg {
            ErrorMeasureArg::Mse => ErrorMeasure::Mse,
            ErrorMeasureArg::MaxAbs => ErrorMeasure::MaxAbs,
        }
    }
}

fn lookup(function: &str) -> Result<TargetFunction> {
    by_name(function).with_context(|| {
        format!(
            "unknown function {function:?}; registered: {}",
            REGISTRY.join(", ")
        )
    })
}

fn evaluate_at(f: &TargetFunction, points: &DMatrix<f64>) -> Result<DVector<f64>> {
    let mut y = DVector::zeros(points.nrows());
    for i in 0..points.nrows() {
        let x: Vec<f64> = points.row(i).iter().copied().collect();
        y[i] = f.eval(&x)?;
    }
    Ok(y)
}

pub fn design(out: &Path, command: DesignCommand) -> Result<()> {
    let (design, path) = match command {
        DesignCommand::Lhd { n, d, seed, file } => {
            let design = lhd(n, d, child_seed(seed, stream::DESIGN))
                .context("generating Latin hypercube design")?;
            let path =
                file.unwrap_or_else(|| out.join(format!("lhd-n{n}-d{d}-seed{seed}.csv")));
            (design, path)
        }
        DesignCommand::Sgd { d, eta, file } => {
            let design = sparse_grid(d, eta).context("generating sparse grid design")?;
            let path = file.unwrap_or_else(|| out.join(format!("sgd-d{d}-eta{eta}.csv")));
            (design, path)
        }
    };
    design
        .write(&path)
        .with_context(|| format!("writing {}", path.display()))?;
    println!("wrote {} ({} points)", path.display(), design.len());
    Ok(())
}

/// Training inputs plus the held-out evaluation data for one fit.
struct FitProblem {
    label: String,
    points: DMatrix<f64>,
    responses: DVector<f64>,
    test_points: DMatrix<f64>,
    test_truth: DVector<f64>,
}

fn resolve_fit_problem(args: &FitArgs) -> Result<FitProblem> {
    if let Some(data_path) = &args.data {
        if args.method == FitMethod::SgdFit {
            bail!("sgd-fit needs a sparse grid; tabulated data has none");
        }
        if args.design.is_some() || args.n.is_some() || args.eta.is_some() {
            bail!("--data supplies its own points; drop --design/--n/--eta");
        }
        let train = Tabulated::read_csv(data_path)
            .with_context(|| format!("reading {}", data_path.display()))?;
        let test_path = args.test_data.as_ref().expect("clap enforces --test-data");
        let test = Tabulated::read_csv(test_path)
            .with_context(|| format!("reading {}", test_path.display()))?;
        if test.dim() != train.dim() {
            bail!(
                "training data is {}-dimensional but test data is {}-dimensional",
                train.dim(),
                test.dim()
            );
        }
        let label = data_path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "tabulated".into());
        return Ok(FitProblem {
            label,
            points: train.points,
            responses: train.values,
            test_points: test.points,
            test_truth: test.values,
        });
    }

    let Some(function) = &args.function else {
        bail!("provide a target: --function <name> or --data <csv>");
    };
    let f = lookup(function)?;
    let design = match (&args.design, args.method) {
        (Some(path), method) => {
            let design =
                Design::read(path).with_context(|| format!("reading {}", path.display()))?;
            if design.dim() != f.dim() {
                bail!(
                    "design is {}-dimensional but {} expects {}",
                    design.dim(),
                    f.name(),
                    f.dim()
                );
            }
            if method == FitMethod::SgdFit
                && !matches!(design.provenance(), Provenance::SparseGrid { .. })
            {
                bail!("sgd-fit requires a sparse-grid design file");
            }
            design
        }
        (None, FitMethod::StandardGp) => {
            let n = args.n.context("standard-gp needs --n (or --design)")?;
            lhd(n, f.dim(), child_seed(args.seed, stream::DESIGN))?
        }
        (None, FitMethod::SgdFit) => {
            let eta = args.eta.context("sgd-fit needs --eta (or --design)")?;
            sparse_grid(f.dim(), eta)?
        }
    };
    let test = TestSet::uniform(&f, args.n_test, child_seed(args.seed, stream::TEST_SET))?;
    let responses = evaluate_at(&f, design.points())?;
    Ok(FitProblem {
        label: f.name().to_string(),
        points: design.into_points(),
        responses,
        test_points: test.points,
        test_truth: test.truth,
    })
}

fn write_predictions(
    path: &Path,
    points: &DMatrix<f64>,
    truth: &DVector<f64>,
    mean: &DVector<f64>,
    se: &DVector<f64>,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let d = points.ncols();
    let mut header: Vec<String> = (1..=d).map(|j| format!("x{j}")).collect();
    header.extend(["truth".into(), "mean".into(), "se".into()]);
    w.write_record(&header)?;
    for i in 0..points.nrows() {
        let mut row: Vec<String> = (0..d)
            .map(|j| format!("{:.16e}", points[(i, j)]))
            .collect();
        row.push(format!("{:.16e}", truth[i]));
        row.push(format!("{:.16e}", mean[i]));
        row.push(format!("{:.16e}", se[i]));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn append_record(out: &Path, record: &BenchRecord) -> Result<PathBuf> {
    let path = out.join("records.csv");
    record
        .append_csv(&path)
        .with_context(|| format!("appending to {}", path.display()))?;
    println!(
        "{} {} n={} rmspe_scaled={:.4} mape_scaled={:.4} time_minutes={:.4}",
        record.method, record.function, record.n, record.rmspe_scaled, record.mape_scaled,
        record.time_minutes
    );
    Ok(path)
}

pub fn fit(out: &Path, args: FitArgs) -> Result<()> {
    let problem = resolve_fit_problem(&args)?;
    let n = problem.points.nrows();
    let method = args.method.label();

    // Wall clock covers fitting and prediction, not truth evaluation.
    let started = Instant::now();
    let model = fit_gp(
        problem.points.clone(),
        problem.responses.clone(),
        TrendBasis::Constant,
        &FitConfig::default(),
    )
    .with_context(|| format!("fitting {method} on {n} points"))?;
    let n_test = problem.test_points.nrows();
    let mut mean = DVector::zeros(n_test);
    let mut se = DVector::zeros(n_test);
    for i in 0..n_test {
        let x: Vec<f64> = problem.test_points.row(i).iter().copied().collect();
        let p = model.predict(&x)?;
        mean[i] = p.mean;
        se[i] = p.se;
    }
    let time_minutes = started.elapsed().as_secs_f64() / 60.0;

    let (rmspe_scaled, mape_scaled) = scale_metrics(&problem.test_truth, &mean)?;
    let predictions_path = out.join(format!(
        "predictions-{method}-{}-n{n}-seed{}.csv",
        problem.label, args.seed
    ));
    write_predictions(
        &predictions_path,
        &problem.test_points,
        &problem.test_truth,
        &mean,
        &se,
    )?;
    append_record(
        out,
        &BenchRecord {
            method: method.to_string(),
            function: problem.label,
            n,
            rmspe_scaled,
            mape_scaled,
            time_minutes,
            seed: args.seed,
        },
    )?;
    Ok(())
}

/// Checkpointing state shared by the run observer.
struct Checkpointer<'a> {
    pending: VecDeque<usize>,
    test: &'a TestSet,
    function: String,
    seed: u64,
    out: PathBuf,
    run_started: Instant,
    /// Time spent inside checkpoint evaluations, excluded from reported
    /// algorithm time.
    overhead: Duration,
    records_written: usize,
}

impl Checkpointer<'_> {
    /// Emit one record if `n` has reached any pending checkpoints. Several
    /// checkpoints crossed at once collapse into a single measurement —
    /// they would all describe the same emulator.
    fn observe(&mut self, n: usize, partition: &Partition) -> ape_core::Result<()> {
        let mut crossed = false;
        while self.pending.front().is_some_and(|&c| n >= c) {
            self.pending.pop_front();
            crossed = true;
        }
        if !crossed {
            return Ok(());
        }
        let eval_started = Instant::now();
        let time_minutes = (eval_started - self.run_started - self.overhead).as_secs_f64() / 60.0;
        let n_test = self.test.len();
        let mut mean = DVector::zeros(n_test);
        for i in 0..n_test {
            let x: Vec<f64> = self.test.points.row(i).iter().copied().collect();
            mean[i] = partition.predict(&x)?.mean;
        }
        let (rmspe_scaled, mape_scaled) = scale_metrics(&self.test.truth, &mean)?;
        let record = BenchRecord {
            method: "ape".to_string(),
            function: self.function.clone(),
            n,
            rmspe_scaled,
            mape_scaled,
            time_minutes,
            seed: self.seed,
        };
        append_record(&self.out, &record).map_err(|e| {
            ape_core::Error::Malformed(format!("recording checkpoint: {e}"))
        })?;
        self.records_written += 1;
        self.overhead += eval_started.elapsed();
        Ok(())
    }
}

pub fn ape(out: &Path, args: ApeArgs) -> Result<()> {
    let f = lookup(&args.function)?;
    let config = ApeConfig {
        n0: args.n0,
        target_n: args.target_n,
        error_measure: args.error_measure.into(),
        seed: args.seed,
        fit: FitConfig::default(),
        loo_mode: args.loo_mode.into(),
    };
    let test = TestSet::uniform(&f, args.n_test, child_seed(args.seed, stream::TEST_SET))?;

    let mut pending: Vec<usize> = args.checkpoints.clone();
    pending.sort_unstable();
    pending.dedup();

    let stem = format!(
        "{}-n0{}-N{}-seed{}",
        f.name(),
        args.n0,
        args.target_n,
        args.seed
    );
    let trace_path = out.join(format!("trace-{stem}.jsonl"));
    let mut trace_file = BufWriter::new(
        File::create(&trace_path)
            .with_context(|| format!("creating {}", trace_path.display()))?,
    );

    let mut checkpointer = Checkpointer {
        pending: pending.into(),
        test: &test,
        function: f.name().to_string(),
        seed: args.seed,
        out: out.to_path_buf(),
        run_started: Instant::now(),
        overhead: Duration::ZERO,
        records_written: 0,
    };

    let run = run_ape_observed(&f, &config, |event| match event {
        ApeEvent::Initialized { n, partition, .. } => checkpointer.observe(n, partition),
        ApeEvent::Iteration {
            record, partition, ..
        } => {
            // One line per iteration, flushed so an aborted run still
            // leaves every completed iteration on disk.
            serde_json::to_writer(&mut trace_file, record)?;
            trace_file.write_all(b"\n")?;
            trace_file.flush()?;
            checkpointer.observe(record.n, partition)
        }
    })
    .with_context(|| format!("running ape on {} to N={}", f.name(), args.target_n))?;

    let leftover = checkpointer.pending.len();
    let records_written = checkpointer.records_written;

    let partition_path = out.join(format!("partition-{stem}.json"));
    let export = serde_json::json!({
        "regions": run.partition.export(),
        "split_log": run.partition.split_log(),
    });
    serde_json::to_writer_pretty(
        BufWriter::new(File::create(&partition_path)?),
        &export,
    )?;

    let design_path = out.join(format!("design-{stem}.csv"));
    run.design
        .write(&design_path)
        .with_context(|| format!("writing {}", design_path.display()))?;

    println!(
        "ape finished: n={} K={} iterations={} trace={} partition={}",
        run.design.len(),
        run.partition.len(),
        run.trace.len(),
        trace_path.display(),
        partition_path.display()
    );
    if leftover > 0 {
        bail!(
            "{leftover} checkpoint(s) beyond the final design size {} were never reached \
             ({records_written} record(s) written)",
            run.design.len()
        );
    }
    Ok(())
}

/// A benchmark record with log10 companions for log-log plotting.
#[derive(serde::Serialize)]
struct LogRecord<'a> {
    method: &'a str,
    function: &'a str,
    n: usize,
    rmspe_scaled: f64,
    mape_scaled: f64,
    time_minutes: f64,
    seed: u64,
    log10_n: f64,
    log10_rmspe_scaled: f64,
    log10_mape_scaled: f64,
    log10_time_minutes: f64,
}

pub fn report(out: &Path, args: ReportArgs) -> Result<()> {
    let mut records = Vec::new();
    for path in &args.records {
        let mut batch = BenchRecord::read_csv(path)
            .with_context(|| format!("reading {}", path.display()))?;
        records.append(&mut batch);
    }
    records.sort_by(|a, b| {
        (a.method.as_str(), a.function.as_str(), a.n, a.seed).cmp(&(
            b.method.as_str(),
            b.function.as_str(),
            b.n,
            b.seed,
        ))
    });

    let path = args.file.unwrap_or_else(|| out.join("report.csv"));
    let mut w = csv::Writer::from_path(&path)?;
    for r in &records {
        if args.log_log {
            w.serialize(LogRecord {
                method: &r.method,
                function: &r.function,
                n: r.n,
                rmspe_scaled: r.rmspe_scaled,
                mape_scaled: r.mape_scaled,
                time_minutes: r.time_minutes,
                seed: r.seed,
                log10_n: (r.n as f64).log10(),
                log10_rmspe_scaled: r.rmspe_scaled.log10(),
                log10_mape_scaled: r.mape_scaled.log10(),
                log10_time_minutes: r.time_minutes.log10(),
            })?;
        } else {
            w.serialize(r)?;
        }
    }
    w.flush()?;
    println!("wrote {} ({} records)", path.display(), records.len());
    Ok(())
}
