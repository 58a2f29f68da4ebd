use std::fmt::Write as _;

use anyhow::Context;
use gbs_core::density::{kernel_for, logpdf_t};
use gbs_core::elliptic::RngState;
use gbs_core::fit::{fit_kotz_row, fit_mle, FitFamily, FitResult, FitSpec, ProfileTable};
use gbs_core::sample::sample_batch_jittered;
use gbs_core::validate::run_all;
use rayon::prelude::*;
use serde::Serialize;

use crate::data::{emit, read_batch, require_batch_order, to_csv};
use crate::options::Options;
use crate::UsageError;

/// How the penalty and parameter count are computed, stated in every report.
const BIC_NOTE: &str = "BIC* = -2 loglik + n_p (ln(K + 2) - ln 24), K = sample size";
const NP_NOTE: &str = "n_p = 1 (beta) + m(m+1)/2 (Xi), plus 2 (r, q) for Kotz with s fixed";

pub fn density(opts: &Options) -> anyhow::Result<()> {
    let params = opts.params()?;
    let kernel = kernel_for(opts.kernel()?, &params).map_err(|e| UsageError(e.to_string()))?;
    let conv = opts.convention()?;
    let batch = read_batch(opts.data()?)?;
    require_batch_order(&batch, Some(params.m()))?;
    let values = batch
        .matrices()
        .iter()
        .enumerate()
        .map(|(k, t)| logpdf_t(t, &params, &kernel, conv).with_context(|| format!("row {}", k + 1)))
        .collect::<anyhow::Result<Vec<f64>>>()?;
    let mut text = String::from("row,log_density\n");
    for (k, v) in values.iter().enumerate() {
        let _ = writeln!(text, "{},{v:.16e}", k + 1);
    }
    #[derive(Serialize)]
    struct Row {
        row: usize,
        log_density: f64,
    }
    emit(opts.out.as_deref(), &text, || {
        let rows: Vec<Row> = values
            .iter()
            .enumerate()
            .map(|(k, &log_density)| Row {
                row: k + 1,
                log_density,
            })
            .collect();
        Ok(serde_json::to_string_pretty(&rows)?)
    })
}

pub fn sample(opts: &Options) -> anyhow::Result<()> {
    let params = opts.params()?;
    let kernel = kernel_for(opts.kernel()?, &params).map_err(|e| UsageError(e.to_string()))?;
    let seed = opts.seed()?;
    let count = opts.count.ok_or_else(|| UsageError("sample needs --count".into()))?;
    if count == 0 {
        return Err(UsageError("--count must be at least 1".into()).into());
    }
    let batch = sample_batch_jittered(&params, &kernel, count, &mut RngState::from_seed(seed), opts.jitter)?;
    emit(opts.out.as_deref(), &to_csv(&batch)?, || {
        Ok(serde_json::to_string_pretty(&batch)?)
    })
}

#[derive(Serialize)]
struct FitReport<'a> {
    fit: &'a FitResult,
    bic_star: &'static str,
    n_p: &'static str,
}

fn fit_text(fit: &FitResult) -> String {
    let mut out = String::new();
    let est = &fit.estimates;
    let _ = writeln!(out, "family       {}", fit.family.name());
    if let FitFamily::Kotz { s } = fit.family {
        let _ = writeln!(out, "s (fixed)    {s}");
    }
    let _ = writeln!(out, "n            {}", fit.n);
    let _ = writeln!(out, "sample size  {}", fit.sample_size);
    let _ = writeln!(
        out,
        "convention   {}",
        serde_json::to_value(fit.convention)
            .unwrap_or_default()
            .as_str()
            .unwrap_or("?")
    );
    let _ = writeln!(out, "beta         {:.10}", est.beta);
    let upper: Vec<String> = est.xi.upper().iter().map(|x| format!("{x:.10}")).collect();
    let _ = writeln!(out, "xi (upper)   {}", upper.join(" "));
    if let Some((r, q)) = est.kotz_rq() {
        let _ = writeln!(out, "r            {r:.10}");
        let _ = writeln!(out, "q            {q:.10}");
    }
    let _ = writeln!(out, "loglik       {:.10}", fit.loglik_max);
    let _ = writeln!(out, "n_p          {}", fit.n_p);
    let _ = writeln!(out, "BIC*         {:.10}", fit.bic_star);
    let _ = writeln!(
        out,
        "converged    {} ({} iterations, {} evaluations, best start {})",
        fit.converged, fit.iterations, fit.evaluations, fit.best_start
    );
    let _ = writeln!(out, "seed         {}", fit.seed);
    let _ = writeln!(out, "\n{BIC_NOTE}\n{NP_NOTE}");
    out
}

pub fn fit(opts: &Options) -> anyhow::Result<()> {
    let batch = read_batch(opts.data()?)?;
    require_batch_order(&batch, opts.m)?;
    let spec = FitSpec::new(opts.fit_family()?, opts.n()?).with_options(opts.fit_options()?);
    let fit = fit_mle(&batch, &spec)?;
    emit(opts.out.as_deref(), &fit_text(&fit), || {
        Ok(serde_json::to_string_pretty(&FitReport {
            fit: &fit,
            bic_star: BIC_NOTE,
            n_p: NP_NOTE,
        })?)
    })
}

#[derive(Serialize)]
struct CompareReport<'a> {
    table: &'a ProfileTable,
    bic_star: &'static str,
    n_p: &'static str,
    diff: &'static str,
}

pub fn compare(opts: &Options) -> anyhow::Result<()> {
    let batch = read_batch(opts.data()?)?;
    require_batch_order(&batch, opts.m)?;
    let n = opts.n()?;
    let grid = opts.s_grid()?;
    let options = opts.fit_options()?;
    let baseline = fit_mle(&batch, &FitSpec::new(FitFamily::Gaussian, n).with_options(options))?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(opts.jobs()?).build()?;
    let fits = pool.install(|| {
        grid.par_iter()
            .map(|&s| fit_kotz_row(&batch, s, n, options, &baseline).map(|f| (s, f)))
            .collect::<gbs_core::Result<Vec<_>>>()
    })?;
    let table = ProfileTable::from_fits(baseline, fits)?;
    let mut text = table.to_text();
    let _ = writeln!(text, "{NP_NOTE}");
    emit(opts.out.as_deref(), &text, || {
        Ok(serde_json::to_string_pretty(&CompareReport {
            table: &table,
            bic_star: BIC_NOTE,
            n_p: NP_NOTE,
            diff: "diff = BIC*_K - BIC*_G; grade from |diff|; the smaller BIC* is favoured",
        })?)
    })
}

/// Returns whether every check passed.
pub fn validate(opts: &Options) -> anyhow::Result<bool> {
    let report = run_all(opts.seed.unwrap_or(0));
    emit(opts.out.as_deref(), &report.to_text(), || {
        Ok(serde_json::to_string_pretty(&report)?)
    })?;
    Ok(report.passed())
}
