//! One function per subcommand. Each writes its CSV files under the output
//! directory and prints a short report.

use std::path::PathBuf;

use mcusum::model::{SensorModel, Subset};
use mcusum::montecarlo::{
    calibrate_threshold, estimate_arl, estimate_worst_delay, performance_sweep, CalibrationConfig, PerformanceCurve,
    RunConfig, SweepConfig, SweepDetector,
};
use mcusum::renewal::{
    gaussian_constants, loss_constants, multichart_design, proportional_delay_ratios, relative_loss_figure,
    RenewalConstants,
};

use crate::config::{ExperimentConfig, SweepSection};
use crate::report::{fmt_g, opt, Table};
use crate::CliError;

fn missing(section: &str) -> CliError {
    CliError::Validation(format!("config has no [{section}] section"))
}

fn rt(e: mcusum::Error) -> CliError {
    CliError::Runtime(e.into())
}

pub struct Context<'a> {
    pub config: &'a ExperimentConfig,
    pub model: &'a dyn SensorModel,
    pub workers: usize,
}

impl Context<'_> {
    fn path(&self, name: &str) -> PathBuf {
        self.config.output.dir.join(name)
    }
}

pub fn table1(cx: &Context) -> Result<Vec<PathBuf>, CliError> {
    let t = cx.config.table1.as_ref().ok_or_else(|| missing("table1"))?;
    let seed = cx.config.seed;
    let mut out = Table::create(
        &cx.path("table1.csv"),
        &[
            "rule",
            "affected",
            "b",
            "arl",
            "arl_se",
            "arl_runs",
            "arl_censored",
            "delay",
            "delay_se",
            "delay_runs",
            "delay_censored",
        ],
    )?;
    println!("{:<28} {:>3} {:>7} {:>10} {:>8} {:>9} {:>7}", "rule", "|A|", "b", "ARL", "SE", "delay", "SE");
    for row in &t.rows {
        let rule = row.detector.build(cx.model, row.threshold).map_err(rt)?;
        let a = Subset::first(row.affected).map_err(rt)?;
        let delay_cfg = RunConfig::new(t.delay_runs, t.delay_horizon, seed).workers(cx.workers);
        let delay = estimate_worst_delay(rule.as_ref(), cx.model, a, &delay_cfg).map_err(rt)?;
        let arl = if t.arl_runs > 0 {
            let cfg = RunConfig::new(t.arl_runs, t.arl_horizon, seed).workers(cx.workers);
            Some(estimate_arl(rule.as_ref(), cx.model, &cfg).map_err(rt)?)
        } else {
            None
        };
        let label = row.label.clone().unwrap_or_else(|| row.detector.label());
        out.row([
            label.clone(),
            row.affected.to_string(),
            fmt_g(row.threshold),
            opt(arl.as_ref().map(|r| r.mean)),
            opt(arl.as_ref().map(|r| r.standard_error)),
            arl.as_ref().map(|r| r.n_runs.to_string()).unwrap_or_default(),
            arl.as_ref().map(|r| r.n_censored.to_string()).unwrap_or_default(),
            fmt_g(delay.mean),
            fmt_g(delay.standard_error),
            delay.n_runs.to_string(),
            delay.n_censored.to_string(),
        ])?;
        println!(
            "{:<28} {:>3} {:>7} {:>10} {:>8} {:>9} {:>7}",
            label,
            row.affected,
            fmt_g(row.threshold),
            arl.as_ref().map_or("-".into(), |r| fmt_g(r.mean)),
            arl.as_ref().map_or("-".into(), |r| fmt_g(r.standard_error)),
            fmt_g(delay.mean),
            fmt_g(delay.standard_error),
        );
    }
    Ok(vec![out.finish()?])
}

pub fn calibrate(cx: &Context) -> Result<Vec<PathBuf>, CliError> {
    let c = cx.config.calibrate.as_ref().ok_or_else(|| missing("calibrate"))?;
    let k = cx.model.sensors();
    let mut out = Table::create(
        &cx.path("calibrate.csv"),
        &[
            "detector",
            "gamma",
            "threshold",
            "arl",
            "arl_se",
            "runs",
            "censored",
            "iterations",
            "confirmed",
            "within_tolerance",
        ],
    )?;
    let mut failures = Vec::new();
    for d in &c.detectors {
        let rule = d.detector.build(cx.model, 1.0).map_err(rt)?;
        let mut cal = CalibrationConfig::new(c.gamma, c.runs, cx.config.seed);
        cal.rel_tol = c.rel_tol;
        cal.horizon = c.horizon;
        cal.workers = cx.workers;
        let log_size = d.detector.log_class_size(k).map_err(rt)?;
        let r = calibrate_threshold(rule.as_ref(), cx.model, log_size, &cal).map_err(rt)?;
        let ok = r.within_tolerance(c.rel_tol) && !r.achieved_arl.flagged;
        let label = d.label();
        out.row([
            label.clone(),
            fmt_g(c.gamma),
            fmt_g(r.threshold),
            fmt_g(r.achieved_arl.mean),
            fmt_g(r.achieved_arl.standard_error),
            r.achieved_arl.n_runs.to_string(),
            r.achieved_arl.n_censored.to_string(),
            r.iterations.to_string(),
            r.confirmed.to_string(),
            ok.to_string(),
        ])?;
        println!(
            "{label}: b = {} gives ARL {} ± {} (target {}, {} runs, {} censored)",
            fmt_g(r.threshold),
            fmt_g(r.achieved_arl.mean),
            fmt_g(r.achieved_arl.standard_error),
            fmt_g(c.gamma),
            r.achieved_arl.n_runs,
            r.achieved_arl.n_censored,
        );
        if !ok {
            failures.push(label);
        }
    }
    let path = out.finish()?;
    if !failures.is_empty() {
        return Err(CliError::Runtime(anyhow::anyhow!(
            "calibration missed the target within tolerance for: {}",
            failures.join(", ")
        )));
    }
    Ok(vec![path])
}

fn run_sweep(cx: &Context, s: &SweepSection) -> Result<Vec<PerformanceCurve>, CliError> {
    let k = cx.model.sensors();
    let detectors = s
        .detectors
        .iter()
        .map(|d| {
            Ok(SweepDetector {
                label: d.label(),
                rule: d.detector.build(cx.model, 1.0)?,
                log_class_size: d.detector.log_class_size(k)?,
            })
        })
        .collect::<mcusum::Result<Vec<_>>>()
        .map_err(rt)?;
    let scenarios = s.affected.iter().map(|&a| Subset::first(a)).collect::<mcusum::Result<Vec<_>>>().map_err(rt)?;
    let mut cfg = SweepConfig::new(s.gammas.clone(), s.calibration_runs, s.delay_runs, cx.config.seed);
    cfg.rel_tol = s.rel_tol;
    cfg.delay_horizon = s.delay_horizon;
    cfg.workers = cx.workers;
    performance_sweep(&detectors, cx.model, &scenarios, &cfg).map_err(rt)
}

pub fn sweep(cx: &Context) -> Result<Vec<PathBuf>, CliError> {
    let s = cx.config.sweep.as_ref().ok_or_else(|| missing("sweep"))?;
    let curves = run_sweep(cx, s)?;
    let mut out = Table::create(
        &cx.path("sweep.csv"),
        &[
            "detector",
            "affected",
            "gamma",
            "threshold",
            "arl",
            "arl_se",
            "delay",
            "delay_se",
            "oracle_threshold",
            "oracle_delay",
            "oracle_delay_se",
            "difference",
            "difference_se",
            "ratio",
            "ratio_se",
        ],
    )?;
    for c in &curves {
        for p in &c.points {
            out.row([
                c.detector.clone(),
                c.affected.len().to_string(),
                fmt_g(p.gamma),
                fmt_g(p.threshold),
                fmt_g(p.arl.mean),
                fmt_g(p.arl.standard_error),
                fmt_g(p.delay.mean),
                fmt_g(p.delay.standard_error),
                fmt_g(p.oracle_threshold),
                fmt_g(p.oracle_delay.mean),
                fmt_g(p.oracle_delay.standard_error),
                fmt_g(p.delay_minus_oracle),
                fmt_g(p.delay_minus_oracle_se),
                fmt_g(p.delay_over_oracle),
                fmt_g(p.delay_over_oracle_se),
            ])?;
        }
        let diffs: Vec<String> = c.points.iter().map(|p| fmt_g(p.delay_minus_oracle)).collect();
        println!("{} |A|={}: difference over gamma = [{}]", c.detector, c.affected.len(), diffs.join(", "));
    }
    Ok(vec![out.finish()?])
}

pub fn constants(cx: &Context) -> Result<Vec<PathBuf>, CliError> {
    let c = cx.config.constants.as_ref().ok_or_else(|| missing("constants"))?;
    let mut out = Table::create(&cx.path("constants.csv"), &["theta", "rho", "beta", "delta", "info", "info_delta2"])?;
    for &theta in &c.thetas {
        let k = RenewalConstants::gaussian(theta).map_err(rt)?;
        out.row([fmt_g(theta), fmt_g(k.rho), fmt_g(k.beta), fmt_g(k.delta), fmt_g(k.info()), fmt_g(k.info_delta2())])?;
        println!(
            "theta = {}: rho = {}, beta = {}, delta = {}",
            fmt_g(theta),
            fmt_g(k.rho),
            fmt_g(k.beta),
            fmt_g(k.delta)
        );
    }
    let mut paths = vec![out.finish()?];
    if let (Some(gamma), Some(thetas)) = (c.gamma, cx.config.model_thetas()) {
        let consts = gaussian_constants(thetas).map_err(rt)?;
        let mut out =
            Table::create(&cx.path("designs.csv"), &["spec", "sensor", "theta", "p", "threshold", "loss_constant"])?;
        for &spec in &c.specs {
            let d = multichart_design(&consts, spec, gamma).map_err(rt)?;
            let losses = d.weights.as_ref().map(|p| loss_constants(&consts, p));
            for (i, (&b, &theta)) in d.thresholds.iter().zip(thetas).enumerate() {
                out.row([
                    spec.name().to_string(),
                    (i + 1).to_string(),
                    fmt_g(theta),
                    opt(d.weights.as_ref().map(|p| p[i])),
                    fmt_g(b),
                    opt(losses.as_ref().map(|l| l[i])),
                ])?;
            }
        }
        paths.push(out.finish()?);
    }
    Ok(paths)
}

pub fn figures(cx: &Context) -> Result<Vec<PathBuf>, CliError> {
    let f = cx.config.figure1.as_ref();
    let s = cx.config.sweep.as_ref();
    if f.is_none() && s.is_none() {
        return Err(CliError::Validation("figures needs a [figure1] or [sweep] section".into()));
    }
    let mut paths = Vec::new();
    if let Some(f) = f {
        let points = relative_loss_figure(f.theta1, &f.grid(), &f.specs, f.gamma).map_err(rt)?;
        let mut out = Table::create(&cx.path("figure1.csv"), &["spec", "theta2", "loss1", "loss2", "c1", "c2"])?;
        for p in &points {
            let consts = gaussian_constants(&[f.theta1, p.theta2]).map_err(rt)?;
            let w = p.spec.weights(&consts).expect("weighted spec");
            let c = loss_constants(&consts, &w);
            out.row([
                p.spec.name().to_string(),
                fmt_g(p.theta2),
                fmt_g(p.loss1),
                fmt_g(p.loss2),
                fmt_g(c[0]),
                fmt_g(c[1]),
            ])?;
        }
        paths.push(out.finish()?);

        let consts = gaussian_constants(&[f.theta1, f.ratio_theta2]).map_err(rt)?;
        let mut out = Table::create(&cx.path("figure1_ratios.csv"), &["gamma", "ratio1", "ratio2"])?;
        for &g in &f.ratio_gammas {
            let r = proportional_delay_ratios(&consts, g).map_err(rt)?;
            out.row([fmt_g(g), fmt_g(r[0]), fmt_g(r[1])])?;
        }
        paths.push(out.finish()?);
        println!("figure1: {} curve points over {} specs", points.len(), f.specs.len());
    }
    if let Some(s) = s {
        let curves = run_sweep(cx, s)?;
        for &a in &s.affected {
            for (name, pick) in [("difference", 0usize), ("ratio", 1)] {
                let mut out = Table::create(
                    &cx.path(&format!("figure_a{a}_{name}.csv")),
                    &["detector", "arl", "arl_se", name, "se"],
                )?;
                for c in curves.iter().filter(|c| c.affected.len() == a) {
                    for p in &c.points {
                        let (y, se) = if pick == 0 {
                            (p.delay_minus_oracle, p.delay_minus_oracle_se)
                        } else {
                            (p.delay_over_oracle, p.delay_over_oracle_se)
                        };
                        out.row([
                            c.detector.clone(),
                            fmt_g(p.arl.mean),
                            fmt_g(p.arl.standard_error),
                            fmt_g(y),
                            fmt_g(se),
                        ])?;
                    }
                }
                paths.push(out.finish()?);
            }
        }
        println!("sweep figures: {} curves", curves.len());
    }
    Ok(paths)
}
