use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use fdrl_core::aggregate::aggregate;
use fdrl_core::fdr::{reject, threshold, Estimator};
use fdrl_core::grid::{build_neighborhoods, NeighborhoodSpec};
use fdrl_core::io::{read_lattice, read_mask};
use fdrl_core::lip::{alpha_inf_numeric, format_table, lip_report_exponential, DistModel, GridSpec, LipReport};
use fdrl_core::pipeline::{estimate_null, run_conventional, run_local_on_pstar, LocalConfig, NullMethod};
use fdrl_core::sim::{generate, metrics, pvalues_one_sided, MetricsReport};
use fdrl_core::{Error, Result};

use crate::args::*;
use crate::output::Outputs;

pub fn run(command: &Command) -> Result<()> {
    match command {
        Command::Simulate(a) => simulate(a, command),
        Command::Pvalues(a) => pvalues(a, command),
        Command::Aggregate(a) => aggregate_cmd(a, command),
        Command::Fdr(a) => fdr(a, command),
        Command::Fdrl(a) => fdrl(a, command),
        Command::AlphaInf(a) => alpha_inf(a, command),
        Command::Score(a) => score(a, command),
        Command::Sweep(a) => sweep(a, command),
    }
}

fn check_level(name: &str, value: f64, open: bool) -> Result<()> {
    let ok = if open {
        value > 0.0 && value < 1.0
    } else {
        (0.0..=1.0).contains(&value)
    };
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} = {value} is out of range")))
    }
}

fn simulate(a: &SimulateArgs, command: &Command) -> Result<()> {
    let scenario = a.scenario.scenario();
    let (y, truth) = generate(&scenario, a.seed)?;
    let mut out = Outputs::new(&a.out.out_dir)?;
    out.lattice("y.bin", &y)?;
    out.mask_with_images("truth", &truth)?;
    out.json("scenario.json", &scenario)?;
    out.manifest("simulate", command)
}

fn pvalues(a: &PvaluesArgs, command: &Command) -> Result<()> {
    let model = a.null_model();
    model.validate()?;
    let y = read_lattice(&a.input)?;
    let mut out = Outputs::new(&a.out.out_dir)?;
    out.lattice(&a.output, &pvalues_one_sided(&y, &model))?;
    out.manifest("pvalues", command)
}

fn aggregate_cmd(a: &AggregateArgs, command: &Command) -> Result<()> {
    let p = read_lattice(&a.input)?;
    let nbrs = build_neighborhoods(p.dims(), a.neighborhood.spec(p.dims().len())?)?;
    let pstar = aggregate(&p, &nbrs, a.neighborhood.filter())?;
    let mut out = Outputs::new(&a.out.out_dir)?;
    out.lattice(&a.output, &pstar)?;
    out.manifest("aggregate", command)
}

fn fdr(a: &FdrArgs, command: &Command) -> Result<()> {
    let p = read_lattice(&a.input)?;
    let (curve, mask) = run_conventional(&p, a.levels.alpha, a.levels.lambda)?;
    let mut out = Outputs::new(&a.out.out_dir)?;
    out.text(format!("{}_curve.csv", a.prefix), &curve.to_csv())?;
    out.json(format!("{}_summary.json", a.prefix), &curve.summary())?;
    out.mask_with_images(&format!("{}_mask", a.prefix), &mask)?;
    out.manifest(&a.prefix, command)
}

#[derive(Serialize)]
struct LocalSummary {
    alpha: f64,
    lambda: f64,
    t_alpha: f64,
    rejections: usize,
    method: NullMethod,
    neighborhood: NeighborhoodSpec,
    neighborhood_size: usize,
    null_at_lambda: f64,
    n0_hat: Option<f64>,
    fell_back: Option<bool>,
}

fn local_config(
    levels: (f64, f64),
    nb: &NeighborhoodArgs,
    ndim: usize,
    method: NullMethod,
    n0_lambda: Option<f64>,
    seed: u64,
    repetitions: usize,
) -> Result<LocalConfig> {
    Ok(LocalConfig {
        alpha: levels.0,
        lambda: levels.1,
        n0_lambda,
        neighborhood: Some(nb.spec(ndim)?),
        filter: nb.filter(),
        method,
        seed,
        repetitions,
    })
}

fn fdrl(a: &FdrlArgs, command: &Command) -> Result<()> {
    let pstar = read_lattice(&a.input)?;
    let raw = a.raw.as_deref().map(read_lattice).transpose()?;
    let cfg = local_config(
        (a.levels.alpha, a.levels.lambda),
        &a.neighborhood,
        pstar.dims().len(),
        a.method,
        a.n0_lambda,
        a.seed,
        a.repetitions,
    )?;
    let spec = cfg.neighborhood_for(pstar.dims());
    let k = cfg.table_for(pstar.dims())?.full_size();
    let outcome = run_local_on_pstar(pstar, raw.as_ref(), &cfg)?;
    let summary = LocalSummary {
        alpha: outcome.curve.alpha,
        lambda: outcome.curve.lambda,
        t_alpha: outcome.curve.t_alpha,
        rejections: outcome.curve.rejections,
        method: cfg.method,
        neighborhood: spec,
        neighborhood_size: k,
        null_at_lambda: outcome.null.eval(cfg.lambda),
        n0_hat: outcome.fit.as_ref().map(|f| f.n0_hat),
        fell_back: outcome.fit.as_ref().map(|f| f.fell_back),
    };
    let mut out = Outputs::new(&a.out.out_dir)?;
    out.text(format!("{}_curve.csv", a.prefix), &outcome.curve.to_csv())?;
    out.json(format!("{}_summary.json", a.prefix), &summary)?;
    out.json(format!("{}_null.json", a.prefix), &outcome.null)?;
    out.mask_with_images(&format!("{}_mask", a.prefix), &outcome.mask)?;
    out.manifest(&a.prefix, command)
}

fn shift_label(c: f64) -> String {
    let e = c.exp();
    if (e - e.round()).abs() < 1e-9 * e.max(1.0) {
        format!("log({})", e.round())
    } else {
        format!("{c:.4}")
    }
}

fn alpha_inf(a: &AlphaInfArgs, command: &Command) -> Result<()> {
    let grid = GridSpec {
        t_min: a.t_min,
        points: a.points,
    };
    let reports: Vec<LipReport> = a
        .c
        .iter()
        .map(|&c| {
            let model = a.model(c);
            match model {
                DistModel::ExponentialShift { .. } if !a.numeric && a.k == 5 => {
                    lip_report_exponential(c, a.lambda, a.pi0)
                }
                _ => alpha_inf_numeric(&model, a.lambda, a.pi0, a.k, grid),
            }
        })
        .collect::<Result<_>>()?;
    let columns: Vec<(String, &LipReport)> = a.c.iter().map(|&c| shift_label(c)).zip(reports.iter()).collect();
    let table = format_table(&columns);
    let json = serde_json::to_string_pretty(&reports)?;

    let mut out = Outputs::new(&a.out.out_dir)?;
    out.text("alpha_inf.json", &format!("{json}\n"))?;
    out.text("alpha_inf_table.txt", &table)?;
    out.manifest("alpha-inf", command)?;
    if a.table {
        print!("{table}");
    } else {
        println!("{json}");
    }
    Ok(())
}

fn score(a: &ScoreArgs, command: &Command) -> Result<()> {
    let report = metrics(&read_mask(&a.mask)?, &read_mask(&a.truth)?)?;
    let mut out = Outputs::new(&a.out.out_dir)?;
    out.json("score.json", &report)?;
    out.manifest("score", command)?;
    println!("{}", serde_json::to_string(&report)?);
    Ok(())
}

struct SweepRow {
    replicate: usize,
    seed: u64,
    procedure: &'static str,
    method: Option<NullMethod>,
    lambda: f64,
    alpha: f64,
    t_alpha: f64,
    metrics: MetricsReport,
    mask: Option<fdrl_core::grid::RejectionMask>,
}

impl SweepRow {
    fn label(&self) -> String {
        match self.method {
            Some(m) => format!("{}_m{m}", self.procedure),
            None => self.procedure.to_string(),
        }
    }
}

fn sweep(a: &SweepArgs, command: &Command) -> Result<()> {
    if a.reps == 0 {
        return Err(Error::InvalidParameter("reps must be at least 1".into()));
    }
    for &alpha in &a.alphas {
        check_level("alpha", alpha, false)?;
    }
    for &lambda in &a.lambdas {
        check_level("lambda", lambda, true)?;
    }
    let scenario = a.scenario.scenario();
    scenario.validate()?;
    let null_model = scenario.noise.null_model();
    let spec = a.neighborhood.spec(2)?;
    let nbrs = build_neighborhoods(&scenario.dims, spec)?;

    let per_rep: Vec<Vec<SweepRow>> = (0..a.reps)
        .into_par_iter()
        .map(|r| -> Result<Vec<SweepRow>> {
            let seed = a.seed + r as u64;
            let (y, truth) = generate(&scenario, seed)?;
            let p = pvalues_one_sided(&y, &null_model);
            let pstar = aggregate(&p, &nbrs, a.neighborhood.filter())?;
            let mut rows = Vec::new();
            let mut push = |procedure, method, lambda, alpha, t_alpha, field: &fdrl_core::grid::Lattice| -> Result<()> {
                let mask = reject(field, t_alpha);
                rows.push(SweepRow {
                    replicate: r,
                    seed,
                    procedure,
                    method,
                    lambda,
                    alpha,
                    t_alpha,
                    metrics: metrics(&mask, &truth)?,
                    mask: a.save_masks.then_some(mask),
                });
                Ok(())
            };
            for &lambda in &a.lambdas {
                let curve = threshold(&p, lambda, a.alphas[0], Estimator::Conventional)?;
                for &alpha in &a.alphas {
                    push("fdr", None, lambda, alpha, curve.t_alpha_at(alpha), &p)?;
                }
                for &method in &a.methods {
                    let cfg = local_config(
                        (a.alphas[0], lambda),
                        &a.neighborhood,
                        2,
                        method,
                        a.n0_lambda,
                        seed,
                        a.repetitions,
                    )?;
                    let (null, _) = estimate_null(Some(&p), &pstar, &nbrs, &cfg)?;
                    let curve = threshold(&pstar, lambda, a.alphas[0], Estimator::Local(&null))?;
                    for &alpha in &a.alphas {
                        push("fdrl", Some(method), lambda, alpha, curve.t_alpha_at(alpha), &pstar)?;
                    }
                }
            }
            Ok(rows)
        })
        .collect::<Result<_>>()?;
    let rows: Vec<SweepRow> = per_rep.into_iter().flatten().collect();

    let mut csv = format!(
        "replicate,seed,procedure,method,lambda,alpha,t_alpha,{}\n",
        MetricsReport::CSV_HEADER
    );
    let mut means: BTreeMap<(String, String, String), (usize, f64, f64, f64)> = BTreeMap::new();
    for row in &rows {
        let method = row.method.map_or_else(|| "NA".to_string(), |m| m.to_string());
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{}",
            row.replicate,
            row.seed,
            row.procedure,
            method,
            row.lambda,
            row.alpha,
            row.t_alpha,
            row.metrics.csv_fields()
        );
        let key = (row.label(), row.lambda.to_string(), row.alpha.to_string());
        let entry = means.entry(key).or_insert((0, 0.0, 0.0, 0.0));
        entry.0 += 1;
        entry.1 += row.metrics.sensitivity.unwrap_or(f64::NAN);
        entry.2 += row.metrics.specificity.unwrap_or(f64::NAN);
        entry.3 += row.metrics.fdp;
    }
    let mut summary = String::from("procedure,lambda,alpha,replicates,mean_sensitivity,mean_specificity,mean_fdp\n");
    for ((label, lambda, alpha), (n, sens, spec, fdp)) in &means {
        let n_f = *n as f64;
        let _ = writeln!(
            summary,
            "{label},{lambda},{alpha},{n},{},{},{}",
            sens / n_f,
            spec / n_f,
            fdp / n_f
        );
    }

    let mut out = Outputs::new(&a.out.out_dir)?;
    out.text("metrics.csv", &csv)?;
    out.text("summary.csv", &summary)?;
    out.json("scenario.json", &scenario)?;
    for row in &rows {
        if let Some(mask) = &row.mask {
            let name = format!(
                "masks/rep{:04}_{}_l{}_a{}.bin",
                row.replicate,
                row.label(),
                row.lambda,
                row.alpha
            );
            out.mask(name, mask)?;
        }
    }
    out.manifest("sweep", command)
}
