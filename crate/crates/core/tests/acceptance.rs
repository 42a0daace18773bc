//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::Rng;
use statrs::distribution::{Beta, ContinuousCDF};

use fdrl_core::aggregate::{aggregate, FilterKind};
use fdrl_core::fdr::{fdr_hat, fdrl_hat, reject, threshold, Estimator};
use fdrl_core::grid::{build_neighborhoods, BorderPolicy, Lattice, Mask, NeighborhoodShape, NeighborhoodSpec};
use fdrl_core::lip::{
    alpha_inf_exponential, alpha_inf_numeric, lip_report_exponential, DistModel, GridSpec, LipReport, Procedure,
};
use fdrl_core::nulldist::{
    beta_median_cdf, method1_ghat, method2_ghat, monte_carlo_median_null, sup_distance, true_null_ecdf, NullCdf,
};
use fdrl_core::pipeline::{run_conventional, run_local, LocalConfig};
use fdrl_core::rng::stream;
use fdrl_core::sim::{generate, metrics, pvalues_one_sided, MetricsReport, Scenario};

const LAMBDA: f64 = 0.1;
const PI0: f64 = 0.84;
const TABLE_SHIFTS: [f64; 8] = [8.0, 12.0, 16.0, 20.0, 24.0, 28.0, 32.0, 36.0];
const TABLE_FDR: [f64; 8] = [0.4130, 0.3043, 0.2471, 0.2079, 0.1795, 0.1579, 0.1409, 0.1273];
const TABLE_FDRL: [f64; 8] = [0.0103, 0.0030, 0.0013, 0.0007, 0.0004, 0.0002, 0.0002, 0.0001];

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn timed(budget: Duration, body: impl FnOnce() -> Verdict) -> Verdict {
    let start = Instant::now();
    let mut v = body();
    let elapsed = start.elapsed();
    v.detail = format!("{}; {:.2}s (budget {}s)", v.detail, elapsed.as_secs_f64(), budget.as_secs());
    v.pass &= elapsed < budget;
    v
}

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

fn table_reproduction() -> Verdict {
    const TOL: f64 = 5e-5;
    timed(secs(1), || {
        let mut worst: f64 = 0.0;
        for (i, n) in TABLE_SHIFTS.iter().enumerate() {
            let r = lip_report_exponential(n.ln(), LAMBDA, PI0).unwrap();
            worst = worst
                .max((r.alpha_inf_fdr - TABLE_FDR[i]).abs())
                .max((r.alpha_inf_fdrl - TABLE_FDRL[i]).abs());
        }
        verdict(worst <= TOL, format!("max |error| {worst:.2e} over 16 entries (tol {TOL:e})"))
    })
}

fn analytic_numeric_agreement() -> Verdict {
    const TOL: f64 = 1e-3;
    timed(secs(10), || {
        let mut worst: f64 = 0.0;
        for n in TABLE_SHIFTS {
            let c = n.ln();
            let numeric = alpha_inf_numeric(
                &DistModel::ExponentialShift { c },
                LAMBDA,
                PI0,
                5,
                GridSpec::default(),
            )
            .unwrap();
            let fdr = alpha_inf_exponential(c, LAMBDA, PI0, Procedure::Fdr).unwrap();
            let fdrl = alpha_inf_exponential(c, LAMBDA, PI0, Procedure::FdrlK5).unwrap();
            worst = worst
                .max((numeric.alpha_inf_fdr - fdr).abs())
                .max((numeric.alpha_inf_fdrl - fdrl).abs());
        }
        verdict(worst < TOL, format!("max |numeric - closed form| {worst:.2e} (tol {TOL:e})"))
    })
}

fn lip_demonstration() -> Verdict {
    const SEEDS: std::ops::RangeInclusive<u64> = 1..=10;
    const REQUIRED: usize = 9;
    timed(secs(30), || {
        let scenario = Scenario::exponential(8f64.ln());
        let null = DistModel::ExponentialShift { c: 1.0 };
        let mut passed = 0;
        let mut notes = Vec::new();
        for seed in SEEDS {
            let (y, _) = generate(&scenario, seed).unwrap();
            let p = pvalues_one_sided(&y, &null);
            let positive = p.values().iter().all(|&x| x > 0.0);
            let fdr_low = run_conventional(&p, 0.05, LAMBDA).unwrap().1.count();
            let fdr_high = run_conventional(&p, 0.45, LAMBDA).unwrap().1.count();
            let cfg = LocalConfig {
                alpha: 0.05,
                lambda: LAMBDA,
                ..LocalConfig::default()
            };
            let local = run_local(&p, &cfg).unwrap().mask.count();
            let ok = positive && fdr_low == 0 && local >= 1 && fdr_high >= 1;
            passed += ok as usize;
            notes.push(format!("s{seed}:{fdr_low}/{local}/{fdr_high}"));
        }
        verdict(
            passed >= REQUIRED,
            format!(
                "{passed}/10 seeds (need {REQUIRED}); rejections FDR@0.05/FDR_L@0.05/FDR@0.45 {}",
                notes.join(" ")
            ),
        )
    })
}

fn single_site_equivalence() -> Verdict {
    const LATTICES: usize = 100;
    const ALPHAS: [f64; 3] = [0.01, 0.05, 0.1];
    let mut rng = stream(2024, 7);
    let spec = NeighborhoodSpec::new(NeighborhoodShape::Knn(1), BorderPolicy::Truncate);
    let mut mismatches = 0;
    let mut evaluations = 0;
    for _ in 0..LATTICES {
        let dims = vec![rng.random_range(3..25), rng.random_range(3..25)];
        let signal: f64 = rng.random_range(0.0..0.3);
        let p = Lattice::from_fn(dims, |_| {
            let u: f64 = rng.random();
            if rng.random::<f64>() < signal {
                u.powi(6)
            } else {
                u
            }
        })
        .unwrap();
        let table = build_neighborhoods(p.dims(), spec).unwrap();
        let pstar = aggregate(&p, &table, FilterKind::Median).unwrap();
        let mut candidates = p.values().to_vec();
        candidates.push(1.0);
        for &t in &candidates {
            let a = fdr_hat(&p, LAMBDA, t).unwrap();
            let b = fdrl_hat(&pstar, LAMBDA, t, &NullCdf::Uniform).unwrap();
            evaluations += 1;
            mismatches += (a.to_bits() != b.to_bits()) as usize;
        }
        for alpha in ALPHAS {
            let conventional = threshold(&p, LAMBDA, alpha, Estimator::Conventional).unwrap();
            let local = threshold(&pstar, LAMBDA, alpha, Estimator::Local(&NullCdf::Uniform)).unwrap();
            if reject(&p, conventional.t_alpha) != reject(&pstar, local.t_alpha) {
                mismatches += 1;
            }
        }
    }
    verdict(
        mismatches == 0,
        format!("{mismatches} mismatches over {evaluations} thresholds and {} masks", LATTICES * 3),
    )
}

fn null_law_check() -> Verdict {
    const DRAWS: usize = 1_000_000;
    const TOL: f64 = 0.002;
    timed(secs(10), || {
        let sample = monte_carlo_median_null(5, DRAWS, 99).unwrap().knots();
        let beta = Beta::new(3.0, 3.0).unwrap();
        let n = sample.len() as f64;
        let ks = sample.iter().enumerate().fold(0.0f64, |d, (i, &x)| {
            let f = beta.cdf(x);
            d.max((i + 1) as f64 / n - f).max(f - i as f64 / n)
        });
        verdict(ks < TOL, format!("KS distance {ks:.5} over {DRAWS} draws (tol {TOL})"))
    })
}

fn symmetric_estimator_consistency() -> Verdict {
    const TOL: f64 = 0.01;
    let mut rng = stream(31, 7);
    let p = Lattice::from_fn(vec![500, 500], |_| rng.random()).unwrap();
    let spec = NeighborhoodSpec::new(NeighborhoodShape::Cross2d5, BorderPolicy::Mirror);
    let table = build_neighborhoods(p.dims(), spec).unwrap();
    let pstar = aggregate(&p, &table, FilterKind::Median).unwrap();
    let ghat = method1_ghat(&pstar).unwrap();
    let d = sup_distance(&ghat, &NullCdf::beta(5).unwrap());
    verdict(d < TOL, format!("sup distance to Beta(3,3) {d:.5} (tol {TOL})"))
}

fn desk_replicate(seed: u64) -> (Lattice, Lattice, Mask) {
    let scenario = Scenario::example1_desk();
    let (y, truth) = generate(&scenario, seed).unwrap();
    let p = pvalues_one_sided(&y, &scenario.noise.null_model());
    let table = build_neighborhoods(p.dims(), NeighborhoodSpec::cross_for(2)).unwrap();
    let pstar = aggregate(&p, &table, FilterKind::Median).unwrap();
    (p, pstar, truth)
}

fn composite_estimator_sanity() -> Verdict {
    const REPLICATES: u64 = 20;
    const TOL: f64 = 0.05;
    const REQUIRED: usize = 18;
    let table = build_neighborhoods(&[128, 128], NeighborhoodSpec::cross_for(2)).unwrap();
    let mut within = 0;
    let mut worst: f64 = 0.0;
    for seed in 1..=REPLICATES {
        let (p, pstar, truth) = desk_replicate(seed);
        let fit = method2_ghat(&p, &pstar, &table, LAMBDA, seed).unwrap();
        let d = sup_distance(&fit.cdf, &true_null_ecdf(&pstar, &truth).unwrap());
        worst = worst.max(d);
        within += (d < TOL) as usize;
    }
    verdict(
        within >= REQUIRED,
        format!("{within}/{REPLICATES} replicates within {TOL} of the true-null ECDF (need {REQUIRED}); worst {worst:.4}"),
    )
}

#[derive(Default, Clone, Copy)]
struct Means {
    sensitivity: f64,
    specificity: f64,
    fdp: f64,
}

fn ordering_property() -> Verdict {
    const REPLICATES: u64 = 20;
    const ALPHAS: [f64; 3] = [0.01, 0.05, 0.1];
    const LAMBDAS: [f64; 2] = [0.1, 0.4];
    const MIN_SPECIFICITY: f64 = 0.99;
    timed(secs(300), || {
        let mut conv = [[Means::default(); 3]; 2];
        let mut local = [[Means::default(); 3]; 2];
        let add = |m: &mut Means, r: &MetricsReport| {
            let n = REPLICATES as f64;
            m.sensitivity += r.sensitivity.unwrap() / n;
            m.specificity += r.specificity.unwrap() / n;
            m.fdp += r.fdp / n;
        };
        for seed in 1..=REPLICATES {
            let (p, pstar, truth) = desk_replicate(seed);
            let ghat = method1_ghat(&pstar).unwrap();
            for (li, &lambda) in LAMBDAS.iter().enumerate() {
                let c = threshold(&p, lambda, ALPHAS[0], Estimator::Conventional).unwrap();
                let l = threshold(&pstar, lambda, ALPHAS[0], Estimator::Local(&ghat)).unwrap();
                for (ai, &alpha) in ALPHAS.iter().enumerate() {
                    add(&mut conv[li][ai], &metrics(&reject(&p, c.t_alpha_at(alpha)), &truth).unwrap());
                    add(&mut local[li][ai], &metrics(&reject(&pstar, l.t_alpha_at(alpha)), &truth).unwrap());
                }
            }
        }
        let mut failures = Vec::new();
        let mut cells = Vec::new();
        for (li, &lambda) in LAMBDAS.iter().enumerate() {
            for (ai, &alpha) in ALPHAS.iter().enumerate() {
                let (c, l) = (conv[li][ai], local[li][ai]);
                cells.push(format!(
                    "l{lambda}/a{alpha}: sens {:.3}>={:.3} spec {:.4},{:.4} fdp {:.4}<={:.4}",
                    l.sensitivity, c.sensitivity, c.specificity, l.specificity, l.fdp, c.fdp
                ));
                if l.sensitivity < c.sensitivity {
                    failures.push(format!("sensitivity l{lambda}/a{alpha}"));
                }
                if c.specificity < MIN_SPECIFICITY || l.specificity < MIN_SPECIFICITY {
                    failures.push(format!("specificity l{lambda}/a{alpha}"));
                }
                if l.fdp > c.fdp {
                    failures.push(format!("fdp l{lambda}/a{alpha}"));
                }
            }
        }
        let detail = if failures.is_empty() {
            cells.join("; ")
        } else {
            format!("violated: {}; {}", failures.join(", "), cells.join("; "))
        };
        verdict(failures.is_empty(), detail)
    })
}

fn median_law_properties() -> Verdict {
    const POINTS: usize = 10_000;
    const SYMMETRY_TOL: f64 = 1e-12;
    let mut failures = Vec::new();
    for k in [3, 5, 7] {
        let b = |t: f64| beta_median_cdf(k, t).unwrap();
        let mut prev_ratio = 0.0;
        for i in 1..POINTS {
            let t = i as f64 / POINTS as f64;
            let bt = b(t);
            if t < 0.5 {
                let ratio = bt / t;
                if !(bt < t) || !(ratio > prev_ratio) {
                    failures.push(format!("k={k} t={t}"));
                }
                prev_ratio = ratio;
            } else if t > 0.5 && !(bt > t) {
                failures.push(format!("k={k} t={t}"));
            }
            if (bt + b(1.0 - t) - 1.0).abs() > SYMMETRY_TOL {
                failures.push(format!("k={k} symmetry t={t}"));
            }
        }
    }
    verdict(
        failures.is_empty(),
        format!("k in {{3,5,7}} on {POINTS} points: {} violations {:?}", failures.len(), failures.iter().take(3).collect::<Vec<_>>()),
    )
}

fn regime(model: DistModel, grid: GridSpec) -> LipReport {
    alpha_inf_numeric(&model, LAMBDA, PI0, 5, grid).unwrap()
}

fn regime_checks() -> Verdict {
    const COLLAPSE: f64 = 1e-3;
    const FLOOR: f64 = 1e-2;
    const STABLE_REL: f64 = 1e-3;
    let grid = GridSpec::default();
    let mut failures = Vec::new();
    let mut notes = Vec::new();

    let shrinks = |name: &str, r: &LipReport, failures: &mut Vec<String>, notes: &mut Vec<String>| {
        let g = r.grid.unwrap();
        notes.push(format!(
            "{name}: FDR {:.2e}->{:.2e}, FDR_L {:.2e}->{:.2e}",
            g.coarse_fdr, r.alpha_inf_fdr, g.coarse_fdrl, r.alpha_inf_fdrl
        ));
        let ok = r.alpha_inf_fdr < COLLAPSE
            && r.alpha_inf_fdrl < COLLAPSE
            && r.alpha_inf_fdr < g.coarse_fdr
            && r.alpha_inf_fdrl <= g.coarse_fdrl
            && g.coarse_fdr >= COLLAPSE;
        if !ok {
            failures.push(name.to_string());
        }
    };
    let stable = |name: &str, r: &LipReport, failures: &mut Vec<String>, notes: &mut Vec<String>| {
        let g = r.grid.unwrap();
        notes.push(format!(
            "{name}: FDR {:.4}->{:.4}, FDR_L {:.4}->{:.4}",
            g.coarse_fdr, r.alpha_inf_fdr, g.coarse_fdrl, r.alpha_inf_fdrl
        ));
        let steady = |coarse: f64, fine: f64| fine > FLOOR && (coarse - fine).abs() <= STABLE_REL * fine;
        if !(steady(g.coarse_fdr, r.alpha_inf_fdr) && steady(g.coarse_fdrl, r.alpha_inf_fdrl)) {
            failures.push(name.to_string());
        }
    };

    shrinks("normal s=1 C=2", &regime(DistModel::Normal { c: 2.0, sigma: 1.0 }, grid), &mut failures, &mut notes);
    stable("normal s=0.5 C=1", &regime(DistModel::Normal { c: 1.0, sigma: 0.5 }, grid), &mut failures, &mut notes);
    shrinks(
        "t d0=10 d1=2 C=2",
        &regime(DistModel::StudentT { c: 2.0, d0: 10.0, d1: 2.0 }, grid),
        &mut failures,
        &mut notes,
    );
    stable(
        "t d0=d1=5 C=1",
        &regime(DistModel::StudentT { c: 1.0, d0: 5.0, d1: 5.0 }, grid),
        &mut failures,
        &mut notes,
    );

    let exp = DistModel::ExponentialShift { c: 8f64.ln() };
    let numeric = regime(exp, grid);
    let analytic = lip_report_exponential(8f64.ln(), LAMBDA, PI0).unwrap();
    let dominance = analytic.alpha_inf_fdr > analytic.alpha_inf_fdrl && numeric.alpha_inf_fdr > numeric.alpha_inf_fdrl;
    notes.push(format!(
        "exp C=log8: {:.4} > {:.4}",
        analytic.alpha_inf_fdr, analytic.alpha_inf_fdrl
    ));
    if !dominance {
        failures.push("exp dominance".into());
    }
    verdict(failures.is_empty(), format!("failed {failures:?}; {}", notes.join("; ")))
}

fn count_identities() -> Verdict {
    const RANDOM_PAIRS: usize = 1000;
    let mut rng = stream(77, 7);
    let mut checked = 0;
    let mut broken = 0;
    let mut check = |r: &MetricsReport| {
        checked += 1;
        let ok = r.u + r.v == r.n0 && r.t + r.s == r.n1 && r.w + r.r == r.n;
        broken += (!ok) as usize;
    };
    for _ in 0..RANDOM_PAIRS {
        let dims = vec![rng.random_range(1..12), rng.random_range(1..12)];
        let density: f64 = rng.random();
        let mask = Mask::from_fn(dims.clone(), |_| rng.random::<f64>() < density).unwrap();
        let truth = Mask::from_fn(dims, |_| rng.random::<f64>() < density).unwrap();
        check(&metrics(&mask, &truth).unwrap());
    }
    for seed in 1..=3 {
        let (p, pstar, truth) = desk_replicate(seed);
        let ghat = method1_ghat(&pstar).unwrap();
        for alpha in [0.0, 0.01, 0.05, 0.1, 0.5, 1.0] {
            let c = threshold(&p, LAMBDA, alpha, Estimator::Conventional).unwrap();
            let l = threshold(&pstar, LAMBDA, alpha, Estimator::Local(&ghat)).unwrap();
            check(&metrics(&reject(&p, c.t_alpha), &truth).unwrap());
            check(&metrics(&reject(&pstar, l.t_alpha), &truth).unwrap());
        }
    }
    verdict(broken == 0, format!("{broken} of {checked} reports break a row or column sum"))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Verdict); 11] = [
        ("published level table", table_reproduction),
        ("analytic/numeric agreement", analytic_numeric_agreement),
        ("lack-of-identification demonstration", lip_demonstration),
        ("single-site equivalence", single_site_equivalence),
        ("median null law", null_law_check),
        ("symmetric estimator consistency", symmetric_estimator_consistency),
        ("composite estimator sanity", composite_estimator_sanity),
        ("sensitivity/specificity/FDP ordering", ordering_property),
        ("median law properties", median_law_properties),
        ("regime checks", regime_checks),
        ("count identities", count_identities),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let v = check();
        failed += (!v.pass) as usize;
        println!(
            "criterion {:>2} {} {name}: {}",
            i + 1,
            if v.pass { "PASS" } else { "FAIL" },
            v.detail
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
