//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (no test harness) so the verdicts print in order.
//! Exits non-zero when any criterion fails.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use demand_frontier::data::{impute_missing, synthesize_population, SyntheticPopulationConfig};
use demand_frontier::decompose::multi_stl;
use demand_frontier::forecast::fit_arma_garch;
use demand_frontier::forecast::{
    decide, default_threshold_grid, ArmaGarchModel, ArmaGarchParams, ModelKind, Sged, SgedParams,
};
use demand_frontier::portfolio::{
    ga_optimize, ga_optimize_relaxed, partition_demand_range, read_frontier_csv, Approach,
    GaConfig, Objective, Partition, RsdDenominator, SrObjective, SsObjective, SsWeighting,
};
use demand_frontier::rng::derive_rng;
use demand_frontier::score::crps_ensemble;
use demand_frontier::stats::median;
use demand_frontier::study::{aggregation_study, AggregationStudyConfig};
use demand_frontier::{Panel, SelectionVector};
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use statrs::distribution::{Continuous, ContinuousCDF, Normal as StatNormal};

type Verdict = (bool, String);

/// Closed-form CRPS of a Gaussian forecast.
fn gaussian_crps(mu: f64, sigma: f64, y: f64) -> f64 {
    let z = (y - mu) / sigma;
    let n = StatNormal::standard();
    sigma * (z * (2.0 * n.cdf(z) - 1.0) + 2.0 * n.pdf(z) - 1.0 / std::f64::consts::PI.sqrt())
}

fn crps_estimator() -> Verdict {
    let mut rng = derive_rng(1, &[]);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let mu = rng.random_range(-5.0..5.0);
        let sigma = rng.random_range(0.2..3.0);
        let y = mu + sigma * rng.random_range(-3.0..3.0);
        let normal = Normal::new(mu, sigma).unwrap();
        let ens: Vec<f64> = (0..100_000).map(|_| normal.sample(&mut rng)).collect();
        let exact = gaussian_crps(mu, sigma, y);
        let rel = (crps_ensemble(&ens, y).unwrap() - exact).abs() / exact;
        worst = worst.max(rel);
    }
    (
        worst < 0.01,
        format!("max relative error {:.3}%", 100.0 * worst),
    )
}

/// Amplitude of the `period` tone by projection on sine and cosine.
fn amplitude(x: &[f64], period: usize) -> f64 {
    let w = std::f64::consts::TAU / period as f64;
    let (mut s, mut c) = (0.0, 0.0);
    for (t, v) in x.iter().enumerate() {
        s += v * (w * t as f64).sin();
        c += v * (w * t as f64).cos();
    }
    2.0 * (s * s + c * c).sqrt() / x.len() as f64
}

fn stl_identity_and_recovery() -> Verdict {
    let mut worst_identity: f64 = 0.0;
    for s in 0..50u64 {
        let mut rng = derive_rng(2, &[s]);
        let n = rng.random_range(400..1500);
        let (a, b, slope) = (
            rng.random_range(0.1..2.0),
            rng.random_range(0.1..1.0),
            rng.random_range(-1e-3..1e-3),
        );
        let y: Vec<f64> = (0..n)
            .map(|t| {
                let t = t as f64;
                let z: f64 = StandardNormal.sample(&mut rng);
                3.0 + slope * t
                    + a * (std::f64::consts::TAU * t / 24.0).sin()
                    + b * (std::f64::consts::TAU * t / 168.0).cos()
                    + 0.3 * z
            })
            .collect();
        let d = multi_stl(&y, &[24, 168]).unwrap();
        for (t, yt) in y.iter().enumerate() {
            worst_identity =
                worst_identity.max((d.seasonal[t] + d.trend[t] + d.remainder[t] - yt).abs());
        }
    }
    // eight whole weeks, daily amplitude 1.0 and weekly amplitude 0.5
    let mut rng = derive_rng(2, &[999]);
    let n = 8 * 168;
    let y: Vec<f64> = (0..n)
        .map(|t| {
            let t = t as f64;
            let z: f64 = StandardNormal.sample(&mut rng);
            2.0 + 1e-4 * t
                + (std::f64::consts::TAU * t / 24.0).sin()
                + 0.5 * (std::f64::consts::TAU * t / 168.0).sin()
                + 0.05 * z
        })
        .collect();
    let d = multi_stl(&y, &[24, 168]).unwrap();
    let daily = amplitude(&d.seasonal_components[0], 24);
    let weekly = amplitude(&d.seasonal_components[1], 168);
    let err = ((daily - 1.0).abs() / 1.0).max((weekly - 0.5).abs() / 0.5);
    (
        worst_identity < 1e-9 && err < 0.05,
        format!("identity error {worst_identity:.1e}; amplitudes daily {daily:.4}, weekly {weekly:.4} (worst error {:.2}%)", 100.0 * err),
    )
}

fn garch_recovery() -> Verdict {
    let truth = [0.05, 0.90, 0.05];
    let mut errors = [vec![], vec![], vec![]];
    for s in 0..20u64 {
        let params = ArmaGarchParams {
            intercept: 0.0,
            ar: vec![],
            ma: vec![],
            omega: truth[0],
            garch: vec![truth[1]],
            arch: vec![truth[2]],
            shape: 2.0,
            skew: 1.0,
        };
        let model = ArmaGarchModel::from_params(params, &[0.0, 0.0]).unwrap();
        let sim = model.simulate(5500, 1, &mut derive_rng(3, &[s])).unwrap();
        let y: Vec<f64> = sim.into_iter().skip(500).map(|v| v[0]).collect();
        let fit = fit_arma_garch(&y, 0, 0).unwrap().params;
        for (e, (est, t)) in errors.iter_mut().zip(
            [fit.omega, fit.garch[0], fit.arch[0]]
                .into_iter()
                .zip(truth),
        ) {
            e.push((est - t).abs());
        }
    }
    let med: Vec<f64> = errors.iter().map(|e| median(e)).collect();
    (
        med.iter().all(|&m| m < 0.05),
        format!(
            "median absolute errors omega {:.4}, beta {:.4}, alpha {:.4}",
            med[0], med[1], med[2]
        ),
    )
}

fn sged_sanity() -> Verdict {
    let gauss = Sged::new(SgedParams::standard(2.0, 1.0)).unwrap();
    let n = StatNormal::standard();
    let worst_pdf = (0..50)
        .map(|i| -5.0 + 10.0 * i as f64 / 49.0)
        .map(|x| (gauss.density(x) - n.pdf(x)).abs())
        .fold(0.0, f64::max);
    let mut rng = derive_rng(4, &[]);
    let mut worst_mass: f64 = 0.0;
    for _ in 0..10 {
        let p = SgedParams {
            location: rng.random_range(-2.0..2.0),
            scale: rng.random_range(0.5..2.0),
            shape: rng.random_range(1.0..4.0),
            skew: rng.random_range(0.5..2.0),
        };
        let d = Sged::new(p).unwrap();
        // composite Simpson over a range wide enough for the heaviest tail drawn
        let (a, b, m) = (p.location - 60.0, p.location + 60.0, 200_000);
        let h = (b - a) / m as f64;
        let mut s = d.density(a) + d.density(b);
        for i in 1..m {
            s += d.density(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        worst_mass = worst_mass.max((s * h / 3.0 - 1.0).abs());
    }
    (
        worst_pdf < 1e-8 && worst_mass < 1e-4,
        format!("max Gaussian density gap {worst_pdf:.1e}; max |mass - 1| {worst_mass:.1e}"),
    )
}

fn gate() -> Verdict {
    let mut checks = 0;
    for delta in default_threshold_grid() {
        let cases = [
            (Some(delta), ModelKind::ArmaGarch),
            (Some(delta + 1e-6), ModelKind::ArmaGarch),
            (Some(1.0), ModelKind::ArmaGarch),
            (
                Some(0.5 * delta),
                if delta > 0.0 {
                    ModelKind::Kde
                } else {
                    ModelKind::ArmaGarch
                },
            ),
            (Some(delta - 1e-6), ModelKind::Kde),
            (None, ModelKind::Kde),
        ];
        for (p, want) in cases {
            if p.is_some_and(|p| p < 0.0) {
                continue;
            }
            if decide(p, delta) != want {
                return (
                    false,
                    format!("p-value {p:?} at threshold {delta} gave the wrong model"),
                );
            }
            checks += 1;
        }
    }
    (
        true,
        format!("{checks} stubbed p-values over 21 thresholds"),
    )
}

fn brute_force<O: Objective + ?Sized>(o: &O, p: &Partition, f: &[f64]) -> Option<f64> {
    let n = f.len();
    (1u32..1 << n)
        .filter_map(|m| {
            let v =
                SelectionVector::from_bits(&(0..n).map(|i| m >> i & 1 == 1).collect::<Vec<_>>());
            p.contains(v.dot(f)).then(|| o.evaluate(&v))
        })
        .min_by(f64::total_cmp)
}

/// Small synthetic instance: panel, household mean-demand forecasts and one
/// interior demand band.
fn instance(s: u64) -> (Panel, Vec<f64>, Partition) {
    let n = 10 + (s % 3) as usize;
    let cfg = SyntheticPopulationConfig {
        n_households: n,
        n_hours: 3 * 168,
        seed: 100 + s,
        ..Default::default()
    };
    let panel = impute_missing(&synthesize_population(&cfg).unwrap()).unwrap();
    let f: Vec<f64> = panel
        .columns()
        .iter()
        .map(|c| c[c.len() - 168..].iter().sum::<f64>() / 168.0)
        .collect();
    let p = partition_demand_range(&f, 5, 1).unwrap()[1 + s as usize % 3];
    (panel, f, p)
}

fn ga_vs_brute_force() -> Verdict {
    let mut hits = [0, 0];
    let mut infeasible = 0;
    for s in 0..20u64 {
        let (panel, f, p) = instance(s);
        let sr = SrObjective::new(panel.clone(), RsdDenominator::DemandMean);
        let ss = SsObjective::new(&panel, RsdDenominator::DemandMean)
            .with_weight(0.5, 1, SsWeighting::PerLead)
            .unwrap();
        let ga = GaConfig {
            seed: s,
            ..Default::default()
        };
        let objectives: [&dyn Objective; 2] = [&sr, &ss];
        for (j, o) in objectives.into_iter().enumerate() {
            let best = brute_force(o, &p, &f).expect("instance has a feasible portfolio");
            let r = ga_optimize(o, &p, &f, &ga).unwrap();
            if !p.contains(r.selection.dot(&f)) {
                infeasible += 1;
            }
            if (r.objective - best).abs() <= 1e-9 {
                hits[j] += 1;
            }
        }
    }
    (
        hits.iter().all(|&h| h >= 18) && infeasible == 0,
        format!(
            "matches SR {}/20, SS {}/20; {infeasible} infeasible outputs",
            hits[0], hits[1]
        ),
    )
}

fn relaxation_dominance() -> Verdict {
    let mut worst_gap = f64::NEG_INFINITY;
    let mut ok = 0;
    for s in 0..10u64 {
        let (panel, f, p) = instance(50 + s);
        let sr = SrObjective::new(panel, RsdDenominator::DemandMean);
        let ga = GaConfig {
            seed: s,
            ..Default::default()
        };
        let binary = ga_optimize(&sr, &p, &f, &ga).unwrap();
        let relaxed =
            ga_optimize_relaxed(&sr, &p, &f, &ga, std::slice::from_ref(&binary.selection)).unwrap();
        worst_gap = worst_gap.max(relaxed.objective - binary.objective);
        if relaxed.objective <= binary.objective && p.contains(relaxed.selection.dot(&f)) {
            ok += 1;
        }
    }
    (
        ok == 10,
        format!("{ok}/10 instances; largest relaxed minus binary {worst_gap:.3e}"),
    )
}

fn reference_panel() -> Panel {
    let cfg = SyntheticPopulationConfig {
        n_households: 200,
        n_hours: 26 * 168,
        seed: 42,
        ..Default::default()
    };
    impute_missing(&synthesize_population(&cfg).unwrap()).unwrap()
}

fn aggregation_direction() -> Verdict {
    let cfg = AggregationStudyConfig {
        group_sizes: vec![1, 100],
        lead_times: vec![4],
        ..Default::default()
    };
    let rows = aggregation_study(&reference_panel(), &cfg).unwrap();
    let (one, hundred) = (rows[0].crps_kw, rows[1].crps_kw);
    let reduction = 1.0 - hundred / one;
    (
        reduction >= 0.4,
        format!("mean CRPS of the group average: size 1 {one:.4} kW, size 100 {hundred:.4} kW ({:.1}% lower)", 100.0 * reduction),
    )
}

fn reference_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/reference.json")
}

fn run_reference(out: &Path) -> Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_demand-frontier"))
        .arg("--config")
        .arg(reference_config())
        .arg("--out")
        .arg(out)
        .arg("run")
        .env("DEMAND_FRONTIER_LOG", "warn")
        .status()
        .map_err(|e| e.to_string())?;
    match status.code() {
        Some(0) => Ok(()),
        c => Err(format!("run exited with {c:?}")),
    }
}

fn frontier_ordering(out: &Path) -> Verdict {
    let file = match fs::File::open(out.join("frontier.csv")) {
        Ok(f) => f,
        Err(e) => return (false, format!("no frontier: {e}")),
    };
    let rows = read_frontier_csv(file).unwrap();
    // mean CRPS per (approach, lead, partition); random averages its samples
    let mut cells: BTreeMap<(Approach, usize, usize), (f64, usize)> = BTreeMap::new();
    for r in &rows {
        let c = cells
            .entry((r.approach, r.lead_time_h, r.partition_k))
            .or_default();
        c.0 += r.crps_kw;
        c.1 += 1;
    }
    let crps =
        |a: Approach, lead: usize, k: usize| cells.get(&(a, lead, k)).map(|c| c.0 / c.1 as f64);
    let proposed = [Approach::Fv, Approach::Sr, Approach::Ss];
    let mut ok = true;
    let mut detail = Vec::new();
    let mut overall: BTreeMap<Approach, Vec<f64>> = BTreeMap::new();
    for lead in [4, 12, 24] {
        // partitions every approach covers
        let ks: Vec<usize> = (0..10)
            .filter(|&k| {
                proposed
                    .iter()
                    .chain([&Approach::Random])
                    .all(|&a| crps(a, lead, k).is_some())
            })
            .collect();
        if ks.is_empty() {
            return (
                false,
                format!("no partition at lead {lead} h has every approach"),
            );
        }
        let mean = |a: Approach| {
            ks.iter().map(|&k| crps(a, lead, k).unwrap()).sum::<f64>() / ks.len() as f64
        };
        let random = mean(Approach::Random);
        let mut parts = vec![format!(
            "{lead} h ({} partitions): random {random:.3}",
            ks.len()
        )];
        for a in proposed {
            let m = mean(a);
            overall
                .entry(a)
                .or_default()
                .extend(ks.iter().map(|&k| crps(a, lead, k).unwrap()));
            let gain = 1.0 - m / random;
            ok &= gain >= 0.3;
            parts.push(format!("{} {m:.3} (-{:.0}%)", a.name(), 100.0 * gain));
        }
        detail.push(parts.join(", "));
    }
    let mean = |a: Approach| {
        let v = &overall[&a];
        v.iter().sum::<f64>() / v.len() as f64
    };
    let (fv, sr, ss) = (mean(Approach::Fv), mean(Approach::Sr), mean(Approach::Ss));
    ok &= fv <= sr && fv <= ss;
    detail.push(format!("overall fv {fv:.4}, sr {sr:.4}, ss {ss:.4}"));
    (ok, detail.join("; "))
}

fn byte_identical(a: &Path, b: &Path) -> Verdict {
    let mut same = Vec::new();
    for f in ["frontier.csv", "frontier.json"] {
        match (fs::read(a.join(f)), fs::read(b.join(f))) {
            (Ok(x), Ok(y)) if x == y => same.push(format!("{f} identical ({} bytes)", x.len())),
            (Ok(_), Ok(_)) => return (false, format!("{f} differs between runs")),
            _ => return (false, format!("{f} missing")),
        }
    }
    (true, same.join(", "))
}

fn main() {
    // `cargo test -- --list` and filters are not meaningful here
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let mut failed = 0;
    let mut report = |n: usize, name: &str, f: &mut dyn FnMut() -> Verdict| {
        let t = Instant::now();
        let (ok, detail) = f();
        let verdict = if ok { "PASS" } else { "FAIL" };
        println!(
            "{verdict} criterion {n:>2} {name}: {detail} [{:.1} s]",
            t.elapsed().as_secs_f64()
        );
        if !ok {
            failed += 1;
        }
    };
    report(1, "CRPS estimator", &mut crps_estimator);
    report(
        2,
        "STL identity and recovery",
        &mut stl_identity_and_recovery,
    );
    report(3, "GARCH recovery", &mut garch_recovery);
    report(4, "SGED sanity", &mut sged_sanity);
    report(5, "model-selection gate", &mut gate);
    report(6, "GA vs brute force", &mut ga_vs_brute_force);
    report(7, "relaxation dominance", &mut relaxation_dominance);
    report(8, "aggregation direction", &mut aggregation_direction);

    let dir = tempfile::tempdir().expect("temporary directory");
    let (first, second) = (dir.path().join("first"), dir.path().join("second"));
    // the reference runs happen inside the reports so their time is counted
    let mut first_run = Err("not run".to_string());
    report(9, "frontier ordering", &mut || {
        first_run = run_reference(&first);
        match &first_run {
            Ok(()) => frontier_ordering(&first),
            Err(e) => (false, e.clone()),
        }
    });
    report(
        10,
        "determinism",
        &mut || match (&first_run, &run_reference(&second)) {
            (Ok(()), Ok(())) => byte_identical(&first, &second),
            (_, Err(e)) | (Err(e), _) => (false, e.clone()),
        },
    );

    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
