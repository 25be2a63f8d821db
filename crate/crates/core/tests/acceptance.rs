//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::time::{Duration, Instant};

use rand::Rng;
use speclb::analytic::{
    load_per_rate, load_reduction, mean_field_response, optimal_timeout, slowdown_condition_holds,
    speculation_condition_holds, value_function, Method, NetworkConfig,
};
use speclb::dists::{stream, DistributionSpec, Purpose, SxMode, SxModel};
use speclb::fluid::{drain, ClassId, FluidNetwork, FluidState};
use speclb::harness::{rep_seed, row_seed};
use speclb::sim::{run, Discipline, Scheme, SimStats};

const SEED: u64 = 20_240_601;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn bimodal() -> SxModel {
    SxModel::unit_size(DistributionSpec::bimodal(10.0, 1e3, 0.99))
}

fn hyper() -> SxModel {
    SxModel::unit_size(DistributionSpec::hyperexponential(
        vec![0.99, 0.01],
        vec![1.0, 1.0 / 99.0],
    ))
}

fn pareto() -> SxModel {
    SxModel::unit_size(DistributionSpec::Pareto {
        alpha: 1.5,
        s_m: 1.0,
    })
}

fn exponential() -> SxModel {
    SxModel::unit_size(DistributionSpec::Exponential { rate: 1.0 })
}

/// Plain mean and standard error of `η₁ ∧ τ + 1{η₁ > τ} η₂` by direct sampling.
fn mc_load(model: &SxModel, tau: f64, n: usize, id: u64) -> (f64, f64) {
    let mut rng = stream(SEED, Purpose::Oracle, id);
    let (mut s, mut s2) = (0.0, 0.0);
    for _ in 0..n {
        let x = model.size.sample(&mut rng);
        let e1 = model.slowdown.sample(&mut rng) * x;
        let e2 = model.slowdown.sample(&mut rng) * x;
        let v = if e1 > tau { tau + e2 } else { e1 };
        s += v;
        s2 += v * v;
    }
    let m = s / n as f64;
    (m, ((s2 / n as f64 - m * m) / n as f64).sqrt())
}

fn c1_closed_form_load() -> Verdict {
    let m = bimodal();
    let mut ok = true;
    let mut parts = Vec::new();
    for (k, (tau, expected)) in [(10.0, 10.199 / 19.9), (100.0, 11.099 / 19.9)]
        .into_iter()
        .enumerate()
    {
        let l = load_reduction(&m, tau).unwrap();
        let (mc, se) = mc_load(&m, tau, 1_000_000, k as u64);
        let z = (l * 19.9 - mc).abs() / se;
        ok &= z <= 3.0 && (l - expected).abs() < 1e-12;
        parts.push(format!("L({tau})={l:.6} oracle z={z:.2}"));
    }
    verdict(ok, parts.join(", "))
}

fn c2_memoryless() -> Verdict {
    let m = exponential();
    let worst = [0.1, 1.0, 10.0]
        .iter()
        .map(|&t| (load_reduction(&m, t).unwrap() - 1.0).abs())
        .fold(0.0, f64::max);
    verdict(worst < 1e-9, format!("max |L-1| = {worst:.2e}"))
}

fn c3_slowdown_boundaries() -> Verdict {
    let b = bimodal();
    let p = pareto();
    let h = hyper();
    let eps = 1e-4;
    let checks = [
        (
            "bimodal below 10",
            slowdown_condition_holds(&b, 10.0 - eps).unwrap(),
            false,
        ),
        (
            "bimodal above 10",
            slowdown_condition_holds(&b, 10.0 + eps).unwrap(),
            true,
        ),
        (
            "bimodal below 980.1",
            slowdown_condition_holds(&b, 980.1 - eps).unwrap(),
            true,
        ),
        (
            "bimodal above 980.1",
            slowdown_condition_holds(&b, 980.1 + eps).unwrap(),
            false,
        ),
        (
            "pareto below 1.5",
            slowdown_condition_holds(&p, 1.5 - eps).unwrap(),
            false,
        ),
        (
            "pareto above 1.5",
            slowdown_condition_holds(&p, 1.5 + eps).unwrap(),
            true,
        ),
        (
            "hyperexp 0.01",
            slowdown_condition_holds(&h, 0.01).unwrap(),
            true,
        ),
        (
            "hyperexp 1",
            slowdown_condition_holds(&h, 1.0).unwrap(),
            true,
        ),
        (
            "hyperexp 100",
            slowdown_condition_holds(&h, 100.0).unwrap(),
            true,
        ),
    ];
    let bad: Vec<&str> = checks.iter().filter(|c| c.1 != c.2).map(|c| c.0).collect();
    verdict(
        bad.is_empty(),
        if bad.is_empty() {
            "9/9 boundary checks".into()
        } else {
            format!("wrong: {bad:?}")
        },
    )
}

fn c4_optimal_timeout() -> Verdict {
    let m = pareto();
    let sol = optimal_timeout(&m, None).unwrap();
    let at = load_per_rate(&m, 4.5).unwrap();
    let grid_min = (0..10_000)
        .map(|k| 0.5 + 49.5 * k as f64 / 9_999.0)
        .map(|t| load_per_rate(&m, t).unwrap())
        .fold(f64::INFINITY, f64::min);
    let rel = (grid_min - at).abs() / at;
    let ok = sol.method == Method::HazardRule && (sol.tau_star - 4.5).abs() <= 1e-6 && rel <= 5e-3;
    verdict(
        ok,
        format!(
            "tau*={:.9} grid min within {:.2e} of rho(4.5)",
            sol.tau_star, rel
        ),
    )
}

fn random_model<R: Rng>(rng: &mut R, restart_only: bool) -> SxModel {
    let slowdown = match rng.random_range(0..7) {
        0 => DistributionSpec::bimodal(
            rng.random_range(1.0..20.0),
            rng.random_range(50.0..2000.0),
            rng.random_range(0.5..0.999),
        ),
        1 => DistributionSpec::Pareto {
            alpha: rng.random_range(1.1..4.0),
            s_m: rng.random_range(0.2..3.0),
        },
        2 => {
            let w = rng.random_range(0.5..0.999);
            DistributionSpec::hyperexponential(
                vec![w, 1.0 - w],
                vec![rng.random_range(0.5..3.0), rng.random_range(0.005..0.2)],
            )
        }
        3 => DistributionSpec::Exponential {
            rate: rng.random_range(0.1..5.0),
        },
        4 => DistributionSpec::Erlang {
            k: rng.random_range(2..6),
            rate: rng.random_range(0.2..3.0),
        },
        5 => DistributionSpec::Uniform {
            a: rng.random_range(0.0..1.0),
            b: rng.random_range(1.5..5.0),
        },
        _ => DistributionSpec::TruncatedPareto {
            alpha: rng.random_range(0.8..3.0),
            s_m: 1.0,
            b: rng.random_range(5.0..500.0),
        },
    };
    let size = match rng.random_range(0..3) {
        0 => DistributionSpec::Deterministic { v: 1.0 },
        1 => DistributionSpec::Uniform { a: 0.0, b: 2.0 },
        _ => DistributionSpec::bimodal(1.0, 3.0, 0.7),
    };
    let mode = if restart_only {
        SxMode::Restart
    } else {
        [SxMode::Restart, SxMode::Resume, SxMode::Identical][rng.random_range(0..3)]
    };
    SxModel::new(slowdown, size, mode)
}

fn c5_speculation_equivalence() -> Verdict {
    let mut rng = stream(SEED, Purpose::Config, 5);
    let (mut exceptions, mut boundary, mut tested) = (0, 0, 0);
    while tested < 200 {
        let m = random_model(&mut rng, true);
        let tau = m.eta1_quantile(rng.random_range(0.02..0.98));
        if !(tau > 0.0) || m.eta1_ccdf(tau) <= 0.0 {
            continue;
        }
        tested += 1;
        let holds = speculation_condition_holds(&m, tau).unwrap();
        let l = load_reduction(&m, tau).unwrap();
        if (l - 1.0).abs() <= 1e-9 {
            boundary += 1;
        } else if holds != (l < 1.0) {
            exceptions += 1;
        }
    }
    verdict(
        exceptions == 0,
        format!("{tested} pairs, {exceptions} exceptions, {boundary} within 1e-9 of L=1"),
    )
}

fn sim(cfg: &NetworkConfig, scheme: Scheme, n_jobs: usize, seed: u64) -> SimStats {
    run(cfg, scheme, Discipline::Fcfs, n_jobs, n_jobs / 10, seed).unwrap()
}

fn pk_response(model: &SxModel, lambda: f64) -> f64 {
    let rho = lambda * model.eta1_mean();
    model.eta1_mean() + lambda * model.eta1_second().unwrap() / (2.0 * (1.0 - rho))
}

fn c6_mg1() -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, m) in [("exponential", exponential()), ("hyperexp", hyper())] {
        let lambda = 0.7 / m.eta1_mean();
        let cfg = NetworkConfig::symmetric(10, lambda, f64::INFINITY, m.clone());
        let s = sim(
            &cfg,
            Scheme::Slb,
            1_000_000,
            row_seed(SEED, Scheme::Slb, 0.7),
        );
        let pk = pk_response(&m, lambda);
        let rel = (s.mean_response - pk) / pk;
        ok &= rel.abs() <= 0.05;
        parts.push(format!(
            "{name}: sim {:.3}±{:.3} vs {pk:.3} ({:+.2}%)",
            s.mean_response,
            s.ci95_halfwidth,
            100.0 * rel
        ));
    }
    verdict(ok, parts.join("; "))
}

fn c7_mean_field() -> Verdict {
    let m = bimodal();
    let mut ok = true;
    let mut parts = Vec::new();
    for load in [0.4, 0.8, 1.2] {
        let lambda = load / 19.9;
        let cfg = NetworkConfig::symmetric(50, lambda, 10.0, m.clone());
        let row = row_seed(SEED, Scheme::Slb, load);
        let means: Vec<f64> = (0..10)
            .map(|r| sim(&cfg, Scheme::Slb, 100_000, rep_seed(row, r)).mean_response)
            .collect();
        let sim_mean = means.iter().sum::<f64>() / 10.0;
        let formula = mean_field_response(lambda, &m, 10.0).unwrap().r_infinity;
        let gap = (sim_mean - formula).abs() / formula;
        ok &= gap <= 0.07;
        parts.push(format!(
            "load {load}: sim {sim_mean:.3} vs {formula:.3} ({:.2}%)",
            100.0 * gap
        ));
    }
    verdict(ok, parts.join("; "))
}

fn c8_stability_gain() -> Verdict {
    let m = bimodal();
    let load = 1.3;
    let cfg = NetworkConfig::symmetric(50, load / 19.9, 10.0, m);
    let n = 500_000;
    let slb = sim(&cfg, Scheme::Slb, n, row_seed(SEED, Scheme::Slb, load));
    let rnd = sim(&cfg, Scheme::Rnd, n, row_seed(SEED, Scheme::Rnd, load));
    let cos = sim(
        &cfg,
        Scheme::CoS(2),
        n,
        row_seed(SEED, Scheme::CoS(2), load),
    );
    let ok = !slb.diverged && rnd.diverged && cos.diverged;
    verdict(
        ok,
        format!(
            "trend t: slb {:.2} (mean {:.2}), rnd {:.1}, cos-2 {:.1}",
            slb.trend_t, slb.mean_response, rnd.trend_t, cos.trend_t
        ),
    )
}

fn c9_light_load() -> Verdict {
    let load = 0.1;
    let tau = optimal_timeout(&bimodal(), None).unwrap().tau_star;
    let cfg = NetworkConfig::symmetric(50, load / 19.9, tau, bimodal());
    let n = 200_000;
    let coc = sim(
        &cfg,
        Scheme::CoC(2),
        n,
        row_seed(SEED, Scheme::CoC(2), load),
    );
    let slb = sim(&cfg, Scheme::Slb, n, row_seed(SEED, Scheme::Slb, load));
    let ok = coc.mean_response + coc.ci95_halfwidth <= slb.mean_response - slb.ci95_halfwidth;
    verdict(
        ok,
        format!(
            "coc-2 {:.3}±{:.3} vs slb {:.3}±{:.3}",
            coc.mean_response, coc.ci95_halfwidth, slb.mean_response, slb.ci95_halfwidth
        ),
    )
}

fn c10_messages() -> Verdict {
    let m = bimodal();
    let load = 0.5;
    let cfg = NetworkConfig::symmetric(20, load / 19.9, 10.0, m.clone());
    let n = 200_000;
    let slb = sim(&cfg, Scheme::Slb, n, row_seed(SEED, Scheme::Slb, load));
    let p = m.eta1_ccdf(10.0);
    let se = (p * (1.0 - p) / slb.measured_jobs as f64).sqrt();
    let z = (slb.messages_per_job - (1.0 + p)).abs() / se;
    let mut ok = z <= 3.0;
    let mut parts = vec![format!(
        "slb {:.5} vs {:.5} (z={z:.2})",
        slb.messages_per_job,
        1.0 + p
    )];
    for d in [2, 4] {
        let s = sim(
            &cfg,
            Scheme::CoC(d),
            50_000,
            row_seed(SEED, Scheme::CoC(d), load),
        );
        ok &= s.messages_per_job == (2 * d - 1) as f64;
        parts.push(format!("coc-{d} {}", s.messages_per_job));
    }
    verdict(ok, parts.join(", "))
}

fn c11_fluid_drain() -> Verdict {
    let mut rng = stream(SEED, Purpose::Config, 11);
    let mut failures = Vec::new();
    let mut worst_shift: f64 = 0.0;
    for k in 0..20 {
        let model = random_model(&mut rng, false);
        let tau = model.eta1_quantile(rng.random_range(0.3..0.95));
        let n = rng.random_range(2..6);
        let target = rng.random_range(0.3..0.9);
        let mut cfg = NetworkConfig::symmetric(n, 1.0, tau, model);
        cfg.lambda = target / load_per_rate(&cfg.model, tau).unwrap();
        let classes = ClassId::count(n);
        let mut weights: Vec<f64> = (0..classes).map(|_| rng.random_range(0.0..1.0)).collect();
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        let masses: Vec<(ClassId, f64)> = weights
            .iter()
            .enumerate()
            .map(|(i, &w)| (ClassId::from_index(i, n), w))
            .collect();
        let initial = FluidState::with_mass(n, &masses);
        let net = FluidNetwork::new(&cfg).unwrap();
        let g0 = net.lyapunov(&initial).g;
        let max_rho = net.rho.iter().copied().fold(0.0, f64::max);
        let bound = 2.0 * g0 * (1.0 / n as f64) / (1.0 - max_rho);
        let step = 1e-3 * net.min_service_mean().min(bound / 200.0);
        let (coarse, _) = drain(&cfg, &initial, bound, step, usize::MAX).unwrap();
        let (fine, _) = drain(&cfg, &initial, bound, step / 2.0, usize::MAX).unwrap();
        let monotone = coarse.nonincreasing(1e-6) && fine.nonincreasing(1e-6);
        match (coarse.empty_time, fine.empty_time) {
            (Some(a), Some(b)) if monotone => {
                let shift = (a - b).abs() / b;
                worst_shift = worst_shift.max(shift);
                if shift >= 0.02 {
                    failures.push(format!(
                        "config {k}: step halving moved empty time by {:.2}%",
                        100.0 * shift
                    ));
                }
            }
            _ => failures.push(format!(
                "config {k}: monotone={monotone} empty={:?} bound={bound:.3} max_increase={:.2e}",
                coarse.empty_time, coarse.max_increase
            )),
        }
    }
    let detail = if failures.is_empty() {
        format!(
            "20/20 drained by bound, worst step-halving shift {:.3}%",
            100.0 * worst_shift
        )
    } else {
        failures.join("; ")
    };
    verdict(failures.is_empty(), detail)
}

fn c12_value_identity() -> Verdict {
    let models = [
        ("exponential", exponential()),
        ("pareto", pareto()),
        ("hyperexp", hyper()),
        (
            "erlang",
            SxModel::unit_size(DistributionSpec::Erlang { k: 2, rate: 1.0 }),
        ),
        (
            "pareto x uniform",
            SxModel::new(
                DistributionSpec::Pareto {
                    alpha: 2.5,
                    s_m: 1.0,
                },
                DistributionSpec::Uniform { a: 0.5, b: 1.5 },
                SxMode::Restart,
            ),
        ),
    ];
    let mut worst: f64 = 0.0;
    for (_, m) in &models {
        let (lo, hi) = (m.eta1_quantile(0.01), m.eta1_quantile(0.999));
        for k in 0..100 {
            let tau = lo * (hi / lo).powf(k as f64 / 99.0);
            let v = value_function(m, tau, 0.0).unwrap();
            let rho = load_per_rate(m, tau).unwrap();
            worst = worst.max((v - rho).abs() / rho);
        }
    }
    verdict(
        worst < 1e-8,
        format!("5 models x 100 timeouts, max relative error {worst:.2e}"),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Verdict, Duration); 12] = [
        (
            "closed-form load vs oracle",
            c1_closed_form_load,
            Duration::from_secs(5),
        ),
        (
            "memoryless neutrality",
            c2_memoryless,
            Duration::from_secs(1),
        ),
        (
            "slowdown condition boundaries",
            c3_slowdown_boundaries,
            Duration::from_secs(5),
        ),
        (
            "optimal timeout",
            c4_optimal_timeout,
            Duration::from_secs(10),
        ),
        (
            "speculation condition iff L < 1",
            c5_speculation_equivalence,
            Duration::from_secs(60),
        ),
        ("simulator vs M/G/1", c6_mg1, Duration::from_secs(120)),
        (
            "mean-field response",
            c7_mean_field,
            Duration::from_secs(600),
        ),
        (
            "stability gain",
            c8_stability_gain,
            Duration::from_secs(600),
        ),
        (
            "light-load ordering",
            c9_light_load,
            Duration::from_secs(120),
        ),
        ("message overhead", c10_messages, Duration::from_secs(120)),
        ("fluid drain", c11_fluid_drain, Duration::from_secs(120)),
        (
            "value function identity",
            c12_value_identity,
            Duration::from_secs(1),
        ),
    ];
    let filter: Option<usize> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let mut failed = 0;
    for (k, (name, check, budget)) in criteria.iter().enumerate() {
        if filter.is_some_and(|f| f != k + 1) {
            continue;
        }
        let start = Instant::now();
        let v = check();
        let elapsed = start.elapsed();
        let pass = v.pass && elapsed <= *budget;
        if !pass {
            failed += 1;
        }
        let timing = if elapsed <= *budget {
            String::new()
        } else {
            format!(" [over budget {budget:?}]")
        };
        println!(
            "criterion {:>2} {}: {} ({}) {:.2}s{timing}",
            k + 1,
            name,
            if pass { "PASS" } else { "FAIL" },
            v.detail,
            elapsed.as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
