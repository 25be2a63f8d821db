mod common;

use speclb::analytic::second_visit_mean;
use speclb::dists::{DistributionSpec, SxMode, SxModel};

fn within(analytic: f64, (mc, se): (f64, f64), k: f64) -> bool {
    (analytic - mc).abs() <= k * se
}

fn models() -> Vec<(SxModel, f64, f64)> {
    vec![
        (common::bimodal(), 1.0, 10.0),
        (common::bimodal(), 1.0, 100.0),
        (
            SxModel::unit_size(DistributionSpec::Pareto {
                alpha: 2.5,
                s_m: 1.0,
            }),
            1.0,
            3.0,
        ),
        (
            SxModel::new(
                DistributionSpec::hyperexponential(vec![0.9, 0.1], vec![1.0, 0.1]),
                DistributionSpec::Uniform { a: 0.5, b: 1.5 },
                SxMode::Restart,
            ),
            2.0,
            1.5,
        ),
        (
            SxModel::new(
                DistributionSpec::Erlang { k: 3, rate: 2.0 },
                DistributionSpec::bimodal(1.0, 4.0, 0.6),
                SxMode::Resume,
            ),
            1.0,
            2.0,
        ),
        (
            SxModel::new(
                DistributionSpec::Uniform { a: 1.0, b: 3.0 },
                DistributionSpec::Exponential { rate: 1.0 },
                SxMode::Identical,
            ),
            0.5,
            4.0,
        ),
    ]
}

#[test]
fn moments_match_monte_carlo() {
    for (k, (m, mu, tau)) in models().into_iter().enumerate() {
        let exact = m.moments(mu, tau).unwrap();
        let mc = m.mc_oracle(mu, tau, 400_000, 100 + k as u64);
        assert!(
            within(exact.mean_truncated, mc.mean_truncated, 4.0),
            "model {k}: truncated mean"
        );
        assert!(
            within(exact.p_timeout, mc.p_timeout, 4.0),
            "model {k}: timeout probability"
        );
        assert!(
            within(exact.truncated_second, mc.truncated_second, 4.0),
            "model {k}: truncated second"
        );
        if let (Some(a), Some(b)) = (exact.eta2_cond_mean, mc.eta2_cond_mean) {
            assert!(within(a, b, 4.0), "model {k}: restart mean {a} vs {b:?}");
        }
    }
}

#[test]
fn restart_mean_for_uniform_sizes() {
    let m = SxModel::new(
        DistributionSpec::bimodal(10.0, 1e3, 0.99),
        DistributionSpec::Uniform { a: 0.0, b: 2.0 },
        SxMode::Restart,
    );
    let exact = second_visit_mean(&m, 15.0).unwrap();
    let mc = m.mc_oracle(1.0, 15.0, 1_000_000, 7).eta2_cond_mean.unwrap();
    assert!(within(exact, mc, 3.0), "{exact} vs {mc:?}");
}

#[test]
fn samples_match_quantiles() {
    use speclb::dists::{stream, Purpose};
    let laws = [
        DistributionSpec::Pareto {
            alpha: 1.5,
            s_m: 1.0,
        },
        DistributionSpec::hyperexponential(vec![0.99, 0.01], vec![1.0, 1.0 / 99.0]),
        DistributionSpec::Erlang { k: 2, rate: 1.0 },
        DistributionSpec::TruncatedPareto {
            alpha: 1.2,
            s_m: 1.0,
            b: 100.0,
        },
    ];
    for (k, law) in laws.iter().enumerate() {
        let mut rng = stream(3, Purpose::Oracle, k as u64);
        let n = 200_000;
        for p in [0.1, 0.5, 0.9, 0.99] {
            let q = law.quantile(p);
            let below = (0..n).filter(|_| law.sample(&mut rng) <= q).count() as f64 / n as f64;
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!((below - p).abs() <= 4.0 * se, "{law:?} at {p}: {below}");
        }
    }
}
