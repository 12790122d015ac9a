//! Statistical invariants of the solvers that need replication-scale
//! sampling: strong-consistency counts and CLT variance windows. These run
//! at the library's default configuration (projection-midpoint starts).

use adais::harness::{
    run_experiment, toy_asymptotic_variance, toy_density, toy_true_quantile, ExperimentPlan,
    IsMode, Scenario, SolverName,
};
use adais::samplers::rm_sa_asymptotic_variance;
use adais::{
    run_saa_adaptive, AdaptiveRunConfig, NormalShiftFamily, QuantileProblem, RunSeed,
    ScalarProblem, Tail, TruncationSchedule,
};
use rayon::prelude::*;

/// Strong-consistency check: by n = 10^5 at p = 0.99 the adaptive SAA
/// estimate is within 0.05 of the true quantile on at least 195 of 200
/// seeds, for every toy family.
#[test]
fn saa_consistency_195_of_200() {
    let scenarios = [
        Scenario::Normal,
        Scenario::Exponential { lambda: 2.0 },
        Scenario::Pareto { lambda: 2.0 },
    ];
    for scenario in scenarios {
        let p = 0.99;
        let q_star = toy_true_quantile(&scenario, p).unwrap();
        // Pareto quantiles are an order of magnitude larger; keep the
        // absolute 0.05 criterion on the normal/exponential scale and use
        // the same relative accuracy for Pareto.
        let tol = match scenario {
            Scenario::Pareto { .. } => 0.05 * q_star / 3.0,
            _ => 0.05,
        };
        let hits: u32 = (0..200u32)
            .into_par_iter()
            .map(|rep| {
                let family = match scenario {
                    Scenario::Normal => ToyFam::N(NormalShiftFamily),
                    Scenario::Exponential { lambda } => {
                        ToyFam::E(adais::ExponentialTiltFamily::new(lambda).unwrap())
                    }
                    Scenario::Pareto { lambda } => {
                        ToyFam::P(adais::ParetoTiltFamily::new(lambda).unwrap())
                    }
                    Scenario::Portfolio { .. } => unreachable!(),
                };
                let problem: ScalarProblem<f64> = ScalarProblem::Quantile(
                    QuantileProblem::new(|x: &f64| *x, p, Tail::Upper).unwrap(),
                );
                let truncation = match scenario {
                    Scenario::Normal => TruncationSchedule::LogGrowth { a: 5.0, eps: 0.1 },
                    Scenario::Exponential { lambda } | Scenario::Pareto { lambda } => {
                        TruncationSchedule::RateTilt {
                            c: 1.0,
                            eps: 0.1,
                            floor: 0.0,
                            hi: lambda,
                        }
                    }
                    Scenario::Portfolio { .. } => unreachable!(),
                };
                let theta0 = match scenario {
                    Scenario::Pareto { .. } => 5.0,
                    _ => 2.5,
                };
                let cfg = AdaptiveRunConfig::saa(
                    truncation,
                    theta0,
                    100_000,
                    RunSeed::new(11, 7_000 + rep as u64),
                )
                .with_trace(adais::trace::TraceSpec::final_only());
                let est = match &family {
                    ToyFam::N(f) => run_saa_adaptive(&problem, f, &cfg).unwrap().final_estimate,
                    ToyFam::E(f) => run_saa_adaptive(&problem, f, &cfg).unwrap().final_estimate,
                    ToyFam::P(f) => run_saa_adaptive(&problem, f, &cfg).unwrap().final_estimate,
                };
                u32::from((est - q_star).abs() < tol)
            })
            .sum();
        assert!(
            hits >= 195,
            "{}: only {hits}/200 within tolerance",
            scenario.label()
        );
    }
}

enum ToyFam {
    N(NormalShiftFamily),
    E(adais::ExponentialTiltFamily),
    P(adais::ParetoTiltFamily),
}

/// CLT variance matching at the default (midpoint) initialization for the
/// normal scenario: n Var over 200 seeds at n = 128000 lands within a
/// factor [0.5, 2] of the closed-form asymptotic variance; SAA and PR-SA
/// share the formula, RM-SA uses the γ²/(2γf' - 1) variant (which equals
/// the shared one at the optimal gain used here). The level is 0.99:
/// deeper levels leave RM-SA with a transient still worth ~2x at this
/// budget (the reference n = 128000 row shows the same ~2x).
#[test]
fn clt_variance_windows_normal() {
    let p = 0.99;
    let n = 128_000u64;
    let plan = ExperimentPlan {
        scenario: Scenario::Normal,
        p_levels: vec![p],
        sample_sizes: vec![n],
        replications: 200,
        solvers: vec![SolverName::Saa, SolverName::RmSa, SolverName::PrSa],
        is_modes: vec![IsMode::WithIs],
        seed_base: 13,
        pr_burn_in: 100,
        gamma: None,
        sa_projection: None,
        theta0: None,
    };
    let table = run_experiment(&plan).unwrap();
    let av = toy_asymptotic_variance(&Scenario::Normal, p).unwrap();
    let q_star = toy_true_quantile(&Scenario::Normal, p).unwrap();
    let density = toy_density(&Scenario::Normal, q_star).unwrap();
    let gamma = 1.0 / density;
    let estimator_variance = av * density * density;
    let rm_av = rm_sa_asymptotic_variance(gamma, estimator_variance, density).unwrap();
    for row in &table.rows {
        let predicted = if row.solver == "rm-sa" { rm_av } else { av };
        let ratio = row.variance * n as f64 / predicted;
        assert!(
            (0.5..=2.0).contains(&ratio),
            "{}: n*Var {} vs predicted {predicted} (ratio {ratio})",
            row.solver,
            row.variance * n as f64
        );
    }
}
