use ampkit::se::{
    find_bp_threshold, mmse_monte_carlo, se_fixed_point, se_step_scalar, se_trajectory_coupled, CoupledSeParams,
    SeParams, SePrior, StateEvolution, ThresholdOptions,
};
use ampkit::{CouplingEnsemble, GaussBernoulliPrior};

fn prior() -> GaussBernoulliPrior {
    GaussBernoulliPrior::new(0.1, 0.0, 1.0)
}

#[test]
fn success_side_reaches_zero_error() {
    let se = StateEvolution::new(SePrior::Real(prior()));
    let fp = se_fixed_point(&se, &SeParams::new(0.0, 0.35), 0.1, 1e-14, 100_000).unwrap();
    assert!(fp.converged);
    assert!(fp.e < 1e-8, "E* = {}", fp.e);
    let full = se_fixed_point(&se, &SeParams::new(0.0, 1.0), 0.1, 1e-14, 100_000).unwrap();
    assert!(full.e < 1e-10);
}

#[test]
fn threshold_brackets_the_transition() {
    let opts = ThresholdOptions::default();
    for se in [
        StateEvolution::new(SePrior::Real(prior())),
        StateEvolution::new(SePrior::Complex(prior())),
    ] {
        let a = find_bp_threshold(&se, 0.0, 1.0, (0.1, 0.9), &opts).unwrap();
        assert!(a > 0.1 && a < 0.35, "threshold {a}");
        let below = se_fixed_point(&se, &SeParams::new(0.0, a - 2e-3), 0.1, 1e-13, 100_000).unwrap();
        assert!(below.e > 1e-4, "below: {}", below.e);
        let above = se_fixed_point(&se, &SeParams::new(0.0, a + 2e-3), 0.1, 1e-13, 100_000).unwrap();
        assert!(above.e < 1e-8, "above: {}", above.e);
    }
}

#[test]
fn complex_transition_lies_below_real() {
    let opts = ThresholdOptions::default();
    let real = find_bp_threshold(&StateEvolution::new(SePrior::Real(prior())), 0.0, 1.0, (0.1, 0.9), &opts).unwrap();
    let cplx =
        find_bp_threshold(&StateEvolution::new(SePrior::Complex(prior())), 0.0, 1.0, (0.1, 0.9), &opts).unwrap();
    assert!(cplx < real, "complex {cplx} real {real}");
}

#[test]
fn threshold_shrinks_with_sparsity() {
    let opts = ThresholdOptions {
        width: 1e-3,
        ..ThresholdOptions::default()
    };
    let mut last = f64::INFINITY;
    for rho in [0.2, 0.1, 0.05, 0.01] {
        let se = StateEvolution::new(SePrior::Real(GaussBernoulliPrior::new(rho, 0.0, 1.0)));
        let a = find_bp_threshold(&se, 0.0, 1.0, (rho, 0.99), &opts).unwrap();
        assert!(a > rho && a < last, "rho {rho}: {a}");
        last = a;
    }
}

#[test]
fn one_step_agrees_with_monte_carlo() {
    for sp in [SePrior::Real(prior()), SePrior::Complex(prior())] {
        let se = StateEvolution::new(sp);
        let params = SeParams::new(0.0, 0.3);
        let step = se_step_scalar(&se, 0.1, &params).unwrap();
        let mc = mmse_monte_carlo(&sp, params.effective_noise(0.1), 1_000_000, 5).unwrap();
        assert!(((step - mc) / step).abs() < 5e-3, "{step} vs {mc}");
    }
}

#[test]
fn coupled_trajectory_collapses_seed_first() {
    let ens = CouplingEnsemble {
        l_c: 8,
        l_r: 10,
        w: 1,
        sqrt_j: 0.1,
        alpha: 0.22,
        beta_seed: 1.36,
    };
    let se = StateEvolution::new(SePrior::Real(prior()));
    let params = CoupledSeParams::from_ensemble(&ens, 0.0, 1.0).unwrap();
    let traj = se_trajectory_coupled(&se, &params, &[0.1; 8], 3000).unwrap();
    let crossing = |p: usize| traj.iter().position(|e| e[p] < 1e-6);
    let times: Vec<usize> = (0..8).map(|p| crossing(p).expect("block did not converge")).collect();
    assert!(times.windows(2).all(|w| w[1] >= w[0]), "crossings {times:?}");
    assert!(times[1] > times[0] && times[7] > times[0] + 20, "crossings {times:?}");

}

#[test]
fn coupling_succeeds_below_the_uncoupled_transition() {
    let se = StateEvolution::new(SePrior::Real(prior()));
    let flat = se_fixed_point(&se, &SeParams::new(0.0, 0.19), 0.1, 1e-13, 100_000).unwrap();
    assert!(flat.e > 1e-3, "uncoupled {}", flat.e);
    let ens = CouplingEnsemble {
        l_c: 16,
        l_r: 17,
        w: 2,
        sqrt_j: 0.4,
        alpha: 0.19,
        beta_seed: 1.5,
    };
    let params = CoupledSeParams::from_ensemble(&ens, 0.0, 1.0).unwrap();
    let fp = ampkit::se::se_fixed_point_coupled(&se, &params, &[0.1; 16], 1e-13, 100_000).unwrap();
    assert!(fp.e.iter().all(|&e| e < 1e-8), "coupled {:?}", fp.e);
}
