use igpm_core::agent::{
    greedy, select_action, td_loss, td_loss_and_grad, Action, Observation, QNetwork, Transition, PARAM_COUNT,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_net(rng: &mut ChaCha8Rng) -> QNetwork {
    let flat: Vec<f64> = (0..PARAM_COUNT).map(|_| rng.random_range(-1.0..1.0)).collect();
    QNetwork::from_flat(&flat).unwrap()
}

fn random_transition(rng: &mut ChaCha8Rng) -> Transition {
    let mut obs = || Observation::new(rng.random_range(0.0..3.0), rng.random_range(0.0..1.0));
    let (obs, next_obs) = (obs(), obs());
    Transition {
        obs,
        action: Action::from_index(rng.random_range(0..2)),
        reward: rng.random_range(-1.0..1.0),
        next_obs,
    }
}

#[test]
fn td_gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let h = 1e-6;
    for trial in 0..100 {
        let net = random_net(&mut rng);
        let target = random_net(&mut rng);
        let batch: Vec<Transition> = (0..4).map(|_| random_transition(&mut rng)).collect();
        let (loss, grad) = td_loss_and_grad(&net, &target, &batch, 0.9);
        assert!((loss - td_loss(&net, &target, &batch, 0.9)).abs() < 1e-12);
        let p = net.to_flat();
        let analytic = grad.to_flat();
        let numeric: Vec<f64> = (0..PARAM_COUNT)
            .map(|i| {
                let mut plus = p.clone();
                let mut minus = p.clone();
                plus[i] += h;
                minus[i] -= h;
                let lp = td_loss(&QNetwork::from_flat(&plus).unwrap(), &target, &batch, 0.9);
                let lm = td_loss(&QNetwork::from_flat(&minus).unwrap(), &target, &batch, 0.9);
                (lp - lm) / (2.0 * h)
            })
            .collect();
        let diff: f64 = analytic.iter().zip(&numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let scale: f64 =
            analytic.iter().map(|a| a * a).sum::<f64>().sqrt() + numeric.iter().map(|b| b * b).sum::<f64>().sqrt();
        let rel = if scale == 0.0 { 0.0 } else { diff / scale };
        assert!(rel <= 1e-4, "trial {trial}: relative error {rel}");
    }
}

#[test]
fn epsilon_greedy_frequencies_within_six_sigma() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let draws = 10_000u32;
    for epsilon in [0.0, 0.5, 1.0] {
        let net = random_net(&mut rng);
        let obs = Observation::new(0.7, 0.3);
        let best = greedy(net.forward(&obs));
        let hits = (0..draws).filter(|_| select_action(&net, &obs, epsilon, &mut rng) == best).count() as f64;
        let p = 1.0 - epsilon / 2.0;
        let n = draws as f64;
        let sigma = (n * p * (1.0 - p)).sqrt();
        assert!((hits - n * p).abs() <= 6.0 * sigma, "epsilon {epsilon}: {hits} greedy picks");
    }
}
