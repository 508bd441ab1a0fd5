use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use simstack_ddpg::action::Dims;
use simstack_ddpg::actor::Actor;
use simstack_ddpg::critic::Critic;
use simstack_nn::gradcheck::{central_difference, compare, Tolerance, FD_STEP};
use simstack_nn::tensor::Module;
use simstack_nn::Tensor;

fn random_tensor(rng: &mut ChaCha8Rng, shape: Vec<usize>) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn dot(a: &Tensor, w: &[f64]) -> f64 {
    a.data().iter().zip(w).map(|(x, y)| x * y).sum()
}

#[test]
fn critic_action_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let dims = Dims::new(4, 2, 2, false).unwrap();
    let mut critic = Critic::new(&mut rng, &dims, 2, 0.01);
    let s = random_tensor(&mut rng, vec![3, dims.state_dim()]);
    let a = random_tensor(&mut rng, vec![3, dims.action_dim()]);
    let (_, cache) = critic.forward(&s, &a).unwrap();
    let dq = Tensor::filled(vec![3, 1], 1.0);
    let before: Vec<Vec<f64>> = critic.params().iter().map(|p| p.grad.clone()).collect();
    let da = critic.backward(&cache, &dq, false).unwrap();
    let after: Vec<Vec<f64>> = critic.params().iter().map(|p| p.grad.clone()).collect();
    assert_eq!(before, after, "frozen backward must not touch parameter gradients");

    let num = central_difference(
        |x| {
            let a2 = Tensor::new(a.shape().to_vec(), x.to_vec()).unwrap();
            critic.forward(&s, &a2).unwrap().0.data().iter().sum()
        },
        a.data(),
        FD_STEP,
    );
    let c = compare(da.data(), &num, Tolerance::default());
    assert!(c.passed(), "{c:?}");
}

#[test]
fn critic_parameter_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut critic = Critic::with_sizes(&mut rng, 5, 3, 6, 0.01);
    let s = random_tensor(&mut rng, vec![4, 5]);
    let a = random_tensor(&mut rng, vec![4, 3]);
    let (_, cache) = critic.forward(&s, &a).unwrap();
    critic.zero_grad();
    critic.backward(&cache, &Tensor::filled(vec![4, 1], 1.0), true).unwrap();
    let analytic: Vec<Vec<f64>> = critic.params().iter().map(|p| p.grad.clone()).collect();
    for (pi, grads) in analytic.iter().enumerate() {
        let mut probe = critic.clone();
        let num = central_difference(
            |x| {
                probe.params_mut()[pi].value.data_mut().copy_from_slice(x);
                probe.forward(&s, &a).unwrap().0.data().iter().sum()
            },
            critic.params()[pi].value.data(),
            FD_STEP,
        );
        let c = compare(grads, &num, Tolerance::default());
        assert!(c.passed(), "param {pi}: {c:?}");
    }
}

fn check_actor(dims: Dims, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut actor = Actor::new(&mut rng, dims, 0.5, 3, 1, 0.01);
    let s = random_tensor(&mut rng, vec![2, dims.state_dim()]);
    let w: Vec<f64> = (0..2 * dims.action_dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let (_, cache) = actor.forward(&s).unwrap();
    actor.zero_grad();
    actor
        .backward(&cache, &Tensor::new(vec![2, dims.action_dim()], w.clone()).unwrap())
        .unwrap();
    let analytic: Vec<Vec<f64>> = actor.params().iter().map(|p| p.grad.clone()).collect();
    for (pi, grads) in analytic.iter().enumerate() {
        // Every entry of small tensors, a strided subset of large ones.
        let stride = (grads.len() / 40).max(1);
        let mut probe = actor.clone();
        let base = actor.params()[pi].value.data().to_vec();
        for j in (0..grads.len()).step_by(stride) {
            let num = central_difference(
                |x| {
                    probe.params_mut()[pi].value.data_mut()[j] = x[0];
                    dot(&probe.forward(&s).unwrap().0, &w)
                },
                &base[j..=j],
                FD_STEP,
            );
            probe.params_mut()[pi].value.data_mut()[j] = base[j];
            let c = compare(&grads[j..=j], &num, Tolerance::default());
            assert!(c.passed(), "param {pi}[{j}]: {c:?}");
        }
    }
}

#[test]
fn actor_gradients_match_finite_differences() {
    check_actor(Dims::new(4, 1, 2, false).unwrap(), 21);
    check_actor(Dims::new(9, 2, 2, false).unwrap(), 22);
}

#[test]
fn phase_only_actor_gradients_match_finite_differences() {
    check_actor(Dims::new(4, 2, 3, true).unwrap(), 23);
}
