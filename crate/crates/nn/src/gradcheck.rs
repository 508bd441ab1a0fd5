//! Central finite-difference checks of every layer's backward pass.

use rand::Rng;

use crate::activation::{leaky_relu, leaky_relu_backward, softmax, softmax_backward, tanh, tanh_backward, LEAKY_SLOPE};
use crate::conv::Conv2d;
use crate::dense::Dense;
use crate::norm::LayerNorm;
use crate::pool::{adaptive_avg_pool, adaptive_avg_pool_backward};
use crate::tensor::Tensor;

pub const FD_STEP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub rel: f64,
    /// Applies near zero, where a relative test is meaningless.
    pub abs: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self { rel: 1e-5, abs: 1e-8 }
    }
}

impl Tolerance {
    pub fn accepts(&self, analytic: f64, numeric: f64) -> bool {
        let err = (analytic - numeric).abs();
        err <= self.abs || err <= self.rel * analytic.abs().max(numeric.abs())
    }
}

/// Worst-case disagreement between two gradient vectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Comparison {
    pub max_abs_err: f64,
    pub max_rel_err: f64,
    pub failures: usize,
}

impl Comparison {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

pub fn compare(analytic: &[f64], numeric: &[f64], tol: Tolerance) -> Comparison {
    assert_eq!(analytic.len(), numeric.len(), "gradient lengths differ");
    let mut c = Comparison {
        max_abs_err: 0.0,
        max_rel_err: 0.0,
        failures: 0,
    };
    for (&a, &n) in analytic.iter().zip(numeric) {
        let err = (a - n).abs();
        c.max_abs_err = c.max_abs_err.max(err);
        let scale = a.abs().max(n.abs());
        if scale > 0.0 {
            c.max_rel_err = c.max_rel_err.max(err / scale);
        }
        if !tol.accepts(a, n) || !err.is_finite() {
            c.failures += 1;
        }
    }
    c
}

/// `(f(x + h e_i) − f(x − h e_i)) / 2h` for every coordinate.
pub fn central_difference<F: FnMut(&[f64]) -> f64>(mut f: F, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + h;
            let plus = f(&probe);
            probe[i] = orig - h;
            let minus = f(&probe);
            probe[i] = orig;
            (plus - minus) / (2.0 * h)
        })
        .collect()
}

/// Pass/fail summary of one operation over several random instances.
#[derive(Debug, Clone, PartialEq)]
pub struct OpCheck {
    pub name: String,
    pub instances: usize,
    pub failed_instances: usize,
    pub max_rel_err: f64,
    pub max_abs_err: f64,
}

impl OpCheck {
    pub fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            instances: 0,
            failed_instances: 0,
            max_rel_err: 0.0,
            max_abs_err: 0.0,
        }
    }

    pub fn record(&mut self, c: Comparison) {
        self.instances += 1;
        if !c.passed() {
            self.failed_instances += 1;
        }
        self.max_rel_err = self.max_rel_err.max(c.max_rel_err);
        self.max_abs_err = self.max_abs_err.max(c.max_abs_err);
    }

    pub fn passed(&self) -> bool {
        self.instances > 0 && self.failed_instances == 0
    }
}

fn random_tensor<R: Rng + ?Sized>(rng: &mut R, shape: Vec<usize>) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

/// Away from the LeakyReLU kink.
fn random_off_kink<R: Rng + ?Sized>(rng: &mut R, shape: Vec<usize>) -> Tensor {
    let mut t = random_tensor(rng, shape);
    for v in t.data_mut() {
        if v.abs() < 1e-3 {
            *v = if *v < 0.0 { -0.5 } else { 0.5 };
        }
    }
    t
}

fn weighted_sum(y: &Tensor, r: &Tensor) -> f64 {
    y.data().iter().zip(r.data()).map(|(a, b)| a * b).sum()
}

fn with_values(shape: &[usize], v: &[f64]) -> Tensor {
    Tensor::new(shape.to_vec(), v.to_vec()).unwrap()
}

fn check_dense<R: Rng + ?Sized>(rng: &mut R) -> (Vec<f64>, Vec<f64>) {
    let (i, o, b) = (rng.random_range(2..7), rng.random_range(1..6), rng.random_range(1..4));
    let mut layer = Dense::new(rng, i, o);
    layer.bias.value = random_tensor(rng, vec![o]);
    let x = random_tensor(rng, vec![b, i]);
    let r = random_tensor(rng, vec![b, o]);
    let dx = layer.backward(&x, &r, true).unwrap();
    let mut analytic = dx.into_data();
    analytic.extend_from_slice(&layer.weight.grad);
    analytic.extend_from_slice(&layer.bias.grad);

    let mut numeric = central_difference(|v| weighted_sum(&layer.forward(&with_values(x.shape(), v)).unwrap(), &r), x.data(), FD_STEP);
    numeric.extend(central_difference(
        |v| {
            let mut l = layer.clone();
            l.weight.value.data_mut().copy_from_slice(v);
            weighted_sum(&l.forward(&x).unwrap(), &r)
        },
        layer.weight.value.data(),
        FD_STEP,
    ));
    numeric.extend(central_difference(
        |v| {
            let mut l = layer.clone();
            l.bias.value.data_mut().copy_from_slice(v);
            weighted_sum(&l.forward(&x).unwrap(), &r)
        },
        layer.bias.value.data(),
        FD_STEP,
    ));
    (analytic, numeric)
}

fn check_conv<R: Rng + ?Sized>(rng: &mut R, kernel: usize) -> (Vec<f64>, Vec<f64>) {
    let (ci, co) = (rng.random_range(1..4), rng.random_range(1..4));
    let (h, w, b) = (rng.random_range(2..6), rng.random_range(2..6), rng.random_range(1..3));
    let mut layer = Conv2d::new(rng, ci, co, kernel);
    layer.bias.value = random_tensor(rng, vec![co]);
    let x = random_tensor(rng, vec![b, ci, h, w]);
    let r = random_tensor(rng, vec![b, co, h, w]);
    let (_, cache) = layer.forward(&x).unwrap();
    let dx = layer.backward(&cache, &r, true).unwrap();
    let mut analytic = dx.into_data();
    analytic.extend_from_slice(&layer.weight.grad);
    analytic.extend_from_slice(&layer.bias.grad);

    let mut numeric = central_difference(|v| weighted_sum(&layer.forward(&with_values(x.shape(), v)).unwrap().0, &r), x.data(), FD_STEP);
    numeric.extend(central_difference(
        |v| {
            let mut l = layer.clone();
            l.weight.value.data_mut().copy_from_slice(v);
            weighted_sum(&l.forward(&x).unwrap().0, &r)
        },
        layer.weight.value.data(),
        FD_STEP,
    ));
    numeric.extend(central_difference(
        |v| {
            let mut l = layer.clone();
            l.bias.value.data_mut().copy_from_slice(v);
            weighted_sum(&l.forward(&x).unwrap().0, &r)
        },
        layer.bias.value.data(),
        FD_STEP,
    ));
    (analytic, numeric)
}

fn check_layer_norm<R: Rng + ?Sized>(rng: &mut R) -> (Vec<f64>, Vec<f64>) {
    let (f, b) = (rng.random_range(2..10), rng.random_range(1..4));
    let mut layer = LayerNorm::new(f);
    layer.gain.value = random_tensor(rng, vec![f]);
    layer.shift.value = random_tensor(rng, vec![f]);
    let x = random_tensor(rng, vec![b, f]);
    let r = random_tensor(rng, vec![b, f]);
    let (_, cache) = layer.forward(&x).unwrap();
    let dx = layer.backward(&cache, &r, true).unwrap();
    let mut analytic = dx.into_data();
    analytic.extend_from_slice(&layer.gain.grad);
    analytic.extend_from_slice(&layer.shift.grad);

    let mut numeric = central_difference(|v| weighted_sum(&layer.forward(&with_values(x.shape(), v)).unwrap().0, &r), x.data(), FD_STEP);
    for which in 0..2 {
        let base = if which == 0 { layer.gain.value.data() } else { layer.shift.value.data() };
        numeric.extend(central_difference(
            |v| {
                let mut l = layer.clone();
                let target = if which == 0 { &mut l.gain } else { &mut l.shift };
                target.value.data_mut().copy_from_slice(v);
                weighted_sum(&l.forward(&x).unwrap().0, &r)
            },
            base,
            FD_STEP,
        ));
    }
    (analytic, numeric)
}

fn check_elementwise<R: Rng + ?Sized>(rng: &mut R, which: &str) -> (Vec<f64>, Vec<f64>) {
    let shape = vec![rng.random_range(1..4), rng.random_range(2..8)];
    let x = match which {
        "leaky_relu" => random_off_kink(rng, shape.clone()),
        "softmax" => {
            let mut t = random_tensor(rng, shape.clone());
            t.data_mut().iter_mut().for_each(|v| *v *= 3.0);
            t
        }
        _ => random_tensor(rng, shape.clone()),
    };
    let r = random_tensor(rng, shape.clone());
    let f = |t: &Tensor| match which {
        "leaky_relu" => leaky_relu(t, LEAKY_SLOPE),
        "tanh" => tanh(t),
        _ => softmax(t),
    };
    let y = f(&x);
    let analytic = match which {
        "leaky_relu" => leaky_relu_backward(&x, &r, LEAKY_SLOPE),
        "tanh" => tanh_backward(&y, &r),
        _ => softmax_backward(&y, &r),
    }
    .unwrap();
    let numeric = central_difference(|v| weighted_sum(&f(&with_values(&shape, v)), &r), x.data(), FD_STEP);
    (analytic.into_data(), numeric)
}

fn check_pool<R: Rng + ?Sized>(rng: &mut R) -> (Vec<f64>, Vec<f64>) {
    let shape = vec![rng.random_range(1..3), rng.random_range(1..3), rng.random_range(2..9), rng.random_range(2..9)];
    let x = random_tensor(rng, shape.clone());
    let r = random_tensor(rng, vec![shape[0], shape[1], 3, 3]);
    let analytic = adaptive_avg_pool_backward(&shape, &r).unwrap();
    let numeric = central_difference(|v| weighted_sum(&adaptive_avg_pool(&with_values(&shape, v)).unwrap(), &r), x.data(), FD_STEP);
    (analytic.into_data(), numeric)
}

/// Names of the operations covered by [`check_all_ops`].
pub const OPS: [&str; 9] = [
    "dense",
    "conv3x3",
    "conv1x1",
    "layer_norm",
    "leaky_relu",
    "tanh",
    "softmax",
    "adaptive_avg_pool",
    "dense_param_sharing",
];

/// Checks every operation on `instances` random instances each.
pub fn check_all_ops<R: Rng + ?Sized>(rng: &mut R, instances: usize, tol: Tolerance) -> Vec<OpCheck> {
    check_all_ops_with_fault(rng, instances, tol, None)
}

/// As [`check_all_ops`], but perturbs the first analytic entry of the op
/// named `fault` so the checker can be shown to catch a broken backward.
pub fn check_all_ops_with_fault<R: Rng + ?Sized>(rng: &mut R, instances: usize, tol: Tolerance, fault: Option<&str>) -> Vec<OpCheck> {
    let mut out: Vec<OpCheck> = OPS.iter().map(|n| OpCheck::new(n)).collect();
    for _ in 0..instances {
        let pairs = [
            check_dense(rng),
            check_conv(rng, 3),
            check_conv(rng, 1),
            check_layer_norm(rng),
            check_elementwise(rng, "leaky_relu"),
            check_elementwise(rng, "tanh"),
            check_elementwise(rng, "softmax"),
            check_pool(rng),
            check_accumulation(rng),
        ];
        for ((check, (mut analytic, numeric)), name) in out.iter_mut().zip(pairs).zip(OPS) {
            if fault == Some(name) {
                analytic[0] = analytic[0] * 1.01 + 1e-3;
            }
            check.record(compare(&analytic, &numeric, tol));
        }
    }
    out
}

/// Gradients accumulate across two backward calls through the same layer.
fn check_accumulation<R: Rng + ?Sized>(rng: &mut R) -> (Vec<f64>, Vec<f64>) {
    let (i, o) = (rng.random_range(2..5), rng.random_range(2..5));
    let mut layer = Dense::new(rng, i, o);
    let x1 = random_tensor(rng, vec![1, i]);
    let x2 = random_tensor(rng, vec![2, i]);
    let r1 = random_tensor(rng, vec![1, o]);
    let r2 = random_tensor(rng, vec![2, o]);
    layer.backward(&x1, &r1, true).unwrap();
    layer.backward(&x2, &r2, true).unwrap();
    let numeric = central_difference(
        |v| {
            let mut l = layer.clone();
            l.weight.value.data_mut().copy_from_slice(v);
            weighted_sum(&l.forward(&x1).unwrap(), &r1) + weighted_sum(&l.forward(&x2).unwrap(), &r2)
        },
        layer.weight.value.data(),
        FD_STEP,
    );
    (layer.weight.grad.clone(), numeric)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn tolerance_rule() {
        let t = Tolerance::default();
        assert!(t.accepts(1.0, 1.0 + 5e-6));
        assert!(!t.accepts(1.0, 1.0 + 5e-5));
        assert!(t.accepts(0.0, 5e-9));
        assert!(!t.accepts(0.0, 5e-8));
    }

    #[test]
    fn central_difference_of_quadratic() {
        let g = central_difference(|v| v[0] * v[0] + 3.0 * v[1], &[2.0, -1.0], 1e-4);
        assert!((g[0] - 4.0).abs() < 1e-8 && (g[1] - 3.0).abs() < 1e-8);
    }

    #[test]
    fn every_op_passes() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for c in check_all_ops(&mut rng, 5, Tolerance::default()) {
            assert!(c.passed(), "{c:?}");
        }
    }

    #[test]
    fn injected_fault_is_reported() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let checks = check_all_ops_with_fault(&mut rng, 2, Tolerance::default(), Some("conv3x3"));
        for c in &checks {
            assert_eq!(c.passed(), c.name != "conv3x3", "{c:?}");
        }
    }

    #[test]
    fn broken_gradient_is_caught() {
        let c = compare(&[1.0, 2.0], &[1.0, 2.1], Tolerance::default());
        assert_eq!(c.failures, 1);
        assert!(!c.passed());
    }
}
