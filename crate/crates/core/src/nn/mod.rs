//! Minimal differentiable building blocks with hand-written backpropagation.
//!
//! Everything is 64-bit: gradient checks at 1e-5 and the QP tolerances
//! downstream are unreliable in 32-bit. Blocks cache whatever their backward
//! pass needs; there is no autodiff graph.

mod attention;
mod checkpoint;
mod conv1d;
mod gradcheck;
mod gru;
mod linear;
mod lstm;
mod optim;

pub use attention::{Attention, AttentionCache};
pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_FORMAT_VERSION};
pub use conv1d::{Conv1d, Conv1dCache};
pub use gradcheck::{grad_check, GradCheckReport};
pub use gru::{GruCache, GruCell};
pub use linear::{Embedding, Linear, LinearCache};
pub use lstm::{LstmCache, LstmCell};
pub use optim::{OptimConfig, OptimMode, Optimizer};

use ndarray::{Array1, Array2};
use rand::Rng;

/// A matrix parameter with its gradient accumulator.
#[derive(Debug, Clone)]
pub struct PMat {
    pub v: Array2<f64>,
    pub g: Array2<f64>,
}

impl PMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { v: Array2::zeros((rows, cols)), g: Array2::zeros((rows, cols)) }
    }

    /// Uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)].
    pub fn uniform<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (cols as f64).sqrt();
        let v = Array2::from_shape_fn((rows, cols), |_| rng.random_range(-bound..bound));
        Self { g: Array2::zeros((rows, cols)), v }
    }

    /// Gaussian init with the given standard deviation (oracle networks use
    /// std 1.0 so their conditionals are peaked rather than near-uniform).
    pub fn gaussian<R: Rng>(rows: usize, cols: usize, std: f64, rng: &mut R) -> Self {
        let dist = rand_distr::Normal::new(0.0, std).expect("std must be finite");
        let v = Array2::from_shape_fn((rows, cols), |_| rand_distr::Distribution::sample(&dist, rng));
        Self { g: Array2::zeros((rows, cols)), v }
    }
}

/// A vector parameter with its gradient accumulator.
#[derive(Debug, Clone)]
pub struct PVec {
    pub v: Array1<f64>,
    pub g: Array1<f64>,
}

impl PVec {
    pub fn zeros(n: usize) -> Self {
        Self { v: Array1::zeros(n), g: Array1::zeros(n) }
    }

    pub fn uniform<R: Rng>(n: usize, fan_in: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (fan_in as f64).sqrt();
        let v = Array1::from_shape_fn(n, |_| rng.random_range(-bound..bound));
        Self { g: Array1::zeros(n), v }
    }

    pub fn gaussian<R: Rng>(n: usize, std: f64, rng: &mut R) -> Self {
        let dist = rand_distr::Normal::new(0.0, std).expect("std must be finite");
        let v = Array1::from_shape_fn(n, |_| rand_distr::Distribution::sample(&dist, rng));
        Self { g: Array1::zeros(n), v }
    }
}

/// Mutable view of one named parameter.
pub enum Slot<'a> {
    M(&'a mut PMat),
    V(&'a mut PVec),
}

/// Shared view of one named parameter.
pub enum SlotRef<'a> {
    M(&'a PMat),
    V(&'a PVec),
}

/// A collection of named parameters with parallel gradients. Composites
/// prefix child names with a dot, e.g. `trunk.w_update`.
pub trait Params {
    fn visit(&self, f: &mut dyn FnMut(&str, SlotRef<'_>));
    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, Slot<'_>));

    fn zero_grads(&mut self) {
        self.visit_mut(&mut |_, slot| match slot {
            Slot::M(p) => p.g.fill(0.0),
            Slot::V(p) => p.g.fill(0.0),
        });
    }

    /// Total number of scalar parameters.
    fn param_count(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |_, slot| {
            n += match slot {
                SlotRef::M(p) => p.v.len(),
                SlotRef::V(p) => p.v.len(),
            }
        });
        n
    }

    fn grads_finite(&self) -> bool {
        let mut ok = true;
        self.visit(&mut |_, slot| {
            let finite = match slot {
                SlotRef::M(p) => p.g.iter().all(|x| x.is_finite()),
                SlotRef::V(p) => p.g.iter().all(|x| x.is_finite()),
            };
            ok &= finite;
        });
        ok
    }

    fn values_finite(&self) -> bool {
        let mut ok = true;
        self.visit(&mut |_, slot| {
            let finite = match slot {
                SlotRef::M(p) => p.v.iter().all(|x| x.is_finite()),
                SlotRef::V(p) => p.v.iter().all(|x| x.is_finite()),
            };
            ok &= finite;
        });
        ok
    }
}

/// Forward a `visit` call to a child with a name prefix.
pub fn visit_child(prefix: &str, child: &dyn Params, f: &mut dyn FnMut(&str, SlotRef<'_>)) {
    child.visit(&mut |name, slot| f(&format!("{prefix}.{name}"), slot));
}

/// Forward a `visit_mut` call to a child with a name prefix.
pub fn visit_child_mut(prefix: &str, child: &mut dyn Params, f: &mut dyn FnMut(&str, Slot<'_>)) {
    child.visit_mut(&mut |name, slot| f(&format!("{prefix}.{name}"), slot));
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn sigmoid_arr(x: &Array1<f64>) -> Array1<f64> {
    x.mapv(sigmoid)
}

/// Numerically stable softmax (max subtraction is semantics-preserving).
pub fn softmax(logits: &Array1<f64>) -> Array1<f64> {
    let m = logits.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let exps = logits.mapv(|v| (v - m).exp());
    let sum = exps.sum();
    exps / sum
}

/// Stable log-softmax.
pub fn log_softmax(logits: &Array1<f64>) -> Array1<f64> {
    let m = logits.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let log_sum = logits.mapv(|v| (v - m).exp()).sum().ln() + m;
    logits.mapv(|v| v - log_sum)
}

/// grad += dy (outer) x, without allocating the outer product.
pub fn add_outer(grad: &mut Array2<f64>, dy: &Array1<f64>, x: &Array1<f64>) {
    let xs = x.as_slice().expect("contiguous");
    for (mut row, &d) in grad.rows_mut().into_iter().zip(dy.iter()) {
        if d == 0.0 {
            continue;
        }
        let rs = row.as_slice_mut().expect("contiguous");
        for (r, &xv) in rs.iter_mut().zip(xs) {
            *r += d * xv;
        }
    }
}

/// Concatenate two vectors.
pub fn concat(a: &Array1<f64>, b: &Array1<f64>) -> Array1<f64> {
    let mut out = Array1::zeros(a.len() + b.len());
    out.slice_mut(ndarray::s![..a.len()]).assign(a);
    out.slice_mut(ndarray::s![a.len()..]).assign(b);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn softmax_is_stable_under_shift() {
        let a = softmax(&array![1.0, 2.0, 3.0]);
        let b = softmax(&array![1001.0, 1002.0, 1003.0]);
        for (x, y) in a.iter().zip(b.iter()) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(a.sum(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn log_softmax_matches_softmax_log() {
        let l = array![0.3, -1.2, 2.0, 0.0];
        let ls = log_softmax(&l);
        let s = softmax(&l);
        for (a, b) in ls.iter().zip(s.iter()) {
            assert_abs_diff_eq!(a.exp(), b, epsilon = 1e-12);
        }
    }

    #[test]
    fn outer_accumulates() {
        let mut g = Array2::zeros((2, 3));
        add_outer(&mut g, &array![1.0, 2.0], &array![3.0, 4.0, 5.0]);
        add_outer(&mut g, &array![1.0, 0.0], &array![1.0, 1.0, 1.0]);
        assert_eq!(g, array![[4.0, 5.0, 6.0], [6.0, 8.0, 10.0]]);
    }
}
