//! Gated recurrent unit over the concatenated [h_prev, x] input.

use ndarray::{s, Array1, Array2};
use rand::Rng;

use super::{add_outer, concat, sigmoid_arr, PMat, Params, Slot, SlotRef};
use crate::error::{Error, Result};

/// GRU cell:
///
/// ```text
/// z = sigma(W_z [h_prev, x])
/// r = sigma(W_r [h_prev, x])
/// h~ = tanh(W [r * h_prev, x])
/// h = (1 - z) * h_prev + z * h~
/// ```
#[derive(Debug, Clone)]
pub struct GruCell {
    pub w_update: PMat,
    pub w_reset: PMat,
    pub w_cand: PMat,
    hidden: usize,
    input: usize,
}

/// Everything the backward pass needs from one forward step.
pub struct GruCache {
    h_prev: Array1<f64>,
    x: Array1<f64>,
    z: Array1<f64>,
    r: Array1<f64>,
    h_cand: Array1<f64>,
}

impl GruCell {
    pub fn new<R: Rng>(hidden: usize, input: usize, rng: &mut R) -> Self {
        let cols = hidden + input;
        Self {
            w_update: PMat::uniform(hidden, cols, rng),
            w_reset: PMat::uniform(hidden, cols, rng),
            w_cand: PMat::uniform(hidden, cols, rng),
            hidden,
            input,
        }
    }

    /// Gaussian-initialized cell for frozen oracle networks.
    pub fn gaussian<R: Rng>(hidden: usize, input: usize, std: f64, rng: &mut R) -> Self {
        let cols = hidden + input;
        Self {
            w_update: PMat::gaussian(hidden, cols, std, rng),
            w_reset: PMat::gaussian(hidden, cols, std, rng),
            w_cand: PMat::gaussian(hidden, cols, std, rng),
            hidden,
            input,
        }
    }

    pub fn hidden_size(&self) -> usize {
        self.hidden
    }

    pub fn input_size(&self) -> usize {
        self.input
    }

    pub fn initial_state(&self) -> Array1<f64> {
        Array1::zeros(self.hidden)
    }

    pub fn step(&self, h_prev: &Array1<f64>, x: &Array1<f64>) -> Result<(Array1<f64>, GruCache)> {
        if h_prev.len() != self.hidden || x.len() != self.input {
            return Err(Error::Shape(format!(
                "gru expects h={}, x={}, got h={}, x={}",
                self.hidden,
                self.input,
                h_prev.len(),
                x.len()
            )));
        }
        let u = concat(h_prev, x);
        let z = sigmoid_arr(&self.w_update.v.dot(&u));
        let r = sigmoid_arr(&self.w_reset.v.dot(&u));
        let uc = concat(&(&r * h_prev), x);
        let h_cand = self.w_cand.v.dot(&uc).mapv(f64::tanh);
        let h = (1.0 - &z) * h_prev + &z * &h_cand;
        Ok((h, GruCache { h_prev: h_prev.clone(), x: x.clone(), z, r, h_cand }))
    }

    /// Fast forward without building a cache, for sampling rollouts.
    pub fn step_nograd(&self, h_prev: &Array1<f64>, x: &Array1<f64>) -> Array1<f64> {
        let u = concat(h_prev, x);
        let z = sigmoid_arr(&self.w_update.v.dot(&u));
        let r = sigmoid_arr(&self.w_reset.v.dot(&u));
        let uc = concat(&(&r * h_prev), x);
        let h_cand = self.w_cand.v.dot(&uc).mapv(f64::tanh);
        (1.0 - &z) * h_prev + &z * &h_cand
    }

    /// Accumulates weight gradients; returns (d h_prev, d x).
    pub fn backstep(&mut self, cache: &GruCache, dh: &Array1<f64>) -> (Array1<f64>, Array1<f64>) {
        let GruCache { h_prev, x, z, r, h_cand } = cache;
        let hid = self.hidden;

        let dh_cand = dh * z;
        let dz = dh * &(h_cand - h_prev);
        let mut dh_prev = dh * &(1.0 - z);

        // candidate: h~ = tanh(W [r*h_prev, x])
        let da_c = &dh_cand * &h_cand.mapv(|v| 1.0 - v * v);
        let uc = concat(&(r * h_prev), x);
        add_outer(&mut self.w_cand.g, &da_c, &uc);
        let duc = self.w_cand.v.t().dot(&da_c);
        let d_rh = duc.slice(s![..hid]).to_owned();
        let mut dx = duc.slice(s![hid..]).to_owned();
        let dr = &d_rh * h_prev;
        dh_prev += &(&d_rh * r);

        // gates over u = [h_prev, x]
        let u = concat(h_prev, x);
        let da_z = &dz * &(z * &(1.0 - z));
        add_outer(&mut self.w_update.g, &da_z, &u);
        let mut du = self.w_update.v.t().dot(&da_z);
        let da_r = &dr * &(r * &(1.0 - r));
        add_outer(&mut self.w_reset.g, &da_r, &u);
        du += &self.w_reset.v.t().dot(&da_r);

        dh_prev += &du.slice(s![..hid]);
        dx += &du.slice(s![hid..]);
        (dh_prev, dx)
    }
}

impl Params for GruCell {
    fn visit(&self, f: &mut dyn FnMut(&str, SlotRef<'_>)) {
        f("w_update", SlotRef::M(&self.w_update));
        f("w_reset", SlotRef::M(&self.w_reset));
        f("w_cand", SlotRef::M(&self.w_cand));
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, Slot<'_>)) {
        f("w_update", Slot::M(&mut self.w_update));
        f("w_reset", Slot::M(&mut self.w_reset));
        f("w_cand", Slot::M(&mut self.w_cand));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::grad_check;
    use approx::assert_abs_diff_eq;
    use ndarray::Array1;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_weights_halve_previous_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut cell = GruCell::new(3, 2, &mut rng);
        cell.w_update.v.fill(0.0);
        cell.w_reset.v.fill(0.0);
        cell.w_cand.v.fill(0.0);
        let h_prev = Array1::from_vec(vec![1.0, -2.0, 0.5]);
        let x = Array1::from_vec(vec![0.3, 0.7]);
        let (h, cache) = cell.step(&h_prev, &x).unwrap();
        // z = r = 0.5, h~ = 0 -> h = 0.5 * h_prev
        for i in 0..3 {
            assert_abs_diff_eq!(h[i], 0.5 * h_prev[i], epsilon = 1e-12);
            assert_abs_diff_eq!(cache.z[i], 0.5, epsilon = 1e-12);
            assert_abs_diff_eq!(cache.r[i], 0.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn zero_weights_zero_state_stay_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut cell = GruCell::new(3, 2, &mut rng);
        cell.w_update.v.fill(0.0);
        cell.w_reset.v.fill(0.0);
        cell.w_cand.v.fill(0.0);
        let (h, _) = cell.step(&Array1::zeros(3), &Array1::zeros(2)).unwrap();
        assert!(h.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn output_is_convex_combination() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cell = GruCell::new(8, 4, &mut rng);
        let h_prev = Array1::from_shape_fn(8, |i| (i as f64 * 0.71).sin() * 2.0);
        let x = Array1::from_shape_fn(4, |i| (i as f64 * 1.3).cos());
        let (h, _) = cell.step(&h_prev, &x).unwrap();
        let bound = h_prev.iter().fold(1.0f64, |a, &b| a.max(b.abs()));
        for &v in h.iter() {
            assert!(v.abs() <= bound + 1e-12);
        }
    }

    #[test]
    fn rejects_mismatched_dims() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cell = GruCell::new(3, 2, &mut rng);
        assert!(cell.step(&Array1::zeros(4), &Array1::zeros(2)).is_err());
        assert!(cell.step(&Array1::zeros(3), &Array1::zeros(1)).is_err());
    }

    #[test]
    fn single_step_gradient_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut cell = GruCell::new(5, 3, &mut rng);
        let h0 = Array1::from_shape_fn(5, |i| 0.2 * i as f64 - 0.4);
        let x = Array1::from_shape_fn(3, |i| 0.5 - 0.3 * i as f64);
        let report = grad_check(
            &mut cell,
            |m, with_grad| {
                m.zero_grads();
                let (h, cache) = m.step(&h0, &x).unwrap();
                if with_grad {
                    m.backstep(&cache, &Array1::ones(5));
                }
                h.sum()
            },
            1e-5,
        );
        assert!(report.max_rel_err <= 1e-5, "{report:?}");
    }

    #[test]
    fn bptt_gradient_check_over_sequence() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut cell = GruCell::new(4, 2, &mut rng);
        let inputs: Vec<Array1<f64>> = (0..10)
            .map(|t| Array1::from_shape_fn(2, |i| ((t * 2 + i) as f64 * 0.37).sin()))
            .collect();
        let report = grad_check(
            &mut cell,
            |m, with_grad| {
                m.zero_grads();
                let mut h = m.initial_state();
                let mut caches = Vec::new();
                for x in &inputs {
                    let (h_next, cache) = m.step(&h, x).unwrap();
                    caches.push(cache);
                    h = h_next;
                }
                let loss = h.sum();
                if with_grad {
                    let mut dh = Array1::ones(4);
                    for cache in caches.iter().rev() {
                        let (dh_prev, _dx) = m.backstep(cache, &dh);
                        dh = dh_prev;
                    }
                }
                loss
            },
            1e-5,
        );
        assert!(report.max_rel_err <= 1e-5, "{report:?}");
    }
}
