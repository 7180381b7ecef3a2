//! Dense linear layer and token embedding.

use ndarray::{Array1, Array2};
use rand::Rng;

use super::{add_outer, PMat, PVec, Params, Slot, SlotRef};
use crate::error::{Error, Result};

/// y = W x + b.
#[derive(Debug, Clone)]
pub struct Linear {
    pub w: PMat,
    pub b: PVec,
}

pub struct LinearCache {
    x: Array1<f64>,
}

impl Linear {
    pub fn new<R: Rng>(out_dim: usize, in_dim: usize, rng: &mut R) -> Self {
        Self { w: PMat::uniform(out_dim, in_dim, rng), b: PVec::zeros(out_dim) }
    }

    pub fn out_dim(&self) -> usize {
        self.w.v.nrows()
    }

    pub fn in_dim(&self) -> usize {
        self.w.v.ncols()
    }

    pub fn forward(&self, x: &Array1<f64>) -> Result<(Array1<f64>, LinearCache)> {
        if x.len() != self.in_dim() {
            return Err(Error::Shape(format!(
                "linear expects input {}, got {}",
                self.in_dim(),
                x.len()
            )));
        }
        let y = self.w.v.dot(x) + &self.b.v;
        Ok((y, LinearCache { x: x.clone() }))
    }

    /// Accumulates parameter gradients and returns d(loss)/dx.
    pub fn backward(&mut self, cache: &LinearCache, dy: &Array1<f64>) -> Array1<f64> {
        add_outer(&mut self.w.g, dy, &cache.x);
        self.b.g += dy;
        self.w.v.t().dot(dy)
    }
}

impl Params for Linear {
    fn visit(&self, f: &mut dyn FnMut(&str, SlotRef<'_>)) {
        f("w", SlotRef::M(&self.w));
        f("b", SlotRef::V(&self.b));
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, Slot<'_>)) {
        f("w", Slot::M(&mut self.w));
        f("b", Slot::V(&mut self.b));
    }
}

/// Token embedding table: one row per token id.
#[derive(Debug, Clone)]
pub struct Embedding {
    pub table: PMat,
}

impl Embedding {
    pub fn new<R: Rng>(vocab: usize, dim: usize, rng: &mut R) -> Self {
        Self { table: PMat::uniform(vocab, dim, rng) }
    }

    pub fn gaussian<R: Rng>(vocab: usize, dim: usize, std: f64, rng: &mut R) -> Self {
        Self { table: PMat::gaussian(vocab, dim, std, rng) }
    }

    pub fn dim(&self) -> usize {
        self.table.v.ncols()
    }

    pub fn vocab(&self) -> usize {
        self.table.v.nrows()
    }

    pub fn forward(&self, token: usize) -> Result<Array1<f64>> {
        if token >= self.vocab() {
            return Err(Error::Shape(format!(
                "token {token} out of embedding vocabulary {}",
                self.vocab()
            )));
        }
        Ok(self.table.v.row(token).to_owned())
    }

    pub fn backward(&mut self, token: usize, dy: &Array1<f64>) {
        let mut row = self.table.g.row_mut(token);
        row += dy;
    }
}

impl Params for Embedding {
    fn visit(&self, f: &mut dyn FnMut(&str, SlotRef<'_>)) {
        f("table", SlotRef::M(&self.table));
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, Slot<'_>)) {
        f("table", Slot::M(&mut self.table));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::grad_check;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn forward_matches_manual() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut lin = Linear::new(2, 3, &mut rng);
        lin.w.v = array![[1.0, 2.0, 3.0], [0.0, -1.0, 1.0]];
        lin.b.v = array![0.5, -0.5];
        let (y, _) = lin.forward(&array![1.0, 1.0, 1.0]).unwrap();
        assert_abs_diff_eq!(y[0], 6.5, epsilon = 1e-12);
        assert_abs_diff_eq!(y[1], -0.5, epsilon = 1e-12);
    }

    #[test]
    fn rejects_dimension_mismatch() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let lin = Linear::new(2, 3, &mut rng);
        assert!(lin.forward(&array![1.0, 2.0]).is_err());
    }

    #[test]
    fn linear_gradient_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut lin = Linear::new(3, 4, &mut rng);
        let x = Array1::from_shape_fn(4, |i| 0.3 * i as f64 - 0.5);
        // scalar loss = sum(y)
        let report = grad_check(
            &mut lin,
            |m, with_grad| {
                m.zero_grads();
                let (y, cache) = m.forward(&x).unwrap();
                if with_grad {
                    m.backward(&cache, &Array1::ones(3));
                }
                y.sum()
            },
            1e-5,
        );
        assert!(report.max_rel_err <= 1e-7, "linear maps are exact: {report:?}");
    }

    #[test]
    fn embedding_lookup_and_grad() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut emb = Embedding::new(5, 3, &mut rng);
        let row = emb.forward(2).unwrap();
        assert_eq!(row.len(), 3);
        assert!(emb.forward(5).is_err());
        emb.backward(2, &array![1.0, 1.0, 1.0]);
        assert_abs_diff_eq!(emb.table.g.row(2).sum(), 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(emb.table.g.row(0).sum(), 0.0, epsilon = 1e-12);
    }
}
