//! Four-gate LSTM cell, the ablation baseline for the recurrent core.

use ndarray::{s, Array1};
use rand::Rng;

use super::{add_outer, concat, sigmoid_arr, PMat, PVec, Params, Slot, SlotRef};
use crate::error::{Error, Result};

/// Standard LSTM:
///
/// ```text
/// i = sigma(W_i [h_prev, x] + b_i)
/// f = sigma(W_f [h_prev, x] + b_f)
/// g = tanh (W_g [h_prev, x] + b_g)
/// o = sigma(W_o [h_prev, x] + b_o)
/// c = f * c_prev + i * g
/// h = o * tanh(c)
/// ```
///
/// Biases start at zero.
#[derive(Debug, Clone)]
pub struct LstmCell {
    pub w_input: PMat,
    pub w_forget: PMat,
    pub w_cell: PMat,
    pub w_output: PMat,
    pub b_input: PVec,
    pub b_forget: PVec,
    pub b_cell: PVec,
    pub b_output: PVec,
    hidden: usize,
    input: usize,
}

pub struct LstmCache {
    h_prev: Array1<f64>,
    c_prev: Array1<f64>,
    x: Array1<f64>,
    i: Array1<f64>,
    f: Array1<f64>,
    g: Array1<f64>,
    o: Array1<f64>,
    c: Array1<f64>,
}

impl LstmCell {
    pub fn new<R: Rng>(hidden: usize, input: usize, rng: &mut R) -> Self {
        let cols = hidden + input;
        Self {
            w_input: PMat::uniform(hidden, cols, rng),
            w_forget: PMat::uniform(hidden, cols, rng),
            w_cell: PMat::uniform(hidden, cols, rng),
            w_output: PMat::uniform(hidden, cols, rng),
            b_input: PVec::zeros(hidden),
            b_forget: PVec::zeros(hidden),
            b_cell: PVec::zeros(hidden),
            b_output: PVec::zeros(hidden),
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

    pub fn initial_state(&self) -> (Array1<f64>, Array1<f64>) {
        (Array1::zeros(self.hidden), Array1::zeros(self.hidden))
    }

    #[allow(clippy::type_complexity)]
    pub fn step(
        &self,
        h_prev: &Array1<f64>,
        c_prev: &Array1<f64>,
        x: &Array1<f64>,
    ) -> Result<(Array1<f64>, Array1<f64>, LstmCache)> {
        if h_prev.len() != self.hidden || c_prev.len() != self.hidden || x.len() != self.input {
            return Err(Error::Shape(format!(
                "lstm expects h=c={}, x={}, got h={}, c={}, x={}",
                self.hidden,
                self.input,
                h_prev.len(),
                c_prev.len(),
                x.len()
            )));
        }
        let u = concat(h_prev, x);
        let i = sigmoid_arr(&(self.w_input.v.dot(&u) + &self.b_input.v));
        let f = sigmoid_arr(&(self.w_forget.v.dot(&u) + &self.b_forget.v));
        let g = (self.w_cell.v.dot(&u) + &self.b_cell.v).mapv(f64::tanh);
        let o = sigmoid_arr(&(self.w_output.v.dot(&u) + &self.b_output.v));
        let c = &f * c_prev + &i * &g;
        let h = &o * &c.mapv(f64::tanh);
        let cache = LstmCache {
            h_prev: h_prev.clone(),
            c_prev: c_prev.clone(),
            x: x.clone(),
            i,
            f,
            g,
            o,
            c: c.clone(),
        };
        Ok((h, c, cache))
    }

    pub fn step_nograd(
        &self,
        h_prev: &Array1<f64>,
        c_prev: &Array1<f64>,
        x: &Array1<f64>,
    ) -> (Array1<f64>, Array1<f64>) {
        let u = concat(h_prev, x);
        let i = sigmoid_arr(&(self.w_input.v.dot(&u) + &self.b_input.v));
        let f = sigmoid_arr(&(self.w_forget.v.dot(&u) + &self.b_forget.v));
        let g = (self.w_cell.v.dot(&u) + &self.b_cell.v).mapv(f64::tanh);
        let o = sigmoid_arr(&(self.w_output.v.dot(&u) + &self.b_output.v));
        let c = &f * c_prev + &i * &g;
        let h = &o * &c.mapv(f64::tanh);
        (h, c)
    }

    /// Accumulates gradients; returns (d h_prev, d c_prev, d x).
    #[allow(clippy::type_complexity)]
    pub fn backstep(
        &mut self,
        cache: &LstmCache,
        dh: &Array1<f64>,
        dc_in: &Array1<f64>,
    ) -> (Array1<f64>, Array1<f64>, Array1<f64>) {
        let LstmCache { h_prev, c_prev, x, i, f, g, o, c } = cache;
        let tanh_c = c.mapv(f64::tanh);

        let do_ = dh * &tanh_c;
        let dc = dc_in + &(dh * o * &tanh_c.mapv(|v| 1.0 - v * v));
        let di = &dc * g;
        let dg = &dc * i;
        let df = &dc * c_prev;
        let dc_prev = &dc * f;

        let u = concat(h_prev, x);
        let mut du = Array1::zeros(u.len());

        let da_i = &di * &(i * &(1.0 - i));
        add_outer(&mut self.w_input.g, &da_i, &u);
        self.b_input.g += &da_i;
        du += &self.w_input.v.t().dot(&da_i);

        let da_f = &df * &(f * &(1.0 - f));
        add_outer(&mut self.w_forget.g, &da_f, &u);
        self.b_forget.g += &da_f;
        du += &self.w_forget.v.t().dot(&da_f);

        let da_g = &dg * &g.mapv(|v| 1.0 - v * v);
        add_outer(&mut self.w_cell.g, &da_g, &u);
        self.b_cell.g += &da_g;
        du += &self.w_cell.v.t().dot(&da_g);

        let da_o = &do_ * &(o * &(1.0 - o));
        add_outer(&mut self.w_output.g, &da_o, &u);
        self.b_output.g += &da_o;
        du += &self.w_output.v.t().dot(&da_o);

        let dh_prev = du.slice(s![..self.hidden]).to_owned();
        let dx = du.slice(s![self.hidden..]).to_owned();
        (dh_prev, dc_prev, dx)
    }
}

impl Params for LstmCell {
    fn visit(&self, f: &mut dyn FnMut(&str, SlotRef<'_>)) {
        f("w_input", SlotRef::M(&self.w_input));
        f("w_forget", SlotRef::M(&self.w_forget));
        f("w_cell", SlotRef::M(&self.w_cell));
        f("w_output", SlotRef::M(&self.w_output));
        f("b_input", SlotRef::V(&self.b_input));
        f("b_forget", SlotRef::V(&self.b_forget));
        f("b_cell", SlotRef::V(&self.b_cell));
        f("b_output", SlotRef::V(&self.b_output));
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, Slot<'_>)) {
        f("w_input", Slot::M(&mut self.w_input));
        f("w_forget", Slot::M(&mut self.w_forget));
        f("w_cell", Slot::M(&mut self.w_cell));
        f("w_output", Slot::M(&mut self.w_output));
        f("b_input", Slot::V(&mut self.b_input));
        f("b_forget", Slot::V(&mut self.b_forget));
        f("b_cell", Slot::V(&mut self.b_cell));
        f("b_output", Slot::V(&mut self.b_output));
    }
}
