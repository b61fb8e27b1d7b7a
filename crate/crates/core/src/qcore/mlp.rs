//! Fully connected Q-network: ReLU hidden layers, linear output, one output
//! per action. Parameters live in one flat vector (per layer: the weight
//! matrix input-major, `W[i][j]` at `i * n_out + j`, then the bias) so Adam,
//! hashing and snapshots all see the same layout.

use rand::Rng;

use super::adam::{adam_step, AdamConfig, AdamState};
use crate::env::Obs;
use crate::error::{Error, Result};
use crate::mdp::NUM_ACTIONS;
use crate::rng::RngStream;

/// A network input: dense features or the set bits of a binary vector.
#[derive(Clone, Copy, Debug)]
pub enum Input<'a> {
    Dense(&'a [f64]),
    Sparse { dim: usize, active: &'a [u32] },
}

impl<'a> Input<'a> {
    pub fn from_obs(obs: &'a Obs) -> Result<Input<'a>> {
        match obs {
            Obs::OneHot { dim, active } => Ok(Input::Sparse { dim: *dim as usize, active }),
            Obs::Index(_) => Err(Error::shape("feature observation", "table index")),
        }
    }

    fn dim(&self) -> usize {
        match self {
            Input::Dense(x) => x.len(),
            Input::Sparse { dim, .. } => *dim,
        }
    }
}

/// One regression example: push `Q(input, action)` toward `target`.
#[derive(Clone, Copy, Debug)]
pub struct Example<'a> {
    pub input: Input<'a>,
    pub action: usize,
    pub target: f64,
}

#[derive(Clone, Debug)]
pub struct MlpApproximator {
    widths: Vec<usize>,
    offsets: Vec<usize>,
    params: Vec<f64>,
    adam: AdamState,
    adam_cfg: AdamConfig,
    gamma: f64,
    updates: u64,
}

impl MlpApproximator {
    /// All-zero network with layer widths `[input, hidden.., 4]`.
    pub fn new(input_dim: usize, hidden: &[usize], adam_cfg: AdamConfig, gamma: f64) -> Result<Self> {
        adam_cfg.validate()?;
        let mut widths = vec![input_dim];
        widths.extend_from_slice(hidden);
        widths.push(NUM_ACTIONS);
        if widths.contains(&0) {
            return Err(Error::Config(format!("layer widths must be positive: {widths:?}")));
        }
        Self::with_widths(widths, adam_cfg, gamma)
    }

    pub(crate) fn with_widths(widths: Vec<usize>, adam_cfg: AdamConfig, gamma: f64) -> Result<Self> {
        if widths.len() < 2 || *widths.last().unwrap() != NUM_ACTIONS {
            return Err(Error::shape(format!("[.., {NUM_ACTIONS}] layer widths"), format!("{widths:?}")));
        }
        let mut offsets = vec![0];
        for w in widths.windows(2) {
            let last = *offsets.last().unwrap();
            offsets.push(last + w[0] * w[1] + w[1]);
        }
        let n = *offsets.last().unwrap();
        Ok(Self {
            widths,
            offsets,
            params: vec![0.0; n],
            adam: AdamState::new(n),
            adam_cfg,
            gamma,
            updates: 0,
        })
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub(crate) fn set_updates(&mut self, updates: u64) {
        self.updates = updates;
    }

    pub fn adam_config(&self) -> &AdamConfig {
        &self.adam_cfg
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    fn n_layers(&self) -> usize {
        self.widths.len() - 1
    }

    /// (weight range, bias range) of layer `l` inside the flat vector.
    fn layer_ranges(&self, l: usize) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
        let (n_in, n_out) = (self.widths[l], self.widths[l + 1]);
        let w0 = self.offsets[l];
        let b0 = w0 + n_in * n_out;
        (w0..b0, b0..b0 + n_out)
    }

    /// Xavier/Glorot uniform weights on `±sqrt(6 / (fan_in + fan_out))`,
    /// zero biases. Resets the optimizer state.
    pub fn xavier_init(&mut self, rng: &mut RngStream) {
        for l in 0..self.n_layers() {
            let bound = xavier_bound(self.widths[l], self.widths[l + 1]);
            let (w, b) = self.layer_ranges(l);
            for p in &mut self.params[w] {
                *p = rng.gen_range(-bound..=bound);
            }
            for p in &mut self.params[b] {
                *p = 0.0;
            }
        }
        self.adam = AdamState::new(self.params.len());
        self.updates = 0;
    }

    fn check_input(&self, input: &Input) -> Result<()> {
        if input.dim() != self.input_dim() {
            return Err(Error::shape(
                format!("input of width {}", self.input_dim()),
                format!("width {}", input.dim()),
            ));
        }
        if let Input::Sparse { dim, active } = input {
            if let Some(bad) = active.iter().find(|i| **i as usize >= *dim) {
                return Err(Error::shape(format!("indices < {dim}"), bad));
            }
        }
        Ok(())
    }

    /// Pre-activations of every layer (input layer excluded).
    fn forward(&self, input: &Input) -> Vec<Vec<f64>> {
        let mut pre: Vec<Vec<f64>> = Vec::with_capacity(self.n_layers());
        for l in 0..self.n_layers() {
            let n_out = self.widths[l + 1];
            let (w, b) = self.layer_ranges(l);
            let (w, b) = (&self.params[w], &self.params[b]);
            let mut z = b.to_vec();
            let mut add_row = |i: usize, x: f64| {
                for (zj, wij) in z.iter_mut().zip(&w[i * n_out..(i + 1) * n_out]) {
                    *zj += x * wij;
                }
            };
            if l == 0 {
                match input {
                    Input::Dense(x) => {
                        for (i, &xi) in x.iter().enumerate() {
                            if xi != 0.0 {
                                add_row(i, xi);
                            }
                        }
                    }
                    Input::Sparse { active, .. } => {
                        for &i in active.iter() {
                            add_row(i as usize, 1.0);
                        }
                    }
                }
            } else {
                for (i, &p) in pre[l - 1].iter().enumerate() {
                    if p > 0.0 {
                        add_row(i, p);
                    }
                }
            }
            pre.push(z);
        }
        pre
    }

    pub fn q_values_input(&self, input: Input) -> Result<[f64; NUM_ACTIONS]> {
        self.check_input(&input)?;
        let pre = self.forward(&input);
        let out = pre.last().unwrap();
        Ok([out[0], out[1], out[2], out[3]])
    }

    pub fn q_values(&self, obs: &Obs) -> Result<[f64; NUM_ACTIONS]> {
        self.q_values_input(Input::from_obs(obs)?)
    }

    /// Mean squared error over the batch and its gradient with respect to
    /// every parameter. Targets are constants.
    pub fn loss_and_grad(&self, batch: &[Example]) -> Result<(f64, Vec<f64>)> {
        if batch.is_empty() {
            return Err(Error::Usage("empty minibatch".into()));
        }
        let scale = 1.0 / batch.len() as f64;
        let mut grad = vec![0.0; self.params.len()];
        let mut loss = 0.0;
        for ex in batch {
            self.check_input(&ex.input)?;
            if ex.action >= NUM_ACTIONS {
                return Err(Error::Usage(format!("action {} out of range", ex.action)));
            }
            let pre = self.forward(&ex.input);
            let err = pre.last().unwrap()[ex.action] - ex.target;
            loss += err * err * scale;

            // delta = dL/dz for the current layer, walking backwards.
            let mut delta = vec![0.0; NUM_ACTIONS];
            delta[ex.action] = 2.0 * err * scale;
            for l in (0..self.n_layers()).rev() {
                let n_out = self.widths[l + 1];
                let (w_range, b_range) = self.layer_ranges(l);
                for (g, d) in grad[b_range].iter_mut().zip(&delta) {
                    *g += d;
                }
                let w0 = w_range.start;
                let mut add_outer = |i: usize, x: f64| {
                    let row = w0 + i * n_out;
                    for (g, d) in grad[row..row + n_out].iter_mut().zip(&delta) {
                        *g += x * d;
                    }
                };
                if l == 0 {
                    match ex.input {
                        Input::Dense(x) => {
                            for (i, &xi) in x.iter().enumerate() {
                                if xi != 0.0 {
                                    add_outer(i, xi);
                                }
                            }
                        }
                        Input::Sparse { active, .. } => {
                            for &i in active {
                                add_outer(i as usize, 1.0);
                            }
                        }
                    }
                } else {
                    let prev = &pre[l - 1];
                    for (i, &p) in prev.iter().enumerate() {
                        if p > 0.0 {
                            add_outer(i, p);
                        }
                    }
                    let w = &self.params[w_range];
                    delta = prev
                        .iter()
                        .enumerate()
                        .map(|(i, &p)| {
                            if p > 0.0 {
                                w[i * n_out..(i + 1) * n_out].iter().zip(&delta).map(|(a, b)| a * b).sum()
                            } else {
                                0.0
                            }
                        })
                        .collect();
                }
            }
        }
        Ok((loss, grad))
    }

    /// One Adam step on the batch's mean squared error. Returns the loss
    /// before the step.
    pub fn train_on(&mut self, batch: &[Example]) -> Result<f64> {
        let (loss, grad) = self.loss_and_grad(batch)?;
        adam_step(&mut self.params, &grad, &self.adam_cfg, &mut self.adam)?;
        self.updates += 1;
        if self.params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Numerical(format!(
                "non-finite network parameter after update {}",
                self.updates
            )));
        }
        Ok(loss)
    }
}

pub fn xavier_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Substream;

    fn net(input: usize, hidden: &[usize]) -> MlpApproximator {
        MlpApproximator::new(input, hidden, AdamConfig::default(), 0.95).unwrap()
    }

    #[test]
    fn parameter_count_default_shape() {
        let n = net(484, &[64, 16]);
        assert_eq!(n.params().len(), 484 * 64 + 64 + 64 * 16 + 16 + 16 * 4 + 4);
        assert_eq!(n.widths(), &[484, 64, 16, 4]);
    }

    #[test]
    fn zero_network_outputs_zero() {
        let n = net(5, &[3]);
        let x = [1.0, 0.0, 2.0, 0.5, -1.0];
        assert_eq!(n.q_values_input(Input::Dense(&x)).unwrap(), [0.0; 4]);
    }

    #[test]
    fn q_values_are_pure() {
        let mut n = net(6, &[4, 3]);
        n.xavier_init(&mut RngStream::new(1).derive(Substream::WeightInit));
        let x = [0.1, 0.2, -0.3, 0.4, 0.0, 1.0];
        let a = n.q_values_input(Input::Dense(&x)).unwrap();
        let b = n.q_values_input(Input::Dense(&x)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sparse_matches_dense() {
        let mut n = net(8, &[5]);
        n.xavier_init(&mut RngStream::new(2).derive(Substream::WeightInit));
        let active = [1u32, 4, 6];
        let mut dense = [0.0; 8];
        for i in active {
            dense[i as usize] = 1.0;
        }
        let qs = n.q_values_input(Input::Sparse { dim: 8, active: &active }).unwrap();
        let qd = n.q_values_input(Input::Dense(&dense)).unwrap();
        for (s, d) in qs.iter().zip(qd) {
            assert!((s - d).abs() < 1e-12);
        }
        let ex_s = [Example { input: Input::Sparse { dim: 8, active: &active }, action: 2, target: 0.7 }];
        let ex_d = [Example { input: Input::Dense(&dense), action: 2, target: 0.7 }];
        let (ls, gs) = n.loss_and_grad(&ex_s).unwrap();
        let (ld, gd) = n.loss_and_grad(&ex_d).unwrap();
        assert!((ls - ld).abs() < 1e-12);
        assert!(gs.iter().zip(&gd).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn shape_mismatch_rejected() {
        let n = net(5, &[3]);
        assert!(matches!(n.q_values_input(Input::Dense(&[1.0; 4])), Err(Error::Shape { .. })));
        assert!(n.q_values(&Obs::Index(3)).is_err());
        assert!(n.q_values_input(Input::Sparse { dim: 5, active: &[7] }).is_err());
    }

    #[test]
    fn empty_batch_rejected() {
        let mut n = net(5, &[3]);
        assert!(matches!(n.train_on(&[]), Err(Error::Usage(_))));
    }

    #[test]
    fn xavier_bound_and_reproducibility() {
        assert!((xavier_bound(64, 16) - 0.273_861_278_752_583_04).abs() < 1e-15);
        let mut a = net(10, &[64, 16]);
        let mut b = net(10, &[64, 16]);
        a.xavier_init(&mut RngStream::new(4).derive(Substream::WeightInit));
        b.xavier_init(&mut RngStream::new(4).derive(Substream::WeightInit));
        assert_eq!(a.params(), b.params());
        for l in 0..a.n_layers() {
            let bound = xavier_bound(a.widths[l], a.widths[l + 1]);
            let (w, bias) = a.layer_ranges(l);
            assert!(a.params()[w].iter().all(|p| p.abs() <= bound));
            assert!(a.params()[bias].iter().all(|p| *p == 0.0));
        }
    }

    #[test]
    fn xavier_variance_of_64_by_16_layer() {
        // Uniform(-b, b) has variance b^2 / 3; the sample variance of n draws
        // has standard error sqrt((mu4 - sigma^4) / n) with mu4 = b^4 / 5.
        let mut n = MlpApproximator::with_widths(vec![64, 16, 4], AdamConfig::default(), 0.9).unwrap();
        n.xavier_init(&mut RngStream::new(77).derive(Substream::WeightInit));
        let (w, _) = n.layer_ranges(0);
        let xs = &n.params()[w];
        let m = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / m;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0);
        let b = xavier_bound(64, 16);
        let sigma2 = b * b / 3.0;
        let se = ((b.powi(4) / 5.0 - sigma2 * sigma2) / m).sqrt();
        assert!((var - sigma2).abs() < 3.0 * se, "var {var} expected {sigma2} se {se}");
    }

    #[test]
    fn batch_at_targets_leaves_params_unchanged() {
        let mut n = net(4, &[3]);
        n.xavier_init(&mut RngStream::new(5).derive(Substream::WeightInit));
        let x = [1.0, 0.0, 0.5, 0.25];
        let q = n.q_values_input(Input::Dense(&x)).unwrap();
        let before = n.params().to_vec();
        let loss = n
            .train_on(&[Example { input: Input::Dense(&x), action: 1, target: q[1] }])
            .unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(n.params(), &before[..]);
    }

    #[test]
    fn linear_model_gradient_and_adam_step() {
        // Q = W x + b with no hidden layer: dL/dW[a][i] = 2 (Q_a - y) x_i,
        // dL/db[a] = 2 (Q_a - y), zero for the other actions.
        let mut n = MlpApproximator::with_widths(vec![3, 4], AdamConfig::default(), 0.9).unwrap();
        n.xavier_init(&mut RngStream::new(6).derive(Substream::WeightInit));
        let x = [0.5, -1.0, 2.0];
        let (a, y) = (2usize, 0.3);
        let q = n.q_values_input(Input::Dense(&x)).unwrap()[a];
        let mut expect = vec![0.0; n.params().len()];
        for i in 0..3 {
            expect[i * 4 + a] = 2.0 * (q - y) * x[i];
        }
        expect[12 + a] = 2.0 * (q - y);
        let batch = [Example { input: Input::Dense(&x), action: a, target: y }];
        let (_, grad) = n.loss_and_grad(&batch).unwrap();
        for (g, e) in grad.iter().zip(&expect) {
            assert!((g - e).abs() < 1e-12);
        }
        let before = n.params().to_vec();
        n.train_on(&batch).unwrap();
        let lr = n.adam_config().lr;
        for ((after, before), g) in n.params().iter().zip(&before).zip(&expect) {
            // First Adam step: m_hat = g, v_hat = g^2.
            let step = if *g == 0.0 { 0.0 } else { -lr * g / (g.abs() + 1e-8) };
            assert!((after - before - step).abs() < 1e-15);
        }
    }
}
