//! Layer-structured, batched evaluation of the network and its parameter
//! gradient.
//!
//! This is the throughput engine behind the training loss. It performs the
//! same derivative-carrying arithmetic as recording the network on the
//! general tape and sweeping it — the same kernels in the same order, point
//! by point — but drives it directly off the layer structure, four points at
//! a time, with no per-op dispatch or tape storage. Results are bitwise
//! identical to the tape backend; the physics tests assert exactly that.
//!
//! Derivation of the backward pass (mirroring the tape's reverse sweep):
//! within a neuron, the accumulation chain is built as
//! `acc = w_0 z_0; acc += w_k z_k (k ascending); acc += b`, where every
//! weight multiplication has a constant factor. Addition pulls adjoints
//! through unchanged, so each product receives the neuron's pre-activation
//! adjoint lambda_s as-is:
//!
//!   bias gradient   += lambda_s.val
//!   weight gradient += <z_k, lambda_s>      (4-component contraction)
//!   lambda_{z_k}    += w_k * lambda_s        (componentwise scale)
//!
//! Hidden layers first pull lambda through tanh using the stored output and
//! pre-activation. Neurons are processed in reverse creation order (j, then
//! k, descending) so the adjoint accumulation order matches the tape sweep
//! exactly. Input-scaling nodes carry no parameters and their adjoints are
//! never read, so the sweep stops after the first layer.

use crate::autodiff::{dot4, tanh_pullback, Dual2};
use crate::network::{param_count, MlpConfig, NetworkError};

/// Points evaluated per call. Lanes are independent; a partial batch is
/// padded with benign inputs and the pad lanes are skipped in reductions.
pub const BATCH: usize = 4;

type Batch = [Dual2; BATCH];

const ZERO_BATCH: Batch = [Dual2::ZERO; BATCH];

/// Immutable description: layer widths plus the input-scaling constants.
#[derive(Debug, Clone)]
pub struct DenseEvaluator {
    widths: Vec<usize>,
    n_params: usize,
    lb_t: f64,
    lb_x: f64,
    factor_t: f64,
    factor_x: f64,
}

/// Mutable per-worker buffers: activations and pre-activations of the last
/// forward call, adjoint ping-pong rows, and the parameter-gradient
/// accumulator (summed across calls until `reset_grad`).
#[derive(Debug, Clone)]
pub struct DenseState {
    /// acts[0] = scaled inputs; acts[l + 1] = outputs of layer l.
    acts: Vec<Vec<Batch>>,
    /// pres[l] = pre-activation of layer l (equals acts[l + 1] for the
    /// final, activation-free layer).
    pres: Vec<Vec<Batch>>,
    lam_out: Vec<Batch>,
    lam_in: Vec<Batch>,
    pub grad: Vec<f64>,
}

impl DenseState {
    pub fn reset_grad(&mut self) {
        self.grad.iter_mut().for_each(|g| *g = 0.0);
    }
}

impl DenseEvaluator {
    pub fn new(config: &MlpConfig) -> Result<Self, NetworkError> {
        config.validate()?;
        Ok(DenseEvaluator {
            widths: config.layer_widths.clone(),
            n_params: param_count(config),
            lb_t: config.input_lb.0,
            lb_x: config.input_lb.1,
            factor_t: 2.0 / (config.input_ub.0 - config.input_lb.0),
            factor_x: 2.0 / (config.input_ub.1 - config.input_lb.1),
        })
    }

    pub fn param_count(&self) -> usize {
        self.n_params
    }

    pub fn make_state(&self) -> DenseState {
        let n_layers = self.widths.len() - 1;
        let max_width = *self.widths.iter().max().expect("validated widths");
        DenseState {
            acts: self.widths.iter().map(|&w| vec![ZERO_BATCH; w]).collect(),
            pres: (0..n_layers).map(|l| vec![ZERO_BATCH; self.widths[l + 1]]).collect(),
            lam_out: vec![ZERO_BATCH; max_width],
            lam_in: vec![ZERO_BATCH; max_width],
            grad: vec![0.0; self.n_params],
        }
    }

    /// Forward pass for one batch of points. Stores everything the backward
    /// pass needs and returns the output lanes. `params` must have the
    /// configured length (checked by the caller once per evaluation, not per
    /// batch).
    pub fn forward(&self, st: &mut DenseState, params: &[f64], t: &[f64; BATCH], x: &[f64; BATCH]) -> Batch {
        debug_assert_eq!(params.len(), self.n_params);
        let n_layers = self.widths.len() - 1;

        for b in 0..BATCH {
            st.acts[0][0][b] = Dual2 {
                val: (t[b] - self.lb_t) * self.factor_t - 1.0,
                dx: 0.0,
                dt: self.factor_t,
                dxx: 0.0,
            };
            st.acts[0][1][b] = Dual2 {
                val: (x[b] - self.lb_x) * self.factor_x - 1.0,
                dx: self.factor_x,
                dt: 0.0,
                dxx: 0.0,
            };
        }

        let mut base = 0usize;
        for l in 0..n_layers {
            let fan_in = self.widths[l];
            let fan_out = self.widths[l + 1];
            let bias_base = base + fan_in * fan_out;
            let (before, after) = st.acts.split_at_mut(l + 1);
            let z = &before[l];
            let out = &mut after[0];
            for j in 0..fan_out {
                let row = &params[base + j * fan_in..base + (j + 1) * fan_in];
                let mut acc = [Dual2::ZERO; BATCH];
                for b in 0..BATCH {
                    acc[b] = z[0][b].scale(row[0]);
                }
                for k in 1..fan_in {
                    let w = row[k];
                    for b in 0..BATCH {
                        acc[b] = acc[b] + z[k][b].scale(w);
                    }
                }
                let bias = params[bias_base + j];
                for b in 0..BATCH {
                    acc[b].val += bias;
                }
                st.pres[l][j] = acc;
                if l + 1 < n_layers {
                    for b in 0..BATCH {
                        acc[b] = acc[b].tanh();
                    }
                }
                out[j] = acc;
            }
            base = bias_base + fan_out;
        }
        st.acts[n_layers][0]
    }

    /// Reverse pass from per-lane output adjoints, accumulating parameter
    /// gradients into `st.grad`. Uses the activations stored by the last
    /// `forward` call, which must have run with the same `params`. Lanes at
    /// index >= `active` contribute nothing.
    pub fn backward(&self, st: &mut DenseState, params: &[f64], seeds: &Batch, active: usize) {
        debug_assert_eq!(params.len(), self.n_params);
        let n_layers = self.widths.len() - 1;

        st.lam_out[0] = *seeds;
        // parameter block offset of the last layer
        let mut base = self.n_params
            - (self.widths[n_layers - 1] * self.widths[n_layers] + self.widths[n_layers]);
        for l in (0..n_layers).rev() {
            let fan_in = self.widths[l];
            let fan_out = self.widths[l + 1];
            let bias_base = base + fan_in * fan_out;
            let last_layer = l + 1 == n_layers;
            for lam in st.lam_in[..fan_in].iter_mut() {
                *lam = ZERO_BATCH;
            }
            for j in (0..fan_out).rev() {
                let lam_s: Batch = if last_layer {
                    st.lam_out[j]
                } else {
                    let mut lam = ZERO_BATCH;
                    for b in 0..BATCH {
                        lam[b] = tanh_pullback(
                            st.lam_out[j][b],
                            st.pres[l][j][b],
                            st.acts[l + 1][j][b].val,
                        );
                    }
                    lam
                };
                for b in 0..active {
                    st.grad[bias_base + j] += lam_s[b].val;
                }
                let row = base + j * fan_in;
                for k in (0..fan_in).rev() {
                    let w = params[row + k];
                    for b in 0..BATCH {
                        st.lam_in[k][b] += lam_s[b].scale(w);
                    }
                    for b in 0..active {
                        st.grad[row + k] += dot4(st.acts[l][k][b], lam_s[b]);
                    }
                }
            }
            if l > 0 {
                std::mem::swap(&mut st.lam_out, &mut st.lam_in);
                base -= self.widths[l - 1] * fan_in + fan_in;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{self, Params};

    fn lanes(t0: f64, x0: f64) -> ([f64; BATCH], [f64; BATCH]) {
        (
            [t0, t0 + 0.1, t0 + 0.2, t0 + 0.3],
            [x0, x0 - 0.1, x0 + 0.25, x0 - 0.4],
        )
    }

    #[test]
    fn forward_matches_the_scalar_path_bitwise() {
        for widths in [&[2, 1][..], &[2, 5, 1], &[2, 20, 20, 20, 1]] {
            let cfg = MlpConfig::with_widths(widths);
            let params = network::init(&cfg, 12).unwrap();
            let ev = DenseEvaluator::new(&cfg).unwrap();
            let mut st = ev.make_state();
            let (t, x) = lanes(0.17, -0.5);
            let u = ev.forward(&mut st, &params.values, &t, &x);
            for b in 0..BATCH {
                let want = network::forward_dual(&params, &cfg, t[b], x[b]).unwrap();
                assert_eq!(u[b], want, "widths {widths:?} lane {b}");
                assert_eq!(u[b].dxx.to_bits(), want.dxx.to_bits());
            }
        }
    }

    #[test]
    fn backward_matches_the_tape_sweep_bitwise() {
        use crate::autodiff::{InputVar, Tape};

        let cfg = MlpConfig::with_widths(&[2, 7, 4, 1]);
        let params = network::init(&cfg, 5).unwrap();
        let ev = DenseEvaluator::new(&cfg).unwrap();
        let mut st = ev.make_state();

        let (t, x) = lanes(0.33, 0.2);
        ev.forward(&mut st, &params.values, &t, &x);
        let seeds = [
            Dual2 { val: 1.0, dx: 0.0, dt: 0.0, dxx: 0.0 },
            Dual2 { val: 0.3, dx: -0.7, dt: 0.2, dxx: 1.5 },
            Dual2 { val: 0.0, dx: 1.0, dt: 0.0, dxx: 0.0 },
            Dual2 { val: -2.0, dx: 0.25, dt: -1.0, dxx: 0.125 },
        ];
        ev.backward(&mut st, &params.values, &seeds, BATCH);

        // reference: record the network on a tape and sweep per point,
        // letting leaf adjoints accumulate across the four points
        let mut tape = Tape::new();
        let tn = tape.lift_input(InputVar::T, 0.0).unwrap();
        let xn = tape.lift_input(InputVar::X, 0.0).unwrap();
        let u = network::forward_on_tape(&mut tape, &params, &cfg, tn, xn).unwrap();
        let (program, mut tst) = tape.into_parts();
        program.set_params(&mut tst, &params.values);
        for b in 0..BATCH {
            program.set_inputs(&mut tst, t[b], x[b]);
            program.replay(&mut tst).unwrap();
            program.sweep(&mut tst, &[(u, seeds[b])]);
        }
        let mut want = vec![0.0; params.values.len()];
        program.param_gradient_into(&tst, &mut want);

        let same = st.grad.iter().zip(&want).all(|(a, b)| a.to_bits() == b.to_bits());
        assert!(same, "dense backward diverges from the tape sweep");
    }

    #[test]
    fn inactive_lanes_are_ignored() {
        let cfg = MlpConfig::with_widths(&[2, 6, 1]);
        let params = network::init(&cfg, 9).unwrap();
        let ev = DenseEvaluator::new(&cfg).unwrap();

        // run lanes {p, garbage...} with active = 1
        let mut st = ev.make_state();
        ev.forward(&mut st, &params.values, &[0.4, 9.0, -7.0, 3.0], &[0.1, 5.0, 5.0, 5.0]);
        let seed = Dual2 { val: 0.5, dx: 0.25, dt: -1.0, dxx: 2.0 };
        ev.backward(&mut st, &params.values, &[seed, seed, seed, seed], 1);

        // reference: the same single point alone in lane 0, pad lanes zeroed
        let mut st1 = ev.make_state();
        ev.forward(&mut st1, &params.values, &[0.4, 0.0, 0.0, 0.0], &[0.1, 0.0, 0.0, 0.0]);
        ev.backward(&mut st1, &params.values, &[seed, Dual2::ZERO, Dual2::ZERO, Dual2::ZERO], 1);

        assert_eq!(st.grad, st1.grad);
    }

    #[test]
    fn gradient_accumulates_across_calls_until_reset() {
        let cfg = MlpConfig::with_widths(&[2, 3, 1]);
        let params = Params { values: (0..network::param_count(&cfg)).map(|i| 0.05 * i as f64).collect() };
        let ev = DenseEvaluator::new(&cfg).unwrap();
        let mut st = ev.make_state();
        let (t, x) = lanes(0.5, 0.0);
        let seed = Dual2 { val: 1.0, ..Dual2::ZERO };

        ev.forward(&mut st, &params.values, &t, &x);
        ev.backward(&mut st, &params.values, &[seed; BATCH], BATCH);
        let once = st.grad.clone();
        ev.forward(&mut st, &params.values, &t, &x);
        ev.backward(&mut st, &params.values, &[seed; BATCH], BATCH);
        for (g2, g1) in st.grad.iter().zip(&once) {
            let doubled = 2.0 * g1;
            assert!(
                (g2 - doubled).abs() <= 1e-12 * (1.0 + doubled.abs()),
                "second call did not accumulate: {g2} vs {doubled}"
            );
        }
        st.reset_grad();
        assert!(st.grad.iter().all(|&g| g == 0.0));
    }
}
