//! Causal dilated temporal convolutional network baseline.
//!
//! All diner channels are stacked row-wise into one input and pushed through
//! four residual blocks with dilations 1, 2, 4, 8. Each block applies two
//! causal dilated convolutions (normalize + ReLU after each), adds a skip
//! connection (1×1-projected when the width changes), and re-applies ReLU.
//! The classifier head reads only the final timestep.
//!
//! The triplet variant stacks user + both co-diners; the couplet variant
//! stacks the co-diners plus the user's bite-history block, never the user's
//! perception rows.

use super::layers::{
    bce_with_logits, relu2, relu2_backward, relu3, relu3_backward, sigmoid, BatchNorm1d, BnCache,
    Conv1d, Dense, Padding,
};
use super::sonnet_net::copy_into;
use super::{check_batch, BiteModel, ModelError, ModelKind, ModelSpec, WindowBatch};
use ndarray::{concatenate, s, Array1, Array2, Array3, Axis};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;

#[derive(Clone)]
struct TcnBlock {
    conv1: Conv1d,
    bn1: BatchNorm1d,
    conv2: Conv1d,
    bn2: BatchNorm1d,
    /// 1×1 projection for the skip path; present only when widths differ.
    residual: Option<Conv1d>,
}

struct BlockCache {
    x: Array3<f64>,
    bn1_cache: BnCache,
    pre_relu1: Array3<f64>,
    h1: Array3<f64>,
    bn2_cache: BnCache,
    sum_pre_relu: Array3<f64>,
}

#[derive(Clone)]
pub struct TcnModel {
    spec: ModelSpec,
    blocks: Vec<TcnBlock>,
    dense1: Dense,
    dense2: Dense,
}

impl TcnModel {
    pub fn new(spec: ModelSpec) -> Self {
        assert!(
            matches!(spec.kind, ModelKind::TripletTcn | ModelKind::CoupletTcn),
            "TcnModel built from a non-TCN spec"
        );
        let mut rng = ChaCha8Rng::seed_from_u64(spec.init_seed);
        let h = &spec.tcn;
        let mut blocks = Vec::new();
        let mut in_rows = Self::input_rows(&spec);
        for &dilation in &h.dilations {
            let conv1 = Conv1d::new(in_rows, h.filters, h.kernel, dilation, Padding::Causal, &mut rng);
            let bn1 = BatchNorm1d::new(h.filters);
            let conv2 =
                Conv1d::new(h.filters, h.filters, h.kernel, dilation, Padding::Causal, &mut rng);
            let bn2 = BatchNorm1d::new(h.filters);
            let residual = (in_rows != h.filters)
                .then(|| Conv1d::new(in_rows, h.filters, 1, 1, Padding::Same, &mut rng));
            blocks.push(TcnBlock { conv1, bn1, conv2, bn2, residual });
            in_rows = h.filters;
        }
        let dense1 = Dense::new(h.filters, h.hidden, &mut rng);
        let dense2 = Dense::new(h.hidden, 1, &mut rng);
        TcnModel { spec, blocks, dense1, dense2 }
    }

    /// Rows of the stacked input.
    pub fn input_rows(spec: &ModelSpec) -> usize {
        if spec.kind.is_couplet() {
            2 * spec.codiner_rows + spec.bite_rows
        } else {
            spec.user_rows + 2 * spec.codiner_rows
        }
    }

    fn stack_input(&self, batch: &WindowBatch) -> Array3<f64> {
        if self.spec.kind.is_couplet() {
            let bite = batch.bite_series();
            concatenate(
                Axis(1),
                &[batch.codiner_a.view(), batch.codiner_b.view(), bite.view()],
            )
            .expect("channel tensors share batch and time dims")
        } else {
            concatenate(
                Axis(1),
                &[batch.user.view(), batch.codiner_a.view(), batch.codiner_b.view()],
            )
            .expect("channel tensors share batch and time dims")
        }
    }

    fn forward_eval_inner(&self, batch: &WindowBatch) -> Array1<f64> {
        let mut x = self.stack_input(batch);
        for block in &self.blocks {
            let h1 = relu3(&block.bn1.forward_eval(&block.conv1.forward(&x)));
            let h2 = block.bn2.forward_eval(&block.conv2.forward(&h1));
            let r = match &block.residual {
                Some(conv) => conv.forward(&x),
                None => x.clone(),
            };
            x = relu3(&(h2 + r));
        }
        let last = x.index_axis(Axis(2), self.spec.frames - 1).to_owned();
        let hidden = relu2(&self.dense1.forward(&last));
        self.dense2.forward(&hidden).index_axis(Axis(1), 0).to_owned()
    }

    fn forward_train(
        &mut self,
        batch: &WindowBatch,
    ) -> (Array1<f64>, Vec<BlockCache>, Array2<f64>, Array2<f64>, Array2<f64>) {
        let mut x = self.stack_input(batch);
        let mut caches = Vec::with_capacity(self.blocks.len());
        for block in &mut self.blocks {
            let a1 = block.conv1.forward(&x);
            let (nb1, bn1_cache) = block.bn1.forward_train(&a1);
            let h1 = relu3(&nb1);
            let a2 = block.conv2.forward(&h1);
            let (nb2, bn2_cache) = block.bn2.forward_train(&a2);
            let r = match &block.residual {
                Some(conv) => conv.forward(&x),
                None => x.clone(),
            };
            let sum = nb2 + r;
            let out = relu3(&sum);
            caches.push(BlockCache {
                x,
                bn1_cache,
                pre_relu1: nb1,
                h1,
                bn2_cache,
                sum_pre_relu: sum,
            });
            x = out;
        }
        let last = x.index_axis(Axis(2), self.spec.frames - 1).to_owned();
        let dense1_pre_relu = self.dense1.forward(&last);
        let hidden = relu2(&dense1_pre_relu);
        let logits = self.dense2.forward(&hidden).index_axis(Axis(1), 0).to_owned();
        (logits, caches, last, dense1_pre_relu, hidden)
    }

    fn backward(
        &mut self,
        caches: &[BlockCache],
        last: &Array2<f64>,
        dense1_pre_relu: &Array2<f64>,
        hidden: &Array2<f64>,
        dlogits: &Array1<f64>,
    ) {
        let dlogits2 = dlogits.view().insert_axis(Axis(1)).to_owned();
        let dhidden = self.dense2.backward(hidden, &dlogits2);
        let dpre = relu2_backward(dense1_pre_relu, &dhidden);
        let dlast = self.dense1.backward(last, &dpre);

        // Only the final timestep feeds the head.
        let (n, f) = dlast.dim();
        let t_len = self.spec.frames;
        let mut dout = Array3::zeros((n, f, t_len));
        dout.slice_mut(s![.., .., t_len - 1]).assign(&dlast);

        for (block, cache) in self.blocks.iter_mut().zip(caches.iter()).rev() {
            let dsum = relu3_backward(&cache.sum_pre_relu, &dout);
            let da2 = block.bn2.backward(&cache.bn2_cache, &dsum);
            let dh1 = block.conv2.backward(&cache.h1, &da2);
            let dnb1 = relu3_backward(&cache.pre_relu1, &dh1);
            let da1 = block.bn1.backward(&cache.bn1_cache, &dnb1);
            let mut dx = block.conv1.backward(&cache.x, &da1);
            match &mut block.residual {
                Some(conv) => dx += &conv.backward(&cache.x, &dsum),
                None => dx += &dsum,
            }
            dout = dx;
        }
    }

    fn visit_named(&mut self, f: &mut dyn FnMut(String, &mut [f64], &mut [f64])) {
        for (i, block) in self.blocks.iter_mut().enumerate() {
            for (tag, conv) in [("conv1", &mut block.conv1), ("conv2", &mut block.conv2)] {
                f(
                    format!("tcn.block{i}.{tag}.w"),
                    conv.w.as_slice_mut().unwrap(),
                    conv.dw.as_slice_mut().unwrap(),
                );
                f(
                    format!("tcn.block{i}.{tag}.b"),
                    conv.b.as_slice_mut().unwrap(),
                    conv.db.as_slice_mut().unwrap(),
                );
            }
            for (tag, bn) in [("bn1", &mut block.bn1), ("bn2", &mut block.bn2)] {
                f(
                    format!("tcn.block{i}.{tag}.gamma"),
                    bn.gamma.as_slice_mut().unwrap(),
                    bn.dgamma.as_slice_mut().unwrap(),
                );
                f(
                    format!("tcn.block{i}.{tag}.beta"),
                    bn.beta.as_slice_mut().unwrap(),
                    bn.dbeta.as_slice_mut().unwrap(),
                );
            }
            if let Some(conv) = &mut block.residual {
                f(
                    format!("tcn.block{i}.residual.w"),
                    conv.w.as_slice_mut().unwrap(),
                    conv.dw.as_slice_mut().unwrap(),
                );
                f(
                    format!("tcn.block{i}.residual.b"),
                    conv.b.as_slice_mut().unwrap(),
                    conv.db.as_slice_mut().unwrap(),
                );
            }
        }
        f(
            "head.dense1.w".into(),
            self.dense1.w.as_slice_mut().unwrap(),
            self.dense1.dw.as_slice_mut().unwrap(),
        );
        f(
            "head.dense1.b".into(),
            self.dense1.b.as_slice_mut().unwrap(),
            self.dense1.db.as_slice_mut().unwrap(),
        );
        f(
            "head.dense2.w".into(),
            self.dense2.w.as_slice_mut().unwrap(),
            self.dense2.dw.as_slice_mut().unwrap(),
        );
        f(
            "head.dense2.b".into(),
            self.dense2.b.as_slice_mut().unwrap(),
            self.dense2.db.as_slice_mut().unwrap(),
        );
    }
}

impl BiteModel for TcnModel {
    fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    fn predict(&self, batch: &WindowBatch) -> Result<Array1<f64>, ModelError> {
        check_batch(&self.spec, batch)?;
        Ok(self.forward_eval_inner(batch).mapv(sigmoid))
    }

    fn train_batch(
        &mut self,
        batch: &WindowBatch,
        targets: &Array1<f64>,
    ) -> Result<f64, ModelError> {
        check_batch(&self.spec, batch)?;
        if targets.len() != batch.len() {
            return Err(ModelError::ShapeMismatch {
                expected: format!("{} targets", batch.len()),
                got: format!("{}", targets.len()),
            });
        }
        let (logits, caches, last, pre, hidden) = self.forward_train(batch);
        let (loss, dlogits) = bce_with_logits(&logits, targets);
        self.backward(&caches, &last, &pre, &hidden, &dlogits);
        Ok(loss)
    }

    fn visit_params(&mut self, f: &mut dyn FnMut(&mut [f64], &mut [f64])) {
        self.visit_named(&mut |_, p, g| f(p, g));
    }

    fn state(&self) -> Vec<(String, Vec<f64>)> {
        let mut out = Vec::new();
        let mut shadow = self.clone();
        shadow.visit_named(&mut |name, p, _| out.push((name, p.to_vec())));
        for (i, block) in self.blocks.iter().enumerate() {
            for (tag, bn) in [("bn1", &block.bn1), ("bn2", &block.bn2)] {
                out.push((format!("tcn.block{i}.{tag}.running_mean"), bn.running_mean.to_vec()));
                out.push((format!("tcn.block{i}.{tag}.running_var"), bn.running_var.to_vec()));
            }
        }
        out
    }

    fn load_state(&mut self, state: &[(String, Vec<f64>)]) -> Result<(), ModelError> {
        let map: HashMap<&str, &Vec<f64>> = state.iter().map(|(n, v)| (n.as_str(), v)).collect();
        let mut err = None;
        self.visit_named(&mut |name, p, _| {
            if err.is_some() {
                return;
            }
            match map.get(name.as_str()) {
                Some(src) => {
                    if let Err(e) = copy_into(p, src, &name) {
                        err = Some(e);
                    }
                }
                None => err = Some(ModelError::StateMismatch(format!("missing `{name}`"))),
            }
        });
        if let Some(e) = err {
            return Err(e);
        }
        for (i, block) in self.blocks.iter_mut().enumerate() {
            for (tag, bn) in [("bn1", &mut block.bn1), ("bn2", &mut block.bn2)] {
                for (stat, dst) in [
                    ("running_mean", &mut bn.running_mean),
                    ("running_var", &mut bn.running_var),
                ] {
                    let name = format!("tcn.block{i}.{tag}.{stat}");
                    let src = map
                        .get(name.as_str())
                        .ok_or_else(|| ModelError::StateMismatch(format!("missing `{name}`")))?;
                    copy_into(dst.as_slice_mut().unwrap(), src, &name)?;
                }
            }
        }
        Ok(())
    }

    fn param_count(&self) -> usize {
        let mut n = 0;
        for block in &self.blocks {
            n += block.conv1.param_count() + block.conv2.param_count();
            n += block.bn1.param_count() + block.bn2.param_count();
            if let Some(conv) = &block.residual {
                n += conv.param_count();
            }
        }
        n + self.dense1.param_count() + self.dense2.param_count()
    }
}

#[cfg(test)]
mod tests {
    use super::super::tests::{tiny_batch, tiny_window_spec};
    use super::super::{ModelKind, ModelSpec};
    use super::*;
    use crate::features::WindowSpec;

    fn tiny_spec(kind: ModelKind) -> ModelSpec {
        let mut spec = ModelSpec::for_windows(kind, &tiny_window_spec(), 21);
        spec.tcn.filters = 6;
        spec.tcn.kernel = 3;
        spec.tcn.dilations = vec![1, 2];
        spec.tcn.hidden = 8;
        spec
    }

    #[test]
    fn triplet_param_count_matches_arithmetic() {
        let spec = ModelSpec::for_windows(ModelKind::TripletTcn, &WindowSpec::default(), 0);
        let model = TcnModel::new(spec);
        assert_eq!(model.param_count(), 524_907);
    }

    #[test]
    fn couplet_param_count_matches_arithmetic() {
        let spec = ModelSpec::for_windows(ModelKind::CoupletTcn, &WindowSpec::default(), 0);
        let model = TcnModel::new(spec);
        assert_eq!(model.param_count(), 325_577);
    }

    #[test]
    fn both_variants_stay_parameter_matched_with_their_cnn_counterparts() {
        let ws = WindowSpec::default();
        let pairs = [
            (ModelKind::TripletTcn, ModelKind::TripletSonnet, 0.01),
            (ModelKind::CoupletTcn, ModelKind::CoupletSonnet, 0.15),
        ];
        for (tcn_kind, cnn_kind, tol) in pairs {
            let tcn = TcnModel::new(ModelSpec::for_windows(tcn_kind, &ws, 0));
            let cnn = super::super::SonnetModel::new(ModelSpec::for_windows(cnn_kind, &ws, 0));
            let (a, b) = (tcn.param_count() as f64, cnn.param_count() as f64);
            let rel = (a - b).abs() / b;
            assert!(rel < tol, "{tcn_kind} vs {cnn_kind}: {a} vs {b} ({:.1}%)", rel * 100.0);
        }
    }

    #[test]
    fn prediction_is_deterministic_and_bounded() {
        let (batch, _) = tiny_batch(30);
        let model = TcnModel::new(tiny_spec(ModelKind::TripletTcn));
        let p1 = model.predict(&batch).unwrap();
        assert_eq!(p1, model.predict(&batch).unwrap());
        assert!(p1.iter().all(|&p| (0.0..=1.0).contains(&p)));
    }

    #[test]
    fn couplet_is_blind_to_user_perception_rows() {
        let (batch, _) = tiny_batch(31);
        let model = TcnModel::new(tiny_spec(ModelKind::CoupletTcn));
        let base = model.predict(&batch).unwrap();

        let mut perturbed = batch.clone();
        let perception_rows = perturbed.user.dim().1 - perturbed.bite_rows;
        perturbed.user.slice_mut(s![.., ..perception_rows, ..]).mapv_inplace(|v| v - 9.0);
        assert_eq!(model.predict(&perturbed).unwrap(), base);

        let mut bite_perturbed = batch.clone();
        bite_perturbed.user.slice_mut(s![.., perception_rows.., ..]).mapv_inplace(|v| v + 5.0);
        assert_ne!(model.predict(&bite_perturbed).unwrap(), base);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let spec = {
            let mut s = ModelSpec::for_windows(
                ModelKind::TripletTcn,
                &WindowSpec { k_seconds: 1.0, fps: 8, gamma: 1, min_gap_to_positive_s: 0.0 },
                5,
            );
            s.tcn.filters = 4;
            s.tcn.kernel = 3;
            s.tcn.dilations = vec![1, 2];
            s.tcn.hidden = 5;
            s
        };
        let (full, labels) = tiny_batch(32);
        let n = 4;
        let batch = WindowBatch {
            user: full.user.slice(s![..n, ..spec.user_rows, ..spec.frames]).to_owned(),
            codiner_a: full.codiner_a.slice(s![..n, ..spec.codiner_rows, ..spec.frames]).to_owned(),
            codiner_b: full.codiner_b.slice(s![..n, ..spec.codiner_rows, ..spec.frames]).to_owned(),
            bite_rows: spec.bite_rows,
        };
        let targets = labels.slice(s![..n]).to_owned();

        let mut model = TcnModel::new(spec.clone());
        model.train_batch(&batch, &targets).unwrap();

        let mut analytic: Vec<(String, usize, f64)> = Vec::new();
        model.visit_named(&mut |name, p, g| {
            for idx in [0, p.len() / 2, p.len() - 1] {
                analytic.push((name.clone(), idx, g[idx]));
            }
        });

        let h = 1e-5;
        for (name, idx, grad) in analytic {
            let mut probe = TcnModel::new(spec.clone());
            let mut loss_at = |delta: f64| {
                probe.visit_named(&mut |n2, p, _| {
                    if n2 == name {
                        p[idx] += delta;
                    }
                });
                let l = probe.train_batch(&batch, &targets).unwrap();
                probe.visit_named(&mut |n2, p, _| {
                    if n2 == name {
                        p[idx] -= delta;
                    }
                });
                l
            };
            let plus = loss_at(h);
            let minus = loss_at(-h);
            let numeric = (plus - minus) / (2.0 * h);
            let denom = grad.abs().max(numeric.abs()).max(1e-4);
            assert!(
                ((grad - numeric) / denom).abs() < 2e-3,
                "{name}[{idx}]: analytic {grad:.3e} vs numeric {numeric:.3e}"
            );
        }
    }

    #[test]
    fn state_round_trip_preserves_predictions() {
        let (batch, labels) = tiny_batch(33);
        let mut model = TcnModel::new(tiny_spec(ModelKind::TripletTcn));
        for _ in 0..2 {
            model.train_batch(&batch, &labels).unwrap();
            model.visit_params(&mut |p, g| {
                for (pi, gi) in p.iter_mut().zip(g.iter()) {
                    *pi -= 0.01 * gi;
                }
            });
        }
        let state = model.state();
        let mut fresh = TcnModel::new(tiny_spec(ModelKind::TripletTcn));
        fresh.load_state(&state).unwrap();
        assert_eq!(fresh.predict(&batch).unwrap(), model.predict(&batch).unwrap());
    }
}
