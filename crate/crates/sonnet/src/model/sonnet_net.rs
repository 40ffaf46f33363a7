//! Multi-channel temporal CNN with interleaving tunnels.
//!
//! One convolution stack per diner. After every block, each stack's
//! activations are concatenated with every other stack's and squeezed back
//! to the block width by a 1×1 convolution (the *tunnel*), so information
//! flows between diners at every depth. Three blocks, each followed by a
//! width-2 max-pool, then a shared dense head on the flattened activations.
//!
//! The triplet variant has stacks for the user and both co-diners. The
//! couplet variant drops the user's stack entirely; the only user signal it
//! ever sees is the tiled bite vector of the window's final frame, appended
//! to the flattened activations.

use super::layers::{
    bce_with_logits, maxpool2, maxpool2_backward, relu2, relu2_backward, relu3, relu3_backward,
    sigmoid, BatchNorm1d, BnCache, Conv1d, Dense, Padding,
};
use super::{check_batch, BiteModel, ModelError, ModelKind, ModelSpec, WindowBatch};
use ndarray::{concatenate, s, Array1, Array2, Array3, Axis};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;

const BLOCKS: usize = 3;

#[derive(Clone)]
pub struct SonnetModel {
    spec: ModelSpec,
    n_ch: usize,
    /// `conv[block][channel]`, likewise for the other layer tables.
    conv: Vec<Vec<Conv1d>>,
    bn_conv: Vec<Vec<BatchNorm1d>>,
    tunnel: Vec<Vec<Conv1d>>,
    bn_tunnel: Vec<Vec<BatchNorm1d>>,
    dense1: Dense,
    dense2: Dense,
}

struct BlockCache {
    conv_in: Vec<Array3<f64>>,
    bn_conv_cache: Vec<BnCache>,
    conv_pre_relu: Vec<Array3<f64>>,
    tunnel_in: Vec<Array3<f64>>,
    bn_tunnel_cache: Vec<BnCache>,
    tunnel_pre_relu: Vec<Array3<f64>>,
    pool_arg: Vec<Array3<u8>>,
    pool_in_len: usize,
}

struct TrainCache {
    blocks: Vec<BlockCache>,
    flat: Array2<f64>,
    dense1_pre_relu: Array2<f64>,
    hidden: Array2<f64>,
    pooled_dim: (usize, usize, usize),
}

impl SonnetModel {
    pub fn new(spec: ModelSpec) -> Self {
        assert!(
            matches!(spec.kind, ModelKind::TripletSonnet | ModelKind::CoupletSonnet),
            "SonnetModel built from a non-CNN spec"
        );
        let n_ch = if spec.kind.is_couplet() { 2 } else { 3 };
        let mut rng = ChaCha8Rng::seed_from_u64(spec.init_seed);
        let h = &spec.sonnet;

        let mut conv = Vec::new();
        let mut bn_conv = Vec::new();
        let mut tunnel = Vec::new();
        let mut bn_tunnel = Vec::new();
        for block in 0..BLOCKS {
            let f_out = h.filters[block];
            let mut convs = Vec::new();
            let mut bns = Vec::new();
            let mut tunnels = Vec::new();
            let mut bn_ts = Vec::new();
            for ch in 0..n_ch {
                let f_in = if block == 0 {
                    Self::input_rows(&spec, ch)
                } else {
                    h.filters[block - 1]
                };
                convs.push(Conv1d::new(f_in, f_out, h.kernel, 1, Padding::Same, &mut rng));
                bns.push(BatchNorm1d::new(f_out));
            }
            for _ in 0..n_ch {
                tunnels.push(Conv1d::new(f_out * n_ch, f_out, 1, 1, Padding::Same, &mut rng));
                bn_ts.push(BatchNorm1d::new(f_out));
            }
            conv.push(convs);
            bn_conv.push(bns);
            tunnel.push(tunnels);
            bn_tunnel.push(bn_ts);
        }

        let dense1 = Dense::new(Self::flat_dim(&spec, n_ch), h.hidden, &mut rng);
        let dense2 = Dense::new(h.hidden, 1, &mut rng);
        SonnetModel { spec, n_ch, conv, bn_conv, tunnel, bn_tunnel, dense1, dense2 }
    }

    fn input_rows(spec: &ModelSpec, ch: usize) -> usize {
        if spec.kind.is_couplet() || ch > 0 {
            spec.codiner_rows
        } else {
            spec.user_rows
        }
    }

    /// Frames surviving the three pooling stages.
    fn pooled_frames(spec: &ModelSpec) -> usize {
        spec.frames / 2 / 2 / 2
    }

    fn flat_dim(spec: &ModelSpec, n_ch: usize) -> usize {
        let per_channel = spec.sonnet.filters[BLOCKS - 1] * Self::pooled_frames(spec);
        let bite = if spec.kind.is_couplet() { spec.bite_rows } else { 0 };
        n_ch * per_channel + bite
    }

    fn channel_inputs(&self, batch: &WindowBatch) -> Vec<Array3<f64>> {
        if self.spec.kind.is_couplet() {
            vec![batch.codiner_a.clone(), batch.codiner_b.clone()]
        } else {
            vec![batch.user.clone(), batch.codiner_a.clone(), batch.codiner_b.clone()]
        }
    }

    /// Tunnel input for `ch`: its own activations first, then the other
    /// channels' in rotation, concatenated along the channel axis.
    fn tunnel_stack(h: &[Array3<f64>], ch: usize) -> Array3<f64> {
        let n_ch = h.len();
        let views: Vec<_> = (0..n_ch).map(|j| h[(ch + j) % n_ch].view()).collect();
        concatenate(Axis(1), &views).expect("channel activations share batch and time dims")
    }

    fn flatten_head_input(&self, pooled: &[Array3<f64>], batch: &WindowBatch) -> Array2<f64> {
        let (n, f, t) = pooled[0].dim();
        let mut parts: Vec<Array2<f64>> = pooled
            .iter()
            .map(|p| {
                p.to_owned()
                    .into_shape_with_order((n, f * t))
                    .expect("pooled activations are contiguous")
            })
            .collect();
        if self.spec.kind.is_couplet() {
            parts.push(batch.bite_last_frame());
        }
        let views: Vec<_> = parts.iter().map(|p| p.view()).collect();
        concatenate(Axis(1), &views).expect("flattened parts share the batch dim")
    }

    /// Evaluation-mode forward to logits, also returning every block's
    /// post-pool activations per channel (used to verify tunnel mixing).
    pub fn forward_eval(&self, batch: &WindowBatch) -> (Array1<f64>, Vec<Vec<Array3<f64>>>) {
        let mut x = self.channel_inputs(batch);
        let mut all_blocks = Vec::with_capacity(BLOCKS);
        for block in 0..BLOCKS {
            let h: Vec<Array3<f64>> = (0..self.n_ch)
                .map(|c| {
                    relu3(&self.bn_conv[block][c].forward_eval(&self.conv[block][c].forward(&x[c])))
                })
                .collect();
            let mut pooled = Vec::with_capacity(self.n_ch);
            for c in 0..self.n_ch {
                let stacked = Self::tunnel_stack(&h, c);
                let z = relu3(
                    &self.bn_tunnel[block][c].forward_eval(&self.tunnel[block][c].forward(&stacked)),
                );
                pooled.push(maxpool2(&z).0);
            }
            all_blocks.push(pooled.clone());
            x = pooled;
        }
        let flat = self.flatten_head_input(&x, batch);
        let hidden = relu2(&self.dense1.forward(&flat));
        let logits = self.dense2.forward(&hidden).index_axis(Axis(1), 0).to_owned();
        (logits, all_blocks)
    }

    fn forward_train(&mut self, batch: &WindowBatch) -> (Array1<f64>, TrainCache) {
        let mut x = self.channel_inputs(batch);
        let mut blocks = Vec::with_capacity(BLOCKS);
        for block in 0..BLOCKS {
            let pool_in_len = x[0].dim().2;
            let mut conv_in = Vec::new();
            let mut bn_conv_cache = Vec::new();
            let mut conv_pre_relu = Vec::new();
            let mut h = Vec::new();
            for c in 0..self.n_ch {
                let a = self.conv[block][c].forward(&x[c]);
                let (nb, cache) = self.bn_conv[block][c].forward_train(&a);
                h.push(relu3(&nb));
                conv_in.push(std::mem::replace(&mut x[c], Array3::zeros((0, 0, 0))));
                bn_conv_cache.push(cache);
                conv_pre_relu.push(nb);
            }
            let mut tunnel_in = Vec::new();
            let mut bn_tunnel_cache = Vec::new();
            let mut tunnel_pre_relu = Vec::new();
            let mut pool_arg = Vec::new();
            let mut pooled = Vec::new();
            for c in 0..self.n_ch {
                let stacked = Self::tunnel_stack(&h, c);
                let u = self.tunnel[block][c].forward(&stacked);
                let (nv, cache) = self.bn_tunnel[block][c].forward_train(&u);
                let z = relu3(&nv);
                let (p, arg) = maxpool2(&z);
                tunnel_in.push(stacked);
                bn_tunnel_cache.push(cache);
                tunnel_pre_relu.push(nv);
                pool_arg.push(arg);
                pooled.push(p);
            }
            blocks.push(BlockCache {
                conv_in,
                bn_conv_cache,
                conv_pre_relu,
                tunnel_in,
                bn_tunnel_cache,
                tunnel_pre_relu,
                pool_arg,
                pool_in_len,
            });
            x = pooled;
        }
        let pooled_dim = x[0].dim();
        let flat = self.flatten_head_input(&x, batch);
        let dense1_pre_relu = self.dense1.forward(&flat);
        let hidden = relu2(&dense1_pre_relu);
        let logits = self.dense2.forward(&hidden).index_axis(Axis(1), 0).to_owned();
        (logits, TrainCache { blocks, flat, dense1_pre_relu, hidden, pooled_dim })
    }

    fn backward(&mut self, cache: &TrainCache, dlogits: &Array1<f64>) {
        let dlogits2 = dlogits.view().insert_axis(Axis(1)).to_owned();
        let dhidden = self.dense2.backward(&cache.hidden, &dlogits2);
        let dpre = relu2_backward(&cache.dense1_pre_relu, &dhidden);
        let dflat = self.dense1.backward(&cache.flat, &dpre);

        // Split the flattened gradient back into per-channel pooled shapes;
        // the couplet's bite tail is raw input, so its gradient is dropped.
        let (n, f, t) = cache.pooled_dim;
        let per_channel = f * t;
        let mut dpooled: Vec<Array3<f64>> = (0..self.n_ch)
            .map(|c| {
                dflat
                    .slice(s![.., c * per_channel..(c + 1) * per_channel])
                    .to_owned()
                    .into_shape_with_order((n, f, t))
                    .expect("channel slice is contiguous after to_owned")
            })
            .collect();

        for block in (0..BLOCKS).rev() {
            let bc = &cache.blocks[block];
            let f_here = self.spec.sonnet.filters[block];
            let mut dh: Vec<Array3<f64>> =
                (0..self.n_ch).map(|_| Array3::zeros((n, f_here, bc.pool_in_len))).collect();
            for c in 0..self.n_ch {
                let dz = maxpool2_backward(
                    (n, f_here, bc.pool_in_len),
                    &bc.pool_arg[c],
                    &dpooled[c],
                );
                let dnv = relu3_backward(&bc.tunnel_pre_relu[c], &dz);
                let du = self.bn_tunnel[block][c].backward(&bc.bn_tunnel_cache[c], &dnv);
                let dstacked = self.tunnel[block][c].backward(&bc.tunnel_in[c], &du);
                for j in 0..self.n_ch {
                    let target = (c + j) % self.n_ch;
                    let part = dstacked.slice(s![.., j * f_here..(j + 1) * f_here, ..]);
                    dh[target] += &part;
                }
            }
            let mut dx = Vec::with_capacity(self.n_ch);
            for c in 0..self.n_ch {
                let dnb = relu3_backward(&bc.conv_pre_relu[c], &dh[c]);
                let da = self.bn_conv[block][c].backward(&bc.bn_conv_cache[c], &dnb);
                dx.push(self.conv[block][c].backward(&bc.conv_in[c], &da));
            }
            dpooled = dx;
        }
    }

    /// Applies `f` to `(name, params, grads)` for every trainable tensor, in
    /// the same stable order used by `visit_params`.
    fn visit_named(&mut self, f: &mut dyn FnMut(String, &mut [f64], &mut [f64])) {
        for block in 0..BLOCKS {
            for c in 0..self.n_ch {
                let layer = &mut self.conv[block][c];
                f(
                    format!("block{block}.ch{c}.conv.w"),
                    layer.w.as_slice_mut().unwrap(),
                    layer.dw.as_slice_mut().unwrap(),
                );
                f(
                    format!("block{block}.ch{c}.conv.b"),
                    layer.b.as_slice_mut().unwrap(),
                    layer.db.as_slice_mut().unwrap(),
                );
                let bn = &mut self.bn_conv[block][c];
                f(
                    format!("block{block}.ch{c}.conv_bn.gamma"),
                    bn.gamma.as_slice_mut().unwrap(),
                    bn.dgamma.as_slice_mut().unwrap(),
                );
                f(
                    format!("block{block}.ch{c}.conv_bn.beta"),
                    bn.beta.as_slice_mut().unwrap(),
                    bn.dbeta.as_slice_mut().unwrap(),
                );
            }
            for c in 0..self.n_ch {
                let layer = &mut self.tunnel[block][c];
                f(
                    format!("block{block}.ch{c}.tunnel.w"),
                    layer.w.as_slice_mut().unwrap(),
                    layer.dw.as_slice_mut().unwrap(),
                );
                f(
                    format!("block{block}.ch{c}.tunnel.b"),
                    layer.b.as_slice_mut().unwrap(),
                    layer.db.as_slice_mut().unwrap(),
                );
                let bn = &mut self.bn_tunnel[block][c];
                f(
                    format!("block{block}.ch{c}.tunnel_bn.gamma"),
                    bn.gamma.as_slice_mut().unwrap(),
                    bn.dgamma.as_slice_mut().unwrap(),
                );
                f(
                    format!("block{block}.ch{c}.tunnel_bn.beta"),
                    bn.beta.as_slice_mut().unwrap(),
                    bn.dbeta.as_slice_mut().unwrap(),
                );
            }
        }
        f(
            "dense1.w".into(),
            self.dense1.w.as_slice_mut().unwrap(),
            self.dense1.dw.as_slice_mut().unwrap(),
        );
        f(
            "dense1.b".into(),
            self.dense1.b.as_slice_mut().unwrap(),
            self.dense1.db.as_slice_mut().unwrap(),
        );
        f(
            "dense2.w".into(),
            self.dense2.w.as_slice_mut().unwrap(),
            self.dense2.dw.as_slice_mut().unwrap(),
        );
        f(
            "dense2.b".into(),
            self.dense2.b.as_slice_mut().unwrap(),
            self.dense2.db.as_slice_mut().unwrap(),
        );
    }

    fn running_stats(&self) -> Vec<(String, Vec<f64>)> {
        let mut out = Vec::new();
        for block in 0..BLOCKS {
            for c in 0..self.n_ch {
                let bn = &self.bn_conv[block][c];
                out.push((format!("block{block}.ch{c}.conv_bn.running_mean"), bn.running_mean.to_vec()));
                out.push((format!("block{block}.ch{c}.conv_bn.running_var"), bn.running_var.to_vec()));
            }
            for c in 0..self.n_ch {
                let bn = &self.bn_tunnel[block][c];
                out.push((
                    format!("block{block}.ch{c}.tunnel_bn.running_mean"),
                    bn.running_mean.to_vec(),
                ));
                out.push((
                    format!("block{block}.ch{c}.tunnel_bn.running_var"),
                    bn.running_var.to_vec(),
                ));
            }
        }
        out
    }

    fn load_running_stats(&mut self, map: &HashMap<&str, &Vec<f64>>) -> Result<(), ModelError> {
        for block in 0..BLOCKS {
            for c in 0..self.n_ch {
                for (table, kind) in
                    [("conv_bn", 0usize), ("tunnel_bn", 1)]
                {
                    let bn = if kind == 0 {
                        &mut self.bn_conv[block][c]
                    } else {
                        &mut self.bn_tunnel[block][c]
                    };
                    for (stat, dst) in [
                        ("running_mean", &mut bn.running_mean),
                        ("running_var", &mut bn.running_var),
                    ] {
                        let name = format!("block{block}.ch{c}.{table}.{stat}");
                        let src = map
                            .get(name.as_str())
                            .ok_or_else(|| ModelError::StateMismatch(format!("missing `{name}`")))?;
                        copy_into(dst.as_slice_mut().unwrap(), src, &name)?;
                    }
                }
            }
        }
        Ok(())
    }
}

pub(crate) fn copy_into(dst: &mut [f64], src: &[f64], name: &str) -> Result<(), ModelError> {
    if dst.len() != src.len() {
        return Err(ModelError::StateMismatch(format!(
            "`{name}` has {} values, expected {}",
            src.len(),
            dst.len()
        )));
    }
    dst.copy_from_slice(src);
    Ok(())
}

impl BiteModel for SonnetModel {
    fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    fn predict(&self, batch: &WindowBatch) -> Result<Array1<f64>, ModelError> {
        check_batch(&self.spec, batch)?;
        let (logits, _) = self.forward_eval(batch);
        Ok(logits.mapv(sigmoid))
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
        let (logits, cache) = self.forward_train(batch);
        let (loss, dlogits) = bce_with_logits(&logits, targets);
        self.backward(&cache, &dlogits);
        Ok(loss)
    }

    fn visit_params(&mut self, f: &mut dyn FnMut(&mut [f64], &mut [f64])) {
        self.visit_named(&mut |_, p, g| f(p, g));
    }

    fn state(&self) -> Vec<(String, Vec<f64>)> {
        // visit_named requires &mut, so walk a structural clone.
        let mut out = Vec::new();
        let mut shadow = self.clone();
        shadow.visit_named(&mut |name, p, _| out.push((name, p.to_vec())));
        out.extend(self.running_stats());
        out
    }

    fn load_state(&mut self, state: &[(String, Vec<f64>)]) -> Result<(), ModelError> {
        let map: HashMap<&str, &Vec<f64>> =
            state.iter().map(|(n, v)| (n.as_str(), v)).collect();
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
        self.load_running_stats(&map)
    }

    fn param_count(&self) -> usize {
        let mut n = 0;
        for block in 0..BLOCKS {
            for c in 0..self.n_ch {
                n += self.conv[block][c].param_count();
                n += self.bn_conv[block][c].param_count();
                n += self.tunnel[block][c].param_count();
                n += self.bn_tunnel[block][c].param_count();
            }
        }
        n + self.dense1.param_count() + self.dense2.param_count()
    }
}
