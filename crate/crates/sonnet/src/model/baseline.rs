//! Reference baselines: a hinge-loss linear classifier and the
//! feed-every-window floor.

use super::layers::sigmoid;
use super::sonnet_net::copy_into;
use super::{check_batch, BiteModel, ModelError, ModelSpec, WindowBatch};
use ndarray::{Array1, Array2};
use std::collections::HashMap;

/// Linear classifier on the flattened window, trained with a hinge loss and
/// L2 weight decay (a linear SVM fit by gradient descent). Scores are the
/// sigmoid of the margin, so the 0.5 decision threshold coincides with the
/// separating hyperplane.
#[derive(Clone)]
pub struct LinearModel {
    spec: ModelSpec,
    w: Array1<f64>,
    b: Array1<f64>,
    dw: Array1<f64>,
    db: Array1<f64>,
    /// L2 penalty weight.
    pub lambda: f64,
}

impl LinearModel {
    pub fn new(spec: ModelSpec) -> Self {
        let dim = Self::flat_dim(&spec);
        LinearModel {
            spec,
            w: Array1::zeros(dim),
            b: Array1::zeros(1),
            dw: Array1::zeros(dim),
            db: Array1::zeros(1),
            lambda: 1e-4,
        }
    }

    pub fn flat_dim(spec: &ModelSpec) -> usize {
        (spec.user_rows + 2 * spec.codiner_rows) * spec.frames
    }

    fn flatten(&self, batch: &WindowBatch) -> Array2<f64> {
        let n = batch.len();
        let dim = Self::flat_dim(&self.spec);
        let mut out = Array2::zeros((n, dim));
        let per = |a: &ndarray::Array3<f64>| a.dim().1 * a.dim().2;
        let (u, a, _) = (per(&batch.user), per(&batch.codiner_a), per(&batch.codiner_b));
        for i in 0..n {
            let mut row = out.row_mut(i);
            let row = row.as_slice_mut().unwrap();
            row[..u].copy_from_slice(batch.user.index_axis(ndarray::Axis(0), i).as_slice().unwrap());
            row[u..u + a].copy_from_slice(
                batch.codiner_a.index_axis(ndarray::Axis(0), i).as_slice().unwrap(),
            );
            row[u + a..].copy_from_slice(
                batch.codiner_b.index_axis(ndarray::Axis(0), i).as_slice().unwrap(),
            );
        }
        out
    }

    fn margins(&self, x: &Array2<f64>) -> Array1<f64> {
        x.dot(&self.w) + self.b[0]
    }
}

impl BiteModel for LinearModel {
    fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    fn predict(&self, batch: &WindowBatch) -> Result<Array1<f64>, ModelError> {
        check_batch(&self.spec, batch)?;
        Ok(self.margins(&self.flatten(batch)).mapv(sigmoid))
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
        let x = self.flatten(batch);
        let margins = self.margins(&x);
        let n = batch.len() as f64;

        self.dw.fill(0.0);
        self.db[0] = 0.0;
        let mut loss = 0.0;
        for (i, (&m, &y)) in margins.iter().zip(targets.iter()).enumerate() {
            let sign = 2.0 * y - 1.0;
            let hinge = 1.0 - sign * m;
            if hinge > 0.0 {
                loss += hinge;
                self.dw.scaled_add(-sign / n, &x.row(i));
                self.db[0] += -sign / n;
            }
        }
        loss /= n;
        loss += 0.5 * self.lambda * self.w.dot(&self.w);
        self.dw.scaled_add(self.lambda, &self.w);
        Ok(loss)
    }

    fn visit_params(&mut self, f: &mut dyn FnMut(&mut [f64], &mut [f64])) {
        f(self.w.as_slice_mut().unwrap(), self.dw.as_slice_mut().unwrap());
        f(self.b.as_slice_mut().unwrap(), self.db.as_slice_mut().unwrap());
    }

    fn state(&self) -> Vec<(String, Vec<f64>)> {
        vec![("linear.w".into(), self.w.to_vec()), ("linear.b".into(), self.b.to_vec())]
    }

    fn load_state(&mut self, state: &[(String, Vec<f64>)]) -> Result<(), ModelError> {
        let map: HashMap<&str, &Vec<f64>> = state.iter().map(|(n, v)| (n.as_str(), v)).collect();
        for (name, dst) in [("linear.w", &mut self.w), ("linear.b", &mut self.b)] {
            let src = map
                .get(name)
                .ok_or_else(|| ModelError::StateMismatch(format!("missing `{name}`")))?;
            copy_into(dst.as_slice_mut().unwrap(), src, name)?;
        }
        Ok(())
    }

    fn param_count(&self) -> usize {
        self.w.len() + 1
    }
}

/// Feeds on every window: score 1 for everything. The floor that any
/// learned policy must beat.
#[derive(Clone)]
pub struct AlwaysFeed {
    spec: ModelSpec,
}

impl AlwaysFeed {
    pub fn new(spec: ModelSpec) -> Self {
        AlwaysFeed { spec }
    }
}

impl BiteModel for AlwaysFeed {
    fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    fn predict(&self, batch: &WindowBatch) -> Result<Array1<f64>, ModelError> {
        check_batch(&self.spec, batch)?;
        Ok(Array1::ones(batch.len()))
    }

    fn train_batch(
        &mut self,
        batch: &WindowBatch,
        targets: &Array1<f64>,
    ) -> Result<f64, ModelError> {
        check_batch(&self.spec, batch)?;
        let _ = targets;
        Ok(0.0)
    }

    fn visit_params(&mut self, _f: &mut dyn FnMut(&mut [f64], &mut [f64])) {}

    fn state(&self) -> Vec<(String, Vec<f64>)> {
        Vec::new()
    }

    fn load_state(&mut self, _state: &[(String, Vec<f64>)]) -> Result<(), ModelError> {
        Ok(())
    }

    fn param_count(&self) -> usize {
        0
    }
}
