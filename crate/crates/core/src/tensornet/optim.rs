use serde::{Deserialize, Serialize};

use super::error::{NetError, Result};
use super::model::{Gradients, Model};
use super::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Precision {
    F32,
    F64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub rho: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub precision: Precision,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            rho: 0.9,
            epsilon: 1e-8,
            batch_size: 32,
            max_epochs: 50,
            patience: 10,
            seed: 0,
            precision: Precision::F32,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = self.learning_rate > 0.0
            && self.rho > 0.0
            && self.rho < 1.0
            && self.epsilon > 0.0
            && self.batch_size > 0
            && self.max_epochs > 0
            && self.patience > 0;
        if !positive {
            return Err(NetError::Spec(format!("training settings must be positive: {self:?}")));
        }
        Ok(())
    }
}

/// One RMSprop update of every trainable parameter that has a gradient.
pub fn rmsprop_step<S: Scalar>(model: &mut Model<S>, grads: &Gradients<S>, cfg: &TrainConfig) -> Result<()> {
    if grads.params.len() != model.layers.len() {
        return Err(NetError::shape(
            "gradient layers",
            &[model.layers.len()],
            &[grads.params.len()],
        ));
    }
    let (lr, rho, eps) = (S::of(cfg.learning_rate), S::of(cfg.rho), S::of(cfg.epsilon));
    let one_minus = S::one() - rho;
    for i in 0..model.layers.len() {
        if grads.params[i].is_empty() || !model.is_trainable(i) {
            continue;
        }
        let layer = &mut model.layers[i];
        for (k, g) in grads.params[i].iter().enumerate() {
            let w = &mut layer.params[k].data;
            let s = &mut model.sq_avg[i][k];
            if g.len() != w.len() {
                return Err(NetError::shape(
                    format!("gradient of {}", layer.spec.name),
                    &[w.len()],
                    &[g.len()],
                ));
            }
            for ((wv, sv), &gv) in w.iter_mut().zip(s.iter_mut()).zip(g) {
                *sv = rho * *sv + one_minus * gv * gv;
                *wv -= lr * gv / (sv.sqrt() + eps);
            }
        }
    }
    Ok(())
}
