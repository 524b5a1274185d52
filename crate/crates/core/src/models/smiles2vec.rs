use serde::{Deserialize, Serialize};

use super::{add_head, SPEC_KEY};
use crate::tensornet::{HeadSpec, Init, Model, ModelBuilder, NetError, Op, Result, Scalar};

/// Text model: one-hot sequence → GRU → GRU → dense head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Smiles2VecSpec {
    pub vocab: usize,
    pub length: usize,
    pub units: usize,
    pub head: HeadSpec,
}

impl Smiles2VecSpec {
    pub fn validate(&self) -> Result<()> {
        if self.vocab < 2 || self.units < 1 || self.length < 1 || self.head.n_outputs == 0 {
            return Err(NetError::Spec(format!(
                "need vocab >= 2, units >= 1, length >= 1 and outputs >= 1: {self:?}"
            )));
        }
        Ok(())
    }
}

fn gru_params(d: usize, u: usize) -> usize {
    d * 3 * u + u * 3 * u + 3 * u
}

pub fn smiles2vec_parameter_count(spec: &Smiles2VecSpec) -> usize {
    gru_params(spec.vocab, spec.units)
        + gru_params(spec.units, spec.units)
        + spec.units * spec.head.n_outputs
        + spec.head.n_outputs
}

pub fn build_smiles2vec<S: Scalar>(spec: &Smiles2VecSpec, seed: u64) -> Result<Model<S>> {
    spec.validate()?;
    let mut b = ModelBuilder::<S>::new(seed);
    b.segment("gru1");
    let input = b.add(
        "input",
        Op::Input {
            shape: vec![spec.length, spec.vocab],
        },
        &[],
        Init::Zeros,
    )?;
    let g1 = b.add(
        "gru1",
        Op::Gru {
            inputs: spec.vocab,
            units: spec.units,
            return_sequences: true,
        },
        &[input],
        Init::GlorotUniform,
    )?;
    b.segment("gru2");
    let g2 = b.add(
        "gru2",
        Op::Gru {
            inputs: spec.units,
            units: spec.units,
            return_sequences: false,
        },
        &[g1],
        Init::GlorotUniform,
    )?;
    add_head(&mut b, g2, spec.head)?;
    let mut model = b.finish()?;
    model.meta.insert(
        SPEC_KEY.into(),
        serde_json::json!({ "family": "smiles2vec", "spec": spec }),
    );
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensornet::{HeadKind, Tensor};

    fn spec(v: usize, l: usize, u: usize, n: usize) -> Smiles2VecSpec {
        Smiles2VecSpec {
            vocab: v,
            length: l,
            units: u,
            head: HeadSpec {
                n_outputs: n,
                kind: HeadKind::Linear,
            },
        }
    }

    #[test]
    fn forward_shape_and_segments() {
        let s = spec(4, 5, 8, 2);
        let m: Model<f64> = build_smiles2vec(&s, 0).unwrap();
        let names: Vec<&str> = m.segments.iter().map(|s| s.name.as_str()).collect();
        assert_eq!(names, ["gru1", "gru2", "head"]);
        let x = Tensor::zeros(&[3, 5, 4]);
        assert_eq!(m.predict(&x).unwrap().shape, vec![3, 2]);
        assert_eq!(m.parameter_count(), smiles2vec_parameter_count(&s));
    }

    #[test]
    fn zero_weights_give_zero_features() {
        let mut m: Model<f64> = build_smiles2vec(&spec(4, 6, 5, 1), 3).unwrap();
        for l in &mut m.layers {
            l.params
                .iter_mut()
                .for_each(|p| p.data.iter_mut().for_each(|v| *v = 0.0));
        }
        // all-pad input: one-hot on index 0 at every step
        let mut x = Tensor::zeros(&[2, 6, 4]);
        for r in 0..12 {
            x.data[r * 4] = 1.0;
        }
        let trace = m.forward(&x).unwrap();
        let g2 = m.layer_index("gru2").unwrap();
        assert!(trace.outputs[g2].data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_bad_spec() {
        assert!(build_smiles2vec::<f32>(&spec(1, 5, 8, 1), 0).is_err());
        assert!(build_smiles2vec::<f32>(&spec(4, 5, 0, 1), 0).is_err());
    }
}
