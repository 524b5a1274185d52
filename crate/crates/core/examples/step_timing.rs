use std::time::Instant;

use weakchem_core::models::*;
use weakchem_core::tensornet::*;

fn main() {
    let spec = ChemceptionSpec {
        depth: 2,
        filters: 8,
        input: [40, 40, 4],
        head: HeadSpec {
            n_outputs: 10,
            kind: HeadKind::MultitaskLinear,
        },
    };
    let mut m: Model<f32> = build_chemception(&spec, 0).unwrap();
    let mut x = Tensor::<f32>::zeros(&[32, 40, 40, 4]);
    for (i, v) in x.data.iter_mut().enumerate() {
        if i % 37 == 0 {
            *v = 0.3;
        }
    }
    let y = Tensor::<f32>::filled(&[32, 10], 0.5);
    let cfg = TrainConfig::default();
    let t = Instant::now();
    for _ in 0..10 {
        let tr = m.forward(&x).unwrap();
        let l = loss_mse(tr.output(), &y).unwrap();
        let g = m.backward_trainable(&tr, &l.grad).unwrap();
        rmsprop_step(&mut m, &g, &cfg).unwrap();
    }
    println!("chemception step: {:?}", t.elapsed() / 10);

    let spec = Smiles2VecSpec {
        vocab: 32,
        length: 80,
        units: 32,
        head: HeadSpec {
            n_outputs: 10,
            kind: HeadKind::MultitaskLinear,
        },
    };
    let mut m: Model<f32> = build_smiles2vec(&spec, 0).unwrap();
    let mut x = Tensor::<f32>::zeros(&[32, 80, 32]);
    for r in 0..32 * 80 {
        x.data[r * 32 + r % 7] = 1.0;
    }
    let t = Instant::now();
    for _ in 0..10 {
        let tr = m.forward(&x).unwrap();
        let l = loss_mse(tr.output(), &y).unwrap();
        let g = m.backward_trainable(&tr, &l.grad).unwrap();
        rmsprop_step(&mut m, &g, &cfg).unwrap();
    }
    println!("smiles2vec step (L=80,U=32): {:?}", t.elapsed() / 10);
}
