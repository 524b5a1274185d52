use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use weakchem_chem::descriptors::compute_descriptors;
use weakchem_chem::imaging::{read_raw, render, Grid, Scheme};
use weakchem_chem::molgraph::{canonical_smiles, write_canonical_smiles};
use weakchem_chem::prepare;
use weakchem_chem::textenc::{encode, Vocab};

const CORPUS: &str = include_str!("../data/canon_corpus.smi");

fn corpus() -> Vec<&'static str> {
    CORPUS
        .lines()
        .filter_map(|l| l.split_whitespace().next())
        .filter(|s| !s.starts_with('#'))
        .collect()
}

#[test]
fn atom_order_does_not_change_canonical_form_or_descriptors() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for smiles in corpus() {
        let mol = prepare(smiles).unwrap();
        let canon = write_canonical_smiles(&mol);
        let reference = compute_descriptors(&mol);
        for _ in 0..3 {
            let mut order: Vec<usize> = (0..mol.atom_count()).collect();
            order.shuffle(&mut rng);
            let shuffled = mol.renumbered(&order);
            assert_eq!(write_canonical_smiles(&shuffled), canon, "{smiles}");
            let d = compute_descriptors(&shuffled);
            for (a, b) in d.values.iter().zip(&reference.values) {
                assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0), "{smiles}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn rendered_images_survive_the_raw_format() {
    let grid = Grid {
        size: 48,
        resolution: 0.5,
    };
    let mut rendered = 0;
    for smiles in corpus() {
        let mol = prepare(smiles).unwrap();
        for scheme in [Scheme::Std, Scheme::EngD] {
            let Ok(img) = render(&mol, scheme, &grid) else { continue };
            let mut buf = Vec::new();
            img.write_raw(&mut buf).unwrap();
            let (shape, data) = read_raw(buf.as_slice()).unwrap();
            assert_eq!(shape, [48, 48, scheme.channels()]);
            assert_eq!(data, img.data);
            assert!(img.nonzero_pixels() >= 1);
            rendered += 1;
        }
    }
    assert!(rendered > 100, "{rendered}");
}

#[test]
fn canonical_text_round_trips_through_one_hot() {
    let canon: Vec<String> = corpus().iter().map(|s| canonical_smiles(s).unwrap()).collect();
    let vocab = Vocab::build(&canon).unwrap();
    let vocab = Vocab::from_text(&vocab.to_text()).unwrap();
    let longest = canon.iter().map(|s| s.chars().count()).max().unwrap();
    for s in &canon {
        let seq = encode(s, &vocab, longest).unwrap();
        assert_eq!(seq.indices.len(), longest);
        assert_eq!(&seq.decode(&vocab), s);
    }
}
