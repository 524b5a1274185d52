//! Canonical atom ranking by iterative neighborhood refinement, and a
//! depth-first SMILES writer driven by an atom priority order.

use std::fmt::Write;

use super::{perceive, Atom, BondOrder, MolGraph};

fn bond_code(order: BondOrder) -> u8 {
    match order {
        BondOrder::Single => 1,
        BondOrder::Double => 2,
        BondOrder::Triple => 3,
        BondOrder::Aromatic => 4,
    }
}

/// Replace arbitrary sortable keys by their dense rank (0 = smallest).
fn dense_rank<K: Ord + Clone>(keys: &[K]) -> (Vec<usize>, usize) {
    let mut sorted: Vec<K> = keys.to_vec();
    sorted.sort();
    sorted.dedup();
    let ranks = keys
        .iter()
        .map(|k| sorted.binary_search(k).expect("key present"))
        .collect();
    (ranks, sorted.len())
}

fn refine(mol: &MolGraph, mut classes: Vec<usize>, mut count: usize) -> (Vec<usize>, usize) {
    loop {
        let keys: Vec<(usize, Vec<(usize, u8)>)> = (0..mol.atoms.len())
            .map(|i| {
                let mut nbrs: Vec<(usize, u8)> = mol.adjacency[i]
                    .iter()
                    .map(|&(n, bi)| (classes[n], bond_code(mol.bonds[bi].order)))
                    .collect();
                nbrs.sort_unstable();
                (classes[i], nbrs)
            })
            .collect();
        let (next, next_count) = dense_rank(&keys);
        if next_count == count {
            return (next, next_count);
        }
        classes = next;
        count = next_count;
    }
}

/// Canonical rank of every atom, a permutation of `0..n`.
///
/// Atoms start from the invariant (atomic number, degree, formal charge,
/// hydrogen count, aromatic, ring) and are refined by the sorted multiset of
/// (neighbor class, bond order) until the partition is stable. Remaining ties
/// are broken by promoting the lowest-index atom of the lowest tied class and
/// refining again.
pub fn canonical_ranks(mol: &MolGraph) -> Vec<usize> {
    let n = mol.atoms.len();
    let initial: Vec<_> = mol
        .atoms
        .iter()
        .enumerate()
        .map(|(i, a)| {
            (
                a.atomic_number,
                mol.adjacency[i].len(),
                a.formal_charge,
                a.total_h(),
                a.aromatic,
                a.in_ring,
            )
        })
        .collect();
    let (mut classes, mut count) = dense_rank(&initial);
    loop {
        (classes, count) = refine(mol, classes, count);
        if count == n {
            return classes;
        }
        let mut sizes = vec![0usize; count];
        for &c in &classes {
            sizes[c] += 1;
        }
        let tied = sizes.iter().position(|&s| s > 1).expect("a tied class exists");
        let pick = classes.iter().position(|&c| c == tied).expect("member exists");
        let keys: Vec<usize> = classes
            .iter()
            .enumerate()
            .map(|(i, &c)| 2 * c + usize::from(i != pick))
            .collect();
        (classes, count) = dense_rank(&keys);
    }
}

/// Canonical SMILES of a perceived graph.
pub fn write_canonical_smiles(mol: &MolGraph) -> String {
    write_smiles(mol, &canonical_ranks(mol))
}

/// Parse, perceive, keep the largest fragment and write canonical SMILES.
pub fn canonical_smiles(smiles: &str) -> crate::Result<String> {
    Ok(write_canonical_smiles(&super::prepare(smiles)?))
}

/// Depth-first SMILES emission. Each component starts from its atom with
/// the lowest `priority`, and neighbors are visited in increasing priority.
/// With canonical ranks as priorities this yields canonical SMILES; any other
/// permutation yields an equivalent alternative spelling.
pub fn write_smiles(mol: &MolGraph, priority: &[usize]) -> String {
    let n = mol.atoms.len();
    assert_eq!(priority.len(), n, "one priority per atom");
    let mut tree = DfsTree {
        state: vec![0u8; n],
        children: vec![Vec::new(); n],
        rings: Vec::new(),
    };
    let mut starts: Vec<usize> = (0..n).collect();
    starts.sort_by_key(|&i| priority[i]);
    let mut roots = Vec::new();
    for &s in &starts {
        if tree.state[s] == 0 {
            roots.push(s);
            tree.visit(mol, priority, s, None);
        }
    }
    let mut writer = Writer {
        mol,
        priority,
        tree: &tree,
        out: String::new(),
        open: Vec::new(),
    };
    for (k, &root) in roots.iter().enumerate() {
        if k > 0 {
            writer.out.push('.');
        }
        writer.emit(root);
    }
    writer.out
}

struct DfsTree {
    state: Vec<u8>,
    children: Vec<Vec<usize>>,
    /// (ancestor, descendant) pairs closed by ring-closure digits.
    rings: Vec<(usize, usize)>,
}

impl DfsTree {
    fn visit(&mut self, mol: &MolGraph, priority: &[usize], u: usize, parent: Option<usize>) {
        self.state[u] = 1;
        let mut nbrs: Vec<usize> = mol.neighbors(u).collect();
        nbrs.sort_by_key(|&v| priority[v]);
        for v in nbrs {
            if Some(v) == parent {
                continue;
            }
            match self.state[v] {
                0 => {
                    self.children[u].push(v);
                    self.visit(mol, priority, v, Some(u));
                }
                1 => self.rings.push((v, u)),
                _ => {}
            }
        }
        self.state[u] = 2;
    }
}

struct Writer<'a> {
    mol: &'a MolGraph,
    priority: &'a [usize],
    tree: &'a DfsTree,
    out: String,
    /// Ring-closure digit currently held by each open ring (index into tree.rings).
    open: Vec<(usize, u32)>,
}

impl Writer<'_> {
    fn bond_symbol(&self, a: usize, b: usize) -> &'static str {
        let bi = self.mol.bond_between(a, b).expect("bonded atoms");
        let aromatic_pair = self.mol.atoms[a].aromatic && self.mol.atoms[b].aromatic;
        match self.mol.bonds[bi].order {
            BondOrder::Single if aromatic_pair => "-",
            BondOrder::Single | BondOrder::Aromatic => "",
            BondOrder::Double => "=",
            BondOrder::Triple => "#",
        }
    }

    fn emit(&mut self, u: usize) {
        let atom_text = atom_token(self.mol, u);
        self.out.push_str(&atom_text);

        let mut closings: Vec<usize> = Vec::new();
        let mut openings: Vec<usize> = Vec::new();
        for (ri, &(anc, desc)) in self.tree.rings.iter().enumerate() {
            if desc == u {
                closings.push(ri);
            } else if anc == u {
                openings.push(ri);
            }
        }
        closings.sort_by_key(|&ri| self.priority[self.tree.rings[ri].0]);
        openings.sort_by_key(|&ri| self.priority[self.tree.rings[ri].1]);
        for ri in closings {
            let pos = self
                .open
                .iter()
                .position(|&(r, _)| r == ri)
                .expect("ring opened at ancestor");
            let (_, digit) = self.open.remove(pos);
            push_ring_label(&mut self.out, digit);
        }
        for ri in openings {
            let digit = (1u32..)
                .find(|d| self.open.iter().all(|&(_, used)| used != *d))
                .expect("free digit");
            self.open.push((ri, digit));
            let (anc, desc) = self.tree.rings[ri];
            let sym = self.bond_symbol(anc, desc);
            self.out.push_str(sym);
            push_ring_label(&mut self.out, digit);
        }

        let children = &self.tree.children[u];
        for (k, &child) in children.iter().enumerate() {
            let sym = self.bond_symbol(u, child);
            if k + 1 < children.len() {
                self.out.push('(');
                self.out.push_str(sym);
                self.emit(child);
                self.out.push(')');
            } else {
                self.out.push_str(sym);
                self.emit(child);
            }
        }
    }
}

fn push_ring_label(out: &mut String, digit: u32) {
    if digit < 10 {
        write!(out, "{digit}").expect("string write");
    } else {
        write!(out, "%{digit:02}").expect("string write");
    }
}

const ORGANIC: [&str; 10] = ["B", "C", "N", "O", "P", "S", "F", "Cl", "Br", "I"];
const AROMATIC_ORGANIC: [&str; 6] = ["B", "C", "N", "O", "P", "S"];

fn atom_token(mol: &MolGraph, i: usize) -> String {
    let atom = &mol.atoms[i];
    let h = atom.total_h();
    let symbol = if atom.aromatic {
        atom.element.to_ascii_lowercase()
    } else {
        atom.element.to_string()
    };
    if atom.formal_charge == 0 && bare_hydrogens(mol, i, atom) == Some(h) {
        return symbol;
    }
    let mut s = format!("[{symbol}");
    match h {
        0 => {}
        1 => s.push('H'),
        _ => write!(s, "H{h}").expect("string write"),
    }
    match atom.formal_charge {
        0 => {}
        1 => s.push('+'),
        -1 => s.push('-'),
        q if q > 0 => write!(s, "+{q}").expect("string write"),
        q => write!(s, "-{}", -q).expect("string write"),
    }
    s.push(']');
    s
}

/// Hydrogen count the parser would assign if the atom were written bare.
fn bare_hydrogens(mol: &MolGraph, i: usize, atom: &Atom) -> Option<u32> {
    let allowed = if atom.aromatic {
        &AROMATIC_ORGANIC[..]
    } else {
        &ORGANIC[..]
    };
    if !allowed.contains(&atom.element) {
        return None;
    }
    let mut probe = atom.clone();
    probe.bracket = false;
    probe.explicit_h = 0;
    probe.formal_charge = 0;
    let mut used = 0;
    let mut has_aromatic = false;
    for &(_, bi) in &mol.adjacency[i] {
        let order = mol.bonds[bi].order;
        used += order.integral();
        has_aromatic |= order == BondOrder::Aromatic;
    }
    perceive::implicit_hydrogens(&probe, used, has_aromatic, i).ok()
}

#[cfg(test)]
mod tests {
    use super::super::{parse_smiles, perceive, prepare};
    use super::*;

    fn canon(s: &str) -> String {
        canonical_smiles(s).unwrap()
    }

    #[test]
    fn ranks_are_permutations() {
        for s in ["c1ccccc1", "CCO", "CC(C)(C)C", "OC(=O)c1ccccc1O"] {
            let m = prepare(s).unwrap();
            let mut r = canonical_ranks(&m);
            r.sort_unstable();
            assert_eq!(r, (0..m.atoms.len()).collect::<Vec<_>>());
        }
    }

    #[test]
    fn ethanol_ranks_distinct() {
        let m = prepare("CCO").unwrap();
        let r = canonical_ranks(&m);
        assert_ne!(r[0], r[1]);
        assert_ne!(r[1], r[2]);
        assert_ne!(r[0], r[2]);
        // invariant order: C(deg1,H3) < C(deg2,H2) < O
        assert_eq!(r, vec![0, 1, 2]);
    }

    #[test]
    fn spellings_agree() {
        assert_eq!(canon("OCC"), canon("CCO"));
        assert_eq!(canon("C1=CC=CC=C1"), canon("c1ccccc1"));
        assert_eq!(canon("c1ccccc1"), "c1ccccc1");
        assert_eq!(canon("OC(=O)C"), canon("CC(O)=O"));
    }

    #[test]
    fn idempotent() {
        for s in [
            "CC(=O)Oc1ccccc1C(=O)O",
            "C[N+](C)(C)C",
            "c1cc[nH]c1",
            "O=C1C=CC(=O)C=C1",
            "C#N",
        ] {
            let once = canon(s);
            assert_eq!(canon(&once), once, "{s}");
        }
    }

    #[test]
    fn bracket_tokens() {
        assert_eq!(canon("[NH4+]"), "[NH4+]");
        assert_eq!(canon("c1cc[nH]c1"), canon("[nH]1cccc1"));
        assert!(canon("c1cc[nH]c1").contains("[nH]"));
        assert_eq!(canon("CC(=O)[O-]"), canon("[O-]C(C)=O"));
    }

    #[test]
    fn random_priorities_reparse_to_same_canonical() {
        let m = prepare("CC(C)Cc1ccc(cc1)C(C)C(=O)O").unwrap();
        let target = write_canonical_smiles(&m);
        let n = m.atoms.len();
        for shift in 0..n {
            let prio: Vec<usize> = (0..n).map(|i| (i * 7 + shift) % n).collect();
            let alt = write_smiles(&m, &prio);
            let re = perceive(&parse_smiles(&alt).unwrap()).unwrap();
            assert_eq!(write_canonical_smiles(&re), target, "{alt}");
        }
    }

    #[test]
    fn many_ring_closures() {
        let s = "c1ccc2cc3ccccc3cc2c1";
        let c = canon(s);
        assert_eq!(canon(&c), c);
    }
}
