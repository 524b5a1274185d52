use super::{Atom, BondOrder, Hybridization, MolGraph};
use crate::error::{ChemError, Result};

/// Fill ring membership, aromaticity normalization, implicit hydrogens,
/// degree, total valence and hybridization.
///
/// Kekulé six-membered rings of C/N with alternating single/double bonds are
/// normalized to aromatic form so that both spellings perceive identically.
pub fn perceive(mol: &MolGraph) -> Result<MolGraph> {
    let mut mol = mol.clone();
    mark_ring_bonds(&mut mol);
    for bond in &mut mol.bonds {
        if bond.order == BondOrder::Aromatic && !bond.in_ring {
            bond.order = BondOrder::Single;
        }
    }
    assign_implicit_hydrogens(&mut mol)?;
    normalize_kekule_rings(&mut mol);

    for i in 0..mol.atoms.len() {
        let mut bond_sum = 0.0;
        let (mut doubles, mut triples, mut aromatic, mut ring, mut heavy) = (0, 0, 0, false, 0);
        for &(n, bi) in &mol.adjacency[i] {
            let bond = &mol.bonds[bi];
            bond_sum += bond.order.value();
            ring |= bond.in_ring;
            if mol.atoms[n].atomic_number > 1 {
                heavy += 1;
            }
            match bond.order {
                BondOrder::Double => doubles += 1,
                BondOrder::Triple => triples += 1,
                BondOrder::Aromatic => aromatic += 1,
                BondOrder::Single => {}
            }
        }
        let atom = &mut mol.atoms[i];
        atom.in_ring = ring;
        atom.degree = heavy;
        atom.total_valence = bond_sum + atom.total_h() as f64;
        atom.hybridization = if !atom.element_data().is_main_group() {
            Hybridization::Other
        } else if triples > 0 || doubles >= 2 {
            Hybridization::SP
        } else if doubles > 0 || aromatic > 0 {
            Hybridization::SP2
        } else {
            Hybridization::SP3
        };
    }
    Ok(mol)
}

/// Connected component with the most heavy atoms; ties go to the larger
/// atomic-number sum, then to the first occurring component.
pub fn largest_fragment(mol: &MolGraph) -> MolGraph {
    let comps = mol.components();
    if comps.len() <= 1 {
        return mol.clone();
    }
    let key = |c: &Vec<usize>| {
        let heavy = c.iter().filter(|&&i| mol.atoms[i].atomic_number > 1).count();
        let z: u32 = c.iter().map(|&i| mol.atoms[i].atomic_number as u32).sum();
        (heavy, z)
    };
    let mut best = 0;
    for (i, c) in comps.iter().enumerate().skip(1) {
        if key(c) > key(&comps[best]) {
            best = i;
        }
    }
    mol.subgraph(&comps[best])
}

/// Assigns implicit hydrogens to organic-subset atoms and checks every atom
/// with a tabulated valence against its maximum.
pub(crate) fn assign_implicit_hydrogens(mol: &mut MolGraph) -> Result<()> {
    for i in 0..mol.atoms.len() {
        let mut used = 0;
        let mut has_aromatic = false;
        for &(_, bi) in &mol.adjacency[i] {
            let order = mol.bonds[bi].order;
            used += order.integral();
            has_aromatic |= order == BondOrder::Aromatic;
        }
        let h = implicit_hydrogens(&mol.atoms[i], used, has_aromatic, i)?;
        mol.atoms[i].implicit_h = h;
    }
    Ok(())
}

/// Implicit hydrogen count for an atom whose bonds sum to `bond_sum`
/// (aromatic bonds counted as 1).
pub(crate) fn implicit_hydrogens(atom: &Atom, bond_sum: u32, has_aromatic_bond: bool, index: usize) -> Result<u32> {
    let Some(allowed) = atom.element_data().allowed_valences(atom.formal_charge) else {
        return Ok(0);
    };
    let used = bond_sum + atom.explicit_h;
    let max = *allowed.last().expect("non-empty valence list") as u32;
    if used > max {
        return Err(ChemError::Valence {
            atom: index,
            element: atom.element,
            used,
            max,
        });
    }
    if atom.bracket {
        return Ok(0);
    }
    if atom.aromatic {
        let lowest = allowed[0] as u32;
        let with_pi = used + has_aromatic_bond as u32;
        return Ok(if with_pi <= lowest {
            lowest - with_pi
        } else {
            lowest.saturating_sub(used)
        });
    }
    let target = allowed
        .iter()
        .map(|&v| v as u32)
        .find(|&v| v >= used)
        .expect("used <= max");
    Ok(target - used)
}

/// Marks bonds lying on a cycle, i.e. every bond that is not a bridge.
fn mark_ring_bonds(mol: &mut MolGraph) {
    let n = mol.atoms.len();
    let mut disc = vec![usize::MAX; n];
    let mut low = vec![0; n];
    let mut bridge = vec![false; mol.bonds.len()];
    let mut timer = 0;
    for root in 0..n {
        if disc[root] != usize::MAX {
            continue;
        }
        // iterative Tarjan: (atom, parent bond, next adjacency slot)
        let mut stack = vec![(root, usize::MAX, 0usize)];
        disc[root] = timer;
        low[root] = timer;
        timer += 1;
        while let Some(top) = stack.last_mut() {
            let (u, parent_bond, slot) = *top;
            top.2 += 1;
            if let Some(&(v, bi)) = mol.adjacency[u].get(slot) {
                if bi == parent_bond {
                    continue;
                }
                if disc[v] == usize::MAX {
                    disc[v] = timer;
                    low[v] = timer;
                    timer += 1;
                    stack.push((v, bi, 0));
                } else {
                    low[u] = low[u].min(disc[v]);
                }
            } else {
                stack.pop();
                if let Some(&(p, _, _)) = stack.last() {
                    low[p] = low[p].min(low[u]);
                    if low[u] > disc[p] {
                        bridge[parent_bond] = true;
                    }
                }
            }
        }
    }
    for (bond, is_bridge) in mol.bonds.iter_mut().zip(bridge) {
        bond.in_ring = !is_bridge;
    }
}

/// All simple 6-cycles, each listed once in traversal order.
pub(crate) fn six_rings(mol: &MolGraph) -> Vec<[usize; 6]> {
    fn extend(mol: &MolGraph, path: &mut Vec<usize>, out: &mut Vec<[usize; 6]>) {
        let start = path[0];
        let last = *path.last().expect("non-empty path");
        for v in mol.neighbors(last) {
            if path.len() == 6 {
                if v == start && path[1] < path[5] {
                    out.push(path.as_slice().try_into().expect("six atoms"));
                }
                continue;
            }
            if v > start && !path.contains(&v) {
                path.push(v);
                extend(mol, path, out);
                path.pop();
            }
        }
    }
    let mut out = Vec::new();
    for s in 0..mol.atoms.len() {
        let mut path = vec![s];
        extend(mol, &mut path, &mut out);
    }
    out
}

fn normalize_kekule_rings(mol: &mut MolGraph) {
    let rings: Vec<[usize; 6]> = six_rings(mol)
        .into_iter()
        .filter(|r| r.iter().all(|&a| matches!(mol.atoms[a].atomic_number, 6 | 7)))
        .collect();
    if rings.is_empty() {
        return;
    }
    let mut done = vec![false; rings.len()];
    loop {
        let mut changed = false;
        for (ri, ring) in rings.iter().enumerate() {
            if done[ri] {
                continue;
            }
            let ring_bonds: Vec<usize> = (0..6)
                .map(|k| mol.bond_between(ring[k], ring[(k + 1) % 6]).expect("ring edge exists"))
                .collect();
            if ring_bonds.iter().any(|&bi| mol.bonds[bi].order == BondOrder::Triple) {
                done[ri] = true;
                continue;
            }
            if ring_bonds.iter().all(|&bi| mol.bonds[bi].order == BondOrder::Aromatic) {
                done[ri] = true;
                continue;
            }
            let qualifies = ring.iter().all(|&a| {
                let mut in_ring_double = 0;
                let mut exo_double = 0;
                for &(n, bi) in &mol.adjacency[a] {
                    if mol.bonds[bi].order == BondOrder::Double {
                        if ring.contains(&n) && ring_bonds.contains(&bi) {
                            in_ring_double += 1;
                        } else {
                            exo_double += 1;
                        }
                    }
                }
                if mol.atoms[a].aromatic {
                    exo_double == 0 && in_ring_double <= 1
                } else {
                    exo_double == 0 && in_ring_double == 1
                }
            });
            if qualifies {
                for &a in ring {
                    mol.atoms[a].aromatic = true;
                }
                for &bi in &ring_bonds {
                    mol.bonds[bi].order = BondOrder::Aromatic;
                }
                done[ri] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::parse_smiles;
    use super::*;

    fn p(s: &str) -> MolGraph {
        perceive(&parse_smiles(s).unwrap()).unwrap()
    }

    #[test]
    fn ethanol_hydrogens() {
        let m = p("CCO");
        let h: Vec<u32> = m.atoms.iter().map(|a| a.implicit_h).collect();
        assert_eq!(h, [3, 2, 1]);
        assert!(m.atoms.iter().all(|a| a.hybridization == Hybridization::SP3));
    }

    #[test]
    fn benzene_perception() {
        let m = p("c1ccccc1");
        for a in &m.atoms {
            assert_eq!(a.hybridization, Hybridization::SP2);
            assert_eq!(a.implicit_h, 1);
            assert!(a.in_ring);
            assert_eq!(a.total_valence, 4.0);
        }
    }

    #[test]
    fn nitrile_is_sp() {
        let m = p("C#N");
        assert!(m.atoms.iter().all(|a| a.hybridization == Hybridization::SP));
    }

    #[test]
    fn kekule_benzene_matches_aromatic() {
        let k = p("C1=CC=CC=C1");
        let a = p("c1ccccc1");
        assert_eq!(k.atoms, a.atoms);
        assert_eq!(
            k.bonds.iter().map(|b| b.order).collect::<Vec<_>>(),
            a.bonds.iter().map(|b| b.order).collect::<Vec<_>>()
        );
    }

    #[test]
    fn kekule_fused_and_hetero_rings() {
        let naph = p("C1=CC=C2C=CC=CC2=C1");
        assert!(naph.atoms.iter().all(|a| a.aromatic));
        let pyr = p("C1=CC=NC=C1");
        assert!(pyr.atoms.iter().all(|a| a.aromatic));
        assert_eq!(pyr.atoms[3].implicit_h, 0);
        let quinone = p("O=C1C=CC(=O)C=C1");
        assert!(quinone.atoms.iter().all(|a| !a.aromatic));
        let diene = p("C1=CC=CCC1");
        assert!(diene.atoms.iter().all(|a| !a.aromatic));
    }

    #[test]
    fn aromatic_hydrogen_rules() {
        let naph = p("c1ccc2ccccc2c1");
        let fused: Vec<u32> = naph.atoms.iter().map(|a| a.implicit_h).collect();
        assert_eq!(fused.iter().filter(|&&h| h == 0).count(), 2);
        let thiophene = p("c1ccsc1");
        assert_eq!(thiophene.atoms[3].implicit_h, 0);
        let furan = p("c1ccoc1");
        assert_eq!(furan.atoms[3].implicit_h, 0);
        let pyrrole = p("c1cc[nH]c1");
        assert_eq!(pyrrole.atoms[3].total_h(), 1);
        let biphenyl = p("c1ccccc1c1ccccc1");
        let link = biphenyl.bond_between(5, 6).unwrap();
        assert_eq!(biphenyl.bonds[link].order, BondOrder::Single);
        assert!(!biphenyl.bonds[link].in_ring);
    }

    #[test]
    fn ring_flags() {
        let m = p("C1CC1CC");
        let flags: Vec<bool> = m.atoms.iter().map(|a| a.in_ring).collect();
        assert_eq!(flags, [true, true, true, false, false]);
    }

    #[test]
    fn fragments() {
        let m = largest_fragment(&p("CCO.Cl"));
        assert_eq!(m.atoms.len(), 3);
        let m = largest_fragment(&p("O.O"));
        assert_eq!(m.atoms.len(), 1);
        let m = largest_fragment(&p("[Na+].[Cl-]"));
        assert_eq!(m.atoms[0].element, "Cl");
        let connected = p("CC(=O)O");
        assert_eq!(largest_fragment(&connected), connected);
    }

    #[test]
    fn charged_valences() {
        let m = p("C[N+](C)(C)C");
        assert_eq!(m.atoms[1].total_valence, 4.0);
        let m = p("CC(=O)[O-]");
        assert_eq!(m.atoms[3].total_h(), 0);
        let m = p("OS(=O)(=O)O");
        assert_eq!(m.atoms[1].implicit_h, 0);
        assert_eq!(m.atoms[1].hybridization, Hybridization::SP);
        let m = p("CP(C)C");
        assert_eq!(m.atoms[1].implicit_h, 0);
    }

    #[test]
    fn metals_are_other() {
        let m = p("[Fe+2]");
        assert_eq!(m.atoms[0].hybridization, Hybridization::Other);
    }
}
