//! Molecular graphs: SMILES parsing, chemical perception, canonical
//! ordering and Gasteiger partial charges.

mod canon;
mod gasteiger;
mod parse;
mod paths;
mod perceive;

use serde::{Deserialize, Serialize};

use crate::element::{self, Element};

pub use canon::{canonical_ranks, canonical_smiles, write_canonical_smiles, write_smiles};
pub use gasteiger::{
    assign_partial_charges, gasteiger_charges, gasteiger_charges_with, GasteigerCharges, GasteigerParams,
};
pub use parse::parse_smiles;
pub use paths::{all_pairs_distances, DistanceMatrix};
pub use perceive::{largest_fragment, perceive};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    /// Bond order as a real number; aromatic bonds count 1.5.
    pub fn value(self) -> f64 {
        match self {
            BondOrder::Single => 1.0,
            BondOrder::Double => 2.0,
            BondOrder::Triple => 3.0,
            BondOrder::Aromatic => 1.5,
        }
    }

    /// Integer contribution to valence, aromatic counted as single.
    pub(crate) fn integral(self) -> u32 {
        match self {
            BondOrder::Single | BondOrder::Aromatic => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Hybridization {
    SP,
    SP2,
    SP3,
    Other,
}

impl Hybridization {
    pub fn name(self) -> &'static str {
        match self {
            Hybridization::SP => "SP",
            Hybridization::SP2 => "SP2",
            Hybridization::SP3 => "SP3",
            Hybridization::Other => "OTHER",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub element: &'static str,
    pub atomic_number: u8,
    pub formal_charge: i32,
    pub explicit_h: u32,
    pub implicit_h: u32,
    pub aromatic: bool,
    pub in_ring: bool,
    pub degree: usize,
    pub total_valence: f64,
    pub hybridization: Hybridization,
    pub partial_charge: f64,
    /// Written in bracket form, so hydrogens are explicit.
    pub bracket: bool,
}

impl Atom {
    pub fn new(element: &'static Element) -> Self {
        Atom {
            element: element.symbol,
            atomic_number: element.atomic_number,
            formal_charge: 0,
            explicit_h: 0,
            implicit_h: 0,
            aromatic: false,
            in_ring: false,
            degree: 0,
            total_valence: 0.0,
            hybridization: Hybridization::SP3,
            partial_charge: 0.0,
            bracket: false,
        }
    }

    pub fn element_data(&self) -> &'static Element {
        element::by_number(self.atomic_number).expect("atom built from periodic table")
    }

    pub fn total_h(&self) -> u32 {
        self.explicit_h + self.implicit_h
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub order: BondOrder,
    pub in_ring: bool,
}

impl Bond {
    pub fn other(&self, atom: usize) -> usize {
        if self.a == atom {
            self.b
        } else {
            self.a
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MolGraph {
    pub atoms: Vec<Atom>,
    pub bonds: Vec<Bond>,
    /// Per atom: (neighbor, bond index), in bond insertion order.
    pub adjacency: Vec<Vec<(usize, usize)>>,
    pub source_smiles: String,
}

impl MolGraph {
    pub fn new(source_smiles: impl Into<String>) -> Self {
        MolGraph {
            atoms: Vec::new(),
            bonds: Vec::new(),
            adjacency: Vec::new(),
            source_smiles: source_smiles.into(),
        }
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn add_atom(&mut self, atom: Atom) -> usize {
        self.atoms.push(atom);
        self.adjacency.push(Vec::new());
        self.atoms.len() - 1
    }

    /// Adds a bond. Returns `None` for self-loops and duplicate pairs.
    pub fn add_bond(&mut self, a: usize, b: usize, order: BondOrder) -> Option<usize> {
        if a == b || self.bond_between(a, b).is_some() {
            return None;
        }
        let idx = self.bonds.len();
        self.bonds.push(Bond {
            a,
            b,
            order,
            in_ring: false,
        });
        self.adjacency[a].push((b, idx));
        self.adjacency[b].push((a, idx));
        Some(idx)
    }

    pub fn bond_between(&self, a: usize, b: usize) -> Option<usize> {
        self.adjacency.get(a)?.iter().find(|&&(n, _)| n == b).map(|&(_, bi)| bi)
    }

    pub fn neighbors(&self, atom: usize) -> impl Iterator<Item = usize> + '_ {
        self.adjacency[atom].iter().map(|&(n, _)| n)
    }

    /// Connected components as sorted atom index lists, ordered by their
    /// lowest atom index.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.atoms.len();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            let mut comp = vec![start];
            seen[start] = true;
            let mut i = 0;
            while i < comp.len() {
                let u = comp[i];
                for v in self.neighbors(u) {
                    if !seen[v] {
                        seen[v] = true;
                        comp.push(v);
                    }
                }
                i += 1;
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    pub fn is_connected(&self) -> bool {
        self.components().len() <= 1
    }

    /// Induced subgraph on `atoms` (kept in the given order).
    pub fn subgraph(&self, atoms: &[usize]) -> MolGraph {
        let mut map = vec![usize::MAX; self.atoms.len()];
        let mut out = MolGraph::new(self.source_smiles.clone());
        for &a in atoms {
            map[a] = out.add_atom(self.atoms[a].clone());
        }
        for bond in &self.bonds {
            let (a, b) = (map[bond.a], map[bond.b]);
            if a != usize::MAX && b != usize::MAX {
                let idx = out.add_bond(a, b, bond.order).expect("subgraph of a simple graph");
                out.bonds[idx].in_ring = bond.in_ring;
            }
        }
        out
    }

    /// Same molecule with atoms renumbered: new atom `i` is old atom `order[i]`.
    /// Bonds are re-inserted sorted by their new endpoints.
    pub fn renumbered(&self, order: &[usize]) -> MolGraph {
        assert_eq!(order.len(), self.atoms.len());
        let mut inverse = vec![0; order.len()];
        for (new, &old) in order.iter().enumerate() {
            inverse[old] = new;
        }
        let mut out = MolGraph::new(self.source_smiles.clone());
        for &old in order {
            out.add_atom(self.atoms[old].clone());
        }
        let mut bonds: Vec<Bond> = self
            .bonds
            .iter()
            .map(|b| {
                let (x, y) = (inverse[b.a], inverse[b.b]);
                Bond {
                    a: x.min(y),
                    b: x.max(y),
                    ..*b
                }
            })
            .collect();
        bonds.sort_by_key(|b| (b.a, b.b));
        for b in bonds {
            let idx = out.add_bond(b.a, b.b, b.order).expect("simple graph");
            out.bonds[idx].in_ring = b.in_ring;
        }
        out
    }

    pub fn net_formal_charge(&self) -> i32 {
        self.atoms.iter().map(|a| a.formal_charge).sum()
    }

    /// Cyclomatic number E - V + C.
    pub fn cyclomatic_number(&self) -> usize {
        (self.bonds.len() + self.components().len()).saturating_sub(self.atoms.len())
    }
}

/// Parse, perceive, reduce to the largest fragment and assign partial
/// charges (zero when the parameter table does not cover an atom).
pub fn prepare(smiles: &str) -> crate::Result<MolGraph> {
    let mol = perceive(&parse_smiles(smiles)?)?;
    let mut mol = largest_fragment(&mol);
    assign_partial_charges(&mut mol);
    Ok(mol)
}
