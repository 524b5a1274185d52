use std::collections::BTreeMap;

use super::{perceive, Atom, BondOrder, MolGraph};
use crate::element;
use crate::error::{ChemError, Result};

/// Parse a SMILES string into a molecular graph.
///
/// Supports the organic subset, bracket atoms (isotope, chirality and atom
/// class are accepted and dropped), ring closures including `%nn`, branches,
/// explicit bond symbols and dot-separated fragments. Directional bonds
/// `/` and `\` read as single bonds. Hydrogen atoms written as `[H]` and
/// bonded to a single heavy atom are folded into that atom's hydrogen count.
/// Implicit hydrogens are assigned here; the remaining attributes are filled
/// by [`perceive`](super::perceive).
pub fn parse_smiles(text: &str) -> Result<MolGraph> {
    if text.is_empty() {
        return Err(ChemError::syntax(0, "empty SMILES"));
    }
    if let Some(pos) = text.bytes().position(|b| !b.is_ascii() || b.is_ascii_whitespace()) {
        return Err(ChemError::syntax(pos, "non-ASCII or whitespace character"));
    }
    let mut parser = Parser {
        bytes: text.as_bytes(),
        pos: 0,
        mol: MolGraph::new(text),
        prev: None,
        branches: Vec::new(),
        pending_bond: None,
        rings: BTreeMap::new(),
    };
    parser.run()?;
    let mut mol = parser.mol;
    fold_explicit_hydrogens(&mut mol);
    perceive::assign_implicit_hydrogens(&mut mol)?;
    Ok(mol)
}

struct Parser<'a> {
    bytes: &'a [u8],
    pos: usize,
    mol: MolGraph,
    prev: Option<usize>,
    branches: Vec<usize>,
    pending_bond: Option<(BondOrder, usize)>,
    rings: BTreeMap<u32, (usize, Option<BondOrder>, usize)>,
}

impl Parser<'_> {
    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn err<T>(&self, message: &str) -> Result<T> {
        Err(ChemError::syntax(self.pos, message))
    }

    fn run(&mut self) -> Result<()> {
        while let Some(c) = self.peek() {
            match c {
                b'(' => {
                    let Some(prev) = self.prev else {
                        return self.err("branch without a preceding atom");
                    };
                    if self.pending_bond.is_some() {
                        return self.err("bond symbol before branch");
                    }
                    self.branches.push(prev);
                    self.pos += 1;
                }
                b')' => {
                    let Some(atom) = self.branches.pop() else {
                        return self.err("unbalanced ')'");
                    };
                    if self.pending_bond.is_some() {
                        return self.err("dangling bond symbol");
                    }
                    if self.bytes.get(self.pos.wrapping_sub(1)) == Some(&b'(') {
                        return self.err("empty branch");
                    }
                    self.prev = Some(atom);
                    self.pos += 1;
                }
                b'-' | b'=' | b'#' | b':' | b'/' | b'\\' => {
                    if self.pending_bond.is_some() {
                        return self.err("consecutive bond symbols");
                    }
                    if self.prev.is_none() {
                        return self.err("bond symbol without a preceding atom");
                    }
                    let order = match c {
                        b'=' => BondOrder::Double,
                        b'#' => BondOrder::Triple,
                        b':' => BondOrder::Aromatic,
                        _ => BondOrder::Single,
                    };
                    self.pending_bond = Some((order, self.pos));
                    self.pos += 1;
                }
                b'.' => {
                    if self.pending_bond.is_some() {
                        return self.err("bond symbol before '.'");
                    }
                    if self.prev.is_none() {
                        return self.err("'.' without a preceding atom");
                    }
                    self.prev = None;
                    self.pos += 1;
                }
                b'0'..=b'9' | b'%' => self.ring_closure()?,
                b'[' => {
                    let atom = self.bracket_atom()?;
                    self.attach(atom)?;
                }
                _ => {
                    let atom = self.organic_atom()?;
                    self.attach(atom)?;
                }
            }
        }
        if !self.branches.is_empty() {
            return self.err("unbalanced '('");
        }
        if let Some((&label, &(_, _, pos))) = self.rings.iter().next() {
            return Err(ChemError::syntax(pos, format!("unmatched ring closure {label}")));
        }
        if self.pending_bond.is_some() {
            return self.err("dangling bond symbol");
        }
        if self.mol.atoms.is_empty() {
            return self.err("no atoms");
        }
        Ok(())
    }

    fn default_order(&self, a: usize, b: usize) -> BondOrder {
        if self.mol.atoms[a].aromatic && self.mol.atoms[b].aromatic {
            BondOrder::Aromatic
        } else {
            BondOrder::Single
        }
    }

    fn check_order(&self, a: usize, b: usize, order: BondOrder, pos: usize) -> Result<()> {
        if order == BondOrder::Aromatic && !(self.mol.atoms[a].aromatic && self.mol.atoms[b].aromatic) {
            return Err(ChemError::syntax(pos, "aromatic bond between non-aromatic atoms"));
        }
        Ok(())
    }

    fn attach(&mut self, atom: Atom) -> Result<()> {
        let idx = self.mol.add_atom(atom);
        if let Some(prev) = self.prev {
            let (order, pos) = match self.pending_bond.take() {
                Some(b) => b,
                None => (self.default_order(prev, idx), self.pos),
            };
            self.check_order(prev, idx, order, pos)?;
            self.mol.add_bond(prev, idx, order);
        }
        self.prev = Some(idx);
        Ok(())
    }

    fn ring_closure(&mut self) -> Result<()> {
        let start = self.pos;
        let Some(atom) = self.prev else {
            return self.err("ring closure without a preceding atom");
        };
        let label = if self.bytes[self.pos] == b'%' {
            let digits = self.bytes.get(self.pos + 1..self.pos + 3);
            match digits {
                Some(d) if d.iter().all(u8::is_ascii_digit) => {
                    self.pos += 3;
                    ((d[0] - b'0') as u32) * 10 + (d[1] - b'0') as u32
                }
                _ => return self.err("'%' must be followed by two digits"),
            }
        } else {
            self.pos += 1;
            (self.bytes[start] - b'0') as u32
        };
        let bond = self.pending_bond.take();
        match self.rings.remove(&label) {
            Some((other, open_bond, _)) => {
                if other == atom || self.mol.bond_between(other, atom).is_some() {
                    return Err(ChemError::syntax(start, "ring closure duplicates a bond"));
                }
                let order = match (open_bond, bond.map(|b| b.0)) {
                    (Some(x), Some(y)) if x != y => {
                        return Err(ChemError::syntax(start, "conflicting ring-closure bonds"))
                    }
                    (Some(x), _) | (None, Some(x)) => x,
                    (None, None) => self.default_order(other, atom),
                };
                self.check_order(other, atom, order, start)?;
                self.mol.add_bond(other, atom, order);
            }
            None => {
                self.rings.insert(label, (atom, bond.map(|b| b.0), start));
            }
        }
        Ok(())
    }

    fn organic_atom(&mut self) -> Result<Atom> {
        let c = self.bytes[self.pos];
        let next = self.bytes.get(self.pos + 1).copied();
        let (symbol, aromatic, len) = match (c, next) {
            (b'C', Some(b'l')) => ("Cl", false, 2),
            (b'B', Some(b'r')) => ("Br", false, 2),
            (b'B', _) => ("B", false, 1),
            (b'C', _) => ("C", false, 1),
            (b'N', _) => ("N", false, 1),
            (b'O', _) => ("O", false, 1),
            (b'P', _) => ("P", false, 1),
            (b'S', _) => ("S", false, 1),
            (b'F', _) => ("F", false, 1),
            (b'I', _) => ("I", false, 1),
            (b'b', _) => ("B", true, 1),
            (b'c', _) => ("C", true, 1),
            (b'n', _) => ("N", true, 1),
            (b'o', _) => ("O", true, 1),
            (b'p', _) => ("P", true, 1),
            (b's', _) => ("S", true, 1),
            _ => return self.err("unknown symbol"),
        };
        self.pos += len;
        let mut atom = Atom::new(element::by_symbol(symbol).expect("organic subset in table"));
        atom.aromatic = aromatic;
        Ok(atom)
    }

    fn bracket_atom(&mut self) -> Result<Atom> {
        let open = self.pos;
        self.pos += 1;
        while matches!(self.peek(), Some(b'0'..=b'9')) {
            self.pos += 1;
        }
        let (elem, aromatic) = self.bracket_symbol()?;
        let mut atom = Atom::new(elem);
        atom.aromatic = aromatic;
        atom.bracket = true;
        // chirality
        if self.peek() == Some(b'@') {
            self.pos += 1;
            if self.peek() == Some(b'@') {
                self.pos += 1;
            }
            let class = self.bytes.get(self.pos..self.pos + 2);
            if matches!(class, Some(b"TH" | b"AL" | b"SP" | b"TB" | b"OH")) {
                self.pos += 2;
                while matches!(self.peek(), Some(b'0'..=b'9')) {
                    self.pos += 1;
                }
            }
        }
        if self.peek() == Some(b'H') {
            self.pos += 1;
            atom.explicit_h = match self.peek() {
                Some(d @ b'0'..=b'9') => {
                    self.pos += 1;
                    (d - b'0') as u32
                }
                _ => 1,
            };
        }
        if let Some(sign @ (b'+' | b'-')) = self.peek() {
            self.pos += 1;
            let unit = if sign == b'+' { 1 } else { -1 };
            let mut magnitude = 1;
            match self.peek() {
                Some(d @ b'1'..=b'9') => {
                    self.pos += 1;
                    magnitude = (d - b'0') as i32;
                    if let Some(d2 @ b'0'..=b'9') = self.peek() {
                        self.pos += 1;
                        magnitude = magnitude * 10 + (d2 - b'0') as i32;
                    }
                }
                _ => {
                    while self.peek() == Some(sign) {
                        self.pos += 1;
                        magnitude += 1;
                    }
                }
            }
            atom.formal_charge = unit * magnitude;
        }
        if self.peek() == Some(b':') {
            self.pos += 1;
            let digits_start = self.pos;
            while matches!(self.peek(), Some(b'0'..=b'9')) {
                self.pos += 1;
            }
            if self.pos == digits_start {
                return self.err("atom class without digits");
            }
        }
        if self.peek() != Some(b']') {
            return Err(ChemError::syntax(open, "unterminated bracket atom"));
        }
        self.pos += 1;
        Ok(atom)
    }

    fn bracket_symbol(&mut self) -> Result<(&'static element::Element, bool)> {
        let rest = &self.bytes[self.pos..];
        let take2 = rest.get(..2).and_then(|s| std::str::from_utf8(s).ok());
        // aromatic two-letter forms
        for (form, sym) in [("se", "Se"), ("as", "As")] {
            if take2 == Some(form) {
                self.pos += 2;
                return Ok((element::by_symbol(sym).expect("in table"), true));
            }
        }
        match rest.first() {
            Some(c) if c.is_ascii_uppercase() => {
                if let Some(two) = take2 {
                    if two.as_bytes()[1].is_ascii_lowercase() {
                        if let Some(e) = element::by_symbol(two) {
                            self.pos += 2;
                            return Ok((e, false));
                        }
                    }
                }
                let one = std::str::from_utf8(&rest[..1]).expect("ascii");
                match element::by_symbol(one) {
                    Some(e) => {
                        self.pos += 1;
                        Ok((e, false))
                    }
                    None => self.err("unknown element"),
                }
            }
            Some(b'b' | b'c' | b'n' | b'o' | b'p' | b's') => {
                let sym = (rest[0] as char).to_ascii_uppercase().to_string();
                self.pos += 1;
                Ok((element::by_symbol(&sym).expect("in table"), true))
            }
            _ => self.err("unknown element"),
        }
    }
}

/// Folds neutral `[H]` atoms bonded to exactly one heavy atom into that
/// atom's explicit hydrogen count.
fn fold_explicit_hydrogens(mol: &mut MolGraph) {
    let removable: Vec<usize> = (0..mol.atoms.len())
        .filter(|&i| {
            let a = &mol.atoms[i];
            a.atomic_number == 1 && a.formal_charge == 0 && a.explicit_h == 0 && mol.adjacency[i].len() == 1 && {
                let (n, bi) = mol.adjacency[i][0];
                mol.atoms[n].atomic_number != 1 && mol.bonds[bi].order == BondOrder::Single
            }
        })
        .collect();
    if removable.is_empty() {
        return;
    }
    for &h in &removable {
        let heavy = mol.adjacency[h][0].0;
        mol.atoms[heavy].explicit_h += 1;
    }
    let keep: Vec<usize> = (0..mol.atoms.len()).filter(|i| !removable.contains(i)).collect();
    let source = std::mem::take(&mut mol.source_smiles);
    let mut sub = mol.subgraph(&keep);
    sub.source_smiles = source;
    *mol = sub;
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(s: &str) -> &'static str {
        parse_smiles(s).unwrap_err().kind()
    }

    #[test]
    fn ethanol_skeleton() {
        let m = parse_smiles("CCO").unwrap();
        let syms: Vec<_> = m.atoms.iter().map(|a| a.element).collect();
        assert_eq!(syms, ["C", "C", "O"]);
        assert_eq!(m.bonds.len(), 2);
        assert!(m.bonds.iter().all(|b| b.order == BondOrder::Single));
    }

    #[test]
    fn benzene_ring_closure() {
        let m = parse_smiles("c1ccccc1").unwrap();
        assert_eq!(m.atoms.len(), 6);
        assert!(m.atoms.iter().all(|a| a.aromatic && a.element == "C"));
        assert_eq!(m.bonds.len(), 6);
        assert!(m.bonds.iter().all(|b| b.order == BondOrder::Aromatic));
    }

    #[test]
    fn ammonium_bracket() {
        let m = parse_smiles("[NH4+]").unwrap();
        assert_eq!(m.atoms.len(), 1);
        assert_eq!(m.atoms[0].formal_charge, 1);
        assert_eq!(m.atoms[0].explicit_h, 4);
        assert_eq!(m.atoms[0].implicit_h, 0);
        assert!(m.bonds.is_empty());
    }

    #[test]
    fn neopentane_branches() {
        let m = parse_smiles("C(C)(C)(C)C").unwrap();
        assert_eq!(m.adjacency[0].len(), 4);
    }

    #[test]
    fn percent_ring_labels_and_bond_symbols() {
        let m = parse_smiles("C%12CC=CC%12").unwrap();
        assert_eq!(m.bonds.len(), 5);
        let m = parse_smiles("C=1CCCCC=1").unwrap();
        let bi = m.bond_between(0, 5).unwrap();
        assert_eq!(m.bonds[bi].order, BondOrder::Double);
        let m = parse_smiles("C#N").unwrap();
        assert_eq!(m.bonds[0].order, BondOrder::Triple);
    }

    #[test]
    fn stereo_and_isotopes_are_dropped() {
        let a = parse_smiles("F/C=C/F").unwrap();
        let b = parse_smiles("FC=CF").unwrap();
        assert_eq!(a.atoms, b.atoms);
        let m = parse_smiles("[13CH3][C@@H](O)N").unwrap();
        assert_eq!(m.atoms[0].element, "C");
        assert_eq!(m.atoms[0].explicit_h, 3);
        assert_eq!(m.atoms[1].explicit_h, 1);
    }

    #[test]
    fn charges() {
        assert_eq!(parse_smiles("[O-]").unwrap().atoms[0].formal_charge, -1);
        assert_eq!(parse_smiles("[Fe++]").unwrap().atoms[0].formal_charge, 2);
        assert_eq!(parse_smiles("[Fe+3]").unwrap().atoms[0].formal_charge, 3);
        assert_eq!(parse_smiles("[N+](=O)[O-]").unwrap().net_formal_charge(), 0);
    }

    #[test]
    fn fragments() {
        let m = parse_smiles("CCO.Cl").unwrap();
        assert_eq!(m.components().len(), 2);
    }

    #[test]
    fn explicit_hydrogen_atoms_fold() {
        let m = parse_smiles("[H]C([H])([H])[H]").unwrap();
        assert_eq!(m.atoms.len(), 1);
        assert_eq!(m.atoms[0].total_h(), 4);
        let m = parse_smiles("C[H]").unwrap();
        assert_eq!(m.atoms.len(), 1);
        assert_eq!(m.atoms[0].total_h(), 4);
    }

    #[test]
    fn two_letter_elements() {
        let m = parse_smiles("ClCBr").unwrap();
        let syms: Vec<_> = m.atoms.iter().map(|a| a.element).collect();
        assert_eq!(syms, ["Cl", "C", "Br"]);
        assert_eq!(parse_smiles("[Cl-]").unwrap().atoms[0].element, "Cl");
        assert_eq!(parse_smiles("[se]1cccc1").unwrap().atoms[0].element, "Se");
    }

    #[test]
    fn syntax_errors() {
        for bad in [
            "", "C(C", "CC)", "C1CC", "X", "C==C", "[C", "C()", "(C)", "[Xe]", "CC C", "é",
        ] {
            assert_eq!(kinds(bad), "SyntaxError", "{bad:?}");
        }
    }

    #[test]
    fn valence_errors() {
        for bad in ["C(C)(C)(C)(C)C", "O=O=O", "FC(F)(F)(F)F", "[NH4]"] {
            assert_eq!(kinds(bad), "ValenceError", "{bad:?}");
        }
    }
}
