//! Gasteiger–Marsili partial equalization of orbital electronegativity.

use std::sync::OnceLock;

use super::{Hybridization, MolGraph};
use crate::error::{ChemError, Result};

const BUNDLED: &str = include_str!("../../data/gasteiger.tsv");

/// Cation electronegativity used for hydrogen in place of a + b + c.
const HYDROGEN_CATION_CHI: f64 = 20.02;

pub const ITERATIONS: usize = 8;
pub const DAMPING: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    element: String,
    hybridization: Option<Hybridization>,
    coeffs: [f64; 3],
}

/// Parameter table: `element, hybridization, a, b, c` per line, tab or
/// whitespace separated, `#` comments. Hybridization `*` is a wildcard.
#[derive(Debug, Clone, PartialEq)]
pub struct GasteigerParams {
    entries: Vec<Entry>,
}

impl GasteigerParams {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let bad = || ChemError::Format(format!("gasteiger table line {}: {line:?}", lineno + 1));
            if fields.len() != 5 {
                return Err(bad());
            }
            let hybridization = match fields[1].to_ascii_uppercase().as_str() {
                "*" => None,
                "SP" => Some(Hybridization::SP),
                "SP2" => Some(Hybridization::SP2),
                "SP3" => Some(Hybridization::SP3),
                _ => return Err(bad()),
            };
            let mut coeffs = [0.0; 3];
            for (c, f) in coeffs.iter_mut().zip(&fields[2..]) {
                *c = f.parse().map_err(|_| bad())?;
            }
            entries.push(Entry {
                element: fields[0].to_string(),
                hybridization,
                coeffs,
            });
        }
        Ok(GasteigerParams { entries })
    }

    pub fn bundled() -> &'static GasteigerParams {
        static PARAMS: OnceLock<GasteigerParams> = OnceLock::new();
        PARAMS.get_or_init(|| GasteigerParams::parse(BUNDLED).expect("bundled table parses"))
    }

    /// (a, b, c) for an element and hybridization. Falls back to a wildcard
    /// row, then to the next lower hybridization state (SP → SP2 → SP3).
    pub fn lookup(&self, element: &str, hybridization: Hybridization) -> Option<[f64; 3]> {
        let find = |h: Option<Hybridization>| {
            self.entries
                .iter()
                .find(|e| e.element == element && e.hybridization == h)
                .map(|e| e.coeffs)
        };
        let chain: &[Hybridization] = match hybridization {
            Hybridization::SP => &[Hybridization::SP, Hybridization::SP2, Hybridization::SP3],
            Hybridization::SP2 => &[Hybridization::SP2, Hybridization::SP3],
            Hybridization::SP3 => &[Hybridization::SP3],
            Hybridization::Other => &[],
        };
        if let Some(c) = chain.first().and_then(|&h| find(Some(h))) {
            return Some(c);
        }
        find(None).or_else(|| chain.iter().skip(1).find_map(|&h| find(Some(h))))
    }
}

/// Converged charges. Hydrogens are represented per heavy atom as the
/// summed charge of its attached hydrogens.
#[derive(Debug, Clone, PartialEq)]
pub struct GasteigerCharges {
    /// Charge on each heavy atom alone.
    pub heavy: Vec<f64>,
    /// Total charge carried by the hydrogens attached to each heavy atom.
    pub hydrogens: Vec<f64>,
}

impl GasteigerCharges {
    /// Heavy-atom charges with their hydrogens' charges absorbed.
    pub fn absorbed(&self) -> Vec<f64> {
        self.heavy.iter().zip(&self.hydrogens).map(|(q, h)| q + h).collect()
    }
}

pub fn gasteiger_charges(mol: &MolGraph) -> Result<GasteigerCharges> {
    gasteiger_charges_with(mol, GasteigerParams::bundled())
}

pub fn gasteiger_charges_with(mol: &MolGraph, params: &GasteigerParams) -> Result<GasteigerCharges> {
    let n = mol.atoms.len();
    let mut coeffs: Vec<[f64; 3]> = Vec::with_capacity(n);
    let mut charge: Vec<f64> = Vec::with_capacity(n);
    for atom in &mol.atoms {
        let c = params
            .lookup(atom.element, atom.hybridization)
            .ok_or(ChemError::MissingParameter {
                element: atom.element,
                hybridization: atom.hybridization.name(),
            })?;
        coeffs.push(c);
        charge.push(atom.formal_charge as f64);
    }
    let mut links: Vec<(usize, usize)> = mol.bonds.iter().map(|b| (b.a, b.b)).collect();
    let mut owner = Vec::new();
    let h_coeffs = params.lookup("H", Hybridization::SP3);
    for (i, atom) in mol.atoms.iter().enumerate() {
        for _ in 0..atom.total_h() {
            let c = h_coeffs.ok_or(ChemError::MissingParameter {
                element: "H",
                hybridization: "SP3",
            })?;
            links.push((i, coeffs.len()));
            coeffs.push(c);
            charge.push(0.0);
            owner.push(i);
        }
    }
    let cation: Vec<f64> = coeffs
        .iter()
        .enumerate()
        .map(|(k, c)| {
            if k >= n {
                HYDROGEN_CATION_CHI
            } else {
                c[0] + c[1] + c[2]
            }
        })
        .collect();

    let total = coeffs.len();
    let mut chi = vec![0.0; total];
    let mut delta = vec![0.0; total];
    let mut damp = 1.0;
    for _ in 0..ITERATIONS {
        damp *= DAMPING;
        for k in 0..total {
            let q = charge[k];
            let [a, b, c] = coeffs[k];
            chi[k] = a + b * q + c * q * q;
        }
        delta.iter_mut().for_each(|d| *d = 0.0);
        for &(i, j) in &links {
            let (donor, acceptor) = if chi[j] > chi[i] {
                (i, j)
            } else if chi[i] > chi[j] {
                (j, i)
            } else {
                continue;
            };
            let moved = (chi[acceptor] - chi[donor]) / cation[donor] * damp;
            delta[donor] += moved;
            delta[acceptor] -= moved;
        }
        for (q, d) in charge.iter_mut().zip(&delta) {
            *q += d;
        }
    }

    let mut hydrogens = vec![0.0; n];
    for (k, &i) in owner.iter().enumerate() {
        hydrogens[i] += charge[n + k];
    }
    charge.truncate(n);
    Ok(GasteigerCharges {
        heavy: charge,
        hydrogens,
    })
}

/// Writes absorbed Gasteiger charges into `partial_charge`. Returns `false`
/// and leaves all charges at zero when a parameter is missing.
pub fn assign_partial_charges(mol: &mut MolGraph) -> bool {
    match gasteiger_charges(mol) {
        Ok(q) => {
            for (atom, c) in mol.atoms.iter_mut().zip(q.absorbed()) {
                atom.partial_charge = c;
            }
            true
        }
        Err(_) => {
            for atom in &mut mol.atoms {
                atom.partial_charge = 0.0;
            }
            false
        }
    }
}
