//! Rule-based molecular descriptors used as weak-supervision labels, and
//! their min-max normalization.
//!
//! The registry holds constitutional and topological descriptors; the
//! topological ones are computed on the heavy-atom graph.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::element::HYDROGEN_MASS;
use crate::error::{ChemError, Result};
use crate::molgraph::{all_pairs_distances, BondOrder, Hybridization, MolGraph};

pub const REGISTRY_VERSION: &str = "weakchem-descriptors-v1";

/// Descriptor names in registry order.
pub const REGISTRY: [&str; 21] = [
    "molecular_weight",
    "heavy_atom_count",
    "heteroatom_count",
    "total_h_count",
    "ring_count",
    "aromatic_atom_count",
    "rotatable_bond_count",
    "hbd",
    "hba",
    "net_formal_charge",
    "fraction_csp3",
    "wiener",
    "zagreb_m1",
    "zagreb_m2",
    "randic_chi0",
    "randic_chi1",
    "balaban_j",
    "kier_kappa1",
    "kier_kappa2",
    "graph_diameter",
    "graph_radius",
];

pub fn registry_index(name: &str) -> Option<usize> {
    REGISTRY.iter().position(|&n| n == name)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptorVector {
    pub values: Vec<f64>,
    pub registry_version: String,
}

impl DescriptorVector {
    pub fn get(&self, name: &str) -> Option<f64> {
        registry_index(name).and_then(|i| self.values.get(i).copied())
    }

    /// Restrict to the named descriptors, tagging the registry version with
    /// the selection so stats fitted on one subset cannot be applied to another.
    pub fn select(&self, names: &[String]) -> Result<DescriptorVector> {
        let idx = selection_indices(names)?;
        Ok(DescriptorVector {
            values: idx.iter().map(|&i| self.values[i]).collect(),
            registry_version: selection_version(names),
        })
    }
}

pub fn selection_indices(names: &[String]) -> Result<Vec<usize>> {
    names
        .iter()
        .map(|n| {
            registry_index(n).ok_or_else(|| ChemError::RegistryMismatch {
                expected: REGISTRY.join(","),
                found: n.clone(),
            })
        })
        .collect()
}

pub fn selection_version(names: &[String]) -> String {
    if names.len() == REGISTRY.len() && names.iter().zip(REGISTRY).all(|(a, b)| a == b) {
        REGISTRY_VERSION.to_string()
    } else {
        format!("{REGISTRY_VERSION}[{}]", names.join(","))
    }
}

/// Compute every registry descriptor for a connected, perceived molecule.
pub fn compute_descriptors(mol: &MolGraph) -> DescriptorVector {
    let heavy: Vec<usize> = (0..mol.atoms.len())
        .filter(|&i| mol.atoms[i].atomic_number > 1)
        .collect();
    let n_heavy = heavy.len();
    let explicit_h_atoms = mol.atoms.len() - n_heavy;

    let mut mass = 0.0;
    let mut hetero = 0usize;
    let mut total_h = explicit_h_atoms;
    let mut aromatic = 0usize;
    let mut hbd = 0usize;
    let mut hba = 0usize;
    let mut carbons = 0usize;
    let mut sp3_carbons = 0usize;
    for atom in &mol.atoms {
        mass += atom.element_data().mass + atom.total_h() as f64 * HYDROGEN_MASS;
        if atom.atomic_number == 1 {
            continue;
        }
        total_h += atom.total_h() as usize;
        if atom.atomic_number != 6 {
            hetero += 1;
        } else {
            carbons += 1;
            if atom.hybridization == Hybridization::SP3 {
                sp3_carbons += 1;
            }
        }
        if atom.aromatic {
            aromatic += 1;
        }
        if matches!(atom.atomic_number, 7 | 8) {
            hba += 1;
            if atom.total_h() > 0 {
                hbd += 1;
            }
        }
    }

    let sub;
    let graph = if explicit_h_atoms > 0 {
        sub = mol.subgraph(&heavy);
        &sub
    } else {
        mol
    };
    let topo = topological(graph);

    let rotatable = graph
        .bonds
        .iter()
        .filter(|b| {
            b.order == BondOrder::Single
                && !b.in_ring
                && graph.adjacency[b.a].len() >= 2
                && graph.adjacency[b.b].len() >= 2
        })
        .count();

    let values = vec![
        mass,
        n_heavy as f64,
        hetero as f64,
        total_h as f64,
        graph.cyclomatic_number() as f64,
        aromatic as f64,
        rotatable as f64,
        hbd as f64,
        hba as f64,
        mol.net_formal_charge() as f64,
        if carbons == 0 {
            0.0
        } else {
            sp3_carbons as f64 / carbons as f64
        },
        topo.wiener,
        topo.zagreb_m1,
        topo.zagreb_m2,
        topo.chi0,
        topo.chi1,
        topo.balaban_j,
        topo.kappa1,
        topo.kappa2,
        topo.diameter,
        topo.radius,
    ];
    debug_assert_eq!(values.len(), REGISTRY.len());
    DescriptorVector {
        values,
        registry_version: REGISTRY_VERSION.to_string(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Topological {
    pub wiener: f64,
    pub zagreb_m1: f64,
    pub zagreb_m2: f64,
    pub chi0: f64,
    pub chi1: f64,
    pub balaban_j: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    pub diameter: f64,
    pub radius: f64,
}

/// Topological indices of a connected graph (all atoms treated as vertices).
pub fn topological(graph: &MolGraph) -> Topological {
    let n = graph.atoms.len();
    let dist = all_pairs_distances(graph);
    let degree: Vec<f64> = graph.adjacency.iter().map(|a| a.len() as f64).collect();
    let edges = graph.bonds.len();

    let mut wiener = 0u64;
    let mut row_sums = vec![0.0; n];
    let mut diameter = 0u32;
    let mut radius = u32::MAX;
    for (i, row_sum) in row_sums.iter_mut().enumerate() {
        let row = dist.row(i);
        let sum: u64 = row.iter().map(|&d| d as u64).sum();
        let ecc = row.iter().copied().max().unwrap_or(0);
        wiener += sum;
        *row_sum = sum as f64;
        diameter = diameter.max(ecc);
        radius = radius.min(ecc);
    }
    if n == 0 {
        radius = 0;
    }

    let zagreb_m1: f64 = degree.iter().map(|d| d * d).sum();
    let chi0: f64 = degree.iter().filter(|&&d| d > 0.0).map(|d| 1.0 / d.sqrt()).sum();
    let (mut zagreb_m2, mut chi1, mut balaban_sum) = (0.0, 0.0, 0.0);
    for b in &graph.bonds {
        let (di, dj) = (degree[b.a], degree[b.b]);
        zagreb_m2 += di * dj;
        chi1 += 1.0 / (di * dj).sqrt();
        balaban_sum += 1.0 / (row_sums[b.a] * row_sums[b.b]).sqrt();
    }
    let mu = graph.cyclomatic_number() as f64;
    let balaban_j = if edges == 0 {
        0.0
    } else {
        edges as f64 / (mu + 1.0) * balaban_sum
    };

    let a = n as f64;
    let p1 = edges as f64;
    let p2: f64 = degree.iter().map(|d| d * (d - 1.0) / 2.0).sum();
    let kappa1 = if p1 > 0.0 {
        a * (a - 1.0).powi(2) / (p1 * p1)
    } else {
        0.0
    };
    let kappa2 = if n < 3 || p2 == 0.0 {
        0.0
    } else {
        (a - 1.0) * (a - 2.0).powi(2) / (p2 * p2)
    };

    Topological {
        wiener: wiener as f64 / 2.0,
        zagreb_m1,
        zagreb_m2,
        chi0,
        chi1,
        balaban_j,
        kappa1,
        kappa2,
        diameter: diameter as f64,
        radius: radius as f64,
    }
}

/// Per-descriptor minimum and maximum over a fitting corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    pub registry_version: String,
}

/// Column-wise min/max of an N×D label matrix.
pub fn fit_normalizer(rows: &[Vec<f64>], registry_version: &str) -> Result<NormStats> {
    let first = rows.first().ok_or(ChemError::Empty("label matrix"))?;
    let d = first.len();
    let mut min = vec![f64::INFINITY; d];
    let mut max = vec![f64::NEG_INFINITY; d];
    for (r, row) in rows.iter().enumerate() {
        if row.len() != d {
            return Err(ChemError::Format(format!(
                "row {r} has {} columns, expected {d}",
                row.len()
            )));
        }
        for (c, &x) in row.iter().enumerate() {
            if !x.is_finite() {
                return Err(ChemError::NonFinite { row: r, column: c });
            }
            min[c] = min[c].min(x);
            max[c] = max[c].max(x);
        }
    }
    Ok(NormStats {
        min,
        max,
        registry_version: registry_version.to_string(),
    })
}

impl NormStats {
    fn check(&self, v: &DescriptorVector) -> Result<()> {
        if v.registry_version != self.registry_version || v.values.len() != self.min.len() {
            return Err(ChemError::RegistryMismatch {
                expected: self.registry_version.clone(),
                found: v.registry_version.clone(),
            });
        }
        Ok(())
    }

    /// (x - min) / (max - min), clamped to [0, 1]; constant columns map to 0.
    pub fn apply(&self, v: &DescriptorVector) -> Result<Vec<f64>> {
        self.check(v)?;
        Ok(v.values
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let span = self.max[i] - self.min[i];
                if span == 0.0 {
                    0.0
                } else {
                    ((x - self.min[i]) / span).clamp(0.0, 1.0)
                }
            })
            .collect())
    }

    pub fn invert(&self, normalized: &[f64]) -> Result<DescriptorVector> {
        if normalized.len() != self.min.len() {
            return Err(ChemError::RegistryMismatch {
                expected: format!("{} values", self.min.len()),
                found: format!("{} values", normalized.len()),
            });
        }
        Ok(DescriptorVector {
            values: normalized
                .iter()
                .enumerate()
                .map(|(i, &x)| self.min[i] + x * (self.max[i] - self.min[i]))
                .collect(),
            registry_version: self.registry_version.clone(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("stats serialize")
    }

    pub fn from_json(text: &str) -> Result<NormStats> {
        let stats: NormStats = serde_json::from_str(text).map_err(|e| ChemError::Format(e.to_string()))?;
        if stats.min.len() != stats.max.len() || stats.min.iter().zip(&stats.max).any(|(a, b)| a > b) {
            return Err(ChemError::Format("inconsistent min/max".into()));
        }
        Ok(stats)
    }
}

/// Writes a delimiter-separated label matrix whose header is the descriptor names.
pub fn write_label_matrix<W: Write>(out: W, names: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| ChemError::Io(e.to_string());
    w.write_record(names).map_err(io)?;
    for row in rows {
        w.write_record(row.iter().map(|x| format!("{x}"))).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molgraph::prepare;

    fn desc(s: &str) -> DescriptorVector {
        compute_descriptors(&prepare(s).unwrap())
    }

    #[test]
    fn propane() {
        let d = desc("CCC");
        assert_eq!(d.get("wiener"), Some(4.0));
        assert_eq!(d.get("zagreb_m1"), Some(6.0));
        assert!((d.get("randic_chi1").unwrap() - 2.0 / 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn butane_balaban() {
        let j = desc("CCCC").get("balaban_j").unwrap();
        let expected = 3.0 * (2.0 / 24f64.sqrt() + 0.25);
        assert!((j - expected).abs() < 1e-12);
        assert!((j - 1.9747).abs() < 5e-5);
    }

    #[test]
    fn ethanol_constitutional() {
        let d = desc("CCO");
        assert_eq!(d.get("hbd"), Some(1.0));
        assert_eq!(d.get("hba"), Some(1.0));
        assert!((d.get("molecular_weight").unwrap() - 46.069).abs() < 1e-3);
        assert_eq!(d.get("total_h_count"), Some(6.0));
        assert_eq!(d.get("fraction_csp3"), Some(1.0));
        assert_eq!(d.get("rotatable_bond_count"), Some(0.0));
    }

    #[test]
    fn single_atom_is_degenerate() {
        let d = desc("C");
        for name in [
            "wiener",
            "ring_count",
            "graph_diameter",
            "graph_radius",
            "balaban_j",
            "kier_kappa1",
            "kier_kappa2",
            "randic_chi1",
            "zagreb_m2",
        ] {
            assert_eq!(d.get(name), Some(0.0), "{name}");
        }
        assert!(d.values.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn kappa1_of_paths() {
        for n in 2..10 {
            let d = desc(&"C".repeat(n));
            assert!((d.get("kier_kappa1").unwrap() - n as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn ring_and_aromatic_counts() {
        let d = desc("c1ccc2ccccc2c1");
        assert_eq!(d.get("ring_count"), Some(2.0));
        assert_eq!(d.get("aromatic_atom_count"), Some(10.0));
        assert_eq!(d.get("fraction_csp3"), Some(0.0));
        let d = desc("CCCc1ccccc1");
        assert_eq!(d.get("rotatable_bond_count"), Some(2.0));
        let d = desc("CC(=O)[O-]");
        assert_eq!(d.get("net_formal_charge"), Some(-1.0));
        assert_eq!(d.get("heteroatom_count"), Some(2.0));
    }

    #[test]
    fn normalizer_examples() {
        let rows = vec![vec![1.0, 2.0], vec![3.0, 2.0], vec![5.0, 2.0]];
        let stats = fit_normalizer(&rows, "v").unwrap();
        assert_eq!((stats.min[0], stats.max[0]), (1.0, 5.0));
        assert_eq!((stats.min[1], stats.max[1]), (2.0, 2.0));
        let v = |x: f64| DescriptorVector {
            values: vec![x, 2.0],
            registry_version: "v".into(),
        };
        assert_eq!(stats.apply(&v(3.0)).unwrap(), vec![0.5, 0.0]);
        assert_eq!(stats.apply(&v(7.0)).unwrap()[0], 1.0);
        let back = stats.invert(&stats.apply(&v(4.2)).unwrap()).unwrap();
        assert!((back.values[0] - 4.2).abs() < 1e-12);
        let wrong = DescriptorVector {
            values: vec![1.0, 1.0],
            registry_version: "w".into(),
        };
        assert_eq!(stats.apply(&wrong).unwrap_err().kind(), "RegistryMismatch");
        assert_eq!(fit_normalizer(&[vec![f64::NAN]], "v").unwrap_err().kind(), "NonFinite");
        assert!(fit_normalizer(&[], "v").is_err());
        assert_eq!(NormStats::from_json(&stats.to_json()).unwrap(), stats);
    }

    #[test]
    fn subset_selection() {
        let d = desc("CCO");
        let names = vec!["hbd".to_string(), "wiener".to_string()];
        let s = d.select(&names).unwrap();
        assert_eq!(s.values, vec![1.0, 4.0]);
        assert_ne!(s.registry_version, REGISTRY_VERSION);
        assert!(d.select(&["nope".to_string()]).is_err());
    }

    #[test]
    fn label_matrix_export() {
        let mut buf = Vec::new();
        write_label_matrix(&mut buf, &["a", "b"], &[vec![1.0, 0.5]]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "a,b\n1,0.5\n");
    }
}
