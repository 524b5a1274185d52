//! Rule-labelled toy task used to exercise fine-tuning.

use weakchem_chem::MolGraph;

/// 1.0 when the molecule has an oxygen bearing at least one hydrogen and a
/// single heavy neighbor (alcohols, phenols, acids), else 0.0.
pub fn hydroxyl_label(mol: &MolGraph) -> f64 {
    let hit = mol
        .atoms
        .iter()
        .any(|a| a.atomic_number == 8 && a.formal_charge == 0 && a.total_h() >= 1 && a.degree == 1);
    if hit {
        1.0
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use weakchem_chem::prepare;

    #[test]
    fn labels() {
        for (s, y) in [
            ("CCO", 1.0),
            ("c1ccccc1O", 1.0),
            ("CC(=O)O", 1.0),
            ("CC(=O)[O-]", 0.0),
            ("COC", 0.0),
            ("CC=O", 0.0),
            ("O", 0.0),
            ("CCN", 0.0),
        ] {
            assert_eq!(hydroxyl_label(&prepare(s).unwrap()), y, "{s}");
        }
    }
}
