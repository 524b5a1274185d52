//! Built-in periodic table covering H through Kr, plus iodine.

/// Static per-element data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Element {
    pub symbol: &'static str,
    pub atomic_number: u8,
    /// Standard atomic weight.
    pub mass: f64,
    /// Outer-shell electron count for main-group elements, `None` otherwise.
    pub valence_electrons: Option<u8>,
    /// Default valence states in increasing order. Empty when untabulated.
    pub default_valences: &'static [u8],
}

macro_rules! el {
    ($sym:literal, $z:literal, $m:literal, $ve:expr, $val:expr) => {
        Element {
            symbol: $sym,
            atomic_number: $z,
            mass: $m,
            valence_electrons: $ve,
            default_valences: $val,
        }
    };
}

pub const TABLE: [Element; 37] = [
    el!("H", 1, 1.0080, Some(1), &[1]),
    el!("He", 2, 4.0026, Some(2), &[]),
    el!("Li", 3, 6.9400, Some(1), &[]),
    el!("Be", 4, 9.0122, Some(2), &[]),
    el!("B", 5, 10.8100, Some(3), &[3]),
    el!("C", 6, 12.0110, Some(4), &[4]),
    el!("N", 7, 14.0070, Some(5), &[3]),
    el!("O", 8, 15.9990, Some(6), &[2]),
    el!("F", 9, 18.9984, Some(7), &[1]),
    el!("Ne", 10, 20.1797, Some(8), &[]),
    el!("Na", 11, 22.9898, Some(1), &[]),
    el!("Mg", 12, 24.3050, Some(2), &[]),
    el!("Al", 13, 26.9815, Some(3), &[]),
    el!("Si", 14, 28.0850, Some(4), &[]),
    el!("P", 15, 30.9738, Some(5), &[3, 5]),
    el!("S", 16, 32.0600, Some(6), &[2, 4, 6]),
    el!("Cl", 17, 35.4500, Some(7), &[1]),
    el!("Ar", 18, 39.9480, Some(8), &[]),
    el!("K", 19, 39.0983, Some(1), &[]),
    el!("Ca", 20, 40.0780, Some(2), &[]),
    el!("Sc", 21, 44.9559, None, &[]),
    el!("Ti", 22, 47.8670, None, &[]),
    el!("V", 23, 50.9415, None, &[]),
    el!("Cr", 24, 51.9961, None, &[]),
    el!("Mn", 25, 54.9380, None, &[]),
    el!("Fe", 26, 55.8450, None, &[]),
    el!("Co", 27, 58.9332, None, &[]),
    el!("Ni", 28, 58.6934, None, &[]),
    el!("Cu", 29, 63.5460, None, &[]),
    el!("Zn", 30, 65.3800, None, &[]),
    el!("Ga", 31, 69.7230, Some(3), &[]),
    el!("Ge", 32, 72.6300, Some(4), &[]),
    el!("As", 33, 74.9216, Some(5), &[]),
    el!("Se", 34, 78.9710, Some(6), &[]),
    el!("Br", 35, 79.9040, Some(7), &[1]),
    el!("Kr", 36, 83.7980, Some(8), &[]),
    el!("I", 53, 126.9045, Some(7), &[1]),
];

pub fn by_symbol(symbol: &str) -> Option<&'static Element> {
    TABLE.iter().find(|e| e.symbol == symbol)
}

pub fn by_number(z: u8) -> Option<&'static Element> {
    TABLE.iter().find(|e| e.atomic_number == z)
}

pub const HYDROGEN_MASS: f64 = 1.0080;

impl Element {
    pub fn is_main_group(&self) -> bool {
        self.valence_electrons.is_some()
    }

    /// Allowed valence states for this element carrying `charge`.
    ///
    /// A charged atom takes the valences of the isoelectronic neutral
    /// configuration: N+ behaves like C (4), O- like F (1), B- like C (4).
    /// Returns `None` when the element has no tabulated valence.
    pub fn allowed_valences(&self, charge: i32) -> Option<Vec<u8>> {
        if self.default_valences.is_empty() {
            return None;
        }
        let base = self.valence_electrons? as i32;
        let electrons = base - charge;
        if electrons <= 0 {
            return Some(vec![0]);
        }
        if electrons < 4 {
            return Some(vec![electrons as u8]);
        }
        if base < 4 {
            return Some(vec![(8 - electrons).max(0) as u8]);
        }
        let shift = base - electrons;
        let out: Vec<u8> = self
            .default_valences
            .iter()
            .map(|&v| v as i32 + shift)
            .filter(|&v| v >= 0)
            .map(|v| v as u8)
            .collect();
        if out.is_empty() {
            Some(vec![0])
        } else {
            Some(out)
        }
    }
}
