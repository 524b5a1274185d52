use std::collections::VecDeque;

use super::MolGraph;

/// Dense symmetric matrix of shortest-path hop counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistanceMatrix {
    n: usize,
    data: Vec<u32>,
}

impl DistanceMatrix {
    /// Marks pairs in different components.
    pub const UNREACHABLE: u32 = u32::MAX;

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> u32 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[u32] {
        &self.data[i * self.n..(i + 1) * self.n]
    }
}

/// Breadth-first search from every atom.
pub fn all_pairs_distances(mol: &MolGraph) -> DistanceMatrix {
    let n = mol.atoms.len();
    let mut data = vec![DistanceMatrix::UNREACHABLE; n * n];
    let mut queue = VecDeque::with_capacity(n);
    for s in 0..n {
        let row = &mut data[s * n..(s + 1) * n];
        row[s] = 0;
        queue.clear();
        queue.push_back(s);
        while let Some(u) = queue.pop_front() {
            let d = row[u] + 1;
            for v in mol.neighbors(u) {
                if row[v] == DistanceMatrix::UNREACHABLE {
                    row[v] = d;
                    queue.push_back(v);
                }
            }
        }
    }
    DistanceMatrix { n, data }
}
