//! Deterministic 2D coordinates: ring templates, zig-zag chains, then a
//! short force relaxation.

use std::collections::VecDeque;
use std::f64::consts::PI;

use super::Grid;
use crate::error::{ChemError, Result};
use crate::molgraph::MolGraph;

pub const BOND_LENGTH: f64 = 1.5;
pub const RELAX_ITERATIONS: usize = 200;
const REPULSION_CUTOFF: f64 = 1.0;
const RELAX_STEP: f64 = 0.1;
const MAX_MOVE: f64 = 0.2;

/// Per-atom (x, y) coordinates in distance units.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout2D {
    pub coords: Vec<[f64; 2]>,
}

impl Layout2D {
    pub fn centroid(&self) -> [f64; 2] {
        let n = self.coords.len().max(1) as f64;
        let (sx, sy) = self.coords.iter().fold((0.0, 0.0), |(x, y), p| (x + p[0], y + p[1]));
        [sx / n, sy / n]
    }

    /// Width and height of the bounding box.
    pub fn extent(&self) -> [f64; 2] {
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in &self.coords {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        if self.coords.is_empty() {
            return [0.0; 2];
        }
        [hi[0] - lo[0], hi[1] - lo[1]]
    }

    pub fn min_pair_distance(&self) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..self.coords.len() {
            for j in i + 1..self.coords.len() {
                best = best.min(dist(self.coords[i], self.coords[j]));
            }
        }
        best
    }

    fn center_bbox(&mut self) {
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in &self.coords {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        let mid = [(lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0];
        for p in &mut self.coords {
            p[0] -= mid[0];
            p[1] -= mid[1];
        }
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

fn angle_of(from: [f64; 2], to: [f64; 2]) -> f64 {
    (to[1] - from[1]).atan2(to[0] - from[0])
}

fn at(origin: [f64; 2], angle: f64, r: f64) -> [f64; 2] {
    [origin[0] + r * angle.cos(), origin[1] + r * angle.sin()]
}

fn wrap(mut a: f64) -> f64 {
    while a > PI {
        a -= 2.0 * PI;
    }
    while a <= -PI {
        a += 2.0 * PI;
    }
    a
}

/// Rigid rotation about the centroid.
pub fn rotate_layout(layout: &Layout2D, theta: f64) -> Layout2D {
    if theta == 0.0 {
        return layout.clone();
    }
    let c = layout.centroid();
    let (s, co) = theta.sin_cos();
    Layout2D {
        coords: layout
            .coords
            .iter()
            .map(|p| {
                let (x, y) = (p[0] - c[0], p[1] - c[1]);
                [c[0] + co * x - s * y, c[1] + s * x + co * y]
            })
            .collect(),
    }
}

/// Smallest cycle through each ring bond, deduplicated, ordered by size
/// then by lowest atom index. Each ring is listed in cycle order.
pub fn smallest_rings(mol: &MolGraph) -> Vec<Vec<usize>> {
    let n = mol.atoms.len();
    let mut rings: Vec<Vec<usize>> = Vec::new();
    let mut seen: Vec<Vec<usize>> = Vec::new();
    for (bi, bond) in mol.bonds.iter().enumerate() {
        if !bond.in_ring {
            continue;
        }
        // BFS from a to b avoiding this bond
        let mut prev = vec![usize::MAX; n];
        prev[bond.a] = bond.a;
        let mut queue = VecDeque::from([bond.a]);
        while let Some(u) = queue.pop_front() {
            if u == bond.b {
                break;
            }
            for &(v, bj) in &mol.adjacency[u] {
                if bj != bi && prev[v] == usize::MAX {
                    prev[v] = u;
                    queue.push_back(v);
                }
            }
        }
        if prev[bond.b] == usize::MAX {
            continue;
        }
        let mut cycle = vec![bond.b];
        let mut cur = bond.b;
        while cur != bond.a {
            cur = prev[cur];
            cycle.push(cur);
        }
        let mut key = cycle.clone();
        key.sort_unstable();
        if !seen.contains(&key) {
            seen.push(key);
            rings.push(cycle);
        }
    }
    rings.sort_by_key(|r| (r.len(), *r.iter().min().expect("non-empty ring")));
    rings
}

struct Placer<'a> {
    mol: &'a MolGraph,
    pos: Vec<Option<[f64; 2]>>,
    turn: Vec<f64>,
    rings: Vec<Vec<usize>>,
    ring_done: Vec<bool>,
}

impl Placer<'_> {
    fn placed_neighbors(&self, u: usize) -> Vec<[f64; 2]> {
        self.mol.neighbors(u).filter_map(|v| self.pos[v]).collect()
    }

    /// Places every unplaced ring touching an already placed atom, repeating
    /// until the ring system is complete. Returns newly placed atoms.
    fn expand_rings(&mut self) -> Vec<usize> {
        let mut newly = Vec::new();
        loop {
            let next = (0..self.rings.len())
                .find(|&r| !self.ring_done[r] && self.rings[r].iter().any(|&a| self.pos[a].is_some()));
            let Some(r) = next else { break };
            self.ring_done[r] = true;
            let ring = self.rings[r].clone();
            let k = ring.len();
            let radius = BOND_LENGTH / (2.0 * (PI / k as f64).sin());
            let step = 2.0 * PI / k as f64;
            let edge = (0..k).find(|&i| self.pos[ring[i]].is_some() && self.pos[ring[(i + 1) % k]].is_some());
            let (center, start_idx, start_angle, dir) = match edge {
                Some(i) => {
                    let (a, b) = (self.pos[ring[i]].unwrap(), self.pos[ring[(i + 1) % k]].unwrap());
                    let mid = [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
                    let normal = [-(b[1] - a[1]), b[0] - a[0]];
                    let len = (normal[0].hypot(normal[1])).max(1e-12);
                    let normal = [normal[0] / len, normal[1] / len];
                    // side away from the other placed atoms of this ring's neighbors
                    let others: Vec<[f64; 2]> = ring
                        .iter()
                        .flat_map(|&x| self.mol.neighbors(x).collect::<Vec<_>>())
                        .filter(|&x| x != ring[i] && x != ring[(i + 1) % k])
                        .filter_map(|x| self.pos[x])
                        .collect();
                    let mut side = 1.0;
                    if !others.is_empty() {
                        let score: f64 = others
                            .iter()
                            .map(|p| (p[0] - mid[0]) * normal[0] + (p[1] - mid[1]) * normal[1])
                            .sum();
                        if score > 0.0 {
                            side = -1.0;
                        }
                    }
                    let apothem = BOND_LENGTH / (2.0 * (PI / k as f64).tan());
                    let center = [mid[0] + side * apothem * normal[0], mid[1] + side * apothem * normal[1]];
                    let ang_a = angle_of(center, a);
                    let ang_b = angle_of(center, b);
                    let dir = if wrap(ang_b - ang_a) > 0.0 { 1.0 } else { -1.0 };
                    ((center), (i + 1) % k, ang_b, dir)
                }
                None => {
                    let i = (0..k).find(|&i| self.pos[ring[i]].is_some()).expect("touching ring");
                    let s = self.pos[ring[i]].unwrap();
                    let nbrs: Vec<[f64; 2]> = self
                        .mol
                        .neighbors(ring[i])
                        .filter(|&x| !ring.contains(&x))
                        .filter_map(|x| self.pos[x])
                        .collect();
                    let away = if nbrs.is_empty() {
                        0.0
                    } else {
                        let (mut dx, mut dy) = (0.0, 0.0);
                        for p in &nbrs {
                            let d = dist(*p, s).max(1e-12);
                            dx += (s[0] - p[0]) / d;
                            dy += (s[1] - p[1]) / d;
                        }
                        if dx.hypot(dy) < 1e-9 {
                            angle_of(nbrs[0], s) + PI / 2.0
                        } else {
                            dy.atan2(dx)
                        }
                    };
                    let center = at(s, away, radius);
                    (center, i, away + PI, 1.0)
                }
            };
            for j in 1..k {
                let atom = ring[(start_idx + j) % k];
                if self.pos[atom].is_none() {
                    self.pos[atom] = Some(at(center, start_angle + dir * step * j as f64, radius));
                    newly.push(atom);
                }
            }
        }
        newly
    }

    fn place_children(&mut self, u: usize, children: &[usize]) {
        let here = self.pos[u].expect("parent placed");
        let placed: Vec<[f64; 2]> = self.placed_neighbors(u);
        let k = children.len();
        let angles: Vec<f64> = if placed.is_empty() {
            (0..k).map(|j| 2.0 * PI * j as f64 / k as f64 - PI / 6.0).collect()
        } else if placed.len() == 1 && k == 1 {
            let incoming = angle_of(placed[0], here);
            let s = if self.turn[u] > 0.0 { -1.0 } else { 1.0 };
            vec![incoming + s * PI / 3.0]
        } else {
            let mut occupied: Vec<f64> = placed.iter().map(|p| angle_of(here, *p)).collect();
            occupied.sort_by(f64::total_cmp);
            let mut best = (0.0, occupied[0]);
            for i in 0..occupied.len() {
                let start = occupied[i];
                let end = if i + 1 < occupied.len() {
                    occupied[i + 1]
                } else {
                    occupied[0] + 2.0 * PI
                };
                if end - start > best.0 + 1e-9 {
                    best = (end - start, start);
                }
            }
            let (gap, start) = best;
            (1..=k).map(|j| start + gap * j as f64 / (k + 1) as f64).collect()
        };
        let incoming = if placed.len() == 1 {
            Some(angle_of(placed[0], here))
        } else {
            None
        };
        for (&v, &a) in children.iter().zip(&angles) {
            self.pos[v] = Some(at(here, a, BOND_LENGTH));
            self.turn[v] = match incoming {
                Some(inc) => wrap(a - inc).signum(),
                None => 0.0,
            };
        }
    }
}

/// Template layout followed by force relaxation, centered on the bounding
/// box. Fails with `LayoutOverflow` if the molecule cannot fit `grid` with a
/// one-pixel margin.
pub fn layout_2d(mol: &MolGraph, grid: &Grid) -> Result<Layout2D> {
    let mut layout = raw_layout(mol);
    relax(mol, &mut layout);
    layout.center_bbox();
    let capacity = grid.size as f64 * grid.resolution - 2.0;
    let extent = layout.extent();
    let worst = extent[0].max(extent[1]);
    if worst > capacity {
        return Err(ChemError::LayoutOverflow {
            extent: worst,
            capacity,
        });
    }
    Ok(layout)
}

fn raw_layout(mol: &MolGraph) -> Layout2D {
    let n = mol.atoms.len();
    let rings = smallest_rings(mol);
    let mut placer = Placer {
        mol,
        pos: vec![None; n],
        turn: vec![0.0; n],
        ring_done: vec![false; rings.len()],
        rings,
    };
    let mut offset = 0.0;
    for comp in mol.components() {
        let start = placer
            .rings
            .iter()
            .find(|r| comp.contains(&r[0]))
            .map(|r| r[0])
            .unwrap_or(comp[0]);
        placer.pos[start] = Some([offset, 0.0]);
        let mut queue = VecDeque::from([start]);
        queue.extend(placer.expand_rings());
        while let Some(u) = queue.pop_front() {
            let children: Vec<usize> = mol.neighbors(u).filter(|&v| placer.pos[v].is_none()).collect();
            if children.is_empty() {
                continue;
            }
            placer.place_children(u, &children);
            queue.extend(children.iter().copied());
            if children.iter().any(|&v| mol.atoms[v].in_ring) {
                queue.extend(placer.expand_rings());
            }
        }
        let max_x = comp
            .iter()
            .filter_map(|&a| placer.pos[a])
            .map(|p| p[0])
            .fold(f64::NEG_INFINITY, f64::max);
        offset = max_x + 2.0 * BOND_LENGTH;
    }
    Layout2D {
        coords: placer.pos.into_iter().map(|p| p.expect("all atoms placed")).collect(),
    }
}

fn relax(mol: &MolGraph, layout: &mut Layout2D) {
    let n = layout.coords.len();
    let mut bonded = vec![false; n * n];
    for b in &mol.bonds {
        bonded[b.a * n + b.b] = true;
        bonded[b.b * n + b.a] = true;
    }
    let mut force = vec![[0.0f64; 2]; n];
    for _ in 0..RELAX_ITERATIONS {
        force.iter_mut().for_each(|f| *f = [0.0; 2]);
        for b in &mol.bonds {
            let (p, q) = (layout.coords[b.a], layout.coords[b.b]);
            let r = dist(p, q).max(1e-9);
            let k = (r - BOND_LENGTH) / r;
            let f = [k * (q[0] - p[0]), k * (q[1] - p[1])];
            force[b.a][0] += f[0];
            force[b.a][1] += f[1];
            force[b.b][0] -= f[0];
            force[b.b][1] -= f[1];
        }
        for i in 0..n {
            for j in i + 1..n {
                if bonded[i * n + j] {
                    continue;
                }
                let (p, q) = (layout.coords[i], layout.coords[j]);
                let r = dist(p, q);
                if r >= REPULSION_CUTOFF {
                    continue;
                }
                let (ux, uy, r) = if r < 1e-6 {
                    let a = (i * 31 + j * 17) as f64;
                    (a.cos(), a.sin(), 1e-3)
                } else {
                    ((p[0] - q[0]) / r, (p[1] - q[1]) / r, r)
                };
                let mag = 1.0 / (r * r);
                force[i][0] += mag * ux;
                force[i][1] += mag * uy;
                force[j][0] -= mag * ux;
                force[j][1] -= mag * uy;
            }
        }
        for (p, f) in layout.coords.iter_mut().zip(&force) {
            let mut d = [RELAX_STEP * f[0], RELAX_STEP * f[1]];
            let len = d[0].hypot(d[1]);
            if len > MAX_MOVE {
                d = [d[0] * MAX_MOVE / len, d[1] * MAX_MOVE / len];
            }
            p[0] += d[0];
            p[1] += d[1];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molgraph::prepare;

    fn lay(s: &str) -> (MolGraph, Layout2D) {
        let m = prepare(s).unwrap();
        let l = layout_2d(&m, &Grid::default()).unwrap();
        (m, l)
    }

    #[test]
    fn ethane() {
        let (_, l) = lay("CC");
        assert!((dist(l.coords[0], l.coords[1]) - 1.5).abs() < 1e-9);
    }

    #[test]
    fn benzene_hexagon() {
        let (m, l) = lay("c1ccccc1");
        for b in &m.bonds {
            assert!((dist(l.coords[b.a], l.coords[b.b]) - 1.5).abs() < 0.01);
        }
        let c = l.centroid();
        let r0 = dist(c, l.coords[0]);
        for p in &l.coords {
            assert!((dist(c, *p) - r0).abs() < 0.01);
        }
    }

    #[test]
    fn fused_and_substituted_rings_stay_apart() {
        for s in [
            "c1ccc2ccccc2c1",
            "CC(C)Cc1ccc(cc1)C(C)C(=O)O",
            "c1ccc(cc1)-c1ccccc1",
            "C1CC12CC2",
            "O=C(O)c1ccccc1OC(C)=O",
        ] {
            let (m, l) = lay(s);
            assert!(l.min_pair_distance() >= 0.9, "{s}: {}", l.min_pair_distance());
            for b in &m.bonds {
                let d = dist(l.coords[b.a], l.coords[b.b]);
                assert!((d - 1.5).abs() < 0.2, "{s}: bond {d}");
            }
        }
    }

    #[test]
    fn rotation_is_rigid() {
        let (_, l) = lay("CC(C)Cc1ccc(cc1)C(C)C(=O)O");
        assert_eq!(rotate_layout(&l, 0.0), l);
        let twice = rotate_layout(&rotate_layout(&l, PI), PI);
        for (a, b) in twice.coords.iter().zip(&l.coords) {
            assert!(dist(*a, *b) < 1e-9);
        }
        let r = rotate_layout(&l, 1.234);
        let sum = |l: &Layout2D| {
            let mut s = 0.0;
            for i in 0..l.coords.len() {
                for j in 0..l.coords.len() {
                    s += dist(l.coords[i], l.coords[j]);
                }
            }
            s
        };
        assert!((sum(&r) - sum(&l)).abs() < 1e-9);
    }

    #[test]
    fn overflow() {
        let long = "C".repeat(40);
        let m = prepare(&long).unwrap();
        let err = layout_2d(&m, &Grid::default()).unwrap_err();
        assert_eq!(err.kind(), "LayoutOverflow");
    }

    #[test]
    fn smallest_rings_of_naphthalene() {
        let m = prepare("c1ccc2ccccc2c1").unwrap();
        let r = smallest_rings(&m);
        assert_eq!(r.len(), 2);
        assert!(r.iter().all(|c| c.len() == 6));
    }
}
