//! Active-set geometries: regular grids, enlarged active sets, hyperrectangular
//! tessellations and (enlarged) mesh grids.
//!
//! Jump locations and all other multi-indices are 1-based and live in the
//! reduced index box `prod_i [k+1 : n_i]`.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which box the jump locations must lie in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoxRule {
    /// `[k+2 : n_i - k]`: every enlarged block is interior to the index box.
    #[default]
    Standard,
    /// `[k+1+(k+2)k : n_i-k+1-(k+2)k]`, leaving room for discrete derivative matching.
    DerivativeMatching,
}

/// Inclusive per-axis bounds of the admissible box; `None` if it is empty on some axis.
pub fn admissible_box(shape: &[usize], k: usize, rule: BoxRule) -> Option<Vec<(usize, usize)>> {
    shape
        .iter()
        .map(|&n| {
            let (lo, hi) = match rule {
                BoxRule::Standard => (k + 2, n.checked_sub(k)?),
                BoxRule::DerivativeMatching => {
                    let margin = (k + 2) * k;
                    (k + 1 + margin, (n + 1).checked_sub(k + margin)?)
                }
            };
            (lo <= hi).then_some((lo, hi))
        })
        .collect()
}

fn check_order(shape: &[usize], k: usize) -> Result<()> {
    if shape.is_empty() {
        return Err(Error::Shape("active sets need at least one axis".into()));
    }
    for (axis, &n) in shape.iter().enumerate() {
        if k == 0 || k >= n {
            return Err(Error::Order { k, extent: n, axis });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActiveSet {
    shape: Vec<usize>,
    k: usize,
    jumps: Vec<Vec<usize>>,
}

impl ActiveSet {
    /// Validates that every jump lies in the admissible box of `rule`; jumps are
    /// sorted lexicographically and duplicates removed.
    pub fn new(shape: &[usize], k: usize, jumps: Vec<Vec<usize>>, rule: BoxRule) -> Result<Self> {
        check_order(shape, k)?;
        let bounds = admissible_box(shape, k, rule)
            .ok_or_else(|| Error::Domain(format!("admissible box is empty for shape {shape:?}, k={k}")))?;
        for t in &jumps {
            if t.len() != shape.len() {
                return Err(Error::Shape(format!("jump {t:?} has {} coordinates, expected {}", t.len(), shape.len())));
            }
            if t.iter().zip(&bounds).any(|(&x, &(lo, hi))| x < lo || x > hi) {
                return Err(Error::Domain(format!("jump {t:?} lies outside the admissible box {bounds:?}")));
            }
        }
        let jumps: Vec<Vec<usize>> = jumps.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
        Ok(Self { shape: shape.to_vec(), k, jumps })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn jumps(&self) -> &[Vec<usize>] {
        &self.jumps
    }

    pub fn len(&self) -> usize {
        self.jumps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.jumps.is_empty()
    }

    /// `S~ = union_m prod_i [t_{i,m} : t_{i,m}+k-1]`, sorted and deduplicated.
    pub fn enlarge(&self) -> Vec<Vec<usize>> {
        enlarge_points(&self.jumps, self.k)
    }

    pub fn tessellate(&self) -> Result<Tessellation> {
        let bounds: Vec<(usize, usize)> = self.shape.iter().map(|&n| (self.k + 1, n)).collect();
        let mut cells = Vec::with_capacity(self.jumps.len());
        if !self.jumps.is_empty() {
            let all: Vec<usize> = (0..self.jumps.len()).collect();
            split_cells(&self.jumps, self.k, all, bounds, &mut cells)?;
        }
        cells.sort_by(|a, b| a.jump.cmp(&b.jump));
        Ok(Tessellation { shape: self.shape.clone(), k: self.k, cells })
    }
}

fn enlarge_points(points: &[Vec<usize>], k: usize) -> Vec<Vec<usize>> {
    let mut out = BTreeSet::new();
    for t in points {
        let block: Vec<(usize, usize)> = t.iter().map(|&x| (x, x + k - 1)).collect();
        for_each_in_box(&block, |idx| {
            out.insert(idx.to_vec());
        });
    }
    out.into_iter().collect()
}

/// Calls `f` on every multi-index of the inclusive box, last axis fastest.
pub fn for_each_in_box(bounds: &[(usize, usize)], mut f: impl FnMut(&[usize])) {
    if bounds.iter().any(|&(lo, hi)| lo > hi) {
        return;
    }
    let mut idx: Vec<usize> = bounds.iter().map(|b| b.0).collect();
    loop {
        f(&idx);
        let mut axis = bounds.len();
        loop {
            if axis == 0 {
                return;
            }
            axis -= 1;
            if idx[axis] < bounds[axis].1 {
                idx[axis] += 1;
                break;
            }
            idx[axis] = bounds[axis].0;
        }
    }
}

/// Equispaced jump locations, `s_per_axis` per axis, placed at the centers of
/// equal-length cells of `[k+1 : n_i]` and clamped into the admissible box.
pub fn regular_grid(shape: &[usize], k: usize, s_per_axis: usize, rule: BoxRule) -> Result<ActiveSet> {
    check_order(shape, k)?;
    if s_per_axis == 0 {
        return Err(Error::Invalid("s_per_axis must be positive".into()));
    }
    let bounds = admissible_box(shape, k, rule)
        .ok_or_else(|| Error::Domain(format!("admissible box is empty for shape {shape:?}, k={k}")))?;
    let mut axes = Vec::with_capacity(shape.len());
    for (&n, &(lo, hi)) in shape.iter().zip(&bounds) {
        let len = (n - k) as f64;
        let coords: Vec<usize> = (0..s_per_axis)
            .map(|m| {
                let center = (k + 1) as f64 + (m as f64 + 0.5) * len / s_per_axis as f64 - 0.5;
                let t = (center - (k as f64 - 1.0) / 2.0 - 0.5).ceil() as usize;
                t.clamp(lo, hi)
            })
            .collect();
        if coords.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Domain(format!(
                "{s_per_axis} jumps per axis do not fit in the admissible range [{lo}:{hi}] of an axis of length {n}"
            )));
        }
        axes.push(coords);
    }
    let ranges: Vec<(usize, usize)> = vec![(0, s_per_axis - 1); shape.len()];
    let mut jumps = Vec::new();
    for_each_in_box(&ranges, |pos| jumps.push(pos.iter().enumerate().map(|(a, &p)| axes[a][p]).collect()));
    ActiveSet::new(shape, k, jumps, rule)
}

/// One hyperrectangle `R_m = prod_i [lo_i : hi_i]` with its jump `t_m`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cell {
    pub jump: Vec<usize>,
    pub lo: Vec<usize>,
    pub hi: Vec<usize>,
}

/// Position of a coordinate relative to the jump block of a cell along one axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AxisRegion {
    /// `j in [t^- : t]`, at distance `dist = t - j` out of `span = d^-`.
    Minus { dist: usize, span: usize },
    /// `j in [t : t+k-1]`.
    Block,
    /// `j in [t+k-1 : t^+]`, at distance `dist = j - t - k + 1` out of `span = d^+`.
    Plus { dist: usize, span: usize },
}

impl AxisRegion {
    /// `dist / span`, zero inside the block.
    pub fn fraction(&self) -> f64 {
        match *self {
            AxisRegion::Minus { dist, span } | AxisRegion::Plus { dist, span } => dist as f64 / span as f64,
            AxisRegion::Block => 0.0,
        }
    }

    /// Distance to the block, zero inside it.
    pub fn distance(&self) -> usize {
        match *self {
            AxisRegion::Minus { dist, .. } | AxisRegion::Plus { dist, .. } => dist,
            AxisRegion::Block => 0,
        }
    }
}

impl Cell {
    pub fn contains(&self, idx: &[usize]) -> bool {
        idx.iter().zip(self.lo.iter().zip(&self.hi)).all(|(&j, (&lo, &hi))| lo <= j && j <= hi)
    }

    /// `d^-_{i,m} = t - t^-`.
    pub fn d_minus(&self, axis: usize) -> usize {
        self.jump[axis] - self.lo[axis]
    }

    /// `d^+_{i,m} = t^+ - t - k + 1`.
    pub fn d_plus(&self, axis: usize, k: usize) -> usize {
        self.hi[axis] + 1 - self.jump[axis] - k
    }

    pub fn region(&self, axis: usize, j: usize, k: usize) -> AxisRegion {
        let t = self.jump[axis];
        if j < t {
            AxisRegion::Minus { dist: t - j, span: self.d_minus(axis) }
        } else if j < t + k {
            AxisRegion::Block
        } else {
            AxisRegion::Plus { dist: j + 1 - t - k, span: self.d_plus(axis, k) }
        }
    }

    pub fn bounds(&self) -> Vec<(usize, usize)> {
        self.lo.iter().copied().zip(self.hi.iter().copied()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tessellation {
    shape: Vec<usize>,
    k: usize,
    cells: Vec<Cell>,
}

impl Tessellation {
    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    /// `d_{i,max}(S) = max_m max(d^-_{i,m}, d^+_{i,m})`.
    pub fn d_max(&self, axis: usize) -> usize {
        self.cells.iter().map(|c| c.d_minus(axis).max(c.d_plus(axis, self.k))).max().unwrap_or(0)
    }

    /// Indices of the cells containing `idx` (more than one on shared boundaries).
    pub fn cells_containing(&self, idx: &[usize]) -> Vec<usize> {
        self.cells.iter().enumerate().filter(|(_, c)| c.contains(idx)).map(|(m, _)| m).collect()
    }

    /// Checks the tessellation conditions by direct enumeration of the index box.
    pub fn validate(&self) -> Result<()> {
        let k = self.k;
        let domain: Vec<(usize, usize)> = self.shape.iter().map(|&n| (k + 1, n)).collect();
        for (m, c) in self.cells.iter().enumerate() {
            for (axis, (&lo, &hi)) in c.lo.iter().zip(&c.hi).enumerate() {
                if lo < domain[axis].0 || hi > domain[axis].1 || lo > hi {
                    return Err(Error::Domain(format!("cell {m} leaves the index box on axis {axis}")));
                }
                let t = c.jump[axis];
                if !(lo < t && t + k - 1 < hi) {
                    return Err(Error::Domain(format!("jump block of cell {m} is not interior on axis {axis}")));
                }
            }
        }
        let mut failure = None;
        for_each_in_box(&domain, |idx| {
            if failure.is_some() {
                return;
            }
            let mut covered = false;
            let mut interior = 0;
            for c in &self.cells {
                if c.contains(idx) {
                    covered = true;
                    if idx.iter().zip(c.lo.iter().zip(&c.hi)).all(|(&j, (&lo, &hi))| lo < j && j < hi) {
                        interior += 1;
                    }
                }
            }
            if !covered {
                failure = Some(format!("index {idx:?} is not covered"));
            } else if interior > 1 {
                failure = Some(format!("index {idx:?} is interior to {interior} cells"));
            }
        });
        match failure {
            Some(msg) if !self.cells.is_empty() => Err(Error::Domain(msg)),
            _ => Ok(()),
        }
    }
}

fn split_cells(
    jumps: &[Vec<usize>],
    k: usize,
    members: Vec<usize>,
    bounds: Vec<(usize, usize)>,
    out: &mut Vec<Cell>,
) -> Result<()> {
    if members.len() == 1 {
        let t = &jumps[members[0]];
        out.push(Cell { jump: t.clone(), lo: bounds.iter().map(|b| b.0).collect(), hi: bounds.iter().map(|b| b.1).collect() });
        return Ok(());
    }
    let mut best: Option<(usize, usize, f64)> = None;
    for (axis, _) in bounds.iter().enumerate() {
        let mut coords: Vec<usize> = members.iter().map(|&m| jumps[m][axis]).collect();
        coords.sort_unstable();
        coords.dedup();
        for w in coords.windows(2) {
            let (a, b) = (w[0], w[1]);
            if b < a + k + 1 {
                continue;
            }
            let cut = (a + k - 1 + b) / 2;
            let below = members.iter().filter(|&&m| jumps[m][axis] <= a).count();
            let balance = (below as f64 - members.len() as f64 / 2.0).abs();
            let spread = (coords[coords.len() - 1] - coords[0]) as f64;
            let score = balance - 1e-6 * spread;
            if best.is_none_or(|(_, _, s)| score < s) {
                best = Some((axis, cut, score));
            }
        }
    }
    let (axis, cut, _) = best.ok_or_else(|| {
        Error::Domain(format!(
            "jump blocks {:?} are too close to be separated by a hyperrectangular tessellation",
            members.iter().map(|&m| &jumps[m]).collect::<Vec<_>>()
        ))
    })?;
    let (lower, upper): (Vec<usize>, Vec<usize>) = members.into_iter().partition(|&m| jumps[m][axis] < cut);
    let mut lb = bounds.clone();
    lb[axis].1 = cut;
    let mut ub = bounds;
    ub[axis].0 = cut;
    split_cells(jumps, k, lower, lb, out)?;
    split_cells(jumps, k, upper, ub, out)
}

/// `H(d) = sum_{i=1}^d 1/i`.
pub fn harmonic(d: usize) -> f64 {
    (1..=d).map(|i| 1.0 / i as f64).sum()
}

/// Membership in the tuple set: `|{i : l_i <= z}| <= z` for every `z` in `[d]`.
pub fn mesh_tuple_admissible(levels: &[usize]) -> bool {
    let d = levels.len();
    (1..=d).all(|z| levels.iter().filter(|&&l| l <= z).count() <= z)
}

/// All admissible tuples in `[d]^d`, lexicographically ordered.
pub fn mesh_tuples(d: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for_each_in_box(&vec![(1, d); d], |l| {
        if mesh_tuple_admissible(l) {
            out.push(l.to_vec());
        }
    });
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshGrid {
    pub shape: Vec<usize>,
    pub k: usize,
    pub delta: usize,
    /// `levels[i][l-1] = Z_i(l)`, sorted.
    pub levels: Vec<Vec<Vec<usize>>>,
    pub tuples: Vec<Vec<usize>>,
    /// The mesh grid `S`, sorted.
    pub jumps: Vec<Vec<usize>>,
    /// The enlarged mesh grid `S~`, sorted.
    pub enlarged: Vec<Vec<usize>>,
}

impl MeshGrid {
    pub fn len(&self) -> usize {
        self.jumps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.jumps.is_empty()
    }
}

fn nested_levels(lo: usize, hi: usize, counts: &[usize]) -> Result<Vec<Vec<usize>>> {
    let len = hi - lo + 1;
    let place = |m: usize| -> Vec<f64> {
        (0..m).map(|c| lo as f64 + (c as f64 + 0.5) * len as f64 / m as f64 - 0.5).collect()
    };
    let mut levels: Vec<Vec<usize>> = vec![Vec::new(); counts.len()];
    let mut current: Vec<usize> = Vec::new();
    for l in (0..counts.len()).rev() {
        let m = counts[l];
        if m > len {
            return Err(Error::Domain(format!("{m} mesh points do not fit in [{lo}:{hi}]")));
        }
        let ideal = place(m);
        let mut taken = vec![false; m];
        for &p in &current {
            let slot = (0..m)
                .filter(|&s| !taken[s])
                .min_by(|&a, &b| (ideal[a] - p as f64).abs().total_cmp(&(ideal[b] - p as f64).abs()))
                .ok_or_else(|| Error::Domain("mesh levels are not nestable".into()))?;
            taken[slot] = true;
        }
        let mut set: BTreeSet<usize> = current.iter().copied().collect();
        for s in (0..m).filter(|&s| !taken[s]) {
            let target = ideal[s].round() as usize;
            let pick = (0..len)
                .flat_map(|off| [target.checked_sub(off), Some(target + off)])
                .flatten()
                .find(|p| (lo..=hi).contains(p) && !set.contains(p))
                .ok_or_else(|| Error::Domain("mesh levels are not nestable".into()))?;
            set.insert(pick);
        }
        current = set.into_iter().collect();
        levels[l] = current.clone();
    }
    Ok(levels)
}

/// Builds the mesh grid with `round(delta^{d/l})` approximately equispaced
/// indices at level `l`, in `[k+1 : n_i-k+1]` so that enlarged blocks stay in range.
pub fn mesh_grid(shape: &[usize], k: usize, delta: usize) -> Result<MeshGrid> {
    check_order(shape, k)?;
    if delta == 0 {
        return Err(Error::Invalid("delta must be positive".into()));
    }
    let d = shape.len();
    let counts: Vec<usize> = (1..=d).map(|l| (delta as f64).powf(d as f64 / l as f64).round() as usize).collect();
    let levels = shape
        .iter()
        .map(|&n| {
            let hi = n + 1 - k;
            if hi < k + 1 {
                return Err(Error::Domain(format!("axis of length {n} is too short for k={k}")));
            }
            nested_levels(k + 1, hi, &counts)
        })
        .collect::<Result<Vec<_>>>()?;
    let tuples = mesh_tuples(d);
    let mut set = BTreeSet::new();
    for tuple in &tuples {
        let ranges: Vec<(usize, usize)> = tuple.iter().enumerate().map(|(i, &l)| (0, levels[i][l - 1].len() - 1)).collect();
        for_each_in_box(&ranges, |pos| {
            set.insert(pos.iter().enumerate().map(|(i, &p)| levels[i][tuple[i] - 1][p]).collect::<Vec<usize>>());
        });
    }
    let jumps: Vec<Vec<usize>> = set.into_iter().collect();
    let enlarged = enlarge_points(&jumps, k);
    Ok(MeshGrid { shape: shape.to_vec(), k, delta, levels, tuples, jumps, enlarged })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regular_grid_examples() {
        let s = regular_grid(&[32, 32], 1, 2, BoxRule::Standard).unwrap();
        assert_eq!(s.jumps(), &[vec![9, 9], vec![9, 25], vec![25, 9], vec![25, 25]]);
        assert_eq!(regular_grid(&[32], 1, 1, BoxRule::Standard).unwrap().jumps(), &[vec![17]]);
        let one = regular_grid(&[33], 1, 1, BoxRule::Standard).unwrap();
        assert_eq!(one.jumps(), &[vec![17]]);
        let dm = regular_grid(&[64], 4, 3, BoxRule::DerivativeMatching).unwrap();
        assert_eq!(dm.jumps(), &[vec![29], vec![33], vec![37]]);
        for t in dm.jumps() {
            assert!(t[0] > 4 + 24 && 64 - (t[0] + 3) >= 24);
        }
    }

    #[test]
    fn regular_grid_rejects_crowding() {
        assert!(regular_grid(&[8], 2, 5, BoxRule::Standard).is_err());
    }

    #[test]
    fn enlarge_examples() {
        let s = ActiveSet::new(&[16], 1, vec![vec![5], vec![9]], BoxRule::Standard).unwrap();
        assert_eq!(s.enlarge(), vec![vec![5], vec![9]]);
        let s = ActiveSet::new(&[16, 16], 2, vec![vec![6, 7]], BoxRule::Standard).unwrap();
        assert_eq!(s.enlarge(), vec![vec![6, 7], vec![6, 8], vec![7, 7], vec![7, 8]]);
        let s = ActiveSet::new(&[20], 3, vec![vec![6], vec![7]], BoxRule::Standard).unwrap();
        assert_eq!(s.enlarge().len(), 4);
    }

    #[test]
    fn single_jump_cell() {
        let s = ActiveSet::new(&[32], 1, vec![vec![12]], BoxRule::Standard).unwrap();
        let t = s.tessellate().unwrap();
        let c = &t.cells()[0];
        assert_eq!((c.lo[0], c.hi[0]), (2, 32));
        assert_eq!(c.d_minus(0), 10);
        assert_eq!(c.d_plus(0, 1), 20);
        t.validate().unwrap();
    }

    #[test]
    fn regular_grid_cells_congruent() {
        let t = regular_grid(&[32, 32], 1, 2, BoxRule::Standard).unwrap().tessellate().unwrap();
        let sizes: BTreeSet<Vec<usize>> =
            t.cells().iter().map(|c| c.lo.iter().zip(&c.hi).map(|(l, h)| h - l).collect()).collect();
        assert_eq!(sizes.len(), 1);
        t.validate().unwrap();
        assert_eq!(t.d_max(0), 8);
    }

    #[test]
    fn close_jumps_cannot_be_tessellated() {
        let s = ActiveSet::new(&[20], 2, vec![vec![6], vec![8]], BoxRule::Standard).unwrap();
        assert!(s.tessellate().is_err());
    }

    #[test]
    fn mesh_tuple_filter() {
        assert!(!mesh_tuple_admissible(&[1, 1]));
        assert!(mesh_tuple_admissible(&[1, 2]));
        assert_eq!(mesh_tuples(2), vec![vec![1, 2], vec![2, 1], vec![2, 2]]);
    }

    #[test]
    fn mesh_grid_one_dimension() {
        let g = mesh_grid(&[64], 1, 5).unwrap();
        assert_eq!(g.len(), 5);
        let gaps: Vec<usize> = g.jumps.windows(2).map(|w| w[1][0] - w[0][0]).collect();
        assert!(gaps.iter().max().unwrap() - gaps.iter().min().unwrap() <= 1);
    }

    #[test]
    fn mesh_grid_two_dimensions() {
        let g = mesh_grid(&[64, 64], 1, 2).unwrap();
        let ratio = g.len() as f64 / 2f64.powf(2.0 * harmonic(2));
        assert!((0.25..=4.0).contains(&ratio));
        for axis in &g.levels {
            assert!(axis[1].iter().all(|z| axis[0].contains(z)));
        }
    }
}
