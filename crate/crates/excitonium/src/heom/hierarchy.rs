//! Multi-index bookkeeping for the auxiliary density operator hierarchy.
//!
//! An auxiliary operator is labeled by a multi-index n over the
//! N·(K+1) dissipation modes (site j, correlation term k), with total
//! depth Σ n_{jk} bounded by the truncation depth. Indices are enumerated
//! densely in graded lexicographic order — by depth shell, then
//! lexicographically within each shell — so the all-zeros index (the
//! physical state) is ordinal 0 and every ladder neighbor of a shell lies
//! in one of the two adjacent, contiguous shells (which keeps the deepest
//! shell's gather traffic inside the small shell below it). Neighbor
//! lookups are precomputed tables.

use std::collections::HashMap;

use crate::error::{Error, Result};

/// Raising neighbor: the ADO reached by n → n + e_mode. The mode's site
/// and correlation-term indices are stored directly so the solver's inner
/// loop never divides.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Raising {
    pub target: u32,
    pub site: u8,
    pub term: u8,
}

/// Lowering neighbor: the ADO reached by n → n − e_mode, with the
/// occupation n_mode of the source index (the coupling multiplicity).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Lowering {
    pub target: u32,
    pub site: u8,
    pub term: u8,
    pub occupation: u8,
}

/// A raising edge grouped by mode: source ADO and its n + e_mode target.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RaisingPair {
    pub source: u32,
    pub target: u32,
}

/// A lowering edge grouped by mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LoweringPair {
    pub source: u32,
    pub target: u32,
    pub occupation: u8,
}

/// Dense enumeration of all multi-indices with depth ≤ `depth`, plus O(1)
/// raising/lowering neighbor tables (per ADO, and grouped per mode with
/// sources ascending — the mode-major form keeps both sides of the ladder
/// gathers monotone in memory).
#[derive(Debug, Clone)]
pub struct Hierarchy {
    n_sites: usize,
    n_matsubara: usize,
    depth: usize,
    count: usize,
    /// count × n_modes occupation numbers.
    indices: Vec<u8>,
    ordinals: HashMap<Vec<u8>, u32>,
    raising: Vec<Raising>,
    raising_offsets: Vec<u32>,
    lowering: Vec<Lowering>,
    lowering_offsets: Vec<u32>,
    raising_by_mode: Vec<Vec<RaisingPair>>,
    lowering_by_mode: Vec<Vec<LoweringPair>>,
}

/// Number of multi-indices over `modes` nonneg integers with sum ≤ depth:
/// C(modes + depth, depth).
pub fn hierarchy_count(modes: usize, depth: usize) -> Option<usize> {
    let mut acc: u128 = 1;
    for i in 1..=depth as u128 {
        acc = acc.checked_mul(modes as u128 + i)?;
        acc /= i;
    }
    usize::try_from(acc).ok()
}

impl Hierarchy {
    /// Enumerate the hierarchy for `n_sites` sites, `n_matsubara` + 1
    /// correlation terms per site, and truncation depth `depth`. Errors if
    /// the ADO count would exceed `max_ados`.
    pub fn build(
        n_sites: usize,
        n_matsubara: usize,
        depth: usize,
        max_ados: usize,
    ) -> Result<Self> {
        if n_sites == 0 {
            return Err(Error::InvalidParameter("need at least one site".into()));
        }
        let n_modes = n_sites * (n_matsubara + 1);
        let count = hierarchy_count(n_modes, depth).unwrap_or(usize::MAX);
        if count > max_ados {
            return Err(Error::HierarchyTooLarge {
                count,
                max: max_ados,
            });
        }

        let mut indices: Vec<u8> = Vec::with_capacity(count * n_modes);
        let mut current = vec![0u8; n_modes];
        for shell in 0..=depth {
            enumerate_shell(&mut indices, &mut current, 0, shell);
        }
        debug_assert_eq!(indices.len(), count * n_modes);

        let mut ordinals = HashMap::with_capacity(count);
        for o in 0..count {
            ordinals.insert(indices[o * n_modes..(o + 1) * n_modes].to_vec(), o as u32);
        }

        let mut raising = Vec::new();
        let mut raising_offsets = Vec::with_capacity(count + 1);
        let mut lowering = Vec::new();
        let mut lowering_offsets = Vec::with_capacity(count + 1);
        let mut raising_by_mode = vec![Vec::new(); n_modes];
        let mut lowering_by_mode = vec![Vec::new(); n_modes];
        let mut probe = vec![0u8; n_modes];
        for o in 0..count {
            raising_offsets.push(raising.len() as u32);
            lowering_offsets.push(lowering.len() as u32);
            let idx = &indices[o * n_modes..(o + 1) * n_modes];
            let d: usize = idx.iter().map(|&x| x as usize).sum();
            probe.copy_from_slice(idx);
            for m in 0..n_modes {
                let site = (m / (n_matsubara + 1)) as u8;
                let term = (m % (n_matsubara + 1)) as u8;
                if d < depth {
                    probe[m] += 1;
                    let target = ordinals[probe.as_slice()];
                    raising.push(Raising { target, site, term });
                    raising_by_mode[m].push(RaisingPair {
                        source: o as u32,
                        target,
                    });
                    probe[m] -= 1;
                }
                if idx[m] > 0 {
                    probe[m] -= 1;
                    let target = ordinals[probe.as_slice()];
                    lowering.push(Lowering {
                        target,
                        site,
                        term,
                        occupation: idx[m],
                    });
                    lowering_by_mode[m].push(LoweringPair {
                        source: o as u32,
                        target,
                        occupation: idx[m],
                    });
                    probe[m] += 1;
                }
            }
        }
        raising_offsets.push(raising.len() as u32);
        lowering_offsets.push(lowering.len() as u32);

        Ok(Self {
            n_sites,
            n_matsubara,
            depth,
            count,
            indices,
            ordinals,
            raising,
            raising_offsets,
            lowering,
            lowering_offsets,
            raising_by_mode,
            lowering_by_mode,
        })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn n_matsubara(&self) -> usize {
        self.n_matsubara
    }

    pub fn n_modes(&self) -> usize {
        self.n_sites * (self.n_matsubara + 1)
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// The site (0-based) a mode belongs to.
    pub fn mode_site(&self, mode: u32) -> usize {
        mode as usize / (self.n_matsubara + 1)
    }

    /// The correlation-term index (0 = Drude pole, then Matsubara).
    pub fn mode_term(&self, mode: u32) -> usize {
        mode as usize % (self.n_matsubara + 1)
    }

    /// Occupation numbers of an ADO.
    pub fn index(&self, ordinal: usize) -> &[u8] {
        let m = self.n_modes();
        &self.indices[ordinal * m..(ordinal + 1) * m]
    }

    /// Total depth Σ n_{jk} of an ADO.
    pub fn index_depth(&self, ordinal: usize) -> usize {
        self.index(ordinal).iter().map(|&x| x as usize).sum()
    }

    /// Ordinal of a multi-index, if it is inside the truncated hierarchy.
    pub fn ordinal(&self, index: &[u8]) -> Option<usize> {
        self.ordinals.get(index).map(|&o| o as usize)
    }

    pub fn raising_of(&self, ordinal: usize) -> &[Raising] {
        let a = self.raising_offsets[ordinal] as usize;
        let b = self.raising_offsets[ordinal + 1] as usize;
        &self.raising[a..b]
    }

    pub fn lowering_of(&self, ordinal: usize) -> &[Lowering] {
        let a = self.lowering_offsets[ordinal] as usize;
        let b = self.lowering_offsets[ordinal + 1] as usize;
        &self.lowering[a..b]
    }

    /// All raising edges of one mode, sources ascending.
    pub fn raising_pairs(&self, mode: usize) -> &[RaisingPair] {
        &self.raising_by_mode[mode]
    }

    /// All lowering edges of one mode, sources ascending.
    pub fn lowering_pairs(&self, mode: usize) -> &[LoweringPair] {
        &self.lowering_by_mode[mode]
    }
}

// All indices with Σ n = exactly `remaining` over modes `mode..`, in
// lexicographic order.
fn enumerate_shell(out: &mut Vec<u8>, current: &mut Vec<u8>, mode: usize, remaining: usize) {
    if mode == current.len() {
        if remaining == 0 {
            out.extend_from_slice(current);
        }
        return;
    }
    if mode + 1 == current.len() {
        current[mode] = remaining as u8;
        out.extend_from_slice(current);
        current[mode] = 0;
        return;
    }
    for v in 0..=remaining {
        current[mode] = v as u8;
        enumerate_shell(out, current, mode + 1, remaining - v);
    }
    current[mode] = 0;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_counts() {
        assert_eq!(Hierarchy::build(7, 0, 0, 10).unwrap().count(), 1);
        assert_eq!(Hierarchy::build(7, 0, 1, 10).unwrap().count(), 8);
        // C(11, 4) = 330
        assert_eq!(Hierarchy::build(7, 0, 4, 1000).unwrap().count(), 330);
        assert_eq!(hierarchy_count(7, 4), Some(330));
        // 7 sites, K = 3 → 28 modes, depth 4: C(32, 4)
        assert_eq!(hierarchy_count(28, 4), Some(35960));
    }

    #[test]
    fn overflow_guard() {
        assert!(matches!(
            Hierarchy::build(7, 0, 4, 100),
            Err(Error::HierarchyTooLarge { count: 330, max: 100 })
        ));
    }

    #[test]
    fn physical_state_is_ordinal_zero() {
        let h = Hierarchy::build(3, 1, 3, 100_000).unwrap();
        assert!(h.index(0).iter().all(|&x| x == 0));
        assert_eq!(h.index_depth(0), 0);
    }

    #[test]
    fn enumeration_is_bijective() {
        let h = Hierarchy::build(3, 1, 3, 100_000).unwrap();
        for o in 0..h.count() {
            assert_eq!(h.ordinal(h.index(o)), Some(o));
            assert!(h.index_depth(o) <= 3);
        }
    }

    #[test]
    fn neighbors_are_consistent() {
        let h = Hierarchy::build(2, 1, 2, 1000).unwrap();
        let k_terms = h.n_matsubara() + 1;
        for o in 0..h.count() {
            let depth = h.index_depth(o);
            if depth < h.depth() {
                assert_eq!(h.raising_of(o).len(), h.n_modes());
            } else {
                assert!(h.raising_of(o).is_empty());
            }
            for r in h.raising_of(o) {
                let m = r.site as usize * k_terms + r.term as usize;
                let mut idx = h.index(o).to_vec();
                idx[m] += 1;
                assert_eq!(h.ordinal(&idx), Some(r.target as usize));
                // Raising then lowering the same mode returns here.
                let back = h
                    .lowering_of(r.target as usize)
                    .iter()
                    .find(|l| (l.site, l.term) == (r.site, r.term))
                    .unwrap();
                assert_eq!(back.target as usize, o);
                assert_eq!(back.occupation as usize, idx[m] as usize);
            }
            for l in h.lowering_of(o) {
                let m = l.site as usize * k_terms + l.term as usize;
                assert_eq!(l.occupation as usize, h.index(o)[m] as usize);
                let mut idx = h.index(o).to_vec();
                idx[m] -= 1;
                assert_eq!(h.ordinal(&idx), Some(l.target as usize));
            }
        }
    }

    #[test]
    fn mode_decoding() {
        let h = Hierarchy::build(3, 2, 1, 100).unwrap();
        assert_eq!(h.n_modes(), 9);
        assert_eq!(h.mode_site(0), 0);
        assert_eq!(h.mode_term(0), 0);
        assert_eq!(h.mode_site(5), 1);
        assert_eq!(h.mode_term(5), 2);
        assert_eq!(h.mode_site(8), 2);
        assert_eq!(h.mode_term(8), 2);
    }
}
