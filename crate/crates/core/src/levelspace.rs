//! Level structures with bipartite-graph constraints and indexed product
//! state spaces for ion chains.
//!
//! A [`LevelGraph`] partitions one ion's levels into a computational set
//! `V1` and an auxiliary set `V2`; transition edges must cross the
//! partition. A [`ProductBasis`] indexes the tensor product of several such
//! systems, optionally times a truncated phonon mode.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A single system's energy levels with bipartite transition structure.
///
/// Level indices run over `V1` labels first (in declared order), then `V2`
/// labels. Labels are strings so qubit and qutrit graphs share code paths.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelGraph {
    labels_v1: Vec<String>,
    labels_v2: Vec<String>,
    edges: Vec<(String, String)>,
}

impl LevelGraph {
    /// Build a validated bipartite level graph.
    ///
    /// Every edge must connect a `V1` label to a `V2` label; labels must be
    /// unique across both sets and both sets non-empty.
    pub fn new<S: AsRef<str>>(
        labels_v1: &[S],
        labels_v2: &[S],
        edges: &[(S, S)],
    ) -> Result<Self> {
        if labels_v1.is_empty() || labels_v2.is_empty() {
            return Err(Error::InvalidInput(
                "both V1 and V2 must be non-empty".into(),
            ));
        }
        let v1: Vec<String> = labels_v1.iter().map(|s| s.as_ref().to_owned()).collect();
        let v2: Vec<String> = labels_v2.iter().map(|s| s.as_ref().to_owned()).collect();
        let mut seen = std::collections::HashSet::new();
        for l in v1.iter().chain(v2.iter()) {
            if !seen.insert(l.clone()) {
                return Err(Error::DuplicateLabel(l.clone()));
            }
        }
        let in_v1 = |l: &str| v1.iter().any(|x| x == l);
        let in_v2 = |l: &str| v2.iter().any(|x| x == l);
        let mut norm_edges = Vec::with_capacity(edges.len());
        for (a, b) in edges {
            let (a, b) = (a.as_ref(), b.as_ref());
            let (c, x) = if in_v1(a) && in_v2(b) {
                (a, b)
            } else if in_v2(a) && in_v1(b) {
                (b, a)
            } else if !in_v1(a) && !in_v2(a) {
                return Err(Error::InvalidLabel(a.to_owned()));
            } else if !in_v1(b) && !in_v2(b) {
                return Err(Error::InvalidLabel(b.to_owned()));
            } else {
                return Err(Error::IntraSetEdge(a.to_owned(), b.to_owned()));
            };
            norm_edges.push((c.to_owned(), x.to_owned()));
        }
        norm_edges.sort();
        norm_edges.dedup();
        Ok(Self {
            labels_v1: v1,
            labels_v2: v2,
            edges: norm_edges,
        })
    }

    /// The standard four-level qubit block: `V1 = {0, 1}`, `V2 = {a0, a1}`,
    /// fully connected across the partition.
    pub fn qubit4() -> Self {
        Self::new(
            &["0", "1"],
            &["a0", "a1"],
            &[("0", "a0"), ("0", "a1"), ("1", "a0"), ("1", "a1")],
        )
        .expect("preset is valid")
    }

    /// The five-level qutrit block: `V1 = {0, 1, 2}`, `V2 = {a0, a1}`,
    /// fully connected across the partition.
    pub fn qutrit5() -> Self {
        Self::new(
            &["0", "1", "2"],
            &["a0", "a1"],
            &[
                ("0", "a0"),
                ("0", "a1"),
                ("1", "a0"),
                ("1", "a1"),
                ("2", "a0"),
                ("2", "a1"),
            ],
        )
        .expect("preset is valid")
    }

    /// Total level count `|V1| + |V2|`.
    pub fn dim(&self) -> usize {
        self.labels_v1.len() + self.labels_v2.len()
    }

    /// Number of computational levels.
    pub fn v1_len(&self) -> usize {
        self.labels_v1.len()
    }

    pub fn labels_v1(&self) -> &[String] {
        &self.labels_v1
    }

    pub fn labels_v2(&self) -> &[String] {
        &self.labels_v2
    }

    pub fn edges(&self) -> &[(String, String)] {
        &self.edges
    }

    /// Level index of a label (`V1` labels first, then `V2`).
    pub fn level_index(&self, label: &str) -> Result<u8> {
        if let Some(i) = self.labels_v1.iter().position(|l| l == label) {
            return Ok(i as u8);
        }
        if let Some(i) = self.labels_v2.iter().position(|l| l == label) {
            return Ok((self.labels_v1.len() + i) as u8);
        }
        Err(Error::InvalidLabel(label.to_owned()))
    }

    /// Label of a level index.
    pub fn label(&self, index: u8) -> &str {
        let i = index as usize;
        if i < self.labels_v1.len() {
            &self.labels_v1[i]
        } else {
            &self.labels_v2[i - self.labels_v1.len()]
        }
    }

    /// Whether the level index belongs to the computational set `V1`.
    pub fn is_computational(&self, index: u8) -> bool {
        (index as usize) < self.labels_v1.len()
    }

    /// Whether the (unordered) pair is a declared transition edge.
    pub fn has_edge(&self, a: &str, b: &str) -> bool {
        self.edges
            .iter()
            .any(|(x, y)| (x == a && y == b) || (x == b && y == a))
    }
}

/// Build a validated bipartite level graph (free-function form).
pub fn build_level_graph<S: AsRef<str>>(
    labels_v1: &[S],
    labels_v2: &[S],
    edges: &[(S, S)],
) -> Result<LevelGraph> {
    LevelGraph::new(labels_v1, labels_v2, edges)
}

/// A full product-basis label: one level label per site, plus the phonon
/// quantum number when a phonon factor is present.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasisLabel {
    pub sites: Vec<String>,
    pub phonon: Option<usize>,
}

impl fmt::Display for BasisLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|{}", self.sites.join(" "))?;
        if let Some(n) = self.phonon {
            write!(f, "; n={n}")?;
        }
        write!(f, ">")
    }
}

/// Indexed tensor-product state space of `N` systems, optionally times a
/// truncated phonon mode.
///
/// Index order is fixed lexicographic with site 0 most significant and the
/// phonon index fastest, so matrices and reports are reproducible across
/// runs.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductBasis {
    sites: Vec<LevelGraph>,
    phonon_cutoff: Option<usize>,
    total_dim: u128,
}

impl ProductBasis {
    /// Number of sites (ions) in the chain.
    pub fn n_sites(&self) -> usize {
        self.sites.len()
    }

    pub fn site(&self, i: usize) -> &LevelGraph {
        &self.sites[i]
    }

    pub fn sites(&self) -> &[LevelGraph] {
        &self.sites
    }

    pub fn phonon_cutoff(&self) -> Option<usize> {
        self.phonon_cutoff
    }

    /// Total dimension, `prod(site dims) * (n_max + 1)` when a phonon factor
    /// is present.
    pub fn total_dim(&self) -> u128 {
        self.total_dim
    }

    /// Total dimension as `usize`, checked against a dense-mode cap.
    pub fn dense_dim(&self, cap: usize) -> Result<usize> {
        if self.total_dim > cap as u128 {
            return Err(Error::DimensionOverflow {
                dim: self.total_dim,
                cap,
            });
        }
        Ok(self.total_dim as usize)
    }

    /// Index of a basis state given per-site level indices and phonon number.
    pub fn index_of_levels(&self, levels: &[u8], phonon: Option<usize>) -> Result<u128> {
        if levels.len() != self.sites.len() {
            return Err(Error::DimensionMismatch(levels.len(), self.sites.len()));
        }
        let mut idx: u128 = 0;
        for (site, &lv) in self.sites.iter().zip(levels) {
            if (lv as usize) >= site.dim() {
                return Err(Error::InvalidLabel(format!("level index {lv}")));
            }
            idx = idx * site.dim() as u128 + lv as u128;
        }
        match (self.phonon_cutoff, phonon) {
            (Some(n_max), Some(n)) => {
                if n > n_max {
                    return Err(Error::InvalidCutoff(format!("n = {n} > n_max = {n_max}")));
                }
                idx = idx * (n_max as u128 + 1) + n as u128;
            }
            (None, None) => {}
            (Some(_), None) => {
                return Err(Error::InvalidInput("phonon number required".into()))
            }
            (None, Some(_)) => {
                return Err(Error::InvalidInput("basis has no phonon factor".into()))
            }
        }
        Ok(idx)
    }

    /// Index of a basis state given per-site labels (and phonon number).
    pub fn index_of(&self, label: &BasisLabel) -> Result<u128> {
        if label.sites.len() != self.sites.len() {
            return Err(Error::DimensionMismatch(label.sites.len(), self.sites.len()));
        }
        let levels: Vec<u8> = self
            .sites
            .iter()
            .zip(&label.sites)
            .map(|(g, l)| g.level_index(l))
            .collect::<Result<_>>()?;
        self.index_of_levels(&levels, label.phonon)
    }

    /// Convenience: index of the product of per-site labels, no phonon.
    pub fn index_of_site_labels(&self, labels: &[&str]) -> Result<u128> {
        self.index_of(&BasisLabel {
            sites: labels.iter().map(|s| s.to_string()).collect(),
            phonon: if self.phonon_cutoff.is_some() {
                Some(0)
            } else {
                None
            },
        })
    }

    /// Per-site level indices (and phonon number) of a basis index.
    pub fn levels_of(&self, index: u128) -> (Vec<u8>, Option<usize>) {
        let mut rem = index;
        let phonon = self.phonon_cutoff.map(|n_max| {
            let p = (rem % (n_max as u128 + 1)) as usize;
            rem /= n_max as u128 + 1;
            p
        });
        let mut levels = vec![0u8; self.sites.len()];
        for (slot, site) in levels.iter_mut().zip(self.sites.iter()).rev() {
            let d = site.dim() as u128;
            *slot = (rem % d) as u8;
            rem /= d;
        }
        (levels, phonon)
    }

    /// Full label of a basis index.
    pub fn labels_of(&self, index: u128) -> BasisLabel {
        let (levels, phonon) = self.levels_of(index);
        BasisLabel {
            sites: self
                .sites
                .iter()
                .zip(&levels)
                .map(|(g, &lv)| g.label(lv).to_owned())
                .collect(),
            phonon,
        }
    }

    /// Whether a basis state (by per-site levels and phonon number) lies in
    /// the computational subspace: every site in `V1` and the phonon mode,
    /// when present, in its ground state.
    pub fn is_computational_levels(&self, levels: &[u8], phonon: Option<usize>) -> bool {
        phonon.unwrap_or(0) == 0
            && self
                .sites
                .iter()
                .zip(levels)
                .all(|(g, &lv)| g.is_computational(lv))
    }

    /// Index stride of each site under the fixed lexicographic order
    /// (site 0 most significant), including the phonon factor.
    pub fn site_strides(&self) -> Vec<u128> {
        let mut strides = vec![0u128; self.sites.len()];
        let mut acc: u128 = self.phonon_cutoff.map_or(1, |n| n as u128 + 1);
        for (stride, site) in strides.iter_mut().zip(self.sites.iter()).rev() {
            *stride = acc;
            acc *= site.dim() as u128;
        }
        strides
    }

    /// Size of the phonon factor (1 when absent).
    pub fn phonon_dim(&self) -> usize {
        self.phonon_cutoff.map_or(1, |n| n + 1)
    }

    /// Indices of all computational basis states, ascending. Dense-mode only.
    pub fn computational_indices(&self, cap: usize) -> Result<Vec<usize>> {
        let dim = self.dense_dim(cap)?;
        let mut out = Vec::new();
        for i in 0..dim {
            let (levels, phonon) = self.levels_of(i as u128);
            if self.is_computational_levels(&levels, phonon) {
                out.push(i);
            }
        }
        Ok(out)
    }
}

/// Build the indexed product space of an ion chain.
pub fn product_space(
    site_graphs: Vec<LevelGraph>,
    phonon_cutoff: Option<usize>,
) -> Result<ProductBasis> {
    if site_graphs.is_empty() {
        return Err(Error::InvalidInput("at least one site graph required".into()));
    }
    let mut total: u128 = 1;
    for g in &site_graphs {
        total = total
            .checked_mul(g.dim() as u128)
            .ok_or_else(|| Error::InvalidInput("product dimension overflows u128".into()))?;
    }
    if let Some(n_max) = phonon_cutoff {
        total = total
            .checked_mul(n_max as u128 + 1)
            .ok_or_else(|| Error::InvalidInput("product dimension overflows u128".into()))?;
    }
    Ok(ProductBasis {
        sites: site_graphs,
        phonon_cutoff,
        total_dim: total,
    })
}

/// Build a chain of `n` copies of one level graph.
pub fn uniform_chain(graph: &LevelGraph, n: usize) -> Result<ProductBasis> {
    product_space(vec![graph.clone(); n], None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn qubit4_preset_shape() {
        let g = LevelGraph::qubit4();
        assert_eq!(g.dim(), 4);
        assert_eq!(g.v1_len(), 2);
        assert_eq!(g.edges().len(), 4);
        assert!(g.has_edge("1", "a0"));
        assert!(!g.has_edge("0", "1"));
    }

    #[test]
    fn qutrit5_preset_shape() {
        let g = LevelGraph::qutrit5();
        assert_eq!(g.dim(), 5);
        assert_eq!(g.v1_len(), 3);
        assert_eq!(g.edges().len(), 6);
    }

    #[test]
    fn intra_set_edge_rejected() {
        let err = LevelGraph::new(&["0", "1"], &["a0"], &[("0", "1")]).unwrap_err();
        assert!(matches!(err, Error::IntraSetEdge(_, _)));
    }

    #[test]
    fn duplicate_label_rejected() {
        let err = LevelGraph::new(&["0", "1"], &["1"], &[]).unwrap_err();
        assert_eq!(err, Error::DuplicateLabel("1".into()));
    }

    #[test]
    fn edge_with_unknown_label_rejected() {
        let err = LevelGraph::new(&["0"], &["a0"], &[("0", "zz")]).unwrap_err();
        assert_eq!(err, Error::InvalidLabel("zz".into()));
    }

    #[test]
    fn two_qubit_product_dim() {
        let b = uniform_chain(&LevelGraph::qubit4(), 2).unwrap();
        assert_eq!(b.total_dim(), 16);
    }

    #[test]
    fn twelve_qubit_product_dim() {
        let b = uniform_chain(&LevelGraph::qubit4(), 12).unwrap();
        assert_eq!(b.total_dim(), 16_777_216);
    }

    #[test]
    fn phonon_basis_dim_and_roundtrip() {
        let b = product_space(vec![LevelGraph::qubit4()], Some(2)).unwrap();
        assert_eq!(b.total_dim(), 12);
        for i in 0..12u128 {
            let label = b.labels_of(i);
            assert_eq!(b.index_of(&label).unwrap(), i);
        }
    }

    #[test]
    fn index_order_site0_slowest_phonon_fastest() {
        let b = product_space(vec![LevelGraph::qubit4(), LevelGraph::qubit4()], None).unwrap();
        // |0 0> is index 0, |0 1> index 1: site 1 varies fastest.
        assert_eq!(b.index_of_site_labels(&["0", "0"]).unwrap(), 0);
        assert_eq!(b.index_of_site_labels(&["0", "1"]).unwrap(), 1);
        assert_eq!(b.index_of_site_labels(&["1", "0"]).unwrap(), 4);
        let bp = product_space(vec![LevelGraph::qubit4()], Some(3)).unwrap();
        // phonon index fastest
        assert_eq!(
            bp.index_of(&BasisLabel { sites: vec!["0".into()], phonon: Some(1) })
                .unwrap(),
            1
        );
    }

    #[test]
    fn dense_cap_enforced() {
        let b = uniform_chain(&LevelGraph::qubit4(), 12).unwrap();
        let err = b.dense_dim(4096).unwrap_err();
        assert!(matches!(err, Error::DimensionOverflow { .. }));
    }

    #[test]
    fn computational_indices_of_two_qubits() {
        let b = uniform_chain(&LevelGraph::qubit4(), 2).unwrap();
        let comp = b.computational_indices(4096).unwrap();
        assert_eq!(comp, vec![0, 1, 4, 5]);
    }

    proptest! {
        #[test]
        fn index_label_bijection(
            n_sites in 1usize..4,
            qutrit_mask in proptest::collection::vec(any::<bool>(), 1..4),
            phonon in proptest::option::of(0usize..4),
        ) {
            let graphs: Vec<LevelGraph> = (0..n_sites)
                .map(|i| if *qutrit_mask.get(i).unwrap_or(&false) {
                    LevelGraph::qutrit5()
                } else {
                    LevelGraph::qubit4()
                })
                .collect();
            let b = product_space(graphs, phonon).unwrap();
            for i in 0..b.total_dim() {
                let label = b.labels_of(i);
                prop_assert_eq!(b.index_of(&label).unwrap(), i);
            }
        }

        #[test]
        fn bipartite_invariant_holds(edge_mask in proptest::collection::vec(any::<bool>(), 6)) {
            // Any subset of cross edges builds fine and stays bipartite.
            let all = [("0","a0"),("0","a1"),("1","a0"),("1","a1"),("2","a0"),("2","a1")];
            let edges: Vec<(&str,&str)> = all.iter().zip(&edge_mask)
                .filter(|(_, &m)| m).map(|(e, _)| *e).collect();
            let g = LevelGraph::new(&["0","1","2"], &["a0","a1"], &edges).unwrap();
            for (a, b) in g.edges() {
                let ia = g.level_index(a).unwrap();
                let ib = g.level_index(b).unwrap();
                prop_assert!(g.is_computational(ia) != g.is_computational(ib));
            }
        }
    }
}
