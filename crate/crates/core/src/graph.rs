//! Population graph construction and normalization.
//!
//! Graphs are undirected and unweighted, stored as sorted neighbor lists without
//! self-loops. Propagation operators are derived from them on demand.

use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{GkdError, Result};
use crate::matrix::{dot, DenseMatrix};
use crate::scalar::Scalar;
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseGraph {
    neighbors: Vec<Vec<usize>>,
}

impl SparseGraph {
    pub fn empty(n: usize) -> Self {
        Self {
            neighbors: vec![Vec::new(); n],
        }
    }

    /// Builds from an undirected edge list. Self-loops are rejected, duplicates collapse.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut neighbors = vec![Vec::new(); n];
        for (i, j) in edges {
            if i >= n || j >= n {
                return Err(GkdError::usage(format!(
                    "edge ({i}, {j}) out of range for {n} nodes"
                )));
            }
            if i == j {
                return Err(GkdError::usage(format!("self-loop on node {i}")));
            }
            neighbors[i].push(j);
            neighbors[j].push(i);
        }
        for list in &mut neighbors {
            list.sort_unstable();
            list.dedup();
        }
        Ok(Self { neighbors })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.neighbors.len()
    }

    #[inline]
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    #[inline]
    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    pub fn num_edges(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.neighbors[i].binary_search(&j).is_ok()
    }

    /// Every edge once, as `(i, j)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.neighbors
            .iter()
            .enumerate()
            .flat_map(|(i, list)| list.iter().filter(move |&&j| j > i).map(move |&j| (i, j)))
    }

    /// Subgraph on `nodes`, relabelled so that `nodes[k]` becomes node `k`.
    pub fn induced_subgraph(&self, nodes: &[usize]) -> Result<Self> {
        let mut position = vec![usize::MAX; self.n()];
        for (k, &v) in nodes.iter().enumerate() {
            if v >= self.n() {
                return Err(GkdError::usage(format!(
                    "node {v} out of range for {} nodes",
                    self.n()
                )));
            }
            position[v] = k;
        }
        let neighbors = nodes
            .iter()
            .map(|&v| {
                let mut list: Vec<usize> = self.neighbors[v]
                    .iter()
                    .filter_map(|&u| (position[u] != usize::MAX).then_some(position[u]))
                    .collect();
                list.sort_unstable();
                list
            })
            .collect();
        Ok(Self { neighbors })
    }

    /// Writes the edge-list format: `N <count>` then one `i j` line per edge, `i < j`.
    pub fn write_edge_list<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "N {}", self.n())?;
        for (i, j) in self.edges() {
            writeln!(w, "{i} {j}")?;
        }
        Ok(())
    }

    pub fn read_edge_list<R: BufRead>(r: R, source_name: &str) -> Result<Self> {
        let mut lines = r.lines().enumerate();
        let parse_err = |line: usize, msg: String| GkdError::parse(source_name, line as u64 + 1, msg);
        let n = loop {
            let (idx, line) = lines
                .next()
                .ok_or_else(|| GkdError::parse(source_name, 1, "missing `N <count>` header"))?;
            let line = line.map_err(|e| parse_err(idx, e.to_string()))?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            match (parts.next(), parts.next(), parts.next()) {
                (Some("N"), Some(count), None) => {
                    break count
                        .parse::<usize>()
                        .map_err(|e| parse_err(idx, format!("bad node count: {e}")))?
                }
                _ => return Err(parse_err(idx, format!("expected `N <count>`, found `{line}`"))),
            }
        };
        let mut edges = Vec::new();
        for (idx, line) in lines {
            let line = line.map_err(|e| parse_err(idx, e.to_string()))?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 2 {
                return Err(parse_err(idx, format!("expected `i j`, found `{line}`")));
            }
            let i: usize = fields[0]
                .parse()
                .map_err(|e| parse_err(idx, format!("bad node index: {e}")))?;
            let j: usize = fields[1]
                .parse()
                .map_err(|e| parse_err(idx, format!("bad node index: {e}")))?;
            if i >= n || j >= n || i == j {
                return Err(parse_err(idx, format!("invalid edge ({i}, {j}) for {n} nodes")));
            }
            edges.push((i, j));
        }
        Self::from_edges(n, edges)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| GkdError::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_edge_list(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| GkdError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| GkdError::io(path, e))?;
        Self::read_edge_list(std::io::BufReader::new(file), &path.display().to_string())
    }
}

/// Connects every pair of observed values closer than `threshold` (strictly).
pub fn threshold_graph<T: Scalar>(values: &[Option<T>], threshold: T) -> Result<SparseGraph> {
    if !(threshold > T::zero()) {
        return Err(GkdError::usage(format!(
            "threshold must be positive, got {threshold}"
        )));
    }
    let mut present: Vec<(T, usize)> = values
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.map(|v| (v, i)))
        .collect();
    present.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal).then(a.1.cmp(&b.1)));
    let mut edges = Vec::new();
    for (a, &(va, i)) in present.iter().enumerate() {
        for &(vb, j) in &present[a + 1..] {
            if (vb - va).abs() < threshold {
                edges.push((i, j));
            } else {
                break;
            }
        }
    }
    SparseGraph::from_edges(values.len(), edges)
}

/// Set union of edge sets over graphs on the same node count.
pub fn union_graphs(graphs: &[SparseGraph]) -> Result<SparseGraph> {
    let n = match graphs.first() {
        Some(g) => g.n(),
        None => return Err(GkdError::usage("union of zero graphs")),
    };
    if let Some(g) = graphs.iter().find(|g| g.n() != n) {
        return Err(GkdError::usage(format!(
            "cannot union graphs over {n} and {} nodes",
            g.n()
        )));
    }
    let neighbors = (0..n)
        .map(|i| {
            let mut list: Vec<usize> = graphs.iter().flat_map(|g| g.neighbors(i).iter().copied()).collect();
            list.sort_unstable();
            list.dedup();
            list
        })
        .collect();
    Ok(SparseGraph { neighbors })
}

/// Connects rows whose cosine similarity exceeds `threshold`. Zero-norm rows stay isolated.
pub fn similarity_graph<T: Scalar>(embeddings: &DenseMatrix<T>, threshold: T) -> Result<SparseGraph> {
    if !(threshold > T::zero() && threshold <= T::one()) {
        return Err(GkdError::usage(format!(
            "similarity threshold must lie in (0, 1], got {threshold}"
        )));
    }
    let n = embeddings.rows();
    let norms: Vec<T> = embeddings.row_iter().map(|r| dot(r, r).sqrt()).collect();
    let zero_rows = norms.iter().filter(|&&v| v == T::zero()).count();
    if zero_rows > 0 {
        log::warn!("{zero_rows} zero-norm embedding rows left without edges");
    }
    let mut edges = Vec::new();
    for i in 0..n {
        if norms[i] == T::zero() {
            continue;
        }
        for j in i + 1..n {
            if norms[j] == T::zero() {
                continue;
            }
            let cos = dot(embeddings.row(i), embeddings.row(j)) / (norms[i] * norms[j]);
            if cos > threshold {
                edges.push((i, j));
            }
        }
    }
    SparseGraph::from_edges(n, edges)
}

/// Row-stochastic `D⁻¹A`. Isolated nodes receive a unit self-loop so every row sums to one.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagationOperator<T> {
    matrix: CsrMatrix<T>,
    self_looped: Vec<usize>,
}

impl<T: Scalar> PropagationOperator<T> {
    pub fn matrix(&self) -> &CsrMatrix<T> {
        &self.matrix
    }

    pub fn n(&self) -> usize {
        self.matrix.n_rows()
    }

    /// Nodes that had degree zero and were given a self-loop.
    pub fn self_looped(&self) -> &[usize] {
        &self.self_looped
    }

    pub fn apply(&self, y: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
        self.matrix.mul_dense(y)
    }
}

pub fn row_normalize<T: Scalar>(g: &SparseGraph) -> PropagationOperator<T> {
    let mut self_looped = Vec::new();
    let rows = (0..g.n())
        .map(|i| {
            let deg = g.degree(i);
            if deg == 0 {
                self_looped.push(i);
                vec![(i, T::one())]
            } else {
                let w = T::one() / T::of(deg as f64);
                g.neighbors(i).iter().map(|&j| (j, w)).collect()
            }
        })
        .collect();
    PropagationOperator {
        matrix: CsrMatrix::from_rows(g.n(), rows).expect("neighbor lists are sorted"),
        self_looped,
    }
}

/// `D̃^{-1/2} (A + I) D̃^{-1/2}`, the renormalized GCN propagation matrix.
pub fn sym_normalize<T: Scalar>(g: &SparseGraph) -> CsrMatrix<T> {
    let inv_sqrt: Vec<T> = (0..g.n())
        .map(|i| T::one() / T::of((g.degree(i) + 1) as f64).sqrt())
        .collect();
    let rows = (0..g.n())
        .map(|i| {
            let mut row: Vec<(usize, T)> = g
                .neighbors(i)
                .iter()
                .map(|&j| (j, inv_sqrt[i] * inv_sqrt[j]))
                .collect();
            let at = row.partition_point(|&(j, _)| j < i);
            row.insert(at, (i, inv_sqrt[i] * inv_sqrt[i]));
            row
        })
        .collect();
    CsrMatrix::from_rows(g.n(), rows).expect("neighbor lists are sorted")
}

/// Supplementary biomarker thresholds used for the TADPOLE-style population graph.
pub mod tadpole {
    pub const ABETA: f64 = 20.0;
    pub const TAU: f64 = 15.0;
    pub const PTAU: f64 = 1.5;
    pub const FDG: f64 = 0.02;
    pub const AV45: f64 = 0.03;

    /// In column order Aβ, Tau, pTau, FDG, AV45.
    pub const THRESHOLDS: [f64; 5] = [ABETA, TAU, PTAU, FDG, AV45];
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn edge_set(g: &SparseGraph) -> Vec<(usize, usize)> {
        g.edges().collect()
    }

    fn is_symmetric(g: &SparseGraph) -> bool {
        (0..g.n()).all(|i| g.neighbors(i).iter().all(|&j| g.has_edge(j, i) && j != i))
    }

    #[test]
    fn threshold_examples() {
        let g = threshold_graph(&[Some(10.0), Some(25.0), Some(40.0)], 20.0).unwrap();
        assert_eq!(edge_set(&g), vec![(0, 1), (1, 2)]);

        let g = threshold_graph(&[Some(10.0), None, Some(28.0)], 20.0).unwrap();
        assert_eq!(edge_set(&g), vec![(0, 2)]);

        // boundary excluded
        let g = threshold_graph(&[Some(0.0), Some(1.0)], 1.0).unwrap();
        assert_eq!(g.num_edges(), 0);

        assert!(matches!(threshold_graph(&[Some(1.0)], 0.0), Err(GkdError::Usage(_))));
    }

    #[test]
    fn tadpole_thresholds() {
        assert_eq!(tadpole::THRESHOLDS, [20.0, 15.0, 1.5, 0.02, 0.03]);
    }

    #[test]
    fn union_examples() {
        let g = SparseGraph::from_edges(3, [(0, 1)]).unwrap();
        let h = SparseGraph::from_edges(3, [(1, 2)]).unwrap();
        assert_eq!(union_graphs(&[g.clone(), SparseGraph::empty(3)]).unwrap(), g);
        assert_eq!(edge_set(&union_graphs(&[g, h]).unwrap()), vec![(0, 1), (1, 2)]);
        assert!(union_graphs(&[SparseGraph::empty(2), SparseGraph::empty(3)]).is_err());
    }

    #[test]
    fn similarity_examples() {
        let same = DenseMatrix::from_rows(&[[1.0, 2.0], [1.0, 2.0], [2.0, 4.0]]).unwrap();
        assert_eq!(similarity_graph(&same, 0.9).unwrap().num_edges(), 3);
        let ortho = DenseMatrix::from_rows(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]).unwrap();
        assert_eq!(similarity_graph(&ortho, 0.5).unwrap().num_edges(), 0);
        let with_zero = DenseMatrix::from_rows(&[[1.0, 0.0], [0.0, 0.0], [1.0, 0.0]]).unwrap();
        let g = similarity_graph(&with_zero, 0.5).unwrap();
        assert_eq!(edge_set(&g), vec![(0, 2)]);
    }

    #[test]
    fn row_normalize_examples() {
        let path = SparseGraph::from_edges(3, [(0, 1), (1, 2)]).unwrap();
        let p = row_normalize::<f64>(&path).matrix().to_dense();
        assert_eq!(p.row(1), &[0.5, 0.0, 0.5]);
        assert_eq!(p.row(0), &[0.0, 1.0, 0.0]);
        assert_eq!(p.row(2), &[0.0, 1.0, 0.0]);

        let iso = SparseGraph::from_edges(3, [(0, 1)]).unwrap();
        let op = row_normalize::<f64>(&iso);
        assert_eq!(op.matrix().to_dense().row(2), &[0.0, 0.0, 1.0]);
        assert_eq!(op.self_looped(), &[2]);
    }

    #[test]
    fn sym_normalize_examples() {
        let single = sym_normalize::<f64>(&SparseGraph::empty(1)).to_dense();
        assert_eq!(single.as_slice(), &[1.0]);
        let pair = sym_normalize::<f64>(&SparseGraph::from_edges(2, [(0, 1)]).unwrap()).to_dense();
        for &v in pair.as_slice() {
            assert!((v - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn edge_list_round_trip_and_errors() {
        let g = SparseGraph::from_edges(5, [(0, 3), (4, 1), (2, 3)]).unwrap();
        let mut buf = Vec::new();
        g.write_edge_list(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "N 5\n0 3\n1 4\n2 3\n");
        assert_eq!(SparseGraph::read_edge_list(&buf[..], "mem").unwrap(), g);

        let bad = b"N 3\n0 1\n1 7\n";
        match SparseGraph::read_edge_list(&bad[..], "mem") {
            Err(GkdError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert!(SparseGraph::read_edge_list(&b"0 1\n"[..], "mem").is_err());
    }

    #[test]
    fn induced_subgraph_relabels() {
        let g = SparseGraph::from_edges(5, [(0, 1), (1, 4), (3, 4), (0, 2)]).unwrap();
        let s = g.induced_subgraph(&[4, 1, 3]).unwrap();
        assert_eq!(edge_set(&s), vec![(0, 1), (0, 2)]);
    }

    fn random_values() -> impl Strategy<Value = Vec<Option<f64>>> {
        prop::collection::vec(prop::option::weighted(0.8, -5.0f64..5.0), 1..50)
    }

    proptest! {
        #[test]
        fn threshold_matches_brute_force(values in random_values(), t in 0.01f64..3.0) {
            let g = threshold_graph(&values, t).unwrap();
            prop_assert!(is_symmetric(&g));
            for i in 0..values.len() {
                for j in 0..values.len() {
                    let expect = i != j && matches!((values[i], values[j]), (Some(a), Some(b)) if (a - b).abs() < t);
                    prop_assert_eq!(g.has_edge(i, j), expect);
                }
            }
        }

        #[test]
        fn threshold_is_permutation_equivariant(values in random_values(), t in 0.01f64..3.0, swap in (0usize..50, 0usize..50)) {
            let n = values.len();
            let (a, b) = (swap.0 % n, swap.1 % n);
            let mut swapped = values.clone();
            swapped.swap(a, b);
            let g = threshold_graph(&values, t).unwrap();
            let h = threshold_graph(&swapped, t).unwrap();
            let perm = |v: usize| if v == a { b } else if v == b { a } else { v };
            for (i, j) in g.edges() {
                prop_assert!(h.has_edge(perm(i), perm(j)));
            }
            prop_assert_eq!(g.num_edges(), h.num_edges());
        }

        #[test]
        fn threshold_limits(values in prop::collection::vec(-5.0f64..5.0, 1..30)) {
            let observed: Vec<Option<f64>> = values.iter().copied().map(Some).collect();
            let n = values.len();
            prop_assert_eq!(threshold_graph(&observed, 1e6).unwrap().num_edges(), n * (n - 1) / 2);
            let distinct = {
                let mut v = values.clone();
                v.sort_by(f64::total_cmp);
                v.dedup();
                v.len() == n
            };
            if distinct {
                prop_assert_eq!(threshold_graph(&observed, 1e-300).unwrap().num_edges(), 0);
            }
        }

        #[test]
        fn union_algebra(
            e1 in prop::collection::vec((0usize..12, 0usize..12), 0..30),
            e2 in prop::collection::vec((0usize..12, 0usize..12), 0..30),
            e3 in prop::collection::vec((0usize..12, 0usize..12), 0..30),
        ) {
            let mk = |e: &[(usize, usize)]| SparseGraph::from_edges(12, e.iter().copied().filter(|(i, j)| i != j)).unwrap();
            let (a, b, c) = (mk(&e1), mk(&e2), mk(&e3));
            let u = |gs: &[SparseGraph]| union_graphs(gs).unwrap();
            prop_assert_eq!(u(&[a.clone(), a.clone()]), a.clone());
            prop_assert_eq!(u(&[a.clone(), b.clone()]), u(&[b.clone(), a.clone()]));
            prop_assert_eq!(
                u(&[u(&[a.clone(), b.clone()]), c.clone()]),
                u(&[a.clone(), u(&[b.clone(), c.clone()])])
            );
            prop_assert!(is_symmetric(&u(&[a, b, c])));
        }

        #[test]
        fn row_normalized_rows_sum_to_one(e in prop::collection::vec((0usize..20, 0usize..20), 0..60)) {
            let g = SparseGraph::from_edges(20, e.into_iter().filter(|(i, j)| i != j)).unwrap();
            for s in row_normalize::<f64>(&g).matrix().row_sums() {
                prop_assert!((s - 1.0).abs() <= 1e-12);
            }
        }
    }
}
