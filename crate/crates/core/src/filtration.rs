//! Threshold graphs over a λ grid and their connected components.
//!
//! Raising λ can only delete edges from a threshold graph, so the graphs form
//! a filtration and the component count β₀(λ) is non-decreasing. The
//! incremental builder exploits this: it walks the grid from the largest λ
//! down, feeding newly admitted edges into one union-find that is never
//! reset.

use rayon::prelude::*;

use crate::data::{DataMatrix, SymmetricMatrix};
use crate::error::{Error, Result};
use crate::glasso::{glasso_path, GlassoOptions};
use crate::threshold::LambdaGrid;

/// Default `eps` for reading a zero pattern off a solver estimate.
pub const ZERO_PATTERN_EPS: f64 = 1e-8;

/// Disjoint sets with path compression and union by rank. Each root also
/// tracks the smallest member, which serves as the canonical label.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<u32>,
    rank: Vec<u8>,
    min: Vec<u32>,
    sets: usize,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        Self {
            parent: (0..n as u32).collect(),
            rank: vec![0; n],
            min: (0..n as u32).collect(),
            sets: n,
        }
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    /// Number of disjoint sets.
    pub fn sets(&self) -> usize {
        self.sets
    }

    pub fn find(&mut self, x: usize) -> usize {
        let mut root = x as u32;
        while self.parent[root as usize] != root {
            root = self.parent[root as usize];
        }
        let mut cur = x as u32;
        while self.parent[cur as usize] != root {
            let next = self.parent[cur as usize];
            self.parent[cur as usize] = root;
            cur = next;
        }
        root as usize
    }

    /// Merges the sets of `a` and `b`; returns false if already joined.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        let (hi, lo) = if self.rank[ra] >= self.rank[rb] { (ra, rb) } else { (rb, ra) };
        self.parent[lo] = hi as u32;
        if self.rank[hi] == self.rank[lo] {
            self.rank[hi] += 1;
        }
        self.min[hi] = self.min[hi].min(self.min[lo]);
        self.sets -= 1;
        true
    }

    /// Smallest member of the set containing `x`.
    pub fn label(&mut self, x: usize) -> usize {
        let r = self.find(x);
        self.min[r] as usize
    }

    pub fn partition(&mut self) -> GraphPartition {
        let labels = (0..self.len()).map(|x| self.label(x)).collect();
        GraphPartition::from_labels(labels)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdjacencySource {
    /// Edge wherever the estimate is nonzero.
    ZeroPattern,
    /// Edge wherever `|m_ij| > λ`.
    Threshold,
}

/// How an asymmetric (cross-correlation) matrix is read as an undirected
/// graph: pair `{i, j}` gets `max` or `min` of `|m_ij|` and `|m_ji|`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CrossRule {
    #[default]
    Max,
    Min,
}

/// Undirected simple graph on `dim` nodes.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct AdjacencyMatrix {
    dim: usize,
    edges: Vec<(u32, u32)>,
    lambda: f64,
    source: AdjacencySource,
}

impl AdjacencyMatrix {
    /// Normalizes each pair to `i < j`, sorts and deduplicates. Rejects
    /// self-loops and out-of-range nodes.
    pub fn new(
        dim: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
        lambda: f64,
        source: AdjacencySource,
    ) -> Result<Self> {
        let mut out = Vec::new();
        for (i, j) in edges {
            if i == j {
                return Err(Error::InvalidArgument(format!("self-loop at node {i}")));
            }
            if i >= dim || j >= dim {
                return Err(Error::InvalidArgument(format!(
                    "edge ({i}, {j}) outside {dim} nodes"
                )));
            }
            out.push((i.min(j) as u32, i.max(j) as u32));
        }
        out.sort_unstable();
        out.dedup();
        Ok(Self {
            dim,
            edges: out,
            lambda,
            source,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn source(&self) -> AdjacencySource {
        self.source
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Edges as sorted `(i, j)` pairs with `i < j`.
    pub fn edges(&self) -> impl ExactSizeIterator<Item = (usize, usize)> + '_ {
        self.edges.iter().map(|&(i, j)| (i as usize, j as usize))
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        let key = (i.min(j) as u32, i.max(j) as u32);
        self.edges.binary_search(&key).is_ok()
    }

    /// True if every edge of `self` is an edge of `other`.
    pub fn is_subgraph_of(&self, other: &AdjacencyMatrix) -> bool {
        self.dim == other.dim && self.edges.iter().all(|e| other.edges.binary_search(e).is_ok())
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<u8> {
        let mut d = nalgebra::DMatrix::zeros(self.dim, self.dim);
        for (i, j) in self.edges() {
            d[(i, j)] = 1;
            d[(j, i)] = 1;
        }
        d
    }
}

/// Magnitude of pair `{i, j}`, `i < j`, as seen by a threshold graph.
#[inline]
fn pair_weight(m: &SymmetricMatrix, i: usize, j: usize, rule: CrossRule) -> f64 {
    let a = m[(i, j)].abs();
    if m.is_symmetric_kind() {
        return a;
    }
    let b = m[(j, i)].abs();
    match rule {
        CrossRule::Max => a.max(b),
        CrossRule::Min => a.min(b),
    }
}

fn strict_above(m: &SymmetricMatrix, cut: f64, rule: CrossRule) -> Vec<(usize, usize)> {
    let p = m.dim();
    let mut edges = Vec::new();
    for i in 0..p {
        for j in (i + 1)..p {
            if pair_weight(m, i, j, rule) > cut {
                edges.push((i, j));
            }
        }
    }
    edges
}

/// Edge `{i, j}` iff `|m_ij| > λ` (strict), off the diagonal.
pub fn threshold_adjacency(m: &SymmetricMatrix, lambda: f64) -> AdjacencyMatrix {
    threshold_adjacency_with(m, lambda, CrossRule::Max)
}

pub fn threshold_adjacency_with(m: &SymmetricMatrix, lambda: f64, rule: CrossRule) -> AdjacencyMatrix {
    AdjacencyMatrix::new(m.dim(), strict_above(m, lambda, rule), lambda, AdjacencySource::Threshold)
        .expect("upper-triangle pairs are valid edges")
}

/// Edge `{i, j}` iff `|estimate_ij| > eps`. The adjacency is tagged with the
/// estimate's λ when it carries one.
pub fn zero_pattern_adjacency(estimate: &SymmetricMatrix, eps: f64) -> AdjacencyMatrix {
    let lambda = estimate.lambda().unwrap_or(f64::NAN);
    AdjacencyMatrix::new(
        estimate.dim(),
        strict_above(estimate, eps, CrossRule::Max),
        lambda,
        AdjacencySource::ZeroPattern,
    )
    .expect("upper-triangle pairs are valid edges")
}

/// Node partition into connected components.
///
/// Each component is labelled by its smallest node, so two partitions are
/// equal iff their label vectors are equal.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct GraphPartition {
    labels: Vec<usize>,
    components: Vec<Vec<usize>>,
}

impl GraphPartition {
    /// Builds a partition from canonical labels (`labels[x]` = smallest node
    /// in `x`'s component).
    fn from_labels(labels: Vec<usize>) -> Self {
        let p = labels.len();
        let mut slot = vec![usize::MAX; p];
        let mut components: Vec<Vec<usize>> = Vec::new();
        for (x, &l) in labels.iter().enumerate() {
            if slot[l] == usize::MAX {
                slot[l] = components.len();
                components.push(Vec::new());
            }
            components[slot[l]].push(x);
        }
        Self { labels, components }
    }

    /// Partition from arbitrary block ids; relabels canonically.
    pub fn from_blocks(blocks: &[Vec<usize>], p: usize) -> Result<Self> {
        let mut labels = vec![usize::MAX; p];
        for block in blocks {
            let Some(&lead) = block.iter().min() else {
                return Err(Error::InvalidArgument("empty block".into()));
            };
            for &x in block {
                if x >= p || labels[x] != usize::MAX {
                    return Err(Error::InvalidArgument(format!(
                        "node {x} is out of range or in two blocks"
                    )));
                }
                labels[x] = lead;
            }
        }
        if let Some(x) = labels.iter().position(|&l| l == usize::MAX) {
            return Err(Error::InvalidArgument(format!("node {x} is in no block")));
        }
        Ok(Self::from_labels(labels))
    }

    pub fn singletons(p: usize) -> Self {
        Self::from_labels((0..p).collect())
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Components as ascending node lists, ordered by their smallest node.
    pub fn components(&self) -> &[Vec<usize>] {
        &self.components
    }

    /// Component count κ (β₀).
    pub fn kappa(&self) -> usize {
        self.components.len()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// True if every component of `self` lies inside one component of
    /// `coarser`.
    pub fn refines(&self, coarser: &GraphPartition) -> bool {
        self.len() == coarser.len()
            && self
                .components
                .iter()
                .all(|c| c.iter().all(|&x| coarser.labels[x] == coarser.labels[c[0]]))
    }
}

/// Connected components by union-find.
pub fn connected_components(a: &AdjacencyMatrix) -> GraphPartition {
    let mut uf = UnionFind::new(a.dim());
    for (i, j) in a.edges() {
        uf.union(i, j);
    }
    uf.partition()
}

/// β₀ curve and partitions over a λ grid.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct FiltrationResult {
    pub grid: LambdaGrid,
    pub beta0: Vec<usize>,
    pub partitions: Vec<GraphPartition>,
    pub edge_counts: Vec<usize>,
    /// Per-λ graphs, when retained. Threshold filtrations built
    /// incrementally do not keep them.
    pub adjacency: Option<Vec<AdjacencyMatrix>>,
    pub source: AdjacencySource,
}

impl FiltrationResult {
    /// Filtration from an explicit sequence of graphs, one per grid point.
    pub fn from_adjacencies(grid: LambdaGrid, graphs: Vec<AdjacencyMatrix>) -> Result<Self> {
        if graphs.len() != grid.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} graphs", grid.len()),
                got: format!("{} graphs", graphs.len()),
            });
        }
        let source = graphs.first().map_or(AdjacencySource::Threshold, |g| g.source());
        let partitions: Vec<GraphPartition> = graphs.iter().map(connected_components).collect();
        Ok(Self {
            beta0: partitions.iter().map(GraphPartition::kappa).collect(),
            edge_counts: graphs.iter().map(AdjacencyMatrix::edge_count).collect(),
            partitions,
            grid,
            adjacency: Some(graphs),
            source,
        })
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }
}

/// Threshold filtration of `m` over `grid`, computed incrementally.
///
/// Pairs are bucketed by how many grid values lie strictly below their
/// magnitude; walking λ downward then only ever adds edges. Cost is one pass
/// over the upper triangle plus `O(E α(p))` unions.
pub fn build_filtration(m: &SymmetricMatrix, grid: &LambdaGrid) -> FiltrationResult {
    build_filtration_with(m, grid, CrossRule::Max)
}

pub fn build_filtration_with(m: &SymmetricMatrix, grid: &LambdaGrid, rule: CrossRule) -> FiltrationResult {
    let p = m.dim();
    let lambdas = grid.values();
    let t_len = lambdas.len();
    // Edge present at grid index t iff t < bucket.
    let bucket = |w: f64| lambdas.partition_point(|&l| l < w);

    let mut counts = vec![0usize; t_len + 2];
    for i in 0..p {
        for j in (i + 1)..p {
            counts[bucket(pair_weight(m, i, j, rule)) + 1] += 1;
        }
    }
    let mut offsets = counts;
    for k in 1..offsets.len() {
        offsets[k] += offsets[k - 1];
    }
    let starts = offsets.clone();
    // Bucket 0 never enters the graph; skip storing it.
    let stored = offsets[t_len + 1] - offsets[1];
    let mut pairs = vec![(0u32, 0u32); stored];
    let mut cursor: Vec<usize> = offsets[..=t_len].iter().map(|&o| o.saturating_sub(starts[1])).collect();
    for i in 0..p {
        for j in (i + 1)..p {
            let b = bucket(pair_weight(m, i, j, rule));
            if b > 0 {
                pairs[cursor[b]] = (i as u32, j as u32);
                cursor[b] += 1;
            }
        }
    }

    let mut uf = UnionFind::new(p);
    let mut partitions = vec![GraphPartition::singletons(0); t_len];
    let mut edge_counts = vec![0usize; t_len];
    let mut edges_so_far = 0usize;
    for t in (0..t_len).rev() {
        let b = t + 1;
        let (lo, hi) = (starts[b] - starts[1], starts[b + 1] - starts[1]);
        for &(i, j) in &pairs[lo..hi] {
            uf.union(i as usize, j as usize);
        }
        edges_so_far += hi - lo;
        edge_counts[t] = edges_so_far;
        partitions[t] = uf.partition();
    }

    FiltrationResult {
        beta0: partitions.iter().map(GraphPartition::kappa).collect(),
        partitions,
        edge_counts,
        grid: grid.clone(),
        adjacency: None,
        source: AdjacencySource::Threshold,
    }
}

/// Threshold filtration recomputed independently at every grid point
/// (parallel over λ). Keeps the per-λ graphs.
pub fn build_filtration_from_scratch(m: &SymmetricMatrix, grid: &LambdaGrid) -> FiltrationResult {
    let graphs: Vec<AdjacencyMatrix> = grid
        .values()
        .par_iter()
        .map(|&l| threshold_adjacency(m, l))
        .collect();
    FiltrationResult::from_adjacencies(grid.clone(), graphs).expect("one graph per grid point")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct Nestedness {
    pub node_nested: bool,
    pub edge_nested: bool,
    /// First grid index `t + 1` whose graph breaks nesting with `t`, either
    /// in nodes or in edges.
    pub first_violation: Option<usize>,
    pub first_node_violation: Option<usize>,
    pub first_edge_violation: Option<usize>,
}

/// Checks that partitions refine and edge sets shrink along increasing λ.
///
/// Without retained graphs the edge check falls back to the construction:
/// incremental threshold filtrations are nested by definition.
pub fn verify_nestedness(f: &FiltrationResult) -> Nestedness {
    let t_len = f.partitions.len();
    let first_node_violation =
        (1..t_len).find(|&t| !f.partitions[t].refines(&f.partitions[t - 1]));
    let first_edge_violation = match &f.adjacency {
        Some(graphs) => (1..t_len).find(|&t| !graphs[t].is_subgraph_of(&graphs[t - 1])),
        None => {
            debug_assert_eq!(f.source, AdjacencySource::Threshold);
            None
        }
    };
    let first_violation = match (first_node_violation, first_edge_violation) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, b) => a.or(b),
    };
    Nestedness {
        node_nested: first_node_violation.is_none(),
        edge_nested: first_edge_violation.is_none(),
        first_violation,
        first_node_violation,
        first_edge_violation,
    }
}

/// Node ordering that makes the adjacency block diagonal.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct BlockPermutation {
    /// `perm[k]` is the original node placed at position `k`.
    pub perm: Vec<usize>,
    pub blocks: GraphPartition,
}

impl BlockPermutation {
    /// Inverse map: `position[x]` is where original node `x` lands.
    pub fn positions(&self) -> Vec<usize> {
        let mut pos = vec![0; self.perm.len()];
        for (k, &x) in self.perm.iter().enumerate() {
            pos[x] = k;
        }
        pos
    }

    /// The relabelled graph `P A Pᵀ`.
    pub fn apply(&self, a: &AdjacencyMatrix) -> AdjacencyMatrix {
        let pos = self.positions();
        AdjacencyMatrix::new(
            a.dim(),
            a.edges().map(|(i, j)| (pos[i], pos[j])),
            a.lambda(),
            a.source(),
        )
        .expect("permutation maps edges to edges")
    }

    /// Position ranges `[start, end)` of each block in permuted order.
    pub fn block_ranges(&self) -> Vec<(usize, usize)> {
        let mut order: Vec<&Vec<usize>> = self.blocks.components().iter().collect();
        sort_blocks(&mut order);
        let mut start = 0;
        order
            .iter()
            .map(|c| {
                let r = (start, start + c.len());
                start += c.len();
                r
            })
            .collect()
    }
}

fn sort_blocks(blocks: &mut [&Vec<usize>]) {
    blocks.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));
}

/// Groups nodes by component: larger components first, ties broken by the
/// smaller leading node, nodes ascending within a component.
pub fn block_permutation(a: &AdjacencyMatrix) -> BlockPermutation {
    let blocks = connected_components(a);
    let mut order: Vec<&Vec<usize>> = blocks.components().iter().collect();
    sort_blocks(&mut order);
    let perm = order.into_iter().flatten().copied().collect();
    BlockPermutation { perm, blocks }
}

/// The two filtrations related by block screening, with a per-λ
/// comparison.
#[derive(Debug, Clone, serde::Serialize)]
pub struct GlassoFiltration {
    /// Zero pattern of the GLASSO precision at each solved λ.
    pub zero_pattern: FiltrationResult,
    /// `|s_ij| > λ` on the same grid points.
    pub threshold: FiltrationResult,
    /// Whether the two partitions coincide at each retained grid point.
    pub partitions_match: Vec<bool>,
    /// Grid indices skipped because the solver failed there.
    pub skipped: Vec<usize>,
    pub kkt_residuals: Vec<f64>,
}

impl GlassoFiltration {
    pub fn all_match(&self) -> bool {
        self.partitions_match.iter().all(|&b| b)
    }
}

/// Solves GLASSO on the sample covariance at every positive grid point (warm
/// started from the largest λ down) and pairs its zero-pattern filtration
/// with the covariance threshold filtration.
pub fn glasso_filtration(
    data: &DataMatrix,
    grid: &LambdaGrid,
    opts: &GlassoOptions,
) -> Result<GlassoFiltration> {
    glasso_filtration_from_covariance(&data.sample_covariance(), grid, opts)
}

pub fn glasso_filtration_from_covariance(
    s: &SymmetricMatrix,
    grid: &LambdaGrid,
    opts: &GlassoOptions,
) -> Result<GlassoFiltration> {
    if grid.values()[0] <= 0.0 {
        return Err(Error::InvalidGrid("GLASSO filtration needs λ > 0".into()));
    }
    let path = glasso_path(s, grid.values(), opts)?;
    let mut skipped = Vec::new();
    let mut zero_graphs = Vec::new();
    let mut kkt_residuals = Vec::new();
    for (t, fit) in path.into_iter().enumerate() {
        match fit {
            Ok(sol) if sol.converged => {
                zero_graphs.push(zero_pattern_adjacency(&sol.precision, ZERO_PATTERN_EPS));
                kkt_residuals.push(sol.kkt_residual);
            }
            Ok(sol) => {
                log::warn!(
                    "GLASSO did not converge at λ = {} (KKT residual {:e}); skipping",
                    grid.values()[t],
                    sol.kkt_residual
                );
                skipped.push(t);
            }
            Err(e) => {
                log::warn!("GLASSO failed at λ = {}: {e}; skipping", grid.values()[t]);
                skipped.push(t);
            }
        }
    }
    let kept = grid
        .without(&skipped)
        .ok_or_else(|| Error::NotConverged {
            iterations: opts.max_sweeps,
            residual: f64::NAN,
        })?;
    let threshold_graphs = kept.values().iter().map(|&l| threshold_adjacency(s, l)).collect();
    let zero_pattern = FiltrationResult::from_adjacencies(kept.clone(), zero_graphs)?;
    let threshold = FiltrationResult::from_adjacencies(kept, threshold_graphs)?;
    let partitions_match = zero_pattern
        .partitions
        .iter()
        .zip(&threshold.partitions)
        .map(|(a, b)| a == b)
        .collect();
    Ok(GlassoFiltration {
        zero_pattern,
        threshold,
        partitions_match,
        skipped,
        kkt_residuals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::MatrixKind;
    use nalgebra::DMatrix;

    fn adj(p: usize, edges: &[(usize, usize)]) -> AdjacencyMatrix {
        AdjacencyMatrix::new(p, edges.iter().copied(), 0.0, AdjacencySource::Threshold).unwrap()
    }

    #[test]
    fn empty_graph_is_all_singletons() {
        let part = connected_components(&adj(7, &[]));
        assert_eq!(part.kappa(), 7);
        assert_eq!(part.labels(), &[0, 1, 2, 3, 4, 5, 6]);
    }

    #[test]
    fn path_graph_is_connected() {
        let part = connected_components(&adj(4, &[(2, 3), (0, 1), (1, 2)]));
        assert_eq!(part.kappa(), 1);
        assert_eq!(part.labels(), &[0, 0, 0, 0]);
    }

    #[test]
    fn adjacency_rejects_self_loops_and_range() {
        assert!(AdjacencyMatrix::new(3, [(1, 1)], 0.0, AdjacencySource::Threshold).is_err());
        assert!(AdjacencyMatrix::new(3, [(0, 3)], 0.0, AdjacencySource::Threshold).is_err());
        let a = AdjacencyMatrix::new(3, [(2, 0), (0, 2)], 0.0, AdjacencySource::Threshold).unwrap();
        assert_eq!(a.edge_count(), 1);
        assert!(a.contains(0, 2) && a.contains(2, 0));
    }

    fn sym(p: usize, vals: &[f64]) -> SymmetricMatrix {
        SymmetricMatrix::from_upper(DMatrix::from_row_slice(p, p, vals), MatrixKind::Covariance)
    }

    #[test]
    fn threshold_is_strict() {
        let m = sym(2, &[1.0, 0.5, 0.5, 1.0]);
        assert_eq!(threshold_adjacency(&m, 0.5).edge_count(), 0);
        assert_eq!(threshold_adjacency(&m, 0.4999).edge_count(), 1);
    }

    #[test]
    fn threshold_picks_entries_above_lambda() {
        let m = sym(
            4,
            &[
                1.0, 0.9, 0.1, 0.5, //
                0.9, 1.0, 0.1, 0.1, //
                0.1, 0.1, 1.0, 0.1, //
                0.5, 0.1, 0.1, 1.0,
            ],
        );
        let a = threshold_adjacency(&m, 0.4);
        assert_eq!(a.edges().collect::<Vec<_>>(), vec![(0, 1), (0, 3)]);
    }

    #[test]
    fn cross_rule_symmetrizes() {
        let m = SymmetricMatrix::cross_correlation(DMatrix::from_row_slice(2, 2, &[0.0, 0.6, -0.2, 0.0]));
        assert_eq!(threshold_adjacency_with(&m, 0.3, CrossRule::Max).edge_count(), 1);
        assert_eq!(threshold_adjacency_with(&m, 0.3, CrossRule::Min).edge_count(), 0);
    }

    #[test]
    fn zero_pattern_eps() {
        let m = sym(3, &[1.0, 1e-9, 0.0, 1e-9, 1.0, -0.2, 0.0, -0.2, 1.0]);
        assert_eq!(zero_pattern_adjacency(&m, ZERO_PATTERN_EPS).edges().collect::<Vec<_>>(), vec![(1, 2)]);
        assert_eq!(zero_pattern_adjacency(&m, 0.0).edge_count(), 2);
        assert_eq!(zero_pattern_adjacency(&m, 1.0).edge_count(), 0);
    }

    #[test]
    fn full_then_empty() {
        let m = sym(3, &[1.0, 0.3, -0.6, 0.3, 1.0, 0.2, -0.6, 0.2, 1.0]);
        let grid = LambdaGrid::explicit(vec![0.0, 0.61]).unwrap();
        let f = build_filtration(&m, &grid);
        assert_eq!(f.beta0, vec![1, 3]);
        assert_eq!(f.edge_counts, vec![3, 0]);
    }

    #[test]
    fn diagonal_matrix_stays_disconnected() {
        let m = SymmetricMatrix::identity(5, MatrixKind::Correlation);
        let grid = LambdaGrid::uniform(4, 0.9).unwrap();
        assert_eq!(build_filtration(&m, &grid).beta0, vec![5, 5, 5, 5]);
    }

    #[test]
    fn nestedness_detects_new_edge() {
        let grid = LambdaGrid::explicit(vec![0.1, 0.2, 0.3]).unwrap();
        let graphs = vec![adj(4, &[(0, 1), (2, 3)]), adj(4, &[(0, 1), (1, 2)]), adj(4, &[(0, 1)])];
        let f = FiltrationResult::from_adjacencies(grid, graphs).unwrap();
        let n = verify_nestedness(&f);
        assert!(!n.edge_nested);
        assert_eq!(n.first_edge_violation, Some(1));
        // {0,1},{2,3} then {0,1,2},{3}: node 2 changes block and 3 leaves it.
        assert!(!n.node_nested);
        assert_eq!(n.first_violation, Some(1));

        let grid = LambdaGrid::explicit(vec![0.1, 0.2]).unwrap();
        let graphs = vec![adj(3, &[(0, 1), (1, 2)]), adj(3, &[(0, 2)])];
        let f = FiltrationResult::from_adjacencies(grid, graphs).unwrap();
        let n = verify_nestedness(&f);
        assert!(n.node_nested);
        assert!(!n.edge_nested);
        assert_eq!(n.first_violation, Some(1));
    }

    #[test]
    fn block_permutation_tie_break() {
        let bp = block_permutation(&adj(4, &[(0, 2), (1, 3)]));
        assert_eq!(bp.perm, vec![0, 2, 1, 3]);
        assert_eq!(bp.block_ranges(), vec![(0, 2), (2, 4)]);

        // Bigger block first.
        let bp = block_permutation(&adj(5, &[(0, 4), (1, 2), (2, 3)]));
        assert_eq!(bp.perm, vec![1, 2, 3, 0, 4]);
    }

    #[test]
    fn already_block_ordered_is_identity() {
        let a = adj(5, &[(0, 1), (1, 2), (3, 4)]);
        let bp = block_permutation(&a);
        assert_eq!(bp.perm, vec![0, 1, 2, 3, 4]);
        assert_eq!(bp.apply(&a), a);
    }

    #[test]
    fn partition_from_blocks_validates() {
        assert!(GraphPartition::from_blocks(&[vec![0, 2], vec![1]], 3).is_ok());
        assert!(GraphPartition::from_blocks(&[vec![0, 2]], 3).is_err());
        assert!(GraphPartition::from_blocks(&[vec![0, 2], vec![2, 1]], 3).is_err());
        let p = GraphPartition::from_blocks(&[vec![2, 0], vec![1]], 3).unwrap();
        assert_eq!(p.labels(), &[0, 1, 0]);
        assert_eq!(p.components(), &[vec![0, 2], vec![1]]);
    }

    #[test]
    fn union_find_tracks_min_label() {
        let mut uf = UnionFind::new(6);
        uf.union(5, 4);
        uf.union(4, 3);
        assert_eq!(uf.label(5), 3);
        assert!(!uf.union(3, 5));
        assert_eq!(uf.sets(), 4);
    }
}
