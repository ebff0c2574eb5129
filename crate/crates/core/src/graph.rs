//! Computation-graph intermediate representation.
//!
//! A network is a DAG of typed operators partitioned into an ordered list of
//! blocks. Blocks are scheduled independently and executed back to back, so
//! validation rejects any edge that points from a later block to an earlier
//! one. Within a block, operators are addressed by *dense index* — the rank
//! of their id in the ascending sort of the block's ids — which is what makes
//! an [`OpSet`] bitmask meaningful.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::opset::OpSet;

/// Hard cap on operators per block: one machine word of DP state.
pub const MAX_BLOCK_OPS: usize = 64;

/// Bytes per tensor element assumed by the derived-cost formulas (fp32).
pub const BYTES_PER_ELEM: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OperatorKind {
    ConvRelu,
    ReluSepConv,
    Pool,
    Matmul,
    Concat,
    Add,
    Identity,
    MergedConv,
    Split,
}

impl OperatorKind {
    /// Kinds that carry kernel and stride fields.
    pub fn is_conv_like(self) -> bool {
        matches!(
            self,
            OperatorKind::ConvRelu | OperatorKind::ReluSepConv | OperatorKind::MergedConv
        )
    }

    /// Kinds that only the merging pass may construct.
    pub fn is_synthetic(self) -> bool {
        matches!(self, OperatorKind::MergedConv | OperatorKind::Split)
    }
}

/// A declared network input tensor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphInput {
    pub id: String,
    /// `[batch, channels, height, width]`.
    pub shape: [usize; 4],
}

/// One node of the computation graph.
///
/// `flops`, `bytes_read` and `bytes_written` are always resolved after
/// parsing: explicit JSON values win, otherwise they are derived from the
/// shape fields by the standard formulas in [`derive_costs`].
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    pub id: String,
    pub kind: OperatorKind,
    /// Producer ids: other operators or declared graph inputs.
    pub inputs: Vec<String>,
    pub out_channels: usize,
    /// `(height, width)`; present exactly for conv-like kinds.
    pub kernel: Option<(usize, usize)>,
    /// `(height, width)`; present exactly for conv-like kinds.
    pub stride: Option<(usize, usize)>,
    /// `[batch, in_channels, in_height, in_width]`.
    pub in_shape: [usize; 4],
    pub flops: f64,
    pub bytes_read: f64,
    pub bytes_written: f64,
}

impl Operator {
    pub fn batch(&self) -> usize {
        self.in_shape[0]
    }

    pub fn in_channels(&self) -> usize {
        self.in_shape[1]
    }

    pub fn in_height(&self) -> usize {
        self.in_shape[2]
    }

    pub fn in_width(&self) -> usize {
        self.in_shape[3]
    }

    /// Output spatial size: ceil(in / stride) for conv-like kinds (same
    /// padding), unchanged otherwise.
    pub fn out_spatial(&self) -> (usize, usize) {
        match self.stride {
            Some((sh, sw)) => (
                (self.in_height() + sh - 1) / sh,
                (self.in_width() + sw - 1) / sw,
            ),
            None => (self.in_height(), self.in_width()),
        }
    }

    /// Number of elements in the input tensor described by `in_shape`.
    pub fn in_elements(&self) -> f64 {
        self.in_shape.iter().product::<usize>() as f64
    }

    /// Number of elements in the output tensor.
    pub fn out_elements(&self) -> f64 {
        let (oh, ow) = self.out_spatial();
        (self.batch() * self.out_channels * oh * ow) as f64
    }
}

/// Derived `(flops, bytes_read, bytes_written)` for an operator whose JSON
/// omitted them.
///
/// Conv: `2 * batch * out_h * out_w * out_c * in_c * k_h * k_w` flops plus a
/// weight read of `out_c * in_c * k_h * k_w` elements. Separable conv:
/// depthwise then pointwise. Matmul treats spatial positions as rows. The
/// data-movement kinds (Pool, Concat, Add, Identity, Split) carry zero flops
/// and pure tensor traffic; Add reads each of its same-shaped inputs, Concat
/// declares its aggregate input as `in_shape` and reads it once.
pub fn derive_costs(
    kind: OperatorKind,
    inputs: usize,
    out_channels: usize,
    kernel: Option<(usize, usize)>,
    stride: Option<(usize, usize)>,
    in_shape: [usize; 4],
) -> (f64, f64, f64) {
    let [b, ic, ih, iw] = in_shape;
    let (oh, ow) = match stride {
        Some((sh, sw)) => ((ih + sh - 1) / sh, (iw + sw - 1) / sw),
        None => (ih, iw),
    };
    let in_elems = (b * ic * ih * iw) as f64;
    let out_elems = (b * out_channels * oh * ow) as f64;
    let spatial = (b * oh * ow) as f64;
    let (kh, kw) = kernel.unwrap_or((1, 1));
    let (flops, weight_elems, read_mult) = match kind {
        OperatorKind::ConvRelu | OperatorKind::MergedConv => (
            2.0 * spatial * (out_channels * ic * kh * kw) as f64,
            (out_channels * ic * kh * kw) as f64,
            1.0,
        ),
        OperatorKind::ReluSepConv => (
            2.0 * spatial * (ic * (kh * kw + out_channels)) as f64,
            (ic * (kh * kw + out_channels)) as f64,
            1.0,
        ),
        OperatorKind::Matmul => (
            2.0 * spatial * (ic * out_channels) as f64,
            (ic * out_channels) as f64,
            1.0,
        ),
        OperatorKind::Add => (0.0, 0.0, inputs.max(1) as f64),
        OperatorKind::Pool
        | OperatorKind::Concat
        | OperatorKind::Identity
        | OperatorKind::Split => (0.0, 0.0, 1.0),
    };
    let bytes_read = BYTES_PER_ELEM * (in_elems * read_mult + weight_elems);
    let bytes_written = BYTES_PER_ELEM * out_elems;
    (flops, bytes_read, bytes_written)
}

/// A contiguous group of operators scheduled as one unit.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub index: usize,
    /// Member ids in declared order.
    pub op_ids: Vec<String>,
    /// Graph operator indices in dense order (ascending id).
    members: Vec<usize>,
    /// Per dense index: direct successors inside this block.
    succ: Vec<OpSet>,
    /// Per dense index: direct predecessors inside this block.
    pred: Vec<OpSet>,
}

impl Block {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// The set of all operators in this block.
    pub fn all_ops(&self) -> OpSet {
        OpSet::full(self.len())
    }

    /// Graph operator index for a dense index.
    pub fn member(&self, dense: usize) -> usize {
        self.members[dense]
    }

    pub fn succs(&self, dense: usize) -> OpSet {
        self.succ[dense]
    }

    pub fn preds(&self, dense: usize) -> OpSet {
        self.pred[dense]
    }

    /// Members of `s` in topological order, ties broken by ascending dense
    /// index (i.e. ascending id). Edges leaving `s` are ignored.
    pub fn topo_sort_set(&self, s: OpSet) -> Vec<usize> {
        let mut order = Vec::with_capacity(s.len());
        let mut ready = OpSet::EMPTY;
        for i in s.iter() {
            if !self.pred[i].intersects(s) {
                ready.insert(i);
            }
        }
        let mut done = OpSet::EMPTY;
        while let Some(i) = ready.min_index() {
            ready.remove(i);
            done.insert(i);
            order.push(i);
            for j in self.succ[i].intersect(s).iter() {
                if self.pred[j].intersect(s).is_subset_of(done) && !done.contains(j) {
                    ready.insert(j);
                }
            }
        }
        debug_assert_eq!(order.len(), s.len());
        order
    }
}

/// A validated computation graph.
#[derive(Debug, Clone, PartialEq)]
pub struct ComputationGraph {
    pub name: String,
    pub inputs: Vec<GraphInput>,
    /// Operators in declared order.
    pub operators: Vec<Operator>,
    pub blocks: Vec<Block>,
    /// Operator-to-operator edges as (src, dst) operator indices, deduplicated.
    pub edges: Vec<(usize, usize)>,
    index: BTreeMap<String, usize>,
}

// ---------------------------------------------------------------------------
// JSON schema (raw layer)

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGraph {
    name: String,
    inputs: Vec<GraphInput>,
    blocks: Vec<Vec<String>>,
    operators: Vec<RawOperator>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOperator {
    id: String,
    kind: OperatorKind,
    inputs: Vec<String>,
    out_channels: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    kernel: Option<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    stride: Option<[usize; 2]>,
    in_shape: [usize; 4],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    flops: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bytes_read: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bytes_written: Option<f64>,
}

impl RawOperator {
    /// Fill in any omitted cost fields from the shape formulas.
    fn resolve(self) -> Operator {
        let kernel = self.kernel.map(|[h, w]| (h, w));
        let stride = self.stride.map(|[h, w]| (h, w));
        let (dflops, dread, dwritten) = derive_costs(
            self.kind,
            self.inputs.len(),
            self.out_channels,
            kernel,
            stride,
            self.in_shape,
        );
        Operator {
            id: self.id,
            kind: self.kind,
            inputs: self.inputs,
            out_channels: self.out_channels,
            kernel,
            stride,
            in_shape: self.in_shape,
            flops: self.flops.unwrap_or(dflops),
            bytes_read: self.bytes_read.unwrap_or(dread),
            bytes_written: self.bytes_written.unwrap_or(dwritten),
        }
    }
}

impl Operator {
    fn to_raw(&self) -> RawOperator {
        RawOperator {
            id: self.id.clone(),
            kind: self.kind,
            inputs: self.inputs.clone(),
            out_channels: self.out_channels,
            kernel: self.kernel.map(|(h, w)| [h, w]),
            stride: self.stride.map(|(h, w)| [h, w]),
            in_shape: self.in_shape,
            flops: Some(self.flops),
            bytes_read: Some(self.bytes_read),
            bytes_written: Some(self.bytes_written),
        }
    }
}

// Operators serialize through the same schema the graph document uses, with
// resolved cost fields written out. Used by the schedule JSON, which embeds
// merged operators.
impl Serialize for Operator {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_raw().serialize(ser)
    }
}

impl<'de> Deserialize<'de> for Operator {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        Ok(RawOperator::deserialize(de)?.resolve())
    }
}

fn check_cost_field(op: &str, field: &str, v: Option<f64>) -> Result<()> {
    if let Some(x) = v {
        if !x.is_finite() || x < 0.0 {
            return Err(Error::Schema(format!(
                "operator '{op}': {field} must be finite and non-negative, got {x}"
            )));
        }
    }
    Ok(())
}

impl ComputationGraph {
    /// Parse and validate a graph from its JSON document.
    pub fn parse(text: &str) -> Result<ComputationGraph> {
        let raw: RawGraph =
            serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        Self::from_raw(raw)
    }

    fn from_raw(raw: RawGraph) -> Result<ComputationGraph> {
        // Id tables. Duplicates anywhere in the namespace are schema errors.
        let mut input_ids = BTreeSet::new();
        for inp in &raw.inputs {
            if inp.shape.iter().any(|&d| d == 0) {
                return Err(Error::Schema(format!(
                    "input '{}': shape dimensions must be positive",
                    inp.id
                )));
            }
            if !input_ids.insert(inp.id.clone()) {
                return Err(Error::Schema(format!("duplicate input id '{}'", inp.id)));
            }
        }
        let mut index = BTreeMap::new();
        for (i, op) in raw.operators.iter().enumerate() {
            if input_ids.contains(&op.id) {
                return Err(Error::Schema(format!(
                    "operator id '{}' collides with a graph input",
                    op.id
                )));
            }
            if index.insert(op.id.clone(), i).is_some() {
                return Err(Error::Schema(format!("duplicate operator id '{}'", op.id)));
            }
        }

        // Per-operator field validation.
        for op in &raw.operators {
            if op.kind.is_synthetic() {
                return Err(Error::Schema(format!(
                    "operator '{}': kind {:?} cannot appear in an input graph",
                    op.id, op.kind
                )));
            }
            if op.kind.is_conv_like() {
                if op.kernel.is_none() || op.stride.is_none() {
                    return Err(Error::Schema(format!(
                        "operator '{}': conv-like kind requires kernel and stride",
                        op.id
                    )));
                }
            } else if op.kernel.is_some() || op.stride.is_some() {
                return Err(Error::Schema(format!(
                    "operator '{}': kernel/stride not allowed for kind {:?}",
                    op.id, op.kind
                )));
            }
            if op.out_channels == 0 {
                return Err(Error::Schema(format!(
                    "operator '{}': out_channels must be positive",
                    op.id
                )));
            }
            if op.in_shape.iter().any(|&d| d == 0) {
                return Err(Error::Schema(format!(
                    "operator '{}': in_shape dimensions must be positive",
                    op.id
                )));
            }
            for (k, v) in [("kernel", op.kernel), ("stride", op.stride)] {
                if let Some(dims) = v {
                    if dims.iter().any(|&d| d == 0) {
                        return Err(Error::Schema(format!(
                            "operator '{}': {k} dimensions must be positive",
                            op.id
                        )));
                    }
                }
            }
            check_cost_field(&op.id, "flops", op.flops)?;
            check_cost_field(&op.id, "bytes_read", op.bytes_read)?;
            check_cost_field(&op.id, "bytes_written", op.bytes_written)?;
            for input in &op.inputs {
                if !input_ids.contains(input) && !index.contains_key(input) {
                    return Err(Error::DanglingRef(format!(
                        "operator '{}' reads unknown id '{}'",
                        op.id, input
                    )));
                }
            }
        }

        // Cost resolution.
        let operators: Vec<Operator> = raw.operators.into_iter().map(RawOperator::resolve).collect();

        // Edge relation, derived from operator inputs.
        let mut edge_set = BTreeSet::new();
        for (dst, op) in operators.iter().enumerate() {
            for input in &op.inputs {
                if let Some(&src) = index.get(input) {
                    edge_set.insert((src, dst));
                }
            }
        }
        let edges: Vec<(usize, usize)> = edge_set.into_iter().collect();

        // Block membership: every operator in exactly one block, cap 64.
        let mut block_of = vec![usize::MAX; operators.len()];
        for (bi, ids) in raw.blocks.iter().enumerate() {
            if ids.len() > MAX_BLOCK_OPS {
                return Err(Error::Block(format!(
                    "block {bi} has {} operators, cap is {MAX_BLOCK_OPS}",
                    ids.len()
                )));
            }
            for id in ids {
                let &oi = index
                    .get(id)
                    .ok_or_else(|| Error::DanglingRef(format!("block {bi} lists unknown id '{id}'")))?;
                if block_of[oi] != usize::MAX {
                    return Err(Error::Block(format!(
                        "operator '{id}' appears in blocks {} and {bi}",
                        block_of[oi]
                    )));
                }
                block_of[oi] = bi;
            }
        }
        if let Some(oi) = block_of.iter().position(|&b| b == usize::MAX) {
            return Err(Error::Block(format!(
                "operator '{}' belongs to no block",
                operators[oi].id
            )));
        }
        for &(src, dst) in &edges {
            if block_of[src] > block_of[dst] {
                return Err(Error::Block(format!(
                    "edge {} -> {} goes from block {} back to block {}",
                    operators[src].id, operators[dst].id, block_of[src], block_of[dst]
                )));
            }
        }

        // Acyclicity over the whole edge relation (Kahn).
        let n = operators.len();
        let mut indegree = vec![0usize; n];
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
        for &(src, dst) in &edges {
            indegree[dst] += 1;
            adj[src].push(dst);
        }
        let mut queue: Vec<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
        let mut seen = 0;
        while let Some(i) = queue.pop() {
            seen += 1;
            for &j in &adj[i] {
                indegree[j] -= 1;
                if indegree[j] == 0 {
                    queue.push(j);
                }
            }
        }
        if seen != n {
            return Err(Error::Cycle(
                "operator dependency relation contains a cycle".into(),
            ));
        }

        // Dense per-block structure.
        let mut blocks = Vec::with_capacity(raw.blocks.len());
        for (bi, ids) in raw.blocks.iter().enumerate() {
            let mut members: Vec<usize> = ids.iter().map(|id| index[id]).collect();
            members.sort_by(|&a, &b| operators[a].id.cmp(&operators[b].id));
            let dense_of: BTreeMap<usize, usize> =
                members.iter().enumerate().map(|(d, &oi)| (oi, d)).collect();
            let mut succ = vec![OpSet::EMPTY; members.len()];
            let mut pred = vec![OpSet::EMPTY; members.len()];
            for &(src, dst) in &edges {
                if let (Some(&ds), Some(&dd)) = (dense_of.get(&src), dense_of.get(&dst)) {
                    succ[ds].insert(dd);
                    pred[dd].insert(ds);
                }
            }
            blocks.push(Block {
                index: bi,
                op_ids: ids.clone(),
                members,
                succ,
                pred,
            });
        }

        Ok(ComputationGraph {
            name: raw.name,
            inputs: raw.inputs,
            operators,
            blocks,
            edges,
            index,
        })
    }

    /// Serialize back to the JSON document form. Resolved flops/bytes are
    /// written out explicitly, so `parse(to_json(g)) == g`.
    pub fn to_json(&self) -> String {
        let raw = RawGraph {
            name: self.name.clone(),
            inputs: self.inputs.clone(),
            blocks: self.blocks.iter().map(|b| b.op_ids.clone()).collect(),
            operators: self.operators.iter().map(Operator::to_raw).collect(),
        };
        let mut text = serde_json::to_string_pretty(&raw).expect("graph serialization");
        text.push('\n');
        text
    }

    pub fn op_index(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn op(&self, id: &str) -> Option<&Operator> {
        self.op_index(id).map(|i| &self.operators[i])
    }

    /// Operator for a block-dense index.
    pub fn block_op(&self, block: &Block, dense: usize) -> &Operator {
        &self.operators[block.member(dense)]
    }

    /// Dense index of `id` in `block`, if it is a member.
    pub fn dense_index(&self, block: &Block, id: &str) -> Option<usize> {
        let oi = self.op_index(id)?;
        (0..block.len()).find(|&d| block.member(d) == oi)
    }

    /// Direct successors of `op_id` that lie in the same block.
    ///
    /// Panics if `op_id` is not a member of `block`.
    pub fn successors_within(&self, block: &Block, op_id: &str) -> OpSet {
        let dense = self
            .dense_index(block, op_id)
            .expect("operator must belong to the block");
        block.succs(dense)
    }

    /// Connected components of the subgraph induced by `s`, under the
    /// undirected view of edges. Components are returned ordered by their
    /// smallest dense index.
    pub fn connected_groups(&self, block: &Block, s: OpSet) -> Vec<OpSet> {
        connected_groups_masks(
            s,
            |i| block.succs(i).union(block.preds(i)),
        )
    }

    /// Topological order of all operator ids, ties broken by ascending id.
    pub fn topological_order(&self) -> Vec<String> {
        let n = self.operators.len();
        let mut indegree = vec![0usize; n];
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
        for &(src, dst) in &self.edges {
            indegree[dst] += 1;
            adj[src].push(dst);
        }
        // Min-heap on id keeps the order deterministic.
        let mut ready: BTreeSet<(&str, usize)> = (0..n)
            .filter(|&i| indegree[i] == 0)
            .map(|i| (self.operators[i].id.as_str(), i))
            .collect();
        let mut order = Vec::with_capacity(n);
        while let Some(&(id, i)) = ready.iter().next() {
            ready.remove(&(id, i));
            order.push(id.to_string());
            for &j in &adj[i] {
                indegree[j] -= 1;
                if indegree[j] == 0 {
                    ready.insert((self.operators[j].id.as_str(), j));
                }
            }
        }
        order
    }
}

/// Component search shared with callers that have their own adjacency view.
pub(crate) fn connected_groups_masks<F: Fn(usize) -> OpSet>(s: OpSet, neighbors: F) -> Vec<OpSet> {
    let mut groups = Vec::new();
    let mut remaining = s;
    while let Some(seed) = remaining.min_index() {
        let mut comp = OpSet::singleton(seed);
        let mut frontier = comp;
        while !frontier.is_empty() {
            let mut next = OpSet::EMPTY;
            for i in frontier.iter() {
                next = next.union(neighbors(i).intersect(s).minus(comp));
            }
            comp = comp.union(next);
            frontier = next;
        }
        groups.push(comp);
        remaining = remaining.minus(comp);
    }
    groups
}
