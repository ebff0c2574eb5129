//! Operator merge: stacking convolutions that share an input.
//!
//! Convolutions of the same kind reading the same tensors can be replaced by
//! one wider convolution whose kernels are stacked along the output-channel
//! axis; smaller kernels are zero-padded to the largest kernel size, which
//! increases their compute but lets the shared input be read once. A split
//! operator then carves the stacked output back into the members' channel
//! ranges.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Block, ComputationGraph, Operator, OperatorKind, BYTES_PER_ELEM};
use crate::opset::OpSet;

/// One member's slice of the merged output: channels `[start, end)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelOffset {
    pub id: String,
    pub start: usize,
    pub end: usize,
}

/// The merged operator, its split, and the channel map back to the members.
#[derive(Debug, Clone, PartialEq)]
pub struct MergePlan {
    pub members: OpSet,
    pub merged: Operator,
    pub split: Operator,
    pub channel_offsets: Vec<ChannelOffset>,
}

/// True iff the operators in `s` may be merged: at least two of them, all
/// ConvRelu, reading the identical input-id set with identical strides and
/// input shapes. Kernel sizes may differ.
pub fn can_merge(g: &ComputationGraph, block: &Block, s: OpSet) -> bool {
    if s.len() < 2 {
        return false;
    }
    let first = g.block_op(block, s.min_index().unwrap());
    let reference = input_set(first);
    s.iter().all(|dense| {
        let op = g.block_op(block, dense);
        op.kind == OperatorKind::ConvRelu
            && op.stride == first.stride
            && op.in_shape == first.in_shape
            && input_set(op) == reference
    })
}

fn input_set(op: &Operator) -> Vec<&str> {
    let mut ids: Vec<&str> = op.inputs.iter().map(String::as_str).collect();
    ids.sort_unstable();
    ids.dedup();
    ids
}

/// Construct the merged operator and split for a legal member set.
///
/// The merged kernel is the member maximum in each dimension and every
/// member's flops are scaled by the padding ratio `(KH*KW)/(kh*kw)`, so equal
/// kernel sizes merge with their flops preserved exactly. The shared input is
/// counted once in `bytes_read`; member weights are unpadded (stored zeros
/// are never fetched). The split is pure memory movement over the merged
/// output.
pub fn build_merge(g: &ComputationGraph, block: &Block, s: OpSet) -> Result<MergePlan> {
    if !can_merge(g, block, s) {
        let ids: Vec<&str> = s
            .iter()
            .map(|dense| g.block_op(block, dense).id.as_str())
            .collect();
        return Err(Error::IllegalMerge(format!(
            "operators [{}] cannot be merged",
            ids.join(", ")
        )));
    }
    let members: Vec<&Operator> = s.iter().map(|dense| g.block_op(block, dense)).collect();
    let (max_kh, max_kw) = members.iter().fold((1, 1), |(h, w), op| {
        let (kh, kw) = op.kernel.expect("conv-like member");
        (h.max(kh), w.max(kw))
    });

    let mut offsets = Vec::with_capacity(members.len());
    let mut out_channels = 0;
    let mut flops = 0.0;
    let mut bytes_read = 0.0;
    let mut bytes_written = 0.0;
    for op in &members {
        offsets.push(ChannelOffset {
            id: op.id.clone(),
            start: out_channels,
            end: out_channels + op.out_channels,
        });
        out_channels += op.out_channels;
        let (kh, kw) = op.kernel.expect("conv-like member");
        flops += op.flops * (max_kh * max_kw) as f64 / (kh * kw) as f64;
        bytes_read += op.bytes_read;
        bytes_written += op.bytes_written;
    }
    let shared_input_bytes = BYTES_PER_ELEM * members[0].in_elements();
    bytes_read = (bytes_read - (members.len() - 1) as f64 * shared_input_bytes).max(0.0);

    let ids: Vec<&str> = members.iter().map(|op| op.id.as_str()).collect();
    let merged_id = ids.join("&");
    let merged = Operator {
        id: merged_id.clone(),
        kind: OperatorKind::MergedConv,
        inputs: input_set(members[0]).into_iter().map(String::from).collect(),
        out_channels,
        kernel: Some((max_kh, max_kw)),
        stride: members[0].stride,
        in_shape: members[0].in_shape,
        flops,
        bytes_read,
        bytes_written,
    };
    let split = make_split(&merged);
    Ok(MergePlan {
        members: s,
        merged,
        split,
        channel_offsets: offsets,
    })
}

/// The split operator for a merged convolution: pure memory movement carving
/// the stacked output apart. Deterministic in the merged operator alone, so a
/// schedule document only needs to carry the merged side.
pub fn make_split(merged: &Operator) -> Operator {
    let (oh, ow) = merged.out_spatial();
    Operator {
        id: format!("{}.split", merged.id),
        kind: OperatorKind::Split,
        inputs: vec![merged.id.clone()],
        out_channels: merged.out_channels,
        kernel: None,
        stride: None,
        in_shape: [merged.batch(), merged.out_channels, oh, ow],
        flops: 0.0,
        bytes_read: merged.bytes_written,
        bytes_written: merged.bytes_written,
    }
}
