//! Structural analysis of a block: DAG width with verifiable certificates,
//! and the closed-form bound on the size of the scheduler's state graph.
//!
//! Width is computed on the transitive closure — the partial order induced
//! by reachability — via minimum path cover (maximum bipartite matching).
//! A path cover of the raw edge relation would overestimate the width.

use num::{BigInt, BigRational, One, ToPrimitive, Zero};

use crate::baseline::count_all;
use crate::graph::{Block, ComputationGraph};
use crate::opset::OpSet;

/// Width of a block together with both Dilworth witnesses: a maximum
/// antichain (no path between any two members) and a minimum chain
/// decomposition (every chain totally ordered by reachability). Their sizes
/// are equal to the width by construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WidthCertificate {
    pub width: usize,
    /// Dense indices of a maximum antichain.
    pub antichain: OpSet,
    /// Operator ids of a minimum chain decomposition, one list per chain,
    /// each in reachability order. The chains partition the block.
    pub chains: Vec<Vec<String>>,
}

/// Strict-descendant sets (transitive closure) over dense indices.
fn closure(block: &Block) -> Vec<OpSet> {
    let n = block.len();
    let mut reach = vec![OpSet::EMPTY; n];
    let order = block.topo_sort_set(block.all_ops());
    for &i in order.iter().rev() {
        let mut r = OpSet::EMPTY;
        for j in block.succs(i).iter() {
            r = r.union(reach[j]).union(OpSet::singleton(j));
        }
        reach[i] = r;
    }
    reach
}

fn try_augment(
    i: usize,
    reach: &[OpSet],
    match_r: &mut [Option<usize>],
    visited: &mut OpSet,
) -> bool {
    for j in reach[i].iter() {
        if visited.contains(j) {
            continue;
        }
        visited.insert(j);
        let free = match match_r[j] {
            None => true,
            Some(owner) => try_augment(owner, reach, match_r, visited),
        };
        if free {
            match_r[j] = Some(i);
            return true;
        }
    }
    false
}

/// Compute the block's width with witnesses.
///
/// The split bipartite graph has a left and a right copy of every operator
/// and an edge `(u_L, v_R)` whenever `v` is reachable from `u`. A maximum
/// matching there yields width `n - |matching|`; following matched edges
/// gives the chain decomposition, and the König cover taken from the
/// unmatched right-hand vertices gives an antichain made of minimal
/// elements.
pub fn graph_width(g: &ComputationGraph, block: &Block) -> WidthCertificate {
    let n = block.len();
    if n == 0 {
        return WidthCertificate {
            width: 0,
            antichain: OpSet::EMPTY,
            chains: vec![],
        };
    }
    let reach = closure(block);
    let mut match_r: Vec<Option<usize>> = vec![None; n];
    let mut matching = 0usize;
    for i in 0..n {
        let mut visited = OpSet::EMPTY;
        if try_augment(i, &reach, &mut match_r, &mut visited) {
            matching += 1;
        }
    }
    let mut match_l: Vec<Option<usize>> = vec![None; n];
    for (j, owner) in match_r.iter().enumerate() {
        if let Some(i) = owner {
            match_l[*i] = Some(j);
        }
    }
    let width = n - matching;

    // Chains start at operators nothing chains into (unmatched rights).
    let mut chains = Vec::new();
    for head in 0..n {
        if match_r[head].is_some() {
            continue;
        }
        let mut chain = Vec::new();
        let mut cur = Some(head);
        while let Some(i) = cur {
            chain.push(g.block_op(block, i).id.clone());
            cur = match_l[i];
        }
        chains.push(chain);
    }

    // Alternating reachability from unmatched rights: cross non-matching
    // edges right-to-left, matching edges left-to-right.
    let mut zl = OpSet::EMPTY;
    let mut zr = OpSet::EMPTY;
    let mut stack: Vec<usize> = (0..n).filter(|&j| match_r[j].is_none()).collect();
    for &j in &stack {
        zr.insert(j);
    }
    while let Some(j) = stack.pop() {
        for i in 0..n {
            if !reach[i].contains(j) || match_l[i] == Some(j) || zl.contains(i) {
                continue;
            }
            zl.insert(i);
            if let Some(j2) = match_l[i] {
                if !zr.contains(j2) {
                    zr.insert(j2);
                    stack.push(j2);
                }
            }
        }
    }
    let antichain = zr.minus(zl);
    debug_assert_eq!(antichain.len(), width);
    debug_assert_eq!(chains.len(), width);

    WidthCertificate {
        width,
        antichain,
        chains,
    }
}

/// The closed-form state-graph size bound together with its compact
/// two-significant-figure rendering.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexityBound {
    pub exact: BigRational,
    /// e.g. `"2.6e4"`.
    pub rendered: String,
}

/// Bound on the number of (state, ending) pairs the scheduler can touch in
/// a block of `n` operators and width `d`:
/// `((n/d + 2)(n/d + 1) / 2) ^ d`, evaluated exactly.
///
/// Every DP state is downward closed, so it meets each chain of a minimum
/// chain decomposition in a prefix; a (state, ending) pair is a pair of
/// nested prefixes per chain, and the per-chain pair count is maximized
/// when the `n` operators spread evenly over the `d` chains.
pub fn complexity_bound(n: usize, d: usize) -> ComplexityBound {
    let exact = if d == 0 {
        BigRational::one()
    } else {
        let int = |v: usize| BigRational::from_integer(BigInt::from(v));
        let x = BigRational::new(BigInt::from(n), BigInt::from(d));
        let base = (&x + int(2)) * (&x + int(1)) / int(2);
        num::pow::pow(base, d)
    };
    let rendered = render_two_sig(&exact);
    ComplexityBound { exact, rendered }
}

fn render_two_sig(v: &BigRational) -> String {
    if v.is_zero() {
        return "0.0e0".to_string();
    }
    if let Some(f) = v.to_f64() {
        if f.is_finite() && f > 0.0 {
            return render_f64_two_sig(f);
        }
    }
    // Out of f64 range: the value is a huge positive number, so two
    // significant figures come from the leading decimal digits of its
    // integer part.
    let digits = v.to_integer().to_string();
    let exp = digits.len() as i32 - 1;
    let mut lead: u32 = digits
        .bytes()
        .chain(std::iter::repeat(b'0'))
        .take(3)
        .fold(0u32, |acc, b| acc * 10 + u32::from(b - b'0'));
    lead = (lead + 5) / 10; // round the third digit away
    finish_two_sig(f64::from(lead), exp)
}

fn render_f64_two_sig(v: f64) -> String {
    let exp = v.log10().floor() as i32;
    let mantissa = v / 10f64.powi(exp);
    finish_two_sig((mantissa * 10.0).round(), exp)
}

/// `scaled` is the mantissa times ten, in `[10, 100]`; carry on overflow.
fn finish_two_sig(mut scaled: f64, mut exp: i32) -> String {
    if scaled >= 100.0 {
        scaled /= 10.0;
        exp += 1;
    }
    format!("{:.1}e{}", scaled / 10.0, exp)
}

/// Outcome of checking a block's transition count against the bound.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub n: usize,
    pub width: usize,
    /// Unpruned (state, ending) transitions actually enumerated.
    pub transitions: u64,
    pub bound: ComplexityBound,
    /// `transitions / bound`, as a float.
    pub ratio: f64,
}

/// Count the block's unpruned transitions and certify they respect
/// [`complexity_bound`].
///
/// # Panics
/// If the count exceeds the bound — the bound is proved, so that would be
/// an implementation bug, not an input error.
pub fn bound_check(g: &ComputationGraph, block: &Block) -> BoundReport {
    let cert = graph_width(g, block);
    let counts = count_all(g, block, None);
    let bound = complexity_bound(block.len(), cert.width);
    let transitions = BigRational::from_integer(BigInt::from(counts.transitions));
    assert!(
        transitions <= bound.exact,
        "transition count {} exceeds proved bound {} on {}",
        counts.transitions,
        bound.rendered,
        g.name,
    );
    let ratio = counts.transitions as f64 / bound.exact.to_f64().unwrap_or(f64::INFINITY);
    BoundReport {
        n: block.len(),
        width: cert.width,
        transitions: counts.transitions,
        bound,
        ratio,
    }
}
