//! Exact composition of ReLU networks.
//!
//! Constructions here only rearrange and multiply affine maps, so the
//! resulting network computes exactly the composed function (up to floating
//! point). All produced layers are sparse and keep every structurally present
//! entry, including ones whose value happens to be zero.

use super::{FinalActivation, Layer, ReluNet};
use crate::error::{invalid, Result};

/// A depth-1 network `x -> W x + b` given by triplets.
pub fn affine(rows: usize, cols: usize, triplets: Vec<(usize, usize, f64)>, bias: Vec<f64>) -> Result<ReluNet> {
    ReluNet::new(cols, vec![Layer::from_triplets(rows, cols, triplets, bias)?], FinalActivation::Identity)
}

/// Identity on `n` values realized with depth `depth`:
/// `x = relu(x) - relu(-x)` carried through `depth - 1` hidden layers.
pub fn identity_carry(n: usize, depth: usize) -> Result<ReluNet> {
    if n == 0 || depth == 0 {
        return invalid("identity carry needs n >= 1 and depth >= 1");
    }
    if depth == 1 {
        return affine(n, n, (0..n).map(|i| (i, i, 1.0)).collect(), vec![0.0; n]);
    }
    let mut layers = Vec::with_capacity(depth);
    let split: Vec<_> = (0..n).flat_map(|i| [(2 * i, i, 1.0), (2 * i + 1, i, -1.0)]).collect();
    layers.push(Layer::from_triplets(2 * n, n, split, vec![0.0; 2 * n])?);
    for _ in 0..depth - 2 {
        let diag: Vec<_> = (0..2 * n).map(|i| (i, i, 1.0)).collect();
        layers.push(Layer::from_triplets(2 * n, 2 * n, diag, vec![0.0; 2 * n])?);
    }
    let merge: Vec<_> = (0..n).flat_map(|i| [(i, 2 * i, 1.0), (i, 2 * i + 1, -1.0)]).collect();
    layers.push(Layer::from_triplets(n, 2 * n, merge, vec![0.0; n])?);
    ReluNet::new(n, layers, FinalActivation::Identity)
}

/// `outer ∘ inner`: the last affine map of `inner` is multiplied into the
/// first affine map of `outer`, so depth is `depth(inner) + depth(outer) - 1`.
pub fn compose(outer: &ReluNet, inner: &ReluNet) -> Result<ReluNet> {
    if inner.output_dim() != outer.input_dim() {
        return invalid(format!(
            "cannot compose: inner produces {} values, outer expects {}",
            inner.output_dim(),
            outer.input_dim()
        ));
    }
    let in_layers = inner.layers();
    let out_layers = outer.layers();
    let last = &in_layers[in_layers.len() - 1];
    let first = &out_layers[0];

    let mut rows_of_last: Vec<Vec<(usize, f64)>> = vec![Vec::new(); last.rows()];
    last.for_each_entry(|r, c, _, v| rows_of_last[r].push((c, v)));

    let mut triplets = Vec::new();
    let mut bias = first.bias().to_vec();
    first.for_each_entry(|r, k, _, a| {
        for &(c, b) in &rows_of_last[k] {
            triplets.push((r, c, a * b));
        }
        bias[r] += a * last.bias()[k];
    });
    let merged = Layer::from_triplets(first.rows(), last.cols(), triplets, bias)?;

    let mut layers: Vec<Layer> = in_layers[..in_layers.len() - 1].to_vec();
    layers.push(merged);
    layers.extend_from_slice(&out_layers[1..]);
    ReluNet::new(inner.input_dim(), layers, outer.final_activation())
}

/// Runs networks of equal depth side by side. With `shared_input` every
/// network reads the same input vector; otherwise inputs are concatenated.
/// Outputs are concatenated in order.
pub fn parallel(nets: &[ReluNet], shared_input: bool) -> Result<ReluNet> {
    let Some(first) = nets.first() else {
        return invalid("parallel needs at least one network");
    };
    let depth = first.depth();
    if nets.iter().any(|n| n.depth() != depth) {
        return invalid("parallel networks must have equal depth");
    }
    if shared_input && nets.iter().any(|n| n.input_dim() != first.input_dim()) {
        return invalid("networks sharing an input must have equal input dimension");
    }
    let input_dim = if shared_input { first.input_dim() } else { nets.iter().map(ReluNet::input_dim).sum() };

    let mut layers = Vec::with_capacity(depth);
    for li in 0..depth {
        let rows: usize = nets.iter().map(|n| n.layers()[li].rows()).sum();
        let cols = if li == 0 { input_dim } else { nets.iter().map(|n| n.layers()[li].cols()).sum() };
        let mut triplets = Vec::new();
        let mut bias = Vec::with_capacity(rows);
        let (mut row_off, mut col_off) = (0, 0);
        for n in nets {
            let l = &n.layers()[li];
            let co = if li == 0 && shared_input { 0 } else { col_off };
            l.for_each_entry(|r, c, _, v| triplets.push((row_off + r, co + c, v)));
            bias.extend_from_slice(l.bias());
            row_off += l.rows();
            col_off += l.cols();
        }
        layers.push(Layer::from_triplets(rows, cols, triplets, bias)?);
    }
    ReluNet::new(input_dim, layers, FinalActivation::Identity)
}

/// Extends a network to exactly `depth` affine maps by appending an
/// identity carry on its outputs.
pub fn pad_to_depth(net: &ReluNet, depth: usize) -> Result<ReluNet> {
    if depth < net.depth() {
        return invalid(format!("cannot pad a depth-{} network down to {depth}", net.depth()));
    }
    if depth == net.depth() {
        return Ok(net.to_sparse());
    }
    let carry = identity_carry(net.output_dim(), depth - net.depth() + 1)?;
    compose(&carry, net)
}
