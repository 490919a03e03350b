//! Sum-factorized evaluation and integration on the reference cell `[0,1]^d`.
//!
//! Tensors are stored lexicographically with axis 0 running fastest. Every
//! multi-dimensional sweep is a sequence of 1D contractions, one axis at a
//! time; each contraction reports its multiply-add count so kernels can
//! keep deterministic operation counters.

use super::shape::ShapeMatrices1D;

pub const MAX_DIM: usize = 3;

/// Tree key for the "no derivative taken yet" path.
const VALUE: usize = usize::MAX;
/// Tree key for the face-normal derivative path.
const NORMAL: usize = usize::MAX - 1;
/// Slot marker for "read from the caller's input slice".
const INPUT: usize = usize::MAX;

/// A 1D operator `out[o] = Σ_i M(o, i) in[i]` backed by a row-major matrix.
#[derive(Clone, Copy)]
pub(crate) struct Op1D<'a> {
    data: &'a [f64],
    n_out: usize,
    n_in: usize,
    transpose: bool,
}

impl<'a> Op1D<'a> {
    /// Uses `data` (rows × cols) as is: maps `cols` inputs to `rows` outputs.
    pub(crate) fn forward(data: &'a [f64], rows: usize, cols: usize) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Self {
            data,
            n_out: rows,
            n_in: cols,
            transpose: false,
        }
    }

    /// Uses the transpose of `data` (rows × cols): maps `rows` inputs to `cols` outputs.
    pub(crate) fn transposed(data: &'a [f64], rows: usize, cols: usize) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Self {
            data,
            n_out: cols,
            n_in: rows,
            transpose: true,
        }
    }

    #[inline(always)]
    fn entry(&self, o: usize, i: usize) -> f64 {
        if self.transpose {
            self.data[i * self.n_out + o]
        } else {
            self.data[o * self.n_in + i]
        }
    }
}

/// Contracts `input` (shape `shape`) along `axis` with `op`. The output has
/// the same shape except `shape[axis]` becomes `op.n_out`.
pub(crate) fn apply_1d(
    op: Op1D<'_>,
    shape: &[usize],
    axis: usize,
    input: &[f64],
    output: &mut [f64],
    accumulate: bool,
) -> u64 {
    debug_assert_eq!(shape[axis], op.n_in);
    let stride: usize = shape[..axis].iter().product();
    let outer: usize = shape[axis + 1..].iter().product();
    let (n_in, n_out) = (op.n_in, op.n_out);
    debug_assert!(input.len() >= stride * n_in * outer);
    debug_assert!(output.len() >= stride * n_out * outer);
    for o in 0..outer {
        let in_block = &input[o * n_in * stride..(o + 1) * n_in * stride];
        let out_block = &mut output[o * n_out * stride..(o + 1) * n_out * stride];
        if stride == 1 {
            for (r, out) in out_block.iter_mut().enumerate() {
                let mut acc = if accumulate { *out } else { 0.0 };
                for (c, &x) in in_block.iter().enumerate() {
                    acc += op.entry(r, c) * x;
                }
                *out = acc;
            }
        } else {
            for r in 0..n_out {
                let out_row = &mut out_block[r * stride..(r + 1) * stride];
                if !accumulate {
                    out_row.fill(0.0);
                }
                for c in 0..n_in {
                    let coef = op.entry(r, c);
                    let in_row = &in_block[c * stride..(c + 1) * stride];
                    for (y, &x) in out_row.iter_mut().zip(in_row) {
                        *y += coef * x;
                    }
                }
            }
        }
    }
    (outer * stride * n_out * n_in) as u64
}

/// Reusable scratch space for the sweeps; one per worker thread.
#[derive(Debug, Default, Clone)]
pub struct Workspace {
    levels: [Vec<Vec<f64>>; 2],
    pub(crate) face_value: Vec<f64>,
    pub(crate) face_normal: Vec<f64>,
    pub(crate) point_tables: Vec<Vec<f64>>,
}

impl Workspace {
    pub fn new() -> Self {
        Self::default()
    }

    fn prepare(&mut self, slots: usize, len: usize) {
        for level in &mut self.levels {
            if level.len() < slots {
                level.resize_with(slots, Vec::new);
            }
            for buf in level.iter_mut() {
                if buf.len() < len {
                    buf.resize(len, 0.0);
                }
            }
        }
    }
}

fn source<'a>(slot: usize, input: &'a [f64], pool: &'a [Vec<f64>]) -> &'a [f64] {
    if slot == INPUT {
        input
    } else {
        &pool[slot]
    }
}

/// Values and/or reference gradients of a cell tensor at all tensor
/// quadrature points. `gradients` is component-major
/// (`gradients[k * n_q + q]`).
#[allow(clippy::too_many_arguments)]
pub(crate) fn evaluate_cell_raw(
    sm: &ShapeMatrices1D,
    dim: usize,
    coeffs: &[f64],
    want_values: bool,
    want_gradients: bool,
    values: &mut [f64],
    gradients: &mut [f64],
    ws: &mut Workspace,
) -> u64 {
    let (nd, nq) = (sm.n_dofs(), sm.n_points());
    let max_len = nd.max(nq).pow(dim as u32);
    ws.prepare(dim + 1, max_len);
    let mut pools = std::mem::take(&mut ws.levels);
    let n_val = sm.values();
    let n_der = sm.derivatives();

    let mut ops = 0;
    let mut shape = [nd; MAX_DIM];
    let mut entries = [(VALUE, INPUT); MAX_DIM + 1];
    let mut n_entries = 1;
    for axis in 0..dim {
        let last = axis + 1 == dim;
        let (cur_pool, next_pool) = split_levels(&mut pools, axis);
        let mut next = [(VALUE, INPUT); MAX_DIM + 1];
        let mut n_next = 0;
        for &(key, slot) in &entries[..n_entries] {
            let src = source(slot, coeffs, cur_pool);
            let keep_value_path = !(key == VALUE && last && !want_values);
            if keep_value_path {
                ops += apply_1d(
                    Op1D::forward(n_val, nq, nd),
                    &shape[..dim],
                    axis,
                    src,
                    &mut next_pool[n_next],
                    false,
                );
                next[n_next] = (key, n_next);
                n_next += 1;
            }
            if key == VALUE && want_gradients {
                ops += apply_1d(
                    Op1D::forward(n_der, nq, nd),
                    &shape[..dim],
                    axis,
                    src,
                    &mut next_pool[n_next],
                    false,
                );
                next[n_next] = (axis, n_next);
                n_next += 1;
            }
        }
        shape[axis] = nq;
        entries = next;
        n_entries = n_next;
    }
    let n_points = nq.pow(dim as u32);
    let final_pool = &pools[dim % 2];
    for &(key, slot) in &entries[..n_entries] {
        let src = &final_pool[slot][..n_points];
        if key == VALUE {
            values[..n_points].copy_from_slice(src);
        } else {
            gradients[key * n_points..(key + 1) * n_points].copy_from_slice(src);
        }
    }
    ws.levels = pools;
    ops
}

fn split_levels(pools: &mut [Vec<Vec<f64>>; 2], step: usize) -> (&[Vec<f64>], &mut [Vec<f64>]) {
    let (a, b) = pools.split_at_mut(1);
    if step % 2 == 0 {
        (&a[0], &mut b[0])
    } else {
        (&b[0], &mut a[0])
    }
}

/// Transposed sweep: `out_i (+)= Σ_q ψ_i(x_q) V_q + Σ_q Σ_k ∂_kψ_i(x_q) G_{k,q}`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn integrate_cell_raw(
    sm: &ShapeMatrices1D,
    dim: usize,
    values: Option<&[f64]>,
    gradients: Option<&[f64]>,
    out: &mut [f64],
    accumulate: bool,
    ws: &mut Workspace,
) -> u64 {
    let (nd, nq) = (sm.n_dofs(), sm.n_points());
    let n_points = nq.pow(dim as u32);
    let n_dofs = nd.pow(dim as u32);
    if values.is_none() && gradients.is_none() {
        if !accumulate {
            out[..n_dofs].fill(0.0);
        }
        return 0;
    }
    let max_len = nd.max(nq).pow(dim as u32);
    ws.prepare(dim + 1, max_len);
    let mut pools = std::mem::take(&mut ws.levels);

    // Seed the first level with copies of the integrands so every path
    // reads from the pool.
    let mut entries = [(VALUE, 0usize); MAX_DIM + 1];
    let mut n_entries = 0;
    {
        let first = &mut pools[0];
        if let Some(v) = values {
            first[n_entries][..n_points].copy_from_slice(&v[..n_points]);
            entries[n_entries] = (VALUE, n_entries);
            n_entries += 1;
        }
        if let Some(g) = gradients {
            for k in 0..dim {
                first[n_entries][..n_points].copy_from_slice(&g[k * n_points..(k + 1) * n_points]);
                entries[n_entries] = (k, n_entries);
                n_entries += 1;
            }
        }
    }

    let n_val = sm.values();
    let n_der = sm.derivatives();
    let mut ops = 0;
    let mut shape = [nq; MAX_DIM];
    for (step, axis) in (0..dim).rev().enumerate() {
        let (cur_pool, next_pool) = split_levels(&mut pools, step);
        let mut next = [(VALUE, 0usize); MAX_DIM + 1];
        let mut n_next = 0;
        for &(key, slot) in &entries[..n_entries] {
            let (target, matrix) = if key == axis {
                (VALUE, n_der)
            } else {
                (key, n_val)
            };
            let existing = next[..n_next].iter().position(|&(k, _)| k == target);
            let dst = existing.unwrap_or(n_next);
            ops += apply_1d(
                Op1D::transposed(matrix, nq, nd),
                &shape[..dim],
                axis,
                &cur_pool[slot],
                &mut next_pool[dst],
                existing.is_some(),
            );
            if existing.is_none() {
                next[n_next] = (target, dst);
                n_next += 1;
            }
        }
        shape[axis] = nd;
        entries = next;
        n_entries = n_next;
    }
    debug_assert_eq!(n_entries, 1);
    let result = &pools[dim % 2][entries[0].1][..n_dofs];
    if accumulate {
        for (o, &r) in out.iter_mut().zip(result) {
            *o += r;
        }
        ops += n_dofs as u64;
    } else {
        out[..n_dofs].copy_from_slice(result);
    }
    ws.levels = pools;
    ops
}

/// Which face traces to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceRequest {
    pub values: bool,
    pub normal: bool,
    pub tangential: bool,
}

impl TraceRequest {
    pub const ALL: Self = Self {
        values: true,
        normal: true,
        tangential: true,
    };
    pub const VALUE_AND_NORMAL: Self = Self {
        values: true,
        normal: true,
        tangential: false,
    };
    pub const NORMAL: Self = Self {
        values: false,
        normal: true,
        tangential: false,
    };
}

/// Copies the slice `index` along `axis` of a tensor with `shape`.
fn extract_slice(shape: &[usize], axis: usize, index: usize, input: &[f64], out: &mut [f64]) {
    let stride: usize = shape[..axis].iter().product();
    let outer: usize = shape[axis + 1..].iter().product();
    let n = shape[axis];
    for o in 0..outer {
        out[o * stride..(o + 1) * stride]
            .copy_from_slice(&input[(o * n + index) * stride..(o * n + index + 1) * stride]);
    }
}

/// Adds `input` into slice `index` along `axis` of `out` (shape `shape`).
fn add_into_slice(shape: &[usize], axis: usize, index: usize, input: &[f64], out: &mut [f64]) {
    let stride: usize = shape[..axis].iter().product();
    let outer: usize = shape[axis + 1..].iter().product();
    let n = shape[axis];
    for o in 0..outer {
        let dst = &mut out[(o * n + index) * stride..(o * n + index + 1) * stride];
        for (y, &x) in dst.iter_mut().zip(&input[o * stride..(o + 1) * stride]) {
            *y += x;
        }
    }
}

/// Traces of a cell tensor on face (`axis`, `side`) at the tensor face
/// quadrature points, which are ordered lexicographically over the
/// remaining axes. Derivatives are with respect to reference coordinates;
/// `tangential` is component-major over all `dim` axes (the `axis` block is
/// left untouched).
#[allow(clippy::too_many_arguments)]
pub(crate) fn evaluate_face_raw(
    sm: &ShapeMatrices1D,
    dim: usize,
    coeffs: &[f64],
    axis: usize,
    side: usize,
    request: TraceRequest,
    values: &mut [f64],
    normal: &mut [f64],
    tangential: &mut [f64],
    ws: &mut Workspace,
) -> u64 {
    let (nd, nq) = (sm.n_dofs(), sm.n_points());
    let max_len = nd.max(nq).pow(dim as u32 - 1);
    ws.prepare(dim + 1, max_len);
    if ws.face_value.len() < max_len {
        ws.face_value.resize(max_len, 0.0);
        ws.face_normal.resize(max_len, 0.0);
    }
    let mut pools = std::mem::take(&mut ws.levels);
    let mut face_value = std::mem::take(&mut ws.face_value);
    let mut face_normal = std::mem::take(&mut ws.face_normal);

    let mut ops = 0;
    let cell_shape = [nd; MAX_DIM];
    let need_value_path = request.values || request.tangential;
    if need_value_path {
        extract_slice(
            &cell_shape[..dim],
            axis,
            sm.endpoint_node(side),
            coeffs,
            &mut face_value,
        );
    }
    if request.normal {
        ops += apply_1d(
            Op1D::forward(sm.endpoint_derivatives(side), 1, nd),
            &cell_shape[..dim],
            axis,
            coeffs,
            &mut face_normal,
            false,
        );
    }

    // Tree over the tangential axes; the first level lives in the
    // dedicated face buffers.
    let mut shape = [nd; MAX_DIM];
    shape[axis] = 1;
    const VAL_SLOT: usize = usize::MAX;
    const NOR_SLOT: usize = usize::MAX - 1;
    let mut entries = [(VALUE, VAL_SLOT); MAX_DIM + 1];
    let mut n_entries = 0;
    if need_value_path {
        entries[n_entries] = (VALUE, VAL_SLOT);
        n_entries += 1;
    }
    if request.normal {
        entries[n_entries] = (NORMAL, NOR_SLOT);
        n_entries += 1;
    }
    let tangent_axes: Vec<usize> = (0..dim).filter(|&a| a != axis).collect();
    let n_val = sm.values();
    let n_der = sm.derivatives();
    for (step, &b) in tangent_axes.iter().enumerate() {
        let last = step + 1 == tangent_axes.len();
        let (cur_pool, next_pool) = split_levels(&mut pools, step);
        let mut next = [(VALUE, 0usize); MAX_DIM + 1];
        let mut n_next = 0;
        for &(key, slot) in &entries[..n_entries] {
            let src: &[f64] = match slot {
                VAL_SLOT => &face_value,
                NOR_SLOT => &face_normal,
                s => &cur_pool[s],
            };
            let keep = key != VALUE || request.values || (request.tangential && !last);
            if keep {
                ops += apply_1d(
                    Op1D::forward(n_val, nq, nd),
                    &shape[..dim],
                    b,
                    src,
                    &mut next_pool[n_next],
                    false,
                );
                next[n_next] = (key, n_next);
                n_next += 1;
            }
            if key == VALUE && request.tangential {
                ops += apply_1d(
                    Op1D::forward(n_der, nq, nd),
                    &shape[..dim],
                    b,
                    src,
                    &mut next_pool[n_next],
                    false,
                );
                next[n_next] = (b, n_next);
                n_next += 1;
            }
        }
        shape[b] = nq;
        entries = next;
        n_entries = n_next;
    }

    let n_points = nq.pow(dim as u32 - 1);
    let final_pool = &pools[tangent_axes.len() % 2];
    for &(key, slot) in &entries[..n_entries] {
        let src: &[f64] = match slot {
            VAL_SLOT if tangent_axes.is_empty() => &face_value,
            NOR_SLOT if tangent_axes.is_empty() => &face_normal,
            s => &final_pool[s],
        };
        let src = &src[..n_points];
        match key {
            VALUE => values[..n_points].copy_from_slice(src),
            NORMAL => normal[..n_points].copy_from_slice(src),
            k => tangential[k * n_points..(k + 1) * n_points].copy_from_slice(src),
        }
    }
    ws.levels = pools;
    ws.face_value = face_value;
    ws.face_normal = face_normal;
    ops
}

/// Transposed face sweep:
/// `out_i (+)= Σ_q ψ_i(x_q) V_q + Σ_q ∂_{ξ_axis} ψ_i(x_q) G_q`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn integrate_face_raw(
    sm: &ShapeMatrices1D,
    dim: usize,
    axis: usize,
    side: usize,
    value_terms: Option<&[f64]>,
    normal_terms: Option<&[f64]>,
    out: &mut [f64],
    accumulate: bool,
    ws: &mut Workspace,
) -> u64 {
    let (nd, nq) = (sm.n_dofs(), sm.n_points());
    let n_dofs = nd.pow(dim as u32);
    if !accumulate {
        out[..n_dofs].fill(0.0);
    }
    let n_points = nq.pow(dim as u32 - 1);
    let max_len = nd.max(nq).pow(dim as u32 - 1);
    ws.prepare(dim + 1, max_len);
    let mut pools = std::mem::take(&mut ws.levels);

    let mut entries = [(VALUE, 0usize); 2];
    let mut n_entries = 0;
    for (key, terms) in [(VALUE, value_terms), (NORMAL, normal_terms)] {
        if let Some(t) = terms {
            pools[0][n_entries][..n_points].copy_from_slice(&t[..n_points]);
            entries[n_entries] = (key, n_entries);
            n_entries += 1;
        }
    }

    let mut ops = 0;
    let mut shape = [nq; MAX_DIM];
    shape[axis] = 1;
    let tangent_axes: Vec<usize> = (0..dim).filter(|&a| a != axis).collect();
    let n_val = sm.values();
    for (step, &b) in tangent_axes.iter().rev().enumerate() {
        let (cur_pool, next_pool) = split_levels(&mut pools, step);
        for (i, &(_, slot)) in entries[..n_entries].iter().enumerate() {
            ops += apply_1d(
                Op1D::transposed(n_val, nq, nd),
                &shape[..dim],
                b,
                &cur_pool[slot],
                &mut next_pool[i],
                false,
            );
        }
        for (i, e) in entries[..n_entries].iter_mut().enumerate() {
            e.1 = i;
        }
        shape[b] = nd;
    }
    let final_pool = &pools[tangent_axes.len() % 2];
    let cell_shape = [nd; MAX_DIM];
    for &(key, slot) in &entries[..n_entries] {
        let src = &final_pool[slot];
        if key == VALUE {
            add_into_slice(&cell_shape[..dim], axis, sm.endpoint_node(side), src, out);
            ops += (n_dofs / nd) as u64;
        } else {
            ops += apply_1d(
                Op1D::transposed(sm.endpoint_derivatives(side), 1, nd),
                &shape[..dim],
                axis,
                src,
                out,
                true,
            );
        }
    }
    ws.levels = pools;
    ops
}
