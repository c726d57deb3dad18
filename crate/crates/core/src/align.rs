//! Weighted Levenshtein alignment with a reproducible backtrace.

/// One step of an alignment between a reference and a hypothesis sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EditOp {
    /// Reference item `r` paired with hypothesis item `h` (match or substitution).
    Pair { r: usize, h: usize },
    /// Hypothesis item `h` has no reference counterpart.
    Insert { h: usize },
    /// Reference item `r` has no hypothesis counterpart.
    Delete { r: usize },
}

/// Minimum-cost alignment under `sub_cost` and a uniform insertion/deletion
/// cost. Ties in the backtrace prefer pairing, then insertion, then deletion.
/// Returns the total cost and the operations in sequence order.
pub fn align<A, B, F>(reference: &[A], hypothesis: &[B], sub_cost: F, indel: f64) -> (f64, Vec<EditOp>)
where
    F: Fn(&A, &B) -> f64,
{
    let n = reference.len();
    let m = hypothesis.len();
    let width = m + 1;
    let mut cost = vec![0.0f64; (n + 1) * width];
    let mut sub = vec![0.0f64; n * m];
    for j in 1..=m {
        cost[j] = cost[j - 1] + indel;
    }
    for i in 1..=n {
        cost[i * width] = cost[(i - 1) * width] + indel;
        for j in 1..=m {
            let s = sub_cost(&reference[i - 1], &hypothesis[j - 1]);
            sub[(i - 1) * m + (j - 1)] = s;
            let diag = cost[(i - 1) * width + j - 1] + s;
            let ins = cost[i * width + j - 1] + indel;
            let del = cost[(i - 1) * width + j] + indel;
            cost[i * width + j] = diag.min(ins).min(del);
        }
    }

    let mut ops = Vec::with_capacity(n.max(m));
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = cost[i * width + j];
        if i > 0 && j > 0 && here == cost[(i - 1) * width + j - 1] + sub[(i - 1) * m + (j - 1)] {
            ops.push(EditOp::Pair { r: i - 1, h: j - 1 });
            i -= 1;
            j -= 1;
        } else if j > 0 && here == cost[i * width + j - 1] + indel {
            ops.push(EditOp::Insert { h: j - 1 });
            j -= 1;
        } else {
            ops.push(EditOp::Delete { r: i - 1 });
            i -= 1;
        }
    }
    ops.reverse();
    (cost[n * width + m], ops)
}
