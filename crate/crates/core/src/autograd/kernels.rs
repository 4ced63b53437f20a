//! Plain loops behind the differentiable primitives.

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_K: f64 = 0.044_715;

/// `a[m x k] * b[k x n]`
pub(crate) fn matmul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let aip = a[i * k + p];
            if aip == 0.0 {
                continue;
            }
            for (o, &bv) in row.iter_mut().zip(&b[p * n..(p + 1) * n]) {
                *o += aip * bv;
            }
        }
    }
    out
}

/// `da[m x k] += g[m x n] * b[k x n]^T`
pub(crate) fn acc_a_bt(da: &mut [f64], g: &[f64], b: &[f64], m: usize, n: usize, k: usize) {
    for i in 0..m {
        let gi = &g[i * n..(i + 1) * n];
        for p in 0..k {
            let bp = &b[p * n..(p + 1) * n];
            da[i * k + p] += gi.iter().zip(bp).map(|(x, y)| x * y).sum::<f64>();
        }
    }
}

/// `db[k x n] += a[m x k]^T * g[m x n]`
pub(crate) fn acc_at_b(db: &mut [f64], a: &[f64], g: &[f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let gi = &g[i * n..(i + 1) * n];
        for p in 0..k {
            let aip = a[i * k + p];
            if aip == 0.0 {
                continue;
            }
            for (d, &gv) in db[p * n..(p + 1) * n].iter_mut().zip(gi) {
                *d += aip * gv;
            }
        }
    }
}

/// Tanh approximation of GELU.
pub(crate) fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + GELU_K * x * x * x)).tanh())
}

pub(crate) fn gelu_grad(x: f64) -> f64 {
    let t = (GELU_C * (x + GELU_K * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_K * x * x)
}

/// In-place numerically stable softmax of one strided lane.
/// A lane whose entries are all `-inf` becomes all zeros.
pub(crate) fn softmax_lane(x: &mut [f64], at: impl Fn(usize) -> usize, len: usize) {
    let max = (0..len).map(|a| x[at(a)]).fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        (0..len).for_each(|a| x[at(a)] = 0.0);
        return;
    }
    let mut total = 0.0;
    for a in 0..len {
        let e = (x[at(a)] - max).exp();
        x[at(a)] = e;
        total += e;
    }
    for a in 0..len {
        x[at(a)] /= total;
    }
}
