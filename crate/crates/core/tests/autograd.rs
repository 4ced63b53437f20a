use lismore::autograd::{grad_check_many, GradCheckOptions, Tape, Var};
use lismore::{Result, Tensor};
use proptest::prelude::*;

const CASES: u32 = 24;

fn values(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0f64..2.0, n)
}

fn tensor(shape: &[usize], data: Vec<f64>) -> Tensor {
    Tensor::new(shape.to_vec(), data).unwrap()
}

/// Reduces `out` to a scalar through fixed pseudo-random weights, so every
/// output element gets a distinct upstream gradient.
fn project(tape: &mut Tape, out: Var) -> Result<Var> {
    let shape = tape.shape(out).to_vec();
    let n: usize = shape.iter().product();
    let w: Vec<f64> = (0..n).map(|i| ((i * 7 + 3) % 11) as f64 / 5.0 - 1.0).collect();
    let w = tape.constant(Tensor::new(shape, w)?);
    let prod = tape.mul(out, w)?;
    Ok(tape.sum(prod))
}

fn check<F>(f: F, inputs: &[Tensor]) -> f64
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let report = grad_check_many(f, inputs, &GradCheckOptions::default()).unwrap();
    assert!(report.passed, "max rel err {}", report.max_rel_err);
    report.max_rel_err
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(CASES))]

    #[test]
    fn matmul_gradient((m, k, n, a, b) in (1usize..5, 1usize..5, 1usize..5).prop_flat_map(|(m, k, n)| (Just(m), Just(k), Just(n), values(m * k), values(k * n)))) {
        let err = check(|t, v| { let c = t.matmul(v[0], v[1])?; project(t, c) }, &[tensor(&[m, k], a), tensor(&[k, n], b)]);
        prop_assert!(err < 1e-4);
    }

    #[test]
    fn transpose_gradient((m, n, a) in (1usize..5, 1usize..5).prop_flat_map(|(m, n)| (Just(m), Just(n), values(m * n)))) {
        let err = check(|t, v| { let c = t.transpose(v[0])?; project(t, c) }, &[tensor(&[m, n], a)]);
        prop_assert!(err < 1e-4);
    }

    #[test]
    fn add_mul_scale_gradient((n, a, b) in (1usize..8).prop_flat_map(|n| (Just(n), values(n), values(n))), c in -3.0f64..3.0) {
        let err = check(|t, v| {
            let s = t.add(v[0], v[1])?;
            let p = t.mul(s, v[1])?;
            let q = t.scale(p, c);
            project(t, q)
        }, &[tensor(&[n], a), tensor(&[n], b)]);
        prop_assert!(err < 1e-4);
    }

    #[test]
    fn add_row_gradient((m, n, a, b) in (1usize..5, 1usize..5).prop_flat_map(|(m, n)| (Just(m), Just(n), values(m * n), values(n)))) {
        let err = check(|t, v| { let c = t.add_row(v[0], v[1])?; project(t, c) }, &[tensor(&[m, n], a), tensor(&[n], b)]);
        prop_assert!(err < 1e-4);
    }

    #[test]
    fn softmax_gradient((m, n, a) in (1usize..5, 2usize..6).prop_flat_map(|(m, n)| (Just(m), Just(n), values(m * n))), axis in 0usize..2) {
        let err = check(|t, v| { let c = t.softmax(v[0], axis)?; project(t, c) }, &[tensor(&[m, n], a)]);
        prop_assert!(err < 1e-4);
    }

    #[test]
    fn layer_norm_gradient((m, n, x, g, b) in (1usize..4, 3usize..7).prop_flat_map(|(m, n)| (Just(m), Just(n), values(m * n), values(n), values(n)))) {
        let err = check(|t, v| { let c = t.layer_norm(v[0], v[1], v[2], 1e-5)?; project(t, c) }, &[tensor(&[m, n], x), tensor(&[n], g), tensor(&[n], b)]);
        prop_assert!(err < 1e-4);
    }

    #[test]
    fn gelu_gradient((n, a) in (1usize..10).prop_flat_map(|n| (Just(n), values(n)))) {
        let err = check(|t, v| { let c = t.gelu(v[0]); project(t, c) }, &[tensor(&[n], a)]);
        prop_assert!(err < 1e-4);
    }

    #[test]
    fn embedding_gradient((v, d, table) in (2usize..6, 1usize..4).prop_flat_map(|(v, d)| (Just(v), Just(d), values(v * d))), raw_ids in prop::collection::vec(0usize..100, 0..7)) {
        let ids: Vec<usize> = raw_ids.iter().map(|i| i % v).collect();
        let err = check(|t, vars| {
            let e = t.embedding(vars[0], &ids)?;
            let p = project(t, e)?;
            // Keeps the output scalar-valued for an empty lookup too.
            let s = t.sum(vars[0]);
            let s = t.scale(s, 1e-3);
            t.add(p, s)
        }, &[tensor(&[v, d], table)]);
        prop_assert!(err < 1e-4);
    }

    #[test]
    fn cross_entropy_gradient((l, v, logits) in (1usize..5, 2usize..6).prop_flat_map(|(l, v)| (Just(l), Just(v), values(l * v))), raw in prop::collection::vec(0usize..100, 5), ignore_first in any::<bool>()) {
        let mut targets: Vec<usize> = raw[..l].iter().map(|t| t % v).collect();
        let ignore = v + 1;
        if ignore_first && l > 1 {
            targets[0] = ignore;
        }
        let err = check(|t, vars| t.cross_entropy(vars[0], &targets, ignore), &[tensor(&[l, v], logits)]);
        prop_assert!(err < 1e-4);
    }

    #[test]
    fn slice_concat_gradient((m, n, a) in (1usize..4, 2usize..7).prop_flat_map(|(m, n)| (Just(m), Just(n), values(m * n))), cut in 1usize..6) {
        let cut = cut.min(n - 1);
        let err = check(|t, v| {
            let left = t.slice_cols(v[0], 0, cut)?;
            let right = t.slice_cols(v[0], cut, n)?;
            // Swap halves and square one, so the two slices get different gradients.
            let sq = t.mul(left, left)?;
            let joined = t.concat_cols(&[right, sq])?;
            project(t, joined)
        }, &[tensor(&[m, n], a)]);
        prop_assert!(err < 1e-4);
    }

    #[test]
    fn softmax_rows_sum_to_one((m, n, a) in (1usize..6, 1usize..9).prop_flat_map(|(m, n)| (Just(m), Just(n), prop::collection::vec(-500.0f64..500.0, m * n)))) {
        let mut tape = Tape::new();
        let x = tape.constant(tensor(&[m, n], a));
        let s = tape.softmax(x, 1).unwrap();
        for row in tape.value(s).data().chunks(n) {
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            prop_assert!(row.iter().all(|p| *p >= 0.0));
        }
    }

    #[test]
    fn backward_is_linear((n, a) in (2usize..6).prop_flat_map(|n| (Just(n), values(n))), alpha in -2.0f64..2.0, beta in -2.0f64..2.0) {
        // f = sum(softmax(x)^2 weighted), g = sum(gelu(x) weighted).
        let grad_of = |wf: f64, wg: f64| {
            let mut t = Tape::new();
            let x = t.param(tensor(&[n], a.clone()));
            let s = t.softmax(x, 0).unwrap();
            let s2 = t.mul(s, s).unwrap();
            let f = project(&mut t, s2).unwrap();
            let g0 = t.gelu(x);
            let g = project(&mut t, g0).unwrap();
            let f = t.scale(f, wf);
            let g = t.scale(g, wg);
            let total = t.add(f, g).unwrap();
            t.backward(total).unwrap();
            t.grad(x).unwrap().to_vec()
        };
        let combined = grad_of(alpha, beta);
        let f = grad_of(1.0, 0.0);
        let g = grad_of(0.0, 1.0);
        for i in 0..n {
            prop_assert!((combined[i] - (alpha * f[i] + beta * g[i])).abs() < 1e-12);
        }
    }
}

#[test]
fn composite_graph_matches_finite_differences() {
    let x = tensor(&[3, 4], (0..12).map(|i| (i as f64 * 0.37).sin()).collect());
    let w = tensor(&[4, 5], (0..20).map(|i| (i as f64 * 0.61).cos()).collect());
    let err = check(
        |t, v| {
            let h = t.matmul(v[0], v[1])?;
            let h = t.softmax(h, 1)?;
            t.cross_entropy(h, &[1, 4, 0], usize::MAX)
        },
        &[x, w],
    );
    assert!(err < 1e-4);
}

#[test]
fn replay_is_bitwise_deterministic() {
    let run = || {
        let mut t = Tape::new();
        let x = t.param(tensor(&[2, 3], vec![0.3, -1.2, 2.0, 0.7, 0.1, -0.4]));
        let g = t.param(tensor(&[3], vec![1.0, 0.5, 2.0]));
        let b = t.param(tensor(&[3], vec![0.0, 0.1, -0.1]));
        let y = t.layer_norm(x, g, b, 1e-5).unwrap();
        let y = t.gelu(y);
        let loss = t.cross_entropy(y, &[2, 0], 9).unwrap();
        t.backward(loss).unwrap();
        [x, g, b].map(|v| t.grad(v).unwrap().iter().map(|f| f.to_bits()).collect::<Vec<_>>())
    };
    assert_eq!(run(), run());
}

#[test]
fn second_backward_doubles_gradient() {
    let mut t = Tape::new();
    let x = t.param(tensor(&[3], vec![1.0, 2.0, 3.0]));
    let sq = t.mul(x, x).unwrap();
    let loss = t.sum(sq);
    t.backward(loss).unwrap();
    t.backward(loss).unwrap();
    assert_eq!(t.grad(x).unwrap(), &[4.0, 8.0, 12.0]);
    t.zero_grads();
    t.backward(loss).unwrap();
    assert_eq!(t.grad(x).unwrap(), &[2.0, 4.0, 6.0]);
}
