use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::error::Error;

fn random(shape: &[usize], rng: &mut impl Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

fn mat(rows: &[&[f64]]) -> Tensor {
    Tensor::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
}

fn triple_loop(a: &Tensor, b: &Tensor) -> Vec<f64> {
    let (m, k) = a.dims2().unwrap();
    let n = b.shape()[1];
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            for p in 0..k {
                out[i * n + j] += a.values()[i * k + p] * b.values()[p * n + j];
            }
        }
    }
    out
}

/// Six nested loops over a zero-padded input, no shared code with the
/// kernel implementation.
fn naive_conv(input: &Tensor, k: &Tensor, stride: usize, pad: usize) -> (Vec<usize>, Vec<f64>) {
    let [c_in, h, w] = input.shape()[..] else {
        panic!()
    };
    let [c_out, _, kh, kw] = k.shape()[..] else {
        panic!()
    };
    let (hp, wp) = (h + 2 * pad, w + 2 * pad);
    let mut padded = vec![0.0; c_in * hp * wp];
    for c in 0..c_in {
        for y in 0..h {
            for x in 0..w {
                padded[(c * hp + y + pad) * wp + x + pad] = input.values()[(c * h + y) * w + x];
            }
        }
    }
    let oh = (hp - kh) / stride + 1;
    let ow = (wp - kw) / stride + 1;
    let mut out = vec![0.0; c_out * oh * ow];
    for o in 0..c_out {
        for y in 0..oh {
            for x in 0..ow {
                let mut s = 0.0;
                for c in 0..c_in {
                    for dy in 0..kh {
                        for dx in 0..kw {
                            s += padded[(c * hp + y * stride + dy) * wp + x * stride + dx]
                                * k.values()[((o * c_in + c) * kh + dy) * kw + dx];
                        }
                    }
                }
                out[(o * oh + y) * ow + x] = s;
            }
        }
    }
    (vec![c_out, oh, ow], out)
}

fn assert_close(a: &[f64], b: &[f64], tol: f64) {
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(b) {
        assert!((x - y).abs() <= tol, "{x} vs {y}");
    }
}

#[test]
fn matmul_examples() {
    let mut tape = Tape::new();
    let i2 = tape.constant(mat(&[&[1.0, 0.0], &[0.0, 1.0]]));
    let m = tape.constant(mat(&[&[1.0, 2.0], &[3.0, 4.0]]));
    let out = tape.matmul(i2, m).unwrap();
    assert_eq!(tape.value(out).values(), &[1.0, 2.0, 3.0, 4.0]);

    let a = tape.constant(mat(&[&[1.0, 2.0]]));
    let b = tape.constant(mat(&[&[3.0], &[4.0]]));
    let out = tape.matmul(a, b).unwrap();
    assert_eq!(tape.value(out).values(), &[11.0]);
}

#[test]
fn matmul_matches_triple_loop() {
    for seed in 0..5 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, b) = (random(&[4, 5], &mut rng), random(&[5, 3], &mut rng));
        let mut tape = Tape::new();
        let (va, vb) = (tape.leaf(&a), tape.leaf(&b));
        let out = tape.matmul(va, vb).unwrap();
        assert_eq!(tape.shape(out), &[4, 3]);
        assert_close(tape.value(out).values(), &triple_loop(&a, &b), 1e-12);
    }
}

#[test]
fn matmul_shape_error_names_both_shapes() {
    let mut tape = Tape::new();
    let a = tape.constant(Tensor::zeros(&[2, 3]));
    let b = tape.constant(Tensor::zeros(&[2, 3]));
    let err = tape.matmul(a, b).unwrap_err();
    let msg = err.to_string();
    assert!(matches!(err, Error::Dimension { .. }));
    assert!(msg.contains("[2, 3]"), "{msg}");
}

#[test]
fn conv2d_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let input = random(&[1, 4, 5], &mut rng);
    let mut tape = Tape::new();
    let x = tape.leaf(&input);
    let k = tape.constant(Tensor::new(&[1, 1, 1, 1], vec![1.0]).unwrap());
    let out = tape.conv2d(x, k, 1, 0).unwrap();
    assert_eq!(tape.value(out).values(), input.values());

    let ones = tape.constant(Tensor::new(&[1, 3, 3], vec![1.0; 9]).unwrap());
    let k = tape.constant(Tensor::new(&[1, 1, 3, 3], vec![1.0; 9]).unwrap());
    let out = tape.conv2d(ones, k, 1, 0).unwrap();
    assert_eq!(tape.shape(out), &[1, 1, 1]);
    assert_eq!(tape.value(out).values(), &[9.0]);
}

#[test]
fn conv2d_matches_naive_loops() {
    for (seed, stride, pad) in [(0, 1, 0), (1, 1, 1), (2, 2, 0), (3, 2, 1), (4, 3, 2)] {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let input = random(&[2, 8, 8], &mut rng);
        let kernels = random(&[3, 2, 3, 3], &mut rng);
        let mut tape = Tape::new();
        let (x, k) = (tape.leaf(&input), tape.leaf(&kernels));
        let out = tape.conv2d(x, k, stride, pad).unwrap();
        let (shape, expected) = naive_conv(&input, &kernels, stride, pad);
        assert_eq!(tape.shape(out), &shape[..]);
        assert_close(tape.value(out).values(), &expected, 1e-12);
    }
}

#[test]
fn conv2d_batched_equals_per_image() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let a = random(&[2, 6, 7], &mut rng);
    let b = random(&[2, 6, 7], &mut rng);
    let kernels = random(&[4, 2, 3, 3], &mut rng);
    let batch = Tensor::new(&[2, 2, 6, 7], [a.values(), b.values()].concat()).unwrap();
    let mut tape = Tape::new();
    let (x, k) = (tape.leaf(&batch), tape.leaf(&kernels));
    let out = tape.conv2d(x, k, 1, 1).unwrap();
    let (_, ea) = naive_conv(&a, &kernels, 1, 1);
    let (_, eb) = naive_conv(&b, &kernels, 1, 1);
    assert_close(tape.value(out).values(), &[ea, eb].concat(), 1e-12);
}

#[test]
fn conv2d_kernel_larger_than_input() {
    let mut tape = Tape::new();
    let x = tape.constant(Tensor::zeros(&[1, 2, 2]));
    let k = tape.constant(Tensor::zeros(&[1, 1, 3, 3]));
    assert!(matches!(tape.conv2d(x, k, 1, 0), Err(Error::Shape { .. })));
    assert!(tape.conv2d(x, k, 1, 1).is_ok());
}

#[test]
fn elementwise_examples() {
    let mut tape = Tape::new();
    let x = tape.constant(Tensor::new(&[3], vec![-1.0, 0.0, 2.0]).unwrap());
    let r = tape.relu(x).unwrap();
    assert_eq!(tape.value(r).values(), &[0.0, 0.0, 2.0]);
    let z = tape.constant(Tensor::new(&[1], vec![0.0]).unwrap());
    let s = tape.sigmoid(z).unwrap();
    assert_eq!(tape.value(s).values(), &[0.5]);

    let a = tape.constant(Tensor::zeros(&[4, 256]));
    let b = tape.constant(Tensor::zeros(&[4, 1024]));
    let c = tape.concat_rows(a, b).unwrap();
    assert_eq!(tape.shape(c), &[4, 1280]);

    let d = tape.constant(Tensor::zeros(&[3, 1024]));
    assert!(matches!(
        tape.concat_rows(a, d),
        Err(Error::Dimension { .. })
    ));
    assert!(matches!(tape.add(a, b), Err(Error::Dimension { .. })));
    assert!(matches!(tape.mul(a, b), Err(Error::Dimension { .. })));
}

#[test]
fn concat_rows_puts_first_operand_first() {
    let mut tape = Tape::new();
    let a = tape.constant(mat(&[&[1.0], &[2.0]]));
    let b = tape.constant(mat(&[&[3.0, 4.0], &[5.0, 6.0]]));
    let c = tape.concat_rows(a, b).unwrap();
    assert_eq!(tape.value(c).values(), &[1.0, 3.0, 4.0, 2.0, 5.0, 6.0]);
}

#[test]
fn softmax_examples() {
    let mut tape = Tape::new();
    let x = tape.constant(mat(&[&[0.0, 0.0, 0.0]]));
    let s = tape.softmax(x).unwrap();
    assert_close(tape.value(s).values(), &[1.0 / 3.0; 3], 1e-15);

    let x = tape.constant(mat(&[&[1f64.ln(), 3f64.ln()]]));
    let s = tape.softmax(x).unwrap();
    assert_close(tape.value(s).values(), &[0.25, 0.75], 1e-15);

    let x = tape.constant(mat(&[&[1000.0, 1000.0]]));
    let s = tape.softmax(x).unwrap();
    assert_eq!(tape.value(s).values(), &[0.5, 0.5]);

    let x = tape.constant(mat(&[&[f64::INFINITY, 0.0]]));
    assert!(matches!(tape.softmax(x), Err(Error::NonFinite { .. })));
}

#[test]
fn cross_entropy_examples() {
    let mut tape = Tape::new();
    let x = tape.constant(mat(&[&[0.0, 0.0]]));
    let l = tape.cross_entropy(x, &[0]).unwrap();
    assert!((tape.value(l).values()[0] - std::f64::consts::LN_2).abs() < 1e-12);

    let x = tape.constant(mat(&[&[1000.0, 0.0]]));
    let l = tape.cross_entropy(x, &[0]).unwrap();
    assert!(tape.value(l).values()[0].abs() < 1e-12);

    let l = tape.cross_entropy(x, &[1]).unwrap();
    assert!((tape.value(l).values()[0] - 1000.0).abs() < 1e-9);

    let big = tape.constant(mat(&[&[1e300, 1e300, 1e300]]));
    let l = tape.cross_entropy(big, &[1]).unwrap();
    assert!((tape.value(l).values()[0] - 3f64.ln()).abs() < 1e-12);

    match tape.cross_entropy(x, &[2]) {
        Err(Error::Label {
            index: 2, bound: 2, ..
        }) => {}
        other => panic!("{other:?}"),
    }
}

#[test]
fn cross_entropy_matches_direct_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let logits = random(&[3, 5], &mut rng);
    let labels = [4, 0, 2];
    let direct: f64 = labels
        .iter()
        .enumerate()
        .map(|(r, &l)| {
            let row = logits.row(r);
            let z: f64 = row.iter().map(|v| v.exp()).sum();
            -(row[l].exp() / z).ln()
        })
        .sum::<f64>()
        / 3.0;
    let mut tape = Tape::new();
    let x = tape.leaf(&logits);
    let l = tape.cross_entropy(x, &labels).unwrap();
    assert!((tape.value(l).values()[0] - direct).abs() < 1e-10);
}

#[test]
fn backward_examples() {
    let x = Tensor::new(&[2, 3], vec![0.5; 6])
        .unwrap()
        .with_requires_grad(true);
    let mut tape = Tape::new();
    let v = tape.leaf(&x);
    let s = tape.sum(v).unwrap();
    let g = tape.backward(s).unwrap();
    assert_eq!(g.get(v).unwrap(), &[1.0; 6]);

    let x = Tensor::new(&[3], vec![1.0, 2.0, 3.0])
        .unwrap()
        .with_requires_grad(true);
    let mut tape = Tape::new();
    let v = tape.leaf(&x);
    let sq = tape.mul(v, v).unwrap();
    let s = tape.sum(sq).unwrap();
    let g = tape.backward(s).unwrap();
    assert_eq!(g.get(v).unwrap(), &[2.0, 4.0, 6.0]);
}

#[test]
fn backward_rejects_non_scalar_loss() {
    let x = Tensor::zeros(&[2]).with_requires_grad(true);
    let mut tape = Tape::new();
    let v = tape.leaf(&x);
    assert!(matches!(tape.backward(v), Err(Error::Contract(_))));
}

#[test]
fn shared_subexpressions_accumulate_and_repeated_backward_doubles() {
    let mut x = Tensor::new(&[2], vec![1.5, -2.0])
        .unwrap()
        .with_requires_grad(true);
    let mut tape = Tape::new();
    let v = tape.leaf(&x);
    let t = tape.tanh(v).unwrap();
    // t used three times: t*t + t
    let tt = tape.mul(t, t).unwrap();
    let y = tape.add(tt, t).unwrap();
    let s = tape.sum(y).unwrap();
    let g = tape.backward(s).unwrap();
    for (i, &xi) in x.values().to_vec().iter().enumerate() {
        let th = xi.tanh();
        let expected = (2.0 * th + 1.0) * (1.0 - th * th);
        assert!((g.get(v).unwrap()[i] - expected).abs() < 1e-14);
    }
    g.accumulate_into(v, &mut x).unwrap();
    let once = x.grad().unwrap().to_vec();
    let g2 = tape.backward(s).unwrap();
    g2.accumulate_into(v, &mut x).unwrap();
    let twice = x.grad().unwrap();
    for (a, b) in once.iter().zip(twice) {
        assert_eq!(2.0 * a, *b);
    }
}

#[test]
fn constants_receive_no_gradient() {
    let mut tape = Tape::new();
    let c = tape.constant(Tensor::new(&[2], vec![1.0, 2.0]).unwrap());
    let w = tape.leaf(
        &Tensor::new(&[2], vec![3.0, 4.0])
            .unwrap()
            .with_requires_grad(true),
    );
    let p = tape.mul(c, w).unwrap();
    let s = tape.sum(p).unwrap();
    let g = tape.backward(s).unwrap();
    assert!(g.get(c).is_none());
    assert_eq!(g.get(w).unwrap(), &[1.0, 2.0]);
}

#[test]
fn gradient_check_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = random(&[4, 3], &mut rng);
    let err = gradient_check(
        |t, x| {
            let sq = t.mul(x, x)?;
            t.sum(sq)
        },
        &x,
        1e-5,
    );
    assert!(err < 1e-6, "{err}");

    let w = random(&[3, 5], &mut rng);
    let err = gradient_check(
        |t, x| {
            let w = t.constant(w.clone());
            let logits = t.matmul(x, w)?;
            let p = t.softmax(logits)?;
            let sq = t.mul(p, p)?;
            let l = t.cross_entropy(logits, &[0, 4, 2, 1])?;
            let s = t.sum(sq)?;
            let r = t.reshape(l, &[1])?;
            let total = t.add(r, s)?;
            Ok(total)
        },
        &x,
        1e-5,
    );
    assert!(err < 1e-5, "{err}");
}

#[test]
fn gradient_check_reports_failure_as_infinite() {
    let x = Tensor::new(&[1, 2], vec![0.0, 0.0]).unwrap();
    let err = gradient_check(|t, x| t.cross_entropy(x, &[5]), &x, 1e-5);
    assert!(err.is_infinite());
}

/// Gradient checks for every differentiable op over 20 seeds.
#[test]
fn every_op_matches_finite_differences() {
    type Case = (
        &'static str,
        Vec<usize>,
        fn(&mut Tape, Var, &Tensor) -> crate::Result<Var>,
    );
    let cases: Vec<Case> = vec![
        ("matmul", vec![3, 4], |t, x, aux| {
            let w = t.constant(Tensor::from_parts(vec![4, 3], aux.values()[..12].to_vec()));
            let y = t.matmul(x, w)?;
            let y2 = t.mul(y, y)?;
            t.sum(y2)
        }),
        ("matmul_rhs", vec![4, 5], |t, x, aux| {
            let a = t.constant(Tensor::from_parts(vec![5, 4], aux.values()[..20].to_vec()));
            let y = t.matmul(a, x)?;
            let y = t.tanh(y)?;
            t.sum(y)
        }),
        ("add_bias", vec![1, 5], |t, b, aux| {
            let x = t.constant(Tensor::from_parts(vec![4, 5], aux.values()[..20].to_vec()));
            let y = t.add_bias(x, b)?;
            let y = t.sigmoid(y)?;
            let y = t.mul(y, y)?;
            t.sum(y)
        }),
        ("relu", vec![2, 6], |t, x, _| {
            let y = t.relu(x)?;
            let y = t.mul(y, y)?;
            t.sum(y)
        }),
        ("sigmoid", vec![2, 6], |t, x, _| {
            let y = t.sigmoid(x)?;
            let y = t.mul(y, x)?;
            t.sum(y)
        }),
        ("tanh", vec![2, 6], |t, x, _| {
            let y = t.tanh(x)?;
            let y = t.mul(y, y)?;
            t.sum(y)
        }),
        ("concat_slice", vec![3, 4], |t, x, _| {
            let s = t.slice_cols(x, 1, 2)?;
            let sq = t.mul(x, x)?;
            let c = t.concat_rows(s, sq)?;
            let c = t.tanh(c)?;
            t.sum(c)
        }),
        ("conv2d_input", vec![2, 6, 6], |t, x, aux| {
            let k = t.constant(Tensor::from_parts(
                vec![2, 2, 3, 3],
                aux.values()[..36].to_vec(),
            ));
            let y = t.conv2d(x, k, 1, 1)?;
            let y = t.mul(y, y)?;
            t.sum(y)
        }),
        ("conv2d_kernels", vec![3, 2, 3, 3], |t, k, aux| {
            let x = t.constant(Tensor::from_parts(
                vec![2, 2, 5, 5],
                aux.values()[..100].to_vec(),
            ));
            let y = t.conv2d(x, k, 2, 1)?;
            let y = t.tanh(y)?;
            t.sum(y)
        }),
        ("channel_bias_pool", vec![3], |t, b, aux| {
            let x = t.constant(Tensor::from_parts(
                vec![2, 3, 4, 4],
                aux.values()[..96].to_vec(),
            ));
            let y = t.add_channel_bias(x, b)?;
            let y = t.max_pool2d(y, 2)?;
            let y = t.mul(y, y)?;
            t.sum(y)
        }),
        ("max_pool", vec![1, 2, 4, 6], |t, x, _| {
            let y = t.max_pool2d(x, 2)?;
            let y = t.tanh(y)?;
            t.sum(y)
        }),
        ("embedding", vec![6, 3], |t, table, _| {
            let e = t.embedding(table, &[1, 4, 1, 0])?;
            let e = t.tanh(e)?;
            let e = t.mul(e, e)?;
            t.sum(e)
        }),
        ("where_rows", vec![3, 2], |t, x, aux| {
            let other = t.constant(Tensor::from_parts(vec![3, 2], aux.values()[..6].to_vec()));
            let sq = t.mul(x, x)?;
            let y = t.where_rows(&[true, false, true], sq, other)?;
            let y = t.mul(y, x)?;
            t.sum(y)
        }),
        ("softmax", vec![2, 4], |t, x, aux| {
            let w = t.constant(Tensor::from_parts(vec![2, 4], aux.values()[..8].to_vec()));
            let p = t.softmax(x)?;
            let y = t.mul(p, w)?;
            t.sum(y)
        }),
        ("cross_entropy", vec![3, 4], |t, x, _| {
            t.cross_entropy(x, &[3, 0, 1])
        }),
    ];
    for (name, shape, f) in cases {
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
            let x = random(&shape, &mut rng);
            let aux = random(&[128], &mut rng);
            let err = gradient_check(|t, v| f(t, v, &aux), &x, 1e-5);
            assert!(err < 1e-4, "{name} seed {seed}: relative error {err}");
        }
    }
}

proptest! {
    #[test]
    fn softmax_rows_sum_to_one_and_ignore_shifts(
        row in prop::collection::vec(-50.0f64..50.0, 1..12),
        shift in -100.0f64..100.0,
    ) {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::new(&[1, row.len()], row.clone()).unwrap());
        let shifted = tape.constant(
            Tensor::new(&[1, row.len()], row.iter().map(|v| v + shift).collect()).unwrap(),
        );
        let p = tape.softmax(x).unwrap();
        let q = tape.softmax(shifted).unwrap();
        let total: f64 = tape.value(p).values().iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-9);
        prop_assert!(tape.value(p).values().iter().all(|&v| v >= 0.0));
        for (a, b) in tape.value(p).values().iter().zip(tape.value(q).values()) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn cross_entropy_is_nonnegative(
        row in prop::collection::vec(-30.0f64..30.0, 2..8),
        pick in 0usize..8,
    ) {
        let label = pick % row.len();
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::new(&[1, row.len()], row.clone()).unwrap());
        let l = tape.cross_entropy(x, &[label]).unwrap();
        prop_assert!(tape.value(l).values()[0] >= 0.0);
    }
}

#[test]
fn cross_entropy_vanishes_as_correct_logit_dominates() {
    let mut last = f64::INFINITY;
    for margin in [0.0, 1.0, 5.0, 20.0, 50.0] {
        let mut tape = Tape::new();
        let x = tape.constant(mat(&[&[margin, 0.0, 0.0]]));
        let l = tape.cross_entropy(x, &[0]).unwrap();
        let v = tape.value(l).values()[0];
        assert!(v < last);
        last = v;
    }
    assert!(last < 1e-20);
}
