use super::{Tape, Tensor, Var};
use crate::error::Result;

/// Compares backward-pass gradients of a scalar function against central
/// finite differences and returns the largest relative error, using
/// `max(|analytic|, |numeric|, 1e-8)` as the denominator.
///
/// `f` builds the function on a fresh tape from the leaf holding `x`. Any
/// failure (an error from `f`, a non-finite value) yields `f64::INFINITY`.
pub fn gradient_check<F>(f: F, x: &Tensor, eps: f64) -> f64
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    let eval = |point: &Tensor| -> Option<f64> {
        let mut tape = Tape::new();
        let leaf = tape.leaf(point);
        let out = f(&mut tape, leaf).ok()?;
        let v = tape.value(out).values();
        (v.len() == 1 && v[0].is_finite()).then_some(v[0])
    };

    let analytic = {
        let mut tape = Tape::new();
        let x = x.clone().with_requires_grad(true);
        let leaf = tape.leaf(&x);
        let Ok(out) = f(&mut tape, leaf) else {
            return f64::INFINITY;
        };
        let Ok(grads) = tape.backward(out) else {
            return f64::INFINITY;
        };
        grads
            .get(leaf)
            .map_or_else(|| vec![0.0; x.len()], <[f64]>::to_vec)
    };

    let mut worst = 0.0_f64;
    let mut probe = x.clone();
    for (i, &a) in analytic.iter().enumerate() {
        let orig = x.values()[i];
        probe.values_mut()[i] = orig + eps;
        let plus = eval(&probe);
        probe.values_mut()[i] = orig - eps;
        let minus = eval(&probe);
        probe.values_mut()[i] = orig;
        let (Some(plus), Some(minus)) = (plus, minus) else {
            return f64::INFINITY;
        };
        let numeric = (plus - minus) / (2.0 * eps);
        if !a.is_finite() || !numeric.is_finite() {
            return f64::INFINITY;
        }
        let denom = a.abs().max(numeric.abs()).max(1e-8);
        worst = worst.max((a - numeric).abs() / denom);
    }
    worst
}
