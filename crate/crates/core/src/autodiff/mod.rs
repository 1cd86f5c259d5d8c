//! Reverse-mode differentiation, the Adam optimizer, and a finite-difference
//! harness for checking gradients.

mod adam;
mod gradcheck;
mod tape;

pub use adam::{adam_step, AdamState, Constraint, ParamGroup, BETA1, BETA2, EPSILON};
pub use gradcheck::{finite_diff_check, FdReport, GRAD_FLOOR};
pub use tape::{sum, Gradients, Real, Tape, Var};

#[derive(Debug, thiserror::Error)]
pub enum DiffError {
    #[error("backward needs exactly one scalar output, got {len}")]
    NonScalarOutput { len: usize },
    #[error("output variable belongs to a different tape")]
    ForeignVariable,
    #[error("shape mismatch: {params} params, {grads} grads, {state} optimizer slots")]
    ShapeMismatch {
        params: usize,
        grads: usize,
        state: usize,
    },
    #[error("degenerate finite-difference step {0}")]
    DegenerateStep(f64),
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // Small random expression graph over three inputs.
    fn graph<S: Real>(x: &[S], ops: &[u8]) -> S {
        let mut stack: Vec<S> = x.to_vec();
        for (i, op) in ops.iter().enumerate() {
            let a = stack[i % stack.len()];
            let b = stack[(i * 7 + 1) % stack.len()];
            let r = match op % 5 {
                0 => a + b,
                1 => a * b,
                2 => a - b * 0.5,
                3 => (a * 0.3).sin() * b,
                _ => (a * 0.1).exp() + b * b,
            };
            stack.push(r);
        }
        *stack.last().unwrap()
    }

    proptest! {
        #[test]
        fn backward_is_linear(
            x in prop::collection::vec(-1.0f64..1.0, 3),
            ops_f in prop::collection::vec(any::<u8>(), 1..12),
            ops_g in prop::collection::vec(any::<u8>(), 1..12),
            a in -3.0f64..3.0,
            b in -3.0f64..3.0,
        ) {
            let grad_of = |h: &dyn for<'t> Fn(&[Var<'t>]) -> Var<'t>| {
                let tape = Tape::new();
                let v = tape.vars(&x);
                let out = h(&v);
                tape.gradient(&[out]).unwrap().wrt_all(&v)
            };
            let gf = grad_of(&|v| graph(v, &ops_f));
            let gg = grad_of(&|v| graph(v, &ops_g));
            let gc = grad_of(&|v| graph(v, &ops_f) * a + graph(v, &ops_g) * b);
            for i in 0..3 {
                let expect = a * gf[i] + b * gg[i];
                prop_assert!((gc[i] - expect).abs() <= 1e-12 * (1.0 + expect.abs()));
            }
        }
    }
}
