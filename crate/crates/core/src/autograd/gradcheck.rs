//! Comparison of analytic gradients against central finite differences.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::tensor::Tensor;

use super::{Tape, Var};

#[derive(Debug, Clone)]
pub struct GradCheckOptions {
    /// Finite-difference step.
    pub h: f64,
    /// Maximum accepted error per element.
    pub tol: f64,
    /// Below this magnitude (of both gradients) the absolute difference is
    /// used instead of the relative one.
    pub abs_floor: f64,
    /// Check at most this many coordinates per input, sampled with `seed`.
    pub max_coords: Option<usize>,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            h: 1e-5,
            tol: 1e-4,
            abs_floor: 1e-6,
            max_coords: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GradCheckEntry {
    pub input: usize,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub error: f64,
    /// Whether `error` is an absolute rather than relative difference.
    pub absolute: bool,
    pub passed: bool,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub entries: Vec<GradCheckEntry>,
    pub max_rel_err: f64,
    pub passed: bool,
}

/// Checks `f`'s gradient with respect to a single input tensor.
pub fn grad_check<F>(f: F, x: &Tensor, h: f64, tol: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    let opts = GradCheckOptions {
        h,
        tol,
        ..Default::default()
    };
    grad_check_many(|tape, vars| f(tape, vars[0]), std::slice::from_ref(x), &opts)
}

/// Checks `f`'s gradient with respect to every input tensor. `f` must be
/// deterministic and return a scalar.
pub fn grad_check_many<F>(f: F, inputs: &[Tensor], opts: &GradCheckOptions) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let eval = |values: &[Tensor]| -> Result<f64> {
        let mut tape = Tape::no_grad();
        let vars: Vec<Var> = values.iter().map(|t| tape.constant(t.clone())).collect();
        let out = f(&mut tape, &vars)?;
        Ok(tape.value(out).item())
    };

    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.param(t.clone())).collect();
    let out = f(&mut tape, &vars)?;
    tape.backward(out)?;
    let analytic: Vec<Vec<f64>> = vars
        .iter()
        .zip(inputs)
        .map(|(&v, t)| tape.grad(v).map_or_else(|| vec![0.0; t.numel()], <[f64]>::to_vec))
        .collect();
    drop(tape);

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut perturbed = inputs.to_vec();
    let mut entries = Vec::new();
    for (input, grads) in analytic.iter().enumerate() {
        let n = grads.len();
        let coords: Vec<usize> = match opts.max_coords {
            Some(k) if k < n => {
                let mut c = sample(&mut rng, n, k).into_vec();
                c.sort_unstable();
                c
            }
            _ => (0..n).collect(),
        };
        for index in coords {
            let orig = inputs[input].data()[index];
            perturbed[input].data_mut()[index] = orig + opts.h;
            let plus = eval(&perturbed)?;
            perturbed[input].data_mut()[index] = orig - opts.h;
            let minus = eval(&perturbed)?;
            perturbed[input].data_mut()[index] = orig;

            let numeric = (plus - minus) / (2.0 * opts.h);
            let a = grads[index];
            let scale = a.abs().max(numeric.abs());
            let absolute = scale < opts.abs_floor;
            let error = if absolute {
                (a - numeric).abs()
            } else {
                (a - numeric).abs() / scale
            };
            entries.push(GradCheckEntry {
                input,
                index,
                analytic: a,
                numeric,
                error,
                absolute,
                passed: error < opts.tol,
            });
        }
    }
    let max_rel_err = entries.iter().map(|e| e.error).fold(0.0, f64::max);
    let passed = entries.iter().all(|e| e.passed);
    Ok(GradCheckReport {
        entries,
        max_rel_err,
        passed,
    })
}
