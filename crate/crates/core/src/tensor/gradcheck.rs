use super::{Tape, Tensor, Var};
use crate::error::{Error, Result};

/// Largest relative disagreement between the tape's gradient and a central
/// difference, over every coordinate of every input:
/// `|analytic − numeric| / max(1, |analytic|)`.
///
/// `f` must build a scalar on the given tape from leaves holding `inputs`.
pub fn grad_check<F>(f: F, inputs: &[Tensor], eps: f64) -> Result<f64>
where
    F: Fn(&Tape, &[Var]) -> Result<Var>,
{
    if !(1e-7..=1e-3).contains(&eps) {
        return Err(Error::Usage(format!(
            "grad_check eps {eps} outside [1e-7, 1e-3]"
        )));
    }
    let tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
    let loss = f(&tape, &vars)?;
    let grads = tape.backward(loss)?;

    let eval = |inputs: &[Tensor]| -> Result<f64> {
        let tape = Tape::new();
        let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
        let out = f(&tape, &vars)?;
        let v = tape.value(out).item();
        Ok(v)
    };

    let mut worst = 0.0f64;
    let mut probe = inputs.to_vec();
    for (i, &var) in vars.iter().enumerate() {
        let analytic = grads
            .get(var)
            .cloned()
            .unwrap_or_else(|| inputs[i].map(|_| 0.0));
        for j in 0..inputs[i].len() {
            let orig = inputs[i].data()[j];
            probe[i].data_mut()[j] = orig + eps;
            let plus = eval(&probe)?;
            probe[i].data_mut()[j] = orig - eps;
            let minus = eval(&probe)?;
            probe[i].data_mut()[j] = orig;
            let numeric = (plus - minus) / (2.0 * eps);
            let a = analytic.data()[j];
            worst = worst.max((a - numeric).abs() / a.abs().max(1.0));
        }
    }
    Ok(worst)
}
