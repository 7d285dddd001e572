use super::params::{ParamId, ParamStore};
use super::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One bias-corrected Adam update of a flat parameter slice. `t` is the
/// 1-based step number. Leaves everything untouched when `grad` has a
/// non-finite entry.
pub fn adam_update(
    param: &mut [f64],
    grad: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    t: u64,
    cfg: &AdamConfig,
) -> Result<()> {
    if param.len() != grad.len() || m.len() != grad.len() || v.len() != grad.len() {
        return Err(Error::shape(
            "adam: parameter, gradient and moment lengths differ",
        ));
    }
    if let Some(g) = grad.iter().find(|g| !g.is_finite()) {
        return Err(Error::Optim(format!("non-finite gradient {g}")));
    }
    let bc1 = 1.0 - cfg.beta1.powi(t as i32);
    let bc2 = 1.0 - cfg.beta2.powi(t as i32);
    for i in 0..param.len() {
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * grad[i];
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
        let mhat = m[i] / bc1;
        let vhat = v[i] / bc2;
        param[i] -= cfg.lr * mhat / (vhat.sqrt() + cfg.eps);
    }
    Ok(())
}

/// Adam over a [`ParamStore`], with moments kept per parameter id.
#[derive(Debug, Clone)]
pub struct Adam {
    pub config: AdamConfig,
    step: u64,
    moments: Vec<Option<(Tensor, Tensor)>>,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Self {
        Self {
            config,
            step: 0,
            moments: Vec::new(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn moments(&self, id: ParamId) -> Option<(&Tensor, &Tensor)> {
        self.moments
            .get(id.index())
            .and_then(Option::as_ref)
            .map(|(m, v)| (m, v))
    }

    /// Applies one step. All gradients are validated before any parameter
    /// changes, so a rejected step leaves the store and state intact.
    pub fn step(&mut self, store: &mut ParamStore, grads: &[(ParamId, Tensor)]) -> Result<()> {
        for (id, g) in grads {
            if !g.same_shape(store.get(*id)) {
                return Err(Error::shape(format!(
                    "gradient for `{}` is {:?}, parameter is {:?}",
                    store.name(*id),
                    g.shape(),
                    store.get(*id).shape()
                )));
            }
            if !g.is_finite() {
                return Err(Error::Optim(format!(
                    "non-finite gradient for `{}`",
                    store.name(*id)
                )));
            }
        }
        self.step += 1;
        if self.moments.len() < store.len() {
            self.moments.resize_with(store.len(), || None);
        }
        for (id, g) in grads {
            let p = store.get_mut(*id);
            let (m, v) =
                self.moments[id.index()].get_or_insert_with(|| (p.map(|_| 0.0), p.map(|_| 0.0)));
            adam_update(
                p.data_mut(),
                g.data(),
                m.data_mut(),
                v.data_mut(),
                self.step,
                &self.config,
            )?;
        }
        Ok(())
    }
}
