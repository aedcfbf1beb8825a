use serde::{Deserialize, Serialize};

use crate::models::Params;
use crate::nncore::Scalar;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            alpha: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config("ADAM betas must lie in [0, 1)".into()));
        }
        if !(self.alpha >= 0.0) || !self.alpha.is_finite() {
            return Err(Error::Config("learning rate must be a nonnegative number".into()));
        }
        if !(self.eps > 0.0) || !self.eps.is_finite() {
            return Err(Error::Config("ADAM epsilon must be positive".into()));
        }
        Ok(())
    }
}

/// First and second moment estimates, one array per parameter key.
#[derive(Clone, Debug)]
pub struct AdamState<F> {
    pub config: AdamConfig,
    pub m: Params<F>,
    pub v: Params<F>,
    pub t: u64,
}

impl<F: Scalar> AdamState<F> {
    pub fn new(params: &Params<F>, config: AdamConfig) -> Result<Self> {
        config.validate()?;
        Ok(AdamState {
            config,
            m: params.zeros_like(),
            v: params.zeros_like(),
            t: 0,
        })
    }

    /// One bias-corrected update. Gradients must already be clipped.
    /// Non-finite gradients abort without touching the parameters.
    pub fn step(&mut self, params: &mut Params<F>, grads: &Params<F>) -> Result<()> {
        if !grads.all_finite() {
            return Err(Error::NonFinite("gradient".into()));
        }
        self.t += 1;
        let c = &self.config;
        let (b1, b2) = (F::of(c.beta1), F::of(c.beta2));
        let one = F::one();
        let alpha = F::of(c.alpha);
        let eps = F::of(c.eps);
        let bc1 = one - F::of(c.beta1.powi(self.t as i32));
        let bc2 = one - F::of(c.beta2.powi(self.t as i32));
        let keys = params.tensors_mut().into_iter();
        let moments = self.m.tensors_mut().into_iter().zip(self.v.tensors_mut());
        for (((_, mut p), (_, g)), ((_, mut m), (_, mut v))) in keys.zip(grads.tensors()).zip(moments) {
            let p = p.as_slice_mut().expect("standard layout");
            let m = m.as_slice_mut().expect("standard layout");
            let v = v.as_slice_mut().expect("standard layout");
            for (i, &g) in g.iter().enumerate() {
                m[i] = b1 * m[i] + (one - b1) * g;
                v[i] = b2 * v[i] + (one - b2) * g * g;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p[i] -= alpha * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
