//! Conditional flow matching mathematics: probability-path schedules, flow
//! maps, target vector fields, and the regression residual the refiner
//! network trains against. Pure functions, no network anywhere.
//!
//! The path used throughout the crate is the simplified linear one: a
//! Gaussian with mean `t*x1 + (1-t)*x0` and fixed standard deviation
//! `sigma`, whose generating vector field is the constant `x1 - x0`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::rng::fill_standard_normal;
use crate::tensor::{Elem, Tensor};

/// The conditioning tuple `z = (x0, x1)`: the refiner's prior point and the
/// clean target, both in the compressed TF domain.
#[derive(Clone, Debug)]
pub struct PathCondition<E> {
    x0: Tensor<E>,
    x1: Tensor<E>,
}

impl<E: Elem> PathCondition<E> {
    pub fn new(x0: Tensor<E>, x1: Tensor<E>) -> Result<Self> {
        x0.require_same_shape(&x1, "PathCondition::new", "x1")?;
        if !x0.is_finite() {
            return Err(CoreError::NonFinite {
                context: "PathCondition x0".into(),
            });
        }
        if !x1.is_finite() {
            return Err(CoreError::NonFinite {
                context: "PathCondition x1".into(),
            });
        }
        Ok(PathCondition { x0, x1 })
    }

    pub fn x0(&self) -> &Tensor<E> {
        &self.x0
    }

    pub fn x1(&self) -> &Tensor<E> {
        &self.x1
    }
}

/// A point `(x, t)` on the probability path, `t` in `[0, 1]`.
#[derive(Clone, Debug)]
pub struct FlowState<E> {
    pub x: Tensor<E>,
    pub t: E,
}

impl<E: Elem> FlowState<E> {
    pub fn new(x: Tensor<E>, t: E) -> Result<Self> {
        check_unit_time(t)?;
        Ok(FlowState { x, t })
    }
}

fn check_unit_time<E: Elem>(t: E) -> Result<()> {
    let tf = t.to_f64();
    if !(0.0..=1.0).contains(&tf) {
        return Err(CoreError::Domain(format!("t = {tf} outside [0, 1]")));
    }
    Ok(())
}

/// Fixed standard deviation of the Gaussian path.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SigmaConfig {
    pub sigma: f64,
}

impl Default for SigmaConfig {
    fn default() -> Self {
        SigmaConfig { sigma: 0.04 }
    }
}

impl SigmaConfig {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(CoreError::Config {
                field: "sigma".into(),
                constraint: format!("must be a positive finite number, got {sigma}"),
            });
        }
        Ok(SigmaConfig { sigma })
    }
}

/// A Gaussian-path schedule: mean and standard deviation as functions of
/// `(t, z)`, plus their time derivatives.
pub trait PathSchedule<E: Elem> {
    fn mu(&self, t: E, z: &PathCondition<E>) -> Tensor<E>;
    fn sigma(&self, t: E, z: &PathCondition<E>) -> E;
    fn dmu(&self, t: E, z: &PathCondition<E>) -> Tensor<E>;
    fn dsigma(&self, t: E, z: &PathCondition<E>) -> E;
}

/// The simplified schedule: `mu = t*x1 + (1-t)*x0`, constant `sigma`.
#[derive(Clone, Copy, Debug)]
pub struct SimplifiedSchedule<E> {
    sigma: E,
}

impl<E: Elem> SimplifiedSchedule<E> {
    pub fn new(cfg: SigmaConfig) -> Self {
        SimplifiedSchedule {
            sigma: E::from_f64(cfg.sigma),
        }
    }
}

impl<E: Elem> PathSchedule<E> for SimplifiedSchedule<E> {
    fn mu(&self, t: E, z: &PathCondition<E>) -> Tensor<E> {
        let one = E::one();
        z.x1().scale(t).zip(&z.x0().scale(one - t), |a, b| a + b)
    }

    fn sigma(&self, _t: E, _z: &PathCondition<E>) -> E {
        self.sigma
    }

    fn dmu(&self, _t: E, z: &PathCondition<E>) -> Tensor<E> {
        z.x1().sub(z.x0())
    }

    fn dsigma(&self, _t: E, _z: &PathCondition<E>) -> E {
        E::zero()
    }
}

/// Flow map `psi_t(eps) = sigma(t, z) * eps + mu(t, z)`.
pub fn flow_map<E: Elem>(
    eps: &Tensor<E>,
    t: E,
    sched: &impl PathSchedule<E>,
    z: &PathCondition<E>,
) -> Result<Tensor<E>> {
    check_unit_time(t)?;
    z.x0().require_same_shape(eps, "flow_map", "eps")?;
    let mut out = sched.mu(t, z);
    out.axpy(sched.sigma(t, z), eps);
    Ok(out)
}

/// Draw from `N(t*x1 + (1-t)*x0, sigma^2 I)` by pushing standard normal
/// noise through the flow map.
pub fn sample_path_point<E: Elem, R: Rng>(
    t: E,
    z: &PathCondition<E>,
    cfg: &SigmaConfig,
    rng: &mut R,
) -> Result<Tensor<E>> {
    let mut eps = vec![0.0f64; z.x0().numel()];
    fill_standard_normal(rng, &mut eps);
    let eps = Tensor::<E>::from_f64_slice(z.x0().shape(), &eps);
    flow_map(&eps, t, &SimplifiedSchedule::new(*cfg), z)
}

/// The unique vector field generating the flow of a Gaussian path:
/// `(dsigma/sigma) * (x - mu) + dmu`.
pub fn target_vector_field_general<E: Elem>(
    x: &Tensor<E>,
    t: E,
    sched: &impl PathSchedule<E>,
    z: &PathCondition<E>,
) -> Result<Tensor<E>> {
    let sigma = sched.sigma(t, z).to_f64();
    if !(sigma > 0.0) {
        return Err(CoreError::Domain(format!(
            "sigma(t, z) = {sigma} must be positive"
        )));
    }
    let mu = sched.mu(t, z);
    x.require_same_shape(&mu, "target_vector_field_general", "x")?;
    let ratio = sched.dsigma(t, z) / sched.sigma(t, z);
    let mut out = sched.dmu(t, z);
    for ((o, &xv), &mv) in out.data_mut().iter_mut().zip(x.data()).zip(mu.data()) {
        *o = *o + ratio * (xv - mv);
    }
    Ok(out)
}

/// Under the simplified schedule the field collapses to `x1 - x0`,
/// independent of `x` and `t`.
pub fn target_vector_field_simplified<E: Elem>(z: &PathCondition<E>) -> Tensor<E> {
    z.x1().sub(z.x0())
}

/// Mean squared error between a predicted field and the simplified target
/// `x1 - x0`. Mean reduction over all entries keeps loss weights
/// scale-free across signal lengths.
pub fn cfm_regression_residual<E: Elem>(v_pred: &Tensor<E>, z: &PathCondition<E>) -> Result<f64> {
    z.x0()
        .require_same_shape(v_pred, "cfm_regression_residual", "v_pred")?;
    let n = v_pred.numel();
    let mut acc = 0.0f64;
    for ((&v, &x1), &x0) in v_pred.data().iter().zip(z.x1().data()).zip(z.x0().data()) {
        let d = v.to_f64() - (x1.to_f64() - x0.to_f64());
        acc += d * d;
    }
    Ok(acc / n as f64)
}
