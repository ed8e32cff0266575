//! Acceleration measurement model `h(y) = −M⁻¹(G + Kx + Cẋ)` restricted to
//! the observed DOFs. The external force is not part of `h`.

use nalgebra::DVector;

use super::state_space::StateSpaceModel;
use crate::error::{Result, TwinError};

#[derive(Clone, Debug)]
pub struct AccelerationModel {
    model: StateSpaceModel,
    observed: Vec<usize>,
}

pub fn acceleration_model(model: &StateSpaceModel, observed_dofs: &[usize]) -> Result<AccelerationModel> {
    if observed_dofs.is_empty() {
        return Err(TwinError::EmptySelection("observed DOF set"));
    }
    let n = model.n_dof();
    for (pos, &d) in observed_dofs.iter().enumerate() {
        if d >= n {
            return Err(TwinError::IndexOutOfRange {
                context: "observed DOF",
                index: d,
                len: n,
            });
        }
        if observed_dofs[..pos].contains(&d) {
            return Err(TwinError::invalid("observed_dofs", format!("DOF {d} listed twice")));
        }
    }
    Ok(AccelerationModel {
        model: model.clone(),
        observed: observed_dofs.to_vec(),
    })
}

impl AccelerationModel {
    pub fn observed(&self) -> &[usize] {
        &self.observed
    }

    pub fn output_dim(&self) -> usize {
        self.observed.len()
    }

    pub fn evaluate(&self, y: &DVector<f64>) -> DVector<f64> {
        let acc = self.model.restoring_acceleration(y.as_slice());
        DVector::from_iterator(self.observed.len(), self.observed.iter().map(|&d| acc[d]))
    }
}
