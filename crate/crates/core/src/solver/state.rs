use crate::diophantine::BackgroundField;
use crate::error::{precondition, Error, Result};
use crate::spectral::{SpectralGrid, SpectralVectorField};

/// Divergence residual accepted for user-supplied states.
pub const DIV_TOLERANCE: f64 = 1e-12;
/// Hermitian residual accepted for user-supplied states.
pub const HERMITIAN_TOLERANCE: f64 = 1e-13;

/// Perturbation `(v, b)` around the background field at time `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct SimulationState {
    pub v: SpectralVectorField,
    pub b: SpectralVectorField,
    pub t: f64,
    pub step_count: u64,
    pub bf: BackgroundField,
}

impl SimulationState {
    /// State at `t = 0` after checking grids, zero means, divergence and
    /// Hermitian symmetry.
    pub fn new(v: SpectralVectorField, b: SpectralVectorField, bf: BackgroundField) -> Result<Self> {
        let state = Self {
            v,
            b,
            t: 0.0,
            step_count: 0,
            bf,
        };
        state.validate()?;
        Ok(state)
    }

    pub fn zeros(grid: &SpectralGrid, bf: BackgroundField) -> Result<Self> {
        Self::new(SpectralVectorField::zeros(grid), SpectralVectorField::zeros(grid), bf)
    }

    pub fn grid(&self) -> &SpectralGrid {
        self.v.grid()
    }

    pub fn validate(&self) -> Result<()> {
        if self.v.grid() != self.b.grid() {
            return Err(Error::Dimension("v and b live on different grids".into()));
        }
        if self.v.grid().dim() != self.bf.dim() {
            return Err(Error::Dimension(format!(
                "grid dimension {} vs background dimension {}",
                self.v.grid().dim(),
                self.bf.dim()
            )));
        }
        if !(self.v.is_finite() && self.b.is_finite()) {
            return precondition("state fields must be finite");
        }
        if !(self.v.is_mean_zero() && self.b.is_mean_zero()) {
            return precondition("state fields must have zero mean");
        }
        let div = self.v.div_residual().max(self.b.div_residual());
        if div > DIV_TOLERANCE {
            return precondition(format!("state is not divergence-free (residual {div:.3e})"));
        }
        let herm = self.v.hermitian_residual().max(self.b.hermitian_residual());
        if herm > HERMITIAN_TOLERANCE {
            return precondition(format!("state is not Hermitian (residual {herm:.3e})"));
        }
        Ok(())
    }

    /// The mirrored state with `b -> -b` and `btilde -> -btilde`.
    pub fn mirrored(&self) -> Self {
        let mut out = self.clone();
        out.b.scale(-1.0);
        out.bf = self.bf.negated();
        out
    }
}
