//! Physics losses evaluated by explicit finite element differentiation: the
//! hard boundary-condition ansatz, variational energy losses whose nodal
//! gradients are exactly the FEM residuals, the strong-form Poisson loss, and
//! the chain rule that feeds those analytic gradients into the operator tape.

mod ansatz;
mod losses;
mod poisson_strong;
#[cfg(test)]
mod tests;

pub use ansatz::BcAnsatz;
pub use losses::{
    backprop_through_loss, LinearEnergy, LossBundle, NeoHookeanEnergy, PoissonVariational,
};
pub use poisson_strong::PoissonStrong;
