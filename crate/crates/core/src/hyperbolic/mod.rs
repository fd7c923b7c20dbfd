//! The model space H^n_K in hyperboloid coordinates: geometry, Brownian
//! motion generated by the Laplace–Beltrami operator, and heat kernels.

mod brownian;
mod heat;
mod point;

pub use brownian::{brownian_path, BrownianPath, BrownianStepper, PathSeed};
pub use heat::{
    heat_kernel, heat_semigroup_apply, ln_heat_kernel, HeatKernelMode, RadialFunction, RadialProfile,
    SemigroupMethod, SemigroupValue,
};
pub use point::{distance, exp_map, log_map, minkowski, ModelPoint};
pub(crate) use heat::ln_p1_n3;
#[allow(unused_imports)]
pub(crate) use point::distance_unchecked;
