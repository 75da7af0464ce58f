//! Special functions, random sampling, quadrature, and series-truncation
//! utilities shared by all other modules.

pub mod quadrature;
pub mod rng;
pub mod series;
pub mod special;

pub use quadrature::{integrate, Quadrature};
pub use rng::{sample_exponential, sample_noncentral_chisq, RngStream};
pub use series::truncate_geometric_series;
pub use special::{erf, erfc, inverse_normal_cdf, normal_cdf};
