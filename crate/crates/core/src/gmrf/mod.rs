//! Gaussian Markov random field precision builders and the spatial mesh.

mod mesh;
mod precision;
mod spde;

pub use mesh::{
    build_mesh, convex_hull, projection_matrix, projection_matrix_km, GeoProjection, Mesh,
    MeshJson, MeshParams, ProjectionMatrix, EARTH_RADIUS_KM,
};
pub use precision::{
    ar1_logdet, ar1_precision, ar1_triplets, kron_group, replicate, rw1_constrained_logdet,
    rw1_precision, SparsePrecision, SumToZero, SOFT_CONSTRAINT_PRECISION,
};
pub use spde::{kappa_from_range, spde_precision, tau_from_sd, SpdeOperator, SpdeParams};
