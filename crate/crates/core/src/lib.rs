//! Matrix product states with kept/discarded projector algebra.
//!
//! The crate builds everything from dense [`Tensor`]s with named legs:
//! canonical-form MPS, MPO Hamiltonians, the hierarchy of local, global and
//! irreducible n-site projectors, DMRG ground-state search, the n-site energy
//! variance and the n-site excitation ansatz. The [`ed`] module provides a
//! brute-force dense reference for small chains.

pub mod blob;
pub mod dmrg;
pub mod ed;
pub mod error;
pub mod excitation;
pub mod lanczos;
pub mod linalg;
pub mod mpo;
pub mod mps;
pub mod projectors;
pub mod scalar;
pub mod tensor;
pub mod variance;

pub use dmrg::{build_env, dmrg_ground_state, dmrg_orthogonal, DmrgMode, DmrgOpts, DmrgResult, EnvCache};
pub use ed::{dense_hamiltonian, exact_spectrum, verify_identity_suite, IdentityReport};
pub use error::{Error, Result};
pub use excitation::{
    apply_projected_h, build_exc_env, ex_axpy, ex_overlap, init_excitation, solve_lowest_excitation, AnsatzBasis,
    ExcitationOpts, ExcitationResult, ExcitationState,
};
pub use lanczos::{lanczos_lowest, LanczosOpts, LanczosResult};
pub use scalar::Scalar;
pub use variance::{cumulative_variance, nsite_variance, VarianceReport};
pub use tensor::{contract, orthogonal_complement, svd_split, SvdSplit, Tensor, TruncationPolicy};

pub use mpo::{
    expectation, haldane_shastry_mpo, heisenberg_mpo, mpo_add, mpo_sum_compress, Mpo,
};
pub use mps::{
    canonicalize, mps_add, overlap, product_state, random_mps, shift_center, CanonicalForm,
    CanonicalTarget, Direction, Mps,
};
pub use projectors::{
    apply_projector, build_bases, dense_projector, subspace_dimension, Bases, ProjectorSpec,
    ProjectorSum, Sector, Side,
};

pub type TensorF64 = Tensor<f64>;
pub type TensorF32 = Tensor<f32>;
pub type MpsF64 = Mps<f64>;
pub type MpsF32 = Mps<f32>;
pub type MpoF64 = Mpo<f64>;
pub type MpoF32 = Mpo<f32>;
