//! Fairness-aware kernel methods for continuous protected attributes.
//!
//! The central piece is [`decomposition`]: an iterated transformation of a
//! kernel matrix that removes the information a ridge regressor could use to
//! predict the protected attributes, while keeping the kernel positive
//! semi-definite. The resulting transformation applies to test-vs-train
//! cross kernels, so any kernel regressor can consume it.
//!
//! ```
//! use fair_kernel::prelude::*;
//! use nalgebra::DMatrix;
//!
//! let x = FeatureMatrix::new(DMatrix::from_fn(20, 2, |i, j| ((i * 3 + j) as f64).sin())).unwrap();
//! let p = ProtectedAttributes::from_column(
//!     &(0..20).map(|i| x.as_matrix()[(i, 0)].cos()).collect::<Vec<_>>(),
//! ).unwrap();
//! let k = rbf_kernel(&x, RbfParams::default());
//! let (k_fair, transform) = decompose(&k, &p, DecompositionParams::new(3, 0.1)).unwrap();
//! assert_eq!(transform.iterations(), 3);
//! assert_eq!(k_fair.nrows(), 20);
//! ```

pub mod container;
pub mod dataset;
pub mod decomposition;
pub mod error;
pub mod experiment;
pub mod kernels;
pub mod linalg;
pub mod metrics;
pub mod nystroem;
pub mod oracle;
pub mod regressors;
pub mod synthetic;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::decomposition::{
        apply_transform, decompose, residual_protected_norm, Decomposer, DecompositionParams,
        FairTransform, InverseMode, ProtectedAttributes, TransformStorage,
    };
    pub use crate::error::{Error, Result};
    pub use crate::kernels::{
        linear_kernel, rbf_cross_kernel, rbf_kernel, FeatureMatrix, KernelMatrix, RbfParams,
    };
    pub use crate::nystroem::{nystroem_inverse, NystroemParams};
    pub use crate::regressors::{
        dummy_fit, dummy_predict, krr_fit, krr_predict, svr_fit, svr_predict, DummyModel, KrrModel,
        SvrModel, SvrParams,
    };
}
