//! Numerical Finsler geometry at desk scale.
//!
//! The crate evaluates Finsler metrics `F` through their squared form
//! `G = F²`, differentiates them with truncated Taylor jets, and assembles
//! the standard tensor zoo — fundamental tensor, geodesic spray, nonlinear
//! connection, Cartan and Berwald connection coefficients, Berwald and
//! Landsberg curvatures — at chosen points of the slit tangent bundle.
//! On top of that sit sampling-based classification (Berwald / weakly
//! Berwald / Landsberg / weakly Landsberg) and a verification harness for
//! Minkowskian product metrics `F = √(f(F₁², F₂²))`, whose block identities
//! are checked numerically against independently computed factor tensors.
//!
//! ```
//! use finsler_core::classify::{self, SamplerConfig};
//! use finsler_core::metrics::builtins;
//! use finsler_core::product::{minkowski_product, ProductFunction};
//!
//! // Product of two Berwald factors through f = s + t + 2ε√(st).
//! let product = minkowski_product(
//!     builtins::sphere(),
//!     builtins::mroot4(2),
//!     ProductFunction::eps_sqrt(0.5),
//! ).expect("factors and function satisfy the product conditions");
//!
//! let sampler = SamplerConfig { count: 25, seed: 7, ..SamplerConfig::default() };
//! let report = classify::classify(&product, &sampler, 1e-6).unwrap();
//! assert!(report.holds("berwald"));
//! ```

pub mod jets;
pub mod mexpr;
pub mod metrics;
pub mod product;
pub mod tensors;
pub mod classify;
pub mod config;

pub use classify::{ClassificationReport, SamplerConfig, TheoremReport};
pub use metrics::{MetricSpec, SamplePoint};
pub use product::{ProductFunction, ProductMetric};
pub use tensors::TensorFrame;
