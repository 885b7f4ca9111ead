//! Grid-free walk-on-spheres solver for screened Poisson problems, with
//! differential walks for shape derivatives and a stochastic shape optimizer.
//!
//! All numerical code is generic over [`Real`]; the aliases below fix the
//! scalar to `f64`.

pub mod bvp;
pub mod config;
pub mod diff;
pub mod error;
pub mod forward;
pub mod functional;
pub mod geometry;
pub mod grid;
pub mod harness;
pub mod kernels;
pub mod optimizer;
pub mod rng;
pub mod scalar;
pub mod sparse;
pub mod vector;

pub use bvp::{AmbientField, Bvp, DirichletData, SourceField};
pub use config::{Scene, SceneConfig};
pub use diff::{coupled_walks, diff_wos, estimate_derivative_grid, estimate_derivative_point, fd_reference_gradient};
pub use error::{Error, Result};
pub use forward::{estimate_grid, estimate_point, wos_solve, NormalDerivativeMethod, PointEstimate, SolverConfig};
pub use functional::{
    estimate_functional, functional_gradient, product_estimate, FunctionalSpec, Loss, Mask, ProductEstimator,
    ProductEstimatorConfig, Reference,
};
pub use geometry::{
    BezierChain, Boundary, BoundaryQuery, ImplicitMonopoles, Monopole, ParamInfo, ParamRole, PolylineBoundary, Shape2,
    SpherePrimitive, SphereSet,
};
pub use grid::GridField;
pub use optimizer::{optimize, IterationRecord, Optimizable, OptimizerConfig};
pub use rng::RngStream;
pub use scalar::Real;
pub use sparse::SparseVec;
pub use vector::Vector;

pub type Vec2 = Vector<f64, 2>;
pub type Vec3 = Vector<f64, 3>;
pub type Polyline = PolylineBoundary<f64>;
pub type Bezier = BezierChain<f64>;
pub type Monopoles2 = ImplicitMonopoles<f64, 2>;
pub type Spheres2 = SphereSet<f64, 2>;
pub type Spheres3 = SphereSet<f64, 3>;
pub type Shape = Shape2<f64>;
pub type Problem2 = Bvp<f64, 2>;
pub type Problem3 = Bvp<f64, 3>;
pub type Solver = SolverConfig<f64>;
pub type Functional2 = FunctionalSpec<f64, 2>;
pub type Grid = GridField<f64>;
pub type Optimizer = OptimizerConfig<f64>;
