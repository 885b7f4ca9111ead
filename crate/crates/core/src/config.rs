//! TOML scene description for planar problems.
//!
//! Geometry, masks and fields use absolute coordinates. The solver lengths
//! `epsilon`, `offset` and the implicit band width are fractions of the
//! geometry's bounding-box extent. Relative paths resolve against the
//! directory holding the config file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bvp::{AmbientField, Bvp, DirichletData, SourceField};
use crate::error::{Error, Result};
use crate::forward::{NormalDerivativeMethod, SolverConfig};
use crate::functional::{
    BoundaryLoss, FunctionalSpec, Loss, Mask, ProductEstimator, ProductEstimatorConfig, Reference, Regularizer,
    RegularizerKind,
};
use crate::geometry::{BezierChain, Boundary, ImplicitMonopoles, Monopole, PolylineBoundary, Shape2, SpherePrimitive, SphereSet};
use crate::grid::GridField;
use crate::optimizer::OptimizerConfig;
use crate::vector::Vector;

type V2 = Vector<f64, 2>;

fn v2(p: [f64; 2]) -> V2 {
    Vector::new(p[0], p[1])
}

fn arr(v: &V2) -> [f64; 2] {
    [v[0], v[1]]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    pub geometry: GeometryConfig,
    pub bvp: BvpConfig,
    #[serde(default)]
    pub functional: FunctionalConfig,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub optimizer: OptimizerConfig<f64>,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegularShape {
    pub center: [f64; 2],
    pub radius: f64,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoleConfig {
    pub scale: f64,
    pub position: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SphereConfig {
    pub center: [f64; 2],
    pub radius: f64,
    #[serde(default = "yes")]
    pub solid: bool,
    #[serde(default)]
    pub value: f64,
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeometryConfig {
    /// Explicit `vertices` (with optional `loops`) or a `regular` polygon.
    Polyline {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        vertices: Option<Vec<[f64; 2]>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        loops: Option<Vec<Vec<usize>>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        regular: Option<RegularShape>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        values: Option<Vec<f64>>,
    },
    /// Per segment `[anchor, out handle, in handle of next anchor]`, or a
    /// `circle` of smooth segments.
    Bezier {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        controls: Option<Vec<[[f64; 2]; 3]>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        circle: Option<RegularShape>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        smooth: Option<Vec<bool>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        values: Option<Vec<f64>>,
    },
    Monopoles { offset: f64, poles: Vec<PoleConfig> },
    Spheres { spheres: Vec<SphereConfig> },
}

impl GeometryConfig {
    pub fn build(&self) -> Result<Shape2<f64>> {
        match self {
            GeometryConfig::Polyline { vertices, loops, regular, values } => {
                let mut p = match (vertices, regular) {
                    (Some(v), None) => {
                        let verts: Vec<V2> = v.iter().copied().map(v2).collect();
                        let loops = loops.clone().unwrap_or_else(|| vec![(0..verts.len()).collect()]);
                        PolylineBoundary::new(verts, loops)?
                    }
                    (None, Some(r)) if loops.is_none() => PolylineBoundary::regular(v2(r.center), r.radius, r.count)?,
                    _ => return Err(Error::Config("polyline needs either vertices or regular".into())),
                };
                if let Some(v) = values {
                    p = p.with_values(v.clone())?;
                }
                Ok(Shape2::Polyline(p))
            }
            GeometryConfig::Bezier { controls, circle, smooth, values } => {
                let mut b = match (controls, circle) {
                    (Some(c), None) => BezierChain::new(c.iter().map(|s| [v2(s[0]), v2(s[1]), v2(s[2])]).collect())?,
                    (None, Some(r)) => BezierChain::circle(v2(r.center), r.radius, r.count)?,
                    _ => return Err(Error::Config("bezier needs either controls or circle".into())),
                };
                if let Some(s) = smooth {
                    b = b.with_smooth(s.clone())?;
                }
                if let Some(v) = values {
                    b = b.with_values(v.clone())?;
                }
                Ok(Shape2::Bezier(b))
            }
            GeometryConfig::Monopoles { offset, poles } => {
                let poles = poles.iter().map(|p| Monopole { scale: p.scale, position: v2(p.position) }).collect();
                Ok(Shape2::Monopoles(ImplicitMonopoles::new(*offset, poles)?))
            }
            GeometryConfig::Spheres { spheres } => {
                let s = spheres
                    .iter()
                    .map(|s| SpherePrimitive { center: v2(s.center), radius: s.radius, solid: s.solid, value: s.value })
                    .collect();
                Ok(Shape2::Spheres(SphereSet::new(s)?))
            }
        }
    }

    /// Explicit description of a shape's current state.
    pub fn from_shape(shape: &Shape2<f64>) -> Self {
        match shape {
            Shape2::Polyline(p) => GeometryConfig::Polyline {
                vertices: Some(p.vertices().iter().map(arr).collect()),
                loops: Some(p.loops().to_vec()),
                regular: None,
                values: p.values().map(<[f64]>::to_vec),
            },
            Shape2::Bezier(b) => GeometryConfig::Bezier {
                controls: Some(
                    (0..b.segment_count())
                        .map(|i| {
                            let c = b.controls(i);
                            [arr(&c[0]), arr(&c[1]), arr(&c[2])]
                        })
                        .collect(),
                ),
                circle: None,
                smooth: Some(b.smooth_flags().to_vec()),
                values: b.values().map(<[f64]>::to_vec),
            },
            Shape2::Monopoles(m) => GeometryConfig::Monopoles {
                offset: m.offset(),
                poles: m.poles().iter().map(|p| PoleConfig { scale: p.scale, position: arr(&p.position) }).collect(),
            },
            Shape2::Spheres(s) => GeometryConfig::Spheres {
                spheres: s
                    .spheres()
                    .iter()
                    .map(|s| SphereConfig { center: arr(&s.center), radius: s.radius, solid: s.solid, value: s.value })
                    .collect(),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldConfig {
    Constant { value: f64 },
    /// `gradient·x + constant`.
    Linear {
        gradient: [f64; 2],
        #[serde(default)]
        constant: f64,
    },
    /// `xᵀ A x + linear·x + constant`.
    Quadratic {
        matrix: [[f64; 2]; 2],
        #[serde(default)]
        linear: [f64; 2],
        #[serde(default)]
        constant: f64,
    },
    /// `Σ c xᵃ yᵇ`.
    Polynomial { terms: Vec<MonomialConfig> },
    Grid {
        path: PathBuf,
        #[serde(default)]
        channel: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonomialConfig {
    pub powers: [u32; 2],
    pub coefficient: f64,
}

impl FieldConfig {
    fn ambient(&self, base: &Path) -> Result<AmbientField<f64, 2>> {
        match self {
            FieldConfig::Constant { value } => Ok(AmbientField::linear(V2::zero(), *value)),
            FieldConfig::Linear { gradient, constant } => Ok(AmbientField::linear(v2(*gradient), *constant)),
            FieldConfig::Quadratic { matrix, linear, constant } => {
                Ok(AmbientField::Quadratic { matrix: *matrix, linear: v2(*linear), constant: *constant })
            }
            FieldConfig::Polynomial { terms } => Ok(AmbientField::Polynomial {
                terms: terms.iter().map(|t| (t.powers, t.coefficient)).collect(),
            }),
            FieldConfig::Grid { path, channel } => AmbientField::grid(load_grid(base, path)?, *channel),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceConfig {
    Zero,
    Constant { value: f64 },
    Grid { path: PathBuf },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DirichletConfig {
    Constant { value: f64 },
    /// Restriction of an ambient field.
    Field { field: FieldConfig },
    /// Values carried by the geometry.
    Mapped,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BvpConfig {
    #[serde(default)]
    pub sigma: f64,
    #[serde(default = "zero_source")]
    pub source: SourceConfig,
    pub dirichlet: DirichletConfig,
}

fn zero_source() -> SourceConfig {
    SourceConfig::Zero
}

impl BvpConfig {
    pub fn build(&self, base: &Path) -> Result<Bvp<f64, 2>> {
        let source = match &self.source {
            SourceConfig::Zero => SourceField::Zero,
            SourceConfig::Constant { value } => SourceField::Constant(*value),
            SourceConfig::Grid { path } => SourceField::Grid(load_grid(base, path)?),
        };
        let data = match &self.dirichlet {
            DirichletConfig::Constant { value } => DirichletData::Constant(*value),
            DirichletConfig::Field { field } => DirichletData::Restricted(field.ambient(base)?),
            DirichletConfig::Mapped => DirichletData::Mapped,
        };
        Bvp::new(self.sigma, source, data)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LossConfig {
    Squared,
    L1Smooth { delta: f64 },
    Table { errors: Vec<f64>, values: Vec<f64>, slopes: Vec<f64> },
}

impl LossConfig {
    fn build(&self) -> Result<Loss<f64>> {
        match self {
            LossConfig::Squared => Ok(Loss::Squared),
            LossConfig::L1Smooth { delta } if *delta > 0.0 => Ok(Loss::L1Smooth { delta: *delta }),
            LossConfig::L1Smooth { .. } => Err(Error::Config("l1_smooth delta must be positive".into())),
            LossConfig::Table { errors, values, slopes } => Loss::table(errors.clone(), values.clone(), slopes.clone()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MaskConfig {
    All,
    Ball {
        center: [f64; 2],
        radius: f64,
    },
    Box {
        lo: [f64; 2],
        hi: [f64; 2],
    },
    Ring {
        center: [f64; 2],
        inner: f64,
        outer: f64,
    },
    Grid {
        path: PathBuf,
        #[serde(default)]
        channel: usize,
    },
}

impl MaskConfig {
    fn build(&self, base: &Path) -> Result<Mask<f64, 2>> {
        Ok(match self {
            MaskConfig::All => Mask::All,
            MaskConfig::Ball { center, radius } => Mask::Ball { center: v2(*center), radius: *radius },
            MaskConfig::Box { lo, hi } => Mask::Box { lo: v2(*lo), hi: v2(*hi) },
            MaskConfig::Ring { center, inner, outer } => Mask::Ring { center: v2(*center), inner: *inner, outer: *outer },
            MaskConfig::Grid { path, channel } => {
                let grid = load_grid(base, path)?;
                if *channel >= grid.channels() {
                    return Err(Error::Config("mask channel out of range".into()));
                }
                Mask::Grid { grid, channel: *channel }
            }
        })
    }
}

fn reference(field: &FieldConfig, base: &Path) -> Result<Reference<f64, 2>> {
    Ok(match field {
        FieldConfig::Constant { value } => Reference::Constant(*value),
        FieldConfig::Grid { path, channel } => {
            let grid = load_grid(base, path)?;
            if *channel >= grid.channels() {
                return Err(Error::Config("reference channel out of range".into()));
            }
            Reference::Grid { grid, channel: *channel }
        }
        f => Reference::Field(f.ambient(base)?),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryLossConfig {
    #[serde(default = "squared")]
    pub loss: LossConfig,
    #[serde(default = "all")]
    pub mask: MaskConfig,
    pub reference: FieldConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegularizerConfig {
    pub kind: RegularizerKind,
    pub strength: f64,
}

fn squared() -> LossConfig {
    LossConfig::Squared
}

fn all() -> MaskConfig {
    MaskConfig::All
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FunctionalConfig {
    pub loss: LossConfig,
    pub mask: MaskConfig,
    pub reference: FieldConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub boundary_loss: Option<BoundaryLossConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exterior_value: Option<f64>,
    pub regularizers: Vec<RegularizerConfig>,
    pub interior_samples: usize,
    pub boundary_samples: usize,
    /// Implicit band half-width, relative to the extent.
    pub band: f64,
}

impl Default for FunctionalConfig {
    fn default() -> Self {
        Self {
            loss: LossConfig::Squared,
            mask: MaskConfig::All,
            reference: FieldConfig::Constant { value: 0.0 },
            boundary_loss: None,
            exterior_value: None,
            regularizers: Vec::new(),
            interior_samples: 64,
            boundary_samples: 64,
            band: 1e-2,
        }
    }
}

impl FunctionalConfig {
    pub fn build(&self, base: &Path, extent: f64) -> Result<FunctionalSpec<f64, 2>> {
        if !(self.band > 0.0) {
            return Err(Error::Config("band must be positive".into()));
        }
        let mut spec = FunctionalSpec::squared(reference(&self.reference, base)?, self.mask.build(base)?);
        spec.loss = self.loss.build()?;
        spec.boundary_loss = match &self.boundary_loss {
            Some(b) => Some(BoundaryLoss {
                loss: b.loss.build()?,
                mask: b.mask.build(base)?,
                reference: reference(&b.reference, base)?,
            }),
            None => None,
        };
        spec.exterior_value = self.exterior_value;
        spec.regularizers = self.regularizers.iter().map(|r| Regularizer { kind: r.kind, strength: r.strength }).collect();
        spec.interior_samples = self.interior_samples;
        spec.boundary_samples = self.boundary_samples;
        spec.band = self.band * extent;
        Ok(spec)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    /// Shell width relative to the extent.
    pub epsilon: f64,
    /// Normal-derivative offset relative to the extent.
    pub offset: f64,
    pub wpp: usize,
    pub seed: u64,
    pub estimator: ProductEstimator,
    pub batch: usize,
    pub method: NormalDerivativeMethod,
    pub forward_walks: usize,
    pub max_steps: usize,
    pub russian_roulette: bool,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            epsilon: 1e-3,
            offset: 1e-2,
            wpp: 16,
            seed: 0,
            estimator: ProductEstimator::Ustat,
            batch: 8,
            method: NormalDerivativeMethod::Backward,
            forward_walks: 1,
            max_steps: 10_000,
            russian_roulette: true,
        }
    }
}

impl SolverSection {
    pub fn build(&self, extent: f64) -> Result<(SolverConfig<f64>, ProductEstimatorConfig)> {
        let cfg = SolverConfig {
            epsilon: self.epsilon * extent,
            offset: self.offset * extent,
            max_steps: self.max_steps,
            russian_roulette: self.russian_roulette,
            walks: self.wpp,
            seed: self.seed,
            method: self.method,
            forward_walks: self.forward_walks,
        };
        cfg.validate()?;
        Ok((cfg, ProductEstimatorConfig { kind: self.estimator, batch: self.batch }))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    /// Evaluation grid resolution `[nx, ny]`.
    pub grid: [usize; 2],
    /// Evaluation grid bounds `[lo, hi]`; defaults to the geometry bounds.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bounds: Option<[[f64; 2]; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub log: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scene: Option<PathBuf>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { grid: [32, 32], bounds: None, field: None, log: None, scene: None }
    }
}

/// Fully built problem.
#[derive(Clone, Debug)]
pub struct Scene {
    pub shape: Shape2<f64>,
    pub bvp: Bvp<f64, 2>,
    pub spec: FunctionalSpec<f64, 2>,
    pub solver: SolverConfig<f64>,
    pub estimator: ProductEstimatorConfig,
    pub optimizer: OptimizerConfig<f64>,
    pub output: OutputConfig,
    pub base_dir: PathBuf,
}

impl Scene {
    /// Evaluation grid bounds.
    pub fn grid_bounds(&self) -> (V2, V2) {
        match self.output.bounds {
            Some([lo, hi]) => (v2(lo), v2(hi)),
            None => self.shape.bounding_box(),
        }
    }

    pub fn output_path(&self, p: &Path) -> PathBuf {
        self.base_dir.join(p)
    }
}

fn load_grid(base: &Path, path: &Path) -> Result<GridField<f64>> {
    GridField::read_path(&base.join(path))
}

impl SceneConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: SceneConfig = toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s| text[..s.start].lines().count().max(1)).unwrap_or(0);
            Error::Parse { line, msg: e.message().to_string() }
        })?;
        cfg.optimizer.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn build(&self, base_dir: &Path) -> Result<Scene> {
        let shape = self.geometry.build()?;
        let extent = shape.extent();
        let bvp = self.bvp.build(base_dir)?;
        let spec = self.functional.build(base_dir, extent)?;
        let (solver, estimator) = self.solver.build(extent)?;
        if self.output.grid[0] == 0 || self.output.grid[1] == 0 {
            return Err(Error::Config("output grid must be at least 1x1".into()));
        }
        Ok(Scene {
            shape,
            bvp,
            spec,
            solver,
            estimator,
            optimizer: self.optimizer.clone(),
            output: self.output.clone(),
            base_dir: base_dir.to_path_buf(),
        })
    }

    /// Loads and builds, resolving paths against the file's directory.
    pub fn open(path: &Path) -> Result<(Self, Scene)> {
        let cfg = Self::load(path)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let scene = cfg.build(&base)?;
        Ok((cfg, scene))
    }
}
