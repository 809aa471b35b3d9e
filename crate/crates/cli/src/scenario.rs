//! Scenario files: JSON, versioned by the `schema` field.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use resolvent_lab::composite::{checkerboard, LocalOperator};
use resolvent_lab::io;
use resolvent_lab::linalg::{cr, CMat, C64};
use resolvent_lab::projector::{
    conductivity_projector, identity_projector, vector_gradient_projector, ProjectorFamily, ProjectorSpec,
    ZeroModePolicy,
};
use resolvent_lab::random;
use resolvent_lab::resolvent::SolveMethod;
use resolvent_lab::PeriodicGrid;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::failure::Failure;

pub const SCHEMA_VERSION: u32 = 1;

/// A complex number written as a bare real or as `[re, im]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cx {
    Real(f64),
    Pair([f64; 2]),
}

impl Cx {
    pub fn value(self) -> C64 {
        match self {
            Cx::Real(r) => cr(r),
            Cx::Pair([re, im]) => C64::new(re, im),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema: u32,
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub seed: u64,
    /// Independent random draws of the problem; every task runs on each.
    #[serde(default = "one")]
    pub trials: usize,
    pub problem: ProblemSpec,
    pub tasks: Vec<TaskSpec>,
    #[serde(default)]
    pub output_dir: Option<String>,
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ProblemSpec {
    /// A periodic grid with a Fourier projector and a local medium.
    Grid { dims: usize, n: usize, projector: ProjectorChoice, medium: MediumSpec },
    /// A single dense block: Γ₁ and B are n×n matrices, given explicitly or
    /// drawn at random.
    Dense {
        n: usize,
        #[serde(default)]
        rank: Option<usize>,
        #[serde(default)]
        hermitian: bool,
        #[serde(default = "unit_scale")]
        scale: f64,
        #[serde(default)]
        b: Option<Value>,
        #[serde(default)]
        projector: Option<Value>,
        /// Hermitian B with exactly these eigenvalues (n must match).
        #[serde(default)]
        spectrum: Option<Vec<f64>>,
    },
}

fn unit_scale() -> f64 {
    1.0
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProjectorChoice {
    Conductivity,
    VectorGradient,
    Identity {
        components: usize,
    },
    /// Per-frequency blocks from an RLAB block stack.
    Custom {
        path: String,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "pattern", rename_all = "kebab-case")]
pub enum PhaseMap {
    Checkerboard {
        cell: usize,
    },
    Random {
        fraction: f64,
    },
    /// Centered disk or ball of the given radius, as a fraction of the cell.
    Inclusion {
        radius: f64,
    },
    Raster {
        path: String,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MediumSpec {
    /// B(x) = χ(x)b1 + (1 − χ(x))b2.
    TwoPhase {
        phases: PhaseMap,
        b1: Value,
        b2: Value,
    },
    RandomHermitian {
        #[serde(default = "unit_scale")]
        scale: f64,
    },
    RandomGeneral {
        #[serde(default = "unit_scale")]
        scale: f64,
    },
    Constant {
        b: Value,
    },
    /// One block per grid point from an RLAB block stack.
    Blocks {
        path: String,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IdentityKind {
    Chain,
    Reference,
    Duality,
    Reflection,
    NullT,
    Backend,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TranslationChoice {
    Zero,
    /// ±iα·R⊥ on a 2D conductivity grid.
    Rperp,
    /// Coupled-field 𝕋 with L₀ = I and V the standard basis.
    Coupled,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContourSpec {
    #[serde(default = "default_nodes")]
    pub nodes: Vec<usize>,
    #[serde(default = "default_contour_tol")]
    pub tolerance: f64,
}

fn default_nodes() -> Vec<usize> {
    vec![32, 64]
}
fn default_contour_tol() -> f64 {
    1e-8
}
fn default_probes() -> usize {
    4
}
fn default_tol() -> f64 {
    1e-10
}
fn default_identity_tol() -> f64 {
    1e-8
}
fn default_subspace() -> usize {
    4
}
fn default_powers() -> Vec<usize> {
    vec![2, 4, 8, 16]
}
fn default_alpha() -> f64 {
    0.5
}
fn default_epsilon() -> f64 {
    1e-3
}
fn default_grid_size() -> usize {
    4000
}
fn default_holdout() -> usize {
    20
}
fn default_stieltjes_tol() -> f64 {
    0.05
}
fn default_true() -> bool {
    true
}
fn default_samples() -> usize {
    100
}
fn default_imag() -> f64 {
    0.5
}
fn default_scan() -> usize {
    10_000
}
fn default_method() -> SolveMethod {
    SolveMethod::Auto
}
fn default_split() -> resolvent_lab::SplitChoice {
    resolvent_lab::SplitChoice::Z0Shifted
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TaskSpec {
    Solve {
        z0: Cx,
        #[serde(default = "default_method")]
        method: SolveMethod,
        #[serde(default = "default_tol")]
        tolerance: f64,
        #[serde(default)]
        save_field: bool,
    },
    ResolventSweep {
        z0s: Vec<Cx>,
        #[serde(default = "default_probes")]
        probes: usize,
        #[serde(default = "default_tol")]
        max_deviation: f64,
        #[serde(default)]
        contour: Option<ContourSpec>,
    },
    Bounds {
        #[serde(default = "default_subspace")]
        subspace: usize,
        #[serde(default = "default_powers")]
        powers: Vec<usize>,
        #[serde(default = "default_translation")]
        translation: TranslationChoice,
        #[serde(default = "default_alpha")]
        alpha: f64,
        /// Start the Rayleigh–Ritz subspace from a Krylov sequence instead
        /// of random fields.
        #[serde(default)]
        krylov: bool,
        /// When set, the refined upper end must land within this relative
        /// distance of the oracle maximum whenever its validity gate holds.
        #[serde(default)]
        power_tolerance: Option<f64>,
    },
    AugmentVerify {
        /// Defaults to z₀ = c + 2 with c from the coercivity shift.
        #[serde(default)]
        z0s: Vec<Cx>,
        #[serde(default = "default_split")]
        split: resolvent_lab::SplitChoice,
        #[serde(default = "default_probes")]
        probes: usize,
        #[serde(default = "default_identity_tol")]
        max_deviation: f64,
        #[serde(default)]
        w0s: Vec<Cx>,
        #[serde(default)]
        slope_check: bool,
        /// Scalar L = z₁ + iz₂ with Γ₁ = 1, checked against the closed form.
        #[serde(default)]
        scalar_case: Option<[f64; 2]>,
    },
    Stieltjes {
        #[serde(default = "default_epsilon")]
        epsilon: f64,
        #[serde(default = "default_grid_size")]
        grid: usize,
        #[serde(default)]
        lambda_max: Option<f64>,
        #[serde(default = "default_true")]
        richardson: bool,
        #[serde(default = "default_holdout")]
        holdout: usize,
        #[serde(default = "default_stieltjes_tol")]
        tolerance: f64,
        #[serde(default)]
        halving_check: bool,
    },
    Zstar {
        #[serde(default = "default_samples")]
        samples: usize,
        #[serde(default = "default_imag")]
        imag: f64,
        #[serde(default = "default_scan")]
        scan_points: usize,
        #[serde(default)]
        dual_z0: Option<Cx>,
    },
    Identities {
        z0: Cx,
        checks: Vec<IdentityKind>,
        #[serde(default = "default_probes")]
        probes: usize,
        /// Reference media for the independence check.
        #[serde(default)]
        reference_media: Vec<Value>,
        #[serde(default = "default_identity_tol")]
        tolerance: f64,
    },
}

fn default_translation() -> TranslationChoice {
    TranslationChoice::Zero
}

impl TaskSpec {
    pub fn name(&self) -> &'static str {
        match self {
            TaskSpec::Solve { .. } => "solve",
            TaskSpec::ResolventSweep { .. } => "resolvent-sweep",
            TaskSpec::Bounds { .. } => "bounds",
            TaskSpec::AugmentVerify { .. } => "augment-verify",
            TaskSpec::Stieltjes { .. } => "stieltjes",
            TaskSpec::Zstar { .. } => "zstar",
            TaskSpec::Identities { .. } => "identities",
        }
    }
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self, Failure> {
        let s: Scenario =
            serde_json::from_str(text).map_err(|e| Failure::Config(format!("scenario does not parse: {e}")))?;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), Failure> {
        if self.schema != SCHEMA_VERSION {
            return Err(Failure::Config(format!("unsupported schema {} (expected {SCHEMA_VERSION})", self.schema)));
        }
        if self.tasks.is_empty() {
            return Err(Failure::Config("scenario has an empty task list".into()));
        }
        if self.trials == 0 {
            return Err(Failure::Config("trials must be at least 1".into()));
        }
        Ok(())
    }
}

/// The problem as built for one trial.
#[derive(Clone, Debug)]
pub struct Built {
    pub proj: ProjectorSpec,
    pub b: LocalOperator,
    pub grid: Option<PeriodicGrid>,
    /// Indicator map when the medium is two-phase.
    pub chi: Option<Vec<u8>>,
}

fn matrix(v: &Value, what: &str) -> Result<CMat, Failure> {
    io::matrix_from_json(v).map_err(|e| Failure::Config(format!("{what}: {e}")))
}

fn resolve(base: &Path, p: &str) -> PathBuf {
    let path = Path::new(p);
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}

fn inclusion(grid: &PeriodicGrid, radius: f64) -> Vec<u8> {
    (0..grid.points())
        .map(|i| {
            let r2: f64 = grid
                .coords(i)
                .iter()
                .map(|&c| {
                    let x = (c as f64 + 0.5) / grid.n as f64 - 0.5;
                    x * x
                })
                .sum();
            (r2.sqrt() <= radius) as u8
        })
        .collect()
}

impl ProblemSpec {
    /// Files referenced by the problem, resolved against `base`.
    pub fn referenced_files(&self, base: &Path) -> Vec<PathBuf> {
        let mut out = Vec::new();
        if let ProblemSpec::Grid { projector, medium, .. } = self {
            if let ProjectorChoice::Custom { path } = projector {
                out.push(resolve(base, path));
            }
            match medium {
                MediumSpec::TwoPhase { phases: PhaseMap::Raster { path }, .. } | MediumSpec::Blocks { path } => {
                    out.push(resolve(base, path))
                }
                _ => {}
            }
        }
        out
    }

    pub fn is_grid(&self) -> bool {
        matches!(self, ProblemSpec::Grid { .. })
    }

    /// Builds the problem for one trial; `base` resolves relative paths.
    pub fn build(&self, seed: u64, base: &Path) -> Result<Built, Failure> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        match self {
            ProblemSpec::Dense { n, rank, hermitian, scale, b, projector, spectrum } => {
                let n = *n;
                if n == 0 {
                    return Err(Failure::Config("dense problem needs n ≥ 1".into()));
                }
                let p = match projector {
                    Some(v) => matrix(v, "projector")?,
                    None => random::projector(&mut rng, n, rank.unwrap_or(n / 2).min(n)),
                };
                let bm = match (b, spectrum) {
                    (Some(v), _) => matrix(v, "b")?,
                    (None, Some(eigs)) if eigs.len() == n => random::hermitian_with_spectrum(&mut rng, eigs),
                    (None, Some(eigs)) => {
                        return Err(Failure::Config(format!("spectrum has {} values, n is {n}", eigs.len())))
                    }
                    (None, None) if *hermitian => random::hermitian(&mut rng, n) * cr(*scale),
                    (None, None) => random::general(&mut rng, n) * cr(*scale),
                };
                if bm.shape() != (n, n) {
                    return Err(Failure::Config(format!("b must be {n}×{n}")));
                }
                let proj = ProjectorSpec::dense_with_components(p, n).map_err(Failure::from_config)?;
                let b = LocalOperator::new(None, n, vec![bm]).map_err(Failure::from_config)?;
                Ok(Built { proj, b, grid: None, chi: None })
            }
            ProblemSpec::Grid { dims, n, projector, medium } => {
                let grid = PeriodicGrid::new(*dims, *n).map_err(Failure::from_config)?;
                let proj = match projector {
                    ProjectorChoice::Conductivity => conductivity_projector(&grid),
                    ProjectorChoice::VectorGradient => vector_gradient_projector(&grid),
                    ProjectorChoice::Identity { components } => identity_projector(&grid, *components),
                    ProjectorChoice::Custom { path } => {
                        let blocks = io::load_block_stack(&resolve(base, path)).map_err(Failure::from_config)?;
                        let m = blocks.first().map_or(0, |b| b.nrows());
                        ProjectorSpec::fourier(&grid, m, blocks, ZeroModePolicy::Annihilate, ProjectorFamily::Custom)
                    }
                }
                .map_err(Failure::from_config)?;
                let m = proj.components();
                let points = grid.points();
                let (b, chi) = match medium {
                    MediumSpec::TwoPhase { phases, b1, b2 } => {
                        let chi = match phases {
                            PhaseMap::Checkerboard { cell } => checkerboard(&grid, *cell),
                            PhaseMap::Random { fraction } => random::indicator(&mut rng, points, *fraction),
                            PhaseMap::Inclusion { radius } => inclusion(&grid, *radius),
                            PhaseMap::Raster { path } => {
                                let (d, side, chi) =
                                    io::load_raster(&resolve(base, path)).map_err(Failure::from_config)?;
                                if d != *dims || side != *n {
                                    return Err(Failure::Config(format!(
                                        "raster is {side}^{d}, scenario grid is {n}^{dims}"
                                    )));
                                }
                                chi
                            }
                        };
                        let b1 = matrix(b1, "b1")?;
                        let b2 = matrix(b2, "b2")?;
                        if b1.shape() != (m, m) || b2.shape() != (m, m) {
                            return Err(Failure::Config(format!("phase tensors must be {m}×{m}")));
                        }
                        let blocks = chi.iter().map(|&c| if c == 1 { b1.clone() } else { b2.clone() }).collect();
                        (LocalOperator::on_grid(&grid, m, blocks), Some(chi))
                    }
                    MediumSpec::RandomHermitian { scale } => {
                        let blocks = (0..points).map(|_| random::hermitian(&mut rng, m) * cr(*scale)).collect();
                        (LocalOperator::on_grid(&grid, m, blocks), None)
                    }
                    MediumSpec::RandomGeneral { scale } => {
                        let blocks = (0..points).map(|_| random::general(&mut rng, m) * cr(*scale)).collect();
                        (LocalOperator::on_grid(&grid, m, blocks), None)
                    }
                    MediumSpec::Constant { b } => {
                        let b = matrix(b, "b")?;
                        (LocalOperator::constant(Some(grid.clone()), points, &b), None)
                    }
                    MediumSpec::Blocks { path } => {
                        let blocks = io::load_block_stack(&resolve(base, path)).map_err(Failure::from_config)?;
                        (LocalOperator::on_grid(&grid, m, blocks), None)
                    }
                };
                let b = b.map_err(Failure::from_config)?;
                Ok(Built { proj, b, grid: Some(grid), chi })
            }
        }
    }

    /// Same problem with the grid side replaced, used by the backend
    /// equivalence sweep.
    pub fn with_side(&self, side: usize) -> Option<ProblemSpec> {
        match self {
            ProblemSpec::Grid { dims, projector, medium, .. } => {
                let medium = match medium {
                    MediumSpec::TwoPhase { phases: PhaseMap::Raster { .. }, .. } | MediumSpec::Blocks { .. } => {
                        return None
                    }
                    MediumSpec::TwoPhase { phases: PhaseMap::Checkerboard { cell }, b1, b2 } => MediumSpec::TwoPhase {
                        phases: PhaseMap::Checkerboard { cell: (*cell).clamp(1, side / 2) },
                        b1: b1.clone(),
                        b2: b2.clone(),
                    },
                    other => other.clone(),
                };
                if matches!(projector, ProjectorChoice::Custom { .. }) {
                    return None;
                }
                Some(ProblemSpec::Grid { dims: *dims, n: side, projector: projector.clone(), medium })
            }
            ProblemSpec::Dense { .. } => None,
        }
    }
}
