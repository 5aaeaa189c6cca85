//! Ready-made model families.
//!
//! Each scenario bundles the kinetic ingredients (velocity grid, equilibria,
//! turning kernels, scaling exponents, sources) together with the limit
//! system written down directly from its macroscopic parameters. The two
//! routes — `derived_model()` through the derivation engine versus the
//! `hand_model` — must agree coefficient for coefficient, and the test suite
//! holds them to that.
//!
//! Conventions shared by all presets: uniform equilibria `M = 1/|V|` on the
//! circle of radius `R`, and relaxation rates chosen as `σ = R²/(d·D)` so a
//! requested macroscopic diffusivity `D` comes out of the derivation exactly.

use crate::hilbert::sources::{SourceSpec, SourceTerm};
use crate::hilbert::{
    derive_macro_model, DerivedModel, DiffusionTerm, RateLaw, SpeciesTerms, TaxisTerm,
};
use crate::kinetic::KineticModel;
use crate::linalg::{self};
use crate::space::SpaceGrid;
use crate::turning::{BetaLaw, ScalingExponents, TaxisTarget, TurningKernel};
use crate::velocity::{build_velocity_grid, Equilibrium, VelocityGrid};
use crate::{Error, Result};

/// Initial profile of one species along x (constant across y in 2D).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Profile {
    Uniform(f64),
    /// `mean + amplitude · cos(2π · mode · x / L)`.
    Cosine { mean: f64, amplitude: f64, mode: u32 },
}

impl Profile {
    pub fn eval(&self, x: f64, length: f64) -> f64 {
        match self {
            Profile::Uniform(v) => *v,
            Profile::Cosine {
                mean,
                amplitude,
                mode,
            } => mean + amplitude * (2.0 * std::f64::consts::PI * *mode as f64 * x / length).cos(),
        }
    }
}

/// A named model family, ready for both solvers.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub grid: VelocityGrid,
    pub equilibria: Vec<Equilibrium>,
    pub kernels: Vec<TurningKernel>,
    pub scaling: ScalingExponents,
    pub sources: SourceSpec,
    /// The limit system entered directly from the macroscopic parameters.
    pub hand_model: DerivedModel,
    pub initial: Vec<Profile>,
}

impl Scenario {
    pub fn species(&self) -> usize {
        self.kernels.len()
    }

    /// Run the derivation pipeline on the kinetic ingredients.
    pub fn derived_model(&self) -> Result<DerivedModel> {
        derive_macro_model(
            &self.scaling,
            &self.kernels,
            &self.sources,
            &self.grid,
            &self.equilibria,
        )
    }

    /// Kinetic system at a given scaling parameter.
    pub fn kinetic_model(&self, eps: f64) -> KineticModel {
        KineticModel {
            grid: self.grid.clone(),
            equilibria: self.equilibria.clone(),
            kernels: self.kernels.clone(),
            scaling: self.scaling.clone(),
            sources: self.sources.clone(),
            eps,
        }
    }

    /// Evaluate the initial profiles on a space grid (x-profiles, uniform in
    /// y for 2D grids).
    pub fn initial_fields(&self, space: &SpaceGrid) -> Vec<Vec<f64>> {
        let length = space.nx() as f64 * space.dx();
        let xs = space.xs();
        self.initial
            .iter()
            .map(|p| {
                let mut field = vec![0.0; space.cells()];
                for iy in 0..space.ny() {
                    for (ix, x) in xs.iter().enumerate() {
                        field[space.index(ix, iy)] = p.eval(*x, length);
                    }
                }
                field
            })
            .collect()
    }
}

/// Velocity discretisation shared by the presets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocitySettings {
    pub radius: f64,
    pub nodes: usize,
}

impl Default for VelocitySettings {
    fn default() -> Self {
        VelocitySettings {
            radius: 1.0,
            nodes: 16,
        }
    }
}

fn positive(name: &str, value: f64) -> Result<f64> {
    if !(value > 0.0) || !value.is_finite() {
        return Err(Error::InvalidParameter {
            name: name.into(),
            constraint: "must be positive".into(),
        });
    }
    Ok(value)
}

fn nonnegative(name: &str, value: f64) -> Result<f64> {
    if !(value >= 0.0) || !value.is_finite() {
        return Err(Error::InvalidParameter {
            name: name.into(),
            constraint: "must be nonnegative".into(),
        });
    }
    Ok(value)
}

/// Relaxation rate producing diffusivity `d_macro` on this grid.
fn sigma_for_diffusivity(grid: &VelocityGrid, d_macro: f64) -> f64 {
    grid.radius() * grid.radius() / (grid.dim() as f64 * d_macro)
}

fn diffusion(d: f64, dim: usize) -> Option<DiffusionTerm> {
    Some(DiffusionTerm {
        tensor: linalg::identity(dim, d),
        limiter: None,
    })
}

fn taxis(coupling: f64, target: usize, dim: usize) -> TaxisTerm {
    TaxisTerm {
        matrix: linalg::identity(dim, coupling),
        target,
        flux_limited: false,
    }
}

/// Single diffusing species with no interactions: the sharpest setting for
/// micro/macro comparisons.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatParams {
    pub sigma: f64,
    pub velocity: VelocitySettings,
}

impl Default for HeatParams {
    fn default() -> Self {
        HeatParams {
            // R²/d on the default grid: unit diffusivity.
            sigma: 0.5,
            velocity: VelocitySettings::default(),
        }
    }
}

pub fn heat(params: &HeatParams) -> Result<Scenario> {
    positive("sigma", params.sigma)?;
    let grid = build_velocity_grid(2, params.velocity.radius, params.velocity.nodes)?;
    let m = Equilibrium::uniform(&grid);
    let d_macro = grid.radius() * grid.radius() / (grid.dim() as f64 * params.sigma);
    let hand_model = DerivedModel::new(
        grid.dim(),
        vec![SpeciesTerms {
            diffusion: diffusion(d_macro, grid.dim()),
            taxis: Vec::new(),
        }],
        SourceSpec::none(1),
    )?;
    Ok(Scenario {
        name: "heat".into(),
        equilibria: vec![m],
        kernels: vec![TurningKernel::relaxation(0, params.sigma)?],
        scaling: ScalingExponents::uniform(1, 1, 1)?,
        sources: SourceSpec::none(1),
        hand_model,
        initial: vec![Profile::Cosine {
            mean: 1.0,
            amplitude: 0.5,
            mode: 1,
        }],
        grid,
    })
}

/// Virus transport under chemotaxis: three diffusing populations where the
/// first drifts up the gradient of the second, infection couples 1 and 3,
/// and the second seeds the third.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VirusParams {
    /// Diffusivities `D_1, D_2, D_3`.
    pub diff: [f64; 3],
    /// Chemotactic coupling of species 1 toward species 2.
    pub chi: f64,
    /// Decay rates `d_1, d_2, d_3`.
    pub decay: [f64; 3],
    /// Infection rate `β` (mass action `u_1 u_3`).
    pub beta: f64,
    /// Production rate `k` of species 3 from species 2.
    pub k: f64,
    /// Constant supply `r` of species 1.
    pub r: f64,
    pub velocity: VelocitySettings,
}

impl Default for VirusParams {
    fn default() -> Self {
        VirusParams {
            diff: [1.0, 1.0, 1.0],
            chi: 0.1,
            decay: [1.0, 1.0, 1.0],
            beta: 0.5,
            k: 0.5,
            r: 1.0,
            velocity: VelocitySettings::default(),
        }
    }
}

pub fn ks_virus(params: &VirusParams) -> Result<Scenario> {
    for (i, d) in params.diff.iter().enumerate() {
        positive(&format!("D{}", i + 1), *d)?;
    }
    for (i, d) in params.decay.iter().enumerate() {
        nonnegative(&format!("d{}", i + 1), *d)?;
    }
    nonnegative("chi", params.chi)?;
    nonnegative("beta", params.beta)?;
    nonnegative("k", params.k)?;
    nonnegative("r", params.r)?;

    let grid = build_velocity_grid(2, params.velocity.radius, params.velocity.nodes)?;
    let m = Equilibrium::uniform(&grid);
    let dim = grid.dim();

    let sources = SourceSpec::new(
        3,
        vec![
            vec![
                SourceTerm::Linear {
                    rate: -params.decay[0],
                    field: 0,
                },
                SourceTerm::MassAction {
                    rate: -params.beta,
                    fields: vec![0, 2],
                },
                SourceTerm::Constant { rate: params.r },
            ],
            vec![
                SourceTerm::MassAction {
                    rate: params.beta,
                    fields: vec![0, 2],
                },
                SourceTerm::Linear {
                    rate: -params.decay[1],
                    field: 1,
                },
            ],
            vec![
                SourceTerm::Linear {
                    rate: params.k,
                    field: 1,
                },
                SourceTerm::Linear {
                    rate: -params.decay[2],
                    field: 2,
                },
            ],
        ],
    )?;

    let hand_model = DerivedModel::new(
        dim,
        vec![
            SpeciesTerms {
                diffusion: diffusion(params.diff[0], dim),
                taxis: vec![taxis(params.chi, 1, dim)],
            },
            SpeciesTerms {
                diffusion: diffusion(params.diff[1], dim),
                taxis: Vec::new(),
            },
            SpeciesTerms {
                diffusion: diffusion(params.diff[2], dim),
                taxis: Vec::new(),
            },
        ],
        sources.clone(),
    )?;

    let kernels = vec![
        TurningKernel::relaxation(0, sigma_for_diffusivity(&grid, params.diff[0]))?
            .with_gradient_taxis(vec![TaxisTarget {
                field: 1,
                coupling: params.chi,
            }]),
        TurningKernel::relaxation(1, sigma_for_diffusivity(&grid, params.diff[1]))?,
        TurningKernel::relaxation(2, sigma_for_diffusivity(&grid, params.diff[2]))?,
    ];

    Ok(Scenario {
        name: "ks-virus".into(),
        equilibria: vec![m.clone(), m.clone(), m],
        kernels,
        scaling: ScalingExponents::new(1, vec![Some(1), Some(1), None])?,
        sources,
        hand_model,
        initial: vec![
            Profile::Cosine {
                mean: 1.0,
                amplitude: 0.5,
                mode: 1,
            },
            Profile::Cosine {
                mean: 0.5,
                amplitude: 0.25,
                mode: 1,
            },
            Profile::Uniform(0.5),
        ],
        grid,
    })
}

/// Four-species oncolytic competition: two cell populations and the virus
/// drift up the gradient of a non-diffusing matrix field, infection follows
/// a saturated law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OncolyticParams {
    /// Diffusivities of species 1, 2, 4.
    pub diff: [f64; 3],
    /// Matrix-taxis couplings `ξ_1, ξ_2, ξ_4`.
    pub xi: [f64; 3],
    pub mu1: f64,
    /// Logistic exponent `r`.
    pub r_exp: f64,
    /// Saturated infection rate `ρ`.
    pub rho: f64,
    /// Saturation constant `k_{u1}` (positive).
    pub k_u1: f64,
    /// Saturation slope `θ_sat` (positive).
    pub theta_sat: f64,
    pub delta2: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub mu3: f64,
    pub beta: f64,
    pub delta4: f64,
    /// Relaxation rate of the matrix species (its diffusion is suppressed by
    /// the scaling, but the kinetic system still relaxes it).
    pub sigma3: f64,
    pub velocity: VelocitySettings,
}

impl Default for OncolyticParams {
    fn default() -> Self {
        OncolyticParams {
            diff: [1.0, 1.0, 1.0],
            xi: [0.3, 0.2, 0.4],
            mu1: 1.0,
            r_exp: 1.0,
            rho: 0.5,
            k_u1: 0.5,
            theta_sat: 1.0,
            delta2: 0.3,
            alpha1: 0.2,
            alpha2: 0.1,
            mu3: 0.5,
            beta: 0.4,
            delta4: 0.3,
            sigma3: 0.5,
            velocity: VelocitySettings::default(),
        }
    }
}

pub fn oncolytic(params: &OncolyticParams) -> Result<Scenario> {
    for (i, d) in params.diff.iter().enumerate() {
        positive(&format!("D{}", [1, 2, 4][i]), *d)?;
    }
    for (i, x) in params.xi.iter().enumerate() {
        nonnegative(&format!("xi{}", [1, 2, 4][i]), *x)?;
    }
    positive("k_u1", params.k_u1)?;
    positive("theta_sat", params.theta_sat)?;
    positive("r", params.r_exp)?;
    nonnegative("mu1", params.mu1)?;
    nonnegative("rho", params.rho)?;
    nonnegative("delta2", params.delta2)?;
    nonnegative("alpha1", params.alpha1)?;
    nonnegative("alpha2", params.alpha2)?;
    nonnegative("mu3", params.mu3)?;
    nonnegative("beta", params.beta)?;
    nonnegative("delta4", params.delta4)?;
    positive("sigma3", params.sigma3)?;

    let grid = build_velocity_grid(2, params.velocity.radius, params.velocity.nodes)?;
    let m = Equilibrium::uniform(&grid);
    let dim = grid.dim();

    let saturated = |rate: f64| SourceTerm::Saturation {
        rate,
        numerator: [0, 3],
        saturation: params.k_u1,
        theta_sat: params.theta_sat,
    };
    let sources = SourceSpec::new(
        4,
        vec![
            vec![
                SourceTerm::Logistic {
                    rate: params.mu1,
                    exponent: params.r_exp,
                    field: 0,
                },
                saturated(-params.rho),
            ],
            vec![
                saturated(params.rho),
                SourceTerm::Linear {
                    rate: -params.delta2,
                    field: 1,
                },
            ],
            vec![
                SourceTerm::MassAction {
                    rate: -params.alpha1,
                    fields: vec![2, 0],
                },
                SourceTerm::MassAction {
                    rate: -params.alpha2,
                    fields: vec![2, 1],
                },
                SourceTerm::Logistic {
                    rate: params.mu3,
                    exponent: 1.0,
                    field: 2,
                },
            ],
            vec![
                SourceTerm::Linear {
                    rate: params.beta,
                    field: 1,
                },
                SourceTerm::Linear {
                    rate: -params.delta4,
                    field: 3,
                },
                saturated(-params.rho),
            ],
        ],
    )?;

    let hand_model = DerivedModel::new(
        dim,
        vec![
            SpeciesTerms {
                diffusion: diffusion(params.diff[0], dim),
                taxis: vec![taxis(params.xi[0], 2, dim)],
            },
            SpeciesTerms {
                diffusion: diffusion(params.diff[1], dim),
                taxis: vec![taxis(params.xi[1], 2, dim)],
            },
            SpeciesTerms {
                diffusion: None,
                taxis: Vec::new(),
            },
            SpeciesTerms {
                diffusion: diffusion(params.diff[2], dim),
                taxis: vec![taxis(params.xi[2], 2, dim)],
            },
        ],
        sources.clone(),
    )?;

    let matrix_taxis = |s: usize, xi: f64, sigma: f64| -> Result<TurningKernel> {
        Ok(TurningKernel::relaxation(s, sigma)?.with_gradient_taxis(vec![TaxisTarget {
            field: 2,
            coupling: xi,
        }]))
    };
    let kernels = vec![
        matrix_taxis(0, params.xi[0], sigma_for_diffusivity(&grid, params.diff[0]))?,
        matrix_taxis(1, params.xi[1], sigma_for_diffusivity(&grid, params.diff[1]))?,
        TurningKernel::relaxation(2, params.sigma3)?,
        matrix_taxis(3, params.xi[2], sigma_for_diffusivity(&grid, params.diff[2]))?,
    ];

    Ok(Scenario {
        name: "oncolytic".into(),
        equilibria: vec![m.clone(), m.clone(), m.clone(), m],
        kernels,
        scaling: ScalingExponents::new(2, vec![Some(1), Some(1), None, Some(1)])?,
        sources,
        hand_model,
        initial: vec![
            Profile::Cosine {
                mean: 0.6,
                amplitude: 0.2,
                mode: 1,
            },
            Profile::Uniform(0.1),
            Profile::Cosine {
                mean: 0.5,
                amplitude: 0.2,
                mode: 1,
            },
            Profile::Uniform(0.2),
        ],
        grid,
    })
}

/// Invasion model: cancer cells chase both an enzyme and the matrix, the
/// enzyme diffuses and equilibrates toward the cell density, the matrix is
/// degraded and remodels logistically.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvasionParams {
    pub chi: f64,
    pub xi: f64,
    pub mu: f64,
    pub r: f64,
    /// Enzyme scaling `σ`: its diffusivity and relaxation are both `1/σ`.
    pub sigma: f64,
    pub eta: f64,
    pub velocity: VelocitySettings,
}

impl Default for InvasionParams {
    fn default() -> Self {
        InvasionParams {
            chi: 0.3,
            xi: 0.2,
            mu: 0.5,
            r: 1.0,
            sigma: 2.0,
            eta: 0.5,
            velocity: VelocitySettings::default(),
        }
    }
}

pub fn invasion(params: &InvasionParams) -> Result<Scenario> {
    nonnegative("chi", params.chi)?;
    nonnegative("xi", params.xi)?;
    nonnegative("mu", params.mu)?;
    positive("r", params.r)?;
    positive("sigma", params.sigma)?;
    nonnegative("eta", params.eta)?;

    let grid = build_velocity_grid(2, params.velocity.radius, params.velocity.nodes)?;
    let m = Equilibrium::uniform(&grid);
    let dim = grid.dim();
    let inv_sigma = 1.0 / params.sigma;

    let sources = SourceSpec::new(
        3,
        vec![
            vec![
                SourceTerm::Linear {
                    rate: params.mu * params.r,
                    field: 0,
                },
                SourceTerm::MassAction {
                    rate: -params.mu,
                    fields: vec![0, 0],
                },
                SourceTerm::MassAction {
                    rate: -params.mu,
                    fields: vec![0, 2],
                },
            ],
            vec![
                SourceTerm::Linear {
                    rate: inv_sigma,
                    field: 0,
                },
                SourceTerm::Linear {
                    rate: -inv_sigma,
                    field: 1,
                },
            ],
            vec![
                SourceTerm::MassAction {
                    rate: -1.0,
                    fields: vec![1, 2],
                },
                SourceTerm::Linear {
                    rate: params.eta,
                    field: 2,
                },
                SourceTerm::MassAction {
                    rate: -params.eta,
                    fields: vec![2, 0],
                },
                SourceTerm::MassAction {
                    rate: -params.eta,
                    fields: vec![2, 2],
                },
            ],
        ],
    )?;

    let hand_model = DerivedModel::new(
        dim,
        vec![
            SpeciesTerms {
                diffusion: diffusion(1.0, dim),
                taxis: vec![taxis(params.chi, 1, dim), taxis(params.xi, 2, dim)],
            },
            SpeciesTerms {
                diffusion: diffusion(inv_sigma, dim),
                taxis: Vec::new(),
            },
            SpeciesTerms {
                diffusion: None,
                taxis: Vec::new(),
            },
        ],
        sources.clone(),
    )?;

    // sigma_1 = R²/d pins D_1 = 1; the enzyme relaxes at sigma R²/d so its
    // diffusivity is 1/sigma.
    let r2_over_d = grid.radius() * grid.radius() / grid.dim() as f64;
    let kernels = vec![
        TurningKernel::relaxation(0, r2_over_d)?.with_gradient_taxis(vec![
            TaxisTarget {
                field: 1,
                coupling: params.chi,
            },
            TaxisTarget {
                field: 2,
                coupling: params.xi,
            },
        ]),
        TurningKernel::relaxation(1, params.sigma * r2_over_d)?,
        TurningKernel::relaxation(2, r2_over_d)?,
    ];

    Ok(Scenario {
        name: "invasion".into(),
        equilibria: vec![m.clone(), m.clone(), m],
        kernels,
        scaling: ScalingExponents::new(2, vec![Some(1), Some(2), None])?,
        sources,
        hand_model,
        initial: vec![
            Profile::Cosine {
                mean: 0.5,
                amplitude: 0.2,
                mode: 1,
            },
            Profile::Uniform(0.3),
            Profile::Cosine {
                mean: 0.6,
                amplitude: 0.1,
                mode: 1,
            },
        ],
        grid,
    })
}

/// Forager–scrounger cascade: species 1 chases the food gradient, species 2
/// chases species 1, the food diffuses, is consumed, decays, and regrows
/// logistically.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForagerParams {
    pub xi1: f64,
    pub xi2: f64,
    /// Food diffusivity `D`.
    pub d_food: f64,
    /// Consumption rate `λ`.
    pub lambda: f64,
    /// Food decay rate `μ`.
    pub mu: f64,
    /// Logistic regrowth rate of the food source `r(u_3) = r_0 u_3 (1 - u_3)`.
    pub r0: f64,
    pub velocity: VelocitySettings,
}

impl Default for ForagerParams {
    fn default() -> Self {
        ForagerParams {
            xi1: 0.3,
            xi2: 0.2,
            d_food: 0.5,
            lambda: 0.5,
            mu: 0.3,
            r0: 0.5,
            velocity: VelocitySettings::default(),
        }
    }
}

pub fn forager(params: &ForagerParams) -> Result<Scenario> {
    nonnegative("xi1", params.xi1)?;
    nonnegative("xi2", params.xi2)?;
    positive("D", params.d_food)?;
    nonnegative("lambda", params.lambda)?;
    nonnegative("mu", params.mu)?;
    nonnegative("r0", params.r0)?;

    let grid = build_velocity_grid(2, params.velocity.radius, params.velocity.nodes)?;
    let m = Equilibrium::uniform(&grid);
    let dim = grid.dim();

    let sources = SourceSpec::new(
        3,
        vec![
            Vec::new(),
            Vec::new(),
            vec![
                SourceTerm::MassAction {
                    rate: -params.lambda,
                    fields: vec![0, 2],
                },
                SourceTerm::MassAction {
                    rate: -params.lambda,
                    fields: vec![1, 2],
                },
                SourceTerm::Linear {
                    rate: -params.mu,
                    field: 2,
                },
                SourceTerm::Logistic {
                    rate: params.r0,
                    exponent: 1.0,
                    field: 2,
                },
            ],
        ],
    )?;

    let hand_model = DerivedModel::new(
        dim,
        vec![
            SpeciesTerms {
                diffusion: diffusion(1.0, dim),
                taxis: vec![taxis(params.xi1, 2, dim)],
            },
            SpeciesTerms {
                diffusion: diffusion(1.0, dim),
                taxis: vec![taxis(params.xi2, 0, dim)],
            },
            SpeciesTerms {
                diffusion: diffusion(params.d_food, dim),
                taxis: Vec::new(),
            },
        ],
        sources.clone(),
    )?;

    let r2_over_d = grid.radius() * grid.radius() / grid.dim() as f64;
    let kernels = vec![
        TurningKernel::relaxation(0, r2_over_d)?.with_gradient_taxis(vec![TaxisTarget {
            field: 2,
            coupling: params.xi1,
        }]),
        TurningKernel::relaxation(1, r2_over_d)?.with_gradient_taxis(vec![TaxisTarget {
            field: 0,
            coupling: params.xi2,
        }]),
        TurningKernel::relaxation(2, sigma_for_diffusivity(&grid, params.d_food))?,
    ];

    Ok(Scenario {
        name: "forager".into(),
        equilibria: vec![m.clone(), m.clone(), m],
        kernels,
        scaling: ScalingExponents::new(1, vec![Some(1), Some(1), None])?,
        sources,
        hand_model,
        initial: vec![
            Profile::Cosine {
                mean: 0.5,
                amplitude: 0.2,
                mode: 1,
            },
            Profile::Cosine {
                mean: 0.4,
                amplitude: 0.1,
                mode: 1,
            },
            Profile::Cosine {
                mean: 0.8,
                amplitude: 0.15,
                mode: 1,
            },
        ],
        grid,
    })
}

/// Two-species system with flux-limited dispersal: the first species'
/// relaxation rate is modulated by the state through `|β_1(u_1)·β_2(u_2)|`
/// and its drift follows `∇u_2/u_2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluxLimitedParams {
    pub beta1: BetaLaw,
    pub beta2: BetaLaw,
    /// Relaxation rate of species 2; its diffusivity is `R²/(d σ_2)`.
    pub sigma2: f64,
    pub velocity: VelocitySettings,
}

impl Default for FluxLimitedParams {
    fn default() -> Self {
        FluxLimitedParams {
            beta1: BetaLaw::default(),
            beta2: BetaLaw::default(),
            sigma2: 0.5,
            velocity: VelocitySettings::default(),
        }
    }
}

pub fn flux_limited(params: &FluxLimitedParams) -> Result<Scenario> {
    positive("sigma2", params.sigma2)?;
    for (name, law) in [("beta1", params.beta1), ("beta2", params.beta2)] {
        if law.offset <= 0.0 || law.slope < 0.0 {
            return Err(Error::InvalidParameter {
                name: name.into(),
                constraint: "must stay positive on nonnegative states".into(),
            });
        }
    }

    let grid = build_velocity_grid(2, params.velocity.radius, params.velocity.nodes)?;
    let m = Equilibrium::uniform(&grid);
    let dim = grid.dim();
    let r2_over_d = grid.radius() * grid.radius() / grid.dim() as f64;

    let sources = SourceSpec::new(
        2,
        vec![
            vec![SourceTerm::MassAction {
                rate: -1.0,
                fields: vec![0, 1],
            }],
            vec![
                SourceTerm::Linear {
                    rate: -1.0,
                    field: 1,
                },
                SourceTerm::MassAction {
                    rate: 1.0,
                    fields: vec![0, 1],
                },
            ],
        ],
    )?;

    let hand_model = DerivedModel::new(
        dim,
        vec![
            SpeciesTerms {
                diffusion: Some(DiffusionTerm {
                    tensor: linalg::identity(dim, r2_over_d),
                    limiter: Some(RateLaw(params.beta1, params.beta2)),
                }),
                taxis: vec![TaxisTerm {
                    matrix: linalg::identity(dim, 1.0),
                    target: 1,
                    flux_limited: true,
                }],
            },
            SpeciesTerms {
                diffusion: diffusion(r2_over_d / params.sigma2, dim),
                taxis: Vec::new(),
            },
        ],
        sources.clone(),
    )?;

    let kernels = vec![
        // Unit nominal rate: the effective rate comes from the beta laws.
        TurningKernel::relaxation(0, 1.0)?.with_flux_limited(1, params.beta1, params.beta2),
        TurningKernel::relaxation(1, params.sigma2)?,
    ];

    Ok(Scenario {
        name: "flux-limited".into(),
        equilibria: vec![m.clone(), m],
        kernels,
        scaling: ScalingExponents::new(1, vec![Some(1), Some(2)])?,
        sources,
        hand_model,
        initial: vec![
            Profile::Cosine {
                mean: 0.8,
                amplitude: 0.2,
                mode: 1,
            },
            Profile::Cosine {
                mean: 1.0,
                amplitude: 0.2,
                mode: 1,
            },
        ],
        grid,
    })
}
