//! Derivation of macroscopic limit systems from kinetic ingredients.
//!
//! Given turning kernels, equilibria, scaling exponents, and source terms,
//! this module assembles the limit model species by species:
//!
//! - diffusion tensor `D_i = -⟨ v ⊗ θ_i ⟩`, with `θ_i` the mean-zero solution
//!   of `L_i θ = v M_i`;
//! - taxis coefficients: the drift `α_l(u) = -⟨ (θ_l / M_l) T1_l[Mu](M_l) ⟩`
//!   always reduces to a constant matrix times the gradient of a named field
//!   for the built-in perturbation families, so each term is stored as
//!   `(matrix, target field)` plus an optional flux-limit law;
//! - reaction closure `ψ_i(u) = ⟨ G_i(M_1 u_1, …, M_n u_n, v) ⟩`.
//!
//! Presence of the spatial terms follows the integer scaling flags: a taxis
//! term survives only with perturbation order `b_l = 1`, and the driving
//! species keeps its diffusion only with relaxation exponent `q = 1`.

pub mod sources;

use crate::error::Error;
use crate::linalg::{self, Mat3};
use crate::turning::{
    self, driving_species, BetaLaw, LeadingKernel, Perturbation, ScalingExponents, TurningKernel,
};
use crate::velocity::{Equilibrium, VelocityGrid};
use crate::Result;

pub use sources::{SourceSpec, SourceTerm};

/// State-dependent rate `σ(u) = |β_1(u_1) · β_2(u_2)|` dividing a base
/// diffusion tensor in the flux-limited family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateLaw(pub BetaLaw, pub BetaLaw);

impl RateLaw {
    pub fn eval(&self, u: &[f64]) -> f64 {
        let u1 = u.first().copied().unwrap_or(0.0);
        let u2 = u.get(1).copied().unwrap_or(0.0);
        (self.0.eval(u1) * self.1.eval(u2)).abs()
    }
}

/// Diffusion part of one species: `div( tensor/σ(u) · grad u )`, where the
/// divisor is present only for flux-limited kernels.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionTerm {
    pub tensor: Mat3,
    pub limiter: Option<RateLaw>,
}

/// One taxis term: `-div( u · matrix · grad u_target )`, optionally divided
/// by the target value (flux-limited drift `grad u_t / u_t`).
#[derive(Debug, Clone, PartialEq)]
pub struct TaxisTerm {
    pub matrix: Mat3,
    pub target: usize,
    pub flux_limited: bool,
}

/// Spatial terms of one species.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SpeciesTerms {
    pub diffusion: Option<DiffusionTerm>,
    pub taxis: Vec<TaxisTerm>,
}

/// Machine-readable macroscopic system
/// `∂_t u_i = div(D_i grad u_i - u_i Σ χ grad u_target) + ψ_i(u)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedModel {
    dim: usize,
    terms: Vec<SpeciesTerms>,
    sources: SourceSpec,
}

impl DerivedModel {
    pub fn new(dim: usize, terms: Vec<SpeciesTerms>, sources: SourceSpec) -> Result<Self> {
        if terms.len() != sources.species() {
            return Err(Error::SpeciesMismatch(format!(
                "{} species terms vs {} source species",
                terms.len(),
                sources.species()
            )));
        }
        let n = terms.len();
        for (i, t) in terms.iter().enumerate() {
            if let Some(d) = &t.diffusion {
                check_spd(&d.tensor, dim, i)?;
            }
            for taxis in &t.taxis {
                if taxis.target >= n {
                    return Err(Error::SpeciesMismatch(format!(
                        "species {} taxis targets u_{} beyond the {n} species",
                        i + 1,
                        taxis.target + 1
                    )));
                }
            }
        }
        Ok(DerivedModel {
            dim,
            terms,
            sources,
        })
    }

    pub fn species(&self) -> usize {
        self.terms.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self, i: usize) -> &SpeciesTerms {
        &self.terms[i]
    }

    pub fn sources(&self) -> &SourceSpec {
        &self.sources
    }

    /// Reaction value `ψ_i(u)`.
    pub fn reaction(&self, i: usize, u: &[f64]) -> Result<f64> {
        self.sources.closed_form(i, u)
    }

    /// Effective scalar diffusion coefficient along axis `axis` at state `u`.
    pub fn diffusion_coeff(&self, i: usize, axis: usize, u: &[f64]) -> Option<f64> {
        self.terms[i].diffusion.as_ref().map(|d| {
            let base = d.tensor[axis][axis];
            match &d.limiter {
                Some(law) => base / law.eval(u),
                None => base,
            }
        })
    }
}

/// Symmetry + positive semidefiniteness via principal minors.
fn check_spd(m: &Mat3, dim: usize, species: usize) -> Result<()> {
    let scale = (0..dim)
        .flat_map(|i| (0..dim).map(move |j| (i, j)))
        .fold(0.0f64, |acc, (i, j)| acc.max(m[i][j].abs()))
        .max(1e-300);
    for i in 0..dim {
        for j in (i + 1)..dim {
            if (m[i][j] - m[j][i]).abs() > 1e-10 * scale {
                return Err(Error::SpeciesMismatch(format!(
                    "species {} diffusion tensor is not symmetric",
                    species + 1
                )));
            }
        }
    }
    let tol = -1e-10 * scale;
    let d1 = m[0][0];
    let d2 = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let d3 = if dim == 3 {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    } else {
        0.0
    };
    if d1 < tol || (dim >= 2 && d2 < tol * scale) || (dim == 3 && d3 < tol * scale * scale) {
        return Err(Error::SpeciesMismatch(format!(
            "species {} diffusion tensor is not positive semidefinite",
            species + 1
        )));
    }
    Ok(())
}

/// Diffusion tensor `D = -⟨ v ⊗ θ ⟩` of one kernel.
///
/// For relaxation kernels this reduces to `(1/σ) ⟨ v ⊗ v M ⟩`; for flux-
/// limited kernels the result is the base tensor that the state-dependent
/// rate law later divides.
pub fn diffusion_tensor(
    kernel: &TurningKernel,
    grid: &VelocityGrid,
    m: &Equilibrium,
) -> Result<Mat3> {
    let theta = turning::solve_theta(kernel, grid, m)?;
    let mut d = linalg::ZERO_MAT;
    for (k, (v, t)) in grid.nodes().iter().zip(&theta).enumerate() {
        linalg::outer_add_assign(&mut d, v, t, -grid.weight(k), grid.dim());
    }
    Ok(d)
}

/// Taxis coefficients of one species: one `(matrix, target)` pair per target
/// field, computed by probing `T1` with unit gradients and projecting through
/// `α = -⟨ (θ/M) T1(M) ⟩`.
///
/// Errors when called for a species whose perturbation order exceeds one —
/// the term is absent from the limit at that order.
pub fn taxis_coefficient(
    kernel: &TurningKernel,
    grid: &VelocityGrid,
    m: &Equilibrium,
    scaling: &ScalingExponents,
) -> Result<Vec<TaxisTerm>> {
    let species = kernel.species();
    if !scaling.taxis_active(species) {
        return Err(Error::InvalidParameter {
            name: format!("b_{}", species + 1),
            constraint: "taxis coefficients only exist at perturbation order b = 1".into(),
        });
    }
    let mut theta = turning::solve_theta(kernel, grid, m)?;
    let n_fields = scaling.species();

    // For the flux-limited family the state-dependent rate replaces the
    // constant one in the leading operator as well, so the probe's theta must
    // carry it too.
    if matches!(kernel.perturbation(), Perturbation::FluxLimited { .. }) {
        let probe_u = vec![1.0; n_fields];
        if let (Some(effective), LeadingKernel::Relaxation { sigma }) =
            (kernel.relaxation_sigma(&probe_u), kernel.leading())
        {
            let rescale = sigma / effective;
            for t in theta.iter_mut() {
                for c in t.iter_mut() {
                    *c *= rescale;
                }
            }
        }
    }

    let targets: Vec<(usize, bool)> = match kernel.perturbation() {
        Perturbation::None => Vec::new(),
        Perturbation::GradientTaxis { targets } => {
            targets.iter().map(|t| (t.field, false)).collect()
        }
        Perturbation::FluxLimited { target, .. } => vec![(*target, true)],
    };

    let mut out = Vec::with_capacity(targets.len());
    for (target, flux_limited) in targets {
        let mut matrix = linalg::ZERO_MAT;
        for axis in 0..grid.dim() {
            // Probe state: all densities at one, unit gradient on the target.
            let u = vec![1.0; n_fields];
            let mut gradients = vec![linalg::ZERO_VEC; n_fields];
            gradients[target][axis] = 1.0;
            // Zero out the other couplings by probing one target at a time:
            // the built-in kernels are additive over targets, so feed only
            // this target's gradient.
            let fields = turning::MacroFields {
                u: &u,
                gradients: &gradients,
            };
            let t1m = turning::apply_t1(kernel, grid, m, &fields, m.values())?;
            for k in 0..grid.len() {
                let w = grid.weight(k);
                let factor = -w / m.value(k) * t1m[k];
                for row in 0..grid.dim() {
                    matrix[row][axis] += factor * theta[k][row];
                }
            }
        }
        out.push(TaxisTerm {
            matrix,
            target,
            flux_limited,
        });
    }
    Ok(out)
}

/// Quadrature route for the reaction closure: `ψ_i(u) = ⟨ G_i(Mu, v) ⟩` for
/// every species.
pub fn source_projection(
    spec: &SourceSpec,
    grid: &VelocityGrid,
    equilibria: &[Equilibrium],
    u: &[f64],
) -> Result<Vec<f64>> {
    (0..spec.species())
        .map(|i| spec.projected(i, grid, equilibria, u))
        .collect()
}

/// Assemble the full macroscopic model from kinetic ingredients.
///
/// One kernel and one equilibrium per species; for mixtures of three or more
/// species, species 3 is the driving field: its kernel must not carry a
/// perturbation part, and its diffusion survives only when `q = 1`.
pub fn derive_macro_model(
    scaling: &ScalingExponents,
    kernels: &[TurningKernel],
    sources: &SourceSpec,
    grid: &VelocityGrid,
    equilibria: &[Equilibrium],
) -> Result<DerivedModel> {
    let n = kernels.len();
    if scaling.species() != n || sources.species() != n || equilibria.len() != n {
        return Err(Error::SpeciesMismatch(format!(
            "inconsistent species counts: {} kernels, {} scaling, {} sources, {} equilibria",
            n,
            scaling.species(),
            sources.species(),
            equilibria.len()
        )));
    }
    let driving = driving_species(n);
    if let Some(d) = driving {
        if kernels[d].has_perturbation() {
            return Err(Error::SpeciesMismatch(
                "species 3 is the driving field; its turning operator admits no perturbation part"
                    .into(),
            ));
        }
    }

    let mut terms = Vec::with_capacity(n);
    for (i, (kernel, m)) in kernels.iter().zip(equilibria).enumerate() {
        if kernel.species() != i {
            return Err(Error::SpeciesMismatch(format!(
                "kernel at position {} is labelled species {}",
                i,
                kernel.species() + 1
            )));
        }
        let is_driving = Some(i) == driving;
        let diffusion = if is_driving && !scaling.driving_diffuses() {
            None
        } else {
            let tensor = diffusion_tensor(kernel, grid, m)?;
            let limiter = match kernel.perturbation() {
                Perturbation::FluxLimited { beta1, beta2, .. } => Some(RateLaw(*beta1, *beta2)),
                _ => None,
            };
            Some(DiffusionTerm { tensor, limiter })
        };
        let taxis = if !is_driving && scaling.taxis_active(i) && kernel.has_perturbation() {
            taxis_coefficient(kernel, grid, m, scaling)?
        } else {
            Vec::new()
        };
        terms.push(SpeciesTerms { diffusion, taxis });
    }
    DerivedModel::new(grid.dim(), terms, sources.clone())
}

/// Plain-text derivation report: one equation per species with numeric
/// coefficients.
pub fn derivation_report(model: &DerivedModel, title: &str) -> String {
    use std::fmt::Write as _;
    let dim = model.dim();
    let mut out = String::new();
    let _ = writeln!(
        out,
        "derived macroscopic system: {title} ({} species, velocity dimension {dim})",
        model.species()
    );
    let _ = writeln!(out);
    for i in 0..model.species() {
        let terms = model.terms(i);
        let mut eq = format!("du{}/dt =", i + 1);
        let mut coeffs = Vec::new();
        match &terms.diffusion {
            Some(d) => {
                match &d.limiter {
                    Some(_) => {
                        eq.push_str(&format!(" div( D{0}(u) grad u{0} )", i + 1));
                    }
                    None => eq.push_str(&format!(" div( D{0} grad u{0} )", i + 1)),
                }
                coeffs.push(format!("  D{} = {}", i + 1, matrix_text(&d.tensor, dim)));
                if let Some(law) = &d.limiter {
                    coeffs.push(format!(
                        "  D{0}(u) = D{0} / |beta1(u1).beta2(u2)|, beta1 = ({1} + {2} s) e1, beta2 = ({3} + {4} s) e1",
                        i + 1,
                        crate::io::fmt_sci(law.0.offset),
                        crate::io::fmt_sci(law.0.slope),
                        crate::io::fmt_sci(law.1.offset),
                        crate::io::fmt_sci(law.1.slope)
                    ));
                }
            }
            None => {}
        }
        for t in &terms.taxis {
            if t.flux_limited {
                eq.push_str(&format!(
                    " - div( u{} C{}{} grad u{} / u{} )",
                    i + 1,
                    i + 1,
                    t.target + 1,
                    t.target + 1,
                    t.target + 1
                ));
            } else {
                eq.push_str(&format!(
                    " - div( u{} C{}{} grad u{} )",
                    i + 1,
                    i + 1,
                    t.target + 1,
                    t.target + 1
                ));
            }
            coeffs.push(format!(
                "  C{}{} = {}",
                i + 1,
                t.target + 1,
                matrix_text(&t.matrix, dim)
            ));
        }
        if terms.diffusion.is_none() && terms.taxis.is_empty() {
            eq.push_str(&format!(" psi{}(u)    [no spatial transport at this order]", i + 1));
        } else {
            eq.push_str(&format!(" + psi{}(u)", i + 1));
        }
        let _ = writeln!(out, "{eq}");
        for c in coeffs {
            let _ = writeln!(out, "{c}");
        }
        let source_terms = model.sources().terms(i);
        if source_terms.is_empty() {
            let _ = writeln!(out, "  psi{}(u) = 0", i + 1);
        } else {
            let parts: Vec<String> = source_terms.iter().map(|t| t.describe()).collect();
            let _ = writeln!(out, "  psi{}(u) = {}", i + 1, parts.join(" "));
        }
        let _ = writeln!(out);
    }
    out
}

fn matrix_text(m: &Mat3, dim: usize) -> String {
    let mut rows = Vec::new();
    for r in m.iter().take(dim) {
        let cols: Vec<String> = r.iter().take(dim).map(|x| crate::io::fmt_sci(*x)).collect();
        rows.push(cols.join(" "));
    }
    format!("[{}]", rows.join("; "))
}
