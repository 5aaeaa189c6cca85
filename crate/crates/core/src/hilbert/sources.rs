//! Interaction (source) terms of the mixture.
//!
//! Each species carries a microscopic source `G_i(f_1, …, f_n, v)` built from
//! a small algebraic family evaluated on the ratios `f_j / M_j`, divided by
//! the measure `|V|`. Projecting `G_i` over velocity therefore reproduces the
//! same algebra on the macroscopic densities — the closed-form reaction
//! `ψ_i(u)` — and the crate keeps both evaluation routes so they can be
//! checked against each other.
//!
//! Built-in terms (all rates signed):
//!
//! - `Constant`: supply at a fixed rate;
//! - `Linear`: `rate · u_f`;
//! - `MassAction`: `rate · Π u_f` over a list of fields (repeats allowed);
//! - `Logistic`: `rate · u_f (1 - u_f^exponent)`;
//! - `Saturation`: Beddington–deAngelis law `rate · u_a u_b / (k + θ_sat u_a)`
//!   (the saturation parameter is named `theta_sat` to keep it apart from the
//!   kinetic `θ(v)` profiles);
//! - `Hook`: arbitrary pointwise function of the macroscopic state, for
//!   user-supplied laws. Hooks act on the state only, which keeps them
//!   stable under `O(eps)` perturbations of their arguments by construction.

use crate::error::Error;
use crate::velocity::{Equilibrium, VelocityGrid};
use crate::Result;

/// One algebraic source term.
#[derive(Debug, Clone)]
pub enum SourceTerm {
    Constant {
        rate: f64,
    },
    Linear {
        rate: f64,
        field: usize,
    },
    MassAction {
        rate: f64,
        fields: Vec<usize>,
    },
    Logistic {
        rate: f64,
        exponent: f64,
        field: usize,
    },
    Saturation {
        rate: f64,
        /// `[a, b]` in `u_a u_b / (k + θ_sat u_a)`.
        numerator: [usize; 2],
        saturation: f64,
        theta_sat: f64,
    },
    Hook {
        f: fn(&[f64]) -> f64,
    },
}

impl PartialEq for SourceTerm {
    fn eq(&self, other: &Self) -> bool {
        use SourceTerm::*;
        match (self, other) {
            (Constant { rate: a }, Constant { rate: b }) => a == b,
            (
                Linear { rate: a, field: fa },
                Linear { rate: b, field: fb },
            ) => a == b && fa == fb,
            (
                MassAction { rate: a, fields: fa },
                MassAction { rate: b, fields: fb },
            ) => a == b && fa == fb,
            (
                Logistic { rate: a, exponent: ea, field: fa },
                Logistic { rate: b, exponent: eb, field: fb },
            ) => a == b && ea == eb && fa == fb,
            (
                Saturation { rate: a, numerator: na, saturation: sa, theta_sat: ta },
                Saturation { rate: b, numerator: nb, saturation: sb, theta_sat: tb },
            ) => a == b && na == nb && sa == sb && ta == tb,
            (Hook { f: a }, Hook { f: b }) => std::ptr::fn_addr_eq(*a, *b),
            _ => false,
        }
    }
}

impl SourceTerm {
    fn max_field(&self) -> Option<usize> {
        match self {
            SourceTerm::Constant { .. } | SourceTerm::Hook { .. } => None,
            SourceTerm::Linear { field, .. } | SourceTerm::Logistic { field, .. } => Some(*field),
            SourceTerm::MassAction { fields, .. } => fields.iter().copied().max(),
            SourceTerm::Saturation { numerator, .. } => Some(numerator[0].max(numerator[1])),
        }
    }

    /// Evaluate the term on a macroscopic state (or on pointwise ratios
    /// `f/M`, which share the same algebra).
    pub fn eval(&self, u: &[f64]) -> Result<f64> {
        Ok(match self {
            SourceTerm::Constant { rate } => *rate,
            SourceTerm::Linear { rate, field } => rate * u[*field],
            SourceTerm::MassAction { rate, fields } => {
                rate * fields.iter().map(|f| u[*f]).product::<f64>()
            }
            SourceTerm::Logistic {
                rate,
                exponent,
                field,
            } => rate * u[*field] * (1.0 - u[*field].powf(*exponent)),
            SourceTerm::Saturation {
                rate,
                numerator,
                saturation,
                theta_sat,
            } => {
                let denom = saturation + theta_sat * u[numerator[0]];
                if denom <= 0.0 {
                    return Err(Error::SaturationDenominator(denom));
                }
                rate * u[numerator[0]] * u[numerator[1]] / denom
            }
            SourceTerm::Hook { f } => f(u),
        })
    }

    /// Human-readable form used by derivation reports.
    pub fn describe(&self) -> String {
        match self {
            SourceTerm::Constant { rate } => format!("{rate:+.6}"),
            SourceTerm::Linear { rate, field } => format!("{rate:+.6}*u{}", field + 1),
            SourceTerm::MassAction { rate, fields } => {
                let fs: Vec<String> = fields.iter().map(|f| format!("u{}", f + 1)).collect();
                format!("{rate:+.6}*{}", fs.join("*"))
            }
            SourceTerm::Logistic {
                rate,
                exponent,
                field,
            } => format!("{rate:+.6}*u{0}*(1-u{0}^{exponent})", field + 1),
            SourceTerm::Saturation {
                rate,
                numerator,
                saturation,
                theta_sat,
            } => format!(
                "{rate:+.6}*u{}*u{}/({saturation}+{theta_sat}*u{})",
                numerator[0] + 1,
                numerator[1] + 1,
                numerator[0] + 1
            ),
            SourceTerm::Hook { .. } => "+hook(u)".into(),
        }
    }
}

/// Source terms for every species of a mixture.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceSpec {
    n: usize,
    terms: Vec<Vec<SourceTerm>>,
}

impl SourceSpec {
    pub fn new(n: usize, terms: Vec<Vec<SourceTerm>>) -> Result<Self> {
        if terms.len() != n {
            return Err(Error::SpeciesMismatch(format!(
                "source spec lists {} species, mixture has {n}",
                terms.len()
            )));
        }
        for (i, per) in terms.iter().enumerate() {
            for t in per {
                if let Some(f) = t.max_field() {
                    if f >= n {
                        return Err(Error::SpeciesMismatch(format!(
                            "source of species {} references field u_{} beyond the {n} species",
                            i + 1,
                            f + 1
                        )));
                    }
                }
            }
        }
        Ok(SourceSpec { n, terms })
    }

    /// A spec with no interactions at all.
    pub fn none(n: usize) -> Self {
        SourceSpec {
            n,
            terms: vec![Vec::new(); n],
        }
    }

    pub fn species(&self) -> usize {
        self.n
    }

    pub fn terms(&self, i: usize) -> &[SourceTerm] {
        &self.terms[i]
    }

    pub fn is_empty(&self) -> bool {
        self.terms.iter().all(|t| t.is_empty())
    }

    /// True when no species carries a user hook; only hook-free specs can be
    /// written to model files.
    pub fn is_serialisable(&self) -> bool {
        self.terms
            .iter()
            .flatten()
            .all(|t| !matches!(t, SourceTerm::Hook { .. }))
    }

    /// Closed-form reaction `ψ_i(u)`.
    pub fn closed_form(&self, i: usize, u: &[f64]) -> Result<f64> {
        if u.len() != self.n {
            return Err(Error::LengthMismatch {
                what: "macroscopic state",
                expected: self.n,
                got: u.len(),
            });
        }
        let mut total = 0.0;
        for t in &self.terms[i] {
            total += t.eval(u)?;
        }
        Ok(total)
    }

    /// Microscopic source value `G_i` at one velocity node, given the
    /// pointwise ratios `f_j(v)/M_j(v)` and the measure `|V|`.
    pub fn microscopic(&self, i: usize, ratios: &[f64], measure: f64) -> Result<f64> {
        let mut total = 0.0;
        for t in &self.terms[i] {
            total += t.eval(ratios)?;
        }
        Ok(total / measure)
    }

    /// Quadrature route: `ψ_i(u) = ⟨ G_i(M_1 u_1, …, M_n u_n, v) ⟩`.
    pub fn projected(
        &self,
        i: usize,
        grid: &VelocityGrid,
        equilibria: &[Equilibrium],
        u: &[f64],
    ) -> Result<f64> {
        if u.len() != self.n || equilibria.len() != self.n {
            return Err(Error::LengthMismatch {
                what: "macroscopic state",
                expected: self.n,
                got: u.len().min(equilibria.len()),
            });
        }
        let mut total = 0.0;
        let mut ratios = vec![0.0; self.n];
        for k in 0..grid.len() {
            for (j, r) in ratios.iter_mut().enumerate() {
                let m = equilibria[j].value(k);
                *r = (m * u[j]) / m;
            }
            total += grid.weight(k) * self.microscopic(i, &ratios, grid.measure())?;
        }
        Ok(total)
    }
}
