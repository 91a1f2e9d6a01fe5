//! Velocity–pressure pairs by name.

use super::{direct_sum, lagrange, macro_element, Family, FeSpace, Level};
use crate::error::{Error, Result};
use crate::mesh::RefinedMesh;
use serde::Serialize;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum PairKind {
    /// Modified face bubbles with macro-cell constants.
    MfP0,
    /// `P̊₁ᶜ(𝒯ₕ) + V_h^MF` with macro-cell constants.
    Cor52,
    /// `P̊ₖᶜ(𝒯ₕʳ)` with broken `P̊ₖ₋₁(𝒯ₕʳ)`.
    PkPk1r,
    /// `P̊ₖᶜ(𝒯ₕʳ) + V_h^MF` with broken `P̊ₖ₋₁(𝒯ₕʳ)`, `k < d`.
    Cor64,
    /// `V_h^div` with `W_h^R`.
    VdivWr,
    /// `P₁(K) + V^S(K) + V^MF(K)` elements with `W_h^R`.
    Cor68,
    /// `V_h^R` with `W_h^R` (the reduced local space in 2D).
    VrWr,
    /// `P̊ₖᶜ(𝒯ₕ)` with macro-cell constants.
    PkP0,
    /// Bernardi–Raugel bubbles with macro-cell constants.
    BrP0,
}

pub const ALL_PAIRS: [PairKind; 9] =
    [PairKind::MfP0, PairKind::Cor52, PairKind::PkPk1r, PairKind::Cor64, PairKind::VdivWr, PairKind::Cor68, PairKind::VrWr, PairKind::PkP0, PairKind::BrP0];

impl PairKind {
    pub fn parse(s: &str) -> Result<Self> {
        let t = s.to_ascii_lowercase().replace('_', "-");
        Ok(match t.as_str() {
            "mf-p0" | "mf" => PairKind::MfP0,
            "cor5.2" | "p1+mf-p0" => PairKind::Cor52,
            "pk-pk-1r" | "pk-pk-1" | "sv" => PairKind::PkPk1r,
            "cor6.4" | "pk+mf-pk-1r" => PairKind::Cor64,
            "vdiv-wr" | "vdiv" => PairKind::VdivWr,
            "cor6.8" | "p1+vs+mf-wr" => PairKind::Cor68,
            "vr-wr" | "vr" => PairKind::VrWr,
            "pk-p0" => PairKind::PkP0,
            "br-p0" | "br" => PairKind::BrP0,
            _ => return Err(Error::UnsupportedKind(s.to_string())),
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            PairKind::MfP0 => "mf-p0",
            PairKind::Cor52 => "cor5.2",
            PairKind::PkPk1r => "pk-pk-1r",
            PairKind::Cor64 => "cor6.4",
            PairKind::VdivWr => "vdiv-wr",
            PairKind::Cor68 => "cor6.8",
            PairKind::VrWr => "vr-wr",
            PairKind::PkP0 => "pk-p0",
            PairKind::BrP0 => "br-p0",
        }
    }

    /// Whether `k` is meaningful for the pair.
    pub fn uses_k(self) -> bool {
        matches!(self, PairKind::PkPk1r | PairKind::Cor64 | PairKind::PkP0)
    }

    pub fn divergence_free(self) -> bool {
        !matches!(self, PairKind::PkP0 | PairKind::BrP0)
    }

    /// Pairs with a proven mesh-independent inf-sup constant.
    pub fn certified(self, d: usize, k: usize) -> bool {
        match self {
            PairKind::Cor52 | PairKind::Cor68 | PairKind::VrWr | PairKind::MfP0 | PairKind::VdivWr | PairKind::BrP0 => true,
            PairKind::PkPk1r => k >= d,
            PairKind::Cor64 => (1..d).contains(&k),
            PairKind::PkP0 => false,
        }
    }
}

impl std::fmt::Display for PairKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone)]
pub struct StokesPair {
    pub kind: PairKind,
    pub k: usize,
    pub velocity: FeSpace,
    pub pressure: FeSpace,
}

impl StokesPair {
    pub fn refined(&self) -> &Arc<RefinedMesh> {
        &self.velocity.refined
    }
}

pub fn build_pair(kind: PairKind, refined: &Arc<RefinedMesh>, k: usize) -> Result<StokesPair> {
    let d = refined.dim();
    if kind.uses_k() && k == 0 {
        return Err(Error::UnsupportedDegree(0));
    }
    let k = if kind.uses_k() { k } else { 1 };
    let p0 = || lagrange(refined, Level::Macro, 0, false, 1, false);
    let wr = || lagrange(refined, Level::Refined, 1, true, 1, false);
    let broken = || lagrange(refined, Level::Refined, k - 1, false, 1, false);
    let vec_p = |level, k| lagrange(refined, level, k, true, d, true);
    let mf = || macro_element(refined, Family::Mf, true);
    let (velocity, pressure) = match kind {
        PairKind::MfP0 => (mf()?, p0()?),
        PairKind::Cor52 => (direct_sum("oP1c+VMF", &[&vec_p(Level::Macro, 1)?, &mf()?])?, p0()?),
        PairKind::PkPk1r => (vec_p(Level::Refined, k)?, broken()?),
        PairKind::Cor64 => {
            if k >= d {
                return Err(Error::DimensionRule(format!("k < d for {kind}, got k = {k}, d = {d}")));
            }
            (direct_sum(&format!("oP{k}cr+VMF"), &[&vec_p(Level::Refined, k)?, &mf()?])?, broken()?)
        }
        PairKind::VdivWr => (macro_element(refined, Family::VDiv, true)?, wr()?),
        PairKind::Cor68 => (macro_element(refined, Family::Cor68, true)?, wr()?),
        PairKind::VrWr => {
            let fam = if d == 2 { Family::VRReduced } else { Family::VR };
            (macro_element(refined, fam, true)?, wr()?)
        }
        PairKind::PkP0 => (vec_p(Level::Macro, k)?, p0()?),
        PairKind::BrP0 => (macro_element(refined, Family::Br, true)?, p0()?),
    };
    Ok(StokesPair { kind, k, velocity, pressure })
}
