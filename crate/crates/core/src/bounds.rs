//! Perturbation bounds for the generalized Cholesky factor.
//!
//! Normwise bounds take the unperturbed factor `L` and `‖ΔK‖_F`.
//! Componentwise bounds take the factor `L̃` of the perturbed matrix and the
//! envelope constant `ε` of `|ΔK| ≤ ε |L̃| |L̃ᵀ|`.
//!
//! Infima over positive diagonal scalings `D` are approximated by the
//! minimum over a small [`ScalingCandidateSet`]; every scaled bound records
//! which candidate won.
//!
//! Conditions are strict floating-point comparisons with no tolerance.

use std::f64::consts::SQRT_2;

use crate::densela::{
    cond_bauer_skeel_with_inverse, fro_norm, gamma_k, lower_tri_inverse, matmul, spectral_norm,
    DiagScaling, Matrix,
};
use crate::error::{Condition, Error, Result};

/// `2 + √2`, the gap between the rigorous and first-order bounds.
pub const RIGOROUS_FACTOR: f64 = 2.0 + SQRT_2;

/// Discriminants closer than this to zero mark a report as near-boundary.
pub const NEAR_BOUNDARY: f64 = 1e-15;

/// Floor applied to the row maxima of `|L⁻¹||L|` before inversion.
const ROW_FLOOR: f64 = 1e-300;

pub const LABEL_IDENTITY: &str = "identity";
pub const LABEL_COL_EQUILIBRATE: &str = "col-equilibrate-L";
pub const LABEL_ROW_EQUILIBRATE: &str = "row-equilibrate-bauer";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScalingPurpose {
    /// Minimizing `κ₂(L D⁻¹)`.
    KappaMin,
    /// Minimizing `‖L̃ D⁻¹‖₂ ‖D |L̃⁻¹||L̃|‖₂`.
    Componentwise,
}

/// Labelled diagonal scalings. Always nonempty, always starts with the identity.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalingCandidateSet {
    candidates: Vec<DiagScaling>,
    labels: Vec<String>,
}

impl ScalingCandidateSet {
    pub fn identity_only(order: usize) -> Self {
        Self {
            candidates: vec![DiagScaling::identity(order)],
            labels: vec![LABEL_IDENTITY.to_string()],
        }
    }

    /// Appends a candidate. Its order must match the identity's.
    pub fn push(&mut self, label: impl Into<String>, d: DiagScaling) -> Result<()> {
        if d.order() != self.candidates[0].order() {
            return Err(Error::InvalidArgument(format!(
                "scaling of order {} added to a set of order {}",
                d.order(),
                self.candidates[0].order()
            )));
        }
        self.candidates.push(d);
        self.labels.push(label.into());
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn candidates(&self) -> &[DiagScaling] {
        &self.candidates
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn get(&self, label: &str) -> Option<&DiagScaling> {
        self.labels.iter().position(|l| l == label).map(|i| &self.candidates[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &DiagScaling)> {
        self.labels.iter().map(String::as_str).zip(&self.candidates)
    }
}

/// Heuristic scalings for a nonsingular lower-triangular `L`.
///
/// * `col-equilibrate-L`: `D_jj = ‖L e_j‖₂`, so `L D⁻¹` has unit columns.
/// * `row-equilibrate-bauer` (componentwise only): `D_jj = 1 / max_k (|L⁻¹||L|)_jk`.
pub fn scaling_candidates(l: &Matrix, purpose: ScalingPurpose) -> Result<ScalingCandidateSet> {
    let l_inv = lower_tri_inverse(l).map_err(|_| Error::Singular)?;
    scaling_candidates_with_inverse(l, &l_inv, purpose)
}

fn scaling_candidates_with_inverse(
    l: &Matrix,
    l_inv: &Matrix,
    purpose: ScalingPurpose,
) -> Result<ScalingCandidateSet> {
    let p = l.rows();
    let mut set = ScalingCandidateSet::identity_only(p);
    let col_norms: Vec<f64> = (0..p)
        .map(|j| {
            let col: Vec<f64> = (0..p).map(|i| l[(i, j)]).collect();
            crate::densela::vec_norm2(&col).max(ROW_FLOOR)
        })
        .collect();
    set.push(LABEL_COL_EQUILIBRATE, DiagScaling::new(col_norms)?)?;
    if purpose == ScalingPurpose::Componentwise {
        let prod = matmul(&l_inv.abs(), &l.abs())?;
        let d: Vec<f64> = (0..p)
            .map(|i| 1.0 / prod.row(i).iter().fold(ROW_FLOOR, |m, &v| m.max(v)))
            .collect();
        set.push(LABEL_ROW_EQUILIBRATE, DiagScaling::new(d)?)?;
    }
    Ok(set)
}

/// A bound value and the label of the scaling that achieved it.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledBound {
    pub value: f64,
    pub label: String,
}

#[derive(Clone, Debug)]
struct NormwiseCandidate {
    label: String,
    /// `κ₂(L D⁻¹) = ‖L D⁻¹‖₂ ‖D L⁻¹‖₂`
    kappa_ld: f64,
    /// `‖D L⁻¹‖₂`
    d_linv_2: f64,
    /// `‖D⁻¹‖₂`
    dinv_2: f64,
}

/// Norms of `L` needed by every normwise bound, computed once per factor.
#[derive(Clone, Debug)]
pub struct NormwiseContext {
    linv_2: f64,
    linv_f: f64,
    l_2: f64,
    k_2: Option<f64>,
    candidates: Vec<NormwiseCandidate>,
}

impl NormwiseContext {
    /// `k` is the unperturbed `K`, only needed for the refined matrix
    /// equation bound.
    pub fn new(l: &Matrix, k: Option<&Matrix>, set: &ScalingCandidateSet) -> Result<Self> {
        let l_inv = lower_tri_inverse(l).map_err(|_| Error::Singular)?;
        let linv_2 = spectral_norm(&l_inv)?;
        let linv_f = fro_norm(&l_inv);
        let l_2 = spectral_norm(l)?;
        let k_2 = k.map(spectral_norm).transpose()?;
        let mut candidates = Vec::with_capacity(set.len());
        for (label, d) in set.iter() {
            if d.order() != l.rows() {
                return Err(Error::InvalidArgument(format!(
                    "scaling '{label}' has order {} but L has order {}",
                    d.order(),
                    l.rows()
                )));
            }
            let (ld_2, d_linv_2) = if d.is_identity() {
                (l_2, linv_2)
            } else {
                (spectral_norm(&d.right_div(l))?, spectral_norm(&d.left_mul(&l_inv))?)
            };
            candidates.push(NormwiseCandidate {
                label: label.to_string(),
                kappa_ld: ld_2 * d_linv_2,
                d_linv_2,
                dinv_2: d.inv_norm2(),
            });
        }
        Ok(Self {
            linv_2,
            linv_f,
            l_2,
            k_2,
            candidates,
        })
    }

    /// `‖L⁻¹‖₂`
    pub fn linv_2(&self) -> f64 {
        self.linv_2
    }

    /// `‖L⁻¹‖_F`
    pub fn linv_f(&self) -> f64 {
        self.linv_f
    }

    /// `‖L‖₂`
    pub fn l_2(&self) -> f64 {
        self.l_2
    }

    /// `κ₂(L) = ‖L‖₂ ‖L⁻¹‖₂`
    pub fn kappa_l(&self) -> f64 {
        self.l_2 * self.linv_2
    }

    pub fn k_2(&self) -> Option<f64> {
        self.k_2
    }

    /// `κ₂(L D⁻¹)` for a labelled candidate.
    pub fn kappa_scaled(&self, label: &str) -> Option<f64> {
        self.candidates.iter().find(|c| c.label == label).map(|c| c.kappa_ld)
    }

    /// Smallest `κ₂(L D⁻¹)` over the candidates; ties go to the earlier one.
    pub fn best_kappa(&self) -> (f64, &str) {
        let mut best = &self.candidates[0];
        for c in &self.candidates[1..] {
            if c.kappa_ld < best.kappa_ld {
                best = c;
            }
        }
        (best.kappa_ld, &best.label)
    }

    /// Left side of the normwise condition, `‖L⁻¹‖₂² ‖ΔK‖_F`.
    pub fn normwise_level(&self, dk_fro: f64) -> f64 {
        self.linv_2 * self.linv_2 * dk_fro
    }

    pub fn cond_3_1(&self, dk_fro: f64) -> bool {
        self.normwise_level(dk_fro) < 0.5
    }

    pub fn cond_3_12(&self, dk_fro: f64) -> bool {
        self.linv_f * self.linv_f * dk_fro < 0.5
    }

    fn require_3_1(&self, dk_fro: f64) -> Result<f64> {
        if !self.cond_3_1(dk_fro) {
            return Err(Error::ConditionViolated(Condition::Normwise));
        }
        Ok((1.0 - 2.0 * self.normwise_level(dk_fro)).sqrt())
    }

    /// Rigorous scaled bound with denominator `√2 − 1 + √(1 − 2‖L⁻¹‖₂²‖ΔK‖_F)`.
    pub fn bound_3_3(&self, dk_fro: f64) -> Result<LabeledBound> {
        let root = self.require_3_1(dk_fro)?;
        let (kappa, label) = self.best_kappa();
        Ok(LabeledBound {
            value: SQRT_2 * self.linv_2 * kappa * dk_fro / (SQRT_2 - 1.0 + root),
            label: label.to_string(),
        })
    }

    /// Simplified rigorous bound `(2 + √2) ‖L⁻¹‖₂ min_D κ₂(LD⁻¹) ‖ΔK‖_F`.
    pub fn bound_3_4(&self, dk_fro: f64) -> Result<LabeledBound> {
        self.require_3_1(dk_fro)?;
        let (kappa, label) = self.best_kappa();
        Ok(LabeledBound {
            value: RIGOROUS_FACTOR * (self.linv_2 * kappa * dk_fro),
            label: label.to_string(),
        })
    }

    /// Leading first-order term `‖L⁻¹‖₂ min_D κ₂(LD⁻¹) ‖ΔK‖_F`.
    pub fn bound_3_11_coeff(&self, dk_fro: f64) -> f64 {
        self.linv_2 * self.best_kappa().0 * dk_fro
    }

    /// Classic matrix-equation bound, under `‖L⁻¹‖_F² ‖ΔK‖_F < 1/2`.
    pub fn bound_3_12(&self, dk_fro: f64) -> Result<f64> {
        if !self.cond_3_12(dk_fro) {
            return Err(Error::ConditionViolated(Condition::FrobeniusInverse));
        }
        let root = (1.0 - 2.0 * self.linv_f * self.linv_f * dk_fro).sqrt();
        Ok(SQRT_2 * self.linv_2 * self.kappa_l() * dk_fro / (1.0 + root))
    }

    /// The classic bound with `‖L⁻¹‖_F` replaced by `‖L⁻¹‖₂` in the root.
    pub fn bound_3_13(&self, dk_fro: f64) -> Result<f64> {
        let root = self.require_3_1(dk_fro)?;
        Ok(SQRT_2 * self.linv_2 * self.kappa_l() * dk_fro / (1.0 + root))
    }

    /// [`bound_3_3`](Self::bound_3_3) with `D = I`.
    pub fn bound_3_14(&self, dk_fro: f64) -> Result<f64> {
        let root = self.require_3_1(dk_fro)?;
        Ok(SQRT_2 * self.linv_2 * self.kappa_l() * dk_fro / (SQRT_2 - 1.0 + root))
    }

    /// Left side of the refined-matrix-equation condition for every
    /// candidate, in candidate order.
    pub fn cond_3_18_lhs(&self, dk_fro: f64) -> Result<Vec<(String, f64)>> {
        let k_2 = self.k_2.ok_or_else(|| {
            Error::InvalidArgument("refined matrix equation bound needs ||K||_2".into())
        })?;
        let kappa_l = self.kappa_l();
        Ok(self
            .candidates
            .iter()
            .map(|c| {
                let lhs = kappa_l * self.l_2 * c.d_linv_2 * c.dinv_2 * (dk_fro / k_2);
                (c.label.clone(), lhs)
            })
            .collect())
    }

    /// Refined matrix-equation bound minimized over the candidates that
    /// satisfy its own condition. Also returns the labels excluded by it.
    pub fn bound_3_17(&self, dk_fro: f64) -> Result<(LabeledBound, Vec<String>)> {
        let k_2 = self.k_2.ok_or_else(|| {
            Error::InvalidArgument("refined matrix equation bound needs ||K||_2".into())
        })?;
        let lhs = self.cond_3_18_lhs(dk_fro)?;
        let scale = 2.0 * self.l_2 * self.kappa_l() * (dk_fro / k_2);
        let mut best: Option<LabeledBound> = None;
        let mut excluded = Vec::new();
        for (c, (label, left)) in self.candidates.iter().zip(lhs) {
            if !(left < 0.25) {
                excluded.push(label);
                continue;
            }
            let v = scale * c.kappa_ld / (1.0 + (1.0 - 4.0 * left).sqrt());
            if best.as_ref().is_none_or(|b| v < b.value) {
                best = Some(LabeledBound { value: v, label });
            }
        }
        best.map(|b| (b, excluded))
            .ok_or(Error::ConditionViolated(Condition::RefinedMatrixEquation))
    }

    /// Collects every normwise bound for one perturbation size.
    ///
    /// `w_inv_norm` is `‖W⁻¹‖₂` when the matrix-vector-equation bound is
    /// wanted; `actual` is the true `ΔL` when known.
    pub fn report(
        &self,
        dk_fro: f64,
        w_inv_norm: Option<f64>,
        actual: Option<&Matrix>,
    ) -> Result<NormwiseBoundReport> {
        let cond_3_1_ok = self.cond_3_1(dk_fro);
        let cond_3_12_ok = self.cond_3_12(dk_fro);
        let cond_3_16_ok = w_inv_norm.map(|w| cond_3_16(w, dk_fro));
        let b_3_17 = if self.k_2.is_some() {
            match self.bound_3_17(dk_fro) {
                Ok(b) => Some(b),
                Err(Error::ConditionViolated(_)) => None,
                Err(e) => return Err(e),
            }
        } else {
            None
        };
        let b_3_17_excluded = match &b_3_17 {
            Some((_, ex)) => ex.clone(),
            None if self.k_2.is_some() => self.candidates.iter().map(|c| c.label.clone()).collect(),
            None => Vec::new(),
        };
        let near = cond_3_1_ok && 1.0 - 2.0 * self.normwise_level(dk_fro) < NEAR_BOUNDARY;
        let (actual_dl_fro, actual_dl_2) = match actual {
            Some(d) => (Some(fro_norm(d)), Some(spectral_norm(d)?)),
            None => (None, None),
        };
        Ok(NormwiseBoundReport {
            dk_fro,
            linv_2: self.linv_2,
            kappa_l: self.kappa_l(),
            cond_3_1_ok,
            cond_3_12_ok,
            cond_3_16_ok,
            cond_3_18_ok: b_3_17.is_some(),
            b_3_3: self.bound_3_3(dk_fro).ok(),
            b_3_4: self.bound_3_4(dk_fro).ok(),
            b_3_11_coeff: self.bound_3_11_coeff(dk_fro),
            b_3_12: self.bound_3_12(dk_fro).ok(),
            b_3_13: self.bound_3_13(dk_fro).ok(),
            b_3_14: self.bound_3_14(dk_fro).ok(),
            b_3_15: w_inv_norm.and_then(|w| bound_3_15(w, dk_fro).ok()),
            b_3_17: b_3_17.map(|(b, _)| b),
            b_3_17_excluded,
            near_boundary: near,
            actual_dl_fro,
            actual_dl_2,
        })
    }
}

/// Every normwise bound for one `(L, ΔK)` pair. A bound is `None` exactly
/// when its condition failed (or, for `b_3_15`, when `W` was not built).
#[derive(Clone, Debug, PartialEq)]
pub struct NormwiseBoundReport {
    pub dk_fro: f64,
    pub linv_2: f64,
    pub kappa_l: f64,
    pub cond_3_1_ok: bool,
    pub cond_3_12_ok: bool,
    /// `None` when `‖W⁻¹‖₂` was not computed.
    pub cond_3_16_ok: Option<bool>,
    pub cond_3_18_ok: bool,
    pub b_3_3: Option<LabeledBound>,
    pub b_3_4: Option<LabeledBound>,
    pub b_3_11_coeff: f64,
    pub b_3_12: Option<f64>,
    pub b_3_13: Option<f64>,
    pub b_3_14: Option<f64>,
    pub b_3_15: Option<f64>,
    pub b_3_17: Option<LabeledBound>,
    pub b_3_17_excluded: Vec<String>,
    pub near_boundary: bool,
    pub actual_dl_fro: Option<f64>,
    pub actual_dl_2: Option<f64>,
}

impl NormwiseBoundReport {
    /// The rigorous bounds that are present, by field name.
    pub fn rigorous_bounds(&self) -> Vec<(&'static str, f64)> {
        let mut out = Vec::new();
        if let Some(b) = &self.b_3_3 {
            out.push(("b_3_3", b.value));
        }
        if let Some(b) = &self.b_3_4 {
            out.push(("b_3_4", b.value));
        }
        for (name, v) in [
            ("b_3_12", self.b_3_12),
            ("b_3_13", self.b_3_13),
            ("b_3_14", self.b_3_14),
            ("b_3_15", self.b_3_15),
        ] {
            if let Some(v) = v {
                out.push((name, v));
            }
        }
        if let Some(b) = &self.b_3_17 {
            out.push(("b_3_17", b.value));
        }
        out
    }
}

pub fn cond_3_16(w_inv_norm: f64, dk_fro: f64) -> bool {
    w_inv_norm * w_inv_norm * dk_fro < 0.25
}

/// Normwise applicability check `‖L⁻¹‖₂² ‖ΔK‖_F < 1/2`.
pub fn check_condition_3_1(l: &Matrix, dk_fro: f64) -> Result<bool> {
    let linv = lower_tri_inverse(l).map_err(|_| Error::Singular)?;
    let n = spectral_norm(&linv)?;
    Ok(n * n * dk_fro < 0.5)
}

pub fn bound_3_3(l: &Matrix, dk_fro: f64, set: &ScalingCandidateSet) -> Result<LabeledBound> {
    NormwiseContext::new(l, None, set)?.bound_3_3(dk_fro)
}

pub fn bound_3_4(l: &Matrix, dk_fro: f64, set: &ScalingCandidateSet) -> Result<LabeledBound> {
    NormwiseContext::new(l, None, set)?.bound_3_4(dk_fro)
}

pub fn bound_3_11_coeff(l: &Matrix, dk_fro: f64, set: &ScalingCandidateSet) -> Result<f64> {
    Ok(NormwiseContext::new(l, None, set)?.bound_3_11_coeff(dk_fro))
}

pub fn bound_3_12(l: &Matrix, dk_fro: f64) -> Result<f64> {
    NormwiseContext::new(l, None, &ScalingCandidateSet::identity_only(l.rows()))?.bound_3_12(dk_fro)
}

pub fn bound_3_13(l: &Matrix, dk_fro: f64) -> Result<f64> {
    NormwiseContext::new(l, None, &ScalingCandidateSet::identity_only(l.rows()))?.bound_3_13(dk_fro)
}

pub fn bound_3_14(l: &Matrix, dk_fro: f64) -> Result<f64> {
    NormwiseContext::new(l, None, &ScalingCandidateSet::identity_only(l.rows()))?.bound_3_14(dk_fro)
}

/// Matrix-vector-equation bound `2 ‖W⁻¹‖₂ ‖ΔK‖_F`, under `‖W⁻¹‖₂² ‖ΔK‖_F < 1/4`.
pub fn bound_3_15(w_inv_norm: f64, dk_fro: f64) -> Result<f64> {
    if !cond_3_16(w_inv_norm, dk_fro) {
        return Err(Error::ConditionViolated(Condition::WOperator));
    }
    Ok(2.0 * w_inv_norm * dk_fro)
}

pub fn bound_3_17(
    l: &Matrix,
    k: &Matrix,
    dk_fro: f64,
    set: &ScalingCandidateSet,
) -> Result<(LabeledBound, Vec<String>)> {
    NormwiseContext::new(l, Some(k), set)?.bound_3_17(dk_fro)
}

/// How `ε` is formed from `γ_{3m+1}` and `γ_{3n+1}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EpsConvention {
    /// `min{γ_{3m+1}, γ_{3n+1}}`, as printed.
    MinPaper,
    /// `max{γ_{3m+1}, γ_{3n+1}}`, which covers every block's envelope.
    MaxSafe,
}

impl EpsConvention {
    pub fn label(self) -> &'static str {
        match self {
            EpsConvention::MinPaper => "min-paper",
            EpsConvention::MaxSafe => "max-safe",
        }
    }
}

impl std::str::FromStr for EpsConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "min-paper" => Ok(EpsConvention::MinPaper),
            "max-safe" => Ok(EpsConvention::MaxSafe),
            other => Err(Error::InvalidArgument(format!("unknown eps convention '{other}'"))),
        }
    }
}

impl std::fmt::Display for EpsConvention {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Envelope constant of the backward error of the block factorization.
pub fn eps_componentwise(m: usize, n: usize, u: f64, convention: EpsConvention) -> Result<f64> {
    let ga = gamma_k(3 * m + 1, u)?;
    let gc = gamma_k(3 * n + 1, u)?;
    Ok(match convention {
        EpsConvention::MinPaper => ga.min(gc),
        EpsConvention::MaxSafe => ga.max(gc),
    })
}

#[derive(Clone, Debug)]
struct ComponentwiseCandidate {
    label: String,
    /// `‖L̃ D⁻¹‖₂ ‖D |L̃⁻¹||L̃|‖₂`
    product: f64,
}

/// Quantities of `L̃` shared by the componentwise bounds.
#[derive(Clone, Debug)]
pub struct ComponentwiseContext {
    cond_l: f64,
    cond_linvt: f64,
    candidates: Vec<ComponentwiseCandidate>,
}

impl ComponentwiseContext {
    pub fn new(l_tilde: &Matrix, set: &ScalingCandidateSet) -> Result<Self> {
        let l_inv = lower_tri_inverse(l_tilde).map_err(|_| Error::Singular)?;
        let cond_l = cond_bauer_skeel_with_inverse(l_tilde, &l_inv)?;
        // (L̃⁻ᵀ)⁻¹ = L̃ᵀ exactly
        let cond_linvt = cond_bauer_skeel_with_inverse(&l_inv.transpose(), &l_tilde.transpose())?;
        let prod = matmul(&l_inv.abs(), &l_tilde.abs())?;
        let mut candidates = Vec::with_capacity(set.len());
        for (label, d) in set.iter() {
            if d.order() != l_tilde.rows() {
                return Err(Error::InvalidArgument(format!(
                    "scaling '{label}' has order {} but L has order {}",
                    d.order(),
                    l_tilde.rows()
                )));
            }
            let product = spectral_norm(&d.right_div(l_tilde))? * spectral_norm(&d.left_mul(&prod))?;
            candidates.push(ComponentwiseCandidate {
                label: label.to_string(),
                product,
            });
        }
        Ok(Self {
            cond_l,
            cond_linvt,
            candidates,
        })
    }

    /// `cond_F(L̃)`
    pub fn cond_l(&self) -> f64 {
        self.cond_l
    }

    /// `cond_F(L̃⁻ᵀ)`
    pub fn cond_linvt(&self) -> f64 {
        self.cond_linvt
    }

    fn best(&self) -> (f64, &str) {
        let mut best = &self.candidates[0];
        for c in &self.candidates[1..] {
            if c.product < best.product {
                best = c;
            }
        }
        (best.product * self.cond_l, &best.label)
    }

    pub fn level(&self, eps: f64) -> f64 {
        self.cond_l * self.cond_linvt * eps
    }

    pub fn cond_4_2(&self, eps: f64) -> bool {
        self.level(eps) < 0.5
    }

    pub fn bound_4_3(&self, eps: f64) -> Result<LabeledBound> {
        if !self.cond_4_2(eps) {
            return Err(Error::ConditionViolated(Condition::Componentwise));
        }
        let root = (1.0 - 2.0 * self.level(eps)).sqrt();
        let (x, label) = self.best();
        Ok(LabeledBound {
            value: SQRT_2 * x * eps / (SQRT_2 - 1.0 + root),
            label: label.to_string(),
        })
    }

    pub fn bound_4_4(&self, eps: f64) -> Result<f64> {
        if !self.cond_4_2(eps) {
            return Err(Error::ConditionViolated(Condition::Componentwise));
        }
        Ok(RIGOROUS_FACTOR * (self.best().0 * eps))
    }

    pub fn bound_4_9_coeff(&self, eps: f64) -> f64 {
        self.best().0 * eps
    }

    pub fn report(
        &self,
        eps: f64,
        convention: EpsConvention,
        actual: Option<&Matrix>,
    ) -> Result<ComponentwiseBoundReport> {
        let cond_4_2_ok = self.cond_4_2(eps);
        let (actual_dl_fro, actual_dl_2) = match actual {
            Some(d) => (Some(fro_norm(d)), Some(spectral_norm(d)?)),
            None => (None, None),
        };
        Ok(ComponentwiseBoundReport {
            eps,
            eps_convention: convention,
            cond_4_2_ok,
            b_4_3: self.bound_4_3(eps).ok(),
            b_4_4: self.bound_4_4(eps).ok(),
            b_4_9_coeff: self.bound_4_9_coeff(eps),
            cond_bs_l: self.cond_l,
            cond_bs_linvt: self.cond_linvt,
            near_boundary: cond_4_2_ok && 1.0 - 2.0 * self.level(eps) < NEAR_BOUNDARY,
            actual_dl_fro,
            actual_dl_2,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComponentwiseBoundReport {
    pub eps: f64,
    pub eps_convention: EpsConvention,
    pub cond_4_2_ok: bool,
    pub b_4_3: Option<LabeledBound>,
    pub b_4_4: Option<f64>,
    pub b_4_9_coeff: f64,
    pub cond_bs_l: f64,
    pub cond_bs_linvt: f64,
    pub near_boundary: bool,
    pub actual_dl_fro: Option<f64>,
    pub actual_dl_2: Option<f64>,
}

/// `cond_F(L̃) cond_F(L̃⁻ᵀ) ε < 1/2`
pub fn check_condition_4_2(l_tilde: &Matrix, eps: f64) -> Result<bool> {
    let set = ScalingCandidateSet::identity_only(l_tilde.rows());
    Ok(ComponentwiseContext::new(l_tilde, &set)?.cond_4_2(eps))
}

pub fn bound_4_3(l_tilde: &Matrix, eps: f64, set: &ScalingCandidateSet) -> Result<LabeledBound> {
    ComponentwiseContext::new(l_tilde, set)?.bound_4_3(eps)
}

pub fn bound_4_4(l_tilde: &Matrix, eps: f64, set: &ScalingCandidateSet) -> Result<f64> {
    ComponentwiseContext::new(l_tilde, set)?.bound_4_4(eps)
}

pub fn bound_4_9_coeff(l_tilde: &Matrix, eps: f64, set: &ScalingCandidateSet) -> Result<f64> {
    Ok(ComponentwiseContext::new(l_tilde, set)?.bound_4_9_coeff(eps))
}
