//! Random ensembles and the campaigns that check the bounds against the
//! double-factorization oracle.
//!
//! Every trial draws from its own `ChaCha8Rng` seeded with `seed ^ trial`,
//! so campaigns are deterministic and run trials in parallel.

use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::bounds::{
    eps_componentwise, scaling_candidates, ComponentwiseBoundReport, ComponentwiseContext,
    EpsConvention, NormwiseBoundReport, NormwiseContext, ScalingCandidateSet, ScalingPurpose,
};
use crate::densela::{
    cholesky, fro_norm, kappa2, lower_tri_inverse, matmul, orthonormal_columns, singular_values,
    spectral_norm, sym_eigenvalues, DiagScaling, Matrix, UNIT_ROUNDOFF,
};
use crate::error::{Error, Result};
use crate::genchol::{assemble_k, factorize, factorize_k, BlockSpec, SaddleMatrix, RANK_TOL};
use crate::oracle::{actual_delta_l_from, build_w_dense, compensated_residual, w_inverse_norm};
use crate::report::{render, write_atomic, Field, Format, Record};

/// Degenerate draws allowed per trial before the campaign fails.
pub const MAX_RETRIES: usize = 100;

/// Absolute slack on every domination check.
pub const DOMINATION_SLACK: f64 = 1e-12;

/// Slack factor on the γ envelope in the backward-error check.
pub const BACKWARD_SLACK: f64 = 10.0;

/// Relative slack on the condition-strength inequality.
pub const STRENGTH_SLACK: f64 = 1e-12;

/// Largest order for which `W` is built (it has `p(p+1)/2` rows).
pub const W_MAX_ORDER: usize = 24;

pub const DEFAULT_SEED: u64 = 20_240_917;
pub const DEFAULT_TRIALS: usize = 100;
pub const DEFAULT_DK_LEVELS: [f64; 4] = [1e-8, 1e-4, 0.1, 0.4];
pub const DEFAULT_COND_TARGET: f64 = 1e3;
pub const DEFAULT_EPS: f64 = 1e-6;

fn normal(rng: &mut impl Rng, rows: usize, cols: usize) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    Matrix::new(rows, cols, data).expect("finite normal samples")
}

/// Copies the lower triangle over the upper one.
fn symmetrize_lower(x: &mut Matrix) {
    for i in 0..x.rows() {
        for j in 0..i {
            x[(j, i)] = x[(i, j)];
        }
    }
}

/// `Q diag(σ) Qᵀ` with `σ` log-spaced from 1 down to `1/cond`.
pub fn gen_spd(order: usize, cond: f64, rng: &mut impl Rng) -> Result<Matrix> {
    if !(cond >= 1.0) || !cond.is_finite() {
        return Err(Error::InvalidArgument(format!("condition target {cond} must be >= 1")));
    }
    if order == 0 {
        return Ok(Matrix::zeros(0, 0));
    }
    let q = orthonormal_columns(&normal(rng, order, order))?;
    let sigma: Vec<f64> = (0..order)
        .map(|i| {
            if order == 1 {
                1.0
            } else {
                cond.powf(-(i as f64) / (order - 1) as f64)
            }
        })
        .collect();
    let qs = DiagScaling::new(sigma)?.right_mul(&q);
    let mut a = matmul(&qs, &q.transpose())?;
    symmetrize_lower(&mut a);
    Ok(a)
}

/// `GᵀG` with `G` of `order − rank_deficiency` standard-normal rows.
pub fn gen_psd(order: usize, rank_deficiency: usize, rng: &mut impl Rng) -> Result<Matrix> {
    if rank_deficiency > order {
        return Err(Error::InvalidArgument(format!(
            "rank deficiency {rank_deficiency} exceeds order {order}"
        )));
    }
    let g = normal(rng, order - rank_deficiency, order);
    let mut c = matmul(&g.transpose(), &g)?;
    symmetrize_lower(&mut c);
    Ok(c)
}

/// `n × m` standard-normal matrix of full row rank.
pub fn gen_fullrank(n: usize, m: usize, rng: &mut impl Rng) -> Result<Matrix> {
    if n > m {
        return Err(Error::InvalidArgument(format!("{n}x{m} cannot have full row rank")));
    }
    for _ in 0..MAX_RETRIES {
        let b = normal(rng, n, m);
        if n == 0 {
            return Ok(b);
        }
        let sv = singular_values(&b)?;
        if sv[sv.len() - 1] > RANK_TOL * sv[0] {
            return Ok(b);
        }
    }
    Err(Error::RetriesExhausted(MAX_RETRIES))
}

/// Symmetric matrix with Frobenius norm `target_fro`.
pub fn gen_sym_perturbation(p: usize, target_fro: f64, rng: &mut impl Rng) -> Result<Matrix> {
    if !(target_fro > 0.0) || !target_fro.is_finite() {
        return Err(Error::InvalidArgument(format!("target norm {target_fro} must be positive")));
    }
    if p == 1 {
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        return Ok(Matrix::from_diag(&[sign * target_fro]));
    }
    for _ in 0..MAX_RETRIES {
        let x = normal(rng, p, p);
        let mut s = x.add(&x.transpose())?;
        symmetrize_lower(&mut s);
        let f = fro_norm(&s);
        if f > 0.0 {
            return Ok(s.scale(target_fro / f));
        }
    }
    Err(Error::RetriesExhausted(MAX_RETRIES))
}

/// Saddle matrix with `κ₂(A) = cond_a` and Schur block `C + B A⁻¹ Bᵀ` of
/// condition `cond_s`, both up to rounding.
///
/// `A` comes from [`gen_spd`]; the Schur target `S` likewise. `C` is a
/// scaled [`gen_psd`] with `‖C‖₂ ≤ λ_min(S)/2`, and `L21 = chol(S − C) Qᵀ`
/// for `Q` with orthonormal columns, so `B = L21 L11ᵀ` has full row rank.
pub fn gen_saddle(
    m: usize,
    n: usize,
    cond_a: f64,
    cond_s: f64,
    rank_deficiency: usize,
    rng: &mut impl Rng,
) -> Result<SaddleMatrix> {
    if n > m {
        return Err(Error::InvalidArgument(format!(
            "n = {n} > m = {m}: B cannot have full row rank"
        )));
    }
    let a = gen_spd(m, cond_a, rng)?;
    let l11 = cholesky(&a)?;
    if n == 0 {
        return SaddleMatrix::new(a, Matrix::zeros(0, m), Matrix::zeros(0, 0));
    }
    let s = gen_spd(n, cond_s, rng)?;
    let mut c = gen_psd(n, rank_deficiency, rng)?;
    let c_top = sym_eigenvalues(&c)?.last().copied().unwrap_or(0.0);
    if c_top > 0.0 {
        c = c.scale(0.5 / (cond_s * c_top));
        symmetrize_lower(&mut c);
    }
    let mut g = s.sub(&c)?;
    symmetrize_lower(&mut g);
    let lg = cholesky(&g)?;
    let q = orthonormal_columns(&normal(rng, m, n))?;
    let l21 = matmul(&lg, &q.transpose())?;
    let b = matmul(&l21, &l11.transpose())?;
    SaddleMatrix::new(a, b, c)
}

/// [`gen_saddle`] with both condition targets log-uniform in `[1, cond_target]`
/// and a uniform rank deficiency of `C`.
pub fn random_saddle(m: usize, n: usize, cond_target: f64, rng: &mut impl Rng) -> Result<SaddleMatrix> {
    let top = cond_target.max(1.0).ln();
    let cond_a = (rng.random::<f64>() * top).exp();
    let cond_s = (rng.random::<f64>() * top).exp();
    let def = rng.random_range(0..=n);
    gen_saddle(m, n, cond_a, cond_s, def, rng)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len(), "loglog_slope needs paired samples");
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let k = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (a, b) in lx.iter().zip(&ly) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
    }
    sxy / sxx
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleConfig {
    pub m: usize,
    pub n: usize,
    pub trials: usize,
    /// Cap on the log-uniform condition targets of `A` and the Schur block.
    pub cond_target: f64,
    /// Values of `‖L⁻¹‖₂² ‖ΔK‖_F` to place each perturbation at.
    pub dk_levels: Vec<f64>,
    pub seed: u64,
    pub eps_convention: EpsConvention,
    /// Envelope constant of the synthetic componentwise perturbations.
    pub eps: f64,
    /// Build `W` and report the matrix-vector-equation bound (orders ≤ [`W_MAX_ORDER`]).
    pub with_w_bound: bool,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            m: 4,
            n: 3,
            trials: DEFAULT_TRIALS,
            cond_target: DEFAULT_COND_TARGET,
            dk_levels: DEFAULT_DK_LEVELS.to_vec(),
            seed: DEFAULT_SEED,
            eps_convention: EpsConvention::MaxSafe,
            eps: DEFAULT_EPS,
            with_w_bound: false,
        }
    }
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        BlockSpec::new(self.m, self.n)?;
        if self.n > self.m {
            return Err(Error::InvalidArgument(format!(
                "n = {} > m = {}: B cannot have full row rank",
                self.n, self.m
            )));
        }
        if self.trials == 0 {
            return Err(Error::InvalidArgument("trials must be at least 1".into()));
        }
        if !(self.cond_target >= 1.0) || !self.cond_target.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "cond target {} must be finite and >= 1",
                self.cond_target
            )));
        }
        if let Some(bad) = self.dk_levels.iter().find(|&&x| !(x > 0.0 && x < 0.5)) {
            return Err(Error::InvalidArgument(format!("dk level {bad} outside (0, 0.5)")));
        }
        if !(self.eps >= 0.0) || !self.eps.is_finite() {
            return Err(Error::InvalidArgument(format!("eps {} must be finite and >= 0", self.eps)));
        }
        Ok(())
    }

    pub fn trial_seed(&self, trial: usize) -> u64 {
        self.seed ^ trial as u64
    }

    fn w_enabled(&self) -> bool {
        self.with_w_bound && self.m + self.n <= W_MAX_ORDER
    }
}

/// One normwise trial at one perturbation level.
#[derive(Clone, Debug, PartialEq)]
pub struct NormwiseRecord {
    pub trial: usize,
    pub level_index: usize,
    pub m: usize,
    pub n: usize,
    pub seed: u64,
    pub dk_level: f64,
    pub report: NormwiseBoundReport,
    /// `‖ΔL‖_F`
    pub actual_f: f64,
    /// `‖ΔL‖₂`
    pub actual_2: f64,
    /// Largest `actual_f / bound` over the rigorous bounds present.
    pub worst_ratio: Option<f64>,
    /// Rigorous bounds exceeded by more than [`DOMINATION_SLACK`].
    pub violated: Vec<&'static str>,
    /// `‖L⁻¹ΔL‖_F` and its bound from the existence argument.
    pub diag38_lhs: f64,
    pub diag38_bound: f64,
    /// Smallest refined-condition left side over all candidates.
    pub cond318_lhs_min: f64,
    pub strength_ok: bool,
}

impl NormwiseRecord {
    pub fn diag38_ok(&self) -> bool {
        self.diag38_lhs <= self.diag38_bound + DOMINATION_SLACK
    }

    /// Any bound exceeded, the existence diagnostic broken, or the
    /// condition-strength inequality broken.
    pub fn violation(&self) -> bool {
        !self.violated.is_empty() || !self.diag38_ok() || !self.strength_ok
    }

    /// `bound / actual` for every rigorous bound present.
    pub fn tightness(&self) -> Vec<(&'static str, f64)> {
        self.report
            .rigorous_bounds()
            .into_iter()
            .map(|(name, b)| (name, b / self.actual_f))
            .collect()
    }
}

impl Record for NormwiseRecord {
    fn columns() -> &'static [&'static str] {
        &[
            "trial", "m", "n", "seed", "dk_fro", "linv2", "cond31", "b33", "b33_label", "b34",
            "b311", "cond312", "b312", "b313", "b314", "cond316", "b315", "cond318", "b317",
            "b317_label", "actual_f", "actual_2", "worst_ratio", "violation",
        ]
    }

    fn fields(&self) -> Vec<Field> {
        let r = &self.report;
        vec![
            Field::Int(self.trial as u64),
            Field::Int(self.m as u64),
            Field::Int(self.n as u64),
            Field::Int(self.seed),
            Field::Float(r.dk_fro),
            Field::Float(r.linv_2),
            Field::Bool(r.cond_3_1_ok),
            Field::OptFloat(r.b_3_3.as_ref().map(|b| b.value)),
            Field::OptText(r.b_3_3.as_ref().map(|b| b.label.clone())),
            Field::OptFloat(r.b_3_4.as_ref().map(|b| b.value)),
            Field::Float(r.b_3_11_coeff),
            Field::Bool(r.cond_3_12_ok),
            Field::OptFloat(r.b_3_12),
            Field::OptFloat(r.b_3_13),
            Field::OptFloat(r.b_3_14),
            Field::OptBool(r.cond_3_16_ok),
            Field::OptFloat(r.b_3_15),
            Field::Bool(r.cond_3_18_ok),
            Field::OptFloat(r.b_3_17.as_ref().map(|b| b.value)),
            Field::OptText(r.b_3_17.as_ref().map(|b| b.label.clone())),
            Field::Float(self.actual_f),
            Field::Float(self.actual_2),
            Field::OptFloat(self.worst_ratio),
            Field::Bool(self.violation()),
        ]
    }
}

/// A report on its own, for the `bounds` subcommand.
impl Record for NormwiseBoundReport {
    fn columns() -> &'static [&'static str] {
        &[
            "dk_fro", "linv_2", "kappa_l", "cond_3_1_ok", "cond_3_12_ok", "cond_3_16_ok",
            "cond_3_18_ok", "b_3_3", "b_3_3_label", "b_3_4", "b_3_4_label", "b_3_11_coeff",
            "b_3_12", "b_3_13", "b_3_14", "b_3_15", "b_3_17", "b_3_17_label",
            "b_3_17_excluded", "near_boundary", "actual_dl_fro", "actual_dl_2",
        ]
    }

    fn fields(&self) -> Vec<Field> {
        vec![
            Field::Float(self.dk_fro),
            Field::Float(self.linv_2),
            Field::Float(self.kappa_l),
            Field::Bool(self.cond_3_1_ok),
            Field::Bool(self.cond_3_12_ok),
            Field::OptBool(self.cond_3_16_ok),
            Field::Bool(self.cond_3_18_ok),
            Field::OptFloat(self.b_3_3.as_ref().map(|b| b.value)),
            Field::OptText(self.b_3_3.as_ref().map(|b| b.label.clone())),
            Field::OptFloat(self.b_3_4.as_ref().map(|b| b.value)),
            Field::OptText(self.b_3_4.as_ref().map(|b| b.label.clone())),
            Field::Float(self.b_3_11_coeff),
            Field::OptFloat(self.b_3_12),
            Field::OptFloat(self.b_3_13),
            Field::OptFloat(self.b_3_14),
            Field::OptFloat(self.b_3_15),
            Field::OptFloat(self.b_3_17.as_ref().map(|b| b.value)),
            Field::OptText(self.b_3_17.as_ref().map(|b| b.label.clone())),
            Field::Text(self.b_3_17_excluded.join(";")),
            Field::Bool(self.near_boundary),
            Field::OptFloat(self.actual_dl_fro),
            Field::OptFloat(self.actual_dl_2),
        ]
    }
}

fn worst_and_violations(bounds: &[(&'static str, f64)], actual: f64) -> (Option<f64>, Vec<&'static str>) {
    let mut worst: Option<f64> = None;
    let mut violated = Vec::new();
    for &(name, b) in bounds {
        if actual > b + DOMINATION_SLACK {
            violated.push(name);
        }
        let ratio = if b > 0.0 {
            actual / b
        } else if actual == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        worst = Some(worst.map_or(ratio, |w: f64| w.max(ratio)));
    }
    (worst, violated)
}

fn normwise_trial(cfg: &EnsembleConfig, trial: usize) -> Result<Vec<NormwiseRecord>> {
    let seed = cfg.trial_seed(trial);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = BlockSpec::new(cfg.m, cfg.n)?;
    let p = spec.order();
    'draw: for _ in 0..MAX_RETRIES {
        let s = match random_saddle(cfg.m, cfg.n, cfg.cond_target, &mut rng) {
            Ok(s) => s,
            Err(Error::NotPositiveDefinite { .. } | Error::Singular) => continue,
            Err(e) => return Err(e),
        };
        let factor = match factorize(&s) {
            Ok(f) => f,
            Err(Error::Breakdown { .. }) => continue,
            Err(e) => return Err(e),
        };
        let l = factor.to_dense();
        let k = assemble_k(&s);
        let Ok(l_inv) = lower_tri_inverse(&l) else { continue };
        let set = scaling_candidates(&l, ScalingPurpose::KappaMin)?;
        let ctx = NormwiseContext::new(&l, Some(&k), &set)?;
        let w_inv = if cfg.w_enabled() {
            Some(w_inverse_norm(&build_w_dense(&l, &spec.signature())?)?)
        } else {
            None
        };
        let dir = gen_sym_perturbation(p, 1.0, &mut rng)?;
        let mut out = Vec::with_capacity(cfg.dk_levels.len());
        for (level_index, &level) in cfg.dk_levels.iter().enumerate() {
            let dk = dir.scale(level / (ctx.linv_2() * ctx.linv_2()));
            let dk_fro = fro_norm(&dk);
            let delta = match actual_delta_l_from(&factor, &k, &dk) {
                Ok(d) => d,
                Err(Error::PerturbedFactorization(_)) => continue 'draw,
                Err(e) => return Err(e),
            };
            let report = ctx.report(dk_fro, w_inv, Some(&delta))?;
            let actual_f = report.actual_dl_fro.unwrap_or(0.0);
            let actual_2 = report.actual_dl_2.unwrap_or(0.0);
            let (worst_ratio, violated) = worst_and_violations(&report.rigorous_bounds(), actual_f);
            let x = ctx.normwise_level(dk_fro);
            let diag38_bound = if x < 0.5 {
                std::f64::consts::SQRT_2 * x / (1.0 + (1.0 - 2.0 * x).sqrt())
            } else {
                f64::INFINITY
            };
            let lhs318 = ctx.cond_3_18_lhs(dk_fro)?;
            let cond318_lhs_min = lhs318.iter().map(|(_, v)| *v).fold(f64::INFINITY, f64::min);
            let strength_ok = cond318_lhs_min >= x * (1.0 - STRENGTH_SLACK);
            out.push(NormwiseRecord {
                trial,
                level_index,
                m: cfg.m,
                n: cfg.n,
                seed,
                dk_level: level,
                report,
                actual_f,
                actual_2,
                worst_ratio,
                violated,
                diag38_lhs: fro_norm(&matmul(&l_inv, &delta)?),
                diag38_bound,
                cond318_lhs_min,
                strength_ok,
            });
        }
        return Ok(out);
    }
    Err(Error::RetriesExhausted(MAX_RETRIES))
}

/// Normwise verification: one record per trial and perturbation level,
/// ordered by trial then level.
pub fn run_normwise_campaign(cfg: &EnsembleConfig) -> Result<Vec<NormwiseRecord>> {
    cfg.validate()?;
    if cfg.dk_levels.is_empty() {
        return Ok(Vec::new());
    }
    let per_trial: Vec<Vec<NormwiseRecord>> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| normwise_trial(cfg, t))
        .collect::<Result<_>>()?;
    Ok(per_trial.into_iter().flatten().collect())
}

/// One synthetic componentwise trial plus the backward-error check of the
/// factorization it started from.
#[derive(Clone, Debug, PartialEq)]
pub struct ComponentwiseRecord {
    pub trial: usize,
    pub m: usize,
    pub n: usize,
    pub seed: u64,
    pub report: ComponentwiseBoundReport,
    /// Factorization of the perturbed matrix broke down.
    pub breakdown: bool,
    pub actual_f: Option<f64>,
    pub actual_2: Option<f64>,
    pub worst_ratio: Option<f64>,
    pub violated: Vec<&'static str>,
    /// `γ` used for the backward-error envelope (before the slack factor).
    pub backward_gamma: f64,
    /// `max |R_ij| / (γ (|L̃||L̃ᵀ|)_ij)` over nonzero envelope entries.
    pub backward_max_ratio: f64,
    /// The same ratio against the transposed envelope `|L̃ᵀ||L̃|`.
    pub backward_alt_max_ratio: f64,
    /// Largest `|ΔK_ij| / (ε (|L̃||L̃ᵀ|)_ij)` of the sampled perturbation.
    pub sample_envelope_ratio: f64,
}

impl ComponentwiseRecord {
    pub fn backward_ok(&self) -> bool {
        self.backward_max_ratio <= BACKWARD_SLACK
    }

    pub fn violation(&self) -> bool {
        !self.violated.is_empty()
            || (self.breakdown && self.report.cond_4_2_ok)
            || !self.backward_ok()
            || self.sample_envelope_ratio > 1.0
    }
}

impl Record for ComponentwiseRecord {
    fn columns() -> &'static [&'static str] {
        &[
            "trial", "m", "n", "seed", "eps", "eps_convention", "cond42", "b43", "b43_label",
            "b44", "b49", "cond_bs_l", "cond_bs_linvt", "breakdown", "actual_f", "actual_2",
            "worst_ratio", "backward_gamma", "backward_max_ratio", "backward_alt_max_ratio",
            "violation",
        ]
    }

    fn fields(&self) -> Vec<Field> {
        let r = &self.report;
        vec![
            Field::Int(self.trial as u64),
            Field::Int(self.m as u64),
            Field::Int(self.n as u64),
            Field::Int(self.seed),
            Field::Float(r.eps),
            Field::Text(r.eps_convention.label().to_string()),
            Field::Bool(r.cond_4_2_ok),
            Field::OptFloat(r.b_4_3.as_ref().map(|b| b.value)),
            Field::OptText(r.b_4_3.as_ref().map(|b| b.label.clone())),
            Field::OptFloat(r.b_4_4),
            Field::Float(r.b_4_9_coeff),
            Field::Float(r.cond_bs_l),
            Field::Float(r.cond_bs_linvt),
            Field::Bool(self.breakdown),
            Field::OptFloat(self.actual_f),
            Field::OptFloat(self.actual_2),
            Field::OptFloat(self.worst_ratio),
            Field::Float(self.backward_gamma),
            Field::Float(self.backward_max_ratio),
            Field::Float(self.backward_alt_max_ratio),
            Field::Bool(self.violation()),
        ]
    }
}

/// `max r_ij / env_ij` over entries with `env_ij ≠ 0`.
fn max_envelope_ratio(r: &Matrix, env: &Matrix, scale: f64) -> f64 {
    let mut worst = 0.0_f64;
    for (v, e) in r.as_slice().iter().zip(env.as_slice()) {
        if *e != 0.0 {
            worst = worst.max(v.abs() / (scale * e));
        }
    }
    worst
}

fn componentwise_trial(cfg: &EnsembleConfig, trial: usize) -> Result<ComponentwiseRecord> {
    let seed = cfg.trial_seed(trial);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = BlockSpec::new(cfg.m, cfg.n)?;
    let p = spec.order();
    let gamma = eps_componentwise(cfg.m, cfg.n, UNIT_ROUNDOFF, cfg.eps_convention)?;
    for _ in 0..MAX_RETRIES {
        let s = match random_saddle(cfg.m, cfg.n, cfg.cond_target, &mut rng) {
            Ok(s) => s,
            Err(Error::NotPositiveDefinite { .. } | Error::Singular) => continue,
            Err(e) => return Err(e),
        };
        let lt = match factorize(&s) {
            Ok(f) => f,
            Err(Error::Breakdown { .. }) => continue,
            Err(e) => return Err(e),
        };
        let ltd = lt.to_dense();
        let Ok(set) = scaling_candidates(&ltd, ScalingPurpose::Componentwise) else { continue };
        let env = matmul(&ltd.abs(), &ltd.transpose().abs())?;
        let env_alt = matmul(&ltd.transpose().abs(), &ltd.abs())?;

        let res = compensated_residual(&lt, &s);
        let backward_max_ratio = max_envelope_ratio(&res, &env, gamma);
        let backward_alt_max_ratio = max_envelope_ratio(&res, &env_alt, gamma);

        let mut dk = Matrix::zeros(p, p);
        for i in 0..p {
            for j in 0..=i {
                let v = rng.random_range(-1.0..=1.0) * cfg.eps * env[(i, j)];
                dk[(i, j)] = v;
                dk[(j, i)] = v;
            }
        }
        let sample_envelope_ratio = if cfg.eps > 0.0 {
            max_envelope_ratio(&dk, &env, cfg.eps)
        } else {
            0.0
        };
        let k = lt.reconstruct().sub(&dk)?;

        let ctx = ComponentwiseContext::new(&ltd, &set)?;
        let mut report = ctx.report(cfg.eps, cfg.eps_convention, None)?;
        let (breakdown, actual) = match factorize_k(&k, spec) {
            Ok(l) => (false, Some(lt.delta_factor(&l)?)),
            Err(Error::Breakdown { .. }) => (true, None),
            Err(e) => return Err(e),
        };
        let (mut actual_f, mut actual_2, mut worst_ratio, mut violated) = (None, None, None, Vec::new());
        if let Some(d) = &actual {
            let f = fro_norm(d);
            actual_f = Some(f);
            actual_2 = Some(spectral_norm(d)?);
            report.actual_dl_fro = actual_f;
            report.actual_dl_2 = actual_2;
            let mut bounds = Vec::new();
            if let Some(b) = &report.b_4_3 {
                bounds.push(("b_4_3", b.value));
            }
            if let Some(b) = report.b_4_4 {
                bounds.push(("b_4_4", b));
            }
            (worst_ratio, violated) = worst_and_violations(&bounds, f);
        }
        return Ok(ComponentwiseRecord {
            trial,
            m: cfg.m,
            n: cfg.n,
            seed,
            report,
            breakdown,
            actual_f,
            actual_2,
            worst_ratio,
            violated,
            backward_gamma: gamma,
            backward_max_ratio,
            backward_alt_max_ratio,
            sample_envelope_ratio,
        });
    }
    Err(Error::RetriesExhausted(MAX_RETRIES))
}

/// Synthetic-ε verification of the componentwise bounds: `K = L̃JL̃ᵀ − ΔK`
/// with `|ΔK| ≤ ε|L̃||L̃ᵀ|`, so `L̃` is the exact factor of `K + ΔK`.
pub fn run_componentwise_campaign(cfg: &EnsembleConfig) -> Result<Vec<ComponentwiseRecord>> {
    cfg.validate()?;
    (0..cfg.trials)
        .into_par_iter()
        .map(|t| componentwise_trial(cfg, t))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepKind {
    /// `L = [[1/γ, 0], [1, 1]]`, `0 < γ ≪ 1`: bad column scaling.
    Remark32,
    /// `L = [[1, 0], [γ, 1]]`, `γ ≫ 1`: ill-conditioned `W`.
    Remark33,
}

impl std::str::FromStr for SweepKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "remark32" => Ok(SweepKind::Remark32),
            "remark33" => Ok(SweepKind::Remark33),
            other => Err(Error::InvalidArgument(format!("unknown sweep kind '{other}'"))),
        }
    }
}

impl std::fmt::Display for SweepKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SweepKind::Remark32 => "remark32",
            SweepKind::Remark33 => "remark33",
        })
    }
}

/// Both sweeps use `m = n = 1`, so `J = diag(1, −1)`.
const SWEEP_SIGNATURE: [f64; 2] = [1.0, -1.0];

pub fn sweep_factor(kind: SweepKind, gamma: f64) -> Matrix {
    match kind {
        SweepKind::Remark32 => Matrix::from_rows(&[[1.0 / gamma, 0.0], [1.0, 1.0]]),
        SweepKind::Remark33 => Matrix::from_rows(&[[1.0, 0.0], [gamma, 1.0]]),
    }
    .expect("finite 2x2 factor")
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalingSweepRow {
    pub gamma: f64,
    pub kappa_l: f64,
    /// `κ₂(L D⁻¹)` at `D = diag(1/γ, 1)`.
    pub kappa_ld: f64,
    pub kappa_ratio: f64,
    pub dk_fro: f64,
    pub b33: Option<f64>,
    pub b33_label: Option<String>,
    pub b313: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WSweepRow {
    pub gamma: f64,
    pub linv2_sq: f64,
    pub winv2_sq: f64,
    /// `‖ΔK‖_F` at which the normwise condition stops holding.
    pub thr31: f64,
    /// `‖ΔK‖_F` at which the `W` condition stops holding.
    pub thr316: f64,
    pub threshold_ratio: f64,
    /// Half of `thr316`, where both bounds apply.
    pub dk_fro: f64,
    pub b315: f64,
    pub b34: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum SweepTable {
    Scaling(Vec<ScalingSweepRow>),
    W(Vec<WSweepRow>),
}

impl SweepTable {
    pub fn len(&self) -> usize {
        match self {
            SweepTable::Scaling(r) => r.len(),
            SweepTable::W(r) => r.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Log-log slope of `‖W⁻¹‖₂²` against `γ`; `None` for the scaling sweep
    /// or fewer than two rows.
    pub fn winv_sq_slope(&self) -> Option<f64> {
        match self {
            SweepTable::W(rows) if rows.len() >= 2 => {
                let g: Vec<f64> = rows.iter().map(|r| r.gamma).collect();
                let w: Vec<f64> = rows.iter().map(|r| r.winv2_sq).collect();
                Some(loglog_slope(&g, &w))
            }
            _ => None,
        }
    }

    pub fn render(&self, format: Format) -> Result<String> {
        match self {
            SweepTable::Scaling(r) => render(r, format),
            SweepTable::W(r) => render(r, format),
        }
    }
}

impl Record for ScalingSweepRow {
    fn columns() -> &'static [&'static str] {
        &["gamma", "kappa_l", "kappa_ld", "kappa_ratio", "dk_fro", "b33", "b33_label", "b313"]
    }

    fn fields(&self) -> Vec<Field> {
        vec![
            Field::Float(self.gamma),
            Field::Float(self.kappa_l),
            Field::Float(self.kappa_ld),
            Field::Float(self.kappa_ratio),
            Field::Float(self.dk_fro),
            Field::OptFloat(self.b33),
            Field::OptText(self.b33_label.clone()),
            Field::OptFloat(self.b313),
        ]
    }
}

impl Record for WSweepRow {
    fn columns() -> &'static [&'static str] {
        &["gamma", "linv2_sq", "winv2_sq", "thr31", "thr316", "threshold_ratio", "dk_fro", "b315", "b34"]
    }

    fn fields(&self) -> Vec<Field> {
        vec![
            Field::Float(self.gamma),
            Field::Float(self.linv2_sq),
            Field::Float(self.winv2_sq),
            Field::Float(self.thr31),
            Field::Float(self.thr316),
            Field::Float(self.threshold_ratio),
            Field::Float(self.dk_fro),
            Field::Float(self.b315),
            Field::Float(self.b34),
        ]
    }
}

/// Evaluates the two adversarial 2×2 families over `gammas`. `dk_fro` is
/// the perturbation size used for the scaling sweep's bounds.
pub fn run_gamma_sweep(kind: SweepKind, gammas: &[f64], dk_fro: f64) -> Result<SweepTable> {
    if let Some(g) = gammas.iter().find(|g| !(**g > 0.0) || !g.is_finite()) {
        return Err(Error::InvalidArgument(format!("gamma {g} must be positive")));
    }
    match kind {
        SweepKind::Remark32 => {
            let mut rows = Vec::with_capacity(gammas.len());
            for &gamma in gammas {
                let l = sweep_factor(kind, gamma);
                let kappa_l = kappa2(&l)?;
                let d = DiagScaling::new(vec![1.0 / gamma, 1.0])?;
                let kappa_ld = kappa2(&d.right_div(&l))?;
                let set = scaling_candidates(&l, ScalingPurpose::KappaMin)?;
                let ctx = NormwiseContext::new(&l, None, &set)?;
                let b33 = ctx.bound_3_3(dk_fro).ok();
                rows.push(ScalingSweepRow {
                    gamma,
                    kappa_l,
                    kappa_ld,
                    kappa_ratio: kappa_l / kappa_ld,
                    dk_fro,
                    b33: b33.as_ref().map(|b| b.value),
                    b33_label: b33.map(|b| b.label),
                    b313: ctx.bound_3_13(dk_fro).ok(),
                });
            }
            Ok(SweepTable::Scaling(rows))
        }
        SweepKind::Remark33 => {
            let mut rows = Vec::with_capacity(gammas.len());
            for &gamma in gammas {
                let l = sweep_factor(kind, gamma);
                let winv = w_inverse_norm(&build_w_dense(&l, &SWEEP_SIGNATURE)?)?;
                let ctx = NormwiseContext::new(&l, None, &ScalingCandidateSet::identity_only(2))?;
                let linv2_sq = ctx.linv_2() * ctx.linv_2();
                let winv2_sq = winv * winv;
                let thr31 = 0.5 / linv2_sq;
                let thr316 = 0.25 / winv2_sq;
                let dk = 0.5 * thr316;
                rows.push(WSweepRow {
                    gamma,
                    linv2_sq,
                    winv2_sq,
                    thr31,
                    thr316,
                    threshold_ratio: thr31 / thr316,
                    dk_fro: dk,
                    b315: crate::bounds::bound_3_15(winv, dk)?,
                    b34: ctx.bound_3_4(dk)?.value,
                });
            }
            Ok(SweepTable::W(rows))
        }
    }
}

/// Aggregate view of a campaign, for the one-line summary.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CampaignSummary {
    pub trials: usize,
    pub records: usize,
    pub violations: usize,
    /// Largest `actual / bound` across all records.
    pub worst_ratio: Option<f64>,
    /// Records where some condition failed (bounds not applicable).
    pub condition_failures: usize,
    pub breakdowns: usize,
    pub near_boundary: usize,
    /// Fraction of records with both present where `b315 ≤ b34`.
    pub w_tighter_fraction: Option<f64>,
}

impl CampaignSummary {
    pub fn line(&self) -> String {
        let mut s = format!(
            "trials={} records={} violations={} worst_ratio={}",
            self.trials,
            self.records,
            self.violations,
            self.worst_ratio.map_or("n/a".to_string(), crate::densela::fmt_g17),
        );
        if self.condition_failures > 0 {
            s.push_str(&format!(" condition_failures={}", self.condition_failures));
        }
        if self.breakdowns > 0 {
            s.push_str(&format!(" breakdowns={}", self.breakdowns));
        }
        if self.near_boundary > 0 {
            s.push_str(&format!(" near_boundary={}", self.near_boundary));
        }
        if let Some(f) = self.w_tighter_fraction {
            s.push_str(&format!(" b315_le_b34={f:.3}"));
        }
        s
    }
}

fn max_opt(acc: Option<f64>, v: Option<f64>) -> Option<f64> {
    match (acc, v) {
        (Some(a), Some(b)) => Some(a.max(b)),
        (a, b) => a.or(b),
    }
}

pub fn summarize_normwise(trials: usize, records: &[NormwiseRecord]) -> CampaignSummary {
    let mut s = CampaignSummary {
        trials,
        records: records.len(),
        ..Default::default()
    };
    let (mut both, mut tighter) = (0usize, 0usize);
    for r in records {
        s.violations += r.violation() as usize;
        s.worst_ratio = max_opt(s.worst_ratio, r.worst_ratio);
        s.condition_failures += (!r.report.cond_3_1_ok) as usize;
        s.near_boundary += r.report.near_boundary as usize;
        if let (Some(b15), Some(b4)) = (r.report.b_3_15, &r.report.b_3_4) {
            both += 1;
            tighter += (b15 <= b4.value) as usize;
        }
    }
    if both > 0 {
        s.w_tighter_fraction = Some(tighter as f64 / both as f64);
    }
    s
}

pub fn summarize_componentwise(records: &[ComponentwiseRecord]) -> CampaignSummary {
    let mut s = CampaignSummary {
        trials: records.len(),
        records: records.len(),
        ..Default::default()
    };
    for r in records {
        s.violations += r.violation() as usize;
        s.worst_ratio = max_opt(s.worst_ratio, r.worst_ratio);
        s.condition_failures += (!r.report.cond_4_2_ok) as usize;
        s.breakdowns += r.breakdown as usize;
        s.near_boundary += r.report.near_boundary as usize;
    }
    s
}

/// Writes `records` atomically, sorted as given (campaigns already order
/// them by trial index).
pub fn emit_report<R: Record>(records: &[R], format: Format, path: &Path) -> Result<()> {
    if records.is_empty() {
        return Err(Error::InvalidArgument("no records to emit".into()));
    }
    write_atomic(path, render(records, format)?.as_bytes())
}
