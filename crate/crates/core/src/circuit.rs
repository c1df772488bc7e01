//! Stochastic model of the retina → tectum → rotundus circuit: dendritic
//! field density, Poisson terminal activation, energy accumulation, and the
//! one-stage vs two-stage integration comparison.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_SEED: u64 = 20_240_601;
pub const DEFAULT_CUTOFF: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DendriticFieldParams {
    pub alpha: f64,
    pub b: f64,
    /// Angular frequency of the density in 1/µm.
    pub c: f64,
    /// µm.
    pub field_radius: f64,
    /// Std of the terminal placement density (µm).
    pub gp_sigma: f64,
    pub p_max: f64,
    /// Saturation time constant (s).
    pub tau: f64,
    pub e_unit: f64,
}

impl Default for DendriticFieldParams {
    fn default() -> Self {
        DendriticFieldParams {
            alpha: 0.5,
            b: 1.0,
            c: PI / 2000.0,
            field_radius: 2000.0,
            gp_sigma: 100.0,
            p_max: 0.8,
            tau: 0.02,
            e_unit: 1.0,
        }
    }
}

impl DendriticFieldParams {
    pub fn validate(&self) -> Result<()> {
        let all = [self.alpha, self.b, self.c, self.field_radius, self.gp_sigma, self.p_max, self.tau, self.e_unit];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("circuit parameters must be finite"));
        }
        if self.field_radius <= 0.0 || self.gp_sigma <= 0.0 {
            return Err(Error::invalid("field_radius and gp_sigma must be positive"));
        }
        if !(self.p_max > 0.0 && self.p_max < 1.0) {
            return Err(Error::invalid("p_max must lie in (0, 1)"));
        }
        if self.tau <= 0.0 || self.e_unit <= 0.0 {
            return Err(Error::invalid("tau and e_unit must be positive"));
        }
        if self.min_density() < 0.0 {
            return Err(Error::invalid(format!(
                "density goes negative on [0, {}] (minimum {})",
                self.field_radius,
                self.min_density()
            )));
        }
        Ok(())
    }

    /// Smallest value of the density over `[0, field_radius]`.
    pub fn min_density(&self) -> f64 {
        let span = self.c.abs() * self.field_radius;
        let min_cos = if span >= PI { -1.0 } else { span.cos() };
        if self.alpha >= 0.0 {
            self.b + self.alpha * min_cos
        } else {
            self.b + self.alpha
        }
    }
}

/// `ρ(r) = α cos(c r) + b`.
pub fn density(params: &DendriticFieldParams, r: f64) -> Result<f64> {
    if !(0.0..=params.field_radius).contains(&r) {
        return Err(Error::invalid(format!("r = {r} outside [0, {}]", params.field_radius)));
    }
    Ok(params.alpha * (params.c * r).cos() + params.b)
}

/// `P_c(A) = ρ(r) A / 2`.
pub fn parent_probability(params: &DendriticFieldParams, r: f64, area: f64) -> Result<f64> {
    if !(area >= 0.0) {
        return Err(Error::invalid(format!("area must be non-negative, got {area}")));
    }
    Ok(0.5 * density(params, r)? * area)
}

/// `P_d = g_p(offset) · P_c(A)` with `g_p` a centered normal density.
pub fn dendrite_presence(params: &DendriticFieldParams, r: f64, area: f64, offset: f64) -> Result<f64> {
    let s = params.gp_sigma;
    let g = (-offset * offset / (2.0 * s * s)).exp() / (s * (2.0 * PI).sqrt());
    Ok(g * parent_probability(params, r, area)?)
}

/// Poisson pmf with mean `rho_times_area`.
pub fn activation_pmf(rho_times_area: f64, n_a: u64) -> Result<f64> {
    if !(rho_times_area >= 0.0 && rho_times_area.is_finite()) {
        return Err(Error::invalid(format!("rho*A must be finite and non-negative, got {rho_times_area}")));
    }
    if rho_times_area == 0.0 {
        return Ok(if n_a == 0 { 1.0 } else { 0.0 });
    }
    let ln_fact: f64 = (2..=n_a).map(|k| (k as f64).ln()).sum();
    Ok((n_a as f64 * rho_times_area.ln() - rho_times_area - ln_fact).exp())
}

/// `P_r(Δt) = p_max (1 − e^{−Δt/τ})`.
pub fn response_probability(params: &DendriticFieldParams, delta_t: f64) -> Result<f64> {
    if !(delta_t > 0.0) {
        return Err(Error::invalid(format!("delta_t must be positive, got {delta_t}")));
    }
    Ok(params.p_max * (1.0 - (-delta_t / params.tau).exp()))
}

/// `y_s = n_a P_r(Δt)`; a moving stimulus adds `p_max`.
pub fn response(params: &DendriticFieldParams, n_a: u64, delta_t: f64, moving: bool) -> Result<f64> {
    let y = n_a as f64 * response_probability(params, delta_t)?;
    Ok(if moving { y + params.p_max } else { y })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesEstimate {
    pub value: f64,
    /// Upper bound on the omitted terms.
    pub tail_bound: f64,
}

/// `Σ_{n=1..cutoff} n P_a(n) [1 − (1 − p_max)^n]`.
pub fn expected_extra_activations(
    params: &DendriticFieldParams,
    rho_times_area: f64,
    cutoff: usize,
) -> Result<SeriesEstimate> {
    if cutoff == 0 {
        return Err(Error::invalid("cutoff must be at least 1"));
    }
    let q = 1.0 - params.p_max;
    let mut value = 0.0;
    let mut mass_below = 0.0;
    for n in 0..=cutoff as u64 {
        let p = activation_pmf(rho_times_area, n)?;
        if (n as usize) < cutoff {
            mass_below += p;
        }
        if n >= 1 {
            value += n as f64 * p * (1.0 - q.powi(n as i32));
        }
    }
    // Σ_{n>cutoff} n P(n) = λ P(N ≥ cutoff)
    let tail_bound = (rho_times_area * (1.0 - mass_below)).max(0.0);
    Ok(SeriesEstimate { value, tail_bound })
}

/// `e_{t+1} = e_t + e′ p_{t+1}`.
pub fn accumulate_energy(e_t: f64, e_unit: f64, p_next: f64) -> Result<f64> {
    if !(e_t.is_finite() && e_unit.is_finite() && (0.0..=1.0).contains(&p_next)) {
        return Err(Error::invalid("energy inputs must be finite with p in [0, 1]"));
    }
    Ok(e_t + e_unit * p_next)
}

/// `⌊|S| / Δd⌋`.
pub fn subset_count(set_size: usize, delta_d: usize) -> Result<usize> {
    if delta_d == 0 {
        return Err(Error::invalid("delta_d must be positive"));
    }
    Ok(set_size / delta_d)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoStageInstance {
    pub p: Vec<f64>,
    pub e: Vec<f64>,
}

impl TwoStageInstance {
    pub fn new(p: Vec<f64>, e: Vec<f64>) -> Result<Self> {
        if p.is_empty() || p.len() != e.len() {
            return Err(Error::invalid("p and e need the same non-zero length"));
        }
        if p.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::invalid("subset probabilities must be non-negative"));
        }
        if (p.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::invalid("subset probabilities must sum to 1"));
        }
        if e.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::invalid("activation probabilities must lie in [0, 1]"));
        }
        Ok(TwoStageInstance { p, e })
    }

    pub fn n_subsets(&self) -> usize {
        self.p.len()
    }
}

/// `E₁ = Σ p_i e_i`.
pub fn one_stage(inst: &TwoStageInstance) -> f64 {
    inst.p.iter().zip(&inst.e).map(|(p, e)| p * e).sum()
}

/// `E₂ = 1 − Π (1 − e_i)`.
pub fn two_stage(inst: &TwoStageInstance) -> f64 {
    1.0 - inst.e.iter().map(|e| 1.0 - e).product::<f64>()
}

pub const TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counterexample {
    pub trial: u64,
    pub instance: TwoStageInstance,
    pub e1: f64,
    pub e2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub trials: u64,
    pub grid_instances: u64,
    pub n_subsets_min: usize,
    pub n_subsets_max: usize,
    pub seed: u64,
    pub violations: u64,
    /// Largest observed `E₁ − E₂`.
    pub max_e1_minus_e2: f64,
    /// Smallest observed `E₂ − E₁`.
    pub min_margin: f64,
    pub counterexample: Option<Counterexample>,
}

impl TrialReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Draws one instance: `p` uniform on the simplex, `e` uniform on the cube.
pub fn sample_instance(rng: &mut impl Rng, n_subsets: usize) -> TwoStageInstance {
    let raw: Vec<f64> = (0..n_subsets).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let total: f64 = raw.iter().sum();
    let mut p: Vec<f64> = raw.iter().map(|v| v / total).collect();
    // absorb rounding so Σp = 1 to within one ulp
    let drift = 1.0 - p.iter().sum::<f64>();
    if let Some(first) = p.first_mut() {
        *first = (*first + drift).max(0.0);
    }
    let e = (0..n_subsets).map(|_| rng.random::<f64>()).collect();
    TwoStageInstance { p, e }
}

/// The exhaustive two-subset grid `e ∈ {0, ¼, ½, ¾, 1}²`, `p = (q, 1 − q)`.
pub fn grid_instances() -> Vec<TwoStageInstance> {
    let steps = [0.0, 0.25, 0.5, 0.75, 1.0];
    let mut out = Vec::new();
    for &q in &steps {
        for &e1 in &steps {
            for &e2 in &steps {
                out.push(TwoStageInstance { p: vec![q, 1.0 - q], e: vec![e1, e2] });
            }
        }
    }
    out
}

#[derive(Clone, Copy)]
struct Tally {
    violations: u64,
    max_diff: f64,
    min_margin: f64,
    first_bad: Option<u64>,
}

impl Tally {
    fn empty() -> Self {
        Tally { violations: 0, max_diff: f64::NEG_INFINITY, min_margin: f64::INFINITY, first_bad: None }
    }

    fn one(trial: u64, inst: &TwoStageInstance) -> Self {
        let diff = one_stage(inst) - two_stage(inst);
        let bad = diff > TOLERANCE;
        Tally {
            violations: bad as u64,
            max_diff: diff,
            min_margin: -diff,
            first_bad: bad.then_some(trial),
        }
    }

    fn merge(self, o: Self) -> Self {
        Tally {
            violations: self.violations + o.violations,
            max_diff: self.max_diff.max(o.max_diff),
            min_margin: self.min_margin.min(o.min_margin),
            first_bad: match (self.first_bad, o.first_bad) {
                (Some(a), Some(b)) => Some(a.min(b)),
                (a, b) => a.or(b),
            },
        }
    }
}

fn trial_instance(seed: u64, trial: u64, lo: usize, hi: usize) -> TwoStageInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    let n = rng.random_range(lo..=hi);
    sample_instance(&mut rng, n)
}

/// Checks `E₁ ≤ E₂ + 1e-12` on `n_trials` random instances with
/// `N_d ∈ n_subsets_range` and on the exhaustive grid. Trial `i` draws from
/// its own stream of the seeded generator, so the report does not depend on
/// scheduling.
pub fn verify_proposition(
    n_trials: u64,
    n_subsets_range: std::ops::RangeInclusive<usize>,
    seed: u64,
) -> Result<TrialReport> {
    let (lo, hi) = (*n_subsets_range.start(), *n_subsets_range.end());
    if n_trials == 0 {
        return Err(Error::invalid("n_trials must be at least 1"));
    }
    if lo == 0 || lo > hi {
        return Err(Error::invalid(format!("invalid subset range {lo}..={hi}")));
    }
    let random = (0..n_trials)
        .into_par_iter()
        .map(|i| Tally::one(i, &trial_instance(seed, i, lo, hi)))
        .reduce(Tally::empty, Tally::merge);
    let grid = grid_instances();
    let grid_tally = grid
        .iter()
        .enumerate()
        .map(|(i, inst)| Tally::one(n_trials + i as u64, inst))
        .fold(Tally::empty(), Tally::merge);
    let all = random.merge(grid_tally);
    let counterexample = all.first_bad.map(|trial| {
        let instance = if trial < n_trials {
            trial_instance(seed, trial, lo, hi)
        } else {
            grid[(trial - n_trials) as usize].clone()
        };
        Counterexample { trial, e1: one_stage(&instance), e2: two_stage(&instance), instance }
    });
    Ok(TrialReport {
        trials: n_trials,
        grid_instances: grid.len() as u64,
        n_subsets_min: lo,
        n_subsets_max: hi,
        seed,
        violations: all.violations,
        max_e1_minus_e2: all.max_diff,
        min_margin: all.min_margin,
        counterexample,
    })
}
