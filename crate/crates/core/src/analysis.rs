//! Qutrit-pair disentanglement under distinguishable decay channels: closed
//! no-jump negativities, sudden-change detection on partial-transpose spectra,
//! and regime classification for the E, V and Λ structures.
//!
//! For `a|00⟩ + b|11⟩ + c|22⟩` under local decay the partially transposed state
//! is block diagonal. Each pair of levels `(i, j)` contributes one 2×2 block on
//! `{|ij⟩, |ji⟩}` whose lower eigenvalue `P_ij − |ρ_{ii,jj}|` is the only
//! candidate negative eigenvalue ("branch"). Regimes follow from whether and
//! when each of the three branches changes sign.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::channels::{ChannelSet, Structure};
use crate::error::{QecError, Result};
use crate::qcore::{Ket, C64};
use crate::trajectories::{master_evolve, SimParams};

/// Normalization tolerance for [`InitialCoeffs::new`].
pub const NORM_TOL: f64 = 1e-12;
/// Inputs this close to a threshold (`a = b`, `c = 2a`, `c² = 4ab`, …) are
/// reported as boundary cases.
pub const BOUNDARY_TOL: f64 = 1e-9;
/// A vanishing eigenvalue farther than this factor times the zero threshold
/// from zero is always a crossing.
const FADE_FACTOR: f64 = 2.0;
/// A vanishing branch whose linear extrapolation hits zero within this time
/// is crossing; exponential decay at rate `κ` extrapolates to `1/κ`.
const CROSSING_WINDOW: f64 = 0.1;
/// Crossings whose branch slope is below this (per unit time) sink under
/// [`DETECTION_EPS`] too long before zero to be told apart from fading.
pub const RESOLVABLE_SLOPE: f64 = 1e-11;
/// Zero threshold for the partial-transpose spectra of noiseless
/// unconditional runs. Far below `EPS_ZERO` so that branches shrinking
/// super-exponentially are still seen to cross.
pub const DETECTION_EPS: f64 = 1e-13;
/// Final-to-earlier negativity ratio above which the tail counts as a plateau.
const PLATEAU_RATIO: f64 = 0.9;
/// Negativities below this never count as a plateau.
const PLATEAU_FLOOR: f64 = 1e-6;

/// Real amplitudes of `a|00⟩ + b|11⟩ + c|22⟩`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitialCoeffs {
    a: f64,
    b: f64,
    c: f64,
}

impl InitialCoeffs {
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self> {
        let n = a * a + b * b + c * c;
        if !((n - 1.0).abs() <= NORM_TOL) {
            return Err(QecError::param("coeffs", format!("a² + b² + c² = {n}, expected 1")));
        }
        Ok(Self { a, b, c })
    }

    /// Rescale `(a, b, c)` to unit norm.
    pub fn normalized(a: f64, b: f64, c: f64) -> Result<Self> {
        let n = (a * a + b * b + c * c).sqrt();
        if !(n > 0.0 && n.is_finite()) {
            return Err(QecError::param("coeffs", "need a nonzero finite amplitude"));
        }
        Ok(Self { a: a / n, b: b / n, c: c / n })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn ket(&self) -> Ket {
        let r = |x: f64| C64::new(x, 0.0);
        let mut k = Ket::zeros(&[3, 3]);
        k.amplitudes_mut()[0] = r(self.a);
        k.amplitudes_mut()[4] = r(self.b);
        k.amplitudes_mut()[8] = r(self.c);
        k
    }

    /// False when two amplitudes coincide or one vanishes.
    pub fn is_generic(&self) -> bool {
        let (a, b, c) = (self.a.abs(), self.b.abs(), self.c.abs());
        [a, b, c, a - b, a - c, b - c].iter().all(|x| x.abs() > BOUNDARY_TOL)
    }

    fn abs(&self) -> (f64, f64, f64) {
        (self.a.abs(), self.b.abs(), self.c.abs())
    }
}

impl fmt::Display for InitialCoeffs {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(a={}, b={}, c={})", self.a, self.b, self.c)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Terminal {
    AsymptoticDecay,
    SuddenDeath,
    AsymptoticEntangled,
}

impl Terminal {
    pub fn name(self) -> &'static str {
        match self {
            Terminal::AsymptoticDecay => "asymptotic_decay",
            Terminal::SuddenDeath => "sudden_death",
            Terminal::AsymptoticEntangled => "asymptotic_entangled",
        }
    }
}

impl fmt::Display for Terminal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Number of sudden changes before the terminal behavior. The crossing that
/// causes sudden death is not counted as a change.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RegimeLabel {
    pub sudden_changes: u8,
    pub terminal: Terminal,
}

impl fmt::Display for RegimeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}, {}", self.sudden_changes, self.terminal)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Classification {
    Regime(RegimeLabel),
    Boundary(String),
}

impl Classification {
    pub fn regime(&self) -> Option<RegimeLabel> {
        match self {
            Classification::Regime(r) => Some(*r),
            Classification::Boundary(_) => None,
        }
    }
}

/// The three partial-transpose branches, labeled by level pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Branch {
    /// Coherence `ρ_{00,11}`, amplitude product `ab`.
    Ab,
    /// Coherence `ρ_{00,22}`, amplitude product `ac`.
    Ac,
    /// Coherence `ρ_{11,22}`, amplitude product `bc`.
    Bc,
}

pub const BRANCHES: [Branch; 3] = [Branch::Ab, Branch::Ac, Branch::Bc];

/// Time (in units of `1/γ`, equal rates) at which each branch of the
/// unconditional dynamics becomes non-negative; `None` if it stays negative
/// forever.
pub fn branch_crossing_times(structure: Structure, coeffs: &InitialCoeffs) -> [Option<f64>; 3] {
    let (a, b, c) = coeffs.abs();
    match structure {
        Structure::Cascade => {
            // P₀₁ = x[b²(1−x) + c²t(1−(1+t)x)], |ρ₀₀,₁₁| = ab·x, x = e^{−t}
            let ab = bisect(|t| {
                let x = (-t).exp();
                b * b * (1.0 - x) + c * c * t * (1.0 - (1.0 + t) * x) - a * b
            });
            // P₀₂ = c²(1−(1+t)x)x vs ac·x
            let ac = (c > a).then(|| bisect(|t| c * (1.0 - (1.0 + t) * (-t).exp()) - a)).flatten();
            // P₁₂ = c²t·x² vs bc·x²
            let bc = (c > 0.0).then(|| b / c);
            [ab, ac, bc]
        }
        Structure::Vee => {
            // P₀ₖ = k²x(1−x) vs a·k·x; the {11,22} block has no population
            let t = |k: f64| (k > a).then(|| -(1.0 - a / k).ln());
            [t(b), t(c), None]
        }
        Structure::Lambda => {
            // y = e^{−2t}: P₀₁ = c²(1−y)²/4 vs ab, P₀₂ = P₁₂ = c²(1−y)y/2 vs ac·y, bc·y
            let ab = (c * c > 4.0 * a * b).then(|| -0.5 * (1.0 - 2.0 * (a * b).sqrt() / c).ln());
            let t = |k: f64| (c > 2.0 * k).then(|| -0.5 * (1.0 - 2.0 * k / c).ln());
            [ab, t(a), t(b)]
        }
    }
}

/// Partial-transpose eigenvalue of one branch of the unconditional dynamics
/// (unit rates) at time `t`: the population `P_ij` minus the coherence
/// `|ρ_{ii,jj}|`. Negative while the branch contributes to the negativity.
pub fn branch_value(structure: Structure, coeffs: &InitialCoeffs, branch: Branch, t: f64) -> f64 {
    let (a, b, c) = coeffs.abs();
    match structure {
        Structure::Cascade => {
            let x = (-t).exp();
            match branch {
                Branch::Ab => x * (b * b * (1.0 - x) + c * c * t * (1.0 - (1.0 + t) * x)) - a * b * x,
                Branch::Ac => c * c * (1.0 - (1.0 + t) * x) * x - a * c * x,
                Branch::Bc => c * c * t * x * x - b * c * x * x,
            }
        }
        Structure::Vee => {
            let x = (-t).exp();
            match branch {
                Branch::Ab => b * b * x * (1.0 - x) - a * b * x,
                Branch::Ac => c * c * x * (1.0 - x) - a * c * x,
                Branch::Bc => -b * c * x * x,
            }
        }
        Structure::Lambda => {
            let y = (-2.0 * t).exp();
            match branch {
                Branch::Ab => c * c * (1.0 - y).powi(2) / 4.0 - a * b,
                Branch::Ac => c * c * (1.0 - y) * y / 2.0 - a * c * y,
                Branch::Bc => c * c * (1.0 - y) * y / 2.0 - b * c * y,
            }
        }
    }
}

/// Branches crossing before `horizon` too slowly to be resolved numerically
/// (slope below [`RESOLVABLE_SLOPE`] at the crossing).
pub fn unresolvable_crossings(structure: Structure, coeffs: &InitialCoeffs, horizon: f64) -> Vec<Branch> {
    let h = 1e-4;
    BRANCHES
        .iter()
        .zip(branch_crossing_times(structure, coeffs))
        .filter_map(|(&br, t)| {
            let t = t.filter(|&t| t <= horizon)?;
            let slope = (branch_value(structure, coeffs, br, t + h) - branch_value(structure, coeffs, br, t - h)) / (2.0 * h);
            (slope.abs() < RESOLVABLE_SLOPE).then_some(br)
        })
        .collect()
}

/// Root of an increasing function with `f(0) < 0`, if it has one.
fn bisect(f: impl Fn(f64) -> f64) -> Option<f64> {
    let mut hi = 1.0;
    while f(hi) < 0.0 {
        hi *= 2.0;
        if hi > 1e6 {
            return None;
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 * hi.max(1.0) {
            break;
        }
    }
    Some(0.5 * (lo + hi))
}

fn boundary_reason(structure: Structure, coeffs: &InitialCoeffs) -> Option<String> {
    let (a, b, c) = coeffs.abs();
    let near = |x: f64| x.abs() <= BOUNDARY_TOL;
    let mut checks = vec![(a, "a = 0"), (b, "b = 0"), (c, "c = 0"), (a - b, "a = b"), (a - c, "a = c"), (b - c, "b = c")];
    if structure == Structure::Lambda {
        checks.extend([(c - 2.0 * a, "c = 2a"), (c - 2.0 * b, "c = 2b"), (c * c - 4.0 * a * b, "c² = 4ab")]);
    }
    checks.into_iter().find(|(x, _)| near(*x)).map(|(_, why)| why.to_string())
}

/// Regime of the unconditional dynamics for equal decay rates, as `t → ∞`.
///
/// V and Λ reproduce the usual case tables (V: one change per amplitude among
/// `b, c` exceeding `a`; Λ: thresholds `c ≷ 2a`, `c ≷ 2b`, `c² ≷ 4ab`). For E
/// the `ab` and `bc` branches always cross and the `ac` branch crosses iff
/// `c > a`, so E gives two changes followed by sudden death for `c > a` and
/// two changes with asymptotic decay otherwise. Crossings can be late, e.g.
/// `t = b/c` for the `bc` branch; see [`classify_regime_within`].
pub fn classify_regime(structure: Structure, coeffs: &InitialCoeffs) -> Classification {
    classify_regime_within(structure, coeffs, f64::INFINITY)
}

/// As [`classify_regime`] but counting only crossings up to `horizon`.
pub fn classify_regime_within(structure: Structure, coeffs: &InitialCoeffs, horizon: f64) -> Classification {
    if let Some(why) = boundary_reason(structure, coeffs) {
        return Classification::Boundary(why);
    }
    let crossings = branch_crossing_times(structure, coeffs);
    let crossed = crossings.iter().filter(|t| t.is_some_and(|t| t <= horizon)).count() as u8;
    let label = if crossed == 3 {
        RegimeLabel { sudden_changes: 2, terminal: Terminal::SuddenDeath }
    } else {
        let entangled = structure == Structure::Lambda && crossings[0].is_none();
        let terminal = if entangled { Terminal::AsymptoticEntangled } else { Terminal::AsymptoticDecay };
        RegimeLabel { sudden_changes: crossed, terminal }
    };
    Classification::Regime(label)
}

/// What [`detect_sudden_changes`] found in a sampled spectrum series.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectrumReport {
    /// One entry per branch that changed sign, in time order; includes the
    /// death crossing.
    pub change_times: Vec<f64>,
    pub initial_branches: usize,
    pub final_branches: usize,
    /// Branches that dropped below the threshold by asymptotic decay.
    pub faded_branches: usize,
    pub death_time: Option<f64>,
}

impl SpectrumReport {
    /// Regime label given the negativity series the spectra came from.
    pub fn regime(&self, times: &[f64], negativities: &[f64]) -> RegimeLabel {
        if self.death_time.is_some() {
            let changes = self.change_times.len().saturating_sub(1) as u8;
            return RegimeLabel { sudden_changes: changes, terminal: Terminal::SuddenDeath };
        }
        let terminal = if has_plateau(times, negativities) {
            Terminal::AsymptoticEntangled
        } else {
            Terminal::AsymptoticDecay
        };
        RegimeLabel { sudden_changes: self.change_times.len() as u8, terminal }
    }
}

/// The negativity settles to a nonzero value over the last third of the run.
fn has_plateau(times: &[f64], negativities: &[f64]) -> bool {
    let (Some(&t_end), Some(&n_end)) = (times.last(), negativities.last()) else {
        return false;
    };
    let t_ref = times[0] + (t_end - times[0]) * 2.0 / 3.0;
    let j = times.partition_point(|&t| t < t_ref).min(times.len() - 1);
    n_end > PLATEAU_FLOOR && n_end / negativities[j] > PLATEAU_RATIO
}

/// Times at which a negative partial-transpose eigenvalue vanishes.
///
/// `spectra[k]` lists the eigenvalues below `−ε` at `times[k]`, with
/// `ε = EPS_ZERO`. Every drop in their count is a candidate crossing. A
/// branch that disappears from within `2ε` of zero is a crossing only if it
/// lost at least a third of its magnitude over the previous sample (a linear
/// approach to zero); slower shrinking means it faded under the threshold
/// without changing sign. Crossing times are linearly interpolated.
pub fn detect_sudden_changes(spectra: &[Vec<f64>], times: &[f64]) -> Vec<f64> {
    analyze_spectra(spectra, times).change_times
}

pub fn analyze_spectra(spectra: &[Vec<f64>], times: &[f64]) -> SpectrumReport {
    analyze_spectra_with(spectra, times, crate::qcore::EPS_ZERO)
}

/// [`analyze_spectra`] for spectra thresholded at `−eps`.
pub fn analyze_spectra_with(spectra: &[Vec<f64>], times: &[f64], eps: f64) -> SpectrumReport {
    let mut report = SpectrumReport {
        change_times: Vec::new(),
        initial_branches: spectra.first().map_or(0, Vec::len),
        final_branches: spectra.last().map_or(0, Vec::len),
        faded_branches: 0,
        death_time: None,
    };
    for k in 1..spectra.len().min(times.len()) {
        let (before, now) = (&spectra[k - 1], &spectra[k]);
        if now.len() >= before.len() {
            continue;
        }
        let dropped = before.len() - now.len();
        // closest to zero first
        let mut cand: Vec<f64> = before.iter().map(|x| x.abs()).collect();
        cand.sort_by(f64::total_cmp);
        let mut genuine = 0;
        for &mag in &cand[..dropped] {
            if mag >= FADE_FACTOR * eps || approaches_linearly(spectra, times, k, mag) {
                genuine += 1;
                report.change_times.push(crossing_time(spectra, times, k, mag));
            } else {
                report.faded_branches += 1;
            }
        }
        report.change_times.sort_by(f64::total_cmp);
        if now.is_empty() && genuine > 0 {
            report.death_time = report.change_times.last().copied();
        }
    }
    report
}

/// Whether the branch with magnitude `mag` at `k−1`, matched to the nearest
/// eigenvalue at `k−2`, extrapolates linearly to zero within
/// [`CROSSING_WINDOW`].
fn approaches_linearly(spectra: &[Vec<f64>], times: &[f64], k: usize, mag: f64) -> bool {
    if k < 2 {
        return true;
    }
    let prev = spectra[k - 2]
        .iter()
        .map(|x| x.abs())
        .min_by(|x, y| (x - mag).abs().total_cmp(&(y - mag).abs()));
    prev.is_some_and(|p| p > mag && mag * (times[k - 1] - times[k - 2]) / (p - mag) <= CROSSING_WINDOW)
}

/// Linear extrapolation of the branch with magnitude `mag` at `k−1` through
/// its magnitude at `k−2`, clamped to the sampling interval.
fn crossing_time(spectra: &[Vec<f64>], times: &[f64], k: usize, mag: f64) -> f64 {
    let (t0, t1) = (times[k - 1], times[k]);
    let mid = 0.5 * (t0 + t1);
    if k < 2 {
        return mid;
    }
    // the same branch one sample earlier: nearest magnitude at least as large
    let prev = spectra[k - 2].iter().map(|x| x.abs()).filter(|&x| x >= mag).min_by(f64::total_cmp);
    match prev {
        Some(p) if p > mag => {
            let slope = (p - mag) / (times[k - 1] - times[k - 2]);
            (t0 + mag / slope).clamp(t0, t1)
        }
        _ => mid,
    }
}

/// Unconditional two-qutrit evolution of `coeffs` for a structure with equal
/// unit rates, sampled every `dt` up to `horizon`, with the detected regime.
#[derive(Clone, Debug, Serialize)]
pub struct UnconditionalRun {
    pub times: Vec<f64>,
    pub negativities: Vec<f64>,
    pub spectra: Vec<Vec<f64>>,
    pub report: SpectrumReport,
    pub regime: RegimeLabel,
}

pub fn unconditional_regime(structure: Structure, coeffs: &InitialCoeffs, horizon: f64, dt: f64) -> Result<UnconditionalRun> {
    let cs = ChannelSet::structure_ops(structure, 1.0, 1.0)?.on_each_site(2)?;
    let params = SimParams { dt, t_max: horizon, record_stride: 1, ..SimParams::default() };
    let series = master_evolve(&coeffs.ket().to_density(), &cs, None, &params)?;
    let cut = crate::qcore::Cut::last_site(2);
    let mut negativities = Vec::with_capacity(series.states.len());
    let mut spectra = Vec::with_capacity(series.states.len());
    for rho in &series.states {
        let spec = crate::qcore::pt_eigenvalues(rho, &cut)?;
        negativities.push(-2.0 * spec.iter().filter(|&&x| x < 0.0).sum::<f64>());
        spectra.push(spec.into_iter().filter(|&x| x < -DETECTION_EPS).collect());
    }
    let report = analyze_spectra_with(&spectra, &series.times, DETECTION_EPS);
    let regime = report.regime(&series.times, &negativities);
    Ok(UnconditionalRun { times: series.times, negativities, spectra, report, regime })
}

/// Exponent rate of the no-jump amplitudes for the given structure:
/// `κ = γ` for E and V, `κ = 2γ` for Λ, with `H_eff = −½ΣΠ†Π`.
pub fn no_jump_kappa(structure: Structure, gamma: f64) -> f64 {
    match structure {
        Structure::Cascade | Structure::Vee => gamma,
        Structure::Lambda => 2.0 * gamma,
    }
}

/// No-jump negativity for E and V:
/// `2(ab e^{−κt} + ac e^{−κt} + bc e^{−2κt}) / (a² + (b²+c²)e^{−2κt})`.
pub fn nojump_negativity_ev(coeffs: &InitialCoeffs, kappa: f64, t: f64) -> f64 {
    let (a, b, c) = coeffs.abs();
    let x = (-kappa * t).exp();
    2.0 * (a * b * x + a * c * x + b * c * x * x) / (a * a + (b * b + c * c) * x * x)
}

/// No-jump negativity for Λ:
/// `2(ab + (a+b)c e^{−κt}) / (1 + c²(e^{−2κt} − 1))`.
pub fn nojump_negativity_lambda(coeffs: &InitialCoeffs, kappa: f64, t: f64) -> f64 {
    let (a, b, c) = coeffs.abs();
    let x = (-kappa * t).exp();
    2.0 * (a * b + (a + b) * c * x) / (1.0 + c * c * (x * x - 1.0))
}

/// `2ab/(a² + b²)`, the Λ no-jump limit.
pub fn nojump_lambda_asymptote(coeffs: &InitialCoeffs) -> f64 {
    let (a, b, _) = coeffs.abs();
    2.0 * a * b / (a * a + b * b)
}

pub fn nojump_negativity(structure: Structure, coeffs: &InitialCoeffs, gamma: f64, t: f64) -> f64 {
    let kappa = no_jump_kappa(structure, gamma);
    match structure {
        Structure::Cascade | Structure::Vee => nojump_negativity_ev(coeffs, kappa, t),
        Structure::Lambda => nojump_negativity_lambda(coeffs, kappa, t),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TransientReport {
    pub initial: f64,
    pub max_negativity: f64,
    pub time_of_max: f64,
    /// The maximum exceeds the initial value by more than 1e-12.
    pub increases: bool,
}

/// Scan the closed-form no-jump curve (unit rate) on `[0, 15]`.
pub fn nojump_transient_check(structure: Structure, coeffs: &InitialCoeffs) -> TransientReport {
    const T_END: f64 = 15.0;
    const POINTS: usize = 15_001;
    let initial = nojump_negativity(structure, coeffs, 1.0, 0.0);
    let (mut max_negativity, mut time_of_max) = (initial, 0.0);
    for i in 1..POINTS {
        let t = T_END * i as f64 / (POINTS - 1) as f64;
        let n = nojump_negativity(structure, coeffs, 1.0, t);
        if n > max_negativity {
            max_negativity = n;
            time_of_max = t;
        }
    }
    TransientReport { initial, max_negativity, time_of_max, increases: max_negativity > initial + 1e-12 }
}
