//! Annealed stochastic search over integer doping profiles.
//!
//! Starting from the uniform profile, step `i` draws `n(i) = n1·2^(i-1)`
//! random charge-neutral increments `h ∈ {-1,0,1}^N` with
//! `P(h_j = +1) = P(h_j = -1) = p(i) = p1·2^(1-i)`, scores `Z ± h` for each,
//! and moves to the best candidate if it beats the current profile.
//! Randomness comes from ChaCha8 seeded with [`SearchSchedule::seed`], so
//! a seed reproduces a run exactly.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::excitation::{Functionals, GoalKind};
use crate::ks::{scf_ground_state, ScfParams};
use crate::model::Model;
use crate::nuclear::{DopingProfile, ProfileConstraints};

/// Draws per increment before a step gives up on finding a feasible one.
pub const MAX_DRAWS: usize = 100_000;
/// Largest configuration count [`exhaustive_search`] will enumerate.
pub const MAX_ENUMERATION: u128 = 100_000;
pub const MAX_EXHAUSTIVE_ATOMS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchSchedule {
    pub p1: f64,
    pub n1: usize,
    pub steps: usize,
    pub seed: u64,
}

impl Default for SearchSchedule {
    fn default() -> Self {
        Self {
            p1: 1.0 / 3.0,
            n1: 10,
            steps: 4,
            seed: 0,
        }
    }
}

impl SearchSchedule {
    pub fn validate(&self) -> Result<()> {
        let bad = |name: &'static str, reason: String| Err(Error::InvalidParameter { name, reason });
        if !(self.p1 > 0.0 && self.p1 <= 0.5) {
            return bad("p1", format!("must lie in (0, 1/2], got {}", self.p1));
        }
        if self.n1 == 0 {
            return bad("n1", "must be at least 1".into());
        }
        if self.steps == 0 {
            return bad("steps", "must be at least 1".into());
        }
        if self.steps > 40 {
            return bad("steps", format!("{} steps overflow the proposal count", self.steps));
        }
        Ok(())
    }

    /// Per-sign flip probability at step `i` (1-based).
    pub fn probability(&self, i: usize) -> f64 {
        self.p1 * 0.5f64.powi(i as i32 - 1)
    }

    /// Number of proposals at step `i` (1-based).
    pub fn proposals(&self, i: usize) -> usize {
        self.n1 << (i - 1)
    }

    /// Upper bound on candidate evaluations, the initial profile included.
    pub fn max_evaluations(&self) -> usize {
        1 + 2 * (1..=self.steps).map(|i| self.proposals(i)).sum::<usize>()
    }
}

/// A random increment with `Σh = 0`, `h ≠ 0` and `current + h` in bounds,
/// by rejection sampling.
pub fn propose_increment<R: Rng + ?Sized>(
    rng: &mut R,
    p: f64,
    current: &DopingProfile,
    constraints: &ProfileConstraints,
) -> Result<Vec<i8>> {
    if !(p > 0.0 && p <= 0.5) {
        return Err(Error::InvalidParameter {
            name: "p",
            reason: format!("flip probability must lie in (0, 1/2], got {p}"),
        });
    }
    let n = current.len();
    let mut h = vec![0i8; n];
    for _ in 0..MAX_DRAWS {
        for v in h.iter_mut() {
            let u: f64 = rng.gen();
            *v = if u < p {
                1
            } else if u < 2.0 * p {
                -1
            } else {
                0
            };
        }
        let sum: i32 = h.iter().map(|&v| v as i32).sum();
        if sum != 0 || h.iter().all(|&v| v == 0) {
            continue;
        }
        let in_bounds = current
            .charges()
            .iter()
            .zip(&h)
            .all(|(&z, &d)| constraints.contains(z as i32 + d as i32));
        if in_bounds {
            return Ok(h);
        }
    }
    Err(Error::InfeasibleIncrement(MAX_DRAWS))
}

/// One scored configuration. `functionals` is `None` when the SCF failed.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateRecord {
    pub profile: DopingProfile,
    pub functionals: Option<Functionals>,
    pub score: f64,
    pub step: usize,
    pub accepted: bool,
}

impl CandidateRecord {
    pub fn failed(&self) -> bool {
        self.functionals.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub goal: GoalKind,
    pub best: DopingProfile,
    pub best_score: f64,
    pub best_functionals: Functionals,
    /// Every candidate in evaluation order: the initial profile, then per
    /// step each proposal's `+h` and (if feasible) `-h`.
    pub log: Vec<CandidateRecord>,
    /// `Z(0), …, Z(steps)` with their scores.
    pub trajectory: Vec<(DopingProfile, f64)>,
    /// Distinct profiles actually solved.
    pub evaluations: usize,
}

/// Search with the model's SCF as the evaluator.
pub fn search(model: &Model, goal: GoalKind, schedule: &SearchSchedule, scf: &ScfParams) -> Result<SearchResult> {
    scf.validate()?;
    search_with(model.constraints(), goal, schedule, |profile| evaluate_profile(model, profile, scf).ok())
}

/// All excitation functionals of one profile.
pub fn evaluate_profile(model: &Model, profile: &DopingProfile, scf: &ScfParams) -> Result<Functionals> {
    let state = scf_ground_state(model, profile, scf)?;
    Functionals::evaluate(model.grid(), &state, model.kernel())
}

/// The search with an arbitrary evaluator; `None` marks a failed candidate.
/// Each distinct profile is evaluated once.
pub fn search_with<F>(
    constraints: &ProfileConstraints,
    goal: GoalKind,
    schedule: &SearchSchedule,
    mut evaluate: F,
) -> Result<SearchResult>
where
    F: FnMut(&DopingProfile) -> Option<Functionals>,
{
    schedule.validate()?;
    constraints.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(schedule.seed);
    let mut cache: HashMap<DopingProfile, Option<Functionals>> = HashMap::new();
    let mut lookup = |profile: &DopingProfile| -> Option<Functionals> {
        *cache.entry(profile.clone()).or_insert_with(|| evaluate(profile))
    };

    let mut current = constraints.uniform()?;
    let mut current_f = lookup(&current).ok_or_else(|| {
        Error::InvalidProfile(format!("initial profile {current} could not be evaluated"))
    })?;
    let mut current_score = goal.score(&current_f);
    let mut log = vec![CandidateRecord {
        profile: current.clone(),
        functionals: Some(current_f),
        score: current_score,
        step: 0,
        accepted: true,
    }];
    let mut trajectory = vec![(current.clone(), current_score)];

    for step in 1..=schedule.steps {
        let p = schedule.probability(step);
        let step_start = log.len();
        for _ in 0..schedule.proposals(step) {
            let h = match propose_increment(&mut rng, p, &current, constraints) {
                Ok(h) => h,
                Err(Error::InfeasibleIncrement(_)) => continue,
                Err(e) => return Err(e),
            };
            for sign in [1i8, -1] {
                let Some(candidate) = current.shifted(&h, sign, constraints) else {
                    continue;
                };
                let functionals = lookup(&candidate);
                let score = functionals.map_or(f64::NAN, |f| goal.score(&f));
                log.push(CandidateRecord {
                    profile: candidate,
                    functionals,
                    score,
                    step,
                    accepted: false,
                });
            }
        }
        // first strict minimizer in log order; t = 0 keeps the current profile
        let mut winner: Option<usize> = None;
        let mut winner_score = current_score;
        for (idx, rec) in log.iter().enumerate().skip(step_start) {
            if rec.score < winner_score {
                winner = Some(idx);
                winner_score = rec.score;
            }
        }
        if let Some(idx) = winner {
            log[idx].accepted = true;
            current = log[idx].profile.clone();
            current_f = log[idx].functionals.expect("finite score implies functionals");
            current_score = winner_score;
        }
        trajectory.push((current.clone(), current_score));
    }

    Ok(SearchResult {
        goal,
        best: current,
        best_score: current_score,
        best_functionals: current_f,
        log,
        trajectory,
        evaluations: cache.len(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExhaustiveResult {
    pub best: DopingProfile,
    pub best_score: f64,
    /// Every feasible profile in lexicographic order with its score
    /// (NaN where evaluation failed).
    pub scores: Vec<(DopingProfile, f64)>,
}

/// All charge vectors within `constraints`, in lexicographic order.
pub fn feasible_profiles(constraints: &ProfileConstraints) -> Result<Vec<DopingProfile>> {
    constraints.validate()?;
    if constraints.atoms > MAX_EXHAUSTIVE_ATOMS {
        let span = (constraints.max_charge - constraints.min_charge + 1) as u128;
        return Err(Error::SearchSpaceTooLarge(span.saturating_pow(constraints.atoms as u32)));
    }
    let span = (constraints.max_charge - constraints.min_charge + 1) as u128;
    let count = span.pow(constraints.atoms as u32);
    if count > MAX_ENUMERATION {
        return Err(Error::SearchSpaceTooLarge(count));
    }
    let lo = constraints.min_charge as i64;
    let hi = constraints.max_charge as i64;
    let mut z = vec![lo; constraints.atoms];
    let mut out = Vec::new();
    loop {
        if z.iter().sum::<i64>() == constraints.total_charge as i64 {
            out.push(DopingProfile::new(&z, constraints)?);
        }
        // odometer increment, last digit fastest
        let mut k = z.len();
        loop {
            if k == 0 {
                return Ok(out);
            }
            k -= 1;
            if z[k] < hi {
                z[k] += 1;
                z[k + 1..].iter_mut().for_each(|v| *v = lo);
                break;
            }
        }
    }
}

/// Exact optimum by enumeration; ties go to the lexicographically first.
pub fn exhaustive_search_with<F>(constraints: &ProfileConstraints, goal: GoalKind, mut evaluate: F) -> Result<ExhaustiveResult>
where
    F: FnMut(&DopingProfile) -> Option<Functionals>,
{
    let mut scores = Vec::new();
    let mut best: Option<(DopingProfile, f64)> = None;
    for profile in feasible_profiles(constraints)? {
        let score = evaluate(&profile).map_or(f64::NAN, |f| goal.score(&f));
        if score.is_finite() && best.as_ref().is_none_or(|(_, s)| score < *s) {
            best = Some((profile.clone(), score));
        }
        scores.push((profile, score));
    }
    let (best, best_score) =
        best.ok_or_else(|| Error::InvalidProfile("no feasible profile could be evaluated".into()))?;
    Ok(ExhaustiveResult {
        best,
        best_score,
        scores,
    })
}

pub fn exhaustive_search(model: &Model, goal: GoalKind, scf: &ScfParams) -> Result<ExhaustiveResult> {
    scf.validate()?;
    exhaustive_search_with(model.constraints(), goal, |p| evaluate_profile(model, p, scf).ok())
}
