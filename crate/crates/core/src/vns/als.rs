//! Adaptive local search: roulette-wheel operator choice, Metropolis
//! acceptance with geometric cooling and decayed operator scores.

use rand::Rng;

use super::shaking::sample_index;

#[derive(Debug, Clone, PartialEq)]
pub struct AlsConfig {
    pub t_min: f64,
    /// Cooling factor applied to the temperature every iteration.
    pub alpha: f64,
    pub gamma_max_unchanged: usize,
    /// Score decay in `ρ ← λρ + (1−λ)Ψ`.
    pub lambda: f64,
    /// Scores for new best, improving, accepted and rejected moves.
    pub psi: [f64; 4],
    pub gamma_max: usize,
    /// Order-level start temperature as a fraction of the current objective.
    pub order_t0_factor: f64,
}

impl Default for AlsConfig {
    fn default() -> Self {
        Self {
            t_min: 0.1,
            alpha: 0.975,
            gamma_max_unchanged: 3,
            lambda: 0.8,
            psi: [4.0, 2.0, 1.0, 0.0],
            gamma_max: 500,
            order_t0_factor: 0.05,
        }
    }
}

impl AlsConfig {
    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn with_psi(mut self, psi: [f64; 4]) -> Self {
        self.psi = psi;
        self
    }

    pub fn with_gamma_max(mut self, gamma_max: usize) -> Self {
        self.gamma_max = gamma_max;
        self
    }

    pub fn validate(&self) -> Result<(), String> {
        let [a, b, c, d] = self.psi;
        if !(a >= b && b >= c && c >= d && d >= 0.0) {
            return Err(format!("psi must be non-increasing and non-negative, got {:?}", self.psi));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(format!("lambda must lie in [0, 1], got {}", self.lambda));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if self.gamma_max == 0 {
            return Err("gamma_max must be at least 1".into());
        }
        Ok(())
    }
}

/// Metropolis rule: strict improvements always pass, otherwise accept when
/// `u < exp(−|f − f′|/T)`.
pub fn metropolis_accept(f_current: f64, f_new: f64, temperature: f64, u: f64) -> bool {
    f_new < f_current || u < (-(f_current - f_new).abs() / temperature).exp()
}

/// Score of one iteration: best of the cases that apply.
pub fn score(psi: &[f64; 4], new_best: bool, improving: bool, accepted: bool) -> f64 {
    if new_best {
        psi[0]
    } else if improving {
        psi[1]
    } else if accepted {
        psi[2]
    } else {
        psi[3]
    }
}

pub fn update_weight(rho: f64, lambda: f64, psi: f64) -> f64 {
    lambda * rho + (1.0 - lambda) * psi
}

#[derive(Debug, Clone)]
pub struct AlsOutcome<S> {
    pub best: S,
    pub best_f: f64,
    pub weights: Vec<f64>,
    pub iterations: usize,
}

/// A neighbourhood operator: maps the current point to a candidate and its
/// objective value.
pub type Operator<'a, S, R, E> = dyn FnMut(&S, &mut R) -> Result<(S, f64), E> + 'a;

/// Runs the search from `x` (objective `fx`) and returns the best point seen.
pub fn adaptive_local_search<S: Clone, R: Rng, E>(
    x: S,
    fx: f64,
    t0: f64,
    operators: &mut [&mut Operator<'_, S, R, E>],
    cfg: &AlsConfig,
    rng: &mut R,
) -> Result<AlsOutcome<S>, E> {
    assert!(!operators.is_empty(), "adaptive local search needs operators");
    let mut rho = vec![1.0; operators.len()];
    let (mut x, mut fx) = (x, fx);
    let (mut best, mut best_f) = (x.clone(), fx);
    let mut t = t0;
    let mut gamma = 0;
    let mut unchanged = 0;
    loop {
        let i = sample_index(&rho, rng);
        let (cand, fc) = (operators[i])(&x, rng)?;
        let improving = fc < fx;
        let accepted = improving || {
            let u: f64 = rng.gen();
            metropolis_accept(fx, fc, t, u)
        };
        let psi = score(&cfg.psi, fc < best_f, improving, accepted);
        if accepted {
            unchanged = 0;
            if fc < best_f {
                best = cand.clone();
                best_f = fc;
            }
            x = cand;
            fx = fc;
        } else {
            unchanged += 1;
        }
        t *= cfg.alpha;
        gamma += 1;
        rho[i] = update_weight(rho[i], cfg.lambda, psi);
        if t <= cfg.t_min || gamma >= cfg.gamma_max || unchanged >= cfg.gamma_max_unchanged {
            break;
        }
    }
    Ok(AlsOutcome { best, best_f, weights: rho, iterations: gamma })
}
