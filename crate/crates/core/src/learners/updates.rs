use crate::error::{check_len, Error, Result};
use crate::matrix::Matrix;

use super::{clamp_sigma, Episode, EpisodeBatch, ExplorationMode, StepRecord};

/// `|d action_j / d W_jk|` for the clipped linear map: `|b_k|` where output
/// `j` did not saturate, else 0.
pub fn action_gradient_weight(record: &StepRecord) -> Matrix {
    Matrix::from_fn(record.clipped_mask.len(), record.basis.len(), |j, k| {
        if record.clipped_mask[j] {
            0.0
        } else {
            record.basis[k].abs()
        }
    })
}

fn check_advantages(batch: &EpisodeBatch, advantages: &[Vec<f64>]) -> Result<()> {
    check_len("advantages per batch", batch.len(), advantages.len())?;
    for (ep, adv) in batch.episodes().zip(advantages) {
        check_len("advantages per episode", ep.len(), adv.len())?;
    }
    Ok(())
}

/// Accumulates `sum_ep sum_t weight(step, j, k) · term(ep)_jk · A_t`.
fn weighted_sum(
    batch: &EpisodeBatch,
    shape: (usize, usize),
    advantages: &[Vec<f64>],
    weight: impl Fn(&StepRecord, usize, usize) -> f64,
    term: impl Fn(&Episode) -> Matrix,
) -> Result<Matrix> {
    check_advantages(batch, advantages)?;
    let (rows, cols) = shape;
    let mut acc = Matrix::zeros(rows, cols);
    for (ep, adv) in batch.episodes().zip(advantages) {
        let coeff = term(ep);
        coeff.check_same_shape(&acc)?;
        for (step, &a) in ep.steps.iter().zip(adv) {
            check_len("step basis", cols, step.basis.len())?;
            check_len("step clip mask", rows, step.clipped_mask.len())?;
            for j in 0..rows {
                for k in 0..cols {
                    acc[(j, k)] += weight(step, j, k) * coeff[(j, k)] * a;
                }
            }
        }
    }
    Ok(acc)
}

fn agol_weight(step: &StepRecord, j: usize, k: usize) -> f64 {
    if step.clipped_mask[j] {
        0.0
    } else {
        step.basis[k].abs()
    }
}

/// Parameter-exploration likelihood-ratio step with an arbitrary per-step
/// weight on every parameter: `theta + lr · sum weight ⊙ (explored - theta)/sigma² · A_t`.
pub fn gradient_weighted_update(
    batch: &EpisodeBatch,
    theta: &Matrix,
    advantages: &[Vec<f64>],
    lr: f64,
    weight: impl Fn(&StepRecord, usize, usize) -> f64,
) -> Result<Matrix> {
    batch.require_mode(ExplorationMode::Parameter)?;
    let delta = weighted_sum(batch, theta.shape(), advantages, weight, |ep| {
        ep.perturbation
            .zip_map(&ep.sigma, |d, s| d / (s * s))
            .expect("episode matrices share a shape")
    })?;
    theta.zip_map(&delta, |t, d| t + lr * d)
}

/// Gradient-weighted parameter update (shared by AGL and AGOL).
pub fn agol_update(
    batch: &EpisodeBatch,
    theta: &Matrix,
    advantages: &[Vec<f64>],
    lr: f64,
) -> Result<Matrix> {
    gradient_weighted_update(batch, theta, advantages, lr, agol_weight)
}

/// Plain parameter-exploring policy gradient: the gradient weight is 1.
pub fn pgpe_update(
    batch: &EpisodeBatch,
    theta: &Matrix,
    advantages: &[Vec<f64>],
    lr: f64,
) -> Result<Matrix> {
    gradient_weighted_update(batch, theta, advantages, lr, |_, _, _| 1.0)
}

/// Exploration-std step with an arbitrary per-step weight, clamped to
/// `[SIGMA_MIN, SIGMA_MAX]`.
pub fn gradient_weighted_sigma_update(
    batch: &EpisodeBatch,
    sigma: &Matrix,
    advantages: &[Vec<f64>],
    lr: f64,
    weight: impl Fn(&StepRecord, usize, usize) -> f64,
) -> Result<Matrix> {
    batch.require_mode(ExplorationMode::Parameter)?;
    let delta = weighted_sum(batch, sigma.shape(), advantages, weight, |ep| {
        ep.perturbation
            .zip_map(&ep.sigma, |d, s| (d * d - s * s) / (s * s * s))
            .expect("episode matrices share a shape")
    })?;
    Ok(clamp_sigma(&sigma.zip_map(&delta, |s, d| s + lr * d)?))
}

/// Gradient-weighted adaptation of the exploration std.
pub fn agol_sigma_update(
    batch: &EpisodeBatch,
    sigma: &Matrix,
    advantages: &[Vec<f64>],
    lr: f64,
) -> Result<Matrix> {
    gradient_weighted_sigma_update(batch, sigma, advantages, lr, agol_weight)
}

pub fn pgpe_sigma_update(
    batch: &EpisodeBatch,
    sigma: &Matrix,
    advantages: &[Vec<f64>],
    lr: f64,
) -> Result<Matrix> {
    gradient_weighted_sigma_update(batch, sigma, advantages, lr, |_, _, _| 1.0)
}

/// Reward-weighted averaging of explored parameters with weights
/// `exp(h·(R_k - R_max)/(R_max - R_min + 1e-8))`, normalized over the batch.
pub fn pibb_update(batch: &EpisodeBatch, episode_returns: &[f64], h: f64) -> Result<Matrix> {
    batch.require_mode(ExplorationMode::Parameter)?;
    if batch.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "reward-weighted averaging needs at least 2 episodes, got {}",
            batch.len()
        )));
    }
    check_len("pibb returns", batch.len(), episode_returns.len())?;
    let max = episode_returns
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let min = episode_returns
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let span = max - min + 1e-8;
    let raw: Vec<f64> = episode_returns
        .iter()
        .map(|r| (h * (r - max) / span).exp())
        .collect();
    let total: f64 = raw.iter().sum();
    let mut episodes = batch.episodes();
    let first = episodes.next().expect("batch has two episodes");
    let mut theta = first.explored().map(|x| x * raw[0] / total);
    for (ep, w) in episodes.zip(&raw[1..]) {
        let explored = ep.explored();
        theta = theta.zip_map(&explored, |acc, x| acc + x * w / total)?;
    }
    Ok(theta)
}

/// Log density of an isotropic Gaussian.
pub fn gaussian_log_density(x: &[f64], mean: &[f64], sigma: f64) -> f64 {
    let var = sigma * sigma;
    let norm = -0.5 * (2.0 * std::f64::consts::PI * var).ln();
    x.iter()
        .zip(mean)
        .map(|(a, m)| norm - (a - m) * (a - m) / (2.0 * var))
        .sum()
}

/// Noise-free action under `theta` plus the saturation mask.
fn mean_action(theta: &Matrix, basis: &[f64], alpha_max: f64) -> (Vec<f64>, Vec<bool>) {
    let raw = theta.mul_vec_unchecked(basis);
    let mask = raw.iter().map(|x| x.abs() > alpha_max).collect();
    (
        raw.into_iter()
            .map(|x| x.clamp(-alpha_max, alpha_max))
            .collect(),
        mask,
    )
}

/// Adds `scale · d ln N(action; clip(theta·b), sigma) / d theta` into `acc`.
fn add_score(
    acc: &mut Matrix,
    theta: &Matrix,
    step: &StepRecord,
    sigma: f64,
    alpha_max: f64,
    scale: f64,
) {
    let (mean, mask) = mean_action(theta, &step.basis, alpha_max);
    let var = sigma * sigma;
    for j in 0..acc.rows() {
        if mask[j] {
            continue;
        }
        let g = (step.action[j] - mean[j]) / var * scale;
        for k in 0..acc.cols() {
            acc[(j, k)] += g * step.basis[k];
        }
    }
}

fn check_action_batch(batch: &EpisodeBatch, theta: &Matrix, advantages: &[Vec<f64>]) -> Result<()> {
    batch.require_mode(ExplorationMode::Action)?;
    check_advantages(batch, advantages)?;
    for ep in batch.episodes() {
        if !(ep.sigma_action > 0.0) {
            return Err(Error::Config("action noise std must be > 0".into()));
        }
        for step in &ep.steps {
            check_len("step basis", theta.cols(), step.basis.len())?;
            check_len("step action", theta.rows(), step.action.len())?;
        }
    }
    Ok(())
}

/// REINFORCE estimate `sum_ep sum_t grad ln N(action; a(theta), sigma_a) · A_t`.
pub fn pg_gradient(
    batch: &EpisodeBatch,
    theta: &Matrix,
    advantages: &[Vec<f64>],
) -> Result<Matrix> {
    check_action_batch(batch, theta, advantages)?;
    let mut acc = Matrix::zeros(theta.rows(), theta.cols());
    for (ep, adv) in batch.episodes().zip(advantages) {
        for (step, &a) in ep.steps.iter().zip(adv) {
            add_score(&mut acc, theta, step, ep.sigma_action, ep.alpha_max, a);
        }
    }
    Ok(acc)
}

pub fn pg_update(
    batch: &EpisodeBatch,
    theta: &Matrix,
    advantages: &[Vec<f64>],
    lr: f64,
) -> Result<Matrix> {
    let grad = pg_gradient(batch, theta, advantages)?;
    theta.zip_map(&grad, |t, g| t + lr * g)
}

fn likelihood_ratio(theta: &Matrix, ep: &Episode, step: &StepRecord) -> f64 {
    let (mean, _) = mean_action(theta, &step.basis, ep.alpha_max);
    let new = gaussian_log_density(&step.action, &mean, ep.sigma_action);
    let old = gaussian_log_density(&step.action, &step.mean_action, ep.sigma_action);
    (new - old).exp()
}

/// Clipped surrogate `mean(min(rho·A, clip(rho, 1-c, 1+c)·A))`.
pub fn ppo_surrogate(
    batch: &EpisodeBatch,
    theta: &Matrix,
    advantages: &[Vec<f64>],
    clip_ratio: f64,
) -> Result<f64> {
    check_action_batch(batch, theta, advantages)?;
    let (mut sum, mut n) = (0.0, 0usize);
    for (ep, adv) in batch.episodes().zip(advantages) {
        for (step, &a) in ep.steps.iter().zip(adv) {
            let rho = likelihood_ratio(theta, ep, step);
            sum += (rho * a).min(rho.clamp(1.0 - clip_ratio, 1.0 + clip_ratio) * a);
            n += 1;
        }
    }
    Ok(if n == 0 { 0.0 } else { sum / n as f64 })
}

/// Gradient of [`ppo_surrogate`]; clipped terms contribute nothing.
pub fn ppo_gradient(
    batch: &EpisodeBatch,
    theta: &Matrix,
    advantages: &[Vec<f64>],
    clip_ratio: f64,
) -> Result<Matrix> {
    check_action_batch(batch, theta, advantages)?;
    let mut acc = Matrix::zeros(theta.rows(), theta.cols());
    let n = batch.step_count().max(1) as f64;
    for (ep, adv) in batch.episodes().zip(advantages) {
        for (step, &a) in ep.steps.iter().zip(adv) {
            let rho = likelihood_ratio(theta, ep, step);
            let active = if a >= 0.0 {
                rho <= 1.0 + clip_ratio
            } else {
                rho >= 1.0 - clip_ratio
            };
            if active {
                add_score(
                    &mut acc,
                    theta,
                    step,
                    ep.sigma_action,
                    ep.alpha_max,
                    a * rho / n,
                );
            }
        }
    }
    Ok(acc)
}

/// `epochs` full-batch ascent steps on the clipped surrogate.
pub fn ppo_update(
    batch: &EpisodeBatch,
    theta: &Matrix,
    advantages: &[Vec<f64>],
    lr: f64,
    clip_ratio: f64,
    epochs: usize,
) -> Result<Matrix> {
    let mut current = theta.clone();
    for _ in 0..epochs {
        let grad = ppo_gradient(batch, &current, advantages, clip_ratio)?;
        current = current.zip_map(&grad, |t, g| t + lr * g)?;
    }
    Ok(current)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::{explore_parameters, SIGMA_MAX, SIGMA_MIN};
    use crate::sme::clipped_linear;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn param_episode(
        perturbation: f64,
        sigma: f64,
        basis: f64,
        clipped: bool,
        reward: f64,
    ) -> Episode {
        Episode {
            steps: vec![StepRecord {
                basis: vec![basis],
                action: vec![0.0],
                mean_action: vec![0.0],
                clipped_mask: vec![clipped],
                reward,
            }],
            mode: ExplorationMode::Parameter,
            theta: Matrix::zeros(1, 1),
            perturbation: Matrix::filled(1, 1, perturbation),
            sigma: Matrix::filled(1, 1, sigma),
            sigma_action: 0.0,
            alpha_max: 0.3,
        }
    }

    fn single(ep: Episode) -> EpisodeBatch {
        EpisodeBatch::from_episodes(vec![ep])
    }

    #[test]
    fn gradient_weight_cases() {
        let rec = StepRecord {
            basis: vec![1.0, 0.0, 0.0, 0.0],
            action: vec![0.0; 3],
            mean_action: vec![0.0; 3],
            clipped_mask: vec![false; 3],
            reward: 0.0,
        };
        let w = action_gradient_weight(&rec);
        for j in 0..3 {
            assert_eq!(w.row(j), &[1.0, 0.0, 0.0, 0.0]);
        }
        let all_clipped = StepRecord {
            clipped_mask: vec![true; 3],
            ..rec
        };
        assert_eq!(action_gradient_weight(&all_clipped), Matrix::zeros(3, 4));
    }

    #[test]
    fn gradient_weight_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let alpha = 0.3;
        let mut checked = 0;
        while checked < 100 {
            let w = Matrix::from_fn(18, 4, |_, _| rng.gen_range(-0.6..0.6));
            let b: Vec<f64> = (0..4).map(|_| rng.gen_range(0.0..0.6)).collect();
            let raw = w.mul_vec(&b).unwrap();
            if raw.iter().any(|x| (x.abs() - alpha).abs() < 1e-3) {
                continue;
            }
            let rec = StepRecord {
                basis: b.clone(),
                action: vec![],
                mean_action: vec![],
                clipped_mask: raw.iter().map(|x| x.abs() > alpha).collect(),
                reward: 0.0,
            };
            let analytic = action_gradient_weight(&rec);
            let h = 1e-7;
            for j in 0..18 {
                for k in 0..4 {
                    let mut p = w.clone();
                    p[(j, k)] += h;
                    let mut m = w.clone();
                    m[(j, k)] -= h;
                    let fd = (clipped_linear(&p, &b, alpha).unwrap()[j]
                        - clipped_linear(&m, &b, alpha).unwrap()[j])
                        / (2.0 * h);
                    let want = analytic[(j, k)];
                    assert!(
                        (fd.abs() - want).abs() <= 1e-6 * want.max(1e-2),
                        "{fd} {want}"
                    );
                }
            }
            checked += 1;
        }
    }

    #[test]
    fn scalar_substitution() {
        let batch = single(param_episode(0.5, 1.0, 1.0, false, 0.0));
        let theta = Matrix::zeros(1, 1);
        let adv = vec![vec![2.0]];
        assert_eq!(agol_update(&batch, &theta, &adv, 0.5).unwrap()[(0, 0)], 0.5);
        assert_eq!(pgpe_update(&batch, &theta, &adv, 0.5).unwrap()[(0, 0)], 0.5);
        assert_eq!(
            agol_update(&batch, &theta, &[vec![0.0]], 0.5).unwrap()[(0, 0)],
            0.0
        );
    }

    #[test]
    fn pgpe_mirrored_pair() {
        let (delta, a, lr) = (0.2, 1.5, 0.1);
        let batch = EpisodeBatch::from_episodes(vec![
            param_episode(delta, 1.0, 1.0, false, 0.0),
            param_episode(-delta, 1.0, 1.0, false, 0.0),
        ]);
        let got = pgpe_update(&batch, &Matrix::zeros(1, 1), &[vec![a], vec![-a]], lr).unwrap();
        assert!((got[(0, 0)] - 2.0 * lr * delta * a).abs() < 1e-15);
        let zero = EpisodeBatch::from_episodes(vec![param_episode(0.0, 1.0, 1.0, false, 0.0)]);
        assert_eq!(
            pgpe_update(&zero, &Matrix::zeros(1, 1), &[vec![a]], lr).unwrap()[(0, 0)],
            0.0
        );
    }

    #[test]
    fn sigma_update_cases() {
        let sigma = Matrix::filled(1, 1, 0.5);
        let stationary = single(param_episode(0.5, 0.5, 1.0, false, 0.0));
        assert_eq!(
            agol_sigma_update(&stationary, &sigma, &[vec![1.0]], 0.1).unwrap(),
            sigma
        );
        let shrink = single(param_episode(0.0, 1.0, 1.0, false, 0.0));
        let got =
            agol_sigma_update(&shrink, &Matrix::filled(1, 1, 1.0), &[vec![1.0]], 0.1).unwrap();
        assert!((got[(0, 0)] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn sigma_stays_clamped() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut sigma = Matrix::filled(2, 2, 0.1);
        for _ in 0..200 {
            let theta = Matrix::zeros(2, 2);
            let explored = explore_parameters(&theta, &sigma, &mut rng).unwrap();
            let ep = Episode {
                steps: vec![StepRecord {
                    basis: vec![rng.gen_range(0.0..1.0), 1.0],
                    action: vec![0.0; 2],
                    mean_action: vec![0.0; 2],
                    clipped_mask: vec![false; 2],
                    reward: 0.0,
                }],
                mode: ExplorationMode::Parameter,
                theta,
                perturbation: explored,
                sigma: sigma.clone(),
                sigma_action: 0.0,
                alpha_max: 0.3,
            };
            let adv = vec![vec![rng.gen_range(-50.0..50.0)]];
            sigma = agol_sigma_update(&single(ep), &sigma, &adv, 1.0).unwrap();
            assert!(sigma
                .as_slice()
                .iter()
                .all(|&s| (SIGMA_MIN..=SIGMA_MAX).contains(&s)));
        }
    }

    #[test]
    fn inactive_basis_receives_no_update() {
        let mut ep = param_episode(0.3, 0.2, 0.0, false, 0.0);
        ep.steps[0].basis = vec![0.0];
        let got = agol_update(&single(ep), &Matrix::zeros(1, 1), &[vec![3.0]], 1.0).unwrap();
        assert_eq!(got[(0, 0)], 0.0);
        let clipped = param_episode(0.3, 0.2, 1.0, true, 0.0);
        let got = agol_update(&single(clipped), &Matrix::zeros(1, 1), &[vec![3.0]], 1.0).unwrap();
        assert_eq!(got[(0, 0)], 0.0);
    }

    fn pibb_batch(explored: &[f64]) -> EpisodeBatch {
        EpisodeBatch::from_episodes(
            explored
                .iter()
                .map(|&x| param_episode(x, 0.1, 1.0, false, 0.0))
                .collect(),
        )
    }

    #[test]
    fn pibb_cases() {
        let batch = pibb_batch(&[0.1, 0.2, 0.6]);
        let uniform = pibb_update(&batch, &[1.0, 1.0, 1.0], 10.0).unwrap();
        assert!((uniform[(0, 0)] - 0.3).abs() < 1e-12);
        let greedy = pibb_update(&batch, &[0.0, 5.0, 1.0], 200.0).unwrap();
        assert!((greedy[(0, 0)] - 0.2).abs() < 1e-3);
        let base = pibb_update(&batch, &[0.3, -0.2, 0.1], 10.0).unwrap();
        let shifted = pibb_update(&batch, &[10.3, 9.8, 10.1], 10.0).unwrap();
        assert!((base[(0, 0)] - shifted[(0, 0)]).abs() < 1e-12);
        assert!(pibb_update(&pibb_batch(&[0.1]), &[1.0], 10.0).is_err());
    }

    fn action_episode(rng: &mut ChaCha8Rng, theta: &Matrix, steps: usize, sigma_a: f64) -> Episode {
        let alpha = 0.3;
        let records = (0..steps)
            .map(|_| {
                let basis: Vec<f64> = (0..theta.cols()).map(|_| rng.gen_range(0.0..0.6)).collect();
                let raw = theta.mul_vec(&basis).unwrap();
                let mean: Vec<f64> = raw.iter().map(|x| x.clamp(-alpha, alpha)).collect();
                let action = mean
                    .iter()
                    .map(|m| m + sigma_a * rng.gen_range(-1.5..1.5))
                    .collect();
                StepRecord {
                    clipped_mask: raw.iter().map(|x| x.abs() > alpha).collect(),
                    basis,
                    action,
                    mean_action: mean,
                    reward: rng.gen_range(-0.01..0.01),
                }
            })
            .collect();
        Episode {
            steps: records,
            mode: ExplorationMode::Action,
            theta: theta.clone(),
            perturbation: Matrix::zeros(theta.rows(), theta.cols()),
            sigma: Matrix::filled(theta.rows(), theta.cols(), 0.1),
            sigma_action: sigma_a,
            alpha_max: alpha,
        }
    }

    #[test]
    fn pg_rejects_parameter_batches() {
        let batch = single(param_episode(0.1, 0.1, 1.0, false, 0.0));
        assert!(matches!(
            pg_update(&batch, &Matrix::zeros(1, 1), &[vec![1.0]], 0.1),
            Err(Error::ExplorationMode { .. })
        ));
        assert!(ppo_update(&batch, &Matrix::zeros(1, 1), &[vec![1.0]], 0.1, 0.2, 4).is_err());
    }

    #[test]
    fn pg_scalar_and_noise_free() {
        let ep = Episode {
            steps: vec![StepRecord {
                basis: vec![1.0],
                action: vec![0.2],
                mean_action: vec![0.0],
                clipped_mask: vec![false],
                reward: 0.0,
            }],
            mode: ExplorationMode::Action,
            theta: Matrix::zeros(1, 1),
            perturbation: Matrix::zeros(1, 1),
            sigma: Matrix::filled(1, 1, 0.1),
            sigma_action: 1.0,
            alpha_max: 0.3,
        };
        let got = pg_update(&single(ep.clone()), &Matrix::zeros(1, 1), &[vec![1.0]], 1.0).unwrap();
        assert!((got[(0, 0)] - 0.2).abs() < 1e-15);
        let mut exact = ep;
        exact.steps[0].action = vec![0.0];
        let got = pg_update(&single(exact), &Matrix::zeros(1, 1), &[vec![1.0]], 1.0).unwrap();
        assert_eq!(got[(0, 0)], 0.0);
    }

    #[test]
    fn pg_score_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut checked = 0;
        while checked < 100 {
            let theta = Matrix::from_fn(18, 4, |_, _| rng.gen_range(-0.5..0.5));
            let ep = action_episode(&mut rng, &theta, 1, 0.05);
            let step = &ep.steps[0];
            let raw = theta.mul_vec(&step.basis).unwrap();
            if raw.iter().any(|x| (x.abs() - 0.3).abs() < 1e-3) {
                continue;
            }
            let grad = pg_gradient(&single(ep.clone()), &theta, &[vec![1.0]]).unwrap();
            let logp = |t: &Matrix| {
                let mean = clipped_linear(t, &step.basis, 0.3).unwrap();
                gaussian_log_density(&step.action, &mean, 0.05)
            };
            let h = 1e-6;
            for j in 0..18 {
                for k in 0..4 {
                    let mut p = theta.clone();
                    p[(j, k)] += h;
                    let mut m = theta.clone();
                    m[(j, k)] -= h;
                    let fd = (logp(&p) - logp(&m)) / (2.0 * h);
                    let g = grad[(j, k)];
                    assert!((fd - g).abs() <= 1e-6 * g.abs().max(1.0), "{fd} vs {g}");
                }
            }
            checked += 1;
        }
    }

    #[test]
    fn ppo_matches_pg_at_ratio_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let theta = Matrix::from_fn(18, 4, |_, _| rng.gen_range(-0.3..0.3));
        let episodes: Vec<Episode> = (0..3)
            .map(|_| action_episode(&mut rng, &theta, 10, 0.05))
            .collect();
        let batch = EpisodeBatch::from_episodes(episodes);
        let adv: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..10).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let pg = pg_gradient(&batch, &theta, &adv).unwrap();
        let ppo = ppo_gradient(&batch, &theta, &adv, 0.2).unwrap();
        let n = batch.step_count() as f64;
        for (a, b) in pg.as_slice().iter().zip(ppo.as_slice()) {
            assert!((a / n - b).abs() < 1e-12);
        }
    }

    #[test]
    fn ppo_clipped_branch_has_zero_gradient() {
        let ep = Episode {
            steps: vec![StepRecord {
                basis: vec![1.0],
                action: vec![0.1],
                mean_action: vec![0.0],
                clipped_mask: vec![false],
                reward: 0.0,
            }],
            mode: ExplorationMode::Action,
            theta: Matrix::zeros(1, 1),
            perturbation: Matrix::zeros(1, 1),
            sigma: Matrix::filled(1, 1, 0.1),
            sigma_action: 0.05,
            alpha_max: 0.3,
        };
        // Moving the mean halfway to the sampled action gives a ratio of e^1.5.
        let theta = Matrix::filled(1, 1, 0.05);
        let batch = single(ep);
        let g = ppo_gradient(&batch, &theta, &[vec![1.0]], 0.2).unwrap();
        assert_eq!(g[(0, 0)], 0.0);
        let g = ppo_gradient(&batch, &theta, &[vec![-1.0]], 0.2).unwrap();
        assert!(g[(0, 0)] != 0.0);
    }

    #[test]
    fn ppo_improves_a_bandit() {
        // One-step bandit: reward = -(action - 0.2)^2, features constant 1.
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let sigma_a = 0.05;
        let mut theta = Matrix::zeros(1, 1);
        let expected = |t: f64| -((t - 0.2f64).powi(2) + sigma_a * sigma_a);
        let start = expected(theta[(0, 0)]);
        for _ in 0..50 {
            let episodes: Vec<Episode> = (0..8)
                .map(|_| {
                    let mean = theta[(0, 0)].clamp(-0.3, 0.3);
                    let z: f64 = rng.sample(rand_distr::StandardNormal);
                    let action = mean + sigma_a * z;
                    Episode {
                        steps: vec![StepRecord {
                            basis: vec![1.0],
                            action: vec![action],
                            mean_action: vec![mean],
                            clipped_mask: vec![theta[(0, 0)].abs() > 0.3],
                            reward: -(action - 0.2).powi(2),
                        }],
                        mode: ExplorationMode::Action,
                        theta: theta.clone(),
                        perturbation: Matrix::zeros(1, 1),
                        sigma: Matrix::filled(1, 1, 0.1),
                        sigma_action: sigma_a,
                        alpha_max: 0.3,
                    }
                })
                .collect();
            let batch = EpisodeBatch::from_episodes(episodes);
            let adv = crate::learners::advantage_sim(&batch).unwrap();
            theta = ppo_update(&batch, &theta, &adv, 0.001, 0.2, 4).unwrap();
        }
        assert!(expected(theta[(0, 0)]) > start, "theta {}", theta[(0, 0)]);
        assert!((theta[(0, 0)] - 0.2).abs() < 0.1);
    }

    #[test]
    fn agol_reduces_to_pgpe_with_unit_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let theta = Matrix::from_fn(18, 4, |_, _| rng.gen_range(-0.3..0.3));
        let sigma = Matrix::filled(18, 4, 0.1);
        let episodes: Vec<Episode> = (0..8)
            .map(|_| {
                let explored = explore_parameters(&theta, &sigma, &mut rng).unwrap();
                Episode {
                    steps: (0..5)
                        .map(|_| StepRecord {
                            basis: (0..4).map(|_| rng.gen_range(0.0..0.6)).collect(),
                            action: vec![0.0; 18],
                            mean_action: vec![0.0; 18],
                            clipped_mask: (0..18).map(|_| rng.gen_bool(0.2)).collect(),
                            reward: 0.0,
                        })
                        .collect(),
                    mode: ExplorationMode::Parameter,
                    perturbation: explored.zip_map(&theta, |a, b| a - b).unwrap(),
                    theta: theta.clone(),
                    sigma: sigma.clone(),
                    sigma_action: 0.0,
                    alpha_max: 0.3,
                }
            })
            .collect();
        let batch = EpisodeBatch::from_episodes(episodes);
        let adv: Vec<Vec<f64>> = (0..8)
            .map(|_| (0..5).map(|_| rng.gen_range(-2.0..2.0)).collect())
            .collect();
        let forced = gradient_weighted_update(&batch, &theta, &adv, 0.5, |_, _, _| 1.0).unwrap();
        let pgpe = pgpe_update(&batch, &theta, &adv, 0.5).unwrap();
        assert_eq!(forced, pgpe);
        let agol = agol_update(&batch, &theta, &adv, 0.5).unwrap();
        assert_ne!(agol, pgpe);
    }
}
