//! Community-propensity-augmented biased matrix factorization.
//!
//! The model predicts r̂_ui = μ + b_u + b_i + q_i·(p_u + Σ_{c: u∈c} α_uc·p_c)
//! and is trained by sequential SGD over shuffled ratings. μ is fixed to
//! the training mean. Every epoch's objective (squared error plus the
//! regularizer over all parameters) must not increase; an epoch that
//! raises it is rolled back and retried at half the learning rate, which
//! also tames configurations whose rate is too hot for their λ.

use std::io::{Read, Write};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Rating, RatingIds, RatingsTable, UserCommunities};
use crate::error::{Error, Result};
use crate::metrics::rmse_mae;

/// SGD hyperparameters. The defaults are conventional biased-SVD settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub d: usize,
    pub learning_rate: f64,
    pub reg_lambda: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { d: 10, learning_rate: 0.005, reg_lambda: 0.02, epochs: 30, seed: 0 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d < 1 {
            return Err(Error::validation("latent dimension must be at least 1"));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::validation(format!(
                "learning rate must be positive and finite, got {}",
                self.learning_rate
            )));
        }
        if !(self.reg_lambda >= 0.0) || !self.reg_lambda.is_finite() {
            return Err(Error::validation(format!(
                "regularization strength must be nonnegative, got {}",
                self.reg_lambda
            )));
        }
        Ok(())
    }
}

/// All trainable parameters; μ lives outside because it is held fixed.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Params {
    pub b_u: Vec<f64>,
    pub b_i: Vec<f64>,
    pub p_u: Vec<Vec<f64>>,
    pub q_i: Vec<Vec<f64>>,
    pub p_c: Vec<Vec<f64>>,
}

impl Params {
    /// Biases start at zero; vectors uniform in [−0.05, 0.05], drawn in
    /// p_u, q_i, p_c order.
    fn init(n_users: usize, n_items: usize, k: usize, d: usize, rng: &mut ChaCha8Rng) -> Params {
        let mut draw = |rows: usize| -> Vec<Vec<f64>> {
            (0..rows)
                .map(|_| (0..d).map(|_| rng.random_range(-0.05..0.05)).collect())
                .collect()
        };
        let p_u = draw(n_users);
        let q_i = draw(n_items);
        let p_c = draw(k);
        Params {
            b_u: vec![0.0; n_users],
            b_i: vec![0.0; n_items],
            p_u,
            q_i,
            p_c,
        }
    }
}

/// Composite user vector z = p_u + Σ α_uc·p_c into `z`.
fn composite_user(params: &Params, u: u32, terms: &[(u32, f64)], z: &mut [f64]) {
    z.copy_from_slice(&params.p_u[u as usize]);
    for &(c, a) in terms {
        for (zf, pf) in z.iter_mut().zip(&params.p_c[c as usize]) {
            *zf += a * pf;
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// One SGD step on one rating. All gradients are taken at the incoming
/// parameter values (the item vector is saved before its update), so one
/// step at rate η moves every parameter by exactly −η·∂L/∂θ of the
/// per-sample loss (r−r̂)² + λ(b_u² + b_i² + ‖q_i‖² + ‖p_u‖² + Σ_c‖p_c‖²).
pub(crate) fn sample_update(
    params: &mut Params,
    mu: f64,
    r: Rating,
    terms: &[(u32, f64)],
    lr: f64,
    lambda: f64,
    z: &mut [f64],
    q_old: &mut [f64],
) {
    let (u, i) = (r.user as usize, r.item as usize);
    composite_user(params, r.user, terms, z);
    q_old.copy_from_slice(&params.q_i[i]);
    let pred = mu + params.b_u[u] + params.b_i[i] + dot(q_old, z);
    let e = r.value - pred;

    params.b_u[u] += 2.0 * lr * (e - lambda * params.b_u[u]);
    params.b_i[i] += 2.0 * lr * (e - lambda * params.b_i[i]);
    for f in 0..z.len() {
        params.q_i[i][f] += 2.0 * lr * (e * z[f] - lambda * q_old[f]);
        params.p_u[u][f] += 2.0 * lr * (e * q_old[f] - lambda * params.p_u[u][f]);
    }
    for &(c, a) in terms {
        let pc = &mut params.p_c[c as usize];
        for f in 0..z.len() {
            pc[f] += 2.0 * lr * (e * a * q_old[f] - lambda * pc[f]);
        }
    }
}

/// Full training objective: Σ (r − r̂)² plus λ times the squared norm of
/// every parameter, each counted once.
pub(crate) fn objective(
    params: &Params,
    mu: f64,
    ratings: &[Rating],
    communities: &UserCommunities,
    lambda: f64,
) -> f64 {
    let d = params.q_i.first().map_or(0, Vec::len);
    let mut z = vec![0.0; d];
    let mut data = 0.0;
    for r in ratings {
        composite_user(params, r.user, communities.terms(r.user), &mut z);
        let pred = mu + params.b_u[r.user as usize] + params.b_i[r.item as usize]
            + dot(&params.q_i[r.item as usize], &z);
        let e = r.value - pred;
        data += e * e;
    }
    let mut reg = 0.0;
    reg += params.b_u.iter().map(|b| b * b).sum::<f64>();
    reg += params.b_i.iter().map(|b| b * b).sum::<f64>();
    for rows in [&params.p_u, &params.q_i, &params.p_c] {
        reg += rows.iter().flat_map(|v| v.iter().map(|x| x * x)).sum::<f64>();
    }
    data + lambda * reg
}

/// Analytic gradient of [`objective`] with the same parameter layout.
fn gradient(
    params: &Params,
    mu: f64,
    ratings: &[Rating],
    communities: &UserCommunities,
    lambda: f64,
) -> Params {
    let d = params.q_i.first().map_or(0, Vec::len);
    let mut grad = Params {
        b_u: vec![0.0; params.b_u.len()],
        b_i: vec![0.0; params.b_i.len()],
        p_u: vec![vec![0.0; d]; params.p_u.len()],
        q_i: vec![vec![0.0; d]; params.q_i.len()],
        p_c: vec![vec![0.0; d]; params.p_c.len()],
    };
    let mut z = vec![0.0; d];
    for r in ratings {
        let (u, i) = (r.user as usize, r.item as usize);
        let terms = communities.terms(r.user);
        composite_user(params, r.user, terms, &mut z);
        let q = &params.q_i[i];
        let e = r.value - (mu + params.b_u[u] + params.b_i[i] + dot(q, &z));
        grad.b_u[u] -= 2.0 * e;
        grad.b_i[i] -= 2.0 * e;
        for f in 0..d {
            grad.p_u[u][f] -= 2.0 * e * q[f];
            grad.q_i[i][f] -= 2.0 * e * z[f];
        }
        for &(c, a) in terms {
            for f in 0..d {
                grad.p_c[c as usize][f] -= 2.0 * e * a * q[f];
            }
        }
    }
    for (g, x) in grad.b_u.iter_mut().zip(&params.b_u) {
        *g += 2.0 * lambda * x;
    }
    for (g, x) in grad.b_i.iter_mut().zip(&params.b_i) {
        *g += 2.0 * lambda * x;
    }
    for (rows, xs) in [
        (&mut grad.p_u, &params.p_u),
        (&mut grad.q_i, &params.q_i),
        (&mut grad.p_c, &params.p_c),
    ] {
        for (gr, xr) in rows.iter_mut().zip(xs) {
            for (g, x) in gr.iter_mut().zip(xr) {
                *g += 2.0 * lambda * x;
            }
        }
    }
    grad
}

/// Validates the analytic training gradient against central finite
/// differences of the objective at a random parameter point, one
/// coordinate at a time. Returns, per parameter class, the worst relative
/// error `|analytic − numeric| / max(|analytic|, |numeric|, 1e−6)`; the
/// classes are `b_u`, `b_i`, `p_u`, `q_i` and `p_c` in that order.
pub fn gradient_check(
    train: &RatingsTable,
    communities: &UserCommunities,
    cfg: &TrainConfig,
    epsilon: f64,
) -> Result<Vec<(&'static str, f64)>> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::validation("cannot check gradients on an empty table"));
    }
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::validation(format!("step must be positive and finite, got {epsilon}")));
    }
    let mu = train.mean_rating();
    let lambda = cfg.reg_lambda;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params =
        Params::init(train.n_users(), train.n_items(), communities.k(), cfg.d, &mut rng);
    // nonzero biases so their regularization terms are exercised too
    for b in params.b_u.iter_mut().chain(params.b_i.iter_mut()) {
        *b = rng.random_range(-0.5..0.5);
    }

    let analytic = gradient(&params, mu, train.ratings(), communities, lambda);
    // perturbs one coordinate both ways, restoring it afterwards
    let diff = |params: &mut Params, pick: &dyn Fn(&mut Params) -> &mut f64| -> f64 {
        let saved = *pick(params);
        *pick(params) = saved + epsilon;
        let plus = objective(params, mu, train.ratings(), communities, lambda);
        *pick(params) = saved - epsilon;
        let minus = objective(params, mu, train.ratings(), communities, lambda);
        *pick(params) = saved;
        (plus - minus) / (2.0 * epsilon)
    };
    let rel = |a: f64, n: f64| (a - n).abs() / a.abs().max(n.abs()).max(1e-6);

    let mut worst = vec![("b_u", 0.0f64), ("b_i", 0.0), ("p_u", 0.0), ("q_i", 0.0), ("p_c", 0.0)];
    macro_rules! check_biases {
        ($slot:expr, $field:ident) => {
            for idx in 0..analytic.$field.len() {
                let n = diff(&mut params, &move |p: &mut Params| &mut p.$field[idx]);
                let r = rel(analytic.$field[idx], n);
                worst[$slot].1 = worst[$slot].1.max(r);
            }
        };
    }
    macro_rules! check_vectors {
        ($slot:expr, $field:ident) => {
            for row in 0..analytic.$field.len() {
                for f in 0..analytic.$field[row].len() {
                    let n = diff(&mut params, &move |p: &mut Params| &mut p.$field[row][f]);
                    let r = rel(analytic.$field[row][f], n);
                    worst[$slot].1 = worst[$slot].1.max(r);
                }
            }
        };
    }
    check_biases!(0, b_u);
    check_biases!(1, b_i);
    check_vectors!(2, p_u);
    check_vectors!(3, q_i);
    check_vectors!(4, p_c);
    Ok(worst)
}

/// The fitted recommender.
#[derive(Debug, Clone)]
pub struct ConSVDModel {
    pub mu: f64,
    pub d: usize,
    pub(crate) params: Params,
    pub(crate) user_terms: Vec<Vec<(u32, f64)>>,
    pub(crate) ids: Arc<RatingIds>,
}

impl ConSVDModel {
    /// Prediction in index space, unclamped. Unknown or out-of-range
    /// indices degrade gracefully: missing terms contribute zero, so the
    /// worst case is the global mean.
    pub fn predict_index(&self, user: Option<u32>, item: Option<u32>) -> f64 {
        let u = user.filter(|&u| (u as usize) < self.params.b_u.len());
        let i = item.filter(|&i| (i as usize) < self.params.b_i.len());
        let mut pred = self.mu;
        if let Some(u) = u {
            pred += self.params.b_u[u as usize];
        }
        if let Some(i) = i {
            pred += self.params.b_i[i as usize];
        }
        if let (Some(u), Some(i)) = (u, i) {
            let mut z = vec![0.0; self.d];
            composite_user(&self.params, u, &self.user_terms[u as usize], &mut z);
            pred += dot(&self.params.q_i[i as usize], &z);
        }
        pred
    }

    /// Prediction by external ids, unclamped; unknown users or items fall
    /// back to the terms that remain.
    pub fn predict(&self, user: &str, item: &str) -> f64 {
        self.predict_index(
            self.ids.user_index.get(user).copied(),
            self.ids.item_index.get(item).copied(),
        )
    }
}

const LR_FLOOR: f64 = 1e-12;

/// Fits the model; see [`fit_consvd_traced`] for the objective trace.
pub fn fit_consvd(
    train: &RatingsTable,
    communities: &UserCommunities,
    cfg: &TrainConfig,
) -> Result<ConSVDModel> {
    fit_consvd_traced(train, communities, cfg).map(|(model, _)| model)
}

/// Fits the model and returns the per-epoch objective values, which are
/// non-increasing by construction: an epoch that raises the objective is
/// rolled back (parameters and RNG state) and rerun at half the learning
/// rate; training stops early if the rate collapses below 1e−12.
pub fn fit_consvd_traced(
    train: &RatingsTable,
    communities: &UserCommunities,
    cfg: &TrainConfig,
) -> Result<(ConSVDModel, Vec<f64>)> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::validation("cannot fit a recommender on an empty table"));
    }
    if communities.n_users() != train.n_users() {
        return Err(Error::validation(format!(
            "community terms cover {} users but the table has {}",
            communities.n_users(),
            train.n_users()
        )));
    }

    let mu = train.mean_rating();
    let lambda = cfg.reg_lambda;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = Params::init(
        train.n_users(),
        train.n_items(),
        communities.k(),
        cfg.d,
        &mut rng,
    );
    let mut order: Vec<u32> = (0..train.len() as u32).collect();
    let mut z = vec![0.0; cfg.d];
    let mut q_old = vec![0.0; cfg.d];
    let mut lr = cfg.learning_rate;
    let mut prev = objective(&params, mu, train.ratings(), communities, lambda);
    let mut trace = Vec::with_capacity(cfg.epochs);

    'epochs: for _ in 0..cfg.epochs {
        let snapshot = params.clone();
        let rng_snapshot = rng.clone();
        loop {
            order.shuffle(&mut rng);
            for &t in &order {
                let r = train.ratings()[t as usize];
                sample_update(
                    &mut params,
                    mu,
                    r,
                    communities.terms(r.user),
                    lr,
                    lambda,
                    &mut z,
                    &mut q_old,
                );
            }
            let obj = objective(&params, mu, train.ratings(), communities, lambda);
            if obj <= prev {
                prev = obj;
                trace.push(obj);
                break;
            }
            params = snapshot.clone();
            rng = rng_snapshot.clone();
            lr /= 2.0;
            if lr < LR_FLOOR {
                break 'epochs;
            }
        }
    }

    let user_terms: Vec<Vec<(u32, f64)>> = (0..train.n_users() as u32)
        .map(|u| communities.terms(u).to_vec())
        .collect();
    let model = ConSVDModel {
        mu,
        d: cfg.d,
        params,
        user_terms,
        ids: Arc::clone(train.ids()),
    };
    Ok((model, trace))
}

/// RMSE and MAE over a test table, predictions clamped to [1,5].
pub fn evaluate_ratings(model: &ConSVDModel, test: &RatingsTable) -> Result<(f64, f64)> {
    if test.is_empty() {
        return Err(Error::validation("cannot evaluate on an empty table"));
    }
    let mut predicted = Vec::with_capacity(test.len());
    let mut truth = Vec::with_capacity(test.len());
    for r in test.ratings() {
        predicted.push(model.predict_index(Some(r.user), Some(r.item)).clamp(1.0, 5.0));
        truth.push(r.value);
    }
    rmse_mae(&predicted, &truth)
}

const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    version: u32,
    cfg: TrainConfig,
    cover_hash: String,
    mu: f64,
    d: usize,
    users: Vec<String>,
    items: Vec<String>,
    b_u: Vec<f64>,
    b_i: Vec<f64>,
    p_u: Vec<Vec<f64>>,
    q_i: Vec<Vec<f64>>,
    p_c: Vec<Vec<f64>>,
    user_terms: Vec<Vec<(u32, f64)>>,
}

/// Serializes a fitted model with the config, seed and cover hash that
/// produced it, so matrix runs can detect stale checkpoints.
pub fn write_checkpoint<W: Write>(
    model: &ConSVDModel,
    cfg: &TrainConfig,
    cover_hash: &str,
    w: W,
) -> Result<()> {
    let ck = Checkpoint {
        version: CHECKPOINT_VERSION,
        cfg: *cfg,
        cover_hash: cover_hash.to_string(),
        mu: model.mu,
        d: model.d,
        users: model.ids.users.clone(),
        items: model.ids.items.clone(),
        b_u: model.params.b_u.clone(),
        b_i: model.params.b_i.clone(),
        p_u: model.params.p_u.clone(),
        q_i: model.params.q_i.clone(),
        p_c: model.params.p_c.clone(),
        user_terms: model.user_terms.clone(),
    };
    serde_json::to_writer(w, &ck)?;
    Ok(())
}

/// Restores a checkpoint written by [`write_checkpoint`].
pub fn read_checkpoint<R: Read>(r: R) -> Result<(ConSVDModel, TrainConfig, String)> {
    let ck: Checkpoint = serde_json::from_reader(r)?;
    if ck.version != CHECKPOINT_VERSION {
        return Err(Error::validation(format!(
            "checkpoint version {} is not supported (expected {CHECKPOINT_VERSION})",
            ck.version
        )));
    }
    let model = ConSVDModel {
        mu: ck.mu,
        d: ck.d,
        params: Params {
            b_u: ck.b_u,
            b_i: ck.b_i,
            p_u: ck.p_u,
            q_i: ck.q_i,
            p_c: ck.p_c,
        },
        user_terms: ck.user_terms,
        ids: Arc::new(RatingIds::from_lists(ck.users, ck.items)),
    };
    Ok((model, ck.cfg, ck.cover_hash))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recsys::RatingsTable;

    fn row(u: &str, i: &str, v: f64) -> (String, String, f64) {
        (u.to_string(), i.to_string(), v)
    }

    /// A small dense-ish table: 5 users, 5 items, block-structured values.
    fn toy_table() -> RatingsTable {
        let mut rows = Vec::new();
        for u in 0..5 {
            for i in 0..5 {
                if (u + i) % 3 == 0 {
                    continue;
                }
                let v = if (u < 2) == (i < 2) { 4.5 } else { 1.5 };
                rows.push(row(&format!("u{u}"), &format!("i{i}"), v));
            }
        }
        RatingsTable::from_rows(rows).unwrap()
    }

    /// Two communities over the toy users with mixed α weights.
    fn toy_communities(table: &RatingsTable) -> UserCommunities {
        let mut terms = vec![Vec::new(); table.n_users()];
        for u in 0..5u32 {
            let ext = table.user_id(u).to_string();
            let idx: usize = ext[1..].parse().unwrap();
            if idx < 3 {
                terms[u as usize].push((0, 0.5 + 0.1 * idx as f64));
            }
            if idx >= 2 {
                terms[u as usize].push((1, 0.9 - 0.2 * (idx - 2) as f64));
            }
        }
        UserCommunities { terms, n_communities: 2 }
    }

    #[test]
    fn zero_vectors_reduce_prediction_to_biases() {
        let table = toy_table();
        let model = ConSVDModel {
            mu: 3.0,
            d: 2,
            params: Params {
                b_u: vec![0.5; table.n_users()],
                b_i: vec![-0.2; table.n_items()],
                p_u: vec![vec![0.0; 2]; table.n_users()],
                q_i: vec![vec![0.0; 2]; table.n_items()],
                p_c: vec![],
            },
            user_terms: vec![Vec::new(); table.n_users()],
            ids: Arc::clone(table.ids()),
        };
        assert!((model.predict_index(Some(0), Some(0)) - 3.3).abs() < 1e-12);
        // unknown ids lose their terms progressively
        assert_eq!(model.predict("nobody", "nothing"), 3.0);
        assert!((model.predict("u0", "nothing") - 3.5).abs() < 1e-12);
    }

    #[test]
    fn sgd_step_matches_finite_differences() {
        let table = toy_table();
        let comm = toy_communities(&table);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let base = Params::init(table.n_users(), table.n_items(), comm.k(), 4, &mut rng);
        let mu = 3.1;
        let lambda = 0.07;
        let sample = Rating { user: 2, item: 3, value: 4.5 };
        let terms = comm.terms(sample.user).to_vec();

        // per-sample loss as a function of the full parameter set
        let loss = |p: &Params| -> f64 {
            let mut z = vec![0.0; 4];
            composite_user(p, sample.user, &terms, &mut z);
            let pred = mu
                + p.b_u[sample.user as usize]
                + p.b_i[sample.item as usize]
                + dot(&p.q_i[sample.item as usize], &z);
            let e = sample.value - pred;
            let mut reg = p.b_u[sample.user as usize].powi(2)
                + p.b_i[sample.item as usize].powi(2);
            reg += p.q_i[sample.item as usize].iter().map(|x| x * x).sum::<f64>();
            reg += p.p_u[sample.user as usize].iter().map(|x| x * x).sum::<f64>();
            for &(c, _) in &terms {
                reg += p.p_c[c as usize].iter().map(|x| x * x).sum::<f64>();
            }
            e * e + lambda * reg
        };

        // one unit-rate step recovers the exact analytic gradient
        let mut stepped = base.clone();
        let (mut z, mut q_old) = (vec![0.0; 4], vec![0.0; 4]);
        sample_update(&mut stepped, mu, sample, &terms, 1.0, lambda, &mut z, &mut q_old);

        let eps = 1e-5;
        let check = |get: &dyn Fn(&Params) -> f64, set: &dyn Fn(&mut Params, f64), label: &str| {
            let grad_sgd = get(&base) - get(&stepped);
            let x0 = get(&base);
            let mut plus = base.clone();
            set(&mut plus, x0 + eps);
            let mut minus = base.clone();
            set(&mut minus, x0 - eps);
            let grad_fd = (loss(&plus) - loss(&minus)) / (2.0 * eps);
            let scale = grad_fd.abs().max(1.0);
            assert!(
                (grad_sgd - grad_fd).abs() / scale < 1e-4,
                "{label}: sgd {grad_sgd} vs fd {grad_fd}"
            );
        };

        let u = sample.user as usize;
        let i = sample.item as usize;
        check(&|p| p.b_u[u], &|p, x| p.b_u[u] = x, "b_u");
        check(&|p| p.b_i[i], &|p, x| p.b_i[i] = x, "b_i");
        for f in 0..4 {
            check(&move |p| p.q_i[i][f], &move |p, x| p.q_i[i][f] = x, "q_i");
            check(&move |p| p.p_u[u][f], &move |p, x| p.p_u[u][f] = x, "p_u");
            for &(c, _) in &terms {
                let c = c as usize;
                check(&move |p| p.p_c[c][f], &move |p, x| p.p_c[c][f] = x, "p_c");
            }
        }
    }

    #[test]
    fn objective_trace_is_non_increasing() {
        let table = toy_table();
        let comm = toy_communities(&table);
        let cfg = TrainConfig { learning_rate: 1e-3, epochs: 25, ..TrainConfig::default() };
        let (_, trace) = fit_consvd_traced(&table, &comm, &cfg).unwrap();
        assert!(!trace.is_empty());
        for w in trace.windows(2) {
            assert!(w[1] <= w[0], "objective rose: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn fitting_beats_the_constant_mean_predictor() {
        let table = toy_table();
        let comm = toy_communities(&table);
        let cfg = TrainConfig { epochs: 60, ..TrainConfig::default() };
        let model = fit_consvd(&table, &comm, &cfg).unwrap();
        let (rmse_fit, _) = evaluate_ratings(&model, &table).unwrap();
        let mu = table.mean_rating();
        let preds: Vec<f64> = vec![mu; table.len()];
        let truth: Vec<f64> = table.ratings().iter().map(|r| r.value).collect();
        let (rmse_mu, _) = rmse_mae(&preds, &truth).unwrap();
        assert!(rmse_fit <= rmse_mu, "fit {rmse_fit} vs mean {rmse_mu}");
    }

    #[test]
    fn single_rating_converges_to_its_target() {
        let table = RatingsTable::from_rows(vec![row("u", "i", 5.0)]).unwrap();
        let comm = UserCommunities::empty(&table);
        let cfg = TrainConfig { epochs: 200, ..TrainConfig::default() };
        let model = fit_consvd(&table, &comm, &cfg).unwrap();
        assert!((model.predict_index(Some(0), Some(0)) - 5.0).abs() < 0.1);
    }

    #[test]
    fn huge_regularization_collapses_to_the_mean() {
        let table = toy_table();
        let comm = toy_communities(&table);
        let cfg = TrainConfig { reg_lambda: 1e6, epochs: 20, ..TrainConfig::default() };
        let model = fit_consvd(&table, &comm, &cfg).unwrap();
        let mu = table.mean_rating();
        for r in table.ratings() {
            let pred = model.predict_index(Some(r.user), Some(r.item));
            assert!(
                (pred - mu).abs() < 0.05,
                "prediction {pred} strayed from mu {mu}"
            );
        }
    }

    #[test]
    fn empty_cover_is_exactly_classic_biased_svd() {
        let table = toy_table();
        let cfg = TrainConfig { epochs: 8, ..TrainConfig::default() };
        let model = fit_consvd(&table, &UserCommunities::empty(&table), &cfg).unwrap();

        // classic biased SVD, written out independently: same init draws,
        // same shuffles, no community machinery anywhere
        let mu = table.mean_rating();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut draw = |rows: usize| -> Vec<Vec<f64>> {
            (0..rows)
                .map(|_| (0..cfg.d).map(|_| rng.random_range(-0.05..0.05)).collect())
                .collect()
        };
        let mut p_u = draw(table.n_users());
        let mut q_i = draw(table.n_items());
        let _p_c = draw(0);
        let mut b_u = vec![0.0f64; table.n_users()];
        let mut b_i = vec![0.0f64; table.n_items()];
        let mut order: Vec<u32> = (0..table.len() as u32).collect();
        let lr = cfg.learning_rate;
        let lam = cfg.reg_lambda;
        // baseline objective, then the epochs (none of them regress here)
        let obj = |b_u: &[f64], b_i: &[f64], p_u: &Vec<Vec<f64>>, q_i: &Vec<Vec<f64>>| -> f64 {
            let mut data = 0.0;
            for r in table.ratings() {
                let e = r.value
                    - (mu
                        + b_u[r.user as usize]
                        + b_i[r.item as usize]
                        + dot(&q_i[r.item as usize], &p_u[r.user as usize]));
                data += e * e;
            }
            let mut reg = b_u.iter().chain(b_i).map(|b| b * b).sum::<f64>();
            reg += p_u.iter().chain(q_i).flat_map(|v| v.iter().map(|x| x * x)).sum::<f64>();
            data + lam * reg
        };
        let mut prev = obj(&b_u, &b_i, &p_u, &q_i);
        for _ in 0..cfg.epochs {
            order.shuffle(&mut rng);
            for &t in &order {
                let r = table.ratings()[t as usize];
                let (u, i) = (r.user as usize, r.item as usize);
                let q_old = q_i[i].clone();
                let pred = mu + b_u[u] + b_i[i] + dot(&q_old, &p_u[u]);
                let e = r.value - pred;
                b_u[u] += 2.0 * lr * (e - lam * b_u[u]);
                b_i[i] += 2.0 * lr * (e - lam * b_i[i]);
                for f in 0..cfg.d {
                    q_i[i][f] += 2.0 * lr * (e * p_u[u][f] - lam * q_old[f]);
                    p_u[u][f] += 2.0 * lr * (e * q_old[f] - lam * p_u[u][f]);
                }
            }
            let o = obj(&b_u, &b_i, &p_u, &q_i);
            assert!(o <= prev, "reference epoch regressed");
            prev = o;
        }

        assert_eq!(model.params.b_u, b_u);
        assert_eq!(model.params.b_i, b_i);
        assert_eq!(model.params.p_u, p_u);
        assert_eq!(model.params.q_i, q_i);
        assert!(model.params.p_c.is_empty());
    }

    #[test]
    fn fit_is_seed_deterministic() {
        let table = toy_table();
        let comm = toy_communities(&table);
        let cfg = TrainConfig { epochs: 5, ..TrainConfig::default() };
        let a = fit_consvd(&table, &comm, &cfg).unwrap();
        let b = fit_consvd(&table, &comm, &cfg).unwrap();
        assert_eq!(a.params, b.params);
        let c = fit_consvd(&table, &comm, &TrainConfig { seed: 1, ..cfg }).unwrap();
        assert_ne!(a.params, c.params);
    }

    #[test]
    fn evaluation_clamps_and_bounds_errors() {
        let table = RatingsTable::from_rows(vec![row("u", "a", 1.0), row("u", "b", 5.0)]).unwrap();
        let model = ConSVDModel {
            mu: 3.0,
            d: 1,
            params: Params {
                b_u: vec![0.0],
                b_i: vec![0.0, 0.0],
                p_u: vec![vec![0.0]],
                q_i: vec![vec![0.0], vec![0.0]],
                p_c: vec![],
            },
            user_terms: vec![Vec::new()],
            ids: Arc::clone(table.ids()),
        };
        let (rmse, mae) = evaluate_ratings(&model, &table).unwrap();
        assert!((rmse - 2.0).abs() < 1e-12);
        assert!((mae - 2.0).abs() < 1e-12);
        assert!(rmse >= mae);
    }

    #[test]
    fn empty_training_set_is_rejected() {
        let table = RatingsTable::from_rows(Vec::new()).unwrap();
        let comm = UserCommunities::empty(&table);
        assert!(fit_consvd(&table, &comm, &TrainConfig::default()).is_err());
    }

    #[test]
    fn checkpoints_round_trip() {
        let table = toy_table();
        let comm = toy_communities(&table);
        let cfg = TrainConfig { epochs: 3, ..TrainConfig::default() };
        let model = fit_consvd(&table, &comm, &cfg).unwrap();

        let mut buf = Vec::new();
        write_checkpoint(&model, &cfg, "deadbeef", &mut buf).unwrap();
        let (back, cfg_back, hash) = read_checkpoint(buf.as_slice()).unwrap();
        assert_eq!(hash, "deadbeef");
        assert_eq!(cfg_back, cfg);
        assert_eq!(back.params, model.params);
        for r in table.ratings() {
            let a = model.predict_index(Some(r.user), Some(r.item));
            let b = back.predict(table.user_id(r.user), table.item_id(r.item));
            assert_eq!(a, b);
        }

        // future versions are refused rather than misread
        let mut ck: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        ck["version"] = serde_json::json!(99);
        let err = read_checkpoint(ck.to_string().as_bytes()).unwrap_err();
        assert!(err.to_string().contains("version"), "{err}");
    }

    #[test]
    fn analytic_gradients_match_central_differences() {
        let table = toy_table();
        let comm = toy_communities(&table);
        let cfg = TrainConfig { d: 4, seed: 3, ..TrainConfig::default() };
        let worst = gradient_check(&table, &comm, &cfg, 1e-4).unwrap();
        assert_eq!(worst.len(), 5);
        let names: Vec<&str> = worst.iter().map(|(n, _)| *n).collect();
        assert_eq!(names, ["b_u", "b_i", "p_u", "q_i", "p_c"]);
        for (name, err) in &worst {
            // the objective is quadratic per coordinate, so the central
            // difference is exact up to float noise
            assert!(*err < 1e-7, "{name}: relative error {err}");
        }

        assert!(gradient_check(&table, &comm, &cfg, 0.0).is_err());
        assert!(gradient_check(&table, &comm, &cfg, f64::NAN).is_err());
    }
}
