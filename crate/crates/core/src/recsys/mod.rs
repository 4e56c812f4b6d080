//! Rating data and the community-aware recommender built on it.
//!
//! A [`RatingsTable`] holds (user, item, rating) triples behind dense
//! index maps that derived tables (cross-validation folds) share, so model
//! parameters stay index-compatible across folds. Community structure
//! reaches the recommender through [`UserCommunities`], which maps table
//! users onto trust-graph nodes and carries their propensity weights; the
//! trust graph is side information, so the full graph is used rather than
//! a fold-restricted one.

mod consvd;

pub use consvd::{
    evaluate_ratings, fit_consvd, fit_consvd_traced, gradient_check, read_checkpoint,
    write_checkpoint, ConSVDModel, TrainConfig,
};

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::centrality::PropensityMap;
use crate::communities::Cover;
use crate::error::{Error, Result};
use crate::graph::{split_fields, Graph};

/// Shared user/item id spaces: external ids in index order plus the
/// reverse maps.
#[derive(Debug)]
pub(crate) struct RatingIds {
    pub users: Vec<String>,
    pub items: Vec<String>,
    pub user_index: HashMap<String, u32>,
    pub item_index: HashMap<String, u32>,
}

impl RatingIds {
    fn new() -> Self {
        RatingIds {
            users: Vec::new(),
            items: Vec::new(),
            user_index: HashMap::new(),
            item_index: HashMap::new(),
        }
    }

    pub(crate) fn from_lists(users: Vec<String>, items: Vec<String>) -> Self {
        let user_index = users
            .iter()
            .enumerate()
            .map(|(i, u)| (u.clone(), i as u32))
            .collect();
        let item_index = items
            .iter()
            .enumerate()
            .map(|(i, u)| (u.clone(), i as u32))
            .collect();
        RatingIds { users, items, user_index, item_index }
    }
}

/// One rating in dense index space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rating {
    pub user: u32,
    pub item: u32,
    pub value: f64,
}

/// A set of ratings over shared user/item index maps. Holds at most one
/// rating per (user, item); values live in [1,5].
#[derive(Debug, Clone)]
pub struct RatingsTable {
    ids: Arc<RatingIds>,
    ratings: Vec<Rating>,
    clamped: usize,
}

impl RatingsTable {
    /// Builds a table from raw rows. Users and items are interned in first
    /// appearance order; duplicate (user, item) rows keep the last value;
    /// out-of-range values are clamped to [1,5] and counted.
    pub fn from_rows<I>(rows: I) -> Result<RatingsTable>
    where
        I: IntoIterator<Item = (String, String, f64)>,
    {
        let mut ids = RatingIds::new();
        let mut cells: HashMap<(u32, u32), f64> = HashMap::new();
        let mut clamped = 0usize;
        for (user, item, value) in rows {
            if !value.is_finite() {
                return Err(Error::validation(format!(
                    "non-finite rating {value} for ({user}, {item})"
                )));
            }
            let u = match ids.user_index.get(&user) {
                Some(&u) => u,
                None => {
                    let u = ids.users.len() as u32;
                    ids.users.push(user.clone());
                    ids.user_index.insert(user, u);
                    u
                }
            };
            let i = match ids.item_index.get(&item) {
                Some(&i) => i,
                None => {
                    let i = ids.items.len() as u32;
                    ids.items.push(item.clone());
                    ids.item_index.insert(item, i);
                    i
                }
            };
            let v = if (1.0..=5.0).contains(&value) {
                value
            } else {
                clamped += 1;
                value.clamp(1.0, 5.0)
            };
            cells.insert((u, i), v);
        }
        let mut ratings: Vec<Rating> = cells
            .into_iter()
            .map(|((user, item), value)| Rating { user, item, value })
            .collect();
        ratings.sort_by_key(|r| (r.user, r.item));
        Ok(RatingsTable { ids: Arc::new(ids), ratings, clamped })
    }

    /// A table over the same id space holding a subset of ratings.
    fn with_ratings(&self, ratings: Vec<Rating>) -> RatingsTable {
        RatingsTable { ids: Arc::clone(&self.ids), ratings, clamped: 0 }
    }

    pub fn len(&self) -> usize {
        self.ratings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ratings.is_empty()
    }

    pub fn n_users(&self) -> usize {
        self.ids.users.len()
    }

    pub fn n_items(&self) -> usize {
        self.ids.items.len()
    }

    pub fn ratings(&self) -> &[Rating] {
        &self.ratings
    }

    pub fn user_id(&self, u: u32) -> &str {
        &self.ids.users[u as usize]
    }

    pub fn item_id(&self, i: u32) -> &str {
        &self.ids.items[i as usize]
    }

    pub fn user_index(&self, ext: &str) -> Option<u32> {
        self.ids.user_index.get(ext).copied()
    }

    pub fn item_index(&self, ext: &str) -> Option<u32> {
        self.ids.item_index.get(ext).copied()
    }

    /// How many input values fell outside [1,5] and were clamped at load.
    pub fn clamped_count(&self) -> usize {
        self.clamped
    }

    /// Mean rating; 0 for an empty table (training rejects that case).
    pub fn mean_rating(&self) -> f64 {
        if self.ratings.is_empty() {
            return 0.0;
        }
        self.ratings.iter().map(|r| r.value).sum::<f64>() / self.ratings.len() as f64
    }

    pub(crate) fn ids(&self) -> &Arc<RatingIds> {
        &self.ids
    }
}

/// Parses `user <sep> item <sep> rating` lines; same separators and
/// comment/blank handling as the edge-list format.
pub fn parse_ratings<R: BufRead>(reader: R) -> Result<RatingsTable> {
    let mut rows = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields = split_fields(trimmed);
        if fields.len() != 3 {
            return Err(Error::parse(
                lineno,
                format!("expected `user item rating`, got {} fields", fields.len()),
            ));
        }
        let value: f64 = fields[2].parse().map_err(|_| {
            Error::parse(lineno, format!("invalid rating `{}`", fields[2]))
        })?;
        if !value.is_finite() {
            return Err(Error::parse(lineno, format!("non-finite rating `{}`", fields[2])));
        }
        rows.push((fields[0].to_string(), fields[1].to_string(), value));
    }
    RatingsTable::from_rows(rows)
}

/// Loads a ratings file; see [`parse_ratings`].
pub fn load_ratings<P: AsRef<Path>>(path: P) -> Result<RatingsTable> {
    parse_ratings(BufReader::new(File::open(path)?))
}

/// Random disjoint (train, test) folds covering every rating exactly once
/// across test sets. Fold sizes differ by at most one.
pub fn kfold_split(
    table: &RatingsTable,
    k: usize,
    seed: u64,
) -> Result<Vec<(RatingsTable, RatingsTable)>> {
    if k < 2 {
        return Err(Error::validation(format!("cross-validation needs k >= 2, got {k}")));
    }
    if table.len() < k {
        return Err(Error::validation(format!(
            "cannot split {} ratings into {k} folds",
            table.len()
        )));
    }
    let mut order: Vec<usize> = (0..table.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);

    let base = table.len() / k;
    let rem = table.len() % k;
    let mut fold_of = vec![0usize; table.len()];
    let mut cursor = 0usize;
    for f in 0..k {
        let size = base + usize::from(f < rem);
        for &idx in &order[cursor..cursor + size] {
            fold_of[idx] = f;
        }
        cursor += size;
    }

    let mut folds = Vec::with_capacity(k);
    for f in 0..k {
        let mut train = Vec::with_capacity(table.len() - base);
        let mut test = Vec::with_capacity(base + 1);
        for (idx, &r) in table.ratings().iter().enumerate() {
            if fold_of[idx] == f {
                test.push(r);
            } else {
                train.push(r);
            }
        }
        folds.push((table.with_ratings(train), table.with_ratings(test)));
    }
    Ok(folds)
}

/// Community terms of each table user: the (community id, α_uc) pairs of
/// the trust-graph node carrying the same external id. Users absent from
/// the graph get the empty list and train as plain biased-SVD users.
#[derive(Debug, Clone)]
pub struct UserCommunities {
    terms: Vec<Vec<(u32, f64)>>,
    n_communities: usize,
}

impl UserCommunities {
    pub fn new(
        table: &RatingsTable,
        g: &Graph,
        cover: &Cover,
        alpha: &PropensityMap,
    ) -> Result<Self> {
        if cover.n_nodes() != g.n() || alpha.n_nodes() != g.n() {
            return Err(Error::validation(format!(
                "graph has {} nodes but cover describes {} and propensities {}",
                g.n(),
                cover.n_nodes(),
                alpha.n_nodes()
            )));
        }
        let terms = (0..table.n_users() as u32)
            .map(|u| match g.node_index(table.user_id(u)) {
                Some(v) => alpha.of_node(v).collect(),
                None => Vec::new(),
            })
            .collect();
        Ok(UserCommunities { terms, n_communities: cover.k() })
    }

    /// No community structure at all: every user trains as a plain
    /// biased-SVD user. The ablation baseline.
    pub fn empty(table: &RatingsTable) -> Self {
        UserCommunities {
            terms: vec![Vec::new(); table.n_users()],
            n_communities: 0,
        }
    }

    pub fn terms(&self, u: u32) -> &[(u32, f64)] {
        &self.terms[u as usize]
    }

    pub fn k(&self) -> usize {
        self.n_communities
    }

    pub fn n_users(&self) -> usize {
        self.terms.len()
    }
}
