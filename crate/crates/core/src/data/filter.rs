use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{Dataset, FeatureStore, RawInteractions};
use crate::config::ItemIndex;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterMode {
    /// Repeat until every remaining user and item has `min_count` interactions.
    #[default]
    Fixpoint,
    /// One simultaneous removal pass over the deduplicated degrees.
    SinglePass,
}

/// Drops items without features, collapses duplicate `(user, item)` pairs to
/// their earliest timestamp, then removes users and items with fewer than
/// `min_count` interactions. Survivors are re-indexed densely in order of
/// first appearance.
pub fn kcore_filter(
    raw: &RawInteractions,
    store: &FeatureStore,
    min_count: usize,
    mode: FilterMode,
) -> Result<Dataset> {
    let mut user_ids: HashMap<&str, usize> = HashMap::new();
    let mut item_ids: HashMap<&str, usize> = HashMap::new();
    let mut user_tokens: Vec<&str> = Vec::new();
    let mut item_tokens: Vec<&str> = Vec::new();
    let mut edge_of: HashMap<(usize, usize), usize> = HashMap::new();
    let mut edges: Vec<(usize, usize, Option<i64>)> = Vec::new();

    for r in &raw.records {
        if !store.contains(&r.item) {
            continue;
        }
        let u = *user_ids.entry(&r.user).or_insert_with(|| {
            user_tokens.push(&r.user);
            user_tokens.len() - 1
        });
        let i = *item_ids.entry(&r.item).or_insert_with(|| {
            item_tokens.push(&r.item);
            item_tokens.len() - 1
        });
        match edge_of.get(&(u, i)) {
            Some(&e) => edges[e].2 = earliest(edges[e].2, r.timestamp),
            None => {
                edge_of.insert((u, i), edges.len());
                edges.push((u, i, r.timestamp));
            }
        }
    }

    let (n_u, n_i) = (user_tokens.len(), item_tokens.len());
    let mut user_adj: Vec<Vec<usize>> = vec![Vec::new(); n_u];
    let mut item_adj: Vec<Vec<usize>> = vec![Vec::new(); n_i];
    for (e, &(u, i, _)) in edges.iter().enumerate() {
        user_adj[u].push(e);
        item_adj[i].push(e);
    }
    let mut user_deg: Vec<usize> = user_adj.iter().map(Vec::len).collect();
    let mut item_deg: Vec<usize> = item_adj.iter().map(Vec::len).collect();
    let mut user_alive = vec![true; n_u];
    let mut item_alive = vec![true; n_i];
    let mut edge_alive = vec![true; edges.len()];

    match mode {
        FilterMode::SinglePass => {
            for u in 0..n_u {
                user_alive[u] = user_deg[u] >= min_count;
            }
            for i in 0..n_i {
                item_alive[i] = item_deg[i] >= min_count;
            }
            for (e, &(u, i, _)) in edges.iter().enumerate() {
                edge_alive[e] = user_alive[u] && item_alive[i];
            }
        }
        FilterMode::Fixpoint => {
            // Peeling: removing a node only lowers neighbour degrees, so a
            // work queue reaches the same fixpoint as repeated full scans.
            #[derive(Clone, Copy)]
            enum Node {
                User(usize),
                Item(usize),
            }
            let mut queue: Vec<Node> = Vec::new();
            for u in (0..n_u).filter(|&u| user_deg[u] < min_count) {
                user_alive[u] = false;
                queue.push(Node::User(u));
            }
            for i in (0..n_i).filter(|&i| item_deg[i] < min_count) {
                item_alive[i] = false;
                queue.push(Node::Item(i));
            }
            while let Some(node) = queue.pop() {
                let adj = match node {
                    Node::User(u) => &user_adj[u],
                    Node::Item(i) => &item_adj[i],
                };
                for &e in adj {
                    if !edge_alive[e] {
                        continue;
                    }
                    edge_alive[e] = false;
                    let (u, i, _) = edges[e];
                    user_deg[u] -= 1;
                    item_deg[i] -= 1;
                    if user_alive[u] && user_deg[u] < min_count {
                        user_alive[u] = false;
                        queue.push(Node::User(u));
                    }
                    if item_alive[i] && item_deg[i] < min_count {
                        item_alive[i] = false;
                        queue.push(Node::Item(i));
                    }
                }
            }
        }
    }

    let mut new_user = vec![usize::MAX; n_u];
    let mut new_item = vec![usize::MAX; n_i];
    let mut users: Vec<String> = Vec::new();
    let mut items: Vec<String> = Vec::new();
    let mut positives: Vec<Vec<(ItemIndex, Option<i64>)>> = Vec::new();
    for (e, &(u, i, ts)) in edges.iter().enumerate() {
        if !edge_alive[e] {
            continue;
        }
        if new_user[u] == usize::MAX {
            new_user[u] = users.len();
            users.push(user_tokens[u].to_string());
            positives.push(Vec::new());
        }
        if new_item[i] == usize::MAX {
            new_item[i] = items.len();
            items.push(item_tokens[i].to_string());
        }
        positives[new_user[u]].push((ItemIndex(new_item[i]), ts));
    }
    if users.is_empty() {
        return Err(Error::TooSparse(format!(
            "no interactions survive filtering at min_count={min_count} ({} raw records)",
            raw.len()
        )));
    }
    Dataset::new(positives, users, items)
}

fn earliest(a: Option<i64>, b: Option<i64>) -> Option<i64> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.min(y)),
        (x, None) => x,
        (None, y) => y,
    }
}
