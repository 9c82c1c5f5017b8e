//! Parameter storage for all models.
//!
//! Every table is a flat row-major `Vec<f64>`. Tables a model does not use are
//! left empty, so a `ParamSet` for MF carries no visual projection and so on.
//! The same layout doubles as a gradient buffer and as Adam moment storage.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::config::{Fusion, ModelKind, TrainConfig};
use crate::error::{Error, Result};

/// Names of the parameter tables, in storage and serialization order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Table {
    /// Global offset (one entry).
    Alpha,
    BetaU,
    BetaI,
    GammaU,
    GammaI,
    ThetaU,
    /// Visual projection, `K x D`.
    E,
    /// Per-category style vectors, `n_categories x K`.
    C,
    /// Adversarial feature perturbation, `n_items x D`. Not trainable.
    Delta,
}

impl Table {
    pub const ALL: [Table; 9] = [
        Table::Alpha,
        Table::BetaU,
        Table::BetaI,
        Table::GammaU,
        Table::GammaI,
        Table::ThetaU,
        Table::E,
        Table::C,
        Table::Delta,
    ];

    pub fn trainable(self) -> bool {
        self != Table::Delta
    }

    pub fn name(self) -> &'static str {
        match self {
            Table::Alpha => "alpha",
            Table::BetaU => "beta_u",
            Table::BetaI => "beta_i",
            Table::GammaU => "gamma_u",
            Table::GammaI => "gamma_i",
            Table::ThetaU => "theta_u",
            Table::E => "E",
            Table::C => "c",
            Table::Delta => "delta",
        }
    }

    /// Whether `kind` allocates this table.
    pub fn used_by(self, kind: ModelKind) -> bool {
        use ModelKind::*;
        match self {
            Table::Alpha | Table::BetaU => matches!(kind, Mf | Vbpr | Dvbpr),
            Table::BetaI => matches!(kind, Mf | Vbpr),
            Table::GammaU | Table::GammaI => !matches!(kind, Dvbpr),
            Table::ThetaU => matches!(kind, Vbpr | Dvbpr | CausalRec),
            Table::E => kind.uses_visual(),
            Table::C => matches!(kind, DeepStyle),
            Table::Delta => matches!(kind, Amr),
        }
    }
}

/// Table dimensions shared by parameters, gradients and optimizer state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shape {
    pub n_users: usize,
    pub n_items: usize,
    pub n_categories: usize,
    /// Embedding size `K`.
    pub dim: usize,
    /// Visual feature size `D`.
    pub visual_dim: usize,
}

impl Shape {
    /// `(rows, cols)` of a table when allocated.
    pub fn table_shape(&self, table: Table) -> (usize, usize) {
        match table {
            Table::Alpha => (1, 1),
            Table::BetaU => (self.n_users, 1),
            Table::BetaI => (self.n_items, 1),
            Table::GammaU | Table::ThetaU => (self.n_users, self.dim),
            Table::GammaI => (self.n_items, self.dim),
            Table::E => (self.dim, self.visual_dim),
            Table::C => (self.n_categories, self.dim),
            Table::Delta => (self.n_items, self.visual_dim),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSet {
    pub kind: ModelKind,
    pub fusion: Fusion,
    pub shape: Shape,
    pub alpha: Vec<f64>,
    pub beta_u: Vec<f64>,
    pub beta_i: Vec<f64>,
    pub gamma_u: Vec<f64>,
    pub gamma_i: Vec<f64>,
    pub theta_u: Vec<f64>,
    pub e: Vec<f64>,
    pub c: Vec<f64>,
    pub delta: Vec<f64>,
}

impl ParamSet {
    /// All allocated tables filled with zeros.
    pub fn zeros(kind: ModelKind, fusion: Fusion, shape: Shape) -> Self {
        let alloc = |t: Table| {
            if t.used_by(kind) {
                let (r, c) = shape.table_shape(t);
                vec![0.0; r * c]
            } else {
                Vec::new()
            }
        };
        ParamSet {
            kind,
            fusion,
            shape,
            alpha: alloc(Table::Alpha),
            beta_u: alloc(Table::BetaU),
            beta_i: alloc(Table::BetaI),
            gamma_u: alloc(Table::GammaU),
            gamma_i: alloc(Table::GammaI),
            theta_u: alloc(Table::ThetaU),
            e: alloc(Table::E),
            c: alloc(Table::C),
            delta: alloc(Table::Delta),
        }
    }

    /// A zero-filled set with the same kind and allocation as `self`.
    pub fn zeros_like(&self) -> Self {
        ParamSet::zeros(self.kind, self.fusion, self.shape)
    }

    pub fn table(&self, t: Table) -> &[f64] {
        match t {
            Table::Alpha => &self.alpha,
            Table::BetaU => &self.beta_u,
            Table::BetaI => &self.beta_i,
            Table::GammaU => &self.gamma_u,
            Table::GammaI => &self.gamma_i,
            Table::ThetaU => &self.theta_u,
            Table::E => &self.e,
            Table::C => &self.c,
            Table::Delta => &self.delta,
        }
    }

    pub fn table_mut(&mut self, t: Table) -> &mut Vec<f64> {
        match t {
            Table::Alpha => &mut self.alpha,
            Table::BetaU => &mut self.beta_u,
            Table::BetaI => &mut self.beta_i,
            Table::GammaU => &mut self.gamma_u,
            Table::GammaI => &mut self.gamma_i,
            Table::ThetaU => &mut self.theta_u,
            Table::E => &mut self.e,
            Table::C => &mut self.c,
            Table::Delta => &mut self.delta,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha.first().copied().unwrap_or(0.0)
    }

    pub fn beta_u(&self, u: usize) -> f64 {
        self.beta_u.get(u).copied().unwrap_or(0.0)
    }

    pub fn beta_i(&self, i: usize) -> f64 {
        self.beta_i.get(i).copied().unwrap_or(0.0)
    }

    pub fn gamma_u(&self, u: usize) -> &[f64] {
        row(&self.gamma_u, u, self.shape.dim)
    }

    pub fn gamma_i(&self, i: usize) -> &[f64] {
        row(&self.gamma_i, i, self.shape.dim)
    }

    pub fn theta_u(&self, u: usize) -> &[f64] {
        row(&self.theta_u, u, self.shape.dim)
    }

    pub fn category(&self, cat: usize) -> &[f64] {
        row(&self.c, cat, self.shape.dim)
    }

    pub fn delta(&self, i: usize) -> &[f64] {
        row(&self.delta, i, self.shape.visual_dim)
    }

    pub fn delta_mut(&mut self, i: usize) -> &mut [f64] {
        let d = self.shape.visual_dim;
        &mut self.delta[i * d..(i + 1) * d]
    }

    pub fn all_finite(&self) -> bool {
        Table::ALL
            .iter()
            .all(|&t| self.table(t).iter().all(|x| x.is_finite()))
    }
}

/// Row `index` of a table, or an empty slice for an unallocated table.
fn row(table: &[f64], index: usize, width: usize) -> &[f64] {
    if table.is_empty() {
        return &[];
    }
    &table[index * width..(index + 1) * width]
}

/// Allocates the tables `kind` needs. Biases and the offset start at zero,
/// factors are i.i.d. `N(0, init_std^2)` drawn from a generator seeded with
/// `config.seed`. With a single category the style vector starts at zero; it
/// then never receives a ranking gradient and stays there.
pub fn init_params(
    kind: ModelKind,
    config: &TrainConfig,
    n_users: usize,
    n_items: usize,
    n_categories: usize,
) -> Result<ParamSet> {
    config.validate()?;
    if n_users == 0 || n_items == 0 {
        return Err(Error::Config(format!(
            "cannot initialize parameters for {n_users} users and {n_items} items"
        )));
    }
    let shape = Shape {
        n_users,
        n_items,
        n_categories: n_categories.max(1),
        dim: config.embedding_dim,
        visual_dim: config.visual_dim,
    };
    let mut params = ParamSet::zeros(kind, config.fusion, shape);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let normal = Normal::new(0.0, config.init_std)
        .map_err(|e| Error::Config(format!("init_std: {e}")))?;
    let mut random = [Table::GammaU, Table::GammaI, Table::ThetaU, Table::E].to_vec();
    if shape.n_categories > 1 {
        random.push(Table::C);
    }
    for t in random {
        for x in params.table_mut(t).iter_mut() {
            *x = normal.sample(&mut rng);
        }
    }
    Ok(params)
}

/// Sum of squares over every trainable entry (the adversarial perturbation is
/// excluded).
pub fn param_l2(params: &ParamSet) -> f64 {
    Table::ALL
        .iter()
        .filter(|t| t.trainable())
        .flat_map(|&t| params.table(t).iter())
        .map(|x| x * x)
        .sum()
}
