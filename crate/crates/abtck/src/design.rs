//! Multifidelity datasets, rectangular domains, space-filling designs, and
//! the nested augmentation.
//!
//! The augmentation is the construction that makes co-kriging work on
//! non-nested designs: starting from the top fidelity level and walking
//! down, each level's design is enlarged to
//!
//! ```text
//! Xtilde_S = X_S,   Xtilde_t = X_t  u  Xring_t,   Xring_t = Xtilde_{t+1} \ X_t
//! ```
//!
//! so that `Xtilde_{t+1} subseteq Xtilde_t` holds at every level. Outputs at
//! the added points `Xring_t` are unknown; they are carried as mutable
//! "missing" entries of the complete output vector and resampled by the
//! Gibbs sampler. Points own their imputations: the bookkeeping here is
//! tree-independent, and per-leaf views are produced by restricting to leaf
//! regions.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::treepart::PartitionTree;

/// Exact-equality key for a design point, used for the set algebra of the
/// augmentation. Coordinates are compared bit for bit.
fn point_key(row: &[f64]) -> Vec<u64> {
    row.iter().map(|v| v.to_bits()).collect()
}

/// Rectangular input domain: a closed box `[l_1, u_1] x ... x [l_m, u_m]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    bounds: Vec<(f64, f64)>,
}

impl Domain {
    pub fn new(bounds: Vec<(f64, f64)>) -> Result<Self> {
        if bounds.is_empty() {
            return Err(Error::Domain("domain must have at least one dimension".into()));
        }
        for (j, &(l, u)) in bounds.iter().enumerate() {
            if !(l.is_finite() && u.is_finite() && l < u) {
                return Err(Error::Domain(format!(
                    "dimension {j}: bounds [{l}, {u}] must be finite with l < u"
                )));
            }
        }
        Ok(Domain { bounds })
    }

    /// The unit cube `[0,1]^m`.
    pub fn unit(m: usize) -> Self {
        Domain::new(vec![(0.0, 1.0); m]).expect("unit cube is valid")
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn lower(&self, j: usize) -> f64 {
        self.bounds[j].0
    }

    pub fn upper(&self, j: usize) -> f64 {
        self.bounds[j].1
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(&self.bounds)
                .all(|(v, &(l, u))| *v >= l && *v <= u)
    }
}

/// Affine map taking a domain onto `[-1,1]^m`; recorded so that fitted
/// models can accept and emit raw coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rescaler {
    original: Domain,
}

impl Rescaler {
    pub fn new(original: Domain) -> Self {
        Rescaler { original }
    }

    pub fn original_domain(&self) -> &Domain {
        &self.original
    }

    pub fn scaled_domain(&self) -> Domain {
        Domain::new(vec![(-1.0, 1.0); self.original.dim()]).expect("valid")
    }

    /// Raw coordinates -> `[-1,1]^m`.
    pub fn forward(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = x.clone();
        for j in 0..self.original.dim() {
            let (l, u) = self.original.bounds[j];
            for i in 0..out.nrows() {
                out[(i, j)] = 2.0 * (x[(i, j)] - l) / (u - l) - 1.0;
            }
        }
        out
    }

    /// `[-1,1]^m` -> raw coordinates.
    pub fn inverse(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = x.clone();
        for j in 0..self.original.dim() {
            let (l, u) = self.original.bounds[j];
            for i in 0..out.nrows() {
                out[(i, j)] = l + (x[(i, j)] + 1.0) * (u - l) / 2.0;
            }
        }
        out
    }
}

/// One fidelity level: an `n_t x m` design and the `n_t` observed outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct FidelityLevel {
    pub design: DMatrix<f64>,
    pub outputs: DVector<f64>,
}

/// Designs and outputs for all fidelity levels, ordered by ascending
/// fidelity (level `0` cheapest, level `S-1` most accurate).
#[derive(Debug, Clone)]
pub struct FidelityDataset {
    levels: Vec<FidelityLevel>,
    domain: Domain,
}

impl FidelityDataset {
    pub fn new(levels: Vec<FidelityLevel>, domain: Domain) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::Config("dataset needs at least one fidelity level".into()));
        }
        for (t, level) in levels.iter().enumerate() {
            if level.design.ncols() != domain.dim() {
                return Err(Error::Config(format!(
                    "level {t}: design has {} columns, domain has {} dimensions",
                    level.design.ncols(),
                    domain.dim()
                )));
            }
            if level.design.nrows() != level.outputs.len() {
                return Err(Error::Config(format!(
                    "level {t}: {} design rows but {} outputs",
                    level.design.nrows(),
                    level.outputs.len()
                )));
            }
            let mut seen = HashMap::new();
            for i in 0..level.design.nrows() {
                let row: Vec<f64> = level.design.row(i).iter().copied().collect();
                if !domain.contains(&row) {
                    return Err(Error::Domain(format!(
                        "level {t}, row {i}: point lies outside the domain"
                    )));
                }
                if !level.outputs[i].is_finite() {
                    return Err(Error::Config(format!(
                        "level {t}, row {i}: non-finite output"
                    )));
                }
                if let Some(prev) = seen.insert(point_key(&row), i) {
                    return Err(Error::Config(format!(
                        "level {t}: rows {prev} and {i} are duplicated input points"
                    )));
                }
            }
        }
        Ok(FidelityDataset { levels, domain })
    }

    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn level(&self, t: usize) -> &FidelityLevel {
        &self.levels[t]
    }

    pub fn levels(&self) -> &[FidelityLevel] {
        &self.levels
    }

    /// Rescale all designs onto `[-1,1]^m`, returning the rescaled dataset
    /// and the map needed to invert coordinates later.
    pub fn rescaled(&self) -> (FidelityDataset, Rescaler) {
        let rescaler = Rescaler::new(self.domain.clone());
        let levels = self
            .levels
            .iter()
            .map(|lv| FidelityLevel {
                design: rescaler.forward(&lv.design),
                outputs: lv.outputs.clone(),
            })
            .collect();
        (
            FidelityDataset {
                levels,
                domain: rescaler.scaled_domain(),
            },
            rescaler,
        )
    }

    /// Read one CSV file per fidelity level (header `x1,...,xm,y`), cheapest
    /// level first. Rows with non-finite values are rejected. When
    /// `dedup_tol` is set, points within that distance of an earlier point
    /// in the same file are dropped.
    pub fn from_csv_files<P: AsRef<std::path::Path>>(
        paths: &[P],
        domain: Domain,
        dedup_tol: Option<f64>,
    ) -> Result<Self> {
        let m = domain.dim();
        let mut levels = Vec::with_capacity(paths.len());
        for path in paths {
            let path = path.as_ref();
            let mut reader = csv::Reader::from_path(path).map_err(|e| {
                Error::Config(format!("cannot open data file {}: {e}", path.display()))
            })?;
            let headers = reader.headers()?.clone();
            if headers.len() != m + 1 {
                return Err(Error::Config(format!(
                    "{}: expected {} columns (x1..x{m},y), found {}",
                    path.display(),
                    m + 1,
                    headers.len()
                )));
            }
            let mut rows: Vec<Vec<f64>> = Vec::new();
            let mut ys: Vec<f64> = Vec::new();
            for (i, record) in reader.records().enumerate() {
                let record = record?;
                let vals: Vec<f64> = record
                    .iter()
                    .map(|s| s.trim().parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| {
                        Error::Config(format!("{}: row {}: {e}", path.display(), i + 1))
                    })?;
                if vals.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Config(format!(
                        "{}: row {} contains a non-finite value",
                        path.display(),
                        i + 1
                    )));
                }
                let (x, y) = vals.split_at(m);
                if let Some(tol) = dedup_tol {
                    let dup = rows.iter().any(|r| {
                        r.iter()
                            .zip(x)
                            .map(|(a, b)| (a - b) * (a - b))
                            .sum::<f64>()
                            .sqrt()
                            <= tol
                    });
                    if dup {
                        continue;
                    }
                }
                rows.push(x.to_vec());
                ys.push(y[0]);
            }
            if rows.is_empty() {
                return Err(Error::Config(format!("{}: no data rows", path.display())));
            }
            let design = DMatrix::from_fn(rows.len(), m, |i, j| rows[i][j]);
            levels.push(FidelityLevel {
                design,
                outputs: DVector::from_vec(ys),
            });
        }
        FidelityDataset::new(levels, domain)
    }
}

/// Latin hypercube: `n` points, one per equal-width stratum in every
/// dimension, uniformly jittered within the stratum. Deterministic given
/// the seed.
pub fn lhs_sample(n: usize, domain: &Domain, seed: u64) -> Result<DMatrix<f64>> {
    if n == 0 {
        return Err(Error::Config("LHS sample size must be at least 1".into()));
    }
    let m = domain.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = DMatrix::zeros(n, m);
    for j in 0..m {
        let (l, u) = (domain.lower(j), domain.upper(j));
        let mut strata: Vec<usize> = (0..n).collect();
        strata.shuffle(&mut rng);
        for i in 0..n {
            let v: f64 = rng.random();
            out[(i, j)] = l + (strata[i] as f64 + v) / n as f64 * (u - l);
        }
    }
    Ok(out)
}

/// One level of the augmented (hierarchically nested) design.
#[derive(Debug, Clone)]
pub struct AugLevel {
    /// Complete design `Xtilde_t`, observed rows first.
    pub points: DMatrix<f64>,
    /// `true` for rows coming from the observed design `X_t`.
    pub observed: Vec<bool>,
    /// Complete output vector; missing entries hold the current imputation.
    pub values: DVector<f64>,
    /// For level `t >= 1`: row `i` of `Xtilde_t` equals row
    /// `row_in_prev[i]` of `Xtilde_{t-1}`.
    pub row_in_prev: Vec<usize>,
}

impl AugLevel {
    pub fn n_points(&self) -> usize {
        self.points.nrows()
    }

    pub fn n_missing(&self) -> usize {
        self.observed.iter().filter(|o| !**o).count()
    }

    pub fn missing_rows(&self) -> Vec<usize> {
        (0..self.n_points()).filter(|&i| !self.observed[i]).collect()
    }
}

/// The augmented design for all levels. Global (tree-independent): per-leaf
/// views restrict rows to leaf regions.
#[derive(Debug, Clone)]
pub struct AugmentedDesign {
    levels: Vec<AugLevel>,
}

impl AugmentedDesign {
    /// Run the nesting recursion top-down and initialize missing outputs.
    ///
    /// Missing values start from the nearest observed output of the same
    /// level, falling back to the adjacent upper level's value at the same
    /// point when the level has no observations.
    pub fn build(data: &FidelityDataset) -> Self {
        let s = data.n_levels();
        let m = data.dim();
        let mut levels: Vec<AugLevel> = Vec::with_capacity(s);

        // Top level is its own complete design.
        let top = data.level(s - 1);
        levels.push(AugLevel {
            points: top.design.clone(),
            observed: vec![true; top.design.nrows()],
            values: top.outputs.clone(),
            row_in_prev: Vec::new(),
        });

        for t in (0..s - 1).rev() {
            let obs = data.level(t);
            let upper = levels.last().expect("upper level built");
            let mut obs_index: HashMap<Vec<u64>, usize> = HashMap::new();
            for i in 0..obs.design.nrows() {
                let row: Vec<f64> = obs.design.row(i).iter().copied().collect();
                obs_index.insert(point_key(&row), i);
            }
            // Missing rows: points of Xtilde_{t+1} not observed at level t,
            // kept in upper-level order.
            let mut missing_pts: Vec<(Vec<f64>, f64)> = Vec::new();
            for i in 0..upper.points.nrows() {
                let row: Vec<f64> = upper.points.row(i).iter().copied().collect();
                if !obs_index.contains_key(&point_key(&row)) {
                    missing_pts.push((row, upper.values[i]));
                }
            }
            let n_obs = obs.design.nrows();
            let n_tot = n_obs + missing_pts.len();
            let mut points = DMatrix::zeros(n_tot, m);
            let mut values = DVector::zeros(n_tot);
            let mut observed = vec![false; n_tot];
            for i in 0..n_obs {
                points.set_row(i, &obs.design.row(i));
                values[i] = obs.outputs[i];
                observed[i] = true;
            }
            for (k, (row, upper_val)) in missing_pts.iter().enumerate() {
                let i = n_obs + k;
                for j in 0..m {
                    points[(i, j)] = row[j];
                }
                // Nearest observed neighbour at this level, else the upper
                // level's (possibly imputed) value at the same point.
                values[i] = if n_obs > 0 {
                    let mut best = (f64::INFINITY, 0usize);
                    for r in 0..n_obs {
                        let d: f64 = (0..m)
                            .map(|j| (obs.design[(r, j)] - row[j]).powi(2))
                            .sum();
                        if d < best.0 {
                            best = (d, r);
                        }
                    }
                    obs.outputs[best.1]
                } else {
                    *upper_val
                };
            }
            levels.push(AugLevel {
                points,
                observed,
                values,
                row_in_prev: Vec::new(),
            });
        }
        levels.reverse();

        // Nesting maps: every row of level t appears in level t-1.
        for t in 1..s {
            let mut prev_index: HashMap<Vec<u64>, usize> = HashMap::new();
            for i in 0..levels[t - 1].points.nrows() {
                let row: Vec<f64> = levels[t - 1].points.row(i).iter().copied().collect();
                prev_index.insert(point_key(&row), i);
            }
            let map: Vec<usize> = (0..levels[t].points.nrows())
                .map(|i| {
                    let row: Vec<f64> = levels[t].points.row(i).iter().copied().collect();
                    *prev_index
                        .get(&point_key(&row))
                        .expect("nesting invariant: upper-level point present below")
                })
                .collect();
            levels[t].row_in_prev = map;
        }

        AugmentedDesign { levels }
    }

    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn level(&self, t: usize) -> &AugLevel {
        &self.levels[t]
    }

    pub fn level_mut(&mut self, t: usize) -> &mut AugLevel {
        &mut self.levels[t]
    }

    pub fn levels(&self) -> &[AugLevel] {
        &self.levels
    }

    /// Total number of missing (imputed) outputs across levels.
    pub fn n_missing(&self) -> usize {
        self.levels.iter().map(|l| l.n_missing()).sum()
    }

    /// Values of level `t-1` gathered at the rows of level `t`'s complete
    /// design (defined because the augmented designs are nested).
    pub fn prev_values_at(&self, t: usize, rows: &[usize]) -> DVector<f64> {
        assert!(t >= 1, "level 0 has no lower level");
        let prev = &self.levels[t - 1];
        DVector::from_iterator(
            rows.len(),
            rows.iter().map(|&i| prev.values[self.levels[t].row_in_prev[i]]),
        )
    }
}

/// Assign each row of `points` to the leaf of `partition` containing it.
/// Returns per-leaf row-index lists; boundaries follow the half-open
/// convention of the tree.
pub fn assign_to_leaves(
    points: &DMatrix<f64>,
    partition: &PartitionTree,
) -> Result<Vec<Vec<usize>>> {
    let mut lists = vec![Vec::new(); partition.n_leaves()];
    for i in 0..points.nrows() {
        let row: Vec<f64> = points.row(i).iter().copied().collect();
        let leaf = partition.leaf_of(&row)?;
        lists[leaf].push(i);
    }
    Ok(lists)
}

/// Per-leaf, per-level view of the augmentation: row indices into the
/// global complete designs, split into observed and missing.
#[derive(Debug, Clone)]
pub struct LeafAugmentation {
    /// `rows[k][t]` = rows of `Xtilde_t` lying in leaf `k`.
    pub rows: Vec<Vec<Vec<usize>>>,
    /// `observed_rows[k][t]` / `missing_rows[k][t]` partition `rows[k][t]`.
    pub observed_rows: Vec<Vec<Vec<usize>>>,
    pub missing_rows: Vec<Vec<Vec<usize>>>,
}

/// Construct the per-leaf augmentation bookkeeping for a given tree.
pub fn build_augmentation(
    aug: &AugmentedDesign,
    partition: &PartitionTree,
) -> Result<LeafAugmentation> {
    let s = aug.n_levels();
    let k = partition.n_leaves();
    let mut rows = vec![vec![Vec::new(); s]; k];
    let mut observed_rows = vec![vec![Vec::new(); s]; k];
    let mut missing_rows = vec![vec![Vec::new(); s]; k];
    for t in 0..s {
        let lists = assign_to_leaves(&aug.level(t).points, partition)?;
        for (leaf, list) in lists.into_iter().enumerate() {
            for i in list {
                rows[leaf][t].push(i);
                if aug.level(t).observed[i] {
                    observed_rows[leaf][t].push(i);
                } else {
                    missing_rows[leaf][t].push(i);
                }
            }
        }
    }
    Ok(LeafAugmentation {
        rows,
        observed_rows,
        missing_rows,
    })
}

/// Gather a submatrix of rows.
pub fn gather_rows(mat: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(rows.len(), mat.ncols());
    for (i, &r) in rows.iter().enumerate() {
        out.set_row(i, &mat.row(r));
    }
    out
}

/// Gather entries of a vector.
pub fn gather(v: &DVector<f64>, rows: &[usize]) -> DVector<f64> {
    DVector::from_iterator(rows.len(), rows.iter().map(|&r| v[r]))
}
