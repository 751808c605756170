//! Standardized residuals and empirical correlations over pair subgroups.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::corr_manifold::{sym_matrix_function, MatrixFunction, SymMatrix};
use crate::data::{ClusteredDataset, ColumnData, ColumnKind, DesignBundle, Value};
use crate::error::{GcrError, Result};
use crate::fitter::FitResult;
use crate::par::Exec;

/// Default cap on examined candidate pairs.
pub const DEFAULT_MAX_PAIRS: u64 = 5_000_000;

/// `V_i^{-1/2} (y_i - mu_i)` with `V_i = A_i^1/2 R_i A_i^1/2` at the fit.
pub fn standardized_residuals(fit: &FitResult, designs: &DesignBundle) -> Result<Vec<DVector<f64>>> {
    let mu = fit.fitted_means(designs)?;
    let cov = fit.fitted_covariances(designs)?;
    designs
        .clusters
        .iter()
        .zip(mu.iter().zip(cov))
        .map(|(c, (m, v))| {
            let w = sym_matrix_function(&SymMatrix::new(v)?, MatrixFunction::InvSqrt)?;
            Ok(w.as_matrix() * (&c.y - m))
        })
        .collect()
}

/// Which pairs of observations are candidates before column conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PairScope {
    Within,
    Between,
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PairCondition {
    Same { column: String },
    BothEq { column: String, value: String },
    AbsDiffEq { column: String, diff: f64 },
}

impl fmt::Display for PairCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PairCondition::Same { column } => write!(f, "same({column})"),
            PairCondition::BothEq { column, value } => write!(f, "botheq({column},{value})"),
            PairCondition::AbsDiffEq { column, diff } => write!(f, "absdiff_eq({column},{diff})"),
        }
    }
}

/// A pair subgroup such as `within:same(mom)&botheq(indig,2)` or `between`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubgroupSpec {
    pub name: String,
    pub scope: PairScope,
    pub conditions: Vec<PairCondition>,
}

fn parse_condition(text: &str) -> Result<PairCondition> {
    let bad = |msg: &str| GcrError::Diagnostic(format!("subgroup condition '{text}': {msg}"));
    let open = text.find('(').ok_or_else(|| bad("expected name(arguments)"))?;
    if !text.ends_with(')') {
        return Err(bad("missing closing parenthesis"));
    }
    let name = text[..open].trim();
    let args: Vec<&str> = text[open + 1..text.len() - 1].split(',').map(str::trim).collect();
    if args.iter().any(|a| a.is_empty()) {
        return Err(bad("empty argument"));
    }
    match (name, args.as_slice()) {
        ("same", [c]) => Ok(PairCondition::Same { column: c.to_string() }),
        ("botheq", [c, v]) => Ok(PairCondition::BothEq { column: c.to_string(), value: v.to_string() }),
        ("absdiff_eq", [c, k]) => {
            let diff: f64 = k.parse().map_err(|_| bad("difference must be numeric"))?;
            Ok(PairCondition::AbsDiffEq { column: c.to_string(), diff })
        }
        ("same" | "botheq" | "absdiff_eq", _) => Err(bad("wrong number of arguments")),
        _ => Err(bad("unknown condition; expected same, botheq or absdiff_eq")),
    }
}

impl FromStr for SubgroupSpec {
    type Err = GcrError;

    fn from_str(s: &str) -> Result<Self> {
        let text = s.trim();
        let (scope_text, rest) = match text.split_once(':') {
            Some((a, b)) => (a.trim(), Some(b)),
            None if text.contains('(') => ("all", Some(text)),
            None => (text, None),
        };
        let scope = match scope_text {
            "within" => PairScope::Within,
            "between" => PairScope::Between,
            "all" => PairScope::All,
            other => {
                return Err(GcrError::Diagnostic(format!(
                    "unknown subgroup scope '{other}'; expected within, between or all"
                )))
            }
        };
        let conditions = match rest {
            Some(r) => r.split('&').map(|c| parse_condition(c.trim())).collect::<Result<_>>()?,
            None => Vec::new(),
        };
        Ok(SubgroupSpec { name: text.to_string(), scope, conditions })
    }
}

enum Resolved {
    Same(usize),
    BothEqNum(usize, f64),
    BothEqStr(usize, String),
    AbsDiffEq(usize, f64),
}

fn resolve(spec: &SubgroupSpec, data: &ClusteredDataset) -> Result<Vec<Resolved>> {
    spec.conditions
        .iter()
        .map(|c| {
            let column = match c {
                PairCondition::Same { column }
                | PairCondition::BothEq { column, .. }
                | PairCondition::AbsDiffEq { column, .. } => column,
            };
            let idx = data.column_index(column).ok_or_else(|| {
                GcrError::Diagnostic(format!("subgroup '{}' uses unknown column '{column}'", spec.name))
            })?;
            let kind = data.column_kind(idx);
            Ok(match c {
                PairCondition::Same { .. } => Resolved::Same(idx),
                PairCondition::BothEq { value, .. } => match kind {
                    ColumnKind::Numeric => Resolved::BothEqNum(
                        idx,
                        value.parse().map_err(|_| {
                            GcrError::Diagnostic(format!("column '{column}' is numeric but value '{value}' is not"))
                        })?,
                    ),
                    ColumnKind::Categorical => Resolved::BothEqStr(idx, value.clone()),
                },
                PairCondition::AbsDiffEq { diff, .. } => {
                    if kind != ColumnKind::Numeric {
                        return Err(GcrError::Diagnostic(format!(
                            "absdiff_eq needs a numeric column, '{column}' is categorical"
                        )));
                    }
                    Resolved::AbsDiffEq(idx, *diff)
                }
            })
        })
        .collect()
}

/// One observation: cluster index and position within the cluster.
type Obs = (usize, usize);

fn pair_matches(data: &ClusteredDataset, conds: &[Resolved], a: Obs, b: Obs) -> bool {
    let cl = data.clusters();
    let val = |o: Obs, col: usize| cl[o.0].columns[col].value(o.1);
    conds.iter().all(|c| match c {
        Resolved::Same(col) => {
            let (x, y) = (val(a, *col), val(b, *col));
            !x.is_missing() && !y.is_missing() && x == y
        }
        Resolved::BothEqNum(col, v) => {
            val(a, *col) == Value::Num(*v) && val(b, *col) == Value::Num(*v)
        }
        Resolved::BothEqStr(col, v) => {
            val(a, *col) == Value::Str(v) && val(b, *col) == Value::Str(v)
        }
        Resolved::AbsDiffEq(col, d) => match (&cl[a.0].columns[*col], &cl[b.0].columns[*col]) {
            (ColumnData::Numeric(x), ColumnData::Numeric(y)) => {
                ((x[a.1] - y[b.1]).abs() - d).abs() <= 1e-9 * d.abs().max(1.0)
            }
            _ => false,
        },
    })
}

/// Running count, mean and sum of squared deviations, merged in order.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn merge(self, other: Moments) -> Moments {
        if other.n == 0 {
            return self;
        }
        if self.n == 0 {
            return other;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        Moments {
            n,
            mean: self.mean + delta * other.n as f64 / n as f64,
            m2: self.m2 + other.m2 + delta * delta * (self.n as f64 * other.n as f64) / n as f64,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct DiagnosticsConfig {
    /// Above this many candidate pairs a uniform sample of this size is used.
    pub max_pairs: u64,
    pub seed: u64,
    pub exec: Exec,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        DiagnosticsConfig { max_pairs: DEFAULT_MAX_PAIRS, seed: 0, exec: Exec::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubgroupCorrelation {
    pub name: String,
    pub rho_hat: f64,
    pub n_pairs: u64,
    /// Missing when fewer than two pairs qualify.
    pub t_stat: Option<f64>,
    pub p_value: Option<f64>,
    /// Candidate pairs examined.
    pub candidates: u64,
    /// Whether candidates were subsampled because of the cap.
    pub subsampled: bool,
}

fn candidate_count(sizes: &[usize], scope: PairScope) -> u64 {
    let n: u64 = sizes.iter().map(|&m| m as u64).sum();
    let within: u64 = sizes.iter().map(|&m| (m as u64) * (m as u64).saturating_sub(1) / 2).sum();
    let all = n * n.saturating_sub(1) / 2;
    match scope {
        PairScope::Within => within,
        PairScope::Between => all - within,
        PairScope::All => all,
    }
}

/// Mean of residual products over the pairs in `spec`, with a one-sample
/// t-test of the products against zero.
pub fn subgroup_empirical_corr(
    residuals: &[DVector<f64>],
    data: &ClusteredDataset,
    spec: &SubgroupSpec,
    config: &DiagnosticsConfig,
) -> Result<SubgroupCorrelation> {
    let clusters = data.clusters();
    if residuals.len() != clusters.len()
        || residuals.iter().zip(clusters).any(|(r, c)| r.len() != c.size())
    {
        return Err(GcrError::Validation("residuals do not match the dataset layout".into()));
    }
    let conds = resolve(spec, data)?;
    let sizes: Vec<usize> = clusters.iter().map(|c| c.size()).collect();
    let candidates = candidate_count(&sizes, spec.scope);
    let product = |a: Obs, b: Obs| residuals[a.0][a.1] * residuals[b.0][b.1];

    let (moments, examined, subsampled) = if candidates <= config.max_pairs {
        let per_cluster = config.exec.map_indexed(clusters.len(), |i| {
            let mut mo = Moments::default();
            for j in 0..sizes[i] {
                if spec.scope != PairScope::Between {
                    for k in j + 1..sizes[i] {
                        if pair_matches(data, &conds, (i, j), (i, k)) {
                            mo.push(product((i, j), (i, k)));
                        }
                    }
                }
                if spec.scope != PairScope::Within {
                    for (t, &mt) in sizes.iter().enumerate().skip(i + 1) {
                        for s in 0..mt {
                            if pair_matches(data, &conds, (i, j), (t, s)) {
                                mo.push(product((i, j), (t, s)));
                            }
                        }
                    }
                }
            }
            mo
        });
        let total = per_cluster.into_iter().fold(Moments::default(), Moments::merge);
        (total, candidates, false)
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let offsets: Vec<usize> = sizes
            .iter()
            .scan(0, |acc, &m| {
                let o = *acc;
                *acc += m;
                Some(o)
            })
            .collect();
        let n_obs: usize = sizes.iter().sum();
        let locate = |g: usize| {
            let i = offsets.partition_point(|&o| o <= g) - 1;
            (i, g - offsets[i])
        };
        let within_cum: Vec<u64> = sizes
            .iter()
            .scan(0u64, |acc, &m| {
                *acc += (m as u64) * (m as u64).saturating_sub(1) / 2;
                Some(*acc)
            })
            .collect();
        let mut mo = Moments::default();
        for _ in 0..config.max_pairs {
            let (a, b) = match spec.scope {
                PairScope::Within => {
                    let r = rng.random_range(0..candidates);
                    let i = within_cum.partition_point(|&c| c <= r);
                    let m = sizes[i];
                    loop {
                        let j = rng.random_range(0..m);
                        let k = rng.random_range(0..m);
                        if j != k {
                            break ((i, j.min(k)), (i, j.max(k)));
                        }
                    }
                }
                scope => loop {
                    let a = locate(rng.random_range(0..n_obs));
                    let b = locate(rng.random_range(0..n_obs));
                    if a != b && (scope == PairScope::All || a.0 != b.0) {
                        break (a, b);
                    }
                },
            };
            if pair_matches(data, &conds, a, b) {
                mo.push(product(a, b));
            }
        }
        (mo, config.max_pairs, true)
    };

    if moments.n == 0 {
        return Err(GcrError::Diagnostic(format!("subgroup '{}' contains no pairs", spec.name)));
    }
    let (t_stat, p_value) = if moments.n < 2 {
        (None, None)
    } else {
        let var = moments.m2 / (moments.n - 1) as f64;
        if var <= 0.0 {
            // Constant products: no evidence against zero unless the constant is nonzero.
            if moments.mean == 0.0 {
                (Some(0.0), Some(1.0))
            } else {
                (Some(moments.mean.signum() * f64::INFINITY), Some(0.0))
            }
        } else {
            let t = moments.mean / (var / moments.n as f64).sqrt();
            let dist = StudentsT::new(0.0, 1.0, (moments.n - 1) as f64)
                .map_err(|e| GcrError::Diagnostic(e.to_string()))?;
            (Some(t), Some((2.0 * dist.sf(t.abs())).min(1.0)))
        }
    };
    Ok(SubgroupCorrelation {
        name: spec.name.clone(),
        rho_hat: moments.mean,
        n_pairs: moments.n,
        t_stat,
        p_value,
        candidates: examined,
        subsampled,
    })
}
