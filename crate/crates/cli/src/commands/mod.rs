pub mod cv;
pub mod diagnose;
pub mod fit;
pub mod simulate;

use std::str::FromStr;

use gcr_core::data::{load_csv_reader, parse_corr_formula, parse_mean_formula, ClusteredDataset, CorrFormula, MeanFormula};
use gcr_core::exp_family::Family;
use gcr_core::fitter::FitConfig;
use gcr_core::par::Exec;
use serde::{Deserialize, Serialize};

use crate::args::{DataArgs, ModelArgs};
use crate::error::CliError;

/// Where the response and cluster labels live in the CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DataColumns {
    pub cluster: String,
    pub response: String,
    pub order: Option<String>,
}

impl From<&DataArgs> for DataColumns {
    fn from(a: &DataArgs) -> Self {
        DataColumns { cluster: a.cluster.clone(), response: a.response.clone(), order: a.order.clone() }
    }
}

pub fn load_data(bytes: &[u8], cols: &DataColumns) -> Result<ClusteredDataset, CliError> {
    Ok(load_csv_reader(bytes, &cols.cluster, &cols.response, cols.order.as_deref())?)
}

pub struct Model {
    pub family: Family,
    pub mean: MeanFormula,
    pub corr: CorrFormula,
    pub independence: bool,
    pub config: FitConfig,
}

impl Model {
    pub fn from_args(a: &ModelArgs, exec: Exec) -> Result<Model, CliError> {
        let config = FitConfig {
            step_lambda: a.step,
            outer_max: a.max_iter,
            tol_outer: a.tol,
            tol_inner: a.tol,
            backtracking: !a.no_backtracking,
            exec,
            ..FitConfig::default()
        };
        config.validate()?;
        Ok(Model {
            family: Family::from_str(&a.family)?,
            mean: parse_mean_formula(&a.mean)?,
            corr: parse_corr_formula(&a.corr)?,
            independence: a.independence,
            config,
        })
    }

    /// Fit settings once the number of correlation parameters is known.
    pub fn config_for(&self, d: usize) -> FitConfig {
        FitConfig { fixed_alpha: self.independence.then(|| vec![0.0; d]), ..self.config.clone() }
    }
}
