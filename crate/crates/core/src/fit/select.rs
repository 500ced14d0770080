//! Model selection over copula × censoring-family combinations by
//! weighted log-likelihood.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{maximize, resolve_weights, FirstStageInfo, FitOptions, FitResult};
use crate::copula::CopulaFamily;
use crate::data::Dataset;
use crate::error::Result;
use crate::margins::CensoringFamily;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub copula: CopulaFamily,
    pub censoring: CensoringFamily,
    /// 1-based rank among successful fits; `None` for failures.
    pub rank: Option<usize>,
    pub loglik: Option<f64>,
    pub fit: Option<FitResult>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    /// Successful fits by descending log-likelihood, then failures.
    pub candidates: Vec<Candidate>,
    pub first_stage: Option<FirstStageInfo>,
}

impl Selection {
    pub fn best(&self) -> Option<&Candidate> {
        self.candidates.first().filter(|c| c.fit.is_some())
    }

    pub fn rank_of(&self, copula: CopulaFamily, censoring: CensoringFamily) -> Option<usize> {
        self.candidates
            .iter()
            .find(|c| c.copula == copula && c.censoring == censoring)
            .and_then(|c| c.rank)
    }
}

/// The 7 parametric copulas × 3 censoring families.
pub fn default_combinations() -> Vec<(CopulaFamily, CensoringFamily)> {
    CopulaFamily::PARAMETRIC
        .iter()
        .flat_map(|&c| CensoringFamily::ALL.iter().map(move |&f| (c, f)))
        .collect()
}

/// Fits every combination with shared first-stage weights and ranks them by
/// weighted log-likelihood. All combinations have the same number of
/// parameters, so the raw log-likelihood is the criterion. `options.copula`
/// and `options.censoring` are ignored.
pub fn select_model(
    data: &Dataset,
    options: &FitOptions,
    combinations: Option<&[(CopulaFamily, CensoringFamily)]>,
) -> Result<Selection> {
    let combos = combinations.map(<[_]>::to_vec).unwrap_or_else(default_combinations);
    let (weights, first_stage) = resolve_weights(data, &options.weights)?;
    let mut candidates: Vec<Candidate> = combos
        .par_iter()
        .map(|&(copula, censoring)| {
            match maximize(data, &weights, &options.optimizer, copula, censoring, options.tau_bar) {
                Ok(mut f) => {
                    f.first_stage = first_stage;
                    Candidate {
                        copula,
                        censoring,
                        rank: None,
                        loglik: Some(f.loglik),
                        fit: Some(f),
                        error: None,
                    }
                }
                Err(e) => {
                    log::warn!("{copula}-{censoring} failed: {e}");
                    Candidate {
                        copula,
                        censoring,
                        rank: None,
                        loglik: None,
                        fit: None,
                        error: Some(e.to_string()),
                    }
                }
            }
        })
        .collect();
    candidates.sort_by(|a, b| match (a.loglik, b.loglik) {
        (Some(x), Some(y)) => y.total_cmp(&x),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => std::cmp::Ordering::Equal,
    });
    for (i, c) in candidates.iter_mut().enumerate() {
        if c.fit.is_some() {
            c.rank = Some(i + 1);
        }
    }
    Ok(Selection { candidates, first_stage })
}
