use serde::{Deserialize, Serialize};

use super::StatsError;

/// Paired binary judgments (`true` = correct) from two raters.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LabelPairSeries {
    pub items: Vec<(bool, bool)>,
}

impl LabelPairSeries {
    pub fn new(items: Vec<(bool, bool)>) -> Self {
        Self { items }
    }

    pub fn from_raters(a: &[bool], b: &[bool]) -> Result<Self, StatsError> {
        if a.len() != b.len() {
            return Err(StatsError::Domain(format!(
                "rater series differ in length ({} vs {})",
                a.len(),
                b.len()
            )));
        }
        Ok(Self::new(a.iter().copied().zip(b.iter().copied()).collect()))
    }

    fn non_empty(&self) -> Result<f64, StatsError> {
        if self.items.is_empty() {
            Err(StatsError::Domain("empty label series".into()))
        } else {
            Ok(self.items.len() as f64)
        }
    }
}

/// Fraction of items on which the raters agree.
pub fn percent_agreement(series: &LabelPairSeries) -> Result<f64, StatsError> {
    let n = series.non_empty()?;
    Ok(series.items.iter().filter(|(a, b)| a == b).count() as f64 / n)
}

/// Cohen's κ with chance agreement from each rater's marginals. `None` when
/// chance agreement is 1 (both raters constant and equal).
pub fn cohen_kappa(series: &LabelPairSeries) -> Result<Option<f64>, StatsError> {
    let n = series.non_empty()?;
    let p_o = percent_agreement(series)?;
    let pa = series.items.iter().filter(|(a, _)| *a).count() as f64 / n;
    let pb = series.items.iter().filter(|(_, b)| *b).count() as f64 / n;
    let p_e = pa * pb + (1.0 - pa) * (1.0 - pb);
    if (1.0 - p_e).abs() < f64::EPSILON {
        return Ok(None);
    }
    Ok(Some((p_o - p_e) / (1.0 - p_e)))
}

/// Prevalence- and bias-adjusted κ.
pub fn pabak(series: &LabelPairSeries) -> Result<f64, StatsError> {
    Ok(pabak_from_agreement(percent_agreement(series)?))
}

/// PABAK for two categories given observed agreement alone.
pub fn pabak_from_agreement(p_o: f64) -> f64 {
    2.0 * p_o - 1.0
}
