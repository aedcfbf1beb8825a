use ndarray::{concatenate, Array1, Array2, Axis};

use crate::representation::SentenceVector;
use crate::{Error, Result};

/// `concat(u * v, |u - v|)` for a sentence pair.
#[derive(Clone, Debug, PartialEq)]
pub struct PairFeature {
    pub values: Array1<f64>,
}

/// Component-wise product followed by absolute difference; symmetric in
/// its arguments.
pub fn pair_features(u: &SentenceVector, v: &SentenceVector) -> Result<PairFeature> {
    if u.dim() != v.dim() {
        return Err(Error::Shape(format!(
            "pair dimensions differ: {} and {}",
            u.dim(),
            v.dim()
        )));
    }
    let prod = &u.values * &v.values;
    let diff = (&u.values - &v.values).mapv(f64::abs);
    Ok(PairFeature {
        values: concatenate![Axis(0), prod, diff],
    })
}

/// Pair features of aligned lists as rows of a matrix.
pub fn pair_feature_matrix(us: &[SentenceVector], vs: &[SentenceVector]) -> Result<Array2<f64>> {
    if us.len() != vs.len() {
        return Err(Error::Shape(format!("{} left vs {} right sentences", us.len(), vs.len())));
    }
    let dim = us.first().map_or(0, |u| 2 * u.dim());
    let mut m = Array2::zeros((us.len(), dim));
    for (i, (u, v)) in us.iter().zip(vs).enumerate() {
        let f = pair_features(u, v)?;
        if f.values.len() != dim {
            return Err(Error::Shape("pair vectors differ in dimension across rows".into()));
        }
        m.row_mut(i).assign(&f.values);
    }
    Ok(m)
}
