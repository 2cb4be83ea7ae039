use crate::error::{check_dim, Error, Result};
use crate::geometry::{DomainPoint, PrototypeSet};
use crate::scalar::Scalar;

/// Per-property means of `encodings`; `None` for properties with no samples.
pub fn class_means<T: Scalar>(
    encodings: &[(Vec<T>, usize)],
    classes: usize,
    dim: usize,
) -> Result<Vec<Option<Vec<T>>>> {
    let mut sums = vec![vec![T::zero(); dim]; classes];
    let mut counts = vec![0usize; classes];
    for (q, label) in encodings {
        check_dim(dim, q.len())?;
        if *label >= classes {
            return Err(Error::invalid(format!("label {label} out of range for {classes} prototypes")));
        }
        for (s, &v) in sums[*label].iter_mut().zip(q) {
            *s += v;
        }
        counts[*label] += 1;
    }
    Ok(sums
        .into_iter()
        .zip(counts)
        .map(|(s, n)| (n > 0).then(|| s.into_iter().map(|v| v / T::lit(n as f64)).collect()))
        .collect())
}

/// Centroid step of the alternating optimization.
///
/// In the first epoch each prototype becomes its class mean; afterwards it
/// moves to `mu * p + (1 - mu) * mean`. Properties absent from the draw keep
/// their previous prototype.
pub fn update_prototypes<T: Scalar>(
    encodings: &[(Vec<T>, usize)],
    protos: &PrototypeSet<T>,
    mu: f64,
    epoch: usize,
) -> Result<PrototypeSet<T>> {
    if encodings.is_empty() {
        return Err(Error::invalid("no encodings to update prototypes from"));
    }
    if !(0.0..=1.0).contains(&mu) {
        return Err(Error::invalid(format!("mu must lie in [0, 1], got {mu}")));
    }
    let means = class_means(encodings, protos.len(), protos.dim())?;
    let mu = T::lit(mu);
    let mut next = protos.clone();
    for (j, mean) in means.into_iter().enumerate() {
        let Some(mean) = mean else { continue };
        let point = if epoch <= 1 {
            mean
        } else {
            protos.get(j).iter().zip(&mean).map(|(&p, &m)| mu * p + (T::one() - mu) * m).collect()
        };
        next.set(j, DomainPoint::new(point)?)?;
    }
    Ok(next)
}
