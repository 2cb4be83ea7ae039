//! Conceptual-space geometry of a single domain.
//!
//! Semantic distortion is the Euclidean distance between two domain points,
//! semantic similarity is `exp(-c * d^2)`, and a property is the Voronoi cell
//! of its prototype. The maximum-similarity decoder assigns a point to the
//! prototype it is most similar to.

use num_traits::Float;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::rng;
use crate::scalar::Scalar;

/// A vector of quality values, one per quality dimension of the domain.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainPoint<T>(Vec<T>);

impl<T: Scalar> DomainPoint<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("domain point needs at least one dimension"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("domain point has a non-finite entry"));
        }
        Ok(DomainPoint(values))
    }

    pub fn zeros(dim: usize) -> Self {
        DomainPoint(vec![T::zero(); dim.max(1)])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<T> {
        self.0
    }
}

impl<T> AsRef<[T]> for DomainPoint<T> {
    fn as_ref(&self) -> &[T] {
        &self.0
    }
}

/// Sharpness `c` of the similarity function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityParams {
    pub c: f64,
}

impl SimilarityParams {
    pub fn new(c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::invalid(format!("similarity sharpness must be positive, got {c}")));
        }
        Ok(SimilarityParams { c })
    }
}

impl Default for SimilarityParams {
    fn default() -> Self {
        SimilarityParams { c: 1.0 }
    }
}

/// Ordered property prototypes with their names and optional binary
/// attribute composition.
#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeSet<T> {
    prototypes: Vec<DomainPoint<T>>,
    names: Vec<String>,
    attributes: Option<Vec<Vec<bool>>>,
}

impl<T: Scalar> PrototypeSet<T> {
    pub fn new(
        prototypes: Vec<DomainPoint<T>>,
        names: Vec<String>,
        attributes: Option<Vec<Vec<bool>>>,
    ) -> Result<Self> {
        if prototypes.len() < 2 {
            return Err(Error::invalid(format!(
                "a prototype set needs at least two prototypes, got {}",
                prototypes.len()
            )));
        }
        let dim = prototypes[0].dim();
        for p in &prototypes {
            check_dim(dim, p.dim())?;
        }
        check_dim(prototypes.len(), names.len())?;
        if let Some(attrs) = &attributes {
            check_dim(prototypes.len(), attrs.len())?;
            let width = attrs[0].len();
            for a in attrs {
                check_dim(width, a.len())?;
            }
        }
        Ok(PrototypeSet { prototypes, names, attributes })
    }

    /// All prototypes at the origin, the state before the first update.
    pub fn zeros(dim: usize, names: Vec<String>, attributes: Option<Vec<Vec<bool>>>) -> Result<Self> {
        let count = names.len();
        Self::new((0..count).map(|_| DomainPoint::zeros(dim)).collect(), names, attributes)
    }

    /// Builds a set from raw coordinates, naming properties by index.
    pub fn from_coords(coords: &[Vec<T>]) -> Result<Self> {
        let points = coords.iter().cloned().map(DomainPoint::new).collect::<Result<Vec<_>>>()?;
        let names = (0..points.len()).map(|j| j.to_string()).collect();
        Self::new(points, names, None)
    }

    pub fn len(&self) -> usize {
        self.prototypes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prototypes.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.prototypes[0].dim()
    }

    pub fn get(&self, j: usize) -> &[T] {
        self.prototypes[j].as_slice()
    }

    pub fn points(&self) -> &[DomainPoint<T>] {
        &self.prototypes
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn attributes(&self) -> Option<&[Vec<bool>]> {
        self.attributes.as_deref()
    }

    pub fn coords(&self) -> Vec<Vec<T>> {
        self.prototypes.iter().map(|p| p.as_slice().to_vec()).collect()
    }

    pub fn set(&mut self, j: usize, point: DomainPoint<T>) -> Result<()> {
        check_dim(self.dim(), point.dim())?;
        self.prototypes[j] = point;
        Ok(())
    }

    pub fn pairwise_distinct(&self) -> bool {
        (0..self.len()).all(|i| (i + 1..self.len()).all(|j| self.get(i) != self.get(j)))
    }
}

/// Squared Euclidean distortion; used on gradient paths.
pub fn squared_distortion<T: Scalar>(a: &[T], b: &[T]) -> Result<T> {
    check_dim(a.len(), b.len())?;
    Ok(a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum())
}

/// Semantic distortion: the Euclidean distance `||a - b||`.
pub fn distortion<T: Scalar>(a: &[T], b: &[T]) -> Result<T> {
    squared_distortion(a, b).map(Float::sqrt)
}

/// Semantic similarity `exp(-c d^2)`, in (0, 1] up to floating-point underflow.
pub fn similarity<T: Scalar>(d: T, params: SimilarityParams) -> Result<T> {
    if d < T::zero() || !d.is_finite() {
        return Err(Error::invalid(format!("distortion must be finite and nonnegative, got {d}")));
    }
    Ok((-T::lit(params.c) * d * d).exp())
}

/// Distortions and similarities of `q` against every prototype.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityScores<T> {
    pub distortions: Vec<T>,
    pub similarities: Vec<T>,
}

pub fn similarity_vector<T: Scalar>(
    q: &[T],
    protos: &PrototypeSet<T>,
    params: SimilarityParams,
) -> Result<SimilarityScores<T>> {
    check_dim(protos.dim(), q.len())?;
    let c = T::lit(params.c);
    let mut distortions = Vec::with_capacity(protos.len());
    let mut similarities = Vec::with_capacity(protos.len());
    for p in protos.points() {
        let sq = squared_distortion(q, p.as_slice())?;
        distortions.push(sq.sqrt());
        similarities.push((-c * sq).exp());
    }
    Ok(SimilarityScores { distortions, similarities })
}

/// Max-subtracted softmax.
pub fn softmax<T: Scalar>(s: &[T]) -> Vec<T> {
    let max = s.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = s.iter().map(|&v| (v - max).exp()).collect();
    let total: T = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Index of the nearest prototype; the lowest index wins ties.
pub fn nearest_prototype<T: Scalar>(q: &[T], protos: &PrototypeSet<T>) -> Result<usize> {
    check_dim(protos.dim(), q.len())?;
    let mut best = 0;
    let mut best_d = T::infinity();
    for (j, p) in protos.points().iter().enumerate() {
        let d = squared_distortion(q, p.as_slice())?;
        if d < best_d {
            best = j;
            best_d = d;
        }
    }
    Ok(best)
}

/// Maximum-similarity decoding: returns the winning property index and the
/// softmax of the similarity vector.
///
/// The index is taken as the smallest distortion rather than the largest
/// similarity so that far-away points, whose similarities all underflow to
/// zero, still resolve to the nearest prototype.
pub fn classify<T: Scalar>(q: &[T], protos: &PrototypeSet<T>, params: SimilarityParams) -> Result<(usize, Vec<T>)> {
    let scores = similarity_vector(q, protos, params)?;
    let index = argmin_first(&scores.distortions);
    Ok((index, softmax(&scores.similarities)))
}

fn argmin_first<T: Scalar>(values: &[T]) -> usize {
    let mut best = 0;
    for (j, &v) in values.iter().enumerate() {
        if v < values[best] {
            best = j;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvexityReport {
    pub trials: usize,
    pub violations: usize,
}

impl ConvexityReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Samples pairs of points that fall in the same Voronoi region and checks
/// that their midpoint falls in that region too.
///
/// Points are drawn from the prototypes' bounding box widened by its own
/// extent on every side. Fewer than two prototypes passes vacuously.
pub fn region_convexity_check<T: Scalar>(prototypes: &[DomainPoint<T>], trials: usize, seed: u64) -> ConvexityReport {
    if prototypes.len() < 2 || trials == 0 {
        return ConvexityReport { trials: 0, violations: 0 };
    }
    let protos: Vec<Vec<f64>> = prototypes.iter().map(|p| p.as_slice().iter().map(|v| v.as_f64()).collect()).collect();
    let dim = protos[0].len();
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for p in &protos {
        for k in 0..dim {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    for k in 0..dim {
        let pad = (hi[k] - lo[k]).max(1.0);
        lo[k] -= pad;
        hi[k] += pad;
    }
    let region = |x: &[f64]| -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (j, p) in protos.iter().enumerate() {
            let d: f64 = x.iter().zip(p).map(|(a, b)| (a - b) * (a - b)).sum();
            if d < best_d {
                best = j;
                best_d = d;
            }
        }
        best
    };
    let mut rng = rng::seeded(seed);
    let draw = |rng: &mut rng::Rng| -> Vec<f64> { (0..dim).map(|k| rng.random_range(lo[k]..hi[k])).collect() };

    let mut done = 0;
    let mut violations = 0;
    while done < trials {
        let a = draw(&mut rng);
        let ra = region(&a);
        let mut partner = None;
        for _ in 0..1000 {
            let b = draw(&mut rng);
            if region(&b) == ra {
                partner = Some(b);
                break;
            }
        }
        let Some(b) = partner else { continue };
        let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
        if region(&mid) != ra {
            violations += 1;
        }
        done += 1;
    }
    ConvexityReport { trials: done, violations }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn protos(coords: &[&[f64]]) -> PrototypeSet<f64> {
        PrototypeSet::from_coords(&coords.iter().map(|c| c.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn distortion_examples() {
        assert_eq!(distortion(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 5.0);
        assert_eq!(distortion(&[1.5, -2.0], &[1.5, -2.0]).unwrap(), 0.0);
        assert_abs_diff_eq!(distortion(&[1.0, 1.0], &[2.0, 2.0]).unwrap(), 2f64.sqrt(), epsilon = 1e-15);
        assert!(matches!(distortion(&[1.0], &[1.0, 2.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn similarity_examples() {
        let c1 = SimilarityParams::new(1.0).unwrap();
        assert_eq!(similarity(0.0, SimilarityParams::new(3.7).unwrap()).unwrap(), 1.0);
        assert_abs_diff_eq!(similarity(1.0, c1).unwrap(), (-1f64).exp(), epsilon = 1e-15);
        let tail = similarity(2.25, c1).unwrap();
        assert!((tail - 0.00633).abs() < 1e-5, "{tail}");
        assert!(similarity(-0.1, c1).is_err());
        assert!(SimilarityParams::new(0.0).is_err());
    }

    #[test]
    fn similarity_vector_examples() {
        let set = protos(&[&[0.0, 0.0], &[1.0, 0.0]]);
        let c1 = SimilarityParams::default();
        let s = similarity_vector(&[0.0, 0.0], &set, c1).unwrap();
        assert_eq!(s.distortions, vec![0.0, 1.0]);
        assert_abs_diff_eq!(s.similarities[0], 1.0);
        assert_abs_diff_eq!(s.similarities[1], 0.36787944117144233, epsilon = 1e-12);

        let same = protos(&[&[2.0, 1.0], &[2.0, 1.0], &[2.0, 1.0]]);
        let s = similarity_vector(&[2.0, 1.0], &same, c1).unwrap();
        assert_eq!(s.similarities, vec![1.0; 3]);

        assert!(similarity_vector(&[0.0], &set, c1).is_err());
    }

    #[test]
    fn softmax_examples() {
        assert_eq!(softmax(&[1.0, 1.0]), vec![0.5, 0.5]);
        let u = softmax(&[0.3f64; 7]);
        for p in u {
            assert_abs_diff_eq!(p, 1.0 / 7.0, epsilon = 1e-15);
        }
        let p = softmax(&[1.0f64, 0.0]);
        assert_abs_diff_eq!(p[0], 0.7310585786300049, epsilon = 1e-12);
        assert_abs_diff_eq!(p[1], 0.2689414213699951, epsilon = 1e-12);
    }

    #[test]
    fn classify_examples() {
        let set = protos(&[&[0.0, 0.0], &[5.0, 0.0], &[0.0, 5.0], &[5.0, 5.0]]);
        let c = SimilarityParams::default();
        assert_eq!(classify(&[0.0, 5.0], &set, c).unwrap().0, 2);
        // equidistant from the first two, farther from the rest
        assert_eq!(classify(&[2.5, -1.0], &set, c).unwrap().0, 0);
        let (_, probs) = classify(&[1.0, 1.0], &set, c).unwrap();
        assert_abs_diff_eq!(probs.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn classify_far_point_uses_nearest() {
        let set = protos(&[&[0.0, 0.0], &[1.0, 0.0]]);
        let (idx, _) = classify(&[500.0, 0.0], &set, SimilarityParams::default()).unwrap();
        assert_eq!(idx, 1);
    }

    #[test]
    fn prototype_set_validation() {
        assert!(PrototypeSet::<f64>::from_coords(&[vec![0.0]]).is_err());
        assert!(PrototypeSet::<f64>::from_coords(&[vec![0.0], vec![0.0, 1.0]]).is_err());
        let z = PrototypeSet::<f32>::zeros(3, vec!["a".into(), "b".into()], None).unwrap();
        assert_eq!(z.dim(), 3);
        assert!(!z.pairwise_distinct());
    }

    #[test]
    fn convexity_examples() {
        let two = vec![DomainPoint::new(vec![0.0, 0.0]).unwrap(), DomainPoint::new(vec![1.0, 2.0]).unwrap()];
        let r = region_convexity_check(&two, 1000, 3);
        assert_eq!(r, ConvexityReport { trials: 1000, violations: 0 });
        let one = vec![DomainPoint::new(vec![0.5f64]).unwrap()];
        assert!(region_convexity_check(&one, 10, 0).passed());
    }

    proptest! {
        #[test]
        fn metric_axioms(a in prop::collection::vec(-10.0f64..10.0, 3),
                         b in prop::collection::vec(-10.0f64..10.0, 3),
                         c in prop::collection::vec(-10.0f64..10.0, 3)) {
            let ab = distortion(&a, &b).unwrap();
            let ba = distortion(&b, &a).unwrap();
            prop_assert_eq!(ab, ba);
            let ac = distortion(&a, &c).unwrap();
            let bc = distortion(&b, &c).unwrap();
            prop_assert!(ac <= ab + bc + 1e-9);
        }

        #[test]
        fn similarity_strictly_decreasing(d in 0.0f64..20.0, delta in 1e-3f64..1.0, c in 0.01f64..1.5) {
            let p = SimilarityParams::new(c).unwrap();
            let s0 = similarity(d, p).unwrap();
            let s1 = similarity(d + delta, p).unwrap();
            prop_assert!(s0 > 0.0 && s0 <= 1.0);
            prop_assert!(s1 < s0);
        }

        #[test]
        fn softmax_shift_invariant(s in prop::collection::vec(-5.0f64..5.0, 2..12), shift in -50.0f64..50.0) {
            let p = softmax(&s);
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-6);
            let shifted: Vec<f64> = s.iter().map(|v| v + shift).collect();
            for (x, y) in p.iter().zip(softmax(&shifted)) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }

        #[test]
        fn classify_matches_brute_force(coords in prop::collection::vec(-5.0f64..5.0, 10),
                                        q in prop::collection::vec(-6.0f64..6.0, 2),
                                        c in 0.1f64..10.0, c2 in 0.1f64..10.0) {
            let pts: Vec<Vec<f64>> = coords.chunks(2).map(|p| p.to_vec()).collect();
            let set = PrototypeSet::from_coords(&pts).unwrap();
            let mut best = 0;
            for j in 1..pts.len() {
                let dj = (q[0] - pts[j][0]).powi(2) + (q[1] - pts[j][1]).powi(2);
                let db = (q[0] - pts[best][0]).powi(2) + (q[1] - pts[best][1]).powi(2);
                if dj < db { best = j; }
            }
            let (i1, _) = classify(&q, &set, SimilarityParams::new(c).unwrap()).unwrap();
            let (i2, _) = classify(&q, &set, SimilarityParams::new(c2).unwrap()).unwrap();
            prop_assert_eq!(i1, best);
            prop_assert_eq!(i1, i2);
        }

        #[test]
        fn voronoi_regions_are_convex(coords in prop::collection::vec(-3.0f64..3.0, 10), seed in any::<u64>()) {
            let pts: Vec<DomainPoint<f64>> =
                coords.chunks(2).map(|p| DomainPoint::new(p.to_vec()).unwrap()).collect();
            let r = region_convexity_check(&pts, 2000, seed);
            prop_assert_eq!(r.violations, 0);
        }
    }
}
