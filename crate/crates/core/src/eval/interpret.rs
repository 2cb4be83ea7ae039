use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learner::DomainModel;
use crate::scalar::Scalar;

/// Anything that renders domain points as images.
pub trait Decoder {
    fn domain_dim(&self) -> usize;
    /// Per-image shape, height × width × channels.
    fn image_shape(&self) -> Vec<usize>;
    fn decode_points(&self, points: &[Vec<f64>]) -> Result<Vec<Vec<f64>>>;
}

impl<T: Scalar> Decoder for DomainModel<T> {
    fn domain_dim(&self) -> usize {
        self.decoder_spec.input_len()
    }

    fn image_shape(&self) -> Vec<usize> {
        self.decoder_spec.output_shape().unwrap_or_default()
    }

    fn decode_points(&self, points: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let cast: Vec<Vec<T>> = points.iter().map(|p| p.iter().map(|&v| T::lit(v)).collect()).collect();
        let out = self.decode(&cast)?;
        Ok((0..out.batch()).map(|i| out.row(i).iter().map(|v| v.as_f64()).collect()).collect())
    }
}

/// Measures one quality of a decoded image given its shape.
pub type QualityHook = fn(&[f64], &[usize]) -> f64;

fn pixel_means(image: &[f64], shape: &[usize]) -> Vec<f64> {
    let c = shape.last().copied().unwrap_or(1).max(1);
    image.chunks(c).map(|px| px.iter().map(|v| v.clamp(0.0, 1.0)).sum::<f64>() / c as f64).collect()
}

/// Number of pixels brighter than half of the image maximum.
pub fn decoded_size(image: &[f64], shape: &[usize]) -> f64 {
    let px = pixel_means(image, shape);
    let max = px.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return 0.0;
    }
    px.iter().filter(|&&v| v > max / 2.0).count() as f64
}

/// Mean of the brightest quarter of the pixels.
pub fn decoded_brightness(image: &[f64], shape: &[usize]) -> f64 {
    let mut px = pixel_means(image, shape);
    if px.is_empty() {
        return 0.0;
    }
    px.sort_by(|a, b| b.total_cmp(a));
    let k = px.len().div_ceil(4);
    px[..k].iter().sum::<f64>() / k as f64
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && v[order[j + 1]] == v[order[i]] {
            j += 1;
        }
        // ties share the mean of their positions
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation with average ranks for ties. Defined as 0 when
/// either input is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), actual: y.len() });
    }
    if x.len() < 2 {
        return Ok(0.0);
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(0.0);
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Per-axis `[min, max]` of a point cloud. Zero extent on any axis is an
/// error, since nothing could be traversed along it.
pub fn bounding_box(points: &[Vec<f64>]) -> Result<Vec<[f64; 2]>> {
    let first = points.first().ok_or_else(|| Error::invalid("bounding box of no points"))?;
    let mut bbox: Vec<[f64; 2]> = first.iter().map(|&v| [v, v]).collect();
    for p in points {
        if p.len() != bbox.len() {
            return Err(Error::DimensionMismatch { expected: bbox.len(), actual: p.len() });
        }
        for (b, &v) in bbox.iter_mut().zip(p) {
            b[0] = b[0].min(v);
            b[1] = b[1].max(v);
        }
    }
    if let Some(k) = bbox.iter().position(|[lo, hi]| !(hi > lo)) {
        return Err(Error::invalid(format!("bounding box has zero extent on axis {k}")));
    }
    Ok(bbox)
}

/// Axis-parallel traversals: for each axis, `lines` lines of `steps` evenly
/// spaced points from one side of the box to the other. Line `l` holds the
/// other coordinates at fraction `(l + 0.5) / lines` of their range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraversalSpec {
    pub steps: usize,
    pub lines: usize,
}

impl Default for TraversalSpec {
    fn default() -> Self {
        TraversalSpec { steps: 21, lines: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterpretabilityReport {
    pub qualities: Vec<String>,
    /// `correlations[axis][quality]`, averaged over the traversal lines.
    pub correlations: Vec<Vec<f64>>,
    /// Chosen `(axis, quality)` pairs.
    pub assignment: Vec<(usize, usize)>,
    /// Mean absolute correlation over the chosen pairs.
    pub mean_abs: f64,
}

/// One-to-one pairing of axes and qualities maximizing the total absolute
/// correlation. Ties keep the first pairing found in lexicographic order.
pub fn best_assignment(correlations: &[Vec<f64>]) -> (Vec<(usize, usize)>, f64) {
    let axes = correlations.len();
    let qualities = correlations.first().map_or(0, Vec::len);
    let pairs = axes.min(qualities);
    if pairs == 0 {
        return (Vec::new(), 0.0);
    }
    // the smaller side leads so every member of it is paired
    let axes_lead = axes <= qualities;
    let mut best: (Vec<(usize, usize)>, f64) = (Vec::new(), f64::NEG_INFINITY);
    for choice in arrangements(pairs, axes.max(qualities)) {
        let pairing: Vec<(usize, usize)> =
            choice.iter().enumerate().map(|(i, &o)| if axes_lead { (i, o) } else { (o, i) }).collect();
        let total: f64 = pairing.iter().map(|&(a, q)| correlations[a][q].abs()).sum();
        if total > best.1 {
            best = (pairing, total);
        }
    }
    let mut assignment = best.0;
    assignment.sort();
    (assignment, best.1 / pairs as f64)
}

/// Ordered selections of `k` distinct values from `0..n`, lexicographic.
fn arrangements(k: usize, n: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for head in arrangements(k - 1, n) {
        for v in (0..n).filter(|v| !head.contains(v)) {
            let mut next = head.clone();
            next.push(v);
            out.push(next);
        }
    }
    out
}

/// Decodes traversals across `bbox` and rank-correlates the traversed
/// coordinate with each measured quality.
pub fn axis_interpretability<D: Decoder + ?Sized>(
    decoder: &D,
    bbox: &[[f64; 2]],
    spec: &TraversalSpec,
    hooks: &[(&str, QualityHook)],
) -> Result<InterpretabilityReport> {
    let n = decoder.domain_dim();
    if bbox.len() != n {
        return Err(Error::DimensionMismatch { expected: n, actual: bbox.len() });
    }
    if let Some(k) = bbox.iter().position(|[lo, hi]| !(hi > lo)) {
        return Err(Error::invalid(format!("bounding box has zero extent on axis {k}")));
    }
    if spec.steps < 2 || spec.lines == 0 {
        return Err(Error::invalid("traversals need at least two steps and one line"));
    }
    let shape = decoder.image_shape();
    let mut correlations = vec![vec![0.0; hooks.len()]; n];
    for (axis, row) in correlations.iter_mut().enumerate() {
        let t: Vec<f64> = (0..spec.steps)
            .map(|s| bbox[axis][0] + (bbox[axis][1] - bbox[axis][0]) * s as f64 / (spec.steps - 1) as f64)
            .collect();
        for line in 0..spec.lines {
            let frac = (line as f64 + 0.5) / spec.lines as f64;
            let points: Vec<Vec<f64>> = t
                .iter()
                .map(|&v| {
                    (0..n).map(|k| if k == axis { v } else { bbox[k][0] + frac * (bbox[k][1] - bbox[k][0]) }).collect()
                })
                .collect();
            let images = decoder.decode_points(&points)?;
            for (m, (_, hook)) in hooks.iter().enumerate() {
                let measured: Vec<f64> = images.iter().map(|img| hook(img, &shape)).collect();
                row[m] += spearman(&t, &measured)? / spec.lines as f64;
            }
        }
    }
    let (assignment, mean_abs) = best_assignment(&correlations);
    Ok(InterpretabilityReport {
        qualities: hooks.iter().map(|(name, _)| name.to_string()).collect(),
        correlations,
        assignment,
        mean_abs,
    })
}
