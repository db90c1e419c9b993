//! Blowup sequences, their pairwise classification, and rescaling.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, CmlError, Result};
use crate::field::{Chart, Field};
use crate::point::Point;

/// Minimum number of samples in a blowup sequence.
pub const MIN_SEQUENCE_LEN: usize = 8;

/// Finite sample (x_k, r_k) of a blowup sequence at indices k.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowupSeq {
    index: Vec<u64>,
    centers: Vec<Point>,
    radii: Vec<f64>,
}

impl BlowupSeq {
    pub fn new(index: Vec<u64>, centers: Vec<Point>, radii: Vec<f64>) -> Result<Self> {
        let n = index.len();
        if centers.len() != n || radii.len() != n {
            return Err(invalid("index, centers and radii must have equal length"));
        }
        if n < MIN_SEQUENCE_LEN {
            return Err(invalid(format!(
                "blowup sequence needs at least {MIN_SEQUENCE_LEN} samples, got {n}"
            )));
        }
        if index.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("indices must be strictly increasing"));
        }
        if radii.iter().any(|&r| !(r > 0.0 && r.is_finite()))
            || centers.iter().any(|c| !c.is_finite())
        {
            return Err(invalid("radii must be positive and centers finite"));
        }
        if radii.windows(2).any(|w| w[1] > w[0]) {
            return Err(invalid("radii must decrease monotonically"));
        }
        Ok(BlowupSeq {
            index,
            centers,
            radii,
        })
    }

    /// Samples (x_k, r_k) = f(k) at the given indices.
    pub fn from_fn(index: &[u64], f: impl Fn(u64) -> (Point, f64)) -> Result<Self> {
        let (centers, radii) = index.iter().map(|&k| f(k)).unzip();
        BlowupSeq::new(index.to_vec(), centers, radii)
    }

    pub fn index(&self) -> &[u64] {
        &self.index
    }

    pub fn centers(&self) -> &[Point] {
        &self.centers
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    /// Frame (y_k, l_k) of `self` seen from `base`: y_k = (x'_k − x_k)/r_k,
    /// l_k = r'_k / r_k.
    pub fn relative_to(&self, base: &BlowupSeq) -> Result<Vec<(Point, f64)>> {
        let (a, b) = common(self, base)?;
        Ok(a.iter()
            .zip(&b)
            .map(|(&i, &j)| {
                (
                    (self.centers[i] - base.centers[j]) * (1.0 / base.radii[j]),
                    self.radii[i] / base.radii[j],
                )
            })
            .collect())
    }
}

fn common(a: &BlowupSeq, b: &BlowupSeq) -> Result<(Vec<usize>, Vec<usize>)> {
    let (mut ia, mut ib) = (Vec::new(), Vec::new());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a.index[i].cmp(&b.index[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                ia.push(i);
                ib.push(j);
                i += 1;
                j += 1;
            }
        }
    }
    if ia.len() < MIN_SEQUENCE_LEN {
        return Err(invalid(format!(
            "sequences share only {} indices, need {MIN_SEQUENCE_LEN}",
            ia.len()
        )));
    }
    Ok((ia, ib))
}

/// Thresholds for reading a limit off a finite tail.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TrendTolerances {
    /// "→ ∞" needs the last value above this (and "→ 0" below its reciprocal).
    pub large: f64,
    /// Growth (or decay) factor required across the tail.
    pub factor: f64,
    /// Relative spread of the last quarter of the tail for convergence.
    pub converge: f64,
}

impl Default for TrendTolerances {
    fn default() -> Self {
        TrendTolerances {
            large: 1e3,
            factor: 2.0,
            converge: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Trend {
    ToInfinity,
    ToZero,
    Bounded,
    Inconclusive,
}

/// Trend of a positive sequence over its second half.
pub fn trend(values: &[f64], tol: TrendTolerances) -> Trend {
    let tail = &values[values.len() / 2..];
    let (first, last) = (tail[0], tail[tail.len() - 1]);
    let max = tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = tail.iter().cloned().fold(f64::INFINITY, f64::min);
    if last >= tol.factor * first && last > tol.large {
        Trend::ToInfinity
    } else if first > 0.0 && last * tol.factor <= first && last < 1.0 / tol.large {
        Trend::ToZero
    } else if max <= tol.large
        && last < tol.factor * first.max(1.0 / tol.large)
        && (min > 0.0 || max == 0.0)
    {
        Trend::Bounded
    } else {
        Trend::Inconclusive
    }
}

fn converges(points: &[Point], tol: TrendTolerances) -> bool {
    let q = &points[points.len() - (points.len() / 4).max(2)..];
    let last = q[q.len() - 1];
    q.iter()
        .all(|p| (*p - last).norm() <= tol.converge * (1.0 + last.norm()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairClass {
    EssentiallySame,
    /// The first sequence sits on top of the second (a < b).
    OnTopAB,
    /// The second sequence sits on top of the first (b < a).
    OnTopBA,
    Disjoint,
    Inconclusive,
}

/// Relationship between two blowup sequences read off their common tail.
pub fn classify_pair(a: &BlowupSeq, b: &BlowupSeq, tol: TrendTolerances) -> Result<PairClass> {
    let (ia, ib) = common(a, b)?;
    let ratio: Vec<f64> = ia
        .iter()
        .zip(&ib)
        .map(|(&i, &j)| a.radii[i] / b.radii[j])
        .collect();
    let sep: Vec<f64> = ia
        .iter()
        .zip(&ib)
        .map(|(&i, &j)| (a.centers[i] - b.centers[j]).norm() / (a.radii[i] + b.radii[j]))
        .collect();
    let sep_trend = trend(&sep, tol);
    let sep_bounded = matches!(sep_trend, Trend::Bounded | Trend::ToZero);
    // Comparable scales need the ratio bounded away from both 0 and ∞.
    let recip: Vec<f64> = ratio.iter().map(|r| 1.0 / r).collect();
    let ratio_trend = match (trend(&ratio, tol), trend(&recip, tol)) {
        (Trend::Bounded, Trend::Bounded) => Trend::Bounded,
        (Trend::Bounded, _) => Trend::Inconclusive,
        (t, _) => t,
    };
    Ok(match ratio_trend {
        Trend::Bounded if sep_bounded => PairClass::EssentiallySame,
        Trend::ToZero
            if converges(
                &a.relative_to(b)?.iter().map(|f| f.0).collect::<Vec<_>>(),
                tol,
            ) =>
        {
            PairClass::OnTopAB
        }
        Trend::ToInfinity
            if converges(
                &b.relative_to(a)?.iter().map(|f| f.0).collect::<Vec<_>>(),
                tol,
            ) =>
        {
            PairClass::OnTopBA
        }
        _ if sep_trend == Trend::ToInfinity => PairClass::Disjoint,
        _ => PairClass::Inconclusive,
    })
}

/// u(x + r·y) + log r sampled on the disk |y| < window with the same grid size.
/// Nodes of the output square outside the window copy their radial projection.
pub fn rescale(u: &Field, x: Point, r: f64, window: f64) -> Result<Field> {
    if !(r > 0.0 && window > 0.0) {
        return Err(invalid("scale and window must be positive"));
    }
    let Chart::Disk { radius } = u.chart() else {
        return Err(invalid("rescaling works on disk charts"));
    };
    // Bilinear data reaches half a cell short of the chart edge.
    let reach = x.norm() + r * window;
    if reach > radius - 0.5 * u.spacing() {
        let p = x + Point::new(r * window, 0.0);
        return Err(CmlError::OutsideChart { x: p.x, y: p.y });
    }
    let n = u.n();
    let mut values = Vec::with_capacity(n * n);
    let out = Field::constant(n, Chart::Disk { radius: window }, 0.0)?;
    for i in 0..n {
        for j in 0..n {
            let mut y = out.node(i, j);
            if y.norm() > window {
                y = y * (window / y.norm());
            }
            values.push(u.interpolate(x + y * r)? + r.ln());
        }
    }
    Field::new(n, Chart::Disk { radius: window }, values)
}
