use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::visible_surface;
use crate::acd::mix_seed;
use crate::convex::ConvexPart;
use crate::error::{Error, Result};
use crate::geom::{Aabb, Point};
use crate::kdtree::KdTree;
use crate::mesh::{sample_surface, sample_triangles, TriangleMesh};
use crate::pipeline::Decomposition;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Colormap {
    /// White at 0, red at 1.
    #[default]
    WhiteRed,
    /// Black at 0, white at 1.
    Gray,
}

impl Colormap {
    pub fn color(self, t: f64) -> [u8; 3] {
        let t = t.clamp(0.0, 1.0);
        let v = |x: f64| (x * 255.0).round() as u8;
        match self {
            Colormap::WhiteRed => [255, v(1.0 - t), v(1.0 - t)],
            Colormap::Gray => [v(t); 3],
        }
    }
}

/// `(d − α) / (β − α)` clamped to `[0, 1]`. With `β ≤ α` every distance
/// above `α` maps to 1.
pub fn normalize_clamp(d: f64, alpha: f64, beta: f64) -> f64 {
    if beta > alpha {
        ((d - alpha) / (beta - alpha)).clamp(0.0, 1.0)
    } else if d > alpha {
        1.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ErrorSampleParams {
    pub n: usize,
    pub colormap: Colormap,
    pub alpha: f64,
    /// Upper end of the colour scale; the largest distance when unset.
    pub beta: Option<f64>,
    pub filter_boxes: Vec<Aabb>,
    /// Sample the approximation and measure against the original instead
    /// of the other way round.
    pub on_approx: bool,
    pub seed: u64,
}

impl Default for ErrorSampleParams {
    fn default() -> Self {
        ErrorSampleParams {
            n: super::DEFAULT_SAMPLES,
            colormap: Colormap::default(),
            alpha: 0.0,
            beta: None,
            filter_boxes: Vec::new(),
            on_approx: false,
            seed: 0,
        }
    }
}

/// Coloured point cloud of per-sample distances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorSampleSet {
    pub points: Vec<Point>,
    pub distances: Vec<f64>,
    pub normalized: Vec<f64>,
    #[serde(serialize_with = "hex_out", deserialize_with = "hex_in")]
    pub colors: Vec<[u8; 3]>,
    pub alpha: f64,
    pub beta: f64,
    pub on_approx: bool,
}

fn hex_out<S: Serializer>(colors: &[[u8; 3]], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(colors.iter().map(|[r, g, b]| format!("#{r:02x}{g:02x}{b:02x}")))
}

fn hex_in<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<[u8; 3]>, D::Error> {
    use serde::de::Error as _;
    let raw: Vec<String> = Vec::deserialize(d)?;
    raw.iter()
        .map(|h| {
            let h = h.strip_prefix('#').unwrap_or(h);
            let c = |i: usize| h.get(i..i + 2).and_then(|x| u8::from_str_radix(x, 16).ok());
            match (h.len(), c(0), c(2), c(4)) {
                (6, Some(r), Some(g), Some(b)) => Ok([r, g, b]),
                _ => Err(D::Error::custom(format!("bad colour {h:?}"))),
            }
        })
        .collect()
}

impl ErrorSampleSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn max_distance(&self) -> f64 {
        self.distances.iter().copied().fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("sample set serializes")
    }

    /// ASCII PLY point cloud with colours and a `distance` property.
    pub fn to_ply(&self) -> String {
        let mut s = String::new();
        let _ = write!(
            s,
            "ply\nformat ascii 1.0\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\n\
             property uchar red\nproperty uchar green\nproperty uchar blue\nproperty double distance\nend_header\n",
            self.points.len()
        );
        for ((p, c), d) in self.points.iter().zip(&self.colors).zip(&self.distances) {
            let _ = writeln!(s, "{} {} {} {} {} {} {}", p.x, p.y, p.z, c[0], c[1], c[2], d);
        }
        s
    }
}

/// Surface samples of `original` and of the union of `parts`, each point
/// coloured by its distance to the nearest sample of the other surface.
///
/// With `on_approx` the union is sampled and measured against a KD-tree of
/// `n` original samples; otherwise the original is sampled and measured
/// against the union's samples, and the result is then restricted to
/// `filter_boxes` when any are given. Distances are bounded below by the
/// true surface distance minus the sample spacing.
pub fn error_samples(original: &TriangleMesh, parts: &[ConvexPart], params: &ErrorSampleParams) -> Result<ErrorSampleSet> {
    error_samples_for(original, &Decomposition::from_parts(parts.to_vec()), params)
}

/// [`error_samples`] for a whole decomposition, exact meshes included.
pub fn error_samples_for(original: &TriangleMesh, decomp: &Decomposition, params: &ErrorSampleParams) -> Result<ErrorSampleSet> {
    if original.is_empty() || (decomp.parts.is_empty() && decomp.exact_meshes.is_empty()) {
        return Err(Error::EmptyMesh);
    }
    let union = visible_surface(decomp);
    let sample_t = |salt| sample_surface(original, params.n, mix_seed(params.seed, salt, 21));
    let sample_a = |salt| sample_triangles(&union, params.n, mix_seed(params.seed, salt, 21));
    let (reference, queries) = if params.on_approx {
        (sample_t(0)?, sample_a(1)?)
    } else {
        (sample_a(0)?, sample_t(1)?)
    };
    let tree = KdTree::new(&reference.points);
    let mut points = queries.points;
    let mut distances: Vec<f64> =
        points.par_iter().map(|q| tree.nearest(q).map_or(f64::INFINITY, |(_, d2)| d2.sqrt())).collect();
    let beta = params.beta.unwrap_or_else(|| distances.iter().copied().fold(0.0, f64::max));
    if !params.on_approx && !params.filter_boxes.is_empty() {
        let keep: Vec<bool> =
            points.iter().map(|p| params.filter_boxes.iter().any(|b| b.contains_point(p, 0.0))).collect();
        let mut k = keep.iter();
        points.retain(|_| *k.next().unwrap());
        let mut k = keep.iter();
        distances.retain(|_| *k.next().unwrap());
    }
    let normalized: Vec<f64> = distances.iter().map(|&d| normalize_clamp(d, params.alpha, beta)).collect();
    let colors = normalized.iter().map(|&t| params.colormap.color(t)).collect();
    Ok(ErrorSampleSet { points, distances, normalized, colors, alpha: params.alpha, beta, on_approx: params.on_approx })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clamp_and_colours() {
        assert_eq!(normalize_clamp(0.5, 0.0, 1.0), 0.5);
        assert_eq!(normalize_clamp(2.0, 0.0, 1.0), 1.0);
        assert_eq!(normalize_clamp(-1.0, 0.0, 1.0), 0.0);
        assert_eq!(normalize_clamp(0.1, 0.0, 0.0), 1.0);
        assert_eq!(Colormap::WhiteRed.color(0.0), [255, 255, 255]);
        assert_eq!(Colormap::WhiteRed.color(1.0), [255, 0, 0]);
    }

    #[test]
    fn json_uses_hex_colours() {
        let set = ErrorSampleSet {
            points: vec![Point::origin()],
            distances: vec![0.0],
            normalized: vec![0.0],
            colors: vec![[255, 16, 0]],
            alpha: 0.0,
            beta: 1.0,
            on_approx: false,
        };
        let json = set.to_json();
        assert!(json.contains("\"#ff1000\""), "{json}");
        let back: ErrorSampleSet = serde_json::from_str(&json).unwrap();
        assert_eq!(back, set);
        assert!(set.to_ply().contains("element vertex 1"));
    }
}
