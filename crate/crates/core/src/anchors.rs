//! Per-class anatomical anchors: a Gaussian over each class's normalized
//! centroid, fitted across the source corpus.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::shape_bank::Subject;

/// Fallback standard deviation (normalized units) when fewer than two sources
/// contain a class.
pub const FALLBACK_SIGMA: f64 = 0.12;
/// Diagonal jitter added before factorizing a covariance.
pub const COV_EPS: f64 = 1e-6;
/// Anchor draws are clamped to this range on every axis.
pub const CLAMP: [f64; 2] = [0.02, 0.98];

#[derive(Clone, Debug, PartialEq)]
pub struct AnchorDistribution {
    pub class_id: u8,
    pub mu: [f64; 3],
    /// Row-major symmetric covariance.
    pub sigma: [[f64; 3]; 3],
    pub n_samples: usize,
}

impl AnchorDistribution {
    /// Symmetric square root of `sigma + eps*I` via eigen-decomposition.
    fn sqrt_cov(&self) -> Matrix3<f64> {
        let s = Matrix3::from_fn(|r, c| self.sigma[r][c]) + Matrix3::identity() * COV_EPS;
        let eig = SymmetricEigen::new(s);
        let root = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
        eig.eigenvectors * Matrix3::from_diagonal(&root) * eig.eigenvectors.transpose()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnchorModel {
    classes: BTreeMap<u8, AnchorDistribution>,
    roots: BTreeMap<u8, Matrix3<f64>>,
}

impl AnchorModel {
    pub fn new(dists: impl IntoIterator<Item = AnchorDistribution>) -> Result<Self> {
        let mut classes = BTreeMap::new();
        for d in dists {
            if d.mu.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::Config(format!(
                    "class {} anchor mean {:?} outside [0,1]^3",
                    d.class_id, d.mu
                )));
            }
            for r in 0..3 {
                for c in 0..3 {
                    if d.sigma[r][c] != d.sigma[c][r] || !d.sigma[r][c].is_finite() {
                        return Err(Error::Config(format!(
                            "class {} covariance is not symmetric",
                            d.class_id
                        )));
                    }
                }
            }
            if classes.insert(d.class_id, d).is_some() {
                return Err(Error::Config("duplicate anchor class".into()));
            }
        }
        let roots = classes
            .iter()
            .map(|(&id, d)| (id, d.sqrt_cov()))
            .collect();
        Ok(Self { classes, roots })
    }

    pub fn get(&self, class_id: u8) -> Option<&AnchorDistribution> {
        self.classes.get(&class_id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &AnchorDistribution> {
        self.classes.values()
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    /// Draws a normalized anchor point, clamped to [`CLAMP`] on every axis.
    pub fn sample(&self, class_id: u8, rng: &mut impl Rng) -> Result<[f64; 3]> {
        let d = self.classes.get(&class_id).ok_or(Error::UnknownClass(class_id))?;
        let root = &self.roots[&class_id];
        let z = Vector3::new(
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
        );
        let dv = root * z;
        Ok([0, 1, 2].map(|a| (d.mu[a] + dv[a]).clamp(CLAMP[0], CLAMP[1])))
    }

    /// One whitespace-separated row per class:
    /// `class_id mu_x mu_y mu_z s00 s01 s02 s10 s11 s12 s20 s21 s22 n_samples`.
    pub fn to_text(&self) -> String {
        let mut s = String::from(
            "# class_id mu_x mu_y mu_z s00 s01 s02 s10 s11 s12 s20 s21 s22 n_samples\n",
        );
        for d in self.classes.values() {
            write!(s, "{}", d.class_id).unwrap();
            for v in d.mu.iter().chain(d.sigma.iter().flatten()) {
                write!(s, " {v:?}").unwrap();
            }
            writeln!(s, " {}", d.n_samples).unwrap();
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut dists = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| Error::AnchorTable { line: i + 1, msg };
            let tok: Vec<&str> = line.split_whitespace().collect();
            if tok.len() != 14 {
                return Err(err(format!("expected 14 fields, found {}", tok.len())));
            }
            let class_id: u8 = tok[0].parse().map_err(|_| err(format!("bad class id {:?}", tok[0])))?;
            let mut vals = [0.0f64; 12];
            for (k, v) in vals.iter_mut().enumerate() {
                *v = tok[k + 1]
                    .parse()
                    .map_err(|_| err(format!("bad number {:?}", tok[k + 1])))?;
            }
            let n_samples = tok[13]
                .parse()
                .map_err(|_| err(format!("bad sample count {:?}", tok[13])))?;
            dists.push(AnchorDistribution {
                class_id,
                mu: [vals[0], vals[1], vals[2]],
                sigma: [
                    [vals[3], vals[4], vals[5]],
                    [vals[6], vals[7], vals[8]],
                    [vals[9], vals[10], vals[11]],
                ],
                n_samples,
            });
        }
        Self::new(dists)
    }
}

/// Fits a Gaussian per class over the normalized whole-class centroid of each
/// source. `class_map` maps raw source labels to class ids.
///
/// Uses the unbiased (n-1) covariance; with fewer than two samples the
/// covariance falls back to `FALLBACK_SIGMA^2 * I`.
pub fn fit_anchors(subjects: &[Subject], class_map: &BTreeMap<u8, u8>) -> Result<AnchorModel> {
    let mut dists = Vec::with_capacity(class_map.len());
    let mut missing = Vec::new();
    for (&raw, &id) in class_map {
        let pts: Vec<[f64; 3]> = subjects
            .iter()
            .filter_map(|s| {
                s.labels
                    .class_centroid(raw)
                    .map(|c| c.normalized(s.labels.dims()))
            })
            .collect();
        if pts.is_empty() {
            missing.push(raw);
            continue;
        }
        let n = pts.len();
        let mut mu = [0.0; 3];
        for p in &pts {
            for a in 0..3 {
                mu[a] += p[a];
            }
        }
        mu = mu.map(|v| v / n as f64);
        let mut sigma = [[0.0; 3]; 3];
        if n < 2 {
            for (a, row) in sigma.iter_mut().enumerate() {
                row[a] = FALLBACK_SIGMA * FALLBACK_SIGMA;
            }
        } else {
            for p in &pts {
                for r in 0..3 {
                    for c in 0..3 {
                        sigma[r][c] += (p[r] - mu[r]) * (p[c] - mu[c]);
                    }
                }
            }
            for row in &mut sigma {
                for v in row.iter_mut() {
                    *v /= (n - 1) as f64;
                }
            }
        }
        dists.push(AnchorDistribution {
            class_id: id,
            mu,
            sigma,
            n_samples: n,
        });
    }
    if !missing.is_empty() {
        return Err(Error::MissingClasses(missing));
    }
    AnchorModel::new(dists)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::scene_rng;
    use crate::volume::LabelGrid;

    fn point_subject(dims: [usize; 3], at: [usize; 3], class: u8) -> Subject {
        let mut g = LabelGrid::new(dims);
        g.set(at[0], at[1], at[2], class);
        Subject {
            id: format!("{at:?}"),
            labels: g,
        }
    }

    fn iso(class_id: u8, mu: [f64; 3], s: f64) -> AnchorDistribution {
        AnchorDistribution {
            class_id,
            mu,
            sigma: [[s * s, 0.0, 0.0], [0.0, s * s, 0.0], [0.0, 0.0, s * s]],
            n_samples: 5,
        }
    }

    #[test]
    fn single_source_center_uses_fallback() {
        let m = fit_anchors(&[point_subject([9, 9, 9], [4, 4, 4], 3)], &BTreeMap::from([(3, 1)])).unwrap();
        let d = m.get(1).unwrap();
        assert_eq!(d.mu, [0.5, 0.5, 0.5]);
        assert_eq!(d.n_samples, 1);
        assert_eq!(d.sigma[0][0], FALLBACK_SIGMA * FALLBACK_SIGMA);
        assert_eq!(d.sigma[2][2], d.sigma[0][0]);
        assert_eq!(d.sigma[0][1], 0.0);
    }

    #[test]
    fn five_source_unbiased_variance() {
        // x positions 8,9,10,11,12 on a 21-wide axis: 0.40..0.60
        let subs: Vec<Subject> = (8..=12)
            .map(|x| point_subject([21, 21, 21], [x, 10, 10], 2))
            .collect();
        let m = fit_anchors(&subs, &BTreeMap::from([(2, 1)])).unwrap();
        let d = m.get(1).unwrap();
        assert!((d.mu[0] - 0.5).abs() < 1e-12);
        assert!((d.sigma[0][0] - 0.00625).abs() < 1e-12);
        assert_eq!(d.sigma[1][1], 0.0);
        assert_eq!(d.n_samples, 5);
    }

    #[test]
    fn absent_class_fails() {
        let subs = [point_subject([5, 5, 5], [1, 1, 1], 2)];
        assert!(matches!(
            fit_anchors(&subs, &BTreeMap::from([(2, 1), (6, 2)])),
            Err(Error::MissingClasses(m)) if m == vec![6]
        ));
    }

    #[test]
    fn degenerate_sample_is_mean() {
        let m = AnchorModel::new([iso(1, [0.3, 0.6, 0.5], 0.0)]).unwrap();
        let mut rng = scene_rng(3, 0);
        for _ in 0..100 {
            let p = m.sample(1, &mut rng).unwrap();
            for a in 0..3 {
                assert!((p[a] - [0.3, 0.6, 0.5][a]).abs() < 1e-2);
            }
        }
    }

    #[test]
    fn isotropic_sample_spread() {
        let m = AnchorModel::new([iso(1, [0.5, 0.5, 0.5], 0.12)]).unwrap();
        let mut rng = scene_rng(11, 0);
        let pts: Vec<[f64; 3]> = (0..10_000).map(|_| m.sample(1, &mut rng).unwrap()).collect();
        for a in 0..3 {
            let mean = pts.iter().map(|p| p[a]).sum::<f64>() / pts.len() as f64;
            let var = pts.iter().map(|p| (p[a] - mean).powi(2)).sum::<f64>() / (pts.len() - 1) as f64;
            let sd = var.sqrt();
            assert!((0.10..=0.14).contains(&sd), "axis {a} sd {sd}");
        }
        assert!(pts.iter().flatten().all(|v| (0.02..=0.98).contains(v)));
    }

    #[test]
    fn seeded_samples_repeat() {
        let m = AnchorModel::new([iso(1, [0.5, 0.4, 0.5], 0.05)]).unwrap();
        let a: Vec<_> = {
            let mut r = scene_rng(5, 2);
            (0..10).map(|_| m.sample(1, &mut r).unwrap()).collect()
        };
        let b: Vec<_> = {
            let mut r = scene_rng(5, 2);
            (0..10).map(|_| m.sample(1, &mut r).unwrap()).collect()
        };
        assert_eq!(a, b);
    }

    #[test]
    fn text_roundtrip_is_exact() {
        let mut d = iso(4, [0.123456789, 0.5, 0.987], 0.0371);
        d.sigma[0][1] = 1e-5 / 3.0;
        d.sigma[1][0] = 1e-5 / 3.0;
        let m = AnchorModel::new([iso(1, [0.1, 0.2, 0.3], 0.12), d]).unwrap();
        let text = m.to_text();
        let back = AnchorModel::from_text(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_text(), text);
    }

    #[test]
    fn malformed_table_reports_line() {
        let err = AnchorModel::from_text("# header\n1 0.5 0.5\n").unwrap_err();
        assert!(matches!(err, Error::AnchorTable { line: 2, .. }));
    }
}
