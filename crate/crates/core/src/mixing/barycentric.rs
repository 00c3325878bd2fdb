use super::linalg::Lu;
use super::{MixingIndexSet, SimplexWeight};
use crate::distributions::LabeledDataset;
use crate::error::{Error, Result};
use crate::math::norm;

/// Relative residual above which a barycentric solve is rejected.
const RESIDUAL_TOL: f64 = 1e-8;

/// Affine chart of a `d`-simplex in `R^d`, with the difference matrix factored
/// once so many points can be located cheaply.
#[derive(Debug, Clone)]
pub struct SimplexChart {
    d: usize,
    anchor: Vec<f64>,
    // row-major d x d, column c = vertex c - anchor
    l: Vec<f64>,
    lu: Lu,
    det: f64,
}

impl SimplexChart {
    /// `vertices` holds `d + 1` points of dimension `d`; the last is the anchor.
    pub fn new(vertices: &[&[f64]]) -> Result<Self> {
        if vertices.len() < 2 {
            return Err(Error::Parameter("a simplex needs at least two vertices".into()));
        }
        let d = vertices.len() - 1;
        for v in vertices {
            if v.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: v.len(),
                });
            }
        }
        let anchor = vertices[d].to_vec();
        let mut l = vec![0.0; d * d];
        for (c, v) in vertices[..d].iter().enumerate() {
            for r in 0..d {
                l[r * d + c] = v[r] - anchor[r];
            }
        }
        let lu = Lu::factor(l.clone(), d)
            .ok_or_else(|| Error::DegenerateSimplex("difference matrix is singular".into()))?;
        let det = lu.det();
        Ok(Self {
            d,
            anchor,
            l,
            lu,
            det,
        })
    }

    pub fn from_sigma(data: &LabeledDataset, sigma: &MixingIndexSet) -> Result<Self> {
        let vs: Vec<&[f64]> = sigma.indices.iter().map(|&i| data.point(i)).collect();
        Self::new(&vs)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// `det L` of the difference matrix.
    pub fn det(&self) -> f64 {
        self.det
    }

    pub fn weights(&self, z: &[f64]) -> Result<SimplexWeight> {
        if z.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: z.len(),
            });
        }
        let rhs: Vec<f64> = z.iter().zip(&self.anchor).map(|(a, b)| a - b).collect();
        let sol = self.lu.solve(&rhs);
        let resid: Vec<f64> = (0..self.d)
            .map(|r| {
                (0..self.d)
                    .map(|c| self.l[r * self.d + c] * sol[c])
                    .sum::<f64>()
                    - rhs[r]
            })
            .collect();
        let (rn, bn) = (norm(&resid), norm(&rhs));
        if !(rn <= RESIDUAL_TOL * bn) || sol.iter().any(|x| !x.is_finite()) {
            return Err(Error::DegenerateSimplex(format!(
                "residual {rn:e} against right-hand side {bn:e}"
            )));
        }
        let last = 1.0 - sol.iter().sum::<f64>();
        let mut w = sol;
        w.push(last);
        Ok(SimplexWeight::affine(w))
    }

    pub fn contains(&self, z: &[f64], tol: f64) -> Result<bool> {
        Ok(self.weights(z)?.is_inside(tol))
    }
}

/// Barycentric weights of `z` with respect to the tuple `sigma`.
pub fn lambda_from_point(
    data: &LabeledDataset,
    sigma: &MixingIndexSet,
    z: &[f64],
) -> Result<SimplexWeight> {
    if data.dim() != sigma.d() {
        return Err(Error::DimensionMismatch {
            expected: sigma.d(),
            got: data.dim(),
        });
    }
    SimplexChart::from_sigma(data, sigma)?.weights(z)
}

/// True iff every barycentric weight of `z` is at least `-tol`.
pub fn in_hull(data: &LabeledDataset, sigma: &MixingIndexSet, z: &[f64], tol: f64) -> Result<bool> {
    Ok(lambda_from_point(data, sigma, z)?.is_inside(tol))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tri() -> (LabeledDataset, MixingIndexSet) {
        let data = LabeledDataset::new(
            vec![vec![1.0, 0.0], vec![0.0, 2.0], vec![0.0, 0.0]],
            vec![0, 1, 0],
            2,
            0,
            "t",
        )
        .unwrap();
        (data, MixingIndexSet::new(vec![0, 1, 2], 10.0).unwrap())
    }

    #[test]
    fn anchor_maps_to_last_vertex() {
        let (data, s) = tri();
        let w = lambda_from_point(&data, &s, &[0.0, 0.0]).unwrap();
        assert_eq!(w.as_slice(), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn segment_affine_coordinates() {
        let data =
            LabeledDataset::new(vec![vec![2.0], vec![-1.0]], vec![0, 1], 2, 0, "t").unwrap();
        let s = MixingIndexSet::new(vec![0, 1], 10.0).unwrap();
        let z = 0.3 * 2.0 + 0.7 * -1.0;
        let w = lambda_from_point(&data, &s, &[z]).unwrap();
        assert!((w.as_slice()[0] - 0.3).abs() < 1e-14);
        assert!((w.as_slice()[1] - 0.7).abs() < 1e-14);
    }

    #[test]
    fn hull_examples() {
        let (data, s) = tri();
        let centroid = [1.0 / 3.0, 2.0 / 3.0];
        assert!(in_hull(&data, &s, &centroid, 1e-9).unwrap());
        // x1 + 2 (x1 - x3)
        assert!(!in_hull(&data, &s, &[3.0, 0.0], 1e-9).unwrap());
        // on the face opposite vertex 1
        assert!(in_hull(&data, &s, &[0.5, 0.0], 1e-9).unwrap());
    }

    #[test]
    fn degenerate_and_mismatched() {
        let data = LabeledDataset::new(
            vec![vec![1.0, 1.0], vec![2.0, 2.0], vec![0.0, 0.0]],
            vec![0, 0, 0],
            1,
            0,
            "t",
        )
        .unwrap();
        let s = MixingIndexSet::new(vec![0, 1, 2], 10.0).unwrap();
        assert!(matches!(
            lambda_from_point(&data, &s, &[0.5, 0.5]),
            Err(Error::DegenerateSimplex(_))
        ));
        let s1 = MixingIndexSet::new(vec![0, 2], 10.0).unwrap();
        assert!(matches!(
            lambda_from_point(&data, &s1, &[0.5, 0.5]),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
