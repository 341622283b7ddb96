//! Orientation-invariant re-expression of a cycle in the (ξ, ψ, ζ) frame:
//! ζ along mean gravity, ξ along the dominant horizontal acceleration, ψ = ζ × ξ.

use crate::cycles::GaitCycle;
use crate::error::{GaitError, Result};
use crate::linalg::{cross, dot, norm, symmetric_eigen, Vec3};

/// Right-handed orthonormal frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub zeta: Vec3,
    pub xi: Vec3,
    pub psi: Vec3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrientedCycle {
    pub a_xi: Vec<f64>,
    pub a_psi: Vec<f64>,
    pub a_zeta: Vec<f64>,
    pub g_xi: Vec<f64>,
    pub g_psi: Vec<f64>,
    pub g_zeta: Vec<f64>,
    pub frame: Frame,
    pub gravity: Vec3,
}

impl OrientedCycle {
    pub fn len(&self) -> usize {
        self.a_xi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a_xi.is_empty()
    }
}

/// Per-axis mean of the cycle's acceleration.
pub fn estimate_gravity(accel: &[Vec<f64>; 3]) -> Result<Vec3> {
    let n = accel[0].len();
    if n == 0 {
        return Err(GaitError::InsufficientData("empty cycle".into()));
    }
    Ok([0, 1, 2].map(|k| accel[k].iter().sum::<f64>() / n as f64))
}

pub fn vertical_versor(rho: &Vec3) -> Result<Vec3> {
    let n = norm(rho);
    if !(n > 1e-6) {
        return Err(GaitError::DegenerateCycle(format!(
            "gravity estimate has norm {n:.3e}"
        )));
    }
    Ok([rho[0] / n, rho[1] / n, rho[2] / n])
}

/// `Mᵀ v` for a 3×n matrix stored as three rows.
pub fn project(m: &[Vec<f64>; 3], v: &Vec3) -> Vec<f64> {
    (0..m[0].len())
        .map(|i| m[0][i] * v[0] + m[1][i] * v[1] + m[2][i] * v[2])
        .collect()
}

/// `A − ζ a_ζᵀ`: removes the vertical component of every column.
pub fn flatten(a: &[Vec<f64>; 3], zeta: &Vec3, a_zeta: &[f64]) -> [Vec<f64>; 3] {
    [0, 1, 2].map(|k| {
        a[k].iter()
            .zip(a_zeta)
            .map(|(x, z)| x - zeta[k] * z)
            .collect()
    })
}

/// Row-centred sample covariance (divisor `n − 1`), symmetrized.
pub fn covariance3(a: &[Vec<f64>; 3]) -> [[f64; 3]; 3] {
    let n = a[0].len();
    let means = [0, 1, 2].map(|k| a[k].iter().sum::<f64>() / n as f64);
    let mut s = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in i..3 {
            let v: f64 = a[i]
                .iter()
                .zip(&a[j])
                .map(|(x, y)| (x - means[i]) * (y - means[j]))
                .sum::<f64>()
                / (n - 1) as f64;
            s[i][j] = v;
            s[j][i] = v;
        }
    }
    s
}

fn skewness(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let m2 = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let m3 = x.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / n;
    if m2 <= 0.0 {
        0.0
    } else {
        m3 / m2.powf(1.5)
    }
}

/// Dominant direction of the flattened acceleration.
///
/// The sign is chosen so that the projection of the data has non-negative
/// skewness; an exactly symmetric projection falls back to making the first
/// non-zero component positive.
pub fn pca_heading(a_f: &[Vec<f64>; 3]) -> Result<Vec3> {
    let n = a_f[0].len();
    if n < 3 {
        return Err(GaitError::InsufficientData(format!(
            "heading needs at least 3 samples, got {n}"
        )));
    }
    let cov = covariance3(a_f);
    let eig = symmetric_eigen(&cov.iter().map(|r| r.to_vec()).collect::<Vec<_>>())?;
    let (l1, l2) = (eig.values[0], eig.values[1]);
    let ratio = if l2 > 0.0 { l1 / l2 } else if l1 > 0.0 { f64::INFINITY } else { 1.0 };
    if ratio < 1.0 + 1e-6 {
        return Err(GaitError::HeadingDegenerate { ratio });
    }
    let mut xi: Vec3 = [eig.vectors[0][0], eig.vectors[0][1], eig.vectors[0][2]];
    let nrm = norm(&xi);
    xi = xi.map(|v| v / nrm);
    let skew = skewness(&project(a_f, &xi));
    let flip = if skew.abs() > 1e-12 {
        skew < 0.0
    } else {
        xi.iter().find(|v| v.abs() > 1e-12).is_some_and(|v| *v < 0.0)
    };
    if flip {
        xi = xi.map(|v| -v);
    }
    Ok(xi)
}

/// Builds the cycle's frame from its acceleration.
pub fn cycle_frame(accel: &[Vec<f64>; 3]) -> Result<(Frame, Vec3)> {
    let gravity = estimate_gravity(accel)?;
    let zeta = vertical_versor(&gravity)?;
    let a_zeta = project(accel, &zeta);
    let flat = flatten(accel, &zeta, &a_zeta);
    let xi = pca_heading(&flat)?;
    // Re-orthogonalize against ζ to remove rounding drift.
    let d = dot(&xi, &zeta);
    let mut xi = [xi[0] - d * zeta[0], xi[1] - d * zeta[1], xi[2] - d * zeta[2]];
    let nx = norm(&xi);
    xi = xi.map(|v| v / nx);
    let psi = cross(&zeta, &xi);
    Ok((Frame { zeta, xi, psi }, gravity))
}

pub fn transform_cycle(cycle: &GaitCycle) -> Result<OrientedCycle> {
    if cycle.accel[0].len() != cycle.gyro[0].len() {
        return Err(GaitError::ShapeMismatch("accel and gyro cycle lengths differ".into()));
    }
    let (frame, gravity) = cycle_frame(&cycle.accel)?;
    Ok(OrientedCycle {
        a_xi: project(&cycle.accel, &frame.xi),
        a_psi: project(&cycle.accel, &frame.psi),
        a_zeta: project(&cycle.accel, &frame.zeta),
        g_xi: project(&cycle.gyro, &frame.xi),
        g_psi: project(&cycle.gyro, &frame.psi),
        g_zeta: project(&cycle.gyro, &frame.zeta),
        frame,
        gravity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{mat_vec, quat_to_matrix, Mat3};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn rotate(m: &[Vec<f64>; 3], r: &Mat3) -> [Vec<f64>; 3] {
        let n = m[0].len();
        let mut out: [Vec<f64>; 3] = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        for i in 0..n {
            let v = mat_vec(r, &[m[0][i], m[1][i], m[2][i]]);
            for k in 0..3 {
                out[k][i] = v[k];
            }
        }
        out
    }

    fn walking_cycle(n: usize) -> GaitCycle {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let noise = Normal::new(0.0, 0.05).unwrap();
        let th = |i: usize| 2.0 * std::f64::consts::PI * i as f64 / n as f64;
        let accel = [
            (0..n).map(|i| 1.5 * th(i).sin() + 0.6 * (2.0 * th(i)).cos() + noise.sample(&mut rng)).collect(),
            (0..n).map(|i| 0.4 * (3.0 * th(i) + 0.5).sin() + noise.sample(&mut rng)).collect(),
            (0..n).map(|i| 9.81 - 2.0 * th(i).cos() + 0.5 * (2.0 * th(i)).sin() + noise.sample(&mut rng)).collect(),
        ];
        let gyro = [
            (0..n).map(|i| 0.2 * th(i).sin()).collect(),
            (0..n).map(|i| 0.9 * (th(i) + 1.0).sin()).collect(),
            (0..n).map(|i| 0.1 * (2.0 * th(i)).cos()).collect(),
        ];
        GaitCycle { accel, gyro, start_index: 0, end_index: n }
    }

    #[test]
    fn gravity_and_versor() {
        let n = 200;
        let x: Vec<f64> = (0..n).map(|i| (2.0 * std::f64::consts::PI * i as f64 / n as f64).sin()).collect();
        let g = estimate_gravity(&[x, vec![0.0; n], vec![9.8; n]]).unwrap();
        assert!(g[0].abs() < 1e-9 && g[1] == 0.0 && (g[2] - 9.8).abs() < 1e-12);
        assert_eq!(vertical_versor(&[0.0, 0.0, 2.0]).unwrap(), [0.0, 0.0, 1.0]);
        let v = vertical_versor(&[3.0, 0.0, 4.0]).unwrap();
        assert!((v[0] - 0.6).abs() < 1e-15 && (v[2] - 0.8).abs() < 1e-15);
        assert!(matches!(vertical_versor(&[0.0; 3]), Err(GaitError::DegenerateCycle(_))));
    }

    #[test]
    fn projection_and_flatten() {
        let m = [vec![1.0; 4], vec![2.0; 4], vec![3.0; 4]];
        assert_eq!(project(&m, &[1.0, 0.0, 0.0]), vec![1.0; 4]);
        assert_eq!(project(&m, &[0.0, 0.0, 1.0]), m[2]);

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a: [Vec<f64>; 3] = [0, 1, 2].map(|_| (0..50).map(|_| rng.random_range(-5.0..5.0)).collect());
        let zeta = vertical_versor(&[0.3, -1.0, 2.0]).unwrap();
        let az = project(&a, &zeta);
        for i in 0..50 {
            let oracle = a[0][i] * zeta[0] + a[1][i] * zeta[1] + a[2][i] * zeta[2];
            assert!((az[i] - oracle).abs() < 1e-12);
        }
        let f = flatten(&a, &zeta, &az);
        for c in project(&f, &zeta) {
            assert!(c.abs() < 1e-9);
        }
        let parallel: [Vec<f64>; 3] = [vec![2.0 * zeta[0]], vec![2.0 * zeta[1]], vec![2.0 * zeta[2]]];
        let pz = project(&parallel, &zeta);
        let f = flatten(&parallel, &zeta, &pz);
        assert!(f.iter().flatten().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn heading_rank_one_and_isotropic() {
        let line = [vec![1.0, -2.0, 3.5, 0.2, -0.7], vec![0.0; 5], vec![0.0; 5]];
        let xi = pca_heading(&line).unwrap();
        assert!((xi[0] - 1.0).abs() < 1e-12, "{xi:?}");

        let n = 360;
        let circle = [
            (0..n).map(|i| (i as f64).to_radians().cos()).collect(),
            (0..n).map(|i| (i as f64).to_radians().sin()).collect(),
            vec![0.0; n],
        ];
        assert!(matches!(pca_heading(&circle), Err(GaitError::HeadingDegenerate { .. })));
    }

    #[test]
    fn heading_of_anisotropic_cloud() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let sx = Normal::new(0.0, 2.0).unwrap();
        let sy = Normal::new(0.0, 1.0).unwrap();
        let a = [
            (0..10_000).map(|_| sx.sample(&mut rng)).collect(),
            (0..10_000).map(|_| sy.sample(&mut rng)).collect(),
            vec![0.0; 10_000],
        ];
        let xi = pca_heading(&a).unwrap();
        let angle = xi[0].abs().min(1.0).acos().to_degrees();
        assert!(angle < 2.0, "angle {angle}");
        // Eigenvector property.
        let cov = covariance3(&a);
        let lambda = dot(&mat_vec(&cov, &xi), &xi);
        let r = mat_vec(&cov, &xi);
        let res = norm(&[r[0] - lambda * xi[0], r[1] - lambda * xi[1], r[2] - lambda * xi[2]]);
        assert!(res <= 1e-8 * lambda);
    }

    #[test]
    fn quiet_cycle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let nx = Normal::new(0.0, 1e-3).unwrap();
        let ny = Normal::new(0.0, 1e-4).unwrap();
        let n = 200;
        let cycle = GaitCycle {
            accel: [
                (0..n).map(|_| nx.sample(&mut rng)).collect(),
                (0..n).map(|_| ny.sample(&mut rng)).collect(),
                vec![9.8; n],
            ],
            gyro: [vec![0.0; n], vec![0.0; n], vec![0.0; n]],
            start_index: 0,
            end_index: n,
        };
        let oc = transform_cycle(&cycle).unwrap();
        for i in 0..n {
            assert!((oc.a_zeta[i] - 9.8).abs() < 1e-2);
            assert!(oc.a_xi[i].abs() < 1e-2 && oc.a_psi[i].abs() < 1e-2);
        }
    }

    #[test]
    fn frame_energy_and_rotation_invariance() {
        let cycle = walking_cycle(220);
        let base = transform_cycle(&cycle).unwrap();
        let f = base.frame;
        for (a, b) in [(f.zeta, f.xi), (f.zeta, f.psi), (f.xi, f.psi)] {
            assert!(dot(&a, &b).abs() < 1e-9);
        }
        for v in [f.zeta, f.xi, f.psi] {
            assert!((norm(&v) - 1.0).abs() < 1e-9);
        }
        let c = cross(&f.zeta, &f.xi);
        assert!((0..3).all(|k| (c[k] - f.psi[k]).abs() < 1e-9));
        for i in 0..220 {
            let raw = cycle.accel[0][i].powi(2) + cycle.accel[1][i].powi(2) + cycle.accel[2][i].powi(2);
            let t = base.a_xi[i].powi(2) + base.a_psi[i].powi(2) + base.a_zeta[i].powi(2);
            assert!((raw - t).abs() < 1e-9);
        }
        assert!(f.zeta[2] > 0.99);
        assert!(f.xi[0].abs() > 0.99);

        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..10 {
            let q: [f64; 4] = [0, 1, 2, 3].map(|_| rng.random_range(-1.0..1.0));
            let r = quat_to_matrix(q);
            let rotated = GaitCycle {
                accel: rotate(&cycle.accel, &r),
                gyro: rotate(&cycle.gyro, &r),
                ..cycle.clone()
            };
            let oc = transform_cycle(&rotated).unwrap();
            let agree: f64 = oc.a_xi.iter().zip(&base.a_xi).map(|(a, b)| a * b).sum();
            let sign = agree.signum();
            for i in 0..220 {
                assert!((oc.a_zeta[i] - base.a_zeta[i]).abs() < 1e-6);
                assert!((oc.g_zeta[i] - base.g_zeta[i]).abs() < 1e-6);
                assert!((sign * oc.a_xi[i] - base.a_xi[i]).abs() < 1e-6);
                assert!((sign * oc.a_psi[i] - base.a_psi[i]).abs() < 1e-6);
                assert!((sign * oc.g_xi[i] - base.g_xi[i]).abs() < 1e-6);
                assert!((sign * oc.g_psi[i] - base.g_psi[i]).abs() < 1e-6);
            }
        }
    }
}
