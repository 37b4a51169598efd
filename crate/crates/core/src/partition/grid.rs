use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{Error, Result};
use crate::rng::Fingerprint;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum GridConstruction {
    Circle2d,
    Sphere3d,
    Generalized,
}

/// `k` unit directions in `R^d`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FibonacciGrid {
    pub k: usize,
    pub dim: usize,
    pub construction: GridConstruction,
    pub directions: Vec<f64>,
}

impl FibonacciGrid {
    #[inline]
    pub fn direction(&self, j: usize) -> &[f64] {
        &self.directions[j * self.dim..(j + 1) * self.dim]
    }

    pub fn fingerprint(&self) -> u64 {
        Fingerprint::default().u64(self.k as u64).u64(self.dim as u64).f64s(&self.directions).finish()
    }
}

const GOLDEN: f64 = 1.618_033_988_749_895;

#[inline]
fn frac(x: f64) -> f64 {
    x - libm::floor(x)
}

/// Quasi-uniform directions on the unit sphere of `R^d`.
///
/// * `d = 2`: `k` equally spaced angles, offset by half a step. On the
///   circle the Fibonacci construction has only its evenly spaced
///   coordinate left.
/// * `d = 3`: Fibonacci sphere, `z_j = 1 - (2j + 1) / k` with azimuth
///   advancing by the golden angle.
/// * `d > 3`: rank-1 Kronecker lattice `frac(1/2 + j alpha)` with
///   `alpha_i = g^-i`, `g` the real root of `x^(d+1) = x + 1`, pushed
///   through the normal inverse CDF per component and normalized.
pub fn fibonacci_grid(k: usize, d: usize) -> Result<FibonacciGrid> {
    if k < 1 || d < 2 {
        return Err(Error::Config(alloc::format!("grid needs k >= 1 and d >= 2, got k={k}, d={d}")));
    }
    let mut directions = Vec::with_capacity(k * d);
    let construction = match d {
        2 => {
            for j in 0..k {
                let theta = 2.0 * PI * (j as f64 + 0.5) / k as f64;
                directions.extend_from_slice(&[libm::cos(theta), libm::sin(theta)]);
            }
            GridConstruction::Circle2d
        }
        3 => {
            let step = 1.0 / (GOLDEN * GOLDEN);
            for j in 0..k {
                let z = 1.0 - (2 * j + 1) as f64 / k as f64;
                let r = libm::sqrt((1.0 - z * z).max(0.0));
                let phi = 2.0 * PI * frac(j as f64 * step);
                directions.extend_from_slice(&[r * libm::cos(phi), r * libm::sin(phi), z]);
            }
            GridConstruction::Sphere3d
        }
        _ => {
            let g = generalized_golden_ratio(d);
            let alpha: Vec<f64> = (1..=d as i32).map(|i| libm::pow(g, -f64::from(i))).collect();
            let mut point = alloc::vec![0.0; d];
            for j in 1..=k {
                for (p, &a) in point.iter_mut().zip(&alpha) {
                    *p = inverse_normal_cdf(frac(0.5 + j as f64 * a));
                }
                let norm = libm::sqrt(point.iter().map(|v| v * v).sum::<f64>());
                directions.extend(point.iter().map(|v| v / norm));
            }
            GridConstruction::Generalized
        }
    };
    Ok(FibonacciGrid { k, dim: d, construction, directions })
}

/// Real root of `x^(d+1) = x + 1` (the golden ratio for `d = 1`).
pub fn generalized_golden_ratio(d: usize) -> f64 {
    let e = 1.0 / (d as f64 + 1.0);
    let mut x = 2.0f64;
    for _ in 0..200 {
        let next = libm::pow(1.0 + x, e);
        if next == x {
            break;
        }
        x = next;
    }
    x
}

/// Standard normal quantile function (rational approximation refined by
/// one Halley step), for `p` in `(0, 1)`.
pub fn inverse_normal_cdf(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.024_25;
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let x = if p < P_LOW {
        let q = libm::sqrt(-2.0 * libm::log(p));
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = libm::sqrt(-2.0 * libm::log(1.0 - p));
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    let e = 0.5 * libm::erfc(-x / core::f64::consts::SQRT_2) - p;
    let u = e * libm::sqrt(2.0 * PI) * libm::exp(x * x / 2.0);
    x - u / (1.0 + x * u / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn angle_deg(a: &[f64], b: &[f64]) -> f64 {
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        libm::acos(dot.clamp(-1.0, 1.0)).to_degrees()
    }

    #[test]
    fn circle_gaps_are_even() {
        let g = fibonacci_grid(10, 2).unwrap();
        let mut angles: Vec<f64> =
            (0..10).map(|j| libm::atan2(g.direction(j)[1], g.direction(j)[0]).to_degrees().rem_euclid(360.0)).collect();
        angles.sort_by(f64::total_cmp);
        for i in 0..10 {
            let gap = if i == 9 { angles[0] + 360.0 - angles[9] } else { angles[i + 1] - angles[i] };
            assert!((gap - 36.0).abs() <= 0.2 * 36.0);
        }
    }

    #[test]
    fn sphere_min_angle() {
        let g = fibonacci_grid(100, 3).unwrap();
        let mut min = 180.0f64;
        for i in 0..100 {
            for j in (i + 1)..100 {
                min = min.min(angle_deg(g.direction(i), g.direction(j)));
            }
        }
        assert!(min > 10.0, "{min}");
    }

    #[test]
    fn unit_norm_and_distinct() {
        for (k, d) in [(1, 2), (7, 3), (50, 4), (100, 16), (100, 128)] {
            let g = fibonacci_grid(k, d).unwrap();
            for j in 0..k {
                let n: f64 = g.direction(j).iter().map(|v| v * v).sum();
                assert!((libm::sqrt(n) - 1.0).abs() < 1e-9);
                for i in 0..j {
                    assert_ne!(g.direction(i), g.direction(j));
                }
            }
        }
    }

    #[test]
    fn deterministic() {
        assert_eq!(fibonacci_grid(100, 64).unwrap(), fibonacci_grid(100, 64).unwrap());
    }

    #[test]
    fn invalid_shapes() {
        assert!(fibonacci_grid(0, 3).is_err());
        assert!(fibonacci_grid(3, 1).is_err());
    }

    #[test]
    fn golden_ratio_roots() {
        assert!((generalized_golden_ratio(1) - GOLDEN).abs() < 1e-12);
        // plastic number
        assert!((generalized_golden_ratio(2) - 1.324_717_957_244_746).abs() < 1e-12);
    }

    #[test]
    fn normal_quantiles() {
        assert_eq!(inverse_normal_cdf(0.5), 0.0);
        assert!((inverse_normal_cdf(0.975) - 1.959_963_984_540_054).abs() < 1e-12);
        assert!((inverse_normal_cdf(0.001) + 3.090_232_306_167_813).abs() < 1e-10);
    }
}
