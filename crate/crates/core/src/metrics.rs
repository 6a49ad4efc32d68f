//! Scalar measures of a run.

use alloc::format;

use crate::error::{CoreError, Result};
use crate::linalg::dist;
use crate::varifold::PointCloudVarifold;

/// `R(T) = sqrt(R0^2 - 2T)`, the radius of a circle shrinking by curvature.
pub fn reference_radius(r0: f64, t: f64) -> Result<f64> {
    let extinction = r0 * r0 / 2.0;
    if !(t < extinction) {
        return Err(CoreError::PastExtinction { time: t, extinction });
    }
    Ok(libm::sqrt(r0 * r0 - 2.0 * t))
}

/// `e(T) = (1/N) sum_i |R(T) - |x_i - c|| / R(T)`.
pub fn circle_error(positions: &[f64], dim: usize, center: &[f64], t: f64, r0: f64) -> Result<f64> {
    let r = reference_radius(r0, t)?;
    let n = positions.len() / dim;
    if n == 0 {
        return Err(CoreError::Input("circle error of an empty cloud".into()));
    }
    let sum: f64 = positions
        .chunks_exact(dim)
        .map(|x| libm::fabs(r - dist(x, center)))
        .sum();
    Ok(sum / (n as f64 * r))
}

/// Least-squares slope of `log e` against `log tau`.
pub fn convergence_order(table: &[(f64, f64)]) -> Result<f64> {
    if table.len() < 3 {
        return Err(CoreError::Input(format!(
            "convergence order needs at least 3 runs, got {}",
            table.len()
        )));
    }
    if let Some((tau, e)) = table.iter().find(|(tau, e)| !(*tau > 0.0 && *e > 0.0)) {
        return Err(CoreError::Input(format!(
            "convergence order needs positive step and error, got ({tau}, {e})"
        )));
    }
    let k = table.len() as f64;
    let (mut sx, mut sy) = (0.0, 0.0);
    for (tau, e) in table {
        sx += libm::log(*tau);
        sy += libm::log(*e);
    }
    let (mx, my) = (sx / k, sy / k);
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (tau, e) in table {
        let dx = libm::log(*tau) - mx;
        sxy += dx * (libm::log(*e) - my);
        sxx += dx * dx;
    }
    if sxx == 0.0 {
        return Err(CoreError::Input("convergence order needs distinct steps".into()));
    }
    Ok(sxy / sxx)
}

/// Length (`d = 1`) or area (`d = 2`) proxy: the total estimated mass.
pub fn measure_proxy(v: &PointCloudVarifold) -> f64 {
    v.total_mass()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;
    use proptest::prelude::*;

    fn ring(n: usize, r: f64) -> Vec<f64> {
        (0..n)
            .flat_map(|i| {
                let t = 2.0 * core::f64::consts::PI * i as f64 / n as f64;
                [r * libm::cos(t), r * libm::sin(t)]
            })
            .collect()
    }

    #[test]
    fn reference_radius_at_point_one() {
        let r = reference_radius(0.5, 0.1).unwrap();
        assert!((r - 0.223_606_797_749_979).abs() < 1e-15);
        assert!(matches!(reference_radius(0.5, 0.125), Err(CoreError::PastExtinction { .. })));
    }

    #[test]
    fn circle_error_values() {
        let r = reference_radius(0.5, 0.1).unwrap();
        assert!(circle_error(&ring(64, r), 2, &[0.0, 0.0], 0.1, 0.5).unwrap() < 1e-15);
        let e = circle_error(&ring(64, 1.1 * r), 2, &[0.0, 0.0], 0.1, 0.5).unwrap();
        assert!((e - 0.1).abs() < 1e-14);
        // explicit center: a translated ring measured about its own center
        let shifted: Vec<f64> = ring(64, r).chunks_exact(2).flat_map(|p| [p[0] + 3.0, p[1] - 1.0]).collect();
        assert!(circle_error(&shifted, 2, &[3.0, -1.0], 0.1, 0.5).unwrap() < 1e-14);
        assert!(circle_error(&[], 2, &[0.0, 0.0], 0.1, 0.5).is_err());
    }

    #[test]
    fn exact_orders() {
        let lin: Vec<(f64, f64)> = (0..5).map(|k| (0.1 / (1 << k) as f64, 3.0 * 0.1 / (1 << k) as f64)).collect();
        assert!((convergence_order(&lin).unwrap() - 1.0).abs() < 1e-12);
        let quad: Vec<(f64, f64)> = lin.iter().map(|(t, _)| (*t, 2.0 * t * t)).collect();
        assert!((convergence_order(&quad).unwrap() - 2.0).abs() < 1e-12);
        assert!(convergence_order(&lin[..2]).is_err());
        assert!(convergence_order(&[(0.1, 1.0), (0.05, 0.0), (0.025, 1.0)]).is_err());
    }

    #[test]
    fn empty_measure() {
        let v = PointCloudVarifold::from_positions(2, 1, Vec::new(), None).unwrap();
        assert_eq!(measure_proxy(&v), 0.0);
    }

    proptest! {
        #[test]
        fn order_invariant_under_error_scaling(a in 1e-3f64..1e3, p in 0.5f64..3.0) {
            let t: Vec<(f64, f64)> = (0..6).map(|k| {
                let tau = libm::pow(2.0, -(k as f64)) / 400.0;
                (tau, libm::pow(tau, p) * (1.0 + 0.1 * (k % 2) as f64))
            }).collect();
            let scaled: Vec<(f64, f64)> = t.iter().map(|(x, y)| (*x, a * y)).collect();
            let (s0, s1) = (convergence_order(&t).unwrap(), convergence_order(&scaled).unwrap());
            prop_assert!((s0 - s1).abs() < 1e-9);
        }
    }
}
