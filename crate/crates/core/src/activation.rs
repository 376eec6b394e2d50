//! Piecewise-linear activations used by the auction network, plus the smooth
//! softmax/sigmoid pair kept for teacher networks.

/// Threshold `τ` and support size of the simplex projection of `x`.
///
/// `sparsemax(x)_r = max(x_r − τ, 0)`; the support is the set of
/// coordinates strictly above `τ`.
pub fn sparsemax_threshold(x: &[f64]) -> (f64, usize) {
    assert!(!x.is_empty(), "sparsemax of an empty vector");
    let mut sorted = x.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut support = 0;
    let mut support_sum = 0.0;
    for (i, &v) in sorted.iter().enumerate() {
        cumsum += v;
        if 1.0 + (i + 1) as f64 * v > cumsum {
            support = i + 1;
            support_sum = cumsum;
        }
    }
    ((support_sum - 1.0) / support as f64, support)
}

/// Euclidean projection onto the probability simplex.
pub fn sparsemax(x: &[f64]) -> Vec<f64> {
    let (tau, _) = sparsemax_threshold(x);
    x.iter().map(|&v| (v - tau).max(0.0)).collect()
}

/// Support used for differentiation: coordinates with `x_r ≥ τ`, so tied
/// coordinates are included.
pub fn sparsemax_support(x: &[f64]) -> Vec<bool> {
    let (tau, _) = sparsemax_threshold(x);
    x.iter().map(|&v| v >= tau).collect()
}

/// Jacobian `∂ sparsemax(x) / ∂x` as a dense row-major square matrix.
pub fn sparsemax_jacobian(x: &[f64]) -> Vec<Vec<f64>> {
    let support = sparsemax_support(x);
    let size = support.iter().filter(|&&s| s).count() as f64;
    let d = x.len();
    let mut jac = vec![vec![0.0; d]; d];
    for r in 0..d {
        for c in 0..d {
            if support[r] && support[c] {
                jac[r][c] = if r == c { 1.0 } else { 0.0 } - 1.0 / size;
            }
        }
    }
    jac
}

/// Vector-Jacobian product of sparsemax: on the support, subtract the mean
/// of the incoming adjoint; zero elsewhere.
pub(crate) fn sparsemax_vjp(support: &[bool], upstream: &[f64], out: &mut [f64]) {
    let (sum, count) = support
        .iter()
        .zip(upstream)
        .filter(|(s, _)| **s)
        .fold((0.0, 0usize), |(s, c), (_, &g)| (s + g, c + 1));
    let mean = sum / count as f64;
    for ((o, &s), &g) in out.iter_mut().zip(support).zip(upstream) {
        *o = if s { g - mean } else { 0.0 };
    }
}

/// `clamp(x/4 + 1/2, 0, 1)`: slope of the logistic at the origin, saturating
/// at ±2.
pub fn hard_sigmoid(x: f64) -> f64 {
    (0.25 * x + 0.5).clamp(0.0, 1.0)
}

/// Derivative of [`hard_sigmoid`]; the breakpoints take the inner slope.
pub fn hard_sigmoid_slope(x: f64) -> f64 {
    if (-2.0..=2.0).contains(&x) {
        0.25
    } else {
        0.0
    }
}

pub fn softmax(x: &[f64]) -> Vec<f64> {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = x.iter().map(|&v| (v - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    /// Brute-force minimizer of ½‖x − z‖² over a grid on the 1-simplex.
    fn grid_projection_2d(x: [f64; 2]) -> [f64; 2] {
        let steps = 200_000;
        let mut best = (f64::INFINITY, [0.0, 0.0]);
        for i in 0..=steps {
            let z0 = i as f64 / steps as f64;
            let z = [z0, 1.0 - z0];
            let d = (x[0] - z[0]).powi(2) + (x[1] - z[1]).powi(2);
            if d < best.0 {
                best = (d, z);
            }
        }
        best.1
    }

    /// Brute-force minimizer over a grid on the 2-simplex.
    fn grid_projection_3d(x: [f64; 3]) -> [f64; 3] {
        let steps = 1500;
        let mut best = (f64::INFINITY, [0.0; 3]);
        for i in 0..=steps {
            for j in 0..=(steps - i) {
                let z = [
                    i as f64 / steps as f64,
                    j as f64 / steps as f64,
                    (steps - i - j) as f64 / steps as f64,
                ];
                let d: f64 = (0..3).map(|r| (x[r] - z[r]).powi(2)).sum();
                if d < best.0 {
                    best = (d, z);
                }
            }
        }
        best.1
    }

    #[test]
    fn sparsemax_examples() {
        assert!(close(&sparsemax(&[0.0, 0.0]), &[0.5, 0.5], 1e-15));
        let z = sparsemax(&[1.5, 0.3]);
        assert!(close(&z, &[1.0, 0.0], 1e-15));
        assert!(close(&z, &grid_projection_2d([1.5, 0.3]), 1e-5));
        let z = sparsemax(&[0.2, 0.5, 0.1]);
        let expected = [0.8 / 3.0, 1.7 / 3.0, 0.5 / 3.0];
        assert!(close(&z, &expected, 1e-12));
        assert!(close(&z, &[0.2667, 0.5667, 0.1667], 1e-4));
        assert!(close(&z, &grid_projection_3d([0.2, 0.5, 0.1]), 1e-3));
    }

    #[test]
    fn jacobian_examples() {
        let j = sparsemax_jacobian(&[0.0, 0.0]);
        assert_eq!(j, vec![vec![0.5, -0.5], vec![-0.5, 0.5]]);
        let j = sparsemax_jacobian(&[1.5, 0.3]);
        assert!(j.iter().flatten().all(|&v| v == 0.0));
        let j = sparsemax_jacobian(&[0.2, 0.5, 0.1]);
        for row in &j {
            assert!(row.iter().sum::<f64>().abs() < 1e-15);
        }
    }

    #[test]
    fn jacobian_matches_finite_differences_off_kinks() {
        let h = 1e-5;
        for x in [[1.5, 0.3, -0.2], [0.2, 0.5, 0.1], [0.9, 0.85, -3.0]] {
            let jac = sparsemax_jacobian(&x);
            for c in 0..3 {
                let mut xp = x;
                let mut xm = x;
                xp[c] += h;
                xm[c] -= h;
                let (zp, zm) = (sparsemax(&xp), sparsemax(&xm));
                for r in 0..3 {
                    let fd = (zp[r] - zm[r]) / (2.0 * h);
                    assert!((fd - jac[r][c]).abs() < 1e-8, "{x:?} [{r}][{c}]");
                }
            }
        }
    }

    #[test]
    fn tie_joins_support() {
        // τ = 0 exactly lands on the third coordinate.
        let x = [0.5, 0.5, 0.0];
        assert_eq!(sparsemax(&x), vec![0.5, 0.5, 0.0]);
        assert_eq!(sparsemax_support(&x), vec![true, true, true]);
        assert_eq!(sparsemax_jacobian(&x), sparsemax_jacobian(&x));
    }

    #[test]
    fn hard_sigmoid_examples() {
        assert_eq!(hard_sigmoid(0.0), 0.5);
        assert_eq!(hard_sigmoid(10.0), 1.0);
        assert_eq!(hard_sigmoid(1.0), 0.75);
        assert_eq!(hard_sigmoid(-2.5), 0.0);
        assert_eq!(hard_sigmoid_slope(3.0), 0.0);
        assert_eq!(hard_sigmoid_slope(2.0), 0.25);
    }

    #[test]
    fn softmax_sums_to_one() {
        let z = softmax(&[1000.0, 999.0, -5.0]);
        assert!((z.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!((sigmoid(0.0) - 0.5).abs() < 1e-15);
    }
}
