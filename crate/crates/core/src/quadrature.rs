//! Fixed and adaptive quadrature rules.

/// Gauss-Legendre nodes on `[-1, 1]`, order 8 (exact for degree <= 15).
const GL8_NODES: [f64; 8] = [
    -0.960_289_856_497_536_3,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];

const GL8_WEIGHTS: [f64; 8] = [
    0.101_228_536_290_376_3,
    0.222_381_034_453_374_5,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362,
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

/// Order-8 Gauss-Legendre nodes and weights mapped to `[a, b]`.
pub fn gauss8_nodes(a: f64, b: f64) -> [(f64, f64); 8] {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut out = [(0.0, 0.0); 8];
    for (k, slot) in out.iter_mut().enumerate() {
        *slot = (mid + half * GL8_NODES[k], half * GL8_WEIGHTS[k]);
    }
    out
}

/// Order-8 Gauss-Legendre approximation of `int_a^b f`.
pub fn gauss8(a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
    gauss8_nodes(a, b)
        .iter()
        .map(|&(x, w)| w * f(x))
        .sum::<f64>()
}

/// Adaptive Simpson quadrature to absolute tolerance `tol`.
pub fn adaptive_simpson(a: f64, b: f64, tol: f64, f: &impl Fn(f64) -> f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Trapezoid rule over tabulated samples `(t_k, y_k)`.
pub fn trapezoid(ts: &[f64], ys: &[f64]) -> f64 {
    debug_assert_eq!(ts.len(), ys.len());
    ts.windows(2)
        .zip(ys.windows(2))
        .map(|(t, y)| 0.5 * (t[1] - t[0]) * (y[0] + y[1]))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss8_is_exact_to_degree_15() {
        for deg in 0..=15 {
            let exact = (2.0f64.powi(deg + 1) - (-1.0f64).powi(deg + 1)) / (deg + 1) as f64;
            let approx = gauss8(-1.0, 2.0, |x| x.powi(deg));
            assert!(
                (approx - exact).abs() <= 1e-12 * exact.abs().max(1.0),
                "degree {deg}: {approx} vs {exact}"
            );
        }
    }

    #[test]
    fn weights_sum_to_interval_length() {
        let s: f64 = gauss8_nodes(0.5, 3.0).iter().map(|p| p.1).sum();
        assert!((s - 2.5).abs() < 1e-14);
    }

    #[test]
    fn simpson_reaches_tolerance() {
        let v = adaptive_simpson(0.0, std::f64::consts::PI, 1e-12, &|x: f64| x.sin());
        assert!((v - 2.0).abs() < 1e-10);
    }

    #[test]
    fn trapezoid_integrates_linear_exactly() {
        let ts = [0.0, 0.3, 1.0, 2.5];
        let ys: Vec<f64> = ts.iter().map(|t| 2.0 * t + 1.0).collect();
        assert!((trapezoid(&ts, &ys) - (2.5 * 2.5 + 2.5)).abs() < 1e-14);
    }
}
