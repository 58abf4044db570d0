//! Shared helpers for integration tests: an independent numerical
//! likelihood minimizer (Nelder-Mead plus golden-section) used as the
//! oracle for the closed-form estimator, and finite-difference gradients.

use heston_mle::stats::SufficientStats;

/// `S(u,v) = a + bu + cv + d u^2/2 - 2uv + f v^2/2`, re-stated here
/// independently of the library internals.
pub fn quad_s(s: &SufficientStats, u: f64, v: f64) -> f64 {
    s.a + s.b * u + s.c * v + 0.5 * s.d * u * u - 2.0 * u * v + 0.5 * s.f * v * v
}

/// Negative log-likelihood `log(2w) + S(u,v)/(2w)`, restated.
pub fn nll(s: &SufficientStats, u: f64, v: f64, w: f64) -> f64 {
    (2.0 * w).ln() + quad_s(s, u, v) / (2.0 * w)
}

/// Generic Nelder-Mead minimizer (standard coefficients, restarted once
/// around the incumbent for polish).
pub fn nelder_mead(
    f: &dyn Fn(&[f64]) -> f64,
    start: &[f64],
    initial_step: f64,
    iterations: usize,
) -> Vec<f64> {
    let mut best = start.to_vec();
    let mut step = initial_step;
    for _ in 0..3 {
        best = nelder_mead_once(f, &best, step, iterations);
        step *= 1e-4;
    }
    best
}

fn nelder_mead_once(
    f: &dyn Fn(&[f64]) -> f64,
    start: &[f64],
    step: f64,
    iterations: usize,
) -> Vec<f64> {
    let n = start.len();
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(start.to_vec());
    for i in 0..n {
        let mut v = start.to_vec();
        v[i] += step;
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|x| f(x)).collect();

    for _ in 0..iterations {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&i, &j| values[i].partial_cmp(&values[j]).unwrap());
        let (best, worst, second_worst) = (order[0], order[n], order[n - 1]);
        if (values[worst] - values[best]).abs()
            <= 1e-15 * (1.0 + values[best].abs())
        {
            break;
        }

        let centroid: Vec<f64> = (0..n)
            .map(|d| {
                order[..n].iter().map(|&i| simplex[i][d]).sum::<f64>() / n as f64
            })
            .collect();
        let reflect: Vec<f64> = (0..n)
            .map(|d| centroid[d] + (centroid[d] - simplex[worst][d]))
            .collect();
        let fr = f(&reflect);

        if fr < values[best] {
            let expand: Vec<f64> = (0..n)
                .map(|d| centroid[d] + 2.0 * (centroid[d] - simplex[worst][d]))
                .collect();
            let fe = f(&expand);
            if fe < fr {
                simplex[worst] = expand;
                values[worst] = fe;
            } else {
                simplex[worst] = reflect;
                values[worst] = fr;
            }
        } else if fr < values[second_worst] {
            simplex[worst] = reflect;
            values[worst] = fr;
        } else {
            let contract: Vec<f64> = (0..n)
                .map(|d| centroid[d] + 0.5 * (simplex[worst][d] - centroid[d]))
                .collect();
            let fc = f(&contract);
            if fc < values[worst] {
                simplex[worst] = contract;
                values[worst] = fc;
            } else {
                // shrink toward the best vertex
                let anchor = simplex[best].clone();
                for i in 0..=n {
                    if i == best {
                        continue;
                    }
                    for d in 0..n {
                        simplex[i][d] = anchor[d] + 0.5 * (simplex[i][d] - anchor[d]);
                    }
                    values[i] = f(&simplex[i]);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..=n).collect();
    order.sort_by(|&i, &j| values[i].partial_cmp(&values[j]).unwrap());
    simplex[order[0]].clone()
}

/// Golden-section search for the minimum of a unimodal function on [lo, hi].
pub fn golden_section(f: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64, iterations: usize) -> f64 {
    let phi = (5.0f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..iterations {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = f(x2);
        }
    }
    0.5 * (lo + hi)
}

/// Numerically minimize the likelihood: the quadratic part over (u, v) by
/// Nelder-Mead, then the scale over w by golden-section. Fully independent
/// of the closed-form expressions under test.
pub fn numeric_mle(s: &SufficientStats) -> (f64, f64, f64) {
    let g = |x: &[f64]| quad_s(s, x[0], x[1]);
    let step = 1.0 + s.b.abs().max(s.c.abs());
    let uv = nelder_mead(&g, &[0.0, 0.0], step, 4000);
    let (u, v) = (uv[0], uv[1]);
    let h = |w: f64| nll(s, u, v, w);
    let hi = s.a.max(1.0);
    let w = golden_section(&h, 1e-12 * hi, 2.0 * hi, 300);
    (u, v, w)
}

/// Scale-free central finite-difference gradient of the likelihood at
/// (u, v, w): component `i` is `x_i * dL/dx_i`, evaluated with a
/// multiplicative step so the truncation error stays O(h^2) regardless of
/// the coordinate's magnitude (all cone coordinates are positive).
pub fn numeric_gradient(s: &SufficientStats, u: f64, v: f64, w: f64) -> [f64; 3] {
    let f = |x: [f64; 3]| nll(s, x[0], x[1], x[2]);
    let x = [u, v, w];
    let h = 1e-6;
    let mut grad = [0.0; 3];
    for i in 0..3 {
        let mut xp = x;
        let mut xm = x;
        xp[i] *= 1.0 + h;
        xm[i] *= 1.0 - h;
        grad[i] = (f(xp) - f(xm)) / (2.0 * h);
    }
    grad
}

/// Sample mean.
pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn sample_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}
