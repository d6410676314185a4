//! Derivative-free minimization (Nelder-Mead with dimension-adaptive coefficients).

#[derive(Debug, Clone, Copy)]
pub struct NelderMeadOptions {
    pub max_iterations: usize,
    /// Converged when the spread of simplex values falls below this...
    pub f_tol: f64,
    /// ...and every vertex lies within this distance of the best one.
    pub x_tol: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            f_tol: 1e-7,
            x_tol: 1e-5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

/// Minimizes `f` from `x0` with an initial simplex of per-coordinate `steps`.
/// Non-finite values are treated as `+inf`.
pub fn nelder_mead<F>(mut f: F, x0: &[f64], steps: &[f64], opts: &NelderMeadOptions) -> Minimum
where
    F: FnMut(&[f64]) -> f64,
{
    let d = x0.len();
    let mut evaluations = 0;
    let mut eval = |x: &[f64]| {
        evaluations += 1;
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };
    if d == 0 {
        let value = eval(x0);
        return Minimum {
            x: Vec::new(),
            value,
            iterations: 0,
            evaluations: 1,
            converged: true,
        };
    }
    let dn = d as f64;
    let (alpha, gamma, rho, sigma) = (1.0, 1.0 + 2.0 / dn, 0.75 - 0.5 / dn, 1.0 - 1.0 / dn);

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(d + 1);
    simplex.push(x0.to_vec());
    for i in 0..d {
        let mut v = x0.to_vec();
        v[i] += steps[i];
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| eval(v)).collect();
    let mut centroid = vec![0.0; d];
    let mut trial = vec![0.0; d];
    let mut trial2 = vec![0.0; d];
    let mut iterations = 0;
    let mut converged = false;

    while iterations < opts.max_iterations {
        let mut order: Vec<usize> = (0..=d).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let spread = values[d] - values[0];
        let size = simplex[1..]
            .iter()
            .map(|v| {
                v.iter()
                    .zip(&simplex[0])
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if spread.is_finite() && spread <= opts.f_tol && size <= opts.x_tol {
            converged = true;
            break;
        }
        iterations += 1;

        centroid.iter_mut().for_each(|c| *c = 0.0);
        for v in &simplex[..d] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / dn;
            }
        }
        let worst = simplex[d].clone();
        for i in 0..d {
            trial[i] = centroid[i] + alpha * (centroid[i] - worst[i]);
        }
        let fr = eval(&trial);
        if fr < values[0] {
            for i in 0..d {
                trial2[i] = centroid[i] + gamma * (trial[i] - centroid[i]);
            }
            let fe = eval(&trial2);
            if fe < fr {
                simplex[d].copy_from_slice(&trial2);
                values[d] = fe;
            } else {
                simplex[d].copy_from_slice(&trial);
                values[d] = fr;
            }
            continue;
        }
        if fr < values[d - 1] {
            simplex[d].copy_from_slice(&trial);
            values[d] = fr;
            continue;
        }
        // contraction, outside if the reflection improved on the worst point
        let outside = fr < values[d];
        for i in 0..d {
            trial2[i] = if outside {
                centroid[i] + rho * (trial[i] - centroid[i])
            } else {
                centroid[i] + rho * (worst[i] - centroid[i])
            };
        }
        let fc = eval(&trial2);
        if fc < values[d].min(fr) {
            simplex[d].copy_from_slice(&trial2);
            values[d] = fc;
            continue;
        }
        let best = simplex[0].clone();
        for k in 1..=d {
            for i in 0..d {
                simplex[k][i] = best[i] + sigma * (simplex[k][i] - best[i]);
            }
            values[k] = eval(&simplex[k]);
        }
    }
    let best = (0..=d)
        .min_by(|&a, &b| values[a].total_cmp(&values[b]))
        .unwrap();
    Minimum {
        x: simplex[best].clone(),
        value: values[best],
        iterations,
        evaluations,
        converged,
    }
}
