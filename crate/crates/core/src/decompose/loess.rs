//! Locally weighted polynomial regression.

use crate::error::{invalid, Result};

/// Tricube kernel on `d / h`, zero outside the unit interval.
#[inline]
pub(crate) fn tricube(u: f64) -> f64 {
    if u >= 1.0 {
        0.0
    } else {
        let c = 1.0 - u * u * u;
        c * c * c
    }
}

/// Weighted least-squares polynomial of `degree` (0, 1 or 2) centred at `x0`,
/// evaluated at `x0`. Falls back to a lower degree when the design is singular.
pub(crate) fn local_poly(
    xs: &[f64],
    ys: &[f64],
    ws: &[f64],
    x0: f64,
    degree: usize,
) -> Option<f64> {
    let mut m = [0.0f64; 5];
    let mut b = [0.0f64; 3];
    for ((&x, &y), &w) in xs.iter().zip(ys).zip(ws) {
        if w <= 0.0 {
            continue;
        }
        let d = x - x0;
        let mut p = w;
        for (k, mk) in m.iter_mut().enumerate() {
            *mk += p;
            if k < 3 {
                b[k] += p * y;
            }
            p *= d;
        }
    }
    if m[0] <= 0.0 {
        return None;
    }
    let mut deg = degree.min(2);
    loop {
        let fit = match deg {
            0 => Some(b[0] / m[0]),
            1 => {
                let det = m[0] * m[2] - m[1] * m[1];
                (det.abs() > 1e-12 * m[0] * m[2].max(f64::MIN_POSITIVE))
                    .then(|| (b[0] * m[2] - b[1] * m[1]) / det)
            }
            _ => solve3(
                [[m[0], m[1], m[2]], [m[1], m[2], m[3]], [m[2], m[3], m[4]]],
                b,
            ),
        };
        match fit {
            Some(v) if v.is_finite() => return Some(v),
            _ if deg == 0 => return None,
            _ => deg -= 1,
        }
    }
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<f64> {
    let scale = a.iter().flatten().fold(0.0f64, |s, v| s.max(v.abs()));
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() <= 1e-12 * scale {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            let pivot = a[col];
            for (v, p) in a[row].iter_mut().zip(pivot).skip(col) {
                *v -= f * p;
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let s: f64 = (row + 1..3).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x[0])
}

/// Loess fit at every `xs[i]`.
///
/// Each local fit uses the `ceil(span_fraction * n)` nearest neighbours with
/// tricube weights scaled by the distance to the farthest of them, multiplied
/// by `robustness` when given.
pub fn loess(
    xs: &[f64],
    ys: &[f64],
    span_fraction: f64,
    degree: usize,
    robustness: Option<&[f64]>,
) -> Result<Vec<f64>> {
    let n = xs.len();
    if ys.len() != n || robustness.is_some_and(|r| r.len() != n) {
        return Err(invalid("loess inputs have different lengths"));
    }
    if !(span_fraction > 0.0 && span_fraction <= 1.0) {
        return Err(invalid(format!(
            "span fraction {span_fraction} outside (0, 1]"
        )));
    }
    if degree > 2 {
        return Err(invalid(format!("loess degree {degree} not in {{0, 1, 2}}")));
    }
    if xs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("loess abscissae must be strictly increasing"));
    }
    let q = ((span_fraction * n as f64).ceil() as usize).clamp(1, n.max(1));
    if q < degree + 1 {
        return Err(invalid(format!(
            "neighbourhood of {q} points cannot support a degree-{degree} fit"
        )));
    }

    let mut out = Vec::with_capacity(n);
    let mut lo = 0usize;
    let mut ws = vec![0.0; q];
    for (i, &x0) in xs.iter().enumerate() {
        while lo + q < n && xs[lo + q] - x0 < x0 - xs[lo] {
            lo += 1;
        }
        let hi = lo + q;
        let h = (x0 - xs[lo]).max(xs[hi - 1] - x0);
        let mut positive = 0;
        for (k, w) in ws.iter_mut().enumerate() {
            let j = lo + k;
            let base = if h > 0.0 {
                tricube((xs[j] - x0).abs() / h)
            } else {
                1.0
            };
            *w = base * robustness.map_or(1.0, |r| r[j]);
            if *w > 0.0 {
                positive += 1;
            }
        }
        if positive < degree + 1 {
            return Err(invalid(format!(
                "only {positive} weighted points near x[{i}] for a degree-{degree} fit"
            )));
        }
        let fit = local_poly(&xs[lo..hi], &ys[lo..hi], &ws, x0, degree)
            .ok_or_else(|| invalid(format!("singular local fit at x[{i}]")))?;
        out.push(fit);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_rng;
    use rand_distr::{Distribution, Normal};

    fn grid(n: usize) -> Vec<f64> {
        (0..n).map(|i| i as f64 * 0.5).collect()
    }

    #[test]
    fn reproduces_lines() {
        let xs = grid(40);
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 - 0.7 * x).collect();
        for span in [0.1, 0.3, 1.0] {
            let fit = loess(&xs, &ys, span, 1, None).unwrap();
            for (f, y) in fit.iter().zip(&ys) {
                assert!((f - y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn quadratic_reproduced_by_degree_two() {
        let xs = grid(30);
        let ys: Vec<f64> = xs.iter().map(|x| 1.0 + x - 0.2 * x * x).collect();
        let fit = loess(&xs, &ys, 0.4, 2, None).unwrap();
        for (f, y) in fit.iter().zip(&ys) {
            assert!((f - y).abs() < 1e-8);
        }
    }

    #[test]
    fn local_mean_stays_in_range() {
        let xs = grid(25);
        let ys: Vec<f64> = xs.iter().map(|x| (x * 1.3).sin() * 4.0 + x).collect();
        let (lo, hi) = ys
            .iter()
            .fold((f64::MAX, f64::MIN), |(a, b), &y| (a.min(y), b.max(y)));
        let fit = loess(&xs, &ys, 1.0, 0, Some(&[1.0; 25])).unwrap();
        assert!(fit.iter().all(|&f| f >= lo && f <= hi));
    }

    #[test]
    fn wider_span_smooths_more() {
        let mut rng = derive_rng(17, &[]);
        let noise = Normal::new(0.0, 0.3).unwrap();
        let xs = grid(200);
        let ys: Vec<f64> = xs
            .iter()
            .map(|x| (x * 0.2).sin() + noise.sample(&mut rng))
            .collect();
        let resid_var = |span: f64| {
            let fit = loess(&xs, &ys, span, 1, None).unwrap();
            fit.iter()
                .zip(&ys)
                .map(|(f, y)| (f - y).powi(2))
                .sum::<f64>()
                / 200.0
        };
        assert!(resid_var(0.8) > resid_var(0.05));
    }

    #[test]
    fn too_small_neighbourhood() {
        let xs = grid(10);
        let ys = xs.clone();
        assert!(loess(&xs, &ys, 0.1, 1, None).is_err());
        assert!(loess(&xs, &ys, 0.0, 1, None).is_err());
        let zero = vec![0.0; 10];
        assert!(loess(&xs, &ys, 0.5, 1, Some(&zero)).is_err());
    }
}
