//! Derivative-free simplex minimization (Nelder-Mead).

use crate::error::{Error, Result};

/// Options for one simplex run.
#[derive(Debug, Clone, Copy)]
pub struct SimplexOptions {
    pub max_iter: usize,
    /// Relative spread of the simplex function values at which to stop.
    pub ftol: f64,
    /// Relative size of the initial simplex around the start point.
    pub initial_step: f64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            max_iter: 2000,
            ftol: 1e-8,
            initial_step: 0.1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
}

/// Minimize `f` from `x0` with the standard Nelder-Mead moves
/// (reflection 1, expansion 2, contraction 0.5, shrink 0.5).
///
/// Deterministic: the initial simplex steps each coordinate by
/// `initial_step * max(1, |x0_i|)` and every comparison is total.
/// A non-finite objective value aborts with an error.
pub fn minimize<F>(mut f: F, x0: &[f64], opts: SimplexOptions) -> Result<SimplexResult>
where
    F: FnMut(&[f64]) -> f64,
{
    let dim = x0.len();
    if dim == 0 {
        return Err(Error::InvalidArgument("nothing to optimize".into()));
    }
    let mut eval = |x: &[f64]| -> Result<f64> {
        let v = f(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFiniteObjective)
        }
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    let f0 = eval(x0)?;
    simplex.push((x0.to_vec(), f0));
    for i in 0..dim {
        let mut p = x0.to_vec();
        p[i] += opts.initial_step * p[i].abs().max(1.0);
        let fp = eval(&p)?;
        simplex.push((p, fp));
    }

    let mut iterations = 0;
    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[dim].1;
        if (worst - best).abs() <= opts.ftol * (best.abs() + opts.ftol) {
            break;
        }
        if iterations >= opts.max_iter {
            break;
        }
        iterations += 1;

        // Centroid of all but the worst vertex.
        let mut centroid = vec![0.0; dim];
        for (p, _) in simplex.iter().take(dim) {
            for (c, x) in centroid.iter_mut().zip(p) {
                *c += x;
            }
        }
        for c in centroid.iter_mut() {
            *c /= dim as f64;
        }

        let worst_point = simplex[dim].0.clone();
        let second_worst = simplex[dim - 1].1;
        let blend = |alpha: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&worst_point)
                .map(|(c, w)| c + alpha * (c - w))
                .collect()
        };

        let reflected = blend(1.0);
        let f_reflected = eval(&reflected)?;
        if f_reflected < best {
            let expanded = blend(2.0);
            let f_expanded = eval(&expanded)?;
            if f_expanded < f_reflected {
                simplex[dim] = (expanded, f_expanded);
            } else {
                simplex[dim] = (reflected, f_reflected);
            }
            continue;
        }
        if f_reflected < second_worst {
            simplex[dim] = (reflected, f_reflected);
            continue;
        }
        // Contraction, outside or inside of the worst vertex.
        let contracted = if f_reflected < worst {
            blend(0.5)
        } else {
            blend(-0.5)
        };
        let f_contracted = eval(&contracted)?;
        if f_contracted < worst.min(f_reflected) {
            simplex[dim] = (contracted, f_contracted);
            continue;
        }
        // Shrink toward the best vertex.
        let anchor = simplex[0].0.clone();
        for entry in simplex.iter_mut().skip(1) {
            let shrunk: Vec<f64> = anchor
                .iter()
                .zip(&entry.0)
                .map(|(a, x)| a + 0.5 * (x - a))
                .collect();
            let fs = eval(&shrunk)?;
            *entry = (shrunk, fs);
        }
    }

    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, f_best) = simplex.swap_remove(0);
    Ok(SimplexResult {
        x,
        f: f_best,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn minimizes_a_shifted_quadratic() {
        let f = |x: &[f64]| (x[0] - 3.0).powi(2) + 2.0 * (x[1] + 1.5).powi(2) + 7.0;
        let result = minimize(f, &[0.0, 0.0], SimplexOptions::default()).unwrap();
        assert_abs_diff_eq!(result.x[0], 3.0, epsilon = 1e-3);
        assert_abs_diff_eq!(result.x[1], -1.5, epsilon = 1e-3);
        assert_abs_diff_eq!(result.f, 7.0, epsilon = 1e-6);
    }

    #[test]
    fn handles_rosenbrock_reasonably() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let opts = SimplexOptions {
            max_iter: 5000,
            ftol: 1e-12,
            initial_step: 0.1,
        };
        let result = minimize(f, &[-1.2, 1.0], opts).unwrap();
        assert!(result.f < 1e-6, "f = {}", result.f);
    }

    #[test]
    fn non_finite_objective_is_an_error() {
        let f = |x: &[f64]| if x[0] > 0.5 { f64::INFINITY } else { x[0] * x[0] };
        assert!(matches!(
            minimize(f, &[0.45, 0.0], SimplexOptions::default()).unwrap_err(),
            Error::NonFiniteObjective
        ));
    }

    #[test]
    fn is_deterministic() {
        let f = |x: &[f64]| x.iter().map(|v| (v - 0.3).powi(2)).sum::<f64>();
        let a = minimize(f, &[1.0, -2.0, 0.5], SimplexOptions::default()).unwrap();
        let b = minimize(f, &[1.0, -2.0, 0.5], SimplexOptions::default()).unwrap();
        assert_eq!(a.x, b.x);
        assert_eq!(a.f, b.f);
    }
}
