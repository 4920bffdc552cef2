//! Bounded-budget Nelder–Mead minimizer with dimension-adaptive
//! coefficients (Gao & Han), used as the local search inside quantifier
//! evaluation.

pub(crate) struct Outcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub converged: bool,
}

pub(crate) struct Options {
    pub max_iter: usize,
    pub ftol: f64,
    pub xtol: f64,
    pub step: f64,
    /// Stop as soon as a value at or below this is seen.
    pub floor: f64,
}

pub(crate) fn minimize(f: &mut dyn FnMut(&[f64]) -> f64, x0: &[f64], opts: &Options) -> Outcome {
    let n = x0.len();
    let f0 = f(x0);
    if n == 0 || f0 <= opts.floor {
        return Outcome { x: x0.to_vec(), f: f0, converged: true };
    }
    let nf = n as f64;
    let (alpha, beta, gamma, delta) = (1.0, 1.0 + 2.0 / nf, 0.75 - 0.5 / nf, 1.0 - 1.0 / nf);

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), f0));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += opts.step;
        let fx = f(&x);
        if fx <= opts.floor {
            return Outcome { x, f: fx, converged: true };
        }
        simplex.push((x, fx));
    }

    let mut converged = false;
    for _ in 0..opts.max_iter {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let spread = simplex[n].1 - simplex[0].1;
        if spread <= 1e-14 * simplex[0].1.abs().max(1.0) {
            converged = true;
            break;
        }
        if spread <= opts.ftol {
            let size = simplex[1..].iter().map(|(x, _)| dist_inf(x, &simplex[0].0)).fold(0.0, f64::max);
            if size <= opts.xtol {
                converged = true;
                break;
            }
        }

        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / nf;
            }
        }
        let worst = simplex[n].clone();
        let along =
            |t: f64| -> Vec<f64> { centroid.iter().zip(&worst.0).map(|(c, w)| c + t * (c - w)).collect() };

        let xr = along(alpha);
        let fr = f(&xr);
        if fr <= opts.floor {
            return Outcome { x: xr, f: fr, converged: true };
        }
        if fr < simplex[0].1 {
            let xe = along(alpha * beta);
            let fe = f(&xe);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let (xc, fc) = if fr < worst.1 {
                let xc = along(alpha * gamma);
                let fc = f(&xc);
                (xc, fc)
            } else {
                let xc = along(-gamma);
                let fc = f(&xc);
                (xc, fc)
            };
            if fc < fr.min(worst.1) {
                simplex[n] = (xc, fc);
            } else {
                let best = simplex[0].0.clone();
                for v in simplex.iter_mut().skip(1) {
                    let x: Vec<f64> = best.iter().zip(&v.0).map(|(b, xi)| b + delta * (xi - b)).collect();
                    let fx = f(&x);
                    *v = (x, fx);
                }
            }
        }
        if simplex.iter().any(|v| v.1 <= opts.floor) {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            converged = true;
            break;
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, f) = simplex.swap_remove(0);
    Outcome { x, f, converged }
}

fn dist_inf(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts() -> Options {
        Options { max_iter: 5000, ftol: 1e-12, xtol: 1e-8, step: 0.5, floor: f64::NEG_INFINITY }
    }

    #[test]
    fn quadratic_bowl() {
        let mut f = |x: &[f64]| (x[0] - 1.0).powi(2) + 3.0 * (x[1] + 2.0).powi(2);
        let out = minimize(&mut f, &[0.0, 0.0], &opts());
        assert!(out.converged);
        assert!((out.x[0] - 1.0).abs() < 1e-5 && (out.x[1] + 2.0).abs() < 1e-5);
    }

    #[test]
    fn rosenbrock() {
        let mut f = |x: &[f64]| 100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2);
        let out = minimize(&mut f, &[-1.2, 1.0], &opts());
        assert!(out.f < 1e-8, "{}", out.f);
    }

    #[test]
    fn nonsmooth_abs() {
        let mut f = |x: &[f64]| x.iter().map(|v| (v - 0.3).abs()).sum::<f64>();
        let out = minimize(&mut f, &[1.0, -1.0, 2.0], &opts());
        assert!(out.f < 1e-6);
    }

    #[test]
    fn floor_stops_early() {
        let mut calls = 0;
        let mut f = |x: &[f64]| {
            calls += 1;
            x[0].abs()
        };
        let o = Options { floor: 0.0, ..opts() };
        let out = minimize(&mut f, &[0.0, 5.0], &o);
        assert_eq!(out.f, 0.0);
        assert_eq!(calls, 1);
    }
}
