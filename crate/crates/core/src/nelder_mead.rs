//! Derivative-free simplex search with dimension-adaptive coefficients.

pub(crate) struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub converged: bool,
}

pub(crate) struct Options {
    pub initial_step: f64,
    pub ftol: f64,
    pub xtol: f64,
    pub max_evals: usize,
}

pub(crate) fn minimize(f: &dyn Fn(&[f64]) -> f64, x0: &[f64], opts: &Options) -> Minimum {
    let n = x0.len();
    if n == 0 {
        return Minimum { x: Vec::new(), f: f(x0), converged: true };
    }
    let nf = n as f64;
    let (reflect, expand, contract, shrink) = (1.0, 1.0 + 2.0 / nf, 0.75 - 0.5 / nf, 1.0 - 1.0 / nf);

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut v = x0.to_vec();
        let h = if v[i] != 0.0 { opts.initial_step * v[i].abs().max(1.0) } else { opts.initial_step };
        v[i] += h;
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| f(v)).collect();
    let mut evals = n + 1;

    loop {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let spread = values[n] - values[0];
        let size = simplex[1..]
            .iter()
            .map(|v| v.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if spread <= opts.ftol * (1.0 + values[0].abs()) && size <= opts.xtol {
            return Minimum { x: simplex.swap_remove(0), f: values[0], converged: true };
        }
        if evals >= opts.max_evals {
            return Minimum { x: simplex.swap_remove(0), f: values[0], converged: false };
        }

        let mut centroid = vec![0.0; n];
        for v in &simplex[..n] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / nf;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            centroid.iter().zip(&simplex[n]).map(|(c, w)| c + t * (c - w)).collect()
        };

        let xr = along(reflect);
        let fr = f(&xr);
        evals += 1;
        if fr < values[0] {
            let xe = along(reflect * expand);
            let fe = f(&xe);
            evals += 1;
            if fe < fr {
                simplex[n] = xe;
                values[n] = fe;
            } else {
                simplex[n] = xr;
                values[n] = fr;
            }
            continue;
        }
        if fr < values[n - 1] {
            simplex[n] = xr;
            values[n] = fr;
            continue;
        }
        let (xc, fc) = if fr < values[n] {
            let xc = along(reflect * contract);
            let fc = f(&xc);
            (xc, fc)
        } else {
            let xc = along(-contract);
            let fc = f(&xc);
            (xc, fc)
        };
        evals += 1;
        if fc < values[n].min(fr) {
            simplex[n] = xc;
            values[n] = fc;
            continue;
        }
        let best = simplex[0].clone();
        for i in 1..=n {
            for (x, b) in simplex[i].iter_mut().zip(&best) {
                *x = b + shrink * (*x - b);
            }
            values[i] = f(&simplex[i]);
        }
        evals += n;
    }
}
