//! Derivative-free maximizers used by the profile searches.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section maximization of a unimodal `f` on `[lo, hi]`.
///
/// Returns `(argmax, max)`. Failed evaluations (`None`) are treated as `-inf`.
/// The endpoints are also evaluated so a boundary maximum is returned exactly.
pub fn golden_section_max(mut f: impl FnMut(f64) -> Option<f64>, lo: f64, hi: f64, x_tol: f64) -> (f64, f64) {
    let mut eval = |x: f64| f(x).filter(|v| v.is_finite()).unwrap_or(f64::NEG_INFINITY);
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = eval(c);
    let mut fd = eval(d);
    while (b - a).abs() > x_tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = eval(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = eval(d);
        }
    }
    let mut best = if fc >= fd { (c, fc) } else { (d, fd) };
    for x in [lo, hi] {
        let v = eval(x);
        // ties go to the lower argument
        if v > best.1 || (v == best.1 && x < best.0) {
            best = (x, v);
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Best value after each iteration.
    pub trace: Vec<f64>,
}

/// Nelder-Mead maximization with standard coefficients.
///
/// Stops when the spread of values over the simplex drops below `f_tol`.
pub fn nelder_mead_max(
    mut f: impl FnMut(&[f64]) -> Option<f64>,
    start: &[f64],
    step: &[f64],
    f_tol: f64,
    max_iterations: usize,
) -> NelderMeadResult {
    let n = start.len();
    let mut eval = |x: &[f64]| f(x).filter(|v| v.is_finite()).unwrap_or(f64::NEG_INFINITY);
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((start.to_vec(), eval(start)));
    for i in 0..n {
        let mut p = start.to_vec();
        p[i] += step[i];
        let v = eval(&p);
        simplex.push((p, v));
    }
    let mut trace = Vec::new();
    let lerp = |a: &[f64], b: &[f64], t: f64| -> Vec<f64> { a.iter().zip(b).map(|(a, b)| a + t * (b - a)).collect() };

    for iter in 0..max_iterations {
        // best first
        simplex.sort_by(|a, b| b.1.total_cmp(&a.1));
        trace.push(simplex[0].1);
        let spread = simplex[0].1 - simplex[n].1;
        if spread.is_finite() && spread < f_tol {
            return NelderMeadResult {
                x: simplex[0].0.clone(),
                value: simplex[0].1,
                iterations: iter,
                converged: true,
                trace,
            };
        }
        let centroid: Vec<f64> = (0..n).map(|j| simplex[..n].iter().map(|p| p.0[j]).sum::<f64>() / n as f64).collect();
        let worst = simplex[n].clone();
        let reflected = lerp(&centroid, &worst.0, -1.0);
        let fr = eval(&reflected);
        if fr > simplex[0].1 {
            let expanded = lerp(&centroid, &worst.0, -2.0);
            let fe = eval(&expanded);
            simplex[n] = if fe > fr { (expanded, fe) } else { (reflected, fr) };
            continue;
        }
        if fr > simplex[n - 1].1 {
            simplex[n] = (reflected, fr);
            continue;
        }
        let outside = fr > worst.1;
        let contracted = lerp(&centroid, &worst.0, if outside { -0.5 } else { 0.5 });
        let fcon = eval(&contracted);
        if (outside && fcon >= fr) || (!outside && fcon > worst.1) {
            simplex[n] = (contracted, fcon);
            continue;
        }
        // shrink toward the best point
        let best = simplex[0].0.clone();
        for p in simplex.iter_mut().skip(1) {
            p.0 = lerp(&best, &p.0, 0.5);
            p.1 = eval(&p.0);
        }
    }
    simplex.sort_by(|a, b| b.1.total_cmp(&a.1));
    NelderMeadResult {
        x: simplex[0].0.clone(),
        value: simplex[0].1,
        iterations: max_iterations,
        converged: false,
        trace,
    }
}
