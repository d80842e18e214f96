//! Nelder–Mead downhill simplex minimizer over a fixed number of dimensions.

/// Simplex coefficients and stopping rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMead {
    pub reflection: f64,
    pub expansion: f64,
    pub contraction: f64,
    pub shrink: f64,
    pub max_iterations: usize,
    /// Stop once every vertex is within this max-norm distance of the best one.
    pub diameter_tolerance: f64,
    /// Also stop once `2|f_worst − f_best| ≤ value_tolerance·(|f_worst| + |f_best|)`.
    /// Zero disables the test.
    pub value_tolerance: f64,
}

impl Default for NelderMead {
    fn default() -> Self {
        Self {
            reflection: 1.0,
            expansion: 2.0,
            contraction: 0.5,
            shrink: 0.5,
            max_iterations: 500,
            diameter_tolerance: 1e-9,
            value_tolerance: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum<const D: usize> {
    pub x: [f64; D],
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Best objective value after each iteration, when tracing was requested.
    pub trace: Option<Vec<f64>>,
}

#[inline]
fn sanitize(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

fn lerp<const D: usize>(from: &[f64; D], to: &[f64; D], t: f64) -> [f64; D] {
    let mut out = [0.0; D];
    for k in 0..D {
        out[k] = from[k] + t * (to[k] - from[k]);
    }
    out
}

impl NelderMead {
    /// Minimize `f` from `x0`; the initial simplex adds `steps[k]` along axis `k`.
    pub fn minimize<const D: usize, F>(
        &self,
        mut f: F,
        x0: [f64; D],
        steps: [f64; D],
        trace: bool,
    ) -> Minimum<D>
    where
        F: FnMut(&[f64; D]) -> f64,
    {
        let mut simplex: Vec<([f64; D], f64)> = Vec::with_capacity(D + 1);
        simplex.push((x0, sanitize(f(&x0))));
        for k in 0..D {
            let mut v = x0;
            v[k] += steps[k];
            let fv = sanitize(f(&v));
            simplex.push((v, fv));
        }
        let mut history = trace.then(Vec::new);
        let mut iterations = 0;
        let mut converged = false;

        loop {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let best = simplex[0].0;
            let diameter = simplex[1..]
                .iter()
                .flat_map(|(v, _)| v.iter().zip(&best).map(|(a, b)| (a - b).abs()))
                .fold(0.0, f64::max);
            let (f_lo, f_hi) = (simplex[0].1, simplex[D].1);
            let flat = self.value_tolerance > 0.0
                && 2.0 * (f_hi - f_lo).abs() <= self.value_tolerance * (f_hi.abs() + f_lo.abs()) + 1e-300;
            if diameter < self.diameter_tolerance || flat {
                converged = true;
                break;
            }
            if iterations >= self.max_iterations {
                break;
            }
            iterations += 1;

            let mut centroid = [0.0; D];
            for (v, _) in &simplex[..D] {
                for k in 0..D {
                    centroid[k] += v[k] / D as f64;
                }
            }
            let (worst, f_worst) = simplex[D];
            let f_best = simplex[0].1;
            let f_second = simplex[D - 1].1;

            let xr = lerp(&centroid, &worst, -self.reflection);
            let fr = sanitize(f(&xr));
            let mut replace = None;
            if fr < f_best {
                let xe = lerp(&centroid, &xr, self.expansion);
                let fe = sanitize(f(&xe));
                replace = Some(if fe < fr { (xe, fe) } else { (xr, fr) });
            } else if fr < f_second {
                replace = Some((xr, fr));
            } else if fr < f_worst {
                let xc = lerp(&centroid, &xr, self.contraction);
                let fc = sanitize(f(&xc));
                if fc <= fr {
                    replace = Some((xc, fc));
                }
            } else {
                let xc = lerp(&centroid, &worst, self.contraction);
                let fc = sanitize(f(&xc));
                if fc < f_worst {
                    replace = Some((xc, fc));
                }
            }

            match replace {
                Some(v) => simplex[D] = v,
                None => {
                    for j in 1..=D {
                        let v = lerp(&best, &simplex[j].0, self.shrink);
                        let fv = sanitize(f(&v));
                        simplex[j] = (v, fv);
                    }
                }
            }
            if let Some(h) = history.as_mut() {
                h.push(simplex.iter().map(|s| s.1).fold(f64::INFINITY, f64::min));
            }
        }

        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        Minimum { x: simplex[0].0, value: simplex[0].1, iterations, converged, trace: history }
    }
}
