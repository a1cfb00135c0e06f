//! Bounded Nelder-Mead in three dimensions for the derivative-free NMI
//! refinement. Iterates are clamped to the search box; the histogram
//! objective is noisy and non-differentiable, which rules out gradient
//! methods.

const ALPHA: f64 = 1.0; // reflection
const GAMMA: f64 = 2.0; // expansion
const RHO: f64 = 0.5; // contraction
const SIGMA: f64 = 0.5; // shrink

type Point3 = [f64; 3];

fn clamp(x: &mut Point3, lo: &Point3, hi: &Point3) {
    for d in 0..3 {
        x[d] = x[d].clamp(lo[d], hi[d]);
    }
}

fn add_scaled(a: &Point3, b: &Point3, s: f64) -> Point3 {
    [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2]]
}

fn sub(a: &Point3, b: &Point3) -> Point3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

/// Minimize `f` over the box `[lo, hi]` starting at `x0` with an initial
/// simplex stepping `steps` along each axis. Stops when the simplex
/// objective spread drops below `spread_tol` or after `max_iters`
/// iterations. Returns the best vertex and its value.
pub fn minimize<F: FnMut(&Point3) -> f64>(
    mut f: F,
    x0: Point3,
    steps: Point3,
    lo: Point3,
    hi: Point3,
    max_iters: usize,
    spread_tol: f64,
) -> (Point3, f64) {
    let mut simplex: Vec<(Point3, f64)> = Vec::with_capacity(4);
    let mut start = x0;
    clamp(&mut start, &lo, &hi);
    simplex.push((start, f(&start)));
    for d in 0..3 {
        let mut v = start;
        // Step inward when the step would leave the box.
        v[d] = if v[d] + steps[d] <= hi[d] {
            v[d] + steps[d]
        } else {
            v[d] - steps[d]
        };
        clamp(&mut v, &lo, &hi);
        simplex.push((v, f(&v)));
    }

    for _ in 0..max_iters {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let spread = simplex[3].1 - simplex[0].1;
        if spread.is_finite() && spread < spread_tol {
            break;
        }

        // Centroid of the best three.
        let mut c = [0.0; 3];
        for v in &simplex[..3] {
            for (cd, vd) in c.iter_mut().zip(&v.0) {
                *cd += vd / 3.0;
            }
        }
        let worst = simplex[3];
        let dir = sub(&c, &worst.0);

        let mut xr = add_scaled(&c, &dir, ALPHA);
        clamp(&mut xr, &lo, &hi);
        let fr = f(&xr);

        if fr < simplex[0].1 {
            let mut xe = add_scaled(&c, &dir, GAMMA);
            clamp(&mut xe, &lo, &hi);
            let fe = f(&xe);
            simplex[3] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[2].1 {
            simplex[3] = (xr, fr);
        } else {
            let (mut xc, towards) = if fr < worst.1 {
                // Outside contraction.
                (add_scaled(&c, &dir, RHO), (xr, fr))
            } else {
                // Inside contraction.
                (add_scaled(&c, &dir, -RHO), worst)
            };
            clamp(&mut xc, &lo, &hi);
            let fc = f(&xc);
            if fc < towards.1 {
                simplex[3] = (xc, fc);
            } else {
                // Shrink toward the best vertex.
                let best = simplex[0].0;
                for v in simplex.iter_mut().skip(1) {
                    let mut x = add_scaled(&best, &sub(&v.0, &best), SIGMA);
                    clamp(&mut x, &lo, &hi);
                    *v = (x, f(&x));
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    simplex[0]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_quadratic_minimum() {
        let f = |x: &Point3| (x[0] - 1.0).powi(2) + (x[1] + 2.0).powi(2) + (x[2] - 0.5).powi(2);
        let (x, v) = minimize(
            f,
            [0.0, 0.0, 0.0],
            [0.5, 0.5, 0.5],
            [-5.0, -5.0, -5.0],
            [5.0, 5.0, 5.0],
            200,
            1e-10,
        );
        assert!(v < 1e-6, "value {v}");
        assert!((x[0] - 1.0).abs() < 1e-3 && (x[1] + 2.0).abs() < 1e-3);
    }

    #[test]
    fn respects_bounds() {
        // Unconstrained minimum at (3, 0, 0) but box caps x at 1.
        let f = |x: &Point3| (x[0] - 3.0).powi(2) + x[1].powi(2) + x[2].powi(2);
        let (x, _) = minimize(
            f,
            [0.0, 0.0, 0.0],
            [0.5, 0.5, 0.5],
            [-1.0, -1.0, -1.0],
            [1.0, 1.0, 1.0],
            300,
            1e-12,
        );
        assert!(x[0] <= 1.0 + 1e-12);
        assert!((x[0] - 1.0).abs() < 1e-3, "should push to the bound, got {}", x[0]);
    }

    #[test]
    fn rosenbrock_2d_slice() {
        let f = |x: &Point3| {
            100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2) + x[2] * x[2]
        };
        let (x, _) = minimize(
            f,
            [-0.5, 0.5, 0.3],
            [0.5, 0.5, 0.5],
            [-2.0, -2.0, -2.0],
            [2.0, 2.0, 2.0],
            2000,
            1e-14,
        );
        assert!((x[0] - 1.0).abs() < 1e-3 && (x[1] - 1.0).abs() < 1e-3, "{x:?}");
    }
}
