//! Levenberg-Marquardt solver over pose-graph states.
//!
//! State per node is a 6-vector perturbation (dt, dphi) with retraction
//! `t <- t + dt`, `R <- R * Exp(dphi)`. The normal equations are
//! block-banded because odometry factors connect near-consecutive nodes;
//! they are factored with a banded Cholesky in O(n * bandwidth^2).
//! Robust GNSS kernels enter through IRLS weights recomputed at every
//! outer iteration; steps are accepted only when the true robust cost
//! decreases, so the cost sequence is monotone.

use nalgebra::{DVector, Matrix3, Matrix6, UnitQuaternion, Vector3, Vector6};

use super::{robust_weight, GnssFactor, OdomFactor, PgoError, PoseGraph};
use crate::geom::Se3Pose;

/// Skew-symmetric (cross-product) matrix of `v`.
pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(
        0.0, -v.z, v.y, //
        v.z, 0.0, -v.x, //
        -v.y, v.x, 0.0,
    )
}

/// Inverse of the SO(3) right Jacobian at rotation vector `phi`.
pub fn right_jacobian_inv(phi: &Vector3<f64>) -> Matrix3<f64> {
    let theta = phi.norm();
    let k = skew(phi);
    if theta < 1e-8 {
        Matrix3::identity() + 0.5 * k + (1.0 / 12.0) * k * k
    } else {
        let c = 1.0 / (theta * theta)
            - (1.0 + theta.cos()) / (2.0 * theta * theta.sin());
        Matrix3::identity() + 0.5 * k + c * k * k
    }
}

/// Apply a local 6-dof perturbation (dt, dphi) to a pose.
pub fn retract(pose: &Se3Pose, delta: &Vector6<f64>) -> Se3Pose {
    let dt = Vector3::new(delta[0], delta[1], delta[2]);
    let dphi = Vector3::new(delta[3], delta[4], delta[5]);
    Se3Pose::new(
        pose.t,
        pose.translation + dt,
        pose.rotation * UnitQuaternion::from_scaled_axis(dphi),
    )
}

/// GNSS residual: node translation minus the fix position.
pub fn gnss_residual(node: &Se3Pose, factor: &GnssFactor) -> Vector3<f64> {
    node.translation - factor.fix.position
}

/// Jacobian of the GNSS residual w.r.t. the node's local perturbation.
pub fn gnss_jacobian() -> nalgebra::SMatrix<f64, 3, 6> {
    let mut j = nalgebra::SMatrix::<f64, 3, 6>::zeros();
    j.fixed_view_mut::<3, 3>(0, 0)
        .copy_from(&Matrix3::identity());
    j
}

/// Odometry residual (translation part in node i's frame, rotation part as
/// the log of the rotation discrepancy).
pub fn odom_residual(node_i: &Se3Pose, node_j: &Se3Pose, factor: &OdomFactor) -> Vector6<f64> {
    let ri_inv = node_i.rotation.inverse();
    let r_t = ri_inv * (node_j.translation - node_i.translation) - factor.relative.translation;
    let r_rot = (factor.relative.rotation.inverse() * ri_inv * node_j.rotation).scaled_axis();
    let mut r = Vector6::zeros();
    r.fixed_rows_mut::<3>(0).copy_from(&r_t);
    r.fixed_rows_mut::<3>(3).copy_from(&r_rot);
    r
}

/// Jacobians of the odometry residual w.r.t. nodes i and j.
pub fn odom_jacobians(
    node_i: &Se3Pose,
    node_j: &Se3Pose,
    factor: &OdomFactor,
) -> (Matrix6<f64>, Matrix6<f64>) {
    let ri_inv_m = node_i.rotation.inverse().to_rotation_matrix();
    let a = ri_inv_m * (node_j.translation - node_i.translation);
    let r_rot = (factor.relative.rotation.inverse() * node_i.rotation.inverse() * node_j.rotation)
        .scaled_axis();
    let jr_inv = right_jacobian_inv(&r_rot);
    let rj_inv_ri = (node_j.rotation.inverse() * node_i.rotation).to_rotation_matrix();

    let mut ji = Matrix6::zeros();
    ji.fixed_view_mut::<3, 3>(0, 0)
        .copy_from(&(-ri_inv_m.matrix()));
    ji.fixed_view_mut::<3, 3>(0, 3).copy_from(&skew(&a));
    ji.fixed_view_mut::<3, 3>(3, 3)
        .copy_from(&(-jr_inv * rj_inv_ri.matrix()));

    let mut jj = Matrix6::zeros();
    jj.fixed_view_mut::<3, 3>(0, 0).copy_from(ri_inv_m.matrix());
    jj.fixed_view_mut::<3, 3>(3, 3).copy_from(&jr_inv);
    (ji, jj)
}

/// Symmetric banded matrix in lower storage: `data[r * (bw + 1) + d]`
/// holds `A[r][r - d]` for `d` in `0..=bw`.
struct BandedSpd {
    dim: usize,
    bw: usize,
    data: Vec<f64>,
}

impl BandedSpd {
    fn zeros(dim: usize, bw: usize) -> Self {
        Self {
            dim,
            bw,
            data: vec![0.0; dim * (bw + 1)],
        }
    }

    #[inline]
    fn add(&mut self, r: usize, c: usize, v: f64) {
        debug_assert!(r >= c && r - c <= self.bw);
        self.data[r * (self.bw + 1) + (r - c)] += v;
    }

    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * (self.bw + 1) + (r - c)]
    }

    /// In-place banded Cholesky `A = L L^T`; fails on non-PD input.
    fn cholesky(&mut self) -> Result<(), ()> {
        for r in 0..self.dim {
            let cmin = r.saturating_sub(self.bw);
            for c in cmin..r {
                let kmin = cmin.max(c.saturating_sub(self.bw));
                let mut sum = self.at(r, c);
                for k in kmin..c {
                    sum -= self.at(r, k) * self.at(c, k);
                }
                let v = sum / self.at(c, c);
                self.data[r * (self.bw + 1) + (r - c)] = v;
            }
            let mut sum = self.at(r, r);
            for k in cmin..r {
                let v = self.at(r, k);
                sum -= v * v;
            }
            if sum <= 0.0 || !sum.is_finite() {
                return Err(());
            }
            self.data[r * (self.bw + 1)] = sum.sqrt();
        }
        Ok(())
    }

    /// Solve `L L^T x = b` after `cholesky()`.
    fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut y = b.clone();
        for r in 0..self.dim {
            let cmin = r.saturating_sub(self.bw);
            let mut sum = y[r];
            for c in cmin..r {
                sum -= self.at(r, c) * y[c];
            }
            y[r] = sum / self.at(r, r);
        }
        for r in (0..self.dim).rev() {
            let mut sum = y[r];
            let rmax = (r + self.bw).min(self.dim - 1);
            for c in r + 1..=rmax {
                sum -= self.at(c, r) * y[c];
            }
            y[r] = sum / self.at(r, r);
        }
        y
    }
}

/// Solver output: optimized nodes plus convergence bookkeeping.
#[derive(Debug, Clone)]
pub struct OptimizeReport {
    pub nodes: Vec<Se3Pose>,
    pub final_cost: f64,
    pub iterations: usize,
    /// Robust cost at the start and after each accepted step.
    pub cost_history: Vec<f64>,
}

const MAX_ITERATIONS: usize = 100;
const RELATIVE_COST_TOL: f64 = 1e-6;
const ABSOLUTE_COST_FLOOR: f64 = 1e-12;
const LAMBDA_INIT: f64 = 1e-4;
const LAMBDA_MAX: f64 = 1e12;

fn check_connected(graph: &PoseGraph) -> Result<(), PgoError> {
    let n = graph.nodes.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for f in &graph.odom_factors {
        let (a, b) = (find(&mut parent, f.i), find(&mut parent, f.j));
        if a != b {
            parent[a.max(b)] = a.min(b);
        }
    }
    let root = find(&mut parent, 0);
    for i in 1..n {
        if find(&mut parent, i) != root {
            return Err(PgoError::NotConnected);
        }
    }
    Ok(())
}

/// Whitened GNSS residual norm: `|| L^T r ||` with `Lambda = L L^T`.
fn whitened_gnss_norm(r: &Vector3<f64>, info_chol_lt: &Matrix3<f64>) -> f64 {
    (info_chol_lt * r).norm()
}

fn total_cost(
    nodes: &[Se3Pose],
    graph: &PoseGraph,
    gnss_chol: &[Matrix3<f64>],
) -> f64 {
    let mut cost = 0.0;
    for f in &graph.odom_factors {
        let r = odom_residual(&nodes[f.i], &nodes[f.j], f);
        cost += 0.5 * (r.transpose() * f.information * r)[0];
    }
    for (f, lt) in graph.gnss_factors.iter().zip(gnss_chol) {
        let rn = whitened_gnss_norm(&gnss_residual(&nodes[f.node], f), lt);
        cost += f.kernel.rho(rn);
    }
    if let Some((prior, info)) = &graph.anchor_prior {
        let r = prior_residual(&nodes[0], prior);
        cost += 0.5 * info * r.norm_squared();
    }
    cost
}

fn prior_residual(node: &Se3Pose, prior: &Se3Pose) -> Vector6<f64> {
    let mut r = Vector6::zeros();
    r.fixed_rows_mut::<3>(0)
        .copy_from(&(node.translation - prior.translation));
    r.fixed_rows_mut::<3>(3)
        .copy_from(&(prior.rotation.inverse() * node.rotation).scaled_axis());
    r
}

/// Optimize the graph with Levenberg-Marquardt. Accepted steps never
/// increase the robust cost; terminates on relative cost change below
/// 1e-6 or after 100 iterations.
pub fn optimize(graph: &PoseGraph) -> Result<OptimizeReport, PgoError> {
    if graph.nodes.is_empty() {
        return Err(PgoError::EmptyOdometry);
    }
    check_connected(graph)?;

    // Upper-triangular whitening factors L^T of each GNSS information.
    let gnss_chol: Vec<Matrix3<f64>> = graph
        .gnss_factors
        .iter()
        .map(|f| {
            f.information
                .cholesky()
                .map(|c| c.l().transpose())
                .ok_or(PgoError::BadCovariance { t: f.fix.t })
        })
        .collect::<Result<_, _>>()?;

    let n = graph.nodes.len();
    let dim = 6 * n;
    let bw = graph
        .odom_factors
        .iter()
        .map(|f| (f.j - f.i) * 6 + 5)
        .max()
        .unwrap_or(5)
        .min(dim - 1);

    let mut nodes = graph.nodes.clone();
    let mut cost = total_cost(&nodes, graph, &gnss_chol);
    let mut lambda = LAMBDA_INIT;
    let mut iterations = 0;
    let mut cost_history = vec![cost];

    for _ in 0..MAX_ITERATIONS {
        if cost < ABSOLUTE_COST_FLOOR {
            break;
        }
        iterations += 1;

        // Assemble the (undamped) normal equations at the current state.
        let mut h = BandedSpd::zeros(dim, bw);
        let mut g = DVector::<f64>::zeros(dim);

        let add_block =
            |h: &mut BandedSpd, row_node: usize, col_node: usize, block: &Matrix6<f64>| {
                for a in 0..6 {
                    for b in 0..6 {
                        let (r, c) = (row_node * 6 + a, col_node * 6 + b);
                        if r >= c {
                            h.add(r, c, block[(a, b)]);
                        }
                    }
                }
            };

        for f in &graph.odom_factors {
            let r = odom_residual(&nodes[f.i], &nodes[f.j], f);
            let (ji, jj) = odom_jacobians(&nodes[f.i], &nodes[f.j], f);
            let lam = f.information;
            add_block(&mut h, f.i, f.i, &(ji.transpose() * lam * ji));
            add_block(&mut h, f.j, f.j, &(jj.transpose() * lam * jj));
            add_block(&mut h, f.j, f.i, &(jj.transpose() * lam * ji));
            let gi = ji.transpose() * lam * r;
            let gj = jj.transpose() * lam * r;
            for a in 0..6 {
                g[f.i * 6 + a] += gi[a];
                g[f.j * 6 + a] += gj[a];
            }
        }

        for (f, lt) in graph.gnss_factors.iter().zip(&gnss_chol) {
            let r = gnss_residual(&nodes[f.node], f);
            let w = robust_weight(whitened_gnss_norm(&r, lt), &f.kernel);
            let j = gnss_jacobian();
            let lam = f.information * w;
            let ht = j.transpose() * lam * j;
            add_block(&mut h, f.node, f.node, &ht);
            let gf = j.transpose() * lam * r;
            for a in 0..6 {
                g[f.node * 6 + a] += gf[a];
            }
        }

        if let Some((prior, info)) = &graph.anchor_prior {
            let r = prior_residual(&nodes[0], prior);
            let mut j = Matrix6::identity();
            let rot = Vector3::new(r[3], r[4], r[5]);
            j.fixed_view_mut::<3, 3>(3, 3)
                .copy_from(&right_jacobian_inv(&rot));
            add_block(&mut h, 0, 0, &(j.transpose() * j * *info));
            let gp = j.transpose() * r * *info;
            for a in 0..6 {
                g[a] += gp[a];
            }
        }

        // Damped inner loop: retry with larger lambda until a step reduces
        // the true robust cost.
        let mut accepted = false;
        while lambda <= LAMBDA_MAX {
            let mut damped = BandedSpd {
                dim,
                bw,
                data: h.data.clone(),
            };
            for r in 0..dim {
                let d = damped.data[r * (bw + 1)];
                damped.data[r * (bw + 1)] = d * (1.0 + lambda) + lambda * 1e-6;
            }
            if damped.cholesky().is_err() {
                lambda *= 10.0;
                continue;
            }
            let delta = damped.solve(&(-&g));
            let trial: Vec<Se3Pose> = nodes
                .iter()
                .enumerate()
                .map(|(k, p)| retract(p, &delta.fixed_rows::<6>(6 * k).into_owned()))
                .collect();
            let trial_cost = total_cost(&trial, graph, &gnss_chol);
            if trial_cost.is_finite() && trial_cost < cost {
                let rel_change = (cost - trial_cost) / cost.max(ABSOLUTE_COST_FLOOR);
                nodes = trial;
                cost = trial_cost;
                cost_history.push(cost);
                lambda = (lambda / 10.0).max(1e-12);
                accepted = true;
                if rel_change < RELATIVE_COST_TOL {
                    return Ok(OptimizeReport {
                        nodes,
                        final_cost: cost,
                        iterations,
                        cost_history,
                    });
                }
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            break; // no descent direction under any damping: converged
        }
    }

    Ok(OptimizeReport {
        nodes,
        final_cost: cost,
        iterations,
        cost_history,
    })
}
