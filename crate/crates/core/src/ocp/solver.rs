//! Augmented-Lagrangian solver for the transcribed collocation NLP.
//!
//! Outer loop: method of multipliers with monotone penalty growth and
//! multiplier updates gated on constraint progress. Inner loop: projected
//! modified Newton — the AL Hessian is assembled exactly (finite-difference
//! columns of the penalty-free weighted gradient plus the analytic
//! Gauss-Newton term mu·JᵀJ), factored by Cholesky with a Levenberg shift
//! on failure, and the step is safeguarded by an Armijo backtracking search
//! along the projected arc. Direct factorization is what makes the final
//! stationarity tolerance reachable: the penalty term leaves the subproblem
//! too ill-conditioned for first-order or Krylov inner methods.

use super::{NlpProblem, OcpError, OcpSolution, Workspace, DEFECT_TOL, STATIONARITY_TOL};
use nalgebra::{Cholesky, DMatrix, DVector};

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub defect_tol: f64,
    pub stationarity_tol: f64,
    pub max_outer: usize,
    /// Inner evaluation budget (gradient-pass equivalents) per outer
    /// iteration; one Newton step costs roughly the number of free variables.
    pub max_inner: usize,
    pub mu0: f64,
    pub mu_factor: f64,
    pub mu_max: f64,
    /// Penalty used while polishing stationarity on an already-feasible
    /// iterate. Kept moderate on purpose: the first-order dual update step
    /// is proportional to the penalty, and an oversized penalty makes the
    /// multiplier iteration oscillate instead of converging.
    pub mu_polish: f64,
    /// Print one line per outer iteration to stderr (debugging aid).
    pub verbose: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            defect_tol: DEFECT_TOL,
            stationarity_tol: STATIONARITY_TOL,
            max_outer: 500,
            max_inner: 5000,
            mu0: 1e4,
            mu_factor: 10.0,
            mu_max: 3e6,
            mu_polish: 1e5,
            verbose: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum InnerStatus {
    Converged,
    Budget,
    Stalled,
}

struct Inner<'a> {
    prob: &'a NlpProblem,
    ws: Workspace,
    evals: usize,
    hess: DMatrix<f64>,
    g_base: Vec<f64>,
    g_pert: Vec<f64>,
    z_pert: Vec<f64>,
    /// Levenberg shift carried across Newton steps.
    lm_shift: f64,
}

impl<'a> Inner<'a> {
    fn new(prob: &'a NlpProblem) -> Self {
        let n = prob.num_vars();
        Inner {
            prob,
            ws: Workspace::new(),
            evals: 0,
            hess: DMatrix::zeros(n, n),
            g_base: vec![0.0; n],
            g_pert: vec![0.0; n],
            z_pert: vec![0.0; n],
            lm_shift: 0.0,
        }
    }

    fn value(&mut self, z: &[f64], lambda: &[f64], mu: f64) -> f64 {
        self.evals += 1;
        self.prob.al_eval(z, lambda, mu, None, &mut self.ws)
    }

    fn value_grad(&mut self, z: &[f64], lambda: &[f64], mu: f64, grad: &mut [f64]) -> f64 {
        self.evals += 1;
        self.prob.al_eval(z, lambda, mu, Some(grad), &mut self.ws)
    }

    /// Gradient with components that push against an active bound zeroed.
    fn project_gradient(&self, z: &[f64], grad: &[f64], out: &mut [f64]) {
        for i in 0..z.len() {
            let at_lo = z[i] <= self.prob.lower[i];
            let at_hi = z[i] >= self.prob.upper[i];
            out[i] = if (at_lo && grad[i] > 0.0) || (at_hi && grad[i] < 0.0) {
                0.0
            } else {
                grad[i]
            };
        }
    }

    /// Newton direction from the exact AL Hessian restricted to the free
    /// variables. The Hessian splits as
    ///   H = D[∇J + Jᵀy]  +  mu·JᵀJ,   y = λ + mu·c(z) frozen,
    /// where the first (penalty-free, well-scaled) part is assembled by
    /// forward-difference columns and the second analytically.
    fn newton_direction(
        &mut self,
        z: &[f64],
        y_frozen: &[f64],
        mu: f64,
        free: &[bool],
        d: &mut [f64],
    ) -> Option<(DVector<f64>, f64)> {
        let n = z.len();

        self.evals += 1;
        self.prob.grad_weighted(z, y_frozen, &mut self.g_base, &mut self.ws);

        self.hess.fill(0.0);
        self.z_pert.copy_from_slice(z);
        for j in 0..n {
            if !free[j] {
                continue;
            }
            let eps = 1e-6 * (1.0 + z[j].abs());
            self.z_pert[j] = z[j] + eps;
            self.evals += 1;
            self.prob.grad_weighted(&self.z_pert, y_frozen, &mut self.g_pert, &mut self.ws);
            self.z_pert[j] = z[j];
            for i in 0..n {
                if free[i] {
                    self.hess[(i, j)] = (self.g_pert[i] - self.g_base[i]) / eps;
                }
            }
        }
        // symmetrize away the differencing noise
        for i in 0..n {
            for j in (i + 1)..n {
                let s = 0.5 * (self.hess[(i, j)] + self.hess[(j, i)]);
                self.hess[(i, j)] = s;
                self.hess[(j, i)] = s;
            }
        }
        self.prob.add_jtj(z, mu, &mut self.hess);

        // mask the active set
        for i in 0..n {
            if !free[i] {
                for j in 0..n {
                    self.hess[(i, j)] = 0.0;
                    self.hess[(j, i)] = 0.0;
                }
                self.hess[(i, i)] = 1.0;
            }
        }

        let mut rhs = DVector::zeros(n);
        for i in 0..n {
            rhs[i] = if free[i] { -self.g_base[i] } else { 0.0 };
        }

        let max_diag = (0..n).fold(0.0f64, |m, i| m.max(self.hess[(i, i)].abs())).max(1.0);
        let mut shift = self.lm_shift;
        for _ in 0..60 {
            let mut h_try = self.hess.clone();
            if shift > 0.0 {
                for i in 0..n {
                    if free[i] {
                        h_try[(i, i)] += shift;
                    }
                }
            }
            if let Some(chol) = Cholesky::new(h_try) {
                if std::env::var("INNER_TRACE").is_ok() && shift > 0.0 {
                    eprintln!("  chol shift {shift:9.2e} (max_diag {max_diag:9.2e})");
                }
                let mut sol = chol.solve(&rhs);
                // one round of iterative refinement against the shifted matrix
                let shifted_mul = |v: &DVector<f64>| -> DVector<f64> {
                    let mut out = &self.hess * v;
                    if shift > 0.0 {
                        for i in 0..n {
                            if free[i] {
                                out[i] += shift * v[i];
                            }
                        }
                    }
                    for i in 0..n {
                        if !free[i] {
                            out[i] = v[i];
                        }
                    }
                    out
                };
                let resid = &rhs - shifted_mul(&sol);
                sol += chol.solve(&resid);
                d.copy_from_slice(sol.as_slice());
                self.lm_shift = shift;

                // With a significant shift the model is indefinite: extract an
                // approximate most-negative-curvature direction by inverse
                // iteration on the shifted factorization. The gradient is
                // often nearly orthogonal to it (ridge geometry), so it is
                // returned separately for the caller to probe.
                if shift > 1e-8 * max_diag {
                    let mut v = DVector::from_fn(n, |i, _| {
                        if free[i] { ((i * 2654435761 % 97) as f64 / 48.5) - 1.0 } else { 0.0 }
                    });
                    for _ in 0..10 {
                        v = chol.solve(&v);
                        let nv = v.norm();
                        if nv == 0.0 {
                            break;
                        }
                        v /= nv;
                    }
                    // curvature along v in the unshifted model
                    let hv = shifted_mul(&v);
                    let curv = v.dot(&hv) - shift;
                    if curv < 0.0 {
                        return Some((v, curv));
                    }
                }
                return None;
            }
            shift = if shift == 0.0 { 1e-12 * max_diag } else { shift * 10.0 };
        }
        // factorization failed outright; fall back to steepest descent
        for i in 0..n {
            d[i] = if free[i] { -self.g_base[i] } else { 0.0 };
        }
        None
    }

    /// Second-order correction: a Gauss-Newton feasibility step
    /// d = -Jᵀ(JJᵀ)⁻¹ c(z_trial) with J evaluated at the step origin,
    /// computed matrix-free by CG on the normal equations. Without it the
    /// penalty term punishes the quadratic constraint departure of a full
    /// Newton step along the curved feasible manifold, the line search
    /// truncates every step, and progress collapses to O(mu^-1/3).
    fn soc_step(&mut self, z_origin: &[f64], z_trial: &[f64], d_soc: &mut [f64]) {
        let n = z_origin.len();
        let rows = self.prob.num_rows();
        let mut c = vec![0.0; rows];
        self.prob.residuals(z_trial, &mut c);
        self.evals += 1;

        // CG on (J Jᵀ) y = c
        let mut y = vec![0.0; rows];
        let mut r = c.clone();
        let mut p = r.clone();
        let mut jt_p = vec![0.0; n];
        let mut j_jt_p = vec![0.0; rows];
        let mut rs = dot(&r, &r);
        let rs0 = rs;
        for _ in 0..20 {
            if rs <= 1e-6 * rs0 || rs == 0.0 {
                break;
            }
            self.prob.jac_t_vec(z_origin, &p, &mut jt_p, &mut self.ws);
            self.prob.jac_vec(z_origin, &jt_p, &mut j_jt_p, &mut self.ws);
            self.evals += 2;
            let php = dot(&p, &j_jt_p).max(1e-300);
            let alpha = rs / php;
            for i in 0..rows {
                y[i] += alpha * p[i];
                r[i] -= alpha * j_jt_p[i];
            }
            let rs_new = dot(&r, &r);
            let beta = rs_new / rs;
            rs = rs_new;
            for i in 0..rows {
                p[i] = r[i] + beta * p[i];
            }
        }
        self.prob.jac_t_vec(z_origin, &y, d_soc, &mut self.ws);
        self.evals += 1;
        for v in d_soc.iter_mut() {
            *v = -*v;
        }
    }

    /// Minimizes the augmented Lagrangian over the box until the projected
    /// gradient drops below `omega` or the evaluation budget runs out.
    fn solve(
        &mut self,
        z: &mut [f64],
        lambda: &[f64],
        mu: f64,
        omega: f64,
        budget: usize,
    ) -> (f64, InnerStatus) {
        let n = z.len();
        let rows = self.prob.num_rows();
        let start_evals = self.evals;
        let mut grad = vec![0.0; n];
        let mut pg = vec![0.0; n];
        let mut d = vec![0.0; n];
        let mut z_trial = vec![0.0; n];
        let mut free = vec![false; n];
        let mut resid = vec![0.0; rows];
        let mut y_frozen = vec![0.0; rows];

        let mut phi = self.value_grad(z, lambda, mu, &mut grad);
        self.project_gradient(z, &grad, &mut pg);
        let mut cauchy_t: f64 = 1.0;

        loop {
            let pg_norm = inf_norm(&pg);
            if pg_norm <= omega {
                return (pg_norm, InnerStatus::Converged);
            }
            if self.evals - start_evals >= budget {
                return (pg_norm, InnerStatus::Budget);
            }

            // Cauchy phase: a search along the projected-gradient path, which
            // bends at the box and can activate many bounds in one sweep.
            // Without it a projected Newton method identifies the bang-bang
            // active set one control at a time.
            {
                let mut t = cauchy_t.max(1e-12);
                let mut best_c: Option<(f64, f64)> = None; // (t, phi)
                let mut expansions = 0;
                loop {
                    for i in 0..n {
                        z_trial[i] =
                            (z[i] - t * pg[i]).clamp(self.prob.lower[i], self.prob.upper[i]);
                    }
                    let mut dir_der = 0.0;
                    for i in 0..n {
                        dir_der += pg[i] * (z_trial[i] - z[i]);
                    }
                    let phi_trial = self.value(&z_trial, lambda, mu);
                    let ok = dir_der < 0.0
                        && phi_trial <= phi + 1e-4 * dir_der + 4.0 * f64::EPSILON * phi.abs();
                    if ok && phi_trial < best_c.map(|b| b.1).unwrap_or(f64::INFINITY) {
                        best_c = Some((t, phi_trial));
                        if expansions < 8 {
                            expansions += 1;
                            t *= 2.0;
                            continue;
                        }
                        break;
                    }
                    if best_c.is_some() {
                        break;
                    }
                    t *= 0.25;
                    expansions += 1;
                    if expansions > 40 {
                        break;
                    }
                }
                if let Some((t_c, _)) = best_c {
                    cauchy_t = t_c;
                    for i in 0..n {
                        z[i] = (z[i] - t_c * pg[i]).clamp(self.prob.lower[i], self.prob.upper[i]);
                    }
                    phi = self.value_grad(z, lambda, mu, &mut grad);
                    self.project_gradient(z, &grad, &mut pg);
                    let pg_norm = inf_norm(&pg);
                    if pg_norm <= omega {
                        return (pg_norm, InnerStatus::Converged);
                    }
                }
            }

            for i in 0..n {
                let at_lo = z[i] <= self.prob.lower[i] && grad[i] > 0.0;
                let at_hi = z[i] >= self.prob.upper[i] && grad[i] < 0.0;
                let pinned = self.prob.lower[i] == self.prob.upper[i];
                free[i] = !(at_lo || at_hi || pinned);
            }
            self.prob.residuals(z, &mut resid);
            for r in 0..rows {
                y_frozen[r] = lambda[r] + mu * resid[r];
            }
            let neg_curv = self.newton_direction(z, &y_frozen, mu, &free, &mut d);
            let newton_descent = dot(&d, &pg) < 0.0;
            if !newton_descent {
                for i in 0..n {
                    d[i] = -pg[i];
                }
            }

            // Armijo backtracking along the projected Newton arc, with a
            // second-order correction attempt at the full step.
            let mut best: Option<(Vec<f64>, f64, f64)> = None; // (z, phi, alpha)
            let mut alpha = 1.0;
            for trial_idx in 0..40 {
                for i in 0..n {
                    z_trial[i] =
                        (z[i] + alpha * d[i]).clamp(self.prob.lower[i], self.prob.upper[i]);
                }
                let mut dir_der = 0.0;
                for i in 0..n {
                    dir_der += pg[i] * (z_trial[i] - z[i]);
                }
                if dir_der < 0.0 {
                    let phi_trial = self.value(&z_trial, lambda, mu);
                    // Armijo with a roundoff floor so the search does not
                    // reject pure floating-point noise near a minimizer.
                    let threshold = phi + 1e-4 * dir_der + 4.0 * f64::EPSILON * phi.abs();
                    if phi_trial <= threshold {
                        best = Some((z_trial.clone(), phi_trial, alpha));
                        break;
                    }
                    if trial_idx == 0 {
                        // full step rejected: re-project onto the constraint
                        // manifold and retry against the same threshold
                        let mut d_soc = vec![0.0; n];
                        self.soc_step(z, &z_trial, &mut d_soc);
                        let mut z_soc = vec![0.0; n];
                        for i in 0..n {
                            z_soc[i] = (z_trial[i] + d_soc[i])
                                .clamp(self.prob.lower[i], self.prob.upper[i]);
                        }
                        let phi_soc = self.value(&z_soc, lambda, mu);
                        if phi_soc <= threshold {
                            best = Some((z_soc, phi_soc, alpha));
                            break;
                        }
                    }
                }
                alpha *= 0.5;
            }

            // On a ridge the gradient is nearly orthogonal to the escape
            // direction, so always probe the negative-curvature direction
            // with an expanding step in both signs and keep the best actual
            // decrease. The probe is a handful of value calls, negligible
            // next to one Hessian assembly.
            if let Some((v, curv)) = &neg_curv {
                let mut nc_best: Option<(Vec<f64>, f64)> = None;
                let step0 = (2e-3 * (1.0 + phi.abs()) / curv.abs().max(1e-8)).sqrt().min(1.0);
                for sign in [1.0, -1.0] {
                    let mut step = step0;
                    let mut last_phi = f64::INFINITY;
                    for _ in 0..14 {
                        for i in 0..n {
                            z_trial[i] = (z[i] + sign * step * v[i])
                                .clamp(self.prob.lower[i], self.prob.upper[i]);
                        }
                        let phi_trial = self.value(&z_trial, lambda, mu);
                        if phi_trial < phi - 1e-10 * (1.0 + phi.abs())
                            && phi_trial < nc_best.as_ref().map(|b| b.1).unwrap_or(f64::INFINITY)
                        {
                            nc_best = Some((z_trial.clone(), phi_trial));
                        }
                        if phi_trial >= last_phi {
                            break;
                        }
                        last_phi = phi_trial;
                        step *= 2.0;
                    }
                }
                if let Some((z_nc, phi_nc)) = nc_best {
                    if phi_nc < best.as_ref().map(|b| b.1).unwrap_or(f64::INFINITY) {
                        best = Some((z_nc, phi_nc, -1.0));
                    }
                }
            }

            // Last resort: projected steepest descent.
            if best.is_none() {
                let pg_norm = inf_norm(&pg).max(1.0);
                let mut alpha = 1.0 / pg_norm;
                for _ in 0..40 {
                    for i in 0..n {
                        z_trial[i] =
                            (z[i] - alpha * pg[i]).clamp(self.prob.lower[i], self.prob.upper[i]);
                    }
                    let mut dir_der = 0.0;
                    for i in 0..n {
                        dir_der += pg[i] * (z_trial[i] - z[i]);
                    }
                    if dir_der < 0.0 {
                        let phi_trial = self.value(&z_trial, lambda, mu);
                        if phi_trial <= phi + 1e-4 * dir_der + 4.0 * f64::EPSILON * phi.abs() {
                            best = Some((z_trial.clone(), phi_trial, alpha));
                            break;
                        }
                    }
                    alpha *= 0.5;
                }
            }

            match best {
                Some((z_new, _, alpha)) => {
                    z.copy_from_slice(&z_new);
                    phi = self.value_grad(z, lambda, mu, &mut grad);
                    self.project_gradient(z, &grad, &mut pg);
                    // full steps earn a lower shift next time; cut steps
                    // raise it (Levenberg-Marquardt adaptation)
                    if alpha >= 1.0 {
                        self.lm_shift *= 0.25;
                        if self.lm_shift < 1e-12 {
                            self.lm_shift = 0.0;
                        }
                    } else if (0.0..0.25).contains(&alpha) {
                        self.lm_shift = (self.lm_shift * 4.0).max(1e-8);
                    }
                    if std::env::var("INNER_TRACE").is_ok() {
                        let nfree = free.iter().filter(|f| **f).count();
                        eprintln!(
                            "  newton: pg {:9.2e} alpha {alpha:9.2e} newton_dir {newton_descent} nc {} free {nfree} phi {phi:14.8e}",
                            inf_norm(&pg),
                            neg_curv.is_some(),
                        );
                    }
                }
                None => return (inf_norm(&pg), InnerStatus::Stalled),
            }
        }
    }
}

/// Solves the transcribed problem, starting from `guess` when given.
///
/// A converged solution satisfies max-abs defect ≤ `defect_tol`, exact
/// boundary conditions (endpoint states are pinned), projected-gradient
/// stationarity of the augmented Lagrangian ≤ `stationarity_tol`, and all
/// variable bounds. Non-convergence is an error carrying the best iterate.
pub fn solve(
    problem: &NlpProblem,
    guess: Option<&[f64]>,
    opts: &SolveOptions,
) -> Result<OcpSolution, OcpError> {
    let n = problem.num_vars();
    let mut z = match guess {
        Some(g) => {
            if g.len() != n {
                return Err(OcpError::LayoutMismatch { expected: n, got: g.len() });
            }
            g.to_vec()
        }
        None => problem.initial_guess(),
    };
    problem.project(&mut z);

    let rows = problem.num_rows();
    let mut lambda = vec![0.0; rows];
    let mut resid = vec![0.0; rows];
    let mut mu = opts.mu0;
    let mut omega = (1.0 / mu).max(opts.stationarity_tol);
    let mut eta = 1.0 / mu.powf(0.1);
    let mut inner = Inner::new(problem);

    let mut best_z = z.clone();
    let mut best_v = f64::INFINITY;
    let mut stagnant = 0usize;
    let mut best_polish_pg = f64::INFINITY;
    let mut polish_no_improve = 0usize;
    let mut polish = false;
    let mut polish_best_v = f64::INFINITY;
    let mut polish_v_stall = 0usize;

    let max_outer = std::env::var("OUTER").ok().and_then(|v| v.parse().ok()).unwrap_or(opts.max_outer);
    for outer in 0..max_outer {
        let (pg_norm, status) = inner.solve(&mut z, &lambda, mu, omega, opts.max_inner);

        problem.residuals(&z, &mut resid);
        let v = resid.iter().fold(0.0f64, |m, r| m.max(r.abs()));

        if opts.verbose {
            let lmax = lambda.iter().fold(0.0f64, |m, l| m.max(l.abs()));
            {
                let mut g = vec![0.0; n];
                let mut ws2 = Workspace::new();
                problem.al_eval(&z, &lambda, mu, Some(&mut g), &mut ws2);
                let mut imax = 0;
                let mut vmax = 0.0;
                for i in 0..n {
                    let at_lo = z[i] <= problem.lower[i];
                    let at_hi = z[i] >= problem.upper[i];
                    let pgi = if (at_lo && g[i] > 0.0) || (at_hi && g[i] < 0.0) { 0.0 } else { g[i] };
                    if pgi.abs() > vmax { vmax = pgi.abs(); imax = i; }
                }
                let k = problem.num_nodes();
                let kind = if imax < 6 * k { format!("state n{} c{}", imax / 6, imax % 6) }
                    else if imax < 8 * k { format!("ctrl n{} c{}", (imax - 6 * k) / 2, (imax - 6 * k) % 2) }
                    else if imax < problem.tf_idx() { format!("mid s{} c{}", (imax - 8 * k) / 2, (imax - 8 * k) % 2) }
                    else { "tf".to_string() };
                eprintln!("   argmax pg: [{imax}] {kind} z {:.6e} lo {:.2e} hi {:.2e} g {:.4e}", z[imax], problem.lower[imax], problem.upper[imax], g[imax]);
            }
            eprintln!(
                "outer {outer:3}  v {v:10.3e}  pg {pg_norm:10.3e}  mu {mu:9.2e}  omega {omega:9.2e}  tf {:8.4}  J {:9.5}  lam {lmax:9.2e}  evals {:7}  {status:?}",
                z[problem.tf_idx()],
                problem.eval_cost(&z).unwrap_or(f64::NAN),
                inner.evals,
            );
        }

        if v < best_v {
            best_v = v;
            best_z.copy_from_slice(&z);
        }

        if v <= opts.defect_tol && pg_norm <= opts.stationarity_tol {
            return Ok(problem.extract(&z, true));
        }

        if !polish && v <= opts.defect_tol {
            // Feasibility reached: switch to a moderate fixed penalty for the
            // dual iteration so the multiplier updates are gentle, and demand
            // final stationarity from the inner solves.
            polish = true;
            mu = opts.mu_polish;
            omega = opts.stationarity_tol;
        }

        if polish {
            for (l, c) in lambda.iter_mut().zip(resid.iter()) {
                *l += mu * c;
            }
            if v < 0.9 * polish_best_v {
                polish_best_v = v;
                polish_v_stall = 0;
            } else {
                polish_v_stall += 1;
                if polish_v_stall >= 4 && v > opts.defect_tol {
                    // dual contraction too slow at this penalty
                    mu = (mu * 3.0).min(opts.mu_max);
                    polish_v_stall = 0;
                }
            }
            if pg_norm < 0.5 * best_polish_pg {
                best_polish_pg = pg_norm;
                polish_no_improve = 0;
            } else {
                polish_no_improve += 1;
                if polish_no_improve >= 12 {
                    break;
                }
            }
        } else if v <= eta {
            for (l, c) in lambda.iter_mut().zip(resid.iter()) {
                *l += mu * c;
            }
            eta = (eta / mu.powf(0.9)).max(0.1 * opts.defect_tol);
            omega = (omega / mu).max(opts.stationarity_tol);
            stagnant = 0;
        } else {
            mu = (mu * opts.mu_factor).min(opts.mu_max);
            eta = 1.0 / mu.powf(0.1);
            omega = (1.0 / mu).max(opts.stationarity_tol);
            if v > 0.99 * best_v {
                stagnant += 1;
                if stagnant >= 10 {
                    break;
                }
            } else {
                stagnant = 0;
            }
        }
    }

    let best = problem.extract(&best_z, false);
    let defect = best.defect_norm;
    Err(OcpError::NotConverged {
        best: Box::new(best),
        reason: "iteration cap or stalled progress".to_string(),
        defect,
    })
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}
