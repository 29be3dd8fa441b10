//! Localization and uncertainty functionals on the weighted sphere, the
//! identity verifiers backing them, and numerical estimation of the optimal
//! constant in the localization-times-Dirichlet product.
//!
//! All singular integrands of the form `f^2 / <x, v>` are rewritten through
//! the reflection difference quotient: over any reflection-symmetric region
//! the integral equals `integral (E_v f) f h^2`, which is polynomial. No raw
//! division ever reaches the quadrature.

use std::sync::Arc;

use rand::prelude::*;
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use crate::error::{CoreError, Result};
use crate::harmonics::{HarmonicStore, SphereFunction};
use crate::operators::{angular_derivative, OperatorContext};
use crate::poly::{MPoly, Poly};
use crate::quadrature::{QuadBackend, SphereQuad};

/// Bundle of everything needed to analyze one weighted sphere.
pub struct WeightedSphere {
    ctx: Arc<OperatorContext>,
    quad: Arc<SphereQuad>,
    store: Arc<HarmonicStore>,
}

#[derive(Clone, Debug, Serialize)]
pub struct DecompositionCheck {
    /// `sum_n n (n + 2 lambda) |proj_n f|^2`
    pub spectral: f64,
    /// `sum_{i<j} |D_{ij} f|^2`
    pub rotation_sum: f64,
    /// `sum_v kappa_v |E_v f|^2`
    pub reflection_sum: f64,
    pub residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GradientIdentityCheck {
    pub spectral: f64,
    pub gradient_norm_sq: f64,
    /// `integral (x . grad f) f h^2`, from the gradient components.
    pub radial_direct: f64,
    /// Same integral via the reflection sum.
    pub radial_reflection: f64,
    pub route_gap: f64,
    pub residual: f64,
    pub norm_inequality_ok: bool,
    pub sign_ok: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct LemmaCheck {
    pub moment_side: f64,
    pub singular_side: f64,
    pub rotation_side: f64,
    pub residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct J2Check {
    pub root_index: usize,
    pub value: f64,
    pub bound: f64,
    pub margin: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ProofBoundsReport {
    pub epsilon: f64,
    pub localization: f64,
    pub j1: f64,
    pub j1_bound: f64,
    pub j1_margin: f64,
    /// Worst slack of the pointwise Cauchy-Schwarz step over the node set.
    pub pointwise_margin_min: f64,
    pub j2: Vec<J2Check>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ReportMeta {
    pub family: String,
    pub dim: usize,
    pub kappa: Vec<String>,
    pub backend: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct UncertaintyReport {
    pub localization: f64,
    /// Minimizing direction; absent when the moment vector vanishes and any
    /// direction attains the minimum.
    pub argmin: Option<Vec<f64>>,
    pub dirichlet: f64,
    pub product: f64,
    pub decomposition_residual: f64,
    pub gradient_residual: f64,
    pub lemma_residual: f64,
    pub norm_inequality_ok: bool,
    pub sign_ok: bool,
    pub meta: ReportMeta,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConstantEstimate {
    pub c_hat: f64,
    pub degree_budget: usize,
    pub restarts: usize,
    pub seed: u64,
    pub converged: bool,
    pub best_start: usize,
    pub iterations: usize,
    /// Lower bound extracted from the proof chain by an epsilon sweep.
    pub proof_lower_bound: f64,
    pub witness_coeffs: Vec<f64>,
    pub witness: String,
}

impl WeightedSphere {
    pub fn new(ctx: Arc<OperatorContext>, max_degree: usize) -> Result<Arc<Self>> {
        let quad = SphereQuad::auto(ctx.clone())?;
        Ok(Arc::new(WeightedSphere {
            ctx,
            store: HarmonicStore::new(quad.clone(), max_degree),
            quad,
        }))
    }

    pub fn with_quad(ctx: Arc<OperatorContext>, quad: Arc<SphereQuad>, max_degree: usize) -> Arc<Self> {
        Arc::new(WeightedSphere {
            ctx,
            store: HarmonicStore::new(quad.clone(), max_degree),
            quad,
        })
    }

    pub fn ctx(&self) -> &Arc<OperatorContext> {
        &self.ctx
    }
    pub fn quad(&self) -> &Arc<SphereQuad> {
        &self.quad
    }
    pub fn store(&self) -> &Arc<HarmonicStore> {
        &self.store
    }
    pub fn dim(&self) -> usize {
        self.ctx.dim()
    }

    pub fn meta(&self) -> ReportMeta {
        ReportMeta {
            family: self.ctx.root_system().family().to_string(),
            dim: self.dim(),
            kappa: (0..self.ctx.root_system().num_roots())
                .map(|v| self.ctx.kappa().value_rat(v).to_string())
                .collect(),
            backend: self.quad.backend().to_string(),
        }
    }

    /// Removes the weighted mean and scales to unit weighted norm. Returns
    /// the normalized polynomial and its harmonic expansion.
    pub fn normalize_admissible(&self, f: &MPoly<f64>) -> Result<(MPoly<f64>, SphereFunction)> {
        let omega = self.quad.omega()?;
        let mean = self.quad.integrate_poly(f)? / omega;
        let centered = f.sub(&MPoly::constant(self.dim(), mean));
        let norm_sq = self.quad.norm_sq(&centered)?;
        let scale = f.max_coeff_abs().max(1.0);
        if norm_sq.sqrt() <= 1e-12 * scale {
            return Err(CoreError::ZeroFunction);
        }
        let normalized = centered.scale(&(1.0 / norm_sq.sqrt()));
        let sf = self.store.decompose(&normalized)?;
        Ok((normalized, sf))
    }

    /// First moment of `|f|^2 h^2 dsigma`.
    pub fn moment_vector(&self, f: &MPoly<f64>) -> Result<Vec<f64>> {
        let f_sq = f.mul(f);
        (0..self.dim())
            .map(|i| {
                let xi = MPoly::var(self.dim(), i);
                self.quad.integrate_poly(&f_sq.mul(&xi))
            })
            .collect()
    }

    /// Closed-form localization minimum `1 - |m|` with its minimizer
    /// `m / |m|` (absent when the moment vector vanishes). Assumes `f` has
    /// unit weighted norm.
    pub fn localization_min(&self, f: &MPoly<f64>) -> Result<(f64, Option<Vec<f64>>)> {
        let m = self.moment_vector(f)?;
        let norm = m.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm <= 1e-12 {
            return Ok((1.0, None));
        }
        Ok((1.0 - norm, Some(m.iter().map(|x| x / norm).collect())))
    }

    /// Localization value at a fixed direction, via the moment vector.
    pub fn localization_at(&self, f: &MPoly<f64>, y: &[f64]) -> Result<f64> {
        let m = self.moment_vector(f)?;
        Ok(1.0 - m.iter().zip(y).map(|(a, b)| a * b).sum::<f64>())
    }

    /// Localization value at a fixed direction by direct integration of
    /// `(1 - <x,y>) f^2 h^2`; independent of the moment shortcut.
    pub fn localization_at_direct(&self, f: &MPoly<f64>, y: &[f64]) -> Result<f64> {
        let d = self.dim();
        let f_sq = f.mul(f);
        let mut lin = MPoly::one(d);
        for (i, &yi) in y.iter().enumerate() {
            lin = lin.sub(&MPoly::var(d, i).scale(&yi));
        }
        self.quad.integrate_poly(&f_sq.mul(&lin))
    }

    /// Seeded stochastic grid search over directions with shrinking-radius
    /// refinement; the oracle for the closed-form minimum.
    pub fn grid_search_localization(
        &self,
        f: &MPoly<f64>,
        coarse: usize,
        seed: u64,
    ) -> Result<(f64, Vec<f64>)> {
        let d = self.dim();
        let m = self.moment_vector(f)?;
        let value = |y: &[f64]| 1.0 - m.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut best_y: Vec<f64> = vec![0.0; d];
        best_y[0] = 1.0;
        let mut best = value(&best_y);
        let consider = |y: Vec<f64>, best: &mut f64, best_y: &mut Vec<f64>| {
            let v = value(&y);
            if v < *best {
                *best = v;
                *best_y = y;
            }
        };
        for i in 0..d {
            for sign in [1.0, -1.0] {
                let mut y = vec![0.0; d];
                y[i] = sign;
                consider(y, &mut best, &mut best_y);
            }
        }
        for _ in 0..coarse {
            let y = random_unit(d, &mut rng);
            consider(y, &mut best, &mut best_y);
        }
        let mut radius = 0.5;
        for _ in 0..60 {
            for _ in 0..24 {
                let dir = random_unit(d, &mut rng);
                let y: Vec<f64> = best_y
                    .iter()
                    .zip(&dir)
                    .map(|(a, b)| a + radius * b)
                    .collect();
                let n = y.iter().map(|x| x * x).sum::<f64>().sqrt();
                let y: Vec<f64> = y.into_iter().map(|x| x / n).collect();
                consider(y, &mut best, &mut best_y);
            }
            radius *= 0.7;
        }
        Ok((best, best_y))
    }

    /// Spectral Dirichlet term `| (-Lap)^{1/2} f |^2`.
    pub fn dirichlet(&self, sf: &SphereFunction) -> f64 {
        self.store.dirichlet_energy(sf)
    }

    /// Splitting of the Dirichlet energy into angular-derivative and
    /// reflection-difference parts.
    pub fn verify_decomposition(&self, f: &MPoly<f64>) -> Result<DecompositionCheck> {
        let d = self.dim();
        let sf = self.store.decompose(f)?;
        let spectral = self.store.dirichlet_energy(&sf);
        let fp = Poly::Float(f.clone());
        let mut rotation_sum = 0.0;
        for i in 0..d {
            for j in (i + 1)..d {
                let dij = angular_derivative(i, j, &fp)?;
                rotation_sum += self.quad.norm_sq(&dij.as_float())?;
            }
        }
        let mut reflection_sum = 0.0;
        for v in 0..self.ctx.root_system().num_roots() {
            let k = self.ctx.kappa().value(v);
            if k == 0.0 {
                continue;
            }
            let ev = self.ctx.difference_op(v, &fp)?;
            reflection_sum += k * self.quad.norm_sq(&ev.as_float())?;
        }
        Ok(DecompositionCheck {
            spectral,
            rotation_sum,
            reflection_sum,
            residual: (spectral - rotation_sum - reflection_sum).abs(),
        })
    }

    /// Relation between the Dirichlet term, the full tangential gradient and
    /// the radial-gradient correction, together with the sign information
    /// that turns it into the norm inequality.
    pub fn verify_gradient_identity(&self, f: &MPoly<f64>) -> Result<GradientIdentityCheck> {
        let sf = self.store.decompose(f)?;
        let spectral = self.store.dirichlet_energy(&sf);
        let fp = Poly::Float(f.clone());
        let grads = self.ctx.sphere_gradient_poly(&fp)?;
        let mut gradient_norm_sq = 0.0;
        for g in &grads {
            gradient_norm_sq += self.quad.norm_sq(&g.as_float())?;
        }
        let d = self.dim();
        let mut radial_poly = MPoly::zero(d);
        for (i, g) in grads.iter().enumerate() {
            radial_poly = radial_poly.add(&MPoly::var(d, i).mul(&g.as_float()));
        }
        let radial_direct = self.quad.inner(&radial_poly, f)?;
        let refl = self.ctx.reflection_sum(&fp)?;
        let radial_reflection = self.quad.inner(&refl.as_float(), f)?;
        let lambda = self.ctx.lambda();
        let residual = (spectral - (gradient_norm_sq - 2.0 * lambda * radial_direct)).abs();
        let scale = gradient_norm_sq.abs().max(1.0);
        // Inputs constant on the sphere leave both norms at rounding level
        // and moment cancellation can produce tiny negatives, hence the
        // clamps and the absolute floor next to the relative factor.
        let lhs = spectral.max(0.0).sqrt();
        let rhs = gradient_norm_sq.max(0.0).sqrt();
        let floor = 1e-10 * (1.0 + sf.norm_sq().sqrt());
        Ok(GradientIdentityCheck {
            spectral,
            gradient_norm_sq,
            radial_direct,
            radial_reflection,
            route_gap: (radial_direct - radial_reflection).abs(),
            residual,
            norm_inequality_ok: lhs <= rhs * (1.0 + 1e-10) + floor,
            sign_ok: radial_direct >= -1e-10 * scale,
        })
    }

    /// First-moment identity: the weighted first moment of `|f|^2` equals
    /// the reflection (difference-quotient) term plus the angular-derivative
    /// term, with coefficient `(d-1)/2 + |kappa|`.
    pub fn verify_lemma(&self, f: &MPoly<f64>, y: &[f64]) -> Result<LemmaCheck> {
        let d = self.dim();
        if y.len() != d {
            return Err(CoreError::DimensionMismatch {
                expected: d,
                got: y.len(),
            });
        }
        let coef = (d as f64 - 1.0) / 2.0 + self.ctx.kappa().total();
        let f_sq = f.mul(f);
        let mut moment = 0.0;
        for (i, &yi) in y.iter().enumerate() {
            if yi != 0.0 {
                moment += yi * self.quad.integrate_poly(&f_sq.mul(&MPoly::var(d, i)))?;
            }
        }
        let moment_side = coef * moment;

        let fp = Poly::Float(f.clone());
        let mut singular_side = 0.0;
        for (v, root) in self.ctx.root_system().positive_roots().iter().enumerate() {
            let k = self.ctx.kappa().value(v);
            if k == 0.0 {
                continue;
            }
            let y_dot: f64 = y.iter().zip(&root.coords).map(|(a, b)| a * b).sum();
            if y_dot == 0.0 {
                continue;
            }
            let ev = self.ctx.difference_op(v, &fp)?;
            singular_side += k * y_dot * self.quad.inner(&ev.as_float(), f)?;
        }

        let mut rotation_poly = MPoly::zero(d);
        for i in 0..d {
            if y[i] == 0.0 {
                continue;
            }
            for j in 0..d {
                if i == j {
                    continue;
                }
                let dij = angular_derivative(i, j, &fp)?;
                rotation_poly =
                    rotation_poly.add(&MPoly::var(d, j).mul(&dij.as_float()).scale(&y[i]));
            }
        }
        let rotation_side = self.quad.inner(&rotation_poly, f)?;

        Ok(LemmaCheck {
            moment_side,
            singular_side,
            rotation_side,
            residual: (moment_side - singular_side - rotation_side).abs(),
        })
    }

    /// The two integral estimates used to bound the moment identity, at a
    /// fixed split parameter `epsilon`; `f` must be normalized.
    pub fn proof_bounds(&self, f: &MPoly<f64>, y: &[f64], epsilon: f64) -> Result<ProofBoundsReport> {
        if !(0.0 < epsilon && epsilon < 1.0) {
            return Err(CoreError::InvalidParameter(format!(
                "epsilon must lie in (0,1), got {epsilon}"
            )));
        }
        let d = self.dim();
        let loc = self.localization_at(f, y)?;
        let fp = Poly::Float(f.clone());
        let mut dij_polys = vec![];
        for i in 0..d {
            for j in 0..d {
                dij_polys.push(angular_derivative(i, j, &fp)?.as_float());
            }
        }
        let mut rotation_pair_sum = 0.0;
        for i in 0..d {
            for j in (i + 1)..d {
                rotation_pair_sum += self.quad.norm_sq(&dij_polys[i * d + j])?;
            }
        }
        let mut rotation_poly = MPoly::zero(d);
        for i in 0..d {
            for j in 0..d {
                if y[i] != 0.0 && i != j {
                    rotation_poly =
                        rotation_poly.add(&MPoly::var(d, j).mul(&dij_polys[i * d + j]).scale(&y[i]));
                }
            }
        }
        let j1 = self.quad.inner(&rotation_poly, f)?.abs();
        let j1_bound = 2.0 * rotation_pair_sum.sqrt() * loc.max(0.0).sqrt();

        // Pointwise Cauchy-Schwarz step behind the J1 bound, checked on the
        // nodes of a quadrature rule plus random sphere points.
        let mut pointwise_margin_min = f64::INFINITY;
        let mut check_point = |x: &[f64]| {
            let mut lhs = 0.0;
            for i in 0..d {
                for j in 0..d {
                    if i != j {
                        lhs += (y[i] - x[i]) * x[j] * dij_polys[i * d + j].eval_f64(x);
                    }
                }
            }
            let lhs = lhs * lhs;
            let mut dsum = 0.0;
            for i in 0..d {
                for j in (i + 1)..d {
                    dsum += dij_polys[i * d + j].eval_f64(x).powi(2);
                }
            }
            let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
            let rhs = 4.0 * (1.0 - dot) * dsum;
            let margin = rhs - lhs;
            if margin < pointwise_margin_min {
                pointwise_margin_min = margin;
            }
        };
        let level = 2 * f.degree().unwrap_or(1) + 2;
        if let Ok(rule) = self.quad.product_rule(level) {
            for node in rule.nodes.iter().take(800) {
                check_point(node);
            }
        }
        let mut rng = ChaCha20Rng::seed_from_u64(0x9e37_79b9);
        for _ in 0..100 {
            let x = random_unit(d, &mut rng);
            check_point(&x);
        }

        let mut j2 = vec![];
        for (v, root) in self.ctx.root_system().positive_roots().iter().enumerate() {
            let k = self.ctx.kappa().value(v);
            if k == 0.0 {
                continue;
            }
            let y_dot: f64 = y.iter().zip(&root.coords).map(|(a, b)| a * b).sum();
            let ev = self.ctx.difference_op(v, &fp)?.as_float();
            let value = (y_dot * self.quad.inner(&ev, f)?).abs();
            let bound = 1.0 / (1.0 - epsilon)
                + std::f64::consts::SQRT_2 / epsilon
                    * self.quad.norm_sq(&ev)?.sqrt()
                    * loc.max(0.0).sqrt();
            j2.push(J2Check {
                root_index: v,
                value,
                bound,
                margin: bound - value,
            });
        }

        Ok(ProofBoundsReport {
            epsilon,
            localization: loc,
            j1,
            j1_bound,
            j1_margin: j1_bound - j1,
            pointwise_margin_min,
            j2,
        })
    }

    /// Full uncertainty evaluation of an (unnormalized) polynomial.
    pub fn uncertainty_product(&self, f: &MPoly<f64>) -> Result<UncertaintyReport> {
        let (fnorm, sf) = self.normalize_admissible(f)?;
        let (localization, argmin) = self.localization_min(&fnorm)?;
        let dirichlet = self.dirichlet(&sf);
        let product = localization * dirichlet;
        let decomposition = self.verify_decomposition(&fnorm)?;
        let gradient = self.verify_gradient_identity(&fnorm)?;
        let y_for_lemma = argmin.clone().unwrap_or_else(|| {
            let mut e1 = vec![0.0; self.dim()];
            e1[0] = 1.0;
            e1
        });
        let lemma = self.verify_lemma(&fnorm, &y_for_lemma)?;
        Ok(UncertaintyReport {
            localization,
            argmin,
            dirichlet,
            product,
            decomposition_residual: decomposition.residual,
            gradient_residual: gradient.residual,
            lemma_residual: lemma.residual,
            norm_inequality_ok: gradient.norm_inequality_ok,
            sign_ok: gradient.sign_ok,
            meta: self.meta(),
        })
    }

    /// Lower bound on the product over all admissible functions, extracted
    /// from the split-parameter sweep of the proof chain.
    pub fn proof_side_lower_bound(&self) -> f64 {
        let d = self.dim() as f64;
        let total = self.ctx.kappa().total();
        let coef = (d - 1.0) / 2.0 + total;
        let bound_at = |eps: f64| -> f64 {
            let numerator = (1.0 - eps) * coef - total / (1.0 - eps);
            if numerator > 0.0 {
                let g = numerator / (std::f64::consts::SQRT_2 * total.sqrt() / eps + 2.0);
                eps.min(g * g)
            } else {
                0.0
            }
        };
        let mut best = 0.0f64;
        let mut best_eps = 0.5;
        let mut eps = 0.002;
        while eps < 1.0 {
            let b = bound_at(eps);
            if b > best {
                best = b;
                best_eps = eps;
            }
            eps += 0.002;
        }
        // Fine pass around the coarse optimum.
        let mut eps = (best_eps - 0.002).max(1e-6);
        let hi = (best_eps + 0.002).min(1.0 - 1e-6);
        while eps < hi {
            best = best.max(bound_at(eps));
            eps += 2e-6;
        }
        best
    }

    /// Builds the concatenated harmonic basis of degrees `1..=budget`
    /// together with the diagonal of Dirichlet eigenvalues and the moment
    /// matrices `M_j[k,l] = <x_j Y_k, Y_l>`.
    fn optimization_space(&self, budget: usize) -> Result<(Vec<MPoly<f64>>, Vec<f64>, Vec<Vec<Vec<f64>>>)> {
        let d = self.dim();
        let mut basis = vec![];
        let mut eigs = vec![];
        for n in 1..=budget {
            let b = self.store.basis(n)?;
            for y in &b.elements {
                basis.push(y.clone());
                eigs.push(self.store.eigenvalue(n));
            }
        }
        let k = basis.len();
        let mut moment_mats = vec![vec![vec![0.0; k]; k]; d];
        for a in 0..k {
            for b in a..k {
                let prod = basis[a].mul(&basis[b]);
                for (j, mm) in moment_mats.iter_mut().enumerate() {
                    let v = self.quad.integrate_poly(&prod.mul(&MPoly::var(d, j)))?;
                    mm[a][b] = v;
                    mm[b][a] = v;
                }
            }
        }
        Ok((basis, eigs, moment_mats))
    }

    /// Projected-gradient minimization of the uncertainty product over unit
    /// coefficient vectors on the harmonic span of degrees `1..=budget`.
    /// Deterministic for a fixed seed; `warm_starts` (padded or truncated to
    /// the coefficient count) are tried before the random restarts.
    pub fn estimate_constant(
        &self,
        budget: usize,
        restarts: usize,
        seed: u64,
        warm_starts: &[Vec<f64>],
    ) -> Result<ConstantEstimate> {
        if budget < 1 {
            return Err(CoreError::InvalidParameter(
                "degree budget must be at least 1".into(),
            ));
        }
        let (basis, eigs, moment_mats) = self.optimization_space(budget)?;
        let k = basis.len();
        let d = self.dim();

        let objective = |c: &[f64]| -> f64 {
            let q: f64 = c.iter().zip(&eigs).map(|(ci, ei)| ei * ci * ci).sum();
            let mut m_norm_sq = 0.0;
            for mm in moment_mats.iter().take(d) {
                let mut mj = 0.0;
                for a in 0..k {
                    let mut row = 0.0;
                    for b in 0..k {
                        row += mm[a][b] * c[b];
                    }
                    mj += c[a] * row;
                }
                m_norm_sq += mj * mj;
            }
            (1.0 - m_norm_sq.sqrt()) * q
        };

        let normalize = |c: &mut Vec<f64>| {
            let n = c.iter().map(|x| x * x).sum::<f64>().sqrt();
            if n > 0.0 {
                for x in c.iter_mut() {
                    *x /= n;
                }
            }
        };

        let descend = |start: Vec<f64>| -> (f64, Vec<f64>, usize, bool) {
            let mut c = start;
            normalize(&mut c);
            let mut value = objective(&c);
            let h = 1e-6;
            let mut iterations = 0;
            let mut converged = false;
            for _ in 0..300 {
                iterations += 1;
                // Central-difference gradient of the ambient objective.
                let mut grad = vec![0.0; k];
                for i in 0..k {
                    let mut cp = c.clone();
                    let mut cm = c.clone();
                    cp[i] += h;
                    cm[i] -= h;
                    grad[i] = (objective(&cp) - objective(&cm)) / (2.0 * h);
                }
                let dot: f64 = grad.iter().zip(&c).map(|(g, ci)| g * ci).sum();
                let tangent: Vec<f64> = grad.iter().zip(&c).map(|(g, ci)| g - dot * ci).collect();
                let tnorm = tangent.iter().map(|x| x * x).sum::<f64>().sqrt();
                if tnorm <= 1e-10 * value.abs().max(1.0) {
                    converged = true;
                    break;
                }
                let mut step = 1.0;
                let mut improved = false;
                while step > 1e-14 {
                    let mut trial: Vec<f64> = c
                        .iter()
                        .zip(&tangent)
                        .map(|(ci, ti)| ci - step * ti)
                        .collect();
                    normalize(&mut trial);
                    let tv = objective(&trial);
                    if tv < value - 1e-12 * value.abs().max(1e-12) {
                        c = trial;
                        value = tv;
                        improved = true;
                        break;
                    }
                    step *= 0.5;
                }
                if !improved {
                    converged = true;
                    break;
                }
            }
            (value, c, iterations, converged)
        };

        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut starts: Vec<Vec<f64>> = vec![];
        for w in warm_starts {
            let mut c = vec![0.0; k];
            for (i, &x) in w.iter().enumerate().take(k) {
                c[i] = x;
            }
            if c.iter().map(|x| x * x).sum::<f64>() > 1e-12 {
                starts.push(c);
            }
        }
        for _ in 0..restarts.max(1) {
            let c: Vec<f64> = (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect();
            starts.push(c);
        }

        let mut best_value = f64::INFINITY;
        let mut best_coeffs = vec![0.0; k];
        let mut best_start = 0;
        let mut total_iters = 0;
        let mut best_converged = false;
        for (idx, start) in starts.into_iter().enumerate() {
            let (value, coeffs, iters, converged) = descend(start);
            total_iters += iters;
            if value < best_value {
                best_value = value;
                best_coeffs = coeffs;
                best_start = idx;
                best_converged = converged;
            }
        }

        let mut witness = MPoly::zero(self.dim());
        for (c, y) in best_coeffs.iter().zip(&basis) {
            if *c != 0.0 {
                witness = witness.add(&y.scale(c));
            }
        }
        Ok(ConstantEstimate {
            c_hat: best_value,
            degree_budget: budget,
            restarts,
            seed,
            converged: best_converged,
            best_start,
            iterations: total_iters,
            proof_lower_bound: self.proof_side_lower_bound(),
            witness_coeffs: best_coeffs,
            witness: format!("{}", Poly::Float(witness)),
        })
    }

    /// Switches the integration backend (for oracle cross-checks); bases are
    /// rebuilt lazily under the new backend.
    pub fn rebuilt_with_backend(&self, backend: QuadBackend) -> Result<Arc<WeightedSphere>> {
        let quad = SphereQuad::with_backend(self.ctx.clone(), backend)?;
        Ok(WeightedSphere::with_quad(
            self.ctx.clone(),
            quad,
            self.store.max_degree(),
        ))
    }
}

fn random_unit(d: usize, rng: &mut ChaCha20Rng) -> Vec<f64> {
    loop {
        let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n: f64 = x.iter().map(|c| c * c).sum::<f64>().sqrt();
        if n > 0.3 && n <= 1.0 {
            return x.into_iter().map(|c| c / n).collect();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::rat_of;
    use crate::reflection::{Family, Multiplicity, RootSystem};

    fn sphere(family: Family, d: usize, m: Option<usize>, kappa: &[(i64, i64)], max_deg: usize) -> Arc<WeightedSphere> {
        let rs = RootSystem::build(family, d, m).unwrap();
        let vals: Vec<_> = kappa.iter().map(|&(n, den)| rat_of(n, den)).collect();
        let k = if vals.is_empty() {
            Multiplicity::zero(&rs)
        } else {
            Multiplicity::from_orbit_values(&rs, &vals).unwrap()
        };
        let ctx = Arc::new(OperatorContext::new(rs, k).unwrap());
        WeightedSphere::new(ctx, max_deg).unwrap()
    }

    fn random_poly(d: usize, deg: u32, rng: &mut ChaCha20Rng) -> MPoly<f64> {
        let mut f = MPoly::zero(d);
        for _ in 0..12 {
            let e: Vec<u32> = (0..d).map(|_| rng.gen_range(0..=deg)).collect();
            if e.iter().sum::<u32>() > deg {
                continue;
            }
            f = f.add(&MPoly::monomial(d, e, rng.gen_range(-1.0..1.0)));
        }
        f
    }

    #[test]
    fn normalize_admissible_examples() {
        let ws = sphere(Family::Z2, 2, None, &[(1, 1), (1, 1)], 6);
        // Odd function is already mean-zero.
        let f = MPoly::var(2, 0);
        let (fnorm, sf) = ws.normalize_admissible(&f).unwrap();
        assert!((ws.quad().norm_sq(&fnorm).unwrap() - 1.0).abs() < 1e-10);
        assert!(sf.component_norm_sq(0) < 1e-20);

        // Constants cannot be normalized.
        assert!(matches!(
            ws.normalize_admissible(&MPoly::one(2)),
            Err(CoreError::ZeroFunction)
        ));
    }

    #[test]
    fn moment_vector_vanishes_by_symmetry() {
        // Odd integrand in each coordinate.
        let ws = sphere(Family::Trivial, 3, None, &[], 4);
        let f = MPoly::var(3, 0);
        let (fnorm, _) = ws.normalize_admissible(&f).unwrap();
        let m = ws.moment_vector(&fnorm).unwrap();
        assert!(m.iter().all(|x| x.abs() < 1e-14));

        // Invariant |f|^2 under sign flips gives zero moment too.
        let ws2 = sphere(Family::Z2, 2, None, &[(1, 1), (2, 1)], 6);
        let g = MPoly::var(2, 0).mul(&MPoly::var(2, 1));
        let (gnorm, _) = ws2.normalize_admissible(&g).unwrap();
        let m2 = ws2.moment_vector(&gnorm).unwrap();
        assert!(m2.iter().all(|x| x.abs() < 1e-13));
        // And the moment norm never exceeds 1.
        assert!(m2.iter().map(|x| x * x).sum::<f64>().sqrt() <= 1.0);
    }

    #[test]
    fn localization_closed_form_matches_oracles() {
        let ws = sphere(Family::Z2, 3, None, &[(1, 1), (0, 1), (2, 1)], 6);
        let mut rng = ChaCha20Rng::seed_from_u64(41);
        for trial in 0..5 {
            let f = random_poly(3, 3, &mut rng);
            let Ok((fnorm, _)) = ws.normalize_admissible(&f) else {
                continue;
            };
            let (closed, argmin) = ws.localization_min(&fnorm).unwrap();
            let (grid, _) = ws.grid_search_localization(&fnorm, 2000, 7 + trial).unwrap();
            assert!(
                (closed - grid).abs() < 1e-6,
                "closed {closed} grid {grid}"
            );
            // Direct integration at the argmin agrees.
            if let Some(y) = argmin {
                let direct = ws.localization_at_direct(&fnorm, &y).unwrap();
                assert!((closed - direct).abs() < 1e-10);
                // Standard-direction minimum dominates the global one.
                for i in 0..3 {
                    let mut e = vec![0.0; 3];
                    e[i] = 1.0;
                    assert!(ws.localization_at(&fnorm, &e).unwrap() >= closed - 1e-12);
                }
            }
        }
    }

    #[test]
    fn geodesic_half_angle_identity() {
        // 1 - <x,y> = 2 sin^2(arccos<x,y>/2) at random pairs.
        let mut rng = ChaCha20Rng::seed_from_u64(42);
        for _ in 0..50 {
            let x = random_unit(3, &mut rng);
            let y = random_unit(3, &mut rng);
            let dot: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
            let lhs = 1.0 - dot;
            let rhs = 2.0 * (dot.clamp(-1.0, 1.0).acos() / 2.0).sin().powi(2);
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn decomposition_identity_simple_cases() {
        // f = x1, no weight: both sides reduce to symmetric moments.
        let ws = sphere(Family::Trivial, 3, None, &[], 4);
        let f = MPoly::var(3, 0);
        let check = ws.verify_decomposition(&f).unwrap();
        assert!(check.residual < 1e-10, "residual {}", check.residual);
        let expected = 2.0 * ws.quad().norm_sq(&f).unwrap();
        assert!((check.spectral - expected).abs() < 1e-10);
        assert_eq!(check.reflection_sum, 0.0);

        // Degree-1 with weights: reflection term carries 2 kappa_1 omega.
        let ws2 = sphere(Family::Z2, 2, None, &[(1, 1), (2, 1)], 4);
        let f = MPoly::var(2, 0);
        let check2 = ws2.verify_decomposition(&f).unwrap();
        assert!(check2.residual < 1e-10, "residual {}", check2.residual);
        let omega = ws2.quad().omega().unwrap();
        let x2_norm = ws2.quad().norm_sq(&MPoly::var(2, 1)).unwrap();
        assert!((check2.rotation_sum - x2_norm).abs() < 1e-10);
        assert!((check2.reflection_sum - 2.0 * omega).abs() < 1e-9);
    }

    #[test]
    fn decomposition_identity_random_inputs() {
        let configs = vec![
            sphere(Family::Trivial, 3, None, &[], 8),
            sphere(Family::Z2, 2, None, &[(1, 1), (1, 1)], 8),
            sphere(Family::Z2, 3, None, &[(1, 1), (0, 1), (2, 1)], 8),
            sphere(Family::A, 3, None, &[(1, 1)], 8),
        ];
        let mut rng = ChaCha20Rng::seed_from_u64(43);
        for ws in configs {
            for _ in 0..5 {
                let f = random_poly(ws.dim(), 4, &mut rng);
                if f.is_zero() {
                    continue;
                }
                let check = ws.verify_decomposition(&f).unwrap();
                assert!(
                    check.residual < 1e-9,
                    "family {}: residual {}",
                    ws.meta().family,
                    check.residual
                );
                // G-invariant symmetrization kills every reflection term.
                let group = ws.ctx().root_system().group_elements();
                let mut sym = MPoly::zero(ws.dim());
                for g in group.iter() {
                    sym = sym.add(&f.compose_linear(&g.mat));
                }
                sym = sym.scale(&(1.0 / group.len() as f64));
                let check_sym = ws.verify_decomposition(&sym).unwrap();
                assert!(check_sym.reflection_sum < 1e-9);
                assert!(check_sym.residual < 1e-9);
            }
        }
    }

    #[test]
    fn gradient_identity_examples() {
        // kappa = 0: spectral and gradient norms agree, radial term zero.
        let ws = sphere(Family::Trivial, 3, None, &[], 8);
        let mut rng = ChaCha20Rng::seed_from_u64(44);
        let f = random_poly(3, 4, &mut rng);
        let check = ws.verify_gradient_identity(&f).unwrap();
        assert!(check.residual < 1e-9, "residual {}", check.residual);
        assert!(check.radial_direct.abs() < 1e-9);
        assert!((check.spectral - check.gradient_norm_sq).abs() < 1e-9);

        // Weighted, non-invariant: strict inequality with positive radial term.
        let ws2 = sphere(Family::Z2, 2, None, &[(1, 1), (1, 1)], 8);
        let f2 = MPoly::var(2, 0).add(&random_poly(2, 3, &mut rng));
        let check2 = ws2.verify_gradient_identity(&f2).unwrap();
        assert!(check2.residual < 1e-8, "residual {}", check2.residual);
        assert!(check2.route_gap < 1e-9, "route gap {}", check2.route_gap);
        assert!(check2.sign_ok);
        assert!(check2.norm_inequality_ok);
        assert!(check2.radial_direct > 1e-6);

        // G-invariant input collapses the radial term.
        let inv = MPoly::var(2, 0).mul(&MPoly::var(2, 0));
        let check3 = ws2.verify_gradient_identity(&inv).unwrap();
        assert!(check3.radial_direct.abs() < 1e-10);
        assert!((check3.spectral - check3.gradient_norm_sq).abs() < 1e-9);
    }

    #[test]
    fn lemma_identity_cases() {
        // Constant input: every side vanishes.
        let ws = sphere(Family::Z2, 2, None, &[(1, 1), (0, 1)], 6);
        let c = MPoly::constant(2, 2.0);
        let y = [1.0, 0.0];
        let check = ws.verify_lemma(&c, &y).unwrap();
        assert!(check.moment_side.abs() < 1e-12);
        assert!(check.residual < 1e-10);

        // Hand-checked case: f = 1 + x1, kappa = (1, 0).
        let f = MPoly::one(2).add(&MPoly::var(2, 0));
        let check = ws.verify_lemma(&f, &y).unwrap();
        assert!((check.moment_side - 4.5 * std::f64::consts::PI).abs() < 1e-10);
        assert!((check.singular_side - 4.0 * std::f64::consts::PI).abs() < 1e-10);
        assert!((check.rotation_side - 0.5 * std::f64::consts::PI).abs() < 1e-10);
        assert!(check.residual < 1e-10);

        // kappa = 0 reduction at random data.
        let ws0 = sphere(Family::Trivial, 3, None, &[], 8);
        let mut rng = ChaCha20Rng::seed_from_u64(45);
        for _ in 0..5 {
            let f = random_poly(3, 4, &mut rng);
            let yv = random_unit(3, &mut rng);
            let check = ws0.verify_lemma(&f, &yv).unwrap();
            assert!(check.residual < 1e-9, "residual {}", check.residual);
            assert_eq!(check.singular_side, 0.0);
        }

        // Weighted random case.
        let ws3 = sphere(Family::Z2, 3, None, &[(1, 1), (0, 1), (2, 1)], 8);
        for _ in 0..5 {
            let f = random_poly(3, 4, &mut rng);
            let yv = random_unit(3, &mut rng);
            let check = ws3.verify_lemma(&f, &yv).unwrap();
            assert!(check.residual < 1e-8, "residual {}", check.residual);
        }
    }

    #[test]
    fn residuals_scale_quadratically() {
        let ws = sphere(Family::Z2, 2, None, &[(1, 1), (1, 1)], 8);
        let mut rng = ChaCha20Rng::seed_from_u64(46);
        let f = random_poly(2, 4, &mut rng);
        let y = random_unit(2, &mut rng);
        let base = ws.verify_lemma(&f, &y).unwrap().residual
            + ws.verify_decomposition(&f).unwrap().residual
            + ws.verify_gradient_identity(&f).unwrap().residual;
        for c in [2.0, 10.0] {
            let fc = f.scale(&c);
            let scaled = ws.verify_lemma(&fc, &y).unwrap().residual
                + ws.verify_decomposition(&fc).unwrap().residual
                + ws.verify_gradient_identity(&fc).unwrap().residual;
            assert!(
                scaled <= c * c * base * (1.0 + 1e-6) + 1e-12,
                "c={c}: {scaled} vs {}",
                c * c * base
            );
        }
    }

    #[test]
    fn uncertainty_product_classical_case() {
        // d = 3, no weight, f proportional to x1: product = 2.
        let ws = sphere(Family::Trivial, 3, None, &[], 4);
        let f = MPoly::var(3, 0);
        let report = ws.uncertainty_product(&f).unwrap();
        assert!((report.product - 2.0).abs() < 1e-9, "product {}", report.product);
        assert!((report.localization - 1.0).abs() < 1e-12);
        assert!(report.argmin.is_none());
        assert!(report.product > 0.0);
        assert!((report.localization * report.dirichlet - report.product).abs() < 1e-12);
    }

    #[test]
    fn proof_bounds_hold_on_samples() {
        let ws = sphere(Family::Z2, 3, None, &[(1, 1), (0, 1), (2, 1)], 8);
        let mut rng = ChaCha20Rng::seed_from_u64(47);
        for _ in 0..4 {
            let f = random_poly(3, 3, &mut rng);
            let Ok((fnorm, _)) = ws.normalize_admissible(&f) else {
                continue;
            };
            let y = random_unit(3, &mut rng);
            for eps in [0.1, 0.5, 0.9] {
                let report = ws.proof_bounds(&fnorm, &y, eps).unwrap();
                assert!(report.j1_margin >= -1e-10, "j1 margin {}", report.j1_margin);
                assert!(
                    report.pointwise_margin_min >= -1e-10,
                    "pointwise {}",
                    report.pointwise_margin_min
                );
                for j2 in &report.j2 {
                    assert!(j2.margin >= -1e-10, "j2 margin {}", j2.margin);
                }
            }
        }
        assert!(ws.proof_bounds(&MPoly::var(3, 0), &[1.0, 0.0, 0.0], 1.5).is_err());
    }

    #[test]
    fn estimate_constant_basics() {
        let ws = sphere(Family::Trivial, 3, None, &[], 4);
        let est = ws.estimate_constant(1, 4, 11, &[]).unwrap();
        // Over pure degree-1 spans the moment vanishes, so the product is
        // exactly the eigenvalue 2.
        assert!((est.c_hat - 2.0).abs() < 1e-8, "c_hat {}", est.c_hat);
        assert!(est.proof_lower_bound > 0.0);
        assert!(est.proof_lower_bound <= est.c_hat);

        // Reproducibility for a fixed seed.
        let est2 = ws.estimate_constant(1, 4, 11, &[]).unwrap();
        assert_eq!(
            serde_json::to_string(&est).unwrap(),
            serde_json::to_string(&est2).unwrap()
        );

        // Larger budget with the previous witness warm-started can only
        // improve.
        let est3 = ws
            .estimate_constant(2, 4, 11, &[est.witness_coeffs.clone()])
            .unwrap();
        assert!(est3.c_hat <= est.c_hat + 1e-9);
    }

    #[test]
    fn proof_lower_bound_classical_value() {
        // No weight: the sweep solves eps = (1-eps)^2/4 at eps = 3 - 2 sqrt 2.
        let ws = sphere(Family::Trivial, 3, None, &[], 2);
        let b = ws.proof_side_lower_bound();
        let expected = 3.0 - 2.0 * std::f64::consts::SQRT_2;
        assert!((b - expected).abs() < 1e-4, "bound {b} vs {expected}");
    }
}
