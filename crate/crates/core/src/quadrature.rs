//! Weighted integration over the unit sphere against `h^2 dsigma`.
//!
//! Three backends form an internal oracle hierarchy:
//!
//! * `ClosedForm` — Gamma-ratio surface moments. Available when every root is
//!   axis-aligned (sign-flip type weights, any real multiplicity), or for a
//!   general group whose multiplicities are all integers, in which case the
//!   weight is expanded as a polynomial and reduced to unweighted moments.
//! * `GaussProduct` — product rules (equispaced azimuth x Gauss-Jacobi in the
//!   cosines of the polar angles), exact for polynomial integrands once the
//!   weight itself is a polynomial.
//! * `Adaptive` — panel subdivision in the angle box with an embedded 7/15
//!   point error estimate, presplit along the coordinate hyperplanes where
//!   the weight loses smoothness.
//!
//! A seeded Monte-Carlo estimator is provided as an out-of-band oracle.

use std::collections::BTreeMap;
use std::sync::{Arc, RwLock};

use nalgebra::DMatrix;
use rand::prelude::*;
use rand_chacha::ChaCha20Rng;
use statrs::function::gamma::ln_gamma;

use crate::error::{CoreError, Result};
use crate::operators::OperatorContext;
use crate::poly::MPoly;
use crate::reflection::weight_sq_eval;

/// Maximum multiplicity the numeric backends accept.
const KAPPA_CAP: f64 = 50.0;

/// Gauss-Jacobi rule for the weight `(1-x)^a (1+x)^b` on `[-1, 1]`,
/// computed from the symmetric tridiagonal recurrence matrix.
pub fn gauss_jacobi(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mu0 = (a + b + 1.0) * 2f64.ln() + ln_gamma(a + 1.0) + ln_gamma(b + 1.0)
        - ln_gamma(a + b + 2.0);
    let mu0 = mu0.exp();
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n.saturating_sub(1)];
    for k in 0..n {
        let kf = k as f64;
        diag[k] = if k == 0 {
            (b - a) / (a + b + 2.0)
        } else {
            (b * b - a * a) / ((2.0 * kf + a + b) * (2.0 * kf + a + b + 2.0))
        };
    }
    for k in 1..n {
        let kf = k as f64;
        let b2 = if k == 1 {
            4.0 * (1.0 + a) * (1.0 + b) / ((2.0 + a + b).powi(2) * (3.0 + a + b))
        } else {
            4.0 * kf * (kf + a) * (kf + b) * (kf + a + b)
                / ((2.0 * kf + a + b).powi(2) * (2.0 * kf + a + b + 1.0) * (2.0 * kf + a + b - 1.0))
        };
        off[k - 1] = b2.sqrt();
    }
    let mut m = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        m[(k, k)] = diag[k];
    }
    for k in 0..n - 1 {
        m[(k, k + 1)] = off[k];
        m[(k + 1, k)] = off[k];
    }
    let eig = m.symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let node = eig.eigenvalues[i];
            let w = mu0 * eig.eigenvectors[(0, i)].powi(2);
            (node, w)
        })
        .collect();
    pairs.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    pairs.into_iter().unzip()
}

pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    gauss_jacobi(n, 0.0, 0.0)
}

/// Surface area of the unit sphere in `R^d`.
pub fn surface_area(d: usize) -> f64 {
    (2f64.ln() + (d as f64 / 2.0) * std::f64::consts::PI.ln() - ln_gamma(d as f64 / 2.0)).exp()
}

/// Surface moment of `prod_i x_i^{alpha_i} |x_i|^{extra_i}` over the unit
/// sphere (`extra_i >= 0` real). The integrand is odd in `x_i` exactly when
/// `alpha_i` is odd, so the moment vanishes in that case; otherwise it is a
/// Gamma ratio in the exponents `p_i = alpha_i + extra_i`.
fn surface_moment(d: usize, alpha: &[u32], extra: &[f64]) -> f64 {
    debug_assert_eq!(alpha.len(), d);
    if alpha.iter().any(|&a| a % 2 == 1) {
        return 0.0;
    }
    let mut sum_p = 0.0;
    let mut log_num = 0.0;
    for i in 0..d {
        let p = alpha[i] as f64 + extra[i];
        sum_p += p;
        log_num += ln_gamma((p + 1.0) / 2.0);
    }
    (2f64.ln() + log_num - ln_gamma((d as f64 + sum_p) / 2.0)).exp()
}

/// Integration backend.
#[derive(Clone, Debug, PartialEq)]
pub enum QuadBackend {
    /// Gamma-ratio moments (axis-aligned weight, or polynomial weight folded
    /// into the integrand).
    ClosedForm,
    /// Exact product Gauss rules; requires a polynomial weight.
    GaussProduct,
    /// Adaptive panel integration in angle space (d <= 4).
    Adaptive,
}

impl std::fmt::Display for QuadBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            QuadBackend::ClosedForm => write!(f, "closed-form"),
            QuadBackend::GaussProduct => write!(f, "gauss-product"),
            QuadBackend::Adaptive => write!(f, "adaptive"),
        }
    }
}

/// Nodes and weights for the weighted surface integral; summing
/// `w_i f(x_i)` approximates (or reproduces) `integral of f h^2 dsigma`.
#[derive(Clone, Debug)]
pub struct SphereRule {
    pub nodes: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    /// A-posteriori error estimate where applicable (0 for exact rules).
    pub error_estimate: f64,
}

impl SphereRule {
    pub fn apply(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(x))
            .sum()
    }
}

/// Weighted-sphere integration context.
pub struct SphereQuad {
    ctx: Arc<OperatorContext>,
    backend: QuadBackend,
    /// Constant multiplying the catalog weight `h^2` (the lifted weights of
    /// the ball/simplex transfers differ from catalog normalization by a
    /// power of two).
    weight_scale: f64,
    tol: f64,
    /// Per-axis total multiplicity when every root is axis-aligned.
    axis_kappa: Option<Vec<f64>>,
    /// 2^{|kappa|} factor from the sqrt(2) root normalization (axis case).
    axis_factor: f64,
    /// The weight as a polynomial (integer multiplicities).
    weight_poly: Option<MPoly<f64>>,
    rule_cache: RwLock<BTreeMap<usize, Arc<SphereRule>>>,
}

impl SphereQuad {
    /// Picks the strongest backend the configuration admits.
    pub fn auto(ctx: Arc<OperatorContext>) -> Result<Arc<Self>> {
        Self::build(ctx, None, 1.0, 1e-10)
    }

    pub fn with_backend(ctx: Arc<OperatorContext>, backend: QuadBackend) -> Result<Arc<Self>> {
        Self::build(ctx, Some(backend), 1.0, 1e-10)
    }

    pub fn with_scale(ctx: Arc<OperatorContext>, weight_scale: f64) -> Result<Arc<Self>> {
        Self::build(ctx, None, weight_scale, 1e-10)
    }

    pub fn build(
        ctx: Arc<OperatorContext>,
        backend: Option<QuadBackend>,
        weight_scale: f64,
        tol: f64,
    ) -> Result<Arc<Self>> {
        let d = ctx.dim();
        let axis = axis_multiplicities(&ctx);
        let all_integer = (0..ctx.root_system().num_roots()).all(|v| {
            let k = ctx.kappa().value_rat(v);
            k.is_integer()
        });
        let max_kappa = (0..ctx.root_system().num_roots())
            .map(|v| ctx.kappa().value(v))
            .fold(0.0f64, f64::max);
        if max_kappa > KAPPA_CAP {
            return Err(CoreError::InvalidParameter(format!(
                "multiplicity {max_kappa} exceeds the numeric cap {KAPPA_CAP}"
            )));
        }
        let weight_poly = if all_integer {
            Some(weight_polynomial(&ctx))
        } else {
            None
        };
        let backend = match backend {
            Some(b) => b,
            None => {
                if axis.is_some() || weight_poly.is_some() {
                    QuadBackend::ClosedForm
                } else {
                    QuadBackend::Adaptive
                }
            }
        };
        match backend {
            QuadBackend::ClosedForm => {
                if axis.is_none() && weight_poly.is_none() {
                    return Err(CoreError::UnsupportedBackend(
                        "closed-form moments need an axis-aligned weight or integer multiplicities"
                            .into(),
                    ));
                }
            }
            QuadBackend::GaussProduct => {
                if weight_poly.is_none() {
                    return Err(CoreError::UnsupportedBackend(
                        "product Gauss rules need integer multiplicities".into(),
                    ));
                }
                if !(1..=4).contains(&d) {
                    return Err(CoreError::UnsupportedBackend(format!(
                        "product rules implemented for d <= 4, got {d}"
                    )));
                }
            }
            QuadBackend::Adaptive => {
                if !(1..=4).contains(&d) {
                    return Err(CoreError::UnsupportedBackend(format!(
                        "adaptive integration implemented for d <= 4, got {d}"
                    )));
                }
            }
        }
        let axis_factor = axis
            .as_ref()
            .map(|ks| 2f64.powf(ks.iter().sum::<f64>()))
            .unwrap_or(1.0);
        Ok(Arc::new(SphereQuad {
            ctx,
            backend,
            weight_scale,
            tol,
            axis_kappa: axis,
            axis_factor,
            weight_poly,
            rule_cache: RwLock::new(BTreeMap::new()),
        }))
    }

    pub fn ctx(&self) -> &Arc<OperatorContext> {
        &self.ctx
    }

    pub fn backend(&self) -> &QuadBackend {
        &self.backend
    }

    pub fn dim(&self) -> usize {
        self.ctx.dim()
    }

    pub fn weight_scale(&self) -> f64 {
        self.weight_scale
    }

    /// Monomial moment `integral of x^alpha h^2 dsigma` (times the weight
    /// scale). Closed form; errors when no closed form exists.
    pub fn moment(&self, alpha: &[u32]) -> Result<f64> {
        self.moment_abs(alpha, &vec![false; self.dim()])
    }

    /// Moment with extra `|x_i|` factors on the flagged coordinates.
    pub fn moment_abs(&self, alpha: &[u32], abs: &[bool]) -> Result<f64> {
        let d = self.dim();
        if alpha.len() != d || abs.len() != d {
            return Err(CoreError::DimensionMismatch {
                expected: d,
                got: alpha.len().max(abs.len()),
            });
        }
        if let Some(axis) = &self.axis_kappa {
            let extra: Vec<f64> = (0..d)
                .map(|i| 2.0 * axis[i] + if abs[i] { 1.0 } else { 0.0 })
                .collect();
            return Ok(self.weight_scale * self.axis_factor * surface_moment(d, alpha, &extra));
        }
        if let Some(w) = &self.weight_poly {
            let mono = MPoly::monomial(d, alpha.to_vec(), 1.0);
            let prod = mono.mul(w);
            let extra: Vec<f64> = abs.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
            let mut total = 0.0;
            for (e, c) in prod.terms() {
                total += c * surface_moment(d, e, &extra);
            }
            return Ok(self.weight_scale * total);
        }
        Err(CoreError::UnsupportedBackend(
            "no closed-form moments for this configuration".into(),
        ))
    }

    /// `integral of p h^2 dsigma` (times the weight scale).
    pub fn integrate_poly(&self, p: &MPoly<f64>) -> Result<f64> {
        self.integrate_poly_abs(p, &vec![false; self.dim()])
    }

    /// Same with `|x_i|` factors on flagged coordinates.
    pub fn integrate_poly_abs(&self, p: &MPoly<f64>, abs: &[bool]) -> Result<f64> {
        let d = self.dim();
        if p.dim() != d {
            return Err(CoreError::DimensionMismatch {
                expected: d,
                got: p.dim(),
            });
        }
        match self.backend {
            QuadBackend::ClosedForm => {
                let mut total = 0.0;
                for (e, c) in p.terms() {
                    total += c * self.moment_abs(e, abs)?;
                }
                Ok(total)
            }
            QuadBackend::GaussProduct => {
                if abs.iter().any(|&b| b) {
                    // |x_i| factors break polynomial exactness; the moment
                    // expansion (available whenever this backend is) keeps
                    // the integral closed-form.
                    let mut total = 0.0;
                    for (e, c) in p.terms() {
                        total += c * self.moment_abs(e, abs)?;
                    }
                    return Ok(total);
                }
                let wdeg = self
                    .weight_poly
                    .as_ref()
                    .and_then(|w| w.degree())
                    .unwrap_or(0);
                let level = p.degree().unwrap_or(0) + wdeg;
                let rule = self.product_rule(level)?;
                Ok(rule.apply(|x| p.eval_f64(x)))
            }
            QuadBackend::Adaptive => {
                let rs = self.ctx.root_system().clone();
                let kappa = self.ctx.kappa().clone();
                let scale = self.weight_scale;
                let f = move |x: &[f64]| {
                    let mut v = p.eval_f64(x) * weight_sq_eval(&rs, &kappa, x) * scale;
                    for (i, &flag) in abs.iter().enumerate() {
                        if flag {
                            v *= x[i].abs();
                        }
                    }
                    v
                };
                let (val, err) = self.adaptive_integrate(&f)?;
                if err > self.tol.max(1e-14 * val.abs()) * 10.0 {
                    return Err(CoreError::QuadratureAccuracy {
                        requested: self.tol,
                        achieved: err,
                    });
                }
                Ok(val)
            }
        }
    }

    /// Weighted inner product of two polynomials restricted to the sphere.
    pub fn inner(&self, f: &MPoly<f64>, g: &MPoly<f64>) -> Result<f64> {
        self.integrate_poly(&f.mul(g))
    }

    pub fn norm_sq(&self, f: &MPoly<f64>) -> Result<f64> {
        self.inner(f, f)
    }

    /// Total weighted surface measure `omega = integral of h^2 dsigma`.
    pub fn omega(&self) -> Result<f64> {
        self.integrate_poly(&MPoly::one(self.dim()))
    }

    /// Product rule with weights that include `h^2` and the weight scale;
    /// exact for polynomial integrands of total degree <= level when the
    /// weight is a polynomial (already folded into `level` by callers that
    /// know the integrand), adaptive panels otherwise.
    pub fn product_rule(&self, level: usize) -> Result<Arc<SphereRule>> {
        if let Some(rule) = self.rule_cache.read().unwrap().get(&level) {
            return Ok(rule.clone());
        }
        let rule = if self.weight_poly.is_some() {
            Arc::new(self.build_product_rule(level)?)
        } else {
            Arc::new(self.build_adaptive_rule()?)
        };
        self.rule_cache
            .write()
            .unwrap()
            .insert(level, rule.clone());
        Ok(rule)
    }

    fn build_product_rule(&self, level: usize) -> Result<SphereRule> {
        let d = self.dim();
        let angles = angle_rules(d, level)?;
        let rs = self.ctx.root_system();
        let kappa = self.ctx.kappa();
        let mut nodes = vec![];
        let mut weights = vec![];
        visit_product(&angles, &mut |angle_pt, w| {
            let x = angles_to_point(d, angle_pt);
            let wt = w * weight_sq_eval(rs, kappa, &x) * self.weight_scale;
            nodes.push(x);
            weights.push(wt);
        });
        Ok(SphereRule {
            nodes,
            weights,
            error_estimate: 0.0,
        })
    }

    /// Freezes the adaptive panel structure driven by the weight itself into
    /// a reusable rule with an a-posteriori error estimate.
    fn build_adaptive_rule(&self) -> Result<SphereRule> {
        let d = self.dim();
        let rs = self.ctx.root_system().clone();
        let kappa = self.ctx.kappa().clone();
        let scale = self.weight_scale;
        let weight_fn = move |x: &[f64]| weight_sq_eval(&rs, &kappa, x) * scale;
        let panels = self.refined_panels(&weight_fn)?;
        let (hi_nodes, hi_weights) = tensor_nodes(d);
        let mut nodes = vec![];
        let mut weights = vec![];
        let mut err = 0.0;
        for p in &panels {
            err += p.err;
            for (pt, w) in panel_points(d, &p.lo, &p.hi, &hi_nodes, &hi_weights) {
                let x = angles_to_point(d, &pt);
                let wt = w * weight_fn(&x);
                nodes.push(x);
                weights.push(wt);
            }
        }
        Ok(SphereRule {
            nodes,
            weights,
            error_estimate: err,
        })
    }

    /// Adaptive integration of an arbitrary function against the plain
    /// surface measure (the integrand must include any weight itself).
    pub fn adaptive_integrate(&self, f: &dyn Fn(&[f64]) -> f64) -> Result<(f64, f64)> {
        adaptive_sphere_integrate(self.dim(), self.ctx.root_system(), f, self.tol)
    }

    fn refined_panels(&self, f: &dyn Fn(&[f64]) -> f64) -> Result<Vec<Panel>> {
        refine_panels(self.dim(), self.ctx.root_system(), f, self.tol)
    }

    /// Seeded Monte-Carlo estimate of `integral of f h^2 dsigma` with its
    /// standard error.
    pub fn monte_carlo(
        &self,
        f: &dyn Fn(&[f64]) -> f64,
        samples: usize,
        seed: u64,
    ) -> (f64, f64) {
        let d = self.dim();
        let rs = self.ctx.root_system();
        let kappa = self.ctx.kappa();
        let area = surface_area(d);
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..samples {
            let x = random_unit_vector(d, &mut rng);
            let v = f(&x) * weight_sq_eval(rs, kappa, &x) * self.weight_scale;
            sum += v;
            sum_sq += v * v;
        }
        let n = samples as f64;
        let mean = sum / n;
        let var = (sum_sq / n - mean * mean).max(0.0);
        (area * mean, area * (var / n).sqrt())
    }
}

fn random_unit_vector(d: usize, rng: &mut ChaCha20Rng) -> Vec<f64> {
    loop {
        let x: Vec<f64> = (0..d)
            .map(|_| {
                // Box-Muller keeps the dependency surface small.
                let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
                let u2: f64 = rng.gen_range(0.0..1.0);
                (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
            })
            .collect();
        let n: f64 = x.iter().map(|c| c * c).sum::<f64>().sqrt();
        if n > 1e-8 {
            return x.into_iter().map(|c| c / n).collect();
        }
    }
}

/// Per-axis multiplicities when every positive root is axis-aligned.
fn axis_multiplicities(ctx: &OperatorContext) -> Option<Vec<f64>> {
    let d = ctx.dim();
    let mut axis = vec![0.0; d];
    for (v, root) in ctx.root_system().positive_roots().iter().enumerate() {
        let mut nonzero = None;
        for (i, &c) in root.coords.iter().enumerate() {
            if c.abs() > 1e-12 {
                if nonzero.is_some() {
                    return None;
                }
                nonzero = Some(i);
            }
        }
        axis[nonzero?] += ctx.kappa().value(v);
    }
    Some(axis)
}

/// The weight `h^2` as a float polynomial (integer multiplicities only).
fn weight_polynomial(ctx: &OperatorContext) -> MPoly<f64> {
    let d = ctx.dim();
    let mut w = MPoly::one(d);
    for (v, root) in ctx.root_system().positive_roots().iter().enumerate() {
        let k = ctx.kappa().value(v);
        if k == 0.0 {
            continue;
        }
        let k = k as u32;
        let form = MPoly::linear_form(&root.coords);
        w = w.mul(&form.mul(&form).pow(k));
    }
    w
}

// ---------------------------------------------------------------------------
// Angle-space machinery shared by the product and adaptive rules.
// ---------------------------------------------------------------------------

/// Maps an angle tuple to a point on the sphere. The Jacobian factors are
/// folded into the 1D rules below.
fn angles_to_point(d: usize, angles: &[f64]) -> Vec<f64> {
    match d {
        1 => vec![if angles.is_empty() || angles[0] < 0.5 { 1.0 } else { -1.0 }],
        2 => vec![angles[0].cos(), angles[0].sin()],
        3 => {
            let (theta, phi) = (angles[0], angles[1]);
            vec![
                phi.sin() * theta.cos(),
                phi.sin() * theta.sin(),
                phi.cos(),
            ]
        }
        4 => {
            let (theta, phi, chi) = (angles[0], angles[1], angles[2]);
            vec![
                chi.sin() * phi.sin() * theta.cos(),
                chi.sin() * phi.sin() * theta.sin(),
                chi.sin() * phi.cos(),
                chi.cos(),
            ]
        }
        _ => unreachable!("angle parametrization limited to d <= 4"),
    }
}

/// Surface-measure density in angle coordinates.
fn angle_jacobian(d: usize, angles: &[f64]) -> f64 {
    match d {
        1 | 2 => 1.0,
        3 => angles[1].sin().abs(),
        4 => angles[1].sin().abs() * angles[2].sin().powi(2),
        _ => unreachable!(),
    }
}

fn angle_ranges(d: usize) -> Vec<(f64, f64)> {
    use std::f64::consts::{PI, TAU};
    match d {
        1 => vec![(0.0, 1.0)], // two-point "sphere", handled separately
        2 => vec![(0.0, TAU)],
        3 => vec![(0.0, TAU), (0.0, PI)],
        4 => vec![(0.0, TAU), (0.0, PI), (0.0, PI)],
        _ => unreachable!(),
    }
}

/// 1D rules per angle for the exact product rule at a given level.
fn angle_rules(d: usize, level: usize) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    use std::f64::consts::{PI, TAU};
    let mut rules = vec![];
    match d {
        1 => {
            rules.push((vec![0.0, 1.0], vec![1.0, 1.0]));
        }
        2 | 3 | 4 => {
            // Azimuth: equispaced rule, exact for trig degree <= m-1.
            let m = level + 2;
            let nodes: Vec<f64> = (0..m).map(|k| TAU * k as f64 / m as f64).collect();
            let weights = vec![TAU / m as f64; m];
            rules.push((nodes, weights));
            // Polar angles: Gauss-Jacobi in t = cos(phi) absorbing the
            // sin^p Jacobian, p = d - 2, d - 3, ... down to 1.
            for p in (1..=(d - 2)).rev() {
                let n = level / 2 + 2;
                let exp = (p as f64 - 1.0) / 2.0;
                let (t, w) = gauss_jacobi(n, exp, exp);
                let phi: Vec<f64> = t.iter().map(|&ti| ti.acos()).collect();
                rules.push((phi, w));
            }
        }
        _ => {
            return Err(CoreError::UnsupportedBackend(format!(
                "product rules limited to d <= 4, got {d}"
            )))
        }
    }
    // The loop above pushes the polar rules from the outermost angle inward;
    // reorder to match the angle tuple (theta, phi[, chi]) where phi carries
    // sin^1 and chi carries sin^2.
    if d >= 3 {
        let azimuth = rules.remove(0);
        rules.reverse();
        let mut reordered = vec![azimuth];
        reordered.extend(rules);
        let _ = PI;
        return Ok(reordered);
    }
    Ok(rules)
}

fn visit_product(rules: &[(Vec<f64>, Vec<f64>)], f: &mut impl FnMut(&[f64], f64)) {
    let k = rules.len();
    let mut idx = vec![0usize; k];
    loop {
        let mut pt = Vec::with_capacity(k);
        let mut w = 1.0;
        for (j, rule) in rules.iter().enumerate() {
            pt.push(rule.0[idx[j]]);
            w *= rule.1[idx[j]];
        }
        f(&pt, w);
        // odometer increment
        let mut j = 0;
        loop {
            if j == k {
                return;
            }
            idx[j] += 1;
            if idx[j] < rules[j].0.len() {
                break;
            }
            idx[j] = 0;
            j += 1;
        }
    }
}

#[derive(Clone, Debug)]
struct Panel {
    lo: Vec<f64>,
    hi: Vec<f64>,
    val: f64,
    err: f64,
}

fn tensor_nodes(_d: usize) -> (Vec<f64>, Vec<f64>) {
    gauss_legendre(15)
}

fn panel_points(
    d: usize,
    lo: &[f64],
    hi: &[f64],
    base_nodes: &[f64],
    base_weights: &[f64],
) -> Vec<(Vec<f64>, f64)> {
    let k = lo.len();
    let rules: Vec<(Vec<f64>, Vec<f64>)> = (0..k)
        .map(|j| {
            let half = (hi[j] - lo[j]) / 2.0;
            let mid = (hi[j] + lo[j]) / 2.0;
            let nodes: Vec<f64> = base_nodes.iter().map(|&t| mid + half * t).collect();
            let weights: Vec<f64> = base_weights.iter().map(|&w| w * half).collect();
            (nodes, weights)
        })
        .collect();
    let mut out = vec![];
    visit_product(&rules, &mut |pt, w| {
        out.push((pt.to_vec(), w * angle_jacobian(d, pt)));
    });
    out
}

fn panel_estimate(d: usize, lo: &[f64], hi: &[f64], f: &dyn Fn(&[f64]) -> f64) -> (f64, f64) {
    let (n7, w7) = gauss_legendre(7);
    let (n15, w15) = gauss_legendre(15);
    let eval = |nodes: &[f64], weights: &[f64]| {
        let mut total = 0.0;
        for (pt, w) in panel_points(d, lo, hi, nodes, weights) {
            let x = angles_to_point(d, &pt);
            total += w * f(&x);
        }
        total
    };
    let coarse = eval(&n7, &w7);
    let fine = eval(&n15, &w15);
    (fine, (fine - coarse).abs())
}

/// Initial angle-space splits: quadrant boundaries everywhere plus the exact
/// root angles on the circle, where every weight singularity is a point.
fn initial_splits(d: usize, rs: &crate::reflection::RootSystem) -> Vec<Vec<f64>> {
    use std::f64::consts::{FRAC_PI_2, PI, TAU};
    let ranges = angle_ranges(d);
    let mut splits: Vec<Vec<f64>> = ranges
        .iter()
        .map(|&(a, b)| {
            let mut pts = vec![a];
            let mut t = a + FRAC_PI_2;
            while t < b - 1e-12 {
                pts.push(t);
                t += FRAC_PI_2;
            }
            pts.push(b);
            pts
        })
        .collect();
    if d == 2 {
        let mut extra = vec![];
        for root in rs.positive_roots() {
            let theta = (-root.coords[0]).atan2(root.coords[1]);
            for shift in [0.0, PI] {
                let mut t = (theta + shift).rem_euclid(TAU);
                if t < 1e-12 {
                    t = 0.0;
                }
                extra.push(t);
            }
        }
        splits[0].extend(extra);
        splits[0].sort_by(|a, b| a.partial_cmp(b).unwrap());
        splits[0].dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    }
    splits
}

fn initial_panels(d: usize, rs: &crate::reflection::RootSystem) -> Vec<(Vec<f64>, Vec<f64>)> {
    let splits = initial_splits(d, rs);
    let mut boxes: Vec<(Vec<f64>, Vec<f64>)> = vec![(vec![], vec![])];
    for dim_splits in &splits {
        let mut next = vec![];
        for (lo, hi) in &boxes {
            for w in dim_splits.windows(2) {
                let mut l = lo.clone();
                let mut h = hi.clone();
                l.push(w[0]);
                h.push(w[1]);
                next.push((l, h));
            }
        }
        boxes = next;
    }
    boxes
}

fn refine_panels(
    d: usize,
    rs: &crate::reflection::RootSystem,
    f: &dyn Fn(&[f64]) -> f64,
    tol: f64,
) -> Result<Vec<Panel>> {
    if d == 1 {
        let val = f(&[1.0]) + f(&[-1.0]);
        return Ok(vec![Panel {
            lo: vec![0.0],
            hi: vec![1.0],
            val,
            err: 0.0,
        }]);
    }
    let max_panels = match d {
        2 => 4096,
        3 => 2048,
        _ => 768,
    };
    let mut panels: Vec<Panel> = initial_panels(d, rs)
        .into_iter()
        .map(|(lo, hi)| {
            let (val, err) = panel_estimate(d, &lo, &hi, f);
            Panel { lo, hi, val, err }
        })
        .collect();
    loop {
        let total_err: f64 = panels.iter().map(|p| p.err).sum();
        let total_val: f64 = panels.iter().map(|p| p.val).sum();
        if total_err <= tol.max(1e-13 * total_val.abs()) || panels.len() >= max_panels {
            return Ok(panels);
        }
        // Split the worst panel along its longest edge.
        let worst = panels
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.err.partial_cmp(&b.1.err).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        let p = panels.swap_remove(worst);
        let axis = (0..p.lo.len())
            .max_by(|&a, &b| {
                (p.hi[a] - p.lo[a])
                    .partial_cmp(&(p.hi[b] - p.lo[b]))
                    .unwrap()
            })
            .unwrap();
        let mid = (p.lo[axis] + p.hi[axis]) / 2.0;
        for half in 0..2 {
            let mut lo = p.lo.clone();
            let mut hi = p.hi.clone();
            if half == 0 {
                hi[axis] = mid;
            } else {
                lo[axis] = mid;
            }
            let (val, err) = panel_estimate(d, &lo, &hi, f);
            panels.push(Panel { lo, hi, val, err });
        }
    }
}

/// Adaptive integration of `f` against the plain surface measure.
pub fn adaptive_sphere_integrate(
    d: usize,
    rs: &crate::reflection::RootSystem,
    f: &dyn Fn(&[f64]) -> f64,
    tol: f64,
) -> Result<(f64, f64)> {
    let panels = refine_panels(d, rs, f, tol)?;
    let val = panels.iter().map(|p| p.val).sum();
    let err = panels.iter().map(|p| p.err).sum();
    Ok((val, err))
}
