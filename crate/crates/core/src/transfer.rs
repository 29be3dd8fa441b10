//! Analysis on the unit ball and the standard simplex through their sphere
//! correspondences: the even lift `(x, x_{d+1})` with `x_{d+1}^2 = 1 - |x|^2`
//! carries ball weights to reflection weights on the sphere one dimension up,
//! and the squaring map `z = (x_1^2, ..., x_d^2)` carries simplex weights to
//! even ball functions. Operators on the ball and simplex are defined by
//! these transfers; everything is cross-checked against independent
//! integration routes (radial Beta factorization, collapsed product rules on
//! the simplex).

use std::sync::Arc;

use num::{BigInt, Signed, ToPrimitive};
use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::error::{CoreError, Result};
use crate::harmonics::SphereFunction;
use crate::operators::OperatorContext;
use crate::poly::{MPoly, Poly, Rat};
use crate::quadrature::{gauss_jacobi, SphereQuad};
use crate::reflection::{weight_sq_eval, Family, Multiplicity, Root, RootSystem};
use crate::uncertainty::WeightedSphere;

/// Localization/Dirichlet product on a transferred domain.
#[derive(Clone, Debug, Serialize)]
pub struct DomainReport {
    pub localization: f64,
    pub argmin: Option<Vec<f64>>,
    pub dirichlet: f64,
    pub product: f64,
}

/// Weighted unit ball `B^d` with weight
/// `prod |<x,v>|^{2 kappa_v} (1 - |x|^2)^{mu - 1/2}`.
pub struct BallDomain {
    d: usize,
    base: Arc<OperatorContext>,
    base_quad: Arc<SphereQuad>,
    mu: f64,
    /// Lifted weighted sphere in d+1 variables; its quadrature carries the
    /// 2^{-mu} normalization mismatch of the lifted axis root.
    sphere: Arc<WeightedSphere>,
}

fn rat_f64(r: &Rat) -> f64 {
    r.to_f64().unwrap()
}

/// Builds a base operator context allowing d = 1 (sign flip or trivial).
pub fn base_context(family: Family, d: usize, m: Option<usize>, kappa: &[Rat]) -> Result<Arc<OperatorContext>> {
    let rs = if d == 1 {
        match family {
            Family::Trivial => RootSystem::from_roots(Family::Trivial, 1, vec![])?,
            Family::Z2 => RootSystem::from_roots(Family::Z2, 1, vec![Root::axis(1, 0)])?,
            other => {
                return Err(CoreError::UnsupportedFamily(format!(
                    "{other} requires d >= 2"
                )))
            }
        }
    } else {
        RootSystem::build(family, d, m)?
    };
    let mult = if kappa.is_empty() {
        Multiplicity::zero(&rs)
    } else {
        Multiplicity::from_orbit_values(&rs, kappa)?
    };
    Ok(Arc::new(OperatorContext::new(rs, mult)?))
}

impl BallDomain {
    pub fn new(base: Arc<OperatorContext>, mu: Rat, max_degree: usize) -> Result<Arc<Self>> {
        if mu.is_negative() {
            return Err(CoreError::InvalidParameter(
                "ball exponent mu must be nonnegative".into(),
            ));
        }
        let d = base.dim();
        let base_rs = base.root_system();
        let mut roots: Vec<Root> = base_rs
            .positive_roots()
            .iter()
            .map(|r| r.padded(d + 1))
            .collect();
        roots.push(Root::axis(d + 1, d));
        let lifted_rs = RootSystem::from_roots(
            Family::Product(format!("{}*z2-lift", base_rs.family())),
            d + 1,
            roots,
        )?;
        let mut per_root: Vec<Rat> = (0..base_rs.num_roots())
            .map(|v| base.kappa().value_rat(v).clone())
            .collect();
        per_root.push(mu.clone());
        let lifted_kappa = Multiplicity::from_root_values(&lifted_rs, per_root)?;
        let lifted_ctx = Arc::new(OperatorContext::new(lifted_rs, lifted_kappa)?);
        // The paper-side lifted weight uses |x_{d+1}|^mu, the catalog root
        // sqrt(2) e_{d+1} contributes 2^{mu/2} |x_{d+1}|^mu; compensate.
        let mu_f = rat_f64(&mu);
        let quad = SphereQuad::with_scale(lifted_ctx.clone(), 2f64.powf(-mu_f))?;
        let sphere = WeightedSphere::with_quad(lifted_ctx, quad, max_degree);
        let base_quad = SphereQuad::auto(base.clone())?;
        Ok(Arc::new(BallDomain {
            d,
            base,
            base_quad,
            mu: mu_f,
            sphere,
        }))
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sphere(&self) -> &Arc<WeightedSphere> {
        &self.sphere
    }

    pub fn base(&self) -> &Arc<OperatorContext> {
        &self.base
    }

    /// Ball weight at an interior point.
    pub fn weight_eval(&self, x: &[f64]) -> f64 {
        let r2: f64 = x.iter().map(|c| c * c).sum();
        weight_sq_eval(self.base.root_system(), self.base.kappa(), x)
            * (1.0 - r2).powf(self.mu - 0.5)
    }

    /// Embeds a polynomial on the ball as a cylinder function in d+1
    /// variables (even in the last one).
    pub fn lift(&self, f: &MPoly<f64>) -> MPoly<f64> {
        let mut out = MPoly::zero(self.d + 1);
        for (e, c) in f.terms() {
            let mut e2 = e.clone();
            e2.push(0);
            out = out.add(&MPoly::monomial(self.d + 1, e2, *c));
        }
        out
    }

    /// Substitutes `x_{d+1}^2 -> 1 - |x|^2` in a polynomial even in the last
    /// variable, producing a polynomial on the ball.
    pub fn push_down(&self, big: &MPoly<f64>) -> Result<MPoly<f64>> {
        let d = self.d;
        let mut out = MPoly::zero(d);
        let mut odd_mass = 0.0f64;
        let mut one_minus_r2 = MPoly::one(d);
        for i in 0..d {
            let xi = MPoly::var(d, i);
            one_minus_r2 = one_minus_r2.sub(&xi.mul(&xi));
        }
        for (e, c) in big.terms() {
            let last = e[d];
            if last % 2 == 1 {
                odd_mass = odd_mass.max(c.abs());
                continue;
            }
            let body = MPoly::monomial(d, e[..d].to_vec(), *c);
            let mut factor = MPoly::one(d);
            for _ in 0..(last / 2) {
                factor = factor.mul(&one_minus_r2);
            }
            out = out.add(&body.mul(&factor));
        }
        let scale = big.max_coeff_abs().max(1.0);
        if odd_mass > 1e-9 * scale {
            return Err(CoreError::InvalidParameter(format!(
                "polynomial is not even in the lifted coordinate (odd mass {odd_mass:.3e})"
            )));
        }
        Ok(out)
    }

    /// Weighted ball integral via the sphere lift.
    pub fn integral(&self, f: &MPoly<f64>) -> Result<f64> {
        Ok(0.5 * self.sphere.quad().integrate_poly(&self.lift(f))?)
    }

    /// Same with `|x_i|` factors on flagged ball coordinates.
    pub fn integral_abs(&self, f: &MPoly<f64>, abs: &[bool]) -> Result<f64> {
        let mut mask = abs.to_vec();
        mask.push(false);
        Ok(0.5 * self.sphere.quad().integrate_poly_abs(&self.lift(f), &mask)?)
    }

    /// Independent route: radial Beta factor times base-sphere moments of
    /// the homogeneous parts.
    pub fn integral_radial(&self, f: &MPoly<f64>) -> Result<f64> {
        let two_kappa = 2.0 * self.base.kappa().total();
        let b = self.mu + 0.5;
        let mut total = 0.0;
        for (k, part) in f.homogeneous_components() {
            let c_k = self.base_quad.integrate_poly(&part)?;
            if c_k == 0.0 {
                continue;
            }
            let a = (self.d as f64 + k as f64 + two_kappa) / 2.0;
            let beta = (ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)).exp();
            total += 0.5 * beta * c_k;
        }
        Ok(total)
    }

    pub fn omega(&self) -> Result<f64> {
        self.integral(&MPoly::one(self.d))
    }

    /// Mean-zero, unit-norm normalization in the ball geometry.
    pub fn normalize(&self, f: &MPoly<f64>) -> Result<MPoly<f64>> {
        let omega = self.omega()?;
        let mean = self.integral(f)? / omega;
        let centered = f.sub(&MPoly::constant(self.d, mean));
        let norm_sq = self.integral(&centered.mul(&centered))?;
        if norm_sq.sqrt() <= 1e-12 * f.max_coeff_abs().max(1.0) {
            return Err(CoreError::ZeroFunction);
        }
        Ok(centered.scale(&(1.0 / norm_sq.sqrt())))
    }

    /// Fractional power of the transferred Laplacian, as a polynomial on the
    /// ball (negative powers need a mean-zero input).
    pub fn fractional(&self, f: &MPoly<f64>, alpha: f64) -> Result<MPoly<f64>> {
        let sf = self.sphere.store().decompose(&self.lift(f))?;
        let scaled = self.sphere.store().fractional_laplacian(&sf, alpha)?;
        let canonical = self.sphere.store().reconstruct(&scaled)?;
        self.push_down(&canonical.chop(1e-13))
    }

    /// Residual between the spectral route and the per-component polynomial
    /// route for the transferred Laplacian at power one.
    pub fn laplacian_dual_residual(&self, f: &MPoly<f64>) -> Result<f64> {
        let big = self.lift(f);
        let sf = self.sphere.store().decompose(&big)?;
        let spectral = self.sphere.store().laplace_beltrami(&sf)?;
        let poly_route = self
            .sphere
            .ctx()
            .sphere_laplacian_poly(&Poly::Float(big))?
            .as_float();
        let decomposed = self.sphere.store().decompose(&poly_route)?;
        Ok(spectral.sub(&decomposed).norm_sq().sqrt())
    }

    /// Localization-times-Dirichlet product on the ball. The input is
    /// normalized internally.
    pub fn uncertainty_product(&self, f: &MPoly<f64>) -> Result<DomainReport> {
        let fnorm = self.normalize(f)?;
        let f_sq = fnorm.mul(&fnorm);
        let mut moments = Vec::with_capacity(self.d);
        for i in 0..self.d {
            moments.push(self.integral(&f_sq.mul(&MPoly::var(self.d, i)))?);
        }
        let norm = moments.iter().map(|x| x * x).sum::<f64>().sqrt();
        let (localization, argmin) = if norm <= 1e-12 {
            (1.0, None)
        } else {
            (1.0 - norm, Some(moments.iter().map(|x| x / norm).collect()))
        };
        let sf = self.sphere.store().decompose(&self.lift(&fnorm))?;
        let dirichlet = 0.5 * self.sphere.store().dirichlet_energy(&sf);
        Ok(DomainReport {
            localization,
            argmin,
            dirichlet,
            product: localization * dirichlet,
        })
    }

    /// Harmonic expansion of the lift (the spectral data of the
    /// transferred operators).
    pub fn lifted_sphere_fn(&self, f: &MPoly<f64>) -> Result<SphereFunction> {
        self.sphere.store().decompose(&self.lift(f))
    }
}

/// Dual-route check of the unweighted hemisphere splitting: the surface
/// integral of a polynomial over the sphere in d+1 variables equals the ball
/// integral of its even part against `(1 - |x|^2)^{-1/2}`, doubled.
pub fn sphere_split_residual(big: &MPoly<f64>) -> Result<f64> {
    let dim = big.dim();
    if dim < 2 {
        return Err(CoreError::InvalidParameter(
            "splitting needs at least two variables".into(),
        ));
    }
    let d = dim - 1;
    let trivial = base_context(Family::Trivial, dim, None, &[])?;
    let sphere_quad = SphereQuad::auto(trivial)?;
    let path_a = sphere_quad.integrate_poly(big)?;

    // Even part in the last variable, pushed down to the ball.
    let mut one_minus_r2 = MPoly::one(d);
    for i in 0..d {
        let xi = MPoly::var(d, i);
        one_minus_r2 = one_minus_r2.sub(&xi.mul(&xi));
    }
    let mut even = MPoly::zero(d);
    for (e, c) in big.terms() {
        if e[d] % 2 == 1 {
            continue;
        }
        let body = MPoly::monomial(d, e[..d].to_vec(), *c);
        let mut factor = MPoly::one(d);
        for _ in 0..(e[d] / 2) {
            factor = factor.mul(&one_minus_r2);
        }
        even = even.add(&body.mul(&factor));
    }
    // Radial Beta route for the arcsine ball weight (mu = 0, no roots).
    let base = base_context(Family::Trivial, d, None, &[])?;
    let base_quad = SphereQuad::auto(base)?;
    let mut path_b = 0.0;
    for (k, part) in even.homogeneous_components() {
        let c_k = base_quad.integrate_poly(&part)?;
        let a = (d as f64 + k as f64) / 2.0;
        let beta = (ln_gamma(a) + ln_gamma(0.5) - ln_gamma(a + 0.5)).exp();
        path_b += beta * c_k;
    }
    Ok((path_a - path_b).abs())
}

/// Simplex weight variants.
#[derive(Clone, Debug)]
pub enum SimplexWeight {
    /// `prod z_i^{kappa_i - 1/2} (1 - |z|)^{kappa_{d+1} - 1/2}`.
    SignType { kappa: Vec<Rat> },
    /// `prod z_i^{axis - 1/2} prod |z_i - z_j|^{diff} (1 - |z|)^{mu - 1/2}`.
    HyperoctType { axis: Rat, diff: Rat, mu: Rat },
}

/// Weighted standard simplex, represented through the even pullbacks of its
/// functions to the ball.
pub struct SimplexDomain {
    d: usize,
    weight: SimplexWeight,
    ball: Arc<BallDomain>,
    /// Constant relating the simplex integral to the ball-machinery
    /// integral of the pullback.
    extra_scale: f64,
}

impl SimplexDomain {
    pub fn new(d: usize, weight: SimplexWeight, max_degree: usize) -> Result<Arc<Self>> {
        let (ball, extra_scale) = match &weight {
            SimplexWeight::SignType { kappa } => {
                if kappa.len() != d + 1 {
                    return Err(CoreError::InvalidParameter(format!(
                        "sign-type simplex weight needs {} exponents, got {}",
                        d + 1,
                        kappa.len()
                    )));
                }
                if kappa.iter().any(|k| k.is_negative()) {
                    return Err(CoreError::InvalidParameter(
                        "simplex exponents must be nonnegative".into(),
                    ));
                }
                let base = base_context(
                    if d == 1 { Family::Z2 } else { Family::Z2 },
                    d,
                    None,
                    &kappa[..d],
                )?;
                let ball = BallDomain::new(base, kappa[d].clone(), max_degree)?;
                let sum: f64 = kappa[..d].iter().map(rat_f64).sum();
                (ball, 2f64.powf(-sum))
            }
            SimplexWeight::HyperoctType { axis, diff, mu } => {
                if d < 2 {
                    return Err(CoreError::InvalidParameter(
                        "hyperoctahedral simplex weight needs d >= 2".into(),
                    ));
                }
                if axis.is_negative() || diff.is_negative() || mu.is_negative() {
                    return Err(CoreError::InvalidParameter(
                        "simplex exponents must be nonnegative".into(),
                    ));
                }
                // |z_i - z_j|^diff pulls back to the difference roots with
                // multiplicity diff/2 (the weight squares multiplicities).
                let half = Rat::new(BigInt::from(1), BigInt::from(2));
                let base = base_context(
                    Family::B,
                    d,
                    None,
                    &[axis.clone(), diff.clone() * &half],
                )?;
                let ball = BallDomain::new(base, mu.clone(), max_degree)?;
                let scale = 2f64.powf(-(d as f64) * rat_f64(axis));
                (ball, scale)
            }
        };
        Ok(Arc::new(SimplexDomain {
            d,
            weight,
            ball,
            extra_scale,
        }))
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn ball(&self) -> &Arc<BallDomain> {
        &self.ball
    }

    pub fn weight(&self) -> &SimplexWeight {
        &self.weight
    }

    /// Simplex weight at an interior point.
    pub fn weight_eval(&self, z: &[f64]) -> f64 {
        let rest = 1.0 - z.iter().sum::<f64>();
        match &self.weight {
            SimplexWeight::SignType { kappa } => {
                let mut w = rest.powf(rat_f64(&kappa[self.d]) - 0.5);
                for (zi, k) in z.iter().zip(&kappa[..self.d]) {
                    w *= zi.powf(rat_f64(k) - 0.5);
                }
                w
            }
            SimplexWeight::HyperoctType { axis, diff, mu } => {
                let mut w = rest.powf(rat_f64(mu) - 0.5);
                for zi in z {
                    w *= zi.powf(rat_f64(axis) - 0.5);
                }
                for i in 0..self.d {
                    for j in (i + 1)..self.d {
                        w *= (z[i] - z[j]).abs().powf(rat_f64(diff));
                    }
                }
                w
            }
        }
    }

    /// `g(z) -> g(x_1^2, ..., x_d^2)`.
    pub fn pullback(&self, g: &MPoly<f64>) -> MPoly<f64> {
        let mut out = MPoly::zero(self.d);
        for (e, c) in g.terms() {
            let doubled: Vec<u32> = e.iter().map(|&k| 2 * k).collect();
            out = out.add(&MPoly::monomial(self.d, doubled, *c));
        }
        out
    }

    /// Inverse of [`Self::pullback`] on fully even polynomials.
    pub fn pushforward(&self, f: &MPoly<f64>) -> Result<MPoly<f64>> {
        let mut out = MPoly::zero(self.d);
        let scale = f.max_coeff_abs().max(1.0);
        for (e, c) in f.terms() {
            if e.iter().any(|&k| k % 2 == 1) {
                if c.abs() > 1e-9 * scale {
                    return Err(CoreError::InvalidParameter(
                        "pullback polynomial has odd monomials".into(),
                    ));
                }
                continue;
            }
            let halved: Vec<u32> = e.iter().map(|&k| k / 2).collect();
            out = out.add(&MPoly::monomial(self.d, halved, *c));
        }
        Ok(out)
    }

    /// Weighted simplex integral via the ball/sphere machinery.
    pub fn integral(&self, g: &MPoly<f64>) -> Result<f64> {
        Ok(self.extra_scale * self.ball.integral(&self.pullback(g))?)
    }

    pub fn omega(&self) -> Result<f64> {
        self.integral(&MPoly::one(self.d))
    }

    /// Independent route: collapsed coordinates `z_1 = u_1`,
    /// `z_i = u_i prod_{l<i}(1 - u_l)` turn the simplex into a cube and the
    /// sign-type weight into a product of Jacobi weights; exact product
    /// Gauss rules apply. Supported for the sign-type weight always, and for
    /// the hyperoctahedral type when the cross factor is a polynomial (even
    /// integer exponent).
    pub fn integral_direct(&self, g: &MPoly<f64>) -> Result<f64> {
        let (axis_exps, rest_exp, cross): (Vec<f64>, f64, Option<u32>) = match &self.weight {
            SimplexWeight::SignType { kappa } => (
                kappa[..self.d].iter().map(|k| rat_f64(k) - 0.5).collect(),
                rat_f64(&kappa[self.d]) - 0.5,
                None,
            ),
            SimplexWeight::HyperoctType { axis, diff, mu } => {
                let diff_f = rat_f64(diff);
                if diff_f.fract() != 0.0 || (diff_f as i64) % 2 != 0 {
                    return Err(CoreError::UnsupportedBackend(
                        "direct simplex rule needs an even integer cross exponent".into(),
                    ));
                }
                (
                    vec![rat_f64(axis) - 0.5; self.d],
                    rat_f64(mu) - 0.5,
                    Some(diff_f as u32),
                )
            }
        };
        // Polynomial part of the integrand in z.
        let mut poly = g.clone();
        if let Some(k) = cross {
            for i in 0..self.d {
                for j in (i + 1)..self.d {
                    let zi = MPoly::var(self.d, i);
                    let zj = MPoly::var(self.d, j);
                    poly = poly.mul(&zi.sub(&zj).pow(k));
                }
            }
        }
        let deg = poly.degree().unwrap_or(0);
        let n = deg * self.d + self.d + 3;
        // Per-coordinate Jacobi rules on [0, 1]. The (1 - u_j) exponent
        // collects the tail weight, the Jacobian power and the prefix
        // factors of the later coordinates, so the remaining integrand is
        // exactly the polynomial `poly(z(u))` and the rule is exact.
        let mut rules = Vec::with_capacity(self.d);
        for j in 0..self.d {
            let a_j = axis_exps[j];
            let c_j = rest_exp
                + (self.d - 1 - j) as f64
                + axis_exps[(j + 1)..].iter().sum::<f64>();
            let (t, w) = gauss_jacobi(n, c_j, a_j);
            let scale = 2f64.powf(-(a_j + c_j + 1.0));
            let nodes: Vec<f64> = t.iter().map(|&ti| (ti + 1.0) / 2.0).collect();
            let weights: Vec<f64> = w.iter().map(|&wi| wi * scale).collect();
            rules.push((nodes, weights));
        }
        let mut total = 0.0;
        let mut idx = vec![0usize; self.d];
        loop {
            let mut u = vec![0.0; self.d];
            let mut w = 1.0;
            for j in 0..self.d {
                u[j] = rules[j].0[idx[j]];
                w *= rules[j].1[idx[j]];
            }
            // Collapsed map u -> z.
            let mut z = vec![0.0; self.d];
            let mut prefix = 1.0;
            for j in 0..self.d {
                z[j] = u[j] * prefix;
                prefix *= 1.0 - u[j];
            }
            total += w * poly.eval_f64(&z);
            let mut j = 0;
            loop {
                if j == self.d {
                    return Ok(total);
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

    pub fn normalize(&self, g: &MPoly<f64>) -> Result<MPoly<f64>> {
        let omega = self.omega()?;
        let mean = self.integral(g)? / omega;
        let centered = g.sub(&MPoly::constant(self.d, mean));
        let norm_sq = self.integral(&centered.mul(&centered))?;
        if norm_sq.sqrt() <= 1e-12 * g.max_coeff_abs().max(1.0) {
            return Err(CoreError::ZeroFunction);
        }
        Ok(centered.scale(&(1.0 / norm_sq.sqrt())))
    }

    /// Eigenvalue of the transferred simplex operator on the image of the
    /// degree-2m sphere harmonics: `m (m + lambda)`.
    pub fn eigenvalue(&self, m: usize) -> f64 {
        let lambda = self.ball.sphere.ctx().lambda();
        m as f64 * (m as f64 + lambda)
    }

    /// Fractional transferred Laplacian on the simplex.
    pub fn fractional(&self, g: &MPoly<f64>, alpha: f64) -> Result<MPoly<f64>> {
        let big = self.ball.lift(&self.pullback(g));
        let sf = self.ball.sphere.store().decompose(&big)?;
        // Components live at even sphere degrees n = 2m with simplex
        // eigenvalue m (m + lambda) = 4^{-1} n (n + 2 lambda).
        if alpha < 0.0 {
            let mean = sf.component_norm_sq(0).sqrt();
            if mean > 1e-10 * (1.0 + sf.norm_sq().sqrt()) {
                return Err(CoreError::NegativePowerNonzeroMean { mean_norm: mean });
            }
        }
        let comps: Vec<Vec<f64>> = sf
            .comps
            .iter()
            .enumerate()
            .map(|(n, coeffs)| {
                let factor = if n == 0 {
                    if alpha == 0.0 {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    self.eigenvalue(n / 2).powf(alpha)
                };
                coeffs.iter().map(|c| c * factor).collect()
            })
            .collect();
        let canonical = self
            .ball
            .sphere
            .store()
            .reconstruct(&SphereFunction { comps })?;
        let on_ball = self.ball.push_down(&canonical.chop(1e-13))?;
        self.pushforward(&on_ball.chop(1e-12))
    }

    /// Least-squares estimate of the constant relating the simplex-side and
    /// ball-side fractional operators (on the pullback): the transferred
    /// relation predicts `4^{-alpha}`.
    pub fn transfer_factor_estimate(&self, g: &MPoly<f64>, alpha: f64) -> Result<f64> {
        let a = self.ball.lift(&self.pullback(&self.fractional(g, alpha)?));
        let b_poly = self.ball.fractional(&self.pullback(g), alpha)?;
        let b = self.ball.lift(&b_poly);
        let sa = self.ball.sphere.store().decompose(&a)?;
        let sb = self.ball.sphere.store().decompose(&b)?;
        let mut num = 0.0;
        let mut den = 0.0;
        for (ca, cb) in sa.comps.iter().zip(&sb.comps) {
            for (x, y) in ca.iter().zip(cb) {
                num += x * y;
                den += y * y;
            }
        }
        if den == 0.0 {
            return Err(CoreError::ZeroFunction);
        }
        Ok(num / den)
    }

    /// Localization moments `s_i = integral sqrt(z_i) |g|^2 W dz`; always
    /// nonnegative.
    pub fn sqrt_moments(&self, g: &MPoly<f64>) -> Result<Vec<f64>> {
        let pull = self.pullback(g);
        let squared = pull.mul(&pull);
        (0..self.d)
            .map(|i| {
                let mut mask = vec![false; self.d];
                mask[i] = true;
                Ok(self.extra_scale * self.ball.integral_abs(&squared, &mask)?)
            })
            .collect()
    }

    /// Localization-times-Dirichlet product on the simplex; the localization
    /// kernel is `1 - sum_i sqrt(z_i y_i)`. The closed form of the minimum is
    /// `1 - |s|`; a seeded search over the simplex is run as a cross-check
    /// and both values are reported (closed form in `localization`,
    /// searched value in `grid_localization`).
    pub fn uncertainty_product(&self, g: &MPoly<f64>) -> Result<(DomainReport, f64)> {
        let gnorm = self.normalize(g)?;
        let s = self.sqrt_moments(&gnorm)?;
        let s_norm = s.iter().map(|x| x * x).sum::<f64>().sqrt();
        let (localization, argmin) = if s_norm <= 1e-12 {
            (1.0, None)
        } else {
            let u: Vec<f64> = s.iter().map(|x| x / s_norm).collect();
            (1.0 - s_norm, Some(u.iter().map(|x| x * x).collect()))
        };
        // Seeded simplex search with shrinking-step refinement.
        let mut best = f64::INFINITY;
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(0x5337_1ace);
        let value = |y: &[f64]| -> f64 {
            1.0 - y
                .iter()
                .zip(&s)
                .map(|(yi, si)| yi.max(0.0).sqrt() * si)
                .sum::<f64>()
        };
        let mut best_y = vec![1.0 / self.d as f64; self.d];
        for _ in 0..2000 {
            // Uniform Dirichlet sample via exponential spacings.
            let mut e: Vec<f64> = (0..=self.d)
                .map(|_| -f64::ln(rng.gen_range(1e-12..1.0)))
                .collect();
            let total: f64 = e.iter().sum();
            e.truncate(self.d);
            let y: Vec<f64> = e.iter().map(|x| x / total).collect();
            let v = value(&y);
            if v < best {
                best = v;
                best_y = y;
            }
        }
        let mut radius = 0.3f64;
        for _ in 0..60 {
            for _ in 0..20 {
                let mut y: Vec<f64> = best_y
                    .iter()
                    .map(|x| (x + rng.gen_range(-radius..radius)).max(0.0))
                    .collect();
                let total: f64 = y.iter().sum();
                if total > 1.0 {
                    for yi in y.iter_mut() {
                        *yi /= total;
                    }
                }
                let v = value(&y);
                if v < best {
                    best = v;
                    best_y = y;
                }
            }
            radius *= 0.7;
        }
        let sf = self
            .ball
            .sphere
            .store()
            .decompose(&self.ball.lift(&self.pullback(&gnorm)))?;
        // Dirichlet term of the transferred operator: the pullback picks up
        // 4^{-1/2} per operator application and the simplex integral carries
        // the extra scale.
        let mut dirichlet = 0.0;
        for (n, coeffs) in sf.comps.iter().enumerate() {
            let lam = 0.25 * self.ball.sphere.ctx().eigenvalue(n);
            dirichlet += lam * coeffs.iter().map(|c| c * c).sum::<f64>();
        }
        dirichlet *= self.extra_scale * 0.5;
        let report = DomainReport {
            localization,
            argmin,
            dirichlet,
            product: localization * dirichlet,
        };
        Ok((report, best))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{rat_int, rat_of};
    use rand::prelude::*;
    use rand_chacha::ChaCha20Rng;

    fn random_poly(d: usize, deg: u32, rng: &mut ChaCha20Rng) -> MPoly<f64> {
        let mut f = MPoly::zero(d);
        for _ in 0..10 {
            let e: Vec<u32> = (0..d).map(|_| rng.gen_range(0..=deg)).collect();
            if e.iter().sum::<u32>() > deg {
                continue;
            }
            f = f.add(&MPoly::monomial(d, e, rng.gen_range(-1.0..1.0)));
        }
        f
    }

    fn lebesgue_ball(d: usize, max_degree: usize) -> Arc<BallDomain> {
        let base = base_context(Family::Trivial, d, None, &[]).unwrap();
        BallDomain::new(base, rat_of(1, 2), max_degree).unwrap()
    }

    #[test]
    fn lift_examples() {
        let base = base_context(Family::Trivial, 2, None, &[]).unwrap();
        let ball = BallDomain::new(base, rat_int(0), 4).unwrap();
        let one = MPoly::one(2);
        assert_eq!(ball.lift(&one).dim(), 3);
        let x1 = MPoly::var(2, 0);
        let lifted = ball.lift(&x1);
        assert_eq!(lifted.coeff(&[1, 0, 0]), 1.0);
    }

    #[test]
    fn classic_hemisphere_integral() {
        // The sphere integral of x3^2 (= 4 pi / 3) equals twice the disk
        // integral of sqrt(1 - |x|^2) (= 2 pi / 3 each half).
        let base = base_context(Family::Trivial, 2, None, &[]).unwrap();
        let ball = BallDomain::new(base, rat_int(0), 4).unwrap();
        // f on the ball whose lift restricted to the sphere is x3^2.
        let mut f = MPoly::one(2);
        for i in 0..2 {
            let xi = MPoly::var(2, i);
            f = f.sub(&xi.mul(&xi));
        }
        let v = ball.integral(&f).unwrap();
        assert!((v - 2.0 * std::f64::consts::PI / 3.0).abs() < 1e-10, "{v}");
        let vr = ball.integral_radial(&f).unwrap();
        assert!((v - vr).abs() < 1e-10);
        // Sphere side: integral of x3^2 over the full surface.
        let x3sq = MPoly::monomial(3, vec![0, 0, 2], 1.0);
        let s = ball.sphere().quad().integrate_poly(&x3sq).unwrap();
        assert!((s - 2.0 * v).abs() < 1e-10);
        assert!((s - 4.0 * std::f64::consts::PI / 3.0).abs() < 1e-10);

        // Constant: the ball integral is half the surface measure.
        let c = MPoly::one(2);
        assert!((ball.integral(&c).unwrap() - 2.0 * std::f64::consts::PI).abs() < 1e-10);
    }

    #[test]
    fn sphere_split_dual_route() {
        let mut rng = ChaCha20Rng::seed_from_u64(61);
        for _ in 0..5 {
            let big = random_poly(3, 6, &mut rng);
            let resid = sphere_split_residual(&big).unwrap();
            assert!(resid < 1e-9, "residual {resid}");
        }
    }

    #[test]
    fn ball_integral_dual_route_weighted() {
        let mut rng = ChaCha20Rng::seed_from_u64(62);
        // Z2^2 base with mixed integer/half-integer data and mu = 1.
        let base = base_context(
            Family::Z2,
            2,
            None,
            &[rat_int(1), rat_of(1, 2)],
        )
        .unwrap();
        let ball = BallDomain::new(base, rat_int(1), 6).unwrap();
        for _ in 0..5 {
            let f = random_poly(2, 5, &mut rng);
            let a = ball.integral(&f).unwrap();
            let b = ball.integral_radial(&f).unwrap();
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn push_down_round_trip() {
        let ball = lebesgue_ball(2, 4);
        let f = MPoly::monomial(2, vec![1, 2], 0.7).add(&MPoly::one(2));
        let lifted = ball.lift(&f);
        let back = ball.push_down(&lifted).unwrap();
        assert_eq!(back, f);
        // Odd lifted coordinate rejected.
        let odd = MPoly::monomial(3, vec![0, 0, 1], 1.0);
        assert!(ball.push_down(&odd).is_err());
    }

    #[test]
    fn ball_fractional_eigenrelation_d1() {
        // d = 1, no weight: the lift of x is the first circle harmonic with
        // eigenvalue 1.
        let base = base_context(Family::Trivial, 1, None, &[]).unwrap();
        let ball = BallDomain::new(base, rat_int(0), 4).unwrap();
        let x = MPoly::var(1, 0);
        let out = ball.fractional(&x, 1.0).unwrap();
        let diff = out.sub(&x);
        assert!(diff.max_coeff_abs() < 1e-10, "{diff:?}");

        // alpha = 0 is the identity on mean-zero input.
        let id = ball.fractional(&x, 0.0).unwrap();
        assert!(id.sub(&x).max_coeff_abs() < 1e-10);
    }

    #[test]
    fn ball_fractional_semigroup() {
        let base = base_context(Family::Z2, 2, None, &[rat_int(1), rat_int(0)]).unwrap();
        let ball = BallDomain::new(base, rat_of(1, 2), 6).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(63);
        let f = ball.normalize(&random_poly(2, 3, &mut rng)).unwrap();
        let two_halves = ball
            .fractional(&ball.fractional(&f, 0.5).unwrap(), 0.5)
            .unwrap();
        let whole = ball.fractional(&f, 1.0).unwrap();
        let resid = ball
            .integral(&two_halves.sub(&whole).mul(&two_halves.sub(&whole)))
            .unwrap()
            .sqrt();
        assert!(resid < 1e-8, "residual {resid}");
    }

    #[test]
    fn ball_laplacian_dual_route() {
        let base = base_context(Family::Z2, 2, None, &[rat_int(1), rat_int(2)]).unwrap();
        let ball = BallDomain::new(base, rat_int(1), 6).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(64);
        for _ in 0..3 {
            let f = random_poly(2, 4, &mut rng);
            let resid = ball.laplacian_dual_residual(&f).unwrap();
            assert!(resid < 1e-8, "residual {resid}");
        }
    }

    #[test]
    fn ball_weight_invariants() {
        let base = base_context(Family::Z2, 2, None, &[rat_int(1), rat_int(1)]).unwrap();
        let ball = BallDomain::new(base.clone(), rat_int(0), 4).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(65);
        for _ in 0..50 {
            let x: Vec<f64> = (0..2).map(|_| rng.gen_range(-0.6..0.6)).collect();
            let w = ball.weight_eval(&x);
            assert!(w >= 0.0);
            // mu = 0 reduction.
            let r2: f64 = x.iter().map(|c| c * c).sum();
            let expect = weight_sq_eval(base.root_system(), base.kappa(), &x)
                / (1.0 - r2).sqrt();
            assert!((w - expect).abs() <= 1e-12 * expect.abs().max(1.0));
        }
    }

    #[test]
    fn ball_uncertainty_lebesgue_case() {
        // kappa = 0, mu = 1/2, d = 2: f ~ x1 matches the sphere computation.
        let ball = lebesgue_ball(2, 4);
        let report = ball.uncertainty_product(&MPoly::var(2, 0)).unwrap();
        assert!(report.product > 0.0);
        // Lift of x1 is a degree-1 harmonic with eigenvalue 1 + 2 lambda,
        // lambda = 1/2 + 1/2 = 1, so the Dirichlet term is 3 and the moment
        // vanishes by oddness.
        assert!((report.localization - 1.0).abs() < 1e-12);
        assert!((report.dirichlet - 3.0).abs() < 1e-9, "{}", report.dirichlet);

        // Even invariant f: zero moment, localization 1.
        let even = MPoly::var(2, 0).mul(&MPoly::var(2, 0));
        let report2 = ball.uncertainty_product(&even).unwrap();
        assert!((report2.localization - 1.0).abs() < 1e-12);
        assert!(report2.argmin.is_none());
    }

    #[test]
    fn simplex_chebyshev_integral() {
        // d = 1, all exponents zero: integral of z against z^{-1/2}(1-z)^{-1/2}
        // equals the half-moment of x^2 on [-1,1] with the arcsine weight.
        let w = SimplexWeight::SignType {
            kappa: vec![rat_int(0), rat_int(0)],
        };
        let sx = SimplexDomain::new(1, w, 6).unwrap();
        let g = MPoly::var(1, 0);
        let v = sx.integral(&g).unwrap();
        // integral_0^1 z^{1/2} (1-z)^{-1/2} dz = pi / 2
        assert!((v - std::f64::consts::PI / 2.0).abs() < 1e-10, "{v}");
        let vd = sx.integral_direct(&g).unwrap();
        assert!((v - vd).abs() < 1e-10);
    }

    #[test]
    fn simplex_volume_from_half_exponents() {
        // kappa_i = 1/2 everywhere makes the weight Lebesgue; the volume of
        // the standard simplex is 1/d!.
        for d in 1..=3usize {
            let w = SimplexWeight::SignType {
                kappa: vec![rat_of(1, 2); d + 1],
            };
            let sx = SimplexDomain::new(d, w, 4).unwrap();
            let vol = sx.omega().unwrap();
            let fact: f64 = (1..=d).map(|k| k as f64).product();
            assert!(
                (vol - 1.0 / fact).abs() < 1e-9,
                "d = {d}: {vol} vs {}",
                1.0 / fact
            );
        }
    }

    #[test]
    fn simplex_integral_dual_route() {
        let mut rng = ChaCha20Rng::seed_from_u64(66);
        // Sign-type weight with assorted exponents.
        let w = SimplexWeight::SignType {
            kappa: vec![rat_int(1), rat_of(3, 2), rat_of(1, 2)],
        };
        let sx = SimplexDomain::new(2, w, 6).unwrap();
        for _ in 0..5 {
            let g = random_poly(2, 4, &mut rng);
            let a = sx.integral(&g).unwrap();
            let b = sx.integral_direct(&g).unwrap();
            assert!((a - b).abs() < 1e-9 * (1.0 + a.abs()), "{a} vs {b}");
        }

        // Hyperoctahedral type with an even cross exponent.
        let w2 = SimplexWeight::HyperoctType {
            axis: rat_int(1),
            diff: rat_int(2),
            mu: rat_of(1, 2),
        };
        let sx2 = SimplexDomain::new(2, w2, 6).unwrap();
        for _ in 0..5 {
            let g = random_poly(2, 3, &mut rng);
            let a = sx2.integral(&g).unwrap();
            let b = sx2.integral_direct(&g).unwrap();
            assert!((a - b).abs() < 1e-8 * (1.0 + a.abs()), "{a} vs {b}");
        }
    }

    #[test]
    fn unweighted_pullback_identity() {
        // integral over the ball of g(psi(x)) equals the simplex integral of
        // g against prod z^{-1/2}: both closed form.
        let mut rng = ChaCha20Rng::seed_from_u64(67);
        let w = SimplexWeight::SignType {
            kappa: vec![rat_int(0), rat_int(0), rat_of(1, 2)],
        };
        let sx = SimplexDomain::new(2, w, 6).unwrap();
        for _ in 0..5 {
            let g = random_poly(2, 5, &mut rng);
            // Ball Lebesgue integral of the pullback.
            let ball = lebesgue_ball(2, 6);
            let a = ball.integral(&sx.pullback(&g)).unwrap();
            let b = sx.integral(&g).unwrap();
            assert!((a - b).abs() < 1e-9 * (1.0 + a.abs()), "{a} vs {b}");
        }
    }

    #[test]
    fn simplex_fractional_chebyshev_eigenfunction() {
        // d = 1 Chebyshev weight: the transferred operator at alpha = 1 has
        // eigenvalue m^2 on the image of cos(2m theta); m = 1 here.
        let w = SimplexWeight::SignType {
            kappa: vec![rat_int(0), rat_int(0)],
        };
        let sx = SimplexDomain::new(1, w, 6).unwrap();
        let g = MPoly::var(1, 0);
        let gn = sx.normalize(&g).unwrap();
        let out = sx.fractional(&gn, 1.0).unwrap();
        let diff = out.sub(&gn);
        let resid = sx.integral(&diff.mul(&diff)).unwrap().sqrt();
        assert!(resid < 1e-9, "residual {resid}");
    }

    #[test]
    fn simplex_factor_recovered() {
        let mut rng = ChaCha20Rng::seed_from_u64(68);
        let w = SimplexWeight::SignType {
            kappa: vec![rat_int(1), rat_int(1), rat_of(1, 2)],
        };
        let sx = SimplexDomain::new(2, w, 8).unwrap();
        for alpha in [0.5, 1.0] {
            let g = random_poly(2, 3, &mut rng);
            let gn = sx.normalize(&g).unwrap();
            let factor = sx.transfer_factor_estimate(&gn, alpha).unwrap();
            assert!(
                (factor - 4f64.powf(-alpha)).abs() < 1e-8,
                "alpha {alpha}: {factor}"
            );
        }
    }

    #[test]
    fn simplex_fractional_semigroup() {
        let w = SimplexWeight::SignType {
            kappa: vec![rat_int(1), rat_int(0), rat_int(1)],
        };
        let sx = SimplexDomain::new(2, w, 8).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(69);
        let g = sx.normalize(&random_poly(2, 3, &mut rng)).unwrap();
        let halves = sx.fractional(&sx.fractional(&g, 0.5).unwrap(), 0.5).unwrap();
        let whole = sx.fractional(&g, 1.0).unwrap();
        let diff = halves.sub(&whole);
        let resid = sx.integral(&diff.mul(&diff)).unwrap().sqrt();
        assert!(resid < 1e-8, "residual {resid}");
    }

    #[test]
    fn simplex_localization_closed_form_vs_search() {
        let mut rng = ChaCha20Rng::seed_from_u64(70);
        let w = SimplexWeight::SignType {
            kappa: vec![rat_int(1), rat_of(1, 2), rat_int(1)],
        };
        let sx = SimplexDomain::new(2, w, 8).unwrap();
        for _ in 0..3 {
            let g = random_poly(2, 3, &mut rng);
            if sx.normalize(&g).is_err() {
                continue;
            }
            let (report, searched) = sx.uncertainty_product(&g).unwrap();
            assert!(report.product > 0.0);
            assert!(
                (report.localization - searched).abs() < 1e-6,
                "closed {} vs searched {searched}",
                report.localization
            );
            // The localization kernel is nonnegative on the simplex.
            if let Some(y) = &report.argmin {
                assert!(y.iter().all(|&yi| yi >= -1e-12));
                let total: f64 = y.iter().sum();
                assert!(total <= 1.0 + 1e-9);
            }
        }
    }

    #[test]
    fn hyperoct_simplex_products_positive() {
        let w = SimplexWeight::HyperoctType {
            axis: rat_int(1),
            diff: rat_int(2),
            mu: rat_int(1),
        };
        let sx = SimplexDomain::new(2, w, 8).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(71);
        let mut checked = 0;
        for _ in 0..5 {
            let g = random_poly(2, 2, &mut rng);
            if sx.normalize(&g).is_err() {
                continue;
            }
            let (report, _) = sx.uncertainty_product(&g).unwrap();
            assert!(report.product > 0.0, "product {}", report.product);
            checked += 1;
        }
        assert!(checked > 0);
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(SimplexDomain::new(
            2,
            SimplexWeight::SignType {
                kappa: vec![rat_int(1)],
            },
            4
        )
        .is_err());
        assert!(SimplexDomain::new(
            2,
            SimplexWeight::SignType {
                kappa: vec![rat_int(-1), rat_int(0), rat_int(0)],
            },
            4
        )
        .is_err());
        let base = base_context(Family::Trivial, 2, None, &[]).unwrap();
        assert!(BallDomain::new(base, rat_of(-1, 2), 4).is_err());
    }
}
