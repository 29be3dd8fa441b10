//! Differential-difference operators attached to a root system and
//! multiplicity function: Dunkl derivatives, the associated Laplacian and
//! gradient, angular derivatives, reflection difference quotients, and the
//! restrictions of the Laplacian/gradient to the unit sphere.
//!
//! Operators stay in exact-rational mode whenever the root data permits: for
//! roots of the form `sqrt(2) w` with rational `w` the irrational factors
//! cancel between `<v, e_i>` and `<x, v>`, so the Dunkl derivative of a
//! rational polynomial is rational. The bare difference quotient `E_v` keeps
//! a `1/sqrt(2)` factor and is promoted to float in that case.

use std::sync::Arc;

use num::{BigInt, ToPrimitive, Zero};

use crate::error::{CoreError, Result};
use crate::poly::{divide_by_linear_rotated, ArithOp, MPoly, Poly, Rat};
use crate::reflection::{GroupElement, Multiplicity, RootSystem};

/// Relative remainder tolerance for float-mode reflection divisions.
const REMAINDER_TOL: f64 = 1e-9;

/// Root system plus multiplicity, with the spectral shift `lambda` cached.
#[derive(Clone)]
pub struct OperatorContext {
    rs: Arc<RootSystem>,
    kappa: Multiplicity,
}

impl OperatorContext {
    pub fn new(rs: Arc<RootSystem>, kappa: Multiplicity) -> Result<Self> {
        if kappa.len() != rs.num_roots() {
            return Err(CoreError::InvalidParameter(format!(
                "multiplicity has {} entries for {} roots",
                kappa.len(),
                rs.num_roots()
            )));
        }
        Ok(OperatorContext { rs, kappa })
    }

    pub fn root_system(&self) -> &Arc<RootSystem> {
        &self.rs
    }

    pub fn kappa(&self) -> &Multiplicity {
        &self.kappa
    }

    pub fn dim(&self) -> usize {
        self.rs.dim()
    }

    /// `lambda = (d - 2)/2 + |kappa|`.
    pub fn lambda(&self) -> f64 {
        (self.dim() as f64 - 2.0) / 2.0 + self.kappa.total()
    }

    pub fn lambda_rat(&self) -> Rat {
        Rat::new(BigInt::from(self.dim() as i64 - 2), BigInt::from(2)) + self.kappa.total_rat()
    }

    /// Spectral value `n (n + 2 lambda)` of the sphere Laplacian on degree n.
    pub fn eigenvalue(&self, n: usize) -> f64 {
        let n = n as f64;
        n * (n + 2.0 * self.lambda())
    }

    fn eigenvalue_rat(&self, n: usize) -> Rat {
        let n_rat = Rat::from_integer(BigInt::from(n as i64));
        let two = Rat::from_integer(BigInt::from(2));
        &n_rat * (&n_rat + two * self.lambda_rat())
    }

    /// True when every root carries an exact shadow, so Dunkl operators can
    /// run in rational mode.
    pub fn exact_capable(&self) -> bool {
        self.rs.fully_exact()
    }

    /// Composition with a group element: `f(g x)`.
    pub fn compose_group(&self, f: &Poly, g: &GroupElement) -> Poly {
        match (f, &g.exact) {
            (Poly::Exact(p), Some(m)) => Poly::Exact(p.compose_linear(m)),
            _ => Poly::Float(f.as_float().compose_linear(&g.mat)),
        }
    }

    /// `f - f o sigma_v` for the v-th positive root.
    fn reflection_difference(&self, v: usize, f: &Poly) -> Poly {
        let sigma = self.rs.positive_roots()[v].reflection();
        let reflected = self.compose_group(f, &sigma);
        match (f, &reflected) {
            (Poly::Exact(a), Poly::Exact(b)) => Poly::Exact(a.sub(b)),
            _ => Poly::Float(f.as_float().sub(&reflected.as_float())),
        }
    }

    /// Exact divided difference `(f - f o sigma_v) / <x, w>` for a shadowed
    /// root `v = scale * w`; the caller handles the scale factor.
    fn exact_divided_difference(&self, v: usize, f: &MPoly<Rat>) -> Result<MPoly<Rat>> {
        let root = &self.rs.positive_roots()[v];
        let (_, w) = root.exact.as_ref().expect("caller checked shadow");
        let sigma = root.reflection();
        let m = sigma.exact.as_ref().expect("shadowed root has exact matrix");
        let diff = f.sub(&f.compose_linear(m));
        let pivot = w
            .iter()
            .position(|c| !c.is_zero())
            .expect("root is nonzero");
        let (q, r) = diff.divide_by_linear(w, pivot);
        if !r.is_zero() {
            return Err(CoreError::DivisionRemainder {
                norm: r.max_coeff_abs(),
            });
        }
        Ok(q)
    }

    /// Float divided difference `(f - f o sigma_v) / <x, v>`.
    fn float_divided_difference(&self, v: usize, f: &MPoly<f64>) -> Result<MPoly<f64>> {
        let root = &self.rs.positive_roots()[v];
        let sigma = root.reflection();
        let diff = f.sub(&f.compose_linear(&sigma.mat));
        let (q, r) = divide_by_linear_rotated(&diff, &root.coords);
        let scale = f.max_coeff_abs().max(1.0);
        if r.max_coeff_abs() > REMAINDER_TOL * scale {
            return Err(CoreError::DivisionRemainder {
                norm: r.max_coeff_abs(),
            });
        }
        Ok(q.chop(1e-13))
    }

    /// The Dunkl derivative in direction `i` (zero-based).
    pub fn dunkl_derivative(&self, i: usize, f: &Poly) -> Result<Poly> {
        let d = self.dim();
        if i >= d {
            return Err(CoreError::IndexOutOfRange { index: i, dim: d });
        }
        if f.dim() != d {
            return Err(CoreError::DimensionMismatch {
                expected: d,
                got: f.dim(),
            });
        }
        match f {
            Poly::Exact(p) if self.exact_capable() => {
                let mut out = p.partial(i)?;
                for (v, root) in self.rs.positive_roots().iter().enumerate() {
                    let k = self.kappa.value_rat(v);
                    if k.is_zero() {
                        continue;
                    }
                    let (_, w) = root.exact.as_ref().unwrap();
                    if w[i].is_zero() {
                        continue;
                    }
                    let q = self.exact_divided_difference(v, p)?;
                    out = out.add(&q.scale(&(k.clone() * &w[i])));
                }
                Ok(Poly::Exact(out))
            }
            _ => {
                let p = f.as_float();
                let mut out = p.partial(i)?;
                for (v, root) in self.rs.positive_roots().iter().enumerate() {
                    let k = self.kappa.value(v);
                    if k == 0.0 || root.coords[i].abs() < 1e-15 {
                        continue;
                    }
                    let q = self.float_divided_difference(v, &p)?;
                    out = out.add(&q.scale(&(k * root.coords[i])));
                }
                Ok(Poly::Float(out))
            }
        }
    }

    /// The Dunkl gradient as a vector of polynomials.
    pub fn dunkl_gradient(&self, f: &Poly) -> Result<Vec<Poly>> {
        (0..self.dim()).map(|i| self.dunkl_derivative(i, f)).collect()
    }

    /// The Dunkl Laplacian: sum of squared Dunkl derivatives.
    pub fn dunkl_laplacian(&self, f: &Poly) -> Result<Poly> {
        let mut out = if matches!(f, Poly::Exact(_)) && self.exact_capable() {
            Poly::Exact(MPoly::zero(self.dim()))
        } else {
            Poly::Float(MPoly::zero(self.dim()))
        };
        for i in 0..self.dim() {
            let second = self.dunkl_derivative(i, &self.dunkl_derivative(i, f)?)?;
            out = out.arith(&second, ArithOp::Add)?;
        }
        Ok(out)
    }

    /// The reflection difference quotient `E_v f = (f - f o sigma_v)/<x, v>`.
    /// Promotes to float for roots whose shadow carries a sqrt(2) scale.
    pub fn difference_op(&self, v: usize, f: &Poly) -> Result<Poly> {
        let root = &self.rs.positive_roots()[v];
        match (f, &root.exact) {
            (Poly::Exact(p), Some((crate::reflection::RootScale::One, _))) => {
                Ok(Poly::Exact(self.exact_divided_difference(v, p)?))
            }
            (Poly::Exact(p), Some((crate::reflection::RootScale::Sqrt2, _))) => {
                let q = self.exact_divided_difference(v, p)?;
                Ok(Poly::Float(
                    q.to_float().scale(&std::f64::consts::FRAC_1_SQRT_2),
                ))
            }
            _ => Ok(Poly::Float(
                self.float_divided_difference(v, &f.as_float())?,
            )),
        }
    }

    /// Sphere restriction of the Laplacian applied per homogeneous part:
    /// for `p` homogeneous of degree n the representative is
    /// `Delta_kappa p - n (n + 2 lambda) p`, summed over parts. The result
    /// represents a function on the sphere (equality holds modulo
    /// `|x|^2 - 1`).
    pub fn sphere_laplacian_poly(&self, f: &Poly) -> Result<Poly> {
        let exact = matches!(f, Poly::Exact(_)) && self.exact_capable();
        let mut out = if exact {
            Poly::Exact(MPoly::zero(self.dim()))
        } else {
            Poly::Float(MPoly::zero(self.dim()))
        };
        for (n, part) in f.homogeneous_components() {
            let part = if exact { part } else { part.to_float() };
            let lap = self.dunkl_laplacian(&part)?;
            let shifted = match (&lap, &part) {
                (Poly::Exact(l), Poly::Exact(p)) => {
                    Poly::Exact(l.sub(&p.scale(&self.eigenvalue_rat(n))))
                }
                _ => Poly::Float(
                    lap.as_float()
                        .sub(&part.as_float().scale(&self.eigenvalue(n))),
                ),
            };
            out = out.arith(&shifted, ArithOp::Add)?;
        }
        Ok(out)
    }

    /// Sphere restriction of the gradient applied per homogeneous part:
    /// component `i` of degree-n input contributes `D_i p - n x_i p`.
    pub fn sphere_gradient_poly(&self, f: &Poly) -> Result<Vec<Poly>> {
        let exact = matches!(f, Poly::Exact(_)) && self.exact_capable();
        let d = self.dim();
        let mut comps: Vec<Poly> = (0..d)
            .map(|_| {
                if exact {
                    Poly::Exact(MPoly::zero(d))
                } else {
                    Poly::Float(MPoly::zero(d))
                }
            })
            .collect();
        for (n, part) in f.homogeneous_components() {
            let part = if exact { part } else { part.to_float() };
            for (i, comp) in comps.iter_mut().enumerate() {
                let deriv = self.dunkl_derivative(i, &part)?;
                let xi_p = Poly::var(d, i);
                let xi_p = if exact { xi_p } else { xi_p.to_float() };
                let radial = xi_p
                    .arith(&part, ArithOp::Mul)?
                    .scale_f64(n as f64);
                let term = deriv.arith(&radial, ArithOp::Sub)?;
                *comp = comp.arith(&term, ArithOp::Add)?;
            }
        }
        Ok(comps)
    }

    /// `x . grad_{kappa,0} f` as a polynomial representative. On the sphere
    /// this equals the reflection sum `sum_v kappa_v (f - f o sigma_v)`.
    pub fn radial_gradient_component(&self, f: &Poly) -> Result<Poly> {
        let grads = self.sphere_gradient_poly(f)?;
        let d = self.dim();
        let mut out = grads[0].clone().scale_f64(0.0);
        for (i, g) in grads.iter().enumerate() {
            let xi = if matches!(g, Poly::Exact(_)) {
                Poly::var(d, i)
            } else {
                Poly::var(d, i).to_float()
            };
            out = out.arith(&xi.arith(g, ArithOp::Mul)?, ArithOp::Add)?;
        }
        Ok(out)
    }

    /// The reflection sum `sum_v kappa_v (f - f o sigma_v)`.
    pub fn reflection_sum(&self, f: &Poly) -> Result<Poly> {
        let exact = matches!(f, Poly::Exact(_)) && self.exact_capable();
        let mut out = if exact {
            Poly::Exact(MPoly::zero(self.dim()))
        } else {
            Poly::Float(MPoly::zero(self.dim()))
        };
        for v in 0..self.rs.num_roots() {
            let k = self.kappa.value(v);
            if k == 0.0 {
                continue;
            }
            let diff = self.reflection_difference(v, f);
            let diff = if exact { diff } else { diff.to_float() };
            out = out.arith(&diff.scale_f64(k), ArithOp::Add)?;
        }
        Ok(out)
    }
}

/// Angular derivative `D_{i,j} f = x_j d_i f - x_i d_j f` (zero-based
/// indices). Antisymmetric in `(i, j)`; zero for `i = j`.
pub fn angular_derivative(i: usize, j: usize, f: &Poly) -> Result<Poly> {
    let d = f.dim();
    if i >= d || j >= d {
        return Err(CoreError::IndexOutOfRange {
            index: i.max(j),
            dim: d,
        });
    }
    let xi = match f {
        Poly::Exact(_) => Poly::var(d, i),
        Poly::Float(_) => Poly::var(d, i).to_float(),
    };
    let xj = match f {
        Poly::Exact(_) => Poly::var(d, j),
        Poly::Float(_) => Poly::var(d, j).to_float(),
    };
    let term1 = xj.arith(&f.partial(i)?, ArithOp::Mul)?;
    let term2 = xi.arith(&f.partial(j)?, ArithOp::Mul)?;
    term1.arith(&term2, ArithOp::Sub)
}

/// `sum_{i,j} x_i x_j D_{i,j} f`, identically zero as a polynomial.
pub fn tangential_euler_contraction(f: &Poly) -> Result<Poly> {
    let d = f.dim();
    let mut out = match f {
        Poly::Exact(_) => Poly::zero_exact(d),
        Poly::Float(_) => Poly::zero_exact(d).to_float(),
    };
    for i in 0..d {
        for j in 0..d {
            let dij = angular_derivative(i, j, f)?;
            let xi = match f {
                Poly::Exact(_) => Poly::var(d, i),
                Poly::Float(_) => Poly::var(d, i).to_float(),
            };
            let xj = match f {
                Poly::Exact(_) => Poly::var(d, j),
                Poly::Float(_) => Poly::var(d, j).to_float(),
            };
            let term = xi.arith(&xj.arith(&dij, ArithOp::Mul)?, ArithOp::Mul)?;
            out = out.arith(&term, ArithOp::Add)?;
        }
    }
    Ok(out)
}

pub fn rat_int(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

pub fn rat_of(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

pub fn rat_to_f64(r: &Rat) -> f64 {
    r.to_f64().unwrap()
}
