//! Sparse multivariate polynomials with exact-rational or float coefficients.
//!
//! Exponent vectors are stored densely (the working dimension stays small) in
//! a `BTreeMap` so that iteration order, and therefore every derived float
//! computation, is deterministic. Rational mode is the default for operator
//! algebra; promotion to float happens explicitly via [`Poly::to_float`] or
//! implicitly inside operators whose coefficients are irrational.

use std::collections::BTreeMap;
use std::fmt;

use num::{BigInt, BigRational, FromPrimitive, Signed, ToPrimitive, Zero};

use crate::error::{CoreError, Result};

/// Exact rational coefficient type.
pub type Rat = BigRational;

/// Coefficient ring shared by the exact and float polynomial flavours.
pub trait Scalar:
    Clone
    + fmt::Debug
    + PartialEq
    + num::traits::Zero
    + num::traits::One
    + std::ops::Neg<Output = Self>
    + std::ops::Sub<Output = Self>
    + std::ops::Div<Output = Self>
{
    fn from_i64(n: i64) -> Self;
    fn to_f64(&self) -> f64;
    fn abs_f64(&self) -> f64 {
        self.to_f64().abs()
    }
}

impl Scalar for Rat {
    fn from_i64(n: i64) -> Self {
        Rat::from_integer(BigInt::from(n))
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or_else(|| {
            // Fallback for numerator/denominator overflowing f64 separately.
            let n = self.numer().to_f64().unwrap_or(f64::NAN);
            let d = self.denom().to_f64().unwrap_or(f64::NAN);
            n / d
        })
    }
}

impl Scalar for f64 {
    fn from_i64(n: i64) -> Self {
        n as f64
    }
    fn to_f64(&self) -> f64 {
        *self
    }
}

/// Sparse multivariate polynomial over the coefficient ring `C`.
#[derive(Clone, Debug, PartialEq)]
pub struct MPoly<C: Scalar> {
    dim: usize,
    terms: BTreeMap<Vec<u32>, C>,
}

impl<C: Scalar> MPoly<C> {
    pub fn zero(dim: usize) -> Self {
        MPoly {
            dim,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(dim: usize, c: C) -> Self {
        let mut p = Self::zero(dim);
        p.insert_term(vec![0; dim], c);
        p
    }

    pub fn one(dim: usize) -> Self {
        Self::constant(dim, C::one())
    }

    /// The coordinate polynomial `x_{i+1}` (zero-based index).
    pub fn var(dim: usize, i: usize) -> Self {
        assert!(i < dim, "variable index out of range");
        let mut e = vec![0; dim];
        e[i] = 1;
        let mut p = Self::zero(dim);
        p.insert_term(e, C::one());
        p
    }

    pub fn monomial(dim: usize, exps: Vec<u32>, c: C) -> Self {
        assert_eq!(exps.len(), dim);
        let mut p = Self::zero(dim);
        p.insert_term(exps, c);
        p
    }

    /// Linear form `sum_j coeffs[j] * x_j`.
    pub fn linear_form(coeffs: &[C]) -> Self {
        let dim = coeffs.len();
        let mut p = Self::zero(dim);
        for (j, c) in coeffs.iter().enumerate() {
            if !c.is_zero() {
                let mut e = vec![0; dim];
                e[j] = 1;
                p.insert_term(e, c.clone());
            }
        }
        p
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u32>, &C)> {
        self.terms.iter()
    }

    pub fn coeff(&self, exps: &[u32]) -> C {
        self.terms.get(exps).cloned().unwrap_or_else(C::zero)
    }

    /// Max total degree of stored terms; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.terms
            .keys()
            .map(|e| e.iter().map(|&k| k as usize).sum())
            .max()
    }

    fn insert_term(&mut self, exps: Vec<u32>, c: C) {
        if c.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(exps) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                let s = o.get().clone() + c;
                if s.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = s;
                }
            }
        }
    }

    fn check_dim(&self, other: &Self) {
        assert_eq!(self.dim, other.dim, "polynomial dimension mismatch");
    }

    pub fn add(&self, other: &Self) -> Self {
        self.check_dim(other);
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.insert_term(e.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.check_dim(other);
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.insert_term(e.clone(), -c.clone());
        }
        out
    }

    pub fn neg(&self) -> Self {
        let mut out = Self::zero(self.dim);
        for (e, c) in &self.terms {
            out.terms.insert(e.clone(), -c.clone());
        }
        out
    }

    pub fn scale(&self, c: &C) -> Self {
        if c.is_zero() {
            return Self::zero(self.dim);
        }
        let mut out = Self::zero(self.dim);
        for (e, k) in &self.terms {
            let prod = k.clone() * c.clone();
            if !prod.is_zero() {
                out.terms.insert(e.clone(), prod);
            }
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.check_dim(other);
        let mut out = Self::zero(self.dim);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let e: Vec<u32> = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                out.insert_term(e, ca.clone() * cb.clone());
            }
        }
        out
    }

    pub fn pow(&self, n: u32) -> Self {
        let mut out = Self::one(self.dim);
        for _ in 0..n {
            out = out.mul(self);
        }
        out
    }

    /// Direct term-by-term evaluation.
    pub fn eval(&self, point: &[C]) -> C {
        assert_eq!(point.len(), self.dim);
        let mut acc = C::zero();
        for (e, c) in &self.terms {
            let mut t = c.clone();
            for (xi, &k) in point.iter().zip(e) {
                for _ in 0..k {
                    t = t * xi.clone();
                }
            }
            acc = acc + t;
        }
        acc
    }

    /// Evaluation at a float point, converting coefficients on the fly.
    pub fn eval_f64(&self, point: &[f64]) -> f64 {
        assert_eq!(point.len(), self.dim);
        let mut acc = 0.0;
        for (e, c) in &self.terms {
            let mut t = c.to_f64();
            for (xi, &k) in point.iter().zip(e) {
                t *= xi.powi(k as i32);
            }
            acc += t;
        }
        acc
    }

    pub fn partial(&self, i: usize) -> Result<Self> {
        if i >= self.dim {
            return Err(CoreError::IndexOutOfRange {
                index: i,
                dim: self.dim,
            });
        }
        let mut out = Self::zero(self.dim);
        for (e, c) in &self.terms {
            if e[i] == 0 {
                continue;
            }
            let mut e2 = e.clone();
            e2[i] -= 1;
            out.insert_term(e2, c.clone() * C::from_i64(e[i] as i64));
        }
        Ok(out)
    }

    /// Substitution `x_i -> sum_j m[i][j] x_j` (i.e. the result is `p(Mx)`).
    pub fn compose_linear(&self, m: &[Vec<C>]) -> Self {
        assert_eq!(m.len(), self.dim);
        let rows: Vec<MPoly<C>> = m.iter().map(|r| MPoly::linear_form(r)).collect();
        let mut out = Self::zero(self.dim);
        for (e, c) in &self.terms {
            let mut t = Self::constant(self.dim, c.clone());
            for (i, &k) in e.iter().enumerate() {
                if k > 0 {
                    t = t.mul(&rows[i].pow(k));
                }
            }
            out = out.add(&t);
        }
        out
    }

    /// Splits into homogeneous parts, returned as (degree, part) pairs in
    /// increasing degree with zero parts omitted.
    pub fn homogeneous_components(&self) -> Vec<(usize, Self)> {
        let mut parts: BTreeMap<usize, Self> = BTreeMap::new();
        for (e, c) in &self.terms {
            let deg: usize = e.iter().map(|&k| k as usize).sum();
            parts
                .entry(deg)
                .or_insert_with(|| Self::zero(self.dim))
                .insert_term(e.clone(), c.clone());
        }
        parts.into_iter().filter(|(_, p)| !p.is_zero()).collect()
    }

    /// Multiplies by `(x_1^2 + ... + x_d^2)^k`.
    pub fn mul_norm_sq_pow(&self, k: usize) -> Self {
        let mut r2 = Self::zero(self.dim);
        for i in 0..self.dim {
            let mut e = vec![0; self.dim];
            e[i] = 2;
            r2.insert_term(e, C::one());
        }
        let mut out = self.clone();
        for _ in 0..k {
            out = out.mul(&r2);
        }
        out
    }

    /// Reduction of `self` by the linear form `form` using `pivot` as the
    /// leading variable: returns `(q, r)` with `self = form * q + r` and `r`
    /// free of `x_pivot`. Exact over rationals.
    pub fn divide_by_linear(&self, form: &[C], pivot: usize) -> (Self, Self) {
        assert_eq!(form.len(), self.dim);
        assert!(!form[pivot].is_zero(), "pivot coefficient must be nonzero");
        let mut q = Self::zero(self.dim);
        let mut r = Self::zero(self.dim);
        let mut work = self.clone();
        let c_piv = form[pivot].clone();
        loop {
            // Leading term in pivot-major order: highest pivot exponent first.
            let lead = work
                .terms
                .iter()
                .max_by(|(ea, _), (eb, _)| {
                    ea[pivot]
                        .cmp(&eb[pivot])
                        .then_with(|| ea.cmp(eb))
                })
                .map(|(e, c)| (e.clone(), c.clone()));
            let Some((e, c)) = lead else { break };
            if e[pivot] == 0 {
                // Nothing left involving the pivot variable.
                for (e2, c2) in work.terms {
                    r.insert_term(e2, c2);
                }
                break;
            }
            let mut e_q = e.clone();
            e_q[pivot] -= 1;
            let factor = c / c_piv.clone();
            // work -= factor * x^{e_q} * form
            for (j, fj) in form.iter().enumerate() {
                if fj.is_zero() {
                    continue;
                }
                let mut e_t = e_q.clone();
                e_t[j] += 1;
                work.insert_term(e_t, -(factor.clone() * fj.clone()));
            }
            q.insert_term(e_q, factor);
        }
        (q, r)
    }

    /// Largest coefficient magnitude (as f64), 0 for the zero polynomial.
    pub fn max_coeff_abs(&self) -> f64 {
        self.terms
            .values()
            .map(|c| c.abs_f64())
            .fold(0.0, f64::max)
    }

    pub fn to_float(&self) -> MPoly<f64> {
        let mut out = MPoly::zero(self.dim);
        for (e, c) in &self.terms {
            let v = c.to_f64();
            if v != 0.0 {
                out.terms.insert(e.clone(), v);
            }
        }
        out
    }
}

impl MPoly<f64> {
    /// Drops terms whose magnitude is below `tol` times the largest
    /// coefficient. Used after float operator applications to strip rounding
    /// residue before structural checks.
    pub fn chop(&self, tol: f64) -> Self {
        let cut = self.max_coeff_abs() * tol;
        let mut out = Self::zero(self.dim);
        for (e, c) in &self.terms {
            if c.abs() > cut {
                out.terms.insert(e.clone(), *c);
            }
        }
        out
    }
}

/// Orthonormal completion of `u` (unit) to a basis, rows of the returned
/// matrix; row 0 is `u`.
fn orthonormal_frame(u: &[f64]) -> Vec<Vec<f64>> {
    let d = u.len();
    let mut rows: Vec<Vec<f64>> = vec![u.to_vec()];
    for i in 0..d {
        if rows.len() == d {
            break;
        }
        let mut v = vec![0.0; d];
        v[i] = 1.0;
        for r in &rows {
            let dot: f64 = r.iter().zip(&v).map(|(a, b)| a * b).sum();
            for (vk, rk) in v.iter_mut().zip(r) {
                *vk -= dot * rk;
            }
        }
        let n: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-8 {
            for vk in v.iter_mut() {
                *vk /= n;
            }
            rows.push(v);
        }
    }
    assert_eq!(rows.len(), d, "failed to complete orthonormal frame");
    rows
}

/// Division of a float polynomial by an arbitrary (possibly irrational)
/// homogeneous linear form. The coordinates are rotated so the form aligns
/// with the first axis, divided there, and rotated back.
pub fn divide_by_linear_rotated(p: &MPoly<f64>, form: &[f64]) -> (MPoly<f64>, MPoly<f64>) {
    let d = p.dim();
    assert_eq!(form.len(), d);
    let norm: f64 = form.iter().map(|c| c * c).sum::<f64>().sqrt();
    assert!(norm > 0.0, "zero linear form");
    let u: Vec<f64> = form.iter().map(|c| c / norm).collect();
    let q_rows = orthonormal_frame(&u);
    // y = Qx, p(x) = p(Q^T y) =: ptilde(y); build Q^T as substitution matrix.
    let qt: Vec<Vec<f64>> = (0..d)
        .map(|i| (0..d).map(|j| q_rows[j][i]).collect())
        .collect();
    let ptilde = p.compose_linear(&qt);
    let mut e1 = vec![0.0; d];
    e1[0] = 1.0;
    let (qt_q, qt_r) = ptilde.divide_by_linear(&e1, 0);
    // Transform back with y = Qx and divide the quotient by |form|.
    let q_mat: Vec<Vec<f64>> = q_rows;
    let quot = qt_q.compose_linear(&q_mat).scale(&(1.0 / norm));
    let rem = qt_r.compose_linear(&q_mat);
    (quot, rem)
}

/// Coefficient mode of a [`Poly`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Exact,
    Float,
}

/// Arithmetic operations accepted by [`Poly::arith`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
}

/// Polynomial with a per-instance coefficient mode. Mixing modes in
/// arithmetic is an error; `to_float` promotes explicitly.
#[derive(Clone, Debug, PartialEq)]
pub enum Poly {
    Exact(MPoly<Rat>),
    Float(MPoly<f64>),
}

impl Poly {
    pub fn mode(&self) -> Mode {
        match self {
            Poly::Exact(_) => Mode::Exact,
            Poly::Float(_) => Mode::Float,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Poly::Exact(p) => p.dim(),
            Poly::Float(p) => p.dim(),
        }
    }

    pub fn degree(&self) -> Option<usize> {
        match self {
            Poly::Exact(p) => p.degree(),
            Poly::Float(p) => p.degree(),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Poly::Exact(p) => p.is_zero(),
            Poly::Float(p) => p.is_zero(),
        }
    }

    pub fn zero_exact(dim: usize) -> Self {
        Poly::Exact(MPoly::zero(dim))
    }

    pub fn var(dim: usize, i: usize) -> Self {
        Poly::Exact(MPoly::var(dim, i))
    }

    pub fn to_float(&self) -> Poly {
        match self {
            Poly::Exact(p) => Poly::Float(p.to_float()),
            Poly::Float(p) => Poly::Float(p.clone()),
        }
    }

    /// Float view regardless of mode.
    pub fn as_float(&self) -> MPoly<f64> {
        match self {
            Poly::Exact(p) => p.to_float(),
            Poly::Float(p) => p.clone(),
        }
    }

    pub fn as_exact(&self) -> Option<&MPoly<Rat>> {
        match self {
            Poly::Exact(p) => Some(p),
            Poly::Float(_) => None,
        }
    }

    pub fn arith(&self, other: &Poly, op: ArithOp) -> Result<Poly> {
        if self.dim() != other.dim() {
            return Err(CoreError::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        match (self, other) {
            (Poly::Exact(a), Poly::Exact(b)) => Ok(Poly::Exact(match op {
                ArithOp::Add => a.add(b),
                ArithOp::Sub => a.sub(b),
                ArithOp::Mul => a.mul(b),
            })),
            (Poly::Float(a), Poly::Float(b)) => Ok(Poly::Float(match op {
                ArithOp::Add => a.add(b),
                ArithOp::Sub => a.sub(b),
                ArithOp::Mul => a.mul(b),
            })),
            _ => Err(CoreError::MixedCoefficientModes),
        }
    }

    pub fn scale_f64(&self, c: f64) -> Poly {
        match self {
            Poly::Exact(p) => {
                if let Some(r) = Rat::from_f64(c) {
                    // Keep exactness only for scalars that are exactly
                    // representable; otherwise promote.
                    if Scalar::to_f64(&r) == c {
                        return Poly::Exact(p.scale(&r));
                    }
                }
                Poly::Float(p.to_float().scale(&c))
            }
            Poly::Float(p) => Poly::Float(p.scale(&c)),
        }
    }

    pub fn eval_f64(&self, point: &[f64]) -> f64 {
        match self {
            Poly::Exact(p) => p.eval_f64(point),
            Poly::Float(p) => p.eval_f64(point),
        }
    }

    pub fn partial(&self, i: usize) -> Result<Poly> {
        Ok(match self {
            Poly::Exact(p) => Poly::Exact(p.partial(i)?),
            Poly::Float(p) => Poly::Float(p.partial(i)?),
        })
    }

    pub fn homogeneous_components(&self) -> Vec<(usize, Poly)> {
        match self {
            Poly::Exact(p) => p
                .homogeneous_components()
                .into_iter()
                .map(|(n, q)| (n, Poly::Exact(q)))
                .collect(),
            Poly::Float(p) => p
                .homogeneous_components()
                .into_iter()
                .map(|(n, q)| (n, Poly::Float(q)))
                .collect(),
        }
    }
}

/// Parses a rational scalar: integer, `a/b`, or finite decimal (kept exact).
pub fn parse_rational(s: &str) -> Result<Rat> {
    let s = s.trim();
    let bad = || CoreError::ParseError(format!("invalid coefficient `{s}`"));
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| bad())?;
        let d: BigInt = d.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        return Ok(Rat::new(n, d));
    }
    if let Some((int, frac)) = s.split_once('.') {
        let neg = int.trim_start().starts_with('-');
        let int_part: BigInt = if int.is_empty() || int == "-" {
            BigInt::from(0)
        } else {
            int.parse().map_err(|_| bad())?
        };
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let num: BigInt = frac.parse().map_err(|_| bad())?;
        let den = BigInt::from(10u32).pow(frac.len() as u32);
        let frac_part = Rat::new(num, den);
        let int_rat = Rat::from_integer(int_part);
        return Ok(if neg {
            int_rat - frac_part
        } else {
            int_rat + frac_part
        });
    }
    let n: BigInt = s.parse().map_err(|_| bad())?;
    Ok(Rat::from_integer(n))
}

/// Parses the line-per-term text format: `coeff [* x1^a1 x2^a2 ...]`.
/// Exponent defaults to 1 when `^k` is omitted; blank lines and `#` comments
/// are skipped. The result is always in exact mode.
pub fn parse_poly(text: &str, dim: usize) -> Result<Poly> {
    let mut out = MPoly::<Rat>::zero(dim);
    for raw in text.lines() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (coeff_str, factors) = match line.split_once('*') {
            Some((c, f)) => (c.trim(), f.trim()),
            None => (line, ""),
        };
        let coeff = parse_rational(coeff_str)?;
        let mut exps = vec![0u32; dim];
        for tok in factors.split_whitespace() {
            let rest = tok.strip_prefix('x').ok_or_else(|| {
                CoreError::ParseError(format!("expected variable factor, got `{tok}`"))
            })?;
            let (idx_str, pow_str) = match rest.split_once('^') {
                Some((i, p)) => (i, p),
                None => (rest, "1"),
            };
            let idx: usize = idx_str
                .parse()
                .map_err(|_| CoreError::ParseError(format!("bad variable index in `{tok}`")))?;
            if idx == 0 || idx > dim {
                return Err(CoreError::IndexOutOfRange {
                    index: idx,
                    dim,
                });
            }
            let pow: u32 = pow_str
                .parse()
                .map_err(|_| CoreError::ParseError(format!("bad exponent in `{tok}`")))?;
            exps[idx - 1] += pow;
        }
        out = out.add(&MPoly::monomial(dim, exps, coeff));
    }
    Ok(Poly::Exact(out))
}

fn format_term<C: Scalar + fmt::Display>(e: &[u32], c: &C) -> String {
    let mut s = format!("{c}");
    let factors: Vec<String> = e
        .iter()
        .enumerate()
        .filter(|(_, &k)| k > 0)
        .map(|(i, &k)| {
            if k == 1 {
                format!("x{}", i + 1)
            } else {
                format!("x{}^{}", i + 1, k)
            }
        })
        .collect();
    if !factors.is_empty() {
        s.push_str(" * ");
        s.push_str(&factors.join(" "));
    }
    s
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let lines: Vec<String> = match self {
            Poly::Exact(p) => p.terms().map(|(e, c)| format_term(e, c)).collect(),
            Poly::Float(p) => p.terms().map(|(e, c)| format_term(e, c)).collect(),
        };
        if lines.is_empty() {
            return write!(f, "0");
        }
        write!(f, "{}", lines.join("\n"))
    }
}
