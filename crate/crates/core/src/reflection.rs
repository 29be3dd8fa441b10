//! Root systems, reflection groups and the associated weight function.
//!
//! The catalog covers the sign-flip groups `Z2^d`, the symmetric-group root
//! system `A_{d-1}`, the hyperoctahedral `B_d` and the dihedral `I2(m)`,
//! plus the trivial group (no roots) and ad-hoc products used by the
//! ball/simplex lifts. Roots are normalized to squared length 2 and stored
//! as floats with an exact-rational shadow whenever the entries are rational
//! multiples of 1 or sqrt(2).

use std::fmt;
use std::sync::{Arc, OnceLock};

use num::{BigInt, FromPrimitive, Signed, ToPrimitive, Zero};

use crate::error::{CoreError, Result};
use crate::poly::Rat;

const ROOT_NORM_TOL: f64 = 1e-12;
const MATCH_TOL: f64 = 1e-10;
const GROUP_CAP: usize = 10_000;

/// Catalog family tag.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Family {
    /// No roots; the weight is identically 1.
    Trivial,
    /// Sign flips of the coordinates; roots `sqrt(2) e_i`.
    Z2,
    /// Symmetric group acting by coordinate permutations; roots `e_i - e_j`.
    A,
    /// Hyperoctahedral group; roots `sqrt(2) e_i` and `e_i +- e_j`.
    B,
    /// Dihedral group of order `2m` in the plane.
    Dihedral(usize),
    /// Direct product assembled from catalog pieces (used by the lifts).
    Product(String),
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Trivial => write!(f, "trivial"),
            Family::Z2 => write!(f, "z2"),
            Family::A => write!(f, "a"),
            Family::B => write!(f, "b"),
            Family::Dihedral(m) => write!(f, "i2({m})"),
            Family::Product(s) => write!(f, "{s}"),
        }
    }
}

/// Scale factor relating a root to its rational shadow: `v = scale * w`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RootScale {
    One,
    Sqrt2,
}

impl RootScale {
    pub fn value(self) -> f64 {
        match self {
            RootScale::One => 1.0,
            RootScale::Sqrt2 => std::f64::consts::SQRT_2,
        }
    }
    pub fn square_rat(self) -> Rat {
        match self {
            RootScale::One => Rat::from_integer(BigInt::from(1)),
            RootScale::Sqrt2 => Rat::from_integer(BigInt::from(2)),
        }
    }
}

/// A positive root with optional exact shadow.
#[derive(Clone, Debug)]
pub struct Root {
    pub coords: Vec<f64>,
    pub exact: Option<(RootScale, Vec<Rat>)>,
}

impl Root {
    /// The axis root `sqrt(2) e_i`.
    pub(crate) fn axis(dim: usize, i: usize) -> Self {
        let mut w = vec![Rat::zero(); dim];
        w[i] = Rat::from_integer(BigInt::from(1));
        Root::from_exact(RootScale::Sqrt2, w)
    }

    /// The same root embedded in a larger ambient dimension.
    pub(crate) fn padded(&self, new_dim: usize) -> Self {
        assert!(new_dim >= self.dim());
        let mut coords = self.coords.clone();
        coords.resize(new_dim, 0.0);
        let exact = self.exact.as_ref().map(|(s, w)| {
            let mut w = w.clone();
            w.resize(new_dim, Rat::zero());
            (*s, w)
        });
        Root { coords, exact }
    }

    fn from_exact(scale: RootScale, w: Vec<Rat>) -> Self {
        let s = scale.value();
        let coords = w.iter().map(|r| r.to_f64().unwrap() * s).collect();
        Root {
            coords,
            exact: Some((scale, w)),
        }
    }

    fn from_float(coords: Vec<f64>) -> Self {
        let mut root = Root {
            coords,
            exact: None,
        };
        root.exact = root.detect_exact();
        root
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn norm_sq(&self) -> f64 {
        self.coords.iter().map(|c| c * c).sum()
    }

    /// Attempts to recognize the coordinates as small rationals, either
    /// directly or after dividing by sqrt(2).
    fn detect_exact(&self) -> Option<(RootScale, Vec<Rat>)> {
        'scales: for scale in [RootScale::One, RootScale::Sqrt2] {
            let s = scale.value();
            let mut w = Vec::with_capacity(self.coords.len());
            for &c in &self.coords {
                match snap_rational(c / s) {
                    Some(r) => w.push(r),
                    None => continue 'scales,
                }
            }
            // The shadow must reproduce the float coordinates and give
            // squared length exactly 2.
            let ok_float = w
                .iter()
                .zip(&self.coords)
                .all(|(r, &c)| (r.to_f64().unwrap() * s - c).abs() <= ROOT_NORM_TOL);
            let len: Rat = w.iter().map(|r| r * r).fold(Rat::zero(), |a, b| a + b);
            let target = match scale {
                RootScale::One => Rat::from_integer(BigInt::from(2)),
                RootScale::Sqrt2 => Rat::from_integer(BigInt::from(1)),
            };
            if ok_float && len == target {
                return Some((scale, w));
            }
        }
        None
    }

    /// The reflection matrix `I - v v^T` (valid for `<v,v> = 2`).
    pub fn reflection(&self) -> GroupElement {
        let d = self.dim();
        let mut mat = vec![vec![0.0; d]; d];
        for i in 0..d {
            for j in 0..d {
                mat[i][j] = if i == j { 1.0 } else { 0.0 };
                mat[i][j] -= self.coords[i] * self.coords[j];
            }
        }
        let exact = self.exact.as_ref().map(|(scale, w)| {
            let s2 = scale.square_rat();
            (0..d)
                .map(|i| {
                    (0..d)
                        .map(|j| {
                            let id = if i == j { Rat::from_integer(BigInt::from(1)) } else { Rat::zero() };
                            id - &s2 * &w[i] * &w[j]
                        })
                        .collect()
                })
                .collect()
        });
        GroupElement { mat, exact }
    }
}

fn snap_rational(x: f64) -> Option<Rat> {
    // Small denominators cover every catalog entry; reject anything else.
    for den in 1..=64i64 {
        let num = (x * den as f64).round();
        if num.abs() > 1e6 {
            return None;
        }
        if (num / den as f64 - x).abs() <= ROOT_NORM_TOL {
            return Some(Rat::new(BigInt::from(num as i64), BigInt::from(den)));
        }
    }
    None
}

/// Orthogonal group element with optional exact entries.
#[derive(Clone, Debug)]
pub struct GroupElement {
    pub mat: Vec<Vec<f64>>,
    pub exact: Option<Vec<Vec<Rat>>>,
}

impl GroupElement {
    pub fn identity(d: usize) -> Self {
        let mat = (0..d)
            .map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        let exact = Some(
            (0..d)
                .map(|i| {
                    (0..d)
                        .map(|j| {
                            if i == j {
                                Rat::from_integer(BigInt::from(1))
                            } else {
                                Rat::zero()
                            }
                        })
                        .collect()
                })
                .collect(),
        );
        GroupElement { mat, exact }
    }

    pub fn dim(&self) -> usize {
        self.mat.len()
    }

    pub fn mul(&self, other: &Self) -> Self {
        let d = self.dim();
        let mut mat = vec![vec![0.0; d]; d];
        for i in 0..d {
            for j in 0..d {
                mat[i][j] = (0..d).map(|k| self.mat[i][k] * other.mat[k][j]).sum();
            }
        }
        let exact = match (&self.exact, &other.exact) {
            (Some(a), Some(b)) => Some(
                (0..d)
                    .map(|i| {
                        (0..d)
                            .map(|j| {
                                (0..d)
                                    .map(|k| &a[i][k] * &b[k][j])
                                    .fold(Rat::zero(), |s, t| s + t)
                            })
                            .collect()
                    })
                    .collect(),
            ),
            _ => None,
        };
        GroupElement { mat, exact }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim();
        (0..d)
            .map(|i| (0..d).map(|j| self.mat[i][j] * x[j]).sum())
            .collect()
    }

    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.mat
            .iter()
            .zip(&other.mat)
            .all(|(ra, rb)| ra.iter().zip(rb).all(|(a, b)| (a - b).abs() <= tol))
    }

    /// Max deviation of `g^T g` from the identity.
    pub fn orthogonality_defect(&self) -> f64 {
        let d = self.dim();
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in 0..d {
                let dot: f64 = (0..d).map(|k| self.mat[k][i] * self.mat[k][j]).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }
}

/// The reflection `sigma_v x = x - 2 <x,v> v / <v,v>` for any nonzero `v`.
pub fn reflect(v: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    let vv: f64 = v.iter().map(|c| c * c).sum();
    if vv == 0.0 {
        return Err(CoreError::ZeroRoot);
    }
    let xv: f64 = v.iter().zip(x).map(|(a, b)| a * b).sum();
    let factor = 2.0 * xv / vv;
    Ok(x.iter().zip(v).map(|(xi, vi)| xi - factor * vi).collect())
}

/// Root system of a finite reflection group with a fixed positive subsystem.
#[derive(Debug)]
pub struct RootSystem {
    dim: usize,
    family: Family,
    roots: Vec<Root>,
    /// Indices of positive roots grouped by G-orbit, in catalog order.
    orbits: Vec<Vec<usize>>,
    group: OnceLock<Arc<Vec<GroupElement>>>,
}

impl RootSystem {
    /// Builds a catalog root system. `m` is only used by the dihedral family.
    pub fn build(family: Family, d: usize, m: Option<usize>) -> Result<Arc<RootSystem>> {
        match family {
            Family::Trivial => Self::assemble(Family::Trivial, d, vec![]),
            Family::Z2 => {
                if d < 2 {
                    return Err(CoreError::UnsupportedFamily(format!(
                        "z2 requires d >= 2, got {d}"
                    )));
                }
                Self::assemble(Family::Z2, d, z2_roots(d))
            }
            Family::A => {
                if d < 2 {
                    return Err(CoreError::UnsupportedFamily(format!(
                        "a requires d >= 2, got {d}"
                    )));
                }
                Self::assemble(Family::A, d, type_a_roots(d))
            }
            Family::B => {
                if d < 2 {
                    return Err(CoreError::UnsupportedFamily(format!(
                        "b requires d >= 2, got {d}"
                    )));
                }
                Self::assemble(Family::B, d, type_b_roots(d))
            }
            Family::Dihedral(_) | Family::Product(_) => {
                let m = m.ok_or_else(|| {
                    CoreError::UnsupportedFamily("dihedral family requires m".into())
                })?;
                if d != 2 || m < 2 {
                    return Err(CoreError::UnsupportedFamily(format!(
                        "i2(m) requires d = 2 and m >= 2, got d = {d}, m = {m}"
                    )));
                }
                Self::assemble(Family::Dihedral(m), 2, dihedral_roots(m))
            }
        }
    }

    /// Internal constructor for lifted/product systems (also allows d = 1 for
    /// the ball and simplex transfers).
    pub(crate) fn from_roots(family: Family, d: usize, roots: Vec<Root>) -> Result<Arc<RootSystem>> {
        Self::assemble(family, d, roots)
    }

    fn assemble(family: Family, d: usize, roots: Vec<Root>) -> Result<Arc<RootSystem>> {
        if d == 0 {
            return Err(CoreError::UnsupportedFamily("dimension 0".into()));
        }
        for r in &roots {
            if r.dim() != d {
                return Err(CoreError::DimensionMismatch {
                    expected: d,
                    got: r.dim(),
                });
            }
            if (r.norm_sq() - 2.0).abs() > 1e-10 {
                return Err(CoreError::InvalidParameter(format!(
                    "root {:?} has squared length {}",
                    r.coords,
                    r.norm_sq()
                )));
            }
        }
        // Positivity: no root may be the negative of another.
        for (i, a) in roots.iter().enumerate() {
            for b in roots.iter().skip(i + 1) {
                let neg = a
                    .coords
                    .iter()
                    .zip(&b.coords)
                    .all(|(x, y)| (x + y).abs() <= MATCH_TOL);
                if neg {
                    return Err(CoreError::InvalidParameter(
                        "positive subsystem contains an opposite pair".into(),
                    ));
                }
            }
        }
        let mut rs = RootSystem {
            dim: d,
            family,
            roots,
            orbits: vec![],
            group: OnceLock::new(),
        };
        let group = rs.enumerate_group()?;
        rs.orbits = rs.compute_orbits(&group);
        rs.check_closure()?;
        let rs = Arc::new(rs);
        let _ = rs.group.set(Arc::new(group));
        Ok(rs)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn positive_roots(&self) -> &[Root] {
        &self.roots
    }

    pub fn num_roots(&self) -> usize {
        self.roots.len()
    }

    pub fn orbits(&self) -> &[Vec<usize>] {
        &self.orbits
    }

    /// All group elements (closure of the generating reflections).
    pub fn group_elements(&self) -> Arc<Vec<GroupElement>> {
        self.group
            .get()
            .expect("group enumerated at construction")
            .clone()
    }

    fn enumerate_group(&self) -> Result<Vec<GroupElement>> {
        let d = self.dim;
        let generators: Vec<GroupElement> = self.roots.iter().map(Root::reflection).collect();
        let mut elements = vec![GroupElement::identity(d)];
        let mut queue = std::collections::VecDeque::from([0usize]);
        while let Some(idx) = queue.pop_front() {
            let current = elements[idx].clone();
            for g in &generators {
                let next = current.mul(g);
                if !elements.iter().any(|e| e.approx_eq(&next, MATCH_TOL)) {
                    if elements.len() >= GROUP_CAP {
                        return Err(CoreError::ClosureCapExceeded { cap: GROUP_CAP });
                    }
                    elements.push(next);
                    queue.push_back(elements.len() - 1);
                }
            }
        }
        Ok(elements)
    }

    fn compute_orbits(&self, group: &[GroupElement]) -> Vec<Vec<usize>> {
        let n = self.roots.len();
        let mut orbit_of = vec![usize::MAX; n];
        let mut orbits: Vec<Vec<usize>> = vec![];
        for i in 0..n {
            if orbit_of[i] != usize::MAX {
                continue;
            }
            let id = orbits.len();
            let mut members = vec![i];
            orbit_of[i] = id;
            for g in group {
                let image = g.apply(&self.roots[i].coords);
                if let Some(j) = self.match_root(&image) {
                    if orbit_of[j] == usize::MAX {
                        orbit_of[j] = id;
                        members.push(j);
                    }
                }
            }
            members.sort_unstable();
            orbits.push(members);
        }
        orbits
    }

    /// Finds the positive root equal to `v` or `-v` within tolerance.
    pub fn match_root(&self, v: &[f64]) -> Option<usize> {
        self.roots.iter().position(|r| {
            let same = r
                .coords
                .iter()
                .zip(v)
                .all(|(a, b)| (a - b).abs() <= MATCH_TOL);
            let neg = r
                .coords
                .iter()
                .zip(v)
                .all(|(a, b)| (a + b).abs() <= MATCH_TOL);
            same || neg
        })
    }

    fn check_closure(&self) -> Result<()> {
        for u in &self.roots {
            for v in &self.roots {
                let image = reflect(&u.coords, &v.coords)?;
                if self.match_root(&image).is_none() {
                    return Err(CoreError::InvalidParameter(format!(
                        "root system not closed: sigma_{:?}({:?})",
                        u.coords, v.coords
                    )));
                }
            }
        }
        Ok(())
    }

    /// True when every root has an exact shadow (sign flips, permutations and
    /// hyperoctahedral data).
    pub fn fully_exact(&self) -> bool {
        self.roots.iter().all(|r| r.exact.is_some())
    }
}

fn unit_axis_root(d: usize, i: usize) -> Root {
    let mut w = vec![Rat::zero(); d];
    w[i] = Rat::from_integer(BigInt::from(1));
    Root::from_exact(RootScale::Sqrt2, w)
}

fn z2_roots(d: usize) -> Vec<Root> {
    (0..d).map(|i| unit_axis_root(d, i)).collect()
}

fn type_a_roots(d: usize) -> Vec<Root> {
    let mut roots = vec![];
    for i in 0..d {
        for j in (i + 1)..d {
            let mut w = vec![Rat::zero(); d];
            w[i] = Rat::from_integer(BigInt::from(1));
            w[j] = Rat::from_integer(BigInt::from(-1));
            roots.push(Root::from_exact(RootScale::One, w));
        }
    }
    roots
}

fn type_b_roots(d: usize) -> Vec<Root> {
    let mut roots = z2_roots(d);
    for i in 0..d {
        for j in (i + 1)..d {
            for sign in [1i64, -1] {
                let mut w = vec![Rat::zero(); d];
                w[i] = Rat::from_integer(BigInt::from(1));
                w[j] = Rat::from_integer(BigInt::from(sign));
                roots.push(Root::from_exact(RootScale::One, w));
            }
        }
    }
    roots
}

fn dihedral_roots(m: usize) -> Vec<Root> {
    let s = std::f64::consts::SQRT_2;
    (0..m)
        .map(|k| {
            let theta = k as f64 * std::f64::consts::PI / m as f64;
            let mut v = [-s * theta.sin(), s * theta.cos()];
            // Canonical positive representative: upper half plane, with the
            // x-axis root pointing in the positive direction.
            if v[1] < -ROOT_NORM_TOL || (v[1].abs() <= ROOT_NORM_TOL && v[0] < 0.0) {
                v = [-v[0], -v[1]];
            }
            Root::from_float(v.to_vec())
        })
        .collect()
}

/// Nonnegative multiplicity function, one value per positive root, constant
/// on group orbits by construction.
#[derive(Clone, Debug)]
pub struct Multiplicity {
    per_root: Vec<Rat>,
    per_root_f64: Vec<f64>,
}

impl Multiplicity {
    /// `per_orbit[k]` is the value on the k-th orbit of `rs`.
    pub fn from_orbit_values(rs: &RootSystem, per_orbit: &[Rat]) -> Result<Self> {
        if per_orbit.len() != rs.orbits().len() {
            return Err(CoreError::InvalidParameter(format!(
                "expected {} multiplicity values (one per orbit), got {}",
                rs.orbits().len(),
                per_orbit.len()
            )));
        }
        if per_orbit.iter().any(|k| k.is_negative()) {
            return Err(CoreError::InvalidParameter(
                "multiplicity values must be nonnegative".into(),
            ));
        }
        let mut per_root = vec![Rat::zero(); rs.num_roots()];
        for (orbit, val) in rs.orbits().iter().zip(per_orbit) {
            for &i in orbit {
                per_root[i] = val.clone();
            }
        }
        let per_root_f64 = per_root.iter().map(|r| r.to_f64().unwrap()).collect();
        Ok(Multiplicity {
            per_root,
            per_root_f64,
        })
    }

    pub fn zero(rs: &RootSystem) -> Self {
        Multiplicity {
            per_root: vec![Rat::zero(); rs.num_roots()],
            per_root_f64: vec![0.0; rs.num_roots()],
        }
    }

    pub fn constant(rs: &RootSystem, value: Rat) -> Result<Self> {
        let orbit_vals = vec![value; rs.orbits().len()];
        Self::from_orbit_values(rs, &orbit_vals)
    }

    /// Direct per-root assignment; validated against orbit constancy.
    pub(crate) fn from_root_values(rs: &RootSystem, per_root: Vec<Rat>) -> Result<Self> {
        if per_root.len() != rs.num_roots() {
            return Err(CoreError::InvalidParameter(format!(
                "expected {} multiplicity values, got {}",
                rs.num_roots(),
                per_root.len()
            )));
        }
        if per_root.iter().any(|k| k.is_negative()) {
            return Err(CoreError::InvalidParameter(
                "multiplicity values must be nonnegative".into(),
            ));
        }
        let per_root_f64 = per_root.iter().map(|r| r.to_f64().unwrap()).collect();
        let m = Multiplicity {
            per_root,
            per_root_f64,
        };
        if !m.orbit_constancy(rs) {
            return Err(CoreError::InvalidParameter(
                "multiplicity is not constant on group orbits".into(),
            ));
        }
        Ok(m)
    }

    pub fn value(&self, root_index: usize) -> f64 {
        self.per_root_f64[root_index]
    }

    pub fn value_rat(&self, root_index: usize) -> &Rat {
        &self.per_root[root_index]
    }

    pub fn len(&self) -> usize {
        self.per_root.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_root.is_empty()
    }

    /// `|kappa| = sum over positive roots`.
    pub fn total(&self) -> f64 {
        self.per_root_f64.iter().sum()
    }

    pub fn total_rat(&self) -> Rat {
        self.per_root.iter().fold(Rat::zero(), |a, b| a + b)
    }

    /// Checks orbit constancy against an explicit group enumeration.
    pub fn orbit_constancy(&self, rs: &RootSystem) -> bool {
        let group = rs.group_elements();
        for (i, root) in rs.positive_roots().iter().enumerate() {
            for g in group.iter() {
                let image = g.apply(&root.coords);
                if let Some(j) = rs.match_root(&image) {
                    if self.per_root[i] != self.per_root[j] {
                        return false;
                    }
                }
            }
        }
        true
    }
}

/// Evaluates the weight `h(x) = prod |<x,v>|^{kappa_v}` over positive roots.
pub fn weight_eval(rs: &RootSystem, kappa: &Multiplicity, x: &[f64]) -> f64 {
    let mut prod = 1.0;
    for (i, root) in rs.positive_roots().iter().enumerate() {
        let k = kappa.value(i);
        if k == 0.0 {
            continue;
        }
        let dot: f64 = root.coords.iter().zip(x).map(|(a, b)| a * b).sum();
        prod *= dot.abs().powf(k);
    }
    prod
}

/// Convenience: `h(x)^2`.
pub fn weight_sq_eval(rs: &RootSystem, kappa: &Multiplicity, x: &[f64]) -> f64 {
    let mut prod = 1.0;
    for (i, root) in rs.positive_roots().iter().enumerate() {
        let k = kappa.value(i);
        if k == 0.0 {
            continue;
        }
        let dot: f64 = root.coords.iter().zip(x).map(|(a, b)| a * b).sum();
        prod *= dot.abs().powf(2.0 * k);
    }
    prod
}

pub fn rat_from_f64(x: f64) -> Result<Rat> {
    Rat::from_f64(x).ok_or_else(|| CoreError::InvalidParameter(format!("non-finite value {x}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha20Rng;

    fn rat(n: i64, d: i64) -> Rat {
        Rat::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn z2_catalog() {
        let rs = RootSystem::build(Family::Z2, 2, None).unwrap();
        assert_eq!(rs.num_roots(), 2);
        for r in rs.positive_roots() {
            assert!((r.norm_sq() - 2.0).abs() < 1e-14);
            assert!(r.exact.is_some());
        }
        // sqrt(2) e_1 direction
        assert!((rs.positive_roots()[0].coords[0] - std::f64::consts::SQRT_2).abs() < 1e-15);
        assert_eq!(rs.group_elements().len(), 4);
        assert_eq!(rs.orbits().len(), 2);
    }

    #[test]
    fn a2_catalog() {
        let rs = RootSystem::build(Family::A, 3, None).unwrap();
        assert_eq!(rs.num_roots(), 3);
        assert_eq!(rs.group_elements().len(), 6);
        assert_eq!(rs.orbits().len(), 1);
        // permutation matrices are exact
        for g in rs.group_elements().iter() {
            assert!(g.exact.is_some());
            assert!(g.orthogonality_defect() < 1e-12);
        }
    }

    #[test]
    fn b2_catalog_brute_force_closure() {
        let rs = RootSystem::build(Family::B, 2, None).unwrap();
        assert_eq!(rs.num_roots(), 4);
        assert_eq!(rs.group_elements().len(), 8);
        assert_eq!(rs.orbits().len(), 2);
    }

    #[test]
    fn b3_group_order() {
        let rs = RootSystem::build(Family::B, 3, None).unwrap();
        assert_eq!(rs.num_roots(), 9);
        assert_eq!(rs.group_elements().len(), 48);
    }

    #[test]
    fn dihedral_orders_and_orbits() {
        for m in 2..=7 {
            let rs = RootSystem::build(Family::Dihedral(m), 2, Some(m)).unwrap();
            assert_eq!(rs.num_roots(), m, "m = {m}");
            assert_eq!(rs.group_elements().len(), 2 * m, "m = {m}");
            let expected_orbits = if m % 2 == 0 { 2 } else { 1 };
            assert_eq!(rs.orbits().len(), expected_orbits, "m = {m}");
        }
        // I2(4) matches B_2 in size and exactness.
        let rs = RootSystem::build(Family::Dihedral(4), 2, Some(4)).unwrap();
        assert!(rs.fully_exact());
    }

    #[test]
    fn unsupported_combinations_error() {
        assert!(RootSystem::build(Family::Z2, 1, None).is_err());
        assert!(RootSystem::build(Family::Dihedral(3), 3, Some(3)).is_err());
        assert!(RootSystem::build(Family::Dihedral(1), 2, Some(1)).is_err());
    }

    #[test]
    fn reflect_examples() {
        let s = std::f64::consts::SQRT_2;
        let y = reflect(&[s, 0.0], &[1.0, 2.0]).unwrap();
        assert!((y[0] + 1.0).abs() < 1e-15 && (y[1] - 2.0).abs() < 1e-15);

        let y = reflect(&[1.0, -1.0, 0.0], &[3.0, 5.0, 7.0]).unwrap();
        assert!((y[0] - 5.0).abs() < 1e-15 && (y[1] - 3.0).abs() < 1e-15 && (y[2] - 7.0).abs() < 1e-15);

        // x perpendicular to v is fixed
        let y = reflect(&[1.0, 1.0], &[1.0, -1.0]).unwrap();
        assert!((y[0] - 1.0).abs() < 1e-15 && (y[1] + 1.0).abs() < 1e-15);

        assert!(reflect(&[0.0, 0.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn reflect_is_isometric_involution() {
        let mut rng = ChaCha20Rng::seed_from_u64(42);
        for _ in 0..50 {
            let v: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
            if v.iter().map(|c| c * c).sum::<f64>() < 1e-3 {
                continue;
            }
            let y = reflect(&v, &x).unwrap();
            let z = reflect(&v, &y).unwrap();
            let nx: f64 = x.iter().map(|c| c * c).sum();
            let ny: f64 = y.iter().map(|c| c * c).sum();
            assert!((nx - ny).abs() < 1e-12);
            for (a, b) in x.iter().zip(&z) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn weight_examples() {
        let rs = RootSystem::build(Family::Z2, 2, None).unwrap();
        let k0 = Multiplicity::zero(&rs);
        assert_eq!(weight_eval(&rs, &k0, &[0.3, -2.0]), 1.0);

        let k11 = Multiplicity::from_orbit_values(&rs, &[rat(1, 1), rat(1, 1)]).unwrap();
        assert!((weight_eval(&rs, &k11, &[1.0, 1.0]) - 2.0).abs() < 1e-14);

        let k12 = Multiplicity::from_orbit_values(&rs, &[rat(1, 1), rat(2, 1)]).unwrap();
        let expect = 2f64.powf(1.5) * 0.6 * 0.8 * 0.8;
        assert!((weight_eval(&rs, &k12, &[0.6, 0.8]) - expect).abs() < 1e-13);
    }

    #[test]
    fn weight_group_invariance_sampled() {
        let configs: Vec<(Arc<RootSystem>, Multiplicity)> = vec![
            {
                let rs = RootSystem::build(Family::Z2, 3, None).unwrap();
                let k = Multiplicity::from_orbit_values(&rs, &[rat(1, 1), rat(0, 1), rat(2, 1)])
                    .unwrap();
                (rs, k)
            },
            {
                let rs = RootSystem::build(Family::A, 3, None).unwrap();
                let k = Multiplicity::constant(&rs, rat(1, 2)).unwrap();
                (rs, k)
            },
            {
                let rs = RootSystem::build(Family::B, 2, None).unwrap();
                let k = Multiplicity::from_orbit_values(&rs, &[rat(3, 2), rat(1, 1)]).unwrap();
                (rs, k)
            },
            {
                let rs = RootSystem::build(Family::Dihedral(5), 2, Some(5)).unwrap();
                let k = Multiplicity::constant(&rs, rat(2, 3)).unwrap();
                (rs, k)
            },
        ];
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        for (rs, kappa) in configs {
            let group = rs.group_elements();
            for _ in 0..100 {
                let x: Vec<f64> = (0..rs.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let base = weight_sq_eval(&rs, &kappa, &x);
                for g in group.iter() {
                    let gx = g.apply(&x);
                    assert!(
                        (weight_sq_eval(&rs, &kappa, &gx) - base).abs() <= 1e-12 * (1.0 + base),
                        "family {:?}",
                        rs.family()
                    );
                }
            }
        }
    }

    #[test]
    fn weight_homogeneity_log_slope() {
        let rs = RootSystem::build(Family::B, 2, None).unwrap();
        let kappa = Multiplicity::from_orbit_values(&rs, &[rat(1, 2), rat(3, 4)]).unwrap();
        let total = kappa.total();
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        for _ in 0..20 {
            let x: Vec<f64> = (0..2).map(|_| rng.gen_range(0.2..1.0)).collect();
            for t in [2.0, 3.0] {
                let tx: Vec<f64> = x.iter().map(|c| c * t).collect();
                let slope = (weight_eval(&rs, &kappa, &tx) / weight_eval(&rs, &kappa, &x)).ln()
                    / t.ln();
                assert!((slope - total).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn multiplicity_orbit_constancy() {
        let rs = RootSystem::build(Family::B, 3, None).unwrap();
        let k = Multiplicity::from_orbit_values(&rs, &[rat(1, 1), rat(2, 1)]).unwrap();
        assert!(k.orbit_constancy(&rs));
        assert!(Multiplicity::from_orbit_values(&rs, &[rat(-1, 1), rat(0, 1)]).is_err());
        assert!(Multiplicity::from_orbit_values(&rs, &[rat(1, 1)]).is_err());
    }

    #[test]
    fn group_elements_are_orthogonal_and_closed() {
        let rs = RootSystem::build(Family::Dihedral(6), 2, Some(6)).unwrap();
        let group = rs.group_elements();
        for g in group.iter() {
            assert!(g.orthogonality_defect() < 1e-12);
        }
        // closure under products
        for a in group.iter() {
            for b in group.iter() {
                let ab = a.mul(b);
                assert!(group.iter().any(|e| e.approx_eq(&ab, 1e-8)));
            }
        }
    }

    #[test]
    fn trivial_family() {
        let rs = RootSystem::build(Family::Trivial, 3, None).unwrap();
        assert_eq!(rs.num_roots(), 0);
        assert_eq!(rs.group_elements().len(), 1);
        let k = Multiplicity::zero(&rs);
        assert_eq!(weight_eval(&rs, &k, &[0.1, 0.2, 0.3]), 1.0);
    }
}
