//! Deterministic generation of test-function families: seeded random
//! polynomials with rational coefficients plus a fixed canonical set
//! (coordinate functions, invariant samples, zonal-type samples).

use num::BigInt;
use rand::prelude::*;
use rand_chacha::ChaCha20Rng;

use crate::operators::OperatorContext;
use crate::poly::{MPoly, Poly, Rat};

fn rat(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

/// Symmetrizes a polynomial over the group (exact for catalog groups).
pub fn symmetrize(ctx: &OperatorContext, f: &Poly) -> Poly {
    let group = ctx.root_system().group_elements();
    let mut acc = f.scale_f64(0.0);
    for g in group.iter() {
        let fg = ctx.compose_group(f, g);
        acc = match acc.arith(&fg, crate::poly::ArithOp::Add) {
            Ok(p) => p,
            Err(_) => acc
                .to_float()
                .arith(&fg.to_float(), crate::poly::ArithOp::Add)
                .expect("same dimension"),
        };
    }
    match &acc {
        Poly::Exact(p) => {
            Poly::Exact(p.scale(&Rat::new(BigInt::from(1), BigInt::from(group.len() as i64))))
        }
        Poly::Float(p) => Poly::Float(p.scale(&(1.0 / group.len() as f64))),
    }
}

/// The fixed canonical samples for a degree budget: all coordinates, one
/// zonal (single-direction) sample, one group-invariant and one
/// non-invariant sample per degree.
pub fn canonical_set(ctx: &OperatorContext, degree: usize) -> Vec<Poly> {
    let d = ctx.dim();
    let mut out: Vec<Poly> = (0..d).map(|i| Poly::var(d, i)).collect();
    for n in 2..=degree.max(1) {
        // zonal: depends on x_1 only
        out.push(Poly::Exact(MPoly::monomial(
            d,
            {
                let mut e = vec![0u32; d];
                e[0] = n as u32;
                e
            },
            rat(1, 1),
        )));
        // invariant under any orthogonal action: a power of |x|^2, made
        // non-constant on the sphere by mixing degrees
        let r2 = MPoly::<Rat>::zero(d).add(&{
            let mut acc = MPoly::zero(d);
            for i in 0..d {
                let mut e = vec![0u32; d];
                e[i] = 2;
                acc = acc.add(&MPoly::monomial(d, e, rat(1, 1)));
            }
            acc
        });
        let inv = symmetrize(
            ctx,
            &Poly::Exact(
                MPoly::monomial(
                    d,
                    {
                        let mut e = vec![0u32; d];
                        e[0] = 2 * (n as u32 / 2);
                        e
                    },
                    rat(1, 1),
                )
                .add(&r2),
            ),
        );
        if !inv.is_zero() {
            out.push(inv);
        }
        // plainly non-invariant mixture
        let mut e1 = vec![0u32; d];
        e1[0] = n as u32;
        let mut e2 = vec![0u32; d];
        e2[0] = n as u32 - 1;
        e2[1 % d] += 1;
        out.push(Poly::Exact(
            MPoly::monomial(d, e1, rat(1, 1)).add(&MPoly::monomial(d, e2, rat(1, 2))),
        ));
    }
    out
}

/// Seeded random polynomials with rational coefficients in [-1, 1]
/// (64ths), over all monomials of total degree <= `degree`.
pub fn random_family(d: usize, degree: usize, count: usize, seed: u64) -> Vec<Poly> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let monomials = all_monomials(d, degree);
    (0..count)
        .map(|_| {
            let mut p = MPoly::<Rat>::zero(d);
            for e in &monomials {
                if rng.gen_bool(0.4) {
                    let num = rng.gen_range(-64i64..=64);
                    if num != 0 {
                        p = p.add(&MPoly::monomial(d, e.clone(), rat(num, 64)));
                    }
                }
            }
            if p.is_zero() {
                p = MPoly::var(d, 0);
            }
            Poly::Exact(p)
        })
        .collect()
}

/// Canonical set plus seeded random polynomials.
pub fn test_family(ctx: &OperatorContext, degree: usize, random_count: usize, seed: u64) -> Vec<Poly> {
    let mut out = canonical_set(ctx, degree);
    out.extend(random_family(ctx.dim(), degree, random_count, seed));
    out
}

fn all_monomials(d: usize, degree: usize) -> Vec<Vec<u32>> {
    let mut out = vec![];
    let mut stack = vec![(vec![], degree as u32)];
    while let Some((prefix, left)) = stack.pop() {
        if prefix.len() == d {
            out.push(prefix);
            continue;
        }
        for k in 0..=left {
            let mut next = prefix.clone();
            next.push(k);
            stack.push((next, left - k));
        }
    }
    out.sort();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::rat_of;
    use crate::reflection::{Family, Multiplicity, RootSystem};
    use std::sync::Arc;

    fn ctx() -> Arc<OperatorContext> {
        let rs = RootSystem::build(Family::Z2, 2, None).unwrap();
        let k = Multiplicity::from_orbit_values(&rs, &[rat_of(1, 1), rat_of(2, 1)]).unwrap();
        Arc::new(OperatorContext::new(rs, k).unwrap())
    }

    #[test]
    fn canonical_set_contains_coordinates_and_mixtures() {
        let c = ctx();
        let fam = canonical_set(&c, 3);
        // budget >= 1 includes every coordinate
        for i in 0..2 {
            assert!(fam.iter().any(|p| p == &Poly::var(2, i)));
        }
        // at least one invariant and one non-invariant sample per degree
        let group = c.root_system().group_elements();
        let mut saw_invariant = false;
        let mut saw_moving = false;
        for f in &fam {
            let invariant = group.iter().all(|g| c.compose_group(f, g) == *f);
            if invariant {
                saw_invariant = true;
            } else {
                saw_moving = true;
            }
        }
        assert!(saw_invariant && saw_moving);
    }

    #[test]
    fn random_family_is_reproducible_and_rational() {
        let a = random_family(3, 4, 5, 99);
        let b = random_family(3, 4, 5, 99);
        assert_eq!(a, b);
        let c = random_family(3, 4, 5, 100);
        assert_ne!(a, c);
        for p in &a {
            assert!(matches!(p, Poly::Exact(_)));
            assert!(p.degree().unwrap_or(0) <= 4);
            // coefficients lie in [-1, 1]
            if let Poly::Exact(q) = p {
                assert!(q.max_coeff_abs() <= 1.0);
            }
        }
    }

    #[test]
    fn symmetrized_functions_are_invariant() {
        let c = ctx();
        let f = Poly::Exact(MPoly::monomial(2, vec![2, 1], rat(1, 3)));
        let sym = symmetrize(&c, &f);
        for g in c.root_system().group_elements().iter() {
            assert_eq!(c.compose_group(&sym, g), sym);
        }
    }
}
