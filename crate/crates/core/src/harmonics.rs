//! Spaces of spherical h-harmonics: orthonormal bases per degree, orthogonal
//! projections, the reproducing kernel, and spectral fractional powers of the
//! weighted sphere Laplacian.
//!
//! A degree-n basis is built by projecting the degree-n monomials against the
//! span of the degree-(n-2) monomials on the sphere (a Gram solve), lifting
//! the projections back to homogeneous degree n with a `|x|^2` factor, and
//! orthonormalizing the candidates through a symmetric eigendecomposition of
//! their Gram matrix. The candidate rank equals the h-harmonic dimension
//! formula, which is checked.

use std::collections::BTreeMap;
use std::sync::{Arc, RwLock};

use nalgebra::{DMatrix, DVector};

use crate::error::{CoreError, Result};
use crate::poly::MPoly;
use crate::quadrature::SphereQuad;

/// Relative eigenvalue cutoff below which the candidate Gram matrix is
/// considered ill-conditioned.
const GRAM_RANK_TOL: f64 = 1e-12;

/// Orthonormal basis of the degree-n h-harmonics.
#[derive(Clone, Debug)]
pub struct HarmonicBasis {
    pub degree: usize,
    /// Homogeneous degree-n polynomials, orthonormal for the weighted
    /// spherical inner product.
    pub elements: Vec<MPoly<f64>>,
    /// Ratio of extreme kept eigenvalues of the candidate Gram matrix.
    pub gram_cond: f64,
}

impl HarmonicBasis {
    pub fn dim(&self) -> usize {
        self.elements.len()
    }
}

/// A function on the sphere stored through its harmonic components:
/// `comps[n][i]` is the coefficient against the i-th basis element of
/// degree n.
#[derive(Clone, Debug, PartialEq)]
pub struct SphereFunction {
    pub comps: Vec<Vec<f64>>,
}

impl SphereFunction {
    pub fn max_degree(&self) -> usize {
        self.comps.len().saturating_sub(1)
    }

    /// Squared weighted L2 norm via Parseval.
    pub fn norm_sq(&self) -> f64 {
        self.comps
            .iter()
            .map(|c| c.iter().map(|x| x * x).sum::<f64>())
            .sum()
    }

    pub fn component_norm_sq(&self, n: usize) -> f64 {
        self.comps
            .get(n)
            .map(|c| c.iter().map(|x| x * x).sum())
            .unwrap_or(0.0)
    }

    pub fn sub(&self, other: &SphereFunction) -> SphereFunction {
        let len = self.comps.len().max(other.comps.len());
        let mut comps = Vec::with_capacity(len);
        for n in 0..len {
            let a = self.comps.get(n).cloned().unwrap_or_default();
            let b = other.comps.get(n).cloned().unwrap_or_default();
            let m = a.len().max(b.len());
            let mut c = vec![0.0; m];
            for (i, ci) in c.iter_mut().enumerate() {
                *ci = a.get(i).copied().unwrap_or(0.0) - b.get(i).copied().unwrap_or(0.0);
            }
            comps.push(c);
        }
        SphereFunction { comps }
    }

    pub fn scale(&self, t: f64) -> SphereFunction {
        SphereFunction {
            comps: self
                .comps
                .iter()
                .map(|c| c.iter().map(|x| x * t).collect())
                .collect(),
        }
    }
}

/// Lazily built cache of harmonic bases for one weighted-sphere context.
pub struct HarmonicStore {
    quad: Arc<SphereQuad>,
    max_degree: usize,
    cache: RwLock<BTreeMap<usize, Arc<HarmonicBasis>>>,
}

/// Classical dimension of the degree-n h-harmonic space in dimension d.
pub fn harmonic_dim(d: usize, n: usize) -> usize {
    fn homog(d: usize, n: usize) -> usize {
        // C(n + d - 1, d - 1)
        let mut num = 1usize;
        let mut den = 1usize;
        for k in 1..d {
            num *= n + k;
            den *= k;
        }
        num / den
    }
    match n {
        0 => 1,
        1 => d,
        _ => homog(d, n) - homog(d, n - 2),
    }
}

/// All exponent vectors of total degree n in d variables, in map order.
fn monomials_of_degree(d: usize, n: usize) -> Vec<Vec<u32>> {
    fn rec(d: usize, n: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if d == 1 {
            let mut e = prefix.clone();
            e.push(n);
            out.push(e);
            return;
        }
        for k in 0..=n {
            prefix.push(k);
            rec(d - 1, n - k, prefix, out);
            prefix.pop();
        }
    }
    let mut out = vec![];
    rec(d, n as u32, &mut vec![], &mut out);
    out.sort();
    out
}

impl HarmonicStore {
    pub fn new(quad: Arc<SphereQuad>, max_degree: usize) -> Arc<Self> {
        Arc::new(HarmonicStore {
            quad,
            max_degree,
            cache: RwLock::new(BTreeMap::new()),
        })
    }

    pub fn quad(&self) -> &Arc<SphereQuad> {
        &self.quad
    }

    pub fn dim(&self) -> usize {
        self.quad.dim()
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn eigenvalue(&self, n: usize) -> f64 {
        self.quad.ctx().eigenvalue(n)
    }

    pub fn basis(&self, n: usize) -> Result<Arc<HarmonicBasis>> {
        if n > self.max_degree {
            return Err(CoreError::DegreeCapExceeded {
                degree: n,
                cap: self.max_degree,
            });
        }
        if let Some(b) = self.cache.read().unwrap().get(&n) {
            return Ok(b.clone());
        }
        let built = Arc::new(self.build_basis(n)?);
        self.cache.write().unwrap().insert(n, built.clone());
        Ok(built)
    }

    fn build_basis(&self, n: usize) -> Result<HarmonicBasis> {
        let d = self.dim();
        if n == 0 {
            let omega = self.quad.omega()?;
            return Ok(HarmonicBasis {
                degree: 0,
                elements: vec![MPoly::constant(d, 1.0 / omega.sqrt())],
                gram_cond: 1.0,
            });
        }
        let top: Vec<MPoly<f64>> = monomials_of_degree(d, n)
            .into_iter()
            .map(|e| MPoly::monomial(d, e, 1.0))
            .collect();
        let candidates = if n < 2 {
            top
        } else {
            let lower: Vec<MPoly<f64>> = monomials_of_degree(d, n - 2)
                .into_iter()
                .map(|e| MPoly::monomial(d, e, 1.0))
                .collect();
            let l = lower.len();
            let mut gram = DMatrix::<f64>::zeros(l, l);
            for a in 0..l {
                for b in a..l {
                    let v = self.quad.inner(&lower[a], &lower[b])?;
                    gram[(a, b)] = v;
                    gram[(b, a)] = v;
                }
            }
            let chol = gram.clone().cholesky().ok_or(CoreError::GramIllConditioned {
                cond: f64::INFINITY,
            })?;
            let mut cands = Vec::with_capacity(top.len());
            for t in &top {
                let rhs = DVector::<f64>::from_iterator(
                    l,
                    lower
                        .iter()
                        .map(|b| self.quad.inner(t, b))
                        .collect::<Result<Vec<_>>>()?
                        .into_iter(),
                );
                let coef = chol.solve(&rhs);
                // Lift the sphere projection back to homogeneous degree n.
                let mut y = t.clone();
                for (b, lb) in lower.iter().enumerate() {
                    if coef[b] != 0.0 {
                        y = y.sub(&lb.scale(&coef[b]).mul_norm_sq_pow(1));
                    }
                }
                cands.push(y);
            }
            cands
        };

        let t = candidates.len();
        let mut gram = DMatrix::<f64>::zeros(t, t);
        for a in 0..t {
            for b in a..t {
                let v = self.quad.inner(&candidates[a], &candidates[b])?;
                gram[(a, b)] = v;
                gram[(b, a)] = v;
            }
        }
        let eig = gram.symmetric_eigen();
        let mut order: Vec<usize> = (0..t).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
        let want = harmonic_dim(d, n);
        if want > t {
            return Err(CoreError::GramIllConditioned { cond: f64::INFINITY });
        }
        let lead = eig.eigenvalues[order[0]];
        let last = eig.eigenvalues[order[want - 1]];
        if !(last > GRAM_RANK_TOL * lead && last > 0.0) {
            return Err(CoreError::GramIllConditioned { cond: lead / last });
        }
        let mut elements = Vec::with_capacity(want);
        for &k in order.iter().take(want) {
            let lam = eig.eigenvalues[k];
            let mut y = MPoly::zero(d);
            for a in 0..t {
                let c = eig.eigenvectors[(a, k)];
                if c != 0.0 {
                    y = y.add(&candidates[a].scale(&c));
                }
            }
            elements.push(y.scale(&(1.0 / lam.sqrt())).chop(1e-14));
        }
        Ok(HarmonicBasis {
            degree: n,
            elements,
            gram_cond: lead / last,
        })
    }

    /// Orthogonal projection coefficients of `f` onto degree n.
    pub fn project_coeffs(&self, f: &MPoly<f64>, n: usize) -> Result<Vec<f64>> {
        let basis = self.basis(n)?;
        basis
            .elements
            .iter()
            .map(|y| self.quad.inner(f, y))
            .collect()
    }

    /// Orthogonal projection of `f` onto degree n, as a polynomial.
    pub fn project(&self, f: &MPoly<f64>, n: usize) -> Result<MPoly<f64>> {
        let basis = self.basis(n)?;
        let coeffs = self.project_coeffs(f, n)?;
        let mut out = MPoly::zero(self.dim());
        for (c, y) in coeffs.iter().zip(&basis.elements) {
            if *c != 0.0 {
                out = out.add(&y.scale(c));
            }
        }
        Ok(out)
    }

    /// Full harmonic expansion of a polynomial (complete for polynomials of
    /// degree within the store cap).
    pub fn decompose(&self, f: &MPoly<f64>) -> Result<SphereFunction> {
        let deg = f.degree().unwrap_or(0);
        if deg > self.max_degree {
            return Err(CoreError::DegreeCapExceeded {
                degree: deg,
                cap: self.max_degree,
            });
        }
        let mut comps = Vec::with_capacity(deg + 1);
        for n in 0..=deg {
            comps.push(self.project_coeffs(f, n)?);
        }
        Ok(SphereFunction { comps })
    }

    /// Canonical polynomial representative of a sphere function: the sum of
    /// its harmonic components.
    pub fn reconstruct(&self, sf: &SphereFunction) -> Result<MPoly<f64>> {
        let mut out = MPoly::zero(self.dim());
        for (n, coeffs) in sf.comps.iter().enumerate() {
            let basis = self.basis(n)?;
            for (c, y) in coeffs.iter().zip(&basis.elements) {
                if *c != 0.0 {
                    out = out.add(&y.scale(c));
                }
            }
        }
        Ok(out)
    }

    /// Reproducing kernel of the degree-n space at a pair of points.
    pub fn reproducing_kernel(&self, n: usize, x: &[f64], y: &[f64]) -> Result<f64> {
        let basis = self.basis(n)?;
        Ok(basis
            .elements
            .iter()
            .map(|e| e.eval_f64(x) * e.eval_f64(y))
            .sum())
    }

    /// Spectral multiplier `(n (n + 2 lambda))^alpha` applied per component.
    /// The mean component is fixed by the identity at `alpha = 0` and
    /// annihilated for `alpha > 0`; negative powers require a mean-zero
    /// input.
    pub fn fractional_laplacian(
        &self,
        sf: &SphereFunction,
        alpha: f64,
    ) -> Result<SphereFunction> {
        if alpha < 0.0 {
            let mean = sf.component_norm_sq(0).sqrt();
            if mean > 1e-10 * (1.0 + sf.norm_sq().sqrt()) {
                return Err(CoreError::NegativePowerNonzeroMean { mean_norm: mean });
            }
        }
        let comps = sf
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
                    self.eigenvalue(n).powf(alpha)
                };
                coeffs.iter().map(|c| c * factor).collect()
            })
            .collect();
        Ok(SphereFunction { comps })
    }

    /// The sphere Laplacian acting spectrally: component n is multiplied by
    /// `-n (n + 2 lambda)`.
    pub fn laplace_beltrami(&self, sf: &SphereFunction) -> Result<SphereFunction> {
        Ok(SphereFunction {
            comps: sf
                .comps
                .iter()
                .enumerate()
                .map(|(n, coeffs)| {
                    let factor = -self.eigenvalue(n);
                    coeffs.iter().map(|c| c * factor).collect()
                })
                .collect(),
        })
    }

    /// Weighted Dirichlet energy `sum_n n (n + 2 lambda) |proj_n f|^2`.
    pub fn dirichlet_energy(&self, sf: &SphereFunction) -> f64 {
        sf.comps
            .iter()
            .enumerate()
            .map(|(n, c)| self.eigenvalue(n) * c.iter().map(|x| x * x).sum::<f64>())
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{rat_of, OperatorContext};
    use crate::poly::Poly;
    use crate::quadrature::QuadBackend;
    use crate::reflection::{Family, Multiplicity, RootSystem};
    use rand::prelude::*;
    use rand_chacha::ChaCha20Rng;

    fn store(
        family: Family,
        d: usize,
        m: Option<usize>,
        kappa: &[(i64, i64)],
        max_degree: usize,
    ) -> Arc<HarmonicStore> {
        let rs = RootSystem::build(family, d, m).unwrap();
        let vals: Vec<_> = kappa.iter().map(|&(n, den)| rat_of(n, den)).collect();
        let k = if vals.is_empty() {
            Multiplicity::zero(&rs)
        } else {
            Multiplicity::from_orbit_values(&rs, &vals).unwrap()
        };
        let ctx = Arc::new(OperatorContext::new(rs, k).unwrap());
        let quad = SphereQuad::auto(ctx).unwrap();
        HarmonicStore::new(quad, max_degree)
    }

    fn random_sphere_point(d: usize, rng: &mut ChaCha20Rng) -> Vec<f64> {
        loop {
            let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let n: f64 = x.iter().map(|c| c * c).sum::<f64>().sqrt();
            if n > 0.3 {
                return x.into_iter().map(|c| c / n).collect();
            }
        }
    }

    #[test]
    fn dimension_formula() {
        assert_eq!(harmonic_dim(3, 0), 1);
        assert_eq!(harmonic_dim(3, 1), 3);
        assert_eq!(harmonic_dim(3, 2), 5);
        assert_eq!(harmonic_dim(3, 5), 11);
        assert_eq!(harmonic_dim(2, 4), 2);
    }

    #[test]
    fn degree_zero_basis() {
        let st = store(Family::Trivial, 3, None, &[], 4);
        let b = st.basis(0).unwrap();
        assert_eq!(b.dim(), 1);
        let c = b.elements[0].coeff(&[0, 0, 0]);
        assert!((c - 1.0 / (4.0 * std::f64::consts::PI).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn classical_degree_one_basis() {
        let st = store(Family::Trivial, 3, None, &[], 4);
        let b = st.basis(1).unwrap();
        assert_eq!(b.dim(), 3);
        // Orthonormality and the expected normalization scale.
        for (i, yi) in b.elements.iter().enumerate() {
            for (j, yj) in b.elements.iter().enumerate() {
                let v = st.quad().inner(yi, yj).unwrap();
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((v - target).abs() < 1e-10);
            }
            // Each element is a unit combination of coordinates, so its
            // coefficient vector has length sqrt(3/(4 pi)).
            let scale: f64 = (0..3)
                .map(|k| {
                    let mut e = vec![0u32; 3];
                    e[k] = 1;
                    yi.coeff(&e).powi(2)
                })
                .sum::<f64>()
                .sqrt();
            assert!((scale - (3.0 / (4.0 * std::f64::consts::PI)).sqrt()).abs() < 1e-10);
        }
    }

    #[test]
    fn sign_group_degree_one_is_monomial() {
        let st = store(Family::Z2, 2, None, &[(1, 1), (2, 1)], 4);
        let b = st.basis(1).unwrap();
        assert_eq!(b.dim(), 2);
        for y in &b.elements {
            // Sign symmetry forces each element onto a single coordinate.
            let nonzero = y.terms().count();
            assert_eq!(nonzero, 1);
        }
    }

    #[test]
    fn bases_have_expected_dimension_and_annihilation() {
        let configs = vec![
            store(Family::Trivial, 3, None, &[], 5),
            store(Family::Z2, 2, None, &[(1, 1), (1, 1)], 5),
            store(Family::Z2, 3, None, &[(1, 1), (0, 1), (2, 1)], 5),
            store(Family::A, 3, None, &[(1, 1)], 5),
        ];
        for st in configs {
            let d = st.dim();
            let ctx = st.quad().ctx().clone();
            for n in 0..=5usize {
                let b = st.basis(n).unwrap();
                assert_eq!(b.dim(), harmonic_dim(d, n), "dim mismatch at n={n}");
                for y in &b.elements {
                    // Homogeneous of degree n.
                    for (e, _) in y.terms() {
                        assert_eq!(e.iter().map(|&k| k as usize).sum::<usize>(), n);
                    }
                    // Annihilated by the weighted Laplacian.
                    let lap = ctx.dunkl_laplacian(&Poly::Float(y.clone())).unwrap();
                    let resid = st.quad().norm_sq(&lap.as_float()).unwrap().sqrt();
                    assert!(resid < 1e-9, "degree {n}: residual {resid}");
                }
            }
        }
    }

    #[test]
    fn eigenvalue_law_spot_check() {
        // Weighted degree-1 harmonic on the 2-sphere with kappa = (1,1,1).
        let st = store(Family::Z2, 3, None, &[(1, 1), (1, 1), (1, 1)], 3);
        let ctx = st.quad().ctx().clone();
        let b = st.basis(1).unwrap();
        for y in &b.elements {
            let lap = ctx.sphere_laplacian_poly(&Poly::Float(y.clone())).unwrap();
            let shifted = lap.as_float().add(&y.scale(&st.eigenvalue(1)));
            let resid = st.quad().norm_sq(&shifted).unwrap().sqrt();
            assert!(resid < 1e-9, "residual {resid}");
        }
        assert!((st.eigenvalue(1) - 8.0).abs() < 1e-12);
    }

    #[test]
    fn projection_examples() {
        let st = store(Family::Trivial, 3, None, &[], 4);
        // x1^2 = 1/3 + (x1^2 - 1/3) on the sphere.
        let f = MPoly::monomial(3, vec![2, 0, 0], 1.0);
        let p0 = st.project(&f, 0).unwrap();
        assert!((p0.coeff(&[0, 0, 0]) - 1.0 / 3.0).abs() < 1e-10);
        let p2 = st.project(&f, 2).unwrap();
        // p2 agrees with x1^2 - 1/3 on the sphere (the representatives
        // differ by a multiple of |x|^2 - 1, so compare pointwise there).
        let expected = f.sub(&MPoly::constant(3, 1.0 / 3.0));
        let mut rng = ChaCha20Rng::seed_from_u64(99);
        for _ in 0..50 {
            let x = random_sphere_point(3, &mut rng);
            assert!((p2.eval_f64(&x) - expected.eval_f64(&x)).abs() < 1e-10);
        }
        // Odd degree component vanishes.
        assert!(st.quad().norm_sq(&st.project(&f, 1).unwrap()).unwrap() < 1e-18);

        // Idempotence: projecting a harmonic returns it.
        let y = st.basis(2).unwrap().elements[0].clone();
        let py = st.project(&y, 2).unwrap();
        assert!(st.quad().norm_sq(&py.sub(&y)).unwrap().sqrt() < 1e-9);
    }

    #[test]
    fn decomposition_reconstructs_on_sphere() {
        let st = store(Family::Z2, 2, None, &[(1, 1), (2, 1)], 6);
        let mut rng = ChaCha20Rng::seed_from_u64(21);
        let mut f = MPoly::zero(2);
        for _ in 0..10 {
            let e: Vec<u32> = (0..2).map(|_| rng.gen_range(0..=3u32)).collect();
            f = f.add(&MPoly::monomial(2, e, rng.gen_range(-1.0..1.0)));
        }
        let sf = st.decompose(&f).unwrap();
        let rec = st.reconstruct(&sf).unwrap();
        for _ in 0..100 {
            let x = random_sphere_point(2, &mut rng);
            assert!((rec.eval_f64(&x) - f.eval_f64(&x)).abs() < 1e-9);
        }
        // Parseval
        let direct = st.quad().norm_sq(&f).unwrap();
        assert!((direct - sf.norm_sq()).abs() < 1e-9 * (1.0 + direct));
    }

    #[test]
    fn projection_commutes_with_group() {
        let st = store(Family::Z2, 2, None, &[(1, 1), (2, 1)], 5);
        let ctx = st.quad().ctx().clone();
        let mut rng = ChaCha20Rng::seed_from_u64(22);
        let mut f = MPoly::zero(2);
        for _ in 0..8 {
            let e: Vec<u32> = (0..2).map(|_| rng.gen_range(0..=2u32)).collect();
            f = f.add(&MPoly::monomial(2, e, rng.gen_range(-1.0..1.0)));
        }
        for g in ctx.root_system().group_elements().iter() {
            let fg = f.compose_linear(&g.mat);
            for n in 0..=4usize {
                let a = st.project(&fg, n).unwrap();
                let b = st.project(&f, n).unwrap().compose_linear(&g.mat);
                let resid = st.quad().norm_sq(&a.sub(&b)).unwrap().sqrt();
                assert!(resid < 1e-9, "n={n}, resid={resid}");
            }
        }
    }

    #[test]
    fn reproducing_kernel_examples() {
        let st = store(Family::Trivial, 3, None, &[], 3);
        let mut rng = ChaCha20Rng::seed_from_u64(23);
        let x = random_sphere_point(3, &mut rng);
        let y = random_sphere_point(3, &mut rng);
        // n = 0 kernel is 1/omega.
        let k0 = st.reproducing_kernel(0, &x, &y).unwrap();
        assert!((k0 - 1.0 / (4.0 * std::f64::consts::PI)).abs() < 1e-12);
        // n = 1 kernel is 3/(4 pi) <x, y>.
        let k1 = st.reproducing_kernel(1, &x, &y).unwrap();
        let dot: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
        assert!((k1 - 3.0 / (4.0 * std::f64::consts::PI) * dot).abs() < 1e-10);

        // Reproduction: <K_n(x, .), Y> = Y(x).
        let b = st.basis(2).unwrap();
        let yfun = &b.elements[1];
        // Integrate K_2(x, .) yfun(.) h^2 via the closed form: expand the
        // kernel in the basis.
        let mut acc = 0.0;
        for e in &b.elements {
            let coef = st.quad().inner(e, yfun).unwrap();
            acc += e.eval_f64(&x) * coef;
        }
        assert!((acc - yfun.eval_f64(&x)).abs() < 1e-8);
    }

    #[test]
    fn fractional_laplacian_rules() {
        let st = store(Family::Trivial, 3, None, &[], 4);
        let f = MPoly::monomial(3, vec![1, 0, 0], 1.0);
        let sf = st.decompose(&f).unwrap();
        // alpha = 1/2 scales degree 1 by sqrt(2) (eigenvalue 2 at lambda = 1/2).
        let half = st.fractional_laplacian(&sf, 0.5).unwrap();
        let lead = (0..3)
            .max_by(|&a, &b| sf.comps[1][a].abs().partial_cmp(&sf.comps[1][b].abs()).unwrap())
            .unwrap();
        let ratio = half.comps[1][lead] / sf.comps[1][lead];
        assert!((ratio.abs() - std::f64::consts::SQRT_2).abs() < 1e-12);

        // alpha = 0 is the identity on mean-zero input.
        let id = st.fractional_laplacian(&sf, 0.0).unwrap();
        assert!(id.sub(&sf).norm_sq() < 1e-20);

        // Semigroup property.
        let a = st
            .fractional_laplacian(&st.fractional_laplacian(&sf, 0.3).unwrap(), 0.7)
            .unwrap();
        let b = st.fractional_laplacian(&sf, 1.0).unwrap();
        assert!(a.sub(&b).norm_sq().sqrt() < 1e-12);

        // Negative power demands mean zero.
        let g = MPoly::one(3);
        let sg = st.decompose(&g).unwrap();
        assert!(st.fractional_laplacian(&sg, -0.5).is_err());
    }

    #[test]
    fn fractional_power_one_matches_polynomial_laplacian() {
        let st = store(Family::Z2, 2, None, &[(1, 1), (1, 1)], 6);
        let ctx = st.quad().ctx().clone();
        let mut rng = ChaCha20Rng::seed_from_u64(24);
        let mut f = MPoly::zero(2);
        for _ in 0..8 {
            let e: Vec<u32> = (0..2).map(|_| rng.gen_range(0..=2u32)).collect();
            f = f.add(&MPoly::monomial(2, e, rng.gen_range(-1.0..1.0)));
        }
        let sf = st.decompose(&f).unwrap();
        let spectral = st.laplace_beltrami(&sf).unwrap();
        let poly_route = ctx.sphere_laplacian_poly(&Poly::Float(f.clone())).unwrap();
        let decomposed = st.decompose(&poly_route.as_float()).unwrap();
        let resid = spectral.sub(&decomposed).norm_sq().sqrt();
        assert!(resid < 1e-8, "dual-path residual {resid}");
    }

    #[test]
    fn projection_agrees_across_backends() {
        // Projections are basis-independent, so the two exact backends must
        // produce the same operator even if their bases differ by rotations
        // inside degenerate eigenspaces.
        let rs = RootSystem::build(Family::Z2, 2, None).unwrap();
        let k = Multiplicity::from_orbit_values(&rs, &[rat_of(1, 1), rat_of(1, 1)]).unwrap();
        let ctx = Arc::new(OperatorContext::new(rs, k).unwrap());
        let q1 = SphereQuad::with_backend(ctx.clone(), QuadBackend::ClosedForm).unwrap();
        let q2 = SphereQuad::with_backend(ctx, QuadBackend::GaussProduct).unwrap();
        let s1 = HarmonicStore::new(q1, 4);
        let s2 = HarmonicStore::new(q2, 4);
        let mut rng = ChaCha20Rng::seed_from_u64(31);
        let mut f = MPoly::zero(2);
        for _ in 0..8 {
            let e: Vec<u32> = (0..2).map(|_| rng.gen_range(0..=2u32)).collect();
            f = f.add(&MPoly::monomial(2, e, rng.gen_range(-1.0..1.0)));
        }
        for n in 0..=4usize {
            assert_eq!(s1.basis(n).unwrap().dim(), s2.basis(n).unwrap().dim());
            let p1 = s1.project(&f, n).unwrap();
            let p2 = s2.project(&f, n).unwrap();
            for _ in 0..20 {
                let x = random_sphere_point(2, &mut rng);
                assert!((p1.eval_f64(&x) - p2.eval_f64(&x)).abs() < 1e-9, "n={n}");
            }
        }
    }
}
