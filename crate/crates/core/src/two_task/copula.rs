use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::family::PiecewiseRationalCDF;
use crate::mechanism::{Margins, ThresholdSampler};
use crate::scalar::{self, Scalar};

/// Margins `(F, H)` with `H(x, y) = max{0, F(x) + F(y) - 1}`.
pub struct LowerFrechet<F> {
    pub f: F,
}

pub fn copula_lower_frechet<F>(f: F) -> LowerFrechet<F> {
    LowerFrechet { f }
}

impl<T: Scalar, F: Fn(&T) -> T> Margins<T> for LowerFrechet<F> {
    fn cdf(&self, x: &T) -> T {
        (self.f)(x)
    }

    fn joint(&self, x: &T, y: &T) -> T {
        scalar::max(T::zero(), (self.f)(x) + (self.f)(y) - T::one())
    }
}

/// Draws `(Q(U), Q(1 - U))` for a uniform `U`, whose joint CDF is the lower
/// Fréchet bound of `F` with itself.
pub struct CountermonotoneSampler<'a> {
    pub f: &'a PiecewiseRationalCDF<f64>,
}

impl CountermonotoneSampler<'_> {
    /// Generalised inverse `Q(p) = inf{x : F(x) >= p}`.
    pub fn quantile(&self, p: f64) -> f64 {
        let f = self.f;
        let k = f.k();
        for i in 1..=2 * k {
            let lo = if i == 1 { 0.0 } else { *f.s(i - 1) };
            if f.cdf(&lo) >= p {
                return lo;
            }
            if i == 2 * k {
                return lo;
            }
            let hi = *f.s(i);
            // Left limit at hi, from the piece formula.
            let at_hi = if i <= k {
                if i == 1 { 0.0 } else { f.piece(i, &(1.0 / hi)) }
            } else {
                1.0 - f.piece(2 * k + 1 - i, &hi)
            };
            if at_hi >= p {
                let x = if i <= k {
                    let (c0, c1) = (*f.c0(i), *f.c1(i));
                    c1 / (p - c0)
                } else {
                    let q = 2 * k + 1 - i;
                    let (c0, c1) = (*f.c0(q), *f.c1(q));
                    (1.0 - c0 - p) / c1
                };
                return if x.is_finite() { x.clamp(lo, hi) } else { hi };
            }
        }
        unreachable!("F reaches 1 on the last interval")
    }
}

impl ThresholdSampler for CountermonotoneSampler<'_> {
    fn dim(&self) -> usize {
        2
    }

    fn sample(&self, rng: &mut ChaCha8Rng, z: &mut [f64]) {
        let u: f64 = rng.random::<f64>();
        // Thresholds must be positive; p = 0 maps to the bottom of the support.
        let lift = |x: f64| if x > 0.0 { x } else { f64::MIN_POSITIVE };
        z[0] = lift(self.quantile(u));
        z[1] = lift(self.quantile(1.0 - u));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::uniform_grid;
    use crate::mechanism::{monte_carlo_ratio, phi, worst_case_instance};

    #[test]
    fn heaviside_copula() {
        let m = copula_lower_frechet(|x: &f64| if *x >= 1.0 { 1.0 } else { 0.0 });
        assert_eq!(m.joint(&2.0, &2.0), 1.0);
        assert_eq!(m.joint(&0.5, &2.0), 0.0);
        assert_eq!(m.joint(&2.0, &0.5), m.joint(&0.5, &2.0));
    }

    #[test]
    fn matches_enumerated_antithetic_coupling() {
        // Uniform law on five atoms; coupling atom r with atom 4 - r.
        let atoms = [0.5, 1.0, 2.0, 3.0, 4.0];
        let f = |x: &f64| atoms.iter().filter(|a| *a <= x).count() as f64 / 5.0;
        let m = copula_lower_frechet(f);
        for &x in &atoms {
            for &y in &atoms {
                let brute = (0..5).filter(|&r| atoms[r] <= x && atoms[4 - r] <= y).count() as f64 / 5.0;
                assert!((m.joint(&x, &y) - brute).abs() < 1e-12);
            }
        }
    }

    fn member() -> PiecewiseRationalCDF {
        let vals = [0.05, 0.1, 0.15, 0.2, 0.3, 0.35, 0.4, 0.45];
        PiecewiseRationalCDF::from_endpoint_values(uniform_grid(5).unwrap(), &vals).unwrap()
    }

    #[test]
    fn quantile_inverts_the_cdf() {
        let f = member();
        let s = CountermonotoneSampler { f: &f };
        for i in 1..200 {
            let p = i as f64 / 200.0;
            let x = s.quantile(p);
            assert!(f.cdf(&x) >= p - 1e-12, "p={p} x={x}");
            assert!(f.cdf(&(x * (1.0 - 1e-9))) <= p + 1e-9, "p={p} x={x}");
        }
    }

    #[test]
    fn sampled_ratio_matches_phi() {
        let f = member();
        let sampler = CountermonotoneSampler { f: &f };
        let m = copula_lower_frechet(|x: &f64| f.cdf(x));
        for (x, y) in [(1.1, 1.3), (3.0, 1.2), (0.5, 2.5), (0.8, 0.9)] {
            let t = worst_case_instance(&x, &y, 2, &0.0).unwrap();
            let est = monte_carlo_ratio(&sampler, &t, 200_000, 11).unwrap();
            let exact = phi(&m, &x, &y);
            assert!((est.mean - exact).abs() <= 4.0 * est.stderr + 1e-12, "{x} {y}: {est:?} vs {exact}");
        }
    }
}
