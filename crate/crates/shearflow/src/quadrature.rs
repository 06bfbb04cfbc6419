//! Gauss quadrature rules on the reference triangle (0,0)-(1,0)-(0,1).
//!
//! Points are stored in reference coordinates (ξ, η); weights sum to the
//! reference area 1/2. Rules are the standard symmetric triangle rules of
//! degrees 2, 4 and 6.

/// A quadrature rule on the reference triangle.
#[derive(Debug, Clone, Copy)]
pub struct TriRule {
    pub points: &'static [[f64; 2]],
    pub weights: &'static [f64],
    pub degree: usize,
}

const DEG2_POINTS: [[f64; 2]; 3] = [
    [1.0 / 6.0, 1.0 / 6.0],
    [2.0 / 3.0, 1.0 / 6.0],
    [1.0 / 6.0, 2.0 / 3.0],
];
const DEG2_WEIGHTS: [f64; 3] = [1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0];

// 6-point rule, degree 4
const A1: f64 = 0.445_948_490_915_965;
const A2: f64 = 0.091_576_213_509_771;
const W1: f64 = 0.223_381_589_678_011 / 2.0;
const W2: f64 = 0.109_951_743_655_322 / 2.0;
const DEG4_POINTS: [[f64; 2]; 6] = [
    [A1, A1],
    [1.0 - 2.0 * A1, A1],
    [A1, 1.0 - 2.0 * A1],
    [A2, A2],
    [1.0 - 2.0 * A2, A2],
    [A2, 1.0 - 2.0 * A2],
];
const DEG4_WEIGHTS: [f64; 6] = [W1, W1, W1, W2, W2, W2];

// 12-point rule, degree 6
const B1: f64 = 0.249_286_745_170_910;
const B2: f64 = 0.063_089_014_491_502;
const C1: f64 = 0.310_352_451_033_785;
const C2: f64 = 0.053_145_049_844_816;
const C3: f64 = 1.0 - C1 - C2;
const V1: f64 = 0.116_786_275_726_379 / 2.0;
const V2: f64 = 0.050_844_906_370_207 / 2.0;
const V3: f64 = 0.082_851_075_618_374 / 2.0;
const DEG6_POINTS: [[f64; 2]; 12] = [
    [B1, B1],
    [1.0 - 2.0 * B1, B1],
    [B1, 1.0 - 2.0 * B1],
    [B2, B2],
    [1.0 - 2.0 * B2, B2],
    [B2, 1.0 - 2.0 * B2],
    [C1, C2],
    [C2, C1],
    [C1, C3],
    [C3, C1],
    [C2, C3],
    [C3, C2],
];
const DEG6_WEIGHTS: [f64; 12] = [V1, V1, V1, V2, V2, V2, V3, V3, V3, V3, V3, V3];

/// Smallest shipped rule of at least the requested polynomial degree.
pub fn rule(degree: usize) -> TriRule {
    if degree <= 2 {
        TriRule { points: &DEG2_POINTS, weights: &DEG2_WEIGHTS, degree: 2 }
    } else if degree <= 4 {
        TriRule { points: &DEG4_POINTS, weights: &DEG4_WEIGHTS, degree: 4 }
    } else {
        TriRule { points: &DEG6_POINTS, weights: &DEG6_WEIGHTS, degree: 6 }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn integrate(rule: &TriRule, f: impl Fn(f64, f64) -> f64) -> f64 {
        rule.points
            .iter()
            .zip(rule.weights)
            .map(|(p, w)| w * f(p[0], p[1]))
            .sum()
    }

    /// Exact value of ∫ x^a y^b over the reference triangle.
    fn monomial_exact(a: u32, b: u32) -> f64 {
        // a! b! / (a + b + 2)!
        let fact = |n: u32| (1..=n).map(f64::from).product::<f64>().max(1.0);
        fact(a) * fact(b) / fact(a + b + 2)
    }

    #[test]
    fn rules_integrate_monomials_to_declared_degree() {
        for degree in [2usize, 4, 6] {
            let r = rule(degree);
            assert_relative_eq!(r.weights.iter().sum::<f64>(), 0.5, epsilon = 1e-14);
            for a in 0..=degree as u32 {
                for b in 0..=(degree as u32 - a) {
                    let got = integrate(&r, |x, y| x.powi(a as i32) * y.powi(b as i32));
                    assert_relative_eq!(got, monomial_exact(a, b), epsilon = 1e-14,
                        max_relative = 1e-12);
                }
            }
        }
    }
}
