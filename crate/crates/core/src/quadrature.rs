//! Fixed quadrature rules on the reference triangle and the unit interval.

use crate::scalar::Real;

const A1: f64 = 0.445_948_490_915_965;
const W1: f64 = 0.223_381_589_678_011_47;
const A2: f64 = 0.091_576_213_509_770_74;
const W2: f64 = 0.109_951_743_655_321_87;

/// Six-point rule exact to degree 4. Barycentric coordinates and weights summing to 1.
pub fn triangle_rule<T: Real>() -> [([T; 3], T); 6] {
    let b1 = 1.0 - 2.0 * A1;
    let b2 = 1.0 - 2.0 * A2;
    let p = |a: f64, b: f64, c: f64, w: f64| ([T::c(a), T::c(b), T::c(c)], T::c(w));
    [
        p(A1, A1, b1, W1),
        p(A1, b1, A1, W1),
        p(b1, A1, A1, W1),
        p(A2, A2, b2, W2),
        p(A2, b2, A2, W2),
        p(b2, A2, A2, W2),
    ]
}

/// Three-point Gauss rule on [0, 1].
pub fn edge_rule3<T: Real>() -> [(T, T); 3] {
    let d = 0.5 * (0.6f64).sqrt();
    [
        (T::c(0.5 - d), T::c(5.0 / 18.0)),
        (T::c(0.5), T::c(8.0 / 18.0)),
        (T::c(0.5 + d), T::c(5.0 / 18.0)),
    ]
}

/// Two-point Gauss rule on [0, 1].
pub fn edge_rule2<T: Real>() -> [(T, T); 2] {
    let d = 0.5 / 3f64.sqrt();
    [(T::c(0.5 - d), T::c(0.5)), (T::c(0.5 + d), T::c(0.5))]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fact(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    #[test]
    fn triangle_rule_exact_to_degree_four() {
        // reference triangle (0,0),(1,0),(0,1), area 1/2
        for a in 0..=4u32 {
            for b in 0..=(4 - a) {
                let q: f64 = triangle_rule::<f64>()
                    .iter()
                    .map(|(l, w)| 0.5 * w * l[1].powi(a as i32) * l[2].powi(b as i32))
                    .sum();
                let exact = fact(a) * fact(b) / fact(a + b + 2);
                assert!((q - exact).abs() < 1e-15, "x^{a} y^{b}: {q} vs {exact}");
            }
        }
    }

    #[test]
    fn edge_rules_exact() {
        for n in 0..=5 {
            let q: f64 = edge_rule3::<f64>().iter().map(|(t, w)| w * t.powi(n)).sum();
            assert!((q - 1.0 / (n as f64 + 1.0)).abs() < 1e-15);
        }
        for n in 0..=3 {
            let q: f64 = edge_rule2::<f64>().iter().map(|(t, w)| w * t.powi(n)).sum();
            assert!((q - 1.0 / (n as f64 + 1.0)).abs() < 1e-15);
        }
    }
}
