//! Quadrature rules on the reference triangle {(t1,t2): t1,t2 >= 0, t1+t2 <= 1}.
//!
//! Weights sum to the reference-triangle area 1/2, so an integral over a flat
//! mesh triangle T with area A_T is `2 A_T * sum_q w_q f(X(theta_q))`.

/// One quadrature node: reference coordinates and weight.
#[derive(Debug, Clone, Copy)]
pub struct QuadNode {
    pub theta: [f64; 2],
    pub weight: f64,
}

/// Six-point rule, exact for polynomials up to degree 4 (Dunavant).
pub const DEGREE4: [QuadNode; 6] = {
    const A1: f64 = 0.445_948_490_915_965;
    const W1: f64 = 0.223_381_589_678_011 / 2.0;
    const A2: f64 = 0.091_576_213_509_771;
    const W2: f64 = 0.109_951_743_655_322 / 2.0;
    [
        QuadNode { theta: [A1, A1], weight: W1 },
        QuadNode { theta: [1.0 - 2.0 * A1, A1], weight: W1 },
        QuadNode { theta: [A1, 1.0 - 2.0 * A1], weight: W1 },
        QuadNode { theta: [A2, A2], weight: W2 },
        QuadNode { theta: [1.0 - 2.0 * A2, A2], weight: W2 },
        QuadNode { theta: [A2, 1.0 - 2.0 * A2], weight: W2 },
    ]
};

/// Values of the three P1 hat functions at a reference point.
pub fn hat_values(theta: [f64; 2]) -> [f64; 3] {
    [1.0 - theta[0] - theta[1], theta[0], theta[1]]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn integrate(f: impl Fn(f64, f64) -> f64) -> f64 {
        DEGREE4.iter().map(|n| n.weight * f(n.theta[0], n.theta[1])).sum()
    }

    #[test]
    fn weights_sum_to_reference_area() {
        assert!((integrate(|_, _| 1.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn exact_through_degree_four() {
        // Monomial integrals over the reference triangle: t1^a t2^b has
        // integral a! b! / (a+b+2)!.
        fn exact(a: u32, b: u32) -> f64 {
            let fact = |n: u32| (1..=n).map(|k| k as f64).product::<f64>().max(1.0);
            fact(a) * fact(b) / fact(a + b + 2)
        }
        for a in 0..=4u32 {
            for b in 0..=(4 - a) {
                let num = integrate(|x, y| x.powi(a as i32) * y.powi(b as i32));
                assert!(
                    (num - exact(a, b)).abs() < 1e-14,
                    "degree ({a},{b}): {num} vs {}",
                    exact(a, b)
                );
            }
        }
    }
}
