/// Jensen-Shannon divergence in nats between two discrete distributions.
///
/// Bounded by `ln 2` for inputs on the probability simplex.
pub fn js_divergence(p: &[f64], q: &[f64]) -> f64 {
    debug_assert_eq!(p.len(), q.len());
    let mut total = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        let m = 0.5 * (a + b);
        let term = |x: f64| if x > 0.0 { x * (x / m).ln() } else { 0.0 };
        // Summing the pair first keeps the result exactly symmetric.
        total += term(a) + term(b);
    }
    // Rounding can push identical inputs a hair below zero.
    (0.5 * total).max(0.0)
}
