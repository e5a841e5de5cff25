//! Conversion of raw moments to cumulants.

/// Cumulants `κ₁..κ_r` from moments `μ₁..μ_r` via the logarithm of the
/// exponential generating function, expanded as a sum over compositions:
/// `κ_r = r! Σ_k (−1)^{k−1}/k Σ_{j₁+…+j_k=r} Π μ_{j_i}/j_i!`.
pub fn cumulants_from_moments(moments: &[f64]) -> Vec<f64> {
    let r = moments.len();
    // c[j] = μ_j / j!, j = 1..r.
    let mut c = vec![0.0; r + 1];
    let mut fact = 1.0;
    for j in 1..=r {
        fact *= j as f64;
        c[j] = moments[j - 1] / fact;
    }
    let mut log = vec![0.0; r + 1];
    let mut power = c.clone();
    for k in 1..=r {
        let coeff = if k % 2 == 1 { 1.0 } else { -1.0 } / k as f64;
        for j in k..=r {
            log[j] += coeff * power[j];
        }
        // power ← power · c, truncated at degree r.
        let mut next = vec![0.0; r + 1];
        for (a, &pa) in power.iter().enumerate().skip(k) {
            if pa == 0.0 {
                continue;
            }
            for b in 1..=r - a.min(r) {
                next[a + b] += pa * c[b];
            }
        }
        power = next;
    }
    let mut fact = 1.0;
    (1..=r)
        .map(|j| {
            fact *= j as f64;
            log[j] * fact
        })
        .collect()
}
