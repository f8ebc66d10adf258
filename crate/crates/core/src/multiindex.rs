//! Multi-index helpers shared by networks, targets and assembly.

/// A multi-index `α = (α_1, ..., α_d)`.
pub type MultiIndex = Vec<usize>;

pub fn order(alpha: &[usize]) -> usize {
    alpha.iter().sum()
}

pub fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, i| acc * i as f64)
}

/// `α! = α_1! ⋯ α_d!`
pub fn multi_factorial(alpha: &[usize]) -> f64 {
    alpha.iter().map(|&a| factorial(a)).product()
}

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `n! / (n-j)!`, zero when `j > n`.
pub fn falling(n: usize, j: usize) -> f64 {
    if j > n {
        return 0.0;
    }
    ((n - j + 1)..=n).fold(1.0, |acc, i| acc * i as f64)
}

/// All multi-indices of dimension `d` with `|α| = n`, in lexicographically
/// decreasing order of the first component.
pub fn with_order(d: usize, n: usize) -> Vec<MultiIndex> {
    let mut out = Vec::new();
    let mut cur = vec![0; d];
    fill(d, n, 0, &mut cur, &mut out);
    out
}

fn fill(d: usize, remaining: usize, pos: usize, cur: &mut Vec<usize>, out: &mut Vec<MultiIndex>) {
    if pos + 1 == d {
        cur[pos] = remaining;
        out.push(cur.clone());
        return;
    }
    for a in (0..=remaining).rev() {
        cur[pos] = a;
        fill(d, remaining - a, pos + 1, cur, out);
    }
    cur[pos] = 0;
}

/// All multi-indices with `|α| ≤ n`, grouped by increasing order.
pub fn up_to_order(d: usize, n: usize) -> Vec<MultiIndex> {
    (0..=n).flat_map(|j| with_order(d, j)).collect()
}

/// `x^α`
pub fn monomial(x: &[f64], alpha: &[usize]) -> f64 {
    x.iter()
        .zip(alpha)
        .map(|(&xi, &a)| xi.powi(a as i32))
        .product()
}

/// `∂^β x^α`
pub fn monomial_partial(x: &[f64], alpha: &[usize], beta: &[usize]) -> f64 {
    let mut v = 1.0;
    for ((&xi, &a), &b) in x.iter().zip(alpha).zip(beta) {
        if b > a {
            return 0.0;
        }
        v *= falling(a, b) * xi.powi((a - b) as i32);
    }
    v
}

/// `β ≤ α` componentwise.
pub fn dominated(beta: &[usize], alpha: &[usize]) -> bool {
    beta.iter().zip(alpha).all(|(b, a)| b <= a)
}

/// Coefficients of `(ν·∇)^k` expanded as `Σ_{|α|=k} (k!/α!) ν^α ∂^α`.
pub fn directional_expansion(normal: &[f64], k: usize) -> Vec<(MultiIndex, f64)> {
    with_order(normal.len(), k)
        .into_iter()
        .filter_map(|alpha| {
            let c = factorial(k) / multi_factorial(&alpha) * monomial(normal, &alpha);
            (c != 0.0).then_some((alpha, c))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_match_binomials() {
        for d in 1..=3 {
            for n in 0..=5 {
                assert_eq!(with_order(d, n).len() as f64, binomial(n + d - 1, d - 1));
                assert_eq!(up_to_order(d, n).len() as f64, binomial(n + d, d));
            }
        }
    }

    #[test]
    fn monomial_derivatives() {
        let x = [2.0, 3.0];
        assert_eq!(monomial(&x, &[2, 1]), 12.0);
        assert_eq!(monomial_partial(&x, &[2, 1], &[1, 0]), 12.0);
        assert_eq!(monomial_partial(&x, &[2, 1], &[2, 1]), 2.0);
        assert_eq!(monomial_partial(&x, &[2, 1], &[0, 2]), 0.0);
    }

    #[test]
    fn axis_normal_expansion_is_single_term() {
        let e = directional_expansion(&[0.0, -1.0], 2);
        assert_eq!(e, vec![(vec![0, 2], 1.0)]);
    }
}
