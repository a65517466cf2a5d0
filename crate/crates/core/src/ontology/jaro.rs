//! Jaro and Jaro-Winkler similarity over Unicode scalar values.

const PREFIX_LIMIT: usize = 4;
const PREFIX_SCALE: f64 = 0.1;
/// Winkler's boost threshold: the prefix bonus applies only above this Jaro score.
const BOOST_THRESHOLD: f64 = 0.7;

pub fn jaro(a: &str, b: &str) -> f64 {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    jaro_chars(&a, &b)
}

pub fn jaro_winkler(a: &str, b: &str) -> f64 {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    jaro_winkler_chars(&a, &b)
}

pub(crate) fn jaro_chars(a: &[char], b: &[char]) -> f64 {
    if a == b {
        return 1.0;
    }
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let window = (a.len().max(b.len()) / 2).saturating_sub(1);
    let mut b_used = vec![false; b.len()];
    let mut a_matched = Vec::with_capacity(a.len());
    for (i, &ca) in a.iter().enumerate() {
        let lo = i.saturating_sub(window);
        let hi = (i + window + 1).min(b.len());
        if lo >= hi {
            continue;
        }
        if let Some(j) = (lo..hi).find(|&j| !b_used[j] && b[j] == ca) {
            b_used[j] = true;
            a_matched.push(ca);
        }
    }
    let m = a_matched.len();
    if m == 0 {
        return 0.0;
    }
    let half_transpositions = b
        .iter()
        .zip(&b_used)
        .filter_map(|(c, used)| used.then_some(c))
        .zip(&a_matched)
        .filter(|(x, y)| x != y)
        .count();
    let m = m as f64;
    let t = half_transpositions as f64 / 2.0;
    (m / a.len() as f64 + m / b.len() as f64 + (m - t) / m) / 3.0
}

pub(crate) fn jaro_winkler_chars(a: &[char], b: &[char]) -> f64 {
    let sim = jaro_chars(a, b);
    if sim <= BOOST_THRESHOLD {
        return sim;
    }
    let prefix = a.iter().zip(b).take(PREFIX_LIMIT).take_while(|(x, y)| x == y).count();
    sim + PREFIX_SCALE * prefix as f64 * (1.0 - sim)
}
