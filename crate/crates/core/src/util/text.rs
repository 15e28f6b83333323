//! Token bags and cosine similarity over lowercased, punctuation-stripped text.

use std::collections::HashMap;

/// Splits text into lowercased tokens, dropping punctuation. A token is a
/// maximal run of alphanumeric characters, so "Rock-climbing!" yields
/// ["rock", "climbing"].
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut cur = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            cur.extend(ch.to_lowercase());
        } else if !cur.is_empty() {
            tokens.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        tokens.push(cur);
    }
    tokens
}

/// Multiset of tokens with their counts.
pub fn token_bag<'a, I: IntoIterator<Item = &'a str>>(texts: I) -> HashMap<String, u32> {
    let mut bag = HashMap::new();
    for text in texts {
        for tok in tokenize(text) {
            *bag.entry(tok).or_insert(0) += 1;
        }
    }
    bag
}

/// Cosine similarity between two token bags, 0.0 when either is empty.
pub fn cosine(a: &HashMap<String, u32>, b: &HashMap<String, u32>) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let dot: f64 = a
        .iter()
        .filter_map(|(tok, &ca)| b.get(tok).map(|&cb| ca as f64 * cb as f64))
        .sum();
    let na: f64 = a.values().map(|&c| (c as f64).powi(2)).sum::<f64>().sqrt();
    let nb: f64 = b.values().map(|&c| (c as f64).powi(2)).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Whitespace token count, the fallback when a backend reports no usage.
pub fn whitespace_tokens(text: &str) -> u64 {
    text.split_whitespace().count() as u64
}

/// Truncates to at most `cap` characters, respecting char boundaries.
pub fn truncate_chars(text: &str, cap: usize) -> String {
    text.chars().take(cap).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenize_strips_punctuation_and_lowercases() {
        assert_eq!(tokenize("Rock-climbing, NOW!"), vec!["rock", "climbing", "now"]);
        assert_eq!(tokenize("  "), Vec::<String>::new());
    }

    #[test]
    fn cosine_identical_bags_is_one() {
        let a = token_bag(["alpha beta beta"]);
        let sim = cosine(&a, &a);
        assert!((sim - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cosine_disjoint_bags_is_zero() {
        let a = token_bag(["alpha"]);
        let b = token_bag(["beta"]);
        assert_eq!(cosine(&a, &b), 0.0);
    }

    #[test]
    fn cosine_empty_bag_is_zero() {
        let a = token_bag(["alpha"]);
        let b = token_bag([] as [&str; 0]);
        assert_eq!(cosine(&a, &b), 0.0);
        assert_eq!(cosine(&b, &a), 0.0);
    }

    #[test]
    fn cosine_partial_overlap_matches_hand_value() {
        // 4 distinct interest tokens vs a 2-token post that hits 2 of them:
        // dot = 2, |a| = 2, |b| = sqrt(2) -> 1/sqrt(2).
        let a = token_bag(["hiking", "jazz", "chess", "baking"]);
        let b = token_bag(["hiking jazz"]);
        let expected = 1.0 / 2f64.sqrt();
        assert!((cosine(&a, &b) - expected).abs() < 1e-12);
    }

    #[test]
    fn truncate_respects_char_boundaries() {
        assert_eq!(truncate_chars("héllo", 2), "hé");
        assert_eq!(truncate_chars("ab", 10), "ab");
    }

    #[test]
    fn whitespace_tokens_counts_words() {
        assert_eq!(whitespace_tokens("one  two\nthree"), 3);
        assert_eq!(whitespace_tokens(""), 0);
    }
}
