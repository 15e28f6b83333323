//! Small exact statistics for acceptance checks.

/// One-sided sign test: probability of observing at least `successes` out of
/// `trials` under a fair coin. Exact for trials <= 62.
pub fn sign_test_p(successes: u32, trials: u32) -> f64 {
    assert!(successes <= trials);
    assert!(trials <= 62, "binomials overflow u64 beyond 62 trials");
    let mut tail = 0u64;
    for k in successes..=trials {
        tail += binomial(trials, k);
    }
    tail as f64 / (1u64 << trials) as f64
}

fn binomial(n: u32, k: u32) -> u64 {
    let k = k.min(n - k);
    let mut acc = 1u64;
    for i in 0..k {
        acc = acc * (n - i) as u64 / (i + 1) as u64;
    }
    acc
}
