use super::DecompError;

fn binomial(n: u32, k: u32) -> Result<i128, DecompError> {
    let k = k.min(n - k);
    let mut acc: i128 = 1;
    for i in 0..k {
        acc = acc
            .checked_mul((n - i) as i128)
            .ok_or(DecompError::Overflow)?
            / (i + 1) as i128;
    }
    Ok(acc)
}

fn pow(base: i128, exp: u32) -> Result<i128, DecompError> {
    base.checked_pow(exp).ok_or(DecompError::Overflow)
}

/// Number of surjections from `a` labeled elements onto `b` labeled groups,
/// `Δ(a, b) = Σ_{k=0}^{b−1} (−1)^k C(b, k) (b − k)^a`.
pub fn surjection_count(a: u32, b: u32) -> Result<u128, DecompError> {
    if b == 0 {
        return Err(DecompError::Domain("surjection onto zero groups".into()));
    }
    // The truncated sum drops the k = b term, which only matters for a = 0.
    if a == 0 {
        return Ok(0);
    }
    let mut acc: i128 = 0;
    for k in 0..b {
        let term = binomial(b, k)?
            .checked_mul(pow((b - k) as i128, a)?)
            .ok_or(DecompError::Overflow)?;
        acc = if k % 2 == 0 {
            acc.checked_add(term)
        } else {
            acc.checked_sub(term)
        }
        .ok_or(DecompError::Overflow)?;
    }
    Ok(acc as u128)
}

fn factorial(r: u32) -> Result<u128, DecompError> {
    (1..=r as u128).try_fold(1u128, |acc, k| acc.checked_mul(k).ok_or(DecompError::Overflow))
}

/// Number of pure (decoupled or single-cascade) decompositions of a system
/// with `n` state groups and `m` input groups.
pub fn count_pure(n: u32, m: u32) -> Result<u128, DecompError> {
    if n == 0 {
        return Err(DecompError::Domain("need at least one state group".into()));
    }
    if m < 2 {
        return Err(DecompError::Domain(
            "need at least two input groups to decompose".into(),
        ));
    }
    let mut total: u128 = 0;
    for r in 2..=m {
        let input_splits = surjection_count(m, r)?;
        // Δ(n, r) is divisible by r!.
        let decoupled = surjection_count(n, r)? / factorial(r)?;
        let rr = r as u128;
        let cascaded = rr
            .checked_pow(n)
            .ok_or(DecompError::Overflow)?
            - (rr - 1).checked_pow(n).ok_or(DecompError::Overflow)?;
        let per_split = decoupled.checked_add(cascaded).ok_or(DecompError::Overflow)?;
        total = input_splits
            .checked_mul(per_split)
            .and_then(|t| total.checked_add(t))
            .ok_or(DecompError::Overflow)?;
    }
    Ok(total)
}
