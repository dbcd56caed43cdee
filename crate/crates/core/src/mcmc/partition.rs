//! Partition of the candidate times into blocks for the path update.

/// Windows that start with a non-virtual jump into a first-copy state.
pub fn eligible_jumps(v: &[usize], k: usize) -> Vec<usize> {
    (1..v.len())
        .filter(|&l| v[l] != v[l - 1] && v[l] < k)
        .collect()
}

/// Block start indices (window indices, excluding 0): for each quantile
/// position `round(b |W| / B)` the eligible jump nearest in time, ties to the
/// earlier one. Duplicates collapse.
pub fn boundaries(w: &[f64], v: &[usize], k: usize, n_blocks: usize) -> Vec<usize> {
    let elig = eligible_jumps(v, k);
    if elig.is_empty() || n_blocks < 2 || w.is_empty() {
        return Vec::new();
    }
    let nw = w.len();
    let mut out: Vec<usize> = (1..n_blocks)
        .map(|b| {
            let q = ((b * nw) as f64 / n_blocks as f64).round() as usize;
            let target = w[q.clamp(1, nw) - 1];
            let i = elig.partition_point(|&l| w[l - 1] < target);
            let after = elig.get(i).copied();
            let before = i.checked_sub(1).map(|j| elig[j]);
            match (before, after) {
                (Some(x), Some(y)) => {
                    if target - w[x - 1] <= w[y - 1] - target {
                        x
                    } else {
                        y
                    }
                }
                (Some(x), None) => x,
                (None, Some(y)) => y,
                (None, None) => unreachable!("eligible set is non-empty"),
            }
        })
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// New block count after an adaptation window with acceptance `rate`.
pub fn adapt_partition(n_blocks: usize, eligible: usize, rate: f64, threshold: f64) -> usize {
    if rate < threshold && eligible >= n_blocks {
        n_blocks + 1
    } else {
        n_blocks
    }
}
