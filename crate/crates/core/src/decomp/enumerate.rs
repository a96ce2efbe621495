use super::{count_pure, DecompError, Decomposition};
use crate::systems::ControlSystem;

/// Set partitions of `0..m` into exactly `r` blocks as restricted growth
/// strings, in lexicographic order.
fn set_partitions(m: usize, r: usize) -> Vec<Vec<usize>> {
    fn rec(pos: usize, max: usize, m: usize, r: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if pos == m {
            if max + 1 == r {
                out.push(cur.clone());
            }
            return;
        }
        // Not enough positions left to open the remaining blocks.
        if (max + 1) + (m - pos) < r {
            return;
        }
        let limit = (max + 2).min(r);
        for b in 0..limit {
            cur.push(b);
            rec(pos + 1, max.max(b), m, r, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if m == 0 || r == 0 || r > m {
        return out;
    }
    let mut cur = vec![0];
    rec(1, 0, m, r, &mut cur, &mut out);
    out
}

/// All vectors in `{0..r}^n` in lexicographic order.
fn assignments(n: usize, r: usize) -> impl Iterator<Item = Vec<usize>> {
    let total = r.pow(n as u32);
    (0..total).map(move |mut code| {
        let mut v = vec![0; n];
        for slot in v.iter_mut().rev() {
            *slot = code % r;
            code /= r;
        }
        v
    })
}

/// Permutations of `0..r` in lexicographic order.
fn permutations(r: usize) -> Vec<Vec<usize>> {
    fn rec(cur: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if cur.len() == used.len() {
            out.push(cur.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                cur.push(i);
                rec(cur, used, out);
                cur.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; r], &mut out);
    out
}

fn blocks(labels: &[usize], r: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new(); r];
    for (i, &b) in labels.iter().enumerate() {
        out[b].push(i);
    }
    out
}

/// Every pure decoupled and pure cascaded decomposition over the system's
/// groups, each exactly once.
///
/// Order: all decoupled before all cascaded; within each, by number of input
/// blocks, input-group partition, state assignment and (for cascades) the
/// order of blocks along the chain. Cascades are listed innermost first.
pub fn enumerate_pure(
    sys: &ControlSystem,
    cap: Option<usize>,
) -> Result<Vec<Decomposition>, DecompError> {
    let n = sys.state_groups.len();
    let m = sys.input_groups.len();
    let expected = count_pure(n as u32, m as u32)?;
    if let Some(cap) = cap {
        if expected > cap as u128 {
            return Err(DecompError::EnumerationCap {
                count: expected,
                cap,
            });
        }
    }
    let mut out = Vec::with_capacity(expected as usize);
    for r in 2..=m {
        for part in set_partitions(m, r) {
            let input_blocks = blocks(&part, r);
            for assign in assignments(n, r) {
                let state_blocks = blocks(&assign, r);
                if state_blocks.iter().any(Vec::is_empty) {
                    continue;
                }
                out.push(Decomposition::decoupled(
                    input_blocks.iter().cloned().zip(state_blocks).collect(),
                ));
            }
        }
    }
    for r in 2..=m {
        let orders = permutations(r);
        for part in set_partitions(m, r) {
            let input_blocks = blocks(&part, r);
            // assign[s] = position along the chain, 0 = innermost.
            for assign in assignments(n, r) {
                let state_blocks = blocks(&assign, r);
                if state_blocks[0].is_empty() {
                    continue;
                }
                for order in &orders {
                    let chain = order
                        .iter()
                        .zip(&state_blocks)
                        .map(|(&b, states)| (input_blocks[b].clone(), states.clone()))
                        .collect();
                    out.push(Decomposition::cascaded(chain));
                }
            }
        }
    }
    debug_assert_eq!(out.len() as u128, expected);
    Ok(out)
}
