use serde::{Deserialize, Serialize};

/// Levenshtein distance with the edit counts of one canonical backtrace.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditOps {
    pub distance: usize,
    pub substitutions: usize,
    pub insertions: usize,
    pub deletions: usize,
}

/// Unit-cost edit distance turning `reference` into `hypothesis`. A deletion
/// drops a reference token, an insertion adds a hypothesis token. Backtrace
/// ties prefer the diagonal (match or substitution), then deletion, then
/// insertion.
pub fn edit_distance<T: PartialEq>(reference: &[T], hypothesis: &[T]) -> EditOps {
    let (n, m) = (reference.len(), hypothesis.len());
    let width = m + 1;
    let mut d = vec![0u32; (n + 1) * width];
    for (j, cell) in d[..width].iter_mut().enumerate() {
        *cell = j as u32;
    }
    for i in 1..=n {
        d[i * width] = i as u32;
        for j in 1..=m {
            let cost = u32::from(reference[i - 1] != hypothesis[j - 1]);
            let diag = d[(i - 1) * width + j - 1] + cost;
            let up = d[(i - 1) * width + j] + 1;
            let left = d[i * width + j - 1] + 1;
            d[i * width + j] = diag.min(up).min(left);
        }
    }

    let mut ops = EditOps {
        distance: d[n * width + m] as usize,
        ..EditOps::default()
    };
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = d[i * width + j];
        if i > 0 && j > 0 {
            let cost = u32::from(reference[i - 1] != hypothesis[j - 1]);
            if here == d[(i - 1) * width + j - 1] + cost {
                ops.substitutions += cost as usize;
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 && here == d[(i - 1) * width + j] + 1 {
            ops.deletions += 1;
            i -= 1;
        } else {
            ops.insertions += 1;
            j -= 1;
        }
    }
    debug_assert_eq!(ops.substitutions + ops.insertions + ops.deletions, ops.distance);
    ops
}
