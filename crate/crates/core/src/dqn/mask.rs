//! Turning Q-values into an eviction bitmask.

/// Largest candidate count a 64-bit mask can address.
pub const MAX_K: usize = 64;

/// Selects victims by ascending Q (ties by index) until their sizes cover
/// `needed`. If all candidates together are insufficient, every bit is set.
pub fn select_mask<T: PartialOrd + Copy>(q: &[T], sizes: &[u64], needed: u64) -> u64 {
    assert_eq!(q.len(), sizes.len(), "one size per Q-value");
    assert!(q.len() <= MAX_K, "at most {MAX_K} candidates");
    if needed == 0 || q.is_empty() {
        return 0;
    }
    let mut order = [0u8; MAX_K];
    let order = &mut order[..q.len()];
    for (i, o) in order.iter_mut().enumerate() {
        *o = i as u8;
    }
    // stable sort keeps index order among equal Q
    order.sort_by(|&a, &b| {
        q[a as usize].partial_cmp(&q[b as usize]).unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut mask = 0u64;
    let mut freed = 0u64;
    for &i in order.iter() {
        mask |= 1 << i;
        freed += sizes[i as usize];
        if freed >= needed {
            return mask;
        }
    }
    full_mask(q.len())
}

pub fn full_mask(k: usize) -> u64 {
    if k >= 64 {
        u64::MAX
    } else {
        (1u64 << k) - 1
    }
}

/// Indices of set bits, ascending.
pub fn mask_indices(mask: u64) -> impl Iterator<Item = usize> {
    (0..64).filter(move |i| mask >> i & 1 == 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_needed_is_empty() {
        assert_eq!(select_mask(&[0.1f32, 0.2], &[5, 5], 0), 0);
    }

    #[test]
    fn lowest_q_goes_first() {
        assert_eq!(select_mask(&[0.9f32, 0.1], &[1, 1], 1), 0b10);
    }

    #[test]
    fn ties_by_index() {
        assert_eq!(select_mask(&[0.0f32; 4], &[1; 4], 2), 0b0011);
    }

    #[test]
    fn insufficient_selects_all() {
        assert_eq!(select_mask(&[3.0f32, 1.0, 2.0], &[1, 1, 1], 10), 0b111);
        assert_eq!(full_mask(64), u64::MAX);
    }

    #[test]
    fn minimal_prefix_exhaustive() {
        // every size vector over {1,2,3}^k and every needed value for k <= 5
        let mut x = 0x9e3779b97f4a7c15u64;
        for k in 1..=5usize {
            let combos = 3usize.pow(k as u32);
            for c in 0..combos {
                let sizes: Vec<u64> = (0..k).map(|i| (c / 3usize.pow(i as u32) % 3) as u64 + 1).collect();
                let q: Vec<f64> = (0..k)
                    .map(|_| {
                        x ^= x << 13;
                        x ^= x >> 7;
                        x ^= x << 17;
                        (x % 5) as f64
                    })
                    .collect();
                let total: u64 = sizes.iter().sum();
                for needed in 1..=total + 1 {
                    let m = select_mask(&q, &sizes, needed);
                    let freed: u64 = mask_indices(m).map(|i| sizes[i]).sum();
                    if freed < needed {
                        assert_eq!(m, full_mask(k));
                        continue;
                    }
                    // the last bit in selection order is the highest-(Q, index) selected one
                    let last = mask_indices(m)
                        .max_by(|&a, &b| q[a].partial_cmp(&q[b]).unwrap().then(a.cmp(&b)))
                        .unwrap();
                    assert!(freed - sizes[last] < needed, "k={k} sizes={sizes:?} q={q:?} needed={needed}");
                    // selected set is a prefix of the (Q, index) order
                    for i in mask_indices(m) {
                        for j in 0..k {
                            if m >> j & 1 == 0 {
                                assert!((q[i], i) < (q[j], j));
                            }
                        }
                    }
                }
            }
        }
    }
}
