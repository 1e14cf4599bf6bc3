use std::collections::HashMap;

fn ngram_counts(chars: &[char], n: usize) -> HashMap<&[char], usize> {
    let mut counts = HashMap::new();
    if n == 0 || chars.len() < n {
        return counts;
    }
    for gram in chars.windows(n) {
        *counts.entry(gram).or_insert(0) += 1;
    }
    counts
}

// 2PR/(P+R) with P = m/|a|, R = m/|b|
fn f1(matches: usize, total_a: usize, total_b: usize) -> f64 {
    if total_a == 0 || total_b == 0 {
        return 0.0;
    }
    2.0 * matches as f64 / (total_a + total_b) as f64
}

fn f1_from_counts(a: &HashMap<&[char], usize>, b: &HashMap<&[char], usize>) -> f64 {
    let matches: usize = a
        .iter()
        .filter_map(|(gram, &ca)| b.get(gram).map(|&cb| ca.min(cb)))
        .sum();
    f1(matches, a.values().sum(), b.values().sum())
}

/// F1 over clipped multiset character n-gram matches. Zero when either side
/// has no n-gram of length `n`.
pub fn ngram_f1(a: &str, b: &str, n: usize) -> f64 {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    f1_from_counts(&ngram_counts(&a, n), &ngram_counts(&b, n))
}

/// Mean n-gram F1 for n from 1 up to min(4, length of the shorter string).
pub fn chr_sim(a: &str, b: &str) -> f64 {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    chr_sim_chars(&a, &b)
}

pub(crate) fn chr_sim_chars(a: &[char], b: &[char]) -> f64 {
    let max_n = a.len().min(b.len()).min(4);
    if max_n == 0 {
        return 0.0;
    }
    let total: f64 = (1..=max_n)
        .map(|n| f1_from_counts(&ngram_counts(a, n), &ngram_counts(b, n)))
        .sum();
    total / max_n as f64
}

/// [`chr_sim`] of every equal-length window of a text against one reference,
/// with n-gram counts updated as the window slides.
pub(crate) struct WindowScorer {
    text_len: usize,
    reference_len: usize,
    // ids[n - 1][p]: interned id of the n-gram starting at text position p
    ids: Vec<Vec<usize>>,
    // reference[n - 1][id]: occurrences of that n-gram in the reference
    reference: Vec<Vec<usize>>,
}

impl WindowScorer {
    pub fn new(text: &[char], reference: &[char]) -> Self {
        let mut ids = Vec::with_capacity(4);
        let mut counts = Vec::with_capacity(4);
        for n in 1..=4 {
            let mut intern: HashMap<&[char], usize> = HashMap::new();
            let text_ids: Vec<usize> = if text.len() >= n {
                text.windows(n)
                    .map(|g| {
                        let next = intern.len();
                        *intern.entry(g).or_insert(next)
                    })
                    .collect()
            } else {
                Vec::new()
            };
            let mut ref_counts = vec![0; intern.len()];
            if reference.len() >= n {
                for gram in reference.windows(n) {
                    if let Some(&id) = intern.get(gram) {
                        ref_counts[id] += 1;
                    }
                }
            }
            ids.push(text_ids);
            counts.push(ref_counts);
        }
        Self {
            text_len: text.len(),
            reference_len: reference.len(),
            ids,
            reference: counts,
        }
    }

    /// Calls `visit(start, score)` for each window of `len` code points, left to right.
    pub fn for_each_window(&self, len: usize, mut visit: impl FnMut(usize, f64)) {
        if len == 0 || len > self.text_len {
            return;
        }
        let max_n = len.min(self.reference_len).min(4);
        if max_n == 0 {
            (0..=self.text_len - len).for_each(|start| visit(start, 0.0));
            return;
        }
        let mut window: Vec<Vec<usize>> = (0..max_n).map(|k| vec![0; self.reference[k].len()]).collect();
        let mut matches = [0usize; 4];
        let add = |k: usize, id: usize, window: &mut Vec<Vec<usize>>, matches: &mut [usize; 4]| {
            if window[k][id] < self.reference[k][id] {
                matches[k] += 1;
            }
            window[k][id] += 1;
        };
        let remove = |k: usize, id: usize, window: &mut Vec<Vec<usize>>, matches: &mut [usize; 4]| {
            window[k][id] -= 1;
            if window[k][id] < self.reference[k][id] {
                matches[k] -= 1;
            }
        };
        for k in 0..max_n {
            for p in 0..=len - (k + 1) {
                add(k, self.ids[k][p], &mut window, &mut matches);
            }
        }
        let score = |matches: &[usize; 4]| {
            let total: f64 = (1..=max_n)
                .map(|n| f1(matches[n - 1], len - n + 1, self.reference_len - n + 1))
                .sum();
            total / max_n as f64
        };
        visit(0, score(&matches));
        for start in 1..=self.text_len - len {
            for k in 0..max_n {
                let n = k + 1;
                remove(k, self.ids[k][start - 1], &mut window, &mut matches);
                add(k, self.ids[k][start + len - n], &mut window, &mut matches);
            }
            visit(start, score(&matches));
        }
    }
}
