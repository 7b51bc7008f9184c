//! Ancestry lists: the recursive set of bins whose history determines a
//! bin's load.
//!
//! The ancestry list of bin `b` starts with the balls that had `b` among
//! their choices. Each such ball, placed at time `t`, contributes its other
//! bins, and recursively the balls that chose those bins up to time `t`.
//! The size of a list is measured in distinct bins, counting each bin once.
//!
//! Sizes are computed offline from the recorded log rather than during
//! placement, by a backward traversal that expands each bin's list of
//! choosing balls at most once per query. Expansion is monotone in the time
//! limit, so re-reaching a bin with a later limit only processes the balls
//! in between.

use crate::choosers::ChoiceSet;

/// One ball's recorded choices. `time_index` equals `ball_id` in this
/// sequential process; both are kept because reports display them.
#[derive(Debug, Clone)]
pub struct AncestryRecord {
    pub ball_id: u64,
    pub time_index: u64,
    pub choices: ChoiceSet,
}

/// The full choice log of a tracked trial.
#[derive(Debug, Clone)]
pub struct AncestryLog {
    n: usize,
    records: Vec<AncestryRecord>,
}

impl AncestryLog {
    pub(crate) fn new(n: usize, capacity: usize) -> Self {
        AncestryLog {
            n,
            records: Vec::with_capacity(capacity),
        }
    }

    pub(crate) fn record(&mut self, ball_id: u64, choices: &ChoiceSet) {
        self.records.push(AncestryRecord {
            ball_id,
            time_index: ball_id,
            choices: choices.clone(),
        });
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn records(&self) -> &[AncestryRecord] {
        &self.records
    }

    /// Ancestry-list size (distinct bins, including the bin itself) for
    /// every bin at the end of the run.
    pub fn bin_sizes(&self) -> Vec<u32> {
        let n = self.n;
        // chosen_by[b]: indices of records that include bin b, ascending in
        // time because records are appended in placement order.
        let mut chosen_by: Vec<Vec<u32>> = vec![Vec::new(); n];
        for (idx, rec) in self.records.iter().enumerate() {
            for &b in &rec.choices.bins {
                let list = &mut chosen_by[b as usize];
                // A with-replacement ball may list a bin twice.
                if list.last() != Some(&(idx as u32)) {
                    list.push(idx as u32);
                }
            }
        }

        // Generation-stamped scratch arrays so per-query state costs O(1)
        // to reset.
        let mut stamp = vec![0u32; n];
        let mut expanded = vec![0u32; n];
        let mut query = 0u32;
        let mut stack: Vec<(u32, u32)> = Vec::new();
        let mut sizes = Vec::with_capacity(n);

        // Prefix length of chosen_by[bin] covering times <= t.
        let prefix_len = |bin: usize, t: u64| -> u32 {
            chosen_by[bin].partition_point(|&ridx| self.records[ridx as usize].time_index <= t)
                as u32
        };

        for target in 0..n {
            query += 1;
            let mut size = 0u32;
            stack.push((target as u32, chosen_by[target].len() as u32));
            while let Some((bin, want)) = stack.pop() {
                let b = bin as usize;
                if stamp[b] != query {
                    stamp[b] = query;
                    expanded[b] = 0;
                    size += 1;
                }
                let have = expanded[b];
                if want <= have {
                    continue;
                }
                expanded[b] = want;
                for &ridx in &chosen_by[b][have as usize..want as usize] {
                    let rec = &self.records[ridx as usize];
                    for &other in &rec.choices.bins {
                        if other != bin {
                            stack.push((other, prefix_len(other as usize, rec.time_index)));
                        }
                    }
                }
            }
            sizes.push(size);
        }
        sizes
    }
}
