//! Transition storage with in-place argmax amortization and uniform or
//! prioritized sampling.
//!
//! Each slot stores `(s, a, r, s', gamma', a'_max)`. The `a'_max` field is the
//! best argmax approximation found for the successor state so far; replays
//! recompute it against a candidate set that includes the old value, then
//! write the (never worse) result back.

use rand::Rng;

use crate::error::{Error, Result};
use crate::space::ActionSpace;
use crate::RunRng;

/// One stored experience.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub obs: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_obs: Vec<f64>,
    /// Discount used for bootstrapping: `0` at a true terminal, `gamma`
    /// otherwise (including time-limit truncation).
    pub next_discount: f64,
    /// Best-so-far argmax approximation at `next_obs`.
    pub next_amax: Vec<f64>,
}

/// Handle to a stored transition. Slots are recycled when the ring wraps;
/// the generation distinguishes a handle from a later occupant of the same
/// index.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SlotId {
    index: u32,
    generation: u32,
}

impl SlotId {
    pub fn index(&self) -> usize {
        self.index as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReplayMode {
    Uniform,
    Prioritized,
}

/// Proportional prefix-sum tree over per-slot priorities.
///
/// Stored values are the priorities already raised to the alpha exponent;
/// sampling probability is proportional to the stored value.
#[derive(Clone, Debug)]
pub struct SumTree {
    capacity: usize,
    tree: Vec<f64>,
}

impl SumTree {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0);
        SumTree {
            capacity,
            tree: vec![0.0; 2 * capacity],
        }
    }

    pub fn total(&self) -> f64 {
        self.tree[1]
    }

    pub fn get(&self, idx: usize) -> f64 {
        self.tree[self.capacity + idx]
    }

    pub fn set(&mut self, idx: usize, value: f64) {
        debug_assert!(idx < self.capacity && value >= 0.0);
        let mut i = self.capacity + idx;
        let delta = value - self.tree[i];
        while i >= 1 {
            self.tree[i] += delta;
            i /= 2;
        }
    }

    /// Finds the leaf holding prefix mass `u` (0 <= u < total). Zero-mass
    /// leaves are never selected while any positive mass exists.
    pub fn find(&self, u: f64) -> usize {
        let mut i = 1usize;
        let mut u = u;
        while i < self.capacity {
            let left = 2 * i;
            if u < self.tree[left] || self.tree[left + 1] == 0.0 {
                i = left;
            } else {
                u -= self.tree[left];
                i = left + 1;
            }
        }
        i - self.capacity
    }
}

/// Ring buffer of transitions with a priority index.
pub struct ReplayMemory {
    capacity: usize,
    start_size: usize,
    mode: ReplayMode,
    /// Priority exponent (alpha) and importance exponent (beta).
    alpha: f64,
    beta: f64,
    space: ActionSpace,
    slots: Vec<Transition>,
    generations: Vec<u32>,
    cursor: usize,
    tree: SumTree,
    max_priority: f64,
}

const PRIORITY_FLOOR: f64 = 1e-6;

impl ReplayMemory {
    pub fn new(
        capacity: usize,
        start_size: usize,
        mode: ReplayMode,
        alpha: f64,
        beta: f64,
        space: ActionSpace,
    ) -> Self {
        assert!(capacity > 0 && start_size >= 1);
        ReplayMemory {
            capacity,
            start_size,
            mode,
            alpha,
            beta,
            space,
            slots: Vec::new(),
            generations: vec![0; capacity],
            cursor: 0,
            tree: SumTree::new(capacity),
            max_priority: 1.0,
        }
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn ready(&self) -> bool {
        self.len() >= self.start_size
    }

    /// Stores a transition, overwriting the oldest slot when full. New slots
    /// receive the current maximum priority so they are replayed soon.
    pub fn push(&mut self, mut t: Transition) -> SlotId {
        if !self.space.contains(&t.next_amax) {
            self.space.clamp(&mut t.next_amax);
        }
        let idx = self.cursor;
        if self.slots.len() < self.capacity {
            self.slots.push(t);
        } else {
            self.slots[idx] = t;
            self.generations[idx] = self.generations[idx].wrapping_add(1);
        }
        self.cursor = (self.cursor + 1) % self.capacity;
        self.tree.set(idx, self.max_priority.powf(self.alpha));
        SlotId {
            index: idx as u32,
            generation: self.generations[idx],
        }
    }

    pub fn get(&self, slot: SlotId) -> Option<&Transition> {
        if self.is_stale(slot) {
            return None;
        }
        self.slots.get(slot.index())
    }

    /// Direct read of a slot by raw index (diagnostics).
    pub fn peek(&self, index: usize) -> Option<&Transition> {
        self.slots.get(index)
    }

    /// Handles to every currently stored transition.
    pub fn slot_ids(&self) -> Vec<SlotId> {
        (0..self.slots.len())
            .map(|i| SlotId {
                index: i as u32,
                generation: self.generations[i],
            })
            .collect()
    }

    fn is_stale(&self, slot: SlotId) -> bool {
        slot.index() >= self.slots.len() || self.generations[slot.index()] != slot.generation
    }

    /// Samples a batch of slots with importance weights.
    ///
    /// Prioritized mode selects proportionally to `priority^alpha` and
    /// returns `w_i = (N * P(i))^(-beta)` normalized so the largest weight in
    /// the batch is 1. Uniform mode returns unit weights.
    pub fn sample_batch(&self, n: usize, rng: &mut RunRng) -> Result<(Vec<SlotId>, Vec<f64>)> {
        if !self.ready() {
            return Err(Error::ReplayTooSmall {
                len: self.len(),
                start: self.start_size,
            });
        }
        let len = self.len();
        let mut slots = Vec::with_capacity(n);
        match self.mode {
            ReplayMode::Uniform => {
                for _ in 0..n {
                    let idx = rng.random_range(0..len);
                    slots.push(SlotId {
                        index: idx as u32,
                        generation: self.generations[idx],
                    });
                }
                Ok((slots, vec![1.0; n]))
            }
            ReplayMode::Prioritized => {
                let total = self.tree.total();
                let mut weights = Vec::with_capacity(n);
                for _ in 0..n {
                    let u = rng.random_range(0.0..total);
                    let idx = self.tree.find(u);
                    let p = self.tree.get(idx) / total;
                    weights.push((len as f64 * p).powf(-self.beta));
                    slots.push(SlotId {
                        index: idx as u32,
                        generation: self.generations[idx],
                    });
                }
                let w_max = weights.iter().cloned().fold(f64::MIN, f64::max);
                for w in &mut weights {
                    *w /= w_max;
                }
                Ok((slots, weights))
            }
        }
    }

    /// Replaces the stored argmax approximation for a slot. Stale handles are
    /// ignored with a warning; out-of-box actions are clamped.
    pub fn update_amax(&mut self, slot: SlotId, amax: &[f64]) {
        if self.is_stale(slot) {
            log::warn!("update_amax on stale slot {slot:?}; ignored");
            return;
        }
        let mut amax = amax.to_vec();
        if !self.space.contains(&amax) {
            self.space.clamp(&mut amax);
        }
        self.slots[slot.index()].next_amax = amax;
    }

    /// Sets a slot's priority from its TD error: `|td| + 1e-6`.
    pub fn update_priority(&mut self, slot: SlotId, td_error: f64) {
        if self.is_stale(slot) {
            log::warn!("update_priority on stale slot {slot:?}; ignored");
            return;
        }
        let p = td_error.abs() + PRIORITY_FLOOR;
        self.max_priority = self.max_priority.max(p);
        self.tree.set(slot.index(), p.powf(self.alpha));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng_from_seed;

    fn tr(v: f64) -> Transition {
        Transition {
            obs: vec![v],
            action: vec![0.0],
            reward: v,
            next_obs: vec![v],
            next_discount: 0.99,
            next_amax: vec![0.0],
        }
    }

    fn memory(capacity: usize, mode: ReplayMode) -> ReplayMemory {
        ReplayMemory::new(capacity, 1, mode, 0.6, 0.2, ActionSpace::symmetric(1, 1.0))
    }

    #[test]
    fn ring_overwrites_oldest_when_full() {
        let mut mem = memory(3, ReplayMode::Uniform);
        for i in 0..4 {
            mem.push(tr(i as f64));
        }
        assert_eq!(mem.len(), 3);
        // Slot 0 now holds the fourth transition.
        let ids: Vec<f64> = (0..3)
            .map(|i| mem.slots[i].reward)
            .collect();
        assert_eq!(ids, vec![3.0, 1.0, 2.0]);
    }

    #[test]
    fn stale_slot_after_overwrite_is_ignored() {
        let mut mem = memory(2, ReplayMode::Uniform);
        let first = mem.push(tr(0.0));
        mem.push(tr(1.0));
        mem.push(tr(2.0)); // overwrites slot 0
        assert!(mem.get(first).is_none());
        mem.update_amax(first, &[0.5]); // must not touch the new occupant
        assert_eq!(mem.slots[0].next_amax, vec![0.0]);
    }

    #[test]
    fn sampling_before_start_size_errors() {
        let mem = ReplayMemory::new(
            10,
            5,
            ReplayMode::Uniform,
            0.6,
            0.2,
            ActionSpace::symmetric(1, 1.0),
        );
        let mut rng = rng_from_seed(0);
        assert!(matches!(
            mem.sample_batch(2, &mut rng),
            Err(Error::ReplayTooSmall { .. })
        ));
    }

    #[test]
    fn equal_priorities_sample_roughly_uniformly() {
        let mut mem = memory(4, ReplayMode::Prioritized);
        let slots: Vec<SlotId> = (0..4).map(|i| mem.push(tr(i as f64))).collect();
        for s in &slots {
            mem.update_priority(*s, 1.0);
        }
        let mut rng = rng_from_seed(7);
        let mut counts = [0usize; 4];
        for _ in 0..10_000 {
            let (ids, weights) = mem.sample_batch(1, &mut rng).unwrap();
            counts[ids[0].index()] += 1;
            assert_eq!(weights[0], 1.0);
        }
        for c in counts {
            let f = c as f64 / 10_000.0;
            assert!((f - 0.25).abs() < 0.03, "frequency {f}");
        }
    }

    #[test]
    fn zero_priority_slot_is_never_sampled() {
        let mut tree = SumTree::new(4);
        tree.set(0, 0.0);
        tree.set(1, 1.0);
        tree.set(2, 0.0);
        tree.set(3, 2.0);
        let mut rng = rng_from_seed(1);
        for _ in 0..1000 {
            let u = rng.random_range(0.0..tree.total());
            let idx = tree.find(u);
            assert!(idx == 1 || idx == 3, "picked zero-mass slot {idx}");
        }
    }

    #[test]
    fn selection_frequency_tracks_priority_ratio() {
        // Raw priorities chosen so p^alpha has a 3:1 ratio.
        let mut mem = memory(2, ReplayMode::Prioritized);
        let a = mem.push(tr(0.0));
        let b = mem.push(tr(1.0));
        let alpha = 0.6;
        let p_hi = 3.0_f64.powf(1.0 / alpha);
        mem.update_priority(a, p_hi - PRIORITY_FLOOR);
        mem.update_priority(b, 1.0 - PRIORITY_FLOOR);
        let mut rng = rng_from_seed(13);
        let mut counts = [0usize; 2];
        for _ in 0..10_000 {
            let (ids, _) = mem.sample_batch(1, &mut rng).unwrap();
            counts[ids[0].index()] += 1;
        }
        let ratio = counts[0] as f64 / counts[1] as f64;
        assert!((ratio - 3.0).abs() < 0.3, "ratio {ratio}");
    }

    #[test]
    fn importance_weights_bounded_in_unit_interval() {
        let mut mem = memory(16, ReplayMode::Prioritized);
        let mut rng = rng_from_seed(3);
        for i in 0..16 {
            let s = mem.push(tr(i as f64));
            mem.update_priority(s, rng.random_range(0.0..2.0));
        }
        for _ in 0..100 {
            let (_, weights) = mem.sample_batch(8, &mut rng).unwrap();
            assert!(weights.iter().any(|w| (*w - 1.0).abs() < 1e-12));
            for w in weights {
                assert!(w > 0.0 && w <= 1.0 + 1e-12, "weight {w}");
            }
        }
    }

    #[test]
    fn zero_td_error_keeps_slot_sampleable() {
        let mut mem = memory(2, ReplayMode::Prioritized);
        let a = mem.push(tr(0.0));
        mem.push(tr(1.0));
        mem.update_priority(a, 0.0);
        assert!(mem.tree.get(0) > 0.0);
    }

    #[test]
    fn amax_outside_box_is_clamped() {
        let mut mem = memory(2, ReplayMode::Uniform);
        let s = mem.push(tr(0.0));
        mem.update_amax(s, &[3.0]);
        assert_eq!(mem.get(s).unwrap().next_amax, vec![1.0]);
    }
}
