use std::collections::HashMap;

/// Recency memory over `(customer, route id)` attributes.
///
/// An attribute added at iteration `t` with tenure `k` expires at `t + k`:
/// it is tabu at `t + k - 1` and free from `t + k` on.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TabuList {
    entries: HashMap<(usize, u32), u64>,
}

impl TabuList {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, customer: usize, route_id: u32, iteration: u64, tenure: u64) {
        let expiry = iteration + tenure;
        let slot = self.entries.entry((customer, route_id)).or_insert(expiry);
        *slot = (*slot).max(expiry);
    }

    /// Expiry of an attribute that is still active at `iteration`.
    pub fn active_until(&self, customer: usize, route_id: u32, iteration: u64) -> Option<u64> {
        self.entries
            .get(&(customer, route_id))
            .copied()
            .filter(|&e| iteration < e)
    }

    pub fn is_tabu(&self, customer: usize, route_id: u32, iteration: u64) -> bool {
        self.active_until(customer, route_id, iteration).is_some()
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }

    /// Drops expired attributes; purely a memory bound, tabu status is
    /// unaffected.
    pub fn purge(&mut self, iteration: u64) {
        self.entries.retain(|_, e| iteration < *e);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
