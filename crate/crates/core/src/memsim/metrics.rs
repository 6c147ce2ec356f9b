use std::fmt;

/// Column order of [`Metrics::csv_row`].
pub const METRICS_CSV_HEADER: &str = "gm_transactions,gm_bytes,gm_pixel_reads,sm_access_requests,\
sm_cycles,sm_conflict_excess,cm_requests,cm_broadcast_hits,registers_per_thread,sm_bytes_used";

/// Transaction counters accumulated over one simulated kernel run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Metrics {
    pub gm_transactions: u64,
    pub gm_bytes: u64,
    /// Input-image elements fetched from global memory.
    pub gm_pixel_reads: u64,
    pub sm_access_requests: u64,
    pub sm_cycles: u64,
    /// `sm_cycles - sm_access_requests`
    pub sm_conflict_excess: u64,
    /// Serialized constant-memory requests (one per distinct address).
    pub cm_requests: u64,
    pub cm_broadcast_hits: u64,
    pub registers_per_thread: u64,
    pub sm_bytes_used: u64,
}

impl Metrics {
    /// Sums the counters; the per-thread register and shared-memory
    /// footprints take the maximum.
    pub fn merge(&mut self, other: &Metrics) {
        self.gm_transactions += other.gm_transactions;
        self.gm_bytes += other.gm_bytes;
        self.gm_pixel_reads += other.gm_pixel_reads;
        self.sm_access_requests += other.sm_access_requests;
        self.sm_cycles += other.sm_cycles;
        self.sm_conflict_excess += other.sm_conflict_excess;
        self.cm_requests += other.cm_requests;
        self.cm_broadcast_hits += other.cm_broadcast_hits;
        self.registers_per_thread = self.registers_per_thread.max(other.registers_per_thread);
        self.sm_bytes_used = self.sm_bytes_used.max(other.sm_bytes_used);
    }

    /// Checks the counter invariants.
    pub fn is_consistent(&self) -> bool {
        self.sm_cycles >= self.sm_access_requests
            && self.sm_conflict_excess == self.sm_cycles - self.sm_access_requests
            && self.cm_broadcast_hits <= self.cm_requests
    }

    pub fn csv_row(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Metrics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{},{},{},{},{},{},{},{},{},{}",
            self.gm_transactions,
            self.gm_bytes,
            self.gm_pixel_reads,
            self.sm_access_requests,
            self.sm_cycles,
            self.sm_conflict_excess,
            self.cm_requests,
            self.cm_broadcast_hits,
            self.registers_per_thread,
            self.sm_bytes_used
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_has_one_field_per_header_column() {
        let m = Metrics {
            gm_transactions: 1,
            sm_cycles: 3,
            sm_access_requests: 2,
            sm_conflict_excess: 1,
            ..Default::default()
        };
        assert_eq!(m.csv_row().split(',').count(), METRICS_CSV_HEADER.split(',').count());
        assert!(m.csv_row().starts_with("1,0,0,2,3,1,"));
        assert!(m.is_consistent());
    }

    #[test]
    fn merge_sums_and_maxes() {
        let mut a = Metrics {
            gm_transactions: 2,
            registers_per_thread: 10,
            sm_bytes_used: 100,
            ..Default::default()
        };
        let b = Metrics {
            gm_transactions: 3,
            registers_per_thread: 7,
            sm_bytes_used: 200,
            ..Default::default()
        };
        a.merge(&b);
        assert_eq!(a.gm_transactions, 5);
        assert_eq!(a.registers_per_thread, 10);
        assert_eq!(a.sm_bytes_used, 200);
    }
}
