use crate::error::{Error, Result};

/// Threads a thread block may hold.
pub const MAX_THREADS_PER_TB: usize = 1024;
/// Registers a thread may hold.
pub const MAX_REGISTERS_PER_THREAD: usize = 255;

/// Parameters of the simulated memory hierarchy. Immutable once built.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MemModel {
    bank_count: u32,
    bank_width_bytes: u32,
    elem_width_bytes: u32,
    warp_size: u32,
    gm_segment_bytes: u32,
    sm_capacity_bytes: usize,
    cm_capacity_bytes: usize,
}

impl MemModel {
    /// Kepler-like defaults (32 banks, 32 lanes, 128-byte segments, 48 KiB
    /// shared memory, 64 KiB constant memory) with the given widths.
    pub fn new(bank_width_bytes: u32, elem_width_bytes: u32) -> Result<Self> {
        Self::builder()
            .bank_width(bank_width_bytes)
            .elem_width(elem_width_bytes)
            .build()
    }

    /// 8-byte banks, 4-byte `float` elements.
    pub fn kepler() -> Self {
        Self::new(8, 4).expect("kepler model is valid")
    }

    pub fn builder() -> MemModelBuilder {
        MemModelBuilder {
            model: MemModel {
                bank_count: 32,
                bank_width_bytes: 8,
                elem_width_bytes: 4,
                warp_size: 32,
                gm_segment_bytes: 128,
                sm_capacity_bytes: 49152,
                cm_capacity_bytes: 65536,
            },
        }
    }

    pub fn bank_count(&self) -> u32 {
        self.bank_count
    }
    pub fn bank_width_bytes(&self) -> u32 {
        self.bank_width_bytes
    }
    pub fn elem_width_bytes(&self) -> u32 {
        self.elem_width_bytes
    }
    pub fn warp_size(&self) -> u32 {
        self.warp_size
    }
    pub fn gm_segment_bytes(&self) -> u32 {
        self.gm_segment_bytes
    }
    pub fn sm_capacity_bytes(&self) -> usize {
        self.sm_capacity_bytes
    }
    pub fn cm_capacity_bytes(&self) -> usize {
        self.cm_capacity_bytes
    }

    /// `bank_width / elem_width`; validated at construction.
    pub fn n(&self) -> u32 {
        self.bank_width_bytes / self.elem_width_bytes
    }
}

impl Default for MemModel {
    fn default() -> Self {
        Self::kepler()
    }
}

#[derive(Debug, Clone)]
pub struct MemModelBuilder {
    model: MemModel,
}

impl MemModelBuilder {
    pub fn bank_count(mut self, v: u32) -> Self {
        self.model.bank_count = v;
        self
    }
    pub fn bank_width(mut self, v: u32) -> Self {
        self.model.bank_width_bytes = v;
        self
    }
    pub fn elem_width(mut self, v: u32) -> Self {
        self.model.elem_width_bytes = v;
        self
    }
    pub fn warp_size(mut self, v: u32) -> Self {
        self.model.warp_size = v;
        self
    }
    pub fn gm_segment(mut self, v: u32) -> Self {
        self.model.gm_segment_bytes = v;
        self
    }
    pub fn sm_capacity(mut self, v: usize) -> Self {
        self.model.sm_capacity_bytes = v;
        self
    }
    pub fn cm_capacity(mut self, v: usize) -> Self {
        self.model.cm_capacity_bytes = v;
        self
    }

    pub fn build(self) -> Result<MemModel> {
        let m = self.model;
        if !matches!(m.bank_width_bytes, 4 | 8) {
            return Err(Error::Model(format!(
                "bank width must be 4 or 8 bytes, got {}",
                m.bank_width_bytes
            )));
        }
        ratio(m.bank_width_bytes, m.elem_width_bytes)?;
        if m.bank_count == 0 || m.warp_size == 0 {
            return Err(Error::Model("bank count and warp size must be positive".into()));
        }
        if !m.gm_segment_bytes.is_power_of_two() {
            return Err(Error::Model(format!(
                "segment size {} is not a power of two",
                m.gm_segment_bytes
            )));
        }
        Ok(m)
    }
}

pub(crate) fn ratio(bank: u32, elem: u32) -> Result<u32> {
    if elem == 0 || !bank.is_multiple_of(elem) {
        return Err(Error::Model(format!(
            "bank width {bank} is not a positive multiple of element width {elem}"
        )));
    }
    Ok(bank / elem)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let m = MemModel::kepler();
        assert_eq!(m.bank_count(), 32);
        assert_eq!(m.warp_size(), 32);
        assert_eq!(m.gm_segment_bytes(), 128);
        assert_eq!(m.sm_capacity_bytes(), 49152);
        assert_eq!(m.cm_capacity_bytes(), 65536);
        assert_eq!(m.n(), 2);
    }

    #[test]
    fn rejects_bad_widths() {
        assert!(MemModel::new(6, 4).is_err());
        assert!(MemModel::new(8, 3).is_err());
        assert!(MemModel::new(4, 8).is_err());
        assert!(MemModel::builder().gm_segment(100).build().is_err());
    }
}
