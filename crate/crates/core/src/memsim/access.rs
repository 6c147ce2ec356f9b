/// Memory space targeted by a warp request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Space {
    Global,
    Shared,
    Constant,
}

/// One lane's part of a request: a byte address and an access width.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Lane {
    pub addr: u64,
    pub width: u32,
}

impl Lane {
    pub fn new(addr: u64, width: u32) -> Self {
        assert!(width > 0, "zero-width lane access");
        Lane { addr, width }
    }
}

/// A warp-wide request. `None` marks an inactive lane.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WarpAccess {
    space: Space,
    lanes: Vec<Option<Lane>>,
}

impl WarpAccess {
    pub fn new(space: Space, lanes: impl IntoIterator<Item = Option<Lane>>) -> Self {
        WarpAccess {
            space,
            lanes: lanes.into_iter().collect(),
        }
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn lanes(&self) -> &[Option<Lane>] {
        &self.lanes
    }

    pub fn active(&self) -> impl Iterator<Item = &Lane> + '_ {
        self.lanes.iter().flatten()
    }

    pub fn active_count(&self) -> usize {
        self.active().count()
    }
}
