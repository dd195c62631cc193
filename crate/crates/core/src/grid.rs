//! Per-link, per-core spectral slot occupancy.
//!
//! Every undirected link is two independent directed links. Each
//! (directed link, core) pair is a bitmap of `slots_per_core` slots stored in
//! `u64` words, alongside a running count of occupied slots so congestion is
//! O(hops x cores).

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::topology::{DirectedLink, Topology};

pub type RequestId = u64;

/// Paths whose mean occupancy is at or above this fraction are `Level2`.
pub const CONGESTION_THRESHOLD: f64 = 0.3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("request {0} overlaps occupied spectrum")]
    Overlap(RequestId),
    #[error("request {0} already holds an allocation")]
    DuplicateRequest(RequestId),
    #[error("request {0} has no active allocation")]
    UnknownRequest(RequestId),
    #[error("allocation for request {0} is outside the grid")]
    OutOfRange(RequestId),
    #[error("congestion fraction {0} outside [0, 1]")]
    FractionOutOfRange(f64),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Allocation {
    pub request_id: RequestId,
    pub hops: Vec<DirectedLink>,
    pub core: usize,
    pub start: usize,
    /// Slots occupied, guard band included.
    pub width: usize,
}

impl Allocation {
    pub fn end(&self) -> usize {
        self.start + self.width
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CongestionLevel {
    Level1,
    Level2,
}

impl CongestionLevel {
    pub fn from_fraction(fraction: f64) -> Result<Self, GridError> {
        if !(0.0..=1.0).contains(&fraction) {
            return Err(GridError::FractionOutOfRange(fraction));
        }
        Ok(if fraction < CONGESTION_THRESHOLD {
            CongestionLevel::Level1
        } else {
            CongestionLevel::Level2
        })
    }

    pub fn index(self) -> usize {
        match self {
            CongestionLevel::Level1 => 0,
            CongestionLevel::Level2 => 1,
        }
    }

    pub const ALL: [CongestionLevel; 2] = [CongestionLevel::Level1, CongestionLevel::Level2];
}

/// Whether the two directions of a link have their own spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LinkSharing {
    /// A lightpath occupies both directions of every hop.
    #[default]
    Bidirectional,
    /// Each direction is an independent fibre.
    Independent,
}

impl std::fmt::Display for LinkSharing {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LinkSharing::Bidirectional => "bidirectional",
            LinkSharing::Independent => "independent",
        })
    }
}

impl std::str::FromStr for LinkSharing {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bidirectional" => Ok(LinkSharing::Bidirectional),
            "independent" => Ok(LinkSharing::Independent),
            _ => Err(format!("unknown link sharing {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumGrid {
    sharing: LinkSharing,
    links: usize,
    cores: usize,
    slots: usize,
    words: usize,
    bits: Vec<u64>,
    occupied: Vec<u32>,
    active: BTreeMap<RequestId, Allocation>,
}

impl SpectrumGrid {
    /// Grid with independent directions over `directed_links` links.
    pub fn new(directed_links: usize, cores: usize, slots: usize) -> Self {
        Self::with_sharing(directed_links, cores, slots, LinkSharing::Independent)
    }

    pub fn with_sharing(
        directed_links: usize,
        cores: usize,
        slots: usize,
        sharing: LinkSharing,
    ) -> Self {
        let words = slots.div_ceil(64);
        let spectra = match sharing {
            LinkSharing::Independent => directed_links,
            LinkSharing::Bidirectional => directed_links.div_ceil(2),
        };
        SpectrumGrid {
            sharing,
            links: directed_links,
            cores,
            slots,
            words,
            bits: vec![0; spectra * cores * words],
            occupied: vec![0; spectra * cores],
            active: BTreeMap::new(),
        }
    }

    pub fn for_topology(
        topology: &Topology,
        cores: usize,
        slots: usize,
        sharing: LinkSharing,
    ) -> Self {
        Self::with_sharing(topology.directed_link_count(), cores, slots, sharing)
    }

    pub fn sharing(&self) -> LinkSharing {
        self.sharing
    }

    pub fn cores(&self) -> usize {
        self.cores
    }

    pub fn slots_per_core(&self) -> usize {
        self.slots
    }

    pub fn directed_links(&self) -> usize {
        self.links
    }

    fn spectrum(&self, link: DirectedLink) -> usize {
        match self.sharing {
            LinkSharing::Independent => link.index(),
            LinkSharing::Bidirectional => link.undirected(),
        }
    }

    fn lane(&self, link: DirectedLink, core: usize) -> usize {
        self.spectrum(link) * self.cores + core
    }

    fn words(&self, link: DirectedLink, core: usize) -> &[u64] {
        let base = self.lane(link, core) * self.words;
        &self.bits[base..base + self.words]
    }

    pub fn is_occupied(&self, link: DirectedLink, core: usize, slot: usize) -> bool {
        self.words(link, core)[slot / 64] >> (slot % 64) & 1 == 1
    }

    pub fn occupied_in(&self, link: DirectedLink, core: usize) -> usize {
        self.occupied[self.lane(link, core)] as usize
    }

    pub fn occupied_total(&self) -> usize {
        self.occupied.iter().map(|&c| c as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty() && self.occupied.iter().all(|&c| c == 0)
    }

    pub fn active(&self) -> impl Iterator<Item = &Allocation> {
        self.active.values()
    }

    pub fn active_count(&self) -> usize {
        self.active.len()
    }

    /// Lowest core, then lowest start slot, with `width` contiguous slots free
    /// on that core along every hop.
    pub fn first_fit(&self, hops: &[DirectedLink], width: usize) -> Option<(usize, usize)> {
        if width == 0 || width > self.slots || hops.is_empty() {
            return None;
        }
        let mut union = vec![0u64; self.words];
        for core in 0..self.cores {
            union.iter_mut().for_each(|w| *w = 0);
            for &hop in hops {
                for (u, w) in union.iter_mut().zip(self.words(hop, core)) {
                    *u |= *w;
                }
            }
            let mut run = 0;
            for slot in 0..self.slots {
                if union[slot / 64] >> (slot % 64) & 1 == 0 {
                    run += 1;
                    if run == width {
                        return Some((core, slot + 1 - width));
                    }
                } else {
                    run = 0;
                }
            }
        }
        None
    }

    fn range_free(&self, hops: &[DirectedLink], core: usize, start: usize, end: usize) -> bool {
        hops.iter()
            .all(|&h| (start..end).all(|s| !self.is_occupied(h, core, s)))
    }

    pub fn allocate(&mut self, allocation: Allocation) -> Result<(), GridError> {
        let id = allocation.request_id;
        if self.active.contains_key(&id) {
            return Err(GridError::DuplicateRequest(id));
        }
        if allocation.width == 0
            || allocation.core >= self.cores
            || allocation.end() > self.slots
            || allocation
                .hops
                .iter()
                .any(|h| h.index() >= self.directed_links())
        {
            return Err(GridError::OutOfRange(id));
        }
        if !self.range_free(
            &allocation.hops,
            allocation.core,
            allocation.start,
            allocation.end(),
        ) {
            return Err(GridError::Overlap(id));
        }
        self.set_range(&allocation, true);
        self.active.insert(id, allocation);
        Ok(())
    }

    pub fn release(&mut self, request_id: RequestId) -> Result<Allocation, GridError> {
        let allocation = self
            .active
            .remove(&request_id)
            .ok_or(GridError::UnknownRequest(request_id))?;
        self.set_range(&allocation, false);
        Ok(allocation)
    }

    fn set_range(&mut self, a: &Allocation, occupied: bool) {
        for &hop in &a.hops {
            let lane = self.lane(hop, a.core);
            let base = lane * self.words;
            for slot in a.start..a.end() {
                let w = &mut self.bits[base + slot / 64];
                if occupied {
                    *w |= 1 << (slot % 64);
                } else {
                    *w &= !(1 << (slot % 64));
                }
            }
            if occupied {
                self.occupied[lane] += a.width as u32;
            } else {
                self.occupied[lane] -= a.width as u32;
            }
        }
    }

    /// Mean over (hop, core) of occupied / slots_per_core. A grid without
    /// slots counts as fully congested.
    pub fn path_congestion(&self, hops: &[DirectedLink]) -> f64 {
        if self.slots == 0 || self.cores == 0 {
            return 1.0;
        }
        if hops.is_empty() {
            return 0.0;
        }
        let used: usize = hops
            .iter()
            .flat_map(|&h| (0..self.cores).map(move |c| (h, c)))
            .map(|(h, c)| self.occupied_in(h, c))
            .sum();
        used as f64 / (hops.len() * self.cores * self.slots) as f64
    }

    /// Mean occupancy over every link spectrum and core.
    pub fn network_congestion(&self) -> f64 {
        if self.slots == 0 || self.occupied.is_empty() {
            return 1.0;
        }
        self.occupied_total() as f64 / (self.occupied.len() * self.slots) as f64
    }

    /// Run-length-encoded occupancy, one line per (link spectrum, core):
    /// `<from> <to> <core> F<n> U<n> ...` with runs of free (`F`) and used
    /// (`U`) slots from slot 0. Shared spectra are listed once, in the
    /// forward direction.
    pub fn snapshot(&self, topology: &Topology) -> String {
        let mut out = String::new();
        let step = match self.sharing {
            LinkSharing::Independent => 1,
            LinkSharing::Bidirectional => 2,
        };
        for l in (0..self.directed_links()).step_by(step) {
            let link = DirectedLink(l as u32);
            let (from, to) = topology.endpoints(link);
            for core in 0..self.cores {
                let _ = write!(
                    out,
                    "{} {} {}",
                    topology.label(from),
                    topology.label(to),
                    core
                );
                let mut slot = 0;
                while slot < self.slots {
                    let used = self.is_occupied(link, core, slot);
                    let mut run = 0;
                    while slot < self.slots && self.is_occupied(link, core, slot) == used {
                        run += 1;
                        slot += 1;
                    }
                    let _ = write!(out, " {}{}", if used { 'U' } else { 'F' }, run);
                }
                out.push('\n');
            }
        }
        out
    }
}

pub fn congestion_level(fraction: f64) -> Result<CongestionLevel, GridError> {
    CongestionLevel::from_fraction(fraction)
}
