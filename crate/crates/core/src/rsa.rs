//! The controller: modulation by reach, slot demand plus guard band, and
//! first-fit core/spectrum assignment along an agent-chosen path.

use std::fmt;
use std::path::Path as FsPath;
use std::str::FromStr;

use thiserror::Error;

#[cfg(test)]
use crate::grid::LinkSharing;
use crate::grid::{Allocation, GridError, SpectrumGrid};
use crate::topology::Path;
use crate::traffic::Request;

const DEFAULT_TABLE: &str = include_str!("../data/modulation.tbl");

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RsaError {
    #[error("unsupported bit rate {0} Gbps")]
    UnsupportedBitRate(u32),
    #[error("modulation table line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("modulation table: {0}")]
    Invalid(String),
    #[error("reading modulation table: {0}")]
    Io(String),
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModulationFormat {
    pub name: String,
    pub bit_rate_gbps: u32,
    pub slots: usize,
    pub max_reach_km: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModulationTable {
    rows: Vec<ModulationFormat>,
}

impl Default for ModulationTable {
    fn default() -> Self {
        Self::parse(DEFAULT_TABLE).expect("bundled modulation table is valid")
    }
}

impl ModulationTable {
    pub fn new(rows: Vec<ModulationFormat>) -> Result<Self, RsaError> {
        if rows.is_empty() {
            return Err(RsaError::Invalid("no rows".into()));
        }
        for r in &rows {
            if r.slots == 0 || !(r.max_reach_km.is_finite() && r.max_reach_km > 0.0) {
                return Err(RsaError::Invalid(format!(
                    "{} at {} Gbps needs positive slots and reach",
                    r.name, r.bit_rate_gbps
                )));
            }
        }
        // per bit rate, a shorter reach must not cost more slots
        for a in &rows {
            for b in &rows {
                if a.bit_rate_gbps != b.bit_rate_gbps || std::ptr::eq(a, b) {
                    continue;
                }
                if a.max_reach_km == b.max_reach_km {
                    return Err(RsaError::Invalid(format!(
                        "{} and {} share reach at {} Gbps",
                        a.name, b.name, a.bit_rate_gbps
                    )));
                }
                if a.max_reach_km < b.max_reach_km && a.slots > b.slots {
                    return Err(RsaError::Invalid(format!(
                        "{} has shorter reach but more slots than {} at {} Gbps",
                        a.name, b.name, a.bit_rate_gbps
                    )));
                }
            }
        }
        Ok(ModulationTable { rows })
    }

    /// Parses `<format> <bit_rate_gbps> <slots> <reach_km>` lines; `#` starts a comment line.
    pub fn parse(text: &str) -> Result<Self, RsaError> {
        let mut rows = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| RsaError::Parse {
                line: n + 1,
                message,
            };
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 4 {
                return Err(err(format!("expected 4 fields, found {}", f.len())));
            }
            rows.push(ModulationFormat {
                name: f[0].to_string(),
                bit_rate_gbps: f[1].parse().map_err(|e| err(format!("bit rate: {e}")))?,
                slots: f[2].parse().map_err(|e| err(format!("slots: {e}")))?,
                max_reach_km: f[3]
                    .replace(',', "")
                    .parse()
                    .map_err(|e| err(format!("reach: {e}")))?,
            });
        }
        Self::new(rows)
    }

    pub fn load(path: impl AsRef<FsPath>) -> Result<Self, RsaError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| RsaError::Io(format!("{}: {e}", path.as_ref().display())))?;
        Self::parse(&text)
    }

    pub fn rows(&self) -> &[ModulationFormat] {
        &self.rows
    }

    pub fn supports(&self, bit_rate_gbps: u32) -> bool {
        self.rows.iter().any(|r| r.bit_rate_gbps == bit_rate_gbps)
    }

    /// Formats that reach `length_km` at this bit rate, best first: fewest
    /// slots, then shortest reach.
    pub fn reachable(
        &self,
        bit_rate_gbps: u32,
        length_km: f64,
    ) -> Result<Vec<&ModulationFormat>, RsaError> {
        if !self.supports(bit_rate_gbps) {
            return Err(RsaError::UnsupportedBitRate(bit_rate_gbps));
        }
        let mut out: Vec<&ModulationFormat> = self
            .rows
            .iter()
            .filter(|r| r.bit_rate_gbps == bit_rate_gbps && r.max_reach_km >= length_km)
            .collect();
        out.sort_by(|a, b| {
            a.slots
                .cmp(&b.slots)
                .then(a.max_reach_km.total_cmp(&b.max_reach_km))
        });
        Ok(out)
    }

    pub fn select(
        &self,
        bit_rate_gbps: u32,
        length_km: f64,
    ) -> Result<Option<&ModulationFormat>, RsaError> {
        Ok(self.reachable(bit_rate_gbps, length_km)?.into_iter().next())
    }
}

/// Which modulation formats the controller may fall back to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ModulationPolicy {
    /// Try every reachable format in preference order until one fits.
    #[default]
    TryAll,
    /// Only the preferred format; block if it does not fit.
    PreferredOnly,
}

impl fmt::Display for ModulationPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModulationPolicy::TryAll => "try-all",
            ModulationPolicy::PreferredOnly => "preferred-only",
        })
    }
}

impl FromStr for ModulationPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "try-all" => Ok(ModulationPolicy::TryAll),
            "preferred-only" => Ok(ModulationPolicy::PreferredOnly),
            _ => Err(format!("unknown modulation policy {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BlockReason {
    NoModulationReach,
    NoSpectrum,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Placement {
    pub format: ModulationFormat,
    pub core: usize,
    pub start: usize,
    pub width: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProvisionOutcome {
    Routed {
        allocation: Allocation,
        format: ModulationFormat,
    },
    Blocked(BlockReason),
}

impl ProvisionOutcome {
    pub fn is_routed(&self) -> bool {
        matches!(self, ProvisionOutcome::Routed { .. })
    }
}

#[derive(Debug, Clone)]
pub struct Controller {
    table: ModulationTable,
    guard_band: usize,
    policy: ModulationPolicy,
}

impl Controller {
    pub fn new(table: ModulationTable, guard_band: usize, policy: ModulationPolicy) -> Self {
        Controller {
            table,
            guard_band,
            policy,
        }
    }

    pub fn table(&self) -> &ModulationTable {
        &self.table
    }

    pub fn guard_band(&self) -> usize {
        self.guard_band
    }

    /// Where `request` would land on `path`, without touching the grid.
    pub fn probe(
        &self,
        grid: &SpectrumGrid,
        request: &Request,
        path: &Path,
    ) -> Result<Result<Placement, BlockReason>, RsaError> {
        let formats = self
            .table
            .reachable(request.bit_rate_gbps, path.length_km)?;
        if formats.is_empty() {
            return Ok(Err(BlockReason::NoModulationReach));
        }
        let tries = match self.policy {
            ModulationPolicy::TryAll => formats.len(),
            ModulationPolicy::PreferredOnly => 1,
        };
        for format in formats.into_iter().take(tries) {
            let width = format.slots + self.guard_band;
            if let Some((core, start)) = grid.first_fit(&path.hops, width) {
                return Ok(Ok(Placement {
                    format: format.clone(),
                    core,
                    start,
                    width,
                }));
            }
        }
        Ok(Err(BlockReason::NoSpectrum))
    }

    pub fn provision(
        &self,
        grid: &mut SpectrumGrid,
        request: &Request,
        path: &Path,
    ) -> Result<ProvisionOutcome, RsaError> {
        match self.probe(grid, request, path)? {
            Err(reason) => Ok(ProvisionOutcome::Blocked(reason)),
            Ok(p) => {
                let allocation = Allocation {
                    request_id: request.id,
                    hops: path.hops.clone(),
                    core: p.core,
                    start: p.start,
                    width: p.width,
                };
                grid.allocate(allocation.clone())?;
                Ok(ProvisionOutcome::Routed {
                    allocation,
                    format: p.format,
                })
            }
        }
    }

    pub fn teardown(
        &self,
        grid: &mut SpectrumGrid,
        request_id: u64,
    ) -> Result<Allocation, RsaError> {
        Ok(grid.release(request_id)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::Topology;

    fn request(id: u64, rate: u32) -> Request {
        Request {
            id,
            source: 0,
            destination: 1,
            bit_rate_gbps: rate,
            arrival: 0.0,
            holding: 1.0,
        }
    }

    #[test]
    fn default_table_has_nine_rows() {
        let t = ModulationTable::default();
        assert_eq!(t.rows().len(), 9);
        for rate in [25, 50, 100] {
            assert_eq!(
                t.rows().iter().filter(|r| r.bit_rate_gbps == rate).count(),
                3
            );
        }
    }

    #[test]
    fn selects_by_reach() {
        let t = ModulationTable::default();
        let f = t.select(100, 900.0).unwrap().unwrap();
        assert_eq!((f.name.as_str(), f.slots), ("64-QAM", 2));
        let f = t.select(100, 5540.0).unwrap().unwrap();
        assert_eq!((f.name.as_str(), f.slots), ("QPSK", 4));
        assert_eq!(t.select(100, 5540.5).unwrap(), None);
        assert_eq!(t.select(25, 23000.0).unwrap(), None);
        assert_eq!(t.select(40, 10.0), Err(RsaError::UnsupportedBitRate(40)));
        // 64-QAM and 16-QAM both need 2 slots for 100G at 916 km: prefer 64-QAM
        assert_eq!(t.select(100, 916.0).unwrap().unwrap().name, "64-QAM");
        assert_eq!(t.select(100, 917.0).unwrap().unwrap().name, "16-QAM");
    }

    #[test]
    fn rejects_inconsistent_tables() {
        assert!(ModulationTable::parse("A 25 1 100\nB 25 2 50\n").is_err());
        assert!(ModulationTable::parse("A 25 1 100\nB 25 1 100\n").is_err());
        assert!(ModulationTable::parse("A 25 0 100\n").is_err());
        assert!(matches!(
            ModulationTable::parse("A 25 1\n"),
            Err(RsaError::Parse { line: 1, .. })
        ));
        assert!(ModulationTable::parse("").is_err());
    }

    #[test]
    fn provisions_on_empty_nsfnet() {
        let topo = Topology::nsfnet();
        let mut grid = SpectrumGrid::for_topology(&topo, 4, 128, LinkSharing::Bidirectional);
        let ctl = Controller::new(ModulationTable::default(), 1, ModulationPolicy::TryAll);
        let path = topo
            .path_from_nodes(vec![topo.node("12").unwrap(), topo.node("14").unwrap()])
            .unwrap();
        match ctl.provision(&mut grid, &request(1, 100), &path).unwrap() {
            ProvisionOutcome::Routed { allocation, format } => {
                assert_eq!(format.name, "64-QAM");
                assert_eq!(
                    (allocation.core, allocation.start, allocation.width),
                    (0, 0, 3)
                );
            }
            other => panic!("expected routed, got {other:?}"),
        }
        assert_eq!(grid.occupied_total(), 3);
        ctl.teardown(&mut grid, 1).unwrap();
        assert!(grid.is_empty());
        assert!(ctl.teardown(&mut grid, 1).is_err());
    }

    #[test]
    fn blocks_without_spectrum_or_reach() {
        let topo = Topology::from_edges([(1, 2, 23000.0)]).unwrap();
        let mut grid = SpectrumGrid::for_topology(&topo, 1, 8, LinkSharing::Bidirectional);
        let ctl = Controller::new(ModulationTable::default(), 1, ModulationPolicy::TryAll);
        let path = topo.path_from_nodes(vec![0, 1]).unwrap();
        assert_eq!(
            ctl.provision(&mut grid, &request(1, 25), &path).unwrap(),
            ProvisionOutcome::Blocked(BlockReason::NoModulationReach)
        );

        let topo = Topology::from_edges([(1, 2, 100.0)]).unwrap();
        let mut grid = SpectrumGrid::for_topology(&topo, 2, 4, LinkSharing::Bidirectional);
        let path = topo.path_from_nodes(vec![0, 1]).unwrap();
        for (i, core) in [0, 1].into_iter().enumerate() {
            grid.allocate(Allocation {
                request_id: 100 + i as u64,
                hops: path.hops.clone(),
                core,
                start: 0,
                width: 4,
            })
            .unwrap();
        }
        let before = grid.clone();
        assert_eq!(
            ctl.provision(&mut grid, &request(1, 25), &path).unwrap(),
            ProvisionOutcome::Blocked(BlockReason::NoSpectrum)
        );
        assert_eq!(grid, before);
    }

    #[test]
    fn fallback_policies_agree() {
        // formats are tried narrowest first, so a wider fallback can only fit
        // where the preferred one already did
        let topo = Topology::from_edges([(1, 2, 500.0)]).unwrap();
        let path = topo.path_from_nodes(vec![0, 1]).unwrap();
        let table = ModulationTable::parse("WIDE 100 3 5000\nNARROW 100 1 1000\n").unwrap();
        let try_all = Controller::new(table.clone(), 0, ModulationPolicy::TryAll);
        let strict = Controller::new(table, 0, ModulationPolicy::PreferredOnly);
        let mut grid = SpectrumGrid::for_topology(&topo, 1, 4, LinkSharing::Bidirectional);
        for start in [0, 2] {
            let req = request(1, 100);
            let a = try_all.probe(&grid, &req, &path).unwrap();
            assert_eq!(a, strict.probe(&grid, &req, &path).unwrap());
            assert_eq!(a.unwrap().format.name, "NARROW");
            grid.allocate(Allocation {
                request_id: 10 + start as u64,
                hops: path.hops.clone(),
                core: 0,
                start,
                width: 1,
            })
            .unwrap();
        }
        assert_eq!("try-all".parse(), Ok(ModulationPolicy::TryAll));
        assert_eq!(
            ModulationPolicy::PreferredOnly.to_string(),
            "preferred-only"
        );
    }
}
