//! Network graph, the NSFNet preset and candidate path computation.
//!
//! Node labels are opaque strings. Internally nodes are dense indices assigned
//! in label order (numeric labels by value first, then the rest by string), so
//! comparing index sequences lexicographically is the same as comparing the
//! label sequences. Every equal-length tie between paths is broken that way.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::path::Path as FsPath;
use std::str::FromStr;

use thiserror::Error;

/// Dense node index.
pub type NodeIx = usize;

const NSFNET: &str = include_str!("../data/nsfnet.topo");

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TopologyError {
    #[error("self-loop on node {0}")]
    SelfLoop(String),
    #[error("duplicate link {0}-{1}")]
    DuplicateLink(String, String),
    #[error("link {a}-{b} has non-positive length {length}")]
    NonPositiveLength { a: String, b: String, length: f64 },
    #[error("topology is disconnected")]
    Disconnected,
    #[error("topology has no links")]
    Empty,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unknown node {0}")]
    UnknownNode(String),
    #[error("source and destination are both {0}")]
    SameEndpoints(String),
    #[error("reading topology file: {0}")]
    Io(String),
}

/// One traversal direction of an undirected link.
///
/// Link `l` stored as `(a, b)` with `a < b` has id `2l` for `a -> b` and
/// `2l + 1` for `b -> a`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DirectedLink(pub u32);

impl DirectedLink {
    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn undirected(self) -> usize {
        (self.0 / 2) as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub a: NodeIx,
    pub b: NodeIx,
    pub length_km: f64,
}

#[derive(Debug, Clone)]
pub struct Topology {
    labels: Vec<String>,
    index: HashMap<String, NodeIx>,
    links: Vec<Link>,
    // neighbour -> (directed link, length), sorted by neighbour index
    adjacency: Vec<Vec<(NodeIx, DirectedLink, f64)>>,
}

fn label_order(a: &str, b: &str) -> Ordering {
    match (a.parse::<u64>(), b.parse::<u64>()) {
        (Ok(x), Ok(y)) => x.cmp(&y).then_with(|| a.cmp(b)),
        (Ok(_), Err(_)) => Ordering::Less,
        (Err(_), Ok(_)) => Ordering::Greater,
        (Err(_), Err(_)) => a.cmp(b),
    }
}

impl Topology {
    /// Builds and validates a topology from `(node_a, node_b, length_km)` triples.
    pub fn from_edges<I, S>(edges: I) -> Result<Self, TopologyError>
    where
        I: IntoIterator<Item = (S, S, f64)>,
        S: ToString,
    {
        let raw: Vec<(String, String, f64)> = edges
            .into_iter()
            .map(|(a, b, l)| (a.to_string(), b.to_string(), l))
            .collect();
        if raw.is_empty() {
            return Err(TopologyError::Empty);
        }

        let mut labels: Vec<String> = raw
            .iter()
            .flat_map(|(a, b, _)| [a.clone(), b.clone()])
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        labels.sort_by(|a, b| label_order(a, b));
        let index: HashMap<String, NodeIx> = labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.clone(), i))
            .collect();

        let mut seen = HashSet::new();
        let mut links = Vec::with_capacity(raw.len());
        for (a, b, length) in &raw {
            if a == b {
                return Err(TopologyError::SelfLoop(a.clone()));
            }
            if !(length.is_finite() && *length > 0.0) {
                return Err(TopologyError::NonPositiveLength {
                    a: a.clone(),
                    b: b.clone(),
                    length: *length,
                });
            }
            let (x, y) = (index[a], index[b]);
            let (lo, hi) = if x < y { (x, y) } else { (y, x) };
            if !seen.insert((lo, hi)) {
                return Err(TopologyError::DuplicateLink(a.clone(), b.clone()));
            }
            links.push(Link {
                a: lo,
                b: hi,
                length_km: *length,
            });
        }

        let mut adjacency = vec![Vec::new(); labels.len()];
        for (l, link) in links.iter().enumerate() {
            let fwd = DirectedLink(2 * l as u32);
            let rev = DirectedLink(2 * l as u32 + 1);
            adjacency[link.a].push((link.b, fwd, link.length_km));
            adjacency[link.b].push((link.a, rev, link.length_km));
        }
        for adj in &mut adjacency {
            adj.sort_by_key(|&(n, _, _)| n);
        }

        let topology = Topology {
            labels,
            index,
            links,
            adjacency,
        };
        if !topology.is_connected() {
            return Err(TopologyError::Disconnected);
        }
        Ok(topology)
    }

    /// Parses the line-oriented `<node_a> <node_b> <length_km>` format.
    pub fn parse(text: &str) -> Result<Self, TopologyError> {
        let mut edges = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(TopologyError::Parse {
                    line: n + 1,
                    message: format!("expected 3 fields, found {}", fields.len()),
                });
            }
            let length = fields[2].parse::<f64>().map_err(|e| TopologyError::Parse {
                line: n + 1,
                message: format!("bad length {:?}: {e}", fields[2]),
            })?;
            edges.push((fields[0], fields[1], length));
        }
        Self::from_edges(edges)
    }

    pub fn load(path: impl AsRef<FsPath>) -> Result<Self, TopologyError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| TopologyError::Io(format!("{}: {e}", path.as_ref().display())))?;
        Self::parse(&text)
    }

    /// The 14-node, 22-link NSFNet.
    pub fn nsfnet() -> Self {
        Self::parse(NSFNET).expect("bundled NSFNet topology is valid")
    }

    pub fn nsfnet_text() -> &'static str {
        NSFNET
    }

    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    pub fn directed_link_count(&self) -> usize {
        2 * self.links.len()
    }

    pub fn label(&self, node: NodeIx) -> &str {
        &self.labels[node]
    }

    pub fn node(&self, label: &str) -> Result<NodeIx, TopologyError> {
        self.index
            .get(label)
            .copied()
            .ok_or_else(|| TopologyError::UnknownNode(label.to_string()))
    }

    /// Length of the link joining two labelled nodes, if any.
    pub fn length(&self, a: &str, b: &str) -> Option<f64> {
        let (a, b) = (self.node(a).ok()?, self.node(b).ok()?);
        self.edge(a, b).map(|(_, len)| len)
    }

    /// Directed link and length for the hop `from -> to`.
    pub fn edge(&self, from: NodeIx, to: NodeIx) -> Option<(DirectedLink, f64)> {
        self.adjacency
            .get(from)?
            .iter()
            .find(|&&(n, _, _)| n == to)
            .map(|&(_, d, l)| (d, l))
    }

    pub fn neighbours(
        &self,
        node: NodeIx,
    ) -> impl Iterator<Item = (NodeIx, DirectedLink, f64)> + '_ {
        self.adjacency[node].iter().copied()
    }

    /// Endpoints `(from, to)` of a directed link.
    pub fn endpoints(&self, link: DirectedLink) -> (NodeIx, NodeIx) {
        let l = &self.links[link.undirected()];
        if link.0.is_multiple_of(2) {
            (l.a, l.b)
        } else {
            (l.b, l.a)
        }
    }

    fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.node_count()];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(n) = stack.pop() {
            for &(m, _, _) in &self.adjacency[n] {
                if !seen[m] {
                    seen[m] = true;
                    stack.push(m);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Builds a [`Path`] from a node sequence, or `None` if some hop is not a link.
    pub fn path_from_nodes(&self, nodes: Vec<NodeIx>) -> Option<Path> {
        let mut hops = Vec::with_capacity(nodes.len().saturating_sub(1));
        let mut length_km = 0.0;
        for w in nodes.windows(2) {
            let (d, l) = self.edge(w[0], w[1])?;
            hops.push(d);
            length_km += l;
        }
        Some(Path {
            nodes,
            hops,
            length_km,
        })
    }

    fn check_pair(&self, source: NodeIx, destination: NodeIx) -> Result<(), TopologyError> {
        for n in [source, destination] {
            if n >= self.node_count() {
                return Err(TopologyError::UnknownNode(n.to_string()));
            }
        }
        if source == destination {
            return Err(TopologyError::SameEndpoints(self.labels[source].clone()));
        }
        Ok(())
    }

    /// Shortest path under the (length, node sequence) order, avoiding the
    /// given nodes and directed hops.
    fn shortest_restricted(
        &self,
        source: NodeIx,
        destination: NodeIx,
        banned_nodes: &[bool],
        banned_hops: &HashSet<(NodeIx, NodeIx)>,
    ) -> Option<Path> {
        let n = self.node_count();
        let mut best: Vec<Option<(f64, Vec<NodeIx>)>> = vec![None; n];
        let mut done = vec![false; n];
        best[source] = Some((0.0, vec![source]));
        loop {
            let mut pick: Option<NodeIx> = None;
            for v in 0..n {
                if done[v] || best[v].is_none() {
                    continue;
                }
                pick = match pick {
                    None => Some(v),
                    Some(u) => {
                        let (du, pu) = best[u].as_ref().unwrap();
                        let (dv, pv) = best[v].as_ref().unwrap();
                        if dv.total_cmp(du).then_with(|| pv.cmp(pu)) == Ordering::Less {
                            Some(v)
                        } else {
                            Some(u)
                        }
                    }
                };
            }
            let u = pick?;
            if u == destination {
                let (_, nodes) = best[u].take().unwrap();
                return self.path_from_nodes(nodes);
            }
            done[u] = true;
            let (du, pu) = best[u].clone().unwrap();
            for &(v, _, len) in &self.adjacency[u] {
                if done[v] || banned_nodes[v] || banned_hops.contains(&(u, v)) {
                    continue;
                }
                let dv = du + len;
                let better = match &best[v] {
                    None => true,
                    Some((old, old_path)) => match dv.total_cmp(old) {
                        Ordering::Less => true,
                        Ordering::Greater => false,
                        Ordering::Equal => {
                            // candidate path is pu + [v]; compare with old_path
                            let mut cand = pu.clone();
                            cand.push(v);
                            cand < *old_path
                        }
                    },
                };
                if better {
                    let mut p = pu.clone();
                    p.push(v);
                    best[v] = Some((dv, p));
                }
            }
        }
    }

    /// Dijkstra shortest path with lexicographic tie-break.
    pub fn shortest_path(
        &self,
        source: NodeIx,
        destination: NodeIx,
    ) -> Result<Path, TopologyError> {
        self.check_pair(source, destination)?;
        let banned = vec![false; self.node_count()];
        Ok(self
            .shortest_restricted(source, destination, &banned, &HashSet::new())
            .expect("topology is connected"))
    }

    /// Yen's loopless k-shortest paths, sorted by length then node sequence.
    pub fn yen_k_shortest(
        &self,
        source: NodeIx,
        destination: NodeIx,
        k: usize,
    ) -> Result<Vec<Path>, TopologyError> {
        self.check_pair(source, destination)?;
        if k == 0 {
            return Ok(Vec::new());
        }
        let mut accepted = vec![self.shortest_path(source, destination)?];
        let mut pool: BTreeSet<PathKey> = BTreeSet::new();
        let mut banned_nodes = vec![false; self.node_count()];

        while accepted.len() < k {
            let last = accepted.last().unwrap().nodes.clone();
            for i in 0..last.len() - 1 {
                let spur = last[i];
                let root = &last[..=i];
                let mut banned_hops = HashSet::new();
                for p in &accepted {
                    if p.nodes.len() > i + 1 && p.nodes[..=i] == *root {
                        banned_hops.insert((p.nodes[i], p.nodes[i + 1]));
                    }
                }
                banned_nodes.iter_mut().for_each(|b| *b = false);
                for &r in &root[..i] {
                    banned_nodes[r] = true;
                }
                if let Some(spur_path) =
                    self.shortest_restricted(spur, destination, &banned_nodes, &banned_hops)
                {
                    let mut nodes = root[..i].to_vec();
                    nodes.extend_from_slice(&spur_path.nodes);
                    let path = self.path_from_nodes(nodes).unwrap();
                    if !accepted.iter().any(|a| a.nodes == path.nodes) {
                        pool.insert(PathKey(path));
                    }
                }
            }
            match pool.pop_first() {
                Some(PathKey(p)) => accepted.push(p),
                None => break,
            }
        }
        Ok(accepted)
    }

    /// Every simple path between two nodes, sorted by length then node sequence.
    pub fn all_paths_sorted(
        &self,
        source: NodeIx,
        destination: NodeIx,
    ) -> Result<Vec<Path>, TopologyError> {
        self.check_pair(source, destination)?;
        let mut out = Vec::new();
        let mut on_path = vec![false; self.node_count()];
        let mut stack = vec![source];
        on_path[source] = true;
        self.enumerate(destination, &mut stack, &mut on_path, &mut out);
        let mut paths: Vec<Path> = out
            .into_iter()
            .map(|nodes| self.path_from_nodes(nodes).unwrap())
            .collect();
        paths.sort_by(path_order);
        Ok(paths)
    }

    fn enumerate(
        &self,
        destination: NodeIx,
        stack: &mut Vec<NodeIx>,
        on_path: &mut [bool],
        out: &mut Vec<Vec<NodeIx>>,
    ) {
        let u = *stack.last().unwrap();
        if u == destination {
            out.push(stack.clone());
            return;
        }
        for &(v, _, _) in &self.adjacency[u] {
            if !on_path[v] {
                on_path[v] = true;
                stack.push(v);
                self.enumerate(destination, stack, on_path, out);
                stack.pop();
                on_path[v] = false;
            }
        }
    }
}

/// A loopless route: node sequence, direction-resolved hops and total length.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub nodes: Vec<NodeIx>,
    pub hops: Vec<DirectedLink>,
    pub length_km: f64,
}

/// Ascending length, then lexicographic node sequence.
pub fn path_order(a: &Path, b: &Path) -> Ordering {
    a.length_km
        .total_cmp(&b.length_km)
        .then_with(|| a.nodes.cmp(&b.nodes))
}

#[derive(Debug, Clone)]
struct PathKey(Path);

impl PartialEq for PathKey {
    fn eq(&self, other: &Self) -> bool {
        path_order(&self.0, &other.0) == Ordering::Equal
    }
}
impl Eq for PathKey {}
impl PartialOrd for PathKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for PathKey {
    fn cmp(&self, other: &Self) -> Ordering {
        path_order(&self.0, &other.0)
    }
}

/// How many candidate paths to keep per node pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathLimit {
    Limited(usize),
    Unlimited,
}

impl fmt::Display for PathLimit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PathLimit::Limited(k) => write!(f, "{k}"),
            PathLimit::Unlimited => f.write_str("inf"),
        }
    }
}

impl FromStr for PathLimit {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("inf") {
            return Ok(PathLimit::Unlimited);
        }
        match s.parse::<usize>() {
            Ok(0) => Err("k must be positive".into()),
            Ok(k) => Ok(PathLimit::Limited(k)),
            Err(_) => Err(format!("expected a positive integer or \"inf\", got {s:?}")),
        }
    }
}

/// Candidate path lists for every ordered node pair, computed once.
#[derive(Debug, Clone)]
pub struct CandidatePaths {
    node_count: usize,
    limit: PathLimit,
    paths: Vec<Vec<Path>>,
}

impl CandidatePaths {
    pub fn build(topology: &Topology, limit: PathLimit) -> Result<Self, TopologyError> {
        let n = topology.node_count();
        let mut paths = Vec::with_capacity(n * n.saturating_sub(1));
        for s in 0..n {
            for d in 0..n {
                if s == d {
                    continue;
                }
                paths.push(match limit {
                    PathLimit::Limited(k) => topology.yen_k_shortest(s, d, k)?,
                    PathLimit::Unlimited => topology.all_paths_sorted(s, d)?,
                });
            }
        }
        Ok(CandidatePaths {
            node_count: n,
            limit,
            paths,
        })
    }

    pub fn limit(&self) -> PathLimit {
        self.limit
    }

    /// Number of ordered pairs.
    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    /// Dense index of the ordered pair `(source, destination)`.
    pub fn pair_index(&self, source: NodeIx, destination: NodeIx) -> usize {
        debug_assert!(source != destination);
        let d = if destination > source {
            destination - 1
        } else {
            destination
        };
        source * (self.node_count - 1) + d
    }

    /// Inverse of [`CandidatePaths::pair_index`].
    pub fn pair(&self, index: usize) -> (NodeIx, NodeIx) {
        let s = index / (self.node_count - 1);
        let mut d = index % (self.node_count - 1);
        if d >= s {
            d += 1;
        }
        (s, d)
    }

    pub fn paths(&self, pair: usize) -> &[Path] {
        &self.paths[pair]
    }

    pub fn between(&self, source: NodeIx, destination: NodeIx) -> &[Path] {
        &self.paths[self.pair_index(source, destination)]
    }

    /// Number of candidates per pair, in pair order.
    pub fn action_counts(&self) -> impl Iterator<Item = usize> + '_ {
        self.paths.iter().map(Vec::len)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(t: &Topology, p: &Path) -> Vec<String> {
        p.nodes.iter().map(|&n| t.label(n).to_string()).collect()
    }

    #[test]
    fn nsfnet_shape_and_lengths() {
        let t = Topology::nsfnet();
        assert_eq!(t.node_count(), 14);
        assert_eq!(t.link_count(), 22);
        assert_eq!(t.length("12", "14"), Some(100.0));
        assert_eq!(t.length("14", "12"), Some(100.0));
        assert_eq!(t.length("1", "8"), Some(2400.0));
        assert_eq!(t.length("4", "11"), Some(1900.0));
        assert_eq!(t.length("1", "14"), None);
    }

    #[test]
    fn numeric_labels_order_by_value() {
        let t = Topology::nsfnet();
        assert_eq!(t.node("2").unwrap(), 1);
        assert_eq!(t.node("10").unwrap(), 9);
        assert_eq!(t.label(13), "14");
    }

    #[test]
    fn load_errors_are_distinct() {
        assert_eq!(
            Topology::from_edges([(1, 1, 5.0)]).unwrap_err(),
            TopologyError::SelfLoop("1".into())
        );
        assert!(matches!(
            Topology::from_edges([(1, 2, 5.0), (2, 1, 7.0)]),
            Err(TopologyError::DuplicateLink(..))
        ));
        assert!(matches!(
            Topology::from_edges([(1, 2, 0.0)]),
            Err(TopologyError::NonPositiveLength { .. })
        ));
        assert!(matches!(
            Topology::from_edges([(1, 2, -3.0)]),
            Err(TopologyError::NonPositiveLength { .. })
        ));
        assert_eq!(
            Topology::from_edges([(1, 2, 1.0), (3, 4, 1.0)]).unwrap_err(),
            TopologyError::Disconnected
        );
        assert_eq!(
            Topology::from_edges(Vec::<(u32, u32, f64)>::new()).unwrap_err(),
            TopologyError::Empty
        );
    }

    #[test]
    fn minimal_graph() {
        let t = Topology::from_edges([(1, 2, 1000.0)]).unwrap();
        assert_eq!(t.node_count(), 2);
        assert_eq!(t.link_count(), 1);
        let paths = t.all_paths_sorted(0, 1).unwrap();
        assert_eq!(paths.len(), 1);
    }

    #[test]
    fn parse_skips_comments_and_reports_line() {
        let t = Topology::parse("# header\n\na b 10\nb c 20.5\n").unwrap();
        assert_eq!(t.node_count(), 3);
        assert_eq!(t.length("b", "c"), Some(20.5));
        let err = Topology::parse("a b 10\na c\n").unwrap_err();
        assert_eq!(
            err,
            TopologyError::Parse {
                line: 2,
                message: "expected 3 fields, found 2".into()
            }
        );
    }

    #[test]
    fn triangle_tie_break_prefers_direct() {
        let t = Topology::from_edges([("a", "b", 2.0), ("a", "c", 1.0), ("c", "b", 1.0)]).unwrap();
        let paths = t.all_paths_sorted(0, 1).unwrap();
        assert_eq!(paths.len(), 2);
        assert_eq!(labels(&t, &paths[0]), ["a", "b"]);
        assert_eq!(labels(&t, &paths[1]), ["a", "c", "b"]);
        assert_eq!(t.yen_k_shortest(0, 1, 5).unwrap().len(), 2);
    }

    #[test]
    fn yen_shortest_on_nsfnet() {
        let t = Topology::nsfnet();
        let (s, d) = (t.node("12").unwrap(), t.node("14").unwrap());
        let p = t.yen_k_shortest(s, d, 1).unwrap();
        assert_eq!(labels(&t, &p[0]), ["12", "14"]);
        assert_eq!(p[0].length_km, 100.0);
        assert_eq!(
            labels(&t, &t.all_paths_sorted(s, d).unwrap()[0]),
            ["12", "14"]
        );
    }

    #[test]
    fn path_queries_reject_bad_pairs() {
        let t = Topology::nsfnet();
        assert!(matches!(
            t.yen_k_shortest(3, 3, 2),
            Err(TopologyError::SameEndpoints(_))
        ));
        assert!(matches!(
            t.all_paths_sorted(0, 99),
            Err(TopologyError::UnknownNode(_))
        ));
    }

    #[test]
    fn hops_follow_travel_direction() {
        let t = Topology::nsfnet();
        let p = t
            .path_from_nodes(vec![t.node("14").unwrap(), t.node("12").unwrap()])
            .unwrap();
        let (from, to) = t.endpoints(p.hops[0]);
        assert_eq!((t.label(from), t.label(to)), ("14", "12"));
    }

    #[test]
    fn candidate_pair_indexing_roundtrips() {
        let t = Topology::nsfnet();
        let c = CandidatePaths::build(&t, PathLimit::Limited(3)).unwrap();
        assert_eq!(c.len(), 182);
        for i in 0..c.len() {
            let (s, d) = c.pair(i);
            assert_eq!(c.pair_index(s, d), i);
            let first = &c.paths(i)[0];
            assert_eq!((first.nodes[0], *first.nodes.last().unwrap()), (s, d));
            assert!(c.paths(i).len() <= 3);
        }
    }

    #[test]
    fn fewer_paths_than_k() {
        let t = Topology::from_edges([(1, 2, 1000.0)]).unwrap();
        let c = CandidatePaths::build(&t, PathLimit::Limited(5)).unwrap();
        assert_eq!(c.len(), 2);
        assert!(c.action_counts().all(|n| n == 1));
    }

    #[test]
    fn path_limit_parsing() {
        assert_eq!("inf".parse::<PathLimit>(), Ok(PathLimit::Unlimited));
        assert_eq!("3".parse::<PathLimit>(), Ok(PathLimit::Limited(3)));
        assert!("0".parse::<PathLimit>().is_err());
        assert!("x".parse::<PathLimit>().is_err());
    }
}
