//! Dynamic traffic: per-episode request streams and the event loop that
//! interleaves arrivals with departures.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::fmt;
use std::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::{Distribution, Exp};

use crate::grid::RequestId;
use crate::topology::NodeIx;

#[derive(Debug, Clone, PartialEq)]
pub struct Request {
    pub id: RequestId,
    pub source: NodeIx,
    pub destination: NodeIx,
    pub bit_rate_gbps: u32,
    pub arrival: f64,
    pub holding: f64,
}

impl Request {
    pub fn departure(&self) -> f64 {
        self.arrival + self.holding
    }
}

/// How the configured Erlang load maps to an arrival rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LoadNormalization {
    /// rate = erlang x cores / mean_holding
    #[default]
    MultiplyByCores,
    /// rate = erlang / (cores x mean_holding)
    DivideByCores,
}

impl fmt::Display for LoadNormalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LoadNormalization::MultiplyByCores => "multiply",
            LoadNormalization::DivideByCores => "divide",
        })
    }
}

impl FromStr for LoadNormalization {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "multiply" => Ok(LoadNormalization::MultiplyByCores),
            "divide" => Ok(LoadNormalization::DivideByCores),
            _ => Err(format!("unknown load normalization {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrafficConfig {
    pub erlang: f64,
    pub mean_holding: f64,
    pub cores_per_link: usize,
    pub requests_per_episode: usize,
    /// (bit rate in Gbps, relative weight)
    pub bit_rate_weights: Vec<(u32, f64)>,
    pub normalization: LoadNormalization,
}

impl TrafficConfig {
    pub fn new(erlang: f64) -> Self {
        TrafficConfig {
            erlang,
            mean_holding: 5.0,
            cores_per_link: 4,
            requests_per_episode: 2000,
            bit_rate_weights: vec![(25, 3.0), (50, 5.0), (100, 2.0)],
            normalization: LoadNormalization::MultiplyByCores,
        }
    }

    pub fn arrival_rate(&self) -> f64 {
        let cores = self.cores_per_link as f64;
        match self.normalization {
            LoadNormalization::MultiplyByCores => self.erlang * cores / self.mean_holding,
            LoadNormalization::DivideByCores => self.erlang / (cores * self.mean_holding),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.erlang.is_finite() && self.erlang > 0.0) {
            return Err(format!("erlang must be positive, got {}", self.erlang));
        }
        if !(self.mean_holding.is_finite() && self.mean_holding > 0.0) {
            return Err(format!(
                "mean_holding must be positive, got {}",
                self.mean_holding
            ));
        }
        if self.cores_per_link == 0 {
            return Err("cores_per_link must be positive".into());
        }
        if self.bit_rate_weights.is_empty() {
            return Err("bit_rate_weights is empty".into());
        }
        if let Some((rate, w)) = self
            .bit_rate_weights
            .iter()
            .find(|(_, w)| !(w.is_finite() && *w > 0.0))
        {
            return Err(format!("weight for {rate} Gbps must be positive, got {w}"));
        }
        Ok(())
    }
}

/// Draws one episode of requests. Ids start at `first_id`.
pub fn generate_episode<R: Rng + ?Sized>(
    config: &TrafficConfig,
    node_count: usize,
    first_id: RequestId,
    rng: &mut R,
) -> Vec<Request> {
    assert!(node_count >= 2, "traffic needs at least two nodes");
    let inter_arrival = Exp::new(config.arrival_rate()).expect("positive arrival rate");
    let holding = Exp::new(1.0 / config.mean_holding).expect("positive holding time");
    let rates = WeightedIndex::new(config.bit_rate_weights.iter().map(|&(_, w)| w))
        .expect("positive bit-rate weights");

    let mut clock = 0.0;
    (0..config.requests_per_episode)
        .map(|i| {
            clock += inter_arrival.sample(rng);
            let source = rng.random_range(0..node_count);
            let mut destination = rng.random_range(0..node_count - 1);
            if destination >= source {
                destination += 1;
            }
            let bit_rate_gbps = config.bit_rate_weights[rates.sample(rng)].0;
            Request {
                id: first_id + i as RequestId,
                source,
                destination,
                bit_rate_gbps,
                arrival: clock,
                holding: holding.sample(rng),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum Event {
    Arrival(Request),
    Departure { request_id: RequestId, time: f64 },
}

impl Event {
    pub fn time(&self) -> f64 {
        match self {
            Event::Arrival(r) => r.arrival,
            Event::Departure { time, .. } => *time,
        }
    }

    // departures sort ahead of arrivals at the same instant
    fn rank(&self) -> u8 {
        match self {
            Event::Departure { .. } => 0,
            Event::Arrival(_) => 1,
        }
    }
}

#[derive(Debug)]
struct Queued {
    event: Event,
    seq: u64,
}

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Queued {}
impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Queued {
    fn cmp(&self, other: &Self) -> Ordering {
        self.event
            .time()
            .total_cmp(&other.event.time())
            .then(self.event.rank().cmp(&other.event.rank()))
            .then(self.seq.cmp(&other.seq))
    }
}

/// Min-time event queue. Ties: departures first, then insertion order.
#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Reverse<Queued>>,
    seq: u64,
}

impl EventQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_arrivals(requests: impl IntoIterator<Item = Request>) -> Self {
        let mut q = Self::new();
        for r in requests {
            q.push(Event::Arrival(r));
        }
        q
    }

    pub fn push(&mut self, event: Event) {
        self.heap.push(Reverse(Queued {
            event,
            seq: self.seq,
        }));
        self.seq += 1;
    }

    pub fn pop(&mut self) -> Option<Event> {
        self.heap.pop().map(|Reverse(q)| q.event)
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EventCounts {
    pub arrivals: usize,
    pub routed: usize,
    pub departures: usize,
}

/// Receives events from [`run_events`].
pub trait EventHandler {
    type Error;

    /// Returns whether the request was routed.
    fn on_arrival(&mut self, request: &Request) -> Result<bool, Self::Error>;

    fn on_departure(&mut self, request_id: RequestId, time: f64) -> Result<(), Self::Error>;
}

impl<A, D, E> EventHandler for (A, D)
where
    A: FnMut(&Request) -> Result<bool, E>,
    D: FnMut(RequestId, f64) -> Result<(), E>,
{
    type Error = E;

    fn on_arrival(&mut self, request: &Request) -> Result<bool, E> {
        (self.0)(request)
    }

    fn on_departure(&mut self, request_id: RequestId, time: f64) -> Result<(), E> {
        (self.1)(request_id, time)
    }
}

/// Drains the queue in time order. Routed requests get a departure at
/// arrival + holding; blocked ones schedule nothing.
pub fn run_events<H: EventHandler>(
    queue: &mut EventQueue,
    handler: &mut H,
) -> Result<EventCounts, H::Error> {
    let mut counts = EventCounts::default();
    while let Some(event) = queue.pop() {
        match event {
            Event::Arrival(request) => {
                counts.arrivals += 1;
                if handler.on_arrival(&request)? {
                    counts.routed += 1;
                    queue.push(Event::Departure {
                        request_id: request.id,
                        time: request.departure(),
                    });
                }
            }
            Event::Departure { request_id, time } => {
                counts.departures += 1;
                handler.on_departure(request_id, time)?;
            }
        }
    }
    Ok(counts)
}
