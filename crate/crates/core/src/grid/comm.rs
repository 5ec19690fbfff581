//! Collectives over processor groups with per-processor, per-phase counters.
//!
//! Each collective charges the standard bandwidth-optimal volumes: in a
//! reduce-scatter a member sends everything except its own block and receives
//! `g - 1` copies of its block; in an all-gather it sends its block to the
//! other `g - 1` members and receives everything else. Words sent and
//! received therefore balance over every collective. Each member is charged
//! `⌈log₂ g⌉` messages.

use std::fmt::Write as _;

use crate::dimtree::Phase;
use crate::error::{Error, Result};
use crate::kernel;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ProcCounters {
    pub flops: u64,
    pub words_sent: u64,
    pub words_recv: u64,
    pub messages: u64,
}

impl ProcCounters {
    fn add(&mut self, o: &ProcCounters) {
        self.flops += o.flops;
        self.words_sent += o.words_sent;
        self.words_recv += o.words_recv;
        self.messages += o.messages;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CollectiveKind {
    ReduceScatter,
    AllGather,
    AllReduce,
}

impl CollectiveKind {
    pub fn name(&self) -> &'static str {
        match self {
            CollectiveKind::ReduceScatter => "reduce-scatter",
            CollectiveKind::AllGather => "all-gather",
            CollectiveKind::AllReduce => "all-reduce",
        }
    }
}

/// One collective call. `payload[i]` is the number of words member `i`
/// contributed (for a reduce-scatter, the size of its full local partial sum).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CollectiveRecord {
    pub kind: CollectiveKind,
    pub phase: Phase,
    pub group: Vec<usize>,
    pub payload: Vec<u64>,
    pub words_sent: u64,
    pub words_recv: u64,
}

/// Per-processor counters split by phase.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CommStats {
    procs: Vec<[ProcCounters; 5]>,
}

impl CommStats {
    fn new(p: usize) -> Self {
        CommStats {
            procs: vec![[ProcCounters::default(); 5]; p],
        }
    }

    pub fn procs(&self) -> usize {
        self.procs.len()
    }

    pub fn get(&self, rank: usize, phase: Phase) -> ProcCounters {
        self.procs[rank][phase as usize]
    }

    /// One processor summed over phases.
    pub fn proc_total(&self, rank: usize) -> ProcCounters {
        let mut t = ProcCounters::default();
        for c in &self.procs[rank] {
            t.add(c);
        }
        t
    }

    /// One phase summed over processors.
    pub fn phase_total(&self, phase: Phase) -> ProcCounters {
        let mut t = ProcCounters::default();
        for p in &self.procs {
            t.add(&p[phase as usize]);
        }
        t
    }

    pub fn total(&self) -> ProcCounters {
        let mut t = ProcCounters::default();
        for r in 0..self.procs() {
            t.add(&self.proc_total(r));
        }
        t
    }

    /// Largest per-processor value of a field within a phase (the critical path
    /// under a bulk-synchronous schedule).
    pub fn max_over_procs(&self, phase: Phase, field: impl Fn(&ProcCounters) -> u64) -> u64 {
        self.procs.iter().map(|p| field(&p[phase as usize])).max().unwrap_or(0)
    }

    /// `proc,phase,flops,words_sent,words_recv,messages`, one row per
    /// processor and phase.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("proc,phase,flops,words_sent,words_recv,messages\n");
        for (r, p) in self.procs.iter().enumerate() {
            for phase in Phase::ALL {
                let c = p[phase as usize];
                writeln!(s, "{r},{},{},{},{},{}", phase.name(), c.flops, c.words_sent, c.words_recv, c.messages).unwrap();
            }
        }
        s
    }
}

fn log2_ceil(g: usize) -> u64 {
    if g <= 1 {
        0
    } else {
        (usize::BITS - (g - 1).leading_zeros()) as u64
    }
}

/// Simulated machine: counters plus a log of every collective.
#[derive(Clone, Debug)]
pub struct World {
    stats: CommStats,
    log: Vec<CollectiveRecord>,
    phase: Phase,
}

impl World {
    pub fn new(procs: usize) -> Self {
        World {
            stats: CommStats::new(procs),
            log: Vec::new(),
            phase: Phase::Sketch,
        }
    }

    pub fn procs(&self) -> usize {
        self.stats.procs()
    }

    pub fn set_phase(&mut self, phase: Phase) {
        self.phase = phase;
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn stats(&self) -> &CommStats {
        &self.stats
    }

    pub fn log(&self) -> &[CollectiveRecord] {
        &self.log
    }

    pub fn into_parts(self) -> (CommStats, Vec<CollectiveRecord>) {
        (self.stats, self.log)
    }

    pub fn charge_flops(&mut self, rank: usize, flops: u64) {
        self.stats.procs[rank][self.phase as usize].flops += flops;
    }

    fn counters(&mut self, rank: usize) -> &mut ProcCounters {
        &mut self.stats.procs[rank][self.phase as usize]
    }

    fn record(&mut self, kind: CollectiveKind, group: &[usize], payload: Vec<u64>, sent: &[u64], recv: &[u64]) {
        let msgs = log2_ceil(group.len()) * if kind == CollectiveKind::AllReduce { 2 } else { 1 };
        for (i, &r) in group.iter().enumerate() {
            let c = self.counters(r);
            c.words_sent += sent[i];
            c.words_recv += recv[i];
            c.messages += msgs;
        }
        self.log.push(CollectiveRecord {
            kind,
            phase: self.phase,
            group: group.to_vec(),
            payload,
            words_sent: sent.iter().sum(),
            words_recv: recv.iter().sum(),
        });
    }

    fn check_group(&self, group: &[usize], n: usize) -> Result<()> {
        if group.is_empty() || group.len() != n {
            return Err(Error::Collective(format!("group of {} with {n} contributions", group.len())));
        }
        if let Some(&r) = group.iter().find(|&&r| r >= self.procs()) {
            return Err(Error::Collective(format!("rank {r} outside a {}-processor world", self.procs())));
        }
        Ok(())
    }

    fn sum_in_order(contributions: &[Vec<f64>]) -> Vec<f64> {
        let mut acc = contributions[0].clone();
        for c in &contributions[1..] {
            for (a, b) in acc.iter_mut().zip(c) {
                *a += b;
            }
        }
        acc
    }

    /// Sums equal-length vectors and gives member `i` the `i`-th contiguous
    /// block. The length must be divisible by the group size.
    pub fn reduce_scatter(&mut self, group: &[usize], contributions: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        self.check_group(group, contributions.len())?;
        let g = group.len();
        let e = contributions[0].len();
        if contributions.iter().any(|c| c.len() != e) {
            return Err(Error::Collective("reduce-scatter contributions differ in length".into()));
        }
        if !e.is_multiple_of(g) {
            return Err(Error::Collective(format!("{e} words cannot be split evenly over {g} processors")));
        }
        let sum = Self::sum_in_order(contributions);
        let b = e / g;
        let out = sum.chunks(b.max(1)).take(g).map(|c| c.to_vec()).collect::<Vec<_>>();
        let out = if b == 0 { vec![Vec::new(); g] } else { out };
        let sent = vec![(e - b) as u64; g];
        let recv = vec![((g - 1) * b) as u64; g];
        self.record(CollectiveKind::ReduceScatter, group, vec![e as u64; g], &sent, &recv);
        Ok(out)
    }

    /// Reduce-scatter of equally shaped tensor blocks: member `i` receives the
    /// sub-block `targets[i]` of the elementwise sum.
    pub(crate) fn reduce_scatter_blocks(
        &mut self,
        group: &[usize],
        dims: &[usize],
        contributions: &[Vec<f64>],
        targets: &[Vec<(usize, usize)>],
    ) -> Result<Vec<(Vec<usize>, Vec<f64>)>> {
        self.check_group(group, contributions.len())?;
        let e: usize = dims.iter().product();
        if contributions.iter().any(|c| c.len() != e) || targets.len() != group.len() {
            return Err(Error::Collective("reduce-scatter blocks do not match the group".into()));
        }
        let sum = Self::sum_in_order(contributions);
        let out: Vec<_> = targets.iter().map(|t| kernel::copy_block(dims, &sum, t)).collect();
        let g = group.len() as u64;
        let sent: Vec<u64> = out.iter().map(|(_, b)| (e - b.len()) as u64).collect();
        let recv: Vec<u64> = out.iter().map(|(_, b)| (g - 1) * b.len() as u64).collect();
        self.record(CollectiveKind::ReduceScatter, group, vec![e as u64; group.len()], &sent, &recv);
        Ok(out)
    }

    /// Concatenates the members' blocks in group order; every member ends up
    /// holding the result.
    pub fn all_gather(&mut self, group: &[usize], blocks: &[Vec<f64>]) -> Result<Vec<f64>> {
        self.check_group(group, blocks.len())?;
        let total: usize = blocks.iter().map(Vec::len).sum();
        let g = group.len() as u64;
        let sent: Vec<u64> = blocks.iter().map(|b| (g - 1) * b.len() as u64).collect();
        let recv: Vec<u64> = blocks.iter().map(|b| (total - b.len()) as u64).collect();
        let payload = blocks.iter().map(|b| b.len() as u64).collect();
        self.record(CollectiveKind::AllGather, group, payload, &sent, &recv);
        Ok(blocks.concat())
    }

    /// Assembles a tensor of global `dims` from blocks at `ranges`.
    pub(crate) fn all_gather_blocks(
        &mut self,
        group: &[usize],
        dims: &[usize],
        blocks: &[&[f64]],
        ranges: &[Vec<(usize, usize)>],
    ) -> Result<Vec<f64>> {
        self.check_group(group, blocks.len())?;
        let total: usize = dims.iter().product();
        let mut out = vec![0.0; total];
        for (b, r) in blocks.iter().zip(ranges) {
            kernel::place_block(dims, &mut out, r, b);
        }
        let g = group.len() as u64;
        let sent: Vec<u64> = blocks.iter().map(|b| (g - 1) * b.len() as u64).collect();
        let recv: Vec<u64> = blocks.iter().map(|b| (total - b.len()) as u64).collect();
        let payload = blocks.iter().map(|b| b.len() as u64).collect();
        self.record(CollectiveKind::AllGather, group, payload, &sent, &recv);
        Ok(out)
    }

    /// Reduce-scatter over balanced contiguous blocks followed by an
    /// all-gather; every member holds the sum.
    pub fn all_reduce(&mut self, group: &[usize], contributions: &[Vec<f64>]) -> Result<Vec<f64>> {
        self.check_group(group, contributions.len())?;
        let e = contributions[0].len();
        if contributions.iter().any(|c| c.len() != e) {
            return Err(Error::Collective("all-reduce contributions differ in length".into()));
        }
        let g = group.len();
        let sum = Self::sum_in_order(contributions);
        let own: Vec<u64> = (0..g).map(|i| (super::split_range(e, g, i).1 - super::split_range(e, g, i).0) as u64).collect();
        let words: Vec<u64> = own.iter().map(|&b| (e as u64 - b) + (g as u64 - 1) * b).collect();
        self.record(CollectiveKind::AllReduce, group, vec![e as u64; g], &words, &words);
        Ok(sum)
    }
}
