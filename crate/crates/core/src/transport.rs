//! In-process message passing between simulated ranks.
//!
//! Every rank owns an [`Endpoint`]. Endpoints share a fabric of message
//! queues keyed by `(destination, source, tag)`. Sends are buffered and never
//! block; receives block until the matching message is queued. Two
//! execution modes are available:
//!
//! * [`Mode::Threaded`]: one OS thread per rank, free-running.
//! * [`Mode::Serial`]: one thread per rank, but only the rank holding the
//!   turn runs. A rank gives the turn to the next live rank (round robin)
//!   when it blocks or exits, so a run is a fixed sequence of steps. If every
//!   live rank is blocked the run fails with a deadlock error.
//!
//! Strided sends and receives take a [`LayoutDescriptor`], the analogue of
//! an MPI vector datatype: the wire copy reads and writes the strided
//! elements directly and no separate pack pass is charged.

use std::collections::{HashMap, VecDeque};
use std::ops::{Add, AddAssign, Range, Sub};
use std::sync::{Arc, Condvar, Mutex, MutexGuard};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::COMPLEX_BYTES;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Threaded,
    Serial,
}

/// How [`all_to_all`] schedules its point-to-point traffic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CommPattern {
    /// Shifted schedule: send to `rank + s`, receive from `rank - s`.
    Pairwise,
    /// Linear schedule with a synchronising barrier between the send and
    /// receive halves, like a blocking collective.
    Collective,
}

/// Tag namespace of a collective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    Forward,
    Inverse,
    User(u32),
}

/// Message tag: phase plus a per-endpoint sequence number. Every rank
/// issues collectives in the same order, so sequence numbers agree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Tag {
    pub phase: Phase,
    pub seq: u64,
}

impl Tag {
    pub fn new(phase: Phase, seq: u64) -> Self {
        Self { phase, seq }
    }
}

/// `count` blocks of `block_length` contiguous complex elements whose starts
/// are `stride` elements apart, beginning at `base_offset`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LayoutDescriptor {
    pub count: usize,
    pub block_length: usize,
    pub stride: usize,
    pub base_offset: usize,
}

impl LayoutDescriptor {
    pub fn new(count: usize, block_length: usize, stride: usize, base_offset: usize) -> Self {
        Self { count, block_length, stride, base_offset }
    }

    /// One contiguous run.
    pub fn contiguous(len: usize, base_offset: usize) -> Self {
        Self::new(1, len, len, base_offset)
    }

    pub fn len(&self) -> usize {
        self.count * self.block_length
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self, buf_len: usize) -> Result<()> {
        if self.count == 0 || self.block_length == 0 {
            return Err(Error::Layout(format!("empty descriptor {self:?}")));
        }
        if self.count > 1 && self.stride < self.block_length {
            return Err(Error::Layout(format!("descriptor {self:?} has overlapping blocks")));
        }
        let end = self.base_offset + (self.count - 1) * self.stride + self.block_length;
        if end > buf_len {
            return Err(Error::Layout(format!(
                "descriptor {self:?} reaches {end}, buffer holds {buf_len}"
            )));
        }
        Ok(())
    }

    pub fn blocks(&self) -> impl Iterator<Item = Range<usize>> + '_ {
        (0..self.count).map(move |b| {
            let start = self.base_offset + b * self.stride;
            start..start + self.block_length
        })
    }

    /// Copies the described elements out of `buf`, in enumeration order.
    pub fn gather(&self, buf: &[Complex64]) -> Result<Vec<Complex64>> {
        self.validate(buf.len())?;
        let mut out = Vec::with_capacity(self.len());
        for block in self.blocks() {
            out.extend_from_slice(&buf[block]);
        }
        Ok(out)
    }

    /// Writes `values` into the described elements of `buf`.
    pub fn scatter(&self, values: &[Complex64], buf: &mut [Complex64]) -> Result<()> {
        self.validate(buf.len())?;
        if values.len() != self.len() {
            return Err(Error::Protocol(format!(
                "descriptor expects {} elements, got {}",
                self.len(),
                values.len()
            )));
        }
        for (block, chunk) in self.blocks().zip(values.chunks_exact(self.block_length)) {
            buf[block].copy_from_slice(chunk);
        }
        Ok(())
    }
}

/// Byte traffic of an exchange, split by the kind of copy pass.
///
/// `bytes_packed`/`bytes_unpacked` count local rearrangement of data that
/// crosses to or from another rank, `bytes_wire` the message payloads, and
/// `bytes_local` rearrangement of the block a rank keeps for itself.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct CopyCounter {
    pub bytes_packed: u64,
    pub bytes_wire: u64,
    pub bytes_unpacked: u64,
    pub bytes_local: u64,
}

impl CopyCounter {
    /// Copy passes over exchanged data: pack + wire + unpack.
    pub fn exchange_bytes(&self) -> u64 {
        self.bytes_packed + self.bytes_wire + self.bytes_unpacked
    }
}

impl Add for CopyCounter {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            bytes_packed: self.bytes_packed + o.bytes_packed,
            bytes_wire: self.bytes_wire + o.bytes_wire,
            bytes_unpacked: self.bytes_unpacked + o.bytes_unpacked,
            bytes_local: self.bytes_local + o.bytes_local,
        }
    }
}

impl AddAssign for CopyCounter {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl Sub for CopyCounter {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self {
            bytes_packed: self.bytes_packed - o.bytes_packed,
            bytes_wire: self.bytes_wire - o.bytes_wire,
            bytes_unpacked: self.bytes_unpacked - o.bytes_unpacked,
            bytes_local: self.bytes_local - o.bytes_local,
        }
    }
}

/// Per-endpoint message statistics.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct WireStats {
    pub messages_sent: u64,
    pub messages_received: u64,
    pub bytes_sent: u64,
    pub bytes_received: u64,
}

/// What an exchange needs from a message-passing layer.
pub trait Communicator {
    fn rank(&self) -> usize;
    fn size(&self) -> usize;

    /// Buffered send of the elements of `buf` selected by `desc`.
    fn send_strided(
        &mut self,
        dest: usize,
        tag: Tag,
        buf: &[Complex64],
        desc: &LayoutDescriptor,
    ) -> Result<()>;

    /// Blocks until the message from `src` with `tag` arrives, then writes
    /// it into the elements of `buf` selected by `desc`.
    fn recv_strided(
        &mut self,
        src: usize,
        tag: Tag,
        buf: &mut [Complex64],
        desc: &LayoutDescriptor,
    ) -> Result<()>;

    fn barrier(&mut self) -> Result<()>;

    /// Fresh tag for the next collective in `phase`.
    fn next_tag(&mut self, phase: Phase) -> Tag;

    fn wire_stats(&self) -> WireStats;
}

type QueueKey = (usize, usize, Tag);

#[derive(Default)]
struct BarrierState {
    arrived: usize,
    departed: usize,
}

struct FabricState {
    queues: HashMap<QueueKey, VecDeque<Vec<Complex64>>>,
    finished: Vec<bool>,
    barriers: HashMap<u64, BarrierState>,
    // Serial scheduling.
    turn: usize,
    stalled: usize,
    deadlocked: bool,
}

struct Fabric {
    size: usize,
    mode: Mode,
    state: Mutex<FabricState>,
    cv: Condvar,
}

impl Fabric {
    fn lock(&self) -> MutexGuard<'_, FabricState> {
        // A panicking rank must still be able to mark itself finished.
        self.state.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn live(st: &FabricState) -> usize {
        st.finished.iter().filter(|f| !**f).count()
    }

    fn pass_turn(&self, st: &mut FabricState, from: usize) {
        for step in 1..=self.size {
            let cand = (from + step) % self.size;
            if !st.finished[cand] {
                st.turn = cand;
                break;
            }
        }
        self.cv.notify_all();
    }

    fn wait_turn<'a>(
        &'a self,
        mut st: MutexGuard<'a, FabricState>,
        me: usize,
    ) -> Result<MutexGuard<'a, FabricState>> {
        while st.turn != me && !st.deadlocked {
            st = self.cv.wait(st).unwrap_or_else(|e| e.into_inner());
        }
        if st.deadlocked {
            return Err(deadlock(me));
        }
        Ok(st)
    }

    /// Blocks `me` until `ready` yields a value. In serial mode blocking
    /// hands the turn on.
    fn wait_until<T>(
        &self,
        me: usize,
        mut ready: impl FnMut(&mut FabricState) -> Result<Option<T>>,
    ) -> Result<T> {
        let mut st = self.lock();
        loop {
            if st.deadlocked {
                return Err(deadlock(me));
            }
            if let Some(v) = ready(&mut st)? {
                st.stalled = 0;
                return Ok(v);
            }
            match self.mode {
                Mode::Threaded => {
                    st = self.cv.wait(st).unwrap_or_else(|e| e.into_inner());
                }
                Mode::Serial => {
                    st.stalled += 1;
                    if st.stalled > Self::live(&st) {
                        st.deadlocked = true;
                        self.cv.notify_all();
                        return Err(deadlock(me));
                    }
                    self.pass_turn(&mut st, me);
                    st = self.wait_turn(st, me)?;
                }
            }
        }
    }
}

fn deadlock(rank: usize) -> Error {
    Error::Transport(format!("deadlock: every live rank is blocked (observed by rank {rank})"))
}

/// One rank's handle on the fabric. Dropping it marks the rank as exited.
pub struct Endpoint {
    rank: usize,
    fabric: Arc<Fabric>,
    seq: u64,
    barrier_gen: u64,
    entered: bool,
    stats: WireStats,
}

impl std::fmt::Debug for Endpoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Endpoint")
            .field("rank", &self.rank)
            .field("size", &self.fabric.size)
            .field("mode", &self.fabric.mode)
            .finish()
    }
}

/// Builds `p` connected endpoints, one per rank.
pub fn make_communicators(p: usize, mode: Mode) -> Result<Vec<Endpoint>> {
    if p == 0 {
        return Err(Error::Config("process count must be at least 1".into()));
    }
    let fabric = Arc::new(Fabric {
        size: p,
        mode,
        state: Mutex::new(FabricState {
            queues: HashMap::new(),
            finished: vec![false; p],
            barriers: HashMap::new(),
            turn: 0,
            stalled: 0,
            deadlocked: false,
        }),
        cv: Condvar::new(),
    });
    Ok((0..p)
        .map(|rank| Endpoint {
            rank,
            fabric: Arc::clone(&fabric),
            seq: 0,
            barrier_gen: 0,
            entered: false,
            stats: WireStats::default(),
        })
        .collect())
}

impl Endpoint {
    pub fn mode(&self) -> Mode {
        self.fabric.mode
    }

    /// In serial mode, waits for this rank's first turn. Called implicitly
    /// by the first communication call.
    pub fn enter(&mut self) -> Result<()> {
        if self.entered || self.fabric.mode == Mode::Threaded {
            self.entered = true;
            return Ok(());
        }
        let st = self.fabric.lock();
        drop(self.fabric.wait_turn(st, self.rank)?);
        self.entered = true;
        Ok(())
    }

    fn check_peer(&self, peer: usize) -> Result<()> {
        if peer >= self.fabric.size {
            return Err(Error::Transport(format!(
                "no rank {peer} in a communicator of size {}",
                self.fabric.size
            )));
        }
        Ok(())
    }
}

impl Communicator for Endpoint {
    fn rank(&self) -> usize {
        self.rank
    }

    fn size(&self) -> usize {
        self.fabric.size
    }

    fn send_strided(
        &mut self,
        dest: usize,
        tag: Tag,
        buf: &[Complex64],
        desc: &LayoutDescriptor,
    ) -> Result<()> {
        self.check_peer(dest)?;
        self.enter()?;
        let payload = desc.gather(buf)?;
        let bytes = payload.len() as u64 * COMPLEX_BYTES;
        {
            let mut st = self.fabric.lock();
            st.queues.entry((dest, self.rank, tag)).or_default().push_back(payload);
            st.stalled = 0;
        }
        self.fabric.cv.notify_all();
        self.stats.messages_sent += 1;
        self.stats.bytes_sent += bytes;
        Ok(())
    }

    fn recv_strided(
        &mut self,
        src: usize,
        tag: Tag,
        buf: &mut [Complex64],
        desc: &LayoutDescriptor,
    ) -> Result<()> {
        self.check_peer(src)?;
        desc.validate(buf.len())?;
        self.enter()?;
        let me = self.rank;
        let key = (me, src, tag);
        let payload = self.fabric.wait_until(me, |st| {
            if let Some(q) = st.queues.get_mut(&key) {
                if let Some(msg) = q.pop_front() {
                    if q.is_empty() {
                        st.queues.remove(&key);
                    }
                    return Ok(Some(msg));
                }
            }
            if st.finished[src] {
                return Err(Error::Transport(format!(
                    "rank {src} exited without sending {tag:?} to rank {me}"
                )));
            }
            Ok(None)
        })?;
        if payload.len() != desc.len() {
            return Err(Error::Protocol(format!(
                "rank {me} expected {} elements from rank {src}, message carries {}",
                desc.len(),
                payload.len()
            )));
        }
        desc.scatter(&payload, buf)?;
        self.stats.messages_received += 1;
        self.stats.bytes_received += payload.len() as u64 * COMPLEX_BYTES;
        Ok(())
    }

    fn barrier(&mut self) -> Result<()> {
        self.enter()?;
        let generation = self.barrier_gen;
        self.barrier_gen += 1;
        let size = self.fabric.size;
        {
            let mut st = self.fabric.lock();
            st.barriers.entry(generation).or_default().arrived += 1;
            st.stalled = 0;
        }
        self.fabric.cv.notify_all();
        self.fabric.wait_until(self.rank, |st| {
            let b = st.barriers.entry(generation).or_default();
            if b.arrived == size {
                b.departed += 1;
                if b.departed == size {
                    st.barriers.remove(&generation);
                }
                return Ok(Some(()));
            }
            if st.finished.iter().any(|f| *f) {
                return Err(Error::Transport("a rank exited before reaching the barrier".into()));
            }
            Ok(None)
        })
    }

    fn next_tag(&mut self, phase: Phase) -> Tag {
        let tag = Tag::new(phase, self.seq);
        self.seq += 1;
        tag
    }

    fn wire_stats(&self) -> WireStats {
        self.stats
    }
}

impl Drop for Endpoint {
    fn drop(&mut self) {
        let mut st = self.fabric.lock();
        st.finished[self.rank] = true;
        st.stalled = 0;
        if self.fabric.mode == Mode::Serial && st.turn == self.rank {
            self.fabric.pass_turn(&mut st, self.rank);
        }
        self.fabric.cv.notify_all();
    }
}

/// Runs `f` once per rank on its own thread and returns the per-rank results
/// in rank order.
///
/// If ranks fail, the first error that is not a knock-on transport failure
/// is returned. A panic in any rank is resumed on the caller's thread.
pub fn run_ranks<T, F>(p: usize, mode: Mode, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&mut Endpoint) -> Result<T> + Sync,
{
    let endpoints = make_communicators(p, mode)?;
    let f = &f;
    let outcomes: Vec<std::thread::Result<Result<T>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = endpoints
            .into_iter()
            .map(|mut ep| {
                scope.spawn(move || {
                    ep.enter()?;
                    f(&mut ep)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join()).collect()
    });

    let mut results = Vec::with_capacity(p);
    let mut errors = Vec::new();
    for outcome in outcomes {
        match outcome {
            Ok(Ok(v)) => results.push(v),
            Ok(Err(e)) => errors.push(e),
            Err(panic) => std::panic::resume_unwind(panic),
        }
    }
    if errors.is_empty() {
        return Ok(results);
    }
    let root = errors
        .iter()
        .position(|e| !matches!(e, Error::Transport(_)))
        .unwrap_or(0);
    Err(errors.swap_remove(root))
}

fn check_descs(size: usize, send: &[LayoutDescriptor], recv: &[LayoutDescriptor]) -> Result<()> {
    if send.len() != size || recv.len() != size {
        return Err(Error::Protocol(format!(
            "all-to-all over {size} ranks got {} send and {} receive descriptors",
            send.len(),
            recv.len()
        )));
    }
    Ok(())
}

fn send_order(pattern: CommPattern, me: usize, size: usize) -> Vec<usize> {
    match pattern {
        CommPattern::Pairwise => (1..size).map(|s| (me + s) % size).collect(),
        CommPattern::Collective => (0..size).filter(|&q| q != me).collect(),
    }
}

fn recv_order(pattern: CommPattern, me: usize, size: usize) -> Vec<usize> {
    match pattern {
        CommPattern::Pairwise => (1..size).map(|s| (me + size - s) % size).collect(),
        CommPattern::Collective => (0..size).filter(|&q| q != me).collect(),
    }
}

fn post_sends<C: Communicator + ?Sized>(
    comm: &mut C,
    pattern: CommPattern,
    tag: Tag,
    buf: &[Complex64],
    descs: &[LayoutDescriptor],
) -> Result<()> {
    let (me, size) = (comm.rank(), comm.size());
    for dest in send_order(pattern, me, size) {
        comm.send_strided(dest, tag, buf, &descs[dest])?;
    }
    if pattern == CommPattern::Collective && size > 1 {
        comm.barrier()?;
    }
    Ok(())
}

fn complete_recvs<C: Communicator + ?Sized>(
    comm: &mut C,
    pattern: CommPattern,
    tag: Tag,
    buf: &mut [Complex64],
    descs: &[LayoutDescriptor],
) -> Result<()> {
    let (me, size) = (comm.rank(), comm.size());
    for src in recv_order(pattern, me, size) {
        comm.recv_strided(src, tag, buf, &descs[src])?;
    }
    Ok(())
}

/// Every rank sends the region `send_descs[q]` of `send_buf` to rank `q` and
/// receives rank `q`'s contribution into `recv_descs[q]` of `recv_buf`.
/// The self block is copied locally and never touches the fabric.
pub fn all_to_all<C: Communicator + ?Sized>(
    comm: &mut C,
    pattern: CommPattern,
    phase: Phase,
    send_buf: &[Complex64],
    send_descs: &[LayoutDescriptor],
    recv_buf: &mut [Complex64],
    recv_descs: &[LayoutDescriptor],
) -> Result<()> {
    let me = comm.rank();
    check_descs(comm.size(), send_descs, recv_descs)?;
    let tag = comm.next_tag(phase);
    post_sends(comm, pattern, tag, send_buf, send_descs)?;
    let own = send_descs[me].gather(send_buf)?;
    recv_descs[me].scatter(&own, recv_buf)?;
    complete_recvs(comm, pattern, tag, recv_buf, recv_descs)
}

/// [`all_to_all`] over a single buffer. All sends are posted before any
/// receive lands, so a receive region may reuse the slots a send vacated.
pub fn all_to_all_inplace<C: Communicator + ?Sized>(
    comm: &mut C,
    pattern: CommPattern,
    phase: Phase,
    buf: &mut [Complex64],
    send_descs: &[LayoutDescriptor],
    recv_descs: &[LayoutDescriptor],
) -> Result<()> {
    let me = comm.rank();
    check_descs(comm.size(), send_descs, recv_descs)?;
    let tag = comm.next_tag(phase);
    post_sends(comm, pattern, tag, buf, send_descs)?;
    if send_descs[me] != recv_descs[me] {
        let own = send_descs[me].gather(buf)?;
        recv_descs[me].scatter(&own, buf)?;
    }
    complete_recvs(comm, pattern, tag, buf, recv_descs)
}
