//! Redistribution between the plane stage and the column stage.
//!
//! Before the exchange rank `q` holds planes `q·m0 .. (q+1)·m0` of the
//! `n0 × n1 × n2c` array (`m0 = n0/p`); afterwards it must hold every `n0`
//! column for `n1` indices `q·m1 .. (q+1)·m1` (`m1 = n1/p`). Both strategies
//! produce the same logical `(j, r, k)` view, they only differ in memory
//! placement and in how many copy passes they need.
//!
//! * [`Strategy::Transpose`] packs each outgoing block with its `(i, j)` axes
//!   swapped, runs a contiguous all-to-all, then unpacks the received blocks
//!   into the axes-flipped layout.
//! * [`Strategy::Strided`] sends column band `q` of the local buffer straight
//!   to rank `q` with a strided descriptor and receives rank `q`'s reply
//!   into the same band. No pack or unpack pass is needed and the buffer is
//!   reused in place; the price is that stage-3 columns become strided.
//!
//! The strided exchange swaps band `q` of rank `r` with band `r` of rank
//! `q`, so it is its own inverse.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::layout::{PlaneSlab, SlabShape, SpectralSlab, SpectralTag};
use crate::transport::{
    all_to_all, all_to_all_inplace, CommPattern, Communicator, CopyCounter, LayoutDescriptor, Phase,
};
use crate::COMPLEX_BYTES;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    Transpose,
    Strided,
}

impl Strategy {
    pub fn spectral_tag(self) -> SpectralTag {
        match self {
            Strategy::Transpose => SpectralTag::ContiguousFlipped,
            Strategy::Strided => SpectralTag::StridedInplace,
        }
    }
}

/// Writes the block bound for `dest` into `out` as `(j, i, k)`, i.e. with
/// the plane and column axes swapped.
fn pack_block(shape: &SlabShape, data: &[Complex64], dest: usize, out: &mut [Complex64]) {
    let (m0, m1, n1, n2c) = (shape.m0(), shape.m1(), shape.n1, shape.n2c);
    for j in 0..m1 {
        let c = dest * m1 + j;
        for i in 0..m0 {
            let src = (i * n1 + c) * n2c;
            let dst = (j * m0 + i) * n2c;
            out[dst..dst + n2c].copy_from_slice(&data[src..src + n2c]);
        }
    }
}

/// Places block `(j, i, k)` from source rank `src` at logical `(j, src·m0 + i, k)`
/// of an axes-flipped buffer.
fn unpack_block(shape: &SlabShape, block: &[Complex64], src: usize, out: &mut [Complex64]) {
    let (m0, m1, n0, n2c) = (shape.m0(), shape.m1(), shape.n0, shape.n2c);
    let run = m0 * n2c;
    for j in 0..m1 {
        let dst = (j * n0 + src * m0) * n2c;
        out[dst..dst + run].copy_from_slice(&block[j * run..(j + 1) * run]);
    }
}

/// Reverse of [`unpack_block`]: pulls the rows destined for rank `dest` out of
/// an axes-flipped buffer.
fn pack_flipped_block(shape: &SlabShape, data: &[Complex64], dest: usize, out: &mut [Complex64]) {
    let (m0, m1, n0, n2c) = (shape.m0(), shape.m1(), shape.n0, shape.n2c);
    let run = m0 * n2c;
    for j in 0..m1 {
        let src = (j * n0 + dest * m0) * n2c;
        out[j * run..(j + 1) * run].copy_from_slice(&data[src..src + run]);
    }
}

/// Reverse of [`pack_block`]: block `(j, i, k)` from rank `src` returns to
/// plane `i`, column `src·m1 + j`.
fn unpack_plane_block(shape: &SlabShape, block: &[Complex64], src: usize, out: &mut [Complex64]) {
    let (m0, m1, n1, n2c) = (shape.m0(), shape.m1(), shape.n1, shape.n2c);
    for j in 0..m1 {
        let c = src * m1 + j;
        for i in 0..m0 {
            let from = (j * m0 + i) * n2c;
            let to = (i * n1 + c) * n2c;
            out[to..to + n2c].copy_from_slice(&block[from..from + n2c]);
        }
    }
}

/// Contiguous `(n1/p) × (n0/p) × n2c` block for `dest`, transposed while
/// packing: `block(j, i, k) = slab(i, dest·(n1/p) + j, k)`.
pub fn pack_transposed(slab: &PlaneSlab, dest: usize) -> Result<Vec<Complex64>> {
    let shape = slab.shape();
    if dest >= shape.p {
        return Err(Error::Bounds(format!("destination {dest} outside {} ranks", shape.p)));
    }
    let mut out = vec![Complex64::default(); shape.block_len()];
    pack_block(shape, slab.data(), dest, &mut out);
    Ok(out)
}

/// Assembles the `p` received blocks (block `b` from rank `b`) into an
/// axes-flipped spectral slab.
pub fn unpack_received(blocks: &[&[Complex64]], out: &mut SpectralSlab) -> Result<()> {
    if out.tag() != SpectralTag::ContiguousFlipped {
        return Err(Error::Contract("unpack_received writes axes-flipped slabs".into()));
    }
    let shape = *out.shape();
    if blocks.len() != shape.p {
        return Err(Error::Protocol(format!(
            "expected {} blocks, got {}",
            shape.p,
            blocks.len()
        )));
    }
    for (src, block) in blocks.iter().enumerate() {
        if block.len() != shape.block_len() {
            return Err(Error::Protocol(format!(
                "block from rank {src} has {} elements, expected {}",
                block.len(),
                shape.block_len()
            )));
        }
        unpack_block(&shape, block, src, out.data_mut());
    }
    Ok(())
}

/// Precomputed geometry, scratch and counters for one rank's exchanges.
#[derive(Debug, Clone)]
pub struct ExchangePlan {
    shape: SlabShape,
    strategy: Strategy,
    pattern: CommPattern,
    send_descs: Vec<LayoutDescriptor>,
    recv_descs: Vec<LayoutDescriptor>,
    pack_buf: Vec<Complex64>,
    recv_buf: Vec<Complex64>,
    counters: CopyCounter,
}

impl ExchangePlan {
    pub fn new(shape: SlabShape, strategy: Strategy, pattern: CommPattern) -> Result<Self> {
        let shape = SlabShape::new(shape.n0, shape.n1, shape.n2c, shape.p, shape.rank)?;
        let p = shape.p;
        let (send_descs, scratch): (Vec<LayoutDescriptor>, usize) = match strategy {
            Strategy::Transpose => {
                let b = shape.block_len();
                let descs = (0..p).map(|q| LayoutDescriptor::contiguous(b, q * b)).collect();
                (descs, shape.local_len())
            }
            Strategy::Strided => {
                let band = shape.m1() * shape.n2c;
                let row = shape.n1 * shape.n2c;
                let descs = (0..p)
                    .map(|q| LayoutDescriptor::new(shape.m0(), band, row, q * band))
                    .collect();
                (descs, 0)
            }
        };
        Ok(Self {
            shape,
            strategy,
            pattern,
            recv_descs: send_descs.clone(),
            send_descs,
            pack_buf: vec![Complex64::default(); scratch],
            recv_buf: vec![Complex64::default(); scratch],
            counters: CopyCounter::default(),
        })
    }

    pub fn shape(&self) -> &SlabShape {
        &self.shape
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    pub fn pattern(&self) -> CommPattern {
        self.pattern
    }

    pub fn send_descriptors(&self) -> &[LayoutDescriptor] {
        &self.send_descs
    }

    pub fn recv_descriptors(&self) -> &[LayoutDescriptor] {
        &self.recv_descs
    }

    /// Totals accumulated over every exchange run through this plan.
    pub fn counters(&self) -> CopyCounter {
        self.counters
    }

    fn check_comm<C: Communicator + ?Sized>(&self, comm: &C, shape: &SlabShape) -> Result<()> {
        if *shape != self.shape {
            return Err(Error::Contract(format!(
                "slab shape {shape:?} does not match plan {:?}",
                self.shape
            )));
        }
        if comm.rank() != self.shape.rank || comm.size() != self.shape.p {
            return Err(Error::Contract(format!(
                "communicator rank {}/{} does not match plan rank {}/{}",
                comm.rank(),
                comm.size(),
                self.shape.rank,
                self.shape.p
            )));
        }
        Ok(())
    }

    /// Charges one local pass over the exchanged data to `field` and one
    /// pass over the kept block to `bytes_local`.
    fn charge_pass(&mut self, field: fn(&mut CopyCounter) -> &mut u64) {
        let block = self.shape.block_len() as u64 * COMPLEX_BYTES;
        *field(&mut self.counters) += (self.shape.p as u64 - 1) * block;
        self.counters.bytes_local += block;
    }

    /// Planes in, `(n1/p)`-column slab out.
    pub fn forward<C: Communicator + ?Sized>(
        &mut self,
        comm: &mut C,
        slab: PlaneSlab,
    ) -> Result<SpectralSlab> {
        self.check_comm(comm, slab.shape())?;
        let shape = self.shape;
        let wire_before = comm.wire_stats().bytes_sent;
        let data = match self.strategy {
            Strategy::Transpose => {
                let b = shape.block_len();
                for (dest, out) in self.pack_buf.chunks_exact_mut(b).enumerate() {
                    pack_block(&shape, slab.data(), dest, out);
                }
                self.charge_pass(|c| &mut c.bytes_packed);
                all_to_all(
                    comm,
                    self.pattern,
                    Phase::Forward,
                    &self.pack_buf,
                    &self.send_descs,
                    &mut self.recv_buf,
                    &self.recv_descs,
                )?;
                let mut data = slab.into_data();
                for (src, block) in self.recv_buf.chunks_exact(b).enumerate() {
                    unpack_block(&shape, block, src, &mut data);
                }
                self.charge_pass(|c| &mut c.bytes_unpacked);
                data
            }
            Strategy::Strided => {
                let mut data = slab.into_data();
                all_to_all_inplace(
                    comm,
                    self.pattern,
                    Phase::Forward,
                    &mut data,
                    &self.send_descs,
                    &self.recv_descs,
                )?;
                data
            }
        };
        self.counters.bytes_wire += comm.wire_stats().bytes_sent - wire_before;
        SpectralSlab::new(shape, self.strategy.spectral_tag(), data)
    }

    /// Exact inverse permutation of [`Self::forward`].
    pub fn inverse<C: Communicator + ?Sized>(
        &mut self,
        comm: &mut C,
        slab: SpectralSlab,
    ) -> Result<PlaneSlab> {
        self.check_comm(comm, slab.shape())?;
        if slab.tag() != self.strategy.spectral_tag() {
            return Err(Error::Contract(format!(
                "{:?} exchange cannot invert a {:?} slab",
                self.strategy,
                slab.tag()
            )));
        }
        let shape = self.shape;
        let wire_before = comm.wire_stats().bytes_sent;
        let data = match self.strategy {
            Strategy::Transpose => {
                let b = shape.block_len();
                for (dest, out) in self.pack_buf.chunks_exact_mut(b).enumerate() {
                    pack_flipped_block(&shape, slab.data(), dest, out);
                }
                self.charge_pass(|c| &mut c.bytes_packed);
                all_to_all(
                    comm,
                    self.pattern,
                    Phase::Inverse,
                    &self.pack_buf,
                    &self.send_descs,
                    &mut self.recv_buf,
                    &self.recv_descs,
                )?;
                let mut data = slab.into_data();
                for (src, block) in self.recv_buf.chunks_exact(b).enumerate() {
                    unpack_plane_block(&shape, block, src, &mut data);
                }
                self.charge_pass(|c| &mut c.bytes_unpacked);
                data
            }
            Strategy::Strided => {
                let mut data = slab.into_data();
                all_to_all_inplace(
                    comm,
                    self.pattern,
                    Phase::Inverse,
                    &mut data,
                    &self.send_descs,
                    &self.recv_descs,
                )?;
                data
            }
        };
        self.counters.bytes_wire += comm.wire_stats().bytes_sent - wire_before;
        PlaneSlab::new(shape, data)
    }
}

fn one_shot<C: Communicator + ?Sized, T>(
    comm: &mut C,
    shape: SlabShape,
    strategy: Strategy,
    pattern: CommPattern,
    run: impl FnOnce(&mut ExchangePlan, &mut C) -> Result<T>,
) -> Result<T> {
    let mut plan = ExchangePlan::new(shape, strategy, pattern)?;
    run(&mut plan, comm)
}

pub fn exchange_transpose_forward<C: Communicator + ?Sized>(
    comm: &mut C,
    pattern: CommPattern,
    slab: PlaneSlab,
) -> Result<SpectralSlab> {
    let shape = *slab.shape();
    one_shot(comm, shape, Strategy::Transpose, pattern, |p, c| p.forward(c, slab))
}

pub fn exchange_strided_forward<C: Communicator + ?Sized>(
    comm: &mut C,
    pattern: CommPattern,
    slab: PlaneSlab,
) -> Result<SpectralSlab> {
    let shape = *slab.shape();
    one_shot(comm, shape, Strategy::Strided, pattern, |p, c| p.forward(c, slab))
}

pub fn exchange_transpose_inverse<C: Communicator + ?Sized>(
    comm: &mut C,
    pattern: CommPattern,
    slab: SpectralSlab,
) -> Result<PlaneSlab> {
    let shape = *slab.shape();
    one_shot(comm, shape, Strategy::Transpose, pattern, |p, c| p.inverse(c, slab))
}

pub fn exchange_strided_inverse<C: Communicator + ?Sized>(
    comm: &mut C,
    pattern: CommPattern,
    slab: SpectralSlab,
) -> Result<PlaneSlab> {
    let shape = *slab.shape();
    one_shot(comm, shape, Strategy::Strided, pattern, |p, c| p.inverse(c, slab))
}
