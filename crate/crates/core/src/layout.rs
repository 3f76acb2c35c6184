//! Grid sizes, slab ownership and the rank-local field containers.
//!
//! Storage is row-major with the last index fastest everywhere. The
//! distributed spectrum has two possible memory layouts after stage 2;
//! [`SpectralSlab`] hides the difference behind a logical `(j, r, k)`
//! accessor where `j` is the local `n1` index, `r` the global `n0` index and
//! `k` the complex `n2` index.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft_core::TwoLevelStride;

/// Global transform extents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GlobalGrid {
    pub n0: usize,
    pub n1: usize,
    pub n2: usize,
}

impl GlobalGrid {
    pub fn new(n0: usize, n1: usize, n2: usize) -> Result<Self> {
        for (name, n) in [("n0", n0), ("n1", n1), ("n2", n2)] {
            if n < 2 || !n.is_power_of_two() {
                return Err(Error::Config(format!(
                    "{name} = {n} must be a power of two >= 2"
                )));
            }
        }
        Ok(Self { n0, n1, n2 })
    }

    pub fn cube(n: usize) -> Result<Self> {
        Self::new(n, n, n)
    }

    /// Complex extent of the fastest axis, `n2/2 + 1`.
    pub fn n2c(&self) -> usize {
        self.n2 / 2 + 1
    }

    pub fn real_len(&self) -> usize {
        self.n0 * self.n1 * self.n2
    }

    pub fn spectral_len(&self) -> usize {
        self.n0 * self.n1 * self.n2c()
    }
}

impl std::fmt::Display for GlobalGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}x{}", self.n0, self.n1, self.n2)
    }
}

/// Checks that `p` ranks can share `grid` as uniform slabs.
pub fn validate(grid: &GlobalGrid, p: usize) -> Result<()> {
    GlobalGrid::new(grid.n0, grid.n1, grid.n2)?;
    if p == 0 {
        return Err(Error::Config("process count must be at least 1".into()));
    }
    for (name, n) in [("n0", grid.n0), ("n1", grid.n1)] {
        if n % p != 0 {
            return Err(Error::Config(format!(
                "p does not divide {name} ({p} does not divide {n})"
            )));
        }
    }
    Ok(())
}

/// Which axis a slab is cut along.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DistAxis {
    /// Real side: `(n0/p) × n1 × n2`.
    RealAxis0,
    /// Spectral side: logically `(n1/p) × n0 × n2c`.
    SpectralAxis1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SlabLayout {
    pub grid: GlobalGrid,
    pub p: usize,
    pub rank: usize,
    pub dist_axis: DistAxis,
}

impl SlabLayout {
    pub fn new(grid: GlobalGrid, p: usize, rank: usize, dist_axis: DistAxis) -> Result<Self> {
        validate(&grid, p)?;
        if rank >= p {
            return Err(Error::Config(format!("rank {rank} out of range for {p} processes")));
        }
        Ok(Self { grid, p, rank, dist_axis })
    }

    /// Complex-side geometry of this rank.
    pub fn shape(&self) -> SlabShape {
        SlabShape {
            n0: self.grid.n0,
            n1: self.grid.n1,
            n2c: self.grid.n2c(),
            p: self.p,
            rank: self.rank,
        }
    }

    /// Number of real elements a `RealAxis0` slab holds.
    pub fn real_len(&self) -> usize {
        (self.grid.n0 / self.p) * self.grid.n1 * self.grid.n2
    }
}

/// `(start, length)` of the owned range along the distributed axis.
pub fn owned_range(layout: &SlabLayout) -> (usize, usize) {
    let n = match layout.dist_axis {
        DistAxis::RealAxis0 => layout.grid.n0,
        DistAxis::SpectralAxis1 => layout.grid.n1,
    };
    let len = n / layout.p;
    (layout.rank * len, len)
}

/// Geometry of a rank's complex buffers: `n0 × n1 × n2c` global, cut first
/// along `n0` (before the exchange) and then along `n1` (after it).
///
/// Unlike [`GlobalGrid`] this allows any `n2c >= 1`, so 2D redistributions
/// can be described with `n2c = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SlabShape {
    pub n0: usize,
    pub n1: usize,
    pub n2c: usize,
    pub p: usize,
    pub rank: usize,
}

impl SlabShape {
    pub fn new(n0: usize, n1: usize, n2c: usize, p: usize, rank: usize) -> Result<Self> {
        if n0 == 0 || n1 == 0 || n2c == 0 {
            return Err(Error::Config(format!("empty slab shape {n0}x{n1}x{n2c}")));
        }
        if p == 0 {
            return Err(Error::Config("process count must be at least 1".into()));
        }
        for (name, n) in [("n0", n0), ("n1", n1)] {
            if n % p != 0 {
                return Err(Error::Config(format!(
                    "p does not divide {name} ({p} does not divide {n})"
                )));
            }
        }
        if rank >= p {
            return Err(Error::Config(format!("rank {rank} out of range for {p} processes")));
        }
        Ok(Self { n0, n1, n2c, p, rank })
    }

    /// Same geometry seen from another rank.
    pub fn with_rank(&self, rank: usize) -> Self {
        Self { rank, ..*self }
    }

    /// Local `n0` extent before the exchange.
    pub fn m0(&self) -> usize {
        self.n0 / self.p
    }

    /// Local `n1` extent after the exchange.
    pub fn m1(&self) -> usize {
        self.n1 / self.p
    }

    /// Complex elements held per rank; the same on both sides of the exchange.
    pub fn local_len(&self) -> usize {
        self.m0() * self.n1 * self.n2c
    }

    /// Elements moved between one ordered pair of ranks.
    pub fn block_len(&self) -> usize {
        self.m0() * self.m1() * self.n2c
    }

    pub fn global_len(&self) -> usize {
        self.n0 * self.n1 * self.n2c
    }
}

/// Real input slab, `(n0/p) × n1 × n2` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RealSlab {
    layout: SlabLayout,
    data: Vec<f64>,
}

impl RealSlab {
    pub fn new(layout: SlabLayout, data: Vec<f64>) -> Result<Self> {
        if layout.dist_axis != DistAxis::RealAxis0 {
            return Err(Error::Contract("real slabs are distributed along n0".into()));
        }
        if data.len() != layout.real_len() {
            return Err(Error::Size(format!(
                "real slab needs {} elements, got {}",
                layout.real_len(),
                data.len()
            )));
        }
        Ok(Self { layout, data })
    }

    pub fn zeros(layout: SlabLayout) -> Result<Self> {
        Self::new(layout, vec![0.0; layout.real_len()])
    }

    pub fn layout(&self) -> &SlabLayout {
        &self.layout
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }
}

/// Output of stage 1 (and input of the inverse stage 1): the rank's
/// `(n0/p) × n1 × n2c` complex planes.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneSlab {
    shape: SlabShape,
    data: Vec<Complex64>,
}

impl PlaneSlab {
    pub fn new(shape: SlabShape, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != shape.local_len() {
            return Err(Error::Size(format!(
                "plane slab needs {} elements, got {}",
                shape.local_len(),
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn shape(&self) -> &SlabShape {
        &self.shape
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<Complex64> {
        self.data
    }

    /// Offset of local plane `i`, global `n1` index `c`, complex index `k`.
    #[inline]
    pub fn offset(&self, i: usize, c: usize, k: usize) -> usize {
        (i * self.shape.n1 + c) * self.shape.n2c + k
    }
}

/// Memory layout of a spectral slab after the exchange.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SpectralTag {
    /// Axes flipped: `(j, r, k)` stored at `j·n0·n2c + r·n2c + k`.
    ContiguousFlipped,
    /// Received blocks sit in the column bands their outgoing counterparts
    /// vacated; `n0` columns are strided.
    StridedInplace,
}

/// Rank-local spectrum, logically `(n1/p) × n0 × n2c`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralSlab {
    shape: SlabShape,
    tag: SpectralTag,
    data: Vec<Complex64>,
}

impl SpectralSlab {
    pub fn new(shape: SlabShape, tag: SpectralTag, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != shape.local_len() {
            return Err(Error::Size(format!(
                "spectral slab needs {} elements, got {}",
                shape.local_len(),
                data.len()
            )));
        }
        Ok(Self { shape, tag, data })
    }

    pub fn shape(&self) -> &SlabShape {
        &self.shape
    }

    pub fn tag(&self) -> SpectralTag {
        self.tag
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<Complex64> {
        self.data
    }

    /// Buffer offset of logical element `(j, r, k)`.
    pub fn offset(&self, j: usize, r: usize, k: usize) -> Result<usize> {
        let s = &self.shape;
        if j >= s.m1() || r >= s.n0 || k >= s.n2c {
            return Err(Error::Bounds(format!(
                "({j}, {r}, {k}) outside logical range ({}, {}, {})",
                s.m1(),
                s.n0,
                s.n2c
            )));
        }
        Ok(self.offset_unchecked(j, r, k))
    }

    #[inline]
    pub(crate) fn offset_unchecked(&self, j: usize, r: usize, k: usize) -> usize {
        let s = &self.shape;
        match self.tag {
            SpectralTag::ContiguousFlipped => (j * s.n0 + r) * s.n2c + k,
            SpectralTag::StridedInplace => {
                let (m0, m1) = (s.m0(), s.m1());
                (r % m0) * (s.n1 * s.n2c) + (r / m0) * (m1 * s.n2c) + j * s.n2c + k
            }
        }
    }

    pub fn get(&self, j: usize, r: usize, k: usize) -> Result<Complex64> {
        Ok(self.data[self.offset(j, r, k)?])
    }

    /// Placement of the `n0` column `(j, ·, k)` in the buffer. Works for both
    /// tags; see [`column_stride_descriptor`] for the strided-only form.
    pub fn column(&self, j: usize, k: usize) -> Result<TwoLevelStride> {
        let s = &self.shape;
        if j >= s.m1() || k >= s.n2c {
            return Err(Error::Bounds(format!("column ({j}, {k}) outside ({}, {})", s.m1(), s.n2c)));
        }
        Ok(match self.tag {
            SpectralTag::ContiguousFlipped => {
                TwoLevelStride::simple(s.n0, s.n2c as isize, j * s.n0 * s.n2c + k)
            }
            SpectralTag::StridedInplace => TwoLevelStride {
                inner_count: s.m0(),
                inner_stride: (s.n1 * s.n2c) as isize,
                block_count: s.p,
                block_stride: (s.m1() * s.n2c) as isize,
                base_offset: j * s.n2c + k,
            },
        })
    }

    /// Logical view in `(j, r, k)` order.
    pub fn logical(&self) -> Vec<Complex64> {
        let s = &self.shape;
        let mut out = Vec::with_capacity(s.local_len());
        for j in 0..s.m1() {
            for r in 0..s.n0 {
                for k in 0..s.n2c {
                    out.push(self.data[self.offset_unchecked(j, r, k)]);
                }
            }
        }
        out
    }
}

/// Stride pattern of the `n0` column `(j, ·, k)` of a strided-in-place slab.
pub fn column_stride_descriptor(slab: &SpectralSlab, j: usize, k: usize) -> Result<TwoLevelStride> {
    if slab.tag() != SpectralTag::StridedInplace {
        return Err(Error::Contract(
            "column stride descriptors only apply to strided-in-place slabs".into(),
        ));
    }
    slab.column(j, k)
}

/// Free-function form of [`SpectralSlab::offset`].
pub fn spectral_offset(slab: &SpectralSlab, j: usize, r: usize, k: usize) -> Result<usize> {
    slab.offset(j, r, k)
}
