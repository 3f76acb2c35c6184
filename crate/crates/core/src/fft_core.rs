//! Sequential FFT kernels.
//!
//! Everything here is radix-2 and unnormalized: a forward transform followed
//! by an inverse transform multiplies the data by `n`. The distributed driver
//! applies the single `1/N` factor.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    /// `exp(-2πi jk/n)`
    Forward,
    /// `exp(+2πi jk/n)`
    Inverse,
}

/// Roots of unity `exp(-2πik/n)` for `k` in `[0, n/2)`.
///
/// Immutable once built; wrap it in an `Arc` to share between ranks.
#[derive(Debug, Clone, PartialEq)]
pub struct TwiddleTable {
    n: usize,
    factors: Vec<Complex64>,
}

impl TwiddleTable {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 || !n.is_power_of_two() {
            return Err(Error::Size(format!(
                "transform length {n} is not a power of two"
            )));
        }
        let step = -2.0 * PI / n as f64;
        let factors = (0..n / 2)
            .map(|k| {
                if k == 0 {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::from_polar(1.0, step * k as f64)
                }
            })
            .collect();
        Ok(Self { n, factors })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn factors(&self) -> &[Complex64] {
        &self.factors
    }

    #[inline]
    fn factor(&self, k: usize, direction: Direction) -> Complex64 {
        let w = self.factors[k];
        match direction {
            Direction::Forward => w,
            Direction::Inverse => w.conj(),
        }
    }
}

/// Convenience wrapper around [`TwiddleTable::new`].
pub fn plan_twiddles(n: usize) -> Result<TwiddleTable> {
    TwiddleTable::new(n)
}

fn check_len(len: usize, tw: &TwiddleTable) -> Result<()> {
    if len != tw.n {
        return Err(Error::Size(format!(
            "buffer length {len} does not match twiddle table length {}",
            tw.n
        )));
    }
    Ok(())
}

fn bit_reverse_permute(buf: &mut [Complex64]) {
    let n = buf.len();
    if n <= 2 {
        return;
    }
    let shift = usize::BITS - n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> shift;
        if i < j {
            buf.swap(i, j);
        }
    }
}

/// In-place iterative radix-2 decimation-in-time transform.
pub fn fft_c2c_inplace(
    buf: &mut [Complex64],
    direction: Direction,
    tw: &TwiddleTable,
) -> Result<()> {
    check_len(buf.len(), tw)?;
    let n = buf.len();
    if n < 2 {
        return Ok(());
    }
    bit_reverse_permute(buf);

    let mut half = 1;
    while half < n {
        let span = half * 2;
        let step = n / span;
        for chunk in buf.chunks_exact_mut(span) {
            let (lo, hi) = chunk.split_at_mut(half);
            for (k, (a, b)) in lo.iter_mut().zip(hi.iter_mut()).enumerate() {
                let t = *b * tw.factor(k * step, direction);
                *b = *a - t;
                *a += t;
            }
        }
        half = span;
    }
    Ok(())
}

/// Placement of a logical vector inside a larger buffer as a two-level
/// lattice: logical element `r` lives at
/// `base_offset + (r % inner_count) * inner_stride + (r / inner_count) * block_stride`.
///
/// Strides are in complex elements and may be negative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TwoLevelStride {
    pub inner_count: usize,
    pub inner_stride: isize,
    pub block_count: usize,
    pub block_stride: isize,
    pub base_offset: usize,
}

impl TwoLevelStride {
    /// A plain single-level stride.
    pub fn simple(len: usize, stride: isize, base_offset: usize) -> Self {
        Self {
            inner_count: len,
            inner_stride: stride,
            block_count: 1,
            block_stride: len as isize * stride,
            base_offset,
        }
    }

    /// Number of logical elements addressed.
    pub fn len(&self) -> usize {
        self.inner_count * self.block_count
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Signed offset of logical element `r`; may lie outside any buffer.
    #[inline]
    pub fn raw_offset(&self, r: usize) -> isize {
        let inner = (r % self.inner_count) as isize;
        let block = (r / self.inner_count) as isize;
        self.base_offset as isize + inner * self.inner_stride + block * self.block_stride
    }

    /// Offsets in logical order. Only meaningful after [`Self::validate`].
    pub fn offsets(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).map(|r| self.raw_offset(r) as usize)
    }

    /// Checks that every offset is inside `[0, buf_len)` and that no two
    /// logical elements share a slot.
    pub fn validate(&self, buf_len: usize) -> Result<()> {
        if self.inner_count == 0 || self.block_count == 0 {
            return Err(Error::Layout(format!("empty stride pattern {self:?}")));
        }
        let extent = |count: usize, stride: isize| -> (isize, isize) {
            let span = (count as isize - 1) * stride;
            (span.min(0), span.max(0))
        };
        let (inner_lo, inner_hi) = extent(self.inner_count, self.inner_stride);
        let (block_lo, block_hi) = extent(self.block_count, self.block_stride);
        let lo = self.base_offset as isize + inner_lo + block_lo;
        let hi = self.base_offset as isize + inner_hi + block_hi;
        if lo < 0 || hi >= buf_len as isize {
            return Err(Error::Layout(format!(
                "stride pattern {self:?} addresses [{lo}, {hi}] outside buffer of length {buf_len}"
            )));
        }
        if self.is_injective_by_shape() {
            return Ok(());
        }
        let mut seen: Vec<usize> = self.offsets().collect();
        seen.sort_unstable();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Layout(format!(
                "stride pattern {self:?} addresses overlapping elements"
            )));
        }
        Ok(())
    }

    /// Cheap sufficient condition for distinct offsets: the inner runs are
    /// either disjoint from each other or nest between one another.
    fn is_injective_by_shape(&self) -> bool {
        let inner = self.inner_stride.unsigned_abs();
        let block = self.block_stride.unsigned_abs();
        let inner_ok = self.inner_count == 1 || inner != 0;
        let block_ok = self.block_count == 1 || block != 0;
        if !(inner_ok && block_ok) {
            return false;
        }
        if self.inner_count == 1 || self.block_count == 1 {
            return true;
        }
        block > (self.inner_count - 1) * inner || inner > (self.block_count - 1) * block
    }
}

/// Transforms the logical vector addressed by `layout`, leaving every other
/// slot of `buf` untouched.
pub fn fft_c2c_strided(
    buf: &mut [Complex64],
    layout: &TwoLevelStride,
    direction: Direction,
    tw: &TwiddleTable,
) -> Result<()> {
    let mut scratch = vec![Complex64::default(); tw.len()];
    fft_c2c_strided_with_scratch(buf, layout, direction, tw, &mut scratch)
}

/// As [`fft_c2c_strided`] but with a caller-owned scratch vector of length
/// `tw.len()`, so a column sweep allocates nothing.
pub fn fft_c2c_strided_with_scratch(
    buf: &mut [Complex64],
    layout: &TwoLevelStride,
    direction: Direction,
    tw: &TwiddleTable,
    scratch: &mut [Complex64],
) -> Result<()> {
    check_len(layout.len(), tw)?;
    check_len(scratch.len(), tw)?;
    layout.validate(buf.len())?;
    for (slot, off) in scratch.iter_mut().zip(layout.offsets()) {
        *slot = buf[off];
    }
    fft_c2c_inplace(scratch, direction, tw)?;
    for (value, off) in scratch.iter().zip(layout.offsets()) {
        buf[off] = *value;
    }
    Ok(())
}

fn check_real_len(n: usize, tw: &TwiddleTable) -> Result<()> {
    if n < 2 || !n.is_power_of_two() {
        return Err(Error::Size(format!(
            "real transform length {n} must be a power of two >= 2"
        )));
    }
    check_len(n, tw)
}

/// Real-to-complex transform; returns the `n/2 + 1` non-redundant bins.
pub fn fft_r2c_1d(input: &[f64], tw: &TwiddleTable) -> Result<Vec<Complex64>> {
    let n = input.len();
    check_real_len(n, tw)?;
    let mut out = vec![Complex64::default(); n / 2 + 1];
    let mut scratch = vec![Complex64::default(); n];
    r2c_into(input, &mut out, &mut scratch, tw)?;
    Ok(out)
}

pub(crate) fn r2c_into(
    input: &[f64],
    out: &mut [Complex64],
    scratch: &mut [Complex64],
    tw: &TwiddleTable,
) -> Result<()> {
    let n = input.len();
    check_real_len(n, tw)?;
    if out.len() != n / 2 + 1 || scratch.len() != n {
        return Err(Error::Size(format!(
            "r2c of length {n} needs {} output bins and {n} scratch, got {} and {}",
            n / 2 + 1,
            out.len(),
            scratch.len()
        )));
    }
    for (s, &x) in scratch.iter_mut().zip(input) {
        *s = Complex64::new(x, 0.0);
    }
    fft_c2c_inplace(scratch, Direction::Forward, tw)?;
    out.copy_from_slice(&scratch[..n / 2 + 1]);
    Ok(())
}

/// Unnormalized complex-to-real transform of a half spectrum of a length-`n`
/// real signal.
pub fn fft_c2r_1d(input: &[Complex64], n: usize, tw: &TwiddleTable) -> Result<Vec<f64>> {
    check_real_len(n, tw)?;
    let mut out = vec![0.0; n];
    let mut scratch = vec![Complex64::default(); n];
    c2r_into(input, &mut out, &mut scratch, tw)?;
    Ok(out)
}

/// Returns the largest imaginary residue seen before it was discarded.
pub(crate) fn c2r_into(
    input: &[Complex64],
    out: &mut [f64],
    scratch: &mut [Complex64],
    tw: &TwiddleTable,
) -> Result<f64> {
    let n = out.len();
    check_real_len(n, tw)?;
    if input.len() != n / 2 + 1 || scratch.len() != n {
        return Err(Error::Size(format!(
            "c2r of length {n} needs {} input bins and {n} scratch, got {} and {}",
            n / 2 + 1,
            input.len(),
            scratch.len()
        )));
    }
    let half = n / 2;
    scratch[..=half].copy_from_slice(input);
    for k in half + 1..n {
        scratch[k] = input[n - k].conj();
    }
    fft_c2c_inplace(scratch, Direction::Inverse, tw)?;

    let scale = input.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let limit = 1e-9 * n as f64 * scale;
    let mut residue: f64 = 0.0;
    for (o, z) in out.iter_mut().zip(scratch.iter()) {
        *o = z.re;
        residue = residue.max(z.im.abs());
    }
    if residue > limit {
        return Err(Error::Consistency { residue, limit });
    }
    Ok(residue)
}

/// Planned 2D r2c/c2r transform of one `n1 × n2` row-major plane, with the
/// complex side stored as `n1 × (n2/2 + 1)`.
#[derive(Debug, Clone)]
pub struct PlaneTransform {
    n1: usize,
    n2: usize,
    tw1: std::sync::Arc<TwiddleTable>,
    tw2: std::sync::Arc<TwiddleTable>,
    row: Vec<Complex64>,
    col: Vec<Complex64>,
}

impl PlaneTransform {
    pub fn new(tw1: std::sync::Arc<TwiddleTable>, tw2: std::sync::Arc<TwiddleTable>) -> Result<Self> {
        let (n1, n2) = (tw1.len(), tw2.len());
        if n2 < 2 {
            return Err(Error::Size(format!("plane row length {n2} must be >= 2")));
        }
        Ok(Self {
            n1,
            n2,
            row: vec![Complex64::default(); n2],
            col: vec![Complex64::default(); n1],
            tw1,
            tw2,
        })
    }

    pub fn n2c(&self) -> usize {
        self.n2 / 2 + 1
    }

    fn column(&self, k: usize) -> TwoLevelStride {
        TwoLevelStride::simple(self.n1, self.n2c() as isize, k)
    }

    fn check(&self, real: usize, complex: usize) -> Result<()> {
        if real != self.n1 * self.n2 || complex != self.n1 * self.n2c() {
            return Err(Error::Size(format!(
                "plane {}x{} needs {} reals and {} complex values, got {real} and {complex}",
                self.n1,
                self.n2,
                self.n1 * self.n2,
                self.n1 * self.n2c()
            )));
        }
        Ok(())
    }

    /// Rows (r2c along the fast axis), then the retained columns.
    pub fn forward(&mut self, plane: &[f64], out: &mut [Complex64]) -> Result<()> {
        self.check(plane.len(), out.len())?;
        let n2c = self.n2c();
        for (src, dst) in plane.chunks_exact(self.n2).zip(out.chunks_exact_mut(n2c)) {
            r2c_into(src, dst, &mut self.row, &self.tw2)?;
        }
        for k in 0..n2c {
            let col = self.column(k);
            fft_c2c_strided_with_scratch(out, &col, Direction::Forward, &self.tw1, &mut self.col)?;
        }
        Ok(())
    }

    /// Exact reverse of [`Self::forward`]. `spectrum` is used as workspace
    /// and is left holding the column-inverted data. Returns the largest
    /// imaginary residue discarded by the row c2r step.
    pub fn inverse(&mut self, spectrum: &mut [Complex64], out: &mut [f64]) -> Result<f64> {
        self.check(out.len(), spectrum.len())?;
        let n2c = self.n2c();
        for k in 0..n2c {
            let col = self.column(k);
            fft_c2c_strided_with_scratch(spectrum, &col, Direction::Inverse, &self.tw1, &mut self.col)?;
        }
        let mut residue: f64 = 0.0;
        for (src, dst) in spectrum.chunks_exact(n2c).zip(out.chunks_exact_mut(self.n2)) {
            residue = residue.max(c2r_into(src, dst, &mut self.row, &self.tw2)?);
        }
        Ok(residue)
    }
}

fn plane_transform(n1: usize, n2: usize) -> Result<PlaneTransform> {
    PlaneTransform::new(
        std::sync::Arc::new(TwiddleTable::new(n1)?),
        std::sync::Arc::new(TwiddleTable::new(n2)?),
    )
}

/// 2D r2c of a row-major `n1 × n2` plane into `n1 × (n2/2 + 1)`.
pub fn fft2d_r2c_plane(plane: &[f64], n1: usize, n2: usize) -> Result<Vec<Complex64>> {
    let mut t = plane_transform(n1, n2)?;
    let mut out = vec![Complex64::default(); n1 * t.n2c()];
    t.forward(plane, &mut out)?;
    Ok(out)
}

/// Unnormalized 2D c2r of an `n1 × (n2/2 + 1)` half spectrum.
pub fn fft2d_c2r_plane(plane: &[Complex64], n1: usize, n2: usize) -> Result<Vec<f64>> {
    let mut t = plane_transform(n1, n2)?;
    let mut work = plane.to_vec();
    let mut out = vec![0.0; n1 * n2];
    t.inverse(&mut work, &mut out)?;
    Ok(out)
}
