//! The distributed 3D r2c/c2r transform.

use std::collections::HashMap;
use std::sync::Arc;
use std::time::{Duration, Instant};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::exchange::{ExchangePlan, Strategy};
use crate::fft_core::{fft_c2c_strided_with_scratch, Direction, PlaneTransform, TwiddleTable};
use crate::layout::{DistAxis, GlobalGrid, PlaneSlab, RealSlab, SlabLayout, SpectralSlab};
use crate::transport::{run_ranks, CommPattern, Communicator, CopyCounter, Mode};

/// Wall time of the three stages of one transform.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StageTimings {
    pub stage1: Duration,
    pub exchange: Duration,
    pub stage3: Duration,
}

impl StageTimings {
    pub fn total(&self) -> Duration {
        self.stage1 + self.exchange + self.stage3
    }
}

/// One rank's reusable transform plan.
#[derive(Debug)]
pub struct FftPlan {
    layout: SlabLayout,
    strategy: Strategy,
    pattern: CommPattern,
    tw0: Arc<TwiddleTable>,
    plane: PlaneTransform,
    exchange: ExchangePlan,
    column: Vec<Complex64>,
    forward_timings: StageTimings,
    inverse_timings: StageTimings,
    imag_residue: f64,
}

impl FftPlan {
    pub fn new(
        grid: GlobalGrid,
        p: usize,
        rank: usize,
        strategy: Strategy,
        pattern: CommPattern,
    ) -> Result<Self> {
        let layout = SlabLayout::new(grid, p, rank, DistAxis::RealAxis0)?;
        let mut tables: HashMap<usize, Arc<TwiddleTable>> = HashMap::new();
        let mut table = |n: usize| -> Result<Arc<TwiddleTable>> {
            if let Some(t) = tables.get(&n) {
                return Ok(Arc::clone(t));
            }
            let t = Arc::new(TwiddleTable::new(n)?);
            tables.insert(n, Arc::clone(&t));
            Ok(t)
        };
        let tw0 = table(grid.n0)?;
        let plane = PlaneTransform::new(table(grid.n1)?, table(grid.n2)?)?;
        let exchange = ExchangePlan::new(layout.shape(), strategy, pattern)?;
        Ok(Self {
            layout,
            strategy,
            pattern,
            column: vec![Complex64::default(); grid.n0],
            tw0,
            plane,
            exchange,
            forward_timings: StageTimings::default(),
            inverse_timings: StageTimings::default(),
            imag_residue: 0.0,
        })
    }

    pub fn grid(&self) -> GlobalGrid {
        self.layout.grid
    }

    pub fn layout(&self) -> &SlabLayout {
        &self.layout
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    pub fn pattern(&self) -> CommPattern {
        self.pattern
    }

    pub fn exchange_plan(&self) -> &ExchangePlan {
        &self.exchange
    }

    /// Exchange copy counters accumulated over the life of the plan.
    pub fn counters(&self) -> CopyCounter {
        self.exchange.counters()
    }

    pub fn forward_timings(&self) -> StageTimings {
        self.forward_timings
    }

    pub fn inverse_timings(&self) -> StageTimings {
        self.inverse_timings
    }

    /// Largest imaginary part discarded by the last inverse, before
    /// normalization.
    pub fn last_imag_residue(&self) -> f64 {
        self.imag_residue
    }

    fn columns(&mut self, slab: &mut SpectralSlab, direction: Direction) -> Result<()> {
        let shape = *slab.shape();
        for j in 0..shape.m1() {
            for k in 0..shape.n2c {
                let col = slab.column(j, k)?;
                fft_c2c_strided_with_scratch(slab.data_mut(), &col, direction, &self.tw0, &mut self.column)?;
            }
        }
        Ok(())
    }

    /// Unnormalized forward transform. Logical element `(j, r, k)` of the
    /// result is bin `(r, rank·n1/p + j, k)` of the global r2c transform.
    pub fn forward<C: Communicator + ?Sized>(
        &mut self,
        comm: &mut C,
        real: &RealSlab,
    ) -> Result<SpectralSlab> {
        if real.layout() != &self.layout {
            return Err(Error::Contract(format!(
                "real slab layout {:?} does not match plan {:?}",
                real.layout(),
                self.layout
            )));
        }
        let grid = self.layout.grid;
        let shape = self.layout.shape();
        let t0 = Instant::now();
        let mut planes = vec![Complex64::default(); shape.local_len()];
        for (src, dst) in real
            .data()
            .chunks_exact(grid.n1 * grid.n2)
            .zip(planes.chunks_exact_mut(grid.n1 * grid.n2c()))
        {
            self.plane.forward(src, dst)?;
        }
        let t1 = Instant::now();
        let mut spectral = self.exchange.forward(comm, PlaneSlab::new(shape, planes)?)?;
        let t2 = Instant::now();
        self.columns(&mut spectral, Direction::Forward)?;
        let t3 = Instant::now();
        self.forward_timings = StageTimings { stage1: t1 - t0, exchange: t2 - t1, stage3: t3 - t2 };
        Ok(spectral)
    }

    /// Normalized inverse: `inverse(forward(x)) == x` up to rounding.
    pub fn inverse<C: Communicator + ?Sized>(
        &mut self,
        comm: &mut C,
        mut spectral: SpectralSlab,
    ) -> Result<RealSlab> {
        if spectral.tag() != self.strategy.spectral_tag() {
            return Err(Error::Contract(format!(
                "{:?} plan cannot invert a {:?} slab",
                self.strategy,
                spectral.tag()
            )));
        }
        if *spectral.shape() != self.layout.shape() {
            return Err(Error::Contract(format!(
                "spectral slab shape {:?} does not match plan {:?}",
                spectral.shape(),
                self.layout.shape()
            )));
        }
        let grid = self.layout.grid;
        let t0 = Instant::now();
        self.columns(&mut spectral, Direction::Inverse)?;
        let t1 = Instant::now();
        let mut planes = self.exchange.inverse(comm, spectral)?;
        let t2 = Instant::now();
        let mut out = vec![0.0; self.layout.real_len()];
        let mut residue: f64 = 0.0;
        for (src, dst) in planes
            .data_mut()
            .chunks_exact_mut(grid.n1 * grid.n2c())
            .zip(out.chunks_exact_mut(grid.n1 * grid.n2))
        {
            residue = residue.max(self.plane.inverse(src, dst)?);
        }
        let scale = 1.0 / grid.real_len() as f64;
        out.iter_mut().for_each(|v| *v *= scale);
        let t3 = Instant::now();
        self.imag_residue = residue;
        self.inverse_timings = StageTimings { stage1: t3 - t2, exchange: t2 - t1, stage3: t1 - t0 };
        RealSlab::new(self.layout, out)
    }
}

/// Builds the plan for one rank.
pub fn plan(
    grid: GlobalGrid,
    p: usize,
    rank: usize,
    strategy: Strategy,
    pattern: CommPattern,
) -> Result<FftPlan> {
    FftPlan::new(grid, p, rank, strategy, pattern)
}

/// Splits a global row-major real field into the `p` rank slabs.
pub fn scatter_real(grid: GlobalGrid, p: usize, global: &[f64]) -> Result<Vec<RealSlab>> {
    if global.len() != grid.real_len() {
        return Err(Error::Size(format!(
            "global field needs {} values, got {}",
            grid.real_len(),
            global.len()
        )));
    }
    crate::layout::validate(&grid, p)?;
    let chunk = grid.real_len() / p;
    global
        .chunks_exact(chunk)
        .enumerate()
        .map(|(rank, part)| {
            RealSlab::new(SlabLayout::new(grid, p, rank, DistAxis::RealAxis0)?, part.to_vec())
        })
        .collect()
}

/// Reassembles rank slabs (given in rank order) into the global real field.
pub fn gather_real(slabs: &[RealSlab]) -> Result<Vec<f64>> {
    let first = slabs.first().ok_or_else(|| Error::Protocol("no slabs to gather".into()))?;
    let p = first.layout().p;
    if slabs.len() != p {
        return Err(Error::Protocol(format!("expected {p} slabs, got {}", slabs.len())));
    }
    let mut out = Vec::with_capacity(first.layout().grid.real_len());
    for (rank, slab) in slabs.iter().enumerate() {
        if slab.layout().rank != rank || slab.layout().grid != first.layout().grid {
            return Err(Error::Protocol(format!("slab {rank} is missing or out of place")));
        }
        out.extend_from_slice(slab.data());
    }
    Ok(out)
}

/// Global `n0 × n1 × n2c` spectrum from the rank slabs, independent of the
/// strategy that produced them.
pub fn gather_spectral(slabs: &[SpectralSlab]) -> Result<Vec<Complex64>> {
    let first = slabs.first().ok_or_else(|| Error::Protocol("no slabs to gather".into()))?;
    let shape = *first.shape();
    if slabs.len() != shape.p {
        return Err(Error::Protocol(format!(
            "expected {} slabs, got {}",
            shape.p,
            slabs.len()
        )));
    }
    let mut out = vec![Complex64::default(); shape.global_len()];
    for (rank, slab) in slabs.iter().enumerate() {
        if *slab.shape() != shape.with_rank(rank) || slab.tag() != first.tag() {
            return Err(Error::Protocol(format!("slab {rank} is missing, misplaced or differently tagged")));
        }
        for j in 0..shape.m1() {
            let c = rank * shape.m1() + j;
            for r in 0..shape.n0 {
                for k in 0..shape.n2c {
                    out[(r * shape.n1 + c) * shape.n2c + k] = slab.data()[slab.offset_unchecked(j, r, k)];
                }
            }
        }
    }
    Ok(out)
}

/// Runs the forward transform of `global` on `p` simulated ranks and returns
/// the gathered spectrum.
pub fn distributed_forward(
    grid: GlobalGrid,
    p: usize,
    strategy: Strategy,
    pattern: CommPattern,
    mode: Mode,
    global: &[f64],
) -> Result<Vec<Complex64>> {
    let slabs = scatter_real(grid, p, global)?;
    let spectra = run_ranks(p, mode, |ep| {
        let mut plan = FftPlan::new(grid, p, ep.rank(), strategy, pattern)?;
        plan.forward(ep, &slabs[ep.rank()])
    })?;
    gather_spectral(&spectra)
}

/// Forward then inverse on `p` simulated ranks; returns the gathered field.
pub fn distributed_round_trip(
    grid: GlobalGrid,
    p: usize,
    strategy: Strategy,
    pattern: CommPattern,
    mode: Mode,
    global: &[f64],
) -> Result<Vec<f64>> {
    let slabs = scatter_real(grid, p, global)?;
    let back = run_ranks(p, mode, |ep| {
        let mut plan = FftPlan::new(grid, p, ep.rank(), strategy, pattern)?;
        let spectral = plan.forward(ep, &slabs[ep.rank()])?;
        plan.inverse(ep, spectral)
    })?;
    gather_real(&back)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plan_examples() {
        let grid = GlobalGrid::cube(4).unwrap();
        let plan = FftPlan::new(grid, 2, 0, Strategy::Strided, CommPattern::Pairwise).unwrap();
        assert_eq!(grid.n2c(), 3);
        for d in plan.exchange_plan().send_descriptors() {
            assert_eq!(d.block_length, 6);
        }
        assert!(FftPlan::new(GlobalGrid::cube(2).unwrap(), 1, 0, Strategy::Transpose, CommPattern::Pairwise).is_ok());
        let tall = GlobalGrid::new(4, 8, 4).unwrap();
        assert!(FftPlan::new(tall, 4, 3, Strategy::Strided, CommPattern::Collective).is_ok());
        assert!(FftPlan::new(grid, 3, 0, Strategy::Strided, CommPattern::Pairwise).is_err());
        assert!(FftPlan::new(grid, 2, 2, Strategy::Strided, CommPattern::Pairwise).is_err());
    }

    #[test]
    fn constant_field_goes_to_dc() {
        let grid = GlobalGrid::cube(4).unwrap();
        for p in [1, 2, 4] {
            for strategy in [Strategy::Transpose, Strategy::Strided] {
                let spec = distributed_forward(grid, p, strategy, CommPattern::Pairwise, Mode::Serial, &[1.0; 64]).unwrap();
                assert_eq!(spec[0], Complex64::new(64.0, 0.0));
                assert!(spec[1..].iter().all(|z| z.norm() < 1e-13));
            }
        }
    }

    #[test]
    fn delta_gives_flat_spectrum() {
        let grid = GlobalGrid::cube(4).unwrap();
        let mut field = vec![0.0; 64];
        field[0] = 1.0;
        let spec = distributed_forward(grid, 2, Strategy::Strided, CommPattern::Pairwise, Mode::Serial, &field).unwrap();
        assert!(spec.iter().all(|z| *z == Complex64::new(1.0, 0.0)));
    }

    #[test]
    fn inverse_of_dc_is_constant() {
        let grid = GlobalGrid::cube(4).unwrap();
        for strategy in [Strategy::Transpose, Strategy::Strided] {
            let out = run_ranks(2, Mode::Serial, |ep| {
                let mut plan = FftPlan::new(grid, 2, ep.rank(), strategy, CommPattern::Pairwise)?;
                let shape = plan.layout().shape();
                let mut data = vec![Complex64::default(); shape.local_len()];
                if ep.rank() == 0 {
                    data[0] = Complex64::new(64.0, 0.0);
                }
                let spec = SpectralSlab::new(shape, strategy.spectral_tag(), data)?;
                plan.inverse(ep, spec)
            })
            .unwrap();
            let field = gather_real(&out).unwrap();
            assert!(field.iter().all(|v| (v - 1.0).abs() < 1e-15));
        }
    }

    #[test]
    fn inverse_rejects_mismatched_tag() {
        let grid = GlobalGrid::cube(4).unwrap();
        let err = run_ranks(1, Mode::Serial, |ep| {
            let mut plan = FftPlan::new(grid, 1, 0, Strategy::Strided, CommPattern::Pairwise)?;
            let shape = plan.layout().shape();
            let spec = SpectralSlab::new(shape, Strategy::Transpose.spectral_tag(), vec![Complex64::default(); shape.local_len()])?;
            plan.inverse(ep, spec)
        })
        .unwrap_err();
        assert!(matches!(err, Error::Contract(_)));
    }

    #[test]
    fn forward_rejects_foreign_slab() {
        let grid = GlobalGrid::cube(4).unwrap();
        let slabs = scatter_real(grid, 2, &[0.0; 64]).unwrap();
        let err = run_ranks(2, Mode::Serial, |ep| {
            let mut plan = FftPlan::new(grid, 2, ep.rank(), Strategy::Strided, CommPattern::Pairwise)?;
            plan.forward(ep, &slabs[1 - ep.rank()])
        })
        .unwrap_err();
        assert!(matches!(err, Error::Contract(_)));
    }

    #[test]
    fn gather_requires_every_rank() {
        let grid = GlobalGrid::cube(4).unwrap();
        let slabs = scatter_real(grid, 2, &[0.0; 64]).unwrap();
        assert!(matches!(gather_real(&slabs[..1]), Err(Error::Protocol(_))));
        assert!(matches!(gather_spectral(&[]), Err(Error::Protocol(_))));
        assert!(matches!(scatter_real(grid, 2, &[0.0; 10]), Err(Error::Size(_))));
    }

    #[test]
    fn delta_round_trip_recovers_position() {
        let grid = GlobalGrid::cube(4).unwrap();
        let mut field = vec![0.0; 64];
        let (i, j, k) = (1, 2, 3);
        let at = (i * 4 + j) * 4 + k;
        field[at] = 1.0;
        for strategy in [Strategy::Transpose, Strategy::Strided] {
            let back = distributed_round_trip(grid, 4, strategy, CommPattern::Collective, Mode::Threaded, &field).unwrap();
            let argmax = back
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .map(|(i, _)| i)
                .unwrap();
            assert_eq!(argmax, at);
        }
    }
}
