//! Non-perturbative, non-Markovian propagation via the reduced hierarchy
//! equations for Drude–Lorentz baths with site-diagonal coupling.
//!
//! Each auxiliary density operator (ADO) ρ_n obeys
//!
//!   dρ_n/dt = −i[H, ρ_n] − (Σ_{jk} n_{jk} ν_k) ρ_n
//!             + Σ_{jk} ( −i [V_j, ρ_{n+jk}]
//!                        − i n_{jk} (c_k V_j ρ_{n−jk} − c_k* ρ_{n−jk} V_j) )
//!             − R Σ_j [V_j, [V_j, ρ_n]]          (Matsubara closure)
//!             − (Γ/2) {|s⟩⟨s|, ρ_n}              (trapping sink)
//!
//! with V_j = |j⟩⟨j|, simple truncation (out-of-depth neighbors are zero),
//! and the residual Matsubara weight R folded into a Markovian pure-dephasing
//! correction. For site projectors Σ_j [V_j,[V_j,ρ]] is twice the
//! off-diagonal part of ρ, and the trapping anticommutator drains ρ_ss at
//! rate Γ and the s-row/column coherences at Γ/2.
//!
//! Every term maps a family of Hermitian ADOs to Hermitian derivatives, so
//! ADOs are stored as packed lower triangles and the mirror is implied; this
//! preserves Hermiticity exactly and halves memory traffic. Derivatives are
//! evaluated independently per ADO (a gather over neighbors), so distributing
//! blocks across workers is bitwise reproducible for any worker count.

pub mod hierarchy;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::bath::{correlation_coefficients, terminator_rate, BathSpec};
use crate::error::{Error, Result};
use crate::exciton::{ElectronicHamiltonian, SingleExcitationState};
use crate::propagation::{integrate, IntegratorOptions, OdeSystem};
use crate::trajectory::{SolverKind, Trajectory, ValidityTolerances};
use crate::units::WAVENUMBER_TO_RAD_PER_FS;
use hierarchy::Hierarchy;

/// Irreversible transfer out of one site (the reaction-center sink).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrappingSpec {
    /// Site index, 1-based.
    pub site: usize,
    /// Population decay rate in fs⁻¹ (coherences decay at half this rate).
    pub rate_per_fs: f64,
}

impl TrappingSpec {
    /// Pigment-network preset: site 3 at (4 ps)⁻¹.
    pub fn fmo_preset() -> Self {
        Self {
            site: 3,
            rate_per_fs: 1.0 / 4000.0,
        }
    }

    /// No trapping.
    pub fn none() -> Self {
        Self {
            site: 1,
            rate_per_fs: 0.0,
        }
    }

    pub fn validate(&self, n_sites: usize) -> Result<()> {
        if !(self.rate_per_fs >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "trapping rate must be nonnegative, got {}",
                self.rate_per_fs
            )));
        }
        if self.rate_per_fs > 0.0 && (self.site == 0 || self.site > n_sites) {
            return Err(Error::IndexOutOfRange {
                index: self.site,
                max: n_sites,
            });
        }
        Ok(())
    }
}

/// Hierarchy truncation and closure settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeomConfig {
    /// Truncation depth N_c.
    pub depth: usize,
    /// Apply the Markovian Matsubara-closure correction.
    pub terminator: bool,
    /// Guard against accidentally enormous hierarchies.
    pub max_ados: usize,
}

impl Default for HeomConfig {
    fn default() -> Self {
        Self {
            depth: 4,
            terminator: true,
            max_ados: 4_000_000,
        }
    }
}

impl HeomConfig {
    pub fn with_depth(depth: usize) -> Self {
        Self {
            depth,
            ..Self::default()
        }
    }
}

/// Indexed family of ADOs; the ordinal-0 ADO is the physical state. ADOs
/// are Hermitian (the hierarchy's conjugation symmetry for this bath), so
/// only lower triangles are stored.
#[derive(Debug, Clone, PartialEq)]
pub struct HierarchyState {
    n_sites: usize,
    count: usize,
    data: Vec<Complex64>,
}

#[inline]
fn tri(a: usize) -> usize {
    a * (a + 1) / 2
}

/// Pull the cache lines of block `ord` toward L1; the ladder passes walk
/// monotone neighbor lists whose ~3 kB stride defeats the hardware
/// prefetcher, so a short software lookahead hides the memory latency.
#[inline(always)]
fn prefetch_block(y: &[Complex64], ord: usize, l: usize) {
    #[cfg(target_arch = "x86_64")]
    {
        let start = ord * l;
        if start + l <= y.len() {
            unsafe {
                use std::arch::x86_64::{_mm_prefetch, _MM_HINT_T0};
                let p = y.as_ptr().add(start) as *const i8;
                let bytes = l * std::mem::size_of::<Complex64>();
                let mut off = 0;
                while off < bytes {
                    _mm_prefetch::<_MM_HINT_T0>(p.add(off));
                    off += 64;
                }
            }
        }
    }
    #[cfg(not(target_arch = "x86_64"))]
    {
        let _ = (y, ord, l);
    }
}


impl HierarchyState {
    fn block_len(n_sites: usize) -> usize {
        n_sites * (n_sites + 1) / 2
    }

    /// Factorized initial condition: physical ADO = ρ0, auxiliaries zero.
    pub fn from_physical(rho0: &SingleExcitationState, count: usize) -> Self {
        let n = rho0.n_sites();
        let l = Self::block_len(n);
        let mut data = vec![Complex64::default(); count * l];
        let m = rho0.matrix();
        for a in 0..n {
            for b in 0..=a {
                data[tri(a) + b] = m[(a, b)];
            }
        }
        Self {
            n_sites: n,
            count,
            data,
        }
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Unpack one ADO into a dense matrix.
    pub fn ado(&self, ordinal: usize) -> DMatrix<Complex64> {
        let n = self.n_sites;
        let l = Self::block_len(n);
        let blk = &self.data[ordinal * l..(ordinal + 1) * l];
        DMatrix::from_fn(n, n, |a, b| {
            if a >= b {
                blk[tri(a) + b]
            } else {
                blk[tri(b) + a].conj()
            }
        })
    }

    /// The physical density matrix (ordinal 0).
    pub fn physical(&self) -> SingleExcitationState {
        SingleExcitationState::from_matrix_unchecked(self.ado(0))
    }

    fn flat(&self) -> &[Complex64] {
        &self.data
    }
}

/// Right-hand side of the hierarchy equations for one Hamiltonian, bath,
/// and trapping configuration.
pub struct HeomSystem {
    n_sites: usize,
    hierarchy: Hierarchy,
    /// Hamiltonian in rad/fs, row-major n×n.
    h_ang: Vec<f64>,
    /// Correlation coefficients per term, angular units (fs⁻²).
    c_ang: Vec<Complex64>,
    /// Per-ADO decay Σ n_{jk} ν_k in fs⁻¹.
    decay: Vec<f64>,
    /// Elementwise rate (terminator dephasing + trapping), packed layout.
    rate_base: Vec<f64>,
}

impl HeomSystem {
    pub fn new(
        h: &ElectronicHamiltonian,
        bath: &BathSpec,
        trapping: &TrappingSpec,
        config: &HeomConfig,
    ) -> Result<Self> {
        bath.validate()?;
        let n = h.n_sites();
        trapping.validate(n)?;
        let hierarchy = Hierarchy::build(n, bath.n_matsubara, config.depth, config.max_ados)?;

        let expansion = correlation_coefficients(bath)?;
        let c_ang = expansion.coefficients_angular();
        let nu = &expansion.decay_rates_per_fs;

        let mut decay = Vec::with_capacity(hierarchy.count());
        for o in 0..hierarchy.count() {
            let idx = hierarchy.index(o);
            let mut d = 0.0;
            for (m, &occ) in idx.iter().enumerate() {
                if occ > 0 {
                    d += occ as f64 * nu[hierarchy.mode_term(m as u32)];
                }
            }
            decay.push(d);
        }

        let dephasing = if config.terminator {
            2.0 * terminator_rate(bath)? * WAVENUMBER_TO_RAD_PER_FS
        } else {
            0.0
        };
        let l = HierarchyState::block_len(n);
        let mut rate_base = vec![0.0; l];
        for a in 0..n {
            for b in 0..=a {
                let mut r = if a != b { dephasing } else { 0.0 };
                if trapping.rate_per_fs > 0.0 {
                    let s = trapping.site - 1;
                    if a == s {
                        r += 0.5 * trapping.rate_per_fs;
                    }
                    if b == s {
                        r += 0.5 * trapping.rate_per_fs;
                    }
                }
                rate_base[tri(a) + b] = r;
            }
        }

        let h_ang: Vec<f64> = h.to_angular().transpose().iter().copied().collect();
        // nalgebra stores column-major; after transpose the iteration order
        // above yields row-major h_ang[a*n + b].

        Ok(Self {
            n_sites: n,
            hierarchy,
            h_ang,
            c_ang,
            decay,
            rate_base,
        })
    }

    pub fn hierarchy(&self) -> &Hierarchy {
        &self.hierarchy
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    /// Initial hierarchy state for a physical density matrix.
    pub fn initial_state(&self, rho0: &SingleExcitationState) -> Result<HierarchyState> {
        if rho0.n_sites() != self.n_sites {
            return Err(Error::DimensionMismatch {
                expected: self.n_sites,
                got: rho0.n_sites(),
            });
        }
        Ok(HierarchyState::from_physical(rho0, self.hierarchy.count()))
    }

    /// Full derivative of a hierarchy state (the hierarchy right-hand side).
    pub fn derivative(&self, state: &HierarchyState) -> Result<HierarchyState> {
        if state.n_sites != self.n_sites || state.count != self.hierarchy.count() {
            return Err(Error::DimensionMismatch {
                expected: self.hierarchy.count(),
                got: state.count,
            });
        }
        let mut out = HierarchyState {
            n_sites: self.n_sites,
            count: state.count,
            data: vec![Complex64::default(); state.data.len()],
        };
        self.rhs(0.0, state.flat(), &mut out.data);
        Ok(out)
    }

    /// One parallel span of ADO derivatives; `n` is const-propagated on the
    /// specialized dispatch path so the dense inner loops unroll.
    ///
    /// The dense part (commutator and elementwise rates) is evaluated for
    /// `DENSE_BATCH` blocks at a time in lane-major scratch (element e of
    /// lane q at index e·B + q), so the commutator row-axpy vectorizes
    /// across the batch. Per-lane arithmetic is identical to processing
    /// blocks one by one.
    #[inline(always)]
    fn rhs_span(&self, n: usize, base: usize, y: &[Complex64], out_chunk: &mut [Complex64]) {
        debug_assert_eq!(n, self.n_sites);
        const B: usize = DENSE_BATCH;
        let l = tri(n);
        let w = 2 * n;
        let blocks = out_chunk.len() / l;
        let mut full = vec![0.0_f64; w * n * B];
        let mut prod = vec![0.0_f64; w * n * B];
        let mut deriv = vec![0.0_f64; 2 * l * B];
        let full = &mut full[..w * n * B];
        let prod = &mut prod[..w * n * B];
        let deriv = &mut deriv[..2 * l * B];
        let mut decay8 = [0.0_f64; B];

        let mut q0 = 0;
        while q0 < blocks {
            let bsz = B.min(blocks - q0);

            // Unpack the Hermitian blocks into interleaved (re, im) lanes;
            // element-outer order keeps the stores contiguous. Stale lanes
            // of a short tail batch are computed but never stored back.
            {
                let blks = &y[(base + q0) * l..(base + q0 + bsz) * l];
                for a in 0..n {
                    for b in 0..=a {
                        let src = tri(a) + b;
                        let pab = 2 * (a * n + b) * B;
                        let pba = 2 * (b * n + a) * B;
                        for lane in 0..bsz {
                            let v = blks[lane * l + src];
                            full[pab + lane] = v.re;
                            full[pab + B + lane] = v.im;
                            full[pba + lane] = v.re;
                            full[pba + B + lane] = -v.im;
                        }
                    }
                }
            }
            decay8[..bsz]
                .copy_from_slice(&self.decay[base + q0..base + q0 + bsz]);

            // Row a of A = H·ρ by real row-axpy over all lanes (unit
            // stride, fused multiply-add), immediately finished into the
            // derivative: [H,ρ] = A − A† for Hermitian ρ and symmetric H,
            // so d_ab = −i(A_ab − conj(A_ba)) − rate·ρ_ab on the lower
            // triangle, with rows b < a already available.
            for a in 0..n {
                let (done, rest) = prod.split_at_mut(a * w * B);
                let arow = &mut rest[..w * B];
                let hrow = &self.h_ang[a * n..(a + 1) * n];
                let h0 = hrow[0];
                for (ao, ro) in arow.iter_mut().zip(&full[0..w * B]) {
                    *ao = h0 * ro;
                }
                for k in 1..n {
                    let hak = hrow[k];
                    let rrow = &full[k * w * B..(k + 1) * w * B];
                    for (ao, ro) in arow.iter_mut().zip(rrow) {
                        *ao = hak.mul_add(*ro, *ao);
                    }
                }
                let ta = tri(a);
                for b in 0..a {
                    let pba = 2 * (b * n + a) * B;
                    let pab = 2 * (a * n + b) * B;
                    let rb = self.rate_base[ta + b];
                    let dre = 2 * (ta + b) * B;
                    for lane in 0..B {
                        let rate = decay8[lane] + rb;
                        let cre = arow[2 * b * B + lane] - done[pba + lane];
                        let cim = arow[(2 * b + 1) * B + lane] + done[pba + B + lane];
                        deriv[dre + lane] = cim - rate * full[pab + lane];
                        deriv[dre + B + lane] = -cre - rate * full[pab + B + lane];
                    }
                }
                // b = a: A_aa − conj(A_aa) is purely imaginary.
                let paa = 2 * (a * n + a) * B;
                let rb = self.rate_base[ta + a];
                let dre = 2 * (ta + a) * B;
                for lane in 0..B {
                    let rate = decay8[lane] + rb;
                    deriv[dre + lane] =
                        2.0 * arow[(2 * a + 1) * B + lane] - rate * full[paa + lane];
                    deriv[dre + B + lane] = -rate * full[paa + B + lane];
                }
            }

            // Scatter the dense derivatives back to per-block layout.
            for lane in 0..bsz {
                let ob = &mut out_chunk[(q0 + lane) * l..(q0 + lane) * l + l];
                for (e, o) in ob.iter_mut().enumerate() {
                    *o = Complex64::new(deriv[2 * e * B + lane], deriv[(2 * e + 1) * B + lane]);
                }
            }

            q0 += bsz;
        }

        // Ladder terms, mode-major: within one mode both the source and
        // target ordinals ascend, so the scattered neighbor reads become
        // monotone sweeps the hardware prefetcher can follow.
        let lo_src = base as u32;
        let hi_src = (base + blocks) as u32;
        for m in 0..self.hierarchy.n_modes() {
            let j = self.hierarchy.mode_site(m as u32);
            let tj = tri(j);

            // Raising: −i [V_j, ρ_{n+jk}]; only the j-row/column is
            // touched and all accesses stay in the lower triangle.
            let pairs = self.hierarchy.raising_pairs(m);
            let s = pairs.partition_point(|p| p.source < lo_src);
            let e = pairs.partition_point(|p| p.source < hi_src);
            let span = &pairs[s..e];
            for (i, pair) in span.iter().enumerate() {
                if let Some(ahead) = span.get(i + PREFETCH_AHEAD) {
                    prefetch_block(y, ahead.target as usize, l);
                }
                let out =
                    &mut out_chunk[(pair.source as usize - base) * l..][..l];
                let up = &y[pair.target as usize * l..][..l];
                for (d, u) in out[tj..tj + j].iter_mut().zip(&up[tj..tj + j]) {
                    d.re += u.im;
                    d.im -= u.re;
                }
                for a in (j + 1)..n {
                    let p = tri(a) + j;
                    let u = up[p];
                    let d = &mut out[p];
                    d.re -= u.im;
                    d.im += u.re;
                }
            }

            // Lowering: −i n_{jk} (c_k V_j ρ_{n−jk} − c_k* ρ_{n−jk} V_j).
            let cm = self.c_ang[self.hierarchy.mode_term(m as u32)];
            let pairs = self.hierarchy.lowering_pairs(m);
            let s = pairs.partition_point(|p| p.source < lo_src);
            let e = pairs.partition_point(|p| p.source < hi_src);
            let span = &pairs[s..e];
            for (i, pair) in span.iter().enumerate() {
                if let Some(ahead) = span.get(i + PREFETCH_AHEAD) {
                    prefetch_block(y, ahead.target as usize, l);
                }
                let out =
                    &mut out_chunk[(pair.source as usize - base) * l..][..l];
                let dn = &y[pair.target as usize * l..][..l];
                let c = cm * pair.occupation as f64;
                // −i·c·x for the j-row
                for (d, x) in out[tj..tj + j].iter_mut().zip(&dn[tj..tj + j]) {
                    d.re += c.re * x.im + c.im * x.re;
                    d.im += c.im * x.im - c.re * x.re;
                }
                // Diagonal picks up both row and column pieces: 2·Im(c)·x.
                {
                    let x = dn[tj + j];
                    let d = &mut out[tj + j];
                    let two_im = 2.0 * c.im;
                    d.re += two_im * x.re;
                    d.im += two_im * x.im;
                }
                // +i·c̄·x for the j-column
                for a in (j + 1)..n {
                    let p = tri(a) + j;
                    let x = dn[p];
                    let d = &mut out[p];
                    d.re += c.im * x.re - c.re * x.im;
                    d.im += c.re * x.re + c.im * x.im;
                }
            }
        }
    }

    /// Monomorphized entry: after inlining, the site count is a literal and
    /// the per-block loops unroll. The arithmetic is identical to the
    /// dynamic path (same operations, same order).
    fn rhs_span_fixed<const N: usize>(
        &self,
        base: usize,
        y: &[Complex64],
        out_chunk: &mut [Complex64],
    ) {
        self.rhs_span(N, base, y, out_chunk);
    }

    fn span_dispatch(&self, base: usize, y: &[Complex64], out_chunk: &mut [Complex64]) {
        match self.n_sites {
            2 => self.rhs_span_fixed::<2>(base, y, out_chunk),
            3 => self.rhs_span_fixed::<3>(base, y, out_chunk),
            4 => self.rhs_span_fixed::<4>(base, y, out_chunk),
            5 => self.rhs_span_fixed::<5>(base, y, out_chunk),
            6 => self.rhs_span_fixed::<6>(base, y, out_chunk),
            7 => self.rhs_span_fixed::<7>(base, y, out_chunk),
            8 => self.rhs_span_fixed::<8>(base, y, out_chunk),
            n => self.rhs_span(n, base, y, out_chunk),
        }
    }
}

/// Blocks processed together in the dense phase (vector lanes).
const DENSE_BATCH: usize = 8;

/// Lookahead distance (in ladder edges) for neighbor-block prefetch.
const PREFETCH_AHEAD: usize = 8;

/// ADOs per parallel work unit (a multiple of [`DENSE_BATCH`]).
const ADO_CHUNK: usize = 512;

impl OdeSystem for HeomSystem {
    fn dim(&self) -> usize {
        self.hierarchy.count() * tri(self.n_sites)
    }

    fn rhs(&self, _t: f64, y: &[Complex64], dydt: &mut [Complex64]) {
        let l = tri(self.n_sites);
        dydt.par_chunks_mut(ADO_CHUNK * l)
            .enumerate()
            .for_each(|(ci, out_chunk)| {
                self.span_dispatch(ci * ADO_CHUNK, y, out_chunk);
            });
    }

    /// Fused RK4 stage: the derivative of each ADO chunk is folded into the
    /// stage combinations while still cache-resident, so the full-length
    /// derivative array is never materialized. Elementwise arithmetic is
    /// identical to the default implementation.
    fn rhs_stage(
        &self,
        _t: f64,
        y_in: &[Complex64],
        y_base: &[Complex64],
        acc: &mut [Complex64],
        next: Option<&mut [Complex64]>,
        _k_buf: &mut [Complex64],
        ca: f64,
        cb: f64,
        acc_assign: bool,
    ) {
        let l = tri(self.n_sites);
        let cl = ADO_CHUNK * l;

        let fold = |d: &[Complex64],
                    yb: &[Complex64],
                    acc_c: &mut [Complex64],
                    next_c: Option<&mut [Complex64]>| {
            let len = acc_c.len();
            assert!(d.len() == len && yb.len() == len);
            match next_c {
                Some(next_c) => {
                    assert!(next_c.len() == len);
                    if acc_assign {
                        for i in 0..len {
                            let dv = d[i];
                            let yv = yb[i];
                            acc_c[i].re = ca.mul_add(dv.re, yv.re);
                            acc_c[i].im = ca.mul_add(dv.im, yv.im);
                            next_c[i].re = cb.mul_add(dv.re, yv.re);
                            next_c[i].im = cb.mul_add(dv.im, yv.im);
                        }
                    } else {
                        for i in 0..len {
                            let dv = d[i];
                            let yv = yb[i];
                            acc_c[i].re = ca.mul_add(dv.re, acc_c[i].re);
                            acc_c[i].im = ca.mul_add(dv.im, acc_c[i].im);
                            next_c[i].re = cb.mul_add(dv.re, yv.re);
                            next_c[i].im = cb.mul_add(dv.im, yv.im);
                        }
                    }
                }
                None => {
                    if acc_assign {
                        for i in 0..len {
                            let dv = d[i];
                            acc_c[i].re = ca.mul_add(dv.re, yb[i].re);
                            acc_c[i].im = ca.mul_add(dv.im, yb[i].im);
                        }
                    } else {
                        for i in 0..len {
                            let dv = d[i];
                            acc_c[i].re = ca.mul_add(dv.re, acc_c[i].re);
                            acc_c[i].im = ca.mul_add(dv.im, acc_c[i].im);
                        }
                    }
                }
            }
        };

        if rayon::current_num_threads() == 1 {
            // One reused scratch buffer; identical arithmetic to the
            // parallel path.
            let mut d = vec![Complex64::default(); cl.min(acc.len())];
            let mut next = next;
            for ci in 0..acc.len().div_ceil(cl) {
                let lo = ci * cl;
                let hi = (lo + cl).min(acc.len());
                let dc = &mut d[..hi - lo];
                self.span_dispatch(ci * ADO_CHUNK, y_in, dc);
                fold(
                    dc,
                    &y_base[lo..hi],
                    &mut acc[lo..hi],
                    next.as_deref_mut().map(|nx| &mut nx[lo..hi]),
                );
            }
        } else {
            match next {
                Some(next) => {
                    acc.par_chunks_mut(cl)
                        .zip(next.par_chunks_mut(cl))
                        .enumerate()
                        .for_each_init(Vec::new, |d, (ci, (acc_c, next_c))| {
                            if d.len() < acc_c.len() {
                                d.resize(acc_c.len(), Complex64::default());
                            }
                            let dc = &mut d[..acc_c.len()];
                            self.span_dispatch(ci * ADO_CHUNK, y_in, dc);
                            let yb = &y_base[ci * cl..ci * cl + acc_c.len()];
                            fold(dc, yb, acc_c, Some(next_c));
                        });
                }
                None => {
                    acc.par_chunks_mut(cl).enumerate().for_each_init(
                        Vec::new,
                        |d, (ci, acc_c)| {
                            if d.len() < acc_c.len() {
                                d.resize(acc_c.len(), Complex64::default());
                            }
                            let dc = &mut d[..acc_c.len()];
                            self.span_dispatch(ci * ADO_CHUNK, y_in, dc);
                            let yb = &y_base[ci * cl..ci * cl + acc_c.len()];
                            fold(dc, yb, acc_c, None);
                        },
                    );
                }
            }
        }
    }
}

/// Propagate the hierarchy from `rho0` (factorized initial condition) over
/// `t_grid` (ascending from 0), recording the physical ADO and its
/// entanglement report at every grid time.
pub fn propagate_heom(
    h: &ElectronicHamiltonian,
    bath: &BathSpec,
    trapping: &TrappingSpec,
    rho0: &SingleExcitationState,
    t_grid: &[f64],
    config: &HeomConfig,
    opts: &IntegratorOptions,
) -> Result<Trajectory> {
    let (trajectory, failure) =
        propagate_heom_partial(h, bath, trapping, rho0, t_grid, config, opts)?;
    match failure {
        None => Ok(trajectory),
        Some(e) => Err(e),
    }
}

/// Like [`propagate_heom`], but a mid-run validity failure returns the
/// points recorded so far together with the diagnostic instead of
/// discarding them. Setup errors still fail outright.
#[allow(clippy::too_many_arguments)]
pub fn propagate_heom_partial(
    h: &ElectronicHamiltonian,
    bath: &BathSpec,
    trapping: &TrappingSpec,
    rho0: &SingleExcitationState,
    t_grid: &[f64],
    config: &HeomConfig,
    opts: &IntegratorOptions,
) -> Result<(Trajectory, Option<Error>)> {
    let d = rho0.diagnostics();
    if !d.within(1e-9, -1e-9, 1e-9) {
        return Err(Error::InvalidState(format!(
            "initial state invalid: hermiticity {:.3e}, min eigenvalue {:.3e}, trace {}",
            d.hermiticity_defect, d.min_eigenvalue, d.trace
        )));
    }
    if t_grid.first().map_or(true, |&t0| t0 != 0.0) {
        return Err(Error::InvalidParameter(
            "time grid must start at 0".into(),
        ));
    }
    let system = HeomSystem::new(h, bath, trapping, config)?;
    let y0 = system.initial_state(rho0)?;
    let n = system.n_sites;
    let tol = ValidityTolerances::default();
    let mut trajectory = Trajectory::new(SolverKind::Heom, n);
    let outcome = integrate(&system, y0.flat(), t_grid, opts, |_, t, y| {
        let m = DMatrix::from_fn(n, n, |a, b| {
            if a >= b {
                y[tri(a) + b]
            } else {
                y[tri(b) + a].conj()
            }
        });
        trajectory.push_state(t, SingleExcitationState::from_matrix_unchecked(m), &tol)
    });
    match outcome {
        Ok(()) => Ok((trajectory, None)),
        Err(e @ Error::NumericalFailure { .. }) => Ok((trajectory, Some(e))),
        Err(e) => Err(e),
    }
}

/// One row of a convergence comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub label_a: String,
    pub label_b: String,
    pub max_entanglement_deviation: f64,
    pub max_population_deviation: f64,
}

/// Compare trajectories across successive truncation depths (at the bath's
/// K) and, optionally, successive Matsubara counts (at `config.depth`),
/// reporting the maximum entanglement and population deviations per pair.
#[allow(clippy::too_many_arguments)]
pub fn convergence_scan(
    h: &ElectronicHamiltonian,
    bath: &BathSpec,
    trapping: &TrappingSpec,
    rho0: &SingleExcitationState,
    t_grid: &[f64],
    config: &HeomConfig,
    opts: &IntegratorOptions,
    depths: &[usize],
    k_values: &[usize],
) -> Result<Vec<ConvergenceRow>> {
    if depths.len() < 2 && k_values.len() < 2 {
        return Err(Error::InvalidParameter(
            "convergence scan needs at least two depths or two Matsubara counts".into(),
        ));
    }
    let mut rows = Vec::new();
    let mut prev: Option<(String, Trajectory)> = None;
    for &d in depths {
        let cfg = HeomConfig { depth: d, ..*config };
        let tr = propagate_heom(h, bath, trapping, rho0, t_grid, &cfg, opts)?;
        let label = format!("depth={d}");
        if let Some((prev_label, prev_tr)) = &prev {
            rows.push(ConvergenceRow {
                label_a: prev_label.clone(),
                label_b: label.clone(),
                max_entanglement_deviation: crate::trajectory::max_entanglement_deviation(
                    prev_tr, &tr,
                )?,
                max_population_deviation: crate::trajectory::max_population_deviation(
                    prev_tr, &tr,
                )?,
            });
        }
        prev = Some((label, tr));
    }
    prev = None;
    for &k in k_values {
        let b = BathSpec {
            n_matsubara: k,
            ..*bath
        };
        let tr = propagate_heom(h, &b, trapping, rho0, t_grid, config, opts)?;
        let label = format!("K={k}");
        if let Some((prev_label, prev_tr)) = &prev {
            rows.push(ConvergenceRow {
                label_a: prev_label.clone(),
                label_b: label.clone(),
                max_entanglement_deviation: crate::trajectory::max_entanglement_deviation(
                    prev_tr, &tr,
                )?,
                max_population_deviation: crate::trajectory::max_population_deviation(
                    prev_tr, &tr,
                )?,
            });
        }
        prev = Some((label, tr));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::propagation::unitary_oracle;
    use crate::trajectory::record_grid;
    use std::collections::HashMap;

    fn zero_hamiltonian(n: usize) -> ElectronicHamiltonian {
        ElectronicHamiltonian::from_matrix(DMatrix::zeros(n, n)).unwrap()
    }

    /// Dense, obviously-correct reference evaluation of the hierarchy
    /// right-hand side, straight from the equation with full matrices and a
    /// multi-index hash map. Used to pin the packed production kernel.
    fn reference_rhs(
        system: &HeomSystem,
        bath: &BathSpec,
        h: &ElectronicHamiltonian,
        trapping: &TrappingSpec,
        terminator: bool,
        ados: &HashMap<Vec<u8>, DMatrix<Complex64>>,
    ) -> HashMap<Vec<u8>, DMatrix<Complex64>> {
        let n = h.n_sites();
        let hh = h.to_angular().map(|x| Complex64::new(x, 0.0));
        let expansion = correlation_coefficients(bath).unwrap();
        let c = expansion.coefficients_angular();
        let nu = &expansion.decay_rates_per_fs;
        let k_terms = bath.n_matsubara + 1;
        let i = Complex64::i();
        let r_deph = if terminator {
            2.0 * terminator_rate(bath).unwrap() * WAVENUMBER_TO_RAD_PER_FS
        } else {
            0.0
        };
        let mut out = HashMap::new();
        for (idx, rho) in ados {
            let mut d = (&hh * rho - rho * &hh) * (-i);
            let depth_decay: f64 = idx
                .iter()
                .enumerate()
                .map(|(m, &occ)| occ as f64 * nu[m % k_terms])
                .sum();
            d -= rho.scale(depth_decay);
            for m in 0..idx.len() {
                let j = m / k_terms;
                let kk = m % k_terms;
                let mut vj = DMatrix::<Complex64>::zeros(n, n);
                vj[(j, j)] = Complex64::new(1.0, 0.0);
                let mut up_idx = idx.clone();
                up_idx[m] += 1;
                if let Some(up) = ados.get(&up_idx) {
                    d += (&vj * up - up * &vj) * (-i);
                }
                if idx[m] > 0 {
                    let mut dn_idx = idx.clone();
                    dn_idx[m] -= 1;
                    let dn = &ados[&dn_idx];
                    let f = idx[m] as f64;
                    d += (&vj * dn * c[kk] - dn * &vj * c[kk].conj()) * (-i * f);
                }
                // terminator double commutator, once per site (kk == 0)
                if kk == 0 && r_deph > 0.0 {
                    let comm = &vj * rho + rho * &vj - (&vj * rho * &vj).scale(2.0);
                    d -= comm.scale(r_deph / 2.0);
                }
            }
            if trapping.rate_per_fs > 0.0 {
                let s = trapping.site - 1;
                let mut p = DMatrix::<Complex64>::zeros(n, n);
                p[(s, s)] = Complex64::new(1.0, 0.0);
                d -= (&p * rho + rho * &p).scale(trapping.rate_per_fs / 2.0);
            }
            out.insert(idx.clone(), d);
        }
        let _ = system;
        out
    }

    #[test]
    fn packed_rhs_matches_dense_reference() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let n = 3;
        let h = ElectronicHamiltonian::from_matrix(DMatrix::from_row_slice(
            3,
            3,
            &[100.0, -50.0, 10.0, -50.0, 0.0, 30.0, 10.0, 30.0, 250.0],
        ))
        .unwrap();
        let bath = BathSpec {
            reorganization_cm1: 35.0,
            relaxation_rate_per_fs: 0.01,
            temperature_k: 150.0,
            n_matsubara: 1,
        };
        let trapping = TrappingSpec {
            site: 2,
            rate_per_fs: 1.0 / 4000.0,
        };
        let config = HeomConfig {
            depth: 2,
            ..Default::default()
        };
        let system = HeomSystem::new(&h, &bath, &trapping, &config).unwrap();
        let count = system.hierarchy().count();

        // Random Hermitian family.
        let mut state = HierarchyState {
            n_sites: n,
            count,
            data: vec![Complex64::default(); count * tri(n)],
        };
        for o in 0..count {
            for a in 0..n {
                for b in 0..=a {
                    let re = rng.random::<f64>() - 0.5;
                    let im = if a == b { 0.0 } else { rng.random::<f64>() - 0.5 };
                    state.data[o * tri(n) + tri(a) + b] = Complex64::new(re, im);
                }
            }
        }
        let mut ados = HashMap::new();
        for o in 0..count {
            ados.insert(system.hierarchy().index(o).to_vec(), state.ado(o));
        }
        let reference = reference_rhs(&system, &bath, &h, &trapping, true, &ados);
        let derivative = system.derivative(&state).unwrap();
        for o in 0..count {
            let got = derivative.ado(o);
            let want = &reference[system.hierarchy().index(o)];
            let err = (got - want).map(|z| z.norm()).max();
            assert!(err < 1e-13, "ADO {o} deviates by {err}");
        }
    }

    #[test]
    fn closed_system_limit_matches_unitary_oracle() {
        let h = ElectronicHamiltonian::fmo();
        let bath = BathSpec {
            reorganization_cm1: 0.0,
            ..BathSpec::fmo_preset(300.0)
        };
        let rho0 = SingleExcitationState::localized(1, 7).unwrap();
        let grid = record_grid(1000.0, 50.0, 1).unwrap();
        let config = HeomConfig::with_depth(2);

        // At the production step the deviation is set by the RK4 phase
        // error (~dt⁴); a 16× finer step drives it below 1e-8.
        let tr = propagate_heom(
            &h,
            &bath,
            &TrappingSpec::none(),
            &rho0,
            &grid,
            &config,
            &IntegratorOptions::rk4(0.0625),
        )
        .unwrap();
        let mut max_err: f64 = 0.0;
        for p in &tr.points {
            let exact = unitary_oracle(&h, &rho0, p.t_fs).unwrap();
            let err = (p.state.matrix() - exact.matrix()).map(|z| z.norm()).max();
            max_err = max_err.max(err);
        }
        assert!(max_err < 1e-8, "fine-step closed-system error {max_err}");

        let tr_coarse = propagate_heom(
            &h,
            &bath,
            &TrappingSpec::none(),
            &rho0,
            &grid,
            &config,
            &IntegratorOptions::rk4(0.5),
        )
        .unwrap();
        let mut coarse_err: f64 = 0.0;
        for p in &tr_coarse.points {
            let exact = unitary_oracle(&h, &rho0, p.t_fs).unwrap();
            let err = (p.state.matrix() - exact.matrix()).map(|z| z.norm()).max();
            coarse_err = coarse_err.max(err);
        }
        assert!(
            coarse_err < 1e-5,
            "0.5 fs closed-system error {coarse_err}"
        );
    }

    #[test]
    fn trapping_only_decay_is_exponential() {
        let h = zero_hamiltonian(7);
        let bath = BathSpec {
            reorganization_cm1: 0.0,
            ..BathSpec::fmo_preset(300.0)
        };
        let trapping = TrappingSpec::fmo_preset();
        let rho0 = SingleExcitationState::localized(3, 7).unwrap();
        let grid = record_grid(5000.0, 100.0, 1).unwrap();
        let tr = propagate_heom(
            &h,
            &bath,
            &trapping,
            &rho0,
            &grid,
            &HeomConfig::with_depth(0),
            &IntegratorOptions::rk4(1.0),
        )
        .unwrap();
        for p in &tr.points {
            let expected = (-p.t_fs / 4000.0).exp();
            assert!(
                (p.report.trace - expected).abs() < 1e-6,
                "t = {}: trace {} vs {}",
                p.t_fs,
                p.report.trace,
                expected
            );
        }
    }

    #[test]
    fn trace_is_conserved_without_trapping() {
        let h = ElectronicHamiltonian::fmo();
        let bath = BathSpec::fmo_preset(300.0);
        let rho0 = SingleExcitationState::localized(1, 7).unwrap();
        let grid = record_grid(300.0, 10.0, 1).unwrap();
        let tr = propagate_heom(
            &h,
            &bath,
            &TrappingSpec::none(),
            &rho0,
            &grid,
            &HeomConfig::with_depth(3),
            &IntegratorOptions::rk4(1.0),
        )
        .unwrap();
        for p in &tr.points {
            assert!((p.report.trace - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn population_recurrence_at_low_temperature() {
        // Damped oscillation of the initial-site population: after the
        // initial drop the population must recover at least once.
        let h = ElectronicHamiltonian::fmo();
        let bath = BathSpec {
            n_matsubara: 0,
            ..BathSpec::fmo_preset(77.0)
        };
        let rho0 = SingleExcitationState::localized(1, 7).unwrap();
        let grid = record_grid(400.0, 4.0, 1).unwrap();
        let tr = propagate_heom(
            &h,
            &bath,
            &TrappingSpec::fmo_preset(),
            &rho0,
            &grid,
            &HeomConfig::with_depth(3),
            &IntegratorOptions::rk4(1.0),
        )
        .unwrap();
        let pop = tr.population_series(1).unwrap();
        let n_minima = crate::trajectory::count_local_maxima(
            &pop.iter().map(|p| -p).collect::<Vec<_>>(),
            0.01,
        );
        assert!(
            n_minima >= 1,
            "expected a population recurrence in the first 400 fs"
        );
    }

    #[test]
    fn zero_length_grid_records_initial_report() {
        let h = ElectronicHamiltonian::fmo();
        let bath = BathSpec::fmo_preset(300.0);
        let rho0 = SingleExcitationState::localized(1, 7).unwrap();
        let tr = propagate_heom(
            &h,
            &bath,
            &TrappingSpec::fmo_preset(),
            &rho0,
            &[0.0],
            &HeomConfig::with_depth(1),
            &IntegratorOptions::default(),
        )
        .unwrap();
        assert_eq!(tr.len(), 1);
        assert_eq!(tr.points[0].report.global_entanglement, 0.0);
        assert_eq!(tr.points[0].report.witness, 0.0);
        assert!((tr.points[0].report.trace - 1.0).abs() < 1e-15);
    }

    #[test]
    fn grid_must_start_at_zero() {
        let h = ElectronicHamiltonian::fmo();
        let bath = BathSpec::fmo_preset(300.0);
        let rho0 = SingleExcitationState::localized(1, 7).unwrap();
        let res = propagate_heom(
            &h,
            &bath,
            &TrappingSpec::none(),
            &rho0,
            &[10.0, 20.0],
            &HeomConfig::with_depth(0),
            &IntegratorOptions::default(),
        );
        assert!(res.is_err());
    }

    #[test]
    fn convergence_scan_trivial_cases() {
        let h = ElectronicHamiltonian::fmo();
        let rho0 = SingleExcitationState::localized(1, 7).unwrap();
        let grid = record_grid(100.0, 10.0, 1).unwrap();
        let opts = IntegratorOptions::rk4(2.0);

        // Identical settings twice → zero deviation.
        let bath = BathSpec::fmo_preset(300.0);
        let rows = convergence_scan(
            &h,
            &bath,
            &TrappingSpec::none(),
            &rho0,
            &grid,
            &HeomConfig::default(),
            &opts,
            &[2, 2],
            &[],
        )
        .unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].max_entanglement_deviation, 0.0);
        assert_eq!(rows[0].max_population_deviation, 0.0);

        // λ = 0: the hierarchy decouples, any depths agree exactly.
        let free = BathSpec {
            reorganization_cm1: 0.0,
            ..bath
        };
        let rows = convergence_scan(
            &h,
            &free,
            &TrappingSpec::none(),
            &rho0,
            &grid,
            &HeomConfig::default(),
            &opts,
            &[0, 2, 3],
            &[],
        )
        .unwrap();
        for row in rows {
            assert_eq!(row.max_entanglement_deviation, 0.0);
            assert_eq!(row.max_population_deviation, 0.0);
        }

        assert!(convergence_scan(
            &h,
            &bath,
            &TrappingSpec::none(),
            &rho0,
            &grid,
            &HeomConfig::default(),
            &opts,
            &[2],
            &[],
        )
        .is_err());
    }

    #[test]
    fn derivative_is_reproducible_across_worker_counts() {
        let h = ElectronicHamiltonian::fmo();
        let bath = BathSpec::fmo_preset(300.0);
        let rho0 = SingleExcitationState::localized(6, 7).unwrap();
        let grid = record_grid(50.0, 10.0, 1).unwrap();
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| {
                propagate_heom(
                    &h,
                    &bath,
                    &TrappingSpec::fmo_preset(),
                    &rho0,
                    &grid,
                    &HeomConfig::with_depth(3),
                    &IntegratorOptions::rk4(1.0),
                )
                .unwrap()
            })
        };
        let a = run(1);
        let b = run(2);
        for (p, q) in a.points.iter().zip(&b.points) {
            for (x, y) in p.state.matrix().iter().zip(q.state.matrix().iter()) {
                assert_eq!(x.re.to_bits(), y.re.to_bits());
                assert_eq!(x.im.to_bits(), y.im.to_bits());
            }
        }
    }
}
