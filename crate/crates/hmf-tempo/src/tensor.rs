//! Dense tensors and the matrix-product-state machinery used to contract the
//! triangular imaginary-time network.
//!
//! The state over the interior path indices is held as a chain of rank-3
//! tensors with legs `(left bond, physical, right bond)`. One network row at
//! a time is absorbed by [`mps_apply_growth_row`]: a zip-up sweep that
//! expands each bond by the physical dimension and compresses it again
//! immediately through a truncated SVD, so peak memory stays at one expanded
//! bond matrix. Sweep direction alternates row to row, which keeps the chain
//! near a canonical form on the side each sweep starts from. Every discarded
//! singular value is accounted in the state's `truncation_error_accum`.
//!
//! The sweep kernel is one generic implementation over the nalgebra scalar;
//! rows whose weights are exactly real (every model with a real-symmetric
//! Hamiltonian in the coupling eigenbasis) run it at `f64`, everything else
//! at `Complex64`.

use nalgebra::{ComplexField, DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{HmfError, Result};

/// Entry cap for any single matrix materialized during a growth sweep.
const MAX_DENSE_ELEMS: usize = 1 << 28;

/// Dense complex tensor in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    shape: Vec<usize>,
    data: Vec<C64>,
}

impl DenseTensor {
    pub fn new(shape: Vec<usize>, data: Vec<C64>) -> Result<Self> {
        let len: usize = shape.iter().product();
        if len != data.len() {
            return Err(HmfError::InvalidTensor(format!(
                "shape {:?} wants {} entries, got {}",
                shape,
                len,
                data.len()
            )));
        }
        if !data.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(HmfError::InvalidTensor("non-finite entry".into()));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let len = shape.iter().product();
        Self {
            shape,
            data: vec![C64::new(0.0, 0.0); len],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    /// Rank-2 view as a nalgebra matrix.
    pub fn to_matrix(&self) -> Result<DMatrix<C64>> {
        if self.rank() != 2 {
            return Err(HmfError::InvalidTensor(format!(
                "expected rank 2, got shape {:?}",
                self.shape
            )));
        }
        Ok(DMatrix::from_row_slice(
            self.shape[0],
            self.shape[1],
            &self.data,
        ))
    }

    pub fn from_matrix(m: &DMatrix<C64>) -> Self {
        let mut data = Vec::with_capacity(m.nrows() * m.ncols());
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                data.push(m[(r, c)]);
            }
        }
        Self {
            shape: vec![m.nrows(), m.ncols()],
            data,
        }
    }

    fn site_dims(&self) -> Result<(usize, usize, usize)> {
        if self.rank() != 3 {
            return Err(HmfError::InvalidTensor(format!(
                "site tensor must be rank 3, got shape {:?}",
                self.shape
            )));
        }
        Ok((self.shape[0], self.shape[1], self.shape[2]))
    }

    fn at3(&self, i: usize, j: usize, k: usize) -> C64 {
        self.data[(i * self.shape[1] + j) * self.shape[2] + k]
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    fn scale(&mut self, s: f64) {
        for z in &mut self.data {
            *z *= s;
        }
    }

    fn is_real(&self) -> bool {
        self.data.iter().all(|z| z.im == 0.0)
    }
}

/// Relative singular-value cutoff plus optional bond cap.
///
/// The cutoff is relative to the largest singular value of each decomposed
/// matrix, so a single dimensionless ε controls differently scaled problems.
/// ε = 0 disables value-based truncation and is only accepted with an
/// unlimited bond.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationPolicy {
    rel_cutoff: f64,
    max_bond: Option<usize>,
}

impl TruncationPolicy {
    pub fn new(rel_cutoff: f64, max_bond: Option<usize>) -> Result<Self> {
        if !(0.0..1.0).contains(&rel_cutoff) {
            return Err(HmfError::InvalidPolicy(format!(
                "rel_cutoff must be in [0, 1), got {rel_cutoff}"
            )));
        }
        if rel_cutoff == 0.0 && max_bond.is_some() {
            return Err(HmfError::InvalidPolicy(
                "rel_cutoff = 0 is only valid with an unlimited bond".into(),
            ));
        }
        if max_bond == Some(0) {
            return Err(HmfError::InvalidPolicy("max_bond must be positive".into()));
        }
        Ok(Self {
            rel_cutoff,
            max_bond,
        })
    }

    pub fn rel_cutoff(&self) -> f64 {
        self.rel_cutoff
    }

    pub fn max_bond(&self) -> Option<usize> {
        self.max_bond
    }
}

/// Outcome of a truncated SVD: `u * diag(s) * vt` approximates the input.
#[derive(Debug, Clone)]
pub struct SvdTruncation {
    pub u: DenseTensor,
    pub singular_values: Vec<f64>,
    pub vt: DenseTensor,
    /// Σ discarded s² / Σ all s².
    pub discarded_weight: f64,
}

/// Truncated singular value decomposition of a rank-2 tensor.
///
/// Retains every singular value `s_i >= rel_cutoff * s_max` (at least one),
/// capped at `max_bond`; the discarded weight is the squared-norm fraction
/// dropped.
pub fn svd_truncate(matrix: &DenseTensor, policy: &TruncationPolicy) -> Result<SvdTruncation> {
    let m = matrix.to_matrix()?;
    let (u, s, vt, w) = svd_trunc(&m, policy)?;
    Ok(SvdTruncation {
        u: DenseTensor::from_matrix(&u),
        singular_values: s,
        vt: DenseTensor::from_matrix(&vt),
        discarded_weight: w,
    })
}

fn svd_trunc<T: ComplexField<RealField = f64>>(
    m: &DMatrix<T>,
    policy: &TruncationPolicy,
) -> Result<(DMatrix<T>, Vec<f64>, DMatrix<T>, f64)> {
    let (rows, cols) = (m.nrows(), m.ncols());
    let svd = m
        .clone()
        .try_svd(true, true, f64::EPSILON, 0)
        .ok_or(HmfError::SvdFailure { rows, cols })?;
    let u = svd.u.ok_or(HmfError::SvdFailure { rows, cols })?;
    let vt = svd.v_t.ok_or(HmfError::SvdFailure { rows, cols })?;
    let mut s: Vec<f64> = svd.singular_values.iter().copied().collect();
    // nalgebra sorts descending; keep a guard in case of ties/denormals
    debug_assert!(s.windows(2).all(|w| w[0] >= w[1]));
    s.iter_mut().for_each(|x| {
        if !x.is_finite() {
            *x = 0.0
        }
    });

    let s_max = s.first().copied().unwrap_or(0.0);
    let floor = policy.rel_cutoff * s_max;
    let mut keep = s.iter().take_while(|&&x| x >= floor && x > 0.0).count();
    keep = keep.max(1).min(s.len());
    if let Some(cap) = policy.max_bond {
        keep = keep.min(cap);
    }

    let total: f64 = s.iter().map(|x| x * x).sum();
    let discarded: f64 = s[keep..].iter().map(|x| x * x).sum();
    let weight = if total > 0.0 { discarded / total } else { 0.0 };

    let u_k = u.columns(0, keep).into_owned();
    let vt_k = vt.rows(0, keep).into_owned();
    s.truncate(keep);
    Ok((u_k, s, vt_k, weight))
}

/// Matrix product state over the interior path indices.
///
/// Sites are rank-3 tensors `(left bond, physical, right bond)`; adjacent
/// bonds match and the outermost bonds have dimension one. An empty chain
/// stands for the scalar 1, the seed the first growth row acts on.
#[derive(Debug, Clone)]
pub struct MatrixProductState {
    sites: Vec<DenseTensor>,
    physical_dim: usize,
    truncation_error_accum: f64,
}

impl MatrixProductState {
    pub fn empty(physical_dim: usize) -> Self {
        Self {
            sites: Vec::new(),
            physical_dim,
            truncation_error_accum: 0.0,
        }
    }

    pub fn from_sites(sites: Vec<DenseTensor>, physical_dim: usize) -> Result<Self> {
        let mps = Self {
            sites,
            physical_dim,
            truncation_error_accum: 0.0,
        };
        mps.validate()?;
        Ok(mps)
    }

    fn validate(&self) -> Result<()> {
        let mut left = 1;
        for (i, site) in self.sites.iter().enumerate() {
            let (l, p, r) = site.site_dims()?;
            if l != left {
                return Err(HmfError::DimensionMismatch(format!(
                    "site {i}: left bond {l}, expected {left}"
                )));
            }
            if p != self.physical_dim {
                return Err(HmfError::DimensionMismatch(format!(
                    "site {i}: physical dim {p}, expected {}",
                    self.physical_dim
                )));
            }
            left = r;
        }
        if left != 1 {
            return Err(HmfError::DimensionMismatch(format!(
                "rightmost bond is {left}, expected 1"
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn physical_dim(&self) -> usize {
        self.physical_dim
    }

    pub fn sites(&self) -> &[DenseTensor] {
        &self.sites
    }

    pub fn truncation_error_accum(&self) -> f64 {
        self.truncation_error_accum
    }

    /// Largest interior bond dimension (1 for product or empty states).
    pub fn max_bond_dim(&self) -> usize {
        self.sites
            .iter()
            .map(|s| s.shape()[2])
            .max()
            .unwrap_or(1)
            .max(1)
    }

    /// Rescale every site to unit max-abs entry, returning the natural log of
    /// the factor taken out of the full contraction. Keeps strongly coupled
    /// networks inside f64 range.
    pub fn rebalance(&mut self) -> f64 {
        let mut log_scale = 0.0;
        for site in &mut self.sites {
            let m = site.max_abs();
            if m > 0.0 && m.is_finite() {
                site.scale(1.0 / m);
                log_scale += m.ln();
            }
        }
        log_scale
    }

    /// Contract the chain against one terminal vector per site.
    ///
    /// The result is linear in every terminal; an empty chain contracts to 1.
    pub fn contract_full(&self, terminals: &[DVector<C64>]) -> Result<C64> {
        if terminals.len() != self.sites.len() {
            return Err(HmfError::DimensionMismatch(format!(
                "{} terminal vectors for {} sites",
                terminals.len(),
                self.sites.len()
            )));
        }
        let mut carry: Vec<C64> = vec![C64::new(1.0, 0.0)];
        for (site, w) in self.sites.iter().zip(terminals) {
            let (l, p, r) = site.site_dims()?;
            if w.len() != p {
                return Err(HmfError::DimensionMismatch(format!(
                    "terminal vector of length {}, physical dim {p}",
                    w.len()
                )));
            }
            let mut next = vec![C64::new(0.0, 0.0); r];
            for (a, &ca) in carry.iter().enumerate().take(l) {
                for j in 0..p {
                    let cw = ca * w[j];
                    for (b, nb) in next.iter_mut().enumerate() {
                        *nb += cw * site.at3(a, j, b);
                    }
                }
            }
            carry = next;
        }
        Ok(carry[0])
    }

    /// Full dense coefficient tensor, index order = site order. Exponential
    /// in the chain length; intended for small-N cross-checks.
    pub fn to_dense(&self) -> DenseTensor {
        let d = self.physical_dim;
        let n = self.sites.len();
        if n == 0 {
            return DenseTensor {
                shape: vec![],
                data: vec![C64::new(1.0, 0.0)],
            };
        }
        let mut block: Vec<C64> = vec![C64::new(1.0, 0.0)];
        let mut bond = 1;
        for site in &self.sites {
            let (l, p, r) = (site.shape[0], site.shape[1], site.shape[2]);
            debug_assert_eq!(l, bond);
            let rows = block.len() / bond;
            let mut next = vec![C64::new(0.0, 0.0); rows * p * r];
            for row in 0..rows {
                for a in 0..l {
                    let c = block[row * bond + a];
                    if c == C64::new(0.0, 0.0) {
                        continue;
                    }
                    for j in 0..p {
                        for b in 0..r {
                            next[(row * p + j) * r + b] += c * site.at3(a, j, b);
                        }
                    }
                }
            }
            block = next;
            bond = r;
        }
        DenseTensor {
            shape: vec![d; n],
            data: block,
        }
    }
}

/// One row of the triangular network: grows the state by the next path index.
///
/// `pass_through[i]` carries the influence weight coupling existing site `i`
/// to the new index (entries indexed `(j_site, j_new)`), `left_terminal` is
/// the influence weight tied to the fixed boundary index, and `new_site`
/// fuses the imaginary-time propagator into the self-influence of the new
/// index, indexed `(j_prev, j_new)` — 1 × d on the first row where the
/// previous index is the boundary itself.
#[derive(Debug, Clone)]
pub struct GrowthRow {
    step: usize,
    left_terminal: DVector<C64>,
    pass_through: Vec<DMatrix<C64>>,
    new_site: DMatrix<C64>,
}

impl GrowthRow {
    pub fn new(
        step: usize,
        left_terminal: DVector<C64>,
        pass_through: Vec<DMatrix<C64>>,
        new_site: DMatrix<C64>,
    ) -> Result<Self> {
        let d = left_terminal.len();
        if new_site.ncols() != d {
            return Err(HmfError::DimensionMismatch(format!(
                "new_site has {} columns, physical dim {d}",
                new_site.ncols()
            )));
        }
        let expected_prev = if pass_through.is_empty() { 1 } else { d };
        if new_site.nrows() != expected_prev {
            return Err(HmfError::DimensionMismatch(format!(
                "new_site has {} rows, expected {expected_prev}",
                new_site.nrows()
            )));
        }
        let finite = |z: &C64| z.re.is_finite() && z.im.is_finite();
        if !left_terminal.iter().all(finite) || !new_site.iter().all(finite) {
            return Err(HmfError::InvalidTensor("non-finite row weight".into()));
        }
        for (i, m) in pass_through.iter().enumerate() {
            if m.nrows() != d || m.ncols() != d {
                return Err(HmfError::DimensionMismatch(format!(
                    "pass_through[{i}] is {}x{}, expected {d}x{d}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            if !m.iter().all(finite) {
                return Err(HmfError::InvalidTensor("non-finite row weight".into()));
            }
        }
        Ok(Self {
            step,
            left_terminal,
            pass_through,
            new_site,
        })
    }

    pub fn step(&self) -> usize {
        self.step
    }

    /// Number of sites of the state this row produces.
    pub fn site_count(&self) -> usize {
        self.pass_through.len() + 1
    }

    pub fn physical_dim(&self) -> usize {
        self.left_terminal.len()
    }

    pub fn left_terminal(&self) -> &DVector<C64> {
        &self.left_terminal
    }

    pub fn pass_through(&self) -> &[DMatrix<C64>] {
        &self.pass_through
    }

    pub fn new_site(&self) -> &DMatrix<C64> {
        &self.new_site
    }

    fn is_real(&self) -> bool {
        self.left_terminal.iter().all(|z| z.im == 0.0)
            && self.new_site.iter().all(|z| z.im == 0.0)
            && self
                .pass_through
                .iter()
                .all(|m| m.iter().all(|z| z.im == 0.0))
    }
}

// --- generic sweep kernel -------------------------------------------------

/// Internal site storage: row-major (left, phys, right).
struct GSite<T> {
    l: usize,
    p: usize,
    r: usize,
    data: Vec<T>,
}

impl<T: ComplexField<RealField = f64> + Copy> GSite<T> {
    /// Matrix with rows = left bond, fused columns `(phys, right)`.
    fn as_left_matrix(&self) -> DMatrix<T> {
        DMatrix::from_row_slice(self.l, self.p * self.r, &self.data)
    }

    /// Matrix with fused rows `(left, phys)`, columns = right bond.
    fn as_right_matrix(&self) -> DMatrix<T> {
        DMatrix::from_row_slice(self.l * self.p, self.r, &self.data)
    }

    fn from_fused_left(m: &DMatrix<T>, l: usize, p: usize) -> Self {
        let r = m.ncols();
        let mut data = Vec::with_capacity(l * p * r);
        for row in 0..l * p {
            for c in 0..r {
                data.push(m[(row, c)]);
            }
        }
        Self { l, p, r, data }
    }

    fn from_fused_right(m: &DMatrix<T>, p: usize, r: usize) -> Self {
        let l = m.nrows();
        let mut data = Vec::with_capacity(l * p * r);
        for row in 0..l {
            for c in 0..p * r {
                data.push(m[(row, c)]);
            }
        }
        Self { l, p, r, data }
    }
}

struct GRow<T> {
    left_terminal: Vec<T>,
    pass_through: Vec<DMatrix<T>>,
    new_site: DMatrix<T>,
}

fn check_elems(bond: usize, rows: usize, cols: usize) -> Result<()> {
    if rows.saturating_mul(cols) > MAX_DENSE_ELEMS {
        return Err(HmfError::BondOverflow {
            bond,
            required: cols,
            cap: MAX_DENSE_ELEMS / rows.max(1),
        });
    }
    Ok(())
}

/// Left-to-right zip-up: expand each bond by the new-index value flowing in
/// from the right end, truncate immediately, materialize the new site last.
fn sweep_left_to_right<T: ComplexField<RealField = f64> + Copy>(
    sites: &[GSite<T>],
    row: &GRow<T>,
    policy: &TruncationPolicy,
) -> Result<(Vec<GSite<T>>, f64)> {
    let d = row.left_terminal.len();
    let n = sites.len();
    let mut err_acc = 0.0;

    // carry rows = compressed bond σ, columns fused (a, χ) a-major
    let mut carry = DMatrix::<T>::zeros(1, d);
    for a in 0..d {
        carry[(0, a)] = row.left_terminal[a];
    }

    let mut out: Vec<GSite<T>> = Vec::with_capacity(n + 1);
    for (i, site) in sites.iter().enumerate() {
        let (l, r) = (site.l, site.r);
        let sigma = carry.nrows();
        check_elems(i, sigma * d, r * d)?;

        // T[(σ d + j), (a r + c)] = Σ_χ carry[σ, (a l + χ)] site[χ, j, c] F[j, a]
        let site_m = site.as_left_matrix(); // l × (d·r), cols j·r + c
        let mut t = DMatrix::<T>::zeros(sigma * d, d * r);
        for a in 0..d {
            let c_a = carry.columns(a * l, l); // σ × χ
            let g_a = &c_a * &site_m; // σ × (d·r)
            for s_idx in 0..sigma {
                for j in 0..d {
                    let mut f = row.pass_through[i][(j, a)];
                    if i + 1 == n {
                        f *= row.new_site[(j, a)];
                    }
                    let trow = s_idx * d + j;
                    for c in 0..r {
                        t[(trow, a * r + c)] = g_a[(s_idx, j * r + c)] * f;
                    }
                }
            }
        }

        let (u, s, vt, w) = svd_trunc(&t, policy)?;
        err_acc += w;
        out.push(GSite::from_fused_left(&u, sigma, d));
        let mut sv = vt;
        for (k, &sk) in s.iter().enumerate() {
            for c in 0..sv.ncols() {
                sv[(k, c)] *= T::from_real(sk);
            }
        }
        carry = sv;
    }

    // rightmost old bond is 1: carry columns enumerate the new index
    let sigma = carry.nrows();
    let mut last = Vec::with_capacity(sigma * d);
    for s_idx in 0..sigma {
        for a in 0..d {
            last.push(carry[(s_idx, a)]);
        }
    }
    out.push(GSite {
        l: sigma,
        p: d,
        r: 1,
        data: last,
    });
    Ok((out, err_acc))
}

/// Mirror sweep: seed a delta site for the new index at the right end and
/// zip up moving left, folding the boundary terminal into the first site.
fn sweep_right_to_left<T: ComplexField<RealField = f64> + Copy>(
    sites: &[GSite<T>],
    row: &GRow<T>,
    policy: &TruncationPolicy,
) -> Result<(Vec<GSite<T>>, f64)> {
    let d = row.left_terminal.len();
    let n = sites.len();
    let mut err_acc = 0.0;

    // new site: delta tensor carrying the new index into the bond
    let mut delta = vec![T::zero(); d * d];
    for a in 0..d {
        delta[a * d + a] = T::one();
    }
    let mut out_rev: Vec<GSite<T>> = Vec::with_capacity(n + 1);
    out_rev.push(GSite {
        l: d,
        p: d,
        r: 1,
        data: delta,
    });

    // carry rows fused (a, χ) a-major, columns = compressed bond σ
    let mut carry = DMatrix::<T>::identity(d, d);

    for i in (0..n).rev() {
        let (l, r) = (sites[i].l, sites[i].r);
        let sigma = carry.ncols();
        check_elems(i, l * d, d * sigma)?;

        // T[(a l + χl), (j σ + s)] = Σ_χ site[χl, j, χ] F[j, a] carry[(a r + χ), s]
        let site_m = sites[i].as_right_matrix(); // (l·d) × r, rows χl·d + j
        let mut t = DMatrix::<T>::zeros(l * d, d * sigma);
        for a in 0..d {
            let c_a = carry.rows(a * r, r); // r × σ
            let g_a = &site_m * &c_a; // (l·d) × σ
            for chi_l in 0..l {
                for j in 0..d {
                    let mut f = row.pass_through[i][(j, a)];
                    if i + 1 == n {
                        f *= row.new_site[(j, a)];
                    }
                    for s_idx in 0..sigma {
                        t[(a * l + chi_l, j * sigma + s_idx)] =
                            g_a[(chi_l * d + j, s_idx)] * f;
                    }
                }
            }
        }

        let (u, s, vt, w) = svd_trunc(&t, policy)?;
        err_acc += w;
        // vt rows are the new site (k × (d·σ)), right-canonical
        out_rev.push(GSite::from_fused_right(&vt, d, sigma));
        let mut us = u;
        for (col, &sk) in s.iter().enumerate() {
            for rr in 0..us.nrows() {
                us[(rr, col)] *= T::from_real(sk);
            }
        }
        carry = us; // (a·l) fused rows × k
    }

    // fold the boundary terminal into the leftmost bond
    let k = carry.ncols();
    let mut head = vec![T::zero(); k];
    for a in 0..d {
        let la = row.left_terminal[a];
        for kk in 0..k {
            head[kk] += la * carry[(a, kk)];
        }
    }
    let mut out: Vec<GSite<T>> = Vec::with_capacity(n + 1);
    let first = out_rev.pop().expect("at least the seed site");
    // first popped is the leftmost produced site (k × d × σ)
    let mut merged = vec![T::zero(); first.p * first.r];
    for kk in 0..first.l {
        let h = head[kk];
        if h != T::zero() {
            for jc in 0..first.p * first.r {
                merged[jc] += h * first.data[kk * first.p * first.r + jc];
            }
        }
    }
    out.push(GSite {
        l: 1,
        p: first.p,
        r: first.r,
        data: merged,
    });
    while let Some(s) = out_rev.pop() {
        out.push(s);
    }
    Ok((out, err_acc))
}

fn run_sweep<T: ComplexField<RealField = f64> + Copy>(
    sites: &[GSite<T>],
    row: &GRow<T>,
    policy: &TruncationPolicy,
    left_to_right: bool,
) -> Result<(Vec<GSite<T>>, f64)> {
    if left_to_right {
        sweep_left_to_right(sites, row, policy)
    } else {
        sweep_right_to_left(sites, row, policy)
    }
}

// --- public growth operation ----------------------------------------------

fn to_c64_sites(sites: Vec<GSite<f64>>) -> Vec<DenseTensor> {
    sites
        .into_iter()
        .map(|s| DenseTensor {
            shape: vec![s.l, s.p, s.r],
            data: s.data.into_iter().map(|x| C64::new(x, 0.0)).collect(),
        })
        .collect()
}

/// Absorb one growth row into the state, producing a state with one more
/// site. Equals the exact contraction of the row against the state up to the
/// truncation accounted in `truncation_error_accum`. Sweep direction
/// alternates with the row's step index.
pub fn mps_apply_growth_row(
    state: &MatrixProductState,
    row: &GrowthRow,
    policy: &TruncationPolicy,
) -> Result<MatrixProductState> {
    let d = state.physical_dim;
    if row.physical_dim() != d {
        return Err(HmfError::DimensionMismatch(format!(
            "row physical dim {}, state physical dim {d}",
            row.physical_dim()
        )));
    }
    if row.site_count() != state.len() + 1 {
        return Err(HmfError::DimensionMismatch(format!(
            "row grows to {} sites, state has {}",
            row.site_count(),
            state.len()
        )));
    }

    let n = state.len();
    if n == 0 {
        let mut data = Vec::with_capacity(d);
        for j in 0..d {
            data.push(row.left_terminal[j] * row.new_site[(0, j)]);
        }
        return Ok(MatrixProductState {
            sites: vec![DenseTensor::new(vec![1, d, 1], data)?],
            physical_dim: d,
            truncation_error_accum: state.truncation_error_accum,
        });
    }

    let left_to_right = row.step() % 2 == 0;
    let all_real = row.is_real() && state.sites.iter().all(|s| s.is_real());

    let (sites, w) = if all_real {
        let gsites: Vec<GSite<f64>> = state
            .sites
            .iter()
            .map(|s| GSite {
                l: s.shape[0],
                p: s.shape[1],
                r: s.shape[2],
                data: s.data.iter().map(|z| z.re).collect(),
            })
            .collect();
        let grow = GRow {
            left_terminal: row.left_terminal.iter().map(|z| z.re).collect(),
            pass_through: row.pass_through.iter().map(|m| m.map(|z| z.re)).collect(),
            new_site: row.new_site.map(|z| z.re),
        };
        let (out, w) = run_sweep(&gsites, &grow, policy, left_to_right)?;
        (to_c64_sites(out), w)
    } else {
        let gsites: Vec<GSite<C64>> = state
            .sites
            .iter()
            .map(|s| GSite {
                l: s.shape[0],
                p: s.shape[1],
                r: s.shape[2],
                data: s.data.clone(),
            })
            .collect();
        let grow = GRow {
            left_terminal: row.left_terminal.iter().copied().collect(),
            pass_through: row.pass_through.clone(),
            new_site: row.new_site.clone(),
        };
        let (out, w) = run_sweep(&gsites, &grow, policy, left_to_right)?;
        let sites = out
            .into_iter()
            .map(|s| DenseTensor {
                shape: vec![s.l, s.p, s.r],
                data: s.data,
            })
            .collect();
        (sites, w)
    };

    let out = MatrixProductState {
        sites,
        physical_dim: d,
        truncation_error_accum: state.truncation_error_accum + w,
    };
    debug_assert!(out.validate().is_ok());
    Ok(out)
}

/// Scalar of the full contraction `Σ state(j...) Π_i terminals[i][j_i]`.
pub fn mps_contract_full(
    state: &MatrixProductState,
    terminals: &[DVector<C64>],
) -> Result<C64> {
    state.contract_full(terminals)
}
