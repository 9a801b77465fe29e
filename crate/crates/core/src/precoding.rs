//! Per-group, per-subband MU precoders.
//!
//! Channels are row vectors: user `k` receives `h_k . x` for a transmitted
//! antenna vector `x`, and a precoder column `p` delivers gain `h_k . p`.
//!
//! Conjugate beamforming uses each user's own channel only. SLNR stacks every
//! user's channel after aligning it to the target group's subcarrier grid
//! (interpolating coarser grids, decimating finer ones) and regularizes the
//! inversion with the noise variance. Both operate on one effective channel per
//! user and subband: the dominant eigenvector of the subband-averaged
//! covariance.

use std::ops::Range;

use log::warn;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::resample::{resample_columns, ResampleSpec};

/// Precoding algorithm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Cb,
    Slnr,
}

impl Method {
    pub fn tag(&self) -> &'static str {
        match self {
            Method::Cb => "CB",
            Method::Slnr => "SLNR",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cb" => Ok(Method::Cb),
            "slnr" => Ok(Method::Slnr),
            other => Err(Error::Config(format!("unknown precoding method {other:?}"))),
        }
    }
}

/// Matched filter `conj(h) / |h|`.
pub fn cb_precoder(h: &DVector<Complex64>) -> Result<DVector<Complex64>> {
    let norm = h.norm();
    if norm == 0.0 {
        return Err(Error::ZeroChannel);
    }
    Ok(h.conjugate() / Complex64::new(norm, 0.0))
}

fn check_sigma2(sigma2: f64) -> Result<()> {
    if !(sigma2.is_finite() && sigma2 > 0.0) {
        return Err(Error::Parameter(format!("noise variance must be positive, got {sigma2}")));
    }
    Ok(())
}

fn normalized(v: DVector<Complex64>) -> Result<DVector<Complex64>> {
    let n = v.norm();
    if n == 0.0 || !n.is_finite() {
        return Err(Error::ZeroChannel);
    }
    Ok(v / Complex64::new(n, 0.0))
}

fn regularized_gram(h: &DMatrix<Complex64>, sigma2: f64) -> DMatrix<Complex64> {
    let mut g = h.adjoint() * h;
    for i in 0..g.nrows() {
        g[(i, i)] += sigma2;
    }
    g
}

/// Unit-norm SLNR column for the user with channel `h_u` against the stacked
/// channels `stacked` (`K_total x M`), computed as
/// `(H^H H + sigma2 I)^-1 h_u^H`.
pub fn slnr_precoder(h_u: &DVector<Complex64>, stacked: &DMatrix<Complex64>, sigma2: f64) -> Result<DVector<Complex64>> {
    check_sigma2(sigma2)?;
    if stacked.ncols() != h_u.len() {
        return Err(Error::Dimension(format!("stacked channels have {} antennas, user has {}", stacked.ncols(), h_u.len())));
    }
    let gram = regularized_gram(stacked, sigma2);
    let chol = gram.cholesky().ok_or_else(|| Error::Parameter("regularized gram matrix is not positive definite".into()))?;
    normalized(chol.solve(&h_u.conjugate()))
}

/// Unit-norm SLNR columns for every row of `stacked`, returned as an
/// `M x K` matrix. When `K <= M` the `K x K` form
/// `H^H (H H^H + sigma2 I)^-1` is used; it is the same matrix by the
/// push-through identity and better conditioned at small `sigma2`.
pub fn slnr_matrix(stacked: &DMatrix<Complex64>, sigma2: f64) -> Result<DMatrix<Complex64>> {
    check_sigma2(sigma2)?;
    let (k, m) = stacked.shape();
    let raw = if k <= m {
        let mut g = stacked * stacked.adjoint();
        for i in 0..k {
            g[(i, i)] += sigma2;
        }
        let chol = g.cholesky().ok_or_else(|| Error::Parameter("regularized gram matrix is not positive definite".into()))?;
        stacked.adjoint() * chol.inverse()
    } else {
        let chol = regularized_gram(stacked, sigma2)
            .cholesky()
            .ok_or_else(|| Error::Parameter("regularized gram matrix is not positive definite".into()))?;
        chol.solve(&stacked.adjoint())
    };
    let mut out = raw;
    for mut col in out.column_iter_mut() {
        let n = col.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::ZeroChannel);
        }
        col /= Complex64::new(n, 0.0);
    }
    Ok(out)
}

/// Subband-averaged covariance `mean_j h_j^H h_j` of the rows of `block`.
pub fn sb_covariance(block: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let n = block.nrows().max(1) as f64;
    block.adjoint() * block / Complex64::new(n, 0.0)
}

/// Rotates `v` so its first non-negligible entry is real and positive.
pub fn fix_phase(v: &mut DVector<Complex64>) {
    let scale = v.camax();
    if let Some(first) = v.iter().find(|x| x.norm() > 1e-12 * scale.max(f64::MIN_POSITIVE)).copied() {
        let rot = first.conj() / first.norm();
        *v *= rot;
    }
}

/// Largest eigenvalue and its unit eigenvector of a Hermitian matrix.
pub fn dominant_eigen(r: &DMatrix<Complex64>) -> (f64, DVector<Complex64>) {
    let eig = r.clone().symmetric_eigen();
    let (idx, &lambda) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty matrix");
    (lambda, eig.eigenvectors.column(idx).into_owned())
}

/// One effective channel row for a subband: `sqrt(lambda_max) * conj(v_max)`
/// of the averaged covariance, phase-normalized.
pub fn sb_effective_channel(block: &DMatrix<Complex64>) -> DVector<Complex64> {
    let m = block.ncols();
    if block.nrows() == 0 || block.iter().all(|x| *x == Complex64::new(0.0, 0.0)) {
        warn!("subband channel is empty or all-zero, effective channel is zero");
        return DVector::zeros(m);
    }
    let (lambda, v) = dominant_eigen(&sb_covariance(block));
    let mut h = v.conjugate() * Complex64::new(lambda.max(0.0).sqrt(), 0.0);
    fix_phase(&mut h);
    h
}

/// Frequency responses of one numerology group's users on that group's own
/// grid, each `(used x M)`.
#[derive(Debug, Clone)]
pub struct GroupChannels {
    pub scs_hz: f64,
    pub users: Vec<DMatrix<Complex64>>,
}

impl GroupChannels {
    pub fn used(&self) -> usize {
        self.users.first().map_or(0, DMatrix::nrows)
    }

    pub fn antennas(&self) -> usize {
        self.users.first().map_or(0, DMatrix::ncols)
    }
}

fn integer_ratio(a: f64, b: f64) -> Option<usize> {
    let r = a / b;
    let n = r.round();
    (n >= 1.0 && (r - n).abs() < 1e-9).then_some(n as usize)
}

/// Resampling spec that maps the grid of spacing `from_scs` onto spacing `to_scs`.
pub fn alignment_spec(from_scs: f64, to_scs: f64, filter_len: usize) -> Result<ResampleSpec> {
    if let Some(r) = integer_ratio(from_scs, to_scs) {
        ResampleSpec::new(r, 1, filter_len)
    } else if let Some(r) = integer_ratio(to_scs, from_scs) {
        ResampleSpec::new(1, r, filter_len)
    } else {
        Err(Error::Grid(format!("spacings {from_scs} Hz and {to_scs} Hz are not integer multiples")))
    }
}

fn check_groups(channels: &[GroupChannels]) -> Result<usize> {
    if channels.is_empty() || channels.iter().all(|g| g.users.is_empty()) {
        return Err(Error::Empty("no users to precode".into()));
    }
    let m = channels.iter().find(|g| !g.users.is_empty()).map(GroupChannels::antennas).unwrap_or(0);
    for (t, g) in channels.iter().enumerate() {
        let used = g.used();
        for (u, h) in g.users.iter().enumerate() {
            if h.ncols() != m || h.nrows() != used {
                return Err(Error::Dimension(format!(
                    "group {} user {} response is {}x{}, expected {}x{}",
                    t + 1,
                    u + 1,
                    h.nrows(),
                    h.ncols(),
                    used,
                    m
                )));
            }
        }
    }
    Ok(m)
}

/// Every user's response resampled onto the grid of group `target`, trimmed to
/// that group's used subcarriers. Outer index is the group, inner the user.
pub fn align_to_group(channels: &[GroupChannels], target: usize, filter_len: usize) -> Result<Vec<Vec<DMatrix<Complex64>>>> {
    let tgt = &channels[target];
    let used = tgt.used();
    channels
        .iter()
        .enumerate()
        .map(|(t, g)| {
            if t == target {
                return Ok(g.users.clone());
            }
            let spec = alignment_spec(g.scs_hz, tgt.scs_hz, filter_len)?;
            g.users
                .iter()
                .map(|h| {
                    let r = resample_columns(h, &spec)?;
                    if r.nrows() < used {
                        return Err(Error::Grid(format!(
                            "group {} spans {} subcarriers of group {}'s grid, needs {}",
                            t + 1,
                            r.nrows(),
                            target + 1,
                            used
                        )));
                    }
                    Ok(r.rows(0, used).into_owned())
                })
                .collect()
        })
        .collect()
}

fn stack_rows(aligned: &[Vec<DMatrix<Complex64>>], range: &Range<usize>, m: usize) -> DMatrix<Complex64> {
    let rows: Vec<DVector<Complex64>> = aligned
        .iter()
        .flatten()
        .map(|h| sb_effective_channel(&h.rows(range.start, range.len()).into_owned()))
        .collect();
    DMatrix::from_fn(rows.len(), m, |r, c| rows[r][c])
}

/// Stacked effective channels (`K_total x M`) of all users on subband `range`
/// of group `target`'s grid. Rows are ordered by ascending group, then user.
pub fn stack_channels(
    channels: &[GroupChannels],
    target: usize,
    range: Range<usize>,
    filter_len: usize,
) -> Result<DMatrix<Complex64>> {
    let m = check_groups(channels)?;
    if range.is_empty() || range.end > channels[target].used() {
        return Err(Error::Count(format!("subband {range:?} outside {} used subcarriers", channels[target].used())));
    }
    let aligned = align_to_group(channels, target, filter_len)?;
    Ok(stack_rows(&aligned, &range, m))
}

/// Consecutive subbands of `size` covering `used` subcarriers; the last one
/// is shorter when `size` does not divide `used`.
pub fn subband_ranges(used: usize, size: usize) -> Vec<Range<usize>> {
    let size = size.max(1);
    (0..used).step_by(size).map(|s| s..(s + size).min(used)).collect()
}

/// One subband's `M x K_t` precoder.
#[derive(Debug, Clone, PartialEq)]
pub struct SubbandPrecoder {
    pub range: Range<usize>,
    pub matrix: DMatrix<Complex64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupPrecoders {
    pub subband_size: usize,
    pub subbands: Vec<SubbandPrecoder>,
}

impl GroupPrecoders {
    /// Precoder covering subcarrier `j` of the group's grid.
    pub fn at(&self, j: usize) -> &DMatrix<Complex64> {
        &self.subbands[j / self.subband_size].matrix
    }
}

/// Precoders for every group and subband. Each user's column has norm
/// `1/sqrt(K_total)`, so the total transmit power per subcarrier is one.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecoderSet {
    pub method: Method,
    pub sigma2: f64,
    pub k_total: usize,
    pub groups: Vec<GroupPrecoders>,
}

impl PrecoderSet {
    /// Norm of every column, per group and subband.
    pub fn column_norms(&self) -> Vec<Vec<Vec<f64>>> {
        self.groups
            .iter()
            .map(|g| g.subbands.iter().map(|sb| sb.matrix.column_iter().map(|c| c.norm()).collect()).collect())
            .collect()
    }
}

/// Per-group, per-subband effective channels: everything about the precoders
/// that does not depend on the method or the noise variance.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveChannels {
    pub subband_size: usize,
    pub antennas: usize,
    /// Users per group.
    pub users: Vec<usize>,
    /// `[group][subband]`: stacked `K_total x M` effective rows of every user
    /// aligned to that group's grid.
    pub stacked: Vec<Vec<SubbandPrecoder>>,
}

impl EffectiveChannels {
    pub fn k_total(&self) -> usize {
        self.users.iter().sum()
    }

    /// Index of group `t`'s first user among the stacked rows.
    pub fn offset(&self, t: usize) -> usize {
        self.users[..t].iter().sum()
    }
}

/// Aligns every user to every group's grid and reduces each subband to one
/// effective channel row per user.
pub fn effective_channels(channels: &[GroupChannels], subband_size: usize, filter_len: usize) -> Result<EffectiveChannels> {
    let m = check_groups(channels)?;
    if subband_size == 0 {
        return Err(Error::Parameter("subband size must be positive".into()));
    }
    let stacked = (0..channels.len())
        .map(|t| {
            let aligned = align_to_group(channels, t, filter_len)?;
            Ok(subband_ranges(channels[t].used(), subband_size)
                .into_iter()
                .map(|range| SubbandPrecoder { matrix: stack_rows(&aligned, &range, m), range })
                .collect())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EffectiveChannels { subband_size, antennas: m, users: channels.iter().map(|g| g.users.len()).collect(), stacked })
}

/// Precoders of `method` from precomputed effective channels.
pub fn precoders_from_effective(eff: &EffectiveChannels, method: Method, sigma2: f64) -> Result<PrecoderSet> {
    if method == Method::Slnr {
        check_sigma2(sigma2)?;
    }
    let k_total = eff.k_total();
    if k_total == 0 {
        return Err(Error::Empty("no users to precode".into()));
    }
    let scale = Complex64::new(1.0 / (k_total as f64).sqrt(), 0.0);
    let mut groups = Vec::with_capacity(eff.users.len());
    for (t, sbs) in eff.stacked.iter().enumerate() {
        let (offset, k) = (eff.offset(t), eff.users[t]);
        let mut subbands = Vec::with_capacity(sbs.len());
        for sb in sbs {
            let matrix = match method {
                Method::Cb => {
                    let cols = (offset..offset + k)
                        .map(|r| cb_precoder(&sb.matrix.row(r).transpose()))
                        .collect::<Result<Vec<_>>>()?;
                    DMatrix::from_columns(&cols)
                }
                Method::Slnr => slnr_matrix(&sb.matrix, sigma2)?.columns(offset, k).into_owned(),
            };
            subbands.push(SubbandPrecoder { range: sb.range.clone(), matrix: matrix * scale });
        }
        groups.push(GroupPrecoders { subband_size: eff.subband_size, subbands });
    }
    Ok(PrecoderSet { method, sigma2, k_total, groups })
}

/// Precoders of `method` for all groups on subbands of `subband_size`
/// subcarriers of each group's own grid.
pub fn build_precoder_set(
    channels: &[GroupChannels],
    method: Method,
    sigma2: f64,
    subband_size: usize,
    filter_len: usize,
) -> Result<PrecoderSet> {
    if method == Method::Slnr {
        check_sigma2(sigma2)?;
    }
    let eff = effective_channels(channels, subband_size, filter_len)?;
    if eff.k_total() > eff.antennas {
        warn!("{} users on {} antennas: MU operation is overloaded", eff.k_total(), eff.antennas);
    }
    precoders_from_effective(&eff, method, sigma2)
}
