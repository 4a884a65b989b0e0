//! Seeded random problem instances and the partial DFT design.
//!
//! Every generator draws from a single ChaCha8 stream selected by
//! [`RngSeed`]. The ChaCha key is expanded from `master_seed` with
//! `SeedableRng::seed_from_u64` (PCG32 expansion) and `stream_index` selects
//! the ChaCha stream, so distinct indices give non-overlapping streams.
//! Gaussians use `rand_distr::StandardNormal` (ziggurat) and uniforms use
//! `rand::Rng::random::<f64>()`; the draw order of each generator is fixed and
//! documented on the function, which makes instances bit-reproducible.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::C64;

/// Identifies one reproducible random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngSeed {
    pub master_seed: u64,
    pub stream_index: u64,
}

impl RngSeed {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        Self {
            master_seed,
            stream_index,
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_index);
        rng
    }
}

pub(crate) fn gaussian<R: Rng>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// `N(0, 1/2) + i N(0, 1/2)`, real part drawn first.
pub(crate) fn complex_gaussian<R: Rng>(rng: &mut R) -> C64 {
    let re = gaussian(rng);
    let im = gaussian(rng);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub(crate) fn unit_real<R: Rng>(rng: &mut R, n: usize) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(n, |_, _| gaussian(rng));
        let norm = v.norm();
        if norm > 0.0 {
            return v / norm;
        }
    }
}

pub(crate) fn unit_complex<R: Rng>(rng: &mut R, n: usize) -> DVector<C64> {
    loop {
        let v = DVector::from_fn(n, |_, _| complex_gaussian(rng));
        let norm = v.norm();
        if norm > 0.0 {
            return v.unscale(norm);
        }
    }
}

/// Real phase retrieval data: `y_j = (a_j^T x*)^2`.
#[derive(Debug, Clone)]
pub struct PhaseRetrievalInstance {
    pub n: usize,
    pub m: usize,
    /// `m x n`, row `j` is `a_j^T`.
    pub designs: DMatrix<f64>,
    pub measurements: DVector<f64>,
    pub truth: Option<DVector<f64>>,
}

impl PhaseRetrievalInstance {
    pub fn new(
        designs: DMatrix<f64>,
        measurements: DVector<f64>,
        truth: Option<DVector<f64>>,
    ) -> Result<Self> {
        let (m, n) = designs.shape();
        if m == 0 || n == 0 {
            return Err(Error::invalid("phase retrieval needs m, n >= 1"));
        }
        Error::check_dim(m, measurements.len())?;
        if let Some(x) = &truth {
            Error::check_dim(n, x.len())?;
        }
        Ok(Self {
            n,
            m,
            designs,
            measurements,
            truth,
        })
    }

    pub fn truth(&self) -> Result<&DVector<f64>> {
        self.truth
            .as_ref()
            .ok_or(Error::MissingTruth("phase retrieval signal"))
    }

    /// Copy of the instance with sample `l` appended a second time.
    pub fn with_duplicated_sample(&self, l: usize) -> Result<Self> {
        if l >= self.m {
            return Err(Error::invalid(format!(
                "sample {l} out of range (m = {})",
                self.m
            )));
        }
        let designs = self.designs.clone().insert_row(self.m, 0.0);
        let mut designs = designs;
        designs.set_row(self.m, &self.designs.row(l));
        let mut y = self.measurements.clone().insert_row(self.m, 0.0);
        y[self.m] = self.measurements[l];
        Self::new(designs, y, self.truth.clone())
    }
}

/// Draws `x*` uniformly on the unit sphere, then the rows `a_1, ..., a_m`
/// entry by entry from `N(0, 1)`.
pub fn gen_phase_retrieval(n: usize, m: usize, seed: RngSeed) -> Result<PhaseRetrievalInstance> {
    if n == 0 || m == 0 {
        return Err(Error::invalid("phase retrieval needs m, n >= 1"));
    }
    let mut rng = seed.rng();
    let truth = unit_real(&mut rng, n);
    let designs = DMatrix::from_fn(m, n, |_, _| 0.0);
    let mut designs = designs;
    for j in 0..m {
        for k in 0..n {
            designs[(j, k)] = gaussian(&mut rng);
        }
    }
    let ax = &designs * &truth;
    let y = ax.map(|v| v * v);
    PhaseRetrievalInstance::new(designs, y, Some(truth))
}

/// Symmetric observation pattern stored as sorted adjacency lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleMask {
    n: usize,
    rows: Vec<Vec<usize>>,
}

impl SampleMask {
    /// Builds the mask from upper-triangular positions `(j, k)` with `j <= k`.
    pub fn from_upper(n: usize, upper: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut rows = vec![Vec::new(); n];
        for (j, k) in upper {
            debug_assert!(j <= k && k < n);
            rows[j].push(k);
            if j != k {
                rows[k].push(j);
            }
        }
        for row in &mut rows {
            row.sort_unstable();
            row.dedup();
        }
        Self { n, rows }
    }

    pub fn full(n: usize) -> Self {
        Self::from_upper(n, (0..n).flat_map(|j| (j..n).map(move |k| (j, k))))
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn contains(&self, j: usize, k: usize) -> bool {
        self.rows[j].binary_search(&k).is_ok()
    }

    /// Sampled column indices of row `j`, ascending.
    pub fn row(&self, j: usize) -> &[usize] {
        &self.rows[j]
    }

    /// Number of sampled ordered pairs `(j, k)`, i.e. `|Omega|`.
    pub fn len(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of sampled positions with `j <= k`.
    pub fn upper_count(&self) -> usize {
        self.rows
            .iter()
            .enumerate()
            .map(|(j, row)| row.iter().filter(|&&k| k >= j).count())
            .sum()
    }

    pub fn to_dense(&self) -> DMatrix<bool> {
        DMatrix::from_fn(self.n, self.n, |j, k| self.contains(j, k))
    }
}

/// PSD low-rank matrix completion data `Y = P_Omega(M* + E)`.
#[derive(Debug, Clone)]
pub struct MatrixCompletionInstance {
    pub n: usize,
    pub r: usize,
    pub p: f64,
    pub noise_level: f64,
    pub mask: SampleMask,
    /// Dense symmetric, zero off the mask.
    pub observed: DMatrix<f64>,
    pub spectrum: Vec<f64>,
    pub truth_factor: Option<DMatrix<f64>>,
    pub truth_matrix: Option<DMatrix<f64>>,
}

impl MatrixCompletionInstance {
    pub fn new(
        r: usize,
        p: f64,
        noise_level: f64,
        mask: SampleMask,
        observed: DMatrix<f64>,
        truth_factor: Option<DMatrix<f64>>,
    ) -> Result<Self> {
        let n = mask.dim();
        validate_mc_params(n, r, p, noise_level)?;
        if observed.shape() != (n, n) {
            return Err(Error::invalid("observed matrix must be n x n"));
        }
        let (truth_matrix, spectrum) = match &truth_factor {
            Some(x) => {
                if x.shape() != (n, r) {
                    return Err(Error::invalid("truth factor must be n x r"));
                }
                let gram = x.transpose() * x;
                let mut eig: Vec<f64> = gram.symmetric_eigenvalues().iter().copied().collect();
                eig.sort_by(|a, b| b.total_cmp(a));
                (Some(x * x.transpose()), eig)
            }
            None => (None, Vec::new()),
        };
        Ok(Self {
            n,
            r,
            p,
            noise_level,
            mask,
            observed,
            spectrum,
            truth_factor,
            truth_matrix,
        })
    }

    pub fn truth_factor(&self) -> Result<&DMatrix<f64>> {
        self.truth_factor
            .as_ref()
            .ok_or(Error::MissingTruth("matrix completion factor"))
    }

    pub fn truth_matrix(&self) -> Result<&DMatrix<f64>> {
        self.truth_matrix
            .as_ref()
            .ok_or(Error::MissingTruth("matrix completion low-rank matrix"))
    }

    /// Largest and smallest nonzero eigenvalues of `M*`.
    pub fn sigma_max_min(&self) -> Option<(f64, f64)> {
        Some((*self.spectrum.first()?, *self.spectrum.last()?))
    }

    pub fn condition_number(&self) -> Option<f64> {
        self.sigma_max_min().map(|(hi, lo)| hi / lo)
    }
}

fn validate_mc_params(n: usize, r: usize, p: f64, sigma: f64) -> Result<()> {
    if n == 0 || r == 0 || r > n {
        return Err(Error::invalid(format!(
            "need 1 <= r <= n, got r = {r}, n = {n}"
        )));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::invalid(format!(
            "sampling rate must lie in (0, 1], got {p}"
        )));
    }
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::invalid(format!(
            "noise level must be >= 0, got {sigma}"
        )));
    }
    Ok(())
}

/// Draw order: the `n x r` Gaussian matrix column-major (orthonormalised by
/// QR into `U*`), then for each `j <= k` in row-major upper-triangular order
/// one uniform (sampled iff `< p`) followed by one standard normal (noise
/// `sigma * z`). Both draws happen for every position, so for a fixed seed the
/// mask is nested in `p` and the noise scales linearly in `sigma`.
pub fn gen_matrix_completion(
    n: usize,
    r: usize,
    p: f64,
    sigma: f64,
    spectrum: &[f64],
    seed: RngSeed,
) -> Result<MatrixCompletionInstance> {
    validate_mc_params(n, r, p, sigma)?;
    if spectrum.len() != r || spectrum.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::invalid("spectrum must hold r positive values"));
    }
    let mut rng = seed.rng();
    let g = DMatrix::from_fn(n, r, |_, _| gaussian(&mut rng));
    let u = g.qr().q();
    let mut x = u;
    for (c, &s) in spectrum.iter().enumerate() {
        x.column_mut(c).scale_mut(s.sqrt());
    }
    let m_star = &x * x.transpose();

    let mut upper = Vec::new();
    let mut observed = DMatrix::zeros(n, n);
    for j in 0..n {
        for k in j..n {
            let u: f64 = rng.random();
            let z = gaussian(&mut rng);
            if u < p {
                upper.push((j, k));
                let v = m_star[(j, k)] + sigma * z;
                observed[(j, k)] = v;
                observed[(k, j)] = v;
            }
        }
    }
    let mask = SampleMask::from_upper(n, upper);
    let mut inst = MatrixCompletionInstance::new(r, p, sigma, mask, observed, Some(x))?;
    inst.spectrum = spectrum.to_vec();
    inst.spectrum.sort_by(|a, b| b.total_cmp(a));
    Ok(inst)
}

/// Convenience: unit spectrum, the default experiment setup.
pub fn gen_matrix_completion_unit(
    n: usize,
    r: usize,
    p: f64,
    sigma: f64,
    seed: RngSeed,
) -> Result<MatrixCompletionInstance> {
    gen_matrix_completion(n, r, p, sigma, &vec![1.0; r], seed)
}

/// First `K` columns of the unitary `m x m` DFT: entry `(l, k)` is
/// `omega^{l k} / sqrt(m)` with `omega = exp(-2 pi i / m)`. Row `l` is `b_l^H`.
pub fn partial_dft(m: usize, k: usize) -> Result<DMatrix<C64>> {
    if m == 0 || k == 0 || k > m {
        return Err(Error::invalid(format!(
            "partial DFT needs 1 <= K <= m, got K = {k}, m = {m}"
        )));
    }
    let scale = 1.0 / (m as f64).sqrt();
    Ok(DMatrix::from_fn(m, k, |l, c| {
        let phase = ((l * c) % m) as f64 / m as f64;
        C64::from_polar(scale, -std::f64::consts::TAU * phase)
    }))
}

/// Bilinear blind deconvolution data `y_j = b_j^H h* x*^H a_j`.
#[derive(Debug, Clone)]
pub struct BlindDeconvInstance {
    pub k: usize,
    pub m: usize,
    /// `m x K`, row `j` is `a_j^H`.
    pub a: DMatrix<C64>,
    /// `m x K`, row `j` is `b_j^H` (the partial DFT).
    pub b: DMatrix<C64>,
    pub measurements: DVector<C64>,
    pub truth: Option<(DVector<C64>, DVector<C64>)>,
}

impl BlindDeconvInstance {
    pub fn new(
        a: DMatrix<C64>,
        b: DMatrix<C64>,
        measurements: DVector<C64>,
        truth: Option<(DVector<C64>, DVector<C64>)>,
    ) -> Result<Self> {
        let (m, k) = a.shape();
        if m == 0 || k == 0 {
            return Err(Error::invalid("blind deconvolution needs K, m >= 1"));
        }
        if b.shape() != (m, k) {
            return Err(Error::invalid("a and b designs must both be m x K"));
        }
        Error::check_dim(m, measurements.len())?;
        if let Some((h, x)) = &truth {
            Error::check_dim(k, h.len())?;
            Error::check_dim(k, x.len())?;
        }
        Ok(Self {
            k,
            m,
            a,
            b,
            measurements,
            truth,
        })
    }

    pub fn truth(&self) -> Result<(&DVector<C64>, &DVector<C64>)> {
        self.truth
            .as_ref()
            .map(|(h, x)| (h, x))
            .ok_or(Error::MissingTruth("blind deconvolution signals"))
    }

    /// The design vector `a_j` (column form).
    pub fn design_a(&self, j: usize) -> DVector<C64> {
        self.a.row(j).adjoint()
    }

    /// The design vector `b_j` (column form).
    pub fn design_b(&self, j: usize) -> DVector<C64> {
        self.b.row(j).adjoint()
    }

    /// Copy of the instance with sample `l` appended a second time.
    pub fn with_duplicated_sample(&self, l: usize) -> Result<Self> {
        if l >= self.m {
            return Err(Error::invalid(format!(
                "sample {l} out of range (m = {})",
                self.m
            )));
        }
        let mut a = self.a.clone().insert_row(self.m, C64::new(0.0, 0.0));
        a.set_row(self.m, &self.a.row(l));
        let mut b = self.b.clone().insert_row(self.m, C64::new(0.0, 0.0));
        b.set_row(self.m, &self.b.row(l));
        let mut y = self
            .measurements
            .clone()
            .insert_row(self.m, C64::new(0.0, 0.0));
        y[self.m] = self.measurements[l];
        Self::new(a, b, y, self.truth.clone())
    }
}

/// Draw order: `h*`, then `x*` (each a normalised complex Gaussian), then the
/// rows `a_1, ..., a_m` entry by entry.
pub fn gen_blind_deconv(k: usize, m: usize, seed: RngSeed) -> Result<BlindDeconvInstance> {
    let b = partial_dft(m, k)?;
    let mut rng = seed.rng();
    let h = unit_complex(&mut rng, k);
    let x = unit_complex(&mut rng, k);
    let mut a = DMatrix::from_element(m, k, C64::new(0.0, 0.0));
    for j in 0..m {
        for c in 0..k {
            // stored as a_j^H
            a[(j, c)] = complex_gaussian(&mut rng).conj();
        }
    }
    let bh = &b * &h;
    let ax = &a * &x;
    let y = bh.zip_map(&ax, |u, v| u * v.conj());
    BlindDeconvInstance::new(a, b, y, Some((h, x)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_dft_is_unitary_when_square() {
        let b = partial_dft(4, 4).unwrap();
        let g = b.adjoint() * &b;
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((g[(i, j)] - C64::new(want, 0.0)).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn partial_dft_rejects_bad_shapes() {
        assert!(partial_dft(3, 4).is_err());
        assert!(partial_dft(0, 0).is_err());
        assert!(partial_dft(4, 0).is_err());
    }

    #[test]
    fn partial_dft_row_norms() {
        let (m, k) = (37, 5);
        let b = partial_dft(m, k).unwrap();
        for l in 0..m {
            let norm2 = b.row(l).norm_squared();
            assert!((norm2 - k as f64 / m as f64).abs() < 1e-14);
        }
    }

    #[test]
    fn generators_are_deterministic() {
        let s = RngSeed::new(7, 3);
        let a = gen_phase_retrieval(5, 9, s).unwrap();
        let b = gen_phase_retrieval(5, 9, s).unwrap();
        assert_eq!(a.designs, b.designs);
        assert_eq!(a.measurements, b.measurements);

        let c = gen_matrix_completion_unit(12, 2, 0.4, 0.1, s).unwrap();
        let d = gen_matrix_completion_unit(12, 2, 0.4, 0.1, s).unwrap();
        assert_eq!(c.observed, d.observed);
        assert_eq!(c.mask, d.mask);

        let e = gen_blind_deconv(3, 8, s).unwrap();
        let f = gen_blind_deconv(3, 8, s).unwrap();
        assert_eq!(e.a, f.a);
        assert_eq!(e.measurements, f.measurements);

        let other = gen_phase_retrieval(5, 9, RngSeed::new(7, 4)).unwrap();
        assert_ne!(a.designs, other.designs);
    }

    #[test]
    fn mc_full_sampling_noiseless_observes_truth() {
        let inst = gen_matrix_completion_unit(15, 3, 1.0, 0.0, RngSeed::new(1, 0)).unwrap();
        assert_eq!(inst.mask.len(), 15 * 15);
        let m = inst.truth_matrix().unwrap();
        assert_eq!(&inst.observed, m);
    }

    #[test]
    fn mc_mask_is_symmetric() {
        let inst = gen_matrix_completion_unit(30, 2, 0.2, 0.5, RngSeed::new(2, 1)).unwrap();
        let dense = inst.mask.to_dense();
        assert_eq!(dense, dense.transpose());
        assert_eq!(inst.observed, inst.observed.transpose());
        for j in 0..30 {
            for k in 0..30 {
                if !inst.mask.contains(j, k) {
                    assert_eq!(inst.observed[(j, k)], 0.0);
                }
            }
        }
    }

    #[test]
    fn mc_rejects_bad_parameters() {
        let s = RngSeed::new(0, 0);
        assert!(gen_matrix_completion_unit(10, 2, 0.0, 0.0, s).is_err());
        assert!(gen_matrix_completion_unit(10, 2, 1.5, 0.0, s).is_err());
        assert!(gen_matrix_completion_unit(10, 2, 0.5, -1.0, s).is_err());
        assert!(gen_matrix_completion_unit(3, 4, 0.5, 0.0, s).is_err());
        assert!(gen_matrix_completion(10, 2, 0.5, 0.0, &[1.0], s).is_err());
    }

    #[test]
    fn mc_spectrum_is_respected() {
        let inst =
            gen_matrix_completion(20, 3, 1.0, 0.0, &[4.0, 2.0, 1.0], RngSeed::new(3, 0)).unwrap();
        let m = inst.truth_matrix().unwrap();
        let mut eig: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
        eig.sort_by(|a, b| b.total_cmp(a));
        for (got, want) in eig.iter().zip([4.0, 2.0, 1.0, 0.0]) {
            assert!((got - want).abs() < 1e-10, "{got} vs {want}");
        }
        assert_eq!(inst.condition_number(), Some(4.0));
    }

    #[test]
    fn bd_truth_has_unit_norm() {
        let inst = gen_blind_deconv(6, 24, RngSeed::new(4, 2)).unwrap();
        let (h, x) = inst.truth().unwrap();
        assert!((h.norm() - 1.0).abs() < 1e-14);
        assert!((x.norm() - 1.0).abs() < 1e-14);
        assert!(gen_blind_deconv(5, 4, RngSeed::new(0, 0)).is_err());
    }

    #[test]
    fn duplicated_sample_appends_copy() {
        let inst = gen_phase_retrieval(3, 4, RngSeed::new(5, 0)).unwrap();
        let dup = inst.with_duplicated_sample(1).unwrap();
        assert_eq!(dup.m, 5);
        assert_eq!(dup.designs.row(4), inst.designs.row(1));
        assert_eq!(dup.measurements[4], inst.measurements[1]);
        assert!(inst.with_duplicated_sample(4).is_err());
    }
}
