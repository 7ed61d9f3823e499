//! Orthogonal ULA beamformers and the four hierarchical codebooks built on
//! them: AP sector matrices, AP narrow matrices, STA subarray sector beams and
//! STA full-array narrow beams.
//!
//! All codebook indices are 1-based, matching the `(m, n)` labelling used when
//! describing the hierarchy. Enumeration order is ascending `m`, then `n`.

use std::io::Write;

use crate::error::{Error, Result};
use crate::scalar::{cis, real, CMatrix, CVector, Real, C};

/// Power normalization a codeword satisfies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormClass {
    /// `‖b‖₂ = 1`.
    Unit,
    /// One AP RF-chain column: `‖p‖₂² = 1/N_rf`.
    InvSqrtNrfColumn,
    /// Subarray beam behind the switching network: `‖g‖₂² = M_sub/M_ue`.
    SubarrayScaled,
}

/// Phase-shifter settings for one array; frequency independent.
#[derive(Debug, Clone, PartialEq)]
pub struct Beamformer<T: Real> {
    coefficients: CVector<T>,
    norm_class: NormClass,
}

impl<T: Real> Beamformer<T> {
    pub fn new(coefficients: CVector<T>, norm_class: NormClass) -> Self {
        Self {
            coefficients,
            norm_class,
        }
    }

    pub fn coefficients(&self) -> &CVector<T> {
        &self.coefficients
    }

    pub fn into_coefficients(self) -> CVector<T> {
        self.coefficients
    }

    pub fn norm_class(&self) -> NormClass {
        self.norm_class
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }
}

/// Inter-element phase `β_m(M) = π(1 - 2(m-1)/M)`.
pub fn beam_phase<T: Real>(size: usize, m: usize) -> T {
    T::pi() * (T::one() - T::lit(2.0 * (m as f64 - 1.0) / size as f64))
}

/// `b_m(M) = M^{-1/2}[1, e^{jβ}, …, e^{j(M-1)β}]`.
pub fn orthogonal_beamformer<T: Real>(size: usize, m: usize) -> Result<Beamformer<T>> {
    if size == 0 || m == 0 || m > size {
        return Err(Error::index("orthogonal beam", m, 1, size));
    }
    Ok(Beamformer::new(orthogonal_vector(size, m), NormClass::Unit))
}

fn orthogonal_vector<T: Real>(size: usize, m: usize) -> CVector<T> {
    let beta = beam_phase::<T>(size, m);
    let scale = real(T::one() / T::lit(size as f64).sqrt());
    CVector::from_iterator(size, (0..size).map(|i| cis(beta * T::lit(i as f64)) * scale))
}

/// The orthonormal set `B(M)`.
#[derive(Debug, Clone)]
pub struct OrthogonalSet<T: Real> {
    vectors: Vec<Beamformer<T>>,
    matrix: CMatrix<T>,
}

impl<T: Real> OrthogonalSet<T> {
    pub fn size(&self) -> usize {
        self.vectors.len()
    }

    /// `b_m`, 1-based.
    pub fn get(&self, m: usize) -> Result<&Beamformer<T>> {
        if m == 0 || m > self.vectors.len() {
            return Err(Error::index("orthogonal beam", m, 1, self.vectors.len()));
        }
        Ok(&self.vectors[m - 1])
    }

    pub fn vectors(&self) -> &[Beamformer<T>] {
        &self.vectors
    }

    /// All beams as columns of an `M × M` matrix (column `m-1` is `b_m`).
    pub fn matrix(&self) -> &CMatrix<T> {
        &self.matrix
    }

    pub fn gram(&self) -> CMatrix<T> {
        self.matrix.adjoint() * &self.matrix
    }
}

pub fn build_orthogonal_set<T: Real>(size: usize) -> Result<OrthogonalSet<T>> {
    if size == 0 {
        return Err(Error::config("orthogonal set needs at least one antenna"));
    }
    let vectors: Vec<_> = (1..=size)
        .map(|m| Beamformer::new(orthogonal_vector(size, m), NormClass::Unit))
        .collect();
    let matrix = CMatrix::from_fn(size, size, |i, j| vectors[j].coefficients[i]);
    Ok(OrthogonalSet { vectors, matrix })
}

/// `l_n(m) = (m-1)N_rf + n`.
pub fn ap_sector_index(m: usize, n: usize, n_rf: usize, m_ap: usize) -> Result<usize> {
    if n_rf == 0 || !m_ap.is_multiple_of(n_rf) {
        return Err(Error::config(format!(
            "N_rf = {n_rf} must divide M_ap = {m_ap}"
        )));
    }
    let sectors = m_ap / n_rf;
    if m == 0 || m > sectors {
        return Err(Error::index("AP sector", m, 1, sectors));
    }
    if n == 0 || n > n_rf {
        return Err(Error::index("RF chain", n, 1, n_rf));
    }
    Ok((m - 1) * n_rf + n)
}

fn check_ap_dims(m_ap: usize, n_rf: usize) -> Result<()> {
    if n_rf == 0 || m_ap == 0 || !m_ap.is_multiple_of(n_rf) {
        return Err(Error::config(format!(
            "N_rf = {n_rf} must be positive and divide M_ap = {m_ap}"
        )));
    }
    Ok(())
}

/// Uplink sector matrices `P^(m) = N_rf^{-1/2}[b_{l_1(m)} … b_{l_Nrf(m)}]`.
#[derive(Debug, Clone)]
pub struct ApSectorCodebook<T: Real> {
    m_ap: usize,
    n_rf: usize,
    matrices: Vec<CMatrix<T>>,
}

impl<T: Real> ApSectorCodebook<T> {
    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }

    pub fn n_rf(&self) -> usize {
        self.n_rf
    }

    pub fn m_ap(&self) -> usize {
        self.m_ap
    }

    pub fn get(&self, m: usize) -> Result<&CMatrix<T>> {
        if m == 0 || m > self.matrices.len() {
            return Err(Error::index("AP sector", m, 1, self.matrices.len()));
        }
        Ok(&self.matrices[m - 1])
    }

    pub fn matrices(&self) -> &[CMatrix<T>] {
        &self.matrices
    }

    /// Index in `B(M_ap)` of column `n` of sector `m`.
    pub fn beam_index(&self, m: usize, n: usize) -> Result<usize> {
        ap_sector_index(m, n, self.n_rf, self.m_ap)
    }
}

pub fn build_ap_sector_codebook<T: Real>(m_ap: usize, n_rf: usize) -> Result<ApSectorCodebook<T>> {
    check_ap_dims(m_ap, n_rf)?;
    let scale = real(T::one() / T::lit(n_rf as f64).sqrt());
    let matrices = (1..=m_ap / n_rf)
        .map(|m| {
            let cols: Vec<CVector<T>> = (1..=n_rf)
                .map(|n| orthogonal_vector::<T>(m_ap, (m - 1) * n_rf + n) * scale)
                .collect();
            CMatrix::from_columns(&cols)
        })
        .collect();
    Ok(ApSectorCodebook {
        m_ap,
        n_rf,
        matrices,
    })
}

/// Downlink narrow matrices `P^(m,n)`: the same beam `b_{l_n(m)}` on every chain.
#[derive(Debug, Clone)]
pub struct ApNarrowCodebook<T: Real> {
    m_ap: usize,
    n_rf: usize,
    matrices: Vec<CMatrix<T>>,
}

impl<T: Real> ApNarrowCodebook<T> {
    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }

    pub fn get(&self, m: usize, n: usize) -> Result<&CMatrix<T>> {
        let l = ap_sector_index(m, n, self.n_rf, self.m_ap)?;
        Ok(&self.matrices[l - 1])
    }

    /// `P^(m,n)` addressed directly by its beam index `l` in `B(M_ap)`.
    pub fn by_beam(&self, l: usize) -> Result<&CMatrix<T>> {
        if l == 0 || l > self.matrices.len() {
            return Err(Error::index("AP beam", l, 1, self.matrices.len()));
        }
        Ok(&self.matrices[l - 1])
    }

    pub fn matrices(&self) -> &[CMatrix<T>] {
        &self.matrices
    }

    /// Effective single-array weights radiated in the downlink when every
    /// chain sends the same symbol with equal power: `N_rf^{-1/2} P^(m,n) 1`.
    pub fn downlink_beamformer(&self, m: usize, n: usize) -> Result<CVector<T>> {
        let p = self.get(m, n)?;
        let ones = CVector::from_element(self.n_rf, real(T::one()));
        Ok(p * ones * real(T::one() / T::lit(self.n_rf as f64).sqrt()))
    }
}

pub fn build_ap_narrow_codebook<T: Real>(m_ap: usize, n_rf: usize) -> Result<ApNarrowCodebook<T>> {
    check_ap_dims(m_ap, n_rf)?;
    let matrices = (1..=m_ap)
        .map(|l| narrow_matrix(&orthogonal_vector::<T>(m_ap, l), n_rf))
        .collect();
    Ok(ApNarrowCodebook {
        m_ap,
        n_rf,
        matrices,
    })
}

/// `N_rf^{-1/2}[p … p]`.
pub fn narrow_matrix<T: Real>(p: &CVector<T>, n_rf: usize) -> CMatrix<T> {
    let scale = real(T::one() / T::lit(n_rf as f64).sqrt());
    let col = p * scale;
    CMatrix::from_fn(p.len(), n_rf, |i, _| col[i])
}

fn check_sta_dims(m_ue: usize, m_sub: usize) -> Result<usize> {
    if m_sub == 0 || m_sub > m_ue || !m_ue.is_multiple_of(m_sub) || !(m_ue / m_sub).is_multiple_of(2) {
        return Err(Error::config(format!(
            "M_ue/M_sub must be a positive even integer (M_ue = {m_ue}, M_sub = {m_sub})"
        )));
    }
    Ok(m_ue / m_sub)
}

/// Subarray sector beams `g^(m) = √(M_sub/M_ue)[b_m(M_sub); 0]`.
#[derive(Debug, Clone)]
pub struct StaSectorCodebook<T: Real> {
    m_ue: usize,
    m_sub: usize,
    vectors: Vec<Beamformer<T>>,
}

impl<T: Real> StaSectorCodebook<T> {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn m_ue(&self) -> usize {
        self.m_ue
    }

    pub fn m_sub(&self) -> usize {
        self.m_sub
    }

    pub fn get(&self, m: usize) -> Result<&Beamformer<T>> {
        if m == 0 || m > self.vectors.len() {
            return Err(Error::index("STA sector", m, 1, self.vectors.len()));
        }
        Ok(&self.vectors[m - 1])
    }

    pub fn vectors(&self) -> &[Beamformer<T>] {
        &self.vectors
    }
}

pub fn build_sta_sector_codebook<T: Real>(m_ue: usize, m_sub: usize) -> Result<StaSectorCodebook<T>> {
    check_sta_dims(m_ue, m_sub)?;
    let scale = real((T::lit(m_sub as f64) / T::lit(m_ue as f64)).sqrt());
    let vectors = (1..=m_sub)
        .map(|m| {
            let sub = orthogonal_vector::<T>(m_sub, m);
            let v = CVector::from_fn(m_ue, |i, _| {
                if i < m_sub {
                    sub[i] * scale
                } else {
                    C::new(T::zero(), T::zero())
                }
            });
            Beamformer::new(v, NormClass::SubarrayScaled)
        })
        .collect();
    Ok(StaSectorCodebook {
        m_ue,
        m_sub,
        vectors,
    })
}

/// `[n]_mod M`: ordinary residue, except that a zero residue maps to `M`.
pub fn wrap_index(n: i64, modulus: usize) -> usize {
    let r = n.rem_euclid(modulus as i64) as usize;
    if r == 0 {
        modulus
    } else {
        r
    }
}

/// `l(m,n) = [ (M_ue/M_sub)(m-1) - M_ue/(2M_sub) + n ]_mod M_ue`.
pub fn sta_narrow_index(m: usize, n: usize, m_ue: usize, m_sub: usize) -> Result<usize> {
    let ratio = check_sta_dims(m_ue, m_sub)?;
    if m == 0 || m > m_sub {
        return Err(Error::index("STA sector", m, 1, m_sub));
    }
    if n == 0 || n > ratio + 1 {
        return Err(Error::index("STA narrow beam", n, 1, ratio + 1));
    }
    let raw = (ratio * (m - 1)) as i64 - (ratio / 2) as i64 + n as i64;
    Ok(wrap_index(raw, m_ue))
}

/// Full-array narrow beams overlapping each subarray sector.
#[derive(Debug, Clone)]
pub struct StaNarrowCodebook<T: Real> {
    m_ue: usize,
    m_sub: usize,
    per_sector: usize,
    indices: Vec<usize>,
    vectors: Vec<Beamformer<T>>,
}

impl<T: Real> StaNarrowCodebook<T> {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Number of narrow beams overlapping one sector (`M_ue/M_sub + 1`).
    pub fn beams_per_sector(&self) -> usize {
        self.per_sector
    }

    fn slot(&self, m: usize, n: usize) -> Result<usize> {
        if m == 0 || m > self.m_sub {
            return Err(Error::index("STA sector", m, 1, self.m_sub));
        }
        if n == 0 || n > self.per_sector {
            return Err(Error::index("STA narrow beam", n, 1, self.per_sector));
        }
        Ok((m - 1) * self.per_sector + (n - 1))
    }

    pub fn get(&self, m: usize, n: usize) -> Result<&Beamformer<T>> {
        Ok(&self.vectors[self.slot(m, n)?])
    }

    /// Index `l(m,n)` in `B(M_ue)`.
    pub fn beam_index(&self, m: usize, n: usize) -> Result<usize> {
        Ok(self.indices[self.slot(m, n)?])
    }

    /// `B(M_ue)` indices overlapping sector `m`, in `n` order.
    pub fn sector_indices(&self, m: usize) -> Result<&[usize]> {
        let start = self.slot(m, 1)?;
        Ok(&self.indices[start..start + self.per_sector])
    }

    pub fn vectors(&self) -> &[Beamformer<T>] {
        &self.vectors
    }

    pub fn m_ue(&self) -> usize {
        self.m_ue
    }
}

pub fn build_sta_narrow_codebook<T: Real>(m_ue: usize, m_sub: usize) -> Result<StaNarrowCodebook<T>> {
    let ratio = check_sta_dims(m_ue, m_sub)?;
    let per_sector = ratio + 1;
    let mut indices = Vec::with_capacity(m_sub * per_sector);
    let mut vectors = Vec::with_capacity(m_sub * per_sector);
    for m in 1..=m_sub {
        for n in 1..=per_sector {
            let l = sta_narrow_index(m, n, m_ue, m_sub)?;
            indices.push(l);
            vectors.push(Beamformer::new(orthogonal_vector(m_ue, l), NormClass::Unit));
        }
    }
    Ok(StaNarrowCodebook {
        m_ue,
        m_sub,
        per_sector,
        indices,
        vectors,
    })
}

/// Array and RF-chain sizes the codebooks are built for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArrayDims {
    pub m_ap: usize,
    pub n_rf: usize,
    pub m_ue: usize,
    pub m_sub: usize,
}

/// Every codebook used by one AP/STA configuration.
#[derive(Debug, Clone)]
pub struct CodebookSet<T: Real> {
    pub dims: ArrayDims,
    pub ap_orthogonal: OrthogonalSet<T>,
    pub sta_orthogonal: OrthogonalSet<T>,
    pub ap_sector: ApSectorCodebook<T>,
    pub ap_narrow: ApNarrowCodebook<T>,
    /// Absent when the STA has no switchable subarray.
    pub sta_sector: Option<StaSectorCodebook<T>>,
    pub sta_narrow: Option<StaNarrowCodebook<T>>,
}

impl<T: Real> CodebookSet<T> {
    /// Full hierarchy: hybrid AP and subarray-capable STAs.
    pub fn hierarchical(dims: ArrayDims) -> Result<Self> {
        let mut set = Self::without_subarray(dims)?;
        set.sta_sector = Some(build_sta_sector_codebook(dims.m_ue, dims.m_sub)?);
        set.sta_narrow = Some(build_sta_narrow_codebook(dims.m_ue, dims.m_sub)?);
        Ok(set)
    }

    /// AP codebooks plus `B(M_ue)` only (STAs without subarrays or with a
    /// single antenna).
    pub fn without_subarray(dims: ArrayDims) -> Result<Self> {
        if dims.m_ue == 0 {
            return Err(Error::config("M_ue must be at least 1"));
        }
        Ok(Self {
            dims,
            ap_orthogonal: build_orthogonal_set(dims.m_ap)?,
            sta_orthogonal: build_orthogonal_set(dims.m_ue)?,
            ap_sector: build_ap_sector_codebook(dims.m_ap, dims.n_rf)?,
            ap_narrow: build_ap_narrow_codebook(dims.m_ap, dims.n_rf)?,
            sta_sector: None,
            sta_narrow: None,
        })
    }

    /// Writes every codeword as
    /// `codebook_name,index_m,index_n,element_index,real,imag`.
    ///
    /// Matrices are flattened column-major (`element_index = col·rows + row`);
    /// `index_n` is `0` for sets indexed by `m` alone.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["codebook_name", "index_m", "index_n", "element_index", "real", "imag"])?;
        let mut emit = |name: &str, m: usize, n: usize, data: &[C<T>]| -> Result<()> {
            for (e, c) in data.iter().enumerate() {
                w.write_record([
                    name.to_string(),
                    m.to_string(),
                    n.to_string(),
                    e.to_string(),
                    c.re.as_f64().to_string(),
                    c.im.as_f64().to_string(),
                ])?;
            }
            Ok(())
        };
        for (i, b) in self.ap_orthogonal.vectors().iter().enumerate() {
            emit("orthogonal_ap", i + 1, 0, b.coefficients().as_slice())?;
        }
        for (i, p) in self.ap_sector.matrices().iter().enumerate() {
            emit("ap_sector", i + 1, 0, p.as_slice())?;
        }
        let n_rf = self.dims.n_rf;
        for (i, p) in self.ap_narrow.matrices().iter().enumerate() {
            emit("ap_narrow", i / n_rf + 1, i % n_rf + 1, p.as_slice())?;
        }
        if let Some(gs) = &self.sta_sector {
            for (i, g) in gs.vectors().iter().enumerate() {
                emit("sta_sector", i + 1, 0, g.coefficients().as_slice())?;
            }
        }
        if let Some(gn) = &self.sta_narrow {
            let per = gn.beams_per_sector();
            for (i, g) in gn.vectors().iter().enumerate() {
                emit("sta_narrow", i / per + 1, i % per + 1, g.coefficients().as_slice())?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn beam_phases() {
        assert_relative_eq!(beam_phase::<f64>(8, 1), PI);
        assert_relative_eq!(beam_phase::<f64>(8, 5), 0.0);
        let b = orthogonal_beamformer::<f64>(8, 5).unwrap();
        for c in b.coefficients().iter() {
            assert_relative_eq!(c.re, 8f64.sqrt().recip(), epsilon = 1e-15);
            assert_relative_eq!(c.im, 0.0, epsilon = 1e-15);
        }
        assert!(orthogonal_beamformer::<f64>(8, 0).is_err());
        assert!(orthogonal_beamformer::<f64>(8, 9).is_err());
    }

    #[test]
    fn pairwise_orthogonality() {
        let b3 = orthogonal_beamformer::<f64>(8, 3).unwrap();
        let b5 = orthogonal_beamformer::<f64>(8, 5).unwrap();
        assert!(b3.coefficients().dotc(b5.coefficients()).norm() < 1e-14);
        let one = build_orthogonal_set::<f64>(1).unwrap();
        assert_eq!(one.size(), 1);
        assert_relative_eq!(one.get(1).unwrap().coefficients()[0].re, 1.0);
    }

    #[test]
    fn sector_index_examples() {
        assert_eq!(ap_sector_index(1, 1, 4, 16).unwrap(), 1);
        assert_eq!(ap_sector_index(2, 3, 4, 16).unwrap(), 7);
        assert!(ap_sector_index(5, 1, 4, 16).is_err());
        assert!(ap_sector_index(1, 5, 4, 16).is_err());
        assert!(build_ap_sector_codebook::<f64>(18, 4).is_err());
    }

    #[test]
    fn sta_index_examples() {
        assert_eq!(wrap_index(16, 16), 16);
        assert_eq!(wrap_index(0, 16), 16);
        assert_eq!(wrap_index(-1, 32), 31);
        let l: Vec<_> = (1..=3).map(|n| sta_narrow_index(3, n, 16, 8).unwrap()).collect();
        assert_eq!(l, vec![4, 5, 6]);
        let l: Vec<_> = (1..=3).map(|n| sta_narrow_index(1, n, 16, 8).unwrap()).collect();
        assert_eq!(l, vec![16, 1, 2]);
        assert!(sta_narrow_index(1, 4, 16, 8).is_err());
        assert!(sta_narrow_index(1, 1, 16, 6).is_err());
        assert!(build_sta_sector_codebook::<f64>(24, 8).is_err()); // ratio 3 is odd
    }

    #[test]
    fn sta_sector_zero_padding() {
        let gs = build_sta_sector_codebook::<f64>(32, 8).unwrap();
        assert_eq!(gs.len(), 8);
        for g in gs.vectors() {
            assert!(g.coefficients().iter().skip(8).all(|c| c.re == 0.0 && c.im == 0.0));
            let n2: f64 = g.coefficients().iter().map(|c| c.norm_sqr()).sum();
            assert_relative_eq!(n2, 0.25, epsilon = 1e-14);
        }
    }

    #[test]
    fn narrow_gain_exceeds_sector_chain_gain_by_nrf() {
        let sector = build_ap_sector_codebook::<f64>(16, 4).unwrap();
        let narrow = build_ap_narrow_codebook::<f64>(16, 4).unwrap();
        let b = build_orthogonal_set::<f64>(16).unwrap();
        for m in 1..=4 {
            for n in 1..=4 {
                let l = sector.beam_index(m, n).unwrap();
                // power delivered toward b_l's own direction (matched response)
                let chain = sector.get(m).unwrap().column(n - 1).into_owned();
                let sector_gain = chain.dotc(b.get(l).unwrap().coefficients()).norm_sqr();
                let dl = narrow.downlink_beamformer(m, n).unwrap();
                let narrow_gain = dl.dotc(b.get(l).unwrap().coefficients()).norm_sqr();
                assert_relative_eq!(narrow_gain / sector_gain, 4.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn codebook_csv_counts() {
        let set = CodebookSet::<f64>::hierarchical(ArrayDims {
            m_ap: 16,
            n_rf: 4,
            m_ue: 16,
            m_sub: 8,
        })
        .unwrap();
        let mut buf = Vec::new();
        set.write_csv(&mut buf).unwrap();
        let mut rdr = csv::Reader::from_reader(buf.as_slice());
        let mut words = std::collections::BTreeSet::new();
        for rec in rdr.records() {
            let rec = rec.unwrap();
            words.insert((rec[0].to_string(), rec[1].to_string(), rec[2].to_string()));
        }
        let count = |name: &str| words.iter().filter(|w| w.0 == name).count();
        assert_eq!(count("orthogonal_ap"), 16);
        assert_eq!(count("ap_sector"), 4);
        assert_eq!(count("ap_narrow"), 16);
        assert_eq!(count("sta_sector"), 8);
        assert_eq!(count("sta_narrow"), 24);
    }
}
