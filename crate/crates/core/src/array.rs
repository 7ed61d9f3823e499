//! Uniform linear array models: frequency-dependent response vectors,
//! element radiation pattern, mutual coupling and radiation-pattern synthesis.
//!
//! Angles are measured from the array axis. The array spacing is expressed
//! in wavelengths at the reference frequency `f0`; at subcarrier frequency
//! `f_k` the electrical spacing scales by `f_k / f0`, which is what produces
//! beam squint across an OFDM band.
//!
//! Phase shifters are modelled as frequency-flat. A real phase shifter adds a
//! common group-delay term `exp(-j2πτ(f_k - f0))` to every element; because it
//! is identical on all elements it does not move the beam and is omitted.

use std::io::Write;

use crate::error::{Error, Result};
use crate::scalar::{cis, real, CMatrix, CVector, Real, C};

/// Number of points in the default angle grid over `[0, π)`.
pub const DEFAULT_ANGLE_GRID: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrayGeometry<T> {
    num_elements: usize,
    spacing: T,
    reference_frequency_hz: T,
}

impl<T: Real> ArrayGeometry<T> {
    pub fn new(num_elements: usize, spacing: T, reference_frequency_hz: T) -> Result<Self> {
        let mut issues = Vec::new();
        if num_elements == 0 {
            issues.push("array needs at least one element".to_string());
        }
        if !(spacing > T::zero()) {
            issues.push(format!("element spacing must be positive, got {spacing}"));
        }
        if !(reference_frequency_hz > T::zero()) {
            issues.push(format!(
                "reference frequency must be positive, got {reference_frequency_hz}"
            ));
        }
        if !issues.is_empty() {
            return Err(Error::Config(issues));
        }
        Ok(Self {
            num_elements,
            spacing,
            reference_frequency_hz,
        })
    }

    /// Half-wavelength ULA referenced to `f0`.
    pub fn half_wavelength(num_elements: usize, reference_frequency_hz: T) -> Result<Self> {
        Self::new(num_elements, T::lit(0.5), reference_frequency_hz)
    }

    pub fn num_elements(&self) -> usize {
        self.num_elements
    }

    pub fn spacing(&self) -> T {
        self.spacing
    }

    pub fn reference_frequency_hz(&self) -> T {
        self.reference_frequency_hz
    }

    /// Electrical phase step `2πd(f/f0)` between adjacent elements for a
    /// wave along the array axis.
    fn phase_step(&self, f_hz: T) -> T {
        T::two_pi() * self.spacing * f_hz / self.reference_frequency_hz
    }
}

/// OFDM subcarrier layout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyGrid<T> {
    center_frequency_hz: T,
    subcarrier_spacing_hz: T,
    num_subcarriers: usize,
}

impl<T: Real> FrequencyGrid<T> {
    pub fn new(center_frequency_hz: T, subcarrier_spacing_hz: T, num_subcarriers: usize) -> Result<Self> {
        let mut issues = Vec::new();
        if num_subcarriers == 0 {
            issues.push("number of subcarriers must be at least 1".to_string());
        }
        if !(subcarrier_spacing_hz > T::zero()) {
            issues.push(format!(
                "subcarrier spacing must be positive, got {subcarrier_spacing_hz}"
            ));
        }
        let grid = Self {
            center_frequency_hz,
            subcarrier_spacing_hz,
            num_subcarriers,
        };
        if issues.is_empty() && !(grid.frequency_unchecked(1) > T::zero()) {
            issues.push("lowest subcarrier frequency must be positive".to_string());
        }
        if !issues.is_empty() {
            return Err(Error::Config(issues));
        }
        Ok(grid)
    }

    pub fn num_subcarriers(&self) -> usize {
        self.num_subcarriers
    }

    pub fn center_frequency_hz(&self) -> T {
        self.center_frequency_hz
    }

    pub fn subcarrier_spacing_hz(&self) -> T {
        self.subcarrier_spacing_hz
    }

    fn frequency_unchecked(&self, k: usize) -> T {
        let offset = T::lit(k as f64 - 1.0 - (self.num_subcarriers / 2) as f64);
        self.center_frequency_hz + offset * self.subcarrier_spacing_hz
    }

    /// Frequency of subcarrier `k` (1-based): `f_c + (k - 1 - K/2)·Δf`, so
    /// index `K/2 + 1` sits exactly on the carrier.
    pub fn subcarrier_frequency(&self, k: usize) -> Result<T> {
        if k == 0 || k > self.num_subcarriers {
            return Err(Error::index("subcarrier", k, 1, self.num_subcarriers));
        }
        Ok(self.frequency_unchecked(k))
    }

    /// Frequencies of all subcarriers in index order.
    pub fn frequencies(&self) -> Vec<T> {
        (1..=self.num_subcarriers)
            .map(|k| self.frequency_unchecked(k))
            .collect()
    }

    /// Frequencies of a subset of (1-based) subcarrier indices.
    pub fn frequencies_of(&self, indices: &[usize]) -> Result<Vec<T>> {
        indices.iter().map(|&k| self.subcarrier_frequency(k)).collect()
    }
}

/// Half-space element pattern: `scale·sin θ` over `[0, π]`, a small constant
/// leakage behind the ground plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementPattern<T> {
    front_gain_scale: T,
    back_leakage: T,
}

impl<T: Real> Default for ElementPattern<T> {
    fn default() -> Self {
        Self {
            front_gain_scale: T::lit(2.0),
            back_leakage: T::lit(1e-2),
        }
    }
}

impl<T: Real> ElementPattern<T> {
    pub fn new(front_gain_scale: T, back_leakage: T) -> Result<Self> {
        if !(front_gain_scale > T::zero()) {
            return Err(Error::config("element front gain scale must be positive"));
        }
        if !(back_leakage > T::zero() && back_leakage < front_gain_scale) {
            return Err(Error::config(
                "element back leakage must lie strictly between 0 and the front gain scale",
            ));
        }
        Ok(Self {
            front_gain_scale,
            back_leakage,
        })
    }

    pub fn front_gain_scale(&self) -> T {
        self.front_gain_scale
    }

    pub fn back_leakage(&self) -> T {
        self.back_leakage
    }

    /// Field gain `F(θ)`, after reducing `θ` into `[0, 2π)`.
    pub fn gain(&self, theta: T) -> T {
        let theta = normalize_angle(theta);
        if theta <= T::pi() {
            self.front_gain_scale * theta.sin()
        } else {
            self.back_leakage
        }
    }
}

/// Reduces an angle into `[0, 2π)`.
pub fn normalize_angle<T: Real>(theta: T) -> T {
    let two_pi = T::two_pi();
    let r = theta % two_pi;
    let r = if r < T::zero() { r + two_pi } else { r };
    if r >= two_pi {
        T::zero()
    } else {
        r
    }
}

/// Adjacent-element coupling amplitude `c` for the S-parameter model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingModel<T> {
    amplitude: C<T>,
}

impl<T: Real> CouplingModel<T> {
    pub fn new(amplitude: C<T>) -> Result<Self> {
        if !(amplitude.norm_sqr() < T::one()) {
            return Err(Error::config("coupling amplitude magnitude must be below 1"));
        }
        Ok(Self { amplitude })
    }

    /// Real-positive amplitude from a level in dB (`-20` dB → `0.1`).
    pub fn from_db(level_db: T) -> Result<Self> {
        Self::new(real(T::lit(10.0).powf(level_db / T::lit(20.0))))
    }

    /// No coupling.
    pub fn none() -> Self {
        Self {
            amplitude: C::new(T::zero(), T::zero()),
        }
    }

    pub fn amplitude(&self) -> C<T> {
        self.amplitude
    }

    pub fn is_none(&self) -> bool {
        self.amplitude.norm_sqr() == T::zero()
    }
}

/// Unit-magnitude steering phases `exp(j2πd(f/f0)[m - (M+1)/2]cos θ)`.
pub fn steering_phases<T: Real>(geom: &ArrayGeometry<T>, f_hz: T, theta: T) -> CVector<T> {
    let m = geom.num_elements;
    let step = geom.phase_step(f_hz) * theta.cos();
    let center = T::lit((m as f64 + 1.0) / 2.0);
    CVector::from_iterator(
        m,
        (1..=m).map(|i| cis(step * (T::lit(i as f64) - center))),
    )
}

/// Array response `a(k, θ)`: element gain times steering phases.
pub fn array_response<T: Real>(
    geom: &ArrayGeometry<T>,
    pattern: &ElementPattern<T>,
    f_hz: T,
    theta: T,
) -> CVector<T> {
    steering_phases(geom, f_hz, theta) * real(pattern.gain(theta))
}

/// S-parameter coupling matrix at frequency `f_hz`.
///
/// Zero diagonal; `c·exp(-j2πd(f/f0)|m-m'|)/|m-m'|` elsewhere.
pub fn coupling_matrix<T: Real>(geom: &ArrayGeometry<T>, model: &CouplingModel<T>, f_hz: T) -> CMatrix<T> {
    let m = geom.num_elements;
    let step = geom.phase_step(f_hz);
    let c = model.amplitude;
    CMatrix::from_fn(m, m, |i, j| {
        if i == j {
            C::new(T::zero(), T::zero())
        } else {
            let dist = T::lit(i.abs_diff(j) as f64);
            c * cis(-step * dist) / real(dist)
        }
    })
}

/// `I + S` at frequency `f_hz`.
pub fn coupled_identity<T: Real>(geom: &ArrayGeometry<T>, model: &CouplingModel<T>, f_hz: T) -> CMatrix<T> {
    let mut s = coupling_matrix(geom, model, f_hz);
    for i in 0..geom.num_elements {
        s[(i, i)] += C::new(T::one(), T::zero());
    }
    s
}

/// Field pattern `Ψ(k, θ) = a^H(k, θ)(I + S)p` over an angle grid.
///
/// `coupling = None` means `S = 0`.
pub fn radiation_pattern<T: Real>(
    geom: &ArrayGeometry<T>,
    pattern: &ElementPattern<T>,
    coupling: Option<&CMatrix<T>>,
    p: &CVector<T>,
    f_hz: T,
    thetas: &[T],
) -> Result<Vec<C<T>>> {
    let m = geom.num_elements;
    if p.len() != m {
        return Err(Error::Shape(format!(
            "beamformer has {} coefficients, array has {m} elements",
            p.len()
        )));
    }
    if thetas.is_empty() {
        return Err(Error::Shape("empty angle grid".into()));
    }
    let q = match coupling {
        Some(s) => {
            if s.shape() != (m, m) {
                return Err(Error::Shape(format!(
                    "coupling matrix is {:?}, expected {m}x{m}",
                    s.shape()
                )));
            }
            p + s * p
        }
        None => p.clone(),
    };
    Ok(thetas
        .iter()
        .map(|&t| array_response(geom, pattern, f_hz, t).dotc(&q))
        .collect())
}

/// Array factor `Σ exp(-jφ_m(θ)) p_m` with isotropic elements and no coupling.
pub fn array_factor<T: Real>(geom: &ArrayGeometry<T>, p: &CVector<T>, f_hz: T, thetas: &[T]) -> Result<Vec<C<T>>> {
    if p.len() != geom.num_elements {
        return Err(Error::Shape(format!(
            "beamformer has {} coefficients, array has {} elements",
            p.len(),
            geom.num_elements
        )));
    }
    Ok(thetas
        .iter()
        .map(|&t| steering_phases(geom, f_hz, t).dotc(p))
        .collect())
}

/// `n` uniformly spaced angles over `[0, π)`.
pub fn angle_grid<T: Real>(n: usize) -> Vec<T> {
    let step = T::pi() / T::lit(n as f64);
    (0..n).map(|i| T::lit(i as f64) * step).collect()
}

/// Power in dB, `10·log10(|Ψ|²)`; the raw (un-normalized) pattern is exported.
pub fn power_db<T: Real>(psi: C<T>) -> T {
    T::lit(10.0) * psi.norm_sqr().log10()
}

/// Writes `theta_rad,f_k_hz,power_dbi` rows for one pattern cut.
pub fn write_pattern_csv<T: Real, W: Write>(out: W, f_hz: T, thetas: &[T], values: &[C<T>]) -> Result<()> {
    if thetas.len() != values.len() {
        return Err(Error::Shape("angle grid and pattern lengths differ".into()));
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["theta_rad", "f_k_hz", "power_dbi"])?;
    for (&t, &v) in thetas.iter().zip(values) {
        w.write_record([
            t.as_f64().to_string(),
            f_hz.as_f64().to_string(),
            power_db(v).as_f64().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn table2_grid() -> FrequencyGrid<f64> {
        FrequencyGrid::new(58.32e9, 5156.25e3, 512).unwrap()
    }

    #[test]
    fn subcarrier_map() {
        let g = table2_grid();
        assert_relative_eq!(g.subcarrier_frequency(257).unwrap(), 58.32e9);
        assert_relative_eq!(g.subcarrier_frequency(1).unwrap(), 57.0e9, max_relative = 1e-12);
        assert_relative_eq!(
            g.subcarrier_frequency(512).unwrap(),
            58.32e9 + 255.0 * 5156.25e3,
            max_relative = 1e-12
        );
        assert!((g.subcarrier_frequency(512).unwrap() - 59.635e9).abs() < 1e6);
        assert!(g.subcarrier_frequency(0).is_err());
        assert!(g.subcarrier_frequency(513).is_err());
        let f = g.frequencies();
        assert!(f.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn element_gain_branches() {
        let p = ElementPattern::<f64>::default();
        assert_relative_eq!(p.gain(PI / 2.0), 2.0);
        assert_relative_eq!(p.gain(3.0 * PI / 2.0), 0.01);
        assert_relative_eq!(p.gain(PI / 6.0), 1.0, max_relative = 1e-12);
        // -π/2 normalizes to 3π/2
        assert_relative_eq!(p.gain(-PI / 2.0), 0.01);
        assert_relative_eq!(p.gain(2.0 * PI + PI / 2.0), 2.0, max_relative = 1e-12);
    }

    #[test]
    fn element_pattern_validation() {
        assert!(ElementPattern::new(2.0, 0.0).is_err());
        assert!(ElementPattern::new(2.0, 3.0).is_err());
        assert!(ElementPattern::new(-1.0, 0.01).is_err());
    }

    #[test]
    fn response_broadside_and_endfire() {
        let pat = ElementPattern::<f64>::default();
        let g2 = ArrayGeometry::new(2, 0.5, 60e9).unwrap();
        let a = array_response(&g2, &pat, 60e9, PI / 2.0);
        for c in a.iter() {
            assert_relative_eq!(c.re, 2.0, epsilon = 1e-12);
            assert!(c.im.abs() < 1e-12);
        }

        let g3 = ArrayGeometry::new(3, 0.5, 60e9).unwrap();
        let a = array_response(&g3, &pat, 60e9, 0.0);
        for (i, c) in a.iter().enumerate() {
            // theta = 0 sits at the edge of the front half-space: F(0) = 0
            assert!(c.norm() < 1e-12, "element {i}");
        }
        let ph = steering_phases(&g3, 60e9, 0.0);
        for (i, c) in ph.iter().enumerate() {
            let expect = cis(PI * (i as f64 - 1.0));
            assert_relative_eq!(c.re, expect.re, epsilon = 1e-12);
            assert_relative_eq!(c.im, expect.im, epsilon = 1e-12);
        }
        // behind the array the leakage branch applies
        let a = array_response(&g3, &pat, 60e9, PI + 0.1);
        for c in a.iter() {
            assert_relative_eq!(c.norm(), 0.01, epsilon = 1e-12);
        }
    }

    #[test]
    fn squinted_phase_slope() {
        let pat = ElementPattern::<f64>::default();
        let g = ArrayGeometry::new(16, 0.5, 60e9).unwrap();
        let a = array_response(&g, &pat, 1.02 * 60e9, PI / 3.0);
        let slope = (a[1] * a[0].conj()).arg();
        assert_relative_eq!(slope, 0.51 * PI, epsilon = 1e-12);
        let mag = pat.gain(PI / 3.0);
        for c in a.iter() {
            assert_relative_eq!(c.norm(), mag, epsilon = 1e-12);
        }
    }

    #[test]
    fn coupling_structure() {
        let g = ArrayGeometry::new(8, 0.5, 60e9).unwrap();
        let model = CouplingModel::from_db(-20.0).unwrap();
        assert_relative_eq!(model.amplitude().re, 0.1, epsilon = 1e-15);
        let s = coupling_matrix(&g, &model, 58e9);
        for i in 0..8 {
            assert_eq!(s[(i, i)], C::new(0.0, 0.0));
            for j in 0..8 {
                if i != j {
                    let d = i.abs_diff(j) as f64;
                    assert_relative_eq!(s[(i, j)].norm() * d, 0.1, epsilon = 1e-14);
                    assert_relative_eq!(s[(i, j)].re, s[(j, i)].re, epsilon = 1e-15);
                }
            }
        }
        assert!(CouplingModel::new(C::new(1.0, 0.0)).is_err());
    }

    #[test]
    fn pattern_shape_errors() {
        let g = ArrayGeometry::new(4, 0.5, 60e9).unwrap();
        let pat = ElementPattern::default();
        let p = CVector::<f64>::from_element(3, C::new(1.0, 0.0));
        assert!(radiation_pattern(&g, &pat, None, &p, 60e9, &[0.1]).is_err());
        let p = CVector::<f64>::from_element(4, C::new(0.5, 0.0));
        assert!(radiation_pattern(&g, &pat, None, &p, 60e9, &[]).is_err());
        let s = CMatrix::<f64>::zeros(3, 3);
        assert!(radiation_pattern(&g, &pat, Some(&s), &p, 60e9, &[0.1]).is_err());
    }

    #[test]
    fn pattern_csv_columns() {
        let mut buf = Vec::new();
        let thetas = [0.5, 1.0];
        let vals = [C::new(1.0, 0.0), C::new(0.0, 10.0)];
        write_pattern_csv(&mut buf, 60e9, &thetas, &vals).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "theta_rad,f_k_hz,power_dbi");
        assert_eq!(lines.len(), 3);
        assert!(lines[2].ends_with(",20"));
    }
}
