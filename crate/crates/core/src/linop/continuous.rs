//! The operator restricted to its continuous spectral subspace.
//!
//! A field in `range P_c` is stored through its mode coefficients: with
//! continuum eigenpairs `(a_k, w_k, s_k = sqrt(nu_k))` the vectors
//! `(a_k, +-s_k w_k)` (sum/difference variables) have eigenvalues `+-s_k`,
//! and the coefficients of a field `(A, B)` are
//! `c_k^+- = (w_k . A +- a_k . B / s_k) / 2`. The evolution `e^{-itH}`
//! multiplies them by `e^{-+i s_k t}`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::modes::ModeBasis;
use crate::error::{Error, Result};
use crate::grid::{Grid, VecField, C64};

/// Mode coefficients of a field in `range P_c`.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeCoefficients {
    pub plus: Vec<C64>,
    pub minus: Vec<C64>,
}

impl ModeCoefficients {
    pub fn zeros(n: usize) -> Self {
        Self { plus: vec![C64::default(); n], minus: vec![C64::default(); n] }
    }

    pub fn len(&self) -> usize {
        self.plus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.plus.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct ContinuousSpectrum {
    basis: Arc<ModeBasis>,
}

/// `M^T v` for a real matrix and a complex vector.
fn mul_t(m: &DMatrix<f64>, v: &[C64]) -> Vec<C64> {
    let re = DVector::from_iterator(v.len(), v.iter().map(|z| z.re));
    let im = DVector::from_iterator(v.len(), v.iter().map(|z| z.im));
    let (r, i) = (m.tr_mul(&re), m.tr_mul(&im));
    r.iter().zip(i.iter()).map(|(&a, &b)| C64::new(a, b)).collect()
}

/// `M v` for a real matrix and a complex vector.
fn mul(m: &DMatrix<f64>, v: &[C64]) -> Vec<C64> {
    let re = DVector::from_iterator(v.len(), v.iter().map(|z| z.re));
    let im = DVector::from_iterator(v.len(), v.iter().map(|z| z.im));
    let (r, i) = (m * re, m * im);
    r.iter().zip(i.iter()).map(|(&a, &b)| C64::new(a, b)).collect()
}

impl ContinuousSpectrum {
    pub fn compute(omega: f64, p: f64, grid: &Grid) -> Result<Self> {
        Ok(Self { basis: Arc::new(ModeBasis::compute(omega, p, grid)?) })
    }

    pub fn from_basis(basis: Arc<ModeBasis>) -> Self {
        Self { basis }
    }

    pub fn basis(&self) -> &ModeBasis {
        &self.basis
    }

    pub fn grid(&self) -> &Grid {
        self.basis.sector().grid()
    }

    pub fn omega(&self) -> f64 {
        self.basis.omega()
    }

    pub fn mode_count(&self) -> usize {
        self.basis.continuum_parts().2.len()
    }

    /// Frequencies `s_k > 0`; mode `k` of the `+` family has eigenvalue `s_k`.
    pub fn frequencies(&self) -> &DVector<f64> {
        self.basis.continuum_parts().2
    }

    fn check_grid(&self, f: &VecField) -> Result<()> {
        if f.grid() != self.grid() {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    /// Sum/difference variables of a field in reduced coordinates.
    pub fn reduce(&self, f: &VecField) -> (Vec<C64>, Vec<C64>) {
        let sector = self.basis.sector();
        let s: Vec<C64> = f.a().iter().zip(f.b()).map(|(u, v)| u + v).collect();
        let d: Vec<C64> = f.a().iter().zip(f.b()).map(|(u, v)| u - v).collect();
        (sector.gather(&s), sector.gather(&d))
    }

    pub fn expand(&self, sum: &[C64], diff: &[C64]) -> VecField {
        let sector = self.basis.sector();
        let s = sector.scatter(sum);
        let d = sector.scatter(diff);
        let a = s.iter().zip(&d).map(|(x, y)| 0.5 * (x + y)).collect();
        let b = s.iter().zip(&d).map(|(x, y)| 0.5 * (x - y)).collect();
        VecField::new(self.grid(), a, b).expect("sector preserves length")
    }

    /// Coefficients from reduced sum/difference variables.
    pub fn coefficients_reduced(&self, sum: &[C64], diff: &[C64]) -> ModeCoefficients {
        let (ca, cw, freq) = self.basis.continuum_parts();
        let alpha = mul_t(cw, sum);
        let beta = mul_t(ca, diff);
        let mut out = ModeCoefficients::zeros(alpha.len());
        for k in 0..alpha.len() {
            let b = beta[k] / freq[k];
            out.plus[k] = 0.5 * (alpha[k] + b);
            out.minus[k] = 0.5 * (alpha[k] - b);
        }
        out
    }

    pub fn coefficients(&self, f: &VecField) -> Result<ModeCoefficients> {
        self.check_grid(f)?;
        let (s, d) = self.reduce(f);
        Ok(self.coefficients_reduced(&s, &d))
    }

    /// Reduced sum/difference variables of `sum_k c_k^+ e_k^+ + c_k^- e_k^-`.
    pub fn synthesize_reduced(&self, c: &ModeCoefficients) -> (Vec<C64>, Vec<C64>) {
        let (ca, cw, freq) = self.basis.continuum_parts();
        let s: Vec<C64> = c.plus.iter().zip(&c.minus).map(|(p, m)| p + m).collect();
        let d: Vec<C64> = c
            .plus
            .iter()
            .zip(&c.minus)
            .zip(freq.iter())
            .map(|((p, m), &f)| (p - m) * f)
            .collect();
        (mul(ca, &s), mul(cw, &d))
    }

    pub fn synthesize(&self, c: &ModeCoefficients) -> VecField {
        let (s, d) = self.synthesize_reduced(c);
        self.expand(&s, &d)
    }

    /// `P_c f` realized through the continuum modes.
    pub fn project_c(&self, f: &VecField) -> Result<VecField> {
        Ok(self.synthesize(&self.coefficients(f)?))
    }

    /// Splits `P_c f` into its positive and negative frequency parts.
    pub fn project_pm(&self, f: &VecField) -> Result<(VecField, VecField)> {
        let c = self.coefficients(f)?;
        let n = c.len();
        let plus = ModeCoefficients { plus: c.plus.clone(), minus: vec![C64::default(); n] };
        let fp = self.synthesize(&plus);
        let fm = &self.synthesize(&c) - &fp;
        Ok((fp, fm))
    }

    /// `e^{-itH} P_c f`.
    pub fn semigroup(&self, t: f64, f: &VecField) -> Result<VecField> {
        if !t.is_finite() {
            return Err(Error::InvalidParameter(format!("time {t} is not finite")));
        }
        let mut c = self.coefficients(f)?;
        self.propagate(&mut c, t);
        Ok(self.synthesize(&c))
    }

    /// Applies `e^{-itH}` to mode coefficients in place.
    pub fn propagate(&self, c: &mut ModeCoefficients, t: f64) {
        for (k, &s) in self.frequencies().iter().enumerate() {
            let ph = C64::from_polar(1.0, -s * t);
            c.plus[k] *= ph;
            c.minus[k] *= ph.conj();
        }
    }

    /// Reduced sum/difference variables of many coefficient sets, one per column.
    pub(crate) fn batch_synthesize(&self, plus: &DMatrix<C64>, minus: &DMatrix<C64>) -> (DMatrix<C64>, DMatrix<C64>) {
        let (ca, cw, freq) = self.basis.continuum_parts();
        let s = plus + minus;
        let mut d = plus - minus;
        for (k, mut row) in d.row_iter_mut().enumerate() {
            row *= C64::new(freq[k], 0.0);
        }
        (real_times(ca, &s, false), real_times(cw, &d, false))
    }

    /// Mode coefficients `(plus, minus)` of many reduced fields, one per column.
    pub(crate) fn batch_coefficients(&self, sum: &DMatrix<C64>, diff: &DMatrix<C64>) -> (DMatrix<C64>, DMatrix<C64>) {
        let (ca, cw, freq) = self.basis.continuum_parts();
        let alpha = real_times(cw, sum, true);
        let mut beta = real_times(ca, diff, true);
        for (k, mut row) in beta.row_iter_mut().enumerate() {
            row /= C64::new(freq[k], 0.0);
        }
        ((&alpha + &beta) * C64::new(0.5, 0.0), (&alpha - &beta) * C64::new(0.5, 0.0))
    }

    /// Mode coefficients of many fields, one per column.
    pub(crate) fn coefficients_many(&self, fields: &[VecField]) -> Result<(DMatrix<C64>, DMatrix<C64>)> {
        let dim = self.basis.sector().dim();
        let mut sum = DMatrix::zeros(dim, fields.len());
        let mut diff = DMatrix::zeros(dim, fields.len());
        for (j, f) in fields.iter().enumerate() {
            if f.grid() != self.grid() {
                return Err(Error::GridMismatch);
            }
            let (s, d) = self.reduce(f);
            sum.column_mut(j).copy_from_slice(&s);
            diff.column_mut(j).copy_from_slice(&d);
        }
        Ok(self.batch_coefficients(&sum, &diff))
    }

    pub(crate) fn synthesize_many(&self, plus: &DMatrix<C64>, minus: &DMatrix<C64>) -> Vec<VecField> {
        let (s, d) = self.batch_synthesize(plus, minus);
        (0..s.ncols()).map(|j| self.expand(s.column(j).as_slice(), d.column(j).as_slice())).collect()
    }
}

/// `M X` or `M^T X` for real `M` and complex `X`, as two real products.
fn real_times(m: &DMatrix<f64>, x: &DMatrix<C64>, transpose: bool) -> DMatrix<C64> {
    let re = x.map(|z| z.re);
    let im = x.map(|z| z.im);
    let (r, i) = if transpose { (m.tr_mul(&re), m.tr_mul(&im)) } else { (m * re, m * im) };
    r.zip_map(&i, C64::new)
}

/// `(A, B) = (int_0^1 e^{ws}(1-s) ds, int_0^1 e^{ws} s ds)`.
pub(crate) fn interval_weights(w: C64) -> (C64, C64) {
    if w.norm() < 0.1 {
        let (mut e0, mut b) = (C64::default(), C64::default());
        let mut term = C64::new(1.0, 0.0);
        for n in 0..12 {
            e0 += term / (n + 1) as f64;
            b += term / (n + 2) as f64;
            term = term * w / (n + 1) as f64;
        }
        (e0 - b, b)
    } else {
        let ew = w.exp();
        let e0 = (ew - 1.0) / w;
        let b = (ew * (w - 1.0) + 1.0) / (w * w);
        (e0 - b, b)
    }
}
