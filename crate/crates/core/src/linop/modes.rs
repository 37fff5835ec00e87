//! Dense diagonalization of the linearized operator on even functions.
//!
//! In sum/difference variables `a = u + v`, `b = u - v` the operator acts as
//! `(a, b) -> (L_- b, L_+ a)` with
//! `L_+ = -d_xx + omega - p phi^{p-1}` and `L_- = -d_xx + omega - phi^{p-1}`.
//! Eigenpairs therefore follow from `L_- L_+ a = nu a`, `lambda = +-sqrt(nu)`.
//! Because `L_- >= 0`, the substitution `a = K y` with `K = L_-^{1/2}` turns
//! this into the symmetric problem `K L_+ K y = nu y`, so a standard
//! symmetric eigensolver does all the work. The companion vectors
//! `w = L_+ a / nu` are biorthogonal to the `a`'s: `w_k . a_l = delta_kl`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::even::EvenSector;
use crate::error::{Error, Result};
use crate::grid::{Grid, VecField, C64};
use crate::soliton;

/// `phi_omega^{p-1}` in closed form.
pub(crate) fn potential(omega: f64, p: f64, x: f64) -> f64 {
    let y = soliton::kappa(omega, p) * x;
    let e = (-2.0 * y.abs()).exp();
    let sech2 = 4.0 * e / ((1.0 + e) * (1.0 + e));
    omega * (p + 1.0) / 2.0 * sech2
}

/// Newton refinement of the unstable pair on the unsquared system
/// `L_+ a + mu b = 0`, `L_- b - mu a = 0` (here `b` is the imaginary part of
/// the second sum/difference variable). Working with `L_- L_+` squares the
/// condition number; this restores a residual at the level of `||L||` eps.
fn refine_unstable(
    l_plus: &DMatrix<f64>,
    l_minus: &DMatrix<f64>,
    mut a: DVector<f64>,
    mut b: DVector<f64>,
    mut mu: f64,
) -> (DVector<f64>, DVector<f64>, f64) {
    let m = a.len();
    let (a_ref, b_ref) = (a.clone(), b.clone());
    let target = a_ref.norm_squared() + b_ref.norm_squared();
    for _ in 0..2 {
        let mut jac = DMatrix::zeros(2 * m + 1, 2 * m + 1);
        jac.view_mut((0, 0), (m, m)).copy_from(l_plus);
        jac.view_mut((m, m), (m, m)).copy_from(l_minus);
        for i in 0..m {
            jac[(i, m + i)] = mu;
            jac[(m + i, i)] = -mu;
            jac[(i, 2 * m)] = b[i];
            jac[(m + i, 2 * m)] = -a[i];
            jac[(2 * m, i)] = a_ref[i];
            jac[(2 * m, m + i)] = b_ref[i];
        }
        let mut rhs = DVector::zeros(2 * m + 1);
        let r1 = l_plus * &a + &b * mu;
        let r2 = l_minus * &b - &a * mu;
        rhs.rows_mut(0, m).copy_from(&(-r1));
        rhs.rows_mut(m, m).copy_from(&(-r2));
        rhs[2 * m] = target - a_ref.dot(&a) - b_ref.dot(&b);
        let Some(step) = jac.lu().solve(&rhs) else { break };
        a += step.rows(0, m);
        b += step.rows(m, m);
        mu += step[2 * m];
    }
    (a, b, mu)
}

#[derive(Clone, Debug)]
pub struct ModeBasis {
    omega: f64,
    p: f64,
    sector: EvenSector,
    mu: f64,
    a_unstable: DVector<f64>,
    w_unstable: DVector<f64>,
    null_eigenvalue: f64,
    cont_a: DMatrix<f64>,
    cont_w: DMatrix<f64>,
    cont_freq: DVector<f64>,
}

impl ModeBasis {
    pub fn compute(omega: f64, p: f64, grid: &Grid) -> Result<Self> {
        let sector = EvenSector::new(grid);
        let dim = sector.dim();
        let pot: Vec<f64> = sector.abscissae().iter().map(|&x| potential(omega, p, x)).collect();
        let lap = sector.laplacian();
        let mut l_minus = -&lap;
        let mut l_plus = -lap;
        for m in 0..dim {
            l_minus[(m, m)] += omega - pot[m];
            l_plus[(m, m)] += omega - p * pot[m];
        }
        let l_minus_copy = l_minus.clone();

        let eig = SymmetricEigen::new(l_minus);
        let floor = eig.eigenvalues.min();
        if floor < -1e-8 * omega.max(1.0) {
            return Err(Error::SpectralFailure(format!(
                "L_- has a negative eigenvalue {floor:.3e}; profile not resolved"
            )));
        }
        // The lowest eigenvalue of L_- is zero (eigenvector phi); pinning it
        // makes K annihilate phi exactly instead of up to sqrt(round-off).
        let lowest = eig.eigenvalues.imin();
        let root = DVector::from_iterator(
            dim,
            eig.eigenvalues.iter().enumerate().map(|(i, &v)| if i == lowest { 0.0 } else { v.max(0.0).sqrt() }),
        );
        let q = &eig.eigenvectors;
        let k_mat = q * DMatrix::from_diagonal(&root) * q.transpose();

        let mut s = &k_mat * &l_plus * &k_mat;
        s = (&s + s.transpose()) * 0.5;
        let eig = SymmetricEigen::new(s);
        let nu = eig.eigenvalues;

        let gap = 0.25 * omega * omega;
        let zero_tol = 1e-6 * omega * omega;
        let mut unstable = Vec::new();
        let mut null = Vec::new();
        let mut stray = Vec::new();
        let mut continuum = Vec::new();
        for (i, &v) in nu.iter().enumerate() {
            if v < -zero_tol {
                unstable.push(i);
            } else if v.abs() <= zero_tol {
                null.push(i);
            } else if v < gap {
                stray.push(v);
            } else {
                continuum.push(i);
            }
        }
        if unstable.is_empty() {
            return Err(Error::SpectralFailure(
                "no eigenvalue off the real axis; grid too coarse or p <= 5".into(),
            ));
        }
        if unstable.len() > 1 || null.len() != 1 || !stray.is_empty() {
            return Err(Error::Classification(format!(
                "expected one unstable and one null mode below the gap, found {} unstable, {} null, strays {:?}",
                unstable.len(),
                null.len(),
                stray
            )));
        }

        let y = &eig.eigenvectors;
        let iu = unstable[0];
        let a0 = &k_mat * y.column(iu);
        let mu0 = (-nu[iu]).sqrt();
        let b0 = (&l_plus * &a0) / (-mu0);
        let (a_unstable, b, mu) = refine_unstable(&l_plus, &l_minus_copy, a0, b0, mu0);
        let w_unstable = b / mu;

        let y_cont = DMatrix::from_fn(dim, continuum.len(), |r, c| y[(r, continuum[c])]);
        let cont_a = &k_mat * y_cont;
        let inv_nu = DVector::from_iterator(continuum.len(), continuum.iter().map(|&i| 1.0 / nu[i]));
        let cont_w = (&l_plus * &cont_a) * DMatrix::from_diagonal(&inv_nu);
        let cont_freq = DVector::from_iterator(continuum.len(), continuum.iter().map(|&i| nu[i].sqrt()));

        Ok(Self {
            omega,
            p,
            sector,
            mu,
            a_unstable,
            w_unstable,
            null_eigenvalue: nu[null[0]],
            cont_a,
            cont_w,
            cont_freq,
        })
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sector(&self) -> &EvenSector {
        &self.sector
    }

    /// The eigenvalue of `L_- L_+` nearest zero (a consistency diagnostic).
    pub fn null_eigenvalue(&self) -> f64 {
        self.null_eigenvalue
    }

    /// Smallest positive frequency `sqrt(nu)` in the continuum.
    pub fn continuum_edge(&self) -> f64 {
        self.cont_freq.min()
    }

    /// Unstable eigenvector `xi` with `H xi = i mu xi`, normalized to unit
    /// `L^2` norm with positive first component at the origin, together with
    /// `lambda_1` defined by `<xi, sigma_3 xi> = i lambda_1`.
    pub fn unstable_mode(&self) -> (VecField, f64) {
        let a = &self.a_unstable;
        let b = &self.w_unstable * self.mu;
        let norm_sq = 0.5 * (a.norm_squared() + b.norm_squared());
        let mut c = 1.0 / norm_sq.sqrt();
        if a[0] < 0.0 {
            c = -c;
        }
        let lambda1 = c * c * self.mu * a.dot(&self.w_unstable);
        let u_red: Vec<C64> = a.iter().zip(b.iter()).map(|(&x, &y)| 0.5 * c * C64::new(x, y)).collect();
        let u = self.sector.scatter(&u_red);
        let xi = VecField::from_scalar(self.sector.grid(), &u);
        (xi, lambda1)
    }

    pub(crate) fn continuum_parts(&self) -> (&DMatrix<f64>, &DMatrix<f64>, &DVector<f64>) {
        (&self.cont_a, &self.cont_w, &self.cont_freq)
    }
}
