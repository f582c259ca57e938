//! Thin wrappers over nalgebra's SVD with the conventions used across the
//! crate: singular values sorted in nonincreasing order and a relative
//! tolerance deciding the numerical rank.

use nalgebra::{DMatrix, DVector, DVectorView, SVD};

/// Thin SVD `A = U diag(s) V^T` with `s` nonincreasing.
pub struct ThinSvd {
    pub u: DMatrix<f64>,
    pub singular_values: DVector<f64>,
    pub v_t: DMatrix<f64>,
}

impl ThinSvd {
    /// Tall matrices are reduced with a QR factorization first, so the SVD
    /// only runs on the square factor `R`.
    pub fn new(a: &DMatrix<f64>) -> Self {
        if a.nrows() > a.ncols() && a.ncols() > 0 {
            let qr = a.clone().qr();
            let (q, r) = (qr.q(), qr.r());
            let small = Self::direct(r);
            return Self { u: q * small.u, ..small };
        }
        Self::direct(a.clone())
    }

    fn direct(a: DMatrix<f64>) -> Self {
        let mut svd = SVD::new(a, true, true);
        svd.sort_by_singular_values();
        Self {
            u: svd.u.expect("requested U"),
            singular_values: svd.singular_values,
            v_t: svd.v_t.expect("requested V^T"),
        }
    }

    /// Number of singular values above `rank_tol * sigma_max`. Zero for the
    /// zero matrix.
    pub fn rank(&self, rank_tol: f64) -> usize {
        let smax = self.singular_values.iter().copied().fold(0.0, f64::max);
        if smax == 0.0 {
            return 0;
        }
        self.singular_values
            .iter()
            .take_while(|&&s| s > rank_tol * smax)
            .count()
    }
}

/// Leading `r` left singular vectors of `a` (columns of an `m x r` matrix).
pub fn leading_left_singular_vectors(a: &DMatrix<f64>, r: usize) -> DMatrix<f64> {
    if r == 0 {
        return DMatrix::zeros(a.nrows(), 0);
    }
    let svd = ThinSvd::new(a);
    let mut u = svd.u.columns(0, r).into_owned();
    for mut col in u.column_iter_mut() {
        orient(&mut col);
    }
    u
}

/// Flips the sign of a vector so that its largest-magnitude entry is positive.
fn orient<S>(v: &mut nalgebra::Matrix<f64, nalgebra::Dyn, nalgebra::U1, S>)
where
    S: nalgebra::StorageMut<f64, nalgebra::Dyn, nalgebra::U1>,
{
    let imax = v.iamax();
    if v[imax] < 0.0 {
        v.neg_mut();
    }
}

/// Minimum-norm least-squares solution of `K a = x` together with the
/// orthonormal basis `U_1` of the numerical range of `K`.
pub struct MinNormSolution {
    pub coefficients: DVector<f64>,
    pub range_basis: DMatrix<f64>,
    pub rank: usize,
}

/// Solves `min |K a - x|` with the smallest `|a|`: `a = V_1 S_1^{-1} U_1^T x`,
/// where singular values `<= rank_tol * sigma_max` are dropped.
pub fn min_norm_solve(k: &DMatrix<f64>, x: DVectorView<f64>, rank_tol: f64) -> MinNormSolution {
    let cols = k.ncols();
    if cols == 0 {
        return MinNormSolution {
            coefficients: DVector::zeros(0),
            range_basis: DMatrix::zeros(k.nrows(), 0),
            rank: 0,
        };
    }
    let svd = ThinSvd::new(k);
    let rank = svd.rank(rank_tol);
    let u1 = svd.u.columns(0, rank).into_owned();
    let mut proj = u1.tr_mul(&x);
    for (p, s) in proj.iter_mut().zip(svd.singular_values.iter()) {
        *p /= s;
    }
    let coefficients = svd.v_t.rows(0, rank).tr_mul(&proj);
    MinNormSolution { coefficients, range_basis: u1, rank }
}
