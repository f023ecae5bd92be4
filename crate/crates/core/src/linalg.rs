//! Dense linear-algebra support: matrix exponential kernel, SVD-based rank
//! and subspace operations, an exact-arithmetic eigensolver for small
//! matrices, and bottleneck multiset matching for spectra.
//!
//! The exact eigensolver (rational characteristic polynomial + Yun square-free
//! factorization + Durand–Kerner on the square-free parts) exists because the
//! defective test models carry Jordan blocks whose eigenvalues float QR can
//! only locate to ~(machine eps)^{1/(k+1)}; the exact route recovers
//! multiplicities exactly and roots to near machine precision.

use crate::poly::{rational_from_f64, rational_to_f64};
use nalgebra::{Complex, DMatrix, DVector};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

/// Singular values at or below `RANK_TOL · max(1, σ_max)` count as zero in
/// rank and nullspace decisions.
pub const RANK_TOL: f64 = 1e-10;

/// Side length up to which the exact characteristic-polynomial eigensolver
/// is used; beyond it the float Schur fallback takes over.
pub const EXACT_EIG_MAX_SIDE: usize = 32;

// ---------------------------------------------------------------------------
// Matrix exponential: Padé scaling-and-squaring (Higham 2005 orders 3..13)
// ---------------------------------------------------------------------------

const THETA_3: f64 = 1.495585217958292e-2;
const THETA_5: f64 = 2.53939833006323e-1;
const THETA_7: f64 = 9.504178996162932e-1;
const THETA_9: f64 = 2.097847961257068e0;
const THETA_13: f64 = 5.371920351148152e0;

fn pade_uv(a: &DMatrix<f64>, b: &[f64]) -> (DMatrix<f64>, DMatrix<f64>) {
    // b holds the Padé coefficients b_0..b_m; even powers go to v, odd to u.
    let n = a.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let a2 = a * a;
    let mut even = id.clone() * b[0];
    let mut odd = id * b[1];
    let mut pow = DMatrix::<f64>::identity(n, n);
    let mut k = 2;
    while k < b.len() {
        pow = &pow * &a2;
        even += &pow * b[k];
        if k + 1 < b.len() {
            odd += &pow * b[k + 1];
        }
        k += 2;
    }
    (a * odd, even)
}

fn pade13_uv(a: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    const B: [f64; 14] = [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ];
    let n = a.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let u_inner = &a6 * (&a6 * B[13] + &a4 * B[11] + &a2 * B[9])
        + &a6 * B[7]
        + &a4 * B[5]
        + &a2 * B[3]
        + &id * B[1];
    let u = a * u_inner;
    let v = &a6 * (&a6 * B[12] + &a4 * B[10] + &a2 * B[8])
        + &a6 * B[6]
        + &a4 * B[4]
        + &a2 * B[2]
        + id * B[0];
    (u, v)
}

/// `e^M` for a square matrix, by Padé approximation with scaling and
/// squaring. Relative accuracy is near machine precision for the desk-scale
/// matrices in scope.
pub fn expm(m: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(m.nrows(), m.ncols(), "expm requires a square matrix");
    assert!(m.iter().all(|x| x.is_finite()), "expm requires finite entries");
    let one_norm = (0..m.ncols())
        .map(|j| m.column(j).iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max);

    const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
    const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
    const B7: [f64; 8] = [
        17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
    ];
    const B9: [f64; 10] = [
        17643225600.0,
        8821612800.0,
        2075673600.0,
        302702400.0,
        30270240.0,
        2162160.0,
        110880.0,
        3960.0,
        90.0,
        1.0,
    ];

    let (u, v, squarings) = if one_norm <= THETA_3 {
        let (u, v) = pade_uv(m, &B3);
        (u, v, 0u32)
    } else if one_norm <= THETA_5 {
        let (u, v) = pade_uv(m, &B5);
        (u, v, 0)
    } else if one_norm <= THETA_7 {
        let (u, v) = pade_uv(m, &B7);
        (u, v, 0)
    } else if one_norm <= THETA_9 {
        let (u, v) = pade_uv(m, &B9);
        (u, v, 0)
    } else {
        let s = (one_norm / THETA_13).log2().ceil().max(0.0) as u32;
        let scaled = m * 2f64.powi(-(s as i32));
        let (u, v) = pade13_uv(&scaled);
        (u, v, s)
    };

    let numer = &v + &u;
    let denom = &v - &u;
    let mut r = denom
        .lu()
        .solve(&numer)
        .expect("Padé denominator is singular; input norm out of range");
    for _ in 0..squarings {
        r = &r * &r;
    }
    r
}

// ---------------------------------------------------------------------------
// SVD helpers
// ---------------------------------------------------------------------------

/// Singular values in descending order.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    let svd = m.clone().svd(false, false);
    let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    sv
}

/// The operator 2-norm (largest singular value).
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

fn rank_threshold(sv: &[f64], tol: f64) -> f64 {
    tol * sv.first().copied().unwrap_or(0.0).max(1.0)
}

/// Numerical rank with the given singular-value tolerance.
pub fn rank_with_tol(m: &DMatrix<f64>, tol: f64) -> usize {
    let sv = singular_values(m);
    let thr = rank_threshold(&sv, tol);
    sv.iter().filter(|&&s| s > thr).count()
}

/// Orthonormal basis of the (right) nullspace, as matrix columns.
/// Returns a `n×0` matrix when the map is injective.
pub fn nullspace(m: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let n = m.ncols();
    let svd = m.clone().svd(false, true);
    let v_t = svd.v_t.expect("SVD with v requested");
    let mut pairs: Vec<(f64, usize)> = svd
        .singular_values
        .iter()
        .copied()
        .enumerate()
        .map(|(i, s)| (s, i))
        .collect();
    pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let thr = rank_threshold(
        &pairs.iter().map(|p| p.0).collect::<Vec<_>>(),
        tol,
    );
    let mut cols: Vec<DVector<f64>> = Vec::new();
    // rows of v_t beyond the computed singular values also span the kernel
    // (they correspond to exactly-zero singular values for wide matrices).
    for (s, i) in &pairs {
        if *s <= thr {
            cols.push(v_t.row(*i).transpose());
        }
    }
    for i in svd.singular_values.len()..v_t.nrows() {
        cols.push(v_t.row(i).transpose());
    }
    let mut out = DMatrix::<f64>::zeros(n, cols.len());
    for (j, c) in cols.iter().enumerate() {
        out.set_column(j, c);
    }
    out
}

/// Intersection of two subspaces given by orthonormal-column bases.
pub fn intersect_subspaces(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let n = a.nrows();
    assert_eq!(b.nrows(), n);
    if a.ncols() == 0 || b.ncols() == 0 {
        return DMatrix::<f64>::zeros(n, 0);
    }
    // x ∈ A ∩ B  ⇔  (I − AAᵀ)x = 0 and (I − BBᵀ)x = 0.
    let id = DMatrix::<f64>::identity(n, n);
    let pa = &id - a * a.transpose();
    let pb = &id - b * b.transpose();
    let mut stacked = DMatrix::<f64>::zeros(2 * n, n);
    stacked.view_mut((0, 0), (n, n)).copy_from(&pa);
    stacked.view_mut((n, 0), (n, n)).copy_from(&pb);
    nullspace(&stacked, tol)
}

/// Preimage `{x : M x ∈ span(q)}` of a subspace under a linear map.
pub fn preimage(map: &DMatrix<f64>, q: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let n = map.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let proj_out = if q.ncols() == 0 {
        id
    } else {
        &id - q * q.transpose()
    };
    nullspace(&(proj_out * map), tol)
}

/// Nullity of a complex matrix via the real embedding
/// `[[Re, −Im], [Im, Re]]` (whose nullity is twice the complex one).
pub fn complex_nullity(m: &DMatrix<Complex<f64>>, tol: f64) -> usize {
    let n = m.nrows();
    let mut emb = DMatrix::<f64>::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let z = m[(i, j)];
            emb[(i, j)] = z.re;
            emb[(i, j + n)] = -z.im;
            emb[(i + n, j)] = z.im;
            emb[(i + n, j + n)] = z.re;
        }
    }
    let sv = singular_values(&emb);
    let thr = rank_threshold(&sv, tol);
    let real_nullity = sv.iter().filter(|&&s| s <= thr).count() + (2 * n - sv.len());
    real_nullity / 2
}

// ---------------------------------------------------------------------------
// Exact rational matrices and characteristic polynomials
// ---------------------------------------------------------------------------

/// Square matrix with exact rational entries, row-major.
#[derive(Clone, Debug)]
pub struct RatMatrix {
    n: usize,
    data: Vec<BigRational>,
}

impl RatMatrix {
    pub fn from_f64(m: &DMatrix<f64>) -> Self {
        assert_eq!(m.nrows(), m.ncols());
        let n = m.nrows();
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(rational_from_f64(m[(i, j)]));
            }
        }
        RatMatrix { n, data }
    }

    pub fn from_rows(rows: Vec<Vec<BigRational>>) -> Self {
        let n = rows.len();
        assert!(rows.iter().all(|r| r.len() == n));
        RatMatrix {
            n,
            data: rows.into_iter().flatten().collect(),
        }
    }

    pub fn side(&self) -> usize {
        self.n
    }

    fn at(&self, i: usize, j: usize) -> &BigRational {
        &self.data[i * self.n + j]
    }

    fn mul(&self, other: &RatMatrix) -> RatMatrix {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let mut data = vec![BigRational::zero(); n * n];
        for i in 0..n {
            for k in 0..n {
                let aik = self.at(i, k);
                if aik.is_zero() {
                    continue;
                }
                for j in 0..n {
                    let b = other.at(k, j);
                    if !b.is_zero() {
                        data[i * n + j] += aik * b;
                    }
                }
            }
        }
        RatMatrix { n, data }
    }

    fn trace(&self) -> BigRational {
        (0..self.n).map(|i| self.at(i, i).clone()).sum()
    }

    fn add_scalar_diag(&mut self, c: &BigRational) {
        for i in 0..self.n {
            self.data[i * self.n + i] += c;
        }
    }
}

/// Characteristic polynomial `det(λI − M)` by Faddeev–LeVerrier, exact.
/// Coefficients ascending: index k holds the coefficient of `λ^k`; the
/// leading coefficient is 1.
pub fn char_poly(m: &RatMatrix) -> Vec<BigRational> {
    let n = m.n;
    let mut coeffs = vec![BigRational::zero(); n + 1];
    coeffs[n] = BigRational::one();
    let mut aux = m.clone(); // M_1 = M
    for k in 1..=n {
        let c = -aux.trace() / BigRational::from(BigInt::from(k as i64));
        coeffs[n - k] = c.clone();
        if k < n {
            aux.add_scalar_diag(&c);
            aux = m.mul(&aux);
        }
    }
    coeffs
}

// --- univariate exact polynomial helpers (ascending coefficients) ---

fn poly_trim(p: &mut Vec<BigRational>) {
    while p.len() > 1 && p.last().map(|c| c.is_zero()).unwrap_or(false) {
        p.pop();
    }
}

fn poly_degree(p: &[BigRational]) -> usize {
    p.len().saturating_sub(1)
}

fn poly_is_zero(p: &[BigRational]) -> bool {
    p.iter().all(|c| c.is_zero())
}

fn poly_derivative(p: &[BigRational]) -> Vec<BigRational> {
    if p.len() <= 1 {
        return vec![BigRational::zero()];
    }
    let mut out = Vec::with_capacity(p.len() - 1);
    for (k, c) in p.iter().enumerate().skip(1) {
        out.push(c * BigRational::from(BigInt::from(k as i64)));
    }
    poly_trim(&mut out);
    out
}

fn poly_monic(p: &[BigRational]) -> Vec<BigRational> {
    let mut q = p.to_vec();
    poly_trim(&mut q);
    let lead = q.last().cloned().unwrap();
    if lead.is_zero() || lead.is_one() {
        return q;
    }
    for c in &mut q {
        *c /= &lead;
    }
    q
}

/// Euclidean remainder of monic-normalized division.
fn poly_rem(a: &[BigRational], b: &[BigRational]) -> Vec<BigRational> {
    let mut r = a.to_vec();
    poly_trim(&mut r);
    let b = poly_monic(b);
    let db = poly_degree(&b);
    while !poly_is_zero(&r) && poly_degree(&r) >= db && db > 0 {
        let dr = poly_degree(&r);
        let factor = r[dr].clone();
        let shift = dr - db;
        for k in 0..=db {
            let delta = &b[k] * &factor;
            r[k + shift] -= delta;
        }
        poly_trim(&mut r);
        if poly_degree(&r) == dr && !poly_is_zero(&r) {
            // leading term must have cancelled; force it for safety
            r[dr] = BigRational::zero();
            poly_trim(&mut r);
        }
    }
    if db == 0 {
        return vec![BigRational::zero()];
    }
    r
}

/// Exact quotient, valid when `b` divides `a`.
fn poly_div_exact(a: &[BigRational], b: &[BigRational]) -> Vec<BigRational> {
    let mut r = a.to_vec();
    poly_trim(&mut r);
    let mut b = b.to_vec();
    poly_trim(&mut b);
    let db = poly_degree(&b);
    let da = poly_degree(&r);
    if da < db {
        return vec![BigRational::zero()];
    }
    let mut q = vec![BigRational::zero(); da - db + 1];
    let lead = b[db].clone();
    while !poly_is_zero(&r) && poly_degree(&r) >= db {
        let dr = poly_degree(&r);
        let factor = &r[dr] / &lead;
        let shift = dr - db;
        q[shift] = factor.clone();
        for k in 0..=db {
            let delta = &b[k] * &factor;
            r[k + shift] -= delta;
        }
        poly_trim(&mut r);
        if dr == 0 {
            break;
        }
    }
    q
}

fn poly_gcd(a: &[BigRational], b: &[BigRational]) -> Vec<BigRational> {
    let mut x = poly_monic(a);
    let mut y = poly_monic(b);
    if poly_is_zero(&x) {
        return y;
    }
    if poly_is_zero(&y) {
        return x;
    }
    while !poly_is_zero(&y) && poly_degree(&y) > 0 {
        let r = poly_rem(&x, &y);
        x = y;
        y = if poly_is_zero(&r) { vec![BigRational::zero()] } else { poly_monic(&r) };
    }
    if !poly_is_zero(&y) {
        // nonzero constant gcd
        return vec![BigRational::one()];
    }
    poly_monic(&x)
}

/// Yun's square-free decomposition: returns `(factor, multiplicity)` pairs
/// with `p = lead · Π factorᵢ^multᵢ` and each factor square-free.
pub fn square_free_factors(p: &[BigRational]) -> Vec<(Vec<BigRational>, u32)> {
    let p = poly_monic(p);
    if poly_degree(&p) == 0 {
        return Vec::new();
    }
    let dp = poly_derivative(&p);
    let a0 = poly_gcd(&p, &dp);
    if poly_degree(&a0) == 0 {
        return vec![(p, 1)];
    }
    let mut out = Vec::new();
    let mut b = poly_div_exact(&p, &a0);
    let mut c = poly_div_exact(&dp, &a0);
    let mut i = 1u32;
    loop {
        let db = poly_derivative(&b);
        let mut d = c.clone();
        // d = c − b'
        if d.len() < db.len() {
            d.resize(db.len(), BigRational::zero());
        }
        for (k, cb) in db.iter().enumerate() {
            d[k] -= cb;
        }
        poly_trim(&mut d);
        let a = poly_gcd(&b, &d);
        if poly_degree(&a) > 0 {
            out.push((poly_monic(&a), i));
        }
        b = poly_div_exact(&b, &a);
        c = poly_div_exact(&d, &a);
        i += 1;
        if poly_degree(&b) == 0 {
            break;
        }
    }
    out
}

/// Durand–Kerner root finder for a square-free polynomial given by exact
/// coefficients. Returns all complex roots.
pub fn roots_square_free(coeffs: &[BigRational]) -> Vec<Complex<f64>> {
    let monic = poly_monic(coeffs);
    let deg = poly_degree(&monic);
    if deg == 0 {
        return Vec::new();
    }
    let c: Vec<f64> = monic.iter().map(rational_to_f64).collect();
    if deg == 1 {
        return vec![Complex::new(-c[0], 0.0)];
    }
    let eval = |z: Complex<f64>| -> Complex<f64> {
        let mut acc = Complex::new(1.0, 0.0); // leading coefficient
        for k in (0..deg).rev() {
            acc = acc * z + Complex::new(c[k], 0.0);
        }
        acc
    };
    // radius bound: 1 + max |c_k|; start on a circle with an irrational phase
    // offset so no initial point sits on a symmetry axis.
    let radius = 1.0 + c[..deg].iter().map(|x| x.abs()).fold(0.0, f64::max);
    let mut z: Vec<Complex<f64>> = (0..deg)
        .map(|k| {
            let angle = 2.0 * std::f64::consts::PI * k as f64 / deg as f64 + 0.4;
            Complex::from_polar(radius, angle)
        })
        .collect();
    for _ in 0..400 {
        let mut max_step = 0.0f64;
        for i in 0..deg {
            let mut denom = Complex::new(1.0, 0.0);
            for j in 0..deg {
                if j != i {
                    denom *= z[i] - z[j];
                }
            }
            if denom.norm() == 0.0 {
                // coincident iterates: nudge
                z[i] += Complex::new(1e-8, 1e-8);
                continue;
            }
            let step = eval(z[i]) / denom;
            z[i] -= step;
            max_step = max_step.max(step.norm());
        }
        if max_step < 1e-15 * radius.max(1.0) {
            break;
        }
    }
    // clean tiny imaginary parts of real roots (conjugate symmetry of real polys)
    for zi in &mut z {
        if zi.im.abs() < 1e-13 * (1.0 + zi.re.abs()) {
            zi.im = 0.0;
        }
    }
    z
}

/// Eigenvalues with algebraic multiplicities.
///
/// For sides up to [`EXACT_EIG_MAX_SIDE`] the characteristic polynomial is
/// computed exactly and multiplicities come from the square-free
/// factorization; otherwise nalgebra's Schur decomposition supplies the
/// eigenvalues (each listed with multiplicity 1) and near-duplicates are
/// clustered.
pub fn eigenvalues_with_multiplicity(m: &DMatrix<f64>) -> Vec<(Complex<f64>, usize)> {
    let n = m.nrows();
    assert_eq!(n, m.ncols());
    if n == 0 {
        return Vec::new();
    }
    let mut pairs: Vec<(Complex<f64>, usize)> = if n <= EXACT_EIG_MAX_SIDE {
        let cp = char_poly(&RatMatrix::from_f64(m));
        let mut acc = Vec::new();
        for (factor, mult) in square_free_factors(&cp) {
            for root in roots_square_free(&factor) {
                acc.push((root, mult as usize));
            }
        }
        acc
    } else {
        m.clone()
            .complex_eigenvalues()
            .iter()
            .map(|&z| (z, 1usize))
            .collect()
    };
    cluster_eigenvalues(&mut pairs, 1e-7);
    pairs.sort_by(|a, b| {
        (a.0.re, a.0.im)
            .partial_cmp(&(b.0.re, b.0.im))
            .unwrap()
    });
    pairs
}

/// Merges eigenvalues closer than `tol`, accumulating multiplicities at the
/// multiplicity-weighted mean.
fn cluster_eigenvalues(pairs: &mut Vec<(Complex<f64>, usize)>, tol: f64) {
    let mut out: Vec<(Complex<f64>, usize)> = Vec::new();
    'outer: for &(z, m) in pairs.iter() {
        for (w, k) in out.iter_mut() {
            if (*w - z).norm() <= tol {
                let total = *k + m;
                *w = (*w * (*k as f64) + z * m as f64) / total as f64;
                *k = total;
                continue 'outer;
            }
        }
        out.push((z, m));
    }
    *pairs = out;
}

/// Bottleneck multiset distance: the smallest `r` such that the two equal-size
/// multisets can be perfectly matched with every pair within distance `r`.
/// This is the Hausdorff distance under an optimal pairing.
pub fn bottleneck_distance(a: &[Complex<f64>], b: &[Complex<f64>]) -> f64 {
    assert_eq!(a.len(), b.len(), "multisets must have equal size");
    let n = a.len();
    if n == 0 {
        return 0.0;
    }
    let mut costs = vec![0.0f64; n * n];
    let mut all: Vec<f64> = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let c = (a[i] - b[j]).norm();
            costs[i * n + j] = c;
            all.push(c);
        }
    }
    all.sort_by(|x, y| x.partial_cmp(y).unwrap());
    all.dedup();

    let feasible = |thr: f64| -> bool {
        // Kuhn's augmenting-path bipartite matching on edges with cost ≤ thr.
        let mut match_of_b = vec![usize::MAX; n];
        fn try_assign(
            i: usize,
            n: usize,
            thr: f64,
            costs: &[f64],
            seen: &mut [bool],
            match_of_b: &mut [usize],
        ) -> bool {
            for j in 0..n {
                if costs[i * n + j] <= thr && !seen[j] {
                    seen[j] = true;
                    if match_of_b[j] == usize::MAX
                        || try_assign(match_of_b[j], n, thr, costs, seen, match_of_b)
                    {
                        match_of_b[j] = i;
                        return true;
                    }
                }
            }
            false
        }
        for i in 0..n {
            let mut seen = vec![false; n];
            if !try_assign(i, n, thr, &costs, &mut seen, &mut match_of_b) {
                return false;
            }
        }
        true
    };

    let mut lo = 0usize;
    let mut hi = all.len() - 1;
    if feasible(all[lo]) {
        return all[lo];
    }
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if feasible(all[mid]) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    all[hi]
}
