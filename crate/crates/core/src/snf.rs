//! Smith normal form and the linear-algebra queries built on it: solving,
//! kernels, images, cokernel presentations and homology of a two-step
//! complex. Everything is exact and deterministic: pivots are chosen by
//! smallest valuation, then lexicographic position, and particular solutions
//! set all free parameters to zero.

use num::traits::Zero;

use crate::error::EngineError;
use crate::matrix::Matrix;
use crate::ring::{Ring, Scalar};

/// U * M * V = S with S diagonal and the diagonal a divisibility chain.
/// `u_inv` and `v_inv` are maintained alongside so images and preimages can
/// be read off without inverting anything afterwards.
#[derive(Debug, Clone)]
pub struct SnfResult {
    pub s: Matrix,
    pub u: Matrix,
    pub u_inv: Matrix,
    pub v: Matrix,
    pub v_inv: Matrix,
    pub rank: usize,
}

struct Work {
    ring: Ring,
    a: Vec<Vec<Scalar>>,
    u: Vec<Vec<Scalar>>,
    ui: Vec<Vec<Scalar>>,
    v: Vec<Vec<Scalar>>,
    vi: Vec<Vec<Scalar>>,
    rows: usize,
    cols: usize,
}

impl Work {
    fn new(ring: &Ring, m: &Matrix) -> Self {
        let rows = m.rows();
        let cols = m.cols();
        let mut a = vec![vec![ring.zero(); cols]; rows];
        for (&(i, j), val) in m.entries() {
            a[i][j] = val.clone();
        }
        let ident = |n: usize| {
            let mut id = vec![vec![ring.zero(); n]; n];
            for (i, row) in id.iter_mut().enumerate() {
                row[i] = ring.one();
            }
            id
        };
        Work {
            ring: *ring,
            a,
            u: ident(rows),
            ui: ident(rows),
            v: ident(cols),
            vi: ident(cols),
            rows,
            cols,
        }
    }

    // row_i += c * row_k  (U tracks on the left, so U gets the same op and
    // U^-1 gets the inverse column op)
    fn row_add(&mut self, i: usize, k: usize, c: &Scalar) {
        let r = self.ring;
        for j in 0..self.cols {
            let t = r.mul(c, &self.a[k][j]);
            self.a[i][j] = r.add(&self.a[i][j], &t);
        }
        for j in 0..self.rows {
            let t = r.mul(c, &self.u[k][j]);
            self.u[i][j] = r.add(&self.u[i][j], &t);
            let t2 = r.mul(c, &self.ui[j][i]);
            self.ui[j][k] = r.sub(&self.ui[j][k], &t2);
        }
    }

    fn col_add(&mut self, j: usize, k: usize, c: &Scalar) {
        let r = self.ring;
        for i in 0..self.rows {
            let t = r.mul(c, &self.a[i][k]);
            self.a[i][j] = r.add(&self.a[i][j], &t);
        }
        for i in 0..self.cols {
            let t = r.mul(c, &self.v[i][k]);
            self.v[i][j] = r.add(&self.v[i][j], &t);
            let t2 = r.mul(c, &self.vi[j][i]);
            self.vi[k][i] = r.sub(&self.vi[k][i], &t2);
        }
    }

    fn row_swap(&mut self, i: usize, k: usize) {
        if i == k {
            return;
        }
        self.a.swap(i, k);
        self.u.swap(i, k);
        for row in self.ui.iter_mut() {
            row.swap(i, k);
        }
    }

    fn col_swap(&mut self, j: usize, k: usize) {
        if j == k {
            return;
        }
        for row in self.a.iter_mut() {
            row.swap(j, k);
        }
        for row in self.v.iter_mut() {
            row.swap(j, k);
        }
        self.vi.swap(j, k);
    }

    fn row_scale(&mut self, i: usize, c: &Scalar) {
        let r = self.ring;
        let cinv = r.inv(c).expect("row_scale needs a unit");
        for j in 0..self.cols {
            self.a[i][j] = r.mul(&self.a[i][j], c);
        }
        for j in 0..self.rows {
            self.u[i][j] = r.mul(&self.u[i][j], c);
            self.ui[j][i] = r.mul(&self.ui[j][i], &cinv);
        }
    }

    fn find_pivot(&self, k: usize) -> Option<(usize, usize)> {
        let r = &self.ring;
        let mut best: Option<((usize, usize), num::BigInt)> = None;
        for i in k..self.rows {
            for j in k..self.cols {
                if self.a[i][j].is_zero() {
                    continue;
                }
                let key = r.pivot_key(&self.a[i][j]);
                match &best {
                    Some((_, bk)) if *bk <= key => {}
                    _ => best = Some(((i, j), key)),
                }
            }
        }
        best.map(|(p, _)| p)
    }

    fn eliminate(&mut self) -> usize {
        let r = self.ring;
        let n = self.rows.min(self.cols);
        let mut k = 0;
        while k < n {
            let Some((pi, pj)) = self.find_pivot(k) else {
                break;
            };
            self.row_swap(k, pi);
            self.col_swap(k, pj);
            loop {
                // clear column k
                let mut dirty = false;
                for i in k + 1..self.rows {
                    if self.a[i][k].is_zero() {
                        continue;
                    }
                    let (q, rem) = r.div_rem(&self.a[i][k], &self.a[k][k]);
                    if !q.is_zero() {
                        self.row_add(i, k, &r.neg(&q));
                    }
                    if !rem.is_zero() {
                        // remainder strictly smaller: swap it into pivot position
                        self.row_swap(k, i);
                        dirty = true;
                        break;
                    }
                }
                if dirty {
                    continue;
                }
                for j in k + 1..self.cols {
                    if self.a[k][j].is_zero() {
                        continue;
                    }
                    let (q, rem) = r.div_rem(&self.a[k][j], &self.a[k][k]);
                    if !q.is_zero() {
                        self.col_add(j, k, &r.neg(&q));
                    }
                    if !rem.is_zero() {
                        self.col_swap(k, j);
                        dirty = true;
                        break;
                    }
                }
                if dirty {
                    continue;
                }
                let col_clear = (k + 1..self.rows).all(|i| self.a[i][k].is_zero());
                let row_clear = (k + 1..self.cols).all(|j| self.a[k][j].is_zero());
                if col_clear && row_clear {
                    break;
                }
            }
            k += 1;
        }
        k
    }

    /// Enforce d_1 | d_2 | ... by folding each later diagonal entry into the
    /// earlier one (standard gcd trick via one extra elimination round).
    fn fix_divisibility(&mut self, rank: usize) {
        let r = self.ring;
        for i in 0..rank {
            for j in i + 1..rank {
                if self.a[j][j].is_zero() {
                    continue;
                }
                if r.divides(&self.a[i][i].clone(), &self.a[j][j].clone()) {
                    continue;
                }
                // move a_jj next to a_ii and re-eliminate the 2x2 block
                self.col_add(i, j, &r.one());
                loop {
                    let (q, rem) = r.div_rem(&self.a[j][i], &self.a[i][i]);
                    if !q.is_zero() {
                        self.row_add(j, i, &r.neg(&q));
                    }
                    if rem.is_zero() {
                        break;
                    }
                    self.row_swap(i, j);
                }
                // clear the fill-in above: entry (i, j) may now be nonzero
                let (q2, rem2) = r.div_rem(&self.a[i][j], &self.a[i][i]);
                if !q2.is_zero() {
                    self.col_add(j, i, &r.neg(&q2));
                }
                debug_assert!(rem2.is_zero());
            }
        }
    }

    fn normalize_diagonal(&mut self, rank: usize) {
        let r = self.ring;
        for i in 0..rank {
            let (canon, unit) = r.canonical_associate(&self.a[i][i]);
            if !r.is_unit(&unit) {
                continue;
            }
            if unit != r.one() {
                self.row_scale(i, &unit);
            }
            debug_assert_eq!(self.a[i][i], canon);
        }
    }
}

pub fn smith_normal_form(ring: &Ring, m: &Matrix) -> SnfResult {
    let mut w = Work::new(ring, m);
    let rank = w.eliminate();
    w.fix_divisibility(rank);
    // divisibility fixes can disturb ordering of units vs non-units; one more
    // pass keeps the chain intact after normalization
    w.normalize_diagonal(rank);
    let to_matrix = |d: &Vec<Vec<Scalar>>, rows: usize, cols: usize| {
        let mut out = Matrix::zero(rows, cols);
        for (i, row) in d.iter().enumerate() {
            for (j, val) in row.iter().enumerate() {
                if !val.is_zero() {
                    out.set(i, j, val.clone());
                }
            }
        }
        out
    };
    SnfResult {
        s: to_matrix(&w.a, w.rows, w.cols),
        u: to_matrix(&w.u, w.rows, w.rows),
        u_inv: to_matrix(&w.ui, w.rows, w.rows),
        v: to_matrix(&w.v, w.cols, w.cols),
        v_inv: to_matrix(&w.vi, w.cols, w.cols),
        rank,
    }
}

/// Public SNF per the module contract: only Z and Z_(p) are meaningful here.
pub fn smith_normal_form_checked(
    ring: &Ring,
    m: &Matrix,
) -> Result<SnfResult, EngineError> {
    if ring.is_field() {
        return Err(EngineError::UnsupportedRing(
            "smith normal form is for Z or Z_(p); fields reduce by Gaussian elimination".into(),
        ));
    }
    Ok(smith_normal_form(ring, m))
}

/// Solve M x = b. Returns the SNF particular solution (free parameters zero)
/// or None when unsolvable over the ring.
pub fn solve(ring: &Ring, m: &Matrix, b: &[Scalar]) -> Result<Option<Vec<Scalar>>, EngineError> {
    if b.len() != m.rows() {
        return Err(EngineError::Dimension(format!(
            "solve: {} rows vs rhs {}",
            m.rows(),
            b.len()
        )));
    }
    let snf = smith_normal_form(ring, m);
    solve_with(ring, &snf, m.cols(), b)
}

/// Solve using a precomputed factorization of M.
pub fn solve_with(
    ring: &Ring,
    snf: &SnfResult,
    cols: usize,
    b: &[Scalar],
) -> Result<Option<Vec<Scalar>>, EngineError> {
    let ub = snf.u.mul_vec(ring, b)?;
    let mut y = vec![ring.zero(); cols];
    for (i, ubi) in ub.iter().enumerate() {
        let d = if i < cols { snf.s.get(i, i) } else { ring.zero() };
        if d.is_zero() {
            if !ubi.is_zero() {
                return Ok(None);
            }
        } else if ring.divides(&d, ubi) {
            y[i] = ring.div_exact(ubi, &d);
        } else {
            return Ok(None);
        }
    }
    Ok(Some(snf.v.mul_vec(ring, &y)?))
}

/// Basis of ker(M) as matrix columns (a full lattice basis over Z / Z_(p)).
pub fn kernel(ring: &Ring, m: &Matrix) -> Matrix {
    let snf = smith_normal_form(ring, m);
    kernel_from(&snf, m.cols())
}

pub fn kernel_from(snf: &SnfResult, cols: usize) -> Matrix {
    let mut ker_cols = Vec::new();
    for j in 0..cols {
        let diag = if j < snf.s.rows() {
            snf.s.get(j, j)
        } else {
            num::BigRational::zero()
        };
        if diag.is_zero() {
            ker_cols.push(snf.v.column(j));
        }
    }
    Matrix::from_columns(cols, ker_cols)
}

/// Basis of the column lattice im(M): the nonzero d_i * (U^-1 e_i).
pub fn image(ring: &Ring, m: &Matrix) -> Matrix {
    let snf = smith_normal_form(ring, m);
    let mut cols = Vec::new();
    for i in 0..snf.rank {
        let d = snf.s.get(i, i);
        let col = snf.u_inv.column(i);
        cols.push(col.iter().map(|x| ring.mul(x, &d)).collect());
    }
    Matrix::from_columns(m.rows(), cols)
}

/// Cohomology presentation: free rank, torsion chain, representative columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HomologyPresentation {
    pub free_rank: usize,
    /// Nonzero non-unit diagonal entries, in divisibility order.
    pub torsion: Vec<Scalar>,
    /// One representative vector (in ambient coordinates) per generator:
    /// torsion generators first (matching `torsion`), then free generators.
    pub generators: Vec<Vec<Scalar>>,
}

impl HomologyPresentation {
    pub fn zero() -> Self {
        HomologyPresentation {
            free_rank: 0,
            torsion: Vec::new(),
            generators: Vec::new(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.free_rank == 0 && self.torsion.is_empty()
    }

    pub fn total_generators(&self) -> usize {
        self.free_rank + self.torsion.len()
    }
}

/// Presentation of coker(X) where X's columns are relations among `gens`
/// ambient vectors. Returns the homology presentation with representatives
/// expressed through `gens`.
pub fn cokernel_presentation(
    ring: &Ring,
    gens: &Matrix,
    relations: &Matrix,
) -> Result<HomologyPresentation, EngineError> {
    if gens.cols() != relations.rows() {
        return Err(EngineError::Dimension(
            "cokernel: generators vs relation rows".into(),
        ));
    }
    let k = gens.cols();
    let snf = smith_normal_form(ring, relations);
    // coker = Z^k / im(X); new generators are gens * U^-1 columns
    let new_gens = gens.mul(ring, &snf.u_inv)?;
    let mut torsion = Vec::new();
    let mut torsion_vecs = Vec::new();
    let mut free_vecs = Vec::new();
    for i in 0..k {
        let d = if i < snf.rank {
            snf.s.get(i, i)
        } else {
            ring.zero()
        };
        if d.is_zero() {
            free_vecs.push(new_gens.column(i));
        } else if !ring.is_unit(&d) {
            torsion.push(d);
            torsion_vecs.push(new_gens.column(i));
        }
    }
    let free_rank = free_vecs.len();
    let mut generators = torsion_vecs;
    generators.extend(free_vecs);
    Ok(HomologyPresentation {
        free_rank,
        torsion,
        generators,
    })
}

/// Homology at the middle slot of  C_in --d_in--> C --d_out--> C_next.
pub fn homology_at(
    ring: &Ring,
    d_in: &Matrix,
    d_out: &Matrix,
) -> Result<HomologyPresentation, EngineError> {
    if d_in.rows() != d_out.cols() {
        return Err(EngineError::Dimension(
            "homology_at: middle dimensions disagree".into(),
        ));
    }
    let comp = d_out.mul(ring, d_in)?;
    if !comp.is_zero() {
        return Err(EngineError::CompositeNotZero(format!(
            "{} nonzero entries in d_out * d_in",
            comp.nnz()
        )));
    }
    let ker = kernel(ring, d_out);
    let im = image(ring, d_in);
    // express image columns in kernel coordinates
    let ker_snf = smith_normal_form(ring, &ker);
    let mut rel_cols = Vec::new();
    for j in 0..im.cols() {
        let col = im.column(j);
        let x = solve_with(ring, &ker_snf, ker.cols(), &col)?.ok_or_else(|| {
            EngineError::CompositeNotZero("image does not lie in kernel".into())
        })?;
        rel_cols.push(x);
    }
    let relations = Matrix::from_columns(ker.cols(), rel_cols);
    cokernel_presentation(ring, &ker, &relations)
}

/// Subquotient membership: is v in the lattice spanned by span's columns?
pub fn in_span(ring: &Ring, span: &Matrix, v: &[Scalar]) -> Result<bool, EngineError> {
    Ok(solve(ring, span, v)?.is_some())
}

/// Whether the induced map  coker(rel_a) -> coker(rel_b), given on generators
/// by `f`, is an isomorphism of finitely presented modules.
pub fn fp_map_is_iso(
    ring: &Ring,
    f: &Matrix,
    rel_a: &Matrix,
    rel_b: &Matrix,
) -> Result<bool, EngineError> {
    // surjective: columns of f together with rel_b generate the target
    let gen = f.hstack(rel_b)?;
    let snf = smith_normal_form(ring, &gen);
    if snf.rank < f.rows() {
        return Ok(false);
    }
    for i in 0..f.rows() {
        if !ring.is_unit(&snf.s.get(i, i)) {
            return Ok(false);
        }
    }
    // injective: f(v) in im(rel_b) implies v in im(rel_a)
    let paired = f.hstack(rel_b)?;
    let ker = kernel(ring, &paired);
    let rel_a_snf = smith_normal_form(ring, rel_a);
    for j in 0..ker.cols() {
        let col = ker.column(j);
        let v: Vec<Scalar> = col[..f.cols()].to_vec();
        if v.iter().all(|x| x.is_zero()) {
            continue;
        }
        if solve_with(ring, &rel_a_snf, rel_a.cols(), &v)?.is_none() {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_snf(ring: &Ring, m: &Matrix) -> SnfResult {
        let snf = smith_normal_form(ring, m);
        let umv = snf.u.mul(ring, m).unwrap().mul(ring, &snf.v).unwrap();
        assert_eq!(umv, snf.s, "U*M*V = S violated");
        let id_r = Matrix::identity(m.rows(), ring);
        let id_c = Matrix::identity(m.cols(), ring);
        assert_eq!(snf.u.mul(ring, &snf.u_inv).unwrap(), id_r);
        assert_eq!(snf.v.mul(ring, &snf.v_inv).unwrap(), id_c);
        // divisibility chain
        for i in 1..snf.rank {
            let prev = snf.s.get(i - 1, i - 1);
            let cur = snf.s.get(i, i);
            assert!(
                ring.divides(&prev, &cur),
                "divisibility chain broken at {i}: {prev} !| {cur}"
            );
        }
        snf
    }

    #[test]
    fn snf_diag_2_3() {
        let r = Ring::integers();
        let m = Matrix::from_rows(&r, &[&[2, 0], &[0, 3]]);
        let snf = check_snf(&r, &m);
        assert_eq!(snf.s.get(0, 0), r.from_i64(1));
        assert_eq!(snf.s.get(1, 1), r.from_i64(6));
    }

    #[test]
    fn snf_2468() {
        let r = Ring::integers();
        let m = Matrix::from_rows(&r, &[&[2, 4], &[6, 8]]);
        let snf = check_snf(&r, &m);
        assert_eq!(snf.s.get(0, 0), r.from_i64(2));
        assert_eq!(snf.s.get(1, 1), r.from_i64(4));
    }

    #[test]
    fn snf_identity() {
        let r = Ring::integers();
        let m = Matrix::identity(3, &r);
        let snf = check_snf(&r, &m);
        assert_eq!(snf.s, m);
    }

    #[test]
    fn snf_rejects_fields() {
        let r = Ring::rationals();
        let m = Matrix::identity(2, &r);
        assert!(smith_normal_form_checked(&r, &m).is_err());
    }

    #[test]
    fn snf_p_local() {
        let r = Ring::p_local(5).unwrap();
        // 2 is a unit in Z_(5), so diag(2, 25) normalizes to diag(1, 25)
        let m = Matrix::from_rows(&r, &[&[2, 0], &[0, 25]]);
        let snf = check_snf(&r, &m);
        assert_eq!(snf.s.get(0, 0), r.from_i64(1));
        assert_eq!(snf.s.get(1, 1), r.from_i64(25));
    }

    #[test]
    fn solve_examples() {
        let r = Ring::integers();
        let m = Matrix::from_rows(&r, &[&[5]]);
        assert_eq!(
            solve(&r, &m, &[r.from_i64(5)]).unwrap(),
            Some(vec![r.from_i64(1)])
        );
        assert_eq!(solve(&r, &m, &[r.from_i64(1)]).unwrap(), None);
        let q = Ring::rationals();
        let mq = Matrix::from_rows(&q, &[&[5]]);
        let sol = solve(&q, &mq, &[q.from_i64(1)]).unwrap().unwrap();
        assert_eq!(sol[0], q.normalize(num::BigRational::new(1.into(), 5.into())));
    }

    #[test]
    fn solve_verifies() {
        let r = Ring::integers();
        let m = Matrix::from_rows(&r, &[&[2, 4, 1], &[6, 8, 0]]);
        let b = vec![r.from_i64(3), r.from_i64(14)];
        let x = solve(&r, &m, &b).unwrap().unwrap();
        assert_eq!(m.mul_vec(&r, &x).unwrap(), b);
    }

    #[test]
    fn homology_zp() {
        // Z --(*5)--> Z --0--> 0
        let r = Ring::integers();
        let d_in = Matrix::from_rows(&r, &[&[5]]);
        let d_out = Matrix::zero(0, 1);
        let h = homology_at(&r, &d_in, &d_out).unwrap();
        assert_eq!(h.free_rank, 0);
        assert_eq!(h.torsion, vec![r.from_i64(5)]);
    }

    #[test]
    fn homology_exact_over_q() {
        let q = Ring::rationals();
        let d_in = Matrix::from_rows(&q, &[&[1, 0], &[0, 0]]);
        let d_out = Matrix::from_rows(&q, &[&[0, 0], &[0, 1]]);
        let h = homology_at(&q, &d_in, &d_out).unwrap();
        assert!(h.is_zero());
    }

    #[test]
    fn homology_composite_must_vanish() {
        let r = Ring::integers();
        let d_in = Matrix::from_rows(&r, &[&[1]]);
        let d_out = Matrix::from_rows(&r, &[&[1]]);
        assert!(homology_at(&r, &d_in, &d_out).is_err());
    }
}
