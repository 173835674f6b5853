//! (N,Z)-bigraded modules with named finite bases, graded maps with the
//! bidegree convention A^j_i -> B^{j+t}_{i-s}, tensor powers, the shift S and
//! element-level Koszul-sign evaluation.
//!
//! The Koszul rule: a map of bidegree (s,t) passing an element of bidegree
//! (i,j) picks up the sign (-1)^{is+jt}.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::error::EngineError;
use crate::matrix::Matrix;
use crate::ring::{Ring, Scalar};
use num::traits::Zero;

/// Horizontal (natural) and vertical (integer) degree. Module basis elements
/// must have horizontal >= 0; map shifts may be arbitrary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Bidegree {
    pub h: i64,
    pub v: i64,
}

impl Bidegree {
    pub fn new(h: i64, v: i64) -> Self {
        Bidegree { h, v }
    }

    pub fn add(&self, other: &Bidegree) -> Bidegree {
        Bidegree::new(self.h + other.h, self.v + other.v)
    }

    /// Koszul pairing exponent of an element of this bidegree against a map
    /// of bidegree (s,t): i*s + j*t.
    pub fn koszul(&self, map_h: i64, map_v: i64) -> i64 {
        self.h * map_h + self.v * map_v
    }
}

impl fmt::Display for Bidegree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.h, self.v)
    }
}

#[derive(Debug, Clone)]
pub struct BigradedModule {
    pub ring: Ring,
    pub basis: Vec<(String, Bidegree)>,
    pub unit: Option<usize>,
    name_index: BTreeMap<String, usize>,
}

pub type ModuleRef = Arc<BigradedModule>;

impl BigradedModule {
    pub fn new(
        ring: Ring,
        basis: Vec<(String, Bidegree)>,
        unit: Option<&str>,
    ) -> Result<ModuleRef, EngineError> {
        let mut name_index = BTreeMap::new();
        for (i, (name, deg)) in basis.iter().enumerate() {
            if deg.h < 0 {
                return Err(EngineError::BidegreeMismatch(format!(
                    "basis element {name} has negative horizontal degree {}",
                    deg.h
                )));
            }
            if name_index.insert(name.clone(), i).is_some() {
                return Err(EngineError::Precondition(format!(
                    "duplicate basis name {name}"
                )));
            }
        }
        let unit = match unit {
            None => None,
            Some(u) => {
                let idx = *name_index.get(u).ok_or_else(|| {
                    EngineError::Precondition(format!("unit {u} not in basis"))
                })?;
                if basis[idx].1 != Bidegree::new(0, 0) {
                    return Err(EngineError::BidegreeMismatch(format!(
                        "unit {u} must sit in bidegree (0,0)"
                    )));
                }
                Some(idx)
            }
        };
        Ok(Arc::new(BigradedModule {
            ring,
            basis,
            unit,
            name_index,
        }))
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    pub fn degree(&self, i: usize) -> Bidegree {
        self.basis[i].1
    }

    pub fn name(&self, i: usize) -> &str {
        &self.basis[i].0
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.name_index.get(name).copied()
    }

    pub fn is_unit_index(&self, i: usize) -> bool {
        self.unit == Some(i)
    }

    /// Basis indices sitting in the given bidegree, in basis order.
    pub fn slot(&self, deg: Bidegree) -> Vec<usize> {
        (0..self.rank()).filter(|&i| self.degree(i) == deg).collect()
    }

    pub fn occupied_degrees(&self) -> Vec<Bidegree> {
        let mut ds: Vec<Bidegree> = self.basis.iter().map(|(_, d)| *d).collect();
        ds.sort();
        ds.dedup();
        ds
    }

    /// All tuples (basis index sequences) of the given arity whose bidegrees
    /// sum to `total`, lexicographically ordered. `skip_unit` drops tuples
    /// containing the strict unit (the normalized convention).
    pub fn tuples_in_slot(&self, arity: usize, total: Bidegree, skip_unit: bool) -> Vec<Vec<usize>> {
        let allowed: Vec<usize> = (0..self.rank())
            .filter(|&i| !(skip_unit && self.is_unit_index(i)))
            .collect();
        if allowed.is_empty() && arity > 0 {
            return Vec::new();
        }
        let hmin: i64 = allowed.iter().map(|&i| self.degree(i).h).min().unwrap_or(0);
        let hmax: i64 = allowed.iter().map(|&i| self.degree(i).h).max().unwrap_or(0);
        let vmin: i64 = allowed.iter().map(|&i| self.degree(i).v).min().unwrap_or(0);
        let vmax: i64 = allowed.iter().map(|&i| self.degree(i).v).max().unwrap_or(0);
        let mut out = Vec::new();
        let mut cur = Vec::with_capacity(arity);
        fn rec(
            m: &BigradedModule,
            allowed: &[usize],
            arity: usize,
            total: Bidegree,
            acc: Bidegree,
            bounds: (i64, i64, i64, i64),
            cur: &mut Vec<usize>,
            out: &mut Vec<Vec<usize>>,
        ) {
            let remaining = (arity - cur.len()) as i64;
            if remaining == 0 {
                if acc == total {
                    out.push(cur.clone());
                }
                return;
            }
            let (hmin, hmax, vmin, vmax) = bounds;
            let need_h = total.h - acc.h;
            let need_v = total.v - acc.v;
            if need_h < remaining * hmin || need_h > remaining * hmax {
                return;
            }
            if need_v < remaining * vmin || need_v > remaining * vmax {
                return;
            }
            for &i in allowed {
                cur.push(i);
                rec(m, allowed, arity, total, acc.add(&m.degree(i)), bounds, cur, out);
                cur.pop();
            }
        }
        rec(
            self,
            &allowed,
            arity,
            total,
            Bidegree::new(0, 0),
            (hmin, hmax, vmin, vmax),
            &mut cur,
            &mut out,
        );
        out
    }

    /// Bidegree of a basis tuple (componentwise sum).
    pub fn tuple_degree(&self, tuple: &[usize]) -> Bidegree {
        tuple
            .iter()
            .fold(Bidegree::new(0, 0), |acc, &i| acc.add(&self.degree(i)))
    }
}

/// A sparse vector over a module's basis.
pub type Vect = BTreeMap<usize, Scalar>;

pub fn vect_add(ring: &Ring, a: &mut Vect, idx: usize, c: &Scalar) {
    if c.is_zero() {
        return;
    }
    let cur = a.get(&idx).cloned().unwrap_or_else(|| ring.zero());
    let s = ring.add(&cur, c);
    if s.is_zero() {
        a.remove(&idx);
    } else {
        a.insert(idx, s);
    }
}

pub fn vect_merge(ring: &Ring, a: &mut Vect, b: &Vect, scale: &Scalar) {
    for (&i, c) in b {
        vect_add(ring, a, i, &ring.mul(c, scale));
    }
}

/// A graded map between modules, of a fixed bidegree (s,t); blocks stored as
/// one sparse matrix over full bases (small modules keep this cheap).
#[derive(Debug, Clone)]
pub struct GradedMap {
    pub source: ModuleRef,
    pub target: ModuleRef,
    pub shift: Bidegree, // (s, t): source (i,j) -> target (i-s, j+t)
    pub matrix: Matrix,  // target.rank() x source.rank()
}

impl GradedMap {
    pub fn zero(source: &ModuleRef, target: &ModuleRef, shift: Bidegree) -> Self {
        GradedMap {
            source: source.clone(),
            target: target.clone(),
            shift,
            matrix: Matrix::zero(target.rank(), source.rank()),
        }
    }

    pub fn identity(m: &ModuleRef) -> Self {
        GradedMap {
            source: m.clone(),
            target: m.clone(),
            shift: Bidegree::new(0, 0),
            matrix: Matrix::identity(m.rank(), &m.ring),
        }
    }

    pub fn set(&mut self, src: usize, dst: usize, c: Scalar) -> Result<(), EngineError> {
        let want = Bidegree::new(
            self.source.degree(src).h - self.shift.h,
            self.source.degree(src).v + self.shift.v,
        );
        if self.target.degree(dst) != want {
            return Err(EngineError::BidegreeMismatch(format!(
                "map of bidegree {} cannot send {} at {} to {} at {}",
                self.shift,
                self.source.name(src),
                self.source.degree(src),
                self.target.name(dst),
                self.target.degree(dst)
            )));
        }
        self.matrix.set(dst, src, c);
        Ok(())
    }

    pub fn apply_basis(&self, src: usize) -> Vect {
        let mut out = Vect::new();
        for dst in 0..self.target.rank() {
            let c = self.matrix.get(dst, src);
            if !c.is_zero() {
                out.insert(dst, c);
            }
        }
        out
    }

    pub fn apply(&self, v: &Vect) -> Vect {
        let ring = self.source.ring;
        let mut out = Vect::new();
        for (&i, c) in v {
            let img = self.apply_basis(i);
            vect_merge(&ring, &mut out, &img, c);
        }
        out
    }

    /// Composition self . other (other first).
    pub fn compose(&self, other: &GradedMap) -> Result<GradedMap, EngineError> {
        if !Arc::ptr_eq(&self.source, &other.target) {
            return Err(EngineError::ModuleMismatch);
        }
        Ok(GradedMap {
            source: other.source.clone(),
            target: self.target.clone(),
            shift: self.shift.add(&other.shift),
            matrix: self.matrix.mul(&self.source.ring, &other.matrix)?,
        })
    }
}

/// `tensor_power(A, n)`: the module A^(x)n with tuple basis in lexicographic
/// order and componentwise-summed bidegrees.
pub fn tensor_power(a: &ModuleRef, n: usize) -> Result<ModuleRef, EngineError> {
    if n == 0 {
        return Err(EngineError::Precondition("tensor_power needs n >= 1".into()));
    }
    let mut basis = Vec::new();
    let mut idx = vec![0usize; n];
    'outer: loop {
        let name = idx
            .iter()
            .map(|&i| a.name(i).to_string())
            .collect::<Vec<_>>()
            .join("(x)");
        basis.push((name, a.tuple_degree(&idx)));
        let mut pos = n;
        while pos > 0 {
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < a.rank() {
                continue 'outer;
            }
            idx[pos] = 0;
        }
        break;
    }
    BigradedModule::new(a.ring, basis, None)
}

/// Evaluate (f_1 (x) ... (x) f_r)(x_1 (x) ... (x) x_r) where map l consumes
/// `arities[l]` consecutive factors. Returns the per-factor images and the
/// accumulated Koszul sign: map l passes every element consumed by maps
/// before it.
pub fn tensor_sign(maps: &[(i64, i64)], groups: &[Bidegree]) -> i64 {
    assert_eq!(maps.len(), groups.len());
    let mut sign = 0i64;
    for (l, &(s, t)) in maps.iter().enumerate() {
        for g in groups.iter().take(l) {
            sign += g.koszul(s, t);
        }
    }
    sign
}

/// Spec-level `evaluate_tensor_map`: all maps arity 1, applied to a basis
/// tuple; returns the signed tensor image as (sign, per-factor vectors).
pub fn evaluate_tensor_map(
    maps: &[&GradedMap],
    tuple: &[usize],
) -> Result<(i64, Vec<Vect>), EngineError> {
    if maps.len() != tuple.len() {
        return Err(EngineError::Dimension(
            "evaluate_tensor_map: arity mismatch".into(),
        ));
    }
    let src = &maps[0].source;
    let degs: Vec<Bidegree> = tuple.iter().map(|&i| src.degree(i)).collect();
    let shifts: Vec<(i64, i64)> = maps.iter().map(|m| (m.shift.h, m.shift.v)).collect();
    let sign = tensor_sign(&shifts, &degs);
    let imgs = maps
        .iter()
        .zip(tuple.iter())
        .map(|(m, &i)| m.apply_basis(i))
        .collect();
    Ok((sign.rem_euclid(2), imgs))
}

/// The shift S(A): same basis names, each bidegree (u,v) relabeled to
/// (u, v-1), so S(A)^v_u = A^{v+1}_u slot-for-slot.
pub fn shift_module(a: &ModuleRef) -> ModuleRef {
    let basis = a
        .basis
        .iter()
        .map(|(n, d)| (n.clone(), Bidegree::new(d.h, d.v - 1)))
        .collect();
    // the unit loses its (0,0) position under the shift, so S(A) carries none
    BigradedModule::new(a.ring, basis, None).expect("shift preserves validity")
}

/// Suspension map S : A -> S(A), the identity in each slot, of bidegree (0,-1).
pub fn suspension(a: &ModuleRef, sa: &ModuleRef) -> GradedMap {
    GradedMap {
        source: a.clone(),
        target: sa.clone(),
        shift: Bidegree::new(0, -1),
        matrix: Matrix::identity(a.rank(), &a.ring),
    }
}

/// Inverse suspension S^-1 : S(A) -> A, of bidegree (0,1).
pub fn suspension_inv(a: &ModuleRef, sa: &ModuleRef) -> GradedMap {
    GradedMap {
        source: sa.clone(),
        target: a.clone(),
        shift: Bidegree::new(0, 1),
        matrix: Matrix::identity(a.rank(), &a.ring),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ModuleRef {
        BigradedModule::new(
            Ring::rationals(),
            vec![
                ("1".into(), Bidegree::new(0, 0)),
                ("e".into(), Bidegree::new(0, -1)),
            ],
            Some("1"),
        )
        .unwrap()
    }

    #[test]
    fn tensor_power_examples() {
        let a = sample();
        let a1 = tensor_power(&a, 1).unwrap();
        assert_eq!(a1.rank(), a.rank());
        assert_eq!(a1.degree(1), a.degree(1));
        let a2 = tensor_power(&a, 2).unwrap();
        assert_eq!(a2.rank(), 4);
        let ee = a2.index_of("e(x)e").unwrap();
        assert_eq!(a2.degree(ee), Bidegree::new(0, -2));
        assert!(tensor_power(&a, 0).is_err());
    }

    #[test]
    fn koszul_sign_rule() {
        // g of bidegree (1,0) past x of bidegree (1,0): (-1)^{1*1+0*0} = -1
        assert_eq!(
            tensor_sign(&[(0, 0), (1, 0)], &[Bidegree::new(1, 0), Bidegree::new(0, 0)]) % 2,
            1
        );
        // all maps of bidegree (0,0): sign +1
        assert_eq!(
            tensor_sign(
                &[(0, 0), (0, 0), (0, 0)],
                &[Bidegree::new(3, 1), Bidegree::new(2, -5), Bidegree::new(1, 1)]
            ),
            0
        );
    }

    #[test]
    fn shift_relabels() {
        let a = sample();
        let sa = shift_module(&a);
        let e = sa.index_of("e").unwrap();
        assert_eq!(sa.degree(e), Bidegree::new(0, -2));
        let ssa = shift_module(&sa);
        assert_eq!(ssa.degree(e), Bidegree::new(0, -3));
        let s = suspension(&a, &sa);
        assert_eq!(s.shift, Bidegree::new(0, -1));
        let sinv = suspension_inv(&a, &sa);
        let comp = sinv.compose(&s).unwrap();
        assert_eq!(comp.shift, Bidegree::new(0, 0));
        assert_eq!(comp.matrix, Matrix::identity(2, &a.ring));
    }

    #[test]
    fn tuple_enumeration_is_lex_sorted() {
        let a = sample();
        let ts = a.tuples_in_slot(2, Bidegree::new(0, -1), false);
        assert_eq!(ts, vec![vec![0, 1], vec![1, 0]]);
        let norm = a.tuples_in_slot(2, Bidegree::new(0, -1), true);
        assert!(norm.is_empty());
    }
}
