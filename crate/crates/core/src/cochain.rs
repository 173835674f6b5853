//! The trigraded cochain spaces C^{n,i}_k(A,B) and their sign calculus:
//! suspension transforms, the composition product, the Lie bracket, the
//! pairing <f,g>, the # operator, and a brute-force suspension oracle that
//! recomputes every insertion sign by literally composing suspension maps.
//!
//! A cochain f in C^{n,i}_k maps (A^(x)n)^v_u -> B^{v+i}_{u-k}; its total
//! degree is n + i + k. Endo-cochains have B = A; morphism components and
//! bimodule cochains use a distinct target.

use std::collections::BTreeMap;
use std::sync::Arc;

use num::traits::Zero;

use crate::bigraded::{shift_module, vect_add, vect_merge, Bidegree, BigradedModule, ModuleRef, Vect};
use crate::error::EngineError;
use crate::matrix::Matrix;
use crate::ring::{Ring, Scalar};

/// Column convention: whether source tuples containing the strict unit are
/// part of the stored basis (Full) or excluded (Normalized).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Convention {
    Full,
    Normalized,
}

impl Convention {
    pub fn skip_unit(&self) -> bool {
        matches!(self, Convention::Normalized)
    }
}

#[derive(Debug, Clone)]
pub struct Block {
    pub tuples: Vec<Vec<usize>>,
    /// target.rank() x tuples.len(); rows outside the target slot stay zero.
    pub mat: Matrix,
}

#[derive(Debug, Clone)]
pub struct MultiCochain {
    /// Module supplying the source tuples A^(x)n.
    pub source: ModuleRef,
    /// Module receiving values; equals `source` for endo-cochains.
    pub target: ModuleRef,
    pub arity: usize,
    pub hshift: i64,
    pub vshift: i64,
    pub convention: Convention,
    pub blocks: BTreeMap<Bidegree, Block>,
}

pub fn modules_compatible(a: &ModuleRef, b: &ModuleRef) -> bool {
    Arc::ptr_eq(a, b) || (a.ring == b.ring && a.basis == b.basis && a.unit == b.unit)
}

pub fn sign_of(exp: i64) -> i64 {
    if exp.rem_euclid(2) == 0 {
        1
    } else {
        -1
    }
}

impl MultiCochain {
    pub fn zero(
        module: &ModuleRef,
        arity: usize,
        hshift: i64,
        vshift: i64,
        convention: Convention,
    ) -> Self {
        Self::zero_map(module, module, arity, hshift, vshift, convention)
    }

    pub fn zero_map(
        source: &ModuleRef,
        target: &ModuleRef,
        arity: usize,
        hshift: i64,
        vshift: i64,
        convention: Convention,
    ) -> Self {
        MultiCochain {
            source: source.clone(),
            target: target.clone(),
            arity,
            hshift,
            vshift,
            convention,
            blocks: BTreeMap::new(),
        }
    }

    pub fn is_endo(&self) -> bool {
        modules_compatible(&self.source, &self.target)
    }

    pub fn ring(&self) -> Ring {
        self.source.ring
    }

    pub fn total_degree(&self) -> i64 {
        self.arity as i64 + self.hshift + self.vshift
    }

    /// Bidegree in the bigraded-Lie-algebra grading: (k, n+i-1).
    pub fn lie_bidegree(&self) -> (i64, i64) {
        (self.hshift, self.arity as i64 + self.vshift - 1)
    }

    pub fn target_slot(&self, source: Bidegree) -> Bidegree {
        Bidegree::new(source.h - self.hshift, source.v + self.vshift)
    }

    fn ensure_block(&mut self, slot: Bidegree) -> &mut Block {
        let source = self.source.clone();
        let target_rank = self.target.rank();
        let arity = self.arity;
        let skip = self.convention.skip_unit();
        self.blocks.entry(slot).or_insert_with(|| {
            let tuples = source.tuples_in_slot(arity, slot, skip);
            let mat = Matrix::zero(target_rank, tuples.len());
            Block { tuples, mat }
        })
    }

    pub fn set_value(
        &mut self,
        tuple: &[usize],
        target: usize,
        c: Scalar,
    ) -> Result<(), EngineError> {
        if tuple.len() != self.arity {
            return Err(EngineError::Dimension("set_value: arity mismatch".into()));
        }
        let slot = self.source.tuple_degree(tuple);
        let want = self.target_slot(slot);
        if want.h < 0 {
            // negative horizontal targets are structurally zero, not errors
            return Ok(());
        }
        if self.target.degree(target) != want {
            return Err(EngineError::BidegreeMismatch(format!(
                "cochain of shift ({},{}) cannot send a tuple at {} to {} at {}",
                self.hshift,
                self.vshift,
                slot,
                self.target.name(target),
                self.target.degree(target)
            )));
        }
        if self.convention.skip_unit() && tuple.iter().any(|&i| self.source.is_unit_index(i)) {
            return Err(EngineError::Precondition(
                "normalized cochain cannot take values on unit tuples".into(),
            ));
        }
        let block = self.ensure_block(slot);
        let col = block
            .tuples
            .binary_search_by(|t| t.as_slice().cmp(tuple))
            .map_err(|_| EngineError::Precondition("tuple not enumerable in slot".into()))?;
        block.mat.set(target, col, c);
        Ok(())
    }

    pub fn add_value(
        &mut self,
        tuple: &[usize],
        target: usize,
        c: &Scalar,
    ) -> Result<(), EngineError> {
        if c.is_zero() {
            return Ok(());
        }
        let slot = self.source.tuple_degree(tuple);
        if self.target_slot(slot).h < 0 {
            return Ok(());
        }
        let ring = self.ring();
        let cur = self
            .apply(tuple)
            .get(&target)
            .cloned()
            .unwrap_or_else(|| ring.zero());
        self.set_value(tuple, target, ring.add(&cur, c))
    }

    /// Evaluate on a basis tuple. Normalized cochains vanish on unit tuples;
    /// everything vanishes into negative horizontal degree.
    pub fn apply(&self, tuple: &[usize]) -> Vect {
        debug_assert_eq!(tuple.len(), self.arity);
        if self.convention.skip_unit() && tuple.iter().any(|&i| self.source.is_unit_index(i)) {
            return Vect::new();
        }
        let slot = self.source.tuple_degree(tuple);
        let Some(block) = self.blocks.get(&slot) else {
            return Vect::new();
        };
        let Ok(col) = block.tuples.binary_search_by(|t| t.as_slice().cmp(tuple)) else {
            return Vect::new();
        };
        let mut out = Vect::new();
        for (&(r, c), v) in block.mat.entries() {
            if c == col {
                out.insert(r, v.clone());
            }
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.blocks.values().all(|b| b.mat.is_zero())
    }

    pub fn scale(&self, c: &Scalar) -> MultiCochain {
        let ring = self.ring();
        let mut out = self.clone();
        for b in out.blocks.values_mut() {
            b.mat = b.mat.scale(&ring, c);
        }
        out
    }

    pub fn negate(&self) -> MultiCochain {
        self.scale(&self.ring().from_i64(-1))
    }

    /// The # operator: f^# = (-1)^k f.
    pub fn hash_op(&self) -> MultiCochain {
        if self.hshift.rem_euclid(2) == 0 {
            self.clone()
        } else {
            self.negate()
        }
    }

    /// Re-store under the full column convention (normalized cochains embed
    /// with zero values on unit tuples).
    pub fn to_full(&self) -> MultiCochain {
        if self.convention == Convention::Full {
            return self.clone();
        }
        let mut out = MultiCochain::zero_map(
            &self.source,
            &self.target,
            self.arity,
            self.hshift,
            self.vshift,
            Convention::Full,
        );
        for (_, tuple, target, val) in self.iter_values() {
            out.set_value(&tuple, target, val).expect("embedding into full");
        }
        out
    }

    pub fn add(&self, other: &MultiCochain) -> Result<MultiCochain, EngineError> {
        if !modules_compatible(&self.source, &other.source)
            || !modules_compatible(&self.target, &other.target)
        {
            return Err(EngineError::ModuleMismatch);
        }
        if self.convention != other.convention {
            return self.to_full().add(&other.to_full());
        }
        if self.arity != other.arity
            || self.hshift != other.hshift
            || self.vshift != other.vshift
        {
            return Err(EngineError::BidegreeMismatch(
                "cannot add cochains of different shape".into(),
            ));
        }
        let ring = self.ring();
        let mut out = self.clone();
        for (slot, block) in &other.blocks {
            let mine = out.ensure_block(*slot);
            mine.mat = mine.mat.add(&ring, &block.mat)?;
        }
        Ok(out)
    }

    pub fn sub(&self, other: &MultiCochain) -> Result<MultiCochain, EngineError> {
        self.add(&other.negate())
    }

    pub fn eq_cochain(&self, other: &MultiCochain) -> bool {
        if self.arity != other.arity || self.hshift != other.hshift || self.vshift != other.vshift
        {
            return false;
        }
        match self.sub(other) {
            Ok(d) => d.is_zero(),
            Err(_) => false,
        }
    }

    /// All (slot, tuple, target, coefficient) quadruples, deterministic order.
    pub fn iter_values(&self) -> Vec<(Bidegree, Vec<usize>, usize, Scalar)> {
        let mut out = Vec::new();
        for (slot, block) in &self.blocks {
            for (&(r, c), v) in block.mat.entries() {
                out.push((*slot, block.tuples[c].clone(), r, v.clone()));
            }
        }
        out
    }
}

/// <f,g> := (n+i-1)(m+j-1) + k*l, reduced mod 2.
pub fn koszul_pairing(f: &MultiCochain, g: &MultiCochain) -> i64 {
    koszul_pairing_raw(
        f.arity as i64,
        f.vshift,
        f.hshift,
        g.arity as i64,
        g.vshift,
        g.hshift,
    )
}

pub fn koszul_pairing_raw(n: i64, i: i64, k: i64, m: i64, j: i64, l: i64) -> i64 {
    ((n + i - 1) * (m + j - 1) + k * l).rem_euclid(2)
}

/// Plain insertion f(1^(x)v (x) g (x) 1^(x)(n-v-1)) evaluated on a tuple,
/// with only the Koszul sign for carrying g past the first v factors.
/// Requires g to be an endo-cochain on f's source.
pub fn insertion_apply(
    f: &MultiCochain,
    g: &MultiCochain,
    v: usize,
    tuple: &[usize],
) -> Result<Vect, EngineError> {
    let n = f.arity;
    let m = g.arity;
    if v + 1 > n {
        return Err(EngineError::Precondition("insertion slot out of range".into()));
    }
    if tuple.len() + 1 != n + m {
        return Err(EngineError::Dimension("insertion arity mismatch".into()));
    }
    let module = &f.source;
    let ring = f.ring();
    let prefix = &tuple[..v];
    let mid = &tuple[v..v + m];
    let suffix = &tuple[v + m..];
    let mut sign = 0i64;
    for &a in prefix {
        sign += module.degree(a).koszul(g.hshift, g.vshift);
    }
    let gval = g.apply(mid);
    let mut out = Vect::new();
    let factor = ring.from_i64(sign_of(sign));
    for (idx, c) in gval {
        let mut t2 = Vec::with_capacity(n);
        t2.extend_from_slice(prefix);
        t2.push(idx);
        t2.extend_from_slice(suffix);
        let fv = f.apply(&t2);
        vect_merge(&ring, &mut out, &fv, &ring.mul(&c, &factor));
    }
    Ok(out)
}

/// (f o g)(tuple): the composition product evaluated on one tuple.
pub fn compose_apply(
    f: &MultiCochain,
    g: &MultiCochain,
    tuple: &[usize],
) -> Result<Vect, EngineError> {
    let ring = f.ring();
    let n = f.arity as i64;
    let m = g.arity as i64;
    let j = g.vshift;
    let mut out = Vect::new();
    for v in 0..f.arity {
        let exp = (m - 1) * (n - 1) + (v as i64) * (m - 1) + j * (n - 1);
        let term = insertion_apply(f, g, v, tuple)?;
        vect_merge(&ring, &mut out, &term, &ring.from_i64(sign_of(exp)));
    }
    Ok(out)
}

/// [f,g](tuple) = (f o g - (-1)^{<f,g>} g o f)(tuple).
pub fn bracket_apply(
    f: &MultiCochain,
    g: &MultiCochain,
    tuple: &[usize],
) -> Result<Vect, EngineError> {
    let ring = f.ring();
    let mut out = compose_apply(f, g, tuple)?;
    let gf = compose_apply(g, f, tuple)?;
    let s = ring.from_i64(-sign_of(koszul_pairing(f, g)));
    vect_merge(&ring, &mut out, &gf, &s);
    Ok(out)
}

/// Source slots worth materializing for a result of the given shape: those
/// whose target slot is occupied by some basis element.
pub fn feasible_source_slots(
    source: &ModuleRef,
    target: &ModuleRef,
    hshift: i64,
    vshift: i64,
) -> Vec<Bidegree> {
    let mut slots: Vec<Bidegree> = target
        .occupied_degrees()
        .iter()
        .map(|d| Bidegree::new(d.h + hshift, d.v - vshift))
        .filter(|s| s.h >= 0)
        .collect();
    let _ = source;
    slots.sort();
    slots.dedup();
    slots
}

/// Materialize an arbitrary per-tuple evaluator as a stored cochain.
pub fn materialize<F>(
    source: &ModuleRef,
    target: &ModuleRef,
    arity: usize,
    hshift: i64,
    vshift: i64,
    convention: Convention,
    mut eval: F,
) -> Result<MultiCochain, EngineError>
where
    F: FnMut(&[usize]) -> Result<Vect, EngineError>,
{
    let mut out = MultiCochain::zero_map(source, target, arity, hshift, vshift, convention);
    for slot in feasible_source_slots(source, target, hshift, vshift) {
        for tuple in source.tuples_in_slot(arity, slot, convention.skip_unit()) {
            let val = eval(&tuple)?;
            for (idx, c) in val {
                out.set_value(&tuple, idx, c)?;
            }
        }
    }
    Ok(out)
}

/// The composition product f o g as a stored cochain.
pub fn insert_product(
    f: &MultiCochain,
    g: &MultiCochain,
    convention: Convention,
) -> Result<MultiCochain, EngineError> {
    if !modules_compatible(&f.source, &g.source) || !g.is_endo() {
        return Err(EngineError::ModuleMismatch);
    }
    let arity = f.arity + g.arity - 1;
    materialize(
        &f.source,
        &f.target,
        arity,
        f.hshift + g.hshift,
        f.vshift + g.vshift,
        convention,
        |t| compose_apply(f, g, t),
    )
}

/// The Lie bracket [f,g] as a stored cochain.
pub fn bracket(
    f: &MultiCochain,
    g: &MultiCochain,
    convention: Convention,
) -> Result<MultiCochain, EngineError> {
    if !modules_compatible(&f.source, &g.source) || !f.is_endo() || !g.is_endo() {
        return Err(EngineError::ModuleMismatch);
    }
    if f.arity == 0 && g.arity == 0 {
        return Ok(MultiCochain::zero(
            &f.source,
            0,
            f.hshift + g.hshift,
            f.vshift + g.vshift,
            convention,
        ));
    }
    let arity = f.arity + g.arity - 1;
    materialize(
        &f.source,
        &f.source,
        arity,
        f.hshift + g.hshift,
        f.vshift + g.vshift,
        convention,
        |t| bracket_apply(f, g, t),
    )
}

fn resign_blocks(
    template: &MultiCochain,
    slot_shift: i64,
    degree_of: impl Fn(usize) -> i64,
    global: i64,
    new_vshift: i64,
    new_source: &ModuleRef,
    new_target: &ModuleRef,
) -> MultiCochain {
    let ring = template.ring();
    let n = template.arity as i64;
    let mut out = MultiCochain {
        source: new_source.clone(),
        target: new_target.clone(),
        arity: template.arity,
        hshift: template.hshift,
        vshift: new_vshift,
        convention: template.convention,
        blocks: BTreeMap::new(),
    };
    for (slot, block) in &template.blocks {
        let new_slot = Bidegree::new(slot.h, slot.v + slot_shift);
        let mut mat = Matrix::zero(block.mat.rows(), block.mat.cols());
        for (col, tuple) in block.tuples.iter().enumerate() {
            let mut exp = 0i64;
            for (a, &x) in tuple.iter().enumerate() {
                exp += degree_of(x) * (n - 1 - a as i64);
            }
            let s = ring.from_i64(global * sign_of(exp));
            for (&(r, c), val) in block.mat.entries() {
                if c == col {
                    mat.set(r, c, ring.mul(val, &s));
                }
            }
        }
        out.blocks.insert(
            new_slot,
            Block {
                tuples: block.tuples.clone(),
                mat,
            },
        );
    }
    out
}

/// sigma(f) = (-1)^{n+i+k-1} S o f o (S^-1)^(x)n over the shifted module.
pub fn sigma(f: &MultiCochain, shifted: &ModuleRef) -> MultiCochain {
    assert!(f.is_endo(), "sigma acts on endo-cochains");
    let n = f.arity as i64;
    let global = sign_of(n + f.vshift + f.hshift - 1);
    let sh = shifted.clone();
    resign_blocks(
        f,
        -n,
        move |x| sh.degree(x).v,
        global,
        f.vshift + n - 1,
        shifted,
        shifted,
    )
}

/// sigma^-1(F) = (-1)^{j+l+binom(m,2)} S^-1 o F o S^(x)m back over the base.
pub fn sigma_inv(f: &MultiCochain, base: &ModuleRef) -> MultiCochain {
    assert!(f.is_endo(), "sigma_inv acts on endo-cochains");
    let m = f.arity as i64;
    let binom = m * (m - 1) / 2;
    let global = sign_of(f.vshift + f.hshift + binom);
    let b = base.clone();
    resign_blocks(
        f,
        m,
        move |x| b.degree(x).v,
        global,
        f.vshift + 1 - m,
        base,
        base,
    )
}

/// A finite formal sum of cochains, keyed by (arity, k, i).
#[derive(Debug, Clone, Default)]
pub struct CochainSum {
    pub parts: BTreeMap<(usize, i64, i64), MultiCochain>,
}

impl CochainSum {
    pub fn new() -> Self {
        CochainSum {
            parts: BTreeMap::new(),
        }
    }

    pub fn from_parts(parts: Vec<MultiCochain>) -> Result<Self, EngineError> {
        let mut out = CochainSum::new();
        for p in parts {
            out.add_part(p)?;
        }
        Ok(out)
    }

    pub fn add_part(&mut self, c: MultiCochain) -> Result<(), EngineError> {
        let key = (c.arity, c.hshift, c.vshift);
        match self.parts.remove(&key) {
            None => {
                self.parts.insert(key, c);
            }
            Some(prev) => {
                self.parts.insert(key, prev.add(&c)?);
            }
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.parts.values().all(|c| c.is_zero())
    }

    pub fn negate(&self) -> CochainSum {
        CochainSum {
            parts: self.parts.iter().map(|(k, c)| (*k, c.negate())).collect(),
        }
    }

    pub fn add(&self, other: &CochainSum) -> Result<CochainSum, EngineError> {
        let mut out = self.clone();
        for c in other.parts.values() {
            out.add_part(c.clone())?;
        }
        Ok(out)
    }

    pub fn sub(&self, other: &CochainSum) -> Result<CochainSum, EngineError> {
        self.add(&other.negate())
    }

    pub fn nonzero_keys(&self) -> Vec<(usize, i64, i64)> {
        self.parts
            .iter()
            .filter(|(_, c)| !c.is_zero())
            .map(|(k, _)| *k)
            .collect()
    }
}

/// Brute-force insertion sign: evaluates sigma^-1(sigma(f)(1^v (x) sigma(g)
/// (x) 1^{n-v-1})) by composing honest suspension maps on a probe tuple, and
/// compares against the plain insertion. Returns the sign exponent mod 2.
#[allow(clippy::too_many_arguments)]
pub fn brute_force_sign(
    n: usize,
    m: usize,
    v: usize,
    i: i64,
    j: i64,
    k: i64,
    l: i64,
    verticals: &[i64],
) -> Result<i64, EngineError> {
    if v >= n {
        return Err(EngineError::Precondition("slot v out of range".into()));
    }
    let total = n + m - 1;
    assert_eq!(verticals.len(), total);
    let ring = Ring::rationals();
    // probe elements at distinct generic bidegrees; horizontals big enough
    // that no target truncates to negative horizontal degree
    let mut basis: Vec<(String, Bidegree)> = (0..total)
        .map(|a| (format!("x{a}"), Bidegree::new(8 + a as i64, verticals[a])))
        .collect();
    let mid_deg: Bidegree = (v..v + m).fold(Bidegree::new(0, 0), |acc, a| {
        acc.add(&Bidegree::new(8 + a as i64, verticals[a]))
    });
    let zg_deg = Bidegree::new(mid_deg.h - l, mid_deg.v + j);
    basis.push(("zg".into(), zg_deg));
    let outer_deg = (0..total)
        .filter(|a| *a < v || *a >= v + m)
        .fold(zg_deg, |acc, a| acc.add(&Bidegree::new(8 + a as i64, verticals[a])));
    let zf_deg = Bidegree::new(outer_deg.h - k, outer_deg.v + i);
    basis.push(("zf".into(), zf_deg));
    let module = BigradedModule::new(ring, basis, None)?;
    let zg = module.index_of("zg").unwrap();
    let zf = module.index_of("zf").unwrap();

    let tuple: Vec<usize> = (0..total).collect();
    let mid: Vec<usize> = (v..v + m).collect();
    let mut f_input: Vec<usize> = (0..v).collect();
    f_input.push(zg);
    f_input.extend(v + m..total);

    let mut g = MultiCochain::zero(&module, m, l, j, Convention::Full);
    g.set_value(&mid, zg, ring.one())?;
    let mut f = MultiCochain::zero(&module, n, k, i, Convention::Full);
    f.set_value(&f_input, zf, ring.one())?;

    // plain insertion (Koszul only)
    let plain = insertion_apply(&f, &g, v, &tuple)?;
    let plain_c = plain
        .get(&zf)
        .cloned()
        .ok_or_else(|| EngineError::Precondition("probe vanished".into()))?;

    // suspension route
    let shifted = shift_module(&module);
    let sf = sigma(&f, &shifted);
    let sg = sigma(&g, &shifted);
    // apply S^(x)total to the tuple: Koszul among the S copies
    let mut exp_in = 0i64;
    for (a, &x) in tuple.iter().enumerate() {
        exp_in += module.degree(x).v * (total as i64 - 1 - a as i64);
    }
    let inner = insertion_apply(&sf, &sg, v, &tuple)?;
    // composite shape in shifted land
    let comp_v = (i + n as i64 - 1) + (j + m as i64 - 1);
    let comp_h = k + l;
    let binom = (total as i64) * (total as i64 - 1) / 2;
    let global = sign_of(comp_v + comp_h + binom);
    let factor = ring.from_i64(global * sign_of(exp_in));
    let mut lifted = Vect::new();
    for (idx, c) in inner {
        vect_add(&ring, &mut lifted, idx, &ring.mul(&c, &factor));
    }
    let susp_c = lifted
        .get(&zf)
        .cloned()
        .ok_or_else(|| EngineError::Precondition("suspension probe vanished".into()))?;

    let ratio = ring.div_exact(&susp_c, &plain_c);
    if ratio == ring.one() {
        Ok(0)
    } else if ratio == ring.from_i64(-1) {
        Ok(1)
    } else {
        Err(EngineError::Precondition(format!(
            "non-sign ratio {ratio} in brute_force_sign"
        )))
    }
}

/// The Appendix closed form (n-1)(m-1) + v(m-1) + j(n-1), mod 2.
pub fn insertion_sign_closed_form(n: usize, m: usize, v: usize, j: i64) -> i64 {
    ((n as i64 - 1) * (m as i64 - 1) + (v as i64) * (m as i64 - 1) + j * (n as i64 - 1))
        .rem_euclid(2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bigraded::BigradedModule;

    fn f5_dual_numbers() -> ModuleRef {
        // F5[x]/(x^2) as a graded algebra concentrated in degree 0
        BigradedModule::new(
            Ring::prime_field(5).unwrap(),
            vec![
                ("1".into(), Bidegree::new(0, 0)),
                ("x".into(), Bidegree::new(0, 0)),
            ],
            Some("1"),
        )
        .unwrap()
    }

    fn mu(module: &ModuleRef) -> MultiCochain {
        let ring = module.ring;
        let one = module.index_of("1").unwrap();
        let x = module.index_of("x").unwrap();
        let mut m = MultiCochain::zero(module, 2, 0, 0, Convention::Full);
        m.set_value(&[one, one], one, ring.one()).unwrap();
        m.set_value(&[one, x], x, ring.one()).unwrap();
        m.set_value(&[x, one], x, ring.one()).unwrap();
        // x*x = 0
        m
    }

    #[test]
    fn koszul_pairing_examples() {
        let m = f5_dual_numbers();
        let f = MultiCochain::zero(&m, 2, 0, 0, Convention::Full);
        let g = MultiCochain::zero(&m, 1, 0, 0, Convention::Full);
        assert_eq!(koszul_pairing(&f, &f), 1);
        assert_eq!(koszul_pairing(&f, &g), 0);
        let h = MultiCochain::zero(&m, 1, 1, -1, Convention::Full);
        assert_eq!(koszul_pairing(&h, &f), 1);
    }

    #[test]
    fn mu_associativity_via_composition() {
        let module = f5_dual_numbers();
        let m2 = mu(&module);
        // mu o mu = mu(1 (x) mu) - mu(mu (x) 1) = 0 for associative mu
        let comp = insert_product(&m2, &m2, Convention::Full).unwrap();
        assert!(comp.is_zero());
        let br = bracket(&m2, &m2, Convention::Full).unwrap();
        assert!(br.is_zero());
    }

    #[test]
    fn identity_insertion_counts_slots() {
        let module = f5_dual_numbers();
        let m2 = mu(&module);
        let id = {
            let mut c = MultiCochain::zero(&module, 1, 0, 0, Convention::Full);
            for i in 0..module.rank() {
                c.set_value(&[i], i, module.ring.one()).unwrap();
            }
            c
        };
        // f o id = n * f when (m,j,l) = (1,0,0)
        let comp = insert_product(&m2, &id, Convention::Full).unwrap();
        let doubled = m2.scale(&module.ring.from_i64(2));
        assert!(comp.eq_cochain(&doubled));
        // [mu, id] = mu: insertion terms give 2*mu, the mirror term removes one
        let br = bracket(&m2, &id, Convention::Full).unwrap();
        assert!(br.eq_cochain(&m2));
    }

    #[test]
    fn sigma_round_trip() {
        let module = f5_dual_numbers();
        let m2 = mu(&module);
        let shifted = shift_module(&module);
        let s = sigma(&m2, &shifted);
        assert_eq!(s.vshift, 1);
        assert_eq!(s.arity, 2);
        let back = sigma_inv(&s, &module);
        assert!(back.eq_cochain(&m2));
        // global prefactor of sigma on an m02-type map is (-1)^{2+0+0-1} = -1;
        // on the probe (1,1) the (S^-1)^(x)2 Koszul sign contributes another
        // -1, so sigma(mu)(s1 (x) s1) = +s1, matching b_2(sx,sy) = (-1)^{|x|} s mu(x,y)
        let one = module.index_of("1").unwrap();
        let plain = m2.apply(&[one, one]);
        let shifted_val = s.apply(&[one, one]);
        let r = module.ring;
        assert_eq!(plain.get(&one), Some(&r.one()));
        assert_eq!(shifted_val.get(&one), Some(&r.one()));
    }

    #[test]
    fn hash_involution() {
        let module = f5_dual_numbers();
        let f = mu(&module);
        assert!(f.hash_op().eq_cochain(&f));
        assert!(f.hash_op().hash_op().eq_cochain(&f));
    }

    #[test]
    fn brute_force_matches_closed_form_spot() {
        // n=m=1, v=0: no interchanges
        let s = brute_force_sign(1, 1, 0, 0, 0, 0, 0, &[1]).unwrap();
        assert_eq!(s, insertion_sign_closed_form(1, 1, 0, 0));
        // n=2, m=2, v=0, j=0: exponent 1
        let s = brute_force_sign(2, 2, 0, 0, 0, 0, 0, &[1, -2, 3]).unwrap();
        assert_eq!(s, 1);
        assert_eq!(insertion_sign_closed_form(2, 2, 0, 0), 1);
    }
}
