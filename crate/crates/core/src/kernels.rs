//! Packed comparison, diagonal matrix-vector product and balanced aggregation.

use crate::bits::Bits;
use crate::staging::{BitPlanes, DiagMatrix};
use crate::vm::{Kind, PackedVec, Vm, VmError};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum KernelError {
    #[error("precision mismatch: {left} vs {right} bit-planes")]
    PrecisionMismatch { left: usize, right: usize },
    #[error("dimension mismatch: matrix has {expected} columns, vector has {found} slots")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("empty input")]
    EmptyInput,
    #[error(transparent)]
    Vm(#[from] VmError),
}

/// Loads every plane as a ciphertext (one Encrypt each) or as a plaintext.
pub fn load_planes(vm: &Vm, planes: &BitPlanes, kind: Kind) -> Vec<PackedVec> {
    planes
        .planes
        .iter()
        .map(|p| match kind {
            Kind::Ciphertext => vm.encrypt(p),
            Kind::Plaintext => vm.plaintext(p),
        })
        .collect()
}

/// A diagonal-form matrix whose diagonals live on the machine.
#[derive(Debug, Clone)]
pub struct PackedMatrix {
    pub rows: usize,
    pub cols: usize,
    pub diagonals: Vec<PackedVec>,
}

impl PackedMatrix {
    pub fn load(vm: &Vm, m: &DiagMatrix, kind: Kind) -> PackedMatrix {
        let diagonals = m
            .diagonals
            .iter()
            .map(|d| match kind {
                Kind::Ciphertext => vm.encrypt(d),
                Kind::Plaintext => vm.plaintext(d),
            })
            .collect();
        PackedMatrix {
            rows: m.rows,
            cols: m.cols,
            diagonals,
        }
    }
}

/// Inclusive prefix ANDs of `xs` by recursive halving: output `k` is
/// `xs[0] & ... & xs[k]`, every output at depth at most `ceil(lg n)` above
/// its inputs.
pub fn prefix_and(vm: &Vm, xs: &[PackedVec]) -> Result<Vec<PackedVec>, KernelError> {
    if xs.len() <= 1 {
        return Ok(xs.to_vec());
    }
    let mid = xs.len().div_ceil(2);
    let mut left = prefix_and(vm, &xs[..mid])?;
    let right = prefix_and(vm, &xs[mid..])?;
    let carry = left.last().expect("nonempty half").clone();
    for r in &right {
        left.push(vm.mult(&carry, r)?);
    }
    Ok(left)
}

/// Slotwise unsigned `a > b` over MSB-first bit-planes.
///
/// With `x_i = a_i & !b_i` and `e_j = !(a_j ^ b_j)`, the result is the XOR over
/// `i` of `x_i & e_0 & ... & e_{i-1}`; at most one term is set (the first
/// differing bit), so XOR agrees with OR. The equality prefixes share work
/// through [`prefix_and`]. Ciphertext depth is at most `ceil(lg p) + 1`.
pub fn sec_comp(vm: &Vm, a: &[PackedVec], b: &[PackedVec]) -> Result<PackedVec, KernelError> {
    if a.len() != b.len() {
        return Err(KernelError::PrecisionMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let p = a.len();
    if p == 0 {
        return Err(KernelError::EmptyInput);
    }
    let ones = vm.plaintext(&Bits::ones(a[0].len()));

    let mut not_b = Vec::with_capacity(p);
    let mut greater = Vec::with_capacity(p);
    for (ai, bi) in a.iter().zip(b) {
        let nb = vm.add(bi, &ones)?;
        greater.push(vm.mult(ai, &nb)?);
        not_b.push(nb);
    }
    let equal: Vec<PackedVec> = a[..p - 1]
        .iter()
        .zip(&not_b)
        .map(|(ai, nb)| vm.add(ai, nb))
        .collect::<Result<_, _>>()?;
    let prefixes = prefix_and(vm, &equal)?;

    let mut acc = greater[0].clone();
    for i in 1..p {
        let term = vm.mult(&greater[i], &prefixes[i - 1])?;
        acc = vm.add(&acc, &term)?;
    }
    Ok(acc)
}

/// Slotwise `a == b` over bit-planes; balanced AND of the per-bit equalities.
pub fn sec_eq(vm: &Vm, a: &[PackedVec], b: &[PackedVec]) -> Result<PackedVec, KernelError> {
    if a.len() != b.len() {
        return Err(KernelError::PrecisionMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.is_empty() {
        return Err(KernelError::EmptyInput);
    }
    let ones = vm.plaintext(&Bits::ones(a[0].len()));
    let equal: Vec<PackedVec> = a
        .iter()
        .zip(b)
        .map(|(ai, bi)| {
            let x = vm.add(ai, bi)?;
            vm.add(&x, &ones)
        })
        .collect::<Result<_, VmError>>()?;
    mult_all(vm, &equal)
}

/// `m * v` by the diagonal method: diagonal `i` times `v` rotated left by
/// `i` (then extended or truncated to `m.rows` slots), summed.
///
/// Costs `cols` rotations, `cols` multiplications and `cols - 1` additions;
/// adds one level of ciphertext depth when the matrix is encrypted.
pub fn mat_mul(vm: &Vm, m: &PackedMatrix, v: &PackedVec) -> Result<PackedVec, KernelError> {
    if v.len() != m.cols {
        return Err(KernelError::DimensionMismatch {
            expected: m.cols,
            found: v.len(),
        });
    }
    let mut acc: Option<PackedVec> = None;
    for (i, diag) in m.diagonals.iter().enumerate() {
        let aligned = vm.rotate_into(v, i, m.rows);
        let prod = vm.mult(diag, &aligned)?;
        acc = Some(match acc {
            None => prod,
            Some(sum) => vm.add(&sum, &prod)?,
        });
    }
    Ok(acc.unwrap_or_else(|| vm.plaintext(&Bits::zeros(m.rows))))
}

/// Slotwise AND of all inputs through a balanced binary tree, pairing left to
/// right at each round: `n - 1` multiplications, depth `ceil(lg n)`.
pub fn mult_all(vm: &Vm, vs: &[PackedVec]) -> Result<PackedVec, KernelError> {
    if vs.is_empty() {
        return Err(KernelError::EmptyInput);
    }
    let mut round = vs.to_vec();
    while round.len() > 1 {
        let mut next = Vec::with_capacity(round.len().div_ceil(2));
        for pair in round.chunks(2) {
            next.push(match pair {
                [l, r] => vm.mult(l, r)?,
                [single] => single.clone(),
                _ => unreachable!(),
            });
        }
        round = next;
    }
    Ok(round.pop().expect("nonempty"))
}
