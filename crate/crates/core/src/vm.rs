//! Simulated packed-ciphertext vector machine.
//!
//! Values are boolean slot vectors tagged ciphertext or plaintext. Addition is
//! slotwise XOR and multiplication slotwise AND, as with packed BGV over
//! `GF(2)`. Every value carries its multiplicative depth; the machine keeps a
//! shared [`OpLedger`] of operation counts and the deepest value produced.
//!
//! Cost rules:
//! * `encrypt` counts one Encrypt and yields depth 0.
//! * `rotate` by a nonzero offset counts one Rotate; offset 0 is free.
//! * `add` counts Add (ct+ct) or Constant Add (ct+pt); depth is the max.
//! * `mult` of two ciphertexts counts `mult_ct_ct` and adds 1 to the depth;
//!   a ciphertext times a plaintext counts `mult_ct_pt` and adds no depth.
//! * Anything computed purely on plaintexts is local and uncounted.
//! * Cyclic extension and truncation are slot bookkeeping: free, no depth.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Sub};
use std::sync::atomic::{AtomicU32, AtomicU64, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::bits::Bits;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Ciphertext,
    Plaintext,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PackedVec {
    slots: Bits,
    kind: Kind,
    depth: u32,
    origin: u64,
}

impl PackedVec {
    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn kind(&self) -> Kind {
        self.kind
    }

    pub fn is_ciphertext(&self) -> bool {
        self.kind == Kind::Ciphertext
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    /// Id of the machine operation that produced this value.
    pub fn origin(&self) -> u64 {
        self.origin
    }

    /// Slot contents. On a real backend this is only available after decryption.
    pub fn peek(&self) -> &Bits {
        &self.slots
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum VmError {
    #[error("slot length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("multiplicative depth {depth} exceeds the budget of {budget}")]
    DepthBudgetExceeded { depth: u32, budget: u32 },
}

/// Per-operation counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCounts {
    pub encrypt: u64,
    pub rotate: u64,
    pub add: u64,
    pub const_add: u64,
    pub mult_ct_ct: u64,
    pub mult_ct_pt: u64,
}

impl OpCounts {
    /// All multiplications, ciphertext-ciphertext and ciphertext-plaintext.
    pub fn multiply(&self) -> u64 {
        self.mult_ct_ct + self.mult_ct_pt
    }

    pub fn total(&self) -> u64 {
        self.encrypt + self.rotate + self.add + self.const_add + self.multiply()
    }
}

impl Add for OpCounts {
    type Output = OpCounts;
    fn add(self, o: OpCounts) -> OpCounts {
        OpCounts {
            encrypt: self.encrypt + o.encrypt,
            rotate: self.rotate + o.rotate,
            add: self.add + o.add,
            const_add: self.const_add + o.const_add,
            mult_ct_ct: self.mult_ct_ct + o.mult_ct_ct,
            mult_ct_pt: self.mult_ct_pt + o.mult_ct_pt,
        }
    }
}

impl Sub for OpCounts {
    type Output = OpCounts;
    fn sub(self, o: OpCounts) -> OpCounts {
        OpCounts {
            encrypt: self.encrypt - o.encrypt,
            rotate: self.rotate - o.rotate,
            add: self.add - o.add,
            const_add: self.const_add - o.const_add,
            mult_ct_ct: self.mult_ct_ct - o.mult_ct_ct,
            mult_ct_pt: self.mult_ct_pt - o.mult_ct_pt,
        }
    }
}

/// A point-in-time copy of the ledger, exported as TOML.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerSnapshot {
    #[serde(flatten)]
    pub counts: OpCounts,
    pub max_depth: u32,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub depth_budget: Option<u32>,
}

impl LedgerSnapshot {
    /// Combines ledgers of independent runs.
    pub fn merge(&self, other: &LedgerSnapshot) -> LedgerSnapshot {
        LedgerSnapshot {
            counts: self.counts + other.counts,
            max_depth: self.max_depth.max(other.max_depth),
            depth_budget: self.depth_budget.or(other.depth_budget),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("ledger serializes")
    }

    pub fn from_toml(text: &str) -> Result<LedgerSnapshot, toml::de::Error> {
        toml::from_str(text)
    }
}

impl fmt::Display for LedgerSnapshot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = &self.counts;
        write!(
            f,
            "encrypt={} rotate={} add={} const_add={} mult_ct_ct={} mult_ct_pt={} max_depth={}",
            c.encrypt, c.rotate, c.add, c.const_add, c.mult_ct_ct, c.mult_ct_pt, self.max_depth
        )
    }
}

/// Shared accumulator; safe to bump from several threads.
#[derive(Debug, Default)]
pub struct OpLedger {
    encrypt: AtomicU64,
    rotate: AtomicU64,
    add: AtomicU64,
    const_add: AtomicU64,
    mult_ct_ct: AtomicU64,
    mult_ct_pt: AtomicU64,
    max_depth: AtomicU32,
}

impl OpLedger {
    fn bump(counter: &AtomicU64) {
        counter.fetch_add(1, Ordering::Relaxed);
    }

    fn observe(&self, depth: u32) {
        self.max_depth.fetch_max(depth, Ordering::Relaxed);
    }

    pub fn counts(&self) -> OpCounts {
        OpCounts {
            encrypt: self.encrypt.load(Ordering::Relaxed),
            rotate: self.rotate.load(Ordering::Relaxed),
            add: self.add.load(Ordering::Relaxed),
            const_add: self.const_add.load(Ordering::Relaxed),
            mult_ct_ct: self.mult_ct_ct.load(Ordering::Relaxed),
            mult_ct_pt: self.mult_ct_pt.load(Ordering::Relaxed),
        }
    }

    pub fn max_depth(&self) -> u32 {
        self.max_depth.load(Ordering::Relaxed)
    }
}

/// One recorded machine operation, for replaying a circuit in plain arithmetic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TraceOp {
    Encrypt(Bits),
    Plaintext(Bits),
    Rotate {
        input: u64,
        offset: usize,
    },
    RotateInto {
        input: u64,
        offset: usize,
        len: usize,
    },
    Resize {
        input: u64,
        len: usize,
    },
    Add {
        left: u64,
        right: u64,
    },
    Mult {
        left: u64,
        right: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEntry {
    pub output: u64,
    pub op: TraceOp,
}

#[derive(Debug, Default)]
pub struct Vm {
    ledger: OpLedger,
    depth_budget: Option<u32>,
    next_id: AtomicU64,
    trace: Option<Mutex<Vec<TraceEntry>>>,
}

impl Vm {
    pub fn new() -> Vm {
        Vm::default()
    }

    /// Any ct x ct product deeper than `budget` fails with [`VmError::DepthBudgetExceeded`].
    pub fn with_depth_budget(mut self, budget: u32) -> Vm {
        self.depth_budget = Some(budget);
        self
    }

    /// Records every operation so the circuit can be replayed with [`replay`].
    pub fn with_trace(mut self) -> Vm {
        self.trace = Some(Mutex::new(Vec::new()));
        self
    }

    pub fn depth_budget(&self) -> Option<u32> {
        self.depth_budget
    }

    pub fn ledger(&self) -> &OpLedger {
        &self.ledger
    }

    pub fn snapshot(&self) -> LedgerSnapshot {
        LedgerSnapshot {
            counts: self.ledger.counts(),
            max_depth: self.ledger.max_depth(),
            depth_budget: self.depth_budget,
        }
    }

    pub fn trace(&self) -> Vec<TraceEntry> {
        self.trace
            .as_ref()
            .map(|t| t.lock().expect("trace lock").clone())
            .unwrap_or_default()
    }

    fn produce(
        &self,
        slots: Bits,
        kind: Kind,
        depth: u32,
        op: impl FnOnce() -> TraceOp,
    ) -> PackedVec {
        let origin = self.next_id.fetch_add(1, Ordering::Relaxed);
        self.ledger.observe(depth);
        if let Some(trace) = &self.trace {
            trace.lock().expect("trace lock").push(TraceEntry {
                output: origin,
                op: op(),
            });
        }
        PackedVec {
            slots,
            kind,
            depth,
            origin,
        }
    }

    pub fn encrypt(&self, bits: &Bits) -> PackedVec {
        OpLedger::bump(&self.ledger.encrypt);
        self.produce(bits.clone(), Kind::Ciphertext, 0, || {
            TraceOp::Encrypt(bits.clone())
        })
    }

    /// Wraps an unencrypted operand. Uncounted.
    pub fn plaintext(&self, bits: &Bits) -> PackedVec {
        self.produce(bits.clone(), Kind::Plaintext, 0, || {
            TraceOp::Plaintext(bits.clone())
        })
    }

    /// Data-owner side decryption. Uncounted.
    pub fn decrypt(&self, v: &PackedVec) -> Bits {
        v.slots.clone()
    }

    /// Left rotation by `offset` slots on the logical slot length.
    pub fn rotate(&self, v: &PackedVec, offset: usize) -> PackedVec {
        let offset = if v.is_empty() { 0 } else { offset % v.len() };
        if offset == 0 {
            return v.clone();
        }
        if v.is_ciphertext() {
            OpLedger::bump(&self.ledger.rotate);
        }
        self.produce(v.slots.rotate_left(offset), v.kind, v.depth, || {
            TraceOp::Rotate {
                input: v.origin,
                offset,
            }
        })
    }

    /// Diagonal-method alignment: rotate by `offset`, then extend cyclically or
    /// truncate to `len` slots. Counts one Rotate on a ciphertext for every
    /// call, offset 0 included, since it realigns a packed operand to the
    /// diagonal's slot count.
    pub fn rotate_into(&self, v: &PackedVec, offset: usize, len: usize) -> PackedVec {
        let offset = if v.is_empty() { 0 } else { offset % v.len() };
        if v.is_ciphertext() {
            OpLedger::bump(&self.ledger.rotate);
        }
        let slots = v.slots.rotate_left(offset).resize_cyclic(len);
        self.produce(slots, v.kind, v.depth, || TraceOp::RotateInto {
            input: v.origin,
            offset,
            len,
        })
    }

    /// Cyclic extension `[x, y, z] -> [x, y, z, x, ...]` to `len` slots.
    pub fn replicate_extend(&self, v: &PackedVec, len: usize) -> PackedVec {
        debug_assert!(len >= v.len() && len >= 1);
        self.resize(v, len)
    }

    /// Keeps the first `len` slots.
    pub fn truncate(&self, v: &PackedVec, len: usize) -> PackedVec {
        debug_assert!(len <= v.len() && len >= 1);
        self.resize(v, len)
    }

    fn resize(&self, v: &PackedVec, len: usize) -> PackedVec {
        if len == v.len() {
            return v.clone();
        }
        self.produce(v.slots.resize_cyclic(len), v.kind, v.depth, || {
            TraceOp::Resize {
                input: v.origin,
                len,
            }
        })
    }

    fn check_len(a: &PackedVec, b: &PackedVec) -> Result<(), VmError> {
        if a.len() != b.len() {
            return Err(VmError::LengthMismatch {
                left: a.len(),
                right: b.len(),
            });
        }
        Ok(())
    }

    /// Slotwise XOR.
    pub fn add(&self, a: &PackedVec, b: &PackedVec) -> Result<PackedVec, VmError> {
        Self::check_len(a, b)?;
        let kind = match (a.kind, b.kind) {
            (Kind::Ciphertext, Kind::Ciphertext) => {
                OpLedger::bump(&self.ledger.add);
                Kind::Ciphertext
            }
            (Kind::Plaintext, Kind::Plaintext) => Kind::Plaintext,
            _ => {
                OpLedger::bump(&self.ledger.const_add);
                Kind::Ciphertext
            }
        };
        let depth = a.depth.max(b.depth);
        Ok(
            self.produce(&a.slots ^ &b.slots, kind, depth, || TraceOp::Add {
                left: a.origin,
                right: b.origin,
            }),
        )
    }

    /// Slotwise AND.
    pub fn mult(&self, a: &PackedVec, b: &PackedVec) -> Result<PackedVec, VmError> {
        Self::check_len(a, b)?;
        let (kind, depth, counter) = match (a.kind, b.kind) {
            (Kind::Ciphertext, Kind::Ciphertext) => {
                let depth = a.depth.max(b.depth) + 1;
                if let Some(budget) = self.depth_budget {
                    if depth > budget {
                        return Err(VmError::DepthBudgetExceeded { depth, budget });
                    }
                }
                (Kind::Ciphertext, depth, Some(&self.ledger.mult_ct_ct))
            }
            (Kind::Plaintext, Kind::Plaintext) => (Kind::Plaintext, 0, None),
            _ => (
                Kind::Ciphertext,
                a.depth.max(b.depth),
                Some(&self.ledger.mult_ct_pt),
            ),
        };
        if let Some(counter) = counter {
            OpLedger::bump(counter);
        }
        Ok(
            self.produce(&a.slots & &b.slots, kind, depth, || TraceOp::Mult {
                left: a.origin,
                right: b.origin,
            }),
        )
    }
}

/// Re-executes a recorded trace slot by slot with plain boolean arithmetic.
///
/// Returns the value of every produced id; written independently of
/// [`Bits`]' vector helpers so it can serve as an oracle for the machine.
pub fn replay(trace: &[TraceEntry]) -> HashMap<u64, Vec<bool>> {
    let mut values: HashMap<u64, Vec<bool>> = HashMap::new();
    for entry in trace {
        let out = match &entry.op {
            TraceOp::Encrypt(b) | TraceOp::Plaintext(b) => b.as_slice().to_vec(),
            TraceOp::Rotate { input, offset } => {
                let v = &values[input];
                (0..v.len()).map(|s| v[(s + offset) % v.len()]).collect()
            }
            TraceOp::RotateInto { input, offset, len } => {
                let v = &values[input];
                (0..*len)
                    .map(|s| v[(s % v.len() + offset) % v.len()])
                    .collect()
            }
            TraceOp::Resize { input, len } => {
                let v = &values[input];
                (0..*len).map(|s| v[s % v.len()]).collect()
            }
            TraceOp::Add { left, right } => values[left]
                .iter()
                .zip(&values[right])
                .map(|(a, b)| a != b)
                .collect(),
            TraceOp::Mult { left, right } => values[left]
                .iter()
                .zip(&values[right])
                .map(|(a, b)| *a && *b)
                .collect(),
        };
        values.insert(entry.output, out);
    }
    values
}
