//! Boolean expression trees over binary covariates.
//!
//! A [`LogicTree`] is a full binary tree whose leaves are covariate indices
//! and whose internal nodes are AND/OR; any node, leaf or branch, may carry a
//! negation flag. Trees render to a canonical string form ("(X5&X9)", "!X3")
//! in which leaves are numbered from 1 and the two children of every branch
//! are ordered structurally, so syntactically distinct but identically shaped
//! trees print the same way. Equality of what two trees *compute* comes in
//! two flavours: [`truth_equivalent`] compares full truth tables over the
//! union of their leaves, while [`data_equivalent`] compares only the columns
//! they produce on a concrete data matrix.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use crate::dataset::BinaryMatrix;
use crate::error::{Error, Result};

/// Largest number of distinct leaves accepted by truth-table comparison.
pub const MAX_TRUTH_TABLE_LEAVES: usize = 20;

/// Binary Boolean connective.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BoolOp {
    And,
    Or,
}

impl BoolOp {
    pub fn symbol(self) -> char {
        match self {
            BoolOp::And => '&',
            BoolOp::Or => '|',
        }
    }

    /// The other connective; used by the operator-toggle mutation.
    pub fn toggled(self) -> BoolOp {
        match self {
            BoolOp::And => BoolOp::Or,
            BoolOp::Or => BoolOp::And,
        }
    }

    fn apply(self, a: bool, b: bool) -> bool {
        match self {
            BoolOp::And => a && b,
            BoolOp::Or => a || b,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
enum TreeKind {
    Leaf(usize),
    Branch {
        op: BoolOp,
        left: Arc<LogicTree>,
        right: Arc<LogicTree>,
    },
}

/// A Boolean expression tree. Leaves store 0-based covariate indices;
/// rendering converts to the 1-based "X<k>" form.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LogicTree {
    negated: bool,
    kind: TreeKind,
}

impl LogicTree {
    /// Single-leaf tree referring to 0-based column `index`.
    pub fn leaf(index: usize) -> LogicTree {
        LogicTree {
            negated: false,
            kind: TreeKind::Leaf(index),
        }
    }

    /// Branch node combining two subtrees.
    pub fn branch(op: BoolOp, left: Arc<LogicTree>, right: Arc<LogicTree>) -> LogicTree {
        LogicTree {
            negated: false,
            kind: TreeKind::Branch { op, left, right },
        }
    }

    pub fn and(left: LogicTree, right: LogicTree) -> LogicTree {
        LogicTree::branch(BoolOp::And, Arc::new(left), Arc::new(right))
    }

    pub fn or(left: LogicTree, right: LogicTree) -> LogicTree {
        LogicTree::branch(BoolOp::Or, Arc::new(left), Arc::new(right))
    }

    /// The same tree with its root negation flipped.
    pub fn negate(mut self) -> LogicTree {
        self.negated = !self.negated;
        self
    }

    pub fn is_negated(&self) -> bool {
        self.negated
    }

    pub fn as_leaf(&self) -> Option<usize> {
        match self.kind {
            TreeKind::Leaf(i) => Some(i),
            TreeKind::Branch { .. } => None,
        }
    }

    /// Number of leaf occurrences (repeated indices count every time).
    pub fn leaf_count(&self) -> usize {
        match &self.kind {
            TreeKind::Leaf(_) => 1,
            TreeKind::Branch { left, right, .. } => left.leaf_count() + right.leaf_count(),
        }
    }

    /// Number of AND/OR nodes.
    pub fn operator_count(&self) -> usize {
        match &self.kind {
            TreeKind::Leaf(_) => 0,
            TreeKind::Branch { left, right, .. } => {
                1 + left.operator_count() + right.operator_count()
            }
        }
    }

    /// Total node count (leaves plus branches).
    pub fn node_count(&self) -> usize {
        2 * self.leaf_count() - 1
    }

    /// Set of distinct 0-based leaf indices.
    pub fn distinct_leaves(&self) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        self.collect_leaves(&mut out);
        out
    }

    /// All leaf occurrences in preorder, with multiplicity.
    pub fn leaf_indices(&self) -> Vec<usize> {
        fn walk(tree: &LogicTree, out: &mut Vec<usize>) {
            match &tree.kind {
                TreeKind::Leaf(i) => out.push(*i),
                TreeKind::Branch { left, right, .. } => {
                    walk(left, out);
                    walk(right, out);
                }
            }
        }
        let mut out = Vec::with_capacity(self.leaf_count());
        walk(self, &mut out);
        out
    }

    fn collect_leaves(&self, out: &mut BTreeSet<usize>) {
        match &self.kind {
            TreeKind::Leaf(i) => {
                out.insert(*i);
            }
            TreeKind::Branch { left, right, .. } => {
                left.collect_leaves(out);
                right.collect_leaves(out);
            }
        }
    }

    /// Evaluate the tree on every row of `x`, producing a 0/1 column.
    ///
    /// Fails if any leaf index is outside the matrix.
    pub fn evaluate(&self, x: &BinaryMatrix) -> Result<Vec<u8>> {
        if let Some(&bad) = self.distinct_leaves().iter().find(|&&i| i >= x.p()) {
            return Err(Error::LeafOutOfRange {
                index: bad + 1,
                columns: x.p(),
            });
        }
        Ok(self.evaluate_unchecked(x))
    }

    fn evaluate_unchecked(&self, x: &BinaryMatrix) -> Vec<u8> {
        let mut col = match &self.kind {
            TreeKind::Leaf(i) => x.column(*i).to_vec(),
            TreeKind::Branch { op, left, right } => {
                let a = left.evaluate_unchecked(x);
                let b = right.evaluate_unchecked(x);
                match op {
                    BoolOp::And => a.iter().zip(&b).map(|(u, v)| u & v).collect(),
                    BoolOp::Or => a.iter().zip(&b).map(|(u, v)| u | v).collect(),
                }
            }
        };
        if self.negated {
            for v in &mut col {
                *v = 1 - *v;
            }
        }
        col
    }

    /// Evaluate under an explicit truth assignment of the leaves.
    pub fn evaluate_assignment(&self, assignment: &dyn Fn(usize) -> bool) -> bool {
        let v = match &self.kind {
            TreeKind::Leaf(i) => assignment(*i),
            TreeKind::Branch { op, left, right } => op.apply(
                left.evaluate_assignment(assignment),
                right.evaluate_assignment(assignment),
            ),
        };
        v ^ self.negated
    }

    /// Rebuild the tree with every leaf index passed through `f`.
    pub fn map_leaves(&self, f: &dyn Fn(usize) -> usize) -> LogicTree {
        let kind = match &self.kind {
            TreeKind::Leaf(i) => TreeKind::Leaf(f(*i)),
            TreeKind::Branch { op, left, right } => TreeKind::Branch {
                op: *op,
                left: Arc::new(left.map_leaves(f)),
                right: Arc::new(right.map_leaves(f)),
            },
        };
        LogicTree {
            negated: self.negated,
            kind,
        }
    }

    /// Structurally sorted copy: at every branch the two children are put in
    /// a fixed order, so trees differing only in operand order collapse to
    /// one representative.
    pub fn canonicalized(&self) -> LogicTree {
        match &self.kind {
            TreeKind::Leaf(_) => self.clone(),
            TreeKind::Branch { op, left, right } => {
                let l = left.canonicalized();
                let r = right.canonicalized();
                let (a, b) = if structural_cmp(&l, &r) == Ordering::Greater {
                    (r, l)
                } else {
                    (l, r)
                };
                LogicTree {
                    negated: self.negated,
                    kind: TreeKind::Branch {
                        op: *op,
                        left: Arc::new(a),
                        right: Arc::new(b),
                    },
                }
            }
        }
    }

    /// Canonical string form: sorted operands, 1-based leaves, "!" prefix for
    /// negation, parentheses around every branch.
    pub fn canonical(&self) -> String {
        let sorted = self.canonicalized();
        let mut out = String::new();
        sorted.render(&mut out);
        out
    }

    fn render(&self, out: &mut String) {
        if self.negated {
            out.push('!');
        }
        match &self.kind {
            TreeKind::Leaf(i) => {
                out.push('X');
                out.push_str(&(i + 1).to_string());
            }
            TreeKind::Branch { op, left, right } => {
                out.push('(');
                left.render(out);
                out.push(op.symbol());
                right.render(out);
                out.push(')');
            }
        }
    }

    /// Toggle the negation flag of the node at pre-order position
    /// `node_index` (root is 0, then the left subtree, then the right).
    ///
    /// Returns `None` when the index is past the last node.
    pub fn with_negation_toggled(&self, node_index: usize) -> Option<LogicTree> {
        let mut remaining = node_index;
        self.toggle_negation(&mut remaining)
    }

    fn toggle_negation(&self, remaining: &mut usize) -> Option<LogicTree> {
        if *remaining == 0 {
            return Some(self.clone().negate());
        }
        *remaining -= 1;
        match &self.kind {
            TreeKind::Leaf(_) => None,
            TreeKind::Branch { op, left, right } => {
                if let Some(new_left) = left.toggle_negation(remaining) {
                    return Some(LogicTree {
                        negated: self.negated,
                        kind: TreeKind::Branch {
                            op: *op,
                            left: Arc::new(new_left),
                            right: Arc::clone(right),
                        },
                    });
                }
                if let Some(new_right) = right.toggle_negation(remaining) {
                    return Some(LogicTree {
                        negated: self.negated,
                        kind: TreeKind::Branch {
                            op: *op,
                            left: Arc::clone(left),
                            right: Arc::new(new_right),
                        },
                    });
                }
                None
            }
        }
    }

    /// Swap AND/OR at the `branch_index`-th internal node in pre-order.
    ///
    /// Returns `None` when the tree has fewer internal nodes.
    pub fn with_operator_toggled(&self, branch_index: usize) -> Option<LogicTree> {
        let mut remaining = branch_index;
        self.toggle_operator(&mut remaining)
    }

    fn toggle_operator(&self, remaining: &mut usize) -> Option<LogicTree> {
        match &self.kind {
            TreeKind::Leaf(_) => None,
            TreeKind::Branch { op, left, right } => {
                if *remaining == 0 {
                    return Some(LogicTree {
                        negated: self.negated,
                        kind: TreeKind::Branch {
                            op: op.toggled(),
                            left: Arc::clone(left),
                            right: Arc::clone(right),
                        },
                    });
                }
                *remaining -= 1;
                if let Some(new_left) = left.toggle_operator(remaining) {
                    return Some(LogicTree {
                        negated: self.negated,
                        kind: TreeKind::Branch {
                            op: *op,
                            left: Arc::new(new_left),
                            right: Arc::clone(right),
                        },
                    });
                }
                if let Some(new_right) = right.toggle_operator(remaining) {
                    return Some(LogicTree {
                        negated: self.negated,
                        kind: TreeKind::Branch {
                            op: *op,
                            left: Arc::clone(left),
                            right: Arc::new(new_right),
                        },
                    });
                }
                None
            }
        }
    }

    /// Delete the `occurrence`-th leaf in pre-order, splicing its sibling up
    /// into the parent's place (the parent's negation transfers onto the
    /// sibling). Returns `None` for a single-leaf tree or an out-of-range
    /// occurrence.
    pub fn with_leaf_removed(&self, occurrence: usize) -> Option<LogicTree> {
        if self.leaf_count() < 2 {
            return None;
        }
        let mut remaining = occurrence;
        match self.remove_leaf(&mut remaining) {
            Some(Removal::Rebuilt(t)) => Some(t),
            // the root itself cannot be deleted, and leaf_count >= 2 means it
            // is a branch, so DeleteMe cannot surface here
            Some(Removal::DeleteMe) | None => None,
        }
    }

    fn remove_leaf(&self, remaining: &mut usize) -> Option<Removal> {
        match &self.kind {
            TreeKind::Leaf(_) => {
                if *remaining == 0 {
                    Some(Removal::DeleteMe)
                } else {
                    *remaining -= 1;
                    None
                }
            }
            TreeKind::Branch { op, left, right } => {
                match left.remove_leaf(remaining) {
                    Some(Removal::DeleteMe) => {
                        let mut kept = (**right).clone();
                        kept.negated ^= self.negated;
                        return Some(Removal::Rebuilt(kept));
                    }
                    Some(Removal::Rebuilt(new_left)) => {
                        return Some(Removal::Rebuilt(LogicTree {
                            negated: self.negated,
                            kind: TreeKind::Branch {
                                op: *op,
                                left: Arc::new(new_left),
                                right: Arc::clone(right),
                            },
                        }));
                    }
                    None => {}
                }
                match right.remove_leaf(remaining) {
                    Some(Removal::DeleteMe) => {
                        let mut kept = (**left).clone();
                        kept.negated ^= self.negated;
                        Some(Removal::Rebuilt(kept))
                    }
                    Some(Removal::Rebuilt(new_right)) => Some(Removal::Rebuilt(LogicTree {
                        negated: self.negated,
                        kind: TreeKind::Branch {
                            op: *op,
                            left: Arc::clone(left),
                            right: Arc::new(new_right),
                        },
                    })),
                    None => None,
                }
            }
        }
    }
}

enum Removal {
    DeleteMe,
    Rebuilt(LogicTree),
}

impl fmt::Display for LogicTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical())
    }
}

/// Total structural ordering used for canonical operand sorting: leaves come
/// before branches; leaves order by index; branches order by operator, then
/// left child, then right child; the negation flag breaks remaining ties
/// (plain before negated).
fn structural_cmp(a: &LogicTree, b: &LogicTree) -> Ordering {
    match (&a.kind, &b.kind) {
        (TreeKind::Leaf(i), TreeKind::Leaf(j)) => i.cmp(j).then(a.negated.cmp(&b.negated)),
        (TreeKind::Leaf(_), TreeKind::Branch { .. }) => Ordering::Less,
        (TreeKind::Branch { .. }, TreeKind::Leaf(_)) => Ordering::Greater,
        (
            TreeKind::Branch {
                op: op_a,
                left: la,
                right: ra,
            },
            TreeKind::Branch {
                op: op_b,
                left: lb,
                right: rb,
            },
        ) => op_a
            .cmp(op_b)
            .then_with(|| structural_cmp(la, lb))
            .then_with(|| structural_cmp(ra, rb))
            .then(a.negated.cmp(&b.negated)),
    }
}

/// Parse the canonical grammar:
///
/// ```text
/// expr := leaf | "!" expr | "(" expr ("&" | "|") expr ")"
/// leaf := "X" digits        (1-based)
/// ```
///
/// Whitespace between tokens is tolerated.
pub fn parse(input: &str) -> Result<LogicTree> {
    let mut parser = Parser {
        input,
        bytes: input.as_bytes(),
        pos: 0,
    };
    let tree = parser.expr()?;
    parser.skip_ws();
    if parser.pos != parser.bytes.len() {
        return Err(parser.err("trailing characters after expression"));
    }
    Ok(tree)
}

struct Parser<'a> {
    input: &'a str,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err(&self, reason: &str) -> Error {
        Error::Parse {
            input: self.input.to_string(),
            position: self.pos,
            reason: reason.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<LogicTree> {
        self.skip_ws();
        match self.peek() {
            Some(b'!') => {
                self.pos += 1;
                Ok(self.expr()?.negate())
            }
            Some(b'(') => {
                self.pos += 1;
                let left = self.expr()?;
                self.skip_ws();
                let op = match self.peek() {
                    Some(b'&') => BoolOp::And,
                    Some(b'|') => BoolOp::Or,
                    _ => return Err(self.err("expected '&' or '|'")),
                };
                self.pos += 1;
                let right = self.expr()?;
                self.skip_ws();
                if self.peek() != Some(b')') {
                    return Err(self.err("expected ')'"));
                }
                self.pos += 1;
                Ok(LogicTree::branch(op, Arc::new(left), Arc::new(right)))
            }
            Some(b'X') => {
                self.pos += 1;
                let start = self.pos;
                while self.peek().map(|b| b.is_ascii_digit()).unwrap_or(false) {
                    self.pos += 1;
                }
                if self.pos == start {
                    return Err(self.err("expected digits after 'X'"));
                }
                let number: usize = self.input[start..self.pos]
                    .parse()
                    .map_err(|_| self.err("leaf number out of range"))?;
                if number == 0 {
                    return Err(self.err("leaf numbers start at 1"));
                }
                Ok(LogicTree::leaf(number - 1))
            }
            _ => Err(self.err("expected '!', '(' or 'X'")),
        }
    }
}

/// Outcome of a truth-table comparison.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TruthEquivalence {
    /// Trees agree on every assignment.
    pub equivalent: bool,
    /// Trees disagree on every assignment (one is the other's negation).
    pub complement: bool,
}

/// Compare two trees over all 2^k assignments of their combined distinct
/// leaves. Errs when k exceeds [`MAX_TRUTH_TABLE_LEAVES`].
pub fn truth_equivalent(a: &LogicTree, b: &LogicTree) -> Result<TruthEquivalence> {
    let mut leaves = a.distinct_leaves();
    leaves.extend(b.distinct_leaves());
    let indices: Vec<usize> = leaves.into_iter().collect();
    let k = indices.len();
    if k > MAX_TRUTH_TABLE_LEAVES {
        return Err(Error::TooManyLeaves {
            got: k,
            max: MAX_TRUTH_TABLE_LEAVES,
        });
    }
    let mut equivalent = true;
    let mut complement = true;
    for mask in 0u32..(1u32 << k) {
        let assignment = |leaf: usize| {
            let pos = indices.binary_search(&leaf).expect("leaf in union");
            (mask >> pos) & 1 == 1
        };
        let va = a.evaluate_assignment(&assignment);
        let vb = b.evaluate_assignment(&assignment);
        if va == vb {
            complement = false;
        } else {
            equivalent = false;
        }
        if !equivalent && !complement {
            break;
        }
    }
    Ok(TruthEquivalence {
        equivalent,
        complement,
    })
}

/// Relation between two data columns produced by trees on the same matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DataEquivalence {
    /// Same column value in every row.
    Identical,
    /// Exact complement in every row.
    Negated,
    /// Neither identical nor complementary.
    Distinct,
    /// At least one column is constant, so the comparison is uninformative.
    Degenerate,
}

/// Is a 0/1 column constant?
pub fn is_constant(column: &[u8]) -> bool {
    column.windows(2).all(|w| w[0] == w[1])
}

/// Classify two 0/1 columns of equal length.
///
/// For non-constant binary columns, `Identical` is exactly "sample
/// correlation +1" and `Negated` exactly "sample correlation -1", so exact
/// comparison stands in for the correlation screen without floating error.
pub fn column_equivalence(a: &[u8], b: &[u8]) -> DataEquivalence {
    debug_assert_eq!(a.len(), b.len());
    if is_constant(a) || is_constant(b) {
        return DataEquivalence::Degenerate;
    }
    if a == b {
        return DataEquivalence::Identical;
    }
    if a.iter().zip(b).all(|(u, v)| *u == 1 - *v) {
        return DataEquivalence::Negated;
    }
    DataEquivalence::Distinct
}

/// Evaluate both trees on `x` and classify the resulting columns.
pub fn data_equivalent(a: &LogicTree, b: &LogicTree, x: &BinaryMatrix) -> Result<DataEquivalence> {
    let ca = a.evaluate(x)?;
    let cb = b.evaluate(x)?;
    Ok(column_equivalence(&ca, &cb))
}
