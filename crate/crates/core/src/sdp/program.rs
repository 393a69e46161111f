use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::atomic::{AtomicU64, Ordering};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::superop::SuperOperator;
use crate::linalg::ComplexMatrix;

static NEXT_PROGRAM_ID: AtomicU64 = AtomicU64::new(1);

/// Kind and size of a variable block.
///
/// `Free(n)` is an unconstrained real `n x 1` column, `Psd(n)` a real
/// symmetric PSD matrix and `HermitianPsd(n)` a complex Hermitian PSD matrix,
/// enforced through its `2n x 2n` real embedding `[[Re, -Im], [Im, Re]]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BlockKind {
    Free(usize),
    Psd(usize),
    HermitianPsd(usize),
}

impl BlockKind {
    /// Number of real parameters.
    pub fn num_params(self) -> usize {
        match self {
            BlockKind::Free(n) => n,
            BlockKind::Psd(n) => n * (n + 1) / 2,
            BlockKind::HermitianPsd(n) => n * n,
        }
    }

    /// Shape of the matrix value of the block.
    pub fn shape(self) -> (usize, usize) {
        match self {
            BlockKind::Free(n) => (n, 1),
            BlockKind::Psd(n) | BlockKind::HermitianPsd(n) => (n, n),
        }
    }

    /// Side length of the real PSD cone backing the block, if any.
    pub fn cone_dim(self) -> Option<usize> {
        match self {
            BlockKind::Free(_) => None,
            BlockKind::Psd(n) => Some(n),
            BlockKind::HermitianPsd(n) => Some(2 * n),
        }
    }

    /// Real-linear expansion of matrix entry `(i, j)` into `(parameter, coefficient)` pairs,
    /// parameters relative to the block offset.
    pub(crate) fn entry(self, i: usize, j: usize) -> Vec<(usize, Complex64)> {
        let one = Complex64::new(1.0, 0.0);
        match self {
            BlockKind::Free(_) => vec![(i, one)],
            BlockKind::Psd(n) => vec![(sym_index(i.min(j), i.max(j), n), one)],
            BlockKind::HermitianPsd(n) => {
                if i == j {
                    vec![(i, one)]
                } else {
                    let (a, b) = (i.min(j), i.max(j));
                    let u = strict_upper_index(a, b, n);
                    let sign = if i < j { 1.0 } else { -1.0 };
                    vec![(n + u, one), (n + n * (n - 1) / 2 + u, Complex64::new(0.0, sign))]
                }
            }
        }
    }
}

/// Row-major position of `(i, j)`, `i <= j`, among upper-triangular entries including the diagonal.
fn sym_index(i: usize, j: usize, n: usize) -> usize {
    i * (2 * n - i + 1) / 2 + (j - i)
}

/// Row-major position of `(i, j)`, `i < j`, among strictly upper-triangular entries.
fn strict_upper_index(i: usize, j: usize, n: usize) -> usize {
    i * (2 * n - i - 1) / 2 + (j - i - 1)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BlockHandle {
    program: u64,
    index: usize,
}

impl BlockHandle {
    pub fn index(self) -> usize {
        self.index
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct EqualityHandle {
    program: u64,
    index: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlockLayout {
    pub kind: BlockKind,
    pub offset: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum RowPart {
    Re,
    Im,
}

/// One scalar equality `sum_k coeffs[k].1 * x[coeffs[k].0] = rhs` over real parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct EqualityRow {
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
}

/// Rows emitted by one operator equality, with the target entries they encode.
#[derive(Clone, Debug)]
pub(crate) struct EqualityGroup {
    pub shape: (usize, usize),
    pub hermitian: bool,
    /// `(row index, i, j, part)`.
    pub rows: Vec<(usize, usize, usize, RowPart)>,
}

/// Conic program `min <c, x>` over a product of free and PSD blocks subject to
/// linear equalities, built from complex operator data.
#[derive(Clone, Debug)]
pub struct ConicProgram {
    id: u64,
    blocks: Vec<BlockLayout>,
    num_params: usize,
    objective: Vec<f64>,
    objective_offset: f64,
    rows: Vec<EqualityRow>,
    groups: Vec<EqualityGroup>,
    max_block_dim: usize,
}

impl Default for ConicProgram {
    fn default() -> Self {
        Self::new()
    }
}

impl ConicProgram {
    pub fn new() -> Self {
        Self::with_max_block_dim(usize::MAX)
    }

    /// Program whose PSD cones may not exceed `max_block_dim` (real side length).
    pub fn with_max_block_dim(max_block_dim: usize) -> Self {
        Self {
            id: NEXT_PROGRAM_ID.fetch_add(1, Ordering::Relaxed),
            blocks: Vec::new(),
            num_params: 0,
            objective: Vec::new(),
            objective_offset: 0.0,
            rows: Vec::new(),
            groups: Vec::new(),
            max_block_dim,
        }
    }

    pub fn blocks(&self) -> &[BlockLayout] {
        &self.blocks
    }

    pub fn num_params(&self) -> usize {
        self.num_params
    }

    pub fn rows(&self) -> &[EqualityRow] {
        &self.rows
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn objective_offset(&self) -> f64 {
        self.objective_offset
    }

    pub fn layout(&self, h: BlockHandle) -> Result<BlockLayout> {
        layout_of(self.id, &self.blocks, h)
    }

    pub(crate) fn shape(&self) -> ProgramShape {
        ProgramShape {
            id: self.id,
            blocks: self.blocks.clone(),
            groups: self.groups.clone(),
        }
    }

    pub fn add_block(&mut self, kind: BlockKind) -> Result<BlockHandle> {
        let n = match kind {
            BlockKind::Free(n) | BlockKind::Psd(n) | BlockKind::HermitianPsd(n) => n,
        };
        if n == 0 {
            return Err(Error::InvalidParameter("blocks need n >= 1".into()));
        }
        if let Some(c) = kind.cone_dim() {
            if c > self.max_block_dim {
                return Err(Error::Capability(format!(
                    "PSD cone of side {c} exceeds the backend limit {}",
                    self.max_block_dim
                )));
            }
        }
        let offset = self.num_params;
        self.num_params += kind.num_params();
        self.objective.resize(self.num_params, 0.0);
        self.blocks.push(BlockLayout { kind, offset });
        Ok(BlockHandle {
            program: self.id,
            index: self.blocks.len() - 1,
        })
    }

    pub fn add_free_variable(&mut self, n: usize) -> Result<BlockHandle> {
        self.add_block(BlockKind::Free(n))
    }

    pub fn add_psd_variable(&mut self, n: usize) -> Result<BlockHandle> {
        self.add_block(BlockKind::Psd(n))
    }

    pub fn add_hermitian_psd_variable(&mut self, n: usize) -> Result<BlockHandle> {
        self.add_block(BlockKind::HermitianPsd(n))
    }

    /// Adds `Re <C_k, X_k>` to the minimized objective for each `(X_k, C_k)`.
    pub fn add_objective(&mut self, terms: &[(BlockHandle, &ComplexMatrix<f64>)]) -> Result<()> {
        for &(h, c) in terms {
            let layout = self.layout(h)?;
            if (c.rows(), c.cols()) != layout.kind.shape() {
                return Err(Error::DimensionMismatch("objective coefficient shape".into()));
            }
            for i in 0..c.rows() {
                for j in 0..c.cols() {
                    let cij = c[(i, j)].conj();
                    if cij == Complex64::new(0.0, 0.0) {
                        continue;
                    }
                    for (p, a) in layout.kind.entry(i, j) {
                        self.objective[layout.offset + p] += (cij * a).re;
                    }
                }
            }
        }
        Ok(())
    }

    pub fn add_objective_constant(&mut self, c: f64) {
        self.objective_offset += c;
    }

    /// Appends `sum_k map_k(X_k) = target`.
    ///
    /// Square targets are treated as Hermitian: one real row per diagonal entry and a
    /// real and an imaginary row per strictly upper entry, so each map must preserve
    /// Hermiticity. Other shapes emit a real and an imaginary row per entry. Rows
    /// whose coefficients and right-hand side vanish identically are skipped.
    pub fn add_linear_operator_equality(
        &mut self,
        terms: &[(BlockHandle, &SuperOperator<f64>)],
        target: &ComplexMatrix<f64>,
    ) -> Result<EqualityHandle> {
        let shape = (target.rows(), target.cols());
        let mut layouts = Vec::with_capacity(terms.len());
        for &(h, map) in terms {
            let layout = self.layout(h)?;
            if map.in_shape() != layout.kind.shape() || map.out_shape() != shape {
                return Err(Error::DimensionMismatch(format!(
                    "map {:?} -> {:?} against block {:?} and target {:?}",
                    map.in_shape(),
                    map.out_shape(),
                    layout.kind.shape(),
                    shape
                )));
            }
            layouts.push(layout);
        }

        let hermitian = target.is_square();
        let mut group = EqualityGroup {
            shape,
            hermitian,
            rows: Vec::new(),
        };
        for i in 0..shape.0 {
            let j0 = if hermitian { i } else { 0 };
            for j in j0..shape.1 {
                let o = i * shape.1 + j;
                let mut acc: HashMap<usize, Complex64> = HashMap::new();
                for (&(_, map), layout) in terms.iter().zip(&layouts) {
                    for &(k, c) in &map.rows()[o] {
                        let (bi, bj) = (k / layout.kind.shape().1, k % layout.kind.shape().1);
                        for (p, a) in layout.kind.entry(bi, bj) {
                            *acc.entry(layout.offset + p).or_default() += c * a;
                        }
                    }
                }
                let mut parts = vec![RowPart::Re];
                if !(hermitian && i == j) {
                    parts.push(RowPart::Im);
                }
                for part in parts {
                    let pick = |z: Complex64| if part == RowPart::Re { z.re } else { z.im };
                    let mut coeffs: Vec<(usize, f64)> =
                        acc.iter().map(|(&p, &z)| (p, pick(z))).filter(|&(_, v)| v != 0.0).collect();
                    coeffs.sort_by_key(|&(p, _)| p);
                    let rhs = pick(target[(i, j)]);
                    if coeffs.is_empty() && rhs == 0.0 {
                        continue;
                    }
                    group.rows.push((self.rows.len(), i, j, part));
                    self.rows.push(EqualityRow { coeffs, rhs });
                }
            }
        }
        self.groups.push(group);
        Ok(EqualityHandle {
            program: self.id,
            index: self.groups.len() - 1,
        })
    }

    /// Indices of rows kept by presolve, and for every row the kept row it maps to
    /// (`None` for rows that are dropped as duplicates).
    pub(crate) fn presolve(&self) -> (Vec<usize>, Vec<Option<usize>>) {
        let mut seen: HashMap<(Vec<(usize, u64)>, u64), usize> = HashMap::new();
        let mut kept = Vec::new();
        let mut map = vec![None; self.rows.len()];
        for (r, row) in self.rows.iter().enumerate() {
            let key = (
                row.coeffs.iter().map(|&(p, v)| (p, (v + 0.0).to_bits())).collect::<Vec<_>>(),
                (row.rhs + 0.0).to_bits(),
            );
            if seen.contains_key(&key) {
                continue;
            }
            seen.insert(key, kept.len());
            map[r] = Some(kept.len());
            kept.push(r);
        }
        (kept, map)
    }

    /// Value of block `h` as a matrix, read from the parameter vector `x`.
    pub fn block_value(&self, h: BlockHandle, x: &[f64]) -> Result<ComplexMatrix<f64>> {
        let layout = self.layout(h)?;
        Ok(block_value(layout, x))
    }

    /// Sparse triplet listing of the program, for cross-solver validation.
    pub fn dump_triplets(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "params {}", self.num_params);
        for (k, b) in self.blocks.iter().enumerate() {
            let (name, n) = match b.kind {
                BlockKind::Free(n) => ("FREE", n),
                BlockKind::Psd(n) => ("PSD", n),
                BlockKind::HermitianPsd(n) => ("HPSD", n),
            };
            let _ = writeln!(out, "block {k} {name} {n} offset {} params {}", b.offset, b.kind.num_params());
        }
        let _ = writeln!(out, "objective_offset {:.17e}", self.objective_offset);
        for (p, &c) in self.objective.iter().enumerate() {
            if c != 0.0 {
                let _ = writeln!(out, "c {p} {c:.17e}");
            }
        }
        let _ = writeln!(out, "rows {}", self.rows.len());
        for (r, row) in self.rows.iter().enumerate() {
            for &(p, v) in &row.coeffs {
                let _ = writeln!(out, "a {r} {p} {v:.17e}");
            }
            let _ = writeln!(out, "b {r} {:.17e}", row.rhs);
        }
        out
    }
}

fn layout_of(id: u64, blocks: &[BlockLayout], h: BlockHandle) -> Result<BlockLayout> {
    if h.program != id {
        return Err(Error::WrongHandle(h.index));
    }
    blocks.get(h.index).copied().ok_or(Error::WrongHandle(h.index))
}

/// Block layout and equality groups of a program, kept with its solutions.
#[derive(Clone, Debug)]
pub(crate) struct ProgramShape {
    id: u64,
    pub blocks: Vec<BlockLayout>,
    groups: Vec<EqualityGroup>,
}

impl ProgramShape {
    pub fn layout(&self, h: BlockHandle) -> Result<BlockLayout> {
        layout_of(self.id, &self.blocks, h)
    }

    pub fn group(&self, h: EqualityHandle) -> Result<&EqualityGroup> {
        if h.program != self.id {
            return Err(Error::WrongHandle(h.index));
        }
        self.groups.get(h.index).ok_or(Error::WrongHandle(h.index))
    }
}

pub(crate) fn block_value(layout: BlockLayout, x: &[f64]) -> ComplexMatrix<f64> {
    let (r, c) = layout.kind.shape();
    ComplexMatrix::from_fn(r, c, |i, j| {
        layout
            .kind
            .entry(i, j)
            .into_iter()
            .map(|(p, a)| a * x[layout.offset + p])
            .sum()
    })
}

/// `(svec position, parameter, coefficient)` triples of the cone rows of a block, with
/// off-diagonal svec entries already scaled by `sqrt(2)`. Svec is the column-wise
/// upper triangle.
pub(crate) fn cone_entries(kind: BlockKind) -> Vec<(usize, usize, f64)> {
    let s2 = std::f64::consts::SQRT_2;
    let mut out = Vec::new();
    match kind {
        BlockKind::Free(_) => {}
        BlockKind::Psd(n) => {
            for q in 0..n {
                for p in 0..=q {
                    let pos = q * (q + 1) / 2 + p;
                    out.push((pos, sym_index(p, q, n), if p == q { 1.0 } else { s2 }));
                }
            }
        }
        BlockKind::HermitianPsd(n) => {
            let m = n * (n - 1) / 2;
            for q in 0..2 * n {
                for p in 0..=q {
                    let pos = q * (q + 1) / 2 + p;
                    let scale = if p == q { 1.0 } else { s2 };
                    let (i, j, imag) = match (p < n, q < n) {
                        (true, true) => (p, q, false),
                        (false, false) => (p - n, q - n, false),
                        _ => (p, q - n, true),
                    };
                    if !imag {
                        let param = if i == j { i } else { n + strict_upper_index(i, j, n) };
                        out.push((pos, param, scale));
                    } else if i < j {
                        // Upper-right block holds -Im X.
                        out.push((pos, n + m + strict_upper_index(i, j, n), -scale));
                    } else if i > j {
                        out.push((pos, n + m + strict_upper_index(j, i, n), scale));
                    }
                }
            }
        }
    }
    out
}
