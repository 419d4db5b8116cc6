//! Fixed sparsity patterns for P1 assembly on triangles.

use faer::sparse::{SparseColMat, SymbolicSparseColMat};

const NO_SLOT: usize = usize::MAX;

/// Column-compressed sparsity pattern of a P1 operator, together with the
/// value slot of every element-local `(row, col)` pair.
///
/// Degrees of freedom marked `fixed` keep only their diagonal entry, which
/// realizes homogeneous Dirichlet elimination without breaking symmetry.
#[derive(Debug, Clone)]
pub struct Pattern {
    symbolic: SymbolicSparseColMat<usize>,
    slots: Vec<[usize; 9]>,
    diag: Vec<usize>,
    fixed: Vec<bool>,
}

impl Pattern {
    pub fn new(n: usize, elements: &[[usize; 3]], fixed: &[bool]) -> Self {
        assert_eq!(fixed.len(), n);
        let mut cols: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (i, c) in cols.iter_mut().enumerate() {
            c.push(i);
        }
        for e in elements {
            for &a in e {
                for &b in e {
                    if a != b && !fixed[a] && !fixed[b] {
                        cols[b].push(a);
                    }
                }
            }
        }
        let mut col_ptr = Vec::with_capacity(n + 1);
        let mut row_idx = Vec::new();
        col_ptr.push(0);
        for c in cols.iter_mut() {
            c.sort_unstable();
            c.dedup();
            row_idx.extend_from_slice(c);
            col_ptr.push(row_idx.len());
        }
        let find = |row: usize, col: usize| -> usize {
            let (s, e) = (col_ptr[col], col_ptr[col + 1]);
            s + row_idx[s..e].binary_search(&row).expect("entry in pattern")
        };
        let diag: Vec<usize> = (0..n).map(|i| find(i, i)).collect();
        let slots = elements
            .iter()
            .map(|e| {
                let mut s = [NO_SLOT; 9];
                for (a, &r) in e.iter().enumerate() {
                    for (b, &c) in e.iter().enumerate() {
                        if fixed[r] || fixed[c] {
                            continue;
                        }
                        s[3 * a + b] = find(r, c);
                    }
                }
                s
            })
            .collect();
        let symbolic = SymbolicSparseColMat::new_checked(n, n, col_ptr, None, row_idx);
        Self { symbolic, slots, diag, fixed: fixed.to_vec() }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn nnz(&self) -> usize {
        self.symbolic.row_idx().len()
    }

    pub fn symbolic(&self) -> &SymbolicSparseColMat<usize> {
        &self.symbolic
    }

    pub fn is_fixed(&self, i: usize) -> bool {
        self.fixed[i]
    }

    /// Adds a dense 3×3 element matrix (row-major) into `values`.
    pub fn scatter<T>(&self, element: usize, local: &[[T; 3]; 3], values: &mut [T])
    where
        T: Copy + std::ops::AddAssign,
    {
        let s = &self.slots[element];
        for a in 0..3 {
            for b in 0..3 {
                let k = s[3 * a + b];
                if k != NO_SLOT {
                    values[k] += local[a][b];
                }
            }
        }
    }

    /// Builds the matrix, putting `one` on the diagonal of fixed rows.
    pub fn finish<T: Copy>(&self, mut values: Vec<T>, one: T) -> SparseColMat<usize, T> {
        for (i, &f) in self.fixed.iter().enumerate() {
            if f {
                values[self.diag[i]] = one;
            }
        }
        SparseColMat::new(self.symbolic.clone(), values)
    }
}

/// `y = A x` for a column-compressed matrix.
pub fn mat_vec<T>(a: &SparseColMat<usize, T>, x: &[T], zero: T) -> Vec<T>
where
    T: Copy + std::ops::Mul<Output = T> + std::ops::AddAssign,
{
    let sym = a.symbolic();
    let col_ptr = sym.col_ptr();
    let row_idx = sym.row_idx();
    let val = a.val();
    let mut y = vec![zero; a.nrows()];
    for (c, &xc) in x.iter().enumerate() {
        for k in col_ptr[c]..col_ptr[c + 1] {
            y[row_idx[k]] += val[k] * xc;
        }
    }
    y
}

/// `y = Aᵀ x` for a column-compressed matrix.
pub fn mat_t_vec<T>(a: &SparseColMat<usize, T>, x: &[T], zero: T) -> Vec<T>
where
    T: Copy + std::ops::Mul<Output = T> + std::ops::AddAssign,
{
    let sym = a.symbolic();
    let col_ptr = sym.col_ptr();
    let row_idx = sym.row_idx();
    let val = a.val();
    (0..a.ncols())
        .map(|c| {
            let mut acc = zero;
            for k in col_ptr[c]..col_ptr[c + 1] {
                acc += val[k] * x[row_idx[k]];
            }
            acc
        })
        .collect()
}
