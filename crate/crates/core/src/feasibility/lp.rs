//! Exact rational linear feasibility: Phase-I simplex with Bland's rule and Farkas
//! certificates of infeasibility.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowKind {
    Eq,
    Le,
    Ge,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub label: String,
    pub coeffs: Vec<(usize, BigRational)>,
    pub kind: RowKind,
    pub rhs: BigRational,
}

/// `rows` over nonnegative variables `0..n_vars`.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct LinearSystem {
    pub n_vars: usize,
    pub var_labels: Vec<String>,
    pub rows: Vec<Row>,
}

/// Multipliers `y` proving infeasibility: the combination `sum_i y_i (row_i)` of the rows reads
/// `c^T x >= y^T b` with `c <= 0` and `y^T b > 0`, impossible for `x >= 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct FarkasCertificate {
    pub y: Vec<BigRational>,
}

impl FarkasCertificate {
    /// Exact check: `sum_i y_i a_ij <= 0` for every variable, `y_i <= 0` on `<=` rows,
    /// `y_i >= 0` on `>=` rows, and `sum_i y_i b_i > 0`.
    pub fn verify(&self, sys: &LinearSystem) -> bool {
        if self.y.len() != sys.rows.len() {
            return false;
        }
        let mut col = vec![BigRational::zero(); sys.n_vars];
        let mut rhs = BigRational::zero();
        for (row, y) in sys.rows.iter().zip(&self.y) {
            match row.kind {
                RowKind::Le if y.is_positive() => return false,
                RowKind::Ge if y.is_negative() => return false,
                _ => {}
            }
            for (j, a) in &row.coeffs {
                col[*j] += y * a;
            }
            rhs += y * &row.rhs;
        }
        col.iter().all(|c| !c.is_positive()) && rhs.is_positive()
    }

    pub fn value(&self, sys: &LinearSystem) -> BigRational {
        sys.rows.iter().zip(&self.y).map(|(r, y)| y * &r.rhs).sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum LpOutcome {
    Feasible(Vec<BigRational>),
    Infeasible(FarkasCertificate),
}

struct Tableau {
    /// `m` rows of `n_total + 1` entries; last column is the right-hand side.
    a: Vec<Vec<BigRational>>,
    basis: Vec<usize>,
    /// Reduced costs of the Phase-I objective, last entry is minus the objective value.
    obj: Vec<BigRational>,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.a[r][c].clone();
        for v in self.a[r].iter_mut() {
            *v /= &p;
        }
        let pivot_row = self.a[r].clone();
        for (i, row) in self.a.iter_mut().enumerate() {
            if i != r && !row[c].is_zero() {
                let f = row[c].clone();
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    if !pv.is_zero() {
                        *v -= &f * pv;
                    }
                }
            }
        }
        if !self.obj[c].is_zero() {
            let f = self.obj[c].clone();
            for (v, pv) in self.obj.iter_mut().zip(&pivot_row) {
                if !pv.is_zero() {
                    *v -= &f * pv;
                }
            }
        }
        self.basis[r] = c;
    }

    /// Bland's rule: lowest-index entering column, ties in the ratio test by lowest basic index.
    fn run(&mut self) {
        let width = self.obj.len() - 1;
        loop {
            let Some(c) = (0..width).find(|&j| self.obj[j].is_negative()) else {
                return;
            };
            let mut best: Option<(usize, BigRational)> = None;
            for (i, row) in self.a.iter().enumerate() {
                if row[c].is_positive() {
                    let ratio = &row[width] / &row[c];
                    let better = match &best {
                        None => true,
                        Some((bi, br)) => ratio < *br || (ratio == *br && self.basis[i] < self.basis[*bi]),
                    };
                    if better {
                        best = Some((i, ratio));
                    }
                }
            }
            match best {
                Some((r, _)) => self.pivot(r, c),
                // Phase I is bounded below by zero, so an unbounded column cannot occur.
                None => return,
            }
        }
    }
}

/// Decides `{x >= 0 : rows}` exactly.
pub fn solve(sys: &LinearSystem) -> LpOutcome {
    let m = sys.rows.len();
    let n = sys.n_vars;
    let n_slack = sys.rows.iter().filter(|r| r.kind != RowKind::Eq).count();
    let n_total = n + n_slack + m;
    let mut a = vec![vec![BigRational::zero(); n_total + 1]; m];
    let mut sign = vec![BigRational::one(); m];
    let mut slack = n;
    for (i, row) in sys.rows.iter().enumerate() {
        for (j, v) in &row.coeffs {
            a[i][*j] += v;
        }
        match row.kind {
            RowKind::Le => {
                a[i][slack] = BigRational::one();
                slack += 1;
            }
            RowKind::Ge => {
                a[i][slack] = -BigRational::one();
                slack += 1;
            }
            RowKind::Eq => {}
        }
        a[i][n_total] = row.rhs.clone();
        if row.rhs.is_negative() {
            sign[i] = -BigRational::one();
            for v in a[i].iter_mut() {
                *v = -v.clone();
            }
        }
        a[i][n + n_slack + i] = BigRational::one();
    }
    let mut obj = vec![BigRational::zero(); n_total + 1];
    for row in &a {
        for j in 0..n + n_slack {
            obj[j] -= &row[j];
        }
        obj[n_total] -= &row[n_total];
    }
    let mut t = Tableau { a, basis: (n + n_slack..n_total).collect(), obj };
    t.run();
    if t.obj[n_total].is_zero() {
        let mut x = vec![BigRational::zero(); n];
        for (i, &b) in t.basis.iter().enumerate() {
            if b < n {
                x[b] = t.a[i][n_total].clone();
            }
        }
        LpOutcome::Feasible(x)
    } else {
        // Artificial column i is e_i with cost 1, so its reduced cost is 1 - y_i.
        let y = (0..m).map(|i| (BigRational::one() - &t.obj[n + n_slack + i]) * &sign[i]).collect();
        LpOutcome::Infeasible(FarkasCertificate { y })
    }
}

/// Best rational approximation of `x` with denominator at most `max_den`.
pub fn rationalize(x: f64, max_den: u64) -> BigRational {
    if !x.is_finite() {
        return BigRational::zero();
    }
    let negative = x < 0.0;
    let mut v = x.abs();
    let (mut p0, mut q0, mut p1, mut q1): (i128, i128, i128, i128) = (0, 1, 1, 0);
    let max_den = max_den.max(1) as i128;
    for _ in 0..64 {
        let a = libm::floor(v);
        if a > 1e18 {
            break;
        }
        let a = a as i128;
        let q2 = a * q1 + q0;
        if q2 > max_den {
            let k = (max_den - q0) / q1.max(1);
            let (ps, qs) = (p0 + k * p1, q0 + k * q1);
            let semi = ps as f64 / qs as f64;
            let conv = if q1 == 0 { f64::INFINITY } else { p1 as f64 / q1 as f64 };
            if (semi - x.abs()).abs() < (conv - x.abs()).abs() {
                p1 = ps;
                q1 = qs;
            }
            break;
        }
        let p2 = a * p1 + p0;
        p0 = p1;
        q0 = q1;
        p1 = p2;
        q1 = q2;
        let frac = v - libm::floor(v);
        if frac < 1e-15 {
            break;
        }
        v = 1.0 / frac;
    }
    if q1 == 0 {
        return BigRational::zero();
    }
    let r = BigRational::new(BigInt::from(p1), BigInt::from(q1));
    if negative {
        -r
    } else {
        r
    }
}

pub fn to_f64(r: &BigRational) -> f64 {
    use num_traits::ToPrimitive;
    r.to_f64().unwrap_or(f64::NAN)
}
