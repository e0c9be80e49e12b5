//! Finite-dimensional quantum objects: states, effects, measurements, channels and the
//! spectral quantities (kernels, supports, trace distance) the relations are built on.
//!
//! All arithmetic is double precision. Tolerances default to `1e-9` and can be overridden
//! per call through [`Tolerances`].
//!
//! Overlaps are always squared overlaps `|<a|b>|^2` unless a function says otherwise.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invariant, Error, Result};
use crate::linalg::{self, c64, eigh, ComplexMatrix, HermitianEigen, C64};

/// Largest Hilbert-space dimension accepted by constructors.
pub const MAX_DIM: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    pub herm: f64,
    pub psd: f64,
    pub trace: f64,
    pub sum: f64,
    /// Relative to the largest eigenvalue.
    pub kernel: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { herm: 1e-9, psd: 1e-9, trace: 1e-9, sum: 1e-9, kernel: 1e-9 }
    }
}

fn check_dim(d: usize) -> Result<()> {
    if d == 0 {
        return Err(invariant("dimension must be positive"));
    }
    if d > MAX_DIM {
        return Err(Error::DimensionTooLarge(d));
    }
    Ok(())
}

fn check_square(m: &ComplexMatrix) -> Result<usize> {
    if !m.is_square() {
        return Err(invariant(format!("matrix is {}x{}, expected square", m.rows(), m.cols())));
    }
    check_dim(m.rows())?;
    Ok(m.rows())
}

/// Density matrix: Hermitian, positive semidefinite, unit trace.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix(ComplexMatrix);

impl DensityMatrix {
    pub fn new(mat: ComplexMatrix) -> Result<Self> {
        Self::with_tolerances(mat, &Tolerances::default())
    }

    pub fn with_tolerances(mat: ComplexMatrix, tol: &Tolerances) -> Result<Self> {
        check_square(&mat)?;
        if !mat.is_hermitian(tol.herm) {
            return Err(invariant("density matrix is not Hermitian"));
        }
        let mat = mat.hermitian_part();
        let tr = mat.trace().re;
        if (tr - 1.0).abs() > tol.trace {
            return Err(invariant(format!("density matrix trace is {tr}, expected 1")));
        }
        let min = eigh(&mat).min_value();
        if min < -tol.psd {
            return Err(invariant(format!("density matrix has eigenvalue {min} < 0")));
        }
        Ok(Self(mat))
    }

    /// `|psi><psi|` for a (not necessarily normalised) nonzero vector.
    pub fn pure(psi: &[C64]) -> Result<Self> {
        check_dim(psi.len())?;
        let v = linalg::normalized(psi).ok_or_else(|| invariant("zero state vector"))?;
        Ok(Self(ComplexMatrix::projector(&v)))
    }

    pub fn maximally_mixed(d: usize) -> Result<Self> {
        check_dim(d)?;
        Ok(Self(ComplexMatrix::identity(d).scale(1.0 / d as f64)))
    }

    pub fn diagonal(p: &[f64]) -> Result<Self> {
        Self::new(ComplexMatrix::diag(p))
    }

    /// Convex combination of states of equal dimension.
    pub fn mixture(parts: &[(f64, &DensityMatrix)]) -> Result<Self> {
        let first = parts.first().ok_or_else(|| invariant("empty mixture"))?;
        let d = first.1.dim();
        let mut acc = ComplexMatrix::zeros(d, d);
        for (w, rho) in parts {
            if rho.dim() != d {
                return Err(Error::DimensionMismatch { expected: d, found: rho.dim() });
            }
            if *w < 0.0 {
                return Err(invariant("negative mixture weight"));
            }
            acc = acc.add(&rho.0.scale(*w));
        }
        Self::new(acc)
    }

    pub fn dim(&self) -> usize {
        self.0.rows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }

    pub fn eigen(&self) -> HermitianEigen {
        eigh(&self.0)
    }

    /// Rank counted with the relative kernel tolerance.
    pub fn rank(&self, tol_kernel: f64) -> usize {
        rank_of(&self.0, tol_kernel)
    }

    /// Returns the normalised vector if the state is pure within `tol_kernel`.
    pub fn pure_vector(&self, tol_kernel: f64) -> Option<Vec<C64>> {
        let eig = self.eigen();
        if rank_from_eigen(&eig, tol_kernel) == 1 && (eig.max_value() - 1.0).abs() < 1e-6 {
            Some(eig.vector(eig.values.len() - 1))
        } else {
            None
        }
    }
}

impl AsRef<ComplexMatrix> for DensityMatrix {
    fn as_ref(&self) -> &ComplexMatrix {
        &self.0
    }
}

/// POVM element: Hermitian with `0 <= E <= I`.
#[derive(Clone, Debug, PartialEq)]
pub struct Effect(ComplexMatrix);

impl Effect {
    pub fn new(mat: ComplexMatrix) -> Result<Self> {
        Self::with_tolerances(mat, &Tolerances::default())
    }

    pub fn with_tolerances(mat: ComplexMatrix, tol: &Tolerances) -> Result<Self> {
        check_square(&mat)?;
        if !mat.is_hermitian(tol.herm) {
            return Err(invariant("effect is not Hermitian"));
        }
        let mat = mat.hermitian_part();
        let eig = eigh(&mat);
        if eig.min_value() < -tol.psd {
            return Err(invariant(format!("effect has eigenvalue {} < 0", eig.min_value())));
        }
        if eig.max_value() > 1.0 + tol.psd {
            return Err(invariant(format!("effect has eigenvalue {} > 1", eig.max_value())));
        }
        Ok(Self(mat))
    }

    pub fn projector(v: &[C64]) -> Result<Self> {
        check_dim(v.len())?;
        let u = linalg::normalized(v).ok_or_else(|| invariant("zero vector"))?;
        Ok(Self(ComplexMatrix::projector(&u)))
    }

    pub fn identity(d: usize) -> Result<Self> {
        check_dim(d)?;
        Ok(Self(ComplexMatrix::identity(d)))
    }

    pub fn dim(&self) -> usize {
        self.0.rows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }
}

impl AsRef<ComplexMatrix> for Effect {
    fn as_ref(&self) -> &ComplexMatrix {
        &self.0
    }
}

/// Ordered list of effects summing to the identity.
#[derive(Clone, Debug, PartialEq)]
pub struct Measurement {
    effects: Vec<Effect>,
    labels: Vec<String>,
}

impl Measurement {
    pub fn new(effects: Vec<Effect>) -> Result<Self> {
        let labels = (0..effects.len()).map(|k| format!("{k}")).collect();
        Self::with_labels(effects, labels, &Tolerances::default())
    }

    pub fn with_labels(effects: Vec<Effect>, labels: Vec<String>, tol: &Tolerances) -> Result<Self> {
        let first = effects.first().ok_or_else(|| invariant("measurement has no effects"))?;
        let d = first.dim();
        if labels.len() != effects.len() {
            return Err(invariant("one label per outcome required"));
        }
        let mut sum = ComplexMatrix::zeros(d, d);
        for e in &effects {
            if e.dim() != d {
                return Err(Error::DimensionMismatch { expected: d, found: e.dim() });
            }
            sum = sum.add(e.matrix());
        }
        let dev = sum.max_abs_diff(&ComplexMatrix::identity(d));
        if dev > tol.sum {
            return Err(invariant(format!("effects must sum to the identity, deviation {dev:e} exceeds {:e}", tol.sum)));
        }
        Ok(Self { effects, labels })
    }

    /// Projective measurement in the orthonormal basis given by `vectors`.
    pub fn from_basis(vectors: &[Vec<C64>]) -> Result<Self> {
        let effects = vectors.iter().map(|v| Effect::projector(v)).collect::<Result<Vec<_>>>()?;
        Self::new(effects)
    }

    /// Product measurement with row-major joint outcome index.
    pub fn product(parts: &[&Measurement]) -> Result<Self> {
        let mut effects: Vec<ComplexMatrix> = vec![ComplexMatrix::identity(1)];
        for m in parts {
            let mut next = Vec::with_capacity(effects.len() * m.len());
            for e in &effects {
                for f in m.effects() {
                    next.push(e.kron(f.matrix()));
                }
            }
            effects = next;
        }
        check_dim(effects[0].rows())?;
        Self::new(effects.into_iter().map(Effect).collect())
    }

    pub fn dim(&self) -> usize {
        self.effects[0].dim()
    }

    pub fn len(&self) -> usize {
        self.effects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.effects.is_empty()
    }

    pub fn effects(&self) -> &[Effect] {
        &self.effects
    }

    pub fn effect(&self, k: usize) -> Option<&Effect> {
        self.effects.get(k)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }
}

/// Completely positive trace-preserving map in Kraus form.
#[derive(Clone, Debug, PartialEq)]
pub struct Channel {
    kraus: Vec<ComplexMatrix>,
}

impl Channel {
    pub fn new(kraus: Vec<ComplexMatrix>) -> Result<Self> {
        Self::with_tolerances(kraus, &Tolerances::default())
    }

    pub fn with_tolerances(kraus: Vec<ComplexMatrix>, tol: &Tolerances) -> Result<Self> {
        let first = kraus.first().ok_or_else(|| invariant("channel has no Kraus operators"))?;
        let (dout, din) = (first.rows(), first.cols());
        check_dim(din)?;
        check_dim(dout)?;
        let mut sum = ComplexMatrix::zeros(din, din);
        for k in &kraus {
            if (k.rows(), k.cols()) != (dout, din) {
                return Err(invariant("Kraus operators have inconsistent shapes"));
            }
            sum = sum.add(&k.adjoint().matmul(k));
        }
        let dev = sum.max_abs_diff(&ComplexMatrix::identity(din));
        if dev > tol.sum {
            return Err(invariant(format!("channel is not trace preserving (deviation {dev})")));
        }
        Ok(Self { kraus })
    }

    pub fn identity(d: usize) -> Result<Self> {
        Self::new(vec![ComplexMatrix::identity(d)])
    }

    pub fn unitary(u: ComplexMatrix) -> Result<Self> {
        Self::new(vec![u])
    }

    /// Qubit dephasing `rho -> (1 - p) rho + p Z rho Z`.
    pub fn dephasing(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidArgument(format!("dephasing strength {p} not in [0,1]")));
        }
        let z = ComplexMatrix::diag(&[1.0, -1.0]);
        Self::new(vec![ComplexMatrix::identity(2).scale(libm::sqrt(1.0 - p)), z.scale(libm::sqrt(p))])
    }

    /// `rho -> (1 - p) rho + p tr(rho) I/d`, built from the Weyl-Heisenberg operators.
    pub fn depolarizing(d: usize, p: f64) -> Result<Self> {
        check_dim(d)?;
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidArgument(format!("depolarizing strength {p} not in [0,1]")));
        }
        let omega = 2.0 * core::f64::consts::PI / d as f64;
        let mut kraus = Vec::with_capacity(d * d);
        let dd = (d * d) as f64;
        for a in 0..d {
            for b in 0..d {
                // X^a Z^b
                let w = ComplexMatrix::from_fn(d, d, |i, j| {
                    if i == (j + a) % d {
                        let ph = omega * (b * j) as f64;
                        c64(libm::cos(ph), libm::sin(ph))
                    } else {
                        c64(0.0, 0.0)
                    }
                });
                let weight = if a == 0 && b == 0 { 1.0 - p + p / dd } else { p / dd };
                if weight > 0.0 {
                    kraus.push(w.scale(libm::sqrt(weight)));
                }
            }
        }
        Self::new(kraus)
    }

    /// Replacement channel `X -> tr(X) tau`.
    pub fn replacement(din: usize, tau: &DensityMatrix) -> Result<Self> {
        check_dim(din)?;
        let eig = tau.eigen();
        let dout = tau.dim();
        let mut kraus = Vec::new();
        for (k, &t) in eig.values.iter().enumerate() {
            if t <= 0.0 {
                continue;
            }
            let v = eig.vector(k);
            for j in 0..din {
                let mut basis = vec![c64(0.0, 0.0); din];
                basis[j] = c64(1.0, 0.0);
                kraus.push(ComplexMatrix::outer(&v, &basis).scale(libm::sqrt(t)));
            }
        }
        let _ = dout;
        Self::new(kraus)
    }

    /// `(1 - eps) self + eps other`, both with the same input and output dimensions.
    pub fn convex_mix(&self, eps: f64, other: &Channel) -> Result<Self> {
        if (self.d_in(), self.d_out()) != (other.d_in(), other.d_out()) {
            return Err(Error::DimensionMismatch { expected: self.d_in(), found: other.d_in() });
        }
        let mut kraus: Vec<ComplexMatrix> =
            self.kraus.iter().map(|k| k.scale(libm::sqrt(1.0 - eps))).collect();
        kraus.extend(other.kraus.iter().map(|k| k.scale(libm::sqrt(eps))));
        kraus.retain(|k| k.max_abs() > 0.0);
        Self::new(kraus)
    }

    /// `second` after `self`.
    pub fn then(&self, second: &Channel) -> Result<Self> {
        if self.d_out() != second.d_in() {
            return Err(Error::DimensionMismatch { expected: self.d_out(), found: second.d_in() });
        }
        let mut kraus = Vec::new();
        for b in &second.kraus {
            for a in &self.kraus {
                kraus.push(b.matmul(a));
            }
        }
        Self::new(kraus)
    }

    pub fn d_in(&self) -> usize {
        self.kraus[0].cols()
    }

    pub fn d_out(&self) -> usize {
        self.kraus[0].rows()
    }

    pub fn kraus(&self) -> &[ComplexMatrix] {
        &self.kraus
    }

    /// Applies the map to an arbitrary `d_in x d_in` operator.
    pub fn apply_matrix(&self, x: &ComplexMatrix) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(self.d_out(), self.d_out());
        for k in &self.kraus {
            out = out.add(&k.matmul(x).matmul(&k.adjoint()));
        }
        out
    }

    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        if rho.dim() != self.d_in() {
            return Err(Error::DimensionMismatch { expected: self.d_in(), found: rho.dim() });
        }
        DensityMatrix::new(self.apply_matrix(rho.matrix()))
    }
}

/// Orthonormal basis of an (approximate) kernel.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelBasis {
    pub dim: usize,
    pub basis_vectors: Vec<Vec<C64>>,
    pub tolerance_used: f64,
}

impl KernelBasis {
    pub fn nullity(&self) -> usize {
        self.basis_vectors.len()
    }
}

fn rank_from_eigen(eig: &HermitianEigen, tol_kernel: f64) -> usize {
    let lmax = eig.values.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if lmax == 0.0 {
        return 0;
    }
    eig.values.iter().filter(|&&x| x > tol_kernel * lmax).count()
}

pub fn rank_of(m: &ComplexMatrix, tol_kernel: f64) -> usize {
    rank_from_eigen(&eigh(m), tol_kernel)
}

/// `Re tr(E rho)` clamped into `[0, 1]` when it overshoots by at most the default tolerance.
pub fn born_probability(rho: &DensityMatrix, effect: &Effect) -> Result<f64> {
    if rho.dim() != effect.dim() {
        return Err(Error::DimensionMismatch { expected: rho.dim(), found: effect.dim() });
    }
    Ok(clamp_probability(trace_product(effect.matrix(), rho.matrix())))
}

/// `Re tr(A B)` without forming the product.
pub fn trace_product(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    let n = a.rows();
    let mut s = c64(0.0, 0.0);
    for i in 0..n {
        for j in 0..a.cols() {
            s += a[(i, j)] * b[(j, i)];
        }
    }
    s.re
}

fn clamp_probability(p: f64) -> f64 {
    let tol = Tolerances::default().sum;
    if (-tol..0.0).contains(&p) {
        0.0
    } else if p > 1.0 && p <= 1.0 + tol {
        1.0
    } else {
        p
    }
}

/// `cos(phi/2)|0> + sin(phi/2)|1>`.
pub fn bloch_state(phi: f64) -> Vec<C64> {
    vec![c64(libm::cos(phi / 2.0), 0.0), c64(libm::sin(phi / 2.0), 0.0)]
}

/// Eigenvectors with eigenvalue at most `tol_kernel * lambda_max`; the full space when `M = 0`.
pub fn kernel_basis(m: &ComplexMatrix, tol_kernel: f64) -> Result<KernelBasis> {
    let d = check_square(m)?;
    if !m.is_hermitian(Tolerances::default().herm.max(1e-9 * m.max_abs())) {
        return Err(invariant("kernel_basis needs a Hermitian matrix"));
    }
    let eig = eigh(m);
    let lmax = eig.values.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    let basis_vectors = (0..d)
        .filter(|&k| lmax == 0.0 || eig.values[k] <= tol_kernel * lmax)
        .map(|k| eig.vector(k))
        .collect();
    Ok(KernelBasis { dim: d, basis_vectors, tolerance_used: tol_kernel })
}

/// Projector onto the span of eigenvectors with eigenvalue above `tol_kernel * lambda_max`.
pub fn support_projector(m: &ComplexMatrix, tol_kernel: f64) -> ComplexMatrix {
    let eig = eigh(m);
    let lmax = eig.values.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    eig.reconstruct_with(|x| if lmax > 0.0 && x > tol_kernel * lmax { 1.0 } else { 0.0 })
}

/// Mutual-subspace test: every kernel vector of `a` is annihilated by the support projector of
/// `b` and vice versa.
///
/// The projected norm is compared against `sqrt(tol_kernel)`: that quantity is a subspace
/// angle, which carries the square root of the spectral error.
pub fn same_kernel<A: AsRef<ComplexMatrix>, B: AsRef<ComplexMatrix>>(
    a: &A,
    b: &B,
    tol_kernel: f64,
) -> Result<bool> {
    let (a, b) = (a.as_ref(), b.as_ref());
    if a.rows() != b.rows() {
        return Err(Error::DimensionMismatch { expected: a.rows(), found: b.rows() });
    }
    let ka = kernel_basis(a, tol_kernel)?;
    let kb = kernel_basis(b, tol_kernel)?;
    if ka.nullity() != kb.nullity() {
        return Ok(false);
    }
    let angle_tol = libm::sqrt(tol_kernel);
    let pa = support_projector(a, tol_kernel);
    let pb = support_projector(b, tol_kernel);
    let annihilated = |p: &ComplexMatrix, vs: &KernelBasis| {
        vs.basis_vectors.iter().all(|v| linalg::norm(&p.mat_vec(v)) <= angle_tol)
    };
    Ok(annihilated(&pb, &ka) && annihilated(&pa, &kb))
}

/// Unnormalised trace distance `|rho - sigma|_1`, in `[0, 2]`.
pub fn trace_distance(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch { expected: rho.dim(), found: sigma.dim() });
    }
    // Fixed argument order keeps the result bitwise symmetric.
    let (a, b) = (rho.matrix().as_slice(), sigma.matrix().as_slice());
    let swap = a
        .iter()
        .zip(b)
        .find(|(x, y)| x != y)
        .is_some_and(|(x, y)| (x.re, x.im).partial_cmp(&(y.re, y.im)) == Some(core::cmp::Ordering::Greater));
    let (first, second) = if swap { (sigma, rho) } else { (rho, sigma) };
    Ok(trace_norm(&first.matrix().sub(second.matrix())))
}

/// Sum of absolute eigenvalues of a Hermitian matrix.
pub fn trace_norm(h: &ComplexMatrix) -> f64 {
    eigh(h).values.iter().map(|x| x.abs()).sum()
}

/// Largest absolute eigenvalue of a Hermitian matrix.
pub fn operator_norm(h: &ComplexMatrix) -> f64 {
    eigh(h).values.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// `(1 - eps) rho + eps tau` with `tau` full rank.
pub fn smooth_state(rho: &DensityMatrix, eps: f64, tau: &DensityMatrix) -> Result<DensityMatrix> {
    if rho.dim() != tau.dim() {
        return Err(Error::DimensionMismatch { expected: rho.dim(), found: tau.dim() });
    }
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::InvalidArgument(format!("eps {eps} not in [0,1]")));
    }
    if tau.rank(Tolerances::default().kernel) != tau.dim() {
        return Err(invariant("smoothing target is not full rank"));
    }
    DensityMatrix::new(rho.matrix().affine(1.0 - eps, tau.matrix(), eps))
}

/// `|Phi+> = d^{-1/2} sum_i |i>|i>`.
pub fn max_entangled(d: usize) -> Vec<C64> {
    let mut v = vec![c64(0.0, 0.0); d * d];
    let amp = 1.0 / libm::sqrt(d as f64);
    for i in 0..d {
        v[i * d + i] = c64(amp, 0.0);
    }
    v
}

/// `(id (x) ch)(|Phi+><Phi+|)` with the reference system as the first tensor factor.
pub fn choi_state(ch: &Channel) -> Result<DensityMatrix> {
    let din = ch.d_in();
    let dout = ch.d_out();
    check_dim(din * dout)?;
    let mut out = ComplexMatrix::zeros(din * dout, din * dout);
    for i in 0..din {
        for j in 0..din {
            let mut eij = ComplexMatrix::zeros(din, din);
            eij[(i, j)] = c64(1.0, 0.0);
            let block = ch.apply_matrix(&eij);
            for a in 0..dout {
                for b in 0..dout {
                    out[(i * dout + a, j * dout + b)] = block[(a, b)] / din as f64;
                }
            }
        }
    }
    DensityMatrix::new(out)
}

/// Kronecker product with index `i * dim(B) + j`.
pub fn tensor(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kron(b)
}

/// `|<a|b>|^2` for normalised vectors.
pub fn squared_overlap(a: &[C64], b: &[C64]) -> f64 {
    linalg::inner(a, b).norm_sqr()
}

/// Whether `0 <= M <= I` within `tol`.
pub fn is_effect_matrix(m: &ComplexMatrix, tol: f64) -> bool {
    if !m.is_square() || !m.is_hermitian(tol.max(1e-12)) {
        return false;
    }
    let eig = eigh(&m.hermitian_part());
    eig.min_value() >= -tol && eig.max_value() <= 1.0 + tol
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;

    fn ket(v: &[f64]) -> Vec<C64> {
        v.iter().map(|&x| c64(x, 0.0)).collect()
    }

    #[test]
    fn born_examples() {
        let zero = DensityMatrix::pure(&ket(&[1.0, 0.0])).unwrap();
        let e0 = Effect::projector(&ket(&[1.0, 0.0])).unwrap();
        assert_eq!(born_probability(&zero, &e0).unwrap(), 1.0);

        let half = DensityMatrix::pure(&bloch_state(PI / 2.0)).unwrap();
        assert!((born_probability(&half, &e0).unwrap() - 0.5).abs() < 1e-12);

        let phi = PI / 4.0;
        let e = Effect::projector(&bloch_state(PI + phi)).unwrap();
        let p = born_probability(&half, &e).unwrap();
        let expected = libm::cos(3.0 * PI / 8.0).powi(2);
        assert!((p - expected).abs() < 1e-12);
        assert!((p - 0.14645).abs() < 1e-5);
    }

    #[test]
    fn born_dimension_mismatch() {
        let rho = DensityMatrix::maximally_mixed(2).unwrap();
        let e = Effect::identity(3).unwrap();
        assert!(matches!(born_probability(&rho, &e), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn bloch_state_examples() {
        let s = bloch_state(0.0);
        assert_eq!((s[0].re, s[1].re), (1.0, 0.0));
        let s = bloch_state(PI);
        assert!(s[0].re.abs() < 1e-15 && (s[1].re - 1.0).abs() < 1e-15);
        let s = bloch_state(PI / 2.0);
        let h = core::f64::consts::FRAC_1_SQRT_2;
        assert!((s[0].re - h).abs() < 1e-15 && (s[1].re - h).abs() < 1e-15);
    }

    #[test]
    fn kernel_examples() {
        let p0 = ComplexMatrix::diag(&[1.0, 0.0]);
        let k = kernel_basis(&p0, 1e-9).unwrap();
        assert_eq!(k.nullity(), 1);
        assert!((k.basis_vectors[0][1].norm() - 1.0).abs() < 1e-12);

        let mixed = ComplexMatrix::identity(2).scale(0.5);
        assert_eq!(kernel_basis(&mixed, 1e-9).unwrap().nullity(), 0);

        let a = DensityMatrix::pure(&bloch_state(PI / 4.0)).unwrap();
        let b = DensityMatrix::pure(&bloch_state(-PI / 2.0)).unwrap();
        let mix = DensityMatrix::mixture(&[(0.5, &a), (0.5, &b)]).unwrap();
        assert_eq!(kernel_basis(mix.matrix(), 1e-9).unwrap().nullity(), 0);

        // M = 0 has the whole space as kernel.
        assert_eq!(kernel_basis(&ComplexMatrix::zeros(3, 3), 1e-9).unwrap().nullity(), 3);
    }

    #[test]
    fn kernel_rejects_non_hermitian() {
        let m = ComplexMatrix::from_real(2, 2, &[0.0, 1.0, 0.0, 0.0]).unwrap();
        assert!(kernel_basis(&m, 1e-9).is_err());
    }

    #[test]
    fn same_kernel_examples() {
        let a = ComplexMatrix::diag(&[0.5, 0.5]);
        let b = ComplexMatrix::diag(&[0.75, 0.25]);
        assert!(same_kernel(&a, &b, 1e-9).unwrap());
        let a = ComplexMatrix::diag(&[1.0, 0.0]);
        let b = ComplexMatrix::diag(&[0.0, 1.0]);
        assert!(!same_kernel(&a, &b, 1e-9).unwrap());
        for (p, q) in [(0.3, 0.6), (0.01, 0.99), (0.5, 0.5)] {
            let a = ComplexMatrix::diag(&[p, 1.0 - p, 0.0]);
            let b = ComplexMatrix::diag(&[q, 1.0 - q, 0.0]);
            assert!(same_kernel(&a, &b, 1e-9).unwrap());
        }
        let c = ComplexMatrix::diag(&[0.5, 0.0, 0.5]);
        assert!(!same_kernel(&ComplexMatrix::diag(&[0.5, 0.5, 0.0]), &c, 1e-9).unwrap());
        assert!(same_kernel(&a, &ComplexMatrix::zeros(3, 3), 1e-9).is_err());
    }

    #[test]
    fn trace_distance_examples() {
        let rho = DensityMatrix::diagonal(&[0.75, 0.25]).unwrap();
        assert!(trace_distance(&rho, &rho).unwrap().abs() < 1e-15);
        let z0 = DensityMatrix::diagonal(&[1.0, 0.0]).unwrap();
        let z1 = DensityMatrix::diagonal(&[0.0, 1.0]).unwrap();
        assert!((trace_distance(&z0, &z1).unwrap() - 2.0).abs() < 1e-12);
        let mm = DensityMatrix::maximally_mixed(2).unwrap();
        assert!((trace_distance(&rho, &mm).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn smoothing_examples() {
        let mm = DensityMatrix::maximally_mixed(2).unwrap();
        let z0 = DensityMatrix::diagonal(&[1.0, 0.0]).unwrap();
        assert_eq!(smooth_state(&z0, 0.0, &mm).unwrap(), z0);
        let s = smooth_state(&z0, 0.1, &mm).unwrap();
        assert!(s.matrix().max_abs_diff(&ComplexMatrix::diag(&[0.95, 0.05])) < 1e-15);
        let z1 = DensityMatrix::diagonal(&[0.0, 1.0]).unwrap();
        let t = smooth_state(&z1, 0.1, &mm).unwrap();
        assert!(same_kernel(&s, &t, 1e-9).unwrap());
        assert!(smooth_state(&z0, 0.1, &z1).is_err());
    }

    #[test]
    fn choi_examples() {
        let id = choi_state(&Channel::identity(2).unwrap()).unwrap();
        let phi = DensityMatrix::pure(&max_entangled(2)).unwrap();
        assert!(id.matrix().max_abs_diff(phi.matrix()) < 1e-15);

        let dep = choi_state(&Channel::depolarizing(2, 1.0).unwrap()).unwrap();
        let mm4 = DensityMatrix::maximally_mixed(4).unwrap();
        assert!(dep.matrix().max_abs_diff(mm4.matrix()) < 1e-12);

        let a = choi_state(&Channel::dephasing(0.3).unwrap()).unwrap();
        let b = choi_state(&Channel::dephasing(0.7).unwrap()).unwrap();
        assert!(same_kernel(&a, &b, 1e-9).unwrap());
        assert_eq!(a.rank(1e-9), 2);
        assert!(!same_kernel(&id, &dep, 1e-9).unwrap());
    }

    #[test]
    fn tensor_examples() {
        let i4 = tensor(&ComplexMatrix::identity(2), &ComplexMatrix::identity(2));
        assert_eq!(i4, ComplexMatrix::identity(4));
        let a = ComplexMatrix::projector(&bloch_state(0.3));
        let b = ComplexMatrix::projector(&bloch_state(1.1));
        assert!((tensor(&a, &b).trace().re - 1.0).abs() < 1e-14);
    }

    #[test]
    fn density_invariants_enforced() {
        assert!(DensityMatrix::diagonal(&[0.6, 0.6]).is_err());
        assert!(DensityMatrix::diagonal(&[1.5, -0.5]).is_err());
        let nh = ComplexMatrix::from_real(2, 2, &[0.5, 0.2, 0.0, 0.5]).unwrap();
        assert!(DensityMatrix::new(nh).is_err());
        assert!(Effect::new(ComplexMatrix::diag(&[1.2, 0.0])).is_err());
        assert!(Measurement::new(vec![Effect::new(ComplexMatrix::diag(&[1.0, 0.0])).unwrap()]).is_err());
        assert!(DensityMatrix::maximally_mixed(MAX_DIM + 1).is_err());
    }

    #[test]
    fn product_measurement_sums_to_identity() {
        let z = Measurement::from_basis(&[bloch_state(0.0), bloch_state(PI)]).unwrap();
        let x = Measurement::from_basis(&[bloch_state(PI / 2.0), bloch_state(3.0 * PI / 2.0)]).unwrap();
        let zx = Measurement::product(&[&z, &x]).unwrap();
        assert_eq!(zx.len(), 4);
        assert_eq!(zx.dim(), 4);
    }

    #[test]
    fn channel_composition_and_replacement() {
        let h = ComplexMatrix::from_real(2, 2, &[1.0, 1.0, 1.0, -1.0]).unwrap().scale(1.0 / libm::sqrt(2.0));
        let hh = Channel::unitary(h.clone()).unwrap().then(&Channel::unitary(h).unwrap()).unwrap();
        let a = choi_state(&hh).unwrap();
        let b = choi_state(&Channel::identity(2).unwrap()).unwrap();
        assert!(a.matrix().max_abs_diff(b.matrix()) < 1e-12);

        let tau = DensityMatrix::diagonal(&[0.7, 0.3]).unwrap();
        let rep = Channel::replacement(2, &tau).unwrap();
        let out = rep.apply(&DensityMatrix::diagonal(&[0.0, 1.0]).unwrap()).unwrap();
        assert!(out.matrix().max_abs_diff(tau.matrix()) < 1e-12);
    }
}
