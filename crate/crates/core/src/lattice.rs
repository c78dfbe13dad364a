//! Dense periodic-lattice discretisation of `h = h₀ + U`, its relativistic
//! square root `H = √(2h + m²) - m` and bound states of `H + V`.

use faer::{c64, Mat, Side};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::field::{FieldConfig, Potential};
use crate::geom::Point;

/// `n³` sites of spacing `side / n`, coordinates `-side/2 + iΔx`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lattice {
    pub n: usize,
    pub side: f64,
}

impl Lattice {
    pub fn new(n: usize, side: f64) -> Result<Self> {
        if n < 2 {
            return invalid(format!("lattice needs at least 2 points per axis, got {n}"));
        }
        if !(side > 0.0) || !side.is_finite() {
            return invalid(format!("lattice side must be positive, got {side}"));
        }
        Ok(Self { n, side })
    }

    pub fn spacing(&self) -> f64 {
        self.side / self.n as f64
    }

    pub fn n_sites(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn site(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.n + j) * self.n + k
    }

    pub fn coords(&self, site: usize) -> [usize; 3] {
        [site / (self.n * self.n), (site / self.n) % self.n, site % self.n]
    }

    pub fn position(&self, site: usize) -> Point {
        let c = self.coords(site);
        let h = self.spacing();
        let o = -0.5 * self.side;
        [o + c[0] as f64 * h, o + c[1] as f64 * h, o + c[2] as f64 * h]
    }

    /// Site reached from `site` by one step along `axis`, with wrap-around.
    pub fn neighbour(&self, site: usize, axis: usize) -> usize {
        let mut c = self.coords(site);
        c[axis] = (c[axis] + 1) % self.n;
        self.site(c[0], c[1], c[2])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorTag {
    /// `h = h₀ + U`.
    H,
    /// `h` with `a = 0` and `b₀` in place of `b`.
    HB0,
    /// `√(2h + m²) - m`.
    SqrtShift,
    HPlusV,
    Semigroup,
}

/// Dense Hermitian operator on the lattice, of dimension `2n³` with spin
/// (index `s·n³ + site`, `s = 0` for `θ = +1`) or `n³` without.
#[derive(Clone, Debug)]
pub struct OperatorMatrix {
    pub matrix: Mat<c64>,
    pub tag: OperatorTag,
    pub lattice: Lattice,
    pub spin: bool,
}

impl OperatorMatrix {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `max |A - A*| / max |A|`.
    pub fn hermiticity_defect(&self) -> f64 {
        let a = &self.matrix;
        let mut defect: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for j in 0..a.ncols() {
            for i in 0..a.nrows() {
                defect = defect.max((a[(i, j)] - a[(j, i)].conj()).norm());
                scale = scale.max(a[(i, j)].norm());
            }
        }
        if scale == 0.0 {
            0.0
        } else {
            defect / scale
        }
    }

    pub fn apply(&self, v: &[c64]) -> Vec<c64> {
        let a = &self.matrix;
        let mut out = vec![c64::new(0.0, 0.0); a.nrows()];
        for j in 0..a.ncols() {
            let vj = v[j];
            if vj == c64::new(0.0, 0.0) {
                continue;
            }
            for (i, o) in out.iter_mut().enumerate() {
                *o += a[(i, j)] * vj;
            }
        }
        out
    }

    pub fn eigen(&self) -> Result<Spectrum> {
        Spectrum::of(&self.matrix)
    }
}

/// Eigenvalues (nondecreasing) and orthonormal eigenvectors.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub values: Vec<f64>,
    pub vectors: Mat<c64>,
}

impl Spectrum {
    pub fn of(a: &Mat<c64>) -> Result<Self> {
        let evd = a
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| Error::NumericalFailure(format!("eigensolver: {e:?}")))?;
        let s = evd.S().column_vector();
        let values = (0..a.nrows()).map(|i| s[i].re).collect();
        Ok(Self { values, vectors: evd.U().to_owned() })
    }

    /// `U f(Λ) U*`.
    pub fn function<F: Fn(f64) -> f64>(&self, f: F) -> Mat<c64> {
        let u = &self.vectors;
        let n = u.nrows();
        let scaled = Mat::from_fn(n, n, |i, j| u[(i, j)] * f(self.values[j]));
        &scaled * u.adjoint()
    }
}

/// Builds `h = h₀ + U` with Peierls phases `e^{-i∫a}` on links (midpoint
/// rule) and an optional extra gauge term `χ(y) - χ(x)` from per-site
/// values.
pub fn build_h_with_gauge(fields: &FieldConfig, lattice: &Lattice, spin: bool, chi: Option<&[f64]>) -> Result<OperatorMatrix> {
    let ns = lattice.n_sites();
    if let Some(chi) = chi {
        if chi.len() != ns {
            return invalid(format!("gauge function has {} values for {ns} sites", chi.len()));
        }
    }
    let h = lattice.spacing();
    let dim = if spin { 2 * ns } else { ns };
    let mut m = Mat::<c64>::zeros(dim, dim);
    let blocks = if spin { 2 } else { 1 };
    let hop = -0.5 / (h * h);
    for site in 0..ns {
        let x = lattice.position(site);
        for axis in 0..3 {
            let y = lattice.neighbour(site, axis);
            let mut mid = x;
            mid[axis] += 0.5 * h;
            let mut phase = fields.vector_potential.eval(mid)[axis] * h;
            if let Some(chi) = chi {
                phase += chi[y] - chi[site];
            }
            let t = c64::from_polar(hop, -phase);
            for s in 0..blocks {
                let (a, b) = (s * ns + site, s * ns + y);
                m[(a, b)] += t;
                m[(b, a)] += t.conj();
            }
        }
        for s in 0..blocks {
            m[(s * ns + site, s * ns + site)] += c64::new(3.0 / (h * h), 0.0);
        }
        if spin {
            let b = fields.magnetic_field.eval(x);
            m[(site, site)] += c64::new(-0.5 * b[2], 0.0);
            m[(ns + site, ns + site)] += c64::new(0.5 * b[2], 0.0);
            // <(x, θ)|U|(x, -θ)> = -½(b₁ - iθ b₂)
            m[(site, ns + site)] += c64::new(-0.5 * b[0], 0.5 * b[1]);
            m[(ns + site, site)] += c64::new(-0.5 * b[0], -0.5 * b[1]);
        }
    }
    Ok(OperatorMatrix { matrix: m, tag: OperatorTag::H, lattice: *lattice, spin })
}

pub fn build_h(fields: &FieldConfig, lattice: &Lattice, spin: bool) -> Result<OperatorMatrix> {
    build_h_with_gauge(fields, lattice, spin, None)
}

/// `h` for the comparison fields `a = 0`, `b₀`.
pub fn build_h_b0(fields: &FieldConfig, lattice: &Lattice, spin: bool) -> Result<OperatorMatrix> {
    let mut op = build_h(&fields.diamagnetic_reference(), lattice, spin)?;
    op.tag = OperatorTag::HB0;
    Ok(op)
}

/// `H = √(2h + m²) - m`.
pub fn sqrt_shift(h: &OperatorMatrix, mass: f64) -> Result<OperatorMatrix> {
    if !(mass >= 0.0) {
        return invalid(format!("mass must be non-negative, got {mass}"));
    }
    let spec = h.eigen()?;
    let lowest = 2.0 * spec.values[0] + mass * mass;
    if lowest < -1e-10 {
        return Err(Error::NegativeShiftedSpectrum { eigenvalue: lowest });
    }
    let matrix = spec.function(|l| (2.0 * l + mass * mass).max(0.0).sqrt() - mass);
    Ok(OperatorMatrix { matrix, tag: OperatorTag::SqrtShift, lattice: h.lattice, spin: h.spin })
}

/// Adds `V` on the diagonal (after the square root).
pub fn add_potential(op: &OperatorMatrix, v: &Potential) -> OperatorMatrix {
    let mut out = op.clone();
    let ns = op.lattice.n_sites();
    for i in 0..op.dim() {
        let vx = v.eval(op.lattice.position(i % ns));
        out.matrix[(i, i)] += c64::new(vx, 0.0);
    }
    out.tag = OperatorTag::HPlusV;
    out
}

/// `H + V` for the given fields.
pub fn relativistic_hamiltonian(fields: &FieldConfig, lattice: &Lattice, mass: f64, spin: bool) -> Result<OperatorMatrix> {
    let h = build_h(fields, lattice, spin)?;
    Ok(add_potential(&sqrt_shift(&h, mass)?, &fields.potential))
}

/// `h + V`.
pub fn nonrelativistic_hamiltonian(fields: &FieldConfig, lattice: &Lattice, spin: bool) -> Result<OperatorMatrix> {
    Ok(add_potential(&build_h(fields, lattice, spin)?, &fields.potential))
}

/// `e^{-t(H+V)}`.
pub fn semigroup_matrix(op: &OperatorMatrix, t: f64) -> Result<OperatorMatrix> {
    if !(t >= 0.0) {
        return invalid(format!("t must be non-negative, got {t}"));
    }
    let matrix = op.eigen()?.function(|l| (-t * l).exp());
    Ok(OperatorMatrix { matrix, tag: OperatorTag::Semigroup, lattice: op.lattice, spin: op.spin })
}

/// Lowest eigenpair of a lattice operator. `phi` is unit-norm in `ℓ²`;
/// [`BoundState::value_at`] returns the continuum-normalised function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundState {
    pub energy: f64,
    pub phi: Vec<Complex64>,
    pub residual: f64,
    pub lattice: Lattice,
    pub spin: bool,
}

pub fn ground_state(op: &OperatorMatrix) -> Result<BoundState> {
    let spec = op.eigen()?;
    let energy = spec.values[0];
    let mut phi: Vec<c64> = (0..op.dim()).map(|i| spec.vectors[(i, 0)]).collect();
    let (imax, _) = phi.iter().enumerate().fold((0, -1.0), |best, (i, z)| if z.norm() > best.1 { (i, z.norm()) } else { best });
    let rot = phi[imax].conj() / phi[imax].norm();
    for z in phi.iter_mut() {
        *z *= rot;
    }
    phi[imax] = c64::new(phi[imax].re, 0.0);
    let norm = phi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    for z in phi.iter_mut() {
        *z /= norm;
    }
    let hphi = op.apply(&phi);
    let residual = hphi.iter().zip(&phi).map(|(a, b)| (a - b * energy).norm_sqr()).sum::<f64>().sqrt();
    if !(residual <= 1e-8) {
        return Err(Error::NumericalFailure(format!("ground state residual {residual:.3e} exceeds 1e-8")));
    }
    Ok(BoundState { energy, phi, residual, lattice: op.lattice, spin: op.spin })
}

impl BoundState {
    fn component(&self, site: usize, theta: f64) -> Complex64 {
        let ns = self.lattice.n_sites();
        if self.spin && theta < 0.0 {
            self.phi[ns + site]
        } else {
            self.phi[site]
        }
    }

    /// `φ_g(x, θ)` by periodic trilinear interpolation, scaled by
    /// `Δx^{-3/2}` so that `∫|φ_g|² dx ≈ 1`. Spinless states ignore `θ`.
    pub fn value_at(&self, x: Point, theta: f64) -> Complex64 {
        let lat = &self.lattice;
        let h = lat.spacing();
        let n = lat.n as i64;
        let mut base = [0i64; 3];
        let mut frac = [0.0; 3];
        for a in 0..3 {
            let u = (x[a] + 0.5 * lat.side) / h;
            let f = u.floor();
            base[a] = f as i64;
            frac[a] = u - f;
        }
        let wrap = |i: i64| i.rem_euclid(n) as usize;
        let mut acc = Complex64::new(0.0, 0.0);
        for corner in 0..8 {
            let mut w = 1.0;
            let mut idx = [0usize; 3];
            for a in 0..3 {
                let up = (corner >> a) & 1 == 1;
                w *= if up { frac[a] } else { 1.0 - frac[a] };
                idx[a] = wrap(base[a] + up as i64);
            }
            if w != 0.0 {
                acc += self.component(lat.site(idx[0], idx[1], idx[2]), theta) * w;
            }
        }
        acc / h.powf(1.5)
    }

    /// `‖φ_g‖_∞` of the continuum-normalised function.
    pub fn sup_norm(&self) -> f64 {
        self.phi.iter().map(|z| z.norm()).fold(0.0, f64::max) / self.lattice.spacing().powf(1.5)
    }

    /// Site modulus `max_θ |φ(x, θ)|`, continuum-normalised.
    pub fn site_modulus(&self, site: usize) -> f64 {
        let up = self.component(site, 1.0).norm();
        let down = if self.spin { self.component(site, -1.0).norm() } else { 0.0 };
        up.max(down) / self.lattice.spacing().powf(1.5)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    /// Periodic trilinear interpolation of the site values.
    #[default]
    Trilinear,
    /// Trigonometric interpolation: the unique band-limited periodic
    /// function through the site values (Nyquist modes taken as cosines).
    Spectral,
}

/// Off-lattice evaluation of a bound state, continuum-normalised.
#[derive(Clone, Debug)]
pub struct PhiInterpolant {
    kind: Interpolation,
    state: BoundState,
    /// Per spin component, DFT coefficients indexed like sites.
    coeffs: Vec<Vec<Complex64>>,
}

impl PhiInterpolant {
    pub fn new(state: &BoundState, kind: Interpolation) -> Self {
        let coeffs = match kind {
            Interpolation::Trilinear => Vec::new(),
            Interpolation::Spectral => {
                let ns = state.lattice.n_sites();
                let blocks = if state.spin { 2 } else { 1 };
                (0..blocks).map(|b| dft3(&state.phi[b * ns..(b + 1) * ns], state.lattice.n)).collect()
            }
        };
        Self { kind, state: state.clone(), coeffs }
    }

    pub fn value(&self, x: Point, theta: f64) -> Complex64 {
        match self.kind {
            Interpolation::Trilinear => self.state.value_at(x, theta),
            Interpolation::Spectral => {
                let lat = &self.state.lattice;
                let block = if self.state.spin && theta < 0.0 { 1 } else { 0 };
                let c = &self.coeffs[block];
                let n = lat.n;
                let basis: Vec<Vec<Complex64>> = (0..3).map(|a| trig_basis((x[a] + 0.5 * lat.side) / lat.spacing(), n)).collect();
                let mut acc = Complex64::new(0.0, 0.0);
                for i in 0..n {
                    for j in 0..n {
                        let bij = basis[0][i] * basis[1][j];
                        let row = &c[(i * n + j) * n..(i * n + j + 1) * n];
                        let inner: Complex64 = row.iter().zip(&basis[2]).map(|(a, b)| a * b).sum();
                        acc += bij * inner;
                    }
                }
                acc / lat.spacing().powf(1.5)
            }
        }
    }
}

/// `c_k = n⁻³ Σ_j φ_j e^{-2πi k·j/n}`, separably.
fn dft3(phi: &[Complex64], n: usize) -> Vec<Complex64> {
    let w: Vec<Complex64> = (0..n * n).map(|p| Complex64::from_polar(1.0 / n as f64, -2.0 * std::f64::consts::PI * (p % n) as f64 / n as f64)).collect();
    let mut cur = phi.to_vec();
    for axis in 0..3 {
        let stride = [n * n, n, 1][axis];
        let mut next = vec![Complex64::new(0.0, 0.0); cur.len()];
        for (idx, out) in next.iter_mut().enumerate() {
            let k = (idx / stride) % n;
            let base = idx - k * stride;
            *out = (0..n).map(|j| cur[base + j * stride] * w[(k * j) % n]).sum();
        }
        cur = next;
    }
    cur
}

/// Values at grid coordinate `u` of the interpolating basis for each DFT
/// index `k`: `e^{2πi k̃u/n}` with `k̃` the centred frequency.
fn trig_basis(u: f64, n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|k| {
            let kc = if 2 * k < n { k as f64 } else { k as f64 - n as f64 };
            if 2 * k == n {
                Complex64::new((std::f64::consts::PI * u).cos(), 0.0)
            } else {
                Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * kc * u / n as f64)
            }
        })
        .collect()
}

/// Free eigenvalues `½ Σ_μ (2 - 2cos(2πk_μ/n)) / Δx²` over all wave vectors,
/// sorted.
pub fn free_dispersion(lattice: &Lattice) -> Vec<f64> {
    let n = lattice.n;
    let h = lattice.spacing();
    let one: Vec<f64> = (0..n).map(|k| (2.0 - 2.0 * (2.0 * std::f64::consts::PI * k as f64 / n as f64).cos()) / (h * h)).collect();
    let mut out = Vec::with_capacity(n * n * n);
    for &a in &one {
        for &b in &one {
            for &c in &one {
                out.push(0.5 * (a + b + c));
            }
        }
    }
    out.sort_by(f64::total_cmp);
    out
}
