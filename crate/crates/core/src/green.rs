//! Surface response of a homogeneous isotropic elastic half space to a point
//! dislocation.
//!
//! Coordinates are `(x1, x2, x3)` in km with `x3` pointing up; the medium
//! occupies `x3 < 0` and the free surface is `x3 = 0`. A point dislocation is
//! a unit tangential slip `s` across an infinitesimal patch with unit normal
//! `n` (the "+" side is the one `n` points into). Displacements are returned
//! per unit potency (slip x area), so with slip in mm and patch area in km²
//! the result is in mm.
//!
//! Two independent evaluation routes are provided:
//!
//! * [`green_surface`] / [`SurfaceKernel`]: the closed-form point-source
//!   solution specialised to receivers on `x3 = 0` (Okada 1985 form). This
//!   is the production path used to assemble forward operators.
//! * [`dislocation_field`]: the full interior field, obtained as the Volterra
//!   contraction `u_k = M_pq ∂G_kp/∂ξ_q` of Mindlin's point-force solution
//!   with the moment density `M = μ (s nᵀ + n sᵀ)`. Source derivatives are
//!   taken exactly with forward-mode dual numbers. [`verify_field`] checks
//!   this field against the Navier equations and the traction-free surface.

use std::ops::{Add, Div, Mul, Neg, Sub};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum source/receiver separation (km) accepted by the evaluators.
pub const SINGULAR_RADIUS_KM: f64 = 1e-6;

/// Tolerance used to accept unit vectors and tangency.
const UNIT_TOL: f64 = 1e-12;

/// Lamé parameters of the half space, in consistent model units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElasticMedium {
    pub lambda: f64,
    pub mu: f64,
}

impl Default for ElasticMedium {
    /// `λ = μ = 1`, Poisson ratio 0.25.
    fn default() -> Self {
        ElasticMedium {
            lambda: 1.0,
            mu: 1.0,
        }
    }
}

impl ElasticMedium {
    pub fn new(lambda: f64, mu: f64) -> Result<Self> {
        let m = ElasticMedium { lambda, mu };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.mu > 0.0) || !self.lambda.is_finite() || !self.mu.is_finite()
        {
            return Err(Error::Config(format!(
                "Lamé parameters must be positive and finite (lambda = {}, mu = {})",
                self.lambda, self.mu
            )));
        }
        Ok(())
    }

    pub fn poisson_ratio(&self) -> f64 {
        self.lambda / (2.0 * (self.lambda + self.mu))
    }
}

/// Fault plane `x3 = a·x1 + b·x2 + d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometryParam {
    pub a: f64,
    pub b: f64,
    pub d: f64,
}

impl GeometryParam {
    pub fn new(a: f64, b: f64, d: f64) -> Self {
        GeometryParam { a, b, d }
    }

    /// Height of the plane above `(y1, y2)`.
    #[inline]
    pub fn depth_at(&self, y1: f64, y2: f64) -> f64 {
        self.a * y1 + self.b * y2 + self.d
    }

    /// Upward unit normal `(-a, -b, 1) / √(1 + a² + b²)`.
    pub fn normal(&self) -> [f64; 3] {
        let s = self.jacobian();
        [-self.a / s, -self.b / s, 1.0 / s]
    }

    /// Area stretch factor of the plane over its horizontal projection.
    #[inline]
    pub fn jacobian(&self) -> f64 {
        (1.0 + self.a * self.a + self.b * self.b).sqrt()
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.a, self.b, self.d]
    }
}

/// A point dislocation: location, unit slip direction, unit fault normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DislocationSource {
    pub position: [f64; 3],
    pub slip_direction: [f64; 3],
    pub fault_normal: [f64; 3],
}

impl DislocationSource {
    pub fn new(position: [f64; 3], slip_direction: [f64; 3], fault_normal: [f64; 3]) -> Result<Self> {
        let src = DislocationSource {
            position,
            slip_direction,
            fault_normal,
        };
        src.validate()?;
        Ok(src)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.position[2] < 0.0) {
            return Err(Error::SourceAboveSurface(self.position[2]));
        }
        check_frame(&self.slip_direction, &self.fault_normal)
    }
}

fn check_frame(slip: &[f64; 3], normal: &[f64; 3]) -> Result<()> {
    if (norm3(slip) - 1.0).abs() > UNIT_TOL || (norm3(normal) - 1.0).abs() > UNIT_TOL {
        return Err(Error::Config(format!(
            "slip direction and fault normal must be unit vectors (|s| = {}, |n| = {})",
            norm3(slip),
            norm3(normal)
        )));
    }
    let dot = dot3(slip, normal);
    if dot.abs() > UNIT_TOL {
        return Err(Error::NonTangentialSlip(dot));
    }
    Ok(())
}

#[inline]
pub(crate) fn dot3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub(crate) fn norm3(a: &[f64; 3]) -> f64 {
    dot3(a, a).sqrt()
}

#[inline]
pub(crate) fn cross3(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Surface displacement at `x = (x1, x2, 0)` per unit potency of `src`.
pub fn green_surface(medium: &ElasticMedium, src: &DislocationSource, x: [f64; 2]) -> Result<[f64; 3]> {
    medium.validate()?;
    src.validate()?;
    let kernel = SurfaceKernel::new(medium, src.slip_direction, src.fault_normal)?;
    kernel.eval(src.position, x)
}

/// Precomputed strike/dip frame for a fixed slip direction and normal.
///
/// On a planar fault every node shares the same frame, so the forward
/// operator builds one kernel per geometry and evaluates all node/station
/// pairs through it.
#[derive(Debug, Clone, Copy)]
pub struct SurfaceKernel {
    strike: [f64; 3],
    updip: [f64; 3],
    cos_dip: f64,
    sin_dip: f64,
    strike_slip: f64,
    dip_slip: f64,
    // μ / (λ + μ)
    ratio: f64,
    // ±1 from normalising the normal to point upward
    sign: f64,
}

impl SurfaceKernel {
    pub fn new(medium: &ElasticMedium, slip: [f64; 3], normal: [f64; 3]) -> Result<Self> {
        check_frame(&slip, &normal)?;
        // The Volterra field is odd in n, so flip to an upward normal and
        // carry the sign.
        let (n, sign) = if normal[2] < 0.0 {
            ([-normal[0], -normal[1], -normal[2]], -1.0)
        } else {
            (normal, 1.0)
        };
        let cos_dip = n[2];
        let horiz = n[0].hypot(n[1]);
        let sin_dip = horiz;
        let updip_h = if horiz < 1e-14 {
            [0.0, 1.0, 0.0]
        } else {
            [-n[0] / horiz, -n[1] / horiz, 0.0]
        };
        let strike = [updip_h[1], -updip_h[0], 0.0];
        let dip_vec = [cos_dip * updip_h[0], cos_dip * updip_h[1], sin_dip];
        Ok(SurfaceKernel {
            strike,
            updip: updip_h,
            cos_dip,
            sin_dip,
            strike_slip: dot3(&slip, &strike),
            dip_slip: dot3(&slip, &dip_vec),
            ratio: medium.mu / (medium.lambda + medium.mu),
            sign,
        })
    }

    /// Displacement at surface point `x` from a unit-potency source at `pos`.
    pub fn eval(&self, pos: [f64; 3], x: [f64; 2]) -> Result<[f64; 3]> {
        if !(pos[2] < 0.0) {
            return Err(Error::SourceAboveSurface(pos[2]));
        }
        let r = [x[0] - pos[0], x[1] - pos[1], -pos[2]];
        if norm3(&r) < SINGULAR_RADIUS_KM {
            return Err(Error::SingularPoint(SINGULAR_RADIUS_KM));
        }
        Ok(self.eval_unchecked(pos, x))
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, pos: [f64; 3], x: [f64; 2]) -> [f64; 3] {
        let d = -pos[2];
        let dx = x[0] - pos[0];
        let dy = x[1] - pos[1];
        // local strike/up-dip coordinates
        let xs = dx * self.strike[0] + dy * self.strike[1];
        let ys = dx * self.updip[0] + dy * self.updip[1];
        let (cd, sd) = (self.cos_dip, self.sin_dip);

        let r2 = xs * xs + ys * ys + d * d;
        let r = r2.sqrt();
        let r3 = r2 * r;
        let r5 = r3 * r2;
        let rd = r + d;
        let rd2 = rd * rd;
        let rd3 = rd2 * rd;
        let p = ys * cd + d * sd;
        let q = ys * sd - d * cd;
        let f = self.ratio;

        let i1 = f * ys * (1.0 / (r * rd2) - xs * xs * (3.0 * r + d) / (r3 * rd3));
        let i2 = f * xs * (1.0 / (r * rd2) - ys * ys * (3.0 * r + d) / (r3 * rd3));
        let i3 = f * xs / r3 - i2;
        let i4 = -f * xs * ys * (2.0 * r + d) / (r3 * rd2);
        let i5 = f * (1.0 / (r * rd) - xs * xs * (2.0 * r + d) / (r3 * rd2));

        let c = -1.0 / (2.0 * std::f64::consts::PI);
        let u1 = self.strike_slip * c;
        let u2 = self.dip_slip * c;
        let q5 = 3.0 * q / r5;
        let ux = u1 * (xs * xs * q5 + i1 * sd) + u2 * (xs * p * q5 - i3 * sd * cd);
        let uy = u1 * (xs * ys * q5 + i2 * sd) + u2 * (ys * p * q5 - i1 * sd * cd);
        let uz = u1 * (xs * d * q5 + i4 * sd) + u2 * (d * p * q5 - i5 * sd * cd);

        let s = self.sign;
        [
            s * (ux * self.strike[0] + uy * self.updip[0]),
            s * (ux * self.strike[1] + uy * self.updip[1]),
            s * uz,
        ]
    }
}

// --- interior field -------------------------------------------------------

trait Scalar:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Div<Output = Self> + Neg<Output = Self>
{
    fn cst(v: f64) -> Self;
    fn sqrt(self) -> Self;
}

impl Scalar for f64 {
    #[inline]
    fn cst(v: f64) -> Self {
        v
    }
    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
}

/// First-order dual number `v + ε·d`.
#[derive(Debug, Clone, Copy)]
struct Dual {
    v: f64,
    d: f64,
}

impl Add for Dual {
    type Output = Dual;
    #[inline]
    fn add(self, o: Dual) -> Dual {
        Dual { v: self.v + o.v, d: self.d + o.d }
    }
}
impl Sub for Dual {
    type Output = Dual;
    #[inline]
    fn sub(self, o: Dual) -> Dual {
        Dual { v: self.v - o.v, d: self.d - o.d }
    }
}
impl Mul for Dual {
    type Output = Dual;
    #[inline]
    fn mul(self, o: Dual) -> Dual {
        Dual { v: self.v * o.v, d: self.d * o.v + self.v * o.d }
    }
}
impl Div for Dual {
    type Output = Dual;
    #[inline]
    fn div(self, o: Dual) -> Dual {
        Dual {
            v: self.v / o.v,
            d: (self.d * o.v - self.v * o.d) / (o.v * o.v),
        }
    }
}
impl Neg for Dual {
    type Output = Dual;
    #[inline]
    fn neg(self) -> Dual {
        Dual { v: -self.v, d: -self.d }
    }
}
impl Scalar for Dual {
    #[inline]
    fn cst(v: f64) -> Self {
        Dual { v, d: 0.0 }
    }
    #[inline]
    fn sqrt(self) -> Self {
        let s = self.v.sqrt();
        Dual { v: s, d: self.d / (2.0 * s) }
    }
}

/// Mindlin's solution: displacement at `x` from a unit point force in
/// direction `dir` (0, 1, 2 for x1, x2, x3) applied at `xi`. Both points in
/// x3-up coordinates.
fn mindlin<T: Scalar>(medium: &ElasticMedium, x: [T; 3], xi: [T; 3], dir: usize) -> [T; 3] {
    if dir == 1 {
        let u = mindlin(medium, [x[1], x[0], x[2]], [xi[1], xi[0], xi[2]], 0);
        return [u[1], u[0], u[2]];
    }
    let nu = medium.poisson_ratio();
    let k = T::cst(1.0 / (16.0 * std::f64::consts::PI * medium.mu * (1.0 - nu)));
    let a = T::cst(3.0 - 4.0 * nu);
    let b = T::cst(4.0 * (1.0 - nu) * (1.0 - 2.0 * nu));
    let one = T::cst(1.0);
    // depth-positive coordinates
    let dx = x[0] - xi[0];
    let dy = x[1] - xi[1];
    let z = -x[2];
    let c = -xi[2];
    let zmc = z - c;
    let zpc = z + c;
    let h2 = dx * dx + dy * dy;
    let r1 = (h2 + zmc * zmc).sqrt();
    let r2 = (h2 + zpc * zpc).sqrt();
    let r1_3 = r1 * r1 * r1;
    let r2_2 = r2 * r2;
    let r2_3 = r2_2 * r2;
    let r2_5 = r2_3 * r2_2;
    let s = r2 + zpc;
    let cz = c * z;

    if dir == 0 {
        let ux = k
            * (a / r1 + one / r2 + dx * dx / r1_3 + a * dx * dx / r2_3
                + T::cst(2.0) * cz / r2_3 * (one - T::cst(3.0) * dx * dx / r2_2)
                + b / s * (one - dx * dx / (r2 * s)));
        let uy = k * dx * dy * (one / r1_3 + a / r2_3 - T::cst(6.0) * cz / r2_5 - b / (r2 * s * s));
        let uz = k
            * dx
            * (zmc / r1_3 + a * zmc / r2_3 - T::cst(6.0) * cz * zpc / r2_5 + b / (r2 * s));
        [ux, uy, -uz]
    } else {
        // Mindlin's vertical load acts along +z (downward); a force along +x3
        // is its negative, and u3 = -u_z.
        let common = zmc / r1_3 + a * zmc / r2_3 + T::cst(6.0) * cz * zpc / r2_5 - b / (r2 * s);
        let ux = k * dx * common;
        let uy = k * dy * common;
        let nu1 = 1.0 - nu;
        let uz = k
            * (a / r1
                + (T::cst(8.0 * nu1 * nu1) - a) / r2
                + zmc * zmc / r1_3
                + (a * zpc * zpc - T::cst(2.0) * cz) / r2_3
                + T::cst(6.0) * cz * zpc * zpc / r2_5);
        [-ux, -uy, uz]
    }
}

/// Full-space-interior displacement at `x` (x3 ≤ 0) from a unit-potency
/// point dislocation.
pub fn dislocation_field(medium: &ElasticMedium, src: &DislocationSource, x: [f64; 3]) -> Result<[f64; 3]> {
    medium.validate()?;
    src.validate()?;
    if x[2] > 0.0 {
        return Err(Error::Config(format!("receiver above the free surface (x3 = {})", x[2])));
    }
    let sep = [x[0] - src.position[0], x[1] - src.position[1], x[2] - src.position[2]];
    if norm3(&sep) < SINGULAR_RADIUS_KM {
        return Err(Error::SingularPoint(SINGULAR_RADIUS_KM));
    }
    Ok(dislocation_field_unchecked(medium, src, x))
}

fn dislocation_field_unchecked(medium: &ElasticMedium, src: &DislocationSource, x: [f64; 3]) -> [f64; 3] {
    let s = src.slip_direction;
    let n = src.fault_normal;
    let xd = x.map(Dual::cst);
    let mut u = [0.0; 3];
    for p in 0..3 {
        // row p of M = μ (s nᵀ + n sᵀ) is the source-shift direction
        let dir = [
            medium.mu * (s[p] * n[0] + n[p] * s[0]),
            medium.mu * (s[p] * n[1] + n[p] * s[1]),
            medium.mu * (s[p] * n[2] + n[p] * s[2]),
        ];
        if dir.iter().all(|v| *v == 0.0) {
            continue;
        }
        let xi = [0, 1, 2].map(|q| Dual {
            v: src.position[q],
            d: dir[q],
        });
        let g = mindlin(medium, xd, xi, p);
        for k in 0..3 {
            u[k] += g[k].d;
        }
    }
    u
}

// --- field verification ---------------------------------------------------

/// Probe points for [`verify_field`].
#[derive(Debug, Clone)]
pub struct ProbeBox {
    /// Interior probes (x3 < 0) for the Navier residual.
    pub interior: Vec<[f64; 3]>,
    /// Surface probes for the traction residual.
    pub surface: Vec<[f64; 2]>,
    /// Finite-difference step (km).
    pub step: f64,
}

impl ProbeBox {
    /// Uniformly random probes in a horizontal square of half-width
    /// `half_width` centred above the source, interior probes between depths
    /// `depth_range` (positive km). Points closer than `min_dist` km to the
    /// source are redrawn.
    pub fn random(
        src: &DislocationSource,
        half_width: f64,
        depth_range: (f64, f64),
        count: usize,
        min_dist: f64,
        step: f64,
        seed: u64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = src.position;
        let mut interior = Vec::with_capacity(count);
        while interior.len() < count {
            let p = [
                c[0] + rng.random_range(-half_width..half_width),
                c[1] + rng.random_range(-half_width..half_width),
                -rng.random_range(depth_range.0..depth_range.1),
            ];
            let sep = [p[0] - c[0], p[1] - c[1], p[2] - c[2]];
            if norm3(&sep) >= min_dist && p[2] + 2.0 * step < 0.0 {
                interior.push(p);
            }
        }
        let surface = (0..count)
            .map(|_| {
                [
                    c[0] + rng.random_range(-half_width..half_width),
                    c[1] + rng.random_range(-half_width..half_width),
                ]
            })
            .collect();
        ProbeBox {
            interior,
            surface,
            step,
        }
    }
}

/// Worst-case residuals over a probe set, each relative to a local scale.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ResidualReport {
    /// max |μΔu + (λ+μ)∇div u| / (max μ|Δu| + max (λ+μ)|∇div u|)
    pub navier_rel: f64,
    /// max |σ(u)·e3| / max |σ_ij| at surface probes
    pub traction_rel: f64,
    pub n_interior: usize,
    pub n_surface: usize,
}

/// Minimum probe distance from the source accepted by [`verify_field`] (km).
pub const PROBE_EXCLUSION_KM: f64 = 1.0;

/// Finite-difference check that [`dislocation_field`] solves the Navier
/// equations in the interior and is traction-free on the surface.
pub fn verify_field(medium: &ElasticMedium, src: &DislocationSource, probes: &ProbeBox) -> Result<ResidualReport> {
    medium.validate()?;
    src.validate()?;
    let h = probes.step;
    if !(h > 0.0) {
        return Err(Error::Config(format!("finite-difference step must be positive, got {h}")));
    }
    let too_close = |p: [f64; 3]| {
        let sep = [p[0] - src.position[0], p[1] - src.position[1], p[2] - src.position[2]];
        norm3(&sep) < PROBE_EXCLUSION_KM
    };
    for p in &probes.interior {
        if too_close(*p) {
            return Err(Error::SingularPoint(PROBE_EXCLUSION_KM));
        }
        if p[2] + h > 0.0 {
            return Err(Error::Config(format!("interior probe too close to the surface: {p:?}")));
        }
    }
    for p in &probes.surface {
        if too_close([p[0], p[1], 0.0]) {
            return Err(Error::SingularPoint(PROBE_EXCLUSION_KM));
        }
    }

    let f = |x: [f64; 3]| dislocation_field_unchecked(medium, src, x);
    let (lam, mu) = (medium.lambda, medium.mu);

    let mut navier_rel: f64 = 0.0;
    for &x in &probes.interior {
        // hess[i][j][k] = ∂i ∂j u_k
        let mut hess = [[[0.0; 3]; 3]; 3];
        for i in 0..3 {
            for j in i..3 {
                let val = if i == j {
                    let up = f(shift(x, i, h));
                    let um = f(shift(x, i, -h));
                    let u0 = f(x);
                    [0, 1, 2].map(|k| (up[k] - 2.0 * u0[k] + um[k]) / (h * h))
                } else {
                    let pp = f(shift(shift(x, i, h), j, h));
                    let pm = f(shift(shift(x, i, h), j, -h));
                    let mp = f(shift(shift(x, i, -h), j, h));
                    let mm = f(shift(shift(x, i, -h), j, -h));
                    [0, 1, 2].map(|k| (pp[k] - pm[k] - mp[k] + mm[k]) / (4.0 * h * h))
                };
                hess[i][j] = val;
                hess[j][i] = val;
            }
        }
        let mut res: f64 = 0.0;
        let mut lap_max: f64 = 0.0;
        let mut gd_max: f64 = 0.0;
        for k in 0..3 {
            let lap = hess[0][0][k] + hess[1][1][k] + hess[2][2][k];
            let graddiv = hess[k][0][0] + hess[k][1][1] + hess[k][2][2];
            res = res.max((mu * lap + (lam + mu) * graddiv).abs());
            lap_max = lap_max.max((mu * lap).abs());
            gd_max = gd_max.max(((lam + mu) * graddiv).abs());
        }
        let scale = lap_max + gd_max;
        if scale > 0.0 {
            navier_rel = navier_rel.max(res / scale);
        }
    }

    let mut traction_rel: f64 = 0.0;
    for &p in &probes.surface {
        let x = [p[0], p[1], 0.0];
        // grad[i][k] = ∂i u_k; x3 uses a one-sided second-order stencil
        let mut grad = [[0.0; 3]; 3];
        for i in 0..2 {
            let up = f(shift(x, i, h));
            let um = f(shift(x, i, -h));
            grad[i] = [0, 1, 2].map(|k| (up[k] - um[k]) / (2.0 * h));
        }
        let u0 = f(x);
        let u1 = f(shift(x, 2, -h));
        let u2 = f(shift(x, 2, -2.0 * h));
        grad[2] = [0, 1, 2].map(|k| (3.0 * u0[k] - 4.0 * u1[k] + u2[k]) / (2.0 * h));
        let div = grad[0][0] + grad[1][1] + grad[2][2];
        let mut sig = [[0.0; 3]; 3];
        let mut smax: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                sig[i][j] = mu * (grad[i][j] + grad[j][i]) + if i == j { lam * div } else { 0.0 };
                smax = smax.max(sig[i][j].abs());
            }
        }
        let t = (0..3).map(|i| sig[i][2].abs()).fold(0.0, f64::max);
        if smax > 0.0 {
            traction_rel = traction_rel.max(t / smax);
        }
    }

    Ok(ResidualReport {
        navier_rel,
        traction_rel,
        n_interior: probes.interior.len(),
        n_surface: probes.surface.len(),
    })
}

#[inline]
fn shift(mut x: [f64; 3], axis: usize, h: f64) -> [f64; 3] {
    x[axis] += h;
    x
}

/// Least-squares slope of `log |u|` against `log r` for surface points at
/// horizontal distances `radii` along direction `azimuth` (radians from x1).
pub fn decay_exponent(
    medium: &ElasticMedium,
    src: &DislocationSource,
    azimuth: f64,
    radii: &[f64],
) -> Result<f64> {
    let kernel = SurfaceKernel::new(medium, src.slip_direction, src.fault_normal)?;
    let (c, s) = (azimuth.cos(), azimuth.sin());
    let mut pts = Vec::with_capacity(radii.len());
    for &r in radii {
        let x = [src.position[0] + r * c, src.position[1] + r * s];
        let u = kernel.eval(src.position, x)?;
        pts.push((r.ln(), norm3(&u).ln()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    Ok(-sxy / sxx)
}
