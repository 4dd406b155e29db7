//! Arclength parametrization of the rounded unit square and the pressure
//! activations that travel along it.
//!
//! The boundary is traversed counter-clockwise starting from the midpoint of
//! the bottom edge. It consists of four straight edges of length one joined by
//! quarter circles of radius `r`, so the circumference is `4 + 2πr`.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};

/// Maximum distance (m) at which a point is still accepted as lying on the boundary.
pub const ON_BOUNDARY_TOL: f64 = 1e-9;

/// The rounded square `∂Ω` with corner radius `r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryGeometry {
    r: f64,
    length: f64,
    seams: [f64; 10],
}

/// Which piece of the boundary a parameter value falls on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Piece {
    Edge,
    Arc,
}

impl BoundaryGeometry {
    pub fn new(r: f64) -> Result<Self> {
        if !(r.is_finite() && r > 0.0 && r < 0.5) {
            return Err(Error::Geometry(format!("corner radius must lie in (0, 0.5), got {r}")));
        }
        let h = FRAC_PI_2 * r;
        let seams = [
            0.0,
            0.5,
            h + 0.5,
            h + 1.5,
            PI * r + 1.5,
            PI * r + 2.5,
            1.5 * PI * r + 2.5,
            1.5 * PI * r + 3.5,
            2.0 * PI * r + 3.5,
            2.0 * PI * r + 4.0,
        ];
        Ok(Self { r, length: 4.0 + 2.0 * PI * r, seams })
    }

    pub fn radius(&self) -> f64 {
        self.r
    }

    /// Circumference `L = 4 + 2πr`.
    pub fn length(&self) -> f64 {
        self.length
    }

    /// Half the side length of the bounding box, `0.5 + r`.
    pub fn half_width(&self) -> f64 {
        0.5 + self.r
    }

    /// Area enclosed by the boundary.
    pub fn area(&self) -> f64 {
        let side = 1.0 + 2.0 * self.r;
        side * side - (4.0 - PI) * self.r * self.r
    }

    /// Branch start points in `[0, L]`; the last entry equals `L`.
    pub fn seams(&self) -> &[f64; 10] {
        &self.seams
    }

    /// Canonical representative of `t` in `[0, L)`.
    pub fn wrap(&self, t: f64) -> f64 {
        let w = t.rem_euclid(self.length);
        if w >= self.length {
            0.0
        } else {
            w
        }
    }

    fn branch(&self, t: f64) -> usize {
        // Half-open branches `s_i <= t < s_{i+1}`.
        let s = &self.seams;
        (0..9).rev().find(|&i| t >= s[i]).unwrap_or(0)
    }

    pub fn piece(&self, t: f64) -> Piece {
        match self.branch(self.wrap(t)) {
            1 | 3 | 5 | 7 => Piece::Arc,
            _ => Piece::Edge,
        }
    }

    /// Boundary point `γ(t)`.
    pub fn gamma(&self, t: f64) -> [f64; 2] {
        let t = self.wrap(t);
        let r = self.r;
        let s = &self.seams;
        match self.branch(t) {
            0 => [t, -0.5 - r],
            1 => {
                let a = (t - 0.5) / r + 1.5 * PI;
                [0.5 + r * a.cos(), -0.5 + r * a.sin()]
            }
            2 => [r + 0.5, -0.5 + t - (FRAC_PI_2 * r + 0.5)],
            3 => {
                let a = (t - s[3]) / r;
                [0.5 + r * a.cos(), 0.5 + r * a.sin()]
            }
            4 => [PI * r + 2.0 - t, 0.5 + r],
            5 => {
                let a = (t - s[5]) / r + FRAC_PI_2;
                [r * a.cos() - 0.5, 0.5 + r * a.sin()]
            }
            6 => [-r - 0.5, 1.5 * PI * r + 3.0 - t],
            7 => {
                let a = (t - s[7]) / r + PI;
                [r * a.cos() - 0.5, -0.5 + r * a.sin()]
            }
            _ => [t - (2.0 * PI * r + 4.0), -(0.5 + r)],
        }
    }

    /// Unit tangent `γ'(t)` from the analytic piecewise derivative.
    pub fn tangent(&self, t: f64) -> [f64; 2] {
        let t = self.wrap(t);
        let r = self.r;
        let s = &self.seams;
        let arc = |a: f64| [-a.sin(), a.cos()];
        match self.branch(t) {
            0 | 8 => [1.0, 0.0],
            1 => arc((t - 0.5) / r + 1.5 * PI),
            2 => [0.0, 1.0],
            3 => arc((t - s[3]) / r),
            4 => [-1.0, 0.0],
            5 => arc((t - s[5]) / r + FRAC_PI_2),
            6 => [0.0, -1.0],
            _ => arc((t - s[7]) / r + PI),
        }
    }

    /// Exterior unit normal `ν(γ(t)) = (γ₂'(t), −γ₁'(t))`.
    pub fn exterior_normal(&self, t: f64) -> [f64; 2] {
        let [d1, d2] = self.tangent(t);
        [d2, -d1]
    }

    /// Distance from `point` to the boundary together with the inverse parameter
    /// computed from the piece nearest to it.
    fn nearest_piece(&self, point: [f64; 2]) -> (f64, f64) {
        let [x, y] = point;
        let r = self.r;
        let a = self.half_width();
        let clamp = |v: f64| v.clamp(-0.5, 0.5);
        let mut best = (f64::INFINITY, 0.0);
        let mut consider = |dist: f64, t: f64| {
            if dist < best.0 {
                best = (dist, t);
            }
        };

        // Straight edges.
        let xc = clamp(x);
        let yc = clamp(y);
        let bottom = (xc - x).hypot(y + a);
        consider(bottom, if xc >= 0.0 { xc } else { 4.0 + 2.0 * PI * r + xc });
        consider((x - a).hypot(yc - y), 1.0 + r * FRAC_PI_2 + yc);
        consider((xc - x).hypot(y - a), 1.5 + r * PI - (xc - 0.5));
        consider((x + a).hypot(yc - y), 2.5 + 3.0 * r * FRAC_PI_2 - (yc - 0.5));

        // Corner arcs, only for points inside the corner's quadrant wedge.
        type ArcInverse = fn(f64, f64) -> f64;
        let corners: [([f64; 2], ArcInverse); 4] = [
            ([0.5, -0.5], |x, r| 0.5 + r * ((-(x - 0.5) / r).clamp(-1.0, 1.0).acos() - FRAC_PI_2)),
            ([0.5, 0.5], |x, r| 1.5 + r * FRAC_PI_2 + r * ((x - 0.5) / r).clamp(-1.0, 1.0).acos()),
            ([-0.5, 0.5], |x, r| 2.5 + r * FRAC_PI_2 + r * ((x + 0.5) / r).clamp(-1.0, 1.0).acos()),
            ([-0.5, -0.5], |x, r| 3.5 + 3.0 * r * FRAC_PI_2 + r * PI - r * ((x + 0.5) / r).clamp(-1.0, 1.0).acos()),
        ];
        for (c, inv) in corners {
            let dx = x - c[0];
            let dy = y - c[1];
            if dx * c[0] >= 0.0 && dy * c[1] >= 0.0 {
                consider((dx.hypot(dy) - r).abs(), inv(x, r));
            }
        }
        best
    }

    /// Distance from `point` to the boundary curve.
    pub fn distance_to_boundary(&self, point: [f64; 2]) -> f64 {
        self.nearest_piece(point).0
    }

    /// Inverse parametrization `γ⁻¹`, rejecting points further than
    /// [`ON_BOUNDARY_TOL`] from the boundary.
    pub fn gamma_inv(&self, point: [f64; 2]) -> Result<f64> {
        self.gamma_inv_with_tol(point, ON_BOUNDARY_TOL)
    }

    pub fn gamma_inv_with_tol(&self, point: [f64; 2], tol: f64) -> Result<f64> {
        let (distance, t) = self.nearest_piece(point);
        if distance > tol {
            return Err(Error::OffBoundary { x: point[0], y: point[1], distance });
        }
        Ok(self.wrap(t))
    }
}

/// Width parameter of the activation profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActivationShape {
    sigma: f64,
}

impl ActivationShape {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::Geometry(format!("activation width must be positive, got {sigma}")));
        }
        Ok(Self { sigma })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Scalar profile `exp(-(cos(2πs/L) - 1)² / (2σ²))` at offset `s = t - p`.
    pub fn profile(&self, geom: &BoundaryGeometry, s: f64) -> f64 {
        let c = (2.0 * PI * s / geom.length()).cos() - 1.0;
        (-c * c / (2.0 * self.sigma * self.sigma)).exp()
    }

    /// Derivative of [`Self::profile`] with respect to its argument `s`.
    pub fn profile_derivative(&self, geom: &BoundaryGeometry, s: f64) -> f64 {
        let w = 2.0 * PI / geom.length();
        let theta = w * s;
        let c = theta.cos() - 1.0;
        self.profile(geom, s) * c * theta.sin() * w / (self.sigma * self.sigma)
    }
}

/// Pressure activation `g_p(γ(t))`, a normal traction centred at arclength `p`.
pub fn activation(geom: &BoundaryGeometry, shape: &ActivationShape, p: f64, t: f64) -> [f64; 2] {
    let a = shape.profile(geom, t - p);
    let [nx, ny] = geom.exterior_normal(t);
    [a * nx, a * ny]
}

/// `∂g_p/∂p` at `γ(t)`, which equals `-g_p'`. Only the scalar factor is
/// differentiated; the unit normal stays attached to `t`.
///
/// This is the load that produces `u_p'`, the position derivative of the
/// displacement field.
pub fn activation_p_derivative(geom: &BoundaryGeometry, shape: &ActivationShape, p: f64, t: f64) -> [f64; 2] {
    let d = -shape.profile_derivative(geom, t - p);
    let [nx, ny] = geom.exterior_normal(t);
    [d * nx, d * ny]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn geom() -> BoundaryGeometry {
        BoundaryGeometry::new(1e-3).unwrap()
    }

    fn close(a: [f64; 2], b: [f64; 2], tol: f64) -> bool {
        (a[0] - b[0]).abs() <= tol && (a[1] - b[1]).abs() <= tol
    }

    #[test]
    fn circumference() {
        let g = geom();
        assert_eq!(g.length(), 4.0 + 2.0 * PI * 1e-3);
    }

    #[test]
    fn known_points() {
        let g = geom();
        let r = 1e-3;
        assert!(close(g.gamma(0.0), [0.0, -0.501], 1e-15));
        assert!(close(g.gamma(0.5 + PI * r / 2.0), [0.501, -0.5], 1e-12));
        let eps = 1e-9;
        assert!(close(g.gamma(g.length() - eps), [-eps, -0.501], 1e-12));
        assert!(close(g.gamma(g.length() / 2.0), [0.0, 0.501], 1e-12));
    }

    #[test]
    fn inverse_known_points() {
        let g = geom();
        let r = 1e-3;
        assert_eq!(g.gamma_inv([0.0, -0.501]).unwrap(), 0.0);
        let t = g.gamma_inv([0.501, 0.0]).unwrap();
        assert!((t - (1.0 + PI * r / 2.0)).abs() < 1e-15);
    }

    #[test]
    fn off_boundary_rejected() {
        let g = geom();
        match g.gamma_inv([0.0, 0.0]) {
            Err(Error::OffBoundary { distance, .. }) => assert!((distance - 0.501).abs() < 1e-12),
            other => panic!("expected rejection, got {other:?}"),
        }
        assert!(g.gamma_inv([0.2, -0.501 - 1e-6]).is_err());
    }

    #[test]
    fn invalid_radius() {
        assert!(BoundaryGeometry::new(0.0).is_err());
        assert!(BoundaryGeometry::new(-1.0).is_err());
        assert!(ActivationShape::new(0.0).is_err());
    }

    #[test]
    fn seams_are_continuous() {
        let g = geom();
        for (i, &s) in g.seams().iter().enumerate().skip(1) {
            let left = g.gamma(s - 1e-13);
            let right = g.gamma(s);
            assert!(close(left, right, 1e-12), "seam {i}: {left:?} vs {right:?}");
            let nl = g.exterior_normal(s - 1e-13);
            let nr = g.exterior_normal(s);
            assert!(close(nl, nr, 1e-9), "normal seam {i}: {nl:?} vs {nr:?}");
        }
    }

    #[test]
    fn round_trip_uniform() {
        let g = geom();
        for i in 0..1000 {
            let t = g.length() * i as f64 / 1000.0;
            let back = g.gamma_inv(g.gamma(t)).unwrap();
            assert!((back - t).abs() < 1e-9, "t={t} back={back}");
        }
    }

    #[test]
    fn round_trip_on_arcs() {
        let g = geom();
        let s = g.seams();
        for b in [1, 3, 5, 7] {
            for j in 0..=200 {
                let t = s[b] + (s[b + 1] - s[b]) * j as f64 / 200.0;
                let back = g.gamma_inv(g.gamma(t)).unwrap();
                let d = (back - g.wrap(t)).abs();
                assert!(d < 1e-9, "branch {b} t={t} back={back}");
            }
        }
    }

    #[test]
    fn normals() {
        let g = geom();
        let r = 1e-3;
        assert_eq!(g.exterior_normal(0.0), [0.0, -1.0]);
        assert_eq!(g.exterior_normal(1.0 + PI * r / 2.0 + 0.01), [1.0, 0.0]);
        for i in 0..1000 {
            let t = g.length() * (i as f64 + 0.37) / 1000.0;
            let [a, b] = g.exterior_normal(t);
            assert!((a.hypot(b) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn normal_points_outward() {
        let g = geom();
        for i in 0..400 {
            let t = g.length() * i as f64 / 400.0;
            let [x, y] = g.gamma(t);
            let [nx, ny] = g.exterior_normal(t);
            assert!(x * nx + y * ny > 0.0);
        }
    }

    #[test]
    fn arclength_speed() {
        let g = geom();
        let h = 1e-6;
        for i in 0..500 {
            let t = g.length() * (i as f64 + 0.5) / 500.0;
            let a = g.gamma(t);
            let b = g.gamma(t + h);
            let speed = (b[0] - a[0]).hypot(b[1] - a[1]) / h;
            assert!((speed - 1.0).abs() < 1e-4, "t={t} speed={speed}");
        }
        // Explicitly inside an arc.
        let t = g.seams()[3] + 1e-4;
        let a = g.gamma(t);
        let b = g.gamma(t + h);
        assert!(((b[0] - a[0]).hypot(b[1] - a[1]) / h - 1.0).abs() < 1e-4);
    }

    #[test]
    fn activation_peak_and_figure_widths() {
        let g = geom();
        let shape = ActivationShape::new(0.01).unwrap();
        let [a, b] = activation(&g, &shape, 0.0, 0.0);
        assert_eq!(a.hypot(b), 1.0);

        let p = 1.0 + PI * 1e-3 / 2.0;
        let width = |sigma: f64| {
            let s = ActivationShape::new(sigma).unwrap();
            (0..4000).map(|i| g.length() * i as f64 / 4000.0).filter(|&t| s.profile(&g, t - p) > 0.5).count()
        };
        let (w1, w2, w3) = (width(0.001), width(0.01), width(0.05));
        assert!(w1 < w2 && w2 < w3, "{w1} {w2} {w3}");
    }

    #[test]
    fn derivative_vanishes_at_peak() {
        let g = geom();
        let shape = ActivationShape::new(0.01).unwrap();
        assert_eq!(activation_p_derivative(&g, &shape, 0.7, 0.7), [0.0, 0.0]);
    }

    #[test]
    fn derivative_matches_central_difference() {
        let g = geom();
        let shape = ActivationShape::new(0.01).unwrap();
        let h = 1e-6;
        let mut checked = 0;
        for i in 0..100 {
            let p = g.length() * ((i * 37) % 100) as f64 / 100.0;
            let t = p + 0.2 * ((i % 11) as f64 / 10.0 - 0.5);
            let plus = activation(&g, &shape, p + h, t);
            let minus = activation(&g, &shape, p - h, t);
            let d = activation_p_derivative(&g, &shape, p, t);
            for c in 0..2 {
                let fd = (plus[c] - minus[c]) / (2.0 * h);
                if d[c].abs() > 1e-3 {
                    assert!(((fd - d[c]) / d[c]).abs() < 1e-5, "p={p} t={t} fd={fd} an={}", d[c]);
                    checked += 1;
                } else {
                    assert!((fd - d[c]).abs() < 1e-6);
                }
            }
        }
        assert!(checked > 30);
    }

    proptest! {
        #[test]
        fn activation_is_periodic(p in -10.0f64..10.0, t in -10.0f64..10.0) {
            let g = geom();
            let shape = ActivationShape::new(0.01).unwrap();
            let a = activation(&g, &shape, p, t);
            let b = activation(&g, &shape, p + g.length(), t);
            prop_assert!(close(a, b, 1e-12));
        }

        #[test]
        fn profile_is_translation_invariant(p in 0.0f64..4.0, t in 0.0f64..4.0) {
            let g = geom();
            let shape = ActivationShape::new(0.02).unwrap();
            let [ax, ay] = activation(&g, &shape, p, t);
            let [bx, by] = activation(&g, &shape, 0.0, t - p);
            prop_assert!((ax.hypot(ay) - bx.hypot(by)).abs() < 1e-12);
            let a = shape.profile(&g, t - p);
            let sym = shape.profile(&g, p - t);
            prop_assert!((a - sym).abs() < 1e-14);
        }

        #[test]
        fn p_derivative_is_negative_t_derivative(p in 0.0f64..4.0, s in -0.3f64..0.3) {
            let g = geom();
            let shape = ActivationShape::new(0.01).unwrap();
            let t = p + s;
            let dp = -shape.profile_derivative(&g, t - p);
            let dt = shape.profile_derivative(&g, t - p);
            prop_assert!((dp + dt).abs() < 1e-10);
            let odd = shape.profile_derivative(&g, -s);
            prop_assert!((odd + dt).abs() < 1e-10);
        }

        #[test]
        fn gamma_is_periodic(t in -20.0f64..20.0) {
            let g = geom();
            let a = g.gamma(t);
            let b = g.gamma(g.wrap(t));
            prop_assert_eq!(a, b);
        }
    }
}
