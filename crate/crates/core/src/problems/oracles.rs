//! Closed-form solution families used as references.

use std::f64::consts::PI;

/// Pressure `λ = 2H` of the spherical cap of signed volume `V` spanning the
/// unit circle, with the normal pointing out of the enclosed region.
pub fn cap_lambda(v: f64) -> f64 {
    let s = (PI * PI + 9.0 * v * v).sqrt();
    let p13 = PI.cbrt();
    let p23 = p13 * p13;
    -2.0 * p13 * (3.0 * v + s - p23 * (s - 3.0 * v).cbrt()) / (s * (3.0 * v + s).cbrt())
}

/// Height of the spherical cap of signed volume `V` over the unit circle.
pub fn cap_height(v: f64) -> f64 {
    let s = (PI * PI + 9.0 * v * v).sqrt();
    let a = (3.0 * v + s).cbrt();
    let p13 = PI.cbrt();
    (a * a - p13 * p13) / (p13 * a)
}

/// Circular-arc cross sections of liquid rivulets on the strip `|x| < l`
/// pinned at `x = ±l`, indexed by the apex height `t > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RivuletFamily {
    pub l: f64,
}

/// One member of [`RivuletFamily`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RivuletSection {
    /// Arc radius.
    pub radius: f64,
    /// Half opening angle of the arc.
    pub angle: f64,
    /// Height of the arc centre above the substrate.
    pub centre: f64,
    pub lambda: f64,
    /// Volume over the strip of width 2.
    pub volume: f64,
}

impl RivuletFamily {
    pub fn new(l: f64) -> Self {
        Self { l }
    }

    pub fn at(&self, t: f64) -> RivuletSection {
        let l = self.l;
        let radius = (l * l + t * t) / (2.0 * t);
        // cos(angle) = (l² − t²)/(l² + t²), written stably for small t
        let angle = 2.0 * (t / l).atan();
        let centre = (l * l - t * t) / (2.0 * t);
        RivuletSection {
            radius,
            angle,
            centre,
            lambda: -1.0 / radius,
            volume: 2.0 * (radius * radius * angle - l * centre),
        }
    }

    /// Apex height of the member with the given volume (`V > 0`).
    pub fn height_for_volume(&self, v: f64) -> f64 {
        let mut lo = 0.0;
        let mut hi = self.l;
        while self.at(hi).volume < v {
            lo = hi;
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.at(mid).volume < v {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    pub fn section_for_volume(&self, v: f64) -> RivuletSection {
        self.at(self.height_for_volume(v))
    }

    /// Smallest twisted eigenvalue of the cylindrical member with volume `V`:
    /// the first Dirichlet mode across the arc combined with the first
    /// non-constant Neumann mode along the strip.
    pub fn mu0(&self, v: f64) -> f64 {
        let s = self.section_for_volume(v);
        let lam = s.lambda;
        lam * lam * (PI * PI / (4.0 * s.angle * s.angle) - 1.0) + PI * PI / 4.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn hemisphere_values() {
        assert_abs_diff_eq!(cap_lambda(2.0 * PI / 3.0), -2.0, epsilon = 1e-13);
        assert_abs_diff_eq!(cap_height(2.0 * PI / 3.0), 1.0, epsilon = 1e-13);
        assert_abs_diff_eq!(cap_lambda(0.0), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(cap_height(0.0), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn cap_formulas_match_elementary_geometry() {
        // cap of height a over the unit circle: V = πa(3 + a²)/6, 2H = −4a/(1 + a²)
        for i in 1..40 {
            let a = 0.05 * i as f64;
            let v = PI * a * (3.0 + a * a) / 6.0;
            assert_abs_diff_eq!(cap_height(v), a, epsilon = 1e-12);
            assert_abs_diff_eq!(cap_lambda(v), -4.0 * a / (1.0 + a * a), epsilon = 1e-12);
            assert_abs_diff_eq!(cap_lambda(-v), -cap_lambda(v), epsilon = 1e-12);
        }
    }

    #[test]
    fn half_cylinder_member() {
        let f = RivuletFamily::new(0.2);
        let s = f.at(0.2);
        assert_abs_diff_eq!(s.radius, 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(s.angle, PI / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.centre, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.volume, PI * 0.04, epsilon = 1e-15);
    }

    #[test]
    fn volume_is_increasing_and_invertible() {
        let f = RivuletFamily::new(0.2);
        let mut prev = 0.0;
        for i in 1..300 {
            let t = 0.6 * i as f64 / 300.0;
            let v = f.at(t).volume;
            assert!(v > prev);
            assert_abs_diff_eq!(f.height_for_volume(v), t, epsilon = 1e-12);
            prev = v;
        }
        assert!(f.mu0(1e-9) > 0.0);
        // flat limit: (π/2l)² across the strip plus (π/2)² along it
        assert_abs_diff_eq!(f.mu0(1e-12), PI * PI / 0.16 + PI * PI / 4.0, epsilon = 1e-6);
    }
}
