//! DCM feedback: desired CoP, support-polygon projection, and the CoM
//! acceleration task that realizes it.

use crate::error::{domain, Error, Result};
use crate::lipm::{lipm_accel, Vec2};
use crate::swing::Vec3;

/// Convex support region, vertices counterclockwise. One vertex is a point
/// foot, two vertices a line contact.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportPolygon {
    vertices: Vec<Vec2>,
}

fn cross(a: &Vec2, b: &Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

fn closest_on_segment(p: &Vec2, a: &Vec2, b: &Vec2) -> Vec2 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return *a;
    }
    let s = (p - a).dot(&ab) / len2;
    if s <= 0.0 {
        *a
    } else if s >= 1.0 {
        *b
    } else {
        a + ab * s
    }
}

/// Boundary slack for membership tests, so projected points count as inside.
const ON_BOUNDARY_TOL: f64 = 1e-12;

impl SupportPolygon {
    pub fn new(vertices: Vec<Vec2>) -> Result<Self> {
        if vertices.is_empty() {
            return domain("support polygon has no vertices");
        }
        if vertices.iter().any(|v| !v.x.is_finite() || !v.y.is_finite()) {
            return domain("support polygon vertices must be finite");
        }
        let n = vertices.len();
        if n >= 3 {
            for i in 0..n {
                let (a, b, c) = (vertices[i], vertices[(i + 1) % n], vertices[(i + 2) % n]);
                if cross(&(b - a), &(c - b)) < -1e-12 {
                    return Err(Error::Domain(
                        "support polygon must be convex and counterclockwise".into(),
                    ));
                }
            }
        }
        Ok(Self { vertices })
    }

    pub fn point(p: Vec2) -> Self {
        Self { vertices: vec![p] }
    }

    /// Axis-aligned foot rectangle around `center`, extending `heel` back,
    /// `toe` forward and `half_width` to each side.
    pub fn rectangle(center: Vec2, heel: f64, toe: f64, half_width: f64) -> Result<Self> {
        if heel < 0.0 || toe < 0.0 || half_width < 0.0 {
            return domain("foot extents must be non-negative");
        }
        let (x0, x1) = (center.x - heel, center.x + toe);
        let (y0, y1) = (center.y - half_width, center.y + half_width);
        let mut vertices = vec![
            Vec2::new(x0, y0),
            Vec2::new(x1, y0),
            Vec2::new(x1, y1),
            Vec2::new(x0, y1),
        ];
        vertices.dedup();
        if vertices.len() > 1 && vertices.first() == vertices.last() {
            vertices.pop();
        }
        // zero-width feet collapse to a segment or a point
        if half_width == 0.0 && vertices.len() >= 2 {
            vertices = vec![Vec2::new(x0, center.y), Vec2::new(x1, center.y)];
            vertices.dedup();
        } else if heel + toe == 0.0 && vertices.len() >= 2 {
            vertices = vec![Vec2::new(center.x, y0), Vec2::new(center.x, y1)];
            vertices.dedup();
        }
        Self::new(vertices)
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn contains(&self, p: &Vec2) -> bool {
        match self.vertices.len() {
            1 => *p == self.vertices[0],
            2 => (closest_on_segment(p, &self.vertices[0], &self.vertices[1]) - p).norm() <= ON_BOUNDARY_TOL,
            n => (0..n).all(|i| {
                let (a, b) = (self.vertices[i], self.vertices[(i + 1) % n]);
                cross(&(b - a), &(p - a)) >= -ON_BOUNDARY_TOL * (b - a).norm()
            }),
        }
    }
}

/// DCM feedback gain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DcmGains {
    k_xi: f64,
}

impl DcmGains {
    pub fn new(k_xi: f64) -> Result<Self> {
        if !(k_xi > 0.0) || !k_xi.is_finite() {
            return domain(format!("DCM gain must be positive (got {k_xi})"));
        }
        Ok(Self { k_xi })
    }

    pub fn k_xi(&self) -> f64 {
        self.k_xi
    }
}

impl Default for DcmGains {
    fn default() -> Self {
        Self { k_xi: 3.0 }
    }
}

/// CoP that makes the DCM error decay as `e^{-k t}`:
/// `u = xi + (k (xi - xi_d) - xi_d_dot) / omega0`.
pub fn desired_cop(xi: &Vec2, xi_d: &Vec2, xi_d_dot: &Vec2, gains: &DcmGains, omega0: f64) -> Vec2 {
    xi + ((xi - xi_d) * gains.k_xi - xi_d_dot) / omega0
}

/// Euclidean projection onto the support polygon (identity inside it).
pub fn project_cop(u_des: &Vec2, polygon: &SupportPolygon) -> Result<Vec2> {
    let v = polygon.vertices();
    match v.len() {
        0 => domain("cannot project onto an empty support polygon"),
        1 => Ok(v[0]),
        2 if polygon.contains(u_des) => Ok(*u_des),
        2 => Ok(closest_on_segment(u_des, &v[0], &v[1])),
        n => {
            if polygon.contains(u_des) {
                return Ok(*u_des);
            }
            let mut best = v[0];
            let mut best_d = f64::INFINITY;
            for i in 0..n {
                let c = closest_on_segment(u_des, &v[i], &v[(i + 1) % n]);
                let d = (c - u_des).norm_squared();
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            Ok(best)
        }
    }
}

/// CoM acceleration reference `(omega0^2 (x - u), 0)`.
pub fn com_task_accel(com: &Vec2, u_proj: &Vec2, omega0: f64) -> Vec3 {
    let a = lipm_accel(com, u_proj, omega0);
    Vec3::new(a.x, a.y, 0.0)
}
