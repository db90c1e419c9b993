use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

/// A point (or displacement) in the plane.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn polar(r: f64, theta: f64) -> Self {
        Point::new(r * theta.cos(), r * theta.sin())
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    pub fn dot(self, o: Point) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Shortest representative of a displacement on the unit torus.
    pub fn wrap_torus(self) -> Point {
        Point::new(self.x - self.x.round(), self.y - self.y.round())
    }

    /// Representative in the fundamental square [0, 1)^2.
    pub fn reduce_torus(self) -> Point {
        let f = |t: f64| {
            let r = t - t.floor();
            if r >= 1.0 {
                0.0
            } else {
                r
            }
        };
        Point::new(f(self.x), f(self.y))
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }
}

impl Neg for Point {
    type Output = Point;
    fn neg(self) -> Point {
        Point::new(-self.x, -self.y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn torus_wrap_picks_nearest_image() {
        let d = Point::new(0.9, -0.7).wrap_torus();
        assert!((d.x + 0.1).abs() < 1e-15 && (d.y - 0.3).abs() < 1e-15);
        let p = Point::new(-0.25, 3.5).reduce_torus();
        assert_eq!(p, Point::new(0.75, 0.5));
    }
}
