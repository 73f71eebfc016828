//! Points on the flat torus `T^d = R^d / Z^d` with the wrapped max metric.

use std::fmt;

/// Largest supported torus dimension.
pub const MAX_DIM: usize = 4;

/// Reduce a real number into `[0, 1)`.
#[inline]
pub fn wrap_unit(x: f64) -> f64 {
    let y = x - x.floor();
    // x - floor(x) can round up to exactly 1.0 for tiny negative x.
    if y >= 1.0 {
        0.0
    } else {
        y
    }
}

/// Signed representative of `x` in `[-1/2, 1/2)`.
#[inline]
pub fn wrap_centered(x: f64) -> f64 {
    let y = wrap_unit(x + 0.5) - 0.5;
    if y >= 0.5 {
        y - 1.0
    } else {
        y
    }
}

/// Circle distance between two coordinates.
#[inline]
pub fn circle_dist(a: f64, b: f64) -> f64 {
    let d = (a - b).abs();
    let d = d - d.floor();
    d.min(1.0 - d)
}

#[derive(Clone, Copy, PartialEq)]
pub struct TorusPoint {
    coords: [f64; MAX_DIM],
    dim: usize,
}

impl TorusPoint {
    /// Builds a point, wrapping every coordinate into `[0, 1)`.
    ///
    /// Panics if `coords` is empty or longer than [`MAX_DIM`].
    pub fn new(coords: &[f64]) -> Self {
        assert!(
            !coords.is_empty() && coords.len() <= MAX_DIM,
            "torus dimension must be in 1..={MAX_DIM}"
        );
        let mut c = [0.0; MAX_DIM];
        for (dst, &src) in c.iter_mut().zip(coords) {
            *dst = wrap_unit(src);
        }
        TorusPoint {
            coords: c,
            dim: coords.len(),
        }
    }

    pub fn origin(dim: usize) -> Self {
        TorusPoint::new(&vec![0.0; dim])
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn coords(&self) -> &[f64] {
        &self.coords[..self.dim]
    }

    #[inline]
    pub fn get(&self, i: usize) -> f64 {
        self.coords[i]
    }

    /// Wrapped max-coordinate distance.
    pub fn dist(&self, other: &TorusPoint) -> f64 {
        debug_assert_eq!(self.dim, other.dim);
        self.coords()
            .iter()
            .zip(other.coords())
            .map(|(&a, &b)| circle_dist(a, b))
            .fold(0.0, f64::max)
    }

    /// Shortest displacement `other - self`, each coordinate in `[-1/2, 1/2)`.
    pub fn displacement_to(&self, other: &TorusPoint) -> [f64; MAX_DIM] {
        let mut d = [0.0; MAX_DIM];
        for i in 0..self.dim {
            d[i] = wrap_centered(other.coords[i] - self.coords[i]);
        }
        d
    }

    /// `self + t * v`, wrapped.
    pub fn translate(&self, v: &[f64], t: f64) -> TorusPoint {
        let mut c = [0.0; MAX_DIM];
        for i in 0..self.dim {
            c[i] = self.coords[i] + t * v[i];
        }
        TorusPoint::new(&c[..self.dim])
    }
}

impl fmt::Debug for TorusPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("TorusPoint").field(&self.coords()).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wraps_into_unit_interval() {
        let p = TorusPoint::new(&[1.25, -0.25]);
        assert_eq!(p.coords(), &[0.25, 0.75]);
        assert_eq!(wrap_unit(-1e-20), 0.0);
    }

    #[test]
    fn distance_wraps_around() {
        let a = TorusPoint::new(&[0.05, 0.5]);
        let b = TorusPoint::new(&[0.95, 0.45]);
        assert!((a.dist(&b) - 0.1).abs() < 1e-15);
        assert_eq!(a.dist(&a), 0.0);
    }

    #[test]
    fn displacement_is_shortest() {
        let a = TorusPoint::new(&[0.9]);
        let b = TorusPoint::new(&[0.1]);
        assert!((a.displacement_to(&b)[0] - 0.2).abs() < 1e-15);
        assert!((b.displacement_to(&a)[0] + 0.2).abs() < 1e-15);
    }

    #[test]
    fn centered_wrap_range() {
        for &x in &[-3.7, -0.5, 0.0, 0.49, 0.5, 2.5] {
            let y = wrap_centered(x);
            assert!((-0.5..0.5).contains(&y), "{x} -> {y}");
        }
    }
}
