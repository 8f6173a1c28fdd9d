//! Finite site sets in Z^d: the index sets of Green matrices.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Ordered list of distinct lattice points; the order fixes matrix indexing.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SiteSet {
    points: Vec<Vec<i64>>,
}

impl SiteSet {
    pub fn new(points: Vec<Vec<i64>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::MalformedSpec("site set is empty".into()));
        }
        let d = points[0].len();
        if points.iter().any(|p| p.len() != d) {
            return Err(Error::MalformedSpec("site set mixes dimensions".into()));
        }
        let mut sorted = points.clone();
        sorted.sort();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::MalformedSpec("site set has duplicate points".into()));
        }
        Ok(Self { points })
    }

    pub fn dimension(&self) -> usize {
        self.points[0].len()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec<i64>] {
        &self.points
    }

    pub fn origin_index(&self) -> Option<usize> {
        self.points.iter().position(|p| p.iter().all(|&c| c == 0))
    }

    /// Entrywise translate by `z`; the Green matrix is unchanged.
    pub fn translate(&self, z: &[i64]) -> SiteSet {
        SiteSet {
            points: self
                .points
                .iter()
                .map(|p| p.iter().zip(z).map(|(a, b)| a + b).collect())
                .collect(),
        }
    }

    pub fn permute(&self, order: &[usize]) -> SiteSet {
        SiteSet { points: order.iter().map(|&i| self.points[i].clone()).collect() }
    }

    pub fn max_norm_inf(&self) -> i64 {
        self.points.iter().flat_map(|p| p.iter().map(|c| c.abs())).max().unwrap_or(0)
    }

    pub fn diameter(&self) -> f64 {
        let mut best = 0.0f64;
        for a in &self.points {
            for b in &self.points {
                let d2: i64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                best = best.max(d2 as f64);
            }
        }
        best.sqrt()
    }

    /// `{0}`.
    pub fn origin(d: usize) -> SiteSet {
        SiteSet { points: vec![vec![0; d]] }
    }

    /// `{0, y}`.
    pub fn pair(y: &[i64]) -> Result<SiteSet> {
        if y.iter().all(|&c| c == 0) {
            return Err(Error::ZeroOffset);
        }
        SiteSet::new(vec![vec![0; y.len()], y.to_vec()])
    }

    /// Euclidean sphere of radius 1: the 2d unit vectors.
    pub fn sphere1(d: usize) -> SiteSet {
        let mut points = Vec::with_capacity(2 * d);
        for axis in 0..d {
            for sign in [1i64, -1] {
                let mut p = vec![0i64; d];
                p[axis] = sign;
                points.push(p);
            }
        }
        SiteSet { points }
    }

    /// Euclidean ball of radius 1: origin plus the 2d unit vectors, origin first.
    pub fn ball1(d: usize) -> SiteSet {
        let mut points = vec![vec![0i64; d]];
        points.extend(SiteSet::sphere1(d).points);
        SiteSet { points }
    }

    /// Parse a set reference: `origin`, `pair:e1`, `pair:1,0,0`, `sphere1`,
    /// `ball1`, or a path to a JSON file `{"points": [[..], ...]}`.
    pub fn from_reference(reference: &str, d: usize) -> Result<SiteSet> {
        match reference {
            "origin" => return Ok(SiteSet::origin(d)),
            "sphere1" => return Ok(SiteSet::sphere1(d)),
            "ball1" => return Ok(SiteSet::ball1(d)),
            _ => {}
        }
        if let Some(rest) = reference.strip_prefix("pair:") {
            let y = parse_vector(rest, d)?;
            return SiteSet::pair(&y);
        }
        let text = std::fs::read_to_string(reference)?;
        #[derive(Deserialize)]
        struct File {
            points: Vec<Vec<i64>>,
        }
        let f: File = serde_json::from_str(&text)
            .map_err(|e| Error::MalformedSpec(format!("{reference}: {e}")))?;
        SiteSet::new(f.points)
    }
}

/// Parse `e1`-style unit vectors or comma-separated integer coordinates.
pub fn parse_vector(text: &str, d: usize) -> Result<Vec<i64>> {
    if let Some(axis) = text.strip_prefix('e') {
        if let Ok(axis) = axis.parse::<usize>() {
            if axis >= 1 && axis <= d {
                let mut v = vec![0i64; d];
                v[axis - 1] = 1;
                return Ok(v);
            }
            return Err(Error::InvalidConfig(format!("axis e{axis} out of range for d={d}")));
        }
    }
    let v: std::result::Result<Vec<i64>, _> =
        text.split(',').map(|c| c.trim().parse::<i64>()).collect();
    let v = v.map_err(|_| Error::InvalidConfig(format!("bad vector {text:?}")))?;
    if v.len() != d {
        return Err(Error::InvalidConfig(format!("vector {text:?} has wrong dimension for d={d}")));
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_have_expected_shapes() {
        assert_eq!(SiteSet::origin(3).len(), 1);
        assert_eq!(SiteSet::sphere1(3).len(), 6);
        assert_eq!(SiteSet::ball1(3).len(), 7);
        assert_eq!(SiteSet::ball1(4).len(), 9);
        assert_eq!(SiteSet::ball1(3).origin_index(), Some(0));
        assert_eq!(SiteSet::sphere1(3).origin_index(), None);
    }

    #[test]
    fn pair_rejects_zero_offset() {
        assert!(matches!(SiteSet::pair(&[0, 0, 0]), Err(Error::ZeroOffset)));
    }

    #[test]
    fn duplicates_rejected() {
        assert!(SiteSet::new(vec![vec![0, 0, 0], vec![0, 0, 0]]).is_err());
    }

    #[test]
    fn translate_moves_origin() {
        let s = SiteSet::sphere1(3).translate(&[-1, 0, 0]);
        assert_eq!(s.origin_index(), Some(1));
    }

    #[test]
    fn reference_parsing() {
        assert_eq!(SiteSet::from_reference("ball1", 3).unwrap().len(), 7);
        let p = SiteSet::from_reference("pair:e2", 3).unwrap();
        assert_eq!(p.points()[1], vec![0, 1, 0]);
        let q = SiteSet::from_reference("pair:2,-1,0", 3).unwrap();
        assert_eq!(q.points()[1], vec![2, -1, 0]);
    }
}
