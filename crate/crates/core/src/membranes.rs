//! Membrane abscissas `a_k = ∫₀^{εk} d(x) dx`.
//!
//! Positions are accumulated outward from `a_0 = 0`, one strip integral at a
//! time, and cached in a window that grows on demand under a reader-writer
//! lock.

use alloc::vec;
use alloc::vec::Vec;

use spin::RwLock;

use crate::coefficients::Density;
use crate::error::{Error, Result};
use crate::quadrature::adaptive_simpson;

/// Absolute tolerance for each strip integral.
pub const QUAD_TOL: f64 = 1e-12;

/// `|x − a_k| ≤ HIT_TOL · (1 + |a_k|)` counts as sitting on membrane `k`.
pub const HIT_TOL: f64 = 1e-14;

/// Extra membranes computed beyond a requested covering range.
pub const MARGIN_STRIPS: i64 = 10;

#[derive(Debug)]
struct Window {
    /// `right[k] = a_k` for `k ≥ 0`.
    right: Vec<f64>,
    /// `left[k] = a_{−k}` for `k ≥ 0`.
    left: Vec<f64>,
}

#[derive(Debug)]
pub struct MembraneLayout {
    epsilon: f64,
    density: Density,
    capacity: i64,
    window: RwLock<Window>,
}

/// Result of locating a point among the membranes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bracket {
    pub lo: i64,
    pub hi: i64,
    pub nearest: i64,
}

impl Bracket {
    pub fn is_hit(&self) -> bool {
        self.lo == self.hi
    }
}

impl Clone for MembraneLayout {
    fn clone(&self) -> Self {
        let w = self.window.read();
        MembraneLayout {
            epsilon: self.epsilon,
            density: self.density.clone(),
            capacity: self.capacity,
            window: RwLock::new(Window { right: w.right.clone(), left: w.left.clone() }),
        }
    }
}

impl MembraneLayout {
    /// Layout for spacing `epsilon`; indices beyond `±capacity` are refused.
    pub fn new(epsilon: f64, density: Density, capacity: i64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::Domain("epsilon must be positive and finite"));
        }
        if capacity < 1 {
            return Err(Error::Domain("window capacity must be at least one"));
        }
        Ok(MembraneLayout {
            epsilon,
            density,
            capacity,
            window: RwLock::new(Window { right: vec![0.0], left: vec![0.0] }),
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn density(&self) -> &Density {
        &self.density
    }

    pub fn capacity(&self) -> i64 {
        self.capacity
    }

    fn lookup(w: &Window, k: i64) -> Option<f64> {
        if k >= 0 {
            w.right.get(k as usize).copied()
        } else {
            w.left.get((-k) as usize).copied()
        }
    }

    fn grow(&self, w: &mut Window, k: i64) -> Result<()> {
        if k.abs() > self.capacity {
            return Err(Error::WindowExhausted { index: k, capacity: self.capacity });
        }
        let eps = self.epsilon;
        let d = &self.density;
        if k >= 0 {
            while (w.right.len() as i64) <= k {
                let j = w.right.len() as i64 - 1;
                let (lo, hi) = (eps * j as f64, eps * (j + 1) as f64);
                let piece = adaptive_simpson(|x| d.value(x), lo, hi, QUAD_TOL)?;
                let last = *w.right.last().unwrap_or(&0.0);
                w.right.push(last + piece);
            }
        } else {
            while (w.left.len() as i64) <= -k {
                let j = w.left.len() as i64 - 1;
                let (lo, hi) = (-eps * (j + 1) as f64, -eps * j as f64);
                let piece = adaptive_simpson(|x| d.value(x), lo, hi, QUAD_TOL)?;
                let last = *w.left.last().unwrap_or(&0.0);
                w.left.push(last - piece);
            }
        }
        Ok(())
    }

    /// `a_k^ε`.
    pub fn membrane_position(&self, k: i64) -> Result<f64> {
        if let Some(a) = Self::lookup(&self.window.read(), k) {
            return Ok(a);
        }
        let mut w = self.window.write();
        self.grow(&mut w, k)?;
        Ok(Self::lookup(&w, k).expect("window grown to cover k"))
    }

    /// `(a_{k−1}, a_{k+1})`.
    pub fn strip(&self, k: i64) -> Result<(f64, f64)> {
        Ok((self.membrane_position(k - 1)?, self.membrane_position(k + 1)?))
    }

    /// Grows the window to cover `[lo, hi]` plus [`MARGIN_STRIPS`] membranes on each side.
    pub fn ensure_covering(&self, lo: f64, hi: f64) -> Result<()> {
        let mut w = self.window.write();
        let mut k = w.right.len() as i64 - 1;
        while w.right[k as usize] < hi {
            k += 1;
            self.grow(&mut w, k)?;
        }
        self.grow(&mut w, (k + MARGIN_STRIPS).min(self.capacity))?;
        let mut j = w.left.len() as i64 - 1;
        while w.left[j as usize] > lo {
            j += 1;
            self.grow(&mut w, -j)?;
        }
        self.grow(&mut w, -(j + MARGIN_STRIPS).min(self.capacity))?;
        Ok(())
    }

    /// Locates `x`: `a_lo ≤ x ≤ a_hi` with `hi = lo + 1`, or `lo = hi` on a hit.
    pub fn bracketing(&self, x: f64) -> Result<Bracket> {
        if !x.is_finite() {
            return Err(Error::NonFinite("bracketing abscissa"));
        }
        loop {
            {
                let w = self.window.read();
                if let Some(b) = Self::locate(&w, x) {
                    return Ok(b);
                }
            }
            let mut w = self.window.write();
            if x >= 0.0 {
                let next = w.right.len() as i64;
                self.grow(&mut w, next)?;
            } else {
                let next = -(w.left.len() as i64);
                self.grow(&mut w, next)?;
            }
        }
    }

    fn locate(w: &Window, x: f64) -> Option<Bracket> {
        let hit = |a: f64| (x - a).abs() <= HIT_TOL * (1.0 + a.abs());
        let (lo, hi, a_lo, a_hi) = if x >= 0.0 {
            if *w.right.last()? < x && !hit(*w.right.last()?) {
                return None;
            }
            let idx = w.right.partition_point(|&a| a <= x);
            let lo = idx.saturating_sub(1);
            let hi = (lo + 1).min(w.right.len() - 1);
            (lo as i64, hi as i64, w.right[lo], w.right[hi])
        } else {
            if *w.left.last()? > x && !hit(*w.left.last()?) {
                return None;
            }
            let idx = w.left.partition_point(|&a| a > x);
            let j = idx.min(w.left.len() - 1);
            (-(j as i64), -(j as i64) + 1, w.left[j], w.left[j - 1])
        };
        if hit(a_lo) {
            return Some(Bracket { lo, hi: lo, nearest: lo });
        }
        if hit(a_hi) {
            return Some(Bracket { lo: hi, hi, nearest: hi });
        }
        let nearest = if x - a_lo <= a_hi - x { lo } else { hi };
        Some(Bracket { lo, hi, nearest })
    }

    /// All cached `(k, a_k)` pairs in increasing `k`.
    pub fn computed_positions(&self) -> Vec<(i64, f64)> {
        let w = self.window.read();
        let mut out: Vec<(i64, f64)> =
            w.left.iter().enumerate().skip(1).rev().map(|(j, &a)| (-(j as i64), a)).collect();
        out.extend(w.right.iter().enumerate().map(|(k, &a)| (k as i64, a)));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine() -> Density {
        Density::Sine { base: 2.0, amp: 1.0 }
    }

    /// Antiderivative of `2 + sin x`.
    fn sine_primitive(x: f64) -> f64 {
        2.0 * x + 1.0 - libm::cos(x)
    }

    #[test]
    fn equidistant_positions() {
        let l = MembraneLayout::new(0.1, Density::default(), 1000).unwrap();
        assert!((l.membrane_position(5).unwrap() - 0.5).abs() < 1e-14);
        assert_eq!(l.membrane_position(0).unwrap(), 0.0);
        assert!((l.membrane_position(-3).unwrap() + 0.3).abs() < 1e-14);
    }

    #[test]
    fn sine_density_matches_closed_form() {
        let l = MembraneLayout::new(0.1, sine(), 1000).unwrap();
        for k in -20..=20 {
            let a = l.membrane_position(k).unwrap();
            let want = sine_primitive(0.1 * k as f64);
            assert!((a - want).abs() < 1e-12, "k = {k}");
        }
        let a1 = l.membrane_position(1).unwrap();
        assert!((a1 - 0.2049958).abs() < 1e-7);
    }

    #[test]
    fn equidistant_bracketing() {
        let l = MembraneLayout::new(0.1, Density::default(), 1000).unwrap();
        assert_eq!(l.bracketing(0.23).unwrap(), Bracket { lo: 2, hi: 3, nearest: 2 });
        let a4 = l.membrane_position(4).unwrap();
        assert_eq!(l.bracketing(a4).unwrap(), Bracket { lo: 4, hi: 4, nearest: 4 });
        assert_eq!(l.bracketing(-0.27).unwrap(), Bracket { lo: -3, hi: -2, nearest: -3 });
        assert_eq!(l.bracketing(0.0).unwrap(), Bracket { lo: 0, hi: 0, nearest: 0 });
    }

    #[test]
    fn sine_bracketing_agrees_with_closed_form() {
        let l = MembraneLayout::new(0.1, sine(), 1000).unwrap();
        let b = l.bracketing(0.21).unwrap();
        assert_eq!((b.lo, b.hi), (1, 2));
        assert!(sine_primitive(0.1) <= 0.21 && 0.21 <= sine_primitive(0.2));
    }

    #[test]
    fn strips() {
        let l = MembraneLayout::new(0.1, Density::default(), 1000).unwrap();
        let (a, b) = l.strip(0).unwrap();
        assert!((a + 0.1).abs() < 1e-15 && (b - 0.1).abs() < 1e-15);
        let (a, b) = l.strip(3).unwrap();
        assert!((a - 0.2).abs() < 1e-14 && (b - 0.4).abs() < 1e-14);

        let s = MembraneLayout::new(0.1, sine(), 1000).unwrap();
        let (a, b) = s.strip(0).unwrap();
        assert!((b - 0.2049958).abs() < 1e-7);
        assert!((-a - 0.1950042).abs() < 1e-7);
    }

    #[test]
    fn window_exhaustion() {
        let l = MembraneLayout::new(0.1, Density::default(), 5).unwrap();
        assert!(matches!(l.membrane_position(6), Err(Error::WindowExhausted { .. })));
        assert!(matches!(l.bracketing(0.75), Err(Error::WindowExhausted { .. })));
        assert!(l.bracketing(0.45).is_ok());
    }

    #[test]
    fn covering_adds_margin() {
        let l = MembraneLayout::new(0.1, Density::default(), 100).unwrap();
        l.ensure_covering(-1.0, 1.0).unwrap();
        let pos = l.computed_positions();
        assert_eq!(pos.first().unwrap().0, -20);
        assert_eq!(pos.last().unwrap().0, 20);
        assert!(pos.windows(2).all(|w| w[0].1 < w[1].1 && w[1].0 == w[0].0 + 1));
    }

    #[test]
    fn concurrent_readers_see_consistent_positions() {
        let l = std::sync::Arc::new(MembraneLayout::new(0.05, sine(), 10_000).unwrap());
        let handles: std::vec::Vec<_> = (0..4)
            .map(|t| {
                let l = l.clone();
                std::thread::spawn(move || {
                    (0..200).map(|k| l.membrane_position(if t % 2 == 0 { k } else { -k }).unwrap()).sum::<f64>()
                })
            })
            .collect();
        for h in handles {
            h.join().unwrap();
        }
        let pos = l.computed_positions();
        for (k, a) in pos {
            assert!((a - sine_primitive(0.05 * k as f64)).abs() < 1e-11);
        }
    }
}
